//! Conforming quadrilateral (2D) and hexahedral (3D) meshes with straight-sided
//! bilinear/trilinear element mappings.
//!
//! Reference corner ordering is counterclockwise in 2D, `(-1,-1), (1,-1), (1,1), (-1,1)`,
//! and in 3D the same four corners at `zeta = -1` followed by the four at `zeta = 1`.
//! Local face `f` lies on reference direction `f / 2` at side `-1` (even) or `+1` (odd).

mod io;
mod metrics;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use io::{read_mesh, write_mesh};
pub use metrics::{compute_metrics, ElementMetrics, FaceMetric, NodeMetric};

pub type Point = [f64; 3];

/// Maps tangential face coordinates of one side of a face onto the other side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Orientation {
    /// Tangential directions are exchanged (3D only).
    pub swap: bool,
    /// Direction reversal of the first and second tangential coordinate.
    pub flip: [bool; 2],
}

impl Orientation {
    /// Maps a tangential index pair on this side to the neighbor's index pair,
    /// for `n1` points per direction symmetric about zero.
    #[inline]
    pub fn map(&self, idx: [usize; 2], n1: usize) -> [usize; 2] {
        let t0 = if self.flip[0] { n1 - 1 - idx[0] } else { idx[0] };
        let t1 = if self.flip[1] { n1 - 1 - idx[1] } else { idx[1] };
        if self.swap {
            [t1, t0]
        } else {
            [t0, t1]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceLink {
    Boundary,
    Interior {
        element: usize,
        face: usize,
        orientation: Orientation,
    },
}

/// A mesh face: one or two adjacent elements with their local face ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub elements: [usize; 2],
    pub local_faces: [usize; 2],
    /// `None` marks a boundary face; `elements[1]` is then meaningless.
    pub orientation: Option<Orientation>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.orientation.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    pub nodes: Vec<Point>,
    /// Corner node indices, 4 per element in 2D and 8 in 3D.
    pub elements: Vec<Vec<usize>>,
    pub faces: Vec<Face>,
    /// Per element, per local face.
    pub links: Vec<Vec<FaceLink>>,
    /// Element counts per axis for meshes from the Cartesian generator.
    pub structured: Option<Vec<usize>>,
}

/// Reference coordinates of corner `c`.
pub fn corner_ref(dim: usize, c: usize) -> Point {
    const XY: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
    let xy = XY[c % 4];
    let z = if dim == 3 {
        if c < 4 {
            -1.0
        } else {
            1.0
        }
    } else {
        0.0
    };
    [xy[0], xy[1], z]
}

/// Tangential directions of a face with normal direction `dir`, ascending.
pub fn tangential_dirs(dim: usize, dir: usize) -> Vec<usize> {
    (0..dim).filter(|&m| m != dir).collect()
}

/// Local corner indices of face `face`, ordered by tangential coordinates
/// (first tangential direction fastest).
pub fn face_corners(dim: usize, face: usize) -> Vec<usize> {
    let dir = face / 2;
    let side = if face.is_multiple_of(2) { -1.0 } else { 1.0 };
    let tang = tangential_dirs(dim, dir);
    let mut corners: Vec<usize> = (0..(1 << dim))
        .filter(|&c| corner_ref(dim, c)[dir] == side)
        .collect();
    corners.sort_by_key(|&c| {
        let r = corner_ref(dim, c);
        let mut key = 0;
        for (k, &t) in tang.iter().enumerate() {
            if r[t] > 0.0 {
                key += 1 << k;
            }
        }
        key
    });
    corners
}

impl Mesh {
    /// Builds a mesh from raw nodes and elements, computing connectivity.
    pub fn from_parts(dim: usize, nodes: Vec<Point>, elements: Vec<Vec<usize>>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidArgument(format!("dimension {dim} not supported")));
        }
        let ncorner = 1 << dim;
        for (e, el) in elements.iter().enumerate() {
            if el.len() != ncorner {
                return Err(Error::InvalidElement {
                    element: e,
                    message: format!("expected {ncorner} nodes, found {}", el.len()),
                });
            }
            if let Some(&bad) = el.iter().find(|&&n| n >= nodes.len()) {
                return Err(Error::InvalidElement {
                    element: e,
                    message: format!("node index {bad} out of range (0..{})", nodes.len()),
                });
            }
        }
        let mut mesh = Self {
            dim,
            nodes,
            elements,
            faces: Vec::new(),
            links: Vec::new(),
            structured: None,
        };
        for e in 0..mesh.elements.len() {
            for c in 0..ncorner {
                let j = mesh.jacobian_det(e, corner_ref(dim, c));
                if j <= 0.0 || !j.is_finite() {
                    return Err(Error::InvertedElement { element: e, jacobian: j });
                }
            }
        }
        mesh.build_connectivity()?;
        Ok(mesh)
    }

    fn build_connectivity(&mut self) -> Result<()> {
        let dim = self.dim;
        let nfaces = 2 * dim;
        let mut open: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let mut links = vec![vec![FaceLink::Boundary; nfaces]; self.elements.len()];
        for e in 0..self.elements.len() {
            for f in 0..nfaces {
                let mut key: Vec<usize> = face_corners(dim, f)
                    .iter()
                    .map(|&c| self.elements[e][c])
                    .collect();
                key.sort_unstable();
                match open.get(&key) {
                    None => {
                        open.insert(key, faces.len());
                        faces.push(Face {
                            elements: [e, e],
                            local_faces: [f, f],
                            orientation: None,
                        });
                    }
                    Some(&idx) => {
                        let face = &mut faces[idx];
                        if face.orientation.is_some() {
                            return Err(Error::NonConforming(format!(
                                "face of element {e} shared by more than two elements"
                            )));
                        }
                        let (a, fa) = (face.elements[0], face.local_faces[0]);
                        let orient = self.orientation_between(a, fa, e, f)?;
                        face.elements[1] = e;
                        face.local_faces[1] = f;
                        face.orientation = Some(orient);
                        links[a][fa] = FaceLink::Interior {
                            element: e,
                            face: f,
                            orientation: orient,
                        };
                        links[e][f] = FaceLink::Interior {
                            element: a,
                            face: fa,
                            orientation: self.orientation_between(e, f, a, fa)?,
                        };
                    }
                }
            }
        }
        self.faces = faces;
        self.links = links;
        Ok(())
    }

    /// Tangential signs of every corner of face `fb` of element `b`, keyed by global node.
    fn face_corner_signs(&self, b: usize, fb: usize) -> HashMap<usize, [f64; 2]> {
        let dim = self.dim;
        let tang = tangential_dirs(dim, fb / 2);
        face_corners(dim, fb)
            .into_iter()
            .map(|c| {
                let r = corner_ref(dim, c);
                let mut s = [0.0; 2];
                for (k, &t) in tang.iter().enumerate() {
                    s[k] = r[t];
                }
                (self.elements[b][c], s)
            })
            .collect()
    }

    fn orientation_between(&self, a: usize, fa: usize, b: usize, fb: usize) -> Result<Orientation> {
        let dim = self.dim;
        let ca = face_corners(dim, fa);
        let signs_b = self.face_corner_signs(b, fb);
        let lookup = |c: usize| -> Result<[f64; 2]> {
            signs_b.get(&self.elements[a][c]).copied().ok_or_else(|| {
                Error::NonConforming(format!("elements {a} and {b} share a face with mismatched nodes"))
            })
        };
        if dim == 2 {
            let v0 = lookup(ca[0])?;
            return Ok(Orientation {
                swap: false,
                flip: [v0[0] > 0.0, false],
            });
        }
        let v00 = lookup(ca[0])?;
        let v10 = lookup(ca[1])?;
        let v01 = lookup(ca[2])?;
        let k1 = if v00[0] != v10[0] { 0 } else { 1 };
        let k2 = 1 - k1;
        Ok(Orientation {
            swap: k1 == 1,
            flip: [v10[k1] < 0.0, v01[k2] < 0.0],
        })
    }

    /// Axis-aligned structured mesh of `counts[m]` elements per axis on the box `[lo, hi]`.
    pub fn cartesian(lo: &[f64], hi: &[f64], counts: &[usize]) -> Result<Self> {
        let dim = counts.len();
        if (dim != 2 && dim != 3) || lo.len() != dim || hi.len() != dim {
            return Err(Error::InvalidArgument(
                "box bounds and counts must all have length 2 or 3".into(),
            ));
        }
        if counts.contains(&0) {
            return Err(Error::InvalidArgument(format!("element counts must be >= 1, got {counts:?}")));
        }
        if (0..dim).any(|m| !(hi[m] > lo[m])) {
            return Err(Error::InvalidArgument("degenerate box".into()));
        }
        let np: Vec<usize> = counts.iter().map(|c| c + 1).collect();
        let nz = if dim == 3 { np[2] } else { 1 };
        let mut nodes = Vec::with_capacity(np.iter().product());
        for k in 0..nz {
            for j in 0..np[1] {
                for i in 0..np[0] {
                    let coord = |m: usize, idx: usize| {
                        lo[m] + (hi[m] - lo[m]) * idx as f64 / counts[m] as f64
                    };
                    let z = if dim == 3 { coord(2, k) } else { 0.0 };
                    nodes.push([coord(0, i), coord(1, j), z]);
                }
            }
        }
        let node_id = |i: usize, j: usize, k: usize| i + np[0] * (j + np[1] * k);
        let ez = if dim == 3 { counts[2] } else { 1 };
        let mut elements = Vec::with_capacity(counts.iter().product());
        for k in 0..ez {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let mut el = vec![
                        node_id(i, j, k),
                        node_id(i + 1, j, k),
                        node_id(i + 1, j + 1, k),
                        node_id(i, j + 1, k),
                    ];
                    if dim == 3 {
                        el.extend([
                            node_id(i, j, k + 1),
                            node_id(i + 1, j, k + 1),
                            node_id(i + 1, j + 1, k + 1),
                            node_id(i, j + 1, k + 1),
                        ]);
                    }
                    elements.push(el);
                }
            }
        }
        let mut mesh = Self::from_parts(dim, nodes, elements)?;
        mesh.structured = Some(counts.to_vec());
        Ok(mesh)
    }

    /// Cartesian mesh whose interior nodes are displaced uniformly at random by
    /// up to `amplitude` times the local spacing in each coordinate.
    pub fn perturbed(lo: &[f64], hi: &[f64], counts: &[usize], amplitude: f64, seed: u64) -> Result<Self> {
        let base = Self::cartesian(lo, hi, counts)?;
        let dim = base.dim;
        let h: Vec<f64> = (0..dim).map(|m| (hi[m] - lo[m]) / counts[m] as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tol = 1e-12 * h.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut nodes = base.nodes.clone();
        for p in nodes.iter_mut() {
            let interior = (0..dim).all(|m| p[m] > lo[m] + tol && p[m] < hi[m] - tol);
            if interior {
                for m in 0..dim {
                    p[m] += rng.gen_range(-amplitude..=amplitude) * h[m];
                }
            }
        }
        Self::from_parts(dim, nodes, base.elements)
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_interior_faces(&self) -> usize {
        self.faces.iter().filter(|f| !f.is_boundary()).count()
    }

    pub fn num_boundary_faces(&self) -> usize {
        self.faces.iter().filter(|f| f.is_boundary()).count()
    }

    /// Trilinear shape functions and their reference derivatives at `xi`.
    fn shape(&self, xi: Point) -> ([f64; 8], [[f64; 3]; 8]) {
        let dim = self.dim;
        let mut n = [0.0; 8];
        let mut dn = [[0.0; 3]; 8];
        for c in 0..(1 << dim) {
            let r = corner_ref(dim, c);
            let f: Vec<f64> = (0..dim).map(|m| 0.5 * (1.0 + r[m] * xi[m])).collect();
            n[c] = f.iter().product();
            for m in 0..dim {
                let mut d = 0.5 * r[m];
                for k in 0..dim {
                    if k != m {
                        d *= f[k];
                    }
                }
                dn[c][m] = d;
            }
        }
        (n, dn)
    }

    /// Physical coordinates of reference point `xi` in element `e`.
    pub fn map_point(&self, e: usize, xi: Point) -> Point {
        let (n, _) = self.shape(xi);
        let mut x = [0.0; 3];
        for (c, &node) in self.elements[e].iter().enumerate() {
            for k in 0..3 {
                x[k] += n[c] * self.nodes[node][k];
            }
        }
        x
    }

    /// Covariant basis vectors `a_m = dx/dxi^m` at `xi`. In 2D the third vector is `e_z`.
    pub fn covariant(&self, e: usize, xi: Point) -> [[f64; 3]; 3] {
        let (_, dn) = self.shape(xi);
        let mut a = [[0.0; 3]; 3];
        for (c, &node) in self.elements[e].iter().enumerate() {
            for m in 0..self.dim {
                for k in 0..3 {
                    a[m][k] += dn[c][m] * self.nodes[node][k];
                }
            }
        }
        if self.dim == 2 {
            a[2] = [0.0, 0.0, 1.0];
        }
        a
    }

    pub fn jacobian_det(&self, e: usize, xi: Point) -> f64 {
        let a = self.covariant(e, xi);
        dot(a[0], cross(a[1], a[2]))
    }
}

#[inline]
pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_counts() {
        let m = Mesh::cartesian(&[0.0, 0.0], &[1.0, 1.0], &[16, 16]).unwrap();
        assert_eq!(m.num_elements(), 256);
        let side = m.nodes[m.elements[0][1]][0] - m.nodes[m.elements[0][0]][0];
        assert!((side - 1.0 / 16.0).abs() < 1e-15);

        let m = Mesh::cartesian(&[-1.0, -1.0], &[1.0, 1.0], &[33, 33]).unwrap();
        assert_eq!(m.num_elements(), 1089);
        let side = m.nodes[m.elements[0][1]][0] - m.nodes[m.elements[0][0]][0];
        assert!((side - 2.0 / 33.0).abs() < 1e-15);
    }

    #[test]
    fn single_element_faces() {
        let m = Mesh::cartesian(&[0.0, 0.0], &[1.0, 1.0], &[1, 1]).unwrap();
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.num_boundary_faces(), 4);
        assert_eq!(m.num_interior_faces(), 0);
    }

    #[test]
    fn zero_count_rejected() {
        assert!(matches!(
            Mesh::cartesian(&[0.0, 0.0], &[1.0, 1.0], &[0, 3]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(Mesh::cartesian(&[0.0, 0.0], &[0.0, 1.0], &[2, 2]).is_err());
    }

    #[test]
    fn face_counts_3d() {
        let m = Mesh::cartesian(&[0.0; 3], &[1.0; 3], &[2, 3, 4]).unwrap();
        assert_eq!(m.num_elements(), 24);
        // interior faces: (nx-1) ny nz + nx (ny-1) nz + nx ny (nz-1)
        assert_eq!(m.num_interior_faces(), 12 + 16 + 18);
        assert_eq!(m.num_boundary_faces(), 2 * (12 + 8 + 6));
    }

    #[test]
    fn every_interior_face_links_back() {
        let m = Mesh::perturbed(&[0.0; 3], &[1.0; 3], &[3, 3, 3], 0.1, 7).unwrap();
        for (e, links) in m.links.iter().enumerate() {
            for (f, link) in links.iter().enumerate() {
                if let FaceLink::Interior { element, face, .. } = *link {
                    match m.links[element][face] {
                        FaceLink::Interior { element: e2, face: f2, .. } => {
                            assert_eq!((e2, f2), (e, f));
                        }
                        FaceLink::Boundary => panic!("asymmetric link"),
                    }
                }
            }
        }
    }

    #[test]
    fn orientation_maps_shared_corners() {
        // Two hexes sharing a face, second one rotated about the shared face normal.
        let nodes = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
            [0.0, 1.0, 1.0],
            [2.0, 0.0, 0.0],
            [2.0, 1.0, 0.0],
            [2.0, 0.0, 1.0],
            [2.0, 1.0, 1.0],
        ];
        // Element 1 occupies [1,2]x[0,1]x[0,1] with local axes permuted:
        // xi -> +x, eta -> +z, zeta -> -y.
        let e1 = vec![2, 9, 11, 6, 1, 8, 10, 5];
        let e0 = vec![0, 1, 2, 3, 4, 5, 6, 7];
        let m = Mesh::from_parts(3, nodes, vec![e0, e1]).unwrap();
        let FaceLink::Interior { element, face, orientation } = m.links[0][1] else {
            panic!("expected interior link");
        };
        assert_eq!(element, 1);
        // Check that mapped tangential corner positions land on the same physical point.
        let n1 = 2;
        let ta = tangential_dirs(3, 0);
        let tb = tangential_dirs(3, face / 2);
        for a0 in 0..2 {
            for a1 in 0..2 {
                let mut xa = [0.0; 3];
                xa[0] = 1.0;
                xa[ta[0]] = [-1.0, 1.0][a0];
                xa[ta[1]] = [-1.0, 1.0][a1];
                let b = orientation.map([a0, a1], n1);
                let mut xb = [0.0; 3];
                xb[face / 2] = if face % 2 == 0 { -1.0 } else { 1.0 };
                xb[tb[0]] = [-1.0, 1.0][b[0]];
                xb[tb[1]] = [-1.0, 1.0][b[1]];
                let pa = m.map_point(0, xa);
                let pb = m.map_point(1, xb);
                for k in 0..3 {
                    assert!((pa[k] - pb[k]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn inverted_element_rejected() {
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        let err = Mesh::from_parts(2, nodes, vec![vec![0, 3, 2, 1]]).unwrap_err();
        assert!(matches!(err, Error::InvertedElement { element: 0, .. }));
    }

    #[test]
    fn three_elements_on_one_face_rejected() {
        let nodes = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [2.0, 0.0, 0.0],
            [2.0, 1.0, 0.0],
        ];
        let e = vec![vec![0, 1, 2, 3], vec![1, 4, 5, 2], vec![1, 4, 5, 2]];
        assert!(matches!(Mesh::from_parts(2, nodes, e), Err(Error::NonConforming(_))));
    }
}
