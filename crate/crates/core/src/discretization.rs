//! Mesh, reference element and metric terms bundled with the index maps
//! shared by every operator.

use crate::basis::{stride, ReferenceElement};
use crate::error::{Error, Result};
use crate::mesh::{compute_metrics, tangential_dirs, ElementMetrics, FaceLink, Mesh};

/// Neighbor of a face point: element, local face and face point index on that side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacePointLink {
    pub element: usize,
    pub face: usize,
    pub point: usize,
}

#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub reference: ReferenceElement,
    pub metrics: Vec<ElementMetrics>,
    /// Smallest element length scale, `min_e V_e^(1/d)`.
    pub l_ref: f64,
    pub dim: usize,
    pub n1: usize,
    /// Nodes (and sub-cells) per element.
    pub npe: usize,
    /// Points per face.
    pub nfp: usize,
    /// Per local face and face point: first volume index of the normal line.
    face_line_base: Vec<Vec<usize>>,
    /// `[element][face][point]`, `None` on boundary faces.
    neighbors: Vec<Vec<Vec<Option<FacePointLink>>>>,
}

impl Discretization {
    pub fn new(mesh: Mesh, degree: usize) -> Result<Self> {
        let reference = ReferenceElement::new(degree)?;
        let metrics = compute_metrics(&mesh, &reference)?;
        let dim = mesh.dim;
        let n1 = reference.n1();
        let npe = n1.pow(dim as u32);
        let nfp = n1.pow(dim as u32 - 1);
        let l_ref = metrics
            .iter()
            .map(|m| m.volume.powf(1.0 / dim as f64))
            .fold(f64::INFINITY, f64::min);
        if !(l_ref > 0.0) {
            return Err(Error::InvalidArgument("mesh has no elements".into()));
        }

        let face_line_base = (0..2 * dim)
            .map(|f| {
                let tang = tangential_dirs(dim, f / 2);
                (0..nfp)
                    .map(|q| {
                        let mut rem = q;
                        let mut base = 0;
                        for &t in &tang {
                            base += (rem % n1) * stride(n1, t);
                            rem /= n1;
                        }
                        base
                    })
                    .collect()
            })
            .collect();

        let neighbors = mesh
            .links
            .iter()
            .map(|links| {
                links
                    .iter()
                    .map(|link| match *link {
                        FaceLink::Boundary => vec![None; nfp],
                        FaceLink::Interior {
                            element,
                            face,
                            orientation,
                        } => (0..nfp)
                            .map(|q| {
                                let b = orientation.map([q % n1, q / n1], n1);
                                let point = if dim == 2 { b[0] } else { b[0] + n1 * b[1] };
                                Some(FacePointLink {
                                    element,
                                    face,
                                    point,
                                })
                            })
                            .collect(),
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            mesh,
            reference,
            metrics,
            l_ref,
            dim,
            n1,
            npe,
            nfp,
            face_line_base,
            neighbors,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    pub fn degree(&self) -> usize {
        self.reference.degree
    }

    /// Volume index of the `a`-th node on the line normal to face `face` through face point `q`.
    #[inline]
    pub fn face_line_node(&self, face: usize, q: usize, a: usize) -> usize {
        self.face_line_base[face][q] + a * stride(self.n1, face / 2)
    }

    /// Volume index of the node (or sub-cell) adjacent to face point `q`.
    #[inline]
    pub fn face_adjacent_node(&self, face: usize, q: usize) -> usize {
        let a = if face.is_multiple_of(2) { 0 } else { self.n1 - 1 };
        self.face_line_node(face, q, a)
    }

    #[inline]
    pub fn neighbor(&self, e: usize, face: usize, q: usize) -> Option<FacePointLink> {
        self.neighbors[e][face][q]
    }

    /// Polynomial trace of element values `u` at face point `q` of `face`.
    pub fn face_trace(&self, u: &[f64], face: usize, q: usize) -> f64 {
        let interp = &self.reference.face_interp[face % 2];
        (0..self.n1)
            .map(|a| interp[a] * u[self.face_line_node(face, q, a)])
            .sum()
    }

    /// Traces of every element on every face, laid out `[element][face][point]`.
    pub fn all_traces(&self, values: &[f64]) -> Vec<f64> {
        let nf = 2 * self.dim;
        let mut out = vec![0.0; self.num_elements() * nf * self.nfp];
        for (e, chunk) in out.chunks_mut(nf * self.nfp).enumerate() {
            let u = &values[e * self.npe..(e + 1) * self.npe];
            for f in 0..nf {
                for q in 0..self.nfp {
                    chunk[f * self.nfp + q] = self.face_trace(u, f, q);
                }
            }
        }
        out
    }

    #[inline]
    pub fn trace_index(&self, e: usize, face: usize, q: usize) -> usize {
        (e * 2 * self.dim + face) * self.nfp + q
    }

    /// Quadrature weight (without the Jacobian) of volume node `idx`.
    pub fn node_weight(&self, idx: usize) -> f64 {
        let mut w = 1.0;
        let mut rem = idx;
        for _ in 0..self.dim {
            w *= self.reference.weights[rem % self.n1];
            rem /= self.n1;
        }
        w
    }

    /// Tensor index triple of a volume index.
    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n1 = self.n1;
        [idx % n1, (idx / n1) % n1, idx / (n1 * n1)]
    }

    /// Per element, the elements sharing a face with it.
    pub fn face_neighbors(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        self.mesh.links[e].iter().filter_map(|l| match *l {
            FaceLink::Interior { element, .. } => Some(element),
            FaceLink::Boundary => None,
        })
    }
}
