use super::{cross, dot, norm, tangential_dirs, Mesh, Point};
use crate::basis::ReferenceElement;
use crate::error::{Error, Result};

/// Geometry of the element mapping at one volume quadrature node.
#[derive(Debug, Clone, Copy)]
pub struct NodeMetric {
    pub position: Point,
    pub jac: f64,
    /// `covariant[m]` is `a_m = dx/dxi^m`.
    pub covariant: [[f64; 3]; 3],
    /// `contravariant[m]` is `a^m = grad_x xi^m`.
    pub contravariant: [[f64; 3]; 3],
    /// `J a^m`, the metric terms of the transformed flux.
    pub ja: [[f64; 3]; 3],
}

impl NodeMetric {
    pub fn at(mesh: &Mesh, e: usize, xi: Point) -> Self {
        let a = mesh.covariant(e, xi);
        let jac = dot(a[0], cross(a[1], a[2]));
        let mut ja = [cross(a[1], a[2]), cross(a[2], a[0]), cross(a[0], a[1])];
        let mut contravariant = [[0.0; 3]; 3];
        for m in 0..3 {
            for k in 0..3 {
                contravariant[m][k] = ja[m][k] / jac;
            }
        }
        if mesh.dim == 2 {
            ja[2] = [0.0; 3];
            contravariant[2] = [0.0; 3];
        }
        Self {
            position: mesh.map_point(e, xi),
            jac,
            covariant: a,
            contravariant,
            ja,
        }
    }
}

/// Geometry at the quadrature points of one element face.
#[derive(Debug, Clone)]
pub struct FaceMetric {
    pub points: Vec<Point>,
    /// Outward normal scaled by the surface element, `+-J a^m` on face `xi^m = +-1`.
    pub scaled_normal: Vec<[f64; 3]>,
    /// Outward unit normal.
    pub normal: Vec<[f64; 3]>,
}

#[derive(Debug, Clone)]
pub struct ElementMetrics {
    pub nodes: Vec<NodeMetric>,
    pub faces: Vec<FaceMetric>,
    pub volume: f64,
    /// Characteristic length `2 / sum_m |a^m|` with element-mean magnitudes.
    pub dx: f64,
    pub barycenter: Point,
}

/// Reference coordinates of volume node `idx` of a tensor element.
pub fn node_ref(reference: &ReferenceElement, dim: usize, idx: usize) -> Point {
    let n1 = reference.n1();
    let mut xi = [0.0; 3];
    let mut rem = idx;
    for x in xi.iter_mut().take(dim) {
        *x = reference.nodes[rem % n1];
        rem /= n1;
    }
    xi
}

/// Reference coordinates of point `q` on local face `face`.
pub fn face_point_ref(reference: &ReferenceElement, dim: usize, face: usize, q: usize) -> Point {
    let n1 = reference.n1();
    let dir = face / 2;
    let mut xi = [0.0; 3];
    xi[dir] = if face.is_multiple_of(2) { -1.0 } else { 1.0 };
    let mut rem = q;
    for t in tangential_dirs(dim, dir) {
        xi[t] = reference.nodes[rem % n1];
        rem /= n1;
    }
    xi
}

pub fn compute_metrics(mesh: &Mesh, reference: &ReferenceElement) -> Result<Vec<ElementMetrics>> {
    let dim = mesh.dim;
    let n1 = reference.n1();
    let npe = n1.pow(dim as u32);
    let nfp = n1.pow(dim as u32 - 1);
    let mut out = Vec::with_capacity(mesh.num_elements());
    for e in 0..mesh.num_elements() {
        let mut nodes = Vec::with_capacity(npe);
        let mut volume = 0.0;
        let mut bary = [0.0; 3];
        let mut contra_mag = [0.0; 3];
        for idx in 0..npe {
            let xi = node_ref(reference, dim, idx);
            let nm = NodeMetric::at(mesh, e, xi);
            if nm.jac <= 0.0 || !nm.jac.is_finite() {
                return Err(Error::InvertedElement {
                    element: e,
                    jacobian: nm.jac,
                });
            }
            let mut w = nm.jac;
            let mut rem = idx;
            for _ in 0..dim {
                w *= reference.weights[rem % n1];
                rem /= n1;
            }
            volume += w;
            for k in 0..3 {
                bary[k] += w * nm.position[k];
            }
            for m in 0..dim {
                contra_mag[m] += norm(nm.contravariant[m]);
            }
            nodes.push(nm);
        }
        for b in bary.iter_mut() {
            *b /= volume;
        }
        let sum_mag: f64 = contra_mag[..dim].iter().map(|s| s / npe as f64).sum();
        let dx = 2.0 / sum_mag;

        let mut faces = Vec::with_capacity(2 * dim);
        for f in 0..2 * dim {
            let dir = f / 2;
            let sign = if f % 2 == 0 { -1.0 } else { 1.0 };
            let mut fm = FaceMetric {
                points: Vec::with_capacity(nfp),
                scaled_normal: Vec::with_capacity(nfp),
                normal: Vec::with_capacity(nfp),
            };
            for q in 0..nfp {
                let xi = face_point_ref(reference, dim, f, q);
                let nm = NodeMetric::at(mesh, e, xi);
                let sn = [sign * nm.ja[dir][0], sign * nm.ja[dir][1], sign * nm.ja[dir][2]];
                let len = norm(sn);
                fm.points.push(nm.position);
                fm.scaled_normal.push(sn);
                fm.normal.push([sn[0] / len, sn[1] / len, sn[2] / len]);
            }
            faces.push(fm);
        }
        out.push(ElementMetrics {
            nodes,
            faces,
            volume,
            dx,
            barycenter: bary,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::FaceLink;

    #[test]
    fn cartesian_square_metrics() {
        let h = 0.125;
        let mesh = Mesh::cartesian(&[0.0, 0.0], &[h, h], &[1, 1]).unwrap();
        let r = ReferenceElement::new(3).unwrap();
        let m = compute_metrics(&mesh, &r).unwrap();
        for nm in &m[0].nodes {
            assert!((nm.jac - h * h / 4.0).abs() < 1e-15);
            assert!((norm(nm.contravariant[0]) - 2.0 / h).abs() < 1e-12);
            assert!((norm(nm.contravariant[1]) - 2.0 / h).abs() < 1e-12);
        }
        assert!((m[0].dx - h / 2.0).abs() < 1e-15);
        assert!((m[0].volume - h * h).abs() < 1e-15);
    }

    #[test]
    fn cartesian_cube_dx() {
        let mesh = Mesh::cartesian(&[0.0; 3], &[1.0; 3], &[4, 4, 4]).unwrap();
        let r = ReferenceElement::new(2).unwrap();
        let m = compute_metrics(&mesh, &r).unwrap();
        for em in &m {
            assert!((em.dx - 0.25 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rotation_preserves_jacobian() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let nodes = vec![[0.0, 0.0, 0.0], [c, c, 0.0], [0.0, 2.0 * c, 0.0], [-c, c, 0.0]];
        let mesh = Mesh::from_parts(2, nodes, vec![vec![0, 1, 2, 3]]).unwrap();
        let r = ReferenceElement::new(2).unwrap();
        let m = compute_metrics(&mesh, &r).unwrap();
        for nm in &m[0].nodes {
            assert!((nm.jac - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn biorthogonal_bases_and_volume_on_distorted_mesh() {
        for (lo, hi, counts) in [
            (vec![0.0, 0.0], vec![1.0, 1.0], vec![5, 4]),
            (vec![0.0; 3], vec![1.0; 3], vec![3, 3, 2]),
        ] {
            let mesh = Mesh::perturbed(&lo, &hi, &counts, 0.15, 11).unwrap();
            let r = ReferenceElement::new(3).unwrap();
            let m = compute_metrics(&mesh, &r).unwrap();
            let total: f64 = m.iter().map(|em| em.volume).sum();
            assert!((total - 1.0).abs() < 1e-12);
            for em in &m {
                for nm in &em.nodes {
                    assert!(nm.jac > 0.0);
                    for a in 0..mesh.dim {
                        for b in 0..mesh.dim {
                            let d = dot(nm.covariant[a], nm.contravariant[b]);
                            let e = if a == b { 1.0 } else { 0.0 };
                            assert!((d - e).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn neighbor_normals_are_opposite() {
        let mesh = Mesh::perturbed(&[0.0; 3], &[1.0; 3], &[3, 2, 2], 0.1, 5).unwrap();
        let r = ReferenceElement::new(2).unwrap();
        let m = compute_metrics(&mesh, &r).unwrap();
        let n1 = r.n1();
        for e in 0..mesh.num_elements() {
            for f in 0..6 {
                if let FaceLink::Interior { element, face, orientation } = mesh.links[e][f] {
                    for q in 0..n1 * n1 {
                        let b = orientation.map([q % n1, q / n1], n1);
                        let qb = b[0] + n1 * b[1];
                        let na = m[e].faces[f].scaled_normal[q];
                        let nb = m[element].faces[face].scaled_normal[qb];
                        for k in 0..3 {
                            assert!((na[k] + nb[k]).abs() < 1e-12);
                        }
                        let pa = m[e].faces[f].points[q];
                        let pb = m[element].faces[face].points[qb];
                        for k in 0..3 {
                            assert!((pa[k] - pb[k]).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }
}
