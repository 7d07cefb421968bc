//! First-order finite-volume scheme on the equidistant sub-cells of each element.
//!
//! Gradients come from small least-squares systems built per sub-cell, per
//! physical direction and per bias (upwind/downwind). Each row of a system
//! holds the barycenter offset across one reference direction, with donors
//! picked component-wise from the face normal like the LDG fluxes.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::ldg::GradientPair;
use crate::mesh::{norm, NodeMetric, Point};

/// Connectivity and geometry of the sub-cell grid. Sub-cells are numbered
/// `element * npe + local`, with the local index laid out like volume nodes.
#[derive(Debug, Clone)]
pub struct SubcellTopology {
    pub dim: usize,
    pub npe: usize,
    pub barycenters: Vec<Point>,
    /// Per sub-cell and side (`2 * dir + {0: minus, 1: plus}`): neighbor sub-cell or boundary.
    pub links: Vec<Option<usize>>,
    /// Outward unit normal per sub-cell and side.
    pub normals: Vec<[f64; 3]>,
}

impl SubcellTopology {
    pub fn build(disc: &Discretization) -> Self {
        let dim = disc.dim;
        let n1 = disc.n1;
        let npe = disc.npe;
        let nsides = 2 * dim;
        let r = &disc.reference;
        let n_elem = disc.num_elements();
        let mut barycenters = Vec::with_capacity(n_elem * npe);
        let mut links = Vec::with_capacity(n_elem * npe * nsides);
        let mut normals = Vec::with_capacity(n_elem * npe * nsides);
        for e in 0..n_elem {
            for s in 0..npe {
                let ijk = disc.unravel(s);
                let mut center = [0.0; 3];
                for m in 0..dim {
                    center[m] = r.subcell_centers[ijk[m]];
                }
                barycenters.push(disc.mesh.map_point(e, center));
                for side in 0..nsides {
                    let m = side / 2;
                    let plus = side % 2 == 1;
                    let at_face = if plus { ijk[m] == n1 - 1 } else { ijk[m] == 0 };
                    let link = if at_face {
                        let q = face_point_of(disc, side, ijk);
                        disc.neighbor(e, side, q)
                            .map(|l| l.element * npe + disc.face_adjacent_node(l.face, l.point))
                    } else {
                        let st = n1.pow(m as u32);
                        Some(e * npe + if plus { s + st } else { s - st })
                    };
                    links.push(link);
                    let mut xi = center;
                    xi[m] = r.subcell_bounds[ijk[m] + usize::from(plus)];
                    let a = NodeMetric::at(&disc.mesh, e, xi).contravariant[m];
                    let len = norm(a);
                    let sg = if plus { 1.0 } else { -1.0 };
                    normals.push([sg * a[0] / len, sg * a[1] / len, sg * a[2] / len]);
                }
            }
        }
        Self {
            dim,
            npe,
            barycenters,
            links,
            normals,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.barycenters.len()
    }

    #[inline]
    pub fn link(&self, cell: usize, side: usize) -> Option<usize> {
        self.links[cell * 2 * self.dim + side]
    }

    #[inline]
    pub fn normal(&self, cell: usize, side: usize) -> [f64; 3] {
        self.normals[cell * 2 * self.dim + side]
    }
}

/// Face point index of the sub-cell with tensor index `ijk` on local face `face`.
fn face_point_of(disc: &Discretization, face: usize, ijk: [usize; 3]) -> usize {
    let dir = face / 2;
    let mut q = 0;
    let mut mult = 1;
    for t in 0..disc.dim {
        if t != dir {
            q += ijk[t] * mult;
            mult *= disc.n1;
        }
    }
    q
}

/// How a least-squares system was resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilKind {
    LeastSquares,
    DirectDifference,
    PseudoInverse,
    ZeroGradient,
}

/// Solution of `M g = jumps` in the least-squares sense: `weights[r][i]` is the
/// weight of row `r`'s jump in gradient component `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsSolution {
    pub weights: Vec<[f64; 3]>,
    pub kind: StencilKind,
}

fn invertible(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let scale: f64 = (0..n).map(|k| a[(k, k)].abs()).product();
    if !(scale > 0.0) {
        return None;
    }
    let det = a.determinant();
    if det.abs() <= 1e-12 * scale {
        return None;
    }
    a.clone().try_inverse()
}

/// Solves a barycenter-offset system after deleting zero rows and columns
/// (entries below `tol` count as zero). Returns `None` when the reduced system
/// is rank deficient in a way none of the enumerated cases covers.
pub fn solve_offsets(rows: &[[f64; 3]], dim: usize, tol: f64) -> Option<LsSolution> {
    let mut weights = vec![[0.0; 3]; rows.len()];
    let keep_rows: Vec<usize> = (0..rows.len())
        .filter(|&r| rows[r][..dim].iter().any(|v| v.abs() >= tol))
        .collect();
    let keep_cols: Vec<usize> = (0..dim)
        .filter(|&c| keep_rows.iter().any(|&r| rows[r][c].abs() >= tol))
        .collect();
    let (nr, nc) = (keep_rows.len(), keep_cols.len());
    if nr == 0 || nc == 0 {
        return Some(LsSolution {
            weights,
            kind: StencilKind::ZeroGradient,
        });
    }
    let m = DMatrix::from_fn(nr, nc, |a, b| {
        let v = rows[keep_rows[a]][keep_cols[b]];
        if v.abs() < tol {
            0.0
        } else {
            v
        }
    });

    let diagonal = nr == nc && (0..nr).all(|a| (0..nc).all(|b| a == b || m[(a, b)] == 0.0));
    let (w, kind) = if diagonal {
        let w = DMatrix::from_fn(nc, nr, |a, b| if a == b { 1.0 / m[(a, a)] } else { 0.0 });
        (w, StencilKind::DirectDifference)
    } else if nr >= nc {
        let mtm = m.transpose() * &m;
        (invertible(&mtm)? * m.transpose(), StencilKind::LeastSquares)
    } else {
        let mmt = &m * m.transpose();
        (m.transpose() * invertible(&mmt)?, StencilKind::PseudoInverse)
    };
    for (b, &c) in keep_cols.iter().enumerate() {
        for (a, &r) in keep_rows.iter().enumerate() {
            weights[r][c] = w[(b, a)];
        }
    }
    Some(LsSolution { weights, kind })
}

/// One gradient component's stencil: per reference direction, the jump
/// `value(plus side) - value(minus side)` and its weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilRow {
    pub weights: [f64; 3],
    /// Per reference direction and side (minus, plus): take the neighbor value.
    pub use_neighbor: [[bool; 2]; 3],
    pub kind: StencilKind,
}

/// Precomputed upwind/downwind least-squares operators for every sub-cell.
#[derive(Debug, Clone)]
pub struct LsOperators {
    pub dim: usize,
    /// Indexed `(cell * dim + component) * 2 + bias`, bias 0 upwind (`p`), 1 downwind (`q`).
    pub rows: Vec<StencilRow>,
}

impl LsOperators {
    #[inline]
    pub fn row(&self, cell: usize, component: usize, downwind: bool) -> &StencilRow {
        &self.rows[(cell * self.dim + component) * 2 + usize::from(downwind)]
    }
}

pub fn build_ls_operators(disc: &Discretization, topo: &SubcellTopology) -> Result<LsOperators> {
    let dim = topo.dim;
    let tol = 1e-13 * disc.l_ref;
    let rows: Result<Vec<Vec<StencilRow>>> = (0..topo.num_cells())
        .into_par_iter()
        .map(|cell| {
            let mut out = Vec::with_capacity(2 * dim);
            for i in 0..dim {
                for downwind in [false, true] {
                    let mut use_neighbor = [[false; 2]; 3];
                    let mut offsets = vec![[0.0; 3]; dim];
                    for m in 0..dim {
                        let mut pos = [topo.barycenters[cell]; 2];
                        for side in 0..2 {
                            let s = 2 * m + side;
                            let upwind_ext = topo.normal(cell, s)[i] >= 0.0;
                            let ext = upwind_ext != downwind;
                            if let (true, Some(nb)) = (ext, topo.link(cell, s)) {
                                use_neighbor[m][side] = true;
                                pos[side] = topo.barycenters[nb];
                            }
                        }
                        for k in 0..3 {
                            offsets[m][k] = pos[1][k] - pos[0][k];
                        }
                    }
                    let sol = solve_offsets(&offsets, dim, tol).ok_or(Error::SingularStencil {
                        element: cell / topo.npe,
                        subcell: cell % topo.npe,
                        direction: i,
                    })?;
                    let mut weights = [0.0; 3];
                    for m in 0..dim {
                        weights[m] = sol.weights[m][i];
                    }
                    let kind = if weights.iter().all(|w| *w == 0.0) {
                        StencilKind::ZeroGradient
                    } else {
                        sol.kind
                    };
                    out.push(StencilRow {
                        weights,
                        use_neighbor,
                        kind,
                    });
                }
            }
            Ok(out)
        })
        .collect();
    Ok(LsOperators {
        dim,
        rows: rows?.into_iter().flatten().collect(),
    })
}

/// Evaluates one stencil row on sub-cell means.
#[inline]
fn apply_row(topo: &SubcellTopology, row: &StencilRow, cell: usize, means: &[f64]) -> f64 {
    let own = means[cell];
    let mut g = 0.0;
    for m in 0..topo.dim {
        if row.weights[m] == 0.0 {
            continue;
        }
        let value = |side: usize| {
            if row.use_neighbor[m][side] {
                topo.link(cell, 2 * m + side).map_or(own, |nb| means[nb])
            } else {
                own
            }
        };
        g += row.weights[m] * (value(1) - value(0));
    }
    g
}

/// Upwind/downwind gradients on every sub-cell of the active elements.
pub fn fv_gradients(
    topo: &SubcellTopology,
    ops: &LsOperators,
    means: &[f64],
    active: Option<&[bool]>,
) -> GradientPair {
    let npe = topo.npe;
    let dim = topo.dim;
    let total = topo.num_cells();
    let mut p = vec![[0.0; 3]; total];
    let mut q = vec![[0.0; 3]; total];
    p.par_chunks_mut(npe)
        .zip(q.par_chunks_mut(npe))
        .enumerate()
        .for_each(|(e, (pe, qe))| {
            if !active.is_none_or(|a| a[e]) {
                return;
            }
            for s in 0..npe {
                let cell = e * npe + s;
                for i in 0..dim {
                    pe[s][i] = apply_row(topo, ops.row(cell, i, false), cell, means);
                    qe[s][i] = apply_row(topo, ops.row(cell, i, true), cell, means);
                }
            }
        });
    GradientPair { p, q }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn setup(mesh: Mesh, degree: usize) -> (Discretization, SubcellTopology, LsOperators) {
        let d = Discretization::new(mesh, degree).unwrap();
        let t = SubcellTopology::build(&d);
        let o = build_ls_operators(&d, &t).unwrap();
        (d, t, o)
    }

    fn interior(t: &SubcellTopology, cell: usize) -> bool {
        (0..2 * t.dim).all(|s| t.link(cell, s).is_some())
    }

    #[test]
    fn links_are_symmetric() {
        let mesh = Mesh::perturbed(&[0.0; 3], &[1.0; 3], &[2, 3, 2], 0.1, 3).unwrap();
        let d = Discretization::new(mesh, 2).unwrap();
        let t = SubcellTopology::build(&d);
        for c in 0..t.num_cells() {
            for s in 0..6 {
                if let Some(nb) = t.link(c, s) {
                    let back = (0..6).filter(|&k| t.link(nb, k) == Some(c)).count();
                    assert_eq!(back, 1);
                }
            }
        }
    }

    #[test]
    fn cartesian_reduces_to_one_sided_differences() {
        let (_, t, o) = setup(Mesh::cartesian(&[0.0, 0.0], &[1.0, 1.0], &[4, 4]).unwrap(), 2);
        let dx = 1.0 / 12.0;
        for c in 0..t.num_cells() {
            if !interior(&t, c) {
                continue;
            }
            for i in 0..2 {
                for down in [false, true] {
                    let r = o.row(c, i, down);
                    assert_eq!(r.kind, StencilKind::DirectDifference);
                    assert!((r.weights[i] - 1.0 / dx).abs() < 1e-9);
                    assert_eq!(r.weights[1 - i], 0.0);
                    assert_eq!(r.use_neighbor[i], if down { [true, false] } else { [false, true] });
                }
            }
        }
    }

    #[test]
    fn one_dimensional_differences() {
        let (d, t, o) = setup(Mesh::cartesian(&[0.0, 0.0], &[3.0, 1.0], &[3, 1]).unwrap(), 0);
        assert_eq!(d.npe, 1);
        let means = [1.0, 2.0, 4.0];
        let g = fv_gradients(&t, &o, &means, None);
        assert!((g.p[1][0] - 2.0).abs() < 1e-13);
        assert!((g.q[1][0] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn linear_fields_are_exact() {
        for mesh in [
            Mesh::cartesian(&[0.0, 0.0], &[1.0, 1.0], &[3, 3]).unwrap(),
            Mesh::perturbed(&[0.0, 0.0], &[1.0, 1.0], &[4, 4], 0.2, 6).unwrap(),
            Mesh::perturbed(&[0.0; 3], &[1.0; 3], &[2, 2, 2], 0.15, 1).unwrap(),
        ] {
            let (_, t, o) = setup(mesh, 2);
            let f = |p: Point| 2.0 * p[0] + 3.0 * p[1] - p[2];
            let means: Vec<f64> = t.barycenters.iter().map(|b| f(*b)).collect();
            let g = fv_gradients(&t, &o, &means, None);
            let exact = [2.0, 3.0, -1.0];
            for c in 0..t.num_cells() {
                if !interior(&t, c) {
                    continue;
                }
                for i in 0..t.dim {
                    let determined = |down| {
                        matches!(
                            o.row(c, i, down).kind,
                            StencilKind::LeastSquares | StencilKind::DirectDifference
                        )
                    };
                    if determined(false) {
                        assert!((g.p[c][i] - exact[i]).abs() < 1e-11, "{:?}", g.p[c]);
                    }
                    if determined(true) {
                        assert!((g.q[c][i] - exact[i]).abs() < 1e-11);
                    }
                }
            }
        }
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let (_, t, o) = setup(Mesh::perturbed(&[0.0, 0.0], &[1.0, 1.0], &[3, 3], 0.2, 2).unwrap(), 3);
        let g = fv_gradients(&t, &o, &vec![0.7; t.num_cells()], None);
        assert!(g.p.iter().chain(&g.q).all(|v| v.iter().all(|x| x.abs() < 1e-12)));
    }

    #[test]
    fn left_inverse_on_generic_stencil() {
        let rows = [[0.3, 0.1, -0.05], [-0.02, 0.25, 0.07], [0.04, -0.06, 0.2]];
        let sol = solve_offsets(&rows, 3, 1e-14).unwrap();
        assert_eq!(sol.kind, StencilKind::LeastSquares);
        for i in 0..3 {
            for j in 0..3 {
                let wm: f64 = (0..3).map(|r| sol.weights[r][i] * rows[r][j]).sum();
                assert!((wm - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_stencils() {
        let sol = solve_offsets(&[[0.5, 0.0, 0.0], [0.0, 0.0, 0.0]], 2, 1e-14).unwrap();
        assert_eq!(sol.kind, StencilKind::DirectDifference);
        assert_eq!(sol.weights[0], [2.0, 0.0, 0.0]);
        let sol = solve_offsets(&[[0.0; 3], [0.0; 3]], 2, 1e-14).unwrap();
        assert_eq!(sol.kind, StencilKind::ZeroGradient);
        let sol = solve_offsets(&[[1.0, 1.0, 0.0]], 2, 1e-14).unwrap();
        assert_eq!(sol.kind, StencilKind::PseudoInverse);
        assert!((sol.weights[0][0] - 0.5).abs() < 1e-15 && (sol.weights[0][1] - 0.5).abs() < 1e-15);
        assert!(solve_offsets(&[[1.0, 1.0, 0.0], [2.0, 2.0, 0.0]], 2, 1e-14).is_none());
    }

    #[test]
    fn reflection_swaps_upwind_and_downwind() {
        let (d, t, o) = setup(Mesh::perturbed(&[0.0, 0.0], &[1.0, 1.0], &[3, 3], 0.2, 4).unwrap(), 2);
        let mirrored_nodes: Vec<Point> = d.mesh.nodes.iter().map(|p| [-p[0], p[1], 0.0]).collect();
        let elements: Vec<Vec<usize>> = d.mesh.elements.iter().map(|el| vec![el[1], el[0], el[3], el[2]]).collect();
        let (_, tm, om) = setup(Mesh::from_parts(2, mirrored_nodes, elements).unwrap(), 2);
        let f = |p: Point| (3.0 * p[0]).sin() + p[1] * p[1];
        let g = fv_gradients(&t, &o, &t.barycenters.iter().map(|b| f(*b)).collect::<Vec<_>>(), None);
        let fm = |p: Point| f([-p[0], p[1], 0.0]);
        let gm = fv_gradients(&tm, &om, &tm.barycenters.iter().map(|b| fm(*b)).collect::<Vec<_>>(), None);
        // Sub-cell numbering is mirrored along the first reference direction.
        let n1 = d.n1;
        for e in 0..d.num_elements() {
            for s in 0..d.npe {
                let (i, j) = (s % n1, s / n1);
                let c = e * d.npe + s;
                let cm = e * d.npe + (n1 - 1 - i) + n1 * j;
                assert!((tm.barycenters[cm][0] + t.barycenters[c][0]).abs() < 1e-12);
                assert!((g.p[c][0] + gm.q[cm][0]).abs() < 1e-10);
                assert!((g.q[c][0] + gm.p[cm][0]).abs() < 1e-10);
            }
        }
    }
}
