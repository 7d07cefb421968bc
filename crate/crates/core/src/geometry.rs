//! Normals and curvature `kappa = div(grad phi / |grad phi|)`.

use rayon::prelude::*;

use crate::discretization::Discretization;
use crate::fvsubcell::{solve_offsets, SubcellTopology};
use crate::ldg::{br1_gradient, direct_gradient};
use crate::regularization::subcell_means;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMethod {
    /// Element-local polynomial derivative.
    Direct,
    /// Central-flux lifting.
    Br1,
    /// Least squares over all face neighbors of each sub-cell.
    CentralLs,
}

/// Curvature and normals at nodes (polynomial methods) or sub-cells (least squares).
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub gradient: Vec<[f64; 3]>,
    pub normal: Vec<[f64; 3]>,
    pub kappa: Vec<f64>,
    /// False where the gradient fell below the normalization floor.
    pub valid: Vec<bool>,
}

/// Central least-squares gradient per sub-cell from the offsets to every
/// existing face neighbor. Cells without enough independent neighbors get a
/// zero gradient.
pub fn central_ls_gradient(topo: &SubcellTopology, means: &[f64], tol: f64) -> Vec<[f64; 3]> {
    let dim = topo.dim;
    let warned = std::sync::atomic::AtomicBool::new(false);
    let out = (0..topo.num_cells())
        .into_par_iter()
        .map(|c| {
            let mut rows = Vec::with_capacity(2 * dim);
            let mut jumps = Vec::with_capacity(2 * dim);
            for side in 0..2 * dim {
                if let Some(nb) = topo.link(c, side) {
                    let (a, b) = (topo.barycenters[nb], topo.barycenters[c]);
                    rows.push([a[0] - b[0], a[1] - b[1], a[2] - b[2]]);
                    jumps.push(means[nb] - means[c]);
                }
            }
            let mut g = [0.0; 3];
            match solve_offsets(&rows, dim, tol) {
                Some(sol) => {
                    for (w, j) in sol.weights.iter().zip(&jumps) {
                        for i in 0..dim {
                            g[i] += w[i] * j;
                        }
                    }
                }
                None => {
                    warned.store(true, std::sync::atomic::Ordering::Relaxed);
                }
            }
            g
        })
        .collect();
    if warned.into_inner() {
        log::warn!("degenerate central least-squares stencils set to zero gradient");
    }
    out
}

fn gradient(
    disc: &Discretization,
    topo: &SubcellTopology,
    values: &[f64],
    method: GradientMethod,
) -> Vec<[f64; 3]> {
    match method {
        GradientMethod::Direct => direct_gradient(disc, values),
        GradientMethod::Br1 => br1_gradient(disc, values, None),
        GradientMethod::CentralLs => central_ls_gradient(topo, values, 1e-13 * disc.l_ref),
    }
}

/// Curvature of the nodal field `values`. With [`GradientMethod::CentralLs`]
/// the field is first projected to sub-cell means and all outputs live on sub-cells.
pub fn curvature(
    disc: &Discretization,
    topo: &SubcellTopology,
    values: &[f64],
    method: GradientMethod,
) -> CurvatureField {
    let dim = disc.dim;
    let data = match method {
        GradientMethod::CentralLs => subcell_means(disc, values),
        _ => values.to_vec(),
    };
    let grad = gradient(disc, topo, &data, method);
    let floor = 1e-10 / disc.l_ref;
    let mut normal = vec![[0.0; 3]; grad.len()];
    let mut valid = vec![true; grad.len()];
    for ((g, n), v) in grad.iter().zip(normal.iter_mut()).zip(valid.iter_mut()) {
        let len = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if len > floor {
            for k in 0..3 {
                n[k] = g[k] / len;
            }
        } else {
            *v = false;
        }
    }
    let mut kappa = vec![0.0; grad.len()];
    for k in 0..dim {
        let comp: Vec<f64> = normal.iter().map(|n| n[k]).collect();
        let gk = gradient(disc, topo, &comp, method);
        for (kp, g) in kappa.iter_mut().zip(&gk) {
            *kp += g[k];
        }
    }
    CurvatureField {
        gradient: grad,
        normal,
        kappa,
        valid,
    }
}
