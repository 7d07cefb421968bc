//! Godunov numerical Hamiltonian and the semi-discrete right-hand sides.

use rayon::prelude::*;

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::fvsubcell::{fv_gradients, LsOperators, SubcellTopology};
use crate::ldg::ldg_gradients;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianConfig {
    /// Relative smoothing of the sign function.
    pub eps: f64,
    pub l_ref: f64,
}

impl HamiltonianConfig {
    pub fn new(eps: f64, l_ref: f64) -> Result<Self> {
        if !(eps > 0.0) || !(l_ref > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eps and l_ref must be positive, got {eps} and {l_ref}"
            )));
        }
        Ok(Self { eps, l_ref })
    }
}

/// `s (|grad phi|_G - 1)` with the Godunov upwinding of the gradient
/// magnitude. `p` is the forward-biased and `q` the backward-biased gradient.
#[inline]
pub fn godunov(p: [f64; 3], q: [f64; 3], s: f64) -> f64 {
    let mut sum = 0.0;
    if s <= 0.0 {
        for m in 0..3 {
            let a = p[m].max(0.0);
            let b = q[m].min(0.0);
            sum += (a * a).max(b * b);
        }
    } else {
        for m in 0..3 {
            let c = p[m].min(0.0);
            let d = q[m].max(0.0);
            sum += (c * c).max(d * d);
        }
    }
    s * (sum.sqrt() - 1.0)
}

/// `-H(p, q)` at every node of the active elements; zero elsewhere.
pub fn rhs_ldg(disc: &Discretization, values: &[f64], signs: &[f64], active: Option<&[bool]>) -> Vec<f64> {
    let g = ldg_gradients(disc, values, active);
    hamiltonian_rhs(&g.p, &g.q, signs, disc.npe, active)
}

/// `-H(p, q)` on every sub-cell of the active elements from sub-cell means.
pub fn rhs_fv(
    topo: &SubcellTopology,
    ops: &LsOperators,
    means: &[f64],
    signs: &[f64],
    active: Option<&[bool]>,
) -> Vec<f64> {
    let g = fv_gradients(topo, ops, means, active);
    hamiltonian_rhs(&g.p, &g.q, signs, topo.npe, active)
}

fn hamiltonian_rhs(p: &[[f64; 3]], q: &[[f64; 3]], signs: &[f64], npe: usize, active: Option<&[bool]>) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    out.par_chunks_mut(npe).enumerate().for_each(|(e, oe)| {
        if !active.is_none_or(|a| a[e]) {
            return;
        }
        for (k, o) in oe.iter_mut().enumerate() {
            let idx = e * npe + k;
            *o = -godunov(p[idx], q[idx], signs[idx]);
        }
    });
    out
}
