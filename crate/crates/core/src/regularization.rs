//! Modal smoothness indicator and the blending of LDG and sub-cell updates.

use rayon::prelude::*;

use crate::basis::stride;
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::fvsubcell::{LsOperators, SubcellTopology};
use crate::hamiltonian::{rhs_fv, rhs_ldg};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationConfig {
    pub s_low: f64,
    pub s_up: f64,
    /// Number of trailing modes inspected besides the highest one.
    pub modes: usize,
}

impl RegularizationConfig {
    pub fn new(s_low: f64, s_up: f64, modes: usize) -> Result<Self> {
        if !(s_low < s_up) {
            return Err(Error::InvalidArgument(format!(
                "indicator thresholds need s_low < s_up, got {s_low} and {s_up}"
            )));
        }
        Ok(Self { s_low, s_up, modes })
    }
}

/// Per-element indicator values and blend factors.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationState {
    pub indicator: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl RegularizationState {
    pub fn evaluate(disc: &Discretization, values: &[f64], cfg: &RegularizationConfig) -> Result<Self> {
        let indicator = modal_indicator(disc, values, cfg.modes)?;
        let alpha = indicator
            .iter()
            .map(|s| blend_factor(*s, cfg.s_low, cfg.s_up))
            .collect();
        Ok(Self { indicator, alpha })
    }

    /// Pure LDG everywhere.
    pub fn smooth(n_elem: usize) -> Self {
        Self {
            indicator: vec![f64::NEG_INFINITY; n_elem],
            alpha: vec![0.0; n_elem],
        }
    }

    /// Pure sub-cell scheme everywhere.
    pub fn finite_volume(n_elem: usize) -> Self {
        Self {
            indicator: vec![f64::INFINITY; n_elem],
            alpha: vec![1.0; n_elem],
        }
    }

    pub fn flagged_fraction(&self) -> f64 {
        self.alpha.iter().filter(|a| **a > 0.0).count() as f64 / self.alpha.len().max(1) as f64
    }
}

/// Largest ratio of a high mode's energy to the energy up to that mode over
/// one 1D line of nodal values. Returns `None` when every inspected high mode
/// vanishes.
pub fn line_ratio(disc: &Discretization, line: &[f64], modes: usize) -> Option<f64> {
    let n = disc.degree();
    let mut modal = disc.reference.vandermonde_inv.apply(line);
    modal[0] += 1.0;
    let lowest = n.saturating_sub(modes).max(1);
    // Coefficients at round-off level of the line's magnitude count as zero.
    let floor = 1e-14 * modal.iter().map(|c| c.abs()).fold(0.0, f64::max);
    let mut best: Option<f64> = None;
    for i in (lowest..=n).rev() {
        if modal[i].abs() <= floor {
            continue;
        }
        let num = modal[i] * modal[i];
        let den: f64 = modal[..=i].iter().map(|c| c * c).sum();
        let r = num / den;
        best = Some(best.map_or(r, |b: f64| b.max(r)));
    }
    best
}

/// `log10` of the maximal line ratio over all tensor lines of each element,
/// `-inf` when all inspected high modes vanish.
pub fn modal_indicator(disc: &Discretization, values: &[f64], modes: usize) -> Result<Vec<f64>> {
    let n = disc.degree();
    if n == 0 {
        return Err(Error::InvalidArgument("the modal indicator needs degree >= 1".into()));
    }
    if modes > n {
        return Err(Error::InvalidArgument(format!(
            "mode count {modes} exceeds the polynomial degree {n}"
        )));
    }
    let npe = disc.npe;
    let n1 = disc.n1;
    let dim = disc.dim;
    Ok(values
        .par_chunks(npe)
        .map(|u| {
            let mut best = f64::NEG_INFINITY;
            let mut line = vec![0.0; n1];
            for dir in 0..dim {
                let s = stride(n1, dir);
                for base in 0..npe {
                    if !(base / s).is_multiple_of(n1) {
                        continue;
                    }
                    for (a, l) in line.iter_mut().enumerate() {
                        *l = u[base + a * s];
                    }
                    if let Some(r) = line_ratio(disc, &line, modes) {
                        best = best.max(r.log10());
                    }
                }
            }
            best
        })
        .collect())
}

/// Linear ramp from 0 at `s_low` to 1 at `s_up`.
pub fn blend_factor(s: f64, s_low: f64, s_up: f64) -> f64 {
    if s <= s_low {
        0.0
    } else if s >= s_up {
        1.0
    } else {
        (s - s_low) / (s_up - s_low)
    }
}

/// Sub-cell means of every element.
pub fn subcell_means(disc: &Discretization, values: &[f64]) -> Vec<f64> {
    let mut means = vec![0.0; values.len()];
    means
        .par_chunks_mut(disc.npe)
        .zip(values.par_chunks(disc.npe))
        .for_each(|(m, u)| disc.reference.project_tensor(disc.dim, u, m));
    means
}

/// Operators and frozen data needed to evaluate the blended right-hand side.
pub struct BlendedOperator<'a> {
    pub disc: &'a Discretization,
    pub topo: &'a SubcellTopology,
    pub ops: &'a LsOperators,
    pub sign_nodes: &'a [f64],
    pub sign_subcells: &'a [f64],
}

impl BlendedOperator<'_> {
    /// `(1 - alpha) rhs_ldg + alpha R rhs_fv` per element, each scheme
    /// evaluated only where its weight is nonzero.
    pub fn rhs(&self, values: &[f64], active: &[bool], state: &RegularizationState) -> Vec<f64> {
        let disc = self.disc;
        let npe = disc.npe;
        let n_elem = disc.num_elements();
        let need_ldg: Vec<bool> = (0..n_elem).map(|e| active[e] && state.alpha[e] < 1.0).collect();
        let need_fv: Vec<bool> = (0..n_elem).map(|e| active[e] && state.alpha[e] > 0.0).collect();

        let mut out = if need_ldg.iter().any(|b| *b) {
            rhs_ldg(disc, values, self.sign_nodes, Some(&need_ldg))
        } else {
            vec![0.0; values.len()]
        };
        if need_fv.iter().any(|b| *b) {
            let means = subcell_means(disc, values);
            let fv = rhs_fv(self.topo, self.ops, &means, self.sign_subcells, Some(&need_fv));
            out.par_chunks_mut(npe).enumerate().for_each(|(e, oe)| {
                if !need_fv[e] {
                    return;
                }
                let a = state.alpha[e];
                let mut nodal = vec![0.0; npe];
                disc.reference
                    .reconstruct_tensor(disc.dim, &fv[e * npe..(e + 1) * npe], &mut nodal);
                for (o, f) in oe.iter_mut().zip(&nodal) {
                    *o = (1.0 - a) * *o + a * f;
                }
            });
        }
        out
    }
}
