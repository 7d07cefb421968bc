//! Pseudo-time integration of the reinitialization equation.

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::field::LevelSetField;
use crate::fvsubcell::{build_ls_operators, LsOperators, SubcellTopology};
use crate::regularization::{BlendedOperator, RegularizationConfig, RegularizationState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    Rk3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    pub cfl: f64,
    pub integrator: Integrator,
    /// Residual tolerance on the max-norm update.
    pub tolerance: f64,
    /// Consecutive non-decreasing residuals that end the run.
    pub stall_limit: usize,
    pub max_iterations: usize,
    /// Divide the step by `2N + 1`.
    pub degree_scaling: bool,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            integrator: Integrator::Euler,
            tolerance: 1e-12,
            stall_limit: 100,
            max_iterations: 100_000,
            degree_scaling: true,
        }
    }
}

impl TimeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidArgument(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if self.stall_limit == 0 {
            return Err(Error::InvalidArgument("stall limit must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Tolerance,
    Stall,
    MaxIterations,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Tolerance => "tolerance",
            Termination::Stall => "stall",
            Termination::MaxIterations => "max-iter",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub cause: Termination,
    pub history: Vec<f64>,
    pub dt: f64,
    /// Blend factors of the last step (all zero for pure LDG).
    pub alpha: Vec<f64>,
}

/// Which spatial operator drives the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Ldg,
    FiniteVolume,
    Regularized(RegularizationConfig),
}

/// `CFL * min_e dx_e / lambda`, optionally divided by `2N + 1`, with
/// `lambda` the largest magnitude of the frozen sign.
pub fn compute_dt(disc: &Discretization, field: &LevelSetField, cfg: &TimeConfig) -> Result<f64> {
    if field.num_active() == 0 {
        return Err(Error::NoActiveElements);
    }
    let signs = field
        .sign_nodes()
        .ok_or_else(|| Error::InvalidArgument("sign must be frozen before computing the step".into()))?;
    let lambda = signs.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let dx = disc.metrics.iter().map(|m| m.dx).fold(f64::INFINITY, f64::min);
    let mut dt = cfg.cfl * dx / lambda.max(f64::MIN_POSITIVE);
    if cfg.degree_scaling {
        dt /= (2 * disc.degree() + 1) as f64;
    }
    Ok(dt)
}

/// Values advanced by the integrators, with a hook run after every stage.
pub trait StageState {
    fn values(&self) -> &[f64];
    fn values_mut(&mut self) -> &mut [f64];
    fn finish_stage(&mut self) {}
}

impl StageState for Vec<f64> {
    fn values(&self) -> &[f64] {
        self
    }
    fn values_mut(&mut self) -> &mut [f64] {
        self
    }
}

/// A level-set field whose cut-off is re-applied after each stage.
pub struct BandedField<'a> {
    pub field: &'a mut LevelSetField,
    pub disc: &'a Discretization,
}

impl StageState for BandedField<'_> {
    fn values(&self) -> &[f64] {
        self.field.values()
    }
    fn values_mut(&mut self) -> &mut [f64] {
        self.field.values_mut()
    }
    fn finish_stage(&mut self) {
        self.field.reapply_cutoff(self.disc);
    }
}

/// `u <- u + dt rhs(u)`.
pub fn euler_step<S: StageState>(u: &mut S, dt: f64, mut rhs: impl FnMut(&S) -> Vec<f64>) {
    let r = rhs(u);
    for (v, k) in u.values_mut().iter_mut().zip(&r) {
        *v += dt * k;
    }
    u.finish_stage();
}

const RK3_A: [f64; 3] = [0.0, -5.0 / 9.0, -153.0 / 128.0];
const RK3_B: [f64; 3] = [1.0 / 3.0, 15.0 / 16.0, 8.0 / 15.0];

/// Three-stage low-storage Runge-Kutta step.
pub fn rk3_step<S: StageState>(u: &mut S, dt: f64, mut rhs: impl FnMut(&S) -> Vec<f64>) {
    let mut k = vec![0.0; u.values().len()];
    for s in 0..3 {
        let r = rhs(u);
        for (kv, rv) in k.iter_mut().zip(&r) {
            *kv = RK3_A[s] * *kv + dt * rv;
        }
        for (v, kv) in u.values_mut().iter_mut().zip(&k) {
            *v += RK3_B[s] * kv;
        }
        u.finish_stage();
    }
}

/// Progress passed to an observer after every step.
pub struct StepInfo<'a> {
    pub iteration: usize,
    pub residual: f64,
    pub field: &'a LevelSetField,
    pub alpha: &'a [f64],
}

/// Discretization plus the sub-cell operators it needs, built once.
pub struct Solver {
    pub disc: Discretization,
    pub topo: SubcellTopology,
    pub ops: LsOperators,
}

impl Solver {
    pub fn new(disc: Discretization) -> Result<Self> {
        let topo = SubcellTopology::build(&disc);
        let ops = build_ls_operators(&disc, &topo)?;
        Ok(Self { disc, topo, ops })
    }

    /// Runs pseudo-time steps until a termination criterion fires. The field
    /// must have its sign frozen (and cut-off applied, if any).
    pub fn reinitialize(
        &self,
        field: &mut LevelSetField,
        scheme: Scheme,
        cfg: &TimeConfig,
        mut observer: impl FnMut(&StepInfo),
    ) -> Result<RunReport> {
        cfg.validate()?;
        let disc = &self.disc;
        let n_elem = disc.num_elements();
        let dt = compute_dt(disc, field, cfg)?;
        let sign_nodes = field.sign_nodes().expect("checked by compute_dt").to_vec();
        let sign_subcells = field.sign_subcells().expect("frozen with nodes").to_vec();
        let op = BlendedOperator {
            disc,
            topo: &self.topo,
            ops: &self.ops,
            sign_nodes: &sign_nodes,
            sign_subcells: &sign_subcells,
        };

        let mut history = Vec::new();
        let mut stall = 0usize;
        let mut state = match scheme {
            Scheme::FiniteVolume => RegularizationState::finite_volume(n_elem),
            _ => RegularizationState::smooth(n_elem),
        };
        let mut cause = Termination::MaxIterations;
        let mut previous = vec![0.0; field.values().len()];
        while history.len() < cfg.max_iterations {
            if let Scheme::Regularized(rc) = scheme {
                state = RegularizationState::evaluate(disc, field.values(), &rc)?;
            }
            previous.copy_from_slice(field.values());
            let before_active = field.active().to_vec();
            {
                let mut banded = BandedField { field, disc };
                let rhs = |s: &BandedField| op.rhs(s.field.values(), s.field.active(), &state);
                match cfg.integrator {
                    Integrator::Euler => euler_step(&mut banded, dt, rhs),
                    Integrator::Rk3 => rk3_step(&mut banded, dt, rhs),
                }
            }
            let iteration = history.len() + 1;
            let npe = disc.npe;
            let mut residual = 0.0f64;
            for (e, act) in before_active.iter().enumerate() {
                if !act {
                    continue;
                }
                for k in e * npe..(e + 1) * npe {
                    let d = (field.values()[k] - previous[k]).abs();
                    if !d.is_finite() {
                        return Err(Error::Diverged { iteration });
                    }
                    residual = residual.max(d);
                }
            }
            if let Some(&last) = history.last() {
                if residual >= last {
                    stall += 1;
                } else {
                    stall = 0;
                }
            }
            history.push(residual);
            observer(&StepInfo {
                iteration,
                residual,
                field,
                alpha: &state.alpha,
            });
            if residual <= cfg.tolerance {
                cause = Termination::Tolerance;
                break;
            }
            if stall >= cfg.stall_limit {
                cause = Termination::Stall;
                break;
            }
        }
        log::debug!(
            "reinitialization stopped after {} steps ({}), residual {:e}",
            history.len(),
            cause.as_str(),
            history.last().copied().unwrap_or(0.0)
        );
        Ok(RunReport {
            iterations: history.len(),
            final_residual: history.last().copied().unwrap_or(0.0),
            cause,
            history,
            dt,
            alpha: state.alpha,
        })
    }
}
