//! Benchmark cases, error norms with kink exclusions, convergence tables.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::field::LevelSetField;
use crate::geometry::{curvature, CurvatureField, GradientMethod};
use crate::mesh::{Mesh, Point};
use crate::regularization::RegularizationConfig;
use crate::timeint::{Integrator, RunReport, Scheme, Solver, TimeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestCase {
    /// Smooth exponential field around a circle of radius 0.2313 in the unit square.
    Circle,
    /// Sign-valued field with a square interface.
    Rectangle,
    /// The square interface rotated by 45 degrees.
    RectangleRot45,
    /// Disturbed circle of radius 3.
    Hartmann,
    /// Disturbed unit sphere.
    Sphere3d,
}

/// Zero-contour radius of the circle case.
pub const CIRCLE_RADIUS: f64 = 0.2313;

impl TestCase {
    pub const ALL: [TestCase; 5] = [
        TestCase::Circle,
        TestCase::Rectangle,
        TestCase::RectangleRot45,
        TestCase::Hartmann,
        TestCase::Sphere3d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestCase::Circle => "convergence-circle",
            TestCase::Rectangle => "rectangle",
            TestCase::RectangleRot45 => "rectangle-rot45",
            TestCase::Hartmann => "hartmann",
            TestCase::Sphere3d => "sphere3d",
        }
    }

    pub fn dim(self) -> usize {
        if self == TestCase::Sphere3d {
            3
        } else {
            2
        }
    }

    /// Lower and upper corner of the domain box.
    pub fn domain(self) -> (Vec<f64>, Vec<f64>) {
        match self {
            TestCase::Circle => (vec![0.0; 2], vec![1.0; 2]),
            TestCase::Rectangle | TestCase::RectangleRot45 => (vec![-1.0; 2], vec![1.0; 2]),
            TestCase::Hartmann => (vec![-5.0; 2], vec![5.0; 2]),
            TestCase::Sphere3d => (vec![-2.0; 3], vec![2.0; 3]),
        }
    }

    pub fn center(self) -> Point {
        match self {
            TestCase::Circle => [0.5, 0.5, 0.0],
            _ => [0.0; 3],
        }
    }

    pub fn initial(self, p: Point) -> f64 {
        let [x, y, z] = p;
        match self {
            TestCase::Circle => {
                let r = ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt();
                (10.0 * r - 2.313).exp() - 1.0
            }
            TestCase::Rectangle => square_sign(x, y),
            TestCase::RectangleRot45 => {
                let c = std::f64::consts::FRAC_1_SQRT_2;
                square_sign(c * (x + y), c * (y - x))
            }
            TestCase::Hartmann => {
                (0.1 + (x - 3.0).powi(2) + (y - 3.0).powi(2)) * (3.0 - (x * x + y * y).sqrt())
            }
            TestCase::Sphere3d => {
                ((x - 1.0).powi(2) + (y - 1.0).powi(2) + (z - 1.0).powi(2) + 0.1)
                    * ((x * x + y * y + z * z).sqrt() - 1.0)
            }
        }
    }

    /// Signed distance to the interface, where known in closed form.
    pub fn exact(self, p: Point) -> Option<f64> {
        match self {
            TestCase::Circle => Some(((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt() - CIRCLE_RADIUS),
            _ => None,
        }
    }

    /// Curvature magnitude of the distance field's level sets, where known.
    pub fn exact_curvature(self, p: Point) -> Option<f64> {
        match self {
            TestCase::Circle => Some(1.0 / ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt()),
            _ => None,
        }
    }

    pub fn defaults(self) -> CaseParams {
        let base = CaseParams {
            degree: 4,
            cells: 16,
            eps: 20.0,
            cfl: 0.5,
            cutoff: None,
            regularization: None,
            integrator: Integrator::Rk3,
            tolerance: 1e-12,
            stall_limit: 100,
            max_iterations: 5000,
            degree_scaling: true,
        };
        match self {
            TestCase::Circle => CaseParams {
                eps: 50.0,
                integrator: Integrator::Euler,
                max_iterations: 1_000_000,
                ..base
            },
            TestCase::Rectangle | TestCase::RectangleRot45 => CaseParams {
                cells: 33,
                cutoff: Some(0.25),
                regularization: Some(RegularizationConfig { s_low: -7.5, s_up: -6.5, modes: 2 }),
                ..base
            },
            TestCase::Hartmann => CaseParams {
                cells: 96,
                cfl: 0.9,
                cutoff: Some(1.0),
                regularization: Some(RegularizationConfig { s_low: -6.5, s_up: -5.5, modes: 2 }),
                max_iterations: 3000,
                ..base
            },
            TestCase::Sphere3d => CaseParams {
                degree: 2,
                cells: 32,
                cfl: 0.9,
                cutoff: Some(0.6),
                regularization: Some(RegularizationConfig { s_low: -9.0, s_up: -8.0, modes: 1 }),
                max_iterations: 3000,
                ..base
            },
        }
    }

    /// Structured mesh with `cells` elements per axis on the case domain.
    pub fn cartesian_mesh(self, cells: usize) -> Result<Mesh> {
        let (lo, hi) = self.domain();
        Mesh::cartesian(&lo, &hi, &vec![cells; self.dim()])
    }

    /// Randomly perturbed counterpart of [`TestCase::cartesian_mesh`].
    pub fn perturbed_mesh(self, cells: usize, amplitude: f64, seed: u64) -> Result<Mesh> {
        let (lo, hi) = self.domain();
        Mesh::perturbed(&lo, &hi, &vec![cells; self.dim()], amplitude, seed)
    }
}

fn square_sign(x: f64, y: f64) -> f64 {
    if x.abs() >= 0.5 || y.abs() >= 0.5 {
        1.0
    } else {
        -1.0
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convergence-circle" | "circle" => Ok(TestCase::Circle),
            "rectangle" => Ok(TestCase::Rectangle),
            "rectangle-rot45" => Ok(TestCase::RectangleRot45),
            "hartmann" => Ok(TestCase::Hartmann),
            "sphere3d" | "sphere" => Ok(TestCase::Sphere3d),
            _ => Err(Error::InvalidArgument(format!("unknown test case '{s}'"))),
        }
    }
}

/// Numerical parameters of one reinitialization run.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseParams {
    pub degree: usize,
    /// Elements per axis of the structured mesh.
    pub cells: usize,
    pub eps: f64,
    pub cfl: f64,
    pub cutoff: Option<f64>,
    /// `None` runs the pure LDG scheme.
    pub regularization: Option<RegularizationConfig>,
    pub integrator: Integrator,
    pub tolerance: f64,
    pub stall_limit: usize,
    pub max_iterations: usize,
    pub degree_scaling: bool,
}

impl CaseParams {
    pub fn time_config(&self) -> TimeConfig {
        TimeConfig {
            cfl: self.cfl,
            integrator: self.integrator,
            tolerance: self.tolerance,
            stall_limit: self.stall_limit,
            max_iterations: self.max_iterations,
            degree_scaling: self.degree_scaling,
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self.regularization {
            Some(rc) => Scheme::Regularized(rc),
            None => Scheme::Ldg,
        }
    }
}

/// Samples the case's initial field, applies the cut-off and freezes the sign.
pub fn prepare_field(case: TestCase, disc: &Discretization, params: &CaseParams) -> Result<LevelSetField> {
    let mut field = LevelSetField::init_analytic(disc, |p| case.initial(p))?;
    if let Some(c) = params.cutoff {
        field.apply_cutoff(disc, c)?;
    }
    field.freeze_sign(disc, params.eps, disc.l_ref)?;
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

impl ErrorNorms {
    fn as_array(&self) -> [f64; 3] {
        [self.l1, self.l2, self.linf]
    }
}

/// Volume-normalized norms of `(weight, error)` samples.
pub fn weighted_norms(samples: impl IntoIterator<Item = (f64, f64)>) -> Result<ErrorNorms> {
    let (mut w_sum, mut l1, mut l2, mut linf) = (0.0, 0.0, 0.0, 0.0f64);
    let mut count = 0usize;
    for (w, e) in samples {
        let a = e.abs();
        w_sum += w;
        l1 += w * a;
        l2 += w * a * a;
        linf = linf.max(a);
        count += 1;
    }
    if count == 0 || !(w_sum > 0.0) {
        return Err(Error::EmptyNorm);
    }
    Ok(ErrorNorms {
        l1: l1 / w_sum,
        l2: (l2 / w_sum).sqrt(),
        linf,
    })
}

/// Quadrature norms of `values - exact` over the elements with `include[e]`.
pub fn error_norms(
    disc: &Discretization,
    values: &[f64],
    exact: impl Fn(Point) -> f64,
    include: &[bool],
) -> Result<ErrorNorms> {
    let npe = disc.npe;
    let samples = disc.metrics.iter().enumerate().filter(|(e, _)| include[*e]).flat_map(|(e, m)| {
        let exact = &exact;
        m.nodes.iter().enumerate().map(move |(k, node)| {
            (disc.node_weight(k) * node.jac, values[e * npe + k] - exact(node.position))
        })
    });
    weighted_norms(samples)
}

/// Curvature magnitude errors at the valid points of the included elements.
pub fn curvature_norms(
    disc: &Discretization,
    curv: &CurvatureField,
    method: GradientMethod,
    positions: &[Point],
    exact: impl Fn(Point) -> f64,
    include: &[bool],
) -> Result<ErrorNorms> {
    let npe = disc.npe;
    let weight = |idx: usize| {
        let (e, k) = (idx / npe, idx % npe);
        match method {
            GradientMethod::CentralLs => disc.metrics[e].volume / npe as f64,
            _ => disc.node_weight(k) * disc.metrics[e].nodes[k].jac,
        }
    };
    weighted_norms(
        (0..curv.kappa.len())
            .filter(|&i| include[i / npe] && curv.valid[i])
            .map(|i| (weight(i), curv.kappa[i].abs() - exact(positions[i]))),
    )
}

/// Elements excluded around the central kink of the circle case: the four
/// nearest to the center on structured meshes, else all elements whose
/// barycenter lies within two mean element diameters of it.
pub fn kink_exclusions(disc: &Discretization, center: Point) -> Vec<bool> {
    let n = disc.num_elements();
    let dist: Vec<f64> = disc
        .metrics
        .iter()
        .map(|m| distance(m.barycenter, center))
        .collect();
    let mut excluded = vec![false; n];
    if disc.mesh.structured.is_some() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| dist[*a].total_cmp(&dist[*b]));
        for &e in order.iter().take(4) {
            excluded[e] = true;
        }
    } else {
        let radius = 2.0 * mean_diameter(&disc.mesh);
        for e in 0..n {
            excluded[e] = dist[e] < radius;
        }
    }
    excluded
}

/// Kink exclusions plus the elements with barycenter in the open box
/// `center +- 0.125` per axis.
pub fn curvature_exclusions(disc: &Discretization, center: Point) -> Vec<bool> {
    let mut excluded = kink_exclusions(disc, center);
    for (e, m) in disc.metrics.iter().enumerate() {
        if (0..disc.dim).all(|k| (m.barycenter[k] - center[k]).abs() < 0.125) {
            excluded[e] = true;
        }
    }
    excluded
}

fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Mean over elements of the largest corner-to-corner distance.
pub fn mean_diameter(mesh: &Mesh) -> f64 {
    let total: f64 = mesh
        .elements
        .iter()
        .map(|el| {
            let mut d = 0.0f64;
            for (i, a) in el.iter().enumerate() {
                for b in &el[i + 1..] {
                    d = d.max(distance(mesh.nodes[*a], mesh.nodes[*b]));
                }
            }
            d
        })
        .sum();
    total / mesh.num_elements() as f64
}

/// Experimental order of convergence between two levels.
pub fn eoc(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub level: usize,
    pub h: f64,
    pub n_elem: usize,
    pub degree: usize,
    pub phi: ErrorNorms,
    pub kappa: ErrorNorms,
    /// Elements contributing to the level-set norms.
    pub included: usize,
    pub eoc_phi: Option<ErrorNorms>,
    pub eoc_kappa: Option<ErrorNorms>,
    pub iterations: usize,
    pub cause: String,
}

/// Fills the EOC columns of consecutive rows.
pub fn fill_eoc(reports: &mut [ErrorReport]) {
    for i in 1..reports.len() {
        let (c, f) = (&reports[i - 1], &reports[i]);
        let rate = |a: &ErrorNorms, b: &ErrorNorms| {
            let (a, b) = (a.as_array(), b.as_array());
            let r: Vec<f64> = (0..3).map(|k| eoc(a[k], b[k], c.h, f.h)).collect();
            ErrorNorms { l1: r[0], l2: r[1], linf: r[2] }
        };
        let eoc_phi = rate(&c.phi, &f.phi);
        let eoc_kappa = rate(&c.kappa, &f.kappa);
        reports[i].eoc_phi = Some(eoc_phi);
        reports[i].eoc_kappa = Some(eoc_kappa);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteScheme {
    Ldg,
    FiniteVolume,
}

impl FromStr for SuiteScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ldg" => Ok(SuiteScheme::Ldg),
            "fv" => Ok(SuiteScheme::FiniteVolume),
            _ => Err(Error::InvalidArgument(format!("unknown scheme '{s}', expected ldg or fv"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshFamily {
    Cartesian,
    /// Independently perturbed meshes per level; `amplitude` is relative to the spacing.
    Perturbed { amplitude: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub scheme: SuiteScheme,
    pub family: MeshFamily,
    /// Elements per axis on the coarsest level, doubled per level.
    pub base_cells: usize,
    pub levels: usize,
    pub degree: usize,
    pub eps: f64,
    pub cfl: f64,
    pub time: TimeConfig,
}

impl SuiteConfig {
    /// Forward Euler to `tolerance = 1e-12`, `stall_limit = 100`.
    pub fn circle(scheme: SuiteScheme, family: MeshFamily, base_cells: usize, levels: usize, degree: usize) -> Self {
        let d = TestCase::Circle.defaults();
        Self {
            scheme,
            family,
            base_cells,
            levels,
            degree,
            eps: d.eps,
            cfl: d.cfl,
            time: TimeConfig {
                cfl: d.cfl,
                integrator: Integrator::Euler,
                tolerance: 1e-12,
                stall_limit: 100,
                max_iterations: d.max_iterations,
                degree_scaling: true,
            },
        }
    }
}

/// Reinitializes the circle case on `mesh` and measures level-set and curvature errors.
pub fn run_circle_level(
    mesh: Mesh,
    degree: usize,
    scheme: SuiteScheme,
    eps: f64,
    time: &TimeConfig,
) -> Result<(ErrorReport, LevelSetField, RunReport)> {
    let case = TestCase::Circle;
    let n_elem = mesh.num_elements();
    let disc = Discretization::new(mesh, degree)?;
    let solver = Solver::new(disc)?;
    let disc = &solver.disc;
    let params = CaseParams { eps, degree, ..case.defaults() };
    let mut field = prepare_field(case, disc, &params)?;
    let run_scheme = match scheme {
        SuiteScheme::Ldg => Scheme::Ldg,
        SuiteScheme::FiniteVolume => Scheme::FiniteVolume,
    };
    let run = solver.reinitialize(&mut field, run_scheme, time, |_| {})?;

    let center = case.center();
    let phi_include: Vec<bool> = kink_exclusions(disc, center).iter().map(|x| !x).collect();
    let kappa_include: Vec<bool> = curvature_exclusions(disc, center).iter().map(|x| !x).collect();
    let phi = error_norms(disc, field.values(), |p| case.exact(p).unwrap(), &phi_include)?;
    let method = match scheme {
        SuiteScheme::Ldg => GradientMethod::Br1,
        SuiteScheme::FiniteVolume => GradientMethod::CentralLs,
    };
    let curv = curvature(disc, &solver.topo, field.values(), method);
    let positions: Vec<Point> = match method {
        GradientMethod::CentralLs => solver.topo.barycenters.clone(),
        _ => disc.metrics.iter().flat_map(|m| m.nodes.iter().map(|n| n.position)).collect(),
    };
    let kappa = curvature_norms(
        disc,
        &curv,
        method,
        &positions,
        |p| case.exact_curvature(p).unwrap(),
        &kappa_include,
    )?;
    // The circle domain has unit side, so this is the spacing on structured meshes.
    let h = (n_elem as f64).powf(-1.0 / disc.dim as f64);
    let report = ErrorReport {
        level: 0,
        h,
        n_elem,
        degree,
        phi,
        kappa,
        included: phi_include.iter().filter(|x| **x).count(),
        eoc_phi: None,
        eoc_kappa: None,
        iterations: run.iterations,
        cause: run.cause.as_str().to_string(),
    };
    Ok((report, field, run))
}

/// Runs the circle case on successively doubled meshes and fills the EOC columns.
pub fn run_convergence_suite(cfg: &SuiteConfig) -> Result<Vec<ErrorReport>> {
    let case = TestCase::Circle;
    let mut reports = Vec::with_capacity(cfg.levels);
    for level in 0..cfg.levels {
        let cells = cfg.base_cells << level;
        let mesh = match cfg.family {
            MeshFamily::Cartesian => case.cartesian_mesh(cells)?,
            MeshFamily::Perturbed { amplitude, seed } => case.perturbed_mesh(cells, amplitude, seed + level as u64)?,
        };
        let (mut report, _, _) = run_circle_level(mesh, cfg.degree, cfg.scheme, cfg.eps, &cfg.time)?;
        report.level = level;
        log::info!(
            "level {level}: {} elements, L1(phi) = {:e}, L1(kappa) = {:e}, {} iterations ({})",
            report.n_elem,
            report.phi.l1,
            report.kappa.l1,
            report.iterations,
            report.cause
        );
        reports.push(report);
    }
    fill_eoc(&mut reports);
    Ok(reports)
}

/// Circle case on one Cartesian mesh for each degree; degree 0 uses the sub-cell scheme.
pub fn run_degree_sweep(cells: usize, degrees: &[usize], time: &TimeConfig, eps: f64) -> Result<Vec<ErrorReport>> {
    degrees
        .iter()
        .enumerate()
        .map(|(level, &degree)| {
            let scheme = if degree == 0 { SuiteScheme::FiniteVolume } else { SuiteScheme::Ldg };
            let (mut r, _, _) = run_circle_level(TestCase::Circle.cartesian_mesh(cells)?, degree, scheme, eps, time)?;
            r.level = level;
            Ok(r)
        })
        .collect()
}

pub const CSV_HEADER: &str = "level,h,n_elem,l1_phi,l2_phi,linf_phi,eoc_l1_phi,eoc_l2_phi,eoc_linf_phi,\
l1_kappa,l2_kappa,linf_kappa,eoc_l1_kappa,eoc_l2_kappa,eoc_linf_kappa,iterations,cause";

/// Writes the table with empty EOC cells on the first row.
pub fn write_csv(reports: &[ErrorReport], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    let rates = |r: &Option<ErrorNorms>| match r {
        Some(n) => format!("{:.4},{:.4},{:.4}", n.l1, n.l2, n.linf),
        None => ",,".to_string(),
    };
    for r in reports {
        writeln!(
            out,
            "{},{:.6e},{},{:.6e},{:.6e},{:.6e},{},{:.6e},{:.6e},{:.6e},{},{},{}",
            r.level,
            r.h,
            r.n_elem,
            r.phi.l1,
            r.phi.l2,
            r.phi.linf,
            rates(&r.eoc_phi),
            r.kappa.l1,
            r.kappa.l2,
            r.kappa.linf,
            rates(&r.eoc_kappa),
            r.iterations,
            r.cause
        )?;
    }
    Ok(())
}
