use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lsreinit::geometry::{curvature, GradientMethod};
use lsreinit::harness::{
    curvature_exclusions, curvature_norms, error_norms, kink_exclusions, prepare_field, run_convergence_suite,
    run_degree_sweep, write_csv, MeshFamily, SuiteConfig, SuiteScheme, TestCase,
};
use lsreinit::mesh::{read_mesh, write_mesh, Mesh, Point};
use lsreinit::timeint::{Solver, StepInfo};
use lsreinit::Discretization;
use lsreinit_cli::config::parse_pairs;
use lsreinit_cli::{write_vtk_file, RunConfig, Snapshot};

#[derive(Parser)]
#[command(name = "lsreinit", version, about = "Level-set reinitialization with a regularized DG scheme")]
struct Cli {
    /// Log verbosity (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reinitialize one case and write VTK snapshots.
    Run(RunArgs),
    /// Mesh refinement study of the circle case, written as CSV.
    Convergence(ConvergenceArgs),
    /// Curvature error norms of the circle case.
    Curvature(CurvatureArgs),
    /// Generate or validate mesh files.
    #[command(subcommand)]
    Mesh(MeshCommand),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file with `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    cells: Option<String>,
    #[arg(long)]
    degree: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    cfl: Option<String>,
    #[arg(long)]
    integrator: Option<String>,
    /// Cut-off value or `none`.
    #[arg(long, allow_hyphen_values = true)]
    cutoff: Option<String>,
    /// ldg, fv or regularized.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    s_low: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    s_up: Option<String>,
    /// Trailing modes inspected by the smoothness indicator.
    #[arg(long = "n")]
    n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tolerance: Option<String>,
    #[arg(long)]
    stall: Option<String>,
    #[arg(long)]
    max_iterations: Option<String>,
    #[arg(long)]
    degree_scaling: Option<String>,
    /// Output directory.
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    output_every: Option<String>,
}

impl RunArgs {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let flags: [(&'static str, &Option<String>); 17] = [
            ("case", &self.case),
            ("mesh", &self.mesh),
            ("cells", &self.cells),
            ("degree", &self.degree),
            ("eps", &self.eps),
            ("cfl", &self.cfl),
            ("integrator", &self.integrator),
            ("cutoff", &self.cutoff),
            ("scheme", &self.scheme),
            ("s_low", &self.s_low),
            ("s_up", &self.s_up),
            ("n", &self.n),
            ("tolerance", &self.tolerance),
            ("stall", &self.stall),
            ("max_iterations", &self.max_iterations),
            ("degree_scaling", &self.degree_scaling),
            ("output", &self.output),
        ];
        let mut out: Vec<(&'static str, String)> =
            flags.iter().filter_map(|(k, v)| v.as_ref().map(|v| (*k, v.clone()))).collect();
        if let Some(v) = &self.output_every {
            out.push(("output_every", v.clone()));
        }
        out
    }
}

#[derive(Args)]
struct ConvergenceArgs {
    /// ldg or fv.
    #[arg(long, default_value = "ldg")]
    scheme: String,
    #[arg(long, default_value = "circle")]
    case: String,
    #[arg(long, default_value_t = 4)]
    levels: usize,
    #[arg(long, default_value_t = 4)]
    degree: usize,
    /// Comma-separated degrees; runs a degree sweep on one mesh instead of refinement.
    #[arg(long, value_delimiter = ',')]
    degrees: Option<Vec<usize>>,
    /// Elements per axis on the coarsest level (default 4 for ldg, 16 for fv).
    #[arg(long)]
    cells: Option<usize>,
    /// Relative node perturbation; 0 keeps Cartesian meshes.
    #[arg(long, default_value_t = 0.0)]
    perturb: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    /// CSV output file; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CurvatureArgs {
    #[arg(long, default_value = "circle")]
    case: String,
    #[arg(long, default_value_t = 16)]
    cells: usize,
    #[arg(long, default_value_t = 4)]
    degree: usize,
    /// direct, br1 or central-ls.
    #[arg(long, default_value = "br1")]
    method: String,
    /// Reinitialize with the circle defaults before measuring.
    #[arg(long)]
    reinit: bool,
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Write a structured or perturbed box mesh.
    Generate {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 8)]
        cells: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = 0.0)]
        perturb: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Parse a mesh file and report its size and smallest Jacobian.
    Validate { path: PathBuf },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_mesh(path: &Path) -> Result<Mesh> {
    let text = read_text(path)?;
    read_mesh(&text).with_context(|| format!("invalid mesh {}", path.display()))
}

fn gradient_method(degree: usize, name: &str) -> Result<GradientMethod> {
    Ok(match name {
        "direct" => GradientMethod::Direct,
        "br1" => GradientMethod::Br1,
        "central-ls" => GradientMethod::CentralLs,
        _ => bail!("unknown gradient method '{name}', expected direct, br1 or central-ls"),
    })
    .and_then(|m| {
        if degree == 0 && m != GradientMethod::CentralLs {
            bail!("degree 0 needs --method central-ls");
        }
        Ok(m)
    })
}

fn snapshot(solver: &Solver, values: &[f64], alpha: &[f64], path: &Path) -> Result<()> {
    let disc = &solver.disc;
    let method = if disc.degree() == 0 { GradientMethod::CentralLs } else { GradientMethod::Br1 };
    let curv = curvature(disc, &solver.topo, values, method);
    let grad_norm: Vec<f64> = curv
        .gradient
        .iter()
        .map(|g| (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt())
        .collect();
    let snap = Snapshot {
        point_data: vec![("phi", values), ("grad_norm", &grad_norm), ("kappa", &curv.kappa)],
        fv_ratio: alpha,
    };
    write_vtk_file(path, disc, &snap)?;
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut pairs: Vec<(String, String)> = match &args.config {
        Some(path) => parse_pairs(&read_text(path)?).with_context(|| format!("in {}", path.display()))?,
        None => Vec::new(),
    };
    pairs.extend(args.pairs().into_iter().map(|(k, v)| (k.to_string(), v)));
    let cfg = RunConfig::from_pairs(&pairs)?;
    let mesh = match &cfg.mesh {
        Some(path) => load_mesh(path)?,
        None => cfg.case.cartesian_mesh(cfg.cells)?,
    };
    if mesh.dim != cfg.case.dim() {
        bail!("case {} is {}D but the mesh is {}D", cfg.case, cfg.case.dim(), mesh.dim);
    }
    let solver = Solver::new(Discretization::new(mesh, cfg.degree)?)?;
    let disc = &solver.disc;
    let mut field = prepare_field(cfg.case, disc, &cfg.case_params())?;
    fs::create_dir_all(&cfg.output).with_context(|| format!("cannot create {}", cfg.output.display()))?;
    let name = cfg.case.name();
    let mut write_error = None;
    let report = solver.reinitialize(&mut field, cfg.scheme(), &cfg.time_config(), |s: &StepInfo| {
        if cfg.output_every > 0 && s.iteration.is_multiple_of(cfg.output_every) && write_error.is_none() {
            let path = cfg.output.join(format!("{name}_{:06}.vtk", s.iteration));
            if let Err(e) = snapshot(&solver, s.field.values(), s.alpha, &path) {
                write_error = Some(e);
            }
        }
        if s.iteration.is_multiple_of(100) {
            log::info!("iteration {}: residual {:e}", s.iteration, s.residual);
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }
    let final_path = cfg.output.join(format!("{name}_final.vtk"));
    snapshot(&solver, field.values(), &report.alpha, &final_path)?;
    let flagged = report.alpha.iter().filter(|a| **a > 0.0).count();
    println!("case: {name}");
    println!("elements: {} ({} active)", disc.num_elements(), field.num_active());
    println!("iterations: {} ({})", report.iterations, report.cause.as_str());
    println!("final residual: {:e}", report.final_residual);
    println!("time step: {:e}", report.dt);
    println!(
        "sub-cell elements: {} ({:.4} of all)",
        flagged,
        flagged as f64 / disc.num_elements() as f64
    );
    println!("output: {}", final_path.display());
    Ok(())
}

fn convergence(args: ConvergenceArgs) -> Result<()> {
    let case: TestCase = args.case.parse()?;
    if case != TestCase::Circle {
        bail!("convergence studies need an exact solution; only the circle case has one");
    }
    let scheme: SuiteScheme = args.scheme.parse()?;
    let reports = if let Some(degrees) = &args.degrees {
        let mut cfg = SuiteConfig::circle(SuiteScheme::Ldg, MeshFamily::Cartesian, 16, 1, 4);
        if let Some(c) = args.cfl {
            cfg.time.cfl = c;
        }
        run_degree_sweep(args.cells.unwrap_or(16), degrees, &cfg.time, args.eps.unwrap_or(cfg.eps))?
    } else {
        let family = if args.perturb > 0.0 {
            MeshFamily::Perturbed { amplitude: args.perturb, seed: args.seed }
        } else {
            MeshFamily::Cartesian
        };
        let base = args.cells.unwrap_or(match scheme {
            SuiteScheme::Ldg => 4,
            SuiteScheme::FiniteVolume => 16,
        });
        let degree = if scheme == SuiteScheme::FiniteVolume { 0 } else { args.degree };
        let mut cfg = SuiteConfig::circle(scheme, family, base, args.levels, degree);
        if let Some(e) = args.eps {
            cfg.eps = e;
        }
        if let Some(c) = args.cfl {
            cfg.cfl = c;
            cfg.time.cfl = c;
        }
        run_convergence_suite(&cfg)?
    };
    match &args.output {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            write_csv(&reports, std::io::BufWriter::new(file))?;
        }
        None => write_csv(&reports, std::io::stdout().lock())?,
    }
    Ok(())
}

fn curvature_cmd(args: CurvatureArgs) -> Result<()> {
    let case: TestCase = args.case.parse()?;
    if case != TestCase::Circle {
        bail!("curvature norms need an exact solution; only the circle case has one");
    }
    let method = gradient_method(args.degree, &args.method)?;
    let solver = Solver::new(Discretization::new(case.cartesian_mesh(args.cells)?, args.degree)?)?;
    let disc = &solver.disc;
    let params = lsreinit::harness::CaseParams { degree: args.degree, cells: args.cells, ..case.defaults() };
    let mut field = prepare_field(case, disc, &params)?;
    let center = case.center();
    if args.reinit {
        let scheme = if args.degree == 0 {
            lsreinit::timeint::Scheme::FiniteVolume
        } else {
            lsreinit::timeint::Scheme::Ldg
        };
        let report = solver.reinitialize(&mut field, scheme, &params.time_config(), |_| {})?;
        println!("iterations: {} ({})", report.iterations, report.cause.as_str());
        let include: Vec<bool> = kink_exclusions(disc, center).iter().map(|x| !x).collect();
        let phi = error_norms(disc, field.values(), |p| case.exact(p).unwrap(), &include)?;
        println!("phi: l1 {:e} l2 {:e} linf {:e}", phi.l1, phi.l2, phi.linf);
    }
    let curv = curvature(disc, &solver.topo, field.values(), method);
    let positions: Vec<Point> = match method {
        GradientMethod::CentralLs => solver.topo.barycenters.clone(),
        _ => disc.metrics.iter().flat_map(|m| m.nodes.iter().map(|n| n.position)).collect(),
    };
    let include: Vec<bool> = curvature_exclusions(disc, center).iter().map(|x| !x).collect();
    let k = curvature_norms(disc, &curv, method, &positions, |p| case.exact_curvature(p).unwrap(), &include)?;
    println!("kappa: l1 {:e} l2 {:e} linf {:e}", k.l1, k.l2, k.linf);
    Ok(())
}

fn mesh_cmd(cmd: MeshCommand) -> Result<()> {
    match cmd {
        MeshCommand::Generate { dim, cells, lo, hi, perturb, seed, output } => {
            if !(dim == 2 || dim == 3) {
                bail!("dim must be 2 or 3, got {dim}");
            }
            let (lo, hi, counts) = (vec![lo; dim], vec![hi; dim], vec![cells; dim]);
            let mesh = if perturb > 0.0 {
                Mesh::perturbed(&lo, &hi, &counts, perturb, seed)?
            } else {
                Mesh::cartesian(&lo, &hi, &counts)?
            };
            let mut file = fs::File::create(&output).with_context(|| format!("cannot create {}", output.display()))?;
            file.write_all(write_mesh(&mesh).as_bytes())
                .with_context(|| format!("cannot write {}", output.display()))?;
            println!("wrote {} elements to {}", mesh.num_elements(), output.display());
        }
        MeshCommand::Validate { path } => {
            let mesh = load_mesh(&path)?;
            let disc = Discretization::new(mesh, 1)?;
            let min_jac = disc
                .metrics
                .iter()
                .flat_map(|m| m.nodes.iter().map(|n| n.jac))
                .fold(f64::INFINITY, f64::min);
            println!("dimension: {}", disc.dim);
            println!("elements: {}", disc.num_elements());
            println!("interior faces: {}", disc.mesh.num_interior_faces());
            println!("boundary faces: {}", disc.mesh.num_boundary_faces());
            println!("min jacobian: {min_jac:e}");
        }
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("LSREINIT_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .with_context(|| format!("LSREINIT_THREADS must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = init_threads().and_then(|_| match cli.command {
        Command::Run(a) => run(a),
        Command::Convergence(a) => convergence(a),
        Command::Curvature(a) => curvature_cmd(a),
        Command::Mesh(c) => mesh_cmd(c),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
