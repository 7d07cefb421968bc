use std::path::Path;
use std::process::{Command, Output};

fn lsreinit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsreinit"))
        .args(args)
        .env("LSREINIT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_config_names_the_path() {
    let o = lsreinit(&["run", "--config", "/nonexistent/case.cfg"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/case.cfg"), "{}", stderr(&o));
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "case = rectangle\ns_low = -5\ns_up = -6\n").unwrap();
    let o = lsreinit(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("s_low < s_up"), "{}", stderr(&o));
}

#[test]
fn run_writes_snapshots_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            "case = rectangle\ncells = 8\ndegree = 2\nmax_iterations = 20\noutput = {}\noutput_every = 10\n",
            out.display()
        ),
    )
    .unwrap();
    let o = lsreinit(&["run", "--config", cfg.to_str().unwrap(), "--s-low", "-7.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("iterations: 20 (max-iter)"), "{text}");
    for name in ["rectangle_000010.vtk", "rectangle_000020.vtk", "rectangle_final.vtk"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let vtk = std::fs::read_to_string(out.join("rectangle_final.vtk")).unwrap();
    // 64 elements, (N+2)^2 = 16 lattice points and 9 sub-cells each.
    assert!(vtk.contains("POINTS 1024 double"));
    assert!(vtk.contains("CELLS 576 2880"));
    for field in ["SCALARS phi", "SCALARS grad_norm", "SCALARS kappa", "SCALARS fv_ratio"] {
        assert!(vtk.contains(field), "{field} missing");
    }
}

#[test]
fn convergence_writes_csv_with_rates() {
    let o = lsreinit(&["convergence", "--scheme", "ldg", "--case", "circle", "--levels", "2", "--degree", "2", "--cells", "8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("level,h,n_elem,l1_phi"));
    assert_eq!(lines[1].split(',').count(), 17);
    let eoc: f64 = lines[2].split(',').nth(6).unwrap().parse().unwrap();
    assert!(eoc > 1.0, "{eoc}");
}

#[test]
fn convergence_is_deterministic() {
    let args = ["convergence", "--levels", "1", "--degree", "2", "--cells", "4"];
    assert_eq!(stdout(&lsreinit(&args)), stdout(&lsreinit(&args)));
}

#[test]
fn curvature_norms_of_the_initial_field() {
    let o = lsreinit(&["curvature", "--cells", "8", "--degree", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    let l1: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(l1 < 0.5, "{line}");
}

#[test]
fn mesh_generate_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mesh");
    let p = path.to_str().unwrap();
    let o = lsreinit(&["mesh", "generate", "--dim", "2", "--cells", "4", "--perturb", "0.1", "--output", p]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = lsreinit(&["mesh", "validate", p]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("elements: 16"));
    assert!(text.contains("interior faces: 24"));
    let jac: f64 = text.lines().last().unwrap().split(": ").nth(1).unwrap().parse().unwrap();
    assert!(jac > 0.0);
    assert!(!lsreinit(&["mesh", "validate", "/nonexistent.mesh"]).status.success());
    assert!(!Path::new("/nonexistent.mesh").exists());
}
