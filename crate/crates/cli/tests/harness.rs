use lmcf_cli::config::hex;
use lmcf_cli::{
    export_plots, load_run, resume, run_experiment, run_with, sweep, ExperimentConfig, HarnessError, InitialSpec,
    PlotKind, RunControl, RunManifest, RunOutcome, RunStatus,
};
use lmcf_core::io::write_curve;
use lmcf_core::{Point, ProfileCurve, SolverParams, Termination};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use tempfile::TempDir;

fn lawlor_config(dir: &Path) -> ExperimentConfig {
    ExperimentConfig::new(
        InitialSpec::LawlorNeck { b: 1.0, theta_bar: PI / 2.0, n: 2, radius: 10.0, h: 0.1 },
        SolverParams { h: 0.1, t_max: 0.1, bc_radius: 8.0, snapshot_every: 0.05, ..SolverParams::default() },
        dir,
    )
}

fn neves_solver() -> SolverParams {
    SolverParams {
        h: 0.1,
        dt_cfl: 0.25,
        a_stop: 300.0,
        t_max: 10.0,
        bc_radius: 8.0,
        snapshot_every: 0.1,
        a2_snapshot_factor: 1.3,
        curvature_resolution: 2.0,
        ..SolverParams::default()
    }
}

fn neves_config(beta: f64, dir: &Path) -> ExperimentConfig {
    ExperimentConfig::new(InitialSpec::Neves { beta, n: 2, radius: 10.0, h: 0.1 }, neves_solver(), dir)
}

/// Every file under `dir` with the given extension, relative path → bytes.
fn files(dir: &Path, ext: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == ext) {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

struct Shared {
    _tmp: TempDir,
    dir: PathBuf,
}

/// One Neves `β = 2π/3` run shared by tests that do not add to it.
fn neves_run() -> &'static Shared {
    static R: OnceLock<Shared> = OnceLock::new();
    R.get_or_init(|| {
        let tmp = TempDir::new().unwrap();
        let dir = tmp.path().join("neves");
        run_experiment(&neves_config(2.0 * PI / 3.0, &dir)).unwrap();
        Shared { _tmp: tmp, dir }
    })
}

#[test]
fn minimal_lawlor_run_writes_the_layout_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("lawlor");
    let config = lawlor_config(&dir);
    let s = run_experiment(&config).unwrap();
    assert_eq!(s.manifest.status, RunStatus::Complete);
    assert_eq!(s.manifest.termination, Some(Termination::Horizon));
    assert!(s.manifest.snapshots >= 2);
    for f in ["manifest.json", "series.csv", "checkpoint.json", "analysis.csv"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    assert!(s.manifest.singularity.is_none());
    let first = files(&dir, "csv");
    assert!(first.len() >= 4);

    let again = run_experiment(&config).unwrap();
    assert_eq!(again.manifest, s.manifest);
    assert_eq!(files(&dir, "csv"), first);
}

#[test]
fn neves_run_stops_on_curvature_with_a_singularity_block() {
    let dir = &neves_run().dir;
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["termination"], "curvature_stop");
    assert_eq!(manifest["status"], "complete");
    let block = &manifest["singularity"];
    let t_est = block["t_est"].as_f64().unwrap();
    assert!(t_est > 2.0 && t_est < 2.6, "T = {t_est}");
    assert!(block["location"].is_array());
    let analysis = fs::read_to_string(dir.join("analysis.csv")).unwrap();
    assert!(analysis.contains("termination,curvature_stop"));
    assert!(dir.join("rescale_typeI_0/fits.csv").is_file());
    assert!(dir.join("rescale_typeII_1/fits.csv").is_file());

    // every stored curve passes the curve invariants again
    let run = load_run(dir).unwrap();
    assert_eq!(run.trajectory.snapshots.len(), run.manifest.snapshots);

    let tmp = TempDir::new().unwrap();
    let other = tmp.path().join("again");
    run_experiment(&neves_config(2.0 * PI / 3.0, &other)).unwrap();
    assert_eq!(fs::read(dir.join("series.csv")).unwrap(), fs::read(other.join("series.csv")).unwrap());
    assert_eq!(files(dir, "csv"), files(&other, "csv"));
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let mut c = lawlor_config(&tmp.path().join("x"));
    c.solver.h = -1.0;
    match run_experiment(&c) {
        Err(HarnessError::Config(e)) => {
            assert_eq!(e.field, "solver.h");
            assert!(e.to_string().contains("solver.h"));
        }
        other => panic!("expected a config error, got {other:?}"),
    }
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn solver_failure_keeps_a_failed_manifest() {
    let tmp = TempDir::new().unwrap();
    let curve_path = tmp.path().join("two.csv");
    let c = ProfileCurve::two_component(vec![Point::new(1.0, 0.0), Point::new(2.0, 0.0)], 2).unwrap();
    write_curve(&curve_path, &c, None, None).unwrap();
    let dir = tmp.path().join("fail");
    let mut config = lawlor_config(&dir);
    config.initial = InitialSpec::CurveFile { path: curve_path };
    let err = run_experiment(&config).unwrap_err();
    assert!(matches!(err, HarnessError::Solver { .. }), "{err}");
    let m = RunManifest::load(&dir).unwrap();
    assert_eq!(m.status, RunStatus::Failed);
    assert!(m.error.unwrap().contains("nodes"));
}

#[test]
fn resume_continues_bit_identically() {
    let tmp = TempDir::new().unwrap();
    let reference = tmp.path().join("reference");
    run_experiment(&neves_config(0.7 * PI, &reference)).unwrap();

    let dir = tmp.path().join("interrupted");
    let config = neves_config(0.7 * PI, &dir);
    match run_with(&config, RunControl { stop_after_snapshots: Some(6) }).unwrap() {
        RunOutcome::Interrupted { snapshots, .. } => assert_eq!(snapshots, 6),
        other => panic!("{other:?}"),
    }
    assert!(!dir.join("snapshots/snap_0006.csv").exists());
    assert_eq!(RunManifest::load(&dir).unwrap().status, RunStatus::Running);

    match resume(&dir).unwrap() {
        RunOutcome::Complete(s) => assert_eq!(s.manifest.termination, Some(Termination::CurvatureStop)),
        other => panic!("{other:?}"),
    }
    assert_eq!(
        fs::read(dir.join("snapshots/snap_0006.csv")).unwrap(),
        fs::read(reference.join("snapshots/snap_0006.csv")).unwrap()
    );
    assert_eq!(files(&dir, "csv"), files(&reference, "csv"));

    // a finished run is left alone
    let before = files(&dir, "csv");
    assert!(matches!(resume(&dir).unwrap(), RunOutcome::AlreadyComplete { .. }));
    assert_eq!(files(&dir, "csv"), before);
}

#[test]
fn corrupted_checkpoint_is_refused() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("run");
    let config = lawlor_config(&dir);
    run_with(&config, RunControl { stop_after_snapshots: Some(1) }).unwrap();
    let path = dir.join("checkpoint.json");
    let text = fs::read_to_string(&path).unwrap();
    let at = text.find("\\\"t\\\":").expect("payload holds the time");
    let mut bytes = text.into_bytes();
    // change one character inside the payload
    let i = at + 6;
    bytes[i] = if bytes[i] == b'1' { b'2' } else { b'1' };
    fs::write(&path, bytes).unwrap();
    let err = resume(&dir).unwrap_err();
    assert!(err.to_string().contains("checksum"), "{err}");
}

#[test]
fn sweep_over_beta_is_singular_everywhere() {
    let tmp = TempDir::new().unwrap();
    let base = neves_config(2.0, &tmp.path().join("sweep"));
    let betas = [0.6 * PI, 0.7 * PI, 0.8 * PI];
    let table = sweep(&base, &betas, &[2]).unwrap();
    assert!(table.failures.is_empty(), "{:?}", table.failures);
    assert_eq!(table.rows.len(), 3);
    for (row, &beta) in table.rows.iter().zip(&betas) {
        assert_eq!(row.beta, beta);
        assert!(row.singular, "β = {beta}");
        assert!(row.location_norm < 0.05, "β = {beta}: |x| = {}", row.location_norm);
        assert!((row.pair_angle - PI / 2.0).abs() < 0.1, "β = {beta}: angle {}", row.pair_angle);
        // the hash re-derives the row's parameters
        let m = RunManifest::load(&row.run_dir).unwrap();
        assert_eq!(m.config.hash(), row.config_hash);
        assert_eq!(m.config.initial, InitialSpec::Neves { beta, n: 2, radius: 10.0, h: 0.1 });
    }
    let csv = fs::read_to_string(tmp.path().join("sweep/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("beta,n,t_est,singular"));
}

#[test]
fn sweep_over_dimension_is_singular() {
    let tmp = TempDir::new().unwrap();
    let base = neves_config(2.0, &tmp.path().join("sweep"));
    for n in [2u32, 3] {
        let beta = 0.9 * 2.0 * PI / n as f64;
        let table = sweep(&base, &[beta], &[n]).unwrap();
        assert_eq!(table.rows.len(), 1, "{:?}", table.failures);
        assert!(table.rows[0].singular, "n = {n}");
        assert_eq!(table.rows[0].n, n);
    }
}

#[test]
fn sweep_edge_cases() {
    let tmp = TempDir::new().unwrap();
    let base = neves_config(2.0, &tmp.path().join("empty"));
    let table = sweep(&base, &[], &[2]).unwrap();
    assert!(table.rows.is_empty() && table.failures.is_empty());
    let csv = fs::read_to_string(tmp.path().join("empty/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);

    let err = sweep(&base, &[2.0, 1.0], &[2]).unwrap_err();
    assert!(matches!(err, HarnessError::Config(ref e) if e.field == "beta_grid"), "{err}");

    let lawlor = lawlor_config(&tmp.path().join("l"));
    assert!(matches!(sweep(&lawlor, &[2.0], &[2]), Err(HarnessError::Config(_))));

    // a point outside (0, π) fails on its own and the rest still runs
    let base = neves_config(2.0, &tmp.path().join("mixed"));
    let table = sweep(&base, &[0.7 * PI, 1.2 * PI], &[2]).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.failures.len(), 1);
    assert!(table.failures[0].error.contains("initial.beta"));
    assert!(fs::read_to_string(tmp.path().join("mixed/sweep_failures.csv")).unwrap().contains("initial.beta"));
}

#[test]
fn plots_of_a_singular_run() {
    let dir = &neves_run().dir;
    let r = export_plots(dir, &PlotKind::ALL).unwrap();
    assert!(r.notices.is_empty(), "{:?}", r.notices);
    for name in ["flow.svg", "typeI.svg", "typeII.svg", "density.svg", "a2.svg"] {
        assert!(dir.join(name).is_file(), "{name}");
    }
    let flow = fs::read_to_string(dir.join("flow.svg")).unwrap();
    assert_eq!(flow.matches(">t = ").count(), 5);
    let type_i = fs::read_to_string(dir.join("typeI.svg")).unwrap();
    assert!(type_i.contains("fitted pair"));

    let bytes: Vec<_> = files(dir, "svg");
    export_plots(dir, &PlotKind::ALL).unwrap();
    assert_eq!(files(dir, "svg"), bytes);
}

#[test]
fn plots_without_rescalings_emit_a_notice() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("lawlor");
    let s = run_experiment(&lawlor_config(&dir)).unwrap();
    assert!(s.notices.iter().any(|n| n.contains("rescaling")));
    let r = export_plots(&dir, &[PlotKind::Rescale, PlotKind::Density]).unwrap();
    assert_eq!(r.notices.len(), 1, "{:?}", r.notices);
    assert!(r.notices[0].contains("rescal"));
    assert_eq!(r.written, vec![dir.join("density.svg")]);

    fs::remove_file(dir.join("density.csv")).unwrap();
    let r = export_plots(&dir, &[PlotKind::Density]).unwrap();
    assert!(r.written.is_empty());
    assert!(r.notices[0].contains("density.csv"));
}

#[test]
fn rescale_and_density_on_a_finished_run() {
    let tmp = TempDir::new().unwrap();
    let dir = &tmp.path().join("neves");
    run_experiment(&neves_config(2.0 * PI / 3.0, dir)).unwrap();
    let request = lmcf_cli::RescaleRequest::Intermediate {
        ks: Vec::new(),
        tau: 0.0,
        window: lmcf_core::Window::Annulus { inner: 0.1, outer: 2.0 },
    };
    let result = lmcf_cli::rescale_run(dir, &request).unwrap();
    assert!(result.dir.file_name().unwrap().to_string_lossy().starts_with("rescale_intermediate_"));
    assert!(result.dir.join("trends.json").is_file());
    assert!(result.rows.iter().all(|r| r.fit.is_some()), "{:?}", result.rows);

    let h = lmcf_cli::density_probe(dir, None, &[0.1, 0.3, 1.0]).unwrap();
    assert!(h.violations.is_empty());
    assert!(h.probes.iter().all(|p| p.theta.is_some_and(|t| (t - 2.0).abs() < 0.1)));
}

#[test]
fn binary_exit_codes_and_output_root() {
    let tmp = TempDir::new().unwrap();
    let config = lawlor_config(Path::new("rel"));
    let path = tmp.path().join("config.json");
    fs::write(&path, config.to_json()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lmcf"))
        .args(["simulate", path.to_str().unwrap()])
        .env("LMCF_OUTPUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("rel/manifest.json").is_file());

    let mut bad = config.clone();
    bad.solver.dt_cfl = 3.0;
    fs::write(&path, bad.to_json()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lmcf"))
        .args(["simulate", path.to_str().unwrap()])
        .env("LMCF_OUTPUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver.dt_cfl"));

    let out = Command::new(env!("CARGO_BIN_EXE_lmcf"))
        .args(["resume", tmp.path().join("rel").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("already complete"));

    let digest = hex(&[0xab, 0x01]);
    assert_eq!(digest, "ab01");
}
