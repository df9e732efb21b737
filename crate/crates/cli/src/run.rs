//! Run directories: evolve, checkpoint after every snapshot, resume, and the
//! post-run diagnostics.
//!
//! Layout of a run directory:
//!
//! ```text
//! manifest.json        status, termination, config and its hash, singularity block
//! checkpoint.json      integrator state, series and snapshot digests, with checksum
//! series.csv           t,max_a2,min_abs_gamma,theta_osc,length_in_ball
//! snapshots/snap_NNNN.csv (+ .json sidecar)
//! analysis.csv         quantity,value
//! density.csv          r,theta
//! rescale_<kind>_<i>/  curve_NNN.csv (+ .json), fits.csv, trends.json
//! ```

use crate::config::{hex, ExperimentConfig, RescaleRequest, SCHEMA_VERSION};
use lmcf_core::blowup::{
    fit_lawlor, fit_plane_pair, huisken_check, max_available_k, rescale, type_ii_select, HuiskenReport, RescalingKind,
    TypeIISelection,
};
use lmcf_core::io::{curve_csv, read_curve, write_curve};
use lmcf_core::solver::{Advance, SeriesEntry, Snapshot};
use lmcf_core::{
    detect_singularity, FlowTrajectory, Integrator, IntegratorState, ModelFit, Point, ProfileCurve, RescalingSpec,
    SingularityReport, SpacetimePoint, Termination, TypeClass, Window,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MANIFEST: &str = "manifest.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const SERIES: &str = "series.csv";
pub const ANALYSIS: &str = "analysis.csv";
pub const DENSITY: &str = "density.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Curve(#[from] lmcf_core::io::IoError),
    #[error("initial curve: {0}")]
    Initial(String),
    #[error("run failed (partial results kept in {dir}): {message}")]
    Solver { dir: PathBuf, message: String },
    #[error("{0}")]
    Checkpoint(String),
    #[error("{0}")]
    Run(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(io_err(path))
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn sha256(text: &str) -> String {
    hex(&Sha256::digest(text.as_bytes()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub status: RunStatus,
    pub termination: Option<Termination>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub snapshots: usize,
    pub steps: u64,
    pub t_last: Option<f64>,
    /// Present once the run has finished and the report has finite entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singularity: Option<SingularityReport>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(MANIFEST);
        if !path.is_file() {
            return Err(HarnessError::Run(format!("{} is not a run directory (no {MANIFEST})", dir.display())));
        }
        serde_json::from_str(&read(&path)?)
            .map_err(|e| HarnessError::Run(format!("{}: {e}", path.display())))
    }

    fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        write(&dir.join(MANIFEST), serde_json::to_string_pretty(self).expect("manifest serialises") + "\n")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SnapshotRecord {
    file: String,
    t: f64,
    sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CheckpointPayload {
    config_hash: String,
    state: IntegratorState,
    series: Vec<SeriesEntry>,
    snapshots: Vec<SnapshotRecord>,
}

/// On-disk checkpoint: the payload is kept as a JSON string so the checksum
/// covers exactly the bytes that are parsed back.
#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    sha256: String,
    payload: String,
}

fn save_checkpoint(dir: &Path, payload: &CheckpointPayload) -> Result<(), HarnessError> {
    let text = serde_json::to_string(payload).expect("checkpoint serialises");
    let file = CheckpointFile { sha256: sha256(&text), payload: text };
    write(&dir.join(CHECKPOINT), serde_json::to_string(&file).expect("checkpoint serialises") + "\n")
}

fn load_checkpoint(dir: &Path) -> Result<CheckpointPayload, HarnessError> {
    let path = dir.join(CHECKPOINT);
    let text = read(&path)?;
    let file: CheckpointFile = serde_json::from_str(&text).map_err(|e| {
        HarnessError::Checkpoint(format!("{}: unreadable, checksum cannot be verified: {e}", path.display()))
    })?;
    let actual = sha256(&file.payload);
    if actual != file.sha256 {
        return Err(HarnessError::Checkpoint(format!(
            "{}: checksum mismatch (recorded {}, computed {actual}); refusing to resume",
            path.display(),
            file.sha256
        )));
    }
    serde_json::from_str(&file.payload)
        .map_err(|e| HarnessError::Checkpoint(format!("{}: payload does not parse: {e}", path.display())))
}

fn snapshot_name(i: usize) -> String {
    format!("{SNAPSHOT_DIR}/snap_{i:04}.csv")
}

fn series_csv(series: &[SeriesEntry]) -> String {
    let mut out = String::from("t,max_a2,min_abs_gamma,theta_osc,length_in_ball\n");
    for e in series {
        let _ = writeln!(out, "{:?},{:?},{:?},{:?},{:?}", e.t, e.max_a2, e.min_abs_gamma, e.theta_osc, e.length_in_ball);
    }
    out
}

/// Reads `series.csv` back.
pub fn parse_series(text: &str) -> Result<Vec<SeriesEntry>, String> {
    let mut lines = text.lines();
    if lines.next() != Some("t,max_a2,min_abs_gamma,theta_osc,length_in_ball") {
        return Err("series.csv: unexpected header".into());
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: Vec<f64> = l
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("series.csv line {}: {e}", i + 2))?;
            if v.len() != 5 {
                return Err(format!("series.csv line {}: expected 5 fields", i + 2));
            }
            Ok(SeriesEntry { t: v[0], max_a2: v[1], min_abs_gamma: v[2], theta_osc: v[3], length_in_ball: v[4] })
        })
        .collect()
}

/// Stops a run early; used to exercise [`resume`].
#[derive(Clone, Copy, Debug, Default)]
pub struct RunControl {
    /// Interrupt once this many snapshots exist on disk.
    pub stop_after_snapshots: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitRow {
    pub index: usize,
    pub lambda: f64,
    pub t: f64,
    pub center: SpacetimePoint,
    pub fit: Option<ModelFit>,
    pub flag: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RescaleResult {
    pub kind: RescalingKind,
    pub dir: PathBuf,
    pub rows: Vec<FitRow>,
}

impl RescaleResult {
    /// Deepest row that has a fit.
    pub fn last_fit(&self) -> Option<&ModelFit> {
        self.rows.iter().rev().find_map(|r| r.fit.as_ref())
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub rescalings: Vec<RescaleResult>,
    pub density: Option<HuiskenReport>,
    /// Diagnostics that were skipped, and why.
    pub notices: Vec<String>,
}

#[derive(Debug)]
pub enum RunOutcome {
    Complete(Box<RunSummary>),
    Interrupted { dir: PathBuf, snapshots: usize },
    /// `resume` on a run that had already completed.
    AlreadyComplete { dir: PathBuf, manifest: Box<RunManifest> },
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    match run_with(config, RunControl::default())? {
        RunOutcome::Complete(s) => Ok(*s),
        other => unreachable!("uncontrolled run ended as {other:?}"),
    }
}

pub fn run_with(config: &ExperimentConfig, control: RunControl) -> Result<RunOutcome, HarnessError> {
    config.validate()?;
    let dir = config.output.dir.clone();
    if dir.join(MANIFEST).is_file() {
        // a previous run in the same place
        fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }
    fs::create_dir_all(dir.join(SNAPSHOT_DIR)).map_err(io_err(&dir))?;
    let mut manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        config_hash: config.hash(),
        status: RunStatus::Running,
        termination: None,
        error: None,
        snapshots: 0,
        steps: 0,
        t_last: None,
        singularity: None,
        config: config.clone(),
    };
    manifest.save(&dir)?;
    let started = config
        .initial
        .build()
        .map_err(HarnessError::Initial)
        .and_then(|c| Integrator::new(c, config.solver.clone()).map_err(|e| HarnessError::Initial(e.to_string())));
    let integrator = match started {
        Ok(i) => i,
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(e.to_string());
            manifest.save(&dir)?;
            return Err(HarnessError::Solver { dir, message: e.to_string() });
        }
    };
    log::info!("run {} ({})", dir.display(), manifest.config_hash);
    drive(dir, manifest, integrator, Vec::new(), Vec::new(), Vec::new(), control)
}

/// Continues an interrupted run from its checkpoint.
pub fn resume(dir: &Path) -> Result<RunOutcome, HarnessError> {
    resume_with(dir, RunControl::default())
}

pub fn resume_with(dir: &Path, control: RunControl) -> Result<RunOutcome, HarnessError> {
    let manifest = RunManifest::load(dir)?;
    if manifest.status == RunStatus::Complete {
        log::info!("{} is already complete", dir.display());
        return Ok(RunOutcome::AlreadyComplete { dir: dir.to_path_buf(), manifest: Box::new(manifest) });
    }
    let (payload, snapshots) = load_consistent(dir, &manifest)?;
    let integrator = Integrator::from_state(payload.state, manifest.config.solver.clone());
    log::info!("resuming {} at snapshot {}", dir.display(), snapshots.len());
    let mut manifest = manifest;
    manifest.status = RunStatus::Running;
    manifest.error = None;
    drive(dir.to_path_buf(), manifest, integrator, snapshots, payload.series, payload.snapshots, control)
}

/// Checkpoint plus the snapshot curves it lists, all verified.
fn load_consistent(dir: &Path, manifest: &RunManifest) -> Result<(CheckpointPayload, Vec<Snapshot>), HarnessError> {
    let payload = load_checkpoint(dir)?;
    if payload.config_hash != manifest.config_hash || manifest.config.hash() != manifest.config_hash {
        return Err(HarnessError::Checkpoint(format!(
            "{}: checkpoint config hash {} does not match the manifest",
            dir.display(),
            payload.config_hash
        )));
    }
    let mut snapshots = Vec::with_capacity(payload.snapshots.len());
    for rec in &payload.snapshots {
        let path = dir.join(&rec.file);
        let digest = sha256(&read(&path)?);
        if digest != rec.sha256 {
            return Err(HarnessError::Checkpoint(format!("{}: checksum mismatch with checkpoint", path.display())));
        }
        let (curve, _) = read_curve(&path)?;
        snapshots.push(Snapshot { t: rec.t, curve });
    }
    Ok((payload, snapshots))
}

/// A finished run read back from disk.
pub struct LoadedRun {
    pub manifest: RunManifest,
    pub trajectory: FlowTrajectory,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun, HarnessError> {
    let manifest = RunManifest::load(dir)?;
    let (payload, snapshots) = load_consistent(dir, &manifest)?;
    let trajectory = FlowTrajectory {
        snapshots,
        series: payload.series,
        termination: payload.state.termination,
        ball_radius: manifest.config.solver.bc_radius,
    };
    if trajectory.snapshots.is_empty() {
        return Err(HarnessError::Run(format!("{}: no snapshots", dir.display())));
    }
    Ok(LoadedRun { manifest, trajectory })
}

fn drive(
    dir: PathBuf,
    mut manifest: RunManifest,
    mut integrator: Integrator,
    mut snapshots: Vec<Snapshot>,
    mut series: Vec<SeriesEntry>,
    mut records: Vec<SnapshotRecord>,
    control: RunControl,
) -> Result<RunOutcome, HarnessError> {
    let mut consumed = 0;
    let termination = loop {
        let step = integrator.advance();
        let traj = integrator.trajectory();
        while consumed < traj.snapshots.len() {
            let snap = &traj.snapshots[consumed];
            let file = snapshot_name(snapshots.len());
            let path = dir.join(&file);
            write_curve(&path, &snap.curve, Some(snap.t), None)?;
            records.push(SnapshotRecord { file, t: snap.t, sha256: sha256(&curve_csv(&snap.curve)) });
            log::debug!("snapshot {} at t = {:?}, max A² = {:.4e}", snapshots.len(), snap.t, traj.series[consumed].max_a2);
            snapshots.push(snap.clone());
            series.push(traj.series[consumed]);
            consumed += 1;
        }
        write(&dir.join(SERIES), series_csv(&series))?;
        manifest.snapshots = snapshots.len();
        manifest.steps = integrator.state().steps;
        manifest.t_last = snapshots.last().map(|s| s.t);
        match step {
            Ok(advance) => {
                let payload = CheckpointPayload {
                    config_hash: manifest.config_hash.clone(),
                    state: integrator.state().clone(),
                    series: series.clone(),
                    snapshots: records.clone(),
                };
                save_checkpoint(&dir, &payload)?;
                if let Advance::Finished(why) = advance {
                    break why;
                }
                if control.stop_after_snapshots.is_some_and(|k| snapshots.len() >= k) {
                    manifest.save(&dir)?;
                    return Ok(RunOutcome::Interrupted { dir, snapshots: snapshots.len() });
                }
            }
            Err(e) => {
                manifest.status = RunStatus::Failed;
                manifest.error = Some(e.to_string());
                manifest.save(&dir)?;
                log::error!("{}: {e}", dir.display());
                return Err(HarnessError::Solver { dir, message: e.to_string() });
            }
        }
    };
    drop(integrator);
    log::info!("{}: {termination} after {} snapshots", dir.display(), snapshots.len());
    let traj = FlowTrajectory {
        snapshots,
        series,
        termination: Some(termination),
        ball_radius: manifest.config.solver.bc_radius,
    };
    manifest.termination = Some(termination);
    let summary = finish(dir, manifest, &traj)?;
    Ok(RunOutcome::Complete(Box::new(summary)))
}

fn finite_report(r: &SingularityReport) -> bool {
    [r.t_est, r.location.re, r.location.im, r.fit_exponent, r.fit_constant, r.fit_residual, r.product_growth]
        .iter()
        .all(|x| x.is_finite())
}

fn finish(dir: PathBuf, mut manifest: RunManifest, traj: &FlowTrajectory) -> Result<RunSummary, HarnessError> {
    let config = manifest.config.clone();
    let mut notices = Vec::new();
    let report = detect_singularity(traj, config.diagnostics.divergence_factor);
    let singular = traj.termination == Some(Termination::CurvatureStop) && finite_report(&report);
    if traj.termination == Some(Termination::CurvatureStop) && !singular {
        notices.push("curvature stop, but the blowup fit did not converge".to_string());
    }

    let (center, grid) = density_defaults(traj, singular.then_some(&report), &config.diagnostics.density_r_grid);
    let density = if grid.is_empty() {
        notices.push("density probe skipped: no usable scales".to_string());
        None
    } else {
        match huisken_check(traj, center, &grid, 1e-3, 2.0) {
            Ok(h) => {
                write(&dir.join(DENSITY), density_csv(&h))?;
                Some(h)
            }
            Err(e) => {
                notices.push(format!("density probe failed: {e}"));
                None
            }
        }
    };

    let mut rescalings = Vec::new();
    for (i, request) in config.diagnostics.rescalings.iter().enumerate() {
        if !singular {
            notices.push(format!("rescaling {i} skipped: the run has no singular time"));
            continue;
        }
        match rescale_into(&dir, i, traj, &report, request) {
            Ok(r) => rescalings.push(r),
            Err(e) => notices.push(format!("rescaling {i} skipped: {e}")),
        }
    }

    write(&dir.join(ANALYSIS), analysis_csv(&manifest, traj, &report, density.as_ref()))?;
    for n in &notices {
        log::info!("{}: {n}", dir.display());
    }
    manifest.singularity = singular.then_some(report);
    manifest.status = RunStatus::Complete;
    manifest.save(&dir)?;
    if config.output.plots {
        let plotted = crate::plot::export_plots(&dir, &crate::plot::PlotKind::ALL)?;
        notices.extend(plotted.notices);
    }
    Ok(RunSummary { dir, manifest, rescalings, density, notices })
}

/// Probe centre and scales: `(x_sing, T)` for singular runs, `(O, t_last)`
/// otherwise; scales default to 16 log-spaced values below `0.99√t₀`.
fn density_defaults(traj: &FlowTrajectory, report: Option<&SingularityReport>, grid: &[f64]) -> (SpacetimePoint, Vec<f64>) {
    let center = match report {
        Some(r) => SpacetimePoint { x: r.location, t: r.t_est },
        None => SpacetimePoint { x: Point::new(0.0, 0.0), t: traj.last().t },
    };
    let t0 = center.t - traj.snapshots[0].t;
    if !grid.is_empty() {
        return (center, grid.to_vec());
    }
    let r_max = 0.99 * t0.max(0.0).sqrt();
    // scales below √(t₀ - t_last) look past the end of the run
    let r_floor = 1.05 * (center.t - traj.last().t).max(0.0).sqrt();
    let r_min = 0.01f64.max(r_floor).min(0.1 * r_max);
    if !(r_max > 0.0) {
        return (center, Vec::new());
    }
    let grid = (0..16).map(|i| r_min * (r_max / r_min).powf(i as f64 / 15.0)).collect();
    (center, grid)
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:?}"))
}

fn density_csv(h: &HuiskenReport) -> String {
    let mut out = String::from("r,theta\n");
    for p in &h.probes {
        let _ = writeln!(out, "{:?},{}", p.r, opt(p.theta));
    }
    out
}

fn analysis_csv(
    manifest: &RunManifest,
    traj: &FlowTrajectory,
    r: &SingularityReport,
    density: Option<&HuiskenReport>,
) -> String {
    let mut rows: Vec<(&str, String)> = vec![
        ("termination", traj.termination.map_or(String::new(), |t| t.to_string())),
        ("snapshots", traj.snapshots.len().to_string()),
        ("steps", manifest.steps.to_string()),
        ("t_last", format!("{:?}", traj.last().t)),
        ("t_est", format!("{:?}", r.t_est)),
        ("location_x", format!("{:?}", r.location.re)),
        ("location_y", format!("{:?}", r.location.im)),
        ("type_class", serde_json::to_value(r.type_class).unwrap().as_str().unwrap_or_default().to_string()),
        ("fit_exponent", format!("{:?}", r.fit_exponent)),
        ("fit_constant", format!("{:?}", r.fit_constant)),
        ("fit_residual", format!("{:?}", r.fit_residual)),
        ("product_growth", format!("{:?}", r.product_growth)),
        ("fit_start", r.fit_window.0.to_string()),
        ("fit_end", r.fit_window.1.to_string()),
    ];
    if let Some(h) = density {
        let c = h.probes[0].center;
        rows.push(("density_center_x", format!("{:?}", c.x.re)));
        rows.push(("density_center_y", format!("{:?}", c.x.im)));
        rows.push(("density_center_t", format!("{:?}", c.t)));
        rows.push(("density_violations", h.violations.len().to_string()));
        rows.push(("density_scale_error", format!("{:?}", h.scale_invariance_error)));
    }
    let mut out = String::from("quantity,value\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

/// Default Type II times: `[k_max]`, or `k_max/64 .. k_max` in factors of 4
/// for the intermediate sequence.
fn default_ks(traj: &FlowTrajectory, t_est: f64, intermediate: bool) -> Result<Vec<u64>, String> {
    let k_max = max_available_k(traj, t_est).ok_or("the run ends after the estimated singular time")?;
    if !intermediate {
        return Ok(vec![k_max]);
    }
    let mut ks: Vec<u64> = [64, 16, 4, 1].iter().map(|d| k_max / d).filter(|&k| k > 0).collect();
    ks.dedup();
    Ok(ks)
}

fn build_spec(
    traj: &FlowTrajectory,
    t_est: f64,
    request: &RescaleRequest,
) -> Result<(RescalingSpec, Window), String> {
    let selections = |ks: &[u64], intermediate: bool| -> Result<Vec<TypeIISelection>, String> {
        let ks = if ks.is_empty() { default_ks(traj, t_est, intermediate)? } else { ks.to_vec() };
        ks.iter().map(|&k| type_ii_select(traj, t_est, k).map_err(|e| e.to_string())).collect()
    };
    match request {
        RescaleRequest::TypeI { factors, tau, window } => {
            Ok((RescalingSpec::type_i(t_est, factors, *tau).map_err(|e| e.to_string())?, *window))
        }
        RescaleRequest::TypeII { ks, tau, window } => {
            let sels = selections(ks, false)?;
            Ok((RescalingSpec::type_ii(&sels, *tau).map_err(|e| e.to_string())?, *window))
        }
        RescaleRequest::Intermediate { ks, tau, window } => {
            let sels = selections(ks, true)?;
            let factors: Vec<f64> = sels.iter().map(|s| s.a.sqrt()).collect();
            Ok((RescalingSpec::intermediate(&sels, &factors, t_est, *tau).map_err(|e| e.to_string())?, *window))
        }
    }
}

pub fn fit_model(curve: &ProfileCurve, kind: RescalingKind, window: Window) -> Result<ModelFit, String> {
    match kind {
        RescalingKind::TypeII => fit_lawlor(curve, window),
        RescalingKind::TypeI | RescalingKind::Intermediate => fit_plane_pair(curve, window),
    }
    .map_err(|e| e.to_string())
}

fn rescale_into(
    dir: &Path,
    index: usize,
    traj: &FlowTrajectory,
    report: &SingularityReport,
    request: &RescaleRequest,
) -> Result<RescaleResult, HarnessError> {
    let (spec, window) = build_spec(traj, report.t_est, request).map_err(HarnessError::Run)?;
    let out = dir.join(format!("rescale_{}_{index}", spec.kind));
    if out.exists() {
        fs::remove_dir_all(&out).map_err(io_err(&out))?;
    }
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let mut rows = Vec::new();
    for (j, (rs, item)) in rescale(traj, &spec).into_iter().zip(&spec.items).enumerate() {
        let (fit, flag) = match &rs.curve {
            None => (None, rs.flag.clone()),
            Some(curve) => {
                let meta = serde_json::json!({
                    "kind": spec.kind,
                    "lambda": rs.lambda,
                    "tau": rs.tau,
                    "center": item.center,
                    "shift": [rs.shift.re, rs.shift.im],
                });
                write_curve(&out.join(format!("curve_{j:03}.csv")), curve, Some(rs.t), Some(meta))?;
                match fit_model(curve, spec.kind, window) {
                    Ok(f) => (Some(f), None),
                    Err(e) => (None, Some(e)),
                }
            }
        };
        rows.push(FitRow { index: j, lambda: rs.lambda, t: rs.t, center: item.center, fit, flag });
    }
    write(&out.join("fits.csv"), fits_csv(&rows, spec.tau))?;
    if let Some(trends) = &spec.trends {
        write(&out.join("trends.json"), serde_json::to_string_pretty(trends).expect("trends serialise") + "\n")?;
    }
    Ok(RescaleResult { kind: spec.kind, dir: out, rows })
}

pub const FITS_HEADER: &str =
    "index,lambda,t,tau,center_x,center_y,center_t,family,theta_bar,alpha1,alpha2,b,inter_angle,pair_defect,residual,flag";

fn fits_csv(rows: &[FitRow], tau: f64) -> String {
    let mut out = String::from(FITS_HEADER);
    out.push('\n');
    for r in rows {
        let c = r.center;
        let _ = write!(out, "{},{:?},{:?},{tau:?},{:?},{:?},{:?},", r.index, r.lambda, r.t, c.x.re, c.x.im, c.t);
        match &r.fit {
            Some(f) => {
                let family = serde_json::to_value(f.family).unwrap();
                let _ = write!(
                    out,
                    "{},{:?},{:?},{:?},{},{:?},{:?},{:?},",
                    family.as_str().unwrap_or_default(),
                    f.theta_bar,
                    f.alpha1,
                    f.alpha2,
                    opt(f.b),
                    f.inter_angle,
                    f.pair_defect,
                    f.residual
                );
            }
            None => out.push_str(",,,,,,,,"),
        }
        // keep the flag a single CSV field
        let flag = r.flag.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(out, "{flag}");
    }
    out
}

/// Adds a rescaling sequence to a finished run as the next `rescale_*` directory.
pub fn rescale_run(dir: &Path, request: &RescaleRequest) -> Result<RescaleResult, HarnessError> {
    let run = load_run(dir)?;
    let report = run.manifest.singularity.as_ref().ok_or_else(|| {
        HarnessError::Run(format!("{}: no singularity report; rescalings need a singular run", dir.display()))
    })?;
    let index = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("rescale_"))
        .count();
    rescale_into(dir, index, &run.trajectory, report, request)
}

/// Gaussian density probe on a finished run. Without a centre the run's
/// default (singular point, or origin at the last time) is used.
pub fn density_probe(dir: &Path, center: Option<SpacetimePoint>, grid: &[f64]) -> Result<HuiskenReport, HarnessError> {
    let run = load_run(dir)?;
    let (default_center, default_grid) = density_defaults(&run.trajectory, run.manifest.singularity.as_ref(), grid);
    let center = center.unwrap_or(default_center);
    let grid = if grid.is_empty() { default_grid } else { grid.to_vec() };
    huisken_check(&run.trajectory, center, &grid, 1e-3, 2.0).map_err(|e| HarnessError::Run(e.to_string()))
}

impl RunSummary {
    pub fn singular(&self) -> bool {
        self.manifest.termination == Some(Termination::CurvatureStop) && self.manifest.singularity.is_some()
    }

    pub fn type_class(&self) -> TypeClass {
        self.manifest.singularity.as_ref().map_or(TypeClass::None, |r| r.type_class)
    }
}
