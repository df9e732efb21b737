//! Parameter sweeps of the Neves initial condition over `(β, n)`.

use crate::config::{ConfigError, ExperimentConfig, InitialSpec};
use crate::run::{run_experiment, HarnessError, RunSummary};
use lmcf_core::blowup::RescalingKind;
use lmcf_core::TypeClass;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::PathBuf;

pub const SWEEP_CSV: &str = "sweep.csv";
pub const FAILURES_CSV: &str = "sweep_failures.csv";
pub const SWEEP_HEADER: &str = "beta,n,t_est,singular,location_norm,type_class,pair_angle,lawlor_b,config_hash,run_dir";

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub n: u32,
    pub t_est: f64,
    pub singular: bool,
    pub location_norm: f64,
    pub type_class: TypeClass,
    /// Angle between the lines of the deepest Type I plane-pair fit.
    pub pair_angle: f64,
    /// `B` of the deepest Type II neck fit.
    pub lawlor_b: f64,
    pub config_hash: String,
    pub run_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepFailure {
    pub beta: f64,
    pub n: u32,
    pub config_hash: String,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

fn type_class_name(t: TypeClass) -> &'static str {
    match t {
        TypeClass::TypeILike => "type-i-like",
        TypeClass::TypeIILike => "type-ii-like",
        TypeClass::None => "none",
    }
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:?},{},{:?},{},{:?},{},{:?},{:?},{},{}",
                r.beta,
                r.n,
                r.t_est,
                r.singular,
                r.location_norm,
                type_class_name(r.type_class),
                r.pair_angle,
                r.lawlor_b,
                r.config_hash,
                r.run_dir.display()
            );
        }
        out
    }

    pub fn failures_csv(&self) -> String {
        let mut out = String::from("beta,n,config_hash,error\n");
        for f in &self.failures {
            let _ = writeln!(out, "{:?},{},{},{}", f.beta, f.n, f.config_hash, f.error.replace([',', '\n'], ";"));
        }
        out
    }
}

/// Config of one grid point: the base config with the Neves `β`, `n`
/// substituted and its own run directory under the base output directory.
pub fn point_config(base: &ExperimentConfig, index: usize, beta: f64, n: u32) -> Result<ExperimentConfig, ConfigError> {
    let InitialSpec::Neves { radius, h, .. } = base.initial else {
        return Err(ConfigError { field: "initial.model".into(), reason: "a sweep needs a neves base config".into() });
    };
    let mut c = base.clone();
    c.initial = InitialSpec::Neves { beta, n, radius, h };
    c.output.dir = base.output.dir.join(format!("run_{index:03}_n{n}_beta{beta:.6}"));
    Ok(c)
}

fn row(beta: f64, n: u32, s: &RunSummary) -> SweepRow {
    let report = s.manifest.singularity.as_ref();
    let deepest = |kind| s.rescalings.iter().filter(|r| r.kind == kind).find_map(|r| r.last_fit());
    SweepRow {
        beta,
        n,
        t_est: report.map_or(f64::NAN, |r| r.t_est),
        singular: s.singular(),
        location_norm: report.map_or(f64::NAN, |r| r.location.norm()),
        type_class: s.type_class(),
        pair_angle: deepest(RescalingKind::TypeI).map_or(f64::NAN, |f| f.inter_angle),
        lawlor_b: deepest(RescalingKind::TypeII).and_then(|f| f.b).unwrap_or(f64::NAN),
        config_hash: s.manifest.config_hash.clone(),
        run_dir: s.dir.clone(),
    }
}

/// Runs every `(β, n)` point in parallel and writes `sweep.csv` (and
/// `sweep_failures.csv`) into the base output directory.
pub fn sweep(base: &ExperimentConfig, betas: &[f64], ns: &[u32]) -> Result<SweepTable, HarnessError> {
    if betas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ConfigError { field: "beta_grid".into(), reason: "must be strictly increasing".into() }.into());
    }
    let points: Vec<(usize, f64, u32)> = ns
        .iter()
        .flat_map(|&n| betas.iter().map(move |&b| (b, n)))
        .enumerate()
        .map(|(i, (b, n))| (i, b, n))
        .collect();
    let configs: Vec<ExperimentConfig> =
        points.iter().map(|&(i, b, n)| point_config(base, i, b, n)).collect::<Result<_, _>>()?;
    std::fs::create_dir_all(&base.output.dir)
        .map_err(|source| HarnessError::Io { path: base.output.dir.clone(), source })?;

    let results: Vec<Result<SweepRow, SweepFailure>> = points
        .par_iter()
        .zip(configs.par_iter())
        .map(|(&(_, beta, n), config)| {
            run_experiment(config).map(|s| row(beta, n, &s)).map_err(|e| {
                log::warn!("sweep point β={beta} n={n} failed: {e}");
                SweepFailure { beta, n, config_hash: config.hash(), error: e.to_string() }
            })
        })
        .collect();

    let mut table = SweepTable::default();
    for r in results {
        match r {
            Ok(row) => table.rows.push(row),
            Err(f) => table.failures.push(f),
        }
    }
    let out = &base.output.dir;
    for (name, text) in [(SWEEP_CSV, table.to_csv()), (FAILURES_CSV, table.failures_csv())] {
        let path = out.join(name);
        std::fs::write(&path, text).map_err(|source| HarnessError::Io { path, source })?;
    }
    Ok(table)
}
