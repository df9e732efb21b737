use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lmcf_cli::{
    density_probe, export_plots, load_run, rescale_run, resume_with, run_with, sweep, ExperimentConfig, HarnessError,
    PlotKind, RescaleRequest, RunControl, RunOutcome,
};
use lmcf_core::blowup::RescalingKind;
use lmcf_core::{Point, SpacetimePoint, Termination, Window};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Exit codes: 0 horizon or interrupted, 10 curvature stop, 11 step
/// underflow, 2 solver failure, 1 any other error.
#[derive(Parser)]
#[command(name = "lmcf", version, about = "Equivariant Lagrangian mean curvature flow experiments")]
struct Cli {
    /// More logging (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Base directory for relative output paths.
    #[arg(long, env = "LMCF_OUTPUT_ROOT", global = true)]
    output_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Simulate {
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop after this many snapshots; continue later with `resume`.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Run the Neves config of `config` over a grid of β and n.
    Sweep {
        config: PathBuf,
        /// Comma-separated angles; a `pi` suffix multiplies by π.
        #[arg(long, value_delimiter = ',', value_parser = parse_angle, num_args = 0..)]
        beta: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        n: Vec<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Add a rescaling sequence to a finished singular run.
    Rescale {
        run: PathBuf,
        #[arg(long)]
        kind: KindArg,
        /// Type I factors.
        #[arg(long, value_delimiter = ',')]
        factors: Vec<f64>,
        /// Type II selection indices k (default: deepest available).
        #[arg(long, value_delimiter = ',')]
        k: Vec<u64>,
        #[arg(long)]
        tau: Option<f64>,
        /// `annulus:INNER:OUTER`, `ball:R` or `all`.
        #[arg(long, value_parser = parse_window)]
        window: Option<Window>,
    },
    /// Fit a model to a snapshot (default: the last) or a curve file.
    Fit {
        run: PathBuf,
        #[arg(long)]
        family: FamilyArg,
        #[arg(long, value_parser = parse_window)]
        window: Window,
        #[arg(long, conflicts_with = "curve")]
        snapshot: Option<usize>,
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Gaussian density probe; prints `r,theta`.
    Density {
        run: PathBuf,
        /// `x,y,t` (default: the singular point, or the origin at the last time).
        #[arg(long, value_parser = parse_center)]
        center: Option<SpacetimePoint>,
        #[arg(long, value_delimiter = ',')]
        r_grid: Vec<f64>,
    },
    /// Write SVG figures into the run directory.
    Plot {
        run: PathBuf,
        #[arg(long, value_delimiter = ',')]
        only: Vec<PlotKind>,
    },
    /// Continue an interrupted run from its checkpoint.
    Resume {
        run: PathBuf,
        #[arg(long)]
        stop_after: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    #[value(name = "typeI")]
    TypeI,
    #[value(name = "typeII")]
    TypeII,
    Intermediate,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Pair,
    Lawlor,
}

fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let (num, scale) = match t.strip_suffix("pi").or_else(|| t.strip_suffix('π')) {
        Some(rest) => (rest.trim_end_matches('*'), PI),
        None => (t, 1.0),
    };
    let v: f64 = if num.is_empty() { 1.0 } else { num.parse().map_err(|e| format!("{s:?}: {e}"))? };
    Ok(v * scale)
}

fn parse_window(s: &str) -> Result<Window, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |x: &str| x.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    match parts.as_slice() {
        ["all"] => Ok(Window::Everything),
        ["ball", r] => Ok(Window::Ball { radius: num(r)? }),
        ["annulus", a, b] => Ok(Window::Annulus { inner: num(a)?, outer: num(b)? }),
        _ => Err(format!("{s:?}: expected annulus:INNER:OUTER, ball:R or all")),
    }
}

fn parse_center(s: &str) -> Result<SpacetimePoint, String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| format!("{s:?}: {e}"))?;
    match v.as_slice() {
        [x, y, t] => Ok(SpacetimePoint { x: Point::new(*x, *y), t: *t }),
        _ => Err(format!("{s:?}: expected x,y,t")),
    }
}

fn resolve(root: Option<&Path>, dir: PathBuf) -> PathBuf {
    match root {
        Some(root) if dir.is_relative() => root.join(dir),
        _ => dir,
    }
}

fn load_config(path: &Path, out: Option<PathBuf>, root: Option<&Path>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(out) = out {
        config.output.dir = out;
    }
    config.output.dir = resolve(root, config.output.dir);
    Ok(config)
}

fn termination_code(t: Option<Termination>) -> u8 {
    match t {
        Some(Termination::CurvatureStop) => 10,
        Some(Termination::StepUnderflow) => 11,
        Some(Termination::Horizon) | None => 0,
    }
}

fn report(outcome: RunOutcome) -> u8 {
    match outcome {
        RunOutcome::Complete(s) => {
            for n in &s.notices {
                eprintln!("notice: {n}");
            }
            let m = &s.manifest;
            let term = m.termination.map_or("-".to_string(), |t| t.to_string());
            println!("{}: {term} at t = {:?} after {} snapshots", s.dir.display(), m.t_last.unwrap_or(0.0), m.snapshots);
            if let Some(r) = &m.singularity {
                println!(
                    "singularity: T = {:?} at ({:?}, {:?}), q = {:.4}, {:?}",
                    r.t_est, r.location.re, r.location.im, r.fit_exponent, r.type_class
                );
            }
            termination_code(m.termination)
        }
        RunOutcome::Interrupted { dir, snapshots } => {
            println!("{}: interrupted after {snapshots} snapshots", dir.display());
            0
        }
        RunOutcome::AlreadyComplete { dir, manifest } => {
            println!("{}: already complete", dir.display());
            termination_code(manifest.termination)
        }
    }
}

fn execute(cli: Cli) -> Result<u8> {
    let root = cli.output_root.as_deref();
    match cli.command {
        Command::Simulate { config, out, stop_after } => {
            let config = load_config(&config, out, root)?;
            Ok(report(run_with(&config, RunControl { stop_after_snapshots: stop_after })?))
        }
        Command::Resume { run, stop_after } => Ok(report(resume_with(&run, RunControl { stop_after_snapshots: stop_after })?)),
        Command::Sweep { config, beta, n, out } => {
            let config = load_config(&config, out, root)?;
            let table = sweep(&config, &beta, &n)?;
            print!("{}", table.to_csv());
            for f in &table.failures {
                eprintln!("failed: β={:?} n={}: {}", f.beta, f.n, f.error);
            }
            Ok(if table.failures.is_empty() { 0 } else { 3 })
        }
        Command::Rescale { run, kind, factors, k, tau, window } => {
            let request = match kind {
                KindArg::TypeI => {
                    if factors.is_empty() {
                        bail!("--factors is required for typeI");
                    }
                    RescaleRequest::TypeI {
                        factors,
                        tau: tau.unwrap_or(-1.0),
                        window: window.unwrap_or(Window::Annulus { inner: 0.25, outer: 2.0 }),
                    }
                }
                KindArg::TypeII => RescaleRequest::TypeII {
                    ks: k,
                    tau: tau.unwrap_or(0.0),
                    window: window.unwrap_or(Window::Ball { radius: 3.0 }),
                },
                KindArg::Intermediate => RescaleRequest::Intermediate {
                    ks: k,
                    tau: tau.unwrap_or(0.0),
                    window: window.unwrap_or(Window::Annulus { inner: 0.1, outer: 2.0 }),
                },
            };
            let result = rescale_run(&run, &request)?;
            println!("{}", result.dir.display());
            for r in &result.rows {
                match (&r.fit, &r.flag) {
                    (Some(f), _) => println!("λ={:?}: θ̄={:.6} residual={:.3e} B={:?}", r.lambda, f.theta_bar, f.residual, f.b),
                    (None, flag) => println!("λ={:?}: {}", r.lambda, flag.as_deref().unwrap_or("no fit")),
                }
            }
            Ok(0)
        }
        Command::Fit { run, family, window, snapshot, curve } => {
            let curve = match curve {
                Some(path) => lmcf_core::io::read_curve(&path)?.0,
                None => {
                    let loaded = load_run(&run)?;
                    let snaps = loaded.trajectory.snapshots;
                    let i = snapshot.unwrap_or(snaps.len() - 1);
                    snaps.into_iter().nth(i).with_context(|| format!("no snapshot {i}"))?.curve
                }
            };
            let kind = match family {
                FamilyArg::Pair => RescalingKind::TypeI,
                FamilyArg::Lawlor => RescalingKind::TypeII,
            };
            let fit = lmcf_cli::run::fit_model(&curve, kind, window).map_err(anyhow::Error::msg)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(0)
        }
        Command::Density { run, center, r_grid } => {
            let h = density_probe(&run, center, &r_grid)?;
            println!("r,theta");
            for p in &h.probes {
                println!("{:?},{}", p.r, p.theta.map_or(String::new(), |t| format!("{t:?}")));
            }
            for (i, drop) in &h.violations {
                eprintln!("monotonicity violation between r[{i}] and r[{}]: {drop:.3e}", i + 1);
            }
            Ok(0)
        }
        Command::Plot { run, only } => {
            let which = if only.is_empty() { PlotKind::ALL.to_vec() } else { only };
            let r = export_plots(&run, &which)?;
            for n in &r.notices {
                eprintln!("notice: {n}");
            }
            for p in &r.written {
                println!("{}", p.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let solver = matches!(e.downcast_ref::<HarnessError>(), Some(HarnessError::Solver { .. }));
            ExitCode::from(if solver { 2 } else { 1 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_angles_and_windows() {
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert_eq!(parse_angle("0.6pi").unwrap(), 0.6 * PI);
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert!(parse_angle("x").is_err());
        assert_eq!(parse_window("ball:3").unwrap(), Window::Ball { radius: 3.0 });
        assert_eq!(parse_window("annulus:0.5:2").unwrap(), Window::Annulus { inner: 0.5, outer: 2.0 });
        assert!(parse_window("disc:1").is_err());
        assert_eq!(parse_center("1,2,0.5").unwrap().t, 0.5);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
