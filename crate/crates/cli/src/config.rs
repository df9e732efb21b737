//! Experiment configuration: one versioned JSON document per run.

use lmcf_core::models::{
    bumped_line, lawlor_margin_for_radius, lawlor_profile, neves_margin_for_radius, neves_profile, radial_line,
};
use lmcf_core::{ProfileCurve, SolverParams, Window};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid config field `{field}`: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError { field: field.into(), reason: reason.into() }
}

/// Initial profile curve: a model constructor with its parameters, or a
/// curve file written by [`lmcf_core::io::write_curve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum InitialSpec {
    /// Neck truncated where it leaves the ball of radius `radius`.
    LawlorNeck { b: f64, theta_bar: f64, n: u32, radius: f64, h: f64 },
    RadialLine { alpha: f64, n: u32, radius: f64, h: f64 },
    /// Neves curve truncated at radius `radius`.
    Neves { beta: f64, n: u32, radius: f64, h: f64 },
    BumpedLine { alpha: f64, n: u32, radius: f64, h: f64, amplitude: f64, center: f64, half_width: f64 },
    CurveFile { path: PathBuf },
}

impl InitialSpec {
    fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("initial.{field}"), format!("must be positive, got {x}")))
            }
        };
        let dimension = |n: u32| if n >= 2 { Ok(()) } else { Err(invalid("initial.n", format!("must be at least 2, got {n}"))) };
        match *self {
            InitialSpec::LawlorNeck { b, theta_bar, n, radius, h } => {
                positive("b", b)?;
                dimension(n)?;
                positive("h", h)?;
                if !theta_bar.is_finite() {
                    return Err(invalid("initial.theta_bar", "must be finite"));
                }
                if !(radius > 2.0 * b) {
                    return Err(invalid("initial.radius", format!("must exceed 2B = {}", 2.0 * b)));
                }
            }
            InitialSpec::RadialLine { alpha, n, radius, h } => {
                dimension(n)?;
                positive("radius", radius)?;
                if !alpha.is_finite() {
                    return Err(invalid("initial.alpha", "must be finite"));
                }
                if !(h > 0.0 && h <= radius / 2.0) {
                    return Err(invalid("initial.h", "must lie in (0, radius/2]"));
                }
            }
            InitialSpec::Neves { beta, n, radius, h } => {
                dimension(n)?;
                positive("h", h)?;
                if !(beta > 0.0 && beta < PI) {
                    return Err(invalid("initial.beta", format!("must lie in (0, π), got {beta}")));
                }
                if !(radius > 1.5) {
                    return Err(invalid("initial.radius", "must exceed 1.5"));
                }
            }
            InitialSpec::BumpedLine { alpha, n, radius, h, amplitude, center, half_width } => {
                dimension(n)?;
                positive("radius", radius)?;
                positive("h", h)?;
                positive("half_width", half_width)?;
                if !alpha.is_finite() || !amplitude.is_finite() {
                    return Err(invalid("initial.amplitude", "alpha and amplitude must be finite"));
                }
                if !(center - half_width > 0.0 && center + half_width < radius) {
                    return Err(invalid("initial.center", "bump must lie strictly inside (0, radius)"));
                }
            }
            InitialSpec::CurveFile { ref path } => {
                if !path.is_file() {
                    return Err(invalid("initial.path", format!("{} does not exist", path.display())));
                }
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<ProfileCurve, String> {
        let curve = match *self {
            InitialSpec::LawlorNeck { b, theta_bar, n, radius, h } => {
                lawlor_profile(b, theta_bar, n, lawlor_margin_for_radius(b, n, radius), h)
            }
            InitialSpec::RadialLine { alpha, n, radius, h } => radial_line(alpha, n, radius, h),
            InitialSpec::Neves { beta, n, radius, h } => neves_profile(beta, n, neves_margin_for_radius(beta, radius), h),
            InitialSpec::BumpedLine { alpha, n, radius, h, amplitude, center, half_width } => {
                bumped_line(alpha, n, radius, h, amplitude, center, half_width)
            }
            InitialSpec::CurveFile { ref path } => {
                return lmcf_core::io::read_curve(path).map(|(c, _)| c).map_err(|e| e.to_string())
            }
        };
        curve.map_err(|e| e.to_string())
    }
}

/// A rescaling sequence to compute after the run. Empty `ks` selects the
/// deepest available Type II time (for Type II) or `k_max/64, k_max/16,
/// k_max/4, k_max` (intermediate).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RescaleRequest {
    #[serde(rename = "type-i")]
    TypeI { factors: Vec<f64>, tau: f64, window: Window },
    #[serde(rename = "type-ii")]
    TypeII {
        #[serde(default)]
        ks: Vec<u64>,
        tau: f64,
        window: Window,
    },
    /// Factors `√A_k` at the Type II selections.
    Intermediate {
        #[serde(default)]
        ks: Vec<u64>,
        tau: f64,
        window: Window,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Divergence factor for singularity classification.
    pub divergence_factor: f64,
    /// Scales for the Gaussian density probe; empty picks 16 log-spaced
    /// values below the square root of the probe time.
    #[serde(default)]
    pub density_r_grid: Vec<f64>,
    #[serde(default)]
    pub rescalings: Vec<RescaleRequest>,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            divergence_factor: 10.0,
            density_r_grid: Vec::new(),
            rescalings: vec![
                RescaleRequest::TypeI {
                    factors: (0..=6).map(|i| 2f64.powi(i)).collect(),
                    tau: -1.0,
                    window: Window::Annulus { inner: 0.25, outer: 2.0 },
                },
                RescaleRequest::TypeII { ks: Vec::new(), tau: 0.0, window: Window::Ball { radius: 3.0 } },
            ],
        }
    }
}

impl Diagnostics {
    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.divergence_factor > 1.0 && self.divergence_factor.is_finite()) {
            return Err(invalid("diagnostics.divergence_factor", "must be finite and greater than 1"));
        }
        if !increasing(&self.density_r_grid) {
            return Err(invalid("diagnostics.density_r_grid", "must be positive and strictly increasing"));
        }
        for (i, r) in self.rescalings.iter().enumerate() {
            let field = |f: &str| format!("diagnostics.rescalings[{i}].{f}");
            let (tau, window) = match r {
                RescaleRequest::TypeI { factors, tau, window } => {
                    if factors.is_empty() || !increasing(factors) {
                        return Err(invalid(field("factors"), "must be non-empty, positive and strictly increasing"));
                    }
                    (*tau, window)
                }
                RescaleRequest::TypeII { ks, tau, window } | RescaleRequest::Intermediate { ks, tau, window } => {
                    if ks.iter().any(|&k| k == 0) || ks.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(invalid(field("ks"), "must be positive and strictly increasing"));
                    }
                    (*tau, window)
                }
            };
            if !tau.is_finite() {
                return Err(invalid(field("tau"), "must be finite"));
            }
            match *window {
                Window::Annulus { inner, outer } if !(inner >= 0.0 && outer > inner) => {
                    return Err(invalid(field("window"), "annulus needs 0 <= inner < outer"));
                }
                Window::Ball { radius } if !(radius > 0.0) => {
                    return Err(invalid(field("window"), "ball radius must be positive"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn increasing(v: &[f64]) -> bool {
    v.iter().all(|&x| x > 0.0 && x.is_finite()) && v.windows(2).all(|w| w[1] > w[0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    /// Run directory. Relative paths are resolved by the caller (the binary
    /// uses `LMCF_OUTPUT_ROOT` when set).
    pub dir: PathBuf,
    #[serde(default)]
    pub plots: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub initial: InitialSpec,
    pub solver: SolverParams,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(initial: InitialSpec, solver: SolverParams, dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            version: SCHEMA_VERSION,
            initial,
            solver,
            diagnostics: Diagnostics::default(),
            output: OutputSpec { dir: dir.into(), plots: false },
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != SCHEMA_VERSION {
            return Err(invalid("version", format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.version)));
        }
        self.initial.validate()?;
        self.solver.validate().map_err(|e| match e {
            lmcf_core::SolverError::InvalidParams { field, reason } => invalid(format!("solver.{field}"), reason),
            other => invalid("solver", other.to_string()),
        })?;
        self.diagnostics.validate()?;
        if self.output.dir.as_os_str().is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| invalid(json_field(&e), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 of everything that determines the results: the config with
    /// the output section left out.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output");
        }
        hex(&Sha256::digest(v.to_string().as_bytes()))
    }
}

/// Best-effort name of the field a serde error refers to.
fn json_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    for marker in ["missing field `", "unknown field `", "unknown variant `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    format!("line {} column {}", e.line(), e.column())
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
