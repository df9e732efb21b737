//! Curve files: `s,x,y` CSV plus a JSON sidecar holding the metadata.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces every coordinate bit for bit.

use crate::curve::{CurveError, Orientation, ProfileCurve, Symmetry};
use crate::geometry::Point;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Curve { path: PathBuf, source: CurveError },
}

/// Sidecar metadata of a curve file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveManifest {
    pub n: u32,
    pub symmetry: Symmetry,
    pub orientation: Orientation,
    pub nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<serde_json::Value>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// CSV body of a curve: header plus one `s,x,y` row per node.
pub fn curve_csv(curve: &ProfileCurve) -> String {
    let mut out = String::from("s,x,y\n");
    for (s, z) in curve.arc_lengths().iter().zip(curve.nodes()) {
        let _ = writeln!(out, "{:?},{:?},{:?}", s, z.re, z.im);
    }
    out
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs { path: path.to_path_buf(), source }
}

/// Writes `path` (CSV) and its sidecar manifest.
pub fn write_curve(
    path: &Path,
    curve: &ProfileCurve,
    time: Option<f64>,
    model: Option<serde_json::Value>,
) -> Result<(), IoError> {
    fs::write(path, curve_csv(curve)).map_err(fs_err(path))?;
    let manifest = CurveManifest {
        n: curve.n(),
        symmetry: curve.symmetry(),
        orientation: curve.orientation(),
        nodes: curve.len(),
        time,
        model,
    };
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|source| IoError::Json { path: side.clone(), source })?;
    fs::write(&side, json + "\n").map_err(fs_err(&side))
}

pub fn parse_curve_csv(path: &Path, text: &str) -> Result<Vec<Point>, IoError> {
    let parse_err = |line: usize, message: String| IoError::Parse { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "s,x,y" => {}
        _ => return Err(parse_err(1, "expected header `s,x,y`".into())),
    }
    let mut nodes = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(i + 1, format!("expected 3 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 3];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.trim().parse().map_err(|e| parse_err(i + 1, format!("{f:?}: {e}")))?;
        }
        nodes.push(Point::new(v[1], v[2]));
    }
    Ok(nodes)
}

/// Reads a curve and its manifest, re-validating the curve invariants.
pub fn read_curve(path: &Path) -> Result<(ProfileCurve, CurveManifest), IoError> {
    let text = fs::read_to_string(path).map_err(fs_err(path))?;
    let nodes = parse_curve_csv(path, &text)?;
    let side = sidecar_path(path);
    let json = fs::read_to_string(&side).map_err(fs_err(&side))?;
    let manifest: CurveManifest =
        serde_json::from_str(&json).map_err(|source| IoError::Json { path: side.clone(), source })?;
    if manifest.nodes != nodes.len() {
        return Err(IoError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("manifest lists {} nodes, file has {}", manifest.nodes, nodes.len()),
        });
    }
    let curve = ProfileCurve::new(nodes, manifest.n, manifest.symmetry, manifest.orientation)
        .map_err(|source| IoError::Curve { path: path.to_path_buf(), source })?;
    Ok((curve, manifest))
}
