//! Experiment drivers behind the command-line interface: crossing sweeps,
//! threshold bisection, n-good and stabilization frequencies, derivative
//! comparisons, uniqueness diagnostics and the property suites.
//!
//! Every driver takes a [`RunConfig`] and returns plain rows. Replicate `i`
//! draws everything from a seed derived from `(master seed, i)`, and rows are
//! pooled in replicate order, so output does not depend on the thread count.

mod commands;
mod fuzz;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage1d::CoverageError;
use crate::delaunay::DelaunayError;
use crate::model::{ModelError, Range};
use crate::percolation::{Axis, PercolationError};

pub use commands::{
    cmd_coverage1d, cmd_crossing, cmd_lambda_c, cmd_ngood, cmd_pc_bisect, cmd_russo, cmd_stab, cmd_sweep,
    cmd_unique, scene, BisectReport, BisectRow, BisectStatus, CoverageRow, RussoRow, Scene, SweepResult, SweepRow,
    UniqueRow,
};
pub use fuzz::{brute_delaunay_edges, cmd_fuzz, FuzzReport, FuzzRow, Mutant};

/// Version of the JSON mirror layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Errors of the experiment layer.
#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Invalid or incomplete configuration.
    #[error("config error: {0}")]
    Config(String),
    /// The window is too small for the requested event.
    #[error(transparent)]
    Window(#[from] PercolationError),
    /// Model construction failed.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// Coverage computation failed.
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    /// Triangulation failed.
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
    /// Reading or writing files failed.
    #[error("i/o error: {0}")]
    Io(String),
}

impl ExperimentError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Window(_) => 2,
            _ => 1,
        }
    }
}

fn default_reps() -> u64 {
    200
}
fn default_window() -> f64 {
    30.0
}
fn default_p() -> f64 {
    0.5
}
fn default_n() -> f64 {
    6.0
}
fn default_lambda_max() -> f64 {
    16.0
}
fn default_h() -> f64 {
    0.05
}
fn default_table_samples() -> u64 {
    50_000
}
fn default_samples() -> u64 {
    100_000
}
fn default_cases() -> u64 {
    1000
}
fn default_ell_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}
fn default_ell_range() -> (f64, f64) {
    (1e-6, 20.0)
}

/// Parameters of a run. Empty grids fall back to the scalar value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; required.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Replicates per estimate.
    #[serde(default = "default_reps")]
    pub reps: u64,
    /// Side of the analysis window.
    #[serde(default = "default_window")]
    pub window: f64,
    /// Simulation margin around the analysis window; `max(10, window/5)`
    /// when absent.
    #[serde(default)]
    pub margin: Option<f64>,
    /// Worker threads.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Output path.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Site probability.
    #[serde(default = "default_p")]
    pub p: f64,
    /// User intensity.
    #[serde(default)]
    pub lambda: f64,
    /// User range scale.
    #[serde(default = "Range::infinite")]
    pub r: Range,
    /// Crossroad range scale; `2r` when absent.
    #[serde(default)]
    pub r_prime: Option<Range>,
    /// Crossing direction.
    #[serde(default = "Axis::horizontal")]
    pub axis: Axis,
    /// Grid over `p`.
    #[serde(default)]
    pub p_grid: Vec<f64>,
    /// Grid over `λ`.
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
    /// Grid over `r`.
    #[serde(default)]
    pub r_grid: Vec<Range>,
    /// Scale `n` of n-good sites and arm events.
    #[serde(default = "default_n")]
    pub n: f64,
    /// Grid over `n`.
    #[serde(default)]
    pub n_grid: Vec<f64>,
    /// Upper end of the `λ` bisection bracket.
    #[serde(default = "default_lambda_max")]
    pub lambda_max: f64,
    /// Bisection tolerance; 0.02 in `p` and 0.1 in `λ` when absent.
    #[serde(default)]
    pub tol: Option<f64>,
    /// Finite-difference step in `λ` and `r`.
    #[serde(default = "default_h")]
    pub h: f64,
    /// Samples per knot of coverage tables.
    #[serde(default = "default_table_samples")]
    pub table_samples: u64,
    /// Length range of coverage tables.
    #[serde(default = "default_ell_range")]
    pub table_range: (f64, f64),
    /// Segment lengths for the one-dimensional command.
    #[serde(default = "default_ell_grid")]
    pub ell_grid: Vec<f64>,
    /// Monte Carlo samples per one-dimensional estimate.
    #[serde(default = "default_samples")]
    pub samples: u64,
    /// Cases per property suite.
    #[serde(default = "default_cases")]
    pub cases: u64,
    /// Deliberately broken predicate for the suite self-test.
    #[serde(default)]
    pub mutant: Option<Mutant>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl RunConfig {
    /// Reads a JSON config file.
    pub fn from_path(path: &Path) -> Result<RunConfig, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))
    }

    /// The master seed, or a config error when missing.
    pub fn master_seed(&self) -> Result<u64, ExperimentError> {
        self.seed.ok_or_else(|| ExperimentError::Config("a master seed is required (--seed or \"seed\")".into()))
    }

    /// Effective margin.
    pub fn margin_value(&self) -> f64 {
        self.margin.unwrap_or_else(|| (self.window / 5.0).max(10.0))
    }

    /// Grid over `p`, or `[p]`.
    pub fn ps(&self) -> Vec<f64> {
        sorted_or(&self.p_grid, self.p)
    }

    /// Grid over `λ`, or `[λ]`.
    pub fn lambdas(&self) -> Vec<f64> {
        sorted_or(&self.lambda_grid, self.lambda)
    }

    /// Grid over `r`, or `[r]`.
    pub fn rs(&self) -> Vec<Range> {
        let mut v = if self.r_grid.is_empty() { vec![self.r] } else { self.r_grid.clone() };
        v.sort_by(|a, b| a.partial_cmp(b).expect("ranges are ordered"));
        v.dedup();
        v
    }

    /// Grid over `n`, or `[n]`.
    pub fn ns(&self) -> Vec<f64> {
        sorted_or(&self.n_grid, self.n)
    }

    /// Checks ranges of the shared fields.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.master_seed()?;
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if !(self.window > 0.0 && self.window.is_finite()) {
            return bad("window must be positive");
        }
        if !(self.margin_value() >= 0.0) {
            return bad("margin must be nonnegative");
        }
        if self.reps == 0 {
            return bad("reps must be positive");
        }
        if self.ps().iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("p must lie in [0, 1]");
        }
        if self.lambdas().iter().any(|l| !(*l >= 0.0 && l.is_finite())) || !(self.lambda_max > 0.0) {
            return bad("intensities must be finite and nonnegative");
        }
        if self.rs().iter().any(|r| !(r.value() > 0.0)) {
            return bad("ranges must be positive");
        }
        if self.ns().iter().any(|n| !(*n > 0.0)) {
            return bad("n must be positive");
        }
        if !(self.h > 0.0) {
            return bad("h must be positive");
        }
        if self.threads == Some(0) {
            return bad("threads must be positive");
        }
        Ok(())
    }
}

fn sorted_or(grid: &[f64], v: f64) -> Vec<f64> {
    let mut g = if grid.is_empty() { vec![v] } else { grid.to_vec() };
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

#[derive(Serialize)]
struct JsonMirror<'a, R: Serialize> {
    schema_version: u32,
    config_echo: &'a RunConfig,
    rows: &'a [R],
}

/// Rows as CSV text with a header row.
pub fn to_csv<R: Serialize>(rows: &[R]) -> Result<String, ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| ExperimentError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| ExperimentError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ExperimentError::Io(e.to_string()))
}

/// Writes `rows` as CSV to `out` and the JSON mirror next to it, or returns
/// the CSV text when `out` is absent.
pub fn emit<R: Serialize>(rows: &[R], cfg: &RunConfig, out: Option<&Path>) -> Result<Option<String>, ExperimentError> {
    let text = to_csv(rows)?;
    let Some(path) = out else {
        return Ok(Some(text));
    };
    let io = |e: std::io::Error| ExperimentError::Io(format!("{}: {e}", path.display()));
    std::fs::write(path, &text).map_err(io)?;
    let mirror = JsonMirror { schema_version: SCHEMA_VERSION, config_echo: cfg, rows };
    let json = serde_json::to_string_pretty(&mirror).map_err(|e| ExperimentError::Io(e.to_string()))?;
    std::fs::write(path.with_extension("json"), json).map_err(io)?;
    Ok(None)
}
