use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mc::simulate;
use super::CoverageError;

/// Fritsch–Carlson monotone cubic Hermite interpolant.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl MonotoneCubic {
    /// Interpolant through `(x[i], y[i])` with strictly increasing `x`.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<MonotoneCubic, CoverageError> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(CoverageError::Table(format!("need at least two knots, got {n}")));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || y.iter().any(|v| !v.is_finite()) {
            return Err(CoverageError::Table("knots must be finite and strictly increasing".into()));
        }
        let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut m = vec![0.0; n];
        m[0] = d[0];
        m[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            m[i] = if d[i - 1] * d[i] <= 0.0 { 0.0 } else { 0.5 * (d[i - 1] + d[i]) };
        }
        for i in 0..n - 1 {
            if d[i] == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
                continue;
            }
            let a = m[i] / d[i];
            let b = m[i + 1] / d[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let t = 3.0 / s.sqrt();
                m[i] = t * a * d[i];
                m[i + 1] = t * b * d[i];
            }
        }
        Ok(MonotoneCubic { x, y, m })
    }

    /// Knot abscissae.
    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    /// Value at `t`, `None` outside the knot range.
    pub fn eval(&self, t: f64) -> Option<f64> {
        let n = self.x.len();
        if !(t >= self.x[0] && t <= self.x[n - 1]) {
            return None;
        }
        let k = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Some(h00 * self.y[k] + h10 * h * self.m[k] + h01 * self.y[k + 1] + h11 * h * self.m[k + 1])
    }
}

/// One knot of a coverage table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// Segment length.
    pub ell: f64,
    /// User intensity.
    pub lambda: f64,
    /// Range scale.
    pub r: f64,
    /// Estimated coverage probability.
    pub p: f64,
    /// Its standard error.
    pub stderr: f64,
    /// Samples per knot.
    pub n_samples: u64,
    /// Master seed.
    pub seed: u64,
    /// Estimated `∂_λ p`, when tabulated.
    #[serde(default)]
    pub dp_dlambda: Option<f64>,
    /// Its standard error.
    #[serde(default)]
    pub dp_dlambda_stderr: Option<f64>,
}

/// Parameters of one table in a family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    /// User intensity.
    pub lambda: f64,
    /// Range scale.
    pub r: f64,
    /// Also tabulate `∂_λ p`.
    pub with_dlambda: bool,
}

/// Coverage probabilities on a geometric length grid, interpolated in `log ℓ`.
#[derive(Clone, Debug)]
pub struct CoverageTable {
    rows: Vec<TableRow>,
    p: MonotoneCubic,
    dp: Option<MonotoneCubic>,
}

/// Knots per decade of length.
pub const KNOTS_PER_DECADE: usize = 64;

impl CoverageTable {
    /// Tabulates `p(ℓ, λ, r)` for `ℓ` in `[ell_min, ell_max]`.
    ///
    /// Every knot uses the same seed and master intensity `lambda_max ≥ λ`,
    /// so tables built for different `(λ, r)` share their draws.
    pub fn build(
        lambda: f64,
        r: f64,
        lambda_max: f64,
        ell_range: (f64, f64),
        n_samples: u64,
        seed: u64,
        with_dlambda: bool,
    ) -> Result<CoverageTable, CoverageError> {
        let spec = TableSpec { lambda, r, with_dlambda };
        Ok(CoverageTable::build_family(&[spec], lambda_max, ell_range, n_samples, seed)?.remove(0))
    }

    /// Tables for several `(λ, r)` from a single pass of common draws.
    pub fn build_family(
        specs: &[TableSpec],
        lambda_max: f64,
        ell_range: (f64, f64),
        n_samples: u64,
        seed: u64,
    ) -> Result<Vec<CoverageTable>, CoverageError> {
        let (lo, hi) = ell_range;
        let bad = specs
            .iter()
            .any(|s| !(s.r > 0.0 && s.r.is_finite() && s.lambda >= 0.0 && lambda_max >= s.lambda));
        if !(lo > 0.0 && hi > lo) || bad || specs.is_empty() {
            return Err(CoverageError::DomainError {
                what: format!("table range [{lo}, {hi}], lambda_max={lambda_max}, specs={specs:?}"),
            });
        }
        let decades = (hi / lo).log10();
        let count = ((decades * KNOTS_PER_DECADE as f64).ceil() as usize).max(1);
        let mut rows: Vec<Vec<TableRow>> = vec![Vec::with_capacity(count + 1); specs.len()];
        for i in 0..=count {
            let ell = lo * 10f64.powf(decades * i as f64 / count as f64);
            let est = simulate(ell, lambda_max, n_samples, seed, 2 * specs.len(), |s, out| {
                for (k, sp) in specs.iter().enumerate() {
                    let c = s.covered(sp.lambda, sp.r);
                    out[2 * k] = if c { 1.0 } else { 0.0 };
                    if sp.with_dlambda && !c && s.covered_with_extra(sp.lambda, sp.r) {
                        out[2 * k + 1] = ell;
                    }
                }
            });
            for (k, sp) in specs.iter().enumerate() {
                let (p, d) = (est[2 * k], est[2 * k + 1]);
                rows[k].push(TableRow {
                    ell,
                    lambda: sp.lambda,
                    r: sp.r,
                    p: p.value,
                    stderr: p.stderr,
                    n_samples,
                    seed,
                    dp_dlambda: sp.with_dlambda.then_some(d.value),
                    dp_dlambda_stderr: sp.with_dlambda.then_some(d.stderr),
                });
            }
        }
        rows.into_iter().map(CoverageTable::from_rows).collect()
    }

    /// Table from knot rows sorted by length.
    pub fn from_rows(rows: Vec<TableRow>) -> Result<CoverageTable, CoverageError> {
        let Some(first) = rows.first() else {
            return Err(CoverageError::Table("empty table".into()));
        };
        if rows.iter().any(|r| r.lambda != first.lambda || r.r != first.r || !(r.ell > 0.0)) {
            return Err(CoverageError::Table("rows must share lambda and r and have positive lengths".into()));
        }
        let x: Vec<f64> = rows.iter().map(|r| r.ell.ln()).collect();
        let p = MonotoneCubic::new(x.clone(), rows.iter().map(|r| r.p).collect())?;
        let dp = if rows.iter().all(|r| r.dp_dlambda.is_some()) {
            Some(MonotoneCubic::new(x, rows.iter().map(|r| r.dp_dlambda.unwrap_or(0.0)).collect())?)
        } else {
            None
        };
        Ok(CoverageTable { rows, p, dp })
    }

    /// Knot rows.
    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    /// Interpolated `p(ℓ)`, `None` outside the tabulated range.
    pub fn lookup(&self, ell: f64) -> Option<f64> {
        self.p.eval(ell.ln()).map(|v| v.clamp(0.0, 1.0))
    }

    /// Interpolated `∂_λ p(ℓ)`, when tabulated and in range.
    pub fn dlambda(&self, ell: f64) -> Option<f64> {
        self.dp.as_ref()?.eval(ell.ln()).map(|v| v.max(0.0))
    }

    /// Writes the table as CSV.
    pub fn write_csv(&self, path: &Path) -> Result<(), CoverageError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| CoverageError::Table(e.to_string()))?;
        for row in &self.rows {
            w.serialize(row).map_err(|e| CoverageError::Table(e.to_string()))?;
        }
        w.flush().map_err(|e| CoverageError::Table(e.to_string()))
    }

    /// Reads a table written by [`CoverageTable::write_csv`].
    pub fn read_csv(path: &Path) -> Result<CoverageTable, CoverageError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| CoverageError::Table(e.to_string()))?;
        let rows = r
            .deserialize()
            .collect::<Result<Vec<TableRow>, _>>()
            .map_err(|e| CoverageError::Table(e.to_string()))?;
        CoverageTable::from_rows(rows)
    }
}
