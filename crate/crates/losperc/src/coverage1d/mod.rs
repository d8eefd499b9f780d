//! One-dimensional Boolean coverage of a segment `[0, ℓ]`.
//!
//! Internal points are uniform on the segment with ranges `(r/2)·Exp(1)`;
//! the two endpoints carry ranges `r·Exp(1)`. The module provides closed
//! forms for blank-zone and filling probabilities, the comparison functions
//! `G_b`, `H_b`, `K_b`, quadrature of the derivative integrals, Monte Carlo
//! estimators and a cached, interpolated coverage table.

mod ghk;
mod mc;
pub mod quad;
mod table;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ghk::{
    c_sup, c_sup_on_grid, check_chain, dr_hole_series, ghk, ghk_alternate, quad_r, ChainLink, ChainReport,
    Kind,
};
pub use mc::{
    fd_dlambda, fd_dr, mc_cover, mc_cover_grid, mc_dlambda, mc_hole_fill, mc_phi, mc_phi_boundary, mc_psi,
    simulate, CoverageSample,
};
pub use table::{CoverageTable, MonotoneCubic, TableRow, TableSpec, KNOTS_PER_DECADE};

/// Errors of the coverage engine.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum CoverageError {
    /// Arguments outside `0 ≤ x ≤ y ≤ ℓ` or non-positive `ℓ`, `r`.
    #[error("invalid arguments: {what}")]
    DomainError {
        /// Description of the violated condition.
        what: String,
    },
    /// Adaptive quadrature did not converge.
    #[error("quadrature failed on [{a}, {b}]")]
    QuadratureFailure {
        /// Lower limit.
        a: f64,
        /// Upper limit.
        b: f64,
    },
    /// Malformed coverage table.
    #[error("coverage table error: {0}")]
    Table(String),
}

/// Segment length, user intensity and range scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageParams {
    /// Segment length.
    pub ell: f64,
    /// Intensity of internal points per unit length.
    pub lambda: f64,
    /// Range scale.
    pub r: f64,
}

impl CoverageParams {
    /// Validated parameters.
    pub fn new(ell: f64, lambda: f64, r: f64) -> Result<CoverageParams, CoverageError> {
        if !(ell > 0.0 && ell.is_finite()) || !(r > 0.0 && r.is_finite()) || !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(CoverageError::DomainError { what: format!("ell={ell}, lambda={lambda}, r={r}") });
        }
        Ok(CoverageParams { ell, lambda, r })
    }
}

fn check_xy(x: f64, y: f64, ell: f64, r: f64) -> Result<(), CoverageError> {
    if !(ell > 0.0 && r > 0.0 && 0.0 <= x && x <= y && y <= ell) {
        return Err(CoverageError::DomainError { what: format!("need 0 <= x <= y <= ell, got x={x}, y={y}, ell={ell}, r={r}") });
    }
    Ok(())
}

/// `s - 1 + e^{-s}` without cancellation.
pub(crate) fn s_minus_one_plus_exp(s: f64) -> f64 {
    if s < 0.1 {
        // Alternating series s^2/2 - s^3/6 + ...
        let mut term = s * s / 2.0;
        let mut acc = 0.0f64;
        let mut k = 2.0;
        while term.abs() > 1e-18 * acc.abs().max(f64::MIN_POSITIVE) && k < 40.0 {
            acc += term;
            k += 1.0;
            term *= -s / k;
        }
        acc
    } else {
        s - 1.0 + (-s).exp()
    }
}

/// `t - (r/2)(1 - e^{-2t/r})`, the mean length of `[0, t]` left uncovered by
/// a single interior interval reaching from outside.
fn gap(t: f64, r: f64) -> f64 {
    0.5 * r * s_minus_one_plus_exp(2.0 * t / r)
}

/// `(r/2)(1 - e^{-2t/r})`, the complement of [`gap`] in `[0, t]`.
fn reach(t: f64, r: f64) -> f64 {
    -0.5 * r * (-2.0 * t / r).exp_m1()
}

/// `num / ell`, or `1 - den / ell` when that is the better-conditioned form.
fn ratio_or_complement(num: f64, den: f64, ell: f64) -> f64 {
    if num <= den {
        num / ell
    } else {
        1.0 - den / ell
    }
}

/// Probability that a uniform interior interval misses `[x, y]`.
pub fn phi(x: f64, y: f64, ell: f64, r: f64) -> Result<f64, CoverageError> {
    check_xy(x, y, ell, r)?;
    let missed = gap(x, r) + gap(ell - y, r);
    let hit = (y - x) + reach(x, r) + reach(ell - y, r);
    Ok(ratio_or_complement(missed, hit, ell).clamp(0.0, 1.0))
}

/// Side of a boundary point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundarySide {
    /// The endpoint `0`.
    Left,
    /// The endpoint `ℓ`.
    Right,
}

/// Probability that a boundary interval misses `[x, y]`.
pub fn phi_boundary(side: BoundarySide, x: f64, y: f64, ell: f64, r: f64) -> Result<f64, CoverageError> {
    check_xy(x, y, ell, r)?;
    Ok(match side {
        BoundarySide::Left => -(-x / r).exp_m1(),
        BoundarySide::Right => -(-(ell - y) / r).exp_m1(),
    })
}

/// Probability that a uniform interior interval contains `[x, y]`.
pub fn psi(x: f64, y: f64, ell: f64, r: f64) -> Result<f64, CoverageError> {
    check_xy(x, y, ell, r)?;
    let d = (y - x) / r;
    let base = (-d).exp();
    let left = base * -(-(2.0 * (ell - x) / r - d)).exp_m1();
    let right = base * -(-(2.0 * y / r - d)).exp_m1();
    Ok((r / (2.0 * ell) * (left + right)).clamp(0.0, 1.0))
}

/// `W_{ℓ,r} = 1 - (r / 2ℓ)(1 - e^{-2ℓ/r})`.
pub fn w(ell: f64, r: f64) -> f64 {
    ratio_or_complement(gap(ell, r), reach(ell, r), ell)
}

/// Coverage probability of `[0, ℓ]` with no interior points.
pub fn cover_prob_lambda0(ell: f64, r: f64) -> f64 {
    let a = ell / r;
    (-a).exp() * (1.0 + a)
}

/// `∂_r` of [`cover_prob_lambda0`].
pub fn cover_prob_lambda0_dr(ell: f64, r: f64) -> f64 {
    ell * ell / (r * r * r) * (-ell / r).exp()
}
