use serde::Serialize;

use super::quad::integrate;
use super::{mc_hole_fill, phi, w, CoverageError, CoverageParams};
use crate::estimate::EstimateRecord;

const TOL: f64 = 1e-10;

/// Which of the three comparison functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Kind {
    /// Upper bound on the filling term.
    G,
    /// Lower bound on the stretching term.
    H,
    /// Upper bound on the stretching term.
    K,
}

fn check(ell: f64, r: f64) -> Result<(), CoverageError> {
    if !(ell > 0.0 && r > 0.0 && ell.is_finite() && r.is_finite()) {
        return Err(CoverageError::DomainError { what: format!("ell={ell}, r={r}") });
    }
    Ok(())
}

/// `(r/2)(1 - e^{-2a/r})`.
fn m0(a: f64, r: f64) -> f64 {
    0.5 * r * -(-2.0 * a / r).exp_m1()
}

/// `(r/2)^2 (1 - e^{-2a/r}(1 + 2a/r))`.
fn m1(a: f64, r: f64) -> f64 {
    let x = 2.0 * a / r;
    let core = if x < 0.5 {
        // Σ_{k≥2} (-1)^k (k-1) x^k / k!
        let mut term = x * x / 2.0;
        let mut acc = 0.0;
        let mut k = 2.0f64;
        while k < 40.0 {
            acc += term * (k - 1.0);
            let next = -term * x / (k + 1.0);
            if next.abs() * k < 1e-18 * acc.abs() {
                break;
            }
            term = next;
            k += 1.0;
        }
        acc
    } else {
        1.0 - (-x).exp() * (1.0 + x)
    };
    0.25 * r * r * core
}

/// `(1 - e^{-u/r})(1 - e^{-(ℓ-u)/r})`.
fn both_sides(u: f64, ell: f64, r: f64) -> f64 {
    (-u / r).exp_m1() * (-(ell - u) / r).exp_m1()
}

/// `M1(u) M0(ℓ-u) + M0(u) M1(ℓ-u)`.
fn j_inner(u: f64, ell: f64, r: f64) -> f64 {
    m1(u, r) * m0(ell - u, r) + m0(u, r) * m1(ell - u, r)
}

/// `u M0(ℓ-u) + M1(ℓ-u)`.
fn mixed_inner(u: f64, ell: f64, r: f64) -> f64 {
    u * m0(ell - u, r) + m1(ell - u, r)
}

/// `Σ_{k≥2} a^{2k}(4k-4)/(2k)!`, equal to `4 - 4 cosh a + 2a sinh a`.
fn g0_bracket_series(a: f64) -> f64 {
    let a2 = a * a;
    let mut term = a2 * a2 / 24.0;
    let mut acc = 0.0;
    let mut k = 2.0f64;
    while k < 60.0 {
        let add = term * (4.0 * k - 4.0);
        acc += add;
        if add < 1e-18 * acc {
            break;
        }
        term *= a2 / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
        k += 1.0;
    }
    acc
}

/// `e^{-a}(sinh a - a)`.
fn g1_core(a: f64) -> f64 {
    if a < 1.0 {
        let a2 = a * a;
        let mut term = a2 * a / 6.0;
        let mut acc = 0.0;
        let mut k = 1.0f64;
        while k < 40.0 {
            acc += term;
            term *= a2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
            if term < 1e-18 * acc {
                break;
            }
            k += 1.0;
        }
        (-a).exp() * acc
    } else {
        -0.5 * (-2.0 * a).exp_m1() - a * (-a).exp()
    }
}

fn g_closed(b: u8, ell: f64, r: f64) -> f64 {
    let a = ell / r;
    let one_minus = -(-a).exp_m1();
    match b {
        2 => ell * ell / (2.0 * r) * (-a).exp(),
        1 => 2.0 * r * r / ell * one_minus * g1_core(a),
        _ => {
            // e^{-a} (4 - 4 cosh a + 2a sinh a)
            let core = if a < 2.0 {
                (-a).exp() * g0_bracket_series(a)
            } else {
                4.0 * (-a).exp() - 2.0 * (1.0 + (-2.0 * a).exp()) + a * -(-2.0 * a).exp_m1()
            };
            r * r * r / (ell * ell) * one_minus * one_minus * core
        }
    }
}

/// `G_b`, `H_b` or `K_b` at `(ℓ, r)`.
///
/// `G_b` and the `b = 2` functions are closed forms; the others are one-
/// dimensional integrals with nonnegative integrands.
pub fn ghk(b: u8, kind: Kind, ell: f64, r: f64) -> Result<f64, CoverageError> {
    check(ell, r)?;
    if b > 2 {
        return Err(CoverageError::DomainError { what: format!("b={b}") });
    }
    let a = ell / r;
    match (kind, b) {
        (Kind::G, _) => Ok(g_closed(b, ell, r)),
        (Kind::H | Kind::K, 2) => Ok(ell * ell / (r * r * r) * (-a).exp()),
        (Kind::H, 1) => {
            let v = integrate(|u| -(-(ell - u) / r).exp_m1() * (-u / r).exp() * mixed_inner(u, ell, r), 0.0, ell, TOL)?;
            Ok(2.0 / (r * r * r * ell) * v)
        }
        (Kind::K, 1) => {
            let v = integrate(|u| (-u / r).exp() * mixed_inner(u, ell, r), 0.0, ell, TOL)?;
            Ok(2.0 / (r * r * r * ell) * v)
        }
        (Kind::H, _) => {
            let v = integrate(|u| both_sides(u, ell, r) * j_inner(u, ell, r), 0.0, ell, TOL)?;
            Ok(4.0 / (r * r * r * ell * ell) * v)
        }
        (Kind::K, _) => {
            let v = integrate(|z| z * z * (ell - z) * (-2.0 * z / r).exp(), 0.0, ell, TOL)?;
            Ok(4.0 / (r * r * r * ell * ell) * v)
        }
    }
}

/// Independent second evaluation of `G_b`, `H_b`, `K_b`.
///
/// `G_0`, `G_1` are integrated from their two-dimensional definitions; `H_0`,
/// `H_1`, `K_0`, `K_1` use the reduced one-dimensional forms obtained by
/// integrating in a different order.
pub fn ghk_alternate(b: u8, kind: Kind, ell: f64, r: f64) -> Result<f64, CoverageError> {
    check(ell, r)?;
    let a = ell / r;
    let em = (-a).exp();
    let one_minus = -(-a).exp_m1();
    match (kind, b) {
        (Kind::G, 2) => {
            let v = integrate(|z| z / (r * r), 0.0, ell, TOL)?;
            Ok(r * em * v)
        }
        (Kind::G, 1) => {
            let v = integrate(
                |x| {
                    integrate(|y| (y / r).exp() * -(-2.0 * y / r).exp_m1(), 0.0, ell - x, TOL)
                        .unwrap_or(f64::NAN)
                },
                0.0,
                ell,
                TOL,
            )?;
            Ok(em * one_minus / ell * v)
        }
        (Kind::G, _) => {
            let v = integrate(
                |x| {
                    integrate(
                        |y| ((x + y) / r - a).exp() * (-2.0 * x / r).exp_m1() * (-2.0 * y / r).exp_m1(),
                        0.0,
                        ell - x,
                        TOL,
                    )
                    .unwrap_or(f64::NAN)
                },
                0.0,
                ell,
                TOL,
            )?;
            Ok(r / (ell * ell) * one_minus * one_minus * v)
        }
        (Kind::H | Kind::K, 2) => {
            let v = integrate(|u| (-u / r).exp() * (-(ell - u) / r).exp() / (r * r), 0.0, ell, TOL)?;
            Ok(ell / r * v)
        }
        (Kind::H, 1) => {
            let v = integrate(
                |z| {
                    let inner = integrate(|u| (u / r).exp() * -(-(ell - u) / r).exp_m1(), 0.0, z, TOL)
                        .unwrap_or(f64::NAN);
                    z * (-2.0 * z / r).exp() * inner
                },
                0.0,
                ell,
                TOL,
            )?;
            Ok(2.0 / (r * r * r * ell) * v)
        }
        (Kind::K, 1) => {
            let v = integrate(|z| z * ((-z / r).exp() - (-2.0 * z / r).exp()), 0.0, ell, TOL)?;
            Ok(2.0 / (r * r * ell) * v)
        }
        (Kind::H, _) => {
            let p1 = integrate(|z| z * z * (ell - z) * (-2.0 * z / r).exp(), 0.0, ell, TOL)?;
            let p2 = integrate(
                |z| z * (-2.0 * z / r).exp() * (-(ell - z) / r).exp_m1() * (-z / r).exp_m1(),
                0.0,
                ell,
                TOL,
            )?;
            Ok(4.0 * (1.0 + em) / (r * r * r * ell * ell) * p1 - 8.0 / (r * ell * ell) * p2)
        }
        (Kind::K, _) => {
            let v = integrate(|u| j_inner(u, ell, r), 0.0, ell, TOL)?;
            Ok(4.0 / (r * r * r * ell * ell) * v)
        }
    }
}

/// Exact limits of `G_b / H_b` at `ℓ → 0` and `ℓ → ∞`.
fn ratio_limits(b: u8, r: f64) -> [f64; 2] {
    let r2 = r * r;
    match b {
        2 => [0.5 * r2, 0.5 * r2],
        1 => [0.8 * r2, 2.0 / 3.0 * r2],
        _ => [2.5 * r2, r2],
    }
}

/// `sup_ℓ G_b / H_b` over a logarithmic grid on `[1e-4 r, 1e4 r]` with
/// `per_decade` points per decade, endpoint limits included.
pub fn c_sup_on_grid(r: f64, b: u8, per_decade: usize) -> f64 {
    if b == 2 {
        return 0.5 * r * r;
    }
    let n = 8 * per_decade;
    let mut best = ratio_limits(b, r).into_iter().fold(0.0f64, f64::max);
    for i in 0..=n {
        let ell = r * 10f64.powf(-4.0 + 8.0 * i as f64 / n as f64);
        let (Ok(g), Ok(h)) = (ghk(b, Kind::G, ell, r), ghk(b, Kind::H, ell, r)) else {
            continue;
        };
        if h > 0.0 {
            best = best.max(g / h);
        }
    }
    best
}

/// `sup_ℓ G_b / H_b` at the default grid density; `b = 3` returns the
/// maximum over `b ∈ {0, 1, 2}`.
pub fn c_sup(r: f64, b: u8) -> f64 {
    if b > 2 {
        return (0..3).map(|b| c_sup_on_grid(r, b, 64)).fold(0.0, f64::max);
    }
    c_sup_on_grid(r, b, 64)
}

/// The stretching integral `𝕽_b^{N,r}` by quadrature.
pub fn quad_r(b: u8, n: u32, ell: f64, r: f64) -> Result<f64, CoverageError> {
    check(ell, r)?;
    if b > 2 || (n as i64) < 2 - b as i64 {
        return Err(CoverageError::DomainError { what: format!("need b <= 2 and N >= 2 - b, got b={b}, N={n}") });
    }
    let e = n as i32 - 2 + b as i32;
    let pw = |u: f64| phi(u, u, ell, r).map(|v| v.powi(e)).unwrap_or(f64::NAN);
    match b {
        2 => {
            let v = integrate(pw, 0.0, ell, TOL)?;
            Ok(ell / (r * r * r) * (-ell / r).exp() * v)
        }
        1 => {
            let v = integrate(|u| -(-(ell - u) / r).exp_m1() * pw(u) * (-u / r).exp() * mixed_inner(u, ell, r), 0.0, ell, TOL)?;
            Ok(2.0 / (r * r * r * ell) * v)
        }
        _ => {
            let v = integrate(|u| both_sides(u, ell, r) * pw(u) * j_inner(u, ell, r), 0.0, ell, TOL)?;
            Ok(4.0 / (r * r * r * ell * ell) * v)
        }
    }
}

/// Sum over single holes of the stretching rates, averaged over the Poisson
/// number of interior points:
/// `E[𝕽_2 + 2N 𝕽_1 + N(N-1) 𝕽_0]`.
///
/// Exact at `λ = 0`; an upper bound on `∂_r p` otherwise, since configurations
/// with several holes are counted once per hole.
pub fn dr_hole_series(cp: &CoverageParams) -> Result<f64, CoverageError> {
    let CoverageParams { ell, lambda, r } = *cp;
    check(ell, r)?;
    let m = lambda * ell;
    let gen = |u: f64| phi(u, u, ell, r).map(|v| (m * (v - 1.0)).exp()).unwrap_or(f64::NAN);
    let t2 = ell / (r * r * r) * (-ell / r).exp() * integrate(gen, 0.0, ell, TOL)?;
    if m == 0.0 {
        return Ok(t2);
    }
    let t1 = 2.0 / (r * r * r * ell)
        * integrate(|u| -(-(ell - u) / r).exp_m1() * gen(u) * (-u / r).exp() * mixed_inner(u, ell, r), 0.0, ell, TOL)?;
    let t0 = 4.0 / (r * r * r * ell * ell)
        * integrate(|u| both_sides(u, ell, r) * gen(u) * j_inner(u, ell, r), 0.0, ell, TOL)?;
    Ok(t2 + 2.0 * m * t1 + m * m * t0)
}

/// One inequality of the comparison chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainLink {
    /// Short label.
    pub name: &'static str,
    /// Left-hand side.
    pub lhs: f64,
    /// Right-hand side.
    pub rhs: f64,
    /// Allowed slack added to the right-hand side.
    pub slack: f64,
    /// `lhs ≤ rhs + slack`.
    pub holds: bool,
}

/// All terms and links of the comparison chain at one `(b, N, ℓ, r)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainReport {
    /// Number of boundary points in the hole.
    pub b: u8,
    /// Number of interior points.
    pub n: u32,
    /// Segment length.
    pub ell: f64,
    /// Range scale.
    pub r: f64,
    /// Monte Carlo estimate of `ℓ 𝕷_b`.
    pub l_hat: EstimateRecord,
    /// `W_{ℓ,r}^{N-2+b} G_b`.
    pub g_term: f64,
    /// `W_{ℓ,2r}^{N-2+b} H_b`.
    pub h_term: f64,
    /// `𝕽_b^{N,r}`.
    pub r_quad: f64,
    /// `K_b`.
    pub k_value: f64,
    /// The four links, left to right.
    pub links: Vec<ChainLink>,
}

impl ChainReport {
    /// True when every link holds.
    pub fn all_hold(&self) -> bool {
        self.links.iter().all(|l| l.holds)
    }
}

fn link(name: &'static str, lhs: f64, rhs: f64, slack: f64) -> ChainLink {
    ChainLink { name, lhs, rhs, slack, holds: lhs <= rhs + slack }
}

/// Evaluates the comparison chain
/// `ℓ𝕷_b ≤ W_{ℓ,r}^{e} G_b ≤ W_{ℓ,2r}^{e} H_b ≤ 𝕽_b ≤ K_b`, `e = N - 2 + b`.
pub fn check_chain(b: u8, n: u32, ell: f64, r: f64, n_samples: u64, seed: u64) -> Result<ChainReport, CoverageError> {
    let r_quad = quad_r(b, n, ell, r)?;
    let e = n as i32 - 2 + b as i32;
    let g_term = w(ell, r).powi(e) * ghk(b, Kind::G, ell, r)?;
    let h_term = w(ell, 2.0 * r).powi(e) * ghk(b, Kind::H, ell, r)?;
    let k_value = ghk(b, Kind::K, ell, r)?;
    let l_hat = mc_hole_fill(b, n, ell, r, n_samples, seed)?;
    let rel = 1e-7;
    let links = vec![
        link("lL<=WG", l_hat.value, g_term, 3.0 * l_hat.stderr),
        link("WG<=WH", g_term, h_term, 1e-12 * h_term.abs()),
        link("WH<=R", h_term, r_quad, rel * r_quad.abs()),
        link("R<=K", r_quad, k_value, rel * k_value.abs()),
    ];
    Ok(ChainReport { b, n, ell, r, l_hat, g_term, h_term, r_quad, k_value, links })
}
