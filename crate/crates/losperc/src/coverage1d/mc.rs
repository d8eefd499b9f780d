use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;

use super::{check_xy, BoundarySide, CoverageError, CoverageParams};
use crate::estimate::{Accumulator, EstimateRecord};
use crate::rng::{derive_seed, seeded_rng, uniform, Stream};

const BATCH: u64 = 2048;

/// One draw of the segment model at a master intensity, reusable at any
/// `λ ≤ λ_max` and any range scale.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageSample {
    /// Segment length.
    pub ell: f64,
    /// Master intensity the sample was drawn at.
    pub lambda_max: f64,
    /// Internal offsets in `[0, ℓ]`.
    pub offsets: Vec<f64>,
    /// Unit exponential marks of the internal points.
    pub marks: Vec<f64>,
    /// Thinning uniforms of the internal points.
    pub thin: Vec<f64>,
    /// Unit exponential marks of the boundary points `0` and `ℓ`.
    pub boundary: [f64; 2],
    /// Offset and mark of one extra internal point.
    pub extra: (f64, f64),
}

impl CoverageSample {
    /// Draws a sample with `Poisson(λ_max ℓ)` internal points.
    pub fn draw<R: Rng + ?Sized>(ell: f64, lambda_max: f64, rng: &mut R) -> CoverageSample {
        let mean = lambda_max * ell;
        let n = if mean > 0.0 {
            Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0)
        } else {
            0
        };
        let mut offsets = Vec::with_capacity(n);
        let mut marks = Vec::with_capacity(n);
        let mut thin = Vec::with_capacity(n);
        for _ in 0..n {
            offsets.push(ell * uniform(rng));
            marks.push(Exp1.sample(rng));
            thin.push(uniform(rng));
        }
        let boundary = [Exp1.sample(rng), Exp1.sample(rng)];
        let extra = (ell * uniform(rng), Exp1.sample(rng));
        CoverageSample { ell, lambda_max, offsets, marks, thin, boundary, extra }
    }

    fn intervals(&self, lambda: f64, r: f64, with_extra: bool) -> Vec<(f64, f64)> {
        let cut = if self.lambda_max > 0.0 { lambda / self.lambda_max } else { 0.0 };
        let mut iv: Vec<(f64, f64)> = (0..self.offsets.len())
            .filter(|&k| self.thin[k] < cut)
            .map(|k| {
                let h = 0.5 * r * self.marks[k];
                (self.offsets[k] - h, self.offsets[k] + h)
            })
            .collect();
        if with_extra {
            let h = 0.5 * r * self.extra.1;
            iv.push((self.extra.0 - h, self.extra.0 + h));
        }
        iv.push((self.ell - r * self.boundary[1], f64::INFINITY));
        iv
    }

    fn sweep(&self, mut iv: Vec<(f64, f64)>, r: f64) -> bool {
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut reach = r * self.boundary[0];
        for (lo, hi) in iv {
            if reach >= self.ell {
                return true;
            }
            if lo > reach {
                return false;
            }
            reach = reach.max(hi);
        }
        reach >= self.ell
    }

    /// Whether `[0, ℓ]` is covered at intensity `λ ≤ λ_max` and scale `r`.
    pub fn covered(&self, lambda: f64, r: f64) -> bool {
        self.sweep(self.intervals(lambda, r, false), r)
    }

    /// Whether `[0, ℓ]` is covered once the extra point is added.
    pub fn covered_with_extra(&self, lambda: f64, r: f64) -> bool {
        self.sweep(self.intervals(lambda, r, true), r)
    }
}

/// Runs `n_samples` draws in seeded batches, with `f` writing `width` values
/// per draw; returns one estimate per value.
///
/// Batches are processed in parallel and pooled in index order, so the result
/// does not depend on scheduling.
pub fn simulate<F>(ell: f64, lambda_max: f64, n_samples: u64, seed: u64, width: usize, f: F) -> Vec<EstimateRecord>
where
    F: Fn(&CoverageSample, &mut [f64]) + Sync,
{
    let start = Instant::now();
    let batches = n_samples.div_ceil(BATCH);
    let parts: Vec<Vec<Accumulator>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = seeded_rng(derive_seed(seed, Stream::Coverage, b));
            let count = BATCH.min(n_samples - b * BATCH);
            let mut acc = vec![Accumulator::default(); width];
            let mut out = vec![0.0; width];
            for _ in 0..count {
                let s = CoverageSample::draw(ell, lambda_max, &mut rng);
                out.iter_mut().for_each(|v| *v = 0.0);
                f(&s, &mut out);
                for (a, &v) in acc.iter_mut().zip(&out) {
                    a.push(v);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Accumulator::default(); width];
    for p in &parts {
        for (t, a) in total.iter_mut().zip(p) {
            t.merge(a);
        }
    }
    let wall = start.elapsed().as_secs_f64();
    total.iter().map(|a| a.record(seed, wall)).collect()
}

fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Monte Carlo coverage probability `p(ℓ, λ, r)`.
pub fn mc_cover(cp: &CoverageParams, n_samples: u64, seed: u64) -> EstimateRecord {
    let (lambda, r) = (cp.lambda, cp.r);
    simulate(cp.ell, lambda, n_samples, seed, 1, |s, out| out[0] = indicator(s.covered(lambda, r)))[0]
}

/// Coverage estimates on a `λ × r` grid from common draws; `out[i][j]` is at
/// `(lambdas[i], rs[j])`.
pub fn mc_cover_grid(ell: f64, lambdas: &[f64], rs: &[f64], n_samples: u64, seed: u64) -> Vec<Vec<EstimateRecord>> {
    let lambda_max = lambdas.iter().copied().fold(0.0, f64::max);
    let nr = rs.len();
    let flat = simulate(ell, lambda_max, n_samples, seed, lambdas.len() * nr, |s, out| {
        for (i, &l) in lambdas.iter().enumerate() {
            for (j, &r) in rs.iter().enumerate() {
                out[i * nr + j] = indicator(s.covered(l, r));
            }
        }
    });
    flat.chunks(nr.max(1)).map(|c| c.to_vec()).collect()
}

/// Estimates `∂_λ p = ℓ P(uncovered, covered after one extra point)`.
pub fn mc_dlambda(cp: &CoverageParams, n_samples: u64, seed: u64) -> EstimateRecord {
    let CoverageParams { ell, lambda, r } = *cp;
    simulate(ell, lambda, n_samples, seed, 1, |s, out| {
        out[0] = ell * indicator(!s.covered(lambda, r) && s.covered_with_extra(lambda, r));
    })[0]
}

/// Central difference of coverage in `λ` with common draws; one-sided from
/// `λ` when `λ < h`.
pub fn fd_dlambda(cp: &CoverageParams, h: f64, n_samples: u64, seed: u64) -> Result<EstimateRecord, CoverageError> {
    let CoverageParams { ell, lambda, r } = *cp;
    if !(h > 0.0) {
        return Err(CoverageError::DomainError { what: format!("step h={h}") });
    }
    let (lo, hi) = if lambda >= h { (lambda - h, lambda + h) } else { (lambda, lambda + h) };
    let span = hi - lo;
    Ok(simulate(ell, hi, n_samples, seed, 1, |s, out| {
        out[0] = (indicator(s.covered(hi, r)) - indicator(s.covered(lo, r))) / span;
    })[0])
}

/// Central difference of coverage in `r` with common draws.
pub fn fd_dr(cp: &CoverageParams, h: f64, n_samples: u64, seed: u64) -> Result<EstimateRecord, CoverageError> {
    let CoverageParams { ell, lambda, r } = *cp;
    if !(h > 0.0 && h < 0.5 * r) {
        return Err(CoverageError::DomainError { what: format!("need 0 < h < r/2, got h={h}, r={r}") });
    }
    Ok(simulate(ell, lambda, n_samples, seed, 1, |s, out| {
        out[0] = (indicator(s.covered(lambda, r + h)) - indicator(s.covered(lambda, r - h))) / (2.0 * h);
    })[0])
}

fn single_point<F>(n_samples: u64, seed: u64, f: F) -> EstimateRecord
where
    F: Fn(f64, f64) -> bool + Sync,
{
    let start = Instant::now();
    let batches = n_samples.div_ceil(BATCH);
    let parts: Vec<Accumulator> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = seeded_rng(derive_seed(seed, Stream::Coverage, b));
            let mut acc = Accumulator::default();
            for _ in 0..BATCH.min(n_samples - b * BATCH) {
                let u = uniform(&mut rng);
                let e: f64 = Exp1.sample(&mut rng);
                acc.push(indicator(f(u, e)));
            }
            acc
        })
        .collect();
    let mut total = Accumulator::default();
    parts.iter().for_each(|a| total.merge(a));
    total.record(seed, start.elapsed().as_secs_f64())
}

/// Frequency with which a uniform internal interval misses `[x, y]`.
pub fn mc_phi(x: f64, y: f64, ell: f64, r: f64, n_samples: u64, seed: u64) -> Result<EstimateRecord, CoverageError> {
    check_xy(x, y, ell, r)?;
    Ok(single_point(n_samples, seed, |u, e| {
        let (c, h) = (ell * u, 0.5 * r * e);
        c + h < x || c - h > y
    }))
}

/// Frequency with which a uniform internal interval contains `[x, y]`.
pub fn mc_psi(x: f64, y: f64, ell: f64, r: f64, n_samples: u64, seed: u64) -> Result<EstimateRecord, CoverageError> {
    check_xy(x, y, ell, r)?;
    Ok(single_point(n_samples, seed, |u, e| {
        let (c, h) = (ell * u, 0.5 * r * e);
        c - h <= x && c + h >= y
    }))
}

/// Frequency with which a boundary interval misses `[x, y]`.
pub fn mc_phi_boundary(
    side: BoundarySide,
    x: f64,
    y: f64,
    ell: f64,
    r: f64,
    n_samples: u64,
    seed: u64,
) -> Result<EstimateRecord, CoverageError> {
    check_xy(x, y, ell, r)?;
    Ok(single_point(n_samples, seed, |_, e| match side {
        BoundarySide::Left => r * e < x,
        BoundarySide::Right => ell - r * e > y,
    }))
}

/// Estimates `ℓ 𝕷_b`: with `N` internal points, the gap between the right end
/// of interval `i` and the left end of interval `j` meets no other interval
/// and is contained in one extra internal interval.
///
/// The pair is `(0, N+1)` for `b = 2`, `(0, 1)` for `b = 1` and `(1, 2)` for
/// `b = 0`.
pub fn mc_hole_fill(b: u8, n: u32, ell: f64, r: f64, n_samples: u64, seed: u64) -> Result<EstimateRecord, CoverageError> {
    if b > 2 || (n as i64) < 2 - b as i64 || !(ell > 0.0 && r > 0.0) {
        return Err(CoverageError::DomainError { what: format!("b={b}, N={n}, ell={ell}, r={r}") });
    }
    let n = n as usize;
    let start = Instant::now();
    let batches = n_samples.div_ceil(BATCH);
    let parts: Vec<Accumulator> = (0..batches)
        .into_par_iter()
        .map(|bi| {
            let mut rng = seeded_rng(derive_seed(seed, Stream::Coverage, bi));
            let mut acc = Accumulator::default();
            let mut iv = vec![(0.0, 0.0); n + 2];
            for _ in 0..BATCH.min(n_samples - bi * BATCH) {
                let e0: f64 = Exp1.sample(&mut rng);
                iv[0] = (-r * e0, r * e0);
                for slot in iv.iter_mut().take(n + 1).skip(1) {
                    let c = ell * uniform(&mut rng);
                    let h = 0.5 * r * exp1(&mut rng);
                    *slot = (c - h, c + h);
                }
                let e1: f64 = Exp1.sample(&mut rng);
                iv[n + 1] = (ell - r * e1, ell + r * e1);
                let c = ell * uniform(&mut rng);
                let h = 0.5 * r * exp1(&mut rng);
                let (i, j) = match b {
                    2 => (0, n + 1),
                    1 => (0, 1),
                    _ => (1, 2),
                };
                let (lo, hi) = (iv[i].1, iv[j].0);
                let hit = lo < hi
                    && iv.iter().enumerate().all(|(k, &(a, z))| k == i || k == j || z < lo || a > hi)
                    && c - h <= lo
                    && c + h >= hi;
                acc.push(ell * indicator(hit));
            }
            acc
        })
        .collect();
    let mut total = Accumulator::default();
    parts.iter().for_each(|a| total.merge(a));
    Ok(total.record(seed, start.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests {
    use super::super::{cover_prob_lambda0, cover_prob_lambda0_dr, phi, psi};
    use super::*;

    #[test]
    fn lambda_zero_matches_gamma_tail() {
        let cp = CoverageParams::new(1.5, 0.0, 1.0).unwrap();
        let est = mc_cover(&cp, 40_000, 3);
        assert!(est.agrees_with(cover_prob_lambda0(1.5, 1.0), 4.0));
        let d = fd_dr(&cp, 0.1, 40_000, 3).unwrap();
        assert!(d.value >= 0.0);
        assert!(d.agrees_with(cover_prob_lambda0_dr(1.5, 1.0), 4.0));
    }

    #[test]
    fn coupled_grid_is_monotone() {
        let lambdas = [0.0, 0.5, 1.0, 2.0];
        let rs = [0.5, 1.0, 2.0];
        let ell = 3.0;
        let lambda_max = 2.0;
        let mut rng = seeded_rng(11);
        for _ in 0..2000 {
            let s = CoverageSample::draw(ell, lambda_max, &mut rng);
            for w in lambdas.windows(2) {
                for &r in &rs {
                    assert!(!s.covered(w[0], r) || s.covered(w[1], r));
                }
            }
            for w in rs.windows(2) {
                for &l in &lambdas {
                    assert!(!s.covered(l, w[0]) || s.covered(l, w[1]));
                }
            }
        }
        let g = mc_cover_grid(ell, &lambdas, &rs, 5000, 2);
        assert_eq!(g.len(), 4);
        assert!(g[3][2].value >= g[0][0].value);
    }

    #[test]
    fn dlambda_matches_difference() {
        for &(ell, lambda, r) in &[(2.0, 1.0, 1.0), (4.0, 0.5, 0.8)] {
            let cp = CoverageParams::new(ell, lambda, r).unwrap();
            let a = mc_dlambda(&cp, 60_000, 5);
            let b = fd_dlambda(&cp, 0.05, 60_000, 6).unwrap();
            let s = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            assert!((a.value - b.value).abs() <= 4.0 * s, "{a:?} {b:?}");
        }
        let tiny = CoverageParams::new(1e-4, 1.0, 1.0).unwrap();
        assert!(mc_dlambda(&tiny, 10_000, 1).value < 1e-4);
    }

    #[test]
    fn single_interval_oracles() {
        let (x, y, ell, r) = (0.4, 0.9, 2.0, 0.7);
        let p = mc_phi(x, y, ell, r, 40_000, 9).unwrap();
        assert!(p.agrees_with(phi(x, y, ell, r).unwrap(), 4.0));
        let q = mc_psi(x, y, ell, r, 40_000, 9).unwrap();
        assert!(q.agrees_with(psi(x, y, ell, r).unwrap(), 4.0));
        let b = mc_phi_boundary(BoundarySide::Left, x, y, ell, r, 40_000, 9).unwrap();
        assert!(b.agrees_with(1.0 - (-x / r).exp(), 4.0));
    }

    #[test]
    fn reproducible_and_batch_independent() {
        let cp = CoverageParams::new(2.0, 1.0, 1.0).unwrap();
        let a = mc_cover(&cp, 10_000, 42);
        let b = mc_cover(&cp, 10_000, 42);
        assert_eq!((a.value, a.stderr), (b.value, b.stderr));
    }

    #[test]
    fn hole_without_internal_points() {
        // b = 2, N = 0: the two boundary intervals leave a gap that one
        // internal interval must fill.
        let (ell, r) = (1.5, 1.0);
        let est = mc_hole_fill(2, 0, ell, r, 60_000, 4).unwrap();
        let g2 = ell * ell / (2.0 * r) * (-ell / r).exp();
        assert!(est.value <= g2 + 3.0 * est.stderr);
        assert!(mc_hole_fill(0, 1, ell, r, 10, 1).is_err());
    }
}
