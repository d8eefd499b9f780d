use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{ExperimentError, RunConfig};
use crate::coverage1d::{
    c_sup, cover_prob_lambda0, dr_hole_series, fd_dr, mc_cover, mc_dlambda, CoverageParams, CoverageTable,
    TableSpec,
};
use crate::delaunay::Triangulation;
use crate::estimate::{Accumulator, EstimateRecord};
use crate::geometry::{AxisBox, Point2};
use crate::model::{build_graph, build_pruned, sample_ppp, CoxSample, Marks, ModelParams, Range, StreetGraph};
use crate::percolation::{
    components, crosses_box, n_good, pivotal_edges, spanning_cluster_count, EventSpec, PercolationError,
};
use crate::rng::{derive_seed, Stream};

const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

/// One replicate: a triangulated point sample with its marks.
#[derive(Clone, Debug)]
pub struct Scene {
    /// Replicate seed.
    pub seed: u64,
    /// Triangulation of the simulation window.
    pub t: Triangulation,
    /// Keyed marks of the replicate.
    pub marks: Marks,
    /// Analysis box.
    pub analysis: AxisBox,
    /// Stabilization radius of the analysis box reached the margin.
    pub excluded: bool,
}

/// Samples replicate `index`: a unit-intensity point process on the
/// analysis box grown by `margin`.
pub fn scene(master: u64, index: u64, analysis: AxisBox, margin: f64) -> Result<Scene, ExperimentError> {
    let seed = derive_seed(master, Stream::Replicate, index);
    let sim = analysis.inflate(margin);
    let pts = sample_ppp(&sim, 1.0, derive_seed(seed, Stream::Points, 0));
    let t = Triangulation::build(&pts)?;
    let excluded = t.stabilization_radius(&analysis) >= margin;
    let marks = Marks::new(&t, seed);
    Ok(Scene { seed, t, marks, analysis, excluded })
}

fn replicates<T, F>(reps: u64, f: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(u64) -> Result<T, ExperimentError> + Sync,
{
    (0..reps).into_par_iter().map(&f).collect()
}

fn params(cfg: &RunConfig, p: f64, lambda: f64, r: Range) -> Result<ModelParams, ExperimentError> {
    Ok(match cfg.r_prime {
        Some(rp) => ModelParams::with_r_prime(p, lambda, r, rp)?,
        None => ModelParams::new(p, lambda, r)?,
    })
}

fn accumulate<'a>(values: impl Iterator<Item = &'a f64>) -> Accumulator {
    let mut acc = Accumulator::default();
    values.for_each(|&v| acc.push(v));
    acc
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// One estimate of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    /// Site probability.
    pub p: Option<f64>,
    /// User intensity.
    pub lambda: Option<f64>,
    /// Range scale.
    pub r: Option<Range>,
    /// Box scale.
    pub n: Option<f64>,
    /// Estimated probability.
    pub value: f64,
    /// Standard error.
    pub stderr: f64,
    /// Replicates used.
    pub n_samples: u64,
    /// Replicates excluded by the margin policy.
    pub excluded: u64,
    /// Master seed.
    pub seed: u64,
    /// Replicates whose indicator dropped against a smaller grid neighbour.
    pub violations: u64,
}

/// Rows of a sweep, sorted by `(p, λ, r)` or by `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    /// Estimates.
    pub rows: Vec<SweepRow>,
    /// Wall-clock seconds.
    #[serde(skip)]
    pub wall_time: f64,
}

impl SweepResult {
    /// Total coupling violations over all rows.
    pub fn total_violations(&self) -> u64 {
        self.rows.iter().map(|r| r.violations).sum()
    }

    /// Estimate record of row `i`.
    pub fn record(&self, i: usize) -> EstimateRecord {
        let r = &self.rows[i];
        EstimateRecord { value: r.value, stderr: r.stderr, n_samples: r.n_samples, seed: r.seed, wall_time: self.wall_time }
    }
}

struct Grid {
    ps: Vec<f64>,
    lambdas: Vec<f64>,
    rs: Vec<Range>,
}

impl Grid {
    fn len(&self) -> usize {
        self.ps.len() * self.lambdas.len() * self.rs.len()
    }

    fn point(&self, i: usize) -> (usize, usize, usize) {
        let nl = self.lambdas.len();
        let nr = self.rs.len();
        (i / (nl * nr), (i / nr) % nl, i % nr)
    }

    fn index(&self, ip: usize, il: usize, ir: usize) -> usize {
        (ip * self.lambdas.len() + il) * self.rs.len() + ir
    }

    /// Grid neighbours below `i` along each axis.
    fn predecessors(&self, i: usize) -> Vec<usize> {
        let (ip, il, ir) = self.point(i);
        let mut v = Vec::new();
        if ip > 0 {
            v.push(self.index(ip - 1, il, ir));
        }
        if il > 0 {
            v.push(self.index(ip, il - 1, ir));
        }
        if ir > 0 {
            v.push(self.index(ip, il, ir - 1));
        }
        v
    }
}

/// Pools per-replicate indicator vectors into sweep rows with violation
/// counts. `None` marks an excluded replicate.
fn pool_grid(grid: &Grid, per_rep: &[Option<Vec<bool>>], seed: u64, n: Option<f64>) -> Vec<SweepRow> {
    let excluded = per_rep.iter().filter(|x| x.is_none()).count() as u64;
    let kept: Vec<&Vec<bool>> = per_rep.iter().flatten().collect();
    (0..grid.len())
        .map(|i| {
            let (ip, il, ir) = grid.point(i);
            let mut acc = Accumulator::default();
            let mut violations = 0;
            let preds = grid.predecessors(i);
            for ind in &kept {
                acc.push(indicator(ind[i]));
                if !ind[i] && preds.iter().any(|&j| ind[j]) {
                    violations += 1;
                }
            }
            SweepRow {
                p: Some(grid.ps[ip]),
                lambda: Some(grid.lambdas[il]),
                r: Some(grid.rs[ir]),
                n,
                value: acc.mean(),
                stderr: acc.stderr(),
                n_samples: acc.n,
                excluded,
                seed,
                violations,
            }
        })
        .collect()
}

fn analysis_box(cfg: &RunConfig) -> AxisBox {
    AxisBox::new(ORIGIN, cfg.window)
}

/// Crossing probability of the analysis box at the scalar parameters.
pub fn cmd_crossing(cfg: &RunConfig) -> Result<SweepResult, ExperimentError> {
    let single = RunConfig { p_grid: vec![], lambda_grid: vec![], r_grid: vec![], ..cfg.clone() };
    cmd_sweep(&single)
}

/// Crossing probabilities over the `(p, λ, r)` grid with coupled replicates.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepResult, ExperimentError> {
    cfg.validate()?;
    let start = Instant::now();
    let seed = cfg.master_seed()?;
    let grid = Grid { ps: cfg.ps(), lambdas: cfg.lambdas(), rs: cfg.rs() };
    let all: Vec<ModelParams> = (0..grid.len())
        .map(|i| {
            let (ip, il, ir) = grid.point(i);
            params(cfg, grid.ps[ip], grid.lambdas[il], grid.rs[ir])
        })
        .collect::<Result<_, _>>()?;
    let lambda_max = grid.lambdas.last().copied().unwrap_or(0.0);
    let bx = analysis_box(cfg);
    let margin = cfg.margin_value();
    let per_rep = replicates(cfg.reps, |i| {
        let s = scene(seed, i, bx, margin)?;
        if s.excluded {
            return Ok(None);
        }
        let cox = CoxSample::sample(&s.t, &s.marks, lambda_max);
        let ind = all
            .iter()
            .map(|pr| Ok(crosses_box(&build_graph(&s.t, &s.marks, &cox, pr)?, &bx, cfg.axis)))
            .collect::<Result<Vec<bool>, ExperimentError>>()?;
        Ok(Some(ind))
    })?;
    Ok(SweepResult { rows: pool_grid(&grid, &per_rep, seed, None), wall_time: start.elapsed().as_secs_f64() })
}

/// Outcome of a threshold bisection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BisectStatus {
    /// The bracket straddles 0.5 and was bisected.
    Bracketed,
    /// Already at least 0.5 at the lower end of the bracket.
    AtLowerBracket,
    /// Below 0.5 at both ends of the bracket.
    NonBracketed,
    /// At least 0.5 with no users.
    AlwaysPercolates,
    /// Below 0.5 at every intensity tried, or `p ≤ 1/2`.
    NeverPercolates,
}

/// A bisection with its probes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BisectReport {
    /// Parameter that was bisected.
    pub param: &'static str,
    /// Site probability, fixed for `λ` bisection.
    pub p: Option<f64>,
    /// Range scale.
    pub r: Range,
    /// Outcome.
    pub status: BisectStatus,
    /// Midpoint of the final bracket.
    pub estimate: Option<f64>,
    /// Final bracket.
    pub bracket: (f64, f64),
    /// Probed values with their crossing estimates, in probe order.
    pub probes: Vec<(f64, EstimateRecord)>,
}

/// Flat form of a bisection report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BisectRow {
    /// `probe` or `estimate`.
    pub kind: &'static str,
    /// Parameter that was bisected.
    pub param: &'static str,
    /// Fixed site probability of a `λ` bisection.
    pub p: Option<f64>,
    /// Range scale.
    pub r: Range,
    /// Probe position or final estimate.
    pub x: Option<f64>,
    /// Crossing estimate at the probe.
    pub value: Option<f64>,
    /// Standard error at the probe.
    pub stderr: Option<f64>,
    /// Replicates at the probe.
    pub n_samples: Option<u64>,
    /// Lower end of the final bracket.
    pub lo: Option<f64>,
    /// Upper end of the final bracket.
    pub hi: Option<f64>,
    /// Outcome.
    pub status: Option<BisectStatus>,
}

impl BisectReport {
    /// Probe rows followed by one estimate row.
    pub fn rows(&self) -> Vec<BisectRow> {
        let base = BisectRow {
            kind: "probe",
            param: self.param,
            p: self.p,
            r: self.r,
            x: None,
            value: None,
            stderr: None,
            n_samples: None,
            lo: None,
            hi: None,
            status: None,
        };
        let mut rows: Vec<BisectRow> = self
            .probes
            .iter()
            .map(|(x, e)| BisectRow {
                x: Some(*x),
                value: Some(e.value),
                stderr: Some(e.stderr),
                n_samples: Some(e.n_samples),
                ..base.clone()
            })
            .collect();
        rows.push(BisectRow {
            kind: "estimate",
            x: self.estimate,
            lo: Some(self.bracket.0),
            hi: Some(self.bracket.1),
            status: Some(self.status),
            ..base
        });
        rows
    }
}

/// Crossing estimate at one parameter point with the common replicate seeds.
fn crossing_estimate(cfg: &RunConfig, pr: ModelParams, reps: u64) -> Result<EstimateRecord, ExperimentError> {
    let start = Instant::now();
    let seed = cfg.master_seed()?;
    let bx = analysis_box(cfg);
    let margin = cfg.margin_value();
    let lambda_max = if pr.lambda > 0.0 { cfg.lambda_max.max(pr.lambda) } else { 0.0 };
    let vals = replicates(reps, |i| {
        let s = scene(seed, i, bx, margin)?;
        if s.excluded {
            return Ok(None);
        }
        let cox = CoxSample::sample(&s.t, &s.marks, lambda_max);
        Ok(Some(indicator(crosses_box(&build_graph(&s.t, &s.marks, &cox, &pr)?, &bx, cfg.axis))))
    })?;
    Ok(accumulate(vals.iter().flatten()).record(seed, start.elapsed().as_secs_f64()))
}

fn bisect<F>(lo: f64, hi: f64, tol: f64, probes: &mut Vec<(f64, EstimateRecord)>, f: F) -> Result<(f64, f64), ExperimentError>
where
    F: Fn(f64) -> Result<EstimateRecord, ExperimentError>,
{
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let e = f(mid)?;
        probes.push((mid, e));
        if e.value >= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

/// Finite-size site threshold at `λ = 0` for each range of the grid.
pub fn cmd_pc_bisect(cfg: &RunConfig) -> Result<Vec<BisectReport>, ExperimentError> {
    cfg.validate()?;
    let cfg = RunConfig { lambda: 0.0, lambda_grid: vec![], ..cfg.clone() };
    let reps = cfg.reps.max(300);
    let tol = cfg.tol.unwrap_or(0.02);
    cfg.rs()
        .into_iter()
        .map(|r| {
            let f = |p: f64| crossing_estimate(&cfg, params(&cfg, p, 0.0, r)?, reps);
            let mut probes = Vec::new();
            let at_half = f(0.5)?;
            probes.push((0.5, at_half));
            let (status, estimate, bracket) = if at_half.value >= 0.5 {
                (BisectStatus::AtLowerBracket, Some(0.5), (0.5, 0.5))
            } else {
                let at_one = f(1.0)?;
                probes.push((1.0, at_one));
                if at_one.value < 0.5 {
                    (BisectStatus::NonBracketed, None, (0.5, 1.0))
                } else {
                    let b = bisect(0.5, 1.0, tol, &mut probes, f)?;
                    (BisectStatus::Bracketed, Some(0.5 * (b.0 + b.1)), b)
                }
            };
            Ok(BisectReport { param: "p", p: None, r, status, estimate, bracket, probes })
        })
        .collect()
}

/// Finite-size intensity threshold on `[0, λ_max]` for each range of the grid.
pub fn cmd_lambda_c(cfg: &RunConfig) -> Result<Vec<BisectReport>, ExperimentError> {
    cfg.validate()?;
    let reps = cfg.reps;
    let tol = cfg.tol.unwrap_or(0.1);
    let p = cfg.p;
    let top = cfg.lambda_max;
    cfg.rs()
        .into_iter()
        .map(|r| {
            let mut report =
                BisectReport { param: "lambda", p: Some(p), r, status: BisectStatus::NeverPercolates, estimate: None, bracket: (0.0, top), probes: Vec::new() };
            if p <= 0.5 {
                return Ok(report);
            }
            let f = |lambda: f64| crossing_estimate(cfg, params(cfg, p, lambda, r)?, reps);
            let at_zero = f(0.0)?;
            report.probes.push((0.0, at_zero));
            if at_zero.value >= 0.5 {
                report.status = BisectStatus::AlwaysPercolates;
                report.estimate = Some(0.0);
                report.bracket = (0.0, 0.0);
                return Ok(report);
            }
            let at_top = f(top)?;
            report.probes.push((top, at_top));
            if at_top.value < 0.5 {
                return Ok(report);
            }
            let b = bisect(0.0, top, tol, &mut report.probes, f)?;
            report.status = BisectStatus::Bracketed;
            report.estimate = Some(0.5 * (b.0 + b.1));
            report.bracket = b;
            Ok(report)
        })
        .collect()
}

/// Probability that the origin is n-good over the `n × λ × r` grid.
pub fn cmd_ngood(cfg: &RunConfig) -> Result<SweepResult, ExperimentError> {
    cfg.validate()?;
    let start = Instant::now();
    let seed = cfg.master_seed()?;
    let ns = cfg.ns();
    let n_max = ns.last().copied().unwrap_or(0.0);
    if cfg.window < 8.0 * n_max {
        return Err(PercolationError::WindowTooSmall { needed: 8.0 * n_max }.into());
    }
    let grid = Grid { ps: vec![cfg.p], lambdas: cfg.lambdas(), rs: cfg.rs() };
    let all: Vec<ModelParams> = (0..grid.len())
        .map(|i| {
            let (_, il, ir) = grid.point(i);
            params(cfg, cfg.p, grid.lambdas[il], grid.rs[ir])
        })
        .collect::<Result<_, _>>()?;
    let lambda_max = grid.lambdas.last().copied().unwrap_or(0.0);
    let bx = analysis_box(cfg);
    let margin = cfg.margin_value();
    let per_rep = replicates(cfg.reps, |i| {
        let s = scene(seed, i, bx, margin)?;
        if s.excluded {
            return Ok(None);
        }
        let cox = CoxSample::sample(&s.t, &s.marks, lambda_max);
        let sgs: Vec<StreetGraph> = all
            .iter()
            .map(|pr| Ok(build_pruned(&build_graph(&s.t, &s.marks, &cox, pr)?, &s.t)))
            .collect::<Result<_, ExperimentError>>()?;
        let mut ind = Vec::with_capacity(ns.len() * sgs.len());
        for &n in &ns {
            for sg in &sgs {
                ind.push(n_good(&s.t, sg, &bx, n, ORIGIN)?);
            }
        }
        Ok(Some(ind))
    })?;
    let mut rows = Vec::new();
    let k = grid.len();
    for (j, &n) in ns.iter().enumerate() {
        let slice: Vec<Option<Vec<bool>>> =
            per_rep.iter().map(|x| x.as_ref().map(|v| v[j * k..(j + 1) * k].to_vec())).collect();
        rows.extend(pool_grid(&grid, &slice, seed, Some(n)));
    }
    Ok(SweepResult { rows, wall_time: start.elapsed().as_secs_f64() })
}

/// Empirical `P(R(B_n) > n)` for each `n` of the grid.
///
/// The stabilization radius is the measured quantity, so no replicate is
/// excluded here.
pub fn cmd_stab(cfg: &RunConfig) -> Result<SweepResult, ExperimentError> {
    cfg.validate()?;
    let start = Instant::now();
    let seed = cfg.master_seed()?;
    let ns = cfg.ns();
    let n_max = ns.last().copied().unwrap_or(0.0);
    if cfg.window < 4.0 * n_max {
        return Err(PercolationError::WindowTooSmall { needed: 4.0 * n_max }.into());
    }
    let bx = analysis_box(cfg);
    let margin = cfg.margin_value();
    let per_rep = replicates(cfg.reps, |i| {
        let s = scene(seed, i, bx, margin)?;
        Ok(ns.iter().map(|&n| s.t.stabilization_radius(&AxisBox::new(ORIGIN, n)) > n).collect::<Vec<bool>>())
    })?;
    let rows = ns
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let acc = accumulate(per_rep.iter().map(|v| if v[j] { &1.0 } else { &0.0 }));
            let violations = if j == 0 { 0 } else { per_rep.iter().filter(|v| v[j] && !v[j - 1]).count() as u64 };
            SweepRow {
                p: None,
                lambda: None,
                r: None,
                n: Some(n),
                value: acc.mean(),
                stderr: acc.stderr(),
                n_samples: acc.n,
                excluded: 0,
                seed,
                violations,
            }
        })
        .collect();
    Ok(SweepResult { rows, wall_time: start.elapsed().as_secs_f64() })
}

/// Derivative estimates of the arm probability at one `(λ, r)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RussoRow {
    /// Site probability.
    pub p: f64,
    /// User intensity.
    pub lambda: f64,
    /// Range scale.
    pub r: Range,
    /// Outer box side.
    pub n: f64,
    /// Arm probability.
    pub theta: f64,
    /// Its standard error.
    pub theta_se: f64,
    /// Pivotal-sum estimate of `∂_λΘ`.
    pub russo: f64,
    /// Its standard error.
    pub russo_se: f64,
    /// Coupled finite difference in `λ`.
    pub fd_lambda: f64,
    /// Its standard error.
    pub fd_lambda_se: f64,
    /// Coupled central finite difference in `r`.
    pub fd_r: f64,
    /// Its standard error.
    pub fd_r_se: f64,
    /// Constant `c_sup(r)`.
    pub c_sup: Option<f64>,
    /// `c_sup(r) e^{λr/2} ∂_rΘ`.
    pub bound: f64,
    /// Its standard error.
    pub bound_se: f64,
    /// Pivotal sum and finite difference agree within combined 3σ.
    pub agree: bool,
    /// Pivotal sum is at most the bound plus combined 3σ.
    pub inequality_holds: bool,
    /// Replicates used.
    pub n_samples: u64,
    /// Replicates excluded by the margin policy.
    pub excluded: u64,
    /// Master seed.
    pub seed: u64,
}

/// Street graph of the Bernoulli-edge representation restricted to the
/// edges meeting `region`; other edges stay closed.
fn local_bernoulli(s: &Scene, open: &[bool], region: &AxisBox, table: &CoverageTable) -> Result<StreetGraph, ExperimentError> {
    let v = s.t.vertices();
    let mut open_edge = vec![false; s.t.edges().len()];
    for (e, ed) in s.t.edges().iter().enumerate() {
        if open[ed.u] && open[ed.v] && region.clip_segment(v[ed.u], v[ed.v]).is_some() {
            let q = table
                .lookup(ed.length)
                .ok_or(crate::model::ModelError::MissingCoverageValue { length: ed.length })?;
            open_edge[e] = s.marks.edge_uniform(e) < q;
        }
    }
    Ok(StreetGraph { open_vertex: open.to_vec(), open_edge })
}

struct RussoPoint {
    lambda: f64,
    r: Range,
    /// Tables at `λ` (with `∂_λ`), `λ_+`, `λ_-`, `r + h`, `r - h`.
    tables: Option<[usize; 5]>,
    lambda_lo: f64,
    lambda_hi: f64,
}

/// Pivotal-sum and finite-difference derivatives of `P(S_1 ↔ S_n)` on the
/// Bernoulli-edge graph over the `λ × r` grid.
pub fn cmd_russo(cfg: &RunConfig) -> Result<Vec<RussoRow>, ExperimentError> {
    cfg.validate()?;
    let seed = cfg.master_seed()?;
    let h = cfg.h;
    let n = cfg.n;
    let mut specs = Vec::new();
    let mut points = Vec::new();
    for &lambda in &cfg.lambdas() {
        for &r in &cfg.rs() {
            let lambda_lo = (lambda - h).max(0.0);
            let lambda_hi = lambda + h;
            let tables = match r {
                Range::Infinite => None,
                Range::Finite(rv) => {
                    if rv <= h {
                        return Err(ExperimentError::Config(format!("r = {rv} must exceed h = {h}")));
                    }
                    let k = specs.len();
                    specs.push(TableSpec { lambda, r: rv, with_dlambda: true });
                    specs.push(TableSpec { lambda: lambda_hi, r: rv, with_dlambda: false });
                    specs.push(TableSpec { lambda: lambda_lo, r: rv, with_dlambda: false });
                    specs.push(TableSpec { lambda, r: rv + h, with_dlambda: false });
                    specs.push(TableSpec { lambda, r: rv - h, with_dlambda: false });
                    Some([k, k + 1, k + 2, k + 3, k + 4])
                }
            };
            points.push(RussoPoint { lambda, r, tables, lambda_lo, lambda_hi });
        }
    }
    let tables = if specs.is_empty() {
        Vec::new()
    } else {
        let lambda_max = specs.iter().map(|s| s.lambda).fold(0.0, f64::max);
        CoverageTable::build_family(
            &specs,
            lambda_max,
            cfg.table_range,
            cfg.table_samples,
            derive_seed(seed, Stream::Coverage, 0),
        )?
    };
    let bx = AxisBox::new(ORIGIN, n);
    let event = EventSpec::Arm { alpha: 1.0, beta: n, center: ORIGIN };
    let region = event.region();
    let margin = cfg.margin.unwrap_or_else(|| (n / 5.0).max(10.0));
    // Per replicate and grid point: theta, russo, fd_lambda, fd_r.
    let per_rep = replicates(cfg.reps, |i| {
        let s = scene(seed, i, bx, margin)?;
        if s.excluded {
            return Ok(None);
        }
        let open = s.marks.open_sites(cfg.p);
        let mut out = Vec::with_capacity(points.len());
        for pt in &points {
            let Some(ix) = pt.tables else {
                let all = StreetGraph { open_vertex: open.clone(), open_edge: vec![true; s.t.edges().len()] };
                out.push([indicator(event.holds(&s.t, &all)), 0.0, 0.0, 0.0]);
                continue;
            };
            let g = |k: usize| local_bernoulli(&s, &open, &region, &tables[ix[k]]);
            let base = g(0)?;
            let theta = indicator(event.holds(&s.t, &base));
            let mut russo = 0.0;
            for e in pivotal_edges(&s.t, &base, &event) {
                russo += tables[ix[0]]
                    .dlambda(e.length)
                    .ok_or(crate::model::ModelError::MissingCoverageValue { length: e.length })?;
            }
            let lam = |k: usize| -> Result<f64, ExperimentError> { Ok(indicator(event.holds(&s.t, &g(k)?))) };
            let fd_lambda = (lam(1)? - lam(2)?) / (pt.lambda_hi - pt.lambda_lo);
            let fd_r = (lam(3)? - lam(4)?) / (2.0 * h);
            out.push([theta, russo, fd_lambda, fd_r]);
        }
        Ok(Some(out))
    })?;
    let excluded = per_rep.iter().filter(|x| x.is_none()).count() as u64;
    let kept: Vec<&Vec<[f64; 4]>> = per_rep.iter().flatten().collect();
    Ok(points
        .iter()
        .enumerate()
        .map(|(j, pt)| {
            let col = |k: usize| accumulate(kept.iter().map(|v| &v[j][k]));
            let (theta, russo, fdl, fdr) = (col(0), col(1), col(2), col(3));
            let c = match pt.r {
                Range::Finite(rv) => Some(c_sup(rv, 3)),
                Range::Infinite => None,
            };
            let factor = c.map(|c| c * (0.5 * pt.lambda * pt.r.value()).exp()).unwrap_or(0.0);
            let bound = factor * fdr.mean();
            let bound_se = factor * fdr.stderr();
            let agree = (russo.mean() - fdl.mean()).abs() <= 3.0 * russo.stderr().hypot(fdl.stderr());
            let inequality_holds = russo.mean() <= bound + 3.0 * russo.stderr().hypot(bound_se);
            RussoRow {
                p: cfg.p,
                lambda: pt.lambda,
                r: pt.r,
                n,
                theta: theta.mean(),
                theta_se: theta.stderr(),
                russo: russo.mean(),
                russo_se: russo.stderr(),
                fd_lambda: fdl.mean(),
                fd_lambda_se: fdl.stderr(),
                fd_r: fdr.mean(),
                fd_r_se: fdr.stderr(),
                c_sup: c,
                bound,
                bound_se,
                agree,
                inequality_holds,
                n_samples: theta.n,
                excluded,
                seed,
            }
        })
        .collect())
}

/// Frequency of each spanning-cluster count.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniqueRow {
    /// Count of spanning clusters, or `>=2`.
    pub count: String,
    /// Frequency.
    pub value: f64,
    /// Standard error.
    pub stderr: f64,
    /// Replicates used.
    pub n_samples: u64,
    /// Replicates excluded by the margin policy.
    pub excluded: u64,
    /// Master seed.
    pub seed: u64,
}

/// Distribution of the number of clusters touching all four sides of the
/// analysis box. The last row is the frequency of at least two.
pub fn cmd_unique(cfg: &RunConfig) -> Result<Vec<UniqueRow>, ExperimentError> {
    cfg.validate()?;
    let seed = cfg.master_seed()?;
    let pr = params(cfg, cfg.p, cfg.lambda, cfg.r)?;
    let bx = analysis_box(cfg);
    let margin = cfg.margin_value();
    let counts = replicates(cfg.reps, |i| {
        let s = scene(seed, i, bx, margin)?;
        if s.excluded {
            return Ok(None);
        }
        let cox = CoxSample::sample(&s.t, &s.marks, pr.lambda);
        let g = build_graph(&s.t, &s.marks, &cox, &pr)?;
        Ok(Some(spanning_cluster_count(&components(&g), &g, &bx)))
    })?;
    let excluded = counts.iter().filter(|c| c.is_none()).count() as u64;
    let kept: Vec<usize> = counts.into_iter().flatten().collect();
    let top = kept.iter().copied().max().unwrap_or(0);
    let row = |label: String, f: &dyn Fn(usize) -> bool| {
        let vals: Vec<f64> = kept.iter().map(|&c| indicator(f(c))).collect();
        let acc = accumulate(vals.iter());
        UniqueRow { count: label, value: acc.mean(), stderr: acc.stderr(), n_samples: acc.n, excluded, seed }
    };
    let mut rows: Vec<UniqueRow> = (0..=top).map(|k| row(k.to_string(), &|c| c == k)).collect();
    rows.push(row(">=2".into(), &|c| c >= 2));
    Ok(rows)
}

/// One-dimensional coverage estimates and the derivative inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageRow {
    /// Segment length.
    pub ell: f64,
    /// Intensity.
    pub lambda: f64,
    /// Range scale.
    pub r: f64,
    /// Monte Carlo coverage probability.
    pub p_mc: f64,
    /// Its standard error.
    pub p_se: f64,
    /// Closed form at `λ = 0`.
    pub p_exact: Option<f64>,
    /// Monte Carlo `∂_λ p`.
    pub dlambda: f64,
    /// Its standard error.
    pub dlambda_se: f64,
    /// Coupled finite difference `∂_r p`.
    pub dr: f64,
    /// Its standard error.
    pub dr_se: f64,
    /// Hole-series upper bound on `∂_r p`.
    pub dr_series: f64,
    /// Constant `c_sup(r)`.
    pub c_sup: f64,
    /// `∂_λ p ≤ c_sup e^{λr/2} ∂_r p` within combined 3σ.
    pub inequality_holds: bool,
    /// Samples per estimate.
    pub n_samples: u64,
    /// Master seed.
    pub seed: u64,
}

/// Coverage probability and derivatives over the `ℓ × λ × r` grid.
pub fn cmd_coverage1d(cfg: &RunConfig) -> Result<Vec<CoverageRow>, ExperimentError> {
    cfg.validate()?;
    let seed = cfg.master_seed()?;
    let rs: Vec<f64> = cfg
        .rs()
        .into_iter()
        .map(|r| match r {
            Range::Finite(v) => Ok(v),
            Range::Infinite => Err(ExperimentError::Config("coverage1d needs finite ranges".into())),
        })
        .collect::<Result<_, _>>()?;
    let mut ells = cfg.ell_grid.clone();
    ells.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    for &ell in &ells {
        for &lambda in &cfg.lambdas() {
            for &r in &rs {
                let cp = CoverageParams::new(ell, lambda, r)?;
                let p = mc_cover(&cp, cfg.samples, seed);
                let dl = mc_dlambda(&cp, cfg.samples, seed);
                let dr = fd_dr(&cp, cfg.h.min(0.25 * r), cfg.samples, seed)?;
                let c = c_sup(r, 3);
                let f = c * (0.5 * lambda * r).exp();
                let slack = 3.0 * dl.stderr.hypot(f * dr.stderr);
                rows.push(CoverageRow {
                    ell,
                    lambda,
                    r,
                    p_mc: p.value,
                    p_se: p.stderr,
                    p_exact: (lambda == 0.0).then(|| cover_prob_lambda0(ell, r)),
                    dlambda: dl.value,
                    dlambda_se: dl.stderr,
                    dr: dr.value,
                    dr_se: dr.stderr,
                    dr_series: dr_hole_series(&cp)?,
                    c_sup: c,
                    inequality_holds: dl.value <= f * dr.value + slack,
                    n_samples: cfg.samples,
                    seed,
                });
            }
        }
    }
    Ok(rows)
}
