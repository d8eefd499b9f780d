use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentError, RunConfig};
use crate::coverage1d::{phi, psi, w};
use crate::delaunay::{DelaunayError, Triangulation};
use crate::geometry::{circumdisk, empty_half_disk, in_circumcircle, orient2d, AxisBox, Ball, HalfDiskStatus, Point2};
use crate::model::{build_graph, sample_ppp, CoxSample, Marks, ModelParams, Range};
use crate::percolation::{crosses_box, Axis};
use crate::rng::{derive_seed, seeded_rng, uniform, Stream};

/// Deliberately broken predicates for checking that the suites detect errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutant {
    /// The oracle's in-circle test uses a disk shrunk by 10%.
    ShrunkIncircle,
}

/// Outcome of one property suite.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FuzzRow {
    /// Suite name.
    pub suite: &'static str,
    /// Cases run.
    pub cases: u64,
    /// Failing cases.
    pub failures: u64,
    /// Description of the first failing case.
    pub first_counterexample: Option<String>,
}

/// Outcome of all suites.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FuzzReport {
    /// One row per suite.
    pub rows: Vec<FuzzRow>,
}

impl FuzzReport {
    /// Failing cases over all suites.
    pub fn total_failures(&self) -> u64 {
        self.rows.iter().map(|r| r.failures).sum()
    }
}

/// Edges of every triangle whose circumcircle has no input point strictly
/// inside. Exhaustive over triples.
pub fn brute_delaunay_edges(pts: &[Point2], mutant: Option<Mutant>) -> BTreeSet<(usize, usize)> {
    let n = pts.len();
    let inside = |a: usize, b: usize, c: usize, p: usize| match mutant {
        None => in_circumcircle(pts[a], pts[b], pts[c], pts[p], true),
        Some(Mutant::ShrunkIncircle) => {
            let d = circumdisk(pts[a], pts[b], pts[c]).expect("non-degenerate");
            pts[p].dist(d.center) < 0.9 * d.radius
        }
    };
    let mut edges = BTreeSet::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                if orient2d(pts[a], pts[b], pts[c]) == std::cmp::Ordering::Equal {
                    continue;
                }
                if (0..n).all(|p| p == a || p == b || p == c || !inside(a, b, c, p)) {
                    edges.insert((a, b));
                    edges.insert((a, c));
                    edges.insert((b, c));
                }
            }
        }
    }
    edges
}

fn random_points<R: Rng>(rng: &mut R, n: usize) -> Vec<Point2> {
    (0..n).map(|_| Point2::new(uniform(rng), uniform(rng))).collect()
}

/// Point sets with lattice, cocircular and clustered degeneracies.
fn degenerate_points<R: Rng>(rng: &mut R, kind: u64) -> Vec<Point2> {
    let n = rng.random_range(3..=200usize);
    let mut pts: Vec<Point2> = match kind % 4 {
        0 => random_points(rng, n),
        1 => (0..n).map(|_| Point2::new(rng.random_range(0..9) as f64, rng.random_range(0..9) as f64)).collect(),
        2 => {
            let k = rng.random_range(3..=24u32);
            let mut v: Vec<Point2> = (0..k)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / k as f64;
                    Point2::new(a.cos(), a.sin())
                })
                .collect();
            v.push(Point2::new(0.0, 0.0));
            v.extend((0..n / 4).map(|_| Point2::new(4.0 * uniform(rng) - 2.0, 4.0 * uniform(rng) - 2.0)));
            v
        }
        _ => {
            let c = Point2::new(uniform(rng), uniform(rng));
            (0..n).map(|_| Point2::new(c.x + 1e-9 * uniform(rng), c.y + 1e-9 * uniform(rng))).collect()
        }
    };
    let mut seen = BTreeSet::new();
    pts.retain(|p| seen.insert((p.x.to_bits(), p.y.to_bits())));
    pts
}

fn all_collinear(pts: &[Point2]) -> bool {
    pts.len() < 3 || (2..pts.len()).all(|i| orient2d(pts[0], pts[1], pts[i]) == std::cmp::Ordering::Equal)
}

fn check_oracle(seed: u64, mutant: Option<Mutant>) -> Result<(), String> {
    let mut rng = seeded_rng(seed);
    let n = rng.random_range(3..=60usize);
    let pts = random_points(&mut rng, n);
    let t = Triangulation::build(&pts).map_err(|e| format!("n={n}: {e}"))?;
    let got: BTreeSet<(usize, usize)> = t.edges().iter().map(|e| (e.u, e.v)).collect();
    let want = brute_delaunay_edges(&pts, mutant);
    if got != want {
        let extra: Vec<_> = got.difference(&want).take(3).collect();
        let missing: Vec<_> = want.difference(&got).take(3).collect();
        return Err(format!("n={n}: edges only in triangulation {extra:?}, only in oracle {missing:?}"));
    }
    Ok(())
}

fn check_invariants(seed: u64, kind: u64) -> Result<(), String> {
    let mut rng = seeded_rng(seed);
    let pts = degenerate_points(&mut rng, kind);
    let n = pts.len();
    let t = match Triangulation::build(&pts) {
        Err(DelaunayError::AllCollinear) | Err(DelaunayError::TooFewPoints { .. }) if all_collinear(&pts) => return Ok(()),
        Err(e) => return Err(format!("n={n} kind={}: {e}", kind % 4)),
        Ok(t) => t,
    };
    let h = t.hull().len();
    if t.triangles().len() != 2 * n - h - 2 || t.edges().len() != 3 * n - h - 3 {
        return Err(format!(
            "n={n} kind={}: {} triangles and {} edges with {h} hull vertices",
            kind % 4,
            t.triangles().len(),
            t.edges().len()
        ));
    }
    for (k, tri) in t.triangles().iter().enumerate() {
        let [a, b, c] = *tri;
        if let Some(p) = (0..n).find(|&p| p != a && p != b && p != c && in_circumcircle(pts[a], pts[b], pts[c], pts[p], true)) {
            return Err(format!("n={n} kind={}: point {p} inside circumcircle of triangle {k}", kind % 4));
        }
    }
    Ok(())
}

fn check_trace(seed: u64) -> Result<(), String> {
    let mut rng = seeded_rng(seed);
    let n = rng.random_range(3..=200usize);
    let pts = random_points(&mut rng, n);
    let t = Triangulation::build(&pts).map_err(|e| e.to_string())?;
    let ball = Ball { center: Point2::new(1.4 * uniform(&mut rng) - 0.2, 1.4 * uniform(&mut rng) - 0.2), radius: 0.01 + 0.8 * uniform(&mut rng) };
    if t.trace_in_ball(&ball).is_connected() {
        Ok(())
    } else {
        Err(format!("n={n}: trace in ball at ({}, {}) radius {} is disconnected", ball.center.x, ball.center.y, ball.radius))
    }
}

fn check_half_disk(seed: u64) -> Result<(), String> {
    let mut rng = seeded_rng(seed);
    let n = rng.random_range(3..=200usize);
    let pts = random_points(&mut rng, n);
    let t = Triangulation::build(&pts).map_err(|e| e.to_string())?;
    for e in t.edges() {
        if empty_half_disk(pts[e.u], pts[e.v], &pts) == HalfDiskStatus::Neither {
            return Err(format!("n={n}: edge ({}, {}) has no empty half-disk", e.u, e.v));
        }
    }
    Ok(())
}

fn check_coverage(seed: u64) -> Result<(), String> {
    let mut rng = seeded_rng(seed);
    let ell = 0.01 + 20.0 * uniform(&mut rng);
    let r = 0.05 + 10.0 * uniform(&mut rng);
    let x = ell * uniform(&mut rng);
    let y = x + (ell - x) * uniform(&mut rng);
    let err = |e: crate::coverage1d::CoverageError| e.to_string();
    let fx = phi(x, x, ell, r).map_err(err)?;
    let sx = psi(x, x, ell, r).map_err(err)?;
    let fy = phi(x, y, ell, r).map_err(err)?;
    let sy = psi(x, y, ell, r).map_err(err)?;
    let tag = format!("x={x}, y={y}, ell={ell}, r={r}");
    if (fx + sx - 1.0).abs() > 1e-12 {
        return Err(format!("{tag}: phi + psi = {}", fx + sx));
    }
    if !(w(ell, 2.0 * r) <= fx + 1e-15 && fx <= w(ell, r) + 1e-15) {
        return Err(format!("{tag}: phi(x, x) = {fx} outside [{}, {}]", w(ell, 2.0 * r), w(ell, r)));
    }
    if fy > fx + 1e-15 || sy > sx + 1e-15 {
        return Err(format!("{tag}: widening [x, y] raised phi or psi"));
    }
    Ok(())
}

fn check_coupling(seed: u64) -> Result<(), String> {
    let mut rng = seeded_rng(seed);
    let bx = AxisBox::new(Point2::new(0.0, 0.0), 6.0);
    let pts = sample_ppp(&bx.inflate(2.0), 1.0, derive_seed(seed, Stream::Points, 0));
    let t = Triangulation::build(&pts).map_err(|e| e.to_string())?;
    let marks = Marks::new(&t, seed);
    let mut pair = |lo: f64, hi: f64| {
        let a = lo + (hi - lo) * uniform(&mut rng);
        let b = lo + (hi - lo) * uniform(&mut rng);
        (a.min(b), a.max(b))
    };
    let (p1, p2) = pair(0.3, 1.0);
    let (l1, l2) = pair(0.0, 4.0);
    let (r1, r2) = pair(0.2, 4.0);
    let r2 = if r2 > 3.5 { Range::Infinite } else { Range::Finite(r2) };
    let r1 = Range::Finite(r1);
    let cox = CoxSample::sample(&t, &marks, l2);
    let cross = |p: f64, l: f64, r: Range| -> Result<bool, String> {
        let pr = ModelParams::new(p, l, r).map_err(|e| e.to_string())?;
        let g = build_graph(&t, &marks, &cox, &pr).map_err(|e| e.to_string())?;
        Ok(crosses_box(&g, &bx, Axis::Horizontal))
    };
    let low = cross(p1, l1, r1)?;
    for (name, up) in [("p", cross(p2, l1, r1)?), ("lambda", cross(p1, l2, r1)?), ("r", cross(p1, l1, r2)?)] {
        if low && !up {
            return Err(format!("raising {name} from (p={p1}, lambda={l1}, r={r1}) to (p={p2}, lambda={l2}, r={r2}) closed the crossing"));
        }
    }
    Ok(())
}

fn run_suite<F>(name: &'static str, index: u64, master: u64, cases: u64, f: F) -> FuzzRow
where
    F: Fn(u64, u64) -> Result<(), String> + Sync,
{
    let results: Vec<Result<(), String>> = (0..cases)
        .into_par_iter()
        .map(|c| f(derive_seed(master, Stream::Fuzz, (index << 32) | c), c))
        .collect();
    let failures = results.iter().filter(|r| r.is_err()).count() as u64;
    let first_counterexample = results
        .iter()
        .enumerate()
        .find_map(|(c, r)| r.as_ref().err().map(|m| format!("case {c}: {m}")));
    FuzzRow { suite: name, cases, failures, first_counterexample }
}

/// Runs the property suites. Case `c` of suite `k` is drawn from a seed
/// derived from `(master, k, c)`.
pub fn cmd_fuzz(cfg: &RunConfig) -> Result<FuzzReport, ExperimentError> {
    let master = cfg.master_seed()?;
    let cases = cfg.cases;
    let mutant = cfg.mutant;
    let rows = vec![
        run_suite("delaunay_oracle", 1, master, cases, |s, _| check_oracle(s, mutant)),
        run_suite("delaunay_invariants", 2, master, cases, check_invariants),
        run_suite("trace_connectivity", 3, master, cases, |s, _| check_trace(s)),
        run_suite("half_disk", 4, master, cases, |s, _| check_half_disk(s)),
        run_suite("coverage_identities", 5, master, cases, |s, _| check_coverage(s)),
        run_suite("monotone_coupling", 6, master, cases, |s, _| check_coupling(s)),
    ];
    Ok(FuzzReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(cases: u64, mutant: Option<Mutant>) -> RunConfig {
        RunConfig { seed: Some(5), cases, mutant, ..RunConfig::default() }
    }

    #[test]
    fn oracle_on_a_square_with_center() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(2.0, 0.1), Point2::new(2.1, 2.0), Point2::new(0.0, 2.0), Point2::new(1.0, 1.0)];
        let e = brute_delaunay_edges(&pts, None);
        assert_eq!(e.len(), 8);
        assert!(e.iter().all(|&(a, b)| a != 0 || b != 2));
    }

    #[test]
    fn small_budget_passes_and_reproduces() {
        let a = cmd_fuzz(&cfg(20, None)).unwrap();
        assert_eq!(a.total_failures(), 0, "{a:?}");
        assert_eq!(a.rows.len(), 6);
        assert_eq!(a, cmd_fuzz(&cfg(20, None)).unwrap());
    }

    #[test]
    fn mutant_is_detected() {
        let r = cmd_fuzz(&cfg(20, Some(Mutant::ShrunkIncircle))).unwrap();
        let row = &r.rows[0];
        assert!(row.failures > 0);
        assert!(row.first_counterexample.as_deref().unwrap().starts_with("case "));
    }
}
