//! Acceptance suite: one pass/fail line per criterion, nonzero exit when any
//! criterion fails. Wall times are printed next to the target-machine budget.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use losperc::coverage1d::{
    cover_prob_lambda0, ghk, mc_cover, mc_phi, mc_psi, phi, psi, quad_r, w, CoverageParams, Kind,
};
use losperc::delaunay::Triangulation;
use losperc::estimate::Accumulator;
use losperc::experiments::{
    cmd_coverage1d, cmd_fuzz, cmd_russo, cmd_stab, cmd_sweep, cmd_unique, RunConfig,
};
use losperc::geometry::Point2;
use losperc::model::{build_graph, build_pruned, CoxSample, Marks, ModelParams, Range};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn cfg(seed: u64) -> RunConfig {
    RunConfig { seed: Some(seed), ..RunConfig::default() }
}

fn c1_closed_forms_vs_mc() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut bad = 0;
    for k in 0..20u64 {
        let ell = rng.random_range(0.1..10.0);
        let r = rng.random_range(0.1..5.0);
        let a = rng.random_range(0.0..ell);
        let b = rng.random_range(0.0..ell);
        let (x, y) = (f64::min(a, b), f64::max(a, b));
        let ph = mc_phi(x, y, ell, r, 100_000, 1000 + k).unwrap();
        let ps = mc_psi(x, y, ell, r, 100_000, 2000 + k).unwrap();
        for (est, exact) in [(ph, phi(x, y, ell, r).unwrap()), (ps, psi(x, y, ell, r).unwrap())] {
            // No hits (or all hits) gives a zero plug-in stderr; fall back to the binomial stderr at `exact`.
            let se = if est.stderr > 0.0 { est.stderr } else { (exact * (1.0 - exact) / est.n_samples as f64).sqrt() };
            let z = (est.value - exact).abs() / se.max(1e-300);
            worst = worst.max(z);
            if z > 3.0 {
                bad += 1;
            }
        }
    }
    outcome(bad == 0, format!("{bad}/40 outside 3σ, worst |z| = {worst:.2}"))
}

fn c2_identity_and_bounds() -> Outcome {
    let mut max_err = 0.0f64;
    let mut bound_bad = 0;
    for i in 0..10 {
        let ell = 0.01 * 3f64.powi(i);
        for j in 0..10 {
            let r = 0.02 * 2.2f64.powi(j);
            for k in 0..100 {
                let x = (ell * k as f64 / 99.0).min(ell);
                let f = phi(x, x, ell, r).unwrap();
                max_err = max_err.max((f + psi(x, x, ell, r).unwrap() - 1.0).abs());
                if !(w(ell, 2.0 * r) <= f && f <= w(ell, r)) {
                    bound_bad += 1;
                }
            }
        }
    }
    outcome(max_err <= 1e-12 && bound_bad == 0, format!("max |φ+Ψ−1| = {max_err:.1e}, bound violations {bound_bad}/10000"))
}

fn c3_lambda_zero() -> Outcome {
    let pairs = [(0.1, 1.0), (0.5, 1.0), (1.0, 1.0), (2.0, 1.0), (4.0, 1.0), (1.0, 0.3), (1.0, 3.0), (3.0, 0.7), (6.0, 2.5), (0.2, 0.05)];
    let mut bad = 0;
    let mut worst = 0.0f64;
    for (k, &(ell, r)) in pairs.iter().enumerate() {
        let est = mc_cover(&CoverageParams::new(ell, 0.0, r).unwrap(), 100_000, 300 + k as u64);
        let exact = (-ell / r).exp() * (1.0 + ell / r);
        assert!((exact - cover_prob_lambda0(ell, r)).abs() < 1e-14);
        worst = worst.max((est.value - exact).abs() / est.stderr.max(1e-300));
        if !est.agrees_with(exact, 3.0) {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{bad}/10 outside 3σ, worst |z| = {worst:.2}"))
}

fn c4_ghk_suite() -> Outcome {
    let rs = [0.5, 1.0, 2.0, 4.0];
    let mut lines = Vec::new();
    let mut pass = true;

    let mut g2h2 = 0.0f64;
    for &r in &rs {
        for &ell in &[1e-3 * r, 0.1 * r, r, 10.0 * r, 1e3 * r] {
            let q = ghk(2, Kind::G, ell, r).unwrap() / ghk(2, Kind::H, ell, r).unwrap();
            g2h2 = g2h2.max((q / (r * r / 2.0) - 1.0).abs());
        }
    }
    pass &= g2h2 <= 1e-12;
    lines.push(format!("G2/H2=r²/2 rel err {g2h2:.1e}"));

    // Stated leading terms, as printed next to each labelled asymptotic.
    type Lead = fn(f64, f64) -> f64;
    let stated: [(&str, u8, Kind, bool, Lead); 8] = [
        ("asymptoticGtwovicinityzero", 0, Kind::G, true, |l, r| l.powi(4) / (6.0 * r.powi(3))),
        ("asymptoticGtwovicinityinfinity", 0, Kind::G, false, |l, r| 2.0 * r * r / l),
        ("asymptoticHtwoinvicinityzero", 0, Kind::H, true, |l, r| l.powi(4) / (15.0 * r.powi(5))),
        ("asymptoticHtwovicinityinfinity", 0, Kind::H, false, |l, _| 1.0 / l),
        ("asymptoticGonevicinityzero", 1, Kind::G, true, |l, r| l.powi(3) / (3.0 * r * r)),
        ("asymptoticGonevicinityinfinity", 1, Kind::G, false, |l, r| r * r / l),
        ("asymptoticHoneinvicinityzero", 1, Kind::H, true, |l, r| 2.0 * l.powi(3) / (3.0 * r.powi(4))),
        ("asymptoticHonevicinityinfinity", 1, Kind::H, false, |l, _| 1.5 / l),
    ];
    for (name, b, kind, small, lead) in stated {
        let (tol, scale) = if small { (0.01, 1e-3) } else { (0.05, 1e3) };
        let mut worst = 0.0f64;
        for &r in &rs {
            let ell = scale * r;
            worst = worst.max((ghk(b, kind, ell, r).unwrap() / lead(ell, r) - 1.0).abs());
        }
        let ok = worst <= tol;
        pass &= ok;
        lines.push(format!("{name} {} (rel err {:.3})", if ok { "ok" } else { "FAIL" }, worst));
    }

    let mut middle = (0u64, 0u64);
    let mut upper = (0u64, 0u64);
    let mut first_middle = None;
    for &r in &rs {
        for k in 0..40 {
            let ell = 0.01 * r * 2000f64.powf(k as f64 / 39.0);
            for b in 0..3u8 {
                let g = ghk(b, Kind::G, ell, r).unwrap();
                let h = ghk(b, Kind::H, ell, r).unwrap();
                let kk = ghk(b, Kind::K, ell, r).unwrap();
                for n in (2 - b as u32)..=50 {
                    let e = n as i32 - 2 + b as i32;
                    let lhs = w(ell, r).powi(e) * g;
                    let rhs = w(ell, 2.0 * r).powi(e) * h;
                    middle.0 += 1;
                    if lhs > rhs * (1.0 + 1e-12) {
                        middle.1 += 1;
                        first_middle.get_or_insert((b, n, ell, r, lhs, rhs));
                    }
                    if n % 7 == 0 || n <= 3 {
                        let rq = quad_r(b, n, ell, r).unwrap();
                        upper.0 += 1;
                        if rhs > rq * (1.0 + 1e-7) || rq > kk * (1.0 + 1e-7) {
                            upper.1 += 1;
                        }
                    }
                }
            }
        }
    }
    pass &= middle.1 == 0 && upper.1 == 0;
    lines.push(format!("middle link W_r^eG<=W_2r^eH violated at {}/{} grid points", middle.1, middle.0));
    if let Some((b, n, ell, r, lhs, rhs)) = first_middle {
        lines.push(format!("first: b={b} N={n} ell={ell:.4} r={r}: {lhs:.4e} > {rhs:.4e}"));
    }
    lines.push(format!("sandwich W_2r^eH<=R<=K violated at {}/{} grid points", upper.1, upper.0));
    outcome(pass, lines.join("; "))
}

fn c5_one_dim_inequality() -> Outcome {
    let c = RunConfig {
        ell_grid: vec![0.5, 1.0, 2.0, 4.0],
        lambda_grid: vec![0.0, 0.5, 1.0, 2.0],
        r_grid: vec![Range::Finite(0.5), Range::Finite(1.0), Range::Finite(2.0), Range::Finite(4.0)],
        samples: 100_000,
        ..cfg(55)
    };
    let rows = cmd_coverage1d(&c).unwrap();
    let bad: Vec<_> = rows.iter().filter(|r| !r.inequality_holds).collect();
    let tight = rows
        .iter()
        .map(|r| r.dlambda / (r.c_sup * (0.5 * r.lambda * r.r).exp() * r.dr).max(1e-300))
        .fold(0.0, f64::max);
    outcome(bad.is_empty() && rows.len() == 64, format!("{}/{} grid points violate; max ∂λ/(c e^(λr/2) ∂r) = {tight:.3}", bad.len(), rows.len()))
}

fn fuzz_rows() -> Vec<losperc::experiments::FuzzRow> {
    cmd_fuzz(&RunConfig { cases: 1000, ..cfg(606) }).unwrap().rows
}

fn c6_delaunay(rows: &[losperc::experiments::FuzzRow]) -> Outcome {
    let oracle = &rows[0];
    let inv = &rows[1];
    outcome(
        oracle.failures == 0 && inv.failures == 0 && oracle.cases >= 200 && inv.cases >= 1000,
        format!(
            "oracle {}/{} failing, Euler and empty circle {}/{} failing {}",
            oracle.failures,
            oracle.cases,
            inv.failures,
            inv.cases,
            oracle.first_counterexample.clone().or(inv.first_counterexample.clone()).unwrap_or_default()
        ),
    )
}

fn c7_trace(rows: &[losperc::experiments::FuzzRow]) -> Outcome {
    let t = &rows[2];
    outcome(t.failures == 0 && t.cases >= 1000, format!("connected in {}/{}", t.cases - t.failures, t.cases))
}

fn c8_half_disk(rows: &[losperc::experiments::FuzzRow]) -> Outcome {
    let t = &rows[3];
    outcome(t.failures == 0 && t.cases >= 200, format!("{} triangulations, {} with an edge lacking an empty half-disk", t.cases, t.failures))
}

fn c9_voronoi_duality() -> Outcome {
    let c = RunConfig { p_grid: vec![0.35, 0.5, 0.65], lambda: 0.0, r: Range::Infinite, window: 30.0, margin: Some(10.0), reps: 500, ..cfg(909) };
    let res = cmd_sweep(&c).unwrap();
    let v: Vec<f64> = res.rows.iter().map(|r| r.value).collect();
    outcome(
        (0.40..=0.60).contains(&v[1]) && v[0] <= 0.10 && v[2] >= 0.90,
        format!("p=0.35: {:.3}, p=0.5: {:.3} ± {:.3}, p=0.65: {:.3}; excluded {}", v[0], v[1], res.rows[1].stderr, v[2], res.rows[0].excluded),
    )
}

fn c10_monotone_coupling() -> Outcome {
    let c = RunConfig {
        p_grid: vec![0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
        lambda_grid: vec![0.0, 1.0, 2.0, 4.0, 8.0],
        r_grid: vec![Range::Finite(0.5), Range::Finite(1.0), Range::Finite(2.0), Range::Finite(4.0), Range::Infinite],
        window: 12.0,
        margin: Some(10.0),
        reps: 40,
        ..cfg(1010)
    };
    let res = cmd_sweep(&c).unwrap();
    let nontrivial = res.rows.iter().filter(|r| r.value > 0.0 && r.value < 1.0).count();
    outcome(
        res.total_violations() == 0,
        format!("{} violations over {} grid points x {} replicates ({} rows strictly between 0 and 1)", res.total_violations(), res.rows.len(), res.rows[0].n_samples, nontrivial),
    )
}

fn c11_pruned_vs_bernoulli() -> Outcome {
    let (lambda, r) = (1.0, 1.0);
    let lengths = [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0];
    let mut bad = 0;
    let mut worst = 0.0f64;
    for (k, &ell) in lengths.iter().enumerate() {
        let t = Triangulation::build(&[Point2::new(0.0, 0.0), Point2::new(ell, 0.0), Point2::new(0.5 * ell, 0.8 * ell)]).unwrap();
        let e = t.edge_index(0, 1).unwrap();
        let pr = ModelParams::new(1.0, lambda, Range::Finite(r)).unwrap();
        let hits: Vec<f64> = (0..10_000u64)
            .into_par_iter()
            .map(|s| {
                let marks = Marks::new(&t, 7_000_000 * (k as u64 + 1) + s);
                let cox = CoxSample::sample(&t, &marks, lambda);
                let sg = build_pruned(&build_graph(&t, &marks, &cox, &pr).unwrap(), &t);
                if sg.open_edge[e] {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let mut acc = Accumulator::default();
        hits.iter().for_each(|&h| acc.push(h));
        let mc = mc_cover(&CoverageParams::new(ell, lambda, r).unwrap(), 100_000, 1100 + k as u64);
        let sigma = acc.stderr().hypot(mc.stderr);
        let z = (acc.mean() - mc.value).abs() / sigma.max(1e-300);
        worst = worst.max(z);
        if z > 3.0 {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{bad}/10 lengths outside combined 3σ, worst |z| = {worst:.2}"))
}

fn c12_russo() -> Outcome {
    let point = RunConfig { p: 0.8, lambda: 0.5, r: Range::Finite(1.5), n: 6.0, reps: 10_000, table_samples: 20_000, ..cfg(1212) };
    let row = cmd_russo(&point).unwrap().remove(0);
    let grid = RunConfig {
        lambda_grid: vec![0.25, 0.5, 1.0],
        r_grid: vec![Range::Finite(1.0), Range::Finite(1.5), Range::Finite(2.0)],
        reps: 2000,
        ..point.clone()
    };
    let rows = cmd_russo(&grid).unwrap();
    let slack_bad = rows.iter().filter(|r| !(r.russo < r.bound)).count();
    let min_slack = rows.iter().map(|r| r.bound - r.russo).fold(f64::INFINITY, f64::min);
    outcome(
        row.agree && slack_bad == 0,
        format!(
            "pivotal {:.4} ± {:.4} vs FD {:.4} ± {:.4}; grid: {slack_bad}/9 without slack, min slack {min_slack:.4}",
            row.russo, row.russo_se, row.fd_lambda, row.fd_lambda_se
        ),
    )
}

fn c13_stabilization_tail() -> Outcome {
    let c = RunConfig { n_grid: vec![4.0, 8.0, 12.0], window: 48.0, reps: 2000, ..cfg(1313) };
    let res = cmd_stab(&c).unwrap();
    let v: Vec<f64> = res.rows.iter().map(|r| r.value).collect();
    let limit = 64.0 * (-9.0f64).exp() + 3.0 * res.rows[2].stderr;
    outcome(
        v[2] <= limit && v[0] >= v[1] && v[1] >= v[2],
        format!("P(R(B_n) > n) at n=4,8,12: {:.4}, {:.4}, {:.4}; limit at 12: {limit:.4}", v[0], v[1], v[2]),
    )
}

fn c14_uniqueness() -> Outcome {
    let c = RunConfig { p: 0.8, r: Range::Finite(2.0), lambda: 2.0, window: 40.0, reps: 400, ..cfg(1414) };
    let rows = cmd_unique(&c).unwrap();
    let ge2 = rows.last().unwrap();
    let hist: Vec<String> = rows.iter().map(|r| format!("{}:{:.3}", r.count, r.value)).collect();
    outcome(ge2.value <= 0.05, format!("{} (n = {})", hist.join(" "), ge2.n_samples))
}

fn c15_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"p_grid": [0.6, 0.9], "lambda_grid": [0.0, 2.0], "r": 1.0, "n": 2.0}"#).unwrap();
    let run = |cmd: &str, threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_losperc"))
            .args([cmd, "--config", "c.json", "--seed", "15", "--reps", "16", "--window", "10", "--threads", threads])
            .current_dir(dir.path())
            .output()
            .unwrap();
        if !o.status.success() {
            return Err(format!("{cmd}: {}", String::from_utf8_lossy(&o.stderr).trim()));
        }
        Ok(o.stdout)
    };
    let mut same = true;
    let mut bytes = 0;
    for cmd in ["sweep", "crossing", "unique", "stab"] {
        let runs = (run(cmd, "1"), run(cmd, "1"), run(cmd, "2"));
        let (Ok(a), Ok(b), Ok(c)) = runs else {
            let (a, b, c) = runs;
            let err = [a, b, c].into_iter().find_map(Result::err).unwrap_or_default();
            return outcome(false, format!("command failed: {err}"));
        };
        same &= a == b && a == c;
        bytes += a.len();
    }
    outcome(same, format!("4 commands rerun at 1 and 2 threads, {bytes} CSV bytes compared"))
}

type Criterion<'a> = (u32, &'static str, &'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let fuzz = fuzz_rows();
    let criteria: Vec<Criterion> = vec![
        (1, "coverage closed forms vs MC", "1 min", Box::new(c1_closed_forms_vs_mc)),
        (2, "φ+Ψ identity and W bounds", "1 s", Box::new(c2_identity_and_bounds)),
        (3, "λ=0 coverage", "1 min", Box::new(c3_lambda_zero)),
        (4, "G/H/K suite", "2 min", Box::new(c4_ghk_suite)),
        (5, "one-dimensional derivative inequality", "10 min", Box::new(c5_one_dim_inequality)),
        (6, "Delaunay correctness", "2 min", Box::new(|| c6_delaunay(&fuzz))),
        (7, "trace connectivity", "1 min", Box::new(|| c7_trace(&fuzz))),
        (8, "half-disk necessity", "1 min", Box::new(|| c8_half_disk(&fuzz))),
        (9, "Voronoi-duality crossing", "15 min", Box::new(c9_voronoi_duality)),
        (10, "monotone coupling", "10 min", Box::new(c10_monotone_coupling)),
        (11, "pruned/Bernoulli equivalence", "5 min", Box::new(c11_pruned_vs_bernoulli)),
        (12, "Russo consistency", "15 min", Box::new(c12_russo)),
        (13, "stabilization tail", "5 min", Box::new(c13_stabilization_tail)),
        (14, "uniqueness surrogate", "10 min", Box::new(c14_uniqueness)),
        (15, "CLI determinism", "1 min", Box::new(c15_determinism)),
    ];
    let mut failed = Vec::new();
    for (id, name, budget, f) in &criteria {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!("{} criterion {id:>2} {name} [{secs:.1}s, budget {budget}]: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(*id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", criteria.len());
    } else {
        println!("acceptance: {} of {} criteria fail: {failed:?}", failed.len(), criteria.len());
        std::process::exit(1);
    }
}
