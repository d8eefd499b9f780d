//! Marked point processes and the graph representations built on top of a
//! Delaunay street system.
//!
//! All random marks come from the keyed generator in [`crate::rng`], so a
//! fixed master seed couples every parameter value exactly: the open-site set
//! grows with `p`, the street-user set grows with `λ` and every range grows
//! linearly with `r`.

mod graph;
mod star;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::delaunay::Triangulation;
use crate::geometry::{AxisBox, Point2};
use crate::rng::{hash_words, keyed_exp1, keyed_rng, keyed_uniform, seeded_rng, Stream};

pub use graph::{
    bernoulli_edges, build_bernoulli_edges, build_graph, build_graph_capped, build_pruned, connect,
    street_status, ConnectivityGraph, GraphNode, NodeKind, NodeRef, StreetGraph, StreetItems,
    StreetStatus,
};
pub use star::{star_grain, StarGrain};

/// Errors raised by model construction and sampling.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum ModelError {
    /// Site probability outside `[0, 1]`.
    #[error("site probability {p} is outside [0, 1]")]
    InvalidProbability {
        /// Offending value.
        p: f64,
    },
    /// Negative or non-finite user intensity.
    #[error("user intensity {lambda} must be finite and non-negative")]
    InvalidLambda {
        /// Offending value.
        lambda: f64,
    },
    /// Range scale that is not positive.
    #[error("range scale {value} must be positive")]
    InvalidRange {
        /// Offending value.
        value: f64,
    },
    /// Crossroad range scale below twice the street range scale.
    #[error("crossroad range {r_prime} is below 2r = {}", 2.0 * r)]
    CrossroadRangeTooSmall {
        /// Street range scale.
        r: f64,
        /// Crossroad range scale.
        r_prime: f64,
    },
    /// Queried intensity above the master intensity of a Cox sample.
    #[error("intensity {lambda} exceeds the master intensity {lambda_max}")]
    LambdaExceedsMaster {
        /// Queried intensity.
        lambda: f64,
        /// Master intensity.
        lambda_max: f64,
    },
    /// Coverage table has no value for an edge length.
    #[error("no coverage value for edge length {length}")]
    MissingCoverageValue {
        /// Edge length that was looked up.
        length: f64,
    },
}

/// A range scale, finite or infinite.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum Range {
    /// A finite positive scale.
    Finite(f64),
    /// Unlimited range.
    Infinite,
}

impl Range {
    /// [`Range::Infinite`].
    pub fn infinite() -> Range {
        Range::Infinite
    }

    /// True for [`Range::Infinite`].
    pub fn is_infinite(self) -> bool {
        matches!(self, Range::Infinite)
    }

    /// Numeric value, `+∞` for [`Range::Infinite`].
    pub fn value(self) -> f64 {
        match self {
            Range::Finite(r) => r,
            Range::Infinite => f64::INFINITY,
        }
    }

    /// Scaled range.
    pub fn scale(self, k: f64) -> Range {
        match self {
            Range::Finite(r) => Range::Finite(r * k),
            Range::Infinite => Range::Infinite,
        }
    }

    /// Reach `(scale / 2) * mark`.
    pub fn half_reach(self, mark: f64) -> f64 {
        match self {
            Range::Finite(r) => 0.5 * r * mark,
            Range::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Range::Finite(r) => write!(f, "{r}"),
            Range::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        if t == "inf" || t == "infinity" || t == "+inf" {
            return Ok(Range::Infinite);
        }
        let v: f64 = t.parse().map_err(|_| format!("invalid range {s:?}"))?;
        if v.is_infinite() && v > 0.0 {
            Ok(Range::Infinite)
        } else if v > 0.0 {
            Ok(Range::Finite(v))
        } else {
            Err(format!("range must be positive, got {s}"))
        }
    }
}

impl Serialize for Range {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Range::Finite(r) => s.serialize_f64(*r),
            Range::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Range {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v > 0.0 => Ok(if v.is_finite() { Range::Finite(v) } else { Range::Infinite }),
            Raw::Num(v) => Err(serde::de::Error::custom(format!("range must be positive, got {v}"))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Model parameters `(p, λ, r, r')`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelParams {
    /// Site probability.
    pub p: f64,
    /// User intensity per unit street length.
    pub lambda: f64,
    /// Street-user range scale.
    pub r: Range,
    /// Crossroad range scale.
    pub r_prime: Range,
}

impl ModelParams {
    /// Parameters with the default `r' = 2r`.
    pub fn new(p: f64, lambda: f64, r: Range) -> Result<ModelParams, ModelError> {
        Self::with_r_prime(p, lambda, r, r.scale(2.0))
    }

    /// Parameters with an explicit crossroad range scale `r' ≥ 2r`.
    pub fn with_r_prime(p: f64, lambda: f64, r: Range, r_prime: Range) -> Result<ModelParams, ModelError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ModelError::InvalidProbability { p });
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(ModelError::InvalidLambda { lambda });
        }
        for v in [r, r_prime] {
            if let Range::Finite(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(ModelError::InvalidRange { value: x });
                }
            }
        }
        match (r, r_prime) {
            (_, Range::Infinite) => {}
            (Range::Infinite, Range::Finite(rp)) => {
                return Err(ModelError::CrossroadRangeTooSmall { r: f64::INFINITY, r_prime: rp })
            }
            (Range::Finite(r), Range::Finite(rp)) => {
                if rp < 2.0 * r {
                    return Err(ModelError::CrossroadRangeTooSmall { r, r_prime: rp });
                }
            }
        }
        Ok(ModelParams { p, lambda, r, r_prime })
    }
}

/// Stable 64-bit key of a vertex derived from quantized coordinates.
pub fn vertex_key(p: Point2) -> u64 {
    let q = |v: f64| (v * 4_294_967_296.0).round() as i64 as u64;
    hash_words(&[q(p.x), q(p.y)])
}

/// Stable key of an undirected edge from its endpoint keys.
pub fn edge_key(ka: u64, kb: u64) -> u64 {
    hash_words(&[ka.min(kb), ka.max(kb)])
}

/// Keyed marks of the sites and streets of one triangulation.
#[derive(Clone, Debug)]
pub struct Marks {
    master: u64,
    vkeys: Vec<u64>,
    ekeys: Vec<u64>,
    site_v: Vec<f64>,
}

/// A vertex with its uniform mark.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkedVertex {
    /// Vertex index.
    pub vertex: usize,
    /// Uniform mark deciding whether the site is open.
    pub v: f64,
    key: u64,
    master: u64,
}

impl MarkedVertex {
    /// The exponential range mark attached to rank `rank`.
    pub fn exp_mark(&self, rank: usize) -> f64 {
        keyed_exp1(self.master, self.key, Stream::CrossroadRange, rank as u64)
    }

    /// True iff `v < p`.
    pub fn is_open(&self, p: f64) -> bool {
        self.v < p
    }
}

impl Marks {
    /// Marks of every vertex and edge of `t` under `master`.
    pub fn new(t: &Triangulation, master: u64) -> Marks {
        let vkeys: Vec<u64> = t.vertices().iter().map(|&p| vertex_key(p)).collect();
        let ekeys = t.edges().iter().map(|e| edge_key(vkeys[e.u], vkeys[e.v])).collect();
        let site_v = vkeys
            .iter()
            .map(|&k| keyed_uniform(master, k, Stream::SiteUniform, 0))
            .collect();
        Marks { master, vkeys, ekeys, site_v }
    }

    /// Master seed.
    pub fn master(&self) -> u64 {
        self.master
    }

    /// Marked view of vertex `v`.
    pub fn vertex(&self, v: usize) -> MarkedVertex {
        MarkedVertex { vertex: v, v: self.site_v[v], key: self.vkeys[v], master: self.master }
    }

    /// Uniform site mark of `v`.
    pub fn site_uniform(&self, v: usize) -> f64 {
        self.site_v[v]
    }

    /// `ℰ_{v, rank}`.
    pub fn crossroad_exp(&self, v: usize, rank: usize) -> f64 {
        keyed_exp1(self.master, self.vkeys[v], Stream::CrossroadRange, rank as u64)
    }

    /// Key of vertex `v`.
    pub fn vertex_key(&self, v: usize) -> u64 {
        self.vkeys[v]
    }

    /// Key of edge `e`.
    pub fn edge_key(&self, e: usize) -> u64 {
        self.ekeys[e]
    }

    /// Per-edge uniform used by the Bernoulli-edge representation.
    pub fn edge_uniform(&self, e: usize) -> f64 {
        keyed_uniform(self.master, self.ekeys[e], Stream::EdgeUniform, 0)
    }

    /// Open-site indicator vector at site probability `p`.
    pub fn open_sites(&self, p: f64) -> Vec<bool> {
        self.site_v.iter().map(|&v| v < p).collect()
    }
}

/// A user on a street.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreetUser {
    /// Edge index of the street.
    pub edge: usize,
    /// Distance from the endpoint `u` of the edge.
    pub offset: f64,
    /// Exponential range mark.
    pub e: f64,
    /// Thinning mark.
    pub master_u: f64,
}

/// Homogeneous Poisson point process on a window.
pub fn sample_ppp(window: &AxisBox, intensity: f64, seed: u64) -> Vec<Point2> {
    let mut rng = seeded_rng(seed);
    let mean = intensity * window.area();
    if !(mean > 0.0) {
        return Vec::new();
    }
    let n = Poisson::new(mean).expect("valid Poisson mean").sample(&mut rng) as usize;
    let lo = window.min();
    (0..n)
        .map(|_| {
            let x = lo.x + window.side * rng.random::<f64>();
            let y = lo.y + window.side * rng.random::<f64>();
            Point2::new(x, y)
        })
        .collect()
}

/// Master list of users of street `e` at intensity `lambda_max`.
///
/// Offsets are drawn from the endpoint with the smaller vertex key, then
/// expressed from `edges[e].u`, so the list does not depend on vertex
/// numbering.
pub fn sample_cox(t: &Triangulation, marks: &Marks, e: usize, lambda_max: f64) -> Vec<StreetUser> {
    let edge = t.edges()[e];
    let mean = lambda_max * edge.length;
    if !(mean > 0.0) {
        return Vec::new();
    }
    let mut rng = keyed_rng(marks.master(), marks.edge_key(e), Stream::StreetUsers);
    let n = Poisson::new(mean).expect("valid Poisson mean").sample(&mut rng) as usize;
    let flip = marks.vertex_key(edge.u) > marks.vertex_key(edge.v);
    (0..n)
        .map(|_| {
            let s = rng.random::<f64>() * edge.length;
            let mark: f64 = Exp1.sample(&mut rng);
            let master_u = rng.random::<f64>();
            let offset = if flip { edge.length - s } else { s };
            StreetUser { edge: e, offset, e: mark, master_u }
        })
        .collect()
}

/// Master Cox sample over every street of a triangulation.
#[derive(Clone, Debug)]
pub struct CoxSample {
    lambda_max: f64,
    users: Vec<Vec<StreetUser>>,
}

impl CoxSample {
    /// Samples every street at intensity `lambda_max`.
    pub fn sample(t: &Triangulation, marks: &Marks, lambda_max: f64) -> CoxSample {
        let users = (0..t.edges().len()).map(|e| sample_cox(t, marks, e, lambda_max)).collect();
        CoxSample { lambda_max, users }
    }

    /// Master intensity.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Master list of street `e`.
    pub fn master_users(&self, e: usize) -> &[StreetUser] {
        &self.users[e]
    }

    /// Users of street `e` retained at intensity `lambda`.
    pub fn users_at(&self, e: usize, lambda: f64) -> Result<Vec<StreetUser>, ModelError> {
        let keep = self.threshold(lambda)?;
        Ok(self.users[e].iter().copied().filter(|u| u.master_u < keep).collect())
    }

    /// Thinning threshold `λ / λ_max`.
    pub fn threshold(&self, lambda: f64) -> Result<f64, ModelError> {
        if lambda > self.lambda_max {
            return Err(ModelError::LambdaExceedsMaster { lambda, lambda_max: self.lambda_max });
        }
        if lambda <= 0.0 {
            return Ok(0.0);
        }
        Ok(lambda / self.lambda_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing_and_serde() {
        assert_eq!("inf".parse::<Range>().unwrap(), Range::Infinite);
        assert_eq!("2.5".parse::<Range>().unwrap(), Range::Finite(2.5));
        assert!("-1".parse::<Range>().is_err());
        let r: Range = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(r, Range::Infinite);
        let r: Range = serde_json::from_str("1.5").unwrap();
        assert_eq!(r, Range::Finite(1.5));
        assert_eq!(serde_json::to_string(&Range::Infinite).unwrap(), "\"inf\"");
    }

    #[test]
    fn params_validation() {
        let m = ModelParams::new(0.5, 1.0, Range::Finite(1.0)).unwrap();
        assert_eq!(m.r_prime, Range::Finite(2.0));
        assert!(ModelParams::new(1.5, 1.0, Range::Finite(1.0)).is_err());
        assert!(ModelParams::new(0.5, -1.0, Range::Finite(1.0)).is_err());
        assert_eq!(
            ModelParams::with_r_prime(0.5, 1.0, Range::Finite(1.0), Range::Finite(1.5)).unwrap_err(),
            ModelError::CrossroadRangeTooSmall { r: 1.0, r_prime: 1.5 }
        );
        assert!(ModelParams::with_r_prime(0.5, 1.0, Range::Finite(1.0), Range::Infinite).is_ok());
        assert!(ModelParams::with_r_prime(0.5, 1.0, Range::Infinite, Range::Finite(3.0)).is_err());
        let inf = ModelParams::new(0.5, 0.0, Range::Infinite).unwrap();
        assert_eq!(inf.r_prime, Range::Infinite);
    }

    #[test]
    fn ppp_counts_and_determinism() {
        let w = AxisBox::new(Point2::ORIGIN, 10.0);
        assert_eq!(sample_ppp(&w, 1.0, 3), sample_ppp(&w, 1.0, 3));
        assert!(sample_ppp(&AxisBox::new(Point2::ORIGIN, 0.0), 1.0, 3).is_empty());
        let reps = 2000;
        let mean = (0..reps).map(|s| sample_ppp(&w, 1.0, s).len() as f64).sum::<f64>() / reps as f64;
        assert!((mean - 100.0).abs() < 3.0 * 10.0 / (reps as f64).sqrt());
        for p in sample_ppp(&w, 1.0, 9) {
            assert!(w.contains(p));
        }
    }

    #[test]
    fn cox_thinning() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(2.0, 0.0), Point2::new(0.0, 3.0)];
        let t = Triangulation::build(&pts).unwrap();
        let e = t.edge_index(0, 1).unwrap();
        let mut total = 0usize;
        let reps = 20_000u64;
        for s in 0..reps {
            let marks = Marks::new(&t, s);
            let cs = CoxSample::sample(&t, &marks, 5.0);
            assert!(cs.users_at(e, 0.0).unwrap().is_empty());
            assert_eq!(cs.users_at(e, 5.0).unwrap(), cs.master_users(e).to_vec());
            let a = cs.users_at(e, 3.0).unwrap();
            let b = cs.users_at(e, 4.0).unwrap();
            assert!(a.iter().all(|u| b.contains(u)));
            assert!(a.iter().all(|u| (0.0..=2.0).contains(&u.offset)));
            total += a.len();
        }
        let mean = total as f64 / reps as f64;
        assert!((mean - 6.0).abs() < 3.0 * (6.0 / reps as f64).sqrt());
        let marks = Marks::new(&t, 1);
        let cs = CoxSample::sample(&t, &marks, 5.0);
        assert!(matches!(cs.users_at(e, 6.0), Err(ModelError::LambdaExceedsMaster { .. })));
    }

    #[test]
    fn marks_do_not_depend_on_vertex_order() {
        let pts = vec![
            Point2::new(0.1, 0.2),
            Point2::new(3.0, 0.5),
            Point2::new(1.0, 2.7),
            Point2::new(2.2, 1.9),
        ];
        let mut rev = pts.clone();
        rev.reverse();
        let t1 = Triangulation::build(&pts).unwrap();
        let t2 = Triangulation::build(&rev).unwrap();
        let m1 = Marks::new(&t1, 77);
        let m2 = Marks::new(&t2, 77);
        for i in 0..4 {
            assert_eq!(m1.site_uniform(i), m2.site_uniform(3 - i));
        }
        let e1 = t1.edge_index(0, 1).unwrap();
        let e2 = t2.edge_index(3, 2).unwrap();
        let c1 = CoxSample::sample(&t1, &m1, 3.0);
        let c2 = CoxSample::sample(&t2, &m2, 3.0);
        let len = t1.edges()[e1].length;
        let a: Vec<f64> = c1.master_users(e1).iter().map(|u| u.offset).collect();
        let b: Vec<f64> = c2.master_users(e2).iter().map(|u| len - u.offset).collect();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
