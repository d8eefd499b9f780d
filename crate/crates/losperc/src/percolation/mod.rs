//! Cluster labeling and percolation events on connectivity and street-level
//! graphs.
//!
//! The geometric realization of a cluster is the union of its connection
//! segments. On one street the segments of a local component cover the
//! interval between its first and last item, so each run of a street is one
//! piece.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delaunay::{EdgeKey, Triangulation};
use crate::geometry::{AxisBox, Point2, Side};
use crate::model::{ConnectivityGraph, NodeKind, StreetGraph};

/// Errors of the percolation layer.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum PercolationError {
    /// The simulated window does not contain the region an event depends on.
    #[error("window too small: need a box of side {needed} inside the simulated window")]
    WindowTooSmall {
        /// Side of the required box.
        needed: f64,
    },
}

/// Disjoint-set forest with path halving and union by index.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    /// `n` singletons.
    pub fn new(n: usize) -> UnionFind {
        UnionFind { parent: (0..n).collect() }
    }

    /// Representative of `a`.
    pub fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    /// Merges the sets of `a` and `b`.
    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Component labels of the nodes of a connectivity graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterLabeling {
    labels: Vec<usize>,
    count: usize,
}

impl ClusterLabeling {
    /// Label of node `i`, in `0..count()`, numbered by first appearance.
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// All labels.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of components.
    pub fn count(&self) -> usize {
        self.count
    }
}

fn compact(uf: &mut UnionFind, n: usize) -> ClusterLabeling {
    let mut map = vec![usize::MAX; n];
    let mut labels = Vec::with_capacity(n);
    let mut count = 0;
    for i in 0..n {
        let r = uf.find(i);
        if map[r] == usize::MAX {
            map[r] = count;
            count += 1;
        }
        labels.push(map[r]);
    }
    ClusterLabeling { labels, count }
}

/// Connected components of the connectivity graph.
pub fn components(g: &ConnectivityGraph) -> ClusterLabeling {
    let n = g.nodes().len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for &j in g.neighbors(i) {
            uf.union(i, j);
        }
    }
    compact(&mut uf, n)
}

/// A segment of a cluster realization with the junction ids at its ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    /// First endpoint.
    pub a: Point2,
    /// Second endpoint.
    pub b: Point2,
    /// Junction at `a` and at `b`, if the end is a crossroad.
    pub ends: [Option<usize>; 2],
    /// A node of the piece, used to read its cluster label.
    pub node: usize,
}

/// Pieces of the connectivity graph, one per street run of two or more items;
/// junctions are crossroad node ids.
pub fn connectivity_pieces(g: &ConnectivityGraph) -> Vec<Piece> {
    let mut out = Vec::new();
    let is_crossroad = |id: usize| matches!(g.nodes()[id].kind, NodeKind::Crossroad { .. });
    for e in 0..g.street_count() {
        let st = g.street(e);
        let k = st.nodes.len();
        let mut i = 0;
        while i < k {
            let mut j = i + 1;
            while j < k && st.comp[j] == st.comp[i] {
                j += 1;
            }
            if j - i >= 2 {
                let (first, last) = (st.nodes[i], st.nodes[j - 1]);
                out.push(Piece {
                    a: g.nodes()[first].pos,
                    b: g.nodes()[last].pos,
                    ends: [is_crossroad(first).then_some(first), is_crossroad(last).then_some(last)],
                    node: first,
                });
            }
            i = j;
        }
    }
    out
}

/// Pieces of a street-level graph: open edges with both endpoints open;
/// junctions are vertex ids.
pub fn street_pieces(t: &Triangulation, sg: &StreetGraph) -> Vec<Piece> {
    let v = t.vertices();
    sg.open_edges()
        .filter_map(|e| {
            let ed = t.edges()[e];
            (sg.open_vertex[ed.u] && sg.open_vertex[ed.v]).then(|| Piece {
                a: v[ed.u],
                b: v[ed.v],
                ends: [Some(ed.u), Some(ed.v)],
                node: ed.u,
            })
        })
        .collect()
}

/// Crossing direction of a box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Left side to right side.
    Horizontal,
    /// Bottom side to top side.
    Vertical,
}

impl Axis {
    /// [`Axis::Horizontal`].
    pub fn horizontal() -> Axis {
        Axis::Horizontal
    }

    fn mask(self) -> (u8, u8) {
        match self {
            Axis::Horizontal => (Side::Left.bit(), Side::Right.bit()),
            Axis::Vertical => (Side::Bottom.bit(), Side::Top.bit()),
        }
    }
}

/// Side masks of the clusters of the pieces clipped to `bx`. Clipped pieces
/// join only through junctions inside the closed box.
fn clipped_masks(pieces: &[Piece], n_junctions: usize, bx: &AxisBox) -> Vec<u8> {
    let np = pieces.len();
    let mut uf = UnionFind::new(np + n_junctions);
    let mut mask = vec![0u8; np + n_junctions];
    for (i, p) in pieces.iter().enumerate() {
        let Some((t0, m0, t1, m1)) = bx.clip_with_sides(p.a, p.b) else {
            continue;
        };
        mask[i] = m0 | m1;
        if t0 == 0.0 {
            if let Some(j) = p.ends[0] {
                uf.union(i, np + j);
            }
        }
        if t1 == 1.0 {
            if let Some(j) = p.ends[1] {
                uf.union(i, np + j);
            }
        }
    }
    let mut acc = vec![0u8; np + n_junctions];
    for (i, &m) in mask.iter().enumerate().take(np) {
        let r = uf.find(i);
        acc[r] |= m;
    }
    acc
}

fn pieces_cross(pieces: &[Piece], n_junctions: usize, bx: &AxisBox, axis: Axis) -> bool {
    let (s0, s1) = axis.mask();
    clipped_masks(pieces, n_junctions, bx).iter().any(|&m| m & s0 != 0 && m & s1 != 0)
}

/// True iff the realization inside the closed box joins its two opposite
/// sides; a single segment crossing the box counts.
pub fn crosses_box(g: &ConnectivityGraph, bx: &AxisBox, axis: Axis) -> bool {
    pieces_cross(&connectivity_pieces(g), g.nodes().len(), bx, axis)
}

/// Street-level version of [`crosses_box`].
pub fn street_crosses_box(t: &Triangulation, sg: &StreetGraph, bx: &AxisBox, axis: Axis) -> bool {
    pieces_cross(&street_pieces(t, sg), t.vertices().len(), bx, axis)
}

/// True when the closed segment meets the boundary of the closed box.
fn meets_boundary(bx: &AxisBox, a: Point2, b: Point2) -> bool {
    bx.clip_segment(a, b).is_some() && !(bx.contains_strict(a) && bx.contains_strict(b))
}

/// Per-cluster OR of `bits(piece)`, grouped by `group(piece)`.
fn grouped_bits(pieces: &[Piece], groups: usize, group: impl Fn(&Piece) -> usize, bits: impl Fn(&Piece) -> u8) -> Vec<u8> {
    let mut acc = vec![0u8; groups];
    for p in pieces {
        acc[group(p)] |= bits(p);
    }
    acc
}

/// Arm event on pieces clipped to the outer square. A path from `S_α` to
/// `S_β` stays in the closed outer square up to its first visit of `S_β`,
/// so clipping loses nothing.
fn pieces_arm(pieces: &[Piece], n_junctions: usize, inner: &AxisBox, outer: &AxisBox) -> bool {
    let np = pieces.len();
    let mut uf = UnionFind::new(np + n_junctions);
    let mut bits = vec![0u8; np];
    for (i, p) in pieces.iter().enumerate() {
        let Some((t0, m0, t1, m1)) = outer.clip_with_sides(p.a, p.b) else {
            continue;
        };
        bits[i] = (meets_boundary(inner, p.a, p.b) as u8) | (((m0 | m1) != 0) as u8) << 1;
        if t0 == 0.0 {
            if let Some(j) = p.ends[0] {
                uf.union(i, np + j);
            }
        }
        if t1 == 1.0 {
            if let Some(j) = p.ends[1] {
                uf.union(i, np + j);
            }
        }
    }
    let mut acc = vec![0u8; np + n_junctions];
    for (i, &b) in bits.iter().enumerate() {
        let r = uf.find(i);
        acc[r] |= b;
        if acc[r] == 3 {
            return true;
        }
    }
    false
}

/// `S_α ↔ S_β`: a path in the realization joins the boundary of the square
/// of side `alpha` to that of the square of side `beta` around `center`.
pub fn arm_event(g: &ConnectivityGraph, alpha: f64, beta: f64, center: Point2) -> bool {
    let (inner, outer) = (AxisBox::new(center, alpha), AxisBox::new(center, beta));
    pieces_arm(&connectivity_pieces(g), g.nodes().len(), &inner, &outer)
}

/// Street-level version of [`arm_event`].
pub fn street_arm_event(t: &Triangulation, sg: &StreetGraph, alpha: f64, beta: f64, center: Point2) -> bool {
    let (inner, outer) = (AxisBox::new(center, alpha), AxisBox::new(center, beta));
    pieces_arm(&street_pieces(t, sg), t.vertices().len(), &inner, &outer)
}

fn spanning_of(pieces: &[Piece], labeling: &ClusterLabeling, bx: &AxisBox) -> usize {
    grouped_bits(pieces, labeling.count(), |p| labeling.label(p.node), |p| bx.sides_touched(p.a, p.b))
        .iter()
        .filter(|&&m| m == 0b1111)
        .count()
}

/// Number of clusters whose realization touches all four sides of `bx`.
pub fn spanning_cluster_count(labeling: &ClusterLabeling, g: &ConnectivityGraph, bx: &AxisBox) -> usize {
    spanning_of(&connectivity_pieces(g), labeling, bx)
}

/// True iff the street graph restricted to the square of side `3n` around
/// `center` has a cycle surrounding the square of side `n`.
///
/// Edges meeting the open inner square are dropped. A cycle winds around
/// the center iff it crosses the ray `center + t e_x` an odd number of times,
/// detected as a path between the two sheets of the double cover cut along
/// that ray.
pub fn surrounding_cycle(t: &Triangulation, sg: &StreetGraph, n: f64, center: Point2) -> bool {
    let inner = AxisBox::new(center, n);
    let outer = AxisBox::new(center, 3.0 * n);
    let nv = t.vertices().len();
    let mut uf = UnionFind::new(2 * nv);
    let v = t.vertices();
    for p in street_pieces(t, sg) {
        let [Some(a), Some(b)] = p.ends else { continue };
        if !(outer.contains(p.a) && outer.contains(p.b)) || inner.segment_meets_interior(p.a, p.b) {
            continue;
        }
        if crosses_ray(v[a], v[b], center) {
            uf.union(a, nv + b);
            uf.union(nv + a, b);
        } else {
            uf.union(a, b);
            uf.union(nv + a, nv + b);
        }
    }
    (0..nv).any(|x| uf.find(x) == uf.find(nv + x))
}

/// Half-open crossing test of segment `[a, b]` with the ray from `c` in the
/// `+x` direction.
fn crosses_ray(a: Point2, b: Point2, c: Point2) -> bool {
    if (a.y > c.y) == (b.y > c.y) {
        return false;
    }
    let x = a.x + (c.y - a.y) * (b.x - a.x) / (b.y - a.y);
    x > c.x
}

/// `center` is `n`-good: the stabilization radius of the square of side `3n`
/// is below `n` and [`surrounding_cycle`] holds.
///
/// The square of side `5n` around `center` must lie inside `window`.
pub fn n_good(t: &Triangulation, sg: &StreetGraph, window: &AxisBox, n: f64, center: Point2) -> Result<bool, PercolationError> {
    let need = AxisBox::new(center, 5.0 * n);
    if !(window.contains(need.min()) && window.contains(need.max())) {
        return Err(PercolationError::WindowTooSmall { needed: 10.0 * n });
    }
    let stable = t.stabilization_radius(&AxisBox::new(center, 3.0 * n)) < n;
    Ok(stable && surrounding_cycle(t, sg, n, center))
}

/// Indicators of `n`-goodness on `{-k..k}^2`, centers at `n z`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GoodSiteField {
    /// Grid radius `k`.
    pub radius: i64,
    /// Row-major values, `z_y` outer and `z_x` inner.
    pub values: Vec<bool>,
}

impl GoodSiteField {
    /// Value at `z`.
    pub fn get(&self, zx: i64, zy: i64) -> bool {
        let w = 2 * self.radius + 1;
        self.values[((zy + self.radius) * w + zx + self.radius) as usize]
    }
}

/// The field of `n`-good sites around the origin.
pub fn good_site_field(
    t: &Triangulation,
    sg: &StreetGraph,
    window: &AxisBox,
    n: f64,
    radius: i64,
) -> Result<GoodSiteField, PercolationError> {
    let mut values = Vec::new();
    for zy in -radius..=radius {
        for zx in -radius..=radius {
            values.push(n_good(t, sg, window, n, Point2::new(n * zx as f64, n * zy as f64))?);
        }
    }
    Ok(GoodSiteField { radius, values })
}

/// An event on a street-level graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum EventSpec {
    /// Crossing of a box.
    Crossing {
        /// The box.
        bx: AxisBox,
        /// Direction.
        axis: Axis,
    },
    /// `S_α ↔ S_β` around a center.
    Arm {
        /// Inner square side.
        alpha: f64,
        /// Outer square side.
        beta: f64,
        /// Center.
        center: Point2,
    },
}

impl EventSpec {
    /// Evaluates the event.
    pub fn holds(&self, t: &Triangulation, sg: &StreetGraph) -> bool {
        self.holds_on(&street_pieces(t, sg), t.vertices().len())
    }

    fn holds_on(&self, pieces: &[Piece], n_junctions: usize) -> bool {
        match *self {
            EventSpec::Crossing { bx, axis } => pieces_cross(pieces, n_junctions, &bx, axis),
            EventSpec::Arm { alpha, beta, center } => {
                pieces_arm(pieces, n_junctions, &AxisBox::new(center, alpha), &AxisBox::new(center, beta))
            }
        }
    }

    /// The closed box the event depends on.
    pub fn region(&self) -> AxisBox {
        match *self {
            EventSpec::Crossing { bx, .. } => bx,
            EventSpec::Arm { beta, center, .. } => AxisBox::new(center, beta),
        }
    }
}

/// Edges whose state alone decides the event: it holds with the edge forced
/// open and fails with it forced closed.
///
/// Candidates are the edges with both endpoints open that meet the event's
/// box. Output is sorted by edge index.
pub fn pivotal_edges(t: &Triangulation, sg: &StreetGraph, event: &EventSpec) -> Vec<EdgeKey> {
    let region = event.region();
    let v = t.vertices();
    let nj = t.vertices().len();
    let candidates: Vec<usize> = (0..t.edges().len())
        .filter(|&e| {
            let ed = t.edges()[e];
            sg.open_vertex[ed.u] && sg.open_vertex[ed.v] && region.clip_segment(v[ed.u], v[ed.v]).is_some()
        })
        .collect();
    let piece = |e: usize| {
        let ed = t.edges()[e];
        Piece { a: v[ed.u], b: v[ed.v], ends: [Some(ed.u), Some(ed.v)], node: ed.u }
    };
    let open: Vec<usize> = candidates.iter().copied().filter(|&e| sg.open_edge[e]).collect();
    let base: Vec<Piece> = open.iter().map(|&e| piece(e)).collect();
    let now = event.holds_on(&base, nj);
    let mut out = Vec::new();
    let mut work = Vec::with_capacity(base.len() + 1);
    for &e in &candidates {
        // Only the state opposite to the current outcome can flip it.
        if sg.open_edge[e] != now {
            continue;
        }
        work.clear();
        if now {
            work.extend(open.iter().zip(&base).filter(|(&f, _)| f != e).map(|(_, p)| *p));
        } else {
            work.extend_from_slice(&base);
            work.push(piece(e));
        }
        if event.holds_on(&work, nj) != now {
            out.push(t.edges()[e]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_graph, CoxSample, Marks, ModelParams, Range};
    use crate::model::sample_ppp;
    use crate::rng::{seeded_rng, uniform};

    fn sample(seed: u64, side: f64, p: f64, lambda: f64, r: Range) -> (Triangulation, ConnectivityGraph) {
        let w = AxisBox::new(Point2::new(0.0, 0.0), side);
        let t = Triangulation::build(&sample_ppp(&w, 1.0, seed)).unwrap();
        let marks = Marks::new(&t, seed);
        let cox = CoxSample::sample(&t, &marks, lambda.max(1e-9));
        let params = ModelParams::new(p, lambda, r).unwrap();
        let g = build_graph(&t, &marks, &cox, &params).unwrap();
        (t, g)
    }

    fn street(t: &Triangulation, open: &[(usize, usize)]) -> StreetGraph {
        let mut sg = StreetGraph { open_vertex: vec![true; t.vertices().len()], open_edge: vec![false; t.edges().len()] };
        for &(a, b) in open {
            sg.open_edge[t.edge_index(a, b).expect("edge present")] = true;
        }
        sg
    }

    #[test]
    fn components_match_bfs() {
        for seed in 0..20 {
            let (_, g) = sample(seed, 8.0, 0.6, 1.0, Range::Finite(1.0));
            let lab = components(&g);
            let n = g.nodes().len();
            let mut bfs = vec![usize::MAX; n];
            let mut count = 0;
            for s in 0..n {
                if bfs[s] != usize::MAX {
                    continue;
                }
                let mut stack = vec![s];
                bfs[s] = count;
                while let Some(x) = stack.pop() {
                    for &y in g.neighbors(x) {
                        if bfs[y] == usize::MAX {
                            bfs[y] = count;
                            stack.push(y);
                        }
                    }
                }
                count += 1;
            }
            assert_eq!(lab.labels(), &bfs[..]);
            assert_eq!(lab.count(), count);
        }
        let (_, g) = sample(1, 8.0, 0.0, 0.0, Range::Finite(1.0));
        assert_eq!(components(&g).count(), 0);
    }

    #[test]
    fn full_triangle_is_one_component() {
        let t = Triangulation::build(&[Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)]).unwrap();
        let marks = Marks::new(&t, 3);
        let cox = CoxSample::sample(&t, &marks, 1e-9);
        let g = build_graph(&t, &marks, &cox, &ModelParams::new(1.0, 0.0, Range::Infinite).unwrap()).unwrap();
        assert_eq!(components(&g).count(), 1);
    }

    #[test]
    fn extreme_crossings() {
        let bx = AxisBox::new(Point2::new(0.0, 0.0), 10.0);
        for seed in 0..5 {
            let (_, g) = sample(seed, 24.0, 1.0, 0.0, Range::Infinite);
            assert!(crosses_box(&g, &bx, Axis::Horizontal));
            assert!(crosses_box(&g, &bx, Axis::Vertical));
            assert_eq!(spanning_cluster_count(&components(&g), &g, &bx), 1);
            let (_, g) = sample(seed, 24.0, 0.0, 0.0, Range::Infinite);
            assert!(!crosses_box(&g, &bx, Axis::Horizontal));
        }
    }

    #[test]
    fn clipped_arm_matches_global_labels() {
        let c = Point2::new(0.0, 0.0);
        let mut positives = 0;
        for seed in 0..40 {
            let (_, g) = sample(seed, 16.0, 0.7, 0.8, Range::Finite(1.5));
            let lab = components(&g);
            let pieces = connectivity_pieces(&g);
            let (inner, outer) = (AxisBox::new(c, 1.0), AxisBox::new(c, 6.0));
            let bits = grouped_bits(&pieces, lab.count(), |p| lab.label(p.node), |p| {
                (meets_boundary(&inner, p.a, p.b) as u8) | ((meets_boundary(&outer, p.a, p.b) as u8) << 1)
            });
            let global = bits.contains(&3);
            assert_eq!(arm_event(&g, 1.0, 6.0, c), global, "seed {seed}");
            positives += global as usize;
        }
        assert!(positives > 0);
    }

    fn path_fixture() -> (Triangulation, Vec<(usize, usize)>) {
        let pts = [
            Point2::new(-3.0, 0.0),
            Point2::new(-1.0, 0.2),
            Point2::new(1.0, -0.1),
            Point2::new(3.0, 0.05),
            Point2::new(0.0, 5.0),
            Point2::new(0.0, -5.0),
        ];
        (Triangulation::build(&pts).unwrap(), vec![(0, 1), (1, 2), (2, 3)])
    }

    #[test]
    fn constructed_path_crosses_and_breaks() {
        let (t, path) = path_fixture();
        let bx = AxisBox::new(Point2::new(0.0, 0.0), 4.0);
        let sg = street(&t, &path);
        assert!(street_crosses_box(&t, &sg, &bx, Axis::Horizontal));
        assert!(!street_crosses_box(&t, &sg, &bx, Axis::Vertical));
        let mut cut = sg.clone();
        cut.open_edge[t.edge_index(1, 2).unwrap()] = false;
        assert!(!street_crosses_box(&t, &cut, &bx, Axis::Horizontal));
        let mut closed = sg.clone();
        closed.open_vertex[1] = false;
        assert!(!street_crosses_box(&t, &closed, &bx, Axis::Horizontal));
        let empty = AxisBox::new(Point2::new(0.0, 3.0), 1.0);
        assert!(!street_crosses_box(&t, &sg, &empty, Axis::Horizontal));
    }

    #[test]
    fn single_long_street_crosses() {
        let (t, _) = path_fixture();
        let sg = street(&t, &[(0, 1)]);
        let c = Point2::new(-2.0, 0.1);
        let bx = AxisBox::new(c, 0.5);
        assert!(street_crosses_box(&t, &sg, &bx, Axis::Horizontal));
        assert!(!street_crosses_box(&t, &sg, &bx, Axis::Vertical));
        assert!(street_arm_event(&t, &sg, 0.2, 1.2, c));
        assert!(!street_arm_event(&t, &street(&t, &[]), 0.2, 1.2, c));
    }

    #[test]
    fn two_spanning_clusters() {
        // A cross inside the box and a chain of corner-cutting segments
        // outside it, joined beyond the box.
        let p = Point2::new;
        let pieces = vec![
            Piece { a: p(-2.0, 0.0), b: p(2.0, 0.0), ends: [None, None], node: 0 },
            Piece { a: p(0.0, -2.0), b: p(0.0, 2.0), ends: [None, None], node: 0 },
            Piece { a: p(-1.2, 0.6), b: p(-0.6, 1.2), ends: [None, None], node: 1 },
            Piece { a: p(0.6, -1.2), b: p(1.2, -0.6), ends: [None, None], node: 1 },
        ];
        let lab = ClusterLabeling { labels: vec![0, 1], count: 2 };
        let bx = AxisBox::new(p(0.0, 0.0), 2.0);
        assert_eq!(spanning_of(&pieces, &lab, &bx), 2);
        let lab1 = ClusterLabeling { labels: vec![0, 0], count: 1 };
        assert_eq!(spanning_of(&pieces, &lab1, &bx), 1);
    }

    fn hexagon() -> Triangulation {
        let mut pts = vec![Point2::new(0.0, 0.0)];
        for k in 0..6 {
            let a = std::f64::consts::PI / 3.0 * k as f64 + 0.1;
            pts.push(Point2::new(2.9 * a.cos(), 2.9 * a.sin()));
        }
        Triangulation::build(&pts).unwrap()
    }

    #[test]
    fn ring_surrounds_and_tree_does_not() {
        let t = hexagon();
        let ring: Vec<(usize, usize)> = (1..=6).map(|k| (k, k % 6 + 1)).collect();
        let c = Point2::new(0.0, 0.0);
        assert!(surrounding_cycle(&t, &street(&t, &ring), 2.0, c));
        let spokes: Vec<(usize, usize)> = (1..=6).map(|k| (0, k)).collect();
        assert!(!surrounding_cycle(&t, &street(&t, &spokes), 2.0, c));
        let mut broken = street(&t, &ring);
        broken.open_vertex[3] = false;
        assert!(!surrounding_cycle(&t, &broken, 2.0, c));
        // The ring leaves the square of side 3n for small n.
        assert!(!surrounding_cycle(&t, &street(&t, &ring), 1.0, c));
    }

    /// Exhaustive oracle: some edge subset is a simple cycle with nonzero
    /// winding number around the center.
    fn brute_cycle(t: &Triangulation, edges: &[usize], c: Point2) -> bool {
        let m = edges.len();
        assert!(m <= 16);
        let v = t.vertices();
        for mask in 1u32..(1 << m) {
            let chosen: Vec<EdgeKey> = (0..m).filter(|&i| mask >> i & 1 == 1).map(|i| t.edges()[edges[i]]).collect();
            let mut deg = std::collections::HashMap::new();
            for e in &chosen {
                *deg.entry(e.u).or_insert(0) += 1;
                *deg.entry(e.v).or_insert(0) += 1;
            }
            if deg.values().any(|&d| d != 2) {
                continue;
            }
            // Walk the cycle.
            let start = chosen[0].u;
            let mut prev = usize::MAX;
            let mut cur = start;
            let mut used = 0;
            let mut angle = 0.0;
            loop {
                let next = chosen
                    .iter()
                    .filter_map(|e| {
                        let o = if e.u == cur { e.v } else if e.v == cur { e.u } else { return None };
                        (o != prev).then_some(o)
                    })
                    .next()
                    .unwrap();
                let (a, b) = (v[cur] - c, v[next] - c);
                angle += a.cross(b).atan2(a.dot(b));
                used += 1;
                prev = cur;
                cur = next;
                if cur == start {
                    break;
                }
            }
            if used == chosen.len() && angle.abs() > 1.0 {
                return true;
            }
        }
        false
    }

    #[test]
    fn cut_ray_matches_exhaustive_oracle() {
        let c = Point2::new(0.0, 0.0);
        let n = 1.0;
        let inner = AxisBox::new(c, n);
        let outer = AxisBox::new(c, 3.0 * n);
        let mut checked = 0;
        let mut positives = 0;
        for seed in 0..400u64 {
            let mut rng = seeded_rng(seed);
            let k = 6 + (seed % 6) as usize;
            let pts: Vec<Point2> = (0..k)
                .map(|_| Point2::new(3.2 * uniform(&mut rng) - 1.6, 3.2 * uniform(&mut rng) - 1.6))
                .collect();
            let Ok(t) = Triangulation::build(&pts) else { continue };
            let mut sg = StreetGraph { open_vertex: vec![true; k], open_edge: vec![false; t.edges().len()] };
            for e in 0..t.edges().len() {
                sg.open_edge[e] = uniform(&mut rng) < 0.8;
            }
            let v = t.vertices();
            let kept: Vec<usize> = sg
                .open_edges()
                .filter(|&e| {
                    let ed = t.edges()[e];
                    outer.contains(v[ed.u]) && outer.contains(v[ed.v]) && !inner.segment_meets_interior(v[ed.u], v[ed.v])
                })
                .collect();
            if kept.len() > 14 {
                continue;
            }
            let got = surrounding_cycle(&t, &sg, n, c);
            assert_eq!(got, brute_cycle(&t, &kept, c), "seed {seed}");
            checked += 1;
            positives += got as usize;
        }
        assert!(checked > 200 && positives > 5, "{checked} {positives}");
    }

    #[test]
    fn n_good_requires_window() {
        let w = AxisBox::new(Point2::new(0.0, 0.0), 30.0);
        let t = Triangulation::build(&sample_ppp(&w, 1.0, 5)).unwrap();
        let all = StreetGraph { open_vertex: vec![true; t.vertices().len()], open_edge: vec![true; t.edges().len()] };
        let c = Point2::new(0.0, 0.0);
        assert!(n_good(&t, &all, &w, 7.0, c).is_err());
        let stable = t.stabilization_radius(&AxisBox::new(c, 12.0)) < 4.0;
        assert_eq!(n_good(&t, &all, &w, 4.0, c).unwrap(), stable);
        let none = StreetGraph { open_vertex: vec![false; t.vertices().len()], open_edge: vec![false; t.edges().len()] };
        assert!(!n_good(&t, &none, &w, 4.0, c).unwrap());
        let f = good_site_field(&t, &all, &w, 4.0, 1).unwrap();
        assert_eq!(f.values.len(), 9);
        assert_eq!(f.get(0, 0), stable);
    }

    #[test]
    fn path_edges_are_pivotal() {
        let (t, path) = path_fixture();
        let sg = street(&t, &path);
        let ev = EventSpec::Crossing { bx: AxisBox::new(Point2::new(0.0, 0.0), 4.0), axis: Axis::Horizontal };
        let piv = pivotal_edges(&t, &sg, &ev);
        let ids: Vec<(usize, usize)> = piv.iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(ids, vec![(0, 1), (1, 2), (2, 3)]);
        let all = street(&t, &t.edges().iter().map(|e| (e.u, e.v)).collect::<Vec<_>>());
        assert!(ev.holds(&t, &all));
        let piv_all = pivotal_edges(&t, &all, &ev);
        for e in &piv_all {
            let mut s = all.clone();
            s.open_edge[t.edge_index(e.u, e.v).unwrap()] = false;
            assert!(!ev.holds(&t, &s));
        }
    }

    #[test]
    fn pivotal_definition_replay() {
        for seed in 0..30u64 {
            let w = AxisBox::new(Point2::new(0.0, 0.0), 10.0);
            let t = Triangulation::build(&sample_ppp(&w, 1.0, seed)).unwrap();
            let mut rng = seeded_rng(seed + 100);
            let sg = StreetGraph {
                open_vertex: (0..t.vertices().len()).map(|_| uniform(&mut rng) < 0.8).collect(),
                open_edge: (0..t.edges().len()).map(|_| uniform(&mut rng) < 0.7).collect(),
            };
            let ev = EventSpec::Arm { alpha: 1.0, beta: 6.0, center: Point2::new(0.0, 0.0) };
            let piv = pivotal_edges(&t, &sg, &ev);
            for e in &piv {
                let id = t.edge_index(e.u, e.v).unwrap();
                let mut on = sg.clone();
                on.open_edge[id] = true;
                let mut off = sg.clone();
                off.open_edge[id] = false;
                assert!(ev.holds(&t, &on) && !ev.holds(&t, &off));
            }
        }
    }
}
