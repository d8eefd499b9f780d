//! Delaunay triangulation of a planar point set, with counterclockwise
//! incident-edge ranking, stabilization radii, edge-length measure and
//! trace-in-ball extraction.

mod build;

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::geometry::{circumdisk, orient2d, AxisBox, Ball, Disk, Point2};

/// Errors raised while building a triangulation.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DelaunayError {
    /// Fewer than three input points.
    #[error("need at least 3 points, got {count}")]
    TooFewPoints {
        /// Number of points supplied.
        count: usize,
    },
    /// Every input point lies on one line.
    #[error("all points are collinear")]
    AllCollinear,
    /// Two input points coincide.
    #[error("duplicate input point at index {index}")]
    DuplicatePoint {
        /// Index of one of the coinciding points.
        index: usize,
    },
    /// An input coordinate is NaN or infinite.
    #[error("non-finite coordinate at index {index}")]
    NonFinite {
        /// Index of the offending point.
        index: usize,
    },
}

/// An undirected edge with `u < v` and its Euclidean length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeKey {
    /// Smaller endpoint index.
    pub u: usize,
    /// Larger endpoint index.
    pub v: usize,
    /// Euclidean length.
    pub length: f64,
}

/// A Delaunay triangulation.
#[derive(Clone, Debug)]
pub struct Triangulation {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    neighbors: Vec<[Option<usize>; 3]>,
    hull: Vec<usize>,
    edges: Vec<EdgeKey>,
    incident: Vec<Vec<usize>>,
    ranks: Vec<(usize, usize)>,
}

/// The subgraph of a triangulation met by a ball.
#[derive(Clone, Debug, Default)]
pub struct TraceGraph {
    /// Vertices inside the ball followed by outer endpoints.
    pub vertices: Vec<usize>,
    /// Edges with at least one endpoint inside the ball.
    pub edges: Vec<(usize, usize)>,
    /// Number of leading entries of `vertices` lying inside the ball.
    pub inside: usize,
}

impl TraceGraph {
    /// True when the trace is empty or connected.
    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        let idx: std::collections::HashMap<usize, usize> =
            self.vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &(a, b) in &self.edges {
            adj[idx[&a]].push(idx[&b]);
            adj[idx[&b]].push(idx[&a]);
        }
        let mut seen = vec![false; self.vertices.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    queue.push_back(y);
                }
            }
        }
        count == self.vertices.len()
    }
}

/// Angular comparison of directions `a - x` and `b - x` on `[0, 2π)` measured
/// counterclockwise from the positive horizontal axis, angle 0 included.
fn angle_cmp(x: Point2, a: Point2, b: Point2) -> Ordering {
    let half = |q: Point2| {
        let d = q - x;
        if d.y > 0.0 || (d.y == 0.0 && d.x > 0.0) {
            0
        } else {
            1
        }
    };
    let (ha, hb) = (half(a), half(b));
    if ha != hb {
        return ha.cmp(&hb);
    }
    match orient2d(x, a, b) {
        Ordering::Greater => Ordering::Less,
        Ordering::Less => Ordering::Greater,
        Ordering::Equal => x.dist(a).total_cmp(&x.dist(b)),
    }
}

impl Triangulation {
    /// Builds the Delaunay triangulation of `points`.
    ///
    /// Cocircular ties are broken by a lexicographic symbolic perturbation, so
    /// the result does not depend on the input order.
    pub fn build(points: &[Point2]) -> Result<Triangulation, DelaunayError> {
        let mesh = build::Mesh::build(points.to_vec())?;
        let (vertices, triangles, neighbors, hull) = mesh.finish();
        let n = vertices.len();

        let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(3 * triangles.len());
        for t in &triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                pairs.push((a.min(b), a.max(b)));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let edges: Vec<EdgeKey> = pairs
            .iter()
            .map(|&(u, v)| EdgeKey { u, v, length: vertices[u].dist(vertices[v]) })
            .collect();

        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (e, ek) in edges.iter().enumerate() {
            incident[ek.u].push(e);
            incident[ek.v].push(e);
        }
        for (x, list) in incident.iter_mut().enumerate() {
            let px = vertices[x];
            list.sort_by(|&e1, &e2| {
                let o1 = other(&edges[e1], x);
                let o2 = other(&edges[e2], x);
                angle_cmp(px, vertices[o1], vertices[o2])
            });
        }
        let mut ranks = vec![(0usize, 0usize); edges.len()];
        for (x, list) in incident.iter().enumerate() {
            for (i, &e) in list.iter().enumerate() {
                if edges[e].u == x {
                    ranks[e].0 = i + 1;
                } else {
                    ranks[e].1 = i + 1;
                }
            }
        }
        Ok(Triangulation { vertices, triangles, neighbors, hull, edges, incident, ranks })
    }

    /// Vertex positions.
    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    /// Counterclockwise triangles as vertex index triples.
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Neighbor triangle opposite each vertex of each triangle.
    pub fn neighbors(&self) -> &[[Option<usize>; 3]] {
        &self.neighbors
    }

    /// Counterclockwise hull cycle.
    pub fn hull(&self) -> &[usize] {
        &self.hull
    }

    /// Edges sorted by `(u, v)`.
    pub fn edges(&self) -> &[EdgeKey] {
        &self.edges
    }

    /// Index of edge `{a, b}` if present.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search_by(|e| (e.u, e.v).cmp(&key)).ok()
    }

    /// Degree of vertex `v`.
    pub fn degree(&self, v: usize) -> usize {
        self.incident[v].len()
    }

    /// Edge indices incident to `v` in counterclockwise order from angle 0.
    pub fn incident_edge_ids(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    /// Incident edges of `v`, ranked counterclockwise starting at angle 0
    /// inclusive; position `i` holds rank `i + 1`.
    pub fn incident_edges_ccw(&self, v: usize) -> Vec<EdgeKey> {
        self.incident[v].iter().map(|&e| self.edges[e]).collect()
    }

    /// Rank (1-based) of edge `e` at its endpoints `(u, v)`.
    pub fn edge_ranks(&self, e: usize) -> (usize, usize) {
        self.ranks[e]
    }

    /// Neighbors of `v` in counterclockwise order.
    pub fn neighbors_ccw(&self, v: usize) -> Vec<usize> {
        self.incident[v].iter().map(|&e| other(&self.edges[e], v)).collect()
    }

    /// Circumscribed disk of triangle `t`.
    pub fn circumdisk(&self, t: usize) -> Disk {
        let [a, b, c] = self.triangles[t];
        circumdisk(self.vertices[a], self.vertices[b], self.vertices[c])
            .expect("triangulation contains a degenerate triangle")
    }

    /// Smallest `ρ ≥ 0` such that `bx ⊕ B(0, ρ)` contains the circumdisk of
    /// every triangle overlapping `bx`.
    pub fn stabilization_radius(&self, bx: &AxisBox) -> f64 {
        let mut rho = 0.0f64;
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = *tri;
            if !bx.overlaps_triangle(self.vertices[a], self.vertices[b], self.vertices[c]) {
                continue;
            }
            let d = self.circumdisk(t);
            rho = rho.max(d.radius + bx.signed_distance(d.center));
        }
        rho.max(0.0)
    }

    /// The trace of the triangulation in a ball: edges with at least one
    /// endpoint inside the closed ball.
    pub fn trace_in_ball(&self, ball: &Ball) -> TraceGraph {
        let inside: Vec<bool> = self
            .vertices
            .iter()
            .map(|p| p.dist(ball.center) <= ball.radius)
            .collect();
        let mut vertices: Vec<usize> = (0..self.vertices.len()).filter(|&v| inside[v]).collect();
        let n_inside = vertices.len();
        let mut outer = Vec::new();
        let mut edges = Vec::new();
        for e in &self.edges {
            if inside[e.u] || inside[e.v] {
                edges.push((e.u, e.v));
                for w in [e.u, e.v] {
                    if !inside[w] {
                        outer.push(w);
                    }
                }
            }
        }
        outer.sort_unstable();
        outer.dedup();
        vertices.extend(outer);
        TraceGraph { vertices, edges, inside: n_inside }
    }

    /// Total length of the edges inside `region`.
    pub fn total_edge_length(&self, region: &AxisBox) -> f64 {
        self.edges
            .iter()
            .filter_map(|e| {
                region
                    .clip_segment(self.vertices[e.u], self.vertices[e.v])
                    .map(|(t0, t1)| (t1 - t0) * e.length)
            })
            .sum()
    }

    /// Writes `<stem>_vertices.csv` and `<stem>_edges.csv`.
    pub fn dump_csv(&self, stem: &Path) -> std::io::Result<()> {
        let with_suffix = |s: &str| {
            let mut name = stem.file_name().map(|f| f.to_os_string()).unwrap_or_default();
            name.push(s);
            stem.with_file_name(name)
        };
        let mut fv = std::io::BufWriter::new(std::fs::File::create(with_suffix("_vertices.csv"))?);
        writeln!(fv, "id,x,y")?;
        for (i, p) in self.vertices.iter().enumerate() {
            writeln!(fv, "{i},{},{}", p.x, p.y)?;
        }
        let mut fe = std::io::BufWriter::new(std::fs::File::create(with_suffix("_edges.csv"))?);
        writeln!(fe, "u,v,length")?;
        for e in &self.edges {
            writeln!(fe, "{},{},{}", e.u, e.v, e.length)?;
        }
        Ok(())
    }
}

/// The endpoint of `e` other than `x`.
pub fn other(e: &EdgeKey, x: usize) -> usize {
    if e.u == x {
        e.v
    } else {
        e.u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::in_circumcircle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn random_points(n: usize, seed: u64) -> Vec<Point2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| p(rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0)).collect()
    }

    #[test]
    fn single_triangle() {
        let t = Triangulation::build(&[p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)]).unwrap();
        assert_eq!(t.triangles().len(), 1);
        assert_eq!(t.edges().len(), 3);
        assert_eq!(t.hull().len(), 3);
    }

    #[test]
    fn errors() {
        assert_eq!(
            Triangulation::build(&[p(0.0, 0.0), p(1.0, 0.0)]).unwrap_err(),
            DelaunayError::TooFewPoints { count: 2 }
        );
        assert_eq!(
            Triangulation::build(&[p(0.0, 0.0), p(1.0, 1.0), p(2.0, 2.0)]).unwrap_err(),
            DelaunayError::AllCollinear
        );
        assert!(matches!(
            Triangulation::build(&[p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0), p(1.0, 0.0)]),
            Err(DelaunayError::DuplicatePoint { .. })
        ));
    }

    #[test]
    fn quadrilateral_diagonal() {
        let pts = [p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0), p(0.9, 0.9)];
        let t = Triangulation::build(&pts).unwrap();
        // (0.9, 0.9) lies inside the circle through 0, 1, 2.
        assert!(in_circumcircle(pts[0], pts[1], pts[2], pts[3], true));
        assert!(t.edge_index(0, 3).is_some());
        assert!(t.edge_index(1, 2).is_none());
    }

    #[test]
    fn euler_and_empty_circle_random() {
        for seed in 0..20 {
            let pts = random_points(200, seed);
            let t = Triangulation::build(&pts).unwrap();
            let n = pts.len();
            let h = t.hull().len();
            assert_eq!(t.triangles().len(), 2 * n - 2 - h);
            assert_eq!(t.edges().len(), 3 * n - 3 - h);
            for tri in t.triangles() {
                let [a, b, c] = *tri;
                assert_eq!(orient2d(pts[a], pts[b], pts[c]), Ordering::Greater);
                for (v, &q) in pts.iter().enumerate() {
                    if v != a && v != b && v != c {
                        assert!(!in_circumcircle(pts[a], pts[b], pts[c], q, true));
                    }
                }
            }
            for (ti, nb) in t.neighbors().iter().enumerate() {
                for o in nb.iter().flatten() {
                    assert!(t.neighbors()[*o].contains(&Some(ti)));
                }
            }
        }
    }

    #[test]
    fn insertion_order_does_not_matter_on_grid() {
        let mut pts = Vec::new();
        for i in 0..7 {
            for j in 0..6 {
                pts.push(p(f64::from(i), f64::from(j)));
            }
        }
        let t1 = Triangulation::build(&pts).unwrap();
        let mut rev = pts.clone();
        rev.reverse();
        let t2 = Triangulation::build(&rev).unwrap();
        let n = pts.len();
        let map = |e: &EdgeKey| {
            let (a, b) = (n - 1 - e.u, n - 1 - e.v);
            (a.min(b), a.max(b))
        };
        let mut e1: Vec<(usize, usize)> = t1.edges().iter().map(|e| (e.u, e.v)).collect();
        let mut e2: Vec<(usize, usize)> = t2.edges().iter().map(map).collect();
        e1.sort_unstable();
        e2.sort_unstable();
        assert_eq!(e1, e2);
        let h = t1.hull().len();
        assert_eq!(h, 22);
        assert_eq!(t1.triangles().len(), 2 * n - 2 - h);
    }

    #[test]
    fn ccw_ranks() {
        let x = p(0.0, 0.0);
        let deg = |a: f64| p(a.to_radians().cos() * 2.0, a.to_radians().sin() * 2.0);
        let pts = [x, deg(10.0), deg(100.0), deg(350.0), deg(225.0)];
        let t = Triangulation::build(&pts).unwrap();
        assert_eq!(t.neighbors_ccw(0), vec![1, 2, 4, 3]);
        let pts0 = [x, p(1.0, 0.0), p(-1.0, 1.0), p(-1.0, -1.0)];
        let t0 = Triangulation::build(&pts0).unwrap();
        assert_eq!(t0.neighbors_ccw(0)[0], 1);
        let e = t0.edge_index(0, 1).unwrap();
        assert_eq!(t0.edge_ranks(e).0, 1);
    }

    #[test]
    fn stabilization_radius_single_triangle() {
        let pts = [p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)];
        let t = Triangulation::build(&pts).unwrap();
        let bx = AxisBox::new(p(0.25, 0.25), 0.5);
        let d = t.circumdisk(0);
        // Center (0.5, 0.5) is the box corner.
        let expect = d.radius;
        let small = AxisBox::new(p(0.1, 0.1), 0.2);
        let expect_small = d.radius + 0.3 * 2f64.sqrt();
        assert!((t.stabilization_radius(&small) - expect_small).abs() < 1e-12);
        assert!((t.stabilization_radius(&bx) - expect).abs() < 1e-12);
        let big = AxisBox::new(p(0.5, 0.5), 10.0);
        assert_eq!(t.stabilization_radius(&big), 0.0);
    }

    #[test]
    fn trace_and_length() {
        let pts = random_points(100, 3);
        let t = Triangulation::build(&pts).unwrap();
        let all = t.trace_in_ball(&Ball { center: p(5.0, 5.0), radius: 100.0 });
        assert_eq!(all.edges.len(), t.edges().len());
        assert!(all.is_connected());
        let far = AxisBox::new(p(100.0, 100.0), 1.0);
        assert_eq!(t.total_edge_length(&far), 0.0);
        let e = t.edges()[0];
        let whole = AxisBox::new(p(5.0, 5.0), 100.0);
        let total: f64 = t.edges().iter().map(|e| e.length).sum();
        assert!((t.total_edge_length(&whole) - total).abs() < 1e-9);
        assert!(e.length > 0.0);
    }
}
