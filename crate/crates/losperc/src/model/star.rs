use crate::delaunay::{other, Triangulation};
use crate::geometry::Point2;

use super::{Marks, Range};

/// A star grain: polygon of truncated spokes around a vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct StarGrain {
    /// Center vertex.
    pub center: usize,
    /// Polygon vertices `y_k(x)` in counterclockwise order.
    pub polygon: Vec<Point2>,
}

impl StarGrain {
    /// True when `p` lies in the closed star-shaped region.
    pub fn contains(&self, center: Point2, p: Point2) -> bool {
        let tol = 1e-12 * (1.0 + center.norm() + p.norm());
        if p.dist(center) <= tol {
            return true;
        }
        let k = self.polygon.len();
        (0..k).any(|i| {
            let a = self.polygon[i];
            let b = self.polygon[(i + 1) % k];
            in_triangle(center, a, b, p, tol)
        })
    }
}

fn in_triangle(a: Point2, b: Point2, c: Point2, p: Point2, tol: f64) -> bool {
    let scale = |u: Point2, v: Point2| tol * (1.0 + u.dist(v) * (u.dist(p) + v.dist(p)));
    let d1 = (b - a).cross(p - a);
    let d2 = (c - b).cross(p - b);
    let d3 = (a - c).cross(p - c);
    let neg = d1 < -scale(a, b) || d2 < -scale(b, c) || d3 < -scale(c, a);
    let pos = d1 > scale(a, b) || d2 > scale(b, c) || d3 > scale(c, a);
    let area = (b - a).cross(c - a);
    if area.abs() <= tol {
        let on = |u: Point2, v: Point2| {
            (v - u).cross(p - u).abs() <= scale(u, v) && (p - u).dot(p - v) <= tol * (1.0 + u.dist(v).powi(2))
        };
        return on(a, b) || on(b, c) || on(a, c);
    }
    !(neg && pos)
}

/// Star grain of vertex `v` at range scale `r`.
///
/// Spoke `k` runs from `x` towards its `k`-th counterclockwise neighbor `y_k`
/// with length `(r/2) ℰ_{x,k}`, truncated at `y_k`.
pub fn star_grain(t: &Triangulation, v: usize, r: Range, marks: &Marks) -> StarGrain {
    let x = t.vertices()[v];
    let polygon = t
        .incident_edge_ids(v)
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let y = t.vertices()[other(&t.edges()[e], v)];
            let len = x.dist(y);
            let reach = r.half_reach(marks.crossroad_exp(v, i + 1));
            if reach >= len {
                y
            } else {
                x.lerp(y, reach / len)
            }
        })
        .collect();
    StarGrain { center: v, polygon }
}
