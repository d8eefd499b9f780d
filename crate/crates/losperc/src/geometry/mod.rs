//! Planar primitives: points, disks, axis-aligned boxes, balls, circumcircles,
//! half-disks and the clipping helpers used by the event detectors.

pub mod predicates;

use std::cmp::Ordering;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use predicates::{incircle, incircle_sos, lex_cmp, orient2d};

/// Errors raised by geometric constructions.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum GeometryError {
    /// The three points are collinear, so no circumcircle exists.
    #[error("degenerate triangle: points are collinear")]
    DegenerateTriangle,
}

/// A point of the plane with finite coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    /// Abscissa.
    pub x: f64,
    /// Ordinate.
    pub y: f64,
}

impl Point2 {
    /// The origin.
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    /// Builds a point.
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Euclidean norm of the position vector.
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Euclidean distance to `other`.
    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Dot product of position vectors.
    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// 2-D cross product `self × other`.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    /// Point on the segment `[self, other]` at parameter `t`.
    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(self.x + t * (other.x - self.x), self.y + t * (other.y - self.y))
    }

    /// True when both coordinates are finite.
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// A closed disk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    /// Center.
    pub center: Point2,
    /// Radius, nonnegative.
    pub radius: f64,
}

/// The square `center + [-side/2, side/2]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    /// Center of the square.
    pub center: Point2,
    /// Side length, positive.
    pub side: f64,
}

/// A Euclidean ball, used for trace extraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball {
    /// Center.
    pub center: Point2,
    /// Radius, positive.
    pub radius: f64,
}

/// One side of an axis box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    /// `x = min_x`.
    Left,
    /// `x = max_x`.
    Right,
    /// `y = min_y`.
    Bottom,
    /// `y = max_y`.
    Top,
}

impl Side {
    /// All four sides.
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// Bit used in side masks.
    pub fn bit(self) -> u8 {
        match self {
            Side::Left => 1,
            Side::Right => 2,
            Side::Bottom => 4,
            Side::Top => 8,
        }
    }
}

impl AxisBox {
    /// Builds a box from its center and side.
    pub fn new(center: Point2, side: f64) -> Self {
        Self { center, side }
    }

    /// Half of the side.
    pub fn half(&self) -> f64 {
        0.5 * self.side
    }

    /// Lower-left corner.
    pub fn min(&self) -> Point2 {
        Point2::new(self.center.x - self.half(), self.center.y - self.half())
    }

    /// Upper-right corner.
    pub fn max(&self) -> Point2 {
        Point2::new(self.center.x + self.half(), self.center.y + self.half())
    }

    /// Area of the box.
    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    /// Closed membership.
    pub fn contains(&self, p: Point2) -> bool {
        let h = self.half();
        (p.x - self.center.x).abs() <= h && (p.y - self.center.y).abs() <= h
    }

    /// Open membership.
    pub fn contains_strict(&self, p: Point2) -> bool {
        let h = self.half();
        (p.x - self.center.x).abs() < h && (p.y - self.center.y).abs() < h
    }

    /// Signed distance: positive outside, negative inside (minus the distance
    /// to the boundary).
    pub fn signed_distance(&self, p: Point2) -> f64 {
        let h = self.half();
        let dx = (p.x - self.center.x).abs() - h;
        let dy = (p.y - self.center.y).abs() - h;
        if dx <= 0.0 && dy <= 0.0 {
            dx.max(dy)
        } else {
            dx.max(0.0).hypot(dy.max(0.0))
        }
    }

    /// Box grown by `d` on every side.
    pub fn inflate(&self, d: f64) -> AxisBox {
        AxisBox::new(self.center, self.side + 2.0 * d)
    }

    /// Bit mask of the sides on which `p` lies (within the closed box).
    pub fn sides_of(&self, p: Point2) -> u8 {
        let (lo, hi) = (self.min(), self.max());
        let mut m = 0;
        if p.x <= lo.x {
            m |= Side::Left.bit();
        }
        if p.x >= hi.x {
            m |= Side::Right.bit();
        }
        if p.y <= lo.y {
            m |= Side::Bottom.bit();
        }
        if p.y >= hi.y {
            m |= Side::Top.bit();
        }
        m
    }

    /// Parameter interval `[t0, t1] ⊆ [0, 1]` of the part of segment `[a, b]`
    /// inside the closed box, if nonempty (Liang–Barsky).
    pub fn clip_segment(&self, a: Point2, b: Point2) -> Option<(f64, f64)> {
        self.clip_with_sides(a, b).map(|(t0, _, t1, _)| (t0, t1))
    }

    /// Clipping of `[a, b]` with the side masks of both clipped endpoints.
    ///
    /// Sides are read from the active clipping constraints, not recomputed
    /// from rounded coordinates.
    pub fn clip_with_sides(&self, a: Point2, b: Point2) -> Option<(f64, u8, f64, u8)> {
        let (lo, hi) = (self.min(), self.max());
        let d = b - a;
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        let mut m0 = self.sides_of(a);
        let mut m1 = self.sides_of(b);
        for (p, q, side) in [
            (-d.x, a.x - lo.x, Side::Left),
            (d.x, hi.x - a.x, Side::Right),
            (-d.y, a.y - lo.y, Side::Bottom),
            (d.y, hi.y - a.y, Side::Top),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return None;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    if r > t1 {
                        return None;
                    }
                    if r > t0 {
                        t0 = r;
                        m0 = side.bit();
                    } else if r == t0 {
                        m0 |= side.bit();
                    }
                } else {
                    if r < t0 {
                        return None;
                    }
                    if r < t1 {
                        t1 = r;
                        m1 = side.bit();
                    } else if r == t1 {
                        m1 |= side.bit();
                    }
                }
            }
        }
        let pa = a.lerp(b, t0);
        let pb = a.lerp(b, t1);
        Some((t0, m0 | self.sides_of(pa), t1, m1 | self.sides_of(pb)))
    }

    /// Bit mask of the sides touched by segment `[a, b]`.
    pub fn sides_touched(&self, a: Point2, b: Point2) -> u8 {
        match self.clip_with_sides(a, b) {
            None => 0,
            Some((_, m0, _, m1)) => m0 | m1,
        }
    }

    /// True when the closed segment `[a, b]` meets the open box.
    pub fn segment_meets_interior(&self, a: Point2, b: Point2) -> bool {
        match self.clip_segment(a, b) {
            None => false,
            Some((t0, t1)) => self.contains_strict(a.lerp(b, 0.5 * (t0 + t1))),
        }
    }

    /// Separating-axis overlap test between this closed box and the closed
    /// triangle `(a, b, c)`.
    pub fn overlaps_triangle(&self, a: Point2, b: Point2, c: Point2) -> bool {
        let (lo, hi) = (self.min(), self.max());
        let xs = [a.x, b.x, c.x];
        let ys = [a.y, b.y, c.y];
        let (txmin, txmax) = (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        let (tymin, tymax) = (ys.iter().cloned().fold(f64::INFINITY, f64::min), ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        if txmax < lo.x || txmin > hi.x || tymax < lo.y || tymin > hi.y {
            return false;
        }
        let corners = [lo, Point2::new(hi.x, lo.y), hi, Point2::new(lo.x, hi.y)];
        let tri = [a, b, c];
        for k in 0..3 {
            let p = tri[k];
            let q = tri[(k + 1) % 3];
            let n = Point2::new(-(q.y - p.y), q.x - p.x);
            let proj_tri: Vec<f64> = tri.iter().map(|v| n.dot(*v)).collect();
            let tmin = proj_tri.iter().cloned().fold(f64::INFINITY, f64::min);
            let tmax = proj_tri.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let bmin = corners.iter().map(|v| n.dot(*v)).fold(f64::INFINITY, f64::min);
            let bmax = corners.iter().map(|v| n.dot(*v)).fold(f64::NEG_INFINITY, f64::max);
            if tmax < bmin || bmax < tmin {
                return false;
            }
        }
        true
    }
}

/// Circumscribed disk of a non-degenerate triangle.
pub fn circumdisk(a: Point2, b: Point2, c: Point2) -> Result<Disk, GeometryError> {
    if orient2d(a, b, c) == Ordering::Equal {
        return Err(GeometryError::DegenerateTriangle);
    }
    let b0 = b - a;
    let c0 = c - a;
    let d = 2.0 * b0.cross(c0);
    let bb = b0.dot(b0);
    let cc = c0.dot(c0);
    let ux = (c0.y * bb - b0.y * cc) / d;
    let uy = (b0.x * cc - c0.x * bb) / d;
    let center = Point2::new(a.x + ux, a.y + uy);
    let radius = (center.dist(a) + center.dist(b) + center.dist(c)) / 3.0;
    Ok(Disk { center, radius })
}

/// Membership of `p` in `d`, strict or closed.
pub fn in_disk(p: Point2, d: &Disk, strict: bool) -> bool {
    let r = p.dist(d.center);
    if strict {
        r < d.radius
    } else {
        r <= d.radius
    }
}

/// Robust test of `p` against the circumcircle of `(a, b, c)`, in either
/// orientation.
pub fn in_circumcircle(a: Point2, b: Point2, c: Point2, p: Point2, strict: bool) -> bool {
    let o = orient2d(a, b, c);
    let s = match o {
        Ordering::Greater => incircle(a, b, c, p),
        Ordering::Less => incircle(a, c, b, p),
        Ordering::Equal => return false,
    };
    match s {
        Ordering::Greater => true,
        Ordering::Equal => !strict,
        Ordering::Less => false,
    }
}

/// Emptiness of the two half-disks with diameter `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HalfDiskStatus {
    /// Only the upper half-disk is empty.
    UpperEmpty,
    /// Only the lower half-disk is empty.
    LowerEmpty,
    /// Both half-disks are empty.
    Both,
    /// Neither half-disk is empty.
    Neither,
}

/// Classifies the half-disks of diameter `[x, y]` against `pts`.
///
/// A point `z` strictly inside the disk is upper when `det(x - y, x - z) > 0`,
/// lower when negative, and blocks both halves when it lies on the chord.
pub fn empty_half_disk(x: Point2, y: Point2, pts: &[Point2]) -> HalfDiskStatus {
    let mut upper = true;
    let mut lower = true;
    for &z in pts {
        if (z - x).dot(z - y) >= 0.0 {
            continue;
        }
        let s = (x - y).cross(x - z);
        if s > 0.0 {
            upper = false;
        } else if s < 0.0 {
            lower = false;
        } else {
            upper = false;
            lower = false;
        }
        if !upper && !lower {
            break;
        }
    }
    match (upper, lower) {
        (true, true) => HalfDiskStatus::Both,
        (true, false) => HalfDiskStatus::UpperEmpty,
        (false, true) => HalfDiskStatus::LowerEmpty,
        (false, false) => HalfDiskStatus::Neither,
    }
}

/// True when closed segments `[a, b]` and `[c, d]` intersect.
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let o1 = orient2d(a, b, c);
    let o2 = orient2d(a, b, d);
    let o3 = orient2d(c, d, a);
    let o4 = orient2d(c, d, b);
    if o1 != o2 && o3 != o4 && o1 != Ordering::Equal && o2 != Ordering::Equal
        && o3 != Ordering::Equal && o4 != Ordering::Equal
    {
        return true;
    }
    let on = |p: Point2, q: Point2, r: Point2| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    (o1 == Ordering::Equal && on(a, b, c))
        || (o2 == Ordering::Equal && on(a, b, d))
        || (o3 == Ordering::Equal && on(c, d, a))
        || (o4 == Ordering::Equal && on(c, d, b))
        || (o1 != o2 && o3 != o4)
}
