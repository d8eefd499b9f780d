//! Orientation and in-circle predicates with a floating-point filter and an
//! exact big-integer fallback.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{float::FloatCore, Signed, Zero};

use super::Point2;

const EPS: f64 = f64::EPSILON * 0.5;
const CCW_ERRBOUND: f64 = (3.0 + 16.0 * EPS) * EPS;
const ICC_ERRBOUND: f64 = (10.0 + 96.0 * EPS) * EPS;

/// Sign of the orientation determinant of `(a, b, c)`.
///
/// `Greater` means counterclockwise, `Less` clockwise, `Equal` collinear.
pub fn orient2d(a: Point2, b: Point2, c: Point2) -> Ordering {
    let detleft = (a.x - c.x) * (b.y - c.y);
    let detright = (a.y - c.y) * (b.x - c.x);
    let det = detleft - detright;
    let bound = CCW_ERRBOUND * (detleft.abs() + detright.abs());
    if det > bound {
        Ordering::Greater
    } else if -det > bound {
        Ordering::Less
    } else {
        orient2d_exact(a, b, c)
    }
}

/// Sign of the in-circle determinant: `Greater` iff `d` lies strictly inside
/// the circle through the counterclockwise triangle `(a, b, c)`.
pub fn incircle(a: Point2, b: Point2, c: Point2, d: Point2) -> Ordering {
    let adx = a.x - d.x;
    let ady = a.y - d.y;
    let bdx = b.x - d.x;
    let bdy = b.y - d.y;
    let cdx = c.x - d.x;
    let cdy = c.y - d.y;

    let bdxcdy = bdx * cdy;
    let cdxbdy = cdx * bdy;
    let alift = adx * adx + ady * ady;
    let cdxady = cdx * ady;
    let adxcdy = adx * cdy;
    let blift = bdx * bdx + bdy * bdy;
    let adxbdy = adx * bdy;
    let bdxady = bdx * ady;
    let clift = cdx * cdx + cdy * cdy;

    let det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
    let permanent = (bdxcdy.abs() + cdxbdy.abs()) * alift
        + (cdxady.abs() + adxcdy.abs()) * blift
        + (adxbdy.abs() + bdxady.abs()) * clift;
    let bound = ICC_ERRBOUND * permanent;
    if det > bound {
        Ordering::Greater
    } else if -det > bound {
        Ordering::Less
    } else {
        incircle_exact(a, b, c, d)
    }
}

/// In-circle test with symbolic perturbation of the lifted coordinates.
///
/// Exact zeros are resolved by raising each point on the paraboloid by
/// `eps^k`, with `k` the lexicographic rank of the point, so the answer is
/// never `Equal` unless all four points are collinear.
pub fn incircle_sos(a: Point2, b: Point2, c: Point2, d: Point2) -> Ordering {
    let s = incircle(a, b, c, d);
    if s != Ordering::Equal {
        return s;
    }
    let pts = [a, b, c, d];
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| lex_cmp(pts[i], pts[j]));
    for &i in &order {
        let mut others = [Point2::ORIGIN; 3];
        let mut k = 0;
        for (j, &q) in pts.iter().enumerate() {
            if j != i {
                others[k] = q;
                k += 1;
            }
        }
        let o = orient2d(others[0], others[1], others[2]);
        if o != Ordering::Equal {
            return if i % 2 == 0 { o } else { o.reverse() };
        }
    }
    Ordering::Equal
}

/// Lexicographic order on `(x, y)`.
pub fn lex_cmp(p: Point2, q: Point2) -> Ordering {
    p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y))
}

fn decompose(v: f64) -> (BigInt, i32) {
    let (mant, exp, sign) = FloatCore::integer_decode(v);
    let m = BigInt::from(mant) * i64::from(sign);
    (m, i32::from(exp))
}

/// Exact integer images of the given coordinates on a common dyadic grid.
fn to_common_grid(vals: &[f64]) -> Vec<BigInt> {
    let parts: Vec<(BigInt, i32)> = vals.iter().map(|&v| decompose(v)).collect();
    let emin = parts
        .iter()
        .filter(|(m, _)| !m.is_zero())
        .map(|&(_, e)| e)
        .min()
        .unwrap_or(0);
    parts
        .into_iter()
        .map(|(m, e)| if m.is_zero() { m } else { m << ((e - emin) as usize) })
        .collect()
}

fn sign_of(v: &BigInt) -> Ordering {
    if v.is_zero() {
        Ordering::Equal
    } else if v.is_positive() {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

fn orient2d_exact(a: Point2, b: Point2, c: Point2) -> Ordering {
    let g = to_common_grid(&[a.x, a.y, b.x, b.y, c.x, c.y]);
    let (ax, ay, bx, by, cx, cy) = (&g[0], &g[1], &g[2], &g[3], &g[4], &g[5]);
    let det = (ax - cx) * (by - cy) - (ay - cy) * (bx - cx);
    sign_of(&det)
}

fn incircle_exact(a: Point2, b: Point2, c: Point2, d: Point2) -> Ordering {
    let g = to_common_grid(&[a.x, a.y, b.x, b.y, c.x, c.y, d.x, d.y]);
    let adx = &g[0] - &g[6];
    let ady = &g[1] - &g[7];
    let bdx = &g[2] - &g[6];
    let bdy = &g[3] - &g[7];
    let cdx = &g[4] - &g[6];
    let cdy = &g[5] - &g[7];
    let alift = &adx * &adx + &ady * &ady;
    let blift = &bdx * &bdx + &bdy * &bdy;
    let clift = &cdx * &cdx + &cdy * &cdy;
    let det = alift * (&bdx * &cdy - &cdx * &bdy)
        + blift * (&cdx * &ady - &adx * &cdy)
        + clift * (&adx * &bdy - &bdx * &ady);
    sign_of(&det)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn orientation_basic() {
        assert_eq!(orient2d(p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)), Ordering::Greater);
        assert_eq!(orient2d(p(0.0, 0.0), p(0.0, 1.0), p(1.0, 0.0)), Ordering::Less);
        assert_eq!(orient2d(p(0.0, 0.0), p(1.0, 1.0), p(3.0, 3.0)), Ordering::Equal);
    }

    #[test]
    fn orientation_near_collinear_is_exact() {
        let a = p(0.5, 0.5);
        let b = p(12.0, 12.0);
        let c = p(24.0, 24.0);
        assert_eq!(orient2d(a, b, c), Ordering::Equal);
        let c2 = p(24.0, f64::from_bits(24.0f64.to_bits() + 1));
        assert_eq!(orient2d(a, b, c2), Ordering::Greater);
    }

    #[test]
    fn incircle_basic() {
        let (a, b, c) = (p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0));
        assert_eq!(incircle(a, b, c, p(0.5, 0.5)), Ordering::Greater);
        assert_eq!(incircle(a, b, c, p(1.0, 1.0)), Ordering::Equal);
        assert_eq!(incircle(a, b, c, p(2.0, 2.0)), Ordering::Less);
    }

    #[test]
    fn sos_breaks_cocircular_ties_consistently() {
        let sq = [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)];
        let t1 = incircle_sos(sq[0], sq[1], sq[2], sq[3]);
        let t2 = incircle_sos(sq[0], sq[2], sq[3], sq[1]);
        let t3 = incircle_sos(sq[0], sq[1], sq[3], sq[2]);
        let t4 = incircle_sos(sq[1], sq[2], sq[3], sq[0]);
        assert_ne!(t1, Ordering::Equal);
        assert_eq!(t1, t2);
        assert_eq!(t3, t4);
        assert_ne!(t1, t3);
    }
}
