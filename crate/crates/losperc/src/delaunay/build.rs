//! Incremental Bowyer–Watson insertion over a triangulation closed by ghost
//! triangles sharing one symbolic vertex at infinity.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::geometry::{incircle_sos, lex_cmp, orient2d, Point2};

use super::DelaunayError;

pub(crate) const GHOST: u32 = u32::MAX;
const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Tri {
    pub v: [u32; 3],
    pub n: [u32; 3],
    pub alive: bool,
}

impl Tri {
    fn is_ghost(&self) -> bool {
        self.v[2] == GHOST
    }

    fn edge_index(&self, a: u32, b: u32) -> usize {
        (0..3)
            .find(|&k| self.v[(k + 1) % 3] == a && self.v[(k + 2) % 3] == b)
            .expect("edge not found in triangle")
    }
}

pub(crate) struct Mesh {
    pub pts: Vec<Point2>,
    pub tris: Vec<Tri>,
    free: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
    last: u32,
}

fn hilbert_index(mut x: u32, mut y: u32, order: u32) -> u64 {
    let n = 1u32 << order;
    let mut d = 0u64;
    let mut s = n >> 1;
    while s > 0 {
        let rx = u32::from(x & s > 0);
        let ry = u32::from(y & s > 0);
        d += u64::from(s) * u64::from(s) * u64::from((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s >>= 1;
    }
    d
}

/// Insertion order following a Hilbert curve over the bounding box.
fn spatial_order(pts: &[Point2]) -> Vec<usize> {
    let (mut xmin, mut ymin, mut xmax, mut ymax) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        xmin = xmin.min(p.x);
        ymin = ymin.min(p.y);
        xmax = xmax.max(p.x);
        ymax = ymax.max(p.y);
    }
    let span = (xmax - xmin).max(ymax - ymin).max(f64::MIN_POSITIVE);
    let order = 16u32;
    let scale = f64::from((1u32 << order) - 1) / span;
    let mut keyed: Vec<(u64, usize)> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let hx = ((p.x - xmin) * scale) as u32;
            let hy = ((p.y - ymin) * scale) as u32;
            (hilbert_index(hx, hy, order), i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| lex_cmp(pts[a.1], pts[b.1])));
    keyed.into_iter().map(|(_, i)| i).collect()
}

impl Mesh {
    pub fn build(pts: Vec<Point2>) -> Result<Mesh, DelaunayError> {
        if pts.len() < 3 {
            return Err(DelaunayError::TooFewPoints { count: pts.len() });
        }
        if let Some(i) = pts.iter().position(|p| !p.is_finite()) {
            return Err(DelaunayError::NonFinite { index: i });
        }
        let mut lex: Vec<usize> = (0..pts.len()).collect();
        lex.sort_by(|&a, &b| lex_cmp(pts[a], pts[b]));
        for w in lex.windows(2) {
            if pts[w[0]] == pts[w[1]] {
                return Err(DelaunayError::DuplicatePoint { index: w[0].max(w[1]) });
            }
        }

        let order = spatial_order(&pts);
        let a = order[0];
        let b = order[1];
        let c_pos = (2..order.len())
            .find(|&k| orient2d(pts[a], pts[b], pts[order[k]]) != Ordering::Equal)
            .ok_or(DelaunayError::AllCollinear)?;
        let c = order[c_pos];

        let mut mesh = Mesh {
            pts,
            tris: Vec::new(),
            free: Vec::new(),
            stamp: Vec::new(),
            epoch: 0,
            last: 0,
        };
        mesh.seed(a as u32, b as u32, c as u32);
        for (k, &i) in order.iter().enumerate() {
            if k < 2 || k == c_pos {
                continue;
            }
            mesh.insert(i as u32);
        }
        Ok(mesh)
    }

    fn p(&self, v: u32) -> Point2 {
        self.pts[v as usize]
    }

    fn alloc(&mut self, t: Tri) -> u32 {
        if let Some(i) = self.free.pop() {
            self.tris[i as usize] = t;
            i
        } else {
            self.tris.push(t);
            self.stamp.push(0);
            (self.tris.len() - 1) as u32
        }
    }

    fn seed(&mut self, a: u32, b: u32, c: u32) {
        let (a, b, c) = if orient2d(self.p(a), self.p(b), self.p(c)) == Ordering::Greater {
            (a, b, c)
        } else {
            (a, c, b)
        };
        let mk = |v: [u32; 3]| Tri { v, n: [NONE; 3], alive: true };
        let ids = [
            self.alloc(mk([a, b, c])),
            self.alloc(mk([b, a, GHOST])),
            self.alloc(mk([c, b, GHOST])),
            self.alloc(mk([a, c, GHOST])),
        ];
        let mut edges: HashMap<(u32, u32), (u32, usize)> = HashMap::new();
        for &t in &ids {
            for k in 0..3 {
                let tv = self.tris[t as usize].v;
                edges.insert((tv[(k + 1) % 3], tv[(k + 2) % 3]), (t, k));
            }
        }
        for &t in &ids {
            for k in 0..3 {
                let tv = self.tris[t as usize].v;
                let (x, y) = (tv[(k + 1) % 3], tv[(k + 2) % 3]);
                let (o, _) = edges[&(y, x)];
                self.tris[t as usize].n[k] = o;
            }
        }
        self.last = ids[0];
    }

    fn conflicts(&self, t: u32, p: Point2) -> bool {
        let tri = &self.tris[t as usize];
        if tri.is_ghost() {
            let u = self.p(tri.v[0]);
            let w = self.p(tri.v[1]);
            match orient2d(u, w, p) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => (p - u).dot(w - u) > 0.0 && (p - w).dot(u - w) > 0.0,
            }
        } else {
            incircle_sos(self.p(tri.v[0]), self.p(tri.v[1]), self.p(tri.v[2]), p) == Ordering::Greater
        }
    }

    /// Visibility walk towards `p`; returns a triangle in conflict with `p`.
    fn locate(&self, p: Point2) -> u32 {
        let mut cur = self.last;
        if !self.tris[cur as usize].alive || self.tris[cur as usize].is_ghost() {
            cur = (0..self.tris.len() as u32)
                .find(|&t| self.tris[t as usize].alive && !self.tris[t as usize].is_ghost())
                .expect("no solid triangle");
        }
        let limit = 4 * self.tris.len() + 16;
        for offset in 0..limit {
            let tri = self.tris[cur as usize];
            if tri.is_ghost() {
                return cur;
            }
            let mut moved = false;
            for j in 0..3 {
                let k = (j + offset) % 3;
                let u = self.p(tri.v[(k + 1) % 3]);
                let w = self.p(tri.v[(k + 2) % 3]);
                if orient2d(u, w, p) == Ordering::Less {
                    cur = tri.n[k];
                    moved = true;
                    break;
                }
            }
            if !moved {
                return cur;
            }
        }
        (0..self.tris.len() as u32)
            .find(|&t| self.tris[t as usize].alive && self.conflicts(t, p))
            .expect("point location failed")
    }

    fn insert(&mut self, i: u32) {
        let p = self.p(i);
        let mut seed = self.locate(p);
        if !self.conflicts(seed, p) {
            seed = (0..self.tris.len() as u32)
                .find(|&t| self.tris[t as usize].alive && self.conflicts(t, p))
                .expect("no conflicting triangle");
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let epoch = self.epoch;

        let mut cavity = vec![seed];
        self.stamp[seed as usize] = epoch;
        let mut boundary: Vec<(u32, u32, u32)> = Vec::new();
        let mut head = 0;
        while head < cavity.len() {
            let t = cavity[head];
            head += 1;
            let tri = self.tris[t as usize];
            for k in 0..3 {
                let nb = tri.n[k];
                if self.stamp[nb as usize] == epoch {
                    continue;
                }
                if self.conflicts(nb, p) {
                    self.stamp[nb as usize] = epoch;
                    cavity.push(nb);
                } else {
                    boundary.push((tri.v[(k + 1) % 3], tri.v[(k + 2) % 3], nb));
                }
            }
        }
        // Edges of cavity triangles facing another cavity triangle are
        // interior; the stamp test above already skipped them, but a facing
        // triangle added later may have been recorded as boundary first.
        boundary.retain(|&(_, _, nb)| self.stamp[nb as usize] != epoch);

        for &t in &cavity {
            self.tris[t as usize].alive = false;
            self.free.push(t);
        }

        let mut by_start: HashMap<u32, u32> = HashMap::with_capacity(boundary.len());
        let mut by_end: HashMap<u32, u32> = HashMap::with_capacity(boundary.len());
        let mut created = Vec::with_capacity(boundary.len());
        for &(u, w, outside) in &boundary {
            let v = if u == GHOST {
                [w, i, GHOST]
            } else if w == GHOST {
                [i, u, GHOST]
            } else {
                [u, w, i]
            };
            let t = self.alloc(Tri { v, n: [NONE; 3], alive: true });
            let k = self.tris[t as usize].edge_index(u, w);
            self.tris[t as usize].n[k] = outside;
            let ko = self.tris[outside as usize].edge_index(w, u);
            self.tris[outside as usize].n[ko] = t;
            by_start.insert(u, t);
            by_end.insert(w, t);
            created.push((t, u, w));
        }
        for &(t, u, w) in &created {
            let next = by_start[&w];
            let prev = by_end[&u];
            let k1 = self.tris[t as usize].edge_index(w, i);
            self.tris[t as usize].n[k1] = next;
            let k2 = self.tris[t as usize].edge_index(i, u);
            self.tris[t as usize].n[k2] = prev;
        }
        for &(t, _, _) in &created {
            if !self.tris[t as usize].is_ghost() {
                self.last = t;
                break;
            }
        }
    }

    /// Solid triangles, their neighbors (ghosts mapped to `None`) and the
    /// counterclockwise hull cycle.
    #[allow(clippy::type_complexity)]
    pub fn finish(self) -> (Vec<Point2>, Vec<[usize; 3]>, Vec<[Option<usize>; 3]>, Vec<usize>) {
        let mut remap = vec![usize::MAX; self.tris.len()];
        let mut solid = Vec::new();
        for (t, tri) in self.tris.iter().enumerate() {
            if tri.alive && !tri.is_ghost() {
                remap[t] = solid.len();
                solid.push(t);
            }
        }
        let mut triangles = Vec::with_capacity(solid.len());
        let mut neighbors = Vec::with_capacity(solid.len());
        for &t in &solid {
            let tri = self.tris[t];
            triangles.push([tri.v[0] as usize, tri.v[1] as usize, tri.v[2] as usize]);
            let mut nb = [None; 3];
            for k in 0..3 {
                let r = remap[tri.n[k] as usize];
                if r != usize::MAX {
                    nb[k] = Some(r);
                }
            }
            neighbors.push(nb);
        }
        let mut next: HashMap<usize, usize> = HashMap::new();
        for tri in self.tris.iter().filter(|t| t.alive && t.is_ghost()) {
            next.insert(tri.v[1] as usize, tri.v[0] as usize);
        }
        let mut hull = Vec::with_capacity(next.len());
        if let Some(&start) = next.keys().min() {
            let mut v = start;
            loop {
                hull.push(v);
                v = next[&v];
                if v == start || hull.len() > next.len() {
                    break;
                }
            }
        }
        (self.pts, triangles, neighbors, hull)
    }
}
