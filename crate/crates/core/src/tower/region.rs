use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fields::Square;

/// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0: x0.min(x1), y0: y0.min(y1), x1: x0.max(x1), y1: y0.max(y1) }
    }

    /// `S_a(center)`.
    pub fn square(center: Complex64, a: f64) -> Self {
        Self::new(center.re - a, center.im - a, center.re + a, center.im + a)
    }

    pub fn from_square(sq: &Square) -> Self {
        Self::square(sq.center, sq.half_edge)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.x0, self.y0),
            Complex64::new(self.x1, self.y0),
            Complex64::new(self.x1, self.y1),
            Complex64::new(self.x0, self.y1),
        ]
    }

    pub fn contains_point(&self, z: Complex64) -> bool {
        z.re >= self.x0 && z.re <= self.x1 && z.im >= self.y0 && z.im <= self.y1
    }

    pub fn contains_rect(&self, o: &Rect, tol: f64) -> bool {
        o.x0 >= self.x0 - tol && o.x1 <= self.x1 + tol && o.y0 >= self.y0 - tol && o.y1 <= self.y1 + tol
    }

    /// Closed intersection, possibly degenerate.
    pub fn intersect(&self, o: &Rect) -> Option<Rect> {
        let r = Rect { x0: self.x0.max(o.x0), y0: self.y0.max(o.y0), x1: self.x1.min(o.x1), y1: self.y1.min(o.y1) };
        (r.x0 <= r.x1 && r.y0 <= r.y1).then_some(r)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Rect {
        Rect { x0: self.x0 + dx, y0: self.y0 + dy, x1: self.x1 + dx, y1: self.y1 + dy }
    }
}

/// Finite union of closed rectangles.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RectRegion {
    rects: Vec<Rect>,
}

impl RectRegion {
    /// Drops rectangles of zero area.
    pub fn new(rects: Vec<Rect>) -> Self {
        Self { rects: rects.into_iter().filter(|r| r.area() > 0.0).collect() }
    }

    pub fn rects(&self) -> &[Rect] {
        &self.rects
    }

    pub fn len(&self) -> usize {
        self.rects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    pub fn push(&mut self, r: Rect) {
        if r.area() > 0.0 {
            self.rects.push(r);
        }
    }

    pub fn extend(&mut self, other: &RectRegion) {
        self.rects.extend_from_slice(&other.rects);
    }

    /// Area of the union, by a sweep line over `x` with a segment tree on `y`.
    pub fn area(&self) -> f64 {
        union_area(&self.rects)
    }

    pub fn union(&self, other: &RectRegion) -> RectRegion {
        let mut r = self.clone();
        r.extend(other);
        r
    }

    /// Clips every rectangle to `bound`; the flag reports whether anything was cut.
    pub fn clip(&self, bound: &Rect) -> (RectRegion, bool) {
        let mut cut = false;
        let mut out = Vec::with_capacity(self.rects.len());
        for r in &self.rects {
            match r.intersect(bound) {
                Some(c) => {
                    cut |= c != *r;
                    out.push(c);
                }
                None => cut = true,
            }
        }
        (RectRegion::new(out), cut)
    }

    /// `m(self ∩ other)` from `m(A) + m(B) - m(A ∪ B)`.
    pub fn intersection_area(&self, other: &RectRegion) -> f64 {
        (self.area() + other.area() - self.union(other).area()).max(0.0)
    }

    /// `m(other \ self) <= tol`.
    pub fn covers(&self, other: &RectRegion, tol: f64) -> bool {
        self.union(other).area() - self.area() <= tol
    }
}

struct SegTree {
    ys: Vec<f64>,
    count: Vec<i32>,
    len: Vec<f64>,
}

impl SegTree {
    fn new(ys: Vec<f64>) -> Self {
        let n = ys.len().max(2);
        Self { ys, count: vec![0; 4 * n], len: vec![0.0; 4 * n] }
    }

    /// Adds `d` on the elementary intervals `[lo, hi)` of `ys`.
    fn update(&mut self, node: usize, l: usize, r: usize, lo: usize, hi: usize, d: i32) {
        if hi <= l || r <= lo {
            return;
        }
        if lo <= l && r <= hi {
            self.count[node] += d;
        } else {
            let m = (l + r) / 2;
            self.update(2 * node, l, m, lo, hi, d);
            self.update(2 * node + 1, m, r, lo, hi, d);
        }
        self.len[node] = if self.count[node] > 0 {
            self.ys[r] - self.ys[l]
        } else if r - l == 1 {
            0.0
        } else {
            self.len[2 * node] + self.len[2 * node + 1]
        };
    }
}

fn union_area(rects: &[Rect]) -> f64 {
    let rects: Vec<&Rect> = rects.iter().filter(|r| r.area() > 0.0).collect();
    if rects.is_empty() {
        return 0.0;
    }
    let mut ys: Vec<f64> = rects.iter().flat_map(|r| [r.y0, r.y1]).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let slot = |y: f64| ys.partition_point(|&v| v < y);
    let mut events: Vec<(f64, i32, usize, usize)> = Vec::with_capacity(2 * rects.len());
    for r in &rects {
        let (lo, hi) = (slot(r.y0), slot(r.y1));
        events.push((r.x0, 1, lo, hi));
        events.push((r.x1, -1, lo, hi));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let segments = ys.len() - 1;
    let mut tree = SegTree::new(ys);
    let mut area = 0.0;
    let mut last_x = events[0].0;
    for (x, d, lo, hi) in events {
        area += tree.len[1] * (x - last_x);
        last_x = x;
        tree.update(1, 0, segments, lo, hi, d);
    }
    area
}
