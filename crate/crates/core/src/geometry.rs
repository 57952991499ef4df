//! Convex rate regions in the plane.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Vertices closer than this in both coordinates are merged.
pub const VERTEX_DEDUP_TOL: f64 = 1e-8;
/// Slack allowed when testing membership against a halfplane.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
const COLLINEAR_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
}

impl RatePair {
    pub const ORIGIN: RatePair = RatePair { r1: 0.0, r2: 0.0 };

    pub fn new(r1: f64, r2: f64) -> Self {
        RatePair { r1, r2 }
    }

    fn close(self, other: RatePair, tol: f64) -> bool {
        (self.r1 - other.r1).abs() <= tol && (self.r2 - other.r2).abs() <= tol
    }
}

/// `a·R1 + b·R2 ≤ c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfplane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Halfplane {
    fn normalized(a: f64, b: f64, c: f64) -> Self {
        let norm = a.hypot(b);
        Halfplane { a: a / norm, b: b / norm, c: c / norm }
    }

    pub fn value(&self, p: RatePair) -> f64 {
        self.a * p.r1 + self.b * p.r2 - self.c
    }

    pub fn contains(&self, p: RatePair, tol: f64) -> bool {
        self.value(p) <= tol
    }

    /// Point where segment `p → q` crosses the boundary line.
    fn crossing(&self, p: RatePair, q: RatePair) -> RatePair {
        let (vp, vq) = (self.value(p), self.value(q));
        let t = vp / (vp - vq);
        RatePair::new(p.r1 + t * (q.r1 - p.r1), p.r2 + t * (q.r2 - p.r2))
    }
}

fn cross(o: RatePair, a: RatePair, b: RatePair) -> f64 {
    (a.r1 - o.r1) * (b.r2 - o.r2) - (a.r2 - o.r2) * (b.r1 - o.r1)
}

/// Convex polygon containing the origin, vertices counterclockwise from the
/// lexicographically smallest one. May degenerate to a segment or a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    vertices: Vec<RatePair>,
    halfplanes: Vec<Halfplane>,
}

impl RateRegion {
    pub fn origin() -> Self {
        Self::from_points(std::iter::empty())
    }

    /// Convex hull of the given points together with the origin; negative
    /// coordinates (roundoff in `χ`) are clamped to zero.
    pub fn from_points(points: impl IntoIterator<Item = RatePair>) -> Self {
        let mut pts: Vec<RatePair> = points
            .into_iter()
            .map(|p| RatePair::new(p.r1.max(0.0), p.r2.max(0.0)))
            .chain(std::iter::once(RatePair::ORIGIN))
            .collect();
        pts.sort_by(|a, b| a.r1.total_cmp(&b.r1).then(a.r2.total_cmp(&b.r2)));
        pts.dedup_by(|a, b| a.close(*b, VERTEX_DEDUP_TOL));
        let vertices = hull(&pts);
        let halfplanes = halfplanes_of(&vertices);
        RateRegion { vertices, halfplanes }
    }

    /// Lower-left closed box `[0, r1] × [0, r2]`.
    pub fn rectangle(r1: f64, r2: f64) -> Self {
        Self::from_points([RatePair::new(r1, 0.0), RatePair::new(r1, r2), RatePair::new(0.0, r2)])
    }

    pub fn vertices(&self) -> &[RatePair] {
        &self.vertices
    }

    pub fn halfplanes(&self) -> &[Halfplane] {
        &self.halfplanes
    }

    pub fn contains(&self, p: RatePair) -> bool {
        self.contains_within(p, MEMBERSHIP_TOL)
    }

    pub fn contains_within(&self, p: RatePair, tol: f64) -> bool {
        self.halfplanes.iter().all(|h| h.contains(p, tol))
    }

    /// Whether every vertex of `other` lies in `self`.
    pub fn contains_region(&self, other: &RateRegion, tol: f64) -> bool {
        other.vertices.iter().all(|&v| self.contains_within(v, tol))
    }

    /// Polygon intersection by clipping against each of `other`'s halfplanes.
    pub fn intersect(&self, other: &RateRegion) -> RateRegion {
        let mut poly = self.vertices.clone();
        for h in &other.halfplanes {
            poly = clip(&poly, h);
            if poly.is_empty() {
                break;
            }
        }
        RateRegion::from_points(poly)
    }

    /// Maximizer of `R1 + μ·R2`; ties go to the vertex with the larger `R1 + R2`.
    pub fn weighted_boundary_point(&self, mu: f64) -> RatePair {
        let score = |p: &RatePair| p.r1 + mu * p.r2;
        let best = self.vertices.iter().map(score).fold(f64::NEG_INFINITY, f64::max);
        self.vertices
            .iter()
            .filter(|p| score(p) >= best - 1e-12)
            .copied()
            .max_by(|a, b| (a.r1 + a.r2).total_cmp(&(b.r1 + b.r2)))
            .unwrap_or(RatePair::ORIGIN)
    }

    pub fn max_sum_rate(&self) -> f64 {
        self.vertices.iter().map(|p| p.r1 + p.r2).fold(0.0, f64::max)
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let (p, q) = (self.vertices[i], self.vertices[(i + 1) % n]);
                p.r1 * q.r2 - q.r1 * p.r2
            })
            .sum::<f64>()
            / 2.0
    }

    /// `R1,R2` header, one vertex per line at 1e-6 precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("R1,R2\n");
        for v in &self.vertices {
            let _ = writeln!(out, "{},{}", fmt_coord(v.r1), fmt_coord(v.r2));
        }
        out
    }

    /// Vertices of a CSV polygon as written by [`RateRegion::to_csv`].
    pub fn parse_csv(text: &str) -> Option<Vec<RatePair>> {
        let mut lines = text.lines();
        if lines.next()?.trim() != "R1,R2" {
            return None;
        }
        lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (a, b) = l.split_once(',')?;
                Some(RatePair::new(a.trim().parse().ok()?, b.trim().parse().ok()?))
            })
            .collect()
    }
}

fn fmt_coord(v: f64) -> String {
    let v = if v.abs() < 5e-7 { 0.0 } else { v };
    format!("{v:.6}")
}

/// Andrew's monotone chain on lexicographically sorted, deduplicated points.
/// Collinear points are dropped; output starts at the smallest point.
fn hull(pts: &[RatePair]) -> Vec<RatePair> {
    if pts.len() <= 2 {
        return pts.to_vec();
    }
    let mut lower: Vec<RatePair> = Vec::new();
    for &p in pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= COLLINEAR_TOL {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<RatePair> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= COLLINEAR_TOL {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    let mut out: Vec<RatePair> = Vec::with_capacity(lower.len());
    for p in lower {
        if out.last().is_none_or(|q: &RatePair| !q.close(p, VERTEX_DEDUP_TOL)) {
            out.push(p);
        }
    }
    while out.len() > 1 && out[0].close(*out.last().unwrap(), VERTEX_DEDUP_TOL) {
        out.pop();
    }
    out
}

fn halfplanes_of(vertices: &[RatePair]) -> Vec<Halfplane> {
    let mut hs = vec![Halfplane { a: -1.0, b: 0.0, c: 0.0 }, Halfplane { a: 0.0, b: -1.0, c: 0.0 }];
    match vertices {
        [] => {}
        [p] => {
            hs.push(Halfplane { a: 1.0, b: 0.0, c: p.r1 });
            hs.push(Halfplane { a: 0.0, b: 1.0, c: p.r2 });
        }
        [p, q] => {
            let (dx, dy) = (q.r1 - p.r1, q.r2 - p.r2);
            // both sides of the supporting line, and caps at the endpoints
            hs.push(Halfplane::normalized(dy, -dx, dy * p.r1 - dx * p.r2));
            hs.push(Halfplane::normalized(-dy, dx, -dy * p.r1 + dx * p.r2));
            hs.push(Halfplane::normalized(dx, dy, dx * q.r1 + dy * q.r2));
            hs.push(Halfplane::normalized(-dx, -dy, -dx * p.r1 - dy * p.r2));
        }
        _ => {
            let n = vertices.len();
            for i in 0..n {
                let (p, q) = (vertices[i], vertices[(i + 1) % n]);
                let (dx, dy) = (q.r1 - p.r1, q.r2 - p.r2);
                hs.push(Halfplane::normalized(dy, -dx, dy * p.r1 - dx * p.r2));
            }
        }
    }
    hs
}

/// Sutherland–Hodgman step against one halfplane.
fn clip(poly: &[RatePair], h: &Halfplane) -> Vec<RatePair> {
    const TOL: f64 = 1e-12;
    let n = poly.len();
    if n == 1 {
        return if h.contains(poly[0], TOL) { poly.to_vec() } else { Vec::new() };
    }
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let cur = poly[i];
        let prev = poly[(i + n - 1) % n];
        let (cur_in, prev_in) = (h.contains(cur, TOL), h.contains(prev, TOL));
        if cur_in {
            if !prev_in {
                out.push(h.crossing(prev, cur));
            }
            out.push(cur);
        } else if prev_in {
            out.push(h.crossing(prev, cur));
        }
    }
    out
}

/// `max R1 + μ·R2` over the union of generated regions.
pub fn weighted_boundary_point<I>(generator: I, mu: f64) -> RatePair
where
    I: IntoIterator<Item = RateRegion>,
{
    generator
        .into_iter()
        .map(|r| r.weighted_boundary_point(mu))
        .fold(RatePair::ORIGIN, |best, p| {
            let (sb, sp) = (best.r1 + mu * best.r2, p.r1 + mu * p.r2);
            if sp > sb + 1e-12 || (sp >= sb - 1e-12 && p.r1 + p.r2 > best.r1 + best.r2) {
                p
            } else {
                best
            }
        })
}
