//! Planar geometry primitives. Coordinates are projected meters.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

// Points travel as [x, y] pairs on the wire.
impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y] = <[f64; 2]>::deserialize(d)?;
        Ok(Point { x, y })
    }
}

/// Result of projecting a point onto a segment or polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: Point,
    pub distance: f64,
    /// Arc length from the start of the polyline to `point`.
    pub offset: f64,
}

/// Closest point on segment `a`-`b` to `p`, with the segment parameter in [0, 1].
pub fn project_on_segment(p: &Point, a: &Point, b: &Point) -> (Point, f64) {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len_sq = dx * dx + dy * dy;
    if len_sq == 0.0 {
        return (*a, 0.0);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq).clamp(0.0, 1.0);
    (a.lerp(b, t), t)
}

pub fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let (q, _) = project_on_segment(p, a, b);
    p.distance(&q)
}

fn orientation(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(p: &Point, a: &Point, b: &Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

pub fn segments_intersect(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    let o1 = orientation(a, b, c);
    let o2 = orientation(a, b, d);
    let o3 = orientation(c, d, a);
    let o4 = orientation(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(c, a, b))
        || (o2 == 0.0 && on_segment(d, a, b))
        || (o3 == 0.0 && on_segment(a, c, d))
        || (o4 == 0.0 && on_segment(b, c, d))
}

pub fn segment_segment_distance(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Length of the overlap between two segments when they are collinear, else 0.
pub fn collinear_overlap(a: &Point, b: &Point, c: &Point, d: &Point, tol: f64) -> f64 {
    let len = a.distance(b);
    if len == 0.0 {
        return 0.0;
    }
    // perpendicular distance of c and d from the line through a-b
    let cross_c = orientation(a, b, c) / len;
    let cross_d = orientation(a, b, d) / len;
    if cross_c.abs() > tol || cross_d.abs() > tol {
        return 0.0;
    }
    let ux = (b.x - a.x) / len;
    let uy = (b.y - a.y) / len;
    let tc = (c.x - a.x) * ux + (c.y - a.y) * uy;
    let td = (d.x - a.x) * ux + (d.y - a.y) * uy;
    let lo = tc.min(td).max(0.0);
    let hi = tc.max(td).min(len);
    (hi - lo).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn of(points: &[Point]) -> BBox {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        BBox { min, max }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn expand(&self, margin: f64) -> BBox {
        BBox {
            min: Point::new(self.min.x - margin, self.min.y - margin),
            max: Point::new(self.max.x + margin, self.max.y + margin),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polyline {
    pub points: Vec<Point>,
}

impl Polyline {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn length(&self) -> f64 {
        polyline_length(self)
    }

    pub fn segments(&self) -> impl Iterator<Item = (&Point, &Point)> {
        self.points.windows(2).map(|w| (&w[0], &w[1]))
    }

    pub fn first(&self) -> Point {
        self.points[0]
    }

    pub fn last(&self) -> Point {
        self.points[self.points.len() - 1]
    }

    /// Structural problems, if any: too few points, non-finite or repeated vertices.
    pub fn defect(&self) -> Option<&'static str> {
        if self.points.len() < 2 {
            return Some("polyline needs at least 2 points");
        }
        if self.points.iter().any(|p| !p.is_finite()) {
            return Some("non-finite coordinate");
        }
        if self.points.windows(2).any(|w| w[0] == w[1]) {
            return Some("consecutive points coincide");
        }
        None
    }

    pub fn project(&self, p: &Point) -> Projection {
        let mut best = Projection {
            point: self.points[0],
            distance: f64::INFINITY,
            offset: 0.0,
        };
        let mut walked = 0.0;
        for (a, b) in self.segments() {
            let seg_len = a.distance(b);
            let (q, t) = project_on_segment(p, a, b);
            let d = p.distance(&q);
            if d < best.distance {
                best = Projection {
                    point: q,
                    distance: d,
                    offset: walked + t * seg_len,
                };
            }
            walked += seg_len;
        }
        best
    }

    pub fn distance_to(&self, p: &Point) -> f64 {
        self.segments()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Point and unit tangent at arc length `offset`, clamped to the line.
    pub fn point_at(&self, offset: f64) -> (Point, Point) {
        let mut remaining = offset.max(0.0);
        let mut last = (self.points[0], Point::default());
        for (a, b) in self.segments() {
            let seg_len = a.distance(b);
            let dir = Point::new((b.x - a.x) / seg_len, (b.y - a.y) / seg_len);
            if remaining <= seg_len {
                return (a.lerp(b, remaining / seg_len), dir);
            }
            remaining -= seg_len;
            last = (*b, dir);
        }
        last
    }

    pub fn bbox(&self) -> BBox {
        BBox::of(&self.points)
    }
}

pub fn polyline_length(pl: &Polyline) -> f64 {
    pl.segments().map(|(a, b)| a.distance(b)).sum()
}

/// A simple polygon ring; the closing edge is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    pub ring: Vec<Point>,
}

impl Polygon {
    pub fn new(ring: Vec<Point>) -> Self {
        Self { ring }
    }

    pub fn rect(min: Point, max: Point) -> Self {
        Self::new(vec![
            min,
            Point::new(max.x, min.y),
            max,
            Point::new(min.x, max.y),
        ])
    }

    pub fn edges(&self) -> impl Iterator<Item = (&Point, &Point)> {
        let n = self.ring.len();
        (0..n).map(move |i| (&self.ring[i], &self.ring[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        self.edges().map(|(a, b)| a.x * b.y - b.x * a.y).sum::<f64>() / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Point {
        let a = self.signed_area();
        if a == 0.0 {
            let n = self.ring.len() as f64;
            let (sx, sy) = self
                .ring
                .iter()
                .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
            return Point::new(sx / n, sy / n);
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let cross = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * cross;
            cy += (p.y + q.y) * cross;
        }
        Point::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    pub fn bbox(&self) -> BBox {
        BBox::of(&self.ring)
    }

    pub fn boundary_distance(&self, p: &Point) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from the polygon boundary to a polyline (0 if they touch or cross).
    pub fn boundary_distance_to_polyline(&self, pl: &Polyline) -> f64 {
        let mut best = f64::INFINITY;
        for (a, b) in self.edges() {
            for (c, d) in pl.segments() {
                best = best.min(segment_segment_distance(a, b, c, d));
                if best == 0.0 {
                    return 0.0;
                }
            }
        }
        best
    }

    pub fn defect(&self) -> Option<&'static str> {
        let n = self.ring.len();
        if n < 3 {
            return Some("polygon needs at least 3 points");
        }
        if self.ring.iter().any(|p| !p.is_finite()) {
            return Some("non-finite coordinate");
        }
        let edges: Vec<_> = self.edges().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                // adjacent edges share a vertex by construction
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if segments_intersect(a, b, c, d) {
                    return Some("self-intersecting ring");
                }
            }
        }
        if self.area() == 0.0 {
            return Some("zero area");
        }
        None
    }
}

/// Even-odd containment test; points on the boundary count as inside.
pub fn point_in_polygon(p: &Point, poly: &Polygon) -> bool {
    let mut inside = false;
    for (a, b) in poly.edges() {
        if orientation(a, b, p) == 0.0 && on_segment(p, a, b) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}
