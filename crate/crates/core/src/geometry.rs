//! Planar convex geometry: world-space footprints, overlap tests,
//! minimum-translation vectors and separation distances.
//!
//! Polygons are vertex lists in counter-clockwise order. A two-vertex list is
//! treated as a degenerate polygon (a segment), which lets the same routines
//! handle swept tip corridors.

use nalgebra::Vector2;

pub type Vec2 = Vector2<f64>;

pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Rotate `v` counter-clockwise by `angle` radians.
pub fn rotate(v: &Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Signed area (positive for counter-clockwise order).
pub fn signed_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| cross(&vertices[i], &vertices[(i + 1) % n]))
        .sum::<f64>()
        * 0.5
}

/// Area centroid of a simple polygon.
pub fn polygon_centroid(vertices: &[Vec2]) -> Vec2 {
    let n = vertices.len();
    let area = signed_area(vertices);
    if area.abs() < 1e-18 {
        return vertices.iter().sum::<Vec2>() / n as f64;
    }
    let mut c = Vec2::zeros();
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        c += (a + b) * cross(&a, &b);
    }
    c / (6.0 * area)
}

/// Distance from `p` to segment `ab` and the closest point on it.
pub fn point_segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> (f64, Vec2) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = a + ab * t;
    ((p - q).norm(), q)
}

/// True if `p` lies inside or on the boundary of a convex CCW polygon.
pub fn point_in_convex(p: &Vec2, vertices: &[Vec2]) -> bool {
    if vertices.len() < 3 {
        return false;
    }
    let n = vertices.len();
    (0..n).all(|i| {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        cross(&(b - a), &(p - a)) >= 0.0
    })
}

/// Closest point on the polygon boundary to `p`, with its distance.
fn closest_on_boundary(p: &Vec2, vertices: &[Vec2]) -> (f64, Vec2, usize) {
    let n = vertices.len();
    let mut best = (f64::INFINITY, *p, 0);
    for i in 0..n {
        let (d, q) = point_segment_distance(p, &vertices[i], &vertices[(i + 1) % n]);
        if d < best.0 {
            best = (d, q, i);
        }
    }
    best
}

/// Distance from a point to a convex polygon; zero when inside.
pub fn point_polygon_distance(p: &Vec2, vertices: &[Vec2]) -> f64 {
    if point_in_convex(p, vertices) {
        0.0
    } else {
        closest_on_boundary(p, vertices).0
    }
}

fn outward_normal(a: &Vec2, b: &Vec2) -> Vec2 {
    let e = b - a;
    let len = e.norm();
    Vec2::new(e.y / len, -e.x / len)
}

fn project(vertices: &[Vec2], axis: &Vec2) -> (f64, f64) {
    vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        let d = v.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

/// Separating-axis test. Returns the smallest translation (depth, unit
/// direction) that moves `b` out of `a`, or `None` when the polygons are
/// separated or merely touching.
pub fn sat_penetration(a: &[Vec2], b: &[Vec2]) -> Option<(f64, Vec2)> {
    let mut best: Option<(f64, Vec2)> = None;
    for poly in [a, b] {
        let n = poly.len();
        let edges = if n == 2 { 1 } else { n };
        for i in 0..edges {
            let axis = outward_normal(&poly[i], &poly[(i + 1) % n]);
            let (amin, amax) = project(a, &axis);
            let (bmin, bmax) = project(b, &axis);
            let plus = amax - bmin;
            let minus = bmax - amin;
            if plus <= 0.0 || minus <= 0.0 {
                return None;
            }
            let (depth, dir) = if plus <= minus { (plus, axis) } else { (minus, -axis) };
            if best.is_none_or(|(d, _)| depth < d) {
                best = Some((depth, dir));
            }
        }
    }
    best
}

fn segments_intersect(p1: &Vec2, p2: &Vec2, q1: &Vec2, q2: &Vec2) -> bool {
    let d1 = cross(&(p2 - p1), &(q1 - p1));
    let d2 = cross(&(p2 - p1), &(q2 - p1));
    let d3 = cross(&(q2 - q1), &(p1 - q1));
    let d4 = cross(&(q2 - q1), &(p2 - q1));
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn edge_count(poly: &[Vec2]) -> usize {
    if poly.len() == 2 {
        1
    } else {
        poly.len()
    }
}

/// Minimum distance between two convex polygons (or segments); zero when
/// they overlap or touch.
pub fn polygon_distance(a: &[Vec2], b: &[Vec2]) -> f64 {
    if a.iter().any(|p| point_in_convex(p, b)) || b.iter().any(|p| point_in_convex(p, a)) {
        return 0.0;
    }
    let (na, nb) = (a.len(), b.len());
    for i in 0..edge_count(a) {
        for j in 0..edge_count(b) {
            if segments_intersect(&a[i], &a[(i + 1) % na], &b[j], &b[(j + 1) % nb]) {
                return 0.0;
            }
        }
    }
    let mut best = f64::INFINITY;
    for (p, poly, n) in a
        .iter()
        .map(|p| (p, b, nb))
        .chain(b.iter().map(|p| (p, a, na)))
    {
        for j in 0..edge_count(poly) {
            let (d, _) = point_segment_distance(p, &poly[j], &poly[(j + 1) % n]);
            best = best.min(d);
        }
    }
    best
}

/// Penetration of one body into another: `normal` points from the first
/// body toward the second, `point` is the contact location.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub depth: f64,
    pub normal: Vec2,
    pub point: Vec2,
}

/// An object's footprint placed in the world frame.
#[derive(Clone, Debug, PartialEq)]
pub enum Footprint {
    Disc { center: Vec2, radius: f64 },
    Polygon { vertices: Vec<Vec2>, centroid: Vec2 },
}

impl Footprint {
    pub fn centroid(&self) -> Vec2 {
        match self {
            Footprint::Disc { center, .. } => *center,
            Footprint::Polygon { centroid, .. } => *centroid,
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        match self {
            Footprint::Disc { radius, .. } => *radius,
            Footprint::Polygon { vertices, centroid } => vertices
                .iter()
                .map(|v| (v - centroid).norm())
                .fold(0.0, f64::max),
        }
    }

    /// Axis-aligned bounds as `(min, max)`.
    pub fn aabb(&self) -> (Vec2, Vec2) {
        match self {
            Footprint::Disc { center, radius } => (
                center - Vec2::new(*radius, *radius),
                center + Vec2::new(*radius, *radius),
            ),
            Footprint::Polygon { vertices, .. } => vertices.iter().fold(
                (
                    Vec2::new(f64::INFINITY, f64::INFINITY),
                    Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
                ),
                |(lo, hi), v| (lo.inf(v), hi.sup(v)),
            ),
        }
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        match self {
            Footprint::Disc { center, radius } => (p - center).norm_squared() <= radius * radius,
            Footprint::Polygon { vertices, .. } => point_in_convex(p, vertices),
        }
    }

    /// Distance from a point to the footprint; zero inside.
    pub fn point_distance(&self, p: &Vec2) -> f64 {
        match self {
            Footprint::Disc { center, radius } => ((p - center).norm() - radius).max(0.0),
            Footprint::Polygon { vertices, .. } => point_polygon_distance(p, vertices),
        }
    }

    /// Separation distance to `other`; zero when overlapping.
    pub fn distance(&self, other: &Footprint) -> f64 {
        match (self, other) {
            (Footprint::Disc { center: a, radius: ra }, Footprint::Disc { center: b, radius: rb }) => {
                ((a - b).norm() - ra - rb).max(0.0)
            }
            (Footprint::Disc { center, radius }, Footprint::Polygon { vertices, .. })
            | (Footprint::Polygon { vertices, .. }, Footprint::Disc { center, radius }) => {
                (point_polygon_distance(center, vertices) - radius).max(0.0)
            }
            (Footprint::Polygon { vertices: a, .. }, Footprint::Polygon { vertices: b, .. }) => {
                polygon_distance(a, b)
            }
        }
    }

    /// Separation distance to a convex polygon or segment given by vertices.
    pub fn distance_to_polygon(&self, poly: &[Vec2]) -> f64 {
        match self {
            Footprint::Disc { center, radius } => {
                let d = if poly.len() == 2 {
                    point_segment_distance(center, &poly[0], &poly[1]).0
                } else {
                    point_polygon_distance(center, poly)
                };
                (d - radius).max(0.0)
            }
            Footprint::Polygon { vertices, .. } => polygon_distance(vertices, poly),
        }
    }

    /// True if the footprint and the convex polygon overlap with positive area.
    pub fn overlaps_polygon(&self, poly: &[Vec2]) -> bool {
        match self {
            Footprint::Disc { center, radius } => {
                if point_in_convex(center, poly) {
                    return true;
                }
                closest_on_boundary(center, poly).0 < *radius
            }
            Footprint::Polygon { vertices, .. } => sat_penetration(vertices, poly).is_some(),
        }
    }

    /// Contact for positive-area overlap between `self` and `other`, with the
    /// normal oriented from `self` toward `other`. `None` if they do not
    /// overlap.
    pub fn contact(&self, other: &Footprint) -> Option<Contact> {
        match (self, other) {
            (Footprint::Disc { center: a, radius: ra }, Footprint::Disc { center: b, radius: rb }) => {
                let delta = b - a;
                let dist = delta.norm();
                let depth = ra + rb - dist;
                if depth <= 0.0 {
                    return None;
                }
                // coincident centres: +x tie-break
                let normal = if dist > 1e-12 { delta / dist } else { Vec2::new(1.0, 0.0) };
                Some(Contact { depth, normal, point: a + normal * *ra })
            }
            (Footprint::Polygon { vertices, .. }, Footprint::Disc { center, radius }) => {
                polygon_disc_contact(vertices, center, *radius)
            }
            (Footprint::Disc { center, radius }, Footprint::Polygon { vertices, .. }) => {
                polygon_disc_contact(vertices, center, *radius).map(|c| Contact {
                    normal: -c.normal,
                    ..c
                })
            }
            (Footprint::Polygon { vertices: a, .. }, Footprint::Polygon { vertices: b, .. }) => {
                let (depth, normal) = sat_penetration(a, b)?;
                let point = deepest_point(a, b, &normal);
                Some(Contact { depth, normal, point })
            }
        }
    }
}

fn deepest_point(a: &[Vec2], b: &[Vec2], normal: &Vec2) -> Vec2 {
    // vertex of b furthest against the normal, falling back to a's furthest along it
    let bv = b
        .iter()
        .min_by(|p, q| p.dot(normal).total_cmp(&q.dot(normal)))
        .copied()
        .unwrap_or_else(Vec2::zeros);
    if point_in_convex(&bv, a) {
        return bv;
    }
    a.iter()
        .max_by(|p, q| p.dot(normal).total_cmp(&q.dot(normal)))
        .copied()
        .unwrap_or(bv)
}

fn polygon_disc_contact(vertices: &[Vec2], center: &Vec2, radius: f64) -> Option<Contact> {
    let (dist, q, edge) = closest_on_boundary(center, vertices);
    if point_in_convex(center, vertices) {
        let n = vertices.len();
        let normal = outward_normal(&vertices[edge], &vertices[(edge + 1) % n]);
        return Some(Contact { depth: radius + dist, normal, point: q });
    }
    let depth = radius - dist;
    if depth <= 0.0 {
        return None;
    }
    Some(Contact { depth, normal: (center - q) / dist, point: q })
}

/// Oriented rectangle as four CCW vertices.
pub fn oriented_rect(center: &Vec2, axis: &Vec2, half_along: f64, half_across: f64) -> [Vec2; 4] {
    let u = axis * half_along;
    let v = Vec2::new(-axis.y, axis.x) * half_across;
    [center - u - v, center + u - v, center + u + v, center - u + v]
}
