#![allow(dead_code)]

use std::f64::consts::TAU;

use clutterplan::geometry::{Footprint, Vec2};
use clutterplan::grasp::{GripperSpec, OracleConfig};
use clutterplan::scene::{ObjectShape, Pose, Scene, SceneObject, WorkspaceSpec};
use rand::Rng;

/// Target near the centre plus a few non-overlapping obstacles close by.
pub fn small_scene<R: Rng>(rng: &mut R, obstacles: usize) -> Scene {
    small_scene_within(rng, obstacles, 0.08)
}

/// Like [`small_scene`] with obstacle centres at most `spread` from the centre.
pub fn small_scene_within<R: Rng>(rng: &mut R, obstacles: usize, spread: f64) -> Scene {
    let c = WorkspaceSpec::default().center();
    loop {
        let mut objs = vec![SceneObject {
            id: 0,
            shape: if rng.gen_bool(0.5) {
                ObjectShape::Disc { radius: rng.gen_range(0.015..0.025) }
            } else {
                ObjectShape::rectangle(rng.gen_range(0.02..0.04), rng.gen_range(0.02..0.04))
            },
            pose: Pose::new(c.x + rng.gen_range(-0.01..0.01), c.y + rng.gen_range(-0.01..0.01), rng.gen_range(0.0..TAU)),
        }];
        for id in 1..=obstacles as u32 {
            for _ in 0..50 {
                let phi: f64 = rng.gen_range(0.0..TAU);
                let r = rng.gen_range(0.025..spread);
                let shape = match rng.gen_range(0..3) {
                    0 => ObjectShape::Disc { radius: rng.gen_range(0.008..0.02) },
                    1 => ObjectShape::rectangle(rng.gen_range(0.015..0.04), rng.gen_range(0.01..0.03)),
                    _ => ObjectShape::regular(rng.gen_range(3..7), rng.gen_range(0.01..0.02)),
                };
                let cand = SceneObject { id, shape, pose: Pose::new(c.x + r * phi.cos(), c.y + r * phi.sin(), rng.gen_range(0.0..TAU)) };
                let fp = cand.footprint();
                if objs.iter().all(|o| o.footprint().distance(&fp) > 1e-4) {
                    objs.push(cand);
                    break;
                }
            }
        }
        if let Ok(s) = Scene::new(WorkspaceSpec::default(), objs, 0) {
            return s;
        }
    }
}

/// Target plus `obstacles` objects spread roughly evenly around it, each
/// pushed in along its ray until the gap to the target is a random value in
/// [1, 30] mm. Bars lie tangentially so a few of them can fence the target.
pub fn tight_scene<R: Rng>(rng: &mut R, obstacles: usize) -> Scene {
    let c = WorkspaceSpec::default().center();
    loop {
        let target = SceneObject {
            id: 0,
            shape: if rng.gen_bool(0.5) {
                ObjectShape::Disc { radius: rng.gen_range(0.015..0.022) }
            } else {
                ObjectShape::rectangle(rng.gen_range(0.02..0.035), rng.gen_range(0.02..0.035))
            },
            pose: Pose::new(c.x, c.y, rng.gen_range(0.0..TAU)),
        };
        let tfp = target.footprint();
        let mut objs = vec![target];
        let base: f64 = rng.gen_range(0.0..TAU);
        for id in 1..=obstacles as u32 {
            let phi = base + TAU * id as f64 / obstacles as f64 + rng.gen_range(-0.3..0.3);
            let gap = rng.gen_range(0.001..0.03);
            let (shape, yaw) = match rng.gen_range(0..3) {
                0 => (ObjectShape::Disc { radius: rng.gen_range(0.01..0.02) }, 0.0),
                1 => (ObjectShape::rectangle(rng.gen_range(0.04..0.08), rng.gen_range(0.01..0.02)), phi + TAU / 4.0),
                _ => (ObjectShape::regular(rng.gen_range(3..7), rng.gen_range(0.012..0.02)), rng.gen_range(0.0..TAU)),
            };
            let at = |r: f64| SceneObject { id, shape: shape.clone(), pose: Pose::new(c.x + r * phi.cos(), c.y + r * phi.sin(), yaw) };
            let (mut lo, mut hi) = (0.0, 0.15);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if at(mid).footprint().distance(&tfp) < gap {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let cand = at(hi);
            let fp = cand.footprint();
            if objs.iter().skip(1).all(|o| o.footprint().distance(&fp) > 1e-4) {
                objs.push(cand);
            }
        }
        if let Ok(s) = Scene::new(WorkspaceSpec::default(), objs, 0) {
            return s;
        }
    }
}

pub fn rect(center: Vec2, u: Vec2, half_u: f64, half_v: f64) -> Vec<Vec2> {
    let v = Vec2::new(-u.y, u.x);
    vec![
        center - u * half_u - v * half_v,
        center + u * half_u - v * half_v,
        center + u * half_u + v * half_v,
        center - u * half_u + v * half_v,
    ]
}

fn seg_dist(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}

fn inside(p: Vec2, poly: &[Vec2]) -> bool {
    (0..poly.len()).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        (b - a).perp(&(p - a)) >= 0.0
    })
}

fn segs_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o = |p: Vec2, q: Vec2, r: Vec2| (q - p).perp(&(r - p));
    let (d1, d2, d3, d4) = (o(a, b, c), o(a, b, d), o(c, d, a), o(c, d, b));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Distance between convex polygons, zero when they intersect.
pub fn poly_poly(a: &[Vec2], b: &[Vec2]) -> f64 {
    if a.iter().any(|p| inside(*p, b)) || b.iter().any(|p| inside(*p, a)) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..a.len() {
        let (p, q) = (a[i], a[(i + 1) % a.len()]);
        for j in 0..b.len() {
            let (r, s) = (b[j], b[(j + 1) % b.len()]);
            if segs_cross(p, q, r, s) {
                return 0.0;
            }
            best = best.min(seg_dist(p, r, s)).min(seg_dist(q, r, s)).min(seg_dist(r, p, q)).min(seg_dist(s, p, q));
        }
    }
    best
}

/// Distance from a placed object to a convex polygon, zero on overlap.
pub fn object_poly(fp: &Footprint, poly: &[Vec2]) -> f64 {
    match fp {
        Footprint::Disc { center, radius } => {
            if inside(*center, poly) {
                return 0.0;
            }
            let d = (0..poly.len()).map(|i| seg_dist(*center, poly[i], poly[(i + 1) % poly.len()])).fold(f64::INFINITY, f64::min);
            (d - radius).max(0.0)
        }
        Footprint::Polygon { vertices, .. } => poly_poly(vertices, poly),
    }
}

/// Direct grasp score: zero when the jaws miss the target, a finger touches
/// the target or an obstacle; otherwise clearance over the full-score distance.
pub fn brute_score(scene: &Scene, center: Vec2, theta: f64, g: &GripperSpec, cfg: &OracleConfig) -> f64 {
    let u = Vec2::new(theta.cos(), theta.sin());
    let target = scene.target().unwrap().footprint();
    let closing = rect(center, u, g.opening_m / 2.0, g.finger_len_m / 2.0);
    if object_poly(&target, &closing) > 0.0 {
        return 0.0;
    }
    let mut clear = f64::INFINITY;
    for s in [1.0, -1.0] {
        let f = rect(center + u * (s * g.opening_m / 2.0), u, g.finger_thick_m / 2.0, g.finger_len_m / 2.0);
        if object_poly(&target, &f) <= 0.0 {
            return 0.0;
        }
        for o in scene.objects.iter().filter(|o| o.id != scene.target_id) {
            clear = clear.min(object_poly(&o.footprint(), &f));
        }
    }
    (clear / cfg.clearance_full_m).min(1.0)
}

/// Best score over centres spaced `step` apart inside the target and 16
/// closing directions.
pub fn brute_max(scene: &Scene, step: f64, g: &GripperSpec, cfg: &OracleConfig) -> f64 {
    let target = scene.target().unwrap().footprint();
    let (lo, hi) = target.aabb();
    let mut best = 0.0f64;
    let mut y = (lo.y / step).floor() * step + step / 2.0;
    while y <= hi.y {
        let mut x = (lo.x / step).floor() * step + step / 2.0;
        while x <= hi.x {
            let p = Vec2::new(x, y);
            if target.contains(&p) {
                for bin in 0..8 {
                    best = best.max(brute_score(scene, p, bin as f64 * TAU / 16.0, g, cfg));
                }
            }
            x += step;
        }
        y += step;
    }
    best
}

fn poly_of(fp: &Footprint) -> Option<&[Vec2]> {
    match fp {
        Footprint::Polygon { vertices, .. } => Some(vertices),
        Footprint::Disc { .. } => None,
    }
}

fn edge_normals(poly: &[Vec2]) -> Vec<Vec2> {
    (0..poly.len())
        .map(|i| {
            let e = poly[(i + 1) % poly.len()] - poly[i];
            Vec2::new(e.y, -e.x).normalize()
        })
        .collect()
}

fn boundary_dist(p: Vec2, poly: &[Vec2]) -> f64 {
    (0..poly.len()).map(|i| seg_dist(p, poly[i], poly[(i + 1) % poly.len()])).fold(f64::INFINITY, f64::min)
}

/// Overlap depth of two placed objects along their best separating
/// direction; zero when they do not overlap.
pub fn penetration_depth(a: &Footprint, b: &Footprint) -> f64 {
    match (a, b) {
        (Footprint::Disc { center: c1, radius: r1 }, Footprint::Disc { center: c2, radius: r2 }) => (r1 + r2 - (c1 - c2).norm()).max(0.0),
        (Footprint::Disc { center, radius }, p) | (p, Footprint::Disc { center, radius }) => {
            let poly = poly_of(p).unwrap();
            let d = boundary_dist(*center, poly);
            if inside(*center, poly) {
                radius + d
            } else {
                (radius - d).max(0.0)
            }
        }
        _ => {
            let (pa, pb) = (poly_of(a).unwrap(), poly_of(b).unwrap());
            let mut best = f64::INFINITY;
            for n in edge_normals(pa).into_iter().chain(edge_normals(pb)) {
                let proj = |p: &[Vec2]| p.iter().map(|v| v.dot(&n)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
                let (alo, ahi) = proj(pa);
                let (blo, bhi) = proj(pb);
                best = best.min((ahi.min(bhi) - alo.max(blo)).max(0.0));
            }
            best
        }
    }
}

/// Largest pairwise overlap depth in a scene.
pub fn max_penetration(scene: &Scene) -> f64 {
    let fps = scene.footprints();
    let mut worst = 0.0f64;
    for i in 0..fps.len() {
        for j in i + 1..fps.len() {
            worst = worst.max(penetration_depth(&fps[i], &fps[j]));
        }
    }
    worst
}
