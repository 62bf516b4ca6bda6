//! SVG frames of scenes and episodes. One user unit is one millimetre, with
//! world y pointing up.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::geometry::{Footprint, Vec2};
use crate::grasp::{GraspAction, GripperSpec};
use crate::scene::Scene;
use crate::sim::{simulate_push, PushAction};
use crate::tree::PlanEnv;

use super::{io_err, HarnessError, LoggedAction};

#[derive(Clone, Copy, Debug)]
pub enum Overlay {
    None,
    Push(PushAction),
    Grasp(GraspAction),
}

struct Canvas {
    side_mm: f64,
    out: String,
}

impl Canvas {
    fn pt(&self, p: &Vec2) -> (f64, f64) {
        (p.x * 1000.0, self.side_mm - p.y * 1000.0)
    }

    fn points(&self, vs: &[Vec2]) -> String {
        vs.iter()
            .map(|v| {
                let (x, y) = self.pt(v);
                format!("{x:.3},{y:.3}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn render_svg(scene: &Scene, overlay: Overlay, gripper: &GripperSpec) -> String {
    let side = scene.workspace.side_m * 1000.0;
    let mut c = Canvas { side_mm: side, out: String::new() };
    let _ = writeln!(
        c.out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}mm" height="{side}mm" viewBox="0 0 {side} {side}">"#
    );
    let _ = writeln!(
        c.out,
        r##"<defs><marker id="arrow" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#d33"/></marker></defs>"##
    );
    let _ = writeln!(c.out, r##"<rect x="0" y="0" width="{side}" height="{side}" fill="white" stroke="black" stroke-width="1"/>"##);
    for obj in &scene.objects {
        let is_target = obj.id == scene.target_id;
        let style = if is_target {
            r##"fill="#2a7" stroke="#063" stroke-width="0.8""##
        } else {
            r##"fill="none" stroke="#333" stroke-width="0.8""##
        };
        match obj.footprint() {
            Footprint::Disc { center, radius } => {
                let (x, y) = c.pt(&center);
                let _ = writeln!(c.out, r#"<circle id="obj{}" cx="{x:.3}" cy="{y:.3}" r="{:.3}" {style}/>"#, obj.id, radius * 1000.0);
            }
            Footprint::Polygon { vertices, .. } => {
                let pts = c.points(&vertices);
                let _ = writeln!(c.out, r#"<polygon id="obj{}" points="{pts}" {style}/>"#, obj.id);
            }
        }
    }
    match overlay {
        Overlay::None => {}
        Overlay::Push(a) => {
            let (x1, y1) = c.pt(&a.start);
            let (x2, y2) = c.pt(&a.end);
            let _ = writeln!(
                c.out,
                r##"<line class="push" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="#d33" stroke-width="1.2" marker-end="url(#arrow)"/>"##
            );
        }
        Overlay::Grasp(g) => {
            for f in g.fingers(gripper) {
                let pts = c.points(&f);
                let _ = writeln!(c.out, r##"<polygon class="finger" points="{pts}" fill="#58c" fill-opacity="0.6" stroke="#124"/>"##);
            }
        }
    }
    c.out.push_str("</svg>\n");
    c.out
}

fn write_frame(dir: &Path, i: usize, svg: &str) -> Result<PathBuf, HarnessError> {
    let p = dir.join(format!("frame_{i:03}.svg"));
    std::fs::write(&p, svg).map_err(io_err(&p))?;
    Ok(p)
}

/// Replay `actions` from `scene` and write one frame per state: each push
/// frame shows the push about to be executed, the last frame shows the grasp.
pub fn render_episode(scene: &Scene, actions: &[LoggedAction], env: &PlanEnv, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, HarnessError> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut frames = Vec::new();
    let mut current = scene.clone();
    let pushes: Vec<PushAction> = actions
        .iter()
        .filter_map(|a| match a {
            LoggedAction::Push { start, end } => {
                Some(PushAction { start: Vec2::new(start[0], start[1]), end: Vec2::new(end[0], end[1]) })
            }
            LoggedAction::Grasp { .. } => None,
        })
        .collect();
    for a in &pushes {
        frames.push(write_frame(dir, frames.len(), &render_svg(&current, Overlay::Push(*a), &env.gripper))?);
        current = simulate_push(&current, a, &env.tip, &env.sim).next_scene;
    }
    frames.push(write_frame(dir, frames.len(), &render_svg(&current, Overlay::None, &env.gripper))?);
    for a in actions {
        if let LoggedAction::Grasp { x, y, theta_bin, .. } = a {
            let g = GraspAction { x: *x, y: *y, theta_bin: *theta_bin };
            frames.push(write_frame(dir, frames.len(), &render_svg(&current, Overlay::Grasp(g), &env.gripper))?);
        }
    }
    Ok(frames)
}

pub fn render_scene(scene: &Scene, out_dir: impl AsRef<Path>, env: &PlanEnv) -> Result<PathBuf, HarnessError> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_frame(dir, 0, &render_svg(scene, Overlay::None, &env.gripper))
}
