//! Top-down trajectory plots of one executed episode.

use crate::episodes::Episode;
use crate::planner::Skill;
use crate::skills::ChainResult;
use crate::world::{Category, Scene, Vec2};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

const PX_PER_M: f64 = 80.0;
const MARGIN: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillBoundary {
    pub skill: Skill,
    /// Index into the polyline of the skill's first step.
    pub start: usize,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceArtifact {
    pub episode_id: String,
    /// Base position at every recorded step.
    pub polyline: Vec<Vec2>,
    pub boundaries: Vec<SkillBoundary>,
    pub sources: Vec<(String, Category, Vec2)>,
    pub overall: bool,
}

impl TraceArtifact {
    pub fn from_run(episode: &Episode, result: &ChainResult) -> Self {
        let polyline = result.trace.iter().map(|s| s.base).collect();
        let mut boundaries = Vec::new();
        let mut outcomes = result.outcomes();
        for (i, step) in result.trace.iter().enumerate() {
            if step.step == 0 {
                let success = outcomes.next().map(|o| o.success).unwrap_or(false);
                boundaries.push(SkillBoundary {
                    skill: step.skill,
                    start: i,
                    success,
                });
            }
        }
        Self {
            episode_id: episode.episode_id.clone(),
            polyline,
            boundaries,
            sources: episode
                .sources
                .iter()
                .map(|s| (s.object.id.clone(), s.category(), s.object.position))
                .collect(),
            overall: result.overall,
        }
    }

    pub fn to_svg(&self, scene: &Scene) -> String {
        let b = scene.bounds;
        let (w, h) = (b.width() * PX_PER_M + 2.0 * MARGIN, b.height() * PX_PER_M + 2.0 * MARGIN + 20.0);
        let px = |p: Vec2| (MARGIN + (p.x - b.min.x) * PX_PER_M, MARGIN + 20.0 + (b.max.y - p.y) * PX_PER_M);
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" font-family="monospace" font-size="10">"#);
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN}" y="14">{} {}</text>"#,
            self.episode_id,
            if self.overall { "success" } else { "failure" }
        );
        for r in &scene.receptacles {
            let (x, y) = px(Vec2::new(r.top.min.x, r.top.max.y));
            let _ = writeln!(
                s,
                r##"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="#d8c8a8"/>"##,
                r.top.width() * PX_PER_M,
                r.top.height() * PX_PER_M
            );
        }
        for k in &scene.sinks {
            let f = k.footprint;
            let (x, y) = px(Vec2::new(f.min.x, f.max.y));
            let _ = writeln!(
                s,
                r##"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="#a8c8e8"/>"##,
                f.width() * PX_PER_M,
                f.height() * PX_PER_M
            );
        }
        for wall in &scene.walls {
            let ((x1, y1), (x2, y2)) = (px(wall.a), px(wall.b));
            let _ = writeln!(s, r#"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="black" stroke-width="3"/>"#);
        }
        for d in &scene.doors {
            let ((x1, y1), (x2, y2)) = (px(d.hinge), px(d.leaf_end));
            let _ = writeln!(s, r##"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="#8b5a2b" stroke-width="5"/>"##);
        }
        if !self.polyline.is_empty() {
            let pts: Vec<String> = self
                .polyline
                .iter()
                .map(|&p| {
                    let (x, y) = px(p);
                    format!("{x:.1},{y:.1}")
                })
                .collect();
            let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#3060c0" stroke-width="2"/>"##, pts.join(" "));
        }
        for bd in &self.boundaries {
            let (x, y) = px(self.polyline[bd.start]);
            let color = if bd.success { "#20a040" } else { "#d03020" };
            let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="4" fill="{color}"/>"#);
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 6.0, y - 6.0, bd.skill);
        }
        for (id, cat, p) in &self.sources {
            let (x, y) = px(*p);
            let _ = writeln!(s, r##"<circle cx="{x:.1}" cy="{y:.1}" r="6" fill="none" stroke="#e08000" stroke-width="2"/>"##);
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{} ({})</text>"#, x + 8.0, y + 4.0, id, cat);
        }
        s.push_str("</svg>\n");
        s
    }
}
