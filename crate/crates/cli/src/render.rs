//! Top-down SVG frames of an episode.

use std::fmt::Write as _;

use roadrl::env::EpisodeRecord;
use roadrl::geometry::{Obb, Vec2};
use roadrl::scenario::{RoadKind, Scenario};

const MARGIN: f64 = 10.0;

fn road_style(kind: RoadKind) -> (&'static str, f64, &'static str) {
    match kind {
        RoadKind::RoadEdge => ("#222222", 0.4, ""),
        RoadKind::RoadLane => ("#b0b0b0", 0.15, " stroke-dasharray=\"1 1\""),
        RoadKind::RoadLine => ("#d8b400", 0.2, " stroke-dasharray=\"3 2\""),
        RoadKind::StopSign => ("#c00000", 0.6, ""),
        RoadKind::Crosswalk => ("#6060ff", 0.3, ""),
        RoadKind::SpeedBump => ("#a05000", 0.3, ""),
    }
}

/// World-space bounding box `[min, max]` of roads, agents and goals.
fn bounds(scenario: &Scenario, ep: &EpisodeRecord) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut add = |p: Vec2| {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    };
    for r in &scenario.roads {
        r.points.iter().copied().for_each(&mut add);
    }
    for a in &scenario.agents {
        add(a.goal());
    }
    for frame in &ep.frames {
        for f in frame {
            add(f.state.position());
        }
    }
    if !lo.x.is_finite() {
        return (Vec2::new(-MARGIN, -MARGIN), Vec2::new(MARGIN, MARGIN));
    }
    (Vec2::new(lo.x - MARGIN, lo.y - MARGIN), Vec2::new(hi.x + MARGIN, hi.y + MARGIN))
}

/// One SVG document per frame. Roads are drawn by kind, agents as oriented
/// boxes (gray when static, red once collided or off-road, green at the
/// goal), and each controlled agent's goal as a circle of `goal_radius`.
pub fn render_frames(scenario: &Scenario, ep: &EpisodeRecord, goal_radius: f64) -> Vec<String> {
    let (lo, hi) = bounds(scenario, ep);
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    let mut roads = String::new();
    for r in &scenario.roads {
        let (color, width, dash) = road_style(r.kind);
        if r.points.len() == 1 {
            let p = r.points[0];
            let _ = writeln!(roads, r##"<circle cx="{}" cy="{}" r="{}" fill="{color}"/>"##, p.x, p.y, width * 2.0);
            continue;
        }
        let pts: Vec<String> = r.points.iter().map(|p| format!("{},{}", p.x, p.y)).collect();
        let _ = writeln!(
            roads,
            r##"<polyline class="{}" points="{}" fill="none" stroke="{color}" stroke-width="{width}"{dash}/>"##,
            r.kind,
            pts.join(" ")
        );
    }
    let mut goals = String::new();
    for a in scenario.agents.iter().filter(|a| a.controlled) {
        let g = a.goal();
        let _ = writeln!(
            goals,
            r##"<circle class="goal" cx="{}" cy="{}" r="{goal_radius}" fill="none" stroke="#00a000" stroke-width="0.2"/>"##,
            g.x, g.y
        );
    }
    ep.frames
        .iter()
        .enumerate()
        .map(|(t, frame)| {
            let mut svg = String::new();
            let _ = writeln!(svg, r##"<?xml version="1.0" encoding="UTF-8"?>"##);
            let _ = writeln!(
                svg,
                r##"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.0}" height="{:.0}" viewBox="{} {} {w} {h}">"##,
                w * 5.0,
                h * 5.0,
                lo.x,
                -hi.y
            );
            let _ = writeln!(svg, r##"<rect x="{}" y="{}" width="{w}" height="{h}" fill="#f4f4f0"/>"##, lo.x, -hi.y);
            let _ = writeln!(svg, r##"<g transform="scale(1,-1)">"##);
            svg.push_str(&roads);
            svg.push_str(&goals);
            for (i, f) in frame.iter().enumerate() {
                if !f.valid {
                    continue;
                }
                let a = &scenario.agents[i];
                let fill = if !f.controlled {
                    "#909090"
                } else if f.status.collided || f.status.offroad {
                    "#d02020"
                } else if f.status.goal_achieved {
                    "#20a020"
                } else {
                    "#2060d0"
                };
                let b = Obb::new(f.state.position(), a.length, a.width, f.state.heading);
                let pts: Vec<String> = b.corners().iter().map(|c| format!("{},{}", c.x, c.y)).collect();
                let _ = writeln!(
                    svg,
                    r##"<polygon class="agent" data-id="{}" points="{}" fill="{fill}" stroke="#000000" stroke-width="0.1"/>"##,
                    a.id,
                    pts.join(" ")
                );
            }
            let _ = writeln!(svg, "</g>");
            let _ = writeln!(
                svg,
                r##"<text x="{}" y="{}" font-size="3" font-family="monospace">{} t={t}</text>"##,
                lo.x + 1.0,
                -hi.y + 4.0,
                xml_escape(&scenario.id)
            );
            svg.push_str("</svg>\n");
            svg
        })
        .collect()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
