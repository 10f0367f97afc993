//! Procedural scene templates.
//!
//! Every template lays out lanes first, then places agents on lane centers
//! with their goals further along a lane reachable by driving straight or
//! making a single turn. Placement is rejection-sampled against inflated
//! footprints so no two agents start in contact.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AgentRecord, RoadKind, RoadPolyline, Scenario, DEFAULT_DT, DEFAULT_HORIZON};
use crate::dynamics::wrap_angle;
use crate::geometry::{obb_overlap, Obb, Vec2};
use crate::ScenarioError;

const SAMPLE_SPACING: f64 = 1.0;
const PLACEMENT_ATTEMPTS: usize = 400;
const EDGE_WIDTH: f64 = 0.3;
const EDGE_HEIGHT: f64 = 0.15;
const LINE_WIDTH: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    StraightRoad,
    Curve,
    Intersection,
    Merge,
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Template::StraightRoad => "straight_road",
            Template::Curve => "curve",
            Template::Intersection => "intersection",
            Template::Merge => "merge",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub template: Template,
    pub agents: usize,
    /// Lanes in the direction of travel (straight road, curve, merge main line).
    pub lanes: usize,
    pub lane_width: f64,
    /// Distance to the goal along the lane, for straight roads and curves.
    pub goal_distance: [f64; 2],
    pub initial_speed: [f64; 2],
    /// Total length of the straight road; approach/exit length elsewhere.
    pub road_length: f64,
    pub curve_radius: [f64; 2],
    pub curve_angle: [f64; 2],
    pub vehicle_length: [f64; 2],
    pub vehicle_width: [f64; 2],
    pub horizon: usize,
    pub dt: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            template: Template::StraightRoad,
            agents: 1,
            lanes: 2,
            lane_width: 4.0,
            goal_distance: [20.0, 60.0],
            initial_speed: [2.0, 8.0],
            road_length: 200.0,
            curve_radius: [30.0, 50.0],
            curve_angle: [PI / 4.0, FRAC_PI_2],
            vehicle_length: [4.2, 5.0],
            vehicle_width: [1.8, 2.0],
            horizon: DEFAULT_HORIZON,
            dt: DEFAULT_DT,
        }
    }
}

impl GeneratorSpec {
    pub fn new(template: Template, agents: usize) -> Self {
        Self { template, agents, ..Self::default() }
    }

    fn check(&self) -> Result<(), ScenarioError> {
        let err = |m: &str| Err(ScenarioError::Spec(m.to_string()));
        if !(1..=16).contains(&self.agents) {
            return err("agent count must be in 1..=16");
        }
        if self.lanes == 0 || !(self.lane_width > 0.0) {
            return err("need at least one lane of positive width");
        }
        for (name, r) in [
            ("goal_distance", self.goal_distance),
            ("initial_speed", self.initial_speed),
            ("curve_radius", self.curve_radius),
            ("curve_angle", self.curve_angle),
            ("vehicle_length", self.vehicle_length),
            ("vehicle_width", self.vehicle_width),
        ] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return Err(ScenarioError::Spec(format!("{name} must be a finite [lo, hi] range")));
            }
        }
        if self.goal_distance[0] <= 0.0 || self.vehicle_length[0] <= 0.0 || self.vehicle_width[0] <= 0.0 {
            return err("distances and vehicle extents must be positive");
        }
        if self.curve_radius[0] <= self.lanes as f64 * self.lane_width {
            return err("curve radius must exceed the road half-width");
        }
        if !(self.dt > 0.0) {
            return err("dt must be positive");
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

/// Build a scenario from a template. Pure in `(spec, seed)`.
pub fn generate_scenario(spec: &GeneratorSpec, seed: u64) -> Result<Scenario, ScenarioError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = match spec.template {
        Template::StraightRoad => straight_road(spec, &mut rng),
        Template::Curve => curve(spec, &mut rng),
        Template::Intersection => intersection(spec),
        Template::Merge => merge(spec),
    };
    let agents = place_agents(spec, &layout, &mut rng)?;
    Ok(Scenario {
        id: format!("{}-{seed}", spec.template),
        dt: spec.dt,
        horizon: spec.horizon,
        roads: layout.roads,
        agents,
    })
}

/// A spawn route: start pose sampler plus matching goal.
struct Route {
    /// Returns (start, heading, goal) for a uniform draw.
    sample: Box<dyn Fn(&mut ChaCha8Rng) -> (Vec2, f64, Vec2)>,
}

struct Layout {
    roads: Vec<RoadPolyline>,
    routes: Vec<Route>,
}

fn polyline(kind: RoadKind, width: f64, height: f64, points: Vec<Vec2>) -> RoadPolyline {
    RoadPolyline { kind, width, height, points }
}

fn sampled(from: Vec2, to: Vec2) -> Vec<Vec2> {
    let n = ((to - from).norm() / SAMPLE_SPACING).ceil().max(1.0) as usize;
    (0..=n).map(|i| from + (to - from) * (i as f64 / n as f64)).collect()
}

fn place_agents(
    spec: &GeneratorSpec,
    layout: &Layout,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<AgentRecord>, ScenarioError> {
    let mut agents: Vec<AgentRecord> = Vec::with_capacity(spec.agents);
    let mut footprints: Vec<Obb> = Vec::with_capacity(spec.agents);
    for id in 0..spec.agents {
        let length = uniform(rng, spec.vehicle_length);
        let width = uniform(rng, spec.vehicle_width);
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let route = &layout.routes[rng.gen_range(0..layout.routes.len())];
            let (start, heading, goal) = (route.sample)(rng);
            let lateral = rng.gen_range(-0.25..0.25);
            let heading_noise = rng.gen_range(-0.05..0.05);
            let pos = start + Vec2::from_angle(heading).perp() * lateral;
            let heading = wrap_angle(heading + heading_noise);
            // Keep a buffer of ~1.5 m around every vehicle at spawn.
            let inflated = Obb::new(pos, length + 3.0, width + 1.0, heading);
            if footprints.iter().any(|f| obb_overlap(f, &inflated)) {
                continue;
            }
            footprints.push(inflated);
            agents.push(AgentRecord {
                id: id as i64,
                length,
                width,
                height: 1.5,
                x: pos.x,
                y: pos.y,
                heading,
                speed: uniform(rng, spec.initial_speed),
                goal: goal.into(),
                controlled: true,
                valid: true,
                log: None,
            });
            placed = true;
            break;
        }
        if !placed {
            return Err(ScenarioError::Spec(format!(
                "could not place {} agents on a {} layout without overlap",
                spec.agents, spec.template
            )));
        }
    }
    Ok(agents)
}

fn lane_offsets(spec: &GeneratorSpec) -> Vec<f64> {
    let n = spec.lanes as f64;
    (0..spec.lanes).map(|k| (k as f64 - (n - 1.0) / 2.0) * spec.lane_width).collect()
}

fn straight_road(spec: &GeneratorSpec, _rng: &mut ChaCha8Rng) -> Layout {
    let half_len = 0.5 * spec.road_length;
    let half_w = 0.5 * spec.lanes as f64 * spec.lane_width;
    let mut roads = vec![
        polyline(
            RoadKind::RoadEdge,
            EDGE_WIDTH,
            EDGE_HEIGHT,
            sampled(Vec2::new(-half_len, -half_w), Vec2::new(half_len, -half_w)),
        ),
        polyline(
            RoadKind::RoadEdge,
            EDGE_WIDTH,
            EDGE_HEIGHT,
            sampled(Vec2::new(-half_len, half_w), Vec2::new(half_len, half_w)),
        ),
    ];
    let offsets = lane_offsets(spec);
    for &y in &offsets {
        roads.push(polyline(
            RoadKind::RoadLane,
            spec.lane_width,
            0.0,
            sampled(Vec2::new(-half_len, y), Vec2::new(half_len, y)),
        ));
    }
    for pair in offsets.windows(2) {
        let y = 0.5 * (pair[0] + pair[1]);
        roads.push(polyline(
            RoadKind::RoadLine,
            LINE_WIDTH,
            0.0,
            sampled(Vec2::new(-half_len, y), Vec2::new(half_len, y)),
        ));
    }
    // Leave room for the goal ahead and for its reflection behind.
    let margin = spec.goal_distance[1] + 5.0;
    let x_range = [-(half_len - margin).max(0.0), (half_len - margin).max(0.0)];
    let gd = spec.goal_distance;
    let routes = offsets
        .into_iter()
        .map(|y| Route {
            sample: Box::new(move |rng: &mut ChaCha8Rng| {
                let x = uniform(rng, x_range);
                let d = uniform(rng, gd);
                (Vec2::new(x, y), 0.0, Vec2::new(x + d, y))
            }),
        })
        .collect();
    Layout { roads, routes }
}

/// Straight approach, circular arc, straight exit. Arclength `s` is measured
/// along the centerline; `off` is a signed offset to the left of travel.
#[derive(Clone, Copy)]
struct CurvePath {
    approach: f64,
    radius: f64,
    angle: f64,
    turn: f64,
    exit: f64,
}

impl CurvePath {
    fn total(&self) -> f64 {
        self.approach + self.radius * self.angle + self.exit
    }

    fn at(&self, s: f64, off: f64) -> (Vec2, f64) {
        let arc = self.radius * self.angle;
        let (pos, heading) = if s <= self.approach {
            (Vec2::new(s - self.approach, 0.0), 0.0)
        } else if s <= self.approach + arc {
            let a = (s - self.approach) / self.radius;
            (Vec2::new(self.radius * a.sin(), self.turn * self.radius * (1.0 - a.cos())), self.turn * a)
        } else {
            let a = self.angle;
            let end = Vec2::new(self.radius * a.sin(), self.turn * self.radius * (1.0 - a.cos()));
            let h = self.turn * a;
            (end + Vec2::from_angle(h) * (s - self.approach - arc), h)
        };
        (pos + Vec2::from_angle(heading).perp() * off, heading)
    }

    fn polyline(&self, off: f64) -> Vec<Vec2> {
        let n = (self.total() / SAMPLE_SPACING).ceil() as usize;
        (0..=n).map(|i| self.at(self.total() * i as f64 / n as f64, off).0).collect()
    }
}

fn curve(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Layout {
    let path = CurvePath {
        approach: 0.5 * spec.road_length,
        radius: uniform(rng, spec.curve_radius),
        angle: uniform(rng, spec.curve_angle),
        turn: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
        exit: 0.5 * spec.road_length,
    };
    let half_w = 0.5 * spec.lanes as f64 * spec.lane_width;
    let mut roads = vec![
        polyline(RoadKind::RoadEdge, EDGE_WIDTH, EDGE_HEIGHT, path.polyline(-half_w)),
        polyline(RoadKind::RoadEdge, EDGE_WIDTH, EDGE_HEIGHT, path.polyline(half_w)),
    ];
    let offsets = lane_offsets(spec);
    for &o in &offsets {
        roads.push(polyline(RoadKind::RoadLane, spec.lane_width, 0.0, path.polyline(o)));
    }
    for pair in offsets.windows(2) {
        roads.push(polyline(RoadKind::RoadLine, LINE_WIDTH, 0.0, path.polyline(0.5 * (pair[0] + pair[1]))));
    }
    let gd = spec.goal_distance;
    let s_range = [5.0, (path.approach - 5.0).max(5.0)];
    let routes = offsets
        .into_iter()
        .map(|o| Route {
            sample: Box::new(move |rng: &mut ChaCha8Rng| {
                let s = uniform(rng, s_range);
                let d = uniform(rng, gd).min(path.total() - 5.0 - s);
                let (start, h) = path.at(s, o);
                let (goal, _) = path.at(s + d, o);
                (start, h, goal)
            }),
        })
        .collect();
    Layout { roads, routes }
}

fn rotate_all(points: Vec<Vec2>, angle: f64) -> Vec<Vec2> {
    points.into_iter().map(|p| p.rotate(angle)).collect()
}

/// Four-way crossing of two 2-lane roads, right-hand traffic. Built for the
/// west arm and rotated onto the others.
fn intersection(spec: &GeneratorSpec) -> Layout {
    let w = spec.lane_width;
    let arm = 0.5 * spec.road_length.max(80.0);
    let corner_r = 5.0;
    let mut roads = Vec::new();
    for k in 0..4 {
        let rot = k as f64 * FRAC_PI_2;
        // South-west corner curb: from far west along y=-w to the corner arc, then south.
        let mut curb = sampled(Vec2::new(-arm, -w), Vec2::new(-w - corner_r, -w));
        let c = Vec2::new(-w - corner_r, -w - corner_r);
        let n_arc = 8;
        for i in 1..n_arc {
            let a = FRAC_PI_2 - FRAC_PI_2 * i as f64 / n_arc as f64;
            curb.push(c + Vec2::from_angle(a) * corner_r);
        }
        curb.extend(sampled(Vec2::new(-w, -w - corner_r), Vec2::new(-w, -arm)));
        roads.push(polyline(RoadKind::RoadEdge, EDGE_WIDTH, EDGE_HEIGHT, rotate_all(curb, rot)));
        // Inbound (eastbound) and outbound lanes of the west arm.
        roads.push(polyline(
            RoadKind::RoadLane,
            w,
            0.0,
            rotate_all(sampled(Vec2::new(-arm, -0.5 * w), Vec2::new(arm, -0.5 * w)), rot),
        ));
        roads.push(polyline(
            RoadKind::RoadLine,
            LINE_WIDTH,
            0.0,
            rotate_all(sampled(Vec2::new(-arm, 0.0), Vec2::new(-w - 2.0, 0.0)), rot),
        ));
        roads.push(polyline(RoadKind::StopSign, 0.6, 2.0, rotate_all(vec![Vec2::new(-w - 3.0, -w - 1.0)], rot)));
        let cw = [
            Vec2::new(-w - 1.5, -w),
            Vec2::new(-w - 1.5, w),
            Vec2::new(-w - 4.5, w),
            Vec2::new(-w - 4.5, -w),
            Vec2::new(-w - 1.5, -w),
        ];
        roads.push(polyline(RoadKind::Crosswalk, 3.0, 0.0, rotate_all(cw.to_vec(), rot)));
    }
    let mut routes = Vec::new();
    for k in 0..4 {
        let rot = k as f64 * FRAC_PI_2;
        for turn in [-1i32, 0, 1] {
            routes.push(Route {
                sample: Box::new(move |rng: &mut ChaCha8Rng| {
                    let s = rng.gen_range(w + 12.0..arm - 5.0);
                    let g = rng.gen_range(w + 10.0..arm - 5.0);
                    let start = Vec2::new(-s, -0.5 * w);
                    let goal = match turn {
                        0 => Vec2::new(g, -0.5 * w),
                        1 => Vec2::new(0.5 * w, g),
                        _ => Vec2::new(-0.5 * w, -g),
                    };
                    (start.rotate(rot), wrap_angle(rot), goal.rotate(rot))
                }),
            });
        }
    }
    Layout { roads, routes }
}

/// Main road heading +x with an auxiliary lane joining from the right through
/// a tapered merge zone.
fn merge(spec: &GeneratorSpec) -> Layout {
    let w = spec.lane_width;
    let n = spec.lanes as f64;
    let half = 0.5 * spec.road_length.max(120.0);
    let zone = 30.0;
    let top = n * w;
    let ramp_y = -0.5 * w;
    let mut roads = vec![
        polyline(RoadKind::RoadEdge, EDGE_WIDTH, EDGE_HEIGHT, sampled(Vec2::new(-half, top), Vec2::new(half, top))),
        // Separator between the ramp and the main line.
        polyline(RoadKind::RoadEdge, EDGE_WIDTH, EDGE_HEIGHT, sampled(Vec2::new(-half, 0.0), Vec2::new(-zone, 0.0))),
    ];
    let mut outer = sampled(Vec2::new(-half, -w), Vec2::new(-zone, -w));
    outer.extend(sampled(Vec2::new(-zone, -w), Vec2::new(0.0, 0.0)).into_iter().skip(1));
    outer.extend(sampled(Vec2::new(0.0, 0.0), Vec2::new(half, 0.0)).into_iter().skip(1));
    roads.push(polyline(RoadKind::RoadEdge, EDGE_WIDTH, EDGE_HEIGHT, outer));
    let lanes: Vec<f64> = (0..spec.lanes).map(|k| (k as f64 + 0.5) * w).collect();
    for &y in &lanes {
        roads.push(polyline(RoadKind::RoadLane, w, 0.0, sampled(Vec2::new(-half, y), Vec2::new(half, y))));
    }
    let mut ramp = sampled(Vec2::new(-half, ramp_y), Vec2::new(-zone, ramp_y));
    ramp.extend(sampled(Vec2::new(-zone, ramp_y), Vec2::new(0.0, 0.5 * w)).into_iter().skip(1));
    roads.push(polyline(RoadKind::RoadLane, w, 0.0, ramp));
    for k in 1..spec.lanes {
        let y = k as f64 * w;
        roads.push(polyline(RoadKind::RoadLine, LINE_WIDTH, 0.0, sampled(Vec2::new(-half, y), Vec2::new(half, y))));
    }
    let mut routes: Vec<Route> = lanes
        .iter()
        .map(|&y| Route {
            sample: Box::new(move |rng: &mut ChaCha8Rng| {
                let x = rng.gen_range(-half + 5.0..0.0);
                let d = rng.gen_range(20.0..60.0);
                (Vec2::new(x, y), 0.0, Vec2::new(x + d, y))
            }),
        })
        .collect();
    let first_lane = lanes[0];
    routes.push(Route {
        sample: Box::new(move |rng: &mut ChaCha8Rng| {
            let x = rng.gen_range(-zone - 40.0..-zone - 5.0);
            let g = rng.gen_range(5.0..40.0);
            (Vec2::new(x, ramp_y), 0.0, Vec2::new(g, first_lane))
        }),
    });
    Layout { roads, routes }
}
