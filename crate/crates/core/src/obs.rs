//! Ego-centric partial observations.
//!
//! Layout of the flat vector: ego block, then `max_road_points` road slots,
//! then `max_partners` partner slots. Every populated slot is normalized into
//! `[-1, 1]`; empty slots are exactly zero.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{decimate_polyline, segment_features, Pose, SpatialGrid, Vec2};
use crate::scenario::{RoadKind, Scenario};

pub const EGO_FEATURES: usize = 6;
pub const ROAD_FEATURES: usize = 13;
pub const PARTNER_FEATURES: usize = 8;
/// Six road classes plus an index reserved for "none".
pub const ROAD_ONE_HOT: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObsConfig {
    pub radius: f64,
    pub max_road_points: usize,
    pub max_partners: usize,
    /// Visvalingam area threshold applied once per scenario, in m².
    pub decimation_threshold: f64,
    /// Decimated segments longer than this are split into equal pieces so
    /// long straight edges still show up as several nearby entities.
    pub max_segment_length: f64,
    pub speed_bounds: [f64; 2],
    pub goal_bounds: [f64; 2],
    pub dim_bounds: [f64; 2],
}

impl Default for ObsConfig {
    fn default() -> Self {
        Self {
            radius: 50.0,
            max_road_points: 200,
            max_partners: 63,
            decimation_threshold: 0.1,
            max_segment_length: 10.0,
            speed_bounds: [-5.0, 30.0],
            goal_bounds: [-200.0, 200.0],
            dim_bounds: [0.0, 30.0],
        }
    }
}

impl ObsConfig {
    pub fn width(&self) -> usize {
        EGO_FEATURES + self.max_road_points * ROAD_FEATURES + self.max_partners * PARTNER_FEATURES
    }

    pub fn road_offset(&self) -> usize {
        EGO_FEATURES
    }

    pub fn partner_offset(&self) -> usize {
        EGO_FEATURES + self.max_road_points * ROAD_FEATURES
    }
}

/// `2·(clamp(v, lo, hi) − lo)/(hi − lo) − 1`.
pub fn normalize(v: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo < hi);
    2.0 * (v.clamp(lo, hi) - lo) / (hi - lo) - 1.0
}

/// One observable road entity: a (possibly subdivided) decimated segment, or
/// a single-point feature such as a stop sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadSegment {
    pub p0: Vec2,
    pub p1: Vec2,
    pub kind: RoadKind,
    pub width: f64,
    pub height: f64,
}

impl RoadSegment {
    pub fn midpoint(&self) -> Vec2 {
        (self.p0 + self.p1) * 0.5
    }
}

/// Per-scenario road data: observable segments and the undecimated road
/// edges used for off-road tests, each with its own spatial index.
#[derive(Debug, Clone)]
pub struct RoadGraph {
    pub segments: Vec<RoadSegment>,
    segment_grid: SpatialGrid,
    pub edges: Vec<(Vec2, Vec2)>,
    edge_grid: SpatialGrid,
    max_edge_half_length: f64,
}

impl RoadGraph {
    pub fn build(scenario: &Scenario, cfg: &ObsConfig) -> Self {
        let mut segments = Vec::new();
        let mut edges = Vec::new();
        for road in &scenario.roads {
            if road.kind == RoadKind::RoadEdge {
                edges.extend(road.points.windows(2).map(|w| (w[0], w[1])));
            }
            if road.points.len() == 1 {
                let p = road.points[0];
                segments.push(RoadSegment { p0: p, p1: p, kind: road.kind, width: road.width, height: road.height });
                continue;
            }
            let kept = decimate_polyline(&road.points, cfg.decimation_threshold);
            for w in kept.windows(2) {
                let (a, b) = (w[0], w[1]);
                let len = a.distance(b);
                let pieces = if cfg.max_segment_length > 0.0 {
                    (len / cfg.max_segment_length).ceil().max(1.0) as usize
                } else {
                    1
                };
                for k in 0..pieces {
                    let p0 = a + (b - a) * (k as f64 / pieces as f64);
                    let p1 = a + (b - a) * ((k + 1) as f64 / pieces as f64);
                    segments.push(RoadSegment { p0, p1, kind: road.kind, width: road.width, height: road.height });
                }
            }
        }
        let segment_grid = SpatialGrid::with_default_cells(segments.iter().map(RoadSegment::midpoint).collect());
        let max_edge_half_length = edges.iter().map(|(a, b)| 0.5 * a.distance(*b)).fold(0.0, f64::max);
        let edge_grid = SpatialGrid::with_default_cells(edges.iter().map(|(a, b)| (*a + *b) * 0.5).collect());
        Self { segments, segment_grid, edges, edge_grid, max_edge_half_length }
    }

    /// Indices of observable segments whose midpoint lies within `r`.
    pub fn segments_near(&self, center: Vec2, r: f64, out: &mut Vec<usize>) {
        self.segment_grid.query_radius_into(center, r, out);
    }

    /// Indices of road-edge segments that could touch a disc of radius `r`.
    pub fn edges_near(&self, center: Vec2, r: f64, out: &mut Vec<usize>) {
        self.edge_grid.query_radius_into(center, r + self.max_edge_half_length, out);
    }
}

/// An agent as seen by the observation builder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentView {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

/// Unnormalized features, mostly useful for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct RawObservation {
    /// speed, length, width, rel-goal x, rel-goal y, collision state
    pub ego: [f64; EGO_FEATURES],
    /// rel x, rel y, length, width, height, rel orientation, road kind
    pub road: Vec<([f64; 6], RoadKind)>,
    /// speed, rel x, rel y, cos Δθ, sin Δθ, width, length, height
    pub partners: Vec<[f64; PARTNER_FEATURES]>,
}

/// Scratch buffers reused across calls.
#[derive(Debug, Default, Clone)]
pub struct ObsScratch {
    near: Vec<usize>,
    partners: Vec<(f64, usize)>,
}

/// Gather the raw features for `ego` in one scene.
///
/// `partners` lists every agent that is currently present in the world; the
/// ego itself is skipped by index. `road_priority` holds one key per road
/// segment; when more than `max_road_points` segments are visible, the ones
/// with the smallest keys are kept, which yields a random subset that stays
/// fixed as long as the keys do.
#[allow(clippy::too_many_arguments)]
pub fn raw_observation(
    ego: &AgentView,
    ego_index: usize,
    goal: Vec2,
    collided: bool,
    partners: &[(usize, AgentView)],
    roads: &RoadGraph,
    road_priority: &[u64],
    cfg: &ObsConfig,
    scratch: &mut ObsScratch,
) -> RawObservation {
    let pose = Pose::new(ego.position, ego.heading);
    let g = pose.to_local(goal);
    let ego_feat = [ego.speed, ego.length, ego.width, g.x, g.y, if collided { 1.0 } else { 0.0 }];

    roads.segments_near(ego.position, cfg.radius, &mut scratch.near);
    let near = &mut scratch.near;
    if near.len() > cfg.max_road_points {
        near.select_nth_unstable_by_key(cfg.max_road_points, |&i| (road_priority[i], i));
        near.truncate(cfg.max_road_points);
    }
    near.sort_unstable_by_key(|&i| (road_priority[i], i));
    let road = near
        .iter()
        .map(|&i| {
            let s = &roads.segments[i];
            let (mid, len, orient) = if s.p0 == s.p1 {
                (pose.to_local(s.p0), 0.0, 0.0)
            } else {
                let f = segment_features(s.p0, s.p1, &pose);
                (f.midpoint, f.length, f.orientation)
            };
            ([mid.x, mid.y, len, s.width, s.height, orient], s.kind)
        })
        .collect();

    let r2 = cfg.radius * cfg.radius;
    scratch.partners.clear();
    for (k, (idx, p)) in partners.iter().enumerate() {
        if *idx == ego_index {
            continue;
        }
        let d2 = (p.position - ego.position).norm_sq();
        if d2 <= r2 {
            scratch.partners.push((d2, k));
        }
    }
    scratch.partners.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scratch.partners.truncate(cfg.max_partners);
    let partner_feats = scratch
        .partners
        .iter()
        .map(|&(_, k)| {
            let p = &partners[k].1;
            let rel = pose.to_local(p.position);
            let dh = pose.to_local_angle(p.heading);
            [p.speed, rel.x, rel.y, dh.cos(), dh.sin(), p.width, p.length, p.height]
        })
        .collect();

    RawObservation { ego: ego_feat, road, partners: partner_feats }
}

/// Normalize and flatten into `out`, which must be `cfg.width()` long.
pub fn write_observation(raw: &RawObservation, cfg: &ObsConfig, out: &mut [f32]) {
    assert_eq!(out.len(), cfg.width(), "observation buffer width");
    out.fill(0.0);
    let [slo, shi] = cfg.speed_bounds;
    let [glo, ghi] = cfg.goal_bounds;
    let [dlo, dhi] = cfg.dim_bounds;
    let r = cfg.radius;
    let e = &raw.ego;
    let ego = [
        normalize(e[0], slo, shi),
        normalize(e[1], dlo, dhi),
        normalize(e[2], dlo, dhi),
        normalize(e[3], glo, ghi),
        normalize(e[4], glo, ghi),
        e[5],
    ];
    for (o, v) in out[..EGO_FEATURES].iter_mut().zip(ego) {
        *o = v as f32;
    }

    let base = cfg.road_offset();
    for (slot, (f, kind)) in raw.road.iter().take(cfg.max_road_points).enumerate() {
        let o = &mut out[base + slot * ROAD_FEATURES..base + (slot + 1) * ROAD_FEATURES];
        o[0] = normalize(f[0], -r, r) as f32;
        o[1] = normalize(f[1], -r, r) as f32;
        o[2] = normalize(f[2], dlo, dhi) as f32;
        o[3] = normalize(f[3], dlo, dhi) as f32;
        o[4] = normalize(f[4], dlo, dhi) as f32;
        o[5] = (f[5] / PI).clamp(-1.0, 1.0) as f32;
        o[6 + kind.one_hot_index()] = 1.0;
    }

    let base = cfg.partner_offset();
    for (slot, f) in raw.partners.iter().take(cfg.max_partners).enumerate() {
        let o = &mut out[base + slot * PARTNER_FEATURES..base + (slot + 1) * PARTNER_FEATURES];
        o[0] = normalize(f[0], slo, shi) as f32;
        o[1] = normalize(f[1], -r, r) as f32;
        o[2] = normalize(f[2], -r, r) as f32;
        o[3] = f[3] as f32;
        o[4] = f[4] as f32;
        o[5] = normalize(f[5], dlo, dhi) as f32;
        o[6] = normalize(f[6], dlo, dhi) as f32;
        o[7] = normalize(f[7], dlo, dhi) as f32;
    }
}
