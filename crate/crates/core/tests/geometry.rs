use proptest::prelude::*;
use roadrl::geometry::{
    decimate_polyline, decimate_with_log, obb_overlap, obb_segment_separation, obb_separation, obb_touches_polyline,
    obb_touches_segment, segment_features, Obb, Pose, SpatialGrid, Vec2,
};
use roadrl::scenario::{RoadKind, RoadPolyline};
use roadrl::GeometryError;

fn v(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

/// Containment in the closed box, via its local frame.
fn inside(b: &Obb, p: Vec2) -> bool {
    let d = p - b.center;
    let (s, c) = b.heading.sin_cos();
    let lx = d.x * c + d.y * s;
    let ly = -d.x * s + d.y * c;
    lx.abs() <= b.half_extents.x + 1e-12 && ly.abs() <= b.half_extents.y + 1e-12
}

/// Corners plus `n` evenly spaced points around the perimeter.
fn boundary_samples(b: &Obb, n: usize) -> Vec<Vec2> {
    let c = b.corners();
    let mut out = c.to_vec();
    let lens: Vec<f64> = (0..4).map(|i| c[i].distance(c[(i + 1) % 4])).collect();
    let total: f64 = lens.iter().sum();
    for k in 0..n {
        let mut s = total * k as f64 / n as f64;
        for i in 0..4 {
            if s <= lens[i] {
                let t = s / lens[i];
                out.push(c[i] + (c[(i + 1) % 4] - c[i]) * t);
                break;
            }
            s -= lens[i];
        }
    }
    out
}

fn sampled_overlap(a: &Obb, b: &Obb) -> bool {
    boundary_samples(a, 10_000).iter().any(|&p| inside(b, p))
        || boundary_samples(b, 10_000).iter().any(|&p| inside(a, p))
}

fn sampled_touch(b: &Obb, p0: Vec2, p1: Vec2) -> bool {
    let n = 10_000;
    (0..=n).any(|k| inside(b, p0 + (p1 - p0) * (k as f64 / n as f64)))
}

fn arb_obb() -> impl Strategy<Value = Obb> {
    (-6.0..6.0f64, -6.0..6.0f64, 0.5..5.0f64, 0.5..3.0f64, -3.2..3.2f64)
        .prop_map(|(x, y, l, w, h)| Obb::new(v(x, y), l, w, h))
}

#[test]
fn overlap_examples() {
    let a = Obb::new(v(0.0, 0.0), 2.0, 2.0, 0.0);
    assert!(obb_overlap(&a, &Obb::new(v(1.5, 0.0), 2.0, 2.0, 0.0)));
    assert!(!obb_overlap(&a, &Obb::new(v(3.0, 0.0), 2.0, 2.0, 0.0)));
    // Touching faces count.
    assert!(obb_overlap(&a, &Obb::new(v(2.0, 0.0), 2.0, 2.0, 0.0)));
}

#[test]
fn polyline_examples() {
    let edge =
        RoadPolyline { kind: RoadKind::RoadEdge, width: 0.0, height: 0.0, points: vec![v(-5.0, 0.0), v(5.0, 0.0)] };
    assert!(obb_touches_polyline(&Obb::new(v(0.0, 0.0), 4.0, 2.0, 0.0), &edge).unwrap());
    assert!(!obb_touches_polyline(&Obb::new(v(0.0, 10.0), 4.0, 2.0, 0.0), &edge).unwrap());
    let lane = RoadPolyline { kind: RoadKind::RoadLane, ..edge };
    assert_eq!(
        obb_touches_polyline(&Obb::new(v(0.0, 0.0), 4.0, 2.0, 0.0), &lane),
        Err(GeometryError::NotRoadEdge(RoadKind::RoadLane))
    );
}

#[test]
fn segment_feature_examples() {
    let f = segment_features(v(1.0, 0.0), v(3.0, 0.0), &Pose::new(Vec2::ZERO, 0.0));
    assert!((f.midpoint - v(2.0, 0.0)).norm() < 1e-12);
    assert!((f.length - 2.0).abs() < 1e-12);
    assert!(f.orientation.abs() < 1e-12);
    let g = segment_features(v(1.0, 0.0), v(3.0, 0.0), &Pose::new(Vec2::ZERO, std::f64::consts::FRAC_PI_2));
    assert!((g.midpoint - v(0.0, -2.0)).norm() < 1e-12);
    assert!((g.orientation + std::f64::consts::FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn decimation_examples() {
    let line = [v(0.0, 0.0), v(1.0, 0.0), v(2.0, 0.0), v(2.0, 1.0)];
    assert_eq!(decimate_polyline(&line, 0.1), vec![v(0.0, 0.0), v(2.0, 0.0), v(2.0, 1.0)]);
    let tent = [v(0.0, 0.0), v(1.0, 0.5), v(2.0, 0.0)];
    assert_eq!(decimate_polyline(&tent, 0.1), tent.to_vec());
    let two = [v(0.0, 0.0), v(1.0, 1.0)];
    assert_eq!(decimate_polyline(&two, 5.0), two.to_vec());
}

#[test]
fn empty_grid_query() {
    let g = SpatialGrid::with_default_cells(Vec::new());
    assert!(g.query_radius(Vec2::ZERO, 10.0).is_empty());
}

#[test]
fn grid_boundary_inclusion() {
    let r = 10.0;
    let g = SpatialGrid::with_default_cells(vec![v(r - 1e-9, 0.0), v(r + 1e-9, 0.0), v(0.0, -r)]);
    let mut got = g.query_radius(Vec2::ZERO, r);
    got.sort();
    assert_eq!(got, vec![0, 2]);
}

fn shoelace(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn overlap_matches_sampling(a in arb_obb(), b in arb_obb()) {
        let sep = obb_separation(&a, &b);
        prop_assume!(sep.abs() > 1e-3);
        prop_assert_eq!(obb_overlap(&a, &b), sampled_overlap(&a, &b));
    }

    #[test]
    fn overlap_symmetric_and_rigid(a in arb_obb(), b in arb_obb(), t in -3.2..3.2f64, dx in -50.0..50.0f64, dy in -50.0..50.0f64) {
        prop_assume!(obb_separation(&a, &b).abs() > 1e-6);
        prop_assert_eq!(obb_overlap(&a, &b), obb_overlap(&b, &a));
        let mv = |o: &Obb| Obb { center: o.center.rotate(t) + v(dx, dy), heading: o.heading + t, ..*o };
        prop_assert_eq!(obb_overlap(&a, &b), obb_overlap(&mv(&a), &mv(&b)));
    }

    #[test]
    fn segment_touch_matches_sampling(b in arb_obb(), x0 in -8.0..8.0f64, y0 in -8.0..8.0f64, ang in -3.2..3.2f64, len in 0.1..10.0f64) {
        let p0 = v(x0, y0);
        let p1 = p0 + Vec2::from_angle(ang) * len;
        prop_assume!(obb_segment_separation(&b, p0, p1).abs() > 1e-3);
        prop_assert_eq!(obb_touches_segment(&b, p0, p1), sampled_touch(&b, p0, p1));
    }

    #[test]
    fn grid_query_equals_scan(
        pts in prop::collection::vec((-200.0..200.0f64, -200.0..200.0f64), 0..300),
        cx in -220.0..220.0f64, cy in -220.0..220.0f64, r in 0.1..120.0f64, cell in 1.0..60.0f64,
    ) {
        let points: Vec<Vec2> = pts.iter().map(|&(x, y)| v(x, y)).collect();
        let g = SpatialGrid::new(points.clone(), cell);
        let c = v(cx, cy);
        let mut got = g.query_radius(c, r);
        got.sort();
        let want: Vec<usize> = (0..points.len()).filter(|&i| points[i].distance(c) <= r).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn decimation_replay(pts in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 2..60), thr in 0.0..0.5f64) {
        let points: Vec<Vec2> = pts.iter().map(|&(x, y)| v(x, y)).collect();
        let (kept, log) = decimate_with_log(&points, thr);
        let n = points.len();
        prop_assert_eq!(kept.first(), Some(&0));
        prop_assert_eq!(kept.last(), Some(&(n - 1)));
        prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
        // Replay the removals on an explicit list: each removed point must
        // be a current interior point whose triangle is the smallest and
        // below the threshold.
        let mut cur: Vec<usize> = (0..n).collect();
        for r in &log {
            let pos = cur.iter().position(|&i| i == r.index).expect("removed twice");
            prop_assert!(pos > 0 && pos + 1 < cur.len());
            let area = shoelace(points[cur[pos - 1]], points[cur[pos]], points[cur[pos + 1]]);
            prop_assert!((area - r.area).abs() < 1e-12);
            prop_assert!(area < thr);
            let min = (1..cur.len() - 1)
                .map(|k| shoelace(points[cur[k - 1]], points[cur[k]], points[cur[k + 1]]))
                .fold(f64::INFINITY, f64::min);
            prop_assert!(area <= min + 1e-12);
            cur.remove(pos);
        }
        prop_assert_eq!(&cur, &kept);
        for k in 1..cur.len().saturating_sub(1) {
            prop_assert!(shoelace(points[cur[k - 1]], points[cur[k]], points[cur[k + 1]]) >= thr);
        }
    }

    #[test]
    fn segment_features_compose(px in -50.0..50.0f64, py in -50.0..50.0f64, h in -3.1..3.1f64,
                                ax in -50.0..50.0f64, ay in -50.0..50.0f64, bx in -50.0..50.0f64, by in -50.0..50.0f64) {
        let (p0, p1) = (v(ax, ay), v(bx, by));
        prop_assume!(p0.distance(p1) > 1e-6);
        let pose = Pose::new(v(px, py), h);
        let f = segment_features(p0, p1, &pose);
        let mid = ((p0 + p1) * 0.5 - pose.position).rotate(-h);
        prop_assert!((f.midpoint - mid).norm() < 1e-9);
        prop_assert!((f.length - p0.distance(p1)).abs() < 1e-9);
        let swapped = segment_features(p1, p0, &pose);
        prop_assert!((swapped.midpoint - f.midpoint).norm() < 1e-9);
        let d = roadrl::dynamics::wrap_angle(swapped.orientation - f.orientation).abs();
        prop_assert!((d - std::f64::consts::PI).abs() < 1e-9);
    }
}
