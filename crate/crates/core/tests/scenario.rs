use proptest::prelude::*;
use roadrl::geometry::{obb_overlap, Obb};
use roadrl::scenario::{
    alter_goals_behind, generate_scenario, load_scenario, save_scenario, select_controlled, AgentRecord, GeneratorSpec,
    InitMode, RoadKind, RoadPolyline, Scenario, Template,
};
use roadrl::ScenarioError;

const TEMPLATES: [Template; 4] = [Template::StraightRoad, Template::Curve, Template::Intersection, Template::Merge];

fn agent(id: i64, x: f64, y: f64, goal: [f64; 2]) -> AgentRecord {
    AgentRecord {
        id,
        length: 4.5,
        width: 1.9,
        height: 1.5,
        x,
        y,
        heading: 0.0,
        speed: 0.0,
        goal,
        controlled: true,
        valid: true,
        log: None,
    }
}

const MINIMAL: &str = r#"{
  "id": "minimal", "dt": 0.1, "horizon": 91,
  "roads": [
    {"kind": "road_edge", "width": 0.0, "height": 0.0, "points": [[-50, -4], [50, -4]]},
    {"kind": "road_edge", "width": 0.0, "height": 0.0, "points": [[-50, 4], [50, 4]]}
  ],
  "agents": [
    {"id": 1, "length": 4.5, "width": 1.9, "height": 1.5, "x": 0, "y": 0, "heading": 0,
     "speed": 5, "goal": [30, 0], "controlled": true, "valid": true}
  ]
}"#;

#[test]
fn minimal_file_loads() {
    let s = Scenario::from_json(MINIMAL).unwrap();
    assert_eq!(s.roads.len(), 2);
    assert_eq!(s.agents.len(), 1);
    assert!(s.roads.iter().all(|r| r.kind == RoadKind::RoadEdge));
}

#[test]
fn unknown_kind_is_schema_error() {
    let text = MINIMAL.replacen("road_edge", "traffic_light", 1);
    assert!(matches!(Scenario::from_json(&text), Err(ScenarioError::Schema(_))));
}

#[test]
fn unknown_field_rejected() {
    let text = MINIMAL.replace(r#""speed": 5"#, r#""speed": 5, "colour": "red""#);
    assert!(matches!(Scenario::from_json(&text), Err(ScenarioError::Schema(_))));
}

#[test]
fn malformed_json_is_parse_error() {
    assert!(matches!(Scenario::from_json("{\"id\": "), Err(ScenarioError::Parse(_))));
}

#[test]
fn controlled_requires_valid() {
    let text = MINIMAL.replace(r#""valid": true"#, r#""valid": false"#);
    assert!(matches!(Scenario::from_json(&text), Err(ScenarioError::Invariant(_))));
}

#[test]
fn empty_roads_and_unicode_id_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = Scenario {
        id: "straße-🚗".into(),
        dt: 0.1,
        horizon: 10,
        roads: vec![],
        agents: vec![agent(0, 0.0, 0.0, [5.0, 0.0])],
    };
    let path = dir.path().join("s.json");
    save_scenario(&s, &path).unwrap();
    assert_eq!(load_scenario(&path).unwrap(), s);
}

#[test]
fn generated_round_trip_hundred() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..100u64 {
        let spec = GeneratorSpec::new(TEMPLATES[seed as usize % 4], 1 + (seed as usize * 7) % 8);
        let s = generate_scenario(&spec, seed).unwrap();
        let path = dir.path().join(format!("{seed}.json"));
        save_scenario(&s, &path).unwrap();
        assert_eq!(load_scenario(&path).unwrap(), s, "seed {seed}");
    }
}

#[test]
fn generator_is_deterministic() {
    let spec = GeneratorSpec::new(Template::StraightRoad, 1);
    assert_eq!(generate_scenario(&spec, 7).unwrap(), generate_scenario(&spec, 7).unwrap());
}

#[test]
fn straight_goal_ahead_in_range() {
    for seed in 0..50 {
        let s = generate_scenario(&GeneratorSpec::new(Template::StraightRoad, 1), seed).unwrap();
        let a = &s.agents[0];
        let (dx, dy) = (a.goal[0] - a.x, a.goal[1] - a.y);
        let along = dx * a.heading.cos() + dy * a.heading.sin();
        let d = a.goal_distance();
        assert!((20.0..=60.0).contains(&d), "distance {d}");
        assert!(along > 0.95 * d, "goal not ahead");
    }
}

fn no_initial_overlaps(s: &Scenario) -> bool {
    let boxes: Vec<Obb> = s.agents.iter().map(|a| Obb::new(a.position(), a.length, a.width, a.heading)).collect();
    (0..boxes.len()).all(|i| (i + 1..boxes.len()).all(|j| !obb_overlap(&boxes[i], &boxes[j])))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn generated_scenes_never_overlap(t in 0usize..4, agents in 1usize..=16, seed in any::<u64>()) {
        match generate_scenario(&GeneratorSpec::new(TEMPLATES[t], agents), seed) {
            Ok(s) => {
                prop_assert!(s.validate().is_ok());
                prop_assert!(no_initial_overlaps(&s));
                prop_assert_eq!(s.agents.len(), agents);
            }
            Err(ScenarioError::Spec(_)) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn alter_is_involution(t in 0usize..4, agents in 1usize..6, seed in 0u64..1000) {
        let s = generate_scenario(&GeneratorSpec::new(TEMPLATES[t], agents), seed).unwrap();
        let once = alter_goals_behind(&s).unwrap();
        prop_assert_eq!(&once.roads, &s.roads);
        prop_assert_eq!(once.horizon, s.horizon);
        for (a, b) in once.agents.iter().zip(&s.agents) {
            prop_assert_eq!((a.x, a.y, a.heading, a.speed), (b.x, b.y, b.heading, b.speed));
            prop_assert!((a.goal_distance() - b.goal_distance()).abs() < 1e-9);
        }
        let twice = alter_goals_behind(&once).unwrap();
        for (a, b) in twice.agents.iter().zip(&s.agents) {
            prop_assert!((a.goal[0] - b.goal[0]).abs() < 1e-9 && (a.goal[1] - b.goal[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn non_trivial_selection_idempotent(t in 0usize..4, agents in 1usize..8, seed in 0u64..1000) {
        let s = generate_scenario(&GeneratorSpec::new(TEMPLATES[t], agents), seed).unwrap();
        let once = select_controlled(&s, InitMode::AllNonTrivial);
        prop_assert_eq!(select_controlled(&once, InitMode::AllNonTrivial), once.clone());
        prop_assert_eq!(select_controlled(&s, InitMode::AllObjects), s);
    }
}

#[test]
fn alter_examples() {
    let mut s =
        Scenario { id: "a".into(), dt: 0.1, horizon: 91, roads: vec![], agents: vec![agent(0, 0.0, 0.0, [10.0, 0.0])] };
    s.agents.push(agent(1, 5.0, 5.0, [5.0, 15.0]));
    let mut parked = agent(2, 20.0, 20.0, [30.0, 20.0]);
    parked.controlled = false;
    s.agents.push(parked);
    let t = alter_goals_behind(&s).unwrap();
    assert_eq!(t.agents[0].goal, [-10.0, 0.0]);
    assert_eq!(t.agents[1].goal, [5.0, -5.0]);
    assert_eq!(t.agents[2].goal, [30.0, 20.0]);
    s.agents[0].goal = [0.0, 0.0];
    assert!(matches!(alter_goals_behind(&s), Err(ScenarioError::DegenerateGoal(0))));
}

#[test]
fn non_trivial_threshold() {
    let s = Scenario {
        id: "t".into(),
        dt: 0.1,
        horizon: 91,
        roads: vec![RoadPolyline {
            kind: RoadKind::StopSign,
            width: 1.0,
            height: 1.0,
            points: vec![[3.0, 3.0].into()],
        }],
        agents: vec![agent(0, 0.0, 0.0, [1.9, 0.0]), agent(1, 10.0, 0.0, [12.1, 0.0])],
    };
    let sel = select_controlled(&s, InitMode::AllNonTrivial);
    assert!(!sel.agents[0].controlled);
    assert!(sel.agents[1].controlled);
}
