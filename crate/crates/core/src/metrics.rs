//! Scene-based and agent-based outcome metrics, error histograms and
//! correlation analysis.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::env::AgentStatus;
use crate::MetricsError;

/// Sticky end-of-episode flags of every controlled agent in one scene.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SceneOutcome {
    pub scenario_id: String,
    pub goal: Vec<bool>,
    pub collided: Vec<bool>,
    pub offroad: Vec<bool>,
}

impl SceneOutcome {
    pub fn from_statuses(scenario_id: impl Into<String>, statuses: &[AgentStatus]) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            goal: statuses.iter().map(|s| s.goal_achieved).collect(),
            collided: statuses.iter().map(|s| s.collided).collect(),
            offroad: statuses.iter().map(|s| s.offroad).collect(),
        }
    }

    pub fn n_controlled(&self) -> usize {
        self.goal.len()
    }

    pub fn counts(&self) -> Counts {
        let mut c = Counts { agents: self.n_controlled(), ..Counts::default() };
        for i in 0..self.n_controlled() {
            c.goal += usize::from(self.goal[i]);
            c.collided += usize::from(self.collided[i]);
            c.offroad += usize::from(self.offroad[i]);
            c.other += usize::from(!(self.goal[i] || self.collided[i] || self.offroad[i]));
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub agents: usize,
    pub goal: usize,
    pub collided: usize,
    pub offroad: usize,
    /// Neither flagged nor at the goal.
    pub other: usize,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.agents += o.agents;
        self.goal += o.goal;
        self.collided += o.collided;
        self.offroad += o.offroad;
        self.other += o.other;
    }

    pub fn percentages(&self) -> Percentages {
        let n = self.agents as f64;
        let pct = |k: usize| 100.0 * k as f64 / n;
        Percentages {
            goal: pct(self.goal),
            collided: pct(self.collided),
            offroad: pct(self.offroad),
            other: pct(self.other),
        }
    }
}

/// Goal, collided and off-road use independent sticky flags and may overlap;
/// other is the residual class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Percentages {
    pub goal: f64,
    pub collided: f64,
    pub offroad: f64,
    pub other: f64,
}

pub fn scene_metrics(outcome: &SceneOutcome) -> Result<Percentages, MetricsError> {
    if outcome.n_controlled() == 0 {
        return Err(MetricsError::EmptyScene);
    }
    Ok(outcome.counts().percentages())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population statistics (divide by n).
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneBased {
    pub goal: MeanStd,
    pub collided: MeanStd,
    pub offroad: MeanStd,
    pub other: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregateReport {
    pub scene_based: SceneBased,
    pub agent_based: Percentages,
    pub counts: Counts,
    /// Scenes with at least one controlled agent.
    pub n_scenes: usize,
    pub n_agents: usize,
}

impl AggregateReport {
    pub fn csv(&self) -> String {
        let s = &self.scene_based;
        let a = &self.agent_based;
        let mut out = String::from("metric,scene_mean,scene_std,agent_based\n");
        for (name, ms, ag) in [
            ("goal_achieved", s.goal, a.goal),
            ("collided", s.collided, a.collided),
            ("offroad", s.offroad, a.offroad),
            ("other", s.other, a.other),
        ] {
            out.push_str(&format!("{name},{},{},{}\n", ms.mean, ms.std, ag));
        }
        out
    }
}

/// Per-scene averages next to dataset-pooled counts. Scenes without
/// controlled agents have no percentages and are skipped.
pub fn aggregate(outcomes: &[SceneOutcome]) -> Result<AggregateReport, MetricsError> {
    let per_scene: Vec<Percentages> = outcomes.iter().filter_map(|o| scene_metrics(o).ok()).collect();
    if per_scene.is_empty() {
        return Err(MetricsError::DegenerateInput("no scene with controlled agents".into()));
    }
    let mut counts = Counts::default();
    for o in outcomes {
        counts.add(&o.counts());
    }
    let col = |f: fn(&Percentages) -> f64| MeanStd::of(&per_scene.iter().map(f).collect::<Vec<_>>());
    Ok(AggregateReport {
        scene_based: SceneBased {
            goal: col(|p| p.goal),
            collided: col(|p| p.collided),
            offroad: col(|p| p.offroad),
            other: col(|p| p.other),
        },
        agent_based: counts.percentages(),
        counts,
        n_scenes: per_scene.len(),
        n_agents: counts.agents,
    })
}

pub const HISTOGRAM_BINS: usize = 20;

/// Density histogram over `(0, 100]` percent with equal-width bins;
/// bin `k` covers `(5k, 5(k+1)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let width = 100.0 / HISTOGRAM_BINS as f64;
        let mut counts = vec![0usize; HISTOGRAM_BINS];
        for v in values {
            if v > 0.0 && v <= 100.0 {
                let k = ((v / width).ceil() as usize).clamp(1, HISTOGRAM_BINS) - 1;
                counts[k] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        let density =
            counts.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / (total as f64 * width) }).collect();
        let edges = (0..=HISTOGRAM_BINS).map(|k| k as f64 * width).collect();
        Self { edges, counts, density }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistograms {
    pub n_scenes: usize,
    pub n_unsolved: usize,
    pub unsolved_fraction: f64,
    pub collided: Histogram,
    pub offroad: Histogram,
    pub other: Histogram,
}

/// A scene is unsolved when any agent collided, went off-road, or missed its
/// goal. Histograms cover the per-scene percentages of those scenes; scenes
/// where a given error did not occur do not contribute to its histogram.
pub fn error_histograms(outcomes: &[SceneOutcome]) -> ErrorHistograms {
    let scenes: Vec<Percentages> = outcomes.iter().filter_map(|o| scene_metrics(o).ok()).collect();
    let unsolved: Vec<&Percentages> =
        scenes.iter().filter(|p| p.collided > 0.0 || p.offroad > 0.0 || p.goal < 100.0).collect();
    ErrorHistograms {
        n_scenes: scenes.len(),
        n_unsolved: unsolved.len(),
        unsolved_fraction: if scenes.is_empty() { 0.0 } else { unsolved.len() as f64 / scenes.len() as f64 },
        collided: Histogram::of(unsolved.iter().map(|p| p.collided)),
        offroad: Histogram::of(unsolved.iter().map(|p| p.offroad)),
        other: Histogram::of(unsolved.iter().map(|p| p.other)),
    }
}

/// Pearson correlation and its two-sided p-value from Student's t with
/// `n − 2` degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64), MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::DegenerateInput(format!("lengths {} and {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(MetricsError::DegenerateInput(format!("need at least 3 pairs, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::DegenerateInput("zero variance".into()));
    }
    let rho = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let dof = (n - 2) as f64;
    let p = if rho.abs() == 1.0 {
        0.0
    } else {
        let t = rho * (dof / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok((rho, p))
}
