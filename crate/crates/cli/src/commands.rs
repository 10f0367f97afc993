use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use roadrl::env::{EnvConfig, PreparedScenario};
use roadrl::eval::{evaluate, prepare_all, Evaluation};
use roadrl::metrics::{
    aggregate, error_histograms, pearson, scene_metrics, AggregateReport, ErrorHistograms, SceneOutcome,
};
use roadrl::ood::{corpus_scan, OodCounts};
use roadrl::policy::{load_checkpoint, save_checkpoint, ActionMode, Checkpoint, PolicyNet};
use roadrl::ppo::{finetune, train, UpdateMetrics, METRICS_HEADER};
use roadrl::scenario::{alter_goals_behind, save_scenario, GeneratorSpec, Scenario};
use roadrl::TrainError;
use serde::Serialize;

use crate::config::{generate_set, load_scenarios, RunConfig};
use crate::error::{io_err, CliError};
use crate::render::render_frames;
use crate::trajectory::{episode_rows, read_rows, scene_outcomes, trajectory_samples, write_rows, TrajectoryRow};
use crate::{AnalyzeArgs, EvalArgs, FinetuneArgs, GenArgs, RenderKind, RolloutArgs, TrainArgs};

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.to_string()))?;
    write_file(path, text + "\n")
}

pub fn cmd_gen(args: &GenArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut base = match &args.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            toml::from_str::<GeneratorSpec>(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
        }
        None => GeneratorSpec::default(),
    };
    if let Some(n) = args.agents {
        base.agents = n;
    }
    let specs: Vec<GeneratorSpec> = if args.template.is_empty() {
        vec![base]
    } else {
        args.template.iter().map(|&t| GeneratorSpec { template: t, ..base.clone() }).collect()
    };
    let scenes = generate_set(&specs, args.count, args.seed)?;
    create_dir(&args.out)?;
    scenes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let path = args.out.join(format!("scenario_{i:05}.json"));
            save_scenario(s, &path)?;
            Ok(path)
        })
        .collect()
}

/// Paths and results of a finished training run.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub metrics_path: PathBuf,
    pub global_step: u64,
    pub metrics: Vec<UpdateMetrics>,
    pub config_hash: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    config_hash: &'a str,
    config: &'a RunConfig,
    resumed_from: Option<&'a Path>,
}

/// Streams metric rows to `path` and optionally checkpoints every
/// `interval` updates.
struct TrainLog {
    file: fs::File,
    path: PathBuf,
    out_dir: PathBuf,
    interval: usize,
    obs: roadrl::obs::ObsConfig,
    hash: String,
    quiet: bool,
}

impl TrainLog {
    fn create(path: PathBuf, cfg: &RunConfig, hash: &str, quiet: bool) -> Result<Self, CliError> {
        let mut file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        writeln!(file, "{METRICS_HEADER}").map_err(|e| io_err(&path, e))?;
        Ok(Self {
            file,
            path,
            out_dir: cfg.output_dir.clone(),
            interval: cfg.ppo.checkpoint_interval,
            obs: cfg.env.obs.clone(),
            hash: hash.to_string(),
            quiet,
        })
    }

    fn on_update(&mut self, m: &UpdateMetrics, net: &PolicyNet<f32>) -> Result<(), TrainError> {
        writeln!(self.file, "{}", m.csv_row()).map_err(|e| TrainError::Io(format!("{}: {e}", self.path.display())))?;
        if !self.quiet {
            eprintln!(
                "update {} step {} reward {:.3} goal {:.3} collision {:.3} offroad {:.3} entropy {:.3}",
                m.update, m.global_step, m.mean_reward, m.goal_rate, m.collision_rate, m.offroad_rate, m.entropy
            );
        }
        if self.interval > 0 && m.update as usize % self.interval == 0 {
            let path = self.out_dir.join(format!("checkpoint_{:06}.ckpt", m.update));
            let ckpt = Checkpoint::new(net.clone(), self.obs.clone(), m.global_step, Some(self.hash.clone()));
            save_checkpoint(&ckpt, &path)?;
        }
        Ok(())
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary, CliError> {
    let cfg = RunConfig::load(&args.config)?;
    let hash = cfg.hash();
    let scenes = cfg.scenarios()?;
    let pool = prepare_all(&scenes, &cfg.env);
    let (net, start) = match &args.resume {
        Some(p) => {
            let ckpt = load_checkpoint(p)?;
            ckpt.check_compatible(&cfg.env.obs)?;
            (ckpt.net, ckpt.header.global_step)
        }
        None => (PolicyNet::new(cfg.net_config(), cfg.seed), 0),
    };
    create_dir(&cfg.output_dir)?;
    let manifest = RunManifest { config_hash: &hash, config: &cfg, resumed_from: args.resume.as_deref() };
    write_json(&cfg.output_dir.join("run.json"), &manifest)?;
    let metrics_path = cfg.output_dir.join("metrics.csv");
    let mut log = TrainLog::create(metrics_path.clone(), &cfg, &hash, args.quiet)?;
    let out = train(&cfg.ppo, &cfg.env, &pool, net, start, |m, n| log.on_update(m, n))?;
    let checkpoint = cfg.output_dir.join("final.ckpt");
    save_checkpoint(&Checkpoint::new(out.net, cfg.env.obs.clone(), out.global_step, Some(hash.clone())), &checkpoint)?;
    Ok(TrainSummary { checkpoint, metrics_path, global_step: out.global_step, metrics: out.metrics, config_hash: hash })
}

/// Load a checkpoint and the env settings to run it with.
fn checkpoint_and_env(
    checkpoint: &Path,
    config: Option<&Path>,
) -> Result<(Checkpoint, EnvConfig, Option<String>), CliError> {
    let ckpt = load_checkpoint(checkpoint)?;
    let (env, hash) = match config {
        Some(p) => {
            let cfg = RunConfig::load(p)?;
            (cfg.env.clone(), Some(cfg.hash()))
        }
        None => (EnvConfig { obs: ckpt.header.obs.clone(), ..EnvConfig::default() }, ckpt.header.config_hash.clone()),
    };
    ckpt.check_compatible(&env.obs)?;
    Ok((ckpt, env, hash))
}

fn maybe_alter(scenes: Vec<Scenario>, alter: bool) -> Result<Vec<Scenario>, CliError> {
    if alter {
        scenes.iter().map(|s| alter_goals_behind(s).map_err(CliError::from)).collect()
    } else {
        Ok(scenes)
    }
}

#[derive(Serialize)]
struct EvalReportFile<'a> {
    config_hash: Option<&'a str>,
    checkpoint: &'a Path,
    mode: &'a str,
    /// Absent in deterministic mode, which does not use it.
    seed: Option<u64>,
    report: &'a AggregateReport,
    scenes: &'a [roadrl::metrics::SceneOutcome],
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Evaluation, CliError> {
    let (ckpt, env, hash) = checkpoint_and_env(&args.checkpoint, args.config.as_deref())?;
    let scenes = maybe_alter(load_scenarios(&args.scenarios)?, args.alter_goals_behind)?;
    let pool = prepare_all(&scenes, &env);
    let mode = if args.deterministic { ActionMode::Argmax } else { ActionMode::Sample };
    let ev = evaluate(&ckpt.net, &pool, &env, mode, args.seed)?;
    create_dir(&args.out)?;
    let file = EvalReportFile {
        config_hash: hash.as_deref(),
        checkpoint: &args.checkpoint,
        mode: if args.deterministic { "deterministic" } else { "sample" },
        seed: (!args.deterministic).then_some(args.seed),
        report: &ev.report,
        scenes: &ev.outcomes,
    };
    write_json(&args.out.join("eval_report.json"), &file)?;
    write_file(&args.out.join("eval_report.csv"), ev.report.csv())?;
    Ok(ev)
}

/// Files written by a rollout.
#[derive(Debug, Clone, Default)]
pub struct RolloutOutput {
    pub trajectory: Option<PathBuf>,
    pub frames: Vec<PathBuf>,
    pub rows: Vec<TrajectoryRow>,
}

pub fn cmd_rollout(args: &RolloutArgs) -> Result<RolloutOutput, CliError> {
    let (ckpt, env, _) = checkpoint_and_env(&args.checkpoint, args.config.as_deref())?;
    if !args.scenario.is_file() {
        return Err(CliError::data(format!("{} is not a scenario file", args.scenario.display())));
    }
    let scenes = maybe_alter(load_scenarios(&args.scenario)?, args.alter_goals_behind)?;
    let prepared = PreparedScenario::new(&scenes[0], &env);
    let mode = if args.deterministic { ActionMode::Argmax } else { ActionMode::Sample };
    let scenario = prepared.scenario.clone();
    let pool = [prepared];
    let mut batch = roadrl::env::EnvBatch::new(&pool, env.clone(), args.seed);
    let policy = roadrl::policy::NetPolicy { net: &ckpt.net, mode };
    let ep = roadrl::env::rollout_episode(&mut batch, &policy, args.seed)?.remove(0);
    create_dir(&args.out)?;
    let ids: Vec<i64> = scenario.agents.iter().map(|a| a.id).collect();
    let mut out = RolloutOutput { rows: episode_rows(&ep, &ids), ..RolloutOutput::default() };
    if args.render.contains(&RenderKind::Csv) {
        let path = args.out.join("trajectory.csv");
        write_rows(&path, &out.rows)?;
        out.trajectory = Some(path);
    }
    if args.render.contains(&RenderKind::Svg) {
        let dir = args.out.join("frames");
        create_dir(&dir)?;
        for (t, svg) in render_frames(&scenario, &ep, env.goal_radius).iter().enumerate() {
            let path = dir.join(format!("frame_{t:05}.svg"));
            write_file(&path, svg)?;
            out.frames.push(path);
        }
    }
    Ok(out)
}

pub fn cmd_finetune(args: &FinetuneArgs) -> Result<TrainSummary, CliError> {
    let cfg = RunConfig::load(&args.config)?;
    let hash = cfg.hash();
    let ckpt = load_checkpoint(&args.checkpoint)?;
    ckpt.check_compatible(&cfg.env.obs)?;
    let scenes = match &args.scenarios {
        Some(p) => load_scenarios(p)?,
        None => cfg.scenarios()?,
    };
    let scenes = maybe_alter(scenes, args.alter_goals_behind)?;
    let pool = prepare_all(&scenes, &cfg.env);
    create_dir(&cfg.output_dir)?;
    let metrics_path = cfg.output_dir.join("finetune_metrics.csv");
    let mut log = TrainLog::create(metrics_path.clone(), &cfg, &hash, args.quiet)?;
    let out = finetune(&ckpt, &cfg.ppo, &cfg.env, &pool, |m, n| log.on_update(m, n))?;
    let checkpoint = args.out.clone().unwrap_or_else(|| cfg.output_dir.join("finetuned.ckpt"));
    save_checkpoint(&Checkpoint::new(out.net, cfg.env.obs.clone(), out.global_step, Some(hash.clone())), &checkpoint)?;
    Ok(TrainSummary { checkpoint, metrics_path, global_step: out.global_step, metrics: out.metrics, config_hash: hash })
}

#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub ood: OodCounts,
    pub errors: ErrorHistograms,
    /// Collision rate against off-road rate over unsolved scenes; absent
    /// when either has zero variance or fewer than three scenes.
    pub correlation: Option<Correlation>,
    /// Absent when no scenario had controlled agents.
    pub report: Option<AggregateReport>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Correlation {
    pub rho: f64,
    pub p_value: f64,
}

fn unsolved_correlation(outcomes: &[SceneOutcome]) -> Option<Correlation> {
    let (x, y): (Vec<f64>, Vec<f64>) = outcomes
        .iter()
        .filter_map(|o| scene_metrics(o).ok())
        .filter(|p| p.collided > 0.0 || p.offroad > 0.0 || p.goal < 100.0)
        .map(|p| (p.collided, p.offroad))
        .unzip();
    pearson(&x, &y).ok().map(|(rho, p_value)| Correlation { rho, p_value })
}

fn csv_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| io_err(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(CliError::data(format!("{} does not exist", p.display())));
        }
    }
    Ok(files)
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<Analysis, CliError> {
    let mut rows = Vec::new();
    for f in csv_inputs(&args.inputs)? {
        rows.extend(read_rows(&f)?);
    }
    if rows.is_empty() {
        return Err(CliError::data("no trajectory rows in the given inputs"));
    }
    let samples = trajectory_samples(&rows);
    let ood = corpus_scan(samples.values())?;
    let outcomes = scene_outcomes(&rows);
    let analysis = Analysis {
        ood,
        errors: error_histograms(&outcomes),
        correlation: unsolved_correlation(&outcomes),
        report: aggregate(&outcomes).ok(),
    };
    create_dir(&args.out)?;
    write_file(&args.out.join("ood.csv"), ood.csv())?;
    write_json(&args.out.join("analysis.json"), &analysis)?;
    Ok(analysis)
}
