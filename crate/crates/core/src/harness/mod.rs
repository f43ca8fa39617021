//! Benchmark suites, the policy contract and evaluation runs.

pub mod bridge;
pub mod policy;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bridge::{BridgePolicy, PROTOCOL_VERSION};
pub use policy::{EpisodeContext, EpisodeMetrics, EpisodeOutcome, Policy, PolicyHandle};

use crate::dataset::{sample_episode, write_atomic, EpisodeSampling, EpisodeSpec};
use crate::embodiment::{preset_embodiment, CameraConfig, Collider, EmbodimentConfig, Pivot};
use crate::error::{Error, Result};
use crate::metrics::{self, EpisodeRecord, MetricsSummary};
use crate::planner::{plan_episode, Planner};
use crate::rng::split;
use crate::scene::Scene;
use crate::sim::{Observation, Pose, SimState, TaskSpec, TraceStep};

/// How a suite assigns embodiments to episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbodimentMode {
    /// Every episode uses this preset.
    Preset { name: String },
    /// Every episode samples its own embodiment.
    Random,
    /// Episode `i` uses `configs[i % len]`.
    Supplied { configs: Vec<EmbodimentConfig> },
}

impl EmbodimentMode {
    pub fn label(&self) -> String {
        match self {
            EmbodimentMode::Preset { name } => name.clone(),
            EmbodimentMode::Random => "random".into(),
            EmbodimentMode::Supplied { .. } => "supplied".into(),
        }
    }

    fn fixed(&self, i: u64) -> Result<Option<EmbodimentConfig>> {
        match self {
            EmbodimentMode::Preset { name } => preset_embodiment(name).map(Some),
            EmbodimentMode::Random => Ok(None),
            EmbodimentMode::Supplied { configs } if configs.is_empty() => {
                Err(Error::Argument("supplied embodiment list is empty".into()))
            }
            EmbodimentMode::Supplied { configs } => Ok(Some(configs[(i % configs.len() as u64) as usize].clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSuite {
    pub suite_id: String,
    pub seed: u64,
    pub mode: EmbodimentMode,
    pub sampling: EpisodeSampling,
    /// Whether external policies receive the embodiment in `hello`.
    pub disclose_embodiment: bool,
    pub episodes: Vec<EpisodeSpec>,
}

impl BenchmarkSuite {
    pub fn validate(&self) -> Result<()> {
        if self.episodes.is_empty() {
            return Err(Error::validation("suite", "no episodes"));
        }
        let mut ids = BTreeSet::new();
        for ep in &self.episodes {
            if !ids.insert(ep.episode_id) {
                return Err(Error::validation("suite", format!("duplicate episode id {}", ep.episode_id)));
            }
            ep.task.validate()?;
        }
        Ok(())
    }

    /// Sets the collision penalty of every episode.
    pub fn with_collision_penalty(mut self, penalty: f64) -> Self {
        self.sampling.collision_penalty = penalty;
        for ep in &mut self.episodes {
            ep.task.collision_penalty = penalty;
        }
        self
    }

    pub fn to_json(&self) -> Result<String> {
        crate::canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let suite: BenchmarkSuite = serde_json::from_str(text)?;
        suite.validate()?;
        Ok(suite)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, (self.to_json()? + "\n").as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Height of the probe used to check that suite targets can be reached.
pub const PROBE_HEIGHT: f64 = 0.3;

/// A small low robot: anything it cannot reach is unreachable for every
/// reasonable embodiment that fits under the same furniture.
pub fn probe_embodiment() -> EmbodimentConfig {
    EmbodimentConfig {
        id: "probe".into(),
        collider: Collider {
            x: 0.25,
            y: PROBE_HEIGHT,
            z: 0.25,
        },
        pivot: Pivot { x: 0.0, z: 0.0 },
        cameras: vec![CameraConfig {
            pos_x: 0.0,
            pos_y: 0.28,
            pos_z: 0.0,
            pitch: 0.0,
            yaw: 0.0,
            hfov: 90.0,
            vfov: 60.0,
            width: 128,
            height: 128,
        }],
    }
}

/// Whether the probe, starting at `start`, can get within the success
/// distance of a target.
fn probe_reaches(scene: &Scene, start: &Pose, task: &TaskSpec, sampling: &EpisodeSampling) -> bool {
    let probe = probe_embodiment();
    let planner = Planner::new(scene, &probe, sampling.planner);
    let targets: Vec<u16> = scene.instances_of(&task.target_category).map(|i| i.id).collect();
    let Ok(s) = planner.start_node(start, None) else {
        return false;
    };
    let Ok(goal) = planner.goal_node(scene, &targets, s, task.success_distance) else {
        return false;
    };
    let (x, z) = planner.graph.point(goal);
    targets
        .iter()
        .filter_map(|&id| scene.instance(id))
        .any(|i| i.footprint.distance_to(x, z) <= task.success_distance)
}

/// Builds a suite of `n` episodes, one scene each.
///
/// Episode `i` is sampled from `split(seed, i)`; attempts that fail scene
/// generation, the probe reachability check or the visibility check move on
/// to the next sub-seed.
pub fn make_benchmark(seed: u64, n: u64, mode: EmbodimentMode, sampling: EpisodeSampling) -> Result<BenchmarkSuite> {
    if n < 1 {
        return Err(Error::Argument("a suite needs at least one episode".into()));
    }
    let episodes = (0..n)
        .into_par_iter()
        .map(|i| {
            let fixed = mode.fixed(i)?;
            let ep = sample_episode(split(seed, i), i, &sampling, fixed.as_ref(), |scene, start, task| {
                probe_reaches(scene, start, task, &sampling)
            })?;
            Ok(ep.spec)
        })
        .collect::<Result<Vec<_>>>()?;
    let low = if sampling.scene_params.low_targets { "-low" } else { "" };
    Ok(BenchmarkSuite {
        suite_id: format!("suite-{}-{seed}-{n}{low}", mode.label()),
        seed,
        mode,
        sampling,
        disclose_embodiment: false,
        episodes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode_id: u64,
    pub embodiment_id: String,
    pub category: String,
    pub record: EpisodeRecord,
    pub trace: Vec<TraceStep>,
    /// Why the episode was cut short (policy or protocol failure).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn episode_metrics(r: &EpisodeRecord) -> EpisodeMetrics {
    let one = std::slice::from_ref(r);
    let get = |v: Result<f64>| v.unwrap_or(0.0);
    EpisodeMetrics {
        success: get(metrics::success_rate(one)),
        sel: get(metrics::sel(one)),
        sc: get(metrics::sc(one)),
        collision_rate: get(metrics::collision_rate(one)),
        safe: get(metrics::safe_episode_rate(one)),
    }
}

/// Runs one episode: observation, action, step until terminal.
///
/// The expert's step count for the same episode is the reference length. If the
/// policy fails (timeout, bad reply) the episode ends there as a failure and
/// the error is recorded.
pub fn run_episode(policy: &mut dyn Policy, suite: &BenchmarkSuite, spec: &EpisodeSpec) -> Result<EpisodeResult> {
    let s = &suite.sampling;
    let (scene, e) = spec.resolve(&s.scene_params, &s.ranges)?;
    let expert = match plan_episode(&scene, &e, spec.start, &spec.task, &s.planner, &s.sim) {
        Ok(t) => Some(t),
        Err(err) => {
            log::warn!("episode {}: no expert reference ({err})", spec.episode_id);
            None
        }
    };
    let mut sim = SimState::reset(scene.clone(), e.clone(), spec.start, spec.task.clone(), s.sim)?;
    let targets = sim.targets().to_vec();
    let image_sizes = {
        let obs = sim.observation();
        obs.images.iter().map(|i| (i.width, i.height)).collect()
    };
    let ctx = EpisodeContext {
        spec,
        scene: &scene,
        embodiment: &e,
        targets: &targets,
        expert: expert.as_ref(),
        disclose_embodiment: suite.disclose_embodiment,
        image_sizes,
    };
    let mut trace = Vec::new();
    let mut error = policy.begin(&ctx).err().map(|e| e.to_string());
    if error.is_none() {
        let images = policy.needs_images();
        while !sim.terminal {
            let obs = if images {
                sim.observation()
            } else {
                Observation {
                    images: Vec::new(),
                    last_action_failed: sim.last_action_failed,
                }
            };
            match policy.act(sim.steps, &obs) {
                Ok(a) => {
                    let r = sim.step(a)?;
                    trace.push(sim.trace_step(a, &r));
                }
                Err(err) => {
                    error = Some(err.to_string());
                    break;
                }
            }
        }
    }
    let steps = (trace.len() as u32).max(1);
    let success = error.is_none() && sim.success;
    let record = EpisodeRecord {
        success,
        steps,
        // Without an expert the episode is its own reference.
        expert_steps: Some(expert.as_ref().map_or(steps, |t| (t.steps() as u32).max(1))),
        collisions: sim.collisions,
        group: Some(spec.task.target_category.clone()),
    };
    let outcome = EpisodeOutcome {
        episode_id: spec.episode_id,
        success,
        steps: trace.len() as u32,
        collisions: sim.collisions,
        rewards: trace.iter().map(|t| t.reward).collect(),
        metrics: episode_metrics(&record),
        error: error.clone(),
    };
    if let Err(err) = policy.end(&outcome) {
        log::warn!("episode {}: end message not delivered ({err})", spec.episode_id);
    }
    if let Some(err) = &error {
        log::warn!("episode {} failed: {err}", spec.episode_id);
    }
    Ok(EpisodeResult {
        episode_id: spec.episode_id,
        embodiment_id: e.id.clone(),
        category: spec.task.target_category.clone(),
        record,
        trace,
        error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub suite_id: String,
    pub policy: PolicyHandle,
    pub summary: MetricsSummary,
    pub by_category: BTreeMap<String, MetricsSummary>,
    pub episodes: Vec<EpisodeResult>,
}

impl BenchmarkReport {
    pub fn records(&self) -> Vec<EpisodeRecord> {
        self.episodes.iter().map(|e| e.record.clone()).collect()
    }
}

/// Evaluates `policy` on every episode of `suite`.
///
/// Built-in policies run on `workers` threads, with results in suite order.
/// An external policy is a single session, so its episodes run in order on
/// one connection.
pub fn run_benchmark(policy: &PolicyHandle, suite: &BenchmarkSuite, workers: usize) -> Result<BenchmarkReport> {
    suite.validate()?;
    let episodes = match policy {
        PolicyHandle::External { endpoint, timeout_secs } => {
            let mut bridge = BridgePolicy::open(endpoint, *timeout_secs)?;
            suite
                .episodes
                .iter()
                .map(|spec| run_episode(&mut bridge, suite, spec))
                .collect::<Result<Vec<_>>>()?
        }
        builtin => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
                .map_err(|e| Error::Argument(format!("worker pool: {e}")))?;
            pool.install(|| {
                suite
                    .episodes
                    .par_iter()
                    .map(|spec| {
                        let mut p = builtin.builtin(spec.episode_id)?;
                        run_episode(p.as_mut(), suite, spec)
                    })
                    .collect::<Result<Vec<_>>>()
            })?
        }
    };
    let records: Vec<EpisodeRecord> = episodes.iter().map(|e| e.record.clone()).collect();
    Ok(BenchmarkReport {
        suite_id: suite.suite_id.clone(),
        policy: policy.clone(),
        summary: metrics::aggregate(&records)?,
        by_category: metrics::aggregate_by_group(&records)?,
        episodes,
    })
}
