//! Sharded expert-trajectory datasets.
//!
//! Episode `i` of a dataset draws everything from `split(master_seed, i)`, so
//! the output does not depend on the worker count. Each shard is a JSONL file
//! (one key-sorted record per line) written atomically; the manifest lists
//! shards with their SHA-256 digests.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embodiment::{sample_embodiment, EmbodimentConfig, SamplingRanges};
use crate::error::{Error, Result};
use crate::planner::{plan_episode, task_feasible, ExpertTrajectory, Planner, PlannerConfig};
use crate::rng::{split, SeededRng};
use crate::scene::{generate_scene, Scene, SceneParams};
use crate::sensor::Image;
use crate::sim::{Pose, SimConfig, SimState, TaskSpec};

pub const FORMAT_VERSION: u32 = 1;

/// Where an episode's embodiment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbodimentSource {
    /// Sampled from the sampling ranges with this seed.
    Seed { seed: u64 },
    Config { config: EmbodimentConfig },
}

impl EmbodimentSource {
    pub fn resolve(&self, ranges: &SamplingRanges) -> Result<EmbodimentConfig> {
        match self {
            EmbodimentSource::Seed { seed } => sample_embodiment(*seed, ranges),
            EmbodimentSource::Config { config } => Ok(config.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub episode_id: u64,
    pub scene_seed: u64,
    pub embodiment: EmbodimentSource,
    pub start: Pose,
    pub task: TaskSpec,
}

impl EpisodeSpec {
    /// Regenerates the scene and embodiment.
    pub fn resolve(&self, params: &SceneParams, ranges: &SamplingRanges) -> Result<(Arc<Scene>, Arc<EmbodimentConfig>)> {
        Ok((
            Arc::new(generate_scene(self.scene_seed, params)?),
            Arc::new(self.embodiment.resolve(ranges)?),
        ))
    }
}

/// Episode sampling settings shared by datasets and benchmark suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSampling {
    pub scene_params: SceneParams,
    pub ranges: SamplingRanges,
    pub planner: PlannerConfig,
    pub sim: SimConfig,
    pub success_distance: f64,
    pub max_steps: u32,
    pub collision_penalty: f64,
    /// Start poses keep at least this distance from every target instance.
    pub min_start_distance: f64,
    /// Sub-seeds tried before giving up on an episode.
    pub max_attempts: u32,
}

impl Default for EpisodeSampling {
    fn default() -> Self {
        Self {
            scene_params: SceneParams::default(),
            ranges: SamplingRanges::default(),
            planner: PlannerConfig::default(),
            sim: SimConfig::default(),
            success_distance: TaskSpec::DEFAULT_SUCCESS_DISTANCE,
            max_steps: TaskSpec::DEFAULT_MAX_STEPS,
            collision_penalty: 0.0,
            min_start_distance: 2.0,
            max_attempts: 16,
        }
    }
}

/// A sampled episode with its resolved scene and embodiment.
#[derive(Debug, Clone)]
pub struct ResolvedEpisode {
    pub spec: EpisodeSpec,
    pub scene: Arc<Scene>,
    pub embodiment: Arc<EmbodimentConfig>,
}

/// Candidate views checked when testing whether a task can be solved at all.
const FEASIBILITY_VIEWS: usize = 64;

/// Samples one solvable episode from `seed`.
///
/// Attempt `k` uses `split(seed, k)` for the scene, embodiment, target
/// category and start pose. An attempt is rejected when the scene cannot be
/// generated, no start pose is far enough from the targets, or no reachable
/// pose within range of a target actually shows it in the cameras.
/// `fixed` pins the embodiment instead of sampling it.
pub fn sample_episode(
    seed: u64,
    episode_id: u64,
    sampling: &EpisodeSampling,
    fixed: Option<&EmbodimentConfig>,
    mut accept: impl FnMut(&Scene, &Pose, &TaskSpec) -> bool,
) -> Result<ResolvedEpisode> {
    let mut last = String::from("no attempts");
    for attempt in 0..sampling.max_attempts {
        let s = split(seed, attempt as u64);
        let scene_seed = split(s, 0);
        let scene = match generate_scene(scene_seed, &sampling.scene_params) {
            Ok(scene) => Arc::new(scene),
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        let source = match fixed {
            Some(config) => EmbodimentSource::Config { config: config.clone() },
            None => EmbodimentSource::Seed { seed: split(s, 1) },
        };
        let e = Arc::new(source.resolve(&sampling.ranges)?);
        let mut rng = SeededRng::new(split(s, 2));
        let present: Vec<&String> = sampling
            .scene_params
            .target_categories
            .iter()
            .filter(|c| scene.has_category(c))
            .collect();
        if present.is_empty() {
            last = "scene has no target category".into();
            continue;
        }
        let category = present[rng.index(present.len())].clone();
        let targets: Vec<u16> = scene.instances_of(&category).map(|i| i.id).collect();
        let planner = Planner::new(&scene, &e, sampling.planner);
        let g = &planner.graph;
        let footprints: Vec<_> = targets.iter().filter_map(|&id| scene.instance(id)).map(|i| i.footprint).collect();
        let starts: Vec<usize> = (0..g.len())
            .filter(|&n| {
                let (x, z) = g.point(n);
                g.is_reachable(n) && footprints.iter().all(|f| f.distance_to(x, z) >= sampling.min_start_distance)
            })
            .collect();
        if starts.is_empty() {
            last = format!("no start pose {} m from a {category}", sampling.min_start_distance);
            continue;
        }
        let node = starts[rng.index(starts.len())];
        let (x, z) = g.point(node);
        let start = Pose::new(x, z, 6.0 * rng.index(60) as f64);
        let mut task = TaskSpec::new(&category);
        task.success_distance = sampling.success_distance;
        task.max_steps = sampling.max_steps;
        task.collision_penalty = sampling.collision_penalty;
        let reach = task.success_distance - sampling.planner.waypoint_radius;
        let component = g.component(node).expect("start node is reachable");
        if !task_feasible(&scene, &e, &planner, component, &targets, reach, &sampling.sim.render, FEASIBILITY_VIEWS) {
            last = format!("no reachable view of a {category} within range");
            continue;
        }
        if !accept(&scene, &start, &task) {
            last = "rejected by caller".into();
            continue;
        }
        return Ok(ResolvedEpisode {
            spec: EpisodeSpec {
                episode_id,
                scene_seed,
                embodiment: source,
                start,
                task,
            },
            scene,
            embodiment: e,
        });
    }
    Err(Error::Generation {
        attempts: sampling.max_attempts,
        constraint: last,
    })
}

/// One dataset line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEpisode {
    pub episode_id: u64,
    pub spec: Option<EpisodeSpec>,
    pub embodiment: Option<EmbodimentConfig>,
    pub expert: Option<ExpertTrajectory>,
    pub success: bool,
    pub collisions: u32,
    pub steps: u32,
    /// Why sampling or planning failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Observation sidecar, relative to the dataset directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<SidecarRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarRef {
    pub path: String,
    pub sha256: String,
    pub frames: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub dataset_id: String,
    pub n: u64,
    pub master_seed: u64,
    pub shard_size: u64,
    pub sampling: EpisodeSampling,
    pub store_obs: bool,
}

impl DatasetConfig {
    pub fn new(n: u64, master_seed: u64) -> Self {
        Self {
            dataset_id: format!("embnav-{master_seed}-{n}"),
            n,
            master_seed,
            shard_size: 1000,
            sampling: EpisodeSampling::default(),
            store_obs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardInfo {
    pub file: String,
    pub first_episode: u64,
    pub episodes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub dataset_id: String,
    pub master_seed: u64,
    pub sampling: EpisodeSampling,
    pub store_obs: bool,
    pub shards: Vec<ShardInfo>,
    pub episodes: u64,
    pub successes: u64,
    pub errors: u64,
}

impl Manifest {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.episodes.max(1) as f64
    }

    pub fn load(dir: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn shard_bytes(records: &[DatasetEpisode]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in records {
        out.extend_from_slice(crate::canonical_json_line(r)?.as_bytes());
        out.push(b'\n');
    }
    Ok(out)
}

/// Writes a shard atomically and returns its digest.
pub fn write_shard(path: &Path, records: &[DatasetEpisode]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Argument("refusing to write an empty shard".into()));
    }
    let bytes = shard_bytes(records)?;
    write_atomic(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

/// Reads a shard, checking its digest when one is given.
pub fn read_shard(path: &Path, expected_sha256: Option<&str>) -> Result<Vec<DatasetEpisode>> {
    let bytes = fs::read(path)?;
    if let Some(expected) = expected_sha256 {
        let actual = sha256_hex(&bytes);
        if actual != expected {
            return Err(Error::Corruption {
                path: path.to_path_buf(),
                expected: expected.to_string(),
                actual,
            });
        }
    }
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
        location: format!("{} byte offset {}", path.display(), e.valid_up_to()),
        message: "shard is not UTF-8".into(),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        out.push(serde_json::from_str(line).map_err(|e| Error::Parse {
            location: format!("{} line {}, column {}", path.display(), i + 1, e.column()),
            message: e.to_string(),
        })?);
    }
    if out.is_empty() {
        return Err(Error::Argument(format!("empty shard {}", path.display())));
    }
    Ok(out)
}

/// Reads every shard of a dataset, verifying digests against the manifest.
pub fn read_dataset(dir: &Path) -> Result<(Manifest, Vec<DatasetEpisode>)> {
    let manifest = Manifest::load(dir)?;
    let mut all = Vec::new();
    for s in &manifest.shards {
        all.extend(read_shard(&dir.join(&s.file), Some(&s.sha256))?);
    }
    Ok((manifest, all))
}

/// Observation sidecar layout (little-endian): magic `EMBO`, `u32` version,
/// `u32` frame count, `u32` camera count, then per camera `u32` width and
/// `u32` height, then frames in step order, each the camera images in the
/// sensor byte layout.
pub fn encode_observations(frames: &[Vec<Image>]) -> Vec<u8> {
    let cams: &[Image] = frames.first().map(|f| f.as_slice()).unwrap_or(&[]);
    let mut out = Vec::new();
    out.extend_from_slice(b"EMBO");
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    out.extend_from_slice(&(cams.len() as u32).to_le_bytes());
    for img in cams {
        out.extend_from_slice(&img.width.to_le_bytes());
        out.extend_from_slice(&img.height.to_le_bytes());
    }
    for frame in frames {
        for img in frame {
            out.extend_from_slice(&img.to_bytes());
        }
    }
    out
}

pub fn decode_observations(bytes: &[u8]) -> Result<Vec<Vec<Image>>> {
    let bad = |offset: usize, msg: &str| Error::Parse {
        location: format!("byte offset {offset}"),
        message: msg.to_string(),
    };
    let u32_at = |o: usize| -> Result<u32> {
        bytes
            .get(o..o + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| bad(o, "truncated header"))
    };
    if bytes.get(..4) != Some(b"EMBO") {
        return Err(bad(0, "bad magic"));
    }
    if u32_at(4)? != 1 {
        return Err(bad(4, "unsupported version"));
    }
    let frames = u32_at(8)? as usize;
    let cams = u32_at(12)? as usize;
    let mut sizes = Vec::with_capacity(cams);
    for c in 0..cams {
        sizes.push((u32_at(16 + 8 * c)?, u32_at(20 + 8 * c)?));
    }
    let mut pos = 16 + 8 * cams;
    let mut out = Vec::with_capacity(frames);
    for _ in 0..frames {
        let mut frame = Vec::with_capacity(cams);
        for (c, &(w, h)) in sizes.iter().enumerate() {
            let len = w as usize * h as usize * 4;
            let chunk = bytes.get(pos..pos + len).ok_or_else(|| bad(pos, "truncated frame"))?;
            frame.push(Image::from_bytes(w, h, c as u8, chunk)?);
            pos += len;
        }
        out.push(frame);
    }
    if pos != bytes.len() {
        return Err(bad(pos, "trailing bytes"));
    }
    Ok(out)
}

/// Observations seen before each expert action, by replaying it.
pub fn render_observations(ep: &ResolvedEpisode, expert: &ExpertTrajectory, sim: &SimConfig) -> Result<Vec<Vec<Image>>> {
    let mut state = SimState::reset(ep.scene.clone(), ep.embodiment.clone(), ep.spec.start, ep.spec.task.clone(), *sim)?;
    let mut frames = Vec::with_capacity(expert.actions.len());
    for &a in &expert.actions {
        frames.push(state.observation().images);
        state.step(a)?;
    }
    Ok(frames)
}

fn run_dataset_episode(cfg: &DatasetConfig, i: u64, dir: &Path) -> Result<DatasetEpisode> {
    let mut rec = DatasetEpisode {
        episode_id: i,
        spec: None,
        embodiment: None,
        expert: None,
        success: false,
        collisions: 0,
        steps: 0,
        error: None,
        observations: None,
    };
    let s = &cfg.sampling;
    let ep = match sample_episode(split(cfg.master_seed, i), i, s, None, |_, _, _| true) {
        Ok(ep) => ep,
        Err(e) => {
            rec.error = Some(e.to_string());
            return Ok(rec);
        }
    };
    rec.spec = Some(ep.spec.clone());
    rec.embodiment = Some((*ep.embodiment).clone());
    match plan_episode(&ep.scene, &ep.embodiment, ep.spec.start, &ep.spec.task, &s.planner, &s.sim) {
        Ok(t) => {
            rec.success = t.success;
            rec.collisions = t.collisions;
            rec.steps = t.actions.len() as u32;
            if cfg.store_obs {
                let frames = render_observations(&ep, &t, &s.sim)?;
                let bytes = encode_observations(&frames);
                let rel = format!("obs/episode-{i:08}.bin");
                write_atomic(&dir.join(&rel), &bytes)?;
                rec.observations = Some(SidecarRef {
                    path: rel,
                    sha256: sha256_hex(&bytes),
                    frames: frames.len() as u32,
                });
            }
            rec.expert = Some(t);
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    Ok(rec)
}

/// Generates `cfg.n` expert episodes into `dir` using `workers` threads.
pub fn generate_dataset(cfg: &DatasetConfig, dir: &Path, workers: usize) -> Result<Manifest> {
    if cfg.n < 1 {
        return Err(Error::Argument("dataset needs at least one episode".into()));
    }
    if cfg.shard_size < 1 {
        return Err(Error::Argument("shard size must be positive".into()));
    }
    fs::create_dir_all(dir)?;
    if cfg.store_obs {
        fs::create_dir_all(dir.join("obs"))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("worker pool: {e}")))?;
    let mut shards = Vec::new();
    let (mut successes, mut errors) = (0, 0);
    let mut first = 0;
    while first < cfg.n {
        let last = (first + cfg.shard_size).min(cfg.n);
        let records: Vec<DatasetEpisode> = pool.install(|| {
            (first..last)
                .into_par_iter()
                .map(|i| run_dataset_episode(cfg, i, dir))
                .collect::<Result<Vec<_>>>()
        })?;
        successes += records.iter().filter(|r| r.success).count() as u64;
        errors += records.iter().filter(|r| r.error.is_some()).count() as u64;
        let file = format!("shard-{:05}.jsonl", shards.len());
        let sha256 = write_shard(&dir.join(&file), &records)?;
        log::info!("wrote {file}: episodes {first}..{last}");
        shards.push(ShardInfo {
            file,
            first_episode: first,
            episodes: last - first,
            sha256,
        });
        first = last;
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        dataset_id: cfg.dataset_id.clone(),
        master_seed: cfg.master_seed,
        sampling: cfg.sampling.clone(),
        store_obs: cfg.store_obs,
        shards,
        episodes: cfg.n,
        successes,
        errors,
    };
    write_atomic(&dir.join(MANIFEST_FILE), (crate::canonical_json(&manifest)? + "\n").as_bytes())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(i: u64) -> DatasetEpisode {
        DatasetEpisode {
            episode_id: i,
            spec: None,
            embodiment: None,
            expert: None,
            success: i % 2 == 0,
            collisions: 0,
            steps: 3,
            error: Some("x".into()),
            observations: None,
        }
    }

    #[test]
    fn shard_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let records: Vec<_> = (0..3).map(record).collect();
        let digest = write_shard(&path, &records).unwrap();
        assert_eq!(read_shard(&path, Some(&digest)).unwrap(), records);
        let mut bytes = fs::read(&path).unwrap();
        bytes[5] ^= 0x01;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_shard(&path, Some(&digest)), Err(Error::Corruption { .. })));
    }

    #[test]
    fn empty_shard_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(write_shard(&dir.path().join("e.jsonl"), &[]), Err(Error::Argument(_))));
    }

    #[test]
    fn sidecar_round_trip() {
        let a = Image::empty(3, 2, 0);
        let mut b = Image::masked(3, 2, 1);
        b.depth[4] = 77;
        let frames = vec![vec![a.clone(), b.clone()], vec![b, a]];
        let bytes = encode_observations(&frames);
        assert_eq!(decode_observations(&bytes).unwrap().len(), 2);
        assert!(decode_observations(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn sha256_reference() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn sampled_episode_starts_far_from_targets() {
        let s = EpisodeSampling::default();
        let ep = sample_episode(3, 0, &s, None, |_, _, _| true).unwrap();
        let d = ep
            .scene
            .instances_of(&ep.spec.task.target_category)
            .map(|i| i.footprint.distance_to(ep.spec.start.x, ep.spec.start.z))
            .fold(f64::INFINITY, f64::min);
        assert!(d >= 2.0);
        assert_eq!(ep.spec.start.heading % 6.0, 0.0);
        let (scene, e) = ep.spec.resolve(&s.scene_params, &s.ranges).unwrap();
        assert_eq!(*scene, *ep.scene);
        assert_eq!(*e, *ep.embodiment);
    }
}
