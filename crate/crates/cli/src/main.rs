//! `embnav`: sampling, scene and dataset generation, benchmarks, evaluation
//! and trajectory plots.
//!
//! Exit status is 0 on success, 1 on a runtime error and 2 on a usage error.
//! Logs go to standard error; set `RUST_LOG` to change verbosity. Outputs
//! without an explicit path go to `$EMBNAV_OUT_DIR` (default `out`).

mod render;

use std::fs;
use std::io::Write as _;
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use clap::{error::ErrorKind, CommandFactory, Parser, Subcommand};

use embnav::dataset::{self, DatasetConfig, DatasetEpisode, EpisodeSampling, Manifest};
use embnav::embodiment::{filter_ranges, preset_embodiment, sample_embodiment, EmbodimentConfig, Interval, RangeParam, SamplingRanges};
use embnav::harness::bridge::{serve_constant, PROTOCOL_VERSION};
use embnav::harness::{make_benchmark, run_benchmark, BenchmarkReport, BenchmarkSuite, EmbodimentMode, PolicyHandle};
use embnav::planner::{plan_episode, ExpertTrajectory, Planner};
use embnav::rng::split;
use embnav::scene::{generate_scene, save_scene, SceneParams};
use embnav::sim::{Action, Pose, SimState};

const OUT_DIR_VAR: &str = "EMBNAV_OUT_DIR";

#[derive(Parser)]
#[command(name = "embnav", version, about = "Embodiment-randomized navigation simulator and benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample embodiments as JSON lines.
    SampleEmbodiments {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        seed: u64,
        /// Sampling ranges JSON (defaults to the built-in ranges).
        #[arg(long)]
        ranges: Option<PathBuf>,
        /// Narrow one parameter, e.g. `--narrow cam_height 0.4 0.8`. Repeatable.
        #[arg(long, num_args = 3, value_names = ["PARAM", "LO", "HI"], action = clap::ArgAction::Append, allow_negative_numbers = true)]
        narrow: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate one scene file.
    GenScene {
        #[arg(long)]
        seed: u64,
        /// Scene parameters JSON.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a sharded expert dataset.
    GenData {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: logical cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Also write per-episode observation sidecars.
        #[arg(long)]
        store_obs: bool,
        #[arg(long, default_value_t = 1000)]
        shard_size: u64,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        ranges: Option<PathBuf>,
    },
    /// Build a benchmark suite.
    MakeBench {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        seed: u64,
        /// `random`, `preset:NAME` or `config:FILE` (JSON list of embodiments).
        #[arg(long, default_value = "random")]
        mode: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        ranges: Option<PathBuf>,
        /// Keep every target visible from 0.3 m.
        #[arg(long)]
        low_targets: bool,
        /// Send the embodiment to external policies.
        #[arg(long)]
        disclose_embodiment: bool,
        #[arg(long)]
        success_distance: Option<f64>,
        #[arg(long)]
        max_steps: Option<u32>,
    },
    /// Evaluate a policy on a suite.
    Eval {
        #[arg(long)]
        suite: PathBuf,
        /// `expert`, `greedy`, `random[:SEED]`, `constant:ACTION`, `noisy[:SEED[:P]]` or `bridge:ENDPOINT`.
        #[arg(long, value_parser = parse_policy)]
        policy: PolicyHandle,
        #[arg(long)]
        collision_penalty: Option<f64>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Reply deadline for external policies, seconds.
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Plot a trajectory from an eval report or a dataset shard as PNG.
    Render {
        /// Eval report (needs `--suite`) or dataset shard (`.jsonl`).
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Episode id (default: the first in the file).
        #[arg(long)]
        episode: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference bridge client answering every observation with one action.
    EchoPolicy {
        /// Connect to a harness started with `bridge:listen://ADDR`.
        #[arg(long, conflicts_with = "listen")]
        connect: Option<String>,
        /// Serve harnesses started with `bridge:tcp://ADDR`.
        #[arg(long)]
        listen: Option<String>,
        #[arg(long, default_value = "MoveAhead", value_parser = parse_action)]
        action: Action,
        #[arg(long, default_value_t = PROTOCOL_VERSION)]
        protocol_version: u32,
    },
}

fn parse_policy(s: &str) -> std::result::Result<PolicyHandle, String> {
    s.parse().map_err(|e: embnav::Error| e.to_string())
}

fn parse_action(s: &str) -> std::result::Result<Action, String> {
    s.parse().map_err(|e: embnav::Error| e.to_string())
}

fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::ValueValidation, msg).exit()
}

fn out_path(out: Option<PathBuf>, default_name: &str) -> PathBuf {
    out.unwrap_or_else(|| {
        let dir = std::env::var_os(OUT_DIR_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"));
        dir.join(default_name)
    })
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_ranges(path: Option<&Path>) -> Result<SamplingRanges> {
    Ok(match path {
        Some(p) => SamplingRanges::from_json(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => SamplingRanges::default(),
    })
}

fn load_params(path: Option<&Path>) -> Result<SceneParams> {
    Ok(match path {
        Some(p) => SceneParams::from_json(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => SceneParams::default(),
    })
}

fn log_config<T: serde::Serialize>(what: &str, value: &T) -> Result<()> {
    log::info!("{what} configuration: {}", embnav::canonical_json_line(value)?);
    Ok(())
}

fn workers_or_default(w: Option<usize>) -> usize {
    w.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::SampleEmbodiments {
            n,
            seed,
            ranges,
            narrow,
            out,
        } => {
            let mut r = load_ranges(ranges.as_deref())?;
            for chunk in narrow.chunks(3) {
                let param: RangeParam = chunk[0].parse().unwrap_or_else(|e| usage_error(e));
                let num = |s: &str| -> f64 { s.parse().unwrap_or_else(|_| usage_error(format!("`{s}` is not a number"))) };
                r = filter_ranges(&r, param, Interval::new(num(&chunk[1]), num(&chunk[2])))?;
            }
            log_config("sampling", &serde_json::json!({ "n": n, "seed": seed, "ranges": r }))?;
            let path = out_path(out, "embodiments.jsonl");
            ensure_parent(&path)?;
            let mut text = String::new();
            for i in 0..n {
                let e = sample_embodiment(split(seed, i), &r)?;
                text.push_str(&embnav::canonical_json_line(&e)?);
                text.push('\n');
            }
            dataset::write_atomic(&path, text.as_bytes())?;
            println!("wrote {n} embodiments to {}", path.display());
        }
        Command::GenScene { seed, params, out } => {
            let p = load_params(params.as_deref())?;
            log_config("scene", &serde_json::json!({ "seed": seed, "params": p }))?;
            let scene = generate_scene(seed, &p)?;
            let path = out_path(out, &format!("scene-{seed}.scene"));
            ensure_parent(&path)?;
            save_scene(&scene, &path)?;
            let (ex, ez) = scene.extent();
            println!(
                "wrote {} ({ex:.2} x {ez:.2} m, {} instances)",
                path.display(),
                scene.instances.len()
            );
        }
        Command::GenData {
            n,
            seed,
            out,
            workers,
            store_obs,
            shard_size,
            params,
            ranges,
        } => {
            let mut cfg = DatasetConfig::new(n, seed);
            cfg.shard_size = shard_size;
            cfg.store_obs = store_obs;
            cfg.sampling.scene_params = load_params(params.as_deref())?;
            cfg.sampling.ranges = load_ranges(ranges.as_deref())?;
            let workers = workers_or_default(workers);
            log_config("dataset", &cfg)?;
            log::info!("workers: {workers}");
            let dir = out_path(out, &cfg.dataset_id);
            let t = Instant::now();
            let m = dataset::generate_dataset(&cfg, &dir, workers)?;
            let secs = t.elapsed().as_secs_f64();
            println!("dataset: {}", dir.display());
            println!("episodes: {}  expert successes: {}  errors: {}", m.episodes, m.successes, m.errors);
            println!(
                "elapsed: {secs:.3} s  throughput: {:.1} episodes/min",
                m.episodes as f64 / secs * 60.0
            );
        }
        Command::MakeBench {
            n,
            seed,
            mode,
            out,
            params,
            ranges,
            low_targets,
            disclose_embodiment,
            success_distance,
            max_steps,
        } => {
            let mode = parse_mode(&mode)?;
            let mut s = EpisodeSampling {
                scene_params: load_params(params.as_deref())?,
                ranges: load_ranges(ranges.as_deref())?,
                ..EpisodeSampling::default()
            };
            s.scene_params.low_targets |= low_targets;
            if let Some(d) = success_distance {
                s.success_distance = d;
            }
            if let Some(m) = max_steps {
                s.max_steps = m;
            }
            log_config("suite", &serde_json::json!({ "n": n, "seed": seed, "mode": mode, "sampling": s }))?;
            let mut suite = make_benchmark(seed, n, mode, s)?;
            suite.disclose_embodiment = disclose_embodiment;
            let path = out_path(out, &format!("{}.json", suite.suite_id));
            ensure_parent(&path)?;
            suite.save(&path)?;
            println!("wrote {} episodes to {}", suite.episodes.len(), path.display());
        }
        Command::Eval {
            suite,
            mut policy,
            collision_penalty,
            report,
            workers,
            timeout,
        } => {
            let mut s = BenchmarkSuite::load(&suite).with_context(|| format!("loading suite {}", suite.display()))?;
            if let Some(p) = collision_penalty {
                s = s.with_collision_penalty(p);
            }
            if let (PolicyHandle::External { timeout_secs, .. }, Some(t)) = (&mut policy, timeout) {
                *timeout_secs = t;
            }
            let workers = workers_or_default(workers);
            log_config("eval", &serde_json::json!({ "suite": s.suite_id, "policy": policy, "collision_penalty": collision_penalty }))?;
            let r = run_benchmark(&policy, &s, workers)?;
            let path = out_path(report, &format!("report-{}.json", s.suite_id));
            ensure_parent(&path)?;
            dataset::write_atomic(&path, (embnav::canonical_json(&r)? + "\n").as_bytes())?;
            print!("{}", r.summary.table());
            let failed = r.episodes.iter().filter(|e| e.error.is_some()).count();
            if failed > 0 {
                println!("episodes with policy errors: {failed}");
            }
            println!("report: {}", path.display());
        }
        Command::Render {
            trace,
            suite,
            episode,
            out,
        } => {
            let path = out_path(out, "trajectory.png");
            ensure_parent(&path)?;
            render_trace(&trace, suite.as_deref(), episode, &path)?;
            println!("wrote {}", path.display());
        }
        Command::EchoPolicy {
            connect,
            listen,
            action,
            protocol_version,
        } => {
            let timeout = Duration::from_secs_f64(embnav::harness::bridge::DEFAULT_TIMEOUT_SECS);
            match (connect, listen) {
                (Some(addr), None) => {
                    let stream = TcpStream::connect(&addr).with_context(|| format!("connecting to {addr}"))?;
                    let n = serve_constant(stream, action, protocol_version, timeout)?;
                    println!("episodes: {n}");
                }
                (None, Some(addr)) => {
                    let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
                    println!("listening on {}", listener.local_addr()?);
                    std::io::stdout().flush()?;
                    for stream in listener.incoming() {
                        let n = serve_constant(stream?, action, protocol_version, timeout)?;
                        log::info!("session ended after {n} episodes");
                    }
                }
                _ => usage_error("give exactly one of --connect or --listen"),
            }
        }
    }
    Ok(())
}

fn parse_mode(mode: &str) -> Result<EmbodimentMode> {
    Ok(match mode.split_once(':') {
        None if mode == "random" => EmbodimentMode::Random,
        Some(("preset", name)) => {
            preset_embodiment(name)?;
            EmbodimentMode::Preset { name: name.to_string() }
        }
        Some(("config", file)) => {
            let configs: Vec<EmbodimentConfig> = read_json(Path::new(file))?;
            for c in &configs {
                embnav::embodiment::ensure_valid(c)?;
            }
            EmbodimentMode::Supplied { configs }
        }
        _ => usage_error(format!("unknown mode `{mode}` (random, preset:NAME, config:FILE)")),
    })
}

/// Everything needed to draw one episode.
struct Drawable {
    sampling: EpisodeSampling,
    spec: dataset::EpisodeSpec,
    expert: Option<ExpertTrajectory>,
    executed: Vec<Pose>,
}

fn render_trace(trace: &Path, suite: Option<&Path>, episode: Option<u64>, out: &Path) -> Result<()> {
    let pick = |id: u64| episode.is_none_or(|e| e == id);
    let d = if trace.extension().is_some_and(|x| x == "jsonl") {
        let dir = trace.parent().unwrap_or(Path::new("."));
        let manifest = Manifest::load(dir).with_context(|| format!("loading manifest in {}", dir.display()))?;
        let records: Vec<DatasetEpisode> = dataset::read_shard(trace, None)?;
        let rec = records
            .into_iter()
            .find(|r| pick(r.episode_id))
            .context("episode not found in shard")?;
        let spec = rec.spec.context("episode has no spec (sampling failed)")?;
        let expert = rec.expert.context("episode has no expert trajectory")?;
        let (scene, e) = spec.resolve(&manifest.sampling.scene_params, &manifest.sampling.ranges)?;
        let mut sim = SimState::reset(scene, e, spec.start, spec.task.clone(), manifest.sampling.sim)?;
        let mut executed = vec![sim.pose];
        for &a in &expert.actions {
            sim.step(a)?;
            executed.push(sim.pose);
        }
        Drawable {
            sampling: manifest.sampling,
            spec,
            expert: Some(expert),
            executed,
        }
    } else {
        let Some(suite) = suite else {
            usage_error("rendering an eval report needs --suite");
        };
        let suite = BenchmarkSuite::load(suite)?;
        let report: BenchmarkReport = read_json(trace)?;
        let ep = report
            .episodes
            .into_iter()
            .find(|e| pick(e.episode_id))
            .context("episode not found in report")?;
        let spec = suite
            .episodes
            .iter()
            .find(|s| s.episode_id == ep.episode_id)
            .cloned()
            .context("episode not in suite")?;
        let mut executed = vec![spec.start];
        executed.extend(ep.trace.iter().map(|t| t.pose));
        Drawable {
            sampling: suite.sampling,
            spec,
            expert: None,
            executed,
        }
    };
    let s = &d.sampling;
    let (scene, e) = d.spec.resolve(&s.scene_params, &s.ranges)?;
    let expert = match d.expert {
        Some(t) => Some(t),
        None => plan_episode(&scene, &e, d.spec.start, &d.spec.task, &s.planner, &s.sim).ok(),
    };
    let planner = Planner::new(&scene, &e, s.planner);
    let plan: Vec<[f64; 2]> = expert
        .as_ref()
        .map(|t| {
            t.path
                .iter()
                .map(|&n| {
                    let (x, z) = planner.graph.point(n);
                    [x, z]
                })
                .collect()
        })
        .unwrap_or_default();
    let targets: Vec<u16> = scene.instances_of(&d.spec.task.target_category).map(|i| i.id).collect();
    let waypoints = expert.as_ref().map(|t| t.waypoints.clone()).unwrap_or_default();
    let img = render::draw(
        &scene,
        &Arc::clone(&e),
        &render::Overlay {
            targets: &targets,
            plan: &plan,
            waypoints: &waypoints,
            executed: &d.executed,
        },
    );
    img.save(out).with_context(|| format!("writing {}", out.display()))?;
    if !d.executed.is_empty() {
        let last = d.executed.last().unwrap();
        log::info!("episode {}: {} poses, final ({:.2}, {:.2})", d.spec.episode_id, d.executed.len(), last.x, last.z);
    }
    Ok(())
}
