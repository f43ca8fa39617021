//! Acceptance suite: one test per release criterion.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use petgraph::algo::dijkstra;
use petgraph::graph::{DiGraph, NodeIndex};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use embnav::dataset::EpisodeSampling;
use embnav::embodiment::{
    filter_ranges, preset_embodiment, sample_embodiment, validate, EmbodimentConfig, Interval, RangeParam,
    SamplingRanges,
};
use embnav::harness::{make_benchmark, run_benchmark, EmbodimentMode, PolicyHandle};
use embnav::metrics::{self, EpisodeRecord};
use embnav::planner::{astar, plan_episode, PlanGraph, Planner, PlannerConfig};
use embnav::rng::{split, SeededRng};
use embnav::scene::{generate_scene, Aabb2, SceneBuilder, SceneParams, WALL_CATEGORY};
use embnav::sim::{check_collision, Action, Pose, SimConfig, SimState, TaskSpec};

fn dijkstra_costs(g: &PlanGraph, start: usize) -> Vec<Option<f64>> {
    let mut pg = DiGraph::<(), f64>::new();
    let ids: Vec<NodeIndex> = (0..g.len()).map(|_| pg.add_node(())).collect();
    for a in 0..g.len() {
        for (b, w) in g.neighbors(a) {
            pg.add_edge(ids[a], ids[b], w);
        }
    }
    let dist = dijkstra(&pg, ids[start], None, |e| *e.weight());
    ids.iter().map(|id| dist.get(id).copied()).collect()
}

#[test]
fn planner_optimality() {
    let t0 = Instant::now();
    let mut checked = 0;
    for i in 0..100u64 {
        let mut rng = SeededRng::new(split(1000, i));
        let n = 64;
        let reachable: Vec<bool> = (0..n * n).map(|_| rng.bernoulli(0.8)).collect();
        let cost: Vec<f64> = (0..n * n).map(|_| rng.uniform(1.0, 8000.0)).collect();
        let g = PlanGraph::from_parts(n, n, 0.1, (0.05, 0.05), reachable, cost).unwrap();
        let nodes: Vec<usize> = (0..g.len()).filter(|&k| g.is_reachable(k)).collect();
        let s = nodes[rng.index(nodes.len())];
        let oracle = dijkstra_costs(&g, s);
        for _ in 0..5 {
            let t = nodes[rng.index(nodes.len())];
            match (astar(&g, s, t), oracle[t]) {
                (Ok((_, c)), Some(best)) => {
                    assert!((c - best).abs() <= 1e-9 * best.max(1.0), "graph {i}: {c} vs {best}");
                    checked += 1;
                }
                (Err(_), None) => {}
                (r, o) => panic!("graph {i}: astar {:?}, dijkstra {o:?}", r.map(|x| x.1)),
            }
        }
    }
    assert!(checked > 250);
    assert!(t0.elapsed().as_secs_f64() < 10.0, "took {:?}", t0.elapsed());
}

#[test]
fn waypoint_soundness() {
    let params = SceneParams::default();
    let mut plans = 0;
    for i in 0..10u64 {
        let scene = generate_scene(split(2000, i), &params).unwrap();
        let e = sample_embodiment(split(2001, i), &SamplingRanges::default()).unwrap();
        let planner = Planner::new(&scene, &e, PlannerConfig::default());
        let g = &planner.graph;
        let mut rng = SeededRng::new(i);
        let nodes: Vec<usize> = (0..g.len()).filter(|&n| g.is_reachable(n)).collect();
        let s = nodes[rng.index(nodes.len())];
        let comp: Vec<usize> = nodes.iter().copied().filter(|&n| g.component(n) == g.component(s)).collect();
        for _ in 0..5 {
            let plan = planner.plan(s, comp[rng.index(comp.len())]).unwrap();
            let poly: f64 = plan
                .waypoints
                .windows(2)
                .map(|w| g.segment_cost(plan.path[w[0]], plan.path[w[1]]))
                .sum();
            assert!(poly <= plan.cost * (1.0 + 1e-6), "scene {i}: {poly} > {}", plan.cost);
            plans += 1;
        }
    }
    assert_eq!(plans, 50);
}

#[test]
fn reward_telescoping() {
    let params = SceneParams::default();
    let cfg = SimConfig::default();
    for i in 0..20u64 {
        let scene = Arc::new(generate_scene(split(3000, i), &params).unwrap());
        let e = Arc::new(sample_embodiment(split(3001, i), &SamplingRanges::default()).unwrap());
        let g = Planner::new(&scene, &e, PlannerConfig::default()).graph;
        let nodes: Vec<usize> = (0..g.len()).filter(|&n| g.is_reachable(n)).collect();
        let category = params.target_categories.iter().find(|c| scene.has_category(c)).unwrap();
        let mut rng = SeededRng::new(split(3002, i));
        for k in 0..50 {
            let (x, z) = g.point(nodes[rng.index(nodes.len())]);
            let mut task = TaskSpec::new(category);
            task.collision_penalty = if k % 2 == 0 { 0.0 } else { 0.1 };
            let mut sim = SimState::reset(scene.clone(), e.clone(), Pose::new(x, z, 6.0 * rng.index(60) as f64), task, cfg)
                .unwrap();
            let d0 = sim.distance();
            let mut total = 0.0;
            while !sim.terminal {
                // Done is rare so episodes run long.
                let a = if rng.bernoulli(0.01) { Action::Done } else { Action::ALL[rng.index(6)] };
                total += sim.step(a).unwrap().reward;
            }
            let expected = (d0 - sim.min_distance) + if sim.success { cfg.success_reward } else { 0.0 }
                - cfg.step_penalty * sim.steps as f64
                - sim.task.collision_penalty * sim.collisions as f64;
            assert!((total - expected).abs() < 1e-9, "scene {i} run {k}: {total} vs {expected}");
        }
    }
}

#[test]
fn sc_sel_arithmetic() {
    let records = [
        EpisodeRecord::new(true, 10, 10, 0),
        EpisodeRecord::new(true, 20, 10, 1),
        EpisodeRecord::new(true, 8, 10, 3),
        EpisodeRecord::new(false, 40, 12, 2),
    ];
    let m = metrics::aggregate(&records).unwrap();
    assert_eq!(m.success_rate, 0.75);
    assert_eq!(m.sc, 0.4375);
    assert_eq!(m.sel, 0.625);
    assert!((m.collision_rate - 0.11875).abs() < 1e-15);
    assert_eq!(m.safe_episode_rate, 0.25);
}

/// An 8 m room with a table whose top spans from the left wall to x = 6 m.
fn table_room() -> (Arc<embnav::scene::Scene>, Aabb2) {
    let mut b = SceneBuilder::new(0.05, 160, 160, 0);
    let w = b.add_instance(WALL_CATEGORY);
    b.add_cells(w, 0..160, 0..2, 0.0, 2.5);
    b.add_cells(w, 0..160, 158..160, 0.0, 2.5);
    b.add_cells(w, 0..2, 0..160, 0.0, 2.5);
    b.add_cells(w, 158..160, 0..160, 0.0, 2.5);
    let table = Aabb2::new(0.1, 3.5, 6.0, 4.5);
    let t = b.add_instance("dining_table");
    b.add_box(t, table, 0.6, 0.75);
    let v = b.add_instance("vase");
    b.add_box(v, Aabb2::new(1.9, 6.9, 2.1, 7.1), 0.0, 0.5);
    (Arc::new(b.build()), table)
}

fn with_height(base: &EmbodimentConfig, y: f64) -> Arc<EmbodimentConfig> {
    let mut e = base.clone();
    e.id = format!("height-{y}");
    e.collider.y = y;
    e.cameras[0].pos_y = y - 0.05;
    // Tilted down so a low target stays in view at either height.
    e.cameras[0].pitch = 30.0;
    assert!(validate(&e).is_empty());
    Arc::new(e)
}

#[test]
fn embodiment_adaptive() {
    let (scene, table) = table_room();
    let base = preset_embodiment("locobot").unwrap();
    let short = with_height(&base, 0.4);
    let tall = with_height(&base, 1.4);
    let start = Pose::new(2.0, 1.5, 0.0);
    let task = TaskSpec::new("vase");
    let (pc, sc) = (PlannerConfig::default(), SimConfig::default());
    let ts = plan_episode(&scene, &short, start, &task, &pc, &sc).unwrap();
    let tt = plan_episode(&scene, &tall, start, &task, &pc, &sc).unwrap();
    assert!(ts.success && tt.success, "{:?} {:?}", ts.failure, tt.failure);
    let ratio = ts.steps() as f64 / tt.steps() as f64;
    assert!(ratio <= 0.67, "short {} vs tall {} steps", ts.steps(), tt.steps());
    // The tall agent never passes under the table.
    let mut sim = SimState::reset(scene.clone(), tall.clone(), start, task, sc).unwrap();
    for &a in &tt.actions {
        sim.step(a).unwrap();
        let (cx, cz) = sim.pose.collider_center(&tall);
        assert!(table.distance_to(cx, cz) > 0.0, "centre under the table at {:?}", sim.pose);
        // The table blocks below 1.4 m, so any footprint overlap is a collision.
        assert!(!check_collision(&scene, &tall, &sim.pose));
    }
}

#[test]
fn collision_penalty() {
    let suite = make_benchmark(4000, 100, EmbodimentMode::Random, EpisodeSampling::default()).unwrap();
    let policy = PolicyHandle::NoisyExpert { seed: 7, p: 0.2 };
    let free = run_benchmark(&policy, &suite.clone().with_collision_penalty(0.0), 1).unwrap();
    let paid = run_benchmark(&policy, &suite.with_collision_penalty(0.1), 1).unwrap();
    let mut collisions = 0;
    for (a, b) in free.episodes.iter().zip(&paid.episodes) {
        assert_eq!(a.trace.len(), b.trace.len());
        let (mut ta, mut tb) = (0.0, 0.0);
        let mut c = 0u32;
        for (x, y) in a.trace.iter().zip(&b.trace) {
            assert_eq!((x.action, x.pose, x.collision), (y.action, y.pose, y.collision));
            assert_eq!(x.terms.collision_penalty, 0.0);
            assert_eq!(y.terms.collision_penalty, if y.collision { 0.1 } else { 0.0 });
            ta += x.reward;
            tb += y.reward;
            c += y.collision as u32;
        }
        assert!((tb - ta + 0.1 * c as f64).abs() < 1e-12, "episode {}", a.episode_id);
        assert_eq!(c, b.record.collisions);
        collisions += c;
    }
    assert!(collisions > 0, "no collisions; the check would be vacuous");
    // Safe and CR recomputed from the traces.
    let n = paid.episodes.len() as f64;
    let safe = paid.episodes.iter().filter(|e| e.trace.iter().all(|t| !t.collision)).count() as f64 / n;
    let cr = paid
        .episodes
        .iter()
        .map(|e| e.trace.iter().filter(|t| t.collision).count() as f64 / e.trace.len().max(1) as f64)
        .sum::<f64>()
        / n;
    assert_eq!(paid.summary.safe_episode_rate, safe);
    assert!((paid.summary.collision_rate - cr).abs() < 1e-15);
    assert_eq!(free.summary.safe_episode_rate, paid.summary.safe_episode_rate);
    assert_eq!(free.summary.collision_rate, paid.summary.collision_rate);
}

/// Pearson p-value of `u` (values in [0, 1)) against equal-width bins with probabilities `probs`.
fn chi_square_p(name: &str, u: &[f64], probs: &[f64]) -> f64 {
    let mut counts = vec![0.0; probs.len()];
    for &v in u {
        assert!((0.0..1.0).contains(&v), "{name}: {v} out of range");
        counts[((v * probs.len() as f64) as usize).min(probs.len() - 1)] += 1.0;
    }
    let n = u.len() as f64;
    let stat: f64 = counts.iter().zip(probs).map(|(o, p)| (o - n * p).powi(2) / (n * p)).sum();
    1.0 - ChiSquared::new((probs.len() - 1) as f64).unwrap().cdf(stat)
}

/// Bin probabilities for an integer drawn uniformly from `[lo, hi]`, binned as above.
fn integer_bins(lo: u32, hi: u32) -> Vec<f64> {
    let count = (hi - lo + 1) as f64;
    let mut p = vec![0.0; 10];
    for v in lo..=hi {
        let u = (v - lo) as f64 / count;
        p[((u * 10.0) as usize).min(9)] += 1.0 / count;
    }
    p
}

#[test]
fn sampling_fidelity() {
    let r = SamplingRanges::default();
    let samples: Vec<EmbodimentConfig> =
        (0..10_000).map(|i| sample_embodiment(split(5000, i), &r).unwrap()).collect();
    let frac = |v: f64, iv: Interval| (v - iv.lo) / (iv.hi - iv.lo);
    let mut dims: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    let uniform = vec![0.1; 10];
    let mut add = |name: &str, u: Vec<f64>, p: &Vec<f64>| dims.push((name.to_string(), u, p.clone()));
    let two = samples.iter().filter(|e| e.cameras.len() == 2).count() as f64;
    add("collider_x", samples.iter().map(|e| frac(e.collider.x, r.collider_x)).collect(), &uniform);
    add("collider_z", samples.iter().map(|e| frac(e.collider.z, r.collider_z)).collect(), &uniform);
    add(
        "collider_y",
        samples
            .iter()
            .map(|e| {
                let mut lo = r.collider_y.lo.max(r.camera1.pos_y.lo);
                if e.cameras.len() == 2 {
                    lo = lo.max(r.camera2.pos_y.lo);
                }
                frac(e.collider.y, Interval::new(lo, r.collider_y.hi))
            })
            .collect(),
        &uniform,
    );
    add("pivot_x", samples.iter().map(|e| frac(e.pivot.x / e.collider.x, r.pivot_x_frac)).collect(), &uniform);
    add("pivot_z", samples.iter().map(|e| frac(e.pivot.z / e.collider.z, r.pivot_z_frac)).collect(), &uniform);
    for (k, cr) in [(0usize, &r.camera1), (1, &r.camera2)] {
        let cams: Vec<(&EmbodimentConfig, &embnav::embodiment::CameraConfig)> =
            samples.iter().filter_map(|e| e.cameras.get(k).map(|c| (e, c))).collect();
        let name = |s: &str| format!("cam{}_{s}", k + 1);
        add(&name("pos_x"), cams.iter().map(|(e, c)| frac(c.pos_x / e.collider.x, cr.pos_x_frac)).collect(), &uniform);
        add(&name("pos_z"), cams.iter().map(|(e, c)| frac(c.pos_z / e.collider.z, cr.pos_z_frac)).collect(), &uniform);
        add(
            &name("pos_y"),
            cams.iter()
                .map(|(e, c)| frac(c.pos_y, Interval::new(cr.pos_y.lo, cr.pos_y.hi.min(e.collider.y))))
                .collect(),
            &uniform,
        );
        add(&name("pitch"), cams.iter().map(|(_, c)| frac(c.pitch, cr.pitch)).collect(), &uniform);
        add(&name("hfov"), cams.iter().map(|(_, c)| frac(c.hfov, cr.hfov)).collect(), &uniform);
        add(&name("vfov"), cams.iter().map(|(_, c)| frac(c.vfov, cr.vfov)).collect(), &uniform);
        if cr.yaw.width() > 0.0 {
            add(&name("yaw"), cams.iter().map(|(_, c)| frac(c.yaw, cr.yaw)).collect(), &uniform);
        } else {
            assert!(cams.iter().all(|(_, c)| c.yaw == cr.yaw.lo));
        }
        let wb = integer_bins(cr.width.lo as u32, cr.width.hi as u32);
        let hb = integer_bins(cr.height.lo as u32, cr.height.hi as u32);
        let count_w = (cr.width.hi - cr.width.lo + 1.0) as f64;
        let count_h = (cr.height.hi - cr.height.lo + 1.0) as f64;
        add(&name("width"), cams.iter().map(|(_, c)| (c.width as f64 - cr.width.lo) / count_w).collect(), &wb);
        add(&name("height"), cams.iter().map(|(_, c)| (c.height as f64 - cr.height.lo) / count_h).collect(), &hb);
    }
    // Camera count: two bins with the configured probability.
    let n = samples.len() as f64;
    let stat = (two - n * r.two_camera_prob).powi(2) / (n * r.two_camera_prob)
        + ((n - two) - n * (1.0 - r.two_camera_prob)).powi(2) / (n * (1.0 - r.two_camera_prob));
    assert!(1.0 - ChiSquared::new(1.0).unwrap().cdf(stat) > 0.001, "camera count: {two}");
    for (name, u, p) in &dims {
        let pv = chi_square_p(name, u, p);
        assert!(pv > 0.001, "{name}: p = {pv}");
    }
    for e in &samples {
        assert!(validate(e).is_empty(), "{}", e.id);
    }

    // Narrowed ranges are respected exactly.
    let mut narrow = r.clone();
    for (p, lo, hi) in [
        (RangeParam::CamHeight, 0.4, 0.8),
        (RangeParam::CamVfov, 40.0, 60.0),
        (RangeParam::CamPitch, -20.0, -2.0),
        (RangeParam::Collider, 0.20, 0.32),
    ] {
        narrow = filter_ranges(&narrow, p, Interval::new(lo, hi)).unwrap();
    }
    for i in 0..10_000 {
        let e = sample_embodiment(split(6000, i), &narrow).unwrap();
        assert!((0.20..=0.32).contains(&e.collider.x) && (0.20..=0.32).contains(&e.collider.z));
        for c in &e.cameras {
            assert!((0.4..=0.8).contains(&c.pos_y), "{}", c.pos_y);
            assert!((40.0..=60.0).contains(&c.vfov));
            assert!((-20.0..=-2.0).contains(&c.pitch));
        }
    }
}

fn gen_data(dir: &Path, n: u64, workers: usize) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_embnav"))
        .args(["gen-data", "--n", &n.to_string(), "--seed", "11", "--workers", &workers.to_string()])
        .arg("--out")
        .arg(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("w1"), tmp.path().join("w8"));
    gen_data(&a, 100, 1);
    gen_data(&b, 100, 8);
    let (fa, fb) = (dir_bytes(&a), dir_bytes(&b));
    assert!(fa.iter().any(|(n, _)| n == "manifest.json"));
    assert!(fa.iter().any(|(n, _)| n.ends_with(".jsonl")));
    assert_eq!(fa, fb);
}

#[test]
fn expert_quality() {
    let suite = make_benchmark(7000, 200, EmbodimentMode::Random, EpisodeSampling::default()).unwrap();
    let report = run_benchmark(&PolicyHandle::ExpertReplay, &suite, 1).unwrap();
    let s = &report.summary;
    assert_eq!(s.episodes, 200);
    assert!(s.success_rate >= 0.95, "success {}", s.success_rate);
    assert!(s.safe_episode_rate >= 0.90, "safe {}", s.safe_episode_rate);
}

#[test]
fn throughput() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = gen_data(tmp.path(), 50, 1);
    let rate: f64 = stdout
        .split("throughput:")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| panic!("no throughput line in {stdout}"));
    assert!(rate >= 50.0, "{rate} episodes/min");
}
