//! Closed-loop action emission along planned waypoints.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Plan, PlanGraph, Planner, PlannerConfig};
use crate::embodiment::EmbodimentConfig;
use crate::error::Result;
use crate::scene::Scene;
use crate::sensor::{self, RenderOptions};
use crate::sim::{heading_error, Action, Pose, SimConfig, SimState, TaskSpec};

/// Output of the expert for one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertTrajectory {
    pub start: Pose,
    /// Grid nodes of the last plan followed.
    pub path: Vec<usize>,
    /// World positions of that plan's waypoints.
    pub waypoints: Vec<[f64; 2]>,
    pub actions: Vec<Action>,
    pub success: bool,
    pub collisions: u32,
    pub path_cost: f64,
    pub replans: u32,
    /// Why the expert stopped without success.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl ExpertTrajectory {
    pub fn steps(&self) -> usize {
        self.actions.len()
    }
}

fn rotation_toward(error: f64) -> Action {
    let mut best = Action::RotateRight30;
    let mut best_err = f64::INFINITY;
    for a in [Action::RotateRight30, Action::RotateLeft30, Action::RotateRight6, Action::RotateLeft6] {
        let e = (error - a.rotation().unwrap()).abs();
        if e < best_err {
            best = a;
            best_err = e;
        }
    }
    best
}

fn bearing(from: &Pose, x: f64, z: f64) -> f64 {
    (x - from.x).atan2(z - from.z).to_degrees()
}

enum Phase {
    Follow,
    Face,
    Scan(u32),
}

/// Drives `sim` along `plan` toward `goal` until success, truncation or failure.
pub fn emit_actions(sim: &mut SimState, planner: &Planner, plan: Plan, goal: usize) -> ExpertTrajectory {
    let cfg = planner.config;
    let g = &planner.graph;
    let to_points = |p: &Plan| -> Vec<[f64; 2]> {
        p.waypoints
            .iter()
            .map(|&k| {
                let (x, z) = g.point(p.path[k]);
                [x, z]
            })
            .collect()
    };
    let mut traj = ExpertTrajectory {
        start: sim.pose,
        path: plan.path.clone(),
        waypoints: to_points(&plan),
        actions: Vec::new(),
        success: false,
        collisions: 0,
        path_cost: plan.cost,
        replans: 0,
        failure: None,
    };
    let mut next = 0;
    let mut phase = Phase::Follow;
    let mut goal = goal;
    let mut tried = vec![goal];
    while !sim.terminal {
        if sim.success_check() {
            let r = sim.step(Action::Done).expect("episode not terminal");
            traj.actions.push(Action::Done);
            traj.success = r.success;
            break;
        }
        let pose = sim.pose;
        let action = loop {
            match phase {
                Phase::Follow => {
                    while next < traj.waypoints.len() {
                        let [x, z] = traj.waypoints[next];
                        if (x - pose.x).hypot(z - pose.z) <= cfg.waypoint_radius {
                            next += 1;
                        } else {
                            break;
                        }
                    }
                    if next == traj.waypoints.len() {
                        phase = Phase::Face;
                        continue;
                    }
                    let [x, z] = traj.waypoints[next];
                    let err = heading_error(pose.heading, bearing(&pose, x, z));
                    break Some(if err.abs() > cfg.heading_tolerance {
                        rotation_toward(err)
                    } else {
                        Action::MoveAhead
                    });
                }
                Phase::Face => {
                    let (x, z) = nearest_target_center(sim);
                    let err = heading_error(pose.heading, bearing(&pose, x, z));
                    if err.abs() > cfg.heading_tolerance {
                        break Some(rotation_toward(err));
                    }
                    phase = Phase::Scan(0);
                }
                Phase::Scan(k) => {
                    if k >= 360 / 30 {
                        break None;
                    }
                    phase = Phase::Scan(k + 1);
                    break Some(Action::RotateRight30);
                }
            }
        };
        let Some(action) = action else {
            // Nothing in view from here: look for another spot within range that sees a target.
            let alt = if tried.len() <= MAX_ALTERNATE_GOALS {
                alternate_goal(sim, planner, goal, &tried)
            } else {
                None
            };
            let replan = alt.and_then(|alt| {
                tried.push(alt);
                planner
                    .start_node(&sim.pose, g.component(alt))
                    .and_then(|s| planner.plan(s, alt))
                    .ok()
                    .map(|p| (alt, p))
            });
            if let Some((alt, p)) = replan {
                goal = alt;
                traj.path = p.path.clone();
                traj.waypoints = to_points(&p);
                traj.path_cost = p.cost;
                next = 0;
                phase = Phase::Follow;
                continue;
            }
            traj.failure = Some(if sim.distance() > sim.task.success_distance {
                "goal out of success range".into()
            } else {
                "target not visible from goal".into()
            });
            break;
        };
        let r = sim.step(action).expect("episode not terminal");
        traj.actions.push(action);
        if r.collision {
            traj.collisions += 1;
            if traj.replans >= cfg.max_replans {
                traj.failure = Some("blocked after replanning".into());
                break;
            }
            traj.replans += 1;
            let replan = planner
                .start_node(&sim.pose, g.component(goal))
                .and_then(|s| planner.plan(s, goal));
            match replan {
                Ok(p) => {
                    traj.path = p.path.clone();
                    traj.waypoints = to_points(&p);
                    traj.path_cost = p.cost;
                    next = 0;
                    phase = Phase::Follow;
                }
                Err(e) => {
                    traj.failure = Some(e.to_string());
                    break;
                }
            }
        }
    }
    if !traj.success && traj.failure.is_none() {
        traj.failure = Some("step budget exhausted".into());
    }
    traj
}

/// Goals tried after the planned one when the target stays out of view.
const MAX_ALTERNATE_GOALS: usize = 3;
/// Candidate renders per alternate-goal search.
const MAX_CANDIDATES: usize = 1000;

/// Nearest node (to the agent) in the goal's component, within range of a
/// target and away from earlier goals, from which a target shows up in the
/// cameras once the agent faces it.
fn alternate_goal(sim: &SimState, planner: &Planner, goal: usize, tried: &[usize]) -> Option<usize> {
    let g = &planner.graph;
    let reach = sim.task.success_distance - planner.config.waypoint_radius;
    let here = sim.pose;
    let mut cands = viewpoint_candidates(&sim.scene, g, g.component(goal)?, sim.targets(), reach);
    cands.retain(|&n| {
        let (x, z) = g.point(n);
        tried.iter().all(|&t| {
            let (tx, tz) = g.point(t);
            (tx - x).hypot(tz - z) >= 0.5
        })
    });
    let dist = |n: usize| {
        let (x, z) = g.point(n);
        (x - here.x).hypot(z - here.z)
    };
    cands.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
    cands.truncate(MAX_CANDIDATES);
    cands
        .into_iter()
        .find(|&n| sees_target(&sim.scene, &sim.embodiment, g.point(n), here.heading, sim.targets(), reach, &sim.config.render))
}

/// Reachable nodes of `component` within `reach` of some target footprint.
fn viewpoint_candidates(scene: &Scene, g: &PlanGraph, component: usize, targets: &[u16], reach: f64) -> Vec<usize> {
    let footprints: Vec<_> = targets.iter().filter_map(|&id| scene.instance(id)).map(|i| i.footprint).collect();
    (0..g.len())
        .filter(|&n| g.component(n) == Some(component))
        .filter(|&n| {
            let (x, z) = g.point(n);
            footprints.iter().any(|f| f.distance_to(x, z) <= reach)
        })
        .collect()
}

/// Whether an agent standing at `at`, turned toward the nearest target in
/// 6-degree steps from `heading`, sees a target within `reach`.
fn sees_target(
    scene: &Scene,
    e: &EmbodimentConfig,
    at: (f64, f64),
    heading: f64,
    targets: &[u16],
    reach: f64,
    render: &RenderOptions,
) -> bool {
    let (x, z) = at;
    let near: Vec<_> = targets
        .iter()
        .filter_map(|&id| scene.instance(id))
        .filter(|t| t.footprint.distance_to(x, z) <= reach)
        .collect();
    let Some(t) = near
        .iter()
        .min_by(|a, b| a.footprint.distance_to(x, z).total_cmp(&b.footprint.distance_to(x, z)))
    else {
        return false;
    };
    let (cx, cz) = t.footprint.center();
    // Rotations come in multiples of 6 degrees, so this is the heading the controller settles on.
    let turn = heading_error(heading, (cx - x).atan2(cz - z).to_degrees());
    let pose = Pose::new(x, z, heading + 6.0 * (turn / 6.0).round());
    (0..e.cameras.len()).any(|c| {
        sensor::render_with(scene, e, &pose, c, render)
            .map(|img| near.iter().any(|t| img.semantic.contains(&t.id)))
            .unwrap_or(false)
    })
}

/// Whether some reachable pose in `component` within `reach` of a target
/// sees that target. Checks up to `limit` candidates spread evenly over
/// distance to the target. Headings are multiples of 6 degrees.
pub fn task_feasible(
    scene: &Scene,
    e: &EmbodimentConfig,
    planner: &Planner,
    component: usize,
    targets: &[u16],
    reach: f64,
    render: &RenderOptions,
    limit: usize,
) -> bool {
    let g = &planner.graph;
    let footprints: Vec<_> = targets.iter().filter_map(|&id| scene.instance(id)).map(|i| i.footprint).collect();
    let mut cands: Vec<(f64, usize)> = viewpoint_candidates(scene, g, component, targets, reach)
        .into_iter()
        .map(|n| {
            let (x, z) = g.point(n);
            (footprints.iter().map(|f| f.distance_to(x, z)).fold(f64::INFINITY, f64::min), n)
        })
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if cands.is_empty() || limit == 0 {
        return false;
    }
    let stride = cands.len().div_ceil(limit);
    cands
        .iter()
        .step_by(stride)
        .any(|&(_, n)| sees_target(scene, e, g.point(n), 0.0, targets, reach, render))
}

fn nearest_target_center(sim: &SimState) -> (f64, f64) {
    let p = sim.pose;
    sim.targets()
        .iter()
        .filter_map(|&id| sim.scene.instance(id))
        .min_by(|a, b| {
            a.footprint
                .distance_to(p.x, p.z)
                .total_cmp(&b.footprint.distance_to(p.x, p.z))
        })
        .map(|i| i.footprint.center())
        .expect("episode has targets")
}

/// Plans and executes the expert for one episode.
pub fn plan_episode(
    scene: &Arc<Scene>,
    e: &Arc<EmbodimentConfig>,
    start: Pose,
    task: &TaskSpec,
    config: &PlannerConfig,
    sim_config: &SimConfig,
) -> Result<ExpertTrajectory> {
    let mut sim = SimState::reset(scene.clone(), e.clone(), start, task.clone(), *sim_config)?;
    let planner = Planner::new(scene, e, *config);
    let s = planner.start_node(&start, None)?;
    let goal = planner.goal_node(scene, sim.targets(), s, task.success_distance)?;
    let plan = planner.plan(s, goal)?;
    Ok(emit_actions(&mut sim, &planner, plan, goal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embodiment::preset_embodiment;
    use crate::scene::{SceneBuilder, WALL_CATEGORY};

    fn room_with_vase(vx: f64, vz: f64) -> Arc<Scene> {
        let mut b = SceneBuilder::new(0.05, 160, 160, 0);
        let w = b.add_instance(WALL_CATEGORY);
        b.add_cells(w, 0..160, 0..2, 0.0, 2.0);
        b.add_cells(w, 0..160, 158..160, 0.0, 2.0);
        b.add_cells(w, 0..2, 0..160, 0.0, 2.0);
        b.add_cells(w, 158..160, 0..160, 0.0, 2.0);
        let v = b.add_instance("vase");
        let (i, j) = ((vx / 0.05) as usize, (vz / 0.05) as usize);
        b.add_cells(v, i - 2..i + 2, j - 2..j + 2, 0.0, 0.8);
        Arc::new(b.build())
    }

    fn replay(scene: &Arc<Scene>, e: &Arc<EmbodimentConfig>, t: &ExpertTrajectory, task: &TaskSpec) -> (bool, u32) {
        let mut sim = SimState::reset(scene.clone(), e.clone(), t.start, task.clone(), SimConfig::default()).unwrap();
        for &a in &t.actions {
            sim.step(a).unwrap();
        }
        (sim.success, sim.collisions)
    }

    #[test]
    fn already_successful_emits_done() {
        let scene = room_with_vase(4.0, 5.1);
        let e = Arc::new(preset_embodiment("locobot").unwrap());
        let t = plan_episode(&scene, &e, Pose::new(4.0, 4.0, 0.0), &TaskSpec::new("vase"), &PlannerConfig::default(), &SimConfig::default()).unwrap();
        assert_eq!(t.actions, vec![Action::Done]);
        assert!(t.success);
    }

    #[test]
    fn turns_before_driving() {
        let scene = room_with_vase(4.0, 6.5);
        let e = Arc::new(preset_embodiment("locobot").unwrap());
        let mut task = TaskSpec::new("vase");
        task.success_distance = 0.5;
        let t = plan_episode(&scene, &e, Pose::new(4.0, 4.0, 330.0), &task, &PlannerConfig::default(), &SimConfig::default()).unwrap();
        assert!(t.success, "{:?}", t.failure);
        assert_eq!(t.actions.first(), Some(&Action::RotateRight30));
        assert_eq!(t.actions.last(), Some(&Action::Done));
        assert!(!t.actions.contains(&Action::MoveBack));
        // Replaying reproduces the outcome.
        assert_eq!(replay(&scene, &e, &t, &task), (true, t.collisions));
    }

    #[test]
    fn open_room_no_collisions() {
        let scene = room_with_vase(6.5, 6.5);
        let e = Arc::new(preset_embodiment("stretch_re1").unwrap());
        let task = TaskSpec::new("vase");
        let t = plan_episode(&scene, &e, Pose::new(1.0, 1.0, 180.0), &task, &PlannerConfig::default(), &SimConfig::default()).unwrap();
        assert!(t.success, "{:?}", t.failure);
        assert_eq!(t.collisions, 0);
        assert_eq!(replay(&scene, &e, &t, &task), (true, 0));
        // Deterministic.
        let again = plan_episode(&scene, &e, Pose::new(1.0, 1.0, 180.0), &task, &PlannerConfig::default(), &SimConfig::default()).unwrap();
        assert_eq!(again, t);
    }
}
