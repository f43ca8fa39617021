//! The safety-shaped expert.
//!
//! Pipeline: reachable nodes on a 0.1 m grid for the embodiment's footprint
//! disc, a clipped inverse-cube obstacle-distance cost per node, A* over
//! the 8-connected graph with max-endpoint edge weights, greedy waypoint
//! skipping that never raises path cost, then a closed-loop controller that
//! turns toward each waypoint and drives until the target is in view and in
//! range.

mod expert;
mod graph;
mod grid;

pub use expert::{emit_actions, plan_episode, task_feasible, ExpertTrajectory};
pub use graph::{astar, extract_waypoints, PlanGraph};
pub use grid::{distance_field, grid_from_map, reachable_grid, reachable_grid_with, CostField, ObstacleMap, ReachGrid};

use serde::{Deserialize, Serialize};

use crate::embodiment::EmbodimentConfig;
use crate::error::{Error, Result};
use crate::scene::Scene;
use crate::sim::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Grid node spacing, meters.
    pub spacing: f64,
    /// Obstacle distance is clipped to this range before taking `d^-3`.
    pub distance_clip: (f64, f64),
    /// Extra clearance added to the footprint disc for reachability.
    pub reach_margin: f64,
    /// Heading error (degrees) above which the controller rotates.
    pub heading_tolerance: f64,
    /// A waypoint counts as reached within this distance.
    pub waypoint_radius: f64,
    /// Relative slack when comparing a shortcut with the path it replaces.
    pub skip_epsilon: f64,
    /// Replans allowed after blocked actions.
    pub max_replans: u32,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            spacing: 0.1,
            distance_clip: (0.05, 1.0),
            reach_margin: 0.0,
            heading_tolerance: 3.0,
            waypoint_radius: 0.25,
            skip_epsilon: 1e-6,
            max_replans: 1,
        }
    }
}

/// A node path with its cost and the waypoint subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub path: Vec<usize>,
    pub cost: f64,
    /// Indices into `path`.
    pub waypoints: Vec<usize>,
}

/// Grid, cost field and graph for one scene and embodiment.
#[derive(Debug, Clone)]
pub struct Planner {
    pub config: PlannerConfig,
    pub grid: ReachGrid,
    pub field: CostField,
    pub graph: PlanGraph,
}

impl Planner {
    pub fn new(scene: &Scene, e: &EmbodimentConfig, config: PlannerConfig) -> Self {
        let grid = reachable_grid_with(scene, e, config.spacing, config.reach_margin, config.distance_clip.1);
        let field = distance_field(&grid, config.distance_clip);
        let graph = PlanGraph::new(&grid, &field);
        Self {
            config,
            grid,
            field,
            graph,
        }
    }

    /// Reachable node nearest to a pose.
    pub fn start_node(&self, pose: &Pose, component: Option<usize>) -> Result<usize> {
        self.graph.nearest_reachable(pose.x, pose.z, component).ok_or_else(|| {
            Error::NoReachableNode(format!("no reachable node near ({:.3}, {:.3})", pose.x, pose.z))
        })
    }

    /// The node of `start`'s component closest to any target footprint.
    ///
    /// If that node is farther than `within` from every target while another
    /// component gets closer, the goal is reported unreachable.
    pub fn goal_node(&self, scene: &Scene, targets: &[u16], start: usize, within: f64) -> Result<usize> {
        let footprints: Vec<_> = targets.iter().filter_map(|&id| scene.instance(id)).map(|i| i.footprint).collect();
        if footprints.is_empty() {
            return Err(Error::Task("no target instances".into()));
        }
        let g = &self.graph;
        let home = g.component(start);
        let mut best_home: Option<(f64, usize)> = None;
        let mut best_any: Option<(f64, usize)> = None;
        for n in 0..g.len() {
            if !g.is_reachable(n) {
                continue;
            }
            let (x, z) = g.point(n);
            let d = footprints.iter().map(|f| f.distance_to(x, z)).fold(f64::INFINITY, f64::min);
            if best_any.is_none_or(|(bd, _)| d < bd) {
                best_any = Some((d, n));
            }
            if g.component(n) == home && best_home.is_none_or(|(bd, _)| d < bd) {
                best_home = Some((d, n));
            }
        }
        let (dh, home_goal) = best_home.ok_or_else(|| Error::NoReachableNode("start node is not reachable".into()))?;
        let (da, any_goal) = best_any.expect("home component is non-empty");
        if dh > within && da < dh {
            let (cs, cg) = (home.unwrap(), g.component(any_goal).unwrap());
            return Err(Error::Unreachable {
                start_component: cs,
                start_size: g.component_size(cs),
                goal_component: cg,
                goal_size: g.component_size(cg),
            });
        }
        Ok(home_goal)
    }

    pub fn plan(&self, start: usize, goal: usize) -> Result<Plan> {
        let (mut path, cost) = astar(&self.graph, start, goal)?;
        if path.is_empty() {
            path.push(start);
        }
        let waypoints = extract_waypoints(&self.graph, &path, self.config.skip_epsilon);
        Ok(Plan { path, cost, waypoints })
    }
}
