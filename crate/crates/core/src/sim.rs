//! The navigation environment.
//!
//! Actions are discrete (0.2 m translations, 30°/6° yaw rotations about the
//! pivot, and `Done`). Motion is swept: translations are tested every
//! 2.5 cm and rotations every 2°, and a blocked action leaves the pose
//! untouched. Reward is progress on the running minimum target distance,
//! a success bonus on a successful `Done`, a step penalty and an optional
//! collision penalty.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embodiment::EmbodimentConfig;
use crate::error::{Error, Result};
use crate::scene::Scene;
use crate::sensor::{self, Image, RenderOptions};

/// Agent pose: pivot location on the floor plane and heading in degrees.
/// Heading 0 faces +z; positive rotation is clockwise seen from above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub z: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, z: f64, heading: f64) -> Self {
        Self {
            x,
            z,
            heading: normalize_heading(heading),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.z.is_finite() && self.heading.is_finite()
    }

    pub fn forward(&self) -> (f64, f64) {
        let (s, c) = self.heading.to_radians().sin_cos();
        (s, c)
    }

    pub fn right(&self) -> (f64, f64) {
        let (s, c) = self.heading.to_radians().sin_cos();
        (c, -s)
    }

    /// Center of the collider footprint (the pivot sits at a body-frame offset from it).
    pub fn collider_center(&self, e: &EmbodimentConfig) -> (f64, f64) {
        let (fx, fz) = self.forward();
        let (rx, rz) = self.right();
        let (ox, oz) = (e.pivot.x, e.pivot.z);
        (self.x - (ox * rx + oz * fx), self.z - (ox * rz + oz * fz))
    }
}

pub fn normalize_heading(h: f64) -> f64 {
    let r = h.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Signed smallest rotation from `from` to `to`, degrees in `(-180, 180]`, clockwise positive.
pub fn heading_error(from: f64, to: f64) -> f64 {
    let mut d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d -= 360.0;
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    MoveAhead,
    MoveBack,
    RotateRight30,
    RotateLeft30,
    RotateRight6,
    RotateLeft6,
    Done,
}

impl Action {
    pub const ALL: [Action; 7] = [
        Action::MoveAhead,
        Action::MoveBack,
        Action::RotateRight30,
        Action::RotateLeft30,
        Action::RotateRight6,
        Action::RotateLeft6,
        Action::Done,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::MoveAhead => "MoveAhead",
            Action::MoveBack => "MoveBack",
            Action::RotateRight30 => "RotateRight30",
            Action::RotateLeft30 => "RotateLeft30",
            Action::RotateRight6 => "RotateRight6",
            Action::RotateLeft6 => "RotateLeft6",
            Action::Done => "Done",
        }
    }

    /// Yaw change in degrees (clockwise positive), if this is a rotation.
    pub fn rotation(self) -> Option<f64> {
        match self {
            Action::RotateRight30 => Some(30.0),
            Action::RotateLeft30 => Some(-30.0),
            Action::RotateRight6 => Some(6.0),
            Action::RotateLeft6 => Some(-6.0),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Protocol(format!("unknown action `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub target_category: String,
    /// Success radius `d`, meters.
    pub success_distance: f64,
    /// Step budget `n`.
    pub max_steps: u32,
    pub instruction: String,
    pub collision_penalty: f64,
}

impl TaskSpec {
    pub const DEFAULT_SUCCESS_DISTANCE: f64 = 2.0;
    pub const DEFAULT_MAX_STEPS: u32 = 600;

    pub fn new(category: &str) -> Self {
        Self {
            target_category: category.to_string(),
            success_distance: Self::DEFAULT_SUCCESS_DISTANCE,
            max_steps: Self::DEFAULT_MAX_STEPS,
            instruction: format!("find a {category}"),
            collision_penalty: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.success_distance > 0.0) || self.max_steps < 1 || !(self.collision_penalty >= 0.0) {
            return Err(Error::Task(format!(
                "invalid task: d = {}, n = {}, collision penalty = {}",
                self.success_distance, self.max_steps, self.collision_penalty
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub move_distance: f64,
    pub translate_resolution: f64,
    pub rotate_resolution: f64,
    pub step_penalty: f64,
    pub success_reward: f64,
    pub render: RenderOptions,
}

fn default_render() -> RenderOptions {
    RenderOptions {
        size: Some((128, 128)),
        ..RenderOptions::default()
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            move_distance: 0.2,
            translate_resolution: 0.025,
            rotate_resolution: 2.0,
            step_penalty: 0.01,
            success_reward: 10.0,
            render: default_render(),
        }
    }
}

/// Per-camera images after an action. Always two images; a missing second
/// camera is an all-zero image.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub images: Vec<Image>,
    pub last_action_failed: bool,
}

impl Observation {
    pub fn shows(&self, instance: u16) -> bool {
        self.images.iter().any(|img| img.semantic.contains(&instance))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTerms {
    pub progress: f64,
    pub success_bonus: f64,
    pub step_penalty: f64,
    pub collision_penalty: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.progress + self.success_bonus - self.step_penalty - self.collision_penalty
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub reward: f64,
    pub terms: RewardTerms,
    pub collision: bool,
    pub terminal: bool,
    pub success: bool,
    pub distance: f64,
}

/// One row of an episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub action: Action,
    pub collision: bool,
    pub reward: f64,
    pub terms: RewardTerms,
    pub distance: f64,
    pub pose: Pose,
    pub terminal: bool,
    pub success: bool,
}

/// Obstacle cells for one agent height.
#[derive(Debug, Clone)]
pub struct CollisionMap {
    blocked: Vec<bool>,
    nx: usize,
    nz: usize,
    cell: f64,
}

impl CollisionMap {
    pub fn new(scene: &Scene, height: f64) -> Self {
        Self {
            blocked: scene.blocked_mask(height),
            nx: scene.nx,
            nz: scene.nz,
            cell: scene.cell_size,
        }
    }

    pub fn is_blocked(&self, ix: usize, iz: usize) -> bool {
        self.blocked[iz * self.nx + ix]
    }

    /// Exact oriented-rectangle versus blocked-cell overlap; leaving the world is a collision.
    pub fn collides(&self, e: &EmbodimentConfig, pose: &Pose) -> bool {
        if !pose.is_finite() {
            return true;
        }
        let (cx, cz) = pose.collider_center(e);
        let (fx, fz) = pose.forward();
        let (rx, rz) = pose.right();
        let (hx, hz) = (e.collider.x / 2.0, e.collider.z / 2.0);
        let ex = rx.abs() * hx + fx.abs() * hz;
        let ez = rz.abs() * hx + fz.abs() * hz;
        let (w, d) = (self.nx as f64 * self.cell, self.nz as f64 * self.cell);
        if cx - ex < 0.0 || cz - ez < 0.0 || cx + ex > w || cz + ez > d {
            return true;
        }
        let cs = self.cell;
        let x0 = ((cx - ex) / cs).floor().max(0.0) as usize;
        let x1 = (((cx + ex) / cs).ceil() as usize).min(self.nx);
        let z0 = ((cz - ez) / cs).floor().max(0.0) as usize;
        let z1 = (((cz + ez) / cs).ceil() as usize).min(self.nz);
        let half = cs / 2.0;
        // Projected half-width of a cell square on the body axes.
        let sq_r = half * (rx.abs() + rz.abs());
        let sq_f = half * (fx.abs() + fz.abs());
        for iz in z0..z1 {
            for ix in x0..x1 {
                if !self.blocked[iz * self.nx + ix] {
                    continue;
                }
                let (qx, qz) = ((ix as f64 + 0.5) * cs - cx, (iz as f64 + 0.5) * cs - cz);
                if qx.abs() >= ex + half || qz.abs() >= ez + half {
                    continue;
                }
                if (qx * rx + qz * rz).abs() >= hx + sq_r {
                    continue;
                }
                if (qx * fx + qz * fz).abs() >= hz + sq_f {
                    continue;
                }
                return true;
            }
        }
        false
    }
}

/// True iff the collider at `pose` overlaps an obstacle in its height band.
pub fn check_collision(scene: &Scene, e: &EmbodimentConfig, pose: &Pose) -> bool {
    CollisionMap::new(scene, e.collider.y).collides(e, pose)
}

/// Distance from the pivot to the nearest footprint point of any target instance.
pub fn target_distance(scene: &Scene, targets: &[u16], pose: &Pose) -> f64 {
    targets
        .iter()
        .filter_map(|&id| scene.instance(id))
        .map(|i| i.footprint.distance_to(pose.x, pose.z))
        .fold(f64::INFINITY, f64::min)
}

/// One running episode.
///
/// Observations are rendered lazily: [`SimState::observation`] renders on
/// first use after a pose change, and [`SimState::success_check`] only
/// renders when some target is within the success radius.
#[derive(Debug, Clone)]
pub struct SimState {
    pub scene: Arc<Scene>,
    pub embodiment: Arc<EmbodimentConfig>,
    pub task: TaskSpec,
    pub config: SimConfig,
    pub pose: Pose,
    pub steps: u32,
    pub min_distance: f64,
    pub collisions: u32,
    pub terminal: bool,
    pub success: bool,
    pub last_action_failed: bool,
    images: Option<Vec<Image>>,
    targets: Vec<u16>,
    map: Arc<CollisionMap>,
}

impl SimState {
    pub fn reset(
        scene: Arc<Scene>,
        embodiment: Arc<EmbodimentConfig>,
        start: Pose,
        task: TaskSpec,
        config: SimConfig,
    ) -> Result<SimState> {
        let map = Arc::new(CollisionMap::new(&scene, embodiment.collider.y));
        Self::reset_with_map(scene, embodiment, start, task, config, map)
    }

    /// Like [`SimState::reset`] but reuses an existing collision map for this agent height.
    pub fn reset_with_map(
        scene: Arc<Scene>,
        embodiment: Arc<EmbodimentConfig>,
        start: Pose,
        task: TaskSpec,
        config: SimConfig,
        map: Arc<CollisionMap>,
    ) -> Result<SimState> {
        task.validate()?;
        let targets: Vec<u16> = scene.instances_of(&task.target_category).map(|i| i.id).collect();
        if targets.is_empty() {
            return Err(Error::Task(format!(
                "scene has no instance of `{}`",
                task.target_category
            )));
        }
        if map.collides(&embodiment, &start) {
            return Err(Error::Placement {
                x: start.x,
                z: start.z,
                heading: start.heading,
            });
        }
        let distance = target_distance(&scene, &targets, &start);
        Ok(SimState {
            scene,
            embodiment,
            task,
            config,
            pose: start,
            steps: 0,
            min_distance: distance,
            collisions: 0,
            terminal: false,
            success: false,
            last_action_failed: false,
            images: None,
            targets,
            map,
        })
    }

    pub fn targets(&self) -> &[u16] {
        &self.targets
    }

    pub fn collision_map(&self) -> &Arc<CollisionMap> {
        &self.map
    }

    pub fn distance(&self) -> f64 {
        target_distance(&self.scene, &self.targets, &self.pose)
    }

    fn images(&mut self) -> &[Image] {
        if self.images.is_none() {
            let e = &self.embodiment;
            let mut images: Vec<Image> = (0..e.cameras.len().min(2))
                .map(|c| {
                    sensor::render_with(&self.scene, e, &self.pose, c, &self.config.render)
                        .expect("camera index in range")
                })
                .collect();
            if images.len() == 1 {
                let (w, h) = (images[0].width, images[0].height);
                images.push(Image::masked(w, h, 1));
            }
            self.images = Some(images);
        }
        self.images.as_deref().expect("rendered above")
    }

    /// The current observation (rendering it if needed).
    pub fn observation(&mut self) -> Observation {
        let failed = self.last_action_failed;
        Observation {
            images: self.images().to_vec(),
            last_action_failed: failed,
        }
    }

    pub fn collides_at(&self, pose: &Pose) -> bool {
        self.map.collides(&self.embodiment, pose)
    }

    /// Swept test of `action` from the current pose; returns the new pose or `None` if blocked.
    pub fn attempt(&self, action: Action) -> Option<Pose> {
        let p = self.pose;
        let cfg = &self.config;
        match action {
            Action::MoveAhead | Action::MoveBack => {
                let sign = if action == Action::MoveAhead { 1.0 } else { -1.0 };
                let (fx, fz) = p.forward();
                let n = (cfg.move_distance / cfg.translate_resolution).ceil().max(1.0) as usize;
                for k in 1..=n {
                    let s = sign * cfg.move_distance * k as f64 / n as f64;
                    let q = Pose { x: p.x + s * fx, z: p.z + s * fz, heading: p.heading };
                    if self.collides_at(&q) {
                        return None;
                    }
                }
                Some(Pose {
                    x: p.x + sign * cfg.move_distance * fx,
                    z: p.z + sign * cfg.move_distance * fz,
                    heading: p.heading,
                })
            }
            Action::Done => Some(p),
            rot => {
                let delta = rot.rotation().expect("rotation action");
                let n = (delta.abs() / cfg.rotate_resolution).ceil().max(1.0) as usize;
                for k in 1..=n {
                    let q = Pose::new(p.x, p.z, p.heading + delta * k as f64 / n as f64);
                    if self.collides_at(&q) {
                        return None;
                    }
                }
                Some(Pose::new(p.x, p.z, p.heading + delta))
            }
        }
    }

    /// Target instances within `d` of the pivot that appear in the current images.
    pub fn success_check(&mut self) -> bool {
        let d = self.task.success_distance;
        let (x, z) = (self.pose.x, self.pose.z);
        let near: Vec<u16> = self
            .targets
            .iter()
            .copied()
            .filter(|&id| {
                self.scene
                    .instance(id)
                    .is_some_and(|inst| inst.footprint.distance_to(x, z) <= d)
            })
            .collect();
        if near.is_empty() {
            return false;
        }
        let images = self.images();
        near.iter().any(|id| images.iter().any(|img| img.semantic.contains(id)))
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.terminal {
            return Err(Error::State("step called on a terminal episode".into()));
        }
        let mut success = false;
        let mut collision = false;
        if action == Action::Done {
            success = self.success_check();
            self.terminal = true;
        } else {
            match self.attempt(action) {
                Some(p) => {
                    if p != self.pose {
                        self.images = None;
                    }
                    self.pose = p;
                }
                None => {
                    collision = true;
                    self.collisions += 1;
                }
            }
        }
        self.steps += 1;
        if self.steps >= self.task.max_steps {
            self.terminal = true;
        }
        let distance = self.distance();
        let terms = RewardTerms {
            progress: (self.min_distance - distance).max(0.0),
            success_bonus: if success { self.config.success_reward } else { 0.0 },
            step_penalty: self.config.step_penalty,
            collision_penalty: if collision { self.task.collision_penalty } else { 0.0 },
        };
        self.min_distance = self.min_distance.min(distance);
        self.success = success;
        self.last_action_failed = collision;
        Ok(StepResult {
            reward: terms.total(),
            terms,
            collision,
            terminal: self.terminal,
            success,
            distance,
        })
    }

    pub fn trace_step(&self, action: Action, r: &StepResult) -> TraceStep {
        TraceStep {
            action,
            collision: r.collision,
            reward: r.reward,
            terms: r.terms,
            distance: r.distance,
            pose: self.pose,
            terminal: r.terminal,
            success: r.success,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embodiment::preset_embodiment;
    use crate::scene::{SceneBuilder, Aabb2, WALL_CATEGORY};

    fn agent(x: f64, y: f64, z: f64) -> EmbodimentConfig {
        let mut e = preset_embodiment("locobot").unwrap();
        e.collider.x = x;
        e.collider.y = y;
        e.collider.z = z;
        e.cameras[0].pos_y = y.min(e.cameras[0].pos_y);
        e
    }

    fn table_room() -> Scene {
        let mut b = SceneBuilder::new(0.05, 100, 100, 0);
        let w = b.add_instance(WALL_CATEGORY);
        b.add_cells(w, 0..100, 98..100, 0.0, 2.0);
        let t = b.add_instance("table");
        b.add_box(t, Aabb2::new(1.5, 1.5, 3.5, 3.5), 0.6, 0.75);
        let v = b.add_instance("vase");
        b.add_box(v, Aabb2::new(2.4, 4.6, 2.6, 4.8), 0.0, 0.5);
        b.build()
    }

    #[test]
    fn empty_scene_never_collides() {
        let s = SceneBuilder::new(0.05, 60, 60, 0).build();
        let e = agent(0.4, 1.0, 0.4);
        for h in [0.0, 17.0, 45.0, 90.0] {
            assert!(!check_collision(&s, &e, &Pose::new(1.5, 1.5, h)));
        }
        // The world edge is solid.
        assert!(check_collision(&s, &e, &Pose::new(0.1, 1.5, 0.0)));
    }

    #[test]
    fn under_table_depends_on_height() {
        let s = table_room();
        let pose = Pose::new(2.5, 2.5, 0.0);
        assert!(!check_collision(&s, &agent(0.3, 0.4, 0.3), &pose));
        assert!(check_collision(&s, &agent(0.3, 1.4, 0.3), &pose));
    }

    #[test]
    fn rotated_rectangle_overlap_is_exact() {
        let mut b = SceneBuilder::new(0.05, 60, 60, 0);
        let v = b.add_instance("vase");
        b.add_cells(v, 30..31, 30..31, 0.0, 1.0); // [1.5, 1.55]^2
        let s = b.build();
        let e = agent(0.2, 1.0, 0.2);
        // Axis aligned, 0.1 m half extent, just clear of the cell.
        assert!(!check_collision(&s, &e, &Pose::new(1.4, 1.525, 0.0)));
        assert!(check_collision(&s, &e, &Pose::new(1.41, 1.525, 0.0)));
        // At 45° the half diagonal reaches 0.1414 m along x.
        assert!(check_collision(&s, &e, &Pose::new(1.4, 1.525, 45.0)));
        assert!(!check_collision(&s, &e, &Pose::new(1.35, 1.525, 45.0)));
    }

    fn start(scene: Scene, e: EmbodimentConfig, pose: Pose, task: TaskSpec) -> Result<SimState> {
        SimState::reset(Arc::new(scene), Arc::new(e), pose, task, SimConfig::default())
    }

    #[test]
    fn reset_errors() {
        let e = agent(0.3, 1.4, 0.3);
        let err = start(table_room(), e.clone(), Pose::new(2.5, 2.5, 0.0), TaskSpec::new("vase"));
        assert!(matches!(err, Err(Error::Placement { .. })));
        let err = start(table_room(), e.clone(), Pose::new(0.5, 0.5, 0.0), TaskSpec::new("sofa"));
        assert!(matches!(err, Err(Error::Task(_))));
        let s = start(table_room(), e, Pose::new(0.5, 0.5, 0.0), TaskSpec::new("vase")).unwrap();
        assert_eq!(s.min_distance, s.distance());
        assert_eq!(s.steps, 0);
    }

    #[test]
    fn progress_reward() {
        let mut s = start(table_room(), agent(0.3, 0.4, 0.3), Pose::new(2.5, 1.0, 0.0), TaskSpec::new("vase")).unwrap();
        let d0 = s.distance();
        let r = s.step(Action::MoveAhead).unwrap();
        assert!(!r.collision);
        assert!((r.distance - (d0 - 0.2)).abs() < 1e-9);
        assert!((r.reward - (0.2 - 0.01)).abs() < 1e-9);
    }

    #[test]
    fn blocked_move_with_penalty() {
        let mut b = SceneBuilder::new(0.05, 60, 60, 0);
        let w = b.add_instance(WALL_CATEGORY);
        b.add_cells(w, 0..60, 30..32, 0.0, 2.0);
        let v = b.add_instance("vase");
        b.add_cells(v, 5..7, 5..7, 0.0, 0.5);
        let mut task = TaskSpec::new("vase");
        task.collision_penalty = 0.1;
        let mut s = start(b.build(), agent(0.3, 1.0, 0.3), Pose::new(1.5, 1.3, 0.0), task).unwrap();
        let before = s.pose;
        let r = s.step(Action::MoveAhead).unwrap();
        assert!(r.collision);
        assert_eq!(s.pose, before);
        assert!((r.reward - (-0.11)).abs() < 1e-12);
        assert!(s.last_action_failed);
        assert!(s.observation().last_action_failed);
        assert_eq!(s.collisions, 1);
    }

    #[test]
    fn success_requires_distance_and_visibility() {
        let e = agent(0.3, 1.0, 0.3);
        let mut task = TaskSpec::new("vase");
        task.success_distance = 2.0;
        // Facing the vase from 1.6 m away.
        let mut s = start(table_room(), e.clone(), Pose::new(4.2, 4.7, 270.0), task.clone()).unwrap();
        assert!(s.distance() < 2.0);
        assert!(s.success_check());
        let r = s.step(Action::Done).unwrap();
        assert!(r.success && r.terminal);
        assert!((r.reward - (10.0 - 0.01)).abs() < 1e-12);
        assert!(matches!(s.step(Action::MoveAhead), Err(Error::State(_))));

        // Same spot facing away: in range but not visible.
        let mut s = start(table_room(), e.clone(), Pose::new(4.2, 4.7, 90.0), task.clone()).unwrap();
        assert!(!s.success_check());

        // Visible but too far.
        let mut s = start(table_room(), e, Pose::new(4.8, 4.7, 270.0), TaskSpec { success_distance: 2.0, ..task }).unwrap();
        assert!(s.distance() > 2.0);
        assert!(!s.success_check());
    }

    #[test]
    fn episode_truncates_at_budget() {
        let mut task = TaskSpec::new("vase");
        task.max_steps = 3;
        let mut s = start(table_room(), agent(0.3, 1.0, 0.3), Pose::new(4.5, 1.0, 0.0), task).unwrap();
        for k in 0..3 {
            let r = s.step(Action::RotateRight30).unwrap();
            assert_eq!(r.terminal, k == 2);
            assert!(!r.success);
        }
    }

    #[test]
    fn single_camera_second_image_masked() {
        let mut s = start(table_room(), agent(0.3, 1.0, 0.3), Pose::new(4.5, 1.0, 0.0), TaskSpec::new("vase")).unwrap();
        let obs = s.observation();
        assert_eq!(obs.images.len(), 2);
        assert!(obs.images[1].is_masked());
        assert!(!obs.images[0].is_masked());
    }

    #[test]
    fn heading_helpers() {
        assert_eq!(normalize_heading(-30.0), 330.0);
        assert_eq!(normalize_heading(360.0), 0.0);
        assert_eq!(heading_error(350.0, 10.0), 20.0);
        assert_eq!(heading_error(10.0, 350.0), -20.0);
        assert_eq!("RotateLeft6".parse::<Action>().unwrap(), Action::RotateLeft6);
        assert!("Jump".parse::<Action>().is_err());
    }
}
