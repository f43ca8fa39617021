//! The policy contract and the built-in policies.

use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::EpisodeSpec;
use crate::embodiment::EmbodimentConfig;
use crate::error::{Error, Result};
use crate::planner::ExpertTrajectory;
use crate::rng::{split, SeededRng};
use crate::scene::Scene;
use crate::sim::{Action, Observation};

/// What a policy learns about an episode before its first step.
///
/// Built-in policies may use everything here; the bridge forwards only the
/// task, the target instance ids and, when the suite allows it, the embodiment.
pub struct EpisodeContext<'a> {
    pub spec: &'a EpisodeSpec,
    pub scene: &'a Arc<Scene>,
    pub embodiment: &'a Arc<EmbodimentConfig>,
    /// Instance ids of the target category (the semantic channel's goal ids).
    pub targets: &'a [u16],
    pub expert: Option<&'a ExpertTrajectory>,
    pub disclose_embodiment: bool,
    /// `(width, height)` of each image in an observation.
    pub image_sizes: Vec<(u32, u32)>,
}

/// Episode summary handed to the policy once the episode ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub episode_id: u64,
    pub success: bool,
    pub steps: u32,
    pub collisions: u32,
    pub rewards: Vec<f64>,
    pub metrics: EpisodeMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Single-episode values of the benchmark metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub success: f64,
    pub sel: f64,
    pub sc: f64,
    pub collision_rate: f64,
    pub safe: f64,
}

pub trait Policy {
    fn begin(&mut self, ctx: &EpisodeContext) -> Result<()>;

    /// Policies that ignore images let the runner skip rendering.
    fn needs_images(&self) -> bool {
        true
    }

    fn act(&mut self, step: u32, obs: &Observation) -> Result<Action>;

    fn end(&mut self, _outcome: &EpisodeOutcome) -> Result<()> {
        Ok(())
    }
}

/// Serializable description of a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyHandle {
    /// Replays the expert trajectory computed for the episode.
    ExpertReplay,
    /// Turns until target pixels appear, then drives at them.
    GreedyVisible,
    /// Uniform over all seven actions.
    Random { seed: u64 },
    Constant { action: Action },
    /// Expert actions, each replaced by a random movement with probability `p`.
    NoisyExpert { seed: u64, p: f64 },
    /// An external process speaking the bridge protocol.
    External { endpoint: String, timeout_secs: f64 },
}

impl PolicyHandle {
    pub fn is_external(&self) -> bool {
        matches!(self, PolicyHandle::External { .. })
    }

    /// A fresh built-in policy for one episode. Seeds are split by episode id
    /// so results do not depend on evaluation order.
    pub fn builtin(&self, episode_id: u64) -> Result<Box<dyn Policy + Send>> {
        Ok(match *self {
            PolicyHandle::ExpertReplay => Box::new(ExpertReplay::default()),
            PolicyHandle::GreedyVisible => Box::new(GreedyVisible::default()),
            PolicyHandle::Random { seed } => Box::new(RandomPolicy {
                rng: SeededRng::new(split(seed, episode_id)),
            }),
            PolicyHandle::Constant { action } => Box::new(ConstantPolicy { action }),
            PolicyHandle::NoisyExpert { seed, p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Argument(format!("substitution probability {p} outside [0, 1]")));
                }
                Box::new(NoisyExpert {
                    replay: ExpertReplay::default(),
                    rng: SeededRng::new(split(seed, episode_id)),
                    p,
                })
            }
            PolicyHandle::External { .. } => {
                return Err(Error::Argument("external policies are not built per episode".into()))
            }
        })
    }
}

impl FromStr for PolicyHandle {
    type Err = Error;

    /// `expert`, `greedy`, `random[:SEED]`, `constant:ACTION`, `noisy[:SEED[:P]]`
    /// or `bridge:ENDPOINT`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = s.split_once(':').map_or((s, None), |(h, r)| (h, Some(r)));
        let num = |v: &str| -> Result<u64> { v.parse().map_err(|_| Error::Argument(format!("bad seed `{v}` in `{s}`"))) };
        Ok(match (head, rest) {
            ("expert", None) => PolicyHandle::ExpertReplay,
            ("greedy", None) => PolicyHandle::GreedyVisible,
            ("random", None) => PolicyHandle::Random { seed: 0 },
            ("random", Some(r)) => PolicyHandle::Random { seed: num(r)? },
            ("constant", Some(a)) => PolicyHandle::Constant {
                action: a.parse().map_err(|_| Error::Argument(format!("unknown action `{a}`")))?,
            },
            ("noisy", None) => PolicyHandle::NoisyExpert { seed: 0, p: 0.2 },
            ("noisy", Some(r)) => {
                let (seed, p) = r.split_once(':').map_or((r, None), |(a, b)| (a, Some(b)));
                let p = match p {
                    Some(p) => p.parse().map_err(|_| Error::Argument(format!("bad probability in `{s}`")))?,
                    None => 0.2,
                };
                PolicyHandle::NoisyExpert { seed: num(seed)?, p }
            }
            ("bridge", Some(endpoint)) => PolicyHandle::External {
                endpoint: endpoint.to_string(),
                timeout_secs: super::bridge::DEFAULT_TIMEOUT_SECS,
            },
            _ => return Err(Error::Argument(format!("unknown policy `{s}`"))),
        })
    }
}

/// Replays the episode's expert actions, then emits `Done`.
#[derive(Debug, Default)]
pub struct ExpertReplay {
    actions: Vec<Action>,
    next: usize,
}

impl Policy for ExpertReplay {
    fn begin(&mut self, ctx: &EpisodeContext) -> Result<()> {
        let expert = ctx
            .expert
            .ok_or_else(|| Error::State("expert replay needs the expert trajectory".into()))?;
        self.actions = expert.actions.clone();
        self.next = 0;
        Ok(())
    }

    fn needs_images(&self) -> bool {
        false
    }

    fn act(&mut self, _step: u32, _obs: &Observation) -> Result<Action> {
        let a = self.actions.get(self.next).copied().unwrap_or(Action::Done);
        self.next += 1;
        Ok(a)
    }
}

/// Movement actions used for substitutions (never `Done`).
const MOVEMENTS: [Action; 6] = [
    Action::MoveAhead,
    Action::MoveBack,
    Action::RotateRight30,
    Action::RotateLeft30,
    Action::RotateRight6,
    Action::RotateLeft6,
];

pub struct NoisyExpert {
    replay: ExpertReplay,
    rng: SeededRng,
    p: f64,
}

impl Policy for NoisyExpert {
    fn begin(&mut self, ctx: &EpisodeContext) -> Result<()> {
        self.replay.begin(ctx)
    }

    fn needs_images(&self) -> bool {
        false
    }

    fn act(&mut self, step: u32, obs: &Observation) -> Result<Action> {
        let a = self.replay.act(step, obs)?;
        Ok(if self.rng.bernoulli(self.p) {
            MOVEMENTS[self.rng.index(MOVEMENTS.len())]
        } else {
            a
        })
    }
}

pub struct RandomPolicy {
    rng: SeededRng,
}

impl Policy for RandomPolicy {
    fn begin(&mut self, _ctx: &EpisodeContext) -> Result<()> {
        Ok(())
    }

    fn needs_images(&self) -> bool {
        false
    }

    fn act(&mut self, _step: u32, _obs: &Observation) -> Result<Action> {
        Ok(Action::ALL[self.rng.index(Action::ALL.len())])
    }
}

pub struct ConstantPolicy {
    pub action: Action,
}

impl Policy for ConstantPolicy {
    fn begin(&mut self, _ctx: &EpisodeContext) -> Result<()> {
        Ok(())
    }

    fn needs_images(&self) -> bool {
        false
    }

    fn act(&mut self, _step: u32, _obs: &Observation) -> Result<Action> {
        Ok(self.action)
    }
}

/// Scans for target pixels, steers toward their centroid and stops once they
/// are closer than the success distance.
#[derive(Debug, Default)]
pub struct GreedyVisible {
    targets: Vec<u16>,
    /// Yaw offset and horizontal FoV per camera, degrees.
    cameras: Vec<(f64, f64)>,
    done_depth_mm: f64,
    turns: u32,
    forward: u32,
    /// Pending sidestep after a blocked move, popped from the back.
    escape: Vec<Action>,
}

/// Fraction of the success distance measured by depth before stopping;
/// the camera sits slightly off the pivot.
const GREEDY_STOP_FRACTION: f64 = 0.9;
/// Forward moves between scans when nothing is in view.
const GREEDY_EXPLORE_MOVES: u32 = 5;

impl Policy for GreedyVisible {
    fn begin(&mut self, ctx: &EpisodeContext) -> Result<()> {
        self.targets = ctx.targets.to_vec();
        self.cameras = ctx.embodiment.cameras.iter().map(|c| (c.yaw, c.hfov)).collect();
        self.done_depth_mm = ctx.spec.task.success_distance * GREEDY_STOP_FRACTION * 1000.0;
        self.turns = 0;
        self.forward = 0;
        self.escape.clear();
        Ok(())
    }

    fn act(&mut self, _step: u32, obs: &Observation) -> Result<Action> {
        if obs.last_action_failed {
            // Turn 60 degrees right, then try two moves.
            self.escape = vec![Action::MoveAhead, Action::MoveAhead, Action::RotateRight30, Action::RotateRight30];
        }
        let mut best: Option<(f64, f64)> = None;
        for img in &obs.images {
            let Some(&(yaw, hfov)) = self.cameras.get(img.camera_index as usize) else {
                continue;
            };
            let (mut n, mut sum_u, mut nearest) = (0usize, 0.0, f64::INFINITY);
            for (k, (&s, &d)) in img.semantic.iter().zip(&img.depth).enumerate() {
                if s != 0 && self.targets.contains(&s) {
                    n += 1;
                    sum_u += (k as u32 % img.width) as f64 + 0.5;
                    nearest = nearest.min(d as f64);
                }
            }
            if n > 0 {
                let bearing = yaw + (sum_u / n as f64 / img.width as f64 - 0.5) * hfov;
                if best.is_none_or(|(_, d)| nearest < d) {
                    best = Some((bearing, nearest));
                }
            }
        }
        if let Some((_, depth)) = best {
            if depth <= self.done_depth_mm {
                return Ok(Action::Done);
            }
        }
        if let Some(a) = self.escape.pop() {
            return Ok(a);
        }
        match best {
            Some((bearing, _)) => {
                self.turns = 0;
                Ok(if bearing.abs() > 18.0 {
                    if bearing > 0.0 { Action::RotateRight30 } else { Action::RotateLeft30 }
                } else if bearing.abs() > 4.0 {
                    if bearing > 0.0 { Action::RotateRight6 } else { Action::RotateLeft6 }
                } else {
                    Action::MoveAhead
                })
            }
            None if self.turns < 12 => {
                self.turns += 1;
                Ok(Action::RotateRight30)
            }
            None => {
                self.forward += 1;
                if self.forward >= GREEDY_EXPLORE_MOVES {
                    self.forward = 0;
                    self.turns = 0;
                }
                Ok(Action::MoveAhead)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_policy_names() {
        assert_eq!("expert".parse::<PolicyHandle>().unwrap(), PolicyHandle::ExpertReplay);
        assert_eq!("random:7".parse::<PolicyHandle>().unwrap(), PolicyHandle::Random { seed: 7 });
        assert_eq!(
            "constant:MoveAhead".parse::<PolicyHandle>().unwrap(),
            PolicyHandle::Constant { action: Action::MoveAhead }
        );
        assert_eq!(
            "noisy:3:0.5".parse::<PolicyHandle>().unwrap(),
            PolicyHandle::NoisyExpert { seed: 3, p: 0.5 }
        );
        assert!(matches!(
            "bridge:tcp://127.0.0.1:9".parse::<PolicyHandle>().unwrap(),
            PolicyHandle::External { .. }
        ));
        assert!("walk".parse::<PolicyHandle>().is_err());
        assert!("constant:Jump".parse::<PolicyHandle>().is_err());
    }

    #[test]
    fn noisy_never_substitutes_done() {
        let mut p = NoisyExpert {
            replay: ExpertReplay {
                actions: vec![Action::MoveAhead; 1000],
                next: 0,
            },
            rng: SeededRng::new(1),
            p: 1.0,
        };
        let obs = Observation {
            images: vec![],
            last_action_failed: false,
        };
        let acts: Vec<_> = (0..1000).map(|i| p.act(i, &obs).unwrap()).collect();
        assert!(!acts.contains(&Action::Done));
        for m in MOVEMENTS {
            assert!(acts.contains(&m));
        }
    }
}
