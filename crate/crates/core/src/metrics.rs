//! Episode metrics: success rate, SEL, SC, collision rate and safe-episode rate.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub success: bool,
    /// Steps taken, `L_i`.
    pub steps: u32,
    /// Expert steps for the same episode, `L*_i`.
    pub expert_steps: Option<u32>,
    pub collisions: u32,
    /// Free-form grouping key (category, embodiment kind, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl EpisodeRecord {
    pub fn new(success: bool, steps: u32, expert_steps: u32, collisions: u32) -> Self {
        Self {
            success,
            steps,
            expert_steps: Some(expert_steps),
            collisions,
            group: None,
        }
    }

    fn check(&self, i: usize) -> Result<()> {
        if self.steps < 1 || self.collisions > self.steps || self.expert_steps == Some(0) {
            return Err(Error::Argument(format!(
                "record {i}: need steps >= 1, collisions <= steps, expert steps >= 1 (got {}, {}, {:?})",
                self.steps, self.collisions, self.expert_steps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub episodes: usize,
    pub success_rate: f64,
    pub sel: f64,
    pub sc: f64,
    pub collision_rate: f64,
    pub safe_episode_rate: f64,
}

fn nonempty(records: &[EpisodeRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Argument("no episode records".into()));
    }
    records.iter().enumerate().try_for_each(|(i, r)| r.check(i))
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

/// Success weighted by collisions: `(1/N) Σ S_i / (1 + c_i)`.
pub fn sc(records: &[EpisodeRecord]) -> Result<f64> {
    nonempty(records)?;
    Ok(mean(
        records.iter().map(|r| if r.success { 1.0 / (1.0 + r.collisions as f64) } else { 0.0 }),
        records.len(),
    ))
}

/// Success weighted by episode length: `(1/N) Σ S_i · L*_i / max(L_i, L*_i)`.
pub fn sel(records: &[EpisodeRecord]) -> Result<f64> {
    nonempty(records)?;
    let mut total = 0.0;
    for (i, r) in records.iter().enumerate() {
        let expert = r
            .expert_steps
            .ok_or_else(|| Error::Argument(format!("record {i} has no expert length")))?;
        if r.success {
            total += expert as f64 / r.steps.max(expert) as f64;
        }
    }
    Ok(total / records.len() as f64)
}

pub fn success_rate(records: &[EpisodeRecord]) -> Result<f64> {
    nonempty(records)?;
    Ok(mean(records.iter().map(|r| r.success as u8 as f64), records.len()))
}

/// Mean over episodes of `c_i / L_i`.
pub fn collision_rate(records: &[EpisodeRecord]) -> Result<f64> {
    nonempty(records)?;
    Ok(mean(
        records.iter().map(|r| r.collisions as f64 / r.steps as f64),
        records.len(),
    ))
}

/// Fraction of episodes without any collision.
pub fn safe_episode_rate(records: &[EpisodeRecord]) -> Result<f64> {
    nonempty(records)?;
    Ok(mean(records.iter().map(|r| (r.collisions == 0) as u8 as f64), records.len()))
}

pub fn aggregate(records: &[EpisodeRecord]) -> Result<MetricsSummary> {
    Ok(MetricsSummary {
        episodes: records.len(),
        success_rate: success_rate(records)?,
        sel: sel(records)?,
        sc: sc(records)?,
        collision_rate: collision_rate(records)?,
        safe_episode_rate: safe_episode_rate(records)?,
    })
}

/// Summaries per `group` value; records without a group go under `""`.
pub fn aggregate_by_group(records: &[EpisodeRecord]) -> Result<BTreeMap<String, MetricsSummary>> {
    let mut groups: BTreeMap<String, Vec<EpisodeRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.group.clone().unwrap_or_default()).or_default().push(r.clone());
    }
    groups.into_iter().map(|(k, v)| Ok((k, aggregate(&v)?))).collect()
}

impl MetricsSummary {
    pub fn to_json(&self) -> Result<String> {
        crate::canonical_json(self)
    }

    /// Aligned two-column table.
    pub fn table(&self) -> String {
        let rows = [
            ("episodes", self.episodes.to_string()),
            ("success", format!("{:.4}", self.success_rate)),
            ("SEL", format!("{:.4}", self.sel)),
            ("SC", format!("{:.4}", self.sc)),
            ("collision rate", format!("{:.4}", self.collision_rate)),
            ("safe episodes", format!("{:.4}", self.safe_episode_rate)),
        ];
        let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<w$}  {v:>8}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(s: bool, l: u32, ls: u32, c: u32) -> EpisodeRecord {
        EpisodeRecord::new(s, l, ls, c)
    }

    #[test]
    fn sc_examples() {
        assert_eq!(sc(&[rec(true, 5, 5, 0)]).unwrap(), 1.0);
        assert_eq!(sc(&[rec(true, 5, 5, 1)]).unwrap(), 0.5);
        let v = sc(&[rec(true, 5, 5, 0), rec(true, 5, 5, 3), rec(false, 5, 5, 0)]).unwrap();
        assert!((v - 1.25 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sel_examples() {
        assert_eq!(sel(&[rec(true, 10, 10, 0)]).unwrap(), 1.0);
        assert_eq!(sel(&[rec(true, 20, 10, 0)]).unwrap(), 0.5);
        assert_eq!(sel(&[rec(false, 20, 10, 0)]).unwrap(), 0.0);
        // Shorter than the expert still counts as 1.
        assert_eq!(sel(&[rec(true, 5, 10, 0)]).unwrap(), 1.0);
        let mut r = rec(true, 5, 5, 0);
        r.expert_steps = None;
        assert!(matches!(sel(&[r]), Err(Error::Argument(_))));
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(aggregate(&[]), Err(Error::Argument(_))));
        assert!(matches!(sc(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn perfect_and_failed_sets() {
        let m = aggregate(&[rec(true, 7, 7, 0), rec(true, 3, 3, 0)]).unwrap();
        assert_eq!((m.success_rate, m.sel, m.sc, m.collision_rate, m.safe_episode_rate), (1.0, 1.0, 1.0, 0.0, 1.0));
        let m = aggregate(&[rec(false, 7, 7, 2), rec(false, 3, 3, 0)]).unwrap();
        assert_eq!((m.success_rate, m.sel, m.sc), (0.0, 0.0, 0.0));
    }

    #[test]
    fn table_lists_every_metric() {
        let t = aggregate(&[rec(true, 4, 2, 1)]).unwrap().table();
        for k in ["success", "SEL", "SC", "collision rate", "safe episodes"] {
            assert!(t.contains(k), "{t}");
        }
    }
}
