//! Episode scoring and mean-threshold sample filtering.
//!
//! Every episode gets an average reward and an average discounted reward.
//! Episodes scoring strictly above the dataset mean under the chosen
//! criterion are superior and are reassembled into the filtered dataset;
//! everything else (ties included) is dropped.

mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Episode};
use crate::error::{Error, Result};

pub use report::{load_report, parse_report, render_report, save_report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriterionKind {
    #[serde(rename = "avg")]
    AverageReward,
    #[serde(rename = "disc")]
    AverageDiscounted,
}

/// How the discount exponent is taken in the average discounted reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscountMode {
    /// `gamma^h` with `h` the absolute 1-based step index.
    #[serde(rename = "absolute")]
    AbsolutePower,
    /// `gamma^(h - j)`, the usual tail return from step `j`.
    #[serde(rename = "relative")]
    RelativePower,
}

impl CriterionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CriterionKind::AverageReward => "avg",
            CriterionKind::AverageDiscounted => "disc",
        }
    }
}

impl DiscountMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiscountMode::AbsolutePower => "absolute",
            DiscountMode::RelativePower => "relative",
        }
    }
}

impl std::str::FromStr for CriterionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg" => Ok(CriterionKind::AverageReward),
            "disc" => Ok(CriterionKind::AverageDiscounted),
            _ => Err(Error::param(format!("unknown criterion `{s}` (avg|disc)"))),
        }
    }
}

impl std::str::FromStr for DiscountMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(DiscountMode::AbsolutePower),
            "relative" => Ok(DiscountMode::RelativePower),
            _ => Err(Error::param(format!("unknown mode `{s}` (absolute|relative)"))),
        }
    }
}

pub const DEFAULT_GAMMA: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreCriterion {
    pub kind: CriterionKind,
    /// Only used by the discounted criterion; always in `[0, 1)`.
    pub gamma: f64,
    pub mode: DiscountMode,
}

impl Default for ScoreCriterion {
    fn default() -> Self {
        ScoreCriterion {
            kind: CriterionKind::AverageDiscounted,
            gamma: DEFAULT_GAMMA,
            mode: DiscountMode::AbsolutePower,
        }
    }
}

impl ScoreCriterion {
    pub fn new(kind: CriterionKind, gamma: f64, mode: DiscountMode) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::param(format!("gamma {gamma} outside [0, 1)")));
        }
        Ok(ScoreCriterion { kind, gamma, mode })
    }

    pub fn average_reward() -> Self {
        ScoreCriterion {
            kind: CriterionKind::AverageReward,
            ..Self::default()
        }
    }

    pub fn discounted(gamma: f64, mode: DiscountMode) -> Result<Self> {
        Self::new(CriterionKind::AverageDiscounted, gamma, mode)
    }

    pub fn select(&self, s: &EpisodeScore) -> f64 {
        match self.kind {
            CriterionKind::AverageReward => s.r_avg,
            CriterionKind::AverageDiscounted => s.r_disc,
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{} (mode={}, gamma={})",
            self.kind.as_str(),
            self.mode.as_str(),
            self.gamma
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeScore {
    pub episode_index: usize,
    pub r_avg: f64,
    pub r_disc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub per_episode: Vec<EpisodeScore>,
    pub dataset_mean: f64,
    pub criterion: ScoreCriterion,
    pub superior_indices: Vec<usize>,
    pub inferior_indices: Vec<usize>,
    pub retained_transition_count: usize,
    pub original_transition_count: usize,
}

impl FilterReport {
    pub fn is_degenerate(&self) -> bool {
        self.superior_indices.is_empty()
    }

    pub fn retention_ratio(&self) -> f64 {
        if self.original_transition_count == 0 {
            0.0
        } else {
            self.retained_transition_count as f64 / self.original_transition_count as f64
        }
    }
}

/// Scores one episode under both criteria.
///
/// The discounted score averages, over every start step `j`, the discounted
/// sum of rewards from `j` to the end. Swapping the two sums gives a single
/// pass: in absolute mode step `h` is counted `h` times with weight
/// `gamma^h`; in relative mode the tail sums follow `G_j = r_j + gamma G_{j+1}`.
pub fn score_episode(e: &Episode, c: &ScoreCriterion) -> Result<EpisodeScore> {
    if e.is_empty() {
        return Err(Error::EmptyEpisode);
    }
    let n = e.len() as f64;
    let r_avg = e.rewards().sum::<f64>() / n;

    let disc_sum = match c.mode {
        DiscountMode::AbsolutePower => {
            let mut acc = 0.0;
            let mut power = 1.0;
            for (i, r) in e.rewards().enumerate() {
                power *= c.gamma;
                acc += (i + 1) as f64 * power * r;
            }
            acc
        }
        DiscountMode::RelativePower => {
            let mut tail = 0.0;
            let mut acc = 0.0;
            for r in e.transitions.iter().rev().map(|t| t.reward) {
                tail = r + c.gamma * tail;
                acc += tail;
            }
            acc
        }
    };

    Ok(EpisodeScore {
        episode_index: e.index,
        r_avg,
        r_disc: disc_sum / n,
    })
}

/// Scores every episode and returns the scores in episode order together
/// with the dataset mean under `c`.
pub fn score_dataset(d: &Dataset, c: &ScoreCriterion) -> Result<(Vec<EpisodeScore>, f64)> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scores = d
        .episodes
        .par_iter()
        .map(|e| score_episode(e, c))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = scores.iter().map(|s| c.select(s)).collect();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    // the true mean lies in [lo, hi]; clamping removes rounding that would
    // otherwise put a mean of identical scores one ulp below them
    let mean = (values.iter().sum::<f64>() / values.len() as f64).clamp(lo, hi);
    Ok((scores, mean))
}

/// Splits episodes into superior (`score > mean`) and inferior (`score <= mean`).
pub fn partition(d: &Dataset, c: &ScoreCriterion) -> Result<FilterReport> {
    let (per_episode, dataset_mean) = score_dataset(d, c)?;
    let mut superior_indices = Vec::new();
    let mut inferior_indices = Vec::new();
    let mut retained = 0;
    for (s, ep) in per_episode.iter().zip(&d.episodes) {
        if c.select(s) > dataset_mean {
            superior_indices.push(s.episode_index);
            retained += ep.len();
        } else {
            inferior_indices.push(s.episode_index);
        }
    }
    Ok(FilterReport {
        per_episode,
        dataset_mean,
        criterion: *c,
        superior_indices,
        inferior_indices,
        retained_transition_count: retained,
        original_transition_count: d.transition_count(),
    })
}

/// Reassembles the superior episodes of `d` into a new dataset.
///
/// Fails with [`Error::Degenerate`] when no episode is superior.
pub fn apply_filter(d: &Dataset, report: &FilterReport) -> Result<Dataset> {
    if report.per_episode.len() != d.len() {
        return Err(Error::ReportMismatch(format!(
            "report covers {} episodes, dataset has {}",
            report.per_episode.len(),
            d.len()
        )));
    }
    if report.original_transition_count != d.transition_count() {
        return Err(Error::ReportMismatch(format!(
            "report counts {} transitions, dataset has {}",
            report.original_transition_count,
            d.transition_count()
        )));
    }
    if report.is_degenerate() {
        return Err(Error::Degenerate {
            criterion: report.criterion.label(),
            mean: report.dataset_mean,
        });
    }

    let episodes = report
        .superior_indices
        .iter()
        .enumerate()
        .map(|(new_index, &i)| {
            d.episodes
                .get(i)
                .map(|e| crate::dataset::Episode::new(new_index, e.transitions.clone()))
                .ok_or_else(|| Error::ReportMismatch(format!("episode index {i} out of range")))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Dataset::new(d.env_spec.clone(), episodes, d.provenance.clone());
    out.push_provenance(&format!(
        "filtered parent={} criterion={} mode={} gamma={} mean={} kept={}/{} retention={}",
        d.digest(),
        report.criterion.kind.as_str(),
        report.criterion.mode.as_str(),
        report.criterion.gamma,
        report.dataset_mean,
        report.superior_indices.len(),
        d.len(),
        report.retention_ratio()
    ));
    Ok(out)
}
