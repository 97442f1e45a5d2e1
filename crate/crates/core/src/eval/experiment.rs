use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::results::{ResultMeta, ResultRow, ResultTable, RowStatus};
use super::{rollout_return, EvalConfig};
use crate::dataset::Dataset;
use crate::env::{generate_dataset, make_env, BehaviorSettings, DiscreteMdp, EnvParams, MixSpec};
use crate::error::{Error, Result};
use crate::filter::{apply_filter, partition, CriterionKind, DiscountMode, ScoreCriterion};
use crate::fsutil;
use crate::learn::{train_with_checkpoints, Algorithm, LearnerConfig};
use crate::rng;

/// Dataset used for a cell: the unfiltered one, or one of the two filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionChoice {
    None,
    Avg,
    Disc,
}

impl CriterionChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            CriterionChoice::None => "none",
            CriterionChoice::Avg => "avg",
            CriterionChoice::Disc => "disc",
        }
    }
}

/// How training length is matched between filtered and unfiltered runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Budget {
    /// Same number of full-dataset sweeps at every checkpoint.
    EqualSweeps,
    /// Filtered runs get more sweeps so they process as many transitions.
    EqualUpdates,
}

impl Budget {
    pub fn as_str(self) -> &'static str {
        match self {
            Budget::EqualSweeps => "equal-sweeps",
            Budget::EqualUpdates => "equal-updates",
        }
    }
}

/// Learner entry in a plan file; unset fields take the learner defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerPlan {
    pub algorithm: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expectile_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub awr_temperature: Option<f64>,
}

impl LearnerPlan {
    pub fn new(algorithm: Algorithm) -> Self {
        LearnerPlan {
            algorithm,
            gamma: None,
            batch_size: None,
            learning_rate: None,
            alpha: None,
            expectile_tau: None,
            awr_temperature: None,
        }
    }

    /// Config for one run; `epochs` is set from the plan's checkpoints.
    pub fn config(&self, epochs: usize, seed: u64) -> LearnerConfig {
        let d = LearnerConfig::new(self.algorithm);
        LearnerConfig {
            algorithm: self.algorithm,
            gamma: self.gamma.unwrap_or(d.gamma),
            epochs,
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            alpha: self.alpha.unwrap_or(d.alpha),
            expectile_tau: self.expectile_tau.unwrap_or(d.expectile_tau),
            awr_temperature: self.awr_temperature.unwrap_or(d.awr_temperature),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalPlan {
    pub n_episodes: usize,
    pub gamma: f64,
}

impl Default for EvalPlan {
    fn default() -> Self {
        EvalPlan {
            n_episodes: 500,
            gamma: 1.0,
        }
    }
}

fn default_behavior() -> BehaviorPlan {
    BehaviorPlan::default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorPlan {
    pub epsilon: f64,
    pub medium_fraction: f64,
    pub gamma: f64,
}

impl Default for BehaviorPlan {
    fn default() -> Self {
        let b = BehaviorSettings::default();
        BehaviorPlan {
            epsilon: b.epsilon,
            medium_fraction: b.medium_fraction,
            gamma: b.gamma,
        }
    }
}

/// Declarative description of a filtered-vs-unfiltered comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub env: String,
    #[serde(default)]
    pub env_params: Vec<String>,
    /// Relative weights of random, medium and expert episodes.
    pub mix: [u64; 3],
    pub episodes: usize,
    pub dataset_seed: u64,
    pub n_seeds: usize,
    pub criteria: Vec<CriterionChoice>,
    pub filter_mode: DiscountMode,
    pub filter_gamma: f64,
    pub checkpoints: Vec<usize>,
    pub budget: Budget,
    #[serde(default = "default_behavior")]
    pub behavior: BehaviorPlan,
    #[serde(default)]
    pub eval: EvalPlan,
    pub learners: Vec<LearnerPlan>,
}

/// gridworld(n=5, slip=0.1), 50/30/20 mix of 200 episodes, five seeds,
/// all three learners, no filter vs both filters, equal sweep counts.
pub fn default_plan() -> ExperimentPlan {
    ExperimentPlan {
        env: "gridworld".into(),
        env_params: vec!["n=5".into(), "slip=0.1".into()],
        mix: [50, 30, 20],
        episodes: 200,
        dataset_seed: 0,
        n_seeds: 5,
        criteria: vec![CriterionChoice::None, CriterionChoice::Avg, CriterionChoice::Disc],
        filter_mode: DiscountMode::AbsolutePower,
        filter_gamma: 0.99,
        checkpoints: vec![5, 20, 100, 500],
        budget: Budget::EqualSweeps,
        behavior: BehaviorPlan::default(),
        eval: EvalPlan::default(),
        learners: Algorithm::ALL.iter().map(|&a| LearnerPlan::new(a)).collect(),
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: ExperimentPlan =
            toml::from_str(text).map_err(|e| Error::param(format!("plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(Error::param("n_seeds must be >= 1"));
        }
        if self.checkpoints.is_empty() || self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("checkpoints must be non-empty and strictly ascending"));
        }
        if self.criteria.is_empty() || self.learners.is_empty() {
            return Err(Error::param("plan needs at least one criterion and one learner"));
        }
        if self.eval.n_episodes == 0 || !(0.0..=1.0).contains(&self.eval.gamma) {
            return Err(Error::param("eval needs n_episodes >= 1 and gamma in [0, 1]"));
        }
        self.score_criterion(CriterionKind::AverageDiscounted)?;
        self.env()?;
        for l in &self.learners {
            l.config(1, 0).validate()?;
        }
        MixSpec::from_weights(self.mix, self.episodes, 0)?;
        Ok(())
    }

    pub fn env(&self) -> Result<DiscreteMdp> {
        make_env(&self.env, &EnvParams::parse(&self.env_params)?)
    }

    fn score_criterion(&self, kind: CriterionKind) -> Result<ScoreCriterion> {
        ScoreCriterion::new(kind, self.filter_gamma, self.filter_mode)
    }

    fn behavior_settings(&self) -> BehaviorSettings {
        BehaviorSettings {
            epsilon: self.behavior.epsilon,
            medium_fraction: self.behavior.medium_fraction,
            gamma: self.behavior.gamma,
        }
    }

    fn seed(&self, i: usize) -> u64 {
        self.dataset_seed.wrapping_add(i as u64)
    }

    /// Dataset generated for seed index `i`; the same for every criterion
    /// and learner.
    pub fn dataset_for_seed(&self, m: &DiscreteMdp, i: usize) -> Result<Dataset> {
        let seed = self.seed(i);
        let mix = MixSpec::from_weights(self.mix, self.episodes, rng::derive_seed(seed, 0x5f))?;
        generate_dataset(m, &mix, &self.behavior_settings(), seed)
    }

    /// The dataset a criterion trains on, or `None` when filtering is
    /// degenerate.
    pub fn filtered(&self, d: &Dataset, choice: CriterionChoice) -> Result<Option<Dataset>> {
        let kind = match choice {
            CriterionChoice::None => return Ok(Some(d.clone())),
            CriterionChoice::Avg => CriterionKind::AverageReward,
            CriterionChoice::Disc => CriterionKind::AverageDiscounted,
        };
        let report = partition(d, &self.score_criterion(kind)?)?;
        match apply_filter(d, &report) {
            Ok(f) => Ok(Some(f)),
            Err(Error::Degenerate { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn eval_config(&self, i: usize) -> EvalConfig {
        EvalConfig {
            n_episodes: self.eval.n_episodes,
            gamma_eval: self.eval.gamma,
            seed: rng::derive_seed(self.seed(i), 0xe7),
        }
    }

    fn meta(&self, m: &DiscreteMdp) -> ResultMeta {
        let mut gamma_train: Vec<f64> = Vec::new();
        for l in &self.learners {
            let g = l.config(1, 0).gamma;
            if !gamma_train.contains(&g) {
                gamma_train.push(g);
            }
        }
        ResultMeta {
            env_id: m.env_id().to_string(),
            gamma_train,
            gamma_eval: self.eval.gamma,
            budget: self.budget,
            filter_mode: self.filter_mode,
            filter_gamma: self.filter_gamma,
        }
    }
}

pub fn load_plan(path: impl AsRef<Path>) -> Result<ExperimentPlan> {
    ExperimentPlan::from_toml(&fsutil::read_to_string(path.as_ref())?)
}

fn run_seed(plan: &ExperimentPlan, m: &DiscreteMdp, i: usize) -> Result<Vec<ResultRow>> {
    let seed = plan.seed(i);
    let base = plan.dataset_for_seed(m, i)?;
    let base_size = base.transition_count();
    let eval = plan.eval_config(i);
    let mut rows = Vec::new();

    for &choice in &plan.criteria {
        let data = plan.filtered(&base, choice)?;
        for learner in &plan.learners {
            let Some(data) = &data else {
                rows.extend(plan.checkpoints.iter().map(|&c| ResultRow {
                    algorithm: learner.algorithm,
                    criterion: choice,
                    seed,
                    checkpoint: c,
                    mean_return: None,
                    std_return: None,
                    dataset_size_transitions: 0,
                    status: RowStatus::Degenerate,
                    fallback_steps: 0,
                    sweeps: 0,
                }));
                continue;
            };
            let size = data.transition_count();
            let sweeps: Vec<usize> = plan
                .checkpoints
                .iter()
                .map(|&c| match plan.budget {
                    Budget::EqualSweeps => c,
                    Budget::EqualUpdates => {
                        ((c as u128 * base_size as u128).div_ceil(size as u128)) as usize
                    }
                })
                .collect();
            let cfg = learner.config(*sweeps.last().expect("checkpoints non-empty"), seed);
            let models = train_with_checkpoints(data, &cfg, &sweeps)?;
            for (&c, model) in plan.checkpoints.iter().zip(&models) {
                let stats = rollout_return(m, &model.policy, &eval)?;
                rows.push(ResultRow {
                    algorithm: learner.algorithm,
                    criterion: choice,
                    seed,
                    checkpoint: c,
                    mean_return: Some(stats.mean),
                    std_return: Some(stats.std),
                    dataset_size_transitions: size,
                    status: RowStatus::Ok,
                    fallback_steps: stats.fallback_steps,
                    sweeps: model.sweeps,
                });
            }
        }
    }
    Ok(rows)
}

/// Runs the full (seed x criterion x learner x checkpoint) cross product.
///
/// Seeds run in parallel; rows come back in plan order. A degenerate filter
/// yields `DEGENERATE` rows for that (criterion, seed) and the run goes on.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ResultTable> {
    plan.validate()?;
    let m = plan.env()?;
    let per_seed = (0..plan.n_seeds)
        .into_par_iter()
        .map(|i| run_seed(plan, &m, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultTable {
        meta: plan.meta(&m),
        rows: per_seed.into_iter().flatten().collect(),
    })
}
