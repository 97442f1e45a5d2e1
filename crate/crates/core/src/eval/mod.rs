//! Policy evaluation by rollout and the filtered-vs-unfiltered experiment.

mod experiment;
mod results;

use crate::env::DiscreteMdp;
use crate::error::{Error, Result};
use crate::rng;

pub use experiment::{
    default_plan, load_plan, run_experiment, BehaviorPlan, Budget, CriterionChoice, EvalPlan, ExperimentPlan,
    LearnerPlan,
};
pub use results::{
    emit_results, parse_results, render_results, ParsedResults, ResultMeta, ResultRow,
    ResultTable, RowStatus, SummaryRow,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub n_episodes: usize,
    /// Discount applied to evaluation returns, in `[0, 1]`.
    pub gamma_eval: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_episodes: 200,
            gamma_eval: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStats {
    pub mean: f64,
    /// Population standard deviation over episodes.
    pub std: f64,
    pub per_episode: Vec<f64>,
    /// Steps taken in states where the policy had no action (action 0 used).
    pub fallback_steps: usize,
}

/// Estimates the discounted return of a deterministic policy by rollout.
///
/// `policy[s] = None` marks states the training data never visited; those
/// fall back to action 0 and are counted in `fallback_steps`.
pub fn rollout_return(m: &DiscreteMdp, policy: &[Option<usize>], cfg: &EvalConfig) -> Result<RolloutStats> {
    if cfg.n_episodes == 0 {
        return Err(Error::param("n_episodes must be >= 1"));
    }
    if !(0.0..=1.0).contains(&cfg.gamma_eval) {
        return Err(Error::param(format!("gamma_eval {} outside [0, 1]", cfg.gamma_eval)));
    }
    if policy.len() != m.n_states() {
        return Err(Error::param(format!(
            "policy covers {} states, environment has {}",
            policy.len(),
            m.n_states()
        )));
    }
    if policy.iter().flatten().any(|&a| a >= m.n_actions()) {
        return Err(Error::param("policy selects an action outside the action space"));
    }

    let mut rng = rng::stream(cfg.seed, 0xe7a1);
    let mut fallback_steps = 0;
    let per_episode: Vec<f64> = (0..cfg.n_episodes)
        .map(|_| {
            let steps = m.simulate(&mut rng, |s, _| {
                policy[s].unwrap_or_else(|| {
                    fallback_steps += 1;
                    0
                })
            });
            let mut discount = 1.0;
            let mut ret = 0.0;
            for t in &steps {
                ret += discount * t.reward;
                discount *= cfg.gamma_eval;
            }
            ret
        })
        .collect();

    let n = per_episode.len() as f64;
    let mean = per_episode.iter().sum::<f64>() / n;
    let var = per_episode.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok(RolloutStats {
        mean,
        std: var.sqrt(),
        per_episode,
        fallback_steps,
    })
}
