use crate::env::sample_index;
use crate::error::{Error, Result};
use crate::rng;

use super::{mmd_squared, BehaviorEstimate, Kernel, LearnedModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceConfig {
    /// Gaussian kernel bandwidth on one-hot actions.
    pub sigma: f64,
    pub samples_per_state: usize,
    pub seed: u64,
    /// Sample the expectile learner's advantage weights instead of its
    /// deterministic action.
    pub weighted: bool,
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        DivergenceConfig {
            sigma: 1.0,
            samples_per_state: 64,
            seed: 0,
            weighted: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    /// `(state, MMD^2)` for every state the dataset visits.
    pub per_state: Vec<(usize, f64)>,
    /// Visitation-weighted mean of the per-state values.
    pub aggregate: f64,
}

fn one_hot(a: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[a] = 1.0;
    v
}

/// MMD^2 between actions drawn from the learned policy and from the
/// empirical behavior policy, per visited state, on one-hot encodings.
///
/// Every state draws from a fresh stream seeded by `cfg.seed` alone, so a
/// state's value depends only on its two action distributions.
pub fn policy_divergence_report(
    model: &LearnedModel,
    behavior: &BehaviorEstimate,
    cfg: &DivergenceConfig,
) -> Result<DivergenceReport> {
    if cfg.samples_per_state == 0 {
        return Err(Error::param("samples_per_state must be >= 1"));
    }
    if behavior.n_states != model.n_states || behavior.n_actions != model.n_actions {
        return Err(Error::param("model and behavior estimate differ in shape"));
    }
    let kernel = Kernel::Gaussian { sigma: cfg.sigma };
    let na = model.n_actions;
    let mut per_state = Vec::new();
    let mut weighted_sum = 0.0;
    let mut total = 0u64;
    for s in 0..model.n_states {
        let Some(beta) = behavior.row(s) else { continue };
        let Some(pi) = model.action_distribution(s, cfg.weighted) else {
            continue;
        };
        let mut rng = rng::stream(cfg.seed, 0xd1);
        let xs: Vec<Vec<f64>> = (0..cfg.samples_per_state)
            .map(|_| one_hot(sample_index(&pi, &mut rng), na))
            .collect();
        let ys: Vec<Vec<f64>> = (0..cfg.samples_per_state)
            .map(|_| one_hot(sample_index(&beta, &mut rng), na))
            .collect();
        let value = mmd_squared(&xs, &ys, kernel)?;
        let n = behavior.state_count(s);
        weighted_sum += n as f64 * value;
        total += n;
        per_state.push((s, value));
    }
    let aggregate = if total == 0 {
        0.0
    } else {
        weighted_sum / total as f64
    };
    Ok(DivergenceReport {
        per_state,
        aggregate,
    })
}
