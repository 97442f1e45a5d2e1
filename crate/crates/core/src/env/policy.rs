use rand::Rng;

use super::{argmax_lowest, sample_index, solve_optimal, DiscreteMdp, OptimalSolution};
use crate::error::{Error, Result};
use crate::rng;

/// Row-stochastic `pi(a | s)` table.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        StochasticPolicy {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Greedy action per state, mixed with `epsilon` of uniform noise.
    pub fn epsilon_greedy(greedy: &[usize], n_actions: usize, epsilon: f64) -> Self {
        let n_states = greedy.len();
        let noise = epsilon / n_actions as f64;
        let mut probs = vec![noise; n_states * n_actions];
        for (s, &a) in greedy.iter().enumerate() {
            probs[s * n_actions + a] += 1.0 - epsilon;
        }
        StochasticPolicy {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn greedy(&self, s: usize) -> usize {
        argmax_lowest(self.row(s), 0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        sample_index(self.row(s), rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    Random,
    /// Q-learning stopped at this fraction of the steps it needs to converge.
    Medium { training_fraction: f64 },
    Expert,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorPolicyKind {
    pub kind: PolicyKind,
    /// Uniform exploration mixed into the greedy policies during collection.
    pub epsilon: f64,
}

impl BehaviorPolicyKind {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::param(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        if let PolicyKind::Medium { training_fraction } = self.kind {
            if !(training_fraction > 0.0 && training_fraction < 1.0) {
                return Err(Error::param(format!(
                    "training_fraction {training_fraction} outside (0, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// Settings for the online Q-learning run that defines the Medium policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QLearningParams {
    /// Exploration rate of the epsilon-greedy learner.
    pub explore: f64,
    /// Per-cell step size is `1 / (1 + visits)^lr_decay`.
    pub lr_decay: f64,
    pub max_steps: usize,
    /// The greedy action "matches" the optimal policy when its optimal
    /// action value is within this much of `V*(s)`.
    pub match_tolerance: f64,
    pub exploring_starts: bool,
}

impl Default for QLearningParams {
    fn default() -> Self {
        QLearningParams {
            explore: 0.2,
            lr_decay: 0.6,
            max_steps: 2_000_000,
            match_tolerance: super::TIE_TOLERANCE,
            exploring_starts: true,
        }
    }
}

/// Outcome of online Q-learning: the table at the stopping step and the
/// number of steps taken.
#[derive(Debug, Clone)]
pub struct QLearningRun {
    pub q: Vec<f64>,
    pub steps: usize,
    pub converged: bool,
}

/// Tabular Q-learning on the true MDP. Stops after `budget` steps, or as
/// soon as the greedy policy is optimal on every non-terminal state when
/// `stop_on_convergence` is set.
pub fn q_learning(
    m: &DiscreteMdp,
    gamma: f64,
    optimal: &OptimalSolution,
    params: &QLearningParams,
    seed: u64,
    budget: usize,
    stop_on_convergence: bool,
) -> QLearningRun {
    let (ns, na) = (m.n_states(), m.n_actions());
    let mut q = vec![0.0; ns * na];
    let mut visits = vec![0u64; ns * na];
    let mut rng = rng::stream(seed, 0x51);

    let matches = |q: &[f64], s: usize| {
        let g = argmax_lowest(&q[s * na..(s + 1) * na], 0.0);
        optimal.q(s, g) >= optimal.v[s] - params.match_tolerance
    };
    let mut mismatched: usize = (0..ns).filter(|&s| !m.is_terminal(s) && !matches(&q, s)).count();
    if stop_on_convergence && mismatched == 0 {
        return QLearningRun {
            q,
            steps: 0,
            converged: true,
        };
    }

    let starts: Vec<usize> = (0..ns).filter(|&s| !m.is_terminal(s)).collect();
    let mut steps = 0;
    'outer: while steps < budget {
        // exploring starts: every non-terminal state gets updates, not only
        // the ones a near-greedy walk from the start reaches
        let mut s = if params.exploring_starts {
            starts[rng.gen_range(0..starts.len())]
        } else {
            m.sample_initial(&mut rng)
        };
        for _ in 0..m.horizon() {
            if m.is_terminal(s) || steps >= budget {
                break;
            }
            let a = if rng.gen::<f64>() < params.explore {
                rng.gen_range(0..na)
            } else {
                // random tie-breaking, otherwise the all-zero start never
                // leaves the action-0 corner
                let row = &q[s * na..(s + 1) * na];
                let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let ties: Vec<usize> = (0..na).filter(|&a| row[a] == best).collect();
                ties[rng.gen_range(0..ties.len())]
            };
            let next = m.sample_next(s, a, &mut rng);
            let r = m.reward(s, a, next);
            let target = if m.is_terminal(next) {
                r
            } else {
                let best = q[next * na..(next + 1) * na]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                r + gamma * best
            };
            let cell = s * na + a;
            visits[cell] += 1;
            let lr = 1.0 / (1.0 + visits[cell] as f64).powf(params.lr_decay);
            let before = matches(&q, s);
            q[cell] += lr * (target - q[cell]);
            let after = matches(&q, s);
            match (before, after) {
                (true, false) => mismatched += 1,
                (false, true) => mismatched -= 1,
                _ => {}
            }
            steps += 1;
            if stop_on_convergence && mismatched == 0 {
                break 'outer;
            }
            s = next;
        }
    }
    QLearningRun {
        q,
        steps,
        converged: mismatched == 0,
    }
}

/// Builds a data-collection policy.
///
/// Random is uniform. Expert is greedy on the value-iteration solution.
/// Medium is greedy on a Q-learning table snapshot taken at
/// `training_fraction` of the steps Q-learning needs before its greedy
/// policy is optimal everywhere. Expert and Medium mix in `epsilon` of
/// uniform noise.
pub fn make_behavior_policy(
    m: &DiscreteMdp,
    kind: &BehaviorPolicyKind,
    gamma: f64,
    seed: u64,
) -> Result<StochasticPolicy> {
    kind.validate()?;
    let (ns, na) = (m.n_states(), m.n_actions());
    match kind.kind {
        PolicyKind::Random => Ok(StochasticPolicy::uniform(ns, na)),
        PolicyKind::Expert => {
            let sol = solve_optimal(m, gamma)?;
            Ok(StochasticPolicy::epsilon_greedy(&sol.policy, na, kind.epsilon))
        }
        PolicyKind::Medium { training_fraction } => {
            let sol = solve_optimal(m, gamma)?;
            let params = QLearningParams::default();
            let full = q_learning(m, gamma, &sol, &params, seed, params.max_steps, true);
            if !full.converged {
                return Err(Error::Unsupported(format!(
                    "Q-learning on {} did not reach the optimal greedy policy within {} steps",
                    m.env_id(),
                    params.max_steps
                )));
            }
            let budget = (training_fraction * full.steps as f64).floor() as usize;
            let partial = q_learning(m, gamma, &sol, &params, seed, budget, false);
            let greedy: Vec<usize> = (0..ns)
                .map(|s| argmax_lowest(&partial.q[s * na..(s + 1) * na], 0.0))
                .collect();
            Ok(StochasticPolicy::epsilon_greedy(&greedy, na, kind.epsilon))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_env, EnvParams};

    fn grid() -> DiscreteMdp {
        make_env("gridworld", &EnvParams::parse(&["n=5", "slip=0.1"]).unwrap()).unwrap()
    }

    #[test]
    fn random_is_uniform() {
        let p = make_behavior_policy(
            &grid(),
            &BehaviorPolicyKind {
                kind: PolicyKind::Random,
                epsilon: 0.1,
            },
            0.99,
            0,
        )
        .unwrap();
        for s in 0..25 {
            assert_eq!(p.row(s), &[0.25; 4]);
        }
    }

    #[test]
    fn greedy_expert_matches_optimal() {
        let m = grid();
        let sol = solve_optimal(&m, 0.99).unwrap();
        let p = make_behavior_policy(
            &m,
            &BehaviorPolicyKind {
                kind: PolicyKind::Expert,
                epsilon: 0.0,
            },
            0.99,
            0,
        )
        .unwrap();
        for s in 0..25 {
            assert_eq!(p.greedy(s), sol.policy[s]);
        }
    }

    #[test]
    fn medium_fraction_validated() {
        let kind = BehaviorPolicyKind {
            kind: PolicyKind::Medium {
                training_fraction: 1.0,
            },
            epsilon: 0.1,
        };
        assert!(make_behavior_policy(&grid(), &kind, 0.99, 0).is_err());
    }

    #[test]
    fn q_learning_converges_on_small_grid() {
        let m = grid();
        let sol = solve_optimal(&m, 0.99).unwrap();
        let params = QLearningParams::default();
        let run = q_learning(&m, 0.99, &sol, &params, 1, params.max_steps, true);
        assert!(run.converged, "stopped after {} steps", run.steps);
    }

    #[test]
    fn medium_is_deterministic_in_seed() {
        let kind = BehaviorPolicyKind {
            kind: PolicyKind::Medium {
                training_fraction: 0.3,
            },
            epsilon: 0.1,
        };
        let a = make_behavior_policy(&grid(), &kind, 0.99, 5).unwrap();
        let b = make_behavior_policy(&grid(), &kind, 0.99, 5).unwrap();
        assert_eq!(a, b);
    }
}
