//! Small, exactly solvable discrete MDPs and the behavior policies used to
//! synthesize mixed-quality datasets from them.

mod builtin;
mod generate;
mod policy;

use rand::Rng;

use crate::dataset::{EnvSpec, SpaceKind, Transition};
use crate::error::{Error, Result};

pub use builtin::{make_env, parse_env_id, EnvParams, ENV_HELP};
pub use generate::{episode_sources, generate_dataset, BehaviorSettings, MixSpec, PolicyTag};
pub use policy::{
    make_behavior_policy, q_learning, BehaviorPolicyKind, PolicyKind, QLearningParams, QLearningRun, StochasticPolicy,
};

/// Greedy ties within this margin go to the lowest action id.
pub const TIE_TOLERANCE: f64 = 1e-8;

/// Value-iteration stopping threshold on the sup-norm change of Q.
pub const VALUE_ITERATION_TOLERANCE: f64 = 1e-10;

/// Tabular MDP with a known kernel.
///
/// Rewards are stored per `(s, a, s')` so that sampled rollouts see the
/// realized reward; [`DiscreteMdp::expected_reward`] gives the `R[s][a]` table.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMdp {
    env_id: String,
    n_states: usize,
    n_actions: usize,
    kernel: Vec<f64>,
    rewards: Vec<f64>,
    initial: Vec<f64>,
    terminal: Vec<bool>,
    horizon: usize,
}

impl DiscreteMdp {
    /// Builds an MDP from dense tables indexed `[(s * n_actions + a) * n_states + s']`.
    pub fn new(
        env_id: impl Into<String>,
        n_states: usize,
        n_actions: usize,
        kernel: Vec<f64>,
        rewards: Vec<f64>,
        initial: Vec<f64>,
        terminal: Vec<bool>,
        horizon: usize,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::param("MDP needs at least one state and one action"));
        }
        if horizon == 0 {
            return Err(Error::param("horizon must be >= 1"));
        }
        let cells = n_states * n_actions * n_states;
        if kernel.len() != cells || rewards.len() != cells {
            return Err(Error::param("kernel/reward table size mismatch"));
        }
        if initial.len() != n_states || terminal.len() != n_states {
            return Err(Error::param("initial/terminal table size mismatch"));
        }
        let mdp = DiscreteMdp {
            env_id: env_id.into(),
            n_states,
            n_actions,
            kernel,
            rewards,
            initial,
            terminal,
            horizon,
        };
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = mdp.next_distribution(s, a);
                let sum: f64 = row.iter().sum();
                if row.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::param(format!(
                        "kernel row ({s}, {a}) sums to {sum}"
                    )));
                }
            }
        }
        let init_sum: f64 = mdp.initial.iter().sum();
        if (init_sum - 1.0).abs() > 1e-12 {
            return Err(Error::param("initial distribution does not sum to 1"));
        }
        Ok(mdp)
    }

    pub fn env_id(&self) -> &str {
        &self.env_id
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }

    pub fn next_distribution(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.kernel[start..start + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize, next: usize) -> f64 {
        self.rewards[(s * self.n_actions + a) * self.n_states + next]
    }

    /// `R[s][a]`: reward expected under the kernel.
    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        let start = (s * self.n_actions + a) * self.n_states;
        self.next_distribution(s, a)
            .iter()
            .zip(&self.rewards[start..start + self.n_states])
            .map(|(p, r)| p * r)
            .sum()
    }

    pub fn env_spec(&self) -> EnvSpec {
        EnvSpec {
            env_id: self.env_id.clone(),
            state_kind: SpaceKind::Discrete(self.n_states),
            action_kind: SpaceKind::Discrete(self.n_actions),
            horizon: self.horizon,
        }
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.initial, rng)
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        sample_index(self.next_distribution(s, a), rng)
    }

    /// Runs one episode from the initial distribution, choosing actions with
    /// `choose`. Stops on entering a terminal state or after `horizon` steps;
    /// the final transition carries the matching flag.
    pub fn simulate<R, F>(&self, rng: &mut R, mut choose: F) -> Vec<Transition>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, &mut R) -> usize,
    {
        let mut s = self.sample_initial(rng);
        let mut steps = Vec::new();
        if self.terminal[s] {
            return steps;
        }
        for t in 0..self.horizon {
            let a = choose(s, rng);
            let next = self.sample_next(s, a, rng);
            let terminal = self.terminal[next];
            steps.push(Transition {
                timeout: !terminal && t + 1 == self.horizon,
                ..Transition::discrete(s as u64, a as u64, self.reward(s, a, next), next as u64)
                    .with_terminal(terminal)
            });
            if terminal {
                break;
            }
            s = next;
        }
        steps
    }
}

/// Inverse-CDF draw from a discrete distribution.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Index of the largest value; anything within `tol` of the maximum counts
/// as a tie and the lowest index wins.
pub fn argmax_lowest(values: &[f64], tol: f64) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .position(|&v| v >= best - tol)
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSolution {
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-major `Q*[s][a]`.
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub policy: Vec<usize>,
    pub iterations: usize,
}

impl OptimalSolution {
    pub fn q(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.n_actions + a]
    }

    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// True when `a` is optimal at `s` up to [`TIE_TOLERANCE`].
    pub fn is_optimal_action(&self, s: usize, a: usize) -> bool {
        self.q(s, a) >= self.v[s] - TIE_TOLERANCE
    }
}

fn backup(m: &DiscreteMdp, gamma: f64, v: &[f64], s: usize, a: usize) -> f64 {
    let start = (s * m.n_actions + a) * m.n_states;
    m.next_distribution(s, a)
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(next, p)| {
            let cont = if m.terminal[next] { 0.0 } else { gamma * v[next] };
            p * (m.rewards[start + next] + cont)
        })
        .sum()
}

/// Value iteration to a fixed point (sup-norm change below
/// [`VALUE_ITERATION_TOLERANCE`]), with greedy ties going to the lowest action.
pub fn solve_optimal(m: &DiscreteMdp, gamma: f64) -> Result<OptimalSolution> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::param(format!("gamma {gamma} outside [0, 1)")));
    }
    let (ns, na) = (m.n_states, m.n_actions);
    let mut q = vec![0.0; ns * na];
    let mut v = vec![0.0; ns];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut delta: f64 = 0.0;
        for s in 0..ns {
            if m.terminal[s] {
                continue;
            }
            for a in 0..na {
                let new = backup(m, gamma, &v, s, a);
                delta = delta.max((new - q[s * na + a]).abs());
                q[s * na + a] = new;
            }
        }
        for s in 0..ns {
            v[s] = q[s * na..(s + 1) * na]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
        }
        if delta < VALUE_ITERATION_TOLERANCE {
            break;
        }
    }
    let policy = (0..ns)
        .map(|s| argmax_lowest(&q[s * na..(s + 1) * na], TIE_TOLERANCE))
        .collect();
    Ok(OptimalSolution {
        n_states: ns,
        n_actions: na,
        q,
        v,
        policy,
        iterations,
    })
}
