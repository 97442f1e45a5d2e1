//! Tabular offline learners with policy constraints.
//!
//! All three learners share one fitted-Q core that backs up only through
//! actions seen in the dataset at the next state, and a policy extractor
//! that only ever picks actions seen at the current state:
//!
//! * `support`: greedy over seen actions (tabular stand-in for BEAR's
//!   support constraint; MMD is available as a post-hoc diagnostic).
//! * `bc`: argmax of `lambda * Q + ln pi_beta` with `lambda = alpha / mean|Q|`
//!   (tabular TD3+BC).
//! * `expectile`: `V(s)` is the count-weighted expectile of `Q(s, .)`, and the
//!   policy maximizes the advantage `Q - V` (tabular IQL).

mod divergence;
mod expectile;
mod mmd;
mod model_file;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub use divergence::{policy_divergence_report, DivergenceConfig, DivergenceReport};
pub use expectile::{expectile, weighted_expectile};
pub use mmd::{mmd_squared, Kernel};
pub use model_file::{load_model, parse_model, render_model, save_model};

/// Sweep-to-sweep sup-norm change below which training stops.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "support")]
    SupportConstrainedQ,
    #[serde(rename = "bc")]
    BcRegularizedQ,
    #[serde(rename = "expectile")]
    ExpectileQ,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::SupportConstrainedQ,
        Algorithm::BcRegularizedQ,
        Algorithm::ExpectileQ,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::SupportConstrainedQ => "support",
            Algorithm::BcRegularizedQ => "bc",
            Algorithm::ExpectileQ => "expectile",
        }
    }

    /// Which neural method this tabular learner stands in for.
    pub fn port_note(self) -> &'static str {
        match self {
            Algorithm::SupportConstrainedQ => {
                "tabular port of BEAR: fitted-Q restricted to dataset-supported actions \
                 (strictest support constraint); no VAE sampler or dual MMD enforcement"
            }
            Algorithm::BcRegularizedQ => {
                "tabular port of TD3+BC: support-restricted fitted-Q, policy = argmax \
                 lambda*Q + ln pi_beta with lambda = alpha / mean|Q|"
            }
            Algorithm::ExpectileQ => {
                "tabular port of IQL: expectile value backup over dataset actions, \
                 deterministic advantage-argmax policy"
            }
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "support" => Ok(Algorithm::SupportConstrainedQ),
            "bc" => Ok(Algorithm::BcRegularizedQ),
            "expectile" => Ok(Algorithm::ExpectileQ),
            _ => Err(Error::param(format!(
                "unknown algorithm `{s}` (support|bc|expectile)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    /// Maximum number of full dataset sweeps.
    pub epochs: usize,
    /// Transitions accumulated per chunk within a sweep.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    pub expectile_tau: f64,
    pub awr_temperature: f64,
    pub seed: u64,
}

impl LearnerConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        LearnerConfig {
            algorithm,
            gamma: 0.99,
            epochs: 2000,
            batch_size: 256,
            learning_rate: 1.0,
            alpha: 2.5,
            expectile_tau: 0.7,
            awr_temperature: 3.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.gamma,
            self.learning_rate,
            self.alpha,
            self.expectile_tau,
            self.awr_temperature,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::param("learner config has non-finite values"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::param(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::param(format!(
                "learning_rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size must be >= 1"));
        }
        if self.alpha < 0.0 {
            return Err(Error::param(format!("alpha {} must be >= 0", self.alpha)));
        }
        if !(self.expectile_tau > 0.0 && self.expectile_tau < 1.0) {
            return Err(Error::param(format!(
                "expectile_tau {} outside (0, 1)",
                self.expectile_tau
            )));
        }
        if self.awr_temperature <= 0.0 {
            return Err(Error::param("awr_temperature must be > 0"));
        }
        Ok(())
    }
}

/// Empirical behavior policy `N(s, a) / N(s)` from dataset visitation counts.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorEstimate {
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-major `N(s, a)`.
    pub counts: Vec<u64>,
}

impl BehaviorEstimate {
    pub fn from_dataset(d: &Dataset) -> Result<Self> {
        Ok(TabularData::extract(d)?.behavior())
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[s * self.n_actions + a]
    }

    pub fn state_count(&self, s: usize) -> u64 {
        self.counts[s * self.n_actions..(s + 1) * self.n_actions].iter().sum()
    }

    pub fn is_seen(&self, s: usize, a: usize) -> bool {
        self.count(s, a) > 0
    }

    pub fn support(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_actions).filter(move |&a| self.is_seen(s, a))
    }

    /// `pi_beta(. | s)`, or `None` for states never seen in the data.
    pub fn row(&self, s: usize) -> Option<Vec<f64>> {
        let n = self.state_count(s);
        (n > 0).then(|| {
            (0..self.n_actions)
                .map(|a| self.count(s, a) as f64 / n as f64)
                .collect()
        })
    }
}

/// Result of offline training.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedModel {
    pub config: LearnerConfig,
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-major `Q(s, a)`; unseen cells stay at 0.
    pub q: Vec<f64>,
    /// `V(s)`, expectile learner only.
    pub v: Option<Vec<f64>>,
    pub behavior: BehaviorEstimate,
    /// Chosen action per state; `None` where the dataset never visits `s`.
    pub policy: Vec<Option<usize>>,
    /// Full sweeps actually performed.
    pub sweeps: usize,
    pub converged: bool,
    /// BC trade-off `lambda` used at extraction, bc learner only.
    pub bc_lambda: Option<f64>,
    pub dataset_digest: String,
}

impl LearnedModel {
    pub fn q(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.n_actions + a]
    }

    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn action(&self, s: usize) -> Option<usize> {
        self.policy.get(s).copied().flatten()
    }

    /// Advantage-weighted action distribution `exp(T * A) / Z` over seen
    /// actions (expectile learner only).
    pub fn awr_weights(&self, s: usize) -> Option<Vec<f64>> {
        let v = self.v.as_ref()?[s];
        if self.behavior.state_count(s) == 0 {
            return None;
        }
        let t = self.config.awr_temperature;
        let adv: Vec<Option<f64>> = (0..self.n_actions)
            .map(|a| self.behavior.is_seen(s, a).then(|| t * (self.q(s, a) - v)))
            .collect();
        let top = adv.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = adv
            .iter()
            .map(|x| x.map_or(0.0, |x| (x - top).exp()))
            .collect();
        let z: f64 = raw.iter().sum();
        Some(raw.into_iter().map(|w| w / z).collect())
    }

    /// Action distribution of the learned policy at `s`: one-hot on the
    /// chosen action, or the advantage weights when `weighted` is set and
    /// the model has them.
    pub fn action_distribution(&self, s: usize, weighted: bool) -> Option<Vec<f64>> {
        if weighted {
            if let Some(w) = self.awr_weights(s) {
                return Some(w);
            }
        }
        let a = self.action(s)?;
        let mut row = vec![0.0; self.n_actions];
        row[a] = 1.0;
        Some(row)
    }

    /// Number of visited states whose chosen action was never observed there.
    pub fn support_violations(&self) -> usize {
        (0..self.n_states)
            .filter(|&s| self.behavior.state_count(s) > 0)
            .filter(|&s| match self.action(s) {
                Some(a) => !self.behavior.is_seen(s, a),
                None => true,
            })
            .count()
    }
}

/// `r` at a terminal transition, `r + gamma * v_next` otherwise (timeouts
/// bootstrap).
pub fn bellman_target(r: f64, v_next: f64, gamma: f64, terminal: bool) -> f64 {
    if terminal {
        r
    } else {
        r + gamma * v_next
    }
}

#[derive(Debug, Clone, Copy)]
struct Step {
    s: usize,
    a: usize,
    r: f64,
    next: usize,
    terminal: bool,
}

/// Dataset flattened to discrete index tuples.
struct TabularData {
    n_states: usize,
    n_actions: usize,
    steps: Vec<Step>,
    counts: Vec<u64>,
}

impl TabularData {
    fn extract(d: &Dataset) -> Result<Self> {
        use crate::dataset::SpaceKind;
        let (n_states, n_actions) = match (d.env_spec.state_kind, d.env_spec.action_kind) {
            (SpaceKind::Discrete(ns), SpaceKind::Discrete(na)) => (ns, na),
            _ => {
                return Err(Error::Unsupported(
                    "tabular learners need discrete states and actions".into(),
                ))
            }
        };
        if d.transition_count() == 0 {
            return Err(Error::EmptyDataset);
        }
        let id = |p: &crate::dataset::Payload, limit: usize, what: &str| -> Result<usize> {
            match p.as_id() {
                Some(i) if (i as u128) < limit as u128 => Ok(i as usize),
                _ => Err(Error::param(format!("{what} {p:?} outside discrete({limit})"))),
            }
        };
        let mut counts = vec![0u64; n_states * n_actions];
        let mut steps = Vec::with_capacity(d.transition_count());
        for t in d.transitions() {
            let step = Step {
                s: id(&t.state, n_states, "state")?,
                a: id(&t.action, n_actions, "action")?,
                r: t.reward,
                next: id(&t.next_state, n_states, "next_state")?,
                terminal: t.terminal,
            };
            counts[step.s * n_actions + step.a] += 1;
            steps.push(step);
        }
        Ok(TabularData {
            n_states,
            n_actions,
            steps,
            counts,
        })
    }

    fn behavior(&self) -> BehaviorEstimate {
        BehaviorEstimate {
            n_states: self.n_states,
            n_actions: self.n_actions,
            counts: self.counts.clone(),
        }
    }
}

/// Running state of the shared fitted-Q iteration.
struct FittedQ<'a> {
    data: &'a TabularData,
    cfg: LearnerConfig,
    q: Vec<f64>,
    sweeps: usize,
    converged: bool,
}

impl<'a> FittedQ<'a> {
    fn new(data: &'a TabularData, cfg: LearnerConfig) -> Self {
        FittedQ {
            data,
            cfg,
            q: vec![0.0; data.n_states * data.n_actions],
            sweeps: 0,
            converged: false,
        }
    }

    fn seen(&self, s: usize, a: usize) -> bool {
        self.data.counts[s * self.data.n_actions + a] > 0
    }

    /// Max of `Q(s, .)` over seen actions; 0 when `s` was never acted from.
    fn support_max(&self, s: usize) -> f64 {
        let na = self.data.n_actions;
        (0..na)
            .filter(|&a| self.seen(s, a))
            .map(|a| self.q[s * na + a])
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |m| m.max(x))))
            .unwrap_or(0.0)
    }

    /// Count-weighted expectile of `Q(s, .)` over seen actions; 0 when unseen.
    fn expectile_value(&self, s: usize) -> f64 {
        let na = self.data.n_actions;
        let pairs: Vec<(f64, f64)> = (0..na)
            .filter(|&a| self.seen(s, a))
            .map(|a| (self.q[s * na + a], self.data.counts[s * na + a] as f64))
            .collect();
        if pairs.is_empty() {
            0.0
        } else {
            weighted_expectile(&pairs, self.cfg.expectile_tau).expect("validated tau, finite Q")
        }
    }

    fn state_values(&self) -> Vec<f64> {
        (0..self.data.n_states)
            .map(|s| match self.cfg.algorithm {
                Algorithm::ExpectileQ => self.expectile_value(s),
                _ => self.support_max(s),
            })
            .collect()
    }

    /// One full sweep: targets use the values at sweep start; each seen cell
    /// moves `learning_rate` of the way to its mean target.
    fn sweep(&mut self) {
        let v = self.state_values();
        let mut target_sum = vec![0.0; self.q.len()];
        for chunk in self.data.steps.chunks(self.cfg.batch_size) {
            for st in chunk {
                target_sum[st.s * self.data.n_actions + st.a] +=
                    bellman_target(st.r, v[st.next], self.cfg.gamma, st.terminal);
            }
        }
        let mut delta: f64 = 0.0;
        for (cell, &n) in self.data.counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let mean = target_sum[cell] / n as f64;
            let old = self.q[cell];
            let new = old + self.cfg.learning_rate * (mean - old);
            delta = delta.max((new - old).abs());
            self.q[cell] = new;
        }
        if self.cfg.algorithm == Algorithm::ExpectileQ {
            let v_after = self.state_values();
            for (a, b) in v.iter().zip(&v_after) {
                delta = delta.max((a - b).abs());
            }
        }
        self.sweeps += 1;
        self.converged = delta < CONVERGENCE_TOLERANCE;
    }

    fn run_until(&mut self, sweeps: usize) {
        while self.sweeps < sweeps && !self.converged {
            self.sweep();
        }
    }

    fn snapshot(&self, digest: &str) -> LearnedModel {
        let (ns, na) = (self.data.n_states, self.data.n_actions);
        let behavior = self.data.behavior();
        let v = (self.cfg.algorithm == Algorithm::ExpectileQ).then(|| self.state_values());

        let bc_lambda = (self.cfg.algorithm == Algorithm::BcRegularizedQ).then(|| {
            let mean_abs = self
                .data
                .steps
                .iter()
                .map(|st| self.q[st.s * na + st.a].abs())
                .sum::<f64>()
                / self.data.steps.len() as f64;
            if mean_abs > 0.0 {
                self.cfg.alpha / mean_abs
            } else {
                0.0
            }
        });

        let policy = (0..ns)
            .map(|s| {
                let n_s = behavior.state_count(s) as f64;
                let score = |a: usize| -> f64 {
                    let q = self.q[s * na + a];
                    match self.cfg.algorithm {
                        Algorithm::SupportConstrainedQ => q,
                        Algorithm::BcRegularizedQ => {
                            let p = behavior.count(s, a) as f64 / n_s;
                            bc_lambda.unwrap_or(0.0) * q + p.ln()
                        }
                        Algorithm::ExpectileQ => q - v.as_ref().map_or(0.0, |v| v[s]),
                    }
                };
                let mut best: Option<(usize, f64)> = None;
                for a in behavior.support(s) {
                    let x = score(a);
                    if best.is_none_or(|(_, b)| x > b) {
                        best = Some((a, x));
                    }
                }
                best.map(|(a, _)| a)
            })
            .collect();

        LearnedModel {
            config: self.cfg,
            n_states: ns,
            n_actions: na,
            q: self.q.clone(),
            v,
            behavior,
            policy,
            sweeps: self.sweeps,
            converged: self.converged,
            bc_lambda,
            dataset_digest: digest.to_string(),
        }
    }
}

/// Trains with `cfg.epochs` as the sweep cap.
pub fn train(d: &Dataset, cfg: &LearnerConfig) -> Result<LearnedModel> {
    let mut models = train_with_checkpoints(d, cfg, &[cfg.epochs])?;
    Ok(models.pop().expect("one checkpoint"))
}

/// Trains once and snapshots the model after each checkpoint's sweep count
/// (a run that converges earlier repeats its converged model).
pub fn train_with_checkpoints(
    d: &Dataset,
    cfg: &LearnerConfig,
    checkpoints: &[usize],
) -> Result<Vec<LearnedModel>> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("checkpoints must be ascending"));
    }
    let data = TabularData::extract(d)?;
    let digest = d.digest();
    let mut fq = FittedQ::new(&data, *cfg);
    let mut out = Vec::with_capacity(checkpoints.len());
    for &c in checkpoints {
        fq.run_until(c);
        out.push(fq.snapshot(&digest));
    }
    Ok(out)
}

pub fn train_support_constrained_q(d: &Dataset, cfg: &LearnerConfig) -> Result<LearnedModel> {
    train(d, &LearnerConfig { algorithm: Algorithm::SupportConstrainedQ, ..*cfg })
}

pub fn train_bc_regularized_q(d: &Dataset, cfg: &LearnerConfig) -> Result<LearnedModel> {
    train(d, &LearnerConfig { algorithm: Algorithm::BcRegularizedQ, ..*cfg })
}

pub fn train_expectile_q(d: &Dataset, cfg: &LearnerConfig) -> Result<LearnedModel> {
    train(d, &LearnerConfig { algorithm: Algorithm::ExpectileQ, ..*cfg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{EnvSpec, Episode, SpaceKind, Transition};

    fn dataset(ns: usize, na: usize, episodes: Vec<Vec<Transition>>) -> Dataset {
        let spec = EnvSpec::new("t", SpaceKind::Discrete(ns), SpaceKind::Discrete(na), 50).unwrap();
        Dataset::new(
            spec,
            episodes
                .into_iter()
                .enumerate()
                .map(|(i, t)| Episode::new(i, t))
                .collect(),
            "",
        )
    }

    #[test]
    fn bellman_target_cases() {
        assert_eq!(bellman_target(1.0, 123.0, 0.99, true), 1.0);
        assert_eq!(bellman_target(0.0, 2.0, 0.5, false), 1.0);
        let g = 0.9;
        assert!((bellman_target(1.0, 1.0 / (1.0 - g), g, false) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn single_transition_cell() {
        let d = dataset(3, 2, vec![vec![Transition::discrete(1, 1, 0.75, 2).with_terminal(true)]]);
        for algo in Algorithm::ALL {
            let m = train(&d, &LearnerConfig::new(algo)).unwrap();
            assert_eq!(m.q(1, 1), 0.75, "{algo:?}");
            assert_eq!(m.action(1), Some(1));
            assert_eq!(m.action(0), None);
            if let Some(v) = &m.v {
                assert_eq!(v[1], 0.75);
            }
        }
    }

    #[test]
    fn unseen_optimal_action_never_chosen() {
        // state 0: action 0 seen with reward 0, action 1 (truly better) never logged
        let d = dataset(2, 2, vec![vec![Transition::discrete(0, 0, 0.0, 1).with_terminal(true)]]);
        let m = train_support_constrained_q(&d, &LearnerConfig::new(Algorithm::SupportConstrainedQ)).unwrap();
        assert_eq!(m.action(0), Some(0));
        assert_eq!(m.support_violations(), 0);
    }

    fn two_action_state() -> Dataset {
        // one visit of action 0 worth 1.0, nine of action 1 worth 0.9
        let mut eps = vec![vec![Transition::discrete(0, 0, 1.0, 1).with_terminal(true)]];
        for _ in 0..9 {
            eps.push(vec![Transition::discrete(0, 1, 0.9, 1).with_terminal(true)]);
        }
        dataset(2, 2, eps)
    }

    #[test]
    fn bc_scoring_prefers_frequent_action() {
        let d = two_action_state();
        let cfg = LearnerConfig::new(Algorithm::BcRegularizedQ);
        let m = train(&d, &cfg).unwrap();
        // mean |Q| over the ten logged transitions: (1.0 + 9 * 0.9) / 10
        let mean_abs = (1.0 + 9.0 * 0.9) / 10.0;
        assert!((m.bc_lambda.unwrap() - 2.5 / mean_abs).abs() < 1e-12);
        assert_eq!(m.action(0), Some(1));
    }

    #[test]
    fn bc_limits() {
        let d = two_action_state();
        let big = train(&d, &LearnerConfig { alpha: 1e9, ..LearnerConfig::new(Algorithm::BcRegularizedQ) }).unwrap();
        let greedy = train(&d, &LearnerConfig::new(Algorithm::SupportConstrainedQ)).unwrap();
        assert_eq!(big.policy, greedy.policy);
        assert_eq!(big.action(0), Some(0));
        let zero = train(&d, &LearnerConfig { alpha: 0.0, ..LearnerConfig::new(Algorithm::BcRegularizedQ) }).unwrap();
        assert_eq!(zero.action(0), Some(1));
    }

    #[test]
    fn rejects_empty_and_continuous() {
        let d = dataset(2, 2, vec![]);
        assert!(matches!(
            train(&d, &LearnerConfig::new(Algorithm::SupportConstrainedQ)),
            Err(Error::EmptyDataset)
        ));
        let spec = EnvSpec::new("c", SpaceKind::Continuous(2), SpaceKind::Discrete(2), 5).unwrap();
        let t = Transition {
            state: crate::dataset::Payload::Vector(vec![0.0, 0.0]),
            action: crate::dataset::Payload::Id(0),
            reward: 0.0,
            next_state: crate::dataset::Payload::Vector(vec![0.0, 1.0]),
            terminal: true,
            timeout: false,
        };
        let d = Dataset::new(spec, vec![Episode::new(0, vec![t])], "");
        assert!(matches!(
            train(&d, &LearnerConfig::new(Algorithm::ExpectileQ)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn timeout_bootstraps_terminal_does_not() {
        // 0 -a0-> 1 (timeout), 1 -a0-> 2 (terminal, r = 1)
        let d = dataset(
            3,
            1,
            vec![
                vec![Transition::discrete(0, 0, 0.0, 1).with_timeout(true)],
                vec![Transition::discrete(1, 0, 1.0, 2).with_terminal(true)],
            ],
        );
        let cfg = LearnerConfig { gamma: 0.5, ..LearnerConfig::new(Algorithm::SupportConstrainedQ) };
        let m = train(&d, &cfg).unwrap();
        assert!((m.q(0, 0) - 0.5).abs() < 1e-12);
        assert_eq!(m.q(1, 0), 1.0);
    }

    #[test]
    fn config_validation() {
        let base = LearnerConfig::new(Algorithm::ExpectileQ);
        assert!(LearnerConfig { gamma: 1.0, ..base }.validate().is_err());
        assert!(LearnerConfig { expectile_tau: 1.0, ..base }.validate().is_err());
        assert!(LearnerConfig { learning_rate: 0.0, ..base }.validate().is_err());
        assert!(LearnerConfig { awr_temperature: 0.0, ..base }.validate().is_err());
        assert!(LearnerConfig { alpha: f64::NAN, ..base }.validate().is_err());
        assert!(base.validate().is_ok());
    }

    #[test]
    fn awr_weights_normalize_over_support() {
        let d = two_action_state();
        let m = train(&d, &LearnerConfig::new(Algorithm::ExpectileQ)).unwrap();
        let w = m.awr_weights(0).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w[0] > w[1]);
        assert!(m.awr_weights(1).is_none());
    }
}
