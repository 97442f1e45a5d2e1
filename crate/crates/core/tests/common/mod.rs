#![allow(dead_code)]

use proptest::prelude::*;
use sieve_core::dataset::{Dataset, EnvSpec, Episode, SpaceKind, Transition};

pub const N_STATES: usize = 6;
pub const N_ACTIONS: usize = 3;

pub fn spec() -> EnvSpec {
    EnvSpec::new("test", SpaceKind::Discrete(N_STATES), SpaceKind::Discrete(N_ACTIONS), 100).unwrap()
}

/// Builds a chained episode from a start state and `(action, reward, next)`
/// steps; `end` is 0 (no flag), 1 (terminal) or 2 (timeout).
pub fn chained(index: usize, start: u64, steps: &[(u64, f64, u64)], end: u8) -> Episode {
    let mut s = start;
    let mut ts: Vec<Transition> = steps
        .iter()
        .map(|&(a, r, next)| {
            let t = Transition::discrete(s, a, r, next);
            s = next;
            t
        })
        .collect();
    if let Some(last) = ts.last_mut() {
        last.terminal = end == 1;
        last.timeout = end == 2;
    }
    Episode::new(index, ts)
}

pub fn arb_episode(max_len: usize, rewards: BoxedStrategy<f64>) -> impl Strategy<Value = (u64, Vec<(u64, f64, u64)>, u8)> {
    (
        0..N_STATES as u64,
        prop::collection::vec((0..N_ACTIONS as u64, rewards, 0..N_STATES as u64), 1..=max_len),
        0u8..3,
    )
}

/// Valid discrete datasets with 1..=`max_eps` episodes of 1..=`max_len` steps.
pub fn arb_dataset_with(max_eps: usize, max_len: usize, rewards: BoxedStrategy<f64>) -> impl Strategy<Value = Dataset> {
    prop::collection::vec(arb_episode(max_len, rewards), 1..=max_eps).prop_map(|eps| {
        let episodes = eps
            .iter()
            .enumerate()
            .map(|(i, (start, steps, end))| chained(i, *start, steps, *end))
            .collect();
        Dataset::new(spec(), episodes, "source=test")
    })
}

pub fn arb_dataset(max_eps: usize, max_len: usize) -> impl Strategy<Value = Dataset> {
    arb_dataset_with(max_eps, max_len, (-1.0f64..1.0).boxed())
}

/// Rewards drawn from a small grid so that ties with the mean occur.
pub fn arb_tied_dataset(max_eps: usize, max_len: usize) -> impl Strategy<Value = Dataset> {
    arb_dataset_with(max_eps, max_len, prop::sample::select(vec![-1.0, 0.0, 0.5, 1.0]).boxed())
}

pub fn map_rewards(d: &Dataset, f: impl Fn(f64) -> f64) -> Dataset {
    let mut out = d.clone();
    for e in &mut out.episodes {
        for t in &mut e.transitions {
            t.reward = f(t.reward);
        }
    }
    out
}
