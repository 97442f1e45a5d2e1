use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{make_behavior_policy, BehaviorPolicyKind, DiscreteMdp, PolicyKind};
use crate::dataset::{Dataset, Episode, Transition};
use crate::error::{Error, Result};
use crate::rng;

/// Which behavior policy produced an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyTag {
    Random,
    Medium,
    Expert,
}

impl PolicyTag {
    pub fn code(self) -> char {
        match self {
            PolicyTag::Random => 'R',
            PolicyTag::Medium => 'M',
            PolicyTag::Expert => 'E',
        }
    }

    fn from_code(c: char) -> Option<Self> {
        match c {
            'R' => Some(PolicyTag::Random),
            'M' => Some(PolicyTag::Medium),
            'E' => Some(PolicyTag::Expert),
            _ => None,
        }
    }
}

/// Episode counts per policy type plus the seed that interleaves them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixSpec {
    pub random_episodes: usize,
    pub medium_episodes: usize,
    pub expert_episodes: usize,
    pub shuffle_seed: u64,
}

impl MixSpec {
    pub fn new(random: usize, medium: usize, expert: usize, shuffle_seed: u64) -> Result<Self> {
        if random + medium + expert == 0 {
            return Err(Error::param("mix needs at least one positive count"));
        }
        Ok(MixSpec {
            random_episodes: random,
            medium_episodes: medium,
            expert_episodes: expert,
            shuffle_seed,
        })
    }

    /// Splits `total` episodes by the given weights (largest remainder,
    /// earlier kinds win ties).
    pub fn from_weights(weights: [u64; 3], total: usize, shuffle_seed: u64) -> Result<Self> {
        let sum: u64 = weights.iter().sum();
        if sum == 0 {
            return Err(Error::param("mix weights are all zero"));
        }
        if total == 0 {
            return Err(Error::param("episode count must be >= 1"));
        }
        let exact: Vec<u128> = weights.iter().map(|&w| w as u128 * total as u128).collect();
        let mut counts: Vec<usize> = exact.iter().map(|&x| (x / sum as u128) as usize).collect();
        let mut remaining = total - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(exact[i] % sum as u128));
        for &i in order.iter().cycle() {
            if remaining == 0 {
                break;
            }
            counts[i] += 1;
            remaining -= 1;
        }
        Self::new(counts[0], counts[1], counts[2], shuffle_seed)
    }

    pub fn total(&self) -> usize {
        self.random_episodes + self.medium_episodes + self.expert_episodes
    }
}

/// Data-collection settings shared by the Medium and Expert policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorSettings {
    pub epsilon: f64,
    pub medium_fraction: f64,
    /// Discount used to solve for the Expert and to train the Medium learner.
    pub gamma: f64,
}

impl Default for BehaviorSettings {
    fn default() -> Self {
        BehaviorSettings {
            epsilon: 0.1,
            medium_fraction: 0.3,
            gamma: 0.99,
        }
    }
}

const SOURCES_KEY: &str = "sources=";

/// Rolls out the requested number of episodes per policy type and
/// interleaves them with `mix.shuffle_seed`.
///
/// The provenance records the mix, seeds, settings, and a `sources=` string
/// with one policy code (R/M/E) per episode in dataset order.
pub fn generate_dataset(
    m: &DiscreteMdp,
    mix: &MixSpec,
    settings: &BehaviorSettings,
    seed: u64,
) -> Result<Dataset> {
    if mix.total() == 0 {
        return Err(Error::param("mix needs at least one positive count"));
    }
    let groups = [
        (PolicyTag::Random, PolicyKind::Random, mix.random_episodes),
        (
            PolicyTag::Medium,
            PolicyKind::Medium {
                training_fraction: settings.medium_fraction,
            },
            mix.medium_episodes,
        ),
        (PolicyTag::Expert, PolicyKind::Expert, mix.expert_episodes),
    ];

    let mut episodes: Vec<(PolicyTag, Vec<Transition>)> = Vec::with_capacity(mix.total());
    for (stream, (tag, kind, count)) in groups.into_iter().enumerate() {
        if count == 0 {
            continue;
        }
        let behavior = BehaviorPolicyKind {
            kind,
            epsilon: settings.epsilon,
        };
        let policy = make_behavior_policy(
            m,
            &behavior,
            settings.gamma,
            rng::derive_seed(seed, 100 + stream as u64),
        )?;
        let mut rng = rng::stream(seed, stream as u64);
        for _ in 0..count {
            let steps = m.simulate(&mut rng, |s, r| policy.sample(s, r));
            episodes.push((tag, steps));
        }
    }

    let mut shuffler = ChaCha8Rng::seed_from_u64(mix.shuffle_seed);
    episodes.shuffle(&mut shuffler);

    let sources: String = episodes.iter().map(|(tag, _)| tag.code()).collect();
    let provenance = format!(
        "generator env={} mix={},{},{} seed={} shuffle_seed={} epsilon={} medium_fraction={} \
         behavior_gamma={}; {SOURCES_KEY}{sources}",
        m.env_id(),
        mix.random_episodes,
        mix.medium_episodes,
        mix.expert_episodes,
        seed,
        mix.shuffle_seed,
        settings.epsilon,
        settings.medium_fraction,
        settings.gamma,
    );
    let episodes = episodes
        .into_iter()
        .enumerate()
        .map(|(i, (_, steps))| Episode::new(i, steps))
        .collect();
    Ok(Dataset::new(m.env_spec(), episodes, provenance))
}

/// Reads the per-episode policy tags written by [`generate_dataset`].
pub fn episode_sources(d: &Dataset) -> Option<Vec<PolicyTag>> {
    let entry = d
        .provenance
        .split("; ")
        .find_map(|e| e.strip_prefix(SOURCES_KEY))?;
    entry.chars().map(PolicyTag::from_code).collect()
}
