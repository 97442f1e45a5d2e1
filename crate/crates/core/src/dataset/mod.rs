//! Transition / episode / dataset model.
//!
//! A [`Dataset`] is an ordered list of [`Episode`]s, each an ordered list of
//! [`Transition`]s. Episodes end at an environment terminal or a horizon
//! timeout; the two flags are kept apart because value backups treat them
//! differently (a timeout bootstraps, a terminal does not).

mod orld;
mod validate;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use orld::{from_orld_str, load_dataset, save_dataset, to_orld_string};
pub use validate::{validate_dataset, Check, ValidationReport};

/// Provenance marker appended when a log ends without a terminal/timeout flag.
pub const TRUNCATED_TAIL: &str = "truncated-tail";

/// State or action payload: a discrete id or a fixed-length real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Id(u64),
    Vector(Vec<f64>),
}

impl Payload {
    pub fn as_id(&self) -> Option<u64> {
        match self {
            Payload::Id(id) => Some(*id),
            Payload::Vector(_) => None,
        }
    }

    /// Checks that this payload fits a space, returning a description of the
    /// mismatch otherwise.
    pub(crate) fn check_kind(&self, kind: SpaceKind) -> std::result::Result<(), String> {
        match (self, kind) {
            (Payload::Id(id), SpaceKind::Discrete(n)) => {
                if (*id as u128) < n as u128 {
                    Ok(())
                } else {
                    Err(format!("id {id} outside discrete({n})"))
                }
            }
            (Payload::Vector(v), SpaceKind::Continuous(d)) => {
                if v.len() == d {
                    Ok(())
                } else {
                    Err(format!("vector of length {} for continuous({d})", v.len()))
                }
            }
            (Payload::Id(_), SpaceKind::Continuous(d)) => {
                Err(format!("discrete id for continuous({d})"))
            }
            (Payload::Vector(v), SpaceKind::Discrete(n)) => {
                Err(format!("vector of length {} for discrete({n})", v.len()))
            }
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Payload::Id(_) => true,
            Payload::Vector(v) => v.iter().all(|x| x.is_finite()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Discrete(usize),
    Continuous(usize),
}

impl SpaceKind {
    pub fn size(self) -> usize {
        match self {
            SpaceKind::Discrete(n) | SpaceKind::Continuous(n) => n,
        }
    }

    pub fn is_discrete(self) -> bool {
        matches!(self, SpaceKind::Discrete(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvSpec {
    pub env_id: String,
    pub state_kind: SpaceKind,
    pub action_kind: SpaceKind,
    /// Episode horizon T.
    pub horizon: usize,
}

impl EnvSpec {
    pub fn new(
        env_id: impl Into<String>,
        state_kind: SpaceKind,
        action_kind: SpaceKind,
        horizon: usize,
    ) -> Result<Self> {
        let spec = EnvSpec {
            env_id: env_id.into(),
            state_kind,
            action_kind,
            horizon,
        };
        spec.check().map_err(Error::InvalidParam)?;
        Ok(spec)
    }

    pub(crate) fn check(&self) -> std::result::Result<(), String> {
        if self.horizon == 0 {
            return Err("horizon must be >= 1".into());
        }
        if self.state_kind.size() == 0 || self.action_kind.size() == 0 {
            return Err("state/action cardinality or dimension must be >= 1".into());
        }
        Ok(())
    }

    pub(crate) fn check_transition(&self, t: &Transition) -> std::result::Result<(), String> {
        t.state
            .check_kind(self.state_kind)
            .map_err(|e| format!("state: {e}"))?;
        t.action
            .check_kind(self.action_kind)
            .map_err(|e| format!("action: {e}"))?;
        t.next_state
            .check_kind(self.state_kind)
            .map_err(|e| format!("next_state: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Payload,
    pub action: Payload,
    pub reward: f64,
    pub next_state: Payload,
    /// The environment entered a terminal state.
    pub terminal: bool,
    /// The horizon cut the episode off.
    pub timeout: bool,
}

impl Transition {
    /// Discrete transition without end flags.
    pub fn discrete(state: u64, action: u64, reward: f64, next_state: u64) -> Self {
        Transition {
            state: Payload::Id(state),
            action: Payload::Id(action),
            reward,
            next_state: Payload::Id(next_state),
            terminal: false,
            timeout: false,
        }
    }

    pub fn with_terminal(mut self, terminal: bool) -> Self {
        self.terminal = terminal;
        self
    }

    pub fn with_timeout(mut self, timeout: bool) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn ends_episode(&self) -> bool {
        self.terminal || self.timeout
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.reward.is_finite()
            && self.state.is_finite()
            && self.action.is_finite()
            && self.next_state.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    /// Position within the parent dataset.
    pub index: usize,
}

impl Episode {
    pub fn new(index: usize, transitions: Vec<Transition>) -> Self {
        Episode { transitions, index }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.transitions.iter().map(|t| t.reward)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub episodes: Vec<Episode>,
    pub env_spec: EnvSpec,
    /// Free-text metadata: generator mix, seed, parent dataset, filter settings.
    pub provenance: String,
}

impl Dataset {
    pub fn new(env_spec: EnvSpec, episodes: Vec<Episode>, provenance: impl Into<String>) -> Self {
        Dataset {
            episodes,
            env_spec,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn transition_count(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> + '_ {
        self.episodes.iter().flat_map(|e| e.transitions.iter())
    }

    /// Short content hash of the ORLD serialization, used as a dataset id.
    pub fn digest(&self) -> String {
        let text = orld::render(self);
        let hash = Sha256::digest(text.as_bytes());
        hex::encode(&hash[..8])
    }

    /// Appends one `; `-separated entry to the provenance text.
    pub fn push_provenance(&mut self, entry: &str) {
        if !self.provenance.is_empty() {
            self.provenance.push_str("; ");
        }
        self.provenance.push_str(entry);
    }

    pub fn has_truncated_tail(&self) -> bool {
        self.provenance
            .split("; ")
            .any(|entry| entry == TRUNCATED_TAIL)
    }
}

/// Splits a flat transition log into episodes.
///
/// An episode ends right after every transition flagged terminal or timeout.
/// A trailing run without a final flag is kept as its own episode and the
/// dataset provenance is marked [`TRUNCATED_TAIL`].
pub fn segment_episodes(log: &[Transition], env_spec: EnvSpec) -> Result<Dataset> {
    env_spec.check().map_err(Error::InvalidParam)?;

    let mut episodes = Vec::new();
    let mut current = Vec::new();
    for (index, t) in log.iter().enumerate() {
        env_spec
            .check_transition(t)
            .map_err(|detail| Error::Record { index, detail })?;
        if t.terminal && t.timeout {
            return Err(Error::Record {
                index,
                detail: "terminal and timeout both set".into(),
            });
        }
        current.push(t.clone());
        if t.ends_episode() {
            episodes.push(Episode::new(episodes.len(), std::mem::take(&mut current)));
        }
    }

    let mut dataset = Dataset::new(env_spec, episodes, "source=segmented-log");
    if !current.is_empty() {
        let index = dataset.episodes.len();
        dataset.episodes.push(Episode::new(index, current));
        dataset.push_provenance(TRUNCATED_TAIL);
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> EnvSpec {
        EnvSpec::new("test", SpaceKind::Discrete(4), SpaceKind::Discrete(2), 10).unwrap()
    }

    #[test]
    fn single_terminal_transition_is_one_episode() {
        let log = vec![Transition::discrete(0, 1, 1.0, 3).with_terminal(true)];
        let d = segment_episodes(&log, spec()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.episodes[0].len(), 1);
        assert!(!d.has_truncated_tail());
    }

    #[test]
    fn empty_log_gives_empty_dataset() {
        let d = segment_episodes(&[], spec()).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn trailing_partial_episode_is_kept_and_marked() {
        let log = vec![
            Transition::discrete(0, 0, 0.0, 1).with_timeout(true),
            Transition::discrete(2, 1, 0.5, 3),
        ];
        let d = segment_episodes(&log, spec()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.episodes[1].index, 1);
        assert!(d.has_truncated_tail());
    }

    #[test]
    fn arity_mismatch_names_record() {
        let log = vec![
            Transition::discrete(0, 0, 0.0, 1),
            Transition::discrete(1, 7, 0.0, 2),
        ];
        match segment_episodes(&log, spec()) {
            Err(Error::Record { index: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }

        let mut vector = Transition::discrete(0, 0, 0.0, 1);
        vector.state = Payload::Vector(vec![0.0, 1.0]);
        match segment_episodes(&[Transition::discrete(0, 0, 0.0, 1), vector], spec()) {
            Err(Error::Record { index: 1, detail }) => assert!(detail.contains("state")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn both_flags_rejected() {
        let log = vec![Transition::discrete(0, 0, 0.0, 1)
            .with_terminal(true)
            .with_timeout(true)];
        assert!(matches!(
            segment_episodes(&log, spec()),
            Err(Error::Record { index: 0, .. })
        ));
    }

    #[test]
    fn env_spec_rejects_zero_horizon() {
        assert!(EnvSpec::new("x", SpaceKind::Discrete(1), SpaceKind::Discrete(1), 0).is_err());
        assert!(EnvSpec::new("x", SpaceKind::Continuous(0), SpaceKind::Discrete(1), 1).is_err());
    }
}
