use crate::error::{Error, Locator};

use super::Dataset;

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// First offending record, when the check is record-level.
    pub first_offender: Option<Locator>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub(crate) fn into_result(self) -> crate::Result<()> {
        match self.first_failure() {
            None => Ok(()),
            Some(c) => Err(Error::Invariant {
                check: c.name,
                at: c
                    .first_offender
                    .map(|l| l.to_string())
                    .unwrap_or_else(|| "dataset".into()),
                detail: c.detail.clone().unwrap_or_default(),
            }),
        }
    }
}

pub const CHECK_ENV_SPEC: &str = "env-spec";
pub const CHECK_EPISODE_INDEX: &str = "episode-index";
pub const CHECK_NON_EMPTY: &str = "non-empty episode";
pub const CHECK_ARITY: &str = "arity";
pub const CHECK_FINITE: &str = "finite values";
pub const CHECK_FLAG_EXCLUSIVE: &str = "flag exclusivity";
pub const CHECK_FLAG_POSITION: &str = "flag position";
pub const CHECK_CHAIN: &str = "state chain";

struct Probe {
    name: &'static str,
    failure: Option<(Option<Locator>, String)>,
}

impl Probe {
    fn new(name: &'static str) -> Self {
        Probe {
            name,
            failure: None,
        }
    }

    fn fail(&mut self, at: Option<Locator>, detail: impl FnOnce() -> String) {
        if self.failure.is_none() {
            self.failure = Some((at, detail()));
        }
    }

    fn finish(self) -> Check {
        match self.failure {
            None => Check {
                name: self.name,
                passed: true,
                first_offender: None,
                detail: None,
            },
            Some((at, detail)) => Check {
                name: self.name,
                passed: false,
                first_offender: at,
                detail: Some(detail),
            },
        }
    }
}

/// Runs every dataset invariant and reports pass/fail with the first offender.
pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let mut env = Probe::new(CHECK_ENV_SPEC);
    let mut index = Probe::new(CHECK_EPISODE_INDEX);
    let mut non_empty = Probe::new(CHECK_NON_EMPTY);
    let mut arity = Probe::new(CHECK_ARITY);
    let mut finite = Probe::new(CHECK_FINITE);
    let mut exclusive = Probe::new(CHECK_FLAG_EXCLUSIVE);
    let mut position = Probe::new(CHECK_FLAG_POSITION);
    let mut chain = Probe::new(CHECK_CHAIN);

    if let Err(e) = d.env_spec.check() {
        env.fail(None, || e);
    }

    for (i, ep) in d.episodes.iter().enumerate() {
        if ep.index != i {
            index.fail(Some(Locator { episode: i, step: 0 }), || {
                format!("episode at position {i} carries index {}", ep.index)
            });
        }
        if ep.transitions.is_empty() {
            non_empty.fail(Some(Locator { episode: i, step: 0 }), || {
                "episode has no transitions".into()
            });
        }
        let last = ep.transitions.len().saturating_sub(1);
        for (j, t) in ep.transitions.iter().enumerate() {
            let at = Some(Locator { episode: i, step: j });
            if let Err(e) = d.env_spec.check_transition(t) {
                arity.fail(at, || e);
            }
            if !t.is_finite() {
                finite.fail(at, || "non-finite reward or vector component".into());
            }
            if t.terminal && t.timeout {
                exclusive.fail(at, || "terminal and timeout both set".into());
            }
            if j != last && t.ends_episode() {
                position.fail(at, || "end flag on a non-final transition".into());
            }
            if let Some(next) = ep.transitions.get(j + 1) {
                if t.next_state != next.state {
                    chain.fail(at, || {
                        format!(
                            "next_state {:?} differs from following state {:?}",
                            t.next_state, next.state
                        )
                    });
                }
            }
        }
    }

    ValidationReport {
        checks: [
            env, index, non_empty, arity, finite, exclusive, position, chain,
        ]
        .into_iter()
        .map(Probe::finish)
        .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{EnvSpec, Episode, SpaceKind, Transition};

    fn good() -> Dataset {
        let spec = EnvSpec::new("t", SpaceKind::Discrete(5), SpaceKind::Discrete(2), 5).unwrap();
        Dataset::new(
            spec,
            vec![
                Episode::new(
                    0,
                    vec![
                        Transition::discrete(0, 1, 0.0, 1),
                        Transition::discrete(1, 1, 1.0, 2).with_terminal(true),
                    ],
                ),
                Episode::new(1, vec![Transition::discrete(3, 0, 0.5, 4).with_timeout(true)]),
            ],
            "",
        )
    }

    #[test]
    fn well_formed_passes_everything() {
        let r = validate_dataset(&good());
        assert!(r.is_ok(), "{r:?}");
        assert_eq!(r.checks.len(), 8);
    }

    #[test]
    fn mid_sequence_terminal_fails_flag_position() {
        let mut d = good();
        d.episodes[0].transitions[0].terminal = true;
        let r = validate_dataset(&d);
        let c = r.check(CHECK_FLAG_POSITION).unwrap();
        assert!(!c.passed);
        assert_eq!(c.first_offender, Some(Locator { episode: 0, step: 0 }));
        assert!(r.check(CHECK_CHAIN).unwrap().passed);
    }

    #[test]
    fn empty_episode_fails_non_empty() {
        let mut d = good();
        d.episodes.push(Episode::new(2, vec![]));
        let r = validate_dataset(&d);
        let c = r.check(CHECK_NON_EMPTY).unwrap();
        assert!(!c.passed);
        assert_eq!(c.first_offender, Some(Locator { episode: 2, step: 0 }));
    }

    #[test]
    fn chain_break_is_located() {
        let mut d = good();
        d.episodes[0].transitions[1].state = crate::dataset::Payload::Id(4);
        let r = validate_dataset(&d);
        let c = r.check(CHECK_CHAIN).unwrap();
        assert_eq!(c.first_offender, Some(Locator { episode: 0, step: 0 }));
    }

    #[test]
    fn validation_does_not_mutate() {
        let d = good();
        let before = d.clone();
        let _ = validate_dataset(&d);
        assert_eq!(d, before);
    }
}
