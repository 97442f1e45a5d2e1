//! ORLD v1: line-delimited JSON. One header line carrying the env spec and
//! provenance, then one line per transition keyed by episode (`ep`) and
//! in-episode step (`t`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

use super::{validate_dataset, Dataset, EnvSpec, Episode, Payload, SpaceKind, Transition};

pub const ORLD_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    orld: u32,
    env_id: String,
    state_kind: SpaceKind,
    action_kind: SpaceKind,
    horizon: usize,
    provenance: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    ep: usize,
    t: usize,
    s: Payload,
    a: Payload,
    r: f64,
    s2: Payload,
    term: bool,
    tout: bool,
}

/// Serializes without validating; callers that publish files go through
/// [`to_orld_string`].
pub(crate) fn render(d: &Dataset) -> String {
    let header = Header {
        orld: ORLD_VERSION,
        env_id: d.env_spec.env_id.clone(),
        state_kind: d.env_spec.state_kind,
        action_kind: d.env_spec.action_kind,
        horizon: d.env_spec.horizon,
        provenance: d.provenance.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for ep in &d.episodes {
        for (t, tr) in ep.transitions.iter().enumerate() {
            let rec = Record {
                ep: ep.index,
                t,
                s: tr.state.clone(),
                a: tr.action.clone(),
                r: tr.reward,
                s2: tr.next_state.clone(),
                term: tr.terminal,
                tout: tr.timeout,
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
    }
    out
}

/// Validates `d` and renders it as ORLD v1 text.
pub fn to_orld_string(d: &Dataset) -> Result<String> {
    validate_dataset(d).into_result()?;
    Ok(render(d))
}

pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let text = to_orld_string(d)?;
    fsutil::write_atomic(path.as_ref(), text.as_bytes())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = fsutil::read_to_string(path.as_ref())?;
    from_orld_str(&text)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses ORLD v1 text and checks every dataset invariant.
pub fn from_orld_str(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let header: Header =
        serde_json::from_str(first).map_err(|e| parse_err(1, format!("header: {e}")))?;
    if header.orld != ORLD_VERSION {
        return Err(parse_err(
            1,
            format!("unsupported ORLD version {}", header.orld),
        ));
    }
    let env_spec = EnvSpec {
        env_id: header.env_id,
        state_kind: header.state_kind,
        action_kind: header.action_kind,
        horizon: header.horizon,
    };

    let mut episodes: Vec<Episode> = Vec::new();
    let mut lines = lines.peekable();
    while let Some((line_no, line)) = lines.next() {
        if line.is_empty() {
            if lines.peek().is_none() {
                break;
            }
            return Err(parse_err(line_no, "blank line inside record stream"));
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| parse_err(line_no, e.to_string()))?;
        let next_ep = episodes.len();
        let continuing = episodes.last().is_some_and(|e| e.index == rec.ep);
        if continuing {
            let ep = episodes.last_mut().expect("non-empty");
            if rec.t != ep.transitions.len() {
                return Err(parse_err(
                    line_no,
                    format!(
                        "episode {} step {} follows step {}",
                        rec.ep,
                        rec.t,
                        ep.transitions.len() - 1
                    ),
                ));
            }
        } else {
            if rec.ep != next_ep {
                return Err(parse_err(
                    line_no,
                    format!("episode index {} where {next_ep} was expected", rec.ep),
                ));
            }
            if rec.t != 0 {
                return Err(parse_err(
                    line_no,
                    format!("episode {} starts at step {}", rec.ep, rec.t),
                ));
            }
            episodes.push(Episode::new(rec.ep, Vec::new()));
        }
        episodes
            .last_mut()
            .expect("episode pushed")
            .transitions
            .push(Transition {
                state: rec.s,
                action: rec.a,
                reward: rec.r,
                next_state: rec.s2,
                terminal: rec.term,
                timeout: rec.tout,
            });
    }

    let d = Dataset::new(env_spec, episodes, header.provenance);
    validate_dataset(&d).into_result()?;
    Ok(d)
}
