//! Line-delimited model file: a header with the algorithm, config echo and
//! dataset digest, then one line per state with its Q row, V (if any),
//! chosen action, visitation counts, behavior row and advantage weights.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BehaviorEstimate, LearnedModel, LearnerConfig};
use crate::error::{Error, Result};
use crate::fsutil;

pub const MODEL_VERSION: u32 = 1;

const CONSTRAINT_NOTE: &str = "policy constraint D(pi, pi_beta) <= eps taken in its strictest \
                               tabular form: actions restricted to the dataset support";

#[derive(Serialize, Deserialize)]
struct Header {
    model: u32,
    #[serde(flatten)]
    config: LearnerConfig,
    dataset: String,
    n_states: usize,
    n_actions: usize,
    sweeps: usize,
    converged: bool,
    bc_lambda: Option<f64>,
    port: String,
    constraint: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateLine {
    s: usize,
    q: Vec<f64>,
    v: Option<f64>,
    policy: Option<usize>,
    counts: Vec<u64>,
    behavior: Option<Vec<f64>>,
    awr: Option<Vec<f64>>,
}

pub fn render_model(m: &LearnedModel) -> String {
    let header = Header {
        model: MODEL_VERSION,
        config: m.config,
        dataset: m.dataset_digest.clone(),
        n_states: m.n_states,
        n_actions: m.n_actions,
        sweeps: m.sweeps,
        converged: m.converged,
        bc_lambda: m.bc_lambda,
        port: m.config.algorithm.port_note().to_string(),
        constraint: CONSTRAINT_NOTE.to_string(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for s in 0..m.n_states {
        let line = StateLine {
            s,
            q: m.q_row(s).to_vec(),
            v: m.v.as_ref().map(|v| v[s]),
            policy: m.action(s),
            counts: m.behavior.counts[s * m.n_actions..(s + 1) * m.n_actions].to_vec(),
            behavior: m.behavior.row(s),
            awr: m.awr_weights(s),
        };
        out.push_str(&serde_json::to_string(&line).expect("line serializes"));
        out.push('\n');
    }
    out
}

pub fn save_model(m: &LearnedModel, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), render_model(m).as_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LearnedModel> {
    parse_model(&fsutil::read_to_string(path.as_ref())?)
}

pub fn parse_model(text: &str) -> Result<LearnedModel> {
    let err = |line: usize, message: String| Error::Parse { line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let h: Header = serde_json::from_str(first).map_err(|e| err(1, format!("header: {e}")))?;
    if h.model != MODEL_VERSION {
        return Err(err(1, format!("unsupported model version {}", h.model)));
    }
    h.config.validate()?;
    let (ns, na) = (h.n_states, h.n_actions);
    let mut q = Vec::with_capacity(ns * na);
    let mut v = Vec::with_capacity(ns);
    let mut counts = Vec::with_capacity(ns * na);
    let mut policy = Vec::with_capacity(ns);
    for (line_no, line) in lines.filter(|(_, l)| !l.is_empty()) {
        let l: StateLine = serde_json::from_str(line).map_err(|e| err(line_no, e.to_string()))?;
        if l.s != policy.len() || l.q.len() != na || l.counts.len() != na {
            return Err(err(line_no, format!("malformed row for state {}", l.s)));
        }
        if l.policy.is_some_and(|a| a >= na) {
            return Err(err(line_no, format!("action out of range for state {}", l.s)));
        }
        q.extend(l.q);
        counts.extend(l.counts);
        policy.push(l.policy);
        if let Some(x) = l.v {
            v.push(x);
        }
    }
    if policy.len() != ns {
        return Err(err(1, format!("header declares {ns} states, body has {}", policy.len())));
    }
    let v = match v.len() {
        0 => None,
        n if n == ns => Some(v),
        _ => return Err(err(1, "V present for only some states".into())),
    };
    Ok(LearnedModel {
        config: h.config,
        n_states: ns,
        n_actions: na,
        q,
        v,
        behavior: BehaviorEstimate {
            n_states: ns,
            n_actions: na,
            counts,
        },
        policy,
        sweeps: h.sweeps,
        converged: h.converged,
        bc_lambda: h.bc_lambda,
        dataset_digest: h.dataset,
    })
}
