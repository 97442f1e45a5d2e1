//! Line-delimited filter report: one header line with the criterion and
//! dataset mean, then one line per episode with both scores and the verdict
//! (`S` superior, `I` inferior).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CriterionKind, DiscountMode, EpisodeScore, FilterReport, ScoreCriterion};
use crate::error::{Error, Result};
use crate::fsutil;

pub const REPORT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    report: u32,
    criterion: CriterionKind,
    mode: DiscountMode,
    gamma: f64,
    dataset_mean: f64,
    episodes: usize,
    superior: usize,
    retained_transitions: usize,
    original_transitions: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    ep: usize,
    r_avg: f64,
    r_disc: f64,
    verdict: Verdict,
}

#[derive(Serialize, Deserialize, PartialEq, Eq, Clone, Copy)]
enum Verdict {
    S,
    I,
}

pub fn render_report(r: &FilterReport) -> String {
    let header = Header {
        report: REPORT_VERSION,
        criterion: r.criterion.kind,
        mode: r.criterion.mode,
        gamma: r.criterion.gamma,
        dataset_mean: r.dataset_mean,
        episodes: r.per_episode.len(),
        superior: r.superior_indices.len(),
        retained_transitions: r.retained_transition_count,
        original_transitions: r.original_transition_count,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    let mut superior = r.superior_indices.iter().peekable();
    for s in &r.per_episode {
        let verdict = if superior.next_if_eq(&&s.episode_index).is_some() {
            Verdict::S
        } else {
            Verdict::I
        };
        let line = Line {
            ep: s.episode_index,
            r_avg: s.r_avg,
            r_disc: s.r_disc,
            verdict,
        };
        out.push_str(&serde_json::to_string(&line).expect("line serializes"));
        out.push('\n');
    }
    out
}

pub fn save_report(r: &FilterReport, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), render_report(r).as_bytes())
}

pub fn load_report(path: impl AsRef<Path>) -> Result<FilterReport> {
    parse_report(&fsutil::read_to_string(path.as_ref())?)
}

pub fn parse_report(text: &str) -> Result<FilterReport> {
    let err = |line: usize, message: String| Error::Parse { line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let h: Header = serde_json::from_str(first).map_err(|e| err(1, format!("header: {e}")))?;
    if h.report != REPORT_VERSION {
        return Err(err(1, format!("unsupported report version {}", h.report)));
    }
    let criterion = ScoreCriterion::new(h.criterion, h.gamma, h.mode)?;

    let mut per_episode = Vec::with_capacity(h.episodes);
    let mut superior_indices = Vec::new();
    let mut inferior_indices = Vec::new();
    for (line_no, line) in lines.filter(|(_, l)| !l.is_empty()) {
        let l: Line = serde_json::from_str(line).map_err(|e| err(line_no, e.to_string()))?;
        match l.verdict {
            Verdict::S => superior_indices.push(l.ep),
            Verdict::I => inferior_indices.push(l.ep),
        }
        per_episode.push(EpisodeScore {
            episode_index: l.ep,
            r_avg: l.r_avg,
            r_disc: l.r_disc,
        });
    }
    if per_episode.len() != h.episodes || superior_indices.len() != h.superior {
        return Err(err(
            1,
            format!(
                "header declares {} episodes / {} superior, body has {} / {}",
                h.episodes,
                h.superior,
                per_episode.len(),
                superior_indices.len()
            ),
        ));
    }
    Ok(FilterReport {
        per_episode,
        dataset_mean: h.dataset_mean,
        criterion,
        superior_indices,
        inferior_indices,
        retained_transition_count: h.retained_transitions,
        original_transition_count: h.original_transitions,
    })
}
