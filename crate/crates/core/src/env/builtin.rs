use std::collections::BTreeMap;

use super::DiscreteMdp;
use crate::error::{Error, Result};

pub const ENV_HELP: &str = "\
Environments (parameters as key=value):
  gridworld  n=2..20 (5)  slip=[0,1) (0)  horizon>=1 (4n)
             n x n grid, start top-left, goal bottom-right (+1, terminal).
             Actions: 0 up, 1 right, 2 down, 3 left. With probability `slip`
             the move goes in a uniformly random direction instead.
  cliff      width=3..20 (6)  height=2..20 (3)  slip=[0,1) (0.1)  horizon>=1 (4*width)
             Start bottom-left, goal bottom-right (+1, terminal); the bottom
             cells between them are cliff (-1, terminal).
  chain      n=2..100 (5)  slip=[0,1) (0)  left_reward (0.1)  right_reward (1)  horizon>=1 (2n)
             Action 0 returns to state 0 and pays left_reward; action 1 steps
             right; entering the last state pays right_reward and terminates.
             With probability `slip` the other action is executed.";

/// Environment parameters given as `key=value` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnvParams {
    values: BTreeMap<String, String>,
}

impl EnvParams {
    pub fn parse<S: AsRef<str>>(pairs: &[S]) -> Result<Self> {
        let mut values = BTreeMap::new();
        for pair in pairs {
            let pair = pair.as_ref();
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::param(format!("expected key=value, got `{pair}`")))?;
            if values.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::param(format!("parameter `{k}` given twice")));
            }
        }
        Ok(EnvParams { values })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    fn usize_in(&self, key: &str, default: usize, lo: usize, hi: usize) -> Result<usize> {
        let v = match self.values.get(key) {
            None => return Ok(default),
            Some(raw) => raw
                .parse::<usize>()
                .map_err(|_| Error::param(format!("{key}={raw} is not an integer")))?,
        };
        if v < lo || v > hi {
            return Err(Error::param(format!("{key}={v} outside {lo}..={hi}")));
        }
        Ok(v)
    }

    fn f64_with(&self, key: &str, default: f64, ok: impl Fn(f64) -> bool, range: &str) -> Result<f64> {
        let v = match self.values.get(key) {
            None => return Ok(default),
            Some(raw) => raw
                .parse::<f64>()
                .map_err(|_| Error::param(format!("{key}={raw} is not a number")))?,
        };
        if !v.is_finite() || !ok(v) {
            return Err(Error::param(format!("{key}={v} outside {range}")));
        }
        Ok(v)
    }

    fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(Error::param(format!("unknown parameter `{k}`"))),
            None => Ok(()),
        }
    }
}

fn slip(p: &EnvParams, default: f64) -> Result<f64> {
    p.f64_with("slip", default, |v| (0.0..1.0).contains(&v), "[0, 1)")
}

/// Splits a canonical env id (`name:key=value,...`) back into name and params.
pub fn parse_env_id(id: &str) -> Result<(String, EnvParams)> {
    let (name, rest) = id.split_once(':').unwrap_or((id, ""));
    let pairs: Vec<&str> = rest.split(',').filter(|s| !s.is_empty()).collect();
    Ok((name.to_string(), EnvParams::parse(&pairs)?))
}

/// Builds a built-in environment. See [`ENV_HELP`] for names and ranges.
pub fn make_env(name: &str, params: &EnvParams) -> Result<DiscreteMdp> {
    match name {
        "gridworld" => {
            params.reject_unknown(&["n", "slip", "horizon"])?;
            let n = params.usize_in("n", 5, 2, 20)?;
            let slip = slip(params, 0.0)?;
            let horizon = params.usize_in("horizon", 4 * n, 1, 100_000)?;
            let id = format!("gridworld:horizon={horizon},n={n},slip={slip}");
            let goal = n * n - 1;
            build_grid(id, n, n, slip, horizon, 0, |cell| {
                (cell == goal).then_some((1.0, true))
            })
        }
        "cliff" => {
            params.reject_unknown(&["width", "height", "slip", "horizon"])?;
            let width = params.usize_in("width", 6, 3, 20)?;
            let height = params.usize_in("height", 3, 2, 20)?;
            let slip = slip(params, 0.1)?;
            let horizon = params.usize_in("horizon", 4 * width, 1, 100_000)?;
            let id = format!("cliff:height={height},horizon={horizon},slip={slip},width={width}");
            let bottom = (height - 1) * width;
            let start = bottom;
            let goal = bottom + width - 1;
            build_grid(id, width, height, slip, horizon, start, |cell| {
                if cell == goal {
                    Some((1.0, true))
                } else if cell > bottom && cell < goal {
                    Some((-1.0, true))
                } else {
                    None
                }
            })
        }
        "chain" => {
            params.reject_unknown(&["n", "slip", "left_reward", "right_reward", "horizon"])?;
            let n = params.usize_in("n", 5, 2, 100)?;
            let slip = slip(params, 0.0)?;
            let left = params.f64_with("left_reward", 0.1, |_| true, "finite reals")?;
            let right = params.f64_with("right_reward", 1.0, |_| true, "finite reals")?;
            let horizon = params.usize_in("horizon", 2 * n, 1, 100_000)?;
            let id = format!(
                "chain:horizon={horizon},left_reward={left},n={n},right_reward={right},slip={slip}"
            );
            build_chain(id, n, slip, left, right, horizon)
        }
        other => Err(Error::param(format!(
            "unknown environment `{other}` (gridworld|cliff|chain)"
        ))),
    }
}

/// Grid with four moves; `special(cell)` gives the entry reward and whether
/// the cell is terminal.
fn build_grid(
    id: String,
    width: usize,
    height: usize,
    slip: f64,
    horizon: usize,
    start: usize,
    special: impl Fn(usize) -> Option<(f64, bool)>,
) -> Result<DiscreteMdp> {
    let ns = width * height;
    let na = 4;
    let mut kernel = vec![0.0; ns * na * ns];
    let mut rewards = vec![0.0; ns * na * ns];
    let terminal: Vec<bool> = (0..ns).map(|c| special(c).is_some_and(|(_, t)| t)).collect();

    let step = |cell: usize, dir: usize| -> usize {
        let (r, c) = (cell / width, cell % width);
        match dir {
            0 if r > 0 => cell - width,
            1 if c + 1 < width => cell + 1,
            2 if r + 1 < height => cell + width,
            3 if c > 0 => cell - 1,
            _ => cell,
        }
    };

    for s in 0..ns {
        for a in 0..na {
            let base = (s * na + a) * ns;
            if terminal[s] {
                kernel[base + s] = 1.0;
                continue;
            }
            kernel[base + step(s, a)] += 1.0 - slip;
            for dir in 0..4 {
                kernel[base + step(s, dir)] += slip / 4.0;
            }
            for next in 0..ns {
                if let Some((r, _)) = special(next) {
                    rewards[base + next] = r;
                }
            }
        }
    }
    let mut initial = vec![0.0; ns];
    initial[start] = 1.0;
    DiscreteMdp::new(id, ns, na, kernel, rewards, initial, terminal, horizon)
}

fn build_chain(
    id: String,
    n: usize,
    slip: f64,
    left: f64,
    right: f64,
    horizon: usize,
) -> Result<DiscreteMdp> {
    let na = 2;
    let mut kernel = vec![0.0; n * na * n];
    let mut rewards = vec![0.0; n * na * n];
    let mut terminal = vec![false; n];
    terminal[n - 1] = true;
    for s in 0..n {
        for a in 0..na {
            let base = (s * na + a) * n;
            if terminal[s] {
                kernel[base + s] = 1.0;
                continue;
            }
            let target = |action: usize| if action == 0 { 0 } else { s + 1 };
            kernel[base + target(a)] += 1.0 - slip;
            kernel[base + target(1 - a)] += slip;
            rewards[base] = left;
            rewards[base + n - 1] = right;
        }
    }
    let mut initial = vec![0.0; n];
    initial[0] = 1.0;
    DiscreteMdp::new(id, n, na, kernel, rewards, initial, terminal, horizon)
}
