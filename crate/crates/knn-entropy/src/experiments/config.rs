//! Line-oriented `key = value` experiment configuration files.
//!
//! `#` starts a comment (full line or trailing), lists are comma-separated.
//! Example:
//!
//! ```text
//! experiment = variance_sweep
//! family = gaussian
//! dim = 1
//! sigma = 1.0
//! n_grid = 250, 500, 1000, 2000, 4000
//! k = 1
//! trials = 200
//! seed = 42
//! out = variance.csv
//! ```
//!
//! `k_rule = optimal` together with `beta = ...` switches to the MSE-optimal
//! neighbor-count scaling.

use super::{ExperimentConfig, ExperimentKind, KRule};
use crate::distributions::Distribution;
use crate::{Error, Result};

/// Parse a config file's text. Returns the config and the `out` path, if any.
pub fn parse_config(text: &str) -> Result<(ExperimentConfig, Option<String>)> {
    let mut experiment: Option<ExperimentKind> = None;
    let mut family: Option<String> = None;
    let mut dim: usize = 1;
    let mut sigma: f64 = 1.0;
    let mut n_grid: Option<Vec<usize>> = None;
    let mut k: usize = 1;
    let mut k_rule_optimal = false;
    let mut beta: Option<f64> = None;
    let mut trials: Option<usize> = None;
    let mut seed: u64 = 0;
    let mut r_points: usize = 20;
    let mut alphas: Option<Vec<f64>> = None;
    let mut query: Option<Vec<f64>> = None;
    let mut k_list: Option<Vec<usize>> = None;
    let mut out: Option<String> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("expected `key = value`, got {line:?}"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |msg: String| Error::Parse { line: lineno, msg };

        match key {
            "experiment" => experiment = Some(value.parse()?),
            "family" => family = Some(value.to_string()),
            "dim" => {
                dim = value
                    .parse()
                    .map_err(|_| bad(format!("bad dim {value:?}")))?
            }
            "sigma" => {
                sigma = value
                    .parse()
                    .map_err(|_| bad(format!("bad sigma {value:?}")))?
            }
            "n_grid" => n_grid = Some(parse_list(value, lineno)?),
            "k" => k = value.parse().map_err(|_| bad(format!("bad k {value:?}")))?,
            "k_rule" => match value {
                "fixed" => k_rule_optimal = false,
                "optimal" => k_rule_optimal = true,
                other => return Err(bad(format!("k_rule must be fixed|optimal, got {other:?}"))),
            },
            "beta" => {
                beta = Some(
                    value
                        .parse()
                        .map_err(|_| bad(format!("bad beta {value:?}")))?,
                )
            }
            "trials" => {
                trials = Some(
                    value
                        .parse()
                        .map_err(|_| bad(format!("bad trials {value:?}")))?,
                )
            }
            "seed" => {
                seed = value
                    .parse()
                    .map_err(|_| bad(format!("bad seed {value:?}")))?
            }
            "r_points" => {
                r_points = value
                    .parse()
                    .map_err(|_| bad(format!("bad r_points {value:?}")))?
            }
            "alphas" => alphas = Some(parse_list(value, lineno)?),
            "x" => query = Some(parse_list(value, lineno)?),
            "k_list" => k_list = Some(parse_list(value, lineno)?),
            "out" => out = Some(value.to_string()),
            other => {
                return Err(bad(format!("unknown key {other:?}")));
            }
        }
    }

    let experiment =
        experiment.ok_or_else(|| Error::Config("missing `experiment = ...`".into()))?;
    let family = family.ok_or_else(|| Error::Config("missing `family = ...`".into()))?;
    let dist = distribution_from_name(&family, dim, sigma)?;

    let mut cfg = ExperimentConfig::new(experiment, dist);
    if let Some(g) = n_grid {
        cfg.n_grid = g;
    }
    cfg.k_rule = if k_rule_optimal {
        let beta =
            beta.ok_or_else(|| Error::Config("k_rule = optimal requires `beta = ...`".into()))?;
        KRule::Optimal { beta }
    } else {
        KRule::Fixed(k)
    };
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.base_seed = seed;
    cfg.r_points = r_points;
    if let Some(a) = alphas {
        cfg.alphas = a;
    }
    cfg.query = query;
    if let Some(kl) = k_list {
        cfg.k_list = kl;
    } else if let KRule::Fixed(k) = cfg.k_rule {
        cfg.k_list = vec![k];
    }
    cfg.validate()?;
    Ok((cfg, out))
}

/// Resolve a family name (+ dimension, sigma) into a distribution.
pub fn distribution_from_name(name: &str, dim: usize, sigma: f64) -> Result<Distribution> {
    match name {
        "uniform_cube" => Distribution::uniform_cube(dim),
        "uniform_torus" => Distribution::uniform_torus(dim),
        "gaussian" => Distribution::gaussian(dim, sigma),
        "sine_bump" => Distribution::sine_bump(dim),
        other => Err(Error::Config(format!(
            "unknown family {other:?} (expected uniform_cube, uniform_torus, gaussian, sine_bump)"
        ))),
    }
}

fn parse_list<T: std::str::FromStr>(value: &str, lineno: usize) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|f| {
            f.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad list entry {f:?}"),
            })
        })
        .collect()
}
