//! Monte Carlo harness: measures empirical bias / variance / MSE, tail
//! probabilities, and moments of k-NN distances, fits log-log convergence
//! rates, and lines the measurements up against the theoretical curves from
//! [`crate::bounds`].
//!
//! Reproducibility contract: trial `t` of grid row `g` draws its data from
//! the seed `substream_seed(substream_seed(base_seed, g), t)`, every trial is
//! independent of execution order, and aggregation runs in trial-index order
//! after all trials complete. CSV output is therefore byte-identical for any
//! worker count.
//!
//! All tables are CSV: UTF-8, LF line endings, `.` decimal separator, reals
//! at 17 significant digits, with a leading `#schema:` comment naming the
//! columns.

mod config;

pub use config::parse_config;

use crate::bounds;
use crate::distributions::{substream_seed, Distribution, Family};
use crate::estimators::{kl_entropy_with_index, Mode};
use crate::knn::{format_real, KnnIndex};
use crate::special::digamma;
use crate::{Error, Result};
use rayon::prelude::*;

/// Which measurement a config runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    BiasSweep,
    VarianceSweep,
    MseSweep,
    Concentration,
    Moments,
    DigammaIdentity,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BiasSweep => "bias_sweep",
            Self::VarianceSweep => "variance_sweep",
            Self::MseSweep => "mse_sweep",
            Self::Concentration => "concentration",
            Self::Moments => "moments",
            Self::DigammaIdentity => "digamma_identity",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bias_sweep" => Ok(Self::BiasSweep),
            "variance_sweep" => Ok(Self::VarianceSweep),
            "mse_sweep" => Ok(Self::MseSweep),
            "concentration" => Ok(Self::Concentration),
            "moments" => Ok(Self::Moments),
            "identity" | "digamma_identity" => Ok(Self::DigammaIdentity),
            other => Err(Error::Config(format!("unknown experiment {other:?}"))),
        }
    }
}

/// Neighbor-count rule applied at each grid size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KRule {
    Fixed(usize),
    /// `k = max(1, floor(n^{max(0, (2 beta - D)/(2 beta + D))}))`.
    Optimal {
        beta: f64,
    },
}

impl KRule {
    pub fn k_for(&self, n: usize, dim: usize) -> usize {
        match *self {
            KRule::Fixed(k) => k,
            KRule::Optimal { beta } => bounds::optimal_k(n, beta, dim),
        }
    }
}

/// Full description of one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dist: Distribution,
    /// Strictly increasing sample sizes. Single-`n` experiments
    /// (concentration, moments, identity) use the first entry.
    pub n_grid: Vec<usize>,
    pub k_rule: KRule,
    pub trials: usize,
    pub base_seed: u64,
    /// Points per tail grid for the concentration experiment.
    pub r_points: usize,
    /// Moment exponents for the moments experiment.
    pub alphas: Vec<f64>,
    /// Query point for concentration/moments; defaults to the space center
    /// (torus, cube, sine bump) or the origin (gaussian).
    pub query: Option<Vec<f64>>,
    /// Neighbor counts for the identity experiment.
    pub k_list: Vec<usize>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, dist: Distribution) -> Self {
        Self {
            kind,
            dist,
            n_grid: vec![1000],
            k_rule: KRule::Fixed(1),
            trials: 100,
            base_seed: 0,
            r_points: 20,
            alphas: vec![1.0, -0.5],
            query: None,
            k_list: vec![1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::Config("n_grid must not be empty".into()));
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("n_grid must be strictly increasing".into()));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::Config("n_grid entries must be >= 2".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if matches!(
            self.kind,
            ExperimentKind::VarianceSweep | ExperimentKind::MseSweep
        ) && self.trials < 2
        {
            return Err(Error::Config(
                "variance and mse sweeps need trials >= 2".into(),
            ));
        }
        if self.kind == ExperimentKind::Concentration && self.r_points < 2 {
            return Err(Error::Config("r_points must be >= 2".into()));
        }
        if self.kind == ExperimentKind::DigammaIdentity {
            if self.dist.family() != Family::UniformTorus {
                return Err(Error::Config(
                    "the digamma identity experiment requires the uniform_torus family \
                     (it needs P(B(x, r)) = c_D r^D exactly)"
                        .into(),
                ));
            }
            if self.k_list.is_empty() {
                return Err(Error::Config("k_list must not be empty".into()));
            }
        }
        if let Some(q) = &self.query {
            if q.len() != self.dist.dim() {
                return Err(Error::Config(format!(
                    "query point has {} coordinates, space has {}",
                    q.len(),
                    self.dist.dim()
                )));
            }
        }
        Ok(())
    }

    fn query_point(&self) -> Vec<f64> {
        self.query.clone().unwrap_or_else(|| {
            let fill = match self.dist.family() {
                Family::Gaussian { .. } => 0.0,
                _ => 0.5,
            };
            vec![fill; self.dist.dim()]
        })
    }
}

/// Ordinary least squares fit of `ln value` against `ln n`.
#[derive(Debug, Clone)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// The fitted `(ln n, ln value)` pairs.
    pub points: Vec<(f64, f64)>,
}

/// Fit a log-log rate through `(n, value)` points. Needs at least two
/// points with distinct `n` and strictly positive, finite values.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::Domain(format!(
            "rate fit needs >= 2 points, got {}",
            points.len()
        )));
    }
    let mut logs = Vec::with_capacity(points.len());
    for &(n, v) in points {
        if !(n > 0.0 && v > 0.0 && n.is_finite() && v.is_finite()) {
            return Err(Error::Domain(format!(
                "rate fit needs positive finite points, got ({n}, {v})"
            )));
        }
        logs.push((n.ln(), v.ln()));
    }
    let m = logs.len() as f64;
    let mean_x: f64 = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y: f64 = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain(
            "rate fit needs at least two distinct n".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points: logs,
    })
}

/// One aggregated row of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n: usize,
    pub k: usize,
    pub mean: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub se_mean: f64,
    pub bias_bound: Option<f64>,
    pub variance_bound: Option<f64>,
    pub mse_bound: Option<f64>,
}

/// Result of a bias/variance/MSE sweep.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub kind: ExperimentKind,
    pub true_entropy: f64,
    pub rows: Vec<SweepRow>,
    pub fitted_quantity: &'static str,
    /// Log-log rate fit of the sweep's quantity; `None` for single-point
    /// grids, where no rate is defined.
    pub fit: Option<RateFit>,
}

/// Run a bias, variance or MSE sweep over the configured `n` grid.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let fitted_quantity = match cfg.kind {
        ExperimentKind::BiasSweep => "abs_bias",
        ExperimentKind::VarianceSweep => "variance",
        ExperimentKind::MseSweep => "mse",
        other => {
            return Err(Error::Config(format!(
                "run_sweep cannot run a {} experiment",
                other.name()
            )))
        }
    };
    let truth = cfg.dist.true_entropy();
    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for (g, &n) in cfg.n_grid.iter().enumerate() {
        let k = cfg.k_rule.k_for(n, cfg.dist.dim());
        if k + 1 > n {
            return Err(Error::KOutOfRange { k, limit: n - 1 });
        }
        let row_seed = substream_seed(cfg.base_seed, g as u64);
        let estimates: Vec<f64> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| -> Result<f64> {
                let data = cfg.dist.sample(n, substream_seed(row_seed, t as u64))?;
                let index = KnnIndex::build(&data);
                Ok(kl_entropy_with_index(&index, k, Mode::Strict)?.value)
            })
            .collect::<Result<Vec<_>>>()?;

        let t = cfg.trials as f64;
        let mean = estimates.iter().sum::<f64>() / t;
        let bias = mean - truth;
        let variance = if cfg.trials > 1 {
            estimates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0)
        } else {
            0.0
        };
        let mse = estimates.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / t;
        let se_mean = (variance / t).sqrt();
        rows.push(SweepRow {
            n,
            k,
            mean,
            bias,
            variance,
            mse,
            se_mean,
            bias_bound: theoretical_bias_bound(&cfg.dist, k, n),
            variance_bound: theoretical_variance_bound(&cfg.dist, k, n),
            mse_bound: theoretical_mse_bound(&cfg.dist, k, n),
        });
    }

    let fit_points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| {
            let q = match cfg.kind {
                ExperimentKind::BiasSweep => r.bias.abs(),
                ExperimentKind::VarianceSweep => r.variance,
                _ => r.mse,
            };
            (r.n as f64, q)
        })
        .collect();
    let fit = if fit_points.len() >= 2 {
        Some(fit_rate(&fit_points)?)
    } else {
        None
    };
    Ok(SweepResult {
        kind: cfg.kind,
        true_entropy: truth,
        rows,
        fitted_quantity,
        fit,
    })
}

fn theoretical_bias_bound(dist: &Distribution, k: usize, n: usize) -> Option<f64> {
    let sm = dist.smoothness()?;
    let env = dist.envelopes();
    let c_d = dist.space().ball_volume_constant();
    let dim = dist.dim();
    let gb = env.gamma_b(sm.beta).ok()?;
    if gb.is_finite() {
        return Some(bounds::bias_bound(k, n, dim, sm.beta, sm.c_beta, gb, c_d));
    }
    // Boundary-vanishing Hoelder densities get the ratio-based constant when
    // the tail integral diverges. The gaussian's tail integral diverges too,
    // but it has no support boundary to vanish on, so no bound is claimed
    // for it (its column stays empty; the rate is checked empirically).
    if dist.family() == Family::SineBump {
        let gamma = env.gamma_ratio_mean().ok()?;
        if gamma.is_finite() {
            return Some(bounds::holder_bias_bound(
                k, n, dim, sm.beta, sm.l, gamma, c_d,
            ));
        }
    }
    None
}

fn theoretical_variance_bound(dist: &Distribution, k: usize, n: usize) -> Option<f64> {
    let kissing = bounds::kissing_number_upper(dist.dim())?;
    let env = dist.envelopes();
    let g0 = env.gamma_0();
    if !g0.is_finite() {
        return None;
    }
    // lambda at the midpoint of (0, Dk/Gamma_0); C_M = 1 by default.
    let lambda = dist.dim() as f64 * k as f64 / (2.0 * g0);
    let m4 = bounds::moment_ceiling(4, lambda, 1.0).ok()?;
    let v = bounds::variance_bound(k, n, k as u64 * kissing, m4);
    v.valid.then_some(v.raw)
}

fn theoretical_mse_bound(dist: &Distribution, k: usize, n: usize) -> Option<f64> {
    let b = theoretical_bias_bound(dist, k, n)?;
    let v = theoretical_variance_bound(dist, k, n)?;
    Some(b * b + v)
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "#schema: {} n,k,mean,bias,variance,mse,se_mean,bias_bound,variance_bound,mse_bound\n",
            self.kind.name()
        ));
        out.push_str(&format!(
            "#truth: entropy={}\n",
            format_real(self.true_entropy)
        ));
        out.push_str("n,k,mean,bias,variance,mse,se_mean,bias_bound,variance_bound,mse_bound\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.n,
                r.k,
                format_real(r.mean),
                format_real(r.bias),
                format_real(r.variance),
                format_real(r.mse),
                format_real(r.se_mean),
                opt_real(r.bias_bound),
                opt_real(r.variance_bound),
                opt_real(r.mse_bound),
            ));
        }
        if let Some(fit) = &self.fit {
            out.push_str(&format!(
                "#fit: quantity={} slope={} intercept={} r_squared={}\n",
                self.fitted_quantity,
                format_real(fit.slope),
                format_real(fit.intercept),
                format_real(fit.r_squared)
            ));
        }
        out
    }
}

fn opt_real(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

/// One grid point of a concentration experiment.
#[derive(Debug, Clone)]
pub struct TailRow {
    /// `upper` rows carry the empirical CCDF `P[eps > r]`, `lower` rows the
    /// empirical CDF `P[eps <= r]`.
    pub tail: &'static str,
    pub r: f64,
    pub empirical: f64,
    pub hoeffding_margin: f64,
    pub bound: bounds::BoundValue,
}

/// Result of a concentration experiment at one `(n, k, x)`.
#[derive(Debug, Clone)]
pub struct ConcentrationResult {
    pub n: usize,
    pub k: usize,
    pub query: Vec<f64>,
    pub trials: usize,
    pub rows: Vec<TailRow>,
}

/// Measure empirical tail probabilities of `eps_k(x)` at a fixed query point
/// against the concentration bounds, on `r_points`-point grids spanning each
/// validity window. The Hoeffding margin is at confidence 99%
/// (`sqrt(ln(2/0.01) / (2 trials))`).
pub fn run_concentration(cfg: &ExperimentConfig) -> Result<ConcentrationResult> {
    cfg.validate()?;
    let n = cfg.n_grid[0];
    let dim = cfg.dist.dim();
    let k = cfg.k_rule.k_for(n, dim);
    if k > n {
        return Err(Error::KOutOfRange { k, limit: n });
    }
    let x = cfg.query_point();
    let env = cfg.dist.envelopes();
    let gamma_star = env.gamma_star(&x);
    let gamma_sup = env.gamma_sup(&x);
    let rho = env.rho();

    let eps = sample_eps_at_query(cfg, n, k, &x)?;
    let t = cfg.trials as f64;
    let margin = (200.0f64.ln() / (2.0 * t)).sqrt();

    let mut rows = Vec::new();
    // Upper tail window: [ (k/(gamma_star n))^{1/D}, rho ], truncated where
    // rho is infinite to the radius where the bound is ~e^{-45}.
    let up_lo = bounds::upper_window_start(k, n, dim, gamma_star);
    let up_hi = if rho.is_finite() {
        rho
    } else {
        ((k as f64 + 45.0) / (gamma_star * n as f64)).powf(1.0 / dim as f64)
    };
    for i in 0..cfg.r_points {
        let r = up_lo + (up_hi - up_lo) * i as f64 / (cfg.r_points - 1) as f64;
        let ccdf = eps.iter().filter(|&&e| e > r).count() as f64 / t;
        rows.push(TailRow {
            tail: "upper",
            r,
            empirical: ccdf,
            hoeffding_margin: margin,
            bound: bounds::concentration_upper(r, k, n, dim, gamma_star, rho),
        });
    }
    // Lower tail window: [0, min((k/(gamma_sup n))^{1/D}, rho)].
    let low_hi = bounds::lower_window_end(k, n, dim, gamma_sup, rho);
    for i in 0..cfg.r_points {
        let r = low_hi * i as f64 / (cfg.r_points - 1) as f64;
        let cdf = eps.iter().filter(|&&e| e <= r).count() as f64 / t;
        rows.push(TailRow {
            tail: "lower",
            r,
            empirical: cdf,
            hoeffding_margin: margin,
            bound: bounds::concentration_lower(r, k, n, dim, gamma_star, gamma_sup, rho),
        });
    }
    Ok(ConcentrationResult {
        n,
        k,
        query: x,
        trials: cfg.trials,
        rows,
    })
}

// eps_k(x) over fresh samples, one per trial. A linear scan per trial beats
// building a tree for a single query.
fn sample_eps_at_query(cfg: &ExperimentConfig, n: usize, k: usize, x: &[f64]) -> Result<Vec<f64>> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let data = cfg
                .dist
                .sample(n, substream_seed(cfg.base_seed, t as u64))?;
            let index = KnnIndex::brute_force(&data);
            index.knn_distance(x, k, None)
        })
        .collect()
}

impl ConcentrationResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "#schema: concentration tail,r,empirical,hoeffding_margin,raw_bound,clamped_bound,validity_flag\n",
        );
        out.push_str(&format!(
            "#config: n={} k={} trials={} query={}\n",
            self.n,
            self.k,
            self.trials,
            self.query
                .iter()
                .map(|&c| format_real(c))
                .collect::<Vec<_>>()
                .join(";")
        ));
        out.push_str("tail,r,empirical,hoeffding_margin,raw_bound,clamped_bound,validity_flag\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.tail,
                format_real(r.r),
                format_real(r.empirical),
                format_real(r.hoeffding_margin),
                format_real(r.bound.raw),
                format_real(r.bound.clamped),
                u8::from(r.bound.valid)
            ));
        }
        out
    }
}

/// One statistic row of a moments experiment.
#[derive(Debug, Clone)]
pub struct MomentRow {
    /// `moment` (with `alpha`), `log_pos`, or `log_neg`.
    pub stat: &'static str,
    pub alpha: Option<f64>,
    pub empirical: f64,
    pub std_error: f64,
    pub bound: f64,
}

/// Result of a moments experiment at one `(n, k, x)`.
#[derive(Debug, Clone)]
pub struct MomentsResult {
    pub n: usize,
    pub k: usize,
    pub query: Vec<f64>,
    pub trials: usize,
    pub rows: Vec<MomentRow>,
}

/// Measure empirical moments `E[eps_k^alpha(x)]` and the split log moments
/// `E[ln_+ eps]`, `E[ln_- eps]` against their closed-form bounds.
pub fn run_moments(cfg: &ExperimentConfig) -> Result<MomentsResult> {
    cfg.validate()?;
    let n = cfg.n_grid[0];
    let dim = cfg.dist.dim();
    let k = cfg.k_rule.k_for(n, dim);
    if k > n {
        return Err(Error::KOutOfRange { k, limit: n });
    }
    let x = cfg.query_point();
    let env = cfg.dist.envelopes();
    let gamma_star = env.gamma_star(&x);
    let gamma_sup = env.gamma_sup(&x);

    // Validate every alpha before burning trials.
    let mut alpha_bounds = Vec::with_capacity(cfg.alphas.len());
    for &alpha in &cfg.alphas {
        alpha_bounds.push(bounds::moment_bound(
            alpha, k, n, dim, gamma_star, gamma_sup,
        )?);
    }

    let eps = sample_eps_at_query(cfg, n, k, &x)?;
    if eps.contains(&0.0) {
        return Err(Error::ZeroDistance { index: 0 });
    }

    let mut rows = Vec::new();
    for (&alpha, &bound) in cfg.alphas.iter().zip(&alpha_bounds) {
        let (mean, se) = mean_se(eps.iter().map(|&e| e.powf(alpha)));
        rows.push(MomentRow {
            stat: "moment",
            alpha: Some(alpha),
            empirical: mean,
            std_error: se,
            bound,
        });
    }
    let (pos_mean, pos_se) = mean_se(eps.iter().map(|&e| e.ln().max(0.0)));
    rows.push(MomentRow {
        stat: "log_pos",
        alpha: None,
        empirical: pos_mean,
        std_error: pos_se,
        bound: bounds::log_moment_upper_closed(k, n, dim, gamma_star)?,
    });
    let (neg_mean, neg_se) = mean_se(eps.iter().map(|&e| (-e.ln()).max(0.0)));
    rows.push(MomentRow {
        stat: "log_neg",
        alpha: None,
        empirical: neg_mean,
        std_error: neg_se,
        bound: bounds::log_moment_lower_closed(k, n, dim, gamma_star, gamma_sup)?,
    });
    Ok(MomentsResult {
        n,
        k,
        query: x,
        trials: cfg.trials,
        rows,
    })
}

fn mean_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let t = v.len() as f64;
    let mean = v.iter().sum::<f64>() / t;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1.0);
    (mean, (var / t).sqrt())
}

impl MomentsResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("#schema: moments stat,alpha,empirical,std_error,bound\n");
        out.push_str(&format!(
            "#config: n={} k={} trials={}\n",
            self.n, self.k, self.trials
        ));
        out.push_str("stat,alpha,empirical,std_error,bound\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.stat,
                r.alpha.map(format_real).unwrap_or_default(),
                format_real(r.empirical),
                format_real(r.std_error),
                format_real(r.bound)
            ));
        }
        out
    }
}

/// One `k` of a digamma-identity experiment.
#[derive(Debug, Clone)]
pub struct IdentityRow {
    pub k: usize,
    /// Mean over trials of the per-trial mean of `ln(c_D eps_k(X_i)^D)`.
    pub mean_log_ball_prob: f64,
    pub std_error: f64,
    /// `psi(k) - psi(n)`.
    pub target: f64,
    /// `(mean - target) / std_error`.
    pub z_score: f64,
}

/// Result of a digamma-identity experiment.
#[derive(Debug, Clone)]
pub struct IdentityResult {
    pub n: usize,
    pub trials: usize,
    pub rows: Vec<IdentityRow>,
}

/// Check the distribution-free identity
/// `E[ln P(B(X_i, eps_k(X_i)))] = psi(k) - psi(n)` on the uniform torus,
/// where `P(B(x, r)) = c_D r^D` exactly, so the left side is the sample mean
/// of `ln(c_D eps_k^D)`.
pub fn run_identity(cfg: &ExperimentConfig) -> Result<IdentityResult> {
    cfg.validate()?;
    let n = cfg.n_grid[0];
    let k_list = cfg.k_list.clone();
    let k_max = *k_list.iter().max().expect("validated non-empty");
    if k_max + 1 > n {
        return Err(Error::KOutOfRange {
            k: k_max,
            limit: n - 1,
        });
    }
    let c_d = cfg.dist.space().ball_volume_constant();
    let d = cfg.dist.dim() as f64;

    // trial_means[t][j] = mean_i ln(c_D eps_{k_j}(X_i)^D) for trial t.
    let trial_means: Vec<Vec<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let data = cfg
                .dist
                .sample(n, substream_seed(cfg.base_seed, t as u64))?;
            let index = KnnIndex::build(&data);
            // One k_max query per point serves every requested k.
            let mut sums = vec![0.0; k_list.len()];
            for i in 0..n {
                let neighbors = index.knn_query(data.point(i), k_max, Some(i))?;
                for (j, &kj) in k_list.iter().enumerate() {
                    let e = neighbors[kj - 1].distance;
                    if e == 0.0 {
                        return Err(Error::ZeroDistance { index: i });
                    }
                    sums[j] += c_d.ln() + d * e.ln();
                }
            }
            Ok(sums.iter().map(|s| s / n as f64).collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(k_list.len());
    for (j, &kj) in k_list.iter().enumerate() {
        let (mean, se) = mean_se(trial_means.iter().map(|m| m[j]));
        let target = digamma(kj as f64)? - digamma(n as f64)?;
        rows.push(IdentityRow {
            k: kj,
            mean_log_ball_prob: mean,
            std_error: se,
            target,
            z_score: if se > 0.0 {
                (mean - target) / se
            } else {
                f64::NAN
            },
        });
    }
    Ok(IdentityResult {
        n,
        trials: cfg.trials,
        rows,
    })
}

impl IdentityResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("#schema: digamma_identity k,mean_log_ball_prob,std_error,target,z_score\n");
        out.push_str(&format!("#config: n={} trials={}\n", self.n, self.trials));
        out.push_str("k,mean_log_ball_prob,std_error,target,z_score\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.k,
                format_real(r.mean_log_ball_prob),
                format_real(r.std_error),
                format_real(r.target),
                format_real(r.z_score)
            ));
        }
        out
    }
}
