//! Penalty levels: the closed-form X-independent rule and the simulated
//! X-dependent rule, plus the Gaussian tail chain that orders them.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::normal_quantile;
use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::rng::{std_normal, stream_rng, Stream};

/// Fewer simulation draws than this set [`SimulatedQuantile::low_draws`].
pub const MIN_RELIABLE_DRAWS: usize = 100;

/// Draws simulated per batched matrix product.
const BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyRule {
    XIndependent,
    XDependent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub rule: PenaltyRule,
    pub c: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub sim_draws: usize,
    pub seed: u64,
    /// Resolved penalty level, filled in by [`PenaltySpec::resolve`].
    pub lambda: Option<f64>,
}

impl Default for PenaltySpec {
    fn default() -> Self {
        PenaltySpec {
            rule: PenaltyRule::XDependent,
            c: 1.1,
            alpha: 0.1,
            sigma: 1.0,
            sim_draws: 10_000,
            seed: 0,
            lambda: None,
        }
    }
}

impl PenaltySpec {
    pub fn x_independent(c: f64, alpha: f64, sigma: f64) -> Self {
        PenaltySpec {
            rule: PenaltyRule::XIndependent,
            c,
            alpha,
            sigma,
            ..Self::default()
        }
    }

    pub fn x_dependent(c: f64, alpha: f64, sigma: f64, sim_draws: usize, seed: u64) -> Self {
        PenaltySpec {
            rule: PenaltyRule::XDependent,
            c,
            alpha,
            sigma,
            sim_draws,
            seed,
            lambda: None,
        }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        PenaltySpec {
            sigma,
            lambda: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 1.0) || !self.c.is_finite() {
            return Err(Error::Domain(format!("c must be > 1, got {}", self.c)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Domain(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if self.rule == PenaltyRule::XDependent && self.sim_draws == 0 {
            return Err(Error::Argument("sim_draws must be >= 1".into()));
        }
        Ok(())
    }

    /// Resolves `lambda` for this dataset and stores it.
    pub fn resolve(&mut self, ds: &Dataset) -> Result<f64> {
        let q = penalty_quantile(ds, self)?;
        let lambda = 2.0 * self.c * self.sigma * q.value;
        self.lambda = Some(lambda);
        Ok(lambda)
    }
}

/// `Lambda(1 - alpha | X)` or its closed-form stand-in, the quantity that
/// multiplies `2 c sigma` in either rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedQuantile {
    pub value: f64,
    /// Zero for the closed form.
    pub draws: usize,
    pub low_draws: bool,
}

/// Empirical quantile as the `ceil(R * level)`-th order statistic (1-based), no interpolation.
pub fn empirical_quantile(samples: &[f64], level: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Argument(
            "empirical quantile of an empty sample".into(),
        ));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::Domain(format!(
            "quantile level must lie in (0, 1], got {level}"
        )));
    }
    let r = samples.len();
    // The tolerance keeps e.g. 10 * 0.9 from rounding up to the 10th statistic.
    let k = ((r as f64 * level) - 1e-9 * r as f64).ceil().max(1.0) as usize;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(sorted[k.min(r) - 1])
}

/// Distribution-free interval for the `level` quantile: the order statistics
/// at `R level -/+ z sqrt(R level (1 - level))`, with `z` the two-sided
/// normal critical value at `confidence`.
pub fn quantile_interval(samples: &[f64], level: f64, confidence: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Argument(
            "quantile interval of an empty sample".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) || !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!(
            "level and confidence must lie in (0, 1), got {level} and {confidence}"
        )));
    }
    let r = samples.len() as f64;
    let z = normal_quantile(0.5 + confidence / 2.0)?;
    let half = z * (r * level * (1.0 - level)).sqrt();
    let lo = ((r * level - half).floor().max(1.0) as usize).min(samples.len());
    let hi = ((r * level + half).ceil().max(1.0) as usize).min(samples.len());
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok((sorted[lo - 1], sorted[hi - 1]))
}

/// `2 c sigma sqrt(n) Phi^{-1}(1 - alpha / 2p)`.
pub fn lambda_x_independent(n: usize, p: usize, spec: &PenaltySpec) -> Result<f64> {
    spec.validate()?;
    Ok(2.0 * spec.c * spec.sigma * gaussian_max_bound(n, p, spec.alpha)?)
}

/// `sqrt(n) Phi^{-1}(1 - alpha / 2p)`.
pub fn gaussian_max_bound(n: usize, p: usize, alpha: f64) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::Argument("n and p must be >= 1".into()));
    }
    let tail = alpha / (2.0 * p as f64);
    if !(tail > 0.0 && tail < 1.0) {
        return Err(Error::Domain(format!(
            "alpha / 2p must lie in (0, 1), got {tail}"
        )));
    }
    Ok((n as f64).sqrt() * normal_quantile(1.0 - tail)?)
}

/// `max_j |sum_i x_ij g_i|` for the draws `first..first + count`.
///
/// Each draw uses its own generator derived from its global index, so any
/// split of the index range gives the same values.
fn max_scores_range(x: &DMatrix<f64>, seed: u64, first: usize, count: usize) -> Vec<f64> {
    let n = x.nrows();
    let mut g = DMatrix::<f64>::zeros(n, count);
    for (k, mut col) in g.column_iter_mut().enumerate() {
        let mut rng = stream_rng(seed, Stream::Penalty, (first + k) as u64);
        for v in col.iter_mut() {
            *v = std_normal(&mut rng);
        }
    }
    let xg = x.tr_mul(&g);
    xg.column_iter().map(|c| c.amax()).collect()
}

/// Simulated values of `n ||S / 2 sigma||_inf = max_j |sum_i x_ij g_i|` for `draws` Gaussian vectors.
pub fn simulate_max_scores(ds: &Dataset, draws: usize, seed: u64) -> Result<Vec<f64>> {
    ds.require_normalized()?;
    let x = ds.x();
    let batches: Vec<(usize, usize)> = (0..draws)
        .step_by(BATCH)
        .map(|s| (s, BATCH.min(draws - s)))
        .collect();
    let parts: Vec<Vec<f64>> = batches
        .par_iter()
        .map(|&(s, c)| max_scores_range(x, seed, s, c))
        .collect();
    Ok(parts.concat())
}

/// `Lambda(1 - alpha | X)` for the X-dependent rule, or `sqrt(n) Phi^{-1}(1 - alpha/2p)` for the other.
pub fn penalty_quantile(ds: &Dataset, spec: &PenaltySpec) -> Result<SimulatedQuantile> {
    spec.validate()?;
    match spec.rule {
        PenaltyRule::XIndependent => Ok(SimulatedQuantile {
            value: gaussian_max_bound(ds.n(), ds.p(), spec.alpha)?,
            draws: 0,
            low_draws: false,
        }),
        PenaltyRule::XDependent => {
            let sims = simulate_max_scores(ds, spec.sim_draws, spec.seed)?;
            Ok(SimulatedQuantile {
                value: empirical_quantile(&sims, 1.0 - spec.alpha)?,
                draws: spec.sim_draws,
                low_draws: spec.sim_draws < MIN_RELIABLE_DRAWS,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XDependentLambda {
    pub lambda: f64,
    pub quantile: SimulatedQuantile,
}

/// `2 c sigma Lambda(1 - alpha | X)` with `Lambda` simulated from `spec.sim_draws` draws.
pub fn lambda_x_dependent(ds: &Dataset, spec: &PenaltySpec) -> Result<XDependentLambda> {
    let spec = PenaltySpec {
        rule: PenaltyRule::XDependent,
        ..spec.clone()
    };
    let quantile = penalty_quantile(ds, &spec)?;
    Ok(XDependentLambda {
        lambda: 2.0 * spec.c * spec.sigma * quantile.value,
        quantile,
    })
}

/// The chain `sqrt(n) Phi^{-1}(1 - alpha/2p) <= sqrt(2 n log(2p/alpha))`.
pub fn tail_bound_check(n: usize, p: usize, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let first = gaussian_max_bound(n, p, alpha)?;
    let second = (2.0 * n as f64 * (2.0 * p as f64 / alpha).ln()).sqrt();
    debug_assert!(
        first <= second,
        "Gaussian tail chain violated: {first} > {second}"
    );
    Ok((first, second))
}
