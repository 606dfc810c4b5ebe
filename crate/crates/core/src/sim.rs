//! Seeded Monte Carlo experiments on Toeplitz Gaussian designs.
//!
//! Every repetition draws its design, noise and penalty simulation from
//! generators derived from `(seed, rep_index)`, runs independently, and
//! the per-rep outcomes are aggregated in rep order. Reports are therefore
//! identical for any thread count.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::sparse_eigs_from_gram;
use crate::error::{Error, Result};
use crate::linalg::gram;
use crate::model::{normalize_columns, prediction_norm, Dataset, Support, TruthInfo};
use crate::oracle::oracle_ols;
use crate::penalty::{penalty_quantile, PenaltyRule, PenaltySpec};
use crate::post::{estimate_sigma_with_solver, initial_sigma, post_lasso, SigmaMethod};
use crate::rng::{derive_seed, std_normal, stream_rng, Stream};
use crate::solver::{solve_lasso, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "values")]
pub enum Beta0Spec {
    /// `(1, 1, 1/2, 1/3, ..., 1/(s-1), 0, ..., 0)`, intercept first.
    Harmonic,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    Known,
    EstimatedLasso,
    EstimatedPostLasso,
    /// `sqrt(Var_n[y])` with no iteration.
    Initial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n: usize,
    /// Number of columns including the intercept.
    pub p: usize,
    pub s: usize,
    pub beta0: Beta0Spec,
    pub rho: f64,
    pub sigma2: f64,
    pub reps: usize,
    pub alpha: f64,
    pub c: f64,
    pub penalty_rule: PenaltyRule,
    pub sigma_mode: SigmaMode,
    /// Gaussian draws per rep for the X-dependent penalty quantile.
    pub sim_draws: usize,
    /// Tolerance and iteration cap for the noise-level iterations.
    pub nu: f64,
    pub max_iter: usize,
    /// When false (the default), the intercept in column 0 is left out of
    /// the l1 penalty.
    pub penalize_intercept: bool,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n: 100,
            p: 500,
            s: 6,
            beta0: Beta0Spec::Harmonic,
            rho: 0.5,
            sigma2: 1.0,
            reps: 1000,
            alpha: 0.1,
            c: 1.1,
            penalty_rule: PenaltyRule::XDependent,
            sigma_mode: SigmaMode::Known,
            sim_draws: 500,
            nu: 1e-4,
            max_iter: 20,
            penalize_intercept: false,
            seed: 0,
        }
    }
}

impl McConfig {
    /// `sigma^2 = 1`.
    pub fn design1() -> Self {
        McConfig::default()
    }

    /// `sigma^2 = 0.1`.
    pub fn design2() -> Self {
        McConfig {
            sigma2: 0.1,
            ..McConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Argument("reps must be >= 1".into()));
        }
        if self.n < 2 || self.p < 1 {
            return Err(Error::Argument(format!(
                "need n >= 2 and p >= 1, got n = {}, p = {}",
                self.n, self.p
            )));
        }
        if self.s > self.p {
            return Err(Error::Argument(format!(
                "s = {} exceeds p = {}",
                self.s, self.p
            )));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::Domain(format!(
                "rho must lie in (-1, 1), got {}",
                self.rho
            )));
        }
        if !(self.sigma2 >= 0.0) {
            return Err(Error::Domain(format!(
                "sigma2 must be >= 0, got {}",
                self.sigma2
            )));
        }
        if let Beta0Spec::Custom(b) = &self.beta0 {
            if b.len() != self.p {
                return Err(Error::dim("beta0", b.len(), self.p));
            }
        }
        if self.penalty_rule == PenaltyRule::XDependent && self.sim_draws == 0 {
            return Err(Error::Argument("sim_draws must be >= 1".into()));
        }
        if self.max_iter < 2 {
            return Err(Error::Argument("max_iter must be > 1".into()));
        }
        self.penalty_template(0).with_sigma(1.0).validate()
    }

    /// True coefficients on the original scale.
    pub fn beta0_vector(&self) -> DVector<f64> {
        match &self.beta0 {
            Beta0Spec::Custom(b) => DVector::from_column_slice(b),
            Beta0Spec::Harmonic => DVector::from_fn(self.p, |j, _| {
                if j >= self.s {
                    0.0
                } else if j == 0 {
                    1.0
                } else {
                    1.0 / j as f64
                }
            }),
        }
    }

    fn penalty_template(&self, rep: usize) -> PenaltySpec {
        PenaltySpec {
            rule: self.penalty_rule,
            c: self.c,
            alpha: self.alpha,
            sigma: 1.0,
            sim_draws: self.sim_draws,
            seed: derive_seed(self.seed, Stream::Penalty, rep as u64),
            lambda: None,
        }
    }
}

/// `n x cols` rows of a stationary AR(1) Gaussian sequence with unit variance
/// and lag-`k` correlation `rho^k`.
pub fn ar1_rows<R: rand::Rng>(rng: &mut R, n: usize, cols: usize, rho: f64) -> DMatrix<f64> {
    let innov = (1.0 - rho * rho).sqrt();
    let mut z = DMatrix::zeros(n, cols);
    for i in 0..n {
        let mut prev = 0.0;
        for j in 0..cols {
            let e = std_normal(rng);
            let v = if j == 0 { e } else { rho * prev + innov * e };
            z[(i, j)] = v;
            prev = v;
        }
    }
    z
}

/// Design, noise and response for one repetition, normalized, with truth attached.
pub fn gen_design(config: &McConfig, rep_index: usize) -> Result<Dataset> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let mut rng = stream_rng(config.seed, Stream::Design, rep_index as u64);
    let z = ar1_rows(&mut rng, n, p - 1, config.rho);
    let mut x = DMatrix::from_element(n, p, 1.0);
    x.view_mut((0, 1), (n, p - 1)).copy_from(&z);
    let beta0 = config.beta0_vector();
    let f = &x * &beta0;
    let sigma = config.sigma2.sqrt();
    let mut nrng = stream_rng(config.seed, Stream::Noise, rep_index as u64);
    let y = DVector::from_fn(n, |i, _| f[i] + sigma * std_normal(&mut nrng));
    let mut names = vec!["intercept".to_string()];
    names.extend((1..p).map(|j| format!("z{j}")));
    let ds =
        Dataset::with_names(x, y, names)?.with_truth(TruthInfo::new(f, sigma, Some(beta0))?)?;
    Ok(ds.normalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub mean_l0: f64,
    /// `||mean(beta_check) - beta0||` on the original scale.
    pub bias_norm: f64,
    pub mean_pred_error: f64,
    /// Monte Carlo standard error of `mean_pred_error`.
    pub pred_error_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
}

impl DistributionSummary {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let q = |level: f64| {
            let pos = level * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        };
        Some(DistributionSummary {
            mean,
            sd: var.sqrt(),
            q05: q(0.05),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSummary {
    pub estimate: DistributionSummary,
    pub initial: DistributionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub config: McConfig,
    pub seed: u64,
    /// Repetitions that completed and entered the aggregates.
    pub rep_count: usize,
    pub failures: usize,
    /// Set when more than 1% of repetitions failed.
    pub flagged: bool,
    pub lasso: EstimatorSummary,
    pub post_lasso: EstimatorSummary,
    pub oracle: EstimatorSummary,
    /// `selected_size[k]` counts reps with `|T_hat| = k`.
    pub selected_size: Vec<u64>,
    /// `true_positives[k]` counts reps with `|T_hat ∩ T| = k`.
    pub true_positives: Vec<u64>,
    pub mean_lambda: f64,
    pub sigma: Option<SigmaSummary>,
}

/// Everything one repetition contributes to the report.
#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub lambda: f64,
    pub sigma_hat: f64,
    pub sigma_initial: f64,
    pub selected: usize,
    pub true_positives: usize,
    pub lasso_beta: DVector<f64>,
    pub post_beta: DVector<f64>,
    pub oracle_beta: DVector<f64>,
    pub lasso_pred: f64,
    pub post_pred: f64,
    pub oracle_pred: f64,
    pub converged: bool,
}

/// Runs one repetition. Coefficients in the outcome are on the original scale.
pub fn run_rep(config: &McConfig, rep: usize) -> Result<RepOutcome> {
    let ds = gen_design(config, rep)?;
    let truth = ds.truth().expect("simulated data carry truth");
    let beta0 = truth
        .beta0
        .as_ref()
        .expect("simulated truth has beta0")
        .values()
        .clone();
    let t = truth.support.clone().unwrap_or_else(Support::empty);

    let mut opts = SolverOptions::default();
    if !config.penalize_intercept {
        opts = opts.with_unpenalized(Support::new([0]));
    }
    let template = config.penalty_template(rep);
    let quantile = penalty_quantile(&ds, &template)?.value;
    let sigma_initial = initial_sigma(ds.y());
    let sigma_hat = match config.sigma_mode {
        SigmaMode::Known => config.sigma2.sqrt(),
        SigmaMode::Initial => sigma_initial,
        SigmaMode::EstimatedLasso | SigmaMode::EstimatedPostLasso => {
            let method = if config.sigma_mode == SigmaMode::EstimatedLasso {
                SigmaMethod::Lasso
            } else {
                SigmaMethod::PostLasso
            };
            estimate_sigma_with_solver(
                &ds,
                config.c,
                quantile,
                method,
                config.nu,
                config.max_iter,
                &opts,
            )?
            .final_sigma
        }
    };
    if !(sigma_hat > 0.0) {
        return Err(Error::Domain(
            "noise level must be > 0 to set the penalty".into(),
        ));
    }
    let lambda = 2.0 * config.c * sigma_hat * quantile;
    let fit = solve_lasso(&ds, lambda, &opts)?;
    let refit = post_lasso(&ds, fit.support())?;
    let oracle = oracle_ols(&ds, &t)?;

    let pred = |b: &DVector<f64>| prediction_norm(&ds, &(b - &beta0));
    Ok(RepOutcome {
        lambda,
        sigma_hat,
        sigma_initial,
        selected: fit.support().len(),
        true_positives: fit.support().intersection_len(&t),
        lasso_pred: pred(fit.beta.values())?,
        post_pred: pred(refit.beta.values())?,
        oracle_pred: pred(oracle.values())?,
        lasso_beta: ds.to_original_scale(fit.beta.values()),
        post_beta: ds.to_original_scale(refit.beta.values()),
        oracle_beta: ds.to_original_scale(oracle.values()),
        converged: fit.converged,
    })
}

struct Accumulator {
    beta_sum: DVector<f64>,
    l0_sum: f64,
    pred_sum: f64,
    pred_sq_sum: f64,
}

impl Accumulator {
    fn new(p: usize) -> Self {
        Accumulator {
            beta_sum: DVector::zeros(p),
            l0_sum: 0.0,
            pred_sum: 0.0,
            pred_sq_sum: 0.0,
        }
    }

    fn add(&mut self, beta: &DVector<f64>, pred: f64) {
        self.beta_sum += beta;
        self.l0_sum += beta.iter().filter(|v| **v != 0.0).count() as f64;
        self.pred_sum += pred;
        self.pred_sq_sum += pred * pred;
    }

    fn finish(&self, reps: usize, beta0: &DVector<f64>) -> EstimatorSummary {
        let k = reps as f64;
        let mean_pred = self.pred_sum / k;
        let var = if reps > 1 {
            ((self.pred_sq_sum - k * mean_pred * mean_pred) / (k - 1.0)).max(0.0)
        } else {
            0.0
        };
        EstimatorSummary {
            mean_l0: self.l0_sum / k,
            bias_norm: (&self.beta_sum / k - beta0).norm(),
            mean_pred_error: mean_pred,
            pred_error_se: (var / k).sqrt(),
        }
    }
}

/// Aggregates rep outcomes in order.
pub fn summarize(config: &McConfig, outcomes: &[Result<RepOutcome>]) -> McReport {
    let p = config.p;
    let beta0 = config.beta0_vector();
    let mut lasso = Accumulator::new(p);
    let mut post = Accumulator::new(p);
    let mut oracle = Accumulator::new(p);
    let mut selected_size = vec![0u64; config.n.min(p) + 1];
    let mut true_positives = vec![0u64; config.s + 1];
    let mut lambda_sum = 0.0;
    let mut sigmas = Vec::new();
    let mut initials = Vec::new();
    let mut failures = 0usize;
    for out in outcomes {
        let o = match out {
            Ok(o) if o.converged => o,
            _ => {
                failures += 1;
                continue;
            }
        };
        lasso.add(&o.lasso_beta, o.lasso_pred);
        post.add(&o.post_beta, o.post_pred);
        oracle.add(&o.oracle_beta, o.oracle_pred);
        if o.selected >= selected_size.len() {
            selected_size.resize(o.selected + 1, 0);
        }
        selected_size[o.selected] += 1;
        true_positives[o.true_positives.min(config.s)] += 1;
        lambda_sum += o.lambda;
        sigmas.push(o.sigma_hat);
        initials.push(o.sigma_initial);
    }
    let done = outcomes.len() - failures;
    let denom = done.max(1);
    let sigma = match config.sigma_mode {
        SigmaMode::Known => None,
        _ => match (
            DistributionSummary::from_values(&sigmas),
            DistributionSummary::from_values(&initials),
        ) {
            (Some(estimate), Some(initial)) => Some(SigmaSummary { estimate, initial }),
            _ => None,
        },
    };
    McReport {
        config: config.clone(),
        seed: config.seed,
        rep_count: done,
        failures,
        flagged: failures * 100 > outcomes.len(),
        lasso: lasso.finish(denom, &beta0),
        post_lasso: post.finish(denom, &beta0),
        oracle: oracle.finish(denom, &beta0),
        selected_size,
        true_positives,
        mean_lambda: lambda_sum / denom as f64,
        sigma,
    }
}

/// Runs all repetitions in parallel and aggregates them in rep order.
pub fn run_mc(config: &McConfig) -> Result<McReport> {
    config.validate()?;
    let outcomes: Vec<Result<RepOutcome>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| run_rep(config, rep))
        .collect();
    Ok(summarize(config, &outcomes))
}

/// [`run_mc`] for a noise-estimating configuration; the report carries the
/// distribution of the estimates and of the initial `sqrt(Var_n[y])`.
pub fn run_sigma_mc(config: &McConfig) -> Result<McReport> {
    if config.sigma_mode == SigmaMode::Known {
        return Err(Error::Argument(
            "noise-estimation study needs an estimated or initial sigma mode".into(),
        ));
    }
    run_mc(config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConditionSummary {
    pub m: usize,
    pub reps: usize,
    /// Population `kappa` (square-root form) and `phi` over the same index sets.
    pub population_kappa: f64,
    pub population_phi: f64,
    /// Fraction of reps with `phi(m) <= 8 phi`, `kappa(m) >= kappa / (6 sqrt 2)`
    /// and `mu(m) <= 24 sqrt(phi) / kappa`.
    pub frequency: f64,
    /// `1 - 2 exp(-n / 16)`.
    pub guaranteed: f64,
    pub mean_kappa_m: f64,
    pub mean_phi_m: f64,
}

/// Population Toeplitz covariance `Sigma_jk = rho^|j-k|`.
pub fn toeplitz(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |j, k| rho.powi((j as i32 - k as i32).abs()))
}

/// Frequency with which exact sparse eigenvalues of normalized Gaussian
/// designs (`p` columns, no intercept, covariance `rho^|j-k|`) satisfy the
/// Gaussian-design conclusions, with `T` the first `s` columns.
pub fn design_condition_mc(
    config: &McConfig,
    m: usize,
    reps: usize,
) -> Result<DesignConditionSummary> {
    config.validate()?;
    if reps == 0 {
        return Err(Error::Argument("reps must be >= 1".into()));
    }
    let t = Support::new(0..config.s);
    let pop = sparse_eigs_from_gram(&toeplitz(config.p, config.rho), &t, m)?;
    let (kap, phi) = (pop.kappa_m, pop.phi_m);
    let per_rep: Vec<Result<(f64, f64, bool)>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(config.seed, Stream::Design, rep as u64);
            let z = ar1_rows(&mut rng, config.n, config.p, config.rho);
            let (x, _) = normalize_columns(&z)?;
            let r = sparse_eigs_from_gram(&gram(&x), &t, m)?;
            let ok = r.phi_m <= 8.0 * phi
                && r.kappa_m >= kap / (6.0 * 2f64.sqrt())
                && r.mu_m <= 24.0 * phi.sqrt() / kap;
            Ok((r.kappa_m, r.phi_m, ok))
        })
        .collect();
    let mut hits = 0usize;
    let (mut ks, mut ps) = (0.0, 0.0);
    for r in per_rep {
        let (k, p, ok) = r?;
        ks += k;
        ps += p;
        hits += ok as usize;
    }
    let rf = reps as f64;
    Ok(DesignConditionSummary {
        m,
        reps,
        population_kappa: kap,
        population_phi: phi,
        frequency: hits as f64 / rf,
        guaranteed: 1.0 - 2.0 * (-(config.n as f64) / 16.0).exp(),
        mean_kappa_m: ks / rf,
        mean_phi_m: ps / rf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> McConfig {
        McConfig {
            n: 40,
            p: 30,
            s: 4,
            reps: 12,
            sim_draws: 200,
            seed: 11,
            ..McConfig::default()
        }
    }

    #[test]
    fn harmonic_coefficients() {
        let b = McConfig::design1().beta0_vector();
        let head: Vec<f64> = b.iter().take(7).copied().collect();
        assert_eq!(head, vec![1.0, 1.0, 0.5, 1.0 / 3.0, 0.25, 0.2, 0.0]);
        assert_eq!(b.iter().filter(|v| **v != 0.0).count(), 6);
    }

    #[test]
    fn design_is_deterministic_and_normalized() {
        let cfg = small();
        let a = gen_design(&cfg, 3).unwrap();
        let b = gen_design(&cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_design(&cfg, 4).unwrap());
        for col in a.x().column_iter() {
            assert!((col.norm_squared() / 40.0 - 1.0).abs() < 1e-12);
        }
        let t = a.truth().unwrap();
        let fit = a.x() * t.beta0.as_ref().unwrap().values();
        assert!((fit - &t.f).amax() < 1e-10);
    }

    #[test]
    fn ar1_adjacent_correlation() {
        let mut rng = stream_rng(1, Stream::Design, 0);
        let z = ar1_rows(&mut rng, 4000, 3, 0.5);
        let c01 = z.column(0).dot(&z.column(1)) / 4000.0;
        let c02 = z.column(0).dot(&z.column(2)) / 4000.0;
        assert!((c01 - 0.5).abs() < 0.05);
        assert!((c02 - 0.25).abs() < 0.05);
    }

    #[test]
    fn report_invariants() {
        let cfg = small();
        let r = run_mc(&cfg).unwrap();
        assert_eq!(r.rep_count + r.failures, cfg.reps);
        assert_eq!(r.selected_size.iter().sum::<u64>() as usize, r.rep_count);
        assert_eq!(r.true_positives.iter().sum::<u64>() as usize, r.rep_count);
        assert_eq!(r.lasso.mean_l0, r.post_lasso.mean_l0);
        assert!(r.oracle.mean_pred_error <= r.lasso.mean_pred_error);
        assert_eq!(r, run_mc(&cfg).unwrap());
    }

    #[test]
    fn zero_reps_is_rejected() {
        let cfg = McConfig { reps: 0, ..small() };
        assert!(matches!(run_mc(&cfg), Err(Error::Argument(_))));
    }

    #[test]
    fn initial_sigma_mode_is_conservative() {
        let cfg = McConfig {
            sigma_mode: SigmaMode::Initial,
            ..small()
        };
        let r = run_sigma_mc(&cfg).unwrap();
        assert!(r.sigma.unwrap().initial.mean > 1.0);
    }
}
