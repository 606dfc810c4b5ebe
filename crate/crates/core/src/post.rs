//! Post-selection estimators: least-squares refits on a selected support,
//! hard thresholding, iterative noise-level estimation and OLS inference.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::student_t_quantile;
use crate::error::{Error, Result};
use crate::linalg::{lstsq_min_norm, select_columns};
use crate::model::{objective_q, CoefVector, Dataset, Support};
use crate::penalty::{penalty_quantile, PenaltySpec};
use crate::solver::{solve_lasso, LassoFit, SolverOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct PostLassoFit {
    pub beta: CoefVector,
    pub support_used: Support,
    /// `Q(beta)` at the refit.
    pub objective: f64,
    pub rank_deficient: bool,
}

/// Least squares restricted to `support`, zero elsewhere. Rank-deficient
/// designs get the minimum-norm solution.
pub fn post_lasso(ds: &Dataset, support: &Support) -> Result<PostLassoFit> {
    support.check_bounds(ds.p())?;
    let mut beta = DVector::zeros(ds.p());
    let mut rank_deficient = false;
    if !support.is_empty() {
        let xs = select_columns(ds.x(), support.as_slice());
        let (b, deficient) = lstsq_min_norm(&xs, ds.y());
        rank_deficient = deficient;
        for (k, j) in support.iter().enumerate() {
            beta[j] = b[k];
        }
    }
    let objective = objective_q(ds, &beta)?;
    Ok(PostLassoFit {
        beta: CoefVector::new(beta),
        support_used: support.clone(),
        objective,
        rank_deficient,
    })
}

/// `{j : |beta_j| > t}`.
pub fn threshold_select(beta: &CoefVector, t: f64) -> Support {
    debug_assert!(t >= 0.0);
    if t == 0.0 {
        return beta.support().clone();
    }
    beta.values()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.abs() > t)
        .map(|(j, _)| j)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMethod {
    Lasso,
    PostLasso,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    /// `sigma^0, sigma^1, ...`
    pub trace: Vec<f64>,
    pub final_sigma: f64,
    /// Number of refinements performed (`trace.len() - 1`).
    pub iterations_used: usize,
    /// Whether the stopping rule fired on the tolerance rather than on the iteration cap.
    pub converged: bool,
    pub method: SigmaMethod,
    /// `Lambda(1 - alpha | X)` (or its closed-form stand-in) used at every step.
    pub quantile: f64,
}

impl SigmaEstimate {
    /// The penalty implied by the final estimate: `2 c sigma_hat Lambda`.
    pub fn lambda(&self, c: f64) -> f64 {
        2.0 * c * self.final_sigma * self.quantile
    }
}

/// `sqrt(Var_n[y])` with the `1/n` convention.
pub fn initial_sigma(y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let mean = y.sum() / n;
    (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Iterative noise-level estimation. Resolves `Lambda(1 - alpha | X)` from
/// `spec` once, then iterates `lambda = 2 c sigma^k Lambda`.
pub fn estimate_sigma(
    ds: &Dataset,
    spec: &PenaltySpec,
    method: SigmaMethod,
    nu: f64,
    max_iter: usize,
) -> Result<SigmaEstimate> {
    let q = penalty_quantile(ds, spec)?;
    estimate_sigma_with_quantile(ds, spec.c, q.value, method, nu, max_iter)
}

/// [`estimate_sigma`] with a precomputed penalty quantile.
pub fn estimate_sigma_with_quantile(
    ds: &Dataset,
    c: f64,
    quantile: f64,
    method: SigmaMethod,
    nu: f64,
    max_iter: usize,
) -> Result<SigmaEstimate> {
    estimate_sigma_with_solver(
        ds,
        c,
        quantile,
        method,
        nu,
        max_iter,
        &SolverOptions::default(),
    )
}

/// [`estimate_sigma_with_quantile`] with explicit solver settings; any warm
/// start in `base` seeds only the first fit.
pub fn estimate_sigma_with_solver(
    ds: &Dataset,
    c: f64,
    quantile: f64,
    method: SigmaMethod,
    nu: f64,
    max_iter: usize,
    base: &SolverOptions,
) -> Result<SigmaEstimate> {
    ds.require_normalized()?;
    if max_iter < 2 {
        return Err(Error::Argument(format!(
            "max_iter must be > 1, got {max_iter}"
        )));
    }
    if !(nu >= 0.0) {
        return Err(Error::Argument(format!("tolerance must be >= 0, got {nu}")));
    }
    if !(quantile > 0.0) {
        return Err(Error::Argument(format!(
            "penalty quantile must be > 0, got {quantile}"
        )));
    }
    let n = ds.n();
    let mut trace = vec![initial_sigma(ds.y())];
    let mut warm: Option<CoefVector> = base.warm_start.clone();
    let mut k = 0usize;
    loop {
        let sigma_k = trace[k];
        if !(sigma_k > 0.0) {
            return Err(Error::NonInformative(format!(
                "noise estimate reached {sigma_k} at step {k}; the response is fitted exactly"
            )));
        }
        let lambda = 2.0 * c * sigma_k * quantile;
        let opts = SolverOptions {
            warm_start: warm.take(),
            ..base.clone()
        };
        let fit = solve_lasso(ds, lambda, &opts)?;
        let next = match method {
            SigmaMethod::Lasso => objective_q(ds, fit.beta.values())?.sqrt(),
            SigmaMethod::PostLasso => {
                let s_hat = fit.support().len();
                if s_hat >= n {
                    return Err(Error::DegenerateRefit {
                        selected: s_hat,
                        n,
                        trace,
                    });
                }
                let refit = post_lasso(ds, fit.support())?;
                (n as f64 / (n - s_hat) as f64 * refit.objective).sqrt()
            }
        };
        warm = Some(fit.beta);
        trace.push(next);
        let small_step = (next - sigma_k).abs() <= nu;
        if small_step || k + 1 >= max_iter {
            return Ok(SigmaEstimate {
                final_sigma: next,
                iterations_used: trace.len() - 1,
                converged: small_step,
                method,
                quantile,
                trace,
            });
        }
        k += 1;
    }
}

/// LASSO fit at `lambda` followed by the refit on its support.
pub fn lasso_and_refit(ds: &Dataset, lambda: f64) -> Result<(LassoFit, PostLassoFit)> {
    let fit = solve_lasso(ds, lambda, &SolverOptions::default())?;
    let refit = post_lasso(ds, fit.support())?;
    Ok((fit, refit))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsInference {
    pub support: Support,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Two-sided intervals at `level`.
    pub intervals: Vec<(f64, f64)>,
    pub level: f64,
    pub dof: usize,
    pub critical_value: f64,
}

/// OLS on the selected columns of the original-scale design with
/// homoskedastic standard errors and Student-t intervals.
pub fn ols_inference(ds: &Dataset, support: &Support, level: f64) -> Result<OlsInference> {
    support.check_bounds(ds.p())?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let n = ds.n();
    let k = support.len();
    if k == 0 {
        return Err(Error::Argument(
            "inference needs at least one selected column".into(),
        ));
    }
    if k >= n {
        return Err(Error::Precondition(format!(
            "inference needs fewer selected columns than observations ({k} >= {n})"
        )));
    }
    let raw = ds.raw_x();
    let xs = select_columns(&raw, support.as_slice());
    let (coef, deficient) = lstsq_min_norm(&xs, ds.y());
    if deficient {
        return Err(Error::Singular);
    }
    let xtx: DMatrix<f64> = xs.tr_mul(&xs);
    let inv = xtx.cholesky().ok_or(Error::Singular)?.inverse();
    let resid = ds.y() - &xs * &coef;
    let dof = n - k;
    let s2 = resid.norm_squared() / dof as f64;
    let t = student_t_quantile(1.0 - (1.0 - level) / 2.0, dof as f64)?;
    let std_errors: Vec<f64> = (0..k).map(|a| (s2 * inv[(a, a)]).max(0.0).sqrt()).collect();
    let intervals = coef
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| (b - t * se, b + t * se))
        .collect();
    Ok(OlsInference {
        support: support.clone(),
        coefficients: coef.iter().copied().collect(),
        std_errors,
        intervals,
        level,
        dof,
        critical_value: t,
    })
}
