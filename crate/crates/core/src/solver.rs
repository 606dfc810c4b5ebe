//! Cyclic coordinate descent for
//! `min_beta E_n[(y_i - x_i'beta)^2] + (lambda/n) ||beta||_1`
//! with an a-posteriori KKT certificate.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{CoefVector, Dataset, Support};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_sweeps: usize,
    /// Maximum absolute coordinate change in a sweep.
    pub coord_tol: f64,
    /// KKT tolerance, relative to `lambda / n`.
    pub kkt_tol: f64,
    pub warm_start: Option<CoefVector>,
    /// Coefficients left out of the l1 penalty.
    pub unpenalized: Support,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_sweeps: 10_000,
            coord_tol: 1e-9,
            kkt_tol: 1e-6,
            warm_start: None,
            unpenalized: Support::empty(),
        }
    }
}

impl SolverOptions {
    pub fn with_warm_start(mut self, start: CoefVector) -> Self {
        self.warm_start = Some(start);
        self
    }

    pub fn with_unpenalized(mut self, unpenalized: Support) -> Self {
        self.unpenalized = unpenalized;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.coord_tol > 0.0) || !(self.kkt_tol > 0.0) {
            return Err(Error::Argument("solver tolerances must be > 0".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Argument("max_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub beta: CoefVector,
    pub lambda: f64,
    /// `Q(beta) + (lambda/n) ||beta||_1` at the returned point.
    pub objective: f64,
    /// Largest KKT violation, in absolute units.
    pub kkt_violation: f64,
    pub iterations: usize,
    pub converged: bool,
    pub unpenalized: Support,
}

impl LassoFit {
    pub fn support(&self) -> &crate::model::Support {
        self.beta.support()
    }
}

/// `sign(z) * max(|z| - t, 0)`.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn penalized_objective(
    resid: &DVector<f64>,
    beta: &DVector<f64>,
    lambda: f64,
    n: f64,
    free: &Support,
) -> f64 {
    let l1: f64 = beta
        .iter()
        .enumerate()
        .filter(|(j, _)| !free.contains(*j))
        .map(|(_, b)| b.abs())
        .sum();
    resid.norm_squared() / n + lambda / n * l1
}

/// Largest violation of the LASSO optimality conditions
/// `2 E_n[x_ij (y_i - x_i'beta)] = sign(beta_j) lambda/n` on the support and
/// `|2 E_n[x_ij (y_i - x_i'beta)]| <= lambda/n` off it. Unpenalized
/// coordinates need a zero gradient.
pub fn kkt_check(ds: &Dataset, fit: &LassoFit) -> Result<f64> {
    let resid = ds.residuals(fit.beta.values())?;
    Ok(kkt_from_residual(
        ds,
        fit.beta.values(),
        &resid,
        fit.lambda,
        &fit.unpenalized,
    ))
}

fn kkt_from_residual(
    ds: &Dataset,
    beta: &DVector<f64>,
    resid: &DVector<f64>,
    lambda: f64,
    free: &Support,
) -> f64 {
    let n = ds.n() as f64;
    let level = lambda / n;
    let grad = ds.x().tr_mul(resid) * (2.0 / n);
    let mut worst = 0.0f64;
    for (j, &g) in grad.iter().enumerate() {
        let b = beta[j];
        let v = if free.contains(j) {
            g.abs()
        } else if b != 0.0 {
            (g - b.signum() * level).abs()
        } else {
            (g.abs() - level).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Solves the LASSO problem at penalty level `lambda` on a normalized dataset.
pub fn solve_lasso(ds: &Dataset, lambda: f64, opts: &SolverOptions) -> Result<LassoFit> {
    ds.require_normalized()?;
    opts.validate()?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Argument(format!("lambda must be > 0, got {lambda}")));
    }
    let (n_obs, p) = (ds.n(), ds.p());
    let n = n_obs as f64;
    let x = ds.x();

    let mut beta = match &opts.warm_start {
        Some(w) if w.len() == p => w.values().clone(),
        Some(w) => return Err(Error::dim("warm_start", w.len(), p)),
        None => DVector::zeros(p),
    };
    let mut resid = ds.residuals(&beta)?;
    let col_ms: Vec<f64> = x.column_iter().map(|c| c.norm_squared() / n).collect();
    opts.unpenalized.check_bounds(p)?;
    let free = &opts.unpenalized;
    let thresh: Vec<f64> = (0..p)
        .map(|j| {
            if free.contains(j) {
                0.0
            } else {
                lambda / (2.0 * n)
            }
        })
        .collect();
    let kkt_abs = opts.kkt_tol * lambda / n;

    #[cfg(debug_assertions)]
    let mut last_obj = penalized_objective(&resid, &beta, lambda, n, free);

    let mut sweeps = 0;
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            let col = x.column(j);
            let old = beta[j];
            let z = col.dot(&resid) / n + col_ms[j] * old;
            let new = soft_threshold(z, thresh[j]) / col_ms[j];
            if new != old {
                resid.axpy(old - new, &col, 1.0);
                beta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }

        #[cfg(debug_assertions)]
        {
            let obj = penalized_objective(&resid, &beta, lambda, n, free);
            debug_assert!(
                obj <= last_obj + 1e-12 * last_obj.abs().max(1.0),
                "objective increased across a sweep: {last_obj} -> {obj}"
            );
            last_obj = obj;
        }

        if max_change < opts.coord_tol {
            // Recompute the residual to shed accumulated rounding before certifying.
            resid = ds.residuals(&beta)?;
            kkt = kkt_from_residual(ds, &beta, &resid, lambda, free);
            if kkt <= kkt_abs {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        resid = ds.residuals(&beta)?;
        kkt = kkt_from_residual(ds, &beta, &resid, lambda, free);
    }
    let objective = penalized_objective(&resid, &beta, lambda, n, free);
    Ok(LassoFit {
        beta: CoefVector::new(beta),
        lambda,
        objective,
        kkt_violation: kkt,
        iterations: sweeps,
        converged,
        unpenalized: free.clone(),
    })
}

/// Fits a descending sequence of penalties, warm-starting each solve from the previous one.
pub fn lasso_path(ds: &Dataset, lambdas: &[f64], opts: &SolverOptions) -> Result<Vec<LassoFit>> {
    if lambdas.is_empty() {
        return Err(Error::Argument("empty penalty sequence".into()));
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Argument(
            "penalties must be strictly positive".into(),
        ));
    }
    if lambdas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Argument(
            "penalties must be sorted in descending order".into(),
        ));
    }
    let mut fits: Vec<LassoFit> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut o = opts.clone();
        if let Some(prev) = fits.last() {
            o.warm_start = Some(prev.beta.clone());
        }
        fits.push(solve_lasso(ds, lambda, &o)?);
    }
    Ok(fits)
}
