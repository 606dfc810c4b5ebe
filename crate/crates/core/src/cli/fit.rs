use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use super::{num, resolve_columns, to_value, Outcome, RuleArg, Table};
use crate::error::{Error, Result};
use crate::io::read_csv;
use crate::model::Support;
use crate::penalty::{penalty_quantile, PenaltyRule, PenaltySpec, SimulatedQuantile};
use crate::post::{
    estimate_sigma_with_solver, initial_sigma, ols_inference, SigmaEstimate, SigmaMethod,
};
use crate::rng::{derive_seed, Stream};
use crate::solver::{solve_lasso, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SigmaModeArg {
    PostLasso,
    Lasso,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV file with a header row and a `y` column.
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = RuleArg::Xdep)]
    pub rule: RuleArg,
    #[arg(long, default_value_t = 1.1)]
    pub c: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Gaussian draws for the X-dependent penalty quantile.
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    /// Known noise level; skips the iterative estimate.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Refit used by the iterative noise estimate behind lambda_it.
    #[arg(long, value_enum, default_value_t = SigmaModeArg::PostLasso)]
    pub sigma_mode: SigmaModeArg,
    #[arg(long, default_value_t = 1e-4)]
    pub nu: f64,
    #[arg(long, default_value_t = 20)]
    pub max_iter: usize,
    /// Penalties lambda/k fitted in addition to lambda_it.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub lambda_divisors: Vec<f64>,
    /// Columns kept in every model (left out of the penalty).
    #[arg(long, value_delimiter = ',')]
    pub keep: Vec<String>,
    /// Leave the intercept out of the penalty.
    #[arg(long)]
    pub free_intercept: bool,
    /// Confidence level of the reported intervals.
    #[arg(long, default_value_t = 0.9)]
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub data: PathBuf,
    pub rule: PenaltyRule,
    pub c: f64,
    pub alpha: f64,
    pub draws: usize,
    pub sigma: Option<f64>,
    pub sigma_mode: SigmaMethod,
    pub nu: f64,
    pub max_iter: usize,
    pub lambda_divisors: Vec<f64>,
    pub keep: Vec<String>,
    pub penalize_intercept: bool,
    pub level: f64,
    pub seed: u64,
}

impl FitArgs {
    pub fn resolve(&self, seed: u64) -> FitConfig {
        FitConfig {
            data: self.data.clone(),
            rule: self.rule.into(),
            c: self.c,
            alpha: self.alpha,
            draws: self.draws,
            sigma: self.sigma,
            sigma_mode: match self.sigma_mode {
                SigmaModeArg::PostLasso => SigmaMethod::PostLasso,
                SigmaModeArg::Lasso => SigmaMethod::Lasso,
            },
            nu: self.nu,
            max_iter: self.max_iter,
            lambda_divisors: self.lambda_divisors.clone(),
            keep: self.keep.clone(),
            penalize_intercept: !self.free_intercept,
            level: self.level,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct NamedValue {
    name: String,
    value: f64,
}

#[derive(Debug, Clone, Serialize)]
struct InferenceRow {
    name: String,
    coefficient: f64,
    std_error: f64,
    ci_low: f64,
    ci_high: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Inference {
    level: f64,
    dof: usize,
    critical_value: f64,
    rows: Vec<InferenceRow>,
}

#[derive(Debug, Clone, Serialize)]
struct FitModel {
    label: String,
    lambda: f64,
    selected: Vec<String>,
    /// Nonzero LASSO coefficients in original units.
    lasso: Vec<NamedValue>,
    /// Post-LASSO (OLS on the selected columns) in original units.
    inference: Option<Inference>,
    converged: bool,
    kkt_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
struct FitResult {
    n: usize,
    p: usize,
    variables: Vec<String>,
    /// Root-mean-square of each column before normalization.
    scales: Vec<f64>,
    unpenalized: Vec<String>,
    quantile: SimulatedQuantile,
    sigma_initial: f64,
    /// Noise level behind `lambda` (the initial upper bound unless given).
    sigma_for_lambda: f64,
    lambda: f64,
    sigma_iteration: Option<SigmaEstimate>,
    lambda_it: Option<f64>,
    models: Vec<FitModel>,
}

pub(super) fn run(cfg: &FitConfig) -> Result<Outcome> {
    if cfg
        .lambda_divisors
        .iter()
        .any(|d| !(*d > 0.0) || !d.is_finite())
    {
        return Err(Error::Argument("lambda divisors must be positive".into()));
    }
    if let Some(s) = cfg.sigma {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("sigma must be > 0, got {s}")));
        }
    }
    let ds = read_csv(&cfg.data)?.normalize();
    let mut free = resolve_columns(&ds, &cfg.keep)?;
    if !cfg.penalize_intercept {
        free = free.union(&Support::new([0]));
    }
    let opts = SolverOptions::default().with_unpenalized(free.clone());
    let spec = PenaltySpec {
        rule: cfg.rule,
        c: cfg.c,
        alpha: cfg.alpha,
        sigma: 1.0,
        sim_draws: cfg.draws,
        seed: derive_seed(cfg.seed, Stream::Penalty, 0),
        lambda: None,
    };
    let quantile = penalty_quantile(&ds, &spec)?;
    let mut warnings = Vec::new();
    if quantile.low_draws {
        warnings.push(format!(
            "only {} simulation draws for the penalty quantile",
            quantile.draws
        ));
    }
    let sigma_initial = initial_sigma(ds.y());
    let sigma_for_lambda = cfg.sigma.unwrap_or(sigma_initial);
    let lambda = 2.0 * cfg.c * sigma_for_lambda * quantile.value;

    let sigma_iteration = if cfg.sigma.is_some() {
        None
    } else {
        match estimate_sigma_with_solver(
            &ds,
            cfg.c,
            quantile.value,
            cfg.sigma_mode,
            cfg.nu,
            cfg.max_iter,
            &opts,
        ) {
            Ok(est) => {
                if !est.converged {
                    warnings.push(format!(
                        "noise estimate stopped at the iteration cap ({}) before reaching tolerance {}",
                        cfg.max_iter, cfg.nu
                    ));
                }
                Some(est)
            }
            Err(e @ (Error::DegenerateRefit { .. } | Error::NonInformative(_))) => {
                warnings.push(format!("lambda_it skipped: {e}"));
                None
            }
            Err(e) => return Err(e),
        }
    };
    let lambda_it = sigma_iteration.as_ref().map(|e| e.lambda(cfg.c));

    let mut penalties: Vec<(String, f64)> = Vec::new();
    if let Some(l) = lambda_it {
        penalties.push(("lambda_it".into(), l));
    }
    for d in &cfg.lambda_divisors {
        let label = if *d == 1.0 {
            "lambda".to_string()
        } else {
            format!("lambda/{d}")
        };
        penalties.push((label, lambda / d));
    }

    let names = ds.names();
    let mut models = Vec::with_capacity(penalties.len());
    let mut table = Table::new(&[
        "model",
        "lambda",
        "variable",
        "lasso",
        "coefficient",
        "std_error",
        "ci_low",
        "ci_high",
    ]);
    for (label, lam) in penalties {
        let fit = solve_lasso(&ds, lam, &opts)?;
        if !fit.converged {
            warnings.push(format!(
                "{label}: solver stopped before certifying optimality"
            ));
        }
        let support = fit.support().clone();
        let lasso_orig = ds.to_original_scale(fit.beta.values());
        let lasso: Vec<NamedValue> = support
            .iter()
            .map(|j| NamedValue {
                name: names[j].clone(),
                value: lasso_orig[j],
            })
            .collect();
        let inference = if support.is_empty() {
            None
        } else if support.len() >= ds.n() {
            warnings.push(format!(
                "{label}: {} selected columns with n = {}; inference skipped",
                support.len(),
                ds.n()
            ));
            None
        } else {
            match ols_inference(&ds, &support, cfg.level) {
                Ok(inf) => Some(Inference {
                    level: inf.level,
                    dof: inf.dof,
                    critical_value: inf.critical_value,
                    rows: support
                        .iter()
                        .enumerate()
                        .map(|(k, j)| InferenceRow {
                            name: names[j].clone(),
                            coefficient: inf.coefficients[k],
                            std_error: inf.std_errors[k],
                            ci_low: inf.intervals[k].0,
                            ci_high: inf.intervals[k].1,
                        })
                        .collect(),
                }),
                Err(Error::Singular) => {
                    warnings.push(format!(
                        "{label}: selected columns are collinear; inference skipped"
                    ));
                    None
                }
                Err(e) => return Err(e),
            }
        };
        if support.is_empty() {
            table.push(vec![
                label.clone(),
                num(lam),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]);
        }
        for (k, j) in support.iter().enumerate() {
            let mut row = vec![
                label.clone(),
                num(lam),
                names[j].clone(),
                num(lasso_orig[j]),
            ];
            match &inference {
                Some(inf) => {
                    let r = &inf.rows[k];
                    row.extend([
                        num(r.coefficient),
                        num(r.std_error),
                        num(r.ci_low),
                        num(r.ci_high),
                    ]);
                }
                None => row.extend([String::new(), String::new(), String::new(), String::new()]),
            }
            table.push(row);
        }
        models.push(FitModel {
            label,
            lambda: lam,
            selected: support.iter().map(|j| names[j].clone()).collect(),
            lasso,
            inference,
            converged: fit.converged,
            kkt_violation: fit.kkt_violation,
        });
    }

    let result = FitResult {
        n: ds.n(),
        p: ds.p(),
        variables: names.to_vec(),
        scales: ds.scales().iter().copied().collect(),
        unpenalized: free.iter().map(|j| names[j].clone()).collect(),
        quantile,
        sigma_initial,
        sigma_for_lambda,
        lambda,
        sigma_iteration,
        lambda_it,
        models,
    };
    Ok(Outcome {
        result: to_value(&result)?,
        warnings,
        table,
        extra_files: Vec::new(),
    })
}
