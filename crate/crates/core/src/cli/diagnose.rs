use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use super::{num, resolve_columns, to_value, Outcome, Table};
use crate::eigen::{
    cbar, re_estimate, sparse_eigs_exact, sparse_eigs_sampled, theorem1_bound, theorem2_bound,
    ReEstimate, SparseEigenReport, Theorem2Bound,
};
use crate::error::{Error, Result};
use crate::io::read_csv;
use crate::model::Support;
use crate::penalty::{penalty_quantile, PenaltySpec};
use crate::post::{estimate_sigma_with_quantile, SigmaMethod};
use crate::rng::{derive_seed, Stream};
use crate::solver::{solve_lasso, SolverOptions};

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    /// CSV file with a header row and a `y` column.
    pub data: PathBuf,
    /// Columns forming T (names; the intercept is `intercept`). Defaults to
    /// the LASSO support at the data-driven penalty.
    #[arg(long, value_delimiter = ',')]
    pub support: Vec<String>,
    /// Largest m in the sparse-eigenvalue profile.
    #[arg(long, default_value_t = 3)]
    pub m_max: usize,
    /// Random-subset estimates instead of exhaustive enumeration.
    #[arg(long)]
    pub sampled: bool,
    /// Draws for sampled eigenvalues and the sampled RE estimate.
    #[arg(long, default_value_t = 2000)]
    pub draws: usize,
    #[arg(long, default_value_t = 1.1)]
    pub c: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Draws for the X-dependent penalty quantile.
    #[arg(long, default_value_t = 10_000)]
    pub penalty_draws: usize,
    /// Penalty level for the rate bounds; defaults to the data-driven one.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Noise level for the data-driven penalty; estimated when absent.
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseConfig {
    pub data: PathBuf,
    pub support: Vec<String>,
    pub m_max: usize,
    pub sampled: bool,
    pub draws: usize,
    pub c: f64,
    pub alpha: f64,
    pub penalty_draws: usize,
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    pub seed: u64,
}

impl DiagnoseArgs {
    pub fn resolve(&self, seed: u64) -> DiagnoseConfig {
        DiagnoseConfig {
            data: self.data.clone(),
            support: self.support.clone(),
            m_max: self.m_max,
            sampled: self.sampled,
            draws: self.draws,
            c: self.c,
            alpha: self.alpha,
            penalty_draws: self.penalty_draws,
            lambda: self.lambda,
            sigma: self.sigma,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct DiagnoseResult {
    n: usize,
    p: usize,
    support: Vec<String>,
    /// `given` or `estimated`.
    support_source: &'static str,
    s: usize,
    /// Per-m sparse eigenvalues, aligned with `m`.
    m: Vec<usize>,
    kappa: Vec<f64>,
    phi: Vec<f64>,
    mu: Vec<f64>,
    /// Whether the eigenvalues come from exhaustive enumeration.
    exact: bool,
    cbar: f64,
    re_lower: Option<f64>,
    re_sampled: Option<f64>,
    /// The `m` at which `re_lower` was attained.
    re_m_used: Option<usize>,
    lambda: f64,
    sigma: Option<f64>,
    /// The rate bounds treat the approximation error `c_s` as zero.
    c_s_assumed: f64,
    theorem1_bound: Option<f64>,
    theorem2_bound: Option<Theorem2Bound>,
}

pub(super) fn run(cfg: &DiagnoseConfig) -> Result<Outcome> {
    if cfg.m_max == 0 {
        return Err(Error::Argument("--m-max must be >= 1".into()));
    }
    let ds = read_csv(&cfg.data)?.normalize();
    let cb = cbar(cfg.c)?;
    let mut warnings = Vec::new();

    // The data-driven penalty sets the bounds unless --lambda is given and
    // selects T unless --support is.
    let data_driven = if cfg.lambda.is_none() || cfg.support.is_empty() {
        let spec = PenaltySpec {
            c: cfg.c,
            alpha: cfg.alpha,
            sim_draws: cfg.penalty_draws,
            seed: derive_seed(cfg.seed, Stream::Penalty, 0),
            ..PenaltySpec::default()
        };
        let q = penalty_quantile(&ds, &spec)?.value;
        let sigma = match cfg.sigma {
            Some(s) if s > 0.0 => s,
            Some(s) => return Err(Error::Domain(format!("sigma must be > 0, got {s}"))),
            None => {
                estimate_sigma_with_quantile(&ds, cfg.c, q, SigmaMethod::PostLasso, 1e-4, 20)?
                    .final_sigma
            }
        };
        Some((2.0 * cfg.c * sigma * q, sigma))
    } else {
        None
    };
    let sigma = data_driven.map(|d| d.1).or(cfg.sigma);
    let lambda = match (cfg.lambda, data_driven) {
        (Some(l), _) => l,
        (None, Some((l, _))) => l,
        (None, None) => unreachable!("data-driven penalty computed when --lambda is absent"),
    };
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
    }

    let (support, source) = if cfg.support.is_empty() {
        let select_at = data_driven.map_or(lambda, |d| d.0);
        let fit = solve_lasso(&ds, select_at, &SolverOptions::default())?;
        (fit.support().clone(), "estimated")
    } else {
        (resolve_columns(&ds, &cfg.support)?, "given")
    };
    let s = support.len();

    let eig_seed = derive_seed(cfg.seed, Stream::Subsets, 0);
    let mut reports: Vec<SparseEigenReport> = Vec::with_capacity(cfg.m_max);
    for m in 1..=cfg.m_max {
        reports.push(if cfg.sampled {
            sparse_eigs_sampled(&ds, &support, m, cfg.draws, eig_seed)?
        } else {
            sparse_eigs_exact(&ds, &support, m)?
        });
    }

    let (re, theorem1_bound, theorem2_bound) =
        bounds(&ds, &support, cb, cfg, lambda, &mut warnings)?;

    let names = ds.names();
    let result = DiagnoseResult {
        n: ds.n(),
        p: ds.p(),
        support: support.iter().map(|j| names[j].clone()).collect(),
        support_source: source,
        s,
        m: reports.iter().map(|r| r.m).collect(),
        kappa: reports.iter().map(|r| r.kappa_m).collect(),
        phi: reports.iter().map(|r| r.phi_m).collect(),
        mu: reports.iter().map(|r| r.mu_m).collect(),
        exact: !cfg.sampled,
        cbar: cb,
        re_lower: re.as_ref().map(|r| r.lower_bound),
        re_sampled: re.as_ref().map(|r| r.sampled_upper),
        re_m_used: re.as_ref().map(|r| r.m_used),
        lambda,
        sigma,
        c_s_assumed: 0.0,
        theorem1_bound,
        theorem2_bound,
    };
    let mut table = Table::new(&["m", "kappa", "phi", "mu", "exact"]);
    for r in &reports {
        table.push(vec![
            r.m.to_string(),
            num(r.kappa_m),
            num(r.phi_m),
            num(r.mu_m),
            r.exact.to_string(),
        ]);
    }
    Ok(Outcome {
        result: to_value(&result)?,
        warnings,
        table,
        extra_files: Vec::new(),
    })
}

type Bounds = (Option<ReEstimate>, Option<f64>, Option<Theorem2Bound>);

fn bounds(
    ds: &crate::model::Dataset,
    support: &Support,
    cb: f64,
    cfg: &DiagnoseConfig,
    lambda: f64,
    warnings: &mut Vec<String>,
) -> Result<Bounds> {
    let s = support.len();
    if s == 0 {
        warnings.push("T is empty; restricted-eigenvalue and rate bounds skipped".into());
        return Ok((None, None, None));
    }
    let re = re_estimate(
        ds,
        support,
        cb,
        cfg.draws,
        derive_seed(cfg.seed, Stream::Cone, 0),
    )?;
    if re.lower_bound <= 0.0 {
        warnings.push(
            "certified restricted-eigenvalue bound is zero at every enumerable m; rate bounds skipped"
                .into(),
        );
        return Ok((Some(re), None, None));
    }
    let t1 = theorem1_bound(lambda, s, ds.n(), re.lower_bound, cfg.c, 0.0)?;
    let t2 = match theorem2_bound(
        ds,
        support,
        lambda,
        s,
        re.lower_bound,
        cfg.c,
        0.0,
        ds.n(),
        None,
    ) {
        Ok(b) => {
            if !b.conclusive {
                warnings.push(format!(
                    "sparsity bound search stopped at m = {} without a member",
                    b.m_cap
                ));
            }
            Some(b)
        }
        Err(e @ Error::Budget { .. }) => {
            warnings.push(format!("sparsity bound skipped: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    Ok((Some(re), Some(t1), t2))
}
