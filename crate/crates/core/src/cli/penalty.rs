use std::path::PathBuf;

use clap::Args;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{num, to_value, Outcome, Table};
use crate::error::{Error, Result};
use crate::io::read_csv;
use crate::model::{normalize_columns, Dataset};
use crate::penalty::{
    lambda_x_independent, penalty_quantile, quantile_interval, simulate_max_scores,
    tail_bound_check, PenaltySpec, MIN_RELIABLE_DRAWS,
};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::sim::ar1_rows;

#[derive(Debug, Clone, Args)]
pub struct PenaltyArgs {
    /// Design to simulate the X-dependent quantile on; without it an
    /// intercept plus AR(1) Gaussian design of size n x p is drawn.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub p: usize,
    /// Correlation of the drawn design.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.1)]
    pub c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    /// Coverage of the reported interval for the simulated quantile.
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub data: Option<PathBuf>,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub alpha: f64,
    pub c: f64,
    pub sigma: f64,
    pub draws: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl PenaltyArgs {
    pub fn resolve(&self, seed: u64) -> PenaltyConfig {
        PenaltyConfig {
            data: self.data.clone(),
            n: self.n,
            p: self.p,
            rho: self.rho,
            alpha: self.alpha,
            c: self.c,
            sigma: self.sigma,
            draws: self.draws,
            confidence: self.confidence,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct PenaltyResult {
    n: usize,
    p: usize,
    design: &'static str,
    alpha: f64,
    c: f64,
    sigma: f64,
    lambda_x_independent: f64,
    lambda_x_dependent: f64,
    /// `lambda_x_dependent` at the ends of the quantile interval.
    lambda_x_dependent_interval: (f64, f64),
    quantile: f64,
    quantile_interval: (f64, f64),
    confidence: f64,
    draws: usize,
    /// `sqrt(n) Phi^{-1}(1 - alpha/2p)` and `sqrt(2 n log(2p/alpha))`.
    tail_chain: (f64, f64),
}

fn drawn_design(cfg: &PenaltyConfig) -> Result<Dataset> {
    if cfg.n < 2 || cfg.p < 2 {
        return Err(Error::Argument("need n >= 2 and p >= 2".into()));
    }
    if !(cfg.rho > -1.0 && cfg.rho < 1.0) {
        return Err(Error::Domain(format!(
            "rho must lie in (-1, 1), got {}",
            cfg.rho
        )));
    }
    let mut rng = stream_rng(cfg.seed, Stream::Design, 0);
    let z = ar1_rows(&mut rng, cfg.n, cfg.p - 1, cfg.rho);
    let mut x = DMatrix::from_element(cfg.n, cfg.p, 1.0);
    x.view_mut((0, 1), (cfg.n, cfg.p - 1)).copy_from(&z);
    let (xn, scales) = normalize_columns(&x)?;
    let names = (0..cfg.p).map(|j| format!("x{j}")).collect();
    Dataset::from_normalized(xn, nalgebra::DVector::zeros(cfg.n), scales, names)
}

pub(super) fn run(cfg: &PenaltyConfig) -> Result<Outcome> {
    let spec = PenaltySpec {
        c: cfg.c,
        alpha: cfg.alpha,
        sigma: cfg.sigma,
        sim_draws: cfg.draws,
        seed: derive_seed(cfg.seed, Stream::Penalty, 0),
        ..PenaltySpec::default()
    };
    spec.validate()?;
    if !(cfg.confidence > 0.0 && cfg.confidence < 1.0) {
        return Err(Error::Domain(format!(
            "confidence must lie in (0, 1), got {}",
            cfg.confidence
        )));
    }
    let (ds, design) = match &cfg.data {
        Some(path) => (read_csv(path)?.normalize(), "data"),
        None => (drawn_design(cfg)?, "ar1"),
    };
    let (n, p) = (ds.n(), ds.p());
    let quantile = penalty_quantile(&ds, &spec)?;
    let sims = simulate_max_scores(&ds, cfg.draws, spec.seed)?;
    let interval = quantile_interval(&sims, 1.0 - cfg.alpha, cfg.confidence)?;
    let scale = 2.0 * cfg.c * cfg.sigma;
    let mut warnings = Vec::new();
    if cfg.draws < MIN_RELIABLE_DRAWS {
        warnings.push(format!("only {} simulation draws", cfg.draws));
    }
    let result = PenaltyResult {
        n,
        p,
        design,
        alpha: cfg.alpha,
        c: cfg.c,
        sigma: cfg.sigma,
        lambda_x_independent: lambda_x_independent(n, p, &spec)?,
        lambda_x_dependent: scale * quantile.value,
        lambda_x_dependent_interval: (scale * interval.0, scale * interval.1),
        quantile: quantile.value,
        quantile_interval: interval,
        confidence: cfg.confidence,
        draws: cfg.draws,
        tail_chain: tail_bound_check(n, p, cfg.alpha)?,
    };
    let mut table = Table::new(&["quantity", "value"]);
    for (k, v) in [
        ("lambda_x_independent", result.lambda_x_independent),
        ("lambda_x_dependent", result.lambda_x_dependent),
        (
            "lambda_x_dependent_low",
            result.lambda_x_dependent_interval.0,
        ),
        (
            "lambda_x_dependent_high",
            result.lambda_x_dependent_interval.1,
        ),
        ("quantile", result.quantile),
        ("normal_tail_bound", result.tail_chain.0),
        ("log_tail_bound", result.tail_chain.1),
    ] {
        table.push(vec![k.to_string(), num(v)]);
    }
    Ok(Outcome {
        result: to_value(&result)?,
        warnings,
        table,
        extra_files: Vec::new(),
    })
}
