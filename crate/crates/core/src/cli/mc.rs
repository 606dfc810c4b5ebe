use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};

use super::{num, to_value, Outcome, RuleArg, Table};
use crate::error::{Error, Result};
use crate::sim::{run_mc, McConfig, SigmaMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum McSigmaArg {
    Known,
    Lasso,
    PostLasso,
    Initial,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    /// TOML file with any `McConfig` fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Preset: 1 (sigma^2 = 1) or 2 (sigma^2 = 0.1).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub design: Option<u8>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    #[arg(long, value_enum)]
    pub sigma_mode: Option<McSigmaArg>,
    /// Gaussian draws per rep for the X-dependent penalty.
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Include the intercept in the penalty.
    #[arg(long)]
    pub penalize_intercept: bool,
    /// Directory for `selected_size.csv` and `true_positives.csv` (columns `bin,count`).
    #[arg(long)]
    pub histograms: Option<PathBuf>,
}

impl McArgs {
    pub fn resolve(&self, seed: Option<u64>) -> Result<McConfig> {
        let mut cfg = match (&self.config, self.design) {
            (Some(_), Some(_)) => {
                return Err(Error::Argument(
                    "--config and --design are mutually exclusive".into(),
                ))
            }
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
                toml::from_str(&text)
                    .map_err(|e| Error::Argument(format!("{}: {e}", path.display())))?
            }
            (None, Some(2)) => McConfig::design2(),
            (None, _) => McConfig::design1(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { cfg.$field = v; })* };
        }
        set!(reps, n, p, s, rho, sigma2, c, alpha, nu, max_iter);
        if let Some(d) = self.draws {
            cfg.sim_draws = d;
        }
        if let Some(r) = self.rule {
            cfg.penalty_rule = r.into();
        }
        if let Some(m) = self.sigma_mode {
            cfg.sigma_mode = match m {
                McSigmaArg::Known => SigmaMode::Known,
                McSigmaArg::Lasso => SigmaMode::EstimatedLasso,
                McSigmaArg::PostLasso => SigmaMode::EstimatedPostLasso,
                McSigmaArg::Initial => SigmaMode::Initial,
            };
        }
        if self.penalize_intercept {
            cfg.penalize_intercept = true;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

fn histogram_csv(counts: &[u64]) -> String {
    let mut out = String::from("bin,count\n");
    for (k, c) in counts.iter().enumerate() {
        out.push_str(&format!("{k},{c}\n"));
    }
    out
}

pub(super) fn run(cfg: &McConfig, histograms: Option<&Path>) -> Result<Outcome> {
    let report = run_mc(cfg)?;
    let mut warnings = Vec::new();
    if report.failures > 0 {
        warnings.push(format!(
            "{} of {} repetitions failed and were left out of the aggregates",
            report.failures, cfg.reps
        ));
    }
    if report.flagged {
        warnings
            .push("more than 1% of repetitions failed; treat the aggregates with caution".into());
    }
    let mut table = Table::new(&[
        "estimator",
        "mean_l0",
        "bias_norm",
        "mean_pred_error",
        "pred_error_se",
    ]);
    for (name, e) in [
        ("lasso", &report.lasso),
        ("post_lasso", &report.post_lasso),
        ("oracle", &report.oracle),
    ] {
        table.push(vec![
            name.to_string(),
            num(e.mean_l0),
            num(e.bias_norm),
            num(e.mean_pred_error),
            num(e.pred_error_se),
        ]);
    }
    let extra_files = match histograms {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            vec![
                (
                    dir.join("selected_size.csv"),
                    histogram_csv(&report.selected_size),
                ),
                (
                    dir.join("true_positives.csv"),
                    histogram_csv(&report.true_positives),
                ),
            ]
        }
        None => Vec::new(),
    };
    Ok(Outcome {
        result: to_value(&report)?,
        warnings,
        table,
        extra_files,
    })
}
