//! Exhaustive best-subset search: the oracle problem that defines the
//! sparse target, the l0-penalized estimator, and least squares on a known support.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{lstsq_min_norm, select_columns};
use crate::model::{CoefVector, Dataset, Support};
use crate::post::post_lasso;
use crate::subsets::{check_budget, count_up_to, par_chunks};

/// Absolute tolerance on the orthogonality of oracle residuals to the selected columns.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub beta0: CoefVector,
    pub support: Support,
    pub s: usize,
    /// `sqrt(E_n[r_i^2])` with `r = f - X beta0`.
    pub c_s: f64,
    /// `c_s^2 + sigma^2 s / n`.
    pub criterion_value: f64,
    pub k_max: usize,
    pub subsets_examined: u128,
}

#[derive(Debug, Clone, PartialEq)]
struct Best {
    value: f64,
    support: Vec<usize>,
    beta: DVector<f64>,
}

/// Minimizes `E_n[(target - X_S b)^2] + per_var * |S|` over all `|S| <= k_max`.
/// Ties go to the smaller support, then to the lexicographically first one.
fn best_subset(
    x: &DMatrix<f64>,
    target: &DVector<f64>,
    per_var: f64,
    k_max: usize,
) -> Result<(Best, u128)> {
    let (n, p) = x.shape();
    if target.len() != n {
        return Err(Error::dim("response", target.len(), n));
    }
    if k_max > n.min(p) {
        return Err(Error::Argument(format!(
            "k_max = {k_max} exceeds min(n, p) = {}",
            n.min(p)
        )));
    }
    let count = count_up_to(p, k_max);
    check_budget(count, "; reduce k_max or the number of columns")?;
    let nf = n as f64;

    let mut best = Best {
        value: target.norm_squared() / nf,
        support: Vec::new(),
        beta: DVector::zeros(0),
    };
    for k in 1..=k_max {
        let penalty = per_var * k as f64;
        let partials = par_chunks(p, k, |walker| {
            let mut local: Option<Best> = None;
            while let Some(idx) = walker.next() {
                let xs = select_columns(x, idx);
                let (b, _) = lstsq_min_norm(&xs, target);
                let value = (target - &xs * &b).norm_squared() / nf + penalty;
                if local.as_ref().is_none_or(|l| value < l.value) {
                    local = Some(Best {
                        value,
                        support: idx.to_vec(),
                        beta: b,
                    });
                }
            }
            local
        });
        // Strict comparison in chunk order keeps the earliest (smallest,
        // then lexicographically first) support among exact ties.
        for cand in partials.into_iter().flatten() {
            if cand.value < best.value {
                best = cand;
            }
        }
    }
    Ok((best, count))
}

fn expand(best: &Best, p: usize) -> CoefVector {
    let mut full = DVector::zeros(p);
    for (k, &j) in best.support.iter().enumerate() {
        full[j] = best.beta[k];
    }
    CoefVector::new(full)
}

/// Solves `min_b E_n[(f_i - x_i'b)^2] + sigma^2 ||b||_0 / n` over supports of size at most `k_max`.
pub fn solve_oracle(
    x: &DMatrix<f64>,
    f: &DVector<f64>,
    sigma: f64,
    k_max: usize,
) -> Result<OracleSolution> {
    if !(sigma >= 0.0) {
        return Err(Error::Argument(format!("sigma must be >= 0, got {sigma}")));
    }
    let n = x.nrows();
    let (best, examined) = best_subset(x, f, sigma * sigma / n as f64, k_max)?;
    let beta0 = expand(&best, x.ncols());
    let r = f - x * beta0.values();
    let c_s = (r.norm_squared() / n as f64).sqrt();
    Ok(OracleSolution {
        support: Support::new(best.support.iter().copied()),
        s: best.support.len(),
        beta0,
        c_s,
        criterion_value: best.value,
        k_max,
        subsets_examined: examined,
    })
}

/// Minimizes `Q(b) + (lambda/n) ||b||_0` over supports of size at most `k_max`.
pub fn solve_l0(ds: &Dataset, lambda: f64, k_max: usize) -> Result<CoefVector> {
    if !(lambda >= 0.0) {
        return Err(Error::Argument(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let (best, _) = best_subset(ds.x(), ds.y(), lambda / ds.n() as f64, k_max)?;
    Ok(expand(&best, ds.p()))
}

/// Least squares on a known support.
pub fn oracle_ols(ds: &Dataset, support: &Support) -> Result<CoefVector> {
    if support.len() >= ds.n() {
        return Err(Error::Precondition(format!(
            "support of size {} needs more than {} observations",
            support.len(),
            ds.n()
        )));
    }
    Ok(post_lasso(ds, support)?.beta)
}

/// Checks the oracle's first-order conditions: residuals orthogonal to the
/// selected columns, and (for `sigma > 0`) `||E_n[x_i r_i]||_inf <= min(sigma/sqrt(n), c_s)`.
/// Returns `||E_n[x_i r_i]||_inf`.
///
/// The off-support bound relies on the search having been allowed to add
/// one more column, so it is only enforced when `sol.s < sol.k_max` or the
/// search covered every size. Columns are assumed normalized.
pub fn verify_orthogonality(
    sol: &OracleSolution,
    x: &DMatrix<f64>,
    f: &DVector<f64>,
    sigma: f64,
    n: usize,
) -> Result<f64> {
    if x.nrows() != n || f.len() != n {
        return Err(Error::dim("f", f.len(), n));
    }
    let r = f - x * sol.beta0.values();
    let g = x.tr_mul(&r) / n as f64;
    let sup = g.amax();
    for j in sol.support.iter() {
        if g[j].abs() > ORTHOGONALITY_TOL {
            return Err(Error::OracleInconsistency(format!(
                "residual not orthogonal to selected column {j}: E_n[x r] = {:e}",
                g[j]
            )));
        }
    }
    let can_grow = sol.s < sol.k_max || sol.k_max >= x.ncols().min(n);
    if sigma > 0.0 && can_grow {
        let bound = (sigma / (n as f64).sqrt()).min(sol.c_s);
        if sup > bound + ORTHOGONALITY_TOL {
            return Err(Error::OracleInconsistency(format!(
                "||E_n[x r]||_inf = {sup:e} exceeds min(sigma/sqrt(n), c_s) = {bound:e}"
            )));
        }
    }
    Ok(sup)
}
