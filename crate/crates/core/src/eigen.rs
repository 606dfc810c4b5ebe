//! Restricted sparse eigenvalues, restricted-eigenvalue bounds, and
//! evaluators for the LASSO performance bounds that depend on them.
//!
//! Conventions: `kappa(m)^2` is the smallest and `phi(m)` the largest value
//! of `||d||_{2,n}^2 / ||d||^2` over vectors with at most `m` non-zeros
//! outside `T`; `mu(m) = sqrt(phi(m)) / kappa(m)`. `kappa` is reported as a
//! square root, `phi` is not.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram, principal_submatrix, sym_extreme_eigs};
use crate::model::{CoefVector, Dataset, Support};
use crate::rng::{std_normal, stream_rng, Stream};
use crate::subsets::{binomial, check_budget, par_chunks, ENUMERATION_BUDGET};

/// Upper end of the default scan for the sparsity bound's admissible `m`.
pub const DEFAULT_M_CAP: usize = 5000;

/// Cap on `subsets * dim^3` in the certified bound's scan over `m`.
const WORK_BUDGET: u128 = ENUMERATION_BUDGET * 125;

const BUDGET_HINT: &str = "; use sparse_eigs_sampled (diagnose --sampled) instead";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseEigenReport {
    pub m: usize,
    pub support: Support,
    pub kappa_m: f64,
    pub phi_m: f64,
    pub mu_m: f64,
    pub exact: bool,
}

impl SparseEigenReport {
    fn from_extremes(m: usize, support: &Support, lo: f64, hi: f64, exact: bool) -> Self {
        let kappa_m = lo.max(0.0).sqrt();
        let phi_m = hi.max(0.0);
        SparseEigenReport {
            m,
            support: support.clone(),
            kappa_m,
            phi_m,
            mu_m: phi_m.sqrt() / kappa_m,
            exact,
        }
    }
}

/// `c_bar = (c + 1) / (c - 1)`.
pub fn cbar(c: f64) -> Result<f64> {
    if !(c > 1.0) {
        return Err(Error::Domain(format!("c must be > 1, got {c}")));
    }
    Ok((c + 1.0) / (c - 1.0))
}

fn check_support(support: &Support, p: usize) -> Result<()> {
    support.check_bounds(p)
}

/// Extreme eigenvalues of the Gram submatrix on `T ∪ J` over all `J` of
/// size `k` drawn from `off`.
fn extremes_over_subsets(g: &DMatrix<f64>, t: &[usize], off: &[usize], k: usize) -> (f64, f64) {
    let parts = par_chunks(off.len(), k, |walker| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut idx = Vec::with_capacity(t.len() + k);
        while let Some(j) = walker.next() {
            idx.clear();
            idx.extend_from_slice(t);
            idx.extend(j.iter().map(|&a| off[a]));
            let (l, h) = sym_extreme_eigs(&principal_submatrix(g, &idx));
            lo = lo.min(l);
            hi = hi.max(h);
        }
        (lo, hi)
    });
    parts
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (l, h)| {
            (a.min(l), b.max(h))
        })
}

/// Exact `kappa(m)`, `phi(m)` from a precomputed Gram matrix.
///
/// Eigenvalue interlacing makes the extremes monotone in the index set, so
/// only the largest admissible `J` (size `min(m, p - |T|)`) need be visited.
pub fn sparse_eigs_from_gram(
    g: &DMatrix<f64>,
    support: &Support,
    m: usize,
) -> Result<SparseEigenReport> {
    let p = g.nrows();
    check_support(support, p)?;
    let off = support.complement(p);
    let k = m.min(off.len());
    if support.is_empty() && k == 0 {
        return Err(Error::Domain(
            "restricted eigenvalues need a non-empty index set (T empty and m = 0)".into(),
        ));
    }
    check_budget(binomial(off.len(), k), BUDGET_HINT)?;
    let (lo, hi) = extremes_over_subsets(g, support.as_slice(), off.as_slice(), k);
    Ok(SparseEigenReport::from_extremes(m, support, lo, hi, true))
}

pub fn sparse_eigs_exact(ds: &Dataset, support: &Support, m: usize) -> Result<SparseEigenReport> {
    sparse_eigs_from_gram(&gram(ds.x()), support, m)
}

/// Exact reports for `m = m_from..=m_to`.
pub fn sparse_eig_profile(
    ds: &Dataset,
    support: &Support,
    m_from: usize,
    m_to: usize,
) -> Result<Vec<SparseEigenReport>> {
    let g = gram(ds.x());
    (m_from..=m_to)
        .map(|m| sparse_eigs_from_gram(&g, support, m))
        .collect()
}

/// Randomized estimate over `draws` random off-support sets of size
/// `min(m, p - |T|)`. `kappa` is over- and `phi` under-estimated.
pub fn sparse_eigs_sampled(
    ds: &Dataset,
    support: &Support,
    m: usize,
    draws: usize,
    seed: u64,
) -> Result<SparseEigenReport> {
    check_support(support, ds.p())?;
    if draws == 0 {
        return Err(Error::Argument("draws must be >= 1".into()));
    }
    let g = gram(ds.x());
    let off = support.complement(ds.p());
    let k = m.min(off.len());
    if support.is_empty() && k == 0 {
        return Err(Error::Domain(
            "restricted eigenvalues need a non-empty index set (T empty and m = 0)".into(),
        ));
    }
    let (lo, hi) = (0..draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = stream_rng(seed, Stream::Subsets, d as u64);
            let mut idx: Vec<usize> = support.as_slice().to_vec();
            idx.extend(
                sample_indices(&mut rng, off.len(), k)
                    .into_iter()
                    .map(|a| off.as_slice()[a]),
            );
            sym_extreme_eigs(&principal_submatrix(&g, &idx))
        })
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY),
            |(a, b), (l, h)| (a.min(l), b.max(h)),
        );
    Ok(SparseEigenReport::from_extremes(m, support, lo, hi, false))
}

/// `max(0, kappa(m) (1 - mu(m) c_bar sqrt(s/m)))`.
pub fn re_lower_bound(report: &SparseEigenReport, s: usize, cbar: f64, m: usize) -> f64 {
    debug_assert!(m > 0);
    if report.kappa_m <= 0.0 {
        return 0.0;
    }
    let v = report.kappa_m * (1.0 - report.mu_m * cbar * (s as f64 / m as f64).sqrt());
    v.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReEstimate {
    pub cbar: f64,
    /// Certified: the true `kappa_cbar` is at least this.
    pub lower_bound: f64,
    /// Smallest cone objective seen while sampling; the true value is at most this.
    pub sampled_upper: f64,
    /// The `m` at which the lower bound was attained.
    pub m_used: usize,
}

/// Largest certified lower bound on `kappa_cbar` with `s = |T|`.
///
/// Maximizes the sparse-eigenvalue bound over every `m` in
/// `1..=p - |T|` whose enumeration fits the subset and work budgets. Because every
/// `d != 0` has at most `p - |T|` off-support non-zeros,
/// `kappa(p - |T|)` (the square root of the smallest Gram eigenvalue) is
/// itself a lower bound: `||d_T||_1 <= sqrt(s) ||d||`. It is included as the
/// `m = p - |T|` candidate.
pub fn certified_re_lower_bound(
    ds: &Dataset,
    support: &Support,
    cbar: f64,
) -> Result<(f64, usize)> {
    if support.is_empty() {
        return Err(Error::Domain(
            "restricted eigenvalue undefined for empty T".into(),
        ));
    }
    check_support(support, ds.p())?;
    let g = gram(ds.x());
    let s = support.len();
    let q = ds.p() - s;
    if q == 0 {
        let r = sparse_eigs_from_gram(&g, support, 0)?;
        return Ok((r.kappa_m, 0));
    }
    let mut best = (0.0f64, q);
    for m in 1..=q {
        // More than n columns are linearly dependent, so kappa(m) = 0 there.
        if s + m > ds.n() {
            break;
        }
        let dim = (s + m) as u128;
        if m < q && binomial(q, m).saturating_mul(dim.pow(3)) > WORK_BUDGET {
            continue;
        }
        let r = match sparse_eigs_from_gram(&g, support, m) {
            Ok(r) => r,
            Err(Error::Budget { .. }) => continue,
            Err(e) => return Err(e),
        };
        let mut v = re_lower_bound(&r, s, cbar, m);
        if m == q {
            v = v.max(r.kappa_m);
        }
        if v > best.0 {
            best = (v, m);
        }
    }
    Ok(best)
}

/// One cone direction: `d_T` uniform on the l1 sphere, `d_{T^c}` zero,
/// 1-sparse, or dense, scaled to l1 norm at most `c_bar`.
fn cone_direction<R: Rng>(
    rng: &mut R,
    t: &[usize],
    off: &[usize],
    p: usize,
    cbar: f64,
) -> DVector<f64> {
    let mut d = DVector::zeros(p);
    let mut l1 = 0.0;
    for &j in t {
        let e = -(1.0 - rng.random::<f64>()).ln();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        d[j] = sign * e;
        l1 += e;
    }
    for &j in t {
        d[j] /= l1;
    }
    if off.is_empty() {
        return d;
    }
    // Half the draws sit on the cone boundary, where the minimum usually lives.
    let radius = if rng.random::<bool>() {
        cbar
    } else {
        cbar * rng.random::<f64>()
    };
    match rng.random_range(0..3u8) {
        0 => {}
        1 => {
            let j = off[rng.random_range(0..off.len())];
            d[j] = if rng.random::<bool>() {
                radius
            } else {
                -radius
            };
        }
        _ => {
            let v: Vec<f64> = off.iter().map(|_| std_normal(rng)).collect();
            let norm: f64 = v.iter().map(|a| a.abs()).sum();
            if norm > 0.0 {
                for (&j, a) in off.iter().zip(v) {
                    d[j] = radius * a / norm;
                }
            }
        }
    }
    d
}

/// Running minimum of `sqrt(s) ||d||_{2,n} / ||d_T||_1` over `draws` sampled cone directions.
pub fn re_sampled(
    ds: &Dataset,
    support: &Support,
    cbar: f64,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if support.is_empty() {
        return Err(Error::Domain(
            "restricted eigenvalue undefined for empty T".into(),
        ));
    }
    check_support(support, ds.p())?;
    if draws == 0 {
        return Err(Error::Argument("draws must be >= 1".into()));
    }
    let g = gram(ds.x());
    let p = ds.p();
    let off = support.complement(p);
    let s = support.len() as f64;
    let min = (0..draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, Stream::Cone, k as u64);
            let d = cone_direction(&mut rng, support.as_slice(), off.as_slice(), p, cbar);
            let quad = d.dot(&(&g * &d)).max(0.0);
            // ||d_T||_1 = 1 by construction.
            s.sqrt() * quad.sqrt()
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(min)
}

pub fn re_estimate(
    ds: &Dataset,
    support: &Support,
    cbar: f64,
    draws: usize,
    seed: u64,
) -> Result<ReEstimate> {
    let (lower_bound, m_used) = certified_re_lower_bound(ds, support, cbar)?;
    let sampled_upper = re_sampled(ds, support, cbar, draws, seed)?;
    Ok(ReEstimate {
        cbar,
        lower_bound,
        sampled_upper,
        m_used,
    })
}

/// `(1 + 1/c) lambda sqrt(s) / (n kappa_cbar) + 2 c_s`.
pub fn theorem1_bound(
    lambda: f64,
    s: usize,
    n: usize,
    kappa_cbar: f64,
    c: f64,
    c_s: f64,
) -> Result<f64> {
    if !(kappa_cbar > 0.0) {
        return Err(Error::NonInformative(format!(
            "restricted eigenvalue bound is {kappa_cbar}; the prediction bound is infinite"
        )));
    }
    if !(c > 1.0) {
        return Err(Error::Domain(format!("c must be > 1, got {c}")));
    }
    Ok((1.0 + 1.0 / c) * lambda * (s as f64).sqrt() / (n as f64 * kappa_cbar) + 2.0 * c_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Bound {
    /// `floor(s * phi(m* ∧ n) * L)`, or the scan cap when inconclusive.
    pub bound: usize,
    pub l: f64,
    /// Smallest member of the admissible set, when found.
    pub m_star: Option<usize>,
    pub phi_at_m_star: Option<f64>,
    pub conclusive: bool,
    pub m_cap: usize,
}

/// `L = [2 c_bar / kappa_cbar + 3 (c_bar + 1) n c_s / (lambda sqrt(s))]^2`.
pub fn theorem2_l(
    lambda: f64,
    s: usize,
    n: usize,
    kappa_cbar: f64,
    c: f64,
    c_s: f64,
) -> Result<f64> {
    if !(kappa_cbar > 0.0) {
        return Err(Error::NonInformative(format!(
            "restricted eigenvalue bound is {kappa_cbar}; the sparsity bound is infinite"
        )));
    }
    let cb = cbar(c)?;
    let term =
        2.0 * cb / kappa_cbar + 3.0 * (cb + 1.0) * n as f64 * c_s / (lambda * (s as f64).sqrt());
    Ok(term * term)
}

/// Sparsity bound `s * [min over admissible m of phi(m ∧ n)] * L`, where `m`
/// is admissible when `m > 2 s L phi(m ∧ n)` (strict).
///
/// `phi(m ∧ n)` stops changing once `m ∧ n >= p - s` or `m >= n`; past that
/// point the first admissible `m` is found in closed form, so a scan that
/// reaches it is always conclusive. Values of `m` too small to be admissible
/// for any `phi` are skipped without enumeration. `m_cap` defaults to
/// `min(n, p - s, DEFAULT_M_CAP)`.
#[allow(clippy::too_many_arguments)]
pub fn theorem2_bound(
    ds: &Dataset,
    support: &Support,
    lambda: f64,
    s: usize,
    kappa_cbar: f64,
    c: f64,
    c_s: f64,
    n: usize,
    m_cap: Option<usize>,
) -> Result<Theorem2Bound> {
    check_support(support, ds.p())?;
    let l = theorem2_l(lambda, s, n, kappa_cbar, c, c_s)?;
    let q = ds.p() - support.len();
    let m_cap = m_cap.unwrap_or(n.min(q).min(DEFAULT_M_CAP)).max(1);
    let plateau = n.min(q).max(1);
    let g = gram(ds.x());
    let mut cache: BTreeMap<usize, f64> = BTreeMap::new();
    let mut phi = |k: usize| -> Result<f64> {
        if let Some(v) = cache.get(&k) {
            return Ok(*v);
        }
        let v = sparse_eigs_from_gram(&g, support, k)?.phi_m;
        cache.insert(k, v);
        Ok(v)
    };
    let finish = |m: usize, ph: f64| Theorem2Bound {
        bound: (s as f64 * ph * l).floor() as usize,
        l,
        m_star: Some(m),
        phi_at_m_star: Some(ph),
        conclusive: true,
        m_cap,
    };
    // phi(m) >= max_j G_jj for m >= 1, so no m at or below 2 s L max_j G_jj is admissible.
    let diag_max = (0..g.nrows()).map(|j| g[(j, j)]).fold(0.0, f64::max);
    let first_possible = ((2.0 * s as f64 * l * diag_max).floor() as usize + 1).max(1);
    let scan_to = m_cap.min(plateau);
    for m in first_possible..=scan_to {
        let ph = phi(m.min(n))?;
        if m as f64 > 2.0 * s as f64 * l * ph {
            return Ok(finish(m, ph));
        }
    }
    if m_cap >= plateau {
        let ph = phi(plateau)?;
        let threshold = 2.0 * s as f64 * l * ph;
        let first = (threshold.floor() as usize + 1).max(plateau + 1);
        return Ok(finish(first, ph));
    }
    Ok(Theorem2Bound {
        bound: m_cap,
        l,
        m_star: None,
        phi_at_m_star: None,
        conclusive: false,
        m_cap,
    })
}

/// Bounds on `||beta_hat - beta0||_inf` from the perfect-selection lemma:
/// part 2 via sparse eigenvalues, part 3 under a pairwise correlation
/// bound `|E_n[x_j x_k]| <= 1 / (U s)`.
#[allow(clippy::too_many_arguments)]
pub fn lemma3_zeta_bounds(
    lambda: f64,
    n: usize,
    s: usize,
    kappa_cbar: f64,
    kappa_mhat: f64,
    c: f64,
    c_s: f64,
    sigma: f64,
    u: f64,
) -> Result<(f64, f64)> {
    if !(kappa_cbar > 0.0 && kappa_mhat > 0.0) {
        return Err(Error::NonInformative(
            "restricted eigenvalues must be > 0".into(),
        ));
    }
    let cb = cbar(c)?;
    if !(u > 5.0 * cb) {
        return Err(Error::Domain(format!(
            "U must exceed 5 c_bar = {}, got {u}",
            5.0 * cb
        )));
    }
    let nf = n as f64;
    let sf = s as f64;
    let part2 = (1.0 + 1.0 / c) * lambda * sf.sqrt() / (nf * kappa_cbar * kappa_mhat)
        + 2.0 * c_s / kappa_mhat;
    let part3 = lambda / nf * (u + cb) / (u - 5.0 * cb)
        + (sigma / nf.sqrt()).min(c_s)
        + 6.0 * cb / (u - 5.0 * cb) * c_s / sf.sqrt()
        + 4.0 * cb / u * nf / lambda * c_s * c_s / sf;
    Ok((part2, part3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma4Report {
    /// Left-hand side of the off-support condition.
    pub off_support_sup: f64,
    /// `lambda / 2n`.
    pub threshold: f64,
    /// `min_{j in T} |beta0_j + v_j|`.
    pub min_on_support: f64,
    /// Whether `beta0_T + v` keeps the signs of `beta0_T`. The displayed
    /// conditions characterize `T_hat = T` only together with this.
    pub sign_consistent: bool,
}

impl Lemma4Report {
    pub fn holds(&self) -> bool {
        self.off_support_sup <= self.threshold && self.min_on_support > 0.0
    }
}

/// Evaluates both perfect-selection conditions for `u = y - X beta0`.
pub fn lemma4_conditions(
    ds: &Dataset,
    support: &Support,
    beta0: &CoefVector,
    u: &DVector<f64>,
    lambda: f64,
) -> Result<Lemma4Report> {
    check_support(support, ds.p())?;
    ds.check_beta(beta0.values())?;
    if u.len() != ds.n() {
        return Err(Error::dim("u", u.len(), ds.n()));
    }
    if support.is_empty() {
        return Err(Error::Argument(
            "perfect-selection conditions need a non-empty T".into(),
        ));
    }
    let n = ds.n() as f64;
    let g = gram(ds.x());
    let t = support.as_slice();
    let off = support.complement(ds.p());
    let h = ds.x().tr_mul(u) / n;
    let half = lambda / (2.0 * n);
    let gtt = principal_submatrix(&g, t);
    let rhs = DVector::from_fn(t.len(), |a, _| {
        h[t[a]] - half * beta0.values()[t[a]].signum()
    });
    let chol = gtt.cholesky().ok_or(Error::Singular)?;
    let v = chol.solve(&rhs);
    let mut off_sup = 0.0f64;
    for &j in off.as_slice() {
        let mut acc = 0.0;
        for (a, &k) in t.iter().enumerate() {
            acc += g[(j, k)] * v[a];
        }
        off_sup = off_sup.max((acc - h[j]).abs());
    }
    let mut min_on = f64::INFINITY;
    let mut sign_consistent = true;
    for (a, &j) in t.iter().enumerate() {
        let b = beta0.values()[j];
        let val = b + v[a];
        min_on = min_on.min(val.abs());
        if val.signum() != b.signum() {
            sign_consistent = false;
        }
    }
    Ok(Lemma4Report {
        off_support_sup: off_sup,
        threshold: half,
        min_on_support: min_on,
        sign_consistent,
    })
}

pub fn lemma4_check(
    ds: &Dataset,
    support: &Support,
    beta0: &CoefVector,
    u: &DVector<f64>,
    lambda: f64,
) -> Result<bool> {
    Ok(lemma4_conditions(ds, support, beta0, u, lambda)?.holds())
}

/// l1-error bound
/// `(1 + 2 c_bar) sqrt(s) / kappa_2cbar * [(1 + 1/c) lambda sqrt(s) / (n kappa_cbar) + 2 c_s]
///  + (1 + 1/(2 c_bar)) (2c / (c - 1)) (n / lambda) c_s^2`.
pub fn lemma7_l1_bound(
    lambda: f64,
    s: usize,
    n: usize,
    kappa_cbar: f64,
    kappa_2cbar: f64,
    c: f64,
    c_s: f64,
) -> Result<f64> {
    if !(kappa_2cbar > 0.0) {
        return Err(Error::NonInformative(
            "restricted eigenvalue at 2 c_bar must be > 0".into(),
        ));
    }
    let cb = cbar(c)?;
    let pred = theorem1_bound(lambda, s, n, kappa_cbar, c, c_s)?;
    Ok((1.0 + 2.0 * cb) * (s as f64).sqrt() / kappa_2cbar * pred
        + (1.0 + 1.0 / (2.0 * cb)) * (2.0 * c / (c - 1.0)) * (n as f64 / lambda) * c_s * c_s)
}
