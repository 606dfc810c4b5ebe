//! Shared fixtures and independent reference computations for the
//! integration tests. Nothing here calls into the routines under test.

#![allow(dead_code, clippy::needless_range_loop)]

use hdsel::model::{normalize_columns, objective_q, Dataset, Support};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss<R: Rng>(r: &mut R) -> f64 {
    r.sample::<f64, _>(StandardNormal)
}

pub fn gaussian_matrix<R: Rng>(r: &mut R, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| gauss(r))
}

/// Normalized Gaussian design with response `X beta + sigma * eps`.
pub fn dataset_with<R: Rng>(
    r: &mut R,
    n: usize,
    p: usize,
    beta: &[f64],
    sigma: f64,
) -> (Dataset, DVector<f64>) {
    let raw = gaussian_matrix(r, n, p);
    let (x, scales) = normalize_columns(&raw).unwrap();
    let b = DVector::from_fn(p, |j, _| beta.get(j).copied().unwrap_or(0.0));
    let eps = DVector::from_fn(n, |_, _| gauss(r));
    let y = &x * &b + &eps * sigma;
    let names = (0..p).map(|j| format!("x{j}")).collect();
    (Dataset::from_normalized(x, y, scales, names).unwrap(), eps)
}

/// Random sparse coefficient vector with `s` entries of magnitude in [0.5, 2].
pub fn sparse_beta<R: Rng>(r: &mut R, p: usize, s: usize) -> Vec<f64> {
    let mut b = vec![0.0; p];
    let mut idx: Vec<usize> = (0..p).collect();
    for k in 0..s.min(p) {
        let j = r.random_range(k..p);
        idx.swap(k, j);
        let mag = r.random_range(0.5..2.0);
        b[idx[k]] = if r.random::<bool>() { mag } else { -mag };
    }
    b
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let k = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &v)| {
            let mut r = row.clone();
            r.push(v);
            r
        })
        .collect();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for row in 0..k {
            if row != col {
                let f = m[row][col] / m[col][col];
                for c in col..=k {
                    m[row][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..k).map(|i| m[i][k] / m[i][i]).collect())
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let k = a.len();
    let mut m = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..k {
                    let (a_rp, a_rq) = (m[r][p], m[r][q]);
                    m[r][p] = c * a_rp - s * a_rq;
                    m[r][q] = s * a_rp + c * a_rq;
                }
                for r in 0..k {
                    let (a_pr, a_qr) = (m[p][r], m[q][r]);
                    m[p][r] = c * a_pr - s * a_qr;
                    m[q][r] = s * a_pr + c * a_qr;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..k).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Gram entries `E_n[x_j x_k]` as nested vectors.
pub fn gram_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let (n, p) = x.shape();
    (0..p)
        .map(|j| {
            (0..p)
                .map(|k| x.column(j).dot(&x.column(k)) / n as f64)
                .collect()
        })
        .collect()
}

pub fn sub(g: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter()
        .map(|&i| idx.iter().map(|&j| g[i][j]).collect())
        .collect()
}

/// Members of the bitmask as ascending indices.
pub fn bits(mask: u32, p: usize) -> Vec<usize> {
    (0..p).filter(|&j| mask >> j & 1 == 1).collect()
}

/// `(min, max)` Rayleigh quotient of the Gram matrix over all vectors whose
/// support is `T` plus at most `m` (and at least one, when `T` is empty)
/// further indices; every qualifying index set is visited.
pub fn brute_sparse_extremes(g: &[Vec<f64>], t: &[usize], m: usize) -> (f64, f64) {
    let p = g.len();
    let t_mask: u32 = t.iter().fold(0, |a, &j| a | 1 << j);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for mask in 0u32..1 << p {
        if mask & t_mask != t_mask {
            continue;
        }
        let extra = (mask & !t_mask).count_ones() as usize;
        if extra > m || mask == 0 {
            continue;
        }
        let ev = jacobi_eigenvalues(&sub(g, &bits(mask, p)));
        lo = lo.min(ev[0]);
        hi = hi.max(ev[ev.len() - 1]);
    }
    (lo, hi)
}

/// Exact LASSO by enumerating sign patterns `s in {-1, 0, 1}^p`: for each,
/// solve `G_AA b = h_A - lambda/(2n) s_A` and keep the candidates that satisfy
/// every optimality condition. Returns `(beta, objective)` of the best one.
pub fn sign_pattern_lasso(ds: &Dataset, lambda: f64) -> (Vec<f64>, f64) {
    let (n, p) = (ds.n() as f64, ds.p());
    let g = gram_rows(ds.x());
    let h: Vec<f64> = (0..p).map(|j| ds.x().column(j).dot(ds.y()) / n).collect();
    let t = lambda / (2.0 * n);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for code in 0..3usize.pow(p as u32) {
        let signs: Vec<i32> = (0..p)
            .map(|j| (code / 3usize.pow(j as u32) % 3) as i32 - 1)
            .collect();
        let active: Vec<usize> = (0..p).filter(|&j| signs[j] != 0).collect();
        let b_act = if active.is_empty() {
            Vec::new()
        } else {
            let rhs: Vec<f64> = active.iter().map(|&j| h[j] - t * signs[j] as f64).collect();
            match gauss_solve(&sub(&g, &active), &rhs) {
                Some(v) => v,
                None => continue,
            }
        };
        if active
            .iter()
            .zip(&b_act)
            .any(|(&j, &b)| b * signs[j] as f64 <= 0.0)
        {
            continue;
        }
        let mut beta = vec![0.0; p];
        for (&j, &b) in active.iter().zip(&b_act) {
            beta[j] = b;
        }
        let feasible = (0..p).filter(|j| signs[*j] == 0).all(|j| {
            let gb: f64 = (0..p).map(|k| g[j][k] * beta[k]).sum();
            (h[j] - gb).abs() <= t * (1.0 + 1e-12)
        });
        if !feasible {
            continue;
        }
        let bv = DVector::from_vec(beta.clone());
        let obj = objective_q(ds, &bv).unwrap() + lambda / n * bv.lp_norm(1);
        if best.as_ref().is_none_or(|(_, o)| obj < *o) {
            best = Some((beta, obj));
        }
    }
    best.expect("the LASSO problem always has a solution")
}

pub fn nonparametric_instance<R: Rng>(
    r: &mut R,
    n: usize,
    p: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let (ds, _) = dataset_with(r, n, p, &[], 0.0);
    let x = ds.x().clone();
    let w: Vec<f64> = (0..p).map(|_| r.random_range(-1.0..1.0)).collect();
    let f = DVector::from_fn(n, |i, _| {
        let lin: f64 = (0..p).map(|j| w[j] * x[(i, j)]).sum();
        lin + 0.3 * x[(i, 0)].exp() - 0.2 * x[(i, p - 1)].powi(2)
    });
    (x, f)
}

pub fn correlated_dataset<R: Rng>(r: &mut R, n: usize, p: usize) -> Dataset {
    let (base, _) = dataset_with(r, n, p, &[], 0.0);
    // Mix in a shared factor so the sparse eigenvalues spread out.
    let shared = gaussian_matrix(r, n, 1);
    let raw = DMatrix::from_fn(n, p, |i, j| base.x()[(i, j)] + 0.8 * shared[(i, 0)]);
    Dataset::new(raw, nalgebra::DVector::zeros(n))
        .unwrap()
        .normalize()
}

pub fn random_support<R: Rng>(r: &mut R, p: usize, s: usize) -> Support {
    let mut idx: Vec<usize> = (0..p).collect();
    for k in 0..s {
        let j = r.random_range(k..p);
        idx.swap(k, j);
    }
    Support::new(idx[..s].iter().copied())
}
