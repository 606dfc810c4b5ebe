//! Datasets, normalization, coefficient vectors and the empirical
//! least-squares quantities shared by every estimator.
//!
//! Conventions: `E_n[.]` is the sample mean over the `n` observations, the
//! prediction norm is `sqrt(E_n[(x_i'd)^2])`, and a normalized design has
//! `E_n[x_ij^2] = 1` for every column, the intercept included.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns whose root-mean-square falls below this are rejected.
pub const DEGENERATE_RMS: f64 = 1e-12;

/// Relative tolerance deciding which coefficients count as non-zero.
pub const SUPPORT_RTOL: f64 = 1e-10;

/// A sorted set of column indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Support(Vec<usize>);

impl Support {
    pub fn empty() -> Self {
        Support(Vec::new())
    }

    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        Support(set.into_iter().collect())
    }

    /// All indices `0..p`.
    pub fn full(p: usize) -> Self {
        Support((0..p).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn is_subset(&self, other: &Support) -> bool {
        self.iter().all(|j| other.contains(j))
    }

    pub fn intersection_len(&self, other: &Support) -> usize {
        self.iter().filter(|&j| other.contains(j)).count()
    }

    pub fn union(&self, other: &Support) -> Support {
        Support::new(self.iter().chain(other.iter()))
    }

    /// Indices in `self` but not in `other`.
    pub fn difference(&self, other: &Support) -> Support {
        Support(self.iter().filter(|&j| !other.contains(j)).collect())
    }

    /// `{0..p} \ self`.
    pub fn complement(&self, p: usize) -> Support {
        Support((0..p).filter(|&j| !self.contains(j)).collect())
    }

    pub(crate) fn check_bounds(&self, p: usize) -> Result<()> {
        match self.max_index() {
            Some(j) if j >= p => Err(Error::Argument(format!(
                "support index {j} out of range for p = {p}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<usize> for Support {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Support::new(iter)
    }
}

/// A coefficient vector together with its support.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefVector {
    values: DVector<f64>,
    support: Support,
}

impl CoefVector {
    pub fn new(values: DVector<f64>) -> Self {
        let linf = values.amax();
        let tol = SUPPORT_RTOL * linf.max(1.0);
        let support = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > tol)
            .map(|(j, _)| j)
            .collect();
        CoefVector { values, support }
    }

    pub fn zeros(p: usize) -> Self {
        CoefVector {
            values: DVector::zeros(p),
            support: Support::empty(),
        }
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(values))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn l0(&self) -> usize {
        self.support.len()
    }

    pub fn l1(&self) -> f64 {
        self.values.lp_norm(1)
    }

    pub fn linf(&self) -> f64 {
        self.values.amax()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }
}

/// Known truth attached to simulated data.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthInfo {
    /// Regression function values `f_i`.
    pub f: DVector<f64>,
    pub sigma: f64,
    pub beta0: Option<CoefVector>,
    pub support: Option<Support>,
}

impl TruthInfo {
    pub fn new(f: DVector<f64>, sigma: f64, beta0: Option<DVector<f64>>) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::Argument(format!(
                "noise level must be >= 0, got {sigma}"
            )));
        }
        let beta0 = beta0.map(CoefVector::new);
        let support = beta0.as_ref().map(|b| b.support().clone());
        Ok(TruthInfo {
            f,
            sigma,
            beta0,
            support,
        })
    }

    /// Approximation error `c_s = sqrt(E_n[(f_i - x_i'beta0)^2])` on the given design.
    pub fn approximation_error(&self, x: &DMatrix<f64>) -> Option<f64> {
        let beta0 = self.beta0.as_ref()?;
        let r = &self.f - x * beta0.values();
        Some((r.norm_squared() / x.nrows() as f64).sqrt())
    }
}

/// Design matrix with response.
///
/// Column 0 is the intercept when the data come from [`crate::io`] or the
/// simulation harness; nothing else relies on that.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    scales: DVector<f64>,
    normalized: bool,
    names: Vec<String>,
    truth: Option<TruthInfo>,
}

impl Dataset {
    /// Wraps a raw (un-normalized) design. Column scales are computed and
    /// zero-variance columns rejected.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, y, names)
    }

    pub fn with_names(x: DMatrix<f64>, y: DVector<f64>, names: Vec<String>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::Argument(format!(
                "design must have at least one row and one column, got {n}x{p}"
            )));
        }
        if y.len() != n {
            return Err(Error::dim("y", y.len(), n));
        }
        if names.len() != p {
            return Err(Error::dim("names", names.len(), p));
        }
        let scales = column_rms(&x);
        if let Some(j) = scales.iter().position(|&s| !(s >= DEGENERATE_RMS)) {
            return Err(Error::DegenerateColumn {
                index: j,
                name: names[j].clone(),
            });
        }
        Ok(Dataset {
            x,
            y,
            scales,
            normalized: false,
            names,
            truth: None,
        })
    }

    /// Builds a dataset whose columns are already normalized, keeping the
    /// given pre-normalization scales.
    pub fn from_normalized(
        x: DMatrix<f64>,
        y: DVector<f64>,
        scales: DVector<f64>,
        names: Vec<String>,
    ) -> Result<Self> {
        let mut ds = Self::with_names(x, y, names)?;
        if scales.len() != ds.p() {
            return Err(Error::dim("scales", scales.len(), ds.p()));
        }
        for (j, ms) in column_rms(&ds.x).iter().enumerate() {
            if (ms * ms - 1.0).abs() > 1e-10 {
                return Err(Error::Precondition(format!(
                    "column {j} has mean square {}, not 1",
                    ms * ms
                )));
            }
        }
        ds.scales = scales;
        ds.normalized = true;
        Ok(ds)
    }

    pub fn with_truth(mut self, truth: TruthInfo) -> Result<Self> {
        if truth.f.len() != self.n() {
            return Err(Error::dim("truth.f", truth.f.len(), self.n()));
        }
        if let Some(b) = &truth.beta0 {
            if b.len() != self.p() {
                return Err(Error::dim("truth.beta0", b.len(), self.p()));
            }
        }
        self.truth = Some(truth);
        Ok(self)
    }

    /// Normalized copy: every column divided by its root-mean-square.
    /// Truth, when present, is re-expressed in normalized coordinates.
    pub fn normalize(&self) -> Dataset {
        if self.normalized {
            return self.clone();
        }
        let mut x = self.x.clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            col /= self.scales[j];
        }
        let truth = self.truth.clone().map(|mut t| {
            if let Some(b) = t.beta0.take() {
                t.beta0 = Some(CoefVector::new(b.values().component_mul(&self.scales)));
            }
            t
        });
        Dataset {
            x,
            y: self.y.clone(),
            scales: self.scales.clone(),
            normalized: true,
            names: self.names.clone(),
            truth,
        }
    }

    /// The design on its original scale.
    pub fn raw_x(&self) -> DMatrix<f64> {
        if !self.normalized {
            return self.x.clone();
        }
        let mut x = self.x.clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            col *= self.scales[j];
        }
        x
    }

    /// Un-normalized copy (original units), e.g. for interpretable OLS.
    pub fn denormalize(&self) -> Dataset {
        if !self.normalized {
            return self.clone();
        }
        let truth = self.truth.clone().map(|mut t| {
            if let Some(b) = t.beta0.take() {
                t.beta0 = Some(CoefVector::new(b.values().component_div(&self.scales)));
            }
            t
        });
        Dataset {
            x: self.raw_x(),
            y: self.y.clone(),
            scales: self.scales.clone(),
            normalized: false,
            names: self.names.clone(),
            truth,
        }
    }

    /// Maps coefficients on normalized columns back to original units.
    pub fn to_original_scale(&self, beta: &DVector<f64>) -> DVector<f64> {
        if self.normalized {
            beta.component_div(&self.scales)
        } else {
            beta.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn scales(&self) -> &DVector<f64> {
        &self.scales
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn truth(&self) -> Option<&TruthInfo> {
        self.truth.as_ref()
    }

    /// Replaces the response, keeping the design.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Dataset> {
        if y.len() != self.n() {
            return Err(Error::dim("y", y.len(), self.n()));
        }
        let mut ds = self.clone();
        ds.y = y;
        ds.truth = None;
        Ok(ds)
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::Precondition(
                "dataset must be normalized (call Dataset::normalize first)".into(),
            ))
        }
    }

    pub(crate) fn check_beta(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.p() {
            return Err(Error::dim("beta", beta.len(), self.p()));
        }
        Ok(())
    }

    /// `y - X beta`.
    pub fn residuals(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_beta(beta)?;
        Ok(&self.y - &self.x * beta)
    }

    /// `E_n[x_i y_i]`.
    pub fn xty_mean(&self) -> DVector<f64> {
        self.x.tr_mul(&self.y) / self.n() as f64
    }

    /// Smallest penalty with an all-zero LASSO solution: `2 n ||E_n[x_i y_i]||_inf`.
    pub fn lambda_max(&self) -> f64 {
        2.0 * self.n() as f64 * self.xty_mean().amax()
    }
}

fn column_rms(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(
        x.ncols(),
        x.column_iter().map(|c| (c.norm_squared() / n).sqrt()),
    )
}

/// Divides each column by its root-mean-square. Returns the scaled matrix and the divisors.
pub fn normalize_columns(x_raw: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let scales = column_rms(x_raw);
    if let Some(j) = scales.iter().position(|&s| !(s >= DEGENERATE_RMS)) {
        return Err(Error::DegenerateColumn {
            index: j,
            name: format!("x{j}"),
        });
    }
    let mut x = x_raw.clone();
    for (j, mut col) in x.column_iter_mut().enumerate() {
        col /= scales[j];
    }
    Ok((x, scales))
}

/// Prediction norm `sqrt(E_n[(x_i'delta)^2])`.
pub fn prediction_norm(ds: &Dataset, delta: &DVector<f64>) -> Result<f64> {
    if delta.len() != ds.p() {
        return Err(Error::dim("delta", delta.len(), ds.p()));
    }
    Ok(((ds.x() * delta).norm_squared() / ds.n() as f64).sqrt())
}

/// Score `2 E_n[x_i eps_i]`.
pub fn score(ds: &Dataset, eps: &DVector<f64>) -> Result<DVector<f64>> {
    if eps.len() != ds.n() {
        return Err(Error::dim("eps", eps.len(), ds.n()));
    }
    Ok(ds.x().tr_mul(eps) * (2.0 / ds.n() as f64))
}

/// Empirical least-squares criterion `E_n[(y_i - x_i'beta)^2]`.
pub fn objective_q(ds: &Dataset, beta: &DVector<f64>) -> Result<f64> {
    Ok(ds.residuals(beta)?.norm_squared() / ds.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> Dataset {
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 1.0, 0.5, 1.0, -1.0, 2.0, 1.0, 3.0, -1.0, 1.0, 0.2, 0.7],
        );
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn ones_column_is_unchanged() {
        let x = DMatrix::from_element(7, 1, 1.0);
        let (xn, s) = normalize_columns(&x).unwrap();
        assert_eq!(s[0], 1.0);
        assert_eq!(xn, x);
    }

    #[test]
    fn constant_two_column_scales_by_two() {
        let x = DMatrix::from_element(4, 1, 2.0);
        let (xn, s) = normalize_columns(&x).unwrap();
        assert_eq!(s[0], 2.0);
        assert!(xn.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn normalized_column_has_unit_mean_square() {
        let x = DMatrix::from_column_slice(5, 1, &[1.0, -1.0, 3.0, 0.5, -2.5]);
        let (xn, s) = normalize_columns(&x).unwrap();
        let ms: f64 = xn.iter().map(|v| v * v).sum::<f64>() / 5.0;
        assert!((ms - 1.0).abs() < 1e-14);
        let expect = ((1.0 + 1.0 + 9.0 + 0.25 + 6.25) / 5.0f64).sqrt();
        assert!((s[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn zero_column_is_rejected_by_name() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let y = DVector::zeros(3);
        let err = Dataset::with_names(x, y, vec!["intercept".into(), "dead".into()]).unwrap_err();
        match err {
            Error::DegenerateColumn { index, name } => {
                assert_eq!(index, 1);
                assert_eq!(name, "dead");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn length_mismatches_are_dimension_errors() {
        let ds = small().normalize();
        assert!(matches!(
            prediction_norm(&ds, &DVector::zeros(2)),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            score(&ds, &DVector::zeros(3)),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            objective_q(&ds, &DVector::zeros(4)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn prediction_norm_trivial_cases() {
        let ds = small().normalize();
        assert_eq!(prediction_norm(&ds, &DVector::zeros(3)).unwrap(), 0.0);
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -3.0]);
        let one = Dataset::new(x, DVector::zeros(3)).unwrap().normalize();
        let v = prediction_norm(&one, &DVector::from_element(1, 1.0)).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn prediction_norm_matches_two_loop_evaluation() {
        let ds = small().normalize();
        let delta = DVector::from_vec(vec![0.3, -1.2, 0.7]);
        let mut acc = 0.0;
        for i in 0..ds.n() {
            let mut fit = 0.0;
            for j in 0..ds.p() {
                fit += ds.x()[(i, j)] * delta[j];
            }
            acc += fit * fit;
        }
        let direct = (acc / ds.n() as f64).sqrt();
        assert!((prediction_norm(&ds, &delta).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn score_of_ones_on_intercept_is_two() {
        let x = DMatrix::from_element(6, 1, 1.0);
        let ds = Dataset::new(x, DVector::zeros(6)).unwrap().normalize();
        let s = score(&ds, &DVector::from_element(6, 1.0)).unwrap();
        assert!((s[0] - 2.0).abs() < 1e-15);
        let z = score(&ds, &DVector::zeros(6)).unwrap();
        assert_eq!(z[0], 0.0);
    }

    #[test]
    fn objective_trivial_cases_and_loop_oracle() {
        let ds = small().normalize();
        let zero = DVector::zeros(3);
        let eny2 = ds.y().norm_squared() / 4.0;
        assert!((objective_q(&ds, &zero).unwrap() - eny2).abs() < 1e-15);

        let beta = DVector::from_vec(vec![0.5, 0.1, -0.4]);
        let exact = ds.with_response(ds.x() * &beta).unwrap();
        assert!(objective_q(&exact, &beta).unwrap() < 1e-28);

        let mut acc = 0.0;
        for i in 0..ds.n() {
            let mut r = ds.y()[i];
            for j in 0..ds.p() {
                r -= ds.x()[(i, j)] * beta[j];
            }
            acc += r * r;
        }
        assert!((objective_q(&ds, &beta).unwrap() - acc / 4.0).abs() < 1e-14);
    }

    #[test]
    fn support_tolerance_is_relative_to_linf() {
        let b = CoefVector::from_slice(&[1e6, 1e-5, 0.0, -3.0]);
        assert_eq!(b.support().as_slice(), &[0, 3]);
        let c = CoefVector::from_slice(&[1e-11, 2e-10, 0.0]);
        assert_eq!(c.support().as_slice(), &[1]);
        assert_eq!(c.l0(), 1);
    }

    #[test]
    fn normalize_and_denormalize_round_trip_truth() {
        let ds = small();
        let beta0 = DVector::from_vec(vec![1.0, 0.0, -2.0]);
        let f = ds.x() * &beta0;
        let truth = TruthInfo::new(f.clone(), 0.5, Some(beta0.clone())).unwrap();
        let ds = ds.with_truth(truth).unwrap();
        let dn = ds.normalize();
        let t = dn.truth().unwrap();
        let fit = dn.x() * t.beta0.as_ref().unwrap().values();
        assert!((fit - f).amax() < 1e-12);
        assert_eq!(t.support.as_ref().unwrap().as_slice(), &[0, 2]);
        let back = dn.denormalize();
        let b = back
            .truth()
            .unwrap()
            .beta0
            .as_ref()
            .unwrap()
            .values()
            .clone();
        assert!((b - beta0).amax() < 1e-12);
        assert!((back.x() - ds.x()).amax() < 1e-12);
    }

    fn matrix_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (2usize..8, 1usize..5).prop_flat_map(|(n, p)| {
            (
                Just(n),
                Just(p),
                proptest::collection::vec(0.1f64..5.0, n * p).prop_map(|v| {
                    v.into_iter()
                        .enumerate()
                        .map(|(k, a)| if k % 3 == 0 { -a } else { a })
                        .collect()
                }),
            )
        })
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent((n, p, data) in matrix_strategy()) {
            let x = DMatrix::from_column_slice(n, p, &data);
            let (once, _) = normalize_columns(&x).unwrap();
            let (twice, s2) = normalize_columns(&once).unwrap();
            prop_assert!((&once - &twice).amax() < 1e-12);
            prop_assert!(s2.iter().all(|s| (s - 1.0).abs() < 1e-12));
        }

        #[test]
        fn prediction_norm_triangle_inequality(
            (n, p, data) in matrix_strategy(),
            seed in proptest::collection::vec(-3.0f64..3.0, 10),
        ) {
            let x = DMatrix::from_column_slice(n, p, &data);
            let ds = Dataset::new(x, DVector::zeros(n)).unwrap().normalize();
            let a = DVector::from_fn(p, |j, _| seed[j % 10]);
            let b = DVector::from_fn(p, |j, _| seed[(j + 5) % 10] * 0.7);
            let lhs = prediction_norm(&ds, &(&a + &b)).unwrap();
            let rhs = prediction_norm(&ds, &a).unwrap() + prediction_norm(&ds, &b).unwrap();
            prop_assert!(lhs <= rhs + 1e-10);
        }

        #[test]
        fn score_is_linear((n, p, data) in matrix_strategy(), a in -4.0f64..4.0) {
            let x = DMatrix::from_column_slice(n, p, &data);
            let ds = Dataset::new(x, DVector::zeros(n)).unwrap().normalize();
            let eps = DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin());
            let lhs = score(&ds, &(&eps * a)).unwrap();
            let rhs = score(&ds, &eps).unwrap() * a;
            prop_assert!((lhs - rhs).amax() < 1e-12);
        }

        #[test]
        fn empirical_risk_triangle_inequality(
            (n, p, data) in matrix_strategy(),
            wiggle in proptest::collection::vec(-1.0f64..1.0, 8),
        ) {
            let x = DMatrix::from_column_slice(n, p, &data);
            let ds = Dataset::new(x, DVector::zeros(n)).unwrap().normalize();
            let beta0 = DVector::from_fn(p, |j, _| if j % 2 == 0 { 1.0 } else { 0.0 });
            let f = ds.x() * &beta0 + DVector::from_fn(n, |i, _| wiggle[i % 8]);
            let truth = TruthInfo::new(f.clone(), 1.0, Some(beta0.clone())).unwrap();
            let cs = truth.approximation_error(ds.x()).unwrap();
            let beta = DVector::from_fn(p, |j, _| wiggle[(j + 3) % 8]);
            let lhs = ((ds.x() * &beta - &f).norm_squared() / n as f64).sqrt();
            let rhs = prediction_norm(&ds, &(&beta - &beta0)).unwrap() + cs;
            prop_assert!(lhs <= rhs + 1e-10);
        }
    }
}
