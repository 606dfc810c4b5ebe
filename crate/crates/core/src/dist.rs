//! Normal and Student-t quantiles.
//!
//! The normal quantile starts from Acklam's rational approximation
//! (relative error about 1.2e-9) and applies one Newton step against
//! `erfc`, which brings it to near machine precision. Upper-tail inputs are
//! reflected so that `1 - q` is formed exactly.

#![allow(clippy::excessive_precision)]

use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const P_LOW: f64 = 0.02425;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn acklam_lower(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p <= 0.5);
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Quantile for `p <= 0.5`, where `Phi(x) - p` carries no cancellation.
fn lower_quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let x = acklam_lower(p);
    let e = normal_cdf(x) - p;
    x - e / normal_pdf(x)
}

/// `Phi^{-1}(q)` for `q` in the open unit interval.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile requires 0 < q < 1, got {q}"
        )));
    }
    Ok(if q > 0.5 {
        -lower_quantile(1.0 - q)
    } else {
        lower_quantile(q)
    })
}

/// Quantile of Student's t distribution with `dof` degrees of freedom.
pub fn student_t_quantile(q: f64, dof: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "t quantile requires 0 < q < 1, got {q}"
        )));
    }
    if !(dof > 0.0) {
        return Err(Error::Domain(format!(
            "degrees of freedom must be > 0, got {dof}"
        )));
    }
    if q == 0.5 {
        return Ok(0.0);
    }
    if q < 0.5 {
        return Ok(-student_t_quantile(1.0 - q, dof)?);
    }
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Domain(e.to_string()))?;
    let mut x = t.inverse_cdf(q);
    if !x.is_finite() || x <= 0.0 {
        x = normal_quantile(q)?;
    }
    // Newton polish against the survival function; the upper tail is where
    // the interval critical values live and `sf` keeps full relative precision there.
    let target = 1.0 - q;
    for _ in 0..8 {
        let step = (t.sf(x) - target) / t.pdf(x);
        x += step;
        if step.abs() <= 1e-14 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}
