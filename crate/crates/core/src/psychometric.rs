//! Psychometric curves for single and optimally-interacting observers.
//!
//! An observer (a human participant or a classifier) is described by a
//! cumulative-Gaussian accuracy curve `P(dc) = H((dc + b) / sigma)` over the
//! clarity `dc` of the data. Several observers that combine their evidence
//! with inverse-variance weights behave like a single joint observer whose
//! variance never exceeds the best member's.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// Accuracies are clamped into `[PROBIT_CLAMP, 1 - PROBIT_CLAMP]` before the
/// probit transform.
pub const PROBIT_CLAMP: f64 = 1e-6;

/// A cumulative-Gaussian psychometric curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverModel {
    sigma: f64,
    bias: f64,
}

impl ObserverModel {
    pub fn new(sigma: f64, bias: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive and finite, got {sigma}")));
        }
        if !bias.is_finite() {
            return Err(Error::invalid(format!("bias must be finite, got {bias}")));
        }
        Ok(Self { sigma, bias })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }
}

/// Result of fitting an [`ObserverModel`] to measured accuracy points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub model: ObserverModel,
    /// Count-weighted sum of squared residuals in probit space.
    pub residual: f64,
    pub points_used: usize,
}

/// One measured accuracy at a given clarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub delta_c: f64,
    pub accuracy: f64,
    pub count: u64,
}

#[inline]
pub(crate) fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Inverse of the standard normal CDF.
#[inline]
pub(crate) fn probit(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Standard normal CDF `H(z)`.
pub fn cumulative_gaussian(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::invalid(format!("cumulative_gaussian: non-finite input {z}")));
    }
    Ok(norm_cdf(z))
}

/// Accuracy of `model` on data of clarity `delta_c`.
///
/// `delta_c = +inf` yields 1 and `-inf` yields 0; NaN is rejected.
pub fn psychometric_response(model: &ObserverModel, delta_c: f64) -> Result<f64> {
    if delta_c.is_nan() {
        return Err(Error::invalid("psychometric_response: delta_c is NaN"));
    }
    if delta_c.is_infinite() {
        return Ok(if delta_c > 0.0 { 1.0 } else { 0.0 });
    }
    cumulative_gaussian((delta_c + model.bias) / model.sigma)
}

/// Maximum slope of the curve, `1 / sqrt(2 pi sigma^2)`.
pub fn slope(model: &ObserverModel) -> f64 {
    1.0 / ((2.0 * std::f64::consts::PI).sqrt() * model.sigma)
}

fn require_group(models: &[ObserverModel]) -> Result<()> {
    if models.len() < 2 {
        return Err(Error::invalid(format!(
            "a joint observer needs at least 2 members, got {}",
            models.len()
        )));
    }
    Ok(())
}

/// Inverse-variance weights of each observer in the joint decision.
///
/// Algebraically this is `prod(sigma_j^2) / (sigma_i^2 * sum_j prod(sigma_k^2) / sigma_j^2)`;
/// the products cancel, leaving normalized precisions, which do not overflow
/// for large groups.
pub fn joint_weights(models: &[ObserverModel]) -> Result<Vec<f64>> {
    require_group(models)?;
    let precisions: Vec<f64> = models.iter().map(|m| 1.0 / (m.sigma * m.sigma)).collect();
    let total: f64 = precisions.iter().sum();
    Ok(precisions.into_iter().map(|p| p / total).collect())
}

/// The fused observer: `bias = sum w_i b_i`, `sigma^2 = sum w_i^2 sigma_i^2`.
pub fn joint_model(models: &[ObserverModel]) -> Result<ObserverModel> {
    let weights = joint_weights(models)?;
    let bias = weights.iter().zip(models).map(|(w, m)| w * m.bias).sum();
    let variance: f64 = weights
        .iter()
        .zip(models)
        .map(|(w, m)| w * w * m.sigma * m.sigma)
        .sum();
    ObserverModel::new(variance.sqrt(), bias)
}

/// Joint variance written as a product over a sum of leave-one-out products:
/// `prod_i sigma_i^2 / sum_i (prod_j sigma_j^2 / sigma_i^2)`.
///
/// Mathematically equal to `joint_model(models).sigma()^2`; kept as an
/// independent route for cross-checking.
pub fn joint_variance_closed_form(models: &[ObserverModel]) -> Result<f64> {
    require_group(models)?;
    let variances: Vec<f64> = models.iter().map(|m| m.sigma * m.sigma).collect();
    let product: f64 = variances.iter().product();
    let denom: f64 = (0..variances.len())
        .map(|i| {
            variances
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v)
                .product::<f64>()
        })
        .sum();
    Ok(product / denom)
}

/// Approximate joint slope, `sqrt(sum S_i^2)`.
pub fn joint_slope_approx(models: &[ObserverModel]) -> Result<f64> {
    require_group(models)?;
    Ok(models.iter().map(|m| slope(m).powi(2)).sum::<f64>().sqrt())
}

/// Fit `(sigma, b)` by count-weighted least squares of `probit(accuracy)`
/// on `delta_c`.
pub fn fit_curve(points: &[CurvePoint]) -> Result<CurveFit> {
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "fit_curve needs at least 2 points, got {}",
            points.len()
        )));
    }
    for p in points {
        if !p.delta_c.is_finite() || !p.accuracy.is_finite() {
            return Err(Error::invalid("fit_curve: non-finite point"));
        }
        if p.count == 0 {
            return Err(Error::invalid("fit_curve: point with zero count"));
        }
    }
    let ys: Vec<f64> = points
        .iter()
        .map(|p| probit(p.accuracy.clamp(PROBIT_CLAMP, 1.0 - PROBIT_CLAMP)))
        .collect();
    let total: f64 = points.iter().map(|p| p.count as f64).sum();
    let x_mean = points.iter().map(|p| p.count as f64 * p.delta_c).sum::<f64>() / total;
    let y_mean = points
        .iter()
        .zip(&ys)
        .map(|(p, y)| p.count as f64 * y)
        .sum::<f64>()
        / total;

    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (p, y) in points.iter().zip(&ys) {
        let w = p.count as f64;
        let dx = p.delta_c - x_mean;
        sxx += w * dx * dx;
        sxy += w * dx * (y - y_mean);
    }
    if sxx == 0.0 || points.iter().all(|p| p.delta_c == points[0].delta_c) {
        return Err(Error::DegenerateFit);
    }
    let beta = sxy / sxx;
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::NonMonotoneData { slope: beta });
    }
    let alpha = y_mean - beta * x_mean;
    let residual = points
        .iter()
        .zip(&ys)
        .map(|(p, y)| {
            let r = y - (alpha + beta * p.delta_c);
            p.count as f64 * r * r
        })
        .sum();
    let sigma = 1.0 / beta;
    Ok(CurveFit {
        model: ObserverModel::new(sigma, alpha * sigma)?,
        residual,
        points_used: points.len(),
    })
}

/// Monte Carlo estimate of the group's accuracy curve.
///
/// Each observer reports a signed confidence drawn from
/// `N(delta_c + b_i, sigma_i)`; the group answers correctly when the
/// weighted sum of confidences (weights from [`joint_weights`]) is positive.
pub fn simulate_joint_curve(
    models: &[ObserverModel],
    delta_c_grid: &[f64],
    trials_per_point: u64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let weights = joint_weights(models)?;
    if delta_c_grid.is_empty() {
        return Err(Error::invalid("simulate_joint_curve: empty grid"));
    }
    if trials_per_point == 0 {
        return Err(Error::invalid("simulate_joint_curve: trials_per_point must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(delta_c_grid.len());
    for &dc in delta_c_grid {
        let mut correct = 0u64;
        for _ in 0..trials_per_point {
            let mut fused = 0.0;
            for (w, m) in weights.iter().zip(models) {
                let noise: f64 = StandardNormal.sample(&mut rng);
                fused += w * (dc + m.bias + m.sigma * noise);
            }
            if fused > 0.0 {
                correct += 1;
            }
        }
        out.push((dc, correct as f64 / trials_per_point as f64));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(sigma: f64, bias: f64) -> ObserverModel {
        ObserverModel::new(sigma, bias).unwrap()
    }

    /// Composite Simpson quadrature of the standard normal density from a
    /// far-left cutoff.
    fn h_quadrature(z: f64) -> f64 {
        let lo = -12.0;
        let n = 200_000;
        let h = (z - lo) / n as f64;
        let pdf = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = pdf(lo) + pdf(z);
        for i in 1..n {
            let t = lo + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(t);
        }
        acc * h / 3.0
    }

    #[test]
    fn cumulative_gaussian_values() {
        assert_eq!(cumulative_gaussian(0.0).unwrap(), 0.5);
        let oracle = h_quadrature(1.6449);
        assert!((oracle - 0.95).abs() < 1e-4);
        assert!((cumulative_gaussian(1.6449).unwrap() - oracle).abs() < 1e-10);
        let h3 = cumulative_gaussian(3.0).unwrap();
        assert!((cumulative_gaussian(-3.0).unwrap() - (1.0 - h3)).abs() < 1e-12);
        assert!(cumulative_gaussian(f64::NAN).is_err());
        assert!(cumulative_gaussian(f64::INFINITY).is_err());
    }

    #[test]
    fn response_values() {
        assert_eq!(psychometric_response(&m(1.0, 0.0), 0.0).unwrap(), 0.5);
        let h1 = h_quadrature(1.0);
        assert!((psychometric_response(&m(2.0, 1.0), 1.0).unwrap() - h1).abs() < 1e-10);
        assert!((h1 - 0.8413).abs() < 1e-4);
        assert_eq!(psychometric_response(&m(1.0, 0.0), f64::INFINITY).unwrap(), 1.0);
        assert!(psychometric_response(&m(1.0, 0.0), 40.0).unwrap() > 1.0 - 1e-15);
        assert!(psychometric_response(&m(1.0, 0.0), f64::NAN).is_err());
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(ObserverModel::new(0.0, 0.0).is_err());
        assert!(ObserverModel::new(-1.0, 0.0).is_err());
        assert!(ObserverModel::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn slope_values() {
        let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((slope(&m(1.0, 0.0)) - 0.398942).abs() < 1e-6);
        assert!((slope(&m(2.0, 0.0)) - 0.199471).abs() < 1e-6);
        assert!((slope(&m(1.0, 0.0)) - inv_sqrt_2pi).abs() < 1e-15);
        for s in [0.1, 0.7, 3.0, 9.5] {
            assert_eq!(slope(&m(2.0 * s, 0.0)), slope(&m(s, 0.0)) / 2.0);
        }
    }

    #[test]
    fn weights_values() {
        assert_eq!(joint_weights(&[m(3.0, 0.0), m(3.0, 1.0)]).unwrap(), vec![0.5, 0.5]);
        let w = joint_weights(&[m(1.0, 0.0), m(2.0, 0.0)]).unwrap();
        assert!((w[0] - 0.8).abs() < 1e-12 && (w[1] - 0.2).abs() < 1e-12);
        let w = joint_weights(&[m(1.0, 0.0), m(1.0, 0.0), m(1.0, 0.0)]).unwrap();
        for x in w {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(joint_weights(&[m(1.0, 0.0)]).is_err());
    }

    #[test]
    fn joint_model_values() {
        let j = joint_model(&[m(2.0, 0.0), m(2.0, 1.0)]).unwrap();
        assert!((j.sigma() - 2f64.sqrt()).abs() < 1e-12);
        assert!((j.bias() - 0.5).abs() < 1e-15);
        let j = joint_model(&[m(1.0, 0.0), m(2.0, 0.0)]).unwrap();
        assert!((j.sigma().powi(2) - 0.8).abs() < 1e-12);
        let c = 1.7;
        let group = vec![m(c, 0.0); 6];
        let j = joint_model(&group).unwrap();
        assert!((j.sigma().powi(2) - c * c / 6.0).abs() < 1e-12);
        assert!(joint_model(&[]).is_err());
    }

    #[test]
    fn slope_approx_values() {
        // Two observers with slopes 3 and 4.
        let sigma_for = |s: f64| 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * s);
        let group = [m(sigma_for(3.0), 0.0), m(sigma_for(4.0), 0.0)];
        assert!((joint_slope_approx(&group).unwrap() - 5.0).abs() < 1e-12);

        let dominant = [m(1.0, 0.0), m(1e9, 0.0)];
        assert!((joint_slope_approx(&dominant).unwrap() - slope(&m(1.0, 0.0))).abs() < 1e-12);

        let pair = [m(1.0, 0.0), m(1.0, 0.0)];
        assert!((joint_slope_approx(&pair).unwrap() - 0.564190).abs() < 1e-6);
    }

    #[test]
    fn fit_recovers_noiseless_model() {
        let truth = m(1.5, 0.3);
        let points: Vec<CurvePoint> = [-1.0, -0.5, 0.0, 0.5, 1.0]
            .iter()
            .map(|&dc| CurvePoint {
                delta_c: dc,
                accuracy: psychometric_response(&truth, dc).unwrap(),
                count: 10,
            })
            .collect();
        let fit = fit_curve(&points).unwrap();
        assert!((fit.model.sigma() - 1.5).abs() < 1e-6);
        assert!((fit.model.bias() - 0.3).abs() < 1e-6);
        assert!(fit.residual >= 0.0 && fit.residual < 1e-12);
        assert_eq!(fit.points_used, 5);
    }

    #[test]
    fn fit_two_points() {
        let h1 = h_quadrature(1.0);
        let points = [
            CurvePoint { delta_c: 0.0, accuracy: 0.5, count: 1 },
            CurvePoint { delta_c: 1.0, accuracy: h1, count: 1 },
        ];
        let fit = fit_curve(&points).unwrap();
        assert!((fit.model.sigma() - 1.0).abs() < 1e-8);
        assert!(fit.model.bias().abs() < 1e-8);
    }

    #[test]
    fn fit_errors() {
        let flat: Vec<CurvePoint> = (0..4)
            .map(|i| CurvePoint { delta_c: i as f64, accuracy: 0.5, count: 3 })
            .collect();
        assert!(matches!(fit_curve(&flat), Err(Error::NonMonotoneData { .. })));
        let same_x: Vec<CurvePoint> = (0..4)
            .map(|i| CurvePoint { delta_c: 0.2, accuracy: 0.5 + 0.1 * i as f64, count: 3 })
            .collect();
        assert!(matches!(fit_curve(&same_x), Err(Error::DegenerateFit)));
        assert!(fit_curve(&flat[..1]).is_err());
    }

    #[test]
    fn fit_clamps_saturated_accuracy() {
        let points = [
            CurvePoint { delta_c: 0.0, accuracy: 0.0, count: 5 },
            CurvePoint { delta_c: 1.0, accuracy: 1.0, count: 5 },
        ];
        let fit = fit_curve(&points).unwrap();
        let z = probit(1.0 - PROBIT_CLAMP);
        assert!((fit.model.sigma() - 1.0 / (2.0 * z)).abs() < 1e-9);
    }

    #[test]
    fn simulation_single_effective_observer() {
        let group = [m(1.0, 0.0), m(1e6, 0.0)];
        let grid = [-1.0, 0.0, 1.0];
        let trials = 50_000;
        let sim = simulate_joint_curve(&group, &grid, trials, 7).unwrap();
        for (dc, acc) in sim {
            let p = norm_cdf(dc);
            assert!((acc - p).abs() < 4.0 * (p * (1.0 - p) / trials as f64).sqrt());
        }
    }

    #[test]
    fn simulation_midpoint_and_determinism() {
        let group = [m(2.0, 0.4), m(2.0, -0.2)];
        let mid = -joint_model(&group).unwrap().bias();
        let a = simulate_joint_curve(&group, &[mid], 40_000, 3).unwrap();
        assert!((a[0].1 - 0.5).abs() < 0.01);
        let b = simulate_joint_curve(&group, &[mid], 40_000, 3).unwrap();
        assert_eq!(a, b);
        assert!(simulate_joint_curve(&group, &[], 10, 0).is_err());
        assert!(simulate_joint_curve(&group, &[0.0], 0, 0).is_err());
    }

    #[test]
    fn simulation_matches_closed_form() {
        let group = [m(1.0, 0.0), m(2.0, 0.0)];
        let joint = joint_model(&group).unwrap();
        let expected = norm_cdf((1.0 + joint.bias()) / joint.sigma());
        let sim = simulate_joint_curve(&group, &[1.0], 100_000, 11).unwrap();
        assert!((sim[0].1 - expected).abs() < 0.005);
    }
}
