//! Exact Gaussian-process regression with a Matérn 5/2 kernel, plus the
//! Expected Improvement acquisition (minimization convention).
//!
//! Targets are standardized per fit (zero mean, unit population variance)
//! and predictions are mapped back to the original objective units. When
//! two or more targets are all equal the fitted model is the constant
//! function with zero predictive spread.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};

/// Diagonal jitter added on top of the noise variance.
pub const JITTER: f64 = 1e-6;

pub const GRID_LENGTHSCALES: [f64; 4] = [0.1, 0.3, 1.0, 3.0];
pub const GRID_SIGNAL_VARIANCES: [f64; 3] = [0.5, 1.0, 2.0];
pub const GRID_NOISE_VARIANCES: [f64; 2] = [1e-4, 1e-2];

#[derive(Debug, Clone, PartialEq)]
pub struct GpHyper {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpHyper {
    /// One lengthscale shared across `dims` dimensions.
    pub fn isotropic(dims: usize, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Self {
        GpHyper { lengthscales: vec![lengthscale; dims], signal_variance, noise_variance }
    }

    fn validate(&self) -> Result<()> {
        if self.lengthscales.iter().any(|&l| !(l > 0.0)) {
            return Err(invalid("lengthscales must be > 0"));
        }
        if !(self.signal_variance > 0.0) || !(self.noise_variance >= 0.0) {
            return Err(invalid("signal variance must be > 0 and noise variance >= 0"));
        }
        Ok(())
    }
}

/// Matérn 5/2 covariance: `s2 * (1 + sqrt5 r + 5 r^2 / 3) * exp(-sqrt5 r)`.
pub fn matern52(x: &[f64], y: &[f64], lengthscales: &[f64], signal_variance: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { left: x.len(), right: y.len() });
    }
    if x.len() != lengthscales.len() {
        return Err(Error::DimensionMismatch { left: x.len(), right: lengthscales.len() });
    }
    Ok(matern52_unchecked(x, y, lengthscales, signal_variance))
}

fn matern52_unchecked(x: &[f64], y: &[f64], lengthscales: &[f64], signal_variance: f64) -> f64 {
    let r2: f64 = x.iter().zip(y).zip(lengthscales).map(|((a, b), l)| ((a - b) / l).powi(2)).sum();
    let sr = (5.0 * r2).sqrt();
    signal_variance * (1.0 + sr + 5.0 * r2 / 3.0) * (-sr).exp()
}

#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    targets: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
    hyper: GpHyper,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Fits an exact GP with fixed hyperparameters.
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64], hyper: &GpHyper) -> Result<GpModel> {
        hyper.validate()?;
        let n = inputs.len();
        if n == 0 {
            return Err(invalid("GP fit needs at least one training point"));
        }
        if targets.len() != n {
            return Err(Error::DimensionMismatch { left: n, right: targets.len() });
        }
        let dims = hyper.lengthscales.len();
        if let Some(x) = inputs.iter().find(|x| x.len() != dims) {
            return Err(Error::DimensionMismatch { left: x.len(), right: dims });
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(invalid("GP targets must be finite"));
        }

        let y_mean = targets.iter().sum::<f64>() / n as f64;
        let spread = (targets.iter().map(|t| (t - y_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let y_scale = if n == 1 {
            1.0
        } else if spread <= 1e-12 * y_mean.abs() || spread == 0.0 {
            0.0
        } else {
            spread
        };
        let standardized =
            DVector::from_iterator(n, targets.iter().map(|t| if y_scale > 0.0 { (t - y_mean) / y_scale } else { 0.0 }));

        let mut gram = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let k = matern52_unchecked(&inputs[i], &inputs[j], &hyper.lengthscales, hyper.signal_variance);
                gram[(i, j)] = k;
                gram[(j, i)] = k;
            }
        }
        let chol = [JITTER, JITTER * 10.0]
            .iter()
            .find_map(|&jitter| {
                let mut g = gram.clone();
                for i in 0..n {
                    g[(i, i)] += hyper.noise_variance + jitter;
                }
                Cholesky::new(g)
            })
            .ok_or(Error::NonPsdKernel)?;
        let alpha = chol.solve(&standardized);
        Ok(GpModel {
            inputs: inputs.to_vec(),
            targets: standardized,
            y_mean,
            y_scale,
            hyper: hyper.clone(),
            chol,
            alpha,
        })
    }

    /// Fits every candidate of the fixed hyperparameter grid and keeps the
    /// one with the highest log marginal likelihood (first in grid order on
    /// ties). Lengthscales are shared across dimensions.
    pub fn fit_grid(inputs: &[Vec<f64>], targets: &[f64]) -> Result<GpModel> {
        let dims = inputs.first().map_or(0, Vec::len);
        let mut best: Option<(f64, GpModel)> = None;
        let mut last_err = None;
        for &l in &GRID_LENGTHSCALES {
            for &s2 in &GRID_SIGNAL_VARIANCES {
                for &noise in &GRID_NOISE_VARIANCES {
                    match GpModel::fit(inputs, targets, &GpHyper::isotropic(dims, l, s2, noise)) {
                        Ok(model) => {
                            let lml = model.log_marginal_likelihood();
                            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                                best = Some((lml, model));
                            }
                        }
                        Err(e) => last_err = Some(e),
                    }
                }
            }
        }
        match best {
            Some((_, model)) => Ok(model),
            None => Err(last_err.unwrap_or(Error::NonPsdKernel)),
        }
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn n_train(&self) -> usize {
        self.inputs.len()
    }

    /// Training targets after standardization, in training order.
    pub fn standardized_targets(&self) -> &[f64] {
        self.targets.as_slice()
    }

    /// Posterior mean and standard deviation of the latent function in
    /// standardized units.
    pub fn predict_standardized(&self, x: &[f64]) -> (f64, f64) {
        let k_star = DVector::from_iterator(
            self.inputs.len(),
            self.inputs
                .iter()
                .map(|xi| matern52_unchecked(xi, x, &self.hyper.lengthscales, self.hyper.signal_variance)),
        );
        let mean = k_star.dot(&self.alpha);
        let v =
            self.chol.l_dirty().solve_lower_triangular(&k_star).unwrap_or_else(|| DVector::zeros(self.inputs.len()));
        let var = (self.hyper.signal_variance - v.dot(&v)).max(0.0);
        (mean, var.sqrt())
    }

    /// Posterior mean and standard deviation in original objective units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let (m, s) = self.predict_standardized(x);
        (self.y_mean + self.y_scale * m, self.y_scale * s)
    }

    /// Gaussian log evidence of the standardized training targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.inputs.len() as f64;
        let log_det_half: f64 = self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * self.targets.dot(&self.alpha) - log_det_half - 0.5 * n * (2.0 * PI).ln()
    }
}

pub fn standard_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Expected improvement below `best_observed` with exploration slack `xi`.
pub fn expected_improvement(mean: f64, std: f64, best_observed: f64, xi: f64) -> f64 {
    let improvement = best_observed - mean - xi;
    if !(std > 0.0) {
        return improvement.max(0.0);
    }
    let z = improvement / std;
    (improvement * standard_normal_cdf(z) + std * standard_normal_pdf(z)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn smooth(x: f64) -> f64 {
        (3.0 * x).sin() + 0.5 * x
    }

    #[test]
    fn matern_closed_form() {
        assert_eq!(matern52(&[0.3, 0.7], &[0.3, 0.7], &[0.5, 2.0], 1.7).unwrap(), 1.7);
        let s5 = 5f64.sqrt();
        let expected = (1.0 + s5 + 5.0 / 3.0) * (-s5).exp();
        let k = matern52(&[0.0], &[1.0], &[1.0], 1.0).unwrap();
        assert!((k - expected).abs() < 1e-15);
        assert!((k - 0.5240).abs() < 1e-4);
        // r = 1 with a scaled lengthscale in 2D: (0.6, 0.8) / 1.
        let k2 = matern52(&[0.0, 0.0], &[0.6, 0.8], &[1.0, 1.0], 1.0).unwrap();
        assert!((k2 - expected).abs() < 1e-12);
        assert!(matches!(matern52(&[0.0], &[0.0, 1.0], &[1.0], 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn single_point_fit() {
        let h = GpHyper::isotropic(1, 0.3, 1.0, 1e-2);
        let m = GpModel::fit(&[vec![0.5]], &[7.0], &h).unwrap();
        let (mean, std) = m.predict(&[0.5]);
        assert!((mean - 7.0).abs() < 1e-9);
        // Latent variance s2 - s2^2 / (s2 + noise) ~ noise.
        assert!((std - 0.01f64.sqrt()).abs() < 2e-3, "{std}");
    }

    #[test]
    fn interpolates_noise_free_samples() {
        let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 / 4.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| smooth(x[0])).collect();
        // The residual at training point i is exactly JITTER * alpha_i.
        for (l, s2) in [(0.3, 1.0), (1.0, 1.0), (0.2, 2.0)] {
            let m = GpModel::fit(&xs, &ys, &GpHyper::isotropic(1, l, s2, 0.0)).unwrap();
            for (i, (x, y)) in xs.iter().zip(&ys).enumerate() {
                let (mean_std, _) = m.predict_standardized(x);
                let target_std = (y - m.y_mean) / m.y_scale;
                assert!((target_std - mean_std - JITTER * m.alpha[i]).abs() < 1e-10);
            }
        }
        let m = GpModel::fit(&xs, &ys, &GpHyper::isotropic(1, 0.2, 2.0, 0.0)).unwrap();
        assert!(m.alpha.amax() < 1.0);
        for (x, y) in xs.iter().zip(&ys) {
            let (mean_std, _) = m.predict_standardized(x);
            assert!((mean_std - (y - m.y_mean) / m.y_scale).abs() < 1e-6);
        }
    }

    #[test]
    fn inflated_noise_lowers_evidence_on_clean_data() {
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| smooth(x[0])).collect();
        let clean = GpModel::fit(&xs, &ys, &GpHyper::isotropic(1, 0.3, 1.0, 1e-4)).unwrap();
        let noisy = GpModel::fit(&xs, &ys, &GpHyper::isotropic(1, 0.3, 1.0, 10.0)).unwrap();
        assert!(noisy.log_marginal_likelihood() < clean.log_marginal_likelihood());
    }

    #[test]
    fn prior_reversion_far_away() {
        let xs = vec![vec![0.0], vec![0.1], vec![0.2]];
        let ys = [1.0, 3.0, 2.0];
        let h = GpHyper::isotropic(1, 0.1, 2.0, 1e-4);
        let m = GpModel::fit(&xs, &ys, &h).unwrap();
        let (mean, std) = m.predict(&[100.0]);
        assert!((mean - 2.0).abs() < 0.01 * 2.0);
        let prior_var = 2.0 * m.y_scale * m.y_scale;
        assert!((std * std - prior_var).abs() < 0.01 * prior_var);
    }

    #[test]
    fn mean_is_continuous() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0, (i % 2) as f64]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| smooth(x[0]) + x[1]).collect();
        let m = GpModel::fit_grid(&xs, &ys).unwrap();
        for base in [[0.33, 0.5], [0.9, 0.1], [0.0, 0.0]] {
            let (a, _) = m.predict_standardized(&base);
            let (b, _) = m.predict_standardized(&[base[0] + 1e-6, base[1]]);
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn lml_single_point_closed_form() {
        // Standardized target 0, prior variance s2 + noise = 1 (plus jitter).
        let m = GpModel::fit(&[vec![0.0]], &[4.2], &GpHyper::isotropic(1, 1.0, 0.99, 0.01)).unwrap();
        let expected = -0.5 * (2.0 * PI).ln();
        assert!((m.log_marginal_likelihood() - expected).abs() < 1e-5);
        assert!((expected + 0.9189).abs() < 1e-4);
    }

    #[test]
    fn lml_invariant_to_row_order() {
        let xs = vec![vec![0.0, 1.0], vec![0.5, 0.2], vec![1.0, 0.0], vec![0.2, 0.9]];
        let ys = [3.0, 1.0, 2.0, 5.0];
        let h = GpHyper::isotropic(2, 0.3, 1.0, 1e-2);
        let a = GpModel::fit(&xs, &ys, &h).unwrap().log_marginal_likelihood();
        let perm = [2, 0, 3, 1];
        let xs2: Vec<Vec<f64>> = perm.iter().map(|&i| xs[i].clone()).collect();
        let ys2: Vec<f64> = perm.iter().map(|&i| ys[i]).collect();
        let b = GpModel::fit(&xs2, &ys2, &h).unwrap().log_marginal_likelihood();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn grid_winner_maximizes_evidence() {
        let xs: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 / 6.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| smooth(x[0])).collect();
        let winner = GpModel::fit_grid(&xs, &ys).unwrap();
        let best = winner.log_marginal_likelihood();
        for &l in &GRID_LENGTHSCALES {
            for &s2 in &GRID_SIGNAL_VARIANCES {
                for &n in &GRID_NOISE_VARIANCES {
                    let m = GpModel::fit(&xs, &ys, &GpHyper::isotropic(1, l, s2, n)).unwrap();
                    assert!(m.log_marginal_likelihood() <= best);
                }
            }
        }
    }

    #[test]
    fn flat_targets_collapse_to_constant() {
        let xs = vec![vec![0.0], vec![0.5], vec![1.0]];
        let m = GpModel::fit_grid(&xs, &[4.0, 4.0, 4.0]).unwrap();
        assert_eq!(m.predict(&[0.25]), (4.0, 0.0));
    }

    #[test]
    fn ei_closed_forms() {
        assert_eq!(expected_improvement(5.0, 0.0, 4.0, 0.0), 0.0);
        assert_eq!(expected_improvement(4.0, 0.0, 4.0, 0.0), 0.0);
        assert_eq!(expected_improvement(3.0, 0.0, 4.0, 0.0), 1.0);
        assert!((expected_improvement(2.0, 1.0, 2.0, 0.0) - 0.39894).abs() < 1e-5);
        assert!((standard_normal_cdf(1.96) - 0.9750021).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn matern_symmetric(a in prop::collection::vec(-2.0f64..2.0, 3), b in prop::collection::vec(-2.0f64..2.0, 3)) {
            let ls = [0.3, 1.0, 3.0];
            prop_assert_eq!(matern52(&a, &b, &ls, 1.3).unwrap(), matern52(&b, &a, &ls, 1.3).unwrap());
        }

        #[test]
        fn ei_non_negative(mean in -1e3f64..1e3, std in 0.0f64..1e2, best in -1e3f64..1e3) {
            prop_assert!(expected_improvement(mean, std, best, 0.0) >= 0.0);
        }

        #[test]
        fn ei_monotone(mean in -5.0f64..5.0, d in 0.0f64..2.0, std in 0.01f64..3.0, ds in 0.0f64..2.0, best in -5.0f64..5.0) {
            prop_assert!(expected_improvement(mean + d, std, best, 0.0) <= expected_improvement(mean, std, best, 0.0) + 1e-12);
            if mean >= best {
                prop_assert!(expected_improvement(mean, std + ds, best, 0.0) + 1e-12 >= expected_improvement(mean, std, best, 0.0));
            }
        }

        #[test]
        fn posterior_variance_bounded_by_prior(
            pts in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..8),
            q in prop::collection::vec(0.0f64..1.0, 2),
        ) {
            let ys: Vec<f64> = pts.iter().map(|p| p[0] * 3.0 - p[1]).collect();
            let h = GpHyper::isotropic(2, 0.3, 1.0, 1e-2);
            if let Ok(m) = GpModel::fit(&pts, &ys, &h) {
                let (_, s) = m.predict_standardized(&q);
                prop_assert!(s * s <= h.signal_variance + h.noise_variance + 1e-8);
            }
        }
    }
}
