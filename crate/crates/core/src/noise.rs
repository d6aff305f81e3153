//! The two-sided Gamma noise family.
//!
//! `f(x) = |x|^(shape-1) exp(-|x|/scale) / (2 Γ(shape) scale^shape)`.
//! Shape 1 is the Laplace density. For shape <= 1 the Fourier transform
//! decays polynomially, which is what makes deconvolution from masked data
//! converge at an algebraic rate.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

/// Shape/scale pair of the two-sided Gamma density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct GammaNoiseParams {
    shape: f64,
    scale: f64,
}

#[derive(Deserialize)]
struct RawParams {
    shape: f64,
    scale: f64,
}

impl TryFrom<RawParams> for GammaNoiseParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        GammaNoiseParams::new(raw.shape, raw.scale)
    }
}

impl GammaNoiseParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::invalid(format!("noise shape must be finite and > 0, got {shape}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!("noise scale must be finite and > 0, got {scale}")));
        }
        Ok(Self { shape, scale })
    }

    /// The Laplace density with the given scale.
    pub fn laplace(scale: f64) -> Result<Self> {
        Self::new(1.0, scale)
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Log of the normalising constant `1 / (2 Γ(shape) scale^shape)`.
    pub fn log_normalizer(&self) -> f64 {
        -std::f64::consts::LN_2 - ln_gamma(self.shape) - self.shape * self.scale.ln()
    }

    /// Log density at distance `d = |x|` without the normalising constant.
    #[inline]
    pub(crate) fn log_kernel(&self, d: f64, ln_d: f64) -> f64 {
        let power = self.shape - 1.0;
        if power == 0.0 {
            -d / self.scale
        } else {
            power * ln_d - d / self.scale
        }
    }

    /// Density at `x`. Returns `+inf` at the origin when `shape < 1`.
    pub fn density(&self, x: f64) -> f64 {
        let d = x.abs();
        if d == 0.0 {
            return match self.shape.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Less) => f64::INFINITY,
                Some(std::cmp::Ordering::Equal) => 0.5 / self.scale,
                _ => 0.0,
            };
        }
        (self.log_kernel(d, d.ln()) + self.log_normalizer()).exp()
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let d = x.abs();
        if d == 0.0 {
            return self.density(0.0).ln();
        }
        self.log_kernel(d, d.ln()) + self.log_normalizer()
    }

    /// Closed-form Fourier transform `r^(-shape) cos(shape Θ)` with
    /// `r = sqrt(1 + t² scale²)` and `Θ = atan(t scale)`.
    pub fn fourier_transform(&self, t: f64) -> f64 {
        let u = t * self.scale;
        let log_r = 0.5 * (u * u).ln_1p();
        (-self.shape * log_r).exp() * (self.shape * u.atan()).cos()
    }

    /// Constants of the ordinary-smoothness sandwich
    /// `c1 (1+|t|)^-shape <= f̃(t) <= c2 (1+|t|)^-shape`.
    ///
    /// Only available for `shape < 1`: at shape 1 the lower constant
    /// `cos(π/2)` is zero and above 1 the transform has real zeros.
    pub fn ordinary_smooth_bounds(&self) -> Result<OrdinarySmoothBounds> {
        if self.shape >= 1.0 {
            return Err(Error::UnsupportedShape(self.shape));
        }
        let s = self.shape;
        let eta = self.scale;
        let cos_term = (FRAC_PI_2 * s).cos();
        let (c1, c2) = if eta > 1.0 {
            (eta.powf(-s) * cos_term, 2f64.powf(s / 2.0))
        } else {
            (cos_term, 2f64.powf(s / 2.0) * eta.powf(-s))
        };
        Ok(OrdinarySmoothBounds { c1, c2, exponent: s })
    }

    /// Second moment `scale² shape (shape + 1)`; the mean is zero.
    pub fn variance(&self) -> f64 {
        self.scale * self.scale * self.shape * (self.shape + 1.0)
    }

    /// `P(|Y| <= x)`, the Gamma(shape, scale) CDF of the magnitude.
    pub fn magnitude_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            gamma_lr(self.shape, x / self.scale)
        }
    }

    /// `n` draws: Gamma magnitude times an independent fair sign.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        let magnitude = Gamma::new(self.shape, self.scale).expect("parameters validated at construction");
        (0..n)
            .map(|_| {
                let m = magnitude.sample(rng);
                if rng.random::<bool>() { m } else { -m }
            })
            .collect()
    }
}

/// Constants of the ordinary-smoothness sandwich on the noise transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrdinarySmoothBounds {
    pub c1: f64,
    pub c2: f64,
    pub exponent: f64,
}

impl OrdinarySmoothBounds {
    pub fn lower(&self, t: f64) -> f64 {
        self.c1 * (1.0 + t.abs()).powf(-self.exponent)
    }

    pub fn upper(&self, t: f64) -> f64 {
        self.c2 * (1.0 + t.abs()).powf(-self.exponent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_real_line;
    use proptest::prelude::*;

    fn p(shape: f64, scale: f64) -> GammaNoiseParams {
        GammaNoiseParams::new(shape, scale).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(GammaNoiseParams::new(0.0, 1.0).is_err());
        assert!(GammaNoiseParams::new(1.0, 0.0).is_err());
        assert!(GammaNoiseParams::new(1.0, -2.0).is_err());
        assert!(GammaNoiseParams::new(f64::NAN, 1.0).is_err());
        assert!(serde_json::from_str::<GammaNoiseParams>(r#"{"shape":1.0,"scale":-1.0}"#).is_err());
    }

    #[test]
    fn density_examples() {
        assert_eq!(p(1.0, 1.0).density(0.0), 0.5);
        let v = p(1.0, 2.0).density(2.0);
        assert!((v - (-1f64).exp() / 4.0).abs() < 1e-16, "{v}");
        assert!((v - 0.091_969_9).abs() < 1e-7);
        assert_eq!(p(0.5, 1.0).density(0.0), f64::INFINITY);
        assert_eq!(p(2.0, 1.0).density(0.0), 0.0);
    }

    #[test]
    fn fourier_examples() {
        assert_eq!(p(0.3, 7.0).fourier_transform(0.0), 1.0);
        assert!((p(1.0, 1.0).fourier_transform(1.0) - 0.5).abs() < 1e-15);
        assert!(p(2.0, 1.0).fourier_transform(1.0).abs() < 1e-15);
    }

    #[test]
    fn bounds_examples() {
        let b = p(0.5, 2.0).ordinary_smooth_bounds().unwrap();
        assert!((b.c1 - 0.5).abs() < 1e-15);
        assert!((b.c2 - 2f64.powf(0.25)).abs() < 1e-15);
        assert!((b.c2 - 1.1892).abs() < 1e-4);
        assert_eq!(b.exponent, 0.5);
        let b = p(0.5, 1.0).ordinary_smooth_bounds().unwrap();
        assert!((b.c1 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((b.c2 - 1.1892).abs() < 1e-4);
        assert_eq!(p(1.5, 1.0).ordinary_smooth_bounds(), Err(Error::UnsupportedShape(1.5)));
        assert!(p(1.0, 1.0).ordinary_smooth_bounds().is_err());
    }

    #[test]
    fn variance_examples() {
        assert_eq!(p(1.0, 1.0).variance(), 2.0);
        assert_eq!(p(1.0, 10.0).variance(), 200.0);
        assert_eq!(p(0.5, 2.0).variance(), 3.0);
    }

    #[test]
    fn sample_moments_and_determinism() {
        let n = 1_000_000;
        let xs = p(1.0, 1.0).sample(n, 11);
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 3.0 * (2.0 / n as f64).sqrt(), "{mean}");

        let ys = p(0.5, 2.0).sample(n, 12);
        let m = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((var - 3.0).abs() / 3.0 < 0.05, "{var}");

        assert_eq!(p(0.7, 3.0).sample(100, 5), p(0.7, 3.0).sample(100, 5));
        assert_ne!(p(0.7, 3.0).sample(100, 5), p(0.7, 3.0).sample(100, 6));
    }

    #[test]
    fn density_normalises() {
        for &shape in &[0.2, 0.5, 0.8, 1.0] {
            for &scale in &[0.5, 1.0, 5.0] {
                let q = p(shape, scale);
                let total = adaptive_real_line(|x| if x == 0.0 { 0.0 } else { q.density(x) }, &[0.0], 1e-11, 0.0)
                    .unwrap()
                    .value;
                assert!((total - 1.0).abs() < 1e-6, "shape {shape} scale {scale}: {total}");
            }
        }
    }

    #[test]
    fn magnitude_cdf_laplace() {
        let q = p(1.0, 2.0);
        assert!((q.magnitude_cdf(2.0) - (1.0 - (-1f64).exp())).abs() < 1e-14);
        assert_eq!(q.magnitude_cdf(-1.0), 0.0);
    }

    proptest! {
        #[test]
        fn density_is_even(shape in 0.05f64..3.0, scale in 0.01f64..50.0, x in -100.0f64..100.0) {
            let q = p(shape, scale);
            prop_assert_eq!(q.density(x), q.density(-x));
        }

        #[test]
        fn transform_is_bounded_by_one(shape in 0.05f64..4.0, scale in 0.01f64..50.0, t in -1e3f64..1e3) {
            let q = p(shape, scale);
            let v = q.fourier_transform(t);
            prop_assert!(v.abs() <= 1.0 + 1e-15);
            prop_assert_eq!(v, q.fourier_transform(-t));
        }
    }
}
