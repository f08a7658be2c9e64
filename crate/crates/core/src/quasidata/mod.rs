//! Signed two-dimensional Gaussian mixtures and the datasets drawn from them.
//!
//! A mixture `q = c N(0, s1^2 I) + (1 - c) N(0, s2^2 I)` with `c > 1` has unit
//! mass but may be negative near the origin. All of its structure lives in
//! the radial coordinate, where density, CDF and (for nonnegative mixtures)
//! quantile are available in closed or near-closed form.

mod dataset;
mod sampling;

pub use dataset::{ClassStats, DatasetMeta, SampleRef, Source, WeightedDataset, WeightedSample};
pub use sampling::{
    generate_experiment, generate_from_specs, inject_weight_noise, sample_unweighted, sample_unweighted_chunk, sample_weighted,
    sample_weighted_chunk, unweighted_experiment,
    Experiment, ExperimentKind, SplitSizes, Splits, WeightNoiseSpec, CHUNK_LEN,
};

use alloc::format;

use crate::math;
use crate::{Error, Result};

const TWO_PI: f64 = core::f64::consts::TAU;

/// Absolute tolerance in `r` of the numerical radial quantile.
pub const QUANTILE_TOL: f64 = 1e-10;

/// `q(x, y) = c N(x, y; sigma1) + (1 - c) N(x, y; sigma2)` with `c > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMixtureSpec {
    pub c: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

/// Isotropic 2D Gaussian density at squared radius `r2`.
#[inline]
fn gauss2(r2: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    math::exp(-0.5 * r2 / s2) / (TWO_PI * s2)
}

impl GaussianMixtureSpec {
    pub fn new(c: f64, sigma1: f64, sigma2: f64) -> Result<Self> {
        let spec = GaussianMixtureSpec { c, sigma1, sigma2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 1.0) {
            return Err(Error::Config(format!("mixture coefficient c={} must lie in (1, inf)", self.c)));
        }
        if !(self.sigma1.is_finite() && self.sigma1 > 0.0 && self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::Config(format!(
                "widths must be positive, got sigma1={} sigma2={}",
                self.sigma1, self.sigma2
            )));
        }
        Ok(())
    }

    /// Reference (class 0) of both toy experiments: `(4/3, 2.5, 2.3)`.
    pub fn toy_reference() -> Self {
        GaussianMixtureSpec { c: 4.0 / 3.0, sigma1: 2.5, sigma2: 2.3 }
    }

    /// Target of the nonnegative-ratio experiment: `(2, 2, 1.42)`.
    pub fn toy_nonneg_target() -> Self {
        GaussianMixtureSpec { c: 2.0, sigma1: 2.0, sigma2: 1.42 }
    }

    /// Target of the signed-ratio experiment: `(2, 2, 1.2)`.
    pub fn toy_signed_target() -> Self {
        GaussianMixtureSpec { c: 2.0, sigma1: 2.0, sigma2: 1.2 }
    }

    pub fn density(&self, x: f64, y: f64) -> f64 {
        let r2 = x * x + y * y;
        self.c * gauss2(r2, self.sigma1) + (1.0 - self.c) * gauss2(r2, self.sigma2)
    }

    /// Density of the radius `r = |(x, y)|`.
    pub fn radial_density(&self, r: f64) -> f64 {
        let term = |s: f64| {
            let s2 = s * s;
            r / s2 * math::exp(-0.5 * r * r / s2)
        };
        self.c * term(self.sigma1) + (1.0 - self.c) * term(self.sigma2)
    }

    /// `F(r) = 1 - c exp(-r^2/2s1^2) + (c - 1) exp(-r^2/2s2^2)`.
    pub fn radial_cdf(&self, r: f64) -> f64 {
        let e = |s: f64| math::exp(-0.5 * r * r / (s * s));
        1.0 - self.c * e(self.sigma1) + (self.c - 1.0) * e(self.sigma2)
    }

    /// Whether the density is nonnegative everywhere.
    ///
    /// The sign of the radial density is that of
    /// `c/s1^2 exp(-a/s1^2) - (c-1)/s2^2 exp(-a/s2^2)` with `a = r^2/2`, whose
    /// log-difference is linear in `a`. For `s2 < s1` the positive component
    /// gains with `a`, so the binding point is the origin; for `s2 > s1` the
    /// negative component eventually dominates.
    pub fn is_nonnegative(&self) -> bool {
        let (s1, s2) = (self.sigma1, self.sigma2);
        if s2 < s1 {
            self.c / (s1 * s1) >= (self.c - 1.0) / (s2 * s2)
        } else {
            s2 == s1
        }
    }

    /// Probability of the positive branch in the weighted sampler, `c / (2c - 1)`.
    pub fn positive_fraction(&self) -> f64 {
        self.c / (2.0 * self.c - 1.0)
    }

    /// `E[R^2] = 2 (c s1^2 + (1 - c) s2^2)`.
    pub fn second_moment(&self) -> f64 {
        2.0 * (self.c * self.sigma1 * self.sigma1 + (1.0 - self.c) * self.sigma2 * self.sigma2)
    }

    /// Upper end of the quantile bracket.
    pub fn quantile_bracket(&self) -> f64 {
        100.0 * self.sigma1.max(self.sigma2)
    }

    /// Radial quantile by bisection of [`GaussianMixtureSpec::radial_cdf`].
    pub fn radial_quantile(&self, z: f64) -> Result<f64> {
        if !self.is_nonnegative() {
            return Err(Error::NonInvertibleCdf);
        }
        if !(0.0..1.0).contains(&z) {
            return Err(Error::Config(format!("quantile level {z} outside [0, 1)")));
        }
        let (mut lo, mut hi) = (0.0, self.quantile_bracket());
        while hi - lo > QUANTILE_TOL {
            let mid = 0.5 * (lo + hi);
            if self.radial_cdf(mid) < z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Closed-form Rayleigh quantile `sqrt(-2 s^2 ln(1 - z))` of one component.
pub fn rayleigh_quantile(z: f64, sigma: f64) -> f64 {
    math::sqrt(-2.0 * sigma * sigma * math::ln_1p(-z))
}

/// Analytic likelihood ratio `q_target / q_reference`; may be negative.
pub fn analytic_ratio(
    target: &GaussianMixtureSpec,
    reference: &GaussianMixtureSpec,
    x: f64,
    y: f64,
) -> Result<f64> {
    let den = reference.density(x, y);
    if den == 0.0 {
        return Err(Error::Degenerate(format!("reference density vanishes at ({x}, {y})")));
    }
    Ok(target.density(x, y) / den)
}
