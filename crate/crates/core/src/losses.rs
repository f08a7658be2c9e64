//! Weighted per-sample losses and the classifier <-> ratio maps.
//!
//! For BCE and MSE the optimal classifier is `p1 / (p0 + p1)` and the ratio is
//! recovered as `s / (1 - s)`. The PARE loss `w (1 - s t_y)^2` instead has the
//! optimum `s = (t0 + t1 r) / (t0^2 + t1^2 r)`, which is finite for negative
//! ratios and only singular at `r = -(t0/t1)^2`.

use alloc::format;

use crate::math;
use crate::{Error, Result};

/// Clamp applied to classifier outputs before taking logarithms.
pub const PROB_CLAMP: f64 = 1e-12;

/// Relative half-width of the excluded band around the PARE pole, in units of `t0^2`.
pub const POLE_BAND: f64 = 1e-6;

/// Parameters of the PARE loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PareParams {
    pub t0: f64,
    pub t1: f64,
}

impl Default for PareParams {
    fn default() -> Self {
        PareParams { t0: 25619.0, t1: 58.0 }
    }
}

impl PareParams {
    pub fn new(t0: f64, t1: f64) -> Result<Self> {
        let p = PareParams { t0, t1 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t1.is_finite() && self.t0 > 0.0 && self.t1 > 0.0) {
            return Err(Error::Config(format!(
                "PARE parameters must be positive and finite, got t0={} t1={}",
                self.t0, self.t1
            )));
        }
        if self.t0 == self.t1 {
            return Err(Error::Config("PARE parameters t0 and t1 must differ".into()));
        }
        Ok(())
    }

    /// Target value `t_y` for class `y`.
    #[inline]
    pub fn target(&self, y: u8) -> f64 {
        if y == 0 {
            self.t0
        } else {
            self.t1
        }
    }

    /// Ratio at which the classifier map is singular: `-(t0/t1)^2`.
    pub fn pole(&self) -> f64 {
        let q = self.t0 / self.t1;
        -q * q
    }

    /// Denominator `t0^2 + t1^2 r` of the classifier map.
    #[inline]
    pub fn denominator(&self, r: f64) -> f64 {
        self.t0 * self.t0 + self.t1 * self.t1 * r
    }

    /// True when `r` is inside the excluded band around the pole.
    #[inline]
    pub fn in_pole_band(&self, r: f64) -> bool {
        !(math::abs(self.denominator(r)) > POLE_BAND * self.t0 * self.t0)
    }
}

#[inline]
fn clamp_prob(s: f64) -> f64 {
    s.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `-w [y ln s + (1-y) ln(1-s)]` with `s` clamped to `[1e-12, 1-1e-12]`.
#[inline]
pub fn weighted_bce(s: f64, y: u8, w: f64) -> f64 {
    let s = clamp_prob(s);
    if y == 0 {
        -w * math::ln(1.0 - s)
    } else {
        -w * math::ln(s)
    }
}

/// `w (s - y)^2`.
#[inline]
pub fn weighted_mse(s: f64, y: u8, w: f64) -> f64 {
    let d = s - y as f64;
    w * d * d
}

/// `w (1 - s t_y)^2`.
#[inline]
pub fn pare_loss(s: f64, y: u8, w: f64, t: &PareParams) -> f64 {
    let d = 1.0 - s * t.target(y);
    w * d * d
}

/// BCE/MSE ratio trick `s / (1 - s)`.
pub fn ratio_from_classifier_bce(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0 - PROB_CLAMP) {
        return Err(Error::Saturated { s });
    }
    Ok(s / (1.0 - s))
}

/// Inverse of the BCE ratio trick, `r / (1 + r)`. Singular at `r = -1`.
#[inline]
pub fn classifier_from_ratio_bce(r: f64) -> f64 {
    r / (1.0 + r)
}

/// PARE optimum `(t0 + t1 r) / (t0^2 + t1^2 r)`.
pub fn classifier_from_ratio_pare(r: f64, t: &PareParams) -> Result<f64> {
    if t.in_pole_band(r) {
        return Err(Error::Pole { r });
    }
    Ok((t.t0 + t.t1 * r) / t.denominator(r))
}

/// Algebraic inverse of [`classifier_from_ratio_pare`]:
/// `-(t0/t1) (1 - t0 s) / (1 - t1 s)`.
pub fn ratio_from_classifier_pare(s: f64, t: &PareParams) -> Result<f64> {
    let den = 1.0 - t.t1 * s;
    if !(math::abs(den) > 1e-12) {
        return Err(Error::InfiniteRatio { s });
    }
    Ok(-(t.t0 / t.t1) * (1.0 - t.t0 * s) / den)
}

/// Optimal BCE classifier `q1 / (q0 + q1)` for (possibly signed) densities.
///
/// The result is returned as-is even when it falls outside `(0, 1)`, which
/// happens wherever one of the densities is negative.
pub fn analytic_optimal_classifier<F0, F1>(q0: F0, q1: F1, x: &[f64]) -> Result<f64>
where
    F0: Fn(&[f64]) -> f64,
    F1: Fn(&[f64]) -> f64,
{
    let (a, b) = (q0(x), q1(x));
    let den = a + b;
    if den == 0.0 {
        return Err(Error::Degenerate(format!("q0 + q1 = 0 at {x:?}")));
    }
    Ok(b / den)
}

/// Loss used to train or tune a classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Bce,
    Mse,
    Pare(PareParams),
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Bce => "bce",
            LossKind::Mse => "mse",
            LossKind::Pare(_) => "pare",
        }
    }

    #[inline]
    pub fn value(&self, s: f64, y: u8, w: f64) -> f64 {
        match self {
            LossKind::Bce => weighted_bce(s, y, w),
            LossKind::Mse => weighted_mse(s, y, w),
            LossKind::Pare(t) => pare_loss(s, y, w, t),
        }
    }

    /// Derivative of [`LossKind::value`] with respect to the logit `z`,
    /// given `s = sigmoid(z)`.
    #[inline]
    pub fn dlogit(&self, s: f64, y: u8, w: f64) -> f64 {
        match self {
            LossKind::Bce => {
                if s < PROB_CLAMP || s > 1.0 - PROB_CLAMP {
                    0.0
                } else {
                    w * (s - y as f64)
                }
            }
            LossKind::Mse => 2.0 * w * (s - y as f64) * s * (1.0 - s),
            LossKind::Pare(t) => {
                let ty = t.target(y);
                -2.0 * w * ty * (1.0 - s * ty) * s * (1.0 - s)
            }
        }
    }
}
