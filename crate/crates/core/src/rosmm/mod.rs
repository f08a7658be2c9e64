//! Ratio of signed mixtures model.
//!
//! Each class density is split by weight sign into a positive and a negative
//! component, `q(x|y) = c_y p_+(x|y) + (1 - c_y) p_-(x|y)`. Four nonnegative
//! sub-ratios between the components are learned with ordinary BCE
//! classifiers and recombined with the coefficients `(c0, c1)`.
//!
//! Sub-ratios are keyed `(k0, k1)`: `k0` is the sign of the class-0 side and
//! `k1` the sign of the class-1 side. A classifier trained on that pair
//! predicts `s = p_k1(x|1) / (p_k0(x|0) + p_k1(x|1))`.

mod train;
mod tune;

pub use train::{prepare_pair, train_pair, train_subratios, SubratioConfig, SubratioFit};
pub use tune::{
    coefficient_landscape, full_objective, tune_coefficients, tune_full, InverseSubratios, Landscape,
    LandscapeObjective, TuneConfig, POLE_PENALTY,
};

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::losses::{PareParams, PROB_CLAMP};
use crate::math;
use crate::nn::{MlpModel, Workspace};
use crate::quasidata::WeightedDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    fn symbol(self) -> char {
        match self {
            Sign::Pos => 'p',
            Sign::Neg => 'n',
        }
    }
}

/// Sub-ratio key: sign of the class-0 side, then sign of the class-1 side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pair {
    pub k0: Sign,
    pub k1: Sign,
}

impl Pair {
    pub const PP: Pair = Pair { k0: Sign::Pos, k1: Sign::Pos };
    pub const PN: Pair = Pair { k0: Sign::Pos, k1: Sign::Neg };
    pub const NP: Pair = Pair { k0: Sign::Neg, k1: Sign::Pos };
    pub const NN: Pair = Pair { k0: Sign::Neg, k1: Sign::Neg };
    /// All pairs in storage order.
    pub const ALL: [Pair; 4] = [Pair::PP, Pair::PN, Pair::NP, Pair::NN];

    pub fn index(self) -> usize {
        match (self.k0, self.k1) {
            (Sign::Pos, Sign::Pos) => 0,
            (Sign::Pos, Sign::Neg) => 1,
            (Sign::Neg, Sign::Pos) => 2,
            (Sign::Neg, Sign::Neg) => 3,
        }
    }

    /// Two-letter key: `pp`, `pn`, `np` or `nn`.
    pub fn name(self) -> &'static str {
        ["pp", "pn", "np", "nn"][self.index()]
    }

    pub fn from_name(name: &str) -> Option<Pair> {
        Pair::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn sign(self, class: u8) -> Sign {
        if class == 0 {
            self.k0
        } else {
            self.k1
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.k0.symbol(), self.k1.symbol())
    }
}

/// Per-class sign partition. Negative subsets carry `|w|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignPartition {
    parts: [[WeightedDataset; 2]; 2],
}

impl SignPartition {
    pub fn get(&self, class: u8, sign: Sign) -> &WeightedDataset {
        &self.parts[class as usize][(sign == Sign::Neg) as usize]
    }

    pub fn positive(&self, class: u8) -> &WeightedDataset {
        self.get(class, Sign::Pos)
    }

    pub fn negative(&self, class: u8) -> &WeightedDataset {
        self.get(class, Sign::Neg)
    }

    /// True when class `y` has no negative-weight samples.
    pub fn is_degenerate(&self, class: u8) -> bool {
        self.negative(class).is_empty()
    }

    /// Pairs whose sides are both populated by the sign structure of the data.
    pub fn required_pairs(&self) -> Vec<Pair> {
        Pair::ALL
            .into_iter()
            .filter(|p| {
                (p.k0 == Sign::Pos || !self.is_degenerate(0)) && (p.k1 == Sign::Pos || !self.is_degenerate(1))
            })
            .collect()
    }
}

/// Split each class by weight sign: `w >= 0` keeps its weight, `w < 0`
/// goes to the negative subset with weight `|w|`.
pub fn partition(dataset: &WeightedDataset) -> SignPartition {
    let empty = || WeightedDataset::new(dataset.dim(), dataset.source(), dataset.seed());
    let mut parts = [[empty(), empty()], [empty(), empty()]];
    for s in dataset.iter() {
        let class = (s.y != 0) as usize;
        if s.w < 0.0 {
            parts[class][1].push_unchecked(s.x, -s.w, s.y);
        } else {
            parts[class][0].push_unchecked(s.x, s.w, s.y);
        }
    }
    SignPartition { parts }
}

/// `c_y = sum_{w >= 0} w / sum w` per class; exactly 1 for a class without
/// negative weights.
pub fn estimate_coefficients(dataset: &WeightedDataset) -> Result<(f64, f64)> {
    let mut pos = [0.0; 2];
    let mut total = [0.0; 2];
    let mut has_neg = [false; 2];
    for s in dataset.iter() {
        let c = (s.y != 0) as usize;
        total[c] += s.w;
        if s.w >= 0.0 {
            pos[c] += s.w;
        } else {
            has_neg[c] = true;
        }
    }
    let mut out = [1.0; 2];
    for c in 0..2 {
        if total[c] == 0.0 {
            return Err(Error::Degenerate(format!("class {c} has zero total weight")));
        }
        if has_neg[c] {
            out[c] = pos[c] / total[c];
        }
    }
    Ok((out[0], out[1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Plain,
    CoefTuned,
    FullTuned,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::CoefTuned => "coef",
            Variant::FullTuned => "full",
        }
    }

    pub fn from_name(name: &str) -> Option<Variant> {
        match name {
            "plain" => Some(Variant::Plain),
            "coef" => Some(Variant::CoefTuned),
            "full" => Some(Variant::FullTuned),
            _ => None,
        }
    }
}

/// Largest logit magnitude used when turning a classifier into a ratio; the
/// logit counterpart of clamping `s` to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub(crate) fn logit_clamp() -> f64 {
    math::ln((1.0 - PROB_CLAMP) / PROB_CLAMP)
}

/// Inverse sub-ratio `(1 - s) / s = exp(-z)` from a logit, with the clamp
/// applied. The flag is false when the clamp is active.
#[inline]
pub(crate) fn inverse_from_logit(z: f64, bound: f64) -> (f64, bool) {
    if z > bound {
        (math::exp(-bound), false)
    } else if z < -bound {
        (math::exp(bound), false)
    } else {
        (math::exp(-z), true)
    }
}

/// Inverse sub-ratio `p_k0(x|0) / p_k1(x|1) = (1 - s) / s` of one classifier.
pub fn subratio_value(classifier: &MlpModel, x: &[f64]) -> Result<f64> {
    let s = classifier.forward(x)?;
    let s = s.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    Ok((1.0 - s) / s)
}

/// Mixture ratio and its partial derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Assembly {
    pub r: f64,
    pub dc: [f64; 2],
    pub du: [f64; 4],
}

/// `r = c1 / D1 + (1 - c1) / D2` with `D1 = c0 u_pp + (1 - c0) u_np` and
/// `D2 = c0 u_pn + (1 - c0) u_nn`, where `u` are inverse sub-ratios. Terms of
/// a degenerate class are dropped and its coefficient reads as 1. Returns
/// `None` at a zero bracket.
#[inline]
pub(crate) fn assemble(c0: f64, c1: f64, u: &[f64; 4], degenerate: [bool; 2]) -> Option<Assembly> {
    let c0 = if degenerate[0] { 1.0 } else { c0 };
    let c1 = if degenerate[1] { 1.0 } else { c1 };
    let a0 = 1.0 - c0;
    let d1 = c0 * u[0] + a0 * u[2];
    if d1 == 0.0 {
        return None;
    }
    let inv1 = 1.0 / d1;
    let mut r = c1 * inv1;
    let mut dc1 = inv1;
    let mut dc0 = -c1 * (u[0] - u[2]) * inv1 * inv1;
    let mut du = [-c1 * c0 * inv1 * inv1, 0.0, -c1 * a0 * inv1 * inv1, 0.0];
    if !degenerate[1] {
        let d2 = c0 * u[1] + a0 * u[3];
        if d2 == 0.0 {
            return None;
        }
        let inv2 = 1.0 / d2;
        let b1 = 1.0 - c1;
        r += b1 * inv2;
        dc1 -= inv2;
        dc0 -= b1 * (u[1] - u[3]) * inv2 * inv2;
        du[1] = -b1 * c0 * inv2 * inv2;
        du[3] = -b1 * a0 * inv2 * inv2;
    }
    if degenerate[0] {
        dc0 = 0.0;
    }
    if degenerate[1] {
        dc1 = 0.0;
    }
    Some(Assembly { r, dc: [dc0, dc1], du })
}

/// Sub-ratio classifiers plus mixture coefficients and PARE parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RosmmModel {
    subratios: [Option<MlpModel>; 4],
    pub c0: f64,
    pub c1: f64,
    pub pare: PareParams,
    pub variant: Variant,
}

impl RosmmModel {
    /// Plain model from trained sub-ratios and coefficient estimates.
    ///
    /// `pp` is always required. A class whose negative-side sub-ratios are
    /// absent is degenerate and gets `c_y = 1`; otherwise `c_y` is clamped to
    /// at least 1.
    pub fn assemble(subratios: [Option<MlpModel>; 4], c0: f64, c1: f64, pare: PareParams) -> Result<Self> {
        let mut m = RosmmModel { subratios, c0, c1, pare, variant: Variant::Plain };
        m.check_structure()?;
        let deg = m.degenerate();
        m.c0 = if deg[0] { 1.0 } else { c0.max(1.0) };
        m.c1 = if deg[1] { 1.0 } else { c1.max(1.0) };
        Ok(m)
    }

    /// Model with explicit coefficients and variant, as read from a checkpoint.
    pub fn from_parts(
        subratios: [Option<MlpModel>; 4],
        c0: f64,
        c1: f64,
        pare: PareParams,
        variant: Variant,
    ) -> Result<Self> {
        let m = RosmmModel { subratios, c0, c1, pare, variant };
        m.check_structure()?;
        let deg = m.degenerate();
        if (deg[0] && c0 != 1.0) || (deg[1] && c1 != 1.0) {
            return Err(Error::Config("a degenerate class must have coefficient exactly 1".into()));
        }
        if !(c0.is_finite() && c1.is_finite()) {
            return Err(Error::Config("coefficients must be finite".into()));
        }
        Ok(m)
    }

    fn check_structure(&self) -> Result<()> {
        self.pare.validate()?;
        let pp = self.subratios[0]
            .as_ref()
            .ok_or_else(|| Error::Config("the pp sub-ratio is required".into()))?;
        let dim = pp.input_dim();
        if self.subratios.iter().flatten().any(|m| m.input_dim() != dim) {
            return Err(Error::Shape("sub-ratio input dimensions differ".into()));
        }
        let has = |p: Pair| self.subratios[p.index()].is_some();
        let neg0 = has(Pair::NP);
        let neg1 = has(Pair::PN);
        if has(Pair::NN) != (neg0 && neg1) {
            return Err(Error::Config("the nn sub-ratio must be present exactly when np and pn are".into()));
        }
        Ok(())
    }

    /// Per-class degeneracy, read off the absent sub-ratios.
    pub fn degenerate(&self) -> [bool; 2] {
        [self.subratios[Pair::NP.index()].is_none(), self.subratios[Pair::PN.index()].is_none()]
    }

    pub fn subratio(&self, pair: Pair) -> Option<&MlpModel> {
        self.subratios[pair.index()].as_ref()
    }

    pub fn subratios(&self) -> &[Option<MlpModel>; 4] {
        &self.subratios
    }

    pub(crate) fn subratios_mut(&mut self) -> &mut [Option<MlpModel>; 4] {
        &mut self.subratios
    }

    pub fn input_dim(&self) -> usize {
        self.subratios[0].as_ref().map_or(0, |m| m.input_dim())
    }

    /// Estimated likelihood ratio `q(x|1) / q(x|0)`.
    pub fn ratio(&self, x: &[f64]) -> Result<f64> {
        let bound = logit_clamp();
        let mut u = [0.0; 4];
        for (k, m) in self.subratios.iter().enumerate() {
            if let Some(m) = m {
                u[k] = inverse_from_logit(m.logit(x)?, bound).0;
            }
        }
        assemble(self.c0, self.c1, &u, self.degenerate())
            .map(|a| a.r)
            .ok_or_else(|| Error::Degenerate(format!("zero mixture bracket at {x:?}")))
    }

    /// Ratios for `n = x.len() / dim` row-major points.
    pub fn ratios(&self, x: &[f64]) -> Result<Vec<f64>> {
        let dim = self.input_dim();
        if x.len() % dim != 0 {
            return Err(Error::Shape(format!("{} values is not a multiple of dimension {dim}", x.len())));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { index: i });
        }
        let u = InverseSubratios::compute(self, x)?;
        let deg = self.degenerate();
        (0..u.len())
            .map(|i| {
                assemble(self.c0, self.c1, &u.row(i), deg)
                    .map(|a| a.r)
                    .ok_or_else(|| Error::Degenerate(format!("zero mixture bracket at sample {i}")))
            })
            .collect()
    }
}

/// Batched logits of `model` over row-major `x`, in chunks.
pub(crate) fn batched_logits(model: &MlpModel, x: &[f64], ws: &mut Workspace, out: &mut Vec<f64>) {
    let dim = model.input_dim();
    let n = x.len() / dim;
    out.clear();
    out.reserve(n);
    let chunk = 4096;
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        out.extend_from_slice(model.forward_batch(&x[start * dim..end * dim], end - start, ws));
        start = end;
    }
}

/// Mixture ratio for given coefficients and inverse sub-ratios.
pub fn rosmm_ratio(c0: f64, c1: f64, u: &[f64; 4], degenerate: [bool; 2]) -> Result<f64> {
    assemble(c0, c1, u, degenerate)
        .map(|a| a.r)
        .ok_or_else(|| Error::Degenerate("zero mixture bracket".into()))
}
