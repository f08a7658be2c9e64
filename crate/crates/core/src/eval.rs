//! Reweighting, weighted histograms and closure metrics.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::losses::LossKind;
use crate::math;
use crate::nn::{grad, Batch, LossCurve, MlpModel};
use crate::quasidata::WeightedDataset;
use crate::{Error, Result};

/// Denominator floor in [`tsallis_d2`].
pub const TSALLIS_EPS: f64 = 1e-9;

/// Bins with fewer entries than this in either histogram are left out of the
/// χ² score: their variance estimate is not usable.
pub const CHI2_MIN_ENTRIES: u64 = 10;

/// Multiply each weight by the matching entry of `ratios`.
pub fn reweight(dataset: &WeightedDataset, ratios: &[f64]) -> Result<WeightedDataset> {
    if ratios.len() != dataset.len() {
        return Err(Error::Shape(format!("{} ratios for {} samples", ratios.len(), dataset.len())));
    }
    if let Some(i) = ratios.iter().position(|r| !r.is_finite()) {
        return Err(Error::Numeric(format!("non-finite ratio {} at sample {i}", ratios[i])));
    }
    let mut out = dataset.clone();
    for (w, r) in out.weights_mut().iter_mut().zip(ratios) {
        *w *= r;
    }
    Ok(out)
}

/// [`reweight`] with a ratio evaluated per sample.
pub fn reweight_fn<F: FnMut(&[f64]) -> f64>(dataset: &WeightedDataset, mut ratio: F) -> Result<WeightedDataset> {
    let r: Vec<f64> = (0..dataset.len()).map(|i| ratio(dataset.x(i))).collect();
    reweight(dataset, &r)
}

/// Self-normalized `sum w f / sum w` and its delta-method standard error
/// `sqrt(sum w^2 (f - mean)^2) / |sum w|`.
pub fn weighted_expectation<F: FnMut(&[f64]) -> f64>(dataset: &WeightedDataset, mut f: F) -> Result<(f64, f64)> {
    let vals: Vec<f64> = (0..dataset.len()).map(|i| f(dataset.x(i))).collect();
    let w = dataset.weights();
    let sw: f64 = w.iter().sum();
    if sw == 0.0 {
        return Err(Error::Degenerate("weights sum to zero".into()));
    }
    let mean = w.iter().zip(&vals).map(|(w, v)| w * v).sum::<f64>() / sw;
    let var = w.iter().zip(&vals).map(|(w, v)| w * w * (v - mean) * (v - mean)).sum::<f64>();
    Ok((mean, math::sqrt(var) / math::abs(sw)))
}

/// Feature extracted from a sample for histogramming.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Column(usize),
    /// `sqrt(x0^2 + x1^2)`.
    Radial,
}

impl Feature {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Feature::Column(i) => x[*i],
            Feature::Radial => math::sqrt(x[0] * x[0] + x[1] * x[1]),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        let ok = match self {
            Feature::Column(i) => *i < dim,
            Feature::Radial => dim >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!("feature {self:?} not available for dimension {dim}")))
        }
    }
}

/// Histogram of signed weights over half-open bins `[e_i, e_{i+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedHistogram {
    pub edges: Vec<f64>,
    pub sum_w: Vec<f64>,
    pub sum_w2: Vec<f64>,
    /// Number of samples per bin.
    pub entries: Vec<u64>,
    pub total_w: f64,
    pub underflow: f64,
    pub overflow: f64,
}

impl WeightedHistogram {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|e| !(e[0] < e[1])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::Config("histogram edges must be finite and strictly increasing".into()));
        }
        let n = edges.len() - 1;
        Ok(WeightedHistogram {
            edges,
            sum_w: vec![0.0; n],
            sum_w2: vec![0.0; n],
            entries: vec![0; n],
            total_w: 0.0,
            underflow: 0.0,
            overflow: 0.0,
        })
    }

    /// Edges of `n` equal bins over `[lo, hi]`.
    pub fn uniform_edges(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    }

    pub fn n_bins(&self) -> usize {
        self.sum_w.len()
    }

    pub fn bin_of(&self, v: f64) -> Option<usize> {
        if !(v >= self.edges[0] && v < self.edges[self.n_bins()]) {
            return None;
        }
        Some(self.edges.partition_point(|e| *e <= v) - 1)
    }

    pub fn fill(&mut self, v: f64, w: f64) {
        self.total_w += w;
        match self.bin_of(v) {
            Some(b) => {
                self.sum_w[b] += w;
                self.sum_w2[b] += w * w;
                self.entries[b] += 1;
            }
            None if v < self.edges[0] => self.underflow += w,
            None => self.overflow += w,
        }
    }

    /// Binwise sum with a histogram over the same edges.
    pub fn merge(&mut self, other: &WeightedHistogram) -> Result<()> {
        if other.edges != self.edges {
            return Err(Error::Shape("histograms have different edges".into()));
        }
        for b in 0..self.n_bins() {
            self.sum_w[b] += other.sum_w[b];
            self.sum_w2[b] += other.sum_w2[b];
            self.entries[b] += other.entries[b];
        }
        self.total_w += other.total_w;
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        Ok(())
    }

    /// Total weight inside the binned range.
    pub fn binned_w(&self) -> f64 {
        self.sum_w.iter().sum()
    }

    /// Bin masses normalized to unit sum over the binned range, and their
    /// variances `sum_w2 / binned_w^2`.
    pub fn normalized(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let t = self.binned_w();
        if t == 0.0 {
            return Err(Error::Degenerate("histogram has zero binned weight".into()));
        }
        Ok((self.sum_w.iter().map(|s| s / t).collect(), self.sum_w2.iter().map(|s| s / (t * t)).collect()))
    }
}

pub fn histogram(dataset: &WeightedDataset, feature: Feature, edges: &[f64]) -> Result<WeightedHistogram> {
    feature.check(dataset.dim())?;
    let mut h = WeightedHistogram::new(edges.to_vec())?;
    for s in dataset.iter() {
        h.fill(feature.value(s.x), s.w);
    }
    Ok(h)
}

fn check_pair(a: &WeightedHistogram, b: &WeightedHistogram) -> Result<()> {
    if a.edges != b.edges {
        return Err(Error::Shape("histograms have different edges".into()));
    }
    Ok(())
}

/// `chi2_score` together with the number of bins it averages over.
pub fn chi2_with_bins(target: &WeightedHistogram, reweighted: &WeightedHistogram) -> Result<(f64, usize)> {
    check_pair(target, reweighted)?;
    let (p, vp) = target.normalized()?;
    let (q, vq) = reweighted.normalized()?;
    let mut sum = 0.0;
    let mut used = 0;
    for b in 0..p.len() {
        let v = vp[b] + vq[b];
        if v > 0.0 && target.entries[b] >= CHI2_MIN_ENTRIES && reweighted.entries[b] >= CHI2_MIN_ENTRIES {
            sum += (p[b] - q[b]) * (p[b] - q[b]) / v;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::Degenerate("no bins with enough entries and nonzero variance".into()));
    }
    Ok((sum / used as f64, used))
}

/// Mean over bins of `(p_b - q_b)^2 / (v_b + u_b)` on unit-normalized
/// histograms. Bins with zero combined variance or fewer than
/// [`CHI2_MIN_ENTRIES`] entries on either side are skipped.
pub fn chi2_score(target: &WeightedHistogram, reweighted: &WeightedHistogram) -> Result<f64> {
    chi2_with_bins(target, reweighted).map(|(s, _)| s)
}

/// Tsallis relative entropy of order 2, `sum_b p_b^2 / q_b - 1`, on
/// unit-normalized bin masses with `|q_b|` floored at [`TSALLIS_EPS`].
pub fn tsallis_d2(p: &WeightedHistogram, q: &WeightedHistogram) -> Result<f64> {
    check_pair(p, q)?;
    let (p, _) = p.normalized()?;
    let (q, _) = q.normalized()?;
    Ok(tsallis_d2_masses(&p, &q))
}

/// [`tsallis_d2`] on already normalized masses.
pub fn tsallis_d2_masses(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(p, q)| {
            let qq = if *q < 0.0 { -math::abs(*q).max(TSALLIS_EPS) } else { q.max(TSALLIS_EPS) };
            p * p / qq
        })
        .sum::<f64>()
        - 1.0
}

/// Area between the validation curve and its value at the stopping epoch,
/// `sum_{e=1}^{E} (L(e) - L(E))` with `E = stopped_epoch`.
pub fn vlrc_auc(curve: &LossCurve) -> Result<f64> {
    let e = curve.stopped_epoch;
    if e == 0 || e > curve.val.len() {
        return Err(Error::Config("loss curve has no stopping epoch".into()));
    }
    let last = curve.val[e - 1];
    Ok(curve.val[..e].iter().map(|v| v - last).sum())
}

/// `(gamma^2 / n_batch) (1/N) sum_i (w_i^2 - w_i) g_i^2` per parameter, where
/// `g_i` is the unweighted loss gradient of sample `i` at the current model.
pub fn grad_variance_excess(
    dataset: &WeightedDataset,
    model: &MlpModel,
    loss: &LossKind,
    gamma: f64,
    n_batch: usize,
) -> Result<Vec<f64>> {
    if dataset.is_empty() || n_batch == 0 {
        return Err(Error::Config("need a non-empty dataset and batch size".into()));
    }
    let mut out = vec![0.0; model.n_params()];
    let one = [1.0];
    for s in dataset.iter() {
        let k = s.w * s.w - s.w;
        if k == 0.0 {
            continue;
        }
        let (_, g) = grad(model, Batch::new(s.x, core::slice::from_ref(&s.y), &one)?, loss)?;
        for (o, gi) in out.iter_mut().zip(&g) {
            *o += k * gi * gi;
        }
    }
    let scale = gamma * gamma / n_batch as f64 / dataset.len() as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Target histogram against the ratio-reweighted reference for one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureReport {
    pub feature: String,
    pub target: WeightedHistogram,
    pub reweighted: WeightedHistogram,
    pub chi2: f64,
    pub tsallis_d2: f64,
    pub n_bins_used: usize,
    /// Bins where the target mass is negative by more than two standard
    /// errors but the reweighted reference is nonnegative.
    pub zeroed_negative_bins: Vec<usize>,
}

impl ClosureReport {
    pub fn from_histograms(feature: String, target: WeightedHistogram, reweighted: WeightedHistogram) -> Result<Self> {
        let (chi2, n_bins_used) = chi2_with_bins(&target, &reweighted)?;
        let d2 = tsallis_d2(&target, &reweighted)?;
        let (p, vp) = target.normalized()?;
        let (q, _) = reweighted.normalized()?;
        let zeroed = (0..p.len()).filter(|&b| p[b] < -2.0 * math::sqrt(vp[b]) && q[b] >= 0.0).collect();
        Ok(ClosureReport {
            feature,
            target,
            reweighted,
            chi2,
            tsallis_d2: d2,
            n_bins_used,
            zeroed_negative_bins: zeroed,
        })
    }
}

/// Histogram `feature` of the target test set and of the reference test set
/// reweighted by `ratios`, and compare them.
pub fn closure_report(
    target: &WeightedDataset,
    reference: &WeightedDataset,
    ratios: &[f64],
    feature: Feature,
    name: &str,
    edges: &[f64],
) -> Result<ClosureReport> {
    if target.dim() != reference.dim() {
        return Err(Error::Shape(format!("target dim {} vs reference dim {}", target.dim(), reference.dim())));
    }
    let ht = histogram(target, feature, edges)?;
    let hr = histogram(&reweight(reference, ratios)?, feature, edges)?;
    ClosureReport::from_histograms(name.into(), ht, hr)
}
