use alloc::format;
use alloc::vec::Vec;

use super::GaussianMixtureSpec;
use crate::nn::Batch;
use crate::{Error, Result};

/// Where a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Mixture(GaussianMixtureSpec),
    External,
}

/// One owned sample.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub x: Vec<f64>,
    pub w: f64,
    pub y: u8,
}

/// One borrowed sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRef<'a> {
    pub x: &'a [f64],
    pub w: f64,
    pub y: u8,
}

/// Count and weight moments of one class.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassStats {
    pub n: usize,
    pub sum_w: f64,
    pub sum_w2: f64,
}

impl ClassStats {
    pub fn mean_w(&self) -> f64 {
        self.sum_w / self.n as f64
    }
}

/// Summary that travels with a dataset file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetMeta {
    pub source: Source,
    pub seed: Option<u64>,
    pub classes: [ClassStats; 2],
}

impl DatasetMeta {
    pub fn total(&self) -> ClassStats {
        let [a, b] = self.classes;
        ClassStats { n: a.n + b.n, sum_w: a.sum_w + b.sum_w, sum_w2: a.sum_w2 + b.sum_w2 }
    }
}

/// Weighted, labelled samples stored column-wise: a row-major feature block,
/// a weight vector and a label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDataset {
    dim: usize,
    x: Vec<f64>,
    w: Vec<f64>,
    y: Vec<u8>,
    source: Source,
    seed: Option<u64>,
}

impl WeightedDataset {
    pub fn new(dim: usize, source: Source, seed: Option<u64>) -> Self {
        assert!(dim > 0, "feature dimension must be positive");
        WeightedDataset { dim, x: Vec::new(), w: Vec::new(), y: Vec::new(), source, seed }
    }

    pub fn with_capacity(dim: usize, n: usize, source: Source, seed: Option<u64>) -> Self {
        let mut d = Self::new(dim, source, seed);
        d.x.reserve(n * dim);
        d.w.reserve(n);
        d.y.reserve(n);
        d
    }

    /// Build from columns, validating shapes, finiteness and labels.
    pub fn from_columns(
        dim: usize,
        x: Vec<f64>,
        w: Vec<f64>,
        y: Vec<u8>,
        source: Source,
        seed: Option<u64>,
    ) -> Result<Self> {
        if dim == 0 || x.len() != w.len() * dim || y.len() != w.len() {
            return Err(Error::Shape(format!(
                "{} features, {} weights, {} labels for dimension {dim}",
                x.len(),
                w.len(),
                y.len()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { index: i / dim });
        }
        if let Some(i) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { index: i });
        }
        if let Some(i) = y.iter().position(|v| *v > 1) {
            return Err(Error::Degenerate(format!("label {} at row {i} is not 0 or 1", y[i])));
        }
        Ok(WeightedDataset { dim, x, w, y, source, seed })
    }

    pub fn push(&mut self, x: &[f64], w: f64, y: u8) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!("sample of length {} for dimension {}", x.len(), self.dim)));
        }
        if !w.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { index: self.len() });
        }
        if y > 1 {
            return Err(Error::Degenerate(format!("label {y} is not 0 or 1")));
        }
        self.push_unchecked(x, w, y);
        Ok(())
    }

    #[inline]
    pub(crate) fn push_unchecked(&mut self, x: &[f64], w: f64, y: u8) {
        self.x.extend_from_slice(x);
        self.w.push(w);
        self.y.push(y);
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn set_source(&mut self, source: Source, seed: Option<u64>) {
        self.source = source;
        self.seed = seed;
    }

    pub fn features(&self) -> &[f64] {
        &self.x
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn labels(&self) -> &[u8] {
        &self.y
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, i: usize) -> SampleRef<'_> {
        SampleRef { x: self.x(i), w: self.w[i], y: self.y[i] }
    }

    pub fn sample(&self, i: usize) -> WeightedSample {
        WeightedSample { x: self.x(i).to_vec(), w: self.w[i], y: self.y[i] }
    }

    pub fn iter(&self) -> impl Iterator<Item = SampleRef<'_>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Contiguous rows `start..end` as a training batch.
    pub fn batch(&self, start: usize, end: usize) -> Batch<'_> {
        Batch { x: &self.x[start * self.dim..end * self.dim], y: &self.y[start..end], w: &self.w[start..end] }
    }

    pub fn as_batch(&self) -> Batch<'_> {
        self.batch(0, self.len())
    }

    pub fn class_stats(&self, class: u8) -> ClassStats {
        let mut s = ClassStats::default();
        for (w, _) in self.w.iter().zip(&self.y).filter(|(_, y)| **y == class) {
            s.n += 1;
            s.sum_w += w;
            s.sum_w2 += w * w;
        }
        s
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta { source: self.source, seed: self.seed, classes: [self.class_stats(0), self.class_stats(1)] }
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut out = Self::with_capacity(self.dim, indices.len(), self.source, self.seed);
        for &i in indices {
            out.push_unchecked(self.x(i), self.w[i], self.y[i]);
        }
        out
    }

    /// Rows for which `keep` returns true.
    pub fn filter<F: Fn(SampleRef<'_>) -> bool>(&self, keep: F) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.get(i))).collect();
        self.subset(&idx)
    }

    pub fn class(&self, class: u8) -> Self {
        self.filter(|s| s.y == class)
    }

    /// Set every label to `y`.
    pub fn relabel(mut self, y: u8) -> Self {
        self.y.iter_mut().for_each(|v| *v = y);
        self
    }

    /// Append all rows of `other`.
    pub fn extend(&mut self, other: &WeightedDataset) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::Shape(format!("cannot join dimension {} onto {}", other.dim, self.dim)));
        }
        self.x.extend_from_slice(&other.x);
        self.w.extend_from_slice(&other.w);
        self.y.extend_from_slice(&other.y);
        Ok(())
    }

    /// Concatenation of several datasets of equal dimension.
    pub fn concat(parts: &[&WeightedDataset]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Shape("nothing to concatenate".into()))?;
        let n = parts.iter().map(|p| p.len()).sum();
        let mut out = Self::with_capacity(first.dim, n, Source::External, None);
        if parts.iter().all(|p| p.source == first.source) {
            out.source = first.source;
        }
        for p in parts {
            out.extend(p)?;
        }
        Ok(out)
    }

    /// Divide each class's weights by that class's mean weight, so that
    /// `E[W | Y = y] = 1` on the data.
    pub fn normalize_per_class(&mut self) -> Result<()> {
        for class in 0..2u8 {
            let st = self.class_stats(class);
            if st.n == 0 {
                continue;
            }
            if st.sum_w == 0.0 {
                return Err(Error::Degenerate(format!("class {class} has zero total weight")));
            }
            let mean = st.mean_w();
            for (w, _) in self.w.iter_mut().zip(&self.y).filter(|(_, y)| **y == class) {
                *w /= mean;
            }
        }
        Ok(())
    }
}
