use alloc::format;
use alloc::vec::Vec;

use super::{GaussianMixtureSpec, Source, WeightedDataset};
use crate::math;
use crate::rng::{derive_seed, Stream};
use crate::{Error, Result};

/// Samples per independently seeded chunk. Chunk `k` of a run with seed `s`
/// draws from `Stream::child(s, k)`, so chunks may be generated in any order
/// or in parallel.
pub const CHUNK_LEN: usize = 1 << 16;

const TWO_PI: f64 = core::f64::consts::TAU;

/// Uniform on `(0, 1)`: zero is redrawn rather than clamped.
#[inline]
fn open_uniform(rng: &mut Stream) -> f64 {
    loop {
        let u = rng.uniform();
        if u > 0.0 {
            return u;
        }
    }
}

/// Draw `len` samples of chunk `chunk` with the sign-branch sampler and
/// append them (label 0) to `out`.
pub fn sample_weighted_chunk(spec: &GaussianMixtureSpec, seed: u64, chunk: u64, len: usize, out: &mut WeightedDataset) {
    let mut rng = Stream::child(seed, chunk);
    let p_pos = spec.positive_fraction();
    let (two_s1, two_s2) = (2.0 * spec.sigma1 * spec.sigma1, 2.0 * spec.sigma2 * spec.sigma2);
    for _ in 0..len {
        let p = rng.uniform();
        let u1 = open_uniform(&mut rng);
        let u2 = rng.uniform();
        let phi = TWO_PI * u2;
        let (r, w) = if p < p_pos {
            (math::sqrt(-two_s1 * math::ln(u1)), 1.0)
        } else {
            (math::sqrt(-two_s2 * math::ln(u1)), -1.0)
        };
        out.push_unchecked(&[r * math::cos(phi), r * math::sin(phi)], w, 0);
    }
}

fn chunked<F: FnMut(u64, usize, &mut WeightedDataset)>(n: usize, out: &mut WeightedDataset, mut f: F) {
    let mut done = 0;
    let mut chunk = 0u64;
    while done < n {
        let len = CHUNK_LEN.min(n - done);
        f(chunk, len, out);
        done += len;
        chunk += 1;
    }
}

/// `n` samples with `+-1` weights: the positive component with probability
/// `c / (2c - 1)` (weight `+1`), otherwise the negative one (weight `-1`).
pub fn sample_weighted(spec: &GaussianMixtureSpec, n: usize, seed: u64) -> Result<WeightedDataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Config("sample size must be at least 1".into()));
    }
    let mut out = WeightedDataset::with_capacity(2, n, Source::Mixture(*spec), Some(seed));
    chunked(n, &mut out, |k, len, out| sample_weighted_chunk(spec, seed, k, len, out));
    Ok(out)
}

/// `n` unit-weight samples by inverse-transform sampling of the radial CDF.
/// Only possible for nonnegative mixtures.
pub fn sample_unweighted(spec: &GaussianMixtureSpec, n: usize, seed: u64) -> Result<WeightedDataset> {
    spec.validate()?;
    if !spec.is_nonnegative() {
        return Err(Error::NonInvertibleCdf);
    }
    if n == 0 {
        return Err(Error::Config("sample size must be at least 1".into()));
    }
    let mut out = WeightedDataset::with_capacity(2, n, Source::Mixture(*spec), Some(seed));
    chunked(n, &mut out, |k, len, out| sample_unweighted_chunk(spec, seed, k, len, out));
    Ok(out)
}

/// Inverse-transform counterpart of [`sample_weighted_chunk`]. The spec must
/// be nonnegative.
pub fn sample_unweighted_chunk(spec: &GaussianMixtureSpec, seed: u64, chunk: u64, len: usize, out: &mut WeightedDataset) {
    let mut rng = Stream::child(seed, chunk);
    for _ in 0..len {
        let z = rng.uniform();
        let phi = TWO_PI * rng.uniform();
        let r = spec.radial_quantile(z).expect("nonnegative spec and z in [0, 1)");
        out.push_unchecked(&[r * math::cos(phi), r * math::sin(phi)], 1.0, 0);
    }
}

/// Two-point weight law with mean 1, variance `sigma_w^2` and `P(W < 0) = eta`:
/// `W = 1 + sigma_w / sqrt(eta (1 - eta)) * (eta - Bern(eta))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightNoiseSpec {
    pub eta: f64,
    pub sigma_w: f64,
    pub seed: u64,
}

impl WeightNoiseSpec {
    pub fn new(eta: f64, sigma_w: f64, seed: u64) -> Result<Self> {
        let s = WeightNoiseSpec { eta, sigma_w, seed };
        s.validate()?;
        Ok(s)
    }

    /// Largest admissible negative fraction, `sigma_w^2 / (1 + sigma_w^2)`.
    pub fn eta_max(sigma_w: f64) -> f64 {
        sigma_w * sigma_w / (1.0 + sigma_w * sigma_w)
    }

    /// `eta` must lie in `(0, eta_max]`. At `eta_max` the lower weight is
    /// exactly zero.
    pub fn validate(&self) -> Result<()> {
        let max = Self::eta_max(self.sigma_w);
        if !(self.sigma_w.is_finite() && self.sigma_w >= 0.0 && self.eta > 0.0 && self.eta <= max) {
            return Err(Error::Config(format!(
                "eta={} outside (0, {max}] for sigma_w={}",
                self.eta, self.sigma_w
            )));
        }
        Ok(())
    }

    /// `(w_high, w_low)`: taken with probability `1 - eta` and `eta`.
    pub fn values(&self) -> (f64, f64) {
        let e = self.eta;
        let lo = if e == Self::eta_max(self.sigma_w) { 0.0 } else { 1.0 - self.sigma_w * math::sqrt((1.0 - e) / e) };
        (1.0 + self.sigma_w * math::sqrt(e / (1.0 - e)), lo)
    }
}

/// Replace every (unit) weight by an independent draw of the noise law.
pub fn inject_weight_noise(dataset: &WeightedDataset, noise: &WeightNoiseSpec) -> Result<WeightedDataset> {
    noise.validate()?;
    if let Some(i) = dataset.weights().iter().position(|w| *w != 1.0) {
        return Err(Error::Config(format!("weight noise needs unit weights; row {i} has {}", dataset.weights()[i])));
    }
    let (hi, lo) = noise.values();
    let mut out = dataset.clone();
    let mut rng = Stream::new(noise.seed);
    for w in out.weights_mut() {
        *w = if rng.bernoulli(noise.eta) { lo } else { hi };
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Target `(2, 2, 1.42)`: nonnegative likelihood ratio.
    Nonneg,
    /// Target `(2, 2, 1.2)`: ratio negative around the origin.
    Signed,
}

impl ExperimentKind {
    pub fn target(&self) -> GaussianMixtureSpec {
        match self {
            ExperimentKind::Nonneg => GaussianMixtureSpec::toy_nonneg_target(),
            ExperimentKind::Signed => GaussianMixtureSpec::toy_signed_target(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Nonneg => "nonneg",
            ExperimentKind::Signed => "signed",
        }
    }
}

/// Per-class split sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes { train: 2_000_000, val: 600_000, test: 1_400_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: WeightedDataset,
    pub val: WeightedDataset,
    pub test: WeightedDataset,
}

/// Reference (label 0) and target (label 1) splits of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub reference: Splits,
    pub target: Splits,
}

/// Generate both classes of a toy experiment.
///
/// Train and validation splits use the sign-branch sampler. Test splits use
/// inverse-transform sampling wherever the mixture is nonnegative and fall
/// back to the sign-branch sampler for the signed target. Split `k` of class
/// `y` is seeded with `derive_seed(seed, 3 y + k)`.
pub fn generate_experiment(kind: ExperimentKind, sizes: SplitSizes, seed: u64) -> Result<Experiment> {
    generate_from_specs(GaussianMixtureSpec::toy_reference(), kind.target(), sizes, seed)
}

/// [`generate_experiment`] for arbitrary reference and target mixtures.
pub fn generate_from_specs(
    reference: GaussianMixtureSpec,
    target: GaussianMixtureSpec,
    sizes: SplitSizes,
    seed: u64,
) -> Result<Experiment> {
    if sizes.train == 0 || sizes.val == 0 || sizes.test == 0 {
        return Err(Error::Config("split sizes must be positive".into()));
    }
    let make = |spec: GaussianMixtureSpec, y: u8| -> Result<Splits> {
        let s = |k: u64| derive_seed(seed, 3 * y as u64 + k);
        let test = if spec.is_nonnegative() {
            sample_unweighted(&spec, sizes.test, s(2))?
        } else {
            sample_weighted(&spec, sizes.test, s(2))?
        };
        Ok(Splits {
            train: sample_weighted(&spec, sizes.train, s(0))?.relabel(y),
            val: sample_weighted(&spec, sizes.val, s(1))?.relabel(y),
            test: test.relabel(y),
        })
    };
    Ok(Experiment { reference: make(reference, 0)?, target: make(target, 1)? })
}

/// Unit-weight base data for the weight-noise study: both nonnegative
/// mixtures sampled by inverse transform, split 55/15/30.
pub fn unweighted_experiment(n_per_class: usize, seed: u64) -> Result<Experiment> {
    let n_train = n_per_class * 55 / 100;
    let n_val = n_per_class * 15 / 100;
    let n_test = n_per_class - n_train - n_val;
    let make = |spec: GaussianMixtureSpec, y: u8| -> Result<Splits> {
        let all = sample_unweighted(&spec, n_per_class, derive_seed(seed, y as u64))?.relabel(y);
        let idx: Vec<usize> = (0..n_per_class).collect();
        Ok(Splits {
            train: all.subset(&idx[..n_train]),
            val: all.subset(&idx[n_train..n_train + n_val]),
            test: all.subset(&idx[n_train + n_val..n_train + n_val + n_test]),
        })
    };
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::Config(format!("{n_per_class} samples per class is too few to split")));
    }
    Ok(Experiment {
        reference: make(GaussianMixtureSpec::toy_reference(), 0)?,
        target: make(GaussianMixtureSpec::toy_nonneg_target(), 1)?,
    })
}
