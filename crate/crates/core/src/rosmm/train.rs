use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{Pair, SignPartition};
use crate::losses::LossKind;
use crate::nn::{self, LossCurve, MlpModel, TrainConfig};
use crate::quasidata::WeightedDataset;
use crate::rng::{derive_seed, Stream};
use crate::{Error, Result};

/// Architecture and training settings shared by the sub-ratio classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct SubratioConfig {
    /// Hidden layer widths; input width comes from the data.
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for SubratioConfig {
    fn default() -> Self {
        SubratioConfig { hidden: vec![32, 32], train: TrainConfig::default() }
    }
}

impl SubratioConfig {
    pub fn layer_sizes(&self, dim: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(dim);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(1);
        sizes
    }
}

/// One trained sub-ratio classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct SubratioFit {
    pub pair: Pair,
    pub model: MlpModel,
    pub curve: LossCurve,
}

fn side_subsample(side: &WeightedDataset, n: usize, seed: u64, label: u8) -> Result<WeightedDataset> {
    let mut idx: Vec<usize> = (0..side.len()).collect();
    Stream::new(seed).shuffle(&mut idx);
    idx.truncate(n);
    let mut out = side.subset(&idx).relabel(label);
    let sum: f64 = out.weights().iter().sum();
    if !(sum > 0.0) {
        return Err(Error::Degenerate(format!("side {label} has zero total weight")));
    }
    let mean = sum / n as f64;
    out.weights_mut().iter_mut().for_each(|w| *w /= mean);
    Ok(out)
}

/// Classifier data for one pair: both sides cut to `N = min` of their sizes
/// by a seeded permutation prefix, weights divided by the side mean, class-0
/// side labelled 0 and class-1 side labelled 1.
pub fn prepare_pair(part: &SignPartition, pair: Pair, seed: u64) -> Result<WeightedDataset> {
    let a = part.get(0, pair.k0);
    let b = part.get(1, pair.k1);
    if a.is_empty() {
        return Err(Error::InsufficientSupport { pair, side: "class-0" });
    }
    if b.is_empty() {
        return Err(Error::InsufficientSupport { pair, side: "class-1" });
    }
    let n = a.len().min(b.len());
    let mut out = side_subsample(a, n, derive_seed(seed, 0), 0)?;
    out.extend(&side_subsample(b, n, derive_seed(seed, 1), 1)?)?;
    Ok(out)
}

/// Train the BCE classifier of one pair. Seeds derive from
/// `config.train.seed` and the pair, so pairs can be trained in any order.
pub fn train_pair(train: &SignPartition, val: &SignPartition, pair: Pair, config: &SubratioConfig) -> Result<SubratioFit> {
    let seed = derive_seed(config.train.seed, pair.index() as u64);
    let tr = prepare_pair(train, pair, derive_seed(seed, 0))?;
    let va = prepare_pair(val, pair, derive_seed(seed, 1))?;
    let init = MlpModel::init(&config.layer_sizes(tr.dim()), derive_seed(seed, 2))?;
    let tc = TrainConfig { seed: derive_seed(seed, 3), ..config.train };
    let (model, curve) = nn::train(init, &tr, &va, &tc, &LossKind::Bce)?;
    Ok(SubratioFit { pair, model, curve })
}

/// Train every sub-ratio the training partition requires, sequentially.
pub fn train_subratios(train: &SignPartition, val: &SignPartition, config: &SubratioConfig) -> Result<Vec<SubratioFit>> {
    train.required_pairs().into_iter().map(|p| train_pair(train, val, p, config)).collect()
}
