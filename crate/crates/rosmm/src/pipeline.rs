//! Training, evaluation and sweep drivers shared by the CLI and the tests.

use rayon::prelude::*;
use rosmm_core::eval::{closure_report, ClosureReport, Feature, WeightedHistogram};
use rosmm_core::losses::{LossKind, PareParams, PROB_CLAMP};
use rosmm_core::nn::{self, LossCurve, MlpModel, TrainConfig};
use rosmm_core::quasidata::{analytic_ratio, inject_weight_noise, unweighted_experiment, GaussianMixtureSpec, WeightNoiseSpec, WeightedDataset};
use rosmm_core::rng::derive_seed;
use rosmm_core::rosmm::{
    estimate_coefficients, partition, train_pair, tune_coefficients, tune_full, RosmmModel, SubratioConfig, TuneConfig, Variant,
};

use crate::checkpoint::{Checkpoint, MlpCheckpoint, RosmmCheckpoint};
use crate::config::{EvalSection, RunConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelKind {
    Mlp,
    Rosmm,
    RosmmC,
    RosmmR,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Mlp, ModelKind::Rosmm, ModelKind::RosmmC, ModelKind::RosmmR];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Rosmm => "rosmm",
            ModelKind::RosmmC => "rosmm_c",
            ModelKind::RosmmR => "rosmm_r",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    fn of_variant(v: Variant) -> Self {
        match v {
            Variant::Plain => ModelKind::Rosmm,
            Variant::CoefTuned => ModelKind::RosmmC,
            Variant::FullTuned => ModelKind::RosmmR,
        }
    }
}

/// Everything one training run needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    /// Hidden widths of the baseline MLP.
    pub mlp_hidden: Vec<usize>,
    /// Hidden widths of each sub-ratio classifier.
    pub subratio_hidden: Vec<usize>,
    /// Classifier training; its seed is the run seed.
    pub train: TrainConfig,
    pub tune: TuneConfig,
    pub pare: PareParams,
}

impl FitSettings {
    pub fn from_config(cfg: &RunConfig) -> Self {
        FitSettings {
            mlp_hidden: cfg.train.arch.clone(),
            subratio_hidden: cfg.train.subratio_arch.clone(),
            train: cfg.train.train_config(cfg.train.seed),
            tune: cfg.tune.tune_config(0),
            pare: cfg.pare(),
        }
    }
}

/// A ratio estimate `r(x) = q_target(x) / q_reference(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Mlp(MlpModel),
    Rosmm(RosmmModel),
    Oracle { reference: GaussianMixtureSpec, target: GaussianMixtureSpec },
}

impl Estimator {
    /// Row label in summaries.
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Mlp(_) => "mlp",
            Estimator::Rosmm(m) => ModelKind::of_variant(m.variant).name(),
            Estimator::Oracle { .. } => "oracle",
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> std::result::Result<Self, String> {
        match ck {
            Checkpoint::Mlp(c) => Ok(Estimator::Mlp(c.model()?)),
            Checkpoint::Rosmm(c) => Ok(Estimator::Rosmm(c.model()?)),
        }
    }

    /// Ratios at every row of `d`. The MLP ratio is `s / (1 - s) = exp(z)`
    /// with `s` clamped to `[1e-12, 1 - 1e-12]`.
    pub fn ratios(&self, d: &WeightedDataset) -> Result<Vec<f64>> {
        match self {
            Estimator::Mlp(m) => {
                if m.input_dim() != d.dim() {
                    return Err(rosmm_core::Error::Shape(format!("{}-input model on {}-dimensional data", m.input_dim(), d.dim())).into());
                }
                let bound = ((1.0 - PROB_CLAMP) / PROB_CLAMP).ln();
                Ok(m.logits(d.features()).into_iter().map(|z| z.clamp(-bound, bound).exp()).collect())
            }
            Estimator::Rosmm(m) => Ok(m.ratios(d.features())?),
            Estimator::Oracle { reference, target } => {
                if d.dim() != 2 {
                    return Err(rosmm_core::Error::Shape(format!("analytic ratio needs 2 features, data has {}", d.dim())).into());
                }
                d.iter().map(|s| Ok(analytic_ratio(target, reference, s.x[0], s.x[1])?)).collect()
            }
        }
    }
}

/// Result of [`fit`]: the model, its checkpoint and every loss curve, named
/// by stage (`mlp`, `subratio_pp`, ..., `tune_coef`, `tune_full`).
#[derive(Debug, Clone)]
pub struct Trained {
    pub estimator: Estimator,
    pub checkpoint: Checkpoint,
    pub curves: Vec<(String, LossCurve)>,
}

impl Trained {
    pub fn curve(&self, stage: &str) -> Option<&LossCurve> {
        self.curves.iter().find(|(s, _)| s == stage).map(|(_, c)| c)
    }
}

fn layers(dim: usize, hidden: &[usize]) -> Vec<usize> {
    let mut v = vec![dim];
    v.extend_from_slice(hidden);
    v.push(1);
    v
}

/// Seed layout under the run seed `s`: sub-ratio pair `k` uses
/// `derive(s, k)` for `k < 4`; the MLP uses `derive(s, 4)` for its
/// initialization and `derive(s, 5)` for shuffling; coefficient and full
/// tuning use `derive(s, 6)` and `derive(s, 7)`.
pub fn fit(kind: ModelKind, train: &WeightedDataset, val: &WeightedDataset, s: &FitSettings) -> Result<Trained> {
    let seed = s.train.seed;
    if kind == ModelKind::Mlp {
        let mut tr = train.clone();
        let mut va = val.clone();
        tr.normalize_per_class()?;
        va.normalize_per_class()?;
        let init = MlpModel::init(&layers(train.dim(), &s.mlp_hidden), derive_seed(seed, 4))?;
        let tc = TrainConfig { seed: derive_seed(seed, 5), ..s.train };
        let (model, curve) = nn::train(init, &tr, &va, &tc, &LossKind::Bce)?;
        return Ok(Trained {
            checkpoint: Checkpoint::Mlp(MlpCheckpoint::new(&model, seed, "bce")),
            estimator: Estimator::Mlp(model),
            curves: vec![("mlp".into(), curve)],
        });
    }

    let mut all = fit_rosmm_flavours(kind, train, val, s)?;
    Ok(all.pop().expect("at least the plain model"))
}

/// Train the sub-ratios once and return the plain model followed by each
/// tuned flavour up to `last`. Each entry carries the curves of every stage
/// that led to it.
pub fn fit_rosmm_flavours(last: ModelKind, train: &WeightedDataset, val: &WeightedDataset, s: &FitSettings) -> Result<Vec<Trained>> {
    if last == ModelKind::Mlp {
        return Err(Error::Config("the baseline MLP is not a RoSMM flavour".into()));
    }
    let seed = s.train.seed;
    let ptr = partition(train);
    let pva = partition(val);
    let sub = SubratioConfig { hidden: s.subratio_hidden.clone(), train: s.train };
    let fits: Vec<_> = ptr.required_pairs().into_par_iter().map(|p| train_pair(&ptr, &pva, p, &sub)).collect();
    let mut slots: [Option<MlpModel>; 4] = Default::default();
    let mut curves = Vec::new();
    for f in fits {
        let f = f?;
        curves.push((format!("subratio_{}", f.pair.name()), f.curve));
        slots[f.pair.index()] = Some(f.model);
    }
    let (c0, c1) = estimate_coefficients(train)?;
    let seeds: [u64; 4] = std::array::from_fn(|k| derive_seed(seed, k as u64));
    let wrap = |model: RosmmModel, curves: &Vec<(String, LossCurve)>| Trained {
        checkpoint: Checkpoint::Rosmm(RosmmCheckpoint::new(&model, seeds)),
        estimator: Estimator::Rosmm(model),
        curves: curves.clone(),
    };
    let mut model = RosmmModel::assemble(slots, c0, c1, s.pare)?;
    let mut out = vec![wrap(model.clone(), &curves)];
    if last >= ModelKind::RosmmC {
        let (m, curve) = tune_coefficients(&model, train, val, &TuneConfig { seed: derive_seed(seed, 6), ..s.tune })?;
        model = m;
        curves.push(("tune_coef".into(), curve));
        out.push(wrap(model.clone(), &curves));
    }
    if last == ModelKind::RosmmR {
        let (m, curve) = tune_full(&model, train, val, &TuneConfig { seed: derive_seed(seed, 7), ..s.tune })?;
        curves.push(("tune_full".into(), curve));
        out.push(wrap(m, &curves));
    }
    Ok(out)
}

/// Named histogram feature.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedFeature {
    pub name: String,
    pub feature: Feature,
}

/// Parse `x`, `y`, `r`, `x<i>` or a bare column index.
pub fn parse_feature(token: &str) -> Result<NamedFeature> {
    let t = token.trim();
    let feature = match t {
        "x" => Feature::Column(0),
        "y" => Feature::Column(1),
        "r" => Feature::Radial,
        _ => {
            let digits = t.strip_prefix('x').unwrap_or(t);
            Feature::Column(digits.parse().map_err(|_| Error::Config(format!("unknown feature {t:?}")))?)
        }
    };
    Ok(NamedFeature { name: t.to_string(), feature })
}

pub fn parse_features(list: &str) -> Result<Vec<NamedFeature>> {
    list.split(',').filter(|t| !t.trim().is_empty()).map(parse_feature).collect()
}

/// Histogram edges for one feature: the configured range if any, else
/// `[0, 10]` for `r` and `[-10, 10]` for columns of generated data, else the
/// target test set's `[min, max]`.
pub fn feature_edges(eval: &EvalSection, feature: Feature, generated: bool, target: &WeightedDataset) -> Vec<f64> {
    let (lo, hi) = match (eval.range, feature, generated) {
        (Some([lo, hi]), _, _) => (lo, hi),
        (None, Feature::Radial, true) => (0.0, 10.0),
        (None, Feature::Column(_), true) => (-10.0, 10.0),
        (None, f, false) => {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for s in target.iter() {
                let v = f.value(s.x);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if !(lo < hi) {
                (lo - 0.5, lo + 0.5)
            } else {
                // nudge so the maximum lands inside the last bin
                (lo, hi + (hi - lo) * 1e-9)
            }
        }
    };
    WeightedHistogram::uniform_edges(eval.bins, lo, hi)
}

/// Closure reports of `estimator` on the test splits, one per feature.
pub fn evaluate(
    estimator: &Estimator,
    ref_test: &WeightedDataset,
    target_test: &WeightedDataset,
    features: &[NamedFeature],
    eval: &EvalSection,
    generated: bool,
) -> Result<Vec<ClosureReport>> {
    let ratios = estimator.ratios(ref_test)?;
    features
        .iter()
        .map(|f| {
            let edges = feature_edges(eval, f.feature, generated, target_test);
            Ok(closure_report(target_test, ref_test, &ratios, f.feature, &f.name, &edges)?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sigma_w: f64,
    pub eta: f64,
    pub model: String,
    pub vlrc_auc: f64,
    pub tsallis_d2: f64,
    pub chi2: f64,
    /// `ok`, or the error class of a failed point.
    pub status: String,
}

fn failed(sigma_w: f64, eta: f64, model: &str, e: &Error) -> SweepRow {
    let status = format!("{:?}", e.class()).to_lowercase();
    SweepRow { sigma_w, eta, model: model.into(), vlrc_auc: f64::NAN, tsallis_d2: f64::NAN, chi2: f64::NAN, status }
}

fn sweep_point(cfg: &RunConfig, base: &rosmm_core::quasidata::Experiment, sigma_w: f64, eta: f64, seed: u64) -> Vec<SweepRow> {
    let sw = &cfg.sweep;
    let noisy = |d: &WeightedDataset, k: u64| -> Result<WeightedDataset> {
        Ok(inject_weight_noise(d, &WeightNoiseSpec::new(eta, sigma_w, derive_seed(seed, k))?)?)
    };
    let data = || -> Result<(WeightedDataset, WeightedDataset)> {
        let tr = WeightedDataset::concat(&[&noisy(&base.reference.train, 0)?, &noisy(&base.target.train, 1)?])?;
        let va = WeightedDataset::concat(&[&noisy(&base.reference.val, 2)?, &noisy(&base.target.val, 3)?])?;
        Ok((tr, va))
    };
    let (tr, va) = match data() {
        Ok(d) => d,
        Err(e) => return vec![failed(sigma_w, eta, "mlp", &e), failed(sigma_w, eta, "rosmm_r", &e)],
    };
    let settings = FitSettings {
        mlp_hidden: sw.mlp_arch.clone(),
        subratio_hidden: sw.subratio_arch.clone(),
        train: sw.train_config(derive_seed(seed, 10)),
        tune: TuneConfig { max_epochs: sw.tune_max_epochs, epoch_cap: sw.epoch_cap, ..cfg.tune.tune_config(0) },
        pare: cfg.pare(),
    };
    let radial = [NamedFeature { name: "r".into(), feature: Feature::Radial }];
    let eval = EvalSection { range: None, ..cfg.eval };
    [(ModelKind::Mlp, "mlp"), (ModelKind::RosmmR, "tune_full")]
        .into_iter()
        .map(|(kind, stage)| {
            let run = || -> Result<SweepRow> {
                let t = fit(kind, &tr, &va, &settings)?;
                let vlrc = rosmm_core::eval::vlrc_auc(t.curve(stage).expect("stage curve recorded"))?;
                let rep = evaluate(&t.estimator, &base.reference.test, &base.target.test, &radial, &eval, true)?;
                Ok(SweepRow {
                    sigma_w,
                    eta,
                    model: kind.name().into(),
                    vlrc_auc: vlrc,
                    tsallis_d2: rep[0].tsallis_d2,
                    chi2: rep[0].chi2,
                    status: "ok".into(),
                })
            };
            run().unwrap_or_else(|e| failed(sigma_w, eta, kind.name(), &e))
        })
        .collect()
}

/// Run the weight-noise sweep. Base data comes from `derive(seed, 0)` and
/// grid point `i` from `derive(derive(seed, 1), i)`, so results do not depend
/// on the worker count. `on_row` sees rows as points finish; the returned
/// rows are sorted by `(sigma_w, eta, model)`.
pub fn sweep<F: Fn(&SweepRow) + Sync>(cfg: &RunConfig, on_row: F) -> Result<Vec<SweepRow>> {
    let sw = &cfg.sweep;
    let base = unweighted_experiment(sw.n, derive_seed(sw.seed, 0))?;
    let point_seed = derive_seed(sw.seed, 1);
    let grid = sw.grid();
    let mut rows: Vec<SweepRow> = grid
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, &(sigma_w, eta))| {
            let rows = sweep_point(cfg, &base, sigma_w, eta, derive_seed(point_seed, i as u64));
            rows.iter().for_each(&on_row);
            rows
        })
        .collect();
    rows.sort_by(|a, b| a.sigma_w.total_cmp(&b.sigma_w).then(a.eta.total_cmp(&b.eta)).then(a.model.cmp(&b.model)));
    Ok(rows)
}
