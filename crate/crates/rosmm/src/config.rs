//! Run configuration, read from TOML. Every field has a default, so an empty
//! file (or no file) is a valid configuration.

use std::path::Path;

use rosmm_core::losses::PareParams;
use rosmm_core::nn::TrainConfig;
use rosmm_core::quasidata::{ExperimentKind, GaussianMixtureSpec, SplitSizes, WeightNoiseSpec};
use rosmm_core::rosmm::TuneConfig;
use serde::{Deserialize, Serialize};

use crate::data::SpecJson;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub train: TrainSection,
    pub pare: PareSection,
    pub tune: TuneSection,
    pub eval: EvalSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// `nonneg`, `signed` or `external`.
    pub kind: String,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<SpecJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<SpecJson>,
}

impl Default for DataSection {
    fn default() -> Self {
        let s = SplitSizes::default();
        DataSection {
            kind: "signed".into(),
            n_train: s.train,
            n_val: s.val,
            n_test: s.test,
            seed: 0,
            reference: None,
            target: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub epoch_cap: usize,
    pub max_epochs: usize,
    /// Hidden widths of the baseline MLP.
    pub arch: Vec<usize>,
    /// Hidden widths of each sub-ratio classifier.
    pub subratio_arch: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            lr: t.learning_rate,
            batch_size: t.batch_size,
            patience: t.patience,
            epoch_cap: t.epoch_cap,
            max_epochs: t.max_epochs,
            arch: vec![64, 64],
            subratio_arch: vec![32, 32],
            seed: 0,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch_size,
            patience: self.patience,
            epoch_cap: self.epoch_cap,
            seed,
            max_epochs: self.max_epochs,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PareSection {
    pub t0: f64,
    pub t1: f64,
}

impl Default for PareSection {
    fn default() -> Self {
        let p = PareParams::default();
        PareSection { t0: p.t0, t1: p.t1 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSection {
    pub lr: f64,
    pub subratio_lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub epoch_cap: usize,
    pub max_epochs: usize,
    pub max_pole_fraction: f64,
}

impl Default for TuneSection {
    fn default() -> Self {
        let t = TuneConfig::default();
        TuneSection {
            lr: t.learning_rate,
            subratio_lr: t.subratio_learning_rate,
            batch_size: t.batch_size,
            patience: t.patience,
            epoch_cap: t.epoch_cap,
            max_epochs: t.max_epochs,
            max_pole_fraction: t.max_pole_fraction,
        }
    }
}

impl TuneSection {
    pub fn tune_config(&self, seed: u64) -> TuneConfig {
        TuneConfig {
            learning_rate: self.lr,
            subratio_learning_rate: self.subratio_lr,
            batch_size: self.batch_size,
            patience: self.patience,
            epoch_cap: self.epoch_cap,
            max_epochs: self.max_epochs,
            seed,
            max_pole_fraction: self.max_pole_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub bins: usize,
    /// Histogram range for every feature; per-feature defaults when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { bins: 50, range: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub sigma_w: Vec<f64>,
    /// η values per σ_w, uniform on `[eta_min, σ_w²/(1+σ_w²)]` inclusive.
    pub eta_count: usize,
    pub eta_min: f64,
    /// Samples per class before the train/val/test split.
    pub n: usize,
    pub seed: u64,
    pub mlp_arch: Vec<usize>,
    pub subratio_arch: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub epoch_cap: usize,
    pub max_epochs: usize,
    pub tune_max_epochs: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            sigma_w: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            eta_count: 3,
            eta_min: 0.02,
            n: 200_000,
            seed: 0,
            mlp_arch: vec![64, 64],
            subratio_arch: vec![32, 32],
            lr: 1e-3,
            batch_size: 256,
            patience: 20,
            epoch_cap: 50_000,
            max_epochs: 150,
            tune_max_epochs: 20,
        }
    }
}

impl SweepSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch_size,
            patience: self.patience,
            epoch_cap: self.epoch_cap,
            seed,
            max_epochs: self.max_epochs,
        }
    }

    /// The grid in row order: σ_w outer, η inner.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.sigma_w.len() * self.eta_count);
        for &s in &self.sigma_w {
            let hi = WeightNoiseSpec::eta_max(s);
            for j in 0..self.eta_count {
                let eta = if self.eta_count == 1 {
                    self.eta_min
                } else if j + 1 == self.eta_count {
                    hi
                } else {
                    self.eta_min + (hi - self.eta_min) * j as f64 / (self.eta_count - 1) as f64
                };
                out.push((s, eta));
            }
        }
        out
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn spec(s: SpecJson) -> Result<GaussianMixtureSpec> {
    Ok(GaussianMixtureSpec::new(s.c, s.sigma1, s.sigma2)?)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => bad(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if !matches!(d.kind.as_str(), "nonneg" | "signed" | "external") {
            return Err(bad(format!("data.kind {:?} is not nonneg, signed or external", d.kind)));
        }
        if d.n_train == 0 || d.n_val == 0 || d.n_test == 0 {
            return Err(bad("data sizes must be positive"));
        }
        self.specs()?;
        let t = &self.train;
        if t.arch.contains(&0) || t.subratio_arch.contains(&0) {
            return Err(bad("hidden layer widths must be positive"));
        }
        t.train_config(0).validate()?;
        PareParams::new(self.pare.t0, self.pare.t1)?;
        self.tune.tune_config(0).validate()?;
        let e = &self.eval;
        if e.bins == 0 {
            return Err(bad("eval.bins must be positive"));
        }
        if let Some([lo, hi]) = e.range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(bad(format!("eval.range [{lo}, {hi}] is not an increasing finite interval")));
            }
        }
        let s = &self.sweep;
        if s.sigma_w.is_empty() || s.eta_count == 0 || s.n < 10 {
            return Err(bad("sweep needs at least one sigma_w, eta_count >= 1 and n >= 10"));
        }
        for &sw in &s.sigma_w {
            if !(sw.is_finite() && sw > 0.0) {
                return Err(bad(format!("sweep sigma_w {sw} must be positive")));
            }
            if !(s.eta_min > 0.0 && s.eta_min <= WeightNoiseSpec::eta_max(sw)) {
                return Err(bad(format!("sweep eta_min {} outside (0, {}] for sigma_w {sw}", s.eta_min, WeightNoiseSpec::eta_max(sw))));
            }
        }
        if s.mlp_arch.contains(&0) || s.subratio_arch.contains(&0) || s.tune_max_epochs == 0 {
            return Err(bad("sweep widths and tune_max_epochs must be positive"));
        }
        s.train_config(0).validate()?;
        Ok(())
    }

    pub fn pare(&self) -> PareParams {
        PareParams { t0: self.pare.t0, t1: self.pare.t1 }
    }

    /// Generated kind, or `None` for external data.
    pub fn kind(&self) -> Option<ExperimentKind> {
        match self.data.kind.as_str() {
            "nonneg" => Some(ExperimentKind::Nonneg),
            "signed" => Some(ExperimentKind::Signed),
            _ => None,
        }
    }

    /// Reference and target specs: the toy pair for the kind, with any
    /// overrides applied.
    pub fn specs(&self) -> Result<Option<(GaussianMixtureSpec, GaussianMixtureSpec)>> {
        let Some(kind) = self.kind() else { return Ok(None) };
        let r = match self.data.reference {
            Some(s) => spec(s)?,
            None => GaussianMixtureSpec::toy_reference(),
        };
        let t = match self.data.target {
            Some(s) => spec(s)?,
            None => kind.target(),
        };
        Ok(Some((r, t)))
    }

    pub fn sizes(&self) -> SplitSizes {
        SplitSizes { train: self.data.n_train, val: self.data.n_val, test: self.data.n_test }
    }
}
