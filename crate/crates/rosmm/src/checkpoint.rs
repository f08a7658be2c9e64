//! JSON checkpoints for MLP classifiers and RoSMM models.

use std::fs;
use std::path::Path;

use rosmm_core::losses::PareParams;
use rosmm_core::nn::{MlpModel, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
use rosmm_core::rosmm::{Pair, RosmmModel, Variant};
use serde::{Deserialize, Serialize};

use crate::format::to_json;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AdamJson {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamJson {
    fn default() -> Self {
        AdamJson { beta1: ADAM_BETA1, beta2: ADAM_BETA2, eps: ADAM_EPS }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MlpCheckpoint {
    pub kind: String,
    pub arch: Vec<usize>,
    pub activation: String,
    pub output: String,
    /// One row-major `n_out x n_in` block per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub seed: u64,
    pub loss: String,
    pub adam: AdamJson,
}

impl MlpCheckpoint {
    pub fn new(model: &MlpModel, seed: u64, loss: &str) -> Self {
        let (weights, biases) = (0..model.n_layers())
            .map(|l| {
                let (w, b) = model.layer(l);
                (w.to_vec(), b.to_vec())
            })
            .unzip();
        MlpCheckpoint {
            kind: "mlp".into(),
            arch: model.layer_sizes().to_vec(),
            activation: "relu".into(),
            output: "sigmoid".into(),
            weights,
            biases,
            seed,
            loss: loss.into(),
            adam: AdamJson::default(),
        }
    }

    pub fn model(&self) -> std::result::Result<MlpModel, String> {
        check_kind(&self.kind, "mlp")?;
        if self.activation != "relu" || self.output != "sigmoid" {
            return Err(format!("unsupported activation {:?} / output {:?}", self.activation, self.output));
        }
        if !matches!(self.loss.as_str(), "bce" | "mse" | "pare") {
            return Err(format!("unknown loss {:?}", self.loss));
        }
        MlpModel::from_layers(&self.arch, &self.weights, &self.biases).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SubratioSet {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pp: Option<MlpCheckpoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pn: Option<MlpCheckpoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub np: Option<MlpCheckpoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nn: Option<MlpCheckpoint>,
}

impl SubratioSet {
    fn slots(&self) -> [&Option<MlpCheckpoint>; 4] {
        [&self.pp, &self.pn, &self.np, &self.nn]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RosmmCheckpoint {
    pub kind: String,
    pub variant: String,
    pub c0: f64,
    pub c1: f64,
    pub t0: f64,
    pub t1: f64,
    pub subratios: SubratioSet,
}

impl RosmmCheckpoint {
    /// Sub-ratio `k` is recorded with seed `seeds[k]`.
    pub fn new(model: &RosmmModel, seeds: [u64; 4]) -> Self {
        let ck = |p: Pair| model.subratio(p).map(|m| MlpCheckpoint::new(m, seeds[p.index()], "bce"));
        RosmmCheckpoint {
            kind: "rosmm".into(),
            variant: model.variant.name().into(),
            c0: model.c0,
            c1: model.c1,
            t0: model.pare.t0,
            t1: model.pare.t1,
            subratios: SubratioSet { pp: ck(Pair::PP), pn: ck(Pair::PN), np: ck(Pair::NP), nn: ck(Pair::NN) },
        }
    }

    pub fn model(&self) -> std::result::Result<RosmmModel, String> {
        check_kind(&self.kind, "rosmm")?;
        let variant = Variant::from_name(&self.variant).ok_or_else(|| format!("unknown variant {:?}", self.variant))?;
        let pare = PareParams::new(self.t0, self.t1).map_err(|e| e.to_string())?;
        let mut subratios: [Option<MlpModel>; 4] = Default::default();
        for (slot, ck) in subratios.iter_mut().zip(self.subratios.slots()) {
            if let Some(ck) = ck {
                *slot = Some(ck.model()?);
            }
        }
        RosmmModel::from_parts(subratios, self.c0, self.c1, pare, variant).map_err(|e| e.to_string())
    }
}

fn check_kind(got: &str, want: &str) -> std::result::Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("kind mismatch: expected a {want:?} checkpoint, found {got:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoint {
    Mlp(MlpCheckpoint),
    Rosmm(RosmmCheckpoint),
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        match self {
            Checkpoint::Mlp(c) => to_json(c),
            Checkpoint::Rosmm(c) => to_json(c),
        }
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let kind = v.get("kind").and_then(|k| k.as_str()).ok_or("missing \"kind\" field")?;
        match kind {
            "mlp" => Ok(Checkpoint::Mlp(serde_json::from_value(v).map_err(|e| e.to_string())?)),
            "rosmm" => Ok(Checkpoint::Rosmm(serde_json::from_value(v).map_err(|e| e.to_string())?)),
            other => Err(format!("unknown checkpoint kind {other:?}")),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Checkpoint::Mlp(_) => "mlp",
            Checkpoint::Rosmm(_) => "rosmm",
        }
    }
}

pub fn save(path: &Path, ck: &Checkpoint) -> Result<()> {
    fs::write(path, ck.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::parse(&text).map_err(|m| Error::format(path, m))
}

pub fn load_mlp(path: &Path) -> Result<MlpModel> {
    match load(path)? {
        Checkpoint::Mlp(c) => c.model().map_err(|m| Error::format(path, m)),
        other => Err(Error::format(path, format!("kind mismatch: expected \"mlp\", found {:?}", other.kind()))),
    }
}

pub fn load_rosmm(path: &Path) -> Result<RosmmModel> {
    match load(path)? {
        Checkpoint::Rosmm(c) => c.model().map_err(|m| Error::format(path, m)),
        other => Err(Error::format(path, format!("kind mismatch: expected \"rosmm\", found {:?}", other.kind()))),
    }
}
