//! Dataset CSV files and their `.meta.json` sidecars.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rosmm_core::quasidata::{ClassStats, GaussianMixtureSpec, Source, WeightedDataset};
use serde::{Deserialize, Serialize};

use crate::format::{fmt_f64, to_json};
use crate::{Error, Result};

/// Split names in file order.
pub const SPLITS: [&str; 3] = ["train", "val", "test"];

/// `<dir>/<side>_<split>.csv`, where `side` is `ref` or `target`.
pub fn split_path(dir: &Path, side: &str, split: &str) -> PathBuf {
    dir.join(format!("{side}_{split}.csv"))
}

/// Sidecar of a dataset file: `name.csv` → `name.meta.json`.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpecJson {
    pub c: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl From<GaussianMixtureSpec> for SpecJson {
    fn from(s: GaussianMixtureSpec) -> Self {
        SpecJson { c: s.c, sigma1: s.sigma1, sigma2: s.sigma2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
enum SpecField {
    Mixture(SpecJson),
    Tag(String),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct ClassJson {
    n: usize,
    sum_w: f64,
    sum_w2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct MetaJson {
    spec: SpecField,
    seed: Option<u64>,
    dim: usize,
    classes: BTreeMap<String, ClassJson>,
}

fn meta_json(d: &WeightedDataset) -> MetaJson {
    let spec = match d.source() {
        Source::Mixture(s) => SpecField::Mixture(s.into()),
        Source::External => SpecField::Tag("external".into()),
    };
    let classes = (0..2u8)
        .map(|y| {
            let s = d.class_stats(y);
            (y.to_string(), ClassJson { n: s.n, sum_w: s.sum_w, sum_w2: s.sum_w2 })
        })
        .collect();
    MetaJson { spec, seed: d.seed(), dim: d.dim(), classes }
}

fn write_file(path: &Path, body: &[u8]) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Write `d` as CSV plus its sidecar.
pub fn write_dataset(path: &Path, d: &WeightedDataset) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let header: Vec<String> = (0..d.dim()).map(|i| format!("x{i}")).chain(["w".into(), "y".into()]).collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    let mut line = String::new();
    for s in d.iter() {
        line.clear();
        for v in s.x {
            line.push_str(&fmt_f64(*v));
            line.push(',');
        }
        line.push_str(&fmt_f64(s.w));
        line.push(',');
        line.push_str(if s.y == 0 { "0" } else { "1" });
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)?;
    write_file(&meta_path(path), to_json(&meta_json(d)).as_bytes())
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

/// Read a dataset CSV. The last two columns must be `w` and `y`; every other
/// column is a feature. If a sidecar exists, its dimension and per-class
/// counts and sums must agree with the rows, and its spec and seed are
/// attached to the result.
pub fn read_dataset(path: &Path) -> Result<WeightedDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let header = rdr.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
    let n_cols = header.len();
    if n_cols < 3 || &header[n_cols - 2] != "w" || &header[n_cols - 1] != "y" {
        return Err(Error::format(path, "header must end with columns w,y after at least one feature"));
    }
    let dim = n_cols - 2;
    let (mut x, mut w, mut y) = (Vec::new(), Vec::new(), Vec::new());
    let mut rec = csv::StringRecord::new();
    let mut row = 0usize;
    while rdr.read_record(&mut rec).map_err(|e| Error::format(path, e.to_string()))? {
        row += 1;
        if rec.len() != n_cols {
            return Err(Error::format(path, format!("row {row} has {} fields, expected {n_cols}", rec.len())));
        }
        let num = |j: usize| -> Result<f64> {
            rec[j].trim().parse::<f64>().map_err(|_| Error::format(path, format!("row {row}: bad number {:?}", &rec[j])))
        };
        for j in 0..dim {
            x.push(num(j)?);
        }
        w.push(num(dim)?);
        y.push(match rec[dim + 1].trim() {
            "0" => 0u8,
            "1" => 1u8,
            other => return Err(Error::format(path, format!("row {row}: label {other:?} is not 0 or 1"))),
        });
    }
    let mut d = WeightedDataset::from_columns(dim, x, w, y, Source::External, None)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let meta = meta_path(path);
    if meta.exists() {
        let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
        let m: MetaJson = serde_json::from_str(&text).map_err(|e| Error::format(&meta, e.to_string()))?;
        let source = match m.spec {
            SpecField::Mixture(s) => Source::Mixture(
                GaussianMixtureSpec::new(s.c, s.sigma1, s.sigma2).map_err(|e| Error::format(&meta, e.to_string()))?,
            ),
            SpecField::Tag(t) if t == "external" => Source::External,
            SpecField::Tag(t) => return Err(Error::format(&meta, format!("unknown spec tag {t:?}"))),
        };
        if m.dim != dim {
            return Err(Error::format(&meta, format!("dim {} but the CSV has {dim} feature columns", m.dim)));
        }
        for class in 0..2u8 {
            let got: ClassStats = d.class_stats(class);
            let want = m.classes.get(&class.to_string()).copied().unwrap_or(ClassJson { n: 0, sum_w: 0.0, sum_w2: 0.0 });
            if want.n != got.n || !close(want.sum_w, got.sum_w, got.sum_w2) || !close(want.sum_w2, got.sum_w2, got.sum_w2) {
                return Err(Error::format(&meta, format!("class {class} counts or sums disagree with {}", path.display())));
            }
        }
        d.set_source(source, m.seed);
    }
    Ok(d)
}

/// The six splits of one experiment directory.
#[derive(Debug, Clone)]
pub struct DataDir {
    pub reference: [WeightedDataset; 3],
    pub target: [WeightedDataset; 3],
}

impl DataDir {
    pub fn read(dir: &Path) -> Result<Self> {
        let side = |name: &str| -> Result<[WeightedDataset; 3]> {
            Ok([
                read_dataset(&split_path(dir, name, "train"))?,
                read_dataset(&split_path(dir, name, "val"))?,
                read_dataset(&split_path(dir, name, "test"))?,
            ])
        };
        let out = DataDir { reference: side("ref")?, target: side("target")? };
        let dim = out.reference[0].dim();
        if out.reference.iter().chain(&out.target).any(|d| d.dim() != dim) {
            return Err(Error::format(dir, "splits disagree on the feature dimension"));
        }
        Ok(out)
    }

    /// Reference (label 0) and target (label 1) of one split, joined.
    pub fn joined(&self, split: usize) -> Result<WeightedDataset> {
        let r = self.reference[split].clone().relabel(0);
        let t = self.target[split].clone().relabel(1);
        Ok(WeightedDataset::concat(&[&r, &t])?)
    }

    pub fn dim(&self) -> usize {
        self.reference[0].dim()
    }

    /// Mixture specs of reference and target, when both are generated.
    pub fn specs(&self) -> Option<(GaussianMixtureSpec, GaussianMixtureSpec)> {
        match (self.reference[2].source(), self.target[2].source()) {
            (Source::Mixture(r), Source::Mixture(t)) => Some((r, t)),
            _ => None,
        }
    }
}

/// Write the six splits into `dir`, creating it if needed.
pub fn write_experiment(dir: &Path, reference: [&WeightedDataset; 3], target: [&WeightedDataset; 3]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (side, sets) in [("ref", reference), ("target", target)] {
        for (split, d) in SPLITS.iter().zip(sets) {
            write_dataset(&split_path(dir, side, split), d)?;
        }
    }
    Ok(())
}
