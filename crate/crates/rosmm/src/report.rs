//! Closure report, summary, loss-curve and sweep output files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rosmm_core::eval::{ClosureReport, WeightedHistogram};
use rosmm_core::nn::LossCurve;
use serde::Serialize;

use crate::format::{fmt_f64, to_json};
use crate::pipeline::SweepRow;
use crate::{Error, Result};

#[derive(Serialize)]
struct HistJson<'a> {
    sum_w: &'a [f64],
    sum_w2: &'a [f64],
    entries: &'a [u64],
    total_w: f64,
    underflow: f64,
    overflow: f64,
}

impl<'a> From<&'a WeightedHistogram> for HistJson<'a> {
    fn from(h: &'a WeightedHistogram) -> Self {
        HistJson { sum_w: &h.sum_w, sum_w2: &h.sum_w2, entries: &h.entries, total_w: h.total_w, underflow: h.underflow, overflow: h.overflow }
    }
}

#[derive(Serialize)]
struct ReportJson<'a> {
    model: &'a str,
    feature: &'a str,
    chi2: f64,
    tsallis_d2: f64,
    n_bins_used: usize,
    zeroed_negative_bins: &'a [usize],
    edges: &'a [f64],
    target: HistJson<'a>,
    reweighted: HistJson<'a>,
}

pub fn report_json(model: &str, r: &ClosureReport) -> String {
    to_json(&ReportJson {
        model,
        feature: &r.feature,
        chi2: r.chi2,
        tsallis_d2: r.tsallis_d2,
        n_bins_used: r.n_bins_used,
        zeroed_negative_bins: &r.zeroed_negative_bins,
        edges: &r.target.edges,
        target: (&r.target).into(),
        reweighted: (&r.reweighted).into(),
    })
}

/// Per-bin unit-normalized masses and their standard errors.
pub fn report_csv(r: &ClosureReport) -> Result<String> {
    let (p, vp) = r.target.normalized()?;
    let (q, vq) = r.reweighted.normalized()?;
    let mut out = String::from("bin_lo,bin_hi,target_w,target_err,reweighted_w,reweighted_err\n");
    for b in 0..p.len() {
        let cells = [r.target.edges[b], r.target.edges[b + 1], p[b], vp[b].sqrt(), q[b], vq[b].sqrt()];
        let line: Vec<String> = cells.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", line.join(",")).unwrap();
    }
    Ok(out)
}

pub fn summary_header() -> &'static str {
    "model,feature,chi2,tsallis_d2\n"
}

pub fn summary_row(model: &str, r: &ClosureReport) -> String {
    format!("{model},{},{},{}\n", r.feature, fmt_f64(r.chi2), fmt_f64(r.tsallis_d2))
}

/// `stage,epoch,train_loss,val_loss`, epochs numbered from 1.
pub fn curves_csv(curves: &[(String, LossCurve)]) -> String {
    let mut out = String::from("stage,epoch,train_loss,val_loss\n");
    for (stage, c) in curves {
        for (e, (t, v)) in c.train.iter().zip(&c.val).enumerate() {
            writeln!(out, "{stage},{},{},{}", e + 1, fmt_f64(*t), fmt_f64(*v)).unwrap();
        }
    }
    out
}

pub fn sweep_header() -> &'static str {
    "sigma_w,eta,model,vlrc_auc,tsallis_d2,chi2,status\n"
}

pub fn sweep_row(r: &SweepRow) -> String {
    format!(
        "{},{},{},{},{},{},{}\n",
        fmt_f64(r.sigma_w),
        fmt_f64(r.eta),
        r.model,
        fmt_f64(r.vlrc_auc),
        fmt_f64(r.tsallis_d2),
        fmt_f64(r.chi2),
        r.status
    )
}

pub fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}
