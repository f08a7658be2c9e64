//! Command-line interface.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rosmm_core::quasidata::{generate_from_specs, GaussianMixtureSpec};
use serde::Serialize;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::data::{self, DataDir};
use crate::format::{fmt_f64, to_json};
use crate::pipeline::{self, Estimator, FitSettings, ModelKind, NamedFeature};
use crate::report;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "rosmm", version, about = "Likelihood-ratio estimation with negatively weighted data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the section this command uses.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate reference and target train/val/test datasets.
    Generate {
        #[command(flatten)]
        common: Common,
        /// nonneg or signed.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Train a model on a generated or external data directory.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// mlp, rosmm, rosmm_c or rosmm_r.
        #[arg(long)]
        model: String,
    },
    /// Closure reports of a checkpoint, or of the analytic ratio, on the test splits.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(required_unless_present = "oracle", conflicts_with = "oracle")]
        checkpoint: Option<PathBuf>,
        /// Use the analytic ratio of the generating mixtures.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated features: x, y, r, x<i> or a column index.
        #[arg(long)]
        features: Option<String>,
    },
    /// Weight-noise sweep over (sigma_w, eta).
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Print analytic densities, radial CDFs and ratios.
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        /// nonneg or signed.
        #[arg(long)]
        kind: Option<String>,
        /// Point `x,y`; repeatable.
        #[arg(long, allow_hyphen_values = true)]
        at: Vec<String>,
        /// Radius for the radial CDF; repeatable.
        #[arg(long)]
        r: Vec<f64>,
        /// CSV with header `x,y` or `r`.
        #[arg(long)]
        query: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Serialize)]
struct RunJson<'a> {
    command: &'a str,
    args: Vec<(&'a str, String)>,
    config: &'a RunConfig,
}

fn write_run_json(out: &Path, command: &str, args: Vec<(&str, String)>, cfg: &RunConfig) -> Result<()> {
    report::write(&out.join("run.json"), &to_json(&RunJson { command, args, config: cfg }))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common, kind } => {
            let mut cfg = load_config(common.config.as_deref())?;
            if let Some(k) = kind {
                cfg.data.kind = k;
            }
            if let Some(s) = common.seed {
                cfg.data.seed = s;
            }
            cfg.validate()?;
            let (r, t) = cfg.specs()?.ok_or_else(|| Error::Config("external data cannot be generated".into()))?;
            let exp = generate_from_specs(r, t, cfg.sizes(), cfg.data.seed)?;
            let (a, b) = (&exp.reference, &exp.target);
            data::write_experiment(&common.out, [&a.train, &a.val, &a.test], [&b.train, &b.val, &b.test])?;
            write_run_json(&common.out, "generate", vec![], &cfg)
        }
        Command::Train { common, data: dir, model } => {
            let mut cfg = load_config(common.config.as_deref())?;
            if let Some(s) = common.seed {
                cfg.train.seed = s;
            }
            cfg.validate()?;
            let kind = ModelKind::from_name(&model)
                .ok_or_else(|| Error::Config(format!("unknown model {model:?}; expected mlp, rosmm, rosmm_c or rosmm_r")))?;
            let d = DataDir::read(&dir)?;
            let trained = pipeline::fit(kind, &d.joined(0)?, &d.joined(1)?, &FitSettings::from_config(&cfg))?;
            create_dir(&common.out)?;
            checkpoint::save(&common.out.join(format!("{}.json", kind.name())), &trained.checkpoint)?;
            report::write(&common.out.join(format!("{}_loss.csv", kind.name())), &report::curves_csv(&trained.curves))?;
            let args = vec![("data", dir.display().to_string()), ("model", model)];
            write_run_json(&common.out, "train", args, &cfg)
        }
        Command::Evaluate { common, checkpoint: ck, oracle: _, data: dir, features } => {
            let cfg = load_config(common.config.as_deref())?;
            cfg.validate()?;
            let d = DataDir::read(&dir)?;
            let estimator = match ck {
                Some(p) => {
                    let c = checkpoint::load(&p)?;
                    Estimator::from_checkpoint(&c).map_err(|m| Error::format(&p, m))?
                }
                None => {
                    let (reference, target) = d
                        .specs()
                        .ok_or_else(|| Error::Config("--oracle needs generated data with mixture specs".into()))?;
                    Estimator::Oracle { reference, target }
                }
            };
            let generated = d.specs().is_some();
            let feats: Vec<NamedFeature> = match &features {
                Some(list) => pipeline::parse_features(list)?,
                None if generated => pipeline::parse_features("x,y,r")?,
                None => (0..d.dim()).map(|i| pipeline::parse_feature(&format!("x{i}"))).collect::<Result<_>>()?,
            };
            if feats.is_empty() {
                return Err(Error::Config("no features requested".into()));
            }
            let reports = pipeline::evaluate(&estimator, &d.reference[2], &d.target[2], &feats, &cfg.eval, generated)?;
            create_dir(&common.out)?;
            let name = estimator.name();
            let mut summary = report::summary_header().to_string();
            for r in &reports {
                report::write(&common.out.join(format!("report_{}.json", r.feature)), &report::report_json(name, r))?;
                report::write(&common.out.join(format!("report_{}.csv", r.feature)), &report::report_csv(r)?)?;
                summary.push_str(&report::summary_row(name, r));
            }
            report::write(&common.out.join("summary.csv"), &summary)?;
            let mut args = vec![("data", dir.display().to_string()), ("model", name.to_string())];
            if let Some(f) = features {
                args.push(("features", f));
            }
            write_run_json(&common.out, "evaluate", args, &cfg)
        }
        Command::Sweep { common } => {
            let mut cfg = load_config(common.config.as_deref())?;
            if let Some(s) = common.seed {
                cfg.sweep.seed = s;
            }
            cfg.validate()?;
            create_dir(&common.out)?;
            let rows = pipeline::sweep(&cfg, |r| {
                eprint!("sweep: {}", report::sweep_row(r));
            })?;
            let mut body = report::sweep_header().to_string();
            rows.iter().for_each(|r| body.push_str(&report::sweep_row(r)));
            report::write(&common.out.join("sweep.csv"), &body)?;
            write_run_json(&common.out, "sweep", vec![], &cfg)?;
            let ok = rows.iter().filter(|r| r.status == "ok").count();
            if (ok as f64) < 0.9 * rows.len() as f64 {
                return Err(rosmm_core::Error::Numeric(format!("only {ok} of {} sweep rows succeeded", rows.len())).into());
            }
            Ok(())
        }
        Command::Oracle { config, kind, at, r, query } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(k) = kind {
                cfg.data.kind = k;
            }
            cfg.validate()?;
            let (reference, target) =
                cfg.specs()?.ok_or_else(|| Error::Config("the oracle needs kind nonneg or signed".into()))?;
            let mut points = Vec::new();
            for a in &at {
                points.push(parse_point(a)?);
            }
            let mut radii = r;
            if let Some(q) = &query {
                read_query(q, &mut points, &mut radii)?;
            }
            print!("{}", oracle_text(&reference, &target, &points, &radii)?);
            Ok(())
        }
    }
}

fn parse_point(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("point {s:?} is not of the form x,y"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    Ok((x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
}

fn read_query(path: &Path, points: &mut Vec<(f64, f64)>, radii: &mut Vec<f64>) -> Result<()> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let header: Vec<String> =
        rdr.headers().map_err(|e| Error::format(path, e.to_string()))?.iter().map(|h| h.trim().to_string()).collect();
    let radial = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x", "y"] => false,
        ["r"] => true,
        _ => return Err(Error::format(path, "query header must be `x,y` or `r`")),
    };
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let num = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::format(path, format!("row {}: bad number", i + 1)))
        };
        if radial {
            radii.push(num(0)?);
        } else {
            points.push((num(0)?, num(1)?));
        }
    }
    Ok(())
}

/// Oracle printout: the two specs with their nonnegativity, then one line per
/// point and per radius.
pub fn oracle_text(
    reference: &GaussianMixtureSpec,
    target: &GaussianMixtureSpec,
    points: &[(f64, f64)],
    radii: &[f64],
) -> Result<String> {
    let mut out = String::from("spec,c,sigma1,sigma2,nonnegative\n");
    for (name, s) in [("reference", reference), ("target", target)] {
        out.push_str(&format!("{name},{},{},{},{}\n", s.c, s.sigma1, s.sigma2, s.is_nonnegative()));
    }
    if !points.is_empty() {
        out.push_str("\nx,y,density_reference,density_target,ratio\n");
        for &(x, y) in points {
            let ratio = rosmm_core::quasidata::analytic_ratio(target, reference, x, y)?;
            let cells = [x, y, reference.density(x, y), target.density(x, y), ratio].map(fmt_f64);
            out.push_str(&cells.join(","));
            out.push('\n');
        }
    }
    if !radii.is_empty() {
        out.push_str("\nr,cdf_reference,cdf_target\n");
        for &r in radii {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("radius {r} must be finite and >= 0")));
            }
            let cells = [r, reference.radial_cdf(r), target.radial_cdf(r)].map(fmt_f64);
            out.push_str(&cells.join(","));
            out.push('\n');
        }
    }
    Ok(out)
}

/// Configure the worker pool from `ROSMM_THREADS`, if set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ROSMM_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| Error::Config(format!("ROSMM_THREADS={v:?} is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

/// Parse arguments, run and return the process exit code.
pub fn main_with_args<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match init_threads().and_then(|_| run(cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
