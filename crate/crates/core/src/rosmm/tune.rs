use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{assemble, batched_logits, inverse_from_logit, logit_clamp, Pair, RosmmModel, Variant};
use crate::losses::PareParams;
use crate::math;
use crate::nn::{AdamState, EarlyStopping, LossCurve, StopVerdict, Workspace};
use crate::nn::train::BatchBuffer;
use crate::quasidata::WeightedDataset;
use crate::rng::Stream;
use crate::{Error, Result};

/// Loss charged per unit `|w|` for a sample whose ratio falls in the pole
/// band (or is undefined) when the objective is only evaluated.
pub const POLE_PENALTY: f64 = 1e12;

/// Optimizer settings for coefficient and full tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneConfig {
    /// Adam step size for `(c0, c1)`.
    pub learning_rate: f64,
    /// Adam step size for sub-ratio parameters (full tuning only).
    pub subratio_learning_rate: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub epoch_cap: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Largest tolerated fraction of rejected batches per epoch.
    pub max_pole_fraction: f64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            learning_rate: 1e-4,
            subratio_learning_rate: 1e-4,
            batch_size: 512,
            patience: 10,
            epoch_cap: 100_000,
            max_epochs: 10_000,
            seed: 0,
            max_pole_fraction: 0.01,
        }
    }
}

impl TuneConfig {
    pub fn validate(&self) -> Result<()> {
        let lr_ok = |v: f64| v.is_finite() && v >= 0.0;
        if !lr_ok(self.learning_rate) || !lr_ok(self.subratio_learning_rate) {
            return Err(Error::Config("tuning learning rates must be finite and >= 0".into()));
        }
        if self.batch_size == 0 || self.patience == 0 || self.epoch_cap == 0 || self.max_epochs == 0 {
            return Err(Error::Config("tuning batch_size, patience, epoch_cap and max_epochs must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.max_pole_fraction) {
            return Err(Error::Config("max_pole_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Inverse sub-ratios `(1 - s_k) / s_k` of every present classifier at a set
/// of points. Absent classifiers read as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseSubratios {
    n: usize,
    u: [Vec<f64>; 4],
}

impl InverseSubratios {
    /// Evaluate the classifiers of `model` on row-major `x`.
    pub fn compute(model: &RosmmModel, x: &[f64]) -> Result<Self> {
        let dim = model.input_dim();
        if dim == 0 || x.len() % dim != 0 {
            return Err(Error::Shape(format!("{} values for dimension {dim}", x.len())));
        }
        let n = x.len() / dim;
        let bound = logit_clamp();
        let mut ws = Workspace::default();
        let mut z = Vec::new();
        let mut u: [Vec<f64>; 4] = Default::default();
        for (k, m) in model.subratios().iter().enumerate() {
            match m {
                Some(m) => {
                    batched_logits(m, x, &mut ws, &mut z);
                    u[k] = z.iter().map(|&z| inverse_from_logit(z, bound).0).collect();
                }
                None => u[k] = vec![0.0; n],
            }
        }
        Ok(InverseSubratios { n, u })
    }

    /// Table from a function of `(pair, row)`, e.g. analytic sub-ratios.
    pub fn from_fn<F: FnMut(Pair, usize) -> f64>(n: usize, mut f: F) -> Self {
        let mut u: [Vec<f64>; 4] = Default::default();
        for p in Pair::ALL {
            u[p.index()] = (0..n).map(|i| f(p, i)).collect();
        }
        InverseSubratios { n, u }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> [f64; 4] {
        [self.u[0][i], self.u[1][i], self.u[2][i], self.u[3][i]]
    }
}

/// Rescale each class so that both carry total weight `N / 2`. With equal
/// class counts this is division by the class mean weight.
pub(crate) fn balanced(data: &WeightedDataset) -> Result<WeightedDataset> {
    let mut out = data.clone();
    let half = data.len() as f64 / 2.0;
    for class in 0..2u8 {
        let st = data.class_stats(class);
        if st.n == 0 || st.sum_w == 0.0 {
            return Err(Error::Degenerate(format!("class {class} is empty or has zero total weight")));
        }
        let scale = half / st.sum_w;
        let y = data.labels();
        for (w, _) in out.weights_mut().iter_mut().zip(y).filter(|(_, yi)| **yi == class) {
            *w *= scale;
        }
    }
    Ok(out)
}

/// PARE loss of one sample as a function of its ratio, with `dL/dr`.
/// `None` inside the pole band or for an undefined ratio.
#[inline]
fn pare_at_ratio(r: f64, y: u8, w: f64, t: &PareParams) -> Option<(f64, f64)> {
    if !r.is_finite() || t.in_pole_band(r) {
        return None;
    }
    let den = t.denominator(r);
    let s = (t.t0 + t.t1 * r) / den;
    let ty = t.target(y);
    let e = 1.0 - s * ty;
    let ds_dr = t.t0 * t.t1 * (t.t0 - t.t1) / (den * den);
    Some((w * e * e, -2.0 * w * ty * e * ds_dr))
}

/// Mean PARE objective over a table, with [`POLE_PENALTY`] for pole hits.
fn table_objective(c: [f64; 2], deg: [bool; 2], u: &InverseSubratios, data: &WeightedDataset, t: &PareParams) -> f64 {
    let (y, w) = (data.labels(), data.weights());
    let mut total = 0.0;
    for i in 0..u.len() {
        let v = assemble(c[0], c[1], &u.row(i), deg).and_then(|a| pare_at_ratio(a.r, y[i], w[i], t));
        total += match v {
            Some((l, _)) => l,
            None => POLE_PENALTY * math::abs(w[i]),
        };
    }
    total / u.len() as f64
}

/// Objective evaluated over a coefficient grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LandscapeObjective {
    Pare(PareParams),
    /// Weighted MSE on `s = r / (1 + r)`; singular at `r = -1`.
    MseRatioTrick,
}

/// Objective values on a `c0 x c1` grid, `values[i * c1.len() + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub c0: Vec<f64>,
    pub c1: Vec<f64>,
    pub values: Vec<f64>,
}

impl Landscape {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.c1.len() + j]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Median of the finite values.
    pub fn median(&self) -> f64 {
        let finite: Vec<f64> = self.values.iter().copied().filter(|v| v.is_finite()).collect();
        math::median(&finite)
    }

    /// Cells strictly below every one of their (up to eight) neighbours.
    pub fn local_minima(&self) -> Vec<(usize, usize)> {
        let (n0, n1) = (self.c0.len() as isize, self.c1.len() as isize);
        let mut out = Vec::new();
        for i in 0..n0 {
            for j in 0..n1 {
                let v = self.get(i as usize, j as usize);
                if !v.is_finite() {
                    continue;
                }
                let mut is_min = true;
                for di in -1..=1isize {
                    for dj in -1..=1isize {
                        let (a, b) = (i + di, j + dj);
                        if (di, dj) == (0, 0) || a < 0 || b < 0 || a >= n0 || b >= n1 {
                            continue;
                        }
                        let nb = self.get(a as usize, b as usize);
                        if !(v < nb) {
                            is_min = false;
                        }
                    }
                }
                if is_min {
                    out.push((i as usize, j as usize));
                }
            }
        }
        out
    }

    /// Grid coordinates and value of the smallest finite cell.
    pub fn argmin(&self) -> Option<(f64, f64, f64)> {
        let mut best: Option<(f64, f64, f64)> = None;
        for (i, &a) in self.c0.iter().enumerate() {
            for (j, &b) in self.c1.iter().enumerate() {
                let v = self.get(i, j);
                if v.is_finite() && best.map_or(true, |(_, _, bv)| v < bv) {
                    best = Some((a, b, v));
                }
            }
        }
        best
    }
}

/// Tuning objective over a grid of coefficients with the sub-ratios frozen
/// at `table` (rows aligned with `data`). Class weights are balanced first.
pub fn coefficient_landscape(
    table: &InverseSubratios,
    data: &WeightedDataset,
    degenerate: [bool; 2],
    objective: LandscapeObjective,
    c0: &[f64],
    c1: &[f64],
) -> Result<Landscape> {
    if table.len() != data.len() {
        return Err(Error::Shape(format!("table has {} rows, data {}", table.len(), data.len())));
    }
    let data = balanced(data)?;
    let (y, w) = (data.labels(), data.weights());
    let mut values = Vec::with_capacity(c0.len() * c1.len());
    for &a in c0 {
        for &b in c1 {
            let v = match objective {
                LandscapeObjective::Pare(t) => table_objective([a, b], degenerate, table, &data, &t),
                LandscapeObjective::MseRatioTrick => {
                    let mut total = 0.0;
                    for i in 0..table.len() {
                        let r = assemble(a, b, &table.row(i), degenerate).map_or(f64::NAN, |x| x.r);
                        let s = r / (1.0 + r);
                        let e = s - y[i] as f64;
                        total += w[i] * e * e;
                    }
                    total / table.len() as f64
                }
            };
            values.push(v);
        }
    }
    Ok(Landscape { c0: c0.to_vec(), c1: c1.to_vec(), values })
}

fn check_tuning_data(model: &RosmmModel, train: &WeightedDataset, val: &WeightedDataset) -> Result<()> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config("tuning sets must be non-empty".into()));
    }
    if train.dim() != model.input_dim() || val.dim() != model.input_dim() {
        return Err(Error::Shape(format!(
            "model expects {} features, data has {} / {}",
            model.input_dim(),
            train.dim(),
            val.dim()
        )));
    }
    if train.len() > u32::MAX as usize {
        return Err(Error::Config("tuning set too large".into()));
    }
    Ok(())
}

fn pole_check(failed: usize, batches: usize, epoch: usize, config: &TuneConfig) -> Result<()> {
    if failed as f64 > config.max_pole_fraction * batches as f64 {
        return Err(Error::Numeric(format!(
            "{failed} of {batches} batches hit the PARE pole in tuning epoch {epoch}"
        )));
    }
    Ok(())
}

/// Coefficient tuning on precomputed inverse sub-ratios, with balanced data.
pub(crate) fn tune_on_tables(
    start: [f64; 2],
    deg: [bool; 2],
    pare: &PareParams,
    train: (&InverseSubratios, &WeightedDataset),
    val: (&InverseSubratios, &WeightedDataset),
    config: &TuneConfig,
) -> Result<([f64; 2], LossCurve)> {
    let (ut, tr) = train;
    let (uv, va) = val;
    let t = *pare;
    let mut c = start;
    let mut adam = AdamState::new(2);
    let mut stopper = EarlyStopping::with_baseline(config.patience, table_objective(c, deg, uv, va, &t));
    let mut best = c;
    let mut curve = LossCurve::default();
    let mut rng = Stream::new(config.seed);
    let mut order: Vec<u32> = (0..tr.len() as u32).collect();
    let epoch_len = tr.len().min(config.epoch_cap);
    let (y, w) = (tr.labels(), tr.weights());

    for epoch in 1..=config.max_epochs {
        rng.shuffle(&mut order);
        let (mut sum, mut used, mut failed, mut batches) = (0.0, 0usize, 0usize, 0usize);
        for rows in order[..epoch_len].chunks(config.batch_size) {
            batches += 1;
            let mut g = [0.0; 2];
            let mut loss = 0.0;
            let mut ok = true;
            for &i in rows {
                let i = i as usize;
                match assemble(c[0], c[1], &ut.row(i), deg).and_then(|a| pare_at_ratio(a.r, y[i], w[i], &t).map(|v| (a, v))) {
                    Some((a, (l, dldr))) => {
                        loss += l;
                        g[0] += dldr * a.dc[0];
                        g[1] += dldr * a.dc[1];
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                failed += 1;
                continue;
            }
            let inv = 1.0 / rows.len() as f64;
            let g = [g[0] * inv, g[1] * inv];
            adam.update(&mut c, &g, config.learning_rate)?;
            sum += loss;
            used += rows.len();
        }
        pole_check(failed, batches, epoch, config)?;
        curve.train.push(if used > 0 { sum / used as f64 } else { f64::NAN });
        let v = table_objective(c, deg, uv, va, &t);
        curve.val.push(v);
        curve.stopped_epoch = epoch;
        match stopper.record(v) {
            StopVerdict::Improved => best = c,
            StopVerdict::Stop => break,
            StopVerdict::Continue => {}
        }
    }
    curve.best_epoch = stopper.best_epoch();
    Ok((best, curve))
}

/// Minimize the PARE objective over `(c0, c1)` with the sub-ratios frozen.
///
/// Weights are balanced per class. The starting coefficients count as epoch
/// 0 for early stopping, so the result never has a higher validation loss
/// than the input. Batches with a sample in the pole band are skipped; if
/// more than `max_pole_fraction` of an epoch's batches are skipped the run
/// fails. A degenerate class keeps `c_y = 1`.
pub fn tune_coefficients(
    model: &RosmmModel,
    train: &WeightedDataset,
    val: &WeightedDataset,
    config: &TuneConfig,
) -> Result<(RosmmModel, LossCurve)> {
    config.validate()?;
    check_tuning_data(model, train, val)?;
    let tr = balanced(train)?;
    let va = balanced(val)?;
    let ut = InverseSubratios::compute(model, tr.features())?;
    let uv = InverseSubratios::compute(model, va.features())?;
    let (best, curve) = tune_on_tables([model.c0, model.c1], model.degenerate(), &model.pare, (&ut, &tr), (&uv, &va), config)?;
    let mut out = model.clone();
    out.c0 = best[0];
    out.c1 = best[1];
    out.variant = Variant::CoefTuned;
    Ok((out, curve))
}

/// Scratch space for joint gradients through the assembly.
#[derive(Default)]
struct FullWorkspace {
    ws: [Workspace; 4],
    z: [Vec<f64>; 4],
    dz: [Vec<f64>; 4],
}

/// Mean PARE loss of a batch and its gradient with respect to `(c0, c1)` and
/// every present sub-ratio's parameters. `None` if a sample hits the pole.
fn full_batch_grad(
    model: &RosmmModel,
    x: &[f64],
    y: &[u8],
    w: &[f64],
    fw: &mut FullWorkspace,
    gc: &mut [f64; 2],
    gsub: &mut [Vec<f64>; 4],
) -> Option<f64> {
    let n = y.len();
    let bound = logit_clamp();
    let deg = model.degenerate();
    for (k, m) in model.subratios().iter().enumerate() {
        if let Some(m) = m {
            let z = m.forward_batch(x, n, &mut fw.ws[k]);
            fw.z[k].clear();
            fw.z[k].extend_from_slice(z);
            fw.dz[k].clear();
            fw.dz[k].resize(n, 0.0);
        }
    }
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0;
    let mut g = [0.0; 2];
    for i in 0..n {
        let mut u = [0.0; 4];
        let mut free = [false; 4];
        for k in 0..4 {
            if model.subratios()[k].is_some() {
                (u[k], free[k]) = inverse_from_logit(fw.z[k][i], bound);
            }
        }
        let a = assemble(model.c0, model.c1, &u, deg)?;
        let (l, dldr) = pare_at_ratio(a.r, y[i], w[i], &model.pare)?;
        total += l;
        g[0] += dldr * a.dc[0];
        g[1] += dldr * a.dc[1];
        for k in 0..4 {
            if free[k] {
                // du/dz = -u
                fw.dz[k][i] = -dldr * a.du[k] * u[k] * inv_n;
            }
        }
    }
    gc[0] = g[0] * inv_n;
    gc[1] = g[1] * inv_n;
    for (k, m) in model.subratios().iter().enumerate() {
        if let Some(m) = m {
            gsub[k].clear();
            gsub[k].resize(m.n_params(), 0.0);
            m.backward(x, &fw.dz[k], &mut fw.ws[k], &mut gsub[k]);
        }
    }
    Some(total * inv_n)
}

/// Mean PARE objective of `model` on a batch (weights used as given) and its
/// gradient, laid out as `[c0, c1, pp params, pn params, np params, nn params]`
/// over the present sub-ratios. Errors on a pole hit.
pub fn full_objective(model: &RosmmModel, x: &[f64], y: &[u8], w: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = y.len();
    if n == 0 || x.len() != n * model.input_dim() || w.len() != n {
        return Err(Error::Shape("batch arrays disagree with each other or the model".into()));
    }
    let mut fw = FullWorkspace::default();
    let mut gc = [0.0; 2];
    let mut gsub: [Vec<f64>; 4] = Default::default();
    let value = full_batch_grad(model, x, y, w, &mut fw, &mut gc, &mut gsub)
        .ok_or_else(|| Error::Numeric("batch hits the PARE pole".into()))?;
    let mut g = gc.to_vec();
    for v in gsub.iter() {
        g.extend_from_slice(v);
    }
    Ok((value, g))
}

impl RosmmModel {
    /// `[c0, c1]` followed by the parameters of the present sub-ratios.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = vec![self.c0, self.c1];
        for m in self.subratios().iter().flatten() {
            out.extend_from_slice(m.params());
        }
        out
    }

    /// Inverse of [`RosmmModel::flat_params`].
    pub fn set_flat_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.flat_params().len() {
            return Err(Error::Shape(format!("expected {} parameters, got {}", self.flat_params().len(), p.len())));
        }
        self.c0 = p[0];
        self.c1 = p[1];
        let mut off = 2;
        for m in self.subratios_mut().iter_mut().flatten() {
            let n = m.n_params();
            m.params_mut().copy_from_slice(&p[off..off + n]);
            off += n;
        }
        Ok(())
    }
}

/// Joint tuning of the coefficients and all sub-ratio parameters on the PARE
/// objective, starting from `model`. Same stopping and pole rules as
/// [`tune_coefficients`]; the coefficients of degenerate classes stay at 1.
pub fn tune_full(
    model: &RosmmModel,
    train: &WeightedDataset,
    val: &WeightedDataset,
    config: &TuneConfig,
) -> Result<(RosmmModel, LossCurve)> {
    config.validate()?;
    check_tuning_data(model, train, val)?;
    let tr = balanced(train)?;
    let va = balanced(val)?;
    let deg = model.degenerate();
    let val_loss = |m: &RosmmModel| -> Result<f64> {
        let u = InverseSubratios::compute(m, va.features())?;
        Ok(table_objective([m.c0, m.c1], deg, &u, &va, &m.pare))
    };
    let mut cur = model.clone();
    let mut adam_c = AdamState::new(2);
    let mut adam_s: [AdamState; 4] =
        core::array::from_fn(|k| AdamState::new(cur.subratios()[k].as_ref().map_or(0, |m| m.n_params())));
    let mut stopper = EarlyStopping::with_baseline(config.patience, val_loss(&cur)?);
    let mut best = cur.clone();
    let mut curve = LossCurve::default();
    let mut rng = Stream::new(config.seed);
    let mut order: Vec<u32> = (0..tr.len() as u32).collect();
    let epoch_len = tr.len().min(config.epoch_cap);
    let mut buf = BatchBuffer::default();
    let mut fw = FullWorkspace::default();
    let mut gsub: [Vec<f64>; 4] = Default::default();

    for epoch in 1..=config.max_epochs {
        rng.shuffle(&mut order);
        let (mut sum, mut used, mut failed, mut batches) = (0.0, 0usize, 0usize, 0usize);
        for rows in order[..epoch_len].chunks(config.batch_size) {
            batches += 1;
            buf.gather(&tr, rows);
            let mut gc = [0.0; 2];
            let Some(v) = full_batch_grad(&cur, &buf.x, &buf.y, &buf.w, &mut fw, &mut gc, &mut gsub) else {
                failed += 1;
                continue;
            };
            if !v.is_finite() || gsub.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!("non-finite tuning gradient in epoch {epoch}")));
            }
            let mut c = [cur.c0, cur.c1];
            adam_c.update(&mut c, &gc, config.learning_rate)?;
            cur.c0 = c[0];
            cur.c1 = c[1];
            for (k, m) in cur.subratios_mut().iter_mut().enumerate() {
                if let Some(m) = m {
                    adam_s[k].update(m.params_mut(), &gsub[k], config.subratio_learning_rate)?;
                }
            }
            sum += v * rows.len() as f64;
            used += rows.len();
        }
        pole_check(failed, batches, epoch, config)?;
        curve.train.push(if used > 0 { sum / used as f64 } else { f64::NAN });
        let v = val_loss(&cur)?;
        curve.val.push(v);
        curve.stopped_epoch = epoch;
        match stopper.record(v) {
            StopVerdict::Improved => best.clone_from(&cur),
            StopVerdict::Stop => break,
            StopVerdict::Continue => {}
        }
    }
    curve.best_epoch = stopper.best_epoch();
    best.variant = Variant::FullTuned;
    Ok((best, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::MlpModel;
    use crate::quasidata::{sample_weighted, GaussianMixtureSpec, Source};

    fn n2(x: &[f64], s: f64) -> f64 {
        (-0.5 * (x[0] * x[0] + x[1] * x[1]) / (s * s)).exp() / (core::f64::consts::TAU * s * s)
    }

    /// Signed toy pair on a quadrature grid: weights `q_y(x) dA`, so sample
    /// means are integrals and the objective is the population functional.
    fn quadrature_instance() -> (WeightedDataset, InverseSubratios) {
        let (r, t) = (GaussianMixtureSpec::toy_reference(), GaussianMixtureSpec::toy_signed_target());
        let (m, half) = (160usize, 20.0);
        let h = 2.0 * half / m as f64;
        let mut d = WeightedDataset::new(2, Source::External, None);
        let mut pts = Vec::new();
        for (y, spec) in [(0u8, r), (1u8, t)] {
            for i in 0..m {
                for j in 0..m {
                    let x = [-half + (i as f64 + 0.5) * h, -half + (j as f64 + 0.5) * h];
                    d.push(&x, spec.density(x[0], x[1]) * h * h, y).unwrap();
                    pts.push(x);
                }
            }
        }
        let u = InverseSubratios::from_fn(d.len(), |p, i| {
            let x = &pts[i];
            let s0 = if p.k0 == super::super::Sign::Pos { r.sigma1 } else { r.sigma2 };
            let s1 = if p.k1 == super::super::Sign::Pos { t.sigma1 } else { t.sigma2 };
            n2(x, s0) / n2(x, s1)
        });
        (d, u)
    }

    fn tiny_models(seed: u64) -> [Option<MlpModel>; 4] {
        core::array::from_fn(|k| Some(MlpModel::init(&[2, 5, 1], seed + k as u64).unwrap()))
    }

    #[test]
    fn pare_at_ratio_derivative() {
        let t = PareParams::default();
        for (r, y, w) in [(0.7, 0u8, 1.0), (-1.3, 1, -2.0), (40.0, 1, 0.5)] {
            let (_, d) = pare_at_ratio(r, y, w, &t).unwrap();
            let h = 1e-6 * (1.0 + f64::abs(r));
            let fd = (pare_at_ratio(r + h, y, w, &t).unwrap().0 - pare_at_ratio(r - h, y, w, &t).unwrap().0) / (2.0 * h);
            assert!((fd - d).abs() <= 1e-5 * d.abs().max(1e-12), "{fd} vs {d}");
        }
        assert!(pare_at_ratio(t.pole(), 0, 1.0, &t).is_none());
        assert!(pare_at_ratio(f64::INFINITY, 0, 1.0, &t).is_none());
    }

    #[test]
    fn exact_coefficients_are_stationary() {
        let (d, u) = quadrature_instance();
        let (c0, c1) = (4.0 / 3.0, 2.0);
        let t = PareParams::default();
        let step = 0.05;
        let grid = |c: f64| [c - step, c, c + step];
        let l = coefficient_landscape(&u, &d, [false, false], LandscapeObjective::Pare(t), &grid(c0), &grid(c1)).unwrap();
        assert_eq!(l.local_minima(), vec![(1, 1)]);
    }

    #[test]
    fn tuning_from_exact_coefficients_stays() {
        let (d, u) = quadrature_instance();
        let bal = balanced(&d).unwrap();
        let c = [4.0 / 3.0, 2.0];
        let cfg = TuneConfig { max_epochs: 50, epoch_cap: 5_000, ..TuneConfig::default() };
        let (tuned, _) =
            tune_on_tables(c, [false, false], &PareParams::default(), (&u, &bal), (&u, &bal), &cfg).unwrap();
        assert!((tuned[0] - c[0]).abs() < 1e-3 && (tuned[1] - c[1]).abs() < 1e-3, "{tuned:?}");
        // and a displaced start is pulled back towards the exact values
        let (back, _) =
            tune_on_tables([1.5, 1.8], [false, false], &PareParams::default(), (&u, &bal), (&u, &bal), &cfg).unwrap();
        assert!((back[0] - c[0]).abs() < (1.5 - c[0]) && (back[1] - c[1]).abs() < 0.2, "{back:?}");
    }

    #[test]
    fn landscape_contrast_between_pare_and_mse() {
        let (d, u) = quadrature_instance();
        let grid: Vec<f64> = (0..=40).map(|i| 1.0 + 0.05 * i as f64).collect();
        let pare =
            coefficient_landscape(&u, &d, [false, false], LandscapeObjective::Pare(PareParams::default()), &grid, &grid)
                .unwrap();
        assert!(pare.all_finite());
        assert_eq!(pare.local_minima().len(), 1);
        let (a, b, _) = pare.argmin().unwrap();
        assert!((a - 4.0 / 3.0).abs() <= 0.05 && (b - 2.0).abs() <= 0.05, "{a} {b}");
        let mse = coefficient_landscape(&u, &d, [false, false], LandscapeObjective::MseRatioTrick, &grid, &grid).unwrap();
        let med = mse.median();
        assert!(!mse.all_finite() || mse.values.iter().any(|v| v.abs() > 100.0 * med.abs()));
    }

    #[test]
    fn full_gradient_matches_finite_differences() {
        let m = RosmmModel::from_parts(tiny_models(3), 1.4, 1.9, PareParams::default(), Variant::Plain).unwrap();
        let d = {
            let mut a = sample_weighted(&GaussianMixtureSpec::toy_reference(), 16, 1).unwrap();
            a.extend(&sample_weighted(&GaussianMixtureSpec::toy_signed_target(), 16, 2).unwrap().relabel(1)).unwrap();
            a
        };
        let (_, g) = full_objective(&m, d.features(), d.labels(), d.weights()).unwrap();
        let p = m.flat_params();
        let mut mm = m.clone();
        for k in 0..p.len() {
            let h = 1e-6 * (1.0 + p[k].abs());
            let mut q = p.clone();
            q[k] += h;
            mm.set_flat_params(&q).unwrap();
            let up = full_objective(&mm, d.features(), d.labels(), d.weights()).unwrap().0;
            q[k] -= 2.0 * h;
            mm.set_flat_params(&q).unwrap();
            let dn = full_objective(&mm, d.features(), d.labels(), d.weights()).unwrap().0;
            let fd = (up - dn) / (2.0 * h);
            let scale = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!((fd - g[k]).abs() <= 1e-4 * scale, "param {k}: {fd} vs {}", g[k]);
        }
    }

    fn toy_split(n: usize, seed: u64) -> WeightedDataset {
        let mut a = sample_weighted(&GaussianMixtureSpec::toy_reference(), n, seed).unwrap();
        a.extend(&sample_weighted(&GaussianMixtureSpec::toy_signed_target(), n, seed + 1).unwrap().relabel(1))
            .unwrap();
        a
    }

    #[test]
    fn coefficient_tuning_freezes_subratios_and_never_worsens() {
        let m = RosmmModel::assemble(tiny_models(5), 4.0 / 3.0, 2.0, PareParams::default()).unwrap();
        let (tr, va) = (toy_split(2000, 1), toy_split(1000, 7));
        let cfg = TuneConfig { max_epochs: 30, ..TuneConfig::default() };
        let (tuned, curve) = tune_coefficients(&m, &tr, &va, &cfg).unwrap();
        assert_eq!(tuned.variant, Variant::CoefTuned);
        assert_eq!(tuned.subratios(), m.subratios());
        let before = {
            let vb = balanced(&va).unwrap();
            let u = InverseSubratios::compute(&m, vb.features()).unwrap();
            table_objective([m.c0, m.c1], [false, false], &u, &vb, &m.pare)
        };
        if curve.best_epoch > 0 {
            assert!(curve.best_val() < before);
        } else {
            assert_eq!((tuned.c0, tuned.c1), (m.c0, m.c1));
        }
        let (again, _) = tune_coefficients(&m, &tr, &va, &cfg).unwrap();
        assert_eq!(again, tuned);
    }

    #[test]
    fn full_tuning_with_zero_rate_is_identity_and_improves_otherwise() {
        let m = RosmmModel::assemble(tiny_models(9), 4.0 / 3.0, 2.0, PareParams::default()).unwrap();
        let (tr, va) = (toy_split(1000, 3), toy_split(500, 5));
        let zero = TuneConfig { learning_rate: 0.0, subratio_learning_rate: 0.0, max_epochs: 3, ..TuneConfig::default() };
        let (same, _) = tune_full(&m, &tr, &va, &zero).unwrap();
        assert_eq!(same.flat_params(), m.flat_params());
        let cfg = TuneConfig { max_epochs: 15, subratio_learning_rate: 1e-3, ..TuneConfig::default() };
        let (coef, cc) = tune_coefficients(&m, &tr, &va, &cfg).unwrap();
        let (full, fc) = tune_full(&coef, &tr, &va, &cfg).unwrap();
        assert_eq!(full.variant, Variant::FullTuned);
        let coef_val = if cc.best_epoch > 0 { cc.best_val() } else { f64::INFINITY };
        let full_val = if fc.best_epoch > 0 { fc.best_val() } else { coef_val };
        assert!(full_val <= coef_val);
    }

    #[test]
    fn degenerate_class_coefficient_is_frozen() {
        let mut models = tiny_models(2);
        models[2] = None;
        models[3] = None;
        let m = RosmmModel::assemble(models, 1.0, 2.0, PareParams::default()).unwrap();
        let mut tr = sample_weighted(&GaussianMixtureSpec::toy_reference(), 1000, 1).unwrap();
        tr.weights_mut().iter_mut().for_each(|w| *w = 1.0);
        tr.extend(&sample_weighted(&GaussianMixtureSpec::toy_signed_target(), 1000, 2).unwrap().relabel(1)).unwrap();
        let cfg = TuneConfig { max_epochs: 5, ..TuneConfig::default() };
        let (c, _) = tune_coefficients(&m, &tr, &tr, &cfg).unwrap();
        assert_eq!(c.c0, 1.0);
        let (f, _) = tune_full(&m, &tr, &tr, &cfg).unwrap();
        assert_eq!(f.c0, 1.0);
    }

    #[test]
    fn pole_hits_escalate() {
        // Constant sub-ratios with c0 = 1, c1 = -1: r = 2 / u_pn - 1 / u_pp = pole.
        let t = PareParams::default();
        let constant = |z: f64| {
            let mut s = MlpModel::zeros(&[2, 1]).unwrap();
            let n = s.n_params();
            s.params_mut()[n - 1] = z;
            s
        };
        let slots = [Some(constant((2.0 - t.pole()).ln())), Some(constant(0.0)), Some(constant(0.0)), Some(constant(0.0))];
        let mut m = RosmmModel::assemble(slots, 1.0, 1.0, t).unwrap();
        m.c1 = -1.0;
        let tr = toy_split(600, 1);
        let r = tune_coefficients(&m, &tr, &tr, &TuneConfig { max_epochs: 2, ..TuneConfig::default() });
        assert!(matches!(r, Err(Error::Numeric(_))), "{r:?}");
    }
}
