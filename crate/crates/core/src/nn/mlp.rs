use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::gemm;
use crate::losses::LossKind;
use crate::math;
use crate::rng::Stream;
use crate::{Error, Result};

/// A borrowed mini-batch: row-major features plus per-sample label and weight.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub x: &'a [f64],
    pub y: &'a [u8],
    pub w: &'a [f64],
}

impl<'a> Batch<'a> {
    pub fn new(x: &'a [f64], y: &'a [u8], w: &'a [f64]) -> Result<Self> {
        if y.len() != w.len() || y.is_empty() || x.len() % y.len() != 0 {
            return Err(Error::Shape(format!(
                "batch of {} features, {} labels, {} weights",
                x.len(),
                y.len(),
                w.len()
            )));
        }
        Ok(Batch { x, y, w })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.len() / self.y.len()
    }
}

/// ReLU MLP with a single logistic output.
///
/// Parameters live in one flat vector, layer by layer: the `n_out x n_in`
/// row-major weight matrix followed by the `n_out` biases. Gradients and
/// optimizer state share that layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::Config(format!("need at least two layer sizes, got {sizes:?}")));
    }
    if sizes.contains(&0) {
        return Err(Error::Config(format!("layer sizes must be positive, got {sizes:?}")));
    }
    if *sizes.last().unwrap() != 1 {
        return Err(Error::Config(format!("output layer must have size 1, got {sizes:?}")));
    }
    Ok(())
}

/// Number of parameters of an architecture.
pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
}

impl MlpModel {
    /// All-zero parameters.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(MlpModel { sizes: sizes.to_vec(), params: vec![0.0; param_count(sizes)] })
    }

    /// Weights uniform on `[-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases zero.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut model = Self::zeros(sizes)?;
        let mut rng = Stream::new(seed);
        let mut off = 0;
        for pair in sizes.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            let bound = 1.0 / math::sqrt(n_in as f64);
            for p in &mut model.params[off..off + n_in * n_out] {
                *p = bound * (2.0 * rng.uniform() - 1.0);
            }
            off += n_in * n_out + n_out;
        }
        Ok(model)
    }

    /// Build from per-layer row-major weights and biases.
    pub fn from_layers(sizes: &[usize], weights: &[Vec<f64>], biases: &[Vec<f64>]) -> Result<Self> {
        check_sizes(sizes)?;
        let n_layers = sizes.len() - 1;
        if weights.len() != n_layers || biases.len() != n_layers {
            return Err(Error::Shape(format!(
                "{} weight and {} bias blocks for {} layers",
                weights.len(),
                biases.len(),
                n_layers
            )));
        }
        let mut params = Vec::with_capacity(param_count(sizes));
        for (l, pair) in sizes.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] || biases[l].len() != pair[1] {
                return Err(Error::Shape(format!("layer {l} does not match {}x{}", pair[1], pair[0])));
            }
            params.extend_from_slice(&weights[l]);
            params.extend_from_slice(&biases[l]);
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFiniteInput { index: i });
        }
        Ok(MlpModel { sizes: sizes.to_vec(), params })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_offset(&self, layer: usize) -> usize {
        param_count(&self.sizes[..=layer])
    }

    /// Row-major `n_out x n_in` weights and biases of one layer.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let off = self.layer_offset(layer);
        let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let w = &self.params[off..off + n_in * n_out];
        let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
        (w, b)
    }

    /// Classifier output `s(x)` in `(0, 1)`.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(math::sigmoid(self.logit(x)?))
    }

    /// Pre-sigmoid output for one input.
    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!("input of length {} for a {}-input model", x.len(), self.input_dim())));
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { index });
        }
        let mut ws = Workspace::default();
        Ok(self.forward_batch(x, 1, &mut ws)[0])
    }

    /// Logits for `n` row-major inputs. Inputs are not validated.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len() / self.input_dim();
        let mut out = Vec::with_capacity(n);
        let mut ws = Workspace::default();
        for chunk in x.chunks(CHUNK * self.input_dim()) {
            let m = chunk.len() / self.input_dim();
            out.extend_from_slice(self.forward_batch(chunk, m, &mut ws));
        }
        out
    }

    /// Classifier outputs for `n` row-major inputs.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.logits(x);
        for z in &mut out {
            *z = math::sigmoid(*z);
        }
        out
    }

    /// Batched forward pass, keeping the activations in `ws` for a later
    /// [`MlpModel::backward`]. Returns the `n` logits.
    pub fn forward_batch<'w>(&self, x: &[f64], n: usize, ws: &'w mut Workspace) -> &'w [f64] {
        let n_layers = self.n_layers();
        ws.acts.resize_with(n_layers, Vec::new);
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let (prev, rest) = ws.acts.split_at_mut(l);
            let input: &[f64] = if l == 0 { x } else { &prev[l - 1] };
            let out = &mut rest[0];
            out.clear();
            out.reserve(n * n_out);
            for _ in 0..n {
                out.extend_from_slice(b);
            }
            gemm(n, n_in, n_out, 1.0, input, n_in, 1, w, 1, n_in, 1.0, out, n_out, 1);
            if l + 1 < n_layers {
                for v in out.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
        }
        &ws.acts[n_layers - 1]
    }

    /// Accumulate into `grad` the parameter gradient of `sum_i dlogit[i] * z_i`,
    /// where `z_i` are the logits of the last [`MlpModel::forward_batch`] call on `x`.
    pub fn backward(&self, x: &[f64], dlogit: &[f64], ws: &mut Workspace, grad: &mut [f64]) {
        let n = dlogit.len();
        let n_layers = self.n_layers();
        debug_assert_eq!(grad.len(), self.params.len());
        let Workspace { acts, delta, back, .. } = ws;
        delta.clear();
        delta.extend_from_slice(dlogit);
        let mut off = self.params.len();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            off -= n_in * n_out + n_out;
            let input: &[f64] = if l == 0 { x } else { &acts[l - 1] };
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            gemm(n_out, n, n_in, 1.0, delta, 1, n_out, input, n_in, 1, 1.0, gw, n_in, 1);
            for row in delta.chunks_exact(n_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l > 0 {
                let w = &self.params[off..off + n_in * n_out];
                back.clear();
                back.resize(n * n_in, 0.0);
                gemm(n, n_out, n_in, 1.0, delta, n_out, 1, w, n_in, 1, 0.0, back, n_in, 1);
                for (b, a) in back.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *b = 0.0;
                    }
                }
                core::mem::swap(delta, back);
            }
        }
    }
}

const CHUNK: usize = 4096;

/// Reusable activation buffers for batched passes.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    back: Vec<f64>,
    dlogit: Vec<f64>,
}

/// Mean weighted loss `(1/N) sum_i L(s(x_i), y_i, w_i)` and its parameter
/// gradient, by reverse-mode differentiation of the batched forward pass.
pub fn grad(model: &MlpModel, batch: Batch<'_>, loss: &LossKind) -> Result<(f64, Vec<f64>)> {
    let mut g = vec![0.0; model.n_params()];
    let mut ws = Workspace::default();
    let value = grad_into(model, batch, loss, &mut ws, &mut g)?;
    Ok((value, g))
}

/// As [`grad`], accumulating into `out` (which the caller zeroes).
pub(crate) fn grad_into(
    model: &MlpModel,
    batch: Batch<'_>,
    loss: &LossKind,
    ws: &mut Workspace,
    out: &mut [f64],
) -> Result<f64> {
    let n = batch.len();
    if batch.dim() != model.input_dim() {
        return Err(Error::Shape(format!("batch dim {} vs model input {}", batch.dim(), model.input_dim())));
    }
    let inv_n = 1.0 / n as f64;
    let mut dlogit = core::mem::take(&mut ws.dlogit);
    dlogit.clear();
    let mut total = 0.0;
    {
        let logits = model.forward_batch(batch.x, n, ws);
        for i in 0..n {
            let s = math::sigmoid(logits[i]);
            let (y, w) = (batch.y[i], batch.w[i]);
            total += loss.value(s, y, w);
            dlogit.push(loss.dlogit(s, y, w) * inv_n);
        }
    }
    model.backward(batch.x, &dlogit, ws, out);
    ws.dlogit = dlogit;
    Ok(total * inv_n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::PareParams;
    use proptest::prelude::*;

    #[test]
    fn parameter_counts() {
        assert_eq!(MlpModel::init(&[2, 64, 64, 1], 7).unwrap().n_params(), 4417);
        assert_eq!(MlpModel::init(&[2, 32, 32, 1], 7).unwrap().n_params(), 1185);
        assert_eq!(param_count(&[2, 64, 64, 1]), 192 + 4160 + 65);
    }

    #[test]
    fn init_is_deterministic_and_fan_in_scaled() {
        let a = MlpModel::init(&[2, 64, 64, 1], 7).unwrap();
        let b = MlpModel::init(&[2, 64, 64, 1], 7).unwrap();
        assert!(a.params().iter().zip(b.params()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, MlpModel::init(&[2, 64, 64, 1], 8).unwrap());
        let (w, bias) = a.layer(1);
        assert!(w.iter().all(|v| v.abs() <= 1.0 / 8.0));
        assert!(bias.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn invalid_architectures() {
        for sizes in [&[2usize][..], &[2, 0, 1], &[2, 4, 2], &[]] {
            assert!(matches!(MlpModel::init(sizes, 0), Err(Error::Config(_))), "{sizes:?}");
        }
    }

    #[test]
    fn zero_model_outputs_half() {
        let m = MlpModel::zeros(&[3, 5, 1]).unwrap();
        assert_eq!(m.forward(&[1.0, -4.0, 9.0]).unwrap(), 0.5);
        let id = MlpModel::from_layers(&[1, 1], &[vec![1.0]], &[vec![0.0]]).unwrap();
        assert_eq!(id.forward(&[0.0]).unwrap(), 0.5);
    }

    #[test]
    fn forward_rejects_bad_inputs() {
        let m = MlpModel::init(&[2, 4, 1], 1).unwrap();
        assert!(matches!(m.forward(&[0.0, f64::NAN]), Err(Error::NonFiniteInput { index: 1 })));
        assert!(matches!(m.forward(&[0.0, f64::INFINITY]), Err(Error::NonFiniteInput { .. })));
        assert!(matches!(m.forward(&[0.0]), Err(Error::Shape(_))));
    }

    /// Straight-line forward pass used as an independent oracle.
    fn naive_forward(m: &MlpModel, x: &[f64]) -> f64 {
        let mut a = x.to_vec();
        for l in 0..m.n_layers() {
            let (w, b) = m.layer(l);
            let n_in = a.len();
            let mut z: Vec<f64> = (0..b.len())
                .map(|j| b[j] + (0..n_in).map(|k| w[j * n_in + k] * a[k]).sum::<f64>())
                .collect();
            if l + 1 < m.n_layers() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            a = z;
        }
        1.0 / (1.0 + (-a[0]).exp())
    }

    #[test]
    fn batched_forward_matches_naive_oracle() {
        let mut m = MlpModel::init(&[2, 64, 64, 1], 3).unwrap();
        // non-zero biases so they are exercised
        let mut rng = Stream::new(11);
        for p in m.params_mut() {
            *p += 0.05 * (rng.uniform() - 0.5);
        }
        let xs = [0.3, -1.2, 2.5, 0.7, -0.1, -3.0];
        let batch = m.predict(&xs);
        for i in 0..3 {
            let oracle = naive_forward(&m, &xs[2 * i..2 * i + 2]);
            assert!(((batch[i] - oracle) / oracle).abs() <= 1e-12, "{} vs {oracle}", batch[i]);
            assert!((m.forward(&xs[2 * i..2 * i + 2]).unwrap() - oracle).abs() <= 1e-12 * oracle);
        }
    }

    #[test]
    fn zero_weights_give_zero_gradient() {
        let m = MlpModel::init(&[2, 8, 1], 5).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4];
        let (l, g) = grad(&m, Batch::new(&x, &[0, 1], &[0.0, 0.0]).unwrap(), &LossKind::Bce).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn logistic_bce_hand_derivative() {
        // s = sigmoid(theta x) with theta = 0, x = 1, y = 1: dL/dtheta = -(1 - s) x = -0.5
        let m = MlpModel::zeros(&[1, 1]).unwrap();
        let (l, g) = grad(&m, Batch::new(&[1.0], &[1], &[1.0]).unwrap(), &LossKind::Bce).unwrap();
        assert!((l - core::f64::consts::LN_2).abs() < 1e-15);
        assert!((g[0] + 0.5).abs() < 1e-15);
    }

    fn fd_check(m: &MlpModel, batch: Batch<'_>, loss: &LossKind) -> f64 {
        let (_, g) = grad(m, batch, loss).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-8);
        for i in 0..m.n_params() {
            let mut plus = m.clone();
            plus.params_mut()[i] += h;
            let mut minus = m.clone();
            minus.params_mut()[i] -= h;
            let lp = grad(&plus, batch, loss).unwrap().0;
            let lm = grad(&minus, batch, loss).unwrap().0;
            let fd = (lp - lm) / (2.0 * h);
            // relative error, with an absolute floor tied to the gradient scale
            let err = (fd - g[i]).abs() / g[i].abs().max(1e-3 * scale);
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Stream::new(99);
        for (k, loss) in [LossKind::Bce, LossKind::Mse, LossKind::Pare(PareParams::new(3.0, 1.5).unwrap())]
            .iter()
            .enumerate()
        {
            let m = MlpModel::init(&[2, 6, 5, 1], 20 + k as u64).unwrap();
            let n = 7;
            let x: Vec<f64> = (0..2 * n).map(|_| 3.0 * (rng.uniform() - 0.5)).collect();
            let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
            let w: Vec<f64> = (0..n).map(|_| 4.0 * (rng.uniform() - 0.4)).collect();
            let err = fd_check(&m, Batch::new(&x, &y, &w).unwrap(), loss);
            assert!(err < 1e-4, "{loss:?}: {err}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn batch_gradient_is_linear_in_samples(seed in 0u64..1000, split in 1usize..7) {
            let m = MlpModel::init(&[2, 5, 1], seed).unwrap();
            let mut rng = Stream::new(seed ^ 77);
            let n = 8;
            let x: Vec<f64> = (0..2 * n).map(|_| rng.uniform() * 2.0 - 1.0).collect();
            let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.uniform() * 3.0 - 1.0).collect();
            let (_, full) = grad(&m, Batch::new(&x, &y, &w).unwrap(), &LossKind::Bce).unwrap();
            let (_, a) = grad(&m, Batch::new(&x[..2 * split], &y[..split], &w[..split]).unwrap(), &LossKind::Bce).unwrap();
            let (_, b) = grad(&m, Batch::new(&x[2 * split..], &y[split..], &w[split..]).unwrap(), &LossKind::Bce).unwrap();
            let fa = split as f64 / n as f64;
            for i in 0..full.len() {
                let comb = fa * a[i] + (1.0 - fa) * b[i];
                prop_assert!((comb - full[i]).abs() <= 1e-12 * (1.0 + full[i].abs()));
            }
        }

        #[test]
        fn outputs_stay_in_open_unit_interval(seed in 0u64..500, a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let m = MlpModel::init(&[2, 16, 1], seed).unwrap();
            let s = m.forward(&[a, b]).unwrap();
            prop_assert!(s > 0.0 && s < 1.0);
        }
    }
}
