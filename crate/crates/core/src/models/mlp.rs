//! Small fully connected networks trained with mini-batch gradient descent.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Sigmoid,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    BinaryCrossEntropy,
    MeanSquaredError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    /// Hidden layer widths; the output layer has one unit.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub output_activation: Activation,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
    #[serde(default)]
    pub dropout: f64,
    /// Hidden layers (0-based) followed by a dropout layer.
    #[serde(default)]
    pub dropout_after: Vec<usize>,
    pub loss: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

fn default_slope() -> f64 {
    0.01
}

impl MlpSpec {
    pub fn receptivity() -> Self {
        MlpSpec {
            hidden: vec![16, 8],
            activation: Activation::Relu,
            output_activation: Activation::Sigmoid,
            leaky_slope: 0.01,
            dropout: 0.0,
            dropout_after: Vec::new(),
            loss: LossKind::BinaryCrossEntropy,
            learning_rate: 0.01,
            epochs: 100,
            batch_size: 32,
            seed: 0,
        }
    }

    pub fn emotion() -> Self {
        MlpSpec {
            hidden: vec![64, 32, 16],
            activation: Activation::LeakyRelu,
            output_activation: Activation::Identity,
            leaky_slope: 0.01,
            dropout: 0.3,
            dropout_after: vec![0, 1],
            loss: LossKind::MeanSquaredError,
            learning_rate: 0.01,
            epochs: 100,
            batch_size: 32,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden", "layer sizes must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout", "must be in [0, 1)"));
        }
        if let Some(i) = self.dropout_after.iter().find(|&&i| i >= self.hidden.len()) {
            return Err(Error::config("dropout_after", format!("no hidden layer {i}")));
        }
        if self.loss == LossKind::BinaryCrossEntropy && self.output_activation != Activation::Sigmoid {
            return Err(Error::config("output_activation", "cross-entropy needs a sigmoid output"));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(Error::config("learning_rate", "learning rate and batch size must be positive"));
        }
        Ok(())
    }

    fn drop_after(&self, hidden: usize) -> bool {
        self.dropout > 0.0 && self.dropout_after.contains(&hidden)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `inputs × outputs`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn apply(act: Activation, slope: f64, z: &Array2<f64>) -> Array2<f64> {
    match act {
        Activation::Relu => z.mapv(|v| v.max(0.0)),
        Activation::LeakyRelu => z.mapv(|v| if v > 0.0 { v } else { slope * v }),
        Activation::Sigmoid => z.mapv(sigmoid),
        Activation::Identity => z.clone(),
    }
}

fn derivative(act: Activation, slope: f64, z: &Array2<f64>, a: &Array2<f64>) -> Array2<f64> {
    match act {
        Activation::Relu => z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
        Activation::LeakyRelu => z.mapv(|v| if v > 0.0 { 1.0 } else { slope }),
        Activation::Sigmoid => a.mapv(|s| s * (1.0 - s)),
        Activation::Identity => Array2::ones(z.raw_dim()),
    }
}

impl Network {
    /// Fan-in scaled uniform initialization: `U(±sqrt(6 / fan_in))`.
    pub fn init(inputs: usize, spec: &MlpSpec, rng: &mut impl Rng) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend(&spec.hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / w[0] as f64).sqrt();
                Layer {
                    w: Array2::from_shape_simple_fn((w[0], w[1]), || rng.random_range(-limit..limit)),
                    b: Array1::zeros(w[1]),
                }
            })
            .collect();
        Network { layers }
    }

    pub fn zeros(inputs: usize, spec: &MlpSpec) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend(&spec.hidden);
        sizes.push(1);
        Network {
            layers: sizes
                .windows(2)
                .map(|w| Layer {
                    w: Array2::zeros((w[0], w[1])),
                    b: Array1::zeros(w[1]),
                })
                .collect(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].w.nrows()
    }

    fn activation(&self, spec: &MlpSpec, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            spec.output_activation
        } else {
            spec.activation
        }
    }

    /// Output-layer pre-activations without dropout.
    pub fn logits(&self, spec: &MlpSpec, x: ArrayView2<f64>) -> Array1<f64> {
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.w) + &layer.b;
            if l == last {
                return z.column(0).to_owned();
            }
            a = apply(spec.activation, spec.leaky_slope, &z);
        }
        unreachable!()
    }

    /// Deterministic forward pass (dropout off).
    pub fn predict(&self, spec: &MlpSpec, x: ArrayView2<f64>) -> Array1<f64> {
        let z = self.logits(spec, x);
        match spec.output_activation {
            Activation::Sigmoid => z.mapv(sigmoid),
            act => apply(act, spec.leaky_slope, &z.insert_axis(Axis(1))).column(0).to_owned(),
        }
    }

    /// Mean loss with dropout off.
    pub fn loss(&self, spec: &MlpSpec, x: ArrayView2<f64>, y: ArrayView1<f64>) -> f64 {
        let z = self.logits(spec, x);
        loss_from_logits(spec, z.view(), y)
    }

    /// Loss and gradients for one batch; `masks[h]` is the scaled dropout
    /// mask applied after hidden layer `h`, if any.
    pub fn gradients(
        &self,
        spec: &MlpSpec,
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        masks: &[Option<Array2<f64>>],
    ) -> (f64, Vec<Layer>) {
        let n = x.nrows() as f64;
        let last = self.layers.len() - 1;
        let mut inputs = vec![x.to_owned()];
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut acts = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let z = inputs[l].dot(&layer.w) + &layer.b;
            let a = apply(self.activation(spec, l), spec.leaky_slope, &z);
            if l < last {
                let next = match masks.get(l).and_then(Option::as_ref) {
                    Some(m) => &a * m,
                    None => a.clone(),
                };
                inputs.push(next);
            }
            zs.push(z);
            acts.push(a);
        }
        let z_out = zs[last].column(0);
        let loss = loss_from_logits(spec, z_out, y);

        // dL/dz at the output.
        let mut delta: Array2<f64> = match spec.loss {
            LossKind::BinaryCrossEntropy => {
                let p = acts[last].column(0);
                Array1::from_iter(p.iter().zip(y).map(|(p, y)| (p - y) / n)).insert_axis(Axis(1))
            }
            LossKind::MeanSquaredError => {
                let a = acts[last].column(0);
                let da = Array1::from_iter(a.iter().zip(y).map(|(a, y)| 2.0 * (a - y) / n))
                    .insert_axis(Axis(1));
                da * derivative(spec.output_activation, spec.leaky_slope, &zs[last], &acts[last])
            }
        };

        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            grads.push(Layer {
                w: inputs[l].t().dot(&delta),
                b: delta.sum_axis(Axis(0)),
            });
            if l > 0 {
                let mut da = delta.dot(&self.layers[l].w.t());
                if let Some(m) = masks.get(l - 1).and_then(Option::as_ref) {
                    da = da * m;
                }
                delta = da * derivative(spec.activation, spec.leaky_slope, &zs[l - 1], &acts[l - 1]);
            }
        }
        grads.reverse();
        (loss, grads)
    }
}

fn loss_from_logits(spec: &MlpSpec, z: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let n = z.len() as f64;
    match spec.loss {
        LossKind::BinaryCrossEntropy => {
            z.iter()
                .zip(y)
                .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
                .sum::<f64>()
                / n
        }
        LossKind::MeanSquaredError => {
            let a = match spec.output_activation {
                Activation::Sigmoid => z.mapv(sigmoid),
                act => apply(act, spec.leaky_slope, &z.to_owned().insert_axis(Axis(1)))
                    .column(0)
                    .to_owned(),
            };
            a.iter().zip(y).map(|(a, y)| (a - y).powi(2)).sum::<f64>() / n
        }
    }
}

/// Inverted-dropout masks for one batch: kept units are scaled by
/// `1 / (1 - p)`.
pub(crate) fn dropout_masks(spec: &MlpSpec, rows: usize, rng: &mut impl Rng) -> Vec<Option<Array2<f64>>> {
    let keep = 1.0 - spec.dropout;
    spec.hidden
        .iter()
        .enumerate()
        .map(|(h, &width)| {
            spec.drop_after(h).then(|| {
                Array2::from_shape_simple_fn((rows, width), || {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                })
            })
        })
        .collect()
}

/// Trains from a fresh initialization. Returns the network and the
/// dropout-off training loss before training and after each epoch.
pub fn fit(spec: &MlpSpec, x: ArrayView2<f64>, y: ArrayView1<f64>) -> (Network, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut net = Network::init(x.ncols(), spec, &mut rng);
    let mut log = Vec::with_capacity(spec.epochs + 1);
    log.push(net.loss(spec, x, y));
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut xb = Array2::zeros((spec.batch_size, x.ncols()));
    let mut yb = Array1::zeros(spec.batch_size);
    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(spec.batch_size) {
            let m = chunk.len();
            for (r, &i) in chunk.iter().enumerate() {
                xb.row_mut(r).assign(&x.row(i));
                yb[r] = y[i];
            }
            let masks = dropout_masks(spec, m, &mut rng);
            let (_, grads) = net.gradients(
                spec,
                xb.slice(s![..m, ..]),
                yb.slice(s![..m]),
                &masks,
            );
            for (layer, g) in net.layers.iter_mut().zip(&grads) {
                layer.w.scaled_add(-spec.learning_rate, &g.w);
                layer.b.scaled_add(-spec.learning_rate, &g.b);
            }
        }
        log.push(net.loss(spec, x, y));
    }
    (net, log)
}

/// Mean and population variance of the output over `passes` dropout-on
/// forward passes. Pass `k` draws its masks from the ChaCha stream `k` of
/// `seed`, one mask per pass shared by every row, so a row gets the same
/// result alone or inside a batch.
pub fn mc_dropout(
    net: &Network,
    spec: &MlpSpec,
    x: ArrayView2<f64>,
    passes: usize,
    seed: u64,
) -> (Array1<f64>, Array1<f64>) {
    let n = x.nrows();
    let last = net.layers.len() - 1;
    // Layers before the first dropout are deterministic; run them once.
    let first_drop = (0..spec.hidden.len()).find(|&h| spec.drop_after(h));
    let Some(first_drop) = first_drop else {
        return (net.predict(spec, x), Array1::zeros(n));
    };
    let mut base = x.to_owned();
    for layer in &net.layers[..=first_drop] {
        base = apply(spec.activation, spec.leaky_slope, &(base.dot(&layer.w) + &layer.b));
    }
    let keep = 1.0 - spec.dropout;
    let mut mean = Array1::<f64>::zeros(n);
    let mut m2 = Array1::<f64>::zeros(n);
    for pass in 0..passes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(pass as u64);
        let mut a = base.clone();
        for l in first_drop + 1..=last {
            let layer = &net.layers[l];
            let h = l - 1;
            let w = if spec.drop_after(h) {
                let mut w = layer.w.clone();
                for mut row in w.rows_mut() {
                    if rng.random::<f64>() < keep {
                        row /= keep;
                    } else {
                        row.fill(0.0);
                    }
                }
                w
            } else {
                layer.w.clone()
            };
            let z = a.dot(&w) + &layer.b;
            a = apply(net.activation(spec, l), spec.leaky_slope, &z);
        }
        let out = a.column(0);
        let k = (pass + 1) as f64;
        for i in 0..n {
            let d = out[i] - mean[i];
            mean[i] += d / k;
            m2[i] += d * (out[i] - mean[i]);
        }
    }
    let var = if passes > 0 { m2 / passes as f64 } else { m2 };
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small_spec(loss: LossKind) -> MlpSpec {
        MlpSpec {
            hidden: vec![5, 4],
            activation: Activation::LeakyRelu,
            output_activation: match loss {
                LossKind::BinaryCrossEntropy => Activation::Sigmoid,
                LossKind::MeanSquaredError => Activation::Identity,
            },
            leaky_slope: 0.01,
            dropout: 0.0,
            dropout_after: vec![],
            loss,
            learning_rate: 0.01,
            epochs: 10,
            batch_size: 8,
            seed: 1,
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (loss, activation) in [
            (LossKind::BinaryCrossEntropy, Activation::LeakyRelu),
            (LossKind::MeanSquaredError, Activation::LeakyRelu),
            (LossKind::MeanSquaredError, Activation::Sigmoid),
            (LossKind::BinaryCrossEntropy, Activation::Relu),
        ] {
            let mut spec = small_spec(loss);
            spec.activation = activation;
            let net = Network::init(3, &spec, &mut rng);
            let x = Array2::from_shape_simple_fn((7, 3), || rng.random_range(-1.0..1.0));
            let y = Array1::from_shape_simple_fn(7, || f64::from(rng.random_bool(0.5)));
            let (_, grads) = net.gradients(&spec, x.view(), y.view(), &[]);
            let eps = 1e-5;
            for l in 0..net.layers.len() {
                for idx in [(0, 0), (net.layers[l].w.nrows() - 1, net.layers[l].w.ncols() - 1)] {
                    let mut plus = net.clone();
                    plus.layers[l].w[idx] += eps;
                    let mut minus = net.clone();
                    minus.layers[l].w[idx] -= eps;
                    let numeric = (plus.loss(&spec, x.view(), y.view())
                        - minus.loss(&spec, x.view(), y.view()))
                        / (2.0 * eps);
                    let analytic = grads[l].w[idx];
                    let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                    assert!(rel < 1e-4, "{loss:?} layer {l} {idx:?}: {numeric} vs {analytic}");
                }
                let mut plus = net.clone();
                plus.layers[l].b[0] += eps;
                let mut minus = net.clone();
                minus.layers[l].b[0] -= eps;
                let numeric = (plus.loss(&spec, x.view(), y.view())
                    - minus.loss(&spec, x.view(), y.view()))
                    / (2.0 * eps);
                let rel = (numeric - grads[l].b[0]).abs() / numeric.abs().max(1e-6);
                assert!(rel < 1e-4, "bias layer {l}");
            }
        }
    }

    #[test]
    fn zero_network_outputs_half() {
        let spec = MlpSpec::receptivity();
        let net = Network::zeros(4, &spec);
        assert_eq!(net.predict(&spec, array![[0.3, 0.1, 0.9, 0.0]].view())[0], 0.5);
    }

    #[test]
    fn no_dropout_no_variance() {
        let mut spec = MlpSpec::emotion();
        spec.dropout = 0.0;
        let net = Network::init(2, &spec, &mut ChaCha8Rng::seed_from_u64(0));
        let (_, var) = mc_dropout(&net, &spec, array![[0.2, 0.4], [1.0, 0.0]].view(), 50, 3);
        assert!(var.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_pass_no_variance_and_row_independence() {
        let spec = MlpSpec::emotion();
        let net = Network::init(2, &spec, &mut ChaCha8Rng::seed_from_u64(0));
        let x = array![[0.2, 0.4], [1.0, 0.0], [0.5, 0.5]];
        let (_, var) = mc_dropout(&net, &spec, x.view(), 1, 3);
        assert!(var.iter().all(|v| *v == 0.0));
        let (mean_all, var_all) = mc_dropout(&net, &spec, x.view(), 40, 9);
        let (mean_one, var_one) = mc_dropout(&net, &spec, x.slice(s![1..2, ..]), 40, 9);
        assert_eq!(mean_all[1], mean_one[0]);
        assert_eq!(var_all[1], var_one[0]);
    }

    #[test]
    fn mc_dropout_matches_naive_masked_passes() {
        // Oracle: explicit per-pass forward with the same mask stream.
        let spec = MlpSpec::emotion();
        let net = Network::init(3, &spec, &mut ChaCha8Rng::seed_from_u64(2));
        let x = array![[0.1, 0.7, 0.3]];
        let passes = 25;
        let (mean, var) = mc_dropout(&net, &spec, x.view(), passes, 4);
        let keep = 1.0 - spec.dropout;
        let mut outs = Vec::new();
        for pass in 0..passes {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            rng.set_stream(pass as u64);
            let mut a = x.to_owned();
            for (l, layer) in net.layers.iter().enumerate() {
                let z = a.dot(&layer.w) + &layer.b;
                a = if l + 1 == net.layers.len() {
                    z
                } else {
                    z.mapv(|v| if v > 0.0 { v } else { 0.01 * v })
                };
                if spec.dropout_after.contains(&l) {
                    for v in a.iter_mut() {
                        *v = if rng.random::<f64>() < keep { *v / keep } else { 0.0 };
                    }
                }
            }
            outs.push(a[[0, 0]]);
        }
        let m = outs.iter().sum::<f64>() / passes as f64;
        let v = outs.iter().map(|o| (o - m).powi(2)).sum::<f64>() / passes as f64;
        assert!((mean[0] - m).abs() < 1e-12);
        assert!((var[0] - v).abs() < 1e-12);
    }
}
