//! Fully connected ReLU networks with exact reverse-mode gradients.
//!
//! Layer `l` computes `z = W x + b` with `W` stored row-major as `[out, in]`.
//! Hidden layers apply ReLU; the last layer applies the configured output
//! activation. The ReLU subgradient at zero is taken to be zero.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::optim::ParamSlot;
use super::rng::SeededRng;
use super::tensor::Tensor;
use crate::error::{shape_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// One affine layer. `weight` is `[out, in]`, `bias` is `[out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[output, input]),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        let n_in = self.input_dim();
        let w = self.weight.data();
        out.clear();
        out.extend(self.bias.data().iter().enumerate().map(|(o, b)| {
            let row = &w[o * n_in..(o + 1) * n_in];
            b + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>()
        }));
    }
}

/// Counts forward evaluations. Clones start from the current count.
#[derive(Debug, Default)]
struct CallCounter(AtomicU64);

impl Clone for CallCounter {
    fn clone(&self) -> Self {
        Self(AtomicU64::new(self.0.load(Ordering::Relaxed)))
    }
}

impl PartialEq for CallCounter {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

/// Multilayer perceptron parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMlp")]
pub struct Mlp {
    layer_dims: Vec<usize>,
    layers: Vec<Dense>,
    output_activation: Activation,
    #[serde(skip)]
    calls: CallCounter,
}

#[derive(Deserialize)]
struct RawMlp {
    layer_dims: Vec<usize>,
    layers: Vec<Dense>,
    output_activation: Activation,
}

impl TryFrom<RawMlp> for Mlp {
    type Error = Error;

    fn try_from(raw: RawMlp) -> Result<Self> {
        let mlp = Mlp::from_layers(raw.layers, raw.output_activation)?;
        if mlp.layer_dims != raw.layer_dims {
            return Err(shape_err(
                "Mlp layer_dims",
                format!("{:?}", mlp.layer_dims),
                format!("{:?}", raw.layer_dims),
            ));
        }
        Ok(mlp)
    }
}

/// Per-layer intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[l]` is the input to layer `l`; the last entry is the network output.
    inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().expect("cache holds the output")
    }

    pub fn input(&self) -> &[f64] {
        &self.inputs[0]
    }
}

/// Gradients with the same layout as [`Mlp`] parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
}

impl MlpGrads {
    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            layer.weight.data_mut().iter_mut().for_each(|g| *g *= factor);
            layer.bias.data_mut().iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn clear(&mut self) {
        for layer in &mut self.layers {
            layer.weight.fill(0.0);
            layer.bias.fill(0.0);
        }
    }

    /// Flattened view, weights before biases, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.data().iter().chain(l.bias.data()))
            .copied()
            .collect()
    }
}

impl Mlp {
    /// Random network with weights and biases uniform in `±sqrt(1/fan_in)`.
    pub fn new(layer_dims: &[usize], output_activation: Activation, rng: &mut SeededRng) -> Result<Self> {
        let mut mlp = Self::zeros(layer_dims, output_activation)?;
        for layer in &mut mlp.layers {
            let bound = (1.0 / layer.input_dim() as f64).sqrt();
            for w in layer.weight.data_mut() {
                *w = rng.uniform(-bound, bound);
            }
            for b in layer.bias.data_mut() {
                *b = rng.uniform(-bound, bound);
            }
        }
        Ok(mlp)
    }

    pub fn zeros(layer_dims: &[usize], output_activation: Activation) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "an MLP needs at least two positive layer dims, got {layer_dims:?}"
            )));
        }
        let layers = layer_dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            layers,
            output_activation,
            calls: CallCounter::default(),
        })
    }

    /// Assembles a network from explicit layers, checking that shapes chain.
    pub fn from_layers(layers: Vec<Dense>, output_activation: Activation) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidInput("an MLP needs at least one layer".into()))?;
        let mut dims = vec![first.input_dim()];
        for layer in &layers {
            if layer.weight.shape().len() != 2 || layer.bias.shape() != [layer.output_dim()] {
                return Err(shape_err(
                    "Mlp::from_layers",
                    format!("weight [out, in] and bias [{}]", layer.output_dim()),
                    format!("{:?} / {:?}", layer.weight.shape(), layer.bias.shape()),
                ));
            }
            let prev = *dims.last().unwrap();
            if layer.input_dim() != prev {
                return Err(shape_err("Mlp::from_layers", prev, layer.input_dim()));
            }
            dims.push(layer.output_dim());
        }
        Ok(Self {
            layer_dims: dims,
            layers,
            output_activation,
            calls: CallCounter::default(),
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// Sum over layers of `(in + 1) * out`.
    pub fn param_count(&self) -> usize {
        self.layer_dims.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    /// Number of single-sample forward evaluations performed so far.
    pub fn forward_calls(&self) -> u64 {
        self.calls.0.load(Ordering::Relaxed)
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output_activation
        } else {
            Activation::Relu
        }
    }

    fn check_input(&self, x: &[f64], context: &'static str) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(shape_err(context, self.input_dim(), x.len()));
        }
        Ok(())
    }

    /// Forward pass keeping every intermediate needed for [`Mlp::backward_cached`].
    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        self.check_input(x, "Mlp::forward")?;
        self.calls.0.fetch_add(1, Ordering::Relaxed);
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        inputs.push(x.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.output_dim());
            layer.affine(&inputs[l], &mut z);
            let act = self.activation_of(l);
            inputs.push(z.iter().map(|&v| act.apply(v)).collect());
            pre_activations.push(z);
        }
        Ok(ForwardCache {
            inputs,
            pre_activations,
        })
    }

    pub fn forward_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x, "Mlp::forward")?;
        self.calls.0.fetch_add(1, Ordering::Relaxed);
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.affine(&cur, &mut next);
            let act = self.activation_of(l);
            next.iter_mut().for_each(|v| *v = act.apply(*v));
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Forward over a `[in]` vector or a `[rows, in]` batch.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        if input.last_dim() != self.input_dim() {
            return Err(shape_err("Mlp::forward", self.input_dim(), input.last_dim()));
        }
        let mut out = Vec::with_capacity(input.rows() * self.output_dim());
        for r in 0..input.rows() {
            out.extend(self.forward_vec(input.row(r))?);
        }
        let mut shape = input.shape().to_vec();
        *shape.last_mut().unwrap() = self.output_dim();
        Tensor::new(shape, out)
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_dim(), l.output_dim()))
                .collect(),
        }
    }

    /// Back-propagates `output_grad` through a cached pass, adding parameter
    /// gradients into `grads` and returning the gradient w.r.t. the input.
    pub fn backward_cached(&self, cache: &ForwardCache, output_grad: &[f64], grads: &mut MlpGrads) -> Result<Vec<f64>> {
        if output_grad.len() != self.output_dim() {
            return Err(shape_err("Mlp::backward output_grad", self.output_dim(), output_grad.len()));
        }
        if cache.pre_activations.len() != self.layers.len() || cache.input().len() != self.input_dim() {
            return Err(shape_err(
                "Mlp::backward cache",
                format!("{} layers", self.layers.len()),
                format!("{} layers", cache.pre_activations.len()),
            ));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(shape_err("Mlp::backward grads", self.layers.len(), grads.layers.len()));
        }
        let mut upstream = output_grad.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let act = self.activation_of(l);
            let x = &cache.inputs[l];
            let n_in = layer.input_dim();
            let delta: Vec<f64> = upstream
                .iter()
                .zip(&cache.pre_activations[l])
                .map(|(g, &z)| g * act.derivative(z))
                .collect();
            let g = &mut grads.layers[l];
            {
                let gw = g.weight.data_mut();
                for (o, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        let row = &mut gw[o * n_in..(o + 1) * n_in];
                        row.iter_mut().zip(x).for_each(|(gwi, xi)| *gwi += d * xi);
                    }
                }
            }
            g.bias.data_mut().iter_mut().zip(&delta).for_each(|(gb, d)| *gb += d);
            let w = layer.weight.data();
            let mut down = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    down.iter_mut().zip(row).for_each(|(di, wi)| *di += d * wi);
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }

    /// Gradients of `sum_rows <output_grad_row, f(input_row)>` for a vector or batch input.
    pub fn backward(&self, input: &Tensor, output_grad: &Tensor) -> Result<(MlpGrads, Tensor)> {
        if input.last_dim() != self.input_dim() {
            return Err(shape_err("Mlp::backward input", self.input_dim(), input.last_dim()));
        }
        if output_grad.last_dim() != self.output_dim() || output_grad.rows() != input.rows() {
            return Err(shape_err(
                "Mlp::backward output_grad",
                format!("{} rows of {}", input.rows(), self.output_dim()),
                format!("{:?}", output_grad.shape()),
            ));
        }
        let mut grads = self.zero_grads();
        let mut input_grad = Vec::with_capacity(input.len());
        for r in 0..input.rows() {
            let cache = self.forward_cached(input.row(r))?;
            input_grad.extend(self.backward_cached(&cache, output_grad.row(r), &mut grads)?);
        }
        Ok((grads, Tensor::new(input.shape().to_vec(), input_grad)?))
    }

    /// Optimizer slots pairing each parameter tensor with its gradient.
    pub fn slots<'a>(&'a mut self, grads: &'a MlpGrads, prefix: &str) -> Vec<ParamSlot<'a>> {
        self.layers
            .iter_mut()
            .zip(&grads.layers)
            .enumerate()
            .flat_map(|(l, (p, g))| {
                [
                    ParamSlot {
                        name: format!("{prefix}.layer{l}.weight"),
                        values: p.weight.data_mut(),
                        grads: g.weight.data(),
                    },
                    ParamSlot {
                        name: format!("{prefix}.layer{l}.bias"),
                        values: p.bias.data_mut(),
                        grads: g.bias.data(),
                    },
                ]
            })
            .collect()
    }

    /// All parameters flattened, weights before biases, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.data().iter().chain(l.bias.data()))
            .copied()
            .collect()
    }

    /// Mutable access to the `i`-th flattened parameter (same order as [`Mlp::flatten`]).
    pub fn param_mut(&mut self, mut i: usize) -> Option<&mut f64> {
        for layer in &mut self.layers {
            let nw = layer.weight.len();
            if i < nw {
                return layer.weight.data_mut().get_mut(i);
            }
            i -= nw;
            let nb = layer.bias.len();
            if i < nb {
                return layer.bias.data_mut().get_mut(i);
            }
            i -= nb;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straight-line re-evaluation of the layer recurrence, independent of `Dense::affine`.
    fn reference_forward(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        let n = mlp.layers().len();
        for (l, layer) in mlp.layers().iter().enumerate() {
            let (out, inp) = (layer.output_dim(), layer.input_dim());
            let mut z = vec![0.0; out];
            for o in 0..out {
                let mut acc = layer.bias.data()[o];
                for i in 0..inp {
                    acc += layer.weight.data()[o * inp + i] * h[i];
                }
                z[o] = acc;
            }
            let act = if l + 1 < n { Activation::Relu } else { mlp.output_activation() };
            h = match act {
                Activation::Relu => z.into_iter().map(|v| if v > 0.0 { v } else { 0.0 }).collect(),
                Activation::Identity => z,
                Activation::Tanh => z.into_iter().map(f64::tanh).collect(),
            };
        }
        h
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mlp = Mlp::zeros(&[3, 4, 2], Activation::Identity).unwrap();
        assert_eq!(mlp.forward_vec(&[1.0, -2.0, 5.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_linear_layer() {
        let mut mlp = Mlp::zeros(&[3, 3], Activation::Identity).unwrap();
        for i in 0..3 {
            mlp.layers_mut()[0].weight.data_mut()[i * 3 + i] = 1.0;
        }
        let v = [0.5, -1.5, 2.0];
        assert_eq!(mlp.forward_vec(&v).unwrap(), v.to_vec());
    }

    #[test]
    fn matches_reference_forward() {
        let mut rng = SeededRng::new(11);
        for trial in 0..20 {
            let dims = [1 + trial % 5, 3 + trial % 7, 2 + trial % 3];
            let act = [Activation::Identity, Activation::Relu, Activation::Tanh][trial % 3];
            let mlp = Mlp::new(&dims, act, &mut rng).unwrap();
            let x: Vec<f64> = (0..dims[0]).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let got = mlp.forward_vec(&x).unwrap();
            let want = reference_forward(&mlp, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_wrong_input_width() {
        let mlp = Mlp::zeros(&[3, 2], Activation::Identity).unwrap();
        assert!(matches!(mlp.forward_vec(&[1.0]), Err(Error::ShapeMismatch { .. })));
        let (_, _) = mlp
            .backward(&Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap(), &Tensor::vector(vec![1.0, 1.0]).unwrap())
            .unwrap();
        assert!(mlp
            .backward(&Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap(), &Tensor::vector(vec![1.0]).unwrap())
            .is_err());
    }

    #[test]
    fn batched_forward_matches_rows() {
        let mut rng = SeededRng::new(5);
        let mlp = Mlp::new(&[2, 5, 3], Activation::Identity, &mut rng).unwrap();
        let batch = Tensor::new(vec![4, 2], (0..8).map(|i| i as f64 * 0.3 - 1.0).collect()).unwrap();
        let out = mlp.forward(&batch).unwrap();
        assert_eq!(out.shape(), &[4, 3]);
        for r in 0..4 {
            assert_eq!(out.row(r), mlp.forward_vec(batch.row(r)).unwrap().as_slice());
        }
    }

    #[test]
    fn param_count_formula() {
        let mlp = Mlp::zeros(&[4, 8, 8, 3], Activation::Identity).unwrap();
        assert_eq!(mlp.param_count(), 5 * 8 + 9 * 8 + 9 * 3);
        assert_eq!(mlp.flatten().len(), mlp.param_count());
    }

    #[test]
    fn linear_closed_form_gradient() {
        // loss = 0.5 * ||W x - y||^2  =>  dW = (W x - y) x^T
        let mut rng = SeededRng::new(3);
        let mlp = Mlp::new(&[3, 2], Activation::Identity, &mut rng).unwrap();
        let x = [0.3, -1.2, 0.7];
        let y = [0.5, -0.25];
        let out = mlp.forward_vec(&x).unwrap();
        let resid: Vec<f64> = out.iter().zip(&y).map(|(o, t)| o - t).collect();
        let (grads, _) = mlp
            .backward(&Tensor::vector(x.to_vec()).unwrap(), &Tensor::vector(resid.clone()).unwrap())
            .unwrap();
        for o in 0..2 {
            for i in 0..3 {
                let want = resid[o] * x[i];
                assert!((grads.layers[0].weight.data()[o * 3 + i] - want).abs() < 1e-14);
            }
            assert!((grads.layers[0].bias.data()[o] - resid[o]).abs() < 1e-14);
        }
    }

    #[test]
    fn dead_relus_block_upstream_gradient() {
        // Zero first-layer weights with negative biases kill every hidden unit.
        let mut rng = SeededRng::new(8);
        let mut mlp = Mlp::new(&[3, 4, 2], Activation::Identity, &mut rng).unwrap();
        mlp.layers_mut()[0].weight.fill(0.0);
        mlp.layers_mut()[0].bias.fill(-1.0);
        let (grads, input_grad) = mlp
            .backward(&Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap(), &Tensor::vector(vec![1.0, -1.0]).unwrap())
            .unwrap();
        assert!(grads.layers[0].weight.data().iter().all(|&g| g == 0.0));
        assert!(grads.layers[0].bias.data().iter().all(|&g| g == 0.0));
        assert!(grads.layers[1].weight.data().iter().all(|&g| g == 0.0));
        assert!(input_grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let mut rng = SeededRng::new(21);
        let mlp = Mlp::new(&[3, 7, 2], Activation::Relu, &mut rng).unwrap();
        let text = serde_json::to_string(&mlp).unwrap();
        let back: Mlp = serde_json::from_str(&text).unwrap();
        assert_eq!(mlp.flatten(), back.flatten());
        assert_eq!(back.output_activation(), Activation::Relu);
    }

    #[test]
    fn deserialize_rejects_broken_chain() {
        let mut rng = SeededRng::new(2);
        let mlp = Mlp::new(&[3, 4, 2], Activation::Identity, &mut rng).unwrap();
        let mut value = serde_json::to_value(&mlp).unwrap();
        value["layer_dims"] = serde_json::json!([3, 5, 2]);
        assert!(serde_json::from_value::<Mlp>(value).is_err());
    }
}
