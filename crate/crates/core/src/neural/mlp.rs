use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(T::zero()),
            Activation::Sigmoid => {
                if x >= T::zero() {
                    T::one() / (T::one() + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (T::one() + e)
                }
            }
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_at_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Tanh => T::one() - y * y,
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => y * (T::one() - y),
        }
    }
}

/// Layer widths and activations of a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub layer_dims: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
}

impl Arch {
    pub fn new(layer_dims: Vec<usize>, hidden: Activation, output: Activation) -> Result<Self> {
        let arch = Self {
            layer_dims,
            hidden,
            output,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// `noise_dim → 64 tanh → 64 tanh → data_dim`.
    pub fn generator(noise_dim: usize, data_dim: usize) -> Self {
        Self {
            layer_dims: vec![noise_dim, 64, 64, data_dim],
            hidden: Activation::Tanh,
            output: Activation::Identity,
        }
    }

    /// `data_dim → 64 relu → 64 relu → 1 sigmoid`.
    pub fn discriminator(data_dim: usize) -> Self {
        Self {
            layer_dims: vec![data_dim, 64, 64, 1],
            hidden: Activation::Relu,
            output: Activation::Sigmoid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::Config(format!(
                "an architecture needs at least input and output widths, got {:?}",
                self.layer_dims
            )));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::Config(format!(
                "zero-width layer in {:?}",
                self.layer_dims
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated arch")
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 2 == self.layer_dims.len() {
            self.output
        } else {
            self.hidden
        }
    }
}

/// Dense layer; `weight` is `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T: Scalar> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T: Scalar> {
    arch: Arch,
    layers: Vec<Layer<T>>,
}

/// Per-layer inputs and activated outputs from a forward pass.
#[derive(Debug, Clone)]
pub struct Trace<T: Scalar> {
    inputs: Vec<Array2<T>>,
    outputs: Vec<Array2<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn output(&self) -> &Array2<T> {
        self.outputs.last().expect("non-empty trace")
    }

    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }
}

/// Backpropagated pre-activation gradients and the input gradient.
#[derive(Debug, Clone)]
pub struct Backward<T: Scalar> {
    deltas: Vec<Array2<T>>,
    pub input_grad: Array2<T>,
}

impl<T: Scalar> Backward<T> {
    /// Parameter gradient summed over the batch, in flat parameter order.
    pub fn param_grads(&self, trace: &Trace<T>) -> Vec<T> {
        let mut out = Vec::new();
        for (input, delta) in trace.inputs.iter().zip(&self.deltas) {
            out.extend(input.t().dot(delta).iter().copied());
            out.extend(delta.sum_axis(Axis(0)).iter().copied());
        }
        out
    }

    /// Sum over the batch of squared per-sample parameter gradients.
    ///
    /// A weight's per-sample gradient is `a_s,i · δ_s,j`, so the sum of
    /// squares is `(A∘A)ᵀ (Δ∘Δ)` and needs no per-sample passes.
    pub fn squared_param_grads(&self, trace: &Trace<T>) -> Vec<T> {
        let mut out = Vec::new();
        for (input, delta) in trace.inputs.iter().zip(&self.deltas) {
            let a2 = input.mapv(|v| v * v);
            let d2 = delta.mapv(|v| v * v);
            out.extend(a2.t().dot(&d2).iter().copied());
            out.extend(d2.sum_axis(Axis(0)).iter().copied());
        }
        out
    }
}

impl<T: Scalar> Mlp<T> {
    /// Uniform Glorot initialization, zero biases.
    pub fn new<R: Rng + ?Sized>(arch: Arch, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight =
                    Array2::from_shape_fn((fan_in, fan_out), |_| T::of(rng.random_range(-a..=a)));
                Layer {
                    weight,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self { arch, layers })
    }

    pub fn zeros(arch: Arch) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .layer_dims
            .windows(2)
            .map(|w| Layer {
                weight: Array2::zeros((w[0], w[1])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Ok(Self { arch, layers })
    }

    pub fn from_params(arch: Arch, params: &[T]) -> Result<Self> {
        let mut net = Self::zeros(arch)?;
        net.set_params(params)?;
        Ok(net)
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.arch.param_count()
    }

    /// Flat parameters: per layer, the row-major weight then the bias.
    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend(layer.weight.iter().copied());
            out.extend(layer.bias.iter().copied());
        }
        out
    }

    pub fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ArchMismatch(format!(
                "{} parameters supplied, architecture {:?} needs {}",
                params.len(),
                self.arch.layer_dims,
                self.param_count()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            for w in layer.weight.iter_mut() {
                *w = params[offset];
                offset += 1;
            }
            for b in layer.bias.iter_mut() {
                *b = params[offset];
                offset += 1;
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check_input(x)?;
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            h = self.affine(layer, l, h.view());
        }
        Ok(h)
    }

    pub fn forward_trace(&self, x: ArrayView2<'_, T>) -> Result<Trace<T>> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let out = self.affine(layer, l, h.view());
            inputs.push(h);
            h = out.clone();
            outputs.push(out);
        }
        Ok(Trace { inputs, outputs })
    }

    /// Backpropagates `grad_out = ∂L/∂output` (batch × out) through a trace
    /// of this network.
    pub fn backward(&self, trace: &Trace<T>, grad_out: ArrayView2<'_, T>) -> Result<Backward<T>> {
        let out = trace.output();
        if grad_out.dim() != out.dim() {
            return Err(Error::Dimension(format!(
                "output gradient {:?} does not match output {:?}",
                grad_out.dim(),
                out.dim()
            )));
        }
        let n_layers = self.layers.len();
        let mut deltas = vec![Array2::zeros((0, 0)); n_layers];
        let act = self.arch.activation(n_layers - 1);
        let mut delta = ndarray::Zip::from(&grad_out)
            .and(out)
            .map_collect(|&g, &y| g * act.derivative_at_output(y));
        for l in (0..n_layers).rev() {
            let upstream = delta.dot(&self.layers[l].weight.t());
            deltas[l] = delta;
            if l == 0 {
                return Ok(Backward {
                    deltas,
                    input_grad: upstream,
                });
            }
            let act = self.arch.activation(l - 1);
            delta = ndarray::Zip::from(&upstream)
                .and(&trace.outputs[l - 1])
                .map_collect(|&g, &y| g * act.derivative_at_output(y));
        }
        unreachable!("network has at least one layer")
    }

    fn affine(&self, layer: &Layer<T>, index: usize, h: ArrayView2<'_, T>) -> Array2<T> {
        let act = self.arch.activation(index);
        let mut z = h.dot(&layer.weight);
        z += &layer.bias;
        z.mapv_inplace(|v| act.apply(v));
        z
    }

    fn check_input(&self, x: ArrayView2<'_, T>) -> Result<()> {
        if x.ncols() != self.arch.input_dim() {
            return Err(Error::Dimension(format!(
                "input width {} but network expects {}",
                x.ncols(),
                self.arch.input_dim()
            )));
        }
        Ok(())
    }
}
