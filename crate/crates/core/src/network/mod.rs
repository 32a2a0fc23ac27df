//! Piecewise-linear feed-forward networks.
//!
//! A [`Network`] is an ordered list of [`Layer`]s. Every supported layer is
//! either affine (fully-connected, convolution, flatten, residual sums) or a
//! piecewise-linear nonlinearity (ReLU, max-pooling), so the whole network is
//! piecewise-linear in its input.
//!
//! Evaluation happens in two independent ways: [`Network::forward`] walks the
//! layers directly (convolutions as nested loops), while [`lower`] rewrites
//! the network into sparse affine maps that the bounds and encoder modules
//! consume.

mod dataset;
mod io;
pub mod lower;
mod sparsify;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{load_csv, load_dataset, load_idx, parse_csv, parse_idx, parse_idx_array, DatasetSource, IdxArray, Sample};
pub use io::{NETWORK_SCHEMA_VERSION, NetworkFile};
pub use lower::{Affine, LoweredNet, Op};

/// One layer of a piecewise-linear network. Image tensors are channels-first
/// (`[C, H, W]`) and stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    FullyConnected {
        /// Shape `(out, in)`.
        #[serde(rename = "W")]
        weights: Vec<Vec<f64>>,
        #[serde(rename = "b")]
        bias: Vec<f64>,
    },
    Convolution {
        /// Shape `(out_channels, in_channels, kh, kw)`.
        kernel: Vec<Vec<Vec<Vec<f64>>>>,
        bias: Vec<f64>,
        stride: [usize; 2],
        padding: [usize; 2],
    },
    Relu,
    MaxPool {
        window: [usize; 2],
        stride: [usize; 2],
    },
    Flatten,
    /// `y = x + branch(x)`; the branch must preserve the shape of its input.
    Residual { branch: Vec<Layer> },
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::FullyConnected { .. } => "fully_connected",
            Layer::Convolution { .. } => "convolution",
            Layer::Relu => "relu",
            Layer::MaxPool { .. } => "max_pool",
            Layer::Flatten => "flatten",
            Layer::Residual { .. } => "residual",
        }
    }

    /// Shape produced by this layer for the given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::FullyConnected { weights, bias } => {
                let out = weights.len();
                if out == 0 {
                    return Err(Error::InvalidNetwork("fully_connected layer with no rows".into()));
                }
                let cols = weights[0].len();
                if weights.iter().any(|row| row.len() != cols) {
                    return Err(Error::InvalidNetwork("ragged weight matrix".into()));
                }
                if bias.len() != out {
                    return Err(Error::InvalidNetwork(format!(
                        "bias length {} does not match {} output rows",
                        bias.len(),
                        out
                    )));
                }
                if input.len() != 1 || input[0] != cols {
                    return Err(Error::Shape(format!(
                        "fully_connected expects input [{cols}], got {input:?}"
                    )));
                }
                Ok(vec![out])
            }
            Layer::Convolution { kernel, bias, stride, padding } => {
                let (c, h, w) = chw(input, "convolution")?;
                let out_c = kernel.len();
                if out_c == 0 || bias.len() != out_c {
                    return Err(Error::InvalidNetwork("convolution kernel/bias mismatch".into()));
                }
                let in_c = kernel[0].len();
                let kh = kernel[0].first().map_or(0, Vec::len);
                let kw = kernel[0].first().and_then(|k| k.first()).map_or(0, Vec::len);
                if kh == 0 || kw == 0 {
                    return Err(Error::InvalidNetwork("empty convolution kernel".into()));
                }
                let regular = kernel.iter().all(|o| {
                    o.len() == in_c && o.iter().all(|ch| ch.len() == kh && ch.iter().all(|r| r.len() == kw))
                });
                if !regular {
                    return Err(Error::InvalidNetwork("ragged convolution kernel".into()));
                }
                if in_c != c {
                    return Err(Error::Shape(format!(
                        "convolution expects {in_c} input channels, got {c}"
                    )));
                }
                if stride[0] == 0 || stride[1] == 0 {
                    return Err(Error::InvalidNetwork("stride must be positive".into()));
                }
                let ph = h + 2 * padding[0];
                let pw = w + 2 * padding[1];
                if ph < kh || pw < kw {
                    return Err(Error::Shape("convolution kernel larger than padded input".into()));
                }
                Ok(vec![out_c, (ph - kh) / stride[0] + 1, (pw - kw) / stride[1] + 1])
            }
            Layer::Relu => Ok(input.to_vec()),
            Layer::MaxPool { window, stride } => {
                let (c, h, w) = chw(input, "max_pool")?;
                if window[0] == 0 || window[1] == 0 || stride[0] == 0 || stride[1] == 0 {
                    return Err(Error::InvalidNetwork("max_pool window and stride must be positive".into()));
                }
                if h < window[0] || w < window[1] {
                    return Err(Error::Shape("max_pool window larger than input".into()));
                }
                Ok(vec![c, (h - window[0]) / stride[0] + 1, (w - window[1]) / stride[1] + 1])
            }
            Layer::Flatten => Ok(vec![checked_product(input)?]),
            Layer::Residual { branch } => {
                let mut shape = input.to_vec();
                for layer in branch {
                    shape = layer.output_shape(&shape)?;
                }
                if shape != input {
                    return Err(Error::Shape(format!(
                        "residual branch maps {input:?} to {shape:?}"
                    )));
                }
                Ok(shape)
            }
        }
    }

    fn check_finite(&self) -> Result<()> {
        let finite = match self {
            Layer::FullyConnected { weights, bias } => {
                weights.iter().flatten().chain(bias).all(|v| v.is_finite())
            }
            Layer::Convolution { kernel, bias, .. } => {
                kernel.iter().flatten().flatten().flatten().chain(bias).all(|v| v.is_finite())
            }
            Layer::Residual { branch } => return branch.iter().try_for_each(Layer::check_finite),
            _ => true,
        };
        if finite {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("{} layer", self.name())))
        }
    }

    fn apply(&self, input: &[f64], shape: &[usize]) -> Vec<f64> {
        match self {
            Layer::FullyConnected { weights, bias } => weights
                .iter()
                .zip(bias)
                .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
                .collect(),
            Layer::Convolution { kernel, bias, stride, padding } => {
                let (c, h, w) = (shape[0], shape[1], shape[2]);
                let kh = kernel[0][0].len();
                let kw = kernel[0][0][0].len();
                let oh = (h + 2 * padding[0] - kh) / stride[0] + 1;
                let ow = (w + 2 * padding[1] - kw) / stride[1] + 1;
                let mut out = vec![0.0; kernel.len() * oh * ow];
                for (o, (filters, b)) in kernel.iter().zip(bias).enumerate() {
                    for i in 0..oh {
                        for j in 0..ow {
                            let mut acc = *b;
                            for (ch, filter) in filters.iter().enumerate().take(c) {
                                for (ki, krow) in filter.iter().enumerate() {
                                    let r = (i * stride[0] + ki) as isize - padding[0] as isize;
                                    if r < 0 || r >= h as isize {
                                        continue;
                                    }
                                    for (kj, kv) in krow.iter().enumerate() {
                                        let s = (j * stride[1] + kj) as isize - padding[1] as isize;
                                        if s < 0 || s >= w as isize {
                                            continue;
                                        }
                                        acc += kv * input[ch * h * w + r as usize * w + s as usize];
                                    }
                                }
                            }
                            out[o * oh * ow + i * ow + j] = acc;
                        }
                    }
                }
                out
            }
            Layer::Relu => input.iter().map(|v| v.max(0.0)).collect(),
            Layer::MaxPool { window, stride } => {
                let (c, h, w) = (shape[0], shape[1], shape[2]);
                let oh = (h - window[0]) / stride[0] + 1;
                let ow = (w - window[1]) / stride[1] + 1;
                let mut out = Vec::with_capacity(c * oh * ow);
                for ch in 0..c {
                    for i in 0..oh {
                        for j in 0..ow {
                            let mut best = f64::NEG_INFINITY;
                            for di in 0..window[0] {
                                for dj in 0..window[1] {
                                    let v = input[ch * h * w + (i * stride[0] + di) * w + j * stride[1] + dj];
                                    best = best.max(v);
                                }
                            }
                            out.push(best);
                        }
                    }
                }
                out
            }
            Layer::Flatten => input.to_vec(),
            Layer::Residual { branch } => {
                let mut value = input.to_vec();
                let mut s = shape.to_vec();
                for layer in branch {
                    let next = layer.output_shape(&s).expect("validated network");
                    value = layer.apply(&value, &s);
                    s = next;
                }
                value.iter().zip(input).map(|(a, b)| a + b).collect()
            }
        }
    }
}

fn chw(shape: &[usize], what: &str) -> Result<(usize, usize, usize)> {
    match shape {
        [c, h, w] => Ok((*c, *h, *w)),
        _ => Err(Error::Shape(format!("{what} expects a [C, H, W] input, got {shape:?}"))),
    }
}

fn checked_product(shape: &[usize]) -> Result<usize> {
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Shape(format!("shape {shape:?} overflows")))
}

/// A validated piecewise-linear classifier. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    input_shape: Vec<usize>,
    num_labels: usize,
}

impl Network {
    /// Validates layer shapes end to end. The final layer must produce a
    /// flat vector whose length becomes the number of labels.
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        if input_shape.is_empty() || checked_product(&input_shape)? == 0 {
            return Err(Error::InvalidNetwork(format!("bad input shape {input_shape:?}")));
        }
        let mut shape = input_shape.clone();
        for layer in &layers {
            layer.check_finite()?;
            shape = layer.output_shape(&shape)?;
        }
        if shape.len() != 1 || shape[0] == 0 {
            return Err(Error::Shape(format!("network output must be a non-empty vector, got {shape:?}")));
        }
        Ok(Self { layers, input_shape, num_labels: shape[0] })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Logits `f(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_len() {
            return Err(Error::Shape(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.input_len()
            )));
        }
        let mut value = x.to_vec();
        let mut shape = self.input_shape.clone();
        for layer in &self.layers {
            let next = layer.output_shape(&shape)?;
            value = layer.apply(&value, &shape);
            shape = next;
        }
        Ok(value)
    }

    /// Index of the largest logit; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// Sparse affine form used by bounds propagation, encoding and attacks.
    pub fn lower(&self) -> LoweredNet {
        lower::lower(self)
    }

    /// Zero the smallest-magnitude kernel weights of each linear layer; see
    /// [`sparsify`](crate::network::Network::sparsify).
    pub fn sparsify(&self, fractions: &[f64]) -> Result<Network> {
        sparsify::sparsify(self, fractions)
    }

    pub(crate) fn into_parts(self) -> (Vec<usize>, Vec<Layer>) {
        (self.input_shape, self.layers)
    }
}

/// Lowest index attaining the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fc(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Layer {
        Layer::FullyConnected { weights, bias }
    }

    #[test]
    fn identity_layer() {
        let net = Network::new(vec![2], vec![fc(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0])]).unwrap();
        assert_eq!(net.forward(&[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
    }

    #[test]
    fn single_affine_row() {
        let net = Network::new(vec![2], vec![fc(vec![vec![1.0, -1.0]], vec![0.5])]).unwrap();
        assert_eq!(net.forward(&[1.0, 0.0]).unwrap(), vec![1.5]);
        assert_eq!(net.num_labels(), 1);
    }

    #[test]
    fn predict_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
        let net = Network::new(vec![1], vec![fc(vec![vec![1.0], vec![1.0]], vec![0.0, 0.0])]).unwrap();
        assert_eq!(net.predict(&[0.4]).unwrap(), 0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Network::new(vec![3], vec![fc(vec![vec![1.0, 2.0]], vec![0.0])]).is_err());
        assert!(Network::new(vec![2], vec![fc(vec![vec![1.0, 2.0]], vec![0.0, 1.0])]).is_err());
        assert!(Network::new(vec![2], vec![fc(vec![vec![1.0, 2.0], vec![1.0]], vec![0.0, 1.0])]).is_err());
        assert!(Network::new(vec![4], vec![Layer::MaxPool { window: [2, 2], stride: [1, 1] }]).is_err());
        assert!(Network::new(vec![2], vec![fc(vec![vec![f64::NAN, 1.0]], vec![0.0])]).is_err());
        let net = Network::new(vec![2], vec![fc(vec![vec![1.0, 0.0]], vec![0.0])]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn residual_requires_matching_shape() {
        let ok = Layer::Residual { branch: vec![fc(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![1.0, 1.0]), Layer::Relu] };
        let net = Network::new(vec![2], vec![ok]).unwrap();
        assert_eq!(net.forward(&[1.0, -3.0]).unwrap(), vec![1.0 + 3.0, -3.0 + 0.0]);
        let bad = Layer::Residual { branch: vec![fc(vec![vec![1.0, 1.0]], vec![0.0])] };
        assert!(Network::new(vec![2], vec![bad]).is_err());
    }

    #[test]
    fn conv_and_pool_shapes() {
        let kernel = vec![vec![vec![vec![1.0, 0.0], vec![0.0, -1.0]]]];
        let net = Network::new(
            vec![1, 3, 3],
            vec![
                Layer::Convolution { kernel, bias: vec![0.5], stride: [1, 1], padding: [0, 0] },
                Layer::MaxPool { window: [2, 2], stride: [1, 1] },
                Layer::Flatten,
            ],
        )
        .unwrap();
        assert_eq!(net.num_labels(), 1);
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
        // conv outputs: x00-x11+.5 = 0.1-0.5+0.5 = 0.1 for all four windows
        let y = net.forward(&x).unwrap();
        assert!((y[0] - 0.1).abs() < 1e-12);
    }
}
