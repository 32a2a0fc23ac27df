//! Canonical sparse form of a network: every linear layer (fully-connected,
//! convolution, flatten) becomes an explicit sparse affine map over the flat
//! activation vector, and max-pooling becomes a list of index groups.

use super::{Layer, Network};

/// `out[i] = bias[i] + sum(w * in[j] for (j, w) in rows[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
}

impl Affine {
    pub fn out_dim(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().map(|&(j, w)| w * x[j]).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Affine(Affine),
    Relu,
    /// Output `k` is the maximum of the inputs listed in group `k`.
    Max(Vec<Vec<usize>>),
    /// Output is the input plus the branch applied to the input.
    Residual(Vec<Op>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoweredNet {
    pub input_dim: usize,
    pub num_labels: usize,
    pub ops: Vec<Op>,
}

/// Intermediate values recorded by [`LoweredNet::trace`], one entry per op in
/// depth-first order (a residual contributes its branch ops followed by its
/// own entry). Affine and residual entries hold outputs; ReLU and max entries
/// hold their inputs.
pub type Trace = Vec<Vec<f64>>;

impl LoweredNet {
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        run(&self.ops, x.to_vec(), &mut None)
    }

    pub fn trace(&self, x: &[f64]) -> (Vec<f64>, Trace) {
        let mut trace = Some(Vec::new());
        let out = run(&self.ops, x.to_vec(), &mut trace);
        (out, trace.unwrap())
    }

    /// Total number of ReLU units.
    pub fn relu_count(&self) -> usize {
        fn count(ops: &[Op], dim: usize) -> (usize, usize) {
            let mut n = 0;
            let mut dim = dim;
            for op in ops {
                match op {
                    Op::Affine(a) => dim = a.out_dim(),
                    Op::Relu => n += dim,
                    Op::Max(groups) => dim = groups.len(),
                    Op::Residual(branch) => n += count(branch, dim).0,
                }
            }
            (n, dim)
        }
        count(&self.ops, self.input_dim).0
    }
}

fn run(ops: &[Op], mut x: Vec<f64>, trace: &mut Option<Trace>) -> Vec<f64> {
    for op in ops {
        x = match op {
            Op::Affine(a) => {
                let y = a.apply(&x);
                if let Some(t) = trace {
                    t.push(y.clone());
                }
                y
            }
            Op::Relu => {
                if let Some(t) = trace {
                    t.push(x.clone());
                }
                x.iter().map(|v| v.max(0.0)).collect()
            }
            Op::Max(groups) => {
                if let Some(t) = trace {
                    t.push(x.clone());
                }
                groups
                    .iter()
                    .map(|g| g.iter().map(|&i| x[i]).fold(f64::NEG_INFINITY, f64::max))
                    .collect()
            }
            Op::Residual(branch) => {
                let inner = run(branch, x.clone(), trace);
                let y: Vec<f64> = inner.iter().zip(&x).map(|(a, b)| a + b).collect();
                if let Some(t) = trace {
                    t.push(y.clone());
                }
                y
            }
        };
    }
    x
}

pub(crate) fn lower(net: &Network) -> LoweredNet {
    LoweredNet {
        input_dim: net.input_len(),
        num_labels: net.num_labels(),
        ops: lower_layers(net.layers(), net.input_shape()),
    }
}

fn lower_layers(layers: &[Layer], input_shape: &[usize]) -> Vec<Op> {
    let mut shape = input_shape.to_vec();
    let mut ops = Vec::new();
    for layer in layers {
        let next = layer.output_shape(&shape).expect("validated network");
        match layer {
            Layer::FullyConnected { weights, bias } => ops.push(Op::Affine(Affine {
                rows: weights
                    .iter()
                    .map(|row| row.iter().copied().enumerate().filter(|&(_, w)| w != 0.0).collect())
                    .collect(),
                bias: bias.clone(),
                in_dim: shape[0],
            })),
            Layer::Convolution { kernel, bias, stride, padding } => {
                let (h, w) = (shape[1] as isize, shape[2] as isize);
                let (oh, ow) = (next[1], next[2]);
                let mut rows = Vec::with_capacity(next.iter().product());
                let mut biases = Vec::with_capacity(rows.capacity());
                for (filters, b) in kernel.iter().zip(bias) {
                    for i in 0..oh {
                        for j in 0..ow {
                            let mut row = Vec::new();
                            for (c, filter) in filters.iter().enumerate() {
                                for (ki, krow) in filter.iter().enumerate() {
                                    let r = (i * stride[0] + ki) as isize - padding[0] as isize;
                                    for (kj, &kv) in krow.iter().enumerate() {
                                        let s = (j * stride[1] + kj) as isize - padding[1] as isize;
                                        if r < 0 || r >= h || s < 0 || s >= w || kv == 0.0 {
                                            continue;
                                        }
                                        row.push(((c as isize * h * w + r * w + s) as usize, kv));
                                    }
                                }
                            }
                            row.sort_by_key(|&(idx, _)| idx);
                            rows.push(row);
                            biases.push(*b);
                        }
                    }
                }
                ops.push(Op::Affine(Affine { rows, bias: biases, in_dim: shape.iter().product() }));
            }
            Layer::Relu => ops.push(Op::Relu),
            Layer::MaxPool { window, stride } => {
                let (c, h, w) = (shape[0], shape[1], shape[2]);
                let (oh, ow) = (next[1], next[2]);
                let mut groups = Vec::with_capacity(c * oh * ow);
                for ch in 0..c {
                    for i in 0..oh {
                        for j in 0..ow {
                            let mut g = Vec::with_capacity(window[0] * window[1]);
                            for di in 0..window[0] {
                                for dj in 0..window[1] {
                                    g.push(ch * h * w + (i * stride[0] + di) * w + j * stride[1] + dj);
                                }
                            }
                            groups.push(g);
                        }
                    }
                }
                ops.push(Op::Max(groups));
            }
            Layer::Flatten => {}
            Layer::Residual { branch } => ops.push(Op::Residual(lower_layers(branch, &shape))),
        }
        shape = next;
    }
    ops
}
