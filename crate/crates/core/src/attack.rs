//! Projected gradient descent on the cross-entropy loss, l∞ threat model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{argmax, LoweredNet, Op, Sample};

/// Slack allowed on the l∞ radius when validating a counterexample.
pub const RADIUS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    pub eps: f64,
    pub steps: usize,
    /// Absolute size of each signed-gradient step.
    pub step_size: f64,
    pub restarts: usize,
    /// Restart `r` draws its starting point from `seed + r`.
    pub seed: u64,
    /// Valid input range for every coordinate.
    pub domain: (f64, f64),
}

impl PgdConfig {
    /// 100 steps of size `2.5 eps / 100`, one restart, inputs in `[0, 1]`.
    pub fn new(eps: f64) -> Self {
        Self { eps, steps: 100, step_size: 2.5 * eps / 100.0, restarts: 1, seed: 0, domain: (0.0, 1.0) }
    }

    pub const PRESETS: [&'static str; 2] = ["adv-cnn-a", "adv-mlp-2x200"];

    /// Settings used to adversarially train two reference networks.
    pub fn preset(name: &str) -> Option<Self> {
        let (eps, steps, step_size) = match name {
            "adv-cnn-a" => (0.1, 8, 0.334),
            "adv-mlp-2x200" => (0.15, 200, 0.1),
            _ => return None,
        };
        Some(Self { eps, steps, step_size, ..Self::new(eps) })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("PGD epsilon must be finite and non-negative, got {}", self.eps)));
        }
        if self.steps == 0 || !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument("PGD needs at least one step and a positive step size".into()));
        }
        if !(self.domain.0 <= self.domain.1) {
            return Err(Error::InvalidArgument("PGD domain is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdResult {
    /// First misclassified point found, if any.
    pub adversarial: Option<Vec<f64>>,
    /// Point with the largest margin seen over all restarts.
    pub best: Vec<f64>,
    /// `max_{μ≠λ} f_μ - f_λ` at `best`.
    pub best_margin: f64,
}

/// `max_{μ≠label} logits[μ] - logits[label]`.
pub fn margin(logits: &[f64], label: usize) -> f64 {
    logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label)
        .map(|(_, v)| v - logits[label])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Whether `x_adv` lies in the clipped ball of radius `eps` around the
/// sample and is classified as something other than its label.
pub fn is_valid_counterexample(net: &LoweredNet, sample: &Sample, x_adv: &[f64], eps: f64, domain: (f64, f64)) -> bool {
    x_adv.len() == sample.input.len()
        && x_adv.iter().zip(&sample.input).all(|(a, x)| {
            a.is_finite() && (a - x).abs() <= eps + RADIUS_TOL && domain.0 <= *a && *a <= domain.1
        })
        && argmax(&net.forward(x_adv)) != sample.label
}

pub fn pgd_attack(net: &LoweredNet, sample: &Sample, config: &PgdConfig) -> Result<PgdResult> {
    config.validate()?;
    if sample.input.len() != net.input_dim {
        return Err(Error::Shape(format!("sample has {} inputs, network expects {}", sample.input.len(), net.input_dim)));
    }
    let x0 = &sample.input;
    let clean = net.forward(x0);
    let mut result = PgdResult { adversarial: None, best: x0.clone(), best_margin: margin(&clean, sample.label) };
    if argmax(&clean) != sample.label {
        result.adversarial = Some(x0.clone());
        return Ok(result);
    }
    let lo: Vec<f64> = x0.iter().map(|v| (v - config.eps).max(config.domain.0)).collect();
    let hi: Vec<f64> = x0.iter().map(|v| (v + config.eps).min(config.domain.1)).collect();
    for r in 0..config.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(r as u64));
        let mut x: Vec<f64> = lo.iter().zip(&hi).map(|(&l, &h)| if l < h { rng.gen_range(l..=h) } else { l }).collect();
        for step in 0..=config.steps {
            let (logits, grad) = loss_gradient(net, &x, sample.label);
            let m = margin(&logits, sample.label);
            if m > result.best_margin {
                result.best_margin = m;
                result.best = x.clone();
            }
            if argmax(&logits) != sample.label {
                tracing::debug!(restart = r, step, "PGD found a counterexample");
                result.adversarial = Some(x);
                return Ok(result);
            }
            if step == config.steps {
                break;
            }
            for i in 0..x.len() {
                let s = if grad[i] > 0.0 {
                    1.0
                } else if grad[i] < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                x[i] = (x[i] + config.step_size * s).clamp(lo[i], hi[i]);
            }
        }
    }
    Ok(result)
}

/// Logits and the gradient of the cross-entropy loss of `label` with
/// respect to the input.
pub fn loss_gradient(net: &LoweredNet, x: &[f64], label: usize) -> (Vec<f64>, Vec<f64>) {
    let (logits, trace) = net.trace(x);
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|v| (v - top).exp()).collect();
    let z: f64 = exp.iter().sum();
    let mut g: Vec<f64> = exp.iter().map(|e| e / z).collect();
    g[label] -= 1.0;
    let mut pos = trace.len();
    let grad = backward(&net.ops, &trace, &mut pos, g);
    (logits, grad)
}

/// Walks `ops` in reverse; `pos` is one past the trace entry of the last op.
fn backward(ops: &[Op], trace: &[Vec<f64>], pos: &mut usize, mut g: Vec<f64>) -> Vec<f64> {
    for op in ops.iter().rev() {
        g = match op {
            Op::Affine(a) => {
                *pos -= 1;
                let mut out = vec![0.0; a.in_dim];
                for (row, gi) in a.rows.iter().zip(&g) {
                    for &(j, w) in row {
                        out[j] += w * gi;
                    }
                }
                out
            }
            Op::Relu => {
                *pos -= 1;
                let pre = &trace[*pos];
                g.iter().zip(pre).map(|(gi, p)| if *p > 0.0 { *gi } else { 0.0 }).collect()
            }
            Op::Max(groups) => {
                *pos -= 1;
                let pre = &trace[*pos];
                let mut out = vec![0.0; pre.len()];
                for (grp, gi) in groups.iter().zip(&g) {
                    let vals: Vec<f64> = grp.iter().map(|&i| pre[i]).collect();
                    out[grp[argmax(&vals)]] += gi;
                }
                out
            }
            Op::Residual(branch) => {
                *pos -= 1;
                let inner = backward(branch, trace, pos, g.clone());
                g.iter().zip(&inner).map(|(a, b)| a + b).collect()
            }
        };
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Layer, Network};

    fn linear() -> LoweredNet {
        Network::new(vec![1], vec![Layer::FullyConnected { weights: vec![vec![1.0], vec![-1.0]], bias: vec![0.0, 0.0] }])
            .unwrap()
            .lower()
    }

    #[test]
    fn no_counterexample_inside_unit_box() {
        let s = Sample { input: vec![0.4], label: 0 };
        let r = pgd_attack(&linear(), &s, &PgdConfig::new(0.5)).unwrap();
        assert!(r.adversarial.is_none());
    }

    #[test]
    fn wider_domain_admits_counterexample() {
        let s = Sample { input: vec![0.4], label: 0 };
        let cfg = PgdConfig { domain: (-1.0, 1.0), ..PgdConfig::new(0.5) };
        let x = pgd_attack(&linear(), &s, &cfg).unwrap().adversarial.unwrap();
        assert!(x[0] < 0.0 && x[0] >= -0.1);
        assert!(is_valid_counterexample(&linear(), &s, &x, 0.5, (-1.0, 1.0)));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let net = Network::new(
            vec![1, 4, 4],
            vec![
                Layer::Convolution {
                    kernel: vec![vec![vec![vec![0.5, -0.3], vec![0.2, 0.8]]], vec![vec![vec![-0.4, 0.1], vec![0.7, -0.2]]]],
                    bias: vec![0.05, -0.1],
                    stride: [1, 1],
                    padding: [0, 0],
                },
                Layer::Relu,
                Layer::MaxPool { window: [2, 2], stride: [1, 1] },
                Layer::Flatten,
                Layer::Residual { branch: vec![Layer::FullyConnected { weights: (0..8).map(|i| (0..8).map(|j| ((i * 3 + j) % 5) as f64 * 0.1 - 0.2).collect()).collect(), bias: vec![0.01; 8] }, Layer::Relu] },
                Layer::FullyConnected { weights: (0..3).map(|i| (0..8).map(|j| ((i + 2 * j) % 7) as f64 * 0.15 - 0.4).collect()).collect(), bias: vec![0.0, 0.1, -0.1] },
            ],
        )
        .unwrap()
        .lower();
        let x: Vec<f64> = (0..16).map(|i| ((i * 7) % 11) as f64 / 11.0).collect();
        let loss = |x: &[f64]| {
            let l = net.forward(x);
            let top = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = l.iter().map(|v| (v - top).exp()).sum();
            -(l[1] - top - z.ln())
        };
        let (_, g) = loss_gradient(&net, &x, 1);
        for i in 0..16 {
            let h = 1e-6;
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-5, "coordinate {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn presets() {
        let p = PgdConfig::preset("adv-cnn-a").unwrap();
        assert_eq!((p.eps, p.steps, p.step_size), (0.1, 8, 0.334));
        assert!(PgdConfig::preset("nope").is_none());
    }
}
