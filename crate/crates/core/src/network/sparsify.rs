use tracing::warn;

use super::{Layer, Network};
use crate::error::{Error, Result};

/// For the `i`-th linear layer (fully-connected or convolution, depth-first
/// order) zero the `floor(f_i * k)` kernel weights of smallest magnitude, `k`
/// being the kernel size, then rescale the survivors so the kernel keeps its
/// l1 norm. Biases are left alone. Magnitude ties are broken by position.
pub(super) fn sparsify(net: &Network, fractions: &[f64]) -> Result<Network> {
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::InvalidArgument(format!("sparsity fraction {f} outside [0, 1]")));
    }
    let expected = count_linear(net.layers());
    if fractions.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "{} fractions given for {expected} linear layers",
            fractions.len()
        )));
    }
    let (shape, mut layers) = net.clone().into_parts();
    let mut next = fractions.iter().copied();
    sparsify_layers(&mut layers, &mut next);
    Network::new(shape, layers)
}

fn count_linear(layers: &[Layer]) -> usize {
    layers
        .iter()
        .map(|l| match l {
            Layer::FullyConnected { .. } | Layer::Convolution { .. } => 1,
            Layer::Residual { branch } => count_linear(branch),
            _ => 0,
        })
        .sum()
}

fn sparsify_layers(layers: &mut [Layer], fractions: &mut impl Iterator<Item = f64>) {
    for (index, layer) in layers.iter_mut().enumerate() {
        match layer {
            Layer::FullyConnected { weights, .. } => {
                let f = fractions.next().expect("fraction count checked");
                prune_kernel(weights.iter_mut().flatten().collect(), f, index);
            }
            Layer::Convolution { kernel, .. } => {
                let f = fractions.next().expect("fraction count checked");
                prune_kernel(kernel.iter_mut().flatten().flatten().flatten().collect(), f, index);
            }
            Layer::Residual { branch } => sparsify_layers(branch, fractions),
            _ => {}
        }
    }
}

fn prune_kernel(mut weights: Vec<&mut f64>, fraction: f64, layer: usize) {
    let k = weights.len();
    let zeroed = ((fraction * k as f64).floor() as usize).min(k);
    if zeroed == 0 {
        return;
    }
    let norm_before: f64 = weights.iter().map(|w| w.abs()).sum();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| weights[a].abs().total_cmp(&weights[b].abs()).then(a.cmp(&b)));
    for &i in &order[..zeroed] {
        *weights[i] = 0.0;
    }
    let norm_after: f64 = weights.iter().map(|w| w.abs()).sum();
    if norm_after == 0.0 {
        warn!(layer, "all surviving kernel weights are zero; skipping l1 rescale");
        return;
    }
    let scale = norm_before / norm_after;
    for w in weights.iter_mut() {
        **w *= scale;
    }
}
