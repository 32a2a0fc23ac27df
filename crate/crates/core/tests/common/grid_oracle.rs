//! Dense grid search over two-dimensional input boxes.

use pwlcert::network::Network;

fn lattice(res: f64) -> Vec<f64> {
    let n = (1.0 / res).round() as usize;
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Smallest l∞ distance from `x` to a grid point of `[0, 1]^2` where some
/// other label's logit is at least the label's.
pub fn min_linf_distortion(net: &Network, x: &[f64], label: usize, res: f64) -> Option<f64> {
    assert_eq!(x.len(), 2);
    let pts = lattice(res);
    let mut best: Option<f64> = None;
    for &a in &pts {
        let da = (a - x[0]).abs();
        if best.is_some_and(|b| da >= b) {
            continue;
        }
        for &b in &pts {
            let d = da.max((b - x[1]).abs());
            if best.is_some_and(|bb| d >= bb) {
                continue;
            }
            let l = net.forward(&[a, b]).unwrap();
            if (0..l.len()).any(|m| m != label && l[m] >= l[label]) {
                best = Some(d);
            }
        }
    }
    best
}

/// A grid point of the clipped ball classified as something other than
/// `label`, if any.
pub fn find_counterexample(net: &Network, x: &[f64], label: usize, eps: f64, res: f64) -> Option<Vec<f64>> {
    assert_eq!(x.len(), 2);
    let axis = |c: f64| -> Vec<f64> {
        let (lo, hi) = ((c - eps).max(0.0), (c + eps).min(1.0));
        let n = ((hi - lo) / res).ceil().max(1.0) as usize;
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    };
    for a in axis(x[0]) {
        for b in axis(x[1]) {
            if net.predict(&[a, b]).unwrap() != label {
                return Some(vec![a, b]);
            }
        }
    }
    None
}
