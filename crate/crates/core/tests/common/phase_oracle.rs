//! Exhaustive phase enumeration for small fully-connected ReLU networks:
//! fixing every ReLU to active or inactive makes the network affine, so the
//! best margin is the best of 2^k LPs.

use pwlcert::lp::{solve_lp, LinExpr, LpLimits, LpProblem, LpStatus, Relation, Sense, VarId};
use pwlcert::network::{Layer, Network};

/// Affine function of the input: coefficients and constant.
#[derive(Clone)]
struct Aff(Vec<f64>, f64);

impl Aff {
    fn expr(&self) -> LinExpr {
        let terms: Vec<(VarId, f64)> = self.0.iter().enumerate().map(|(i, &c)| (VarId(i), c)).collect();
        LinExpr::from_terms(&terms, self.1)
    }
}

fn relu_count(net: &Network) -> usize {
    let mut width = net.input_len();
    let mut n = 0;
    for l in net.layers() {
        match l {
            Layer::FullyConnected { weights, .. } => width = weights.len(),
            Layer::Relu => n += width,
            _ => panic!("phase oracle handles fully-connected ReLU networks only"),
        }
    }
    n
}

/// Constraints that pin each ReLU to its phase, and the resulting logits.
fn linearize(net: &Network, phases: u64) -> (Vec<(Aff, bool)>, Vec<Aff>) {
    let m = net.input_len();
    let mut cur: Vec<Aff> = (0..m)
        .map(|i| {
            let mut c = vec![0.0; m];
            c[i] = 1.0;
            Aff(c, 0.0)
        })
        .collect();
    let mut sign_constraints = Vec::new();
    let mut k = 0;
    for l in net.layers() {
        match l {
            Layer::FullyConnected { weights, bias } => {
                cur = weights
                    .iter()
                    .zip(bias)
                    .map(|(row, &b)| {
                        let mut c = vec![0.0; m];
                        let mut k0 = b;
                        for (w, a) in row.iter().zip(&cur) {
                            for i in 0..m {
                                c[i] += w * a.0[i];
                            }
                            k0 += w * a.1;
                        }
                        Aff(c, k0)
                    })
                    .collect();
            }
            Layer::Relu => {
                for a in cur.iter_mut() {
                    let active = phases >> k & 1 == 1;
                    k += 1;
                    sign_constraints.push((a.clone(), active));
                    if !active {
                        *a = Aff(vec![0.0; m], 0.0);
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    (sign_constraints, cur)
}

/// Best value of `max_{μ ∈ targets} f_μ(x) - f_label(x)` over the box, or
/// `None` when the box is empty.
pub fn best_margin(net: &Network, lower: &[f64], upper: &[f64], label: usize, targets: &[usize]) -> Option<f64> {
    let k = relu_count(net);
    assert!(k <= 16, "too many ReLUs for enumeration");
    let mut best: Option<f64> = None;
    for phases in 0..(1u64 << k) {
        let (signs, logits) = linearize(net, phases);
        for &mu in targets {
            let mut lp = LpProblem::new();
            for (l, u) in lower.iter().zip(upper) {
                lp.add_var(*l, *u);
            }
            for (a, active) in &signs {
                let rel = if *active { Relation::Ge } else { Relation::Le };
                lp.add_constraint(a.expr(), rel, 0.0);
            }
            let obj = &logits[mu].expr() - &logits[label].expr();
            lp.set_objective(Sense::Maximize, obj);
            let out = solve_lp(&lp, LpLimits::default()).unwrap();
            match out.status {
                LpStatus::Optimal => best = Some(best.map_or(out.objective, |b: f64| b.max(out.objective))),
                LpStatus::Infeasible => {}
                s => panic!("phase LP ended with {s:?}"),
            }
        }
    }
    best
}
