#![allow(dead_code)]

pub mod encoding_oracle;
pub mod grid_oracle;
pub mod lp_oracle;
pub mod phase_oracle;

use pwlcert::lp::{LinExpr, LpProblem, Relation, Sense, VarId};
use rand::Rng;

/// Random boxed LP. With `feasible`, right-hand sides are placed around a
/// random interior point so the instance has a solution.
pub fn random_lp(rng: &mut impl Rng, n: usize, m: usize, feasible: bool) -> LpProblem {
    let mut lp = LpProblem::new();
    let mut x0 = Vec::with_capacity(n);
    for _ in 0..n {
        let lo: f64 = rng.gen_range(-3.0..1.0);
        let hi = lo + rng.gen_range(0.5..4.0);
        lp.add_var(lo, hi);
        x0.push(rng.gen_range(lo..hi));
    }
    for i in 0..m {
        let mut terms: Vec<(VarId, f64)> = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.8) {
                terms.push((VarId(j), (rng.gen_range(-4.0f64..4.0) * 4.0).round() / 4.0));
            }
        }
        let expr = LinExpr::from_terms(&terms, 0.0);
        let at = expr.eval(&x0);
        let rel = lp_oracle::relation_from(i + rng.gen_range(0..5));
        let slack = if feasible { rng.gen_range(0.0..2.0) } else { rng.gen_range(-3.0..2.0) };
        let rhs = match rel {
            Relation::Le => at + slack,
            Relation::Ge => at - slack,
            Relation::Eq => at,
        };
        lp.add_constraint(expr, rel, rhs);
    }
    let obj: Vec<(VarId, f64)> = (0..n).map(|j| (VarId(j), rng.gen_range(-2.0..2.0))).collect();
    let sense = if rng.gen_bool(0.5) { Sense::Maximize } else { Sense::Minimize };
    lp.set_objective(sense, LinExpr::from_terms(&obj, rng.gen_range(-1.0..1.0)));
    lp
}

/// Path of a file in the core crate's fixture directory.
pub fn fixture(name: &str) -> std::path::PathBuf {
    let here = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let local = here.join("tests/fixtures");
    let dir = if local.is_dir() { local } else { here.join("../core/tests/fixtures") };
    dir.join(name)
}

/// Fully-connected ReLU network with layer widths `dims` (input first,
/// labels last) and Gaussian-like weights of the given scale.
pub fn random_mlp(rng: &mut impl Rng, dims: &[usize], scale: f64) -> pwlcert::network::Network {
    use pwlcert::network::{Layer, Network};
    let mut layers = Vec::new();
    for k in 0..dims.len() - 1 {
        let (n_in, n_out) = (dims[k], dims[k + 1]);
        let mut weights = Vec::with_capacity(n_out);
        for _ in 0..n_out {
            let mut row = Vec::with_capacity(n_in);
            for _ in 0..n_in {
                row.push(scale * (rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0)));
            }
            weights.push(row);
        }
        let mut bias = Vec::with_capacity(n_out);
        for _ in 0..n_out {
            bias.push(scale * rng.gen_range(-0.5..0.5));
        }
        layers.push(Layer::FullyConnected { weights, bias });
        if k + 2 < dims.len() {
            layers.push(Layer::Relu);
        }
    }
    Network::new(vec![dims[0]], layers).unwrap()
}

pub fn random_point(rng: &mut impl Rng, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    lower.iter().zip(upper).map(|(&l, &u)| if l < u { rng.gen_range(l..=u) } else { l }).collect()
}

/// Solves 200 random LPs (a quarter drawn without a feasibility guarantee)
/// and compares each with vertex enumeration. Returns the number of
/// infeasible instances.
pub fn random_lp_suite(seed: u64) -> Result<usize, String> {
    use pwlcert::lp::{solve_lp, LpLimits, LpStatus};
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut infeasible = 0;
    for case in 0..200 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=8);
        let lp = random_lp(&mut rng, n, m, case % 4 != 0);
        let out = solve_lp(&lp, LpLimits::default()).map_err(|e| format!("case {case}: {e}"))?;
        match lp_oracle::vertex_optimum(&lp, 1e-9) {
            None => {
                infeasible += 1;
                if out.status != LpStatus::Infeasible {
                    return Err(format!("case {case}: expected infeasible, got {:?}", out.status));
                }
            }
            Some(v) => {
                if out.status != LpStatus::Optimal {
                    return Err(format!("case {case}: expected optimal, got {:?}", out.status));
                }
                if (out.objective - v).abs() > 1e-6 {
                    return Err(format!("case {case}: objective {} vs oracle {v}", out.objective));
                }
                if lp.max_violation(&out.values) > 1e-7 {
                    return Err(format!("case {case}: solution violates constraints"));
                }
                let wrong_side = match lp.sense() {
                    Sense::Maximize => out.bound < out.objective - 1e-9,
                    Sense::Minimize => out.bound > out.objective + 1e-9,
                };
                if wrong_side {
                    return Err(format!("case {case}: bound {} on the wrong side of {}", out.bound, out.objective));
                }
            }
        }
    }
    Ok(infeasible)
}
