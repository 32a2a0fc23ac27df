//! Grid checks of the ReLU and max encodings: a point of the encoded
//! relaxation must be feasible exactly when it lies on the graph of the
//! function with a consistent indicator.

use pwlcert::bounds::{max_survivors, InputDomain, Interval, ReluStatus};
use pwlcert::encoder::ModelBuilder;
use pwlcert::lp::{LinExpr, VarId};
use rand::Rng;

const FEAS: f64 = 1e-9;

pub fn relu_case(l: f64, u: f64) -> Result<(), String> {
    let mut b = ModelBuilder::new(&InputDomain { lower: vec![l], upper: vec![u] }, false);
    let y = b.encode_relu(&LinExpr::var(VarId(0)), Interval::new(l, u), ReluStatus::Unstable).map_err(|e| e.to_string())?;
    if y != LinExpr::var(VarId(1)) || b.binaries() != [VarId(2)] {
        return Err(format!("unexpected variable layout for l={l} u={u}"));
    }
    let lp = b.problem();
    let feasible = |x: f64, y: f64, a: f64| {
        let bnd = |i| lp.bounds(VarId(i));
        let vals = [x, y, a];
        lp.max_violation(&vals) <= FEAS && (0..3).all(|i| bnd(i).lower - FEAS <= vals[i] && vals[i] <= bnd(i).upper + FEAS)
    };
    for g in 0..21 {
        let x = (l + (u - l) * g as f64 / 20.0).min(u);
        for a in [0.0, 1.0] {
            for y in [0.0, x, x.max(0.0) + 0.01, x.max(0.0) - 0.01, u, x.abs()] {
                let expected = if a == 1.0 { x >= 0.0 && (y - x).abs() <= FEAS } else { x <= 0.0 && y.abs() <= FEAS };
                if feasible(x, y, a) != expected {
                    return Err(format!("l={l} u={u} x={x} y={y} a={a}: expected feasible={expected}"));
                }
            }
        }
    }
    Ok(())
}

/// Random instance with at least two survivors, or `None` to redraw.
pub fn random_max_intervals(rng: &mut impl Rng) -> Option<Vec<Interval>> {
    let n = rng.gen_range(2..=4);
    let ivs: Vec<Interval> = (0..n)
        .map(|_| {
            let lo = rng.gen_range(-2.0..1.0);
            Interval::new(lo, lo + rng.gen_range(0.1..2.0))
        })
        .collect();
    let keep = max_survivors(&ivs);
    (keep.len() >= 2).then(|| keep.iter().map(|&i| ivs[i]).collect())
}

pub fn max_case(ivs: &[Interval], rng: &mut impl Rng) -> Result<(), String> {
    let n = ivs.len();
    let domain = InputDomain { lower: ivs.iter().map(|i| i.lower).collect(), upper: ivs.iter().map(|i| i.upper).collect() };
    let mut b = ModelBuilder::new(&domain, false);
    let xs = b.input_exprs();
    let y = b.encode_max(&xs, ivs).map_err(|e| e.to_string())?;
    if y != LinExpr::var(VarId(n)) || b.binaries().len() != n {
        return Err(format!("unexpected variable layout for {ivs:?}"));
    }
    let lp = b.problem();
    for _ in 0..40 {
        let x: Vec<f64> = ivs.iter().map(|iv| rng.gen_range(iv.lower..=iv.upper)).collect();
        let top = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for sel in 0..n {
            for yv in [top, top + 0.01, top - 0.01, x[sel]] {
                let mut vals = x.clone();
                vals.push(yv);
                vals.extend((0..n).map(|i| f64::from(u8::from(i == sel))));
                let ok = lp.max_violation(&vals) <= FEAS;
                if ok != (yv == top && x[sel] == top) {
                    return Err(format!("ivs={ivs:?} x={x:?} sel={sel} y={yv}: feasible={ok}"));
                }
            }
        }
    }
    Ok(())
}
