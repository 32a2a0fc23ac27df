//! Brute-force LP oracle: enumerate every basic solution of a boxed LP.

use pwlcert::lp::{LpProblem, Relation, Sense, VarId};

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for c in k..n {
                    a[i][c] -= f * a[k][c];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| a[k][c] * x[c]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Optimal objective of a problem whose variables all have finite bounds,
/// or `None` when infeasible.
pub fn vertex_optimum(lp: &LpProblem, tol: f64) -> Option<f64> {
    let n = lp.num_vars();
    // every candidate hyperplane as (row, rhs)
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in lp.constraints() {
        let mut row = vec![0.0; n];
        for &(v, a) in &c.expr.terms {
            row[v.0] += a;
        }
        planes.push((row, c.rhs - c.expr.constant));
    }
    for (j, b) in lp.var_bounds().iter().enumerate() {
        assert!(b.lower.is_finite() && b.upper.is_finite(), "oracle needs boxed variables");
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        planes.push((row.clone(), b.lower));
        planes.push((row, b.upper));
    }
    let sign = match lp.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut best: Option<f64> = None;
    combinations(planes.len(), n, &mut |pick| {
        let a: Vec<Vec<f64>> = pick.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = pick.iter().map(|&i| planes[i].1).collect();
        let Some(x) = solve_dense(a, b) else { return };
        if lp.max_violation(&x) > tol {
            return;
        }
        let v = sign * lp.objective().eval(&x);
        if best.is_none_or(|bv| v < bv) {
            best = Some(v);
        }
    });
    best.map(|v| sign * v)
}

#[allow(dead_code)]
pub fn relation_from(i: usize) -> Relation {
    match i % 5 {
        0 | 1 => Relation::Le,
        2 | 3 => Relation::Ge,
        _ => Relation::Eq,
    }
}

#[allow(dead_code)]
pub fn var(i: usize) -> VarId {
    VarId(i)
}

/// Substitutes fixed values for some variables, returning a problem over
/// the remaining ones (in their original order).
pub fn substitute(lp: &LpProblem, fixed: &[(VarId, f64)]) -> LpProblem {
    use pwlcert::lp::LinExpr;
    let n = lp.num_vars();
    let mut value = vec![None; n];
    for &(v, x) in fixed {
        value[v.0] = Some(x);
    }
    let mut map = vec![usize::MAX; n];
    let mut out = LpProblem::new();
    for (j, b) in lp.var_bounds().iter().enumerate() {
        if value[j].is_none() {
            map[j] = out.add_var(b.lower, b.upper).0;
        }
    }
    let rewrite = |e: &LinExpr| {
        let mut c = e.constant;
        let mut terms = Vec::new();
        for &(v, a) in &e.terms {
            match value[v.0] {
                Some(x) => c += a * x,
                None => terms.push((VarId(map[v.0]), a)),
            }
        }
        LinExpr::from_terms(&terms, c)
    };
    for c in lp.constraints() {
        out.add_constraint(rewrite(&c.expr), c.relation, c.rhs);
    }
    out.set_objective(lp.sense(), rewrite(lp.objective()));
    out
}

/// Exhaustive MILP oracle: best LP optimum over all binary assignments.
pub fn milp_bruteforce(lp: &LpProblem, binaries: &[VarId]) -> Option<f64> {
    let k = binaries.len();
    let maximize = lp.sense() == Sense::Maximize;
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << k) {
        let fixed: Vec<(VarId, f64)> = binaries.iter().enumerate().map(|(i, &b)| (b, ((mask >> i) & 1) as f64)).collect();
        let sub = substitute(lp, &fixed);
        let v = if sub.num_vars() == 0 {
            if sub.max_violation(&[]) <= 1e-9 {
                Some(sub.objective().constant)
            } else {
                None
            }
        } else {
            vertex_optimum(&sub, 1e-9)
        };
        if let Some(v) = v {
            best = Some(match best {
                None => v,
                Some(b) if maximize => b.max(v),
                Some(b) => b.min(v),
            });
        }
    }
    best
}
