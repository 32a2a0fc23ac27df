mod common;

use common::lp_oracle::milp_bruteforce;
use pwlcert::lp::{LinExpr, LpProblem, Relation, Sense, VarId};
use pwlcert::milp::{solve_milp, solve_milp_with, MilpLimits, MilpModel, MilpOptions, MilpStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_milp(rng: &mut ChaCha8Rng, cont: usize, bins: usize, m: usize) -> MilpModel {
    let mut lp = LpProblem::new();
    let mut point = Vec::new();
    for _ in 0..cont {
        let lo = rng.gen_range(-2.0..0.0);
        lp.add_var(lo, lo + rng.gen_range(1.0..3.0));
        point.push(lo + 0.5);
    }
    let binaries: Vec<VarId> = (0..bins).map(|_| lp.add_var(0.0, 1.0)).collect();
    for _ in 0..bins {
        point.push(if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
    }
    for i in 0..m {
        let mut terms = Vec::new();
        for j in 0..cont + bins {
            if rng.gen_bool(0.6) {
                terms.push((VarId(j), rng.gen_range(-3.0..3.0)));
            }
        }
        let e = LinExpr::from_terms(&terms, 0.0);
        let at = e.eval(&point);
        if i % 2 == 0 {
            lp.add_constraint(e, Relation::Le, at + rng.gen_range(0.0..1.5));
        } else {
            lp.add_constraint(e, Relation::Ge, at - rng.gen_range(0.0..1.5));
        }
    }
    let obj: Vec<_> = (0..cont + bins).map(|j| (VarId(j), rng.gen_range(-2.0..2.0))).collect();
    let sense = if rng.gen_bool(0.5) { Sense::Maximize } else { Sense::Minimize };
    lp.set_objective(sense, LinExpr::from_terms(&obj, 0.0));
    MilpModel::new(lp, binaries).unwrap()
}

#[test]
fn single_relu_toy_matches_phase_enumeration() {
    // y <= 2a, y <= x + 1 - a... x in [-1, 2]; max y
    let mut lp = LpProblem::new();
    let x = lp.add_var(-1.0, 2.0);
    let y = lp.add_var(0.0, f64::INFINITY);
    let a = lp.add_var(0.0, 1.0);
    lp.add_constraint(LinExpr::from_terms(&[(y, 1.0), (a, -2.0)], 0.0), Relation::Le, 0.0);
    lp.add_constraint(LinExpr::from_terms(&[(y, 1.0), (x, 1.0), (a, 1.0)], 0.0), Relation::Le, 2.5);
    lp.set_objective(Sense::Maximize, LinExpr::var(y));
    let model = MilpModel::new(lp.clone(), vec![a]).unwrap();
    let out = solve_milp(&model, MilpLimits::default()).unwrap();
    // a = 0: y <= 0; a = 1: y <= 2 and y <= 1.5 - x -> y = 2 at x = -1... capped by 2
    let oracle = [0.0, 1.0]
        .iter()
        .map(|&av| {
            let mut sub = lp.clone();
            sub.set_bounds(a, av, av);
            sub.set_bounds(y, 0.0, 10.0);
            pwlcert::lp::solve_lp(&sub, Default::default()).unwrap().objective
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.status, MilpStatus::Optimal);
    assert!((out.objective.unwrap() - oracle).abs() < 1e-6);
    assert!((oracle - 2.0).abs() < 1e-9);
}

#[test]
fn random_models_match_exhaustive_assignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..40 {
        let bins = rng.gen_range(1..=12);
        let cont = rng.gen_range(1..=3);
        let rows = rng.gen_range(2..=6);
        let model = random_milp(&mut rng, cont, bins, rows);
        let oracle = milp_bruteforce(&model.base, &model.binaries);
        let out = solve_milp_with(&model, &MilpOptions { log_nodes: true, ..Default::default() }).unwrap();
        match oracle {
            None => assert_eq!(out.status, MilpStatus::Infeasible, "case {case}"),
            Some(v) => {
                assert_eq!(out.status, MilpStatus::Optimal, "case {case}");
                let obj = out.objective.unwrap();
                assert!((obj - v).abs() <= 1e-6, "case {case}: {obj} vs {v}");
                assert!((out.best_bound - obj).abs() <= 1e-6);
                assert!(model.is_feasible(out.incumbent.as_ref().unwrap()));
            }
        }
        // the global bound never moves away from the optimum
        let maximize = model.base.sense() == Sense::Maximize;
        for w in out.log.windows(2) {
            if maximize {
                assert!(w[1].global_bound <= w[0].global_bound + 1e-9);
            } else {
                assert!(w[1].global_bound >= w[0].global_bound - 1e-9);
            }
        }
    }
}

#[test]
fn node_limit_keeps_a_valid_bound_and_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let model = random_milp(&mut rng, 2, 12, 6);
        let Some(opt) = milp_bruteforce(&model.base, &model.binaries) else { continue };
        let limits = MilpLimits { node_limit: Some(3), ..Default::default() };
        let a = solve_milp(&model, limits.clone()).unwrap();
        let b = solve_milp(&model, limits).unwrap();
        assert_eq!(a.nodes_explored, b.nodes_explored);
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.best_bound, b.best_bound);
        assert!(a.nodes_explored <= 3);
        match model.base.sense() {
            Sense::Maximize => assert!(a.best_bound >= opt - 1e-6),
            Sense::Minimize => assert!(a.best_bound <= opt + 1e-6),
        }
    }
}
