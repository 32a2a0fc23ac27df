mod common;

use common::encoding_oracle::{max_case, random_max_intervals, relu_case};
use common::phase_oracle::best_margin;
use common::{fixture, random_mlp, random_point};
use pwlcert::bounds::{build_bounded_graph, BoundsConfig, InputDomain, Interval};
use pwlcert::encoder::{eliminate_labels, encode_min_distortion, encode_robustness, DistortionQuery, Norm, Targets};
use pwlcert::milp::{solve_milp, MilpLimits, MilpStatus};
use pwlcert::network::{Network, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn relu_encoding_grid_feasibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    relu_case(-1.0, 2.0).unwrap();
    for _ in 1..100 {
        relu_case(-rng.gen_range(0.05..5.0), rng.gen_range(0.05..5.0)).unwrap();
    }
}

#[test]
fn max_encoding_grid_feasibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    max_case(&[Interval::new(0.0, 1.0); 2], &mut rng).unwrap();
    let mut cases = 1;
    while cases < 50 {
        if let Some(ivs) = random_max_intervals(&mut rng) {
            max_case(&ivs, &mut rng).unwrap();
            cases += 1;
        }
    }
}

#[test]
fn label_elimination_matches_pairwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let n = rng.gen_range(2..8);
        let ivs: Vec<Interval> = (0..n)
            .map(|_| {
                let lo = rng.gen_range(-3.0..3.0);
                Interval::new(lo, lo + rng.gen_range(0.0..2.0))
            })
            .collect();
        let label = rng.gen_range(0..n);
        let oracle: Vec<usize> =
            (0..n).filter(|&mu| mu == label || !(0..n).any(|nu| nu != mu && ivs[mu].upper < ivs[nu].lower)).collect();
        assert_eq!(eliminate_labels(&ivs, label), oracle);
    }
}

fn small_case(rng: &mut ChaCha8Rng) -> (Network, Sample, f64) {
    let m = rng.gen_range(2..=4);
    let labels = rng.gen_range(2..=3);
    let dims: Vec<usize> = if rng.gen_bool(0.5) { vec![m, rng.gen_range(3..=6), rng.gen_range(3..=6), labels] } else { vec![m, rng.gen_range(4..=10), labels] };
    let net = random_mlp(rng, &dims, 0.8);
    let input: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
    let label = net.predict(&input).unwrap();
    (net, Sample { input, label }, rng.gen_range(0.02..0.4))
}

#[test]
fn robustness_optimum_matches_phase_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let config = BoundsConfig::default();
    for case in 0..30 {
        let (net, sample, eps) = small_case(&mut rng);
        let lowered = net.lower();
        let ball = InputDomain::linf_ball(&sample.input, eps);
        let graph = build_bounded_graph(&lowered, &ball, &config).unwrap();
        let enc = encode_robustness(&lowered, &graph, &sample, eps, &config).unwrap();
        let s = enc.stats;
        assert_eq!(s.stably_active + s.stably_inactive + s.unstable, lowered.relu_count());
        assert_eq!(s.binaries, s.unstable + s.max_selectors + s.target_selectors);
        let retained: Vec<usize> = enc.targets.clone();
        if enc.trivially_robust {
            let all: Vec<usize> = (0..net.num_labels()).filter(|&l| l != sample.label).collect();
            let best = best_margin(&net, &ball.lower, &ball.upper, sample.label, &all).unwrap();
            assert!(best < 0.0, "case {case}: eliminated every label but margin reaches {best}");
            continue;
        }
        let out = solve_milp(&enc.model, MilpLimits::default()).unwrap();
        assert_eq!(out.status, MilpStatus::Optimal);
        let got = out.objective.unwrap();
        let want = best_margin(&net, &ball.lower, &ball.upper, sample.label, &retained).unwrap();
        assert!((got - want).abs() <= 1e-6, "case {case}: milp {got} vs enumeration {want}");
        // the incumbent decodes to an input whose forward pass matches the model
        let vals = out.incumbent.unwrap();
        let x = enc.decode_input(&vals);
        let fwd = net.forward(&x).unwrap();
        for (a, b) in fwd.iter().zip(enc.decode_logits(&vals)) {
            assert!((a - b).abs() <= 1e-5);
        }
    }
}

#[test]
fn robustness_optimum_grows_with_epsilon() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = random_mlp(&mut rng, &[3, 6, 6, 3], 0.8);
    let lowered = net.lower();
    let input = vec![0.4, 0.6, 0.5];
    let sample = Sample { label: net.predict(&input).unwrap(), input };
    let unit = build_bounded_graph(&lowered, &InputDomain::unit(3), &BoundsConfig::default()).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for eps in [0.0, 0.05, 0.1, 0.2, 0.4, 0.8] {
        let enc = encode_robustness(&lowered, &unit, &sample, eps, &BoundsConfig::default()).unwrap();
        let t = if enc.trivially_robust { f64::NEG_INFINITY } else { solve_milp(&enc.model, MilpLimits::default()).unwrap().objective.unwrap() };
        assert!(t >= prev - 1e-7, "eps {eps}: {t} < {prev}");
        prev = t;
    }
}

#[test]
fn completions_are_feasible_and_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let conv = Network::load(fixture("conv_small.json")).unwrap();
    let mut nets = vec![conv];
    for _ in 0..3 {
        nets.push(small_case(&mut rng).0);
    }
    for net in nets {
        let lowered = net.lower();
        let m = net.input_len();
        let input: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
        let sample = Sample { label: net.predict(&input).unwrap(), input };
        let eps = 0.05;
        let ball = InputDomain::linf_ball(&sample.input, eps);
        let graph = build_bounded_graph(&lowered, &ball, &BoundsConfig::default()).unwrap();
        let enc = encode_robustness(&lowered, &graph, &sample, eps, &BoundsConfig::default()).unwrap();
        if enc.trivially_robust {
            continue;
        }
        let mut best_seen = f64::NEG_INFINITY;
        for _ in 0..200 {
            let x = random_point(&mut rng, &ball.lower, &ball.upper);
            let vals = enc.complete(&x);
            assert!(enc.model.is_feasible(&vals));
            let logits = net.forward(&x).unwrap();
            let margin = enc.targets.iter().map(|&t| logits[t] - logits[sample.label]).fold(f64::NEG_INFINITY, f64::max);
            let obj = enc.model.base.objective().eval(&vals);
            assert!((obj - margin).abs() <= 1e-9);
            best_seen = best_seen.max(margin);
        }
        let out = solve_milp(&enc.model, MilpLimits::default()).unwrap();
        assert!(out.best_bound >= best_seen - 1e-9);
    }
}

#[test]
fn stable_network_needs_no_binaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let net = random_mlp(&mut rng, &[3, 5, 2], 0.8);
    let lowered = net.lower();
    let input = vec![0.3, 0.3, 0.3];
    let sample = Sample { label: net.predict(&input).unwrap(), input };
    let graph = build_bounded_graph(&lowered, &InputDomain::linf_ball(&sample.input, 0.0), &BoundsConfig::default()).unwrap();
    let enc = encode_robustness(&lowered, &graph, &sample, 0.0, &BoundsConfig::default()).unwrap();
    assert_eq!(enc.stats.unstable, 0);
    assert!(enc.trivially_robust || enc.stats.binaries == 0);
}

#[test]
fn distortion_queries_reject_bad_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let net = random_mlp(&mut rng, &[2, 4, 3], 0.8);
    let lowered = net.lower();
    let sample = Sample { input: vec![0.5, 0.5], label: 1 };
    let graph = build_bounded_graph(&lowered, &InputDomain::unit(2), &BoundsConfig::default()).unwrap();
    for targets in [vec![1], vec![7], vec![]] {
        let q = DistortionQuery { targets: Targets::Labels(targets), ..Default::default() };
        assert!(encode_min_distortion(&lowered, &graph, &sample, &q, &BoundsConfig::default()).is_err());
    }
}

#[test]
fn one_dimensional_distortion_threshold() {
    use pwlcert::network::Layer;
    // f(x) = [x, 1 - x]; from x = 0.9 the label flips at 0.5
    let net = Network::new(vec![1], vec![Layer::FullyConnected { weights: vec![vec![1.0], vec![-1.0]], bias: vec![0.0, 1.0] }]).unwrap();
    let lowered = net.lower();
    let sample = Sample { input: vec![0.9], label: 0 };
    let graph = build_bounded_graph(&lowered, &InputDomain::unit(1), &BoundsConfig::default()).unwrap();
    for norm in [Norm::Linf, Norm::L1] {
        let q = DistortionQuery { norm, ..Default::default() };
        let enc = encode_min_distortion(&lowered, &graph, &sample, &q, &BoundsConfig::default()).unwrap();
        let out = solve_milp(&enc.model, MilpLimits::default()).unwrap();
        assert!((out.objective.unwrap() - 0.4).abs() < 1e-9);
    }
}
