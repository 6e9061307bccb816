use std::f64::consts::FRAC_PI_2;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tlmap::harness::synth::{pendulum, random_stable_min_phase};
use tlmap::harness::{demo_config, run_lti_experiment};
use tlmap::mapprops::{derive_map_properties, InputRecipe, SignalDomain, SystemFacts};
use tlmap::polytf::{optimal_map, perfect_map_exists, realize, Domain, Polynomial, RationalTF};
use tlmap::reldeg::{lie_relative_degree, noise_free_threshold, reldeg_from_step_dt};
use tlmap::simkit::{cumulative_integral, differentiate, simulate_affine, simulate_lti, simulate_tf, ControlAffineSystem, Signal};
use tlmap::sysid::{fit_arx_structure, ArxModel};

const DT: Domain = Domain::Discrete { sample_period: 0.1 };

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tf(r: &mut ChaCha8Rng, max_order: usize, domain: Domain) -> RationalTF {
    let n = r.gen_range(1..=max_order);
    let rd = r.gen_range(0..=n);
    random_stable_min_phase(r, n, rd, domain).unwrap()
}

fn domain_for(r: &mut ChaCha8Rng) -> Domain {
    if r.gen_bool(0.5) { Domain::Continuous } else { DT }
}

fn white(r: &mut ChaCha8Rng, n: usize, h: f64) -> Signal {
    Signal::new((0..n).map(|_| r.gen_range(-1.0..1.0)).collect(), h).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn realization_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = domain_for(&mut r);
        let g = random_tf(&mut r, 6, d);
        let back = realize(&g).unwrap().transfer_function().unwrap();
        prop_assert!(back.coefficient_distance(&g) < 1e-9, "{} vs {}", back, g);
    }

    #[test]
    fn optimal_map_composes_exactly(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = domain_for(&mut r);
        let (g_s, g_t) = (random_tf(&mut r, 5, d), random_tf(&mut r, 5, d));
        let composed = optimal_map(&g_s, &g_t).unwrap().multiply(&g_s).unwrap();
        prop_assert!(composed.coefficient_distance(&g_t) < 1e-10, "{} vs {}", composed, g_t);
    }

    #[test]
    fn causality_iff_perfect_map(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = domain_for(&mut r);
        let (g_s, g_t) = (random_tf(&mut r, 5, d), random_tf(&mut r, 5, d));
        prop_assert_eq!(
            optimal_map(&g_s, &g_t).unwrap().is_causal(),
            perfect_map_exists(&g_s, &g_t).unwrap()
        );
    }

    #[test]
    fn relative_degree_adds_under_multiply(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = domain_for(&mut r);
        let (a, b) = (random_tf(&mut r, 4, d), random_tf(&mut r, 4, d));
        let ab = a.multiply(&b).unwrap();
        // independent random roots share nothing, so no cancellation
        prop_assert_eq!(ab.order(), a.order() + b.order());
        prop_assert_eq!(ab.relative_degree(), a.relative_degree() + b.relative_degree());
    }

    #[test]
    fn stability_ignores_common_scaling(seed in any::<u64>(), c in prop_oneof![-1e3..-1e-3f64, 1e-3..1e3f64]) {
        let mut r = rng(seed);
        let d = domain_for(&mut r);
        let n = r.gen_range(1..=5);
        // roots anywhere, so both verdicts occur
        let den = Polynomial::new((0..=n).map(|i| if i == 0 { 1.0 } else { r.gen_range(-2.0..2.0) }).collect());
        let num = Polynomial::new(vec![r.gen_range(0.5..2.0)]);
        let g = RationalTF::new(num.clone(), den.clone(), d).unwrap();
        let scaled = RationalTF::new(num.scale(c), den.scale(c), d).unwrap();
        prop_assert_eq!(g.is_bibo_stable(), scaled.is_bibo_stable());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn lti_simulation_is_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let mut r = rng(seed);
        let d = domain_for(&mut r);
        let g = random_tf(&mut r, 5, d);
        let ss = realize(&g).unwrap();
        let (u, v) = (white(&mut r, 200, 0.1), white(&mut r, 200, 0.1));
        let x0 = DVector::zeros(ss.order());
        let lhs = simulate_lti(&ss, &u.scale(a).add(&v.scale(b)).unwrap(), &x0).unwrap();
        let rhs = simulate_lti(&ss, &u, &x0).unwrap().scale(a).add(&simulate_lti(&ss, &v, &x0).unwrap().scale(b)).unwrap();
        let scale = 1.0 + lhs.max_abs();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-9 * scale);
    }

    #[test]
    fn discrete_simulation_is_time_invariant(seed in any::<u64>(), k in 0usize..20) {
        let mut r = rng(seed);
        let g = random_tf(&mut r, 5, DT);
        let u = white(&mut r, 100, 0.1);
        let mut delayed = vec![0.0; k];
        delayed.extend_from_slice(&u.values()[..100 - k]);
        let y = simulate_tf(&g, &u).unwrap();
        let yd = simulate_tf(&g, &Signal::new(delayed, 0.1).unwrap()).unwrap();
        prop_assert!(yd.values()[..k].iter().all(|v| *v == 0.0));
        prop_assert_eq!(&yd.values()[k..], &y.values()[..100 - k]);
    }

    #[test]
    fn derivative_undoes_running_integral(w in 0.5..5.0f64, phase in 0.0..6.0f64) {
        // the central difference of a running sum is the two-sample mean,
        // off by h·x'/2, so h is kept small against the signal's time scale
        let h = 1e-7;
        let x = Signal::from_fn(5000, h, |t| (w * t + phase).sin()).unwrap();
        let back = differentiate(&cumulative_integral(&x), 1).unwrap();
        for k in 1..x.len() - 1 {
            prop_assert!((back.values()[k] - x.values()[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn discrete_step_delay_matches_relative_degree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_tf(&mut r, 5, DT);
        let step = tlmap::simkit::step_response(&g, 1.0, 2.0, 0.1).unwrap();
        let est = reldeg_from_step_dt(&step, 0, noise_free_threshold(1.0)).unwrap();
        prop_assert_eq!(est.value as i32, g.relative_degree());
    }

    #[test]
    fn raising_threshold_never_lowers_delay(seed in any::<u64>(), lo in 1e-9..1e-3f64, factor in 1.0..100.0f64) {
        let mut r = rng(seed);
        let g = random_tf(&mut r, 5, DT);
        let step = tlmap::simkit::step_response(&g, 1.0, 3.0, 0.1).unwrap();
        let a = reldeg_from_step_dt(&step, 0, lo);
        let b = reldeg_from_step_dt(&step, 0, lo * factor);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!(b.value >= a.value);
        }
    }

    #[test]
    fn lie_degree_of_linear_embedding(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=3);
        let rd = r.gen_range(1..=n);
        let g = random_stable_min_phase(&mut r, n, rd, Domain::Continuous).unwrap();
        let sys = ControlAffineSystem::from_state_space(&realize(&g).unwrap()).unwrap();
        let x = DVector::from_fn(n, |_, _| r.gen_range(-1.0..1.0));
        let est = lie_relative_degree(&sys, &x, 4, 1e-4, 1e-6).unwrap();
        prop_assert_eq!(est.value as i32, g.relative_degree());
    }

    #[test]
    fn map_structure_matches_composition(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = domain_for(&mut r);
        let (a, b) = (random_tf(&mut r, 5, d), random_tf(&mut r, 5, d));
        let (g_s, g_t) = if a.relative_degree() <= b.relative_degree() { (a, b) } else { (b, a) };
        let facts = |g: &RationalTF| (g.order(), g.relative_degree() as usize);
        let props = derive_map_properties(
            &SystemFacts::source(facts(&g_s).0, facts(&g_s).1).unwrap(),
            &SystemFacts::target(facts(&g_t).0, facts(&g_t).1).unwrap(),
            d.into(),
        );
        let map = optimal_map(&g_s, &g_t).unwrap();
        prop_assert_eq!(map.relative_degree() as usize, props.map_reldeg);
        prop_assert_eq!(map.order(), props.map_order);
    }

    #[test]
    fn shifted_input_restores_causality(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rs = r.gen_range(1..=5);
        let rt = r.gen_range(0..rs);
        let (ns, nt) = (r.gen_range(rs..=5), r.gen_range(rt.max(1)..=5));
        let g_s = random_stable_min_phase(&mut r, ns, rs, DT).unwrap();
        let g_t = random_stable_min_phase(&mut r, nt, rt, DT).unwrap();
        let props = derive_map_properties(
            &SystemFacts::source(g_s.order(), rs).unwrap(),
            &SystemFacts::target(g_t.order(), rt).unwrap(),
            SignalDomain::Dt,
        );
        prop_assert_eq!(&props.input_recipe, &InputRecipe::ShiftedSource { shift: rs - rt });
        let tailored = optimal_map(&g_s, &g_t).unwrap().multiply(&RationalTF::delay(rs - rt, 0.1).unwrap()).unwrap();
        prop_assert!(tailored.is_causal());
        prop_assert_eq!(tailored.relative_degree(), 0);
    }

    #[test]
    fn arx_round_trip_preserves_outputs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_tf(&mut r, 5, DT);
        let m = ArxModel::from_rational(&g).unwrap();
        let u = white(&mut r, 150, 0.1);
        let via_arx = m.simulate(&u).unwrap();
        let via_tf = simulate_tf(&m.to_rational().unwrap(), &u).unwrap();
        let scale = 1.0 + via_tf.max_abs();
        prop_assert!(via_arx.sub(&via_tf).unwrap().max_abs() < 1e-12 * scale);
    }

    #[test]
    fn ridge_never_grows_coefficients(seed in any::<u64>(), r1 in 0.0..1e-3f64, r2 in 0.0..1e-3f64) {
        let mut r = rng(seed);
        let g = random_tf(&mut r, 3, DT);
        let truth = ArxModel::from_rational(&g).unwrap();
        let u = white(&mut r, 400, 0.1);
        let y = truth.simulate(&u).unwrap().map(|v| v + 0.0);
        let y = y.replace_noise(&mut r, 0.05);
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let norm = |ridge| {
            let m = fit_arx_structure(&u, &y, truth.order(), truth.reldeg(), ridge).unwrap().model;
            m.a().iter().chain(m.b()).map(|c| c * c).sum::<f64>().sqrt()
        };
        prop_assert!(norm(hi) <= norm(lo) * (1.0 + 1e-12));
    }
}

trait Noisy {
    fn replace_noise(&self, r: &mut ChaCha8Rng, amplitude: f64) -> Signal;
}

impl Noisy for Signal {
    fn replace_noise(&self, r: &mut ChaCha8Rng, amplitude: f64) -> Signal {
        let v = self.values().iter().map(|x| x + amplitude * r.gen_range(-1.0..1.0)).collect();
        Signal::new(v, self.sample_period()).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn arx_coefficients_are_identifiable(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_tf(&mut r, 5, DT);
        let truth = ArxModel::from_rational(&g).unwrap();
        let u = white(&mut r, 1000, 0.1);
        let y = truth.simulate(&u).unwrap();
        let fit = fit_arx_structure(&u, &y, truth.order(), truth.reldeg(), 0.0).unwrap();
        let err = fit.model.a().iter().chain(fit.model.b())
            .zip(truth.a().iter().chain(truth.b()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prop_assert!(err < 1e-7, "max coefficient error {err}");
    }
}

#[test]
fn rk4_error_shrinks_at_fourth_order() {
    let p = pendulum(0.0, [-FRAC_PI_2 + 0.3, 0.0]);
    let d = Signal::from_fn(51, 0.2, |t| 0.5 * (0.7 * t).sin()).unwrap();
    let reference = simulate_affine(&p, &d, 2000).unwrap();
    let err = |div| {
        simulate_affine(&p, &d, div).unwrap().sub(&reference).unwrap().max_abs()
    };
    let (coarse, fine) = (err(2), err(4));
    assert!(coarse / fine >= 12.0, "ratio {}", coarse / fine);
}

#[test]
fn reports_are_deterministic_and_consistent() {
    let mut cfg = demo_config(11);
    cfg.train_duration = 20.0;
    cfg.test_duration = 20.0;
    let a = run_lti_experiment(&cfg).unwrap();
    let b = run_lti_experiment(&cfg).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    for (x, pct) in [(a.rms_static, a.reduction_static_pct), (a.rms_dynamic, a.reduction_dynamic_pct)] {
        assert!((100.0 * (1.0 - x / a.rms_direct) - pct.unwrap()).abs() < 1e-9);
    }
}

#[test]
fn noise_free_transfer_generalizes() {
    for seed in 0..3 {
        let mut cfg = demo_config(seed);
        cfg.noise_std = 0.0;
        cfg.identification.refine_iterations = 0;
        let rep = run_lti_experiment(&cfg).unwrap();
        let train = rep.train.as_ref().unwrap().reduction_dynamic_pct.unwrap();
        let test = rep.reduction_dynamic_pct.unwrap();
        assert!((train - test).abs() < 5.0, "train {train} test {test}");
    }
}
