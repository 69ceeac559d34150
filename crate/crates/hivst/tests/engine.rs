mod common;

use hivst::engine::*;
use hivst::model::{detection_rates, mat_vec, ModelMatrices, SelfTestPolicy, StateVector};
use nalgebra::Matrix4;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_matrices(seed: u64) -> ModelMatrices {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = common::random_params(&mut rng);
    ModelMatrices::new(&p.trans, &p.prog, &p.mort, &p.det)
}

fn expm_oracle(m: &ModelMatrices, x0: &StateVector, t: f64) -> [f64; 4] {
    let g = m.generator();
    let a = Matrix4::from_fn(|i, j| g[i][j] * t);
    let y = a.exp() * nalgebra::Vector4::from(x0.as_array());
    [y[0], y[1], y[2], y[3]]
}

#[test]
fn step_count_rejects_bad_inputs() {
    assert_eq!(step_count(120.0, 0.25).unwrap(), 480);
    assert!(step_count(10.0, 0.3).is_err());
    assert!(step_count(10.0, 0.0).is_err());
    assert!(step_count(-1.0, 0.5).is_err());
    assert!(step_count(f64::NAN, 0.5).is_err());
}

#[test]
fn zero_generator_keeps_state_constant() {
    let m = ModelMatrices { f: [[0.0; 4]; 4], v: [[0.0; 4]; 4] };
    let x0 = StateVector::new(0.1, 0.2, 0.3, 0.4);
    let t = integrate_linear(&m, &x0, 10.0, 0.5).unwrap();
    assert_eq!(t.states.len(), 21);
    assert!(t.states.iter().all(|x| *x == x0));
    assert_eq!(t.total_incidence(), 0.0);
    assert_eq!(*t.cumulative_deaths.last().unwrap(), 0.0);
    assert!((t.undiagnosed_time.last().unwrap() - 6.0).abs() < 1e-12);
}

#[test]
fn scalar_decay_is_accurate() {
    let y = |h: f64, n: usize| {
        let mut y = [1.0];
        for _ in 0..n {
            y = rk4_step(&|y: &[f64; 1]| [-0.1 * y[0]], &y, h);
        }
        y[0]
    };
    let exact = (-0.1f64 * 10.0).exp();
    assert!((y(0.25, 40) - exact).abs() <= 1e-8);
    // Fourth order: halving the step divides the error by about 16.
    let ratio = (y(1.0, 10) - exact).abs() / (y(0.5, 20) - exact).abs();
    assert!((12.0..=20.0).contains(&ratio), "{ratio}");
}

#[test]
fn trajectory_matches_matrix_exponential() {
    for seed in 0..20 {
        let m = random_matrices(seed);
        let x0 = StateVector::new(0.01, 0.1, 0.02, 0.87);
        let t = integrate_linear(&m, &x0, 120.0, 0.25).unwrap();
        let exact = expm_oracle(&m, &x0, 120.0);
        let got = t.last().as_array();
        for i in 0..4 {
            assert!((got[i] - exact[i]).abs() <= 1e-8 * exact[i].abs().max(1.0), "{seed}: {got:?} vs {exact:?}");
        }
    }
}

#[test]
fn fast_path_agrees_with_full_trajectory() {
    let m = random_matrices(5);
    let x0 = StateVector::new(0.01, 0.1, 0.02, 0.87);
    let t = integrate_linear(&m, &x0, 60.0, 0.25).unwrap();
    let (x, inc) = cumulative_incidence(&m, &x0, 60.0, 0.25).unwrap();
    assert_eq!(&x, t.last());
    assert_eq!(inc, t.total_incidence());
}

#[test]
fn bookkeeping_balances() {
    // Incidence minus deaths is the change in the infected population,
    // and diagnoses feed the diagnosed compartment.
    for seed in 0..10 {
        let m = random_matrices(seed);
        let x0 = StateVector::new(0.01, 0.1, 0.02, 0.87);
        let t = integrate_linear(&m, &x0, 36.0, 0.25).unwrap();
        let x = t.last();
        let balance = t.total_incidence() - t.cumulative_deaths.last().unwrap() - (x.total() - x0.total());
        assert!(balance.abs() < 1e-12, "{balance}");
        let mu_d = m.mortality()[3];
        // d' = diag - mu_d d, integrated with the same scheme; check loosely.
        let d_int: f64 = t.states.windows(2).map(|w| 0.125 * (w[0].d + w[1].d)).sum();
        let d_change = t.cumulative_diagnoses.last().unwrap() - mu_d * d_int;
        assert!((d_change - (x.d - x0.d)).abs() < 1e-5, "{seed}");
    }
}

#[test]
fn halving_the_step_changes_little() {
    let (cfg, cohort) = common::reference_cohort();
    let policy = SelfTestPolicy::new(0.5, 0.5, cfg.tests).unwrap();
    for c in cohort.iter().take(5) {
        let m = c.matrices(&policy).unwrap();
        let (_, a) = cumulative_incidence(&m, &c.initial, 120.0, 0.25).unwrap();
        let (_, b) = cumulative_incidence(&m, &c.initial, 120.0, 0.125).unwrap();
        assert!(((a - b) / b).abs() < 1e-6);
    }
}

#[test]
fn derivative_is_the_generator_applied() {
    let m = random_matrices(9);
    let x = StateVector::new(0.3, 0.2, 0.1, 0.4);
    let dx = hivst::model::derivative(&x, &m);
    assert_eq!(dx.as_array(), mat_vec(&m.generator(), &x.as_array()));
}

#[test]
fn empty_susceptible_pool_stays_at_demographic_equilibrium() {
    let (_, cohort) = common::reference_cohort();
    let shell = nonlinear_shell(&cohort[0], &ShellConfig::default()).unwrap();
    let p = NonlinearParams {
        infected0: StateVector::new(0.0, 0.0, 0.0, 0.0),
        ..shell
    };
    let det = hivst::model::DetectionRates { a: 0.01, u: 0.01, s: 0.05 };
    let t = integrate_nonlinear(&p, &det, 60.0, 0.25).unwrap();
    for (e, f) in t.eligible.iter().zip(&t.susceptible_fraction) {
        assert!((e / p.eligible0 - 1.0).abs() < 1e-12);
        assert_eq!(*f, 1.0);
    }
    assert_eq!(*t.cumulative_incidence.last().unwrap(), 0.0);
}

#[test]
fn pure_demography_respects_the_drift_bound() {
    // Without transmission the susceptible fraction still rises as infected
    // people die; the drift must stay under the certificate.
    let (cfg, cohort) = common::reference_cohort();
    let c = &cohort[2];
    let mut p = nonlinear_shell(c, &ShellConfig::default()).unwrap();
    p.lambda_tilde = p.lambda_tilde.scaled(0.0);
    let det = detection_rates(&c.testing, &SelfTestPolicy::baseline(cfg.tests)).unwrap();
    let t = integrate_nonlinear(&p, &det, 120.0, 0.25).unwrap();
    let cert = linearization_certificate(&p, &t);
    assert!(cert.max_drift() > 0.0);
    assert!(cert.passes(), "{:?}", cert.violations());
    // The cruder bound dominates the path bound everywhere.
    assert!(cert.bound_a7.iter().zip(&cert.bound_a8).all(|(a, b)| a <= &(b + 1e-15)));
}

#[test]
fn shell_linearizes_to_the_calibrated_model() {
    let (cfg, cohort) = common::reference_cohort();
    let policy = SelfTestPolicy::baseline(cfg.tests);
    for c in cohort.iter().step_by(7) {
        let p = nonlinear_shell(c, &cfg.shell).unwrap();
        assert!((p.sigma0() - 0.99).abs() < 1e-12);
        let det = detection_rates(&c.testing, &policy).unwrap();
        let nl = integrate_nonlinear(&p, &det, 120.0, 0.25).unwrap();
        let m = c.matrices(&policy).unwrap();
        let lin = integrate_linear(&m, &c.initial, 120.0, 0.25).unwrap();
        // Identical first step up to Sigma drift.
        let d1 = (nl.cumulative_incidence[1] - lin.cumulative_incidence[1]) / lin.cumulative_incidence[1];
        assert!(d1.abs() < 1e-5, "{}: {d1}", c.name);
        let rel = (nl.cumulative_incidence.last().unwrap() / lin.total_incidence() - 1.0).abs();
        assert!(rel < 0.02, "{}: {rel}", c.name);
        let cert = linearization_certificate(&p, &nl);
        assert!(cert.passes(), "{}", c.name);
    }
}

#[test]
fn invalid_nonlinear_inputs_are_rejected() {
    let (_, cohort) = common::reference_cohort();
    let p = nonlinear_shell(&cohort[0], &ShellConfig::default()).unwrap();
    let det = hivst::model::DetectionRates { a: 0.0, u: 0.0, s: 0.0 };
    let bad = NonlinearParams { mu_e: 1.0, ..p };
    assert!(integrate_nonlinear(&bad, &det, 12.0, 0.25).is_err());
    let bad = NonlinearParams { recruitment: -1.0, ..p };
    assert!(integrate_nonlinear(&bad, &det, 12.0, 0.25).is_err());
    assert!(ShellConfig { initial_susceptible_fraction: 1.0, ..Default::default() }.validate().is_err());
}

proptest! {
    #[test]
    fn solution_is_linear_in_initial_state(seed in any::<u64>(), c in 1e-3..1e3f64,
                                           x in prop::array::uniform4(0.0..1.0f64),
                                           y in prop::array::uniform4(0.0..1.0f64)) {
        let m = random_matrices(seed);
        let (xs, ys) = (StateVector::from_array(x), StateVector::from_array(y));
        let sum = StateVector::from_array(std::array::from_fn(|i| c * x[i] + y[i]));
        let (a, ia) = cumulative_incidence(&m, &xs, 24.0, 0.25).unwrap();
        let (b, ib) = cumulative_incidence(&m, &ys, 24.0, 0.25).unwrap();
        let (s, is) = cumulative_incidence(&m, &sum, 24.0, 0.25).unwrap();
        let (a, b, s) = (a.as_array(), b.as_array(), s.as_array());
        for i in 0..4 {
            prop_assert!((s[i] - (c * a[i] + b[i])).abs() <= 1e-12 * (c * a[i] + b[i]).abs().max(1.0));
        }
        prop_assert!((is - (c * ia + ib)).abs() <= 1e-12 * (c * ia + ib).abs().max(1.0));
    }

    #[test]
    fn compartments_stay_nonnegative(seed in any::<u64>(), x in prop::array::uniform4(0.0..1.0f64)) {
        let m = random_matrices(seed);
        let t = integrate_linear(&m, &StateVector::from_array(x), 120.0, 0.25).unwrap();
        for s in &t.states {
            prop_assert!(s.as_array().iter().all(|v| *v >= -1e-15), "{:?}", s);
        }
        prop_assert!(t.cumulative_incidence.windows(2).all(|w| w[1] >= w[0]));
    }
}
