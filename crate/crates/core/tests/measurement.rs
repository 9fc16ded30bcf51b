mod common;

use common::measured_brute_force;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riqs::measure::*;
use riqs::qops::{c, eigenvalues, from_real_diag, gibbs, hermitize, identity, kron, max_abs, CMatrix};
use riqs::rdm::RIModel;
use riqs::spectral::analyze;
use riqs::{DensityMatrix, C64};

fn random_hermitian(d: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let m = CMatrix::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    &m + m.adjoint()
}

fn random_state(d: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let r = &g * g.adjoint();
    let t = r.trace();
    DensityMatrix::new(r / t).unwrap()
}

fn random_setup(seed: u64) -> (MeasurementSetup, DensityMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_s = random_hermitian(2, &mut rng);
    let h_e = from_real_diag(&[0.0, 0.5 + rng.random::<f64>()]);
    let v = random_hermitian(4, &mut rng);
    let tau = 0.5 + rng.random::<f64>();
    let rho_e = gibbs(&h_e, 0.3 + rng.random::<f64>()).unwrap();
    let model = RIModel::new(h_s, h_e, v, tau, rho_e).unwrap();
    let obs = random_hermitian(2, &mut rng);
    let rho0 = random_state(2, &mut rng);
    (MeasurementSetup::new(model, obs).unwrap(), rho0)
}

#[test]
fn joint_law_matches_brute_force() {
    for seed in 0..6u64 {
        let (setup, rho0) = random_setup(seed);
        let inst = build_instrument(&setup).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for n in 1..=5 {
            let sets: Vec<Vec<usize>> = (0..n)
                .map(|_| match rng.random_range(0..3) {
                    0 => vec![0],
                    1 => vec![1],
                    _ => vec![0, 1],
                })
                .collect();
            let (pb, state) = measured_brute_force(&setup, &rho0, &sets);
            let pr = joint_probability(&inst, &rho0, &sets).unwrap();
            assert!((pr - pb).abs() < 1e-10, "seed {seed} n {n}: {pr} vs {pb}");
            let post = post_measurement_state(&inst, &rho0, &sets).unwrap();
            assert!(max_abs(&(post.matrix() - state)) < 1e-10);
        }
    }
}

#[test]
fn no_measurement_is_the_channel() {
    let (setup, _) = random_setup(11);
    let inst = build_instrument(&setup).unwrap();
    let all = inst.map_for(&inst.all());
    assert!(max_abs(&(all.matrix() - inst.total.matrix())) < 1e-14);
    let l = riqs::rdm::build_rdm(&setup.model).unwrap();
    assert!(max_abs(&(inst.total.matrix() - l.superop.matrix())) < 1e-12);
}

#[test]
fn instrument_elements_are_cp_subchannels() {
    for seed in 0..4 {
        let (setup, _) = random_setup(seed);
        let inst = build_instrument(&setup).unwrap();
        for m in &inst.maps {
            assert!(m.min_choi_eigenvalue() > -1e-12);
            assert!(m.spectral_radius().unwrap() <= 1.0 + 1e-10);
        }
    }
}

#[test]
fn resonant_spin_spin_outcomes_are_independent() {
    let (lam, tau) = (std::f64::consts::PI / 0.8, 0.8);
    let setup = MeasurementSetup::new(spin_spin_model(0.35, lam, tau).unwrap(), spin_angle_observable(0.6)).unwrap();
    let inst = build_instrument(&setup).unwrap();
    let rho0 = DensityMatrix::diagonal(&[0.2, 0.8]).unwrap();
    let marg: Vec<f64> = (0..2).map(|m| setup.probe_expectation(&setup.projectors[m])).collect();
    for path in [[0, 1, 1], [1, 0, 1], [0, 0, 0]] {
        let sets: Vec<Vec<usize>> = path.iter().map(|&m| vec![m]).collect();
        let pr = joint_probability(&inst, &rho0, &sets).unwrap();
        let prod: f64 = path.iter().map(|&m| marg[m]).product();
        assert!((pr - prod).abs() < 1e-12);
    }
}

#[test]
fn averaged_state_is_unmeasured_evolution() {
    let (setup, rho0) = random_setup(3);
    let inst = build_instrument(&setup).unwrap();
    let n = 4;
    let mut acc = CMatrix::zeros(2, 2);
    for code in 0..(1 << n) {
        let sets: Vec<Vec<usize>> = (0..n).map(|k| vec![(code >> k) & 1]).collect();
        let pr = joint_probability(&inst, &rho0, &sets).unwrap();
        if pr > 0.0 {
            acc += post_measurement_state(&inst, &rho0, &sets).unwrap().matrix() * c(pr, 0.0);
        }
    }
    let direct = inst.total.power(n).apply(rho0.matrix());
    assert!(max_abs(&(acc - direct)) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kolmogorov_consistency_and_additivity(seed in 0u64..1000, path in prop::collection::vec(0usize..2, 2..5), slot in 0usize..4) {
        let (setup, rho0) = random_setup(seed);
        let inst = build_instrument(&setup).unwrap();
        let slot = slot % path.len();
        let sets: Vec<Vec<usize>> = path.iter().map(|&m| vec![m]).collect();
        let mut marg = sets.clone();
        marg[slot] = vec![0, 1];
        let pm = joint_probability(&inst, &rho0, &marg).unwrap();
        let parts: f64 = (0..2).map(|m| {
            let mut s = sets.clone();
            s[slot] = vec![m];
            joint_probability(&inst, &rho0, &s).unwrap()
        }).sum();
        prop_assert!((pm - parts).abs() < 1e-13);
        let mut shorter = sets.clone();
        shorter.remove(slot);
        if slot == sets.len() - 1 {
            prop_assert!((pm - joint_probability(&inst, &rho0, &shorter).unwrap()).abs() < 1e-13);
        }
        let p = joint_probability(&inst, &rho0, &sets).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
        prop_assert!(p <= pm + 1e-13);
    }
}

#[test]
fn frequencies_of_copied_spin() {
    let setup = MeasurementSetup::new(spin_spin_model(1.0, 0.7, 0.9).unwrap(), spin_angle_observable(0.8)).unwrap();
    let inst = build_instrument(&setup).unwrap();
    let st = asymptotic_statistics(&setup, &inst).unwrap();
    for (m, f) in st.frequencies.iter().enumerate() {
        assert!((f - setup.probe_expectation(&setup.projectors[m])).abs() < 1e-10);
    }
    assert!((st.mean - setup.probe_expectation(&setup.observable)).abs() < 1e-10);
}

#[test]
fn frequencies_agree_with_instrument_and_sampling() {
    let setup = MeasurementSetup::new(spin_spin_model(0.6, 0.7, 0.9).unwrap(), spin_angle_observable(0.5)).unwrap();
    let inst = build_instrument(&setup).unwrap();
    let st = asymptotic_statistics(&setup, &inst).unwrap();
    assert!((st.frequencies.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let rho_plus = analyze(&inst.total, 1e-8).unwrap().invariant_state.unwrap();
    for m in 0..2 {
        let direct = inst.maps[m].apply(rho_plus.matrix()).trace().re;
        assert!((direct - st.frequencies[m]).abs() < 1e-12);
    }
    let (n, trials) = (200, 400);
    let paths = sample_paths(&inst, &rho_plus, n, trials, 42).unwrap();
    let f0: Vec<f64> = paths.iter().map(|p| empirical_frequencies(p, 2)[0]).collect();
    let mean = f0.iter().sum::<f64>() / trials as f64;
    let var = f0.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let se = (var / trials as f64).sqrt();
    assert!((mean - st.frequencies[0]).abs() < 3.0 * se, "{mean} vs {} (se {se})", st.frequencies[0]);
}

fn mixed_coupling_model(lambda: f64) -> RIModel {
    let h_s = from_real_diag(&[0.0, 1.0]);
    let h_e = from_real_diag(&[0.0, 1.3]);
    let a = riqs::spinmodel::lowering();
    let sx = a.clone() + a.adjoint();
    let sz = from_real_diag(&[1.0, -1.0]);
    let v = kron(&a, &a.adjoint()) + kron(&a.adjoint(), &a) + kron(&sz, &sx) * c(0.6, 0.0);
    let rho_e = gibbs(&h_e, 0.8).unwrap();
    RIModel::new(h_s, h_e, v * c(lambda, 0.0), 1.1, rho_e).unwrap()
}

#[test]
fn frequency_flux_expansion() {
    let obs = spin_angle_observable(0.7);
    let freq = |lam: f64| {
        let setup = MeasurementSetup::new(mixed_coupling_model(lam), obs.clone()).unwrap();
        let inst = build_instrument(&setup).unwrap();
        asymptotic_statistics(&setup, &inst).unwrap().frequencies[0]
    };
    let rho_plus = |lam: f64| {
        let setup = MeasurementSetup::new(mixed_coupling_model(lam), obs.clone()).unwrap();
        let inst = build_instrument(&setup).unwrap();
        analyze(&inst.total, 1e-8).unwrap().invariant_state.unwrap().into_matrix()
    };
    let deriv = |h: f64| (freq(h) - freq(-h)) / (2.0 * h);
    let h = 0.02;
    let slope = (4.0 * deriv(h / 2.0) - deriv(h)) / 3.0;
    // Invariant state extrapolated to zero coupling.
    let omega_s = DensityMatrix::new(hermitize(&(rho_plus(h / 2.0) * c(2.0, 0.0) - rho_plus(h)))).unwrap();
    let unit = mixed_coupling_model(1.0);
    let setup = MeasurementSetup::new(unit.clone(), obs.clone()).unwrap();
    let pred = flux_term(&unit, &omega_s, &setup.projectors[0]).unwrap();
    assert!(pred.abs() > 1e-2);
    assert!(((slope - pred) / pred).abs() < 1e-3, "slope {slope} vs flux {pred}");
}


// τ = π makes the free phases e^{±2iτ} trivial, so correlations decay without oscillation.
fn decay_setup(lam: f64, theta: f64) -> MeasurementSetup {
    MeasurementSetup::new(spin_spin_model(0.6, lam, std::f64::consts::PI).unwrap(), spin_angle_observable(theta)).unwrap()
}

#[test]
fn correlations_decay_at_the_spectral_gap() {
    let inst = build_instrument(&decay_setup(0.3, 0.9)).unwrap();
    let rho0 = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
    let cd = correlation_decay(&inst, &rho0, 2, &[0], &[1], 30).unwrap();
    let gap = cd.spectral_gap.unwrap();
    let expect = -(0.3 * std::f64::consts::PI).cos().abs().ln();
    assert!((gap - expect).abs() < 1e-9);
    assert!(((cd.fitted_gamma - gap) / gap).abs() < 0.2, "fitted {} gap {gap}", cd.fitted_gamma);
}

#[test]
fn uncoupled_outcomes_are_uncorrelated() {
    let inst = build_instrument(&decay_setup(0.0, 0.9)).unwrap();
    let rho0 = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
    let cd = correlation_decay(&inst, &rho0, 1, &[0], &[0, 1], 10).unwrap();
    assert!(cd.lhs.iter().all(|x| *x < 1e-15));
    let cd = correlation_decay(&inst, &rho0, 3, &[1], &[0], 10).unwrap();
    assert!(cd.lhs.iter().all(|x| *x < 1e-15));
}

#[test]
fn correlations_are_uniformly_small_in_the_coupling() {
    let rho0 = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
    let sup = |lam: f64| {
        let inst = build_instrument(&decay_setup(lam, 0.9)).unwrap();
        (1..=4)
            .flat_map(|l| correlation_decay(&inst, &rho0, l, &[0], &[1], 40).unwrap().lhs)
            .fold(0.0, f64::max)
    };
    let ratios: Vec<f64> = [0.08, 0.04, 0.02, 0.01].iter().map(|&l| sup(l) / l).collect();
    let cmax = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(ratios.iter().all(|r| *r <= cmax) && cmax < 10.0, "{ratios:?}");
    assert!(ratios.windows(2).all(|w| w[1] <= w[0] * 1.05), "{ratios:?}");
}

#[test]
fn spin_up_beam_is_eventually_transparent() {
    let rho0 = DensityMatrix::diagonal(&[0.25, 0.75]).unwrap();
    let setup = MeasurementSetup::new(spin_spin_model(1.0, 0.7, 0.9).unwrap(), spin_angle_observable(0.0)).unwrap();
    let inst = build_instrument(&setup).unwrap();
    // Outcomes are ordered increasingly: index 1 is +1, i.e. spin up.
    assert!((eventually_probability(&inst, &rho0, &[1]).unwrap() - 1.0).abs() < 1e-9);
    assert!(eventually_probability(&inst, &rho0, &[0]).unwrap().abs() < 1e-12);
    let setup = MeasurementSetup::new(spin_spin_model(1.0, 0.7, 0.9).unwrap(), spin_angle_observable(0.6)).unwrap();
    let inst = build_instrument(&setup).unwrap();
    for m in 0..2 {
        assert!(eventually_probability(&inst, &rho0, &[m]).unwrap().abs() < 1e-12);
    }
    assert!((eventually_probability(&inst, &rho0, &[0, 1]).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn mixed_beam_never_settles() {
    let rho0 = DensityMatrix::diagonal(&[0.25, 0.75]).unwrap();
    let inst = build_instrument(&decay_setup(0.05, 0.3)).unwrap();
    for m in 0..2 {
        assert_eq!(eventually_probability(&inst, &rho0, &[m]).unwrap(), 0.0);
    }
}

fn up_beam(theta: f64) -> (MeasurementSetup, Instrument) {
    let setup = MeasurementSetup::new(spin_spin_model(1.0, 0.7, 0.9).unwrap(), spin_angle_observable(theta)).unwrap();
    let inst = build_instrument(&setup).unwrap();
    (setup, inst)
}

#[test]
fn scgf_of_up_beam() {
    let (setup, inst) = up_beam(0.8);
    assert!(scgf(&inst, 0.0).unwrap().0.abs() < 1e-13);
    for k in -8..=8 {
        let a = 0.25 * k as f64;
        let ex = setup.outcomes.iter().zip(&setup.projectors).fold(CMatrix::zeros(2, 2), |acc, (m, e)| acc + e * c((a * m).exp(), 0.0));
        let expect = setup.probe_expectation(&ex).ln();
        assert!((scgf(&inst, a).unwrap().0 - expect).abs() < 1e-8);
    }
}

#[test]
fn rate_function_is_locally_quadratic() {
    let (setup, inst) = up_beam(0.8);
    let mu = setup.probe_expectation(&setup.observable);
    let var = setup.probe_expectation(&(&setup.observable * &setup.observable)) - mu * mu;
    assert!(rate_function(&inst, mu).unwrap().abs() < 1e-12);
    let coef = |h: f64| (rate_function(&inst, mu + h).unwrap() + rate_function(&inst, mu - h).unwrap()) / (2.0 * h * h);
    let h = 1e-2;
    let extrap = (4.0 * coef(h / 2.0) - coef(h)) / 3.0;
    assert!((extrap - 1.0 / (2.0 * var)).abs() < 1e-6, "{extrap} vs {}", 1.0 / (2.0 * var));
    let t = ldp(&inst, &[-1.0, 0.0, 1.0], &[mu - 0.1, mu + 0.1]).unwrap();
    assert!(t.skipped.is_empty());
    assert!(t.lambda_prime.windows(2).all(|w| w[1] > w[0]));
    assert!(t.rate.iter().all(|r| *r > 0.0));
    assert_eq!(t.exposed, vec![true, true]);
}

#[test]
fn scgf_curvature_is_tilted_variance() {
    let (setup, inst) = up_beam(0.8);
    for a in [-0.7, 0.0, 0.5, 1.3] {
        let w: Vec<f64> = setup.projectors.iter().zip(&setup.outcomes).map(|(e, m)| setup.probe_expectation(e) * (a * m).exp()).collect();
        let z: f64 = w.iter().sum();
        let mean: f64 = w.iter().zip(&setup.outcomes).map(|(w, m)| w * m).sum::<f64>() / z;
        let var: f64 = w.iter().zip(&setup.outcomes).map(|(w, m)| w * (m - mean).powi(2)).sum::<f64>() / z;
        let got = scgf_curvature(&inst, a, 1e-4).unwrap();
        assert!((got - var).abs() < 1e-6, "alpha {a}: {got} vs {var}");
    }
}

#[test]
fn explicit_operator_spectrum() {
    let (lam, tau) = (0.7, 0.9);
    let x = CMatrix::from_fn(2, 2, |i, j| c(0.4 + i as f64 * 0.3, 0.2 * j as f64 - 0.1 * i as f64));
    let m = spin_spin_explicit(1.0, &x, lam, tau);
    let co = (lam * tau).cos();
    let e = C64::from_polar(1.0, 2.0 * tau);
    let mut expect = [x[(0, 0)], x[(0, 0)] * e * co, x[(0, 0)] * e.conj() * co, x[(0, 0)] * co * co];
    let mut got = eigenvalues(&m).unwrap();
    for z in expect.iter_mut() {
        let k = (0..got.len()).min_by(|&a, &b| (got[a] - *z).norm().total_cmp(&(got[b] - *z).norm())).unwrap();
        assert!((got[k] - *z).norm() < 1e-9);
        got.remove(k);
    }
    let id = spin_spin_explicit(0.4, &identity(2), lam, tau);
    assert!(eigenvalues(&id).unwrap().iter().any(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-12));
}

proptest! {
    #[test]
    fn explicit_operator_properties(p in 0.0f64..=1.0, lam in 0.1f64..3.0, tau in 0.1f64..3.0, re in prop::collection::vec(-1.0f64..1.0, 8)) {
        let x = CMatrix::from_fn(2, 2, |i, j| c(re[2 * i + j], re[4 + 2 * i + j]));
        let m = spin_spin_explicit(p, &x, lam, tau);
        let num = dual_step_matrix(&spin_spin_model(p, lam, tau).unwrap(), &x).unwrap();
        prop_assert!(max_abs(&(&m - num)) < 1e-10);
        let w = x[(0, 0)] * p + x[(1, 1)] * (1.0 - p);
        let v = riqs::CVector::from_vec(vec![c(p, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0 - p, 0.0)]);
        prop_assert!((m.adjoint() * &v - &v * w.conj()).norm() < 1e-12);
    }
}
