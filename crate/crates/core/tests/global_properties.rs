mod common;

use common::{random_model, random_state, unitary_brute_force};
use proptest::prelude::*;
use riqs::dynamics::*;
use riqs::maser::{jc_rdm, ExactEtaXi, MaserParams};
use riqs::measure::{build_instrument, spin_angle_observable, spin_spin_model, MeasurementSetup};
use riqs::qops::*;
use riqs::rdm::{build_rdm, RIModel};
use riqs::spinmodel::{build, build_dipole, closed_form_channel, SpinParams};
use riqs::weaklimit::{exp_superop, generators, spin_coupling};

const TOL: f64 = 1e-10;

fn all_channels() -> Vec<(String, Superoperator)> {
    let mut out = Vec::new();
    let sp = SpinParams { e: 1.3, e0: 0.8, lambda: 0.6, tau: 1.7, beta: 0.9 };
    out.push(("toy".into(), build_rdm(&build(&sp).unwrap()).unwrap().superop));
    out.push(("toy closed form".into(), closed_form_channel(&sp).unwrap()));
    out.push(("dipole".into(), build_rdm(&build_dipole(&sp).unwrap()).unwrap().superop));
    for seed in 0..4 {
        out.push((format!("random {seed}"), build_rdm(&random_model(3, 2, seed)).unwrap().superop));
    }
    let maps: Vec<Superoperator> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&b| build_rdm(&build(&SpinParams { beta: b, ..sp }).unwrap()).unwrap().superop)
        .collect();
    for (j, m) in kbeam_effective_maps(&maps).unwrap().into_iter().enumerate() {
        out.push((format!("K-beam effective {j}"), m));
    }
    let p = SpinParams { e: 1.0, e0: 1.0, lambda: 1.0, tau: 1.0, beta: 1.0 };
    let fam = ModelFamily { h_s: p.h_s(), h_e: p.h_e(), v_unit: p.interaction() };
    let law = ParamLaw::Mixture(vec![
        (InteractionParams { tau: 1.2, beta: 0.4, lambda: 0.5 }, 0.5),
        (InteractionParams { tau: 0.7, beta: 2.0, lambda: 0.9 }, 0.5),
    ]);
    out.push(("mean map".into(), Sampler::new(fam, law).unwrap().mean_map(0, 0).unwrap().0));
    // A resonance at the cutoff closes the top sector, so truncation loses nothing.
    let mp = MaserParams::from_exact(1.0, ExactEtaXi { eta: [0, 1], xi: [1, 1] }, 1.1, 0.6, 8).unwrap();
    out.push(("maser".into(), jc_rdm(&mp).unwrap().superoperator().unwrap()));
    let g = generators(&spin_coupling(1.0, 1.0, 0.8, 0.9, 0.1).unwrap(), 1e-8).unwrap();
    for t in [0.1, 1.0, 5.0] {
        out.push((format!("Lindblad t={t}"), exp_superop(&g.lindbladian, t).unwrap().dual()));
    }
    let setup = MeasurementSetup::new(spin_spin_model(0.7, 0.8, 1.3).unwrap(), spin_angle_observable(0.4)).unwrap();
    out.push(("instrument total".into(), build_instrument(&setup).unwrap().total));
    out
}

#[test]
fn every_channel_is_cptp() {
    for (name, map) in all_channels() {
        let chk = check_cptp(&map, TOL);
        assert!(chk.passed, "{name}: {chk:?}");
    }
}

#[test]
fn truncated_maser_is_trace_non_increasing() {
    let mp = MaserParams::from_eta_xi(1.0, 0.3, 0.7, 1.1, 0.6, 6);
    let m = jc_rdm(&mp).unwrap();
    let s = m.superoperator().unwrap();
    assert!(s.min_choi_eigenvalue() >= -TOL);
    let defect = identity(7) - s.dual().apply(&identity(7));
    assert!(eigh(&hermitize(&defect)).unwrap().values[0] >= -TOL);
    for n in 0..6 {
        assert!((s.dual().apply(&identity(7))[(n, n)].re - 1.0).abs() < TOL);
    }
    assert!(m.leakage > 0.0 && m.check_leakage(1e-3).is_err());
}

#[test]
fn instrument_components_are_cp() {
    let setup = MeasurementSetup::new(spin_spin_model(0.7, 0.8, 1.3).unwrap(), spin_angle_observable(0.4)).unwrap();
    for m in build_instrument(&setup).unwrap().maps {
        assert!(m.min_choi_eigenvalue() >= -TOL);
    }
}

#[test]
fn brute_force_matches_iteration_ideal() {
    for (ds, de, seed) in [(2, 2, 1), (3, 2, 2), (2, 3, 3)] {
        let model = random_model(ds, de, seed);
        let map = build_rdm(&model).unwrap();
        let rho0 = random_state(ds, seed + 10);
        for n in 1..=4 {
            if ds * de.pow(n as u32) > 200 {
                continue;
            }
            let oracle = unitary_brute_force(&vec![model.clone(); n], &rho0);
            let traj = run(&InteractionSchedule::Ideal { map: map.clone() }, &rho0, n).unwrap();
            assert!(max_abs(&(traj.states[n].matrix() - oracle)) < TOL, "ds={ds} de={de} n={n}");
        }
    }
}

#[test]
fn brute_force_matches_iteration_kbeam_and_random() {
    let sp = SpinParams { e: 1.3, e0: 0.8, lambda: 0.6, tau: 1.7, beta: 0.9 };
    let models: Vec<RIModel> = [0.3, 1.5, 4.0].iter().map(|&b| build(&SpinParams { beta: b, ..sp }).unwrap()).collect();
    let maps: Vec<_> = models.iter().map(|m| build_rdm(m).unwrap()).collect();
    let rho0 = random_state(2, 4);
    let traj = run(&InteractionSchedule::KBeam { maps }, &rho0, 4).unwrap();
    let seq: Vec<RIModel> = (0..4).map(|k| models[k % 3].clone()).collect();
    assert!(max_abs(&(traj.states[4].matrix() - unitary_brute_force(&seq, &rho0))) < TOL);

    let fam = ModelFamily { h_s: sp.h_s(), h_e: sp.h_e(), v_unit: sp.interaction() };
    let law = ParamLaw::Mixture(vec![
        (InteractionParams { tau: 1.2, beta: 0.4, lambda: 0.5 }, 0.5),
        (InteractionParams { tau: 0.7, beta: 2.0, lambda: 0.9 }, 0.5),
    ]);
    let sched = InteractionSchedule::Random { sampler: Sampler::new(fam.clone(), law).unwrap(), seed: 8 };
    let traj = run(&sched, &rho0, 4).unwrap();
    let seq: Vec<RIModel> = traj.step_records.iter().map(|r| fam.model(&r.params.unwrap()).unwrap()).collect();
    assert!(max_abs(&(traj.states[4].matrix() - unitary_brute_force(&seq, &rho0))) < TOL);
}

#[test]
fn deterministic_replay_is_bit_identical() {
    let model = random_model(3, 2, 5);
    let map = build_rdm(&model).unwrap();
    let rho0 = random_state(3, 6);
    let a = run(&InteractionSchedule::Ideal { map: map.clone() }, &rho0, 50).unwrap();
    let b = run(&InteractionSchedule::Ideal { map: build_rdm(&model).unwrap() }, &rho0, 50).unwrap();
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x.matrix(), y.matrix());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_models_give_channels(seed in 0u64..10_000, ds in 2usize..4, de in 2usize..4) {
        let map = build_rdm(&random_model(ds, de, seed)).unwrap();
        let chk = check_cptp(&map.superop, TOL);
        prop_assert!(chk.passed, "{:?}", chk);
        prop_assert!(map.superop.spectral_radius().unwrap() <= 1.0 + 1e-10);
    }

    #[test]
    fn iteration_preserves_states(seed in 0u64..10_000, n in 1usize..30) {
        let model = random_model(2, 2, seed);
        let map = build_rdm(&model).unwrap();
        let traj = run(&InteractionSchedule::Ideal { map }, &random_state(2, seed), n).unwrap();
        for s in &traj.states {
            prop_assert!((trace(s.matrix()).re - 1.0).abs() < TOL);
            prop_assert!(s.min_eigenvalue() >= -TOL);
        }
    }

    #[test]
    fn spin_channels_are_cptp(e in 0.2f64..2.0, e0 in 0.2f64..2.0, lambda in 0.0f64..1.5, tau in 0.05f64..5.0, beta in -3.0f64..3.0) {
        let p = SpinParams { e, e0, lambda, tau, beta };
        prop_assert!(check_cptp(&build_rdm(&build(&p).unwrap()).unwrap().superop, TOL).passed);
        prop_assert!(check_cptp(&build_rdm(&build_dipole(&p).unwrap()).unwrap().superop, TOL).passed);
    }
}
