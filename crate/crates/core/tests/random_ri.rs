use riqs::dynamics::*;
use riqs::qops::{c, max_abs, CMatrix, DensityMatrix};
use riqs::spectral::analyze;
use riqs::spinmodel::{gibbs_star, SpinParams};

const E: f64 = 1.3;
const E0: f64 = 0.8;

fn family() -> ModelFamily {
    let p = SpinParams { e: E, e0: E0, lambda: 1.0, tau: 1.0, beta: 1.0 };
    ModelFamily { h_s: p.h_s(), h_e: p.h_e(), v_unit: p.interaction() }
}

fn spin(tau: f64, beta: f64, lambda: f64) -> SpinParams {
    SpinParams { e: E, e0: E0, lambda, tau, beta }
}

fn start() -> DensityMatrix {
    let psi = riqs::CVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
    DensityMatrix::pure(&psi).unwrap()
}

fn tau_law() -> Sampler {
    let taus: Vec<f64> = (0..=20).map(|k| 0.8 + 0.06 * k as f64).collect();
    let cdf: Vec<f64> = (0..=20).map(|k| (k as f64 / 20.0).powi(2)).collect();
    Sampler::new(family(), ParamLaw::TabulatedTau { taus, cdf, beta: 0.9, lambda: 0.7 }).unwrap()
}

fn beta_law() -> (Sampler, Vec<(f64, f64)>) {
    let atoms = vec![(0.9, 0.3), (1.0, 0.45), (1.1, 0.25)];
    let law = ParamLaw::Mixture(atoms.iter().map(|&(b, w)| (InteractionParams { tau: 1.4, beta: b, lambda: 0.7 }, w)).collect());
    (Sampler::new(family(), law).unwrap(), atoms)
}

#[test]
fn random_times_converge_to_shared_gibbs_state() {
    let target = gibbs_star(&spin(1.0, 0.9, 0.7)).unwrap();
    let sched = InteractionSchedule::Random { sampler: tau_law(), seed: 2024 };
    for stream in 0..100 {
        let traj = run_substream(&sched, &start(), 500, stream).unwrap();
        let d = traj.states[500].trace_distance(&target);
        assert!(d < 1e-6, "stream {stream}: {d}");
    }
}

#[test]
fn random_times_decay_exponentially() {
    let target = gibbs_star(&spin(1.0, 0.9, 0.7)).unwrap();
    let sched = InteractionSchedule::Random { sampler: tau_law(), seed: 5 };
    let traj = run(&sched, &start(), 120).unwrap();
    let d: Vec<f64> = traj.states.iter().map(|s| s.trace_distance(&target)).collect();
    let slope = riqs::spectral::fit_log_slope(&d, 10, 100);
    assert!(slope < -0.05, "{slope}");
}

#[test]
fn random_temperatures_average_the_gibbs_states() {
    let (sampler, atoms) = beta_law();
    let n = 10_000;
    let mut mixed = CMatrix::zeros(2, 2);
    for &(b, w) in &atoms {
        mixed += gibbs_star(&spin(1.4, b, 0.7)).unwrap().matrix() * c(w, 0.0);
    }
    let r = random_asymptotics(&sampler, &start(), n, &[1, 2, 3]).unwrap();
    assert!(r.exact);
    assert_eq!(r.ergodic_fraction, 1.0);
    assert!(max_abs(&(r.invariant_state.matrix() - &mixed)) < 1e-10);
    for m in &r.ergodic_means {
        let d = m.trace_distance(&DensityMatrix::new(mixed.clone()).unwrap());
        assert!(d < 10.0 / n as f64, "{d}");
    }
}

#[test]
fn mean_map_is_the_weighted_average() {
    let (sampler, atoms) = beta_law();
    let (mean, exact) = sampler.mean_map(0, 0).unwrap();
    assert!(exact);
    let mut acc = CMatrix::zeros(4, 4);
    for (atom, &(_, w)) in sampler.atoms().iter().zip(&atoms) {
        acc += atom.superop.matrix() * c(w, 0.0);
    }
    assert!(max_abs(&(mean.matrix() - acc)) < 1e-15);
    assert!(analyze(&mean, 1e-8).unwrap().satisfies_e);
}

#[test]
fn tabulated_mean_map_is_close_to_quadrature() {
    let s = tau_law();
    let (mc, exact) = s.mean_map(4000, 9).unwrap();
    assert!(!exact);
    // Midpoint rule over the piecewise-linear inverse CDF.
    let family = family();
    let mut quad = CMatrix::zeros(4, 4);
    let m = 2000;
    if let ParamLaw::TabulatedTau { taus, cdf, beta, lambda } = &s.law {
        for i in 0..m {
            let u = (i as f64 + 0.5) / m as f64;
            let k = cdf.partition_point(|&f| f <= u).clamp(1, cdf.len() - 1);
            let tau = taus[k - 1] + (u - cdf[k - 1]) / (cdf[k] - cdf[k - 1]) * (taus[k] - taus[k - 1]);
            let map = riqs::rdm::build_rdm(&family.model(&InteractionParams { tau, beta: *beta, lambda: *lambda }).unwrap()).unwrap();
            quad += map.superop.matrix() * c(1.0 / m as f64, 0.0);
        }
    }
    assert!(max_abs(&(mc.matrix() - quad)) < 0.02);
}

#[test]
fn resonant_atoms_alone_fail_condition_e() {
    let nu = spin(1.0, 1.0, 0.7).nu();
    let tau = 2.0 * std::f64::consts::PI / nu;
    let law = ParamLaw::Mixture(vec![(InteractionParams { tau, beta: 1.0, lambda: 0.7 }, 1.0)]);
    let s = Sampler::new(family(), law).unwrap();
    assert!(random_asymptotics(&s, &start(), 10, &[0]).is_err());
}

#[test]
fn seeds_and_streams_replay() {
    let sched = InteractionSchedule::Random { sampler: tau_law(), seed: 77 };
    let a = run_substream(&sched, &start(), 40, 3).unwrap();
    let b = run_substream(&sched, &start(), 40, 3).unwrap();
    let other = run_substream(&sched, &start(), 40, 4).unwrap();
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x.matrix(), y.matrix());
    }
    assert_ne!(a.states[40].matrix(), other.states[40].matrix());
}
