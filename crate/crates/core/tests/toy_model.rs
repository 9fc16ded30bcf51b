use riqs::qops::{c, max_abs, partial_trace, unit, CMatrix, Superoperator};
use riqs::rdm::build_rdm;
use riqs::spectral::{analyze, power_converge, DEFAULT_TOL_PERIPHERAL};
use riqs::spinmodel::{build, closed_form_channel, closed_form_spectrum, gibbs_star, SpinParams};
use riqs::DensityMatrix;

fn params() -> SpinParams {
    SpinParams { e: 1.3, e0: 0.8, lambda: 0.6, tau: 1.7, beta: 0.9 }
}

// Direct partial trace of the joint evolution, one matrix unit at a time.
fn oracle_rdm(p: &SpinParams) -> CMatrix {
    let m = build(p).unwrap();
    let u = m.propagator().unwrap();
    let mut out = CMatrix::zeros(4, 4);
    for j in 0..2 {
        for i in 0..2 {
            let x = riqs::qops::kron(&unit(2, i, j), m.rho_e.matrix());
            let y = partial_trace(&(&u * x * u.adjoint()), &[2, 2], 0).unwrap();
            for b in 0..2 {
                for a in 0..2 {
                    out[(a + 2 * b, i + 2 * j)] = y[(a, b)];
                }
            }
        }
    }
    out
}

#[test]
fn numeric_rdm_matches_partial_trace_oracle() {
    let p = params();
    let l = build_rdm(&build(&p).unwrap()).unwrap();
    assert!(max_abs(&(l.superop.matrix() - oracle_rdm(&p))) < 1e-12);
}

#[test]
fn closed_form_kraus_matches_numeric_rdm() {
    let p = params();
    let l = build_rdm(&build(&p).unwrap()).unwrap();
    let k = closed_form_channel(&p).unwrap();
    assert!(max_abs(&(l.superop.matrix() - k.matrix())) < 1e-10);
}

#[test]
fn zero_temperature_population_transfer() {
    let p = SpinParams { beta: 60.0, ..params() };
    let l = build_rdm(&build(&p).unwrap()).unwrap();
    let out = l.apply(&DensityMatrix::basis(2, 1)).unwrap();
    let nu = p.nu();
    let transfer = (p.lambda / nu).powi(2) * (nu * p.tau / 2.0).sin().powi(2);
    assert!((out.matrix()[(0, 0)].re - transfer).abs() < 1e-12);
}

#[test]
fn invariant_state_is_renormalized_gibbs() {
    let p = params();
    let l = build_rdm(&build(&p).unwrap()).unwrap();
    let r = analyze(&l.superop, DEFAULT_TOL_PERIPHERAL).unwrap();
    assert!(r.satisfies_e);
    let inv = r.invariant_state.unwrap();
    assert!(max_abs(&(inv.matrix() - gibbs_star(&p).unwrap().matrix())) < 1e-10);
    let s = closed_form_spectrum(&p).unwrap();
    assert!((s.e_plus.norm_sqr() - s.e0).abs() < 1e-12);
}

#[test]
fn resonant_interaction_time_breaks_ergodicity() {
    let mut p = params();
    p.tau = 2.0 * std::f64::consts::PI / p.nu();
    let l = build_rdm(&build(&p).unwrap()).unwrap();
    let r = analyze(&l.superop, DEFAULT_TOL_PERIPHERAL).unwrap();
    assert!((closed_form_spectrum(&p).unwrap().e0 - 1.0).abs() < 1e-12);
    assert!(!r.satisfies_e);
}

#[test]
fn convergence_rate_is_sqrt_e0() {
    let p = SpinParams { e: 1.0, e0: 1.2, lambda: 0.3, tau: 1.3, beta: 0.7 };
    let l = build_rdm(&build(&p).unwrap()).unwrap();
    let psi = riqs::CVector::from_vec(vec![c(0.8, 0.0), c(0.6, 0.0)]);
    let pc = power_converge(&l.superop, &DensityMatrix::pure(&psi).unwrap(), 200).unwrap();
    let slope = riqs::spectral::fit_log_slope(&pc.distances, 10, 200);
    let e0 = closed_form_spectrum(&p).unwrap().e0;
    let expect = e0.sqrt().ln();
    assert!(((slope - expect) / expect).abs() < 0.05, "slope {slope} expected {expect}");
    assert!(pc.distances.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn dual_pairing_identity() {
    let l = build_rdm(&build(&params()).unwrap()).unwrap();
    let a = CMatrix::from_fn(2, 2, |i, j| c(0.3 * i as f64 + 0.1, 0.2 * j as f64 - 0.4));
    let rho = DensityMatrix::diagonal(&[0.35, 0.65]).unwrap();
    let lhs = (l.dual().apply(&a) * rho.matrix()).trace();
    let rhs = (a * l.superop.apply(rho.matrix())).trace();
    assert!((lhs - rhs).norm() < 1e-12);
    let dd: Superoperator = l.dual().dual();
    assert_eq!(dd.matrix(), l.superop.matrix());
}
