//! Oracles shared by several test targets.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riqs::measure::MeasurementSetup;
use riqs::qops::{c, from_real_diag, gibbs, hermitize, identity, kron, partial_trace, CMatrix, DensityMatrix, C64};
use riqs::rdm::RIModel;
use riqs::spinmodel::SpinParams;
use riqs::weaklimit::haar_unitary;

pub fn random_hermitian(d: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let u = haar_unitary(d, rng);
    let diag: Vec<f64> = (0..d).map(|k| 0.3 + 0.7 * k as f64).collect();
    hermitize(&(&u * from_real_diag(&diag) * u.adjoint()))
}

pub fn random_model(ds: usize, de: usize, seed: u64) -> RIModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_s = random_hermitian(ds, &mut rng);
    let h_e = random_hermitian(de, &mut rng);
    let v = random_hermitian(ds * de, &mut rng) * c(0.4, 0.0);
    let rho_e = gibbs(&h_e, 0.7).unwrap();
    RIModel::new(h_s, h_e, v, 1.1, rho_e).unwrap()
}

pub fn random_state(d: usize, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = haar_unitary(d, &mut rng);
    let p: Vec<f64> = (0..d).map(|k| (k + 1) as f64).collect();
    let z: f64 = p.iter().sum();
    let diag = from_real_diag(&p.iter().map(|x| x / z).collect::<Vec<_>>());
    DensityMatrix::new(hermitize(&(&u * diag * u.adjoint()))).unwrap()
}

/// Operator on `S ⊗ P_1 ⊗ … ⊗ P_n` acting as `x` on `S ⊗ P_k`, `k ≥ 1`.
pub fn embed(x: &CMatrix, d: usize, p: usize, n: usize, k: usize) -> CMatrix {
    let before = p.pow((k - 1) as u32);
    let after = p.pow((n - k) as u32);
    let dim = d * p.pow(n as u32);
    CMatrix::from_fn(dim, dim, |r, col| {
        let (s1, rest1) = (r / (before * p * after), r % (before * p * after));
        let (s2, rest2) = (col / (before * p * after), col % (before * p * after));
        let (b1, q1, a1) = (rest1 / (p * after), (rest1 / after) % p, rest1 % after);
        let (b2, q2, a2) = (rest2 / (p * after), (rest2 / after) % p, rest2 % after);
        if b1 != b2 || a1 != a2 {
            return C64::new(0.0, 0.0);
        }
        x[(s1 * p + q1, s2 * p + q2)]
    })
}

/// Joint unitary evolution of the system with one fresh probe per model, then a partial trace.
pub fn unitary_brute_force(models: &[RIModel], rho0: &DensityMatrix) -> CMatrix {
    let n = models.len();
    let (ds, de) = (models[0].dim_s(), models[0].dim_e());
    let mut state = rho0.matrix().clone();
    for m in models {
        state = kron(&state, m.rho_e.matrix());
    }
    for (k, m) in models.iter().enumerate() {
        let u = embed(&m.propagator().unwrap(), ds, de, n, k + 1);
        state = &u * state * u.adjoint();
    }
    let dims: Vec<usize> = std::iter::once(ds).chain(std::iter::repeat_n(de, n)).collect();
    partial_trace(&state, &dims, 0).unwrap()
}

/// Joint probability and post-measurement system state from the full
/// system-plus-probes density matrix.
pub fn measured_brute_force(setup: &MeasurementSetup, rho0: &DensityMatrix, sets: &[Vec<usize>]) -> (f64, CMatrix) {
    let m = &setup.model;
    let (d, p, n) = (m.dim_s(), m.dim_e(), sets.len());
    let mut rho = rho0.matrix().clone();
    for _ in 0..n {
        rho = kron(&rho, m.rho_e.matrix());
    }
    let u = m.propagator().unwrap();
    for (k, s) in sets.iter().enumerate() {
        let uk = embed(&u, d, p, n, k + 1);
        let e = embed(&kron(&identity(d), &setup.projector(s)), d, p, n, k + 1);
        rho = &e * &uk * rho * uk.adjoint() * &e;
    }
    let pr = rho.trace().re;
    let dims: Vec<usize> = std::iter::once(d).chain(std::iter::repeat_n(p, n)).collect();
    let sys = partial_trace(&rho, &dims, 0).unwrap();
    (pr, sys / c(pr, 0.0))
}

/// `1/Z_β` for the two-level probe.
pub fn zinv(p: &SpinParams, beta: f64) -> f64 {
    1.0 / (1.0 + (-beta * p.e0).exp())
}

/// Stationary flux into beam `j` of a cyclic K-beam exchange model.
pub fn kbeam_deterministic_fluxes(p: &SpinParams, betas: &[f64]) -> Vec<f64> {
    let k = betas.len();
    let e0 = p.e0_eigenvalue();
    let pre = p.e0 * (1.0 - e0).powi(2) / (k as f64 * p.tau * (1.0 - e0.powi(k as i32)));
    (0..k)
        .map(|j| {
            let s: f64 = (0..k)
                .map(|m| {
                    let r = (j as i64 - m as i64 - 1).rem_euclid(k as i64) as i32;
                    (zinv(p, betas[m]) - zinv(p, betas[j])) * e0.powi(r)
                })
                .sum();
            pre * s
        })
        .collect()
}

/// Stationary flux into beam `j` when the beam is drawn uniformly at each step.
pub fn kbeam_random_fluxes(p: &SpinParams, betas: &[f64]) -> Vec<f64> {
    let k = betas.len() as f64;
    let e0 = p.e0_eigenvalue();
    let pre = p.e0 * (1.0 - e0) / (k * k * p.tau);
    betas.iter().map(|&bj| pre * betas.iter().map(|&bk| zinv(p, bk) - zinv(p, bj)).sum::<f64>()).collect()
}

/// Work per interaction of the full dipole coupling at the stationary state.
pub fn dipole_work(p: &SpinParams) -> f64 {
    let s2 = |x: f64| riqs::spinmodel::sinc(x).powi(2);
    let (a, b) = (s2(p.nu() * p.tau / 2.0), s2(p.mu() * p.tau / 2.0));
    p.lambda.powi(2) * p.tau.powi(2) * p.e0 / 2.0 * (p.beta * p.e0 / 2.0).tanh() * a * b / (a + b)
}

/// `E₀(1−e₀)/τ · Cov(β, 1/Z_β)` for a finite law of `(β, weight)`.
pub fn random_beta_entropy(p: &SpinParams, atoms: &[(f64, f64)]) -> f64 {
    let eb: f64 = atoms.iter().map(|(b, w)| b * w).sum();
    let ef: f64 = atoms.iter().map(|(b, w)| zinv(p, *b) * w).sum();
    let ebf: f64 = atoms.iter().map(|(b, w)| b * zinv(p, *b) * w).sum();
    p.e0 * (1.0 - p.e0_eigenvalue()) / p.tau * (ebf - eb * ef)
}
