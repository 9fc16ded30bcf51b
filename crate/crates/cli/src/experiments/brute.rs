//! Full-tensor references: the system together with every probe, evolved jointly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riqs::measure::MeasurementSetup;
use riqs::qops::{c, from_real_diag, gibbs, hermitize, identity, kron, partial_trace, CMatrix, DensityMatrix, C64};
use riqs::rdm::RIModel;
use riqs::weaklimit::haar_unitary;

/// Operator on `S ⊗ P_1 ⊗ … ⊗ P_n` acting as `x` on `S ⊗ P_k`, `k ≥ 1`.
fn embed(x: &CMatrix, d: usize, p: usize, n: usize, k: usize) -> CMatrix {
    let after = p.pow((n - k) as u32);
    let block = p.pow(n as u32);
    let dim = d * block;
    CMatrix::from_fn(dim, dim, |r, col| {
        let (s1, rest1) = (r / block, r % block);
        let (s2, rest2) = (col / block, col % block);
        let (b1, q1, a1) = (rest1 / (p * after), (rest1 / after) % p, rest1 % after);
        let (b2, q2, a2) = (rest2 / (p * after), (rest2 / after) % p, rest2 % after);
        if b1 != b2 || a1 != a2 {
            return C64::new(0.0, 0.0);
        }
        x[(s1 * p + q1, s2 * p + q2)]
    })
}

fn with_probes(rho0: &DensityMatrix, probe: &DensityMatrix, n: usize) -> CMatrix {
    (0..n).fold(rho0.matrix().clone(), |acc, _| kron(&acc, probe.matrix()))
}

/// State of the system after `n` interactions with the same model.
pub fn unitary(model: &RIModel, rho0: &DensityMatrix, n: usize) -> riqs::Result<CMatrix> {
    let (d, p) = (model.dim_s(), model.dim_e());
    let u = model.propagator()?;
    let mut state = with_probes(rho0, &model.rho_e, n);
    for k in 1..=n {
        let uk = embed(&u, d, p, n, k);
        state = &uk * state * uk.adjoint();
    }
    let dims: Vec<usize> = std::iter::once(d).chain(std::iter::repeat_n(p, n)).collect();
    partial_trace(&state, &dims, 0)
}

/// Probability that the `k`-th probe is found in `sets[k]` for every `k`.
pub fn measured(setup: &MeasurementSetup, rho0: &DensityMatrix, sets: &[Vec<usize>]) -> riqs::Result<f64> {
    let m = &setup.model;
    let (d, p, n) = (m.dim_s(), m.dim_e(), sets.len());
    let u = m.propagator()?;
    let mut rho = with_probes(rho0, &m.rho_e, n);
    for (k, s) in sets.iter().enumerate() {
        let uk = embed(&u, d, p, n, k + 1);
        let e = embed(&kron(&identity(d), &setup.projector(s)), d, p, n, k + 1);
        rho = &e * &uk * rho * uk.adjoint() * &e;
    }
    Ok(rho.trace().re)
}

fn random_hermitian(d: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let u = haar_unitary(d, rng);
    let diag: Vec<f64> = (0..d).map(|k| 0.3 + 0.7 * k as f64).collect();
    hermitize(&(&u * from_real_diag(&diag) * u.adjoint()))
}

/// Generic model with Haar-rotated Hamiltonians and a Gibbs probe.
pub fn random_model(ds: usize, de: usize, seed: u64) -> riqs::Result<RIModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_s = random_hermitian(ds, &mut rng);
    let h_e = random_hermitian(de, &mut rng);
    let v = random_hermitian(ds * de, &mut rng) * c(0.4, 0.0);
    let rho_e = gibbs(&h_e, 0.7)?;
    RIModel::new(h_s, h_e, v, 1.1, rho_e)
}

pub fn random_state(d: usize, seed: u64) -> riqs::Result<DensityMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = haar_unitary(d, &mut rng);
    let z = (d * (d + 1) / 2) as f64;
    let diag = from_real_diag(&(1..=d).map(|k| k as f64 / z).collect::<Vec<_>>());
    DensityMatrix::new(hermitize(&(&u * diag * u.adjoint())))
}

/// Qubit system and probe with uniformly random entries, measured in a random observable.
pub fn random_measurement(seed: u64) -> riqs::Result<(MeasurementSetup, DensityMatrix)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut herm = |d: usize| {
        let m = CMatrix::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        &m + m.adjoint()
    };
    let (h_s, v, obs) = (herm(2), herm(4), herm(2));
    let h_e = from_real_diag(&[0.0, 1.1]);
    let rho_e = gibbs(&h_e, 0.8)?;
    let model = RIModel::new(h_s, h_e, v, 0.9, rho_e)?;
    Ok((MeasurementSetup::new(model, obs)?, random_state(2, seed)?))
}
