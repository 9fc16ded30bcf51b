//! Statistics of projective measurements performed on the outgoing probes:
//! instruments, joint laws, frequencies, correlations, tail events and large
//! deviations of the empirical mean.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qops::{
    c, check_hermitian, eig_general, eigh, from_rows, identity, kron, CMatrix, CVector, DensityMatrix, Superoperator,
    C64, I, ONE, ZERO,
};
use crate::rdm::RIModel;
use crate::spectral::{analyze, linear_slope, riesz_projection, DEFAULT_TOL_PERIPHERAL};
use crate::thermo::heisenberg_integral;

/// A repeated interaction model together with a probe observable `M`.
#[derive(Debug, Clone)]
pub struct MeasurementSetup {
    pub model: RIModel,
    pub observable: CMatrix,
    /// Distinct eigenvalues of `M`, increasing.
    pub outcomes: Vec<f64>,
    /// Spectral projection `E_m` for each outcome.
    pub projectors: Vec<CMatrix>,
    eigvecs: Vec<Vec<CVector>>,
}

impl MeasurementSetup {
    pub fn new(model: RIModel, observable: CMatrix) -> Result<Self> {
        Self::with_tolerance(model, observable, 1e-9)
    }

    /// Eigenvalues of `M` closer than `tol_outcome` are one outcome.
    pub fn with_tolerance(model: RIModel, observable: CMatrix, tol_outcome: f64) -> Result<Self> {
        model.validate()?;
        let p = model.dim_e();
        if observable.nrows() != p || observable.ncols() != p {
            return Err(Error::DimensionMismatch { expected: p, got: observable.nrows() });
        }
        check_hermitian(&observable, 1e-12)?;
        let eig = eigh(&observable)?;
        let mut outcomes: Vec<f64> = Vec::new();
        let mut eigvecs: Vec<Vec<CVector>> = Vec::new();
        for (k, &v) in eig.values.iter().enumerate() {
            let col = eig.vectors.column(k).into_owned();
            match outcomes.last() {
                Some(&last) if (v - last).abs() < tol_outcome => eigvecs.last_mut().unwrap().push(col),
                _ => {
                    outcomes.push(v);
                    eigvecs.push(vec![col]);
                }
            }
        }
        let projectors = eigvecs
            .iter()
            .map(|vs| vs.iter().fold(CMatrix::zeros(p, p), |acc, v| acc + v * v.adjoint()))
            .collect();
        Ok(MeasurementSetup { model, observable, outcomes, projectors, eigvecs })
    }

    pub fn n_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    /// `E_S` for a set of outcome indices.
    pub fn projector(&self, set: &[usize]) -> CMatrix {
        let p = self.model.dim_e();
        set.iter().fold(CMatrix::zeros(p, p), |acc, &m| acc + &self.projectors[m])
    }

    pub fn probe_expectation(&self, x: &CMatrix) -> f64 {
        self.model.rho_e.expect(x).re
    }
}

/// One completely positive map per outcome; `I_S = Σ_{m∈S} I_m`.
#[derive(Debug, Clone)]
pub struct Instrument {
    pub outcomes: Vec<f64>,
    pub maps: Vec<Superoperator>,
    pub total: Superoperator,
}

impl Instrument {
    pub fn map_for(&self, set: &[usize]) -> Superoperator {
        let d = self.total.dim();
        set.iter().fold(Superoperator::zero(d), |acc, &m| acc.add(&self.maps[m]))
    }

    pub fn all(&self) -> Vec<usize> {
        (0..self.maps.len()).collect()
    }

    /// `Σ_m e^{αm} I_m`.
    pub fn deformed(&self, alpha: f64) -> Superoperator {
        let d = self.total.dim();
        self.maps
            .iter()
            .zip(&self.outcomes)
            .fold(Superoperator::zero(d), |acc, (i, m)| acc.add(&i.scale(c((alpha * m).exp(), 0.0))))
    }

    fn deformed_derivative(&self, alpha: f64) -> Superoperator {
        let d = self.total.dim();
        self.maps
            .iter()
            .zip(&self.outcomes)
            .fold(Superoperator::zero(d), |acc, (i, m)| acc.add(&i.scale(c(m * (alpha * m).exp(), 0.0))))
    }
}

/// `I_m(ρ) = Tr_P[(I⊗E_m) U(ρ⊗ω_in)U* (I⊗E_m)]`, assembled from Kraus operators
/// `√w_j (I⊗<χ_i|) U (I⊗|ψ_j>)` with `χ_i` eigenvectors of `M` and
/// `ω_in = Σ w_j |ψ_j><ψ_j|`.
pub fn build_instrument(setup: &MeasurementSetup) -> Result<Instrument> {
    let model = &setup.model;
    let (d, p) = (model.dim_s(), model.dim_e());
    let u = model.propagator()?;
    let omega = eigh(model.rho_e.matrix())?;
    let mut maps = Vec::with_capacity(setup.n_outcomes());
    for chis in &setup.eigvecs {
        let mut ks = Vec::new();
        for chi in chis {
            for (j, &w) in omega.values.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                let psi = omega.vectors.column(j);
                let k = CMatrix::from_fn(d, d, |s, t| {
                    let mut acc = ZERO;
                    for q in 0..p {
                        for r in 0..p {
                            acc += chi[q].conj() * u[(s * p + q, t * p + r)] * psi[r];
                        }
                    }
                    acc * w.sqrt()
                });
                ks.push(k);
            }
        }
        maps.push(if ks.is_empty() { Superoperator::zero(d) } else { Superoperator::from_kraus(&ks)? });
    }
    let total = maps.iter().fold(Superoperator::zero(d), |acc, m| acc.add(m));
    Ok(Instrument { outcomes: setup.outcomes.clone(), maps, total })
}

/// `Tr[I_{S_n} ∘ … ∘ I_{S_1}(ρ₀)]`, with `S_1` measured first.
pub fn joint_probability(inst: &Instrument, rho0: &DensityMatrix, sets: &[Vec<usize>]) -> Result<f64> {
    let x = unnormalized_state(inst, rho0, sets)?;
    let pr = x.trace().re;
    if pr < -1e-10 {
        return Err(Error::NegativeProbability(pr));
    }
    Ok(pr.max(0.0))
}

fn unnormalized_state(inst: &Instrument, rho0: &DensityMatrix, sets: &[Vec<usize>]) -> Result<CMatrix> {
    if sets.is_empty() {
        return Err(Error::InvalidParameter("at least one measurement is required".into()));
    }
    let mut x = rho0.matrix().clone();
    for s in sets {
        x = inst.map_for(s).apply(&x);
    }
    Ok(x)
}

/// System state right after the last measurement, conditioned on the outcomes.
pub fn post_measurement_state(inst: &Instrument, rho0: &DensityMatrix, sets: &[Vec<usize>]) -> Result<DensityMatrix> {
    let x = unnormalized_state(inst, rho0, sets)?;
    let pr = x.trace().re;
    if pr <= 1e-300 {
        return Err(Error::InvalidState("conditioning event has probability zero".into()));
    }
    DensityMatrix::new(crate::qops::hermitize(&(x / c(pr, 0.0))))
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticStatistics {
    pub outcomes: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub mean: f64,
    pub gap: Option<f64>,
}

/// `f_m = Tr[(ρ₊⊗ω_in) U*(I⊗E_m)U]` and `μ∞ = Σ m f_m`.
pub fn asymptotic_statistics(setup: &MeasurementSetup, inst: &Instrument) -> Result<AsymptoticStatistics> {
    let rep = analyze(&inst.total, DEFAULT_TOL_PERIPHERAL)?;
    if !rep.satisfies_e {
        return Err(Error::ConditionE(format!("{} peripheral eigenvalues", rep.peripheral.len())));
    }
    let rho = rep.invariant_state.ok_or_else(|| Error::NoInvariantState("analysis returned none".into()))?;
    let model = &setup.model;
    let u = model.propagator()?;
    let joint = kron(rho.matrix(), model.rho_e.matrix());
    let frequencies: Vec<f64> = setup
        .projectors
        .iter()
        .map(|e| {
            let obs = u.adjoint() * kron(&identity(model.dim_s()), e) * &u;
            (&joint * obs).trace().re
        })
        .collect();
    let mean = frequencies.iter().zip(&setup.outcomes).map(|(f, m)| f * m).sum();
    Ok(AsymptoticStatistics { outcomes: setup.outcomes.clone(), frequencies, mean, gap: rep.gap })
}

/// `iτ ω_S⊗ω_in([V, I⊗Ē(τ)])` with `Ē` the average of `e^{isH_P} E e^{−isH_P}` over one
/// interaction. `model.v` plays the role of `V` (unit coupling).
pub fn flux_term(model: &RIModel, omega_s: &DensityMatrix, e: &CMatrix) -> Result<f64> {
    let tau = model.tau;
    let ebar = heisenberg_integral(&model.h_e, e, tau)? / c(tau, 0.0);
    let ebar = kron(&identity(model.dim_s()), &ebar);
    let comm = &model.v * &ebar - &ebar * &model.v;
    let joint = kron(omega_s.matrix(), model.rho_e.matrix());
    Ok(((joint * comm).trace() * I * tau).re)
}

/// Outcome index sequence sampled from the instrument.
pub fn sample_path(inst: &Instrument, rho0: &DensityMatrix, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let mut x = rho0.matrix().clone();
    let mut path = Vec::with_capacity(n);
    for _ in 0..n {
        let cand: Vec<CMatrix> = inst.maps.iter().map(|m| m.apply(&x)).collect();
        let probs: Vec<f64> = cand.iter().map(|y| y.trace().re.max(0.0)).collect();
        let tot: f64 = probs.iter().sum();
        let u: f64 = rng.random::<f64>() * tot;
        let mut acc = 0.0;
        let mut pick = probs.len() - 1;
        for (k, pk) in probs.iter().enumerate() {
            acc += pk;
            if u < acc {
                pick = k;
                break;
            }
        }
        path.push(pick);
        x = &cand[pick] / c(probs[pick], 0.0);
    }
    Ok(path)
}

/// `trials` paths of length `n`; trial `t` uses stream `t` of the seeded generator.
pub fn sample_paths(inst: &Instrument, rho0: &DensityMatrix, n: usize, trials: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            sample_path(inst, rho0, n, &mut rng)
        })
        .collect()
}

pub fn empirical_frequencies(path: &[usize], n_outcomes: usize) -> Vec<f64> {
    let mut f = vec![0.0; n_outcomes];
    for &k in path {
        f[k] += 1.0;
    }
    let n = path.len().max(1) as f64;
    f.iter().map(|x| x / n).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationDecay {
    pub separations: Vec<usize>,
    /// `|P(A∩B) − P(A)P(B)|`.
    pub lhs: Vec<f64>,
    pub fitted_gamma: f64,
    pub spectral_gap: Option<f64>,
}

/// Correlations between `{X_l ∈ A}` and `{X_m ∈ B}` for `m − l = 1..=max_sep`.
pub fn correlation_decay(
    inst: &Instrument,
    rho0: &DensityMatrix,
    l: usize,
    a: &[usize],
    b: &[usize],
    max_sep: usize,
) -> Result<CorrelationDecay> {
    if l == 0 {
        return Err(Error::InvalidParameter("measurement times start at 1".into()));
    }
    let phi = &inst.total;
    let (ia, ib) = (inst.map_for(a), inst.map_for(b));
    let before = phi.power(l - 1).apply(rho0.matrix());
    let after_a = ia.apply(&before);
    let pa = after_a.trace().re;
    let mut x = after_a;
    let mut y = phi.apply(&before);
    let mut lhs = Vec::with_capacity(max_sep);
    for _ in 1..=max_sep {
        let pab = ib.apply(&x).trace().re;
        let pb = ib.apply(&y).trace().re;
        lhs.push((pab - pa * pb).abs());
        x = phi.apply(&x);
        y = phi.apply(&y);
    }
    let top = lhs.iter().cloned().fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = lhs
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 1e-12 * top.max(1e-300) && **v > 1e-15)
        .map(|(k, v)| ((k + 1) as f64, v.ln()))
        .collect();
    let fitted_gamma = if pts.len() >= 2 { -linear_slope(&pts) } else { f64::NAN };
    let gap = analyze(phi, DEFAULT_TOL_PERIPHERAL)?.gap;
    Ok(CorrelationDecay { separations: (1..=max_sep).collect(), lhs, fitted_gamma, spectral_gap: gap })
}

/// `P(X_n ∈ S eventually) = Tr[Π_S Π ρ₀]` with `Π`, `Π_S` the Riesz projections at 1
/// of `Φ` and `I_S`.
pub fn eventually_probability(inst: &Instrument, rho0: &DensityMatrix, set: &[usize]) -> Result<f64> {
    let is = inst.map_for(set);
    let pi_s = match projection_at_one(is.matrix())? {
        Some(p) => p,
        None => return Ok(0.0),
    };
    let pi = projection_at_one(inst.total.matrix())?
        .ok_or_else(|| Error::NoInvariantState("channel has no eigenvalue 1".into()))?;
    let v = crate::qops::vec_op(rho0.matrix());
    let out = crate::qops::unvec(&(pi_s * (pi * v)), inst.total.dim());
    Ok(out.trace().re)
}

fn projection_at_one(m: &CMatrix) -> Result<Option<CMatrix>> {
    let eig = eig_general(m, 1e-9)?;
    let lead = eig.values.first().map(|z| z.norm()).unwrap_or(0.0);
    if lead < 1.0 - 1e-8 {
        return Ok(None);
    }
    let near = eig.values.iter().filter(|z| (*z - ONE).norm() < 1e-8).count();
    if near == 0 {
        return Ok(None);
    }
    let sep = eig
        .values
        .iter()
        .map(|z| (z - ONE).norm())
        .filter(|&r| r >= 1e-8)
        .fold(f64::INFINITY, f64::min);
    if sep < 1e-6 {
        return Err(Error::AmbiguousCluster(format!("eigenvalue {sep:.3e} from 1")));
    }
    let radius = (0.5 * sep).min(0.5);
    Ok(Some(riesz_projection(m, ONE, radius)?.projector))
}

/// `Λ(α)` and `Λ'(α)` from the leading eigenvalue of the deformed channel.
pub fn scgf(inst: &Instrument, alpha: f64) -> Result<(f64, f64)> {
    let phi = inst.deformed(alpha);
    let right = eig_general(phi.matrix(), 1e-9)?;
    let r = right.values.first().map(|z| z.norm()).unwrap_or(0.0);
    if r <= 0.0 {
        return Err(Error::Degenerate(format!("deformed channel vanishes at alpha = {alpha}")));
    }
    let peripheral = right.values.iter().filter(|z| z.norm() > r * (1.0 - 1e-9)).count();
    if peripheral != 1 {
        return Err(Error::Degenerate(format!("{peripheral} leading eigenvalues at alpha = {alpha}")));
    }
    let lead = right.values[0];
    let left = eig_general(&phi.matrix().transpose(), 1e-9)?;
    let j = (0..left.values.len())
        .min_by(|&a, &b| (left.values[a] - lead).norm().total_cmp(&(left.values[b] - lead).norm()))
        .unwrap();
    let rv = right.vectors.column(0);
    let lv = left.vectors.column(j);
    let dphi = inst.deformed_derivative(alpha);
    let num = (lv.transpose() * dphi.matrix() * rv)[(0, 0)];
    let den = (lv.transpose() * rv)[(0, 0)];
    Ok((r.ln(), (num / den / lead).re))
}

/// `Λ*(x) = sup_α αx − Λ(α)` by bisection on `Λ'(α) = x`.
pub fn rate_function(inst: &Instrument, x: f64) -> Result<f64> {
    legendre(inst, x).map(|(rate, _)| rate)
}

/// `Λ*(x)` together with the maximizing `α`.
fn legendre(inst: &Instrument, x: f64) -> Result<(f64, f64)> {
    let lo_m = inst.outcomes.first().copied().unwrap_or(0.0);
    let hi_m = inst.outcomes.last().copied().unwrap_or(0.0);
    if x <= lo_m || x >= hi_m {
        return Err(Error::InvalidParameter(format!("x = {x} outside the open outcome range")));
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    while scgf(inst, lo)?.1 > x {
        lo *= 2.0;
        if lo < -1e3 {
            return Err(Error::ConvergenceFailure { residual: x });
        }
    }
    while scgf(inst, hi)?.1 < x {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::ConvergenceFailure { residual: x });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-15 * (1.0 + mid.abs()) {
            break;
        }
        if scgf(inst, mid)?.1 < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    Ok((a * x - scgf(inst, a)?.0, a))
}

/// Central difference of `Λ'` at `α`.
pub fn scgf_curvature(inst: &Instrument, alpha: f64, h: f64) -> Result<f64> {
    Ok((scgf(inst, alpha + h)?.1 - scgf(inst, alpha - h)?.1) / (2.0 * h))
}

#[derive(Debug, Clone, Serialize)]
pub struct LdpTable {
    pub alphas: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_prime: Vec<f64>,
    /// Grid points where the leading eigenvalue was not simple.
    pub skipped: Vec<f64>,
    pub xs: Vec<f64>,
    pub rate: Vec<f64>,
    /// `x` is an exposed point: `Λ'' > 0` at the maximizing `α`.
    pub exposed: Vec<bool>,
}

pub fn ldp(inst: &Instrument, alphas: &[f64], xs: &[f64]) -> Result<LdpTable> {
    let mut t = LdpTable {
        alphas: Vec::new(),
        lambda: Vec::new(),
        lambda_prime: Vec::new(),
        skipped: Vec::new(),
        xs: Vec::new(),
        rate: Vec::new(),
        exposed: Vec::new(),
    };
    for &a in alphas {
        match scgf(inst, a) {
            Ok((l, dl)) => {
                t.alphas.push(a);
                t.lambda.push(l);
                t.lambda_prime.push(dl);
            }
            Err(Error::Degenerate(_)) => t.skipped.push(a),
            Err(e) => return Err(e),
        }
    }
    for &x in xs {
        let (rate, a) = legendre(inst, x)?;
        t.xs.push(x);
        t.rate.push(rate);
        t.exposed.push(scgf_curvature(inst, a, 1e-4)? > 0.0);
    }
    Ok(t)
}

/// Two spins with `H_S = H_P = diag(1, −1)`, coupling `λ(a*⊗a + a⊗a*)` with
/// `a = |φ₂><φ₁|`, and incoming state `ω_in = diag(p, 1 − p)`.
pub fn spin_spin_model(p: f64, lambda: f64, tau: f64) -> Result<RIModel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in [0, 1]")));
    }
    let h = from_rows(&[vec![ONE, ZERO], vec![ZERO, -ONE]]);
    let a = from_rows(&[vec![ZERO, ZERO], vec![ONE, ZERO]]);
    let ad = a.adjoint();
    let v = (kron(&ad, &a) + kron(&a, &ad)) * c(lambda, 0.0);
    RIModel::new(h.clone(), h, v, tau, DensityMatrix::diagonal(&[p, 1.0 - p])?)
}

/// Spin measured along the direction at angle `θ` from `φ₁`.
pub fn spin_angle_observable(theta: f64) -> CMatrix {
    let (ct, st) = (theta.cos(), theta.sin());
    from_rows(&[vec![c(ct, 0.0), c(st, 0.0)], vec![c(st, 0.0), c(-ct, 0.0)]])
}

/// Matrix of `A ↦ Tr_P[(I⊗ω_in) U*(A⊗X)U]` on the basis `|i><j|` ordered row-major.
pub fn dual_step_matrix(model: &RIModel, x: &CMatrix) -> Result<CMatrix> {
    let (d, p) = (model.dim_s(), model.dim_e());
    let u = model.propagator()?;
    let rho = kron(&identity(d), model.rho_e.matrix());
    let mut out = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let a = crate::qops::unit(d, i, j);
            let y = crate::qops::partial_trace(&(&rho * u.adjoint() * kron(&a, x) * &u), &[d, p], 0)?;
            for k in 0..d {
                for l in 0..d {
                    out[(k * d + l, i * d + j)] = y[(k, l)];
                }
            }
        }
    }
    Ok(out)
}

/// Closed-form single-step operator of the spin-spin model for probe observable `x`.
pub fn spin_spin_explicit(p: f64, x: &CMatrix, lambda: f64, tau: f64) -> CMatrix {
    let (s, co) = ((lambda * tau).sin(), (lambda * tau).cos());
    let a = c(-s * s, 0.0);
    let b = c(0.0, -s * co);
    let w = x[(0, 0)] * p + x[(1, 1)] * (1.0 - p);
    let e = C64::from_polar(1.0, 2.0 * tau);
    let ei = e.conj();
    let (x11, x12, x21, x22) = (x[(0, 0)], x[(0, 1)], x[(1, 0)], x[(1, 1)]);
    let q = 1.0 - p;
    let is = I * s;
    let rows = vec![
        vec![x22 * a * q + w, x21 * b * q, -x12 * b * q, -x11 * a * q],
        vec![-x12 * e * is * p, e * w * co, ZERO, x12 * e * is * q],
        vec![x21 * ei * is * p, ZERO, ei * w * co, -x21 * ei * is * q],
        vec![-x22 * a * p, -x21 * b * p, x12 * b * p, x11 * a * p + w],
    ];
    from_rows(&rows)
}
