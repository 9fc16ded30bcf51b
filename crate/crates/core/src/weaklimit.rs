//! Scaling limits of the Heisenberg transfer operator for a system coupled to
//! `(n+1)`-level probes: second-order expansion, weak-coupling generator and
//! the Lindbladian obtained in the `λ²τ = 1`, `τ → 0` regime.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{
    c, check_hermitian, eigh, from_real_diag, gibbs, identity, kron, max_abs, op_norm, propagator, CMatrix,
    Superoperator, C64, ZERO,
};
use crate::rdm::RIModel;
use crate::spectral::{linear_slope, sharp};

/// Default tolerance for grouping the phases `e^{iτ(E_a − E_b)}` in `#`.
pub const DEFAULT_TOL_CLUSTER: f64 = 1e-9;

/// System coupled through `W = Σ V_i*⊗a_i + V_i⊗a_i*` to a probe with levels
/// `0, δ_1, .., δ_n`, where `a_i = |0><i|`.
#[derive(Debug, Clone)]
pub struct ChainCoupling {
    pub h_s: CMatrix,
    pub deltas: Vec<f64>,
    pub vs: Vec<CMatrix>,
    pub beta: f64,
    pub tau: f64,
    pub lambda: f64,
}

impl ChainCoupling {
    pub fn new(h_s: CMatrix, deltas: Vec<f64>, vs: Vec<CMatrix>, beta: f64, tau: f64, lambda: f64) -> Result<Self> {
        let c = ChainCoupling { h_s, deltas, vs, beta, tau, lambda };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_hermitian(&self.h_s, 1e-12)?;
        if self.deltas.is_empty() {
            return Err(Error::InvalidParameter("at least one excited probe level is required".into()));
        }
        if self.vs.len() != self.deltas.len() {
            return Err(Error::DimensionMismatch { expected: self.deltas.len(), got: self.vs.len() });
        }
        let d = self.dim_s();
        for v in &self.vs {
            if v.nrows() != d || v.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.nrows() });
            }
        }
        if !self.deltas.iter().all(|x| x.is_finite()) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter("probe levels and beta must be finite".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("tau = {}, lambda = {}", self.tau, self.lambda)));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        ChainCoupling { lambda, ..self.clone() }
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        ChainCoupling { tau, ..self.clone() }
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        ChainCoupling { beta, ..self.clone() }
    }

    pub fn n(&self) -> usize {
        self.deltas.len()
    }

    pub fn dim_s(&self) -> usize {
        self.h_s.nrows()
    }

    pub fn dim_probe(&self) -> usize {
        self.n() + 1
    }

    /// Probe energies with `δ_0 = 0` prepended.
    pub fn levels(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.deltas.iter().copied()).collect()
    }

    /// Boltzmann weights `e^{−βδ_j}`, `j = 0..n`.
    pub fn weights(&self) -> Vec<f64> {
        self.levels().iter().map(|d| (-self.beta * d).exp()).collect()
    }

    pub fn z(&self) -> f64 {
        self.weights().iter().sum()
    }

    pub fn probe_lowering(&self, i: usize) -> CMatrix {
        let p = self.dim_probe();
        let mut a = CMatrix::zeros(p, p);
        a[(0, i)] = c(1.0, 0.0);
        a
    }

    pub fn h_probe(&self) -> CMatrix {
        from_real_diag(&self.levels())
    }

    /// `H(0) = h_S⊗I + I⊗h_E`.
    pub fn h0(&self) -> CMatrix {
        kron(&self.h_s, &identity(self.dim_probe())) + kron(&identity(self.dim_s()), &self.h_probe())
    }

    pub fn w(&self) -> CMatrix {
        let (d, p) = (self.dim_s(), self.dim_probe());
        let mut w = CMatrix::zeros(d * p, d * p);
        for (i, v) in self.vs.iter().enumerate() {
            let a = self.probe_lowering(i + 1);
            w += kron(&v.adjoint(), &a) + kron(v, &a.adjoint());
        }
        w
    }

    /// The same coupling as a repeated interaction model with a Gibbs probe.
    pub fn model(&self) -> Result<RIModel> {
        let h_e = self.h_probe();
        let rho_e = gibbs(&h_e, self.beta)?;
        RIModel::new(self.h_s.clone(), h_e, self.w() * c(self.lambda, 0.0), self.tau, rho_e)
    }

    /// `‖PWP‖` in max-entry norm, with `P` the projection on the probe ground state.
    pub fn off_diagonal_defect(&self) -> f64 {
        max_abs(&block(&self.w(), self.dim_s(), self.dim_probe(), 0, 0))
    }

    fn check_off_diagonal(&self) -> Result<()> {
        let defect = self.off_diagonal_defect();
        if defect > 1e-12 {
            return Err(Error::NotOffDiagonal { defect });
        }
        Ok(())
    }
}

/// System block `(l, m)` of an operator on `system ⊗ probe`.
pub fn block(x: &CMatrix, d: usize, p: usize, l: usize, m: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |s, t| x[(s * p + l, t * p + m)])
}

/// `B ↦ Z⁻¹ Σ_{l,m} e^{−βδ_m} U_{lm}* B U_{lm}` with the blocks of `e^{−iτ(H(0)+λW)}`.
pub fn heisenberg_transfer(cp: &ChainCoupling) -> Result<Superoperator> {
    cp.validate()?;
    let (d, p) = (cp.dim_s(), cp.dim_probe());
    let h = cp.h0() + cp.w() * c(cp.lambda, 0.0);
    let u = propagator(&h, cp.tau)?;
    let z = cp.z();
    let mut acc = Superoperator::zero(d);
    for (m, wm) in cp.weights().into_iter().enumerate() {
        for l in 0..p {
            let b = block(&u, d, p, l, m);
            acc = acc.add(&Superoperator::sandwich(&b.adjoint(), &b).scale(c(wm / z, 0.0)));
        }
    }
    Ok(acc)
}

/// `U₀₀(0) = e^{iτ[h_S,·]}`.
pub fn free_transfer(cp: &ChainCoupling) -> Result<Superoperator> {
    let u = propagator(&cp.h_s, cp.tau)?;
    Ok(Superoperator::sandwich(&u.adjoint(), &u))
}

/// First divided difference of `x ↦ e^{−iτx}`.
pub fn divided_difference_1(tau: f64, x: f64, y: f64) -> C64 {
    let h = 0.5 * tau * (x - y);
    let sinc = if h.abs() < 1e-8 { 1.0 - h * h / 6.0 } else { h.sin() / h };
    C64::from_polar(1.0, -0.5 * tau * (x + y)) * c(0.0, -tau * sinc)
}

/// Second divided difference of `x ↦ e^{−iτx}`.
pub fn divided_difference_2(tau: f64, x: f64, y: f64, z: f64) -> C64 {
    let mut v = [x, y, z];
    v.sort_by(|a, b| a.total_cmp(b));
    let [lo, mid, hi] = v;
    if tau * (hi - lo) > 1e-2 {
        return (divided_difference_1(tau, mid, hi) - divided_difference_1(tau, lo, mid)) / (hi - lo);
    }
    // e^{−iτ lo} Σ_{k≥2} (−iτ)^k/k! h_{k−2}(a, b) with a, b the offsets from lo.
    let (a, b) = (mid - lo, hi - lo);
    let ct = c(0.0, -tau);
    let mut sum = ZERO;
    let mut coef = ct * ct / c(2.0, 0.0);
    let mut pa = vec![1.0];
    for k in 2..40 {
        let m = k - 2;
        let hk: f64 = (0..=m).map(|i| pa[i] * b.powi((m - i) as i32)).sum();
        let term = coef * hk;
        sum += term;
        if term.norm() < 1e-18 * sum.norm().max(1e-300) {
            break;
        }
        pa.push(pa[m] * a);
        coef = coef * ct / c((k + 1) as f64, 0.0);
    }
    C64::from_polar(1.0, -tau * lo) * sum
}

/// Coefficients of `λ` and `λ²` in `e^{−iτ(H(0)+λW)}`, and the operator `T_β`.
#[derive(Debug, Clone)]
pub struct SecondOrder {
    pub f: CMatrix,
    pub g: CMatrix,
    pub t_beta: Superoperator,
}

pub fn second_order_terms(cp: &ChainCoupling) -> Result<SecondOrder> {
    cp.validate()?;
    cp.check_off_diagonal()?;
    let (d, p) = (cp.dim_s(), cp.dim_probe());
    let n = d * p;
    let eig = eigh(&cp.h_s)?;
    let basis = kron(&eig.vectors, &identity(p));
    let levels = cp.levels();
    let energies: Vec<f64> = (0..n).map(|k| eig.values[k / p] + levels[k % p]).collect();
    let w = basis.adjoint() * cp.w() * &basis;
    let tau = cp.tau;
    let f = CMatrix::from_fn(n, n, |a, b| w[(a, b)] * divided_difference_1(tau, energies[a], energies[b]));
    let g = CMatrix::from_fn(n, n, |a, cc| {
        (0..n)
            .map(|b| w[(a, b)] * w[(b, cc)] * divided_difference_2(tau, energies[a], energies[b], energies[cc]))
            .sum()
    });
    let f = &basis * f * basis.adjoint();
    let g = &basis * g * basis.adjoint();
    let e = propagator(&cp.h0(), tau)?;
    let mut t = Superoperator::zero(d);
    for (m, wm) in cp.weights().into_iter().enumerate() {
        let emm = block(&e, d, p, m, m);
        let gmm = block(&g, d, p, m, m);
        let mut term = Superoperator::sandwich(&gmm.adjoint(), &emm).add(&Superoperator::sandwich(&emm.adjoint(), &gmm));
        for l in 0..p {
            let flm = block(&f, d, p, l, m);
            term = term.add(&Superoperator::sandwich(&flm.adjoint(), &flm));
        }
        t = t.add(&term.scale(c(wm, 0.0)));
    }
    Ok(SecondOrder { f, g, t_beta: t })
}

/// `B ↦ Σ L B L* − ½(L L* B + B L L*)`.
pub fn heisenberg_dissipator(ls: &[CMatrix], d: usize) -> Superoperator {
    let mut acc = Superoperator::zero(d);
    for l in ls {
        let ll = l * l.adjoint();
        acc = acc
            .add(&Superoperator::sandwich(l, &l.adjoint()))
            .sub(&Superoperator::sandwich(&ll, &identity(d)).scale(c(0.5, 0.0)))
            .sub(&Superoperator::sandwich(&identity(d), &ll).scale(c(0.5, 0.0)));
    }
    acc
}

/// Jump operators `e^{−βδ_j/2}Z^{−1/2}V_j` followed by `Z^{−1/2}V_j*`.
pub fn lindblad_operators(cp: &ChainCoupling) -> Vec<CMatrix> {
    let z = cp.z();
    let down = cp.vs.iter().zip(&cp.deltas).map(|(v, dl)| v * c((-cp.beta * dl / 2.0).exp() / z.sqrt(), 0.0));
    let up = cp.vs.iter().map(|v| v.adjoint() * c(1.0 / z.sqrt(), 0.0));
    down.chain(up).collect()
}

/// Dissipator written term by term in `V_m`.
pub fn dissipator(cp: &ChainCoupling) -> Superoperator {
    let d = cp.dim_s();
    let z = cp.z();
    let id = identity(d);
    let mut acc = Superoperator::zero(d);
    for (v, dl) in cp.vs.iter().zip(&cp.deltas) {
        let vd = v.adjoint();
        let vvd = v * &vd;
        let vdv = &vd * v;
        let emit = Superoperator::sandwich(v, &vd)
            .sub(&Superoperator::sandwich(&vvd, &id).scale(c(0.5, 0.0)))
            .sub(&Superoperator::sandwich(&id, &vvd).scale(c(0.5, 0.0)));
        let absorb = Superoperator::sandwich(&vd, v)
            .sub(&Superoperator::sandwich(&vdv, &id).scale(c(0.5, 0.0)))
            .sub(&Superoperator::sandwich(&id, &vdv).scale(c(0.5, 0.0)));
        acc = acc.add(&emit.scale(c((-cp.beta * dl).exp(), 0.0))).add(&absorb);
    }
    acc.scale(c(1.0 / z, 0.0))
}

/// Zero-temperature generator `i[h_S,·] + Σ V*·V − ½{V*V,·}`.
pub fn gamma_infinity(h_s: &CMatrix, vs: &[CMatrix]) -> Superoperator {
    let d = h_s.nrows();
    let ls: Vec<CMatrix> = vs.iter().map(|v| v.adjoint()).collect();
    Superoperator::commutator_map(h_s, c(0.0, 1.0)).add(&heisenberg_dissipator(&ls, d))
}

#[derive(Debug, Clone)]
pub struct Generators {
    /// `Z⁻¹(U₀₀(0)⁻¹T_β)#`.
    pub weak: Superoperator,
    pub dissipator: Superoperator,
    /// `i[h_S,·] + Γ_β`.
    pub lindbladian: Superoperator,
    pub jump_operators: Vec<CMatrix>,
}

pub fn generators(cp: &ChainCoupling, tol_cluster: f64) -> Result<Generators> {
    let so = second_order_terms(cp)?;
    let inv = free_transfer(cp)?.dual();
    let k = inv.compose(&so.t_beta).scale(c(1.0 / cp.z(), 0.0));
    let weak = sharp(&k, &cp.h_s, cp.tau, tol_cluster)?;
    let diss = dissipator(cp);
    let lindbladian = Superoperator::commutator_map(&cp.h_s, c(0.0, 1.0)).add(&diss);
    Ok(Generators { weak, dissipator: diss, lindbladian, jump_operators: lindblad_operators(cp) })
}

/// `‖Z⁻¹τ⁻²U₀₀(0)⁻¹T_β(τ) − Γ_β‖` along a sweep of interaction times.
pub fn small_time_defects(cp: &ChainCoupling, taus: &[f64]) -> Result<Vec<(f64, f64)>> {
    let diss = dissipator(cp);
    taus.par_iter()
        .map(|&tau| {
            let ct = cp.with_tau(tau);
            let so = second_order_terms(&ct)?;
            let k = free_transfer(&ct)?.dual().compose(&so.t_beta).scale(c(1.0 / (ct.z() * tau * tau), 0.0));
            Ok((tau, op_norm(k.sub(&diss).matrix())))
        })
        .collect()
}

pub fn exp_superop(s: &Superoperator, t: f64) -> Result<Superoperator> {
    Superoperator::from_matrix((s.matrix() * c(t, 0.0)).exp())
}

/// Largest `‖Φ(U)‖` over the identity and `samples` Haar unitaries. Every
/// linear map attains its norm on the unitaries, so this is a lower bound on
/// the operator norm of `Φ` on observables that is sharp for positive maps.
pub fn sampled_observable_norm(map: &Superoperator, samples: usize, seed: u64) -> f64 {
    let d = map.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = op_norm(&map.apply(&identity(d)));
    for _ in 0..samples {
        let u = haar_unitary(d, &mut rng);
        best = best.max(op_norm(&map.apply(&u)));
    }
    best
}

pub fn haar_unitary(d: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CMatrix::from_fn(d, d, |i, j| {
        if i == j && r[(i, i)].norm() > 0.0 {
            r[(i, i)] / r[(i, i)].norm()
        } else if i == j {
            c(1.0, 0.0)
        } else {
            ZERO
        }
    });
    q * phases
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Regime {
    WeakCoupling { lambdas: Vec<f64>, t: f64 },
    Critical { taus: Vec<f64>, t: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub param: f64,
    pub steps: usize,
    /// `|steps · x − t|`, where `x` is `λ²` or `τ`.
    pub rounding: f64,
    /// `‖e^{tΓ} − e^{steps·x·Γ}‖`.
    pub rounding_error: f64,
    pub error: f64,
    /// Critical regime only: `‖U_β(1/√τ, τ)^{steps} − e^{tΓ}‖`.
    pub semigroup_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    pub fitted_order: f64,
    /// `c` in the fitted law `error ≈ c · param^order`.
    pub fitted_constant: f64,
    pub theoretical_order: f64,
}

/// Error table of the weak-coupling or critical scaling. Errors use the
/// spectral norm of the superoperator matrix.
pub fn scaling_study(cp: &ChainCoupling, regime: &Regime, tol_cluster: f64) -> Result<ScalingTable> {
    let gens = generators(cp, tol_cluster)?;
    let d = cp.dim_s();
    let (rows, order) = match regime {
        Regime::WeakCoupling { lambdas, t } => {
            let target = exp_superop(&gens.weak, *t)?;
            let free = free_transfer(cp)?;
            let rows = lambdas
                .par_iter()
                .map(|&lam| -> Result<ScalingRow> {
                    if lam == 0.0 {
                        let err = op_norm(Superoperator::identity(d).sub(&exp_superop(&gens.weak, 0.0)?).matrix());
                        return Ok(ScalingRow {
                            param: 0.0,
                            steps: 0,
                            rounding: *t,
                            rounding_error: f64::NAN,
                            error: err,
                            semigroup_error: None,
                        });
                    }
                    let x = lam * lam;
                    let steps = (t / x).round() as usize;
                    let ub = heisenberg_transfer(&cp.with_lambda(lam))?;
                    let lhs = free.dual().power(steps).compose(&ub.power(steps));
                    let eff = exp_superop(&gens.weak, steps as f64 * x)?;
                    Ok(ScalingRow {
                        param: lam,
                        steps,
                        rounding: (steps as f64 * x - t).abs(),
                        rounding_error: op_norm(target.sub(&eff).matrix()),
                        error: op_norm(lhs.sub(&target).matrix()),
                        semigroup_error: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (rows, 2.0)
        }
        Regime::Critical { taus, t } => {
            let target = exp_superop(&gens.lindbladian, *t)?;
            let rows = taus
                .par_iter()
                .map(|&tau| -> Result<ScalingRow> {
                    let ct = cp.with_tau(tau).with_lambda(1.0 / tau.sqrt());
                    let ub = heisenberg_transfer(&ct)?;
                    let diff = ub.sub(&Superoperator::identity(d)).scale(c(1.0 / tau, 0.0));
                    let steps = (t / tau).round() as usize;
                    let eff = exp_superop(&gens.lindbladian, steps as f64 * tau)?;
                    Ok(ScalingRow {
                        param: tau,
                        steps,
                        rounding: (steps as f64 * tau - t).abs(),
                        rounding_error: op_norm(target.sub(&eff).matrix()),
                        error: op_norm(diff.sub(&gens.lindbladian).matrix()),
                        semigroup_error: Some(op_norm(ub.power(steps).sub(&target).matrix())),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (rows, 1.0)
        }
    };
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.param > 0.0 && r.error > 0.0)
        .map(|r| (r.param.ln(), r.error.ln()))
        .collect();
    let (fitted_order, fitted_constant) = if pts.len() >= 2 {
        let slope = linear_slope(&pts);
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        (slope, (my - slope * mx).exp())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(ScalingTable { rows, fitted_order, fitted_constant, theoretical_order: order })
}

/// Spin instance: `h_S = E a*a`, one probe level at `E0`, `V₁ = a/2`.
pub fn spin_coupling(e: f64, e0: f64, beta: f64, tau: f64, lambda: f64) -> Result<ChainCoupling> {
    let a = crate::spinmodel::lowering();
    ChainCoupling::new(from_real_diag(&[0.0, e]), vec![e0], vec![a * c(0.5, 0.0)], beta, tau, lambda)
}
