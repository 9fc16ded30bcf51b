//! One-atom maser: a cavity mode truncated to photon numbers `{0, …, n_trunc}`
//! meeting two-level atoms through the Jaynes–Cummings coupling.
//!
//! The channel conserves the photon-number gauge, so it splits into blocks of
//! matrix units `|n><n+d|`. Rabi resonances, photon numbers `n` with `ξn+η`
//! a perfect square, cut the cavity into independent sectors.

use num_integer::Roots;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{c, gibbs, kron, trace, trace_norm, CMatrix, DensityMatrix, Superoperator, C64, ZERO};
use crate::rdm::{build_rdm, RIModel, ReducedMap};
use crate::spectral::{peripheral_info, PeripheralInfo};

/// Exact `η = p/q` and `ξ = r/s` as `[numerator, denominator]` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactEtaXi {
    pub eta: [i64; 2],
    pub xi: [i64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaserParams {
    /// Cavity frequency.
    pub e: f64,
    /// Atomic transition energy.
    pub e0: f64,
    pub lambda: f64,
    pub tau: f64,
    pub beta: f64,
    /// Highest photon number kept.
    pub n_trunc: usize,
    #[serde(default)]
    pub exact: Option<ExactEtaXi>,
}

fn ratio(p: [i64; 2]) -> Result<Ratio<i128>> {
    if p[1] == 0 {
        return Err(Error::InvalidParameter("zero denominator".into()));
    }
    Ok(Ratio::new(p[0] as i128, p[1] as i128))
}

fn ratio_f64(r: &Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `Some(k)` when `x = k²` for an integer `k ≥ 0`.
fn exact_root(x: &Ratio<i128>) -> Option<i128> {
    if !x.is_integer() || *x.numer() < 0 {
        return None;
    }
    let n = *x.numer();
    let k = n.sqrt();
    (k * k == n).then_some(k)
}

impl MaserParams {
    /// Parameters from dimensionless detuning `η` and coupling `ξ`, with `Δ ≥ 0`.
    pub fn from_eta_xi(e0: f64, eta: f64, xi: f64, tau: f64, beta: f64, n_trunc: usize) -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        let delta = two_pi * eta.sqrt() / tau;
        MaserParams { e: e0 + delta, e0, lambda: two_pi * xi.sqrt() / tau, tau, beta, n_trunc, exact: None }
    }

    /// As [`from_eta_xi`](Self::from_eta_xi) with resonances decided in exact arithmetic.
    pub fn from_exact(e0: f64, exact: ExactEtaXi, tau: f64, beta: f64, n_trunc: usize) -> Result<Self> {
        let (eta, xi) = (ratio(exact.eta)?, ratio(exact.xi)?);
        let mut p = Self::from_eta_xi(e0, ratio_f64(&eta), ratio_f64(&xi), tau, beta, n_trunc);
        p.exact = Some(exact);
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trunc < 2 {
            return Err(Error::InvalidParameter("n_trunc must be at least 2".into()));
        }
        if !(self.tau > 0.0 && self.e0 > 0.0 && self.e.is_finite() && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter("need tau, E0 > 0 and finite E, lambda".into()));
        }
        if let Some(x) = &self.exact {
            let (eta, xi) = (ratio(x.eta)?, ratio(x.xi)?);
            if eta < Ratio::from_integer(0) || xi <= Ratio::from_integer(0) {
                return Err(Error::InvalidParameter("need eta >= 0 and xi > 0".into()));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n_trunc + 1
    }

    pub fn delta(&self) -> f64 {
        self.e - self.e0
    }

    pub fn eta(&self) -> f64 {
        match &self.exact {
            Some(x) => x.eta[0] as f64 / x.eta[1] as f64,
            None => (self.delta() * self.tau / (2.0 * std::f64::consts::PI)).powi(2),
        }
    }

    pub fn xi(&self) -> f64 {
        match &self.exact {
            Some(x) => x.xi[0] as f64 / x.xi[1] as f64,
            None => (self.lambda * self.tau / (2.0 * std::f64::consts::PI)).powi(2),
        }
    }

    pub fn z(&self) -> f64 {
        1.0 + (-self.beta * self.e0).exp()
    }

    pub fn beta_star(&self) -> f64 {
        self.beta * self.e0 / self.e
    }

    /// Exact integer root of `ξn+η` when the inputs are rational.
    fn exact_rabi_root(&self, n: usize) -> Option<i128> {
        let x = self.exact?;
        let v = ratio(x.xi).ok()? * Ratio::from_integer(n as i128) + ratio(x.eta).ok()?;
        exact_root(&v)
    }

    /// `(sin(π√(ξn+η)), cos(π√(ξn+η)), √(ξn+η))`, exact at rational resonances.
    fn trig(&self, n: usize) -> (f64, f64, f64) {
        let s = (self.xi() * n as f64 + self.eta()).sqrt();
        match self.exact_rabi_root(n) {
            Some(k) => (0.0, if k % 2 == 0 { 1.0 } else { -1.0 }, s),
            None => {
                let a = std::f64::consts::PI * s;
                (a.sin(), a.cos(), s)
            }
        }
    }

    /// `sin(π s)/s` with its limit `π` at `s = 0`.
    fn sin_over(&self, n: usize) -> f64 {
        let (sn, _, s) = self.trig(n);
        if s < 1e-12 {
            std::f64::consts::PI
        } else {
            sn / s
        }
    }

    /// `C(n) = cos(π√(ξn+η)) + i√η sin(π√(ξn+η))/√(ξn+η)`.
    pub fn c_of(&self, n: usize) -> C64 {
        let (_, co, _) = self.trig(n);
        c(co, self.eta().sqrt() * self.sin_over(n))
    }

    /// `S(n) = √ξ sin(π√(ξn+η))/√(ξn+η)`.
    pub fn s_of(&self, n: usize) -> f64 {
        self.xi().sqrt() * self.sin_over(n)
    }

    /// `D(n) = Z⁻¹ sin²(π√(ξn+η)) ξn/(ξn+η)`.
    pub fn d_of(&self, n: usize) -> f64 {
        let (sn, _, s) = self.trig(n);
        if n == 0 || sn == 0.0 {
            return 0.0;
        }
        sn * sn * self.xi() * n as f64 / (s * s) / self.z()
    }
}

fn lowering(d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| if j == i + 1 { c((j as f64).sqrt(), 0.0) } else { ZERO })
}

/// Jaynes–Cummings model on the truncated cavity with a thermal atom.
pub fn jc_model(p: &MaserParams) -> Result<RIModel> {
    p.validate()?;
    let d = p.dim();
    let a = lowering(d);
    let b = crate::spinmodel::lowering();
    let n = CMatrix::from_fn(d, d, |i, j| if i == j { c(i as f64, 0.0) } else { ZERO });
    let h_e = crate::spinmodel::number() * c(p.e0, 0.0);
    let v = (kron(&a.adjoint(), &b) + kron(&a, &b.adjoint())) * c(p.lambda / 2.0, 0.0);
    let rho_e = gibbs(&h_e, p.beta)?;
    RIModel::new(n * c(p.e, 0.0), h_e, v, p.tau, rho_e)
}

/// Partial-trace reduced map of [`jc_model`].
pub fn jc_numeric(p: &MaserParams) -> Result<ReducedMap> {
    build_rdm(&jc_model(p)?)
}

/// Closed-form maser channel `ρ ↦ Σ V ρ V*`.
#[derive(Debug, Clone)]
pub struct MaserMap {
    pub params: MaserParams,
    /// `[V00, V10, V01, V11]`.
    pub kraus: [CMatrix; 4],
    /// `max_n |1 − (Σ V*V)_{nn}|`, carried entirely by the top level.
    pub leakage: f64,
}

pub fn jc_rdm(p: &MaserParams) -> Result<MaserMap> {
    p.validate()?;
    let d = p.dim();
    let g = 1.0 / p.z().sqrt();
    let x = (-p.beta * p.e0 / 2.0).exp() * g;
    let phase = |n: usize| C64::from_polar(1.0, -p.tau * p.e * n as f64);
    let diag = |f: &dyn Fn(usize) -> C64| CMatrix::from_fn(d, d, |i, j| if i == j { phase(i) * f(i) } else { ZERO });
    let a = lowering(d);
    let v00 = diag(&|n| p.c_of(n).conj() * g);
    let v10 = diag(&|n| c(g * p.s_of(n + 1), 0.0)) * &a;
    let v01 = diag(&|n| c(x * p.s_of(n), 0.0)) * a.adjoint();
    let v11 = diag(&|n| p.c_of(n + 1) * x);
    let kraus = [v00, v10, v01, v11];
    let s = kraus.iter().fold(CMatrix::zeros(d, d), |acc, k| acc + k.adjoint() * k);
    let leakage = (0..d).map(|n| (s[(n, n)].re - 1.0).abs()).fold(0.0, f64::max);
    Ok(MaserMap { params: *p, kraus, leakage })
}

impl MaserMap {
    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        self.kraus.iter().fold(CMatrix::zeros(x.nrows(), x.ncols()), |acc, k| acc + k * x * k.adjoint())
    }

    /// Dense superoperator; size grows as `dim⁴`.
    pub fn superoperator(&self) -> Result<Superoperator> {
        Superoperator::from_kraus(&self.kraus)
    }

    /// Fails when the top-level leakage exceeds `tol`.
    pub fn check_leakage(&self, tol: f64) -> Result<()> {
        if self.leakage > tol {
            return Err(Error::Leakage { leakage: self.leakage, tol });
        }
        Ok(())
    }

    /// Matrix of the channel on the span of `|n><n+d|`, indexed by the row `n`
    /// (or by `n+|d|` for `d < 0`, i.e. by the smaller photon number).
    pub fn gauge_block(&self, d: isize) -> CMatrix {
        let dim = self.dim();
        let m = dim - d.unsigned_abs().min(dim);
        let pos = |k: usize| if d >= 0 { (k, k + d as usize) } else { (k + d.unsigned_abs(), k) };
        let mut out = CMatrix::zeros(m, m);
        for col in 0..m {
            let (i, j) = pos(col);
            let mut x = CMatrix::zeros(dim, dim);
            x[(i, j)] = c(1.0, 0.0);
            let y = self.apply(&x);
            for row in 0..m {
                let (a, b) = pos(row);
                out[(row, col)] = y[(a, b)];
            }
        }
        out
    }

    /// Largest matrix element of the image of a `d`-block unit outside block `d`.
    pub fn gauge_defect(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let mut x = CMatrix::zeros(dim, dim);
                x[(i, j)] = c(1.0, 0.0);
                let y = self.apply(&x);
                for a in 0..dim {
                    for b in 0..dim {
                        if b as isize - a as isize != j as isize - i as isize {
                            worst = worst.max(y[(a, b)].norm());
                        }
                    }
                }
            }
        }
        worst
    }

    /// Peripheral spectrum of the gauge block `d`.
    pub fn block_peripheral(&self, d: isize, tol: f64) -> Result<PeripheralInfo> {
        peripheral_info(&self.gauge_block(d), tol)
    }
}

/// Part of `x` in the gauge block `d`: entries `(n, n+d)`.
pub fn gauge_component(x: &CMatrix, d: isize) -> CMatrix {
    CMatrix::from_fn(x.nrows(), x.ncols(), |i, j| if j as isize - i as isize == d { x[(i, j)] } else { ZERO })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    NonResonant,
    SimplyResonant,
    FullyResonant { degenerate: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RabiStructure {
    /// Rabi resonances in `[1, n_max]`.
    pub resonances: Vec<usize>,
    /// Inclusive photon-number ranges `(first, last)` covering `{0, …, n_max}`.
    pub sectors: Vec<(usize, usize)>,
    pub classification: Classification,
    /// Floating-point resonance test was used.
    pub approximate: bool,
    /// `n_max + 1` is a resonance, so the last sector is closed.
    pub top_closed: bool,
    /// `{n ∈ {0}∪R : n+1 ∈ R}`.
    pub consecutive: Vec<usize>,
}

impl RabiStructure {
    pub fn sector_of(&self, n: usize) -> Option<usize> {
        self.sectors.iter().position(|&(a, b)| a <= n && n <= b)
    }

    /// Sector `k` is finite when it is followed by a resonance.
    pub fn is_finite(&self, k: usize) -> bool {
        k + 1 < self.sectors.len() || self.top_closed
    }

    /// Differences `n − m` of distinct members of the consecutive-pair set.
    pub fn degenerate_offsets(&self) -> Vec<isize> {
        let mut out = Vec::new();
        for &n in &self.consecutive {
            for &m in &self.consecutive {
                if n != m {
                    out.push(n as isize - m as isize);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Projector `P_k` on the truncated cavity.
    pub fn projector(&self, k: usize, dim: usize) -> CMatrix {
        let (a, b) = self.sectors[k];
        CMatrix::from_fn(dim, dim, |i, j| if i == j && a <= i && i <= b { c(1.0, 0.0) } else { ZERO })
    }
}

fn is_resonance(p: &MaserParams, n: usize) -> bool {
    match p.exact {
        Some(_) => p.exact_rabi_root(n).is_some(),
        None => {
            let x = p.xi() * n as f64 + p.eta();
            let k = x.sqrt().round();
            (x - k * k).abs() < 1e-9
        }
    }
}

/// Resonances and sectors of the truncated cavity, classified over the window `[1, n_max]`.
pub fn rabi_resonances(p: &MaserParams, n_max: usize) -> Result<RabiStructure> {
    if !(p.xi() > 0.0) {
        return Err(Error::InvalidParameter("xi must be positive".into()));
    }
    let resonances: Vec<usize> = (1..=n_max).filter(|&n| is_resonance(p, n)).collect();
    let mut sectors = Vec::new();
    let mut start = 0;
    for &r in &resonances {
        sectors.push((start, r - 1));
        start = r;
    }
    sectors.push((start, n_max));
    let in_r = |n: usize| resonances.binary_search(&n).is_ok();
    let consecutive: Vec<usize> =
        std::iter::once(0).chain(resonances.iter().cloned()).filter(|&n| in_r(n + 1)).collect();
    let approximate = p.exact.is_none();
    let classification = match resonances.len() {
        0 => Classification::NonResonant,
        1 if approximate => Classification::SimplyResonant,
        _ => Classification::FullyResonant { degenerate: consecutive.len() >= 2 },
    };
    Ok(RabiStructure {
        resonances,
        sectors,
        classification,
        approximate,
        top_closed: is_resonance(p, n_max + 1),
        consecutive,
    })
}

/// Thermal states of the sectors.
#[derive(Debug, Clone)]
pub struct SectorStates {
    pub states: Vec<DensityMatrix>,
    /// Population of the top level in the last state; zero when the last sector is closed.
    pub tail_weight: f64,
}

/// `ρ⁽ᵏ⁾ = e^{−βE₀N}P_k / Tr(e^{−βE₀N}P_k)`, equal to `e^{−β*EN}P_k` normalized.
pub fn sector_invariant_states(p: &MaserParams, s: &RabiStructure) -> Result<SectorStates> {
    let dim = s.sectors.last().map(|x| x.1 + 1).unwrap_or(0);
    let last = s.sectors.len() - 1;
    if !s.is_finite(last) && p.beta <= 0.0 {
        return Err(Error::NoInvariantState(format!(
            "beta = {} on the cutoff-terminated sector starting at n = {}",
            p.beta, s.sectors[last].0
        )));
    }
    let mut states = Vec::with_capacity(s.sectors.len());
    let mut tail = 0.0;
    for (k, &(a, b)) in s.sectors.iter().enumerate() {
        let w: Vec<f64> = (a..=b).map(|n| (-p.beta * p.e0 * (n - a) as f64).exp()).collect();
        let z: f64 = w.iter().sum();
        let mut diag = vec![0.0; dim];
        for (n, wn) in (a..=b).zip(&w) {
            diag[n] = wn / z;
        }
        if k == last && !s.is_finite(k) {
            tail = diag[b];
        }
        states.push(DensityMatrix::diagonal(&diag)?);
    }
    Ok(SectorStates { states, tail_weight: tail })
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxReport {
    pub structure: RabiStructure,
    /// `ρ₀(P_k)`.
    pub weights: Vec<f64>,
    /// `max_{n,k} |ρ(n)(P_k) − ρ₀(P_k)|`.
    pub weight_drift: f64,
    /// `‖(1/n)Σ_{m=1}^n ρ(m) − Σ_k ρ₀(P_k)ρ⁽ᵏ⁾‖₁`.
    pub ergodic_distances: Vec<f64>,
    /// `‖ρ(n) − Σ_k ρ₀(P_k)ρ⁽ᵏ⁾‖₁`.
    pub mixing_distances: Vec<f64>,
    /// `1 − Tr ρ(N)`.
    pub trace_loss: f64,
    pub tail_weight: f64,
}

/// Gauge blocks `d` carrying a non-diagonal fixed point.
pub fn non_diagonal_fixed_points(map: &MaserMap, s: &RabiStructure, tol: f64) -> Result<Vec<isize>> {
    let offsets: Vec<isize> = s.degenerate_offsets().into_iter().filter(|&d| d > 0).collect();
    let found: Vec<Result<Option<isize>>> = offsets
        .par_iter()
        .map(|&d| Ok((map.block_peripheral(d, tol)?.one_cluster_dim > 0).then_some(d)))
        .collect();
    Ok(found.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

/// Ergodic-mean relaxation to `Σ_k ρ₀(P_k)ρ⁽ᵏ⁾`.
///
/// Degenerate structures are accepted only when no gauge block `d ∈ 𝒟` has
/// the eigenvalue 1.
pub fn relax_in_mean(p: &MaserParams, rho0: &DensityMatrix, n: usize) -> Result<RelaxReport> {
    let dim = p.dim();
    if rho0.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: rho0.dim() });
    }
    let structure = rabi_resonances(p, p.n_trunc)?;
    let map = jc_rdm(p)?;
    if let Classification::FullyResonant { degenerate: true } = structure.classification {
        let bad = non_diagonal_fixed_points(&map, &structure, 1e-9)?;
        if !bad.is_empty() {
            return Err(Error::Degenerate(format!(
                "gauge blocks {bad:?} have the eigenvalue 1, so the ergodic limit is not diagonal"
            )));
        }
    }
    let sectors = sector_invariant_states(p, &structure)?;
    let projectors: Vec<CMatrix> = (0..structure.sectors.len()).map(|k| structure.projector(k, dim)).collect();
    let weight = |x: &CMatrix, k: usize| trace(&(&projectors[k] * x)).re;
    let weights: Vec<f64> = (0..projectors.len()).map(|k| weight(rho0.matrix(), k)).collect();
    let target = sectors
        .states
        .iter()
        .zip(&weights)
        .fold(CMatrix::zeros(dim, dim), |acc, (s, w)| acc + s.matrix() * c(*w, 0.0));
    let mut rho = rho0.matrix().clone();
    let mut acc = CMatrix::zeros(dim, dim);
    let mut drift: f64 = 0.0;
    let mut ergodic_distances = Vec::with_capacity(n);
    let mut mixing_distances = Vec::with_capacity(n);
    for m in 1..=n {
        rho = map.apply(&rho);
        acc += &rho;
        for (k, w) in weights.iter().enumerate() {
            drift = drift.max((weight(&rho, k) - w).abs());
        }
        ergodic_distances.push(trace_norm(&(&acc / c(m as f64, 0.0) - &target)));
        mixing_distances.push(trace_norm(&(&rho - &target)));
    }
    Ok(RelaxReport {
        structure,
        weights,
        weight_drift: drift,
        ergodic_distances,
        mixing_distances,
        trace_loss: 1.0 - trace(&rho).re,
        tail_weight: sectors.tail_weight,
    })
}
