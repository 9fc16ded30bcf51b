//! Coined quantum walks on `Z^d` whose coin is redrawn i.i.d. at every step.
//!
//! The coin space is `C^{2d}`. Basis index `2(k-1)` carries the label `+k` and
//! index `2(k-1)+1` carries `-k`, for `k = 1..d`. One step is `U(C) = S (C ⊗ 1)`
//! where the shift `S` moves coin component `τ` by the jump `r(τ)`.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{c, eigenvalues, eigh, kron, matrix_serde, max_abs, CMatrix, CVector, DensityMatrix, C64, ZERO};

pub const MAX_LATTICE_DIM: usize = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoinAtom {
    #[serde(with = "matrix_serde")]
    pub coin: CMatrix,
    pub prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSpec {
    pub d: usize,
    /// `jumps[i]` is `r(τ)` for coin index `i`.
    pub jumps: Vec<Vec<i64>>,
    pub law: Vec<CoinAtom>,
    pub coin_state: DensityMatrix,
}

/// `r(τ) = sign(τ) e_{|τ|}` in the coin ordering of this module.
pub fn symmetric_jumps(d: usize) -> Vec<Vec<i64>> {
    (0..2 * d)
        .map(|i| {
            let mut r = vec![0; d];
            r[i / 2] = if i % 2 == 0 { 1 } else { -1 };
            r
        })
        .collect()
}

pub fn hadamard() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)])
}

/// Uniform law over `diag(e^{iφ}, 1) · base` for the given phases.
pub fn random_phase_law(base: &CMatrix, phases: &[f64]) -> Vec<CoinAtom> {
    let p = 1.0 / phases.len() as f64;
    phases
        .iter()
        .map(|&ph| {
            let mut coin = base.clone();
            let z = C64::from_polar(1.0, ph);
            for j in 0..coin.ncols() {
                coin[(0, j)] *= z;
            }
            CoinAtom { coin, prob: p }
        })
        .collect()
}

impl WalkSpec {
    pub fn new(d: usize, jumps: Vec<Vec<i64>>, law: Vec<CoinAtom>, coin_state: DensityMatrix) -> Result<Self> {
        let s = WalkSpec { d, jumps, law, coin_state };
        s.validate()?;
        Ok(s)
    }

    /// Deterministic one-dimensional walk with symmetric jumps.
    pub fn deterministic(coin: CMatrix, coin_state: DensityMatrix) -> Result<Self> {
        WalkSpec::new(1, symmetric_jumps(1), vec![CoinAtom { coin, prob: 1.0 }], coin_state)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > MAX_LATTICE_DIM {
            return Err(Error::InvalidParameter(format!("lattice dimension {} not in 1..={MAX_LATTICE_DIM}", self.d)));
        }
        let dc = self.coin_dim();
        if self.jumps.len() != dc {
            return Err(Error::DimensionMismatch { expected: dc, got: self.jumps.len() });
        }
        for r in &self.jumps {
            if r.len() != self.d {
                return Err(Error::DimensionMismatch { expected: self.d, got: r.len() });
            }
            if r.iter().all(|&x| x == 0) {
                return Err(Error::InvalidParameter("jump r(τ) must be nonzero".into()));
            }
        }
        if self.law.is_empty() {
            return Err(Error::InvalidParameter("empty coin law".into()));
        }
        let mut total = 0.0;
        for a in &self.law {
            if a.coin.nrows() != dc || a.coin.ncols() != dc {
                return Err(Error::DimensionMismatch { expected: dc, got: a.coin.nrows() });
            }
            if !(a.prob >= 0.0) {
                return Err(Error::NegativeProbability(a.prob));
            }
            let defect = max_abs(&(a.coin.adjoint() * &a.coin - CMatrix::identity(dc, dc)));
            if defect > 1e-12 {
                return Err(Error::InvalidParameter(format!("coin is not unitary (defect {defect:.3e})")));
            }
            total += a.prob;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("coin probabilities sum to {total}")));
        }
        if self.coin_state.dim() != dc {
            return Err(Error::DimensionMismatch { expected: dc, got: self.coin_state.dim() });
        }
        Ok(())
    }

    pub fn coin_dim(&self) -> usize {
        2 * self.d
    }

    /// `r̄ = (2d)^{-1} Σ_τ r(τ)`.
    pub fn mean_jump(&self) -> Vec<f64> {
        let dc = self.coin_dim() as f64;
        (0..self.d).map(|i| self.jumps.iter().map(|r| r[i] as f64).sum::<f64>() / dc).collect()
    }

    /// Largest jump component in absolute value.
    pub fn reach(&self) -> i64 {
        self.jumps.iter().flat_map(|r| r.iter().map(|x| x.abs())).max().unwrap_or(0)
    }

    /// A single coin carries all the weight.
    pub fn is_deterministic(&self) -> bool {
        let live: Vec<&CoinAtom> = self.law.iter().filter(|a| a.prob > 0.0).collect();
        live.iter().all(|a| max_abs(&(&a.coin - &live[0].coin)) < 1e-12)
    }

    /// `d(y) = Σ_τ e^{i y·r(τ)} |τ⟩⟨τ|`.
    pub fn shift_phases(&self, y: &[f64]) -> CMatrix {
        let dc = self.coin_dim();
        CMatrix::from_fn(dc, dc, |a, b| if a == b { C64::from_polar(1.0, dot(y, &self.jumps[a])) } else { ZERO })
    }

    /// `E(C ⊗ C̄)` with the row-major Kronecker convention.
    pub fn averaged_coin_pair(&self) -> CMatrix {
        let n = self.coin_dim() * self.coin_dim();
        let mut acc = CMatrix::zeros(n, n);
        for a in &self.law {
            acc += kron(&a.coin, &a.coin.map(|z| z.conj())) * c(a.prob, 0.0);
        }
        acc
    }

    /// `𝕄(y, y') = (d(y) ⊗ d(y')) E(C ⊗ C̄)`.
    pub fn transfer_matrix(&self, y: &[f64], yp: &[f64]) -> CMatrix {
        kron(&self.shift_phases(y), &self.shift_phases(yp)) * self.averaged_coin_pair()
    }

    pub fn sample_coins<R: rand::Rng>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        let w = WeightedIndex::new(self.law.iter().map(|a| a.prob)).expect("validated law");
        (0..n).map(|_| w.sample(rng)).collect()
    }
}

fn dot(y: &[f64], r: &[i64]) -> f64 {
    y.iter().zip(r).map(|(a, &b)| a * b as f64).sum()
}

/// `J_k(n)` for the coin sequence `C_1..C_n`, keyed by the displacement `k`.
pub fn amplitudes(spec: &WalkSpec, coins: &[CMatrix]) -> Result<BTreeMap<Vec<i64>, CMatrix>> {
    let dc = spec.coin_dim();
    let mut layer: BTreeMap<Vec<i64>, CMatrix> = BTreeMap::new();
    layer.insert(vec![0; spec.d], CMatrix::identity(dc, dc));
    for cm in coins {
        if cm.nrows() != dc || cm.ncols() != dc {
            return Err(Error::DimensionMismatch { expected: dc, got: cm.nrows() });
        }
        let mut next: BTreeMap<Vec<i64>, CMatrix> = BTreeMap::new();
        for (k, j) in &layer {
            let cj = cm * j;
            for (tau, r) in spec.jumps.iter().enumerate() {
                let key: Vec<i64> = k.iter().zip(r).map(|(a, b)| a + b).collect();
                let entry = next.entry(key).or_insert_with(|| CMatrix::zeros(dc, dc));
                for col in 0..dc {
                    entry[(tau, col)] += cj[(tau, col)];
                }
            }
        }
        layer = next;
    }
    Ok(layer)
}

/// `Σ_k J_k† J_k − I`, in max-abs norm.
pub fn unitarity_defect(amps: &BTreeMap<Vec<i64>, CMatrix>) -> f64 {
    let Some(first) = amps.values().next() else { return f64::INFINITY };
    let dc = first.nrows();
    let mut s = CMatrix::zeros(dc, dc);
    for j in amps.values() {
        s += j.adjoint() * j;
    }
    max_abs(&(s - CMatrix::identity(dc, dc)))
}

/// Box `[−radius, radius]^d` with row-major site numbering.
#[derive(Debug, Clone)]
struct Window {
    d: usize,
    radius: i64,
    width: usize,
}

impl Window {
    fn new(d: usize, radius: i64) -> Self {
        Window { d, radius, width: (2 * radius + 1) as usize }
    }

    fn n_sites(&self) -> usize {
        self.width.pow(self.d as u32)
    }

    fn index(&self, x: &[i64]) -> usize {
        x.iter().fold(0, |acc, &xi| acc * self.width + (xi + self.radius) as usize)
    }

    fn position(&self, mut idx: usize) -> Vec<i64> {
        let mut x = vec![0; self.d];
        for i in (0..self.d).rev() {
            x[i] = (idx % self.width) as i64 - self.radius;
            idx /= self.width;
        }
        x
    }

    fn offset(&self, r: &[i64]) -> isize {
        r.iter().fold(0isize, |acc, &ri| acc * self.width as isize + ri as isize)
    }

    /// Sites of the box of half-width `rho` centred at `x0`.
    fn box_sites(&self, x0: &[i64], rho: i64) -> Vec<usize> {
        let lo: Vec<i64> = x0.iter().map(|&a| (a - rho).max(-self.radius)).collect();
        let hi: Vec<i64> = x0.iter().map(|&a| (a + rho).min(self.radius)).collect();
        let mut out = Vec::new();
        let mut x = lo.clone();
        loop {
            out.push(self.index(&x));
            let mut i = self.d;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if x[i] < hi[i] {
                    x[i] += 1;
                    break;
                }
                x[i] = lo[i];
            }
        }
    }
}

/// Exact wavefunction propagation on a window large enough to hold every path.
struct Propagator<'a> {
    spec: &'a WalkSpec,
    window: Window,
    offsets: Vec<isize>,
    coins: Vec<Vec<C64>>,
}

impl<'a> Propagator<'a> {
    fn new(spec: &'a WalkSpec, n: usize, start: &[i64]) -> Self {
        let s_max = start.iter().map(|x| x.abs()).max().unwrap_or(0);
        let window = Window::new(spec.d, s_max + n as i64 * spec.reach());
        let offsets = spec.jumps.iter().map(|r| window.offset(r)).collect();
        let coins = spec.law.iter().map(|a| row_major(&a.coin)).collect();
        Propagator { spec, window, offsets, coins }
    }

    fn run(&self, start: &[i64], psi0: &CVector, seq: &[&[C64]]) -> Vec<f64> {
        let dc = self.spec.coin_dim();
        let ns = self.window.n_sites();
        let mut psi = vec![ZERO; ns * dc];
        let mut next = vec![ZERO; ns * dc];
        let s0 = self.window.index(start);
        for t in 0..dc {
            psi[s0 * dc + t] = psi0[t];
        }
        let reach = self.spec.reach();
        let mut phi = vec![ZERO; dc];
        for (step, cm) in seq.iter().enumerate() {
            next.iter_mut().for_each(|z| *z = ZERO);
            for site in self.window.box_sites(start, step as i64 * reach) {
                let base = site * dc;
                for t in 0..dc {
                    let mut acc = ZERO;
                    for s in 0..dc {
                        acc += cm[t * dc + s] * psi[base + s];
                    }
                    phi[t] = acc;
                }
                for t in 0..dc {
                    let target = (site as isize + self.offsets[t]) as usize;
                    next[target * dc + t] += phi[t];
                }
            }
            std::mem::swap(&mut psi, &mut next);
        }
        (0..ns).map(|s| psi[s * dc..(s + 1) * dc].iter().map(|z| z.norm_sqr()).sum()).collect()
    }

    /// Site probabilities for a mixed coin state, as a convex mixture of its eigenvectors.
    fn distribution(&self, start: &[i64], seq: &[&[C64]], mix: &[(f64, CVector)]) -> Vec<f64> {
        let mut out = vec![0.0; self.window.n_sites()];
        for (p, v) in mix {
            for (o, q) in out.iter_mut().zip(self.run(start, v, seq)) {
                *o += p * q;
            }
        }
        out
    }
}

fn row_major(m: &CMatrix) -> Vec<C64> {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect()
}

fn coin_mixture(rho: &DensityMatrix) -> Result<Vec<(f64, CVector)>> {
    let e = eigh(rho.matrix())?;
    Ok(e.values
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 1e-14)
        .map(|(k, &p)| (p, e.vectors.column(k).into_owned()))
        .collect())
}

/// Position distribution after applying `coins` to the walker started at `start`.
pub fn position_distribution(spec: &WalkSpec, coins: &[CMatrix], start: &[i64]) -> Result<Vec<(Vec<i64>, f64)>> {
    if start.len() != spec.d {
        return Err(Error::DimensionMismatch { expected: spec.d, got: start.len() });
    }
    let dc = spec.coin_dim();
    for cm in coins {
        if cm.nrows() != dc || cm.ncols() != dc {
            return Err(Error::DimensionMismatch { expected: dc, got: cm.nrows() });
        }
    }
    let prop = Propagator::new(spec, coins.len(), start);
    let flat: Vec<Vec<C64>> = coins.iter().map(row_major).collect();
    let seq: Vec<&[C64]> = flat.iter().map(|v| v.as_slice()).collect();
    let dist = prop.distribution(start, &seq, &coin_mixture(&spec.coin_state)?);
    Ok(dist
        .into_iter()
        .enumerate()
        .filter(|(_, p)| *p > 0.0)
        .map(|(i, p)| (prop.window.position(i), p))
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct McMoments {
    pub n: usize,
    pub trials: usize,
    pub mean_over_n: Vec<f64>,
    pub mean_se: Vec<f64>,
    /// `E⟨(X − n r̄)_i (X − n r̄)_j⟩ / n`.
    pub cov_over_n: Vec<Vec<f64>>,
    pub cov_se: Vec<Vec<f64>>,
    /// `cov_over_n / n`; stays away from zero for ballistic spreading.
    pub spread_over_n2: Vec<Vec<f64>>,
    pub ballistic: bool,
    /// Averaged position histogram.
    pub histogram: Vec<(Vec<i64>, f64)>,
}

#[derive(Clone)]
struct Acc {
    m1: Vec<f64>,
    m1sq: Vec<f64>,
    m2: Vec<f64>,
    m2sq: Vec<f64>,
    hist: Vec<f64>,
}

impl Acc {
    fn new(d: usize, sites: usize) -> Self {
        Acc { m1: vec![0.0; d], m1sq: vec![0.0; d], m2: vec![0.0; d * d], m2sq: vec![0.0; d * d], hist: vec![0.0; sites] }
    }

    fn merge(mut self, o: Acc) -> Acc {
        for (a, b) in [(&mut self.m1, &o.m1), (&mut self.m1sq, &o.m1sq), (&mut self.m2, &o.m2), (&mut self.m2sq, &o.m2sq), (&mut self.hist, &o.hist)] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self
    }
}

fn mean_se(sum: f64, sumsq: f64, trials: usize) -> (f64, f64) {
    let t = trials as f64;
    let m = sum / t;
    if trials < 2 {
        return (m, f64::NAN);
    }
    let var = ((sumsq - t * m * m) / (t - 1.0)).max(0.0);
    (m, (var / t).sqrt())
}

/// Monte Carlo over coin sequences with exact propagation for each sequence.
/// Trial `t` draws its coins from stream `t` of the seeded generator.
pub fn mc_moments(spec: &WalkSpec, n: usize, trials: usize, seed: u64) -> Result<McMoments> {
    spec.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let d = spec.d;
    let origin = vec![0; d];
    let prop = Propagator::new(spec, n, &origin);
    let mix = coin_mixture(&spec.coin_state)?;
    let rbar = spec.mean_jump();
    let nf = n as f64;
    let positions: Vec<Vec<f64>> = (0..prop.window.n_sites())
        .map(|i| prop.window.position(i).iter().zip(&rbar).map(|(&x, r)| x as f64 - nf * r).collect())
        .collect();
    let raw: Vec<Vec<f64>> = (0..prop.window.n_sites()).map(|i| prop.window.position(i).iter().map(|&x| x as f64).collect()).collect();
    let sites = prop.window.n_sites();

    let acc = (0..trials)
        .into_par_iter()
        .fold(
            || Acc::new(d, sites),
            |mut acc, t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let idx = spec.sample_coins(n, &mut rng);
                let seq: Vec<&[C64]> = idx.iter().map(|&k| prop.coins[k].as_slice()).collect();
                let dist = prop.distribution(&origin, &seq, &mix);
                let mut m1 = vec![0.0; d];
                let mut m2 = vec![0.0; d * d];
                for (s, &p) in dist.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    for i in 0..d {
                        m1[i] += p * raw[s][i];
                        for j in 0..d {
                            m2[i * d + j] += p * positions[s][i] * positions[s][j];
                        }
                    }
                }
                for i in 0..d {
                    acc.m1[i] += m1[i];
                    acc.m1sq[i] += m1[i] * m1[i];
                }
                for k in 0..d * d {
                    acc.m2[k] += m2[k];
                    acc.m2sq[k] += m2[k] * m2[k];
                }
                acc.hist.iter_mut().zip(&dist).for_each(|(h, p)| *h += p);
                acc
            },
        )
        .reduce(|| Acc::new(d, sites), Acc::merge);

    let scale = if n == 0 { 1.0 } else { nf };
    let mut mean_over_n = vec![0.0; d];
    let mut mean_err = vec![0.0; d];
    for i in 0..d {
        let (m, se) = mean_se(acc.m1[i], acc.m1sq[i], trials);
        mean_over_n[i] = m / scale;
        mean_err[i] = se / scale;
    }
    let mut cov = vec![vec![0.0; d]; d];
    let mut cov_err = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let (m, se) = mean_se(acc.m2[i * d + j], acc.m2sq[i * d + j], trials);
            cov[i][j] = m / scale;
            cov_err[i][j] = se / scale;
        }
    }
    let spread = cov.iter().map(|row| row.iter().map(|x| x / scale).collect()).collect();
    let histogram = acc
        .hist
        .iter()
        .enumerate()
        .filter(|(_, &h)| h > 0.0)
        .map(|(s, &h)| (prop.window.position(s), h / trials as f64))
        .collect();
    Ok(McMoments {
        n,
        trials,
        mean_over_n,
        mean_se: mean_err,
        cov_over_n: cov,
        cov_se: cov_err,
        spread_over_n2: spread,
        ballistic: spec.is_deterministic(),
        histogram,
    })
}

/// Averaged characteristic function `Φ_n(y) = E Σ_x e^{i x·y} P_n(x)`.
///
/// `Φ_n(y) = ∫ tr[ 𝕄(y+v, −v)^n vec(ρ_0) ] dv/(2π)^d`. The integrand is a
/// trigonometric polynomial in `v` of degree at most `2 n reach`, so the
/// uniform grid of `2 n reach + 1` points per axis integrates it exactly.
pub fn characteristic(spec: &WalkSpec, n: usize, y: &[f64]) -> Result<C64> {
    spec.validate()?;
    if y.len() != spec.d {
        return Err(Error::DimensionMismatch { expected: spec.d, got: y.len() });
    }
    let dc = spec.coin_dim();
    let e = spec.averaged_coin_pair();
    let rho = spec.coin_state.matrix();
    let v0 = CVector::from_fn(dc * dc, |k, _| rho[(k / dc, k % dc)]);
    let pts = 2 * n as i64 * spec.reach() + 1;
    let total = (pts as usize).pow(spec.d as u32);
    let h = 2.0 * std::f64::consts::PI / pts as f64;
    let sum: C64 = (0..total)
        .into_par_iter()
        .map(|g| {
            let mut rem = g;
            let mut v = vec![0.0; spec.d];
            for vi in v.iter_mut().rev() {
                *vi = (rem % pts as usize) as f64 * h;
                rem /= pts as usize;
            }
            let yv: Vec<f64> = y.iter().zip(&v).map(|(a, b)| a + b).collect();
            let mv: Vec<f64> = v.iter().map(|b| -b).collect();
            let m = kron(&spec.shift_phases(&yv), &spec.shift_phases(&mv)) * &e;
            let mut x = v0.clone();
            for _ in 0..n {
                x = &m * x;
            }
            (0..dc).map(|a| x[a * dc + a]).sum::<C64>()
        })
        .sum();
    Ok(sum / total as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferMoments {
    pub n: usize,
    pub h: f64,
    pub phi_zero: C64,
    pub mean: Vec<f64>,
    /// `E⟨(X − n r̄)_i (X − n r̄)_j⟩`.
    pub centered: Vec<Vec<f64>>,
    /// Largest gap between the extrapolated and the finer raw difference quotient.
    pub defect: f64,
}

impl TransferMoments {
    pub fn mean_over_n(&self) -> Vec<f64> {
        let s = self.n.max(1) as f64;
        self.mean.iter().map(|x| x / s).collect()
    }

    pub fn cov_over_n(&self) -> Vec<Vec<f64>> {
        let s = self.n.max(1) as f64;
        self.centered.iter().map(|r| r.iter().map(|x| x / s).collect()).collect()
    }
}

/// First and second position moments from central differences of `Φ_n` at
/// `y = 0`, with steps `h` and `h/2` combined by Richardson extrapolation.
/// Fails when the extrapolated value and the finer quotient differ by more than
/// `tol · max(1, |value|)`.
pub fn transfer_moments(spec: &WalkSpec, n: usize, h: f64, tol: f64) -> Result<TransferMoments> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step h = {h}")));
    }
    let d = spec.d;
    let phi = |y: Vec<f64>| characteristic(spec, n, &y);
    let unit = |i: usize, s: f64| {
        let mut y = vec![0.0; d];
        y[i] = s;
        y
    };
    let phi0 = phi(vec![0.0; d])?;
    let mut defect: f64 = 0.0;
    let mut richardson = |coarse: C64, fine: C64| -> Result<C64> {
        let r = (fine * 4.0 - coarse) / 3.0;
        let gap = (r - fine).norm();
        let rel = gap / r.norm().max(1.0);
        defect = defect.max(rel);
        if rel > tol {
            return Err(Error::Extrapolation(rel));
        }
        Ok(r)
    };

    let mut first = vec![ZERO; d];
    for (i, f) in first.iter_mut().enumerate() {
        let q = |s: f64| -> Result<C64> { Ok((phi(unit(i, s))? - phi(unit(i, -s))?) / (2.0 * s)) };
        *f = richardson(q(h)?, q(h / 2.0)?)?;
    }
    let mut second = vec![vec![ZERO; d]; d];
    for i in 0..d {
        for j in i..d {
            let q = |s: f64| -> Result<C64> {
                if i == j {
                    Ok((phi(unit(i, s))? - phi0 * 2.0 + phi(unit(i, -s))?) / (s * s))
                } else {
                    let at = |a: f64, b: f64| {
                        let mut y = vec![0.0; d];
                        y[i] = a;
                        y[j] = b;
                        phi(y)
                    };
                    Ok((at(s, s)? - at(s, -s)? - at(-s, s)? + at(-s, -s)?) / (4.0 * s * s))
                }
            };
            let v = richardson(q(h)?, q(h / 2.0)?)?;
            second[i][j] = v;
            second[j][i] = v;
        }
    }
    // Φ' = i E[X], Φ'' = −E[X X].
    let mean: Vec<f64> = first.iter().map(|z| z.im).collect();
    let nr: Vec<f64> = spec.mean_jump().iter().map(|r| r * n as f64).collect();
    let centered = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| -second[i][j].re - nr[i] * mean[j] - mean[i] * nr[j] + nr[i] * nr[j])
                .collect()
        })
        .collect();
    Ok(TransferMoments { n, h, phi_zero: phi0, mean, centered, defect })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSample {
    pub v: Vec<f64>,
    /// Eigenvalues within `1e-8` of `1`.
    pub unit_multiplicity: usize,
    /// Eigenvalues other than those near `1` that reach the unit circle.
    pub other_peripheral: usize,
    pub subleading_modulus: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralCondition {
    pub samples: Vec<SpectralSample>,
    pub holds: bool,
}

/// Checks that `σ(𝕄(v, −v))` meets the unit circle only at a simple eigenvalue
/// `1`, on a uniform grid of `per_axis` points per axis of the torus.
pub fn spectral_condition(spec: &WalkSpec, per_axis: usize) -> Result<SpectralCondition> {
    spec.validate()?;
    let per_axis = per_axis.max(1);
    let total = per_axis.pow(spec.d as u32);
    let h = 2.0 * std::f64::consts::PI / per_axis as f64;
    let mut samples = Vec::with_capacity(total);
    for g in 0..total {
        let mut rem = g;
        let mut v = vec![0.0; spec.d];
        for vi in v.iter_mut().rev() {
            *vi = (rem % per_axis) as f64 * h;
            rem /= per_axis;
        }
        let mv: Vec<f64> = v.iter().map(|x| -x).collect();
        let ev = eigenvalues(&spec.transfer_matrix(&v, &mv))?;
        let unit_multiplicity = ev.iter().filter(|z| (**z - c(1.0, 0.0)).norm() < 1e-8).count();
        let rest: Vec<f64> = ev.iter().filter(|z| (**z - c(1.0, 0.0)).norm() >= 1e-8).map(|z| z.norm()).collect();
        let other_peripheral = rest.iter().filter(|&&m| m > 1.0 - 1e-8).count();
        let subleading_modulus = rest.iter().cloned().fold(0.0, f64::max);
        samples.push(SpectralSample { v, unit_multiplicity, other_peripheral, subleading_modulus });
    }
    let holds = samples.iter().all(|s| s.unit_multiplicity == 1 && s.other_peripheral == 0);
    Ok(SpectralCondition { samples, holds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec1() -> WalkSpec {
        WalkSpec::deterministic(hadamard(), DensityMatrix::basis(2, 0)).unwrap()
    }

    #[test]
    fn zero_steps_is_identity() {
        let a = amplitudes(&spec1(), &[]).unwrap();
        assert_eq!(a.len(), 1);
        assert!(max_abs(&(&a[&vec![0]] - CMatrix::identity(2, 2))) == 0.0);
    }

    #[test]
    fn one_hadamard_step() {
        let a = amplitudes(&spec1(), &[hadamard()]).unwrap();
        assert_eq!(a.len(), 2);
        // J_{+1} = P_+ H and J_{-1} = P_- H; each has squared Frobenius norm 1.
        let n: f64 = a.values().map(|j| j.norm_squared()).sum();
        assert!((n - 2.0).abs() < 1e-15);
        let psi = CVector::from_vec(vec![c(1.0, 0.0), ZERO]);
        let p: Vec<f64> = a.values().map(|j| (j * &psi).norm_squared()).collect();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn characteristic_at_zero_is_one() {
        let s = spec1();
        let phi = characteristic(&s, 7, &[0.0]).unwrap();
        assert!((phi - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn window_round_trip() {
        let w = Window::new(2, 3);
        for i in 0..w.n_sites() {
            assert_eq!(w.index(&w.position(i)), i);
        }
        assert_eq!(w.box_sites(&[0, 0], 1).len(), 9);
    }
}
