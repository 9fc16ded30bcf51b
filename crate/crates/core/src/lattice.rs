//! Electron on a one-dimensional lattice in a static field, kicked by a beam of
//! two-level atoms.
//!
//! On the Wannier–Stark ladder the reduced dynamics is a free rotation followed
//! by a random translation by `−1`, `0` or `+1`. The ladder index therefore
//! performs an i.i.d. trinomial walk, treated here exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeParams {
    /// Atomic level.
    pub e: f64,
    /// Field strength.
    pub f: f64,
    pub lambda: f64,
    pub tau: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepProbs {
    pub minus: f64,
    pub zero: f64,
    pub plus: f64,
}

impl LatticeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f > 0.0 && self.tau > 0.0 && self.e.is_finite() && self.lambda.is_finite() && self.beta.is_finite()) {
            return Err(Error::InvalidParameter("need F > 0, tau > 0 and finite E, lambda, beta".into()));
        }
        Ok(())
    }

    pub fn omega0(&self) -> f64 {
        (self.e - self.f).hypot(2.0 * self.lambda)
    }

    /// `p = (4λ²/ω₀²) sin²(ω₀τ/2)`.
    pub fn p(&self) -> f64 {
        let half = self.tau / 2.0;
        let s = self.lambda * self.tau * crate::spinmodel::sinc(self.omega0() * half);
        s * s
    }

    pub fn half_beta_e(&self) -> f64 {
        self.beta * self.e / 2.0
    }
}

pub fn transition_probs(p: &LatticeParams) -> Result<StepProbs> {
    p.validate()?;
    let q = p.p();
    let plus = q / (1.0 + (-p.beta * p.e).exp());
    Ok(StepProbs { minus: q - plus, zero: 1.0 - q, plus })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transport {
    pub drift: f64,
    pub diffusion: f64,
    /// `β sin²(λτ)/(2τ)`, the mobility at `E = F`.
    pub mobility: f64,
}

/// `v_d = (p/τ)tanh(βE/2)`, `D = (p/2τ)(1 − p tanh²(βE/2))`.
pub fn transport(p: &LatticeParams) -> Result<Transport> {
    p.validate()?;
    let q = p.p();
    let t = p.half_beta_e().tanh();
    Ok(Transport {
        drift: q / p.tau * t,
        diffusion: q / (2.0 * p.tau) * (1.0 - q * t * t),
        mobility: p.beta * (p.lambda * p.tau).sin().powi(2) / (2.0 * p.tau),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EinsteinCheck {
    /// `μ/β`.
    pub target: f64,
    /// Richardson limit of `D` as `F = E → 0`.
    pub limit: f64,
    pub coarse: f64,
    pub error: f64,
}

/// Extrapolate `D` at `E = F ∈ {h, h/2}` to `F → 0`.
pub fn einstein_limit(lambda: f64, tau: f64, beta: f64, h: f64) -> Result<EinsteinCheck> {
    let d = |f: f64| transport(&LatticeParams { e: f, f, lambda, tau, beta }).map(|t| t.diffusion);
    let (d1, d2) = (d(h)?, d(h / 2.0)?);
    let limit = (4.0 * d2 - d1) / 3.0;
    let mu = transport(&LatticeParams { e: h, f: h, lambda, tau, beta })?.mobility;
    let target = mu / beta;
    Ok(EinsteinCheck { target, limit, coarse: d1, error: (limit - target).abs() })
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Law of the ladder index after `n` steps from `0`, stored as log-probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkDistribution {
    pub n: usize,
    /// Entry `i` is the offset `i − n`.
    pub log_probs: Vec<f64>,
}

impl WalkDistribution {
    pub fn offsets(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.log_probs.len()).map(move |i| i as i64 - self.n as i64)
    }

    pub fn prob(&self, k: i64) -> f64 {
        let i = k + self.n as i64;
        if i < 0 || i as usize >= self.log_probs.len() {
            return 0.0;
        }
        self.log_probs[i as usize].exp()
    }

    pub fn log_total(&self) -> f64 {
        self.log_probs.iter().fold(f64::NEG_INFINITY, |a, &b| log_add(a, b))
    }

    pub fn mean(&self) -> f64 {
        self.offsets().zip(&self.log_probs).map(|(k, lp)| k as f64 * lp.exp()).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.offsets().zip(&self.log_probs).map(|(k, lp)| (k as f64 - m).powi(2) * lp.exp()).sum()
    }

    /// `log P(k ≥ k0)`.
    pub fn log_tail(&self, k0: i64) -> f64 {
        let start = (k0 + self.n as i64).max(0) as usize;
        self.log_probs.iter().skip(start).fold(f64::NEG_INFINITY, |a, &b| log_add(a, b))
    }

    /// `P(k ≤ x)` at each offset.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.log_probs
            .iter()
            .map(|lp| {
                acc += lp.exp();
                acc
            })
            .collect()
    }

    /// `sup_x |P((k − mean)/σ ≤ x) − Φ(x)|`, checking both sides of each jump.
    pub fn clt_distance(&self, mean: f64, sd: f64) -> f64 {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut prev = 0.0;
        let mut worst: f64 = 0.0;
        for (k, cdf) in self.offsets().zip(self.cdf()) {
            let phi = normal.cdf((k as f64 - mean) / sd);
            worst = worst.max((cdf - phi).abs()).max((prev - phi).abs());
            prev = cdf;
        }
        worst
    }
}

/// `n`-fold convolution of the trinomial step law in log space.
pub fn exact_distribution(p: &LatticeParams, n: usize) -> Result<WalkDistribution> {
    let s = transition_probs(p)?;
    let (lm, l0, lp) = (s.minus.ln(), s.zero.ln(), s.plus.ln());
    let width = 2 * n + 1;
    let mut cur = vec![f64::NEG_INFINITY; width];
    cur[n] = 0.0;
    let mut next = cur.clone();
    for step in 1..=n {
        let (lo, hi) = (n - step, n + step);
        for i in lo..=hi {
            let mut acc = cur[i] + l0;
            if i > 0 {
                acc = log_add(acc, cur[i - 1] + lp);
            }
            if i + 1 < width {
                acc = log_add(acc, cur[i + 1] + lm);
            }
            next[i] = acc;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(WalkDistribution { n, log_probs: cur })
}

/// `e(α) = log((1−p) + p cosh(βE/2+α)/cosh(βE/2))` and its Legendre transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFunction {
    pub p: f64,
    pub half_beta_e: f64,
    step: StepProbs,
}

pub fn rate_function(params: &LatticeParams) -> Result<RateFunction> {
    Ok(RateFunction { p: params.p(), half_beta_e: params.half_beta_e(), step: transition_probs(params)? })
}

impl RateFunction {
    pub fn e(&self, alpha: f64) -> f64 {
        (self.step.zero + self.step.plus * alpha.exp() + self.step.minus * (-alpha).exp()).ln()
    }

    /// `e'(α)`, the tilted mean step.
    pub fn de(&self, alpha: f64) -> f64 {
        let (up, down) = (self.step.plus * alpha.exp(), self.step.minus * (-alpha).exp());
        (up - down) / (self.step.zero + up + down)
    }

    /// Closed form on `[−1, 1]`, `+∞` outside.
    pub fn i(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return f64::INFINITY;
        }
        if x == 1.0 {
            return -self.step.plus.ln();
        }
        if x == -1.0 {
            return -self.step.minus.ln();
        }
        if self.p >= 1.0 {
            return self.i_numeric(x);
        }
        let b = self.half_beta_e;
        let a = self.p / ((1.0 - self.p) * b.cosh());
        let r = (x * x + a * a * (1.0 - x * x)).sqrt();
        let r_minus_x = if x > 0.0 { a * a * (1.0 - x * x) / (r + x) } else { r - x };
        let lead = if x == 0.0 { 0.0 } else { -x * (b + (r_minus_x / (a * (1.0 + x))).ln()) };
        lead - ((1.0 - self.p) * (r + 1.0) / (1.0 - x * x)).ln()
    }

    /// `sup_α αx − e(α)` by bisection on `e'(α) = x`.
    pub fn i_numeric(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return f64::INFINITY;
        }
        if x.abs() == 1.0 {
            return if x > 0.0 { -self.step.plus.ln() } else { -self.step.minus.ln() };
        }
        let (mut lo, mut hi) = (-1.0, 1.0);
        while self.de(lo) > x {
            lo *= 2.0;
        }
        while self.de(hi) < x {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.de(mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = 0.5 * (lo + hi);
        a * x - self.e(a)
    }
}

/// Empirical law of `trials` independent walks of length `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalWalk {
    pub n: usize,
    pub trials: usize,
    /// Entry `i` counts walks ending at `i − n`.
    pub counts: Vec<u64>,
}

impl EmpiricalWalk {
    /// Kolmogorov–Smirnov distance to an exact distribution with the same `n`.
    pub fn ks_distance(&self, exact: &WalkDistribution) -> f64 {
        let mut acc = 0u64;
        exact
            .cdf()
            .iter()
            .zip(&self.counts)
            .map(|(f, &cnt)| {
                acc += cnt;
                (acc as f64 / self.trials as f64 - f).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Critical KS value at level 1%.
    pub fn ks_critical_1pct(&self) -> f64 {
        1.628 / (self.trials as f64).sqrt()
    }
}

/// Trial `t` draws from stream `t` of the seeded ChaCha8 generator.
pub fn simulate_walk(p: &LatticeParams, n: usize, trials: usize, seed: u64) -> Result<EmpiricalWalk> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let s = transition_probs(p)?;
    let ends: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let mut k = n as i64;
            for _ in 0..n {
                let u: f64 = rng.random();
                if u < s.minus {
                    k -= 1;
                } else if u >= 1.0 - s.plus {
                    k += 1;
                }
            }
            k as usize
        })
        .collect();
    let mut counts = vec![0u64; 2 * n + 1];
    for e in ends {
        counts[e] += 1;
    }
    Ok(EmpiricalWalk { n, trials, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> LatticeParams {
        LatticeParams { e: 1.0, f: 0.6, lambda: 0.4, tau: 1.3, beta: 0.8 }
    }

    #[test]
    fn resonant_time_is_trivial() {
        let mut p = params();
        p.tau = 2.0 * std::f64::consts::PI / p.omega0();
        let s = transition_probs(&p).unwrap();
        assert!(s.zero > 1.0 - 1e-15);
    }

    #[test]
    fn infinite_temperature_is_symmetric() {
        let s = transition_probs(&LatticeParams { beta: 0.0, ..params() }).unwrap();
        assert!((s.plus - s.minus).abs() < 1e-16);
        assert_eq!(transport(&LatticeParams { beta: 0.0, ..params() }).unwrap().drift, 0.0);
    }

    #[test]
    fn zero_steps_is_delta() {
        let d = exact_distribution(&params(), 0).unwrap();
        assert_eq!(d.log_probs, vec![0.0]);
    }

    #[test]
    fn closed_form_rate_matches_legendre() {
        let r = rate_function(&params()).unwrap();
        for k in -19..=19 {
            let x = k as f64 / 20.0;
            assert!((r.i(x) - r.i_numeric(x)).abs() < 1e-9, "x = {x}");
        }
        assert!(r.e(0.0).abs() < 1e-15);
    }

    #[test]
    fn ks_against_exact() {
        let p = params();
        let emp = simulate_walk(&p, 40, 20_000, 7).unwrap();
        let ex = exact_distribution(&p, 40).unwrap();
        assert!(emp.ks_distance(&ex) < emp.ks_critical_1pct());
    }
}
