//! Trajectories under ideal, random i.i.d. and cyclic K-beam interaction schedules.
//!
//! Random schedules draw from a ChaCha8 generator seeded with the 64-bit seed;
//! trajectory `k` of a batch uses stream `k` of that generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{c, gibbs, hermitize, matrix_serde, CMatrix, DensityMatrix, Superoperator};
use crate::rdm::{build_rdm, RIModel, ReducedMap};
use crate::spectral::{analyze, ergodic_mean, repair_state, DEFAULT_TOL_PERIPHERAL};

/// Parameters of one random draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionParams {
    pub tau: f64,
    pub beta: f64,
    pub lambda: f64,
}

/// `h_S`, `h_E` and a unit coupling; a draw fixes `τ`, `β` and `λ` with `ρ_E = Gibbs(h_E, β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFamily {
    #[serde(with = "matrix_serde")]
    pub h_s: CMatrix,
    #[serde(with = "matrix_serde")]
    pub h_e: CMatrix,
    #[serde(with = "matrix_serde")]
    pub v_unit: CMatrix,
}

impl ModelFamily {
    pub fn model(&self, p: &InteractionParams) -> Result<RIModel> {
        let rho_e = gibbs(&self.h_e, p.beta)?;
        RIModel::new(self.h_s.clone(), self.h_e.clone(), &self.v_unit * c(p.lambda, 0.0), p.tau, rho_e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamLaw {
    /// Finitely supported law over `(τ, β, λ)` atoms.
    Mixture(Vec<(InteractionParams, f64)>),
    /// `τ` drawn by inverse-CDF interpolation of a tabulated distribution.
    TabulatedTau { taus: Vec<f64>, cdf: Vec<f64>, beta: f64, lambda: f64 },
}

/// An i.i.d. law on reduced dynamics maps.
#[derive(Debug, Clone)]
pub struct Sampler {
    pub family: ModelFamily,
    pub law: ParamLaw,
    atoms: Vec<ReducedMap>,
    cumulative: Vec<f64>,
}

impl Sampler {
    pub fn new(family: ModelFamily, law: ParamLaw) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut cumulative = Vec::new();
        match &law {
            ParamLaw::Mixture(entries) => {
                if entries.is_empty() {
                    return Err(Error::InvalidParameter("empty mixture".into()));
                }
                let total: f64 = entries.iter().map(|e| e.1).sum();
                if (total - 1.0).abs() > 1e-12 || entries.iter().any(|e| e.1 < 0.0) {
                    return Err(Error::InvalidParameter(format!("mixture weights sum to {total}")));
                }
                let mut acc = 0.0;
                for (p, w) in entries {
                    atoms.push(build_rdm(&family.model(p)?)?);
                    acc += w;
                    cumulative.push(acc);
                }
            }
            ParamLaw::TabulatedTau { taus, cdf, .. } => {
                let ok = taus.len() == cdf.len()
                    && taus.len() >= 2
                    && cdf.windows(2).all(|w| w[1] >= w[0])
                    && taus.windows(2).all(|w| w[1] > w[0])
                    && cdf[0].abs() < 1e-12
                    && (cdf[cdf.len() - 1] - 1.0).abs() < 1e-12
                    && taus[0] > 0.0;
                if !ok {
                    return Err(Error::InvalidParameter("tabulated CDF must be increasing from 0 to 1".into()));
                }
            }
        }
        Ok(Sampler { family, law, atoms, cumulative })
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.law, ParamLaw::Mixture(_))
    }

    pub fn atoms(&self) -> &[ReducedMap] {
        &self.atoms
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Result<(InteractionParams, ReducedMap)> {
        let u: f64 = rng.random();
        match &self.law {
            ParamLaw::Mixture(entries) => {
                let k = self.cumulative.iter().position(|&cdf| u < cdf).unwrap_or(entries.len() - 1);
                Ok((entries[k].0, self.atoms[k].clone()))
            }
            ParamLaw::TabulatedTau { taus, cdf, beta, lambda } => {
                let k = cdf.partition_point(|&f| f <= u).clamp(1, cdf.len() - 1);
                let (f0, f1) = (cdf[k - 1], cdf[k]);
                let t = if f1 > f0 { (u - f0) / (f1 - f0) } else { 0.0 };
                let tau = taus[k - 1] + t * (taus[k] - taus[k - 1]);
                let p = InteractionParams { tau, beta: *beta, lambda: *lambda };
                Ok((p, build_rdm(&self.family.model(&p)?)?))
            }
        }
    }

    /// `E[L]`: exact for mixtures, Monte Carlo over `samples` draws otherwise.
    pub fn mean_map(&self, samples: usize, seed: u64) -> Result<(Superoperator, bool)> {
        match &self.law {
            ParamLaw::Mixture(entries) => {
                let d = self.atoms[0].dim();
                let mut acc = Superoperator::zero(d);
                for (atom, (_, w)) in self.atoms.iter().zip(entries) {
                    acc = acc.add(&atom.superop.scale(c(*w, 0.0)));
                }
                Ok((acc, true))
            }
            ParamLaw::TabulatedTau { .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let d = self.family.h_s.nrows();
                let mut acc = Superoperator::zero(d);
                for _ in 0..samples {
                    acc = acc.add(&self.draw(&mut rng)?.1.superop);
                }
                Ok((acc.scale(c(1.0 / samples as f64, 0.0)), false))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum InteractionSchedule {
    Ideal { map: ReducedMap },
    Random { sampler: Sampler, seed: u64 },
    KBeam { maps: Vec<ReducedMap> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub beam: Option<usize>,
    pub params: Option<InteractionParams>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<DensityMatrix>,
    pub step_records: Vec<StepRecord>,
}

impl InteractionSchedule {
    pub fn dim(&self) -> usize {
        match self {
            InteractionSchedule::Ideal { map } => map.dim(),
            InteractionSchedule::Random { sampler, .. } => sampler.family.h_s.nrows(),
            InteractionSchedule::KBeam { maps } => maps[0].dim(),
        }
    }

    /// Model used at a recorded step, for replay.
    pub fn model_for(&self, rec: &StepRecord) -> Result<RIModel> {
        match self {
            InteractionSchedule::Ideal { map } => Ok(map.model.clone()),
            InteractionSchedule::KBeam { maps } => Ok(maps[rec.beam.unwrap_or(0)].model.clone()),
            InteractionSchedule::Random { sampler, .. } => {
                let p = rec.params.ok_or_else(|| Error::InvalidParameter("record has no parameters".into()))?;
                sampler.family.model(&p)
            }
        }
    }
}

pub fn run(schedule: &InteractionSchedule, rho0: &DensityMatrix, n: usize) -> Result<Trajectory> {
    run_substream(schedule, rho0, n, 0)
}

/// Run with the random stream `stream` of the schedule seed.
pub fn run_substream(schedule: &InteractionSchedule, rho0: &DensityMatrix, n: usize, stream: u64) -> Result<Trajectory> {
    if rho0.dim() != schedule.dim() {
        return Err(Error::DimensionMismatch { expected: schedule.dim(), got: rho0.dim() });
    }
    if let InteractionSchedule::KBeam { maps } = schedule {
        if maps.is_empty() {
            return Err(Error::InvalidParameter("K-beam schedule needs K >= 1".into()));
        }
    }
    let mut rng = match schedule {
        InteractionSchedule::Random { seed, .. } => {
            let mut r = ChaCha8Rng::seed_from_u64(*seed);
            r.set_stream(stream);
            Some(r)
        }
        _ => None,
    };
    let mut states = Vec::with_capacity(n + 1);
    let mut records = Vec::with_capacity(n);
    states.push(rho0.clone());
    for k in 1..=n {
        let prev = states[k - 1].matrix();
        let (next, rec) = match schedule {
            InteractionSchedule::Ideal { map } => (map.superop.apply(prev), StepRecord { step: k, beam: None, params: None }),
            InteractionSchedule::KBeam { maps } => {
                let j = (k - 1) % maps.len();
                (maps[j].superop.apply(prev), StepRecord { step: k, beam: Some(j), params: None })
            }
            InteractionSchedule::Random { sampler, .. } => {
                let (p, map) = sampler.draw(rng.as_mut().expect("random schedule has a generator"))?;
                (map.superop.apply(prev), StepRecord { step: k, beam: None, params: Some(p) })
            }
        };
        states.push(checked_state(next)?);
        records.push(rec);
    }
    Ok(Trajectory { states, step_records: records })
}

fn checked_state(x: CMatrix) -> Result<DensityMatrix> {
    let h = hermitize(&x);
    let tol = crate::qops::Tolerances { herm: 1e-8, trace: 1e-8, pos: 1e-8, eig: 1e-9 };
    match DensityMatrix::with_tolerances(h.clone(), &tol) {
        Ok(s) => Ok(s),
        Err(_) => repair_state(h),
    }
}

impl Trajectory {
    /// `(1/N) Σ_{n<N} ρ(n)`.
    pub fn ergodic_mean(&self, n: usize) -> Result<DensityMatrix> {
        let n = n.min(self.states.len());
        if n == 0 {
            return Err(Error::InvalidParameter("empty trajectory".into()));
        }
        let d = self.states[0].dim();
        let mut acc = CMatrix::zeros(d, d);
        for s in &self.states[..n] {
            acc += s.matrix();
        }
        repair_state(hermitize(&(acc / c(n as f64, 0.0))))
    }
}

#[derive(Debug, Clone)]
pub struct RandomAsymptotics {
    pub ergodic_means: Vec<DensityMatrix>,
    pub mean_map: Superoperator,
    pub invariant_state: DensityMatrix,
    pub exact: bool,
    /// Fraction of atoms (or sampled maps) satisfying condition (E).
    pub ergodic_fraction: f64,
}

/// Per-seed ergodic means and the invariant state of `E[L]`.
pub fn random_asymptotics(sampler: &Sampler, rho0: &DensityMatrix, n: usize, seeds: &[u64]) -> Result<RandomAsymptotics> {
    let ergodic_fraction = match &sampler.law {
        ParamLaw::Mixture(entries) => {
            let mut w = 0.0;
            for (atom, (_, p)) in sampler.atoms.iter().zip(entries) {
                if analyze(&atom.superop, DEFAULT_TOL_PERIPHERAL)?.satisfies_e {
                    w += p;
                }
            }
            w
        }
        ParamLaw::TabulatedTau { .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds.first().cloned().unwrap_or(0));
            let draws = 64;
            let mut hits = 0;
            for _ in 0..draws {
                if analyze(&sampler.draw(&mut rng)?.1.superop, DEFAULT_TOL_PERIPHERAL)?.satisfies_e {
                    hits += 1;
                }
            }
            hits as f64 / draws as f64
        }
    };
    if ergodic_fraction <= 0.0 {
        return Err(Error::ConditionE("no sampled map satisfies condition (E)".into()));
    }
    let (mean_map, exact) = sampler.mean_map(4096, seeds.first().cloned().unwrap_or(0))?;
    let report = analyze(&mean_map, DEFAULT_TOL_PERIPHERAL)?;
    if !report.satisfies_e {
        return Err(Error::ConditionE("E[L] fails condition (E)".into()));
    }
    let invariant_state = report.invariant_state.expect("simple eigenvalue 1 has a state");
    let mut ergodic_means = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let sched = InteractionSchedule::Random { sampler: sampler.clone(), seed };
        let traj = run(&sched, rho0, n)?;
        ergodic_means.push(traj.ergodic_mean(n)?);
    }
    Ok(RandomAsymptotics { ergodic_means, mean_map, invariant_state, exact, ergodic_fraction })
}

/// Cyclic compositions: entry `j` applies beams `j+1, …, K−1, 0, …, j` in that order.
pub fn kbeam_effective_maps(maps: &[Superoperator]) -> Result<Vec<Superoperator>> {
    let k = maps.len();
    if k == 0 {
        return Err(Error::InvalidParameter("K-beam schedule needs K >= 1".into()));
    }
    Ok((0..k)
        .map(|j| {
            let mut acc = Superoperator::identity(maps[0].dim());
            for s in 1..=k {
                acc = maps[(j + s) % k].compose(&acc);
            }
            acc
        })
        .collect())
}

/// Invariant states `ρ₊^j` of the effective maps, i.e. the cyclic steady state after beam `j`.
pub fn kbeam_invariant_states(maps: &[Superoperator]) -> Result<Vec<DensityMatrix>> {
    kbeam_effective_maps(maps)?
        .iter()
        .map(|m| {
            let r = analyze(m, DEFAULT_TOL_PERIPHERAL)?;
            if !r.satisfies_e {
                return Err(Error::ConditionE("effective K-beam map fails condition (E)".into()));
            }
            Ok(r.invariant_state.expect("simple eigenvalue 1 has a state"))
        })
        .collect()
}

/// Ergodic mean of an ideal schedule, for symmetry with the random case.
pub fn ideal_ergodic_mean(map: &ReducedMap, rho0: &DensityMatrix, n: usize) -> Result<DensityMatrix> {
    ergodic_mean(&map.superop, rho0, n)
}
