//! External work, entropy production and energy fluxes.
//!
//! All stationary quantities are expectations of one-interaction observables
//! in `ρ⊗ρ_E`. The flux integral `∫₀^τ e^{ish}Φe^{-ish}ds` with `Φ = [iv, h_E]`
//! is evaluated exactly in the eigenbasis of the coupled Hamiltonian.

use serde::Serialize;

use crate::dynamics::{InteractionSchedule, ParamLaw, Sampler, Trajectory};
use crate::error::{Error, Result};
use crate::qops::{c, commutator, eigh, gibbs, herm_fn, kron, max_abs, CMatrix, DensityMatrix, Superoperator, C64, I};
use crate::rdm::{RIModel, ReducedMap};
use crate::spectral::{analyze, DEFAULT_TOL_PERIPHERAL};
use crate::spinmodel::sinc;

/// `∫₀^t e^{ish} x e^{-ish} ds`, entrywise in the eigenbasis of `h`.
pub fn heisenberg_integral(h: &CMatrix, x: &CMatrix, t: f64) -> Result<CMatrix> {
    let eig = eigh(h)?;
    let w = &eig.vectors;
    let xt = w.adjoint() * x * w;
    let d = h.nrows();
    let y = CMatrix::from_fn(d, d, |a, b| {
        let om = eig.values[a] - eig.values[b];
        xt[(a, b)] * C64::from_polar(t * sinc(t * om / 2.0), t * om / 2.0)
    });
    Ok(w * y * w.adjoint())
}

/// Energy flux observable `Φ = [iv, h_E]` on the joint space.
pub fn flux_observable(model: &RIModel) -> CMatrix {
    let he = kron(&crate::qops::identity(model.dim_s()), &model.h_e);
    commutator(&(&model.v * I), &he)
}

/// `∫₀^τ e^{ish}Φe^{-ish}ds`: the energy gained by the probe during one interaction.
pub fn integrated_flux(model: &RIModel) -> Result<CMatrix> {
    heisenberg_integral(&model.hamiltonian(), &flux_observable(model), model.tau)
}

/// `v − e^{iτh}ve^{-iτh}`.
pub fn interaction_release(model: &RIModel) -> Result<CMatrix> {
    let u = model.propagator()?;
    Ok(&model.v - u.adjoint() * &model.v * u)
}

/// `Tr[(ρ⊗ρ_E) A]`.
pub fn joint_expectation(rho: &CMatrix, model: &RIModel, a: &CMatrix) -> Result<f64> {
    if rho.nrows() != model.dim_s() {
        return Err(Error::DimensionMismatch { expected: model.dim_s(), got: rho.nrows() });
    }
    Ok((kron(rho, model.rho_e.matrix()) * a).trace().re)
}

/// Work observable expectation `δE(n)` with `ρ(n) = L_n(ρ(n−1))`.
pub fn work_step(rho_prev: &DensityMatrix, model_n: &RIModel, model_next: &RIModel) -> Result<f64> {
    if model_n.dim_s() != model_next.dim_s() {
        return Err(Error::DimensionMismatch { expected: model_n.dim_s(), got: model_next.dim_s() });
    }
    let u = model_n.propagator()?;
    let rho_n = Superoperator::from_kraus(&model_n.kraus()?)?.apply(rho_prev.matrix());
    let rotated = u.adjoint() * &model_n.v * &u;
    Ok(joint_expectation(&rho_n, model_next, &model_next.v)? - joint_expectation(rho_prev.matrix(), model_n, &rotated)?)
}

/// Inverse temperature of a Gibbs probe state.
pub fn probe_beta(model: &RIModel) -> Result<f64> {
    let eig = eigh(&model.h_e)?;
    let rho = eig.vectors.adjoint() * model.rho_e.matrix() * &eig.vectors;
    let comm = max_abs(&commutator(&model.h_e, model.rho_e.matrix()));
    if comm > 1e-10 {
        return Err(Error::NotGibbs { beta: f64::NAN, defect: comm });
    }
    let pts: Vec<(f64, f64)> = (0..model.dim_e()).map(|i| (eig.values[i], rho[(i, i)].re)).collect();
    if pts.iter().any(|p| p.1 <= 0.0) {
        return Err(Error::NotGibbs { beta: f64::INFINITY, defect: pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min) });
    }
    let spread = pts.last().unwrap().0 - pts[0].0;
    let beta = if spread.abs() < 1e-14 {
        0.0
    } else {
        let logs: Vec<(f64, f64)> = pts.iter().map(|&(e, p)| (e, -p.ln())).collect();
        crate::spectral::linear_slope(&logs)
    };
    let defect = max_abs(&(model.rho_e.matrix() - gibbs(&model.h_e, beta)?.matrix()));
    if defect > 1e-10 {
        return Err(Error::NotGibbs { beta, defect });
    }
    Ok(beta)
}

/// Per-step thermodynamic bookkeeping along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermoLedger {
    pub work_steps: Vec<f64>,
    pub total_work: f64,
    /// Energy gained by the probe of each step.
    pub probe_gain_steps: Vec<f64>,
    /// `−β_k Tr[ρ(k−1)⊗ρ_E ∫Φ]` per step.
    pub entropy_steps: Vec<f64>,
    pub total_entropy: f64,
    /// `ΔE_j(n)`: energy lost by beam `j`.
    pub per_beam_energy: Vec<f64>,
    pub beams: Vec<usize>,
}

impl ThermoLedger {
    /// Ledger over the steps whose successor model is known. Random schedules
    /// lose their last step, which only fixes the next coupling.
    pub fn from_trajectory(schedule: &InteractionSchedule, traj: &Trajectory) -> Result<Self> {
        let recs = &traj.step_records;
        let models: Vec<RIModel> = recs.iter().map(|r| schedule.model_for(r)).collect::<Result<_>>()?;
        let n_beams = match schedule {
            InteractionSchedule::KBeam { maps } => maps.len(),
            InteractionSchedule::Random { sampler, .. } => sampler.atoms().len().max(1),
            InteractionSchedule::Ideal { .. } => 1,
        };
        let beam_of = |k: usize| -> usize {
            match schedule {
                InteractionSchedule::KBeam { .. } => recs[k].beam.unwrap_or(0),
                InteractionSchedule::Random { sampler, .. } => match (&sampler.law, recs[k].params) {
                    (ParamLaw::Mixture(entries), Some(p)) => entries.iter().position(|e| e.0 == p).unwrap_or(0),
                    _ => 0,
                },
                InteractionSchedule::Ideal { .. } => 0,
            }
        };
        let next_model = |k: usize| -> Result<Option<RIModel>> {
            if k + 1 < models.len() {
                return Ok(Some(models[k + 1].clone()));
            }
            match schedule {
                InteractionSchedule::Ideal { map } => Ok(Some(map.model.clone())),
                InteractionSchedule::KBeam { maps } => Ok(Some(maps[(k + 1) % maps.len()].model.clone())),
                InteractionSchedule::Random { .. } => Ok(None),
            }
        };
        let mut ledger = ThermoLedger::empty(n_beams);
        for (k, model) in models.iter().enumerate() {
            let Some(next) = next_model(k)? else { break };
            let prev = &traj.states[k];
            let flux = integrated_flux(model)?;
            let gain = joint_expectation(prev.matrix(), model, &flux)?;
            let beta = probe_beta(model)?;
            ledger.push(work_step(prev, model, &next)?, gain, -beta * gain, beam_of(k));
        }
        Ok(ledger)
    }

    pub fn empty(n_beams: usize) -> Self {
        ThermoLedger {
            work_steps: Vec::new(),
            total_work: 0.0,
            probe_gain_steps: Vec::new(),
            entropy_steps: Vec::new(),
            total_entropy: 0.0,
            per_beam_energy: vec![0.0; n_beams],
            beams: Vec::new(),
        }
    }

    fn push(&mut self, work: f64, gain: f64, entropy: f64, beam: usize) {
        self.work_steps.push(work);
        self.total_work += work;
        self.probe_gain_steps.push(gain);
        self.entropy_steps.push(entropy);
        self.total_entropy += entropy;
        if beam >= self.per_beam_energy.len() {
            self.per_beam_energy.resize(beam + 1, 0.0);
        }
        self.per_beam_energy[beam] -= gain;
        self.beams.push(beam);
    }

    pub fn len(&self) -> usize {
        self.work_steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.work_steps.is_empty()
    }

    /// Ledger of `self` followed by `other`.
    pub fn concat(&self, other: &ThermoLedger) -> ThermoLedger {
        let mut out = self.clone();
        for k in 0..other.len() {
            out.push(other.work_steps[k], other.probe_gain_steps[k], other.entropy_steps[k], other.beams[k]);
        }
        out
    }
}

/// `Tr[(ρ(n) − ρ(0)) log ρ_ref]`, the boundary term of `ΔS(n)`.
pub fn entropy_boundary(rho_n: &DensityMatrix, rho_0: &DensityMatrix, reference: &DensityMatrix) -> Result<f64> {
    if reference.min_eigenvalue() <= 0.0 {
        return Err(Error::InvalidState("reference state must be faithful".into()));
    }
    let log_ref = herm_fn(reference.matrix(), |x| c(x.ln(), 0.0))?;
    Ok(((rho_n.matrix() - rho_0.matrix()) * log_ref).trace().re)
}

/// One stationary interaction: the system state before it, its weight and the
/// probe inverse temperature.
#[derive(Debug, Clone)]
pub struct CycleEntry {
    pub model: RIModel,
    pub state: DensityMatrix,
    pub weight: f64,
}

/// Stationary regime as a weighted list of interactions per period.
///
/// Ideal: one entry over `τ`. Random: one entry per atom at `ρ₊` over `E[τ]`.
/// Deterministic K beams: entry `j` at the state preceding beam `j` over `Στ_j`.
#[derive(Debug, Clone)]
pub struct StationaryCycle {
    pub entries: Vec<CycleEntry>,
    pub period: f64,
}

fn invariant_of(map: &Superoperator) -> Result<DensityMatrix> {
    let r = analyze(map, DEFAULT_TOL_PERIPHERAL)?;
    if !r.satisfies_e {
        return Err(Error::ConditionE("map fails condition (E)".into()));
    }
    r.invariant_state.ok_or_else(|| Error::NoInvariantState("no invariant state".into()))
}

impl StationaryCycle {
    pub fn ideal(map: &ReducedMap) -> Result<Self> {
        let state = invariant_of(&map.superop)?;
        Ok(StationaryCycle {
            entries: vec![CycleEntry { model: map.model.clone(), state, weight: 1.0 }],
            period: map.model.tau,
        })
    }

    /// Exact expectation over a finitely supported sampler, at the invariant state of `E[L]`.
    pub fn random(sampler: &Sampler) -> Result<Self> {
        let ParamLaw::Mixture(entries) = &sampler.law else {
            return Err(Error::InvalidParameter("exact random cycle needs a finite mixture".into()));
        };
        let (mean, _) = sampler.mean_map(0, 0)?;
        let state = invariant_of(&mean)?;
        Self::random_at(sampler.atoms().iter().zip(entries).map(|(a, e)| (a.model.clone(), e.1)).collect(), state)
    }

    /// Weighted models sharing the stationary state `state`.
    pub fn random_at(models: Vec<(RIModel, f64)>, state: DensityMatrix) -> Result<Self> {
        let period = models.iter().map(|(m, w)| w * m.tau).sum();
        let entries = models.into_iter().map(|(model, weight)| CycleEntry { model, state: state.clone(), weight }).collect();
        Ok(StationaryCycle { entries, period })
    }

    /// Monte Carlo cycle from `samples` draws, at the invariant state of the sampled `E[L]`.
    pub fn random_sampled(sampler: &Sampler, samples: usize, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        if samples == 0 {
            return Err(Error::InvalidParameter("need at least one sample".into()));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<ReducedMap> = (0..samples).map(|_| sampler.draw(&mut rng).map(|d| d.1)).collect::<Result<_>>()?;
        let mut mean = Superoperator::zero(draws[0].dim());
        for m in &draws {
            mean = mean.add(&m.superop.scale(c(1.0 / samples as f64, 0.0)));
        }
        let state = invariant_of(&mean)?;
        Self::random_at(draws.into_iter().map(|m| (m.model, 1.0 / samples as f64)).collect(), state)
    }

    /// Uniform random choice among `maps`.
    pub fn random_uniform(maps: &[ReducedMap]) -> Result<Self> {
        let k = maps.len();
        if k == 0 {
            return Err(Error::InvalidParameter("need at least one beam".into()));
        }
        let mut mean = Superoperator::zero(maps[0].dim());
        for m in maps {
            mean = mean.add(&m.superop.scale(c(1.0 / k as f64, 0.0)));
        }
        let state = invariant_of(&mean)?;
        Self::random_at(maps.iter().map(|m| (m.model.clone(), 1.0 / k as f64)).collect(), state)
    }

    /// Cyclic beams `0, 1, …, K−1`; beam `j` meets the stationary state left by beam `j−1`.
    pub fn deterministic(maps: &[ReducedMap]) -> Result<Self> {
        let k = maps.len();
        let sup: Vec<Superoperator> = maps.iter().map(|m| m.superop.clone()).collect();
        let states = crate::dynamics::kbeam_invariant_states(&sup)?;
        let entries = (0..k)
            .map(|j| CycleEntry { model: maps[j].model.clone(), state: states[(j + k - 1) % k].clone(), weight: 1.0 })
            .collect();
        Ok(StationaryCycle { entries, period: maps.iter().map(|m| m.model.tau).sum() })
    }

    fn weighted(&self, f: impl Fn(&CycleEntry) -> Result<f64>) -> Result<Vec<f64>> {
        self.entries.iter().map(|e| Ok(e.weight * f(e)? / self.period)).collect()
    }

    /// Mean work per unit time from `v − e^{iτh}ve^{-iτh}`.
    pub fn mean_work(&self) -> Result<f64> {
        Ok(self.weighted(|e| joint_expectation(e.state.matrix(), &e.model, &interaction_release(&e.model)?))?.iter().sum())
    }

    /// Mean work per unit time from the integrated flux.
    pub fn mean_work_flux(&self) -> Result<f64> {
        Ok(self.weighted(|e| joint_expectation(e.state.matrix(), &e.model, &integrated_flux(&e.model)?))?.iter().sum())
    }

    /// `φ_j`: energy lost per unit time by each entry.
    pub fn beam_fluxes(&self) -> Result<Vec<f64>> {
        Ok(self
            .weighted(|e| joint_expectation(e.state.matrix(), &e.model, &integrated_flux(&e.model)?))?
            .into_iter()
            .map(|x| -x)
            .collect())
    }

    /// Inverse temperatures of the probes; fails when a probe is not Gibbs.
    pub fn betas(&self) -> Result<Vec<f64>> {
        self.entries.iter().map(|e| probe_beta(&e.model)).collect()
    }

    /// Mean entropy production per unit time `E[β·flux]/E[τ]`.
    pub fn entropy_production(&self) -> Result<f64> {
        let betas = self.betas()?;
        let phi = self.beam_fluxes()?;
        Ok(-betas.iter().zip(&phi).map(|(b, f)| b * f).sum::<f64>())
    }
}

/// Kinetic coefficients with their coarse estimate and asymmetry.
#[derive(Debug, Clone, Serialize)]
pub struct KineticCoefficients {
    pub l: Vec<Vec<f64>>,
    /// Central differences at the coarse step, for an error estimate.
    pub l_coarse: Vec<Vec<f64>>,
    pub extrapolation_error: f64,
    pub asymmetry: f64,
}

/// `L_jk = ∂φ_j/∂X_k` at `X = 0`, where `β_k = β_ref − X_k`.
///
/// `fluxes` maps the beam inverse temperatures to the flux vector. Central
/// differences at `h` and `h/2` are combined by Richardson extrapolation.
pub fn kinetic_coefficients<F>(fluxes: F, beta_ref: f64, k: usize, h: f64) -> Result<KineticCoefficients>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0) || k == 0 {
        return Err(Error::InvalidParameter("need h > 0 and at least one beam".into()));
    }
    let derivative = |col: usize, step: f64| -> Result<Vec<f64>> {
        let mut plus = vec![beta_ref; k];
        let mut minus = vec![beta_ref; k];
        plus[col] -= step;
        minus[col] += step;
        let (fp, fm) = (fluxes(&plus)?, fluxes(&minus)?);
        Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * step)).collect())
    };
    let mut l = vec![vec![0.0; k]; k];
    let mut l_coarse = vec![vec![0.0; k]; k];
    let mut err: f64 = 0.0;
    for col in 0..k {
        let d1 = derivative(col, h)?;
        let d2 = derivative(col, h / 2.0)?;
        for row in 0..k {
            let r = (4.0 * d2[row] - d1[row]) / 3.0;
            l[row][col] = r;
            l_coarse[row][col] = d1[row];
            err = err.max((r - d2[row]).abs());
        }
    }
    let mut asym: f64 = 0.0;
    for j in 0..k {
        for i in 0..k {
            asym = asym.max((l[j][i] - l[i][j]).abs());
        }
    }
    Ok(KineticCoefficients { l, l_coarse, extrapolation_error: err, asymmetry: asym })
}
