use std::f64::consts::PI;

use riqs::dynamics::{random_asymptotics, run, run_substream, InteractionParams, InteractionSchedule, ModelFamily, ParamLaw, Sampler};
use riqs::qops::{c, eig_general, max_abs, CMatrix, CVector, DensityMatrix};
use riqs::rdm::build_rdm;
use riqs::spectral::{analyze, fit_log_slope, power_converge, DEFAULT_TOL_PERIPHERAL};
use riqs::spinmodel::{build, closed_form_channel, closed_form_spectrum, gibbs_star, SpinParams};
use serde::Deserialize;
use serde_json::Value;

use super::RunResult;
use crate::config::params;
use crate::report::{trajectory_table, Context, Report, Table};

pub fn default_spin() -> SpinParams {
    SpinParams { e: 1.3, e0: 0.8, lambda: 0.6, tau: 1.7, beta: 0.9 }
}

/// 20 points spread over all five parameters, including negative temperatures.
pub fn default_grid() -> Vec<SpinParams> {
    (0..20)
        .map(|k| {
            let t = k as f64;
            SpinParams {
                e: 0.4 + 0.13 * t,
                e0: 1.9 - 0.07 * t,
                lambda: 0.1 + 0.09 * ((3 * k) % 20) as f64,
                tau: 0.3 + 0.21 * ((7 * k) % 20) as f64,
                beta: -1.0 + 0.17 * ((11 * k) % 20) as f64,
            }
        })
        .collect()
}

pub fn spin_family(p: &SpinParams) -> ModelFamily {
    let unit = SpinParams { lambda: 1.0, ..*p };
    ModelFamily { h_s: unit.h_s(), h_e: unit.h_e(), v_unit: unit.interaction() }
}

fn push_params(row: &mut Vec<crate::report::Cell>, p: &SpinParams) {
    row.extend([p.e.into(), p.e0.into(), p.lambda.into(), p.tau.into(), p.beta.into()]);
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RdmParams {
    grid: Vec<SpinParams>,
    tol: f64,
}

impl Default for RdmParams {
    fn default() -> Self {
        RdmParams { grid: default_grid(), tol: 1e-10 }
    }
}

pub fn rdm(value: &Value, ctx: &Context) -> RunResult {
    let p: RdmParams = params(value)?;
    let mut rep = Report::default();
    let mut t = Table::new("grid", &["point", "e", "e0", "lambda", "tau", "beta", "max_entry_difference"]);
    let mut worst: f64 = 0.0;
    for (k, q) in p.grid.iter().enumerate() {
        let l = build_rdm(&build(q)?)?;
        let diff = max_abs(&(l.superop.matrix() - closed_form_channel(q)?.matrix()));
        worst = worst.max(diff);
        let mut row = vec![k.into()];
        push_params(&mut row, q);
        row.push(diff.into());
        t.push(row);
    }
    rep.at_most(ctx, "numeric vs closed-form channel", worst, p.tol);
    rep.tables.push(t);
    Ok(rep)
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SpectrumParams {
    grid: Vec<SpinParams>,
    tol_eigenvalues: f64,
    tol_state: f64,
    /// Points with `ντ/2π` closer than this to an integer are skipped.
    resonance_margin: f64,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        SpectrumParams { grid: default_grid(), tol_eigenvalues: 1e-9, tol_state: 1e-10, resonance_margin: 1e-3 }
    }
}

pub fn spectrum(value: &Value, ctx: &Context) -> RunResult {
    let p: SpectrumParams = params(value)?;
    let mut rep = Report::default();
    let mut spec = Table::new("spectrum", &["point", "label", "closed_re", "closed_im", "numeric_re", "numeric_im", "error"]);
    let mut inv = Table::new("invariant_state", &["point", "e", "e0", "lambda", "tau", "beta", "beta_star", "ground_weight", "state_error"]);
    let (mut eig_err, mut inv_err): (f64, f64) = (0.0, 0.0);
    let mut all_e = true;
    let mut skipped = 0usize;
    for (k, q) in p.grid.iter().enumerate() {
        let frac = (q.nu() * q.tau / (2.0 * PI)).fract();
        if frac.min(1.0 - frac) < p.resonance_margin {
            skipped += 1;
            continue;
        }
        let l = build_rdm(&build(q)?)?;
        let mut got = eig_general(l.superop.matrix(), 1e-9)?.values;
        let cf = closed_form_spectrum(q)?;
        for (label, z) in ["1", "e+", "e-", "e0"].iter().zip(cf.values()) {
            let j = (0..got.len()).min_by(|&a, &b| (got[a] - z).norm().total_cmp(&(got[b] - z).norm())).expect("four eigenvalues");
            let w = got.remove(j);
            let err = (w - z).norm();
            eig_err = eig_err.max(err);
            spec.push(vec![k.into(), (*label).into(), z.re.into(), z.im.into(), w.re.into(), w.im.into(), err.into()]);
        }
        let r = analyze(&l.superop, DEFAULT_TOL_PERIPHERAL)?;
        all_e &= r.satisfies_e;
        let (err, ground) = match &r.invariant_state {
            Some(s) => (max_abs(&(s.matrix() - gibbs_star(q)?.matrix())), s.matrix()[(0, 0)].re),
            None => (f64::INFINITY, f64::NAN),
        };
        inv_err = inv_err.max(err);
        let mut row = vec![k.into()];
        push_params(&mut row, q);
        row.extend([cf.beta_star.into(), ground.into(), err.into()]);
        inv.push(row);
    }
    rep.at_most(ctx, "eigenvalues vs {1, e+, e-, e0}", eig_err, p.tol_eigenvalues);
    rep.at_most(ctx, "invariant state vs Gibbs at beta*", inv_err, p.tol_state);
    rep.holds("unique peripheral eigenvalue 1 at every point", all_e);
    rep.quantity("skipped_resonant_points", skipped as f64);
    rep.tables.extend([spec, inv]);
    Ok(rep)
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConvergenceParams {
    spin: SpinParams,
    /// Real amplitudes of the initial pure state.
    initial: Vec<f64>,
    steps: usize,
    fit_from: usize,
    rel_tol: f64,
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        ConvergenceParams {
            spin: SpinParams { e: 1.0, e0: 1.2, lambda: 0.3, tau: 1.3, beta: 0.7 },
            initial: vec![0.8, 0.6],
            steps: 200,
            fit_from: 10,
            rel_tol: 0.05,
        }
    }
}

pub fn convergence(value: &Value, ctx: &Context) -> RunResult {
    let p: ConvergenceParams = params(value)?;
    if p.fit_from + 2 > p.steps {
        return Err(crate::config::SchemaError::new("params.fit_from", "must leave at least two points before `steps`").into());
    }
    let mut rep = Report::default();
    let l = build_rdm(&build(&p.spin)?)?;
    let psi = CVector::from_iterator(p.initial.len(), p.initial.iter().map(|&a| c(a, 0.0)));
    let rho0 = DensityMatrix::pure(&psi)?;
    let pc = power_converge(&l.superop, &rho0, p.steps)?;
    let e0 = closed_form_spectrum(&p.spin)?.e0;
    let slope = fit_log_slope(&pc.distances, p.fit_from, p.steps);
    let expect = e0.sqrt().ln();
    let mut t = Table::new("distances", &["n", "trace_distance", "sqrt_e0_power"]);
    for (n, d) in pc.distances.iter().enumerate() {
        t.push(vec![n.into(), (*d).into(), e0.sqrt().powi(n as i32).into()]);
    }
    let traj = run(&InteractionSchedule::Ideal { map: l }, &rho0, p.steps)?;
    rep.quantity("fitted_log_slope", slope);
    rep.quantity("log_sqrt_e0", expect);
    rep.at_most(ctx, "relative error of the decay rate", ((slope - expect) / expect).abs(), p.rel_tol);
    rep.tables.extend([t, trajectory_table("trajectory", &traj.states)]);
    Ok(rep)
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RandomParams {
    spin: SpinParams,
    /// Support and CDF of the tabulated interaction-time law.
    taus: Vec<f64>,
    cdf: Vec<f64>,
    tau_law_beta: f64,
    tau_law_lambda: f64,
    /// Amplitudes of the initial pure state; every amplitude after the first is multiplied by `i`.
    initial: Vec<f64>,
    streams: u64,
    steps: usize,
    tol_random_tau: f64,
    /// `[beta, weight]` atoms of the random-temperature law.
    beta_atoms: Vec<[f64; 2]>,
    beta_law_tau: f64,
    beta_law_lambda: f64,
    ergodic_steps: usize,
    tol_mean_map: f64,
    /// The ergodic mean must be within `ergodic_factor / ergodic_steps`.
    ergodic_factor: f64,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            spin: default_spin(),
            taus: (0..=20).map(|k| 0.8 + 0.06 * k as f64).collect(),
            cdf: (0..=20).map(|k| (k as f64 / 20.0).powi(2)).collect(),
            tau_law_beta: 0.9,
            tau_law_lambda: 0.7,
            initial: vec![0.6, 0.8],
            streams: 100,
            steps: 500,
            tol_random_tau: 1e-6,
            beta_atoms: vec![[0.9, 0.3], [1.0, 0.45], [1.1, 0.25]],
            beta_law_tau: 1.4,
            beta_law_lambda: 0.7,
            ergodic_steps: 10_000,
            tol_mean_map: 1e-10,
            ergodic_factor: 10.0,
        }
    }
}

pub fn random_ri(value: &Value, ctx: &Context) -> RunResult {
    let p: RandomParams = params(value)?;
    let mut rep = Report::default();
    let family = spin_family(&p.spin);
    let amps: Vec<_> = p.initial.iter().enumerate().map(|(k, &a)| if k == 0 { c(a, 0.0) } else { c(0.0, a) }).collect();
    let rho0 = DensityMatrix::pure(&CVector::from_vec(amps))?;

    let law = ParamLaw::TabulatedTau { taus: p.taus.clone(), cdf: p.cdf.clone(), beta: p.tau_law_beta, lambda: p.tau_law_lambda };
    let sched = InteractionSchedule::Random { sampler: Sampler::new(family.clone(), law)?, seed: ctx.seed };
    let target = gibbs_star(&SpinParams { beta: p.tau_law_beta, ..p.spin })?;
    let mut finals = Table::new("random_tau", &["stream", "trace_distance_at_n"]);
    let mut worst: f64 = 0.0;
    for stream in 0..p.streams {
        let traj = run_substream(&sched, &rho0, p.steps, stream)?;
        let d = traj.states[p.steps].trace_distance(&target);
        if stream == 0 {
            rep.tables.push(trajectory_table("trajectory_stream0", &traj.states));
        }
        worst = worst.max(d);
        finals.push(vec![stream.into(), d.into()]);
    }
    rep.at_most(ctx, "random tau: distance to the Gibbs state at beta", worst, p.tol_random_tau);

    let atoms: Vec<(InteractionParams, f64)> =
        p.beta_atoms.iter().map(|&[b, w]| (InteractionParams { tau: p.beta_law_tau, beta: b, lambda: p.beta_law_lambda }, w)).collect();
    let sampler = Sampler::new(family, ParamLaw::Mixture(atoms))?;
    let mut mixed = CMatrix::zeros(2, 2);
    for &[b, w] in &p.beta_atoms {
        mixed += gibbs_star(&SpinParams { tau: p.beta_law_tau, beta: b, lambda: p.beta_law_lambda, ..p.spin })?.matrix() * c(w, 0.0);
    }
    let seeds: Vec<u64> = (1..=3).map(|k| ctx.seed.wrapping_add(k)).collect();
    let r = random_asymptotics(&sampler, &rho0, p.ergodic_steps, &seeds)?;
    let inv = max_abs(&(r.invariant_state.matrix() - &mixed));
    rep.holds("mean map computed exactly", r.exact);
    rep.at_most(ctx, "E[L] invariant state vs averaged Gibbs states", inv, p.tol_mean_map);
    let mixed = DensityMatrix::new(mixed)?;
    let mut erg = Table::new("random_beta", &["seed", "ergodic_mean_distance"]);
    let mut worst_erg: f64 = 0.0;
    for (s, m) in seeds.iter().zip(&r.ergodic_means) {
        let d = m.trace_distance(&mixed);
        worst_erg = worst_erg.max(d);
        erg.push(vec![(*s).into(), d.into()]);
    }
    rep.at_most(ctx, "random beta: ergodic mean vs averaged state", worst_erg, p.ergodic_factor / p.ergodic_steps as f64);
    rep.tables.extend([finals, erg]);
    Ok(rep)
}
