use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riqs::measure::{
    asymptotic_statistics, build_instrument, correlation_decay, dual_step_matrix, eventually_probability, joint_probability, ldp, rate_function,
    scgf, spin_angle_observable, spin_spin_explicit, spin_spin_model, MeasurementSetup,
};
use riqs::qops::{c, eigenvalues, max_abs, CMatrix, DensityMatrix, C64};
use serde::Deserialize;
use serde_json::Value;

use super::{brute, RunResult};
use crate::config::params;
use crate::report::{Context, Report, Table};

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MeasureConfig {
    random_setups: u64,
    max_steps: usize,
    tol_joint: f64,
    /// Spin-spin coupling and interaction time.
    lambda: f64,
    tau: f64,
    populations: Vec<f64>,
    tol_explicit: f64,
    tol_spectrum: f64,
    decay_population: f64,
    decay_lambda: f64,
    decay_tau: f64,
    decay_theta: f64,
    decay_separations: usize,
    tol_decay: f64,
    theta: f64,
    tol_frequencies: f64,
    alphas: Vec<f64>,
    tol_scgf: f64,
    curvature_step: f64,
    tol_curvature: f64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            random_setups: 4,
            max_steps: 5,
            tol_joint: 1e-10,
            lambda: 0.7,
            tau: 0.9,
            populations: vec![0.0, 0.35, 1.0],
            tol_explicit: 1e-10,
            tol_spectrum: 1e-9,
            decay_population: 0.6,
            decay_lambda: 0.3,
            decay_tau: PI,
            decay_theta: 0.9,
            decay_separations: 30,
            tol_decay: 0.2,
            theta: 0.8,
            tol_frequencies: 1e-9,
            alphas: (-8..=8).map(|k| 0.25 * k as f64).collect(),
            tol_scgf: 1e-8,
            curvature_step: 1e-2,
            tol_curvature: 1e-6,
        }
    }
}

fn test_observable() -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| c(0.4 + i as f64 * 0.3, 0.2 * j as f64 - 0.1 * i as f64))
}

pub fn run(value: &Value, ctx: &Context) -> RunResult {
    let p: MeasureConfig = params(value)?;
    let mut rep = Report::default();

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut joint: f64 = 0.0;
    for k in 0..p.random_setups {
        let (setup, rho0) = brute::random_measurement(ctx.seed.wrapping_add(k))?;
        let inst = build_instrument(&setup)?;
        for n in 1..=p.max_steps {
            let sets: Vec<Vec<usize>> = (0..n).map(|_| vec![rng.random_range(0..setup.n_outcomes())]).collect();
            joint = joint.max((joint_probability(&inst, &rho0, &sets)? - brute::measured(&setup, &rho0, &sets)?).abs());
        }
    }
    rep.at_most(ctx, "joint outcome law vs full-tensor evolution", joint, p.tol_joint);

    let x = test_observable();
    let mut expl: f64 = 0.0;
    for &q in &p.populations {
        let num = dual_step_matrix(&spin_spin_model(q, p.lambda, p.tau)?, &x)?;
        expl = expl.max(max_abs(&(spin_spin_explicit(q, &x, p.lambda, p.tau) - num)));
    }
    rep.at_most(ctx, "explicit spin-spin step operator", expl, p.tol_explicit);
    let m = spin_spin_explicit(1.0, &x, p.lambda, p.tau);
    let (co, ph) = ((p.lambda * p.tau).cos(), C64::from_polar(1.0, 2.0 * p.tau));
    let mut got = eigenvalues(&m)?;
    let mut spec: f64 = 0.0;
    for z in [x[(0, 0)], x[(0, 0)] * ph * co, x[(0, 0)] * ph.conj() * co, x[(0, 0)] * co * co] {
        let k = (0..got.len()).min_by(|&a, &b| (got[a] - z).norm().total_cmp(&(got[b] - z).norm())).expect("four eigenvalues");
        spec = spec.max((got.remove(k) - z).norm());
    }
    rep.at_most(ctx, "pure-probe step operator spectrum", spec, p.tol_spectrum);

    let decay = MeasurementSetup::new(spin_spin_model(p.decay_population, p.decay_lambda, p.decay_tau)?, spin_angle_observable(p.decay_theta))?;
    let cd = correlation_decay(&build_instrument(&decay)?, &DensityMatrix::diagonal(&[0.3, 0.7])?, 2, &[0], &[1], p.decay_separations)?;
    let mut corr = Table::new("correlations", &["separation", "abs_covariance"]);
    for (s, v) in cd.separations.iter().zip(&cd.lhs) {
        corr.push(vec![(*s).into(), (*v).into()]);
    }
    let gap = cd.spectral_gap.unwrap_or(f64::NAN);
    rep.quantity("correlation_fitted_rate", cd.fitted_gamma);
    rep.quantity("spectral_gap", gap);
    rep.at_most(ctx, "correlation decay rate vs spectral gap (relative)", ((cd.fitted_gamma - gap) / gap).abs(), p.tol_decay);

    let up = |theta: f64| -> riqs::Result<_> {
        let s = MeasurementSetup::new(spin_spin_model(1.0, p.lambda, p.tau)?, spin_angle_observable(theta))?;
        let i = build_instrument(&s)?;
        Ok((s, i))
    };
    let (setup, inst) = up(p.theta)?;
    let st = asymptotic_statistics(&setup, &inst)?;
    let mut fm = (st.mean - setup.probe_expectation(&setup.observable)).abs();
    for (k, f) in st.frequencies.iter().enumerate() {
        fm = fm.max((f - setup.probe_expectation(&setup.projectors[k])).abs());
    }
    rep.at_most(ctx, "asymptotic frequencies and mean vs probe expectations", fm, p.tol_frequencies);
    let rho0 = DensityMatrix::diagonal(&[0.25, 0.75])?;
    let (_, inst0) = up(0.0)?;
    rep.at_most(ctx, "outcome up eventually with probability 1", (eventually_probability(&inst0, &rho0, &[1])? - 1.0).abs(), p.tol_frequencies);
    let ev = (0..setup.n_outcomes()).map(|m| eventually_probability(&inst, &rho0, &[m]).map(f64::abs)).collect::<riqs::Result<Vec<_>>>()?;
    rep.holds("tilted outcomes never become eventual", ev.iter().all(|&v| v == 0.0));

    let mut sc = Table::new("scgf", &["alpha", "scgf", "closed_form"]);
    let mut scgf_err: f64 = 0.0;
    for &a in &p.alphas {
        let ex = setup.outcomes.iter().zip(&setup.projectors).fold(CMatrix::zeros(2, 2), |acc, (m, e)| acc + e * c((a * m).exp(), 0.0));
        let (got, _) = scgf(&inst, a)?;
        let want = setup.probe_expectation(&ex).ln();
        scgf_err = scgf_err.max((got - want).abs());
        sc.push(vec![a.into(), got.into(), want.into()]);
    }
    rep.at_most(ctx, "cumulant generating function vs i.i.d. form", scgf_err, p.tol_scgf);
    let mu = setup.probe_expectation(&setup.observable);
    let var = setup.probe_expectation(&(&setup.observable * &setup.observable)) - mu * mu;
    let h = p.curvature_step;
    let coef = |h: f64| -> riqs::Result<f64> { Ok((rate_function(&inst, mu + h)? + rate_function(&inst, mu - h)?) / (2.0 * h * h)) };
    let quad = ((4.0 * coef(h / 2.0)? - coef(h)?) / 3.0 - 1.0 / (2.0 * var)).abs();
    rep.at_most(ctx, "rate function curvature at the mean vs 1/(2 Var)", quad, p.tol_curvature);
    let lo = setup.outcomes.first().copied().unwrap_or(0.0);
    let hi = setup.outcomes.last().copied().unwrap_or(0.0);
    let xs: Vec<f64> = (1..20).map(|k| lo + (hi - lo) * k as f64 / 20.0).collect();
    let lt = ldp(&inst, &[], &xs)?;
    let mut rate = Table::new("rate_function", &["x", "rate", "exposed"]);
    for ((x, r), e) in lt.xs.iter().zip(&lt.rate).zip(&lt.exposed) {
        rate.push(vec![(*x).into(), (*r).into(), (*e).into()]);
    }
    rep.holds("every tabulated x is an exposed point", lt.exposed.iter().all(|&e| e));
    rep.tables.extend([corr, sc, rate]);
    Ok(rep)
}
