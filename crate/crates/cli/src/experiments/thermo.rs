use riqs::dynamics::{InteractionParams, ParamLaw, Sampler};
use riqs::rdm::{build_rdm, ReducedMap};
use riqs::spinmodel::{build, build_dipole, sinc, SpinParams};
use riqs::thermo::{kinetic_coefficients, StationaryCycle};
use serde::Deserialize;
use serde_json::Value;

use super::toy::{default_spin, spin_family};
use super::RunResult;
use crate::config::params;
use crate::report::{Context, Report, Table};

fn zinv(p: &SpinParams, beta: f64) -> f64 {
    1.0 / (1.0 + (-beta * p.e0).exp())
}

/// Closed-form work per interaction of the dipole coupling in the stationary state.
fn dipole_work(p: &SpinParams) -> f64 {
    let s2 = |x: f64| sinc(x).powi(2);
    let (a, b) = (s2(p.nu() * p.tau / 2.0), s2(p.mu() * p.tau / 2.0));
    p.lambda.powi(2) * p.tau.powi(2) * p.e0 / 2.0 * (p.beta * p.e0 / 2.0).tanh() * a * b / (a + b)
}

fn random_beta_entropy(p: &SpinParams, atoms: &[[f64; 2]]) -> f64 {
    let eb: f64 = atoms.iter().map(|[b, w]| b * w).sum();
    let ef: f64 = atoms.iter().map(|[b, w]| zinv(p, *b) * w).sum();
    let ebf: f64 = atoms.iter().map(|[b, w]| b * zinv(p, *b) * w).sum();
    p.e0 * (1.0 - p.e0_eigenvalue()) / p.tau * (ebf - eb * ef)
}

fn deterministic_fluxes(p: &SpinParams, betas: &[f64]) -> Vec<f64> {
    let k = betas.len();
    let e0 = p.e0_eigenvalue();
    let pre = p.e0 * (1.0 - e0).powi(2) / (k as f64 * p.tau * (1.0 - e0.powi(k as i32)));
    (0..k)
        .map(|j| {
            let s: f64 = (0..k)
                .map(|m| {
                    let r = (j as i64 - m as i64 - 1).rem_euclid(k as i64) as i32;
                    (zinv(p, betas[m]) - zinv(p, betas[j])) * e0.powi(r)
                })
                .sum();
            pre * s
        })
        .collect()
}

fn random_fluxes(p: &SpinParams, betas: &[f64]) -> Vec<f64> {
    let k = betas.len() as f64;
    let e0 = p.e0_eigenvalue();
    let pre = p.e0 * (1.0 - e0) / (k * k * p.tau);
    betas.iter().map(|&bj| pre * betas.iter().map(|&bk| zinv(p, bk) - zinv(p, bj)).sum::<f64>()).collect()
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IdentityParams {
    spin: SpinParams,
    dipole_points: Vec<SpinParams>,
    /// `[beta, weight]` atoms of the random-temperature law.
    beta_atoms: Vec<[f64; 2]>,
    tol_exchange_work: f64,
    tol_dipole_work: f64,
    tol_entropy: f64,
}

impl Default for IdentityParams {
    fn default() -> Self {
        let p = default_spin();
        IdentityParams {
            spin: p,
            dipole_points: vec![
                p,
                SpinParams { e: 1.0, e0: 2.0, lambda: 0.3, tau: 0.6, beta: 1.5 },
                SpinParams { e: 0.5, e0: 1.9, lambda: 0.8, tau: 0.9, beta: 2.2 },
            ],
            beta_atoms: vec![[0.3, 0.2], [1.1, 0.5], [2.4, 0.3]],
            tol_exchange_work: 1e-12,
            tol_dipole_work: 1e-8,
            tol_entropy: 1e-10,
        }
    }
}

pub fn identities(value: &Value, ctx: &Context) -> RunResult {
    let p: IdentityParams = params(value)?;
    let mut rep = Report::default();
    let exch = StationaryCycle::ideal(&build_rdm(&build(&p.spin)?)?)?;
    let w_ex = exch.mean_work()?;
    rep.quantity("exchange_work_per_step", w_ex);
    rep.at_most(ctx, "exchange coupling does no work", w_ex.abs(), p.tol_exchange_work);

    let mut t = Table::new("dipole", &["e", "e0", "lambda", "tau", "beta", "work_flux", "closed_form", "entropy_production", "flux_form"]);
    let (mut dip, mut ent, mut flux): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for q in &p.dipole_points {
        let cyc = StationaryCycle::ideal(&build_rdm(&build_dipole(q)?)?)?;
        let w = cyc.mean_work()?;
        let ds = cyc.entropy_production()?;
        let wf = cyc.mean_work_flux()?;
        let cf = dipole_work(q) / q.tau;
        dip = dip.max((w * q.tau - dipole_work(q)).abs());
        ent = ent.max((ds - q.beta * w).abs());
        flux = flux.max((w - wf).abs());
        t.push(vec![q.e.into(), q.e0.into(), q.lambda.into(), q.tau.into(), q.beta.into(), w.into(), cf.into(), ds.into(), wf.into()]);
    }
    rep.at_most(ctx, "dipole work vs closed form", dip, p.tol_dipole_work);
    rep.at_most(ctx, "entropy production equals beta times work", ent, p.tol_entropy);
    rep.at_most(ctx, "work from the energy balance equals the flux form", flux, p.tol_entropy);

    let law = ParamLaw::Mixture(
        p.beta_atoms.iter().map(|&[b, w]| (InteractionParams { tau: p.spin.tau, beta: b, lambda: p.spin.lambda }, w)).collect(),
    );
    let cyc = StationaryCycle::random(&Sampler::new(spin_family(&p.spin), law)?)?;
    let ds = cyc.entropy_production()?;
    let expect = random_beta_entropy(&p.spin, &p.beta_atoms);
    rep.quantity("random_beta_entropy_production", ds);
    rep.at_most(ctx, "random beta entropy production vs covariance form", (ds - expect).abs(), p.tol_entropy);
    rep.tables.push(t);
    Ok(rep)
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct KbeamParams {
    spin: SpinParams,
    beta_sets: Vec<Vec<f64>>,
    tol_flux: f64,
    tol_identity: f64,
    kinetic_beta: f64,
    kinetic_beams: usize,
    kinetic_step: f64,
    tol_asymmetry: f64,
}

impl Default for KbeamParams {
    fn default() -> Self {
        KbeamParams {
            spin: default_spin(),
            beta_sets: vec![vec![0.4, 0.9, 1.7], vec![0.2, 2.0], vec![1.0, 0.5, 1.5, 0.8]],
            tol_flux: 1e-10,
            tol_identity: 1e-10,
            kinetic_beta: 0.9,
            kinetic_beams: 3,
            kinetic_step: 1e-2,
            tol_asymmetry: 1e-6,
        }
    }
}

fn beams(p: &SpinParams, betas: &[f64], dipole: bool) -> riqs::Result<Vec<ReducedMap>> {
    betas
        .iter()
        .map(|&b| {
            let q = SpinParams { beta: b, ..*p };
            build_rdm(&if dipole { build_dipole(&q)? } else { build(&q)? })
        })
        .collect()
}

pub fn kbeam(value: &Value, ctx: &Context) -> RunResult {
    let p: KbeamParams = params(value)?;
    let mut rep = Report::default();
    let mut t = Table::new("fluxes", &["set", "order", "beam", "beta", "flux", "closed_form"]);
    let (mut flux_err, mut id_err): (f64, f64) = (0.0, 0.0);
    for (s, betas) in p.beta_sets.iter().enumerate() {
        let maps = beams(&p.spin, betas, false)?;
        let det = StationaryCycle::deterministic(&maps)?.beam_fluxes()?;
        let rnd = StationaryCycle::random_uniform(&maps)?.beam_fluxes()?;
        for (order, got, cf) in [("cyclic", det, deterministic_fluxes(&p.spin, betas)), ("random", rnd, random_fluxes(&p.spin, betas))] {
            for (j, (a, b)) in got.iter().zip(&cf).enumerate() {
                flux_err = flux_err.max((a - b).abs());
                t.push(vec![s.into(), order.into(), j.into(), betas[j].into(), (*a).into(), (*b).into()]);
            }
        }
        for dipole in [false, true] {
            let maps = beams(&p.spin, betas, dipole)?;
            for cyc in [StationaryCycle::deterministic(&maps)?, StationaryCycle::random_uniform(&maps)?] {
                let phi = cyc.beam_fluxes()?;
                id_err = id_err.max((cyc.mean_work()? + phi.iter().sum::<f64>()).abs());
                let s: f64 = betas.iter().zip(&phi).map(|(b, f)| b * f).sum();
                id_err = id_err.max((cyc.entropy_production()? + s).abs());
            }
        }
    }
    rep.at_most(ctx, "stationary fluxes vs closed forms", flux_err, p.tol_flux);
    rep.at_most(ctx, "work and entropy balance", id_err, p.tol_identity);

    let spin = p.spin;
    let det = |b: &[f64]| StationaryCycle::deterministic(&beams(&spin, b, false)?)?.beam_fluxes();
    let rnd = |b: &[f64]| StationaryCycle::random_uniform(&beams(&spin, b, false)?)?.beam_fluxes();
    let kd = kinetic_coefficients(det, p.kinetic_beta, p.kinetic_beams, p.kinetic_step)?;
    let kr = kinetic_coefficients(rnd, p.kinetic_beta, p.kinetic_beams, p.kinetic_step)?;
    let mut kin = Table::new("kinetic", &["order", "i", "j", "l_ij"]);
    for (order, k) in [("cyclic", &kd), ("random", &kr)] {
        for (i, row) in k.l.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                kin.push(vec![order.into(), i.into(), j.into(), (*v).into()]);
            }
        }
    }
    if p.kinetic_beams >= 2 {
        rep.quantity("cyclic_abs_l21", kd.l[1][0].abs());
        rep.quantity("cyclic_abs_l12", kd.l[0][1].abs());
        rep.holds("cyclic order breaks reciprocity: |L21| > |L12|", kd.l[1][0].abs() > kd.l[0][1].abs());
    }
    rep.at_most(ctx, "random order satisfies Onsager reciprocity", kr.asymmetry, p.tol_asymmetry);
    rep.tables.extend([t, kin]);
    Ok(rep)
}
