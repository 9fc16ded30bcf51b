use riqs::dynamics::{kbeam_effective_maps, run as iterate, InteractionParams, InteractionSchedule, ParamLaw, Sampler};
use riqs::maser::{jc_rdm, ExactEtaXi, MaserParams};
use riqs::measure::build_instrument;
use riqs::qops::{check_cptp, max_abs, DensityMatrix, Superoperator};
use riqs::rdm::{build_rdm, RIModel};
use riqs::spinmodel::{build, build_dipole, closed_form_channel, SpinParams};
use riqs::weaklimit::{exp_superop, generators, DEFAULT_TOL_CLUSTER};
use serde::Deserialize;
use serde_json::Value;

use super::toy::{default_spin, spin_family};
use super::weak::qutrit;
use super::{brute, RunResult};
use crate::config::{params, SchemaError};
use crate::report::{Context, Report, Table};

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ChannelConfig {
    spin: SpinParams,
    random_models: u64,
    kbeam_betas: Vec<f64>,
    lindblad_time: f64,
    tol_cptp: f64,
    /// `[system dimension, probe dimension]` pairs for the full-tensor comparison.
    brute_dims: Vec<[usize; 2]>,
    brute_steps: usize,
    tol_brute: f64,
    replay_steps: usize,
    /// Further models to check, in the JSON form of `RIModel`; each is also compared with the joint unitary evolution.
    extra_models: Vec<RIModel>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            spin: default_spin(),
            random_models: 4,
            kbeam_betas: vec![0.5, 1.0, 2.0],
            lindblad_time: 1.0,
            tol_cptp: 1e-10,
            brute_dims: vec![[2, 2], [3, 2], [2, 3]],
            brute_steps: 4,
            tol_brute: 1e-10,
            replay_steps: 50,
            extra_models: Vec::new(),
        }
    }
}

pub fn run(value: &Value, ctx: &Context) -> RunResult {
    let p: ChannelConfig = params(value)?;
    for (k, m) in p.extra_models.iter().enumerate() {
        m.validate().map_err(|e| SchemaError::new(format!("params.extra_models[{k}]"), e.to_string()))?;
    }
    let mut rep = Report::default();
    let sp = p.spin;
    let mut channels: Vec<(String, Superoperator)> = vec![
        ("exchange".into(), build_rdm(&build(&sp)?)?.superop),
        ("dipole".into(), build_rdm(&build_dipole(&sp)?)?.superop),
        ("closed form".into(), closed_form_channel(&sp)?),
    ];
    for k in 0..p.random_models {
        let seed = ctx.seed.wrapping_add(k);
        channels.push((format!("random 3x2 seed {seed}"), build_rdm(&brute::random_model(3, 2, seed)?)?.superop));
    }
    let maps = p
        .kbeam_betas
        .iter()
        .map(|&b| Ok(build_rdm(&build_dipole(&SpinParams { beta: b, ..sp })?)?.superop))
        .collect::<riqs::Result<Vec<_>>>()?;
    for (j, m) in kbeam_effective_maps(&maps)?.into_iter().enumerate() {
        channels.push((format!("K-beam cycle from beam {j}"), m));
    }
    let mp = MaserParams::from_exact(1.0, ExactEtaXi { eta: [0, 1], xi: [1, 1] }, 1.1, 0.6, 8)?;
    channels.push(("maser".into(), jc_rdm(&mp)?.superoperator()?));
    let g = generators(&qutrit(0.2, 0.6)?, DEFAULT_TOL_CLUSTER)?;
    channels.push(("Lindblad semigroup".into(), exp_superop(&g.lindbladian, p.lindblad_time)?.dual()));
    for (k, m) in p.extra_models.iter().enumerate() {
        channels.push((format!("extra model {k}"), build_rdm(m)?.superop));
    }
    let (setup, _) = brute::random_measurement(ctx.seed)?;
    channels.push(("instrument total".into(), build_instrument(&setup)?.total));

    let mut t = Table::new("channels", &["channel", "dimension", "min_choi_eigenvalue", "unitality_defect", "passed"]);
    let mut all = true;
    let tol = p.tol_cptp * ctx.tol_scale;
    for (name, ch) in &channels {
        let chk = check_cptp(ch, tol);
        all &= chk.passed;
        t.push(vec![name.as_str().into(), ch.dim().into(), chk.min_choi_eigenvalue.into(), chk.unitality_defect.into(), chk.passed.into()]);
    }
    rep.holds("every constructed channel is CPTP", all);

    let mut bt = Table::new("brute_force", &["model", "dim_s", "dim_e", "n", "max_entry_difference"]);
    let mut brute_err: f64 = 0.0;
    for (k, &[ds, de]) in p.brute_dims.iter().enumerate() {
        let seed = ctx.seed.wrapping_add(k as u64 + 1);
        let model = brute::random_model(ds, de, seed)?;
        let rho0 = brute::random_state(ds, seed.wrapping_add(10))?;
        let traj = iterate(&InteractionSchedule::Ideal { map: build_rdm(&model)? }, &rho0, p.brute_steps)?;
        for n in 1..=p.brute_steps {
            let diff = max_abs(&(traj.states[n].matrix() - brute::unitary(&model, &rho0, n)?));
            brute_err = brute_err.max(diff);
            bt.push(vec![format!("random seed {seed}").into(), ds.into(), de.into(), n.into(), diff.into()]);
        }
    }
    for (k, model) in p.extra_models.iter().enumerate() {
        let ds = model.dim_s();
        let rho0 = DensityMatrix::maximally_mixed(ds);
        let traj = iterate(&InteractionSchedule::Ideal { map: build_rdm(model)? }, &rho0, p.brute_steps)?;
        for n in 1..=p.brute_steps {
            let diff = max_abs(&(traj.states[n].matrix() - brute::unitary(model, &rho0, n)?));
            brute_err = brute_err.max(diff);
            bt.push(vec![format!("extra {k}").into(), ds.into(), model.dim_e().into(), n.into(), diff.into()]);
        }
    }
    rep.at_most(ctx, "iterated map vs joint unitary evolution", brute_err, p.tol_brute);

    let law = ParamLaw::Mixture(vec![
        (InteractionParams { tau: 0.7, beta: 0.4, lambda: 0.6 }, 0.5),
        (InteractionParams { tau: 1.9, beta: 1.6, lambda: 0.9 }, 0.5),
    ]);
    let sched = InteractionSchedule::Random { sampler: Sampler::new(spin_family(&sp), law)?, seed: ctx.seed };
    let rho0 = DensityMatrix::basis(2, 1);
    let (a, b) = (iterate(&sched, &rho0, p.replay_steps)?, iterate(&sched, &rho0, p.replay_steps)?);
    rep.holds("random schedule replays bit-identically", a.states.iter().zip(&b.states).all(|(x, y)| x.matrix() == y.matrix()));
    rep.tables.extend([t, bt]);
    Ok(rep)
}
