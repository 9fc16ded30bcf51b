use riqs::qops::{c, from_real_diag, identity, max_abs, CMatrix};
use riqs::weaklimit::{
    exp_superop, gamma_infinity, generators, sampled_observable_norm, scaling_study, spin_coupling, ChainCoupling, Regime, ScalingTable, DEFAULT_TOL_CLUSTER,
};
use serde::Deserialize;
use serde_json::Value;

use super::RunResult;
use crate::config::params;
use crate::report::{Context, Report, Table};

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct WeakConfig {
    /// `[E, E0, beta, tau]` of the spin chain used in both scaling studies.
    spin: [f64; 4],
    lambdas: Vec<f64>,
    taus: Vec<f64>,
    time: f64,
    tol_weak_order: f64,
    tol_critical_order: f64,
    qutrit_lambda: f64,
    qutrit_tau: f64,
    semigroup_times: Vec<f64>,
    observable_samples: usize,
    cold_beta: f64,
    tol_kill: f64,
    tol_cp: f64,
    tol_contraction: f64,
    tol_zero_temperature: f64,
}

impl Default for WeakConfig {
    fn default() -> Self {
        WeakConfig {
            spin: [1.0, 1.4, 0.7, 0.9],
            lambdas: vec![0.2, 0.1, 0.05],
            taus: vec![0.1, 0.05, 0.025],
            time: 1.0,
            tol_weak_order: 0.6,
            tol_critical_order: 0.3,
            qutrit_lambda: 0.2,
            qutrit_tau: 0.6,
            semigroup_times: vec![0.1, 1.0, 5.0],
            observable_samples: 100,
            cold_beta: 60.0,
            tol_kill: 1e-12,
            tol_cp: 1e-10,
            tol_contraction: 1e-9,
            tol_zero_temperature: 1e-9,
        }
    }
}

/// Three-level system coupled to a two-mode chain through non-commuting couplings.
pub fn qutrit(lambda: f64, tau: f64) -> riqs::Result<ChainCoupling> {
    let h = from_real_diag(&[0.0, 0.7, 1.9]);
    let v1 = CMatrix::from_fn(3, 3, |i, j| if j == i + 1 { c(0.4, 0.1) } else { c(0.0, 0.0) });
    let v2 = CMatrix::from_fn(3, 3, |i, j| if i == 0 && j == 2 { c(0.3, 0.0) } else { c(0.0, 0.0) });
    ChainCoupling::new(h, vec![0.7, 1.9], vec![v1, v2], 0.8, tau, lambda)
}

fn rows(t: &mut Table, regime: &str, s: &ScalingTable) {
    for r in &s.rows {
        t.push(vec![regime.into(), r.param.into(), r.steps.into(), r.error.into(), r.semigroup_error.unwrap_or(f64::NAN).into()]);
    }
}

pub fn run(value: &Value, ctx: &Context) -> RunResult {
    let p: WeakConfig = params(value)?;
    let mut rep = Report::default();
    let [e, e0, beta, tau] = p.spin;
    let sc = spin_coupling(e, e0, beta, tau, 0.0)?;
    let weak = scaling_study(&sc, &Regime::WeakCoupling { lambdas: p.lambdas.clone(), t: p.time }, DEFAULT_TOL_CLUSTER)?;
    let crit = scaling_study(&sc, &Regime::Critical { taus: p.taus.clone(), t: p.time }, DEFAULT_TOL_CLUSTER)?;
    rep.quantity("weak_fitted_order", weak.fitted_order);
    rep.quantity("critical_fitted_order", crit.fitted_order);
    rep.quantity("weak_fitted_constant", weak.fitted_constant);
    rep.quantity("critical_fitted_constant", crit.fitted_constant);
    rep.at_most(ctx, "weak-coupling order vs 2", (weak.fitted_order - 2.0).abs(), p.tol_weak_order);
    rep.at_most(ctx, "critical-scaling order vs 1", (crit.fitted_order - 1.0).abs(), p.tol_critical_order);
    let mut t = Table::new("scaling", &["regime", "parameter", "steps", "error", "semigroup_error"]);
    rows(&mut t, "weak", &weak);
    rows(&mut t, "critical", &crit);

    let q = qutrit(p.qutrit_lambda, p.qutrit_tau)?;
    let g = generators(&q, DEFAULT_TOL_CLUSTER)?;
    rep.at_most(ctx, "dissipator annihilates the identity", max_abs(&g.dissipator.apply(&identity(3))), p.tol_kill);
    let mut sg = Table::new("semigroup", &["t", "min_choi_eigenvalue", "sampled_norm"]);
    let (mut min_choi, mut max_norm) = (f64::INFINITY, 0.0f64);
    for (k, &tt) in p.semigroup_times.iter().enumerate() {
        let e = exp_superop(&g.lindbladian, tt)?;
        let choi = e.dual().min_choi_eigenvalue();
        let norm = sampled_observable_norm(&e, p.observable_samples, ctx.seed.wrapping_add(k as u64));
        min_choi = min_choi.min(choi);
        max_norm = max_norm.max(norm);
        sg.push(vec![tt.into(), choi.into(), norm.into()]);
    }
    rep.at_least("semigroup completely positive", min_choi, -p.tol_cp * ctx.tol_scale);
    rep.at_most(ctx, "semigroup contractive: excess of sampled norm over 1", (max_norm - 1.0).max(0.0), p.tol_contraction);

    let cold = q.with_beta(p.cold_beta);
    let gc = generators(&cold, DEFAULT_TOL_CLUSTER)?;
    let zero_t = max_abs(&(gc.lindbladian.matrix() - gamma_infinity(&cold.h_s, &cold.vs).matrix()));
    rep.at_most(ctx, "large-beta generator vs zero-temperature limit", zero_t, p.tol_zero_temperature);
    rep.tables.extend([t, sg]);
    Ok(rep)
}
