use riqs::lattice::{self, LatticeParams};
use serde::Deserialize;
use serde_json::Value;

use super::RunResult;
use crate::config::params;
use crate::report::{Context, Report, Table};

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LatticeConfig {
    walk: LatticeParams,
    moment_steps: Vec<usize>,
    tol_moments: f64,
    clt_steps: usize,
    tol_clt: f64,
    /// Small-`p` instance where `n = ldp_steps` is deep in the large-deviation regime.
    ldp_walk: LatticeParams,
    ldp_steps: usize,
    /// Velocities `v + ldp_offset, v + 2 ldp_offset, ...` up to `ldp_max`.
    ldp_offset: f64,
    ldp_max: f64,
    tol_ldp: f64,
    tol_symmetry: f64,
    einstein_step: f64,
    tol_einstein: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            walk: LatticeParams { e: 1.0, f: 0.6, lambda: 0.4, tau: 1.3, beta: 0.8 },
            moment_steps: vec![1, 60, 400],
            tol_moments: 1e-12,
            clt_steps: 5000,
            tol_clt: 0.02,
            ldp_walk: LatticeParams { e: 0.5, f: 0.5, lambda: 0.0345, tau: 1.3, beta: 1.0 },
            ldp_steps: 2000,
            ldp_offset: 0.05,
            ldp_max: 0.9,
            tol_ldp: 0.02,
            tol_symmetry: 1e-10,
            einstein_step: 1e-2,
            tol_einstein: 1e-6,
        }
    }
}

pub fn run(value: &Value, ctx: &Context) -> RunResult {
    let p: LatticeConfig = params(value)?;
    let mut rep = Report::default();
    let w = p.walk;
    let t = lattice::transport(&w)?;
    rep.quantity("drift", t.drift);
    rep.quantity("diffusion", t.diffusion);
    rep.quantity("mobility", t.mobility);

    let mut mom: f64 = 0.0;
    for &n in &p.moment_steps {
        let d = lattice::exact_distribution(&w, n)?;
        mom = mom.max((d.mean() / n as f64 - t.drift * w.tau).abs());
        mom = mom.max((d.variance() / n as f64 - 2.0 * t.diffusion * w.tau).abs());
    }
    rep.at_most(ctx, "exact moments vs drift and diffusion", mom, p.tol_moments);

    let n = p.clt_steps;
    let d = lattice::exact_distribution(&w, n)?;
    let mean = n as f64 * t.drift * w.tau;
    let sd = (n as f64 * 2.0 * t.diffusion * w.tau).sqrt();
    rep.at_most(ctx, "Kolmogorov distance to the normal law", d.clt_distance(mean, sd), p.tol_clt);
    let mut dist = Table::new("distribution", &["offset", "probability", "log_probability", "normal_density"]);
    for k in d.offsets() {
        let pk = d.prob(k);
        let z = (k as f64 - mean) / sd;
        let normal = (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
        dist.push(vec![k.into(), pk.into(), pk.ln().into(), normal.into()]);
    }

    let q = p.ldp_walk;
    let rf = lattice::rate_function(&q)?;
    let n = p.ldp_steps;
    let d = lattice::exact_distribution(&q, n)?;
    let v = lattice::transport(&q)?.drift * q.tau;
    let mut ldp = Table::new("ldp", &["x", "log_tail_over_n", "minus_rate", "relative_error"]);
    let mut worst: f64 = 0.0;
    let mut k = 1;
    loop {
        let x = v + k as f64 * p.ldp_offset;
        if x > p.ldp_max + 1e-12 || p.ldp_offset <= 0.0 {
            break;
        }
        let lhs = d.log_tail((n as f64 * x).ceil() as i64) / n as f64;
        let rhs = -rf.i(x);
        let rel = ((lhs - rhs) / rhs).abs();
        worst = worst.max(rel);
        ldp.push(vec![x.into(), lhs.into(), rhs.into(), rel.into()]);
        k += 1;
    }
    rep.at_most(ctx, "tail probabilities vs rate function", worst, p.tol_ldp);

    let r2 = lattice::rate_function(&w)?;
    let mut sym: f64 = 0.0;
    for k in -19..=19 {
        let x = k as f64 / 20.0;
        sym = sym.max((rf.i(x) - (-q.beta * q.e * x + rf.i(-x))).abs());
        sym = sym.max((r2.i(x) - (-w.beta * w.e * x + r2.i(-x))).abs());
    }
    rep.at_most(ctx, "fluctuation symmetry I(x) = -beta E x + I(-x)", sym, p.tol_symmetry);

    let ein = lattice::einstein_limit(w.lambda, w.tau, w.beta, p.einstein_step)?;
    rep.quantity("einstein_limit", ein.limit);
    rep.quantity("einstein_target", ein.target);
    rep.at_most(ctx, "Einstein relation mobility = beta D", ein.error, p.tol_einstein);
    rep.tables.extend([dist, ldp]);
    Ok(rep)
}
