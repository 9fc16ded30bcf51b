use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riqs::qops::{c, CMatrix, DensityMatrix};
use riqs::qwalk::{
    amplitudes, hadamard, mc_moments, random_phase_law, spectral_condition, symmetric_jumps, transfer_moments, unitarity_defect, CoinAtom, WalkSpec,
};
use riqs::weaklimit::haar_unitary;
use serde::Deserialize;
use serde_json::Value;

use super::RunResult;
use crate::config::{params, SchemaError};
use crate::report::{Context, Report, Table};

fn rotation(theta: f64) -> CMatrix {
    let (s, co) = theta.sin_cos();
    CMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
}

/// Rotations by `±0.6` dressed with phases, each of the four coins equally likely.
fn mirrored_walk(rho: DensityMatrix) -> WalkSpec {
    let mut law = random_phase_law(&rotation(0.6), &[0.0, 1.1]);
    law.extend(random_phase_law(&rotation(-0.6), &[0.0, -1.1]));
    law.iter_mut().for_each(|a| a.prob = 0.25);
    WalkSpec { d: 1, jumps: symmetric_jumps(1), law, coin_state: rho }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct WalkConfig {
    walk: WalkSpec,
    /// Same law with a coin state for which the drift vanishes.
    symmetric_walk: WalkSpec,
    steps: usize,
    trials: usize,
    max_z: f64,
    tol_unitarity: f64,
    unitarity_steps: usize,
    drift_steps: Vec<usize>,
    tol_drift: f64,
    ballistic_steps: usize,
    min_ballistic_spread: f64,
    variance_steps: Vec<usize>,
    variance_transfer_tol: f64,
    derivative_step: f64,
    transfer_tol: f64,
    spectral_grid: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walk: mirrored_walk(DensityMatrix::basis(2, 0)),
            symmetric_walk: mirrored_walk(DensityMatrix::maximally_mixed(2)),
            steps: 50,
            trials: 100_000,
            max_z: 3.0,
            tol_unitarity: 1e-10,
            unitarity_steps: 8,
            drift_steps: vec![25, 50, 100],
            tol_drift: 1e-8,
            ballistic_steps: 100,
            min_ballistic_spread: 0.1,
            variance_steps: vec![25, 50, 100, 200],
            variance_transfer_tol: 1e-3,
            derivative_step: 1e-3,
            transfer_tol: 1e-4,
            spectral_grid: 32,
        }
    }
}

pub fn run(value: &Value, ctx: &Context) -> RunResult {
    let p: WalkConfig = params(value)?;
    p.walk.validate().map_err(|e| SchemaError::new("params.walk", e.to_string()))?;
    p.symmetric_walk.validate().map_err(|e| SchemaError::new("params.symmetric_walk", e.to_string()))?;
    let mut rep = Report::default();

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut unit: f64 = 0.0;
    for d in [1, 2] {
        let spec = WalkSpec::new(d, symmetric_jumps(d), vec![CoinAtom { coin: haar_unitary(2 * d, &mut rng), prob: 1.0 }], DensityMatrix::maximally_mixed(2 * d))?;
        let coins: Vec<CMatrix> = (0..p.unitarity_steps).map(|_| haar_unitary(2 * d, &mut rng)).collect();
        unit = unit.max(unitarity_defect(&amplitudes(&spec, &coins)?));
    }
    rep.at_most(ctx, "walk amplitudes are unitary", unit, p.tol_unitarity);

    let t = transfer_moments(&p.walk, p.steps, p.derivative_step, p.transfer_tol)?;
    let mc = mc_moments(&p.walk, p.steps, p.trials, ctx.seed)?;
    let dim = p.walk.d;
    let mut mom = Table::new("moments", &["quantity", "axis_i", "axis_j", "transfer", "monte_carlo", "standard_error", "z"]);
    let mut z_max: f64 = 0.0;
    let z = |a: f64, b: f64, se: f64| if se > 0.0 { (a - b).abs() / se } else if (a - b).abs() <= 1e-12 { 0.0 } else { f64::INFINITY };
    let (tm, tc) = (t.mean_over_n(), t.cov_over_n());
    for i in 0..dim {
        let zi = z(tm[i], mc.mean_over_n[i], mc.mean_se[i]);
        z_max = z_max.max(zi);
        mom.push(vec!["mean_over_n".into(), i.into(), i.into(), tm[i].into(), mc.mean_over_n[i].into(), mc.mean_se[i].into(), zi.into()]);
        for j in 0..dim {
            let zij = z(tc[i][j], mc.cov_over_n[i][j], mc.cov_se[i][j]);
            z_max = z_max.max(zij);
            mom.push(vec!["cov_over_n".into(), i.into(), j.into(), tc[i][j].into(), mc.cov_over_n[i][j].into(), mc.cov_se[i][j].into(), zij.into()]);
        }
    }
    rep.at_most(ctx, "transfer-matrix moments vs Monte Carlo (z-score)", z_max, p.max_z);
    let mut hist = Table::new("histogram", &["position", "frequency"]);
    for (x, f) in &mc.histogram {
        let pos = x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        hist.push(vec![pos.into(), (*f).into()]);
    }

    let mut drift: f64 = 0.0;
    for &n in &p.drift_steps {
        let m = transfer_moments(&p.symmetric_walk, n, p.derivative_step, p.transfer_tol)?;
        drift = drift.max(m.mean_over_n().iter().fold(0.0, |a, v| a.max(v.abs())));
    }
    rep.at_most(ctx, "symmetric walk has no drift", drift, p.tol_drift);

    let det = WalkSpec::deterministic(hadamard(), DensityMatrix::basis(2, 0))?;
    let b = mc_moments(&det, p.ballistic_steps, 1, ctx.seed)?;
    rep.holds("deterministic coin flagged ballistic", b.ballistic);
    rep.at_least("deterministic coin spread / n^2", b.spread_over_n2[0][0], p.min_ballistic_spread);
    rep.holds("random coin satisfies the spectral condition", spectral_condition(&p.walk, p.spectral_grid)?.holds);

    let v = p
        .variance_steps
        .iter()
        .map(|&n| Ok(transfer_moments(&p.walk, n, p.derivative_step, p.variance_transfer_tol)?.cov_over_n()[0][0]))
        .collect::<riqs::Result<Vec<f64>>>()?;
    let diffs: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    rep.holds("variance / n converges monotonically", diffs.windows(2).all(|w| w[1] < w[0]));
    if let Some(last) = v.last() {
        rep.quantity("diffusion_variance_over_n", *last);
    }
    rep.tables.extend([mom, hist]);
    Ok(rep)
}
