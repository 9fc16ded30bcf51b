use riqs::maser::{jc_rdm, rabi_resonances, relax_in_mean, sector_invariant_states, Classification, ExactEtaXi, MaserParams};
use riqs::qops::{c, max_abs, CMatrix, DensityMatrix};
use riqs::spectral::peripheral_info;
use serde::Deserialize;
use serde_json::Value;

use super::RunResult;
use crate::config::{params, SchemaError};
use crate::report::{Context, Report, Table};

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MaserConfig {
    e0: f64,
    tau: f64,
    beta: f64,
    /// Detuning and coupling ratios checked against the integer-square resonance rule.
    cases: Vec<ExactEtaXi>,
    n_max: usize,
    /// Expected to be fully resonant with a degenerate spectrum.
    degenerate: ExactEtaXi,
    degenerate_n_max: usize,
    degenerate_members: Vec<usize>,
    /// Instance with finite sectors used for the invariant states and weight conservation.
    sectors: ExactEtaXi,
    sectors_n_trunc: usize,
    initial_diagonal: Vec<f64>,
    /// Extra instance for the peripheral check, next to the two above.
    peripheral_case: ExactEtaXi,
    peripheral_n_trunc: usize,
    relax_steps: usize,
    tol_fixed: f64,
    tol_weights: f64,
    tol_peripheral: f64,
}

impl Default for MaserConfig {
    fn default() -> Self {
        MaserConfig {
            e0: 1.0,
            tau: 1.3,
            beta: 0.7,
            cases: vec![
                ExactEtaXi { eta: [0, 1], xi: [1, 1] },
                ExactEtaXi { eta: [1, 1], xi: [840, 1] },
                ExactEtaXi { eta: [1, 4], xi: [3, 4] },
                ExactEtaXi { eta: [2, 1], xi: [7, 1] },
            ],
            n_max: 80,
            degenerate: ExactEtaXi { eta: [1, 1], xi: [840, 1] },
            degenerate_n_max: 60,
            degenerate_members: vec![1, 2, 52, 53],
            sectors: ExactEtaXi { eta: [0, 1], xi: [1, 1] },
            sectors_n_trunc: 8,
            initial_diagonal: vec![0.1, 0.05, 0.2, 0.05, 0.1, 0.1, 0.2, 0.1, 0.1],
            peripheral_case: ExactEtaXi { eta: [1, 4], xi: [3, 4] },
            peripheral_n_trunc: 40,
            relax_steps: 300,
            tol_fixed: 1e-10,
            tol_weights: 1e-10,
            tol_peripheral: 1e-8,
        }
    }
}

fn integer_square(x: i128) -> bool {
    if x < 0 {
        return false;
    }
    let k = (x as f64).sqrt().round() as i128;
    (k - 1..=k + 1).any(|r| r >= 0 && r * r == x)
}

/// `ξn + η` is the square of an integer, decided in exact arithmetic.
fn resonant(x: &ExactEtaXi, n: usize) -> bool {
    let num = x.xi[0] as i128 * n as i128 * x.eta[1] as i128 + x.eta[0] as i128 * x.xi[1] as i128;
    let den = x.xi[1] as i128 * x.eta[1] as i128;
    n >= 1 && num % den == 0 && integer_square(num / den)
}

fn label(x: &ExactEtaXi) -> String {
    format!("eta={}/{} xi={}/{}", x.eta[0], x.eta[1], x.xi[0], x.xi[1])
}

pub fn run(value: &Value, ctx: &Context) -> RunResult {
    let p: MaserConfig = params(value)?;
    let mk = |x: ExactEtaXi, n: usize| MaserParams::from_exact(p.e0, x, p.tau, p.beta, n);
    let mut rep = Report::default();

    let mut res = Table::new("resonances", &["case", "n", "d_of_n", "resonant_exact", "resonant_computed"]);
    let mut mismatches = 0usize;
    for x in &p.cases {
        let q = mk(*x, p.n_max)?;
        let s = rabi_resonances(&q, p.n_max)?;
        for n in 0..=p.n_max {
            let exact = resonant(x, n);
            let got = s.resonances.contains(&n);
            let d = q.d_of(n);
            if got != exact || (d == 0.0) != (n == 0 || exact) {
                mismatches += 1;
            }
            res.push(vec![label(x).into(), n.into(), d.into(), exact.into(), got.into()]);
        }
    }
    rep.holds("resonances and zeros of D(n) match the integer-square rule", mismatches == 0);

    let qd = mk(p.degenerate, p.degenerate_n_max)?;
    let sd = rabi_resonances(&qd, p.degenerate_n_max)?;
    rep.holds("degenerate case contains the listed resonances", p.degenerate_members.iter().all(|n| sd.resonances.contains(n)));
    rep.holds("degenerate case is fully resonant and degenerate", sd.classification == Classification::FullyResonant { degenerate: true });

    let q = mk(p.sectors, p.sectors_n_trunc)?;
    if p.initial_diagonal.len() != q.dim() {
        return Err(SchemaError::new("params.initial_diagonal", format!("expected {} entries", q.dim())).into());
    }
    let s = rabi_resonances(&q, p.sectors_n_trunc)?;
    let st = sector_invariant_states(&q, &s)?;
    let m = jc_rdm(&q)?;
    let mut fix: f64 = 0.0;
    for rho in &st.states {
        fix = fix.max(max_abs(&(m.apply(rho.matrix()) - rho.matrix())));
    }
    rep.at_most(ctx, "sector invariant states are fixed", fix, p.tol_fixed);
    let r = relax_in_mean(&q, &DensityMatrix::diagonal(&p.initial_diagonal)?, p.relax_steps)?;
    rep.at_most(ctx, "sector weights are conserved", r.weight_drift, p.tol_weights);
    let mut sec = Table::new("sectors", &["sector", "first", "last", "finite", "weight"]);
    for (k, &(a, b)) in s.sectors.iter().enumerate() {
        sec.push(vec![k.into(), a.into(), b.into(), s.is_finite(k).into(), r.weights.get(k).copied().unwrap_or(f64::NAN).into()]);
    }

    let mut periph: f64 = 0.0;
    let mut count_ok = true;
    let extra = [(p.sectors, p.sectors_n_trunc), (p.peripheral_case, p.peripheral_n_trunc), (p.degenerate, p.degenerate_n_max)];
    for (x, n) in extra {
        let qq = mk(x, n)?;
        let mm = jc_rdm(&qq)?;
        let ss = rabi_resonances(&qq, n)?;
        let b0 = mm.gauge_block(0);
        for (k, &(a, b)) in ss.sectors.iter().enumerate() {
            if !ss.is_finite(k) {
                continue;
            }
            let len = b - a + 1;
            let sub = CMatrix::from_fn(len, len, |i, j| b0[(a + i, a + j)]);
            let info = peripheral_info(&sub, p.tol_peripheral)?;
            count_ok &= info.peripheral.len() == 1;
            if let Some(z) = info.peripheral.first() {
                periph = periph.max((z - c(1.0, 0.0)).norm());
            }
        }
    }
    rep.holds("each finite sector has a single peripheral eigenvalue", count_ok);
    rep.at_most(ctx, "peripheral eigenvalue equals 1", periph, p.tol_peripheral);
    rep.tables.extend([res, sec]);
    Ok(rep)
}
