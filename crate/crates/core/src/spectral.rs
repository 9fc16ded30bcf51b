//! Peripheral spectrum of channels, invariant states, convergence rates,
//! Riesz projections and the `#` spectral average.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qops::{
    c, complex_list_serde, eig_general, eigh, frobenius, hermitize, identity, kron, trace, trace_norm, unvec,
    CMatrix, CVector, DensityMatrix, Superoperator, C64, ONE,
};

pub const DEFAULT_TOL_PERIPHERAL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    #[serde(with = "complex_list_serde")]
    pub eigenvalues: Vec<C64>,
    #[serde(with = "complex_list_serde")]
    pub peripheral: Vec<C64>,
    pub satisfies_e: bool,
    /// `-log|λ₂|`, absent when the subleading spectrum is zero.
    pub gap: Option<f64>,
    /// Number of eigenvalues within the peripheral tolerance of 1.
    pub one_cluster_dim: usize,
    pub invariant_state: Option<DensityMatrix>,
}

/// Spectrum of a plain matrix split into peripheral part, 1-cluster and gap.
#[derive(Debug, Clone)]
pub struct PeripheralInfo {
    pub eigenvalues: Vec<C64>,
    pub peripheral: Vec<C64>,
    pub one_cluster_dim: usize,
    pub gap: Option<f64>,
}

pub fn peripheral_info(m: &CMatrix, tol_peripheral: f64) -> Result<PeripheralInfo> {
    let eig = eig_general(m, 1e-9)?;
    let values = eig.values;
    let radius = values.first().map(|z| z.norm()).unwrap_or(0.0);
    if radius > 1.0 + 1e-8 {
        return Err(Error::InvalidParameter(format!("spectral radius {radius} exceeds 1")));
    }
    let peripheral: Vec<C64> = values.iter().cloned().filter(|z| z.norm() > 1.0 - tol_peripheral).collect();
    let one_cluster_dim = values.iter().filter(|z| (*z - ONE).norm() < tol_peripheral).count();
    let mut skipped = false;
    let mut second = None;
    for z in &values {
        if !skipped && (*z - ONE).norm() < tol_peripheral {
            skipped = true;
            continue;
        }
        second = Some(z.norm());
        break;
    }
    let gap = match second {
        Some(r) if r > 0.0 => Some(-r.ln()),
        _ => None,
    };
    Ok(PeripheralInfo { eigenvalues: values, peripheral, one_cluster_dim, gap })
}

/// Classify the peripheral spectrum of a channel and extract its invariant state.
pub fn analyze(map: &Superoperator, tol_peripheral: f64) -> Result<SpectralReport> {
    let info = peripheral_info(map.matrix(), tol_peripheral)?;
    let satisfies_e = info.peripheral.len() == 1 && info.one_cluster_dim == 1;
    let invariant_state = if info.one_cluster_dim == 1 { Some(invariant_state(map)?) } else { None };
    Ok(SpectralReport {
        eigenvalues: info.eigenvalues,
        peripheral: info.peripheral,
        satisfies_e,
        gap: info.gap,
        one_cluster_dim: info.one_cluster_dim,
        invariant_state,
    })
}

/// Null vector of `M - I`, normalized to a state.
pub fn invariant_state(map: &Superoperator) -> Result<DensityMatrix> {
    let d = map.dim();
    let shifted = map.matrix() - identity(d * d);
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::ConvergenceFailure { residual: f64::NAN })?;
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let null = CVector::from_iterator(d * d, v_t.row(k).iter().map(|z| z.conj()));
    let x = unvec(&null, d);
    let tr = trace(&x);
    if tr.norm() < 1e-12 {
        return Err(Error::NoInvariantState("eigenvector at 1 is traceless".into()));
    }
    let x = hermitize(&(x / tr));
    repair_state(x)
}

/// Clip small negative eigenvalues and renormalize; larger negativity is an error.
pub fn repair_state(x: CMatrix) -> Result<DensityMatrix> {
    let eig = eigh(&x)?;
    let min = eig.values[0];
    if min < -1e-8 {
        return Err(Error::NoInvariantState(format!("eigenvector at 1 has eigenvalue {min:.3e}")));
    }
    let clipped = eig.apply_fn(|e| c(e.max(0.0), 0.0));
    let tr = trace(&clipped).re;
    DensityMatrix::new(hermitize(&(clipped / c(tr, 0.0))))
}

#[derive(Debug, Clone)]
pub struct PowerConvergence {
    pub final_state: DensityMatrix,
    pub invariant: DensityMatrix,
    /// `‖Lⁿρ − ρ₊‖₁` for n = 0..=steps.
    pub distances: Vec<f64>,
    /// Least-squares slope of `log distance` against n over the whole run.
    pub slope: f64,
}

pub fn power_converge(map: &Superoperator, rho0: &DensityMatrix, n: usize) -> Result<PowerConvergence> {
    let report = analyze(map, DEFAULT_TOL_PERIPHERAL)?;
    if !report.satisfies_e {
        return Err(Error::ConditionE("peripheral spectrum is not the simple eigenvalue 1".into()));
    }
    let inv = report.invariant_state.expect("simple eigenvalue 1 has a state");
    let mut x = rho0.matrix().clone();
    let mut distances = Vec::with_capacity(n + 1);
    distances.push(trace_norm(&(&x - inv.matrix())));
    for _ in 0..n {
        x = hermitize(&map.apply(&x));
        distances.push(trace_norm(&(&x - inv.matrix())));
    }
    let slope = fit_log_slope(&distances, 0, n);
    let final_state = repair_state(x)?;
    Ok(PowerConvergence { final_state, invariant: inv, distances, slope })
}

/// Least-squares slope of `ln y_k` against k on `from..=to`, skipping non-positive values.
pub fn fit_log_slope(y: &[f64], from: usize, to: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (from..=to.min(y.len().saturating_sub(1)))
        .filter(|&k| y[k] > 0.0)
        .map(|k| (k as f64, y[k].ln()))
        .collect();
    linear_slope(&pts)
}

pub fn linear_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Cesàro mean `(1/N) Σ_{n<N} Lⁿ(ρ)`.
pub fn ergodic_mean(map: &Superoperator, rho0: &DensityMatrix, n: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("ergodic mean needs N >= 1".into()));
    }
    let mut x = rho0.matrix().clone();
    let mut acc = x.clone();
    for _ in 1..n {
        x = map.apply(&x);
        acc += &x;
    }
    repair_state(hermitize(&(acc / c(n as f64, 0.0))))
}

#[derive(Debug, Clone)]
pub struct RieszProjection {
    pub projector: CMatrix,
    pub nodes: usize,
    pub idempotency_residual: f64,
    pub rank: usize,
}

/// `(1/2πi)∮(z − M)⁻¹ dz` over the circle `|z − center| = radius` by the trapezoid rule.
pub fn riesz_projection(m: &CMatrix, center: C64, radius: f64) -> Result<RieszProjection> {
    let n = m.nrows();
    let eig = eig_general(m, 1e-9)?;
    let distance = eig.values.iter().map(|z| ((z - center).norm() - radius).abs()).fold(f64::INFINITY, f64::min);
    if distance < 1e-8 {
        return Err(Error::SpectrumOnContour { distance });
    }
    let id = identity(n);
    let quad = |nodes: usize| -> Result<CMatrix> {
        let mut acc = CMatrix::zeros(n, n);
        for k in 0..nodes {
            let w = C64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / nodes as f64);
            let res = (&id * (center + w) - m)
                .try_inverse()
                .ok_or(Error::SpectrumOnContour { distance })?;
            acc += res * w;
        }
        Ok(acc / c(nodes as f64, 0.0))
    };
    let mut nodes = 64;
    loop {
        let p = quad(nodes)?;
        let resid = frobenius(&(&p * &p - &p));
        if resid < 1e-9 {
            let rank = trace(&p).re.round().max(0.0) as usize;
            return Ok(RieszProjection { projector: p, nodes, idempotency_residual: resid, rank });
        }
        if nodes >= 1 << 14 {
            return Err(Error::ConvergenceFailure { residual: resid });
        }
        nodes *= 2;
    }
}

/// Grouping of index pairs `(a, b)` of `h0` eigenvalues by the phase `e^{iτ(E_a−E_b)}`.
#[derive(Debug, Clone)]
pub struct PhaseClusters {
    /// Unitary whose column `a + b d` is `vec(|w_a><w_b|)`.
    pub basis: CMatrix,
    /// Cluster label of every column of `basis`.
    pub labels: Vec<usize>,
    pub count: usize,
}

pub fn phase_clusters(h0: &CMatrix, tau: f64, tol_cluster: f64) -> Result<PhaseClusters> {
    let eig = eigh(h0)?;
    let d = eig.values.len();
    let w = &eig.vectors;
    let basis = kron(&w.conjugate(), w);
    let phases: Vec<C64> = (0..d * d)
        .map(|k| {
            let (a, b) = (k % d, k / d);
            C64::from_polar(1.0, tau * (eig.values[a] - eig.values[b]))
        })
        .collect();
    let mut labels = vec![usize::MAX; d * d];
    let mut reps: Vec<C64> = Vec::new();
    for k in 0..d * d {
        if labels[k] != usize::MAX {
            continue;
        }
        let id = reps.len();
        reps.push(phases[k]);
        let mut stack = vec![k];
        labels[k] = id;
        while let Some(j) = stack.pop() {
            for l in 0..d * d {
                if labels[l] == usize::MAX && (phases[l] - phases[j]).norm() < tol_cluster {
                    labels[l] = id;
                    stack.push(l);
                }
            }
        }
    }
    for i in 0..d * d {
        for j in 0..d * d {
            if labels[i] != labels[j] {
                let dist = (phases[i] - phases[j]).norm();
                if dist < 100.0 * tol_cluster {
                    return Err(Error::AmbiguousCluster(format!(
                        "phases {:.3e} apart are near the cluster tolerance {tol_cluster:.1e}",
                        dist
                    )));
                }
            }
        }
    }
    Ok(PhaseClusters { basis, labels, count: reps.len() })
}

impl PhaseClusters {
    /// `K# = Σ_j P_j K P_j`.
    pub fn sharp(&self, k: &CMatrix) -> CMatrix {
        let mut kp = self.basis.adjoint() * k * &self.basis;
        let n = kp.nrows();
        for i in 0..n {
            for j in 0..n {
                if self.labels[i] != self.labels[j] {
                    kp[(i, j)] = C64::new(0.0, 0.0);
                }
            }
        }
        &self.basis * kp * self.basis.adjoint()
    }
}

/// Spectral average of `K` over the eigenprojections of `X -> e^{iτh0} X e^{-iτh0}`.
pub fn sharp(k: &Superoperator, h0: &CMatrix, tau: f64, tol_cluster: f64) -> Result<Superoperator> {
    let clusters = phase_clusters(h0, tau, tol_cluster)?;
    Superoperator::from_matrix(clusters.sharp(k.matrix()))
}
