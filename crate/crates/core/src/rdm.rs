//! Reduced dynamics maps `L(ρ) = Tr_E[e^{-iτh}(ρ⊗ρ_E)e^{iτh}]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{
    self, check_hermitian, commutator, eigh, hermitize, identity, kron, matrix_serde, max_abs, CMatrix, DensityMatrix,
    Superoperator, C64,
};

/// One interaction block: system and probe Hamiltonians, coupling, duration and probe state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RIModel {
    #[serde(with = "matrix_serde")]
    pub h_s: CMatrix,
    #[serde(with = "matrix_serde")]
    pub h_e: CMatrix,
    #[serde(with = "matrix_serde")]
    pub v: CMatrix,
    pub tau: f64,
    pub rho_e: DensityMatrix,
}

impl RIModel {
    pub fn new(h_s: CMatrix, h_e: CMatrix, v: CMatrix, tau: f64, rho_e: DensityMatrix) -> Result<Self> {
        let m = RIModel { h_s, h_e, v, tau, rho_e };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        check_hermitian(&self.h_s, 1e-10)?;
        check_hermitian(&self.h_e, 1e-10)?;
        check_hermitian(&self.v, 1e-10)?;
        let d = self.dim_s() * self.dim_e();
        if self.v.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.v.nrows() });
        }
        if self.rho_e.dim() != self.dim_e() {
            return Err(Error::DimensionMismatch { expected: self.dim_e(), got: self.rho_e.dim() });
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    pub fn dim_s(&self) -> usize {
        self.h_s.nrows()
    }

    pub fn dim_e(&self) -> usize {
        self.h_e.nrows()
    }

    /// Free part `h_S⊗I + I⊗h_E`.
    pub fn free_hamiltonian(&self) -> CMatrix {
        kron(&self.h_s, &identity(self.dim_e())) + kron(&identity(self.dim_s()), &self.h_e)
    }

    pub fn hamiltonian(&self) -> CMatrix {
        self.free_hamiltonian() + &self.v
    }

    pub fn propagator(&self) -> Result<CMatrix> {
        qops::propagator(&self.hamiltonian(), self.tau)
    }

    /// `‖[h_E, ρ_E]‖` in max-entry norm.
    pub fn invariance_defect(&self) -> f64 {
        max_abs(&commutator(&self.h_e, self.rho_e.matrix()))
    }

    /// Kraus operators `K_{lm} = √p_m (I⊗<l|) U (I⊗|m>)` from the spectral decomposition of ρ_E.
    pub fn kraus(&self) -> Result<Vec<CMatrix>> {
        let u = self.propagator()?;
        let (ds, de) = (self.dim_s(), self.dim_e());
        let eig = eigh(self.rho_e.matrix())?;
        let mut out = Vec::new();
        for (m, &p) in eig.values.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let sp = C64::new(p.sqrt(), 0.0);
            let phi = eig.vectors.column(m);
            for l in 0..de {
                let k = CMatrix::from_fn(ds, ds, |a, i| {
                    let mut s = C64::new(0.0, 0.0);
                    for q in 0..de {
                        s += u[(a * de + l, i * de + q)] * phi[q];
                    }
                    s * sp
                });
                out.push(k);
            }
        }
        Ok(out)
    }
}

/// A reduced dynamics map together with the model it came from.
#[derive(Debug, Clone)]
pub struct ReducedMap {
    pub superop: Superoperator,
    pub model: RIModel,
    pub warnings: Vec<String>,
}

/// Build the reduced dynamics map of `model` as a superoperator.
pub fn build_rdm(model: &RIModel) -> Result<ReducedMap> {
    model.validate()?;
    let mut warnings = Vec::new();
    let defect = model.invariance_defect();
    if defect > 1e-10 {
        warnings.push(format!("probe state does not commute with h_E (commutator norm {defect:.3e})"));
    }
    let superop = Superoperator::from_kraus(&model.kraus()?)?;
    Ok(ReducedMap { superop, model: model.clone(), warnings })
}

impl ReducedMap {
    pub fn dim(&self) -> usize {
        self.superop.dim()
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        apply_channel(&self.superop, rho)
    }

    pub fn dual(&self) -> Superoperator {
        self.superop.dual()
    }
}

/// Apply a channel, hermitize the output and validate it.
pub fn apply_channel(map: &Superoperator, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dim() != map.dim() {
        return Err(Error::DimensionMismatch { expected: map.dim(), got: rho.dim() });
    }
    let out = hermitize(&map.apply(rho.matrix()));
    let min_eig = eigh(&out)?.values[0];
    if min_eig < -1e-8 {
        return Err(Error::PositivityViolated { min_eig });
    }
    let tol = crate::qops::Tolerances { pos: 1e-8, trace: 1e-8, herm: 1e-8, eig: 1e-9 };
    DensityMatrix::with_tolerances(out, &tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::{c, from_real_diag, gibbs, propagator, Superoperator};

    #[test]
    fn uncoupled_model_is_unitary_channel() {
        let hs = from_real_diag(&[0.0, 1.3]);
        let he = from_real_diag(&[0.0, 0.7]);
        let rho_e = gibbs(&he, 1.0).unwrap();
        let m = RIModel::new(hs.clone(), he, CMatrix::zeros(4, 4), 0.9, rho_e).unwrap();
        let l = build_rdm(&m).unwrap();
        let u = propagator(&hs, 0.9).unwrap();
        let expect = Superoperator::sandwich(&u, &u.adjoint());
        assert!(max_abs(&(l.superop.matrix() - expect.matrix())) < 1e-12);
        assert!(l.warnings.is_empty());
    }

    #[test]
    fn non_invariant_probe_warns() {
        let hs = from_real_diag(&[0.0, 1.0]);
        let he = from_real_diag(&[0.0, 1.0]);
        let psi = crate::qops::CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let rho_e = DensityMatrix::pure(&psi).unwrap();
        let m = RIModel::new(hs, he, CMatrix::zeros(4, 4), 1.0, rho_e).unwrap();
        assert_eq!(build_rdm(&m).unwrap().warnings.len(), 1);
    }
}
