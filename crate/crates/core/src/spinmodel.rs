//! Two-level system coupled to two-level probes by an exchange interaction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{c, from_real_diag, from_rows, gibbs, kron, CMatrix, Superoperator, C64, ONE, ZERO};
use crate::rdm::RIModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinParams {
    /// System excitation energy.
    pub e: f64,
    /// Probe excitation energy.
    pub e0: f64,
    pub lambda: f64,
    pub tau: f64,
    pub beta: f64,
}

/// Lowering operator `|0><1|` in the basis (ground, excited).
pub fn lowering() -> CMatrix {
    from_rows(&[vec![ZERO, ONE], vec![ZERO, ZERO]])
}

pub fn raising() -> CMatrix {
    lowering().adjoint()
}

pub fn number() -> CMatrix {
    from_real_diag(&[0.0, 1.0])
}

/// `sin(x)/x` with the limit 1 at 0.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl SpinParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.e > 0.0 && self.e0 > 0.0 && self.tau > 0.0) {
            return Err(Error::InvalidParameter("need E, E0, tau > 0".into()));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.e - self.e0
    }

    pub fn nu(&self) -> f64 {
        self.delta().hypot(self.lambda)
    }

    pub fn mu(&self) -> f64 {
        (self.e + self.e0).hypot(self.lambda)
    }

    pub fn z(&self) -> f64 {
        1.0 + (-self.beta * self.e0).exp()
    }

    pub fn beta_star(&self) -> f64 {
        self.e0 / self.e * self.beta
    }

    /// `(λ/ν) sin(ντ n/2)`, with the `ν → 0` limit.
    fn s_of(&self, n: f64) -> f64 {
        let half = self.tau * n / 2.0;
        self.lambda * half * sinc(self.nu() * half)
    }

    fn c_of(&self, n: f64) -> C64 {
        let half = self.tau * n / 2.0;
        c((self.nu() * half).cos(), self.delta() * half * sinc(self.nu() * half))
    }

    pub fn e0_eigenvalue(&self) -> f64 {
        1.0 - self.s_of(1.0).powi(2)
    }

    pub fn interaction(&self) -> CMatrix {
        let (a, ad) = (lowering(), raising());
        (kron(&a, &ad) + kron(&ad, &a)) * c(self.lambda / 2.0, 0.0)
    }

    /// Full dipole coupling `(λ/2)(a+a*)⊗(b+b*)`.
    pub fn dipole_interaction(&self) -> CMatrix {
        let x = lowering() + raising();
        kron(&x, &x) * c(self.lambda / 2.0, 0.0)
    }

    pub fn h_s(&self) -> CMatrix {
        number() * c(self.e, 0.0)
    }

    pub fn h_e(&self) -> CMatrix {
        number() * c(self.e0, 0.0)
    }
}

/// Exchange-coupled model with a Gibbs probe.
pub fn build(p: &SpinParams) -> Result<RIModel> {
    p.validate()?;
    let h_e = p.h_e();
    let rho_e = gibbs(&h_e, p.beta)?;
    RIModel::new(p.h_s(), h_e, p.interaction(), p.tau, rho_e)
}

/// Same system and probes with the full dipole coupling.
pub fn build_dipole(p: &SpinParams) -> Result<RIModel> {
    p.validate()?;
    let h_e = p.h_e();
    let rho_e = gibbs(&h_e, p.beta)?;
    RIModel::new(p.h_s(), h_e, p.dipole_interaction(), p.tau, rho_e)
}

/// Closed-form Kraus operators `[V00, V10, V01, V11]`.
pub fn closed_form_kraus(p: &SpinParams) -> Result<[CMatrix; 4]> {
    p.validate()?;
    let z = p.z();
    let g = 1.0 / z.sqrt();
    let x = (-p.beta * p.e0 / 2.0).exp() / z.sqrt();
    let phase = |n: f64| C64::from_polar(1.0, -p.tau * (p.e + p.e0) / 2.0 * n);
    let diag = |f: &dyn Fn(f64) -> C64| {
        CMatrix::from_fn(2, 2, |i, j| if i == j { phase(i as f64) * f(i as f64) } else { ZERO })
    };
    let v00 = diag(&|n| p.c_of(n).conj()) * c(g, 0.0);
    let v10 = diag(&|n| c(p.s_of(1.0 - n), 0.0)) * lowering() * c(g, 0.0);
    let v01 = diag(&|n| c(p.s_of(n), 0.0)) * raising() * c(x, 0.0);
    let v11 = diag(&|n| p.c_of(1.0 - n)) * c(x, 0.0);
    Ok([v00, v10, v01, v11])
}

pub fn closed_form_channel(p: &SpinParams) -> Result<Superoperator> {
    Superoperator::from_kraus(&closed_form_kraus(p)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinSpectrum {
    pub e_plus: C64,
    pub e_minus: C64,
    pub e0: f64,
    pub beta_star: f64,
}

impl SpinSpectrum {
    pub fn values(&self) -> [C64; 4] {
        [ONE, self.e_plus, self.e_minus, c(self.e0, 0.0)]
    }
}

pub fn closed_form_spectrum(p: &SpinParams) -> Result<SpinSpectrum> {
    p.validate()?;
    let half = p.tau * (p.e + p.e0) / 2.0;
    let cc = p.c_of(1.0);
    let e_plus = C64::from_polar(1.0, half) * cc;
    let e_minus = C64::from_polar(1.0, -half) * cc.conj();
    Ok(SpinSpectrum { e_plus, e_minus, e0: p.e0_eigenvalue(), beta_star: p.beta_star() })
}

/// Gibbs state of the system at `β* = E0 β / E`.
pub fn gibbs_star(p: &SpinParams) -> Result<crate::qops::DensityMatrix> {
    gibbs(&p.h_s(), p.beta_star())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::{commutator, identity, max_abs};

    fn params() -> SpinParams {
        SpinParams { e: 1.3, e0: 0.8, lambda: 0.6, tau: 1.7, beta: 0.9 }
    }

    #[test]
    fn interaction_conserves_excitations() {
        let n_tot = kron(&number(), &identity(2)) + kron(&identity(2), &number());
        assert!(max_abs(&commutator(&params().interaction(), &n_tot)) < 1e-15);
    }

    #[test]
    fn kraus_completeness() {
        let ks = closed_form_kraus(&params()).unwrap();
        let s = ks.iter().fold(CMatrix::zeros(2, 2), |acc, k| acc + k.adjoint() * k);
        assert!(max_abs(&(s - identity(2))) < 1e-12);
    }

    #[test]
    fn resonant_full_transfer_kills_e0() {
        let p = SpinParams { e: 1.0, e0: 1.0, lambda: 1.0, tau: std::f64::consts::PI, beta: 1.0 };
        assert!(closed_form_spectrum(&p).unwrap().e0.abs() < 1e-15);
    }

    #[test]
    fn uncoupled_spectrum_on_circle() {
        let p = SpinParams { lambda: 0.0, ..params() };
        let s = closed_form_spectrum(&p).unwrap();
        assert_eq!(s.e0, 1.0);
        assert!((s.e_plus.norm() - 1.0).abs() < 1e-15);
        let ks = closed_form_kraus(&p).unwrap();
        assert!(max_abs(&ks[1]) == 0.0 && max_abs(&ks[2]) == 0.0);
    }

    #[test]
    fn degenerate_nu_limit() {
        let p = SpinParams { e: 1.0, e0: 1.0, lambda: 0.0, tau: 1.0, beta: 1.0 };
        let ks = closed_form_kraus(&p).unwrap();
        assert!(ks.iter().all(|k| k.iter().all(|z| z.re.is_finite() && z.im.is_finite())));
    }
}
