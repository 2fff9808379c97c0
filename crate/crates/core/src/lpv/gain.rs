use nalgebra::DMatrix;

use crate::poly::PolyMatrix;

use super::{Certificate, CertificateData, LpvError, Mode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainKind {
    /// `K(τ, θ) = U(τ, θ) R(τ, θ)⁻¹` with `τ` clamped at the dwell time.
    Continuous { dwell: f64 },
    /// `K̃(θ) = U(θ) R(0, θ)⁻¹ = [K₁ K₂]`.
    SampledData,
}

/// State-feedback gain kept as the pair `(U, R)` and evaluated on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGain {
    pub kind: GainKind,
    /// Plant state dimension.
    pub n: usize,
    pub m: usize,
    pub u: PolyMatrix,
    pub r: PolyMatrix,
}

pub fn recover_gain(cert: &Certificate) -> Result<ControllerGain, LpvError> {
    let CertificateData::Synthesis { r, u } = &cert.data else {
        return Err(LpvError::Mismatch(format!("{} certificates carry no gain", cert.mode.name())));
    };
    let m = u.rows();
    let (kind, n) = match cert.mode {
        Mode::SynthCt { dwell } => (GainKind::Continuous { dwell }, r.rows()),
        Mode::SynthSd { .. } => (GainKind::SampledData, r.rows() - m),
        other => return Err(LpvError::Mismatch(format!("{} certificates carry no gain", other.name()))),
    };
    Ok(ControllerGain { kind, n, m, u: u.clone(), r: r.clone() })
}

impl ControllerGain {
    fn solve_at(&self, tau: f64, theta: &[f64]) -> Result<DMatrix<f64>, LpvError> {
        let mut p = vec![0.0; self.r.arity()];
        p[0] = tau;
        p[1..1 + theta.len()].copy_from_slice(theta);
        let r = self.r.eval(&p);
        let u = self.u.eval(&p);
        let chol = r.cholesky().ok_or_else(|| LpvError::SingularR { point: p[..1 + theta.len()].to_vec() })?;
        // R Kᵀ = Uᵀ with R symmetric.
        Ok(chol.solve(&u.transpose()).transpose())
    }

    /// Continuous-time gain `K(τ, θ)` (`m × n`).
    pub fn continuous(&self, tau: f64, theta: &[f64]) -> Result<DMatrix<f64>, LpvError> {
        match self.kind {
            GainKind::Continuous { dwell } => self.solve_at(tau.clamp(0.0, dwell), theta),
            GainKind::SampledData => Err(LpvError::Mismatch("sampled-data gain queried as continuous".into())),
        }
    }

    /// Sampled-data gains `(K₁, K₂)` of sizes `m × n` and `m × m`.
    pub fn sampled(&self, theta: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>), LpvError> {
        match self.kind {
            GainKind::SampledData => {
                let k = self.solve_at(0.0, theta)?;
                Ok((k.columns(0, self.n).into_owned(), k.columns(self.n, self.m).into_owned()))
            }
            GainKind::Continuous { .. } => Err(LpvError::Mismatch("continuous gain queried as sampled-data".into())),
        }
    }

    /// `K(τ, θ)` or `K̃(θ)` depending on the kind.
    pub fn eval(&self, tau: f64, theta: &[f64]) -> Result<DMatrix<f64>, LpvError> {
        match self.kind {
            GainKind::Continuous { .. } => self.continuous(tau, theta),
            GainKind::SampledData => self.solve_at(0.0, theta),
        }
    }
}
