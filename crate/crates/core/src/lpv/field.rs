use nalgebra::DMatrix;

use crate::poly::PolyMatrix;

use super::{Certificate, CertificateData};

/// Lyapunov matrix and its first derivatives at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovPoint {
    pub s: DMatrix<f64>,
    pub d_tau: DMatrix<f64>,
    pub d_theta: Vec<DMatrix<f64>>,
}

/// Pointwise evaluator of `S(τ, θ)`, either a polynomial matrix or the inverse
/// `R⁻¹` of a synthesis certificate. The timer is clamped to `[0, horizon]`
/// when a horizon is set.
#[derive(Debug, Clone)]
pub struct LyapunovField {
    base: PolyMatrix,
    d_tau: PolyMatrix,
    d_theta: Vec<PolyMatrix>,
    invert: bool,
    horizon: Option<f64>,
}

impl LyapunovField {
    pub fn new(m: &PolyMatrix, n_params: usize, horizon: Option<f64>, invert: bool) -> Self {
        LyapunovField {
            base: m.clone(),
            d_tau: m.diff(0),
            d_theta: (0..n_params).map(|i| m.diff(1 + i)).collect(),
            invert,
            horizon,
        }
    }

    /// `S` of an analysis certificate, or `R⁻¹` of a synthesis one.
    pub fn from_certificate(cert: &Certificate, n_params: usize) -> Self {
        let h = cert.mode.timer_horizon();
        let horizon = (h > 0.0).then_some(h);
        match &cert.data {
            CertificateData::Lyapunov(s) => Self::new(s, n_params, horizon, false),
            CertificateData::Synthesis { r, .. } => Self::new(r, n_params, horizon, true),
        }
    }

    /// The stored polynomial matrix without inversion.
    pub fn raw(cert: &Certificate, n_params: usize) -> Self {
        let h = cert.mode.timer_horizon();
        Self::new(cert.matrix(), n_params, (h > 0.0).then_some(h), false)
    }

    fn point(&self, tau: f64, theta: &[f64]) -> (Vec<f64>, bool) {
        let mut p = vec![0.0; self.base.arity()];
        let (tau, clamped) = match self.horizon {
            Some(h) if tau > h => (h, true),
            _ => (tau.max(0.0), false),
        };
        if !p.is_empty() {
            p[0] = tau;
        }
        p[1..1 + theta.len()].copy_from_slice(theta);
        (p, clamped)
    }

    /// `S` only; `None` when an inverted `R` is not positive definite.
    pub fn value(&self, tau: f64, theta: &[f64]) -> Option<DMatrix<f64>> {
        let (p, _) = self.point(tau, theta);
        let m = self.base.eval(&p);
        if self.invert {
            m.cholesky().map(|c| c.inverse())
        } else {
            Some(m)
        }
    }

    /// `S`, `∂S/∂τ` and `∂S/∂θ_i`. For `S = R⁻¹` the derivatives are `−S ∂R S`.
    pub fn at(&self, tau: f64, theta: &[f64]) -> Option<LyapunovPoint> {
        let (p, clamped) = self.point(tau, theta);
        let m = self.base.eval(&p);
        let n = m.nrows();
        let mut d_tau = if clamped { DMatrix::zeros(n, n) } else { self.d_tau.eval(&p) };
        let mut d_theta: Vec<DMatrix<f64>> = self.d_theta.iter().map(|d| d.eval(&p)).collect();
        let s = if self.invert {
            let s = m.cholesky()?.inverse();
            d_tau = -(&s * &d_tau * &s);
            for d in &mut d_theta {
                *d = -(&s * &*d * &s);
            }
            s
        } else {
            m
        };
        Some(LyapunovPoint { s, d_tau, d_theta })
    }
}
