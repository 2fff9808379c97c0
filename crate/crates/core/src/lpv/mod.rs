//! Dwell-time certificates for LPV systems with jumps: SOS program builders,
//! dwell-time bisection, controller gain recovery and grid verification.
//!
//! Polynomials live in the environment `t, θ_1..θ_N, η_1..η_N` of
//! [`VarEnv::lpv`]: `t` is the timer, `θ` the current parameter and `η` the
//! second parameter copy used by jump conditions.

mod build;
mod check;
mod field;
mod gain;
mod search;
pub mod systems;


pub use build::{build_analysis_program, build_synthesis_program, BuildOptions, LpvProgram, SolveStats, Solved};
pub use check::{check_certificate, CheckReport, ConditionKind, ConditionReport, GridSpec};
pub use field::{LyapunovField, LyapunovPoint};
pub use gain::{recover_gain, ControllerGain, GainKind};
pub use search::{bisect_dwell_time, BisectResult, DwellSearch, Probe};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::poly::{PolyError, PolyMatrix, Polynomial, VarEnv};
use crate::sdp::SdpError;
use crate::sos::SosError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpvError {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid mode parameters: {0}")]
    InvalidMode(String),
    #[error("mode {0} quantifies over derivative vertices but none are given")]
    MissingVertices(&'static str),
    #[error("mode {0} requires the jump map to be the identity")]
    JumpNotIdentity(&'static str),
    #[error("synthesis needs a nonzero input matrix")]
    NoInput,
    #[error("no certificate in range [{lo}, {hi}]")]
    NoCertificate { lo: f64, hi: f64 },
    #[error("R is not positive definite at {point:?}")]
    SingularR { point: Vec<f64> },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("certificate does not match: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Sos(#[from] SosError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Certification or synthesis problem class, with its dwell-time data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    MinDwell { dwell: f64 },
    Quadratic,
    Robust,
    RangeDwell { t_min: f64, t_max: f64 },
    SynthCt { dwell: f64 },
    SynthSd { t_min: f64, t_max: f64 },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::MinDwell { .. } => "min-dwell",
            Mode::Quadratic => "quadratic",
            Mode::Robust => "robust",
            Mode::RangeDwell { .. } => "range-dwell",
            Mode::SynthCt { .. } => "synth-ct",
            Mode::SynthSd { .. } => "synth-sd",
        }
    }

    pub fn is_synthesis(&self) -> bool {
        matches!(self, Mode::SynthCt { .. } | Mode::SynthSd { .. })
    }

    /// Whether the conditions range over derivative vertices.
    pub fn uses_vertices(&self) -> bool {
        !matches!(self, Mode::Quadratic)
    }

    /// Upper end of the timer interval on which the Lyapunov matrix lives.
    pub fn timer_horizon(&self) -> f64 {
        match *self {
            Mode::MinDwell { dwell } | Mode::SynthCt { dwell } => dwell,
            Mode::RangeDwell { t_max, .. } | Mode::SynthSd { t_max, .. } => t_max,
            Mode::Quadratic | Mode::Robust => 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), LpvError> {
        match *self {
            Mode::MinDwell { dwell } | Mode::SynthCt { dwell } => {
                if !(dwell > 0.0 && dwell.is_finite()) {
                    return Err(LpvError::InvalidMode(format!("dwell time must be positive and finite, got {dwell}")));
                }
            }
            Mode::RangeDwell { t_min, t_max } | Mode::SynthSd { t_min, t_max } => {
                if !(t_min > 0.0 && t_min <= t_max && t_max.is_finite()) {
                    return Err(LpvError::InvalidMode(format!("need 0 < T_min <= T_max < inf, got [{t_min}, {t_max}]")));
                }
            }
            Mode::Quadratic | Mode::Robust => {}
        }
        Ok(())
    }
}

/// Solved certificate matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum CertificateData {
    /// `S(τ, θ)` (constant or `θ`-only for the quadratic and robust modes).
    Lyapunov(PolyMatrix),
    /// `R` and `U` of the synthesis modes.
    Synthesis { r: PolyMatrix, u: PolyMatrix },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub mode: Mode,
    pub degree: u32,
    pub eps: f64,
    pub data: CertificateData,
    /// Solver margin of the program that produced the certificate.
    pub margin: f64,
}

impl Certificate {
    /// `S` for analysis certificates, `R` for synthesis ones.
    pub fn matrix(&self) -> &PolyMatrix {
        match &self.data {
            CertificateData::Lyapunov(s) => s,
            CertificateData::Synthesis { r, .. } => r,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix().rows()
    }

    /// Copy with every certificate matrix multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Certificate {
        let data = match &self.data {
            CertificateData::Lyapunov(m) => CertificateData::Lyapunov(m.scale(s)),
            CertificateData::Synthesis { r, u } => CertificateData::Synthesis { r: r.scale(s), u: u.scale(s) },
        };
        Certificate { data, ..self.clone() }
    }
}

/// `ẋ = A(ρ)x + B(ρ)u`, `x⁺ = J(ρ)x`, with `ρ` in a semialgebraic set and
/// `ρ̇` in the convex hull of `vertices`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpvSystem {
    pub name: String,
    pub env: VarEnv,
    pub n: usize,
    pub m: usize,
    pub n_params: usize,
    pub a: PolyMatrix,
    pub b: PolyMatrix,
    pub j: PolyMatrix,
    /// Box enclosing the parameter set, used for sampling.
    pub bounds: Vec<(f64, f64)>,
    /// `g_i(θ) ≥ 0`.
    pub generators: Vec<Polynomial>,
    /// `h_i(θ) = 0`.
    pub equalities: Vec<Polynomial>,
    /// Derivative vertices `μ(θ)`, one polynomial per parameter.
    pub vertices: Vec<Vec<Polynomial>>,
}

impl LpvSystem {
    /// System `ẋ = A x` with `J = I`, no input, parameters on `bounds` (box
    /// generators added automatically) and constant derivative `0`.
    pub fn new(name: impl Into<String>, a: PolyMatrix, bounds: Vec<(f64, f64)>) -> Result<Self, LpvError> {
        let n_params = bounds.len();
        let env = VarEnv::lpv(n_params);
        let arity = env.arity();
        if a.arity() != arity {
            return Err(LpvError::InvalidSystem(format!("A has arity {}, expected {arity}", a.arity())));
        }
        let n = a.rows();
        let mut sys = LpvSystem {
            name: name.into(),
            env,
            n,
            m: 0,
            n_params,
            b: PolyMatrix::zeros(arity, n, 0),
            j: PolyMatrix::identity(arity, n),
            a,
            bounds: Vec::new(),
            generators: Vec::new(),
            equalities: Vec::new(),
            vertices: vec![vec![Polynomial::zero(arity); n_params]],
        };
        sys.set_box(bounds);
        sys.validate()?;
        Ok(sys)
    }

    pub fn arity(&self) -> usize {
        self.env.arity()
    }

    pub fn theta(&self, i: usize) -> usize {
        1 + i
    }

    pub fn eta(&self, i: usize) -> usize {
        1 + self.n_params + i
    }

    pub fn thetas(&self) -> Vec<usize> {
        (0..self.n_params).map(|i| self.theta(i)).collect()
    }

    pub fn etas(&self) -> Vec<usize> {
        (0..self.n_params).map(|i| self.eta(i)).collect()
    }

    /// Full evaluation point `(τ, θ, 0)`.
    pub fn point(&self, tau: f64, theta: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.arity()];
        p[0] = tau;
        p[1..1 + theta.len()].copy_from_slice(theta);
        p
    }

    /// Box generators `(θ_i − lo)(hi − θ_i)`; a degenerate side becomes the equality `θ_i = lo`.
    fn set_box(&mut self, bounds: Vec<(f64, f64)>) {
        let arity = self.arity();
        self.generators.clear();
        self.equalities.clear();
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            let x = Polynomial::var(arity, self.theta(i));
            let l = &x - &Polynomial::constant(arity, lo);
            if hi > lo {
                let u = &Polynomial::constant(arity, hi) - &x;
                self.generators.push(&l * &u);
            } else {
                self.equalities.push(l);
            }
        }
        self.bounds = bounds;
    }

    pub fn with_input(mut self, b: PolyMatrix) -> Result<Self, LpvError> {
        self.m = b.cols();
        self.b = b;
        self.validate()?;
        Ok(self)
    }

    pub fn with_jump(mut self, j: PolyMatrix) -> Result<Self, LpvError> {
        self.j = j;
        self.validate()?;
        Ok(self)
    }

    /// Replaces the box generators with explicit ones; `bounds` stay as the sampling box.
    pub fn with_generators(mut self, g: Vec<Polynomial>) -> Result<Self, LpvError> {
        self.generators = g;
        self.validate()?;
        Ok(self)
    }

    pub fn with_equalities(mut self, h: Vec<Polynomial>) -> Result<Self, LpvError> {
        self.equalities = h;
        self.validate()?;
        Ok(self)
    }

    /// Box `𝒟 = Π [lo_i, hi_i]`; yields its `2^N` vertices.
    pub fn with_derivative_box(self, nu: &[(f64, f64)]) -> Result<Self, LpvError> {
        if nu.len() != self.n_params {
            return Err(LpvError::InvalidSystem(format!(
                "derivative box has {} sides for {} parameters",
                nu.len(),
                self.n_params
            )));
        }
        let arity = self.arity();
        let mut verts: Vec<Vec<Polynomial>> = vec![Vec::new()];
        for &(lo, hi) in nu {
            if lo > hi {
                return Err(LpvError::InvalidSystem(format!("derivative interval [{lo}, {hi}] is empty")));
            }
            verts = verts
                .into_iter()
                .flat_map(|v| {
                    [lo, hi].into_iter().map(move |c| {
                        let mut w = v.clone();
                        w.push(Polynomial::constant(arity, c));
                        w
                    })
                })
                .collect();
        }
        self.with_derivative_vertices(verts)
    }

    /// Explicit vertex list; duplicates are dropped.
    pub fn with_derivative_vertices(mut self, vertices: Vec<Vec<Polynomial>>) -> Result<Self, LpvError> {
        let mut uniq: Vec<Vec<Polynomial>> = Vec::new();
        for v in vertices {
            if !uniq.contains(&v) {
                uniq.push(v);
            }
        }
        self.vertices = uniq;
        self.validate()?;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Replaces the variable names (same layout as [`VarEnv::lpv`]).
    pub fn with_env(mut self, env: VarEnv) -> Result<Self, LpvError> {
        if env.arity() != self.arity() {
            return Err(LpvError::InvalidSystem("environment arity differs".into()));
        }
        self.env = env;
        Ok(self)
    }

    pub fn jump_is_identity(&self) -> bool {
        self.j == PolyMatrix::identity(self.arity(), self.n)
    }

    pub fn input_is_zero(&self) -> bool {
        self.b.is_zero()
    }

    pub fn validate(&self) -> Result<(), LpvError> {
        let bad = |msg: String| Err(LpvError::InvalidSystem(msg));
        let arity = self.arity();
        let (n, m) = (self.n, self.m);
        if n == 0 {
            return bad("state dimension is zero".into());
        }
        for (label, mat, rows, cols) in [("A", &self.a, n, n), ("B", &self.b, n, m), ("J", &self.j, n, n)] {
            if mat.rows() != rows || mat.cols() != cols {
                return bad(format!("{label} is {}x{}, expected {rows}x{cols}", mat.rows(), mat.cols()));
            }
            if mat.arity() != arity && rows * cols > 0 {
                return bad(format!("{label} has arity {}, expected {arity}", mat.arity()));
            }
            if let Some(v) = mat.variables().into_iter().find(|&v| !self.is_theta(v)) {
                return bad(format!("{label} depends on `{}`, which is not a parameter", self.env.name(v)));
            }
        }
        if self.bounds.len() != self.n_params {
            return bad(format!("{} bounds for {} parameters", self.bounds.len(), self.n_params));
        }
        if let Some((lo, hi)) = self.bounds.iter().find(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
            return bad(format!("parameter bounds [{lo}, {hi}] are not a finite interval"));
        }
        for (label, set) in [("generator", &self.generators), ("equality", &self.equalities)] {
            for p in set.iter() {
                if p.arity() != arity {
                    return bad(format!("{label} has arity {}, expected {arity}", p.arity()));
                }
                if p.is_constant() {
                    return bad(format!("{label} `{}` is constant", p.render(&self.env)));
                }
                if let Some(v) = p.variables().into_iter().find(|&v| !self.is_theta(v)) {
                    return bad(format!("{label} depends on `{}`, which is not a parameter", self.env.name(v)));
                }
            }
        }
        for v in &self.vertices {
            if v.len() != self.n_params {
                return bad(format!("derivative vertex has {} components for {} parameters", v.len(), self.n_params));
            }
            for p in v {
                if p.arity() != arity || p.variables().into_iter().any(|x| !self.is_theta(x)) {
                    return bad("derivative vertices must be polynomials in the parameters".into());
                }
            }
        }
        Ok(())
    }

    fn is_theta(&self, v: usize) -> bool {
        (1..=self.n_params).contains(&v)
    }

    /// `A`, `B` and `J` at a parameter value.
    pub fn matrices_at(&self, theta: &[f64]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let p = self.point(0.0, theta);
        (self.a.eval(&p), self.b.eval(&p), self.j.eval(&p))
    }

    /// Numeric derivative vertices at `θ`.
    pub fn vertices_at(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        let p = self.point(0.0, theta);
        self.vertices.iter().map(|v| v.iter().map(|q| q.eval(&p)).collect()).collect()
    }

    /// Whether `θ` satisfies the generators and equalities up to `tol`.
    pub fn contains(&self, theta: &[f64], tol: f64) -> bool {
        let p = self.point(0.0, theta);
        self.generators.iter().all(|g| g.eval(&p) >= -tol) && self.equalities.iter().all(|h| h.eval(&p).abs() <= tol)
    }
}
