//! Result files written by `analyze` and `synthesize` and read back by
//! `check` and `simulate`.

use lpvsos::lpv::{
    BisectResult, Certificate, CertificateData, CheckReport, ConditionKind, ControllerGain, GainKind, Mode, Solved,
};
use lpvsos::poly::{Monomial, PolyMatrix, Polynomial, VarEnv};
use serde::{Deserialize, Serialize};

use crate::problem::{ProblemFile, SchemaError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModeJson {
    MinDwell { dwell: f64 },
    Quadratic,
    Robust,
    RangeDwell { t_min: f64, t_max: f64 },
    SynthCt { dwell: f64 },
    SynthSd { t_min: f64, t_max: f64 },
}

impl From<Mode> for ModeJson {
    fn from(m: Mode) -> Self {
        match m {
            Mode::MinDwell { dwell } => ModeJson::MinDwell { dwell },
            Mode::Quadratic => ModeJson::Quadratic,
            Mode::Robust => ModeJson::Robust,
            Mode::RangeDwell { t_min, t_max } => ModeJson::RangeDwell { t_min, t_max },
            Mode::SynthCt { dwell } => ModeJson::SynthCt { dwell },
            Mode::SynthSd { t_min, t_max } => ModeJson::SynthSd { t_min, t_max },
        }
    }
}

impl From<ModeJson> for Mode {
    fn from(m: ModeJson) -> Self {
        match m {
            ModeJson::MinDwell { dwell } => Mode::MinDwell { dwell },
            ModeJson::Quadratic => Mode::Quadratic,
            ModeJson::Robust => Mode::Robust,
            ModeJson::RangeDwell { t_min, t_max } => Mode::RangeDwell { t_min, t_max },
            ModeJson::SynthCt { dwell } => Mode::SynthCt { dwell },
            ModeJson::SynthSd { t_min, t_max } => Mode::SynthSd { t_min, t_max },
        }
    }
}

/// Polynomial matrix as coefficient rows against an explicit monomial basis
/// (graded-lex order over `variables`). `coefficients[k]` belongs to entry
/// `(k / cols, k % cols)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyMatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub variables: Vec<String>,
    pub basis: Vec<Vec<u32>>,
    pub coefficients: Vec<Vec<f64>>,
    /// Human-readable entries, informational only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub text: Vec<String>,
}

impl PolyMatrixJson {
    pub fn encode(m: &PolyMatrix, env: &VarEnv) -> Self {
        let mut basis: Vec<Monomial> = m.entries().iter().flat_map(|p| p.terms().map(|(mono, _)| mono.clone())).collect();
        basis.sort();
        basis.dedup();
        let coefficients = m.entries().iter().map(|p| basis.iter().map(|b| p.coeff(b)).collect()).collect();
        PolyMatrixJson {
            rows: m.rows(),
            cols: m.cols(),
            variables: (0..env.arity()).map(|i| env.name(i).to_string()).collect(),
            basis: basis.iter().map(|b| b.exps().to_vec()).collect(),
            coefficients,
            text: m.entries().iter().map(|p| p.render(env)).collect(),
        }
    }

    pub fn decode(&self, env: &VarEnv, pointer: &str) -> Result<PolyMatrix, SchemaError> {
        let arity = env.arity();
        let names: Vec<&str> = (0..arity).map(|i| env.name(i)).collect();
        if self.variables != names {
            return Err(SchemaError::new(
                format!("{pointer}/variables"),
                format!("expected {names:?}, found {:?}", self.variables),
            ));
        }
        if let Some(k) = self.basis.iter().position(|b| b.len() != arity) {
            return Err(SchemaError::new(format!("{pointer}/basis/{k}"), format!("expected {arity} exponents")));
        }
        if self.coefficients.len() != self.rows * self.cols {
            return Err(SchemaError::new(
                format!("{pointer}/coefficients"),
                format!("expected {} entries, found {}", self.rows * self.cols, self.coefficients.len()),
            ));
        }
        let mut entries = Vec::with_capacity(self.coefficients.len());
        for (k, c) in self.coefficients.iter().enumerate() {
            if c.len() != self.basis.len() {
                return Err(SchemaError::new(
                    format!("{pointer}/coefficients/{k}"),
                    format!("expected {} coefficients, found {}", self.basis.len(), c.len()),
                ));
            }
            let terms = self.basis.iter().zip(c).map(|(b, &x)| (Monomial::new(b.clone()), x));
            entries.push(Polynomial::from_terms(arity, terms));
        }
        PolyMatrix::from_rows(self.rows, self.cols, entries).map_err(|e| SchemaError::new(pointer, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateJson {
    pub mode: ModeJson,
    pub degree: u32,
    pub epsilon: f64,
    pub margin: f64,
    /// Lyapunov matrix `S` of analysis certificates.
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<PolyMatrixJson>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<PolyMatrixJson>,
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    pub u: Option<PolyMatrixJson>,
}

impl CertificateJson {
    pub fn encode(c: &Certificate, env: &VarEnv) -> Self {
        let (s, r, u) = match &c.data {
            CertificateData::Lyapunov(s) => (Some(PolyMatrixJson::encode(s, env)), None, None),
            CertificateData::Synthesis { r, u } => {
                (None, Some(PolyMatrixJson::encode(r, env)), Some(PolyMatrixJson::encode(u, env)))
            }
        };
        CertificateJson { mode: c.mode.into(), degree: c.degree, epsilon: c.eps, margin: c.margin, s, r, u }
    }

    pub fn decode(&self, env: &VarEnv) -> Result<Certificate, SchemaError> {
        let mode: Mode = self.mode.into();
        mode.validate().map_err(|e| SchemaError::new("/certificate/mode", e.to_string()))?;
        let data = match (&self.s, &self.r, &self.u, mode.is_synthesis()) {
            (Some(s), None, None, false) => CertificateData::Lyapunov(s.decode(env, "/certificate/S")?),
            (None, Some(r), Some(u), true) => CertificateData::Synthesis {
                r: r.decode(env, "/certificate/R")?,
                u: u.decode(env, "/certificate/U")?,
            },
            (_, _, _, false) => {
                return Err(SchemaError::new("/certificate", "analysis certificates carry exactly `S`"))
            }
            (_, _, _, true) => {
                return Err(SchemaError::new("/certificate", "synthesis certificates carry exactly `R` and `U`"))
            }
        };
        Ok(Certificate { mode, degree: self.degree, eps: self.epsilon, data, margin: self.margin })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainJson {
    /// `continuous` (`K(τ, θ) = U R⁻¹`) or `sampled-data` (`[K₁ K₂] = U R(0, θ)⁻¹`).
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell: Option<f64>,
    pub n: usize,
    pub m: usize,
}

impl GainJson {
    pub fn encode(g: &ControllerGain) -> Self {
        let (kind, dwell) = match g.kind {
            GainKind::Continuous { dwell } => ("continuous", Some(dwell)),
            GainKind::SampledData => ("sampled-data", None),
        };
        GainJson { kind: kind.into(), dwell, n: g.n, m: g.m }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualsJson {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverJson {
    pub status: String,
    pub margin: f64,
    pub iterations: usize,
    pub primal_vars: usize,
    pub dual_vars: usize,
    pub blocks: usize,
    pub free_vars: usize,
    pub residuals: ResidualsJson,
    pub compile_seconds: f64,
    pub solve_seconds: f64,
    pub message: String,
}

impl SolverJson {
    pub fn encode(s: &Solved) -> Self {
        let st = &s.stats;
        SolverJson {
            status: s.status.as_str().into(),
            margin: s.margin,
            iterations: st.iterations,
            primal_vars: st.primal_vars,
            dual_vars: st.dual_vars,
            blocks: st.blocks,
            free_vars: st.free_vars,
            residuals: ResidualsJson { primal: st.residuals.primal, dual: st.residuals.dual, gap: st.residuals.gap },
            compile_seconds: st.compile_time.as_secs_f64(),
            solve_seconds: st.solve_time.as_secs_f64(),
            message: s.message.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeJson {
    pub dwell: f64,
    pub status: String,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BisectionJson {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    pub probes: Vec<ProbeJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl BisectionJson {
    pub fn encode(r: &BisectResult, lo: f64, hi: f64, tol: f64) -> Self {
        BisectionJson {
            estimate: r.estimate,
            lo,
            hi,
            tol,
            probes: r
                .probes
                .iter()
                .map(|p| ProbeJson { dwell: p.dwell, status: p.status.as_str().into(), margin: p.margin })
                .collect(),
            warnings: r.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionJson {
    pub name: String,
    /// `min-eig` (must stay above `bound`) or `max-eig` (must stay below).
    pub kind: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
    pub points: usize,
    pub violations: usize,
    pub worst_point: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCheckJson {
    pub grid: usize,
    pub tol: f64,
    pub passed: bool,
    pub max_lmi_eig: f64,
    pub conditions: Vec<ConditionJson>,
}

impl GridCheckJson {
    pub fn encode(r: &CheckReport, grid: usize, tol: f64) -> Self {
        GridCheckJson {
            grid,
            tol,
            passed: r.passed,
            max_lmi_eig: r.max_lmi_eig(),
            conditions: r
                .conditions
                .iter()
                .map(|c| ConditionJson {
                    name: c.name.clone(),
                    kind: match c.kind {
                        ConditionKind::Positivity => "min-eig".into(),
                        ConditionKind::Negativity => "max-eig".into(),
                    },
                    value: c.value,
                    bound: c.bound,
                    passed: c.passed,
                    points: c.points,
                    violations: c.violations,
                    worst_point: c.worst_point.clone(),
                })
                .collect(),
        }
    }
}

/// Outcome of a command; `status` is `feasible`, `infeasible`, `marginal`,
/// `numerical-failure`, `passed` or `failed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub command: String,
    pub status: String,
    pub problem: ProblemFile,
    pub mode: ModeJson,
    pub degree: u32,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisection: Option<BisectionJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<GainJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_check: Option<GridCheckJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl ResultFile {
    pub fn parse(text: &str) -> Result<ResultFile, SchemaError> {
        let r: ResultFile = crate::problem::from_json(text)?;
        r.problem.to_system().map_err(|e| SchemaError::new(format!("/problem{}", e.pointer.trim_end_matches('/')), e.message))?;
        if r.status == "feasible" && r.certificate.is_none() {
            return Err(SchemaError::new("/certificate", "a feasible result must embed its certificate"));
        }
        if let Some(c) = &r.certificate {
            c.decode(&r.problem.env())?;
        }
        Ok(r)
    }

    pub fn decode_certificate(&self) -> Result<Option<Certificate>, SchemaError> {
        self.certificate.as_ref().map(|c| c.decode(&self.problem.env())).transpose()
    }
}
