use std::time::{Duration, Instant};

use crate::poly::{PolyMatrix, Polynomial};
use crate::sdp::{self, Residuals, SdpProblem, SdpStatus, SolverOptions};
use crate::sos::{extract_values, DecisionPolyMatrix, LinPolyMatrix, SosConstraint, SosProgram};

use super::{Certificate, CertificateData, LpvError, LpvSystem, Mode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Degree of the certificate polynomials (and base degree of the multipliers).
    pub degree: u32,
    pub eps: f64,
    /// Drop `ε` from the flow constraint of the min-dwell analysis instead of
    /// placing it on every constraint.
    pub verbatim_box: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { degree: 2, eps: 0.01, verbatim_box: false }
    }
}

impl BuildOptions {
    pub fn new(degree: u32, eps: f64) -> Self {
        BuildOptions { degree, eps, verbatim_box: false }
    }
}

/// SOS program together with the handles needed to read a certificate back.
#[derive(Debug, Clone)]
pub struct LpvProgram {
    pub mode: Mode,
    pub opts: BuildOptions,
    pub sos: SosProgram,
    lyap: DecisionPolyMatrix,
    input: Option<DecisionPolyMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub primal_vars: usize,
    pub dual_vars: usize,
    pub blocks: usize,
    pub free_vars: usize,
    pub iterations: usize,
    pub residuals: Residuals,
    pub compile_time: Duration,
    pub solve_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solved {
    pub status: SdpStatus,
    pub margin: f64,
    /// Present exactly when `status` is feasible.
    pub certificate: Option<Certificate>,
    pub stats: SolveStats,
    pub message: String,
}

impl Solved {
    pub fn is_feasible(&self) -> bool {
        self.status == SdpStatus::Feasible
    }
}

impl LpvProgram {
    /// The SDP in standard form, as handed to the solver.
    pub fn compile(&self) -> Result<SdpProblem, LpvError> {
        Ok(self.sos.compile()?.0)
    }

    pub fn solve(&self, solver: &SolverOptions) -> Result<Solved, LpvError> {
        let t0 = Instant::now();
        let (problem, map) = self.sos.compile()?;
        let compile_time = t0.elapsed();
        let t1 = Instant::now();
        let sol = sdp::solve(&problem, solver)?;
        let solve_time = t1.elapsed();
        let certificate = if sol.status == SdpStatus::Feasible {
            let lyap = extract_values(&map, &sol, &self.lyap)?;
            let data = match &self.input {
                None => CertificateData::Lyapunov(lyap),
                Some(u) => CertificateData::Synthesis { r: lyap, u: extract_values(&map, &sol, u)? },
            };
            Some(Certificate { mode: self.mode, degree: self.opts.degree, eps: self.opts.eps, data, margin: sol.margin })
        } else {
            None
        };
        Ok(Solved {
            status: sol.status,
            margin: sol.margin,
            certificate,
            stats: SolveStats {
                primal_vars: problem.n_primal_vars(),
                dual_vars: problem.n_rows(),
                blocks: problem.blocks.len(),
                free_vars: problem.n_free,
                iterations: sol.iterations,
                residuals: sol.residuals,
                compile_time,
                solve_time,
            },
            message: sol.message,
        })
    }
}

/// Shared pieces of every builder.
struct Ctx<'a> {
    sys: &'a LpvSystem,
    arity: usize,
    thetas: Vec<usize>,
    etas: Vec<usize>,
    opts: BuildOptions,
}

impl<'a> Ctx<'a> {
    fn new(sys: &'a LpvSystem, opts: BuildOptions) -> Self {
        Ctx { sys, arity: sys.arity(), thetas: sys.thetas(), etas: sys.etas(), opts }
    }

    fn clock_vars(&self) -> Vec<usize> {
        let mut v = vec![0];
        v.extend(&self.thetas);
        v
    }

    fn pair_vars(&self) -> Vec<usize> {
        let mut v = self.thetas.clone();
        v.extend(&self.etas);
        v
    }

    /// `(t − lo)(hi − t)`, nonnegative exactly on `[lo, hi]`.
    fn interval(&self, lo: f64, hi: f64) -> Polynomial {
        let t = Polynomial::var(self.arity, 0);
        let a = &t - &Polynomial::constant(self.arity, lo);
        let b = &Polynomial::constant(self.arity, hi) - &t;
        &a * &b
    }

    fn to_eta(&self, p: &Polynomial) -> Polynomial {
        self.thetas.iter().zip(&self.etas).fold(p.clone(), |q, (&th, &et)| q.rename(th, et))
    }

    fn mat_to_eta(&self, m: &PolyMatrix) -> PolyMatrix {
        self.thetas.iter().zip(&self.etas).fold(m.clone(), |q, (&th, &et)| q.rename(th, et))
    }

    fn lin_to_eta(&self, m: &LinPolyMatrix) -> LinPolyMatrix {
        self.thetas.iter().zip(&self.etas).fold(m.clone(), |q, (&th, &et)| q.rename(th, et))
    }

    /// `Σ_i ∂S/∂θ_i μ_i(θ)`.
    fn d_theta_mu(&self, s: &LinPolyMatrix, mu: &[Polynomial]) -> Result<LinPolyMatrix, LpvError> {
        let mut acc = LinPolyMatrix::zeros(self.arity, s.rows(), s.cols());
        for (&th, m) in self.thetas.iter().zip(mu) {
            if !m.is_zero() {
                acc = acc.add(&s.diff(th).mul_poly(m))?;
            }
        }
        Ok(acc)
    }

    fn constraint(
        &self,
        label: String,
        expr: LinPolyMatrix,
        vars: Vec<usize>,
        ineqs: Vec<Polynomial>,
        eqs: Vec<Polynomial>,
        margin: f64,
    ) -> SosConstraint {
        SosConstraint { label, expr, vars, ineqs, eqs, margin, multiplier_degree: self.opts.degree }
    }

    fn g_theta(&self) -> Vec<Polynomial> {
        self.sys.generators.clone()
    }

    fn h_theta(&self) -> Vec<Polynomial> {
        self.sys.equalities.clone()
    }

    fn g_both(&self) -> Vec<Polynomial> {
        let mut g = self.g_theta();
        g.extend(self.sys.generators.iter().map(|p| self.to_eta(p)));
        g
    }

    fn h_both(&self) -> Vec<Polynomial> {
        let mut h = self.h_theta();
        h.extend(self.sys.equalities.iter().map(|p| self.to_eta(p)));
        h
    }

    fn with_clock(&self, clock: Polynomial) -> Vec<Polynomial> {
        let mut g = vec![clock];
        g.extend(self.g_theta());
        g
    }

    fn flow_margin(&self) -> f64 {
        if self.opts.verbatim_box {
            0.0
        } else {
            self.opts.eps
        }
    }
}

fn check_common(sys: &LpvSystem, mode: &Mode, opts: &BuildOptions) -> Result<(), LpvError> {
    sys.validate()?;
    mode.validate()?;
    if !(opts.eps >= 0.0 && opts.eps.is_finite()) {
        return Err(LpvError::InvalidMode(format!("epsilon must be finite and nonnegative, got {}", opts.eps)));
    }
    if mode.uses_vertices() && sys.vertices.is_empty() {
        return Err(LpvError::MissingVertices(mode.name()));
    }
    Ok(())
}

/// SOS program of an analysis mode: min-dwell, quadratic, robust or range-dwell.
pub fn build_analysis_program(sys: &LpvSystem, mode: Mode, opts: BuildOptions) -> Result<LpvProgram, LpvError> {
    check_common(sys, &mode, &opts)?;
    let cx = Ctx::new(sys, opts);
    let n = sys.n;
    let eps = opts.eps;
    let mut sos = SosProgram::new(cx.arity);
    let lyap = match mode {
        Mode::MinDwell { dwell } => {
            let s = sos.declare_decision(n, n, true, &cx.clock_vars(), opts.degree);
            let sm = s.matrix();
            let clock = cx.interval(0.0, dwell);
            sos.add_sos_constraint(cx.constraint(
                "positivity".into(),
                sm.clone(),
                cx.clock_vars(),
                cx.with_clock(clock.clone()),
                cx.h_theta(),
                eps,
            ))?;
            let he = sm.right_mul(&sys.a)?.he()?;
            let s_end = sm.fix(0, dwell);
            let he_end = s_end.right_mul(&sys.a)?.he()?;
            for (k, mu) in sys.vertices.iter().enumerate() {
                let lhs = sm.diff(0).add(&cx.d_theta_mu(sm, mu)?)?.add(&he)?;
                sos.add_sos_constraint(cx.constraint(
                    format!("flow[{k}]"),
                    lhs.scale(-1.0),
                    cx.clock_vars(),
                    cx.with_clock(clock.clone()),
                    cx.h_theta(),
                    cx.flow_margin(),
                ))?;
            }
            let j_eta = cx.mat_to_eta(&sys.j);
            let jump = cx
                .lin_to_eta(&s_end)
                .sub(&sm.fix(0, 0.0).left_mul(&j_eta.transpose())?.right_mul(&j_eta)?)?;
            sos.add_sos_constraint(cx.constraint("jump".into(), jump, cx.pair_vars(), cx.g_both(), cx.h_both(), 0.0))?;
            for (k, mu) in sys.vertices.iter().enumerate() {
                let lhs = cx.d_theta_mu(&s_end, mu)?.add(&he_end)?;
                sos.add_sos_constraint(cx.constraint(
                    format!("boundary[{k}]"),
                    lhs.scale(-1.0),
                    cx.thetas.clone(),
                    cx.g_theta(),
                    cx.h_theta(),
                    eps,
                ))?;
            }
            s
        }
        Mode::Quadratic | Mode::Robust => {
            if !sys.jump_is_identity() {
                return Err(LpvError::JumpNotIdentity(mode.name()));
            }
            let robust = mode == Mode::Robust;
            let (vars, deg) = if robust { (cx.thetas.clone(), opts.degree) } else { (Vec::new(), 0) };
            let p = sos.declare_decision(n, n, true, &vars, deg);
            let pm = p.matrix();
            sos.add_sos_constraint(cx.constraint(
                "positivity".into(),
                pm.clone(),
                vars.clone(),
                if robust { cx.g_theta() } else { Vec::new() },
                if robust { cx.h_theta() } else { Vec::new() },
                eps,
            ))?;
            let he = pm.right_mul(&sys.a)?.he()?;
            let zero_mu = vec![Polynomial::zero(cx.arity); sys.n_params];
            let vertices = if robust { sys.vertices.clone() } else { vec![zero_mu] };
            for (k, mu) in vertices.iter().enumerate() {
                let lhs = cx.d_theta_mu(pm, mu)?.add(&he)?;
                sos.add_sos_constraint(cx.constraint(
                    format!("flow[{k}]"),
                    lhs.scale(-1.0),
                    cx.thetas.clone(),
                    cx.g_theta(),
                    cx.h_theta(),
                    eps,
                ))?;
            }
            p
        }
        Mode::RangeDwell { t_min, t_max } => {
            let s = sos.declare_decision(n, n, true, &cx.clock_vars(), opts.degree);
            let sm = s.matrix();
            let clock = cx.interval(0.0, t_max);
            sos.add_sos_constraint(cx.constraint(
                "positivity".into(),
                sm.clone(),
                cx.clock_vars(),
                cx.with_clock(clock.clone()),
                cx.h_theta(),
                eps,
            ))?;
            let he = sm.right_mul(&sys.a)?.he()?;
            for (k, mu) in sys.vertices.iter().enumerate() {
                let lhs = cx.d_theta_mu(sm, mu)?.sub(&sm.diff(0))?.add(&he)?;
                sos.add_sos_constraint(cx.constraint(
                    format!("flow[{k}]"),
                    lhs.scale(-1.0),
                    cx.clock_vars(),
                    cx.with_clock(clock.clone()),
                    cx.h_theta(),
                    cx.flow_margin(),
                ))?;
            }
            // The timer variable doubles as the post-jump timer σ ∈ [T_min, T_max].
            let jump = sm.fix(0, 0.0).sub(&sm.left_mul(&sys.j.transpose())?.right_mul(&sys.j)?)?;
            sos.add_sos_constraint(cx.constraint(
                "jump".into(),
                jump,
                cx.clock_vars(),
                cx.with_clock(cx.interval(t_min, t_max)),
                cx.h_theta(),
                eps,
            ))?;
            s
        }
        Mode::SynthCt { .. } | Mode::SynthSd { .. } => {
            return Err(LpvError::InvalidMode(format!("{} is a synthesis mode", mode.name())))
        }
    };
    Ok(LpvProgram { mode, opts, sos, lyap, input: None })
}

/// SOS program of a synthesis mode: continuous-time gain or sampled-data gain.
/// The margin `ε` enters the positivity and flow conditions; jumps only need `⪯ 0`.
pub fn build_synthesis_program(sys: &LpvSystem, mode: Mode, opts: BuildOptions) -> Result<LpvProgram, LpvError> {
    check_common(sys, &mode, &opts)?;
    if sys.m == 0 || sys.input_is_zero() {
        return Err(LpvError::NoInput);
    }
    let cx = Ctx::new(sys, opts);
    let (n, m) = (sys.n, sys.m);
    let eps = opts.eps;
    let mut sos = SosProgram::new(cx.arity);
    let (lyap, input) = match mode {
        Mode::SynthCt { dwell } => {
            let r = sos.declare_decision(n, n, true, &cx.clock_vars(), opts.degree);
            let u = sos.declare_decision(m, n, false, &cx.clock_vars(), opts.degree);
            let (rm, um) = (r.matrix(), u.matrix());
            let clock = cx.interval(0.0, dwell);
            sos.add_sos_constraint(cx.constraint(
                "positivity".into(),
                rm.clone(),
                cx.clock_vars(),
                cx.with_clock(clock.clone()),
                cx.h_theta(),
                eps,
            ))?;
            let phi = rm.left_mul(&sys.a)?.add(&um.left_mul(&sys.b)?)?;
            let he = phi.he()?;
            let r_end = rm.fix(0, dwell);
            let he_end = phi.fix(0, dwell).he()?;
            for (k, mu) in sys.vertices.iter().enumerate() {
                let lhs = rm.diff(0).add(&cx.d_theta_mu(rm, mu)?)?.sub(&he)?;
                sos.add_sos_constraint(cx.constraint(
                    format!("flow[{k}]"),
                    lhs,
                    cx.clock_vars(),
                    cx.with_clock(clock.clone()),
                    cx.h_theta(),
                    eps,
                ))?;
            }
            for (k, mu) in sys.vertices.iter().enumerate() {
                let lhs = cx.d_theta_mu(&r_end, mu)?.sub(&he_end)?;
                sos.add_sos_constraint(cx.constraint(
                    format!("boundary[{k}]"),
                    lhs,
                    cx.thetas.clone(),
                    cx.g_theta(),
                    cx.h_theta(),
                    eps,
                ))?;
            }
            let j_eta = cx.mat_to_eta(&sys.j);
            let pushed = cx.lin_to_eta(&r_end).left_mul(&j_eta)?.right_mul(&j_eta.transpose())?;
            let jump = rm.fix(0, 0.0).sub(&pushed)?;
            sos.add_sos_constraint(cx.constraint("jump".into(), jump, cx.pair_vars(), cx.g_both(), cx.h_both(), 0.0))?;
            (r, u)
        }
        Mode::SynthSd { t_min, t_max } => {
            let nz = n + m;
            let r = sos.declare_decision(nz, nz, true, &cx.clock_vars(), opts.degree);
            let u = sos.declare_decision(m, nz, false, &cx.thetas, opts.degree);
            let (rm, um) = (r.matrix(), u.matrix());
            let (a_t, j_t, b_t) = augmented(sys)?;
            let clock = cx.interval(0.0, t_max);
            sos.add_sos_constraint(cx.constraint(
                "positivity".into(),
                rm.clone(),
                cx.clock_vars(),
                cx.with_clock(clock.clone()),
                cx.h_theta(),
                eps,
            ))?;
            let he = rm.left_mul(&a_t)?.he()?;
            for (k, mu) in sys.vertices.iter().enumerate() {
                let lhs = cx.d_theta_mu(rm, mu)?.sub(&rm.diff(0))?.sub(&he)?;
                sos.add_sos_constraint(cx.constraint(
                    format!("flow[{k}]"),
                    lhs,
                    cx.clock_vars(),
                    cx.with_clock(clock.clone()),
                    cx.h_theta(),
                    eps,
                ))?;
            }
            let r0 = rm.fix(0, 0.0);
            let x = r0.left_mul(&j_t)?.add(&um.left_mul(&b_t)?)?;
            let neg_x = x.scale(-1.0);
            let jump = LinPolyMatrix::block2(rm, &neg_x, &neg_x.transpose(), &r0)?;
            sos.add_sos_constraint(cx.constraint(
                "jump".into(),
                jump,
                cx.clock_vars(),
                cx.with_clock(cx.interval(t_min, t_max)),
                cx.h_theta(),
                0.0,
            ))?;
            (r, u)
        }
        _ => return Err(LpvError::InvalidMode(format!("{} is an analysis mode", mode.name()))),
    };
    Ok(LpvProgram { mode, opts, sos, lyap, input: Some(input) })
}

/// `Ã = [[A, B], [0, 0]]`, `J̃ = [[J, 0], [0, 0]]` and `B̃ = [0; I_m]` for `z = (x, u)`.
pub(crate) fn augmented(sys: &LpvSystem) -> Result<(PolyMatrix, PolyMatrix, PolyMatrix), LpvError> {
    let (n, m, ar) = (sys.n, sys.m, sys.arity());
    let a_t = PolyMatrix::block2(&sys.a, &sys.b, &PolyMatrix::zeros(ar, m, n), &PolyMatrix::zeros(ar, m, m))?;
    let j_t = PolyMatrix::block2(
        &sys.j,
        &PolyMatrix::zeros(ar, n, m),
        &PolyMatrix::zeros(ar, m, n),
        &PolyMatrix::zeros(ar, m, m),
    )?;
    let mut b_t = PolyMatrix::zeros(ar, n + m, m);
    for i in 0..m {
        b_t.set(n + i, i, Polynomial::constant(ar, 1.0));
    }
    Ok((a_t, j_t, b_t))
}
