use nalgebra::DMatrix;

use crate::poly::PolyMatrix;

use super::build::augmented;
use super::gain::recover_gain;
use super::{Certificate, CertificateData, LpvError, LpvSystem, LyapunovField, LyapunovPoint, Mode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Points per continuous axis (timer and each parameter).
    pub points: usize,
    /// Points on the post-jump timer interval `[T_min, T_max]`.
    pub sigma_points: usize,
    /// Extra points on each segment between consecutive derivative vertices.
    pub mu_interior: usize,
    /// Cap on `(θ, η)` pairs for jump conditions; both lists are thinned evenly above it.
    pub max_pairs: usize,
    pub tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points: 50, sigma_points: 20, mu_interior: 0, max_pairs: 250_000, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionKind {
    /// Minimum eigenvalue must stay above the bound.
    Positivity,
    /// Maximum eigenvalue must stay below the bound.
    Negativity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub name: String,
    pub kind: ConditionKind,
    /// Worst eigenvalue over the grid.
    pub value: f64,
    pub bound: f64,
    /// Coordinates of the worst point, by variable name.
    pub worst_point: Vec<(String, f64)>,
    pub points: usize,
    /// Grid points violating the bound by more than the tolerance.
    pub violations: usize,
    pub passed: bool,
}

impl ConditionReport {
    /// Signed amount by which the bound is violated (negative when satisfied).
    pub fn excess(&self) -> f64 {
        match self.kind {
            ConditionKind::Positivity => self.bound - self.value,
            ConditionKind::Negativity => self.value - self.bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub conditions: Vec<ConditionReport>,
    pub passed: bool,
}

impl CheckReport {
    /// Condition with the largest excess.
    pub fn worst(&self) -> Option<&ConditionReport> {
        self.conditions.iter().max_by(|a, b| a.excess().total_cmp(&b.excess()))
    }

    pub fn get(&self, name: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.name == name)
    }

    /// Largest eigenvalue over all negativity conditions.
    pub fn max_lmi_eig(&self) -> f64 {
        self.conditions
            .iter()
            .filter(|c| c.kind == ConditionKind::Negativity)
            .map(|c| c.value)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

struct Acc {
    name: String,
    kind: ConditionKind,
    bound: f64,
    tol: f64,
    value: f64,
    worst: Vec<(String, f64)>,
    points: usize,
    violations: usize,
}

impl Acc {
    fn new(name: impl Into<String>, kind: ConditionKind, bound: f64, tol: f64) -> Self {
        let value = match kind {
            ConditionKind::Positivity => f64::INFINITY,
            ConditionKind::Negativity => f64::NEG_INFINITY,
        };
        Acc { name: name.into(), kind, bound, tol, value, worst: Vec::new(), points: 0, violations: 0 }
    }

    /// Records the eigenvalue of interest of `m` (`None` when the matrix could not be formed).
    fn push(&mut self, m: Option<DMatrix<f64>>, at: impl FnOnce() -> Vec<(String, f64)>) {
        let v = match (m, self.kind) {
            (Some(m), ConditionKind::Positivity) => extreme_eig(&m, false),
            (Some(m), ConditionKind::Negativity) => extreme_eig(&m, true),
            (None, ConditionKind::Positivity) => f64::NEG_INFINITY,
            (None, ConditionKind::Negativity) => f64::INFINITY,
        };
        self.points += 1;
        let (worse, bad) = match self.kind {
            ConditionKind::Positivity => (v < self.value, v < self.bound - self.tol),
            ConditionKind::Negativity => (v > self.value, v > self.bound + self.tol),
        };
        if bad || v.is_nan() {
            self.violations += 1;
        }
        if worse || (v.is_nan() && !self.value.is_nan()) {
            self.value = v;
            self.worst = at();
        }
    }

    fn finish(self) -> ConditionReport {
        let passed = self.points > 0 && self.violations == 0;
        ConditionReport {
            name: self.name,
            kind: self.kind,
            value: self.value,
            bound: self.bound,
            worst_point: self.worst,
            points: self.points,
            violations: self.violations,
            passed,
        }
    }
}

fn extreme_eig(m: &DMatrix<f64>, largest: bool) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    let ev = sym.symmetric_eigenvalues();
    if largest {
        ev.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        ev.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn he(m: &DMatrix<f64>) -> DMatrix<f64> {
    m + m.transpose()
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k <= 1 || hi <= lo {
        return vec![lo];
    }
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

/// Parameter samples: box grid, projected onto the equalities by Gauss-Newton
/// and filtered by the generators.
pub(crate) fn parameter_grid(sys: &LpvSystem, k: usize) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = vec![Vec::new()];
    for &(lo, hi) in &sys.bounds {
        let axis = linspace(lo, hi, k);
        pts = pts
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    if !sys.equalities.is_empty() {
        pts = pts.into_iter().filter_map(|p| project(sys, p)).collect();
    }
    pts.retain(|p| sys.contains(p, 1e-9));
    pts
}

fn project(sys: &LpvSystem, mut theta: Vec<f64>) -> Option<Vec<f64>> {
    let np = sys.n_params;
    let grads: Vec<Vec<_>> =
        sys.equalities.iter().map(|h| (0..np).map(|i| h.diff(sys.theta(i))).collect()).collect();
    for _ in 0..100 {
        let p = sys.point(0.0, &theta);
        let r = DMatrix::from_fn(sys.equalities.len(), 1, |i, _| sys.equalities[i].eval(&p));
        if r.amax() < 1e-13 {
            return Some(theta);
        }
        let jac = DMatrix::from_fn(sys.equalities.len(), np, |i, j| grads[i][j].eval(&p));
        let jjt = &jac * jac.transpose();
        let step = jac.transpose() * jjt.cholesky()?.solve(&r);
        for (t, s) in theta.iter_mut().zip(step.iter()) {
            *t -= s;
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return None;
        }
    }
    let p = sys.point(0.0, &theta);
    sys.equalities.iter().all(|h| h.eval(&p).abs() < 1e-9).then_some(theta)
}

fn thin(v: &[Vec<f64>], keep: usize) -> Vec<Vec<f64>> {
    if v.len() <= keep || keep == 0 {
        return v.to_vec();
    }
    (0..keep).map(|i| v[i * v.len() / keep].clone()).collect()
}

/// Derivative directions at `θ`: the vertices plus optional interior points.
fn mu_list(sys: &LpvSystem, theta: &[f64], interior: usize) -> Vec<Vec<f64>> {
    let verts = sys.vertices_at(theta);
    let mut out = verts.clone();
    if interior > 0 && verts.len() > 1 {
        for w in 0..verts.len() {
            let (a, b) = (&verts[w], &verts[(w + 1) % verts.len()]);
            for k in 1..=interior {
                let s = k as f64 / (interior + 1) as f64;
                out.push(a.iter().zip(b).map(|(x, y)| (1.0 - s) * x + s * y).collect());
            }
        }
    }
    out
}

fn mu_term(pt: &LyapunovPoint, mu: &[f64]) -> DMatrix<f64> {
    let n = pt.s.nrows();
    pt.d_theta.iter().zip(mu).fold(DMatrix::zeros(n, n), |acc, (d, m)| acc + d * *m)
}

type FlowFn<'a> = dyn Fn(f64, &[f64]) -> Option<DMatrix<f64>> + 'a;
type JumpFn<'a> = dyn Fn(&[f64]) -> Option<DMatrix<f64>> + 'a;

/// Data needed to evaluate the analysis conditions.
struct Analysis<'a> {
    sys: &'a LpvSystem,
    field: LyapunovField,
    flow: Box<FlowFn<'a>>,
    jump: Box<JumpFn<'a>>,
    eps: f64,
    pos_bound: f64,
    prefix: &'static str,
}

struct Names<'a> {
    sys: &'a LpvSystem,
}

impl Names<'_> {
    fn theta(&self, th: &[f64]) -> Vec<(String, f64)> {
        th.iter().enumerate().map(|(i, &x)| (self.sys.env.name(self.sys.theta(i)).to_string(), x)).collect()
    }

    fn eta(&self, th: &[f64]) -> Vec<(String, f64)> {
        th.iter().enumerate().map(|(i, &x)| (self.sys.env.name(self.sys.eta(i)).to_string(), x)).collect()
    }

    fn at(&self, tau: Option<(&str, f64)>, th: &[f64], mu: Option<usize>) -> Vec<(String, f64)> {
        let mut v = Vec::new();
        if let Some((n, t)) = tau {
            v.push((n.to_string(), t));
        }
        v.extend(self.theta(th));
        if let Some(k) = mu {
            v.push(("mu".to_string(), k as f64));
        }
        v
    }
}

impl Analysis<'_> {
    fn run(&self, mode: Mode, grid: &GridSpec, thetas: &[Vec<f64>], out: &mut Vec<ConditionReport>) {
        let names = Names { sys: self.sys };
        let tol = grid.tol;
        let p = self.prefix;
        let pos = |a: &str| Acc::new(format!("{p}{a}"), ConditionKind::Positivity, self.pos_bound, tol);
        let neg = |a: &str, b: f64| Acc::new(format!("{p}{a}"), ConditionKind::Negativity, b, tol);
        let horizon = mode.timer_horizon();
        let taus = if horizon > 0.0 { linspace(0.0, horizon, grid.points) } else { vec![0.0] };
        let tau_name = match mode {
            Mode::RangeDwell { .. } | Mode::SynthSd { .. } => "tau_tilde",
            _ => "tau",
        };

        let mut positivity = pos("positivity");
        for &tau in &taus {
            for th in thetas {
                positivity.push(self.field.value(tau, th), || names.at(Some((tau_name, tau)), th, None));
            }
        }
        out.push(positivity.finish());

        match mode {
            Mode::MinDwell { dwell } | Mode::SynthCt { dwell } => {
                let mut flow = neg("flow", -self.eps);
                let mut boundary = neg("boundary", -self.eps);
                for th in thetas {
                    let mus = mu_list(self.sys, th, grid.mu_interior);
                    for &tau in &taus {
                        let (Some(pt), Some(a)) = (self.field.at(tau, th), (self.flow)(tau, th)) else {
                            flow.push(None, || names.at(Some(("tau", tau)), th, None));
                            continue;
                        };
                        let base = &pt.d_tau + he(&(&pt.s * &a));
                        for (k, mu) in mus.iter().enumerate() {
                            flow.push(Some(&base + mu_term(&pt, mu)), || names.at(Some(("tau", tau)), th, Some(k)));
                        }
                    }
                    let (Some(pt), Some(a)) = (self.field.at(dwell, th), (self.flow)(dwell, th)) else {
                        boundary.push(None, || names.at(None, th, None));
                        continue;
                    };
                    let base = he(&(&pt.s * &a));
                    for (k, mu) in mus.iter().enumerate() {
                        boundary.push(Some(&base + mu_term(&pt, mu)), || names.at(None, th, Some(k)));
                    }
                }
                out.push(flow.finish());
                out.push(boundary.finish());

                let mut jump = neg("jump", 0.0);
                let keep = (grid.max_pairs as f64).sqrt().floor() as usize;
                let pts = if thetas.len() * thetas.len() > grid.max_pairs { thin(thetas, keep) } else { thetas.to_vec() };
                let s0: Vec<_> = pts.iter().map(|th| self.field.value(0.0, th)).collect();
                for eta in &pts {
                    let (Some(s_end), Some(j)) = (self.field.value(dwell, eta), (self.jump)(eta)) else {
                        jump.push(None, || names.eta(eta));
                        continue;
                    };
                    for (th, s0) in pts.iter().zip(&s0) {
                        let m = s0.as_ref().map(|s0| j.transpose() * s0 * &j - &s_end);
                        jump.push(m, || {
                            let mut v = names.theta(th);
                            v.extend(names.eta(eta));
                            v
                        });
                    }
                }
                out.push(jump.finish());
            }
            Mode::Quadratic | Mode::Robust => {
                let mut flow = neg("flow", -self.eps);
                for th in thetas {
                    let mus = if mode == Mode::Robust { mu_list(self.sys, th, grid.mu_interior) } else { vec![vec![]] };
                    let (Some(pt), Some(a)) = (self.field.at(0.0, th), (self.flow)(0.0, th)) else {
                        flow.push(None, || names.at(None, th, None));
                        continue;
                    };
                    let base = he(&(&pt.s * &a));
                    for (k, mu) in mus.iter().enumerate() {
                        flow.push(Some(&base + mu_term(&pt, mu)), || names.at(None, th, Some(k)));
                    }
                }
                out.push(flow.finish());
            }
            Mode::RangeDwell { t_min, t_max } | Mode::SynthSd { t_min, t_max } => {
                let mut flow = neg("flow", 0.0);
                for th in thetas {
                    let mus = mu_list(self.sys, th, grid.mu_interior);
                    for &tau in &taus {
                        let (Some(pt), Some(a)) = (self.field.at(tau, th), (self.flow)(tau, th)) else {
                            flow.push(None, || names.at(Some(("tau_tilde", tau)), th, None));
                            continue;
                        };
                        let base = he(&(&pt.s * &a)) - &pt.d_tau;
                        for (k, mu) in mus.iter().enumerate() {
                            flow.push(Some(&base + mu_term(&pt, mu)), || {
                                names.at(Some(("tau_tilde", tau)), th, Some(k))
                            });
                        }
                    }
                }
                out.push(flow.finish());
                let mut jump = neg("jump", -self.eps);
                for th in thetas {
                    let (Some(s0), Some(j)) = (self.field.value(0.0, th), (self.jump)(th)) else {
                        jump.push(None, || names.at(None, th, None));
                        continue;
                    };
                    for sigma in linspace(t_min, t_max, grid.sigma_points) {
                        let m = self.field.value(sigma, th).map(|s| j.transpose() * s * &j - &s0);
                        jump.push(m, || names.at(Some(("sigma", sigma)), th, None));
                    }
                }
                out.push(jump.finish());
            }
        }
    }
}

/// Re-verifies a certificate on a grid. Analysis certificates are checked
/// against their own conditions; synthesis certificates against the conditions
/// in `(R, U)` and, with `S = R⁻¹`, against the analysis conditions of the
/// closed loop (with zero margin).
pub fn check_certificate(sys: &LpvSystem, cert: &Certificate, grid: &GridSpec) -> Result<CheckReport, LpvError> {
    if grid.points == 0 || grid.sigma_points == 0 {
        return Err(LpvError::EmptyGrid);
    }
    let dim = match cert.mode {
        Mode::SynthSd { .. } => sys.n + sys.m,
        _ => sys.n,
    };
    if cert.dim() != dim || cert.matrix().arity() != sys.arity() {
        return Err(LpvError::Mismatch(format!(
            "certificate is {}x{} over {} variables, system needs {dim}x{dim} over {}",
            cert.dim(),
            cert.dim(),
            cert.matrix().arity(),
            sys.arity()
        )));
    }
    cert.mode.validate()?;
    let thetas = parameter_grid(sys, grid.points);
    if thetas.is_empty() {
        return Err(LpvError::EmptyGrid);
    }
    let mut out = Vec::new();
    let np = sys.n_params;
    let eps = cert.eps;
    let a_at = |th: &[f64]| sys.a.eval(&sys.point(0.0, th));
    let j_at = |th: &[f64]| sys.j.eval(&sys.point(0.0, th));

    match (&cert.data, cert.mode) {
        (CertificateData::Lyapunov(_), Mode::MinDwell { .. } | Mode::Quadratic | Mode::Robust | Mode::RangeDwell { .. }) => {
            let an = Analysis {
                sys,
                field: LyapunovField::raw(cert, np),
                flow: Box::new(move |_, th| Some(a_at(th))),
                jump: Box::new(move |th| Some(j_at(th))),
                eps,
                pos_bound: eps,
                prefix: "",
            };
            an.run(cert.mode, grid, &thetas, &mut out);
        }
        (CertificateData::Synthesis { r, u }, Mode::SynthCt { .. }) => {
            synth_ct_conditions(sys, cert, r, u, grid, &thetas, &mut out)?;
            let gain = recover_gain(cert)?;
            let an = Analysis {
                sys,
                field: LyapunovField::from_certificate(cert, np),
                flow: Box::new(move |tau, th| {
                    let (a, b, _) = sys.matrices_at(th);
                    gain.continuous(tau, th).ok().map(|k| a + b * k)
                }),
                jump: Box::new(move |th| Some(j_at(th))),
                eps: 0.0,
                pos_bound: 0.0,
                prefix: "closed-loop ",
            };
            an.run(cert.mode, grid, &thetas, &mut out);
        }
        (CertificateData::Synthesis { r, u }, Mode::SynthSd { .. }) => {
            synth_sd_conditions(sys, cert, r, u, grid, &thetas, &mut out)?;
            let gain = recover_gain(cert)?;
            let (a_t, j_t, b_t) = augmented(sys)?;
            let an = Analysis {
                sys,
                field: LyapunovField::from_certificate(cert, np),
                flow: Box::new(move |_, th| Some(a_t.eval(&sys.point(0.0, th)))),
                jump: Box::new(move |th| {
                    let p = sys.point(0.0, th);
                    gain.eval(0.0, th).ok().map(|k| j_t.eval(&p) + b_t.eval(&p) * k)
                }),
                eps: 0.0,
                pos_bound: 0.0,
                prefix: "closed-loop ",
            };
            an.run(cert.mode, grid, &thetas, &mut out);
        }
        _ => {
            return Err(LpvError::Mismatch(format!("{} certificate has the wrong matrix kind", cert.mode.name())));
        }
    }
    let passed = out.iter().all(|c| c.passed);
    Ok(CheckReport { conditions: out, passed })
}

fn synth_ct_conditions(
    sys: &LpvSystem,
    cert: &Certificate,
    r: &PolyMatrix,
    u: &PolyMatrix,
    grid: &GridSpec,
    thetas: &[Vec<f64>],
    out: &mut Vec<ConditionReport>,
) -> Result<(), LpvError> {
    let Mode::SynthCt { dwell } = cert.mode else { unreachable!() };
    let names = Names { sys };
    let (eps, tol) = (cert.eps, grid.tol);
    let field = LyapunovField::raw(cert, sys.n_params);
    let taus = linspace(0.0, dwell, grid.points);
    let phi = |tau: f64, th: &[f64], rr: &DMatrix<f64>| {
        let (a, b, _) = sys.matrices_at(th);
        a * rr + b * u.eval(&sys.point(tau, th))
    };
    let mut positivity = Acc::new("positivity", ConditionKind::Positivity, eps, tol);
    let mut flow = Acc::new("flow", ConditionKind::Negativity, -eps, tol);
    let mut boundary = Acc::new("boundary", ConditionKind::Negativity, -eps, tol);
    for th in thetas {
        let mus = mu_list(sys, th, grid.mu_interior);
        for &tau in &taus {
            let pt = field.at(tau, th).expect("polynomial field");
            positivity.push(Some(pt.s.clone()), || names.at(Some(("tau", tau)), th, None));
            let base = he(&phi(tau, th, &pt.s)) - &pt.d_tau;
            for (k, mu) in mus.iter().enumerate() {
                flow.push(Some(&base - mu_term(&pt, mu)), || names.at(Some(("tau", tau)), th, Some(k)));
            }
        }
        let pt = field.at(dwell, th).expect("polynomial field");
        let base = he(&phi(dwell, th, &pt.s));
        for (k, mu) in mus.iter().enumerate() {
            boundary.push(Some(&base - mu_term(&pt, mu)), || names.at(None, th, Some(k)));
        }
    }
    out.push(positivity.finish());
    out.push(flow.finish());
    out.push(boundary.finish());

    let mut jump = Acc::new("jump", ConditionKind::Negativity, 0.0, tol);
    let keep = (grid.max_pairs as f64).sqrt().floor() as usize;
    let pts = if thetas.len() * thetas.len() > grid.max_pairs { thin(thetas, keep) } else { thetas.to_vec() };
    for eta in &pts {
        let p = sys.point(dwell, eta);
        let j = sys.j.eval(&p);
        let pushed = &j * r.eval(&p) * j.transpose();
        for th in &pts {
            let r0 = r.eval(&sys.point(0.0, th));
            jump.push(Some(&pushed - r0), || {
                let mut v = names.theta(th);
                v.extend(names.eta(eta));
                v
            });
        }
    }
    out.push(jump.finish());
    Ok(())
}

fn synth_sd_conditions(
    sys: &LpvSystem,
    cert: &Certificate,
    r: &PolyMatrix,
    u: &PolyMatrix,
    grid: &GridSpec,
    thetas: &[Vec<f64>],
    out: &mut Vec<ConditionReport>,
) -> Result<(), LpvError> {
    let Mode::SynthSd { t_min, t_max } = cert.mode else { unreachable!() };
    let names = Names { sys };
    let (eps, tol) = (cert.eps, grid.tol);
    let field = LyapunovField::raw(cert, sys.n_params);
    let (a_t, j_t, b_t) = augmented(sys)?;
    let taus = linspace(0.0, t_max, grid.points);
    let mut positivity = Acc::new("positivity", ConditionKind::Positivity, eps, tol);
    let mut flow = Acc::new("flow", ConditionKind::Negativity, -eps, tol);
    let mut jump = Acc::new("jump", ConditionKind::Negativity, 0.0, tol);
    let nz = sys.n + sys.m;
    for th in thetas {
        let p0 = sys.point(0.0, th);
        let at = a_t.eval(&p0);
        let mus = mu_list(sys, th, grid.mu_interior);
        for &tau in &taus {
            let pt = field.at(tau, th).expect("polynomial field");
            positivity.push(Some(pt.s.clone()), || names.at(Some(("tau_tilde", tau)), th, None));
            let base = &pt.d_tau + he(&(&at * &pt.s));
            for (k, mu) in mus.iter().enumerate() {
                flow.push(Some(&base - mu_term(&pt, mu)), || names.at(Some(("tau_tilde", tau)), th, Some(k)));
            }
        }
        let r0 = r.eval(&p0);
        let x = j_t.eval(&p0) * &r0 + b_t.eval(&p0) * u.eval(&p0);
        for sigma in linspace(t_min, t_max, grid.sigma_points) {
            let rs = r.eval(&sys.point(sigma, th));
            let mut m = DMatrix::zeros(2 * nz, 2 * nz);
            m.view_mut((0, 0), (nz, nz)).copy_from(&(-rs));
            m.view_mut((0, nz), (nz, nz)).copy_from(&x);
            m.view_mut((nz, 0), (nz, nz)).copy_from(&x.transpose());
            m.view_mut((nz, nz), (nz, nz)).copy_from(&(-&r0));
            jump.push(Some(m), || names.at(Some(("sigma", sigma)), th, None));
        }
    }
    out.push(positivity.finish());
    out.push(flow.finish());
    out.push(jump.finish());
    Ok(())
}
