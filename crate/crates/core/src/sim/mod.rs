//! Closed- and open-loop simulation of LPV systems with jumps, parameter and
//! jump-time generators, and Lyapunov evaluation along trajectories.

mod csv_io;


pub use csv_io::{read_csv, write_csv, CsvTrajectory};

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lpv::{Certificate, ControllerGain, GainKind, LpvError, LpvSystem, LyapunovField, Mode};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("horizon must be positive, got {0}")]
    Horizon(f64),
    #[error("step must be positive, got {0}")]
    Step(f64),
    #[error("invalid parameter trajectory: {0}")]
    Trajectory(String),
    #[error("invalid jump sequence: {0}")]
    Jumps(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no certificate attached")]
    MissingCertificate,
    #[error(transparent)]
    Lpv(#[from] LpvError),
    #[error("csv: {0}")]
    Csv(String),
}

/// Generator of `ρ(t)`. Sinusoids span the parameter box `[lo, hi]` as
/// `c + r sin(ω t + φ)` with `ω = ν / r`, so `|ρ̇| ≤ ν`.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    Constant(Vec<f64>),
    Sinusoid { nu: Vec<f64>, phase: f64 },
    /// Sinusoid whose phase is redrawn uniformly in `[0, 2π]` at every jump.
    PhaseJumpSinusoid { nu: Vec<f64>, seed: u64 },
    /// Piecewise-linear interpolation of `(time, value)` rows.
    Table { times: Vec<f64>, values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamTrajectory {
    pub kind: ParamKind,
    center: Vec<f64>,
    radius: Vec<f64>,
}

pub fn make_param_trajectory(kind: ParamKind, bounds: &[(f64, f64)]) -> Result<ParamTrajectory, SimError> {
    let np = bounds.len();
    let bad = |m: String| Err(SimError::Trajectory(m));
    match &kind {
        ParamKind::Constant(v) => {
            if v.len() != np {
                return bad(format!("{} values for {np} parameters", v.len()));
            }
            if let Some((x, (lo, hi))) = v.iter().zip(bounds).find(|(x, (lo, hi))| **x < *lo || **x > *hi) {
                return bad(format!("constant value {x} outside [{lo}, {hi}]"));
            }
        }
        ParamKind::Sinusoid { nu, .. } | ParamKind::PhaseJumpSinusoid { nu, .. } => {
            if nu.len() != np {
                return bad(format!("{} rates for {np} parameters", nu.len()));
            }
            if let Some(v) = nu.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return bad(format!("rate bound {v} must be finite and nonnegative"));
            }
        }
        ParamKind::Table { times, values } => {
            if times.is_empty() || times.len() != values.len() {
                return bad("table needs matching, nonempty time and value columns".into());
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return bad("table times must be strictly increasing".into());
            }
            for row in values {
                if row.len() != np {
                    return bad(format!("table row has {} values for {np} parameters", row.len()));
                }
                if let Some((x, (lo, hi))) = row.iter().zip(bounds).find(|(x, (lo, hi))| **x < *lo || **x > *hi) {
                    return bad(format!("table value {x} outside [{lo}, {hi}]"));
                }
            }
        }
    }
    let center = bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let radius = bounds.iter().map(|(lo, hi)| 0.5 * (hi - lo)).collect();
    Ok(ParamTrajectory { kind, center, radius })
}

impl ParamTrajectory {
    /// Phases of segment `k` (the interval after the `k`-th jump).
    fn phases(&self, seed: u64, k: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        (0..self.center.len()).map(|_| rng.gen_range(0.0..2.0 * PI)).collect()
    }

    fn sinusoid(&self, t: f64, nu: &[f64], phase: &[f64]) -> Vec<f64> {
        (0..self.center.len())
            .map(|i| {
                let r = self.radius[i];
                if r == 0.0 || nu[i] == 0.0 {
                    self.center[i] + r * phase[i].sin()
                } else {
                    self.center[i] + r * (nu[i] / r * t + phase[i]).sin()
                }
            })
            .collect()
    }

    /// `ρ(t)` on segment `segment` (number of jumps strictly before `t`, or at
    /// `t` for post-jump values).
    pub fn value(&self, t: f64, segment: usize) -> Vec<f64> {
        match &self.kind {
            ParamKind::Constant(v) => v.clone(),
            ParamKind::Sinusoid { nu, phase } => self.sinusoid(t, nu, &vec![*phase; self.center.len()]),
            ParamKind::PhaseJumpSinusoid { nu, seed } => self.sinusoid(t, nu, &self.phases(*seed, segment)),
            ParamKind::Table { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    return values[0].clone();
                }
                if k == times.len() {
                    return values[k - 1].clone();
                }
                let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                values[k - 1].iter().zip(&values[k]).map(|(a, b)| a + w * (b - a)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum JumpKind {
    /// Gaps drawn uniformly in `[T̄, 2T̄]`.
    MinDwell { dwell: f64, seed: u64 },
    /// Gaps drawn uniformly in `[T_min, T_max]`.
    RangeDwell { t_min: f64, t_max: f64, seed: u64 },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpSequence {
    /// Jump instants in `(0, horizon)`; `t = 0` carries no jump.
    pub times: Vec<f64>,
    /// First generated instant at or beyond the horizon, when known.
    pub next_after: Option<f64>,
    pub horizon: f64,
}

pub fn make_jump_sequence(kind: &JumpKind, horizon: f64) -> Result<JumpSequence, SimError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SimError::Horizon(horizon));
    }
    let draw = |lo: f64, hi: f64, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut times = Vec::new();
        let mut t = 0.0;
        loop {
            t += if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            if t >= horizon {
                return JumpSequence { times, next_after: Some(t), horizon };
            }
            times.push(t);
        }
    };
    match *kind {
        JumpKind::MinDwell { dwell, seed } => {
            if !(dwell > 0.0 && dwell.is_finite()) {
                return Err(SimError::Jumps(format!("dwell time must be positive, got {dwell}")));
            }
            Ok(draw(dwell, 2.0 * dwell, seed))
        }
        JumpKind::RangeDwell { t_min, t_max, seed } => {
            if !(t_min > 0.0 && t_min <= t_max && t_max.is_finite()) {
                return Err(SimError::Jumps(format!("need 0 < T_min <= T_max, got [{t_min}, {t_max}]")));
            }
            Ok(draw(t_min, t_max, seed))
        }
        JumpKind::Explicit(ref times) => {
            if times.iter().any(|&t| !(t > 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(SimError::Jumps("explicit times must be positive and strictly increasing".into()));
            }
            let inside: Vec<f64> = times.iter().copied().filter(|&t| t < horizon).collect();
            let next_after = times.iter().copied().find(|&t| t >= horizon);
            Ok(JumpSequence { times: inside, next_after, horizon })
        }
    }
}

impl JumpSequence {
    /// End of segment `k`, if known.
    fn segment_end(&self, k: usize) -> Option<f64> {
        self.times.get(k).copied().or(if k == self.times.len() { self.next_after } else { None })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub step: f64,
    pub horizon: f64,
    /// Constant added to the controller timer (models an unsynchronized clock).
    pub timer_offset: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { step: 1e-3, horizon: 10.0, timer_offset: 0.0 }
    }
}

/// Sampled hybrid arc. At a jump both `x(t_k)` and `x(t_k⁺)` are stored; the
/// entries of `jump_indices` point at the pre-jump sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Control input per sample (empty rows without input).
    pub inputs: Vec<Vec<f64>>,
    pub params: Vec<Vec<f64>>,
    /// Time since the last jump.
    pub timers: Vec<f64>,
    /// Time until the next jump, when known.
    pub time_to_jump: Vec<Option<f64>>,
    pub jump_indices: Vec<usize>,
    pub sampled_data: bool,
    pub diverged: bool,
}

impl HybridTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Whether sample `i` is a post-jump sample.
    pub fn is_post_jump(&self, i: usize) -> bool {
        i > 0 && self.jump_indices.binary_search(&(i - 1)).is_ok()
    }

    pub fn final_norm(&self) -> f64 {
        self.states.last().map_or(0.0, |x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Augmented state `(x, u)` of sample `i` for sampled-data runs, else `x`.
    pub fn lyapunov_state(&self, i: usize) -> Vec<f64> {
        if self.sampled_data {
            let mut z = self.states[i].clone();
            z.extend(&self.inputs[i]);
            z
        } else {
            self.states[i].clone()
        }
    }
}

enum Loop<'a> {
    Open,
    Continuous(&'a ControllerGain),
    Sampled(&'a ControllerGain),
}

/// Fixed-step RK4 integration; the step is shortened to land on every jump time.
pub fn simulate(
    sys: &LpvSystem,
    gain: Option<&ControllerGain>,
    traj: &ParamTrajectory,
    jumps: &JumpSequence,
    x0: &[f64],
    u0: Option<&[f64]>,
    opts: &SimOptions,
) -> Result<HybridTrajectory, SimError> {
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(SimError::Step(opts.step));
    }
    if !(opts.horizon > 0.0 && opts.horizon.is_finite()) {
        return Err(SimError::Horizon(opts.horizon));
    }
    let (n, m) = (sys.n, sys.m);
    if x0.len() != n {
        return Err(SimError::Dimension(format!("x0 has {} entries, system has {n} states", x0.len())));
    }
    let lp = match gain {
        None => Loop::Open,
        Some(g) if g.n != n || g.m != m => {
            return Err(SimError::Dimension(format!("gain is for n={}, m={}, system has n={n}, m={m}", g.n, g.m)))
        }
        Some(g) => match g.kind {
            GainKind::Continuous { .. } => Loop::Continuous(g),
            GainKind::SampledData => Loop::Sampled(g),
        },
    };
    let sampled = matches!(lp, Loop::Sampled(_));
    let mut u_hold = match u0 {
        Some(u) if u.len() != m => {
            return Err(SimError::Dimension(format!("u0 has {} entries, system has {m} inputs", u.len())))
        }
        Some(u) => DVector::from_column_slice(u),
        None => DVector::zeros(m),
    };

    let params_at = |t: f64, k: usize| traj.value(t, k);
    // Closed-loop flow matrix at (t, segment, timer).
    let flow = |t: f64, k: usize, tau: f64| -> Result<(DMatrix<f64>, DMatrix<f64>), SimError> {
        let rho = params_at(t, k);
        let (a, b, _) = sys.matrices_at(&rho);
        Ok(match lp {
            Loop::Continuous(g) => {
                let kk = g.continuous(tau + opts.timer_offset, &rho)?;
                (&a + &b * &kk, kk)
            }
            _ => (a, DMatrix::zeros(m, n)),
        })
    };
    let rhs = |t: f64, k: usize, tau: f64, x: &DVector<f64>, u: &DVector<f64>| -> Result<DVector<f64>, SimError> {
        let (acl, _) = flow(t, k, tau)?;
        let mut dx = acl * x;
        if sampled {
            let rho = params_at(t, k);
            dx += sys.b.eval(&sys.point(0.0, &rho)) * u;
        }
        Ok(dx)
    };

    let mut out = HybridTrajectory {
        times: Vec::new(),
        states: Vec::new(),
        inputs: Vec::new(),
        params: Vec::new(),
        timers: Vec::new(),
        time_to_jump: Vec::new(),
        jump_indices: Vec::new(),
        sampled_data: sampled,
        diverged: false,
    };
    let record = |out: &mut HybridTrajectory, t: f64, k: usize, last: f64, x: &DVector<f64>, u: &DVector<f64>| {
        let rho = params_at(t, k);
        let u_rec: Vec<f64> = match lp {
            Loop::Continuous(g) => g
                .continuous(t - last + opts.timer_offset, &rho)
                .map(|kk| (kk * x).iter().copied().collect())
                .unwrap_or_else(|_| vec![f64::NAN; m]),
            Loop::Sampled(_) => u.iter().copied().collect(),
            Loop::Open => vec![0.0; m],
        };
        out.times.push(t);
        out.states.push(x.iter().copied().collect());
        out.inputs.push(u_rec);
        out.params.push(rho);
        out.timers.push(t - last);
        out.time_to_jump.push(jumps.segment_end(k).map(|e| e - t));
    };

    let mut x = DVector::from_column_slice(x0);
    let mut t = 0.0;
    let mut k = 0usize;
    let mut last = 0.0;
    let horizon = opts.horizon;
    record(&mut out, t, k, last, &x, &u_hold);
    while t < horizon - 1e-12 {
        let next_jump = jumps.times.get(k).copied().filter(|&tj| tj <= horizon);
        let target = next_jump.unwrap_or(horizon);
        let h = opts.step.min(target - t);
        let tau = t - last;
        let k1 = rhs(t, k, tau, &x, &u_hold)?;
        let k2 = rhs(t + 0.5 * h, k, tau + 0.5 * h, &(&x + &k1 * (0.5 * h)), &u_hold)?;
        let k3 = rhs(t + 0.5 * h, k, tau + 0.5 * h, &(&x + &k2 * (0.5 * h)), &u_hold)?;
        let k4 = rhs(t + h, k, tau + h, &(&x + &k3 * h), &u_hold)?;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t = if target - (t + h) < 1e-12 { target } else { t + h };
        if x.iter().any(|v| !v.is_finite() || v.abs() > 1e150) {
            out.diverged = true;
            break;
        }
        record(&mut out, t, k, last, &x, &u_hold);
        if Some(t) == next_jump {
            let rho = params_at(t, k);
            let j = sys.j.eval(&sys.point(0.0, &rho));
            if let Loop::Sampled(g) = lp {
                let (k1g, k2g) = g.sampled(&rho)?;
                u_hold = &k1g * &x + &k2g * &u_hold;
            }
            x = j * x;
            out.jump_indices.push(out.times.len() - 1);
            k += 1;
            last = t;
            record(&mut out, t, k, last, &x, &u_hold);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    pub values: Vec<f64>,
    /// `max (V̇ + ε‖x‖²)` over flow intervals, `V̇` by finite differences.
    pub flow_violation: f64,
    /// `max V(x⁺) − V(x)` over jumps.
    pub jump_violation: f64,
}

/// Evaluates `V = xᵀ S x` along a trajectory. Synthesis certificates use
/// `S = R⁻¹`; min-dwell timers are clamped at `T̄` and range-dwell
/// certificates use the time to the next jump.
pub fn eval_lyapunov(
    sys: &LpvSystem,
    cert: Option<&Certificate>,
    traj: &HybridTrajectory,
) -> Result<LyapunovReport, SimError> {
    let cert = cert.ok_or(SimError::MissingCertificate)?;
    let field = LyapunovField::from_certificate(cert, sys.n_params);
    let dim = cert.dim();
    let eps_flow = match cert.mode {
        Mode::MinDwell { .. } | Mode::Quadratic | Mode::Robust => cert.eps,
        _ => 0.0,
    };
    let countdown = matches!(cert.mode, Mode::RangeDwell { .. } | Mode::SynthSd { .. });
    let mut values = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        let z = traj.lyapunov_state(i);
        if z.len() != dim {
            return Err(SimError::Dimension(format!("certificate is {dim}x{dim}, trajectory state has {}", z.len())));
        }
        let tau = if countdown { traj.time_to_jump[i] } else { Some(traj.timers[i]) };
        let v = match (tau, field.value(tau.unwrap_or(0.0), &traj.params[i])) {
            (Some(_), Some(s)) => {
                let zv = DVector::from_vec(z);
                (zv.transpose() * s * &zv)[(0, 0)]
            }
            _ => f64::NAN,
        };
        values.push(v);
    }
    let norm2 = |i: usize| traj.states[i].iter().map(|v| v * v).sum::<f64>();
    let mut flow_violation = f64::NEG_INFINITY;
    for i in 0..traj.len().saturating_sub(1) {
        let dt = traj.times[i + 1] - traj.times[i];
        if dt <= 0.0 || values[i].is_nan() || values[i + 1].is_nan() {
            continue;
        }
        let vdot = (values[i + 1] - values[i]) / dt;
        flow_violation = flow_violation.max(vdot + eps_flow * 0.5 * (norm2(i) + norm2(i + 1)));
    }
    let mut jump_violation = f64::NEG_INFINITY;
    for &i in &traj.jump_indices {
        if i + 1 < values.len() && !values[i].is_nan() && !values[i + 1].is_nan() {
            jump_violation = jump_violation.max(values[i + 1] - values[i]);
        }
    }
    Ok(LyapunovReport { values, flow_violation, jump_violation })
}
