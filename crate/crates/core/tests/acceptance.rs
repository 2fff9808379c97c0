//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! when any criterion fails. Criteria 5 and 7 take hours; they run only with
//! `--include-ignored` (or `--ignored`) and are otherwise reported as skipped.

use std::process::ExitCode;
use std::time::Instant;

use lpvsos::lpv::{
    bisect_dwell_time, build_analysis_program, build_synthesis_program, check_certificate, recover_gain, systems,
    BuildOptions, Certificate, CheckReport, ConditionKind, DwellSearch, GridSpec, LpvError, LpvSystem, Mode,
};
use lpvsos::sdp::{
    check_solution, export_sdpa, import_sdpa, solve, BlockEntry, Objective, SdpProblem, SdpStatus, SolverOptions,
};
use lpvsos::sim::{eval_lyapunov, make_jump_sequence, make_param_trajectory, simulate, JumpKind, ParamKind, SimOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Feasible certificates collected for the soundness criterion.
type Certified = Vec<(String, LpvSystem, Certificate)>;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn opts(degree: u32) -> BuildOptions {
    BuildOptions::new(degree, 0.01)
}

fn solver() -> SolverOptions {
    SolverOptions::default()
}

fn min_dwell(sys: &LpvSystem, degree: u32, lo: f64, hi: f64, tol: f64) -> Result<(f64, Certificate), LpvError> {
    let r = bisect_dwell_time(sys, DwellSearch::MinDwell, opts(degree), lo, hi, tol, &solver())?;
    for w in &r.warnings {
        println!("    warning: {w}");
    }
    Ok((r.estimate, r.certificate))
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target
}

fn c1_scalar(certified: &mut Certified) -> Result<Outcome, LpvError> {
    // Exact period map of ẋ = −x, x⁺ = 2x is 2e^{−T̄}; it drops below 1 at T̄ = ln 2.
    let oracle = 2f64.ln();
    let sys = systems::scalar(-1.0, 2.0);
    let (t2, cert) = min_dwell(&sys, 2, 0.3, 1.5, 1e-3)?;
    certified.push(("scalar d=2".into(), sys.clone(), cert));
    let (t4, cert4) = min_dwell(&sys, 4, 0.3, 1.5, 1e-3)?;
    certified.push(("scalar d=4".into(), sys, cert4));
    let passed = (t2 - oracle).abs() <= 0.02;
    Ok(outcome(passed, format!("T* = {t2:.4} at d=2 (d=4: {t4:.4}), oracle ln 2 = {oracle:.4} ± 0.02")))
}

fn c2_quadratic(certified: &mut Certified) -> Result<Outcome, LpvError> {
    let mut feasible = Vec::new();
    for rho in [3.8, 3.9] {
        let sys = systems::example1(rho, 0.0)?;
        let s = build_analysis_program(&sys, Mode::Quadratic, opts(2))?.solve(&solver())?;
        feasible.push(s.is_feasible());
        if let Some(c) = s.certificate {
            certified.push((format!("quadratic rho={rho}"), sys, c));
        }
    }
    Ok(outcome(
        feasible == [true, false],
        format!("quadratic feasible at rho 3.8: {}, at rho 3.9: {}", feasible[0], feasible[1]),
    ))
}

fn c3_monotone(certified: &mut Certified) -> Result<Outcome, LpvError> {
    let mut ts = Vec::new();
    for nu in [0.0, 0.25, 0.5] {
        let sys = systems::example1(10.0, nu)?;
        let (t, cert) = min_dwell(&sys, 4, 0.01, 5.0, 1e-3)?;
        certified.push((format!("example1 rho=10 nu={nu} d=4"), sys, cert));
        ts.push(t);
    }
    let passed = ts.windows(2).all(|w| w[1] >= w[0]) && ts[2] > 0.0;
    Ok(outcome(passed, format!("T* over nu = 0, 0.25, 0.5: {:.4}, {:.4}, {:.4}", ts[0], ts[1], ts[2])))
}

fn c4_example2_d2(certified: &mut Certified) -> Result<Outcome, LpvError> {
    let mut parts = Vec::new();
    let mut passed = true;
    for (nu, target) in [(0.0, 2.7282), (0.1, 2.9494)] {
        let sys = systems::example2(nu)?;
        let (t, cert) = min_dwell(&sys, 2, 0.5, 6.0, 1e-2)?;
        certified.push((format!("example2 nu={nu} d=2"), sys, cert));
        passed &= within(t, target, 0.05);
        parts.push(format!("nu={nu}: T* = {t:.4} (target {target} ± 5%)"));
    }
    Ok(outcome(passed, parts.join(", ")))
}

fn c5_example2_d4(certified: &mut Certified) -> Result<Outcome, LpvError> {
    let sys = systems::example2(0.0)?;
    let (t, cert) = min_dwell(&sys, 4, 0.5, 6.0, 1e-2)?;
    certified.push(("example2 nu=0 d=4".into(), sys, cert));
    let fast = systems::example2(0.9)?;
    let status = match min_dwell(&fast, 4, 0.5, 6.0, 1e-2) {
        Ok((_, c)) => {
            certified.push(("example2 nu=0.9 d=4".into(), fast, c));
            SdpStatus::Feasible
        }
        Err(LpvError::NoCertificate { .. }) => {
            build_analysis_program(&fast, Mode::MinDwell { dwell: 6.0 }, opts(4))?.solve(&solver())?.status
        }
        Err(e) => return Err(e),
    };
    let passed = within(t, 1.7605, 0.05) && matches!(status, SdpStatus::Feasible | SdpStatus::NumericalFailure);
    Ok(outcome(passed, format!("nu=0: T* = {t:.4} (target 1.7605 ± 5%), nu=0.9: {}", status.as_str())))
}

fn max_closed_loop_eig(rep: &CheckReport) -> f64 {
    rep.conditions
        .iter()
        .filter(|c| c.name.starts_with("closed-loop ") && c.kind == ConditionKind::Negativity)
        .map(|c| c.value)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn c6_ct_synthesis(certified: &mut Certified) -> Result<Outcome, LpvError> {
    let sys = systems::ct_synthesis(0.3)?;
    let s = build_synthesis_program(&sys, Mode::SynthCt { dwell: 0.05 }, opts(2))?.solve(&solver())?;
    let Some(cert) = s.certificate else {
        return Ok(outcome(false, format!("synthesis {}: {}", s.status.as_str(), s.message)));
    };
    let rep = check_certificate(&sys, &cert, &GridSpec::default())?;
    let cl = max_closed_loop_eig(&rep);
    let gain = recover_gain(&cert)?;
    let traj = make_param_trajectory(ParamKind::PhaseJumpSinusoid { nu: vec![0.3], seed: 7 }, &sys.bounds)
        .map_err(|e| LpvError::InvalidMode(e.to_string()))?;
    let jumps = make_jump_sequence(&JumpKind::MinDwell { dwell: 0.05, seed: 8 }, 10.0)
        .map_err(|e| LpvError::InvalidMode(e.to_string()))?;
    let x0 = [1.0, -1.0];
    let run = simulate(&sys, Some(&gain), &traj, &jumps, &x0, None, &SimOptions::default())
        .map_err(|e| LpvError::InvalidMode(e.to_string()))?;
    let lyap = eval_lyapunov(&sys, Some(&cert), &run).map_err(|e| LpvError::InvalidMode(e.to_string()))?;
    let ratio = run.final_norm() / x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let jump_ok = lyap.jump_violation <= 1e-6;
    certified.push(("ct synthesis".into(), sys, cert));
    let passed = cl <= 1e-6 && !run.diverged && ratio <= 1e-2 && jump_ok;
    Ok(outcome(
        passed,
        format!(
            "closed-loop max eig {cl:.3e}, |x(10)|/|x0| = {ratio:.2e}, {} jumps, max V jump increase {:.2e}",
            run.jump_indices.len(),
            lyap.jump_violation
        ),
    ))
}

fn c7_sampled_data(certified: &mut Certified) -> Result<Outcome, LpvError> {
    let cases = [
        ("sd-a nu=0.2 on [0.001, 0.6]", systems::sd_synthesis_a(0.2)?, 0.6),
        ("sd-b nu=0.2 on [0.001, 1.3]", systems::sd_synthesis_b(0.2)?, 1.3),
        ("sd-b nu=1 on [0.001, 1.3]", systems::sd_synthesis_b(1.0)?, 1.3),
    ];
    let mut parts = Vec::new();
    let mut passed = true;
    for (name, sys, t_max) in cases {
        let s = build_synthesis_program(&sys, Mode::SynthSd { t_min: 0.001, t_max }, opts(4))?.solve(&solver())?;
        passed &= s.is_feasible();
        parts.push(format!("{name}: {}", s.status.as_str()));
        if let Some(c) = s.certificate {
            certified.push((name.into(), sys, c));
        }
    }
    Ok(outcome(passed, parts.join(", ")))
}

fn c8_soundness(certified: &Certified) -> Result<Outcome, LpvError> {
    let grid = GridSpec::default();
    let mut failed = Vec::new();
    for (name, sys, cert) in certified {
        let rep = check_certificate(sys, cert, &grid)?;
        if !rep.passed {
            let w = rep.worst().expect("non-empty report");
            failed.push(format!("{name} ({} {:.3e} vs {:.3e})", w.name, w.value, w.bound));
        }
    }
    // Quadratic stability gives a dwell-time certificate for every T̄, both by
    // solving the min-dwell program and by relabelling the constant matrix.
    let quad_sys = systems::example1(3.0, 0.5)?;
    let quad = build_analysis_program(&quad_sys, Mode::Quadratic, opts(2))?.solve(&solver())?;
    let mut inclusion = quad.is_feasible();
    if let Some(q) = &quad.certificate {
        for dwell in [0.01, 0.1, 1.0, 10.0] {
            let solved = build_analysis_program(&quad_sys, Mode::MinDwell { dwell }, opts(2))?.solve(&solver())?;
            inclusion &= solved.is_feasible();
            let mut relabelled = q.clone();
            relabelled.mode = Mode::MinDwell { dwell };
            inclusion &= check_certificate(&quad_sys, &relabelled, &grid)?.passed;
        }
    }
    let passed = failed.is_empty() && inclusion;
    let mut detail = format!("{}/{} certificates pass the 50-point check", certified.len() - failed.len(), certified.len());
    if !failed.is_empty() {
        detail.push_str(&format!(" (failed: {})", failed.join(", ")));
    }
    detail.push_str(&format!(", quadratic implies min-dwell at rho 3.0: {inclusion}"));
    Ok(outcome(passed, detail))
}

/// `(problem, optimal value)` pairs with closed-form optima.
fn analytic_sdps() -> Vec<(&'static str, SdpProblem, f64)> {
    // min tr X s.t. X₁₂ = 1: X = [[1, 1], [1, 1]], optimum 2.
    let mut a = SdpProblem::new(vec![2], 0);
    a.add_row(vec![BlockEntry::new(0, 0, 1, 0.5)], vec![], 1.0);
    a.objective = Objective::minimize(vec![BlockEntry::new(0, 0, 0, 1.0), BlockEntry::new(0, 1, 1, 1.0)], vec![]);

    // min ⟨diag(1, 2, 3), X⟩ s.t. tr X = 1: smallest diagonal entry, 1.
    let mut b = SdpProblem::new(vec![3], 0);
    b.add_row((0..3).map(|i| BlockEntry::new(0, i, i, 1.0)).collect(), vec![], 1.0);
    b.objective = Objective::minimize((0..3).map(|i| BlockEntry::new(0, i, i, (i + 1) as f64)).collect(), vec![]);

    // min y s.t. X = yI − [[2, 1], [1, 2]] ⪰ 0: largest eigenvalue, 3.
    let mut c = SdpProblem::new(vec![2], 1);
    c.add_row(vec![BlockEntry::new(0, 0, 0, 1.0)], vec![(0, -1.0)], -2.0);
    c.add_row(vec![BlockEntry::new(0, 1, 1, 1.0)], vec![(0, -1.0)], -2.0);
    c.add_row(vec![BlockEntry::new(0, 0, 1, 0.5)], vec![], -1.0);
    c.objective = Objective::minimize(vec![], vec![(0, 1.0)]);

    vec![("min trace", a, 2.0), ("min weighted trace", b, 1.0), ("max eigenvalue", c, 3.0)]
}

fn random_sdp(rng: &mut ChaCha8Rng) -> SdpProblem {
    let nb = rng.gen_range(1..4);
    let blocks: Vec<usize> = (0..nb).map(|_| rng.gen_range(1..6)).collect();
    let n_free = rng.gen_range(0..4);
    let mut p = SdpProblem::new(blocks.clone(), n_free);
    let entry = |rng: &mut ChaCha8Rng, scale: f64| {
        let b = rng.gen_range(0..nb);
        BlockEntry::new(b, rng.gen_range(0..blocks[b]), rng.gen_range(0..blocks[b]), rng.gen_range(-scale..scale))
    };
    for _ in 0..rng.gen_range(1..8) {
        let es = (0..rng.gen_range(0..6)).map(|_| entry(rng, 1e6)).collect();
        let mut free = Vec::new();
        for k in 0..n_free {
            if rng.gen_bool(0.5) {
                free.push((k, rng.gen_range(-10.0..10.0)));
            }
        }
        let rhs = rng.gen_range(-1e3..1e3);
        p.add_row(es, free, rhs);
    }
    if rng.gen_bool(0.5) {
        let es = (0..rng.gen_range(0..5)).map(|_| entry(rng, 1.0)).collect();
        let free = (0..n_free).map(|k| (k, rng.gen_range(-2.0..2.0))).collect();
        p.objective = Objective::minimize(es, free);
    }
    p
}

fn c9_solver() -> Result<Outcome, LpvError> {
    let mut parts = Vec::new();
    let mut passed = true;
    for (name, p, opt) in analytic_sdps() {
        let s = solve(&p, &solver())?;
        let r = check_solution(&p, &s);
        let ok = s.status == SdpStatus::Feasible
            && s.primal_obj >= s.dual_obj - 1e-8 * (1.0 + opt.abs())
            && r.primal <= 1e-8
            && r.dual <= 1e-8
            && r.gap <= 1e-8
            && r.worst_min_eig() >= -1e-8
            && (s.primal_obj - opt).abs() <= 1e-6 * (1.0 + opt);
        passed &= ok;
        parts.push(format!(
            "{name}: obj {:.8} (exact {opt}), residuals {:.1e}/{:.1e}/{:.1e}",
            s.primal_obj, r.primal, r.dual, r.gap
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut round_trips = 0;
    for _ in 0..50 {
        let p = random_sdp(&mut rng);
        let text = export_sdpa(&p);
        let back = import_sdpa(&text)?;
        if back == p && export_sdpa(&back) == text {
            round_trips += 1;
        }
    }
    passed &= round_trips == 50;
    parts.push(format!("SDPA round trips {round_trips}/50"));
    Ok(outcome(passed, parts.join("; ")))
}

fn report(n: usize, result: Result<Outcome, LpvError>, started: Instant, all: &mut bool) {
    let secs = started.elapsed().as_secs_f64();
    match result {
        Ok(o) => {
            *all &= o.passed;
            println!("criterion {n}: {} [{secs:.1} s] {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        }
        Err(e) => {
            *all = false;
            println!("criterion {n}: FAIL [{secs:.1} s] error: {e}");
        }
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let extended = args.iter().any(|a| a == "--include-ignored" || a == "--ignored");
    let mut certified = Certified::new();
    let mut all = true;

    type Criterion = fn(&mut Certified) -> Result<Outcome, LpvError>;
    let criteria: [(usize, Criterion, bool); 7] = [
        (1, c1_scalar, false),
        (2, c2_quadratic, false),
        (3, c3_monotone, false),
        (4, c4_example2_d2, false),
        (5, c5_example2_d4, true),
        (6, c6_ct_synthesis, false),
        (7, c7_sampled_data, true),
    ];
    for (n, run, slow) in criteria {
        if slow && !extended {
            println!("criterion {n}: SKIP (extended, run with --include-ignored)");
            continue;
        }
        let t = Instant::now();
        report(n, run(&mut certified), t, &mut all);
    }
    let t = Instant::now();
    report(8, c8_soundness(&certified), t, &mut all);
    let t = Instant::now();
    report(9, c9_solver(), t, &mut all);

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
