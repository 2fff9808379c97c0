use lpvsos::lpv::{
    build_analysis_program, check_certificate, systems, BuildOptions, GridSpec, Mode,
};
use lpvsos::poly::{monomial_basis, parse_poly, binomial, Monomial, PolyMatrix, Polynomial, VarEnv};
use lpvsos::sdp::{check_solution, export_sdpa, import_sdpa, solve, BlockEntry, Objective, SdpProblem, SdpStatus, SolverOptions};
use lpvsos::sos::{LinPolyMatrix, SosConstraint, SosProgram};
use nalgebra::DMatrix;
use proptest::prelude::*;

// ---------- polynomials ----------

fn poly_strategy(arity: usize, max_deg: u32) -> impl Strategy<Value = Polynomial> {
    let mons = monomial_basis(arity, &(0..arity).collect::<Vec<_>>(), max_deg);
    let n = mons.len();
    prop::collection::vec((0..n, -5i32..=5, prop::bool::ANY), 0..8).prop_map(move |terms| {
        Polynomial::from_terms(
            arity,
            terms.into_iter().map(|(k, c, half)| (mons[k].clone(), if half { c as f64 / 4.0 } else { c as f64 })),
        )
    })
}

fn point_strategy(arity: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, arity)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn ring_operations_commute_with_evaluation(
        p in poly_strategy(3, 4),
        q in poly_strategy(3, 4),
        xs in prop::collection::vec(point_strategy(3), 100),
    ) {
        let (s, d, m) = (&p + &q, &p - &q, &p * &q);
        for x in &xs {
            let (pv, qv) = (p.eval(x), q.eval(x));
            prop_assert!(close(s.eval(x), pv + qv));
            prop_assert!(close(d.eval(x), pv - qv));
            prop_assert!(close(m.eval(x), pv * qv));
        }
    }

    #[test]
    fn product_rule_is_coefficient_exact(p in poly_strategy(3, 3), q in poly_strategy(3, 3), v in 0usize..3) {
        let lhs = (&p * &q).diff(v);
        let rhs = &(&p.diff(v) * &q) + &(&p * &q.diff(v));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn render_then_parse_is_identity(p in poly_strategy(3, 4)) {
        let env = VarEnv::with_names(&["x", "y", "z"]);
        let back = parse_poly(&p.render(&env), &env).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn he_is_symmetric_and_substitution_commutes(
        entries in prop::collection::vec(poly_strategy(2, 3), 4),
        q in poly_strategy(2, 2),
        xs in prop::collection::vec(point_strategy(2), 20),
    ) {
        let m = PolyMatrix::from_rows(2, 2, entries).unwrap();
        let h = m.he().unwrap();
        prop_assert_eq!(h.get(0, 1), h.get(1, 0));
        let composed = m.substitute(0, &q);
        for x in &xs {
            let inner = vec![q.eval(x), x[1]];
            let want = m.eval(&inner);
            let got = composed.eval(x);
            for (a, b) in got.iter().zip(want.iter()) {
                prop_assert!(close(*a, *b), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn monomial_basis_is_graded_and_complete(arity in 1usize..4, deg in 0u32..5) {
        let vars: Vec<usize> = (0..arity).collect();
        let b = monomial_basis(arity, &vars, deg);
        prop_assert_eq!(b.len(), binomial(arity + deg as usize, deg as usize));
        prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(b.windows(2).all(|w| w[0].degree() <= w[1].degree()));
    }

    #[test]
    fn no_zero_coefficients_are_stored(p in poly_strategy(2, 3)) {
        let d = &p - &p;
        prop_assert!(d.is_zero());
        prop_assert_eq!(d.n_terms(), 0);
        prop_assert!(p.terms().all(|(_, c)| c != 0.0));
    }
}

// ---------- SOS compiler ----------

/// `Σ qₖ² + c·Σ m²` over all monomials `m` of degree ≤ 2 in one or two
/// variables: SOS with a positive definite Gram matrix by construction.
fn sos_poly_strategy(arity: usize) -> impl Strategy<Value = Polynomial> {
    (prop::collection::vec(poly_strategy(arity, 2), 1..3), 0.1f64..1.0).prop_map(move |(qs, c)| {
        let (names, squares): (&[&str], &str) = match arity {
            1 => (&["x"], "1 + x^2 + x^4"),
            _ => (&["x", "y"], "1 + x^2 + y^2 + x^4 + x^2*y^2 + y^4"),
        };
        let mut p = parse_poly(squares, &VarEnv::with_names(names)).unwrap().scale(c);
        for q in &qs {
            p = &p + &(q * q);
        }
        p
    })
}

fn scalar_lin(p: &Polynomial) -> LinPolyMatrix {
    LinPolyMatrix::from_poly_matrix(&PolyMatrix::from_rows(1, 1, vec![p.clone()]).unwrap())
}

/// `zᵀ Q z` assembled directly from the solved Gram block and the reported basis.
fn gram_form(basis: &[Monomial], q: &DMatrix<f64>, arity: usize) -> Polynomial {
    let mut out = Polynomial::zero(arity);
    for (i, mi) in basis.iter().enumerate() {
        for (j, mj) in basis.iter().enumerate() {
            let mut t = Polynomial::zero(arity);
            t.add_term(mi.mul(mj), q[(i, j)]);
            out = &out + &t;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sos_solutions_reconstruct_and_are_nonnegative(p in sos_poly_strategy(2), xs in prop::collection::vec(point_strategy(2), 1000)) {
        let mut prog = SosProgram::new(2);
        prog.add_sos_constraint(SosConstraint::new("p", scalar_lin(&p), vec![0, 1])).unwrap();
        let (sdp, map) = prog.compile().unwrap();
        let sol = solve(&sdp, &SolverOptions::default()).unwrap();
        prop_assert_eq!(sol.status, SdpStatus::Feasible, "{}", sol.message);

        let c = &map.constraints[0];
        let form = gram_form(&c.basis, &sol.blocks[c.gram_block], 2);
        let diff = &form - &p;
        prop_assert!(diff.max_abs_coeff() <= 1e-6, "{}", diff.max_abs_coeff());
        for r in prog.reconstruction_residuals(&map, &sol).unwrap() {
            prop_assert!(r <= 1e-6);
        }
        let half = (p.degree() as usize).div_ceil(2);
        prop_assert_eq!(c.basis.len(), binomial(2 + half, half));
        for x in &xs {
            prop_assert!(form.eval(x) >= -1e-6);
        }
    }

    #[test]
    fn multiplier_programs_reconstruct(p in sos_poly_strategy(1), shift in 0.0f64..0.5) {
        // p − shift·x² + shift ≥ 0 on [−1, 1]; certify with a multiplier on 1 − x².
        let x2 = parse_poly("x^2", &VarEnv::with_names(&["x"])).unwrap();
        let target = &(&p - &x2.scale(shift)) + &Polynomial::constant(1, shift);
        let g = &Polynomial::constant(1, 1.0) - &x2;
        let mut prog = SosProgram::new(1);
        let mut c = SosConstraint::new("box", scalar_lin(&target), vec![0]);
        c.ineqs = vec![g];
        c.multiplier_degree = 2;
        prog.add_sos_constraint(c).unwrap();
        let (sdp, map) = prog.compile().unwrap();
        prop_assert_eq!(&prog.compile().unwrap().0, &sdp);
        let sol = solve(&sdp, &SolverOptions::default()).unwrap();
        prop_assert_eq!(sol.status, SdpStatus::Feasible, "{}", sol.message);
        for r in prog.reconstruction_residuals(&map, &sol).unwrap() {
            prop_assert!(r <= 1e-6, "{r}");
        }
    }
}

// ---------- SDP core ----------

fn random_sym(n: usize, vals: &[f64]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            out.push((i, j, vals[k % vals.len()]));
            k += 1;
        }
    }
    out
}

fn inner_entries(es: &[BlockEntry], x: &[DMatrix<f64>]) -> f64 {
    es.iter().map(|e| if e.i == e.j { e.value * x[e.block][(e.i, e.j)] } else { 2.0 * e.value * x[e.block][(e.i, e.j)] }).sum()
}

#[derive(Debug, Clone)]
struct BoundedSdp {
    problem: SdpProblem,
    /// Objective at a known primal feasible point; an upper bound on the optimum.
    upper: f64,
    /// Dual objective at a known dual feasible point; a lower bound on the optimum.
    lower: f64,
}

/// Primal and dual strictly feasible by construction: `b = A(X₀) + F y₀` and
/// `C = Aᵀ z₀ + Z₀`, `c_f = Fᵀ z₀` with `X₀, Z₀ ≻ 0`.
fn bounded_sdp_strategy() -> impl Strategy<Value = BoundedSdp> {
    (
        prop::collection::vec(1usize..4, 1..3),
        1usize..5,
        0usize..3,
        prop::collection::vec(-1.0f64..1.0, 64),
        prop::collection::vec(-1.0f64..1.0, 8),
        prop::collection::vec(-0.3f64..0.3, 16),
    )
        .prop_map(|(blocks, m, n_free, vals, z0, y0)| {
            let mut p = SdpProblem::new(blocks.clone(), n_free);
            let x0: Vec<DMatrix<f64>> = blocks
                .iter()
                .enumerate()
                .map(|(b, &n)| {
                    let mut x = DMatrix::identity(n, n);
                    for (i, j, v) in random_sym(n, &vals[b * 7..]) {
                        if i != j {
                            x[(i, j)] += 0.2 * v / n as f64;
                            x[(j, i)] = x[(i, j)];
                        }
                    }
                    x
                })
                .collect();
            let mut cblocks = Vec::new();
            let mut cfree = vec![0.0; n_free];
            let mut rows = Vec::new();
            for r in 0..m {
                let mut es = Vec::new();
                for (b, &n) in blocks.iter().enumerate() {
                    for (i, j, v) in random_sym(n, &vals[(r * 11 + b * 5) % 40..]) {
                        es.push(BlockEntry::new(b, i, j, (v * 8.0).round() / 8.0));
                    }
                }
                let free: Vec<(usize, f64)> = (0..n_free).map(|k| (k, vals[(r * 3 + k) % 64])).collect();
                rows.push((es, free));
            }
            for (r, (es, free)) in rows.into_iter().enumerate() {
                let rhs = inner_entries(&es, &x0) + free.iter().map(|(k, v)| v * y0[*k]).sum::<f64>();
                for e in &es {
                    cblocks.push(BlockEntry::new(e.block, e.i, e.j, z0[r] * e.value));
                }
                for (k, v) in &free {
                    cfree[*k] += z0[r] * v;
                }
                p.add_row(es, free, rhs);
            }
            for (b, &n) in blocks.iter().enumerate() {
                for i in 0..n {
                    cblocks.push(BlockEntry::new(b, i, i, 1.0));
                }
            }
            p.objective = Objective::minimize(cblocks.clone(), cfree.iter().copied().enumerate().collect());
            let upper = inner_entries(&merge_entries(cblocks), &x0) + cfree.iter().zip(&y0).map(|(c, y)| c * y).sum::<f64>();
            let lower: f64 = p.rows.iter().zip(&z0).map(|(r, z)| r.rhs * z).sum();
            BoundedSdp { problem: p, upper, lower }
        })
}

fn merge_entries(es: Vec<BlockEntry>) -> Vec<BlockEntry> {
    match Objective::minimize(es, vec![]) {
        Objective::Minimize { blocks, .. } => blocks,
        Objective::Feasibility => vec![],
    }
}

fn random_problem_strategy() -> impl Strategy<Value = SdpProblem> {
    (
        prop::collection::vec(1usize..5, 1..4),
        0usize..4,
        prop::collection::vec((0usize..4, 0usize..5, 0usize..5, -1e6f64..1e6), 0..30),
        prop::collection::vec((0usize..4, -10.0f64..10.0), 0..6),
        prop::collection::vec(-1e3f64..1e3, 1..6),
        prop::bool::ANY,
    )
        .prop_map(|(blocks, n_free, raw, free_raw, rhs, with_obj)| {
            let mut p = SdpProblem::new(blocks.clone(), n_free);
            let nb = blocks.len();
            let entry = |b: usize, i: usize, j: usize, v: f64| {
                let b = b % nb;
                BlockEntry::new(b, i % blocks[b], j % blocks[b], v)
            };
            for (r, &b) in rhs.iter().enumerate() {
                let es: Vec<BlockEntry> = raw.iter().skip(r).step_by(rhs.len()).map(|&(bb, i, j, v)| entry(bb, i, j, v)).collect();
                let free: Vec<(usize, f64)> = if n_free == 0 {
                    vec![]
                } else {
                    free_raw.iter().skip(r).step_by(rhs.len()).map(|&(k, v)| (k % n_free, v)).collect()
                };
                p.add_row(es, free, b);
            }
            if with_obj {
                let es = raw.iter().take(5).map(|&(bb, i, j, v)| entry(bb, i, j, v * 1e-3)).collect();
                let free = if n_free == 0 { vec![] } else { vec![(0, 1.5)] };
                p.objective = Objective::minimize(es, free);
            }
            p
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn sdpa_round_trip_is_identity(p in random_problem_strategy()) {
        let text = export_sdpa(&p);
        let back = import_sdpa(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(export_sdpa(&back), text);
    }

    #[test]
    fn solved_sdps_satisfy_weak_duality_and_known_bounds(s in bounded_sdp_strategy()) {
        let opts = SolverOptions::default();
        let sol = solve(&s.problem, &opts).unwrap();
        prop_assert_eq!(sol.status, SdpStatus::Feasible, "{}", sol.message);
        let rep = check_solution(&s.problem, &sol);
        let scale = 1.0 + sol.primal_obj.abs() + sol.dual_obj.abs();
        // Weak duality: any primal-dual feasible pair has primal ≥ dual.
        prop_assert!(sol.primal_obj - sol.dual_obj >= -1e-6 * scale, "{} {}", sol.primal_obj, sol.dual_obj);
        prop_assert!((sol.primal_obj - sol.dual_obj).abs() <= 1e-6 * scale);
        prop_assert!(sol.primal_obj <= s.upper + 1e-6 * (1.0 + s.upper.abs()));
        prop_assert!(sol.dual_obj >= s.lower - 1e-6 * (1.0 + s.lower.abs()));
        prop_assert!(rep.primal <= 1e-6 && rep.dual <= 1e-6, "{rep:?}");
        prop_assert!(rep.worst_min_eig() >= -10.0 * opts.tol, "{}", rep.worst_min_eig());
        // Duality gap shrinks across iterations (10% slack).
        let gaps: Vec<f64> = sol.history.iter().map(|h| h.mu).collect();
        for w in gaps.windows(2) {
            prop_assert!(w[1] <= 1.1 * w[0], "{gaps:?}");
        }
    }
}

// ---------- LPV certificates ----------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// `ẋ = a x`, `x⁺ = j x` is stable under dwell `T̄` iff `j² e^{2aT̄} < 1`; no
    /// certificate may exist below `ln j / (−a)`, and any certificate must pass the grid.
    #[test]
    fn scalar_min_dwell_certificates_are_sound(a in -2.0f64..-0.2, j in 1.1f64..3.0, dwell in 0.05f64..3.0) {
        let sys = systems::scalar(a, j);
        let program = build_analysis_program(&sys, Mode::MinDwell { dwell }, BuildOptions::new(2, 0.01)).unwrap();
        let solved = program.solve(&SolverOptions::default()).unwrap();
        let exact = j.ln() / (-a);
        if solved.is_feasible() {
            prop_assert!(dwell >= exact, "certified T̄={dwell} below exact {exact}");
            let cert = solved.certificate.as_ref().unwrap();
            let report = check_certificate(&sys, cert, &GridSpec::default()).unwrap();
            prop_assert!(report.passed, "{:?}", report.worst());
        } else {
            prop_assert!(solved.status != SdpStatus::Feasible);
        }
    }

    #[test]
    fn example1_certificates_pass_the_grid(rho_max in 0.5f64..6.0, nu in 0.0f64..1.0, dwell in 0.3f64..3.0) {
        let sys = systems::example1(rho_max, nu).unwrap();
        let program = build_analysis_program(&sys, Mode::MinDwell { dwell }, BuildOptions::new(2, 0.01)).unwrap();
        let solved = program.solve(&SolverOptions::default()).unwrap();
        if let Some(cert) = solved.certificate.as_ref().filter(|_| solved.is_feasible()) {
            let report = check_certificate(&sys, cert, &GridSpec::default()).unwrap();
            prop_assert!(report.passed, "{:?}", report.worst());
        }
    }
}
