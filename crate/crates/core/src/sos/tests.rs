use nalgebra::DMatrix;

use super::*;
use crate::poly::{parse_poly, VarEnv};
use crate::sdp::{solve, SolverOptions};

fn scalar(env: &VarEnv, text: &str) -> LinPolyMatrix {
    LinPolyMatrix::from_poly_matrix(&PolyMatrix::from_rows(1, 1, vec![parse_poly(text, env).unwrap()]).unwrap())
}

#[test]
fn decision_unknown_counts() {
    let mut prog = SosProgram::new(3);
    assert_eq!(prog.declare_decision(2, 2, true, &[0, 1], 2).n_unknowns(), 18);
    assert_eq!(prog.declare_decision(1, 1, true, &[0, 1], 0).n_unknowns(), 1);
    assert_eq!(prog.declare_decision(4, 4, true, &[0, 1, 2], 2).n_unknowns(), 100);
    let u = prog.declare_decision(1, 2, false, &[1], 1);
    assert_eq!(u.n_unknowns(), 4);
    assert_eq!(prog.n_free(), 18 + 1 + 100 + 4);
}

#[test]
fn symmetric_decision_shares_off_diagonal() {
    let mut prog = SosProgram::new(1);
    let s = prog.declare_decision(2, 2, true, &[0], 1);
    assert_eq!(s.matrix().get(0, 1), s.matrix().get(1, 0));
    assert_ne!(s.matrix().get(0, 0), s.matrix().get(1, 1));
}

#[test]
fn scalar_quadratic_gram_rows() {
    let mut prog = SosProgram::new(1);
    let c = prog.declare_decision(1, 1, true, &[0], 2);
    prog.add_sos_constraint(SosConstraint::new("p", c.matrix().clone(), vec![0])).unwrap();
    let (sdp, map) = prog.compile().unwrap();
    assert_eq!(sdp.n_rows(), 3);
    assert_eq!(sdp.blocks, vec![2]);
    assert_eq!(map.constraints[0].basis.len(), 2);
    // Q11 = c0, 2 Q12 = c1, Q22 = c2 in the SDPA convention.
    assert_eq!(sdp.rows[0].entries, vec![BlockEntry::new(0, 0, 0, 1.0)]);
    assert_eq!(sdp.rows[1].entries, vec![BlockEntry::new(0, 0, 1, 1.0)]);
    assert_eq!(sdp.rows[2].entries, vec![BlockEntry::new(0, 1, 1, 1.0)]);
    assert_eq!(sdp.rows[1].free, vec![(1, -1.0)]);
}

#[test]
fn fixed_sos_polynomial_has_expected_gram() {
    let env = VarEnv::with_names(&["x"]);
    let mut prog = SosProgram::new(1);
    prog.add_sos_constraint(SosConstraint::new("p", scalar(&env, "x^2 + 2*x + 2"), vec![0])).unwrap();
    let (sdp, map) = prog.compile().unwrap();
    let sol = solve(&sdp, &SolverOptions::default()).unwrap();
    assert!(sol.is_feasible(), "{:?} {}", sol.status, sol.message);
    let q = &sol.blocks[0];
    assert!((q - DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0])).amax() < 1e-6, "{q}");
    let g = prog.gram_value(&map, &sol, 0).unwrap();
    let p = g.get(0, 0);
    for (m, want) in [(0u32, 2.0), (1, 2.0), (2, 1.0)] {
        assert!((p.coeff(&Monomial::new(vec![m])) - want).abs() < 1e-6);
    }
}

#[test]
fn negative_at_origin_is_not_sos() {
    let env = VarEnv::with_names(&["x"]);
    let mut prog = SosProgram::new(1);
    let c = prog.declare_decision(1, 1, true, &[0], 0);
    prog.add_sos_constraint(SosConstraint::new("p", scalar(&env, "x^2 - 1"), vec![0])).unwrap();
    prog.add_sos_constraint(SosConstraint::new("c", c.matrix().clone(), vec![0])).unwrap();
    let (sdp, map) = prog.compile().unwrap();
    let sol = solve(&sdp, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Infeasible);
    assert!(matches!(extract_values(&map, &sol, &c), Err(SosError::NotFeasible("infeasible"))));
}

#[test]
fn zero_constraint_program_returns_free_values() {
    let mut prog = SosProgram::new(1);
    let c = prog.declare_decision(1, 2, false, &[0], 1);
    let (sdp, map) = prog.compile().unwrap();
    assert_eq!(sdp.n_rows(), 0);
    let sol = solve(&sdp, &SolverOptions::default()).unwrap();
    let v = extract_values(&map, &sol, &c).unwrap();
    assert_eq!(v.rows(), 1);
    assert_eq!(v.cols(), 2);
    assert!(v.entries().iter().all(|p| p.is_zero()));
    assert_eq!(SosProgram::new(2).compile().unwrap_err(), SosError::Empty);
}

#[test]
fn domain_multipliers_create_blocks() {
    // Second bullet of the clock-dependent program for a scalar system:
    // S(t, p1) - Γ1 g(p1) - Γ t (T - t) - eps SOS.
    let env = VarEnv::lpv(1);
    let mut prog = SosProgram::new(env.arity());
    let s = prog.declare_decision(1, 1, true, &[0, 1], 4);
    let mut c = SosConstraint::new("positivity", s.matrix().clone(), vec![0, 1]);
    c.ineqs = vec![parse_poly("p1*(10 - p1)", &env).unwrap(), parse_poly("t*(0.5 - t)", &env).unwrap()];
    c.margin = 0.01;
    c.multiplier_degree = 4;
    let id = prog.add_sos_constraint(c).unwrap();
    assert_eq!(prog.n_multiplier_blocks(id), 2);
    assert_eq!(prog.blocks().len(), 3);
    assert_eq!(prog.constraint_degree(id), 6);
    assert_eq!(prog.gram_dim(id), binomial(2 + 3, 3));
}

#[test]
fn equality_multipliers_are_symmetric_decisions() {
    let env = VarEnv::lpv(2);
    let mut prog = SosProgram::new(env.arity());
    let vars = [1, 2, 3, 4];
    let s = prog.declare_decision(2, 2, true, &[1, 2], 2);
    let expr = s.matrix().clone().sub(&s.matrix().rename(1, 3).rename(2, 4)).unwrap();
    let mut c = SosConstraint::new("jump", expr, vars.to_vec());
    c.eqs = vec![parse_poly("p1^2 + p2^2 - 1", &env).unwrap(), parse_poly("q1^2 + q2^2 - 1", &env).unwrap()];
    c.multiplier_degree = 2;
    let id = prog.add_sos_constraint(c).unwrap();
    assert_eq!(prog.n_multiplier_blocks(id), 0);
    assert_eq!(prog.eq_multipliers(id).len(), 2);
    assert!(prog.eq_multipliers(id).iter().all(|m| m.symmetric && m.rows == 2));
    assert_eq!(prog.blocks().len(), 1);
}

#[test]
fn foreign_and_nonlinear_expressions_are_rejected() {
    let env = VarEnv::lpv(1);
    let mut prog = SosProgram::new(env.arity());
    let s = prog.declare_decision(1, 1, true, &[0, 1], 1);
    let err = prog.add_sos_constraint(SosConstraint::new("x", s.matrix().clone(), vec![0])).unwrap_err();
    assert_eq!(err, SosError::ForeignVariable { label: "x".into(), var: 1 });
    assert_eq!(s.matrix().mul(s.matrix()).unwrap_err(), SosError::Nonlinear);
}

#[test]
fn compile_is_deterministic() {
    let env = VarEnv::lpv(1);
    let build = || {
        let mut prog = SosProgram::new(env.arity());
        let s = prog.declare_decision(2, 2, true, &[0, 1], 2);
        let a = PolyMatrix::from_rows(
            2,
            2,
            ["0", "1", "-2 - p1", "-1"].iter().map(|t| parse_poly(t, &env).unwrap()).collect(),
        )
        .unwrap();
        let flow = s.matrix().right_mul(&a).unwrap().he().unwrap().scale(-1.0).sub(&s.matrix().diff(0)).unwrap();
        let mut c = SosConstraint::new("flow", flow, vec![0, 1]);
        c.ineqs = vec![parse_poly("p1*(1 - p1)", &env).unwrap()];
        c.multiplier_degree = 2;
        prog.add_sos_constraint(c).unwrap();
        prog.compile().unwrap().0
    };
    assert_eq!(build(), build());
    assert_eq!(crate::sdp::export_sdpa(&build()), crate::sdp::export_sdpa(&build()));
}
