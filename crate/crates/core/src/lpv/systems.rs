//! Benchmark systems used by tests, acceptance runs and the bundled problem files.

use crate::poly::{parse_poly, PolyMatrix, Polynomial, VarEnv};

use super::{LpvError, LpvSystem};

fn matrix(env: &VarEnv, rows: usize, cols: usize, entries: &[&str]) -> PolyMatrix {
    let polys = entries.iter().map(|e| parse_poly(e, env).expect("built-in polynomial")).collect();
    PolyMatrix::from_rows(rows, cols, polys).expect("built-in matrix shape")
}

/// `ẋ = a x`, `x⁺ = j x`, no parameters.
pub fn scalar(a: f64, j: f64) -> LpvSystem {
    let env = VarEnv::lpv(0);
    let am = matrix(&env, 1, 1, &[&a.to_string()]);
    let jm = matrix(&env, 1, 1, &[&j.to_string()]);
    LpvSystem::new("scalar", am, vec![])
        .and_then(|s| s.with_jump(jm))
        .expect("scalar system")
}

/// `A(ρ) = [[0, 1], [−2 − ρ, −1]]`, `J = I`, `ρ ∈ [0, ρ̄]`, `|ρ̇| ≤ ν`.
pub fn example1(rho_max: f64, nu: f64) -> Result<LpvSystem, LpvError> {
    let env = VarEnv::lpv(1);
    let a = matrix(&env, 2, 2, &["0", "1", "-2 - p1", "-1"]);
    LpvSystem::new("example1", a, vec![(0.0, rho_max)])?.with_derivative_box(&[(-nu, nu)])
}

/// Four-state system with `ρ` on the unit circle; `ρ̇ = β̇ (−ρ₂, ρ₁)` with `|β̇| ≤ ν`.
///
/// The lower rows use `−3υρᵢ/2` and `υ(−ρ₁ − 2ρ₂)` (`υ = 15/4`). With
/// `−3υρᵢ/4` and `υ(ρ₁ − 2ρ₂)` the frozen matrices are singular for every `ρ`
/// and unstable at `ρ = (1, 0)`, so no dwell time exists.
pub fn example2(nu: f64) -> Result<LpvSystem, LpvError> {
    let env = VarEnv::lpv(2);
    let a = matrix(
        &env,
        4,
        4,
        &[
            "3/4", "2", "p1", "p2",
            "0", "1/2", "-p2", "p1",
            "-3*(15/4)*p1/2", "(15/4)*(p2 - 2*p1)", "-15/4", "0",
            "-3*(15/4)*p2/2", "(15/4)*(-p1 - 2*p2)", "0", "-15/4",
        ],
    );
    let ar = env.arity();
    let h = parse_poly("p1^2 + p2^2 - 1", &env)?;
    let p1 = Polynomial::var(ar, 1);
    let p2 = Polynomial::var(ar, 2);
    let v1 = vec![p2.scale(-nu), p1.scale(nu)];
    let v2 = vec![p2.scale(nu), p1.scale(-nu)];
    LpvSystem::new("example2", a, vec![(-1.0, 1.0), (-1.0, 1.0)])?
        .with_generators(vec![])?
        .with_equalities(vec![h])?
        .with_derivative_vertices(vec![v1, v2])
}

/// `ẋ = [[3 − ρ, 1], [1 − ρ, 2 + ρ]] x + [1; 1 + ρ] u`, `J = I`, `ρ ∈ [0, 1]`, `|ρ̇| ≤ ν`.
pub fn ct_synthesis(nu: f64) -> Result<LpvSystem, LpvError> {
    let env = VarEnv::lpv(1);
    let a = matrix(&env, 2, 2, &["3 - p1", "1", "1 - p1", "2 + p1"]);
    let b = matrix(&env, 2, 1, &["1", "1 + p1"]);
    LpvSystem::new("ct-synthesis", a, vec![(0.0, 1.0)])?.with_input(b)?.with_derivative_box(&[(-nu, nu)])
}

/// `ẋ = [[2ρ, 1.1 + ρ], [−2.2 + ρ, −3.3 + 0.1ρ]] x + [2ρ; 0.1 + ρ] u`, `ρ ∈ [−1, 1]`, `|ρ̇| ≤ ν`.
pub fn sd_synthesis_a(nu: f64) -> Result<LpvSystem, LpvError> {
    let env = VarEnv::lpv(1);
    let a = matrix(&env, 2, 2, &["2*p1", "1.1 + p1", "-2.2 + p1", "-3.3 + 0.1*p1"]);
    let b = matrix(&env, 2, 1, &["2*p1", "0.1 + p1"]);
    LpvSystem::new("sd-synthesis-a", a, vec![(-1.0, 1.0)])?.with_input(b)?.with_derivative_box(&[(-nu, nu)])
}

/// `ẋ = [[0, 1], [0.1, 0.4 + 0.6ρ]] x + [0; 1] u`, `ρ ∈ [−1, 1]`, `|ρ̇| ≤ ν`.
pub fn sd_synthesis_b(nu: f64) -> Result<LpvSystem, LpvError> {
    let env = VarEnv::lpv(1);
    let a = matrix(&env, 2, 2, &["0", "1", "0.1", "0.4 + 0.6*p1"]);
    let b = matrix(&env, 2, 1, &["0", "1"]);
    LpvSystem::new("sd-synthesis-b", a, vec![(-1.0, 1.0)])?.with_input(b)?.with_derivative_box(&[(-nu, nu)])
}
