//! Sum-of-squares programs over polynomial matrices and their compilation to
//! block SDPs by Gram parametrization.
//!
//! A symmetric `n x n` polynomial matrix `Θ` of degree `2k` over variables `V`
//! is SOS when `Θ = (b ⊗ I_n)^T Q (b ⊗ I_n)` with `Q ⪰ 0`, where `b` is the
//! vector of all monomials in `V` of degree at most `k`. Gram index
//! `r = a * n + i` pairs basis monomial `a` with matrix row `i`.

mod linpoly;

pub use linpoly::{LinForm, LinPoly, LinPolyMatrix, Unknown};

use std::collections::HashMap;
use std::ops::Range;

use thiserror::Error;

use crate::poly::{binomial, monomial_basis, Monomial, PolyError, PolyMatrix, Polynomial};
use crate::sdp::{BlockEntry, SdpProblem, SdpSolution, SdpStatus};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SosError {
    #[error("expression is not affine in the decision unknowns")]
    Nonlinear,
    #[error("constraint `{label}` uses variable index {var} outside its variable list")]
    ForeignVariable { label: String, var: usize },
    #[error("constraint `{0}` expression must be square")]
    NotSquare(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("program has no decision variables and no constraints")]
    Empty,
    #[error("cannot extract values from a solution with status {0}")]
    NotFeasible(&'static str),
    #[error("unknown id out of range for this program")]
    ForeignUnknown,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Polynomial matrix with free coefficient unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionPolyMatrix {
    pub id: usize,
    pub rows: usize,
    pub cols: usize,
    pub symmetric: bool,
    pub vars: Vec<usize>,
    pub degree: u32,
    pub basis: Vec<Monomial>,
    unknowns: Range<usize>,
    matrix: LinPolyMatrix,
}

impl DecisionPolyMatrix {
    pub fn matrix(&self) -> &LinPolyMatrix {
        &self.matrix
    }

    pub fn n_unknowns(&self) -> usize {
        self.unknowns.len()
    }

    /// Free-variable ids of the coefficients, entry-major then monomial order.
    pub fn unknown_ids(&self) -> Range<usize> {
        self.unknowns.clone()
    }
}

/// SOS polynomial matrix `(b ⊗ I)^T Q (b ⊗ I)` backed by one Gram block.
#[derive(Debug, Clone, PartialEq)]
pub struct SosMatrix {
    pub block: usize,
    pub size: usize,
    pub vars: Vec<usize>,
    pub basis: Vec<Monomial>,
    matrix: LinPolyMatrix,
}

impl SosMatrix {
    pub fn matrix(&self) -> &LinPolyMatrix {
        &self.matrix
    }

    pub fn block_dim(&self) -> usize {
        self.size * self.basis.len()
    }
}

/// `expr - Σ σ_i g_i - Σ λ_j h_j - margin I` must be SOS, with SOS matrices `σ_i`
/// and symmetric (sign-free) matrices `λ_j` created by the program.
#[derive(Debug, Clone, PartialEq)]
pub struct SosConstraint {
    pub label: String,
    pub expr: LinPolyMatrix,
    pub vars: Vec<usize>,
    pub ineqs: Vec<Polynomial>,
    pub eqs: Vec<Polynomial>,
    pub margin: f64,
    /// Base degree shared with the decision matrices; multipliers are padded from it.
    pub multiplier_degree: u32,
}

impl SosConstraint {
    pub fn new(label: impl Into<String>, expr: LinPolyMatrix, vars: Vec<usize>) -> Self {
        SosConstraint {
            label: label.into(),
            expr,
            vars,
            ineqs: Vec::new(),
            eqs: Vec::new(),
            margin: 0.0,
            multiplier_degree: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ConstraintRecord {
    constraint: SosConstraint,
    degree: u32,
    gram: SosMatrix,
    ineq_mults: Vec<SosMatrix>,
    eq_mults: Vec<DecisionPolyMatrix>,
}

impl ConstraintRecord {
    /// `expr - Σ σ g - Σ λ h - margin I`.
    fn residual_expr(&self) -> Result<LinPolyMatrix, SosError> {
        let c = &self.constraint;
        let n = c.expr.rows();
        let mut lhs = c.expr.clone();
        for (m, g) in self.ineq_mults.iter().zip(&c.ineqs) {
            lhs = lhs.sub(&m.matrix.mul_poly(g))?;
        }
        for (m, h) in self.eq_mults.iter().zip(&c.eqs) {
            lhs = lhs.sub(&m.matrix.mul_poly(h))?;
        }
        if c.margin != 0.0 {
            lhs = lhs.sub(&LinPolyMatrix::identity(lhs.arity(), n).scale(c.margin))?;
        }
        Ok(lhs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosProgram {
    arity: usize,
    n_free: usize,
    blocks: Vec<usize>,
    decisions: Vec<DecisionPolyMatrix>,
    constraints: Vec<ConstraintRecord>,
}

/// Where each constraint landed in the compiled SDP.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledConstraint {
    pub label: String,
    pub degree: u32,
    pub gram_block: usize,
    pub basis: Vec<Monomial>,
    pub rows: Range<usize>,
    pub multiplier_blocks: Vec<usize>,
    pub eq_multipliers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledMap {
    pub constraints: Vec<CompiledConstraint>,
    pub n_free: usize,
    pub blocks: Vec<usize>,
}

impl CompiledMap {
    fn value_fn<'a>(&self, sol: &'a SdpSolution) -> impl Fn(Unknown) -> f64 + 'a {
        move |u| match u {
            Unknown::Free(k) => sol.free[k],
            Unknown::Gram(b, p, q) => sol.blocks[b][(p, q)],
        }
    }

    /// Numeric value of any matrix built from this program's unknowns.
    pub fn evaluate(&self, sol: &SdpSolution, m: &LinPolyMatrix) -> Result<PolyMatrix, SosError> {
        if sol.free.len() != self.n_free || sol.blocks.len() != self.blocks.len() {
            return Err(SosError::ForeignUnknown);
        }
        Ok(m.eval_unknowns(&self.value_fn(sol)))
    }
}

/// Solved values of a decision matrix. Marginal solutions are accepted since
/// they satisfy the equalities; callers decide whether the margin suffices.
pub fn extract_values(map: &CompiledMap, sol: &SdpSolution, m: &DecisionPolyMatrix) -> Result<PolyMatrix, SosError> {
    match sol.status {
        SdpStatus::Feasible | SdpStatus::Marginal => map.evaluate(sol, m.matrix()),
        s => Err(SosError::NotFeasible(s.as_str())),
    }
}

fn smallest_even_at_least(d: u32) -> u32 {
    d + d % 2
}

fn largest_even_at_most(d: u32) -> u32 {
    d - d % 2
}

impl SosProgram {
    /// Program over polynomials with `arity` variables.
    pub fn new(arity: usize) -> Self {
        SosProgram { arity, n_free: 0, blocks: Vec::new(), decisions: Vec::new(), constraints: Vec::new() }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn decisions(&self) -> &[DecisionPolyMatrix] {
        &self.decisions
    }

    /// Polynomial matrix with one free unknown per (entry, monomial); symmetric
    /// matrices share unknowns between `(i, j)` and `(j, i)`.
    pub fn declare_decision(
        &mut self,
        rows: usize,
        cols: usize,
        symmetric: bool,
        vars: &[usize],
        degree: u32,
    ) -> DecisionPolyMatrix {
        assert!(!symmetric || rows == cols, "symmetric decision matrices are square");
        let basis = monomial_basis(self.arity, vars, degree);
        let start = self.n_free;
        let mut matrix = LinPolyMatrix::zeros(self.arity, rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                if symmetric && j < i {
                    continue;
                }
                let mut p = LinPoly::zero(self.arity);
                for m in &basis {
                    p.add_term(m.clone(), &LinForm::unknown(Unknown::Free(self.n_free), 1.0), 1.0);
                    self.n_free += 1;
                }
                if symmetric && i != j {
                    matrix.set(j, i, p.clone());
                }
                matrix.set(i, j, p);
            }
        }
        let d = DecisionPolyMatrix {
            id: self.decisions.len(),
            rows,
            cols,
            symmetric,
            vars: vars.to_vec(),
            degree,
            basis,
            unknowns: start..self.n_free,
            matrix,
        };
        self.decisions.push(d.clone());
        d
    }

    /// New SOS matrix of degree `2 * half_degree` with its own Gram block.
    pub fn declare_sos(&mut self, size: usize, vars: &[usize], half_degree: u32) -> SosMatrix {
        let basis = monomial_basis(self.arity, vars, half_degree);
        let block = self.blocks.len();
        self.blocks.push(size * basis.len());
        let mut matrix = LinPolyMatrix::zeros(self.arity, size, size);
        for i in 0..size {
            for j in i..size {
                let mut p = LinPoly::zero(self.arity);
                for (a, ba) in basis.iter().enumerate() {
                    for (c, bc) in basis.iter().enumerate() {
                        let (r, s) = (a * size + i, c * size + j);
                        let u = Unknown::Gram(block, r.min(s), r.max(s));
                        p.add_term(ba.mul(bc), &LinForm::unknown(u, 1.0), 1.0);
                    }
                }
                if i != j {
                    matrix.set(j, i, p.clone());
                }
                matrix.set(i, j, p);
            }
        }
        SosMatrix { block, size, vars: vars.to_vec(), basis, matrix }
    }

    /// Registers `c`, creating its Gram block and multipliers.
    pub fn add_sos_constraint(&mut self, c: SosConstraint) -> Result<usize, SosError> {
        let n = c.expr.rows();
        if c.expr.cols() != n || n == 0 {
            return Err(SosError::NotSquare(c.label.clone()));
        }
        if c.expr.arity() != self.arity {
            return Err(SosError::Dimension(format!("constraint `{}` has arity {}", c.label, c.expr.arity())));
        }
        let foreign = |vars: Vec<usize>| vars.into_iter().find(|v| !c.vars.contains(v));
        let used = c.expr.variables();
        let gen_vars = c.ineqs.iter().chain(&c.eqs).flat_map(Polynomial::variables).collect();
        if let Some(var) = foreign(used).or_else(|| foreign(gen_vars)) {
            return Err(SosError::ForeignVariable { label: c.label.clone(), var });
        }
        let d = c.multiplier_degree;
        let d_sos = smallest_even_at_least(d);
        let mut need = c.expr.degree();
        for g in &c.ineqs {
            need = need.max(d_sos + g.degree());
        }
        for h in &c.eqs {
            need = need.max(d + h.degree());
        }
        let degree = smallest_even_at_least(need);

        let gram = self.declare_sos(n, &c.vars, degree / 2);
        let ineq_mults = c
            .ineqs
            .iter()
            .map(|g| self.declare_sos(n, &c.vars, largest_even_at_most(degree - g.degree()) / 2))
            .collect();
        let eq_mults = c.eqs.iter().map(|h| self.declare_decision(n, n, true, &c.vars, degree - h.degree())).collect();
        self.constraints.push(ConstraintRecord { constraint: c, degree, gram, ineq_mults, eq_mults });
        Ok(self.constraints.len() - 1)
    }

    /// Gram block size of constraint `id`.
    pub fn gram_dim(&self, id: usize) -> usize {
        self.constraints[id].gram.block_dim()
    }

    pub fn constraint_degree(&self, id: usize) -> u32 {
        self.constraints[id].degree
    }

    /// Number of multiplier Gram blocks of constraint `id`.
    pub fn n_multiplier_blocks(&self, id: usize) -> usize {
        self.constraints[id].ineq_mults.len()
    }

    pub fn eq_multipliers(&self, id: usize) -> &[DecisionPolyMatrix] {
        &self.constraints[id].eq_mults
    }

    /// Expected equality rows: one per (upper entry, monomial of degree ≤ 2k).
    pub fn estimated_rows(&self) -> usize {
        self.constraints
            .iter()
            .map(|r| {
                let n = r.constraint.expr.rows();
                n * (n + 1) / 2 * binomial(r.constraint.vars.len() + r.degree as usize, r.degree as usize)
            })
            .sum()
    }

    pub fn compile(&self) -> Result<(SdpProblem, CompiledMap), SosError> {
        if self.decisions.is_empty() && self.constraints.is_empty() && self.blocks.is_empty() {
            return Err(SosError::Empty);
        }
        let mut sdp = SdpProblem::new(self.blocks.clone(), self.n_free);
        let mut compiled = Vec::with_capacity(self.constraints.len());
        for rec in &self.constraints {
            let start = sdp.n_rows();
            let c = &rec.constraint;
            let n = c.expr.rows();
            let lhs = rec.residual_expr()?;
            let monos = monomial_basis(self.arity, &c.vars, rec.degree);
            let index: HashMap<&Monomial, usize> = monos.iter().enumerate().map(|(k, m)| (m, k)).collect();
            let nm = monos.len();
            let basis = &rec.gram.basis;
            // Rows indexed by (upper entry, monomial).
            let n_upper = n * (n + 1) / 2;
            let mut gram_entries: Vec<Vec<BlockEntry>> = vec![Vec::new(); n_upper * nm];
            let upper_index: Vec<Vec<usize>> = {
                let mut t = vec![vec![usize::MAX; n]; n];
                let mut k = 0;
                for i in 0..n {
                    for j in i..n {
                        t[i][j] = k;
                        k += 1;
                    }
                }
                t
            };
            for (a, ba) in basis.iter().enumerate() {
                for (cc, bc) in basis.iter().enumerate() {
                    let alpha = index[&ba.mul(bc)];
                    for i in 0..n {
                        for j in i..n {
                            let (r, s) = (a * n + i, cc * n + j);
                            let (r, s) = (r.min(s), r.max(s));
                            let w = if r == s { 1.0 } else { 0.5 };
                            gram_entries[upper_index[i][j] * nm + alpha].push(BlockEntry::new(rec.gram.block, r, s, w));
                        }
                    }
                }
            }
            let mut rows_lin: Vec<LinForm> = vec![LinForm::default(); n_upper * nm];
            for i in 0..n {
                for j in i..n {
                    let k = upper_index[i][j];
                    for (src, w) in [(lhs.get(i, j), 0.5), (lhs.get(j, i), 0.5)] {
                        for (m, f) in src.terms() {
                            let Some(&alpha) = index.get(m) else {
                                let var = m.support().find(|v| !c.vars.contains(v));
                                return Err(match var {
                                    Some(var) => SosError::ForeignVariable { label: c.label.clone(), var },
                                    None => SosError::Dimension(format!(
                                        "constraint `{}` has a term above its degree {}",
                                        c.label, rec.degree
                                    )),
                                });
                            };
                            rows_lin[k * nm + alpha].add_scaled(f, w);
                        }
                    }
                }
            }
            for (entries, lin) in gram_entries.into_iter().zip(rows_lin) {
                let mut es = entries;
                let mut free = Vec::new();
                for (u, coef) in &lin.coeffs {
                    match *u {
                        Unknown::Free(k) => free.push((k, -coef)),
                        Unknown::Gram(b, p, q) => {
                            let w = if p == q { *coef } else { 0.5 * coef };
                            es.push(BlockEntry::new(b, p, q, -w));
                        }
                    }
                }
                sdp.add_row(es, free, lin.constant);
            }
            compiled.push(CompiledConstraint {
                label: c.label.clone(),
                degree: rec.degree,
                gram_block: rec.gram.block,
                basis: basis.clone(),
                rows: start..sdp.n_rows(),
                multiplier_blocks: rec.ineq_mults.iter().map(|m| m.block).collect(),
                eq_multipliers: rec.eq_mults.iter().map(|m| m.id).collect(),
            });
        }
        let map = CompiledMap { constraints: compiled, n_free: self.n_free, blocks: self.blocks.clone() };
        Ok((sdp, map))
    }

    /// Largest absolute coefficient of `Gram form - (expr - Σσg - Σλh - εI)` per constraint.
    pub fn reconstruction_residuals(&self, map: &CompiledMap, sol: &SdpSolution) -> Result<Vec<f64>, SosError> {
        self.constraints
            .iter()
            .map(|rec| {
                let lhs = map.evaluate(sol, &rec.residual_expr()?)?;
                let gram = map.evaluate(sol, rec.gram.matrix())?;
                let diff = gram.sub(&lhs)?;
                Ok(diff.entries().iter().map(Polynomial::max_abs_coeff).fold(0.0, f64::max))
            })
            .collect()
    }

    /// Numeric value of the Gram form of constraint `id`.
    pub fn gram_value(&self, map: &CompiledMap, sol: &SdpSolution, id: usize) -> Result<PolyMatrix, SosError> {
        map.evaluate(sol, self.constraints[id].gram.matrix())
    }
}

#[cfg(test)]
mod tests;
