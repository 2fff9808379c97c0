//! Block semidefinite programs with free variables.
//!
//! Standard form (minimization):
//!
//! ```text
//! minimize   <C, X> + c_f . y
//! subject to <A_i, X> + f_i . y = b_i      (i = 1..m)
//!            X = diag(X_1, ..., X_k) PSD,   y free
//! ```
//!
//! Coefficient matrices are stored SDPA-style: an entry `(block, i, j, v)` with
//! `i <= j` sets both `A_ij` and `A_ji` to `v`, so `<A, X> = sum A_ii X_ii + 2 sum_{i<j} A_ij X_ij`.
//!
//! [`Objective::Feasibility`] problems are solved by margin maximization: every
//! block is written `X_j = Xhat_j + lambda I` with `Xhat_j` PSD and `lambda` is maximized.
//! The sign of the optimal `lambda` decides feasibility.

mod check;
mod linalg;
mod sdpa;
mod solver;

pub use check::{check_solution, ResidualReport};
pub use sdpa::{export_sdpa, import_sdpa};
pub use solver::solve;

use std::collections::BTreeMap;
use std::str::FromStr;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SdpError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("SDPA parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bad solver option `{0}`")]
    BadOption(String),
}

/// One upper-triangular coefficient; `A_ij = A_ji = value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEntry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

impl BlockEntry {
    pub fn new(block: usize, i: usize, j: usize, value: f64) -> Self {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        BlockEntry { block, i, j, value }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EqRow {
    pub entries: Vec<BlockEntry>,
    pub free: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Maximize the uniform PSD margin.
    Feasibility,
    /// Minimize `<C, X> + c_f . y`.
    Minimize { blocks: Vec<BlockEntry>, free: Vec<(usize, f64)> },
}

impl Objective {
    /// Builds a linear objective; an all-zero objective is canonically [`Objective::Feasibility`].
    pub fn minimize(blocks: Vec<BlockEntry>, free: Vec<(usize, f64)>) -> Self {
        let blocks = merge_entries(blocks);
        let free = merge_free(free);
        if blocks.is_empty() && free.is_empty() {
            Objective::Feasibility
        } else {
            Objective::Minimize { blocks, free }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub n_free: usize,
    pub rows: Vec<EqRow>,
    pub objective: Objective,
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>, n_free: usize) -> Self {
        SdpProblem { blocks, n_free, rows: Vec::new(), objective: Objective::Feasibility }
    }

    pub fn add_row(&mut self, entries: Vec<BlockEntry>, free: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.rows.push(EqRow { entries: merge_entries(entries), free: merge_free(free), rhs });
        self.rows.len() - 1
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Number of scalar primal unknowns, counting full `n x n` blocks.
    pub fn n_primal_vars(&self) -> usize {
        self.blocks.iter().map(|n| n * n).sum::<usize>() + self.n_free
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if let Some(b) = self.blocks.iter().position(|&d| d == 0) {
            return Err(SdpError::Invalid(format!("block {b} has dimension 0")));
        }
        let check_entries = |what: &str, es: &[BlockEntry]| -> Result<(), SdpError> {
            for e in es {
                let dim = *self
                    .blocks
                    .get(e.block)
                    .ok_or_else(|| SdpError::Invalid(format!("{what}: block {} out of range", e.block)))?;
                if e.i > e.j || e.j >= dim {
                    return Err(SdpError::Invalid(format!(
                        "{what}: entry ({}, {}) invalid for block {} of size {dim}",
                        e.i, e.j, e.block
                    )));
                }
                if !e.value.is_finite() {
                    return Err(SdpError::Invalid(format!("{what}: non-finite coefficient")));
                }
            }
            Ok(())
        };
        let check_free = |what: &str, fs: &[(usize, f64)]| -> Result<(), SdpError> {
            for (k, v) in fs {
                if *k >= self.n_free || !v.is_finite() {
                    return Err(SdpError::Invalid(format!("{what}: bad free-variable coefficient ({k}, {v})")));
                }
            }
            Ok(())
        };
        for (r, row) in self.rows.iter().enumerate() {
            check_entries(&format!("row {r}"), &row.entries)?;
            check_free(&format!("row {r}"), &row.free)?;
            if !row.rhs.is_finite() {
                return Err(SdpError::Invalid(format!("row {r}: non-finite right-hand side")));
            }
        }
        if let Objective::Minimize { blocks, free } = &self.objective {
            check_entries("objective", blocks)?;
            check_free("objective", free)?;
        }
        Ok(())
    }

    /// Sorted, merged, zero-free coefficient lists.
    pub fn canonicalize(&mut self) {
        for row in &mut self.rows {
            row.entries = merge_entries(std::mem::take(&mut row.entries));
            row.free = merge_free(std::mem::take(&mut row.free));
        }
        if let Objective::Minimize { blocks, free } = &self.objective {
            self.objective = Objective::minimize(blocks.clone(), free.clone());
        }
    }
}

pub(crate) fn merge_entries(entries: Vec<BlockEntry>) -> Vec<BlockEntry> {
    let mut map: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    for e in entries {
        let e = BlockEntry::new(e.block, e.i, e.j, e.value);
        *map.entry((e.block, e.i, e.j)).or_insert(0.0) += e.value;
    }
    map.into_iter()
        .filter(|(_, v)| *v != 0.0)
        .map(|((block, i, j), value)| BlockEntry { block, i, j, value })
        .collect()
}

pub(crate) fn merge_free(free: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut map: BTreeMap<usize, f64> = BTreeMap::new();
    for (k, v) in free {
        *map.entry(k).or_insert(0.0) += v;
    }
    map.into_iter().filter(|(_, v)| *v != 0.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Feasible,
    Infeasible,
    Marginal,
    NumericalFailure,
}

impl SdpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SdpStatus::Feasible => "feasible",
            SdpStatus::Infeasible => "infeasible",
            SdpStatus::Marginal => "marginal",
            SdpStatus::NumericalFailure => "numerical-failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterStats {
    pub iter: usize,
    pub mu: f64,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub residuals: Residuals,
    pub step_primal: f64,
    pub step_dual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Optimal margin for feasibility problems; smallest block eigenvalue otherwise.
    pub margin: f64,
    pub blocks: Vec<DMatrix<f64>>,
    pub free: Vec<f64>,
    /// Equality multipliers, one per row of the original problem.
    pub dual: Vec<f64>,
    /// Dual slack blocks of the (shifted, for feasibility) problem.
    pub dual_slack: Vec<DMatrix<f64>>,
    /// Multipliers of the trace-bound rows (feasibility mode only).
    pub trace_duals: Vec<f64>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub history: Vec<IterStats>,
    pub message: String,
}

impl SdpSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == SdpStatus::Feasible
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Relative tolerance on primal/dual residuals and duality gap.
    pub tol: f64,
    pub max_iter: usize,
    /// |margin| below this is reported as marginal.
    pub margin_threshold: f64,
    /// Per-block bound on `trace(X_j) / dim(X_j)` in feasibility mode.
    /// `None` picks `100 * max(1, |b|_inf)`.
    pub trace_bound: Option<f64>,
    /// Stop as soon as the sign of the margin is certified.
    pub early_exit: bool,
    /// Fraction of the step to the boundary of the cone.
    pub step_fraction: f64,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 200,
            margin_threshold: 1e-7,
            trace_bound: None,
            early_exit: true,
            step_fraction: 0.95,
            verbose: false,
        }
    }
}

impl SolverOptions {
    /// Applies `key=value` lines; blank lines and `#` comments are ignored.
    pub fn apply_config(&mut self, text: &str) -> Result<(), SdpError> {
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| SdpError::BadOption(line.to_string()))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), SdpError> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, SdpError> {
            v.parse().map_err(|_| SdpError::BadOption(format!("{key}={v}")))
        }
        match key {
            "tol" => self.tol = num(key, value)?,
            "max_iter" => self.max_iter = num(key, value)?,
            "margin_threshold" => self.margin_threshold = num(key, value)?,
            "trace_bound" => self.trace_bound = Some(num(key, value)?),
            "early_exit" => self.early_exit = num(key, value)?,
            "step_fraction" => self.step_fraction = num(key, value)?,
            "verbose" => self.verbose = num(key, value)?,
            _ => return Err(SdpError::BadOption(key.to_string())),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let mut o = SolverOptions::default();
        o.apply_config("# solver\n tol = 1e-7\nmax_iter=50\n\nearly_exit = false # full\n").unwrap();
        assert_eq!(o.tol, 1e-7);
        assert_eq!(o.max_iter, 50);
        assert!(!o.early_exit);
        assert!(o.apply_config("nope=1").is_err());
        assert!(o.apply_config("tol").is_err());
        assert!(o.apply_config("tol=abc").is_err());
    }

    #[test]
    fn validation_catches_bad_entries() {
        let mut p = SdpProblem::new(vec![2], 1);
        p.add_row(vec![BlockEntry::new(0, 1, 0, 1.0)], vec![], 1.0);
        assert!(p.validate().is_ok());
        assert_eq!(p.rows[0].entries[0], BlockEntry { block: 0, i: 0, j: 1, value: 1.0 });
        p.add_row(vec![BlockEntry::new(0, 2, 0, 1.0)], vec![], 1.0);
        assert!(p.validate().is_err());
        let mut q = SdpProblem::new(vec![1], 0);
        q.add_row(vec![], vec![(0, 1.0)], 0.0);
        assert!(q.validate().is_err());
    }

    #[test]
    fn zero_objective_is_feasibility() {
        assert_eq!(Objective::minimize(vec![BlockEntry::new(0, 0, 0, 0.0)], vec![(0, 0.0)]), Objective::Feasibility);
    }
}
