use nalgebra::DMatrix;

use super::{PolyError, Polynomial};

/// Dense matrix of polynomials sharing one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    arity: usize,
    entries: Vec<Polynomial>,
    symmetric: bool,
}

impl PolyMatrix {
    pub fn zeros(arity: usize, rows: usize, cols: usize) -> Self {
        PolyMatrix { rows, cols, arity, entries: vec![Polynomial::zero(arity); rows * cols], symmetric: rows == cols }
    }

    pub fn identity(arity: usize, n: usize) -> Self {
        let mut m = Self::zeros(arity, n, n);
        for i in 0..n {
            m.entries[i * n + i] = Polynomial::constant(arity, 1.0);
        }
        m
    }

    pub fn from_constant(arity: usize, a: &DMatrix<f64>) -> Self {
        let mut m = Self::zeros(arity, a.nrows(), a.ncols());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                m.entries[i * a.ncols() + j] = Polynomial::constant(arity, a[(i, j)]);
            }
        }
        m.refresh_symmetry();
        m
    }

    /// Row-major entries.
    pub fn from_rows(rows: usize, cols: usize, entries: Vec<Polynomial>) -> Result<Self, PolyError> {
        if entries.len() != rows * cols {
            return Err(PolyError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        let arity = entries.first().map(Polynomial::arity).unwrap_or(0);
        if let Some(bad) = entries.iter().find(|p| p.arity() != arity) {
            return Err(PolyError::ArityMismatch(arity, bad.arity()));
        }
        let mut m = PolyMatrix { rows, cols, arity, entries, symmetric: false };
        m.refresh_symmetry();
        Ok(m)
    }

    fn refresh_symmetry(&mut self) {
        self.symmetric = self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)));
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// True when entry (i,j) equals entry (j,i) coefficient-wise.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Polynomial) {
        assert_eq!(p.arity(), self.arity);
        self.entries[i * self.cols + j] = p;
        self.refresh_symmetry();
    }

    pub fn entries(&self) -> &[Polynomial] {
        &self.entries
    }

    pub fn degree(&self) -> u32 {
        self.entries.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Polynomial::is_zero)
    }

    pub fn is_constant(&self) -> bool {
        self.entries.iter().all(Polynomial::is_constant)
    }

    pub fn variables(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.entries.iter().flat_map(|p| p.variables()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn map(&self, f: impl Fn(&Polynomial) -> Polynomial) -> PolyMatrix {
        let mut m = PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            arity: self.arity,
            entries: self.entries.iter().map(f).collect(),
            symmetric: false,
        };
        m.refresh_symmetry();
        m
    }

    fn check_same(&self, other: &PolyMatrix, op: &str) -> Result<(), PolyError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(PolyError::DimensionMismatch(format!(
                "{op}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if self.arity != other.arity {
            return Err(PolyError::ArityMismatch(self.arity, other.arity));
        }
        Ok(())
    }

    pub fn add(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        self.check_same(other, "add")?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        PolyMatrix::from_rows(self.rows, self.cols, entries).map(|m| m.with_arity(self.arity))
    }

    pub fn sub(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        self.check_same(other, "sub")?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        PolyMatrix::from_rows(self.rows, self.cols, entries).map(|m| m.with_arity(self.arity))
    }

    pub fn mul(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        if self.cols != other.rows {
            return Err(PolyError::DimensionMismatch(format!(
                "mul: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if self.arity != other.arity {
            return Err(PolyError::ArityMismatch(self.arity, other.arity));
        }
        let mut entries = Vec::with_capacity(self.rows * other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Polynomial::zero(self.arity);
                for k in 0..self.cols {
                    let a = self.get(i, k);
                    let b = other.get(k, j);
                    if !a.is_zero() && !b.is_zero() {
                        acc = &acc + &(a * b);
                    }
                }
                entries.push(acc);
            }
        }
        PolyMatrix::from_rows(self.rows, other.cols, entries).map(|m| m.with_arity(self.arity))
    }

    pub fn scale(&self, s: f64) -> PolyMatrix {
        self.map(|p| p.scale(s))
    }

    pub fn mul_poly(&self, p: &Polynomial) -> PolyMatrix {
        self.map(|e| e * p)
    }

    pub fn transpose(&self) -> PolyMatrix {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j).clone());
            }
        }
        let mut m = PolyMatrix { rows: self.cols, cols: self.rows, arity: self.arity, entries, symmetric: false };
        m.refresh_symmetry();
        m
    }

    /// `M + Mᵀ`.
    pub fn he(&self) -> Result<PolyMatrix, PolyError> {
        if !self.is_square() {
            return Err(PolyError::DimensionMismatch(format!("he of {}x{}", self.rows, self.cols)));
        }
        let n = self.rows;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                // Build (i,j) and (j,i) from the same operands so the result is exactly symmetric.
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                entries.push(self.get(a, b) + self.get(b, a));
            }
        }
        PolyMatrix::from_rows(n, n, entries).map(|m| m.with_arity(self.arity))
    }

    pub fn substitute(&self, index: usize, q: &Polynomial) -> PolyMatrix {
        self.map(|p| p.substitute(index, q))
    }

    pub fn fix(&self, index: usize, value: f64) -> PolyMatrix {
        self.map(|p| p.fix(index, value))
    }

    pub fn rename(&self, from: usize, to: usize) -> PolyMatrix {
        self.map(|p| p.rename(from, to))
    }

    pub fn diff(&self, index: usize) -> PolyMatrix {
        self.map(|p| p.diff(index))
    }

    pub fn eval(&self, point: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(point))
    }

    /// Block matrix `[[a, b], [c, d]]`.
    pub fn block2(a: &PolyMatrix, b: &PolyMatrix, c: &PolyMatrix, d: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        if a.rows != b.rows || c.rows != d.rows || a.cols != c.cols || b.cols != d.cols {
            return Err(PolyError::DimensionMismatch("block2".into()));
        }
        let rows = a.rows + c.rows;
        let cols = a.cols + b.cols;
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let e = match (i < a.rows, j < a.cols) {
                    (true, true) => a.get(i, j),
                    (true, false) => b.get(i, j - a.cols),
                    (false, true) => c.get(i - a.rows, j),
                    (false, false) => d.get(i - a.rows, j - a.cols),
                };
                entries.push(e.clone());
            }
        }
        PolyMatrix::from_rows(rows, cols, entries).map(|m| m.with_arity(a.arity))
    }

    fn with_arity(mut self, arity: usize) -> Self {
        // from_rows infers arity from the first entry; empty matrices keep the caller's.
        self.arity = arity;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_poly, VarEnv};

    fn pm(env: &VarEnv, rows: usize, cols: usize, e: &[&str]) -> PolyMatrix {
        PolyMatrix::from_rows(rows, cols, e.iter().map(|s| parse_poly(s, env).unwrap()).collect()).unwrap()
    }

    #[test]
    fn he_definition() {
        let env = VarEnv::lpv(1);
        let m = pm(&env, 2, 2, &["0", "t", "0", "0"]);
        let h = m.he().unwrap();
        assert_eq!(h, pm(&env, 2, 2, &["0", "t", "t", "0"]));
        assert!(h.is_symmetric());
        assert!(pm(&env, 2, 1, &["t", "1"]).he().is_err());
    }

    #[test]
    fn rename_reproduces_copy() {
        let env = VarEnv::lpv(1);
        let s = pm(&env, 2, 2, &["1 + t*p1", "p1", "p1", "2 - t"]);
        let at_end = s.fix(0, 0.5).rename(1, 2);
        assert_eq!(at_end, pm(&env, 2, 2, &["1 + 0.5*q1", "q1", "q1", "1.5"]));
    }

    #[test]
    fn scalar_congruence() {
        let env = VarEnv::lpv(1);
        let j = pm(&env, 1, 1, &["2"]);
        let s0 = pm(&env, 1, 1, &["1.5 + p1"]);
        let out = j.transpose().mul(&s0).unwrap().mul(&j).unwrap();
        assert_eq!(out, pm(&env, 1, 1, &["6 + 4*p1"]));
    }

    #[test]
    fn dimension_errors() {
        let env = VarEnv::lpv(1);
        let a = pm(&env, 2, 2, &["1", "0", "0", "1"]);
        let b = pm(&env, 1, 2, &["1", "0"]);
        assert!(a.add(&b).is_err());
        assert!(a.mul(&b).is_err());
        assert!(b.mul(&a).is_ok());
    }
}
