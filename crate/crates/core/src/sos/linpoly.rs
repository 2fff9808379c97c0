use std::collections::BTreeMap;

use crate::poly::{Monomial, PolyMatrix, Polynomial};

use super::SosError;

/// A scalar decision unknown of an SOS program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Unknown {
    /// Sign-unconstrained coefficient.
    Free(usize),
    /// Entry `(p, q)`, `p <= q`, of a Gram block.
    Gram(usize, usize, usize),
}

/// Affine form `constant + sum coeff * unknown`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinForm {
    pub constant: f64,
    pub coeffs: BTreeMap<Unknown, f64>,
}

impl LinForm {
    pub fn constant(c: f64) -> Self {
        LinForm { constant: c, coeffs: BTreeMap::new() }
    }

    pub fn unknown(u: Unknown, c: f64) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(u, c);
        LinForm { constant: 0.0, coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.coeffs.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add_scaled(&mut self, other: &LinForm, s: f64) {
        self.constant += s * other.constant;
        for (u, c) in &other.coeffs {
            let e = self.coeffs.entry(*u).or_insert(0.0);
            *e += s * c;
            if *e == 0.0 {
                self.coeffs.remove(u);
            }
        }
    }

    pub fn scale(&self, s: f64) -> LinForm {
        let mut out = LinForm::default();
        out.add_scaled(self, s);
        out
    }

    pub fn eval(&self, value: impl Fn(Unknown) -> f64) -> f64 {
        self.constant + self.coeffs.iter().map(|(u, c)| c * value(*u)).sum::<f64>()
    }
}

/// Polynomial whose coefficients are affine in the unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct LinPoly {
    arity: usize,
    terms: BTreeMap<Monomial, LinForm>,
}

impl LinPoly {
    pub fn zero(arity: usize) -> Self {
        LinPoly { arity, terms: BTreeMap::new() }
    }

    pub fn from_poly(p: &Polynomial) -> Self {
        let mut out = LinPoly::zero(p.arity());
        for (m, c) in p.terms() {
            out.terms.insert(m.clone(), LinForm::constant(c));
        }
        out
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &LinForm)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_unknowns(&self) -> bool {
        self.terms.values().any(|f| !f.is_constant())
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn variables(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.terms.keys().flat_map(|m| m.support().collect::<Vec<_>>()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn add_term(&mut self, m: Monomial, f: &LinForm, s: f64) {
        if f.is_zero() || s == 0.0 {
            return;
        }
        let e = self.terms.entry(m.clone()).or_default();
        e.add_scaled(f, s);
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add_scaled(&mut self, other: &LinPoly, s: f64) {
        for (m, f) in &other.terms {
            self.add_term(m.clone(), f, s);
        }
    }

    pub fn scale(&self, s: f64) -> LinPoly {
        let mut out = LinPoly::zero(self.arity);
        out.add_scaled(self, s);
        out
    }

    pub fn mul_poly(&self, p: &Polynomial) -> LinPoly {
        let mut out = LinPoly::zero(self.arity);
        for (m, f) in &self.terms {
            for (pm, c) in p.terms() {
                out.add_term(m.mul(pm), f, c);
            }
        }
        out
    }

    /// Product of two affine polynomials; at most one side may contain unknowns.
    pub fn mul(&self, other: &LinPoly) -> Result<LinPoly, SosError> {
        let (known, unknown) = if !self.has_unknowns() {
            (self, other)
        } else if !other.has_unknowns() {
            (other, self)
        } else {
            return Err(SosError::Nonlinear);
        };
        let mut out = LinPoly::zero(self.arity);
        for (m, f) in &unknown.terms {
            for (km, kf) in &known.terms {
                out.add_term(m.mul(km), f, kf.constant);
            }
        }
        Ok(out)
    }

    fn map_monomials(&self, f: impl Fn(&Monomial) -> Option<(Monomial, f64)>) -> LinPoly {
        let mut out = LinPoly::zero(self.arity);
        for (m, lf) in &self.terms {
            if let Some((nm, s)) = f(m) {
                out.add_term(nm, lf, s);
            }
        }
        out
    }

    pub fn diff(&self, index: usize) -> LinPoly {
        self.map_monomials(|m| {
            let e = m.exps()[index];
            (e > 0).then(|| {
                let mut ex = m.exps().to_vec();
                ex[index] -= 1;
                (Monomial::new(ex), e as f64)
            })
        })
    }

    pub fn fix(&self, index: usize, value: f64) -> LinPoly {
        self.map_monomials(|m| {
            let e = m.exps()[index];
            let mut ex = m.exps().to_vec();
            ex[index] = 0;
            Some((Monomial::new(ex), value.powi(e as i32)))
        })
    }

    pub fn rename(&self, from: usize, to: usize) -> LinPoly {
        self.map_monomials(|m| {
            let mut ex = m.exps().to_vec();
            let e = ex[from];
            ex[from] = 0;
            ex[to] += e;
            Some((Monomial::new(ex), 1.0))
        })
    }

    /// Replaces variable `index` by the polynomial `q`.
    pub fn substitute(&self, index: usize, q: &Polynomial) -> LinPoly {
        let mut out = LinPoly::zero(self.arity);
        for (m, f) in &self.terms {
            let e = m.exps()[index];
            let mut ex = m.exps().to_vec();
            ex[index] = 0;
            let mut factor = Polynomial::from_terms(self.arity, [(Monomial::new(ex), 1.0)]);
            for _ in 0..e {
                factor = &factor * q;
            }
            for (fm, c) in factor.terms() {
                out.add_term(fm.clone(), f, c);
            }
        }
        out
    }

    /// Numeric polynomial after substituting unknown values.
    pub fn eval_unknowns(&self, value: &impl Fn(Unknown) -> f64) -> Polynomial {
        let mut p = Polynomial::zero(self.arity);
        for (m, f) in &self.terms {
            p.add_term(m.clone(), f.eval(value));
        }
        p
    }

    pub fn add(&self, other: &LinPoly) -> LinPoly {
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        out
    }

    pub fn sub(&self, other: &LinPoly) -> LinPoly {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }
}

/// Dense matrix of [`LinPoly`] entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LinPolyMatrix {
    rows: usize,
    cols: usize,
    arity: usize,
    entries: Vec<LinPoly>,
}

impl LinPolyMatrix {
    pub fn zeros(arity: usize, rows: usize, cols: usize) -> Self {
        LinPolyMatrix { rows, cols, arity, entries: vec![LinPoly::zero(arity); rows * cols] }
    }

    pub fn from_poly_matrix(m: &PolyMatrix) -> Self {
        LinPolyMatrix {
            rows: m.rows(),
            cols: m.cols(),
            arity: m.arity(),
            entries: m.entries().iter().map(LinPoly::from_poly).collect(),
        }
    }

    pub fn from_entries(arity: usize, rows: usize, cols: usize, entries: Vec<LinPoly>) -> Self {
        assert_eq!(entries.len(), rows * cols);
        LinPolyMatrix { rows, cols, arity, entries }
    }

    pub fn identity(arity: usize, n: usize) -> Self {
        let mut m = Self::zeros(arity, n, n);
        for i in 0..n {
            m.entries[i * n + i] = LinPoly::from_poly(&Polynomial::constant(arity, 1.0));
        }
        m
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

    pub fn get(&self, i: usize, j: usize) -> &LinPoly {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: LinPoly) {
        self.entries[i * self.cols + j] = p;
    }

    pub fn entries(&self) -> &[LinPoly] {
        &self.entries
    }

    pub fn degree(&self) -> u32 {
        self.entries.iter().map(LinPoly::degree).max().unwrap_or(0)
    }

    pub fn variables(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.entries.iter().flat_map(LinPoly::variables).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn has_unknowns(&self) -> bool {
        self.entries.iter().any(LinPoly::has_unknowns)
    }

    fn map(&self, f: impl Fn(&LinPoly) -> LinPoly) -> LinPolyMatrix {
        LinPolyMatrix { rows: self.rows, cols: self.cols, arity: self.arity, entries: self.entries.iter().map(f).collect() }
    }

    fn same_shape(&self, other: &LinPolyMatrix, op: &str) -> Result<(), SosError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(SosError::Dimension(format!(
                "{op}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &LinPolyMatrix) -> Result<LinPolyMatrix, SosError> {
        self.same_shape(other, "add")?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect();
        Ok(LinPolyMatrix { entries, ..self.clone() })
    }

    pub fn sub(&self, other: &LinPolyMatrix) -> Result<LinPolyMatrix, SosError> {
        self.same_shape(other, "sub")?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a.sub(b)).collect();
        Ok(LinPolyMatrix { entries, ..self.clone() })
    }

    pub fn scale(&self, s: f64) -> LinPolyMatrix {
        self.map(|p| p.scale(s))
    }

    pub fn mul_poly(&self, p: &Polynomial) -> LinPolyMatrix {
        self.map(|e| e.mul_poly(p))
    }

    pub fn mul(&self, other: &LinPolyMatrix) -> Result<LinPolyMatrix, SosError> {
        if self.cols != other.rows {
            return Err(SosError::Dimension(format!(
                "mul: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = LinPolyMatrix::zeros(self.arity, self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = LinPoly::zero(self.arity);
                for k in 0..self.cols {
                    let (a, b) = (self.get(i, k), other.get(k, j));
                    if !a.is_zero() && !b.is_zero() {
                        acc.add_scaled(&a.mul(b)?, 1.0);
                    }
                }
                out.entries[i * other.cols + j] = acc;
            }
        }
        Ok(out)
    }

    /// `P * self` for a known polynomial matrix `P`.
    pub fn left_mul(&self, p: &PolyMatrix) -> Result<LinPolyMatrix, SosError> {
        LinPolyMatrix::from_poly_matrix(p).mul(self)
    }

    /// `self * P` for a known polynomial matrix `P`.
    pub fn right_mul(&self, p: &PolyMatrix) -> Result<LinPolyMatrix, SosError> {
        self.mul(&LinPolyMatrix::from_poly_matrix(p))
    }

    pub fn transpose(&self) -> LinPolyMatrix {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j).clone());
            }
        }
        LinPolyMatrix { rows: self.cols, cols: self.rows, arity: self.arity, entries }
    }

    /// `M + M^T`.
    pub fn he(&self) -> Result<LinPolyMatrix, SosError> {
        if self.rows != self.cols {
            return Err(SosError::Dimension(format!("he of {}x{}", self.rows, self.cols)));
        }
        let n = self.rows;
        let mut out = LinPolyMatrix::zeros(self.arity, n, n);
        for i in 0..n {
            for j in i..n {
                let s = self.get(i, j).add(self.get(j, i));
                out.entries[i * n + j] = s.clone();
                out.entries[j * n + i] = s;
            }
        }
        Ok(out)
    }

    pub fn diff(&self, index: usize) -> LinPolyMatrix {
        self.map(|p| p.diff(index))
    }

    pub fn fix(&self, index: usize, value: f64) -> LinPolyMatrix {
        self.map(|p| p.fix(index, value))
    }

    pub fn rename(&self, from: usize, to: usize) -> LinPolyMatrix {
        self.map(|p| p.rename(from, to))
    }

    pub fn substitute(&self, index: usize, q: &Polynomial) -> LinPolyMatrix {
        self.map(|p| p.substitute(index, q))
    }

    /// Block matrix `[[a, b], [c, d]]`.
    pub fn block2(a: &LinPolyMatrix, b: &LinPolyMatrix, c: &LinPolyMatrix, d: &LinPolyMatrix) -> Result<LinPolyMatrix, SosError> {
        if a.rows != b.rows || c.rows != d.rows || a.cols != c.cols || b.cols != d.cols {
            return Err(SosError::Dimension("block2".into()));
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
        Ok(LinPolyMatrix { rows, cols, arity: a.arity, entries })
    }

    pub fn eval_unknowns(&self, value: &impl Fn(Unknown) -> f64) -> PolyMatrix {
        let entries = self.entries.iter().map(|e| e.eval_unknowns(value)).collect();
        if self.entries.is_empty() {
            return PolyMatrix::zeros(self.arity, self.rows, self.cols);
        }
        PolyMatrix::from_rows(self.rows, self.cols, entries).expect("shape preserved")
    }
}
