//! Sparse multivariate polynomials over a fixed variable environment.
//!
//! Every polynomial carries the arity of the [`VarEnv`] it was built in.
//! Monomials are stored in a global graded-lexicographic order so that every
//! downstream enumeration (Gram bases, SDP rows) is deterministic.

mod matrix;
mod parse;

pub use matrix::PolyMatrix;
pub use parse::parse_poly;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("exponent at position {pos} is not a nonnegative integer")]
    BadExponent { pos: usize },
    #[error("no value assigned to variable `{0}`")]
    MissingVariable(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
}

/// Role of a variable inside an LPV certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    /// Timer elapsed since the last jump (`t`).
    Clock,
    /// Scheduling parameter `p{i}`.
    Param(usize),
    /// Post-jump copy of a parameter `q{i}`.
    Copy(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId {
    pub index: usize,
    pub kind: VarKind,
}

/// Ordered set of named variables shared by all polynomials of a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct VarEnv {
    vars: Vec<(String, VarId)>,
}

impl VarEnv {
    /// Environment `t, p1..pN, q1..qN`.
    pub fn lpv(n_params: usize) -> Self {
        let mut vars = Vec::with_capacity(1 + 2 * n_params);
        vars.push(("t".to_string(), VarId { index: 0, kind: VarKind::Clock }));
        for i in 0..n_params {
            let id = VarId { index: 1 + i, kind: VarKind::Param(i) };
            vars.push((format!("p{}", i + 1), id));
        }
        for i in 0..n_params {
            let id = VarId { index: 1 + n_params + i, kind: VarKind::Copy(i) };
            vars.push((format!("q{}", i + 1), id));
        }
        VarEnv { vars }
    }

    /// Environment `t, names.., names_post..` with the given parameter names.
    pub fn lpv_named(names: &[&str]) -> Self {
        let n = names.len();
        let mut vars = Vec::with_capacity(1 + 2 * n);
        vars.push(("t".to_string(), VarId { index: 0, kind: VarKind::Clock }));
        for (i, name) in names.iter().enumerate() {
            vars.push((name.to_string(), VarId { index: 1 + i, kind: VarKind::Param(i) }));
        }
        for (i, name) in names.iter().enumerate() {
            vars.push((format!("{name}_post"), VarId { index: 1 + n + i, kind: VarKind::Copy(i) }));
        }
        VarEnv { vars }
    }

    /// Environment with arbitrary names; every variable is tagged as a parameter.
    pub fn with_names(names: &[&str]) -> Self {
        let vars = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.to_string(), VarId { index: i, kind: VarKind::Param(i) }))
            .collect();
        VarEnv { vars }
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn n_params(&self) -> usize {
        self.vars.iter().filter(|(_, v)| matches!(v.kind, VarKind::Param(_))).count()
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.vars[index].0
    }

    pub fn var(&self, index: usize) -> VarId {
        self.vars[index].1
    }

    pub fn clock(&self) -> VarId {
        self.vars[0].1
    }

    pub fn param(&self, i: usize) -> VarId {
        self.find_kind(VarKind::Param(i))
    }

    pub fn copy(&self, i: usize) -> VarId {
        self.find_kind(VarKind::Copy(i))
    }

    fn find_kind(&self, kind: VarKind) -> VarId {
        self.vars
            .iter()
            .find(|(_, v)| v.kind == kind)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("variable of kind {kind:?} not in environment"))
    }

    pub fn params(&self) -> Vec<VarId> {
        self.vars.iter().filter(|(_, v)| matches!(v.kind, VarKind::Param(_))).map(|(_, v)| *v).collect()
    }

    pub fn copies(&self) -> Vec<VarId> {
        self.vars.iter().filter(|(_, v)| matches!(v.kind, VarKind::Copy(_))).map(|(_, v)| *v).collect()
    }
}

/// Exponent vector. Ordered by total degree, then by descending lexicographic
/// exponent comparison, so `1 < t < p1 < t^2 < t*p1 < p1^2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Monomial(exps)
    }

    pub fn one(arity: usize) -> Self {
        Monomial(vec![0; arity])
    }

    pub fn var(arity: usize, index: usize) -> Self {
        let mut e = vec![0; arity];
        e[index] = 1;
        Monomial(e)
    }

    pub fn exps(&self) -> &[u32] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn degree_in(&self, index: usize) -> u32 {
        self.0[index]
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        let mut v = 1.0;
        for (e, x) in self.0.iter().zip(point) {
            if *e > 0 {
                v *= x.powi(*e as i32);
            }
        }
        v
    }

    /// Variables with nonzero exponent.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, e)| **e > 0).map(|(i, _)| i)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All monomials of total degree `<= degree` in `vars`, graded-lex ordered.
pub fn monomial_basis(arity: usize, vars: &[usize], degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut exps = vec![0u32; arity];
    fn rec(vars: &[usize], left: u32, exps: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        match vars.split_first() {
            None => out.push(Monomial(exps.clone())),
            Some((&v, rest)) => {
                for e in 0..=left {
                    exps[v] = e;
                    rec(rest, left - e, exps, out);
                }
                exps[v] = 0;
            }
        }
    }
    rec(vars, degree, &mut exps, &mut out);
    out.sort();
    out
}

/// Binomial coefficient, used for basis-size bookkeeping.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: usize = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    arity: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(arity: usize) -> Self {
        Polynomial { arity, terms: BTreeMap::new() }
    }

    pub fn constant(arity: usize, c: f64) -> Self {
        let mut p = Self::zero(arity);
        p.add_term(Monomial::one(arity), c);
        p
    }

    pub fn var(arity: usize, index: usize) -> Self {
        let mut p = Self::zero(arity);
        p.add_term(Monomial::var(arity, index), 1.0);
        p
    }

    pub fn from_terms(arity: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut p = Self::zero(arity);
        for (m, c) in terms {
            assert_eq!(m.arity(), arity, "monomial arity");
            p.add_term(m, c);
        }
        p
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn degree_in(&self, index: usize) -> u32 {
        self.terms.keys().map(|m| m.degree_in(index)).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&Monomial::one(self.arity))
    }

    /// Variables that appear with a nonzero exponent.
    pub fn variables(&self) -> Vec<usize> {
        let mut used = vec![false; self.arity];
        for m in self.terms.keys() {
            for v in m.support() {
                used[v] = true;
            }
        }
        (0..self.arity).filter(|&i| used[i]).collect()
    }

    /// Adds `c * m`, dropping the term when it cancels to exactly zero.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        if s == 0.0 {
            return Polynomial::zero(self.arity);
        }
        Polynomial::from_terms(self.arity, self.terms.iter().map(|(m, c)| (m.clone(), c * s)))
    }

    /// Evaluates at a full point (one coordinate per environment variable).
    pub fn eval(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.arity);
        self.terms.iter().map(|(m, c)| c * m.eval(point)).sum()
    }

    /// Evaluates from a partial assignment; every variable that appears must be assigned.
    pub fn eval_assignment(&self, env: &VarEnv, assignment: &[(VarId, f64)]) -> Result<f64, PolyError> {
        let mut point = vec![f64::NAN; self.arity];
        for (v, x) in assignment {
            point[v.index] = *x;
        }
        for v in self.variables() {
            if point[v].is_nan() {
                return Err(PolyError::MissingVariable(env.name(v).to_string()));
            }
        }
        for x in point.iter_mut() {
            if x.is_nan() {
                *x = 0.0;
            }
        }
        Ok(self.eval(&point))
    }

    /// Formal partial derivative with respect to variable `index`.
    pub fn diff(&self, index: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.arity);
        for (m, c) in &self.terms {
            let e = m.0[index];
            if e == 0 {
                continue;
            }
            let mut exps = m.0.clone();
            exps[index] -= 1;
            out.add_term(Monomial(exps), c * e as f64);
        }
        out
    }

    /// Replaces variable `index` by the polynomial `q`.
    pub fn substitute(&self, index: usize, q: &Polynomial) -> Polynomial {
        assert_eq!(q.arity, self.arity);
        let max_e = self.degree_in(index) as usize;
        let mut powers = vec![Polynomial::constant(self.arity, 1.0)];
        for k in 1..=max_e {
            let next = &powers[k - 1] * q;
            powers.push(next);
        }
        let mut out = Polynomial::zero(self.arity);
        for (m, c) in &self.terms {
            let e = m.0[index] as usize;
            let mut exps = m.0.clone();
            exps[index] = 0;
            let rest = Monomial(exps);
            for (pm, pc) in &powers[e].terms {
                out.add_term(rest.mul(pm), c * pc);
            }
        }
        out
    }

    /// Fixes variable `index` to a numeric value.
    pub fn fix(&self, index: usize, value: f64) -> Polynomial {
        self.substitute(index, &Polynomial::constant(self.arity, value))
    }

    /// Renames variable `from` to `to` (the target must not already appear).
    pub fn rename(&self, from: usize, to: usize) -> Polynomial {
        self.substitute(from, &Polynomial::var(self.arity, to))
    }

    /// Human-readable form accepted back by [`parse_poly`] coefficient-exactly.
    pub fn render(&self, env: &VarEnv) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut s = String::new();
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let (neg, mag) = (*c < 0.0, c.abs());
            if k == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            let mut factors = Vec::new();
            if mag != 1.0 || m.is_one() {
                factors.push(render_coeff(mag));
            }
            for v in m.support() {
                let e = m.0[v];
                if e == 1 {
                    factors.push(env.name(v).to_string());
                } else {
                    factors.push(format!("{}^{}", env.name(v), e));
                }
            }
            s.push_str(&factors.join("*"));
        }
        s
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }
}

fn render_coeff(c: f64) -> String {
    if c == 0.0 || (1e-5..1e16).contains(&c) {
        format!("{c}")
    } else {
        format!("{c:e}")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (0..self.arity).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        write!(f, "{}", self.render(&VarEnv::with_names(&refs)))
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.arity, rhs.arity, "polynomial arity");
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), *c);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.arity, rhs.arity, "polynomial arity");
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -*c);
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.arity, rhs.arity, "polynomial arity");
        let mut out = Polynomial::zero(self.arity);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

#[cfg(test)]
mod tests {
    use super::*;

    fn env2() -> VarEnv {
        VarEnv::lpv(1)
    }

    #[test]
    fn graded_lex_basis_order() {
        let b = monomial_basis(3, &[0, 1], 1);
        assert_eq!(b, vec![Monomial::one(3), Monomial::var(3, 0), Monomial::var(3, 1)]);
        assert_eq!(monomial_basis(3, &[0, 1], 2).len(), 6);
        assert_eq!(monomial_basis(5, &[1, 2], 0), vec![Monomial::one(5)]);
        for (nv, d) in [(1, 5), (3, 3), (4, 4)] {
            let vars: Vec<usize> = (0..nv).collect();
            assert_eq!(monomial_basis(nv, &vars, d).len(), binomial(nv + d as usize, d as usize));
        }
    }

    #[test]
    fn eval_simple_and_zero_point() {
        let env = env2();
        let p = parse_poly("t*p1 + 1", &env).unwrap();
        assert_eq!(p.eval(&[2.0, 3.0, 0.0]), 7.0);
        let q = parse_poly("3*t^2 - 4.5*p1*q1 + 2.25", &env).unwrap();
        assert_eq!(q.eval(&[0.0; 3]), q.constant_term());
    }

    #[test]
    fn missing_assignment_is_reported() {
        let env = env2();
        let p = parse_poly("t*p1", &env).unwrap();
        let err = p.eval_assignment(&env, &[(env.clock(), 1.0)]).unwrap_err();
        assert_eq!(err, PolyError::MissingVariable("p1".into()));
        assert_eq!(p.eval_assignment(&env, &[(env.clock(), 2.0), (env.param(0), 3.0)]).unwrap(), 6.0);
    }

    #[test]
    fn derivatives() {
        let env = env2();
        let p = parse_poly("t^2*p1", &env).unwrap();
        assert_eq!(p.diff(0), parse_poly("2*t*p1", &env).unwrap());
        assert!(parse_poly("7", &env).unwrap().diff(1).is_zero());
        let f = parse_poly("t*(0.5 - t)", &env).unwrap();
        assert_eq!(f.diff(0), parse_poly("0.5 - 2*t", &env).unwrap());
    }

    #[test]
    fn substitute_renames_and_fixes() {
        let env = env2();
        let s = parse_poly("1 + t*p1 + p1^2", &env).unwrap();
        let at_t = s.fix(0, 0.5);
        assert_eq!(at_t, parse_poly("1 + 0.5*p1 + p1^2", &env).unwrap());
        assert_eq!(at_t.rename(1, 2), parse_poly("1 + 0.5*q1 + q1^2", &env).unwrap());
        let sq = s.substitute(1, &parse_poly("t + 1", &env).unwrap());
        for x in [-1.0, 0.3, 2.0] {
            assert!((sq.eval(&[x, 0.0, 0.0]) - s.eval(&[x, x + 1.0, 0.0])).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_cancellation_prunes() {
        let env = env2();
        let p = parse_poly("t + p1", &env).unwrap();
        let d = &p - &p;
        assert!(d.is_zero());
        assert_eq!(d.n_terms(), 0);
    }

    #[test]
    fn render_round_trip() {
        let env = env2();
        for text in ["0", "-2 - p1", "t*(0.5 - t)", "0.1*t^3*q1 - 1e-20 + 3.75e22*p1", "-t"] {
            let p = parse_poly(text, &env).unwrap();
            let back = parse_poly(&p.render(&env), &env).unwrap();
            assert_eq!(p, back, "{text} -> {}", p.render(&env));
        }
    }
}
