//! Problem files: JSON description of an LPV system with jumps.

use std::fmt;

use lpvsos::lpv::LpvSystem;
use lpvsos::poly::{parse_poly, PolyMatrix, Polynomial, VarEnv};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Validation failure located by a JSON pointer into the offending document.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{pointer}: {message}")]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

impl SchemaError {
    pub fn new(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        let pointer = pointer.into();
        SchemaError { pointer: if pointer.is_empty() { "/".into() } else { pointer }, message: message.into() }
    }
}

/// Deserializes `text`, reporting type errors with the JSON pointer of the failing value.
pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let mut pointer = String::new();
        for seg in e.path().iter() {
            use serde_path_to_error::Segment;
            match seg {
                Segment::Seq { index } => pointer.push_str(&format!("/{index}")),
                Segment::Map { key } => pointer.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
                Segment::Enum { .. } | Segment::Unknown => {}
            }
        }
        SchemaError::new(pointer, e.into_inner().to_string())
    })
}

/// A matrix entry: a number or a polynomial in the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Text(String),
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Number(x) => write!(f, "{x}"),
            Entry::Text(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Entry {
    fn from(s: &str) -> Self {
        Entry::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

/// Rate bound of one parameter: `ν` for `[−ν, ν]`, or an explicit `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateBound {
    Symmetric(f64),
    Interval([f64; 2]),
}

impl RateBound {
    fn interval(self) -> (f64, f64) {
        match self {
            RateBound::Symmetric(nu) => (-nu, nu),
            RateBound::Interval([lo, hi]) => (lo, hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivativeSpec {
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub rate_box: Option<Vec<RateBound>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<Vec<Entry>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub name: String,
    pub n: usize,
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub params: Vec<ParamSpec>,
    /// Generators `g(θ) ≥ 0`; when absent the parameter box is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<String>>,
    /// Equalities `h(θ) = 0`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative: Option<DerivativeSpec>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Entry>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<Entry>>>,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j: Option<Vec<Vec<Entry>>>,
    #[serde(default)]
    pub defaults: Defaults,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<ProblemFile, SchemaError> {
        let p: ProblemFile = from_json(text)?;
        p.to_system()?;
        Ok(p)
    }

    pub fn env(&self) -> VarEnv {
        let names: Vec<&str> = self.params.iter().map(|p| p.name.as_str()).collect();
        VarEnv::lpv_named(&names)
    }

    fn poly(&self, env: &VarEnv, text: &str, pointer: &str) -> Result<Polynomial, SchemaError> {
        let p = parse_poly(text, env).map_err(|e| SchemaError::new(pointer, format!("`{text}`: {e}")))?;
        if let Some(v) = p.variables().into_iter().find(|&v| v == 0 || v > self.params.len()) {
            return Err(SchemaError::new(
                pointer,
                format!("`{text}` uses `{}`; only parameters may appear", env.name(v)),
            ));
        }
        Ok(p)
    }

    fn matrix(
        &self,
        env: &VarEnv,
        rows: &[Vec<Entry>],
        shape: (usize, usize),
        pointer: &str,
    ) -> Result<PolyMatrix, SchemaError> {
        if rows.len() != shape.0 {
            return Err(SchemaError::new(pointer, format!("expected {} rows, found {}", shape.0, rows.len())));
        }
        let mut entries = Vec::with_capacity(shape.0 * shape.1);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != shape.1 {
                return Err(SchemaError::new(
                    format!("{pointer}/{i}"),
                    format!("expected {} columns, found {}", shape.1, row.len()),
                ));
            }
            for (k, e) in row.iter().enumerate() {
                let ptr = format!("{pointer}/{i}/{k}");
                entries.push(match e {
                    Entry::Number(x) if x.is_finite() => Polynomial::constant(env.arity(), *x),
                    Entry::Number(x) => return Err(SchemaError::new(ptr, format!("{x} is not finite"))),
                    Entry::Text(s) => self.poly(env, s, &ptr)?,
                });
            }
        }
        PolyMatrix::from_rows(shape.0, shape.1, entries).map_err(|e| SchemaError::new(pointer, e.to_string()))
    }

    /// Validates the document and builds the system it describes.
    pub fn to_system(&self) -> Result<LpvSystem, SchemaError> {
        if self.n == 0 {
            return Err(SchemaError::new("/n", "state dimension must be at least 1"));
        }
        for (i, p) in self.params.iter().enumerate() {
            if !is_identifier(&p.name) || p.name == "t" || p.name.ends_with("_post") {
                return Err(SchemaError::new(
                    format!("/params/{i}/name"),
                    format!("`{}` is not a usable parameter name", p.name),
                ));
            }
            if self.params[..i].iter().any(|q| q.name == p.name) {
                return Err(SchemaError::new(format!("/params/{i}/name"), format!("duplicate parameter `{}`", p.name)));
            }
            if !(p.min.is_finite() && p.max.is_finite() && p.min <= p.max) {
                return Err(SchemaError::new(format!("/params/{i}"), "need finite min <= max"));
            }
        }
        if let Some(d) = self.defaults.degree {
            if !(1..=12).contains(&d) {
                return Err(SchemaError::new("/defaults/degree", "degree must be between 1 and 12"));
            }
        }
        if let Some(e) = self.defaults.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(SchemaError::new("/defaults/epsilon", "epsilon must be finite and nonnegative"));
            }
        }
        let env = self.env();
        let n = self.n;
        let a = self.matrix(&env, &self.a, (n, n), "/A")?;
        let bounds = self.params.iter().map(|p| (p.min, p.max)).collect();
        let invalid = |ptr: &str, e: lpvsos::lpv::LpvError| SchemaError::new(ptr, e.to_string());
        let mut sys = LpvSystem::new(self.name.clone(), a, bounds)
            .and_then(|s| s.with_env(env.clone()))
            .map_err(|e| invalid("", e))?;
        match (&self.b, self.m) {
            (None, 0) => {}
            (None, m) => return Err(SchemaError::new("/B", format!("m = {m} but no input matrix given"))),
            (Some(_), 0) => return Err(SchemaError::new("/m", "an input matrix is given, so m must be positive")),
            (Some(b), m) => {
                let b = self.matrix(&env, b, (n, m), "/B")?;
                sys = sys.with_input(b).map_err(|e| invalid("/B", e))?;
            }
        }
        if let Some(j) = &self.j {
            let j = self.matrix(&env, j, (n, n), "/J")?;
            sys = sys.with_jump(j).map_err(|e| invalid("/J", e))?;
        }
        if let Some(g) = &self.g {
            let g = g
                .iter()
                .enumerate()
                .map(|(i, s)| self.poly(&env, s, &format!("/g/{i}")))
                .collect::<Result<Vec<_>, _>>()?;
            sys = sys.with_generators(g).map_err(|e| invalid("/g", e))?;
        }
        if !self.h.is_empty() {
            let mut h = sys.equalities.clone();
            for (i, s) in self.h.iter().enumerate() {
                h.push(self.poly(&env, s, &format!("/h/{i}"))?);
            }
            sys = sys.with_equalities(h).map_err(|e| invalid("/h", e))?;
        }
        if let Some(d) = &self.derivative {
            let np = self.params.len();
            sys = match (&d.rate_box, &d.vertices) {
                (Some(_), Some(_)) => {
                    return Err(SchemaError::new("/derivative", "`box` and `vertices` are mutually exclusive"))
                }
                (None, None) => return Err(SchemaError::new("/derivative", "expected `box` or `vertices`")),
                (Some(b), None) => {
                    if b.len() != np {
                        return Err(SchemaError::new("/derivative/box", format!("expected {np} rate bounds, found {}", b.len())));
                    }
                    let nu: Vec<(f64, f64)> = b.iter().map(|r| r.interval()).collect();
                    if let Some(k) = nu.iter().position(|(lo, hi)| !(lo <= hi && lo.is_finite() && hi.is_finite())) {
                        return Err(SchemaError::new(format!("/derivative/box/{k}"), "need a finite interval lo <= hi"));
                    }
                    sys.with_derivative_box(&nu).map_err(|e| invalid("/derivative/box", e))?
                }
                (None, Some(vs)) => {
                    if vs.is_empty() {
                        return Err(SchemaError::new("/derivative/vertices", "at least one vertex is required"));
                    }
                    let mut verts = Vec::with_capacity(vs.len());
                    for (k, v) in vs.iter().enumerate() {
                        let ptr = format!("/derivative/vertices/{k}");
                        if v.len() != np {
                            return Err(SchemaError::new(ptr, format!("expected {np} components, found {}", v.len())));
                        }
                        let comps = v
                            .iter()
                            .enumerate()
                            .map(|(i, e)| match e {
                                Entry::Number(x) => Ok(Polynomial::constant(env.arity(), *x)),
                                Entry::Text(s) => self.poly(&env, s, &format!("{ptr}/{i}")),
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        verts.push(comps);
                    }
                    sys.with_derivative_vertices(verts).map_err(|e| invalid("/derivative/vertices", e))?
                }
            };
        }
        sys.validate().map_err(|e| invalid("", e))?;
        Ok(sys)
    }
}
