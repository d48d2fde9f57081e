//! Polynomial vector fields on ℝⁿ.
//!
//! Fields are written in a small text syntax: a sum of terms, each term an
//! optional coefficient and monomial followed by a coordinate derivation,
//! e.g. `dx`, `x*dy`, `dx + dy`, `-0.5*x^2*y*dz`. Coordinates are named
//! `x, y, z, w` (or `x1 … xn`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `coef · Π x_i^{exps_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub exps: Vec<u32>,
}

/// A polynomial in `n` variables as a list of monomials.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly {
    pub terms: Vec<Monomial>,
}

impl Poly {
    pub fn constant(n: usize, c: f64) -> Self {
        if c == 0.0 {
            return Self::default();
        }
        Self { terms: vec![Monomial { coef: c, exps: vec![0; n] }] }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|m| m.coef * m.exps.iter().zip(x).map(|(&e, &xi)| xi.powi(e as i32)).product::<f64>())
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|m| m.exps.iter().all(|&e| e == 0))
    }

    pub fn derivative(&self, var: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter(|m| m.exps[var] > 0)
            .map(|m| {
                let mut exps = m.exps.clone();
                exps[var] -= 1;
                Monomial { coef: m.coef * f64::from(m.exps[var]), exps }
            })
            .collect();
        Poly { terms }.simplified()
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let exps = a.exps.iter().zip(&b.exps).map(|(x, y)| x + y).collect();
                terms.push(Monomial { coef: a.coef * b.coef, exps });
            }
        }
        Poly { terms }.simplified()
    }

    pub fn add(&self, other: &Poly, scale: f64) -> Poly {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|m| Monomial { coef: m.coef * scale, exps: m.exps.clone() }));
        Poly { terms }.simplified()
    }

    pub fn scaled(&self, s: f64) -> Poly {
        Poly { terms: self.terms.iter().map(|m| Monomial { coef: m.coef * s, exps: m.exps.clone() }).collect() }
            .simplified()
    }

    /// Merges equal monomials and drops zero coefficients; ordering is canonical.
    fn simplified(mut self) -> Poly {
        self.terms.sort_by(|a, b| a.exps.cmp(&b.exps));
        let mut out: Vec<Monomial> = Vec::with_capacity(self.terms.len());
        for m in self.terms {
            match out.last_mut() {
                Some(last) if last.exps == m.exps => last.coef += m.coef,
                _ => out.push(m),
            }
        }
        out.retain(|m| m.coef != 0.0);
        Poly { terms: out }
    }
}

/// A polynomial vector field `Σ P_i ∂_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyField {
    pub comps: Vec<Poly>,
}

impl PolyField {
    pub fn constant(v: &[f64]) -> Self {
        Self { comps: v.iter().map(|&c| Poly::constant(v.len(), c)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.comps.iter().map(|p| p.eval(x)).collect()
    }

    pub fn is_constant(&self) -> bool {
        self.comps.iter().all(Poly::is_constant)
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Poly::is_zero)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { comps: self.comps.iter().map(|p| p.scaled(s)).collect() }
    }

    pub fn sum(&self, other: &PolyField) -> Self {
        Self { comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a.add(b, 1.0)).collect() }
    }

    /// Jacobian `∂P_i/∂x_j` evaluated at `x`.
    pub fn jacobian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        self.comps.iter().map(|p| (0..n).map(|j| p.derivative(j).eval(x)).collect()).collect()
    }

    /// Lie bracket `[X, Y] = DY·X − DX·Y`, the derivation `X(Yf) − Y(Xf)`.
    pub fn bracket(&self, other: &PolyField) -> Result<PolyField> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let n = self.dim();
        let comps = (0..n)
            .map(|i| {
                let mut acc = Poly::default();
                for j in 0..n {
                    acc = acc.add(&other.comps[i].derivative(j).mul(&self.comps[j]), 1.0);
                    acc = acc.add(&self.comps[i].derivative(j).mul(&other.comps[j]), -1.0);
                }
                acc
            })
            .collect();
        Ok(PolyField { comps })
    }

    /// Parses the text syntax described in the module docs.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        Parser::new(text, dim).field()
    }
}

fn var_name(i: usize, n: usize) -> String {
    if n <= 4 {
        ["x", "y", "z", "w"][i].to_string()
    } else {
        format!("x{}", i + 1)
    }
}

fn var_index(name: &str, n: usize) -> Option<usize> {
    let idx = match name {
        "x" => Some(0),
        "y" => Some(1),
        "z" => Some(2),
        "w" => Some(3),
        _ => name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()).and_then(|k| k.checked_sub(1)),
    }?;
    (idx < n).then_some(idx)
}

impl fmt::Display for PolyField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dim();
        let mut first = true;
        for (i, p) in self.comps.iter().enumerate() {
            for m in &p.terms {
                let sign = if m.coef < 0.0 { "-" } else if first { "" } else { "+" };
                if !first {
                    write!(f, " ")?;
                }
                write!(f, "{sign}")?;
                if !first {
                    write!(f, " ")?;
                }
                if m.coef.abs() != 1.0 {
                    write!(f, "{}*", m.coef.abs())?;
                }
                for (j, &e) in m.exps.iter().enumerate() {
                    match e {
                        0 => {}
                        1 => write!(f, "{}*", var_name(j, n))?,
                        _ => write!(f, "{}^{}*", var_name(j, n), e)?,
                    }
                }
                write!(f, "d{}", var_name(i, n))?;
                first = false;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<char>,
    pos: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, dim: usize) -> Self {
        Self { src, chars: src.chars().filter(|c| !c.is_whitespace()).collect(), pos: 0, dim }
    }

    fn err(&self, what: &str) -> Error {
        Error::InvalidInput(format!("cannot parse field '{}': {what}", self.src))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn field(mut self) -> Result<PolyField> {
        let mut comps = vec![Poly::default(); self.dim];
        if self.chars.is_empty() {
            return Err(self.err("empty expression"));
        }
        let mut sign = 1.0;
        if let Some(c @ ('+' | '-')) = self.peek() {
            sign = if c == '-' { -1.0 } else { 1.0 };
            self.pos += 1;
        }
        loop {
            let (coef, exps, target) = self.term()?;
            let m = Poly { terms: vec![Monomial { coef: sign * coef, exps }] };
            comps[target] = comps[target].add(&m, 1.0);
            match self.peek() {
                None => break,
                Some('+') => sign = 1.0,
                Some('-') => sign = -1.0,
                Some(c) => return Err(self.err(&format!("unexpected '{c}'"))),
            }
            self.pos += 1;
        }
        Ok(PolyField { comps })
    }

    fn term(&mut self) -> Result<(f64, Vec<u32>, usize)> {
        let mut coef = 1.0;
        let mut exps = vec![0u32; self.dim];
        loop {
            let c = self.peek().ok_or_else(|| self.err("term ends without a derivation d<var>"))?;
            if c.is_ascii_digit() || c == '.' {
                coef *= self.number()?;
            } else if c.is_ascii_alphabetic() {
                let name = self.ident();
                if let Some(var) = name.strip_prefix('d').and_then(|v| var_index(v, self.dim)) {
                    return Ok((coef, exps, var));
                }
                let idx = var_index(&name, self.dim).ok_or_else(|| self.err(&format!("unknown symbol '{name}'")))?;
                let mut e = 1;
                if self.peek() == Some('^') {
                    self.pos += 1;
                    e = self.number()? as u32;
                }
                exps[idx] += e;
            } else {
                return Err(self.err(&format!("unexpected '{c}'")));
            }
            if self.peek() == Some('*') {
                self.pos += 1;
            }
        }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric()) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.' || c == 'e') {
            // Allow a signed exponent directly after 'e'.
            if self.peek() == Some('e') && matches!(self.chars.get(self.pos + 1), Some('+' | '-')) {
                self.pos += 1;
            }
            self.pos += 1;
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse::<f64>().map_err(|_| self.err(&format!("bad number '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_eval() {
        let f = PolyField::parse("x*dy", 2).unwrap();
        assert_eq!(f.eval(&[2.0, 5.0]), vec![0.0, 2.0]);
        let f = PolyField::parse("dx + dy", 2).unwrap();
        assert_eq!(f.eval(&[2.0, 5.0]), vec![1.0, 1.0]);
        let f = PolyField::parse("-0.5*x^2*y*dz + 3dx", 3).unwrap();
        assert_eq!(f.eval(&[2.0, 3.0, 0.0]), vec![3.0, 0.0, -6.0]);
        let f = PolyField::parse("1e-2*x1*dx5", 5).unwrap();
        assert_eq!(f.eval(&[2.0, 0.0, 0.0, 0.0, 0.0])[4], 0.02);
        assert!(PolyField::parse("x*", 2).is_err());
        assert!(PolyField::parse("dq", 2).is_err());
        assert!(PolyField::parse("dz", 2).is_err());
    }

    #[test]
    fn bracket_of_heisenberg_pair() {
        let x = PolyField::parse("dx", 2).unwrap();
        let y = PolyField::parse("x*dy", 2).unwrap();
        let b = x.bracket(&y).unwrap();
        assert_eq!(b, PolyField::parse("dy", 2).unwrap());
        assert_eq!(y.bracket(&x).unwrap(), PolyField::parse("-dy", 2).unwrap());
        // [[X, Y], Y] = [∂y, x∂y] = 0
        assert!(b.bracket(&y).unwrap().comps.iter().all(Poly::is_zero));
    }

    #[test]
    fn bracket_is_antisymmetric_and_jacobi() {
        let a = PolyField::parse("y*dx + x^2*dy", 2).unwrap();
        let b = PolyField::parse("dx - x*y*dy", 2).unwrap();
        let c = PolyField::parse("x*dx + y^2*dy", 2).unwrap();
        let ab = a.bracket(&b).unwrap();
        let ba = b.bracket(&a).unwrap();
        assert!(ab.sum(&ba).comps.iter().all(Poly::is_zero));
        let j = a
            .bracket(&b.bracket(&c).unwrap())
            .unwrap()
            .sum(&b.bracket(&c.bracket(&a).unwrap()).unwrap())
            .sum(&c.bracket(&a.bracket(&b).unwrap()).unwrap());
        for p in [[0.3, -0.7], [1.1, 2.0]] {
            assert!(j.eval(&p).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let f = PolyField::parse("x*y*dx + y^3*dy", 2).unwrap();
        let x = [0.4, -1.3];
        let jac = f.jacobian(&x);
        let h = 1e-6;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (f.eval(&xp), f.eval(&xm));
            for i in 0..2 {
                assert!(((fp[i] - fm[i]) / (2.0 * h) - jac[i][j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn display_round_trips() {
        for s in ["dx", "x*dy", "dx + dy", "-0.5*x^2*y*dz + 3*dx"] {
            let f = PolyField::parse(s, 3).unwrap();
            let again = PolyField::parse(&f.to_string(), 3).unwrap();
            assert_eq!(f, again, "{s} -> {f}");
        }
    }
}
