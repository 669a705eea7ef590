//! Polynomials with integer coefficients over argument placeholders, term
//! variables and unknown template coefficients, plus polynomial
//! interpretations of (possibly annotated) symbols.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::term::{Name, Term};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PVar {
    /// The `i`-th argument (1-based) of the interpreted symbol.
    Arg(u32),
    /// A term variable.
    Var(Name),
    /// An unknown template coefficient.
    Unknown(u32),
}

impl fmt::Display for PVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PVar::Arg(i) => write!(f, "x{i}"),
            PVar::Var(x) => write!(f, "{x}"),
            PVar::Unknown(k) => write!(f, "c{k}"),
        }
    }
}

/// Sorted `(variable, exponent)` pairs with positive exponents.
pub type Monomial = Vec<(PVar, u32)>;

fn mono_mul(a: &Monomial, b: &Monomial) -> Monomial {
    let mut m: BTreeMap<PVar, u32> = a.iter().cloned().collect();
    for (v, e) in b {
        *m.entry(v.clone()).or_insert(0) += e;
    }
    m.into_iter().collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Poly {
    terms: BTreeMap<Monomial, i128>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: i128) -> Self {
        let mut p = Poly::zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn var(v: PVar) -> Self {
        let mut p = Poly::zero();
        p.add_term(vec![(v, 1)], 1);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, i128)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn add_term(&mut self, m: Monomial, c: i128) {
        if c == 0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0 {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut p = self.clone();
        for (m, c) in &other.terms {
            p.add_term(m.clone(), *c);
        }
        p
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1))
    }

    pub fn scale(&self, k: i128) -> Poly {
        let mut p = Poly::zero();
        for (m, c) in &self.terms {
            p.add_term(m.clone(), c * k);
        }
        p
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut p = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                p.add_term(mono_mul(m1, m2), c1 * c2);
            }
        }
        p
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut p = Poly::constant(1);
        for _ in 0..e {
            p = p.mul(self);
        }
        p
    }

    /// Replaces every variable `v` for which `f` returns a polynomial.
    pub fn substitute(&self, f: &impl Fn(&PVar) -> Option<Poly>) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut acc = Poly::constant(*c);
            for (v, e) in m {
                let factor = match f(v) {
                    Some(p) => p.pow(*e),
                    None => {
                        let mut q = Poly::zero();
                        q.add_term(vec![(v.clone(), *e)], 1);
                        q
                    }
                };
                acc = acc.mul(&factor);
            }
            out = out.add(&acc);
        }
        out
    }

    pub fn eval(&self, f: &impl Fn(&PVar) -> i128) -> i128 {
        self.terms
            .iter()
            .map(|(m, c)| m.iter().fold(*c, |acc, (v, e)| acc * f(v).pow(*e)))
            .sum()
    }

    pub fn constant_term(&self) -> i128 {
        self.terms.get(&Vec::new()).copied().unwrap_or(0)
    }

    /// Groups the polynomial by its term-variable part: each entry maps a
    /// monomial over term variables to its coefficient, a polynomial over
    /// the remaining variables.
    pub fn by_term_monomial(&self) -> BTreeMap<Monomial, Poly> {
        let mut out: BTreeMap<Monomial, Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (tv, rest): (Monomial, Monomial) = m.iter().cloned().partition(|(v, _)| matches!(v, PVar::Var(_)));
            out.entry(tv).or_default().add_term(rest, *c);
        }
        out
    }

    pub fn unknowns(&self) -> impl Iterator<Item = u32> + '_ {
        self.terms
            .keys()
            .flat_map(|m| m.iter())
            .filter_map(|(v, _)| match v {
                PVar::Unknown(k) => Some(*k),
                _ => None,
            })
    }

    pub fn is_multilinear_in_args(&self) -> bool {
        self.terms
            .keys()
            .all(|m| m.iter().all(|(v, e)| !matches!(v, PVar::Arg(_)) || *e <= 1))
    }

    pub fn has_nonnegative_coefficients(&self) -> bool {
        self.terms.values().all(|c| *c >= 0)
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|m| m.iter().map(|(_, e)| e).sum())
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // Highest degree first, constant last.
        let mut items: Vec<(&Monomial, &i128)> = self.terms.iter().collect();
        items.sort_by_key(|(m, _)| std::cmp::Reverse(m.iter().map(|(_, e)| *e).sum::<u32>()));
        for (i, (m, c)) in items.into_iter().enumerate() {
            let neg = *c < 0;
            let a = c.unsigned_abs();
            if i > 0 {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            } else if neg {
                write!(f, "-")?;
            }
            let factors: Vec<String> = m
                .iter()
                .map(|(v, e)| if *e == 1 { v.to_string() } else { format!("{v}^{e}") })
                .collect();
            if factors.is_empty() {
                write!(f, "{a}")?;
            } else if a == 1 {
                write!(f, "{}", factors.join("*"))?;
            } else {
                write!(f, "{a}*{}", factors.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Interpretation of symbol occurrences `(name, annotated)` by polynomials
/// over argument placeholders. Symbols without an entry are mapped to 0.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interp {
    pub map: BTreeMap<(Name, bool), Poly>,
}

impl Interp {
    pub fn get(&self, sym: &str, annotated: bool) -> Option<&Poly> {
        self.map.get(&(Name::from(sym), annotated))
    }

    pub fn set(&mut self, sym: &str, annotated: bool, p: Poly) {
        self.map.insert((Name::from(sym), annotated), p);
    }

    /// `Pol(t)` as a polynomial over the variables of `t`.
    pub fn eval(&self, t: &Term) -> Poly {
        match t {
            Term::Var(x) => Poly::var(PVar::Var(x.clone())),
            Term::App {
                sym,
                annotated,
                args,
            } => {
                let Some(p) = self.map.get(&(sym.clone(), *annotated)) else {
                    return Poly::zero();
                };
                let vals: Vec<Poly> = args.iter().map(|a| self.eval(a)).collect();
                p.substitute(&|v| match v {
                    PVar::Arg(i) => vals.get(*i as usize - 1).cloned().or(Some(Poly::zero())),
                    _ => None,
                })
            }
        }
    }

    /// `Sum(r)`: the sum of `Pol(t#)` over annotated subterms `t` of `r`.
    pub fn sharp_sum(&self, r: &Term) -> Poly {
        r.annotated_subterms()
            .into_iter()
            .fold(Poly::zero(), |acc, (_, t)| acc.add(&self.eval(&t.sharp_root())))
    }

    /// Instantiates unknown coefficients.
    pub fn instantiate(&self, model: &BTreeMap<u32, i128>) -> Interp {
        Interp {
            map: self
                .map
                .iter()
                .map(|(k, p)| {
                    let q = p.substitute(&|v| match v {
                        PVar::Unknown(u) => Some(Poly::constant(model.get(u).copied().unwrap_or(0))),
                        _ => None,
                    });
                    (k.clone(), q)
                })
                .filter(|(_, p)| !p.is_zero())
                .collect(),
        }
    }

    /// Natural coefficients and multilinear in the arguments, without
    /// unknowns.
    pub fn is_valid(&self) -> bool {
        self.map.values().all(|p| {
            p.has_nonnegative_coefficients() && p.is_multilinear_in_args() && p.unknowns().next().is_none()
        })
    }

    pub fn to_records(&self) -> Vec<InterpRecord> {
        self.map
            .iter()
            .map(|((sym, annotated), p)| InterpRecord {
                symbol: sym.to_string(),
                annotated: *annotated,
                polynomial: p.to_string(),
                monomials: p
                    .terms()
                    .map(|(m, c)| MonomialRecord {
                        // Saturation can only make a record fail replay.
                        coeff: c.clamp(i64::MIN.into(), i64::MAX.into()) as i64,
                        args: m
                            .iter()
                            .flat_map(|(v, e)| {
                                let i = match v {
                                    PVar::Arg(i) => *i,
                                    _ => 0,
                                };
                                std::iter::repeat_n(i, *e as usize)
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect()
    }

    /// Rebuilds an interpretation; monomials mentioning argument 0 are
    /// rejected.
    pub fn from_records(records: &[InterpRecord]) -> Option<Interp> {
        let mut out = Interp::default();
        for r in records {
            let mut p = Poly::zero();
            for m in &r.monomials {
                let mut mono: BTreeMap<PVar, u32> = BTreeMap::new();
                for &i in &m.args {
                    if i == 0 {
                        return None;
                    }
                    *mono.entry(PVar::Arg(i)).or_insert(0) += 1;
                }
                p.add_term(mono.into_iter().collect(), m.coeff.into());
            }
            out.set(&r.symbol, r.annotated, p);
        }
        Some(out)
    }
}

impl fmt::Display for Interp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ((sym, ann), p) in &self.map {
            writeln!(f, "Pol({sym}{}) = {p}", if *ann { "#" } else { "" })?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialRecord {
    pub coeff: i64,
    /// 1-based argument indices, repeated by exponent.
    pub args: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpRecord {
    pub symbol: String,
    pub annotated: bool,
    pub polynomial: String,
    pub monomials: Vec<MonomialRecord>,
}

/// `p ≥ q` (or `p > q`) for all natural values of the term variables,
/// decided by absolute positiveness of `p - q`. Polynomials must not
/// contain unknowns.
pub fn absolutely_geq(p: &Poly, q: &Poly, strict: bool) -> bool {
    let d = p.sub(q);
    d.terms().all(|(_, c)| c >= 0) && (!strict || d.constant_term() >= 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: u32) -> Poly {
        Poly::var(PVar::Arg(i))
    }

    #[test]
    fn eval_successor() {
        let mut i = Interp::default();
        i.set("s", false, x(1).add(&Poly::constant(1)));
        let t = Term::app("s", vec![Term::app("s", vec![Term::constant("0")])]);
        assert_eq!(i.eval(&t), Poly::constant(2));
    }

    #[test]
    fn eval_triple() {
        let mut i = Interp::default();
        i.set("triple", false, x(1).scale(3));
        let t = Term::app("triple", vec![Term::var("y")]);
        assert_eq!(i.eval(&t).to_string(), "3*y");
    }

    #[test]
    fn sharp_sums() {
        let mut i = Interp::default();
        i.set("g", true, Poly::constant(1));
        let dg = Term::app("d", vec![Term::sharp("g", vec![])]);
        assert_eq!(i.sharp_sum(&dg), Poly::constant(1));
        let cgg = Term::app("c", vec![Term::sharp("g", vec![]), Term::sharp("g", vec![])]);
        assert_eq!(i.sharp_sum(&cgg), Poly::constant(2));
        assert_eq!(i.sharp_sum(&Term::constant("0")), Poly::zero());
    }

    #[test]
    fn absolute_positiveness() {
        let y = Poly::var(PVar::Var("y".into()));
        let p = y.scale(2).add(&Poly::constant(1));
        assert!(absolutely_geq(&p, &y, true));
        assert!(!absolutely_geq(&y, &p, false));
    }

    #[test]
    fn records_roundtrip() {
        let mut i = Interp::default();
        i.set("f", false, x(1).mul(&x(2)).add(&x(1).scale(2)).add(&Poly::constant(1)));
        let back = Interp::from_records(&i.to_records()).unwrap();
        assert_eq!(back, i);
    }
}
