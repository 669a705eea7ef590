//! Annotated dependency pairs, ADP problems, and their non-probabilistic
//! projections.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ptrs::{ModelError, MultiDistribution, Ptrs};
use crate::syntax::{ParseError, Parser};
use crate::term::{Name, Signature, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdpError {
    #[error("ADP {0} has a variable left-hand side")]
    VariableLhs(String),
    #[error("ADP {adp}: variable {var} does not occur in the left-hand side")]
    ExtraVariable { adp: String, var: String },
    #[error("ADP {adp}: annotated symbol {symbol} is not defined")]
    BadAnnotation { adp: String, symbol: String },
    #[error("ADP {0} has an annotated left-hand side")]
    AnnotatedLhs(String),
    #[error("ADP {0} does not have a single-branch distribution")]
    NotSingleton(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `lhs -> rhs^flag`; the flag says whether the ADP may rewrite below
/// annotations.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Adp {
    pub lhs: Term,
    pub rhs: MultiDistribution,
    pub flag: bool,
}

impl Adp {
    pub fn new(lhs: Term, rhs: MultiDistribution, flag: bool, sig: &Signature) -> Result<Adp, AdpError> {
        let adp = Adp { lhs, rhs, flag };
        adp.validate(sig)?;
        Ok(adp)
    }

    pub fn validate(&self, sig: &Signature) -> Result<(), AdpError> {
        let name = || self.to_string();
        if self.lhs.is_var() {
            return Err(AdpError::VariableLhs(name()));
        }
        if self.lhs.has_annotations() {
            return Err(AdpError::AnnotatedLhs(name()));
        }
        let lv = self.lhs.variables();
        for r in self.rhs.terms() {
            if let Some(x) = r.variables().difference(&lv).next() {
                return Err(AdpError::ExtraVariable {
                    adp: name(),
                    var: x.to_string(),
                });
            }
            let mut bad = None;
            r.visit(&mut |s| {
                if let Term::App {
                    sym,
                    annotated: true,
                    ..
                } = s
                {
                    if !sig.is_defined(sym) && bad.is_none() {
                        bad = Some(sym.to_string());
                    }
                }
            });
            if let Some(symbol) = bad {
                return Err(AdpError::BadAnnotation { adp: name(), symbol });
            }
        }
        Ok(())
    }

    pub fn has_annotations(&self) -> bool {
        self.rhs.terms().any(Term::has_annotations)
    }

    /// All annotations removed, flag kept.
    pub fn flatten(&self) -> Adp {
        Adp {
            lhs: self.lhs.clone(),
            rhs: self.rhs.map(Term::flatten),
            flag: self.flag,
        }
    }

    pub fn with_flag(&self, flag: bool) -> Adp {
        Adp {
            flag,
            ..self.clone()
        }
    }

    pub fn is_non_duplicating(&self) -> bool {
        self.lhs.variables().iter().all(|x| {
            let n = self.lhs.variable_count(x);
            self.rhs.terms().all(|t| t.variable_count(x) <= n)
        })
    }

    pub fn variables(&self) -> BTreeSet<Name> {
        self.lhs.variables()
    }
}

impl fmt::Display for Adp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}:{}", self.lhs, self.rhs, self.flag)
    }
}

/// Parses the printed form `lhs -> { p : r, ... }:flag`.
pub fn parse_adp(text: &str, vars: &BTreeSet<Name>, sig: &Signature) -> Result<Adp, AdpError> {
    let mut p = Parser::new(text, vars.clone())?;
    let lhs = p.term()?;
    p.arrow()?;
    let branches = p.branches()?;
    let flag = p.flag()?;
    p.expect_end()?;
    Adp::new(lhs, MultiDistribution::new(branches)?, flag, sig)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Full,
    Innermost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Goal {
    #[serde(rename = "AST")]
    Ast,
    #[serde(rename = "bAST")]
    Bast,
    #[serde(rename = "iAST")]
    Iast,
}

impl Goal {
    pub fn strategy(self) -> Strategy {
        match self {
            Goal::Iast => Strategy::Innermost,
            Goal::Ast | Goal::Bast => Strategy::Full,
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Goal::Ast => "AST",
            Goal::Bast => "bAST",
            Goal::Iast => "iAST",
        })
    }
}

impl std::str::FromStr for Goal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ast" => Ok(Goal::Ast),
            "bast" => Ok(Goal::Bast),
            "iast" => Ok(Goal::Iast),
            _ => Err(format!("unknown goal '{s}' (expected ast, bast or iast)")),
        }
    }
}

/// A set of ADPs with its goal; `reach` is the reachability component of a
/// basic problem and is present iff the goal is bAST.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AdpProblem {
    pub signature: Signature,
    pub goal: Goal,
    pub adps: Vec<Adp>,
    pub reach: Option<Vec<Adp>>,
}

impl AdpProblem {
    pub fn new(signature: Signature, goal: Goal, adps: Vec<Adp>, reach: Option<Vec<Adp>>) -> Self {
        let mut p = AdpProblem {
            signature,
            goal,
            adps,
            reach,
        };
        p.normalize();
        p
    }

    pub fn strategy(&self) -> Strategy {
        self.goal.strategy()
    }

    /// Removes duplicates and replaces `(I, P)` by `(I \ P, P)`.
    pub fn normalize(&mut self) {
        dedup(&mut self.adps);
        if self.goal == Goal::Bast && self.reach.is_none() {
            self.reach = Some(Vec::new());
        }
        if let Some(reach) = &mut self.reach {
            dedup(reach);
            reach.retain(|a| !self.adps.contains(a));
        }
    }

    pub fn reach(&self) -> &[Adp] {
        self.reach.as_deref().unwrap_or(&[])
    }

    /// `I ∪ P`, with `I` first.
    pub fn all_adps(&self) -> Vec<Adp> {
        let mut v: Vec<Adp> = self.reach().to_vec();
        v.extend(self.adps.iter().cloned());
        dedup(&mut v);
        v
    }

    pub fn has_annotations(&self) -> bool {
        self.adps.iter().any(Adp::has_annotations)
    }

    pub fn annotated_count(&self) -> usize {
        self.adps.iter().filter(|a| a.has_annotations()).count()
    }

    pub fn all_singletons(&self) -> bool {
        self.adps.iter().all(|a| a.rhs.len() == 1)
    }

    pub fn variables(&self) -> BTreeSet<Name> {
        let mut v = BTreeSet::new();
        for a in self.all_adps() {
            v.extend(a.variables());
        }
        v
    }

    /// The flag-true ADPs flattened branch by branch into ordinary rules.
    pub fn np(&self) -> Vec<(Term, Term)> {
        np(&self.adps)
    }

    /// `ℓ# → t#` for every annotated subterm `t` of a singleton rhs.
    pub fn dp(&self) -> Result<Vec<(Term, Term)>, AdpError> {
        dp(&self.adps)
    }

    pub fn is_non_duplicating(&self) -> bool {
        self.adps.iter().all(Adp::is_non_duplicating)
    }
}

impl fmt::Display for AdpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(reach) = &self.reach {
            writeln!(f, "I:")?;
            for a in reach {
                writeln!(f, "  {a}")?;
            }
            writeln!(f, "P:")?;
        }
        for a in &self.adps {
            writeln!(f, "  {a}")?;
        }
        Ok(())
    }
}

pub fn dedup(v: &mut Vec<Adp>) {
    let mut seen = BTreeSet::new();
    v.retain(|a| seen.insert(a.clone()));
}

pub fn np(adps: &[Adp]) -> Vec<(Term, Term)> {
    let mut out = Vec::new();
    for a in adps.iter().filter(|a| a.flag) {
        for r in a.rhs.terms() {
            let rule = (a.lhs.clone(), r.flatten());
            if !out.contains(&rule) {
                out.push(rule);
            }
        }
    }
    out
}

pub fn dp(adps: &[Adp]) -> Result<Vec<(Term, Term)>, AdpError> {
    let mut out = Vec::new();
    for a in adps {
        if a.rhs.len() != 1 {
            return Err(AdpError::NotSingleton(a.to_string()));
        }
        let l = a.lhs.sharp_root();
        for (_, t) in a.rhs.branches[0].1.annotated_subterms() {
            let pair = (l.clone(), t.sharp_root());
            if !out.contains(&pair) {
                out.push(pair);
            }
        }
    }
    Ok(out)
}

/// Annotates every defined symbol of `t`.
pub fn annotate_defined(t: &Term, sig: &Signature) -> Term {
    match t {
        Term::Var(_) => t.clone(),
        Term::App { sym, args, .. } => Term::App {
            sym: sym.clone(),
            annotated: sig.is_defined(sym),
            args: args.iter().map(|a| annotate_defined(a, sig)).collect(),
        },
    }
}

/// The canonical ADPs of a PTRS: all defined symbols of every rhs annotated,
/// every flag true.
pub fn canonical_adps(r: &Ptrs) -> Vec<Adp> {
    r.rules
        .iter()
        .map(|rule| Adp {
            lhs: rule.lhs.clone(),
            rhs: rule.rhs.map(|t| annotate_defined(t, &r.signature)),
            flag: true,
        })
        .collect()
}

/// The initial ADP problem for a goal; basic problems start with `I = ∅`.
pub fn canonical_problem(r: &Ptrs, goal: Goal) -> AdpProblem {
    let reach = (goal == Goal::Bast).then(Vec::new);
    AdpProblem::new(r.signature.clone(), goal, canonical_adps(r), reach)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_ptrs;

    const R2: &str = "(VAR x) (RULES g -> { 3/4 : d(g), 1/4 : 0 } d(x) -> { 1 : c(x,x) })";

    #[test]
    fn canonical_r2() {
        let r = parse_ptrs(R2).unwrap();
        let adps = canonical_adps(&r);
        assert_eq!(adps[0].to_string(), "g -> { 3/4 : d#(g#), 1/4 : 0 }:true");
        assert_eq!(adps[1].to_string(), "d(x) -> { 1 : c(x,x) }:true");
    }

    #[test]
    fn np_flattens_flag_true() {
        let r = parse_ptrs("(VAR x) (RULES a -> { 1 : b } d(x) -> { 1 : c(x, d(x)) } b -> {1 : b})").unwrap();
        let mut adps = canonical_adps(&r);
        adps[2].flag = false;
        let np = np(&adps);
        let shown: Vec<String> = np.iter().map(|(l, r)| format!("{l} -> {r}")).collect();
        assert_eq!(shown, ["a -> b", "d(x) -> c(x,d(x))"]);
    }

    #[test]
    fn dp_pairs() {
        let r = parse_ptrs("(VAR x) (RULES f(x) -> { 1 : f(a) } a -> { 1 : a })").unwrap();
        let pairs = dp(&canonical_adps(&r)).unwrap();
        let shown: Vec<String> = pairs.iter().map(|(l, r)| format!("{l} -> {r}")).collect();
        assert_eq!(shown, ["f#(x) -> f#(a)", "f#(x) -> a#", "a# -> a#"]);
    }

    #[test]
    fn dp_rejects_branching() {
        let r = parse_ptrs(R2).unwrap();
        assert!(dp(&canonical_adps(&r)).is_err());
    }

    #[test]
    fn adp_roundtrip() {
        let r = parse_ptrs(R2).unwrap();
        let vars: BTreeSet<Name> = [Name::from("x")].into_iter().collect();
        for a in canonical_adps(&r) {
            let back = parse_adp(&a.to_string(), &vars, &r.signature).unwrap();
            assert_eq!(back, a);
        }
    }

    #[test]
    fn rejects_constructor_annotation() {
        let r = parse_ptrs(R2).unwrap();
        let e = parse_adp("g -> { 1 : c#(g,g) }:true", &BTreeSet::new(), &r.signature);
        assert!(matches!(e, Err(AdpError::BadAnnotation { .. })));
    }

    #[test]
    fn basic_problem_normalizes_reach() {
        let r = parse_ptrs(R2).unwrap();
        let adps = canonical_adps(&r);
        let p = AdpProblem::new(r.signature.clone(), Goal::Bast, adps.clone(), Some(adps.clone()));
        assert!(p.reach().is_empty());
    }
}
