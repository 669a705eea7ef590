//! Probabilistic term rewrite systems and their structural classification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::rational::{Probability, Rational, RationalError};
use crate::term::{unify, Name, Signature, Symbol, SymbolKind, Term};

/// Branches in source order; equal branches are kept apart.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct MultiDistribution {
    pub branches: Vec<(Probability, Term)>,
}

impl MultiDistribution {
    pub fn new(branches: Vec<(Probability, Term)>) -> Result<Self, ModelError> {
        if branches.is_empty() {
            return Err(ModelError::EmptyDistribution);
        }
        let sum = Rational::sum(branches.iter().map(|(p, _)| p.value()))?;
        if sum != Rational::one() {
            return Err(ModelError::ProbabilitySum(sum));
        }
        Ok(MultiDistribution { branches })
    }

    pub fn dirac(t: Term) -> Self {
        MultiDistribution {
            branches: vec![(Probability::one(), t)],
        }
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.branches.iter().map(|(_, t)| t)
    }

    pub fn map(&self, f: impl Fn(&Term) -> Term) -> Self {
        MultiDistribution {
            branches: self.branches.iter().map(|(p, t)| (*p, f(t))).collect(),
        }
    }
}

impl fmt::Display for MultiDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{ ")?;
        for (i, (p, t)) in self.branches.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p} : {t}")?;
        }
        write!(f, " }}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("probabilities sum to {0}, not 1")]
    ProbabilitySum(Rational),
    #[error("empty distribution")]
    EmptyDistribution,
    #[error("left-hand side {0} is a variable")]
    VariableLhs(Term),
    #[error("variable {var} occurs in the right-hand side of {lhs} but not in its left-hand side")]
    ExtraVariable { lhs: Term, var: String },
    #[error("symbol {symbol} used with arities {first} and {second}")]
    ArityConflict {
        symbol: String,
        first: usize,
        second: usize,
    },
    #[error("annotated term in a rewrite rule: {0}")]
    Annotated(Term),
    #[error(transparent)]
    Rational(#[from] RationalError),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PRule {
    pub lhs: Term,
    pub rhs: MultiDistribution,
}

impl PRule {
    pub fn new(lhs: Term, rhs: MultiDistribution) -> Result<Self, ModelError> {
        if lhs.is_var() {
            return Err(ModelError::VariableLhs(lhs));
        }
        for t in std::iter::once(&lhs).chain(rhs.terms()) {
            if t.has_annotations() {
                return Err(ModelError::Annotated(t.clone()));
            }
        }
        let lv = lhs.variables();
        for r in rhs.terms() {
            if let Some(x) = r.variables().difference(&lv).next() {
                return Err(ModelError::ExtraVariable {
                    lhs: lhs.clone(),
                    var: x.to_string(),
                });
            }
        }
        Ok(PRule { lhs, rhs })
    }
}

impl fmt::Display for PRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.lhs, self.rhs)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Ptrs {
    pub signature: Signature,
    pub rules: Vec<PRule>,
    pub start: Option<Term>,
}

impl Ptrs {
    /// Builds the system and derives its signature, checking arities.
    pub fn new(rules: Vec<PRule>, start: Option<Term>) -> Result<Self, ModelError> {
        let defined: BTreeSet<Name> = rules.iter().filter_map(|r| r.lhs.root().cloned()).collect();
        let mut arities: BTreeMap<Name, usize> = BTreeMap::new();
        let mut err = None;
        let mut note = |t: &Term| {
            t.visit(&mut |s| {
                if let Term::App { sym, args, .. } = s {
                    let prev = *arities.entry(sym.clone()).or_insert(args.len());
                    if prev != args.len() && err.is_none() {
                        err = Some(ModelError::ArityConflict {
                            symbol: sym.to_string(),
                            first: prev,
                            second: args.len(),
                        });
                    }
                }
            })
        };
        for r in &rules {
            note(&r.lhs);
            for t in r.rhs.terms() {
                note(t);
            }
        }
        if let Some(s) = &start {
            note(s);
        }
        if let Some(e) = err {
            return Err(e);
        }
        let mut signature = Signature::new();
        for (name, arity) in arities {
            let kind = if defined.contains(&name) {
                SymbolKind::Defined
            } else {
                SymbolKind::Constructor
            };
            signature.insert(Symbol { name, arity, kind });
        }
        Ok(Ptrs {
            signature,
            rules,
            start,
        })
    }

    pub fn split_signature(&self) -> (BTreeSet<Symbol>, BTreeSet<Symbol>) {
        (self.signature.constructors(), self.signature.defined())
    }

    pub fn is_left_linear(&self) -> bool {
        self.rules.iter().all(|r| r.lhs.is_linear())
    }

    pub fn is_right_linear(&self) -> bool {
        self.rules.iter().all(|r| r.rhs.terms().all(Term::is_linear))
    }

    pub fn is_non_duplicating(&self) -> bool {
        self.rules.iter().all(|r| {
            r.lhs.variables().iter().all(|x| {
                let n = r.lhs.variable_count(x);
                r.rhs.terms().all(|t| t.variable_count(x) <= n)
            })
        })
    }

    /// No two rules (renamed apart) overlap at a non-variable position; a rule
    /// overlapping itself at the root does not count.
    pub fn is_non_overlapping(&self) -> bool {
        self.overlaps().is_empty()
    }

    /// All overlaps as (outer rule, inner rule, position in the outer lhs).
    pub fn overlaps(&self) -> Vec<(usize, usize, crate::term::Position)> {
        let mut out = Vec::new();
        for (i, outer) in self.rules.iter().enumerate() {
            for (p, sub) in outer.lhs.subterms() {
                if sub.is_var() {
                    continue;
                }
                for (j, inner) in self.rules.iter().enumerate() {
                    if i == j && p.is_root() {
                        continue;
                    }
                    if unify(sub, &inner.lhs.rename_apart()).is_some() {
                        out.push((i, j, p.clone()));
                    }
                }
            }
        }
        out
    }

    pub fn is_constructor_term(&self, t: &Term) -> bool {
        let mut ok = true;
        t.visit(&mut |s| {
            if let Some(f) = s.root() {
                ok &= !self.signature.is_defined(f);
            }
        });
        ok
    }

    /// Defined root over constructor-term arguments.
    pub fn is_basic(&self, t: &Term) -> bool {
        match t.root() {
            Some(f) => {
                self.signature.is_defined(f) && t.args().iter().all(|a| self.is_constructor_term(a))
            }
            None => false,
        }
    }

    /// Argument slots `(f, i)` (0-based `i`) whose arguments are normal forms
    /// at every `f`-redex of a rewrite sequence from a basic term, computed as
    /// a greatest fixpoint over right-hand-side occurrences.
    pub fn normal_form_arguments(&self) -> BTreeSet<(Name, usize)> {
        let mut nf: BTreeSet<(Name, usize)> = BTreeSet::new();
        for s in self.signature.defined() {
            for i in 0..s.arity {
                nf.insert((s.name.clone(), i));
            }
        }
        loop {
            let mut cleared = Vec::new();
            for rule in &self.rules {
                for r in rule.rhs.terms() {
                    r.visit(&mut |sub| {
                        let Term::App { sym, args, .. } = sub else {
                            return;
                        };
                        if !self.signature.is_defined(sym) {
                            return;
                        }
                        for (i, ti) in args.iter().enumerate() {
                            let key = (sym.clone(), i);
                            if nf.contains(&key) && !self.argument_is_normal(ti, &rule.lhs, &nf) {
                                cleared.push(key);
                            }
                        }
                    });
                }
            }
            if cleared.is_empty() {
                return nf;
            }
            for k in cleared {
                nf.remove(&k);
            }
        }
    }

    fn argument_is_normal(&self, t: &Term, lhs: &Term, nf: &BTreeSet<(Name, usize)>) -> bool {
        self.is_constructor_term(t) && t.variables().iter().all(|x| guarded(x, lhs, nf))
    }

    fn certified(&self, needs_nf: impl Fn(&PRule, &Name) -> bool) -> bool {
        let nf = self.normal_form_arguments();
        self.rules.iter().all(|rule| {
            rule.lhs
                .variables()
                .iter()
                .filter(|x| needs_nf(rule, x))
                .all(|x| guarded(x, &rule.lhs, &nf))
        })
    }

    /// Sufficient check for weak spareness: every variable that occurs more
    /// often in some branch than in the lhs sits only under normal-form slots.
    pub fn is_weakly_spare_sufficient(&self) -> Certainty {
        let ok = self.certified(|rule, x| {
            let n = rule.lhs.variable_count(x);
            rule.rhs.terms().any(|t| t.variable_count(x) > n)
        });
        if ok {
            Certainty::Yes
        } else {
            Certainty::Unknown
        }
    }

    /// Sufficient check for spareness: variables occurring more than once in
    /// some branch sit only under normal-form slots.
    pub fn is_spare_sufficient(&self) -> Certainty {
        let ok = self.certified(|rule, x| rule.rhs.terms().any(|t| t.variable_count(x) > 1));
        if ok {
            Certainty::Yes
        } else {
            Certainty::Unknown
        }
    }

    /// Whether proving iAST suffices for the goal by the known transfer
    /// theorems.
    pub fn iast_transfer_class(&self, goal: TransferGoal) -> Transfer {
        let base = self.is_non_overlapping() && self.is_left_linear();
        let extra = match goal {
            TransferGoal::Ast => self.is_right_linear(),
            TransferGoal::Bast => self.is_spare_sufficient() == Certainty::Yes,
        };
        if base && extra {
            Transfer::Applicable
        } else {
            Transfer::NotApplicable
        }
    }
}

/// `x` occurs in `lhs` only below root argument slots flagged in `nf`.
fn guarded(x: &Name, lhs: &Term, nf: &BTreeSet<(Name, usize)>) -> bool {
    let Some(f) = lhs.root() else {
        return false;
    };
    lhs.variable_positions()
        .iter()
        .filter(|(_, y)| y == x)
        .all(|(p, _)| p.0.first().is_some_and(|&i| nf.contains(&(f.clone(), i - 1))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Certainty {
    Yes,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferGoal {
    Ast,
    Bast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transfer {
    Applicable,
    NotApplicable,
}
