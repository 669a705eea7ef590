//! First-order terms over a signature split into constructors and defined
//! symbols. Every occurrence of a defined symbol carries an annotation flag,
//! so `f` and `f#` share one symbol and differ only in that bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

pub type Name = Arc<str>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    Constructor,
    Defined,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol {
    pub name: Name,
    pub arity: usize,
    pub kind: SymbolKind,
}

/// Symbols indexed by name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    symbols: BTreeMap<Name, Symbol>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or overwrites a symbol.
    pub fn insert(&mut self, symbol: Symbol) {
        self.symbols.insert(symbol.name.clone(), symbol);
    }

    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.symbols.get(name)
    }

    pub fn is_defined(&self, name: &str) -> bool {
        matches!(self.get(name), Some(s) if s.kind == SymbolKind::Defined)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.values()
    }

    pub fn defined(&self) -> BTreeSet<Symbol> {
        self.iter()
            .filter(|s| s.kind == SymbolKind::Defined)
            .cloned()
            .collect()
    }

    pub fn constructors(&self) -> BTreeSet<Symbol> {
        self.iter()
            .filter(|s| s.kind == SymbolKind::Constructor)
            .cloned()
            .collect()
    }

    /// Builds a signature from the symbols occurring in `terms`; a symbol is
    /// defined iff it is the root of one of `lhss`.
    pub fn infer<'a>(
        lhss: impl IntoIterator<Item = &'a Term>,
        terms: impl IntoIterator<Item = &'a Term>,
    ) -> Self {
        let defined: BTreeSet<Name> = lhss
            .into_iter()
            .filter_map(|l| l.root().cloned())
            .collect();
        let mut sig = Signature::new();
        for t in terms {
            t.visit(&mut |s| {
                if let Term::App { sym, args, .. } = s {
                    let kind = if defined.contains(sym) {
                        SymbolKind::Defined
                    } else {
                        SymbolKind::Constructor
                    };
                    sig.insert(Symbol {
                        name: sym.clone(),
                        arity: args.len(),
                        kind,
                    });
                }
            });
        }
        sig
    }
}

/// A position: a sequence of 1-based argument indices, empty for the root.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position(pub Vec<usize>);

impl Position {
    pub fn root() -> Self {
        Position(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        Position(v)
    }

    pub fn concat(&self, other: &Position) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Position(v)
    }

    /// Prefix test: `self` is `other` or lies above it.
    pub fn is_prefix_of(&self, other: &Position) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn is_strictly_above(&self, other: &Position) -> bool {
        self.0.len() < other.0.len() && self.is_prefix_of(other)
    }

    /// The remainder of `self` after stripping `prefix`.
    pub fn strip_prefix(&self, prefix: &Position) -> Option<Position> {
        self.0
            .strip_prefix(prefix.0.as_slice())
            .map(|rest| Position(rest.to_vec()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "eps");
        }
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

impl fmt::Debug for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Position {
    type Err = TermError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "eps" || s == "ε" || s.is_empty() {
            return Ok(Position::root());
        }
        s.split('.')
            .map(|p| match p.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i),
                _ => Err(TermError::BadPosition(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Position)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("position {0} is not a position of the term")]
    InvalidPosition(Position),
    #[error("position {0} does not hold a defined symbol and cannot be annotated")]
    NotAnnotatable(Position),
    #[error("malformed position '{0}'")]
    BadPosition(String),
}

pub type Substitution = BTreeMap<Name, Term>;

/// A variable or a function application with an annotation flag.
///
/// The derived ordering compares variables before applications, and
/// applications by (symbol name, annotation flag, arguments).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Name),
    App {
        sym: Name,
        annotated: bool,
        args: Vec<Term>,
    },
}

static FRESH: AtomicU64 = AtomicU64::new(0);

/// A variable that cannot clash with parsed identifiers.
pub fn fresh_var() -> Term {
    let n = FRESH.fetch_add(1, Ordering::Relaxed);
    Term::Var(Arc::from(format!("?{n}")))
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Arc::from(name))
    }

    pub fn app(sym: &str, args: Vec<Term>) -> Term {
        Term::App {
            sym: Arc::from(sym),
            annotated: false,
            args,
        }
    }

    pub fn constant(sym: &str) -> Term {
        Term::app(sym, Vec::new())
    }

    /// An application whose root carries an annotation.
    pub fn sharp(sym: &str, args: Vec<Term>) -> Term {
        Term::App {
            sym: Arc::from(sym),
            annotated: true,
            args,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn root(&self) -> Option<&Name> {
        match self {
            Term::Var(_) => None,
            Term::App { sym, .. } => Some(sym),
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Var(_) => &[],
            Term::App { args, .. } => args,
        }
    }

    pub fn is_root_annotated(&self) -> bool {
        matches!(self, Term::App { annotated: true, .. })
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        f(self);
        for a in self.args() {
            a.visit(f);
        }
    }

    pub fn size(&self) -> usize {
        1 + self.args().iter().map(Term::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        self.args().iter().map(|a| a.depth() + 1).max().unwrap_or(0)
    }

    /// All positions in leftmost-outermost order.
    pub fn positions(&self) -> Vec<Position> {
        let mut out = Vec::new();
        self.collect_positions(&mut Vec::new(), &mut |p, _| out.push(p));
        out
    }

    fn collect_positions(&self, path: &mut Vec<usize>, f: &mut impl FnMut(Position, &Term)) {
        f(Position(path.clone()), self);
        for (i, a) in self.args().iter().enumerate() {
            path.push(i + 1);
            a.collect_positions(path, f);
            path.pop();
        }
    }

    /// Pairs of (position, subterm) in leftmost-outermost order.
    pub fn subterms(&self) -> Vec<(Position, &Term)> {
        let mut out = Vec::new();
        fn go<'a>(t: &'a Term, path: &mut Vec<usize>, out: &mut Vec<(Position, &'a Term)>) {
            out.push((Position(path.clone()), t));
            for (i, a) in t.args().iter().enumerate() {
                path.push(i + 1);
                go(a, path, out);
                path.pop();
            }
        }
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn subterm_at(&self, pos: &Position) -> Option<&Term> {
        let mut t = self;
        for &i in &pos.0 {
            t = t.args().get(i.checked_sub(1)?)?;
        }
        Some(t)
    }

    pub fn replace_at(&self, pos: &Position, replacement: Term) -> Result<Term, TermError> {
        fn go(t: &Term, path: &[usize], rep: Term, full: &Position) -> Result<Term, TermError> {
            let Some((&i, rest)) = path.split_first() else {
                return Ok(rep);
            };
            match t {
                Term::App {
                    sym,
                    annotated,
                    args,
                } if i >= 1 && i <= args.len() => {
                    let mut args = args.clone();
                    args[i - 1] = go(&args[i - 1], rest, rep, full)?;
                    Ok(Term::App {
                        sym: sym.clone(),
                        annotated: *annotated,
                        args,
                    })
                }
                _ => Err(TermError::InvalidPosition(full.clone())),
            }
        }
        go(self, &pos.0, replacement, pos)
    }

    pub fn apply(&self, sigma: &Substitution) -> Term {
        match self {
            Term::Var(x) => sigma.get(x).cloned().unwrap_or_else(|| self.clone()),
            Term::App {
                sym,
                annotated,
                args,
            } => Term::App {
                sym: sym.clone(),
                annotated: *annotated,
                args: args.iter().map(|a| a.apply(sigma)).collect(),
            },
        }
    }

    pub fn variables(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| {
            if let Term::Var(x) = t {
                out.insert(x.clone());
            }
        });
        out
    }

    /// Variable occurrences with their positions, leftmost-outermost.
    pub fn variable_positions(&self) -> Vec<(Position, Name)> {
        self.subterms()
            .into_iter()
            .filter_map(|(p, t)| match t {
                Term::Var(x) => Some((p, x.clone())),
                _ => None,
            })
            .collect()
    }

    pub fn variable_count(&self, x: &str) -> usize {
        let mut n = 0;
        self.visit(&mut |t| {
            if matches!(t, Term::Var(y) if &**y == x) {
                n += 1;
            }
        });
        n
    }

    pub fn is_linear(&self) -> bool {
        let mut seen = BTreeSet::new();
        let mut ok = true;
        self.visit(&mut |t| {
            if let Term::Var(x) = t {
                ok &= seen.insert(x.clone());
            }
        });
        ok
    }

    pub fn is_ground(&self) -> bool {
        let mut ground = true;
        self.visit(&mut |t| ground &= !t.is_var());
        ground
    }

    /// `♭(t)`: the same term with every annotation removed.
    pub fn flatten(&self) -> Term {
        match self {
            Term::Var(_) => self.clone(),
            Term::App { sym, args, .. } => Term::App {
                sym: sym.clone(),
                annotated: false,
                args: args.iter().map(Term::flatten).collect(),
            },
        }
    }

    pub fn has_annotations(&self) -> bool {
        let mut found = false;
        self.visit(&mut |t| found |= t.is_root_annotated());
        found
    }

    pub fn annotation_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |t| n += usize::from(t.is_root_annotated()));
        n
    }

    pub fn annotated_positions(&self) -> Vec<Position> {
        self.subterms()
            .into_iter()
            .filter(|(_, t)| t.is_root_annotated())
            .map(|(p, _)| p)
            .collect()
    }

    /// Positions holding a defined symbol (annotated or not).
    pub fn defined_positions(&self, sig: &Signature) -> Vec<Position> {
        self.subterms()
            .into_iter()
            .filter(|(_, t)| matches!(t.root(), Some(f) if sig.is_defined(f)))
            .map(|(p, _)| p)
            .collect()
    }

    /// `#_Φ(t)`: annotate exactly the positions in `phi`.
    pub fn annotate_at(&self, phi: &BTreeSet<Position>, sig: &Signature) -> Result<Term, TermError> {
        for p in phi {
            match self.subterm_at(p) {
                None => return Err(TermError::InvalidPosition(p.clone())),
                Some(Term::App { sym, .. }) if sig.is_defined(sym) => {}
                Some(_) => return Err(TermError::NotAnnotatable(p.clone())),
            }
        }
        fn go(t: &Term, path: &mut Vec<usize>, phi: &BTreeSet<Position>) -> Term {
            match t {
                Term::Var(_) => t.clone(),
                Term::App { sym, args, .. } => {
                    let annotated = phi.contains(&Position(path.clone()));
                    let args = args
                        .iter()
                        .enumerate()
                        .map(|(i, a)| {
                            path.push(i + 1);
                            let r = go(a, path, phi);
                            path.pop();
                            r
                        })
                        .collect();
                    Term::App {
                        sym: sym.clone(),
                        annotated,
                        args,
                    }
                }
            }
        }
        Ok(go(self, &mut Vec::new(), phi))
    }

    /// `♭^π(t)`: drop annotations strictly above `pos`.
    pub fn strip_above(&self, pos: &Position) -> Result<Term, TermError> {
        if self.subterm_at(pos).is_none() {
            return Err(TermError::InvalidPosition(pos.clone()));
        }
        fn go(t: &Term, rest: &[usize]) -> Term {
            let Some((&i, tail)) = rest.split_first() else {
                return t.clone();
            };
            match t {
                Term::Var(_) => t.clone(),
                Term::App { sym, args, .. } => {
                    let mut args = args.clone();
                    args[i - 1] = go(&args[i - 1], tail);
                    Term::App {
                        sym: sym.clone(),
                        annotated: false,
                        args,
                    }
                }
            }
        }
        Ok(go(self, &pos.0))
    }

    /// The flattened subterms at annotated positions, leftmost-outermost.
    pub fn annotated_subterms(&self) -> Vec<(Position, Term)> {
        self.subterms()
            .into_iter()
            .filter(|(_, t)| t.is_root_annotated())
            .map(|(p, t)| (p, t.flatten()))
            .collect()
    }

    /// `t#` for an unannotated `t`: the flattened term with its root annotated.
    pub fn sharp_root(&self) -> Term {
        match self.flatten() {
            Term::App { sym, args, .. } => Term::App {
                sym,
                annotated: true,
                args,
            },
            v => v,
        }
    }

    /// A copy with every variable replaced by a fresh one.
    pub fn rename_apart(&self) -> Term {
        let sigma: Substitution = self
            .variables()
            .into_iter()
            .map(|x| (x, fresh_var()))
            .collect();
        self.apply(&sigma)
    }

    /// True iff the two terms are equal up to a bijective variable renaming.
    pub fn is_variant_of(&self, other: &Term) -> bool {
        let mut fwd = BTreeMap::new();
        let mut bwd = BTreeMap::new();
        fn go(
            a: &Term,
            b: &Term,
            fwd: &mut BTreeMap<Name, Name>,
            bwd: &mut BTreeMap<Name, Name>,
        ) -> bool {
            match (a, b) {
                (Term::Var(x), Term::Var(y)) => {
                    let f = fwd.entry(x.clone()).or_insert_with(|| y.clone()).clone();
                    let g = bwd.entry(y.clone()).or_insert_with(|| x.clone()).clone();
                    f == *y && g == *x
                }
                (
                    Term::App {
                        sym: f,
                        annotated: af,
                        args: aa,
                    },
                    Term::App {
                        sym: g,
                        annotated: ag,
                        args: ba,
                    },
                ) => {
                    f == g
                        && af == ag
                        && aa.len() == ba.len()
                        && aa.iter().zip(ba).all(|(x, y)| go(x, y, fwd, bwd))
                }
                _ => false,
            }
        }
        go(self, other, &mut fwd, &mut bwd)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(x) => write!(f, "{x}"),
            Term::App {
                sym,
                annotated,
                args,
            } => {
                write!(f, "{sym}")?;
                if *annotated {
                    write!(f, "#")?;
                }
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Syntactic matching: returns `σ` with `pattern·σ = subject`.
/// Annotation flags must agree symbol by symbol.
pub fn match_term(pattern: &Term, subject: &Term) -> Option<Substitution> {
    let mut sigma = Substitution::new();
    if match_into(pattern, subject, &mut sigma) {
        Some(sigma)
    } else {
        None
    }
}

pub fn match_into(pattern: &Term, subject: &Term, sigma: &mut Substitution) -> bool {
    match (pattern, subject) {
        (Term::Var(x), _) => match sigma.get(x) {
            Some(bound) => bound == subject,
            None => {
                sigma.insert(x.clone(), subject.clone());
                true
            }
        },
        (
            Term::App {
                sym: f,
                annotated: af,
                args: pa,
            },
            Term::App {
                sym: g,
                annotated: ag,
                args: sa,
            },
        ) => {
            f == g
                && af == ag
                && pa.len() == sa.len()
                && pa.iter().zip(sa).all(|(p, s)| match_into(p, s, sigma))
        }
        _ => false,
    }
}

/// Most general unifier with occurs-check. The result is idempotent.
pub fn unify(s: &Term, t: &Term) -> Option<Substitution> {
    let mut sigma = Substitution::new();
    let mut stack = vec![(s.clone(), t.clone())];
    while let Some((a, b)) = stack.pop() {
        let a = walk(&a, &sigma);
        let b = walk(&b, &sigma);
        match (&a, &b) {
            (Term::Var(x), Term::Var(y)) if x == y => {}
            (Term::Var(x), other) | (other, Term::Var(x)) => {
                let other = resolve(other, &sigma);
                if occurs(x, &other) {
                    return None;
                }
                bind(&mut sigma, x.clone(), other);
            }
            (
                Term::App {
                    sym: f,
                    annotated: af,
                    args: fa,
                },
                Term::App {
                    sym: g,
                    annotated: ag,
                    args: ga,
                },
            ) => {
                if f != g || af != ag || fa.len() != ga.len() {
                    return None;
                }
                for (x, y) in fa.iter().zip(ga) {
                    stack.push((x.clone(), y.clone()));
                }
            }
        }
    }
    Some(sigma)
}

fn walk(t: &Term, sigma: &Substitution) -> Term {
    match t {
        Term::Var(x) => match sigma.get(x) {
            Some(u) => u.clone(),
            None => t.clone(),
        },
        _ => t.clone(),
    }
}

fn resolve(t: &Term, sigma: &Substitution) -> Term {
    t.apply(sigma)
}

fn occurs(x: &Name, t: &Term) -> bool {
    let mut found = false;
    t.visit(&mut |s| found |= matches!(s, Term::Var(y) if y == x));
    found
}

fn bind(sigma: &mut Substitution, x: Name, t: Term) {
    let single: Substitution = [(x.clone(), t.clone())].into_iter().collect();
    for v in sigma.values_mut() {
        *v = v.apply(&single);
    }
    sigma.insert(x, t);
}

/// True iff some instance of `lhs` (renamed apart from `t`) unifies with `t`.
pub fn unifiable_renamed(t: &Term, lhs: &Term) -> bool {
    unify(t, &lhs.rename_apart()).is_some()
}
