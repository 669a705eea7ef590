//! Reduction pairs from multilinear polynomial interpretations: constraint
//! generation, checking of concrete interpretations, template search and
//! the reduction pair processor.
//!
//! For an ADP `ℓ → {p1:r1, ..., pk:rk}^m` the conditions are
//! 1. `Pol(ℓ#) ≥ Σ pj·Sum(rj)` for every ADP,
//! 2. for strict ADPs some `j` with `Pol(ℓ#) > Sum(rj)` and, if `m`,
//!    `Pol(ℓ) ≥ Pol(♭(rj))` for the same `j`,
//! 3. `Pol(ℓ) ≥ Σ pj·Pol(♭(rj))` for every ADP with `m = true`.
//!
//! Inequalities must hold for all natural values of the variables; they
//! are decided by absolute positiveness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Instant;

use crate::adp::{Adp, AdpProblem, Goal};
use crate::poly::{absolutely_geq, Interp, PVar, Poly};
use crate::rational::{lcm_denominators, Rational};
use crate::smt;
use crate::solver::{Constraint, Csp, Limits, Outcome};
use crate::term::{Name, Term};

/// One polynomial inequality `lhs ≥ rhs` (or `>`), tagged by its source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inequality {
    pub adp: usize,
    pub condition: u8,
    pub branch: Option<usize>,
    pub lhs: Poly,
    pub rhs: Poly,
    pub strict: bool,
}

impl Inequality {
    /// Coefficient constraints over unknowns by absolute positiveness.
    pub fn coefficient_constraints(&self) -> Vec<Constraint> {
        let mut groups = self.lhs.sub(&self.rhs).by_term_monomial();
        if self.strict {
            groups.entry(Vec::new()).or_default();
        }
        groups
            .into_iter()
            .map(|(m, p)| Constraint::geq(p, i128::from(self.strict && m.is_empty())))
            .collect()
    }

    /// For interpretations without unknowns.
    pub fn holds(&self) -> bool {
        absolutely_geq(&self.lhs, &self.rhs, self.strict)
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = if self.strict { ">" } else { ">=" };
        write!(f, "ADP {} ({})", self.adp, self.condition)?;
        if let Some(j) = self.branch {
            write!(f, " branch {j}")?;
        }
        write!(f, ": {} {rel} {}", self.lhs, self.rhs)
    }
}

/// Conditions (1) and (3) as hard inequalities; condition (2) as one
/// disjunction over branches per strict ADP.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    pub hard: Vec<Inequality>,
    pub strict: Vec<(usize, Vec<Vec<Inequality>>)>,
}

fn scaled(p: Rational, l: i64) -> i128 {
    i128::from(p.numer()) * i128::from(l / p.denom())
}

fn denominators(a: &Adp) -> i64 {
    lcm_denominators(a.rhs.branches.iter().map(|(p, _)| p.value())).unwrap_or(1)
}

/// Condition (1) for `a` (index `i`).
fn condition_one(i: usize, a: &Adp, pol: &Interp) -> Inequality {
    let l = denominators(a);
    let rhs = a
        .rhs
        .branches
        .iter()
        .fold(Poly::zero(), |acc, (p, r)| acc.add(&pol.sharp_sum(r).scale(scaled(p.value(), l))));
    Inequality {
        adp: i,
        condition: 1,
        branch: None,
        lhs: pol.eval(&a.lhs.sharp_root()).scale(i128::from(l)),
        rhs,
        strict: false,
    }
}

/// Condition (3) for a flag-true `a`.
fn condition_three(i: usize, a: &Adp, pol: &Interp) -> Inequality {
    let l = denominators(a);
    let rhs = a.rhs.branches.iter().fold(Poly::zero(), |acc, (p, r)| {
        acc.add(&pol.eval(&r.flatten()).scale(scaled(p.value(), l)))
    });
    Inequality {
        adp: i,
        condition: 3,
        branch: None,
        lhs: pol.eval(&a.lhs).scale(i128::from(l)),
        rhs,
        strict: false,
    }
}

/// Alternatives of condition (2) for `a`, one per branch.
fn condition_two(i: usize, a: &Adp, pol: &Interp) -> Vec<Vec<Inequality>> {
    let lsharp = pol.eval(&a.lhs.sharp_root());
    let lflat = pol.eval(&a.lhs);
    a.rhs
        .branches
        .iter()
        .enumerate()
        .map(|(j, (_, r))| {
            let mut alt = vec![Inequality {
                adp: i,
                condition: 2,
                branch: Some(j),
                lhs: lsharp.clone(),
                rhs: pol.sharp_sum(r),
                strict: true,
            }];
            if a.flag {
                alt.push(Inequality {
                    adp: i,
                    condition: 2,
                    branch: Some(j),
                    lhs: lflat.clone(),
                    rhs: pol.eval(&r.flatten()),
                    strict: false,
                });
            }
            alt
        })
        .collect()
}

/// All constraints for `adps` with the given strict ADPs (indices).
pub fn gen_constraints(adps: &[Adp], pol: &Interp, strict: &BTreeSet<usize>) -> ConstraintSet {
    let mut cs = ConstraintSet::default();
    for (i, a) in adps.iter().enumerate() {
        cs.hard.push(condition_one(i, a, pol));
        if a.flag {
            cs.hard.push(condition_three(i, a, pol));
        }
        if strict.contains(&i) {
            cs.strict.push((i, condition_two(i, a, pol)));
        }
    }
    cs
}

/// Outcome of checking a concrete interpretation.
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub ok: bool,
    /// Each inequality with whether it holds; for condition (2) only the
    /// inequalities of the first satisfied branch (or all, if none is).
    pub lines: Vec<(Inequality, bool)>,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (q, ok) in &self.lines {
            writeln!(f, "[{}] {q}", if *ok { "ok" } else { "FAIL" })?;
        }
        Ok(())
    }
}

/// Whether `pol` satisfies conditions (1)-(3) with the given strict set.
/// An empty strict set is rejected.
pub fn check_interp(pol: &Interp, adps: &[Adp], strict: &BTreeSet<usize>) -> CheckReport {
    let cs = gen_constraints(adps, pol, strict);
    let mut ok = pol.is_valid() && !strict.is_empty() && strict.iter().all(|&i| i < adps.len());
    let mut lines = Vec::new();
    for q in cs.hard {
        let h = q.holds();
        ok &= h;
        lines.push((q, h));
    }
    for (_, alts) in cs.strict {
        match alts.iter().find(|alt| alt.iter().all(Inequality::holds)) {
            Some(alt) => lines.extend(alt.iter().map(|q| (q.clone(), true))),
            None => {
                ok = false;
                for alt in alts {
                    for q in alt {
                        let h = q.holds();
                        lines.push((q, h));
                    }
                }
            }
        }
    }
    CheckReport { ok, lines }
}

/// Indices of ADPs in `candidates` satisfying condition (2) under `pol`.
pub fn strictly_decreasing(pol: &Interp, adps: &[Adp], candidates: &BTreeSet<usize>) -> BTreeSet<usize> {
    candidates
        .iter()
        .copied()
        .filter(|&i| {
            condition_two(i, &adps[i], pol)
                .iter()
                .any(|alt| alt.iter().all(Inequality::holds))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Backend {
    Internal,
    /// External SMT-LIB2 solver command line, reading the script on stdin.
    Smt(String),
}

#[derive(Clone, Debug)]
pub struct RpConfig {
    pub max_coeff: i128,
    /// 1 for linear templates, 2 to add pairwise products.
    pub degree: u32,
    pub backend: Backend,
    /// Node budget per solver call.
    pub max_nodes: u64,
    pub deadline: Option<Instant>,
}

impl Default for RpConfig {
    fn default() -> Self {
        RpConfig {
            max_coeff: 3,
            degree: 1,
            backend: Backend::Internal,
            max_nodes: 200_000,
            deadline: None,
        }
    }
}

/// A template interpretation with one unknown per coefficient.
#[derive(Clone, Debug)]
pub struct Template {
    pub interp: Interp,
    /// Unknown id to `(symbol, annotated, coefficient index)`.
    pub names: BTreeMap<u32, (Name, bool, usize)>,
}

impl Template {
    pub fn new(symbols: &BTreeSet<(Name, bool, usize)>, degree: u32) -> Template {
        let mut interp = Interp::default();
        let mut names = BTreeMap::new();
        let mut next = 0u32;
        for (sym, ann, arity) in symbols {
            let mut monos: Vec<Vec<u32>> = vec![vec![]];
            monos.extend((1..=*arity as u32).map(|i| vec![i]));
            if degree >= 2 {
                for i in 1..=*arity as u32 {
                    for j in i + 1..=*arity as u32 {
                        monos.push(vec![i, j]);
                    }
                }
            }
            let mut p = Poly::zero();
            for (k, m) in monos.into_iter().enumerate() {
                let mono = m.into_iter().fold(Poly::var(PVar::Unknown(next)), |acc, i| {
                    acc.mul(&Poly::var(PVar::Arg(i)))
                });
                p = p.add(&mono);
                names.insert(next, (sym.clone(), *ann, k));
                next += 1;
            }
            interp.map.insert((sym.clone(), *ann), p);
        }
        Template { interp, names }
    }

    /// `(symbol, annotated, arity)` for every symbol occurrence in `adps`,
    /// plus the annotated lhs roots.
    pub fn symbols_of(adps: &[Adp]) -> BTreeSet<(Name, bool, usize)> {
        let mut out = BTreeSet::new();
        let mut visit = |t: &Term| {
            t.visit(&mut |s| {
                if let Term::App { sym, args, .. } = s {
                    out.insert((sym.clone(), false, args.len()));
                }
            });
            for (_, s) in t.annotated_subterms() {
                if let Term::App { sym, args, .. } = s {
                    out.insert((sym, true, args.len()));
                }
            }
        };
        for a in adps {
            visit(&a.lhs.sharp_root());
            visit(&a.lhs);
            for r in a.rhs.terms() {
                visit(r);
            }
        }
        out
    }

    pub fn smt_name(&self, k: u32) -> String {
        let (sym, ann, i) = &self.names[&k];
        if *ann {
            format!("c_{sym}#_{i}")
        } else {
            format!("c_{sym}_{i}")
        }
    }
}

/// A found interpretation with its (maximal) strict set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RpSolution {
    pub interp: Interp,
    pub strict: BTreeSet<usize>,
}

/// The search problem for a fixed template and a set of required strict
/// ADPs; `at_least_one` asks for some strict ADP among `required`.
fn build_csp(adps: &[Adp], tpl: &Template, required: &BTreeSet<usize>, at_least_one: bool, bound: i128) -> Csp {
    let cs = gen_constraints(adps, &tpl.interp, required);
    let mut csp = Csp {
        domains: tpl.names.keys().map(|k| (*k, bound)).collect(),
        hard: cs.hard.iter().flat_map(Inequality::coefficient_constraints).collect(),
        groups: Vec::new(),
    };
    let to_alt = |alt: &Vec<Inequality>| -> Vec<Constraint> {
        alt.iter().flat_map(Inequality::coefficient_constraints).collect()
    };
    if at_least_one {
        csp.groups.push(cs.strict.iter().flat_map(|(_, alts)| alts.iter().map(to_alt)).collect());
    } else {
        for (_, alts) in &cs.strict {
            csp.groups.push(alts.iter().map(to_alt).collect());
        }
    }
    csp
}

fn run(csp: &Csp, tpl: &Template, config: &RpConfig) -> Option<BTreeMap<u32, i128>> {
    let out = match &config.backend {
        Backend::Internal => csp.solve(&Limits {
            max_nodes: config.max_nodes,
            deadline: config.deadline,
        }),
        Backend::Smt(cmd) => smt::solve_external(csp, &|k| tpl.smt_name(k), cmd, config.deadline),
    };
    match out {
        Outcome::Sat { model, .. } => Some(model),
        Outcome::Unsat | Outcome::Unknown => None,
    }
}

/// Searches an interpretation within the template space of `config` that
/// makes at least one of `candidates` strict, then greedily enlarges the
/// strict set one ADP at a time until no further ADP can be added.
pub fn find_interp(adps: &[Adp], candidates: &BTreeSet<usize>, config: &RpConfig) -> Option<RpSolution> {
    if candidates.is_empty() {
        return None;
    }
    let tpl = Template::new(&Template::symbols_of(adps), config.degree);
    let csp = build_csp(adps, &tpl, candidates, true, config.max_coeff);
    let mut model = run(&csp, &tpl, config)?;
    let mut interp = tpl.interp.instantiate(&model);
    let mut strict = strictly_decreasing(&interp, adps, candidates);
    for &i in candidates {
        if strict.contains(&i) {
            continue;
        }
        let mut req = strict.clone();
        req.insert(i);
        let csp = build_csp(adps, &tpl, &req, false, config.max_coeff);
        if let Some(m) = run(&csp, &tpl, config) {
            model = m;
            interp = tpl.interp.instantiate(&model);
            strict = strictly_decreasing(&interp, adps, candidates);
        }
    }
    debug_assert!(check_interp(&interp, adps, &strict).ok);
    Some(RpSolution { interp, strict })
}

/// Reduction pair processor. For AST and iAST the result is
/// `P≥ ∪ ♭(P>)`; for bAST, with conditions on `P` only, it is
/// `(I ∪ P>, P≥ ∪ ♭(P>))`. `None` if no interpretation is found.
pub fn proc_rp(p: &AdpProblem, config: &RpConfig) -> Option<(AdpProblem, RpSolution)> {
    let candidates: BTreeSet<usize> = (0..p.adps.len()).filter(|&i| p.adps[i].has_annotations()).collect();
    let sol = find_interp(&p.adps, &candidates, config)?;
    Some((apply_rp(p, &sol.strict), sol))
}

/// The processor result for a given strict set.
pub fn apply_rp(p: &AdpProblem, strict: &BTreeSet<usize>) -> AdpProblem {
    let adps: Vec<Adp> = p
        .adps
        .iter()
        .enumerate()
        .map(|(i, a)| if strict.contains(&i) { a.flatten() } else { a.clone() })
        .collect();
    let reach = match p.goal {
        Goal::Bast => {
            let mut reach = p.reach().to_vec();
            reach.extend(strict.iter().map(|&i| p.adps[i].clone()));
            Some(reach)
        }
        _ => None,
    };
    AdpProblem::new(p.signature.clone(), p.goal, adps, reach)
}
