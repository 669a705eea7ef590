//! Structural ADP processors: dependency graph, usable terms, usable rules
//! and probability removal.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::adp::{dp, np, Adp, AdpProblem, Goal, Strategy};
use crate::graph::{reaching_chains, DependencyGraph, Estimator};
use crate::nonprob::{dp_terminates, DpProblem, DpProof, DpResult};
use crate::redpair::RpConfig;
use crate::term::{Name, Position, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProcessorError {
    #[error("processor is unsound for goal {0}")]
    GoalUnsupported(Goal),
}

/// Result of the dependency graph processor.
#[derive(Clone, Debug)]
pub struct DgResult {
    pub graph: DependencyGraph,
    pub sccs: Vec<Vec<usize>>,
    /// One problem per SCC (for bAST possibly several per SCC).
    pub problems: Vec<AdpProblem>,
    /// bAST only: the graph over `I ∪ P` and, per problem, the SCC index
    /// and the chosen set `J` (indices into that graph's nodes).
    pub reach_graph: Option<DependencyGraph>,
    pub chains: Vec<(usize, BTreeSet<usize>)>,
}

fn restrict_to(adps: &[Adp], keep: &BTreeSet<usize>) -> Vec<Adp> {
    adps.iter()
        .enumerate()
        .map(|(i, a)| if keep.contains(&i) { a.clone() } else { a.flatten() })
        .collect()
}

/// `{P1 ∪ ♭(P∖P1), ..., Pn ∪ ♭(P∖Pn)}` for the SCCs `Pi`; for bAST
/// `{(J ∪ ♭(I∖J), Pi ∪ ♭(P∖Pi)) | J ∈ Pi↑}` where `Pi↑` holds the maximal
/// sets of pairwise comparable ADPs of `I ∪ P` reaching `Pi`.
pub fn proc_dg(p: &AdpProblem) -> DgResult {
    let graph = DependencyGraph::build(&p.adps, p.strategy());
    let sccs = graph.sccs();
    if p.goal != Goal::Bast {
        let problems = sccs
            .iter()
            .map(|c| {
                let keep: BTreeSet<usize> = c.iter().copied().collect();
                AdpProblem::new(p.signature.clone(), p.goal, restrict_to(&p.adps, &keep), None)
            })
            .collect();
        return DgResult {
            graph,
            sccs,
            problems,
            reach_graph: None,
            chains: Vec::new(),
        };
    }
    let all = p.all_adps();
    let offset = p.reach().len();
    let reach_graph = DependencyGraph::build(&all, Strategy::Full);
    let mut problems = Vec::new();
    let mut chains = Vec::new();
    for (k, c) in sccs.iter().enumerate() {
        let keep: BTreeSet<usize> = c.iter().copied().collect();
        let target: BTreeSet<usize> = c.iter().map(|i| offset + i).collect();
        let second = restrict_to(&p.adps, &keep);
        for j in reaching_chains(all.len(), &reach_graph.edges, &target) {
            let mut first: Vec<Adp> = j.iter().map(|&x| all[x].clone()).collect();
            first.extend(
                p.reach()
                    .iter()
                    .filter(|a| !j.iter().any(|&x| &all[x] == *a))
                    .map(Adp::flatten),
            );
            problems.push(AdpProblem::new(p.signature.clone(), p.goal, second.clone(), Some(first)));
            chains.push((k, j));
        }
    }
    DgResult {
        graph,
        sccs,
        problems,
        reach_graph: Some(reach_graph),
        chains,
    }
}

/// `Δ(s)`: annotated positions of `s` whose subterm may reach the lhs of an
/// ADP of `against` that still has annotations. In innermost mode `ctx` is
/// the lhs of the ADP containing `s`, used for normal-form side conditions.
pub fn usable_positions(s: &Term, ctx: &Term, against: &[Adp], mode: Strategy) -> BTreeSet<Position> {
    let est = Estimator::for_adps(against, mode);
    usable_positions_with(s, ctx, against, &est)
}

fn usable_positions_with(s: &Term, ctx: &Term, against: &[Adp], est: &Estimator) -> BTreeSet<Position> {
    s.annotated_subterms()
        .into_iter()
        .filter(|(_, t)| {
            against
                .iter()
                .any(|b| b.has_annotations() && est.reaches(t, ctx, &b.lhs))
        })
        .map(|(pos, _)| pos)
        .collect()
}

/// `t` with annotations kept exactly at `keep`.
pub fn keep_annotations(t: &Term, keep: &BTreeSet<Position>) -> Term {
    fn go(t: &Term, pos: &mut Vec<usize>, keep: &BTreeSet<Position>) -> Term {
        match t {
            Term::Var(_) => t.clone(),
            Term::App {
                sym,
                annotated,
                args,
            } => {
                let here = *annotated && keep.contains(&Position(pos.clone()));
                let args = args
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        pos.push(i + 1);
                        let r = go(a, pos, keep);
                        pos.pop();
                        r
                    })
                    .collect();
                Term::App {
                    sym: sym.clone(),
                    annotated: here,
                    args,
                }
            }
        }
    }
    go(t, &mut Vec::new(), keep)
}

/// `T_UT(X)`: every ADP of `adps` with only its usable annotations, with
/// usability judged against `against`.
pub fn transform_ut(adps: &[Adp], against: &[Adp], mode: Strategy) -> Vec<Adp> {
    let est = Estimator::for_adps(against, mode);
    adps.iter()
        .map(|a| Adp {
            lhs: a.lhs.clone(),
            rhs: a.rhs.map(|r| keep_annotations(r, &usable_positions_with(r, &a.lhs, against, &est))),
            flag: a.flag,
        })
        .collect()
}

/// Usable terms processor; for bAST `(T_UT(I ∪ P), T_UT(P))`, normalized.
pub fn proc_ut(p: &AdpProblem) -> AdpProblem {
    let mode = p.strategy();
    let adps = transform_ut(&p.adps, &p.adps, mode);
    let reach = p.reach.as_ref().map(|_| {
        let all = p.all_adps();
        transform_ut(&all, &all, mode)
    });
    AdpProblem::new(p.signature.clone(), p.goal, adps, reach)
}

/// Indices of the usable ADPs of `x`: the least set containing the
/// flag-true ADPs defining a symbol below an annotation, closed under the
/// symbols of their flattened right-hand sides.
pub fn usable_rules(x: &[Adp]) -> BTreeSet<usize> {
    let mut symbols: BTreeSet<Name> = BTreeSet::new();
    let mut todo: Vec<Name> = Vec::new();
    let add_symbols = |t: &Term, symbols: &mut BTreeSet<Name>, todo: &mut Vec<Name>| {
        t.visit(&mut |s| {
            if let Some(f) = s.root() {
                if symbols.insert(f.clone()) {
                    todo.push(f.clone());
                }
            }
        });
    };
    for a in x {
        for r in a.rhs.terms() {
            for (_, t) in r.annotated_subterms() {
                for arg in t.args() {
                    add_symbols(arg, &mut symbols, &mut todo);
                }
            }
        }
    }
    let mut usable = BTreeSet::new();
    while let Some(f) = todo.pop() {
        for (i, a) in x.iter().enumerate() {
            if a.flag && a.lhs.root() == Some(&f) && usable.insert(i) {
                for r in a.rhs.terms() {
                    add_symbols(&r.flatten(), &mut symbols, &mut todo);
                }
            }
        }
    }
    usable
}

/// Usable rules processor: flags of non-usable ADPs become false. For bAST
/// usability is computed on `I ∪ P` and applied to both components.
/// Unsound for AST and therefore refused.
pub fn proc_ur(p: &AdpProblem) -> Result<AdpProblem, ProcessorError> {
    match p.goal {
        Goal::Ast => Err(ProcessorError::GoalUnsupported(Goal::Ast)),
        Goal::Iast => {
            let u = usable_rules(&p.adps);
            let adps = p
                .adps
                .iter()
                .enumerate()
                .map(|(i, a)| a.with_flag(a.flag && u.contains(&i)))
                .collect();
            Ok(AdpProblem::new(p.signature.clone(), p.goal, adps, None))
        }
        Goal::Bast => {
            let all = p.all_adps();
            let u: BTreeSet<&Adp> = usable_rules(&all).into_iter().map(|i| &all[i]).collect();
            let set = |v: &[Adp]| -> Vec<Adp> { v.iter().map(|a| a.with_flag(a.flag && u.contains(a))).collect() };
            Ok(AdpProblem::new(
                p.signature.clone(),
                p.goal,
                set(&p.adps),
                Some(set(p.reach())),
            ))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PrOutcome {
    /// `(dp(P), np(P))` is (innermost) terminating; the problem is solved.
    Removed { dp: DpProblem, proof: DpProof },
    NotApplicable,
}

/// The DP problem `(dp(P), np(P))` for singleton problems.
pub fn dp_problem(p: &AdpProblem) -> Option<DpProblem> {
    let pairs = dp(&p.adps).ok()?;
    Some(DpProblem {
        pairs,
        rules: np(&p.adps),
        strategy: p.strategy(),
    })
}

/// Probability removal: applicable to problems whose distributions are all
/// trivial; succeeds if the classical back-end proves termination.
pub fn proc_pr(p: &AdpProblem, config: &RpConfig) -> PrOutcome {
    let Some(d) = dp_problem(p) else {
        return PrOutcome::NotApplicable;
    };
    match dp_terminates(&d, config) {
        DpResult::Terminating(proof) => PrOutcome::Removed { dp: d, proof },
        DpResult::Unknown => PrOutcome::NotApplicable,
    }
}
