//! Dependency graphs over ADPs and their strongly connected components.
//!
//! Reachability `t#σ1 →* ℓ#σ2` is undecidable, so edges are estimated by
//! unifying an abstraction of `t` with a renamed copy of `ℓ`. Under full
//! rewriting the abstraction replaces every variable by a fresh one and
//! every subterm that could still become a redex by a fresh variable
//! (`tcap`). Under innermost rewriting variables are kept, since they are
//! instantiated by normal forms, and unifiers whose instantiated
//! left-hand sides are not in argument normal form are discarded.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::adp::{Adp, Strategy};
use crate::rewrite::anf;
use crate::term::{fresh_var, unify, Term};

/// Reachability estimation for one set of rules.
#[derive(Clone, Debug)]
pub struct Estimator {
    /// Left-hand sides of the rules usable below annotations, renamed apart.
    np_lhs: Vec<Term>,
    /// Left-hand sides defining argument normal forms.
    anf_lhs: Vec<Term>,
    mode: Strategy,
}

impl Estimator {
    pub fn new(np_lhs: Vec<Term>, anf_lhs: Vec<Term>, mode: Strategy) -> Self {
        Estimator {
            np_lhs: np_lhs.iter().map(Term::rename_apart).collect(),
            anf_lhs,
            mode,
        }
    }

    /// Estimation for an ADP set: flag-true ADPs rewrite below annotations,
    /// all ADPs define normal forms.
    pub fn for_adps(adps: &[Adp], mode: Strategy) -> Self {
        let np: Vec<Term> = adps.iter().filter(|a| a.flag).map(|a| a.lhs.clone()).collect();
        let all: Vec<Term> = adps.iter().map(|a| a.lhs.clone()).collect();
        Estimator::new(np, all, mode)
    }

    pub fn mode(&self) -> Strategy {
        self.mode
    }

    fn abstract_term(&self, t: &Term) -> Term {
        match t {
            Term::Var(_) => match self.mode {
                Strategy::Full => fresh_var(),
                Strategy::Innermost => t.clone(),
            },
            Term::App { sym, args, .. } => {
                let u = Term::App {
                    sym: sym.clone(),
                    annotated: false,
                    args: args.iter().map(|a| self.abstract_term(a)).collect(),
                };
                if self.np_lhs.iter().any(|l| unify(&u, l).is_some()) {
                    fresh_var()
                } else {
                    u
                }
            }
        }
    }

    /// The abstraction of `t`: root kept, every argument abstracted.
    pub fn cap(&self, t: &Term) -> Term {
        match t {
            Term::Var(_) => self.abstract_term(t),
            Term::App {
                sym,
                annotated,
                args,
            } => Term::App {
                sym: sym.clone(),
                annotated: *annotated,
                args: args.iter().map(|a| self.abstract_term(a)).collect(),
            },
        }
    }

    /// Whether an instance of `t#` (with `t` occurring in the rhs of an ADP
    /// with lhs `l1`) may rewrite to an instance of `l2#`.
    pub fn reaches(&self, t: &Term, l1: &Term, l2: &Term) -> bool {
        let t = t.flatten();
        if t.root() != l2.root() || t.args().len() != l2.args().len() {
            return false;
        }
        let capped = self.cap(&t);
        let l2r = l2.rename_apart();
        let Some(theta) = unify(&capped, &l2r) else {
            return false;
        };
        match self.mode {
            Strategy::Full => true,
            Strategy::Innermost => {
                anf(&l1.apply(&theta), self.anf_lhs.iter())
                    && anf(&l2r.apply(&theta), self.anf_lhs.iter())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGraph {
    pub nodes: Vec<Adp>,
    pub edges: BTreeSet<(usize, usize)>,
    pub mode: Strategy,
}

impl DependencyGraph {
    /// Graph over `nodes`, with rewriting below annotations by the
    /// flag-true nodes.
    pub fn build(nodes: &[Adp], mode: Strategy) -> Self {
        let est = Estimator::for_adps(nodes, mode);
        Self::build_with(nodes, &est)
    }

    pub fn build_with(nodes: &[Adp], est: &Estimator) -> Self {
        let mut edges = BTreeSet::new();
        for (i, a) in nodes.iter().enumerate() {
            let targets: Vec<Term> = a
                .rhs
                .terms()
                .flat_map(|r| r.annotated_subterms().into_iter().map(|(_, t)| t))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            for (j, b) in nodes.iter().enumerate() {
                if targets.iter().any(|t| est.reaches(t, &a.lhs, &b.lhs)) {
                    edges.insert((i, j));
                }
            }
        }
        DependencyGraph {
            nodes: nodes.to_vec(),
            edges,
            mode: est.mode(),
        }
    }

    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((i, 0)..(i + 1, 0)).map(|&(_, j)| j)
    }

    pub fn sccs(&self) -> Vec<Vec<usize>> {
        sccs(self.nodes.len(), &self.edges)
    }

    /// `reach[i]` holds every node reachable from `i` by a non-empty path.
    pub fn reachability(&self) -> Vec<BTreeSet<usize>> {
        reachability(self.nodes.len(), &self.edges)
    }

    /// DOT text: node labels are index and flag, edges sorted.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dependency_graph {\n");
        for (i, a) in self.nodes.iter().enumerate() {
            let label = format!("{i}:{}", a.flag);
            let tip = a.to_string().replace('"', "'");
            let _ = writeln!(out, "  n{i} [label=\"{label}\", tooltip=\"{tip}\"];");
        }
        for (i, j) in &self.edges {
            let _ = writeln!(out, "  n{i} -> n{j};");
        }
        out.push_str("}\n");
        out
    }
}

/// Nontrivial strongly connected components (maximal cycles), in
/// topological order, each sorted.
pub fn sccs(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<Vec<usize>> {
    let mut g: DiGraph<(), ()> = DiGraph::new();
    let idx: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for &(i, j) in edges {
        g.add_edge(idx[i], idx[j], ());
    }
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .rev()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|x| x.index()).collect();
            v.sort_unstable();
            v
        })
        .filter(|c| c.len() > 1 || edges.contains(&(c[0], c[0])))
        .collect();
    comps.dedup();
    comps
}

pub fn reachability(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<BTreeSet<usize>> {
    let mut succ = vec![Vec::new(); n];
    for &(i, j) in edges {
        succ[i].push(j);
    }
    (0..n)
        .map(|s| {
            let mut seen = BTreeSet::new();
            let mut stack: Vec<usize> = succ[s].clone();
            while let Some(v) = stack.pop() {
                if seen.insert(v) {
                    stack.extend(succ[v].iter().copied());
                }
            }
            seen
        })
        .collect()
}

/// All maximal sets `J` of nodes outside `target` such that every member
/// reaches `target` and any two distinct members are comparable under
/// reachability. Returns `[∅]` when nothing reaches `target`.
pub fn reaching_chains(
    n: usize,
    edges: &BTreeSet<(usize, usize)>,
    target: &BTreeSet<usize>,
) -> Vec<BTreeSet<usize>> {
    let reach = reachability(n, edges);
    let candidates: Vec<usize> = (0..n)
        .filter(|v| !target.contains(v) && reach[*v].iter().any(|w| target.contains(w)))
        .collect();
    if candidates.is_empty() {
        return vec![BTreeSet::new()];
    }
    // Equivalence classes of mutual reachability among the candidates.
    let mut class_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut classes: Vec<BTreeSet<usize>> = Vec::new();
    for &v in &candidates {
        if class_of.contains_key(&v) {
            continue;
        }
        let members: BTreeSet<usize> = candidates
            .iter()
            .copied()
            .filter(|&w| w == v || (reach[v].contains(&w) && reach[w].contains(&v)))
            .collect();
        for &w in &members {
            class_of.insert(w, classes.len());
        }
        classes.push(members);
    }
    let k = classes.len();
    let rep: Vec<usize> = classes.iter().map(|c| *c.iter().next().expect("nonempty")).collect();
    let less = |a: usize, b: usize| a != b && reach[rep[a]].contains(&rep[b]);
    // Covering relation of the strict order on classes.
    let covers: Vec<Vec<usize>> = (0..k)
        .map(|a| {
            (0..k)
                .filter(|&b| less(a, b) && !(0..k).any(|c| less(a, c) && less(c, b)))
                .collect()
        })
        .collect();
    let minimal: Vec<usize> = (0..k).filter(|&b| !(0..k).any(|a| less(a, b))).collect();
    let mut out: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
    let mut path = Vec::new();
    for m in minimal {
        chains(m, &covers, &mut path, &classes, &mut out);
    }
    out.into_iter().collect()
}

fn chains(
    c: usize,
    covers: &[Vec<usize>],
    path: &mut Vec<usize>,
    classes: &[BTreeSet<usize>],
    out: &mut BTreeSet<BTreeSet<usize>>,
) {
    path.push(c);
    if covers[c].is_empty() {
        out.insert(path.iter().flat_map(|&x| classes[x].iter().copied()).collect());
    } else {
        for &d in &covers[c] {
            chains(d, covers, path, classes, out);
        }
    }
    path.pop();
}
