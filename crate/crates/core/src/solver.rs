//! A small finite-domain solver for polynomial inequalities over bounded
//! natural unknowns, with disjunctive choice groups.
//!
//! Search is depth-first with interval bounds propagation: every
//! constraint `p ≥ k` prunes domain endpoints whose best-case value of `p`
//! falls short of `k`.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::poly::{PVar, Poly};

/// `poly ≥ bound`, where `poly` only mentions unknowns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub poly: Poly,
    pub bound: i128,
}

impl Constraint {
    pub fn geq(poly: Poly, bound: i128) -> Self {
        Constraint { poly, bound }
    }

    /// Whether the constraint holds under a full assignment.
    pub fn holds(&self, model: &BTreeMap<u32, i128>) -> bool {
        self.poly.eval(&|v| match v {
            PVar::Unknown(k) => model.get(k).copied().unwrap_or(0),
            _ => 0,
        }) >= self.bound
    }
}

/// Hard constraints plus groups of alternatives; a model satisfies every
/// hard constraint and, for each group, all constraints of at least one
/// alternative.
#[derive(Clone, Debug, Default)]
pub struct Csp {
    /// Inclusive upper bound of each unknown's domain (lower bound is 0).
    pub domains: BTreeMap<u32, i128>,
    pub hard: Vec<Constraint>,
    pub groups: Vec<Vec<Vec<Constraint>>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Values of all unknowns and the chosen alternative per group.
    Sat {
        model: BTreeMap<u32, i128>,
        choices: Vec<usize>,
    },
    Unsat,
    /// Node budget or deadline exhausted.
    Unknown,
}

#[derive(Clone, Copy, Debug)]
pub struct Limits {
    pub max_nodes: u64,
    pub deadline: Option<Instant>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_nodes: 2_000_000,
            deadline: None,
        }
    }
}

/// Dense representation: `(coefficient, [(var index, exponent)])`.
struct Compiled {
    terms: Vec<(i128, Vec<(usize, u32)>)>,
    vars: Vec<usize>,
    bound: i128,
}

#[derive(Clone)]
struct State {
    lo: Vec<i128>,
    hi: Vec<i128>,
    /// Active constraint ids not yet known to be entailed.
    active: Vec<usize>,
    choices: Vec<Option<usize>>,
}

struct Search<'a> {
    pool: Vec<Compiled>,
    /// Constraint ids per group alternative.
    groups: Vec<Vec<Vec<usize>>>,
    limits: &'a Limits,
    nodes: u64,
    aborted: bool,
}

fn term_range(coeff: i128, mono: &[(usize, u32)], lo: &[i128], hi: &[i128]) -> (i128, i128) {
    let mut pmin = 1i128;
    let mut pmax = 1i128;
    for &(v, e) in mono {
        pmin = pmin.saturating_mul(lo[v].saturating_pow(e));
        pmax = pmax.saturating_mul(hi[v].saturating_pow(e));
    }
    if coeff >= 0 {
        (coeff.saturating_mul(pmin), coeff.saturating_mul(pmax))
    } else {
        (coeff.saturating_mul(pmax), coeff.saturating_mul(pmin))
    }
}

impl Compiled {
    fn range(&self, lo: &[i128], hi: &[i128]) -> (i128, i128) {
        self.terms.iter().fold((0i128, 0i128), |(a, b), (c, m)| {
            let (x, y) = term_range(*c, m, lo, hi);
            (a.saturating_add(x), b.saturating_add(y))
        })
    }

    /// Best-case value with `v` fixed to `val`.
    fn max_with(&self, v: usize, val: i128, lo: &[i128], hi: &[i128]) -> i128 {
        let mut total = 0i128;
        for (c, m) in &self.terms {
            let mut pmin = 1i128;
            let mut pmax = 1i128;
            for &(w, e) in m {
                let (l, h) = if w == v { (val, val) } else { (lo[w], hi[w]) };
                pmin = pmin.saturating_mul(l.saturating_pow(e));
                pmax = pmax.saturating_mul(h.saturating_pow(e));
            }
            let best = if *c >= 0 {
                c.saturating_mul(pmax)
            } else {
                c.saturating_mul(pmin)
            };
            total = total.saturating_add(best);
        }
        total
    }
}

impl<'a> Search<'a> {
    fn feasible(&self, id: usize, st: &State) -> bool {
        let c = &self.pool[id];
        c.range(&st.lo, &st.hi).1 >= c.bound
    }

    /// Bounds propagation to a fixpoint; `false` on conflict.
    fn propagate(&self, st: &mut State) -> bool {
        loop {
            let mut changed = false;
            let mut keep = Vec::with_capacity(st.active.len());
            for &id in &st.active {
                let c = &self.pool[id];
                let (mn, mx) = c.range(&st.lo, &st.hi);
                if mx < c.bound {
                    return false;
                }
                if mn >= c.bound {
                    continue;
                }
                keep.push(id);
                for &v in &c.vars {
                    while st.lo[v] < st.hi[v] && c.max_with(v, st.lo[v], &st.lo, &st.hi) < c.bound {
                        st.lo[v] += 1;
                        changed = true;
                    }
                    while st.hi[v] > st.lo[v] && c.max_with(v, st.hi[v], &st.lo, &st.hi) < c.bound {
                        st.hi[v] -= 1;
                        changed = true;
                    }
                }
            }
            st.active = keep;
            // Groups with a single feasible alternative are committed.
            for g in 0..self.groups.len() {
                if st.choices[g].is_some() {
                    continue;
                }
                let alive: Vec<usize> = (0..self.groups[g].len())
                    .filter(|&a| self.groups[g][a].iter().all(|&id| self.feasible(id, st)))
                    .collect();
                match alive.as_slice() {
                    [] => return false,
                    [a] => {
                        st.choices[g] = Some(*a);
                        st.active.extend(self.groups[g][*a].iter().copied());
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn out_of_budget(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes > self.limits.max_nodes {
            self.aborted = true;
        }
        if self.nodes.is_multiple_of(1024) {
            if let Some(d) = self.limits.deadline {
                if Instant::now() >= d {
                    self.aborted = true;
                }
            }
        }
        self.aborted
    }

    fn solve(&mut self, mut st: State) -> Option<State> {
        if self.out_of_budget() {
            return None;
        }
        if !self.propagate(&mut st) {
            return None;
        }
        // Branch on an undecided group first, fewest live alternatives.
        let open = (0..self.groups.len())
            .filter(|&g| st.choices[g].is_none())
            .map(|g| {
                let alive: Vec<usize> = (0..self.groups[g].len())
                    .filter(|&a| self.groups[g][a].iter().all(|&id| self.feasible(id, &st)))
                    .collect();
                (g, alive)
            })
            .min_by_key(|(_, alive)| alive.len());
        if let Some((g, alive)) = open {
            for a in alive {
                let mut next = st.clone();
                next.choices[g] = Some(a);
                next.active.extend(self.groups[g][a].iter().copied());
                if let Some(done) = self.solve(next) {
                    return Some(done);
                }
                if self.aborted {
                    return None;
                }
            }
            return None;
        }
        // Branch on the unfixed variable occurring in most open constraints.
        let mut count: BTreeMap<usize, usize> = BTreeMap::new();
        for &id in &st.active {
            for &v in &self.pool[id].vars {
                if st.lo[v] < st.hi[v] {
                    *count.entry(v).or_insert(0) += 1;
                }
            }
        }
        let Some((&v, _)) = count
            .iter()
            .max_by_key(|(v, n)| (**n, std::cmp::Reverse(st.hi[**v] - st.lo[**v]), std::cmp::Reverse(**v)))
        else {
            // Every open constraint is decided by the current bounds only
            // if it is entailed; fix the rest at their lower bounds.
            let mut done = st.clone();
            done.hi = done.lo.clone();
            return if self.propagate(&mut done) { Some(done) } else { None };
        };
        for val in st.lo[v]..=st.hi[v] {
            let mut next = st.clone();
            next.lo[v] = val;
            next.hi[v] = val;
            if let Some(done) = self.solve(next) {
                return Some(done);
            }
            if self.aborted {
                return None;
            }
        }
        None
    }
}

impl Csp {
    pub fn solve(&self, limits: &Limits) -> Outcome {
        let mut ids: BTreeMap<u32, usize> = BTreeMap::new();
        let mut names: Vec<u32> = Vec::new();
        let mut register = |p: &Poly| {
            for k in p.unknowns() {
                ids.entry(k).or_insert_with(|| {
                    names.push(k);
                    names.len() - 1
                });
            }
        };
        for k in self.domains.keys() {
            register(&Poly::var(PVar::Unknown(*k)));
        }
        for c in &self.hard {
            register(&c.poly);
        }
        for g in &self.groups {
            for alt in g {
                for c in alt {
                    register(&c.poly);
                }
            }
        }
        let compile = |c: &Constraint| {
            let terms: Vec<(i128, Vec<(usize, u32)>)> = c
                .poly
                .terms()
                .map(|(m, coeff)| {
                    let mono = m
                        .iter()
                        .map(|(v, e)| match v {
                            PVar::Unknown(k) => (ids[k], *e),
                            // Non-unknown variables are not expected; treat as 0.
                            _ => (usize::MAX, *e),
                        })
                        .collect::<Vec<_>>();
                    (coeff, mono)
                })
                .filter(|(_, m)| m.iter().all(|(v, _)| *v != usize::MAX))
                .collect();
            let mut vars: Vec<usize> = terms.iter().flat_map(|(_, m)| m.iter().map(|(v, _)| *v)).collect();
            vars.sort_unstable();
            vars.dedup();
            Compiled {
                terms,
                vars,
                bound: c.bound,
            }
        };
        let mut pool = Vec::new();
        let mut active = Vec::new();
        for c in &self.hard {
            active.push(pool.len());
            pool.push(compile(c));
        }
        let mut groups = Vec::new();
        for g in &self.groups {
            let mut alts = Vec::new();
            for alt in g {
                let mut idl = Vec::new();
                for c in alt {
                    idl.push(pool.len());
                    pool.push(compile(c));
                }
                alts.push(idl);
            }
            groups.push(alts);
        }
        let n = names.len();
        let st = State {
            lo: vec![0; n],
            hi: names
                .iter()
                .map(|k| self.domains.get(k).copied().unwrap_or(0).max(0))
                .collect(),
            active,
            choices: vec![None; groups.len()],
        };
        let mut search = Search {
            pool,
            groups,
            limits,
            nodes: 0,
            aborted: false,
        };
        match search.solve(st) {
            Some(done) => Outcome::Sat {
                model: names.iter().enumerate().map(|(i, k)| (*k, done.lo[i])).collect(),
                choices: done.choices.into_iter().map(|c| c.unwrap_or(0)).collect(),
            },
            None if search.aborted => Outcome::Unknown,
            None => Outcome::Unsat,
        }
    }
}
