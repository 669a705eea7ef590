//! Executable semantics used as an oracle: Monte-Carlo sampling of rewrite
//! runs and exact bounded expansion of rewrite sequence trees and chain
//! trees. Nothing here contributes to proofs.
//!
//! The nondeterminism of rewriting (which redex, which rule) is resolved
//! by a [`Policy`]. Cut-off runs count as non-terminating, so every
//! estimate is a lower bound on the termination probability under that
//! policy.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adp::Adp;
use crate::ptrs::{MultiDistribution, PRule, Ptrs};
use crate::rational::{lcm_denominators, Rational, RationalError};
use crate::rewrite::{ptrs_steps, Case, rewrite_full, rewrite_innermost, VrfMode};
use crate::term::{Name, Position, Signature, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("at most 64 rules are supported by the sampler, got {0}")]
    TooManyRules(usize),
    #[error("start term must not contain annotations")]
    AnnotatedStart,
    #[error(transparent)]
    Rational(#[from] RationalError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositionStrategy {
    LeftmostInnermost,
    LeftmostOutermost,
    /// Uniform among the candidate redexes. Exact expansion treats this
    /// as leftmost-outermost.
    Random,
}

/// Resolves the choice of redex and rule.
///
/// Position-first policies pick a position by `position` and then the
/// best-ranked rule matching there; rule-first policies pick the
/// best-ranked rule that has a redex and then a position for it. Rules are
/// ranked by `rule_priority` (indices), then by index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub position: PositionStrategy,
    pub rule_priority: Option<Vec<usize>>,
    pub rule_first: bool,
}

impl Policy {
    pub fn leftmost_outermost() -> Self {
        Policy {
            position: PositionStrategy::LeftmostOutermost,
            rule_priority: None,
            rule_first: false,
        }
    }

    pub fn leftmost_innermost() -> Self {
        Policy {
            position: PositionStrategy::LeftmostInnermost,
            ..Policy::leftmost_outermost()
        }
    }

    pub fn random() -> Self {
        Policy {
            position: PositionStrategy::Random,
            ..Policy::leftmost_outermost()
        }
    }

    /// Rule-first, leftmost-outermost, with the given rule ranking.
    pub fn prioritized(rules: Vec<usize>) -> Self {
        Policy {
            position: PositionStrategy::LeftmostOutermost,
            rule_priority: Some(rules),
            rule_first: true,
        }
    }

    fn ranks(&self, n: usize) -> Vec<usize> {
        let mut rank = vec![usize::MAX; n];
        let mut next = 0;
        if let Some(p) = &self.rule_priority {
            for &r in p {
                if r < n && rank[r] == usize::MAX {
                    rank[r] = next;
                    next += 1;
                }
            }
        }
        for r in rank.iter_mut() {
            if *r == usize::MAX {
                *r = next;
                next += 1;
            }
        }
        rank
    }

    /// Chooses among candidate `(position, rule)` pairs; `None` if empty.
    /// Innermost means no other candidate lies strictly below.
    pub fn choose(&self, cands: &[(Position, usize)], n_rules: usize, rng: Option<&mut ChaCha8Rng>) -> Option<usize> {
        if cands.is_empty() {
            return None;
        }
        let rank = self.ranks(n_rules);
        let mut idx: Vec<usize> = (0..cands.len()).collect();
        if self.position == PositionStrategy::LeftmostInnermost {
            idx.retain(|&i| !cands.iter().any(|(q, _)| cands[i].0.is_strictly_above(q)));
        }
        if self.rule_first {
            let best = idx.iter().map(|&i| rank[cands[i].1]).min()?;
            idx.retain(|&i| rank[cands[i].1] == best);
        }
        match (self.position, rng) {
            (PositionStrategy::Random, Some(rng)) => {
                let mut positions: Vec<&Position> = idx.iter().map(|&i| &cands[i].0).collect();
                positions.sort();
                positions.dedup();
                let p = positions[rng.gen_range(0..positions.len())].clone();
                idx.into_iter()
                    .filter(|&i| cands[i].0 == p)
                    .min_by_key(|&i| rank[cands[i].1])
            }
            _ => idx.into_iter().min_by_key(|&i| (cands[i].0.clone(), rank[cands[i].1])),
        }
    }
}

/// `splitmix64` mixing of `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `i` under master seed `master`.
pub fn run_seed(master: u64, i: u64) -> u64 {
    splitmix64(master ^ splitmix64(i))
}

/// Draws a branch index with exact rational weights.
fn draw(dist: &MultiDistribution, rng: &mut ChaCha8Rng) -> Result<usize, SimError> {
    let l = lcm_denominators(dist.branches.iter().map(|(p, _)| p.value()))?;
    let mut r = rng.gen_range(0..l);
    for (j, (p, _)) in dist.branches.iter().enumerate() {
        let w = p.value().numer() * (l / p.value().denom());
        if r < w {
            return Ok(j);
        }
        r -= w;
    }
    Ok(dist.branches.len() - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub steps: usize,
    pub terminated: bool,
}

// ---------------------------------------------------------------------------
// Arena-based sampler.

const NONE: u32 = u32::MAX;

/// Which subtree summaries must stay exact along the ancestors.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Track {
    /// Whether a subtree holds any redex.
    Any,
    /// Rule masks.
    Rules,
    /// Rule masks and redex counts.
    Counts,
}

#[derive(Clone, Debug)]
struct Node {
    sym: u32,
    children: Vec<u32>,
    parent: u32,
    /// Rules matching at this node.
    own: u64,
    /// Union of `own` over the subtree.
    sub: u64,
    /// Number of redex nodes in the subtree.
    cnt: u32,
}

#[derive(Clone, Debug)]
enum Pat {
    Var(usize),
    App(u32, Vec<Pat>),
}

struct CompiledRule {
    lhs: Pat,
    nvars: usize,
    branches: Vec<(i64, Pat)>,
    denom: i64,
}

/// A PTRS compiled for fast sampling.
pub struct Sampler {
    symbols: HashMap<(Name, bool), u32>,
    rules: Vec<CompiledRule>,
    /// Ancestors closer than this to a rewritten node may change their
    /// redex status: the highest lhs height, unbounded for non-left-linear
    /// rules.
    window: usize,
    max_nodes: usize,
}

struct Arena {
    nodes: Vec<Node>,
    root: u32,
}

fn intern(symbols: &mut HashMap<(Name, bool), u32>, name: &Name, var: bool) -> u32 {
    let n = symbols.len() as u32;
    *symbols.entry((name.clone(), var)).or_insert(n)
}

fn names(symbols: &HashMap<(Name, bool), u32>) -> Vec<(Name, bool)> {
    let mut v = vec![(Name::from(""), false); symbols.len()];
    for ((n, var), id) in symbols {
        v[*id as usize] = (n.clone(), *var);
    }
    v
}

fn height(p: &Pat) -> usize {
    match p {
        Pat::Var(_) => 0,
        Pat::App(_, a) => 1 + a.iter().map(height).max().unwrap_or(0),
    }
}

impl Sampler {
    pub fn new(r: &Ptrs) -> Result<Self, SimError> {
        if r.rules.len() > 64 {
            return Err(SimError::TooManyRules(r.rules.len()));
        }
        let mut s = Sampler {
            symbols: HashMap::new(),
            rules: Vec::new(),
            window: 0,
            max_nodes: 4_000_000,
        };
        for rule in &r.rules {
            let c = s.compile_rule(rule)?;
            s.window = s.window.max(height(&c.lhs));
            s.rules.push(c);
        }
        if !r.is_left_linear() {
            s.window = usize::MAX;
        }
        Ok(s)
    }

    fn compile_rule(&mut self, rule: &PRule) -> Result<CompiledRule, SimError> {
        let mut vars: Vec<Name> = Vec::new();
        let lhs = self.pattern(&rule.lhs, &mut vars);
        let denom = lcm_denominators(rule.rhs.branches.iter().map(|(p, _)| p.value()))?;
        let branches = rule
            .rhs
            .branches
            .iter()
            .map(|(p, t)| {
                let w = p.value().numer() * (denom / p.value().denom());
                (w, self.pattern(t, &mut vars))
            })
            .collect();
        Ok(CompiledRule {
            lhs,
            nvars: vars.len(),
            branches,
            denom,
        })
    }

    fn pattern(&mut self, t: &Term, vars: &mut Vec<Name>) -> Pat {
        match t {
            Term::Var(x) => match vars.iter().position(|y| y == x) {
                Some(i) => Pat::Var(i),
                None => {
                    vars.push(x.clone());
                    Pat::Var(vars.len() - 1)
                }
            },
            Term::App { sym, args, .. } => {
                let id = intern(&mut self.symbols, sym, false);
                Pat::App(id, args.iter().map(|a| self.pattern(a, vars)).collect())
            }
        }
    }

    fn fresh(&self, a: &mut Arena, sym: u32, children: Vec<u32>) -> u32 {
        let id = a.nodes.len() as u32;
        for &c in &children {
            a.nodes[c as usize].parent = id;
        }
        a.nodes.push(Node {
            sym,
            children,
            parent: NONE,
            own: 0,
            sub: 0,
            cnt: 0,
        });
        self.refresh_own(a, id);
        self.refresh_sub(a, id);
        id
    }

    fn equal(a: &Arena, x: u32, y: u32) -> bool {
        let (nx, ny) = (&a.nodes[x as usize], &a.nodes[y as usize]);
        nx.sym == ny.sym
            && nx.children.len() == ny.children.len()
            && nx.children.iter().zip(&ny.children).all(|(&c, &d)| Self::equal(a, c, d))
    }

    fn matches(&self, a: &Arena, n: u32, p: &Pat, binds: &mut [u32]) -> bool {
        match p {
            Pat::Var(i) => {
                if binds[*i] == NONE {
                    binds[*i] = n;
                    true
                } else {
                    Self::equal(a, binds[*i], n)
                }
            }
            Pat::App(f, args) => {
                let node = &a.nodes[n as usize];
                node.sym == *f
                    && node.children.len() == args.len()
                    && node
                        .children
                        .iter()
                        .zip(args)
                        .all(|(&c, q)| self.matches(a, c, q, binds))
            }
        }
    }

    fn refresh_own(&self, a: &mut Arena, n: u32) {
        let mut own = 0u64;
        let mut binds = Vec::new();
        for (k, r) in self.rules.iter().enumerate() {
            binds.clear();
            binds.resize(r.nvars, NONE);
            if self.matches(a, n, &r.lhs, &mut binds) {
                own |= 1 << k;
            }
        }
        a.nodes[n as usize].own = own;
    }

    fn refresh_sub(&self, a: &mut Arena, n: u32) {
        let node = &a.nodes[n as usize];
        let mut sub = node.own;
        let mut cnt = u32::from(node.own != 0);
        for &c in &node.children {
            let ch = &a.nodes[c as usize];
            sub |= ch.sub;
            cnt += ch.cnt;
        }
        let node = &mut a.nodes[n as usize];
        node.sub = sub;
        node.cnt = cnt;
    }

    fn copy(&self, a: &mut Arena, n: u32) -> u32 {
        let node = a.nodes[n as usize].clone();
        let children: Vec<u32> = node.children.iter().map(|&c| self.copy(a, c)).collect();
        let id = a.nodes.len() as u32;
        for &c in &children {
            a.nodes[c as usize].parent = id;
        }
        a.nodes.push(Node {
            children,
            parent: NONE,
            ..node
        });
        id
    }

    fn build(&self, a: &mut Arena, p: &Pat, binds: &[u32], used: &mut [bool]) -> u32 {
        match p {
            Pat::Var(i) => {
                if used[*i] {
                    self.copy(a, binds[*i])
                } else {
                    used[*i] = true;
                    binds[*i]
                }
            }
            Pat::App(f, args) => {
                let children = args.iter().map(|q| self.build(a, q, binds, used)).collect();
                self.fresh(a, *f, children)
            }
        }
    }

    /// Replaces node `n` by an instance of branch `j` of rule `k` and
    /// returns the new node. Ancestor data beyond what `track` demands may
    /// go stale; updating stops once the tracked data no longer changes.
    fn rewrite(&self, a: &mut Arena, n: u32, k: usize, j: usize, track: Track) -> u32 {
        let rule = &self.rules[k];
        let mut binds = vec![NONE; rule.nvars];
        let ok = self.matches(a, n, &rule.lhs, &mut binds);
        debug_assert!(ok);
        let mut used = vec![false; rule.nvars];
        let new = self.build(a, &rule.branches[j].1, &binds, &mut used);
        let parent = a.nodes[n as usize].parent;
        a.nodes[new as usize].parent = parent;
        if parent == NONE {
            a.root = new;
            return new;
        }
        for c in a.nodes[parent as usize].children.iter_mut() {
            if *c == n {
                *c = new;
            }
        }
        let mut up = parent;
        let mut dist = 1;
        while up != NONE {
            if dist < self.window {
                self.refresh_own(a, up);
            } else if track != Track::Counts {
                let old = a.nodes[up as usize].sub;
                self.refresh_sub(a, up);
                let new = a.nodes[up as usize].sub;
                if new == old || (track == Track::Any && (new != 0) == (old != 0)) {
                    break;
                }
                up = a.nodes[up as usize].parent;
                continue;
            }
            self.refresh_sub(a, up);
            up = a.nodes[up as usize].parent;
            dist += 1;
        }
        new
    }

    /// Next redex for position-first leftmost policies, given the node
    /// created by the previous step. Nodes left of it hold no redex, and
    /// its ancestors were no redexes for outermost policies before the
    /// step; only the window above it can have changed.
    fn next_from(&self, a: &Arena, new: u32, outermost: bool) -> Option<u32> {
        if outermost {
            let mut window = Vec::new();
            let mut up = a.nodes[new as usize].parent;
            while up != NONE && window.len() + 1 < self.window {
                window.push(up);
                up = a.nodes[up as usize].parent;
            }
            if let Some(&n) = window.iter().rev().find(|&&n| a.nodes[n as usize].own != 0) {
                return Some(n);
            }
        }
        if let Some(n) = Self::descend(a, new, u64::MAX, outermost) {
            return Some(n);
        }
        let mut child = new;
        let mut up = a.nodes[new as usize].parent;
        while up != NONE {
            let node = &a.nodes[up as usize];
            let at = node.children.iter().position(|&c| c == child).expect("child of parent");
            if let Some(&c) = node.children[at + 1..].iter().find(|&&c| a.nodes[c as usize].sub != 0) {
                return Self::descend(a, c, u64::MAX, outermost);
            }
            if !outermost && node.own != 0 {
                return Some(up);
            }
            child = up;
            up = node.parent;
        }
        None
    }

    fn best_rule(&self, own: u64, rank: &[usize]) -> usize {
        (0..self.rules.len())
            .filter(|k| own & (1 << k) != 0)
            .min_by_key(|&k| rank[k])
            .expect("redex has a rule")
    }

    fn descend(a: &Arena, mut n: u32, mask: u64, outermost: bool) -> Option<u32> {
        if a.nodes[n as usize].sub & mask == 0 {
            return None;
        }
        loop {
            let node = &a.nodes[n as usize];
            if outermost && node.own & mask != 0 {
                return Some(n);
            }
            match node.children.iter().find(|&&c| a.nodes[c as usize].sub & mask != 0) {
                Some(&c) => n = c,
                None => return Some(n),
            }
        }
    }

    fn nth_redex(a: &Arena, mut n: u32, mut r: u32) -> u32 {
        loop {
            let node = &a.nodes[n as usize];
            if node.own != 0 {
                if r == 0 {
                    return n;
                }
                r -= 1;
            }
            let mut next = NONE;
            for &c in &node.children {
                let cnt = a.nodes[c as usize].cnt;
                if r < cnt {
                    next = c;
                    break;
                }
                r -= cnt;
            }
            n = next;
        }
    }

    /// All redex nodes in preorder with their rule masks.
    fn collect(a: &Arena, n: u32, out: &mut Vec<(u32, bool)>) {
        let node = &a.nodes[n as usize];
        if node.sub == 0 {
            return;
        }
        if node.own != 0 {
            let innermost = node.children.iter().all(|&c| a.nodes[c as usize].sub == 0);
            out.push((n, innermost));
        }
        for &c in &node.children {
            Self::collect(a, c, out);
        }
    }

    fn pick(&self, a: &Arena, policy: &Policy, rank: &[usize], rng: &mut ChaCha8Rng) -> Option<(u32, usize)> {
        let root = a.root;
        if a.nodes[root as usize].sub == 0 {
            return None;
        }
        let best_rule = |own: u64| self.best_rule(own, rank);
        match (policy.rule_first, policy.position) {
            (false, PositionStrategy::LeftmostOutermost) => {
                let n = Self::descend(a, root, u64::MAX, true)?;
                Some((n, best_rule(a.nodes[n as usize].own)))
            }
            (false, PositionStrategy::LeftmostInnermost) => {
                let n = Self::descend(a, root, u64::MAX, false)?;
                Some((n, best_rule(a.nodes[n as usize].own)))
            }
            (false, PositionStrategy::Random) => {
                // Same integer type as the reference sampler, so both draw alike.
                let r = rng.gen_range(0..a.nodes[root as usize].cnt as usize) as u32;
                let n = Self::nth_redex(a, root, r);
                Some((n, best_rule(a.nodes[n as usize].own)))
            }
            (true, PositionStrategy::LeftmostOutermost) => {
                let mut order: Vec<usize> = (0..self.rules.len()).collect();
                order.sort_by_key(|&k| rank[k]);
                order
                    .into_iter()
                    .find_map(|k| Self::descend(a, root, 1 << k, true).map(|n| (n, k)))
            }
            (true, strategy) => {
                let mut all = Vec::new();
                Self::collect(a, root, &mut all);
                if strategy == PositionStrategy::LeftmostInnermost {
                    all.retain(|(_, inner)| *inner);
                }
                let k = all
                    .iter()
                    .flat_map(|(n, _)| {
                        let own = a.nodes[*n as usize].own;
                        (0..self.rules.len()).filter(move |k| own & (1 << k) != 0)
                    })
                    .min_by_key(|&k| rank[k])?;
                all.retain(|(n, _)| a.nodes[*n as usize].own & (1 << k) != 0);
                let i = if strategy == PositionStrategy::Random {
                    rng.gen_range(0..all.len())
                } else {
                    0
                };
                Some((all[i].0, k))
            }
        }
    }

    fn to_term(&self, a: &Arena, n: u32, names: &[(Name, bool)]) -> Term {
        let node = &a.nodes[n as usize];
        let (name, var) = &names[node.sym as usize];
        if *var {
            Term::Var(name.clone())
        } else {
            Term::App {
                sym: name.clone(),
                annotated: false,
                args: node.children.iter().map(|&c| self.to_term(a, c, names)).collect(),
            }
        }
    }

    /// One run from `start`, with the trajectory's terms if `trace`.
    fn run(&self, start: &Term, policy: &Policy, max_steps: usize, seed: u64, trace: bool) -> (RunOutcome, Vec<Term>) {
        // The start term may contain symbols the rules do not mention.
        let mut symbols = self.symbols.clone();
        let mut arena = Arena {
            nodes: Vec::new(),
            root: NONE,
        };
        arena.root = self.load(&mut arena, start, &mut symbols);
        let names = names(&symbols);
        let rank = policy.ranks(self.rules.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        let mut steps = 0;
        let cursor = !policy.rule_first && policy.position != PositionStrategy::Random;
        let mut last: Option<u32> = None;
        let track = if cursor {
            Track::Any
        } else if policy.rule_first {
            Track::Rules
        } else {
            Track::Counts
        };
        loop {
            if trace {
                terms.push(self.to_term(&arena, arena.root, &names));
            }
            let choice = match last {
                Some(new) if cursor => self
                    .next_from(&arena, new, policy.position == PositionStrategy::LeftmostOutermost)
                    .map(|n| (n, self.best_rule(arena.nodes[n as usize].own, &rank))),
                _ => self.pick(&arena, policy, &rank, &mut rng),
            };
            let Some((n, k)) = choice else {
                return (
                    RunOutcome {
                        seed,
                        steps,
                        terminated: true,
                    },
                    terms,
                );
            };
            if steps >= max_steps || arena.nodes.len() > self.max_nodes {
                return (
                    RunOutcome {
                        seed,
                        steps,
                        terminated: false,
                    },
                    terms,
                );
            }
            let rule = &self.rules[k];
            let mut r = rng.gen_range(0..rule.denom);
            let mut j = rule.branches.len() - 1;
            for (b, (w, _)) in rule.branches.iter().enumerate() {
                if r < *w {
                    j = b;
                    break;
                }
                r -= w;
            }
            last = Some(self.rewrite(&mut arena, n, k, j, track));
            steps += 1;
        }
    }

    fn load(&self, a: &mut Arena, t: &Term, symbols: &mut HashMap<(Name, bool), u32>) -> u32 {
        let (sym, args) = match t {
            Term::Var(x) => (intern(symbols, x, true), Vec::new()),
            Term::App { sym, args, .. } => (
                intern(symbols, sym, false),
                args.iter().map(|x| self.load(a, x, symbols)).collect(),
            ),
        };
        self.fresh(a, sym, args)
    }

    /// One sampled run; cut off after `max_steps` steps.
    pub fn sample(&self, start: &Term, policy: &Policy, max_steps: usize, seed: u64) -> RunOutcome {
        self.run(start, policy, max_steps, seed, false).0
    }

    /// One sampled run with the visited terms.
    pub fn trajectory(&self, start: &Term, policy: &Policy, max_steps: usize, seed: u64) -> (RunOutcome, Vec<Term>) {
        self.run(start, policy, max_steps, seed, true)
    }
}

fn check_start(start: &Term) -> Result<(), SimError> {
    if start.has_annotations() {
        Err(SimError::AnnotatedStart)
    } else {
        Ok(())
    }
}

/// One probabilistic trajectory from `start`.
pub fn sample_run(r: &Ptrs, start: &Term, policy: &Policy, max_steps: usize, seed: u64) -> Result<RunOutcome, SimError> {
    check_start(start)?;
    Ok(Sampler::new(r)?.sample(start, policy, max_steps, seed))
}

/// Reference implementation of [`sample_run`] on plain terms (slow); uses
/// the same random choices and returns the visited terms.
pub fn sample_run_reference(
    r: &Ptrs,
    start: &Term,
    policy: &Policy,
    max_steps: usize,
    seed: u64,
) -> Result<(RunOutcome, Vec<Term>), SimError> {
    check_start(start)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = start.clone();
    let mut terms = Vec::new();
    let mut steps = 0;
    loop {
        terms.push(t.clone());
        let all = ptrs_steps(&t, &r.rules, false);
        let cands: Vec<(Position, usize)> = all.iter().map(|s| (s.position.clone(), s.rule)).collect();
        let Some(i) = policy.choose(&cands, r.rules.len(), Some(&mut rng)) else {
            return Ok((
                RunOutcome {
                    seed,
                    steps,
                    terminated: true,
                },
                terms,
            ));
        };
        if steps >= max_steps {
            return Ok((
                RunOutcome {
                    seed,
                    steps,
                    terminated: false,
                },
                terms,
            ));
        }
        let j = draw(&all[i].result, &mut rng)?;
        t = all[i].result.branches[j].1.clone();
        steps += 1;
    }
}

/// Monte-Carlo estimate of the termination probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub runs: usize,
    pub terminated: usize,
    pub probability: f64,
    /// 95% normal-approximation half-width.
    pub half_width: f64,
    pub outcomes: Vec<RunOutcome>,
}

impl Estimate {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,steps,terminated\n");
        for o in &self.outcomes {
            let _ = writeln!(out, "{},{},{}", o.seed, o.steps, o.terminated);
        }
        out
    }
}

/// Independent runs in parallel; run `i` uses seed `run_seed(seed, i)`, so
/// results do not depend on scheduling.
pub fn estimate_termination_prob(
    r: &Ptrs,
    start: &Term,
    policy: &Policy,
    runs: usize,
    max_steps: usize,
    seed: u64,
) -> Result<Estimate, SimError> {
    check_start(start)?;
    let sampler = Sampler::new(r)?;
    let outcomes: Vec<RunOutcome> = (0..runs.max(1) as u64)
        .into_par_iter()
        .map(|i| sampler.sample(start, policy, max_steps, run_seed(seed, i)))
        .collect();
    let terminated = outcomes.iter().filter(|o| o.terminated).count();
    let n = outcomes.len() as f64;
    let p = terminated as f64 / n;
    Ok(Estimate {
        runs: outcomes.len(),
        terminated,
        probability: p,
        half_width: 1.96 * (p * (1.0 - p) / n).sqrt(),
        outcomes,
    })
}

// ---------------------------------------------------------------------------
// Exact bounded expansion.

/// Result of an exact expansion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expansion {
    /// Sum of the probabilities of leaves within the depth bound.
    pub mass: Rational,
    /// For minimizing expansions: whether the minimum over all policies
    /// was computed exhaustively (false: budget exceeded and the fixed
    /// policy was used for the remaining nodes).
    pub exhaustive: bool,
}

/// A relation to expand: the possible steps from a term, each a
/// `(position, rule, distribution, annotated case)`.
trait StepRelation {
    fn steps(&self, t: &Term) -> Vec<(Position, usize, MultiDistribution, bool)>;
    fn n_rules(&self) -> usize;
}

struct PtrsRelation<'a> {
    rules: &'a [PRule],
    innermost: bool,
}

impl StepRelation for PtrsRelation<'_> {
    fn steps(&self, t: &Term) -> Vec<(Position, usize, MultiDistribution, bool)> {
        ptrs_steps(t, self.rules, self.innermost)
            .into_iter()
            .map(|s| (s.position, s.rule, s.result, false))
            .collect()
    }

    fn n_rules(&self) -> usize {
        self.rules.len()
    }
}

struct AdpRelation<'a> {
    adps: &'a [Adp],
    sig: &'a Signature,
    innermost: bool,
}

impl StepRelation for AdpRelation<'_> {
    fn steps(&self, t: &Term) -> Vec<(Position, usize, MultiDistribution, bool)> {
        let v = if self.innermost {
            rewrite_innermost(t, self.adps, self.sig)
        } else {
            rewrite_full(t, self.adps, self.sig, true, VrfMode::Greedy)
        };
        v.into_iter()
            .map(|s| (s.position, s.adp, s.result, matches!(s.case, Case::At | Case::Af)))
            .collect()
    }

    fn n_rules(&self) -> usize {
        self.adps.len()
    }
}

fn candidates(steps: &[(Position, usize, MultiDistribution, bool)]) -> Vec<(Position, usize)> {
    steps.iter().map(|(p, r, _, _)| (p.clone(), *r)).collect()
}

/// How a tree node was continued.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mark {
    /// A chain-tree step of case (at) or (af).
    A,
    /// Any other step.
    N,
    /// A normal form.
    Leaf,
    /// Not expanded: the depth bound was reached.
    Open,
}

/// A node of a (truncated) rewrite sequence tree or chain tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub probability: Rational,
    pub term: Term,
    pub mark: Mark,
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    /// Sum of the probabilities of the leaves.
    pub fn leaf_mass(&self) -> Result<Rational, SimError> {
        match self.mark {
            Mark::Leaf => Ok(self.probability),
            Mark::Open => Ok(Rational::zero()),
            _ => self
                .children
                .iter()
                .try_fold(Rational::zero(), |acc, c| Ok(acc.add(c.leaf_mass()?)?)),
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(TreeNode::size).sum::<usize>()
    }
}

fn build_tree<R: StepRelation>(rel: &R, t: &Term, p: Rational, policy: &Policy, depth: usize) -> Result<TreeNode, SimError> {
    let steps = rel.steps(t);
    let mut node = TreeNode {
        probability: p,
        term: t.clone(),
        mark: Mark::Leaf,
        children: Vec::new(),
    };
    if steps.is_empty() {
        return Ok(node);
    }
    if depth == 0 {
        node.mark = Mark::Open;
        return Ok(node);
    }
    let i = policy
        .choose(&candidates(&steps), rel.n_rules(), None)
        .expect("nonempty candidates");
    let (_, _, dist, annotated) = &steps[i];
    node.mark = if *annotated { Mark::A } else { Mark::N };
    for (q, u) in &dist.branches {
        node.children.push(build_tree(rel, u, p.mul(q.value())?, policy, depth - 1)?);
    }
    Ok(node)
}

/// The rewrite sequence tree from `start` under `policy`, cut at `depth`.
pub fn rewrite_tree(r: &Ptrs, start: &Term, policy: &Policy, depth: usize) -> Result<TreeNode, SimError> {
    check_start(start)?;
    let rel = PtrsRelation {
        rules: &r.rules,
        innermost: policy.position == PositionStrategy::LeftmostInnermost,
    };
    build_tree(&rel, start, Rational::one(), policy, depth)
}

/// The chain tree from `start` under `policy` (canonical VRF), cut at
/// `depth`.
pub fn chain_tree(
    adps: &[Adp],
    sig: &Signature,
    start: &Term,
    policy: &Policy,
    depth: usize,
    innermost: bool,
) -> Result<TreeNode, SimError> {
    let rel = AdpRelation { adps, sig, innermost };
    build_tree(&rel, start, Rational::one(), policy, depth)
}

struct Expander<'a, R: StepRelation> {
    rel: &'a R,
    policy: &'a Policy,
    memo: HashMap<(Term, usize), Rational>,
    min_memo: HashMap<(Term, usize), Rational>,
    budget: usize,
    exhaustive: bool,
}

impl<R: StepRelation> Expander<'_, R> {
    fn fixed(&mut self, t: &Term, depth: usize) -> Result<Rational, SimError> {
        let steps = self.rel.steps(t);
        if steps.is_empty() {
            return Ok(Rational::one());
        }
        if depth == 0 {
            return Ok(Rational::zero());
        }
        if let Some(m) = self.memo.get(&(t.clone(), depth)) {
            return Ok(*m);
        }
        let i = self
            .policy
            .choose(&candidates(&steps), self.rel.n_rules(), None)
            .expect("nonempty candidates");
        let mut mass = Rational::zero();
        for (p, u) in &steps[i].2.branches {
            mass = mass.add(p.value().mul(self.fixed(u, depth - 1)?)?)?;
        }
        self.memo.insert((t.clone(), depth), mass);
        Ok(mass)
    }

    fn minimal(&mut self, t: &Term, depth: usize) -> Result<Rational, SimError> {
        let steps = self.rel.steps(t);
        if steps.is_empty() {
            return Ok(Rational::one());
        }
        if depth == 0 {
            return Ok(Rational::zero());
        }
        if let Some(m) = self.min_memo.get(&(t.clone(), depth)) {
            return Ok(*m);
        }
        if self.budget == 0 {
            self.exhaustive = false;
            return self.fixed(t, depth);
        }
        self.budget -= 1;
        let mut best: Option<Rational> = None;
        for (_, _, dist, _) in &steps {
            let mut mass = Rational::zero();
            for (p, u) in &dist.branches {
                mass = mass.add(p.value().mul(self.minimal(u, depth - 1)?)?)?;
            }
            best = Some(best.map_or(mass, |b| b.min(mass)));
        }
        let m = best.expect("nonempty steps");
        self.min_memo.insert((t.clone(), depth), m);
        Ok(m)
    }
}

fn expand<R: StepRelation>(rel: &R, start: &Term, policy: &Policy, depth: usize, min_budget: Option<usize>) -> Result<Expansion, SimError> {
    let mut e = Expander {
        rel,
        policy,
        memo: HashMap::new(),
        min_memo: HashMap::new(),
        budget: min_budget.unwrap_or(0),
        exhaustive: true,
    };
    let mass = match min_budget {
        Some(_) => e.minimal(start, depth)?,
        None => e.fixed(start, depth)?,
    };
    Ok(Expansion {
        mass,
        exhaustive: min_budget.is_some() && e.exhaustive,
    })
}

/// Exact leaf mass of the rewrite sequence tree from `start` truncated at
/// `depth` under `policy` (full rewriting; innermost if the policy is
/// leftmost-innermost).
pub fn expand_bounded(r: &Ptrs, start: &Term, policy: &Policy, depth: usize) -> Result<Expansion, SimError> {
    check_start(start)?;
    let rel = PtrsRelation {
        rules: &r.rules,
        innermost: policy.position == PositionStrategy::LeftmostInnermost,
    };
    expand(&rel, start, policy, depth, None)
}

/// Minimum leaf mass over all policies (full rewriting), exhaustive up to
/// `budget` expanded nodes; beyond the budget `fallback` is used.
pub fn expand_bounded_min(r: &Ptrs, start: &Term, fallback: &Policy, depth: usize, budget: usize) -> Result<Expansion, SimError> {
    check_start(start)?;
    let rel = PtrsRelation {
        rules: &r.rules,
        innermost: false,
    };
    expand(&rel, start, fallback, depth, Some(budget))
}

/// Exact leaf mass of the chain tree from `start` (which may carry
/// annotations) truncated at `depth`, using the canonical VRF.
pub fn expand_bounded_adp(
    adps: &[Adp],
    sig: &Signature,
    start: &Term,
    policy: &Policy,
    depth: usize,
    innermost: bool,
) -> Result<Expansion, SimError> {
    let rel = AdpRelation { adps, sig, innermost };
    expand(&rel, start, policy, depth, None)
}
