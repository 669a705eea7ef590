//! Properties over randomly generated PTRSs, terms, graphs and
//! polynomials, shared by the test suite and the acceptance harness.

use std::collections::BTreeSet;
use std::time::Duration;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use probterm::adp::{canonical_problem, Adp, Goal};
use probterm::graph::{reachability, sccs};
use probterm::poly::{absolutely_geq, PVar, Poly};
use probterm::processors::{proc_ur, proc_ut};
use probterm::proof::check_proof;
use probterm::prover::{prove, Answer, ProverConfig};
use probterm::ptrs::Ptrs;
use probterm::rational::Rational;
use probterm::redpair::{check_interp, find_interp, RpConfig};
use probterm::rewrite::{ptrs_steps, rewrite_full, rewrite_innermost, VrfMode};
use probterm::simulate::{expand_bounded, sample_run_reference, Policy, PositionStrategy, Sampler};
use probterm::syntax::parse_ptrs;
use probterm::term::{Position, Signature, Term};

/// Deterministic generator driven by a byte string; reads 0 when exhausted.
struct Gen<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Gen<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Gen { bytes, at: 0 }
    }

    fn pick(&mut self, n: usize) -> usize {
        let b = self.bytes.get(self.at).copied().unwrap_or(0);
        self.at += 1;
        b as usize % n
    }

    /// Constructor pattern with fresh variables.
    fn pattern(&mut self, depth: usize, vars: &mut Vec<String>) -> String {
        match if depth == 0 { self.pick(2) } else { self.pick(4) } {
            0 => {
                vars.push(format!("x{}", vars.len()));
                vars.last().unwrap().clone()
            }
            1 => "0".into(),
            2 => format!("s({})", self.pattern(depth - 1, vars)),
            _ => {
                let a = self.pattern(depth - 1, vars);
                let b = self.pattern(depth - 1, vars);
                format!("c({a}, {b})")
            }
        }
    }

    fn term(&mut self, depth: usize, vars: &[String]) -> String {
        let leaf = |g: &mut Self| match g.pick(3) {
            0 if !vars.is_empty() => vars[g.pick(vars.len())].clone(),
            1 => "g".to_string(),
            _ => "0".to_string(),
        };
        if depth == 0 {
            return leaf(self);
        }
        match self.pick(6) {
            0 => leaf(self),
            1 => format!("s({})", self.term(depth - 1, vars)),
            2 => format!("f({})", self.term(depth - 1, vars)),
            3 => {
                let a = self.term(depth - 1, vars);
                format!("c({a}, {})", self.term(depth - 1, vars))
            }
            4 => {
                let a = self.term(depth - 1, vars);
                format!("h({a}, {})", self.term(depth - 1, vars))
            }
            _ => leaf(self),
        }
    }

    fn rule(&mut self) -> (String, Vec<String>) {
        let mut vars = Vec::new();
        let lhs = match self.pick(4) {
            0 => "g".to_string(),
            1 => format!("f({})", self.pattern(2, &mut vars)),
            2 => {
                let a = self.pattern(1, &mut vars);
                format!("h({a}, {})", self.pattern(1, &mut vars))
            }
            _ => {
                vars.push("x0".into());
                "h(x0, x0)".to_string()
            }
        };
        (lhs, vars)
    }

    /// A PTRS over constructors `0, s, c` and candidates `g, f, h`.
    fn ptrs(&mut self, max_rules: usize) -> Ptrs {
        let n = 1 + self.pick(max_rules);
        let mut rules = Vec::new();
        let mut all_vars = BTreeSet::new();
        for _ in 0..n {
            let (lhs, vars) = self.rule();
            let dist = match self.pick(3) {
                0 => format!("1 : {}", self.term(2, &vars)),
                1 => format!("1/2 : {}, 1/2 : {}", self.term(2, &vars), self.term(2, &vars)),
                _ => format!("1/3 : {}, 2/3 : {}", self.term(2, &vars), self.term(2, &vars)),
            };
            all_vars.extend(vars);
            rules.push(format!("  {lhs} -> {{ {dist} }}"));
        }
        let vars: Vec<String> = all_vars.into_iter().collect();
        let text = format!("(VAR {})\n(RULES\n{}\n)", vars.join(" "), rules.join("\n"));
        parse_ptrs(&text).unwrap_or_else(|e| panic!("{e}\n{text}"))
    }

    /// A ground term with some defined positions annotated.
    fn annotated(&mut self, sig: &Signature, depth: usize) -> Term {
        let text = self.term(depth, &[]);
        let t = probterm::syntax::parse_term(&text, &BTreeSet::new()).unwrap();
        let phi: BTreeSet<Position> = t
            .defined_positions(sig)
            .into_iter()
            .filter(|_| self.pick(2) == 0)
            .collect();
        t.annotate_at(&phi, sig).unwrap()
    }
}

fn bytes() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(any::<u8>(), 200)
}

type Step = (Position, Vec<(Rational, Term)>);

fn plain_steps(t: &Term, r: &Ptrs, innermost: bool) -> BTreeSet<Step> {
    ptrs_steps(t, &r.rules, innermost)
        .into_iter()
        .map(|s| (s.position, s.result.branches.iter().map(|(p, u)| (p.value(), u.clone())).collect()))
        .collect()
}

fn flat_steps(outcomes: Vec<probterm::rewrite::StepOutcome>) -> BTreeSet<Step> {
    outcomes
        .into_iter()
        .map(|s| {
            (
                s.position,
                s.result.branches.iter().map(|(p, u)| (p.value(), u.flatten())).collect(),
            )
        })
        .collect()
}

fn same_modulo_flag(a: &Adp, b: &Adp) -> bool {
    a.lhs == b.lhs && a.rhs == b.rhs
}


/// Cases run per property.
pub const CASES: u32 = 256;

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// A property that runs all its cases.
pub type Property = fn() -> Result<(), String>;

/// Every property with its name.
pub fn all() -> Vec<(&'static str, Property)> {
    vec![
        ("flatten_commutes_with_full_steps", flatten_commutes_with_full_steps),
        ("flatten_commutes_with_innermost_steps", flatten_commutes_with_innermost_steps),
        ("unannotated_rhs_never_duplicates_annotations", unannotated_rhs_never_duplicates_annotations),
        ("sccs_match_brute_force", sccs_match_brute_force),
        ("absolute_positiveness_is_sound", absolute_positiveness_is_sound),
        ("emitted_proofs_replay", emitted_proofs_replay),
        ("processors_only_weaken_problems", processors_only_weaken_problems),
        ("expansion_is_monotone", expansion_is_monotone),
        ("scaling_annotated_polynomials_preserves_orientation", scaling_annotated_polynomials_preserves_orientation),
        ("sampler_matches_reference", sampler_matches_reference),
    ]
}

/// Flattening an ADP step of the canonical ADPs gives a PTRS step, and
/// with the (nf) cases every PTRS step arises this way.
pub fn flatten_commutes_with_full_steps() -> Result<(), String> {
    run(bytes(), |b| {
        let mut g = Gen::new(&b);
        let r = g.ptrs(3);
        let p = canonical_problem(&r, Goal::Ast);
        let t = g.annotated(&r.signature, 3);
        let adp = flat_steps(rewrite_full(&t, &p.adps, &r.signature, true, VrfMode::Greedy));
        prop_assert_eq!(adp, plain_steps(&t.flatten(), &r, false));
        Ok(())
    })
}

pub fn flatten_commutes_with_innermost_steps() -> Result<(), String> {
    run(bytes(), |b| {
        let mut g = Gen::new(&b);
        let r = g.ptrs(3);
        let p = canonical_problem(&r, Goal::Iast);
        let t = g.annotated(&r.signature, 3);
        let adp = flat_steps(rewrite_innermost(&t, &p.adps, &r.signature));
        prop_assert_eq!(adp, plain_steps(&t.flatten(), &r, true));
        Ok(())
    })
}

/// ADPs without annotations on their right-hand sides never increase
/// the number of annotations, whatever the VRF.
pub fn unannotated_rhs_never_duplicates_annotations() -> Result<(), String> {
    run(bytes(), |b| {
        let mut g = Gen::new(&b);
        let r = g.ptrs(3);
        let adps: Vec<Adp> = canonical_problem(&r, Goal::Ast).adps.iter().map(Adp::flatten).collect();
        let t = g.annotated(&r.signature, 3);
        let n = t.annotation_count();
        let mut outcomes = rewrite_full(&t, &adps, &r.signature, true, VrfMode::All { cap: 64 });
        outcomes.extend(rewrite_innermost(&t, &adps, &r.signature));
        for s in outcomes {
            for u in s.result.terms() {
                prop_assert!(u.annotation_count() <= n, "{} -> {}", t, u);
            }
        }
        Ok(())
    })
}

/// SCCs agree with mutual reachability computed by brute force.
pub fn sccs_match_brute_force() -> Result<(), String> {
    let strategy = (1usize..=12, prop::collection::vec((0usize..12, 0usize..12), 0..40));
    run(strategy, |(n, raw)| {
        let edges: BTreeSet<(usize, usize)> = raw.into_iter().filter(|&(a, b)| a < n && b < n).collect();
        // Floyd-Warshall style closure.
        let mut reach = vec![vec![false; n]; n];
        for &(a, b) in &edges {
            reach[a][b] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if reach[i][k] && reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        let comps = sccs(n, &edges);
        let mut seen = BTreeSet::new();
        for c in &comps {
            for &i in c {
                prop_assert!(seen.insert(i), "node {} in two SCCs", i);
                prop_assert!(reach[i][i]);
                for &j in c {
                    prop_assert!(reach[i][j]);
                }
            }
        }
        for i in 0..n {
            if reach[i][i] {
                prop_assert!(seen.contains(&i), "cyclic node {} missing", i);
            }
            for j in 0..n {
                if reach[i][j] && reach[j][i] {
                    prop_assert!(comps.iter().any(|c| c.contains(&i) && c.contains(&j)));
                }
            }
        }
        let closure = reachability(n, &edges);
        for i in 0..n {
            let expect: BTreeSet<usize> = (0..n).filter(|&j| reach[i][j]).collect();
            prop_assert_eq!(&closure[i], &expect);
        }
        Ok(())
    })
}

/// Absolute positiveness implies the inequality on every point of
/// {0..3}²; for constants it is exact.
pub fn absolute_positiveness_is_sound() -> Result<(), String> {
    let strategy = (
        prop::collection::vec(-3i128..=3, 6),
        prop::collection::vec(-3i128..=3, 6),
        any::<bool>(),
    );
    run(strategy, |(pc, qc, strict)| {
        let monomials = [
            vec![],
            vec![(PVar::Arg(1), 1)],
            vec![(PVar::Arg(2), 1)],
            vec![(PVar::Arg(1), 1), (PVar::Arg(2), 1)],
            vec![(PVar::Arg(1), 2)],
            vec![(PVar::Arg(2), 2)],
        ];
        let build = |cs: &[i128]| {
            let mut p = Poly::zero();
            for (m, &c) in monomials.iter().zip(cs) {
                p.add_term(m.clone(), c);
            }
            p
        };
        let (p, q) = (build(&pc), build(&qc));
        if absolutely_geq(&p, &q, strict) {
            for x in 0..=3i128 {
                for y in 0..=3i128 {
                    let at = |v: &PVar| match v {
                        PVar::Arg(1) => x,
                        PVar::Arg(2) => y,
                        _ => 0,
                    };
                    let (a, b) = (p.eval(&at), q.eval(&at));
                    let ok = if strict { a > b } else { a >= b };
                    prop_assert!(ok, "{} vs {} at ({}, {})", a, b, x, y);
                }
            }
        }
        let (cp, cq) = (Poly::constant(pc[0]), Poly::constant(qc[0]));
        let holds = if strict { pc[0] > qc[0] } else { pc[0] >= qc[0] };
        prop_assert_eq!(absolutely_geq(&cp, &cq, strict), holds);
        Ok(())
    })
}

/// Every emitted proof is accepted by the independent checker.
pub fn emitted_proofs_replay() -> Result<(), String> {
    let strategy = (bytes(), prop::sample::select(vec![Goal::Ast, Goal::Bast, Goal::Iast]));
    run(strategy, |(b, goal)| {
        let mut g = Gen::new(&b);
        let r = g.ptrs(3);
        let mut config = ProverConfig {
            timeout: Some(Duration::from_secs(2)),
            ..ProverConfig::default()
        };
        config.rp.max_nodes = 20_000;
        let v = prove(&r, goal, &config);
        prop_assert_eq!(v.proof.is_some(), v.answer != Answer::Maybe);
        if let Some(doc) = &v.proof {
            prop_assert!(check_proof(doc).is_ok(), "{:?}\n{}", check_proof(doc), doc);
        }
        Ok(())
    })
}

/// UT only removes annotations; UR only turns flags off.
pub fn processors_only_weaken_problems() -> Result<(), String> {
    run(bytes(), |b| {
        let mut g = Gen::new(&b);
        let r = g.ptrs(4);
        for goal in [Goal::Ast, Goal::Iast, Goal::Bast] {
            let p = canonical_problem(&r, goal);
            let q = proc_ut(&p);
            for a in q.adps.iter().chain(q.reach()) {
                let from = p
                    .adps
                    .iter()
                    .chain(p.reach())
                    .find(|o| o.flatten() == a.flatten() && o.flag == a.flag);
                prop_assert!(from.is_some(), "UT invented {}", a);
                for (t, u) in from.unwrap().rhs.terms().zip(a.rhs.terms()) {
                    let before: BTreeSet<Position> = t.annotated_positions().into_iter().collect();
                    prop_assert!(u.annotated_positions().iter().all(|x| before.contains(x)));
                }
            }
            if goal == Goal::Ast {
                prop_assert!(proc_ur(&p).is_err());
                continue;
            }
            let q = proc_ur(&p).unwrap();
            for a in q.adps.iter().chain(q.reach()) {
                let from = p.adps.iter().chain(p.reach()).find(|o| same_modulo_flag(o, a));
                prop_assert!(from.is_some(), "UR changed more than a flag: {}", a);
                prop_assert!(from.unwrap().flag || !a.flag);
            }
        }
        Ok(())
    })
}

/// Leaf mass grows with the depth and never exceeds 1.
pub fn expansion_is_monotone() -> Result<(), String> {
    run((bytes(), any::<bool>()), |(b, inner)| {
        let mut g = Gen::new(&b);
        let r = g.ptrs(3);
        let start = probterm::syntax::parse_term(&g.term(2, &[]), &BTreeSet::new()).unwrap();
        let policy = if inner {
            Policy::leftmost_innermost()
        } else {
            Policy::leftmost_outermost()
        };
        let mut last = Rational::zero();
        for depth in 0..=5 {
            let m = expand_bounded(&r, &start, &policy, depth).unwrap().mass;
            prop_assert!(last <= m && m <= Rational::one());
            last = m;
        }
        Ok(())
    })
}

/// Scaling the polynomials of annotated symbols by a positive factor
/// preserves every reduction pair condition.
pub fn scaling_annotated_polynomials_preserves_orientation() -> Result<(), String> {
    run((bytes(), 2i128..=4), |(b, k)| {
        let mut g = Gen::new(&b);
        let r = g.ptrs(3);
        let p = proc_ut(&canonical_problem(&r, Goal::Iast));
        let candidates: BTreeSet<usize> = (0..p.adps.len()).filter(|&i| p.adps[i].has_annotations()).collect();
        let config = RpConfig {
            max_nodes: 20_000,
            ..RpConfig::default()
        };
        if let Some(sol) = find_interp(&p.adps, &candidates, &config) {
            prop_assert!(check_interp(&sol.interp, &p.adps, &sol.strict).ok);
            let mut scaled = sol.interp.clone();
            for ((_, annotated), poly) in scaled.map.iter_mut() {
                if *annotated {
                    *poly = poly.scale(k);
                }
            }
            prop_assert!(check_interp(&scaled, &p.adps, &sol.strict).ok);
        }
        Ok(())
    })
}

/// The arena sampler follows exactly the trajectory of the term-level
/// reference for the same seed.
pub fn sampler_matches_reference() -> Result<(), String> {
    let strategy = (
        bytes(),
        any::<u64>(),
        prop::sample::select(vec![
            PositionStrategy::LeftmostOutermost,
            PositionStrategy::LeftmostInnermost,
            PositionStrategy::Random,
        ]),
        any::<bool>(),
    );
    run(strategy, |(b, seed, position, rule_first)| {
        let mut g = Gen::new(&b);
        let r = g.ptrs(4);
        let start = probterm::syntax::parse_term(&g.term(3, &[]), &BTreeSet::new()).unwrap();
        let mut priority: Vec<usize> = (0..r.rules.len()).collect();
        priority.reverse();
        let policy = Policy {
            position,
            rule_priority: Some(priority),
            rule_first,
        };
        let fast = Sampler::new(&r).unwrap().trajectory(&start, &policy, 25, seed);
        let slow = sample_run_reference(&r, &start, &policy, 25, seed).unwrap();
        prop_assert_eq!(fast, slow);
        Ok(())
    })
}
