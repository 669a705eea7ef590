//! The simulator against closed-form oracles: geometric leaf masses and
//! extinction probabilities of branching processes.

use std::path::PathBuf;

use probterm::adp::{canonical_problem, Goal};
use probterm::rational::Rational;
use probterm::simulate::{
    chain_tree, estimate_termination_prob, expand_bounded, expand_bounded_adp, expand_bounded_min, rewrite_tree,
    sample_run, Mark, Policy,
};
use probterm::ptrs::Ptrs;
use probterm::syntax::{parse_ptrs, parse_term};
use probterm::term::Term;

fn load(name: &str) -> Ptrs {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../corpus/{name}.ptrs"));
    parse_ptrs(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Smallest root in [0, 1] of `q = a + b q²`.
fn extinction(a: f64, b: f64) -> f64 {
    (1.0 - (1.0 - 4.0 * a * b).sqrt()) / (2.0 * b)
}

fn g() -> Term {
    Term::constant("g")
}

#[test]
fn r1_exact_leaf_mass_is_one_minus_three_quarters_to_the_depth() {
    let r = load("r1");
    for depth in 0..=20u32 {
        let e = expand_bounded(&r, &g(), &Policy::leftmost_outermost(), depth as usize).unwrap();
        let tail = Rational::new(3, 4).unwrap().pow(depth).unwrap();
        assert_eq!(e.mass, Rational::one().sub(tail).unwrap());
    }
    let e = expand_bounded(&r, &g(), &Policy::leftmost_outermost(), 20).unwrap();
    assert!((e.mass.to_f64() - 0.99683).abs() < 1e-5);
}

#[test]
fn r1_terminates_under_every_policy() {
    let r = load("r1");
    for policy in [Policy::leftmost_outermost(), Policy::leftmost_innermost(), Policy::random()] {
        let est = estimate_termination_prob(&r, &g(), &policy, 10_000, 1000, 11).unwrap();
        assert!(est.probability >= 0.99, "{policy:?}: {}", est.probability);
    }
}

#[test]
fn r2_outermost_matches_extinction_probability() {
    let r = load("r2");
    let est = estimate_termination_prob(&r, &g(), &Policy::leftmost_outermost(), 20_000, 2000, 2024).unwrap();
    let q = extinction(0.25, 0.75);
    assert!((q - 1.0 / 3.0).abs() < 1e-12);
    assert!((est.probability - q).abs() <= 0.01, "{}", est.probability);
}

#[test]
fn r3_adversary_matches_extinction_probability() {
    let r = load("r3");
    // Rules: 0 = g, 1 = d(d(x)), 2 = d(x). The collapsing rule is preferred.
    let est = estimate_termination_prob(&r, &g(), &Policy::prioritized(vec![1, 0, 2]), 20_000, 2000, 7).unwrap();
    let q = extinction(7.0 / 16.0, 9.0 / 16.0);
    assert!((q - 7.0 / 9.0).abs() < 1e-12);
    assert!((est.probability - q).abs() <= 0.01, "{}", est.probability);
}

#[test]
fn r2_innermost_run_terminates() {
    let r = load("r2");
    let est = estimate_termination_prob(&r, &g(), &Policy::leftmost_innermost(), 2000, 2000, 3).unwrap();
    // d^k(0) unfolds to a term of size 2^k, so the rare runs with k >= 22
    // hit the sampler's node cap and count as cut off.
    assert!(est.probability >= 0.99, "{}", est.probability);
    assert!(sample_run(&r, &g(), &Policy::leftmost_innermost(), 2000, 5).unwrap().terminated);
}

#[test]
fn depth_zero_on_a_redex_has_no_mass() {
    let r = load("r2");
    assert!(expand_bounded(&r, &g(), &Policy::leftmost_outermost(), 0).unwrap().mass.is_zero());
    let nf = Term::constant("0");
    assert_eq!(expand_bounded(&r, &nf, &Policy::leftmost_outermost(), 0).unwrap().mass, Rational::one());
}

#[test]
fn estimates_are_reproducible_and_csv_has_one_line_per_run() {
    let r = load("r2");
    let a = estimate_termination_prob(&r, &g(), &Policy::random(), 300, 200, 99).unwrap();
    let b = estimate_termination_prob(&r, &g(), &Policy::random(), 300, 200, 99).unwrap();
    assert_eq!(a, b);
    let csv = a.to_csv();
    assert_eq!(csv.lines().count(), 301);
    assert_eq!(csv.lines().next(), Some("seed,steps,terminated"));
}

#[test]
fn half_width_shrinks_with_the_square_root_of_runs() {
    let r = load("r2");
    let p = Policy::leftmost_outermost();
    let small = estimate_termination_prob(&r, &g(), &p, 1000, 300, 1).unwrap();
    let large = estimate_termination_prob(&r, &g(), &p, 16_000, 300, 1).unwrap();
    let ratio = small.half_width / large.half_width;
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
}

/// Leaf mass of the canonical chain tree equals that of the rewrite
/// sequence tree, step for step, since the (nf) cases keep every step.
#[test]
fn r2_chain_tree_mass_matches_rewrite_tree_mass() {
    let r = load("r2");
    let p = canonical_problem(&r, Goal::Ast);
    let big_g = Term::sharp("g", vec![]);
    for depth in 0..=10 {
        let policy = Policy::leftmost_outermost();
        let plain = expand_bounded(&r, &g(), &policy, depth).unwrap();
        let adp = expand_bounded_adp(&p.adps, &p.signature, &big_g, &policy, depth, false).unwrap();
        assert_eq!(plain.mass, adp.mass, "depth {depth}");
    }
}

#[test]
fn chain_tree_mass_matches_on_non_duplicating_corpus() {
    let cases = [
        ("r1", "g"),
        ("r3", "g"),
        ("r_alg", "loop1(s(s(0)))"),
        ("lists", "init"),
        ("trees", "init"),
    ];
    for (name, start) in cases {
        let r = load(name);
        assert!(r.is_non_duplicating(), "{name}");
        let p = canonical_problem(&r, Goal::Ast);
        let t = parse_term(start, &Default::default()).unwrap();
        let sharp = t.sharp_root();
        for innermost in [false, true] {
            let policy = if innermost {
                Policy::leftmost_innermost()
            } else {
                Policy::leftmost_outermost()
            };
            for depth in 0..=8 {
                let plain = expand_bounded(&r, &t, &policy, depth).unwrap();
                let adp = expand_bounded_adp(&p.adps, &p.signature, &sharp, &policy, depth, innermost).unwrap();
                assert_eq!(plain.mass, adp.mass, "{name} depth {depth} innermost {innermost}");
            }
        }
    }
}

#[test]
fn trees_carry_probabilities_and_marks() {
    let r = load("r2");
    let t = rewrite_tree(&r, &g(), &Policy::leftmost_outermost(), 4).unwrap();
    fn walk(n: &probterm::simulate::TreeNode) {
        if !n.children.is_empty() {
            let s = n.children.iter().fold(Rational::zero(), |a, c| a.add(c.probability).unwrap());
            assert_eq!(s, n.probability);
            n.children.iter().for_each(walk);
        }
    }
    walk(&t);
    assert_eq!(t.probability, Rational::one());

    let p = canonical_problem(&r, Goal::Ast);
    let ct = chain_tree(&p.adps, &p.signature, &Term::sharp("g", vec![]), &Policy::leftmost_outermost(), 4, false).unwrap();
    assert_eq!(ct.mark, Mark::A);
    walk(&ct);
    assert_eq!(ct.leaf_mass().unwrap(), t.leaf_mass().unwrap());
}

#[test]
fn demonic_minimum_sits_below_fixed_policies() {
    let r = load("r3");
    for depth in [2, 4, 6] {
        let min = expand_bounded_min(&r, &g(), &Policy::leftmost_outermost(), depth, 1_000_000).unwrap();
        assert!(min.exhaustive);
        for policy in [Policy::leftmost_outermost(), Policy::leftmost_innermost(), Policy::prioritized(vec![1, 0, 2])] {
            assert!(min.mass <= expand_bounded(&r, &g(), &policy, depth).unwrap().mass);
        }
    }
    let tiny = expand_bounded_min(&r, &g(), &Policy::leftmost_outermost(), 6, 1).unwrap();
    assert!(!tiny.exhaustive);
}
