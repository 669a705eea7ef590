//! Acceptance criteria: prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Time limits and tolerances are fixed here.

#[path = "../../core/tests/common/props.rs"]
mod props;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use probterm::adp::{canonical_problem, parse_adp, Adp, AdpProblem, Goal};
use probterm::poly::{Interp, PVar, Poly};
use probterm::processors::{proc_dg, proc_ur};
use probterm::proof::{check_proof, Justification, ProofDoc, ProofNode};
use probterm::prover::{prove, Answer, ProverConfig};
use probterm::ptrs::Ptrs;
use probterm::rational::Rational;
use probterm::redpair::check_interp;
use probterm::simulate::{estimate_termination_prob, expand_bounded, Policy};
use probterm::syntax::parse_ptrs;
use probterm::term::{Name, Signature, Term};

type Outcome = Result<String, String>;

fn load(name: &str) -> Result<Ptrs, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../corpus/{name}.ptrs"));
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_ptrs(&text).map_err(|e| format!("{name}: {e}"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= limit, || format!("{what} took {:.2}s, limit {}s", t.as_secs_f64(), limit.as_secs()))
}

/// Proves `goal`, insists on `want` within `limit` and replays the proof.
fn prove_expect(name: &str, goal: Goal, want: Answer, limit: Duration) -> Result<Option<ProofDoc>, String> {
    let r = load(name)?;
    let start = Instant::now();
    let v = prove(&r, goal, &ProverConfig::default());
    within(start, limit, &format!("{name} {goal}"))?;
    ensure(v.answer == want, || format!("{name} {goal}: got {}, want {want}", v.answer))?;
    if let Some(doc) = &v.proof {
        check_proof(doc).map_err(|e| format!("{name} {goal}: proof rejected: {e}"))?;
    }
    Ok(v.proof)
}

fn proof_context(doc: &ProofDoc) -> Result<(Signature, BTreeSet<Name>), String> {
    let r = parse_ptrs(&doc.input).map_err(|e| e.to_string())?;
    let vars = r.rules.iter().flat_map(|rule| rule.lhs.variables()).collect();
    Ok((r.signature, vars))
}

fn rp_nodes(doc: &ProofDoc) -> Vec<&ProofNode> {
    doc.root
        .nodes()
        .into_iter()
        .filter(|n| matches!(n.justification, Justification::Rp { .. }))
        .collect()
}

/// Re-validates the interpretation of an RP node on its recorded problem.
fn validate_rp(node: &ProofNode, sig: &Signature, vars: &BTreeSet<Name>) -> Result<AdpProblem, String> {
    let Justification::Rp { interpretation, strict } = &node.justification else {
        return Err("not an RP node".into());
    };
    let record = node.problem.as_ref().ok_or("RP node without problem")?;
    let p = record.parse(sig, vars).map_err(|e| e.to_string())?;
    let pol = Interp::from_records(interpretation).ok_or("malformed interpretation")?;
    let strict: BTreeSet<usize> = strict.iter().copied().collect();
    ensure(!strict.is_empty(), || "no strictly decreasing ADP".into())?;
    let rep = check_interp(&pol, &p.adps, &strict);
    ensure(rep.ok, || format!("interpretation rejected: {rep}"))?;
    Ok(p)
}

fn criterion_1() -> Outcome {
    let doc = prove_expect("r_alg", Goal::Ast, Answer::Ast, Duration::from_secs(60))?.ok_or("no proof")?;
    let (sig, vars) = proof_context(&doc)?;
    let nodes = rp_nodes(&doc);
    ensure(!nodes.is_empty(), || "proof has no RP step".into())?;
    for n in &nodes {
        validate_rp(n, &sig, &vars)?;
    }
    Ok(format!("R_alg is AST; {} RP step(s) re-validated", nodes.len()))
}

fn root_name(a: &Adp) -> &str {
    a.lhs.root().map(|s| &**s).unwrap_or("")
}

fn criterion_2() -> Outcome {
    let doc = prove_expect("r_alg", Goal::Bast, Answer::Bast, Duration::from_secs(30))?.ok_or("no proof")?;
    let (sig, vars) = proof_context(&doc)?;
    let mut found = 0;
    for n in rp_nodes(&doc) {
        let p = validate_rp(n, &sig, &vars)?;
        let triple_scc = p
            .adps
            .iter()
            .any(|a| root_name(a) == "triple" && a.lhs.args().first().and_then(Term::root).map(|s| &**s) == Some("s") && a.has_annotations());
        if !triple_scc {
            continue;
        }
        found += 1;
        for a in p.reach().iter().chain(&p.adps).filter(|a| a.flag) {
            let root = root_name(a);
            ensure(root == "double" || root == "triple", || format!("flag-true ADP outside double/triple: {a}"))?;
        }
    }
    ensure(found > 0, || "no RP step for the triple(s(y)) SCC".into())?;
    Ok("R_alg is bAST; the triple SCC keeps only double/triple flags".into())
}

fn criterion_3() -> Outcome {
    for name in ["r2", "r3"] {
        prove_expect(name, Goal::Iast, Answer::Iast, Duration::from_secs(10))?;
        prove_expect(name, Goal::Ast, Answer::Maybe, Duration::from_secs(10))?;
    }
    Ok("R2 and R3: iAST proved, AST answered MAYBE".into())
}

fn criterion_4() -> Outcome {
    prove_expect("r1", Goal::Ast, Answer::Ast, Duration::from_secs(5))?;
    let r = load("r1")?;
    let g = Term::constant("g");
    let policy = Policy::leftmost_outermost();
    let est = estimate_termination_prob(&r, &g, &policy, 10_000, 2000, 1).map_err(|e| e.to_string())?;
    ensure(est.probability >= 0.99, || format!("estimate {} < 0.99", est.probability))?;
    let n = 10;
    let exact = expand_bounded(&r, &g, &policy, n).map_err(|e| e.to_string())?.mass;
    let oracle = Rational::one()
        .sub(Rational::new(3, 4).unwrap().pow(n as u32).unwrap())
        .unwrap();
    ensure(exact == oracle, || format!("exact mass {exact} != 1 - (3/4)^{n}"))?;
    let short = estimate_termination_prob(&r, &g, &policy, 10_000, n, 2).map_err(|e| e.to_string())?;
    let gap = (short.probability - oracle.to_f64()).abs();
    ensure(gap <= short.half_width, || {
        format!("{n}-step fraction {} vs {} exceeds half-width {}", short.probability, oracle.to_f64(), short.half_width)
    })?;
    Ok(format!(
        "R1 is AST; estimate {:.4}; {n}-step fraction {:.4} vs exact {:.4}",
        est.probability,
        short.probability,
        oracle.to_f64()
    ))
}

fn criterion_5() -> Outcome {
    let r = load("r_alg")?;
    let res = proc_dg(&canonical_problem(&r, Goal::Ast));
    let got: BTreeSet<BTreeSet<usize>> = res.sccs.iter().map(|c| c.iter().copied().collect()).collect();
    let want: BTreeSet<BTreeSet<usize>> = [vec![0, 1], vec![2], vec![3], vec![5]]
        .into_iter()
        .map(|c| c.into_iter().collect())
        .collect();
    ensure(got == want, || format!("SCCs {got:?}, want {want:?}"))?;
    Ok(format!("SCCs {got:?}"))
}

fn adps(sig: &Signature, vars: &[&str], lines: &[&str]) -> Result<Vec<Adp>, String> {
    let vars: BTreeSet<Name> = vars.iter().map(|v| Name::from(*v)).collect();
    lines
        .iter()
        .map(|l| parse_adp(l, &vars, sig).map_err(|e| format!("{l}: {e}")))
        .collect()
}

fn x1() -> Poly {
    Poly::var(PVar::Arg(1))
}

fn criterion_6() -> Outcome {
    let r2 = load("r2")?;
    let p = adps(
        &r2.signature,
        &["x"],
        &["g -> { 3/4 : d(g#), 1/4 : 0 } : false", "d(x) -> { 1 : c(x, x) } : false"],
    )?;
    let mut pol = Interp::default();
    pol.set("g", true, Poly::constant(1));
    let strict: BTreeSet<usize> = [0].into_iter().collect();
    let rep = check_interp(&pol, &p, &strict);
    ensure(rep.ok, || format!("R2 interpretation rejected: {rep}"))?;
    ensure(!check_interp(&Interp::default(), &p, &strict).ok, || "zero interpretation accepted for R2".into())?;

    let ralg = load("r_alg")?;
    let q = adps(
        &ralg.signature,
        &["y"],
        &[
            "loop1(y) -> { 1/2 : loop1#(double(y)), 1/2 : loop2(double(y)) } : true",
            "loop1(y) -> { 1/3 : loop1#(triple(y)), 2/3 : loop2(triple(y)) } : true",
            "loop2(s(y)) -> { 1 : loop2(y) } : true",
            "double(s(y)) -> { 1 : s(s(double(y))) } : true",
            "double(0) -> { 1 : 0 } : true",
            "triple(s(y)) -> { 1 : s(s(s(triple(y)))) } : true",
            "triple(0) -> { 1 : 0 } : true",
        ],
    )?;
    let mut pol = Interp::default();
    pol.set("s", false, x1().add(&Poly::constant(1)));
    pol.set("double", false, x1().scale(2));
    pol.set("triple", false, x1().scale(3));
    pol.set("loop1", true, Poly::constant(1));
    let strict: BTreeSet<usize> = [0, 1].into_iter().collect();
    let rep = check_interp(&pol, &q, &strict);
    ensure(rep.ok, || format!("R_alg interpretation rejected: {rep}"))?;
    ensure(!check_interp(&Interp::default(), &q, &strict).ok, || "zero interpretation accepted for R_alg".into())?;
    Ok("both interpretations accepted, all-zero rejected".into())
}

fn criterion_7() -> Outcome {
    let r = load("p_g")?;
    let vars = ["x1", "x2", "x3", "x4"];
    let init = "init -> { 1 : f#(g) } : true";
    let g = "g -> { 1/2 : c(g, g, g, g), 1/2 : 0 } : true";
    let f = "f(c(x1, x2, x3, x4)) -> { 1 : c(f#(x1), f#(x2), f#(x3), f#(x4)) } : true";
    let pg = adps(&r.signature, &vars, &[init, g, f])?;
    let start = AdpProblem::new(r.signature.clone(), Goal::Bast, pg.clone(), Some(Vec::new()));
    let res = proc_dg(&start);
    let p_prime: BTreeSet<Adp> = [pg[0].flatten(), pg[1].clone(), pg[2].clone()].into_iter().collect();
    let hit = res.problems.iter().find(|q| {
        q.reach().contains(&pg[0]) && q.adps.iter().cloned().collect::<BTreeSet<Adp>>() == p_prime
    });
    let q = hit.ok_or_else(|| {
        let shown: Vec<String> = res
            .problems
            .iter()
            .map(|q| format!("I={:?} P={:?}", q.reach().iter().map(Adp::to_string).collect::<Vec<_>>(), q.adps.iter().map(Adp::to_string).collect::<Vec<_>>()))
            .collect();
        format!("no DG result ({{(14)}}, P'_g); got {shown:?}")
    })?;
    let after = proc_ur(q).map_err(|e| e.to_string())?;
    for a in after.reach().iter().chain(&after.adps) {
        let is_g = root_name(a) == "g";
        ensure(a.flag == is_g, || format!("after UR, {a} has flag {}", a.flag))?;
    }
    ensure(after.adps.iter().any(|a| root_name(a) == "g" && a.flag), || "g-ADP missing after UR".into())?;
    Ok("DG keeps init in the reachability part; UR keeps only the g-ADP flagged".into())
}

fn criterion_8() -> Outcome {
    let mut detail = Vec::new();
    for (name, policy, want, seed) in [
        ("r2", Policy::leftmost_outermost(), 1.0 / 3.0, 2024u64),
        ("r3", Policy::prioritized(vec![1, 0, 2]), 7.0 / 9.0, 7),
    ] {
        let r = load(name)?;
        let start = Instant::now();
        let est = estimate_termination_prob(&r, &Term::constant("g"), &policy, 20_000, 2000, seed).map_err(|e| e.to_string())?;
        within(start, Duration::from_secs(60), &format!("{name} simulation"))?;
        ensure((est.probability - want).abs() <= 0.02, || {
            format!("{name}: estimate {} vs {want:.4}", est.probability)
        })?;
        detail.push(format!("{name} {:.4} (target {want:.4})", est.probability));
    }
    Ok(detail.join(", "))
}

fn criterion_9() -> Outcome {
    prove_expect("lists", Goal::Ast, Answer::Ast, Duration::from_secs(120))?;
    prove_expect("trees", Goal::Ast, Answer::Ast, Duration::from_secs(120))?;
    prove_expect("lists_even", Goal::Bast, Answer::Bast, Duration::from_secs(120))?;
    Ok("lists AST, trees AST, lists_even bAST".into())
}

fn criterion_10() -> Outcome {
    let all = props::all();
    let mut failed = Vec::new();
    for (name, run) in &all {
        if let Err(e) = run() {
            failed.push(format!("{name}: {e}"));
        }
    }
    ensure(failed.is_empty(), || failed.join("; "))?;
    Ok(format!("{} properties x {} cases, no failures", all.len(), props::CASES))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("R_alg AST with validated RP steps", criterion_1),
        ("R_alg bAST via the double/triple flag restriction", criterion_2),
        ("R2/R3 iAST but not AST", criterion_3),
        ("R1 AST and simulation agreement", criterion_4),
        ("dependency graph SCCs of R_alg", criterion_5),
        ("hand-written interpretations", criterion_6),
        ("P_g through DG and UR", criterion_7),
        ("extinction probabilities of R2 and R3", criterion_8),
        ("lists, trees and lists_even", criterion_9),
        ("property suites", criterion_10),
    ];
    let mut failures = 0;
    for (i, (what, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {what}: {detail} [{secs:.2}s]", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL criterion {}: {what}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
