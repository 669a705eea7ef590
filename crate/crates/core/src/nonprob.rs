//! A minimal classical dependency pair back-end: dependency graph splitting
//! and polynomial reduction pairs on non-probabilistic DP problems
//! `(D, R)`, for full and innermost termination.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::adp::{Adp, Strategy};
use crate::graph::{sccs, Estimator};
use crate::poly::{Interp, InterpRecord};
use crate::ptrs::MultiDistribution;
use crate::redpair::{check_interp, find_interp, RpConfig};
use crate::term::Term;

/// Pairs `ℓ# → t#` and rules `ℓ → r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DpProblem {
    pub pairs: Vec<(Term, Term)>,
    pub rules: Vec<(Term, Term)>,
    pub strategy: Strategy,
}

/// Proof of termination: the pair set is emptied by graph splits and
/// reduction pairs. Indices refer to the pair list of the current problem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum DpProof {
    /// No pairs left.
    Empty,
    /// The graph's nontrivial SCCs, each with its own proof.
    Graph { components: Vec<(Vec<usize>, DpProof)> },
    /// The strict pairs are removed; `rest` proves the remainder.
    Rp {
        interpretation: Vec<InterpRecord>,
        strict: Vec<usize>,
        rest: Box<DpProof>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DpResult {
    Terminating(DpProof),
    Unknown,
}

impl DpProblem {
    /// The problem as ADPs: pairs become `ℓ → {1: t#}^false`, rules become
    /// `ℓ → {1: r}^true`. Reduction pair conditions then specialize to the
    /// classical ones.
    fn as_adps(&self) -> Vec<Adp> {
        let mut v: Vec<Adp> = self
            .pairs
            .iter()
            .map(|(l, r)| Adp {
                lhs: l.flatten(),
                rhs: MultiDistribution::dirac(r.sharp_root()),
                flag: false,
            })
            .collect();
        v.extend(self.rules.iter().map(|(l, r)| Adp {
            lhs: l.clone(),
            rhs: MultiDistribution::dirac(r.flatten()),
            flag: true,
        }));
        v
    }

    fn estimator(&self) -> Estimator {
        let lhs: Vec<Term> = self.rules.iter().map(|(l, _)| l.clone()).collect();
        Estimator::new(lhs.clone(), lhs, self.strategy)
    }

    pub fn graph_edges(&self) -> BTreeSet<(usize, usize)> {
        let est = self.estimator();
        let mut edges = BTreeSet::new();
        for (i, (l1, t)) in self.pairs.iter().enumerate() {
            for (j, (l2, _)) in self.pairs.iter().enumerate() {
                if est.reaches(t, &l1.flatten(), &l2.flatten()) {
                    edges.insert((i, j));
                }
            }
        }
        edges
    }

    fn restrict(&self, keep: &[usize]) -> DpProblem {
        DpProblem {
            pairs: keep.iter().map(|&i| self.pairs[i].clone()).collect(),
            rules: self.rules.clone(),
            strategy: self.strategy,
        }
    }

    /// Plain text form for classical provers.
    pub fn to_text(&self) -> String {
        let mut vars = BTreeSet::new();
        for (l, r) in self.pairs.iter().chain(&self.rules) {
            vars.extend(l.variables());
            vars.extend(r.variables());
        }
        let mut out = String::new();
        if !vars.is_empty() {
            let v: Vec<String> = vars.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "(VAR {})", v.join(" "));
        }
        let s = match self.strategy {
            Strategy::Full => "FULL",
            Strategy::Innermost => "INNERMOST",
        };
        let _ = writeln!(out, "(STRATEGY {s})");
        out.push_str("(PAIRS\n");
        for (l, r) in &self.pairs {
            let _ = writeln!(out, "  {l} -> {r}");
        }
        out.push_str(")\n(RULES\n");
        for (l, r) in &self.rules {
            let _ = writeln!(out, "  {l} -> {r}");
        }
        out.push_str(")\n");
        out
    }
}

impl fmt::Display for DpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Terminating only if graph splits and reduction pairs empty the pair set;
/// never claims non-termination.
pub fn dp_terminates(d: &DpProblem, config: &RpConfig) -> DpResult {
    match prove(d, config) {
        Some(p) => DpResult::Terminating(p),
        None => DpResult::Unknown,
    }
}

fn prove(d: &DpProblem, config: &RpConfig) -> Option<DpProof> {
    if d.pairs.is_empty() {
        return Some(DpProof::Empty);
    }
    let comps = sccs(d.pairs.len(), &d.graph_edges());
    let mut out = Vec::new();
    for comp in comps {
        let sub = d.restrict(&comp);
        out.push((comp, prove_scc(&sub, config)?));
    }
    Some(DpProof::Graph { components: out })
}

fn prove_scc(d: &DpProblem, config: &RpConfig) -> Option<DpProof> {
    let adps = d.as_adps();
    let candidates: BTreeSet<usize> = (0..d.pairs.len()).collect();
    let sol = find_interp(&adps, &candidates, config)?;
    let keep: Vec<usize> = (0..d.pairs.len()).filter(|i| !sol.strict.contains(i)).collect();
    let rest = prove(&d.restrict(&keep), config)?;
    Some(DpProof::Rp {
        interpretation: sol.interp.to_records(),
        strict: sol.strict.into_iter().collect(),
        rest: Box::new(rest),
    })
}

/// Replays a proof: recomputes graphs and checks every interpretation.
pub fn check_dp_proof(d: &DpProblem, proof: &DpProof) -> Result<(), String> {
    match proof {
        DpProof::Empty if d.pairs.is_empty() => Ok(()),
        DpProof::Empty => Err(format!("{} pairs remain", d.pairs.len())),
        DpProof::Graph { components } => {
            let expected: BTreeSet<Vec<usize>> = sccs(d.pairs.len(), &d.graph_edges()).into_iter().collect();
            let claimed: BTreeSet<Vec<usize>> = components.iter().map(|(c, _)| c.clone()).collect();
            if expected != claimed {
                return Err(format!("SCCs differ: expected {expected:?}, claimed {claimed:?}"));
            }
            components.iter().try_for_each(|(c, p)| check_dp_proof(&d.restrict(c), p))
        }
        DpProof::Rp {
            interpretation,
            strict,
            rest,
        } => {
            let pol = Interp::from_records(interpretation).ok_or("malformed interpretation")?;
            let strict: BTreeSet<usize> = strict.iter().copied().collect();
            if strict.iter().any(|&i| i >= d.pairs.len()) {
                return Err("strict pair out of range".into());
            }
            let rep = check_interp(&pol, &d.as_adps(), &strict);
            if !rep.ok {
                return Err(format!("interpretation rejected:\n{rep}"));
            }
            let keep: Vec<usize> = (0..d.pairs.len()).filter(|i| !strict.contains(i)).collect();
            check_dp_proof(&d.restrict(&keep), rest)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(t: Term) -> Term {
        Term::app("s", vec![t])
    }

    #[test]
    fn size_decreasing_pair() {
        let y = Term::var("y");
        let d = DpProblem {
            pairs: vec![(Term::sharp("loop2", vec![s(y.clone())]), Term::sharp("loop2", vec![y]))],
            rules: vec![],
            strategy: Strategy::Full,
        };
        let DpResult::Terminating(p) = dp_terminates(&d, &RpConfig::default()) else {
            panic!("expected a proof");
        };
        check_dp_proof(&d, &p).unwrap();
    }

    #[test]
    fn constant_loop_is_unknown() {
        let a = Term::constant("a");
        let d = DpProblem {
            pairs: vec![(Term::sharp("f", vec![Term::var("x")]), Term::sharp("f", vec![a.clone()]))],
            rules: vec![(a.clone(), a)],
            strategy: Strategy::Full,
        };
        assert_eq!(dp_terminates(&d, &RpConfig::default()), DpResult::Unknown);
    }

    #[test]
    fn no_pairs() {
        let d = DpProblem {
            pairs: vec![],
            rules: vec![(Term::constant("a"), Term::constant("a"))],
            strategy: Strategy::Innermost,
        };
        assert_eq!(dp_terminates(&d, &RpConfig::default()), DpResult::Terminating(DpProof::Empty));
        assert!(d.to_text().contains("(PAIRS\n)"));
    }
}
