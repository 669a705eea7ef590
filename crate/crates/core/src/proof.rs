//! Proof objects (JSON schema `adp-proof/1`) and an independent checker
//! that replays every processor step without searching.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adp::{canonical_problem, parse_adp, Adp, AdpProblem, Goal};
use crate::nonprob::{check_dp_proof, DpProof};
use crate::poly::{Interp, InterpRecord};
use crate::processors::{dp_problem, proc_dg, proc_ur, proc_ut, usable_rules};
use crate::ptrs::{Certainty, Ptrs, Transfer, TransferGoal};
use crate::redpair::{apply_rp, check_interp};
use crate::syntax::{parse_ptrs, print_ptrs};
use crate::term::{Name, Signature};

pub const SCHEMA: &str = "adp-proof/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub goal: Goal,
    /// The reachability component of a basic problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reach: Option<Vec<String>>,
    pub adps: Vec<String>,
}

impl ProblemRecord {
    pub fn of(p: &AdpProblem) -> Self {
        ProblemRecord {
            goal: p.goal,
            reach: p.reach.as_ref().map(|r| r.iter().map(Adp::to_string).collect()),
            adps: p.adps.iter().map(Adp::to_string).collect(),
        }
    }

    pub fn parse(&self, sig: &Signature, vars: &BTreeSet<Name>) -> Result<AdpProblem, CheckError> {
        let parse_all = |v: &[String]| -> Result<Vec<Adp>, CheckError> {
            v.iter()
                .map(|s| parse_adp(s, vars, sig).map_err(|e| CheckError::Malformed(format!("{s}: {e}"))))
                .collect()
        };
        let adps = parse_all(&self.adps)?;
        let reach = self.reach.as_deref().map(parse_all).transpose()?;
        Ok(AdpProblem::new(sig.clone(), self.goal, adps, reach))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "processor")]
pub enum Justification {
    /// The PTRS reduces to its canonical (basic) ADP problem.
    ChainCriterion,
    /// The PTRS belongs to a class where iAST implies the goal.
    TransferToInnermost { goal: Goal },
    #[serde(rename = "DG")]
    Dg {
        sccs: Vec<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        chains: Vec<(usize, Vec<usize>)>,
    },
    #[serde(rename = "UT")]
    Ut,
    #[serde(rename = "UR")]
    Ur { usable: Vec<String> },
    #[serde(rename = "RP")]
    Rp {
        interpretation: Vec<InterpRecord>,
        /// Indices into the problem's ADP list.
        strict: Vec<usize>,
    },
    #[serde(rename = "PR")]
    Pr { dp_problem: String, proof: DpProof },
    NoAnnotations,
}

impl Justification {
    pub fn name(&self) -> &'static str {
        match self {
            Justification::ChainCriterion => "ChainCriterion",
            Justification::TransferToInnermost { .. } => "TransferToInnermost",
            Justification::Dg { .. } => "DG",
            Justification::Ut => "UT",
            Justification::Ur { .. } => "UR",
            Justification::Rp { .. } => "RP",
            Justification::Pr { .. } => "PR",
            Justification::NoAnnotations => "NoAnnotations",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofNode {
    /// The problem the processor is applied to; absent for the
    /// transfer step, which concerns the PTRS itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemRecord>,
    pub justification: Justification,
    pub children: Vec<ProofNode>,
}

impl ProofNode {
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(ProofNode::size).sum::<usize>()
    }

    /// All nodes, preorder.
    pub fn nodes(&self) -> Vec<&ProofNode> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.nodes());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofDoc {
    pub schema: String,
    pub goal: Goal,
    /// The input PTRS in the input syntax.
    pub input: String,
    pub root: ProofNode,
}

impl ProofDoc {
    pub fn new(goal: Goal, input: &Ptrs, root: ProofNode) -> Self {
        ProofDoc {
            schema: SCHEMA.into(),
            goal,
            input: print_ptrs(input),
            root,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("proof documents serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckError> {
        serde_json::from_str(text).map_err(|e| CheckError::Malformed(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Goal: {}", self.goal);
        write_node(&mut out, &self.root, 0);
        out
    }
}

fn write_node(out: &mut String, n: &ProofNode, depth: usize) {
    let pad = "  ".repeat(depth);
    let _ = write!(out, "{pad}- {}", n.justification.name());
    match &n.justification {
        Justification::Dg { sccs, .. } => {
            let _ = write!(out, " (SCCs {sccs:?})");
        }
        Justification::Ur { usable } => {
            let _ = write!(out, " ({} usable)", usable.len());
        }
        Justification::Rp { interpretation, strict } => {
            let _ = write!(out, " (strict {strict:?})");
            let pol = Interp::from_records(interpretation).unwrap_or_default();
            out.push('\n');
            for line in pol.to_string().lines() {
                let _ = writeln!(out, "{pad}    {line}");
            }
            out.pop();
        }
        Justification::TransferToInnermost { goal } => {
            let _ = write!(out, " ({goal} via iAST)");
        }
        _ => {}
    }
    out.push('\n');
    if let Some(p) = &n.problem {
        if let Some(r) = &p.reach {
            for a in r {
                let _ = writeln!(out, "{pad}    I: {a}");
            }
        }
        for a in &p.adps {
            let _ = writeln!(out, "{pad}    P: {a}");
        }
    }
    for c in &n.children {
        write_node(out, c, depth + 1);
    }
}

impl fmt::Display for ProofDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("malformed proof: {0}")]
    Malformed(String),
    #[error("{processor} step rejected: {reason}")]
    Rejected { processor: String, reason: String },
}

fn reject(j: &Justification, reason: impl Into<String>) -> CheckError {
    CheckError::Rejected {
        processor: j.name().into(),
        reason: reason.into(),
    }
}

struct Ctx {
    sig: Signature,
    vars: BTreeSet<Name>,
}

fn same(a: &AdpProblem, b: &AdpProblem) -> bool {
    let set = |v: &[Adp]| v.iter().cloned().collect::<BTreeSet<_>>();
    a.goal == b.goal && set(&a.adps) == set(&b.adps) && set(a.reach()) == set(b.reach())
}

/// Replays the whole proof against its input PTRS.
pub fn check_proof(doc: &ProofDoc) -> Result<(), CheckError> {
    if doc.schema != SCHEMA {
        return Err(CheckError::Malformed(format!("unknown schema {}", doc.schema)));
    }
    let r = parse_ptrs(&doc.input).map_err(|e| CheckError::Malformed(e.to_string()))?;
    let vars: BTreeSet<Name> = r
        .rules
        .iter()
        .flat_map(|rule| rule.lhs.variables())
        .collect();
    let ctx = Ctx {
        sig: r.signature.clone(),
        vars,
    };
    let root = &doc.root;
    match &root.justification {
        Justification::TransferToInnermost { goal } => {
            let tg = match goal {
                Goal::Ast => TransferGoal::Ast,
                Goal::Bast => TransferGoal::Bast,
                Goal::Iast => return Err(reject(&root.justification, "nothing to transfer for iAST")),
            };
            if *goal != doc.goal || r.iast_transfer_class(tg) != Transfer::Applicable {
                return Err(reject(&root.justification, "PTRS outside the transfer class"));
            }
            let [child] = root.children.as_slice() else {
                return Err(reject(&root.justification, "expected one child"));
            };
            check_chain_criterion(&r, Goal::Iast, child, &ctx)
        }
        _ => check_chain_criterion(&r, doc.goal, root, &ctx),
    }
}

fn check_chain_criterion(r: &Ptrs, goal: Goal, node: &ProofNode, ctx: &Ctx) -> Result<(), CheckError> {
    let j = &node.justification;
    if *j != Justification::ChainCriterion {
        return Err(reject(j, "expected the chain criterion at the root"));
    }
    let ok = match goal {
        Goal::Iast => true,
        Goal::Ast => r.is_non_duplicating(),
        Goal::Bast => r.is_weakly_spare_sufficient() == Certainty::Yes,
    };
    if !ok {
        return Err(reject(j, format!("PTRS does not satisfy the precondition for {goal}")));
    }
    let expected = canonical_problem(r, goal);
    let [child] = node.children.as_slice() else {
        return Err(reject(j, "expected one child"));
    };
    let got = child
        .problem
        .as_ref()
        .ok_or_else(|| reject(j, "child without problem"))?
        .parse(&ctx.sig, &ctx.vars)?;
    if !same(&got, &expected) {
        return Err(reject(j, "child is not the canonical ADP problem"));
    }
    check_node(child, ctx)
}

fn children_problems(node: &ProofNode, ctx: &Ctx) -> Result<Vec<AdpProblem>, CheckError> {
    node.children
        .iter()
        .map(|c| {
            c.problem
                .as_ref()
                .ok_or_else(|| reject(&node.justification, "child without problem"))?
                .parse(&ctx.sig, &ctx.vars)
        })
        .collect()
}

fn check_node(node: &ProofNode, ctx: &Ctx) -> Result<(), CheckError> {
    let j = &node.justification;
    let p = node
        .problem
        .as_ref()
        .ok_or_else(|| reject(j, "missing problem"))?
        .parse(&ctx.sig, &ctx.vars)?;
    let kids = children_problems(node, ctx)?;
    let single = |expected: &AdpProblem| -> Result<(), CheckError> {
        match kids.as_slice() {
            [k] if same(k, expected) => Ok(()),
            [_] => Err(reject(j, "child problem differs from the processor result")),
            _ => Err(reject(j, "expected one child")),
        }
    };
    match j {
        Justification::ChainCriterion | Justification::TransferToInnermost { .. } => {
            return Err(reject(j, "only allowed at the root"));
        }
        Justification::NoAnnotations => {
            if p.has_annotations() || !kids.is_empty() {
                return Err(reject(j, "problem still has annotations"));
            }
        }
        Justification::Dg { sccs, chains } => {
            let res = proc_dg(&p);
            if &res.sccs != sccs {
                return Err(reject(j, format!("SCCs are {:?}, claimed {sccs:?}", res.sccs)));
            }
            let claimed: Vec<(usize, Vec<usize>)> =
                res.chains.iter().map(|(k, s)| (*k, s.iter().copied().collect())).collect();
            if &claimed != chains {
                return Err(reject(j, "reaching sets differ"));
            }
            if res.problems.len() != kids.len() || !res.problems.iter().zip(&kids).all(|(a, b)| same(a, b)) {
                return Err(reject(j, "sub-problems differ"));
            }
        }
        Justification::Ut => single(&proc_ut(&p))?,
        Justification::Ur { usable } => {
            let q = proc_ur(&p).map_err(|e| reject(j, e.to_string()))?;
            let base = match p.goal {
                Goal::Bast => p.all_adps(),
                _ => p.adps.clone(),
            };
            let actual: BTreeSet<String> = usable_rules(&base).into_iter().map(|i| base[i].to_string()).collect();
            let claimed: BTreeSet<String> = usable.iter().cloned().collect();
            if claimed != actual {
                return Err(reject(j, "usable set differs"));
            }
            single(&q)?;
        }
        Justification::Rp { interpretation, strict } => {
            let pol = Interp::from_records(interpretation).ok_or_else(|| reject(j, "bad interpretation"))?;
            let strict: BTreeSet<usize> = strict.iter().copied().collect();
            if strict.iter().any(|&i| i >= p.adps.len() || !p.adps[i].has_annotations()) {
                return Err(reject(j, "strict ADPs must be annotated members of P"));
            }
            let rep = check_interp(&pol, &p.adps, &strict);
            if !rep.ok {
                return Err(reject(j, format!("interpretation rejected:\n{rep}")));
            }
            single(&apply_rp(&p, &strict))?;
        }
        Justification::Pr { dp_problem: text, proof } => {
            let d = dp_problem(&p).ok_or_else(|| reject(j, "not all distributions are trivial"))?;
            if &d.to_text() != text {
                return Err(reject(j, "stored DP problem differs from (dp(P), np(P))"));
            }
            check_dp_proof(&d, proof).map_err(|e| reject(j, e))?;
            if !kids.is_empty() {
                return Err(reject(j, "probability removal closes the problem"));
            }
        }
    }
    node.children.iter().try_for_each(|c| check_node(c, ctx))
}
