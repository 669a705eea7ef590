//! The proof driver: chain criteria, the processor pipeline and verdicts.

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::adp::{canonical_problem, AdpProblem, Goal};
use crate::processors::{proc_dg, proc_pr, proc_ur, proc_ut, usable_rules, PrOutcome};
use crate::proof::{Justification, ProblemRecord, ProofDoc, ProofNode};
use crate::ptrs::{Certainty, Ptrs, Transfer, TransferGoal};
use crate::redpair::{proc_rp, RpConfig};

/// A processor the pipeline may apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    #[serde(rename = "DG")]
    Dg,
    #[serde(rename = "UT")]
    Ut,
    #[serde(rename = "UR")]
    Ur,
    #[serde(rename = "PR")]
    Pr,
    #[serde(rename = "RP")]
    Rp,
}

#[derive(Clone, Debug)]
pub struct ProverConfig {
    pub rp: RpConfig,
    pub timeout: Option<Duration>,
    /// Try the transfer to innermost termination first for AST and bAST.
    pub transfer: bool,
    /// Processor order; after any change the pipeline restarts at the
    /// first entry. `PR` is only tried on problems with trivial
    /// distributions.
    pub order: Vec<Step>,
    /// Bound on the nesting of processor applications.
    pub max_depth: usize,
}

impl Default for ProverConfig {
    fn default() -> Self {
        ProverConfig {
            rp: RpConfig::default(),
            timeout: Some(Duration::from_secs(60)),
            transfer: true,
            order: vec![Step::Dg, Step::Ut, Step::Ur, Step::Pr, Step::Rp],
            max_depth: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Answer {
    #[serde(rename = "AST")]
    Ast,
    #[serde(rename = "bAST")]
    Bast,
    #[serde(rename = "iAST")]
    Iast,
    #[serde(rename = "MAYBE")]
    Maybe,
}

impl Answer {
    pub fn of_goal(g: Goal) -> Self {
        match g {
            Goal::Ast => Answer::Ast,
            Goal::Bast => Answer::Bast,
            Goal::Iast => Answer::Iast,
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Ast => "AST",
            Answer::Bast => "bAST",
            Answer::Iast => "iAST",
            Answer::Maybe => "MAYBE",
        })
    }
}

impl std::str::FromStr for Answer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ast" => Ok(Answer::Ast),
            "bast" => Ok(Answer::Bast),
            "iast" => Ok(Answer::Iast),
            "maybe" => Ok(Answer::Maybe),
            other => Err(format!("unknown answer {other}")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub answer: Answer,
    /// Present iff the answer is not MAYBE.
    pub proof: Option<ProofDoc>,
    pub elapsed: Duration,
    /// Why the prover gave up, for MAYBE.
    pub note: Option<String>,
}

struct Driver<'a> {
    config: &'a ProverConfig,
    deadline: Option<Instant>,
}

impl Driver<'_> {
    fn timed_out(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn rp_config(&self) -> RpConfig {
        let mut rp = self.config.rp.clone();
        if let Some(d) = self.deadline {
            // At most half of the remaining budget per invocation.
            let now = Instant::now();
            let half = d.saturating_duration_since(now) / 2;
            let own = now + half;
            rp.deadline = Some(rp.deadline.map_or(own, |x| x.min(own)));
        }
        rp
    }

    fn node(p: &AdpProblem, justification: Justification, children: Vec<ProofNode>) -> ProofNode {
        ProofNode {
            problem: Some(ProblemRecord::of(p)),
            justification,
            children,
        }
    }

    /// Depth-first: a proof of `p` or `None`.
    fn solve(&self, p: &AdpProblem, depth: usize) -> Option<ProofNode> {
        if !p.has_annotations() {
            return Some(Self::node(p, Justification::NoAnnotations, vec![]));
        }
        if depth >= self.config.max_depth || self.timed_out() {
            return None;
        }
        for step in &self.config.order {
            match step {
                Step::Dg => {
                    let res = proc_dg(p);
                    if res.problems.len() == 1 && res.problems[0] == *p {
                        continue;
                    }
                    let mut kids = Vec::new();
                    for q in &res.problems {
                        kids.push(self.solve(q, depth + 1)?);
                    }
                    let chains = res
                        .chains
                        .iter()
                        .map(|(k, j)| (*k, j.iter().copied().collect()))
                        .collect();
                    return Some(Self::node(
                        p,
                        Justification::Dg {
                            sccs: res.sccs,
                            chains,
                        },
                        kids,
                    ));
                }
                Step::Ut => {
                    let q = proc_ut(p);
                    if q != *p {
                        let kid = self.solve(&q, depth + 1)?;
                        return Some(Self::node(p, Justification::Ut, vec![kid]));
                    }
                }
                Step::Ur => {
                    let Ok(q) = proc_ur(p) else { continue };
                    if q != *p {
                        let base = match p.goal {
                            Goal::Bast => p.all_adps(),
                            _ => p.adps.clone(),
                        };
                        let usable = usable_rules(&base).into_iter().map(|i| base[i].to_string()).collect();
                        let kid = self.solve(&q, depth + 1)?;
                        return Some(Self::node(p, Justification::Ur { usable }, vec![kid]));
                    }
                }
                Step::Pr => {
                    if !p.all_singletons() {
                        continue;
                    }
                    if let PrOutcome::Removed { dp, proof } = proc_pr(p, &self.rp_config()) {
                        return Some(Self::node(
                            p,
                            Justification::Pr {
                                dp_problem: dp.to_text(),
                                proof,
                            },
                            vec![],
                        ));
                    }
                }
                Step::Rp => {
                    if let Some((q, sol)) = proc_rp(p, &self.rp_config()) {
                        let kid = self.solve(&q, depth + 1)?;
                        return Some(Self::node(
                            p,
                            Justification::Rp {
                                interpretation: sol.interp.to_records(),
                                strict: sol.strict.into_iter().collect(),
                            },
                            vec![kid],
                        ));
                    }
                }
            }
        }
        None
    }

    fn chain(&self, r: &Ptrs, goal: Goal) -> Option<ProofNode> {
        let p = canonical_problem(r, goal);
        let kid = self.solve(&p, 0)?;
        Some(ProofNode {
            problem: None,
            justification: Justification::ChainCriterion,
            children: vec![kid],
        })
    }
}

/// Runs the chain criterion for the goal, possibly after a transfer to
/// iAST, followed by the processor pipeline.
pub fn prove(r: &Ptrs, goal: Goal, config: &ProverConfig) -> Verdict {
    let start = Instant::now();
    let driver = Driver {
        config,
        deadline: config.timeout.map(|t| start + t),
    };
    let mut notes = Vec::new();
    let done = |root: ProofNode| Verdict {
        answer: Answer::of_goal(goal),
        proof: Some(ProofDoc::new(goal, r, root)),
        elapsed: start.elapsed(),
        note: None,
    };
    let transfer_goal = match goal {
        Goal::Ast => Some(TransferGoal::Ast),
        Goal::Bast => Some(TransferGoal::Bast),
        Goal::Iast => None,
    };
    if let Some(tg) = transfer_goal.filter(|_| config.transfer) {
        if r.iast_transfer_class(tg) == Transfer::Applicable {
            if let Some(n) = driver.chain(r, Goal::Iast) {
                return done(ProofNode {
                    problem: None,
                    justification: Justification::TransferToInnermost { goal },
                    children: vec![n],
                });
            }
            notes.push("iAST could not be shown for the transfer".to_string());
        } else {
            notes.push("PTRS is outside the transfer classes".to_string());
        }
    }
    let applicable = match goal {
        Goal::Iast => true,
        Goal::Ast => r.is_non_duplicating(),
        Goal::Bast => r.is_weakly_spare_sufficient() == Certainty::Yes,
    };
    if applicable {
        if let Some(n) = driver.chain(r, goal) {
            return done(n);
        }
        notes.push(if driver.timed_out() {
            "timeout".to_string()
        } else {
            "processors exhausted".to_string()
        });
    } else {
        notes.push(match goal {
            Goal::Ast => "PTRS is duplicating".to_string(),
            _ => "PTRS is not known to be weakly spare".to_string(),
        });
    }
    Verdict {
        answer: Answer::Maybe,
        proof: None,
        elapsed: start.elapsed(),
        note: Some(notes.join("; ")),
    }
}
