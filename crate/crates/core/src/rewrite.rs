//! Executable rewrite relations: plain PTRS steps (full and innermost) and
//! ADP steps (full with variable reposition functions, and innermost).
//!
//! Steps are enumerated by position (leftmost-outermost), then rule index,
//! then VRF index.

use crate::adp::Adp;
use crate::ptrs::{MultiDistribution, PRule};
use crate::term::{match_term, Position, Signature, Substitution, Term};

/// Which case of the ADP rewrite relation a step uses: annotated redex or
/// not, combined with the flag of the applied ADP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Case {
    At,
    Af,
    Nt,
    Nf,
}

impl Case {
    fn of(annotated: bool, flag: bool) -> Case {
        match (annotated, flag) {
            (true, true) => Case::At,
            (true, false) => Case::Af,
            (false, true) => Case::Nt,
            (false, false) => Case::Nf,
        }
    }

    /// Steps at annotated positions; these are the steps a chain tree must
    /// contain infinitely often on every infinite path.
    pub fn is_annotated(self) -> bool {
        matches!(self, Case::At | Case::Af)
    }
}

/// Per branch, the target of each lhs variable position (in the order of
/// [`Term::variable_positions`]), or `None` for ⊥.
pub type Vrf = Vec<Vec<Option<Position>>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VrfMode {
    /// Only the canonical left-to-right injective VRF.
    Greedy,
    /// Every injective VRF, at most `cap` per redex.
    All { cap: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    pub adp: usize,
    pub position: Position,
    pub sigma: Substitution,
    pub case: Case,
    pub vrf: Option<Vrf>,
    pub result: MultiDistribution,
}

/// A step of an ordinary PTRS.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlainStep {
    pub rule: usize,
    pub position: Position,
    pub result: MultiDistribution,
}

fn is_defined_position(t: &Term, sig: &Signature) -> bool {
    t.root().is_some_and(|f| sig.is_defined(f))
}

/// True iff no lhs matches a proper subterm of `t` with annotations removed.
pub fn anf<'a>(t: &Term, lhss: impl IntoIterator<Item = &'a Term> + Clone) -> bool {
    t.subterms().into_iter().all(|(p, sub)| {
        p.is_root()
            || sub.is_var()
            || {
                let flat = sub.flatten();
                lhss.clone().into_iter().all(|l| match_term(l, &flat).is_none())
            }
    })
}

/// Every PTRS step from `s` (which must be unannotated).
pub fn ptrs_steps(s: &Term, rules: &[PRule], innermost: bool) -> Vec<PlainStep> {
    let lhss: Vec<&Term> = rules.iter().map(|r| &r.lhs).collect();
    let mut out = Vec::new();
    for (pos, sub) in s.subterms() {
        if sub.is_var() {
            continue;
        }
        if innermost && !anf(sub, lhss.iter().copied()) {
            continue;
        }
        for (i, rule) in rules.iter().enumerate() {
            if let Some(sigma) = match_term(&rule.lhs, sub) {
                let result = rule.rhs.map(|r| {
                    s.replace_at(&pos, r.apply(&sigma))
                        .expect("position comes from the term")
                });
                out.push(PlainStep {
                    rule: i,
                    position: pos.clone(),
                    result,
                });
            }
        }
    }
    out
}

/// The canonical VRF: lhs variable occurrences left to right, each mapped to
/// the first unused occurrence of the same variable in the branch.
pub fn greedy_vrf(adp: &Adp) -> Vrf {
    let lvars = adp.lhs.variable_positions();
    adp.rhs
        .terms()
        .map(|r| {
            let mut targets = r.variable_positions();
            lvars
                .iter()
                .map(|(_, x)| {
                    let k = targets.iter().position(|(_, y)| y == x)?;
                    Some(targets.remove(k).0)
                })
                .collect()
        })
        .collect()
}

/// Every injective VRF, stopping after `cap` families.
pub fn all_vrfs(adp: &Adp, cap: usize) -> Vec<Vrf> {
    let lvars = adp.lhs.variable_positions();
    let per_branch: Vec<Vec<Vec<Option<Position>>>> = adp
        .rhs
        .terms()
        .map(|r| {
            let targets = r.variable_positions();
            let mut out = Vec::new();
            let mut used = vec![false; targets.len()];
            let mut cur = Vec::new();
            injective_maps(&lvars, &targets, &mut used, &mut cur, &mut out, cap);
            out
        })
        .collect();
    let mut families: Vec<Vrf> = vec![Vec::new()];
    for options in per_branch {
        let mut next = Vec::new();
        'outer: for fam in &families {
            for o in &options {
                if next.len() >= cap {
                    break 'outer;
                }
                let mut f = fam.clone();
                f.push(o.clone());
                next.push(f);
            }
        }
        families = next;
    }
    families
}

fn injective_maps(
    lvars: &[(Position, crate::term::Name)],
    targets: &[(Position, crate::term::Name)],
    used: &mut Vec<bool>,
    cur: &mut Vec<Option<Position>>,
    out: &mut Vec<Vec<Option<Position>>>,
    cap: usize,
) {
    if out.len() >= cap {
        return;
    }
    let k = cur.len();
    if k == lvars.len() {
        out.push(cur.clone());
        return;
    }
    let x = &lvars[k].1;
    for (i, (p, y)) in targets.iter().enumerate() {
        if y == x && !used[i] {
            used[i] = true;
            cur.push(Some(p.clone()));
            injective_maps(lvars, targets, used, cur, out, cap);
            cur.pop();
            used[i] = false;
        }
    }
    cur.push(None);
    injective_maps(lvars, targets, used, cur, out, cap);
    cur.pop();
}

fn plug(s: &Term, pos: &Position, replacement: Term, strip: bool) -> Term {
    let t = s
        .replace_at(pos, replacement)
        .expect("position comes from the term");
    if strip {
        t.strip_above(pos).expect("position is valid")
    } else {
        t
    }
}

/// Every full ADP step from `s`; `include_nf` enables unannotated steps
/// with flag-false ADPs.
pub fn rewrite_full(
    s: &Term,
    adps: &[Adp],
    sig: &Signature,
    include_nf: bool,
    mode: VrfMode,
) -> Vec<StepOutcome> {
    let mut out = Vec::new();
    for (pos, sub) in s.subterms() {
        if !is_defined_position(sub, sig) {
            continue;
        }
        let flat = sub.flatten();
        for (i, adp) in adps.iter().enumerate() {
            let Some(sigma) = match_term(&adp.lhs, &flat) else {
                continue;
            };
            let case = Case::of(sub.is_root_annotated(), adp.flag);
            if case == Case::Nf && !include_nf {
                continue;
            }
            let vrfs = match mode {
                VrfMode::Greedy => vec![greedy_vrf(adp)],
                VrfMode::All { cap } => all_vrfs(adp, cap),
            };
            let lvars = adp.lhs.variable_positions();
            for vrf in vrfs {
                let branches = adp
                    .rhs
                    .branches
                    .iter()
                    .zip(&vrf)
                    .map(|((p, r), phi)| {
                        let base = if case.is_annotated() { r.clone() } else { r.flatten() };
                        let mut t = base.apply(&sigma);
                        for ((rho, _), target) in lvars.iter().zip(phi) {
                            if let Some(target) = target {
                                let kept = sub.subterm_at(rho).expect("variable position").clone();
                                t = t.replace_at(target, kept).expect("variable position");
                            }
                        }
                        let strip = matches!(case, Case::Af | Case::Nf);
                        (*p, plug(s, &pos, t, strip))
                    })
                    .collect();
                out.push(StepOutcome {
                    adp: i,
                    position: pos.clone(),
                    sigma: sigma.clone(),
                    case,
                    vrf: Some(vrf),
                    result: MultiDistribution { branches },
                });
            }
        }
    }
    out
}

/// Every innermost ADP step from `s`. Annotations inside the matched
/// substitution are dropped, since those subterms are normal forms.
pub fn rewrite_innermost(s: &Term, adps: &[Adp], sig: &Signature) -> Vec<StepOutcome> {
    let lhss: Vec<&Term> = adps.iter().map(|a| &a.lhs).collect();
    let mut out = Vec::new();
    for (pos, sub) in s.subterms() {
        if !is_defined_position(sub, sig) {
            continue;
        }
        let flat = sub.flatten();
        if !anf(&flat, lhss.iter().copied()) {
            continue;
        }
        for (i, adp) in adps.iter().enumerate() {
            let Some(sigma) = match_term(&adp.lhs, &flat) else {
                continue;
            };
            let case = Case::of(sub.is_root_annotated(), adp.flag);
            let strip = matches!(case, Case::Af | Case::Nf);
            let branches = adp
                .rhs
                .branches
                .iter()
                .map(|(p, r)| {
                    let base = if case.is_annotated() { r.clone() } else { r.flatten() };
                    (*p, plug(s, &pos, base.apply(&sigma), strip))
                })
                .collect();
            out.push(StepOutcome {
                adp: i,
                position: pos.clone(),
                sigma,
                case,
                vrf: None,
                result: MultiDistribution { branches },
            });
        }
    }
    out
}
