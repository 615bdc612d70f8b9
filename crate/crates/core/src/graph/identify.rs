use std::fmt::Write as _;

use super::dsep::{open_path, open_path_filtered, Path};
use super::{CausalDag, GraphError, NodeRole};

/// Printed with every report; the checker cannot test it.
pub const STRUCTURE_ASSUMPTION: &str =
    "assumption: the drawn structure is taken to hold under every (z_A, z_Y) compared; this is not checked";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IdRule {
    /// Backdoor path between an unrandomized treatment and the final outcome.
    Backdoor,
    /// Open path from the adherence component into outcomes or outcome-side covariates.
    ComponentAToOutcome,
    /// Open path from the outcome component into adherence or adherence-side covariates.
    ComponentYToAdherence,
    /// Unmeasured common cause of the adherence side and the outcome side.
    UnmeasuredCommonCause,
}

impl IdRule {
    pub fn code(self) -> &'static str {
        match self {
            IdRule::Backdoor => "i",
            IdRule::ComponentAToOutcome => "ii",
            IdRule::ComponentYToAdherence => "iii",
            IdRule::UnmeasuredCommonCause => "iv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdViolation {
    pub rule: IdRule,
    /// Node the rule was checked for (the unmeasured node for rule iv).
    pub target: String,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdentificationReport {
    pub violations: Vec<IdViolation>,
}

impl IdentificationReport {
    pub fn identified(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn verdict(&self) -> &'static str {
        if self.identified() {
            "identified"
        } else {
            "violated"
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("verdict: {}\n", self.verdict());
        for v in &self.violations {
            let _ = writeln!(out, "rule ({})\t{}\t{}", v.rule.code(), v.target, v.witness);
        }
        let _ = writeln!(out, "{STRUCTURE_ASSUMPTION}");
        out
    }
}

fn is_measured_history(role: NodeRole) -> bool {
    role.slot().is_some()
}

/// Measured adherence, covariate and outcome nodes preceding `target`.
fn history_before(dag: &CausalDag, target: usize) -> Vec<usize> {
    let t = dag.role(target);
    let (kt, st) = (t.interval().unwrap(), t.slot().unwrap());
    (0..dag.len())
        .filter(|&i| {
            let r = dag.role(i);
            match (r.interval(), r.slot()) {
                (Some(k), Some(s)) => k < kt || (k == kt && s < st),
                _ => false,
            }
        })
        .collect()
}

fn order_key(dag: &CausalDag, i: usize) -> (u32, u32, String) {
    let r = dag.role(i);
    (r.interval().unwrap_or(0), r.slot().unwrap_or(9), dag.name(i).to_string())
}

fn require(dag: &CausalDag, role: NodeRole, what: &str) -> Result<usize, GraphError> {
    dag.find_role(role)
        .ok_or_else(|| GraphError::MissingRole(format!("no {what} node")))
}

/// Checks the graphical identification conditions up to interval `horizon`.
pub fn check_identification(dag: &CausalDag, horizon: u32) -> Result<IdentificationReport, GraphError> {
    if let Some(n) = dag.nodes().iter().find(|n| matches!(n.role, NodeRole::Covariate(_))) {
        return Err(GraphError::MissingRole(format!(
            "covariate `{}` is not declared adherence-side (LA) or outcome-side (LY)",
            n.name
        )));
    }
    let za = require(dag, NodeRole::ComponentA, "ZA")?;
    let zy = require(dag, NodeRole::ComponentY, "ZY")?;
    let mut violations = Vec::new();
    let within = |i: usize| dag.role(i).interval().is_some_and(|k| k <= horizon);

    if let Some(z) = dag.find_role(NodeRole::Treatment) {
        if !dag.node(z).randomized {
            let final_outcome = (0..dag.len())
                .filter(|&i| matches!(dag.role(i), NodeRole::Outcome(_)) && within(i))
                .max_by_key(|&i| order_key(dag, i));
            if let Some(y) = final_outcome {
                if let Some(p) = open_path_filtered(dag, &[z], &[y], &[], |p| !p.forward[0]) {
                    violations.push(IdViolation {
                        rule: IdRule::Backdoor,
                        target: dag.name(y).to_string(),
                        witness: p.render(dag),
                    });
                }
            }
        }
    }

    let mut targets: Vec<usize> = (0..dag.len()).filter(|&i| is_measured_history(dag.role(i)) && within(i)).collect();
    targets.sort_by_key(|&i| order_key(dag, i));
    for (rule, source, other, wanted) in [
        (IdRule::ComponentAToOutcome, za, zy, [NodeRole::Outcome(0), NodeRole::CovariateY(0)]),
        (IdRule::ComponentYToAdherence, zy, za, [NodeRole::Adherence(0), NodeRole::CovariateA(0)]),
    ] {
        for &t in &targets {
            let r = dag.role(t);
            if !wanted.iter().any(|w| std::mem::discriminant(w) == std::mem::discriminant(&r)) {
                continue;
            }
            let mut given = history_before(dag, t);
            given.push(other);
            if let Some(p) = open_path(dag, &[source], &[t], &given) {
                violations.push(IdViolation {
                    rule,
                    target: dag.name(t).to_string(),
                    witness: p.render(dag),
                });
            }
        }
    }

    let side_a: Vec<usize> = targets
        .iter()
        .copied()
        .filter(|&t| matches!(dag.role(t), NodeRole::Adherence(_) | NodeRole::CovariateA(_)))
        .collect();
    let side_y: Vec<usize> = targets
        .iter()
        .copied()
        .filter(|&t| matches!(dag.role(t), NodeRole::Outcome(_) | NodeRole::CovariateY(_)))
        .collect();
    let mut unmeasured: Vec<usize> = (0..dag.len()).filter(|&i| dag.role(i) == NodeRole::Unmeasured).collect();
    unmeasured.sort_by_key(|&i| dag.name(i).to_string());
    for u in unmeasured {
        let to_a = directed_unmeasured_path(dag, u, &side_a);
        let to_y = directed_unmeasured_path(dag, u, &side_y);
        if let (Some(pa), Some(py)) = (to_a, to_y) {
            let mut nodes: Vec<usize> = pa.iter().rev().copied().collect();
            nodes.extend_from_slice(&py[1..]);
            let mut forward = vec![false; pa.len() - 1];
            forward.extend(vec![true; py.len() - 1]);
            violations.push(IdViolation {
                rule: IdRule::UnmeasuredCommonCause,
                target: dag.name(u).to_string(),
                witness: Path { nodes, forward }.render(dag),
            });
        }
    }
    violations.sort_by_key(|v| v.rule);
    Ok(IdentificationReport { violations })
}

/// Shortest directed path from `u` into `targets` through unmeasured nodes
/// only, ties broken by node names.
fn directed_unmeasured_path(dag: &CausalDag, u: usize, targets: &[usize]) -> Option<Vec<usize>> {
    fn walk(dag: &CausalDag, path: &mut Vec<usize>, targets: &[usize], best: &mut Option<Vec<usize>>) {
        let here = *path.last().unwrap();
        for &c in dag.children(here) {
            if path.contains(&c) {
                continue;
            }
            path.push(c);
            if targets.contains(&c) {
                let key = |p: &Vec<usize>| (p.len(), p.iter().map(|&n| dag.name(n).to_string()).collect::<Vec<_>>());
                if best.as_ref().map_or(true, |b| key(path) < key(b)) {
                    *best = Some(path.clone());
                }
            } else if dag.role(c) == NodeRole::Unmeasured {
                walk(dag, path, targets, best);
            }
            path.pop();
        }
    }
    let mut best = None;
    walk(dag, &mut vec![u], targets, &mut best);
    best
}

/// Structural classification of covariate nodes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CovariatePartition {
    pub adherence_side: Vec<String>,
    pub outcome_side: Vec<String>,
    pub non_prognostic: Vec<String>,
    /// Covariates fitting no class cleanly, with the reason.
    pub ambiguous: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    A,
    Y,
    Both,
    Neither,
}

/// Classifies every covariate node (typed or not) from the graph structure.
///
/// A covariate is non-prognostic when it reaches an outcome only through
/// adherence or treatment nodes. Otherwise it is adherence-side when a
/// component `Z_A` affects it without passing through adherence, outcome-side
/// when `Z_Y` does, and it inherits the side of covariates it feeds into
/// when neither component affects it directly.
pub fn classify_covariates(dag: &CausalDag) -> CovariatePartition {
    let za = dag.find_role(NodeRole::ComponentA);
    let zy = dag.find_role(NodeRole::ComponentY);
    let covariates: Vec<usize> = {
        let mut c: Vec<usize> = (0..dag.len()).filter(|&i| dag.role(i).is_covariate()).collect();
        c.sort_by_key(|&i| (dag.role(i).interval(), dag.name(i).to_string()));
        c
    };
    let outcomes: Vec<usize> = (0..dag.len())
        .filter(|&i| matches!(dag.role(i), NodeRole::Outcome(_)))
        .collect();
    let adherence: Vec<usize> = (0..dag.len())
        .filter(|&i| matches!(dag.role(i), NodeRole::Adherence(_)))
        .collect();
    let not_treatment_or_adherence = |i: usize| {
        !matches!(
            dag.role(i),
            NodeRole::Adherence(_) | NodeRole::Treatment | NodeRole::ComponentA | NodeRole::ComponentY
        )
    };
    let not_adherence_or_outcome = |i: usize| !matches!(dag.role(i), NodeRole::Adherence(_) | NodeRole::Outcome(_));
    let direct_side = |c: usize| {
        let a = za.is_some_and(|z| dag.reaches_via(z, c, not_adherence_or_outcome));
        let y = zy.is_some_and(|z| dag.reaches_via(z, c, not_adherence_or_outcome));
        match (a, y) {
            (true, true) => Side::Both,
            (true, false) => Side::A,
            (false, true) => Side::Y,
            (false, false) => Side::Neither,
        }
    };

    let mut out = CovariatePartition::default();
    for &c in &covariates {
        let name = dag.name(c).to_string();
        let prognostic = outcomes.iter().any(|&y| dag.reaches_via(c, y, not_treatment_or_adherence));
        if !prognostic {
            if adherence.iter().any(|&a| dag.reaches(c, a)) {
                out.non_prognostic.push(name);
            } else {
                out.ambiguous.push((name, "reaches neither adherence nor an outcome".into()));
            }
            continue;
        }
        let mut side = direct_side(c);
        if side == Side::Neither {
            let inherited: Vec<Side> = covariates
                .iter()
                .filter(|&&d| d != c && dag.reaches_via(c, d, |i| dag.role(i).is_covariate()))
                .map(|&d| direct_side(d))
                .filter(|s| *s != Side::Neither)
                .collect();
            let has_a = inherited.iter().any(|s| matches!(s, Side::A | Side::Both));
            let has_y = inherited.iter().any(|s| matches!(s, Side::Y | Side::Both));
            side = match (has_a, has_y) {
                (true, false) => Side::A,
                (false, true) => Side::Y,
                (false, false) => Side::Neither,
                (true, true) => Side::Both,
            };
        }
        match side {
            Side::A => out.adherence_side.push(name),
            Side::Y => out.outcome_side.push(name),
            Side::Both => out.ambiguous.push((name, "affected by both components".into())),
            Side::Neither => out.ambiguous.push((name, "on neither component's pathway".into())),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures;

    #[test]
    fn untyped_covariates_are_refused() {
        let dag = CausalDag::parse(
            "node Z_A role=ZA\nnode Z_Y role=ZY\nnode L1 role=L[1]\nnode Y1 role=Y[1]\nL1 -> Y1\n",
        )
        .unwrap();
        assert!(matches!(check_identification(&dag, 1), Err(GraphError::MissingRole(_))));
        let no_components = CausalDag::parse("node Y1 role=Y[1]\n").unwrap();
        assert!(check_identification(&no_components, 1).is_err());
    }

    #[test]
    fn backdoor_only_checked_without_randomization() {
        let text = "node C role=U\nnode Z role=Z\nnode Z_A role=ZA\nnode Z_Y role=ZY\nnode Y1 role=Y[1]\n\
                    C -> Z\nC -> Y1\nZ -> Z_A\nZ -> Z_Y\nZ_Y -> Y1\n";
        let dag = CausalDag::parse(text).unwrap();
        let r = check_identification(&dag, 1).unwrap();
        assert_eq!(r.violations.len(), 2);
        assert_eq!(r.violations[0].rule, IdRule::Backdoor);
        assert_eq!(r.violations[0].witness, "Z <- C -> Y1");
        // the same confounder reaches Y1 from Z_A through Z
        assert_eq!(r.violations[1].rule, IdRule::ComponentAToOutcome);
        assert_eq!(r.violations[1].witness, "Z_A <- Z <- C -> Y1");

        let randomized = CausalDag::parse(&text.replace("node Z role=Z", "node Z role=Z randomized")).unwrap();
        let r = check_identification(&randomized, 1).unwrap();
        assert!(r.violations.iter().all(|v| v.rule != IdRule::Backdoor));
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn horizon_limits_targets() {
        let dag = fixtures::load("fig7c").unwrap();
        assert!(check_identification(&dag, 1).unwrap().identified());
        assert!(!check_identification(&dag, 2).unwrap().identified());
    }

    #[test]
    fn report_text() {
        let r = check_identification(&fixtures::load("fig7b").unwrap(), 2).unwrap();
        let text = r.to_text();
        assert!(text.starts_with("verdict: violated\nrule (ii)\tY2\tZ_A -> U -> Y2\n"));
        assert!(text.ends_with(&format!("{STRUCTURE_ASSUMPTION}\n")));
    }

    #[test]
    fn non_prognostic_covariates() {
        let p = classify_covariates(&fixtures::load("fig2").unwrap());
        assert_eq!(p.non_prognostic, ["V1", "V2"]);
        assert!(p.adherence_side.is_empty() && p.outcome_side.is_empty() && p.ambiguous.is_empty());
    }

    #[test]
    fn split_covariates() {
        let p = classify_covariates(&fixtures::load("fig6").unwrap());
        assert_eq!(p.adherence_side, ["LA1", "LA2"]);
        assert_eq!(p.outcome_side, ["LY1", "LY2"]);
        assert!(p.non_prognostic.is_empty() && p.ambiguous.is_empty());
    }

    #[test]
    fn untyped_covariates_follow_their_component() {
        let text = fixtures::source("fig4").unwrap().replace("role=LY", "role=L");
        let p = classify_covariates(&CausalDag::parse(&text).unwrap());
        assert_eq!(p.outcome_side, ["LY1", "LY2"]);
        let text = fixtures::source("fig3").unwrap().replace("role=LA", "role=L");
        let p = classify_covariates(&CausalDag::parse(&text).unwrap());
        assert_eq!(p.adherence_side, ["LA1", "LA2"]);
    }

    #[test]
    fn isolated_covariate_is_ambiguous() {
        let mut dag = fixtures::load("fig1").unwrap();
        dag.add_node("L9", NodeRole::Covariate(1)).unwrap();
        let p = classify_covariates(&dag);
        assert_eq!(p.ambiguous.len(), 1);
        assert_eq!(p.ambiguous[0].0, "L9");
    }
}
