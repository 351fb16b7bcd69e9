//! Implications between recurrence classes as guarded rules, checked against a report.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::recurrence::{ConditionId, DegenerateReason, Family, FormSideValues, RecurrenceReport, Tolerances, Verdict};

use ConditionId::*;

/// Predicates a rule may require besides its premise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Guard {
    RNonzero,
    RicNonzero,
    CNonzero,
    RScalarNonzero,
    HhatZero,
    NablaAPlusAaNonzero,
    NablaBPlusAbNonzero,
    NablaRMinusRaNonzero,
    B1Nonzero,
    RConstant,
}

impl Guard {
    pub const ALL: [Guard; 10] = [
        Guard::RNonzero,
        Guard::RicNonzero,
        Guard::CNonzero,
        Guard::RScalarNonzero,
        Guard::HhatZero,
        Guard::NablaAPlusAaNonzero,
        Guard::NablaBPlusAbNonzero,
        Guard::NablaRMinusRaNonzero,
        Guard::B1Nonzero,
        Guard::RConstant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Guard::RNonzero => "R_NONZERO",
            Guard::RicNonzero => "RIC_NONZERO",
            Guard::CNonzero => "C_NONZERO",
            Guard::RScalarNonzero => "R_SCALAR_NONZERO",
            Guard::HhatZero => "HHAT_ZERO",
            Guard::NablaAPlusAaNonzero => "NABLA_A_PLUS_AA_NONZERO",
            Guard::NablaBPlusAbNonzero => "NABLA_B_PLUS_AB_NONZERO",
            Guard::NablaRMinusRaNonzero => "NABLA_R_MINUS_RA_NONZERO",
            Guard::B1Nonzero => "B1_NONZERO",
            Guard::RConstant => "R_CONSTANT",
        }
    }

    pub fn from_name(name: &str) -> Option<Guard> {
        Guard::ALL.into_iter().find(|g| g.name() == name)
    }

    /// Nonvanishing of the target tensor of a family.
    pub fn target_nonzero(family: Family) -> Guard {
        match family {
            Family::Curvature => Guard::RNonzero,
            Family::Ricci => Guard::RicNonzero,
            Family::Concircular => Guard::CNonzero,
        }
    }
}

impl Serialize for Guard {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramRule {
    pub id: &'static str,
    pub premise: ConditionId,
    pub conclusion: ConditionId,
    /// Hypotheses specific to the rule; the nonvanishing of both targets is implied.
    pub guards: Vec<Guard>,
    pub statement: &'static str,
}

impl DiagramRule {
    /// Standing target guards followed by the rule's own guards.
    pub fn all_guards(&self) -> Vec<Guard> {
        let mut out = vec![Guard::target_nonzero(self.premise.family())];
        let c = Guard::target_nonzero(self.conclusion.family());
        if !out.contains(&c) {
            out.push(c);
        }
        out.extend(self.guards.iter().copied());
        out
    }
}

const fn rule(
    id: &'static str,
    premise: ConditionId,
    conclusion: ConditionId,
    statement: &'static str,
) -> (&'static str, ConditionId, ConditionId, &'static str) {
    (id, premise, conclusion, statement)
}

type RuleRow = ((&'static str, ConditionId, ConditionId, &'static str), &'static [Guard]);

/// The nineteen implications, in a fixed order.
pub fn rule_table() -> Vec<DiagramRule> {
    use Guard::*;
    let rows: [RuleRow; 19] = [
        (rule("recurrent_to_ricci_recurrent", F, RF, "recurrent implies Ricci recurrent"), &[]),
        (rule("recurrent_to_concircular", F, CF, "recurrent with r != 0 implies concircularly recurrent"), &[RScalarNonzero]),
        (
            rule("recurrent_to_second_order", F, F2, "recurrent implies 2-recurrent when grad A + A*A != 0"),
            &[NablaAPlusAaNonzero],
        ),
        (
            rule("recurrent_to_second_order_ricci", F, RF2, "recurrent implies 2-Ricci recurrent when grad A + A*A != 0"),
            &[NablaAPlusAaNonzero],
        ),
        (
            rule("ricci_recurrent_to_second_order", RF, RF2, "Ricci recurrent implies 2-Ricci recurrent when grad A + A*A != 0"),
            &[NablaAPlusAaNonzero],
        ),
        (
            rule("concircular_to_second_order", CF, CF2, "concircularly recurrent implies concircularly 2-recurrent when grad A + A*A != 0"),
            &[NablaAPlusAaNonzero],
        ),
        (
            rule("concircular_to_generalized", CF, GF, "concircularly recurrent implies generalized recurrent when grad r - rA != 0"),
            &[NablaRMinusRaNonzero],
        ),
        (
            rule(
                "concircular_to_generalized_ricci",
                CF,
                GRF,
                "concircularly recurrent implies generalized Ricci recurrent when grad r - rA != 0",
            ),
            &[NablaRMinusRaNonzero],
        ),
        (rule("concircular_to_recurrent", CF, F, "horizontally integrable concircularly recurrent implies recurrent"), &[HhatZero]),
        (
            rule("generalized_to_second_order", GF, G2F, "generalized recurrent implies generalized 2-recurrent when both second coefficients are nonzero"),
            &[NablaAPlusAaNonzero, NablaBPlusAbNonzero],
        ),
        (rule("generalized_to_concircular", GF, CF, "generalized recurrent implies concircularly recurrent"), &[]),
        (
            rule(
                "generalized_to_second_order_concircular",
                GF,
                CF2,
                "generalized recurrent with r != 0 implies concircularly 2-recurrent when grad A + A*A != 0",
            ),
            &[NablaAPlusAaNonzero, RScalarNonzero],
        ),
        (rule("generalized_to_generalized_ricci", GF, GRF, "generalized recurrent implies generalized Ricci recurrent"), &[]),
        (
            rule("generalized_to_recurrent", GF, F, "horizontally integrable generalized recurrent with r != 0 implies recurrent"),
            &[HhatZero, RScalarNonzero],
        ),
        (
            rule(
                "generalized_ricci_to_second_order",
                GRF,
                G2RF,
                "generalized Ricci recurrent implies generalized 2-Ricci recurrent when both second coefficients are nonzero",
            ),
            &[NablaAPlusAaNonzero, NablaBPlusAbNonzero],
        ),
        (
            rule(
                "generalized_concircular_to_second_order",
                GCF,
                G2CF,
                "generalized concircularly recurrent implies its second-order form when both second coefficients are nonzero",
            ),
            &[NablaAPlusAaNonzero, NablaBPlusAbNonzero],
        ),
        (
            rule("generalized_concircular_to_generalized", GCF, GF, "generalized concircularly recurrent implies generalized recurrent when B1 != 0"),
            &[B1Nonzero],
        ),
        (
            rule(
                "generalized_concircular_to_generalized_ricci",
                GCF,
                GRF,
                "generalized concircularly recurrent implies generalized Ricci recurrent when B1 != 0",
            ),
            &[B1Nonzero],
        ),
        (
            rule(
                "constant_scalar_generalized_concircular_to_generalized_ricci",
                GCF,
                GRF,
                "horizontally integrable generalized concircularly recurrent with constant r implies generalized Ricci recurrent",
            ),
            &[HhatZero, RConstant],
        ),
    ];
    rows.into_iter()
        .map(|((id, premise, conclusion, statement), guards)| DiagramRule { id, premise, conclusion, guards: guards.to_vec(), statement })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleStatus {
    Confirmed,
    Vacuous,
    Violated,
    Degenerate,
}

impl RuleStatus {
    pub fn name(self) -> &'static str {
        match self {
            RuleStatus::Confirmed => "CONFIRMED",
            RuleStatus::Vacuous => "VACUOUS",
            RuleStatus::Violated => "VIOLATED",
            RuleStatus::Degenerate => "DEGENERATE",
        }
    }
}

impl fmt::Display for RuleStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A guard evaluated over all sample points. `value` is the worst case
/// (smallest norm for nonvanishing guards, largest for vanishing ones) and is
/// `None` when some point has no such quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuardValue {
    pub value: Option<f64>,
    pub threshold: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramOutcome {
    pub rule: DiagramRule,
    pub premise_verdict: Verdict,
    pub conclusion_verdict: Verdict,
    pub guard_values: BTreeMap<Guard, GuardValue>,
    pub status: RuleStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramEvaluation {
    pub outcomes: Vec<DiagramOutcome>,
    pub any_violation: bool,
}

impl DiagramEvaluation {
    pub fn count(&self, status: RuleStatus) -> usize {
        self.outcomes.iter().filter(|o| o.status == status).count()
    }

    pub fn outcome(&self, id: &str) -> Option<&DiagramOutcome> {
        self.outcomes.iter().find(|o| o.rule.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagramError {
    #[error("report is incomplete: {0}")]
    Incomplete(String),
}

fn side_of(report: &RecurrenceReport, id: ConditionId, pick: impl Fn(&FormSideValues) -> Option<f64>) -> Option<f64> {
    report.condition(id).points.iter().map(|p| pick(&p.side)).try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))
}

fn nonzero(value: Option<f64>, threshold: f64) -> GuardValue {
    GuardValue { value, threshold, satisfied: value.is_some_and(|v| v > threshold) }
}

/// Evaluates one guard for a rule whose forms come from `premise`.
pub fn evaluate_guard(report: &RecurrenceReport, premise: ConditionId, guard: Guard, tol: &Tolerances) -> GuardValue {
    let n = report.n;
    let pts = &report.points;
    let form = |count: usize| tol.eps_form * (count as f64).sqrt();
    let min_over = |f: &dyn Fn(&crate::recurrence::PointSummary) -> f64| pts.iter().map(f).fold(f64::INFINITY, f64::min);
    let max_over = |f: &dyn Fn(&crate::recurrence::PointSummary) -> f64| pts.iter().map(f).fold(0.0, f64::max);
    match guard {
        Guard::RNonzero => nonzero(Some(min_over(&|p| p.norm_curvature)), form(n.pow(4))),
        Guard::RicNonzero => nonzero(Some(min_over(&|p| p.norm_ric)), form(n * n)),
        Guard::CNonzero => nonzero(Some(min_over(&|p| p.norm_cten)), form(n.pow(4))),
        Guard::RScalarNonzero => nonzero(Some(min_over(&|p| p.scalar_curvature.abs())), form(1)),
        Guard::HhatZero => {
            let v = max_over(&|p| p.norm_rhat);
            let threshold = form(n.pow(3));
            GuardValue { value: Some(v), threshold, satisfied: v <= threshold }
        }
        Guard::NablaAPlusAaNonzero => nonzero(side_of(report, premise, |s| s.nabla_a_plus_aa), form(n * n)),
        Guard::NablaBPlusAbNonzero => nonzero(side_of(report, premise, |s| s.nabla_b_plus_ab), form(n * n)),
        Guard::NablaRMinusRaNonzero => nonzero(side_of(report, premise, |s| s.nabla_r_minus_ra), form(n)),
        Guard::B1Nonzero => nonzero(side_of(report, premise, |s| s.b1), form(n)),
        Guard::RConstant => {
            let v = max_over(&|p| p.norm_nabla_scalar / p.scalar_curvature.abs().max(1.0));
            GuardValue { value: Some(v), threshold: tol.eps_fit, satisfied: v < tol.eps_fit }
        }
    }
}

fn hard_degenerate(v: Verdict) -> bool {
    matches!(v.reason(), Some(DegenerateReason::ZeroTarget | DegenerateReason::SingularGram))
}

/// Status of a rule from its verdicts and evaluated guards.
pub fn rule_status(premise: Verdict, conclusion: Verdict, guards_hold: bool) -> RuleStatus {
    if hard_degenerate(premise) || hard_degenerate(conclusion) {
        return RuleStatus::Degenerate;
    }
    if !premise.holds() || !guards_hold {
        return RuleStatus::Vacuous;
    }
    match conclusion {
        Verdict::Holds => RuleStatus::Confirmed,
        Verdict::Fails => RuleStatus::Violated,
        Verdict::Degenerate(_) => RuleStatus::Degenerate,
    }
}

/// Checks every rule against the verdicts of `report`.
pub fn evaluate(report: &RecurrenceReport, tol: &Tolerances) -> Result<DiagramEvaluation, DiagramError> {
    if report.conditions.len() != ConditionId::ALL.len() {
        return Err(DiagramError::Incomplete(format!("{} of {} conditions present", report.conditions.len(), ConditionId::ALL.len())));
    }
    if report.points.is_empty() {
        return Err(DiagramError::Incomplete("no sample points".into()));
    }
    for (c, id) in report.conditions.iter().zip(ConditionId::ALL) {
        if c.id != id {
            return Err(DiagramError::Incomplete(format!("condition {} out of order", c.id.name())));
        }
        if c.points.len() != report.points.len() {
            return Err(DiagramError::Incomplete(format!("condition {} has {} points, expected {}", id.name(), c.points.len(), report.points.len())));
        }
    }
    let outcomes: Vec<DiagramOutcome> = rule_table()
        .into_iter()
        .map(|rule| {
            let guard_values: BTreeMap<Guard, GuardValue> =
                rule.all_guards().into_iter().map(|g| (g, evaluate_guard(report, rule.premise, g, tol))).collect();
            let guards_hold = guard_values.values().all(|g| g.satisfied);
            let premise_verdict = report.verdict(rule.premise);
            let conclusion_verdict = report.verdict(rule.conclusion);
            let status = rule_status(premise_verdict, conclusion_verdict, guards_hold);
            DiagramOutcome { rule, premise_verdict, conclusion_verdict, guard_values, status }
        })
        .collect();
    let any_violation = outcomes.iter().any(|o| o.status == RuleStatus::Violated);
    Ok(DiagramEvaluation { outcomes, any_violation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recurrence::classify;
    use crate::zoo::{build, builtin};

    fn report(name: &str, points: usize) -> RecurrenceReport {
        let m = build(&builtin(name, 3, 1.0).unwrap()).unwrap();
        let tol = Tolerances::default();
        classify(&m, &m.sample_points(points, 0), &tol).unwrap().report
    }

    #[test]
    fn table_shape() {
        let rules = rule_table();
        assert_eq!(rules.len(), 19);
        for r in &rules {
            assert_ne!(r.premise, r.conclusion);
        }
        let ids: std::collections::BTreeSet<_> = rules.iter().map(|r| r.id).collect();
        assert_eq!(ids.len(), rules.len());
        let conc = rules.iter().find(|r| r.id == "recurrent_to_concircular").unwrap();
        assert_eq!(conc.guards, vec![Guard::RScalarNonzero]);
        assert_eq!(conc.all_guards(), vec![Guard::RNonzero, Guard::CNonzero, Guard::RScalarNonzero]);
        let last = rules.iter().find(|r| r.id == "constant_scalar_generalized_concircular_to_generalized_ricci").unwrap();
        assert_eq!(last.guards, vec![Guard::HhatZero, Guard::RConstant]);
    }

    #[test]
    fn status_table() {
        let zt = Verdict::Degenerate(DegenerateReason::ZeroTarget);
        let zf = Verdict::Degenerate(DegenerateReason::ZeroForm);
        assert_eq!(rule_status(Verdict::Holds, Verdict::Fails, true), RuleStatus::Violated);
        assert_eq!(rule_status(Verdict::Holds, Verdict::Fails, false), RuleStatus::Vacuous);
        assert_eq!(rule_status(Verdict::Holds, Verdict::Holds, true), RuleStatus::Confirmed);
        assert_eq!(rule_status(Verdict::Fails, Verdict::Fails, true), RuleStatus::Vacuous);
        assert_eq!(rule_status(zf, Verdict::Fails, true), RuleStatus::Vacuous);
        assert_eq!(rule_status(Verdict::Holds, zf, true), RuleStatus::Degenerate);
        assert_eq!(rule_status(Verdict::Holds, zt, true), RuleStatus::Degenerate);
        assert_eq!(rule_status(zt, Verdict::Holds, true), RuleStatus::Degenerate);
    }

    #[test]
    fn euclidean_all_degenerate() {
        let e = evaluate(&report("euclidean", 2), &Tolerances::default()).unwrap();
        assert_eq!(e.count(RuleStatus::Degenerate), 19);
        assert!(!e.any_violation);
    }

    #[test]
    fn sphere_has_no_proper_premise() {
        let e = evaluate(&report("constant_curvature", 2), &Tolerances::default()).unwrap();
        assert!(e.outcomes.iter().all(|o| matches!(o.status, RuleStatus::Vacuous | RuleStatus::Degenerate)));
    }

    #[test]
    fn injected_failure_is_violation() {
        let mut r = report("recurrent_product", 2);
        let tol = Tolerances::default();
        assert_eq!(evaluate(&r, &tol).unwrap().outcome("recurrent_to_ricci_recurrent").unwrap().status, RuleStatus::Confirmed);
        r.conditions[ConditionId::RF.index()].verdict = Verdict::Fails;
        let e = evaluate(&r, &tol).unwrap();
        assert_eq!(e.outcome("recurrent_to_ricci_recurrent").unwrap().status, RuleStatus::Violated);
        assert!(e.any_violation);
    }

    #[test]
    fn incomplete_report_rejected() {
        let mut r = report("euclidean", 1);
        r.conditions.pop();
        assert!(evaluate(&r, &Tolerances::default()).is_err());
    }
}
