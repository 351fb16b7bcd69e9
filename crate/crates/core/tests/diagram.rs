use cartan_core::diagram::{evaluate, rule_table, RuleStatus};
use cartan_core::recurrence::{analyze_bundle, classify, RecurrenceReport, Tolerances};
use cartan_core::zoo::{build, builtin, BUILTIN_NAMES};

#[test]
fn zoo_never_violates() {
    let tol = Tolerances::default();
    for name in BUILTIN_NAMES {
        let m = build(&builtin(name, 3, 1.0).unwrap()).unwrap();
        let c = classify(&m, &m.sample_points(4, 11), &tol).unwrap();
        let e = evaluate(&c.report, &tol).unwrap();
        assert!(!e.any_violation, "{name}: {:?}", e.outcomes.iter().filter(|o| o.status == RuleStatus::Violated).map(|o| o.rule.id).collect::<Vec<_>>());
    }
}

#[test]
fn recurrent_product_confirms_recurrent_rules() {
    let tol = Tolerances::default();
    let m = build(&builtin("recurrent_product", 3, 1.0).unwrap()).unwrap();
    let c = classify(&m, &m.sample_points(4, 5), &tol).unwrap();
    let e = evaluate(&c.report, &tol).unwrap();
    for id in ["recurrent_to_ricci_recurrent", "recurrent_to_second_order", "ricci_recurrent_to_second_order"] {
        assert_eq!(e.outcome(id).unwrap().status, RuleStatus::Confirmed, "{id}");
    }
}

#[test]
fn loosening_fit_tolerance_never_creates_violations() {
    for name in ["riemannian_diag", "conformal", "randers", "recurrent_product"] {
        let m = build(&builtin(name, 3, 1.0).unwrap()).unwrap();
        let base = Tolerances::default();
        let c = classify(&m, &m.sample_points(3, 21), &base).unwrap();
        let mut previous: Option<Vec<RuleStatus>> = None;
        for eps_fit in [1e-9, 1e-7, 1e-5, 1e-3] {
            let tol = Tolerances { eps_fit, ..base };
            let analyses: Vec<_> = c.analyses.iter().map(|a| analyze_bundle(a.bundle.clone(), a.index, &tol).unwrap()).collect();
            let report = RecurrenceReport::from_analyses(3, tol, &analyses);
            let statuses: Vec<RuleStatus> = evaluate(&report, &tol).unwrap().outcomes.iter().map(|o| o.status).collect();
            if let Some(prev) = &previous {
                for ((p, s), r) in prev.iter().zip(&statuses).zip(rule_table()) {
                    assert!(!(*p == RuleStatus::Confirmed && *s == RuleStatus::Violated), "{name} {}: eps_fit {eps_fit}", r.id);
                }
            }
            previous = Some(statuses);
        }
    }
}
