//! Deterministic JSON and text reports.
//!
//! Objects are emitted with sorted keys and every non-integer number is written
//! with 17 significant digits, so a fixed configuration always produces the
//! same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Map, Number, Value};

use crate::diagram::DiagramEvaluation;
use crate::fd::Deviation;
use crate::identities::{merge, IdentityResidualSet};
use crate::recurrence::{ConditionId, LawCheck, PointSummary, RecurrenceReport};

pub const TOOL: &str = "cartan";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn float(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let text = format!("{x:.16e}");
    serde_json::from_str::<Number>(&text).map(Value::Number).unwrap_or(Value::Null)
}

/// Rewrites every non-integer number with a fixed 17-digit representation.
pub fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => n.as_f64().map_or(Value::Null, float),
        Value::Array(a) => Value::Array(a.into_iter().map(normalize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        other => other,
    }
}

/// Serializes `value` with sorted keys and fixed float formatting.
pub fn to_value<T: Serialize>(value: &T) -> Value {
    normalize(serde_json::to_value(value).expect("report values are always serializable"))
}

/// Pretty-printed canonical JSON with a trailing newline.
pub fn canonical_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(&normalize(v.clone())).expect("values always serialize");
    s.push('\n');
    s
}

/// Removes the tool version so reports from different builds compare equal.
pub fn strip_version(v: &mut Value) {
    if let Some(meta) = v.get_mut("meta").and_then(Value::as_object_mut) {
        meta.remove("version");
    }
}

pub fn meta<C: Serialize>(command: &str, config: &C, label: &str, n: usize) -> Value {
    json!({
        "tool": TOOL,
        "version": VERSION,
        "command": command,
        "config": to_value(config),
        "label": label,
        "n": n,
    })
}

pub fn points_section(points: &[PointSummary]) -> Value {
    Value::Array(points.iter().map(|p| json!({ "x": to_value(&p.x), "y": to_value(&p.y) })).collect())
}

pub fn tensors_section(points: &[PointSummary]) -> Value {
    let col = |f: &dyn Fn(&PointSummary) -> f64| Value::Array(points.iter().map(|p| float(f(p))).collect());
    json!({
        "scalar_curvature": col(&|p| p.scalar_curvature),
        "norm_curvature": col(&|p| p.norm_curvature),
        "norm_ric": col(&|p| p.norm_ric),
        "norm_concircular": col(&|p| p.norm_cten),
        "norm_rhat": col(&|p| p.norm_rhat),
        "norm_nabla_scalar": col(&|p| p.norm_nabla_scalar),
    })
}

/// Verdicts for the listed conditions, with per-point residuals, forms and side values.
pub fn verdicts_section(report: &RecurrenceReport, ids: &[ConditionId]) -> Value {
    let mut out = Map::new();
    for &id in ids {
        let c = report.condition(id);
        let points: Vec<Value> = c
            .points
            .iter()
            .map(|p| {
                json!({
                    "verdict": p.verdict.name(),
                    "reason": p.verdict.reason().map(|r| r.name()),
                    "residual": float(p.residual),
                    "target_norm": float(p.target_norm),
                    "forms": to_value(&p.forms),
                    "side_values": to_value(&p.side),
                })
            })
            .collect();
        out.insert(
            id.name().to_string(),
            json!({
                "verdict": c.verdict.name(),
                "reason": c.verdict.reason().map(|r| r.name()),
                "residual": float(c.residual),
                "points": points,
            }),
        );
    }
    Value::Object(out)
}

/// Identity residuals merged over points, plus the per-point residuals.
pub fn identities_section(per_point: &[IdentityResidualSet]) -> Value {
    let merged = merge(per_point);
    let mut out = Map::new();
    for (id, v) in merged {
        let residuals: Vec<Value> = per_point.iter().map(|s| s.get(&id).map_or(Value::Null, |r| float(r.residual))).collect();
        out.insert(
            id,
            json!({
                "residual": float(v.residual),
                "scale": float(v.scale),
                "applicable": v.applicable,
                "guard_values": to_value(&v.guard_values),
                "per_point": residuals,
            }),
        );
    }
    Value::Object(out)
}

/// Consequence laws grouped by id: worst residual overall and over the points
/// where the law applies.
pub fn laws_section(per_point: &[Vec<LawCheck>]) -> Value {
    let mut grouped: BTreeMap<&str, Vec<&LawCheck>> = BTreeMap::new();
    for checks in per_point {
        for c in checks {
            grouped.entry(c.id).or_default().push(c);
        }
    }
    let mut out = Map::new();
    for (id, checks) in grouped {
        let applicable: Vec<&&LawCheck> = checks.iter().filter(|c| c.applicable).collect();
        let worst = |cs: &mut dyn Iterator<Item = f64>| cs.fold(0.0, f64::max);
        out.insert(
            id.to_string(),
            json!({
                "premise": checks[0].premise,
                "applicable_points": applicable.len(),
                "residual": float(worst(&mut checks.iter().map(|c| c.residual))),
                "applicable_residual": if applicable.is_empty() { Value::Null } else { float(worst(&mut applicable.iter().map(|c| c.residual))) },
                "predicted_form_norm": checks.iter().filter_map(|c| c.predicted_form_norm).reduce(f64::max).map_or(Value::Null, float),
            }),
        );
    }
    Value::Object(out)
}

pub fn diagram_section(eval: &DiagramEvaluation) -> Value {
    Value::Array(
        eval.outcomes
            .iter()
            .map(|o| {
                json!({
                    "id": o.rule.id,
                    "premise": o.rule.premise.name(),
                    "conclusion": o.rule.conclusion.name(),
                    "statement": o.rule.statement,
                    "premise_verdict": o.premise_verdict.to_string(),
                    "conclusion_verdict": o.conclusion_verdict.to_string(),
                    "guard_values": to_value(&o.guard_values),
                    "status": o.status.name(),
                })
            })
            .collect(),
    )
}

pub fn coverage_section(eval: &DiagramEvaluation) -> Value {
    use crate::diagram::RuleStatus::*;
    json!({
        "confirmed": eval.count(Confirmed),
        "vacuous": eval.count(Vacuous),
        "violated": eval.count(Violated),
        "degenerate": eval.count(Degenerate),
    })
}

/// Per-point deviations and the worst relative deviation per quantity.
pub fn oracle_section(per_point: &[Vec<Deviation>]) -> (Value, f64) {
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    for devs in per_point {
        for d in devs {
            let e = worst.entry(d.quantity).or_insert(0.0);
            *e = e.max(d.relative);
        }
    }
    let overall = worst.values().copied().fold(0.0, f64::max);
    let v = json!({
        "points": to_value(&per_point),
        "max_relative": to_value(&worst),
        "max_relative_deviation": float(overall),
    });
    (v, overall)
}

fn num(v: &Value) -> String {
    v.as_f64().map_or_else(|| "-".to_string(), |x| format!("{x:.3e}"))
}

/// Plain-text rendering of a report.
pub fn render_text(report: &Value) -> String {
    let mut s = String::new();
    let meta = &report["meta"];
    let _ = writeln!(
        s,
        "{} {} {}: {} (n = {})",
        meta["tool"].as_str().unwrap_or(TOOL),
        meta["command"].as_str().unwrap_or(""),
        meta["version"].as_str().unwrap_or(""),
        meta["label"].as_str().unwrap_or(""),
        meta["n"]
    );
    if let Some(points) = report["points"].as_array() {
        let _ = writeln!(s, "points: {}", points.len());
    }
    if let Some(r) = report["tensors"]["scalar_curvature"].as_array() {
        let vals: Vec<String> = r.iter().map(num).collect();
        let _ = writeln!(s, "scalar curvature: {}", vals.join(" "));
    }
    if let Some(verdicts) = report["verdicts"].as_object() {
        let _ = writeln!(s, "\nconditions:");
        for id in ConditionId::ALL {
            if let Some(v) = verdicts.get(id.name()) {
                let verdict = match v["reason"].as_str() {
                    Some(r) => format!("DEGENERATE({r})"),
                    None => v["verdict"].as_str().unwrap_or("").to_string(),
                };
                let _ = writeln!(s, "  {:<5} {:<26} residual {}", id.name(), verdict, num(&v["residual"]));
            }
        }
    }
    if let Some(laws) = report["laws"].as_object() {
        let _ = writeln!(s, "\nlaws:");
        for (id, v) in laws {
            let _ = writeln!(
                s,
                "  {:<44} applicable at {} point(s), residual {}",
                id,
                v["applicable_points"],
                num(&v["applicable_residual"])
            );
        }
    }
    if let Some(ids) = report["identities"].as_object() {
        let _ = writeln!(s, "\nidentities:");
        for (id, v) in ids {
            let flag = if v["applicable"].as_bool() == Some(true) { "applicable" } else { "not applicable" };
            let _ = writeln!(s, "  {:<34} residual {}  {}", id, num(&v["residual"]), flag);
        }
    }
    if let Some(rules) = report["diagram"].as_array() {
        let _ = writeln!(s, "\nimplications:");
        for r in rules {
            let _ = writeln!(
                s,
                "  {:<62} {:>5} -> {:<5} {}",
                r["id"].as_str().unwrap_or(""),
                r["premise"].as_str().unwrap_or(""),
                r["conclusion"].as_str().unwrap_or(""),
                r["status"].as_str().unwrap_or("")
            );
        }
    }
    if let Some(o) = report["oracle"]["max_relative"].as_object() {
        let _ = writeln!(s, "\nfinite-difference deviation:");
        for (q, v) in o {
            let _ = writeln!(s, "  {:<10} {}", q, num(v));
        }
    }
    if let Some(flag) = report["any_violation"].as_bool() {
        let _ = writeln!(s, "\nany violation: {flag}");
    }
    if let Some(notes) = report["notes"].as_array() {
        for n in notes {
            let _ = writeln!(s, "note: {}", n.as_str().unwrap_or(""));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_are_fixed_width() {
        let v = json!({"b": 0.1, "a": [1, 6.0, -2.5e-20], "c": f64::NAN.to_string()});
        let s = canonical_json(&v);
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("6.0000000000000000e+0"), "{s}");
        assert!(s.contains("-2.4999999999999999e-20"));
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"][0], json!(1));
    }

    #[test]
    fn version_is_stripped() {
        let mut v = json!({"meta": meta("classify", &json!({}), "x", 3)});
        strip_version(&mut v);
        assert!(v["meta"].get("version").is_none());
        assert_eq!(v["meta"]["tool"], "cartan");
    }
}
