//! Built-in metric families, metric files and user expressions.
//!
//! Metric file format, one `key = value` per line, `#` starts a comment:
//!
//! ```text
//! family = randers
//! n = 3
//! a = 1 ; 1 + x1^2 ; 1      # diagonal Riemannian part, x-only
//! b = 0.1 ; 0.1*x1 ; 0      # drift covector, x-only
//! box = 0.5                 # sampling half width
//! ```
//!
//! Other keys: `kappa`, `f` (conformal exponent), `F` / `F2` (user expression
//! for the Finsler function or its square), `label`, and repeated
//! `factor = <family>, n=<int>, <key>=<value>` lines for products.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dsl::{parse_expr, Declared, Expr, Func, ParseError};
use crate::metric::{FinslerMetric, MetricError};

pub const BUILTIN_NAMES: [&str; 8] = [
    "euclidean",
    "riemannian_diag",
    "constant_curvature",
    "conformal",
    "randers",
    "recurrent_product",
    "symmetric_product",
    "sphere_product",
];

const RANDERS_CHECK_POINTS: usize = 100;
const VALIDATION_SEED: u64 = 0xB0B5_1EED;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZooError {
    #[error("parse error in {context}: {source}")]
    Parse { context: String, source: ParseError },
    #[error("line {line}: {message}")]
    File { line: usize, message: String },
    #[error("unknown metric family or builtin '{0}'")]
    UnknownFamily(String),
    #[error("{0}")]
    Invalid(String),
    #[error("Randers drift too large: sup |b|_a = {norm:.6} (must be < 1)")]
    RandersNorm { norm: f64 },
    #[error("constant-curvature model leaves its domain: 1 + kappa*|x|^2/4 = {value} on the sampling box")]
    CurvatureDomain { value: f64 },
    #[error("F is not 1-homogeneous in y: relative defect {defect:.3e} at scale {lambda}")]
    NotHomogeneous { lambda: f64, defect: f64 },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricFamily {
    Euclidean { n: usize },
    /// `F² = Σ a_i(x) (yⁱ)²`
    RiemannianDiag { a: Vec<Expr> },
    /// `F² = |y|² / (1 + κ|x|²/4)²`
    ConstantCurvature { n: usize, kappa: f64 },
    /// `F² = e^{2f(x)} |y|²`
    Conformal { n: usize, f: Expr },
    /// `F = sqrt(Σ a_i(x) (yⁱ)²) + Σ b_i(x) yⁱ`
    Randers { a: Vec<Expr>, b: Vec<Expr> },
    /// Block-diagonal sum of the factors' energies.
    Product { factors: Vec<MetricFamily> },
    Dsl { n: usize, declared: Declared, expr: Expr },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub label: String,
    pub family: MetricFamily,
    pub half_width: f64,
}

impl MetricSpec {
    pub fn new(label: impl Into<String>, family: MetricFamily) -> Self {
        MetricSpec { label: label.into(), family, half_width: FinslerMetric::DEFAULT_HALF_WIDTH }
    }
}

/// A parsed user expression with its declaration.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricExpr {
    pub declared: Declared,
    pub expr: Expr,
}

/// Parses `F = <expr>`, `F2 = <expr>` or a bare expression (taken as `F`).
pub fn parse_metric(src: &str) -> Result<MetricExpr, ParseError> {
    let trimmed = src.trim_start();
    let lead = src.len() - trimmed.len();
    for (prefix, declared) in [("F2", Declared::Energy), ("F", Declared::Length)] {
        if let Some(rest) = trimmed.strip_prefix(prefix) {
            let after = rest.trim_start();
            if let Some(body) = after.strip_prefix('=') {
                let offset = lead + prefix.len() + (rest.len() - after.len()) + 1;
                return parse_expr(body)
                    .map(|expr| MetricExpr { declared, expr })
                    .map_err(|e| shift_error(src, e, offset));
            }
        }
    }
    Ok(MetricExpr { declared: Declared::Length, expr: parse_expr(src)? })
}

fn shift_error(src: &str, e: ParseError, offset: usize) -> ParseError {
    let abs = (e.offset + offset).min(src.len());
    let before = &src[..abs];
    ParseError {
        message: e.message,
        offset: abs,
        line: before.matches('\n').count() + 1,
        column: before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1,
    }
}

fn sum_squares(n: usize, offset: usize) -> Expr {
    Expr::sum((0..n).map(|i| Expr::square(Expr::Y(i + offset))))
}

fn check_x_only(exprs: &[Expr], what: &str) -> Result<(), ZooError> {
    if exprs.iter().any(Expr::depends_on_y) {
        return Err(ZooError::Invalid(format!("{what} may only depend on x")));
    }
    Ok(())
}

fn random_box_points(n: usize, half_width: f64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
    (0..count).map(|_| (0..n).map(|_| rng.random_range(-half_width..half_width)).collect()).collect()
}

struct Parts {
    n: usize,
    energy: Expr,
    constraints: Vec<Expr>,
}

fn parts(family: &MetricFamily, half_width: f64) -> Result<Parts, ZooError> {
    Ok(match family {
        MetricFamily::Euclidean { n } => Parts { n: *n, energy: sum_squares(*n, 0), constraints: vec![] },
        MetricFamily::RiemannianDiag { a } => {
            check_x_only(a, "diagonal coefficients")?;
            let energy = Expr::sum(a.iter().enumerate().map(|(i, ai)| Expr::mul(ai.clone(), Expr::square(Expr::Y(i)))));
            Parts { n: a.len(), energy, constraints: a.clone() }
        }
        MetricFamily::ConstantCurvature { n, kappa } => {
            if !kappa.is_finite() {
                return Err(ZooError::Invalid(format!("kappa must be finite, got {kappa}")));
            }
            let worst = 1.0 + kappa.min(0.0) * (*n as f64) * half_width * half_width / 4.0;
            if worst <= 0.0 {
                return Err(ZooError::CurvatureDomain { value: worst });
            }
            let radius2 = Expr::sum((0..*n).map(|i| Expr::square(Expr::X(i))));
            let conformal = Expr::add(Expr::num(1.0), Expr::mul(Expr::num(kappa / 4.0), radius2));
            let energy = Expr::div(sum_squares(*n, 0), Expr::square(conformal.clone()));
            Parts { n: *n, energy, constraints: vec![conformal] }
        }
        MetricFamily::Conformal { n, f } => {
            check_x_only(std::slice::from_ref(f), "conformal exponent")?;
            let factor = Expr::call(Func::Exp, Expr::mul(Expr::num(2.0), f.clone()));
            Parts { n: *n, energy: Expr::mul(factor, sum_squares(*n, 0)), constraints: vec![] }
        }
        MetricFamily::Randers { a, b } => {
            if a.len() != b.len() {
                return Err(ZooError::Invalid(format!("Randers a has {} entries but b has {}", a.len(), b.len())));
            }
            check_x_only(a, "Randers a")?;
            check_x_only(b, "Randers b")?;
            let n = a.len();
            let mut sup = 0.0f64;
            for x in random_box_points(n, half_width, RANDERS_CHECK_POINTS) {
                let mut norm2 = 0.0;
                for (ai, bi) in a.iter().zip(b) {
                    let av = ai.eval(&x, &[], &0.0).map_err(|e| ZooError::Invalid(e.to_string()))?;
                    let bv = bi.eval(&x, &[], &0.0).map_err(|e| ZooError::Invalid(e.to_string()))?;
                    if !(av > 0.0) {
                        return Err(ZooError::Invalid(format!("Randers a must be positive, got {av}")));
                    }
                    norm2 += bv * bv / av;
                }
                sup = sup.max(norm2.sqrt());
            }
            if !(sup < 1.0) {
                return Err(ZooError::RandersNorm { norm: sup });
            }
            let alpha2 = Expr::sum(a.iter().enumerate().map(|(i, ai)| Expr::mul(ai.clone(), Expr::square(Expr::Y(i)))));
            let beta = Expr::sum(b.iter().enumerate().map(|(i, bi)| Expr::mul(bi.clone(), Expr::Y(i))));
            let energy = Expr::square(Expr::add(Expr::call(Func::Sqrt, alpha2), beta));
            let b_norm2 = Expr::sum(a.iter().zip(b).map(|(ai, bi)| Expr::div(Expr::square(bi.clone()), ai.clone())));
            let mut constraints = a.clone();
            constraints.push(Expr::sub(Expr::num(1.0), b_norm2));
            Parts { n, energy, constraints }
        }
        MetricFamily::Product { factors } => {
            if factors.is_empty() {
                return Err(ZooError::Invalid("product needs at least one factor".into()));
            }
            let mut offset = 0;
            let mut energies = Vec::new();
            let mut constraints = Vec::new();
            for factor in factors {
                let p = parts(factor, half_width)?;
                energies.push(p.energy.shift_variables(offset));
                constraints.extend(p.constraints.iter().map(|c| c.shift_variables(offset)));
                offset += p.n;
            }
            Parts { n: offset, energy: Expr::sum(energies), constraints }
        }
        MetricFamily::Dsl { n, declared, expr } => {
            let energy = match declared {
                Declared::Energy => expr.clone(),
                Declared::Length => Expr::square(expr.clone()),
            };
            Parts { n: *n, energy, constraints: vec![] }
        }
    })
}

/// Builds and validates the metric described by `spec`.
pub fn build(spec: &MetricSpec) -> Result<FinslerMetric, ZooError> {
    let p = parts(&spec.family, spec.half_width)?;
    let metric = FinslerMetric::with_half_width(spec.label.clone(), p.n, p.energy, p.constraints, spec.half_width)?;
    if let MetricFamily::Dsl { declared: Declared::Length, expr, .. } = &spec.family {
        for point in metric.sample_points(10, VALIDATION_SEED) {
            let f1 = expr.eval(&point.x, &point.y, &0.0).map_err(|e| ZooError::Invalid(e.to_string()))?;
            for lambda in [2.0, 3.0] {
                let scaled = point.with_fiber_scaled(lambda);
                let fl = expr.eval(&scaled.x, &scaled.y, &0.0).map_err(|e| ZooError::Invalid(e.to_string()))?;
                let defect = (fl - lambda * f1).abs() / (lambda * f1).abs();
                if !(defect < 1e-8) {
                    return Err(ZooError::NotHomogeneous { lambda, defect });
                }
            }
        }
    }
    Ok(metric)
}

fn expr(src: &str) -> Expr {
    parse_expr(src).expect("built-in expression")
}

fn default_diag(n: usize) -> Vec<Expr> {
    (0..n).map(|i| expr(if i == 1 { "1 + x1^2" } else { "1" })).collect()
}

fn default_drift(n: usize) -> Vec<Expr> {
    (0..n).map(|i| if i == 0 { expr("0.1") } else { expr(&format!("0.1*x{i}")) }).collect()
}

fn family_with_defaults(name: &str, n: usize, kappa: f64) -> Result<MetricFamily, ZooError> {
    Ok(match name {
        "euclidean" => MetricFamily::Euclidean { n },
        "riemannian_diag" => MetricFamily::RiemannianDiag { a: default_diag(n) },
        "constant_curvature" => MetricFamily::ConstantCurvature { n, kappa },
        "conformal" => MetricFamily::Conformal { n, f: expr("0.3*x1") },
        "randers" => MetricFamily::Randers { a: default_diag(n), b: default_drift(n) },
        "dsl" => return Err(ZooError::Invalid("family dsl needs an F or F2 expression".into())),
        "product" => return Err(ZooError::Invalid("family product needs factor lines".into())),
        other => return Err(ZooError::UnknownFamily(other.to_string())),
    })
}

/// A built-in metric by name. `n` and `kappa` are used where the family has them.
///
/// `recurrent_product` is a conformally flat surface with exponent `0.2·x1²`
/// times a flat factor; its curvature is recurrent with a nonzero form.
/// `symmetric_product` (alias `sphere_product`) is a round 2-sphere of
/// curvature `kappa` times a flat factor.
pub fn builtin(name: &str, n: usize, kappa: f64) -> Result<MetricSpec, ZooError> {
    let family = match name {
        "recurrent_product" | "symmetric_product" | "sphere_product" => {
            if n < 3 {
                return Err(ZooError::Invalid(format!("{name} needs n >= 3")));
            }
            let surface = if name == "recurrent_product" {
                MetricFamily::Conformal { n: 2, f: expr("0.2*x1^2") }
            } else {
                MetricFamily::ConstantCurvature { n: 2, kappa }
            };
            MetricFamily::Product { factors: vec![surface, MetricFamily::Euclidean { n: n - 2 }] }
        }
        other => family_with_defaults(other, n, kappa)?,
    };
    Ok(MetricSpec::new(name, family))
}

fn parse_list(value: &str, key: &str, line: usize) -> Result<Vec<Expr>, ZooError> {
    value
        .split(';')
        .map(|item| parse_expr(item).map_err(|e| ZooError::File { line, message: format!("{key}: {e}") }))
        .collect()
}

fn parse_number<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T, ZooError> {
    value.trim().parse().map_err(|_| ZooError::File { line, message: format!("invalid value for {key}: '{}'", value.trim()) })
}

/// Assembles a family from `key = value` parameters.
fn family_from_params(params: &BTreeMap<String, (String, usize)>, factors: &[(String, usize)]) -> Result<MetricFamily, ZooError> {
    let get = |k: &str| params.get(k);
    let family_name = match get("family") {
        Some((v, _)) => v.trim().to_string(),
        None if get("F").is_some() || get("F2").is_some() => "dsl".to_string(),
        None if !factors.is_empty() => "product".to_string(),
        None => return Err(ZooError::File { line: 0, message: "missing 'family' key".into() }),
    };
    let n_given: Option<usize> = get("n").map(|(v, l)| parse_number(v, "n", *l)).transpose()?;
    let kappa: f64 = get("kappa").map(|(v, l)| parse_number(v, "kappa", *l)).transpose()?.unwrap_or(1.0);
    let n = n_given.unwrap_or(3);
    let list = |key: &str| get(key).map(|(v, l)| parse_list(v, key, *l)).transpose();
    let sized = |list: Vec<Expr>, key: &str| -> Result<Vec<Expr>, ZooError> {
        match n_given {
            Some(n) if n != list.len() => Err(ZooError::Invalid(format!("{key} has {} entries but n = {n}", list.len()))),
            _ => Ok(list),
        }
    };
    Ok(match family_name.as_str() {
        "riemannian_diag" => MetricFamily::RiemannianDiag { a: sized(list("a")?.unwrap_or_else(|| default_diag(n)), "a")? },
        "conformal" => {
            let f = match get("f") {
                Some((v, l)) => parse_expr(v).map_err(|e| ZooError::File { line: *l, message: format!("f: {e}") })?,
                None => expr("0.3*x1"),
            };
            MetricFamily::Conformal { n, f }
        }
        "randers" => {
            let a = sized(list("a")?.unwrap_or_else(|| default_diag(n)), "a")?;
            let b = sized(list("b")?.unwrap_or_else(|| default_drift(a.len())), "b")?;
            MetricFamily::Randers { a, b }
        }
        "dsl" => {
            let (key, declared) = if get("F2").is_some() { ("F2", Declared::Energy) } else { ("F", Declared::Length) };
            let (src, line) = get(key).ok_or_else(|| ZooError::Invalid("family dsl needs an F or F2 expression".into()))?;
            let e = parse_expr(src).map_err(|e| ZooError::File { line: *line, message: format!("{key}: {e}") })?;
            let (nx, ny) = e.variable_extent();
            MetricFamily::Dsl { n: n_given.unwrap_or(nx.max(ny)), declared, expr: e }
        }
        "product" => {
            if factors.is_empty() {
                return Err(ZooError::Invalid("family product needs factor lines".into()));
            }
            let fs = factors.iter().map(|(v, l)| parse_factor(v, *l)).collect::<Result<Vec<_>, _>>()?;
            MetricFamily::Product { factors: fs }
        }
        other => family_with_defaults(other, n, kappa)?,
    })
}

fn parse_factor(value: &str, line: usize) -> Result<MetricFamily, ZooError> {
    let mut items = value.split(',');
    let name = items.next().unwrap_or("").trim().to_string();
    let mut params = BTreeMap::new();
    params.insert("family".to_string(), (name, line));
    for item in items {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| ZooError::File { line, message: format!("factor parameter '{}' is not key=value", item.trim()) })?;
        params.insert(k.trim().to_string(), (v.trim().to_string(), line));
    }
    family_from_params(&params, &[])
}

/// Parses a metric file into a spec (not yet built).
pub fn parse_metric_file(src: &str) -> Result<MetricSpec, ZooError> {
    let mut params: BTreeMap<String, (String, usize)> = BTreeMap::new();
    let mut factors = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ZooError::File { line, message: format!("expected 'key = value', got '{content}'") })?;
        let key = key.trim();
        const KEYS: [&str; 11] = ["family", "n", "kappa", "f", "F", "F2", "a", "b", "box", "label", "factor"];
        if !KEYS.contains(&key) {
            return Err(ZooError::File { line, message: format!("unknown key '{key}'") });
        }
        if key == "factor" {
            factors.push((value.trim().to_string(), line));
        } else if params.insert(key.to_string(), (value.trim().to_string(), line)).is_some() {
            return Err(ZooError::File { line, message: format!("duplicate key '{key}'") });
        }
    }
    let family = family_from_params(&params, &factors)?;
    let label = params.get("label").map(|(v, _)| v.clone()).unwrap_or_else(|| {
        params.get("family").map(|(v, _)| v.clone()).unwrap_or_else(|| "dsl".into())
    });
    let mut spec = MetricSpec::new(label, family);
    if let Some((v, l)) = params.get("box") {
        spec.half_width = parse_number(v, "box", *l)?;
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{curvature, Depth};

    #[test]
    fn every_builtin_builds() {
        for name in BUILTIN_NAMES {
            let m = build(&builtin(name, 3, 1.0).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(m.dim(), 3);
            assert_eq!(m.sample_points(20, 1).len(), 20, "{name}");
        }
    }

    #[test]
    fn randers_validation() {
        let spec = MetricSpec::new(
            "bad",
            MetricFamily::Randers { a: vec![expr("1"); 3], b: vec![expr("1.2"), expr("0"), expr("0")] },
        );
        assert!(matches!(build(&spec), Err(ZooError::RandersNorm { .. })));
    }

    #[test]
    fn curvature_domain_validation() {
        assert!(matches!(
            build(&builtin("constant_curvature", 3, -20.0).unwrap()),
            Err(ZooError::CurvatureDomain { .. })
        ));
        assert!(build(&builtin("constant_curvature", 3, -1.0).unwrap()).is_ok());
    }

    #[test]
    fn constant_curvature_scalar() {
        let m = build(&builtin("constant_curvature", 3, 1.0).unwrap()).unwrap();
        for p in m.sample_points(3, 5) {
            let b = curvature(&m, &p, Depth::Base).unwrap();
            assert!((b.scalar_curvature - 6.0).abs() < 1e-9);
        }
    }

    #[test]
    fn metric_declarations() {
        let e = parse_metric("F2 = y1^2 + y2^2").unwrap();
        assert_eq!(e.declared, Declared::Energy);
        let e = parse_metric("  F = sqrt(y1^2 + y2^2 + y3^2) + 0.1*y1").unwrap();
        assert_eq!(e.declared, Declared::Length);
        let err = parse_metric("F = sqrt(y1^2 +").unwrap_err();
        assert_eq!(err.offset, 14);
        assert_eq!(parse_metric("y1").unwrap().declared, Declared::Length);
    }

    #[test]
    fn metric_file_round() {
        let src = "# test\nfamily = randers\nn = 3\na = 1 ; 1 + x1^2 ; 1\nb = 0.1 ; 0 ; 0.05*x2  # drift\nbox = 0.4\n";
        let spec = parse_metric_file(src).unwrap();
        assert_eq!(spec.half_width, 0.4);
        assert!(matches!(spec.family, MetricFamily::Randers { .. }));
        build(&spec).unwrap();

        let spec = parse_metric_file("F = sqrt(y1^2 + y2^2 + y3^2) + 0.1*y1\n").unwrap();
        assert!(matches!(spec.family, MetricFamily::Dsl { n: 3, declared: Declared::Length, .. }));
        build(&spec).unwrap();

        let spec = parse_metric_file("factor = conformal, n=2, f=0.2*x1^2\nfactor = euclidean, n=1\n").unwrap();
        assert_eq!(build(&spec).unwrap().dim(), 3);

        assert!(matches!(parse_metric_file("family = nope\n"), Err(ZooError::UnknownFamily(_))));
        assert!(matches!(parse_metric_file("family = euclidean\nwhat\n"), Err(ZooError::File { line: 2, .. })));
        assert!(matches!(
            build(&parse_metric_file("F2 = y1^2 + y2^2 + y3^2 + x1\n").unwrap()),
            Err(ZooError::Metric(MetricError::NotHomogeneous { .. }))
        ));
    }
}
