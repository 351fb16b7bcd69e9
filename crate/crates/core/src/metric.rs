//! Finsler metrics as energy expressions `F²(x, y)` with a domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::dsl::{EvalError, Expr};
use crate::geometry;
use crate::jet::{jet_variable, Jet, JetConfig, JetError};

/// Relative tolerance of the construction-time homogeneity check.
pub const HOMOGENEITY_TOL: f64 = 1e-8;
const VALIDATION_POINTS: usize = 10;
const VALIDATION_SEED: u64 = 0x5EED_F1A5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("dimension {0} is not supported (need n >= 2)")]
    Dimension(usize),
    #[error("expression uses {var} but the metric has dimension {n}")]
    VariableOutOfRange { var: String, n: usize },
    #[error("energy does not depend on the fiber coordinates y")]
    NoFiberDependence,
    #[error("{0}")]
    Domain(#[from] DomainError),
    #[error("energy is not 2-homogeneous in y: relative defect {defect:.3e} at scale {lambda}")]
    NotHomogeneous { lambda: f64, defect: f64 },
    #[error("no valid domain points found in the sampling box")]
    NoValidPoints,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Reasons a point of TM is rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("point has wrong length (x: {x}, y: {y}, n: {n})")]
    Shape { x: usize, y: usize, n: usize },
    #[error("y must be a nonzero vector")]
    ZeroVector,
    #[error("domain constraint {index} violated (value {value})")]
    Constraint { index: usize, value: f64 },
    #[error("energy is not positive and finite here (value {0})")]
    Energy(f64),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("fundamental tensor is not positive definite")]
    NotPositiveDefinite,
    #[error("fundamental tensor is degenerate (det {det:.3e}, threshold {threshold:.3e})")]
    Degenerate { det: f64, threshold: f64 },
}

impl From<JetError> for DomainError {
    fn from(e: JetError) -> Self {
        DomainError::Eval(EvalError::Jet(e))
    }
}

/// A point of the slit tangent bundle: chart coordinates `x` and fiber coordinates `y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TMPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl TMPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        TMPoint { x, y }
    }

    pub fn with_fiber_scaled(&self, lambda: f64) -> TMPoint {
        TMPoint { x: self.x.clone(), y: self.y.iter().map(|v| v * lambda).collect() }
    }

    /// `(x, y)` concatenated, the base point of all jets.
    pub fn coordinates(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }
}

#[derive(Debug, Clone)]
pub struct FinslerMetric {
    label: String,
    n: usize,
    energy: Expr,
    constraints: Vec<Expr>,
    half_width: f64,
}

impl FinslerMetric {
    pub const DEFAULT_HALF_WIDTH: f64 = 0.5;

    /// Builds and validates a metric from its energy `F²`.
    ///
    /// `constraints` are x-only expressions that must be strictly positive on
    /// the domain. Construction samples points in `[-w, w]^n × S^{n-1}` and
    /// checks 2-homogeneity of the energy and positive definiteness of `g`.
    pub fn new(label: impl Into<String>, n: usize, energy: Expr, constraints: Vec<Expr>) -> Result<Self, MetricError> {
        Self::with_half_width(label, n, energy, constraints, Self::DEFAULT_HALF_WIDTH)
    }

    pub fn with_half_width(
        label: impl Into<String>,
        n: usize,
        energy: Expr,
        constraints: Vec<Expr>,
        half_width: f64,
    ) -> Result<Self, MetricError> {
        if n < 2 {
            return Err(MetricError::Dimension(n));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(MetricError::InvalidParameter(format!("sampling half width {half_width}")));
        }
        for e in std::iter::once(&energy).chain(&constraints) {
            let (nx, ny) = e.variable_extent();
            if nx > n {
                return Err(MetricError::VariableOutOfRange { var: format!("x{nx}"), n });
            }
            if ny > n {
                return Err(MetricError::VariableOutOfRange { var: format!("y{ny}"), n });
            }
        }
        if constraints.iter().any(Expr::depends_on_y) {
            return Err(MetricError::InvalidParameter("domain constraints may only depend on x".into()));
        }
        if !energy.depends_on_y() {
            return Err(MetricError::NoFiberDependence);
        }
        let metric = FinslerMetric { label: label.into(), n, energy, constraints, half_width };
        metric.validate()?;
        Ok(metric)
    }

    fn validate(&self) -> Result<(), MetricError> {
        let points = self.sample_points(VALIDATION_POINTS, VALIDATION_SEED);
        if points.is_empty() {
            return Err(MetricError::NoValidPoints);
        }
        for p in &points {
            let e1 = self.energy_at(p)?;
            for lambda in [2.0, 3.0] {
                let scaled = self.energy_at(&p.with_fiber_scaled(lambda))?;
                let expected = lambda * lambda * e1;
                let defect = (scaled - expected).abs() / expected.abs();
                if !(defect < HOMOGENEITY_TOL) {
                    return Err(MetricError::NotHomogeneous { lambda, defect });
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn energy(&self) -> &Expr {
        &self.energy
    }

    pub fn constraints(&self) -> &[Expr] {
        &self.constraints
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// `F²(x, y)` in plain floating point.
    pub fn energy_value(&self, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
        self.energy.eval(x, y, &0.0)
    }

    fn energy_at(&self, p: &TMPoint) -> Result<f64, DomainError> {
        let e = self.energy_value(&p.x, &p.y)?;
        if !(e.is_finite() && e > 0.0) {
            return Err(DomainError::Energy(e));
        }
        Ok(e)
    }

    /// Domain predicate: shape, nonzero y, constraints, positive finite energy.
    pub fn check_point(&self, p: &TMPoint) -> Result<(), DomainError> {
        if p.x.len() != self.n || p.y.len() != self.n {
            return Err(DomainError::Shape { x: p.x.len(), y: p.y.len(), n: self.n });
        }
        if p.y.iter().all(|&v| v == 0.0) || p.y.iter().chain(&p.x).any(|v| !v.is_finite()) {
            return Err(DomainError::ZeroVector);
        }
        for (index, c) in self.constraints.iter().enumerate() {
            let value = c.eval(&p.x, &p.y, &0.0)?;
            if !(value > 0.0) {
                return Err(DomainError::Constraint { index, value });
            }
        }
        self.energy_at(p).map(|_| ())
    }

    /// Jet of the energy at `p` in the 2n variables `(x, y)`.
    pub fn energy_jet(&self, p: &TMPoint, order: usize) -> Result<Jet, DomainError> {
        let config = JetConfig::new(2 * self.n, order)?;
        let z = p.coordinates();
        let vars = (0..2 * self.n).map(|k| jet_variable(&z, k, config)).collect::<Result<Vec<_>, _>>()?;
        Ok(self.energy.eval(&vars[..self.n], &vars[self.n..], &vars[0])?)
    }

    /// Draws up to `count` domain points with x uniform in the sampling box and
    /// y uniform on the unit sphere; points where `g` is not positive definite
    /// are rejected. Deterministic for a given seed.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<TMPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let max_attempts = 1000 * count.max(1);
        for _ in 0..max_attempts {
            if out.len() == count {
                break;
            }
            let x: Vec<f64> = (0..self.n).map(|_| rng.random_range(-self.half_width..self.half_width)).collect();
            let y = loop {
                let v: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm > 1e-8 {
                    break v.into_iter().map(|a| a / norm).collect::<Vec<f64>>();
                }
            };
            let p = TMPoint { x, y };
            if self.check_point(&p).is_ok() && geometry::fundamental_tensor(self, &p).is_ok() {
                out.push(p);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_expr;

    #[test]
    fn rejects_inhomogeneous_energy() {
        let err = FinslerMetric::new("bad", 3, parse_expr("y1^2 + y2^2 + y3^2 + x1").unwrap(), vec![]).unwrap_err();
        assert!(matches!(err, MetricError::NotHomogeneous { .. }), "{err:?}");
    }

    #[test]
    fn rejects_out_of_range_variables() {
        let err = FinslerMetric::new("bad", 2, parse_expr("y1^2 + y3^2").unwrap(), vec![]).unwrap_err();
        assert!(matches!(err, MetricError::VariableOutOfRange { .. }));
        assert!(matches!(
            FinslerMetric::new("bad", 1, parse_expr("y1^2").unwrap(), vec![]),
            Err(MetricError::Dimension(1))
        ));
    }

    #[test]
    fn sampling_is_deterministic_and_in_domain() {
        let m = FinslerMetric::new("e", 3, parse_expr("y1^2 + y2^2 + y3^2").unwrap(), vec![]).unwrap();
        let a = m.sample_points(5, 7);
        let b = m.sample_points(5, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        for p in &a {
            assert!(p.x.iter().all(|v| v.abs() <= 0.5));
            let norm: f64 = p.y.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-14);
        }
        assert_ne!(a, m.sample_points(5, 8));
    }

    #[test]
    fn domain_predicate() {
        let m = FinslerMetric::new(
            "ball",
            3,
            parse_expr("y1^2 + y2^2 + y3^2").unwrap(),
            vec![parse_expr("1 - x1^2").unwrap()],
        )
        .unwrap();
        assert!(m.check_point(&TMPoint::new(vec![0.0; 3], vec![1.0, 0.0, 0.0])).is_ok());
        assert!(matches!(
            m.check_point(&TMPoint::new(vec![2.0, 0.0, 0.0], vec![1.0, 0.0, 0.0])),
            Err(DomainError::Constraint { .. })
        ));
        assert!(matches!(m.check_point(&TMPoint::new(vec![0.0; 3], vec![0.0; 3])), Err(DomainError::ZeroVector)));
    }
}
