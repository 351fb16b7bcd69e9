//! Truncated multivariate Taylor series ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients `c_α = ∂^α f(p) / α!` of a scalar
//! function around a base point `p`, for every multi-index `α` with total
//! degree `|α| <= order`. Coefficients live in a dense table ranked in
//! graded-lexicographic order, so truncating to a lower order is a prefix of
//! the table and products are a single convolution pass over a precomputed
//! list of `(lhs, rhs, out)` rank triples.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("variable index {index} out of range for {num_vars} variables")]
    IndexOutOfRange { index: usize, num_vars: usize },
    #[error("point has {got} coordinates, expected {expected}")]
    PointLength { got: usize, expected: usize },
    #[error("jet configuration mismatch: {lhs} vs {rhs}")]
    ConfigMismatch { lhs: JetConfig, rhs: JetConfig },
    #[error("division by a jet with zero constant term")]
    DivisionByZero,
    #[error("{op} of a jet with non-positive constant term {value}")]
    NonPositive { op: &'static str, value: f64 },
    #[error("multi-index degree {degree} exceeds jet order {order}")]
    DegreeTooHigh { degree: usize, order: usize },
    #[error("cannot differentiate a jet of order 0")]
    OrderExhausted,
    #[error("invalid jet configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("operation {0} needs a second operand")]
    MissingOperand(&'static str),
}

/// Shape of a jet: number of variables and total-degree truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JetConfig {
    pub num_vars: usize,
    pub order: usize,
}

impl JetConfig {
    pub const DEFAULT_ORDER: usize = 8;

    pub fn new(num_vars: usize, order: usize) -> Result<Self, JetError> {
        if num_vars == 0 {
            return Err(JetError::InvalidConfig("num_vars must be positive"));
        }
        if num_vars > 64 || order > 64 {
            return Err(JetError::InvalidConfig("num_vars and order are limited to 64"));
        }
        Ok(Self { num_vars, order })
    }

    /// Number of monomials of total degree at most `order`.
    pub fn len(&self) -> usize {
        binomial(self.num_vars + self.order, self.order)
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for JetConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(vars={}, order={})", self.num_vars, self.order)
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Rank bookkeeping shared by every jet with the same variable count.
struct Tables {
    num_vars: usize,
    order: usize,
    monomials: Vec<Vec<u8>>,
    /// `counts[k]` = number of monomials with degree <= k.
    counts: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    /// `raise[v][rank]` = rank of α + e_v, defined for deg(α) < order.
    raise: Vec<Vec<u32>>,
    /// Product triples sorted by output degree.
    products: Vec<(u32, u32, u32)>,
    /// `product_counts[k]` = number of triples whose output degree <= k.
    product_counts: Vec<usize>,
    /// α! per rank.
    factorials: Vec<f64>,
}

impl Tables {
    fn build(num_vars: usize, order: usize) -> Self {
        let mut monomials: Vec<Vec<u8>> = Vec::new();
        let mut counts = Vec::with_capacity(order + 1);
        for degree in 0..=order {
            let mut current = vec![0u8; num_vars];
            push_degree(&mut monomials, &mut current, 0, degree);
            counts.push(monomials.len());
        }
        let index: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(rank, alpha)| (alpha.clone(), rank))
            .collect();
        let degree_of = |alpha: &[u8]| alpha.iter().map(|&a| a as usize).sum::<usize>();

        let mut raise = vec![vec![u32::MAX; monomials.len()]; num_vars];
        for (rank, alpha) in monomials.iter().enumerate() {
            if degree_of(alpha) >= order {
                continue;
            }
            for (v, row) in raise.iter_mut().enumerate() {
                let mut up = alpha.clone();
                up[v] += 1;
                row[rank] = index[&up] as u32;
            }
        }

        let mut products = Vec::new();
        let mut product_counts = Vec::with_capacity(order + 1);
        for out_degree in 0..=order {
            let lo = if out_degree == 0 { 0 } else { counts[out_degree - 1] };
            for out in lo..counts[out_degree] {
                let gamma = &monomials[out];
                for (i, alpha) in monomials[..counts[out_degree]].iter().enumerate() {
                    if alpha.iter().zip(gamma).all(|(a, g)| a <= g) {
                        let beta: Vec<u8> = gamma.iter().zip(alpha).map(|(g, a)| g - a).collect();
                        products.push((i as u32, index[&beta] as u32, out as u32));
                    }
                }
            }
            product_counts.push(products.len());
        }

        let factorials = monomials
            .iter()
            .map(|alpha| alpha.iter().map(|&a| factorial(a as usize)).product())
            .collect();

        Self { num_vars, order, monomials, counts, index, raise, products, product_counts, factorials }
    }

    fn shared(num_vars: usize, order: usize) -> Arc<Tables> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Tables>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = guard.get(&num_vars) {
            if t.order >= order {
                return Arc::clone(t);
            }
        }
        let built = Arc::new(Tables::build(num_vars, order));
        guard.insert(num_vars, Arc::clone(&built));
        built
    }
}

fn push_degree(out: &mut Vec<Vec<u8>>, current: &mut [u8], var: usize, remaining: usize) {
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(current.to_vec());
        current[var] = 0;
        return;
    }
    for take in (0..=remaining).rev() {
        current[var] = take as u8;
        push_degree(out, current, var + 1, remaining - take);
    }
    current[var] = 0;
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Truncated Taylor expansion of a scalar function.
#[derive(Clone)]
pub struct Jet {
    tables: Arc<Tables>,
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("config", &self.config())
            .field("value", &self.value())
            .finish()
    }
}

/// Jet of the coordinate function `v_index` expanded at `point`.
pub fn jet_variable(point: &[f64], index: usize, config: JetConfig) -> Result<Jet, JetError> {
    if point.len() != config.num_vars {
        return Err(JetError::PointLength { got: point.len(), expected: config.num_vars });
    }
    if index >= config.num_vars {
        return Err(JetError::IndexOutOfRange { index, num_vars: config.num_vars });
    }
    let mut jet = Jet::constant(point[index], config);
    if config.order >= 1 {
        jet.coeffs[1 + index] = 1.0;
    }
    Ok(jet)
}

/// Operations accepted by [`jet_apply`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
    Div,
    PowInt(i32),
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

/// Applies `op` to one or two jets, requiring identical configurations.
pub fn jet_apply(op: JetOp, a: &Jet, b: Option<&Jet>) -> Result<Jet, JetError> {
    let binary = |name: &'static str| -> Result<&Jet, JetError> {
        let b = b.ok_or(JetError::MissingOperand(name))?;
        if a.config() != b.config() {
            return Err(JetError::ConfigMismatch { lhs: a.config(), rhs: b.config() });
        }
        Ok(b)
    };
    match op {
        JetOp::Add => Ok(a + binary("add")?),
        JetOp::Sub => Ok(a - binary("sub")?),
        JetOp::Mul => Ok(a * binary("mul")?),
        JetOp::Div => a.div(binary("div")?),
        JetOp::PowInt(k) => a.powi(k),
        JetOp::Sqrt => a.sqrt(),
        JetOp::Exp => Ok(a.exp()),
        JetOp::Log => a.ln(),
        JetOp::Sin => Ok(a.sin()),
        JetOp::Cos => Ok(a.cos()),
    }
}

/// Raw mixed partial `∂^α f` at the base point.
pub fn extract_partial(jet: &Jet, alpha: &[usize]) -> Result<f64, JetError> {
    jet.partial_value(alpha)
}

impl Jet {
    pub fn constant(value: f64, config: JetConfig) -> Jet {
        let tables = Tables::shared(config.num_vars, config.order);
        let mut coeffs = vec![0.0; tables.counts[config.order]];
        coeffs[0] = value;
        Jet { tables, order: config.order, coeffs }
    }

    pub fn config(&self) -> JetConfig {
        JetConfig { num_vars: self.tables.num_vars, order: self.order }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_vars(&self) -> usize {
        self.tables.num_vars
    }

    /// Constant term, i.e. the function value at the base point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor-normalized coefficient table in graded-lexicographic rank order.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Multi-index belonging to a coefficient rank.
    pub fn multi_index(&self, rank: usize) -> Vec<usize> {
        self.tables.monomials[rank].iter().map(|&a| a as usize).collect()
    }

    pub fn coefficient(&self, alpha: &[usize]) -> Result<f64, JetError> {
        let rank = self.rank_of(alpha)?;
        Ok(self.coeffs[rank])
    }

    pub fn partial_value(&self, alpha: &[usize]) -> Result<f64, JetError> {
        let rank = self.rank_of(alpha)?;
        Ok(self.coeffs[rank] * self.tables.factorials[rank])
    }

    fn rank_of(&self, alpha: &[usize]) -> Result<usize, JetError> {
        if alpha.len() != self.num_vars() {
            return Err(JetError::PointLength { got: alpha.len(), expected: self.num_vars() });
        }
        let degree: usize = alpha.iter().sum();
        if degree > self.order {
            return Err(JetError::DegreeTooHigh { degree, order: self.order });
        }
        let key: Vec<u8> = alpha.iter().map(|&a| a as u8).collect();
        Ok(self.tables.index[&key])
    }

    /// Constant jet sharing this jet's configuration.
    pub fn lift(&self, value: f64) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        coeffs[0] = value;
        Jet { tables: Arc::clone(&self.tables), order: self.order, coeffs }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            tables: Arc::clone(&self.tables),
            order,
            coeffs: self.coeffs[..self.tables.counts[order]].to_vec(),
        }
    }

    /// Partial derivative with respect to variable `var`; the result has order one lower.
    pub fn partial(&self, var: usize) -> Result<Jet, JetError> {
        if var >= self.num_vars() {
            return Err(JetError::IndexOutOfRange { index: var, num_vars: self.num_vars() });
        }
        if self.order == 0 {
            return Err(JetError::OrderExhausted);
        }
        let order = self.order - 1;
        let len = self.tables.counts[order];
        let raise = &self.tables.raise[var];
        let coeffs = (0..len)
            .map(|rank| {
                let up = raise[rank] as usize;
                let power = self.tables.monomials[up][var] as f64;
                power * self.coeffs[up]
            })
            .collect();
        Ok(Jet { tables: Arc::clone(&self.tables), order, coeffs })
    }

    pub fn scale(&self, factor: f64) -> Jet {
        Jet {
            tables: Arc::clone(&self.tables),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add_scalar(&self, value: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += value;
        out
    }

    fn pair<'a>(&'a self, other: &'a Jet) -> (&'a Arc<Tables>, usize) {
        assert_eq!(
            self.num_vars(),
            other.num_vars(),
            "jets over different variable counts cannot be combined"
        );
        let tables = if self.tables.order >= other.tables.order { &self.tables } else { &other.tables };
        (tables, self.order.min(other.order))
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let (tables, order) = self.pair(other);
        let len = tables.counts[order];
        let coeffs = self.coeffs[..len].iter().zip(&other.coeffs[..len]).map(|(a, b)| f(*a, *b)).collect();
        Jet { tables: Arc::clone(tables), order, coeffs }
    }

    fn product(&self, other: &Jet) -> Jet {
        let (tables, order) = self.pair(other);
        let len = tables.counts[order];
        let mut coeffs = vec![0.0; len];
        let a = &self.coeffs;
        let b = &other.coeffs;
        for &(i, j, k) in &tables.products[..tables.product_counts[order]] {
            coeffs[k as usize] += a[i as usize] * b[j as usize];
        }
        Jet { tables: Arc::clone(tables), order, coeffs }
    }

    /// Evaluates `Σ_k series[k] h^k` where `h = self - value()`.
    fn compose(&self, series: &[f64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut acc = self.lift(series[self.order]);
        for k in (0..self.order).rev() {
            acc = acc.product(&h);
            acc.coeffs[0] += series[k];
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let a0 = self.value();
        if a0 == 0.0 || !a0.is_finite() {
            return Err(JetError::DivisionByZero);
        }
        let mut series = Vec::with_capacity(self.order + 1);
        let mut term = 1.0 / a0;
        for _ in 0..=self.order {
            series.push(term);
            term *= -1.0 / a0;
        }
        Ok(self.compose(&series))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self * &other.recip()?)
    }

    pub fn powi(&self, k: i32) -> Result<Jet, JetError> {
        if k < 0 {
            return self.recip()?.powi(-k);
        }
        let mut base = self.clone();
        let mut acc = self.lift(1.0);
        let mut e = k as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.product(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.product(&base);
            }
        }
        Ok(acc)
    }

    /// Real power with a positive base.
    pub fn powf(&self, p: f64) -> Result<Jet, JetError> {
        let a0 = self.value();
        if a0 <= 0.0 || !a0.is_finite() {
            return Err(JetError::NonPositive { op: "pow", value: a0 });
        }
        let mut series = Vec::with_capacity(self.order + 1);
        let mut coeff = 1.0;
        for k in 0..=self.order {
            series.push(coeff * a0.powf(p - k as f64));
            coeff *= (p - k as f64) / (k as f64 + 1.0);
        }
        Ok(self.compose(&series))
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let a0 = self.value();
        if a0 <= 0.0 || !a0.is_finite() {
            return Err(JetError::NonPositive { op: "sqrt", value: a0 });
        }
        self.powf(0.5)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let series: Vec<f64> = (0..=self.order).map(|k| e / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        let a0 = self.value();
        if a0 <= 0.0 || !a0.is_finite() {
            return Err(JetError::NonPositive { op: "log", value: a0 });
        }
        let mut series = vec![a0.ln()];
        for k in 1..=self.order {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            series.push(sign / (k as f64 * a0.powi(k as i32)));
        }
        Ok(self.compose(&series))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let series: Vec<f64> = (0..=self.order).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let series: Vec<f64> = (0..=self.order).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose(&series)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, k: usize) -> JetConfig {
        JetConfig::new(n, k).unwrap()
    }

    #[test]
    fn variable_has_unit_linear_term() {
        let x = jet_variable(&[3.0, 5.0], 0, cfg(2, 2)).unwrap();
        assert_eq!(x.coefficient(&[0, 0]).unwrap(), 3.0);
        assert_eq!(x.coefficient(&[1, 0]).unwrap(), 1.0);
        for rank in 2..x.coefficients().len() {
            assert_eq!(x.coefficients()[rank], 0.0);
        }
        let y = jet_variable(&[0.0, 0.0], 1, cfg(2, 1)).unwrap();
        assert_eq!(y.coefficient(&[0, 0]).unwrap(), 0.0);
        assert_eq!(y.coefficient(&[0, 1]).unwrap(), 1.0);
        assert_eq!(y.coefficient(&[1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn variable_index_out_of_range() {
        assert!(matches!(
            jet_variable(&[0.0, 0.0], 2, cfg(2, 2)),
            Err(JetError::IndexOutOfRange { index: 2, num_vars: 2 })
        ));
    }

    #[test]
    fn square_expansion() {
        let x = jet_variable(&[3.0], 0, cfg(1, 2)).unwrap();
        let sq = jet_apply(JetOp::Mul, &x, Some(&x)).unwrap();
        assert_eq!(sq.coefficients(), &[9.0, 6.0, 1.0]);
        assert_eq!(extract_partial(&sq, &[2]).unwrap(), 2.0);
    }

    #[test]
    fn sqrt_of_constant() {
        let four = Jet::constant(4.0, cfg(2, 3));
        let root = jet_apply(JetOp::Sqrt, &four, None).unwrap();
        assert_eq!(root.value(), 2.0);
        assert!(root.coefficients()[1..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn division_by_zero_constant_term() {
        let x = jet_variable(&[0.0], 0, cfg(1, 3)).unwrap();
        let one = x.lift(1.0);
        assert_eq!(jet_apply(JetOp::Div, &one, Some(&x)).unwrap_err(), JetError::DivisionByZero);
        assert!(matches!(x.sqrt(), Err(JetError::NonPositive { .. })));
        assert!(matches!(x.ln(), Err(JetError::NonPositive { .. })));
    }

    #[test]
    fn exp_third_derivative() {
        let x = jet_variable(&[0.0], 0, cfg(1, 5)).unwrap();
        assert!((extract_partial(&x.exp(), &[3]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_multi_index_is_value() {
        let p = [0.3, -0.2];
        let x = jet_variable(&p, 0, cfg(2, 4)).unwrap();
        let y = jet_variable(&p, 1, cfg(2, 4)).unwrap();
        let f = (&x * &y).sin();
        assert_eq!(extract_partial(&f, &[0, 0]).unwrap(), f.value());
        assert!((f.value() - (0.3f64 * -0.2).sin()).abs() < 1e-16);
    }

    #[test]
    fn partial_beyond_order_is_error() {
        let x = jet_variable(&[1.0], 0, cfg(1, 2)).unwrap();
        assert!(matches!(extract_partial(&x, &[3]), Err(JetError::DegreeTooHigh { .. })));
    }

    #[test]
    fn strict_config_check() {
        let a = jet_variable(&[1.0, 2.0], 0, cfg(2, 3)).unwrap();
        let b = jet_variable(&[1.0, 2.0], 0, cfg(2, 2)).unwrap();
        assert!(matches!(jet_apply(JetOp::Add, &a, Some(&b)), Err(JetError::ConfigMismatch { .. })));
        assert!(matches!(jet_apply(JetOp::Mul, &a, None), Err(JetError::MissingOperand(_))));
    }

    #[test]
    fn grlex_prefix_counts() {
        let c = cfg(6, 8);
        assert_eq!(c.len(), 3003);
        let j = Jet::constant(1.0, c);
        assert_eq!(j.coefficients().len(), 3003);
        assert_eq!(j.truncate(2).coefficients().len(), 28);
        assert_eq!(j.multi_index(1), vec![1, 0, 0, 0, 0, 0]);
        assert_eq!(j.multi_index(6), vec![0, 0, 0, 0, 0, 1]);
    }

    #[test]
    fn derivative_lowers_order() {
        let p = [0.5, 0.25];
        let x = jet_variable(&p, 0, cfg(2, 4)).unwrap();
        let y = jet_variable(&p, 1, cfg(2, 4)).unwrap();
        // f = x^3 y
        let f = &x.powi(3).unwrap() * &y;
        let fx = f.partial(0).unwrap();
        assert_eq!(fx.order(), 3);
        assert!((fx.value() - 3.0 * 0.25 * 0.25).abs() < 1e-15);
        let fxy = fx.partial(1).unwrap();
        assert!((fxy.value() - 3.0 * 0.25).abs() < 1e-15);
        assert!((extract_partial(&fxy, &[1, 0]).unwrap() - 6.0 * 0.5).abs() < 1e-14);
    }

    #[test]
    fn mixed_order_product_truncates() {
        let p = [0.5];
        let x4 = jet_variable(&p, 0, cfg(1, 4)).unwrap();
        let x2 = x4.truncate(2);
        let prod = &x4 * &x2;
        assert_eq!(prod.order(), 2);
        assert_eq!(prod.coefficients(), &[0.25, 1.0, 1.0]);
    }

    #[test]
    fn log_and_trig_series() {
        let x = jet_variable(&[0.7], 0, cfg(1, 6)).unwrap();
        let l = x.ln().unwrap();
        // d^k/dx^k ln x = (-1)^(k-1)(k-1)!/x^k
        for k in 1..=6usize {
            let expected = (-1f64).powi(k as i32 - 1) * factorial(k - 1) / 0.7f64.powi(k as i32);
            let got = extract_partial(&l, &[k]).unwrap();
            assert!((got - expected).abs() < 1e-11 * expected.abs().max(1.0), "k={k}");
        }
        let s = x.sin();
        let c = x.cos();
        let one = &(&s * &s) + &(&c * &c);
        assert!((one.value() - 1.0).abs() < 1e-15);
        assert!(one.coefficients()[1..].iter().all(|v| v.abs() < 1e-14));
        let back = x.sqrt().unwrap().powi(2).unwrap();
        for (a, b) in back.coefficients().iter().zip(x.coefficients()) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
