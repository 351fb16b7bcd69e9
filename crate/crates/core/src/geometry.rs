//! Cartan-connection curvature at a point of the slit tangent bundle.
//!
//! Everything is computed over jets in the `2n` variables `(x, y)`, so each
//! stage can be differentiated again by the next one. Index layout:
//!
//! * `g[i][j]`, `g_inv[i][j]`, `cartan[i][j][k] = C_ijk`
//! * `nonlinear[i][j] = Nⁱ_j`, `gamma[i][j][k] = Γⁱ_jk`
//! * `curvature[i][j][k][l] = Rⁱ_jkl`, the component of `R(δ_k, δ_l)∂_j` along `∂_i`
//! * `rhat[i][k][l] = R̂ⁱ_kl = Rⁱ_jkl yʲ`
//! * covariant derivatives prepend the derivative slot: `∇R[m][i][j][k][l]`
//!   and `∇∇R[m1][m2][i][j][k][l]` with the outer derivative first.
//!
//! Sign conventions: the unit sphere has `r = n(n-1)`, constant-curvature
//! metrics satisfy `R = κ·G` with `Gⁱ_jkl = g_kj δⁱ_l - g_lj δⁱ_k`, and
//! `Ric_jk = Σ_l Rˡ_jkl`.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::jet::{jet_variable, Jet, JetConfig, JetError};
use crate::linalg;
use crate::metric::{DomainError, FinslerMetric, TMPoint};
use crate::tensor::Tensor;

/// How far the covariant-derivative tower is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Depth {
    Base,
    First,
    Second,
}

impl Depth {
    /// Smallest jet order accepted for this depth.
    pub fn min_order(self) -> usize {
        match self {
            Depth::Base => 4,
            Depth::First => 5,
            Depth::Second => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Depth::Base => "base",
            Depth::First => "first",
            Depth::Second => "second",
        }
    }
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("jet arithmetic failed: {0}")]
    Jet(#[from] JetError),
    #[error("depth {depth} needs jet order >= {required}, got {order}")]
    OrderTooLow { depth: Depth, order: usize, required: usize },
    #[error("tensor shape mismatch: {0}")]
    Shape(String),
}

/// Variance of a tensor slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Up,
    Down,
}

pub const CURVATURE_SLOTS: [Slot; 4] = [Slot::Up, Slot::Down, Slot::Down, Slot::Down];

fn jet_sum(terms: impl IntoIterator<Item = Jet>) -> Jet {
    let mut it = terms.into_iter();
    let first = it.next().expect("sum over an empty index range");
    it.fold(first, |acc, t| &acc + &t)
}

/// Horizontal frame `δ_k = ∂_{x^k} - Nʳ_k ∂_{y^r}` together with the connection
/// coefficients, enough to take horizontal covariant derivatives of any jet tensor.
#[derive(Debug, Clone)]
pub struct Frame {
    n: usize,
    config: JetConfig,
    coords: Vec<f64>,
    nonlinear: Tensor<Jet>,
    gamma: Tensor<Jet>,
}

fn deltas_with(n: usize, nonlinear: &Tensor<Jet>, f: &Jet) -> Result<Vec<Jet>, JetError> {
    let py = (0..n).map(|r| f.partial(n + r)).collect::<Result<Vec<_>, _>>()?;
    (0..n)
        .map(|k| {
            let px = f.partial(k)?;
            let correction = jet_sum((0..n).map(|r| nonlinear.get(&[r, k]) * &py[r]));
            Ok(&px - &correction)
        })
        .collect()
}

impl Frame {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn config(&self) -> JetConfig {
        self.config
    }

    /// Jet of the chart coordinate `x^k` (`k < n`) or `y^{k-n}` (`k >= n`).
    pub fn coordinate(&self, k: usize) -> Result<Jet, JetError> {
        jet_variable(&self.coords, k, self.config)
    }

    pub fn nonlinear(&self) -> &Tensor<Jet> {
        &self.nonlinear
    }

    pub fn gamma(&self) -> &Tensor<Jet> {
        &self.gamma
    }

    pub fn delta(&self, f: &Jet, k: usize) -> Result<Jet, JetError> {
        let px = f.partial(k)?;
        let correction = jet_sum((0..self.n).map(|r| Ok::<_, JetError>(self.nonlinear.get(&[r, k]) * &f.partial(self.n + r)?)).collect::<Result<Vec<_>, _>>()?);
        Ok(&px - &correction)
    }

    /// `δ_k f` for every `k`, sharing the partial derivatives.
    pub fn deltas(&self, f: &Jet) -> Result<Vec<Jet>, JetError> {
        deltas_with(self.n, &self.nonlinear, f)
    }

    /// Horizontal covariant derivative, derivative index first:
    /// `(∇T)[m][a…] = δ_m T[a…] + Σ_up Γ^{a}_{r m} T[..r..] - Σ_down Γ^{r}_{a m} T[..r..]`.
    pub fn covariant(&self, t: &Tensor<Jet>, slots: &[Slot]) -> Result<Tensor<Jet>, GeometryError> {
        let n = self.n;
        if t.dim() != n || t.rank() != slots.len() {
            return Err(GeometryError::Shape(format!(
                "tensor of rank {} over {} indices with {} slot variances",
                t.rank(),
                t.dim(),
                slots.len()
            )));
        }
        let derivs = t.data().iter().map(|c| self.deltas(c)).collect::<Result<Vec<_>, _>>()?;
        let rank = t.rank();
        Ok(Tensor::from_fn(n, rank + 1, |idx| {
            let m = idx[0];
            let rest = &idx[1..];
            let mut acc = derivs[t.offset(rest)][m].clone();
            let mut moved = rest.to_vec();
            for (s, slot) in slots.iter().enumerate() {
                let a = rest[s];
                for r in 0..n {
                    moved[s] = r;
                    let value = t.get(&moved);
                    acc = match slot {
                        Slot::Up => &acc + &(self.gamma.get(&[a, r, m]) * value),
                        Slot::Down => &acc - &(self.gamma.get(&[r, a, m]) * value),
                    };
                }
                moved[s] = a;
            }
            acc
        }))
    }
}

/// Jets of the connection stage: `g`, its inverse, the Cartan tensor, the
/// spray and the horizontal frame.
#[derive(Debug, Clone)]
pub struct ConnectionJets {
    pub g: Tensor<Jet>,
    pub g_inv: Tensor<Jet>,
    pub cartan: Tensor<Jet>,
    pub spray: Vec<Jet>,
    /// `δ_k g_ij` stored as `[k][i][j]`.
    pub delta_g: Tensor<Jet>,
    pub frame: Frame,
}

fn hessian_y(e: &Jet, n: usize) -> Result<Tensor<Jet>, JetError> {
    let ey = (0..n).map(|i| e.partial(n + i)).collect::<Result<Vec<_>, _>>()?;
    Tensor::try_from_fn(n, 2, |ij| {
        let (i, j) = (ij[0].min(ij[1]), ij[0].max(ij[1]));
        Ok(ey[i].partial(n + j)?.scale(0.5))
    })
}

fn cartan_from(g: &Tensor<Jet>, n: usize) -> Result<Tensor<Jet>, JetError> {
    Tensor::try_from_fn(n, 3, |ijk| {
        let mut s = [ijk[0], ijk[1], ijk[2]];
        s.sort_unstable();
        Ok(g.get(&[s[0], s[1]]).partial(n + s[2])?.scale(0.5))
    })
}

/// Cholesky factor of `g`, rejecting indefinite or nearly singular matrices
/// (`det g < 1e-12 ‖g‖ⁿ`).
pub fn check_positive_definite(g: &Tensor<f64>) -> Result<Vec<f64>, DomainError> {
    let n = g.dim();
    let l = linalg::cholesky(g.data(), n).ok_or(DomainError::NotPositiveDefinite)?;
    let det = linalg::cholesky_det(&l, n);
    let threshold = 1e-12 * g.norm().powi(n as i32);
    if !(det >= threshold) {
        return Err(DomainError::Degenerate { det, threshold });
    }
    Ok(l)
}

/// Jet inverse through the Neumann series `Σ_p (-g₀⁻¹Δ)^p g₀⁻¹`, exact at the jet order.
fn inverse_jets(g: &Tensor<Jet>, g0inv: &[f64]) -> Tensor<Jet> {
    let n = g.dim();
    let proto = &g.data()[0];
    let order = proto.order();
    let m = Tensor::from_fn(n, 2, |ij| {
        let (i, j) = (ij[0], ij[1]);
        jet_sum((0..n).map(|k| {
            let dev = g.get(&[k, j]).add_scalar(-g.get(&[k, j]).value());
            dev.scale(-g0inv[i * n + k])
        }))
    });
    let identity = |i: usize, j: usize| proto.lift(if i == j { 1.0 } else { 0.0 });
    let mut s = Tensor::from_fn(n, 2, |ij| identity(ij[0], ij[1]));
    for _ in 0..order {
        s = Tensor::from_fn(n, 2, |ij| {
            let prod = jet_sum((0..n).map(|k| m.get(&[ij[0], k]) * s.get(&[k, ij[1]])));
            prod.add_scalar(if ij[0] == ij[1] { 1.0 } else { 0.0 })
        });
    }
    let inv = Tensor::from_fn(n, 2, |ij| jet_sum((0..n).map(|k| s.get(&[ij[0], k]).scale(g0inv[k * n + ij[1]]))));
    Tensor::from_fn(n, 2, |ij| (inv.get(&[ij[0], ij[1]]) + inv.get(&[ij[1], ij[0]])).scale(0.5))
}

/// Builds the connection stage from an energy jet of the given order.
pub fn connection_jets(m: &FinslerMetric, p: &TMPoint, order: usize) -> Result<ConnectionJets, GeometryError> {
    m.check_point(p)?;
    let n = m.dim();
    let config = JetConfig::new(2 * n, order)?;
    if order < 3 {
        return Err(GeometryError::Jet(JetError::OrderExhausted));
    }
    let e = m.energy_jet(p, order)?;
    let g = hessian_y(&e, n)?;
    let chol = check_positive_definite(&g.values())?;
    let g0inv = linalg::spd_inverse(&chol, n);
    let cartan = cartan_from(&g, n)?;
    let g_inv = inverse_jets(&g, &g0inv);

    let coords = p.coordinates();
    let ex = (0..n).map(|l| e.partial(l)).collect::<Result<Vec<_>, _>>()?;
    let ey = (0..n).map(|l| e.partial(n + l)).collect::<Result<Vec<_>, _>>()?;
    let yv = (0..n).map(|k| jet_variable(&coords, n + k, config)).collect::<Result<Vec<_>, _>>()?;
    let w = (0..n)
        .map(|l| {
            let mixed = (0..n).map(|k| Ok::<_, JetError>(&yv[k] * &ey[l].partial(k)?)).collect::<Result<Vec<_>, _>>()?;
            Ok::<_, JetError>(&jet_sum(mixed) - &ex[l])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let spray: Vec<Jet> = (0..n).map(|i| jet_sum((0..n).map(|l| g_inv.get(&[i, l]) * &w[l])).scale(0.25)).collect();
    let nonlinear = Tensor::try_from_fn(n, 2, |ij| spray[ij[0]].partial(n + ij[1]))?;

    let dg_parts = g.data().iter().map(|c| deltas_with(n, &nonlinear, c)).collect::<Result<Vec<_>, _>>()?;
    let delta_g = Tensor::from_fn(n, 3, |kij| dg_parts[kij[1] * n + kij[2]][kij[0]].clone());
    let gamma = Tensor::from_fn(n, 3, |ijk| {
        let (i, j, k) = (ijk[0], ijk[1], ijk[2]);
        jet_sum((0..n).map(|r| {
            let bracket = &(delta_g.get(&[j, r, k]) + delta_g.get(&[k, r, j])) - delta_g.get(&[r, j, k]);
            g_inv.get(&[i, r]) * &bracket.scale(0.5)
        }))
    });
    let frame = Frame { n, config, coords, nonlinear, gamma };
    Ok(ConnectionJets { g, g_inv, cartan, spray, delta_g, frame })
}

/// `g_ij = ½ ∂²F²/∂yⁱ∂yʲ` at `p`, checked to be positive definite.
pub fn fundamental_tensor(m: &FinslerMetric, p: &TMPoint) -> Result<Tensor<f64>, GeometryError> {
    m.check_point(p)?;
    let e = m.energy_jet(p, 2)?;
    let g = hessian_y(&e, m.dim())?.values();
    check_positive_definite(&g)?;
    Ok(g)
}

/// `C_ijk = ¼ ∂³F²/∂yⁱ∂yʲ∂yᵏ`.
pub fn cartan_tensor(m: &FinslerMetric, p: &TMPoint) -> Result<Tensor<f64>, GeometryError> {
    m.check_point(p)?;
    let e = m.energy_jet(p, 3)?;
    let g = hessian_y(&e, m.dim())?;
    check_positive_definite(&g.values())?;
    Ok(cartan_from(&g, m.dim())?.values())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Connection {
    pub spray: Vec<f64>,
    pub nonlinear: Tensor<f64>,
    pub gamma: Tensor<f64>,
}

pub fn connection(m: &FinslerMetric, p: &TMPoint) -> Result<Connection, GeometryError> {
    let cj = connection_jets(m, p, 3)?;
    Ok(Connection {
        spray: cj.spray.iter().map(Jet::value).collect(),
        nonlinear: cj.frame.nonlinear.values(),
        gamma: cj.frame.gamma.values(),
    })
}

/// Max-abs defects of the axioms the connection must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConnectionResiduals {
    /// `Γⁱ_jk - Γⁱ_kj`
    pub symmetry: f64,
    /// `Nⁱ_k - Γⁱ_jk yʲ`
    pub deflection: f64,
    /// `δ_k g_ij - Γʳ_ik g_rj - Γʳ_jk g_ir`
    pub metricity: f64,
}

pub fn connection_residuals(m: &FinslerMetric, p: &TMPoint) -> Result<ConnectionResiduals, GeometryError> {
    let cj = connection_jets(m, p, 3)?;
    let n = m.dim();
    let gamma = cj.frame.gamma.values();
    let nonlinear = cj.frame.nonlinear.values();
    let g = cj.g.values();
    let dg = cj.delta_g.values();
    let mut res = ConnectionResiduals { symmetry: 0.0, deflection: 0.0, metricity: 0.0 };
    for i in 0..n {
        for k in 0..n {
            let contracted: f64 = (0..n).map(|j| gamma.get(&[i, j, k]) * p.y[j]).sum();
            res.deflection = res.deflection.max((nonlinear.get(&[i, k]) - contracted).abs());
            for j in 0..n {
                res.symmetry = res.symmetry.max((gamma.get(&[i, j, k]) - gamma.get(&[i, k, j])).abs());
                let defect = dg.get(&[k, i, j])
                    - (0..n).map(|r| gamma.get(&[r, i, k]) * g.get(&[r, j]) + gamma.get(&[r, j, k]) * g.get(&[i, r])).sum::<f64>();
                res.metricity = res.metricity.max(defect.abs());
            }
        }
    }
    Ok(res)
}

/// Jet-valued tensors retained for differentiating fitted forms.
#[derive(Debug, Clone)]
pub struct BundleJets {
    pub frame: Frame,
    pub g: Tensor<Jet>,
    pub g_inv: Tensor<Jet>,
    pub curvature: Tensor<Jet>,
    pub ric: Tensor<Jet>,
    pub scalar_curvature: Jet,
    pub gten: Tensor<Jet>,
    pub cten: Tensor<Jet>,
    pub nabla_curvature: Option<Tensor<Jet>>,
    pub nabla_ric: Option<Tensor<Jet>>,
    pub nabla_cten: Option<Tensor<Jet>>,
    pub nabla_scalar: Option<Tensor<Jet>>,
    pub nabla2_curvature: Option<Tensor<Jet>>,
    pub nabla2_ric: Option<Tensor<Jet>>,
    pub nabla2_cten: Option<Tensor<Jet>>,
}

/// All curvature quantities at one point.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub point: TMPoint,
    pub depth: Depth,
    pub order: usize,
    pub g: Tensor<f64>,
    pub g_inv: Tensor<f64>,
    pub cartan: Tensor<f64>,
    pub spray: Vec<f64>,
    pub nonlinear: Tensor<f64>,
    pub gamma: Tensor<f64>,
    pub curvature: Tensor<f64>,
    pub rhat: Tensor<f64>,
    pub ric: Tensor<f64>,
    pub scalar_curvature: f64,
    pub gten: Tensor<f64>,
    pub cten: Tensor<f64>,
    pub nabla_curvature: Option<Tensor<f64>>,
    pub nabla2_curvature: Option<Tensor<f64>>,
    pub nabla_ric: Option<Tensor<f64>>,
    pub nabla2_ric: Option<Tensor<f64>>,
    pub nabla_cten: Option<Tensor<f64>>,
    pub nabla2_cten: Option<Tensor<f64>>,
    pub nabla_scalar: Option<Vec<f64>>,
    pub jets: BundleJets,
}

impl CurvatureBundle {
    pub fn dim(&self) -> usize {
        self.g.dim()
    }
}

/// Curvature at the default jet order.
pub fn curvature(m: &FinslerMetric, p: &TMPoint, depth: Depth) -> Result<CurvatureBundle, GeometryError> {
    curvature_with_order(m, p, depth, JetConfig::DEFAULT_ORDER)
}

pub fn curvature_with_order(
    m: &FinslerMetric,
    p: &TMPoint,
    depth: Depth,
    order: usize,
) -> Result<CurvatureBundle, GeometryError> {
    if order < depth.min_order() {
        return Err(GeometryError::OrderTooLow { depth, order, required: depth.min_order() });
    }
    let n = m.dim();
    let cj = connection_jets(m, p, order)?;
    let frame = &cj.frame;
    let (nonlinear, gamma) = (&frame.nonlinear, &frame.gamma);

    let d_nonlinear = nonlinear.data().iter().map(|c| frame.deltas(c)).collect::<Result<Vec<_>, _>>()?;
    let rhat = Tensor::from_fn(n, 3, |ikl| {
        let (i, k, l) = (ikl[0], ikl[1], ikl[2]);
        &d_nonlinear[i * n + k][l] - &d_nonlinear[i * n + l][k]
    });
    let cartan_up = Tensor::from_fn(n, 3, |ijr| {
        jet_sum((0..n).map(|a| cj.g_inv.get(&[ijr[0], a]) * cj.cartan.get(&[a, ijr[1], ijr[2]])))
    });
    let d_gamma = gamma.data().iter().map(|c| frame.deltas(c)).collect::<Result<Vec<_>, _>>()?;
    let curv = Tensor::from_fn(n, 4, |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc = &d_gamma[gamma.offset(&[i, j, k])][l] - &d_gamma[gamma.offset(&[i, j, l])][k];
        for a in 0..n {
            acc = &acc + &(gamma.get(&[i, a, l]) * gamma.get(&[a, j, k]));
            acc = &acc - &(gamma.get(&[i, a, k]) * gamma.get(&[a, j, l]));
            acc = &acc + &(cartan_up.get(&[i, j, a]) * rhat.get(&[a, k, l]));
        }
        acc
    });
    let ric = Tensor::from_fn(n, 2, |jk| jet_sum((0..n).map(|l| curv.get(&[l, jk[0], jk[1], l]).clone())));
    let scalar = jet_sum((0..n).flat_map(|j| (0..n).map(move |k| (j, k))).map(|(j, k)| cj.g_inv.get(&[j, k]) * ric.get(&[j, k])));
    let zero = cj.g.data()[0].lift(0.0);
    let gten = Tensor::from_fn(n, 4, |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc = zero.clone();
        if i == l {
            acc = &acc + cj.g.get(&[k, j]);
        }
        if i == k {
            acc = &acc - cj.g.get(&[l, j]);
        }
        acc
    });
    let factor = scalar.scale(1.0 / (n * (n - 1)) as f64);
    let cten = Tensor::from_fn(n, 4, |idx| curv.get(idx) - &(&factor * gten.get(idx)));

    let mut jets = BundleJets {
        frame: frame.clone(),
        g: cj.g.clone(),
        g_inv: cj.g_inv.clone(),
        curvature: curv,
        ric,
        scalar_curvature: scalar,
        gten,
        cten,
        nabla_curvature: None,
        nabla_ric: None,
        nabla_cten: None,
        nabla_scalar: None,
        nabla2_curvature: None,
        nabla2_ric: None,
        nabla2_cten: None,
    };
    if depth >= Depth::First {
        jets.nabla_curvature = Some(frame.covariant(&jets.curvature, &CURVATURE_SLOTS)?);
        jets.nabla_ric = Some(frame.covariant(&jets.ric, &[Slot::Down, Slot::Down])?);
        jets.nabla_cten = Some(frame.covariant(&jets.cten, &CURVATURE_SLOTS)?);
        let r_tensor = Tensor::from_vec(n, 0, vec![jets.scalar_curvature.clone()]);
        jets.nabla_scalar = Some(frame.covariant(&r_tensor, &[])?);
    }
    if depth >= Depth::Second {
        let slots5 = [Slot::Down, Slot::Up, Slot::Down, Slot::Down, Slot::Down];
        jets.nabla2_curvature = Some(frame.covariant(jets.nabla_curvature.as_ref().unwrap(), &slots5)?);
        jets.nabla2_ric = Some(frame.covariant(jets.nabla_ric.as_ref().unwrap(), &[Slot::Down; 3])?);
        jets.nabla2_cten = Some(frame.covariant(jets.nabla_cten.as_ref().unwrap(), &slots5)?);
    }

    let vals = |t: &Option<Tensor<Jet>>| t.as_ref().map(Tensor::values);
    Ok(CurvatureBundle {
        point: p.clone(),
        depth,
        order,
        g: cj.g.values(),
        g_inv: cj.g_inv.values(),
        cartan: cj.cartan.values(),
        spray: cj.spray.iter().map(Jet::value).collect(),
        nonlinear: nonlinear.values(),
        gamma: gamma.values(),
        curvature: jets.curvature.values(),
        rhat: rhat.values(),
        ric: jets.ric.values(),
        scalar_curvature: jets.scalar_curvature.value(),
        gten: jets.gten.values(),
        cten: jets.cten.values(),
        nabla_curvature: vals(&jets.nabla_curvature),
        nabla2_curvature: vals(&jets.nabla2_curvature),
        nabla_ric: vals(&jets.nabla_ric),
        nabla2_ric: vals(&jets.nabla2_ric),
        nabla_cten: vals(&jets.nabla_cten),
        nabla2_cten: vals(&jets.nabla2_cten),
        nabla_scalar: jets.nabla_scalar.as_ref().map(|t| t.values().data().to_vec()),
        jets,
    })
}

/// Lowers the value slot of a (1,3) curvature-type tensor:
/// `out[k][l][j][d] = g_dm Tᵐ_jkl`.
pub fn lower_curvature(t: &Tensor<f64>, g: &Tensor<f64>) -> Tensor<f64> {
    let n = t.dim();
    Tensor::from_fn(n, 4, |idx| {
        let (k, l, j, d) = (idx[0], idx[1], idx[2], idx[3]);
        (0..n).map(|m| g.get(&[d, m]) * t.get(&[m, j, k, l])).sum()
    })
}

/// Derivation action of the curvature on a covariant tensor:
/// `(R(e_u, e_v)ω)(w₁…w_k) = -Σ_s ω(…, R(e_u, e_v)e_{w_s}, …)`, stored `[u][v][w…]`.
pub fn curvature_action(r: &Tensor<f64>, omega: &Tensor<f64>) -> Result<Tensor<f64>, GeometryError> {
    let n = r.dim();
    if r.rank() != 4 || omega.dim() != n {
        return Err(GeometryError::Shape(format!(
            "curvature of rank {} over {} indices acting on a tensor over {} indices",
            r.rank(),
            n,
            omega.dim()
        )));
    }
    let k = omega.rank();
    Ok(Tensor::from_fn(n, k + 2, |idx| {
        let (u, v, w) = (idx[0], idx[1], &idx[2..]);
        let mut moved = w.to_vec();
        let mut acc = 0.0;
        for s in 0..k {
            for i in 0..n {
                moved[s] = i;
                acc -= r.get(&[i, w[s], u, v]) * omega.get(&moved);
            }
            moved[s] = w[s];
        }
        acc
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_expr;

    fn metric(n: usize, src: &str) -> FinslerMetric {
        FinslerMetric::new("test", n, parse_expr(src).unwrap(), vec![]).unwrap()
    }

    #[test]
    fn euclidean_is_flat() {
        let m = metric(3, "y1^2 + y2^2 + y3^2");
        let p = TMPoint::new(vec![0.1, -0.2, 0.3], vec![0.6, 0.0, 0.8]);
        let b = curvature(&m, &p, Depth::Second).unwrap();
        assert!(b.curvature.max_abs() < 1e-14);
        assert!(b.gamma.max_abs() < 1e-14);
        assert_eq!(b.scalar_curvature, 0.0);
        assert!(b.nabla2_curvature.unwrap().max_abs() < 1e-14);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(*b.g.get(&[i, j]), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn riemannian_diagonal_reduction() {
        let m = metric(3, "y1^2 + (x1^2 + 1)*y2^2 + y3^2");
        let p = TMPoint::new(vec![1.0, 0.0, 0.0], vec![0.3, 0.4, 0.5]);
        let g = fundamental_tensor(&m, &p).unwrap();
        assert!((g.get(&[1, 1]) - 2.0).abs() < 1e-14);
        assert!(cartan_tensor(&m, &p).unwrap().max_abs() < 1e-14);
        let c = connection(&m, &p).unwrap();
        // Γ²_12 = ½ a₂₂⁻¹ ∂₁a₂₂ = x¹/(x¹²+1)
        assert!((c.gamma.get(&[1, 0, 1]) - 0.5).abs() < 1e-13);
        assert!((c.gamma.get(&[0, 1, 1]) + 1.0).abs() < 1e-13);
    }

    #[test]
    fn order_requirement() {
        let m = metric(3, "y1^2 + y2^2 + y3^2");
        let p = TMPoint::new(vec![0.0; 3], vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            curvature_with_order(&m, &p, Depth::Second, 7),
            Err(GeometryError::OrderTooLow { required: 8, .. })
        ));
    }

    #[test]
    fn action_on_metric_vanishes() {
        let m = metric(3, "exp(0.4*x1)*(y1^2 + y2^2 + y3^2)");
        let p = TMPoint::new(vec![0.2, 0.1, -0.3], vec![0.0, 0.6, 0.8]);
        let b = curvature(&m, &p, Depth::Base).unwrap();
        let act = curvature_action(&b.curvature, &b.g).unwrap();
        assert!(act.max_abs() < 1e-12);
    }
}

#[cfg(test)]
mod sphere_tests {
    use super::*;
    use crate::dsl::parse_expr;

    #[test]
    fn unit_sphere_pins() {
        let src = "(y1^2 + y2^2 + y3^2)/(1 + (x1^2 + x2^2 + x3^2)/4)^2";
        let m = FinslerMetric::new("sphere", 3, parse_expr(src).unwrap(), vec![]).unwrap();
        let p = TMPoint::new(vec![0.2, -0.1, 0.3], vec![0.48, 0.6, 0.64]);
        let b = curvature(&m, &p, Depth::Second).unwrap();
        assert!((b.scalar_curvature - 6.0).abs() < 1e-9, "{}", b.scalar_curvature);
        assert!(b.cten.norm() < 1e-9 * b.curvature.norm());
        assert!(b.nabla_curvature.unwrap().norm() < 1e-9);
        assert!(b.nabla2_curvature.unwrap().norm() < 1e-8);
        for j in 0..3 {
            for k in 0..3 {
                assert!((b.ric.get(&[j, k]) - 2.0 * b.g.get(&[j, k])).abs() < 1e-9);
            }
        }
    }
}
