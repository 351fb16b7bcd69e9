//! Finite-difference reference pipeline for the connection and curvature.
//!
//! Everything here is computed from plain `f64` evaluations of the energy with
//! nested central differences and Richardson extrapolation; no jets are used.
//! Each nesting level trades round-off for truncation error, so the steps grow
//! with depth: `1e-3` for derivatives of the energy, `1e-2` for `N` and `Γ`,
//! `3e-2` (three extrapolation levels) for `R`.

use serde::Serialize;

use crate::geometry::{curvature_with_order, CurvatureBundle, Depth, GeometryError};
use crate::linalg;
use crate::metric::{DomainError, FinslerMetric, TMPoint};

const ENERGY_STEP: f64 = 1e-3;
const CONNECTION_STEP: f64 = 1e-2;
const CURVATURE_STEP: f64 = 3e-2;

type Field<'a> = dyn Fn(&TMPoint) -> Result<Vec<f64>, GeometryError> + 'a;

fn shifted(p: &TMPoint, var: usize, t: f64) -> TMPoint {
    let mut q = p.clone();
    let n = q.x.len();
    if var < n {
        q.x[var] += t;
    } else {
        q.y[var - n] += t;
    }
    q
}

/// Derivative of every component of `f` in chart variable `var`
/// (`0..n` for x, `n..2n` for y), central differences at `h, h/2, …`
/// combined by Richardson extrapolation.
pub fn partial(f: &Field<'_>, p: &TMPoint, var: usize, h: f64, levels: usize) -> Result<Vec<f64>, GeometryError> {
    let mut table: Vec<Vec<Vec<f64>>> = Vec::with_capacity(levels);
    let mut step = h;
    for k in 0..levels.max(1) {
        let plus = f(&shifted(p, var, step))?;
        let minus = f(&shifted(p, var, -step))?;
        let mut row = vec![plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * step)).collect::<Vec<f64>>()];
        for j in 1..=k {
            let factor = 4f64.powi(j as i32) - 1.0;
            let prev = &table[k - 1][j - 1];
            let cur = &row[j - 1];
            row.push(cur.iter().zip(prev).map(|(c, q)| c + (c - q) / factor).collect());
        }
        table.push(row);
        step *= 0.5;
    }
    Ok(table.pop().and_then(|mut r| r.pop()).unwrap_or_default())
}

/// Reference values at one point; index layouts match [`CurvatureBundle`].
#[derive(Debug, Clone, PartialEq)]
pub struct FdValues {
    pub g: Vec<f64>,
    pub spray: Vec<f64>,
    pub nonlinear: Vec<f64>,
    pub gamma: Vec<f64>,
    pub curvature: Vec<f64>,
}

struct Pipeline<'m> {
    m: &'m FinslerMetric,
    n: usize,
}

impl Pipeline<'_> {
    fn energy(&self, p: &TMPoint) -> Result<Vec<f64>, GeometryError> {
        let e = self.m.energy_value(&p.x, &p.y).map_err(DomainError::Eval)?;
        Ok(vec![e])
    }

    /// `[∂E/∂x, ∂E/∂y]`.
    fn energy_gradient(&self, p: &TMPoint) -> Result<Vec<f64>, GeometryError> {
        let e = |q: &TMPoint| self.energy(q);
        (0..2 * self.n).map(|v| Ok(partial(&e, p, v, ENERGY_STEP, 2)?[0])).collect()
    }

    fn fiber_gradient(&self, p: &TMPoint) -> Result<Vec<f64>, GeometryError> {
        let e = |q: &TMPoint| self.energy(q);
        (self.n..2 * self.n).map(|v| Ok(partial(&e, p, v, ENERGY_STEP, 2)?[0])).collect()
    }

    fn metric(&self, p: &TMPoint) -> Result<Vec<f64>, GeometryError> {
        let n = self.n;
        let ey = |q: &TMPoint| self.fiber_gradient(q);
        let mut g = vec![0.0; n * n];
        for j in 0..n {
            let col = partial(&ey, p, n + j, ENERGY_STEP, 2)?;
            for i in 0..n {
                g[i * n + j] += 0.25 * col[i];
                g[j * n + i] += 0.25 * col[i];
            }
        }
        Ok(g)
    }

    fn inverse(&self, g: &[f64]) -> Result<Vec<f64>, GeometryError> {
        linalg::inverse(g, self.n).ok_or(GeometryError::Domain(DomainError::NotPositiveDefinite))
    }

    fn spray(&self, p: &TMPoint) -> Result<Vec<f64>, GeometryError> {
        let n = self.n;
        let g_inv = self.inverse(&self.metric(p)?)?;
        let grad = self.energy_gradient(p)?;
        let ey = |q: &TMPoint| self.fiber_gradient(q);
        let mut w: Vec<f64> = grad[..n].iter().map(|v| -v).collect();
        for k in 0..n {
            let mixed = partial(&ey, p, k, ENERGY_STEP, 2)?;
            for l in 0..n {
                w[l] += p.y[k] * mixed[l];
            }
        }
        Ok((0..n).map(|i| 0.25 * (0..n).map(|l| g_inv[i * n + l] * w[l]).sum::<f64>()).collect())
    }

    fn nonlinear(&self, p: &TMPoint) -> Result<Vec<f64>, GeometryError> {
        let n = self.n;
        let s = |q: &TMPoint| self.spray(q);
        let mut out = vec![0.0; n * n];
        for j in 0..n {
            let col = partial(&s, p, n + j, CONNECTION_STEP, 2)?;
            for i in 0..n {
                out[i * n + j] = col[i];
            }
        }
        Ok(out)
    }

    /// `δ_k f` for every `k`, stored `[k][component]`.
    fn deltas(&self, f: &Field<'_>, p: &TMPoint, nl: &[f64], h: f64, levels: usize) -> Result<Vec<Vec<f64>>, GeometryError> {
        let n = self.n;
        let dy = (0..n).map(|r| partial(f, p, n + r, h, levels)).collect::<Result<Vec<_>, _>>()?;
        (0..n)
            .map(|k| {
                let mut d = partial(f, p, k, h, levels)?;
                for (r, col) in dy.iter().enumerate() {
                    let c = nl[r * n + k];
                    d.iter_mut().zip(col).for_each(|(v, w)| *v -= c * w);
                }
                Ok(d)
            })
            .collect()
    }

    fn gamma(&self, p: &TMPoint) -> Result<Vec<f64>, GeometryError> {
        let n = self.n;
        let g = self.metric(p)?;
        let g_inv = self.inverse(&g)?;
        let nl = self.nonlinear(p)?;
        let gf = |q: &TMPoint| self.metric(q);
        let dg = self.deltas(&gf, p, &nl, CONNECTION_STEP, 2)?;
        let mut out = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out[(i * n + j) * n + k] = (0..n)
                        .map(|r| 0.5 * g_inv[i * n + r] * (dg[j][r * n + k] + dg[k][j * n + r] - dg[r][j * n + k]))
                        .sum();
                }
            }
        }
        Ok(out)
    }

    fn values(&self, p: &TMPoint) -> Result<FdValues, GeometryError> {
        let n = self.n;
        let g = self.metric(p)?;
        let g_inv = self.inverse(&g)?;
        let spray = self.spray(p)?;
        let nl = self.nonlinear(p)?;
        let gamma = self.gamma(p)?;

        let gf = |q: &TMPoint| self.metric(q);
        let dyg = (0..n).map(|r| partial(&gf, p, n + r, CONNECTION_STEP, 2)).collect::<Result<Vec<_>, _>>()?;
        // C^i_jr = g^{is} ½ ∂g_sj/∂y^r
        let cartan_up = |i: usize, j: usize, r: usize| (0..n).map(|s| 0.5 * g_inv[i * n + s] * dyg[r][s * n + j]).sum::<f64>();
        let nf = |q: &TMPoint| self.nonlinear(q);
        let dn = self.deltas(&nf, p, &nl, CURVATURE_STEP, 3)?;
        let rhat = |i: usize, k: usize, l: usize| dn[l][i * n + k] - dn[k][i * n + l];
        let gmf = |q: &TMPoint| self.gamma(q);
        let dgam = self.deltas(&gmf, p, &nl, CURVATURE_STEP, 3)?;
        let gm = |i: usize, j: usize, k: usize| gamma[(i * n + j) * n + k];
        let mut curvature = vec![0.0; n.pow(4)];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = dgam[l][(i * n + j) * n + k] - dgam[k][(i * n + j) * n + l];
                        for a in 0..n {
                            acc += gm(i, a, l) * gm(a, j, k) - gm(i, a, k) * gm(a, j, l) + cartan_up(i, j, a) * rhat(a, k, l);
                        }
                        curvature[((i * n + j) * n + k) * n + l] = acc;
                    }
                }
            }
        }
        Ok(FdValues { g, spray, nonlinear: nl, gamma, curvature })
    }
}

/// Reference values of `g`, the spray, `N`, `Γ` and `R` at `p`.
pub fn fd_values(m: &FinslerMetric, p: &TMPoint) -> Result<FdValues, GeometryError> {
    m.check_point(p)?;
    Pipeline { m, n: m.dim() }.values(p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub quantity: &'static str,
    pub max_abs: f64,
    pub scale: f64,
    /// `max_abs / max(scale, 1)` with `scale` the largest jet magnitude.
    pub relative: f64,
}

fn deviation(quantity: &'static str, jet: &[f64], fd: &[f64]) -> Deviation {
    let max_abs = jet.iter().zip(fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = jet.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Deviation { quantity, max_abs, scale, relative: max_abs / scale.max(1.0) }
}

/// Deviations of the jet pipeline from the finite-difference one at a point.
pub fn compare_bundle(bundle: &CurvatureBundle, fd: &FdValues) -> Vec<Deviation> {
    vec![
        deviation("g", bundle.g.data(), &fd.g),
        deviation("spray", &bundle.spray, &fd.spray),
        deviation("nonlinear", bundle.nonlinear.data(), &fd.nonlinear),
        deviation("gamma", bundle.gamma.data(), &fd.gamma),
        deviation("curvature", bundle.curvature.data(), &fd.curvature),
    ]
}

/// Runs both pipelines at `p` and compares them. `depth` may not be
/// [`Depth::Second`]: differencing second derivatives of `R` is too noisy to
/// be a useful reference.
pub fn cross_check(m: &FinslerMetric, p: &TMPoint, depth: Depth, order: usize) -> Result<Vec<Deviation>, GeometryError> {
    if depth == Depth::Second {
        return Err(GeometryError::Shape("finite-difference reference supports depth base or first".into()));
    }
    let bundle = curvature_with_order(m, p, depth, order)?;
    Ok(compare_bundle(&bundle, &fd_values(m, p)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{build, builtin};

    #[test]
    fn richardson_is_accurate() {
        let f = |q: &TMPoint| Ok(vec![q.x[0].sin() * q.y[0].exp()]);
        let p = TMPoint::new(vec![0.3], vec![0.2]);
        let d = partial(&f, &p, 0, 0.1, 3).unwrap()[0];
        assert!((d - 0.3f64.cos() * 0.2f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn sphere_agrees() {
        let m = build(&builtin("constant_curvature", 3, 1.0).unwrap()).unwrap();
        let p = &m.sample_points(1, 6)[0];
        for d in cross_check(&m, p, Depth::First, 8).unwrap() {
            assert!(d.relative < 1e-5, "{d:?}");
        }
    }
}
