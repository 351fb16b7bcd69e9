//! Shared test fixtures: a classical Levi-Civita computation for diagonal
//! metrics `a_i = exp(q_i(x))` with quadratic `q_i`.
#![allow(dead_code, clippy::needless_range_loop)]

use cartan_core::dsl::{Expr, Func};
use cartan_core::metric::FinslerMetric;
use cartan_core::zoo::{build, MetricFamily, MetricSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const N: usize = 3;

/// `q_i(x) = c_i + b_i·x + ½ xᵀ H_i x`.
#[derive(Debug, Clone)]
pub struct DiagonalExp {
    pub c: [f64; N],
    pub b: [[f64; N]; N],
    pub h: [[[f64; N]; N]; N],
}

pub struct LeviCivita {
    pub g: Vec<f64>,
    /// `[i][j][k]`
    pub gamma: Vec<f64>,
    /// `[i][j][k][l]`, same convention as the engine's curvature.
    pub riemann: Vec<f64>,
    pub ric: Vec<f64>,
    pub r: f64,
}

impl DiagonalExp {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = |s: f64| rng.random_range(-s..s);
        let c = [u(0.3), u(0.3), u(0.3)];
        let b = std::array::from_fn(|_| [u(0.6), u(0.6), u(0.6)]);
        let mut h = [[[0.0; N]; N]; N];
        for hi in h.iter_mut() {
            for k in 0..N {
                for l in k..N {
                    let v = u(0.8);
                    hi[k][l] = v;
                    hi[l][k] = v;
                }
            }
        }
        DiagonalExp { c, b, h }
    }

    fn q_expr(&self, i: usize) -> Expr {
        let mut terms = vec![Expr::num(self.c[i])];
        for k in 0..N {
            terms.push(Expr::mul(Expr::num(self.b[i][k]), Expr::X(k)));
            for l in 0..N {
                terms.push(Expr::mul(Expr::num(0.5 * self.h[i][k][l]), Expr::mul(Expr::X(k), Expr::X(l))));
            }
        }
        Expr::sum(terms)
    }

    pub fn metric(&self) -> FinslerMetric {
        let a = (0..N).map(|i| Expr::call(Func::Exp, self.q_expr(i))).collect();
        build(&MetricSpec::new("diagonal_exp", MetricFamily::RiemannianDiag { a })).unwrap()
    }

    fn q(&self, i: usize, x: &[f64]) -> f64 {
        let mut v = self.c[i];
        for k in 0..N {
            v += self.b[i][k] * x[k];
            for l in 0..N {
                v += 0.5 * self.h[i][k][l] * x[k] * x[l];
            }
        }
        v
    }

    fn dq(&self, i: usize, k: usize, x: &[f64]) -> f64 {
        self.b[i][k] + (0..N).map(|l| self.h[i][k][l] * x[l]).sum::<f64>()
    }

    /// Christoffel symbols, curvature and traces by the classical formulas.
    pub fn levi_civita(&self, x: &[f64]) -> LeviCivita {
        let a: Vec<f64> = (0..N).map(|i| self.q(i, x).exp()).collect();
        let da = |i: usize, k: usize| a[i] * self.dq(i, k, x);
        let dda = |i: usize, k: usize, l: usize| a[i] * (self.dq(i, k, x) * self.dq(i, l, x) + self.h[i][k][l]);
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let gamma_at = |i: usize, j: usize, k: usize| 0.5 / a[i] * (d(i, k) * da(i, j) + d(i, j) * da(i, k) - d(j, k) * da(j, i));
        let dgamma = |l: usize, i: usize, j: usize, k: usize| {
            -self.dq(i, l, x) * gamma_at(i, j, k) + 0.5 / a[i] * (d(i, k) * dda(i, j, l) + d(i, j) * dda(i, k, l) - d(j, k) * dda(j, i, l))
        };
        let mut g = vec![0.0; N * N];
        for i in 0..N {
            g[i * N + i] = a[i];
        }
        let mut gamma = vec![0.0; N * N * N];
        for i in 0..N {
            for j in 0..N {
                for k in 0..N {
                    gamma[(i * N + j) * N + k] = gamma_at(i, j, k);
                }
            }
        }
        let mut riemann = vec![0.0; N.pow(4)];
        for i in 0..N {
            for j in 0..N {
                for k in 0..N {
                    for l in 0..N {
                        let mut v = dgamma(l, i, j, k) - dgamma(k, i, j, l);
                        for m in 0..N {
                            v += gamma_at(i, m, l) * gamma_at(m, j, k) - gamma_at(i, m, k) * gamma_at(m, j, l);
                        }
                        riemann[((i * N + j) * N + k) * N + l] = v;
                    }
                }
            }
        }
        let mut ric = vec![0.0; N * N];
        for j in 0..N {
            for k in 0..N {
                ric[j * N + k] = (0..N).map(|l| riemann[((l * N + j) * N + k) * N + l]).sum();
            }
        }
        let r = (0..N).map(|j| ric[j * N + j] / a[j]).sum();
        LeviCivita { g, gamma, riemann, ric, r }
    }
}

/// `max|a - b| / max(max|b|, 1)`.
pub fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    num / b.iter().map(|v| v.abs()).fold(1.0, f64::max)
}

/// Token soup for parser fuzzing.
const ALPHABET: &[&str] = &[
    "x1", "x2", "y1", "y3", "F", "F2", "=", "+", "-", "*", "/", "^", "(", ")", "sqrt", "exp", "log", "sin", "cos", "1", "0.5",
    "2e3", "1e", ".", " ", "\n", "#", ";", ",", "family", "n", "kappa", "@", "x", "y0", "ÿ", "99999999999999999999",
];

pub fn random_source(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(0..40);
    (0..len).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect()
}

/// Random expression trees over `x1..x4`, `y1..y4` and all functions.
pub fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0usize..4).prop_map(Expr::X),
        (0usize..4).prop_map(Expr::Y),
        prop_oneof![0.0f64..10.0, Just(1e-7), Just(2.5e12), (0u32..100).prop_map(f64::from)].prop_map(Expr::Num),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        let funcs = prop::sample::select(Func::ALL.to_vec());
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::div(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::pow(a, b)),
            (funcs, inner).prop_map(|(f, a)| Expr::call(f, a)),
        ]
    })
}
