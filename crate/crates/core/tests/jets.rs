use std::collections::BTreeMap;

use cartan_core::dsl::{Expr, Func};
use cartan_core::fd::partial;
use cartan_core::jet::{extract_partial, jet_apply, jet_variable, Jet, JetConfig, JetOp};
use cartan_core::metric::TMPoint;
use proptest::prelude::*;

type Poly = BTreeMap<Vec<usize>, i64>;

fn poly_strategy(vars: usize, max_degree: usize) -> impl Strategy<Value = Poly> {
    prop::collection::vec((prop::collection::vec(0..=max_degree, vars), -5i64..=5), 1..8).prop_map(move |terms| {
        let mut p = Poly::new();
        for (mut m, c) in terms {
            while m.iter().sum::<usize>() > max_degree {
                let i = m.iter().position(|&e| e > 0).unwrap();
                m[i] -= 1;
            }
            *p.entry(m).or_insert(0) += c;
        }
        p
    })
}

fn poly_jet(p: &Poly, point: &[f64], config: JetConfig) -> Jet {
    let vars: Vec<Jet> = (0..point.len()).map(|i| jet_variable(point, i, config).unwrap()).collect();
    let mut acc = Jet::constant(0.0, config);
    for (m, &c) in p {
        let mut term = Jet::constant(c as f64, config);
        for (v, &e) in vars.iter().zip(m) {
            if e > 0 {
                term = jet_apply(JetOp::Mul, &term, Some(&jet_apply(JetOp::PowInt(e as i32), v, None).unwrap())).unwrap();
            }
        }
        acc = jet_apply(JetOp::Add, &acc, Some(&term)).unwrap();
    }
    acc
}

fn falling(e: usize, k: usize) -> f64 {
    (0..k).map(|j| (e - j) as f64).product()
}

/// `∂^α p` at `point` by the power rule, term by term.
fn poly_partial(p: &Poly, point: &[f64], alpha: &[usize]) -> f64 {
    p.iter()
        .filter(|(m, _)| m.iter().zip(alpha).all(|(e, a)| e >= a))
        .map(|(m, &c)| {
            c as f64 * m.iter().zip(alpha).zip(point).map(|((&e, &a), &x)| falling(e, a) * x.powi((e - a) as i32)).product::<f64>()
        })
        .sum()
}

fn smooth_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0usize..2).prop_map(Expr::X),
        Just(Expr::Y(0)),
        (0.1f64..2.0).prop_map(Expr::Num),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            inner.clone().prop_map(|a| Expr::call(Func::Sqrt, Expr::add(Expr::Num(1.0), Expr::square(a)))),
            inner.clone().prop_map(|a| Expr::call(Func::Exp, Expr::mul(Expr::Num(0.5), a))),
            inner.prop_map(|a| Expr::call(Func::Sin, a)),
        ]
    })
}

fn expr_jet(e: &Expr, point: &[f64], order: usize) -> Jet {
    let config = JetConfig::new(3, order).unwrap();
    let vars: Vec<Jet> = (0..3).map(|i| jet_variable(point, i, config).unwrap()).collect();
    e.eval(&vars[..2], &vars[2..], &vars[0]).unwrap()
}

/// Nested central differences in the listed variables.
fn fd_partial(e: &Expr, point: &[f64], vars: &[usize]) -> f64 {
    fn go(e: &Expr, p: &TMPoint, vars: &[usize]) -> Result<Vec<f64>, cartan_core::geometry::GeometryError> {
        match vars.split_first() {
            None => Ok(vec![e.eval(&p.x, &p.y, &0.0).unwrap()]),
            Some((&v, rest)) => {
                let f = |q: &TMPoint| go(e, q, rest);
                // Chart variables of TMPoint with n = 2: 0, 1 are x, 2 is y1.
                partial(&f, p, v, 0.05, 4)
            }
        }
    }
    let p = TMPoint::new(point[..2].to_vec(), vec![point[2], 0.0]);
    go(e, &p, vars).unwrap()[0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polynomial_partials_are_exact(
        p in poly_strategy(3, 6),
        point in prop::collection::vec(-1.5f64..1.5, 3),
        alpha in prop::collection::vec(0usize..=2, 3),
    ) {
        let config = JetConfig::new(3, 8).unwrap();
        let jet = poly_jet(&p, &point, config);
        let got = extract_partial(&jet, &alpha).unwrap();
        let want = poly_partial(&p, &point, &alpha);
        let scale = p.values().map(|c| c.abs() as f64).sum::<f64>() * 1e3;
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(scale), "{got} vs {want}");
    }

    #[test]
    fn smooth_partials_match_finite_differences(
        e in smooth_expr(),
        point in prop::collection::vec(-0.8f64..0.8, 3),
        vars in prop::collection::vec(0usize..3, 1..=3),
    ) {
        let jet = expr_jet(&e, &point, 4);
        let mut alpha = vec![0; 3];
        for &v in &vars {
            alpha[v] += 1;
        }
        let got = extract_partial(&jet, &alpha).unwrap();
        // Point layout for the oracle is (x1, x2, y1, y2) with y2 unused.
        let chart: Vec<usize> = vars.iter().map(|&v| if v < 2 { v } else { 2 }).collect();
        let want = fd_partial(&e, &point, &chart);
        prop_assert!((got - want).abs() <= 1e-5 * want.abs().max(1.0), "{e}: {got} vs {want}");
    }

    #[test]
    fn leibniz_rule(
        a in poly_strategy(2, 4),
        b in poly_strategy(2, 4),
        point in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let config = JetConfig::new(2, 5).unwrap();
        let (ja, jb) = (poly_jet(&a, &point, config), poly_jet(&b, &point, config));
        let prod = jet_apply(JetOp::Mul, &ja, Some(&jb)).unwrap();
        for i in 0..2 {
            let mut e = vec![0; 2];
            e[i] = 1;
            let lhs = extract_partial(&prod, &e).unwrap();
            let rhs = ja.value() * extract_partial(&jb, &e).unwrap() + jb.value() * extract_partial(&ja, &e).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn results_share_configuration(x in -1.0f64..1.0) {
        let config = JetConfig::new(2, 4).unwrap();
        let v = jet_variable(&[x, 0.5], 0, config).unwrap();
        for op in [JetOp::Sqrt, JetOp::Exp, JetOp::Sin, JetOp::Cos] {
            let shifted = jet_apply(JetOp::Add, &v, Some(&Jet::constant(2.0, config))).unwrap();
            prop_assert_eq!(jet_apply(op, &shifted, None).unwrap().config(), config);
        }
    }
}

#[test]
fn mismatched_configurations_are_rejected() {
    let a = jet_variable(&[1.0, 2.0], 0, JetConfig::new(2, 3).unwrap()).unwrap();
    let b = jet_variable(&[1.0, 2.0], 0, JetConfig::new(2, 4).unwrap()).unwrap();
    assert!(jet_apply(JetOp::Add, &a, Some(&b)).is_err());
    assert!(jet_apply(JetOp::Mul, &a, None).is_err());
}

#[test]
fn log_of_nonpositive_is_rejected() {
    let c = JetConfig::new(1, 3).unwrap();
    assert!(jet_apply(JetOp::Log, &Jet::constant(0.0, c), None).is_err());
    assert!(jet_apply(JetOp::Sqrt, &Jet::constant(-1.0, c), None).is_err());
}
