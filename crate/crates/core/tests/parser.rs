mod common;

use cartan_core::dsl::{parse_expr, unparse};
use cartan_core::zoo::{parse_metric, parse_metric_file};
use common::{expr_strategy, random_source};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn fuzzed_sources_never_panic() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF022);
    let mut accepted = 0;
    for _ in 0..10_000 {
        let src = random_source(&mut rng);
        if parse_metric(&src).is_ok() {
            accepted += 1;
        }
        let _ = parse_metric_file(&src);
    }
    assert!(accepted < 10_000);
}

#[test]
fn deeply_nested_input_is_rejected() {
    let src = format!("{}x1{}", "(".repeat(5000), ")".repeat(5000));
    assert!(parse_expr(&src).is_err());
    let src = "-".repeat(5000) + "x1";
    assert!(parse_expr(&src).is_err());
}

#[test]
fn error_positions_point_at_the_problem() {
    let e = parse_expr("x1 + * y1").unwrap_err();
    assert_eq!((e.line, e.column), (1, 6));
    let e = parse_metric("F = sqrt(y1^2 + y2^2").unwrap_err();
    assert_eq!(e.offset, 20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn unparse_round_trips(e in expr_strategy()) {
        let text = unparse(&e);
        let back = parse_expr(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(back, e, "{}", text);
    }

    #[test]
    fn arbitrary_text_never_panics(s in "\\PC{0,60}") {
        let _ = parse_metric(&s);
        let _ = parse_metric_file(&s);
    }
}
