use fractal_sumset::angle::{classify_angle, predict_sumset, star, AngleKind, ThetaSpec};
use proptest::prelude::*;

#[test]
fn star_is_four_adic_invariant() {
    for m in 1..=10_000u64 {
        assert_eq!(star(4 * m).unwrap(), star(m).unwrap(), "m={m}");
    }
}

#[test]
fn star_never_zero() {
    for m in 1..=1_000_000u64 {
        assert_ne!(star(m).unwrap(), 0, "m={m}");
    }
}

#[test]
fn named_values() {
    assert_eq!(star(6).unwrap(), 2);
    assert_eq!(star(112).unwrap(), 3);
}

proptest! {
    #[test]
    fn reduction_invariance(p in 1i64..5000, q in 1i64..5000, k in 1i64..200) {
        prop_assert_eq!(classify_angle(p, q).unwrap(), classify_angle(k * p, k * q).unwrap());
    }

    #[test]
    fn partition(p in 1i64..100_000, q in 1i64..100_000) {
        let c = classify_angle(p, q).unwrap();
        let small = c.p_star % 2 == 1 && c.q_star % 2 == 1;
        prop_assert_eq!(c.kind == AngleKind::Small, small);
        prop_assert_eq!(c.kind == AngleKind::Big, !small);
        let pred = predict_sumset(ThetaSpec::Rational { p, q }).unwrap();
        prop_assert_eq!(pred.class, c.kind);
        prop_assert!(pred.dim_below_two != pred.dim_two);
    }
}
