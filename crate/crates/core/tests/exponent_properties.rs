use apriori::exponents::{check_identities, derive_context, parse_rational, ExponentError};
use apriori::Rational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// Rational strictly inside `(1, N/(N-2))`, parametrized by `k / (den + 1)`
/// of the interval length with `0 < k <= den`.
fn interior_p(dim: u32, k: i64, den: i64) -> Rational {
    let n = dim as i64;
    let width = r(n, n - 2) - Rational::one();
    Rational::one() + width * r(k, den + 1)
}

fn p_strategy() -> impl Strategy<Value = (u32, Rational)> {
    (3u32..=10, 1i64..=40)
        .prop_flat_map(|(dim, den)| (Just(dim), 1..=den, Just(den)))
        .prop_map(|(dim, k, den)| (dim, interior_p(dim, k, den)))
}

proptest! {
    #[test]
    fn identities_hold_exactly((dim, p) in p_strategy()) {
        let ctx = derive_context(dim, p, None).unwrap();
        for verdict in check_identities(&ctx) {
            prop_assert!(verdict.holds, "{} failed: {} vs {}", verdict.identity, verdict.lhs, verdict.rhs);
        }
    }

    #[test]
    fn closed_forms_match((dim, p) in p_strategy()) {
        let n = Rational::from_integer((dim as i64).into());
        let two = Rational::from_integer(2.into());
        let ctx = derive_context(dim, p.clone(), None).unwrap();
        prop_assert_eq!(&ctx.a, &(two.clone() / (n.clone() - p.clone() * (n.clone() - two.clone()))));
        let two_star = two.clone() * n.clone() / (n.clone() - two.clone());
        let gap = n.clone() / (n.clone() - two) - p;
        prop_assert_eq!(&ctx.a_hat1, &(two_star.clone() / ctx.m.clone() / gap.clone()));
        prop_assert_eq!(&ctx.a_hat2, &((two_star.clone() / n - two_star / ctx.m.clone()) / gap));
    }

    #[test]
    fn split_exponents_dominate_raw_powers((dim, p) in p_strategy()) {
        let ctx = derive_context(dim, p, None).unwrap();
        prop_assert_eq!(ctx.exponent_comparisons(), (true, true));
        prop_assert!(ctx.a_hat1 > Rational::zero() && ctx.a_hat2 > Rational::zero());
        prop_assert!(ctx.sigma > Rational::zero() && ctx.sigma < Rational::one());
    }

    #[test]
    fn main_exponent_increases_with_p(dim in 3u32..=10, k in 1i64..30) {
        let lo = derive_context(dim, interior_p(dim, k, 30), None).unwrap();
        let hi = derive_context(dim, interior_p(dim, k + 1, 30), None).unwrap();
        prop_assert!(hi.a > lo.a);
    }

    #[test]
    fn larger_q_keeps_identities((dim, p) in p_strategy(), extra in 1i64..20) {
        let base = derive_context(dim, p.clone(), None).unwrap();
        let q = base.q.clone() + r(extra, 3);
        let ctx = derive_context(dim, p, Some(q)).unwrap();
        prop_assert!(check_identities(&ctx).iter().all(|v| v.holds));
        prop_assert_eq!(&ctx.a_hat1 + &ctx.a_hat2, base.a);
    }

    #[test]
    fn float_context_tracks_exact((dim, p) in p_strategy()) {
        let exact = derive_context(dim, p, None).unwrap();
        let approx = exact.to_f64();
        let float = derive_context(dim, approx.p, None).unwrap();
        prop_assert!((float.a - approx.a).abs() <= 1e-9 * approx.a);
        prop_assert!((float.sigma - approx.sigma).abs() <= 1e-12);
        // the gap N/(N-2) - p cancels, so rounding grows like p / gap
        let gap = dim as f64 / (dim as f64 - 2.0) - approx.p;
        let tol = 64.0 * f64::EPSILON * (1.0 + approx.p / gap);
        for v in check_identities(&float) {
            prop_assert!((v.lhs - v.rhs).abs() <= tol * v.rhs.abs().max(1.0), "{}", v.identity);
        }
    }
}

#[test]
fn endpoints_are_rejected() {
    for dim in 3u32..=10 {
        let n = dim as i64;
        assert!(matches!(
            derive_context(dim, Rational::one(), None),
            Err(ExponentError::PowerOutOfRange { .. })
        ));
        assert!(matches!(
            derive_context(dim, r(n, n - 2), None),
            Err(ExponentError::PowerOutOfRange { .. })
        ));
    }
    let ctx = derive_context(3, r(2, 1), None).unwrap();
    assert!(matches!(
        derive_context(3, r(2, 1), Some(ctx.q - r(1, 1))),
        Err(ExponentError::IndexOutOfRange { .. })
    ));
}

#[test]
fn parsed_inputs_agree() {
    assert_eq!(parse_rational("3/2").unwrap(), r(3, 2));
    assert_eq!(parse_rational("1.5").unwrap(), r(3, 2));
    let ctx = derive_context(3, parse_rational("2").unwrap(), None).unwrap();
    assert_eq!((ctx.a, ctx.m, ctx.sigma), (r(2, 1), r(9, 2), r(3, 5)));
}
