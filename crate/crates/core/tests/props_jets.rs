use num_rational::BigRational;
use proptest::prelude::*;

use beltrami::expr::{parse, BinOp, Bindings, Expr, Func};
use beltrami::jets::{compose3, Series, Vars};

/// Expression trees over `x1..x3`, small integers and the parameters `a, b`.
fn expr_tree(params: bool) -> impl Strategy<Value = Expr> {
    let names: &'static [&'static str] = if params { &["a", "b"] } else { &[] };
    let leaf = prop_oneof![
        (0usize..3).prop_map(Expr::var),
        (-4i64..=4).prop_map(Expr::int),
        (1i64..=5, 2i64..=7).prop_map(|(n, d)| Expr::Num(BigRational::new(n.into(), d.into()))),
        (0usize..3, 0usize..2).prop_map(move |(i, j)| names.get(j).map_or(Expr::var(i), |s| Expr::param(s))),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(BinOp::Add, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(BinOp::Sub, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(BinOp::Mul, a, b)),
            inner.clone().prop_map(|a| -a),
            (inner.clone(), 0u32..4).prop_map(|(a, n)| a.pow(n)),
            inner.clone().prop_map(|a| Expr::call(Func::Sin, a)),
            inner.clone().prop_map(|a| Expr::call(Func::Cos, a)),
            // Denominators bounded away from zero.
            (inner.clone(), inner).prop_map(|(a, b)| Expr::binary(BinOp::Div, a, Expr::call(Func::Exp, Expr::call(Func::Sin, b)))),
        ]
    })
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-0.8f64..0.8)
}

fn small_rational() -> impl Strategy<Value = BigRational> {
    (-9i64..=9, 1i64..=6).prop_map(|(n, d)| BigRational::new(n.into(), d.into()))
}

fn exact_series(order: usize) -> impl Strategy<Value = Series<BigRational>> {
    let n = (order + 1) * (order + 2) * (order + 3) / 6;
    prop::collection::vec(small_rational(), n).prop_map(move |c| {
        let v = Vars::cartesian();
        let mut s = Series::zero(v.clone(), order);
        let exps: Vec<Vec<u16>> = (0..s.layout().len()).map(|i| s.layout().exponents(i).to_vec()).collect();
        for (e, q) in exps.iter().zip(c) {
            s.set_coeff(e, q);
        }
        s
    })
}

/// Random double series in `(t, xi1, xi2)` with constant term 1.
fn unit_series(order: usize) -> impl Strategy<Value = Series<f64>> {
    let n = (order + 1) * (order + 2) * (order + 3) / 6;
    prop::collection::vec(-0.5f64..0.5, n).prop_map(move |c| {
        let mut s = Series::zero(Vars::txi(), order);
        let exps: Vec<Vec<u16>> = (0..s.layout().len()).map(|i| s.layout().exponents(i).to_vec()).collect();
        for (e, q) in exps.iter().zip(c) {
            s.set_coeff(e, q);
        }
        s.set_coeff(&[0, 0, 0], 1.0);
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn print_parse_round_trip(e in expr_tree(true)) {
        let once = parse(&e.to_string()).unwrap();
        let twice = parse(&once.to_string()).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn degree_one_jet_matches_extrapolated_differences(e in expr_tree(false), p in point()) {
        let b = Bindings::new();
        let Ok(jet) = e.jet(&b, p, 1) else { return Ok(()) };
        let central = |i: usize, h: f64| {
            let (mut lo, mut hi) = (p, p);
            lo[i] -= h;
            hi[i] += h;
            (e.eval(&b, hi).unwrap() - e.eval(&b, lo).unwrap()) / (2.0 * h)
        };
        let h = 1e-4;
        for i in 0..3 {
            // Richardson extrapolation cancels the h^2 term.
            let fd = (4.0 * central(i, h / 2.0) - central(i, h)) / 3.0;
            let mut exps = [0u16; 3];
            exps[i] = 1;
            let d = jet.series.coeff(&exps);
            prop_assert!((d - fd).abs() <= 1e-6 * d.abs().max(1.0), "d{} = {d} vs fd {fd} for {e}", i + 1);
        }
    }

    #[test]
    fn substitution_commutes_with_evaluation(e in expr_tree(true), a in small_rational(), bb in small_rational(), p in point()) {
        let b = Bindings::new().with("a", a).with("b", bb);
        let bound = e.eval(&b, p);
        let substituted = e.substitute(&b).eval(&Bindings::new(), p);
        match (bound, substituted) {
            (Ok(x), Ok(y)) => prop_assert!(x == y || (x.is_nan() && y.is_nan()), "{x} vs {y}"),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{x:?} vs {y:?}"),
        }
    }

    #[test]
    fn ring_axioms_are_exact(x in exact_series(3), y in exact_series(3), z in exact_series(3)) {
        prop_assert_eq!(&(&x * &y) * &z, &x * &(&y * &z));
        prop_assert_eq!(&x * &(&y + &z), &(&x * &y) + &(&x * &z));
        prop_assert_eq!(&x * &y, &y * &x);
        prop_assert_eq!(&(&x + &y) + &z, &x + &(&y + &z));
    }

    #[test]
    fn leibniz_rule_is_exact(x in exact_series(4), y in exact_series(4), var in 0usize..3) {
        let k = x.order() - 1;
        let lhs = (&x * &y).derive(var);
        let rhs = &(&x.derive(var) * &y.truncate(k)) + &(&x.truncate(k) * &y.derive(var));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn reciprocal_and_sqrt_invert(s in unit_series(5)) {
        let one = Series::constant(Vars::txi(), 5, 1.0);
        let r = s.reciprocal().unwrap();
        prop_assert!((&(&s * &r) - &one).max_abs() < 1e-10 * r.max_abs().max(1.0));
        let q = s.sqrt().unwrap();
        prop_assert!((&(&q * &q) - &s).max_abs() < 1e-10 * q.max_abs().max(1.0).powi(2));
    }

    #[test]
    fn composition_error_has_the_truncation_order(
        e in expr_tree(false),
        p in point(),
        lin in prop::array::uniform3(prop::array::uniform3(-1.0f64..1.0)),
        quad in prop::array::uniform3(-1.0f64..1.0),
        dir in prop::array::uniform3(-1.0f64..1.0),
    ) {
        const K: usize = 3;
        let b = Bindings::new();
        let Ok(jet) = e.jet(&b, p, K) else { return Ok(()) };
        let v = Vars::txi();
        let x: [Series<f64>; 3] = [0, 1, 2].map(|i| {
            let mut s = Series::constant(v.clone(), K, p[i]);
            for (j, c) in lin[i].iter().enumerate() {
                s.set_coeff(&[j == 0, j == 1, j == 2].map(u16::from), *c);
            }
            s.set_coeff(&[1, 1, 0], quad[i]);
            s
        });
        let composed = compose3(&jet, &x).unwrap();
        let err = |eps: f64| {
            let a = dir.map(|d| d * eps);
            let world = [0, 1, 2].map(|i| x[i].eval(&a));
            (composed.eval(&a) - e.eval(&b, world).unwrap()).abs()
        };
        let (coarse, fine) = (err(0.02), err(0.01));
        // Halving the argument shrinks an O(eps^(K+1)) error by 16; allow 4 for
        // higher-order terms, and a rounding floor.
        prop_assert!(fine <= coarse / 4.0 + 1e-12 * composed.max_abs().max(1.0), "{coarse:e} -> {fine:e} for {e}");
    }
}
