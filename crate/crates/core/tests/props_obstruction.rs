mod common;

use num_rational::BigRational;
use proptest::prelude::*;

use beltrami::chart::{FrameChoice, Orders};
use beltrami::expr::{Bindings, Expr};
use beltrami::jets::{Series, Vars};
use beltrami::obstruction::{
    det4, dt_beta, dt_beta_via_constraints, obstruction_p, script_tn, tensor_hierarchy, tensor_t, ConstraintVector4,
    ObstructionOptions,
};

const FIRST_CONSTRAINT_TOL: f64 = 1e-10;
const TWO_PATH_TOL: f64 = 1e-9;
const ORDER_STABILITY_REL_TOL: f64 = 1e-9;
const AFFINE_TOL: f64 = 1e-10;
const MAX_CHART_SCALE: f64 = 1e4;

fn exact_vector(order: usize) -> impl Strategy<Value = ConstraintVector4<BigRational>> {
    let n = (order + 1) * (order + 2) / 2;
    prop::collection::vec((-5i64..=5, 1i64..=3), 4 * n).prop_map(move |c| {
        let mut comps = Vec::with_capacity(4);
        for chunk in c.chunks(n) {
            let mut s = Series::zero(Vars::xi(), order);
            for (i, &(num, den)) in chunk.iter().enumerate() {
                let e = s.layout().exponents(i).to_vec();
                s.set_coeff(&e, BigRational::new(num.into(), den.into()));
            }
            comps.push(s);
        }
        ConstraintVector4::new(comps.try_into().unwrap()).unwrap()
    })
}

/// Polynomial potential in `(t, xi1, xi2)` through degree 4.
fn potential(order: usize) -> impl Strategy<Value = Series<f64>> {
    prop::collection::vec(-1.0f64..1.0, 35).prop_map(move |c| {
        let mut s = Series::zero(Vars::txi(), order);
        let n = s.layout().count_upto(4);
        for (i, v) in c.into_iter().take(n).enumerate() {
            let e = s.layout().exponents(i).to_vec();
            s.set_coeff(&e, v);
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn first_constraint_vanishes((f, p) in common::conditioned_case()) {
        let chart = common::chart_at(&f, p, Orders::new(6, 4));
        prop_assume!(common::chart_scale(&chart) <= MAX_CHART_SCALE);
        let t = tensor_t(&chart);
        prop_assert!(script_tn(&t, &t).unwrap().max_abs() < FIRST_CONSTRAINT_TOL);
    }

    #[test]
    fn column_swaps_flip_the_sign_exactly(
        v in prop::array::uniform4(exact_vector(2)),
        (i, j) in (0usize..4, 0usize..4).prop_filter("distinct columns", |(i, j)| i != j),
    ) {
        let p = det4([&v[0], &v[1], &v[2], &v[3]]).unwrap();
        let mut w = v.clone();
        w.swap(i, j);
        let q = det4([&w[0], &w[1], &w[2], &w[3]]).unwrap();
        prop_assert_eq!(-&q, p);
    }

    #[test]
    fn constraint_path_matches_direct_derivative((f, p) in common::conditioned_case(), psi in potential(6)) {
        let chart = common::chart_at(&f, p, Orders::new(6, 4));
        prop_assume!(common::chart_scale(&chart) <= MAX_CHART_SCALE);
        let t = tensor_t(&chart);
        let hier = tensor_hierarchy(&t, 3).unwrap();
        for n in [2usize, 3] {
            let tn = &hier[n - 1];
            let via = dt_beta_via_constraints(&t, tn, &psi).unwrap();
            let direct = dt_beta(tn, &psi).unwrap().truncate(via.order());
            let diff = (&via - &direct).max_abs();
            prop_assert!(diff < TWO_PATH_TOL, "n = {n}: {diff:e}");
        }
    }

    #[test]
    fn affine_functions_have_no_obstruction(
        level in 0.5f64..3.0,
        a in prop::array::uniform3(-2.0f64..2.0),
        p in prop::array::uniform3(-0.5f64..0.5),
    ) {
        prop_assume!(a.iter().map(|x| x * x).sum::<f64>() > 0.25);
        let f = Expr::from_f64(level)
            + Expr::from_f64(a[0]) * Expr::var(0)
            + Expr::from_f64(a[1]) * Expr::var(1)
            + Expr::from_f64(a[2]) * Expr::var(2);
        prop_assume!(f.eval(&Bindings::new(), p).unwrap().abs() > 0.5);
        let poly = obstruction_p::<f64>(&f, &Bindings::new(), &p, 4, ObstructionOptions::default()).unwrap();
        prop_assert!(poly.max_abs() < AFFINE_TOL, "{}", poly.max_abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn extra_orders_do_not_change_p((f, p) in common::conditioned_case()) {
        let m = 2;
        let base = Orders::new(6, m);
        let more = Orders::new(8, m + 2);
        let opts = |orders| ObstructionOptions { orders: Some(orders), frame: FrameChoice::Auto };
        let lo = obstruction_p::<f64>(&f, &Bindings::new(), &p, m, opts(base)).unwrap();
        let hi = obstruction_p::<f64>(&f, &Bindings::new(), &p, m, opts(more)).unwrap();
        let scale = lo.max_abs().max(hi.max_abs());
        for mi in [[0u16, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]] {
            let (x, y) = (lo.coeff(mi), hi.coeff(mi));
            prop_assert!((x - y).abs() <= ORDER_STABILITY_REL_TOL * scale, "{mi:?}: {x} vs {y}");
        }
    }
}
