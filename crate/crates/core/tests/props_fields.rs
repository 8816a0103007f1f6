use proptest::prelude::*;

use beltrami::expr::{Bindings, Expr, VectorExpr};
use beltrami::fields::{conformal_check, curl_div, CONFORMAL_TOL};
use beltrami::jets::Series;
use beltrami::sampling;

const DIV_CURL_TOL: f64 = 1e-10;

fn poly(d: u32) -> impl Strategy<Value = Expr> {
    prop::collection::vec(-3i64..=3, sampling::monomials(d).len()).prop_map(move |c| sampling::polynomial(d, &c))
}

/// Wraps a polynomial in a transcendental factor so fields are not polynomial.
fn field() -> impl Strategy<Value = VectorExpr> {
    prop::array::uniform3((poly(3), any::<bool>())).prop_map(|c| {
        VectorExpr(c.map(|(e, wrap)| {
            if wrap {
                e * beltrami::expr::parse("exp(x1 - x2) + sin(x3)").unwrap()
            } else {
                e
            }
        }))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn divergence_of_curl_vanishes(w in field(), p in prop::array::uniform3(-1.0f64..1.0)) {
        let b = Bindings::new();
        let jets: Vec<Series<f64>> = w.0.iter().map(|e| e.jet(&b, p, 2).unwrap().series).collect();
        let curl = [
            &jets[2].derive(1) - &jets[1].derive(2),
            &jets[0].derive(2) - &jets[2].derive(0),
            &jets[1].derive(0) - &jets[0].derive(1),
        ];
        let div = &(&curl[0].derive(0) + &curl[1].derive(1)) + &curl[2].derive(2);
        let scale = jets.iter().map(Series::max_abs).fold(1.0, f64::max);
        prop_assert!(div.max_abs() < DIV_CURL_TOL * scale);
        // The pointwise operator agrees with the jet assembly.
        let (c, _) = curl_div(&w, &b, p).unwrap();
        for i in 0..3 {
            prop_assert!((c[i] - curl[i].constant_term()).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn conformal_law_holds(q in prop::array::uniform2(poly(1)), c in 1i64..=4, seed in any::<u64>()) {
        let [q1, q2] = q;
        let f = Expr::int(c) + q1.pow(2) + q2.pow(2);
        let r = conformal_check(&f, 8, seed).unwrap();
        prop_assert!(r.max_rel_error < CONFORMAL_TOL, "{} for f = {f}", r.max_rel_error);
    }
}
