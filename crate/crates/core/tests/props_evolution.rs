use proptest::prelude::*;

use beltrami::chart::Orders;
use beltrami::evolution::{rk4_node, run, step, GridField, InitialData, RunSpec, TimePoly, PATCH_RADIUS};
use beltrami::expr::{parse, Bindings};
use beltrami::families::AFFINE_FAMILY;

type Mat2 = [[f64; 2]; 2];

const NODES: usize = 25;
/// Accepted window for the drift ratio when the spacing is halved.
const REFINEMENT_RATIO: (f64, f64) = (3.5, 4.5);
/// Accepted window for successive-difference ratios when `Δt` is halved.
const TIME_ORDER_RATIO: (f64, f64) = (12.0, 20.0);
const AFFINE_DRIFT_TOL: f64 = 1e-12;

fn mat() -> impl Strategy<Value = Mat2> {
    prop::array::uniform2(prop::array::uniform2(-2.0f64..2.0))
}

fn time_poly() -> impl Strategy<Value = TimePoly> {
    prop::collection::vec(mat(), 1..4).prop_map(|coeffs| TimePoly { coeffs })
}

fn field() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec(prop::array::uniform2(-3.0f64..3.0), NODES)
}

fn grid(beta: Vec<[f64; 2]>) -> GridField {
    let mut g = GridField::new(5, 5, 0.05, 0.05).unwrap();
    g.beta = beta;
    g
}

fn norm(b: [f64; 2]) -> f64 {
    (b[0] * b[0] + b[1] * b[1]).sqrt()
}

fn close(x: [f64; 2], y: [f64; 2], scale: f64) -> bool {
    (x[0] - y[0]).abs() <= 1e-12 * scale && (x[1] - y[1]).abs() <= 1e-12 * scale
}

fn evolve_node(tp: &TimePoly, b: [f64; 2], t_end: f64, steps: usize) -> [f64; 2] {
    let dt = t_end / steps as f64;
    (0..steps).fold(b, |b, k| rk4_node(tp, k as f64 * dt, b, dt))
}

fn initial_drift(psi: &str, n: usize, h: f64) -> f64 {
    let spec = RunSpec {
        p: [0.0; 3],
        init: psi.parse::<InitialData>().unwrap(),
        t_max: 0.0,
        dt: 0.01,
        n1: n,
        n2: n,
        h,
        orders: Orders::new(4, 4),
        patch: PATCH_RADIUS,
    };
    run(&parse("1 + x1^2 + x3").unwrap(), &Bindings::new(), &spec).unwrap().rows[0].max_drift
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn node_order_does_not_matter(
        beta in field(),
        tensors in prop::collection::vec(time_poly(), NODES),
        perm in Just((0..NODES).collect::<Vec<_>>()).prop_shuffle(),
        dt in 0.001f64..0.1,
    ) {
        let a = step(&grid(beta.clone()), &tensors, dt).unwrap();
        let pb = perm.iter().map(|&i| beta[i]).collect();
        let pt: Vec<TimePoly> = perm.iter().map(|&i| tensors[i].clone()).collect();
        let b = step(&grid(pb), &pt, dt).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(b.beta[k], a.beta[i]);
        }
    }

    #[test]
    fn steps_are_linear(
        x in field(),
        y in field(),
        (s, r) in (-2.0f64..2.0, -2.0f64..2.0),
        tensors in prop::collection::vec(time_poly(), NODES),
        dt in 0.001f64..0.1,
    ) {
        let combo = x.iter().zip(&y).map(|(a, b)| [s * a[0] + r * b[0], s * a[1] + r * b[1]]).collect();
        let sx = step(&grid(x), &tensors, dt).unwrap();
        let sy = step(&grid(y), &tensors, dt).unwrap();
        let sc = step(&grid(combo), &tensors, dt).unwrap();
        for k in 0..NODES {
            let want = [0, 1].map(|i| s * sx.beta[k][i] + r * sy.beta[k][i]);
            let scale = 1.0 + norm(sx.beta[k]) + norm(sy.beta[k]);
            prop_assert!(close(sc.beta[k], want, 10.0 * scale));
        }
    }

    /// The RK4 update is bounded by the Taylor polynomial of the exponential
    /// in `Δt · max ‖T‖` over the stage times.
    #[test]
    fn energy_is_bounded(tp in time_poly(), b in prop::array::uniform2(-3.0f64..3.0), t0 in 0.0f64..0.5, dt in 0.001f64..0.2) {
        let next = rk4_node(&tp, t0, b, dt);
        let m = [t0, t0 + dt / 2.0, t0 + dt].map(|t| tp.norm_bound(t)).into_iter().fold(0.0, f64::max);
        let bound = norm(b) * (dt * m).exp();
        prop_assert!(norm(next) <= bound * (1.0 + 1e-12) + 1e-300, "{} > {bound}", norm(next));
    }

    #[test]
    fn time_steps_converge_at_fourth_order(tp in time_poly(), b in prop::array::uniform2(-3.0f64..3.0)) {
        let y = [32usize, 64, 128].map(|n| evolve_node(&tp, b, 0.4, n));
        let d1 = norm([y[0][0] - y[1][0], y[0][1] - y[1][1]]);
        let d2 = norm([y[1][0] - y[2][0], y[1][1] - y[2][1]]);
        prop_assume!(d2 > 1e-11 * norm(y[2]).max(1.0));
        let ratio = d1 / d2;
        prop_assert!(ratio > TIME_ORDER_RATIO.0 && ratio < TIME_ORDER_RATIO.1, "ratio {ratio}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn closed_data_drift_is_second_order(a in 0.5f64..2.0, b in 0.5f64..2.0, c in 0.5f64..2.0) {
        prop_assume!((a - b).abs() > 0.3);
        let psi = format!("psi:sin({a}*xi1 + {b}*xi2) + cos({c}*xi1*xi2)");
        let coarse = initial_drift(&psi, 9, 0.025);
        // Both interiors cover the square of half-width 0.075.
        let fine = initial_drift(&psi, 15, 0.0125);
        let ratio = coarse / fine;
        prop_assert!(ratio > REFINEMENT_RATIO.0 && ratio < REFINEMENT_RATIO.1, "ratio {ratio}");
    }

    #[test]
    fn affine_exact_data_stays_closed(a in -1.0f64..2.0) {
        let spec = RunSpec {
            p: [0.0; 3],
            init: InitialData::AffineExact,
            t_max: 0.05,
            dt: 0.01,
            n1: 9,
            n2: 9,
            h: 0.025,
            orders: Orders::new(6, 6),
            patch: PATCH_RADIUS,
        };
        let b = Bindings::new().with_f64("a", a);
        let report = run(&parse(AFFINE_FAMILY).unwrap(), &b, &spec).unwrap();
        for row in &report.rows {
            prop_assert!(row.max_drift_normalized <= AFFINE_DRIFT_TOL, "{row:?}");
        }
    }
}
