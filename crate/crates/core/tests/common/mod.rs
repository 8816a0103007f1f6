#![allow(dead_code)]

use beltrami::chart::{build_chart, ChartData, FrameChoice, Orders};
use beltrami::coeff::Coeff;
use beltrami::expr::{Bindings, Expr};
use beltrami::jets::Series;
use beltrami::obstruction::{det4, script_tn, sliced_constraints, tensor_t};
use beltrami::sampling::{self, SampleRng};
use proptest::prelude::*;

/// Largest coefficient magnitude of the chart identities that must vanish.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChartDefects {
    pub level: f64,
    pub cross: f64,
    pub inverse: f64,
    pub first_constraint: f64,
    pub antisymmetry: f64,
}

impl ChartDefects {
    pub fn max(&self) -> f64 {
        [self.level, self.cross, self.inverse, self.first_constraint, self.antisymmetry]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// `g · g⁻¹ - I`, entrywise maximum.
pub fn inverse_defect<C: Coeff>(chart: &ChartData<C>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let mut s = &(&chart.g[i][0] * &chart.g_inv[0][j]) + &(&chart.g[i][1] * &chart.g_inv[1][j]);
            if i == j {
                s = s.add_scalar(&C::from_i64(-1));
            }
            worst = worst.max(s.max_abs());
        }
    }
    worst
}

/// `det(𝒯3, 𝒯2, 𝒯4, 𝒯5) + det(𝒯2, 𝒯3, 𝒯4, 𝒯5)`, maximum coefficient.
pub fn antisymmetry_defect<C: Coeff>(chart: &ChartData<C>, m: usize) -> f64 {
    let v = sliced_constraints(chart, &[2, 3, 4, 5], m).expect("constraint vectors");
    let p = det4([&v[0], &v[1], &v[2], &v[3]]).expect("det");
    let q = det4([&v[1], &v[0], &v[2], &v[3]]).expect("det");
    let r = det4([&v[0], &v[1], &v[3], &v[2]]).expect("det");
    (&p + &q).max_abs().max((&p + &r).max_abs())
}

pub fn chart_defects<C: Coeff>(f: &Expr, b: &Bindings, chart: &ChartData<C>, m: usize) -> ChartDefects {
    let t = tensor_t(chart);
    ChartDefects {
        level: chart.level_defect(f, b).expect("level defect").max_abs(),
        cross: chart.cross.iter().map(Series::max_abs).fold(0.0, f64::max),
        inverse: inverse_defect(chart),
        first_constraint: script_tn(&t, &t).expect("first constraint").max_abs(),
        antisymmetry: antisymmetry_defect(chart, m),
    }
}

/// Smallest accepted `|f(p)|`. The constraint ratio divides by `T^2_1`,
/// which carries a factor `f(p) + t`, so its t-series has radius `|f(p)|`.
pub const MIN_LEVEL: f64 = 0.5;

/// Largest accepted `‖∇²f(p)‖ / |∇f(p)|²`. Chart coefficients grow roughly by
/// this factor per order, so it keeps them of moderate size.
pub const MAX_CURVATURE_RATIO: f64 = 1.0;

/// Whether `(f, p)` meets the preconditions of the chart tolerances:
/// gradient norm at least `min_grad`, `|f(p)| >= MIN_LEVEL`, and curvature
/// ratio at most `MAX_CURVATURE_RATIO`.
pub fn well_conditioned(f: &Expr, p: [f64; 3], min_grad: f64) -> bool {
    let Ok((v, g, h)) = f.value_grad_hess(&Bindings::new(), p) else { return false };
    let grad2 = g.iter().map(|x| x * x).sum::<f64>();
    let hess = h.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    v.abs() >= MIN_LEVEL && grad2.sqrt() >= min_grad && hess <= MAX_CURVATURE_RATIO * grad2
}

/// `3 x3 + q` with `q` the cubic with the given coefficients in
/// `sampling::monomials(3)` order. The dominant linear term keeps chart
/// coefficients of moderate size, which absolute tolerances presuppose.
pub fn tilted_cubic(coeffs: &[i64]) -> Expr {
    Expr::int(3) * Expr::var(2) + sampling::polynomial(3, coeffs)
}

/// Seeded `tilted_cubic` with coefficients in `[-1, 1]` and a point of the
/// ball of radius 0.5, redrawn until `well_conditioned` holds.
pub fn seeded_case(rng: &mut SampleRng, min_grad: f64) -> (Expr, [f64; 3]) {
    loop {
        let f = Expr::int(3) * Expr::var(2) + sampling::random_polynomial(rng, 3, 1);
        let p = sampling::point_in_ball(rng, [0.0; 3], 0.5);
        if well_conditioned(&f, p, min_grad) {
            return (f, p);
        }
    }
}

/// Proptest strategy over well-conditioned `(tilted_cubic, p)` pairs.
pub fn conditioned_case() -> impl Strategy<Value = (Expr, [f64; 3])> {
    (
        prop::collection::vec(-1i64..=1, sampling::monomials(3).len()),
        prop::array::uniform3(-0.3f64..0.3),
    )
        .prop_map(|(c, p)| (tilted_cubic(&c), p))
        .prop_filter("ill-conditioned base point", |(f, p)| well_conditioned(f, *p, 0.5))
}

/// Largest coefficient among the chart position, metric and inverse metric.
pub fn chart_scale<C: Coeff>(chart: &ChartData<C>) -> f64 {
    chart
        .x
        .iter()
        .chain(chart.g.iter().flatten())
        .chain(chart.g_inv.iter().flatten())
        .map(Series::max_abs)
        .fold(0.0, f64::max)
}

pub fn chart_at(f: &Expr, p: [f64; 3], orders: Orders) -> ChartData<f64> {
    build_chart::<f64>(f, &Bindings::new(), &p, orders, FrameChoice::Auto).expect("chart")
}
