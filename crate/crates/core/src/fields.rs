//! Cartesian and Riemannian vector calculus on expression fields, and the
//! residual checks built from it.

use rayon::prelude::*;
use serde::Serialize;

use crate::chart::{build_chart, ChartData, FrameChoice, Orders};
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Func, SeriesDomain, VectorExpr};
use crate::jets::Series;
use crate::obstruction::tensor_t;
use crate::sampling;

type Vec3 = [f64; 3];

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// `curl` of a vector from its Jacobian `jac[i][j] = ∂_j w_i`.
fn curl_from_jacobian(jac: &[Vec3; 3]) -> Vec3 {
    [
        jac[2][1] - jac[1][2],
        jac[0][2] - jac[2][0],
        jac[1][0] - jac[0][1],
    ]
}

fn jacobian(u: &VectorExpr, b: &Bindings, p: Vec3) -> Result<(Vec3, [Vec3; 3])> {
    let mut val = [0.0; 3];
    let mut jac = [[0.0; 3]; 3];
    for i in 0..3 {
        let (v, g) = u.0[i].value_grad(b, p)?;
        val[i] = v;
        jac[i] = g;
    }
    Ok((val, jac))
}

/// `(curl u, div u)` at `p`.
pub fn curl_div(u: &VectorExpr, b: &Bindings, p: Vec3) -> Result<(Vec3, f64)> {
    let (_, jac) = jacobian(u, b, p)?;
    Ok((curl_from_jacobian(&jac), jac[0][0] + jac[1][1] + jac[2][2]))
}

/// `e = (a, 0, 1)`, the gradient of `1 + a x1 + x3`.
pub fn affine_axis(a: f64) -> Vec3 {
    [a, 0.0, 1.0]
}

fn check_orthogonal(a: f64, u0: Vec3) -> Result<()> {
    let d = dot(u0, affine_axis(a));
    if d.abs() > 1e-12 {
        return Err(Error::NonOrthogonal(d));
    }
    Ok(())
}

/// The explicit solution of `curl u = (1 + a x1 + x3) u`:
/// `u0 cos θ + (u0 × e)/|e| sin θ` with `θ = (1 + a x1 + x3)² / (2|e|)`.
pub fn affine_solution(a: f64, u0: Vec3, p: Vec3) -> Result<Vec3> {
    check_orthogonal(a, u0)?;
    let e = affine_axis(a);
    let ne = norm(e);
    let s = 1.0 + a * p[0] + p[2];
    let theta = s * s / (2.0 * ne);
    let w = cross(u0, e);
    let (sn, cs) = theta.sin_cos();
    Ok([0, 1, 2].map(|i| u0[i] * cs + w[i] / ne * sn))
}

/// The same field as an expression, so it can go through the jet pipeline.
pub fn affine_solution_expr(a: f64, u0: Vec3) -> Result<VectorExpr> {
    check_orthogonal(a, u0)?;
    let e = affine_axis(a);
    let w = cross(u0, e);
    let ne = Expr::call(Func::Sqrt, Expr::from_f64(dot(e, e)));
    let s = Expr::int(1) + Expr::from_f64(a) * Expr::var(0) + Expr::var(2);
    let theta = s.pow(2) / (Expr::int(2) * ne.clone());
    let comp = |i: usize| {
        Expr::from_f64(u0[i]) * Expr::call(Func::Cos, theta.clone())
            + Expr::from_f64(w[i]) / ne.clone() * Expr::call(Func::Sin, theta.clone())
    };
    Ok(VectorExpr([comp(0), comp(1), comp(2)]))
}

/// `Δu + ∇f × u + f² u` at `p`.
pub fn elliptic_defect(u: &VectorExpr, f: &Expr, b: &Bindings, p: Vec3) -> Result<Vec3> {
    let (fv, fg) = f.value_grad(b, p)?;
    let mut uv = [0.0; 3];
    let mut lap = [0.0; 3];
    for i in 0..3 {
        let j = u.0[i].jet(b, p, 2)?;
        let s = &j.series;
        uv[i] = *s.constant_term();
        lap[i] = 2.0 * (s.coeff(&[2, 0, 0]) + s.coeff(&[0, 2, 0]) + s.coeff(&[0, 0, 2]));
    }
    let c = cross(fg, uv);
    Ok([0, 1, 2].map(|i| lap[i] + c[i] + fv * fv * uv[i]))
}

/// `|Δu + ∇f × u + f² u|` at `p`.
pub fn elliptic_residual(u: &VectorExpr, f: &Expr, b: &Bindings, p: Vec3) -> Result<f64> {
    Ok(norm(elliptic_defect(u, f, b, p)?))
}

/// Residuals of `curl u = f u`, `div u = 0` and the elliptic identity at
/// one point. Residuals are divided by `max(1, |u(p)|)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PointSample {
    pub point: Vec3,
    pub value: Vec3,
    pub curl_residual: f64,
    pub div_residual: f64,
    pub elliptic_residual: f64,
}

pub fn sample(u: &VectorExpr, f: &Expr, b: &Bindings, p: Vec3) -> Result<PointSample> {
    let (val, jac) = jacobian(u, b, p)?;
    let curl = curl_from_jacobian(&jac);
    let fv = f.eval(b, p)?;
    let scale = norm(val).max(1.0);
    let cr = norm([0, 1, 2].map(|i| curl[i] - fv * val[i])) / scale;
    let dr = (jac[0][0] + jac[1][1] + jac[2][2]).abs() / scale;
    let er = elliptic_residual(u, f, b, p)? / scale;
    Ok(PointSample {
        point: p,
        value: val,
        curl_residual: cr,
        div_residual: dr,
        elliptic_residual: er,
    })
}

/// Symmetric 3×3 metric given by expressions.
pub type Metric = [[Expr; 3]; 3];

pub fn euclidean_metric() -> Metric {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| Expr::int(i64::from(i == j))))
}

/// `f² δ_ij`.
pub fn conformal_metric(f: &Expr) -> Metric {
    [0, 1, 2].map(|i| {
        [0, 1, 2].map(|j| {
            if i == j {
                f.clone().pow(2)
            } else {
                Expr::int(0)
            }
        })
    })
}

fn det3(m: &[Vec3; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Curl with respect to a metric: the vector `w` with `d(v♭) = ι_w μ_g`,
/// i.e. `w^i = ε^{ijk} ∂_j (g_kl v^l) / √|g|`.
pub fn riemannian_curl(metric: &Metric, v: &VectorExpr, b: &Bindings, p: Vec3) -> Result<Vec3> {
    let mut g = [[0.0; 3]; 3];
    let mut dg = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for l in 0..3 {
            let (val, grad) = metric[k][l].value_grad(b, p)?;
            g[k][l] = val;
            dg[k][l] = grad;
        }
    }
    let scale = g.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    for k in 0..3 {
        for l in 0..k {
            if (g[k][l] - g[l][k]).abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::NonSpd(format!("g[{k}][{l}] != g[{l}][{k}]")));
            }
        }
    }
    let m1 = g[0][0];
    let m2 = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let m3 = det3(&g);
    if !(m1 > 0.0 && m2 > 0.0 && m3 > 0.0) {
        return Err(Error::NonSpd(format!("leading minors {m1}, {m2}, {m3}")));
    }
    let (vv, vj) = jacobian(v, b, p)?;
    // w_k = g_kl v^l and its Jacobian
    let mut wj = [[0.0; 3]; 3];
    for k in 0..3 {
        for j in 0..3 {
            wj[k][j] = (0..3).map(|l| dg[k][l][j] * vv[l] + g[k][l] * vj[l][j]).sum();
        }
    }
    let c = curl_from_jacobian(&wj);
    let root = m3.sqrt();
    Ok(c.map(|x| x / root))
}

/// Components of the Euclidean dual 1-form of `u` in chart coordinates:
/// `[β_t, β1, β2]` with `β_a = u(x) · ∂_a x`.
pub fn chart_pullback(u: &VectorExpr, b: &Bindings, chart: &ChartData<f64>) -> Result<[Series<f64>; 3]> {
    let xw = chart.world();
    let k = xw[0].order();
    if k == 0 {
        return Err(Error::BudgetExhausted {
            what: "pullback".into(),
            min_t: 1,
            min_xi: 0,
        });
    }
    let d = SeriesDomain::<f64>::new(xw[0].vars().clone(), k);
    let mut uval = Vec::with_capacity(3);
    for comp in &u.0 {
        uval.push(comp.eval_in(&d, &xw, b)?.truncate(k - 1));
    }
    Ok([0, 1, 2].map(|a| {
        let dx: Vec<Series<f64>> = xw.iter().map(|x| x.derive(a)).collect();
        &(&(&uval[0] * &dx[0]) + &(&uval[1] * &dx[1])) + &(&uval[2] * &dx[2])
    }))
}

/// Largest coefficients of the chart-system residuals of a pulled-back
/// field: `β_t`, `∂_t β - T β`, and `∂1 β2 - ∂2 β1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PullbackResiduals {
    pub beta_t: f64,
    pub evolution: f64,
    pub closedness: f64,
}

pub fn pullback_residuals(chart: &ChartData<f64>, beta: &[Series<f64>; 3]) -> Result<PullbackResiduals> {
    let k = beta[1].order();
    let t = tensor_t(chart).truncate(k);
    let tb = t.apply(&[beta[1].clone(), beta[2].clone()])?;
    let evo = [0, 1].map(|i| (&beta[i + 1].derive(0) - &tb[i].truncate(k - 1)).max_abs());
    let closed = &beta[2].derive(1) - &beta[1].derive(2);
    Ok(PullbackResiduals {
        beta_t: beta[0].max_abs(),
        evolution: evo[0].max(evo[1]),
        closedness: closed.max_abs(),
    })
}

pub const BELTRAMI_TOL: f64 = 1e-9;
pub const ELLIPTIC_TOL: f64 = 1e-8;
pub const PULLBACK_TOL: f64 = 1e-8;
pub const BETA_T_TOL: f64 = 1e-10;
pub const CONFORMAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct AffineReport {
    pub a: f64,
    pub u0: Vec3,
    pub seed: u64,
    pub samples: usize,
    pub max_residual: f64,
    pub pass: bool,
    pub per_check: AffineChecks,
}

#[derive(Debug, Clone, Serialize)]
pub struct AffineChecks {
    pub beltrami: f64,
    pub elliptic: f64,
    pub pullback: PullbackResiduals,
    pub chart_orders: [usize; 2],
}

/// Default `u0 ⊥ e`: `(1, 0, -a)`.
pub fn default_u0(a: f64) -> Vec3 {
    [1.0, 0.0, 0.0 - a]
}

/// Residual checks for the explicit solution at `samples` seeded points of
/// the unit ball, plus the chart-system check at the origin.
pub fn verify_affine(a: f64, u0: Vec3, samples: usize, seed: u64, orders: Orders) -> Result<AffineReport> {
    let u = affine_solution_expr(a, u0)?;
    let b = Bindings::new();
    let f = Expr::int(1) + Expr::from_f64(a) * Expr::var(0) + Expr::var(2);
    let mut rng = sampling::rng(seed);
    let points: Vec<Vec3> = (0..samples).map(|_| sampling::point_in_ball(&mut rng, [0.0; 3], 1.0)).collect();
    let results: Result<Vec<PointSample>> = points.par_iter().map(|&p| sample(&u, &f, &b, p)).collect();
    let results = results?;
    let beltrami = results
        .iter()
        .map(|s| s.curl_residual + s.div_residual)
        .fold(0.0, f64::max);
    let elliptic = results.iter().map(|s| s.elliptic_residual).fold(0.0, f64::max);
    let chart = build_chart::<f64>(&f, &b, &[0.0; 3], orders, FrameChoice::Auto)?;
    let beta = chart_pullback(&u, &b, &chart)?;
    let pullback = pullback_residuals(&chart, &beta)?;
    let pass = beltrami < BELTRAMI_TOL
        && elliptic < ELLIPTIC_TOL
        && pullback.evolution < PULLBACK_TOL
        && pullback.closedness < PULLBACK_TOL
        && pullback.beta_t < BETA_T_TOL;
    let max_residual = [beltrami, elliptic, pullback.evolution, pullback.closedness, pullback.beta_t]
        .into_iter()
        .fold(0.0, f64::max);
    Ok(AffineReport {
        a,
        u0,
        seed,
        samples,
        max_residual,
        pass,
        per_check: AffineChecks {
            beltrami,
            elliptic,
            pullback,
            chart_orders: [orders.t, orders.xi],
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformalReport {
    pub f: String,
    pub v: [String; 3],
    pub seed: u64,
    pub samples: usize,
    pub max_rel_error: f64,
    pub pass: bool,
}

/// Checks `curl₀(f² v) = f³ curl_{f² g₀} v` at seeded points for a seeded
/// random quadratic `v`.
pub fn conformal_check(f: &Expr, samples: usize, seed: u64) -> Result<ConformalReport> {
    let b = Bindings::new();
    let mut rng = sampling::rng(seed);
    let v = VectorExpr([0, 1, 2].map(|_| sampling::random_polynomial(&mut rng, 2, 3)));
    let f2v = VectorExpr([0, 1, 2].map(|i| f.clone().pow(2) * v.0[i].clone()));
    let metric = conformal_metric(f);
    let points: Vec<Vec3> = (0..samples).map(|_| sampling::point_in_ball(&mut rng, [0.0; 3], 1.0)).collect();
    let errs: Result<Vec<f64>> = points
        .par_iter()
        .map(|&p| {
            let (lhs, _) = curl_div(&f2v, &b, p)?;
            let fv = f.eval(&b, p)?;
            let rc = riemannian_curl(&metric, &v, &b, p)?;
            let rhs = rc.map(|x| fv.powi(3) * x);
            let diff = norm([0, 1, 2].map(|i| lhs[i] - rhs[i]));
            let scale = norm(lhs).max(norm(rhs)).max(f64::MIN_POSITIVE);
            Ok(diff / scale)
        })
        .collect();
    let max_rel_error = errs?.into_iter().fold(0.0, f64::max);
    Ok(ConformalReport {
        f: f.to_string(),
        v: v.0.clone().map(|e| e.to_string()),
        seed,
        samples,
        max_rel_error,
        pass: max_rel_error < CONFORMAL_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (0..3).all(|i| (a[i] - b[i]).abs() <= tol)
    }

    #[test]
    fn rigid_rotation() {
        let u = VectorExpr::parse_tuple("(-x2, x1, 0)").unwrap();
        let (c, d) = curl_div(&u, &Bindings::new(), [0.3, 0.1, -2.0]).unwrap();
        assert_eq!(c, [0.0, 0.0, 2.0]);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn gradients_are_irrotational() {
        let u = VectorExpr::parse_tuple("(x2*x3, x1*x3, x1*x2)").unwrap();
        let (c, _) = curl_div(&u, &Bindings::new(), [0.3, 0.1, -2.0]).unwrap();
        assert_eq!(c, [0.0; 3]);
    }

    #[test]
    fn affine_solution_at_origin() {
        let u = affine_solution(0.0, [1.0, 0.0, 0.0], [0.0; 3]).unwrap();
        let want = [0.5f64.cos(), -(0.5f64.sin()), 0.0];
        assert!(close(u, want, 1e-15));
        assert!((u[0] - 0.87758).abs() < 1e-5 && (u[1] + 0.47943).abs() < 1e-5);
        let e = affine_solution_expr(0.0, [1.0, 0.0, 0.0]).unwrap();
        let (c, _) = curl_div(&e, &Bindings::new(), [0.0; 3]).unwrap();
        assert!(close(c, want, 1e-15));
        assert!(matches!(
            affine_solution(0.0, [0.0, 0.0, 1.0], [0.0; 3]),
            Err(Error::NonOrthogonal(_))
        ));
    }

    #[test]
    fn affine_solution_is_linear_in_u0() {
        let p = [0.2, -0.4, 0.7];
        let u = affine_solution(2.0, [1.0, 3.0, -2.0], p).unwrap();
        let v = affine_solution(2.0, [2.5, 7.5, -5.0], p).unwrap();
        assert!(close(v, u.map(|x| 2.5 * x), 1e-14));
    }

    #[test]
    fn elliptic_examples() {
        let b = Bindings::new();
        let zero = VectorExpr::parse_tuple("(0, 0, 0)").unwrap();
        let f = parse("1 + x1").unwrap();
        assert_eq!(elliptic_residual(&zero, &f, &b, [0.1, 0.2, 0.3]).unwrap(), 0.0);
        let u = VectorExpr::parse_tuple("(1, 0, 0)").unwrap();
        let one = parse("1").unwrap();
        assert_eq!(elliptic_residual(&u, &one, &b, [0.0; 3]).unwrap(), 1.0);
    }

    #[test]
    fn euclidean_curl_coincides() {
        let v = VectorExpr::parse_tuple("(x2^2*x3, x1 - x3^3, x1*x2)").unwrap();
        let b = Bindings::new();
        let p = [0.3, -0.5, 0.8];
        let (c, _) = curl_div(&v, &b, p).unwrap();
        assert_eq!(riemannian_curl(&euclidean_metric(), &v, &b, p).unwrap(), c);
    }

    #[test]
    fn closed_dual_form_has_zero_curl() {
        // v♭ = f² v = dψ for v = ∇ψ / f²
        let f = parse("1 + x1^2 + x2^2 + x3^2").unwrap();
        let v = VectorExpr::parse_tuple("(x2 / (1 + x1^2 + x2^2 + x3^2)^2, x1 / (1 + x1^2 + x2^2 + x3^2)^2, 0)").unwrap();
        let c = riemannian_curl(&conformal_metric(&f), &v, &Bindings::new(), [0.2, 0.4, -0.1]).unwrap();
        assert!(c.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn non_spd_metric_rejected() {
        let mut m = euclidean_metric();
        m[2][2] = Expr::int(-1);
        let v = VectorExpr::parse_tuple("(x1, x2, x3)").unwrap();
        assert!(matches!(
            riemannian_curl(&m, &v, &Bindings::new(), [0.0; 3]),
            Err(Error::NonSpd(_))
        ));
    }

    #[test]
    fn gradient_of_flat_level_function_pulls_back_to_dt() {
        let f = parse("1 + x3").unwrap();
        let b = Bindings::new();
        let chart = build_chart::<f64>(&f, &b, &[0.0; 3], Orders::new(2, 2), FrameChoice::Auto).unwrap();
        let u = VectorExpr::parse_tuple("(0, 0, 1)").unwrap();
        let beta = chart_pullback(&u, &b, &chart).unwrap();
        assert_eq!(*beta[0].constant_term(), 1.0);
        assert!(beta[1].is_zero() && beta[2].is_zero());
    }
}
