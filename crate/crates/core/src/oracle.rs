//! Finite-difference counterpart of the series pipeline: stencil jets, a
//! numerically integrated flow, and a pointwise obstruction value built
//! only from those.

use rayon::prelude::*;
use serde::Serialize;

use crate::chart::{base_point_with, FrameChoice};
use crate::error::{Error, Result};
use crate::expr::{parse, Bindings, Expr};
use crate::jets::{Series, Vars};
use crate::obstruction::{obstruction_pijkl, validate_indices, ObstructionOptions, PRIMARY_INDICES};

type Vec3 = [f64; 3];
type Mat2 = [[f64; 2]; 2];

pub const MAX_FD_ORDER: usize = 6;
/// Smallest step accepted for derivatives of order 4 and above.
pub const MIN_HIGH_ORDER_STEP: f64 = 1e-3;
/// Gradient norm below which the numeric flow is abandoned.
pub const FLOW_GRADIENT_FLOOR: f64 = 1e-8;
pub const CROSS_CHECK_REL_TOL: f64 = 1e-3;
pub const CROSS_CHECK_ABS_TOL: f64 = 1e-6;

/// Weights `w[k][i]` of the `k`-th derivative at `z` from samples at `x[i]`.
pub fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Offsets `-r..=r` of a central stencil of odd width `2r + 1`.
fn offsets(width: usize) -> Vec<f64> {
    let r = (width / 2) as i64;
    (-r..=r).map(|o| o as f64).collect()
}

/// Leading error order of a central `k`-th derivative on `width` points.
fn accuracy(width: usize, k: usize) -> u32 {
    let q = (width - k) as u32;
    q + q % 2
}

/// Extrapolates estimates at steps `h, h/2, h/4, ...` whose error is a
/// series in even powers of `h` starting at `h^q`.
pub fn richardson(values: &[f64], q: u32) -> f64 {
    let mut v = values.to_vec();
    let mut p = q;
    while v.len() > 1 {
        let r = 2f64.powi(p as i32);
        v = v.windows(2).map(|w| (r * w[1] - w[0]) / (r - 1.0)).collect();
        p += 2;
    }
    v[0]
}

/// Central stencil layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StencilSpec {
    pub step: Vec3,
    /// Points per axis; odd.
    pub width: usize,
    /// Number of step sizes combined by extrapolation; 1 disables it.
    pub richardson: usize,
}

impl Default for StencilSpec {
    fn default() -> StencilSpec {
        StencilSpec {
            step: [1e-2; 3],
            width: MAX_FD_ORDER + 1,
            richardson: 2,
        }
    }
}

impl StencilSpec {
    pub fn uniform(step: f64, width: usize, richardson: usize) -> StencilSpec {
        StencilSpec {
            step: [step; 3],
            width,
            richardson,
        }
    }

    fn validate(&self, order: usize) -> Result<()> {
        if order > MAX_FD_ORDER {
            return Err(Error::OrderOverflow {
                requested: order,
                max: MAX_FD_ORDER,
            });
        }
        if self.width.is_multiple_of(2) || self.width < order + 1 {
            return Err(Error::Config(format!(
                "stencil width {} must be odd and at least {}",
                self.width,
                order + 1
            )));
        }
        if self.richardson == 0 {
            return Err(Error::Config("at least one Richardson level is needed".into()));
        }
        for &h in &self.step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!("step {h} must be positive")));
            }
            if order >= 4 && h < MIN_HIGH_ORDER_STEP {
                return Err(Error::StepTooSmall { step: h, order });
            }
        }
        Ok(())
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Taylor coefficients of `f` at `p` through total degree `order` by
/// tensor-product central differences, in the displacement variables.
pub fn fd_jet(f: &Expr, b: &Bindings, p: Vec3, order: usize, spec: &StencilSpec) -> Result<Series<f64>> {
    spec.validate(order)?;
    let w = spec.width;
    let off = offsets(w);
    let unit = fornberg_weights(0.0, &off, order);
    let mut levels = Vec::with_capacity(spec.richardson);
    for s in 0..spec.richardson {
        let h = spec.step.map(|h| h / 2f64.powi(s as i32));
        let mut vals = vec![0.0; w * w * w];
        for i in 0..w {
            for j in 0..w {
                for k in 0..w {
                    let x = [p[0] + off[i] * h[0], p[1] + off[j] * h[1], p[2] + off[k] * h[2]];
                    vals[(i * w + j) * w + k] = f.eval(b, x)?;
                }
            }
        }
        levels.push((h, vals));
    }
    let mut terms = Vec::new();
    for total in 0..=order {
        for a in (0..=total).rev() {
            for c in (0..=total - a).rev() {
                let alpha = [a, c, total - a - c];
                let estimates: Vec<f64> = levels
                    .iter()
                    .map(|(h, vals)| {
                        let mut acc = 0.0;
                        for i in 0..w {
                            let wi = unit[alpha[0]][i];
                            if wi == 0.0 {
                                continue;
                            }
                            for j in 0..w {
                                let wj = unit[alpha[1]][j];
                                if wj == 0.0 {
                                    continue;
                                }
                                for k in 0..w {
                                    acc += wi * wj * unit[alpha[2]][k] * vals[(i * w + j) * w + k];
                                }
                            }
                        }
                        (0..3).fold(acc, |v, ax| v / h[ax].powi(alpha[ax] as i32))
                    })
                    .collect();
                let q = alpha
                    .iter()
                    .filter(|&&k| k > 0)
                    .map(|&k| accuracy(w, k))
                    .min()
                    .unwrap_or(2);
                let d = richardson(&estimates, q);
                let denom: f64 = alpha.iter().map(|&k| factorial(k)).product();
                terms.push((alpha.map(|k| k as u16).to_vec(), d / denom));
            }
        }
    }
    Series::from_terms(Vars::cartesian(), order, terms)
}

/// `∇f/|∇f|²` and its Jacobian at `x`.
fn flow_field(f: &Expr, b: &Bindings, x: Vec3, t: f64) -> Result<(Vec3, [Vec3; 3])> {
    let (_, g, h) = f.value_grad_hess(b, x)?;
    let s = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
    if s.sqrt() < FLOW_GRADIENT_FLOOR {
        return Err(Error::GradientCollapse(t));
    }
    let hg = [0, 1, 2].map(|j| (0..3).map(|k| h[j][k] * g[k]).sum::<f64>());
    let dx = [0, 1, 2].map(|i| [0, 1, 2].map(|j| h[i][j] / s - 2.0 * g[i] * hg[j] / (s * s)));
    Ok((g.map(|v| v / s), dx))
}

/// Point plus two tangent vectors carried along the flow.
type FlowState = [Vec3; 3];

fn flow_rhs(f: &Expr, b: &Bindings, s: &FlowState, t: f64) -> Result<FlowState> {
    let (x, dx) = flow_field(f, b, s[0], t)?;
    let lin = |v: Vec3| [0, 1, 2].map(|i| dx[i][0] * v[0] + dx[i][1] * v[1] + dx[i][2] * v[2]);
    Ok([x, lin(s[1]), lin(s[2])])
}

fn shifted(s: &FlowState, c: f64, k: &FlowState) -> FlowState {
    [0, 1, 2].map(|r| [0, 1, 2].map(|i| s[r][i] + c * k[r][i]))
}

/// `steps` classical RK4 steps from time 0 to `t`.
fn integrate(f: &Expr, b: &Bindings, s0: FlowState, t: f64, steps: usize) -> Result<FlowState> {
    let dt = t / steps as f64;
    let mut s = s0;
    for n in 0..steps {
        let tn = n as f64 * dt;
        let k1 = flow_rhs(f, b, &s, tn)?;
        let k2 = flow_rhs(f, b, &shifted(&s, dt / 2.0, &k1), tn + dt / 2.0)?;
        let k3 = flow_rhs(f, b, &shifted(&s, dt / 2.0, &k2), tn + dt / 2.0)?;
        let k4 = flow_rhs(f, b, &shifted(&s, dt, &k3), tn + dt)?;
        s = [0, 1, 2].map(|r| {
            [0, 1, 2].map(|i| s[r][i] + dt / 6.0 * (k1[r][i] + 2.0 * k2[r][i] + 2.0 * k3[r][i] + k4[r][i]))
        });
    }
    Ok(s)
}

/// Position after flowing `x0` for time `t` along `∇f/|∇f|²` with steps
/// no longer than `dt`.
pub fn numeric_flow(f: &Expr, b: &Bindings, x0: Vec3, t: f64, dt: f64) -> Result<Vec3> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("flow step {dt} must be positive")));
    }
    let steps = ((t.abs() / dt).ceil() as usize).max(1);
    Ok(integrate(f, b, [x0, [0.0; 3], [0.0; 3]], t, steps)?[0])
}

/// Settings for [`p_point_fd`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointFdSpec {
    pub xi_step: f64,
    pub t_step: f64,
    pub richardson: usize,
    /// RK4 steps per trajectory, fixed so the result is smooth in `t`.
    pub flow_steps: usize,
}

impl Default for PointFdSpec {
    fn default() -> PointFdSpec {
        PointFdSpec {
            xi_step: 1e-2,
            t_step: 1e-2,
            richardson: 2,
            flow_steps: 16,
        }
    }
}

struct Frame<'a> {
    f: &'a Expr,
    b: &'a Bindings,
    p: Vec3,
    c0: f64,
    r: [Vec3; 3],
    steps: usize,
}

impl Frame<'_> {
    fn to_world(&self, y: Vec3) -> Vec3 {
        [0, 1, 2].map(|i| self.p[i] + (0..3).map(|k| self.r[k][i] * y[k]).sum::<f64>())
    }

    /// Graph point over `ξ` with its two tangent vectors, in world coordinates.
    fn graph(&self, xi: [f64; 2]) -> Result<FlowState> {
        let mut h = 0.0;
        for _ in 0..60 {
            let x = self.to_world([xi[0], xi[1], h]);
            let (v, g) = self.f.value_grad(self.b, x)?;
            let d: f64 = (0..3).map(|k| self.r[2][k] * g[k]).sum();
            if d.abs() < FLOW_GRADIENT_FLOOR {
                return Err(Error::GradientCollapse(0.0));
            }
            let step = (v - self.c0) / d;
            h -= step;
            if step.abs() <= 1e-15 * (1.0 + h.abs()) {
                let x = self.to_world([xi[0], xi[1], h]);
                let (_, g) = self.f.value_grad(self.b, x)?;
                let gy = [0, 1, 2].map(|i| (0..3).map(|k| self.r[i][k] * g[k]).sum::<f64>());
                let tangent = |v: usize| {
                    let mut y = [0.0; 3];
                    y[v] = 1.0;
                    y[2] = -gy[v] / gy[2];
                    [0, 1, 2].map(|i| (0..3).map(|k| self.r[k][i] * y[k]).sum::<f64>())
                };
                return Ok([x, tangent(0), tangent(1)]);
            }
        }
        Err(Error::Domain(format!("graph solve did not converge at xi = {xi:?}")))
    }

    /// `T` at `(t, ξ)`.
    fn tensor(&self, t: f64, xi: [f64; 2]) -> Result<Mat2> {
        let s0 = self.graph(xi)?;
        let s = if t == 0.0 { s0 } else { integrate(self.f, self.b, s0, t, self.steps)? };
        let (x, _) = flow_field(self.f, self.b, s[0], t)?;
        let dot = |a: Vec3, b: Vec3| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let (g11, g12, g22) = (dot(s[1], s[1]), dot(s[1], s[2]), dot(s[2], s[2]));
        let det = g11 * g22 - g12 * g12;
        let (i11, i12, i22) = (g22 / det, -g12 / det, g11 / det);
        let (a, b1, b2) = (x, s[1], s[2]);
        let vol = a[0] * (b1[1] * b2[2] - b1[2] * b2[1]) - a[1] * (b1[0] * b2[2] - b1[2] * b2[0])
            + a[2] * (b1[0] * b2[1] - b1[1] * b2[0]);
        let c = (self.c0 + t) * vol;
        Ok([[c * i12, c * i22], [-c * i11, -c * i12]])
    }

    /// `∂_t^k T(0, ξ) / k!` for `k ≤ kmax`.
    fn t_taylor(&self, xi: [f64; 2], kmax: usize, spec: &PointFdSpec) -> Result<Vec<Mat2>> {
        let width = kmax + 3 - kmax % 2;
        let off = offsets(width);
        let unit = fornberg_weights(0.0, &off, kmax);
        let mut per_level = Vec::with_capacity(spec.richardson);
        for s in 0..spec.richardson {
            let h = spec.t_step / 2f64.powi(s as i32);
            let samples = off.iter().map(|o| self.tensor(o * h, xi)).collect::<Result<Vec<_>>>()?;
            per_level.push((h, samples));
        }
        let mut out = vec![[[0.0; 2]; 2]; kmax + 1];
        for (k, slot) in out.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    let est: Vec<f64> = per_level
                        .iter()
                        .map(|(h, smp)| {
                            smp.iter().zip(&unit[k]).map(|(m, w)| w * m[i][j]).sum::<f64>() / h.powi(k as i32)
                        })
                        .collect();
                    slot[i][j] = richardson(&est, accuracy(width, k.max(1))) / factorial(k);
                }
            }
        }
        Ok(out)
    }
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [0, 1].map(|i| [0, 1].map(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j]))
}

/// `T_1(0), ..., T_n(0)` from the `t`-Taylor coefficients of `T`.
fn hierarchy_at_zero(taylor: &[Mat2], n: usize) -> Vec<Mat2> {
    let mut cur = taylor.to_vec();
    let mut out = vec![cur[0]];
    for _ in 1..n {
        let k = cur.len() - 1;
        let mut next = vec![[[0.0; 2]; 2]; k];
        for (d, slot) in next.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    slot[i][j] = (d + 1) as f64 * cur[d + 1][i][j];
                }
            }
            for e in 0..=d {
                let prod = mat_mul(&cur[e], &taylor[d - e]);
                for i in 0..2 {
                    for j in 0..2 {
                        slot[i][j] += prod[i][j];
                    }
                }
            }
        }
        out.push(next[0]);
        cur = next;
    }
    out
}

fn det4(m: [[f64; 4]; 4]) -> f64 {
    let mut a = m;
    let mut det = 1.0;
    for c in 0..4 {
        let piv = (c..4)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .expect("nonempty");
        if a[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            a.swap(piv, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..4 {
            let factor = a[r][c] / a[c][c];
            for k in c..4 {
                a[r][k] -= factor * a[c][k];
            }
        }
    }
    det
}

/// `det(𝒯_i, 𝒯_j, 𝒯_k, 𝒯_l)` at `t = 0, ξ = 0` from finite differences of
/// the numerically integrated chart.
pub fn p_pijkl_fd(
    f: &Expr,
    b: &Bindings,
    p: Vec3,
    indices: &[usize],
    frame: FrameChoice,
    spec: &PointFdSpec,
) -> Result<f64> {
    let ix = validate_indices(indices)?;
    if spec.richardson == 0 || spec.flow_steps == 0 || !(spec.t_step > 0.0 && spec.xi_step > 0.0) {
        return Err(Error::Config("oracle steps and levels must be positive".into()));
    }
    let l = ix[3];
    if l > 4 && spec.t_step < MIN_HIGH_ORDER_STEP {
        return Err(Error::StepTooSmall {
            step: spec.t_step,
            order: l - 1,
        });
    }
    let bp = base_point_with::<f64>(f, b, &p, frame)?;
    let fr = Frame {
        f,
        b,
        p,
        c0: f.eval(b, p)?,
        r: bp.rotation,
        steps: spec.flow_steps,
    };
    // ξ nodes: the center, then ±h per axis for each level
    let mut nodes = vec![[0.0, 0.0]];
    for s in 0..spec.richardson {
        let h = spec.xi_step / 2f64.powi(s as i32);
        for v in 0..2 {
            for sign in [-1.0, 1.0] {
                let mut x = [0.0, 0.0];
                x[v] = sign * h;
                nodes.push(x);
            }
        }
    }
    let hier: Vec<Vec<Mat2>> = nodes
        .par_iter()
        .map(|&x| Ok(hierarchy_at_zero(&fr.t_taylor(x, l - 1, spec)?, l)))
        .collect::<Result<_>>()?;
    // ∂_v of entry (i, j) of T_n at the center
    let deriv = |n: usize, v: usize, i: usize, j: usize| {
        let est: Vec<f64> = (0..spec.richardson)
            .map(|s| {
                let h = spec.xi_step / 2f64.powi(s as i32);
                let base = 1 + 4 * s + 2 * v;
                (hier[base + 1][n - 1][i][j] - hier[base][n - 1][i][j]) / (2.0 * h)
            })
            .collect();
        richardson(&est, 2)
    };
    let curl1 = |n: usize| deriv(n, 0, 1, 0) - deriv(n, 1, 0, 0);
    let curl2 = |n: usize| deriv(n, 0, 1, 1) - deriv(n, 1, 0, 1);
    let t = hier[0][0];
    if t[0][1].abs() < 1e-12 {
        return Err(Error::Division(format!("T^2_1 at the base point is {:e}", t[0][1])));
    }
    let column = |n: usize| {
        let tn = hier[0][n - 1];
        let r = tn[0][1] / t[0][1];
        [
            curl1(n) - r * curl1(1),
            curl2(n) - r * curl2(1),
            tn[1][0] - r * t[1][0],
            (tn[1][1] - tn[0][0]) - r * (t[1][1] - t[0][0]),
        ]
    };
    let cols = ix.map(column);
    let m = [0, 1, 2, 3].map(|row| [0, 1, 2, 3].map(|c| cols[c][row]));
    Ok(det4(m))
}

/// `P` at the base point, i.e. with indices `(2, 3, 4, 5)`.
pub fn p_point_fd(f: &Expr, b: &Bindings, p: Vec3, frame: FrameChoice, spec: &PointFdSpec) -> Result<f64> {
    p_pijkl_fd(f, b, p, &PRIMARY_INDICES, frame, spec)
}

/// One function of the cross-check battery.
#[derive(Debug, Clone)]
pub struct BatteryCase {
    pub f: String,
    pub params: Vec<(String, f64)>,
    pub point: Vec3,
}

/// Five polynomial functions, including members of both closed-form families.
pub fn battery() -> Vec<BatteryCase> {
    let case = |f: &str, params: &[(&str, f64)], point: Vec3| BatteryCase {
        f: f.to_string(),
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        point,
    };
    vec![
        case("1 + a*x1 + b*x1^3 + x3", &[("a", 1.0), ("b", 1.0)], [0.0; 3]),
        case("1 + x1^2 + a*x2^2 + x3", &[("a", 0.0)], [0.0; 3]),
        case("1 + a*x1 + x3", &[("a", 2.0)], [0.0; 3]),
        case("1 + a*x1 + b*x1^3 + x3", &[("a", 0.5), ("b", -1.0)], [0.1, 0.0, 0.0]),
        case("1 + x1 + x1*x2 + x2^2 - x1*x3 + x3 + x2^3", &[], [0.1, -0.1, 0.05]),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossCheckEntry {
    pub f: String,
    pub params: Vec<(String, f64)>,
    pub point: Vec3,
    pub series: f64,
    pub fd: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossCheckReport {
    pub indices: [usize; 4],
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub entries: Vec<CrossCheckEntry>,
    pub pass: bool,
}

/// Agreement test used by the cross-check: relative error below
/// [`CROSS_CHECK_REL_TOL`], or both values below [`CROSS_CHECK_ABS_TOL`].
pub fn agrees(series: f64, fd: f64) -> bool {
    let abs = (series - fd).abs();
    abs <= CROSS_CHECK_REL_TOL * series.abs() || (series.abs() < CROSS_CHECK_ABS_TOL && fd.abs() < CROSS_CHECK_ABS_TOL)
}

fn cross_check_case(case: &BatteryCase, indices: &[usize], spec: &PointFdSpec) -> Result<CrossCheckEntry> {
    let f = parse(&case.f)?;
    let b = case.params.iter().fold(Bindings::new(), |b, (k, v)| b.with_f64(k, *v));
    let poly = obstruction_pijkl::<f64>(&f, &b, &case.point, indices, 0, ObstructionOptions::default())?;
    let series = poly.coeff([0, 0]);
    let fd = p_pijkl_fd(&f, &b, case.point, indices, ObstructionOptions::default().frame, spec)?;
    let abs_error = (series - fd).abs();
    Ok(CrossCheckEntry {
        f: case.f.clone(),
        params: case.params.clone(),
        point: case.point,
        series,
        fd,
        abs_error,
        rel_error: if series != 0.0 { abs_error / series.abs() } else { abs_error },
        pass: agrees(series, fd),
    })
}

/// Compares the degree-0 coefficient of the series obstruction with the
/// finite-difference value on every battery case.
pub fn cross_check(cases: &[BatteryCase], indices: &[usize], spec: &PointFdSpec) -> Result<CrossCheckReport> {
    let ix = validate_indices(indices)?;
    let entries = cases
        .par_iter()
        .map(|c| cross_check_case(c, indices, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossCheckReport {
        indices: ix,
        rel_tol: CROSS_CHECK_REL_TOL,
        abs_tol: CROSS_CHECK_ABS_TOL,
        pass: entries.iter().all(|e| e.pass),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_weights() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
        let w5 = fornberg_weights(0.0, &offsets(5), 4);
        let want = [1.0, -4.0, 6.0, -4.0, 1.0];
        for (a, b) in w5[4].iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn richardson_removes_leading_term() {
        // D(h) = 1 + h² + h⁴
        let d = |h: f64| 1.0 + h * h + h.powi(4);
        assert!((richardson(&[d(0.1), d(0.05), d(0.025)], 2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_exact() {
        let f = parse("x1^3").unwrap();
        let s = fd_jet(&f, &Bindings::new(), [0.0; 3], 3, &StencilSpec::default()).unwrap();
        assert!((s.coeff(&[3, 0, 0]) - 1.0).abs() < 1e-10);
        assert!(s.coeff(&[2, 0, 0]).abs() < 1e-10);
    }

    #[test]
    fn order_zero_is_value() {
        let f = parse("exp(x1) + x2*x3").unwrap();
        let p = [0.3, 0.7, -1.1];
        let s = fd_jet(&f, &Bindings::new(), p, 0, &StencilSpec::default()).unwrap();
        assert_eq!(*s.constant_term(), f.eval(&Bindings::new(), p).unwrap());
    }

    #[test]
    fn step_guard() {
        let f = parse("x1^4").unwrap();
        let spec = StencilSpec::uniform(5e-4, 7, 1);
        let r = fd_jet(&f, &Bindings::new(), [0.0; 3], 4, &spec);
        assert!(matches!(r, Err(Error::StepTooSmall { .. })));
        assert!(fd_jet(&f, &Bindings::new(), [0.0; 3], 3, &spec).is_ok());
        let narrow = StencilSpec::uniform(0.1, 3, 1);
        assert!(matches!(fd_jet(&f, &Bindings::new(), [0.0; 3], 4, &narrow), Err(Error::Config(_))));
    }

    #[test]
    fn flow_of_affine_functions() {
        let b = Bindings::new();
        let f = parse("1 + x3").unwrap();
        let x = numeric_flow(&f, &b, [0.2, 0.1, 0.0], 0.5, 0.01).unwrap();
        // fifty steps of 0.01 sum to 0.5 up to rounding
        for (a, b) in x.iter().zip([0.2, 0.1, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        let f = parse("1 + 2*x1 + x3").unwrap();
        let x = numeric_flow(&f, &b, [0.0; 3], 0.3, 0.01).unwrap();
        let want = [0.6 / 5.0, 0.0, 0.3 / 5.0];
        for i in 0..3 {
            assert!((x[i] - want[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn flow_stops_at_critical_points() {
        let f = parse("x1^2 + x2^2 + x3^2").unwrap();
        let r = numeric_flow(&f, &Bindings::new(), [0.0; 3], 0.1, 0.01);
        assert!(matches!(r, Err(Error::GradientCollapse(_))));
    }

    #[test]
    fn small_determinant() {
        let m = [[2.0, 0.0, 0.0, 1.0], [0.0, 3.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [1.0, 0.0, 0.0, 1.0]];
        assert!((det4(m) - 3.0).abs() < 1e-14);
    }
}
