//! Adapted coordinates `(t, ξ)` at a non-critical point of `f`.
//!
//! `ξ` parametrizes the level surface through the base point as a graph
//! `y3 = h(ξ)` in a rotated frame `y = R (x - p)`, and `t` follows the flow
//! of `∇f/|∇f|²`, so that `f(x(t, ξ)) = c0 + t`.

use serde_json::json;
use serde::Serialize;

use crate::coeff::Coeff;
use crate::error::{Error, Result};
use crate::expr::{Bindings, Dual, Expr, SeriesDomain};
use crate::jets::{Series, Vars};

/// Default gradient floor, relative to the scale of the 2-jet at `p`.
pub const GRADIENT_FLOOR: f64 = 1e-8;
/// Smallest `∂3 f(p) / |∇f(p)|` for which `Auto` keeps unrotated graph coordinates.
pub const GRAPH_MIN_COS: f64 = 0.25;

/// Largest total truncation degree a chart may be built with.
pub const MAX_TOTAL_ORDER: usize = 24;

/// Truncation budget. Series in `(t, ξ)` are truncated at total degree
/// `t + xi`; this keeps `xi` orders in ξ available after `t` time
/// derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Orders {
    pub t: usize,
    pub xi: usize,
}

impl Orders {
    pub fn new(t: usize, xi: usize) -> Orders {
        Orders { t, xi }
    }

    pub fn total(&self) -> usize {
        self.t + self.xi
    }
}

impl Default for Orders {
    fn default() -> Self {
        Orders { t: 6, xi: 6 }
    }
}

/// How the frame at the base point is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameChoice {
    /// Minimal rotation taking `∇f(p)` to `+e3`.
    Aligned,
    /// Unrotated coordinates; requires `∂3 f(p) > 0`.
    Graph,
    /// `Graph` when `∂3 f(p) >= GRAPH_MIN_COS |∇f(p)|`, otherwise `Aligned`.
    /// Rational mode cannot rotate and takes `Graph` whenever `∂3 f(p) > 0`.
    #[default]
    Auto,
}

impl std::str::FromStr for FrameChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aligned" => Ok(FrameChoice::Aligned),
            "graph" => Ok(FrameChoice::Graph),
            "auto" => Ok(FrameChoice::Auto),
            _ => Err(Error::Config(format!("unknown frame `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasePoint<C: Coeff> {
    pub p: [C; 3],
    pub c0: C,
    pub grad: [C; 3],
    /// Rows are the frame axes: `y = R (x - p)`.
    pub rotation: [[C; 3]; 3],
}

impl<C: Coeff> BasePoint<C> {
    pub fn is_identity_frame(&self) -> bool {
        (0..3).all(|i| {
            (0..3).all(|j| {
                let want = if i == j { C::one() } else { C::zero() };
                self.rotation[i][j] == want
            })
        })
    }

    /// Gradient in the rotated frame, `R ∇f(p)`.
    pub fn frame_gradient(&self) -> [C; 3] {
        rotate(&self.rotation, &self.grad)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let v = |a: &[C; 3]| a.iter().map(Coeff::to_json).collect::<Vec<_>>();
        json!({
            "p": v(&self.p),
            "c0": self.c0.to_json(),
            "grad": v(&self.grad),
            "rotation": self.rotation.iter().map(v).collect::<Vec<_>>(),
        })
    }
}

fn rotate<T: Coeff>(r: &[[T; 3]; 3], v: &[T; 3]) -> [T; 3] {
    [0, 1, 2].map(|i| {
        let mut acc = T::zero();
        for (rij, vj) in r[i].iter().zip(v) {
            acc.mul_add_assign(rij, vj);
        }
        acc
    })
}

/// Minimal rotation with `R n = e3` for a unit vector `n`.
pub fn minimal_rotation(n: [f64; 3]) -> [[f64; 3]; 3] {
    let c = n[2];
    if c >= 1.0 - 1e-15 {
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    }
    if c <= -1.0 + 1e-15 {
        return [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
    }
    // Rodrigues with k = n × e3, |k| = sin θ, cos θ = c.
    let k = [n[1], -n[0], 0.0];
    let kx = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut kk = 0.0;
            for (l, kxl) in kx.iter().enumerate() {
                kk += kx[i][l] * kxl[j];
            }
            r[i][j] = if i == j { 1.0 } else { 0.0 } + kx[i][j] + kk / (1.0 + c);
        }
    }
    r
}

/// Base point with the default frame choice.
pub fn base_point<C: Coeff>(f: &Expr, b: &Bindings, p: &[C; 3]) -> Result<BasePoint<C>> {
    base_point_with(f, b, p, FrameChoice::Auto)
}

pub fn base_point_with<C: Coeff>(
    f: &Expr,
    b: &Bindings,
    p: &[C; 3],
    frame: FrameChoice,
) -> Result<BasePoint<C>> {
    let jet = f.jet_in(b, p, 2, 2)?;
    let s = &jet.series;
    let c0 = s.constant_term().clone();
    let grad = [
        s.coeff(&[1, 0, 0]),
        s.coeff(&[0, 1, 0]),
        s.coeff(&[0, 0, 1]),
    ];
    let g64 = grad.clone().map(|g| g.to_f64());
    let norm = g64.iter().map(|g| g * g).sum::<f64>().sqrt();
    let floor = GRADIENT_FLOOR * s.max_abs().max(1.0);
    if !(norm >= floor) {
        return Err(Error::CriticalPoint { norm, floor });
    }
    let graph_ok = g64[2] > 0.0;
    let use_graph = match frame {
        FrameChoice::Graph if !graph_ok => {
            return Err(Error::Frame(format!(
                "graph frame needs d3 f(p) > 0, got {}",
                g64[2]
            )))
        }
        FrameChoice::Graph => true,
        FrameChoice::Aligned => false,
        FrameChoice::Auto => graph_ok && (C::EXACT || g64[2] >= GRAPH_MIN_COS * norm),
    };
    let rotation = if use_graph {
        identity::<C>()
    } else {
        let r = minimal_rotation(g64.map(|g| g / norm));
        let is_identity = r == [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        if C::EXACT && !is_identity {
            return Err(Error::Frame(
                "rational mode needs a frame without rotation (d3 f(p) > 0)".into(),
            ));
        }
        r.map(|row| row.map(|v| C::from_f64(v).expect("finite rotation")))
    };
    Ok(BasePoint {
        p: p.clone(),
        c0,
        grad,
        rotation,
    })
}

fn identity<C: Coeff>() -> [[C; 3]; 3] {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| if i == j { C::one() } else { C::zero() }))
}

/// World coordinates `x = p + Rᵀ y` of frame series `y`.
pub fn to_world<C: Coeff>(bp: &BasePoint<C>, y: &[Series<C>; 3]) -> [Series<C>; 3] {
    [0, 1, 2].map(|i| {
        let mut acc = y[0].scale(&bp.rotation[0][i]);
        for (k, yk) in y.iter().enumerate().skip(1) {
            acc = &acc + &yk.scale(&bp.rotation[k][i]);
        }
        acc.add_scalar(&bp.p[i])
    })
}

/// Value of `f` and its frame gradient `R ∇f` along frame series `y`.
fn value_grad_series<C: Coeff>(
    f: &Expr,
    b: &Bindings,
    bp: &BasePoint<C>,
    y: &[Series<C>; 3],
) -> Result<(Series<C>, [Series<C>; 3])> {
    let vars = y[0].vars().clone();
    let order = y[0].order();
    let d = Dual::new(SeriesDomain::<C>::new(vars, order));
    let xw = to_world(bp, y);
    let coords = d.coordinates(xw);
    let (v, gx) = f.eval_in(&d, &coords, b)?;
    let gy = [0, 1, 2].map(|i| {
        let mut acc = gx[0].scale(&bp.rotation[i][0]);
        for (j, g) in gx.iter().enumerate().skip(1) {
            acc = &acc + &g.scale(&bp.rotation[i][j]);
        }
        acc
    });
    Ok((v, gy))
}

/// Solves `f(ξ, h(ξ)) = c0` in the frame by Newton iteration on series in
/// `(xi1, xi2)` truncated at degree `m`.
pub fn graph_solve<C: Coeff>(
    f: &Expr,
    b: &Bindings,
    bp: &BasePoint<C>,
    m: usize,
) -> Result<Series<C>> {
    let v = Vars::xi();
    let xi1 = Series::variable(v.clone(), m, 0, C::zero());
    let xi2 = Series::variable(v.clone(), m, 1, C::zero());
    let mut h = Series::zero(v.clone(), m);
    // Newton doubles the number of correct orders per step.
    let mut steps = 2;
    while (1usize << (steps - 2)) <= m + 1 {
        steps += 1;
    }
    for _ in 0..steps {
        let y = [xi1.clone(), xi2.clone(), h.clone()];
        let (val, grad) = value_grad_series(f, b, bp, &y)?;
        let resid = val.add_scalar(&bp.c0.neg());
        if C::EXACT && resid.is_zero() {
            break;
        }
        let delta = resid.div(&grad[2]).map_err(|_| {
            Error::Frame("d3 f vanishes at the base point in this frame".into())
        })?;
        h = &h - &delta;
    }
    Ok(h)
}

/// Solves `∂_t y = X(y)`, `y(0, ξ) = (ξ, h(ξ))` as a power series in
/// `(t, xi1, xi2)` truncated at total degree `orders.total()`.
pub fn flow_series<C: Coeff>(
    f: &Expr,
    b: &Bindings,
    bp: &BasePoint<C>,
    h: &Series<C>,
    orders: Orders,
) -> Result<[Series<C>; 3]> {
    let k = orders.total();
    let v = Vars::txi();
    let h = if h.order() >= k {
        h.truncate(k)
    } else {
        return Err(Error::OrderMismatch {
            left: h.order(),
            right: k,
        });
    };
    let y0 = [
        Series::variable(v.clone(), k, 1, C::zero()),
        Series::variable(v.clone(), k, 2, C::zero()),
        h.embed(v, &[1, 2]),
    ];
    let mut y = y0.clone();
    // Picard: each pass fixes one more power of t.
    for _ in 0..k {
        let (_, g) = value_grad_series(f, b, bp, &y)?;
        let n2 = &(&(&g[0] * &g[0]) + &(&g[1] * &g[1])) + &(&g[2] * &g[2]);
        let inv = n2.reciprocal().map_err(|_| Error::CriticalPoint {
            norm: 0.0,
            floor: GRADIENT_FLOOR,
        })?;
        let next = [0, 1, 2].map(|i| &y0[i] + &(&g[i] * &inv).integrate(0).truncate(k));
        if C::EXACT && next == y {
            break;
        }
        y = next;
    }
    Ok(y)
}

fn dot<C: Coeff>(a: &[Series<C>; 3], b: &[Series<C>; 3]) -> Series<C> {
    &(&(&a[0] * &b[0]) + &(&a[1] * &b[1])) + &(&a[2] * &b[2])
}

/// Everything downstream needs about the chart, as series in `(t, xi1, xi2)`.
#[derive(Debug, Clone)]
pub struct ChartData<C: Coeff> {
    pub base: BasePoint<C>,
    pub orders: Orders,
    /// Graph function in `(xi1, xi2)`.
    pub h: Series<C>,
    /// Flow map in frame coordinates `y = R (x - p)`.
    pub x: [Series<C>; 3],
    /// `χ² = ∂_t x · ∂_t x`.
    pub chi2: Series<C>,
    /// `χ = 1/|∇f|`; only in floating-point mode.
    pub chi: Option<Series<C>>,
    /// `[[g11, g12], [g12, g22]]`.
    pub g: [[Series<C>; 2]; 2],
    pub g_inv: [[Series<C>; 2]; 2],
    pub detg: Series<C>,
    /// `|g|^{1/2}`; only in floating-point mode.
    pub sqrt_detg: Option<Series<C>>,
    /// `det(∂_t x, ∂_1 x, ∂_2 x)`, equal to `χ |g|^{1/2}` for a valid chart.
    pub vol: Series<C>,
    /// `∂_t x · ∂_i x`, zero for a valid chart.
    pub cross: [Series<C>; 2],
}

pub fn metric_data<C: Coeff>(
    bp: &BasePoint<C>,
    h: &Series<C>,
    x: &[Series<C>; 3],
    orders: Orders,
) -> Result<ChartData<C>> {
    let dt = [0, 1, 2].map(|i| x[i].derive(0));
    let d1 = [0, 1, 2].map(|i| x[i].derive(1));
    let d2 = [0, 1, 2].map(|i| x[i].derive(2));
    let g11 = dot(&d1, &d1);
    let g12 = dot(&d1, &d2);
    let g22 = dot(&d2, &d2);
    let chi2 = dot(&dt, &dt);
    let cross = [dot(&dt, &d1), dot(&dt, &d2)];
    let detg = &(&g11 * &g22) - &(&g12 * &g12);
    let inv = detg.reciprocal().map_err(|e| Error::Frame(format!("degenerate metric: {e}")))?;
    let g_inv = [
        [&g22 * &inv, -&(&g12 * &inv)],
        [-&(&g12 * &inv), &g11 * &inv],
    ];
    let vol = &(&(&dt[0] * &(&(&d1[1] * &d2[2]) - &(&d1[2] * &d2[1])))
        - &(&dt[1] * &(&(&d1[0] * &d2[2]) - &(&d1[2] * &d2[0]))))
        + &(&dt[2] * &(&(&d1[0] * &d2[1]) - &(&d1[1] * &d2[0])));
    let (chi, sqrt_detg) = if C::EXACT {
        (None, None)
    } else {
        (Some(chi2.sqrt()?), Some(detg.sqrt()?))
    };
    Ok(ChartData {
        base: bp.clone(),
        orders,
        h: h.clone(),
        x: x.clone(),
        chi2,
        chi,
        g: [[g11, g12.clone()], [g12, g22]],
        g_inv,
        detg,
        sqrt_detg,
        vol,
        cross,
    })
}

/// Builds the full chart at `p`.
pub fn build_chart<C: Coeff>(
    f: &Expr,
    b: &Bindings,
    p: &[C; 3],
    orders: Orders,
    frame: FrameChoice,
) -> Result<ChartData<C>> {
    if orders.total() > MAX_TOTAL_ORDER {
        return Err(Error::OrderOverflow {
            requested: orders.total(),
            max: MAX_TOTAL_ORDER,
        });
    }
    f.check_bound(b)?;
    let bp = base_point_with(f, b, p, frame)?;
    let h = graph_solve(f, b, &bp, orders.total())?;
    let x = flow_series(f, b, &bp, &h, orders)?;
    metric_data(&bp, &h, &x, orders)
}

impl<C: Coeff> ChartData<C> {
    /// `f(x(t, ξ)) - c0 - t`, zero for a correct flow.
    pub fn level_defect(&self, f: &Expr, b: &Bindings) -> Result<Series<C>> {
        let d = SeriesDomain::<C>::new(self.x[0].vars().clone(), self.x[0].order());
        let xw = to_world(&self.base, &self.x);
        let fx = f.eval_in(&d, &xw, b)?;
        let t = Series::variable(fx.vars().clone(), fx.order(), 0, self.base.c0.clone());
        Ok(&fx - &t)
    }

    /// Flow map in world coordinates.
    pub fn world(&self) -> [Series<C>; 3] {
        to_world(&self.base, &self.x)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let pair = |m: &[[Series<C>; 2]; 2]| {
            json!([
                [m[0][0].to_json(), m[0][1].to_json()],
                [m[1][0].to_json(), m[1][1].to_json()]
            ])
        };
        json!({
            "base_point": self.base.to_json(),
            "orders": {"t": self.orders.t, "xi": self.orders.xi},
            "h": self.h.to_json(),
            "x": self.x.iter().map(Series::to_json).collect::<Vec<_>>(),
            "chi2": self.chi2.to_json(),
            "chi": self.chi.as_ref().map(Series::to_json),
            "g": pair(&self.g),
            "g_inv": pair(&self.g_inv),
            "detg": self.detg.to_json(),
            "sqrt_detg": self.sqrt_detg.as_ref().map(Series::to_json),
            "vol": self.vol.to_json(),
        })
    }
}
