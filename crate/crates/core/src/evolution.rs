//! Pointwise integration of `∂_t β = T(t) β` on a ξ-grid with monitoring
//! of the closedness defect `∂1β2 - ∂2β1`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::chart::{build_chart, ChartData, FrameChoice, Orders};
use crate::error::{Error, Result};
use crate::expr::{parse, Bindings, Expr};
use crate::fields::affine_solution;
use crate::jets::SeriesMatrix2;
use crate::obstruction::tensor_t;

pub type Mat2 = [[f64; 2]; 2];

/// Default radius of the ξ-patch on which the chart series are trusted.
pub const PATCH_RADIUS: f64 = 0.2;

/// Rectangular grid centered at `ξ = 0` carrying `(β1, β2)` per node,
/// stored row-major with the `ξ1` index varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub n1: usize,
    pub n2: usize,
    pub h1: f64,
    pub h2: f64,
    pub t: f64,
    pub beta: Vec<[f64; 2]>,
}

impl GridField {
    pub fn new(n1: usize, n2: usize, h1: f64, h2: f64) -> Result<GridField> {
        if n1 < 5 || n2 < 5 {
            return Err(Error::Grid(format!("need at least 5 nodes per axis, got {n1}x{n2}")));
        }
        if !(h1 > 0.0 && h2 > 0.0) {
            return Err(Error::Grid(format!("spacings must be positive, got {h1}, {h2}")));
        }
        Ok(GridField {
            n1,
            n2,
            h1,
            h2,
            t: 0.0,
            beta: vec![[0.0; 2]; n1 * n2],
        })
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    /// Coordinates of node `(i, j)`.
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        let c1 = (self.n1 - 1) as f64 / 2.0;
        let c2 = (self.n2 - 1) as f64 / 2.0;
        [(i as f64 - c1) * self.h1, (j as f64 - c2) * self.h2]
    }

    pub fn nodes(&self) -> Vec<[f64; 2]> {
        (0..self.n1)
            .flat_map(|i| (0..self.n2).map(move |j| (i, j)))
            .map(|(i, j)| self.node(i, j))
            .collect()
    }

    /// Sets `β` from a function of the node coordinates.
    pub fn fill(&mut self, f: impl Fn([f64; 2]) -> Result<[f64; 2]>) -> Result<()> {
        let nodes = self.nodes();
        for (b, x) in self.beta.iter_mut().zip(nodes) {
            *b = f(x)?;
        }
        Ok(())
    }

    pub fn max_beta(&self) -> f64 {
        self.beta
            .iter()
            .map(|b| (b[0] * b[0] + b[1] * b[1]).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Matrix polynomial in `t`: `Σ_k coeffs[k] t^k`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimePoly {
    pub coeffs: Vec<Mat2>,
}

impl TimePoly {
    pub fn eval(&self, t: f64) -> Mat2 {
        let mut acc = [[0.0; 2]; 2];
        for c in self.coeffs.iter().rev() {
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] = acc[i][j] * t + c[i][j];
                }
            }
        }
        acc
    }

    /// Sum of entry magnitudes, a bound on the operator norm.
    pub fn norm_bound(&self, t: f64) -> f64 {
        let m = self.eval(t);
        let fro: f64 = m.iter().flatten().map(|x| x * x).sum();
        fro.sqrt()
    }
}

/// `T` restricted to each node of a grid.
pub type NodeTensors = Vec<TimePoly>;

/// Restricts chart series `T(t, ξ1, ξ2)` to the grid nodes.
pub fn node_tensors(t: &SeriesMatrix2<f64>, grid: &GridField, patch: f64) -> Result<NodeTensors> {
    let k = t.order();
    grid.nodes()
        .into_iter()
        .map(|x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r > patch * (1.0 + 1e-12) {
                return Err(Error::OutsidePatch { radius: r, patch });
            }
            let mut coeffs = vec![[[0.0; 2]; 2]; k + 1];
            for i in 0..2 {
                for j in 0..2 {
                    for (mi, c) in t.entries[i][j].terms() {
                        if *c == 0.0 {
                            continue;
                        }
                        let w = c * x[0].powi(mi[1] as i32) * x[1].powi(mi[2] as i32);
                        coeffs[mi[0] as usize][i][j] += w;
                    }
                }
            }
            Ok(TimePoly { coeffs })
        })
        .collect()
}

fn apply(m: Mat2, b: [f64; 2]) -> [f64; 2] {
    [m[0][0] * b[0] + m[0][1] * b[1], m[1][0] * b[0] + m[1][1] * b[1]]
}

fn axpy(b: [f64; 2], s: f64, k: [f64; 2]) -> [f64; 2] {
    [b[0] + s * k[0], b[1] + s * k[1]]
}

/// One classical Runge-Kutta step for a single node.
pub fn rk4_node(tp: &TimePoly, t: f64, b: [f64; 2], dt: f64) -> [f64; 2] {
    let k1 = apply(tp.eval(t), b);
    let k2 = apply(tp.eval(t + dt / 2.0), axpy(b, dt / 2.0, k1));
    let k3 = apply(tp.eval(t + dt / 2.0), axpy(b, dt / 2.0, k2));
    let k4 = apply(tp.eval(t + dt), axpy(b, dt, k3));
    [0, 1].map(|i| b[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Advances every node by `dt`. Nodes never read each other's state.
pub fn step(grid: &GridField, tensors: &NodeTensors, dt: f64) -> Result<GridField> {
    if tensors.len() != grid.beta.len() {
        return Err(Error::Grid(format!(
            "{} node tensors for {} nodes",
            tensors.len(),
            grid.beta.len()
        )));
    }
    let t = grid.t;
    let beta = grid
        .beta
        .par_iter()
        .zip(tensors.par_iter())
        .map(|(b, tp)| rk4_node(tp, t, *b, dt))
        .collect();
    Ok(GridField {
        beta,
        t: t + dt,
        ..grid.clone()
    })
}

/// `(max, L²)` of the central-difference `∂1β2 - ∂2β1` on interior nodes.
pub fn drift(grid: &GridField) -> (f64, f64) {
    let mut max = 0.0f64;
    let mut sum = 0.0;
    for i in 1..grid.n1 - 1 {
        for j in 1..grid.n2 - 1 {
            let d12 = (grid.beta[grid.index(i + 1, j)][1] - grid.beta[grid.index(i - 1, j)][1]) / (2.0 * grid.h1);
            let d21 = (grid.beta[grid.index(i, j + 1)][0] - grid.beta[grid.index(i, j - 1)][0]) / (2.0 * grid.h2);
            let d = d12 - d21;
            max = max.max(d.abs());
            sum += d * d;
        }
    }
    (max, (sum * grid.h1 * grid.h2).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftRow {
    pub t: f64,
    pub max_drift: f64,
    pub l2_drift: f64,
    pub max_beta: f64,
    pub max_drift_normalized: f64,
}

impl DriftRow {
    fn of(grid: &GridField) -> DriftRow {
        let (max_drift, l2_drift) = drift(grid);
        let max_beta = grid.max_beta();
        DriftRow {
            t: grid.t,
            max_drift,
            l2_drift,
            max_beta,
            max_drift_normalized: if max_beta > 0.0 { max_drift / max_beta } else { max_drift },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub rows: Vec<DriftRow>,
}

pub const CSV_HEADER: &str = "t,max_drift,l2_drift,max_beta,max_drift_normalized";

impl DriftReport {
    pub fn last(&self) -> &DriftRow {
        self.rows.last().expect("report has the initial row")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.max_drift, r.l2_drift, r.max_beta, r.max_drift_normalized
            );
        }
        s
    }
}

/// Initial data for [`run`].
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `β(0) = dψ`; `ψ` is written in `x1, x2` (or `xi1, xi2`) standing for `ξ1, ξ2`.
    Potential(Expr),
    /// The explicit solution of the affine family pulled back to the chart.
    AffineExact,
}

impl std::str::FromStr for InitialData {
    type Err = Error;

    fn from_str(s: &str) -> Result<InitialData> {
        if s == "affine-exact" {
            return Ok(InitialData::AffineExact);
        }
        match s.strip_prefix("psi:") {
            Some(body) => {
                let e = parse(&body.replace("xi1", "x1").replace("xi2", "x2"))?;
                Ok(InitialData::Potential(e))
            }
            None => Err(Error::Config(format!(
                "initial data must be `psi:<expr>` or `affine-exact`, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub p: [f64; 3],
    pub init: InitialData,
    pub t_max: f64,
    pub dt: f64,
    pub n1: usize,
    pub n2: usize,
    pub h: f64,
    pub orders: Orders,
    pub patch: f64,
}

/// Slope `a` when `f = 1 + a x1 + x3`, checked on the 2-jet at the origin.
fn affine_slope(f: &Expr, b: &Bindings) -> Result<f64> {
    let j = f.jet(b, [0.0; 3], 2)?;
    let s = &j.series;
    let a = s.coeff(&[1, 0, 0]);
    let quad: f64 = s.terms().filter(|(mi, _)| mi.iter().sum::<u16>() == 2).map(|(_, c)| c.abs()).sum();
    let ok = (s.constant_term() - 1.0).abs() < 1e-14
        && s.coeff(&[0, 1, 0]) == 0.0
        && (s.coeff(&[0, 0, 1]) - 1.0).abs() < 1e-14
        && quad == 0.0
        && f.is_polynomial();
    if !ok {
        return Err(Error::Config("affine-exact initial data needs f = 1 + a*x1 + x3".into()));
    }
    Ok(a)
}

type Init<'a> = Box<dyn Fn([f64; 2]) -> Result<[f64; 2]> + 'a>;

fn initial_beta<'a>(f: &Expr, b: &'a Bindings, chart: &ChartData<f64>, init: &'a InitialData) -> Result<Init<'a>> {
    match init {
        InitialData::Potential(psi) => Ok(Box::new(move |x| {
            let (_, g) = psi.value_grad(b, [x[0], x[1], 0.0])?;
            Ok([g[0], g[1]])
        })),
        InitialData::AffineExact => {
            let a = affine_slope(f, b)?;
            let world = chart.world();
            let d = [1, 2].map(|v| world.clone().map(|w| w.derive(v)));
            Ok(Box::new(move |x| {
                let pt = [0.0, x[0], x[1]];
                let xw = [0, 1, 2].map(|i| world[i].eval(&pt));
                let u = affine_solution(a, [1.0, 0.0, 0.0 - a], xw)?;
                Ok([0, 1].map(|v| {
                    let dx = [0, 1, 2].map(|i| d[v][i].eval(&pt));
                    u[0] * dx[0] + u[1] * dx[1] + u[2] * dx[2]
                }))
            }))
        }
    }
}

/// Builds the chart at `p`, fills the grid and integrates to `t_max`.
pub fn run(f: &Expr, b: &Bindings, spec: &RunSpec) -> Result<DriftReport> {
    if !(spec.dt > 0.0 && spec.t_max >= 0.0) {
        return Err(Error::Grid(format!("need dt > 0 and t_max >= 0, got {} and {}", spec.dt, spec.t_max)));
    }
    let chart = build_chart::<f64>(f, b, &spec.p, spec.orders, FrameChoice::Auto)?;
    let mut grid = GridField::new(spec.n1, spec.n2, spec.h, spec.h)?;
    let tensors = node_tensors(&tensor_t(&chart), &grid, spec.patch)?;
    grid.fill(initial_beta(f, b, &chart, &spec.init)?)?;
    let steps = (spec.t_max / spec.dt).round() as usize;
    let mut rows = vec![DriftRow::of(&grid)];
    for k in 1..=steps {
        grid = step(&grid, &tensors, spec.dt)?;
        grid.t = k as f64 * spec.dt;
        rows.push(DriftRow::of(&grid));
    }
    Ok(DriftReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    const J: Mat2 = [[0.0, 1.0], [-1.0, 0.0]];

    fn small_grid() -> GridField {
        let mut g = GridField::new(5, 5, 0.1, 0.1).unwrap();
        g.fill(|x| Ok([1.0 + x[0], x[1] - 2.0])).unwrap();
        g
    }

    #[test]
    fn frozen_field() {
        let g = small_grid();
        let zero = vec![TimePoly::default(); 25];
        let next = step(&g, &zero, 0.05).unwrap();
        assert_eq!(next.beta, g.beta);
        assert_eq!(next.t, 0.05);
    }

    #[test]
    fn rotation_step_matches_closed_form() {
        // β' = (1+t) J β rotates β by the angle t + t²/2
        let tp = TimePoly { coeffs: vec![J, J] };
        let b0 = [1.0, 0.0];
        let mut errs = vec![];
        for dt in [0.1, 0.05] {
            let b = rk4_node(&tp, 0.0, b0, dt);
            let th = dt + dt * dt / 2.0;
            // exp(θJ) = cos θ I + sin θ J, J e1 = -e2 in row convention
            let want = [th.cos(), -th.sin()];
            errs.push(((b[0] - want[0]).powi(2) + (b[1] - want[1]).powi(2)).sqrt());
        }
        assert!(errs[0] < 1e-6);
        // local error O(dt^5)
        assert!(errs[0] / errs[1] > 20.0, "{errs:?}");
    }

    #[test]
    fn linear_in_beta() {
        let g = small_grid();
        let tp = TimePoly { coeffs: vec![J, [[0.3, 0.1], [0.2, -0.4]]] };
        let ts = vec![tp; 25];
        let mut g2 = g.clone();
        g2.beta.iter_mut().for_each(|b| *b = [3.0 * b[0], 3.0 * b[1]]);
        let a = step(&g, &ts, 0.1).unwrap();
        let c = step(&g2, &ts, 0.1).unwrap();
        for (x, y) in a.beta.iter().zip(&c.beta) {
            assert!((3.0 * x[0] - y[0]).abs() < 1e-14 && (3.0 * x[1] - y[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn drift_examples() {
        let mut g = GridField::new(7, 9, 0.1, 0.05).unwrap();
        // ψ = 2ξ1² - ξ1ξ2 + 3ξ2²
        g.fill(|x| Ok([4.0 * x[0] - x[1], -x[0] + 6.0 * x[1]])).unwrap();
        assert!(drift(&g).0 < 1e-12);
        g.fill(|x| Ok([0.0, x[0]])).unwrap();
        let (m, _) = drift(&g);
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(GridField::new(4, 5, 0.1, 0.1), Err(Error::Grid(_))));
        assert!(matches!(GridField::new(5, 5, 0.0, 0.1), Err(Error::Grid(_))));
    }

    #[test]
    fn csv_format() {
        let r = DriftReport {
            rows: vec![DriftRow { t: 0.1, max_drift: 1.0 / 3.0, l2_drift: 0.0, max_beta: 1.0, max_drift_normalized: 1.0 / 3.0 }],
        };
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let row = lines.next().unwrap();
        assert!(row.starts_with("1.0000000000000001e-1,3.3333333333333331e-1"), "{row}");
    }
}
