//! The tensor `T`, its recursion `T_{n+1} = ∂_t T_n + T_n T`, the
//! constraint vectors `𝒯_n`, and the determinant obstructions.

use serde_json::json;

use crate::chart::{build_chart, ChartData, FrameChoice, Orders};
use crate::coeff::Coeff;
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr};
use crate::jets::{Series, SeriesMatrix2, Vars};

/// Indices of the primary obstruction `det(𝒯2, 𝒯3, 𝒯4, 𝒯5)`.
pub const PRIMARY_INDICES: [usize; 4] = [2, 3, 4, 5];

/// `T = (c0 + t) vol [[g¹², g²²], [-g¹¹, -g¹²]]`.
pub fn tensor_t<C: Coeff>(chart: &ChartData<C>) -> SeriesMatrix2<C> {
    let vol = &chart.vol;
    let t = Series::variable(vol.vars().clone(), vol.order(), 0, chart.base.c0.clone());
    let c = &t * vol;
    let gi = &chart.g_inv;
    let g12 = &c * &gi[0][1];
    SeriesMatrix2 {
        entries: [[g12.clone(), &c * &gi[1][1]], [-&(&c * &gi[0][0]), -&g12]],
    }
}

/// `[T_1, ..., T_n]`, each truncated one order lower than its predecessor.
pub fn tensor_hierarchy<C: Coeff>(t: &SeriesMatrix2<C>, n: usize) -> Result<Vec<SeriesMatrix2<C>>> {
    if n == 0 {
        return Err(Error::IndexViolation(vec![0]));
    }
    if n - 1 > t.order() {
        return Err(Error::BudgetExhausted {
            what: format!("T_{n}"),
            min_t: n,
            min_xi: 0,
        });
    }
    let mut out = vec![t.clone()];
    for _ in 1..n {
        let prev = out.last().expect("nonempty");
        let k = prev.order() - 1;
        let next = prev.derive(0).add(&prev.truncate(k).mat_mul(&t.truncate(k))?)?;
        out.push(next);
    }
    Ok(out)
}

/// `T_n` alone.
pub fn tensor_tn<C: Coeff>(t: &SeriesMatrix2<C>, n: usize) -> Result<SeriesMatrix2<C>> {
    Ok(tensor_hierarchy(t, n)?.pop().expect("nonempty"))
}

/// Four series sharing variables and order: a constraint vector `𝒯_n`, or
/// `Γ = (β1, β2, ∂1β1, ∂2β1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintVector4<C: Coeff> {
    pub components: [Series<C>; 4],
}

impl<C: Coeff> ConstraintVector4<C> {
    pub fn new(components: [Series<C>; 4]) -> Result<Self> {
        for c in &components[1..] {
            components[0].checked_add(c)?;
        }
        Ok(ConstraintVector4 { components })
    }

    pub fn order(&self) -> usize {
        self.components[0].order()
    }

    pub fn truncate(&self, order: usize) -> Self {
        ConstraintVector4 {
            components: self.components.clone().map(|c| c.truncate(order)),
        }
    }

    /// Restriction to `t = 0`, as series in `(xi1, xi2)`.
    pub fn slice_t0(&self) -> Self {
        ConstraintVector4 {
            components: self.components.clone().map(|c| c.slice_zero(0)),
        }
    }

    pub fn dot(&self, other: &Self) -> Result<Series<C>> {
        let mut acc = self.components[0].checked_mul(&other.components[0])?;
        for k in 1..4 {
            acc = acc.checked_add(&self.components[k].checked_mul(&other.components[k])?)?;
        }
        Ok(acc)
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(Series::max_abs).fold(0.0, f64::max)
    }
}

fn lead_reciprocal<C: Coeff>(t: &SeriesMatrix2<C>) -> Result<Series<C>> {
    let t21 = t.comp(2, 1);
    let c = t21.constant_term().abs_f64();
    if c < 1e-12 {
        return Err(Error::Division(format!("T^2_1 constant term {c:e} is below 1e-12")));
    }
    t21.reciprocal()
}

/// `(T_n)^2_1 / T^2_1` at the order of `tn`.
fn ratio<C: Coeff>(t: &SeriesMatrix2<C>, tn: &SeriesMatrix2<C>) -> Result<Series<C>> {
    let inv = lead_reciprocal(&t.truncate(tn.order()))?;
    tn.comp(2, 1).checked_mul(&inv)
}

/// `𝒯_n` from `T` and `T_n`; one order below `T_n` (spatial derivatives).
pub fn script_tn<C: Coeff>(t: &SeriesMatrix2<C>, tn: &SeriesMatrix2<C>) -> Result<ConstraintVector4<C>> {
    let k = tn.order();
    if k == 0 {
        return Err(Error::BudgetExhausted {
            what: "constraint vector".into(),
            min_t: 1,
            min_xi: 1,
        });
    }
    let t = t.truncate(k);
    let r = ratio(&t, tn)?.truncate(k - 1);
    let d = |m: &SeriesMatrix2<C>, up: usize, lo: usize, var: usize| m.comp(up, lo).derive(var);
    let low = |m: &SeriesMatrix2<C>, up: usize, lo: usize| m.comp(up, lo).truncate(k - 1);
    let curl1 = |m: &SeriesMatrix2<C>| &d(m, 1, 2, 1) - &d(m, 1, 1, 2);
    let curl2 = |m: &SeriesMatrix2<C>| &d(m, 2, 2, 1) - &d(m, 2, 1, 2);
    let c1 = &curl1(tn) - &(&r * &curl1(&t));
    let c2 = &curl2(tn) - &(&r * &curl2(&t));
    let c3 = &low(tn, 1, 2) - &(&r * &low(&t, 1, 2));
    let c4 = &(&low(tn, 2, 2) - &low(tn, 1, 1)) - &(&r * &(&low(&t, 2, 2) - &low(&t, 1, 1)));
    ConstraintVector4::new([c1, c2, c3, c4])
}

/// 2×2 minor of columns `i, j` in rows `a, b`.
fn minor<C: Coeff>(cols: &[&ConstraintVector4<C>; 4], a: usize, b: usize, i: usize, j: usize) -> Series<C> {
    &(&cols[i].components[a] * &cols[j].components[b]) - &(&cols[j].components[a] * &cols[i].components[b])
}

/// Determinant of the 4×4 matrix whose columns are the given vectors,
/// by Laplace expansion along the first two rows.
pub fn det4<C: Coeff>(cols: [&ConstraintVector4<C>; 4]) -> Result<Series<C>> {
    for c in &cols[1..] {
        cols[0].components[0].checked_add(&c.components[0])?;
    }
    let top = |i, j| minor(&cols, 0, 1, i, j);
    let bot = |i, j| minor(&cols, 2, 3, i, j);
    let terms = [
        (top(0, 1), bot(2, 3), false),
        (top(0, 2), bot(1, 3), true),
        (top(0, 3), bot(1, 2), false),
        (top(1, 2), bot(0, 3), false),
        (top(1, 3), bot(0, 2), true),
        (top(2, 3), bot(0, 1), false),
    ];
    let mut acc = Series::zero(cols[0].components[0].vars().clone(), cols[0].order());
    for (a, b, neg) in terms {
        let p = &a * &b;
        acc = if neg { &acc - &p } else { &acc + &p };
    }
    Ok(acc)
}

/// Restriction of `P_{ijkl}` to the initial level surface as a polynomial
/// in `(xi1, xi2)`.
#[derive(Debug, Clone)]
pub struct ObstructionPoly<C: Coeff> {
    pub poly: Series<C>,
    pub base_point: [C; 3],
    pub level: C,
    pub indices: [usize; 4],
    pub degree: usize,
    pub orders: Orders,
}

impl<C: Coeff> ObstructionPoly<C> {
    pub fn coeff(&self, mi: [u16; 2]) -> C {
        self.poly.coeff(&mi)
    }

    pub fn max_abs(&self) -> f64 {
        self.poly.max_abs()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let coeffs: Vec<_> = self
            .poly
            .terms()
            .map(|(mi, c)| json!({"mi": mi, "c": c.to_json()}))
            .collect();
        json!({
            "base_point": self.base_point.iter().map(Coeff::to_json).collect::<Vec<_>>(),
            "level": self.level.to_json(),
            "indices": self.indices,
            "degree": self.degree,
            "coeffs": coeffs,
            "orders": {"t": self.orders.t, "xi": self.orders.xi},
        })
    }
}

/// Checks `2 <= i < j < k < l`.
pub fn validate_indices(ix: &[usize]) -> Result<[usize; 4]> {
    let ok = ix.len() == 4 && ix[0] >= 2 && ix.windows(2).all(|w| w[0] < w[1]);
    if !ok {
        return Err(Error::IndexViolation(ix.to_vec()));
    }
    Ok([ix[0], ix[1], ix[2], ix[3]])
}

/// Smallest orders able to produce `P_{ijkl}` through ξ-degree `m`.
pub fn required_orders(indices: &[usize; 4], m: usize) -> Orders {
    Orders::new(indices[3] + 1, m)
}

fn check_budget(indices: &[usize; 4], m: usize, orders: Orders) -> Result<()> {
    let need = required_orders(indices, m);
    if orders.t < need.t || orders.xi < need.xi {
        return Err(Error::BudgetExhausted {
            what: format!("P{:?} through degree {m}", indices),
            min_t: need.t,
            min_xi: need.xi,
        });
    }
    Ok(())
}

/// Constraint vectors `𝒯_n` at `t = 0` for every requested `n`,
/// truncated at ξ-degree `m`.
pub fn sliced_constraints<C: Coeff>(
    chart: &ChartData<C>,
    ns: &[usize],
    m: usize,
) -> Result<Vec<ConstraintVector4<C>>> {
    let t = tensor_t(chart);
    let nmax = ns.iter().copied().max().unwrap_or(1);
    let hier = tensor_hierarchy(&t, nmax)?;
    ns.iter()
        .map(|&n| {
            let v = script_tn(&t, &hier[n - 1])?.slice_t0();
            if v.order() < m {
                return Err(Error::BudgetExhausted {
                    what: format!("constraint vector {n} through degree {m}"),
                    min_t: n + 1,
                    min_xi: m,
                });
            }
            Ok(v.truncate(m))
        })
        .collect()
}

/// `P_{ijkl}` from an existing chart.
pub fn obstruction_from_chart<C: Coeff>(
    chart: &ChartData<C>,
    indices: [usize; 4],
    m: usize,
) -> Result<ObstructionPoly<C>> {
    validate_indices(&indices)?;
    check_budget(&indices, m, chart.orders)?;
    let v = sliced_constraints(chart, &indices, m)?;
    let poly = det4([&v[0], &v[1], &v[2], &v[3]])?;
    Ok(ObstructionPoly {
        poly,
        base_point: chart.base.p.clone(),
        level: chart.base.c0.clone(),
        indices,
        degree: m,
        orders: chart.orders,
    })
}

/// Settings shared by the obstruction entry points.
#[derive(Debug, Clone, Copy, Default)]
pub struct ObstructionOptions {
    pub orders: Option<Orders>,
    pub frame: FrameChoice,
}

impl ObstructionOptions {
    fn orders_for(&self, indices: &[usize; 4], m: usize) -> Orders {
        self.orders.unwrap_or_else(|| {
            let d = Orders::default();
            let need = required_orders(indices, m);
            Orders::new(d.t.max(need.t), need.xi)
        })
    }
}

/// `P[f]|_Σ = det(𝒯2, 𝒯3, 𝒯4, 𝒯5)|_{t=0}` through ξ-degree `m`.
pub fn obstruction_p<C: Coeff>(
    f: &Expr,
    b: &Bindings,
    p: &[C; 3],
    m: usize,
    opts: ObstructionOptions,
) -> Result<ObstructionPoly<C>> {
    obstruction_pijkl(f, b, p, &PRIMARY_INDICES, m, opts)
}

/// `P_{ijkl}[f]|_Σ = det(𝒯i, 𝒯j, 𝒯k, 𝒯l)|_{t=0}` through ξ-degree `m`.
pub fn obstruction_pijkl<C: Coeff>(
    f: &Expr,
    b: &Bindings,
    p: &[C; 3],
    indices: &[usize],
    m: usize,
    opts: ObstructionOptions,
) -> Result<ObstructionPoly<C>> {
    let indices = validate_indices(indices)?;
    let orders = opts.orders_for(&indices, m);
    check_budget(&indices, m, orders)?;
    let chart = build_chart(f, b, p, orders, opts.frame)?;
    obstruction_from_chart(&chart, indices, m)
}

/// `β = dψ` for a potential `ψ(t, xi1, xi2)`: `(β1, β2)`.
pub fn exact_form<C: Coeff>(psi: &Series<C>) -> [Series<C>; 2] {
    [psi.derive(1), psi.derive(2)]
}

/// Coefficient of `d(T_n β)` on `dξ1 ∧ dξ2`, `∂1 (T_n β)_2 - ∂2 (T_n β)_1`,
/// with `β = dψ`.
pub fn dt_beta<C: Coeff>(tn: &SeriesMatrix2<C>, psi: &Series<C>) -> Result<Series<C>> {
    let beta = exact_form(psi);
    let k = tn.order().min(beta[0].order());
    let tb = tn.truncate(k).apply(&[beta[0].truncate(k), beta[1].truncate(k)])?;
    Ok(&tb[1].derive(1) - &tb[0].derive(2))
}

/// `Γ = (β1, β2, ∂1β1, ∂2β1)` for `β = dψ`, at the given order.
pub fn gamma<C: Coeff>(psi: &Series<C>, order: usize) -> Result<ConstraintVector4<C>> {
    let [b1, b2] = exact_form(psi);
    let d11 = b1.derive(1);
    let d21 = b1.derive(2);
    ConstraintVector4::new([
        b1.truncate(order),
        b2.truncate(order),
        d11.truncate(order),
        d21.truncate(order),
    ])
}

/// `d(T_n β)` assembled as `𝒯_n · Γ + ((T_n)^2_1 / T^2_1) d(Tβ)`.
///
/// The second term is the part of `d(T_n β)` carried by `∂2β2` after it is
/// eliminated through `d(Tβ)`; it drops out whenever `d(Tβ) = 0`.
pub fn dt_beta_via_constraints<C: Coeff>(
    t: &SeriesMatrix2<C>,
    tn: &SeriesMatrix2<C>,
    psi: &Series<C>,
) -> Result<Series<C>> {
    let sc = script_tn(t, tn)?;
    let k = sc.order().min(psi.order().saturating_sub(2));
    let g = gamma(psi, k)?;
    let main = sc.truncate(k).dot(&g)?;
    let r = ratio(&t.truncate(tn.order()), tn)?.truncate(k);
    let d1 = dt_beta(&t.truncate(tn.order()), psi)?.truncate(k);
    main.checked_add(&r.checked_mul(&d1)?)
}

/// `d(Tβ)` for `β = dψ` in divergence form,
/// `-(c0 + t) ∂_i(χ |g|^{1/2} g^{ij} ∂_j ψ)`.
pub fn dt_beta_laplacian<C: Coeff>(chart: &ChartData<C>, psi: &Series<C>) -> Result<Series<C>> {
    let vol = &chart.vol;
    let k = vol.order().min(psi.order() - 1);
    let w = vol.truncate(k);
    let beta = exact_form(psi).map(|b| b.truncate(k));
    let gi = chart.g_inv.clone().map(|r| r.map(|s| s.truncate(k)));
    let flux = [0, 1].map(|i| &w * &(&(&gi[i][0] * &beta[0]) + &(&gi[i][1] * &beta[1])));
    let div = &flux[0].derive(1) + &flux[1].derive(2);
    let t = Series::variable(Vars::txi(), k - 1, 0, chart.base.c0.clone());
    Ok(-&(&t * &div))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn zero3() -> [BigRational; 3] {
        [q(0, 1), q(0, 1), q(0, 1)]
    }

    fn chart(src: &str, b: &Bindings, orders: Orders) -> ChartData<BigRational> {
        build_chart(&parse(src).unwrap(), b, &zero3(), orders, FrameChoice::Graph).unwrap()
    }

    #[test]
    fn flat_tensor_is_scaled_rotation() {
        let c = chart("1 + x3", &Bindings::new(), Orders::new(3, 2));
        let t = tensor_t(&c);
        let v = Vars::txi();
        let one_t = Series::variable(v.clone(), 4, 0, q(1, 1));
        let j = SeriesMatrix2::rotation(v, 4).scale(&one_t).unwrap();
        assert_eq!(t, j);
    }

    #[test]
    fn flat_second_tensor() {
        // T2 = J + (1+t)² J² = J - (1+t)² I
        let c = chart("1 + x3", &Bindings::new(), Orders::new(3, 2));
        let t = tensor_t(&c);
        let t2 = tensor_tn(&t, 2).unwrap();
        let v = Vars::txi();
        let s = Series::variable(v.clone(), 3, 0, q(1, 1));
        let a2 = -&(&s * &s);
        let want = SeriesMatrix2::rotation(v.clone(), 3)
            .add(&SeriesMatrix2::identity(v, 3).scale(&a2).unwrap())
            .unwrap();
        assert_eq!(t2, want);
    }

    #[test]
    fn affine_family_constraints_vanish() {
        for a in [0, 1, 3] {
            let b = Bindings::new().with("a", q(a, 1));
            let c = chart("1 + a*x1 + x3", &b, Orders::new(6, 2));
            let t = tensor_t(&c);
            let hier = tensor_hierarchy(&t, 5).unwrap();
            for tn in &hier {
                let sc = script_tn(&t, tn).unwrap();
                assert!(sc.components.iter().all(Series::is_zero), "a={a}");
            }
        }
    }

    #[test]
    fn first_constraint_vector_is_zero() {
        let b = Bindings::new();
        let c = chart("1 + x1^2 - x1*x2 + 2*x3 + x2*x3^2", &b, Orders::new(2, 3));
        let t = tensor_t(&c);
        assert!(script_tn(&t, &t).unwrap().components.iter().all(Series::is_zero));
    }

    #[test]
    fn index_and_budget_errors() {
        let f = parse("1 + x3").unwrap();
        let b = Bindings::new();
        let opts = ObstructionOptions::default();
        assert!(matches!(
            obstruction_pijkl::<f64>(&f, &b, &[0.0; 3], &[3, 2, 4, 5], 1, opts),
            Err(Error::IndexViolation(_))
        ));
        assert!(matches!(
            obstruction_pijkl::<f64>(&f, &b, &[0.0; 3], &[1, 2, 4, 5], 1, opts),
            Err(Error::IndexViolation(_))
        ));
        let tight = ObstructionOptions {
            orders: Some(Orders::new(5, 2)),
            ..opts
        };
        assert!(matches!(
            obstruction_p::<f64>(&f, &b, &[0.0; 3], 2, tight),
            Err(Error::BudgetExhausted { min_t: 6, min_xi: 2, .. })
        ));
    }

    #[test]
    fn cubic_family_leading_coefficient() {
        let f = parse("1 + a*x1 + b*x1^3 + x3").unwrap();
        let b = Bindings::new().with("a", q(1, 1)).with("b", q(1, 1));
        let opts = ObstructionOptions {
            frame: FrameChoice::Graph,
            ..Default::default()
        };
        let p = obstruction_p(&f, &b, &zero3(), 1, opts).unwrap();
        assert_eq!(p.coeff([0, 0]), q(-81, 4));
        assert_eq!(p.coeff([1, 0]), q(567, 8));
    }

    #[test]
    fn flat_laplacian() {
        // f = 1 + x3, ψ = ξ1² + ξ2²: d(Tβ) = -4(1+t)
        let c = chart("1 + x3", &Bindings::new(), Orders::new(3, 3));
        let v = Vars::txi();
        let psi = Series::from_terms(v.clone(), 5, [(vec![0, 2, 0], q(1, 1)), (vec![0, 0, 2], q(1, 1))]).unwrap();
        let t = tensor_t(&c);
        let want = Series::variable(v, 3, 0, q(1, 1)).scale(&q(-4, 1));
        assert_eq!(dt_beta(&t, &psi).unwrap().truncate(3), want);
        assert_eq!(dt_beta_laplacian(&c, &psi).unwrap().truncate(3), want);
    }
}
