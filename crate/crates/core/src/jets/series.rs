use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::json;

use super::layout::{layout, Layout};
use crate::coeff::Coeff;
use crate::error::{Error, Result};

/// Ordered variable names of a series. Cheap to clone.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Vars(Arc<[String]>);

impl Vars {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Vars {
        Vars(names.iter().map(|s| s.as_ref().to_string()).collect())
    }

    /// `(t, xi1, xi2)`, the flow-adapted coordinates.
    pub fn txi() -> Vars {
        Vars::new(&["t", "xi1", "xi2"])
    }

    /// `(xi1, xi2)`, coordinates on the initial level surface.
    pub fn xi() -> Vars {
        Vars::new(&["xi1", "xi2"])
    }

    /// `(x1, x2, x3)`, Cartesian coordinates.
    pub fn cartesian() -> Vars {
        Vars::new(&["x1", "x2", "x3"])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    fn same(&self, other: &Vars) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl fmt::Debug for Vars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// Multivariate Taylor polynomial truncated at total degree `order`.
///
/// Coefficients are stored densely in graded-lex order (see [`Layout`]).
/// Binary operations require identical variable lists and orders; use
/// [`Series::truncate`] to bring operands to a common order explicitly.
#[derive(Clone)]
pub struct Series<C> {
    vars: Vars,
    layout: Arc<Layout>,
    coeffs: Vec<C>,
}

impl<C: Coeff> Series<C> {
    pub fn zero(vars: Vars, order: usize) -> Series<C> {
        let layout = layout(vars.len(), order);
        let coeffs = vec![C::zero(); layout.len()];
        Series {
            vars,
            layout,
            coeffs,
        }
    }

    pub fn constant(vars: Vars, order: usize, value: C) -> Series<C> {
        let mut s = Series::zero(vars, order);
        s.coeffs[0] = value;
        s
    }

    /// The coordinate function `value + var`.
    pub fn variable(vars: Vars, order: usize, var: usize, value: C) -> Series<C> {
        let mut s = Series::constant(vars, order, value);
        if order >= 1 {
            s.coeffs[1 + var] = C::one();
        }
        s
    }

    /// Builds a series from `(exponents, coefficient)` pairs; terms above
    /// `order` are dropped.
    pub fn from_terms<I>(vars: Vars, order: usize, terms: I) -> Result<Series<C>>
    where
        I: IntoIterator<Item = (Vec<u16>, C)>,
    {
        let mut s = Series::<C>::zero(vars, order);
        for (exps, c) in terms {
            if exps.len() != s.vars.len() {
                return Err(Error::Domain(format!(
                    "multi-index {exps:?} does not match {} variables",
                    s.vars.len()
                )));
            }
            if exps.iter().map(|&e| e as usize).sum::<usize>() > order {
                continue;
            }
            let i = s.layout.index_of(&exps).expect("degree checked");
            s.coeffs[i].add_assign(&c);
        }
        Ok(s)
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    /// Coefficient of the monomial with the given exponents; zero when the
    /// monomial lies above the truncation order.
    pub fn coeff(&self, exps: &[u16]) -> C {
        self.layout
            .index_of(exps)
            .map(|i| self.coeffs[i].clone())
            .unwrap_or_else(C::zero)
    }

    pub fn set_coeff(&mut self, exps: &[u16], value: C) {
        let i = self
            .layout
            .index_of(exps)
            .expect("monomial above truncation order");
        self.coeffs[i] = value;
    }

    pub fn constant_term(&self) -> &C {
        &self.coeffs[0]
    }

    /// `(exponents, coefficient)` pairs in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u16], &C)> {
        (0..self.coeffs.len()).map(move |i| (self.layout.exponents(i), &self.coeffs[i]))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Coeff::is_zero)
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(Coeff::abs_f64).fold(0.0, f64::max)
    }

    fn check(&self, other: &Series<C>) -> Result<()> {
        if !self.vars.same(&other.vars) {
            return Err(Error::VariableMismatch {
                left: self.vars.names().to_vec(),
                right: other.vars.names().to_vec(),
            });
        }
        if self.order() != other.order() {
            return Err(Error::OrderMismatch {
                left: self.order(),
                right: other.order(),
            });
        }
        Ok(())
    }

    fn with_coeffs(&self, coeffs: Vec<C>) -> Series<C> {
        Series {
            vars: self.vars.clone(),
            layout: self.layout.clone(),
            coeffs,
        }
    }

    pub fn checked_add(&self, other: &Series<C>) -> Result<Series<C>> {
        self.check(other)?;
        Ok(self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.add(b))
                .collect(),
        ))
    }

    pub fn checked_sub(&self, other: &Series<C>) -> Result<Series<C>> {
        self.check(other)?;
        Ok(self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.sub(b))
                .collect(),
        ))
    }

    pub fn checked_mul(&self, other: &Series<C>) -> Result<Series<C>> {
        self.check(other)?;
        let mut out = vec![C::zero(); self.coeffs.len()];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &k) in self.layout.products(i).iter().enumerate() {
                out[k as usize].mul_add_assign(a, &other.coeffs[j]);
            }
        }
        Ok(self.with_coeffs(out))
    }

    pub fn scale(&self, c: &C) -> Series<C> {
        self.with_coeffs(self.coeffs.iter().map(|a| a.mul(c)).collect())
    }

    pub fn add_scalar(&self, c: &C) -> Series<C> {
        let mut s = self.clone();
        s.coeffs[0] = s.coeffs[0].add(c);
        s
    }

    /// Same variables, lower (or equal) truncation order.
    pub fn truncate(&self, order: usize) -> Series<C> {
        assert!(order <= self.order(), "truncate cannot raise the order");
        if order == self.order() {
            return self.clone();
        }
        let layout = layout(self.vars.len(), order);
        let n = layout.len();
        Series {
            vars: self.vars.clone(),
            layout,
            coeffs: self.coeffs[..n].to_vec(),
        }
    }

    /// Formal partial derivative; the result has order `K - 1`.
    pub fn derive(&self, var: usize) -> Series<C> {
        assert!(self.order() >= 1, "derivative of an order-0 series");
        assert!(var < self.vars.len(), "variable index out of range");
        let mut out = Series::zero(self.vars.clone(), self.order() - 1);
        let mut buf = vec![0u16; self.vars.len()];
        for i in 0..self.coeffs.len() {
            let e = self.layout.exponents(i);
            if e[var] == 0 || self.coeffs[i].is_zero() {
                continue;
            }
            buf.copy_from_slice(e);
            buf[var] -= 1;
            let k = out.layout.index_of(&buf).expect("degree drops by one");
            out.coeffs[k] = self.coeffs[i].mul(&C::from_i64(e[var] as i64));
        }
        out
    }

    /// Derivative by variable name.
    pub fn derive_by(&self, name: &str) -> Result<Series<C>> {
        let var = self
            .vars
            .position(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        if self.order() == 0 {
            return Err(Error::OrderOverflow {
                requested: 1,
                max: 0,
            });
        }
        Ok(self.derive(var))
    }

    /// Antiderivative vanishing on `var = 0`; the result has order `K + 1`.
    pub fn integrate(&self, var: usize) -> Series<C> {
        let mut out = Series::zero(self.vars.clone(), self.order() + 1);
        let mut buf = vec![0u16; self.vars.len()];
        for i in 0..self.coeffs.len() {
            if self.coeffs[i].is_zero() {
                continue;
            }
            buf.copy_from_slice(self.layout.exponents(i));
            buf[var] += 1;
            let k = out.layout.index_of(&buf).expect("degree rises by one");
            out.coeffs[k] = self.coeffs[i].div(&C::from_i64(buf[var] as i64));
        }
        out
    }

    /// Sets `var = 0` and drops it from the variable list.
    pub fn slice_zero(&self, var: usize) -> Series<C> {
        let names: Vec<&String> = self
            .vars
            .names()
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != var)
            .map(|(_, n)| n)
            .collect();
        let vars = Vars::new(&names);
        let mut out = Series::zero(vars, self.order());
        let mut buf = Vec::with_capacity(names.len());
        for i in 0..self.coeffs.len() {
            let e = self.layout.exponents(i);
            if e[var] != 0 {
                continue;
            }
            buf.clear();
            buf.extend(e.iter().enumerate().filter(|&(j, _)| j != var).map(|(_, &x)| x));
            let k = out.layout.index_of(&buf).expect("same degree");
            out.coeffs[k] = self.coeffs[i].clone();
        }
        out
    }

    /// Re-expresses the series in a larger variable list; `map[i]` is the
    /// position of this series' variable `i` in `vars`.
    pub fn embed(&self, vars: Vars, map: &[usize]) -> Series<C> {
        assert_eq!(map.len(), self.vars.len());
        let mut out = Series::zero(vars, self.order());
        let mut buf = vec![0u16; out.vars.len()];
        for i in 0..self.coeffs.len() {
            buf.iter_mut().for_each(|b| *b = 0);
            for (j, &e) in self.layout.exponents(i).iter().enumerate() {
                buf[map[j]] = e;
            }
            let k = out.layout.index_of(&buf).expect("same degree");
            out.coeffs[k] = self.coeffs[i].clone();
        }
        out
    }

    /// Evaluates the truncated polynomial at `point` (one value per variable).
    pub fn eval(&self, point: &[C]) -> C {
        assert_eq!(point.len(), self.vars.len());
        // Monomial values built incrementally: each monomial is a parent
        // monomial times one variable.
        let n = self.coeffs.len();
        let mut mono = Vec::with_capacity(n);
        mono.push(C::one());
        let mut acc = self.coeffs[0].clone();
        for i in 1..n {
            let (parent, v) = self.layout.parent(i);
            let m = mono[parent].mul(&point[v]);
            acc.mul_add_assign(&self.coeffs[i], &m);
            mono.push(m);
        }
        acc
    }

    /// Substitutes `subs[i]` for variable `i`. The substituted series must
    /// have zero constant terms; the result lives in their variables at
    /// `min(self.order, subs.order)`.
    pub fn compose(&self, subs: &[Series<C>]) -> Result<Series<C>> {
        if subs.len() != self.vars.len() {
            return Err(Error::Domain(format!(
                "composition needs {} series, got {}",
                self.vars.len(),
                subs.len()
            )));
        }
        for s in &subs[1..] {
            subs[0].check(s)?;
        }
        if subs.iter().any(|s| !s.constant_term().is_zero()) {
            return Err(Error::Domain(
                "substituted series must vanish at the origin".into(),
            ));
        }
        let order = self.order().min(subs[0].order());
        let subs: Vec<Series<C>> = subs.iter().map(|s| s.truncate(order)).collect();
        let mut acc = Series::constant(subs[0].vars.clone(), order, self.coeffs[0].clone());
        let n = self.layout.count_upto(order);
        let mut mono: Vec<Series<C>> = Vec::with_capacity(n);
        mono.push(Series::constant(subs[0].vars.clone(), order, C::one()));
        for i in 1..n {
            let (parent, v) = self.layout.parent(i);
            let m = &mono[parent] * &subs[v];
            if !self.coeffs[i].is_zero() {
                acc = &acc + &m.scale(&self.coeffs[i]);
            }
            mono.push(m);
        }
        Ok(acc)
    }

    /// Evaluates `sum coeffs[k] * w^k` by Horner's rule; `w` must vanish at
    /// the origin so the truncation is exact.
    fn horner(w: &Series<C>, coeffs: &[C]) -> Series<C> {
        let mut acc = Series::constant(w.vars.clone(), w.order(), coeffs[coeffs.len() - 1].clone());
        for c in coeffs[..coeffs.len() - 1].iter().rev() {
            acc = (&acc * w).add_scalar(c);
        }
        acc
    }

    fn centered(&self) -> Series<C> {
        let mut u = self.clone();
        u.coeffs[0] = C::zero();
        u
    }

    pub fn reciprocal(&self) -> Result<Series<C>> {
        let c0 = self.constant_term().clone();
        if c0.is_zero() {
            return Err(Error::ConstantTerm("is zero; reciprocal undefined".into()));
        }
        let inv = C::one().div(&c0);
        let w = self.centered().scale(&inv.neg());
        let ones = vec![C::one(); self.order() + 1];
        Ok(Self::horner(&w, &ones).scale(&inv))
    }

    pub fn div(&self, other: &Series<C>) -> Result<Series<C>> {
        self.checked_mul(&other.reciprocal()?)
    }

    pub fn sqrt(&self) -> Result<Series<C>> {
        let c0 = self.constant_term().clone();
        if c0.to_f64() <= 0.0 || c0.is_zero() {
            return Err(Error::ConstantTerm(format!(
                "{c0} is not strictly positive; sqrt undefined"
            )));
        }
        let root = c0.sqrt().ok_or_else(|| {
            Error::Domain(format!("sqrt({c0}) is not representable exactly"))
        })?;
        let w = self.centered().scale(&C::one().div(&c0));
        // binom(1/2, k)
        let mut coeffs = Vec::with_capacity(self.order() + 1);
        let mut b = BigRational::from_integer(BigInt::from(1));
        for k in 0..=self.order() {
            coeffs.push(C::from_rational(&b));
            let k = k as i64;
            b *= BigRational::new(BigInt::from(1 - 2 * k), BigInt::from(2 * (k + 1)));
        }
        Ok(Self::horner(&w, &coeffs).scale(&root))
    }

    pub fn exp(&self) -> Result<Series<C>> {
        let c0 = self.constant_term();
        let e0 = c0
            .exp()
            .ok_or_else(|| Error::Domain(format!("exp({c0}) is not representable exactly")))?;
        let coeffs = inverse_factorials::<C>(self.order());
        Ok(Self::horner(&self.centered(), &coeffs).scale(&e0))
    }

    pub fn ln(&self) -> Result<Series<C>> {
        let c0 = self.constant_term().clone();
        if c0.to_f64() <= 0.0 {
            return Err(Error::Domain(format!("log of non-positive value {c0}")));
        }
        let l0 = c0
            .ln()
            .ok_or_else(|| Error::Domain(format!("log({c0}) is not representable exactly")))?;
        let w = self.centered().scale(&C::one().div(&c0));
        let mut coeffs = vec![C::zero()];
        for k in 1..=self.order() as i64 {
            let sign = if k % 2 == 1 { 1 } else { -1 };
            coeffs.push(C::from_rational(&BigRational::new(sign.into(), k.into())));
        }
        Ok(Self::horner(&w, &coeffs).add_scalar(&l0))
    }

    /// `(sin, cos)` of the series.
    pub fn sin_cos(&self) -> Result<(Series<C>, Series<C>)> {
        let c0 = self.constant_term();
        let (s0, k0) = match (c0.sin(), c0.cos()) {
            (Some(s), Some(c)) => (s, c),
            _ => {
                return Err(Error::Domain(format!(
                    "sin/cos({c0}) is not representable exactly"
                )))
            }
        };
        let facts = inverse_factorials::<C>(self.order());
        let mut sin_c = vec![C::zero(); facts.len()];
        let mut cos_c = vec![C::zero(); facts.len()];
        for (k, f) in facts.iter().enumerate() {
            let v = if (k / 2) % 2 == 0 { f.clone() } else { f.neg() };
            if k % 2 == 0 {
                cos_c[k] = v;
            } else {
                sin_c[k] = v;
            }
        }
        let u = self.centered();
        let su = Self::horner(&u, &sin_c);
        let cu = Self::horner(&u, &cos_c);
        let sin = &su.scale(&k0) + &cu.scale(&s0);
        let cos = &cu.scale(&k0) - &su.scale(&s0);
        Ok((sin, cos))
    }

    pub fn powi(&self, n: u32) -> Series<C> {
        let mut acc = Series::constant(self.vars.clone(), self.order(), C::one());
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Converts coefficients to `f64`.
    pub fn to_f64(&self) -> Series<f64> {
        Series {
            vars: self.vars.clone(),
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(Coeff::to_f64).collect(),
        }
    }

    /// Debug JSON: `{"vars":[...], "order":K, "coeffs":[{"mi":[..],"c":v},...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let coeffs: Vec<serde_json::Value> = self
            .terms()
            .map(|(mi, c)| json!({ "mi": mi, "c": c.to_json() }))
            .collect();
        json!({ "vars": self.vars.names(), "order": self.order(), "coeffs": coeffs })
    }
}

fn inverse_factorials<C: Coeff>(order: usize) -> Vec<C> {
    let mut out = Vec::with_capacity(order + 1);
    let mut f = BigInt::from(1);
    for k in 0..=order {
        if k > 0 {
            f *= BigInt::from(k);
        }
        out.push(C::from_rational(&BigRational::new(1.into(), f.clone())));
    }
    out
}

impl<C: Coeff> fmt::Debug for Series<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Series{:?}[K={}](", self.vars, self.order())?;
        let mut first = true;
        for (mi, c) in self.terms() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}*{mi:?}")?;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, ")")
    }
}

impl<C: Coeff> PartialEq for Series<C> {
    fn eq(&self, other: &Self) -> bool {
        self.vars.same(&other.vars) && self.order() == other.order() && self.coeffs == other.coeffs
    }
}

// Operator forms panic on shape mismatch; the `checked_*` methods report it.

impl<C: Coeff> Add for &Series<C> {
    type Output = Series<C>;
    fn add(self, rhs: &Series<C>) -> Series<C> {
        self.checked_add(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<C: Coeff> Sub for &Series<C> {
    type Output = Series<C>;
    fn sub(self, rhs: &Series<C>) -> Series<C> {
        self.checked_sub(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<C: Coeff> Mul for &Series<C> {
    type Output = Series<C>;
    fn mul(self, rhs: &Series<C>) -> Series<C> {
        self.checked_mul(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<C: Coeff> Neg for &Series<C> {
    type Output = Series<C>;
    fn neg(self) -> Series<C> {
        self.with_coeffs(self.coeffs.iter().map(Coeff::neg).collect())
    }
}
