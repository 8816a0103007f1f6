use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::Func;
use crate::error::{Error, Result};
use crate::jets::{Series, Vars};

/// Arithmetic backend for [`super::Expr::eval_in`].
pub trait Domain {
    type Elem: Clone;

    fn lit(&self, q: &BigRational) -> Result<Self::Elem>;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem>;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem>;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem>;
    fn div(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem>;
    fn neg(&self, a: &Self::Elem) -> Result<Self::Elem>;
    fn powi(&self, a: &Self::Elem, n: u32) -> Result<Self::Elem>;
    fn func(&self, f: Func, a: &Self::Elem) -> Result<Self::Elem>;
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{what} is not finite")))
    }
}

/// IEEE doubles.
#[derive(Debug, Clone, Copy, Default)]
pub struct Float;

impl Domain for Float {
    type Elem = f64;

    fn lit(&self, q: &BigRational) -> Result<f64> {
        finite(q.to_f64().unwrap_or(f64::NAN), "literal")
    }
    fn add(&self, a: &f64, b: &f64) -> Result<f64> {
        Ok(a + b)
    }
    fn sub(&self, a: &f64, b: &f64) -> Result<f64> {
        Ok(a - b)
    }
    fn mul(&self, a: &f64, b: &f64) -> Result<f64> {
        Ok(a * b)
    }
    fn div(&self, a: &f64, b: &f64) -> Result<f64> {
        if *b == 0.0 {
            return Err(Error::Domain("division by zero".into()));
        }
        finite(a / b, "quotient")
    }
    fn neg(&self, a: &f64) -> Result<f64> {
        Ok(-a)
    }
    fn powi(&self, a: &f64, n: u32) -> Result<f64> {
        finite(a.powi(n as i32), "power")
    }
    fn func(&self, f: Func, a: &f64) -> Result<f64> {
        let v = match f {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Exp => a.exp(),
            Func::Log => {
                if *a <= 0.0 {
                    return Err(Error::Domain(format!("log of non-positive value {a}")));
                }
                a.ln()
            }
            Func::Sqrt => {
                if *a < 0.0 {
                    return Err(Error::Domain(format!("sqrt of negative value {a}")));
                }
                a.sqrt()
            }
        };
        finite(v, f.name())
    }
}

/// Exact rationals; transcendental calls succeed only in trivial cases.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exact;

impl Domain for Exact {
    type Elem = BigRational;

    fn lit(&self, q: &BigRational) -> Result<BigRational> {
        Ok(q.clone())
    }
    fn add(&self, a: &BigRational, b: &BigRational) -> Result<BigRational> {
        Ok(a + b)
    }
    fn sub(&self, a: &BigRational, b: &BigRational) -> Result<BigRational> {
        Ok(a - b)
    }
    fn mul(&self, a: &BigRational, b: &BigRational) -> Result<BigRational> {
        Ok(a * b)
    }
    fn div(&self, a: &BigRational, b: &BigRational) -> Result<BigRational> {
        if b.is_zero() {
            return Err(Error::Domain("division by zero".into()));
        }
        Ok(a / b)
    }
    fn neg(&self, a: &BigRational) -> Result<BigRational> {
        Ok(-a)
    }
    fn powi(&self, a: &BigRational, n: u32) -> Result<BigRational> {
        Ok(crate::coeff::Coeff::powi(a, n))
    }
    fn func(&self, f: Func, a: &BigRational) -> Result<BigRational> {
        let r = match f {
            Func::Sin => crate::coeff::Coeff::sin(a),
            Func::Cos => crate::coeff::Coeff::cos(a),
            Func::Exp => crate::coeff::Coeff::exp(a),
            Func::Log => crate::coeff::Coeff::ln(a),
            Func::Sqrt => crate::coeff::Coeff::sqrt(a),
        };
        r.ok_or_else(|| Error::Domain(format!("{}({a}) is not rational", f.name())))
    }
}

/// Truncated series in a fixed variable list and order.
#[derive(Debug, Clone)]
pub struct SeriesDomain<C> {
    vars: Vars,
    order: usize,
    _c: std::marker::PhantomData<C>,
}

impl<C: crate::coeff::Coeff> SeriesDomain<C> {
    pub fn new(vars: Vars, order: usize) -> Self {
        SeriesDomain {
            vars,
            order,
            _c: std::marker::PhantomData,
        }
    }
}

fn as_domain(e: Error) -> Error {
    match e {
        Error::ConstantTerm(m) => Error::Domain(m),
        other => other,
    }
}

impl<C: crate::coeff::Coeff> Domain for SeriesDomain<C> {
    type Elem = Series<C>;

    fn lit(&self, q: &BigRational) -> Result<Series<C>> {
        Ok(Series::constant(
            self.vars.clone(),
            self.order,
            C::from_rational(q),
        ))
    }
    fn add(&self, a: &Series<C>, b: &Series<C>) -> Result<Series<C>> {
        a.checked_add(b)
    }
    fn sub(&self, a: &Series<C>, b: &Series<C>) -> Result<Series<C>> {
        a.checked_sub(b)
    }
    fn mul(&self, a: &Series<C>, b: &Series<C>) -> Result<Series<C>> {
        a.checked_mul(b)
    }
    fn div(&self, a: &Series<C>, b: &Series<C>) -> Result<Series<C>> {
        a.div(b).map_err(as_domain)
    }
    fn neg(&self, a: &Series<C>) -> Result<Series<C>> {
        Ok(-a)
    }
    fn powi(&self, a: &Series<C>, n: u32) -> Result<Series<C>> {
        Ok(a.powi(n))
    }
    fn func(&self, f: Func, a: &Series<C>) -> Result<Series<C>> {
        match f {
            Func::Sin => a.sin_cos().map(|p| p.0),
            Func::Cos => a.sin_cos().map(|p| p.1),
            Func::Exp => a.exp(),
            Func::Log => a.ln(),
            Func::Sqrt => a.sqrt(),
        }
        .map_err(as_domain)
    }
}

/// Forward-mode gradient in the three coordinates over an inner domain.
#[derive(Debug, Clone)]
pub struct Dual<D> {
    inner: D,
}

impl<D: Domain> Dual<D> {
    pub fn new(inner: D) -> Self {
        Dual { inner }
    }

    /// The coordinate functions at `p`, each seeded with its unit gradient.
    pub fn coordinates(&self, p: [D::Elem; 3]) -> [(D::Elem, [D::Elem; 3]); 3]
    where
        D::Elem: Clone,
    {
        let zero = self.inner.lit(&BigRational::zero()).expect("zero literal");
        let one = self
            .inner
            .lit(&BigRational::from_integer(1.into()))
            .expect("unit literal");
        let mut out: Vec<(D::Elem, [D::Elem; 3])> = Vec::with_capacity(3);
        for (i, v) in p.into_iter().enumerate() {
            let mut g = [zero.clone(), zero.clone(), zero.clone()];
            g[i] = one.clone();
            out.push((v, g));
        }
        out.try_into().ok().expect("three coordinates")
    }

    /// `(a, da) ↦ (h(a), h'(a) da)`.
    fn chain(
        &self,
        a: &(D::Elem, [D::Elem; 3]),
        value: D::Elem,
        slope: D::Elem,
    ) -> Result<(D::Elem, [D::Elem; 3])> {
        let d = &self.inner;
        Ok((
            value,
            [
                d.mul(&slope, &a.1[0])?,
                d.mul(&slope, &a.1[1])?,
                d.mul(&slope, &a.1[2])?,
            ],
        ))
    }
}

impl<D: Domain> Domain for Dual<D> {
    type Elem = (D::Elem, [D::Elem; 3]);

    fn lit(&self, q: &BigRational) -> Result<Self::Elem> {
        let z = self.inner.lit(&BigRational::zero())?;
        Ok((self.inner.lit(q)?, [z.clone(), z.clone(), z]))
    }

    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem> {
        let d = &self.inner;
        Ok((
            d.add(&a.0, &b.0)?,
            [
                d.add(&a.1[0], &b.1[0])?,
                d.add(&a.1[1], &b.1[1])?,
                d.add(&a.1[2], &b.1[2])?,
            ],
        ))
    }

    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem> {
        let d = &self.inner;
        Ok((
            d.sub(&a.0, &b.0)?,
            [
                d.sub(&a.1[0], &b.1[0])?,
                d.sub(&a.1[1], &b.1[1])?,
                d.sub(&a.1[2], &b.1[2])?,
            ],
        ))
    }

    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem> {
        let d = &self.inner;
        let g = |k: usize| -> Result<D::Elem> {
            d.add(&d.mul(&a.1[k], &b.0)?, &d.mul(&a.0, &b.1[k])?)
        };
        Ok((d.mul(&a.0, &b.0)?, [g(0)?, g(1)?, g(2)?]))
    }

    fn div(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem> {
        let d = &self.inner;
        let q = d.div(&a.0, &b.0)?;
        // (a' - q b') / b
        let g = |k: usize| -> Result<D::Elem> {
            d.div(&d.sub(&a.1[k], &d.mul(&q, &b.1[k])?)?, &b.0)
        };
        Ok((q.clone(), [g(0)?, g(1)?, g(2)?]))
    }

    fn neg(&self, a: &Self::Elem) -> Result<Self::Elem> {
        let d = &self.inner;
        Ok((
            d.neg(&a.0)?,
            [d.neg(&a.1[0])?, d.neg(&a.1[1])?, d.neg(&a.1[2])?],
        ))
    }

    fn powi(&self, a: &Self::Elem, n: u32) -> Result<Self::Elem> {
        let d = &self.inner;
        if n == 0 {
            return self.lit(&BigRational::from_integer(1.into()));
        }
        let value = d.powi(&a.0, n)?;
        let nn = d.lit(&BigRational::from_integer(n.into()))?;
        let slope = d.mul(&nn, &d.powi(&a.0, n - 1)?)?;
        self.chain(a, value, slope)
    }

    fn func(&self, f: Func, a: &Self::Elem) -> Result<Self::Elem> {
        let d = &self.inner;
        let value = d.func(f, &a.0)?;
        let slope = match f {
            Func::Sin => d.func(Func::Cos, &a.0)?,
            Func::Cos => d.neg(&d.func(Func::Sin, &a.0)?)?,
            Func::Exp => value.clone(),
            Func::Log => d.div(&d.lit(&BigRational::from_integer(1.into()))?, &a.0)?,
            Func::Sqrt => {
                let two = d.lit(&BigRational::from_integer(2.into()))?;
                d.div(&d.lit(&BigRational::from_integer(1.into()))?, &d.mul(&two, &value)?)?
            }
        };
        self.chain(a, value, slope)
    }
}
