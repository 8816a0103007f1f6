//! Scalar and vector fields on ℝ³ given as expressions in `x1, x2, x3`.
//!
//! Expressions are parsed once and then evaluated in several domains:
//! plain `f64`, exact rationals, truncated series, and forward-mode
//! gradients over any of those (see [`Domain`]).

mod eval;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;
use num_traits::Signed;

pub use eval::{Domain, Dual, Exact, Float, SeriesDomain};
pub use parse::parse;

use crate::coeff::{format_rational, parse_rational, Coeff};
use crate::error::{Error, Result};
use crate::jets::{Jet, Series, Vars};

/// Largest jet order accepted by [`Expr::jet`] unless overridden.
pub const DEFAULT_MAX_ORDER: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

/// Expression tree of a scalar field.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    /// Coordinate `x1`, `x2` or `x3` (index 0, 1, 2).
    Var(usize),
    Num(BigRational),
    Param(String),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

/// Parameter values, kept exact so the rational mode can use them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings(BTreeMap<String, BigRational>);

impl Bindings {
    pub fn new() -> Bindings {
        Bindings::default()
    }

    pub fn with(mut self, name: &str, value: BigRational) -> Bindings {
        self.0.insert(name.to_string(), value);
        self
    }

    /// Binds a float exactly (every finite `f64` is a dyadic rational).
    pub fn with_f64(self, name: &str, value: f64) -> Bindings {
        let q = <BigRational as Coeff>::from_f64(value).expect("finite parameter value");
        self.with(name, q)
    }

    pub fn insert(&mut self, name: &str, value: BigRational) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<&BigRational> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BigRational)> {
        self.0.iter()
    }

    /// Parses `name=value` where value is an integer, decimal or `p/q`.
    pub fn parse_assignment(text: &str) -> Result<(String, BigRational)> {
        let (name, value) = text
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected name=value, got `{text}`")))?;
        let name = name.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::Config(format!("invalid parameter name `{name}`")));
        }
        let q = parse_rational(value)
            .ok_or_else(|| Error::Config(format!("invalid parameter value `{value}`")))?;
        Ok((name.to_string(), q))
    }
}

impl Expr {
    pub fn var(i: usize) -> Expr {
        assert!(i < 3);
        Expr::Var(i)
    }

    pub fn int(v: i64) -> Expr {
        Expr::Num(BigRational::from_integer(v.into()))
    }

    pub fn param(name: &str) -> Expr {
        Expr::Param(name.to_string())
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn pow(self, n: u32) -> Expr {
        Expr::Pow(Box::new(self), n)
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    /// Exact literal for a finite double; negative values become `Neg`.
    pub fn from_f64(v: f64) -> Expr {
        let q = BigRational::from_float(v).expect("finite literal");
        if q.is_negative() {
            Expr::Neg(Box::new(Expr::Num(-q)))
        } else {
            Expr::Num(q)
        }
    }

    /// Substitutes `subs[i]` for the coordinate `x{i+1}`.
    pub fn map_vars(&self, subs: &[Expr; 3]) -> Expr {
        match self {
            Expr::Var(i) => subs[*i].clone(),
            Expr::Num(_) | Expr::Param(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.map_vars(subs))),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.map_vars(subs))),
            Expr::Pow(a, n) => Expr::Pow(Box::new(a.map_vars(subs)), *n),
            Expr::Binary(op, x, y) => Expr::binary(*op, x.map_vars(subs), y.map_vars(subs)),
        }
    }

    /// Names of all parameters, sorted.
    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Param(p) = e {
                out.insert(p.clone());
            }
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Var(_) | Expr::Num(_) | Expr::Param(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) | Expr::Pow(a, _) => a.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// True when the expression is a polynomial in the coordinates with
    /// rational coefficients: no function calls and only constant divisors.
    pub fn is_polynomial(&self) -> bool {
        match self {
            Expr::Var(_) | Expr::Num(_) | Expr::Param(_) => true,
            Expr::Neg(a) | Expr::Pow(a, _) => a.is_polynomial(),
            Expr::Call(..) => false,
            Expr::Binary(BinOp::Div, a, b) => a.is_polynomial() && !b.has_vars() && b.is_polynomial(),
            Expr::Binary(_, a, b) => a.is_polynomial() && b.is_polynomial(),
        }
    }

    fn has_vars(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e, Expr::Var(_)));
        found
    }

    /// Replaces bound parameters by literals; unbound ones are kept.
    pub fn substitute(&self, b: &Bindings) -> Expr {
        match self {
            Expr::Param(p) => match b.get(p) {
                Some(q) if q.is_negative() => Expr::Neg(Box::new(Expr::Num(-q))),
                Some(q) => Expr::Num(q.clone()),
                None => self.clone(),
            },
            Expr::Var(_) | Expr::Num(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(b))),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.substitute(b))),
            Expr::Pow(a, n) => Expr::Pow(Box::new(a.substitute(b)), *n),
            Expr::Binary(op, x, y) => Expr::binary(*op, x.substitute(b), y.substitute(b)),
        }
    }

    /// Fails with `UnboundParameter` for the first parameter not in `b`.
    pub fn check_bound(&self, b: &Bindings) -> Result<()> {
        match self.params().into_iter().find(|p| b.get(p).is_none()) {
            Some(p) => Err(Error::UnboundParameter(p)),
            None => Ok(()),
        }
    }

    /// Evaluates in an arbitrary domain with the coordinates set to `vars`.
    pub fn eval_in<D: Domain>(&self, d: &D, vars: &[D::Elem; 3], b: &Bindings) -> Result<D::Elem> {
        Ok(match self {
            Expr::Var(i) => vars[*i].clone(),
            Expr::Num(q) => d.lit(q)?,
            Expr::Param(p) => d.lit(b.get(p).ok_or_else(|| Error::UnboundParameter(p.clone()))?)?,
            Expr::Neg(a) => d.neg(&a.eval_in(d, vars, b)?)?,
            Expr::Call(f, a) => d.func(*f, &a.eval_in(d, vars, b)?)?,
            Expr::Pow(a, n) => d.powi(&a.eval_in(d, vars, b)?, *n)?,
            Expr::Binary(op, x, y) => {
                let x = x.eval_in(d, vars, b)?;
                let y = y.eval_in(d, vars, b)?;
                match op {
                    BinOp::Add => d.add(&x, &y)?,
                    BinOp::Sub => d.sub(&x, &y)?,
                    BinOp::Mul => d.mul(&x, &y)?,
                    BinOp::Div => d.div(&x, &y)?,
                }
            }
        })
    }

    /// IEEE double value at `p`.
    pub fn eval(&self, b: &Bindings, p: [f64; 3]) -> Result<f64> {
        self.eval_in(&Float, &p, b)
    }

    /// Exact value at a rational point; fails on transcendental calls.
    pub fn eval_exact(&self, b: &Bindings, p: &[BigRational; 3]) -> Result<BigRational> {
        self.eval_in(&Exact, p, b)
    }

    /// Value and gradient at `p`.
    pub fn value_grad(&self, b: &Bindings, p: [f64; 3]) -> Result<(f64, [f64; 3])> {
        let d = Dual::new(Float);
        let vars = d.coordinates(p);
        self.eval_in(&d, &vars, b)
    }

    /// Value, gradient and Hessian at `p` by nested forward differentiation.
    pub fn value_grad_hess(&self, b: &Bindings, p: [f64; 3]) -> Result<(f64, [f64; 3], [[f64; 3]; 3])> {
        let inner = Dual::new(Float);
        let outer = Dual::new(inner.clone());
        let vars = outer.coordinates(inner.coordinates(p));
        let ((v, g), dg) = self.eval_in(&outer, &vars, b)?;
        Ok((v, g, dg.map(|row| row.1)))
    }

    /// Taylor expansion at `p` through total degree `order`, in the
    /// displacement variables `(x1, x2, x3)`.
    pub fn jet(&self, b: &Bindings, p: [f64; 3], order: usize) -> Result<Jet<f64>> {
        self.jet_in(b, &p, order, DEFAULT_MAX_ORDER)
    }

    /// Generic form of [`Expr::jet`] with an explicit order cap.
    pub fn jet_in<C: Coeff>(
        &self,
        b: &Bindings,
        p: &[C; 3],
        order: usize,
        max_order: usize,
    ) -> Result<Jet<C>> {
        if order > max_order {
            return Err(Error::OrderOverflow {
                requested: order,
                max: max_order,
            });
        }
        let vars = Vars::cartesian();
        let d = SeriesDomain::<C>::new(vars.clone(), order);
        let x = [0, 1, 2].map(|i| Series::variable(vars.clone(), order, i, p[i].clone()));
        let series = self.eval_in(&d, &x, b)?;
        Ok(Jet {
            base: p.to_vec(),
            series,
        })
    }
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(..) => 4,
        Expr::Num(q) if !q.is_integer() || q.is_negative() => 2,
        _ => 5,
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Num(q) if q.is_negative() => write!(f, "-{}", format_rational(&-q)),
            Expr::Num(q) => write!(f, "{}", format_rational(q)),
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_operand(f, a, 4)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Pow(a, n) => {
                write_operand(f, a, 5)?;
                write!(f, "^{n}")
            }
            Expr::Binary(op, a, b) => {
                let p = precedence(self);
                write_operand(f, a, p)?;
                write!(f, " {} ", op.symbol())?;
                // Left-associative: the right operand needs strictly higher precedence.
                write_operand(f, b, p + 1)
            }
        }
    }
}

macro_rules! expr_binop {
    ($tr:ident, $m:ident, $op:expr) => {
        impl std::ops::$tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::binary($op, self, rhs)
            }
        }
    };
}

expr_binop!(Add, add, BinOp::Add);
expr_binop!(Sub, sub, BinOp::Sub);
expr_binop!(Mul, mul, BinOp::Mul);
expr_binop!(Div, div, BinOp::Div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

/// A vector field `(u1, u2, u3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorExpr(pub [Expr; 3]);

impl VectorExpr {
    pub fn parse(components: [&str; 3]) -> Result<VectorExpr> {
        Ok(VectorExpr([
            parse(components[0])?,
            parse(components[1])?,
            parse(components[2])?,
        ]))
    }

    /// Parses `"(e1, e2, e3)"` or `"e1, e2, e3"`; commas inside function
    /// calls are not part of the grammar, so a plain split is enough.
    pub fn parse_tuple(text: &str) -> Result<VectorExpr> {
        let t = text.trim();
        let inner = t
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .filter(|s| s.split(',').count() == 3)
            .unwrap_or(t);
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Syntax {
                offset: 0,
                message: format!("a vector field needs 3 components, got {}", parts.len()),
            });
        }
        VectorExpr::parse([parts[0], parts[1], parts[2]])
    }

    pub fn eval(&self, b: &Bindings, p: [f64; 3]) -> Result<[f64; 3]> {
        Ok([
            self.0[0].eval(b, p)?,
            self.0[1].eval(b, p)?,
            self.0[2].eval(b, p)?,
        ])
    }
}
