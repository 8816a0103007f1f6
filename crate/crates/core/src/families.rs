//! Closed-form reference values for the two test families and the
//! comparison reports built on them.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::chart::{FrameChoice, Orders};
use crate::coeff::{format_rational, Coeff};
use crate::error::Result;
use crate::expr::{parse, Bindings};
use crate::obstruction::{obstruction_p, ObstructionOptions, ObstructionPoly};

pub const CUBIC_FAMILY: &str = "1 + a*x1 + b*x1^3 + x3";
pub const QUADRATIC_FAMILY: &str = "1 + x1^2 + a*x2^2 + x3";
pub const AFFINE_FAMILY: &str = "1 + a*x1 + x3";

/// Relative tolerance for floating-point comparisons against closed forms.
pub const REL_TOL: f64 = 1e-9;
/// Absolute tolerance when the reference value is zero.
pub const ZERO_TOL: f64 = 1e-10;

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn poly(x: &BigRational, coeffs: &[i64]) -> BigRational {
    let mut acc = <BigRational as Zero>::zero();
    for c in coeffs.iter().rev() {
        acc = acc * x + int(*c);
    }
    acc
}

fn pow(x: &BigRational, n: u32) -> BigRational {
    Coeff::powi(x, n)
}

/// `c0..c3` of `P` along `ξ1` for `f = 1 + a x1 + b x1³ + x3` at the origin.
pub fn cubic_reference(a: &BigRational, b: &BigRational) -> [BigRational; 4] {
    let s = int(1) + a * a;
    let a2 = a * a;
    let ab = a * b;
    let s14 = pow(&s, 14);
    let s15 = pow(&s, 15);
    let b4 = pow(b, 4);
    let b5 = pow(b, 5);
    let c0 = -int(5184) * &a2 * &b4
        * (int(15) * pow(a, 4) + int(14) * &a2 + int(36) * &ab - int(1))
        / &s14;
    let c1 = -int(20736) * &a2 * &b4
        * (int(8) * pow(a, 3) - int(63) * &a2 * b + int(8) * a - int(9) * b)
        / &s14;
    let c2 = int(31104) * a * &b5
        * (int(169) * pow(a, 6) + int(97) * pow(a, 4) + int(468) * pow(a, 3) * b
            - int(73) * &a2
            - int(36) * &ab
            - int(1))
        / &s15;
    let c3 = int(124416) * &a2 * &b5
        * (int(84) * pow(a, 4) - int(771) * pow(a, 3) * b + int(68) * &a2 - int(15) * &ab - int(16))
        / &s15;
    [c0, c1, c2, c3]
}

/// `c4` of the cubic family at `a = 0`, where only its `b⁶` term survives.
pub fn cubic_c4_at_zero(b: &BigRational) -> BigRational {
    int(46656) * pow(b, 6)
}

/// Coefficients of `ξ1², ξ1ξ2, ξ2²` in `P` for `f = 1 + x1² + a x2² + x3`.
pub fn quadratic_reference(a: &BigRational) -> [BigRational; 3] {
    let pre = int(1024) * pow(&(a - int(1)), 2);
    let q11 = &pre * poly(a, &[33, 128, 312, 224, 768, -256]);
    let q12 = -&pre * int(16) * a * a * poly(a, &[3, 11, 66, -88, 8]);
    let q22 = &pre * pow(a, 4) * poly(a, &[-39, -24, 760, 640, -128]);
    [q11, q12, q22]
}

/// Arithmetic used for a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Double,
    Rational,
}

impl std::str::FromStr for Mode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "double" => Ok(Mode::Double),
            "rational" => Ok(Mode::Rational),
            _ => Err(crate::Error::Config(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientCheck {
    pub name: String,
    pub mi: [u16; 2],
    pub computed: serde_json::Value,
    pub reference: String,
    pub abs_error: f64,
    pub rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyReport {
    pub family: String,
    pub params: Vec<(String, String)>,
    pub mode: Mode,
    pub orders: Orders,
    pub checks: Vec<CoefficientCheck>,
    pub pass: bool,
}

fn check<C: Coeff>(name: &str, mi: [u16; 2], p: &ObstructionPoly<C>, reference: &BigRational) -> CoefficientCheck {
    let computed = p.coeff(mi);
    let (abs_error, exact_equal) = if C::EXACT {
        let diff = C::from_rational(reference).sub(&computed);
        (diff.abs_f64(), diff.is_zero())
    } else {
        let r = ToPrimitive::to_f64(reference).unwrap_or(f64::NAN);
        ((computed.to_f64() - r).abs(), false)
    };
    let rscale = ToPrimitive::to_f64(&reference.abs()).unwrap_or(f64::INFINITY);
    let rel_error = if rscale > 0.0 { abs_error / rscale } else { abs_error };
    let pass = if C::EXACT {
        exact_equal
    } else if Zero::is_zero(reference) {
        abs_error < ZERO_TOL
    } else {
        rel_error < REL_TOL
    };
    CoefficientCheck {
        name: name.to_string(),
        mi,
        computed: computed.to_json(),
        reference: format_rational(reference),
        abs_error,
        rel_error,
        pass,
    }
}

fn origin<C: Coeff>() -> [C; 3] {
    [C::zero(), C::zero(), C::zero()]
}

fn graph_opts(t: usize, xi: usize) -> ObstructionOptions {
    ObstructionOptions {
        orders: Some(Orders::new(t, xi)),
        frame: FrameChoice::Graph,
    }
}

fn cubic_with<C: Coeff>(a: &BigRational, b: &BigRational, mode: Mode) -> Result<FamilyReport> {
    let f = parse(CUBIC_FAMILY)?;
    let binds = Bindings::new().with("a", a.clone()).with("b", b.clone());
    let with_c4 = Zero::is_zero(a);
    let m = if with_c4 { 4 } else { 3 };
    let p = obstruction_p::<C>(&f, &binds, &origin(), m, graph_opts(6, m))?;
    let refs = cubic_reference(a, b);
    let mut checks: Vec<CoefficientCheck> = refs
        .iter()
        .enumerate()
        .map(|(j, r)| check(&format!("c{j}"), [j as u16, 0], &p, r))
        .collect();
    if with_c4 {
        checks.push(check("c4", [4, 0], &p, &cubic_c4_at_zero(b)));
    }
    Ok(FamilyReport {
        family: CUBIC_FAMILY.into(),
        params: vec![("a".into(), format_rational(a)), ("b".into(), format_rational(b))],
        mode,
        orders: p.orders,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

/// Compares the computed `c0..c3` (and `c4` when `a = 0`) with the closed forms.
pub fn cubic_report(a: &BigRational, b: &BigRational, mode: Mode) -> Result<FamilyReport> {
    match mode {
        Mode::Double => cubic_with::<f64>(a, b, mode),
        Mode::Rational => cubic_with::<BigRational>(a, b, mode),
    }
}

fn quadratic_with<C: Coeff>(a: &BigRational, mode: Mode) -> Result<FamilyReport> {
    let f = parse(QUADRATIC_FAMILY)?;
    let binds = Bindings::new().with("a", a.clone());
    let p = obstruction_p::<C>(&f, &binds, &origin(), 2, graph_opts(6, 2))?;
    let refs = quadratic_reference(a);
    let names = ["xi1^2", "xi1*xi2", "xi2^2"];
    let mis = [[2, 0], [1, 1], [0, 2]];
    let mut checks: Vec<CoefficientCheck> = (0..3).map(|k| check(names[k], mis[k], &p, &refs[k])).collect();
    // Lower-degree terms vanish.
    for (name, mi) in [("1", [0, 0]), ("xi1", [1, 0]), ("xi2", [0, 1])] {
        checks.push(check(name, mi, &p, &<BigRational as Zero>::zero()));
    }
    Ok(FamilyReport {
        family: QUADRATIC_FAMILY.into(),
        params: vec![("a".into(), format_rational(a))],
        mode,
        orders: p.orders,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

/// Compares the computed quadratic part of `P` with the closed form.
pub fn quadratic_report(a: &BigRational, mode: Mode) -> Result<FamilyReport> {
    match mode {
        Mode::Double => quadratic_with::<f64>(a, mode),
        Mode::Rational => quadratic_with::<BigRational>(a, mode),
    }
}

/// True when the reference quadratic form vanishes identically.
pub fn quadratic_vanishes(a: &BigRational) -> bool {
    quadratic_reference(a).iter().all(Zero::is_zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    // Values worked out by hand from the closed forms.
    #[test]
    fn cubic_reference_spot_values() {
        let c = cubic_reference(&q(1, 1), &q(1, 1));
        // c0 = -5184·64/2^14, c1 = -20736·(-56)/2^14
        assert_eq!(c[0], q(-81, 4));
        assert_eq!(c[1], q(567, 8));
        assert_eq!(Coeff::to_f64(&c[0]), -20.25);
        assert_eq!(Coeff::to_f64(&c[1]), 70.875);
        assert!(cubic_reference(&q(0, 1), &q(5, 1)).iter().all(Zero::is_zero));
    }

    #[test]
    fn quadratic_reference_spot_values() {
        let r = quadratic_reference(&q(0, 1));
        assert_eq!(r, [q(33792, 1), q(0, 1), q(0, 1)]);
        assert!(quadratic_vanishes(&q(1, 1)));
        assert!(!quadratic_vanishes(&q(2, 1)));
        // a = 2: 1024·(33+256+1248+1792+12288-8192) = 1024·7425
        assert_eq!(quadratic_reference(&q(2, 1))[0], q(7603200, 1));
    }
}
