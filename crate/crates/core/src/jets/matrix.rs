use super::series::{Series, Vars};
use crate::coeff::Coeff;
use crate::error::{Error, Result};

/// 2×2 matrix of series acting on 1-forms `β = β_1 dξ_1 + β_2 dξ_2`.
///
/// `entries[i][j]` is the component written `T^j_i` (row `i`, column `j`),
/// so that `(Tβ)_i = Σ_j T^j_i β_j`. With this layout the component
/// `T^2_1` is `entries[0][1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesMatrix2<C: Coeff> {
    pub entries: [[Series<C>; 2]; 2],
}

impl<C: Coeff> SeriesMatrix2<C> {
    pub fn new(entries: [[Series<C>; 2]; 2]) -> Result<Self> {
        let m = SeriesMatrix2 { entries };
        let first = &m.entries[0][0];
        for s in m.entries.iter().flatten() {
            first.checked_add(s)?;
        }
        Ok(m)
    }

    pub fn identity(vars: Vars, order: usize) -> Self {
        let one = Series::constant(vars.clone(), order, C::one());
        let zero = Series::zero(vars, order);
        SeriesMatrix2 {
            entries: [[one.clone(), zero.clone()], [zero, one]],
        }
    }

    /// The rotation generator `[[0, 1], [-1, 0]]`.
    pub fn rotation(vars: Vars, order: usize) -> Self {
        let one = Series::constant(vars.clone(), order, C::one());
        let zero = Series::zero(vars, order);
        SeriesMatrix2 {
            entries: [[zero.clone(), one.clone()], [-&one, zero]],
        }
    }

    /// Component `T^upper_lower` with 1-based indices, as written in formulas.
    pub fn comp(&self, upper: usize, lower: usize) -> &Series<C> {
        &self.entries[lower - 1][upper - 1]
    }

    pub fn order(&self) -> usize {
        self.entries[0][0].order()
    }

    pub fn vars(&self) -> &Vars {
        self.entries[0][0].vars()
    }

    fn map(&self, f: impl Fn(&Series<C>) -> Series<C>) -> Self {
        let [[a, b], [c, d]] = &self.entries;
        SeriesMatrix2 {
            entries: [[f(a), f(b)], [f(c), f(d)]],
        }
    }

    pub fn truncate(&self, order: usize) -> Self {
        self.map(|s| s.truncate(order))
    }

    pub fn derive(&self, var: usize) -> Self {
        self.map(|s| s.derive(var))
    }

    pub fn scale(&self, c: &Series<C>) -> Result<Self> {
        let [[a, b], [d, e]] = &self.entries;
        Ok(SeriesMatrix2 {
            entries: [
                [c.checked_mul(a)?, c.checked_mul(b)?],
                [c.checked_mul(d)?, c.checked_mul(e)?],
            ],
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        for i in 0..2 {
            for j in 0..2 {
                out.entries[i][j] = self.entries[i][j].checked_add(&other.entries[i][j])?;
            }
        }
        Ok(out)
    }

    /// Operator composition `self ∘ other`: `(AB)^j_i = Σ_k A^k_i B^j_k`,
    /// i.e. the ordinary row-by-column product of the entry arrays.
    pub fn mat_mul(&self, other: &Self) -> Result<Self> {
        let a = &self.entries;
        let b = &other.entries;
        let mut out = self.clone();
        for i in 0..2 {
            for j in 0..2 {
                out.entries[i][j] =
                    a[i][0].checked_mul(&b[0][j])?.checked_add(&a[i][1].checked_mul(&b[1][j])?)?;
            }
        }
        Ok(out)
    }

    /// Entrywise derivative by variable name (order drops by one).
    pub fn mat_derive(&self, name: &str) -> Result<Self> {
        let var = self
            .vars()
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

    /// Applies the matrix to a 1-form `(β_1, β_2)`.
    pub fn apply(&self, beta: &[Series<C>; 2]) -> Result<[Series<C>; 2]> {
        let a = &self.entries;
        Ok([
            a[0][0].checked_mul(&beta[0])?.checked_add(&a[0][1].checked_mul(&beta[1])?)?,
            a[1][0].checked_mul(&beta[0])?.checked_add(&a[1][1].checked_mul(&beta[1])?)?,
        ])
    }

    pub fn trace(&self) -> Series<C> {
        &self.entries[0][0] + &self.entries[1][1]
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .map(Series::max_abs)
            .fold(0.0, f64::max)
    }

    /// Evaluates every entry at a point.
    pub fn eval(&self, point: &[C]) -> [[C; 2]; 2] {
        let e = &self.entries;
        [
            [e[0][0].eval(point), e[0][1].eval(point)],
            [e[1][0].eval(point), e[1][1].eval(point)],
        ]
    }
}

/// A Taylor expansion anchored at a base point: `series` is written in the
/// displacement `x - base`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<C: Coeff> {
    pub base: Vec<C>,
    pub series: Series<C>,
}

/// Composes a jet of `f(x1, x2, x3)` with three series `x(t, ξ)` whose
/// constant terms equal the jet's base point.
pub fn compose3<C: Coeff>(f: &Jet<C>, x: &[Series<C>; 3]) -> Result<Series<C>> {
    let mut shifted = Vec::with_capacity(3);
    for (xi, b) in x.iter().zip(&f.base) {
        let off = xi.constant_term().sub(b).abs_f64();
        let tol = if C::EXACT { 0.0 } else { 1e-12 };
        if off > tol {
            return Err(Error::BasePointMismatch(off));
        }
        let mut s = xi.clone();
        let c0 = s.constant_term().clone();
        s = s.add_scalar(&c0.neg());
        shifted.push(s);
    }
    f.series.compose(&shifted)
}
