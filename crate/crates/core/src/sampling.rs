//! Seeded random inputs for residual checks and property batteries.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expr::Expr;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point in the closed ball of the given radius about `center`.
pub fn point_in_ball(rng: &mut SampleRng, center: [f64; 3], radius: f64) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [0, 1, 2].map(|_| rng.gen_range(-1.0..=1.0));
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return [0, 1, 2].map(|i| center[i] + radius * v[i]);
        }
    }
}

/// Monomial exponents in three variables up to total degree `d`.
pub fn monomials(d: u32) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for total in 0..=d {
        for i in (0..=total).rev() {
            for j in (0..=total - i).rev() {
                out.push([i, j, total - i - j]);
            }
        }
    }
    out
}

fn monomial(e: [u32; 3]) -> Option<Expr> {
    let mut acc: Option<Expr> = None;
    for (i, &k) in e.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let x = if k == 1 { Expr::var(i) } else { Expr::var(i).pow(k) };
        acc = Some(match acc {
            None => x,
            Some(a) => a * x,
        });
    }
    acc
}

/// Polynomial with the given coefficients on [`monomials`]`(d)`.
pub fn polynomial(d: u32, coeffs: &[i64]) -> Expr {
    let monos = monomials(d);
    assert_eq!(monos.len(), coeffs.len());
    let mut acc: Option<Expr> = None;
    for (e, &c) in monos.iter().zip(coeffs) {
        if c == 0 {
            continue;
        }
        let term = match monomial(*e) {
            None => Expr::int(c.abs()),
            Some(m) if c.abs() == 1 => m,
            Some(m) => Expr::int(c.abs()) * m,
        };
        acc = Some(match acc {
            None if c < 0 => -term,
            None => term,
            Some(a) if c < 0 => a - term,
            Some(a) => a + term,
        });
    }
    acc.unwrap_or_else(|| Expr::int(0))
}

/// Random polynomial of total degree `d` with integer coefficients in
/// `[-range, range]`.
pub fn random_polynomial(rng: &mut SampleRng, d: u32, range: i64) -> Expr {
    let n = monomials(d).len();
    let coeffs: Vec<i64> = (0..n).map(|_| rng.gen_range(-range..=range)).collect();
    polynomial(d, &coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Bindings};

    #[test]
    fn monomial_count() {
        assert_eq!(monomials(2).len(), 10);
        assert_eq!(monomials(3).len(), 20);
    }

    #[test]
    fn polynomial_matches_text() {
        let e = polynomial(1, &[3, -1, 0, 2]);
        let want = parse("3 - x1 + 2*x3").unwrap();
        let b = Bindings::new();
        for p in [[0.5, -1.0, 2.0], [1.0, 1.0, 1.0]] {
            assert_eq!(e.eval(&b, p).unwrap(), want.eval(&b, p).unwrap());
        }
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let a = random_polynomial(&mut rng(7), 3, 5);
        let b = random_polynomial(&mut rng(7), 3, 5);
        assert_eq!(a, b);
        let p = point_in_ball(&mut rng(1), [0.0; 3], 2.0);
        assert!(p.iter().map(|x| x * x).sum::<f64>() <= 4.0);
    }
}
