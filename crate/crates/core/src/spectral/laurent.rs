//! The printed coefficient polynomials and their exact Laurent recombination.
//!
//! For large `|zeta|` the forms `P + Q Z + R Z^2` cancel catastrophically:
//! the result is O(1) while single terms grow like `|zeta|^6`, and the
//! cancellation runs across powers of `kappa` as well. Substituting
//! `Z = A + T`, with `A` the first `M` terms of the asymptotic series, and
//! expanding `P + Q A + R A^2` over Gaussian integers makes every identity
//! cancel exactly. Only the small correction `(Q + 2RA) T + R T^2` is then
//! evaluated in floating point.

use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Monomial {
    pub re: i64,
    pub im: i64,
    pub zp: i32,
    pub kp: u32,
    pub rp: u32,
}

const fn m(re: i64, im: i64, zp: i32, kp: u32, rp: u32) -> Monomial {
    Monomial { re, im, zp, kp, rp }
}

const SIGMA0: &[Monomial] = &[
    m(10, 0, 0, 2, 0),
    m(0, -1, 1, 1, 1),
    m(1, 0, 2, 0, 1),
    m(0, 1, 3, 1, 1),
];
const SIGMA1: &[Monomial] = &[
    m(0, 10, 0, 1, 0),
    m(0, 9, 0, 1, 1),
    m(-1, 0, 1, 0, 1),
    m(0, -2, 2, 1, 1),
    m(1, 0, 3, 0, 1),
    m(0, 1, 4, 1, 1),
];
const SIGMA2: &[Monomial] = &[
    m(-8, 0, 0, 0, 1),
];
const SIGMA3: &[Monomial] = &[
    m(18, 0, 0, 0, 1),
    m(30, 0, 0, 2, 0),
    m(30, 0, 0, 2, 1),
    m(30, 0, 0, 4, 0),
    m(0, -5, 1, 1, 0),
    m(0, 46, 1, 1, 1),
    m(0, 25, 1, 3, 0),
    m(0, 30, 1, 3, 1),
    m(-3, 0, 2, 0, 1),
    m(10, 0, 2, 2, 0),
    m(-43, 0, 2, 2, 1),
    m(0, -9, 3, 1, 1),
    m(0, 5, 3, 3, 0),
    m(0, -15, 3, 3, 1),
    m(9, 0, 4, 2, 1),
    m(0, 3, 5, 3, 1),
];
const SIGMA4: &[Monomial] = &[
    m(0, 25, 0, 1, 0),
    m(0, 16, 0, 1, 1),
    m(0, 55, 0, 3, 0),
    m(33, 0, 1, 0, 1),
    m(23, 0, 1, 2, 1),
    m(0, -5, 2, 1, 0),
    m(0, 79, 2, 1, 1),
    m(0, 20, 2, 3, 0),
    m(0, 39, 2, 3, 1),
    m(-3, 0, 3, 0, 1),
    m(10, 0, 3, 2, 0),
    m(-64, 0, 3, 2, 1),
    m(0, -9, 4, 1, 1),
    m(0, 5, 4, 3, 0),
    m(0, -18, 4, 3, 1),
    m(9, 0, 5, 2, 1),
    m(0, 3, 6, 3, 1),
];
const SIGMA5: &[Monomial] = &[
    m(-20, 0, 0, 2, 0),
    m(0, 20, 1, 1, 0),
    m(0, 20, 1, 1, 1),
    m(12, 0, 2, 0, 1),
    m(-20, 0, 2, 2, 0),
    m(-20, 0, 2, 2, 1),
    m(0, 24, 3, 1, 1),
    m(-12, 0, 4, 2, 1),
];

pub(crate) const SIGMA: [&[Monomial]; 6] = [SIGMA0, SIGMA1, SIGMA2, SIGMA3, SIGMA4, SIGMA5];

/// Number of asymptotic terms folded into the exact part.
pub(crate) const ASYMPTOTIC_TERMS: usize = 8;

type Key = (i32, u32, u32);

/// Polynomial in `(zeta, kappa, r)` with Gaussian-integer coefficients;
/// negative powers of `zeta` are allowed.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct ExactPoly(BTreeMap<Key, (i128, i128)>);

impl ExactPoly {
    pub fn from_monomials(ms: &[Monomial]) -> Self {
        let mut p = ExactPoly::default();
        for t in ms {
            p.push((t.zp, t.kp, t.rp), (t.re as i128, t.im as i128));
        }
        p
    }

    fn push(&mut self, key: Key, c: (i128, i128)) {
        let e = self.0.entry(key).or_insert((0, 0));
        e.0 += c.0;
        e.1 += c.1;
        if *e == (0, 0) {
            self.0.remove(&key);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (Key, (i128, i128))> + '_ {
        self.0.iter().map(|(k, c)| (*k, *c))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in other.terms() {
            out.push(k, c);
        }
        out
    }

    pub fn scale(&self, s: i128) -> Self {
        let mut out = ExactPoly::default();
        for (k, c) in self.terms() {
            out.push(k, (c.0 * s, c.1 * s));
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = ExactPoly::default();
        for (ka, a) in self.terms() {
            for (kb, b) in other.terms() {
                let key = (ka.0 + kb.0, ka.1 + kb.1, ka.2 + kb.2);
                out.push(key, (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0));
            }
        }
        out
    }

    /// Multiply by `zeta`.
    pub fn times_zeta(&self) -> Self {
        let mut out = ExactPoly::default();
        for ((z, k, r), c) in self.terms() {
            out.push((z + 1, k, r), c);
        }
        out
    }

    /// Derivative in `zeta`.
    pub fn d_zeta(&self) -> Self {
        let mut out = ExactPoly::default();
        for ((z, k, r), c) in self.terms() {
            if z != 0 {
                let s = z as i128;
                out.push((z - 1, k, r), (c.0 * s, c.1 * s));
            }
        }
        out
    }

    #[cfg(test)]
    pub fn max_zeta_power(&self) -> Option<i32> {
        self.0.keys().map(|k| k.0).max()
    }
}

/// `P + Q Z + R Z^2` with exact polynomial coefficients.
#[derive(Clone, Debug)]
pub(crate) struct ExactForm {
    pub p: ExactPoly,
    pub q: ExactPoly,
    pub r: ExactPoly,
}

impl ExactForm {
    pub fn factor(first: usize) -> Self {
        ExactForm {
            p: ExactPoly::from_monomials(SIGMA[first]),
            q: ExactPoly::from_monomials(SIGMA[first + 1]),
            r: ExactPoly::from_monomials(SIGMA[first + 2]),
        }
    }

    /// d/dzeta, using `Z' = -zeta Z - 1`.
    pub fn derivative(&self) -> Self {
        ExactForm {
            p: self.p.d_zeta().add(&self.q.scale(-1)),
            q: self
                .q
                .d_zeta()
                .add(&self.q.times_zeta().scale(-1))
                .add(&self.r.scale(-2)),
            r: self.r.d_zeta().add(&self.r.times_zeta().scale(-2)),
        }
    }

    /// `P + Q A + R A^2` with `A` the truncated asymptotic series of Z.
    pub fn laurent(&self) -> ExactPoly {
        let a = asymptotic_head();
        self.p.add(&self.q.mul(&a)).add(&self.r.mul(&a.mul(&a)))
    }
}

/// `-sum_{j<M} (2j-1)!! zeta^-(2j+1)`.
pub(crate) fn asymptotic_head() -> ExactPoly {
    let mut a = ExactPoly::default();
    let mut df: i128 = 1;
    for j in 0..ASYMPTOTIC_TERMS {
        if j > 0 {
            df *= 2 * j as i128 - 1;
        }
        a.push((-(2 * j as i32 + 1), 0, 0), (-df, 0));
    }
    a
}
