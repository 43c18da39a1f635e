//! Exact-arithmetic oracle for the violation-level equations.
//!
//! `β = num/den` is rational, binomials are big integers and `t = p / 2^BITS`
//! with integer `p`, so the sign of the integer-scaled polynomial
//! `Σ a_e p^e 2^{BITS(D−e)}` is computed without rounding. Roots are located
//! to adjacent grid points by integer bisection.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub const BITS: u32 = 40;

pub struct ExactEquation {
    /// `a_e` for `e = 0..=D`.
    coeffs: Vec<BigInt>,
    /// Power of the leading `binom(N, ν) t^{N−ν}` term; 0 for `ν = N`.
    lead: usize,
    /// Positive scale that turns the integer polynomial back into `φ` at `t = 1`.
    scale: BigInt,
}

fn binomials(n: usize, nu: usize) -> Vec<BigInt> {
    // binom(i, ν) for i = ν..=4N
    let mut out = vec![BigInt::one()];
    for i in nu..4 * n {
        let next = out.last().unwrap() * BigInt::from(i + 1) / BigInt::from(i + 1 - nu);
        out.push(next);
    }
    out
}

impl ExactEquation {
    pub fn new(n: usize, nu: usize, beta: (u64, u64)) -> Self {
        let (num, den) = (BigInt::from(beta.0), BigInt::from(beta.1));
        let bin = binomials(n, nu);
        let b = |i: usize| &bin[i - nu];
        let d = 4 * n - nu;
        let mut coeffs = vec![BigInt::zero(); d + 1];
        let six_n_den = BigInt::from(6 * n) * &den;
        if nu == n {
            coeffs[0] = six_n_den.clone();
            for i in n + 1..=4 * n {
                coeffs[i - n] = -(&num * b(i));
            }
            return Self {
                coeffs,
                lead: 0,
                scale: six_n_den,
            };
        }
        let lead = n - nu;
        coeffs[lead] = &six_n_den * b(n);
        for i in nu..n {
            coeffs[i - nu] = -(BigInt::from(3) * &num * b(i));
        }
        for i in n + 1..=4 * n {
            coeffs[i - nu] = -(&num * b(i));
        }
        Self {
            coeffs,
            lead,
            scale: six_n_den * b(n),
        }
    }

    fn horner(coeffs: &[BigInt], p: &BigInt) -> BigInt {
        let d = coeffs.len() - 1;
        let mut acc = coeffs[d].clone();
        for e in (0..d).rev() {
            acc = acc * p + (&coeffs[e] << (BITS as usize * (d - e)));
        }
        acc
    }

    /// `2^{BITS·D}·scale·t^{lead}·φ(t)` at `t = p / 2^BITS`.
    pub fn scaled(&self, p: &BigInt) -> BigInt {
        Self::horner(&self.coeffs, p)
    }

    /// Sign of `φ'` at `t = p / 2^BITS`, via `t Q'(t) − lead·Q(t)`.
    fn rising(&self, p: &BigInt) -> bool {
        let c: Vec<BigInt> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(e, a)| a * BigInt::from(e as i64 - self.lead as i64))
            .collect();
        Self::horner(&c, p).is_positive()
    }

    fn positive(&self, p: &BigInt) -> bool {
        self.scaled(p).is_positive()
    }

    /// `φ(t)` at `t = p / 2^BITS`, correctly rounded up to a few ulps.
    pub fn phi(&self, p: &BigInt) -> f64 {
        let d = self.coeffs.len() - 1;
        let num = self.scaled(p);
        let den = (&self.scale * p.pow(self.lead as u32)) << (BITS as usize * (d - self.lead));
        ratio(&num, &den)
    }

    /// Smallest `p > lo` (searching by doubling) where `pred` flips to false.
    fn bisect(&self, mut lo: BigInt, mut hi: BigInt, pred: impl Fn(&BigInt) -> bool) -> (BigInt, BigInt) {
        assert!(pred(&lo) && !pred(&hi));
        while &hi - &lo > BigInt::one() {
            let mid: BigInt = (&lo + &hi) >> 1;
            if pred(&mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, hi)
    }

    fn grow(&self, start: BigInt, pred: impl Fn(&BigInt) -> bool) -> BigInt {
        let mut hi = start;
        while pred(&hi) {
            hi <<= 1;
        }
        hi
    }

    /// `(eps_lo, eps_hi)` from the exact roots (grid midpoints).
    pub fn epsilon(&self) -> (f64, f64) {
        let q = BigInt::one() << BITS;
        let to_t = |r: &(BigInt, BigInt)| {
            (r.0.to_f64().unwrap() + r.1.to_f64().unwrap()) / 2.0 / q.to_f64().unwrap()
        };
        if self.lead == 0 {
            // Single decreasing equation.
            assert!(self.positive(&BigInt::one()));
            let hi = self.grow(q.clone(), |p| self.positive(p));
            let t = to_t(&self.bisect(BigInt::one(), hi, |p| self.positive(p)));
            return ((1.0 - t).max(0.0), 1.0);
        }
        let one = BigInt::one();
        assert!(self.rising(&one), "grid too coarse near t = 0");
        let hi = self.grow(q.clone(), |p| self.rising(p));
        let (peak, _) = self.bisect(one.clone(), hi, |p| self.rising(p));
        if !self.positive(&peak) {
            return (0.0, 1.0);
        }
        assert!(!self.positive(&one), "grid too coarse near t = 0");
        let lower = self.bisect(one, peak.clone(), |p| !self.positive(p));
        let hi = self.grow(peak.clone() + 1, |p| self.positive(p));
        let upper = self.bisect(peak, hi, |p| self.positive(p));
        ((1.0 - to_t(&upper)).max(0.0), 1.0 - to_t(&lower))
    }

    /// Checks that the equation changes sign within `slack` grid points of `t`.
    pub fn brackets_root(&self, t: f64, slack: i64) -> bool {
        let p = BigInt::from((t * (1u64 << BITS) as f64).round() as i64);
        let a = self.positive(&(&p - slack));
        let b = self.positive(&(&p + slack));
        a != b
    }
}

pub fn grid_point(t: f64) -> BigInt {
    BigInt::from((t * (1u64 << BITS) as f64).round() as i64)
}

/// `num / den` as `f64`.
fn ratio(num: &BigInt, den: &BigInt) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = den.bits() as i64 - num.bits() as i64 + 64;
    let q = if shift >= 0 {
        (num << shift as usize) / den
    } else {
        num / (den << (-shift) as usize)
    };
    let mut v = q.to_f64().unwrap();
    let mut s = shift;
    while s > 0 {
        let step = s.min(1000);
        v /= 2f64.powi(step as i32);
        s -= step;
    }
    while s < 0 {
        let step = (-s).min(1000);
        v *= 2f64.powi(step as i32);
        s += step;
    }
    v
}
