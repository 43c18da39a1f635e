//! Violation levels from the a-posteriori polynomial equations.
//!
//! For `ν < N` the equation is divided by `binom(N, ν) t^{N−ν}`, giving
//!
//! ```text
//! φ(t) = 1 − β/(2N) Σ_{i=ν}^{N−1} B_i t^{i−N} − β/(6N) Σ_{i=N+1}^{4N} B_i t^{i−N},
//! B_i = binom(i, ν) / binom(N, ν).
//! ```
//!
//! `φ` is concave on `t > 0` (its derivative is strictly decreasing), tends to
//! `−∞` at both ends and has at most two roots. Everything is evaluated in
//! `s = ln t` with log-sum-exp, so `N` in the thousands neither overflows nor
//! underflows. The peak is located by bisection on the sign of `φ'`, then each
//! root by bisection on the sign of `φ`. Brackets are grown geometrically in
//! `s`: the upper root may exceed `t = 1` (then `ε_lo = 0`), and the lower
//! root may sit far below any fixed floor when `ν` is close to `N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootFlag {
    /// `ν = N`: the upper level is the vacuous 1 and the lower level comes
    /// from the single-sum equation.
    AllSupport,
    /// `φ` stays negative; the upper level is reported as 1.
    NoRoot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRoots {
    pub eps_lo: f64,
    pub eps_hi: f64,
    /// Roots in `t`; `None` where the equation has no such root.
    pub t_lo: Option<f64>,
    pub t_hi: Option<f64>,
    pub flags: Vec<RootFlag>,
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// `ln B_i` for `i = ν..=4N`, indexed by `i − ν`.
fn log_ratios(n: usize, nu: usize) -> Vec<f64> {
    let mut out = vec![0.0; 4 * n - nu + 1];
    // B_{i+1} / B_i = (i+1) / (i+1−ν) = 1 + ν/(i+1−ν).
    let mut acc = Sum::default();
    for i in n..4 * n {
        acc.add((nu as f64 / (i + 1 - nu) as f64).ln_1p());
        out[i + 1 - nu] = acc.value();
    }
    let mut acc = Sum::default();
    for i in (nu..n).rev() {
        acc.add(-(nu as f64 / (i + 1 - nu) as f64).ln_1p());
        out[i - nu] = acc.value();
    }
    out
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// The normalized polynomial in log coordinates.
struct Phi {
    n: usize,
    nu: usize,
    ln_b: Vec<f64>,
    ln_lo: f64,
    ln_hi: f64,
}

impl Phi {
    fn new(n: usize, nu: usize, beta: f64) -> Self {
        Self {
            n,
            nu,
            ln_b: log_ratios(n, nu),
            ln_lo: (beta / (2.0 * n as f64)).ln(),
            ln_hi: (beta / (6.0 * n as f64)).ln(),
        }
    }

    fn lnb(&self, i: usize) -> f64 {
        self.ln_b[i - self.nu]
    }

    /// Log-magnitudes of the two negative sums at `s = ln t`.
    fn sums(&self, s: f64) -> (f64, f64) {
        let n = self.n as f64;
        let lo = log_sum_exp((self.nu..self.n).map(|i| self.lnb(i) + (i as f64 - n) * s));
        let hi = log_sum_exp((self.n + 1..=4 * self.n).map(|i| self.lnb(i) + (i as f64 - n) * s));
        (self.ln_lo + lo, self.ln_hi + hi)
    }

    fn value(&self, s: f64) -> f64 {
        let (a, b) = self.sums(s);
        1.0 - a.exp() - b.exp()
    }

    /// `φ'(t) > 0`, decided by comparing the two parts of `t·φ'(t)` in logs.
    fn rising(&self, s: f64) -> bool {
        let n = self.n as f64;
        let up = log_sum_exp(
            (self.nu..self.n).map(|i| ((self.n - i) as f64).ln() + self.lnb(i) + (i as f64 - n) * s),
        );
        let down = log_sum_exp(
            (self.n + 1..=4 * self.n)
                .map(|i| ((i - self.n) as f64).ln() + self.lnb(i) + (i as f64 - n) * s),
        );
        self.ln_lo + up > self.ln_hi + down
    }

    /// Single-sum equation for `ν = N`; decreasing in `s`.
    fn all_support_value(&self, s: f64) -> f64 {
        1.0 - self.sums(s).1.exp()
    }
}

/// Bisection on `s` for a sign change of `pred` from `true` at `lo` to
/// `false` at `hi`.
fn bisect(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool, what: &str) -> Result<(f64, f64)> {
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok((lo, hi));
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical(format!(
        "{what}: bisection did not converge in {MAX_BISECTIONS} steps, bracket t ∈ [{:e}, {:e}]",
        lo.exp(),
        hi.exp()
    )))
}

/// Walks from `start` in direction `dir` with doubling steps until `pred`
/// fails; returns the last point where it held and the first where it fails.
fn expand(start: f64, dir: f64, pred: impl Fn(f64) -> bool, what: &str) -> Result<(f64, f64)> {
    let mut inside = start;
    let mut step = 1.0;
    for _ in 0..64 {
        let probe = start + dir * step;
        if !pred(probe) {
            return Ok((inside, probe));
        }
        inside = probe;
        step *= 2.0;
    }
    Err(Error::Numerical(format!("{what}: no sign change found while bracketing")))
}

fn midpoint_t(bracket: (f64, f64)) -> f64 {
    (0.5 * (bracket.0 + bracket.1)).exp()
}

/// The normalized function `φ(t)` for `ν < N`, or the single-sum equation for `ν = N`.
pub fn violation_polynomial(n: usize, nu: usize, beta: f64, t: f64) -> Result<f64> {
    check(n, nu, beta)?;
    if !(t > 0.0) {
        return Err(Error::Input(format!("t = {t} must be positive")));
    }
    let phi = Phi::new(n, nu, beta);
    Ok(if nu == n {
        phi.all_support_value(t.ln())
    } else {
        phi.value(t.ln())
    })
}

fn check(n: usize, nu: usize, beta: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Input("N must be at least 1".into()));
    }
    if nu > n {
        return Err(Error::Input(format!("nu = {nu} exceeds N = {n}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Input(format!("beta = {beta} must lie in (0, 1)")));
    }
    Ok(())
}

pub fn epsilon_roots(n: usize, nu: usize, beta: f64) -> Result<EpsilonRoots> {
    check(n, nu, beta)?;
    let phi = Phi::new(n, nu, beta);

    if nu == n {
        let positive = |s: f64| phi.all_support_value(s) > 0.0;
        let (lo, hi) = if positive(0.0) {
            expand(0.0, 1.0, positive, "all-support root")?
        } else {
            let (inside, out) = expand(0.0, -1.0, |s| !positive(s), "all-support root")?;
            (out, inside)
        };
        let t = midpoint_t(bisect(lo, hi, positive, "all-support root")?);
        return Ok(EpsilonRoots {
            eps_lo: (1.0 - t).max(0.0),
            eps_hi: 1.0,
            t_lo: Some(t),
            t_hi: None,
            flags: vec![RootFlag::AllSupport],
        });
    }

    let rising = |s: f64| phi.rising(s);
    let (lo, hi) = if rising(0.0) {
        expand(0.0, 1.0, rising, "peak")?
    } else {
        let (inside, out) = expand(0.0, -1.0, |s| !rising(s), "peak")?;
        (out, inside)
    };
    let peak = bisect(lo, hi, rising, "peak")?;
    let s_peak = 0.5 * (peak.0 + peak.1);
    if phi.value(s_peak) < 0.0 {
        return Ok(EpsilonRoots {
            eps_lo: 0.0,
            eps_hi: 1.0,
            t_lo: None,
            t_hi: None,
            flags: vec![RootFlag::NoRoot],
        });
    }

    let positive = |s: f64| phi.value(s) >= 0.0;
    let (inside, out) = expand(s_peak, -1.0, positive, "lower root")?;
    let t_lo = midpoint_t(bisect(out, inside, |s| !positive(s), "lower root")?);
    let (inside, out) = expand(s_peak, 1.0, positive, "upper root")?;
    let t_hi = midpoint_t(bisect(inside, out, positive, "upper root")?);

    Ok(EpsilonRoots {
        eps_lo: (1.0 - t_hi).max(0.0),
        eps_hi: (1.0 - t_lo).clamp(0.0, 1.0),
        t_lo: Some(t_lo),
        t_hi: Some(t_hi),
        flags: Vec::new(),
    })
}
