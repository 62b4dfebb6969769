//! Bessel J and Struve H from their power series.
//!
//! Both series alternate and, for arguments of order 10 or more, pass through
//! terms many orders of magnitude larger than the result. The term ratios and
//! the running sum are therefore carried in double-double arithmetic; only the
//! common prefactor is evaluated in plain `f64`.

use crate::error::{Error, Result};

const TERM_TOL: f64 = 1e-17;
const MAX_TERMS: usize = 200;

/// Bessel function of the first kind,
/// `J_a(x) = sum_m (-1)^m / (m! Gamma(m + a + 1)) (x/2)^(2m + a)`.
pub fn bessel_j(alpha: f64, x: f64) -> Result<f64> {
    check_args("Bessel order", alpha, x)?;
    let half = 0.5 * x;
    let prefactor = half.powf(alpha) / libm::tgamma(alpha + 1.0);
    Ok(alternating_series(prefactor, half, 1.0, alpha + 1.0))
}

/// Struve function,
/// `H_v(z) = (z/2)^(v+1) sum_n (-1)^n (z/2)^(2n) / (Gamma(n + 3/2) Gamma(n + v + 3/2))`.
pub fn struve_h(nu: f64, z: f64) -> Result<f64> {
    check_args("Struve order", nu, z)?;
    let half = 0.5 * z;
    let prefactor = half.powf(nu + 1.0) / (libm::tgamma(1.5) * libm::tgamma(nu + 1.5));
    Ok(alternating_series(prefactor, half, 1.5, nu + 1.5))
}

fn check_args(what: &str, order: f64, x: f64) -> Result<()> {
    if !(order.is_finite() && order >= 0.0) {
        return Err(Error::config(format!("{what} {order} must be finite and >= 0")));
    }
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::config(format!("argument {x} must be finite and >= 0")));
    }
    Ok(())
}

/// `prefactor * sum_k r_k` with `r_0 = 1` and
/// `r_{k+1} = -r_k * h^2 / ((k + a)(k + b))`.
fn alternating_series(prefactor: f64, half: f64, a: f64, b: f64) -> f64 {
    if prefactor == 0.0 {
        return 0.0;
    }
    let q = DoubleDouble::from_product(half, half);
    let mut term = DoubleDouble::from(1.0);
    let mut sum = term;
    for k in 0..MAX_TERMS {
        let ka = DoubleDouble::from_sum(k as f64, a);
        let kb = DoubleDouble::from_sum(k as f64, b);
        let denom = ka.mul(kb);
        let ratio = q.hi / denom.hi;
        term = term.mul(q).div(denom).neg();
        sum = sum.add(term);
        if ratio < 1.0 && (term.hi * prefactor).abs() < TERM_TOL {
            break;
        }
    }
    prefactor * sum.to_f64()
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl From<f64> for DoubleDouble {
    fn from(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }
}

impl DoubleDouble {
    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Self { hi: s, lo: err }
    }

    fn quick_two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        Self { hi: s, lo: b - (s - a) }
    }

    /// Exact `a + b`.
    fn from_sum(a: f64, b: f64) -> Self {
        Self::two_sum(a, b)
    }

    /// Exact `a * b`.
    fn from_product(a: f64, b: f64) -> Self {
        let p = a * b;
        Self { hi: p, lo: a.mul_add(b, -p) }
    }

    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }

    fn add(self, other: Self) -> Self {
        let s = Self::two_sum(self.hi, other.hi);
        let t = Self::two_sum(self.lo, other.lo);
        let u = Self::quick_two_sum(s.hi, s.lo + t.hi);
        Self::quick_two_sum(u.hi, u.lo + t.lo)
    }

    fn mul(self, other: Self) -> Self {
        let p = Self::from_product(self.hi, other.hi);
        let lo = p.lo + (self.hi * other.lo + self.lo * other.hi);
        Self::quick_two_sum(p.hi, lo)
    }

    fn div(self, other: Self) -> Self {
        let q1 = self.hi / other.hi;
        let r = self.add(other.mul(Self::from(q1)).neg());
        let q2 = r.hi / other.hi;
        let r = r.add(other.mul(Self::from(q2)).neg());
        let q3 = r.hi / other.hi;
        let q = Self::quick_two_sum(q1, q2);
        q.add(Self::from(q3))
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}
