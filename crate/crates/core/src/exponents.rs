//! Exponent algebra of the L-infinity estimate.
//!
//! Everything here is computed in the scalar type of the context; with
//! [`crate::Rational`] every identity is checked with exact equality.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use crate::scalar::ExponentScalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExponentError {
    #[error("dimension {0} is not supported: the estimate needs N >= 3")]
    DimensionTooSmall(u32),
    #[error("power p = {p} is outside the subcritical interval (1, {upper})")]
    PowerOutOfRange { p: String, upper: String },
    #[error("boundary index q = {q} must exceed max(N-1, 2_*/p) = {lower}")]
    IndexOutOfRange { q: String, lower: String },
    #[error("cannot parse rational from {0:?}")]
    Parse(String),
}

/// All scalars of the estimate for one `(N, p, q)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentContext<T> {
    pub dimension: u32,
    pub p: T,
    /// Sobolev exponent `2N/(N-2)`.
    pub two_star: T,
    /// Trace exponent `2(N-1)/(N-2)`.
    pub two_low_star: T,
    pub q: T,
    /// `Nq/(N-1)`.
    pub m: T,
    pub sigma: T,
    /// Main exponent of the L-infinity versus H1 bound.
    pub a: T,
    pub a_hat1: T,
    pub a_hat2: T,
}

/// Returns `(2N/(N-2), 2(N-1)/(N-2))`.
pub fn critical_exponents<T: ExponentScalar>(dimension: u32) -> Result<(T, T), ExponentError> {
    if dimension < 3 {
        return Err(ExponentError::DimensionTooSmall(dimension));
    }
    let n = dimension as i64;
    Ok((T::from_ratio(2 * n, n - 2), T::from_ratio(2 * (n - 1), n - 2)))
}

/// Default boundary index: `max(N-1, 2_*/p) + 1`.
pub fn default_q<T: ExponentScalar>(dimension: u32, p: &T) -> Result<T, ExponentError> {
    let (_, two_low_star) = critical_exponents::<T>(dimension)?;
    let lower = q_lower_bound(dimension, &two_low_star, p);
    Ok(lower + T::one())
}

fn q_lower_bound<T: ExponentScalar>(dimension: u32, two_low_star: &T, p: &T) -> T {
    T::max_of(T::from_int(dimension as i64 - 1), two_low_star.clone() / p.clone())
}

/// Builds the full context. `q_override` replaces the default boundary index.
pub fn derive_context<T: ExponentScalar>(
    dimension: u32,
    p: T,
    q_override: Option<T>,
) -> Result<ExponentContext<T>, ExponentError> {
    let (two_star, two_low_star) = critical_exponents::<T>(dimension)?;
    let upper = two_low_star.clone() - T::one();
    if !(p > T::one() && p < upper) {
        return Err(ExponentError::PowerOutOfRange {
            p: p.to_string(),
            upper: upper.to_string(),
        });
    }
    let lower = q_lower_bound(dimension, &two_low_star, &p);
    let q = match q_override {
        Some(q) if q > lower => q,
        Some(q) => {
            return Err(ExponentError::IndexOutOfRange {
                q: q.to_string(),
                lower: lower.to_string(),
            })
        }
        None => lower + T::one(),
    };

    let n = T::from_int(dimension as i64);
    let m = n.clone() * q.clone() / (n.clone() - T::one());
    let inv_sigma = T::one() + two_star.clone() * (n.recip() - m.recip());
    let sigma = inv_sigma.recip();

    let a = (two_low_star.clone() - T::from_int(2)) / (upper - p.clone());
    let denom = sigma.clone() * (critical_ratio::<T>(dimension) - p.clone());
    let a_hat1 = two_low_star.clone() * sigma.clone() / q.clone() / denom.clone();
    let a_hat2 = (T::one() - sigma.clone()) / denom;

    Ok(ExponentContext {
        dimension,
        p,
        two_star,
        two_low_star,
        q,
        m,
        sigma,
        a,
        a_hat1,
        a_hat2,
    })
}

/// `N/(N-2)`, which equals `2_* - 1`.
fn critical_ratio<T: ExponentScalar>(dimension: u32) -> T {
    let n = dimension as i64;
    T::from_ratio(n, n - 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Identity {
    /// `2*/m = 2_*/q`
    SobolevOverM,
    /// `1/sigma + 2_*/q = N/(N-2)`
    SigmaComplement,
    /// `A_hat1 + A_hat2 = A = 2/(N - p(N-2))`
    SplitSum,
    /// `0 < sigma(N/(N-2) - p) < 1`
    DenominatorInUnitInterval,
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Identity::SobolevOverM => "2*/m = 2_*/q",
            Identity::SigmaComplement => "1/sigma + 2_*/q = N/(N-2)",
            Identity::SplitSum => "A_hat1 + A_hat2 = A = 2/(N-p(N-2))",
            Identity::DenominatorInUnitInterval => "0 < sigma(N/(N-2)-p) < 1",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityVerdict<T> {
    pub identity: Identity,
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
}

impl<T: ExponentScalar> ExponentContext<T> {
    fn n(&self) -> T {
        T::from_int(self.dimension as i64)
    }

    /// `sigma(N/(N-2) - p)`, equal to `1 - sigma(p - 2_*/q)`.
    pub fn denominator(&self) -> T {
        self.sigma.clone() * (critical_ratio::<T>(self.dimension) - self.p.clone())
    }

    /// Exponent of the boundary norm before the `a <= b` upgrade: `2_* sigma / q`.
    pub fn boundary_power(&self) -> T {
        self.two_low_star.clone() * self.sigma.clone() / self.q.clone()
    }

    /// `pq - 2_*`, the power of the sup norm in the boundary growth step.
    pub fn sup_power(&self) -> T {
        self.p.clone() * self.q.clone() - self.two_low_star.clone()
    }

    /// The strict comparisons `A_hat1 > 2_* sigma/q` and `A_hat2 > 1 - sigma`.
    pub fn exponent_comparisons(&self) -> (bool, bool) {
        (
            self.a_hat1 > self.boundary_power(),
            self.a_hat2 > T::one() - self.sigma.clone(),
        )
    }

    pub fn to_f64(&self) -> ExponentContext<f64> {
        ExponentContext {
            dimension: self.dimension,
            p: self.p.to_f64_lossy(),
            two_star: self.two_star.to_f64_lossy(),
            two_low_star: self.two_low_star.to_f64_lossy(),
            q: self.q.to_f64_lossy(),
            m: self.m.to_f64_lossy(),
            sigma: self.sigma.to_f64_lossy(),
            a: self.a.to_f64_lossy(),
            a_hat1: self.a_hat1.to_f64_lossy(),
            a_hat2: self.a_hat2.to_f64_lossy(),
        }
    }
}

/// Verifies the four algebraic identities of the exponent chain.
pub fn check_identities<T: ExponentScalar>(ctx: &ExponentContext<T>) -> Vec<IdentityVerdict<T>> {
    let n = ctx.n();
    let two = T::from_int(2);
    let mut out = Vec::with_capacity(4);

    let lhs = ctx.two_star.clone() / ctx.m.clone();
    let rhs = ctx.two_low_star.clone() / ctx.q.clone();
    out.push(IdentityVerdict {
        identity: Identity::SobolevOverM,
        holds: lhs.same(&rhs),
        lhs,
        rhs,
    });

    let lhs = ctx.sigma.recip() + ctx.two_low_star.clone() / ctx.q.clone();
    let rhs = critical_ratio::<T>(ctx.dimension);
    out.push(IdentityVerdict {
        identity: Identity::SigmaComplement,
        holds: lhs.same(&rhs),
        lhs,
        rhs,
    });

    let lhs = ctx.a_hat1.clone() + ctx.a_hat2.clone();
    let closed = two.clone() / (n.clone() - ctx.p.clone() * (n - two));
    out.push(IdentityVerdict {
        identity: Identity::SplitSum,
        holds: lhs.same(&ctx.a) && ctx.a.same(&closed),
        lhs,
        rhs: closed,
    });

    let lhs = ctx.denominator();
    let alt = T::one() - ctx.sigma.clone() * (ctx.p.clone() - ctx.two_low_star.clone() / ctx.q.clone());
    out.push(IdentityVerdict {
        identity: Identity::DenominatorInUnitInterval,
        holds: lhs.same(&alt) && lhs > T::zero() && lhs < T::one(),
        lhs,
        rhs: alt,
    });
    out
}

/// Parses `"3/2"`, `"2"`, `"1.5"` or `"-0.25"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational, ExponentError> {
    let s = text.trim();
    let err = || ExponentError::Parse(text.to_string());
    if s.contains('/') {
        return BigRational::from_str(s).map_err(|_| err());
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(&digits).map_err(|_| err())?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let value = BigRational::new(numer, denom);
    Ok(if negative { -value } else { value })
}
