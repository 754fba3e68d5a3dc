//! Exact rational scalars and their string form.
//!
//! Every quantity in the crate is a [`Q`]. The canonical text form is
//! `"num/den"` with a positive denominator, used in all JSON and CSV output.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// `"num/den"`, always with an explicit denominator.
pub fn to_frac_string(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Human form: integers print bare.
pub fn to_display(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        to_frac_string(x)
    }
}

/// Accepts `"a"`, `"a/b"` and surrounding whitespace.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().ok()?;
    let d: BigInt = d.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(Q::new(n, d))
}

/// The integer value of `x`, if it is one and fits.
pub fn as_i64(x: &Q) -> Option<i64> {
    if x.is_integer() {
        x.numer().to_i64()
    } else {
        None
    }
}

pub fn is_int(x: &Q) -> bool {
    x.is_integer()
}

/// Fractional part in `[0, 1)`.
pub fn frac(x: &Q) -> Q {
    x - x.floor()
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

pub fn abs(x: &Q) -> Q {
    x.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for s in ["0", "-5/3", "7/4", "12/8", "-0/3"] {
            let x = parse_q(s).unwrap();
            assert_eq!(parse_q(&to_frac_string(&x)).unwrap(), x);
        }
        assert_eq!(to_frac_string(&q(12, 8)), "3/2");
        assert_eq!(to_frac_string(&qi(-2)), "-2/1");
        assert_eq!(to_display(&qi(-2)), "-2");
        assert!(parse_q("1/0").is_none());
        assert!(parse_q("x").is_none());
    }

    #[test]
    fn fractional_part() {
        assert_eq!(frac(&q(-1, 3)), q(2, 3));
        assert_eq!(frac(&q(7, 3)), q(1, 3));
        assert_eq!(frac(&qi(4)), zero());
    }
}
