//! Exact rational helpers and the `p/q` text form used in reports.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serializer;

pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(p: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(p))
}

/// Always `p/q`, including integers (`2/1`) and zero (`0/1`).
pub fn ratio_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parse `p/q` or a plain integer.
pub fn parse_ratio(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                return None;
            }
            Some(BigRational::new(p.trim().parse().ok()?, q))
        }
        None => Some(BigRational::from_integer(s.parse().ok()?)),
    }
}

pub fn lcm(a: &BigInt, b: &BigInt) -> BigInt {
    use num_integer::Integer;
    if a.is_zero() || b.is_zero() {
        return BigInt::zero();
    }
    a.lcm(b)
}

pub fn is_integer(r: &BigRational) -> bool {
    r.denom().is_one()
}

pub fn serialize_ratio<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&ratio_string(r))
}

pub fn serialize_opt_ratio<S: Serializer>(r: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_str(&ratio_string(r)),
        None => s.serialize_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_form() {
        assert_eq!(ratio_string(&ratio(2, 4)), "1/2");
        assert_eq!(ratio_string(&int(3)), "3/1");
        assert_eq!(ratio_string(&ratio(0, 5)), "0/1");
        assert_eq!(parse_ratio("-6/4"), Some(ratio(-3, 2)));
        assert_eq!(parse_ratio("7"), Some(int(7)));
        assert_eq!(parse_ratio("1/0"), None);
    }
}
