//! Exact rational scalar used throughout the crate.
//!
//! `Ratio<i128>` gives plenty of headroom for the squared-distance
//! comparisons done by the conservative checker (numerators stay far below
//! 2^127 for resolutions up to a few thousand cells).

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{AvoidError, Result};

pub type Rat = Ratio<i128>;

pub fn rat(n: i128) -> Rat {
    Ratio::from_integer(n)
}

pub fn frac(num: i128, den: i128) -> Rat {
    Ratio::new(num, den)
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Smallest integer >= r.
pub fn ceil_int(r: &Rat) -> i128 {
    r.ceil().to_integer()
}

/// Renders as "p" or "p/q"; the bit-stable form used in JSON payloads.
pub fn rat_string(r: &Rat) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses "p", "p/q" or a plain decimal like "0.25" into an exact rational.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || AvoidError::Parse(format!("cannot parse rational '{s}'"));
    if let Some((p, q)) = s.split_once('/') {
        let num: i128 = p.trim().parse().map_err(|_| bad())?;
        let den: i128 = q.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(num, den));
    }
    if let Some((int, fracpart)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int_val: i128 = if int.is_empty() || int == "-" {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        if fracpart.is_empty() || !fracpart.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = fracpart.len() as u32;
        if digits > 27 {
            return Err(bad());
        }
        let den = 10i128.pow(digits);
        let num: i128 = fracpart.parse().map_err(|_| bad())?;
        let mag = rat(int_val.abs()) + frac(num, den);
        return Ok(if neg || int_val < 0 { -mag } else { mag });
    }
    let n: i128 = s.parse().map_err(|_| bad())?;
    Ok(rat(n))
}

/// Decides whether sqrt(a2) lies strictly inside the open band
/// (d - sqrt(b2), d + sqrt(b2)), entirely in rational arithmetic.
///
/// All of a2, b2 must be >= 0 and d >= 0. Used by the conservative checker,
/// where a2 is a squared center distance and b2 the squared cell diagonal.
pub fn sqrt_in_open_band(a2: &Rat, d: &Rat, b2: &Rat) -> bool {
    debug_assert!(!a2.is_negative() && !b2.is_negative() && !d.is_negative());
    // right side: sqrt(a2) < d + sqrt(b2)
    // <=> a2 - d^2 - b2 < 2 d sqrt(b2)
    let e = a2 - d * d - b2;
    let right = if e.is_negative() {
        true
    } else {
        // both sides nonnegative; square
        &e * &e < rat(4) * d * d * b2
    };
    if !right {
        return false;
    }
    // left side: sqrt(a2) > d - sqrt(b2)
    let d2 = d * d;
    if d2 < *b2 {
        return true; // d - sqrt(b2) < 0 <= sqrt(a2)
    }
    if d2 == *b2 {
        return a2 > &Rat::zero();
    }
    // d > sqrt(b2) > 0: sqrt(a2) > d - sqrt(b2) <=> 2 d sqrt(b2) > d^2 + b2 - a2
    let f = &d2 + b2 - a2;
    if f.is_negative() {
        true
    } else {
        &f * &f < rat(4) * d * d * b2
    }
}

/// Decides |sqrt(a2) - d| <= tol with rational tol (closed band).
pub fn sqrt_within_tol(a2: &Rat, d: &Rat, tol: &Rat) -> bool {
    debug_assert!(!a2.is_negative() && !d.is_negative() && !tol.is_negative());
    let hi = d + tol;
    if a2 > &(&hi * &hi) {
        return false;
    }
    if d <= tol {
        return true;
    }
    let lo = d - tol;
    a2 >= &(&lo * &lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rat("3").unwrap(), rat(3));
        assert_eq!(parse_rat("3/4").unwrap(), frac(3, 4));
        assert_eq!(parse_rat("0.25").unwrap(), frac(1, 4));
        assert_eq!(parse_rat("-1.5").unwrap(), frac(-3, 2));
        assert!(parse_rat("1,,2").is_err());
        assert!(parse_rat("1/0").is_err());
    }

    #[test]
    fn band_membership_matches_floats() {
        // spot checks against floating point on comfortable margins
        let cases = [
            (frac(1, 4), frac(1, 2), frac(1, 16)), // sqrt(1/4)=0.5=d -> inside
            (rat(9), rat(1), rat(2)),              // 3 vs band (1-1.41,2.41) -> outside
            (rat(0), rat(1), rat(1)),              // 0 vs (0,2) -> boundary d=sqrt(b2): a2>0 fails
        ];
        let expect = [true, false, false];
        for ((a2, d, b2), want) in cases.iter().zip(expect) {
            assert_eq!(sqrt_in_open_band(a2, d, b2), want, "{a2} {d} {b2}");
        }
        // brute float cross-check on a small lattice of inputs
        for an in 0..40i128 {
            for dn in 0..10 {
                for bn in 1..6 {
                    let a2 = frac(an, 7);
                    let d = frac(dn, 3);
                    let b2 = frac(bn, 5);
                    let exact = sqrt_in_open_band(&a2, &d, &b2);
                    let (af, df, bf) = (to_f64(&a2).sqrt(), to_f64(&d), to_f64(&b2).sqrt());
                    let approx = af > df - bf && af < df + bf;
                    // disagreements may only occur within float noise of the boundary
                    if exact != approx {
                        let margin = (af - (df - bf)).abs().min((af - (df + bf)).abs());
                        assert!(margin < 1e-12, "disagreement with margin {margin}");
                    }
                }
            }
        }
    }

    #[test]
    fn tol_band() {
        assert!(sqrt_within_tol(&rat(1), &rat(1), &Rat::zero()));
        assert!(!sqrt_within_tol(&rat(2), &rat(1), &frac(1, 100)));
        assert!(sqrt_within_tol(&frac(1, 4), &frac(1, 2), &Rat::zero()));
    }
}
