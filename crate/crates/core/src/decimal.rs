//! Exact decimal text for doubles and double-doubles.
//!
//! A decimal with at most 17 significant digits denotes the nearest double.
//! Longer decimals denote the nearest double-double on the canonical grid
//! (see [`Dd::canonical`]). `format_dd` emits the shortest string that reads
//! back to the same value.

use num_bigint::{BigInt, Sign};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::dd::{quantum_exp, Dd};

/// `x = m * 2^e` exactly, `m` signed.
fn decode(x: f64) -> (BigInt, i32) {
    if x == 0.0 {
        return (BigInt::zero(), 0);
    }
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (m, e) = if biased == 0 { (frac, -1074) } else { (frac | (1u64 << 52), biased - 1075) };
    let m = BigInt::from(m);
    (if x < 0.0 { -m } else { m }, e)
}

fn pow2(k: u32) -> BigInt {
    BigInt::one() << k
}

fn pow10(k: u32) -> BigInt {
    num_traits::pow(BigInt::from(10), k as usize)
}

/// Round `num / den` to the nearest integer, ties to even. `den > 0`.
fn div_round(num: &BigInt, den: &BigInt) -> BigInt {
    let neg = num.is_negative();
    let n = num.abs();
    let q = &n / den;
    let r = &n - &q * den;
    let twice = &r * 2;
    let q = if twice > *den || (twice == *den && (&q % 2u32) == BigInt::one()) { q + 1 } else { q };
    if neg {
        -q
    } else {
        q
    }
}

/// Decimal with exactly `digits` significant digits (trailing zeros trimmed).
fn format_digits(x: Dd, digits: u32) -> String {
    let (m1, e1) = decode(x.hi);
    let (m2, e2) = decode(x.lo);
    let e = if x.lo == 0.0 { e1 } else { e1.min(e2) };
    let n = (m1 << (e1 - e) as u32) + if x.lo == 0.0 { BigInt::zero() } else { m2 << (e2 - e) as u32 };
    let neg = n.sign() == Sign::Minus;
    let n = n.abs();

    let mut k = x.hi.abs().log10().floor() as i32;
    let lower = pow10(digits - 1);
    let upper = pow10(digits);
    let d = loop {
        let s = digits as i32 - 1 - k;
        let mut num = n.clone();
        let mut den = BigInt::one();
        if e >= 0 {
            num <<= e as u32;
        } else {
            den = pow2((-e) as u32);
        }
        if s >= 0 {
            num *= pow10(s as u32);
        } else {
            den *= pow10((-s) as u32);
        }
        let d = div_round(&num, &den);
        if d >= upper {
            k += 1;
        } else if d < lower {
            k -= 1;
        } else {
            break d;
        }
    };
    let text = d.to_string();
    let trimmed = text.trim_end_matches('0');
    let (lead, rest) = trimmed.split_at(1);
    let sign = if neg { "-" } else { "" };
    if rest.is_empty() {
        format!("{sign}{lead}e{k}")
    } else {
        format!("{sign}{lead}.{rest}e{k}")
    }
}

/// Shortest decimal that reads back as the same value.
pub fn format_dd(x: Dd) -> String {
    if x.lo == 0.0 || !x.hi.is_finite() {
        return format!("{:?}", x.hi);
    }
    for digits in 18..=40 {
        let s = format_digits(x, digits);
        if parse_dd(&s).map(|y| y == x).unwrap_or(false) {
            return s;
        }
    }
    format_digits(x, 40)
}

pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Parse a decimal string; see the module docs for the precision rule.
pub fn parse_dd(s: &str) -> Result<Dd, String> {
    let t = s.trim();
    let hi: f64 = t.parse().map_err(|_| format!("not a decimal number: {s:?}"))?;
    if !hi.is_finite() {
        return Ok(Dd::from(hi));
    }
    let (neg, body) = match t.as_bytes().first() {
        Some(b'-') => (true, &t[1..]),
        Some(b'+') => (false, &t[1..]),
        _ => (false, t),
    };
    let (mant, exp) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i32>().map_err(|_| format!("bad exponent in {s:?}"))?),
        None => (body, 0),
    };
    let (int_part, frac_part) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    let all: String = format!("{int_part}{frac_part}");
    let significant = all.trim_start_matches('0');
    if significant.len() <= 17 || hi == 0.0 {
        return Ok(Dd::from(hi));
    }
    let Some(qe) = quantum_exp(hi) else {
        return Ok(Dd::from(hi));
    };
    let mut m: BigInt = all.parse().map_err(|_| format!("bad digits in {s:?}"))?;
    if neg {
        m = -m;
    }
    let q = exp - frac_part.len() as i32;
    let (h, he) = decode(hi);

    // (m*10^q - h*2^he) / 2^qe over a common integer denominator
    let mut num_a = m;
    let mut num_b = h;
    let mut den = BigInt::one();
    if q >= 0 {
        num_a *= pow10(q as u32);
    } else {
        let p = pow10((-q) as u32);
        num_b *= &p;
        den *= p;
    }
    if he >= 0 {
        num_b <<= he as u32;
    } else {
        let p = pow2((-he) as u32);
        num_a *= &p;
        den *= p;
    }
    let mut num = num_a - num_b;
    if qe >= 0 {
        den <<= qe as u32;
    } else {
        num <<= (-qe) as u32;
    }
    let steps = div_round(&num, &den).to_i64().ok_or_else(|| format!("low word out of range in {s:?}"))?;
    let lo = steps as f64 * 2f64.powi(qe);
    Ok(Dd::new(hi, lo))
}
