//! Turkish cardinal readings of decimal numerals.

use crate::error::{Error, Result};

const UNITS: [&str; 10] = ["", "bir", "iki", "üç", "dört", "beş", "altı", "yedi", "sekiz", "dokuz"];
const TENS: [&str; 10] = [
    "", "on", "yirmi", "otuz", "kırk", "elli", "altmış", "yetmiş", "seksen", "doksan",
];
/// Scale words for successive groups of three digits.
const SCALES: [&str; 5] = ["", "bin", "milyon", "milyar", "trilyon"];
const MAX_DIGITS: usize = 15;

fn push_triple(n: u64, out: &mut Vec<&'static str>) {
    let (h, t, u) = ((n / 100) as usize, (n / 10 % 10) as usize, (n % 10) as usize);
    if h > 1 {
        out.push(UNITS[h]);
    }
    if h > 0 {
        out.push("yüz");
    }
    if t > 0 {
        out.push(TENS[t]);
    }
    if u > 0 {
        out.push(UNITS[u]);
    }
}

/// Reading of a non-negative integer below 10^15.
pub fn integer_to_words(n: u64) -> Result<String> {
    if n >= 10u64.pow(MAX_DIGITS as u32) {
        return Err(Error::Range(format!("{n} is too large to read")));
    }
    if n == 0 {
        return Ok("sıfır".to_string());
    }
    let mut groups = Vec::new();
    let mut rest = n;
    while rest > 0 {
        groups.push(rest % 1000);
        rest /= 1000;
    }
    let mut words = Vec::new();
    for (scale, g) in groups.iter().enumerate().rev() {
        if *g == 0 {
            continue;
        }
        if !(scale == 1 && *g == 1) {
            push_triple(*g, &mut words);
        }
        if scale > 0 {
            words.push(SCALES[scale]);
        }
    }
    Ok(words.join(" "))
}

fn digits_value(digits: &str) -> Result<u64> {
    let trimmed = digits.trim_start_matches('0');
    if trimmed.len() > MAX_DIGITS {
        return Err(Error::Range(format!("{digits} has more than {MAX_DIGITS} significant digits")));
    }
    Ok(trimmed.parse().unwrap_or(0))
}

/// Read a numeral such as `-12`, `3.25` or `1000,5`. The fractional part
/// is read as a number after "virgül", each leading zero as "sıfır".
pub fn number_to_words(numeral: &str) -> Result<String> {
    let bad = || Error::parse(1, format!("{numeral:?} is not a decimal numeral"));
    let s = numeral.trim();
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match body.find(['.', ',']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let all_digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int_part) || frac_part.is_some_and(|f| !all_digits(f)) {
        return Err(bad());
    }
    let int_value = digits_value(int_part)?;
    let mut words = Vec::new();
    let mut nonzero = int_value > 0;
    words.push(integer_to_words(int_value)?);
    if let Some(frac) = frac_part {
        words.push("virgül".to_string());
        let zeros = frac.len() - frac.trim_start_matches('0').len();
        let rest = &frac[zeros..];
        for _ in 0..zeros {
            words.push("sıfır".to_string());
        }
        if !rest.is_empty() {
            nonzero = true;
            words.push(integer_to_words(digits_value(rest)?)?);
        }
    }
    if negative && nonzero {
        words.insert(0, "eksi".to_string());
    }
    Ok(words.join(" "))
}
