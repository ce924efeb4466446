//! Cardinal numerals 0–9999 between digit and word form.

use crate::error::{ForgeError, Result};

const ONES: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen",
];
const TENS: [&str; 10] = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

pub const MAX_NUMERAL: u32 = 9999;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToWords,
    ToDigits,
}

fn below_hundred(n: u32) -> String {
    match n {
        0..=19 => ONES[n as usize].to_string(),
        _ if n.is_multiple_of(10) => TENS[(n / 10) as usize].to_string(),
        _ => format!("{}-{}", TENS[(n / 10) as usize], ONES[(n % 10) as usize]),
    }
}

/// English words for `n` ≤ 9999, e.g. 1234 → "one thousand two hundred thirty-four".
pub fn to_words(n: u32) -> Result<String> {
    if n > MAX_NUMERAL {
        return Err(ForgeError::Conversion(format!("{n} is outside 0..={MAX_NUMERAL}")));
    }
    if n < 100 {
        return Ok(below_hundred(n));
    }
    let mut parts = Vec::new();
    let (thousands, rest) = (n / 1000, n % 1000);
    if thousands > 0 {
        parts.push(format!("{} thousand", ONES[thousands as usize]));
    }
    let (hundreds, rest) = (rest / 100, rest % 100);
    if hundreds > 0 {
        parts.push(format!("{} hundred", ONES[hundreds as usize]));
    }
    if rest > 0 {
        parts.push(below_hundred(rest));
    }
    Ok(parts.join(" "))
}

fn unit_value(word: &str) -> Option<u32> {
    ONES.iter().position(|w| *w == word).map(|i| i as u32)
}

fn tens_value(word: &str) -> Option<u32> {
    TENS.iter().position(|w| !w.is_empty() && *w == word).map(|i| 10 * i as u32)
}

/// Parse 0..=99 from one or two words ("forty", "forty six", "seventeen").
fn parse_below_hundred(words: &[&str]) -> Option<u32> {
    match words {
        [w] => unit_value(w).or_else(|| tens_value(w)),
        [t, u] => {
            let tens = tens_value(t)?;
            let unit = unit_value(u).filter(|u| (1..=9).contains(u))?;
            Some(tens + unit)
        }
        _ => None,
    }
}

fn parse_standard(words: &[&str]) -> Option<u32> {
    let mut total = 0u32;
    let mut rest = words;
    if let Some(pos) = rest.iter().position(|w| *w == "thousand") {
        let n = parse_below_hundred(&rest[..pos]).filter(|n| (1..=9).contains(n))?;
        total += n * 1000;
        rest = &rest[pos + 1..];
    }
    if let Some(pos) = rest.iter().position(|w| *w == "hundred") {
        let n = parse_below_hundred(&rest[..pos])?;
        // "nineteen hundred" style years are allowed when nothing precedes them.
        if n == 0 || (n > 9 && total > 0) {
            return None;
        }
        total += n * 100;
        rest = &rest[pos + 1..];
    }
    if rest.first() == Some(&"and") && total > 0 {
        rest = &rest[1..];
    }
    if rest.is_empty() {
        return if words.is_empty() { None } else { Some(total) };
    }
    let tail = parse_below_hundred(rest)?;
    if total > 0 && tail == 0 {
        return None;
    }
    Some(total + tail)
}

/// Year readings: "nineteen seventy-nine", "nineteen oh five".
fn parse_year(words: &[&str]) -> Option<u32> {
    if words.len() < 2 {
        return None;
    }
    let century = parse_below_hundred(&words[..1]).filter(|n| (10..=99).contains(n))?;
    let rest = &words[1..];
    let tail = match rest {
        ["oh", u] => unit_value(u).filter(|u| (1..=9).contains(u))?,
        _ => parse_below_hundred(rest).filter(|n| (10..=99).contains(n))?,
    };
    Some(century * 100 + tail)
}

/// Parse an English number phrase in 0..=9999.
pub fn words_to_number(phrase: &str) -> Result<u32> {
    let lowered = phrase.trim().to_lowercase();
    let words: Vec<&str> = lowered
        .split(|c: char| c.is_whitespace() || c == '-' || c == '–')
        .filter(|w| !w.is_empty())
        .collect();
    parse_standard(&words)
        .or_else(|| parse_year(&words))
        .filter(|n| *n <= MAX_NUMERAL)
        .ok_or_else(|| ForgeError::Conversion(format!("not a number phrase: {phrase:?}")))
}

fn digits_to_number(s: &str) -> Option<u32> {
    let s = s.trim();
    if s.is_empty() || s.len() > 4 || !s.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Convert between digit and word form; idempotent on input already in the target form.
pub fn normalize_numeral(s: &str, direction: Direction) -> Result<String> {
    let n = match digits_to_number(s) {
        Some(n) => n,
        None => words_to_number(s)?,
    };
    match direction {
        Direction::ToDigits => Ok(n.to_string()),
        Direction::ToWords => to_words(n),
    }
}

/// Alternate surface form of a numeral, if `s` is one.
pub fn alternate_form(s: &str) -> Option<String> {
    if digits_to_number(s).is_some() {
        normalize_numeral(s, Direction::ToWords).ok()
    } else {
        normalize_numeral(s, Direction::ToDigits).ok()
    }
}

pub fn is_number_word(word: &str) -> bool {
    let w = word.to_lowercase();
    !w.chars().any(|c| c.is_ascii_digit()) && words_to_number(&w).is_ok()
}
