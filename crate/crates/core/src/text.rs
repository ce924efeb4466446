//! Whitespace + punctuation tokenizer shared by every module.
//!
//! A word is a maximal run of alphanumeric characters; a single `'`, `’`, `-`
//! or `–` between two alphanumerics stays inside the word, so possessives
//! ("Henderson's"), contractions ("doesn't") and compounds ("forty-six")
//! are single tokens. Every other non-space character is its own token.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Byte range in the source string.
    pub start: usize,
    pub end: usize,
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '’' | '-' | '–')
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_alphanumeric() {
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j].1;
                if cj.is_alphanumeric() {
                    j += 1;
                } else if is_joiner(cj) && j + 1 < chars.len() && chars[j + 1].1.is_alphanumeric() {
                    j += 2;
                } else {
                    break;
                }
            }
            let end = chars.get(j).map(|(o, _)| *o).unwrap_or(text.len());
            out.push(Token { text: text[start..end].to_string(), start, end });
            i = j;
        } else {
            let end = start + c.len_utf8();
            out.push(Token { text: text[start..end].to_string(), start, end });
            i += 1;
        }
    }
    out
}

pub fn token_strings(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text).collect()
}

pub fn is_word(token: &str) -> bool {
    token.chars().next().is_some_and(|c| c.is_alphanumeric())
}

pub fn is_all_digits(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_digit())
}

pub fn is_title_case(token: &str) -> bool {
    token.chars().next().is_some_and(|c| c.is_uppercase())
}

/// Uppercase the first character.
pub fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Splits a trailing possessive (`'s`, `’s`, `'`) off a word.
pub fn split_possessive(word: &str) -> (&str, &str) {
    for suffix in ["'s", "’s", "'S"] {
        if let Some(stem) = word.strip_suffix(suffix) {
            if !stem.is_empty() {
                return (stem, &word[stem.len()..]);
            }
        }
    }
    (word, "")
}

/// Replace byte ranges (non-overlapping, any order) in `text`.
pub fn splice(text: &str, edits: &[(usize, usize, String)]) -> String {
    let mut sorted: Vec<&(usize, usize, String)> = edits.iter().collect();
    sorted.sort_by_key(|e| e.0);
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for (start, end, replacement) in sorted {
        out.push_str(&text[cursor..*start]);
        out.push_str(replacement);
        cursor = *end;
    }
    out.push_str(&text[cursor..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation_and_keeps_possessives() {
        assert_eq!(
            token_strings("Peter Henderson's album, (1979)."),
            vec!["Peter", "Henderson's", "album", ",", "(", "1979", ")", "."]
        );
    }

    #[test]
    fn keeps_hyphenated_numbers_and_contractions() {
        assert_eq!(token_strings("forty-six doesn't"), vec!["forty-six", "doesn't"]);
        assert_eq!(token_strings("46:06"), vec!["46", ":", "06"]);
    }

    #[test]
    fn spans_index_the_source() {
        let s = "May–December 1978";
        for t in tokenize(s) {
            assert_eq!(&s[t.start..t.end], t.text);
        }
    }

    #[test]
    fn possessive_split() {
        assert_eq!(split_possessive("Henderson's"), ("Henderson", "'s"));
        assert_eq!(split_possessive("rock"), ("rock", ""));
    }
}
