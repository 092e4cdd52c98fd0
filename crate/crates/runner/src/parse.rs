//! Extracting a 0-100 judgment from raw model text.
//!
//! Direct responses must contain exactly one number; anything else is
//! ambiguous and rejected rather than guessed at. CoT responses are read
//! from the last "ANSWER:" line, falling back to the last number anywhere
//! in the text when the model ignored the convention. Which path produced
//! the value is reported so sweeps can log it per record.

use collider_core::data::PromptStyle;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How the numeric value was extracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMethod {
    /// Direct style: the sole number in the text.
    SingleNumber,
    /// CoT style: from the last line matching the "ANSWER:" convention.
    AnswerLine,
    /// CoT style: convention missing, last number in the text.
    LastNumber,
}

/// A successfully extracted judgment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parsed {
    pub value: f64,
    pub method: ParseMethod,
}

/// Why a response text yielded no judgment. Each variant keeps the raw text
/// so transcripts and error reports stay self-explanatory.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("empty response")]
    Empty,
    #[error("no number found in response {0:?}")]
    NoNumber(String),
    #[error("ambiguous response: found {count} numbers in {text:?}")]
    Ambiguous { count: usize, text: String },
    #[error("value {value} outside the 0-100 scale in response {text:?}")]
    OutOfRange { value: f64, text: String },
}

/// All number tokens in the text, left to right. A '-' joins a token only
/// when it introduces one (so "60-70" stays two positive numbers while a
/// bare "-5" survives to fail the range check rather than masquerade as 5).
fn number_tokens(text: &str) -> Vec<f64> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let digit_next = |j: usize| {
            chars
                .get(j)
                .is_some_and(|d| d.is_ascii_digit() || *d == '.')
        };
        let starts = c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit))
            || (c == '-' && digit_next(i + 1) && (i == 0 || !chars[i - 1].is_ascii_digit()));
        if !starts {
            i += 1;
            continue;
        }
        let start = i;
        if c == '-' {
            i += 1;
        }
        while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
            i += 1;
        }
        let token: String = chars[start..i].iter().collect();
        if let Ok(v) = token.parse::<f64>() {
            out.push(v);
        }
    }
    out
}

fn in_range(value: f64, method: ParseMethod, text: &str) -> Result<Parsed, ParseError> {
    if (0.0..=100.0).contains(&value) {
        Ok(Parsed { value, method })
    } else {
        Err(ParseError::OutOfRange {
            value,
            text: text.to_string(),
        })
    }
}

/// Extracts the judgment from one raw response.
pub fn parse_response(style: PromptStyle, text: &str) -> Result<Parsed, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    match style {
        PromptStyle::Direct => {
            let numbers = number_tokens(text);
            match numbers.as_slice() {
                [] => Err(ParseError::NoNumber(text.to_string())),
                [value] => in_range(*value, ParseMethod::SingleNumber, text),
                many => Err(ParseError::Ambiguous {
                    count: many.len(),
                    text: text.to_string(),
                }),
            }
        }
        PromptStyle::Cot => {
            // The match is case-insensitive; to_ascii_uppercase preserves
            // byte offsets, so the slice after the marker is taken from the
            // original line.
            for line in text.lines().rev() {
                if let Some(pos) = line.to_ascii_uppercase().find("ANSWER:") {
                    let tail = &line[pos + "ANSWER:".len()..];
                    if let Some(&value) = number_tokens(tail).first() {
                        return in_range(value, ParseMethod::AnswerLine, text);
                    }
                    // The convention line exists but carries no number;
                    // fall back rather than scan older ANSWER lines.
                    break;
                }
            }
            match number_tokens(text).last() {
                Some(&value) => in_range(value, ParseMethod::LastNumber, text),
                None => Err(ParseError::NoNumber(text.to_string())),
            }
        }
    }
}
