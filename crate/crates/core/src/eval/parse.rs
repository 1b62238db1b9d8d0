use std::sync::LazyLock;

use regex::{Captures, Regex};

use super::{EvalError, TemporalInterval};
use crate::TimeUnit;

const NUM: &str = r"(\d+(?:\.\d+)?|\.\d+)";
const SECONDS: &str = r"(\s*(?:seconds?|secs?|s)\b)?";

static FROM_TO: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"(?i)\bfrom\s+(frames?\s*)?{NUM}{SECONDS}\s+to\s+(frames?\s*)?{NUM}{SECONDS}"
    ))
    .expect("valid pattern")
});

static BARE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"(?i){NUM}{SECONDS}")).expect("valid pattern"));

fn number(caps: &Captures, i: usize, text: &str) -> Result<f64, EvalError> {
    caps[i]
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| EvalError::ParseFailure(text.to_string()))
}

/// [`parse_grounding_answer_as`] for prompts that asked in frames.
pub fn parse_grounding_answer(text: &str) -> Result<TemporalInterval, EvalError> {
    parse_grounding_answer_as(text, TimeUnit::Frames)
}

/// Reads the first `from <x> to <y>` span in a reply, falling back to the first
/// two numbers anywhere in it. A seconds suffix (`3.5s`, `4 seconds`) marks the
/// span as seconds and a `Frame` prefix as frames; bare numbers take
/// `prompt_unit`. Reversed spans are swapped.
pub fn parse_grounding_answer_as(text: &str, prompt_unit: TimeUnit) -> Result<TemporalInterval, EvalError> {
    let fail = || EvalError::ParseFailure(text.to_string());
    let (start, end, unit) = if let Some(c) = FROM_TO.captures(text) {
        let unit = if c.get(3).is_some() || c.get(6).is_some() {
            TimeUnit::Seconds
        } else if c.get(1).is_some() || c.get(4).is_some() {
            TimeUnit::Frames
        } else {
            prompt_unit
        };
        (number(&c, 2, text)?, number(&c, 5, text)?, unit)
    } else {
        let mut found = BARE.captures_iter(text);
        let a = found.next().ok_or_else(fail)?;
        let b = found.next().ok_or_else(fail)?;
        let unit = if a.get(2).is_some() || b.get(2).is_some() {
            TimeUnit::Seconds
        } else {
            prompt_unit
        };
        (number(&a, 1, text)?, number(&b, 1, text)?, unit)
    };
    TemporalInterval::new(start, end, unit).map_err(|_| fail())
}
