//! Deterministic rule-based answer verification.
//!
//! `verify` never inspects the trajectory: it compares the boxed answer
//! against the reference under a declared, test-pinned rule set — canonical
//! text equality, numeric equality within tolerance, and option-letter
//! mapping for multiple choice. It is a pure function and never fails on
//! content.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Absolute comparison floor applied near zero, so tiny references do not
/// demand impossible relative precision.
pub const ABS_TOLERANCE_FLOOR: f64 = 1e-9;

/// How option letters participate in verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptionLetterMode {
    /// Letters only compare against letters.
    LetterOnly,
    /// A letter also matches the option content it maps to, and vice versa.
    #[default]
    ContentAllowed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifierConfig {
    /// Relative tolerance for numeric equality.
    pub numeric_tolerance: f64,
    /// Strip a trailing unit token from numeric answers ("10 cm" == "10").
    pub strip_units: bool,
    /// Case-fold text before comparison.
    pub case_fold: bool,
    pub option_letter_mode: OptionLetterMode,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig {
            numeric_tolerance: 1e-6,
            strip_units: true,
            case_fold: true,
            option_letter_mode: OptionLetterMode::ContentAllowed,
        }
    }
}

static NUMBER_PREFIX: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(.*)$").unwrap()
});
static THOUSANDS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\d),(\d{3})\b").unwrap());

/// Canonicalizes an answer string: trim, strip surrounding LaTeX wrappers,
/// fold case, drop thousands separators, strip trailing units, collapse
/// whitespace, and render fully-numeric strings in canonical decimal form.
///
/// Returns `None` when nothing remains — an unanswerable value, distinct
/// from any canonical text.
pub fn normalize_answer(text: &str, config: &VerifierConfig) -> Option<String> {
    let mut s = strip_wrappers(text.trim());
    if config.case_fold {
        s = s.to_lowercase();
    }
    loop {
        let next = THOUSANDS.replace_all(&s, "$1$2").into_owned();
        if next == s {
            break;
        }
        s = next;
    }
    if config.strip_units {
        s = strip_trailing_unit(&s);
    }
    let s = collapse_whitespace(s.trim());
    if s.is_empty() {
        return None;
    }
    Some(canonical_number(&s).unwrap_or(s))
}

/// Repeatedly removes math-mode delimiters and whole-string wrapper commands.
fn strip_wrappers(text: &str) -> String {
    let mut s = text.trim().to_string();
    loop {
        let before = s.clone();
        for (open, close) in [("$$", "$$"), ("$", "$"), ("\\(", "\\)"), ("\\[", "\\]")] {
            if s.len() > open.len() + close.len() && s.starts_with(open) && s.ends_with(close) {
                s = s[open.len()..s.len() - close.len()].trim().to_string();
            }
        }
        for cmd in ["\\text", "\\mathrm", "\\mbox", "\\textbf", "\\mathbf"] {
            let open = format!("{cmd}{{");
            if s.starts_with(&open) && s.ends_with('}') && brace_balanced_whole(&s[cmd.len()..]) {
                s = s[open.len()..s.len() - 1].trim().to_string();
            }
        }
        if s.len() >= 2 && s.starts_with('{') && s.ends_with('}') && brace_balanced_whole(&s) {
            s = s[1..s.len() - 1].trim().to_string();
        }
        if s == before {
            return s;
        }
    }
}

/// True when the string is a single `{...}` group (the opening brace closes
/// at the final byte).
fn brace_balanced_whole(s: &str) -> bool {
    let bytes = s.as_bytes();
    if bytes.first() != Some(&b'{') || bytes.last() != Some(&b'}') {
        return false;
    }
    let mut depth = 0usize;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'{' => depth += 1,
            b'}' => {
                if depth == 0 {
                    return false;
                }
                depth -= 1;
                if depth == 0 {
                    return i == bytes.len() - 1;
                }
            }
            _ => {}
        }
    }
    false
}

/// Strips a trailing unit token after a numeric prefix. A unit may contain
/// letters, `° % µ · / ^ ² ³` and spaces; digits are only allowed directly
/// after `^` (for "m^2"). "10 x 5" is left alone.
fn strip_trailing_unit(s: &str) -> String {
    let Some(caps) = NUMBER_PREFIX.captures(s) else {
        return s.to_string();
    };
    let number = caps.get(1).unwrap().as_str();
    let rest = caps.get(2).unwrap().as_str();
    let trimmed = rest.trim();
    if trimmed.is_empty() {
        return s.to_string();
    }
    let mut prev = '\0';
    for c in trimmed.chars() {
        let ok = c.is_ascii_alphabetic()
            || matches!(c, ' ' | '°' | '%' | 'µ' | '·' | '/' | '^' | '²' | '³' | '.')
            || (c.is_ascii_digit() && prev == '^');
        if !ok {
            return s.to_string();
        }
        prev = c;
    }
    number.to_string()
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Renders a fully-numeric string in canonical decimal form ("007" → "7",
/// ".5" → "0.5", "1e2" → "100"). Non-numeric strings pass through.
fn canonical_number(s: &str) -> Option<String> {
    let v: f64 = s.parse().ok()?;
    if !v.is_finite() {
        return None;
    }
    Some(format!("{}", v + 0.0))
}

fn parse_numeric(normalized: &str) -> Option<f64> {
    normalized.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn numbers_match(a: f64, b: f64, rel_tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= ABS_TOLERANCE_FLOOR.max(rel_tol * scale)
}

/// Resolves a normalized candidate to an option index, by letter first and
/// then by content (when the mode allows).
fn resolve_option(
    normalized: &str,
    options: &[(String, String)],
    config: &VerifierConfig,
) -> Option<usize> {
    let stripped = normalized
        .trim_matches(|c: char| matches!(c, '(' | ')' | '.' | ':' | '*'))
        .trim();
    for (idx, (letter, _)) in options.iter().enumerate() {
        if stripped.eq_ignore_ascii_case(letter.trim()) {
            return Some(idx);
        }
    }
    if config.option_letter_mode == OptionLetterMode::ContentAllowed {
        for (idx, (_, content)) in options.iter().enumerate() {
            if let Some(c) = normalize_answer(content, config) {
                if c == normalized {
                    return Some(idx);
                }
            }
        }
    }
    None
}

/// Deterministic verification: 1 iff the boxed answer matches the reference
/// under canonical equality, numeric tolerance, or option-letter mapping.
/// An absent boxed answer never verifies. Never fails on content.
pub fn verify(
    boxed_answer: Option<&str>,
    reference: &str,
    options: Option<&[(String, String)]>,
    config: &VerifierConfig,
) -> bool {
    let Some(boxed) = boxed_answer else {
        return false;
    };
    let (Some(a), Some(b)) = (normalize_answer(boxed, config), normalize_answer(reference, config))
    else {
        return false;
    };
    if a == b {
        return true;
    }
    if let (Some(x), Some(y)) = (parse_numeric(&a), parse_numeric(&b)) {
        if numbers_match(x, y, config.numeric_tolerance) {
            return true;
        }
    }
    if let Some(options) = options {
        if let (Some(i), Some(j)) =
            (resolve_option(&a, options, config), resolve_option(&b, options, config))
        {
            return i == j;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> VerifierConfig {
        VerifierConfig::default()
    }

    #[test]
    fn normalizes_units_and_separators() {
        assert_eq!(normalize_answer("  10 cm ", &cfg()).as_deref(), Some("10"));
        assert_eq!(normalize_answer("10", &cfg()).as_deref(), Some("10"));
        assert_eq!(normalize_answer("1,000", &cfg()).as_deref(), Some("1000"));
        assert_eq!(normalize_answer("12,345,678", &cfg()).as_deref(), Some("12345678"));
        assert_eq!(normalize_answer("1,23", &cfg()).as_deref(), Some("1,23"));
    }

    #[test]
    fn normalizes_latex_wrappers_and_numbers() {
        assert_eq!(normalize_answer("$\\frac12$", &cfg()).as_deref(), Some("\\frac12"));
        assert_eq!(normalize_answer("\\text{blue}", &cfg()).as_deref(), Some("blue"));
        assert_eq!(normalize_answer("$$ 3.50 $$", &cfg()).as_deref(), Some("3.5"));
        assert_eq!(normalize_answer("{42}", &cfg()).as_deref(), Some("42"));
        assert_eq!(normalize_answer(".5", &cfg()).as_deref(), Some("0.5"));
        assert_eq!(normalize_answer("007", &cfg()).as_deref(), Some("7"));
        assert_eq!(normalize_answer("1e2", &cfg()).as_deref(), Some("100"));
    }

    #[test]
    fn empty_after_normalization_is_unanswerable() {
        assert_eq!(normalize_answer("   ", &cfg()), None);
        assert_eq!(normalize_answer("$ $", &cfg()), None);
    }

    #[test]
    fn dimension_answers_keep_their_digits() {
        assert_eq!(normalize_answer("10 x 5", &cfg()).as_deref(), Some("10 x 5"));
        assert_eq!(normalize_answer("10 m^2", &cfg()).as_deref(), Some("10"));
    }

    #[test]
    fn verify_exact_and_absent() {
        assert!(verify(Some("10"), "10", None, &cfg()));
        assert!(!verify(None, "10", None, &cfg()));
    }

    #[test]
    fn verify_numeric_tolerance() {
        assert!(verify(Some("3.1415926"), "3.1415927", None, &cfg()));
        assert!(!verify(Some("3.14"), "3.15", None, &cfg()));
        assert!(verify(Some("0"), "1e-10", None, &cfg()));
        assert!(verify(Some("1000000.5"), "1000000.4999999", None, &cfg()));
    }

    #[test]
    fn monotone_in_tolerance() {
        let pairs = [("1.0", "1.002"), ("100", "100.4"), ("5", "5.0000001")];
        let mut tols = [1e-8, 1e-6, 1e-4, 1e-2, 1e-1];
        tols.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in pairs {
            let mut last = false;
            for t in tols {
                let c = VerifierConfig { numeric_tolerance: t, ..cfg() };
                let v = verify(Some(a), b, None, &c);
                assert!(v || !last, "tolerance monotonicity broken at t={t}");
                last = v;
            }
        }
    }

    #[test]
    fn verify_option_letters_both_directions() {
        let options = vec![("A".to_string(), "circle".to_string()),
                           ("B".to_string(), "triangle".to_string())];
        assert!(verify(Some("B"), "triangle", Some(&options), &cfg()));
        assert!(verify(Some("triangle"), "B", Some(&options), &cfg()));
        assert!(verify(Some("(B)"), "B", Some(&options), &cfg()));
        assert!(!verify(Some("A"), "triangle", Some(&options), &cfg()));
        assert!(!verify(Some("B"), "circle", Some(&options), &cfg()));
        // exhaustive 2-option truth table, letters against contents
        for (boxed, reference, want) in [
            ("A", "circle", true),
            ("A", "triangle", false),
            ("B", "circle", false),
            ("B", "triangle", true),
        ] {
            assert_eq!(verify(Some(boxed), reference, Some(&options), &cfg()), want);
        }
    }

    #[test]
    fn letter_only_mode_disables_content_mapping() {
        let options = vec![("A".to_string(), "circle".to_string()),
                           ("B".to_string(), "triangle".to_string())];
        let c = VerifierConfig { option_letter_mode: OptionLetterMode::LetterOnly, ..cfg() };
        assert!(!verify(Some("B"), "triangle", Some(&options), &c));
        assert!(verify(Some("b"), "B", Some(&options), &c));
    }

    #[test]
    fn symmetric_for_free_form_answers() {
        for (a, b) in [("10", "10.0"), ("cat", "dog"), ("1,000", "1000"), ("x", "x")] {
            assert_eq!(
                verify(Some(a), b, None, &cfg()),
                verify(Some(b), a, None, &cfg())
            );
        }
    }
}
