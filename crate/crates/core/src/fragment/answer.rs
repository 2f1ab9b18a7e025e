/// Tolerance used for numeric answers when none is declared.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Trim, lowercase, and collapse internal whitespace runs to one space.
pub fn normalize_answer(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parses an optionally signed decimal (`-3`, `2.50`, `.5`); no exponent.
pub fn parse_decimal(text: &str) -> Option<f64> {
    let digits = text.strip_prefix(['-', '+']).unwrap_or(text);
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    let valid = all_digits(int)
        && match frac {
            None => !int.is_empty(),
            Some(f) => !f.is_empty() && all_digits(f),
        };
    if !valid {
        return None;
    }
    text.parse().ok()
}

/// Compares two already-normalized answers. When both parse as decimals the
/// comparison is numeric within `tolerance`, otherwise it is textual.
pub fn answers_match(left: &str, right: &str, tolerance: f64) -> bool {
    match (parse_decimal(left), parse_decimal(right)) {
        (Some(a), Some(b)) => (a - b).abs() <= tolerance,
        _ => left == right,
    }
}
