//! Fixed-precision decimal rendering for result files.

/// Renders `x` in positional decimal notation with `digits` significant
/// digits. Magnitudes outside `[1e-5, 1e17)` fall back to scientific notation.
/// Non-finite values render as `nan`, `inf` and `-inf`.
pub fn sig_digits(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..17).contains(&exp) {
        return format!("{:.*e}", digits.saturating_sub(1), x);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// JSON-safe variant: non-finite values become `null`.
pub fn json_number(x: f64, digits: usize) -> String {
    if x.is_finite() {
        sig_digits(x, digits)
    } else {
        "null".into()
    }
}
