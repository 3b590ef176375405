//! Locale-independent number formatting for CSV and report output.

use impedance_core::Complex64;

/// Printed in place of `20·log10(0)`.
pub const DB_FLOOR: &str = "-999.0";

/// Relative errors at or below this are round-off and print as [`DB_FLOOR`].
pub const ZERO_RMSE: f64 = 1e-12;

const SIG_DIGITS: i32 = 6;

/// Fixed notation with six significant digits. Non-finite values print as
/// `nan`, `inf` or `-inf`.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return non_finite(x);
    }
    if x == 0.0 {
        return format!("{:.*}", (SIG_DIGITS - 1) as usize, 0.0);
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = SIG_DIGITS - 1 - magnitude;
    if decimals >= 0 {
        let s = format!("{:.*}", decimals as usize, x);
        // Rounding can carry into a new leading digit (9.999995 -> 10.00000).
        let digits = s.bytes().filter(u8::is_ascii_digit).skip_while(|&b| b == b'0').count();
        if digits > SIG_DIGITS as usize && decimals > 0 {
            return format!("{:.*}", decimals as usize - 1, x);
        }
        s
    } else {
        let scale = 10f64.powi(-decimals);
        format!("{:.0}", (x / scale).round() * scale)
    }
}

/// [`db20`] for an RMSE column, snapping round-off to the floor.
pub fn rmse_db(x: f64) -> String {
    if x.abs() <= ZERO_RMSE {
        DB_FLOOR.into()
    } else {
        db20(x)
    }
}

fn non_finite(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// `20·log10(x)` for relative errors, with [`DB_FLOOR`] for an exact zero.
pub fn db20(x: f64) -> String {
    if x == 0.0 {
        DB_FLOOR.into()
    } else if x.is_nan() || x < 0.0 {
        "nan".into()
    } else {
        sig6(20.0 * x.log10())
    }
}

/// `a+bi` where both parts get the decimals implied by six significant
/// digits of `|z|`, so rounding dust in one part prints as zero.
pub fn complex(z: Complex64) -> String {
    if !z.is_finite() {
        return format!("{}{:+}i", non_finite_or(z.re), z.im);
    }
    let norm = z.norm();
    let decimals = if norm == 0.0 {
        (SIG_DIGITS - 1) as usize
    } else {
        (SIG_DIGITS - 1 - norm.log10().floor() as i32).max(0) as usize
    };
    let part = |v: f64| {
        let s = format!("{:.*}", decimals, v);
        if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
            s.trim_start_matches('-').to_string()
        } else {
            s
        }
    };
    let (re, im) = (part(z.re), part(z.im));
    match im.strip_prefix('-') {
        Some(mag) => format!("{re}-{mag}i"),
        None => format!("{re}+{im}i"),
    }
}

fn non_finite_or(x: f64) -> String {
    if x.is_finite() {
        sig6(x)
    } else {
        non_finite(x)
    }
}
