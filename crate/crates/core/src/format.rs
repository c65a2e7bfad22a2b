//! Fixed-precision number rendering for CSV and JSON output.

/// Significant digits used in JSON output.
pub const JSON_DIGITS: usize = 17;
/// Significant digits used in CSV output.
pub const CSV_DIGITS: usize = 10;

/// Rounds `x` to `digits` significant digits and drops trailing zeros.
/// Plain notation is used for exponents in `-6..digits`, scientific
/// otherwise. Non-finite values render as `NaN`, `inf` or `-inf`.
pub fn significant(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if x < 0.0 { "-" } else { "" };
    let all: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let d = all.trim_end_matches('0');
    if exp < -6 || exp >= digits as i32 {
        let m = if d.len() > 1 { format!("{}.{}", &d[..1], &d[1..]) } else { d.to_string() };
        format!("{sign}{m}e{exp}")
    } else if exp >= 0 {
        let int_len = exp as usize + 1;
        if d.len() <= int_len {
            format!("{sign}{d}{}", "0".repeat(int_len - d.len()))
        } else {
            format!("{sign}{}.{}", &d[..int_len], &d[int_len..])
        }
    } else {
        format!("{sign}0.{}{d}", "0".repeat((-exp - 1) as usize))
    }
}

pub fn csv_number(x: f64) -> String {
    significant(x, CSV_DIGITS)
}

/// JSON has no non-finite numbers; those become `null`.
pub fn json_number(x: f64) -> String {
    if x.is_finite() {
        significant(x, JSON_DIGITS)
    } else {
        "null".into()
    }
}
