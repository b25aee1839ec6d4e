//! CSV emission helpers with a fixed numeric format.
//!
//! Numbers are written with up to six significant digits, fixed notation
//! for exponents in [-4, 6) and scientific (`1.23457e8` style) outside,
//! trailing zeros trimmed. Positive infinity is the literal token `inf`
//! and marks an infeasible instance. NaN and negative infinity are never
//! valid outputs; they indicate a solver bug and turn into an error so
//! the process can fail loudly instead of shipping a poisoned table.

use crate::error::{Error, Result};

/// Formats one value for a CSV cell.
pub fn fmt6(v: f64) -> Result<String> {
    if v.is_nan() {
        return Err(Error::Solver("NaN reached the CSV writer".into()));
    }
    if v.is_infinite() {
        if v > 0.0 {
            return Ok("inf".to_string());
        }
        return Err(Error::Solver(
            "negative infinity reached the CSV writer".into(),
        ));
    }
    if v == 0.0 {
        return Ok("0".to_string());
    }

    // Round to six significant digits first; all layout decisions use
    // the rounded exponent so a carry like 9.999999 -> 1.00000e1 lands
    // in the right branch.
    let sci = format!("{:.5e}", v);
    let (mantissa, exp_str) = sci.split_once('e').expect("float sci format");
    let exp: i32 = exp_str.parse().expect("float sci exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 6);

    let body = if (-4..6).contains(&exp) {
        let point = exp + 1;
        let mut s = if point <= 0 {
            format!("0.{}{}", "0".repeat(-point as usize), digits)
        } else {
            let point = point as usize;
            format!("{}.{}", &digits[..point], &digits[point..])
        };
        if s.contains('.') {
            s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        }
        s
    } else {
        let tail = digits[1..].trim_end_matches('0');
        if tail.is_empty() {
            format!("{}e{exp}", &digits[..1])
        } else {
            format!("{}.{tail}e{exp}", &digits[..1])
        }
    };
    Ok(if negative { format!("-{body}") } else { body })
}

pub fn csv_line(fields: &[String]) -> String {
    fields.join(",")
}

/// Assembles a complete CSV document: header first, LF line endings, a
/// final newline, no trailing delimiters.
pub fn csv_document(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "row width must match header");
        out.push_str(&csv_line(row));
        out.push('\n');
    }
    out
}
