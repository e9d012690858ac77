//! Fixed-decimal rendering with 12 significant digits, used by every CSV
//! writer so outputs are byte-stable.

use std::io::{self, Write};

pub const SIGNIFICANT_DIGITS: i32 = 12;

pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return format!("{:.*}", (SIGNIFICANT_DIGITS - 1) as usize, 0.0);
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (SIGNIFICANT_DIGITS - 1 - magnitude).clamp(0, 340) as usize;
    let s = format!("{:.*}", decimals, x);
    // "-0.000…" after rounding would otherwise differ from "0.000…".
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn write_row(w: &mut impl Write, fields: &[String]) -> io::Result<()> {
    writeln!(w, "{}", fields.join(","))
}
