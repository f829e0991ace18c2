//! Numeric rendering shared by every CSV writer.

/// 17 significant digits, enough for any `f64` to round-trip exactly.
pub fn f64_17(x: f64) -> String {
    format!("{x:.16e}")
}
