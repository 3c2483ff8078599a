//! Decimal formatting shared by every text artifact.

/// 17 significant digits in scientific notation; parses back to the same `f64`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}
