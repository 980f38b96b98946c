//! Numeric formatting shared by the CSV writers.

/// Formats `v` in plain decimal notation with at least twelve significant
/// digits; zero renders as `0.000000000000`.
pub(crate) fn format_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0.000000000000".to_owned();
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (11 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}
