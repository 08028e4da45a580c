//! Number formatting shared by every CSV and report writer.

/// Formats with 9 significant digits. Plain decimal notation for magnitudes
/// in `[1e-4, 1e9)`, scientific otherwise.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs();
    if (1e-4..1e9).contains(&mag) {
        let exponent = mag.log10().floor() as i32;
        let decimals = (8 - exponent).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Rounding can carry into a new digit (9.9999999996 -> 10.00000000).
        if s.trim_start_matches('-')
            .replace('.', "")
            .trim_start_matches('0')
            .len()
            > 9
            && decimals > 0
        {
            let d = decimals - 1;
            return format!("{x:.d$}");
        }
        s
    } else {
        format!("{x:.8e}")
    }
}
