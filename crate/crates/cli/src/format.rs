//! Locale-independent number formatting for CSV cells.

/// Nine significant digits, fixed notation for exponents in `-5..9` and
/// scientific otherwise, trailing zeros trimmed.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("`e` formatting has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..9).contains(&exp) {
        trim(format!("{:.*}", (8 - exp) as usize, x))
    } else {
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

fn trim(mut s: String) -> String {
    if s.contains('.') {
        let keep = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(keep);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::sig9;

    #[test]
    fn cases() {
        let cases = [
            (0.0, "0"),
            (-0.0, "0"),
            (1.0, "1"),
            (0.1 + 0.2, "0.3"),
            (1.0 / 3.0, "0.333333333"),
            (-2.5, "-2.5"),
            (123456789.4, "123456789"),
            (1234567890.0, "1.23456789e9"),
            (9.9999999999, "10"),
            (1e-5, "0.00001"),
            (1.5e-6, "1.5e-6"),
            (0.05 + 1e-6 * 3.0, "0.050003"),
            (f64::INFINITY, "inf"),
        ];
        for (x, want) in cases {
            assert_eq!(sig9(x), want, "{x}");
        }
    }
}
