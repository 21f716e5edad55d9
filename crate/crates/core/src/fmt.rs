//! Number formatting shared by every text report.

/// `%.6g`-style formatting: six significant digits, trailing zeros removed,
/// scientific notation outside `[1e-4, 1e6)`.
pub fn num(x: f64) -> String {
    sig(x, 6)
}

/// `%.<digits>g`-style formatting.
pub fn sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    // exponent after rounding to `digits` significant digits
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(1.0), "1");
        assert_eq!(num(36.111111111), "36.1111");
        assert_eq!(num(-0.02337), "-0.02337");
        assert_eq!(num(1e-5), "1e-05");
        assert_eq!(num(123456789.0), "1.23457e+08");
        assert_eq!(num(999999.5), "1e+06");
        assert_eq!(num(0.0001), "0.0001");
        assert_eq!(num(2.5e-7), "2.5e-07");
        assert_eq!(num(100.0), "100");
    }
}
