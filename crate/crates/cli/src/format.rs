//! Number formatting and output headers.

use lncsim::Rational;

const SIG_DIGITS: i32 = 6;

/// Exact decimal when the expansion terminates, else 6 significant digits.
pub fn rational(r: Rational) -> String {
    let (num, den) = (*r.numer(), *r.denom());
    let mut d = den;
    let (mut twos, mut fives) = (0u32, 0u32);
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    if d != 1 {
        return float(num as f64 / den as f64);
    }
    // scale to an integer over 10^places
    let places = twos.max(fives);
    let scaled = num as i128 * 10i128.pow(places) / den as i128;
    let sign = if scaled < 0 { "-" } else { "" };
    let digits = scaled.unsigned_abs().to_string();
    if places == 0 {
        return format!("{sign}{digits}");
    }
    let places = places as usize;
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (int, frac) = padded.split_at(padded.len() - places);
    format!("{sign}{int}.{frac}")
}

/// Six significant digits, trailing zeros dropped.
pub fn float(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (SIG_DIGITS - 1 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Leading comment lines for every output file.
pub fn header(command: &str, fingerprint: &str, seed: u64, extra: &[String]) -> String {
    let mut out = format!(
        "# lncsim {} {command} fingerprint={fingerprint} seed={seed}\n",
        env!("CARGO_PKG_VERSION")
    );
    for line in extra {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}
