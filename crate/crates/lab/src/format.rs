//! Number formatting and grid literals.

use anyhow::{bail, Context, Result};

/// Significant digits used in every CSV cell.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats `x` the way C's `%.12g` does.
pub fn sig12(x: f64) -> String {
    significant(x, SIGNIFICANT_DIGITS)
}

/// `%.{digits}g` formatting: shortest of fixed and scientific notation with
/// trailing zeros removed.
pub fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parses a density grid: either `start:stop:step` (inclusive) or a comma
/// separated list. Values are rounded to 12 decimals to absorb step drift.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = if let Some((start, rest)) = s.split_once(':') {
        let (stop, step) = rest.split_once(':').context("a range grid reads start:stop:step")?;
        let start: f64 = start.trim().parse().context("grid start")?;
        let stop: f64 = stop.trim().parse().context("grid stop")?;
        let step: f64 = step.trim().parse().context("grid step")?;
        if step.is_nan() || step <= 0.0 || stop < start {
            bail!("grid range needs start <= stop and a positive step");
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| round12(start + i as f64 * step)).collect()
    } else {
        s.split(',').map(|v| v.trim().parse::<f64>().with_context(|| format!("grid value {v:?}"))).collect::<Result<_>>()?
    };
    if values.is_empty() {
        bail!("empty grid");
    }
    if values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        bail!("grid values must lie in [0, 1]");
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        bail!("grid values must be strictly increasing");
    }
    Ok(values)
}

/// Uniform grid on `[lo, hi]` with spacing `step`.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| round12(lo + i as f64 * step)).collect()
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}
