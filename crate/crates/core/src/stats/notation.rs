//! Parenthesis notation for uncertainties: `0.1234(56)` is `0.1234 ± 0.0056`.
//!
//! The uncertainty is written in units of the mean's last displayed decimal
//! while it rounds below one; larger uncertainties are written out with the
//! same number of decimals, e.g. `49.4(1.9)`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NotationError {
    #[error("malformed value {0:?}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parsed {
    pub mean: f64,
    pub delta: f64,
    pub decimals: usize,
}

pub fn format(mean: f64, delta: f64, decimals: usize) -> String {
    let scale = 10f64.powi(decimals as i32);
    let units = (delta.abs() * scale).round();
    if units < scale {
        format!("{mean:.decimals$}({units:.0})")
    } else {
        format!("{mean:.decimals$}({:.decimals$})", delta.abs())
    }
}

pub fn parse(s: &str) -> Result<Parsed, NotationError> {
    let bad = || NotationError::Malformed(s.to_string());
    let s = s.trim();
    let (mean_str, rest) = s.split_once('(').ok_or_else(bad)?;
    let inner = rest.strip_suffix(')').ok_or_else(bad)?;
    if inner.is_empty() || inner.starts_with(['-', '+']) {
        return Err(bad());
    }
    let decimals = mean_str.split_once('.').map_or(0, |(_, frac)| frac.len());
    let mean: f64 = mean_str.parse().map_err(|_| bad())?;
    let delta = if inner.contains('.') {
        inner.parse::<f64>().map_err(|_| bad())?
    } else {
        let units: u64 = inner.parse().map_err(|_| bad())?;
        units as f64 / 10f64.powi(decimals as i32)
    };
    Ok(Parsed {
        mean,
        delta,
        decimals,
    })
}
