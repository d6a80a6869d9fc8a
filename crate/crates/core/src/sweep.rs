//! Distance sweeps of the analytic rates, written as CSV.

use crate::exec::Execution;
use crate::rates::{self, RatesError, RepeaterConfig, Scheme};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const CSV_HEADER: &str = "distance_km,scheme,rate_hz,expected_time_s,p_t,p_s,p_0";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("no distances given")]
    NoDistances,
    #[error("no schemes given")]
    NoSchemes,
    #[error("distance {0} km must be positive and finite")]
    Distance(f64),
    #[error("invalid distance list `{0}` (use `a,b,c` or `min:max:step`)")]
    DistanceSpec(String),
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// km.
    pub distances: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub cfg: RepeaterConfig,
    pub output_path: Option<PathBuf>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.distances.is_empty() {
            return Err(SweepError::NoDistances);
        }
        if self.schemes.is_empty() {
            return Err(SweepError::NoSchemes);
        }
        if let Some(&d) = self.distances.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(SweepError::Distance(d));
        }
        self.cfg.validate()?;
        Ok(())
    }
}

/// Parses `a,b,c` or `min:max:step` (inclusive of `max` up to rounding).
pub fn parse_distances(text: &str) -> Result<Vec<f64>, SweepError> {
    let bad = || SweepError::DistanceSpec(text.to_string());
    let t = text.trim();
    if t.contains(':') {
        let parts: Vec<f64> = t
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let [lo, hi, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
            return Err(bad());
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        if count > 1_000_000 {
            return Err(bad());
        }
        Ok((0..count).map(|i| lo + step * i as f64).collect())
    } else {
        let v: Vec<f64> = t
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        if v.is_empty() {
            return Err(bad());
        }
        Ok(v)
    }
}

pub fn parse_schemes(text: &str) -> Result<Vec<Scheme>, RatesError> {
    text.split(',').map(str::parse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub distance_km: f64,
    pub scheme: Scheme,
    pub rate_hz: f64,
    pub expected_time_s: f64,
    pub p_t: f64,
    pub p_s: f64,
    pub p_0: f64,
}

fn scheme_order(s: Scheme) -> usize {
    Scheme::ALL.iter().position(|k| *k == s).expect("listed scheme")
}

/// One row per (distance, scheme), sorted by distance and then by scheme in
/// the order repeater, repeater_multiplexed, direct, plob.
pub fn run_sweep(spec: &SweepSpec, exec: Execution) -> Result<Vec<SweepRow>, SweepError> {
    spec.validate()?;
    let mut distances = spec.distances.clone();
    distances.sort_by(f64::total_cmp);
    distances.dedup();
    let mut schemes = spec.schemes.clone();
    schemes.sort_by_key(|s| scheme_order(*s));
    schemes.dedup();
    let per_distance = exec.map_slice(&distances, |&d| -> Result<Vec<SweepRow>, RatesError> {
        let cfg = spec.cfg.clone().with_length(d);
        let p = rates::success_probabilities(&cfg)?;
        schemes
            .iter()
            .map(|&scheme| {
                let rate_hz = rates::scheme_rate(&cfg, scheme)?;
                let expected_time_s = match scheme {
                    Scheme::Repeater => rates::expected_time(&cfg)?,
                    _ => 1.0 / rate_hz,
                };
                Ok(SweepRow {
                    distance_km: d,
                    scheme,
                    rate_hz,
                    expected_time_s,
                    p_t: p.p_t,
                    p_s: p.p_s,
                    p_0: p.p_0,
                })
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in per_distance {
        rows.extend(r?);
    }
    Ok(rows)
}

/// C-style `%g` with `sig` significant digits.
pub fn format_g(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= sig as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            format_g(r.distance_km, 6),
            r.scheme.name().to_string(),
            format_g(r.rate_hz, 6),
            format_g(r.expected_time_s, 6),
            format_g(r.p_t, 6),
            format_g(r.p_s, 6),
            format_g(r.p_0, 6),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, rows: &[SweepRow]) -> Result<(), SweepError> {
    std::fs::write(path, to_csv(rows)).map_err(|source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    })
}
