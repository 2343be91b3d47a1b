//! Measurement CSV: `# k=<K>` comment, header `port,power`, one row per port.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pattern::fmt_exact;
use crate::signal::PowerMeasurement;

pub fn measurement_to_string(meas: &PowerMeasurement) -> String {
    let mut out = format!("# k={}\nport,power\n", meas.snapshots());
    for (m, p) in meas.port_powers().iter().enumerate() {
        writeln!(out, "{},{}", m + 1, fmt_exact(*p)).unwrap();
    }
    out
}

pub fn save_measurement(meas: &PowerMeasurement, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, measurement_to_string(meas))?;
    Ok(())
}

/// Reads a measurement; `snapshots` overrides (or supplies) the `# k=` line.
pub fn load_measurement(path: impl AsRef<Path>, snapshots: Option<usize>) -> Result<PowerMeasurement> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut k_line = None;
    let mut header_seen = false;
    let mut powers = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("k=") {
                let k: usize = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, format!("invalid snapshot count {v:?}")))?;
                k_line = Some(k);
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["port", "power"] {
                return Err(Error::parse(path, lineno, "header must be port,power"));
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 2 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 2 columns, found {}", cols.len()),
            ));
        }
        let port: usize = cols[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("invalid port {:?}", cols[0])))?;
        if port != powers.len() + 1 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected port {}, found {port}", powers.len() + 1),
            ));
        }
        let p: f64 = cols[1]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("malformed number {:?}", cols[1])))?;
        if !p.is_finite() || p < 0.0 {
            return Err(Error::parse(path, lineno, format!("power {p} must be finite and >= 0")));
        }
        powers.push(p);
    }
    if !header_seen || powers.is_empty() {
        return Err(Error::parse(path, 1, "no measurement rows"));
    }
    let k = snapshots
        .or(k_line)
        .ok_or_else(|| Error::parse(path, 1, "snapshot count missing: add `# k=<K>` or pass --k"))?;
    PowerMeasurement::new(powers, k)
}
