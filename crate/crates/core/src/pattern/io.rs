//! Calibration-sample CSV and the versioned model text file.
//!
//! Sample CSV: header `theta_rad,phi_rad,g1,...,gM`, one direction per row.
//! Model file: `mma-pattern v1 <2d|3d> M=<M> order=<N|L>` followed by one line
//! of whitespace-separated coefficients per port (complex entries as `re+imj`).
//! The saved coefficients are the normalised ones, so a loaded model has scale 1.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{PatternModel, PatternSample, PatternSamples, SamplingMatrix};
use crate::basis::{BasisSpec, Dimension};
use crate::error::{Error, Result};

const MODEL_MAGIC: &str = "mma-pattern";
const MODEL_VERSION: &str = "v1";

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn fmt_exact(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn fmt_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}j", fmt_exact(z.re), sign, fmt_exact(z.im.abs()))
}

fn parse_complex(token: &str) -> Option<Complex64> {
    let body = token.strip_suffix('j')?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))?;
    let re = body[..split].parse().ok()?;
    let im: f64 = body[split + 1..].parse().ok()?;
    Some(Complex64::new(re, if bytes[split] == b'-' { -im } else { im }))
}

pub fn save_pattern_samples(samples: &PatternSamples, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("theta_rad,phi_rad");
    for m in 1..=samples.ports() {
        write!(out, ",g{m}").unwrap();
    }
    out.push('\n');
    for e in samples.entries() {
        out.push_str(&fmt_exact(e.theta));
        out.push(',');
        out.push_str(&fmt_exact(e.phi));
        for g in &e.gains {
            out.push(',');
            out.push_str(&fmt_exact(*g));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_pattern_samples(path: impl AsRef<Path>) -> Result<PatternSamples> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 3 || columns[0] != "theta_rad" || columns[1] != "phi_rad" {
        return Err(Error::parse(path, 1, "header must be theta_rad,phi_rad,g1,...,gM"));
    }
    for (i, c) in columns[2..].iter().enumerate() {
        if *c != format!("g{}", i + 1) {
            return Err(Error::parse(path, 1, format!("unexpected column {c:?}")));
        }
    }
    let ports = columns.len() - 2;
    let mut entries = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != ports + 2 {
            return Err(Error::parse(
                path,
                lineno,
                format!(
                    "row has {} gain columns, header declares {ports}",
                    fields.len().saturating_sub(2)
                ),
            ));
        }
        let mut values = Vec::with_capacity(fields.len());
        for f in &fields {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("malformed number {f:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, lineno, format!("non-finite value {f:?}")));
            }
            values.push(v);
        }
        if let Some(g) = values[2..].iter().find(|g| **g < 0.0) {
            return Err(Error::parse(path, lineno, format!("negative gain {g}")));
        }
        entries.push(PatternSample {
            theta: values[0],
            phi: values[1],
            gains: values[2..].to_vec(),
        });
    }
    if entries.is_empty() {
        return Err(Error::parse(path, 1, "no sample rows"));
    }
    PatternSamples::new(ports, entries)
}

/// Serialises the model in the versioned text format.
pub fn model_to_string(model: &PatternModel) -> String {
    let spec = model.basis();
    let mut out = format!(
        "{MODEL_MAGIC} {MODEL_VERSION} {} M={} order={}\n",
        spec.dimension.label(),
        model.ports(),
        spec.order
    );
    match model.sampling_matrix() {
        SamplingMatrix::Fourier(g) => {
            for row in g.row_iter() {
                let tokens: Vec<String> = row.iter().map(|z| fmt_complex(*z)).collect();
                out.push_str(&tokens.join(" "));
                out.push('\n');
            }
        }
        SamplingMatrix::Spherical(g) => {
            for row in g.row_iter() {
                let tokens: Vec<String> = row.iter().map(|x| fmt_exact(*x)).collect();
                out.push_str(&tokens.join(" "));
                out.push('\n');
            }
        }
    }
    out
}

pub fn save_model(model: &PatternModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_string(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PatternModel> {
    let path = path.as_ref();
    model_from_str(&fs::read_to_string(path)?, path)
}

pub(crate) fn model_from_str(text: &str, path: &Path) -> Result<PatternModel> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty model file"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let bad_header = || {
        Error::parse(
            path,
            1,
            format!("expected `{MODEL_MAGIC} {MODEL_VERSION} <2d|3d> M=<M> order=<N>`"),
        )
    };
    if tokens.len() != 5 || tokens[0] != MODEL_MAGIC {
        return Err(bad_header());
    }
    if tokens[1] != MODEL_VERSION {
        return Err(Error::parse(
            path,
            1,
            format!("unsupported model version {}", tokens[1]),
        ));
    }
    let dimension: Dimension = tokens[2].parse().map_err(|_| bad_header())?;
    let ports: usize = tokens[3]
        .strip_prefix("M=")
        .and_then(|v| v.parse().ok())
        .filter(|&m| m > 0)
        .ok_or_else(bad_header)?;
    let order: usize = tokens[4]
        .strip_prefix("order=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad_header)?;
    let spec = BasisSpec { dimension, order };
    let cols = spec.len();
    let rows: Vec<(usize, &str)> = lines.collect();
    if rows.len() != ports {
        return Err(Error::parse(
            path,
            rows.last().map_or(1, |r| r.0 + 1),
            format!("expected {ports} coefficient rows, found {}", rows.len()),
        ));
    }
    let matrix = match dimension {
        Dimension::TwoD => {
            let mut g = DMatrix::from_element(ports, cols, Complex64::new(0.0, 0.0));
            for (m, (idx, line)) in rows.iter().enumerate() {
                let tokens: Vec<&str> = line.split_whitespace().collect();
                if tokens.len() != cols {
                    return Err(Error::parse(
                        path,
                        idx + 1,
                        format!("expected {cols} coefficients, found {}", tokens.len()),
                    ));
                }
                for (j, t) in tokens.iter().enumerate() {
                    g[(m, j)] = parse_complex(t)
                        .ok_or_else(|| Error::parse(path, idx + 1, format!("malformed complex number {t:?}")))?;
                }
            }
            SamplingMatrix::Fourier(g)
        }
        Dimension::ThreeD => {
            let mut g = DMatrix::zeros(ports, cols);
            for (m, (idx, line)) in rows.iter().enumerate() {
                let tokens: Vec<&str> = line.split_whitespace().collect();
                if tokens.len() != cols {
                    return Err(Error::parse(
                        path,
                        idx + 1,
                        format!("expected {cols} coefficients, found {}", tokens.len()),
                    ));
                }
                for (j, t) in tokens.iter().enumerate() {
                    g[(m, j)] = t
                        .parse()
                        .map_err(|_| Error::parse(path, idx + 1, format!("malformed number {t:?}")))?;
                }
            }
            SamplingMatrix::Spherical(g)
        }
    };
    PatternModel::new(matrix, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_tokens_round_trip() {
        for z in [
            Complex64::new(0.5, -0.25),
            Complex64::new(-1e-7, 3.5e-12),
            Complex64::new(2.0, 0.0),
            Complex64::new(-0.0, -0.0),
            Complex64::new(1.234567890123e20, -9.87e-300),
        ] {
            let s = fmt_complex(z);
            let back = parse_complex(&s).unwrap();
            assert_eq!(back, z, "{s}");
        }
        assert!(parse_complex("1.0+2.0").is_none());
        assert!(parse_complex("abc+1j").is_none());
    }

    #[test]
    fn model_header_errors() {
        let p = Path::new("m.txt");
        assert!(model_from_str("mma-pattern v2 3d M=1 order=0\n1\n", p).is_err());
        assert!(model_from_str("mma-pattern v1 4d M=1 order=0\n1\n", p).is_err());
        assert!(model_from_str("mma-pattern v1 3d M=2 order=0\n1\n", p).is_err());
        assert!(model_from_str("mma-pattern v1 3d M=1 order=1\n1 2 3\n", p).is_err());
        let m = model_from_str("mma-pattern v1 3d M=1 order=1\n1 0 0 0.5\n", p).unwrap();
        assert_eq!(m.ports(), 1);
    }
}
