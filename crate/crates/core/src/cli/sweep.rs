//! Sweep specifications: `start:stop:count`, `start:stop:count(log)`,
//! comma lists, or a single number.

use crate::error::{Error, Result};
use crate::quadrature::linspace;

pub fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err(Error::Sweep("empty sweep".into()));
    }
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::Sweep(format!("'{s}' is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Sweep(format!("'{s}' is not finite")))
        }
    };
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Sweep(format!("'{spec}' is not start:stop:count")));
        }
        let (count, log) = match parts[2].trim().strip_suffix("(log)") {
            Some(c) => (c, true),
            None => (parts[2], false),
        };
        let n: usize = count
            .trim()
            .parse()
            .map_err(|_| Error::Sweep(format!("'{count}' is not a point count")))?;
        if n == 0 {
            return Err(Error::Sweep(format!("'{spec}' has no points")));
        }
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        if log {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::Sweep(format!("log sweep needs positive bounds, got '{spec}'")));
            }
            return Ok(linspace(a.ln(), b.ln(), n)
                .into_iter()
                .enumerate()
                .map(|(i, x)| match i {
                    0 => a,
                    i if i == n - 1 => b,
                    _ => x.exp(),
                })
                .collect());
        }
        return Ok(linspace(a, b, n));
    }
    spec.split(',').map(num).collect()
}

/// `name=spec`, as used by `--sweep`.
pub fn parse_named_sweep(spec: &str) -> Result<(String, Vec<f64>)> {
    let (name, values) = spec
        .split_once('=')
        .ok_or_else(|| Error::Sweep(format!("'{spec}' is not name=values")))?;
    Ok((name.trim().to_string(), parse_sweep(values)?))
}
