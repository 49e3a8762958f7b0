//! Exact small-instance ground truth: full enumeration of sign patterns for
//! Rademacher coordinates.

use crate::coeffs::CoefficientField;
use crate::error::{Error, Result};

/// Enumeration cap: at most `2^24` sign patterns.
pub const ORACLE_BIT_CAP: u32 = 24;

fn check_size(field: &CoefficientField) -> Result<(usize, usize, u32)> {
    let d = field.d();
    let n = field
        .horizon()
        .ok_or_else(|| Error::InvalidInput("oracle needs a finite-horizon field".into()))?;
    let bits = (n * d) as u32;
    if bits > ORACLE_BIT_CAP {
        return Err(Error::TooLarge { bits, cap: ORACLE_BIT_CAP });
    }
    Ok((n, d, bits))
}

fn value_for_mask(field: &CoefficientField, mask: u64, n: usize, d: usize) -> f64 {
    // sign of xi(i, m) is bit (i * d + m)
    let xi = |i: u32, m: usize| -> f64 {
        if mask >> ((i as usize - 1) * d + m) & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    };
    let mut total = 0.0;
    field.for_each_entry(|idx, b| {
        let mut prod = b;
        for (m, &i) in idx.iter().enumerate() {
            prod *= xi(i, m);
        }
        total += prod;
    });
    let _ = n;
    total
}

/// Exact tail `max(P(Q > x), P(Q < -x))` of the multilinear sum with
/// Rademacher coordinates, by full enumeration of the `2^(n d)` sign
/// patterns.
pub fn exact_tail(field: &CoefficientField, x: f64) -> Result<f64> {
    let (n, d, bits) = check_size(field)?;
    let total = 1u64 << bits;
    let mut above = 0u64;
    let mut below = 0u64;
    for mask in 0..total {
        let q = value_for_mask(field, mask, n, d);
        if q > x {
            above += 1;
        }
        if q < -x {
            below += 1;
        }
    }
    Ok(above.max(below) as f64 / total as f64)
}

/// The exact distribution of the multilinear sum over sign patterns:
/// sorted `(value, probability)` atoms with equal values merged.
pub fn exact_distribution(field: &CoefficientField) -> Result<Vec<(f64, f64)>> {
    let (n, d, bits) = check_size(field)?;
    if bits > 20 {
        return Err(Error::TooLarge { bits, cap: 20 });
    }
    let total = 1u64 << bits;
    let mut values: Vec<f64> = (0..total).map(|mask| value_for_mask(field, mask, n, d)).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p = 1.0 / total as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for v in values {
        match out.last_mut() {
            Some((last, weight)) if (v - *last).abs() <= 1e-12 * (1.0 + v.abs()) => {
                *weight += p;
            }
            _ => out.push((v, p)),
        }
    }
    Ok(out)
}

/// Tail of a sorted atom list at `x`.
pub fn distribution_tail(atoms: &[(f64, f64)], x: f64) -> f64 {
    let above: f64 = atoms.iter().filter(|(v, _)| *v > x).map(|(_, p)| *p).sum();
    let below: f64 = atoms.iter().filter(|(v, _)| *v < -x).map(|(_, p)| *p).sum();
    above.max(below)
}
