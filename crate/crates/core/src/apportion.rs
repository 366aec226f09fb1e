//! Largest-remainder (Hamilton) apportionment.

use thiserror::Error;

/// Fractional parts closer than this are treated as tied.
const TIE_EPSILON: f64 = 1e-9;

/// Weights below this are treated as exactly zero.
pub const ZERO_WEIGHT: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApportionError {
    #[error("weights must be finite and nonnegative")]
    InvalidWeight,
    #[error("all weights are zero")]
    NoWeight,
    #[error("{total} copies cannot cover {branches} nonzero branches")]
    TooFewCopies { total: usize, branches: usize },
}

/// Splits `total` into integer shares proportional to `weights`.
///
/// Every share is the floor of its exact quota, and the leftover units go to
/// the largest fractional parts. Ties go to the lower index, so callers order
/// weights lexicographically by outcome. Zero weights always get zero.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Result<Vec<usize>, ApportionError> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(ApportionError::InvalidWeight);
    }
    let sum: f64 = weights.iter().filter(|w| **w >= ZERO_WEIGHT).sum();
    if sum <= 0.0 {
        return Err(ApportionError::NoWeight);
    }
    let quotas: Vec<f64> = weights.iter().map(|&w| if w >= ZERO_WEIGHT { total as f64 * w / sum } else { 0.0 }).collect();
    let mut shares: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = shares.iter().sum();
    let mut leftover = total.saturating_sub(assigned);

    let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] >= ZERO_WEIGHT).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        if (fa - fb).abs() <= TIE_EPSILON {
            a.cmp(&b)
        } else {
            fb.total_cmp(&fa)
        }
    });
    for &i in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        shares[i] += 1;
        leftover -= 1;
    }
    Ok(shares)
}

/// [`largest_remainder`] that also refuses ensembles smaller than the number
/// of nonzero branches.
pub fn apportion_copies(total: usize, weights: &[f64]) -> Result<Vec<usize>, ApportionError> {
    let branches = weights.iter().filter(|w| **w >= ZERO_WEIGHT).count();
    if total > 0 && total < branches {
        return Err(ApportionError::TooFewCopies { total, branches });
    }
    if total == 0 {
        return Ok(vec![0; weights.len()]);
    }
    largest_remainder(total, weights)
}
