//! Log-domain weight arithmetic: log-sum-exp and multinomial selection.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Unnormalized log-weights, entries finite or `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeights(pub Vec<f64>);

impl LogWeights {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// log(sum_i exp(w_i)), stable for entries of any magnitude.
///
/// Returns `-inf` iff every entry is `-inf`.
pub fn log_sum_exp(w: &[f64]) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::EmptyWeights);
    }
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = w.iter().map(|&x| (x - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Draw index `i` with probability `exp(w_i - log_sum_exp(w))`.
///
/// Inverse-CDF over the normalized weights in index order; on an exact
/// cumulative boundary the lowest index wins. `-inf` entries have probability
/// exactly zero.
pub fn multinomial_draw(w: &LogWeights, rng: &mut RngStream) -> Result<usize> {
    let lse = log_sum_exp(&w.0)?;
    if lse == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let mut last_finite = 0;
    for (i, &lw) in w.0.iter().enumerate() {
        if lw == f64::NEG_INFINITY {
            continue;
        }
        cum += (lw - lse).exp();
        last_finite = i;
        if u < cum {
            return Ok(i);
        }
    }
    // u landed in the round-off tail past the last finite entry.
    Ok(last_finite)
}
