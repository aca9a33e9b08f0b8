use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::evaluation::spearman::{average_ranks, pearson, spearman_rho};

/// Two-sided p-value for a rank correlation via the t approximation
/// `t = rho * sqrt((n - 2) / (1 - rho^2))` with `n - 2` degrees of freedom.
pub fn rho_significance(rho: f64, n: usize) -> Result<f64> {
    if n < 4 {
        return Err(Error::Invalid(format!("significance needs n >= 4, got {n}")));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::Invalid(format!("rho {rho} outside [-1, 1]")));
    }
    if rho.abs() == 1.0 {
        return Ok(0.0);
    }
    if rho == 0.0 {
        return Ok(1.0);
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Invalid(e.to_string()))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

/// Two-sided permutation p-value: the share of `resamples` shuffles of `b`
/// whose |rho| reaches the observed |rho|. Slow; meant for checking
/// [`rho_significance`].
pub fn permutation_p_value(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<f64> {
    let observed = spearman_rho(a, b)?.abs();
    let ra = average_ranks(a);
    let mut rb = average_ranks(b);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..resamples {
        rb.shuffle(&mut rng);
        let r = pearson(&ra, &rb).unwrap_or(0.0);
        if r.abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok(hits as f64 / resamples as f64)
}
