//! Poisson arrival law and its truncation.

use crate::error::{Error, Result};

/// Raw Poisson probability `P(X = k)` for `X ~ Poisson(rate)`.
pub fn poisson_pmf(rate: f64, k: u32) -> f64 {
    if rate == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let mut p = (-rate).exp();
    for i in 1..=k {
        p *= rate / f64::from(i);
    }
    p
}

/// Largest `k` whose raw Poisson probability is at least `threshold`,
/// or 0 when no value qualifies.
///
/// The threshold is compared against the untruncated pmf.
pub fn support_cap(rate: f64, threshold: f64) -> u32 {
    if !(rate.is_finite() && rate >= 0.0) {
        return 0;
    }
    let mut best = 0;
    let mut p = (-rate).exp();
    let mut k = 0u32;
    loop {
        if p >= threshold {
            best = k;
        } else if f64::from(k) > rate {
            // past the mode the pmf only decreases
            break;
        }
        k += 1;
        p *= rate / f64::from(k);
        if p == 0.0 {
            break;
        }
    }
    best
}

/// Poisson pmf renormalized over the support `{0, ..., cap}`; 0 above `cap`.
pub fn truncated_poisson_pmf(rate: f64, k: u32, cap: u32) -> Result<f64> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::Domain(format!(
            "arrival rate must be finite and >= 0, got {rate}"
        )));
    }
    if k > cap {
        return Ok(0.0);
    }
    let table = truncated_pmf_table(rate, cap);
    Ok(table[k as usize])
}

/// The whole renormalized pmf over `{0, ..., cap}`.
pub(crate) fn truncated_pmf_table(rate: f64, cap: u32) -> Vec<f64> {
    let mut table: Vec<f64> = (0..=cap).map(|k| poisson_pmf(rate, k)).collect();
    let mass: f64 = table.iter().sum();
    for p in &mut table {
        *p /= mass;
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn caps_for_small_instance_rates() {
        assert_eq!(support_cap(1.0, 0.005), 4);
        assert_eq!(support_cap(0.5, 0.005), 3);
        assert_eq!(support_cap(0.25, 0.005), 2);
        assert_eq!(support_cap(0.0, 0.005), 0);
    }

    #[test]
    fn cap_boundary_values() {
        // P(k=4) = 0.01533 stays, P(k=5) = 0.00307 is dropped
        assert!((poisson_pmf(1.0, 4) - 0.015_328).abs() < 1e-5);
        assert!((poisson_pmf(1.0, 5) - 0.003_066).abs() < 1e-5);
    }

    #[test]
    fn threshold_above_every_value_gives_zero() {
        assert_eq!(support_cap(5.0, 0.9), 0);
    }

    #[test]
    fn zero_rate_is_point_mass() {
        assert_eq!(truncated_poisson_pmf(0.0, 0, 3).unwrap(), 1.0);
        assert_eq!(truncated_poisson_pmf(0.0, 2, 3).unwrap(), 0.0);
    }

    #[test]
    fn renormalized_mass_is_one() {
        for &(rate, cap) in &[(1.0, 4), (0.25, 2), (3.0, 9), (7.5, 1)] {
            let s: f64 = (0..=cap)
                .map(|k| truncated_poisson_pmf(rate, k, cap).unwrap())
                .sum();
            assert!((s - 1.0).abs() < 1e-12, "rate {rate} cap {cap}: {s}");
            assert_eq!(truncated_poisson_pmf(rate, cap + 1, cap).unwrap(), 0.0);
        }
    }

    #[test]
    fn negative_rate_rejected() {
        assert!(truncated_poisson_pmf(-0.1, 0, 2).is_err());
    }
}
