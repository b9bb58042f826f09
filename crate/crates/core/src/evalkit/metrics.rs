use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{EvalError, Fixed2};
use crate::repairloop::RepairTrace;

/// Compilation success rate: `100 * n_success / n_total`.
pub fn csr(n_success: u64, n_total: u64) -> Result<Fixed2, EvalError> {
    if n_total == 0 {
        return Err(EvalError::EmptyInput);
    }
    if n_success > n_total {
        return Err(EvalError::InvalidCounts { part: n_success, whole: n_total });
    }
    Ok(Fixed2::percent(n_success as i128, n_total as i128))
}

fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Unbiased pass@k averaged over tasks. Each entry is
/// `(n_samples, n_correct)` for one task.
pub fn pass_at_k(per_task: &[(u64, u64)], k: u64) -> Result<Fixed2, EvalError> {
    if per_task.is_empty() || k == 0 {
        return Err(EvalError::EmptyInput);
    }
    let mut sum = BigRational::zero();
    for &(n, c) in per_task {
        if c > n {
            return Err(EvalError::InvalidCounts { part: c, whole: n });
        }
        if k > n {
            return Err(EvalError::InsufficientSamples { k, n_samples: n });
        }
        let miss = BigRational::new(binomial(n - c, k), binomial(n, k));
        sum += BigRational::one() - miss;
    }
    let mean = sum / BigRational::from_integer(BigInt::from(per_task.len()));
    Ok(Fixed2::from_rational(&(mean * BigRational::from_integer(BigInt::from(100)))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reduction {
    pub percent: Fixed2,
    /// `before` was zero, so the percentage is defined as zero.
    pub empty_baseline: bool,
}

/// `100 * (before - after) / before`; negative when errors grew.
pub fn error_reduction(before: u64, after: u64) -> Reduction {
    if before == 0 {
        return Reduction { percent: Fixed2::ZERO, empty_baseline: true };
    }
    let delta = before as i128 - after as i128;
    Reduction { percent: Fixed2::percent(delta, before as i128), empty_baseline: false }
}

/// Mean number of repair rounds per trace.
pub fn avg_iterations(traces: &[RepairTrace]) -> Result<Fixed2, EvalError> {
    let rounds: Vec<usize> = traces.iter().map(RepairTrace::repair_rounds).collect();
    avg_rounds(&rounds)
}

pub fn avg_rounds(rounds: &[usize]) -> Result<Fixed2, EvalError> {
    if rounds.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let total: usize = rounds.iter().sum();
    Ok(Fixed2::from_ratio(total as i128, rounds.len() as i128))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(5, 2), BigInt::from(10));
        assert_eq!(binomial(3, 5), BigInt::zero());
        assert_eq!(binomial(7, 0), BigInt::one());
    }

    #[test]
    fn pass_at_k_with_extra_samples() {
        // n=5, c=2, k=2: 1 - C(3,2)/C(5,2) = 1 - 3/10.
        assert_eq!(pass_at_k(&[(5, 2)], 2).unwrap().to_string(), "70.00");
        assert!(matches!(pass_at_k(&[(1, 1)], 2), Err(EvalError::InsufficientSamples { .. })));
    }

    #[test]
    fn error_reduction_handles_growth_and_empty() {
        assert_eq!(error_reduction(4, 6).percent.to_string(), "-50.00");
        assert!(error_reduction(0, 3).empty_baseline);
    }
}
