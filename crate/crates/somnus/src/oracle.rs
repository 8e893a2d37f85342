//! Brute-force references used by tests: a simplex grid minimizer for the
//! FTRL step and exact expectations over the chosen arm.
//!
//! Never called by the algorithms themselves.

use crate::core::{ArmId, Distribution};
use crate::{Error, Result};

/// Grid search specification for [`grid_minimize`].
///
/// The base pass enumerates the whole simplex at `step`; each refinement
/// pass shrinks the step by `shrink` and searches a local box around the
/// incumbent. With the defaults the final local step is about `6e-6`.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub num_arms: usize,
    pub step: f64,
    pub shrink: u32,
    pub passes: u32,
}

impl GridSpec {
    pub fn new(num_arms: usize) -> Result<Self> {
        if num_arms == 0 || num_arms > 5 {
            return Err(Error::InvalidParameters(format!(
                "grid oracle supports 1..=5 arms, got {num_arms}"
            )));
        }
        Ok(Self {
            num_arms,
            step: 0.05,
            shrink: 6,
            passes: 5,
        })
    }
}

/// Exhaustively minimize `objective` over the probability simplex.
///
/// Returns the best point found and its value; refinement passes never
/// increase the best value.
pub fn grid_minimize<F: Fn(&[f64]) -> f64>(objective: F, spec: &GridSpec) -> (Vec<f64>, f64) {
    let k = spec.num_arms;
    if k == 1 {
        let q = vec![1.0];
        let v = objective(&q);
        return (q, v);
    }

    let n = (1.0 / spec.step).round().max(1.0) as u64;
    let mut best_q = vec![0.0; k];
    let mut best_v = f64::INFINITY;

    // Base pass: all compositions of n into k parts.
    let mut counts = vec![0u64; k];
    enumerate_compositions(n, k, &mut counts, &mut |c| {
        let q: Vec<f64> = c.iter().map(|&x| x as f64 / n as f64).collect();
        let v = objective(&q);
        if v < best_v {
            best_v = v;
            best_q = q;
        }
    });

    // Local refinement around the incumbent.
    let reach = spec.shrink as i64 + 2;
    let mut h = spec.step;
    for _ in 0..spec.passes {
        h /= spec.shrink as f64;
        let center = best_q.clone();
        let mut offsets = vec![0i64; k];
        enumerate_zero_sum(reach, k, &mut offsets, &mut |m| {
            let mut q = vec![0.0; k];
            let mut ok = true;
            let mut sum = 0.0;
            for i in 0..k {
                q[i] = center[i] + h * m[i] as f64;
                if q[i] < 0.0 {
                    if q[i] > -1e-12 {
                        q[i] = 0.0;
                    } else {
                        ok = false;
                        break;
                    }
                }
                sum += q[i];
            }
            if !ok {
                return;
            }
            // Offsets sum to zero, so sum stays 1 up to rounding.
            debug_assert!((sum - 1.0).abs() < 1e-9);
            let v = objective(&q);
            if v < best_v {
                best_v = v;
                best_q = q;
            }
        });
    }

    (best_q, best_v)
}

/// Visit all nonnegative integer vectors of length `k` summing to `n`.
fn enumerate_compositions<F: FnMut(&[u64])>(n: u64, k: usize, buf: &mut [u64], visit: &mut F) {
    fn rec<F: FnMut(&[u64])>(rem: u64, pos: usize, buf: &mut [u64], visit: &mut F) {
        if pos == buf.len() - 1 {
            buf[pos] = rem;
            visit(buf);
            return;
        }
        for v in 0..=rem {
            buf[pos] = v;
            rec(rem - v, pos + 1, buf, visit);
        }
    }
    debug_assert_eq!(buf.len(), k);
    rec(n, 0, buf, visit);
}

/// Visit all integer vectors of length `k` with entries in `[-reach, reach]`
/// summing to zero.
fn enumerate_zero_sum<F: FnMut(&[i64])>(reach: i64, k: usize, buf: &mut [i64], visit: &mut F) {
    fn rec<F: FnMut(&[i64])>(reach: i64, sum: i64, pos: usize, buf: &mut [i64], visit: &mut F) {
        if pos == buf.len() - 1 {
            let last = -sum;
            if last.abs() <= reach {
                buf[pos] = last;
                visit(buf);
            }
            return;
        }
        for v in -reach..=reach {
            buf[pos] = v;
            rec(reach, sum + v, pos + 1, buf, visit);
        }
    }
    debug_assert_eq!(buf.len(), k);
    rec(reach, 0, 0, buf, visit);
}

/// Exact expectation over the chosen arm: `Σ_i p_i · value(i)`, skipping
/// zero-probability outcomes.
pub fn exhaustive_expectation<F: Fn(ArmId) -> f64>(dist: &Distribution, value: F) -> f64 {
    dist.probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| p * value(ArmId(i)))
        .sum()
}
