//! Partitions into distinct parts and the solution-set counting function.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::is_integer_ratio;

/// `Q(0..=n_max)`, the number of partitions of each integer into distinct
/// positive parts. `Q(0) = 1` (empty partition).
///
/// Values overflow `u128` somewhere past `n = 2300`; callers stay well below.
pub fn distinct_partition_table(n_max: usize) -> Vec<u128> {
    let mut q = vec![0u128; n_max + 1];
    q[0] = 1;
    // 0/1 knapsack over parts 1..=n_max, descending sums keep parts distinct.
    for part in 1..=n_max {
        for total in (part..=n_max).rev() {
            q[total] += q[total - part];
        }
    }
    q
}

pub fn q_distinct_partitions(n: usize) -> u128 {
    distinct_partition_table(n)[n]
}

/// `M(nu/f) = sum_{0 < n < nu/f} Q(n)` with a strict upper bound.
///
/// Counts multi-site solution sets with `min S = 0`; the singleton `{0}` is
/// not part of `M`.
pub fn count_solution_sets(nu_over_f: f64) -> Result<u128> {
    if !nu_over_f.is_finite() || nu_over_f <= 0.0 {
        return Err(Error::Domain(format!("nu/f = {nu_over_f} must be positive and finite")));
    }
    let upper = largest_integer_below(nu_over_f);
    if upper == 0 {
        return Ok(0);
    }
    let q = distinct_partition_table(upper as usize);
    Ok(q[1..].iter().sum())
}

/// Largest integer `n` with `n < x` (strict); integer detection uses the
/// shared bifurcation tolerance.
pub(crate) fn largest_integer_below(x: f64) -> i64 {
    if x <= 0.0 {
        return 0;
    }
    if is_integer_ratio(x) {
        x.round() as i64 - 1
    } else {
        x.floor() as i64
    }
}

/// Imaginary error function `erfi(x) = -i erf(ix)`.
pub fn erfi(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x < 0.0 {
        return -erfi(-x);
    }
    let x2 = x * x;
    if x2 > 700.0 {
        return f64::INFINITY;
    }
    // Power series with all-positive terms; converges for any finite x.
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= x2 / k;
        let add = term / (2.0 * k + 1.0);
        sum += add;
        if add < sum * 1e-17 {
            break;
        }
    }
    2.0 / PI.sqrt() * sum
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CountingAsymptotics {
    pub n: usize,
    pub q_exact: f64,
    pub q_asymptotic: f64,
    pub q_ratio: f64,
    pub m_exact: f64,
    pub m_asymptotic: f64,
    pub m_ratio: f64,
}

/// Leading asymptotics of `Q(n)` and `M(n)` alongside the exact values.
pub fn counting_asymptotics(n: usize) -> Result<CountingAsymptotics> {
    if n < 1 {
        return Err(Error::Domain("counting asymptotics need n >= 1".into()));
    }
    let nf = n as f64;
    let q_asymptotic = (PI * (nf / 3.0).sqrt()).exp() / (4.0 * 3f64.powf(0.25) * nf.powf(0.75));
    let m_asymptotic = 0.5 * erfi(PI.sqrt() * (nf / 3.0).powf(0.25));
    let table = distinct_partition_table(n);
    let q_exact = table[n] as f64;
    let m_exact: f64 = table[1..n].iter().map(|&v| v as f64).sum();
    Ok(CountingAsymptotics {
        n,
        q_exact,
        q_asymptotic,
        q_ratio: q_exact / q_asymptotic,
        m_exact,
        m_asymptotic,
        m_ratio: m_exact / m_asymptotic,
    })
}
