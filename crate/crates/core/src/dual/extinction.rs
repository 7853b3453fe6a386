//! Extinction time `H_0` of the lowest level.
//!
//! On its own, level 0 is a birth-death chain on `0..=N` with birth rate
//! `n s (1 - n/N)` and death rate `n (m + (n - 1)/(2N))`, absorbed at 0.

use rand::Rng;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::params::Rates;
use crate::rng::{exp_wait, seeded};
use crate::stats::{self, TestResult};

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn check_start(rates: &Rates, start: u64) -> Result<()> {
    if start < 1 || start > rates.n {
        return domain(format!("start must lie in 1..={}, got {start}", rates.n));
    }
    if rates.m <= 0.0 {
        return domain("level 0 cannot die out from one unit without mutation");
    }
    Ok(())
}

/// Natural logarithm of `E_start[H_0]`.
///
/// With `tau_k` the mean time to step from `k` down to `k - 1`,
/// `tau_N = 1 / d_N` and `tau_k = (1 + b_k tau_{k+1}) / d_k`, and
/// `E_n[H_0] = sum_{k <= n} tau_k`. Everything is carried in logs.
pub fn z0_log_mean_extinction(rates: &Rates, start: u64) -> Result<f64> {
    check_start(rates, start)?;
    let n = rates.n as usize;
    let nf = rates.n as f64;
    let birth = |k: f64| k * rates.s * (1.0 - k / nf);
    let death = |k: f64| k * (rates.m + (k - 1.0) / (2.0 * nf));
    let mut log_tau = vec![0.0; n + 1];
    log_tau[n] = -death(nf).ln();
    for k in (1..n).rev() {
        let kf = k as f64;
        let b = birth(kf);
        let carry = if b > 0.0 {
            log_add(0.0, b.ln() + log_tau[k + 1])
        } else {
            0.0
        };
        log_tau[k] = carry - death(kf).ln();
    }
    Ok(log_tau[1..=start as usize]
        .iter()
        .fold(f64::NEG_INFINITY, |acc, &x| log_add(acc, x)))
}

/// `E_start[H_0]`; may overflow to infinity where the log form does not.
pub fn z0_extinction_exact(rates: &Rates, start: u64) -> Result<f64> {
    Ok(z0_log_mean_extinction(rates, start)?.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Z0ExtinctionMc {
    pub mean_h0: f64,
    pub se_h0: f64,
    pub cv_h0: f64,
    pub h0: Vec<f64>,
    pub z1_at_h0: Vec<u64>,
    #[serde(skip)]
    pub exponential_fit: TestResult,
}

/// One run of `(Z_0, Z_1)` until `Z_0` hits 0; returns `(H_0, Z_1(H_0))`.
fn run_pair(rates: &Rates, start: u64, seed: u64) -> (f64, u64) {
    let mut rng = seeded(seed);
    let nf = rates.n as f64;
    let (s, m) = (rates.s, rates.m);
    let (mut z0, mut z1) = (start, 0u64);
    let mut t = 0.0;
    while z0 > 0 {
        let (a, b) = (z0 as f64, z1 as f64);
        let r_death0 = a * (a - 1.0) / (2.0 * nf);
        let r_gain0 = s * a * (nf - a) / nf;
        let r_mut0 = m * a;
        let r_death1 = b * (b - 1.0) / (2.0 * nf) + b * a / nf;
        let r_gain1 = s * b * (nf - a - b) / nf;
        let r_mut1 = m * b;
        let total = r_death0 + r_gain0 + r_mut0 + r_death1 + r_gain1 + r_mut1;
        t += exp_wait(&mut rng, total);
        let mut u = rng.random::<f64>() * total;
        if u < r_death0 {
            z0 -= 1;
            continue;
        }
        u -= r_death0;
        if u < r_gain0 {
            // the displaced unit is on level 1 with probability z1 / (N - z0)
            if rng.random_range(0..rates.n - z0) < z1 {
                z1 -= 1;
            }
            z0 += 1;
            continue;
        }
        u -= r_gain0;
        if u < r_mut0 {
            z0 -= 1;
            z1 += 1;
            continue;
        }
        u -= r_mut0;
        if u < r_death1 {
            z1 -= 1;
        } else if u - r_death1 < r_gain1 {
            z1 += 1;
        } else {
            z1 -= 1;
        }
    }
    (t, z1)
}

/// Monte Carlo estimate of `E_start[H_0]` from the `(Z_0, Z_1)` chain, with
/// `Z_1` at the extinction time and a KS fit of `H_0` to an exponential law.
/// Replica `r` uses seed `seed + r`.
pub fn z0_extinction_mc(
    rates: &Rates,
    start: u64,
    reps: usize,
    seed: u64,
) -> Result<Z0ExtinctionMc> {
    check_start(rates, start)?;
    if reps < 10 {
        return domain(format!("need at least 10 replicas, got {reps}"));
    }
    let (h0, z1_at_h0): (Vec<f64>, Vec<u64>) = (0..reps as u64)
        .map(|r| run_pair(rates, start, crate::rng::replica_seed(seed, r)))
        .unzip();
    Ok(Z0ExtinctionMc {
        mean_h0: stats::mean(&h0),
        se_h0: stats::std_error(&h0),
        cv_h0: stats::cv(&h0),
        exponential_fit: stats::ks_exponential_fit(&h0)?,
        h0,
        z1_at_h0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Params;

    #[test]
    fn single_unit_without_selection() {
        let r = Rates::new(50, 0.0, 0.25).unwrap();
        assert!((z0_extinction_exact(&r, 1).unwrap() - 4.0).abs() < 1e-12);
    }

    // Oracle: solve the linear system for mean absorption times directly.
    fn dense_oracle(r: &Rates, start: usize) -> f64 {
        let n = r.n as usize;
        let nf = n as f64;
        // unknowns e_1..e_n; (b+d) e_k - b e_{k+1} - d e_{k-1} = 1, e_0 = 0
        let mut a = vec![vec![0.0; n]; n];
        let mut rhs = vec![1.0; n];
        for k in 1..=n {
            let kf = k as f64;
            let b = kf * r.s * (1.0 - kf / nf);
            let d = kf * (r.m + (kf - 1.0) / (2.0 * nf));
            a[k - 1][k - 1] = b + d;
            if k < n {
                a[k - 1][k] = -b;
            }
            if k > 1 {
                a[k - 1][k - 2] = -d;
            }
        }
        // Gaussian elimination (tridiagonal, no pivoting needed)
        for i in 1..n {
            let f = a[i][i - 1] / a[i - 1][i - 1];
            for j in 0..n {
                a[i][j] -= f * a[i - 1][j];
            }
            rhs[i] -= f * rhs[i - 1];
        }
        let mut e = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for j in i + 1..n {
                acc -= a[i][j] * e[j];
            }
            e[i] = acc / a[i][i];
        }
        e[start - 1]
    }

    #[test]
    fn matches_linear_system() {
        for &(n, s, m, start) in &[
            (10u64, 0.3, 0.2, 3usize),
            (25, 0.5, 0.1, 10),
            (40, 0.0, 0.05, 40),
        ] {
            let r = Rates::new(n, s, m).unwrap();
            let exact = z0_extinction_exact(&r, start as u64).unwrap();
            let oracle = dense_oracle(&r, start);
            assert!((exact / oracle - 1.0).abs() < 1e-9, "{exact} vs {oracle}");
        }
    }

    #[test]
    fn log_form_survives_large_systems() {
        let p = Params::new(20_000, 1.0, 0.5, 50.0).unwrap();
        let l = z0_log_mean_extinction(&p.rates(), 200).unwrap();
        assert!(l.is_finite() && l > 100.0);
    }

    #[test]
    fn mc_agrees_with_exact() {
        let r = Rates::new(30, 0.2, 0.1).unwrap();
        let exact = z0_extinction_exact(&r, 5).unwrap();
        let mc = z0_extinction_mc(&r, 5, 400, 17).unwrap();
        assert!(
            (mc.mean_h0 - exact).abs() < 3.5 * mc.se_h0,
            "{} +- {} vs {exact}",
            mc.mean_h0,
            mc.se_h0
        );
        assert_eq!(mc.h0.len(), 400);
    }

    #[test]
    fn rejects_bad_inputs() {
        let r = Rates::new(10, 0.1, 0.1).unwrap();
        assert!(z0_extinction_exact(&r, 0).is_err());
        assert!(z0_extinction_exact(&r, 11).is_err());
        assert!(z0_extinction_mc(&r, 1, 9, 0).is_err());
        assert!(z0_extinction_exact(&Rates::new(10, 0.1, 0.0).unwrap(), 1).is_err());
    }
}
