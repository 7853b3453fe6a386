//! Observers on simulator output: time-averaged profile, click statistics,
//! sampled joint types and CSV export.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index;
use serde::Serialize;

use super::sim::{simulate_from, SimOutput};
use super::state::PopState;
use crate::error::{domain, RatchetError, Result};
use crate::params::Rates;
use crate::rng::{replica_seed, seeded};
use crate::stats;

/// Mean of the profile snapshots taken strictly after `burn_in`.
pub fn empirical_profile(output: &SimOutput, burn_in: f64) -> Result<Vec<f64>> {
    let used: Vec<&Vec<f64>> = output
        .profile_snapshots
        .iter()
        .filter(|s| s.time > burn_in)
        .map(|s| &s.x)
        .collect();
    if used.is_empty() {
        return Err(RatchetError::InsufficientData(format!(
            "no profile snapshot after t = {burn_in}"
        )));
    }
    let len = used.iter().map(|x| x.len()).max().unwrap_or(0);
    let mut acc = vec![0.0; len];
    for x in &used {
        for (a, v) in acc.iter_mut().zip(x.iter()) {
            *a += v;
        }
    }
    let n = used.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClickStats {
    pub count: usize,
    /// Gap statistics are absent below two clicks.
    pub mean_gap: Option<f64>,
    pub cv: Option<f64>,
    pub exponential_fit_pvalue: Option<f64>,
}

/// Statistics of the gaps between consecutive clicks.
pub fn click_statistics(output: &SimOutput) -> ClickStats {
    let times: Vec<f64> = output.clicks.iter().map(|c| c.time).collect();
    gap_statistics(&times)
}

/// Same as [`click_statistics`] from raw click times.
pub fn gap_statistics(times: &[f64]) -> ClickStats {
    pooled_gap_statistics(&[times.to_vec()])
}

/// Gap statistics over several independent runs; gaps are taken within each
/// run only.
pub fn pooled_gap_statistics(runs: &[Vec<f64>]) -> ClickStats {
    let count = runs.iter().map(Vec::len).sum();
    let gaps: Vec<f64> = runs
        .iter()
        .flat_map(|t| t.windows(2).map(|w| w[1] - w[0]))
        .collect();
    if gaps.is_empty() {
        return ClickStats {
            count,
            mean_gap: None,
            cv: None,
            exponential_fit_pvalue: None,
        };
    }
    let cv = (gaps.len() >= 2).then(|| stats::cv(&gaps));
    let fit = stats::ks_exponential_fit(&gaps).ok().map(|r| r.p_value);
    ClickStats {
        count,
        mean_gap: Some(stats::mean(&gaps)),
        cv,
        exponential_fit_pvalue: fit,
    }
}

/// Joint frequencies of the relative types `eta - K*` of `sample_size`
/// distinct individuals drawn uniformly at time `t_obs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointCounts {
    pub sample_size: usize,
    pub draws: usize,
    pub counts: BTreeMap<Vec<u64>, u64>,
}

impl JointCounts {
    pub fn frequency(&self, key: &[u64]) -> f64 {
        self.counts.get(key).copied().unwrap_or(0) as f64 / self.draws as f64
    }

    /// Marginal frequencies of the first coordinate.
    pub fn marginal(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for (key, &c) in &self.counts {
            let k = key[0] as usize;
            if out.len() <= k {
                out.resize(k + 1, 0.0);
            }
            out[k] += c as f64 / self.draws as f64;
        }
        out
    }
}

/// Runs `reps` replicas from `init` to `t_obs` and takes `draws_per_rep`
/// independent samples of `sample_size` distinct individuals from each final
/// state. Replica `r` uses seed `seed + r`.
pub fn joint_type_counts(
    rates: Rates,
    init: &PopState,
    t_obs: f64,
    sample_size: usize,
    reps: usize,
    draws_per_rep: usize,
    seed: u64,
) -> Result<JointCounts> {
    if sample_size < 1 || sample_size as u64 > rates.n {
        return domain(format!("sample size must lie in 1..={}", rates.n));
    }
    if reps == 0 || draws_per_rep == 0 {
        return domain("need at least one replica and one draw");
    }
    let mut counts = BTreeMap::new();
    for r in 0..reps as u64 {
        let rs = replica_seed(seed, r);
        let out = simulate_from(rates, init.clone(), t_obs, &[], rs, false)?;
        let state = &out.final_state;
        let mut cum = Vec::with_capacity(state.counts.len());
        let mut acc = 0u64;
        for &c in &state.counts {
            acc += c;
            cum.push(acc);
        }
        // a separate stream for the sampling step
        let mut rng = seeded(rs ^ 0x9e37_79b9_7f4a_7c15);
        for _ in 0..draws_per_rep {
            let key: Vec<u64> = index::sample(&mut rng, rates.n as usize, sample_size)
                .iter()
                .map(|i| cum.partition_point(|&c| c <= i as u64) as u64)
                .collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    Ok(JointCounts {
        sample_size,
        draws: reps * draws_per_rep,
        counts,
    })
}

pub fn write_clicks_csv<W: Write>(mut out: W, runs: &[(u64, &SimOutput)]) -> std::io::Result<()> {
    writeln!(out, "replica,time,new_best_type")?;
    for (replica, run) in runs {
        for c in &run.clicks {
            writeln!(out, "{replica},{},{}", c.time, c.new_best_type)?;
        }
    }
    Ok(())
}

pub fn write_profile_csv<W: Write>(mut out: W, runs: &[(u64, &SimOutput)]) -> std::io::Result<()> {
    writeln!(out, "replica,time,k,x_k")?;
    for (replica, run) in runs {
        for s in &run.profile_snapshots {
            for (k, x) in s.x.iter().enumerate() {
                writeln!(out, "{replica},{},{k},{x}", s.time)?;
            }
        }
    }
    Ok(())
}
