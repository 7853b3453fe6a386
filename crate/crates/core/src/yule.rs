//! Monte Carlo on the mark-decorated Yule tree.
//!
//! Particles of class `k` split into two class-`k` particles at rate `alpha`
//! and move to class `k + 1` at rate `mu`. The minimal class among lineages
//! that survive forever has the law `(p_k)`; four samplers target it.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::rng::{exp_wait, replica_seed, seeded, SimRng};
use crate::stats::{self, TestResult};

/// Default size at which a class is declared to survive forever.
pub const DEFAULT_THRESHOLD: u64 = 200;
/// Default bound on jump events per sample.
pub const DEFAULT_CAP: u64 = 100_000;

fn check_rates(alpha: f64, mu: f64) -> Result<()> {
    if !(alpha > 0.0 && mu >= 0.0 && mu < alpha) {
        return domain(format!(
            "need 0 <= mu < alpha, got mu = {mu}, alpha = {alpha}"
        ));
    }
    Ok(())
}

/// Particle counts per class at real time `time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPopulation {
    pub counts: BTreeMap<u32, u64>,
    pub time: f64,
}

impl ClassPopulation {
    pub fn single() -> Self {
        Self {
            counts: BTreeMap::from([(0, 1)]),
            time: 0.0,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn min_class(&self) -> Option<u32> {
        self.counts.iter().find(|(_, &c)| c > 0).map(|(&k, _)| k)
    }
}

/// Dense working copy of the class counts for the jump loops.
struct DenseClasses {
    counts: Vec<u64>,
    lo: usize,
    total: u64,
}

impl DenseClasses {
    fn single() -> Self {
        Self {
            counts: vec![1],
            lo: 0,
            total: 1,
        }
    }

    /// One jump of the embedded chain: a uniformly chosen particle splits
    /// with probability `p_split`, otherwise moves up a class.
    fn jump(&mut self, rng: &mut SimRng, p_split: f64) {
        let mut v = rng.random_range(0..self.total);
        let mut k = self.lo;
        while v >= self.counts[k] {
            v -= self.counts[k];
            k += 1;
        }
        if rng.random::<f64>() < p_split {
            self.counts[k] += 1;
            self.total += 1;
        } else {
            self.counts[k] -= 1;
            if k + 1 == self.counts.len() {
                self.counts.push(0);
            }
            self.counts[k + 1] += 1;
            while self.counts[self.lo] == 0 {
                self.lo += 1;
            }
        }
    }

    fn into_population(self, time: f64) -> ClassPopulation {
        let counts = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| (k as u32, c))
            .collect();
        ClassPopulation { counts, time }
    }
}

/// Class counts at time `t` started from one class-0 particle.
pub fn yule_classes_at(alpha: f64, mu: f64, t: f64, seed: u64) -> Result<ClassPopulation> {
    check_rates(alpha, mu)?;
    let mut rng = seeded(seed);
    let mut pop = DenseClasses::single();
    let p_split = alpha / (alpha + mu);
    let mut now = 0.0;
    loop {
        now += exp_wait(&mut rng, (alpha + mu) * pop.total as f64);
        if now > t {
            return Ok(pop.into_population(t));
        }
        pop.jump(&mut rng, p_split);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum YuleSample {
    Load(u32),
    Censored,
}

impl YuleSample {
    pub fn load(self) -> Option<u32> {
        match self {
            YuleSample::Load(k) => Some(k),
            YuleSample::Censored => None,
        }
    }
}

/// Minimal surviving class, with classes run one after another.
///
/// Class `k` is a Galton-Watson process in jump steps: a particle splits with
/// probability `alpha / (alpha + mu)` and otherwise becomes a founder of class
/// `k + 1`. The first class whose size reaches `threshold` is returned; its
/// extinction probability from there is at most `(mu / alpha)^threshold`.
/// More than `cap` jumps in total yields a censored sample.
pub fn yule_min_load(
    alpha: f64,
    mu: f64,
    threshold: u64,
    cap: u64,
    seed: u64,
) -> Result<YuleSample> {
    check_rates(alpha, mu)?;
    if threshold < 1 || cap <= threshold {
        return domain(format!(
            "need 1 <= threshold < cap, got threshold = {threshold}, cap = {cap}"
        ));
    }
    let mut rng = seeded(seed);
    let p_split = alpha / (alpha + mu);
    let mut jumps = 0u64;
    let mut founders = 1u64;
    let mut class = 0u32;
    loop {
        let mut size = founders;
        let mut next = 0u64;
        while size > 0 && size < threshold {
            if jumps >= cap {
                return Ok(YuleSample::Censored);
            }
            jumps += 1;
            if rng.random::<f64>() < p_split {
                size += 1;
            } else {
                size -= 1;
                next += 1;
            }
        }
        if size >= threshold {
            return Ok(YuleSample::Load(class));
        }
        founders = next;
        class += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YuleBatch {
    pub samples: Vec<YuleSample>,
    pub censored: usize,
}

impl YuleBatch {
    pub fn loads(&self) -> Vec<u32> {
        self.samples.iter().filter_map(|s| s.load()).collect()
    }

    pub fn censoring_rate(&self) -> f64 {
        self.censored as f64 / self.samples.len() as f64
    }
}

/// `reps` samples of [`yule_min_load`]; replica `r` uses seed `seed + r`.
pub fn yule_min_load_batch(
    alpha: f64,
    mu: f64,
    threshold: u64,
    cap: u64,
    reps: usize,
    seed: u64,
) -> Result<YuleBatch> {
    let samples = (0..reps as u64)
        .map(|r| yule_min_load(alpha, mu, threshold, cap, replica_seed(seed, r)))
        .collect::<Result<Vec<_>>>()?;
    let censored = samples
        .iter()
        .filter(|s| **s == YuleSample::Censored)
        .count();
    Ok(YuleBatch { samples, censored })
}

/// Minimal position of a branching random walk (binary branching at rate
/// `alpha`, unit steps up at rate `mu`) when the population first reaches
/// `stop_population`.
pub fn brw_min(alpha: f64, mu: f64, stop_population: u64, seed: u64) -> Result<u32> {
    check_rates(alpha, mu)?;
    if stop_population < 1 {
        return domain("stop population must be positive");
    }
    let mut rng = seeded(seed);
    let p_split = alpha / (alpha + mu);
    let mut pop = DenseClasses::single();
    while pop.total < stop_population {
        pop.jump(&mut rng, p_split);
    }
    Ok(pop.lo as u32)
}

pub fn brw_min_batch(
    alpha: f64,
    mu: f64,
    stop_population: u64,
    reps: usize,
    seed: u64,
) -> Result<Vec<u32>> {
    (0..reps as u64)
        .map(|r| brw_min(alpha, mu, stop_population, replica_seed(seed, r)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GwChecks {
    pub extinction_freq: f64,
    pub leaf_gf_estimate: f64,
    pub reps: usize,
}

/// Galton-Watson tree with no children w.p. `q = mu / (alpha + mu)` and two
/// otherwise. A tree whose number of living individuals reaches
/// `alive_cap` is counted as surviving.
pub fn gw_checks(
    alpha: f64,
    mu: f64,
    u: f64,
    reps: usize,
    seed: u64,
    alive_cap: u64,
) -> Result<GwChecks> {
    check_rates(alpha, mu)?;
    if !(0.0..=1.0).contains(&u) {
        return domain(format!("u must lie in [0, 1], got {u}"));
    }
    if reps == 0 || alive_cap < 2 {
        return domain("need reps >= 1 and alive_cap >= 2");
    }
    let q = mu / (alpha + mu);
    let (mut extinct, mut gf) = (0usize, 0.0);
    for r in 0..reps as u64 {
        let mut rng = seeded(replica_seed(seed, r));
        let (mut alive, mut leaves) = (1u64, 0i32);
        while alive > 0 && alive < alive_cap {
            alive -= 1;
            if rng.random::<f64>() < q {
                leaves += 1;
            } else {
                alive += 2;
            }
        }
        if alive == 0 {
            extinct += 1;
            gf += u.powi(leaves);
        }
    }
    Ok(GwChecks {
        extinction_freq: extinct as f64 / reps as f64,
        leaf_gf_estimate: gf / reps as f64,
        reps,
    })
}

/// Geometric variable with `P(M >= l) = q^l`, by inversion.
pub fn sample_geometric(rng: &mut SimRng, q: f64) -> u32 {
    if q <= 0.0 {
        return 0;
    }
    let u = 1.0 - rng.random::<f64>();
    (u.ln() / q.ln()).floor() as u32
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointCheck {
    pub lhs: Vec<u32>,
    pub rhs: Vec<u32>,
    pub mean_m: f64,
    #[serde(skip)]
    pub ks: TestResult,
    pub censored: usize,
}

/// Compares `L` with `M + min(L1, L2)` (`M` geometric with parameter
/// `q = rho / (1 + rho)`, `L1`, `L2` fresh copies of `L`), with `alpha = 1`
/// and `mu = rho`.
pub fn fixed_point_check(
    rho: f64,
    reps: usize,
    seed: u64,
    threshold: u64,
    cap: u64,
) -> Result<FixedPointCheck> {
    if !(0.0..1.0).contains(&rho) {
        return domain(format!("rho must lie in [0, 1), got {rho}"));
    }
    if reps == 0 {
        return domain("need at least one replica");
    }
    let (alpha, mu) = (1.0, rho);
    let q = rho / (1.0 + rho);
    let lhs_batch = yule_min_load_batch(alpha, mu, threshold, cap, reps, seed)?;
    let base = seed.wrapping_add(reps as u64);
    let l1 = yule_min_load_batch(alpha, mu, threshold, cap, reps, base)?;
    let l2 = yule_min_load_batch(
        alpha,
        mu,
        threshold,
        cap,
        reps,
        base.wrapping_add(reps as u64),
    )?;
    let mut rng = seeded(base.wrapping_add(2 * reps as u64));
    let mut ms = Vec::with_capacity(reps);
    let mut rhs = Vec::with_capacity(reps);
    for (a, b) in l1.samples.iter().zip(&l2.samples) {
        let m = sample_geometric(&mut rng, q);
        ms.push(m as f64);
        if let (Some(a), Some(b)) = (a.load(), b.load()) {
            rhs.push(m + a.min(b));
        }
    }
    let lhs = lhs_batch.loads();
    let to_f = |v: &[u32]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
    let ks = stats::ks_two_sample(&to_f(&lhs), &to_f(&rhs))?;
    Ok(FixedPointCheck {
        lhs,
        rhs,
        mean_m: stats::mean(&ms),
        ks,
        censored: lhs_batch.censored + l1.censored + l2.censored,
    })
}

/// One row of `yule_samples.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow<'a> {
    pub replica: u64,
    pub method: &'a str,
    pub value: Option<u32>,
}

pub fn write_yule_samples_csv<W: Write>(mut out: W, rows: &[SampleRow<'_>]) -> std::io::Result<()> {
    writeln!(out, "replica,method,value,censored_flag")?;
    for r in rows {
        match r.value {
            Some(v) => writeln!(out, "{},{},{v},0", r.replica, r.method)?,
            None => writeln!(out, "{},{},,1", r.replica, r.method)?,
        }
    }
    Ok(())
}
