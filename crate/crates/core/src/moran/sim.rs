//! Aggregated-rate Gillespie simulation of the type counts.
//!
//! With `P = N^2 - sum_k c_k^2` the event classes have total rates
//! `m N` (mutation), `P / (2N)` (resampling) and `s P / (2N)` (selection).
//! Within a class the gaining and losing types are drawn in two stages with
//! exact integer weights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::state::PopState;
use crate::error::{domain, Result};
use crate::graphical::Click;
use crate::params::Rates;
use crate::rng::{exp_wait, seeded, SimRng};

/// Move one individual from class `lose` to class `gain` (indices relative
/// to the best type at the time of the event).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub gain: usize,
    pub lose: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Mutation,
    Resampling,
    Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSnapshot {
    pub time: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub clicks: Vec<Click>,
    pub profile_snapshots: Vec<ProfileSnapshot>,
    /// `(time, count)` of the initially best type after every change.
    pub y0_path: Option<Vec<(f64, u64)>>,
    pub final_state: PopState,
    pub final_time: f64,
    pub events: u64,
}

pub struct MoranSimulator {
    rates: Rates,
    state: PopState,
    time: f64,
    sum_sq: u64,
    rng: SimRng,
    clicks: Vec<Click>,
    events: u64,
}

impl MoranSimulator {
    pub fn new(rates: Rates, init: PopState, seed: u64) -> Result<Self> {
        if init.size() != rates.n {
            return domain(format!(
                "initial state holds {} individuals, N = {}",
                init.size(),
                rates.n
            ));
        }
        if init.counts.first().copied().unwrap_or(0) == 0 {
            return domain("the best class must be nonempty");
        }
        let sum_sq = init.sum_of_squares();
        Ok(Self {
            rates,
            state: init,
            time: 0.0,
            sum_sq,
            rng: seeded(seed),
            clicks: Vec::new(),
            events: 0,
        })
    }

    pub fn state(&self) -> &PopState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn clicks(&self) -> &[Click] {
        &self.clicks
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Sum over distinct ordered class pairs of `c_k c_k'`.
    fn pair_weight(&self) -> u64 {
        self.rates.n * self.rates.n - self.sum_sq
    }

    /// `(mutation, resampling, selection)` total rates.
    pub fn category_rates(&self) -> (f64, f64, f64) {
        let n = self.rates.n as f64;
        let pair = self.pair_weight() as f64;
        (
            self.rates.m * n,
            pair / (2.0 * n),
            self.rates.s * pair / (2.0 * n),
        )
    }

    /// Every possible transition with its rate, enumerated pair by pair.
    pub fn enumerate_transitions(&self) -> Vec<(Transition, f64)> {
        let n = self.rates.n as f64;
        let c = &self.state.counts;
        let mut out = Vec::new();
        for (k, &ck) in c.iter().enumerate() {
            if ck > 0 && self.rates.m > 0.0 {
                out.push((
                    Transition {
                        gain: k + 1,
                        lose: k,
                    },
                    self.rates.m * ck as f64,
                ));
            }
            for (k2, &ck2) in c.iter().enumerate() {
                if k2 == k || ck == 0 || ck2 == 0 {
                    continue;
                }
                let mut r = (ck * ck2) as f64 / (2.0 * n);
                if k < k2 {
                    r += self.rates.s * (ck * ck2) as f64 / n;
                }
                out.push((Transition { gain: k, lose: k2 }, r));
            }
        }
        out
    }

    fn pick_by(&mut self, mut v: u64, weight: impl Fn(usize, u64) -> u64) -> usize {
        for (k, &c) in self.state.counts.iter().enumerate() {
            let w = weight(k, c);
            if v < w {
                return k;
            }
            v -= w;
        }
        unreachable!("categorical draw ran past the total weight")
    }

    /// Draws the next transition from the current state without applying it.
    pub fn sample_transition(&mut self) -> Option<(EventKind, Transition)> {
        let (rm, rr, rs) = self.category_rates();
        let total = rm + rr + rs;
        if total <= 0.0 {
            return None;
        }
        let n = self.rates.n;
        let u = self.rng.random::<f64>() * total;
        if u < rm {
            let v = self.rng.random_range(0..n);
            let k = self.pick_by(v, |_, c| c);
            return Some((
                EventKind::Mutation,
                Transition {
                    gain: k + 1,
                    lose: k,
                },
            ));
        }
        let pair = self.pair_weight();
        if u < rm + rr || rs == 0.0 {
            let v = self.rng.random_range(0..pair);
            let gain = self.pick_by(v, |_, c| c * (n - c));
            let v = self.rng.random_range(0..n - self.state.counts[gain]);
            let lose = self.pick_by(v, |k, c| if k == gain { 0 } else { c });
            return Some((EventKind::Resampling, Transition { gain, lose }));
        }
        // sum_{k<k'} c_k c_k' = pair / 2
        let v = self.rng.random_range(0..pair / 2);
        let mut above = n;
        let mut rest = v;
        let mut gain = usize::MAX;
        for (k, &c) in self.state.counts.iter().enumerate() {
            above -= c;
            let w = c * above;
            if rest < w {
                gain = k;
                break;
            }
            rest -= w;
        }
        let v = self.rng.random_range(0..above);
        let lose = self.pick_by(v, |k, c| if k > gain { c } else { 0 });
        Some((EventKind::Selection, Transition { gain, lose }))
    }

    fn apply(&mut self, tr: Transition) {
        let c = &mut self.state.counts;
        if tr.gain == c.len() {
            c.push(0);
        }
        // (c + 1)^2 - c^2 and (c - 1)^2 - c^2; gain != lose
        self.sum_sq = self.sum_sq + 2 * c[tr.gain] + 1 - 2 * c[tr.lose] + 1;
        c[tr.gain] += 1;
        c[tr.lose] -= 1;
        while c.len() > 1 && c.last() == Some(&0) {
            c.pop();
        }
        while c[0] == 0 {
            c.remove(0);
            self.state.best_type += 1;
            self.clicks.push(Click {
                time: self.time,
                new_best_type: self.state.best_type,
            });
        }
    }

    /// Performs the next event if it occurs by `limit`; otherwise sets the
    /// clock to `limit`. Returns the applied event.
    pub fn advance_until(&mut self, limit: f64) -> Option<(EventKind, Transition)> {
        let (rm, rr, rs) = self.category_rates();
        let total = rm + rr + rs;
        let t = if total > 0.0 {
            self.time + exp_wait(&mut self.rng, total)
        } else {
            f64::INFINITY
        };
        if t > limit {
            self.time = limit;
            return None;
        }
        self.time = t;
        let (kind, tr) = self.sample_transition().expect("positive total rate");
        self.apply(tr);
        self.events += 1;
        Some((kind, tr))
    }

    pub fn into_parts(self) -> (PopState, f64, Vec<Click>, u64) {
        (self.state, self.time, self.clicks, self.events)
    }
}

/// Runs from `init` up to `t_max`, snapshotting the profile at the sorted
/// `snapshot_times` (those beyond `t_max` are ignored).
pub fn simulate_from(
    rates: Rates,
    init: PopState,
    t_max: f64,
    snapshot_times: &[f64],
    seed: u64,
    track_y0: bool,
) -> Result<SimOutput> {
    if !(t_max > 0.0) {
        return domain(format!("t_max must be positive, got {t_max}"));
    }
    if snapshot_times.windows(2).any(|w| w[0] > w[1]) {
        return domain("snapshot times must be sorted");
    }
    let y0_type = init.best_type;
    let mut sim = MoranSimulator::new(rates, init, seed)?;
    let mut y0_path = track_y0.then(|| vec![(0.0, sim.state().count_of(y0_type))]);
    let mut snaps = Vec::with_capacity(snapshot_times.len());
    let run_to = |sim: &mut MoranSimulator, limit: f64, path: &mut Option<Vec<(f64, u64)>>| {
        while sim.advance_until(limit).is_some() {
            if let Some(p) = path.as_mut() {
                let y = sim.state().count_of(y0_type);
                if p.last().is_some_and(|&(_, prev)| prev != y) {
                    p.push((sim.time(), y));
                }
            }
        }
    };
    for &ts in snapshot_times.iter().filter(|&&t| t <= t_max) {
        run_to(&mut sim, ts, &mut y0_path);
        snaps.push(ProfileSnapshot {
            time: ts,
            x: sim.state().profile(),
        });
    }
    run_to(&mut sim, t_max, &mut y0_path);
    let (final_state, final_time, clicks, events) = sim.into_parts();
    Ok(SimOutput {
        clicks,
        profile_snapshots: snaps,
        y0_path,
        final_state,
        final_time,
        events,
    })
}

/// Runs from the monomorphic type-0 population.
pub fn simulate(rates: Rates, t_max: f64, snapshot_times: &[f64], seed: u64) -> Result<SimOutput> {
    simulate_from(
        rates,
        PopState::monomorphic(rates.n),
        t_max,
        snapshot_times,
        seed,
        false,
    )
}

/// Up and down rates of the count `n` of the initially best type while it
/// is still present: `n (1/2 + s)(1 - n/N)` and `n ((1 - n/N)/2 + m)`.
pub fn y0_rates(rates: &Rates, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let frac = 1.0 - nf / rates.n as f64;
    (nf * (0.5 + rates.s) * frac, nf * (0.5 * frac + rates.m))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::stats::chi_square_goodness_of_fit;

    #[test]
    fn frozen_without_mutation() {
        let r = Rates::new(20, 0.3, 0.0).unwrap();
        let out = simulate(r, 100.0, &[50.0], 1).unwrap();
        assert!(out.clicks.is_empty());
        assert_eq!(out.events, 0);
        assert_eq!(out.profile_snapshots[0].x, vec![1.0]);
    }

    #[test]
    fn conservation_and_monotone_best() {
        let r = Rates::new(50, 0.2, 0.3).unwrap();
        let mut sim = MoranSimulator::new(r, PopState::monomorphic(50), 7).unwrap();
        let mut best = 0;
        for _ in 0..20_000 {
            sim.advance_until(f64::INFINITY);
            assert_eq!(sim.state().size(), 50);
            assert_eq!(sim.state().sum_of_squares(), sim.sum_sq);
            assert!(sim.state().counts[0] > 0);
            assert!(sim.state().best_type >= best);
            best = sim.state().best_type;
        }
        assert!(best > 0);
        let cl = sim.clicks();
        assert!(cl
            .windows(2)
            .all(|w| w[0].time <= w[1].time && w[1].new_best_type == w[0].new_best_type + 1));
    }

    #[test]
    fn two_stage_sampler_matches_pair_rates() {
        let r = Rates::new(12, 0.4, 0.05).unwrap();
        let init = PopState::new(0, vec![4, 0, 5, 2, 1]).unwrap();
        let mut sim = MoranSimulator::new(r, init, 99).unwrap();
        // mutation k -> k+1 and resampling towards k+1 share a transition
        let mut merged: BTreeMap<Transition, f64> = BTreeMap::new();
        for (t, w) in sim.enumerate_transitions() {
            *merged.entry(t).or_default() += w;
        }
        let table: Vec<(Transition, f64)> = merged.into_iter().collect();
        let total: f64 = table.iter().map(|(_, w)| w).sum();
        let (a, b, c) = sim.category_rates();
        assert!((total - (a + b + c)).abs() < 1e-12);
        let index: BTreeMap<Transition, usize> = table
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (*t, i))
            .collect();
        let probs: Vec<f64> = table.iter().map(|(_, w)| w / total).collect();
        let draws: Vec<u32> = (0..100_000)
            .map(|_| index[&sim.sample_transition().unwrap().1] as u32)
            .collect();
        let fit = chi_square_goodness_of_fit(&draws, &probs, 5.0).unwrap();
        assert!(fit.p_value > 0.001, "p = {}", fit.p_value);
    }

    #[test]
    fn y0_rates_match_pair_enumeration() {
        let r = Rates::new(15, 0.3, 0.1).unwrap();
        let mut sim = MoranSimulator::new(r, PopState::monomorphic(15), 5).unwrap();
        for _ in 0..2000 {
            if sim.state().best_type > 0 {
                break;
            }
            let n0 = sim.state().counts[0];
            let (up, down) =
                sim.enumerate_transitions()
                    .iter()
                    .fold((0.0, 0.0), |(u, d), (t, w)| {
                        (
                            u + if t.gain == 0 { *w } else { 0.0 },
                            d + if t.lose == 0 { *w } else { 0.0 },
                        )
                    });
            let (eu, ed) = y0_rates(&r, n0);
            assert!((up - eu).abs() < 1e-12 && (down - ed).abs() < 1e-12);
            sim.advance_until(f64::INFINITY);
        }
    }

    #[test]
    fn deterministic_and_multi_step_clicks() {
        let r = Rates::new(8, 0.1, 0.2).unwrap();
        let a = simulate(r, 200.0, &[100.0, 200.0], 3).unwrap();
        let b = simulate(r, 200.0, &[100.0, 200.0], 3).unwrap();
        assert_eq!(a, b);
        let init = PopState::new(0, vec![1, 0, 0, 7]).unwrap();
        let mut sim = MoranSimulator::new(Rates::new(8, 0.0, 0.0).unwrap(), init, 0).unwrap();
        sim.apply(Transition { gain: 3, lose: 0 });
        let types: Vec<u64> = sim.clicks().iter().map(|c| c.new_best_type).collect();
        assert_eq!(types, vec![1, 2, 3]);
        assert_eq!(sim.state().counts, vec![8]);
    }
}
