//! Exact simulation of the level-count chain `z = (z_0, z_1, ...)`.
//!
//! Level `j` owns the events that change it first:
//!
//! * death `z -> z - e_j` at rate `z_j (z_j - 1) / (2N) + z_j L_j / N`,
//!   where `L_j = sum_{i<j} z_i`;
//! * gain `z -> z + e_j` at rate `s z_j (N - L_j - z_j) / N`, split into
//!   competition with a unit of level `k > j` (which loses it) with weight
//!   `z_k`, and branching into an empty line with weight `N - sum z`;
//! * mutation `z -> z - e_j + e_{j+1}` at rate `m z_j`.
//!
//! The rates of level `j` depend on levels `0..=j` only. Each level draws
//! from its own stream and keeps its own pending event time; after an event
//! owned by level `j`, only levels `>= j` are redrawn. Running with
//! `max_level = k` therefore reproduces levels `0..=k` of an untruncated run
//! with the same seed exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::params::Rates;
use crate::rng::{exp_wait, SimRng, StreamFactory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub z: Vec<u64>,
    pub n: u64,
    pub time: f64,
}

impl DualState {
    pub fn new(z: Vec<u64>, n: u64) -> Result<Self> {
        let total: u64 = z.iter().sum();
        if total > n {
            return domain(format!("level counts sum to {total} > N = {n}"));
        }
        Ok(Self { z, n, time: 0.0 })
    }

    /// All `n` units on level 0.
    pub fn full(n: u64) -> Self {
        Self {
            z: vec![n],
            n,
            time: 0.0,
        }
    }

    pub fn total(&self) -> u64 {
        self.z.iter().sum()
    }

    pub fn level(&self, k: usize) -> u64 {
        self.z.get(k).copied().unwrap_or(0)
    }

    pub fn lowest_nonempty(&self) -> Option<usize> {
        self.z.iter().position(|&c| c > 0)
    }

    /// Counts with trailing empty levels removed.
    pub fn trimmed(&self) -> Vec<u64> {
        let end = self.z.iter().rposition(|&c| c > 0).map_or(0, |i| i + 1);
        self.z[..end].to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelExtinction {
    pub level: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierarchyPath {
    pub level_extinction_times: Vec<LevelExtinction>,
    /// States at the requested snapshot times.
    pub z_at_times: Vec<DualState>,
    pub final_state: DualState,
    pub events: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelEvent {
    Death,
    /// Competition win against a unit of the given higher level.
    Compete(usize),
    Branch,
    Mutate,
}

/// Per-level clock engine. Levels beyond `max_level` are not tracked; mass
/// mutating past it leaves the system.
pub struct Hierarchy {
    rates: Rates,
    state: DualState,
    max_level: usize,
    streams: StreamFactory,
    rngs: Vec<SimRng>,
    pending: Vec<f64>,
    events: u64,
}

impl Hierarchy {
    pub fn new(rates: Rates, init: DualState, seed: u64, max_level: Option<usize>) -> Result<Self> {
        if init.n != rates.n {
            return domain(format!(
                "state capacity {} differs from N = {}",
                init.n, rates.n
            ));
        }
        DualState::new(init.z.clone(), init.n)?;
        let max_level = max_level.unwrap_or(usize::MAX);
        let mut state = init;
        if state.z.len() > max_level.saturating_add(1) {
            state.z.truncate(max_level + 1);
        }
        let mut h = Self {
            rates,
            state,
            max_level,
            streams: StreamFactory::new(seed),
            rngs: Vec::new(),
            pending: Vec::new(),
            events: 0,
        };
        h.redraw_from(0);
        Ok(h)
    }

    pub fn state(&self) -> &DualState {
        &self.state
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    fn below(&self, j: usize) -> u64 {
        self.state.z[..j].iter().sum()
    }

    /// `(death, gain, mutation)` rates of level `j`.
    pub fn level_rates(&self, j: usize) -> (f64, f64, f64) {
        let zj = self.state.level(j) as f64;
        if zj == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let n = self.rates.n as f64;
        let l = self.below(j.min(self.state.z.len())) as f64;
        let death = zj * (zj - 1.0) / (2.0 * n) + zj * l / n;
        let gain = self.rates.s * zj * (n - l - zj) / n;
        let mutation = self.rates.m * zj;
        (death, gain, mutation)
    }

    fn ensure_level(&mut self, j: usize) {
        while self.rngs.len() <= j {
            self.rngs.push(self.streams.next_stream());
            self.pending.push(f64::INFINITY);
        }
        if self.state.z.len() <= j {
            self.state.z.resize(j + 1, 0);
        }
    }

    fn redraw_from(&mut self, j0: usize) {
        let top = self.state.z.len();
        for j in j0..top {
            self.ensure_level(j);
            let (d, g, m) = self.level_rates(j);
            let total = d + g + m;
            self.pending[j] = if total > 0.0 {
                self.state.time + exp_wait(&mut self.rngs[j], total)
            } else {
                f64::INFINITY
            };
        }
        for j in top..self.pending.len() {
            self.pending[j] = f64::INFINITY;
        }
    }

    /// Time and owner of the next event.
    pub fn next_event(&self) -> Option<(f64, usize)> {
        self.pending
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, &t)| (t, j))
    }

    fn choose(&mut self, j: usize) -> LevelEvent {
        let (d, g, m) = self.level_rates(j);
        let weight_total = self.rates.n - self.below(j) - self.state.z[j];
        let rng = &mut self.rngs[j];
        let u = rng.random::<f64>() * (d + g + m);
        if u < d {
            return LevelEvent::Death;
        }
        if u >= d + g {
            return LevelEvent::Mutate;
        }
        let mut v = rng.random_range(0..weight_total);
        for k in j + 1..self.state.z.len() {
            let c = self.state.z[k];
            if v < c {
                return LevelEvent::Compete(k);
            }
            v -= c;
        }
        LevelEvent::Branch
    }

    /// Applies the next event if it happens by `limit`; otherwise moves the
    /// clock to `limit` and returns `None`.
    pub fn step_until(&mut self, limit: f64) -> Option<(usize, LevelEvent)> {
        let (t, j) = match self.next_event() {
            Some((t, j)) if t <= limit => (t, j),
            _ => {
                self.state.time = self.state.time.max(limit);
                return None;
            }
        };
        self.state.time = t;
        let ev = self.choose(j);
        let z = &mut self.state.z;
        match ev {
            LevelEvent::Death => z[j] -= 1,
            LevelEvent::Compete(k) => {
                z[j] += 1;
                z[k] -= 1;
            }
            LevelEvent::Branch => z[j] += 1,
            LevelEvent::Mutate => {
                z[j] -= 1;
                if j < self.max_level {
                    if z.len() <= j + 1 {
                        z.push(0);
                    }
                    z[j + 1] += 1;
                }
            }
        }
        self.events += 1;
        self.redraw_from(j);
        Some((j, ev))
    }
}

/// Runs the hierarchy up to `t_max`, recording the state at each of the
/// sorted `snapshot_times` and every rise of the lowest nonempty level.
pub fn simulate_hierarchy(
    rates: Rates,
    init: DualState,
    t_max: f64,
    snapshot_times: &[f64],
    seed: u64,
    max_level: Option<usize>,
) -> Result<HierarchyPath> {
    if !(t_max >= init.time) {
        return domain("t_max precedes the initial time");
    }
    if snapshot_times.windows(2).any(|w| w[0] > w[1]) {
        return domain("snapshot times must be sorted");
    }
    let mut h = Hierarchy::new(rates, init, seed, max_level)?;
    let mut records = Vec::new();
    let mut z_at_times = Vec::with_capacity(snapshot_times.len());
    let ceiling = h.state.z.len().max(max_level.map_or(0, |k| k + 1));
    let mut lowest = h.state().lowest_nonempty();
    let note = |h: &Hierarchy, lowest: &mut Option<usize>, records: &mut Vec<LevelExtinction>| {
        let now = h.state().lowest_nonempty();
        let from = lowest.unwrap_or(usize::MAX);
        let to = now.unwrap_or_else(|| h.state.z.len().max(ceiling));
        if lowest.is_some() && to > from {
            for level in from..to {
                records.push(LevelExtinction {
                    level,
                    time: h.state.time,
                });
            }
        }
        *lowest = now;
    };
    for &ts in snapshot_times.iter().filter(|&&ts| ts <= t_max) {
        while h.step_until(ts).is_some() {
            note(&h, &mut lowest, &mut records);
        }
        z_at_times.push(h.state.clone());
    }
    while h.step_until(t_max).is_some() {
        note(&h, &mut lowest, &mut records);
    }
    let events = h.events();
    Ok(HierarchyPath {
        level_extinction_times: records,
        z_at_times,
        final_state: h.state,
        events,
    })
}
