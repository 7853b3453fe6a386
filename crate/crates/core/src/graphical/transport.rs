//! Forward passes over a realisation: transport of type configurations and
//! propagation of M-distances from a source set.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::elements::{Element, GraphicalElements};
use crate::error::{RatchetError, Result};

/// Minimal path load, with an explicit value for "no path".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MDist {
    Finite(u32),
    Unreachable,
}

impl MDist {
    pub fn finite(self) -> Option<u32> {
        match self {
            MDist::Finite(k) => Some(k),
            MDist::Unreachable => None,
        }
    }

    pub fn is_reachable(self) -> bool {
        matches!(self, MDist::Finite(_))
    }

    /// One more mark on the path.
    pub fn bump(self) -> Self {
        match self {
            MDist::Finite(k) => MDist::Finite(k + 1),
            MDist::Unreachable => MDist::Unreachable,
        }
    }

    /// Sum of two loads (path concatenation).
    pub fn plus(self, other: MDist) -> Self {
        match (self, other) {
            (MDist::Finite(a), MDist::Finite(b)) => MDist::Finite(a + b),
            _ => MDist::Unreachable,
        }
    }
}

impl Ord for MDist {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (MDist::Finite(a), MDist::Finite(b)) => a.cmp(b),
            (MDist::Finite(_), MDist::Unreachable) => Ordering::Less,
            (MDist::Unreachable, MDist::Finite(_)) => Ordering::Greater,
            (MDist::Unreachable, MDist::Unreachable) => Ordering::Equal,
        }
    }
}

impl PartialOrd for MDist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MDist::Finite(k) => write!(f, "{k}"),
            MDist::Unreachable => f.write_str("inf"),
        }
    }
}

/// Types `eta(i, t)` of all lines at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeConfig {
    pub values: Vec<u32>,
    pub time: f64,
}

impl TypeConfig {
    pub fn zeros(n: usize, time: f64) -> Self {
        Self {
            values: vec![0; n],
            time,
        }
    }

    pub fn best(&self) -> u32 {
        self.values.iter().copied().min().unwrap_or(0)
    }

    /// Number of lines currently carrying the best type.
    pub fn best_count(&self) -> usize {
        let b = self.best();
        self.values.iter().filter(|&&v| v == b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Click {
    pub time: f64,
    pub new_best_type: u64,
}

/// Step-by-step forward transport of types through a realisation.
pub struct TypeTransport<'a> {
    events: &'a [super::elements::Event],
    next: usize,
    config: TypeConfig,
}

impl<'a> TypeTransport<'a> {
    pub fn new(elements: &'a GraphicalElements, init: TypeConfig) -> Result<Self> {
        if init.values.len() != elements.n() {
            return Err(RatchetError::Domain(format!(
                "initial configuration has {} lines, realisation has {}",
                init.values.len(),
                elements.n()
            )));
        }
        if init.time != elements.window().0 {
            return Err(RatchetError::Domain(
                "initial configuration must sit at the window start".into(),
            ));
        }
        Ok(Self {
            events: elements.events(),
            next: 0,
            config: init,
        })
    }

    pub fn config(&self) -> &TypeConfig {
        &self.config
    }

    /// Applies the next event; returns its time, or `None` when exhausted.
    pub fn step(&mut self) -> Option<f64> {
        let ev = self.events.get(self.next)?;
        self.next += 1;
        let eta = &mut self.config.values;
        match ev.element {
            Element::Neutral { from, to } => eta[to] = eta[from],
            Element::Selective { from, to } => {
                if eta[from] < eta[to] {
                    eta[to] = eta[from];
                }
            }
            Element::Mark { line } => eta[line] += 1,
        }
        self.config.time = ev.time;
        Some(ev.time)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportOutcome {
    pub clicks: Vec<Click>,
    pub final_config: TypeConfig,
}

/// Runs the forward transport over the whole window. A click is recorded
/// for every unit increase of the best type; an increase by several units at
/// one event yields several records with the same time.
pub fn forward_transport(
    elements: &GraphicalElements,
    init: TypeConfig,
) -> Result<TransportOutcome> {
    let mut run = TypeTransport::new(elements, init)?;
    let mut best = run.config().best();
    let mut clicks = Vec::new();
    while let Some(t) = run.step() {
        let now = run.config().best();
        for b in best + 1..=now {
            clicks.push(Click {
                time: t,
                new_best_type: b as u64,
            });
        }
        best = now;
    }
    let mut final_config = run.config.clone();
    final_config.time = elements.window().1;
    Ok(TransportOutcome {
        clicks,
        final_config,
    })
}

/// Step-by-step forward propagation of `d_M(source x {t0}, (j, t))`.
pub struct DistanceFlow<'a> {
    events: &'a [super::elements::Event],
    next: usize,
    dist: Vec<MDist>,
    time: f64,
}

impl<'a> DistanceFlow<'a> {
    pub fn new(elements: &'a GraphicalElements, source: &[usize]) -> Result<Self> {
        if source.is_empty() {
            return Err(RatchetError::Domain("source set must be nonempty".into()));
        }
        let mut dist = vec![MDist::Unreachable; elements.n()];
        for &i in source {
            if i >= elements.n() {
                return Err(RatchetError::Domain(format!(
                    "source line {i} out of range"
                )));
            }
            dist[i] = MDist::Finite(0);
        }
        Ok(Self {
            events: elements.events(),
            next: 0,
            dist,
            time: elements.window().0,
        })
    }

    pub fn distances(&self) -> &[MDist] {
        &self.dist
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step(&mut self) -> Option<f64> {
        let ev = self.events.get(self.next)?;
        self.next += 1;
        let d = &mut self.dist;
        match ev.element {
            Element::Neutral { from, to } => d[to] = d[from],
            Element::Selective { from, to } => d[to] = d[to].min(d[from]),
            Element::Mark { line } => d[line] = d[line].bump(),
        }
        self.time = ev.time;
        Some(ev.time)
    }

    /// Runs up to and including all events at times `<= t`.
    pub fn advance_to(&mut self, t: f64) {
        while self.events.get(self.next).is_some_and(|e| e.time <= t) {
            self.step();
        }
        self.time = self.time.max(t);
    }
}

/// Distances from `source x {t0}` to every line, recorded at the window
/// start and after every event.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTrace {
    pub times: Vec<f64>,
    pub rows: Vec<Vec<MDist>>,
}

impl DistanceTrace {
    /// Distances at time `t` (state after all events at times `<= t`).
    pub fn at(&self, t: f64) -> &[MDist] {
        let idx = self.times.partition_point(|&s| s <= t).max(1) - 1;
        &self.rows[idx]
    }

    pub fn last(&self) -> &[MDist] {
        self.rows.last().expect("trace holds the initial row")
    }
}

pub fn m_distance(elements: &GraphicalElements, source: &[usize]) -> Result<DistanceTrace> {
    let mut flow = DistanceFlow::new(elements, source)?;
    let mut times = vec![flow.time()];
    let mut rows = vec![flow.distances().to_vec()];
    while let Some(t) = flow.step() {
        times.push(t);
        rows.push(flow.distances().to_vec());
    }
    Ok(DistanceTrace { times, rows })
}
