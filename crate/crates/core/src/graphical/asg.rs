//! Backward load percolation on the ancestral selection graph.
//!
//! Every line carries the minimal number of marks on a path from it to the
//! target set at the window end. Reading the realisation backwards:
//!
//! * neutral arrow `i -> j`: `j` leaves the graph and hands its load to `i`
//!   (`load(i) = min(load(i), load(j))`);
//! * selective arrow `i -> j`: `i` joins with the load of `j`, or lowers its
//!   own to it; `j` keeps its load;
//! * mark on `i`: `load(i) += 1`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::elements::{Element, Event, GraphicalElements};
use super::transport::MDist;
use crate::error::{RatchetError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsgSnapshot {
    pub time: f64,
    pub load_classes: BTreeMap<u32, BTreeSet<usize>>,
    pub min_load: u32,
}

impl AsgSnapshot {
    /// `(A(0), A(1), ..., A(max))` with zeros for empty levels.
    pub fn cardinalities(&self) -> Vec<usize> {
        let top = self
            .load_classes
            .keys()
            .next_back()
            .map_or(0, |&k| k as usize + 1);
        let mut out = vec![0; top];
        for (&k, set) in &self.load_classes {
            out[k as usize] = set.len();
        }
        out
    }

    pub fn size(&self) -> usize {
        self.load_classes.values().map(BTreeSet::len).sum()
    }
}

/// Step-by-step backward run. Each step consumes the latest event not yet
/// processed.
#[derive(Debug, Clone)]
pub struct AsgFlow<'a> {
    events: &'a [Event],
    remaining: usize,
    load: Vec<MDist>,
    time: f64,
}

impl<'a> AsgFlow<'a> {
    pub fn new(elements: &'a GraphicalElements, targets: &[usize]) -> Result<Self> {
        if targets.is_empty() {
            return Err(RatchetError::Domain("target set must be nonempty".into()));
        }
        let mut load = vec![MDist::Unreachable; elements.n()];
        for &i in targets {
            if i >= elements.n() {
                return Err(RatchetError::Domain(format!(
                    "target line {i} out of range"
                )));
            }
            load[i] = MDist::Finite(0);
        }
        let events = elements.events();
        Ok(Self {
            events,
            remaining: events.len(),
            load,
            time: elements.window().1,
        })
    }

    pub fn loads(&self) -> &[MDist] {
        &self.load
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn min_load(&self) -> u32 {
        self.load
            .iter()
            .filter_map(|d| d.finite())
            .min()
            .expect("the graph never empties")
    }

    pub fn snapshot(&self) -> AsgSnapshot {
        let mut load_classes: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
        for (i, d) in self.load.iter().enumerate() {
            if let MDist::Finite(k) = d {
                load_classes.entry(*k).or_default().insert(i);
            }
        }
        AsgSnapshot {
            time: self.time,
            load_classes,
            min_load: self.min_load(),
        }
    }

    /// Loads restricted to levels `<= k`, for comparing two runs.
    pub fn classes_up_to(&self, k: u32) -> Vec<Option<u32>> {
        self.load
            .iter()
            .map(|d| d.finite().filter(|&v| v <= k))
            .collect()
    }

    pub fn step(&mut self) -> Option<f64> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let ev = self.events[self.remaining];
        let l = &mut self.load;
        match ev.element {
            Element::Neutral { from, to } => {
                l[from] = l[from].min(l[to]);
                l[to] = MDist::Unreachable;
            }
            Element::Selective { from, to } => l[from] = l[from].min(l[to]),
            Element::Mark { line } => l[line] = l[line].bump(),
        }
        self.time = ev.time;
        Some(ev.time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackwardClick {
    pub level: u32,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsgRun {
    /// Snapshots in backward order: the window end first, then one per event.
    pub snapshots: Vec<AsgSnapshot>,
    /// `(l, T_l)`: the largest time at which the minimal load reaches `l`.
    pub clicks: Vec<BackwardClick>,
}

impl AsgRun {
    /// Snapshot in force at time `t` (after all events at times `>= t`).
    pub fn at(&self, t: f64) -> &AsgSnapshot {
        let idx = self
            .snapshots
            .iter()
            .rposition(|s| s.time >= t)
            .unwrap_or(0);
        &self.snapshots[idx]
    }

    pub fn last(&self) -> &AsgSnapshot {
        self.snapshots
            .last()
            .expect("run holds the initial snapshot")
    }
}

pub fn asg_backward(elements: &GraphicalElements, targets: &[usize]) -> Result<AsgRun> {
    let mut flow = AsgFlow::new(elements, targets)?;
    let mut snapshots = vec![flow.snapshot()];
    let mut clicks = Vec::new();
    let mut min = flow.min_load();
    while let Some(t) = flow.step() {
        let now = flow.min_load();
        for level in min + 1..=now {
            clicks.push(BackwardClick { level, time: t });
        }
        min = now;
        snapshots.push(flow.snapshot());
    }
    Ok(AsgRun { snapshots, clicks })
}

/// A cardinality move between consecutive snapshots that is not one of the
/// moves of the level-count chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: usize,
    pub before: Vec<usize>,
    pub after: Vec<usize>,
}

/// True when `after - before` is `0`, `+-e_k`, `e_k - e_k'` with `k < k'`,
/// or `e_{k+1} - e_k`.
pub fn is_allowed_move(before: &[usize], after: &[usize]) -> bool {
    let len = before.len().max(after.len());
    let get = |v: &[usize], k: usize| v.get(k).copied().unwrap_or(0) as i64;
    let diff: Vec<(usize, i64)> = (0..len)
        .map(|k| (k, get(after, k) - get(before, k)))
        .filter(|&(_, d)| d != 0)
        .collect();
    match diff.as_slice() {
        [] => true,
        [(_, d)] => d.abs() == 1,
        [(k1, d1), (k2, d2)] => {
            // k1 < k2 by construction
            (*d1 == 1 && *d2 == -1) || (*d1 == -1 && *d2 == 1 && k2 == &(k1 + 1))
        }
        _ => false,
    }
}

/// Checks every consecutive pair of snapshots; returns all violations.
pub fn audit_transitions(run: &AsgRun) -> Vec<Violation> {
    let cards: Vec<Vec<usize>> = run
        .snapshots
        .iter()
        .map(AsgSnapshot::cardinalities)
        .collect();
    cards
        .windows(2)
        .enumerate()
        .filter(|(_, w)| !is_allowed_move(&w[0], &w[1]))
        .map(|(index, w)| Violation {
            index: index + 1,
            before: w[0].clone(),
            after: w[1].clone(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MergeTime {
    At(f64),
    Never,
}

/// The largest time at which the classes of load `<= k` of the two backward
/// runs agree line by line. Agreement persists further back once reached,
/// so the first agreement met walking backwards is the supremum.
pub fn merging_time(
    elements: &GraphicalElements,
    targets1: &[usize],
    targets2: &[usize],
    k: u32,
) -> Result<MergeTime> {
    let mut a = AsgFlow::new(elements, targets1)?;
    let mut b = AsgFlow::new(elements, targets2)?;
    if a.classes_up_to(k) == b.classes_up_to(k) {
        return Ok(MergeTime::At(elements.window().1));
    }
    while let Some(t) = a.step() {
        b.step();
        if a.classes_up_to(k) == b.classes_up_to(k) {
            return Ok(MergeTime::At(t));
        }
    }
    Ok(MergeTime::Never)
}

#[cfg(test)]
mod tests {
    use super::super::elements::{Arrow, Mark};
    use super::*;

    fn two_lines(
        neutral: Vec<Arrow>,
        selective: Vec<Arrow>,
        marks: Vec<Mark>,
    ) -> GraphicalElements {
        GraphicalElements::new(2, (0.0, 1.0), neutral, selective, marks).unwrap()
    }

    fn arrow(from: usize, to: usize, time: f64) -> Arrow {
        Arrow { from, to, time }
    }

    fn mark(line: usize, time: f64) -> Mark {
        Mark { line, time }
    }

    fn loads_at_start(g: &GraphicalElements, targets: &[usize]) -> Vec<MDist> {
        let mut flow = AsgFlow::new(g, targets).unwrap();
        while flow.step().is_some() {}
        flow.loads().to_vec()
    }

    use MDist::{Finite as F, Unreachable as U};

    // Two-line backward panels, target = line 1 at the window end.

    #[test]
    fn panel_neutral_hands_ancestry_over() {
        let g = two_lines(vec![arrow(0, 1, 0.5)], vec![], vec![mark(1, 0.2)]);
        // the mark on line 1 sits below the arrow and is no longer ancestral
        assert_eq!(loads_at_start(&g, &[1]), vec![F(0), U]);
    }

    #[test]
    fn panel_selective_adds_potential_ancestor() {
        let g = two_lines(vec![], vec![arrow(0, 1, 0.5)], vec![mark(0, 0.2)]);
        assert_eq!(loads_at_start(&g, &[1]), vec![F(1), F(0)]);
    }

    #[test]
    fn panel_selective_lowers_load() {
        // line 0 is ancestral with load 1 above the arrow, line 1 with load 0
        let g = GraphicalElements::new(
            2,
            (0.0, 1.0),
            vec![],
            vec![arrow(0, 1, 0.5)],
            vec![mark(0, 0.7)],
        )
        .unwrap();
        assert_eq!(loads_at_start(&g, &[0, 1]), vec![F(0), F(0)]);
    }

    #[test]
    fn panel_mark_below_selective() {
        let g = two_lines(vec![], vec![arrow(0, 1, 0.6)], vec![mark(1, 0.3)]);
        assert_eq!(loads_at_start(&g, &[1]), vec![F(0), F(1)]);
    }

    #[test]
    fn no_events_keeps_targets() {
        let g = GraphicalElements::new(4, (0.0, 1.0), vec![], vec![], vec![]).unwrap();
        let run = asg_backward(&g, &[1, 3]).unwrap();
        assert_eq!(run.snapshots.len(), 1);
        assert_eq!(
            run.last().load_classes.get(&0),
            Some(&BTreeSet::from([1, 3]))
        );
        assert!(run.clicks.is_empty());
        assert!(asg_backward(&g, &[]).is_err());
    }

    #[test]
    fn backward_clicks_on_single_line() {
        let g = GraphicalElements::new(
            1,
            (0.0, 1.0),
            vec![],
            vec![],
            vec![mark(0, 0.2), mark(0, 0.7)],
        )
        .unwrap();
        let run = asg_backward(&g, &[0]).unwrap();
        assert_eq!(
            run.clicks,
            vec![
                BackwardClick {
                    level: 1,
                    time: 0.7
                },
                BackwardClick {
                    level: 2,
                    time: 0.2
                }
            ]
        );
        assert_eq!(run.at(0.5).min_load, 1);
        assert_eq!(run.at(0.9).min_load, 0);
    }

    #[test]
    fn allowed_moves() {
        assert!(is_allowed_move(&[2, 1], &[2, 1]));
        assert!(is_allowed_move(&[2, 1], &[2, 2]));
        assert!(is_allowed_move(&[2, 1], &[1, 1]));
        assert!(is_allowed_move(&[2, 1], &[3, 0]));
        assert!(is_allowed_move(&[2, 1], &[1, 2]));
        assert!(is_allowed_move(&[2, 1], &[2, 0, 1]));
        assert!(!is_allowed_move(&[2, 1], &[1, 1, 1]));
        assert!(!is_allowed_move(&[2, 1], &[0, 1]));
        assert!(is_allowed_move(&[2, 1, 1], &[2, 2, 0]));
        assert!(!is_allowed_move(&[2, 1, 0], &[1, 1, 1]));
    }

    #[test]
    fn merge_trivial_cases() {
        let g = GraphicalElements::new(3, (0.0, 1.0), vec![], vec![], vec![]).unwrap();
        assert_eq!(merging_time(&g, &[0], &[0], 0).unwrap(), MergeTime::At(1.0));
        assert_eq!(merging_time(&g, &[0], &[1], 0).unwrap(), MergeTime::Never);
        let g =
            GraphicalElements::new(2, (0.0, 1.0), vec![arrow(0, 1, 0.4)], vec![], vec![]).unwrap();
        assert_eq!(merging_time(&g, &[0], &[1], 0).unwrap(), MergeTime::At(0.4));
    }
}
