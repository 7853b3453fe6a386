use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RatchetError, Result};
use crate::params::Rates;
use crate::rng::{exp_wait, seeded, SimRng};

/// An arrow from line `from` to line `to` at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrow {
    pub from: usize,
    pub to: usize,
    pub time: f64,
}

/// A mutation mark on `line` at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub line: usize,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Neutral { from: usize, to: usize },
    Selective { from: usize, to: usize },
    Mark { line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub element: Element,
}

/// One line of the JSON event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LogRecord {
    Neutral { i: usize, j: usize, t: f64 },
    Selective { i: usize, j: usize, t: f64 },
    Mark { i: usize, t: f64 },
}

/// A finite realisation of the three Poisson element processes on a window.
///
/// Lines are indexed `0..n`. The value is immutable once built; the merged
/// event sequence is computed at construction and shared by every forward
/// and backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphicalElements {
    n: usize,
    window: (f64, f64),
    neutral_arrows: Vec<Arrow>,
    selective_arrows: Vec<Arrow>,
    mutation_marks: Vec<Mark>,
    events: Vec<Event>,
}

impl GraphicalElements {
    pub fn new(
        n: usize,
        window: (f64, f64),
        mut neutral_arrows: Vec<Arrow>,
        mut selective_arrows: Vec<Arrow>,
        mut mutation_marks: Vec<Mark>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(RatchetError::InvalidElements(msg));
        if n == 0 {
            return bad("need at least one line".into());
        }
        let (t0, t1) = window;
        if !(t0 < t1) {
            return bad(format!("empty window [{t0}, {t1}]"));
        }
        let in_window = |t: f64| t >= t0 && t <= t1;
        for a in neutral_arrows.iter().chain(&selective_arrows) {
            if a.from == a.to {
                return bad(format!(
                    "arrow from line {} to itself at t = {}",
                    a.from, a.time
                ));
            }
            if a.from >= n || a.to >= n {
                return bad(format!("arrow ({}, {}) outside 0..{n}", a.from, a.to));
            }
            if !in_window(a.time) {
                return bad(format!("arrow time {} outside window", a.time));
            }
        }
        for m in &mutation_marks {
            if m.line >= n {
                return bad(format!("mark on line {} outside 0..{n}", m.line));
            }
            if !in_window(m.time) {
                return bad(format!("mark time {} outside window", m.time));
            }
        }
        neutral_arrows.sort_by(|a, b| a.time.total_cmp(&b.time));
        selective_arrows.sort_by(|a, b| a.time.total_cmp(&b.time));
        mutation_marks.sort_by(|a, b| a.time.total_cmp(&b.time));

        let mut events: Vec<Event> = neutral_arrows
            .iter()
            .map(|a| Event {
                time: a.time,
                element: Element::Neutral {
                    from: a.from,
                    to: a.to,
                },
            })
            .chain(selective_arrows.iter().map(|a| Event {
                time: a.time,
                element: Element::Selective {
                    from: a.from,
                    to: a.to,
                },
            }))
            .chain(mutation_marks.iter().map(|m| Event {
                time: m.time,
                element: Element::Mark { line: m.line },
            }))
            .collect();
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        if let Some(w) = events.windows(2).find(|w| w[0].time == w[1].time) {
            return bad(format!("two events share the time {}", w[0].time));
        }
        Ok(Self {
            n,
            window,
            neutral_arrows,
            selective_arrows,
            mutation_marks,
            events,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn neutral_arrows(&self) -> &[Arrow] {
        &self.neutral_arrows
    }

    pub fn selective_arrows(&self) -> &[Arrow] {
        &self.selective_arrows
    }

    pub fn mutation_marks(&self) -> &[Mark] {
        &self.mutation_marks
    }

    /// All events in increasing time order.
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// The elements falling in `[a, b]`, as a realisation on that window.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self> {
        let keep = |t: f64| t >= a && t <= b;
        Self::new(
            self.n,
            (a, b),
            self.neutral_arrows
                .iter()
                .copied()
                .filter(|x| keep(x.time))
                .collect(),
            self.selective_arrows
                .iter()
                .copied()
                .filter(|x| keep(x.time))
                .collect(),
            self.mutation_marks
                .iter()
                .copied()
                .filter(|x| keep(x.time))
                .collect(),
        )
    }

    /// Copy with one extra mutation mark.
    pub fn with_extra_mark(&self, mark: Mark) -> Result<Self> {
        let mut marks = self.mutation_marks.clone();
        marks.push(mark);
        Self::new(
            self.n,
            self.window,
            self.neutral_arrows.clone(),
            self.selective_arrows.clone(),
            marks,
        )
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.events {
            let rec = match e.element {
                Element::Neutral { from, to } => LogRecord::Neutral {
                    i: from,
                    j: to,
                    t: e.time,
                },
                Element::Selective { from, to } => LogRecord::Selective {
                    i: from,
                    j: to,
                    t: e.time,
                },
                Element::Mark { line } => LogRecord::Mark { i: line, t: e.time },
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(n: usize, window: (f64, f64), input: R) -> Result<Self> {
        let mut neutral = Vec::new();
        let mut selective = Vec::new();
        let mut marks = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| RatchetError::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LogRecord = serde_json::from_str(&line)
                .map_err(|e| RatchetError::Parse(format!("line {}: {e}", lineno + 1)))?;
            match rec {
                LogRecord::Neutral { i, j, t } => neutral.push(Arrow {
                    from: i,
                    to: j,
                    time: t,
                }),
                LogRecord::Selective { i, j, t } => selective.push(Arrow {
                    from: i,
                    to: j,
                    time: t,
                }),
                LogRecord::Mark { i, t } => marks.push(Mark { line: i, time: t }),
            }
        }
        Self::new(n, window, neutral, selective, marks)
    }
}

fn poisson_times(rng: &mut SimRng, rate: f64, t0: f64, t1: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let mut t = t0;
    loop {
        t += exp_wait(rng, rate);
        if t > t1 {
            return out;
        }
        out.push(t);
    }
}

fn ordered_pair(rng: &mut SimRng, n: usize) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Samples the elements on `[t0, t1]`: per ordered pair of lines, neutral
/// arrows at rate `1 / (2N)` and selective arrows at rate `s / N`; per line,
/// marks at rate `m`. Each channel is generated from exponential gaps of its
/// superposed rate, with uniformly chosen lines. A realisation with two
/// coinciding times is discarded and redrawn.
pub fn sample_elements(rates: &Rates, t0: f64, t1: f64, seed: u64) -> Result<GraphicalElements> {
    let n = rates.n as usize;
    if !(t0 < t1) {
        return Err(RatchetError::Domain(format!(
            "need t0 < t1, got [{t0}, {t1}]"
        )));
    }
    let nf = n as f64;
    let pairs = nf * (nf - 1.0);
    let mut rng = seeded(seed);
    loop {
        let neutral: Vec<Arrow> = poisson_times(&mut rng, pairs / (2.0 * nf), t0, t1)
            .into_iter()
            .map(|time| {
                let (from, to) = ordered_pair(&mut rng, n);
                Arrow { from, to, time }
            })
            .collect();
        let selective: Vec<Arrow> = poisson_times(&mut rng, pairs * rates.s / nf, t0, t1)
            .into_iter()
            .map(|time| {
                let (from, to) = ordered_pair(&mut rng, n);
                Arrow { from, to, time }
            })
            .collect();
        let marks: Vec<Mark> = poisson_times(&mut rng, nf * rates.m, t0, t1)
            .into_iter()
            .map(|time| Mark {
                line: rng.random_range(0..n),
                time,
            })
            .collect();
        match GraphicalElements::new(n, (t0, t1), neutral, selective, marks) {
            Ok(g) => return Ok(g),
            Err(RatchetError::InvalidElements(msg)) if msg.starts_with("two events") => continue,
            Err(e) => return Err(e),
        }
    }
}
