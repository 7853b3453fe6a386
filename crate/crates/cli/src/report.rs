//! Cross-route comparison of per-class profile estimates.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ratchet_core::stats;
use serde::Serialize;

use crate::output::{opt, CsvBuilder, CsvFile};
use crate::CliError;

pub const LONG_HEADER: &str = "route,k,value,stderr";

/// Smallest expected count of a class entering the Wald statistic.
const MIN_EXPECTED: f64 = 5.0;

/// Per-class estimates of one route; `stderr` is absent for exact routes.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteEstimate {
    pub route: String,
    pub values: Vec<f64>,
    pub stderr: Vec<Option<f64>>,
}

impl RouteEstimate {
    pub fn exact(route: &str, values: Vec<f64>) -> Self {
        let stderr = vec![None; values.len()];
        Self {
            route: route.into(),
            values,
            stderr,
        }
    }

    /// Empirical frequencies with binomial standard errors.
    pub fn frequencies(route: &str, freqs: Vec<f64>, sample_size: usize) -> Self {
        let n = sample_size as f64;
        let stderr = freqs
            .iter()
            .map(|&p| Some((p * (1.0 - p) / n).sqrt()))
            .collect();
        Self {
            route: route.into(),
            values: freqs,
            stderr,
        }
    }

    fn value(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }
}

/// The plot-ready long table `route,k,value,stderr`.
pub fn long_format(routes: &[RouteEstimate]) -> CsvFile {
    let mut b = CsvBuilder::new(&["route", "k", "value", "stderr"]);
    for r in routes {
        for (k, (v, se)) in r.values.iter().zip(&r.stderr).enumerate() {
            b.row([r.route.clone(), k.to_string(), v.to_string(), opt(*se)]);
        }
    }
    b.finish("routes")
}

/// Parses a long table, rejecting any other header or malformed rows.
pub fn parse_long_format(body: &str) -> Result<Vec<RouteEstimate>, CliError> {
    let mut lines = body.lines();
    let header = lines.next().unwrap_or("");
    if header.trim() != LONG_HEADER {
        return Err(CliError::Schema(format!(
            "expected header `{LONG_HEADER}`, found `{header}`"
        )));
    }
    let mut by_route: BTreeMap<String, BTreeMap<usize, (f64, Option<f64>)>> = BTreeMap::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || CliError::Schema(format!("malformed row {}: `{line}`", i + 2));
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 || cells[0].is_empty() {
            return Err(bad());
        }
        let k: usize = cells[1].parse().map_err(|_| bad())?;
        let v: f64 = cells[2].parse().map_err(|_| bad())?;
        let se = if cells[3].is_empty() {
            None
        } else {
            Some(cells[3].parse::<f64>().map_err(|_| bad())?)
        };
        if by_route
            .entry(cells[0].to_string())
            .or_default()
            .insert(k, (v, se))
            .is_some()
        {
            return Err(CliError::Schema(format!(
                "duplicate entry for route {} at k = {k}",
                cells[0]
            )));
        }
    }
    let mut out = Vec::new();
    for (route, rows) in by_route {
        let len = rows.keys().max().map_or(0, |&k| k + 1);
        let mut values = vec![0.0; len];
        let mut stderr = vec![None; len];
        for (k, (v, se)) in rows {
            values[k] = v;
            stderr[k] = se;
        }
        out.push(RouteEstimate {
            route,
            values,
            stderr,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteTest {
    pub route: String,
    pub max_abs_deviation: f64,
    /// Wald statistic over the classes with a positive standard error and
    /// enough expected mass.
    pub statistic: Option<f64>,
    pub dof: usize,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub reference: String,
    pub routes: Vec<RouteEstimate>,
    pub tests: Vec<RouteTest>,
}

impl Comparison {
    /// Aligns the routes against `recursion`, or against the first route
    /// when it is missing. Shorter routes are padded with zeros.
    pub fn new(routes: Vec<RouteEstimate>) -> Result<Self, CliError> {
        if routes.len() < 2 {
            return Err(CliError::Config(
                "compare needs at least two routes, e.g. `ratchet compare --input a.csv --input b.csv`".into(),
            ));
        }
        let reference = routes
            .iter()
            .position(|r| r.route == "recursion")
            .unwrap_or(0);
        let len = routes.iter().map(|r| r.values.len()).max().unwrap_or(0);
        let base = &routes[reference];
        let mut tests = Vec::new();
        for r in routes.iter().filter(|r| r.route != base.route) {
            let mut dev: f64 = 0.0;
            let (mut stat, mut dof) = (0.0, 0usize);
            for k in 0..len {
                let d = r.value(k) - base.value(k);
                dev = dev.max(d.abs());
                if let Some(se) = r.stderr.get(k).copied().flatten().filter(|&s| s > 0.0) {
                    // effective sample size of a frequency; sparse cells are skipped
                    let v = r.value(k);
                    let n_eff = v * (1.0 - v) / (se * se);
                    if n_eff * v.min(base.value(k)) >= MIN_EXPECTED {
                        stat += (d / se).powi(2);
                        dof += 1;
                    }
                }
            }
            let p_value = if dof > 0 {
                Some(
                    stats::chi_square_sf(stat, dof)
                        .map_err(|e| CliError::Runtime(e.to_string()))?,
                )
            } else {
                None
            };
            tests.push(RouteTest {
                route: r.route.clone(),
                max_abs_deviation: dev,
                statistic: (dof > 0).then_some(stat),
                dof,
                p_value,
            });
        }
        Ok(Self {
            reference: base.route.clone(),
            routes,
            tests,
        })
    }

    pub fn max_deviation(&self, route: &str) -> Option<f64> {
        self.tests
            .iter()
            .find(|t| t.route == route)
            .map(|t| t.max_abs_deviation)
    }

    /// Wide table: one column per route and a final `max_abs_dev` row.
    pub fn report_table(&self) -> CsvFile {
        let mut header = vec!["k"];
        header.extend(self.routes.iter().map(|r| r.route.as_str()));
        let mut b = CsvBuilder::new(&header);
        let len = self
            .routes
            .iter()
            .map(|r| r.values.len())
            .max()
            .unwrap_or(0);
        for k in 0..len {
            let mut row = vec![k.to_string()];
            row.extend(self.routes.iter().map(|r| r.value(k).to_string()));
            b.row(row);
        }
        let mut last = vec!["max_abs_dev".to_string()];
        last.extend(
            self.routes
                .iter()
                .map(|r| opt(self.max_deviation(&r.route))),
        );
        b.row(last);
        b.finish("report")
    }

    pub fn tests_table(&self) -> CsvFile {
        let mut b = CsvBuilder::new(&[
            "route",
            "reference",
            "max_abs_dev",
            "statistic",
            "dof",
            "p_value",
        ]);
        for t in &self.tests {
            b.row([
                t.route.clone(),
                self.reference.clone(),
                t.max_abs_deviation.to_string(),
                opt(t.statistic),
                t.dof.to_string(),
                opt(t.p_value),
            ]);
        }
        b.finish("tests")
    }
}

/// Reads long-format route files and compares them.
pub fn compare_report(inputs: &[PathBuf]) -> Result<Comparison, CliError> {
    let mut routes: Vec<RouteEstimate> = Vec::new();
    for path in inputs {
        let body = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        for r in parse_long_format(&body)? {
            if routes.iter().any(|x| x.route == r.route) {
                return Err(CliError::Schema(format!(
                    "route {} appears in more than one input",
                    r.route
                )));
            }
            routes.push(r);
        }
    }
    Comparison::new(routes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn routes() -> Vec<RouteEstimate> {
        vec![
            RouteEstimate::exact("recursion", vec![0.5, 0.3, 0.2]),
            RouteEstimate::frequencies("yule_mc", vec![0.49, 0.32], 10_000),
        ]
    }

    #[test]
    fn long_format_round_trip() {
        let rs = routes();
        let text = long_format(&rs).body;
        assert!(text.starts_with("route,k,value,stderr\nrecursion,0,0.5,\n"));
        let mut back = parse_long_format(&text).unwrap();
        back.sort_by(|a, b| a.route.cmp(&b.route));
        assert_eq!(back, rs);
    }

    #[test]
    fn deviations_against_recursion() {
        let c = Comparison::new(routes()).unwrap();
        assert_eq!(c.reference, "recursion");
        let dev = c.max_deviation("yule_mc").unwrap();
        assert!((dev - 0.2).abs() < 1e-12);
        let t = &c.tests[0];
        // class 2 has no standard error in the padded route
        assert_eq!(t.dof, 2);
        let report = c.report_table().body;
        assert!(report.starts_with("k,recursion,yule_mc\n0,0.5,0.49\n"));
        assert!(report
            .lines()
            .last()
            .unwrap()
            .starts_with("max_abs_dev,,0.2"));
    }

    #[test]
    fn single_route_rejected() {
        let err = Comparison::new(vec![RouteEstimate::exact("recursion", vec![1.0])]).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn schema_mismatch() {
        assert!(matches!(
            parse_long_format("k,value\n0,1\n"),
            Err(CliError::Schema(_))
        ));
        assert!(matches!(
            parse_long_format("route,k,value,stderr\nx,zero,1,\n"),
            Err(CliError::Schema(_))
        ));
        assert!(matches!(
            parse_long_format("route,k,value,stderr\nx,0,1,\nx,0,2,\n"),
            Err(CliError::Schema(_))
        ));
    }
}
