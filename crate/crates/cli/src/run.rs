//! Dispatch of each experiment to the core library.

use std::time::Instant;

use ratchet_core::analytic::{
    classify_shape, click_exponent_coefficient, equilibrium_masses, profile_recursion,
    systeq_residual,
};
use ratchet_core::dual::ode::{logistic_total, ode_integrate};
use ratchet_core::dual::{simulate_hierarchy, z0_extinction_exact, z0_extinction_mc, DualState};
use ratchet_core::graphical::{
    forward_transport, is_allowed_move, sample_elements, AsgFlow, TypeConfig,
};
use ratchet_core::moran::{
    empirical_profile, joint_type_counts, pooled_gap_statistics, simulate_from, write_clicks_csv,
    write_profile_csv, PopState, SimOutput,
};
use ratchet_core::rng::replica_seed;
use ratchet_core::yule::{
    brw_min_batch, fixed_point_check, gw_checks, write_yule_samples_csv, yule_min_load_batch,
    SampleRow,
};
use ratchet_core::{stats, FScaling, Params, Rates};
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig, InitialState, Route};
use crate::output::{write_manifest, write_outputs, CsvBuilder, CsvFile, FileRecord, Manifest};
use crate::report::{long_format, Comparison, RouteEstimate};
use crate::CliError;

/// ODE horizon of the `compare` route, in units of `1 / alpha`.
const ODE_HORIZON: f64 = 200.0;
/// Initial level-0 mass of ODE runs.
const ODE_SEED_MASS: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<FileRecord>,
    pub summary: Value,
    /// False when a `compare` deviation exceeds its threshold.
    pub passed: bool,
}

struct Products {
    tables: Vec<CsvFile>,
    summary: Value,
    passed: bool,
}

impl Products {
    fn ok(tables: Vec<CsvFile>, summary: Value) -> Self {
        Self {
            tables,
            summary,
            passed: true,
        }
    }
}

/// Validates `cfg`, runs it and writes all outputs under `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let p = compute(cfg)?;
    let files = write_outputs(cfg, &p.tables, &p.summary)?;
    let manifest = Manifest {
        config: cfg,
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: files.clone(),
        summary: &p.summary,
    };
    write_manifest(cfg, &manifest)?;
    Ok(RunOutcome {
        files,
        summary: p.summary,
        passed: p.passed,
    })
}

fn compute(cfg: &ExperimentConfig) -> Result<Products, CliError> {
    match cfg.experiment {
        Experiment::Profile => profile(cfg),
        Experiment::Ode => ode(cfg),
        Experiment::Yule => yule(cfg),
        Experiment::Brw => brw(cfg),
        Experiment::Gw => gw(cfg),
        Experiment::Fixedpoint => fixedpoint(cfg),
        Experiment::Forward => forward(cfg),
        Experiment::Dual => dual(cfg),
        Experiment::Graphical => graphical(cfg),
        Experiment::Compare => compare(cfg),
    }
}

fn profile(cfg: &ExperimentConfig) -> Result<Products, CliError> {
    let (alpha, mu) = (cfg.params.alpha, cfg.mu());
    let w = profile_recursion(cfg.rho(), cfg.kmax)?;
    let m = equilibrium_masses(alpha, mu, cfg.kmax)?;
    let mut b = CsvBuilder::new(&["k", "p_k", "partial_sum", "n_bar_k"]);
    for k in 0..=cfg.kmax {
        b.row([
            k.to_string(),
            w.weights[k].to_string(),
            w.partial_sums[k].to_string(),
            m.masses[k].to_string(),
        ]);
    }
    let summary = json!({
        "rho": w.rho,
        "shape": classify_shape(&w).ok(),
        "mean": w.mean(),
        "tail_ratio": w.tail_ratio,
        "systeq_residual": systeq_residual(&w),
        "click_exponent_coefficient": click_exponent_coefficient(alpha, mu)?,
    });
    Ok(Products::ok(vec![b.finish("profile")], summary))
}

fn ode(cfg: &ExperimentConfig) -> Result<Products, CliError> {
    let (alpha, mu) = (cfg.params.alpha, cfg.mu());
    let t_max = cfg.t_max()?;
    let traj = ode_integrate(alpha, mu, cfg.kmax, &[ODE_SEED_MASS], t_max, cfg.dt)?;
    let stride = ((cfg.snapshot_grid()? / cfg.dt).round() as usize).max(1);
    let mut b = CsvBuilder::new(&["t", "k", "n_k"]);
    let last = traj.states.len() - 1;
    for (_, s) in traj
        .states
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == last)
    {
        for (k, x) in s.n.iter().enumerate() {
            b.row([s.t.to_string(), k.to_string(), x.to_string()]);
        }
    }
    let target = equilibrium_masses(alpha, mu, cfg.kmax)?.masses;
    let end = traj.last();
    let final_deviation = end
        .n
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let logistic_error = traj
        .states
        .iter()
        .map(|s| (s.total() - logistic_total(alpha, ODE_SEED_MASS, s.t)).abs())
        .fold(0.0, f64::max);
    let summary = json!({
        "t_end": end.t,
        "steps": last,
        "final_deviation_from_equilibrium": final_deviation,
        "final_total": end.total(),
        "max_logistic_error": logistic_error,
    });
    Ok(Products::ok(vec![b.finish("ode")], summary))
}

fn check_censoring(
    cfg: &ExperimentConfig,
    censored: usize,
    samples: usize,
) -> Result<f64, CliError> {
    let rate = censored as f64 / samples as f64;
    if rate > cfg.thresholds.max_censoring {
        return Err(CliError::Runtime(format!(
            "censoring rate {rate} exceeds {}; raise the cap",
            cfg.thresholds.max_censoring
        )));
    }
    Ok(rate)
}

fn load_summary(cfg: &ExperimentConfig, loads: &[u32]) -> Result<Value, CliError> {
    let w = profile_recursion(cfg.rho(), cfg.kmax)?;
    let fit = stats::chi_square_goodness_of_fit(loads, &w.weights, 5.0)?;
    let as_f: Vec<f64> = loads.iter().map(|&v| v as f64).collect();
    Ok(json!({
        "samples": loads.len(),
        "frequencies": stats::frequencies(loads),
        "mean": stats::mean(&as_f),
        "recursion_fit_p_value": fit.p_value,
    }))
}

fn yule(cfg: &ExperimentConfig) -> Result<Products, CliError> {
    let th = &cfg.thresholds;
    let batch = yule_min_load_batch(
        cfg.params.alpha,
        cfg.mu(),
        th.yule_threshold,
        th.yule_cap,
        cfg.reps(),
        cfg.seed,
    )?;
    let rate = check_censoring(cfg, batch.censored, batch.samples.len())?;
    let rows: Vec<SampleRow> = batch
        .samples
        .iter()
        .enumerate()
        .map(|(r, s)| SampleRow {
            replica: r as u64,
            method: "yule",
            value: s.load(),
        })
        .collect();
    let table = CsvFile::from_writer("yule_samples", |w| write_yule_samples_csv(w, &rows))?;
    let mut summary = load_summary(cfg, &batch.loads())?;
    summary["censored"] = json!(batch.censored);
    summary["censoring_rate"] = json!(rate);
    Ok(Products::ok(vec![table], summary))
}

fn brw(cfg: &ExperimentConfig) -> Result<Products, CliError> {
    let loads = brw_min_batch(
        cfg.params.alpha,
        cfg.mu(),
        cfg.thresholds.brw_stop,
        cfg.reps(),
        cfg.seed,
    )?;
    let rows: Vec<SampleRow> = loads
        .iter()
        .enumerate()
        .map(|(r, &v)| SampleRow {
            replica: r as u64,
            method: "brw",
            value: Some(v),
        })
        .collect();
    let table = CsvFile::from_writer("yule_samples", |w| write_yule_samples_csv(w, &rows))?;
    Ok(Products::ok(vec![table], load_summary(cfg, &loads)?))
}

/// Extinction probability and leaf generating function of the tree with no
/// children w.p. `q` and two otherwise, as smallest fixed points.
fn gw_exact(alpha: f64, mu: f64, u: f64) -> (f64, f64) {
    let q = mu / (alpha + mu);
    let extinction = q / (1.0 - q);
    let gf = (1.0 - (1.0 - 4.0 * q * (1.0 - q) * u).sqrt()) / (2.0 * (1.0 - q));
    (extinction, gf)
}

fn gw(cfg: &ExperimentConfig) -> Result<Products, CliError> {
    let (alpha, mu, u) = (cfg.params.alpha, cfg.mu(), cfg.gf_point);
    let g = gw_checks(
        alpha,
        mu,
        u,
        cfg.reps(),
        cfg.seed,
        cfg.thresholds.gw_alive_cap,
    )?;
    let (ext, gf) = gw_exact(alpha, mu, u);
    let mut b = CsvBuilder::new(&[
        "u",
        "reps",
        "extinction_freq",
        "extinction_exact",
        "leaf_gf_estimate",
        "leaf_gf_exact",
    ]);
    b.row([
        u,
        g.reps as f64,
        g.extinction_freq,
        ext,
        g.leaf_gf_estimate,
        gf,
    ]);
    let summary = json!({
        "extinction_error": (g.extinction_freq - ext).abs(),
        "leaf_gf_error": (g.leaf_gf_estimate - gf).abs(),
    });
    Ok(Products::ok(vec![b.finish("gw")], summary))
}

fn fixedpoint(cfg: &ExperimentConfig) -> Result<Products, CliError> {
    let th = &cfg.thresholds;
    let fp = fixed_point_check(
        cfg.rho(),
        cfg.reps(),
        cfg.seed,
        th.yule_threshold,
        th.yule_cap,
    )?;
    let rate = check_censoring(cfg, fp.censored, 3 * cfg.reps())?;
    let mut rows: Vec<SampleRow> = Vec::with_capacity(fp.lhs.len() + fp.rhs.len());
    for (method, values) in [("lhs", &fp.lhs), ("rhs", &fp.rhs)] {
        rows.extend(values.iter().enumerate().map(|(r, &v)| SampleRow {
            replica: r as u64,
            method,
            value: Some(v),
        }));
    }
    let table = CsvFile::from_writer("yule_samples", |w| write_yule_samples_csv(w, &rows))?;
    let summary = json!({
        "ks_statistic": fp.ks.statistic,
        "ks_p_value": fp.ks.p_value,
        "mean_m": fp.mean_m,
        "expected_mean_m": cfg.rho(),
        "censored": fp.censored,
        "censoring_rate": rate,
    });
    Ok(Products::ok(vec![table], summary))
}

fn initial_population(cfg: &ExperimentConfig, n: u64) -> Result<PopState, CliError> {
    Ok(match cfg.init {
        InitialState::Monomorphic => PopState::monomorphic(n),
        InitialState::Profile => {
            PopState::from_profile(n, &profile_recursion(cfg.rho(), cfg.kmax)?.weights)?
        }
    })
}

fn average_profiles(profiles: &[Vec<f64>]) -> Vec<f64> {
    let len = profiles.iter().map(Vec::len).max().unwrap_or(0);
    let mut acc = vec![0.0; len];
    for p in profiles {
        for (a, x) in acc.iter_mut().zip(p) {
            *a += x;
        }
    }
    acc.iter().map(|a| a / profiles.len() as f64).collect()
}

/// Forward runs with profile snapshots on the grid after burn-in.
fn forward_runs(cfg: &ExperimentConfig, reps: usize) -> Result<(Vec<SimOutput>, f64), CliError> {
    let p = cfg.model()?;
    let burn = cfg.burn_in()?;
    let t_max = cfg.t_max()?;
    let grid = cfg.snapshot_grid()?;
    let snaps: Vec<f64> = (1..)
        .map(|i| burn + i as f64 * grid)
        .take_while(|&t| t <= t_max)
        .collect();
    let init = initial_population(cfg, p.n)?;
    let runs = (0..reps as u64)
        .map(|r| {
            simulate_from(
                p.rates(),
                init.clone(),
                t_max,
                &snaps,
                replica_seed(cfg.seed, r),
                false,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((runs, burn))
}

fn forward(cfg: &ExperimentConfig) -> Result<Products, CliError> {
    let (runs, burn) = forward_runs(cfg, cfg.reps())?;
    let indexed: Vec<(u64, &SimOutput)> = runs
        .iter()
        .enumerate()
        .map(|(r, o)| (r as u64, o))
        .collect();
    let mut tables = vec![
        CsvFile::from_writer("clicks", |w| write_clicks_csv(w, &indexed))?,
        CsvFile::from_writer("profile", |w| write_profile_csv(w, &indexed))?,
    ];
    let after_burn: Vec<Vec<f64>> = runs
        .iter()
        .map(|o| {
            o.clicks
                .iter()
                .map(|c| c.time)
                .filter(|&t| t > burn)
                .collect()
        })
        .collect();
    let profiles = runs
        .iter()
        .map(|o| empirical_profile(o, burn))
        .collect::<Result<Vec<_>, _>>()?;
    let mut summary = json!({
        "burn_in": burn,
        "click_statistics": pooled_gap_statistics(&after_burn),
        "empirical_profile": average_profiles(&profiles),
        "events": runs.iter().map(|o| o.events).sum::<u64>(),
    });
    if cfg.joint_draws > 0 {
        let p = cfg.model()?;
        let init = initial_population(cfg, p.n)?;
        let j = joint_type_counts(
            p.rates(),
            &init,
            cfg.t_max()?,
            2,
            cfg.reps(),
            cfg.joint_draws,
            cfg.seed,
        )?;
        let mut b = CsvBuilder::new(&["eta_1", "eta_2", "count", "frequency"]);
        for (key, &c) in &j.counts {
            b.row([
                key[0].to_string(),
                key[1].to_string(),
                c.to_string(),
                j.frequency(key).to_string(),
            ]);
        }
        tables.push(b.finish("joint"));
        summary["joint_00"] = json!(j.frequency(&[0, 0]));
    }
    Ok(Products::ok(tables, summary))
}

/// Population size with `N / f(N)` closest to `x` under the configured
/// scaling family.
fn size_for_ratio(f: FScaling, x: f64) -> Result<u64, CliError> {
    let mut n = match f {
        FScaling::Value { value } => return Ok((x * value).round().max(1.0) as u64),
        _ => x.max(2.0).round() as u64,
    };
    for _ in 0..100 {
        let next = (x * f.evaluate(n.max(2))?).round().max(2.0) as u64;
        if next == n {
            break;
        }
        n = next;
    }
    Ok(n)
}

fn dual(cfg: &ExperimentConfig) -> Result<Products, CliError> {
    let p = cfg.model()?;
    let t_max = cfg.t_max()?;
    let reps = cfg.reps();
    let mut b = CsvBuilder::new(&["replica", "level", "time"]);
    let mut h0 = Vec::new();
    for r in 0..reps as u64 {
        let path = simulate_hierarchy(
            p.rates(),
            DualState::full(p.n),
            t_max,
            &[],
            replica_seed(cfg.seed, r),
            Some(cfg.kmax),
        )?;
        for e in &path.level_extinction_times {
            b.row([r.to_string(), e.level.to_string(), e.time.to_string()]);
            if e.level == 0 {
                h0.push(e.time);
            }
        }
    }
    let mut tables = vec![b.finish("extinctions")];
    let mut summary = json!({
        "replicas": reps,
        "level0_extinct_fraction": h0.len() as f64 / reps as f64,
        "level0_mean_time_given_extinct": (!h0.is_empty()).then(|| stats::mean(&h0)),
    });
    if !cfg.n_over_f.is_empty() {
        let mut s = CsvBuilder::new(&["N_over_f", "exact_mean", "mc_mean", "mc_se"]);
        let mut exponents = Vec::new();
        for (i, &x) in cfg.n_over_f.iter().enumerate() {
            let n = size_for_ratio(cfg.params.f, x)?;
            let f = cfg.params.f.evaluate(n)?;
            let rates = Params::new(n, cfg.params.alpha, cfg.mu(), f)?.rates();
            let exact = z0_extinction_exact(&rates, n)?;
            let mc = z0_extinction_mc(
                &rates,
                n,
                reps.max(10),
                replica_seed(cfg.seed ^ 0x5eed, i as u64),
            )?;
            s.row([
                (n as f64 / f).to_string(),
                exact.to_string(),
                mc.mean_h0.to_string(),
                mc.se_h0.to_string(),
            ]);
            exponents.push(
                json!({ "N": n, "log_ratio_per_n_over_f": (exact / f).ln() / (n as f64 / f) }),
            );
        }
        tables.push(s.finish("h0_sweep"));
        summary["sweep"] = json!(exponents);
    }
    Ok(Products::ok(tables, summary))
}

fn cardinalities(flow: &AsgFlow<'_>) -> Vec<usize> {
    let mut c = Vec::new();
    for d in flow.loads() {
        if let Some(k) = d.finite() {
            let k = k as usize;
            if c.len() <= k {
                c.resize(k + 1, 0);
            }
            c[k] += 1;
        }
    }
    c
}

fn graphical(cfg: &ExperimentConfig) -> Result<Products, CliError> {
    let rates: Rates = cfg.model()?.rates();
    let t_max = cfg.t_max()?;
    let n = rates.n as usize;
    let all: Vec<usize> = (0..n).collect();
    let mut b = CsvBuilder::new(&[
        "replica",
        "elements",
        "forward_clicks",
        "backward_min_load",
        "best_count",
        "ancestors_at_start",
        "audit_violations",
    ]);
    let (mut mismatches, mut violations) = (0usize, 0usize);
    for r in 0..cfg.reps() as u64 {
        let g = sample_elements(&rates, 0.0, t_max, replica_seed(cfg.seed, r))?;
        let out = forward_transport(&g, TypeConfig::zeros(n, 0.0))?;
        let mut flow = AsgFlow::new(&g, &all)?;
        let mut before = cardinalities(&flow);
        let mut bad = 0usize;
        while flow.step().is_some() {
            let after = cardinalities(&flow);
            if !is_allowed_move(&before, &after) {
                bad += 1;
            }
            before = after;
        }
        let min_load = flow.min_load();
        mismatches += usize::from(min_load as usize != out.clicks.len());
        violations += bad;
        b.row([
            r.to_string(),
            g.events().len().to_string(),
            out.clicks.len().to_string(),
            min_load.to_string(),
            out.final_config.best_count().to_string(),
            before.iter().sum::<usize>().to_string(),
            bad.to_string(),
        ]);
    }
    let summary = json!({
        "replicas": cfg.reps(),
        "click_count_mismatches": mismatches,
        "audit_violations": violations,
    });
    Ok(Products::ok(vec![b.finish("graphical")], summary))
}

fn route_estimate(cfg: &ExperimentConfig, route: Route) -> Result<RouteEstimate, CliError> {
    let (alpha, mu) = (cfg.params.alpha, cfg.mu());
    let th = &cfg.thresholds;
    let kmax = cfg.kmax;
    let truncate = |mut v: Vec<f64>| {
        v.resize(kmax + 1, 0.0);
        v
    };
    Ok(match route {
        Route::Recursion => {
            RouteEstimate::exact(route.name(), profile_recursion(cfg.rho(), kmax)?.weights)
        }
        Route::Ode => {
            let k = kmax.max(30);
            let traj = ode_integrate(alpha, mu, k, &[ODE_SEED_MASS], ODE_HORIZON / alpha, cfg.dt)?;
            let values = traj.last().n.iter().map(|x| x / (2.0 * alpha)).collect();
            RouteEstimate::exact(route.name(), truncate(values))
        }
        Route::YuleMc => {
            let batch = yule_min_load_batch(
                alpha,
                mu,
                th.yule_threshold,
                th.yule_cap,
                cfg.reps(),
                cfg.seed,
            )?;
            check_censoring(cfg, batch.censored, batch.samples.len())?;
            let loads = batch.loads();
            RouteEstimate::frequencies(
                route.name(),
                truncate(stats::frequencies(&loads)),
                loads.len(),
            )
        }
        Route::BrwMc => {
            let loads =
                brw_min_batch(alpha, mu, th.brw_stop, cfg.reps(), cfg.seed.wrapping_add(1))?;
            RouteEstimate::frequencies(
                route.name(),
                truncate(stats::frequencies(&loads)),
                loads.len(),
            )
        }
        Route::ForwardMc => {
            let (runs, burn) = forward_runs(cfg, cfg.forward_reps)?;
            let profiles = runs
                .iter()
                .map(|o| empirical_profile(o, burn))
                .collect::<Result<Vec<_>, _>>()?;
            let values = truncate(average_profiles(&profiles));
            let stderr = (0..=kmax)
                .map(|k| {
                    (profiles.len() >= 2).then(|| {
                        let xs: Vec<f64> = profiles
                            .iter()
                            .map(|p| p.get(k).copied().unwrap_or(0.0))
                            .collect();
                        stats::std_error(&xs)
                    })
                })
                .collect();
            RouteEstimate {
                route: route.name().into(),
                values,
                stderr,
            }
        }
    })
}

fn compare(cfg: &ExperimentConfig) -> Result<Products, CliError> {
    let (routes, computed) = if cfg.inputs.is_empty() {
        let mut routes = cfg.routes.clone();
        routes.sort();
        routes.dedup();
        let est = routes
            .iter()
            .map(|&r| route_estimate(cfg, r))
            .collect::<Result<Vec<_>, _>>()?;
        (est, true)
    } else {
        (crate::report::compare_report(&cfg.inputs)?.routes, false)
    };
    let c = Comparison::new(routes)?;
    let th = &cfg.thresholds;
    let mut failures = Vec::new();
    for t in &c.tests {
        let limit = if t.route == Route::ForwardMc.name() {
            th.forward_deviation
        } else {
            th.max_deviation
        };
        if t.max_abs_deviation >= limit {
            failures.push(
                json!({ "route": t.route, "max_abs_dev": t.max_abs_deviation, "limit": limit }),
            );
        }
    }
    let mut tables = Vec::new();
    if computed {
        tables.push(long_format(&c.routes));
    }
    tables.push(c.report_table());
    tables.push(c.tests_table());
    let summary = json!({
        "reference": c.reference,
        "tests": c.tests,
        "failures": failures,
        "max_abs_dev": c.tests.iter().map(|t| t.max_abs_deviation).fold(0.0, f64::max),
    });
    Ok(Products {
        tables,
        summary,
        passed: failures.is_empty(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gw_exact_values() {
        let (e, g) = gw_exact(1.0, 0.5, 0.5);
        assert!((e - 0.5).abs() < 1e-15);
        assert!((g - 0.190983005625052).abs() < 1e-12);
        // no mutation: the tree never dies
        assert_eq!(gw_exact(1.0, 0.0, 0.5), (0.0, 0.0));
    }

    #[test]
    fn ratio_inversion() {
        assert_eq!(
            size_for_ratio(FScaling::Value { value: 50.0 }, 20.0).unwrap(),
            1000
        );
        let f = FScaling::Power { c: 1.0, gamma: 0.5 };
        let n = size_for_ratio(f, 10.0).unwrap();
        assert!((n as f64 / f.evaluate(n).unwrap() - 10.0).abs() < 0.1);
    }

    #[test]
    fn averaging_pads() {
        assert_eq!(
            average_profiles(&[vec![1.0], vec![0.5, 0.5]]),
            vec![0.75, 0.25]
        );
    }
}
