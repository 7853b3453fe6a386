//! Experiment configuration: JSON file layout, defaults and validation.

use std::path::{Path, PathBuf};

use ratchet_core::{FScaling, Params};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Profile,
    Ode,
    Yule,
    Brw,
    Gw,
    Fixedpoint,
    Forward,
    Dual,
    Graphical,
    Compare,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Profile,
        Experiment::Ode,
        Experiment::Yule,
        Experiment::Brw,
        Experiment::Gw,
        Experiment::Fixedpoint,
        Experiment::Forward,
        Experiment::Dual,
        Experiment::Graphical,
        Experiment::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Profile => "profile",
            Experiment::Ode => "ode",
            Experiment::Yule => "yule",
            Experiment::Brw => "brw",
            Experiment::Gw => "gw",
            Experiment::Fixedpoint => "fixedpoint",
            Experiment::Forward => "forward",
            Experiment::Dual => "dual",
            Experiment::Graphical => "graphical",
            Experiment::Compare => "compare",
        }
    }

    fn default_reps(self) -> usize {
        match self {
            Experiment::Yule | Experiment::Brw | Experiment::Fixedpoint | Experiment::Compare => {
                20_000
            }
            Experiment::Gw => 10_000,
            Experiment::Graphical => 500,
            Experiment::Dual => 100,
            Experiment::Profile | Experiment::Ode | Experiment::Forward => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Estimates of the profile that `compare` can line up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Recursion,
    Ode,
    YuleMc,
    BrwMc,
    ForwardMc,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Recursion => "recursion",
            Route::Ode => "ode",
            Route::YuleMc => "yule_mc",
            Route::BrwMc => "brw_mc",
            Route::ForwardMc => "forward_mc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// All individuals carry type 0.
    #[default]
    Monomorphic,
    /// Counts rounded from `N p_k`.
    Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub n: u64,
    pub alpha: f64,
    pub mu: f64,
    /// When set, replaces `mu` by `rho * alpha`.
    pub rho: Option<f64>,
    pub f: FScaling,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            alpha: 1.0,
            mu: 0.5,
            rho: None,
            f: FScaling::Value { value: 50.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Largest admissible `|route - recursion|` in `compare`.
    pub max_deviation: f64,
    /// Same for the forward simulator route, which carries finite-N bias.
    pub forward_deviation: f64,
    pub yule_threshold: u64,
    pub yule_cap: u64,
    /// A censoring rate above this fails a Yule run.
    pub max_censoring: f64,
    pub brw_stop: u64,
    pub gw_alive_cap: u64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            max_deviation: 0.015,
            forward_deviation: 0.03,
            yule_threshold: 200,
            yule_cap: 100_000,
            max_censoring: 0.01,
            brw_stop: 10_000,
            gw_alive_cap: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub reps: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub burn_in: Option<f64>,
    /// Spacing of recorded times.
    #[serde(default)]
    pub snapshot_grid: Option<f64>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub format: Format,
    #[serde(default = "default_kmax")]
    pub kmax: usize,
    /// ODE step size.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Argument of the leaf generating function in `gw`.
    #[serde(default = "default_gf_point")]
    pub gf_point: f64,
    /// `N / f(N)` values of the extinction-time sweep in `dual`.
    #[serde(default)]
    pub n_over_f: Vec<f64>,
    #[serde(default)]
    pub init: InitialState,
    /// Independent two-individual draws per replica in `forward`; 0 skips
    /// the joint sample.
    #[serde(default)]
    pub joint_draws: usize,
    #[serde(default = "default_routes")]
    pub routes: Vec<Route>,
    #[serde(default = "default_forward_reps")]
    pub forward_reps: usize,
    /// Long-format route files for `compare`; empty means compute the routes.
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
}

fn default_seed() -> u64 {
    1
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_kmax() -> usize {
    30
}
fn default_dt() -> f64 {
    0.01
}
fn default_gf_point() -> f64 {
    0.5
}
fn default_forward_reps() -> usize {
    1
}
fn default_routes() -> Vec<Route> {
    vec![
        Route::Recursion,
        Route::Ode,
        Route::YuleMc,
        Route::BrwMc,
        Route::ForwardMc,
    ]
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        serde_json::from_value(serde_json::json!({ "experiment": experiment }))
            .expect("defaults deserialize")
    }

    /// Reads a JSON config. `experiment`, when given, takes precedence over
    /// the file's own value.
    pub fn from_file(path: &Path, experiment: Option<Experiment>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, experiment)
    }

    pub fn from_json(text: &str, experiment: Option<Experiment>) -> Result<Self, CliError> {
        let mut value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        if let Some(e) = experiment {
            match value.as_object_mut() {
                Some(obj) => {
                    obj.insert(
                        "experiment".into(),
                        serde_json::to_value(e).expect("enum serializes"),
                    );
                }
                None => return Err(CliError::Config("config must be a JSON object".into())),
            }
        }
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn reps(&self) -> usize {
        self.reps.unwrap_or_else(|| self.experiment.default_reps())
    }

    pub fn mu(&self) -> f64 {
        self.params
            .rho
            .map_or(self.params.mu, |r| r * self.params.alpha)
    }

    pub fn rho(&self) -> f64 {
        self.mu() / self.params.alpha
    }

    pub fn model(&self) -> Result<Params, CliError> {
        let p = &self.params;
        Params::with_scaling(p.n, p.alpha, self.mu(), p.f)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// `10 f(N) ln N` unless set.
    pub fn burn_in(&self) -> Result<f64, CliError> {
        let p = self.model()?;
        Ok(self.burn_in.unwrap_or(10.0 * p.f_of_n * (p.n as f64).ln()))
    }

    pub fn t_max(&self) -> Result<f64, CliError> {
        if let Some(t) = self.t_max {
            return Ok(t);
        }
        Ok(match self.experiment {
            Experiment::Ode => 200.0 / self.params.alpha,
            Experiment::Graphical => 10.0,
            _ => 2.0 * self.burn_in()?.max(1.0),
        })
    }

    pub fn snapshot_grid(&self) -> Result<f64, CliError> {
        if let Some(g) = self.snapshot_grid {
            return Ok(g);
        }
        Ok(match self.experiment {
            Experiment::Ode => 1.0,
            _ => self.model()?.f_of_n / 5.0,
        })
    }

    /// Checks every field the chosen experiment reads.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.params.rho.is_some_and(|r| !(r > 0.0 && r < 1.0)) {
            return bad(format!("rho must lie in (0, 1), got {:?}", self.params.rho));
        }
        self.model()?;
        if self.reps() == 0 {
            return bad("reps must be positive".into());
        }
        if self.out_dir.as_os_str().is_empty() {
            return bad("out_dir must not be empty".into());
        }
        for (name, v) in [
            ("t_max", self.t_max),
            ("burn_in", self.burn_in),
            ("snapshot_grid", self.snapshot_grid),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return bad(format!("{name} must be finite and nonnegative, got {v}"));
                }
            }
        }
        let t_max = self.t_max()?;
        if !(t_max > 0.0) {
            return bad(format!("t_max must be positive, got {t_max}"));
        }
        if !(self.snapshot_grid()? > 0.0) {
            return bad("snapshot_grid must be positive".into());
        }
        if matches!(self.experiment, Experiment::Forward) && self.burn_in()? >= t_max {
            return bad(format!(
                "burn_in {} must be smaller than t_max {t_max}",
                self.burn_in()?
            ));
        }
        if self.kmax < 1 {
            return bad("kmax must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(0.0..=1.0).contains(&self.gf_point) {
            return bad(format!(
                "gf_point must lie in [0, 1], got {}",
                self.gf_point
            ));
        }
        if self.n_over_f.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return bad("n_over_f values must be positive".into());
        }
        if self.forward_reps == 0 {
            return bad("forward_reps must be positive".into());
        }
        let th = &self.thresholds;
        if !(th.max_deviation > 0.0 && th.forward_deviation > 0.0) {
            return bad("deviation thresholds must be positive".into());
        }
        if !(0.0..=1.0).contains(&th.max_censoring) {
            return bad("max_censoring must lie in [0, 1]".into());
        }
        if th.yule_threshold < 1
            || th.yule_cap < th.yule_threshold
            || th.brw_stop < 1
            || th.gw_alive_cap < 2
        {
            return bad("Yule threshold, cap, BRW stop and GW cap are out of range".into());
        }
        if self.experiment == Experiment::Compare {
            if self.inputs.len() == 1 {
                return bad("compare needs at least two route files".into());
            }
            if self.inputs.is_empty() && self.routes.len() < 2 {
                return bad("compare needs at least two routes".into());
            }
        }
        Ok(())
    }
}
