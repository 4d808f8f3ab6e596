//! Experiment configuration files (TOML) and the shipped presets.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::burgers::{self, BurgersGrid};
use crate::error::{Error, Result};
use crate::kernel::ShapeParameter;
use crate::model_select::{CvConfig, DEFAULT_INNER_MAX_CENTERS};
use crate::ode::{NewtonSettings, DEFAULT_NEWTON_MAX_ITER, DEFAULT_NEWTON_TOLERANCE};
use crate::pipeline::{OfflineConfig, ProblemSpec, TestCase, TrainingRun};
use crate::vkoga::{SelectionRule, TrainConfig, DEFAULT_TOLERANCE};

const PRESETS: &[(&str, &str)] = &[
    ("experiment1", include_str!("../presets/experiment1.toml")),
    ("experiment2", include_str!("../presets/experiment2.toml")),
    ("experiment3", include_str!("../presets/experiment3.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemSection,
    pub offline: OfflineSection,
    pub online: Option<OnlineSection>,
    #[serde(default)]
    pub newton: NewtonSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub id: String,
    pub cells: Option<usize>,
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mu: Vec<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default)]
    pub rule: SelectionRule,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub max_centers: Option<usize>,
    /// Fixed shape parameter; cross validation is skipped when set.
    pub epsilon: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            rule: SelectionRule::default(),
            tolerance: DEFAULT_TOLERANCE,
            max_centers: None,
            epsilon: None,
        }
    }
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSection {
    pub folds: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_count: usize,
    pub inner_max_centers: usize,
}

impl Default for CvSection {
    fn default() -> Self {
        Self {
            folds: 5,
            grid_lo: 1e-4,
            grid_hi: 1e2,
            grid_count: 50,
            inner_max_centers: DEFAULT_INNER_MAX_CENTERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineSection {
    pub t_train: f64,
    pub runs: Vec<RunSection>,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub cv: CvSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSpace {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl LogSpace {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.lo > 0.0 && self.lo < self.hi) || self.count < 2 {
            return Err(Error::Config(format!(
                "log-spaced range needs 0 < lo < hi and count >= 2, got {self:?}"
            )));
        }
        let (a, b) = (self.lo.log10(), self.hi.log10());
        let last = (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|k| match k {
                0 => self.lo,
                k if k + 1 == self.count => self.hi,
                k => 10f64.powf(a + k as f64 * (b - a) / last),
            })
            .collect())
    }
}

/// How the test horizon is matched to each timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// `t_test / dt` must be an integer.
    #[default]
    Exact,
    /// Integrate `floor(t_test / dt)` steps, ending at or before `t_test`.
    Floor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineSection {
    pub t_test: f64,
    #[serde(default = "one")]
    pub repetitions: usize,
    pub mu: Vec<Vec<f64>>,
    pub dt: Option<Vec<f64>>,
    pub dt_logspace: Option<LogSpace>,
    #[serde(default)]
    pub horizon: Horizon,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonSection {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NewtonSection {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_NEWTON_TOLERANCE,
            max_iterations: DEFAULT_NEWTON_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Defaults to `out/<name>`.
    pub dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))?;
        Self::parse(text)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&self.name))
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        match self.problem.id.as_str() {
            burgers::PROBLEM_ID => {
                let d = BurgersGrid::default();
                Ok(ProblemSpec::Burgers(BurgersGrid::new(
                    self.problem.cells.unwrap_or(d.cells),
                    self.problem.half_width.unwrap_or(d.half_width),
                )?))
            }
            other => Err(Error::Config(format!("unknown problem '{other}'"))),
        }
    }

    pub fn newton_settings(&self) -> NewtonSettings {
        NewtonSettings {
            tolerance: self.newton.tolerance,
            max_iterations: self.newton.max_iterations,
        }
    }

    pub fn cv_config(&self, train: TrainConfig) -> CvConfig {
        let cv = &self.offline.cv;
        CvConfig {
            folds: cv.folds,
            grid_lo: cv.grid_lo,
            grid_hi: cv.grid_hi,
            grid_count: cv.grid_count,
            seed: self.seed,
            inner_max_centers: cv.inner_max_centers,
            train,
        }
    }

    pub fn offline_config(&self) -> Result<OfflineConfig> {
        let t = &self.offline.train;
        // placeholder until cross validation picks the value
        let epsilon = ShapeParameter::new(t.epsilon.unwrap_or(1.0))?;
        let train = TrainConfig {
            tolerance: t.tolerance,
            max_centers: t.max_centers,
            rule: t.rule,
            epsilon,
        };
        let cfg = OfflineConfig {
            problem: self.problem_spec()?,
            runs: self
                .offline
                .runs
                .iter()
                .map(|r| TrainingRun {
                    mu: r.mu.clone(),
                    dt: r.dt,
                })
                .collect(),
            t_train: self.offline.t_train,
            train,
            cross_validation: t.epsilon.is_none().then(|| self.cv_config(train)),
            normalize: self.offline.normalize,
            newton: self.newton_settings(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn online_section(&self) -> Result<&OnlineSection> {
        self.online
            .as_ref()
            .ok_or_else(|| Error::Config("config has no [online] section".into()))
    }

    /// Test timesteps from `dt` or `dt_logspace`.
    pub fn test_timesteps(&self) -> Result<Vec<f64>> {
        let online = self.online_section()?;
        match (&online.dt, &online.dt_logspace) {
            (Some(list), None) if !list.is_empty() => Ok(list.clone()),
            (None, Some(space)) => space.values(),
            _ => Err(Error::Config(
                "[online] needs exactly one of a nonempty `dt` list or `dt_logspace`".into(),
            )),
        }
    }

    /// All `(mu, dt)` combinations with their integration horizon.
    pub fn test_cases(&self) -> Result<Vec<TestCase>> {
        let online = self.online_section()?;
        if online.mu.is_empty() {
            return Err(Error::Config("[online] mu list is empty".into()));
        }
        let dts = self.test_timesteps()?;
        let mut cases = Vec::with_capacity(online.mu.len() * dts.len());
        for mu in &online.mu {
            for &dt in &dts {
                let t_end = match online.horizon {
                    Horizon::Exact => online.t_test,
                    Horizon::Floor => {
                        let steps = (online.t_test / dt + 1e-9).floor();
                        if steps < 1.0 {
                            return Err(Error::Config(format!(
                                "dt = {dt} exceeds the test horizon {}",
                                online.t_test
                            )));
                        }
                        steps * dt
                    }
                };
                cases.push(TestCase {
                    mu: mu.clone(),
                    dt,
                    t_end,
                });
            }
        }
        Ok(cases)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_match_the_experiments() {
        let names: Vec<_> = preset_names().collect();
        assert_eq!(names, vec!["experiment1", "experiment2", "experiment3"]);

        let e1 = ExperimentConfig::preset("experiment1").unwrap();
        let off = e1.offline_config().unwrap();
        assert_eq!(off.runs.len(), 1);
        assert_eq!(off.runs[0].mu, vec![3.4, 0.2]);
        assert_eq!(off.t_train, 4.0);
        let cv = off.cross_validation.unwrap();
        assert_eq!(
            (cv.folds, cv.grid_count, cv.grid_lo, cv.grid_hi),
            (5, 50, 1e-4, 1e2)
        );
        assert_eq!(off.train.tolerance, 1e-12);
        assert_eq!(off.newton.tolerance, 1e-14);
        assert_eq!(off.newton.max_iterations, 100);
        assert_eq!(
            off.problem,
            ProblemSpec::Burgers(BurgersGrid::new(200, 5.0).unwrap())
        );
        let cases = e1.test_cases().unwrap();
        assert_eq!(cases.len(), 9);
        assert!(cases.iter().all(|c| c.t_end == 2.0 && c.dt == 0.01));
        assert!(cases.iter().any(|c| c.mu == vec![3.2, 0.0]));
        assert!(cases.iter().any(|c| c.mu == vec![3.6, 0.4]));
        assert_eq!(e1.online.as_ref().unwrap().repetitions, 10);

        let e2 = ExperimentConfig::preset("experiment2").unwrap();
        let off = e2.offline_config().unwrap();
        let corners: Vec<Vec<f64>> = off.runs.iter().map(|r| r.mu.clone()).collect();
        assert_eq!(
            corners,
            vec![
                vec![3.2, 0.0],
                vec![3.2, 0.4],
                vec![3.6, 0.0],
                vec![3.6, 0.4]
            ]
        );
        assert_eq!(e2.test_cases().unwrap(), cases);

        let e3 = ExperimentConfig::preset("experiment3").unwrap();
        let off = e3.offline_config().unwrap();
        let dts: Vec<f64> = off.runs.iter().map(|r| r.dt).collect();
        assert_eq!(dts, vec![0.01, 0.005, 0.001]);
        let steps = e3.test_timesteps().unwrap();
        assert_eq!(steps.len(), 10);
        assert_eq!(steps[0], 0.001);
        assert_eq!(steps[9], 0.05);
        assert!((steps[5] - 8.79e-3).abs() < 5e-6);
        for c in e3.test_cases().unwrap() {
            assert!(c.t_end <= 2.0 + 1e-12);
            crate::ode::step_count(c.t_end, c.dt).unwrap();
        }
    }

    #[test]
    fn fixed_epsilon_skips_cv() {
        let mut e = ExperimentConfig::preset("experiment1").unwrap();
        e.offline.train.epsilon = Some(0.05);
        let off = e.offline_config().unwrap();
        assert!(off.cross_validation.is_none());
        assert_eq!(off.train.epsilon.value(), 0.05);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::parse("name = 1").is_err());
        assert!(ExperimentConfig::preset("experiment9").is_err());
        let mut e = ExperimentConfig::preset("experiment1").unwrap();
        e.problem.id = "heat".into();
        assert!(e.offline_config().is_err());
        let mut e = ExperimentConfig::preset("experiment1").unwrap();
        e.offline.runs[0].dt = 0.003;
        assert!(e.offline_config().is_err());
        let mut e = ExperimentConfig::preset("experiment3").unwrap();
        e.online.as_mut().unwrap().horizon = Horizon::Exact;
        let cases = e.test_cases().unwrap();
        assert!(cases
            .iter()
            .any(|c| crate::ode::step_count(c.t_end, c.dt).is_err()));
        assert!(ExperimentConfig::from_path("/nonexistent/config.toml").is_err());
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = include_str!("../presets/experiment1.toml").replace("t_train", "t_trian");
        assert!(ExperimentConfig::parse(&text).is_err());
    }
}
