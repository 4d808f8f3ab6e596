//! Offline training and online use of the one-step surrogate.
//!
//! Offline: integrate the problem for every `(mu_j, dt_j)` with the
//! previous-value initializer, collect input/target pairs `((dt_j, u_i), u_{i+1})`,
//! select the shape parameter (cross validation or fixed) and train the
//! greedy kernel model. Online: integrate a new parameter with the surrogate
//! prediction as the Newton starting point at every step.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::burgers::{self, BurgersGrid, BurgersProblem};
use crate::error::{Error, Result};
use crate::kernel::{check_len, KernelExpansion, ShapeParameter};
use crate::model_select::{select_epsilon, CvConfig, CvResult, CvScore};
use crate::ode::{self, Initializer, IvpProblem, NewtonSettings, StepPredictor, Trajectory};
use crate::vkoga::{point_key, train, SelectionRule, StopReason, TrainConfig, TrainingSet};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Named problem with its discretization settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum ProblemSpec {
    Burgers(BurgersGrid),
    /// Externally supplied data with no built-in problem attached.
    Custom {
        state_dim: usize,
    },
}

impl ProblemSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ProblemSpec::Burgers(_) => burgers::PROBLEM_ID,
            ProblemSpec::Custom { .. } => "custom",
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            ProblemSpec::Burgers(g) => g.cells,
            ProblemSpec::Custom { state_dim } => *state_dim,
        }
    }

    pub fn build(&self) -> Result<Box<dyn IvpProblem>> {
        match self {
            ProblemSpec::Burgers(g) => {
                let g = BurgersGrid::new(g.cells, g.half_width)?;
                Ok(Box::new(BurgersProblem::new(g)))
            }
            ProblemSpec::Custom { .. } => Err(Error::invalid(
                "custom problems have no built-in right-hand side",
            )),
        }
    }

    pub fn initial_condition(&self) -> &'static str {
        match self {
            ProblemSpec::Burgers(_) => "riemann step at x = 0 (u_l left, u_r right)",
            ProblemSpec::Custom { .. } => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub mu: Vec<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineConfig {
    pub problem: ProblemSpec,
    pub runs: Vec<TrainingRun>,
    pub t_train: f64,
    /// Greedy settings. With cross validation, `epsilon` is replaced by the
    /// selected value.
    pub train: TrainConfig,
    /// The `train` template inside is replaced by [`OfflineConfig::train`].
    pub cross_validation: Option<CvConfig>,
    pub normalize: bool,
    pub newton: NewtonSettings,
}

impl OfflineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs.is_empty() {
            return Err(Error::invalid(
                "offline phase needs at least one training run",
            ));
        }
        for run in &self.runs {
            ode::step_count(self.t_train, run.dt)?;
        }
        self.train.validate()?;
        self.newton.validate()?;
        if let Some(cv) = &self.cross_validation {
            CvConfig {
                train: self.train,
                ..cv.clone()
            }
            .validate()?;
        }
        Ok(())
    }
}

/// Per-dimension affine input map `x -> (x - offset) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub offsets: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Normalization {
    pub fn new(offsets: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        check_len("normalization scales", offsets.len(), scales.len())?;
        if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("normalization scales must be positive"));
        }
        if offsets.iter().any(|o| !o.is_finite()) {
            return Err(Error::invalid("normalization offsets must be finite"));
        }
        Ok(Self { offsets, scales })
    }

    /// Min-max map of `points` onto `[0, 1]` per dimension; constant
    /// dimensions get scale 1.
    pub fn min_max(points: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::invalid("cannot normalize an empty point set"));
        };
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in points {
            for ((l, h), v) in lo.iter_mut().zip(hi.iter_mut()).zip(p) {
                *l = l.min(*v);
                *h = h.max(*v);
            }
        }
        let scales = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| if h > l { h - l } else { 1.0 })
            .collect();
        Self::new(lo, scales)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.offsets)
            .zip(&self.scales)
            .map(|((v, o), s)| (v - o) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub problem: ProblemSpec,
    pub initial_condition: String,
    pub training_runs: Vec<TrainingRun>,
    pub t_train: f64,
    pub rule: SelectionRule,
    pub tolerance: f64,
    pub max_centers: Option<usize>,
    pub epsilon: f64,
    pub epsilon_source: String,
    pub training_points: usize,
    pub training_points_before_dedup: usize,
    pub selected_centers: usize,
    pub stop_reason: StopReason,
    pub cv_scores: Option<Vec<CvScore>>,
}

/// The trained one-step map `(dt, u) -> u_next`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub expansion: KernelExpansion,
    pub normalization: Option<Normalization>,
    pub provenance: Provenance,
}

impl SurrogateModel {
    pub fn new(
        expansion: KernelExpansion,
        normalization: Option<Normalization>,
        provenance: Provenance,
    ) -> Result<Self> {
        if expansion.input_dim() != expansion.output_dim() + 1 {
            return Err(Error::DimensionMismatch {
                context: "surrogate input (dt, u)",
                expected: expansion.output_dim() + 1,
                got: expansion.input_dim(),
            });
        }
        if let Some(n) = &normalization {
            check_len("normalization", expansion.input_dim(), n.offsets.len())?;
        }
        Ok(Self {
            expansion,
            normalization,
            provenance,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.expansion.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.expansion.output_dim()
    }

    /// Evaluates on a raw `(dt, u)` input.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.normalization {
            Some(n) => {
                check_len("surrogate input", self.input_dim(), x.len())?;
                self.expansion.eval(&n.apply(x))
            }
            None => self.expansion.eval(x),
        }
    }

    /// Whether `dt` is one of the training timesteps.
    pub fn trained_on_dt(&self, dt: f64) -> bool {
        self.provenance
            .training_runs
            .iter()
            .any(|r| (r.dt - dt).abs() <= 1e-12 * dt.abs())
    }
}

impl StepPredictor for SurrogateModel {
    fn state_dim(&self) -> usize {
        self.output_dim()
    }

    fn predict(&self, dt: f64, u_prev: &[f64]) -> Result<Vec<f64>> {
        check_len("surrogate state", self.output_dim(), u_prev.len())?;
        let mut x = Vec::with_capacity(u_prev.len() + 1);
        x.push(dt);
        x.extend_from_slice(u_prev);
        self.eval(&x)
    }
}

/// Training pairs and the pair count before duplicate removal.
#[derive(Debug, Clone)]
pub struct AssembledData {
    pub data: TrainingSet,
    pub count_before_dedup: usize,
}

/// Builds `((dt_j, u_i), u_{i+1})` pairs from complete trajectories, keeping
/// the first occurrence of repeated inputs.
pub fn assemble_training_set(trajectories: &[Trajectory]) -> Result<AssembledData> {
    if trajectories.is_empty() {
        return Err(Error::invalid("no trajectories to assemble"));
    }
    let mut inputs: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<Vec<f64>> = Vec::new();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut count = 0;
    for (j, traj) in trajectories.iter().enumerate() {
        if traj.num_steps() == 0 {
            return Err(Error::invalid(format!("trajectory {j} has no steps")));
        }
        if let Some(f) = &traj.failure {
            return Err(Error::invalid(format!(
                "trajectory {j} is incomplete (step {}: {})",
                f.step, f.message
            )));
        }
        for w in traj.states.windows(2) {
            count += 1;
            let mut x = Vec::with_capacity(w[0].len() + 1);
            x.push(traj.dt);
            x.extend_from_slice(&w[0]);
            let key = point_key(&x);
            if let Some(&k) = index.get(&key) {
                let diff = targets[k]
                    .iter()
                    .zip(&w[1])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if diff > 1e-10 {
                    return Err(Error::InconsistentData(format!(
                        "trajectory {j}: repeated input maps to targets {diff:e} apart"
                    )));
                }
                continue;
            }
            index.insert(key, inputs.len());
            inputs.push(x);
            targets.push(w[1].clone());
        }
    }
    Ok(AssembledData {
        data: TrainingSet::new(inputs, targets)?,
        count_before_dedup: count,
    })
}

/// Integrates every training run over `[0, t_train]` with the previous-value
/// initializer. Runs execute concurrently.
pub fn training_trajectories(cfg: &OfflineConfig) -> Result<Vec<Trajectory>> {
    let problem = cfg.problem.build()?;
    cfg.runs
        .par_iter()
        .map(|run| {
            ode::integrate(
                problem.as_ref(),
                &run.mu,
                run.dt,
                cfg.t_train,
                Initializer::PreviousValue,
                &cfg.newton,
            )
            .and_then(|t| t.into_complete(&run.mu))
            .map_err(|e| match e {
                e @ Error::Integration { .. } => e,
                other => Error::Integration {
                    mu: run.mu.clone(),
                    dt: run.dt,
                    message: other.to_string(),
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct OfflineOutcome {
    pub model: SurrogateModel,
    pub cv: Option<CvResult>,
}

/// Offline phase: trajectories, training set, shape parameter, greedy model.
pub fn offline(cfg: &OfflineConfig) -> Result<OfflineOutcome> {
    cfg.validate()?;
    let trajectories = training_trajectories(cfg)?;
    let assembled = assemble_training_set(&trajectories)?;
    train_surrogate(cfg, assembled)
}

/// Trains on an already assembled training set.
pub fn train_surrogate(cfg: &OfflineConfig, assembled: AssembledData) -> Result<OfflineOutcome> {
    let AssembledData {
        data,
        count_before_dedup,
    } = assembled;
    check_len(
        "training inputs (dt, u)",
        cfg.problem.state_dim() + 1,
        data.input_dim(),
    )?;
    let normalization = if cfg.normalize {
        Some(Normalization::min_max(data.inputs())?)
    } else {
        None
    };
    let data = match &normalization {
        Some(n) => TrainingSet::new(
            data.inputs().iter().map(|x| n.apply(x)).collect(),
            data.targets().to_vec(),
        )?,
        None => data,
    };
    info!(
        "training set: {} pairs ({} before dedup)",
        data.len(),
        count_before_dedup
    );

    let (epsilon, cv, epsilon_source) = match &cfg.cross_validation {
        Some(cv_cfg) => {
            let cv_cfg = CvConfig {
                train: cfg.train,
                ..cv_cfg.clone()
            };
            let res = select_epsilon(&data, &cv_cfg)?;
            info!("cross validation selected eps = {}", res.epsilon.value());
            let source = format!(
                "{}-fold cross validation over {} log-spaced values in [{}, {}]",
                cv_cfg.folds, cv_cfg.grid_count, cv_cfg.grid_lo, cv_cfg.grid_hi
            );
            (res.epsilon, Some(res), source)
        }
        None => (cfg.train.epsilon, None, "fixed".to_string()),
    };

    let train_cfg = TrainConfig {
        epsilon,
        ..cfg.train
    };
    let outcome = train(&data, &train_cfg)?;
    info!(
        "selected {} of {} centers ({:?})",
        outcome.expansion.num_centers(),
        data.len(),
        outcome.stop_reason
    );
    let provenance = Provenance {
        problem: cfg.problem,
        initial_condition: cfg.problem.initial_condition().to_string(),
        training_runs: cfg.runs.clone(),
        t_train: cfg.t_train,
        rule: cfg.train.rule,
        tolerance: cfg.train.tolerance,
        max_centers: cfg.train.max_centers,
        epsilon: epsilon.value(),
        epsilon_source,
        training_points: data.len(),
        training_points_before_dedup: count_before_dedup,
        selected_centers: outcome.expansion.num_centers(),
        stop_reason: outcome.stop_reason,
        cv_scores: cv.as_ref().map(|c| c.scores.clone()),
    };
    Ok(OfflineOutcome {
        model: SurrogateModel::new(outcome.expansion, normalization, provenance)?,
        cv,
    })
}

/// Statistics of one integration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mu: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
    pub mean_iterations: f64,
    pub total_iterations: usize,
    pub per_step_iterations: Vec<usize>,
    pub mean_initializer_residual: f64,
    pub wall_time_s: f64,
    /// `dt` is not among the model's training timesteps.
    pub dt_outside_training: bool,
    pub failure: Option<String>,
}

impl RunReport {
    fn from_trajectory(
        traj: &Trajectory,
        mu: &[f64],
        t_end: f64,
        dt_outside_training: bool,
    ) -> Self {
        Self {
            mu: mu.to_vec(),
            dt: traj.dt,
            t_end,
            steps: traj.stats.len(),
            mean_iterations: traj.mean_iterations(),
            total_iterations: traj.total_iterations(),
            per_step_iterations: traj.stats.iter().map(|s| s.iterations).collect(),
            mean_initializer_residual: traj.mean_initializer_residual(),
            wall_time_s: traj.wall_time_s,
            dt_outside_training,
            failure: traj
                .failure
                .as_ref()
                .map(|f| format!("step {}: {}", f.step, f.message)),
        }
    }
}

fn model_problem(model: &SurrogateModel) -> Result<Box<dyn IvpProblem>> {
    let problem = model.provenance.problem.build()?;
    check_len(
        "surrogate input (dt, u)",
        problem.dim() + 1,
        model.input_dim(),
    )?;
    check_len("surrogate output", problem.dim(), model.output_dim())?;
    Ok(problem)
}

/// Online phase: integrates `mu` with surrogate-initialized Newton solves.
///
/// A failing step does not return an error; the report carries the failure
/// and the trajectory ends at the last computed state.
pub fn online(
    model: &SurrogateModel,
    mu: &[f64],
    dt: f64,
    t_end: f64,
    newton: &NewtonSettings,
) -> Result<(Trajectory, RunReport)> {
    let problem = model_problem(model)?;
    let outside = !model.trained_on_dt(dt);
    if outside {
        warn!("dt = {dt} is not a training timestep of this model");
    }
    let traj = ode::integrate(
        problem.as_ref(),
        mu,
        dt,
        t_end,
        Initializer::Surrogate(model),
        newton,
    )?;
    let report = RunReport::from_trajectory(&traj, mu, t_end, outside);
    Ok((traj, report))
}

/// Same as [`online`] with the previous-value initializer.
pub fn baseline(
    problem: &dyn IvpProblem,
    mu: &[f64],
    dt: f64,
    t_end: f64,
    newton: &NewtonSettings,
) -> Result<(Trajectory, RunReport)> {
    let traj = ode::integrate(problem, mu, dt, t_end, Initializer::PreviousValue, newton)?;
    let report = RunReport::from_trajectory(&traj, mu, t_end, false);
    Ok((traj, report))
}

/// One test point of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub mu: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub mu: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub iter_old: f64,
    pub iter_vkoga: f64,
    pub time_old_s: f64,
    pub time_vkoga_s: f64,
    pub gain_iter_pct: f64,
    pub gain_time_pct: f64,
    pub init_residual_old: f64,
    pub init_residual_vkoga: f64,
    /// Max-norm distance between the two trajectories.
    pub max_state_diff: f64,
    pub dt_outside_training: bool,
    pub error: Option<String>,
}

impl ComparisonRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub iter_old: f64,
    pub iter_vkoga: f64,
    pub time_old_s: f64,
    pub time_vkoga_s: f64,
    pub gain_iter_pct: f64,
    pub gain_time_pct: f64,
    /// Row realizing this extremum (min/max rows only).
    pub row: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub mean: SummaryRow,
    pub min: SummaryRow,
    pub max: SummaryRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub summary: Option<ComparisonSummary>,
    pub repetitions: usize,
}

/// Percentage reduction from `old` to `new`.
pub fn gain_pct(old: f64, new: f64) -> f64 {
    if old == 0.0 {
        if new == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        (old - new) / old * 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompareOptions {
    pub repetitions: usize,
    /// Run test cases concurrently. Timings are then less reliable.
    pub parallel: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            repetitions: 1,
            parallel: false,
        }
    }
}

fn compare_case(
    model: &SurrogateModel,
    problem: &dyn IvpProblem,
    case: &TestCase,
    repetitions: usize,
    newton: &NewtonSettings,
) -> ComparisonRow {
    let outside = !model.trained_on_dt(case.dt);
    let mut row = ComparisonRow {
        mu: case.mu.clone(),
        dt: case.dt,
        t_end: case.t_end,
        iter_old: f64::NAN,
        iter_vkoga: f64::NAN,
        time_old_s: f64::NAN,
        time_vkoga_s: f64::NAN,
        gain_iter_pct: f64::NAN,
        gain_time_pct: f64::NAN,
        init_residual_old: f64::NAN,
        init_residual_vkoga: f64::NAN,
        max_state_diff: f64::NAN,
        dt_outside_training: outside,
        error: None,
    };
    let run = |init: Initializer<'_>| -> Result<(Trajectory, f64)> {
        let mut first = None;
        let mut time = 0.0;
        for _ in 0..repetitions {
            let t = ode::integrate(problem, &case.mu, case.dt, case.t_end, init, newton)?
                .into_complete(&case.mu)?;
            time += t.wall_time_s;
            first.get_or_insert(t);
        }
        Ok((first.expect("repetitions >= 1"), time / repetitions as f64))
    };
    let result = run(Initializer::PreviousValue)
        .and_then(|old| run(Initializer::Surrogate(model)).map(|new| (old, new)));
    match result {
        Ok(((old, t_old), (new, t_new))) => {
            row.iter_old = old.mean_iterations();
            row.iter_vkoga = new.mean_iterations();
            row.time_old_s = t_old;
            row.time_vkoga_s = t_new;
            row.gain_iter_pct = gain_pct(row.iter_old, row.iter_vkoga);
            row.gain_time_pct = gain_pct(t_old, t_new);
            row.init_residual_old = old.mean_initializer_residual();
            row.init_residual_vkoga = new.mean_initializer_residual();
            row.max_state_diff = old
                .states
                .iter()
                .zip(&new.states)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
        }
        Err(e) => {
            warn!(
                "comparison run failed for mu = {:?}, dt = {}: {e}",
                case.mu, case.dt
            );
            row.error = Some(e.to_string());
        }
    }
    row
}

fn summarize(rows: &[ComparisonRow]) -> Option<ComparisonSummary> {
    let good: Vec<(usize, &ComparisonRow)> =
        rows.iter().enumerate().filter(|(_, r)| r.ok()).collect();
    if good.is_empty() {
        return None;
    }
    let n = good.len() as f64;
    let mean = |f: fn(&ComparisonRow) -> f64| good.iter().map(|(_, r)| f(r)).sum::<f64>() / n;
    let as_row = |i: usize| {
        let r = &rows[i];
        SummaryRow {
            iter_old: r.iter_old,
            iter_vkoga: r.iter_vkoga,
            time_old_s: r.time_old_s,
            time_vkoga_s: r.time_vkoga_s,
            gain_iter_pct: r.gain_iter_pct,
            gain_time_pct: r.gain_time_pct,
            row: Some(i),
        }
    };
    // extrema by iteration gain; ties keep the first row
    let mut min_i = good[0].0;
    let mut max_i = good[0].0;
    for &(i, r) in &good {
        if r.gain_iter_pct < rows[min_i].gain_iter_pct {
            min_i = i;
        }
        if r.gain_iter_pct > rows[max_i].gain_iter_pct {
            max_i = i;
        }
    }
    Some(ComparisonSummary {
        mean: SummaryRow {
            iter_old: mean(|r| r.iter_old),
            iter_vkoga: mean(|r| r.iter_vkoga),
            time_old_s: mean(|r| r.time_old_s),
            time_vkoga_s: mean(|r| r.time_vkoga_s),
            gain_iter_pct: mean(|r| r.gain_iter_pct),
            gain_time_pct: mean(|r| r.gain_time_pct),
            row: None,
        },
        min: as_row(min_i),
        max: as_row(max_i),
    })
}

/// Runs previous-value and surrogate initialization on every test case.
pub fn compare(
    model: &SurrogateModel,
    cases: &[TestCase],
    options: CompareOptions,
    newton: &NewtonSettings,
) -> Result<ComparisonReport> {
    if options.repetitions == 0 {
        return Err(Error::invalid("repetitions must be at least 1"));
    }
    let problem = model_problem(model)?;
    for case in cases {
        check_len("test parameter", problem.param_dim(), case.mu.len())?;
        ode::step_count(case.t_end, case.dt)?;
    }
    let problem = problem.as_ref();
    let rows: Vec<ComparisonRow> = if options.parallel {
        cases
            .par_iter()
            .map(|c| compare_case(model, problem, c, options.repetitions, newton))
            .collect()
    } else {
        cases
            .iter()
            .map(|c| compare_case(model, problem, c, options.repetitions, newton))
            .collect()
    };
    Ok(ComparisonReport {
        summary: summarize(&rows),
        rows,
        repetitions: options.repetitions,
    })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    problem_id: String,
    input_dim: usize,
    output_dim: usize,
    epsilon: f64,
    normalization: Option<Normalization>,
    centers: Vec<Vec<f64>>,
    coefficients: Vec<Vec<f64>>,
    provenance: Provenance,
}

/// Serializes a model to the versioned JSON format.
pub fn model_to_json(model: &SurrogateModel) -> Result<String> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        problem_id: model.provenance.problem.id().to_string(),
        input_dim: model.input_dim(),
        output_dim: model.output_dim(),
        epsilon: model.expansion.epsilon().value(),
        normalization: model.normalization.clone(),
        centers: model.expansion.centers().to_vec(),
        coefficients: model.expansion.coefficients().to_vec(),
        provenance: model.provenance.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn model_from_json(text: &str) -> Result<SurrogateModel> {
    let file: ModelFile = serde_json::from_str(text)
        .map_err(|e| Error::ModelFormat(format!("malformed model file: {e}")))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {} (expected {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }
    if file.problem_id != file.provenance.problem.id() {
        return Err(Error::ModelFormat(format!(
            "problem id '{}' disagrees with provenance '{}'",
            file.problem_id,
            file.provenance.problem.id()
        )));
    }
    let expansion = KernelExpansion::new(
        ShapeParameter::new(file.epsilon)?,
        file.input_dim,
        file.output_dim,
        file.centers,
        file.coefficients,
    )
    .map_err(|e| Error::ModelFormat(format!("inconsistent model data: {e}")))?;
    let normalization = file
        .normalization
        .map(|n| Normalization::new(n.offsets, n.scales))
        .transpose()
        .map_err(|e| Error::ModelFormat(format!("invalid normalization: {e}")))?;
    SurrogateModel::new(expansion, normalization, file.provenance)
        .map_err(|e| Error::ModelFormat(format!("inconsistent model data: {e}")))
}

pub fn save_model(model: &SurrogateModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SurrogateModel> {
    model_from_json(&fs::read_to_string(path)?)
}
