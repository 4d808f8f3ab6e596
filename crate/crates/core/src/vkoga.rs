//! Vectorial kernel orthogonal greedy algorithm (VKOGA).
//!
//! Centers are picked one at a time from the training inputs. Each pick adds a
//! column of the Newton basis, computed as one step of a partial Cholesky
//! factorization of the kernel matrix: only the kernel column of the new center
//! is evaluated. Residuals and squared power-function values at all training
//! inputs are updated in `O(N n)` per step. Kernel-basis coefficients are
//! recovered at the end by a triangular solve against the factor.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{check_len, Gaussian, Kernel, KernelExpansion, ShapeParameter};

/// Squared power values at or below this are excluded from selection.
pub const POWER_FLOOR: f64 = 1e-14;

/// Default termination tolerance on the selection criterion.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

// Below this many training points the column update runs serially.
const PARALLEL_THRESHOLD: usize = 2048;

/// Inputs `X` in `R^p` and targets `Y` in `R^q` with pairwise distinct inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    input_dim: usize,
    output_dim: usize,
}

impl TrainingSet {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::invalid(
                "training set must contain at least one point",
            ));
        }
        check_len("training targets", inputs.len(), targets.len())?;
        let input_dim = inputs[0].len();
        let output_dim = targets[0].len();
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::invalid(
                "training points must have positive dimension",
            ));
        }
        let mut seen = HashSet::with_capacity(inputs.len());
        for (i, (x, y)) in inputs.iter().zip(&targets).enumerate() {
            check_len("training input", input_dim, x.len())?;
            check_len("training target", output_dim, y.len())?;
            if x.iter().chain(y).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("training pair {i} is not finite")));
            }
            if !seen.insert(point_key(x)) {
                return Err(Error::Degenerate(format!("training input {i} is repeated")));
            }
        }
        Ok(Self {
            inputs,
            targets,
            input_dim,
            output_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    /// Training set restricted to `indices` (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("subset must not be empty"));
        }
        let mut inputs = Vec::with_capacity(indices.len());
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!("subset index {i} out of range")));
            }
            inputs.push(self.inputs[i].clone());
            targets.push(self.targets[i].clone());
        }
        Self::new(inputs, targets)
    }
}

/// Bitwise key of a point, for exact-equality hashing.
pub(crate) fn point_key(x: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 compare equal; hash them identically
    x.iter()
        .map(|v| if *v == 0.0 { 0 } else { v.to_bits() })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum SelectionRule {
    /// Largest residual norm.
    #[default]
    #[serde(rename = "f")]
    FGreedy,
    /// Largest power function.
    #[serde(rename = "p")]
    PGreedy,
    /// Largest residual norm divided by power function.
    #[serde(rename = "fp")]
    FpGreedy,
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionRule::FGreedy => "f",
            SelectionRule::PGreedy => "p",
            SelectionRule::FpGreedy => "fp",
        })
    }
}

impl FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f" | "f-greedy" => Ok(SelectionRule::FGreedy),
            "p" | "p-greedy" => Ok(SelectionRule::PGreedy),
            "fp" | "f/p" | "f/p-greedy" => Ok(SelectionRule::FpGreedy),
            other => Err(Error::invalid(format!("unknown selection rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub tolerance: f64,
    /// `None` means no cap beyond the training-set size.
    pub max_centers: Option<usize>,
    pub rule: SelectionRule,
    pub epsilon: ShapeParameter,
}

impl TrainConfig {
    pub fn new(epsilon: ShapeParameter) -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_centers: None,
            rule: SelectionRule::default(),
            epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(Error::invalid(format!(
                "training tolerance must be nonnegative, got {}",
                self.tolerance
            )));
        }
        if self.max_centers == Some(0) {
            return Err(Error::invalid("max_centers must be positive"));
        }
        Ok(())
    }
}

/// Why the greedy loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The largest criterion value fell below the tolerance.
    Tolerance,
    /// The configured center cap was reached.
    MaxCenters,
    /// Every training point was selected.
    Exhausted,
    /// All remaining candidates have power at the numerical floor.
    PowerFloor,
}

/// Running state of the greedy loop.
///
/// `basis[j][i]` is the value of the `j`-th Newton basis function at training
/// input `i`; columns are stored contiguously.
#[derive(Debug, Clone)]
pub struct GreedyState<'a> {
    data: &'a TrainingSet,
    kernel: Gaussian,
    selected: Vec<usize>,
    is_selected: Vec<bool>,
    basis: Vec<Vec<f64>>,
    residuals: Vec<Vec<f64>>,
    power_sq: Vec<f64>,
    newton_coefficients: Vec<Vec<f64>>,
}

impl<'a> GreedyState<'a> {
    pub fn new(data: &'a TrainingSet, epsilon: ShapeParameter) -> Self {
        let kernel = Gaussian::new(epsilon);
        let power_sq = data.inputs().iter().map(|x| kernel.diagonal(x)).collect();
        Self {
            data,
            kernel,
            selected: Vec::new(),
            is_selected: vec![false; data.len()],
            basis: Vec::new(),
            residuals: data.targets().to_vec(),
            power_sq,
            newton_coefficients: Vec::new(),
        }
    }

    pub fn selected_indices(&self) -> &[usize] {
        &self.selected
    }

    pub fn num_selected(&self) -> usize {
        self.selected.len()
    }

    pub fn power_sq(&self) -> &[f64] {
        &self.power_sq
    }

    pub fn residuals(&self) -> &[Vec<f64>] {
        &self.residuals
    }

    /// Value of Newton basis function `j` at every training input.
    pub fn basis_column(&self, j: usize) -> &[f64] {
        &self.basis[j]
    }

    /// Largest squared power value over unselected inputs (0 if none remain).
    pub fn max_unselected_power_sq(&self) -> f64 {
        self.power_sq
            .iter()
            .zip(&self.is_selected)
            .filter(|(_, &s)| !s)
            .map(|(p, _)| *p)
            .fold(0.0, f64::max)
    }

    /// Selection criterion of input `i` under `rule`.
    pub fn criterion(&self, i: usize, rule: SelectionRule) -> f64 {
        let res = norm2(&self.residuals[i]);
        match rule {
            SelectionRule::FGreedy => res,
            SelectionRule::PGreedy => self.power_sq[i].max(0.0).sqrt(),
            SelectionRule::FpGreedy => res / self.power_sq[i].sqrt(),
        }
    }

    /// Best unselected candidate and its criterion value, ties to the lowest
    /// index. `None` when every candidate sits at the power floor.
    pub fn best_candidate(&self, rule: SelectionRule) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.power_sq.len() {
            if self.is_selected[i] || self.power_sq[i] <= POWER_FLOOR {
                continue;
            }
            let c = self.criterion(i, rule);
            match best {
                Some((_, b)) if c <= b => {}
                _ => best = Some((i, c)),
            }
        }
        best
    }

    /// Index of the next center under `rule`.
    pub fn select_next(&self, rule: SelectionRule) -> Option<usize> {
        self.best_candidate(rule).map(|(i, _)| i)
    }

    /// Adds training input `new_index` as the next center.
    pub fn update_basis(&mut self, new_index: usize) -> Result<()> {
        let n_pts = self.data.len();
        if new_index >= n_pts {
            return Err(Error::invalid(format!("index {new_index} out of range")));
        }
        if self.is_selected[new_index] {
            return Err(Error::invalid(format!(
                "index {new_index} already selected"
            )));
        }
        let pivot = self.power_sq[new_index];
        if pivot.is_nan() || pivot <= POWER_FLOOR {
            return Err(Error::Degenerate(format!(
                "power function at candidate {new_index} is {pivot:e}, at or below the floor"
            )));
        }
        let pivot_sqrt = pivot.sqrt();
        let inputs = self.data.inputs();
        let x_new = &inputs[new_index];
        let row_new: Vec<f64> = self.basis.iter().map(|col| col[new_index]).collect();
        let kernel = self.kernel;

        let mut column: Vec<f64> = if n_pts >= PARALLEL_THRESHOLD {
            inputs
                .par_iter()
                .map(|x| kernel.eval_unchecked(x, x_new))
                .collect()
        } else {
            inputs
                .iter()
                .map(|x| kernel.eval_unchecked(x, x_new))
                .collect()
        };
        for (col, r) in self.basis.iter().zip(&row_new) {
            for (v, c) in column.iter_mut().zip(col) {
                *v -= c * r;
            }
        }
        for v in &mut column {
            *v /= pivot_sqrt;
        }

        let coeff: Vec<f64> = self.residuals[new_index]
            .iter()
            .map(|r| r / pivot_sqrt)
            .collect();
        for ((res, p), v) in self
            .residuals
            .iter_mut()
            .zip(self.power_sq.iter_mut())
            .zip(&column)
        {
            for (r, c) in res.iter_mut().zip(&coeff) {
                *r -= v * c;
            }
            // roundoff can push tiny values below zero
            *p = (*p - v * v).max(0.0);
        }
        self.power_sq[new_index] = 0.0;
        for &s in &self.selected {
            self.power_sq[s] = 0.0;
        }

        self.basis.push(column);
        self.newton_coefficients.push(coeff);
        self.selected.push(new_index);
        self.is_selected[new_index] = true;
        Ok(())
    }

    /// Converts Newton-basis coefficients to kernel-basis coefficients and
    /// builds the expansion over the selected centers.
    #[allow(clippy::needless_range_loop)]
    pub fn to_expansion(&self) -> Result<KernelExpansion> {
        let n = self.selected.len();
        let q = self.data.output_dim();
        // lower-triangular factor: factor(k, j) = basis[j][selected[k]]
        let factor = |k: usize, j: usize| self.basis[j][self.selected[k]];
        let mut alpha = vec![vec![0.0; q]; n];
        for k in (0..n).rev() {
            let diag = factor(k, k);
            for c in 0..q {
                let mut v = self.newton_coefficients[k][c];
                for j in k + 1..n {
                    v -= factor(j, k) * alpha[j][c];
                }
                alpha[k][c] = v / diag;
            }
        }
        let centers = self
            .selected
            .iter()
            .map(|&i| self.data.inputs()[i].clone())
            .collect();
        KernelExpansion::new(
            self.kernel.epsilon,
            self.data.input_dim(),
            q,
            centers,
            alpha,
        )
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub expansion: KernelExpansion,
    pub selected_indices: Vec<usize>,
    pub stop_reason: StopReason,
    /// Largest unselected squared power value before each selection, plus the
    /// final value after the last one.
    pub max_power_trace: Vec<f64>,
    /// Winning criterion value at each selection.
    pub criterion_trace: Vec<f64>,
    /// Largest criterion value over remaining candidates at termination.
    pub final_criterion: f64,
}

/// Trains a sparse kernel surrogate on `data`.
pub fn train(data: &TrainingSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let cap = cfg.max_centers.unwrap_or(usize::MAX).min(data.len());
    let mut state = GreedyState::new(data, cfg.epsilon);
    let mut max_power_trace = Vec::new();
    let mut criterion_trace = Vec::new();

    let (stop_reason, final_criterion) = loop {
        max_power_trace.push(state.max_unselected_power_sq());
        if state.num_selected() == data.len() {
            break (StopReason::Exhausted, 0.0);
        }
        let Some((idx, crit)) = state.best_candidate(cfg.rule) else {
            break (StopReason::PowerFloor, 0.0);
        };
        if crit < cfg.tolerance {
            break (StopReason::Tolerance, crit);
        }
        if state.num_selected() >= cap {
            break (StopReason::MaxCenters, crit);
        }
        state.update_basis(idx)?;
        criterion_trace.push(crit);
    };

    if stop_reason == StopReason::PowerFloor {
        debug!(
            "greedy training stopped at the power floor with {} of {} centers (eps = {})",
            state.num_selected(),
            data.len(),
            cfg.epsilon.value()
        );
    }

    Ok(TrainOutcome {
        expansion: state.to_expansion()?,
        selected_indices: state.selected.clone(),
        stop_reason,
        max_power_trace,
        criterion_trace,
        final_criterion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::kernel_matrix;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eps(v: f64) -> ShapeParameter {
        ShapeParameter::new(v).unwrap()
    }

    fn random_set(seed: u64, n: usize, p: usize, q: usize) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = (0..n)
            .map(|_| (0..p).map(|_| rng.random::<f64>()).collect())
            .collect();
        let targets = (0..n)
            .map(|_| (0..q).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        TrainingSet::new(inputs, targets).unwrap()
    }

    fn full_config(e: f64, rule: SelectionRule, n: usize) -> TrainConfig {
        TrainConfig {
            tolerance: 0.0,
            max_centers: Some(n),
            rule,
            epsilon: eps(e),
        }
    }

    #[test]
    fn training_set_validation() {
        assert!(TrainingSet::new(vec![], vec![]).is_err());
        assert!(TrainingSet::new(vec![vec![1.0]], vec![vec![1.0], vec![2.0]]).is_err());
        assert!(matches!(
            TrainingSet::new(vec![vec![1.0], vec![1.0]], vec![vec![1.0], vec![2.0]]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            TrainingSet::new(vec![vec![0.0], vec![-0.0]], vec![vec![1.0], vec![2.0]]),
            Err(Error::Degenerate(_))
        ));
        assert!(TrainingSet::new(vec![vec![f64::NAN]], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn rule_parsing() {
        assert_eq!(
            "f".parse::<SelectionRule>().unwrap(),
            SelectionRule::FGreedy
        );
        assert_eq!(
            "P".parse::<SelectionRule>().unwrap(),
            SelectionRule::PGreedy
        );
        assert_eq!(
            "fp".parse::<SelectionRule>().unwrap(),
            SelectionRule::FpGreedy
        );
        assert!("q".parse::<SelectionRule>().is_err());
    }

    #[test]
    fn single_point_any_rule() {
        let data = TrainingSet::new(vec![vec![0.3, 0.4]], vec![vec![2.0, -1.0, 7.0]]).unwrap();
        for rule in [
            SelectionRule::FGreedy,
            SelectionRule::PGreedy,
            SelectionRule::FpGreedy,
        ] {
            let out = train(
                &data,
                &TrainConfig {
                    rule,
                    ..TrainConfig::new(eps(1.0))
                },
            )
            .unwrap();
            assert_eq!(out.selected_indices, vec![0]);
            assert_eq!(out.stop_reason, StopReason::Exhausted);
            assert_eq!(
                out.expansion.eval(&[0.3, 0.4]).unwrap(),
                vec![2.0, -1.0, 7.0]
            );
        }
    }

    #[test]
    fn f_greedy_picks_largest_residual() {
        let data =
            TrainingSet::new(vec![vec![0.0], vec![10.0]], vec![vec![3.0], vec![5.0]]).unwrap();
        let state = GreedyState::new(&data, eps(1.0));
        assert_eq!(state.select_next(SelectionRule::FGreedy), Some(1));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let data = TrainingSet::new(
            vec![vec![-1.0], vec![1.0], vec![0.0]],
            vec![vec![2.0], vec![2.0], vec![0.0]],
        )
        .unwrap();
        let state = GreedyState::new(&data, eps(1.0));
        assert_eq!(state.select_next(SelectionRule::FGreedy), Some(0));
        assert_eq!(state.select_next(SelectionRule::PGreedy), Some(0));
        assert_eq!(state.select_next(SelectionRule::FpGreedy), Some(0));
    }

    #[test]
    fn first_update_column_is_kernel_column() {
        let data = random_set(3, 8, 2, 1);
        let mut state = GreedyState::new(&data, eps(1.7));
        state.update_basis(4).unwrap();
        let k = Gaussian::new(eps(1.7));
        for (i, x) in data.inputs().iter().enumerate() {
            let expected = k.eval_unchecked(x, &data.inputs()[4]);
            assert!((state.basis_column(0)[i] - expected).abs() < 1e-15);
        }
        assert_eq!(state.power_sq()[4], 0.0);
        assert_ne!(state.select_next(SelectionRule::PGreedy), Some(4));
        assert!(state.update_basis(4).is_err());
    }

    #[test]
    fn update_rejects_floor_pivot() {
        let data =
            TrainingSet::new(vec![vec![0.0], vec![1e-9]], vec![vec![1.0], vec![1.0]]).unwrap();
        let mut state = GreedyState::new(&data, eps(1.0));
        state.update_basis(0).unwrap();
        assert!(state.power_sq()[1] <= POWER_FLOOR);
        assert!(matches!(state.update_basis(1), Err(Error::Degenerate(_))));
        assert_eq!(state.select_next(SelectionRule::FGreedy), None);
    }

    #[test]
    fn near_duplicate_stops_at_floor_without_error() {
        let data = TrainingSet::new(
            vec![vec![0.0], vec![1e-9], vec![3.0]],
            vec![vec![1.0], vec![1.5], vec![0.0]],
        )
        .unwrap();
        let out = train(&data, &full_config(1.0, SelectionRule::FGreedy, 3)).unwrap();
        assert_eq!(out.stop_reason, StopReason::PowerFloor);
        assert_eq!(out.selected_indices.len(), 2);
    }

    /// Greedy interpolant at n == N equals the dense solve A alpha = b.
    #[test]
    fn full_greedy_matches_dense_solve() {
        let data = random_set(17, 5, 2, 2);
        let e = 2.0;
        for rule in [
            SelectionRule::FGreedy,
            SelectionRule::PGreedy,
            SelectionRule::FpGreedy,
        ] {
            let out = train(&data, &full_config(e, rule, 5)).unwrap();
            assert_eq!(out.selected_indices.len(), 5);

            let a = kernel_matrix(&Gaussian::new(eps(e)), data.inputs()).unwrap();
            let b = DMatrix::from_fn(5, 2, |i, j| data.targets()[i][j]);
            let alpha = a.lu().solve(&b).unwrap();

            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let k = Gaussian::new(eps(e));
            for _ in 0..20 {
                let x: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
                let s = out.expansion.eval(&x).unwrap();
                for c in 0..2 {
                    let dense: f64 = (0..5)
                        .map(|j| alpha[(j, c)] * k.eval_unchecked(&x, &data.inputs()[j]))
                        .sum();
                    assert!(
                        (s[c] - dense).abs() <= 1e-8 * dense.abs().max(1.0),
                        "{rule}: {} vs {dense}",
                        s[c]
                    );
                }
            }
        }
    }

    #[test]
    fn invariants_along_the_run() {
        let data = random_set(23, 25, 3, 2);
        for rule in [
            SelectionRule::FGreedy,
            SelectionRule::PGreedy,
            SelectionRule::FpGreedy,
        ] {
            let mut state = GreedyState::new(&data, eps(1.5));
            let mut last_max = f64::INFINITY;
            let mut prefix: Vec<usize> = Vec::new();
            while let Some(i) = state.select_next(rule) {
                let m = state.max_unselected_power_sq();
                assert!(m <= last_max);
                last_max = m;
                state.update_basis(i).unwrap();
                assert!(state.selected_indices().starts_with(&prefix));
                prefix = state.selected_indices().to_vec();
                for (j, p) in state.power_sq().iter().enumerate() {
                    assert!(*p >= -1e-12);
                    if prefix.contains(&j) {
                        assert_eq!(*p, 0.0);
                        assert!(norm2(&state.residuals()[j]) <= 1e-10);
                    }
                }
            }
            let model = state.to_expansion().unwrap();
            for &k in state.selected_indices() {
                let s = model.eval(&data.inputs()[k]).unwrap();
                let err: f64 = s
                    .iter()
                    .zip(&data.targets()[k])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>();
                assert!(err.sqrt() <= 1e-8);
            }
        }
    }

    #[test]
    fn tolerance_stops_early_on_smooth_data() {
        let inputs: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 199.0]).collect();
        let targets = inputs.iter().map(|x| vec![(3.0 * x[0]).sin()]).collect();
        let data = TrainingSet::new(inputs, targets).unwrap();
        let cfg = TrainConfig {
            tolerance: 1e-6,
            ..TrainConfig::new(eps(3.0))
        };
        let out = train(&data, &cfg).unwrap();
        assert_eq!(out.stop_reason, StopReason::Tolerance);
        assert!(out.expansion.num_centers() < 30);
        assert!(out.final_criterion < 1e-6);

        let capped = train(
            &data,
            &TrainConfig {
                max_centers: Some(3),
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(capped.stop_reason, StopReason::MaxCenters);
        assert_eq!(capped.expansion.num_centers(), 3);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::new(eps(1.0));
        cfg.tolerance = -1.0;
        assert!(cfg.validate().is_err());
        cfg.tolerance = 1e-12;
        cfg.max_centers = Some(0);
        assert!(cfg.validate().is_err());
    }
}
