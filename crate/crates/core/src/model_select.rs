//! Shape-parameter selection by k-fold cross validation over a log-spaced grid.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::ShapeParameter;
use crate::vkoga::{train, TrainConfig, TrainingSet};

/// Default cap on centers for the inner training runs.
pub const DEFAULT_INNER_MAX_CENTERS: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_count: usize,
    pub seed: u64,
    /// Inner runs use `min(fold training size, inner_max_centers)` centers
    /// at most (and never more than `train.max_centers`).
    pub inner_max_centers: usize,
    /// Training template; its `epsilon` is replaced by each grid value.
    pub train: TrainConfig,
}

impl CvConfig {
    pub fn new(train: TrainConfig) -> Self {
        Self {
            folds: 5,
            grid_lo: 1e-4,
            grid_hi: 1e2,
            grid_count: 50,
            seed: 0,
            inner_max_centers: DEFAULT_INNER_MAX_CENTERS,
            train,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid(format!(
                "cross validation needs at least 2 folds, got {}",
                self.folds
            )));
        }
        if !(self.grid_lo > 0.0 && self.grid_lo < self.grid_hi && self.grid_hi.is_finite()) {
            return Err(Error::invalid(format!(
                "epsilon grid needs 0 < lo < hi, got [{}, {}]",
                self.grid_lo, self.grid_hi
            )));
        }
        if self.grid_count < 2 {
            return Err(Error::invalid("epsilon grid needs at least 2 values"));
        }
        if self.inner_max_centers == 0 {
            return Err(Error::invalid("inner_max_centers must be positive"));
        }
        self.train.validate()
    }
}

/// `grid_count` values equally spaced in `log10` between `grid_lo` and `grid_hi`.
pub fn epsilon_grid(cfg: &CvConfig) -> Result<Vec<ShapeParameter>> {
    cfg.validate()?;
    let (a, b) = (cfg.grid_lo.log10(), cfg.grid_hi.log10());
    let last = cfg.grid_count - 1;
    (0..cfg.grid_count)
        .map(|k| {
            let v = match k {
                0 => cfg.grid_lo,
                k if k == last => cfg.grid_hi,
                k => 10f64.powf(a + k as f64 * (b - a) / last as f64),
            };
            ShapeParameter::new(v)
        })
        .collect()
}

/// Shuffles `0..n` with a seeded generator and deals the indices round-robin
/// into `k` folds.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::invalid(format!(
            "cannot split {n} points into {k} folds"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub epsilon: f64,
    /// Mean squared held-out error; `+inf` when training failed.
    pub score: f64,
    /// Mean number of selected centers over the folds.
    pub mean_centers: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub epsilon: ShapeParameter,
    pub scores: Vec<CvScore>,
}

impl CvResult {
    pub fn best(&self) -> &CvScore {
        self.scores
            .iter()
            .find(|s| s.epsilon == self.epsilon.value())
            .expect("selected epsilon is a grid value")
    }
}

fn fold_score(
    data: &TrainingSet,
    folds: &[Vec<usize>],
    cfg: &CvConfig,
    epsilon: ShapeParameter,
) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut centers = 0.0;
    for (f, held_out) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        let train_set = data.subset(&train_idx)?;
        let cap = cfg
            .inner_max_centers
            .min(train_set.len())
            .min(cfg.train.max_centers.unwrap_or(usize::MAX));
        let inner = TrainConfig {
            epsilon,
            max_centers: Some(cap),
            ..cfg.train
        };
        let model = train(&train_set, &inner)?.expansion;
        centers += model.num_centers() as f64;
        let mut sq = 0.0;
        let mut out = vec![0.0; data.output_dim()];
        for &i in held_out {
            model.eval_into(&data.inputs()[i], &mut out)?;
            sq += out
                .iter()
                .zip(&data.targets()[i])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        let fold_mse = sq / (held_out.len() * data.output_dim()) as f64;
        if !fold_mse.is_finite() {
            return Err(Error::CrossValidation(format!(
                "non-finite held-out error at eps = {}",
                epsilon.value()
            )));
        }
        total += fold_mse;
    }
    let k = folds.len() as f64;
    Ok((total / k, centers / k))
}

/// Picks the grid value with the smallest mean held-out squared error
/// (ties go to the smaller epsilon). Grid values run concurrently.
pub fn select_epsilon(data: &TrainingSet, cfg: &CvConfig) -> Result<CvResult> {
    let grid = epsilon_grid(cfg)?;
    let folds = kfold_split(data.len(), cfg.folds, cfg.seed)?;
    let scores: Vec<CvScore> = grid
        .par_iter()
        .map(|&eps| match fold_score(data, &folds, cfg, eps) {
            Ok((score, mean_centers)) => CvScore {
                epsilon: eps.value(),
                score,
                mean_centers,
                error: None,
            },
            Err(e) => CvScore {
                epsilon: eps.value(),
                score: f64::INFINITY,
                mean_centers: 0.0,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut best: Option<&CvScore> = None;
    for s in scores.iter().filter(|s| s.score.is_finite()) {
        if best.is_none_or(|b| s.score < b.score) {
            best = Some(s);
        }
    }
    let Some(best) = best else {
        return Err(Error::CrossValidation(
            "training failed for every epsilon in the grid".into(),
        ));
    };
    Ok(CvResult {
        epsilon: ShapeParameter::new(best.epsilon)?,
        scores,
    })
}
