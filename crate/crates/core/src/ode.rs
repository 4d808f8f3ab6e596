//! Implicit Euler with a plain Newton inner solver and pluggable initial guesses.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{check_len, KernelExpansion};

/// Newton tolerance on the Euclidean residual norm.
pub const DEFAULT_NEWTON_TOLERANCE: f64 = 1e-14;
pub const DEFAULT_NEWTON_MAX_ITER: usize = 100;

/// Jacobian storage. Tridiagonal matrices get a banded solve.
#[derive(Debug, Clone, PartialEq)]
pub enum Jacobian {
    Dense(DMatrix<f64>),
    /// `lower[i]` is entry `(i + 1, i)`, `upper[i]` is entry `(i, i + 1)`.
    Tridiagonal {
        lower: Vec<f64>,
        diag: Vec<f64>,
        upper: Vec<f64>,
    },
}

impl Jacobian {
    pub fn dim(&self) -> usize {
        match self {
            Jacobian::Dense(m) => m.nrows(),
            Jacobian::Tridiagonal { diag, .. } => diag.len(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Jacobian::Dense(m) => m.clone(),
            Jacobian::Tridiagonal { lower, diag, upper } => {
                let n = diag.len();
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    m[(i, i)] = diag[i];
                    if i + 1 < n {
                        m[(i + 1, i)] = lower[i];
                        m[(i, i + 1)] = upper[i];
                    }
                }
                m
            }
        }
    }

    /// Returns `shift * I + scale * self`.
    pub fn shifted(&self, shift: f64, scale: f64) -> Jacobian {
        match self {
            Jacobian::Dense(m) => {
                let mut out = m * scale;
                for i in 0..out.nrows() {
                    out[(i, i)] += shift;
                }
                Jacobian::Dense(out)
            }
            Jacobian::Tridiagonal { lower, diag, upper } => Jacobian::Tridiagonal {
                lower: lower.iter().map(|v| v * scale).collect(),
                diag: diag.iter().map(|v| shift + v * scale).collect(),
                upper: upper.iter().map(|v| v * scale).collect(),
            },
        }
    }

    /// Solves `self * x = rhs`. `None` if the matrix is singular.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        match self {
            Jacobian::Dense(m) => {
                let b = DVector::from_column_slice(rhs);
                m.clone().lu().solve(&b).map(|x| x.as_slice().to_vec())
            }
            Jacobian::Tridiagonal { lower, diag, upper } => {
                solve_tridiagonal(lower, diag, upper, rhs)
            }
        }
    }
}

/// Gaussian elimination with partial pivoting on a tridiagonal system
/// (the LAPACK `gtsv` scheme; pivoting introduces a second superdiagonal).
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut dl = lower.to_vec();
    let mut d = diag.to_vec();
    let mut du = upper.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut b = rhs.to_vec();

    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                return None;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            dl[i] = 0.0;
        } else {
            // swap rows i and i+1
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 1 < n - 1 {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            b.swap(i, i + 1);
            b[i + 1] -= fact * b[i];
        }
    }
    if d[n - 1] == 0.0 {
        return None;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = b[n - 1] / d[n - 1];
    if n > 1 {
        x[n - 2] = (b[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (b[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// A parametric autonomous ODE `u' = f(u, mu)`, `u(0) = u0(mu)`.
pub trait IvpProblem: Send + Sync {
    /// State dimension `d`.
    fn dim(&self) -> usize;

    /// Parameter dimension `m`.
    fn param_dim(&self) -> usize;

    fn rhs(&self, u: &[f64], mu: &[f64]) -> Result<Vec<f64>>;

    /// `df/du`. Defaults to central finite differences of [`IvpProblem::rhs`].
    fn jacobian(&self, u: &[f64], mu: &[f64]) -> Result<Jacobian> {
        finite_difference_jacobian(self, u, mu)
    }

    fn initial_value(&self, mu: &[f64]) -> Result<Vec<f64>>;
}

/// Central-difference approximation of `df/du`.
pub fn finite_difference_jacobian<P: IvpProblem + ?Sized>(
    problem: &P,
    u: &[f64],
    mu: &[f64],
) -> Result<Jacobian> {
    let d = problem.dim();
    check_len("state", d, u.len())?;
    let mut jac = DMatrix::zeros(d, d);
    let mut x = u.to_vec();
    for j in 0..d {
        let h = 1e-6 * u[j].abs().max(1.0);
        x[j] = u[j] + h;
        let fp = problem.rhs(&x, mu)?;
        x[j] = u[j] - h;
        let fm = problem.rhs(&x, mu)?;
        x[j] = u[j];
        for i in 0..d {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(Jacobian::Dense(jac))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NewtonStats {
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub converged: bool,
    /// Residual at the initial guess, before any iteration.
    pub initializer_residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_NEWTON_TOLERANCE,
            max_iterations: DEFAULT_NEWTON_MAX_ITER,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if self.tolerance > 0.0 && self.tolerance.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "newton tolerance must be positive, got {}",
                self.tolerance
            )))
        }
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Plain (undamped) Newton iteration for `g(u) = 0`.
///
/// The residual is checked before the first iteration, so an initial guess
/// already within `tol` costs zero iterations.
pub fn newton_solve<G, J>(
    mut residual: G,
    mut jacobian: J,
    u_init: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, NewtonStats)>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
    J: FnMut(&[f64]) -> Result<Jacobian>,
{
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid(format!(
            "newton tolerance must be positive, got {tol}"
        )));
    }
    let mut u = u_init.to_vec();
    let mut r = residual(&u)?;
    check_len("newton residual", u.len(), r.len())?;
    let mut norm = norm2(&r);
    let mut stats = NewtonStats {
        iterations: 0,
        final_residual_norm: norm,
        converged: false,
        initializer_residual_norm: norm,
    };
    if !norm.is_finite() {
        return Err(Error::NewtonDivergence { stats });
    }
    while norm > tol {
        if stats.iterations >= max_iter {
            return Err(Error::NewtonNonConvergence { stats });
        }
        let jac = jacobian(&u)?;
        let Some(delta) = jac.solve(&r) else {
            return Err(Error::SingularJacobian { stats });
        };
        for (x, dx) in u.iter_mut().zip(&delta) {
            *x -= dx;
        }
        stats.iterations += 1;
        r = residual(&u)?;
        norm = norm2(&r);
        stats.final_residual_norm = norm;
        if !norm.is_finite() {
            return Err(Error::NewtonDivergence { stats });
        }
    }
    stats.converged = true;
    Ok((u, stats))
}

/// Predicts the next implicit Euler state from `(dt, u_prev)`.
pub trait StepPredictor: Send + Sync {
    fn state_dim(&self) -> usize;

    fn predict(&self, dt: f64, u_prev: &[f64]) -> Result<Vec<f64>>;
}

/// A raw expansion over inputs `(dt, u)`.
impl StepPredictor for KernelExpansion {
    fn state_dim(&self) -> usize {
        self.output_dim()
    }

    fn predict(&self, dt: f64, u_prev: &[f64]) -> Result<Vec<f64>> {
        check_len("surrogate input", self.input_dim(), u_prev.len() + 1)?;
        let mut x = Vec::with_capacity(u_prev.len() + 1);
        x.push(dt);
        x.extend_from_slice(u_prev);
        self.eval(&x)
    }
}

/// Initial guess strategy for the Newton solve of each step.
#[derive(Clone, Copy)]
pub enum Initializer<'a> {
    PreviousValue,
    ExplicitEuler,
    Surrogate(&'a dyn StepPredictor),
}

impl std::fmt::Debug for Initializer<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Initializer::PreviousValue => f.write_str("PreviousValue"),
            Initializer::ExplicitEuler => f.write_str("ExplicitEuler"),
            Initializer::Surrogate(p) => write!(f, "Surrogate(d = {})", p.state_dim()),
        }
    }
}

impl Initializer<'_> {
    pub fn initial_guess<P: IvpProblem + ?Sized>(
        &self,
        problem: &P,
        u_prev: &[f64],
        dt: f64,
        mu: &[f64],
    ) -> Result<Vec<f64>> {
        match self {
            Initializer::PreviousValue => Ok(u_prev.to_vec()),
            Initializer::ExplicitEuler => {
                let f = problem.rhs(u_prev, mu)?;
                Ok(u_prev.iter().zip(&f).map(|(u, f)| u + dt * f).collect())
            }
            Initializer::Surrogate(model) => {
                check_len("surrogate state", problem.dim(), model.state_dim())?;
                let guess = model.predict(dt, u_prev)?;
                if guess.iter().all(|v| v.is_finite()) {
                    Ok(guess)
                } else {
                    Err(Error::invalid("surrogate prediction is not finite"))
                }
            }
        }
    }
}

/// One implicit Euler step: solves `u - u_prev - dt f(u, mu) = 0`.
pub fn ie_step<P: IvpProblem + ?Sized>(
    problem: &P,
    u_prev: &[f64],
    dt: f64,
    mu: &[f64],
    init: Initializer<'_>,
    settings: &NewtonSettings,
) -> Result<(Vec<f64>, NewtonStats)> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!(
            "timestep must be positive, got {dt}"
        )));
    }
    check_len("state", problem.dim(), u_prev.len())?;
    check_len("parameter", problem.param_dim(), mu.len())?;
    let guess = init.initial_guess(problem, u_prev, dt, mu)?;
    newton_solve(
        |u| {
            let f = problem.rhs(u, mu)?;
            Ok(u.iter()
                .zip(u_prev)
                .zip(&f)
                .map(|((u, up), f)| u - up - dt * f)
                .collect())
        },
        |u| Ok(problem.jacobian(u, mu)?.shifted(1.0, -dt)),
        &guess,
        settings.tolerance,
        settings.max_iterations,
    )
}

/// Number of steps `T / dt`, which must be a positive integer (to 1e-9).
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0 && t_end.is_finite() && t_end > 0.0) {
        return Err(Error::invalid(format!(
            "need positive timestep and horizon, got dt = {dt}, T = {t_end}"
        )));
    }
    let ratio = t_end / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 || steps < 1.0 {
        return Err(Error::invalid(format!(
            "T / dt = {ratio} is not a positive integer"
        )));
    }
    Ok(steps as usize)
}

/// Failure of one step inside [`integrate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFailure {
    /// Index `i` of the state that could not be computed.
    pub step: usize,
    pub message: String,
    pub stats: Option<NewtonStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `stats[i]` belongs to the solve producing `states[i + 1]`.
    pub stats: Vec<NewtonStats>,
    pub wall_time_s: f64,
    /// Set when a step failed; the trajectory then ends at the last good state.
    pub failure: Option<StepFailure>,
}

impl Trajectory {
    pub fn num_steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn total_iterations(&self) -> usize {
        self.stats.iter().map(|s| s.iterations).sum()
    }

    pub fn mean_iterations(&self) -> f64 {
        if self.stats.is_empty() {
            0.0
        } else {
            self.total_iterations() as f64 / self.stats.len() as f64
        }
    }

    pub fn mean_initializer_residual(&self) -> f64 {
        if self.stats.is_empty() {
            0.0
        } else {
            self.stats
                .iter()
                .map(|s| s.initializer_residual_norm)
                .sum::<f64>()
                / self.stats.len() as f64
        }
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Converts a failed trajectory into an error.
    pub fn into_complete(self, mu: &[f64]) -> Result<Self> {
        match &self.failure {
            None => Ok(self),
            Some(f) => Err(Error::Integration {
                mu: mu.to_vec(),
                dt: self.dt,
                message: format!("step {}: {}", f.step, f.message),
            }),
        }
    }
}

/// Integrates from `u0(mu)` over `[0, T]` with `T / dt` implicit Euler steps.
///
/// Invalid arguments are errors. A failing step ends the run and is recorded
/// in [`Trajectory::failure`] alongside the states computed so far.
pub fn integrate<P: IvpProblem + ?Sized>(
    problem: &P,
    mu: &[f64],
    dt: f64,
    t_end: f64,
    init: Initializer<'_>,
    settings: &NewtonSettings,
) -> Result<Trajectory> {
    settings.validate()?;
    let steps = step_count(t_end, dt)?;
    check_len("parameter", problem.param_dim(), mu.len())?;
    let u0 = problem.initial_value(mu)?;
    check_len("initial value", problem.dim(), u0.len())?;
    if let Initializer::Surrogate(model) = init {
        check_len("surrogate state", problem.dim(), model.state_dim())?;
    }

    let start = Instant::now();
    let mut states = Vec::with_capacity(steps + 1);
    let mut stats = Vec::with_capacity(steps);
    let mut failure = None;
    states.push(u0);
    for i in 1..=steps {
        let prev = &states[i - 1];
        match ie_step(problem, prev, dt, mu, init, settings) {
            Ok((u, s)) => {
                states.push(u);
                stats.push(s);
            }
            Err(e) => {
                failure = Some(StepFailure {
                    step: i,
                    message: e.to_string(),
                    stats: e.newton_stats().copied(),
                });
                break;
            }
        }
    }
    let wall_time_s = start.elapsed().as_secs_f64();
    let times = (0..states.len()).map(|i| i as f64 * dt).collect();
    Ok(Trajectory {
        dt,
        times,
        states,
        stats,
        wall_time_s,
        failure,
    })
}
