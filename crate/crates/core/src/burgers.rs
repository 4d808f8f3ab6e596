//! Inviscid Burgers equation `theta_t + (theta^2 / 2)_x = 0` on `[-r, r]`,
//! semi-discretized with cell-averaged finite volumes and the local
//! Lax-Friedrichs (Rusanov) flux. Dirichlet data `u_l`, `u_r` enter through one
//! ghost cell per side. The parameter vector is `mu = (u_l, u_r)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::check_len;
use crate::ode::{IvpProblem, Jacobian};

pub const PROBLEM_ID: &str = "burgers";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurgersParams {
    pub u_l: f64,
    pub u_r: f64,
}

impl BurgersParams {
    pub fn new(u_l: f64, u_r: f64) -> Self {
        Self { u_l, u_r }
    }

    pub fn from_slice(mu: &[f64]) -> Result<Self> {
        check_len("burgers parameters", 2, mu.len())?;
        Ok(Self::new(mu[0], mu[1]))
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.u_l, self.u_r]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurgersGrid {
    pub cells: usize,
    pub half_width: f64,
}

impl Default for BurgersGrid {
    fn default() -> Self {
        Self {
            cells: 200,
            half_width: 5.0,
        }
    }
}

impl BurgersGrid {
    pub fn new(cells: usize, half_width: f64) -> Result<Self> {
        if cells == 0 || !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid(format!(
                "invalid burgers grid: {cells} cells, half width {half_width}"
            )));
        }
        Ok(Self { cells, half_width })
    }

    /// Cell width `h = 2r / d`.
    pub fn cell_width(&self) -> f64 {
        2.0 * self.half_width / self.cells as f64
    }

    /// Center of cell `c` (1-based): `-r + (c - 1/2) h`.
    pub fn cell_center(&self, c: usize) -> f64 {
        -self.half_width + (c as f64 - 0.5) * self.cell_width()
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        (1..=self.cells).map(|c| self.cell_center(c)).collect()
    }
}

/// Rusanov flux `(a^2/2 + b^2/2)/2 - lambda/2 (b - a)`, `lambda = max(|a|, |b|)`.
#[inline]
pub fn numerical_flux(a: f64, b: f64) -> f64 {
    let lambda = a.abs().max(b.abs());
    0.25 * (a * a + b * b) - 0.5 * lambda * (b - a)
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Partial derivatives `(dF/da, dF/db)` of [`numerical_flux`].
///
/// At `|a| == |b|` the `b` branch of `lambda` is used; `sign(0) = 0`.
#[inline]
pub fn numerical_flux_derivatives(a: f64, b: f64) -> (f64, f64) {
    let lambda = a.abs().max(b.abs());
    let (dl_da, dl_db) = if a.abs() > b.abs() {
        (sign(a), 0.0)
    } else {
        (0.0, sign(b))
    };
    let jump = b - a;
    (
        0.5 * a + 0.5 * lambda - 0.5 * jump * dl_da,
        0.5 * b - 0.5 * lambda - 0.5 * jump * dl_db,
    )
}

fn interface_fluxes(u: &[f64], params: BurgersParams) -> Vec<f64> {
    // fluxes[k] sits between cells k and k+1 (0-based, ghosts at -1 and d)
    let d = u.len();
    let mut fluxes = Vec::with_capacity(d + 1);
    fluxes.push(numerical_flux(params.u_l, u[0]));
    for c in 0..d - 1 {
        fluxes.push(numerical_flux(u[c], u[c + 1]));
    }
    fluxes.push(numerical_flux(u[d - 1], params.u_r));
    fluxes
}

/// Semi-discrete right-hand side `-(F_{c+1/2} - F_{c-1/2}) / h`.
pub fn burgers_rhs(u: &[f64], params: BurgersParams, grid: &BurgersGrid) -> Result<Vec<f64>> {
    check_len("burgers state", grid.cells, u.len())?;
    let h = grid.cell_width();
    let fluxes = interface_fluxes(u, params);
    Ok(fluxes.windows(2).map(|w| -(w[1] - w[0]) / h).collect())
}

/// Boundary fluxes `(F_{1/2}, F_{d+1/2})` at state `u`.
pub fn boundary_fluxes(u: &[f64], params: BurgersParams, grid: &BurgersGrid) -> Result<(f64, f64)> {
    check_len("burgers state", grid.cells, u.len())?;
    let d = u.len();
    Ok((
        numerical_flux(params.u_l, u[0]),
        numerical_flux(u[d - 1], params.u_r),
    ))
}

/// Analytic tridiagonal Jacobian of [`burgers_rhs`].
pub fn burgers_jacobian(u: &[f64], params: BurgersParams, grid: &BurgersGrid) -> Result<Jacobian> {
    check_len("burgers state", grid.cells, u.len())?;
    let d = u.len();
    let h = grid.cell_width();
    let left = |c: usize| if c == 0 { params.u_l } else { u[c - 1] };
    let right = |c: usize| if c + 1 == d { params.u_r } else { u[c + 1] };

    let mut diag = vec![0.0; d];
    let mut lower = vec![0.0; d.saturating_sub(1)];
    let mut upper = vec![0.0; d.saturating_sub(1)];
    for c in 0..d {
        // F_{c+1/2} = F(u_c, right), F_{c-1/2} = F(left, u_c)
        let (da_out, db_out) = numerical_flux_derivatives(u[c], right(c));
        let (da_in, db_in) = numerical_flux_derivatives(left(c), u[c]);
        diag[c] = -(da_out - db_in) / h;
        if c + 1 < d {
            upper[c] = -db_out / h;
        }
        if c > 0 {
            lower[c - 1] = da_in / h;
        }
    }
    Ok(Jacobian::Tridiagonal { lower, diag, upper })
}

/// Riemann profile: `u_l` left of `x = 0`, `u_r` from `x = 0` on.
pub fn burgers_initial(params: BurgersParams, grid: &BurgersGrid) -> Vec<f64> {
    grid.cell_centers()
        .into_iter()
        .map(|x| if x < 0.0 { params.u_l } else { params.u_r })
        .collect()
}

/// The Burgers semi-discretization as a parametric IVP with `mu = (u_l, u_r)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BurgersProblem {
    pub grid: BurgersGrid,
}

impl BurgersProblem {
    pub fn new(grid: BurgersGrid) -> Self {
        Self { grid }
    }
}

impl IvpProblem for BurgersProblem {
    fn dim(&self) -> usize {
        self.grid.cells
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn rhs(&self, u: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
        burgers_rhs(u, BurgersParams::from_slice(mu)?, &self.grid)
    }

    fn jacobian(&self, u: &[f64], mu: &[f64]) -> Result<Jacobian> {
        burgers_jacobian(u, BurgersParams::from_slice(mu)?, &self.grid)
    }

    fn initial_value(&self, mu: &[f64]) -> Result<Vec<f64>> {
        Ok(burgers_initial(BurgersParams::from_slice(mu)?, &self.grid))
    }
}

/// Index of the first cell whose value drops below the midpoint
/// `(u_l + u_r) / 2`, scanning left to right.
pub fn shock_index(u: &[f64], params: BurgersParams) -> Option<usize> {
    let mid = 0.5 * (params.u_l + params.u_r);
    u.iter().position(|&v| v < mid)
}

/// Shock location estimated at the interface where the profile crosses the
/// midpoint value.
pub fn shock_position(u: &[f64], params: BurgersParams, grid: &BurgersGrid) -> Option<f64> {
    // crossing between cell k-1 and k (0-based) sits at interface -r + k h
    shock_index(u, params).map(|k| -grid.half_width + k as f64 * grid.cell_width())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{finite_difference_jacobian, integrate, Initializer, NewtonSettings};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> BurgersGrid {
        BurgersGrid::default()
    }

    #[test]
    fn grid_geometry() {
        let g = grid();
        assert_eq!(g.cell_width(), 0.05);
        assert!((g.cell_center(1) + 4.975).abs() < 1e-12);
        assert!((g.cell_center(200) - 4.975).abs() < 1e-12);
        assert!(g.cell_center(100) < 0.0 && g.cell_center(101) > 0.0);
        assert!(BurgersGrid::new(0, 5.0).is_err());
        assert!(BurgersGrid::new(10, -1.0).is_err());
    }

    #[test]
    fn riemann_initial_data() {
        let u = burgers_initial(BurgersParams::new(3.4, 0.2), &grid());
        assert_eq!(u.len(), 200);
        assert!(u[..100].iter().all(|&v| v == 3.4));
        assert!(u[100..].iter().all(|&v| v == 0.2));

        let c = burgers_initial(BurgersParams::new(1.5, 1.5), &grid());
        assert!(c.iter().all(|&v| v == 1.5));

        let two = burgers_initial(
            BurgersParams::new(3.0, 1.0),
            &BurgersGrid::new(2, 5.0).unwrap(),
        );
        assert_eq!(two, vec![3.0, 1.0]);
    }

    #[test]
    fn constant_state_is_stationary() {
        for c in [-1.3, 0.0, 2.5] {
            let u = vec![c; 200];
            let rhs = burgers_rhs(&u, BurgersParams::new(c, c), &grid()).unwrap();
            assert!(rhs.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn telescoping_conservation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = grid();
        let p = BurgersParams::new(3.4, 0.2);
        for _ in 0..10 {
            let u: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..4.0)).collect();
            let rhs = burgers_rhs(&u, p, &g).unwrap();
            let (fl, fr) = boundary_fluxes(&u, p, &g).unwrap();
            let total: f64 = g.cell_width() * rhs.iter().sum::<f64>();
            assert!((total - (fl - fr)).abs() <= 1e-12 * fl.abs().max(fr.abs()).max(1.0));
        }
    }

    #[test]
    fn dimension_checks() {
        assert!(burgers_rhs(&[1.0; 3], BurgersParams::new(1.0, 1.0), &grid()).is_err());
        assert!(BurgersProblem::default().rhs(&[1.0; 200], &[1.0]).is_err());
    }

    #[test]
    fn flux_is_consistent() {
        for v in [-2.0, 0.0, 0.7, 3.4] {
            assert_eq!(numerical_flux(v, v), 0.5 * v * v);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = grid();
        let prob = BurgersProblem::new(g);
        let mu = [3.4, 0.2];
        let u: Vec<f64> = g
            .cell_centers()
            .iter()
            .map(|x| 1.8 - 1.6 * (1.3 * x).tanh() + 0.05 * (2.0 * x).sin())
            .collect();
        let exact = prob.jacobian(&u, &mu).unwrap().to_dense();
        let fd = finite_difference_jacobian(&prob, &u, &mu)
            .unwrap()
            .to_dense();
        let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..200 {
            for j in 0..200 {
                let (a, b) = (exact[(i, j)], fd[(i, j)]);
                if i.abs_diff(j) > 1 {
                    assert_eq!(a, 0.0);
                }
                assert!((a - b).abs() <= 1e-6 * scale, "({i},{j}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn jacobian_at_constant_state_is_upwind() {
        let g = BurgersGrid::new(8, 1.0).unwrap();
        let prob = BurgersProblem::new(g);
        let c = 1.7;
        let u = vec![c; 8];
        let exact = prob.jacobian(&u, &[c, c]).unwrap().to_dense();
        let fd = finite_difference_jacobian(&prob, &u, &[c, c])
            .unwrap()
            .to_dense();
        let h = g.cell_width();
        for i in 0..8 {
            for j in 0..8 {
                let upwind = if i == j {
                    -c / h
                } else if j + 1 == i {
                    c / h
                } else {
                    0.0
                };
                assert!((exact[(i, j)] - upwind).abs() <= 1e-12 * c / h);
                assert!((fd[(i, j)] - upwind).abs() <= 1e-6 * c / h);
            }
        }
    }

    #[test]
    fn constant_state_implicit_euler_is_fixed() {
        let prob = BurgersProblem::default();
        let c = 2.0;
        let mu = [c, c];
        let traj = integrate(
            &prob,
            &mu,
            0.01,
            0.5,
            Initializer::PreviousValue,
            &NewtonSettings::default(),
        )
        .unwrap();
        for s in &traj.states {
            assert!(s.iter().all(|v| (v - c).abs() <= 1e-12));
        }
    }

    #[test]
    fn shock_locator() {
        let g = grid();
        let p = BurgersParams::new(3.4, 0.2);
        let u = burgers_initial(p, &g);
        assert_eq!(shock_index(&u, p), Some(100));
        assert!(shock_position(&u, p, &g).unwrap().abs() < 1e-12);
    }
}
