//! Gaussian kernel, kernel matrices and vector-valued kernel expansions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian shape parameter `eps` (an inverse length scale), always positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ShapeParameter(f64);

impl ShapeParameter {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon.is_finite() && epsilon > 0.0 {
            Ok(Self(epsilon))
        } else {
            Err(Error::invalid(format!(
                "shape parameter must be positive and finite, got {epsilon}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ShapeParameter {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ShapeParameter> for f64 {
    fn from(eps: ShapeParameter) -> f64 {
        eps.0
    }
}

/// A symmetric, strictly positive definite kernel.
pub trait Kernel: Send + Sync {
    /// Evaluates the kernel on two points of equal length. Lengths are not checked.
    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64;

    /// Value on the diagonal, `K(x, x)`.
    fn diagonal(&self, x: &[f64]) -> f64 {
        self.eval_unchecked(x, x)
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_len("kernel arguments", x.len(), y.len())?;
        Ok(self.eval_unchecked(x, y))
    }
}

/// `K(x, y) = exp(-eps^2 |x - y|^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub epsilon: ShapeParameter,
}

impl Gaussian {
    pub fn new(epsilon: ShapeParameter) -> Self {
        Self { epsilon }
    }
}

impl Kernel for Gaussian {
    #[inline]
    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let eps = self.epsilon.value();
        (-eps * eps * squared_distance(x, y)).exp()
    }

    #[inline]
    fn diagonal(&self, _x: &[f64]) -> f64 {
        1.0
    }
}

#[inline]
pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}

/// Gaussian kernel value for two points of equal length.
pub fn gaussian_eval(x: &[f64], y: &[f64], eps: ShapeParameter) -> Result<f64> {
    Gaussian::new(eps).eval(x, y)
}

/// Assembles the Gram matrix `A[i][j] = K(x_i, x_j)`.
///
/// Points must share one length and be pairwise distinct (exact coordinate
/// equality); a repeated point makes the matrix singular.
pub fn kernel_matrix<K: Kernel>(kernel: &K, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = points.len();
    if let Some(first) = points.first() {
        for p in points {
            check_len("kernel matrix points", first.len(), p.len())?;
        }
    }
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = kernel.diagonal(&points[i]);
        for j in 0..i {
            if points[i] == points[j] {
                return Err(Error::Degenerate(format!(
                    "points {j} and {i} coincide; kernel matrix would be singular"
                )));
            }
            let v = kernel.eval_unchecked(&points[i], &points[j]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(a)
}

/// Sparse kernel surrogate `s(x) = sum_j alpha_j K(x, c_j)` with vector
/// coefficients `alpha_j` in `R^q` and centers `c_j` in `R^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelExpansion {
    epsilon: ShapeParameter,
    input_dim: usize,
    output_dim: usize,
    centers: Vec<Vec<f64>>,
    coefficients: Vec<Vec<f64>>,
}

impl KernelExpansion {
    pub fn new(
        epsilon: ShapeParameter,
        input_dim: usize,
        output_dim: usize,
        centers: Vec<Vec<f64>>,
        coefficients: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::invalid("expansion dimensions must be positive"));
        }
        check_len("expansion coefficients", centers.len(), coefficients.len())?;
        for c in &centers {
            check_len("expansion center", input_dim, c.len())?;
        }
        for a in &coefficients {
            check_len("expansion coefficient", output_dim, a.len())?;
        }
        for (i, c) in centers.iter().enumerate() {
            if centers[..i].contains(c) {
                return Err(Error::Degenerate(format!("center {i} is repeated")));
            }
        }
        Ok(Self {
            epsilon,
            input_dim,
            output_dim,
            centers,
            coefficients,
        })
    }

    /// The zero function (no centers).
    pub fn empty(epsilon: ShapeParameter, input_dim: usize, output_dim: usize) -> Result<Self> {
        Self::new(epsilon, input_dim, output_dim, Vec::new(), Vec::new())
    }

    pub fn epsilon(&self) -> ShapeParameter {
        self.epsilon
    }

    pub fn kernel(&self) -> Gaussian {
        Gaussian::new(self.epsilon)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn num_centers(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    /// Evaluates the expansion at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.output_dim];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    /// Evaluates into a caller-provided buffer of length `output_dim`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("expansion input", self.input_dim, x.len())?;
        check_len("expansion output", self.output_dim, out.len())?;
        out.fill(0.0);
        let kernel = self.kernel();
        for (center, coeff) in self.centers.iter().zip(&self.coefficients) {
            let k = kernel.eval_unchecked(x, center);
            for (o, a) in out.iter_mut().zip(coeff) {
                *o += a * k;
            }
        }
        Ok(())
    }
}

/// Evaluates `model` at `x`.
pub fn expansion_eval(model: &KernelExpansion, x: &[f64]) -> Result<Vec<f64>> {
    model.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eps(v: f64) -> ShapeParameter {
        ShapeParameter::new(v).unwrap()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..p).map(|_| rng.random::<f64>()).collect())
            .collect()
    }

    #[test]
    fn shape_parameter_rejects_nonpositive() {
        assert!(ShapeParameter::new(0.0).is_err());
        assert!(ShapeParameter::new(-1.0).is_err());
        assert!(ShapeParameter::new(f64::NAN).is_err());
        assert!(serde_json::from_str::<ShapeParameter>("-2.0").is_err());
    }

    #[test]
    fn gaussian_values() {
        assert_eq!(
            gaussian_eval(&[0.3, -1.0], &[0.3, -1.0], eps(1.0)).unwrap(),
            1.0
        );
        assert_relative_eq!(
            gaussian_eval(&[0.0], &[1.0], eps(1.0)).unwrap(),
            0.367_879_441_171_442_3,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            gaussian_eval(&[0.0, 0.0], &[1.0, 1.0], eps(0.5)).unwrap(),
            (-0.5f64).exp(),
            max_relative = 1e-15
        );
        assert!(matches!(
            gaussian_eval(&[0.0], &[1.0, 2.0], eps(1.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn small_kernel_matrices() {
        let k = Gaussian::new(eps(1.0));
        let a = kernel_matrix(&k, &[vec![2.0]]).unwrap();
        assert_eq!(a, DMatrix::from_element(1, 1, 1.0));

        let a = kernel_matrix(&k, &[vec![0.0], vec![1.0]]).unwrap();
        let e = (-1.0f64).exp();
        assert_eq!(a[(0, 0)], 1.0);
        assert_eq!(a[(1, 1)], 1.0);
        assert_relative_eq!(a[(0, 1)], e, max_relative = 1e-15);
        assert_eq!(a[(0, 1)], a[(1, 0)]);
    }

    #[test]
    fn duplicate_points_are_degenerate() {
        let k = Gaussian::new(eps(1.0));
        let err = kernel_matrix(&k, &[vec![0.0, 1.0], vec![0.5, 0.5], vec![0.0, 1.0]]);
        assert!(matches!(err, Err(Error::Degenerate(_))));
    }

    #[test]
    fn random_kernel_matrices_are_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = 10;
            let p = 1 + trial % 4;
            let pts = random_points(&mut rng, n, p);
            let a = kernel_matrix(&Gaussian::new(eps(2.0)), &pts).unwrap();
            let eig = a.clone().symmetric_eigen();
            let min = eig
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(min > 0.0, "trial {trial}: min eigenvalue {min}");
            assert!(a.cholesky().is_some());
        }
    }

    #[test]
    fn expansion_edge_cases() {
        let e = KernelExpansion::empty(eps(1.0), 3, 2).unwrap();
        assert_eq!(e.eval(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
        assert!(e.eval(&[1.0]).is_err());

        let c = vec![0.1, 0.2];
        let v = vec![4.0, -5.0, 6.0];
        let single =
            KernelExpansion::new(eps(3.0), 2, 3, vec![c.clone()], vec![v.clone()]).unwrap();
        assert_eq!(single.eval(&c).unwrap(), v);

        assert!(KernelExpansion::new(
            eps(1.0),
            1,
            1,
            vec![vec![0.0], vec![0.0]],
            vec![vec![1.0], vec![2.0]]
        )
        .is_err());
        assert!(KernelExpansion::new(eps(1.0), 1, 1, vec![vec![0.0]], vec![]).is_err());
    }

    #[test]
    fn two_center_interpolant_from_dense_solve() {
        let pts = vec![vec![0.0, 0.5], vec![0.7, -0.2]];
        let targets = [[1.5, -2.0], [0.25, 3.0]];
        let k = Gaussian::new(eps(1.3));
        let a = kernel_matrix(&k, &pts).unwrap();
        let b = DMatrix::from_row_slice(2, 2, &[1.5, -2.0, 0.25, 3.0]);
        let alpha = a.lu().solve(&b).unwrap();
        let coeffs = (0..2)
            .map(|i| alpha.row(i).iter().cloned().collect())
            .collect();
        let model = KernelExpansion::new(eps(1.3), 2, 2, pts.clone(), coeffs).unwrap();
        for (x, y) in pts.iter().zip(targets) {
            let s = model.eval(x).unwrap();
            assert!((s[0] - y[0]).abs() < 1e-12 && (s[1] - y[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_interpolant_reproduces_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = random_points(&mut rng, 12, 3);
        let k = Gaussian::new(eps(2.5));
        let a = kernel_matrix(&k, &pts).unwrap();
        let b = DMatrix::from_fn(12, 2, |_, _| rng.random_range(-1.0..1.0));
        let alpha = a.lu().solve(&b).unwrap();
        let coeffs = (0..12)
            .map(|i| alpha.row(i).iter().cloned().collect())
            .collect();
        let model = KernelExpansion::new(eps(2.5), 3, 2, pts.clone(), coeffs).unwrap();
        for (i, x) in pts.iter().enumerate() {
            let s = model.eval(x).unwrap();
            for j in 0..2 {
                assert!((s[j] - b[(i, j)]).abs() <= 1e-10 * b[(i, j)].abs().max(1.0));
            }
        }
    }

    proptest! {
        #[test]
        fn gaussian_symmetric_and_bounded(
            x in prop::collection::vec(-5.0f64..5.0, 3),
            y in prop::collection::vec(-5.0f64..5.0, 3),
            e in 1e-3f64..10.0,
        ) {
            let a = gaussian_eval(&x, &y, eps(e)).unwrap();
            let b = gaussian_eval(&y, &x, eps(e)).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a));
            if x != y {
                prop_assert!(a < 1.0 || squared_distance(&x, &y) * e * e < 1e-15);
            }
        }

        #[test]
        fn kernel_matrix_admits_cholesky(
            pts in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..20),
        ) {
            let mut distinct: Vec<Vec<f64>> = Vec::new();
            for p in pts {
                if !distinct.iter().any(|q| squared_distance(q, &p) < 1e-2) {
                    distinct.push(p);
                }
            }
            let a = kernel_matrix(&Gaussian::new(eps(5.0)), &distinct).unwrap();
            prop_assert!(a.cholesky().is_some());
        }
    }
}
