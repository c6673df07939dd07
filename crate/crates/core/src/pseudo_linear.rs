//! Pseudo-Euclidean vector spaces: signatures, Gram analysis and null frames.

use crate::error::{Error, Result};
use crate::linalg::{self, DEFAULT_TOL};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// `ℝ^{t,s}` with an explicit symmetric metric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSpace {
    metric: DMatrix<f64>,
    signature: (usize, usize),
}

impl QuadraticSpace {
    pub fn new(metric: DMatrix<f64>) -> Result<QuadraticSpace> {
        let n = metric.nrows();
        if n == 0 || metric.ncols() != n {
            return Err(Error::InvalidInput(
                "metric must be a non-empty square matrix".into(),
            ));
        }
        let asym = linalg::max_abs(&(&metric - metric.transpose()));
        if asym > 1e-12 * linalg::max_abs(&metric).max(1.0) {
            return Err(Error::InvalidInput(format!(
                "metric not symmetric (residual {asym:e})"
            )));
        }
        let signature = signature_of(&metric)?;
        Ok(QuadraticSpace { metric, signature })
    }

    /// `diag(−1,…,−1, +1,…,+1)` with `t` minus signs.
    pub fn standard(t: usize, s: usize) -> QuadraticSpace {
        let n = t + s;
        let metric = DMatrix::from_fn(n, n, |i, j| match (i == j, i < t) {
            (true, true) => -1.0,
            (true, false) => 1.0,
            _ => 0.0,
        });
        QuadraticSpace {
            metric,
            signature: (t, s),
        }
    }

    pub fn dim(&self) -> usize {
        self.metric.nrows()
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn signature(&self) -> (usize, usize) {
        self.signature
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&(&self.metric * b))
    }

    /// Musical isomorphism `v ↦ g(v, ·)`.
    pub fn flat(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.metric * v
    }

    pub fn sharp(&self, covector: &DVector<f64>) -> DVector<f64> {
        self.metric
            .clone()
            .lu()
            .solve(covector)
            .expect("metric is nondegenerate by construction")
    }

    /// Max-norm of `Mᵀg + gM`; zero iff `M` is skew with respect to the metric.
    pub fn skew_residual(&self, m: &DMatrix<f64>) -> f64 {
        linalg::max_abs(&(m.transpose() * &self.metric + &self.metric * m))
    }
}

/// Counts negative and positive eigenvalues; rejects degenerate metrics.
pub fn signature_of(metric: &DMatrix<f64>) -> Result<(usize, usize)> {
    let eig = SymmetricEigen::new(metric.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut t = 0;
    let mut s = 0;
    for &lambda in eig.eigenvalues.iter() {
        if lambda.abs() <= DEFAULT_TOL * scale || scale == 0.0 {
            return Err(Error::InvalidInput("metric is degenerate".into()));
        }
        if lambda < 0.0 {
            t += 1;
        } else {
            s += 1;
        }
    }
    Ok((t, s))
}

/// An ordered list of linearly independent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    ambient_dim: usize,
    vectors: Vec<DVector<f64>>,
    tol: f64,
}

impl SubspaceBasis {
    pub fn new(ambient_dim: usize, vectors: Vec<DVector<f64>>, tol: f64) -> Result<SubspaceBasis> {
        for v in &vectors {
            if v.len() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    found: v.len(),
                });
            }
        }
        let m = linalg::columns_to_matrix(&vectors, ambient_dim);
        if linalg::rank(&m, tol) != vectors.len() {
            return Err(Error::InvalidInput(
                "basis vectors are linearly dependent".into(),
            ));
        }
        Ok(SubspaceBasis {
            ambient_dim,
            vectors,
            tol,
        })
    }

    pub fn zero(ambient_dim: usize) -> SubspaceBasis {
        SubspaceBasis {
            ambient_dim,
            vectors: Vec::new(),
            tol: DEFAULT_TOL,
        }
    }

    /// Orthonormal basis of the column space of `m` (rank decided at `tol`).
    pub fn span_of_columns(m: &DMatrix<f64>, tol: f64) -> SubspaceBasis {
        let q = linalg::image(m, tol);
        SubspaceBasis {
            ambient_dim: m.nrows(),
            vectors: linalg::matrix_columns(&q),
            tol,
        }
    }

    pub fn span_of(ambient_dim: usize, vectors: &[DVector<f64>], tol: f64) -> SubspaceBasis {
        SubspaceBasis::span_of_columns(&linalg::columns_to_matrix(vectors, ambient_dim), tol)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        linalg::columns_to_matrix(&self.vectors, self.ambient_dim)
    }

    /// Orthonormal (Euclidean) basis of the same subspace, as columns.
    pub fn orthonormal(&self) -> DMatrix<f64> {
        if self.vectors.is_empty() {
            return DMatrix::zeros(self.ambient_dim, 0);
        }
        linalg::image(&self.matrix(), self.tol)
    }

    /// Euclidean norm of the component of `v` outside the subspace, relative to `|v|`.
    pub fn relative_distance(&self, v: &DVector<f64>) -> f64 {
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        linalg::residual_outside(&self.orthonormal(), v).norm() / norm
    }

    /// Euclidean orthogonal complement.
    pub fn complement(&self) -> SubspaceBasis {
        let q = self.orthonormal();
        let k = linalg::kernel(&q.transpose(), self.tol);
        SubspaceBasis {
            ambient_dim: self.ambient_dim,
            vectors: linalg::matrix_columns(&k),
            tol: self.tol,
        }
    }
}

/// Result of restricting the metric to a subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct GramAnalysis {
    pub rank: usize,
    pub radical: SubspaceBasis,
    pub is_nondegenerate: bool,
    pub is_totally_null: bool,
}

pub fn gram_analysis(space: &QuadraticSpace, sub: &SubspaceBasis) -> Result<GramAnalysis> {
    if sub.ambient_dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: sub.ambient_dim(),
        });
    }
    let k = sub.dim();
    if k == 0 {
        return Ok(GramAnalysis {
            rank: 0,
            radical: SubspaceBasis::zero(space.dim()),
            is_nondegenerate: true,
            is_totally_null: true,
        });
    }
    let b = sub.matrix();
    let gram = b.transpose() * space.metric() * &b;
    // Compare against the size of the vectors, not of the Gram matrix itself,
    // so that an (almost) zero Gram matrix is recognized as such.
    let reference = space.metric().norm() * b.norm().powi(2);
    let svd = linalg::full_svd(&gram);
    let rank = linalg::rank_with_reference(&svd.singular, sub.tol(), Some(reference));
    let kernel = svd.v.columns(rank, k - rank).into_owned();
    let radical_vectors = linalg::matrix_columns(&(&b * kernel));
    let radical = SubspaceBasis::span_of(space.dim(), &radical_vectors, sub.tol());
    Ok(GramAnalysis {
        rank,
        radical,
        is_nondegenerate: rank == k,
        is_totally_null: rank == 0,
    })
}

/// Null vectors `e₋`, `e₊` with `g(e₋,e₊) = 1` and a basis of their orthogonal complement.
#[derive(Debug, Clone, PartialEq)]
pub struct NullFrame {
    pub e_minus: DVector<f64>,
    pub e_plus: DVector<f64>,
    pub v0_basis: SubspaceBasis,
    metric: DMatrix<f64>,
}

impl NullFrame {
    /// Validates the frame relations to `1e−10`.
    pub fn new(
        space: &QuadraticSpace,
        e_minus: DVector<f64>,
        e_plus: DVector<f64>,
        v0_basis: SubspaceBasis,
    ) -> Result<NullFrame> {
        let frame = NullFrame {
            e_minus,
            e_plus,
            v0_basis,
            metric: space.metric().clone(),
        };
        let residual = frame.invariant_residual();
        if residual > 1e-10 {
            return Err(Error::Frame(format!(
                "null frame relations violated (residual {residual:e})"
            )));
        }
        if frame.v0_basis.dim() + 2 != space.dim() {
            return Err(Error::Frame(
                "V₀ basis does not complement the null pair".into(),
            ));
        }
        Ok(frame)
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.metric.nrows()
    }

    /// Columns `(e₋, V₀ basis, e₊)`.
    pub fn basis_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut b = DMatrix::zeros(n, n);
        b.set_column(0, &self.e_minus);
        for (j, v) in self.v0_basis.vectors().iter().enumerate() {
            b.set_column(j + 1, v);
        }
        b.set_column(n - 1, &self.e_plus);
        b
    }

    /// Gram matrix of `V₀` in the stored basis.
    pub fn v0_gram(&self) -> DMatrix<f64> {
        let b = self.v0_basis.matrix();
        b.transpose() * &self.metric * b
    }

    fn invariant_residual(&self) -> f64 {
        let g = |a: &DVector<f64>, b: &DVector<f64>| a.dot(&(&self.metric * b));
        let mut r = g(&self.e_minus, &self.e_minus)
            .abs()
            .max(g(&self.e_plus, &self.e_plus).abs())
            .max((g(&self.e_minus, &self.e_plus) - 1.0).abs());
        for v in self.v0_basis.vectors() {
            r = r
                .max(g(v, &self.e_minus).abs())
                .max(g(v, &self.e_plus).abs());
        }
        r
    }

    /// Gram matrix in the basis `(e₋, V₀, e₊)`.
    pub fn adapted_gram(&self) -> DMatrix<f64> {
        let b = self.basis_matrix();
        b.transpose() * &self.metric * b
    }
}

fn sign_fixed(mut v: DVector<f64>) -> DVector<f64> {
    let scale = linalg::max_abs_vec(&v);
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale).copied() {
        if first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// Null frame built from one timelike and one spacelike eigenvector of the metric.
pub fn null_frame(space: &QuadraticSpace) -> Result<NullFrame> {
    let (t, s) = space.signature();
    if t == 0 || s == 0 {
        return Err(Error::NoNullFrame { t, s });
    }
    let eig = SymmetricEigen::new(space.metric().clone());
    let mut order: Vec<usize> = (0..space.dim()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let unit = |k: usize| -> DVector<f64> {
        let v = eig.eigenvectors.column(k).into_owned();
        sign_fixed(v / eig.eigenvalues[k].abs().sqrt())
    };
    let timelike = order[0];
    let spacelike = *order
        .iter()
        .find(|&&k| eig.eigenvalues[k] > 0.0)
        .expect("s ≥ 1");
    let et = unit(timelike);
    let es = unit(spacelike);
    let root = std::f64::consts::SQRT_2;
    let e_minus = (&et + &es) / root;
    let e_plus = (&es - &et) / root;
    let rest: Vec<DVector<f64>> = order
        .iter()
        .filter(|&&k| k != timelike && k != spacelike)
        .map(|&k| unit(k))
        .collect();
    let v0 = SubspaceBasis::new(space.dim(), rest, DEFAULT_TOL)?;
    NullFrame::new(space, e_minus, e_plus, v0)
}
