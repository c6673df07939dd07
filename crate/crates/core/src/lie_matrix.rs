//! Matrix Lie algebras, the stabiliser of a null line and its block form.
//!
//! Block matrices are written in the adapted basis `(e₋, V₀ basis, e₊)`. A
//! stabiliser element `(a, X, v)` is the matrix
//!
//! ```text
//! ( a  −v♭  0 )
//! ( 0   X   v )
//! ( 0   0  −a )
//! ```

use crate::error::{Error, Result};
use crate::linalg::{self, DEFAULT_TOL};
use crate::pseudo_linear::{gram_analysis, NullFrame, QuadraticSpace, SubspaceBasis};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A linearly independent, bracket-closed list of square matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixAlgebra {
    ambient_dim: usize,
    basis: Vec<DMatrix<f64>>,
    tol: f64,
}

impl MatrixAlgebra {
    /// Keeps the given basis after checking independence and closure.
    pub fn from_basis(
        ambient_dim: usize,
        basis: Vec<DMatrix<f64>>,
        tol: f64,
    ) -> Result<MatrixAlgebra> {
        for m in &basis {
            if m.shape() != (ambient_dim, ambient_dim) {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    found: m.nrows(),
                });
            }
        }
        let alg = MatrixAlgebra {
            ambient_dim,
            basis,
            tol,
        };
        let flat = alg.flat_matrix();
        if linalg::rank(&flat, tol) != alg.dim() {
            return Err(Error::InvalidInput(
                "algebra basis is linearly dependent".into(),
            ));
        }
        let residual = alg.closure_residual();
        if residual > tol.max(1e-9) {
            return Err(Error::Construction(format!(
                "basis is not bracket-closed (residual {residual:e})"
            )));
        }
        Ok(alg)
    }

    pub fn zero(ambient_dim: usize) -> MatrixAlgebra {
        MatrixAlgebra {
            ambient_dim,
            basis: Vec::new(),
            tol: DEFAULT_TOL,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.basis
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Row-major flattened basis elements as columns (`n² × dim`).
    pub fn flat_matrix(&self) -> DMatrix<f64> {
        let flats: Vec<DVector<f64>> = self.basis.iter().map(linalg::flatten).collect();
        linalg::columns_to_matrix(&flats, self.ambient_dim * self.ambient_dim)
    }

    /// Frobenius-orthonormal basis of the span, flattened as columns.
    pub fn orthonormal_flat(&self) -> DMatrix<f64> {
        linalg::image(&self.flat_matrix(), self.tol)
    }

    /// Distance of `m` from the span, relative to the Frobenius norm of `m`.
    pub fn relative_distance(&self, m: &DMatrix<f64>) -> f64 {
        let norm = m.norm();
        if norm == 0.0 {
            return 0.0;
        }
        linalg::residual_outside(&self.orthonormal_flat(), &linalg::flatten(m)).norm() / norm
    }

    /// Coordinates of `m` in the stored basis (least squares).
    pub fn coordinates(&self, m: &DMatrix<f64>) -> DVector<f64> {
        linalg::lstsq(&self.flat_matrix(), &linalg::flatten(m))
    }

    /// Largest relative distance of a bracket of basis elements from the span.
    pub fn closure_residual(&self) -> f64 {
        let q = self.orthonormal_flat();
        let scale = self.basis.iter().map(|b| b.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for j in i + 1..self.dim() {
                let b = linalg::bracket(&self.basis[i], &self.basis[j]);
                let r = linalg::residual_outside(&q, &linalg::flatten(&b)).norm();
                worst = worst.max(r / (scale * scale));
            }
        }
        worst
    }

    pub fn is_abelian(&self) -> bool {
        let scale = self
            .basis
            .iter()
            .map(|b| b.norm())
            .fold(0.0, f64::max)
            .max(1e-300);
        self.basis.iter().enumerate().all(|(i, a)| {
            self.basis[i + 1..]
                .iter()
                .all(|b| linalg::bracket(a, b).norm() <= self.tol * scale * scale)
        })
    }

    /// Centre, with basis elements normalized so the first nonzero coordinate is positive.
    pub fn centre(&self) -> MatrixAlgebra {
        let d = self.dim();
        let n2 = self.ambient_dim * self.ambient_dim;
        if d == 0 {
            return MatrixAlgebra::zero(self.ambient_dim);
        }
        // Σ c_a [X_a, X_b] = 0 for every b.
        let mut system = DMatrix::zeros(n2 * d, d);
        for a in 0..d {
            for b in 0..d {
                let br = linalg::flatten(&linalg::bracket(&self.basis[a], &self.basis[b]));
                system.view_mut((b * n2, a), (n2, 1)).copy_from(&br);
            }
        }
        let scale = self.basis.iter().map(|b| b.norm()).fold(0.0, f64::max);
        let kernel = linalg::kernel_with_reference(&system, self.tol, Some(scale * scale));
        let basis = linalg::matrix_columns(&kernel)
            .into_iter()
            .map(|c| {
                let c = sign_fix(c);
                combine(&self.basis, &c)
            })
            .collect();
        MatrixAlgebra {
            ambient_dim: self.ambient_dim,
            basis,
            tol: self.tol,
        }
    }

    /// Derived algebra `[𝔤, 𝔤]`.
    pub fn derived(&self) -> MatrixAlgebra {
        let mut brackets = Vec::new();
        for i in 0..self.dim() {
            for j in i + 1..self.dim() {
                brackets.push(linalg::bracket(&self.basis[i], &self.basis[j]));
            }
        }
        span_algebra(self.ambient_dim, &brackets, self.tol)
    }

    /// Common kernel of all basis elements.
    pub fn common_kernel(&self) -> SubspaceBasis {
        let n = self.ambient_dim;
        if self.dim() == 0 {
            return SubspaceBasis::span_of_columns(&DMatrix::identity(n, n), self.tol);
        }
        let mut stacked = DMatrix::zeros(n * self.dim(), n);
        for (k, b) in self.basis.iter().enumerate() {
            stacked.view_mut((k * n, 0), (n, n)).copy_from(b);
        }
        let k = linalg::kernel(&stacked, self.tol);
        SubspaceBasis::span_of_columns(&k, self.tol)
    }
}

fn sign_fix(mut v: DVector<f64>) -> DVector<f64> {
    let scale = linalg::max_abs_vec(&v);
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-9 * scale).copied() {
        if first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

fn combine(basis: &[DMatrix<f64>], coeffs: &DVector<f64>) -> DMatrix<f64> {
    let n = basis[0].nrows();
    let mut out = DMatrix::zeros(n, n);
    for (b, c) in basis.iter().zip(coeffs.iter()) {
        out += b * *c;
    }
    out
}

/// Frobenius-orthonormal basis of the span of `mats` (not closed under brackets).
fn span_algebra(n: usize, mats: &[DMatrix<f64>], tol: f64) -> MatrixAlgebra {
    let flats: Vec<DVector<f64>> = mats.iter().map(linalg::flatten).collect();
    let q = linalg::image(&linalg::columns_to_matrix(&flats, n * n), tol);
    MatrixAlgebra {
        ambient_dim: n,
        basis: linalg::matrix_columns(&q)
            .iter()
            .map(|c| linalg::unflatten(c, n))
            .collect(),
        tol,
    }
}

/// Smallest bracket-closed span containing `generators`, as a
/// Frobenius-orthonormal basis.
pub fn lie_closure(generators: &[DMatrix<f64>], tol: f64) -> Result<MatrixAlgebra> {
    let Some(first) = generators.first() else {
        return Err(Error::InvalidInput("no generators".into()));
    };
    let n = first.nrows();
    if generators.iter().any(|g| g.shape() != (n, n)) {
        return Err(Error::InvalidInput(
            "generators must be square of equal size".into(),
        ));
    }
    let start = span_algebra(n, generators, tol);
    let mut q: Vec<DVector<f64>> = start.basis.iter().map(linalg::flatten).collect();
    let mut fresh_from = 0;
    let mut rounds = 0;
    while fresh_from < q.len() {
        rounds += 1;
        if rounds > n * n {
            return Err(Error::Numerical("Lie closure did not stabilize".into()));
        }
        let frontier = q.len();
        for i in 0..frontier {
            for j in fresh_from.max(i + 1)..frontier {
                let a = linalg::unflatten(&q[i], n);
                let b = linalg::unflatten(&q[j], n);
                let mut r = linalg::flatten(&linalg::bracket(&a, &b));
                for _ in 0..2 {
                    for e in &q {
                        let c = e.dot(&r);
                        r -= e * c;
                    }
                }
                let norm = r.norm();
                if norm > tol {
                    q.push(r / norm);
                }
            }
        }
        fresh_from = frontier;
    }
    Ok(MatrixAlgebra {
        ambient_dim: n,
        basis: q.iter().map(|c| linalg::unflatten(c, n)).collect(),
        tol,
    })
}

/// Element `(a, X, v)` of the stabiliser of `ℝe₋`, with `X` and `v` in `V₀` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct StabElement {
    pub a: f64,
    pub x: DMatrix<f64>,
    pub v: DVector<f64>,
}

impl StabElement {
    pub fn new(a: f64, x: DMatrix<f64>, v: DVector<f64>) -> StabElement {
        StabElement { a, x, v }
    }

    pub fn zero(n: usize) -> StabElement {
        StabElement::new(0.0, DMatrix::zeros(n, n), DVector::zeros(n))
    }

    /// Block matrix in the adapted basis, given the Gram matrix of `V₀`.
    pub fn block_matrix(&self, v0_gram: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.v.len();
        let mut m = DMatrix::zeros(n + 2, n + 2);
        m[(0, 0)] = self.a;
        m[(n + 1, n + 1)] = -self.a;
        let v_flat = v0_gram * &self.v;
        for i in 0..n {
            m[(0, i + 1)] = -v_flat[i];
            m[(i + 1, n + 1)] = self.v[i];
        }
        m.view_mut((1, 1), (n, n)).copy_from(&self.x);
        m
    }

    /// Matrix in ambient coordinates.
    pub fn embed(&self, frame: &NullFrame) -> DMatrix<f64> {
        let b = frame.basis_matrix();
        let b_inv = b.clone().try_inverse().expect("frame basis invertible");
        b * self.block_matrix(&frame.v0_gram()) * b_inv
    }

    /// Action on adapted coordinates `(r, u, s)`: `(ar − g(v,u), Xu + sv, −as)`.
    pub fn act(
        &self,
        v0_gram: &DMatrix<f64>,
        r: f64,
        u: &DVector<f64>,
        s: f64,
    ) -> (f64, DVector<f64>, f64) {
        let g_vu = self.v.dot(&(v0_gram * u));
        (self.a * r - g_vu, &self.x * u + &self.v * s, -self.a * s)
    }

    /// `[(a,X,v),(b,Y,w)] = (0, [X,Y], (X+a)w − (Y+b)v)`.
    pub fn bracket(&self, other: &StabElement) -> StabElement {
        let x = linalg::bracket(&self.x, &other.x);
        let v = &self.x * &other.v + &other.v * self.a - &other.x * &self.v - &self.v * other.a;
        StabElement::new(0.0, x, v)
    }
}

/// Reads off `(a, X, v)`; rejects matrices outside the stabiliser of `ℝe₋`.
pub fn stab_decompose(m: &DMatrix<f64>, frame: &NullFrame) -> Result<StabElement> {
    let n = frame.dim();
    if m.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.nrows(),
        });
    }
    let b = frame.basis_matrix();
    let b_inv = b
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Frame("frame basis is singular".into()))?;
    let adapted = &b_inv * m * &b;
    let k = n - 2;
    let elem = StabElement::new(
        adapted[(0, 0)],
        adapted.view((1, 1), (k, k)).into_owned(),
        adapted.view((1, n - 1), (k, 1)).column(0).into_owned(),
    );
    let residual = linalg::max_abs(&(elem.block_matrix(&frame.v0_gram()) - &adapted));
    let scale = linalg::max_abs(&adapted).max(1.0);
    if residual > 1e-9 * scale {
        return Err(Error::NotInStabiliser { residual });
    }
    Ok(elem)
}

/// Translation `(0, 0, v)` for `v` given in `V₀` coordinates.
pub fn translation(frame: &NullFrame, v: &DVector<f64>) -> DMatrix<f64> {
    let k = frame.dim() - 2;
    StabElement::new(0.0, DMatrix::zeros(k, k), v.clone()).embed(frame)
}

fn check_stabiliser(alg: &MatrixAlgebra, frame: &NullFrame) -> Result<Vec<StabElement>> {
    alg.basis()
        .iter()
        .map(|m| stab_decompose(m, frame))
        .collect()
}

/// `{v : (0,0,v) ∈ alg}` as ambient vectors.
pub fn translational_ideal(alg: &MatrixAlgebra, frame: &NullFrame) -> Result<SubspaceBasis> {
    check_stabiliser(alg, frame)?;
    let n = frame.dim();
    let k = n - 2;
    if k == 0 || alg.dim() == 0 {
        return Ok(SubspaceBasis::zero(n));
    }
    let mut system = DMatrix::zeros(n * n, alg.dim() + k);
    system
        .view_mut((0, 0), (n * n, alg.dim()))
        .copy_from(&alg.flat_matrix());
    for i in 0..k {
        let mut e = DVector::zeros(k);
        e[i] = 1.0;
        let t = linalg::flatten(&translation(frame, &e));
        system.set_column(alg.dim() + i, &(-t));
    }
    let kernel = linalg::kernel(&system, alg.tol());
    let v0 = frame.v0_basis.matrix();
    let vectors: Vec<DVector<f64>> = (0..kernel.ncols())
        .map(|c| &v0 * kernel.view((alg.dim(), c), (k, 1)).column(0))
        .collect();
    Ok(SubspaceBasis::span_of(n, &vectors, alg.tol()))
}

/// Expresses an ambient vector of `V₀` in the frame's `V₀` coordinates.
pub fn v0_coordinates(frame: &NullFrame, v: &DVector<f64>) -> DVector<f64> {
    linalg::lstsq(&frame.v0_basis.matrix(), v)
}

/// Largest residual of the ideal property `[alg, T] ⊆ T` and of `X·T ⊆ T`.
pub fn ideal_residual(alg: &MatrixAlgebra, frame: &NullFrame, t: &SubspaceBasis) -> Result<f64> {
    let elems = check_stabiliser(alg, frame)?;
    let q = t.orthonormal();
    let v0 = frame.v0_basis.matrix();
    let mut worst = 0.0f64;
    for tv in t.vectors() {
        let coords = v0_coordinates(frame, tv);
        let tau = StabElement::new(
            0.0,
            DMatrix::zeros(coords.len(), coords.len()),
            coords.clone(),
        );
        for e in &elems {
            let br = e.bracket(&tau);
            let scale = (e.x.norm() + e.a.abs() + e.v.norm()).max(1e-300) * tv.norm();
            worst = worst.max(linalg::max_abs(&br.x) / scale);
            worst = worst.max(linalg::residual_outside(&q, &(&v0 * &br.v)).norm() / scale);
            let xt = &v0 * (&e.x * &coords);
            worst = worst.max(linalg::residual_outside(&q, &xt).norm() / scale);
        }
    }
    Ok(worst)
}

/// `A_v` of the translation by `v` (given in `V₀` coordinates), in ambient coordinates.
pub fn translation_conjugator(frame: &NullFrame, v: &DVector<f64>) -> DMatrix<f64> {
    let n = frame.dim();
    let k = n - 2;
    let gram = frame.v0_gram();
    let v_flat = &gram * v;
    let mut a = DMatrix::identity(n, n);
    for i in 0..k {
        a[(0, i + 1)] = -v_flat[i];
        a[(i + 1, n - 1)] = v[i];
    }
    a[(0, n - 1)] = -0.5 * v.dot(&v_flat);
    let b = frame.basis_matrix();
    let b_inv = b.clone().try_inverse().expect("frame basis invertible");
    b * a * b_inv
}

/// Conjugates every basis element by `A_v`: `M ↦ A_v M A_v⁻¹`.
pub fn conjugate_by_translation(
    alg: &MatrixAlgebra,
    v: &DVector<f64>,
    frame: &NullFrame,
) -> Result<MatrixAlgebra> {
    check_stabiliser(alg, frame)?;
    let a = translation_conjugator(frame, v);
    let a_inv = a.clone().try_inverse().expect("unipotent");
    let basis = alg.basis().iter().map(|m| &a * m * &a_inv).collect();
    Ok(MatrixAlgebra {
        ambient_dim: alg.ambient_dim(),
        basis,
        tol: alg.tol(),
    })
}

/// Outcome of the commutant-based decomposability probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub witness: Option<SubspaceBasis>,
    pub warning: Option<String>,
}

const PROBE_SEED: u64 = 0x00c0_9e1a;

fn seeded_combination(rng: &mut ChaCha8Rng, mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = mats[0].nrows();
    let mut out = DMatrix::zeros(n, n);
    for m in mats {
        out += m * rng.gen_range(-1.0..1.0);
    }
    out
}

/// Looks for a proper nondegenerate invariant subspace via the self-adjoint commutant.
pub fn decomposability_probe(alg: &MatrixAlgebra, space: &QuadraticSpace) -> Result<ProbeResult> {
    let n = space.dim();
    if alg.ambient_dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: alg.ambient_dim(),
        });
    }
    let g = space.metric();
    let n2 = n * n;
    let blocks = alg.dim() + 1;
    let mut system = DMatrix::zeros(n2 * blocks, n2);
    // column index for C[p][q] is p*n + q
    for (k, a) in alg.basis().iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                let row = k * n2 + i * n + j;
                // (AC − CA)[i][j] = Σ_p A[i][p] C[p][j] − C[i][p] A[p][j]
                for p in 0..n {
                    system[(row, p * n + j)] += a[(i, p)];
                    system[(row, i * n + p)] -= a[(p, j)];
                }
            }
        }
    }
    // gC − Cᵀg = 0
    for i in 0..n {
        for j in 0..n {
            let row = alg.dim() * n2 + i * n + j;
            for p in 0..n {
                system[(row, p * n + j)] += g[(i, p)];
                system[(row, p * n + i)] -= g[(p, j)];
            }
        }
    }
    let scale = alg
        .basis()
        .iter()
        .map(|b| b.norm())
        .fold(g.norm(), f64::max);
    let svd = linalg::full_svd(&system);
    let r = linalg::rank_with_reference(&svd.singular, alg.tol(), Some(scale));
    let mut warning = None;
    if r > 0 && svd.singular[r - 1] < 1e3 * alg.tol() * scale {
        warning = Some(format!(
            "commutant solve is ill-conditioned (smallest retained singular value {:e})",
            svd.singular[r - 1]
        ));
    }
    let kernel = svd.v.columns(r, n2 - r).into_owned();
    if kernel.ncols() <= 1 {
        return Ok(ProbeResult {
            witness: None,
            warning,
        });
    }
    let elements: Vec<DMatrix<f64>> = linalg::matrix_columns(&kernel)
        .iter()
        .map(|c| linalg::unflatten(c, n))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let c = seeded_combination(&mut rng, &elements);
    let clusters = eigen_clusters(&c, 1e-6, c.norm());
    if clusters.len() < 2 {
        return Ok(ProbeResult {
            witness: None,
            warning,
        });
    }
    let (re, im, mult) = clusters[0];
    let factor = if im.abs() > 0.0 {
        let c2 = &c * &c;
        c2 - &c * (2.0 * re) + DMatrix::identity(n, n) * (re * re + im * im)
    } else {
        &c - DMatrix::identity(n, n) * re
    };
    let mut power = DMatrix::identity(n, n);
    for _ in 0..mult {
        power = &power * &factor;
    }
    let w = linalg::kernel(&power, 1e-6);
    let candidate = SubspaceBasis::span_of_columns(&w, alg.tol());
    if candidate.dim() == 0 || candidate.dim() == n {
        return Ok(ProbeResult {
            witness: None,
            warning,
        });
    }
    let invariant = invariance_residual(alg, &candidate);
    let ga = gram_analysis(space, &candidate)?;
    if invariant > 1e-6 || !ga.is_nondegenerate {
        let note =
            format!("commutant eigenspace failed verification (invariance residual {invariant:e})");
        return Ok(ProbeResult {
            witness: None,
            warning: Some(warning.map_or(note.clone(), |w| format!("{w}; {note}"))),
        });
    }
    Ok(ProbeResult {
        witness: Some(candidate),
        warning,
    })
}

/// Largest relative distance of `A w` from `W` over basis elements and basis vectors.
pub fn invariance_residual(alg: &MatrixAlgebra, sub: &SubspaceBasis) -> f64 {
    let q = sub.orthonormal();
    let mut worst = 0.0f64;
    for a in alg.basis() {
        let an = a.norm().max(1e-300);
        for c in 0..q.ncols() {
            let img = a * q.column(c);
            worst = worst.max(linalg::residual_outside(&q, &img).norm() / an);
        }
    }
    worst
}

/// Eigenvalue clusters `(re, |im|, multiplicity)` sorted by `(re, im)`;
/// complex pairs are reported once. Each cluster carries the mean of its
/// members, which stays accurate when a defective eigenvalue splits.
/// Tolerances are relative to `scale`.
fn eigen_clusters(m: &DMatrix<f64>, rel_tol: f64, scale: f64) -> Vec<(f64, f64, usize)> {
    let eig = m.clone().complex_eigenvalues();
    let scale = scale.max(1e-300);
    // (first re, first im, multiplicity, sum re, sum im)
    let mut clusters: Vec<(f64, f64, usize, f64, f64)> = Vec::new();
    for z in eig.iter() {
        let (re, im) = (z.re, z.im);
        if im < -rel_tol * scale {
            continue;
        }
        let im = if im.abs() <= rel_tol * scale { 0.0 } else { im };
        if let Some(c) = clusters
            .iter_mut()
            .find(|c| (c.0 - re).abs() <= rel_tol * scale && (c.1 - im).abs() <= rel_tol * scale)
        {
            c.2 += 1;
            c.3 += re;
            c.4 += im;
        } else {
            clusters.push((re, im, 1, re, im));
        }
    }
    let mut clusters: Vec<(f64, f64, usize)> = clusters
        .into_iter()
        .map(|(_, _, k, sr, si)| (sr / k as f64, si / k as f64, k))
        .collect();
    clusters.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    });
    clusters
}

const NULL_LINE_SEED: u64 = 0x0051_9e7a;
const NULL_LINE_COMBINATIONS: usize = 8;
// loose enough to merge the eps^(1/k) split of a size-k Jordan block
const NULL_LINE_CLUSTER_TOL: f64 = 1e-3;

/// Searches for a null line preserved by every element of `alg`.
pub fn invariant_null_line_search(
    alg: &MatrixAlgebra,
    space: &QuadraticSpace,
) -> Option<SubspaceBasis> {
    let n = space.dim();
    if space.signature().0 == 0 || alg.ambient_dim() != n {
        return None;
    }
    let mut operators: Vec<DMatrix<f64>> = Vec::new();
    if alg.dim() > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(NULL_LINE_SEED);
        for _ in 0..NULL_LINE_COMBINATIONS {
            operators.push(seeded_combination(&mut rng, alg.basis()));
        }
        operators.extend(alg.basis().iter().cloned());
    }
    let mut candidates = vec![DMatrix::<f64>::identity(n, n)];
    for op in &operators {
        let norm = op.norm();
        if norm == 0.0 {
            continue;
        }
        let op = op / norm;
        let mut next = Vec::new();
        for w in &candidates {
            let compressed = w.transpose() * &op * w;
            for (mu, im, _) in eigen_clusters(&compressed, NULL_LINE_CLUSTER_TOL, 1.0) {
                if im != 0.0 {
                    continue;
                }
                let shifted = (&op - DMatrix::identity(n, n) * mu) * w;
                let k = linalg::kernel_with_reference(&shifted, 1e-7, Some(1.0));
                if k.ncols() > 0 {
                    next.push(w * k);
                }
            }
        }
        next.truncate(64);
        candidates = next;
        if candidates.is_empty() {
            return None;
        }
    }
    for w in &candidates {
        let Some(line) = null_vector_in(space, w) else {
            continue;
        };
        if line_is_invariant(alg, &line) {
            return SubspaceBasis::new(n, vec![line], DEFAULT_TOL).ok();
        }
    }
    None
}

fn null_vector_in(space: &QuadraticSpace, w: &DMatrix<f64>) -> Option<DVector<f64>> {
    let h = w.transpose() * space.metric() * w;
    let eig = nalgebra::SymmetricEigen::new(h);
    let scale = space.metric().norm();
    let values = &eig.eigenvalues;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[i]
            .partial_cmp(&values[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if let Some(&k) = order.iter().find(|&&k| values[k].abs() <= 1e-9 * scale) {
        return Some(sign_fix(w * eig.eigenvectors.column(k)));
    }
    let neg = order.iter().copied().find(|&k| values[k] < 0.0)?;
    let pos = order.iter().copied().find(|&k| values[k] > 0.0)?;
    let c = eig.eigenvectors.column(neg) / values[neg].abs().sqrt()
        + eig.eigenvectors.column(pos) / values[pos].sqrt();
    let v = w * c;
    let norm = v.norm();
    Some(sign_fix(v / norm))
}

fn line_is_invariant(alg: &MatrixAlgebra, line: &DVector<f64>) -> bool {
    let l = line / line.norm();
    alg.basis().iter().all(|a| {
        let img = a * &l;
        let along = l.dot(&img);
        (img - &l * along).norm() <= 1e-8 * a.norm().max(1e-300)
    })
}

/// The four types of indecomposable subalgebras of the null-line stabiliser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BbiKind {
    Type1,
    Type2,
    Type3,
    Type4,
}

/// Parameters of types 3 and 4: `f` is a `1 × dim 𝔷` row (type 3) or an
/// `n × dim 𝔷` matrix into `V₀` (type 4), in the basis of [`MatrixAlgebra::centre`].
#[derive(Debug, Clone, Default)]
pub struct BbiParams {
    pub f: Option<DMatrix<f64>>,
    pub t0: Option<SubspaceBasis>,
}

/// `ℝ^{1,n+1}` in adapted coordinates `(e₋, V₀, e₊)` with Euclidean `V₀`.
pub fn adapted_lorentz_frame(n: usize) -> (QuadraticSpace, NullFrame) {
    let dim = n + 2;
    let mut g = DMatrix::zeros(dim, dim);
    g[(0, dim - 1)] = 1.0;
    g[(dim - 1, 0)] = 1.0;
    for i in 1..=n {
        g[(i, i)] = 1.0;
    }
    let space = QuadraticSpace::new(g).expect("Lorentzian metric");
    let unit = |i: usize| {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        v
    };
    let v0 =
        SubspaceBasis::new(dim, (1..=n).map(unit).collect(), DEFAULT_TOL).expect("independent");
    let frame = NullFrame::new(&space, unit(0), unit(dim - 1), v0).expect("adapted frame");
    (space, frame)
}

/// Builds a subalgebra of `𝔰𝔬(1, n+1)` stabilising `ℝe₋` from `𝔤₀ ⊂ 𝔰𝔬(n)`.
pub fn bbi_type(kind: BbiKind, g0: &MatrixAlgebra, params: &BbiParams) -> Result<MatrixAlgebra> {
    let n = g0.ambient_dim();
    let euclid = QuadraticSpace::standard(0, n.max(1));
    if n > 0 {
        for x in g0.basis() {
            let r = euclid.skew_residual(x);
            if r > 1e-10 * x.norm().max(1.0) {
                return Err(Error::Construction(format!(
                    "𝔤₀ is not in 𝔰𝔬({n}) (residual {r:e})"
                )));
            }
        }
    }
    let residual = g0.closure_residual();
    if residual > 1e-9 {
        return Err(Error::Construction(format!(
            "𝔤₀ is not closed (residual {residual:e})"
        )));
    }
    let (_, frame) = adapted_lorentz_frame(n);
    let elem = |a: f64, x: &DMatrix<f64>, v: &DVector<f64>| {
        StabElement::new(a, x.clone(), v.clone()).embed(&frame)
    };
    let zero_x = DMatrix::zeros(n, n);
    let zero_v = DVector::zeros(n);
    let unit = |i: usize| {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    };
    let mut basis = Vec::new();
    match kind {
        BbiKind::Type1 | BbiKind::Type2 => {
            if kind == BbiKind::Type1 {
                basis.push(elem(1.0, &zero_x, &zero_v));
            }
            for x in g0.basis() {
                basis.push(elem(0.0, x, &zero_v));
            }
            for i in 0..n {
                basis.push(elem(0.0, &zero_x, &unit(i)));
            }
        }
        BbiKind::Type3 => {
            let centre = g0.centre();
            let f = params.f.as_ref().ok_or_else(|| {
                Error::Construction("type 3 needs a functional f on the centre".into())
            })?;
            if f.nrows() != 1 || f.ncols() != centre.dim() || centre.dim() == 0 {
                return Err(Error::Construction(format!(
                    "f must be a 1×{} row on the centre of 𝔤₀",
                    centre.dim()
                )));
            }
            if f.norm() == 0.0 {
                return Err(Error::Construction("f vanishes on the centre".into()));
            }
            for (k, z) in centre.basis().iter().enumerate() {
                basis.push(elem(f[(0, k)], z, &zero_v));
            }
            for x in g0.derived().basis() {
                basis.push(elem(0.0, x, &zero_v));
            }
            for i in 0..n {
                basis.push(elem(0.0, &zero_x, &unit(i)));
            }
        }
        BbiKind::Type4 => {
            let centre = g0.centre();
            let t0 = params
                .t0
                .as_ref()
                .ok_or_else(|| Error::Construction("type 4 needs a translation space T₀".into()))?;
            let f = params.f.as_ref().ok_or_else(|| {
                Error::Construction("type 4 needs a map f from the centre".into())
            })?;
            if f.nrows() != n || f.ncols() != centre.dim() || centre.dim() == 0 {
                return Err(Error::Construction(format!(
                    "f must be an {n}×{} matrix on the centre of 𝔤₀",
                    centre.dim()
                )));
            }
            if f.norm() == 0.0 {
                return Err(Error::Construction("f vanishes on the centre".into()));
            }
            let inv = invariance_residual(g0, t0);
            if inv > 1e-9 {
                return Err(Error::Construction(format!(
                    "T₀ is not 𝔤₀-invariant (residual {inv:e})"
                )));
            }
            let perp = t0.complement();
            let qp = perp.orthonormal();
            let qt = t0.orthonormal();
            for a in g0.basis() {
                let r = linalg::max_abs(&(a * &qp));
                if r > 1e-9 * a.norm().max(1.0) {
                    return Err(Error::Construction(
                        "𝔤₀ must act trivially on the orthogonal complement of T₀".into(),
                    ));
                }
            }
            let in_t0 = linalg::max_abs(&(qt.transpose() * f));
            if in_t0 > 1e-9 * f.norm() {
                return Err(Error::Construction(
                    "f must take values in the complement of T₀".into(),
                ));
            }
            if linalg::rank(f, DEFAULT_TOL) != perp.dim() {
                return Err(Error::Construction(
                    "f must be surjective onto the complement of T₀".into(),
                ));
            }
            for (k, z) in centre.basis().iter().enumerate() {
                basis.push(elem(0.0, z, &f.column(k).into_owned()));
            }
            for x in g0.derived().basis() {
                basis.push(elem(0.0, x, &zero_v));
            }
            for t in t0.vectors() {
                basis.push(elem(0.0, &zero_x, t));
            }
        }
    }
    MatrixAlgebra::from_basis(n + 2, basis, g0.tol())
}

/// One entry of the reference list of irreducible holonomy algebras.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BergerEntry {
    pub name: String,
    pub signature: (usize, usize),
    pub dim: usize,
}

/// Entries of the Berger list realizable in signature `(t, s)`.
pub fn berger_entries(t: usize, s: usize) -> Vec<BergerEntry> {
    let n = t + s;
    let mut out = vec![BergerEntry {
        name: format!("so({t},{s})"),
        signature: (t, s),
        dim: n * (n.saturating_sub(1)) / 2,
    }];
    let mut push = |name: String, dim: usize| {
        out.push(BergerEntry {
            name,
            signature: (t, s),
            dim,
        })
    };
    if t % 2 == 0 && s % 2 == 0 {
        let (p, q) = (t / 2, s / 2);
        push(format!("u({p},{q})"), (p + q) * (p + q));
        push(format!("su({p},{q})"), (p + q) * (p + q) - 1);
    }
    if t % 4 == 0 && s % 4 == 0 {
        let (p, q) = (t / 4, s / 4);
        push(format!("sp({p},{q})"), (p + q) * (2 * (p + q) + 1));
    }
    if t == s && t > 0 {
        push(format!("so({t},C)"), t * (t - 1));
    }
    match (t, s) {
        (7, 7) => push("g2^C".into(), 28),
        (8, 8) => push("spin(7,C)".into(), 42),
        (0, 7) | (7, 0) => push("g2".into(), 14),
        (0, 8) | (8, 0) => push("spin(7)".into(), 21),
        (3, 4) | (4, 3) => push("g2(2)".into(), 14),
        (4, 4) => push("spin(3,4)".into(), 21),
        _ => {}
    }
    out
}

/// Names of Berger-list entries whose dimension equals `dim`.
pub fn berger_label(t: usize, s: usize, dim: usize) -> Vec<String> {
    berger_entries(t, s)
        .into_iter()
        .filter(|e| e.dim == dim)
        .map(|e| e.name)
        .collect()
}

/// Standard basis `E_ij − E_ji` (i < j) of `𝔰𝔬(n)`.
pub fn so_basis(n: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut m = DMatrix::zeros(n, n);
            m[(i, j)] = 1.0;
            m[(j, i)] = -1.0;
            out.push(m);
        }
    }
    out
}

/// `𝔰𝔬(n)` acting on `ℝⁿ`.
pub fn so_algebra(n: usize) -> MatrixAlgebra {
    if n < 2 {
        return MatrixAlgebra::zero(n);
    }
    MatrixAlgebra::from_basis(n, so_basis(n), DEFAULT_TOL).expect("so(n) is closed")
}

/// Block-diagonal direct sum acting on `ℝ^{n₁+n₂}`.
pub fn direct_sum(a: &MatrixAlgebra, b: &MatrixAlgebra) -> MatrixAlgebra {
    let (na, nb) = (a.ambient_dim(), b.ambient_dim());
    let n = na + nb;
    let mut basis = Vec::new();
    for x in a.basis() {
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (na, na)).copy_from(x);
        basis.push(m);
    }
    for y in b.basis() {
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((na, na), (nb, nb)).copy_from(y);
        basis.push(m);
    }
    MatrixAlgebra::from_basis(n, basis, a.tol()).expect("direct sum of closed algebras")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closure_of_rotation_generators() {
        let so3 = so_basis(3);
        assert_eq!(lie_closure(&so3[..1], DEFAULT_TOL).unwrap().dim(), 1);
        assert_eq!(lie_closure(&so3[..2], DEFAULT_TOL).unwrap().dim(), 3);
    }

    #[test]
    fn closure_is_idempotent() {
        let alg = lie_closure(&so_basis(4)[..2], DEFAULT_TOL).unwrap();
        let again = lie_closure(alg.basis(), DEFAULT_TOL).unwrap();
        assert_eq!(alg.dim(), again.dim());
    }

    #[test]
    fn decompose_round_trip() {
        let (_, frame) = adapted_lorentz_frame(3);
        let x = so_basis(3)[1].clone() * 0.7 - so_basis(3)[2].clone() * 1.3;
        let e = StabElement::new(0.4, x, DVector::from_vec(vec![1.0, -2.0, 0.5]));
        let back = stab_decompose(&e.embed(&frame), &frame).unwrap();
        assert_relative_eq!(back.a, e.a, epsilon = 1e-12);
        assert!(linalg::max_abs(&(back.x - &e.x)) < 1e-12);
        assert!(linalg::max_abs_vec(&(back.v - &e.v)) < 1e-12);
    }

    #[test]
    fn embedded_elements_are_skew() {
        let (space, frame) = adapted_lorentz_frame(2);
        let e = StabElement::new(
            1.5,
            so_basis(2)[0].clone(),
            DVector::from_vec(vec![0.3, 2.0]),
        );
        assert!(space.skew_residual(&e.embed(&frame)) < 1e-13);
    }

    #[test]
    fn boost_is_rejected_outside_stabiliser() {
        let (_, frame) = adapted_lorentz_frame(1);
        // maps e₋ to V₀
        let mut m = DMatrix::zeros(3, 3);
        m[(1, 0)] = 1.0;
        m[(2, 1)] = -1.0;
        assert!(matches!(
            stab_decompose(&m, &frame),
            Err(Error::NotInStabiliser { .. })
        ));
    }

    #[test]
    fn bbi_dimensions() {
        let params = BbiParams::default();
        let t2 = bbi_type(BbiKind::Type2, &so_algebra(2), &params).unwrap();
        assert_eq!(t2.dim(), 3);
        let t1 = bbi_type(BbiKind::Type1, &so_algebra(3), &params).unwrap();
        assert_eq!(t1.dim(), 7);
        let p3 = BbiParams {
            f: Some(DMatrix::from_element(1, 1, 1.0)),
            t0: None,
        };
        let t3 = bbi_type(BbiKind::Type3, &so_algebra(2), &p3).unwrap();
        assert_eq!(t3.dim(), 3);
    }

    #[test]
    fn type3_needs_a_centre() {
        let p3 = BbiParams {
            f: Some(DMatrix::zeros(1, 0)),
            t0: None,
        };
        assert!(bbi_type(BbiKind::Type3, &so_algebra(3), &p3).is_err());
    }

    #[test]
    fn type4_with_rotation_and_screw() {
        // 𝔤₀ = 𝔰𝔬(2) on the first two axes of ℝ³, T₀ = those axes, f(Z) = e₃
        let mut j = DMatrix::zeros(3, 3);
        j[(0, 1)] = 1.0;
        j[(1, 0)] = -1.0;
        let g0 = MatrixAlgebra::from_basis(3, vec![j], DEFAULT_TOL).unwrap();
        let e = |i: usize| {
            let mut v = DVector::zeros(3);
            v[i] = 1.0;
            v
        };
        let t0 = SubspaceBasis::new(3, vec![e(0), e(1)], DEFAULT_TOL).unwrap();
        let mut f = DMatrix::zeros(3, 1);
        f[(2, 0)] = 1.0;
        let params = BbiParams {
            f: Some(f),
            t0: Some(t0),
        };
        let alg = bbi_type(BbiKind::Type4, &g0, &params).unwrap();
        assert_eq!(alg.dim(), 3);
        let (space, _) = adapted_lorentz_frame(3);
        let line = invariant_null_line_search(&alg, &space).unwrap();
        assert!(line.relative_distance(&e5(0)) < 1e-9);
    }

    fn e5(i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(5);
        v[i] = 1.0;
        v
    }

    #[test]
    fn translational_ideal_of_full_stabiliser() {
        let (_, frame) = adapted_lorentz_frame(3);
        let alg = bbi_type(BbiKind::Type2, &so_algebra(3), &BbiParams::default()).unwrap();
        let t = translational_ideal(&alg, &frame).unwrap();
        assert_eq!(t.dim(), 3);
        assert!(ideal_residual(&alg, &frame, &t).unwrap() < 1e-9);
        let linear = MatrixAlgebra::from_basis(
            5,
            so_basis(3)
                .iter()
                .map(|x| StabElement::new(0.0, x.clone(), DVector::zeros(3)).embed(&frame))
                .collect(),
            DEFAULT_TOL,
        )
        .unwrap();
        assert_eq!(translational_ideal(&linear, &frame).unwrap().dim(), 0);
    }

    #[test]
    fn conjugation_removes_translational_parts() {
        let (_, frame) = adapted_lorentz_frame(3);
        let v0 = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let basis: Vec<DMatrix<f64>> = so_basis(3)
            .into_iter()
            .map(|x| {
                let xv = &x * &v0;
                StabElement::new(0.0, x, xv).embed(&frame)
            })
            .collect();
        let alg = MatrixAlgebra::from_basis(5, basis, DEFAULT_TOL).unwrap();
        let conj = conjugate_by_translation(&alg, &v0, &frame).unwrap();
        for m in conj.basis() {
            let e = stab_decompose(m, &frame).unwrap();
            assert!(linalg::max_abs_vec(&e.v) < 1e-12);
        }
        let same = conjugate_by_translation(&alg, &DVector::zeros(3), &frame).unwrap();
        assert_eq!(same, alg);
    }

    #[test]
    fn bracket_formula_matches_commutator() {
        let (_, frame) = adapted_lorentz_frame(2);
        let j = so_basis(2)[0].clone();
        let a = StabElement::new(0.7, j.clone() * 2.0, DVector::from_vec(vec![1.0, 3.0]));
        let b = StabElement::new(-1.1, j * -0.5, DVector::from_vec(vec![-2.0, 0.25]));
        let direct = linalg::bracket(&a.embed(&frame), &b.embed(&frame));
        assert!(linalg::max_abs(&(direct - a.bracket(&b).embed(&frame))) < 1e-12);
    }

    #[test]
    fn probe_splits_two_planes() {
        let so2 = so_algebra(2);
        let alg = direct_sum(&so2, &so2);
        let res = decomposability_probe(&alg, &QuadraticSpace::standard(0, 4)).unwrap();
        assert_eq!(res.witness.map(|w| w.dim()), Some(2));
        let irreducible =
            decomposability_probe(&so_algebra(3), &QuadraticSpace::standard(0, 3)).unwrap();
        assert!(irreducible.witness.is_none());
    }

    #[test]
    fn full_lorentz_algebra_has_no_null_line() {
        let (space, _) = adapted_lorentz_frame(1);
        let g = space.metric().clone();
        // so(1,2) = {M : Mᵀg + gM = 0}
        let basis: Vec<DMatrix<f64>> = so_basis(3).into_iter().map(|s| g.clone() * s).collect();
        let alg = lie_closure(&basis, DEFAULT_TOL).unwrap();
        assert_eq!(alg.dim(), 3);
        assert!(invariant_null_line_search(&alg, &space).is_none());
    }

    #[test]
    fn berger_labels() {
        assert_eq!(berger_label(1, 2, 3), vec!["so(1,2)".to_string()]);
        assert!(berger_label(0, 7, 14).contains(&"g2".to_string()));
        assert!(berger_label(4, 4, 21).contains(&"spin(3,4)".to_string()));
    }
}
