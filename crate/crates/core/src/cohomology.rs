//! First Lie algebra cohomology with values in a finite-dimensional module.

use crate::error::{Error, Result};
use crate::lie_matrix::MatrixAlgebra;
use crate::linalg::{self, DEFAULT_TOL};
use crate::pseudo_linear::{QuadraticSpace, SubspaceBasis};
use nalgebra::{DMatrix, DVector};

const REPRESENTATION_TOL: f64 = 1e-9;

/// Structure constants `c[a][b][k]` with `[X_a, X_b] = Σ_k c[a][b][k] X_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    dim: usize,
    data: Vec<f64>,
}

impl StructureConstants {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<StructureConstants> {
        if data.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim * dim,
                found: data.len(),
            });
        }
        Ok(StructureConstants { dim, data })
    }

    pub fn zero(dim: usize) -> StructureConstants {
        StructureConstants {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, a: usize, b: usize, k: usize) -> f64 {
        self.data[(a * self.dim + b) * self.dim + k]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for k in 0..n {
                    worst = worst.max((self.get(a, b, k) + self.get(b, a, k)).abs());
                }
            }
        }
        worst
    }

    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for m in 0..n {
                        let mut s = 0.0;
                        for k in 0..n {
                            s += self.get(b, c, k) * self.get(a, k, m)
                                + self.get(c, a, k) * self.get(b, k, m)
                                + self.get(a, b, k) * self.get(c, k, m);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// `B(X_a, X_b) = tr(ad X_a ad X_b)`.
    pub fn killing_form(&self) -> DMatrix<f64> {
        let n = self.dim;
        let ad: Vec<DMatrix<f64>> = (0..n)
            .map(|a| DMatrix::from_fn(n, n, |m, k| self.get(a, k, m)))
            .collect();
        DMatrix::from_fn(n, n, |a, b| (&ad[a] * &ad[b]).trace())
    }

    /// Nondegenerate Killing form.
    pub fn is_semisimple(&self) -> bool {
        if self.dim == 0 {
            return true;
        }
        let k = self.killing_form();
        linalg::rank(&k, DEFAULT_TOL) == self.dim
    }
}

/// Structure constants of `alg` in its stored basis.
pub fn structure_constants(alg: &MatrixAlgebra) -> Result<StructureConstants> {
    let d = alg.dim();
    if d == 0 {
        return Ok(StructureConstants::zero(0));
    }
    let flat = alg.flat_matrix();
    let sv = linalg::full_svd(&flat).singular;
    let cond = sv[0] / sv[d - 1];
    if !cond.is_finite() || cond > 1e10 {
        return Err(Error::Numerical(format!(
            "algebra basis is ill-conditioned (condition {cond:e})"
        )));
    }
    let basis = alg.basis();
    let mut data = vec![0.0; d * d * d];
    for a in 0..d {
        for b in 0..d {
            let br = linalg::bracket(&basis[a], &basis[b]);
            let target = linalg::flatten(&br);
            let coeffs = linalg::lstsq(&flat, &target);
            let residual = linalg::max_abs_vec(&(&flat * &coeffs - &target));
            if residual > REPRESENTATION_TOL * br.norm().max(1.0) {
                return Err(Error::Numerical(format!(
                    "bracket re-expansion residual {residual:e}"
                )));
            }
            for k in 0..d {
                data[(a * d + b) * d + k] = coeffs[k];
            }
        }
    }
    StructureConstants::new(d, data)
}

/// A representation `ρ` of an abstract Lie algebra on `ℝ^mod_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieModule {
    constants: StructureConstants,
    action: Vec<DMatrix<f64>>,
    mod_dim: usize,
}

impl LieModule {
    /// Checks antisymmetry, Jacobi and the representation property.
    pub fn new(
        constants: StructureConstants,
        action: Vec<DMatrix<f64>>,
        mod_dim: usize,
    ) -> Result<LieModule> {
        let d = constants.dim();
        if action.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: action.len(),
            });
        }
        if action
            .iter()
            .any(|m| m.nrows() != mod_dim || m.ncols() != mod_dim)
        {
            return Err(Error::NotARepresentation(format!(
                "action matrices must be {mod_dim}×{mod_dim}"
            )));
        }
        let anti = constants.antisymmetry_residual();
        if anti > REPRESENTATION_TOL {
            return Err(Error::NotARepresentation(format!(
                "structure constants not antisymmetric ({anti:e})"
            )));
        }
        let jac = constants.jacobi_residual();
        if jac > REPRESENTATION_TOL {
            return Err(Error::NotARepresentation(format!(
                "Jacobi identity fails ({jac:e})"
            )));
        }
        let module = LieModule {
            constants,
            action,
            mod_dim,
        };
        let rep = module.representation_residual();
        if rep > REPRESENTATION_TOL {
            return Err(Error::NotARepresentation(format!(
                "ρ([X,Y]) ≠ [ρX,ρY] (residual {rep:e})"
            )));
        }
        Ok(module)
    }

    /// `alg` acting on its ambient space by matrix multiplication.
    pub fn standard(alg: &MatrixAlgebra) -> Result<LieModule> {
        LieModule::new(
            structure_constants(alg)?,
            alg.basis().to_vec(),
            alg.ambient_dim(),
        )
    }

    /// `alg` acting on itself by the adjoint representation.
    pub fn adjoint(alg: &MatrixAlgebra) -> Result<LieModule> {
        let c = structure_constants(alg)?;
        let d = c.dim();
        let action = (0..d)
            .map(|a| DMatrix::from_fn(d, d, |m, k| c.get(a, k, m)))
            .collect();
        LieModule::new(c, action, d)
    }

    /// `ℝ^mod_dim` with the zero action.
    pub fn trivial(constants: StructureConstants, mod_dim: usize) -> Result<LieModule> {
        let action = vec![DMatrix::zeros(mod_dim, mod_dim); constants.dim()];
        LieModule::new(constants, action, mod_dim)
    }

    pub fn alg_dim(&self) -> usize {
        self.constants.dim()
    }

    pub fn mod_dim(&self) -> usize {
        self.mod_dim
    }

    pub fn constants(&self) -> &StructureConstants {
        &self.constants
    }

    pub fn action(&self) -> &[DMatrix<f64>] {
        &self.action
    }

    pub fn representation_residual(&self) -> f64 {
        let d = self.alg_dim();
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let mut lhs = DMatrix::zeros(self.mod_dim, self.mod_dim);
                for k in 0..d {
                    lhs += &self.action[k] * self.constants.get(a, b, k);
                }
                let rhs = linalg::bracket(&self.action[a], &self.action[b]);
                worst = worst.max(linalg::max_abs(&(lhs - rhs)));
            }
        }
        worst
    }

    /// Max-norm of `ρ(X_a)φ(X_b) − ρ(X_b)φ(X_a) − φ([X_a,X_b])` over basis pairs;
    /// row `a` of `phi` is `φ(X_a)`.
    pub fn cocycle_residual(&self, phi: &DMatrix<f64>) -> f64 {
        let d = self.alg_dim();
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in (a + 1)..d {
                let mut r = &self.action[a] * phi.row(b).transpose()
                    - &self.action[b] * phi.row(a).transpose();
                for k in 0..d {
                    r -= phi.row(k).transpose() * self.constants.get(a, b, k);
                }
                worst = worst.max(linalg::max_abs_vec(&r));
            }
        }
        worst
    }

    /// `dv : X ↦ ρ(X)v`, as an `alg_dim × mod_dim` array.
    pub fn coboundary(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let d = self.alg_dim();
        let mut phi = DMatrix::zeros(d, self.mod_dim);
        for a in 0..d {
            phi.set_row(a, &(&self.action[a] * v).transpose());
        }
        phi
    }

    fn cocycle_operator(&self) -> DMatrix<f64> {
        let d = self.alg_dim();
        let m = self.mod_dim;
        let pairs: Vec<(usize, usize)> = (0..d)
            .flat_map(|a| ((a + 1)..d).map(move |b| (a, b)))
            .collect();
        // unknown φ flattened row-major: index a*m + i
        let mut op = DMatrix::zeros(pairs.len() * m, d * m);
        for (p, &(a, b)) in pairs.iter().enumerate() {
            for i in 0..m {
                let row = p * m + i;
                for j in 0..m {
                    op[(row, b * m + j)] += self.action[a][(i, j)];
                    op[(row, a * m + j)] -= self.action[b][(i, j)];
                }
                for k in 0..d {
                    op[(row, k * m + i)] -= self.constants.get(a, b, k);
                }
            }
        }
        op
    }
}

/// `Z¹`, `B¹` and a complement of `B¹` in `Z¹`.
#[derive(Debug, Clone)]
pub struct CohomologyResult {
    pub z1_basis: Vec<DMatrix<f64>>,
    pub b1_basis: Vec<DMatrix<f64>>,
    pub h1_dim: usize,
    pub h1_complement: Vec<DMatrix<f64>>,
}

impl CohomologyResult {
    pub fn z1_dim(&self) -> usize {
        self.z1_basis.len()
    }

    pub fn b1_dim(&self) -> usize {
        self.b1_basis.len()
    }
}

fn to_cochain(v: &DVector<f64>, d: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, m, |a, i| v[a * m + i])
}

/// First cohomology of `module`.
pub fn cohomology(module: &LieModule) -> Result<CohomologyResult> {
    let rep = module.representation_residual();
    if rep > REPRESENTATION_TOL {
        return Err(Error::NotARepresentation(format!("residual {rep:e}")));
    }
    let d = module.alg_dim();
    let m = module.mod_dim();
    let total = d * m;
    if total == 0 {
        return Ok(CohomologyResult {
            z1_basis: Vec::new(),
            b1_basis: Vec::new(),
            h1_dim: 0,
            h1_complement: Vec::new(),
        });
    }
    let op = module.cocycle_operator();
    let scale = op.norm().max(1.0);
    let z1 = if op.nrows() == 0 {
        DMatrix::identity(total, total)
    } else {
        linalg::kernel_with_reference(&op, DEFAULT_TOL, Some(scale))
    };
    let mut coboundary_map = DMatrix::zeros(total, m);
    for i in 0..m {
        let mut e = DVector::zeros(m);
        e[i] = 1.0;
        let phi = module.coboundary(&e);
        for a in 0..d {
            for j in 0..m {
                coboundary_map[(a * m + j, i)] = phi[(a, j)];
            }
        }
    }
    let b1 = image_with_reference(&coboundary_map, scale);
    // complement of B¹ inside Z¹ under the Frobenius pairing
    let projected = &z1 - &b1 * (b1.transpose() * &z1);
    let complement = image_with_reference(&projected, 1.0);
    let h1_dim = z1.ncols().saturating_sub(b1.ncols());
    let cols = |q: &DMatrix<f64>| -> Vec<DMatrix<f64>> {
        q.column_iter()
            .map(|c| to_cochain(&c.into_owned(), d, m))
            .collect()
    };
    let h1_complement = cols(&complement);
    if h1_complement.len() != h1_dim {
        return Err(Error::Numerical(format!(
            "complement of B¹ has dimension {} instead of {h1_dim}",
            h1_complement.len()
        )));
    }
    Ok(CohomologyResult {
        z1_basis: cols(&z1),
        b1_basis: cols(&b1),
        h1_dim,
        h1_complement,
    })
}

fn image_with_reference(a: &DMatrix<f64>, reference: f64) -> DMatrix<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let svd = linalg::full_svd(&a.transpose());
    let r = linalg::rank_with_reference(&svd.singular, DEFAULT_TOL, Some(reference));
    svd.v.columns(0, r).into_owned()
}

/// `V^𝔤`, the common kernel of the action.
pub fn invariants(module: &LieModule) -> SubspaceBasis {
    let m = module.mod_dim();
    if module.alg_dim() == 0 {
        return SubspaceBasis::span_of_columns(&DMatrix::identity(m, m), DEFAULT_TOL);
    }
    let stacked = stack_rows(module.action(), m);
    let scale = stacked.norm().max(1.0);
    let k = linalg::kernel_with_reference(&stacked, DEFAULT_TOL, Some(scale));
    SubspaceBasis::span_of_columns(&k, DEFAULT_TOL)
}

fn stack_rows(mats: &[DMatrix<f64>], cols: usize) -> DMatrix<f64> {
    let rows: usize = mats.iter().map(|m| m.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for m in mats {
        out.view_mut((r, 0), (m.nrows(), cols)).copy_from(m);
        r += m.nrows();
    }
    out
}

/// The induced action on `V/sub`, realised on the Euclidean orthogonal complement of `sub`.
pub fn quotient_module(module: &LieModule, sub: &SubspaceBasis) -> Result<LieModule> {
    let m = module.mod_dim();
    if sub.ambient_dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: sub.ambient_dim(),
        });
    }
    let q = sub.orthonormal();
    let mut worst = 0.0f64;
    for rho in module.action() {
        for v in q.column_iter() {
            let image = rho * v;
            let r = linalg::max_abs_vec(&linalg::residual_outside(&q, &image));
            worst = worst.max(r / rho.norm().max(1.0));
        }
    }
    if worst > 1e-9 {
        return Err(Error::NotInvariant { residual: worst });
    }
    let c = sub.complement().orthonormal();
    let action = module
        .action()
        .iter()
        .map(|rho| c.transpose() * rho * &c)
        .collect();
    LieModule::new(module.constants().clone(), action, c.ncols())
}

/// `dim S₀(𝔤₀) + dim 𝔷(𝔤₀) + dim ker(𝔤₀)` for `𝔤₀ ⊂ 𝔰𝔬(n)`.
pub fn remark_h1_dimension(g0: &MatrixAlgebra, n: usize) -> Result<usize> {
    if g0.ambient_dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: g0.ambient_dim(),
        });
    }
    let closure = g0.closure_residual();
    if closure > REPRESENTATION_TOL {
        return Err(Error::InvalidInput(format!(
            "𝔤₀ is not closed (residual {closure:e})"
        )));
    }
    let euclid = QuadraticSpace::standard(0, n.max(1));
    if n > 0
        && g0
            .basis()
            .iter()
            .any(|x| euclid.skew_residual(x) > 1e-10 * x.norm().max(1.0))
    {
        return Err(Error::InvalidInput(format!(
            "𝔤₀ is not contained in 𝔰𝔬({n})"
        )));
    }
    Ok(
        symmetric_commutant_dim(g0).saturating_sub(1)
            + g0.centre().dim()
            + g0.common_kernel().dim(),
    )
}

/// Dimension of the symmetric matrices commuting with every element of `alg`.
pub fn symmetric_commutant_dim(alg: &MatrixAlgebra) -> usize {
    let n = alg.ambient_dim();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let sym = |p: usize| {
        let (i, j) = pairs[p];
        let mut s = DMatrix::zeros(n, n);
        s[(i, j)] = 1.0;
        s[(j, i)] = 1.0;
        s
    };
    if alg.dim() == 0 {
        return pairs.len();
    }
    let mut op = DMatrix::zeros(alg.dim() * n * n, pairs.len());
    for p in 0..pairs.len() {
        let s = sym(p);
        for (a, x) in alg.basis().iter().enumerate() {
            let c = linalg::bracket(x, &s);
            for (e, val) in linalg::flatten(&c).iter().enumerate() {
                op[(a * n * n + e, p)] = *val;
            }
        }
    }
    let scale = op.norm().max(1.0);
    linalg::kernel_with_reference(&op, DEFAULT_TOL, Some(scale)).ncols()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_matrix::{bbi_type, direct_sum, so_algebra, BbiKind, BbiParams};

    fn solvable_2d() -> MatrixAlgebra {
        // [e1, e2] = e2
        let e1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let e2 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        MatrixAlgebra::from_basis(2, vec![e1, e2], DEFAULT_TOL).unwrap()
    }

    #[test]
    fn structure_constants_of_small_algebras() {
        let c = structure_constants(&solvable_2d()).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for k in 0..2 {
                    let expected = match (a, b, k) {
                        (0, 1, 1) => 1.0,
                        (1, 0, 1) => -1.0,
                        _ => 0.0,
                    };
                    assert!((c.get(a, b, k) - expected).abs() < 1e-12);
                }
            }
        }
        let so3 = structure_constants(&so_algebra(3)).unwrap();
        let abs: Vec<f64> = so3
            .data()
            .iter()
            .map(|x| x.abs())
            .filter(|x| *x > 1e-12)
            .collect();
        assert_eq!(abs.len(), 6);
        assert!(abs.iter().all(|x| (x - 1.0).abs() < 1e-12));
        assert!(so3.jacobi_residual() < 1e-12);
        let abelian =
            MatrixAlgebra::from_basis(2, vec![DMatrix::identity(2, 2)], DEFAULT_TOL).unwrap();
        assert!(structure_constants(&abelian)
            .unwrap()
            .data()
            .iter()
            .all(|x| *x == 0.0));
    }

    #[test]
    fn so3_standard_module_has_no_h1() {
        let res = cohomology(&LieModule::standard(&so_algebra(3)).unwrap()).unwrap();
        assert_eq!((res.z1_dim(), res.b1_dim(), res.h1_dim), (3, 3, 0));
    }

    #[test]
    fn trivial_line_over_abelian_line() {
        let c = StructureConstants::zero(1);
        let res = cohomology(&LieModule::trivial(c, 1).unwrap()).unwrap();
        assert_eq!((res.z1_dim(), res.b1_dim(), res.h1_dim), (1, 0, 1));
        assert_eq!(res.h1_complement.len(), 1);
    }

    #[test]
    fn rejects_non_representation() {
        let so3 = so_algebra(3);
        let c = structure_constants(&so3).unwrap();
        let mut action = so3.basis().to_vec();
        action[0] *= 2.0;
        assert!(matches!(
            LieModule::new(c, action, 3),
            Err(Error::NotARepresentation(_))
        ));
    }

    #[test]
    fn cocycles_satisfy_identity() {
        let g = bbi_type(BbiKind::Type2, &so_algebra(2), &BbiParams::default()).unwrap();
        let module = LieModule::standard(&g).unwrap();
        let res = cohomology(&module).unwrap();
        for z in &res.z1_basis {
            assert!(module.cocycle_residual(z) < 1e-9);
        }
        assert_eq!(res.b1_dim(), module.mod_dim() - invariants(&module).dim());
    }

    #[test]
    fn remark_dimensions() {
        assert_eq!(remark_h1_dimension(&so_algebra(2), 2).unwrap(), 1);
        assert_eq!(remark_h1_dimension(&so_algebra(3), 3).unwrap(), 0);
        assert_eq!(remark_h1_dimension(&MatrixAlgebra::zero(1), 1).unwrap(), 1);
        assert!(remark_h1_dimension(&solvable_2d(), 2).is_err());
    }

    #[test]
    fn type2_cohomology_matches_remark() {
        let battery = [
            so_algebra(2),
            so_algebra(3),
            direct_sum(&so_algebra(2), &so_algebra(3)),
            MatrixAlgebra::zero(1),
        ];
        for g0 in battery {
            let g = bbi_type(BbiKind::Type2, &g0, &BbiParams::default()).unwrap();
            let h1 = cohomology(&LieModule::standard(&g).unwrap())
                .unwrap()
                .h1_dim;
            assert_eq!(
                h1,
                remark_h1_dimension(&g0, g0.ambient_dim()).unwrap(),
                "g0 dim {}",
                g0.dim()
            );
        }
    }

    #[test]
    fn quotient_edge_cases() {
        let module = LieModule::standard(&so_algebra(3)).unwrap();
        let same = quotient_module(&module, &SubspaceBasis::zero(3)).unwrap();
        assert_eq!(same.mod_dim(), 3);
        let full = SubspaceBasis::span_of_columns(&DMatrix::identity(3, 3), DEFAULT_TOL);
        assert_eq!(quotient_module(&module, &full).unwrap().mod_dim(), 0);
        let line =
            SubspaceBasis::span_of(3, &[DVector::from_vec(vec![1.0, 0.0, 0.0])], DEFAULT_TOL);
        assert!(matches!(
            quotient_module(&module, &line),
            Err(Error::NotInvariant { .. })
        ));
    }

    #[test]
    fn killing_form_detects_semisimplicity() {
        assert!(structure_constants(&so_algebra(3)).unwrap().is_semisimple());
        assert!(!structure_constants(&solvable_2d()).unwrap().is_semisimple());
    }
}
