use conelab::cohomology::{cohomology, invariants, structure_constants, LieModule};
use conelab::lie_matrix::{
    adapted_lorentz_frame, bbi_type, conjugate_by_translation, direct_sum,
    invariant_null_line_search, lie_closure, so_algebra, translational_ideal, BbiKind, BbiParams,
    MatrixAlgebra,
};
use conelab::pseudo_linear::QuadraticSpace;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// `η`-skew matrix built from an arbitrary square matrix.
fn skew_for(eta: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    let w = a - a.transpose();
    eta.clone().try_inverse().unwrap() * w
}

fn lorentz(n: usize) -> DMatrix<f64> {
    let mut eta = DMatrix::identity(n, n);
    eta[(0, 0)] = -1.0;
    eta
}

fn square(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closure_of_skew_generators_stays_skew_and_closed(a in square(4), b in square(4)) {
        let eta = lorentz(4);
        let space = QuadraticSpace::new(eta.clone()).unwrap();
        let alg = lie_closure(&[skew_for(&eta, &a), skew_for(&eta, &b)], 1e-9).unwrap();
        prop_assert!(alg.dim() <= 6);
        prop_assert!(alg.closure_residual() < 1e-9);
        for x in alg.basis() {
            prop_assert!(space.skew_residual(x) < 1e-10);
        }
    }

    #[test]
    fn structure_constants_satisfy_jacobi(a in square(3), b in square(3)) {
        let eta = DMatrix::identity(3, 3);
        let alg = lie_closure(&[skew_for(&eta, &a), skew_for(&eta, &b)], 1e-9).unwrap();
        let c = structure_constants(&alg).unwrap();
        prop_assert!(c.antisymmetry_residual() < 1e-10);
        prop_assert!(c.jacobi_residual() < 1e-9);
    }

    #[test]
    fn coboundaries_are_cocycles(v in prop::collection::vec(-1.0..1.0f64, 3)) {
        let module = LieModule::standard(&so_algebra(3)).unwrap();
        let phi = module.coboundary(&DVector::from_vec(v));
        prop_assert!(module.cocycle_residual(&phi) < 1e-12);
    }

    #[test]
    fn translation_conjugation_keeps_the_null_line(v in prop::collection::vec(-1.0..1.0f64, 2)) {
        let g0 = so_algebra(2);
        let alg = bbi_type(BbiKind::Type1, &g0, &BbiParams::default()).unwrap();
        let (space, frame) = adapted_lorentz_frame(2);
        let conj = conjugate_by_translation(&alg, &DVector::from_vec(v), &frame).unwrap();
        prop_assert_eq!(conj.dim(), alg.dim());
        prop_assert!(conj.closure_residual() < 1e-9);
        let line = invariant_null_line_search(&conj, &space).expect("null line");
        let l = &line.vectors()[0];
        prop_assert!(space.inner(l, l).abs() < 1e-9);
    }
}

#[test]
fn bbi_types_fix_a_null_line() {
    let g0 = so_algebra(3);
    let (space, frame) = adapted_lorentz_frame(3);
    for kind in [BbiKind::Type1, BbiKind::Type2] {
        let alg = bbi_type(kind, &g0, &BbiParams::default()).unwrap();
        assert!(alg.closure_residual() < 1e-9, "{kind:?}");
        let line = invariant_null_line_search(&alg, &space).expect("null line");
        let l = &line.vectors()[0];
        let along = l.dot(&frame.e_minus).abs() / l.norm();
        assert!((along - 1.0).abs() < 1e-8, "{kind:?}");
        assert_eq!(translational_ideal(&alg, &frame).unwrap().dim(), 3);
    }
}

#[test]
fn trivial_module_cohomology_is_the_abelianisation() {
    // so(2) + so(3): abelianisation has dimension 1
    let alg = direct_sum(&so_algebra(2), &so_algebra(3));
    let c = structure_constants(&alg).unwrap();
    let module = LieModule::trivial(c, 1).unwrap();
    assert_eq!(cohomology(&module).unwrap().h1_dim, 1);
}

#[test]
fn semisimple_standard_module_has_no_cohomology() {
    let module = LieModule::standard(&so_algebra(3)).unwrap();
    let h = cohomology(&module).unwrap();
    assert_eq!(h.h1_dim, 0);
    assert_eq!(h.z1_dim(), h.b1_dim());
    assert_eq!(invariants(&module).dim(), 0);
}

#[test]
fn so2_is_abelian_with_trivial_derived_algebra() {
    let zero = MatrixAlgebra::zero(2);
    assert_eq!(zero.dim(), 0);
    let alg = so_algebra(2);
    assert!(alg.is_abelian());
    assert_eq!(alg.centre().dim(), 1);
    assert_eq!(alg.derived().dim(), 0);
}
