use conelab::charts::ScalarField;
use conelab::jet::Jet;
use conelab::null_plane::{
    alpha_beta, build_metric, fundamental_residuals, null_plane_data_from_toml, solve_eta,
    transform_forms, verify_null_plane, PlaneFrame,
};
use conelab::Error;
use proptest::prelude::*;
use std::sync::Arc;

fn document(a: f64, b: f64, c: f64, d: f64, e: f64) -> String {
    format!(
        r#"
        label = "random"
        m0_dim = 1
        parameters = {{ a = {a}, b = {b}, c = {c}, d = {d}, e = {e} }}
        f1 = "a + b * u^2"
        f2 = "c * x1 * s + d * sin(u)"
        c = ["x1 * u"]
        g0 = [["1 + e * u^2"]]
        "#
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn solved_metric_satisfies_every_identity(
        a in 0.5..2.0f64, b in -0.1..0.5f64, c in -1.0..1.0f64, d in -1.0..1.0f64, e in 0.0..1.0f64,
    ) {
        let data = null_plane_data_from_toml(&document(a, b, c, d, e)).unwrap();
        let eta = solve_eta(&data).unwrap();
        let report = verify_null_plane(&eta, 6, 11).unwrap();
        prop_assert_eq!(report.signature, (1, 3));
        prop_assert!(report.system.max() < 1e-9, "{:?}", report.system);
        prop_assert!(report.fundamental.max() < 1e-8, "{:?}", report.fundamental);
        prop_assert!(report.alpha_beta < 1e-8);
        prop_assert!(report.normalization < 1e-8);
        prop_assert!(report.cone.max() < 1e-8);
    }

    #[test]
    fn frame_changes_keep_the_structure_equations(k in -1.0..1.0f64, t in -0.5..0.5f64) {
        let data = null_plane_data_from_toml(&document(1.0, 0.2, 0.5, 0.3, 0.4)).unwrap();
        let eta = solve_eta(&data).unwrap();
        let chart = build_metric(&eta, 6, 3).unwrap();
        let p = [0.2, t, -0.3, 1.1];
        let ab = alpha_beta(&chart, &eta, &p).unwrap();
        let f: ScalarField = Arc::new(move |x: &[Jet]| x[3].scale(k));
        let h: ScalarField = Arc::new(move |x: &[Jet]| &x[0] * k);
        let frame = PlaneFrame::coordinate(1);
        let (alpha, beta) = transform_forms(&chart, &frame, &f, &h, &ab.alpha, &ab.beta, &p).unwrap();
        let frame = frame.changed(f, h);
        let r = fundamental_residuals(&chart, &frame, &alpha, &beta, &p).unwrap();
        for value in [r.nab_v, r.nab_z, r.d_v_flat, r.d_z_flat, r.bracket, r.lie_v, r.lie_z, r.geodesic] {
            prop_assert!(value < 1e-8, "{:?}", r);
        }
    }
}

#[test]
fn vanishing_f1_is_rejected_with_its_location() {
    let text = document(1.0, 0.0, 0.0, 0.0, 0.0).replace("a + b * u^2", "u - 1");
    let data = null_plane_data_from_toml(&text).unwrap();
    match solve_eta(&data) {
        Err(Error::Precondition { point, .. }) => assert!((point[0] - 1.0).abs() < 0.01),
        other => panic!("expected a precondition error, got {other:?}"),
    }
}

#[test]
fn drifting_eta_trips_the_cone_detector() {
    let data = null_plane_data_from_toml(&document(1.0, 0.2, 0.5, 0.3, 0.4)).unwrap();
    let eta = solve_eta(&data).unwrap().with_t_drift(0.1);
    let report = verify_null_plane(&eta, 6, 11).unwrap();
    assert!(report.cone.parallel > 1e-3);
}
