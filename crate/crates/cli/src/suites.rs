//! Verification suites. Each suite is a list of independent jobs run on
//! the rayon pool; the report sorts the resulting checks by id.

use crate::chart_ref;
use crate::report::{CheckKind, CheckRecord, SuiteReport};
use crate::settings::Settings;
use conelab::charts::{self, curvature_jet, MetricChart};
use conelab::cohomology::{cohomology, quotient_module, remark_h1_dimension, LieModule};
use conelab::cone_constructions::{
    cone, cone_identity_residuals, double_warped, doubled_derivative_residuals,
    exponential_extension, psi_residual,
};
use conelab::holonomy::{
    ambrose_singer_span, doubled_null_frame, loop_span, plane_wave_exp_reference_generators,
    span_compare, stabilizer_analysis, translation_orthogonality_residual, DEFAULT_STEPS_PER_UNIT,
    LOOP_SIDES, LOOP_TOL,
};
use conelab::lie_matrix::{
    adapted_lorentz_frame, bbi_type, direct_sum, so_algebra, BbiKind, BbiParams, MatrixAlgebra,
};
use conelab::linalg;
use conelab::null_plane::{
    alpha_beta, build_metric, cone_null_plane_check, fundamental_residuals,
    null_plane_data_from_toml, solve_eta, verify_null_plane, PlaneFrame,
};
use conelab::pseudo_linear::SubspaceBasis;
use conelab::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::path::PathBuf;

pub const SUITES: [&str; 6] = [
    "cone-identities",
    "doubled-derivatives",
    "psi-isometry",
    "holonomy-catalog",
    "cohomology",
    "null-plane",
];

/// Threshold for closed-form identity residuals.
pub const IDENTITY_TOL: f64 = 1e-8;
pub const FLAT_CONE_TOL: f64 = 1e-9;
pub const PSI_TOL: f64 = 1e-10;
pub const SYSTEM_TOL: f64 = 1e-9;
pub const PROJECTION_TOL: f64 = 1e-6;
pub const LOOP_DISTANCE_TOL: f64 = 1e-5;
/// Negative controls must exceed this.
pub const DETECTOR_FLOOR: f64 = 1e-3;

type Job = Box<dyn Fn() -> Vec<CheckRecord> + Send + Sync>;
type NamedChart = (&'static str, fn() -> MetricChart);

fn residual(
    id: String,
    anchor: &str,
    threshold: f64,
    f: impl FnOnce() -> Result<f64>,
) -> CheckRecord {
    match f() {
        Ok(v) => CheckRecord::below(id, anchor, v, threshold),
        Err(e) => CheckRecord::failed(id, anchor, CheckKind::ResidualBelow, threshold, e),
    }
}

fn control(id: String, anchor: &str, f: impl FnOnce() -> Result<f64>) -> CheckRecord {
    match f() {
        Ok(v) => CheckRecord::above(id, anchor, v, DETECTOR_FLOOR),
        Err(e) => CheckRecord::failed(id, anchor, CheckKind::ResidualAbove, DETECTOR_FLOOR, e),
    }
}

fn dimension(
    id: String,
    anchor: &str,
    expected: usize,
    f: impl FnOnce() -> Result<usize>,
) -> CheckRecord {
    match f() {
        Ok(v) => CheckRecord::dim(id, anchor, v, expected),
        Err(e) => CheckRecord::failed(id, anchor, CheckKind::DimensionEquals, expected as f64, e),
    }
}

fn grid_max(points: &[Vec<f64>], f: impl Fn(&[f64]) -> Result<f64> + Sync) -> Result<f64> {
    let values: Vec<f64> = points.par_iter().map(|p| f(p)).collect::<Result<_>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

fn cahen_wallach() -> MetricChart {
    charts::cahen_wallach(&DMatrix::identity(2, 2)).expect("invertible")
}

fn pp_quadratic() -> MetricChart {
    charts::pp_wave_expr(2, "y1^2 + y2^2").expect("valid profile")
}

/// Runs one suite by name, or all of them for `"all"`.
pub fn run(name: &str, settings: &Settings) -> Result<SuiteReport> {
    let jobs = if name == "all" {
        let mut all = Vec::new();
        for suite in SUITES {
            all.extend(suite_jobs(suite, settings)?);
        }
        all
    } else {
        suite_jobs(name, settings)?
    };
    let checks: Vec<CheckRecord> = jobs.par_iter().flat_map_iter(|job| job()).collect();
    Ok(SuiteReport::new(name, settings.echo(), checks))
}

fn suite_jobs(name: &str, settings: &Settings) -> Result<Vec<Job>> {
    match name {
        "cone-identities" => Ok(cone_identities(settings)),
        "doubled-derivatives" => Ok(doubled_derivatives(settings)),
        "psi-isometry" => Ok(psi_isometry(settings)),
        "holonomy-catalog" => Ok(holonomy_catalog(settings)),
        "cohomology" => Ok(cohomology_battery()),
        "null-plane" => null_plane(settings),
        _ => Err(Error::Config(format!(
            "unknown suite `{name}` (expected one of {}, all)",
            SUITES.join(", ")
        ))),
    }
}

fn cone_identities(settings: &Settings) -> Vec<Job> {
    let (grid, seed, tol) = (settings.grid, settings.seed, settings.tol);
    let bases: Vec<NamedChart> = vec![
        ("flat2", || charts::flat(0, 2)),
        ("sphere2", || charts::sphere(2)),
        ("hyperbolic2", || charts::hyperbolic(2)),
        ("cahen_wallach", cahen_wallach),
    ];
    let mut jobs: Vec<Job> = bases
        .into_iter()
        .map(|(name, make)| -> Job {
            Box::new(move || {
                let base = make();
                let points = base.sample_grid(grid, seed);
                let values: Result<Vec<_>> = points
                    .par_iter()
                    .map(|p| cone_identity_residuals(&base, p))
                    .collect();
                let id = |what: &str| format!("cone-identities.{name}.{what}");
                match values {
                    Ok(v) => {
                        let worst =
                            |f: fn(&conelab::cone_constructions::ConeIdentityResiduals) -> f64| {
                                v.iter().map(f).fold(0.0, f64::max)
                            };
                        vec![
                            CheckRecord::below(
                                id("connection"),
                                "cone connection identities",
                                worst(|r| r.lc),
                                IDENTITY_TOL,
                            ),
                            CheckRecord::below(
                                id("curvature"),
                                "cone curvature identity",
                                worst(|r| r.curv),
                                IDENTITY_TOL,
                            ),
                            CheckRecord::below(
                                id("ricci"),
                                "cone Ricci identity",
                                worst(|r| r.ric),
                                IDENTITY_TOL,
                            ),
                        ]
                    }
                    Err(e) => ["connection", "curvature", "ricci"]
                        .iter()
                        .map(|w| {
                            CheckRecord::failed(
                                id(w),
                                "cone identities",
                                CheckKind::ResidualBelow,
                                IDENTITY_TOL,
                                &e,
                            )
                        })
                        .collect(),
                }
            })
        })
        .collect();
    jobs.push(Box::new(move || {
        vec![residual(
            "cone-identities.hyperbolic2.flat-cone".into(),
            "cone over a space of curvature -1 is flat",
            FLAT_CONE_TOL,
            || {
                let chart = cone(&charts::hyperbolic(2));
                grid_max(&chart.sample_grid(grid, seed), |p| {
                    let cj = curvature_jet(&chart, p, 0)?;
                    Ok(cj.curvature.iter().fold(0.0f64, |m, x| m.max(x.abs())))
                })
            },
        )]
    }));
    jobs.push(Box::new(move || {
        vec![dimension(
            "cone-identities.sphere2.span-dim".into(),
            "cone over the round sphere has holonomy so(1,2)",
            3,
            || {
                Ok(
                    ambrose_singer_span(&cone(&charts::sphere(2)), &[1.0, PI / 3.0, 0.0], 1, tol)?
                        .dim(),
                )
            },
        )]
    }));
    jobs
}

/// Doubled points `(u, 0, p)` over the base sample grid.
fn doubled_points(base: &MetricChart, u: f64, grid: usize, seed: u64) -> Vec<Vec<f64>> {
    base.sample_grid(grid, seed)
        .into_iter()
        .map(|p| {
            let mut q = vec![u, 0.0];
            q.extend(p);
            q
        })
        .collect()
}

fn doubled_derivatives(settings: &Settings) -> Vec<Job> {
    let (grid, seed) = (settings.grid, settings.seed);
    let mut jobs: Vec<Job> = Vec::new();
    for u in [0.5, 1.0, 2.0] {
        jobs.push(Box::new(move || {
            let base = charts::sphere(2);
            let points = doubled_points(&base, u, grid, seed);
            let values: Result<Vec<_>> = points
                .par_iter()
                .map(|p| doubled_derivative_residuals(&base, p, 2, 2))
                .collect();
            let id = |what: &str| format!("doubled-derivatives.u={u}.{what}");
            let anchor = "mixed derivatives of the doubled curvature";
            match values {
                Ok(v) => {
                    let worst =
                        |f: fn(&conelab::cone_constructions::DoubledDerivativeResiduals) -> f64| {
                            v.iter().map(f).fold(0.0, f64::max)
                        };
                    vec![
                        CheckRecord::below(
                            id("closed-form"),
                            anchor,
                            worst(|r| r.closed_form),
                            IDENTITY_TOL,
                        ),
                        CheckRecord::below(
                            id("commutation"),
                            anchor,
                            worst(|r| r.commutation),
                            IDENTITY_TOL,
                        ),
                        CheckRecord::below(
                            id("null-contraction"),
                            anchor,
                            worst(|r| r.null_contraction),
                            IDENTITY_TOL,
                        ),
                    ]
                }
                Err(e) => ["closed-form", "commutation", "null-contraction"]
                    .iter()
                    .map(|w| {
                        CheckRecord::failed(
                            id(w),
                            anchor,
                            CheckKind::ResidualBelow,
                            IDENTITY_TOL,
                            &e,
                        )
                    })
                    .collect(),
            }
        }));
        jobs.push(Box::new(move || {
            vec![residual(
                format!("doubled-derivatives.u={u}.pure-u-factor"),
                "pure u-derivatives scale the curvature by (-1)^q (q+1)!/u^q",
                IDENTITY_TOL,
                || pure_u_factor_residual(u, 2),
            )]
        }));
    }
    jobs
}

/// `∇̃^q_{∂u} R̃` against `(−1)^q (q+1)!/u^q · R` on base arguments of the doubled sphere.
pub fn pure_u_factor_residual(u: f64, qmax: usize) -> Result<f64> {
    let base = charts::sphere(2);
    let bp = [1.0, 0.4];
    let point = [u, 0.0, bp[0], bp[1]];
    let cj = curvature_jet(&double_warped(&base), &point, qmax)?;
    let bj = curvature_jet(&base, &bp, 0)?;
    let mut worst = 0.0f64;
    for q in 0..=qmax {
        let factorial: f64 = (1..=q + 1).map(|k| k as f64).product();
        let factor = if q % 2 == 0 { 1.0 } else { -1.0 } * factorial / u.powi(q as i32);
        for (i, j, k, l) in [(0, 1, 0, 1), (0, 1, 1, 0), (1, 0, 0, 1)] {
            let mut idx = vec![0usize; q];
            idx.extend([i + 2, j + 2, k + 2, l + 2]);
            worst = worst.max((cj.component(q, &idx) - factor * bj.r(i, j, k, l)).abs());
        }
    }
    Ok(worst)
}

fn psi_isometry(settings: &Settings) -> Vec<Job> {
    let (grid, seed) = (settings.grid, settings.seed);
    let bases: Vec<NamedChart> = vec![
        ("flat1", || charts::flat(0, 1)),
        ("sphere2", || charts::sphere(2)),
    ];
    bases
        .into_iter()
        .map(|(name, make)| -> Job {
            Box::new(move || {
                let base = make();
                let points = cone(&exponential_extension(&base)).sample_grid(grid, seed);
                vec![
                    residual(
                        format!("psi-isometry.{name}"),
                        "the doubled metric pulls back to the cone over the exponential extension",
                        PSI_TOL,
                        || grid_max(&points, |p| psi_residual(&base, p, 1.0)),
                    ),
                    control(
                        format!("psi-isometry.{name}.corrupted-map"),
                        "negative control: u rescaled by 1.1",
                        || grid_max(&points, |p| psi_residual(&base, p, 1.1)),
                    ),
                ]
            })
        })
        .collect()
}

/// Doubled point over a base point at `u = 1, v = 0`.
fn lift_point(base_point: &[f64]) -> Vec<f64> {
    let mut q = vec![1.0, 0.0];
    q.extend_from_slice(base_point);
    q
}

/// Catalog bases with their evaluation points, used for the projection property.
pub fn catalog_bases() -> Vec<(&'static str, MetricChart, Vec<f64>)> {
    vec![
        ("sphere2", charts::sphere(2), vec![1.0, 0.3]),
        ("cahen_wallach", cahen_wallach(), vec![0.1, 0.2, -0.1, 0.3]),
        (
            "pp_wave_quadratic",
            pp_quadratic(),
            vec![0.1, 0.2, -0.1, 0.3],
        ),
        (
            "plane_wave_exp",
            charts::plane_wave_exp(),
            vec![0.0, 0.0, 0.0],
        ),
    ]
}

fn holonomy_catalog(settings: &Settings) -> Vec<Job> {
    let (tol, order) = (settings.tol, settings.jet_order);
    let mut jobs: Vec<Job> = vec![
        Box::new(move || {
            vec![dimension(
                "holonomy-catalog.cone-sphere2.dim".into(),
                "cone over the round sphere",
                3,
                || {
                    Ok(ambrose_singer_span(
                        &cone(&charts::sphere(2)),
                        &[1.0, PI / 3.0, 0.0],
                        order,
                        tol,
                    )?
                    .dim())
                },
            )]
        }),
        Box::new(move || {
            vec![dimension(
                "holonomy-catalog.cone-hyperbolic2.dim".into(),
                "cone over the hyperbolic plane",
                0,
                || {
                    Ok(ambrose_singer_span(
                        &cone(&charts::hyperbolic(2)),
                        &[1.0, 0.0, 1.0],
                        order,
                        tol,
                    )?
                    .dim())
                },
            )]
        }),
        Box::new(move || {
            let chart = double_warped(&cahen_wallach());
            let p = lift_point(&[0.1, 0.2, -0.1, 0.3]);
            let anchor = "doubled Cahen-Wallach space";
            match ambrose_singer_span(&chart, &p, order, tol).and_then(|span| {
                let (space, frame) = doubled_null_frame(&span.metric_at_point)?;
                let rep = stabilizer_analysis(&span, &space, &frame);
                let t = rep
                    .translations
                    .map(|t| t.dim())
                    .ok_or_else(|| Error::Frame("no translations".into()))?;
                Ok((span.dim(), t))
            }) {
                Ok((d, t)) => vec![
                    CheckRecord::dim("holonomy-catalog.doubled-cahen-wallach.dim", anchor, d, 5),
                    CheckRecord::dim(
                        "holonomy-catalog.doubled-cahen-wallach.translations",
                        anchor,
                        t,
                        3,
                    ),
                ],
                Err(e) => vec![CheckRecord::failed(
                    "holonomy-catalog.doubled-cahen-wallach.dim",
                    anchor,
                    CheckKind::DimensionEquals,
                    5.0,
                    e,
                )],
            }
        }),
        Box::new(move || {
            vec![dimension(
                "holonomy-catalog.doubled-sphere2.dim".into(),
                "doubled round sphere: so(2) plus translations",
                3,
                || {
                    Ok(ambrose_singer_span(
                        &double_warped(&charts::sphere(2)),
                        &lift_point(&[1.0, 0.3]),
                        order,
                        tol,
                    )?
                    .dim())
                },
            )]
        }),
        Box::new(move || {
            let chart = double_warped(&pp_quadratic());
            let p = lift_point(&[0.1, 0.2, -0.1, 0.3]);
            let anchor = "doubled pp-wave with invertible Hessian: translations fill the orthogonal of the parallel field";
            match ambrose_singer_span(&chart, &p, order, tol).and_then(|span| {
                let (space, frame) = doubled_null_frame(&span.metric_at_point)?;
                let rep = stabilizer_analysis(&span, &space, &frame);
                let t = rep
                    .translations
                    .map(|t| t.dim())
                    .ok_or_else(|| Error::Frame("no translations".into()))?;
                let x = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
                Ok((t, translation_orthogonality_residual(&span, &frame, &x)?))
            }) {
                Ok((t, r)) => vec![
                    CheckRecord::dim(
                        "holonomy-catalog.doubled-pp-wave.translations",
                        anchor,
                        t,
                        3,
                    ),
                    CheckRecord::below(
                        "holonomy-catalog.doubled-pp-wave.translations-orthogonal",
                        anchor,
                        r,
                        IDENTITY_TOL,
                    ),
                ],
                Err(e) => vec![CheckRecord::failed(
                    "holonomy-catalog.doubled-pp-wave.translations",
                    anchor,
                    CheckKind::DimensionEquals,
                    3.0,
                    e,
                )],
            }
        }),
        Box::new(move || {
            let chart = double_warped(&charts::plane_wave_exp());
            let p = lift_point(&[0.0, 0.0, 0.0]);
            let anchor = "doubled plane wave with profile e^z y^2";
            match ambrose_singer_span(&chart, &p, order, tol) {
                Ok(span) => {
                    let reference = plane_wave_exp_reference_generators();
                    let cmp = span_compare(&reference, &span.basis, 5, 1e-8);
                    let contained = reference
                        .iter()
                        .map(|m| {
                            let q = linalg::image(
                                &linalg::columns_to_matrix(
                                    &span.basis.iter().map(linalg::flatten).collect::<Vec<_>>(),
                                    25,
                                ),
                                tol,
                            );
                            linalg::max_abs_vec(&linalg::residual_outside(&q, &linalg::flatten(m)))
                        })
                        .fold(0.0, f64::max);
                    vec![
                        CheckRecord::dim(
                            "holonomy-catalog.doubled-plane-wave-exp.dim",
                            anchor,
                            span.dim(),
                            2,
                        )
                        .with_note(format!(
                            "dimension by derivative order {:?}",
                            span.dim_by_order
                        )),
                        CheckRecord::below(
                            "holonomy-catalog.doubled-plane-wave-exp.published-distance",
                            anchor,
                            cmp.principal_distance,
                            1e-8,
                        ),
                        CheckRecord::below(
                            "holonomy-catalog.doubled-plane-wave-exp.published-contained",
                            anchor,
                            contained,
                            1e-8,
                        ),
                    ]
                }
                Err(e) => vec![CheckRecord::failed(
                    "holonomy-catalog.doubled-plane-wave-exp.dim",
                    anchor,
                    CheckKind::DimensionEquals,
                    2.0,
                    e,
                )],
            }
        }),
    ];
    for (name, base, bp) in catalog_bases() {
        jobs.push(Box::new(move || {
            vec![residual(
                format!("holonomy-catalog.projection.{name}"),
                "the so-part of the doubled holonomy is the base holonomy",
                PROJECTION_TOL,
                || projection_distance(&base, &bp, order, tol),
            )]
        }));
    }
    for (name, reference, point) in [
        ("cone-sphere2", "cone:sphere2", vec![1.0, PI / 3.0, 0.0]),
        (
            "doubled-sphere2",
            "doubled:sphere2",
            lift_point(&[1.0, 0.3]),
        ),
    ] {
        jobs.push(Box::new(move || {
            vec![residual(
                format!("holonomy-catalog.loops.{name}"),
                "loop holonomy spans the curvature span",
                LOOP_DISTANCE_TOL,
                || {
                    let chart = chart_ref::resolve(reference)?;
                    loop_vs_curvature_distance(&chart, &point, order, tol)
                },
            )]
        }));
    }
    jobs
}

/// Principal distance between the linear part of the doubled span and the base span.
pub fn projection_distance(
    base: &MetricChart,
    base_point: &[f64],
    order: usize,
    tol: f64,
) -> Result<f64> {
    let doubled = ambrose_singer_span(&double_warped(base), &lift_point(base_point), order, tol)?;
    let own = ambrose_singer_span(base, base_point, order, tol)?;
    let (space, frame) = doubled_null_frame(&doubled.metric_at_point)?;
    let rep = stabilizer_analysis(&doubled, &space, &frame);
    let linear = rep.linear_part.ok_or_else(|| {
        Error::Frame(
            rep.diagnosis
                .unwrap_or_else(|| "span leaves the stabiliser".into()),
        )
    })?;
    Ok(span_compare(linear.basis(), &own.basis, base.dim(), 1e-8).principal_distance)
}

/// Principal distance between loop-generated and curvature-generated spans.
pub fn loop_vs_curvature_distance(
    chart: &MetricChart,
    p: &[f64],
    order: usize,
    tol: f64,
) -> Result<f64> {
    let a = ambrose_singer_span(chart, p, order, tol)?;
    let b = loop_span(chart, p, &LOOP_SIDES, DEFAULT_STEPS_PER_UNIT, LOOP_TOL)?;
    Ok(span_compare(&a.basis, &b.basis, chart.dim(), 1e-6).principal_distance)
}

/// `𝔰𝔬(2)`, `𝔰𝔬(3)`, `𝔰𝔬(2)⊕𝔰𝔬(3)` with their names.
pub fn g0_battery() -> Vec<(&'static str, MatrixAlgebra)> {
    vec![
        ("so2", so_algebra(2)),
        ("so3", so_algebra(3)),
        ("so2+so3", direct_sum(&so_algebra(2), &so_algebra(3))),
    ]
}

/// Type-3 parameters: the functional is 1 on the centre basis.
pub fn type3_params(g0: &MatrixAlgebra) -> BbiParams {
    BbiParams {
        f: Some(DMatrix::from_element(1, g0.centre().dim(), 1.0)),
        t0: None,
    }
}

/// `H¹(𝔤, V/L^⊥)` with `L = ℝe₋` in the adapted frame.
pub fn quotient_h1(g: &MatrixAlgebra) -> Result<usize> {
    let dim = g.ambient_dim();
    let (_, frame) = adapted_lorentz_frame(dim - 2);
    let module = LieModule::standard(g)?;
    let mut vectors = vec![frame.e_minus.clone()];
    vectors.extend(frame.v0_basis.vectors().iter().cloned());
    let l_perp = SubspaceBasis::new(dim, vectors, linalg::DEFAULT_TOL)?;
    Ok(cohomology(&quotient_module(&module, &l_perp)?)?.h1_dim)
}

fn cohomology_battery() -> Vec<Job> {
    let mut jobs: Vec<Job> = vec![Box::new(|| {
        vec![dimension(
            "cohomology.so3-standard.h1".into(),
            "H^1(so(3), R^3) vanishes",
            0,
            || Ok(cohomology(&LieModule::standard(&so_algebra(3))?)?.h1_dim),
        )]
    })];
    for (name, g0) in g0_battery() {
        let g0_type1 = g0.clone();
        jobs.push(Box::new(move || {
            let anchor = "type 1 has vanishing H^1";
            let g = bbi_type(BbiKind::Type1, &g0_type1, &BbiParams::default());
            vec![
                dimension(format!("cohomology.type1.{name}.h1"), anchor, 0, || {
                    Ok(
                        cohomology(&LieModule::standard(g.as_ref().map_err(Clone::clone)?)?)?
                            .h1_dim,
                    )
                }),
                dimension(
                    format!("cohomology.type1.{name}.quotient-h1"),
                    "H^1 on V/L-perp vanishes for type 1",
                    0,
                    || quotient_h1(g.as_ref().map_err(Clone::clone)?),
                ),
            ]
        }));
        let g0_type2 = g0.clone();
        jobs.push(Box::new(move || {
            let anchor = "type 2 H^1 dimension formula";
            match remark_h1_dimension(&g0_type2, g0_type2.ambient_dim()) {
                Ok(expected) => vec![dimension(
                    format!("cohomology.type2.{name}.h1"),
                    anchor,
                    expected,
                    || {
                        let g = bbi_type(BbiKind::Type2, &g0_type2, &BbiParams::default())?;
                        Ok(cohomology(&LieModule::standard(&g)?)?.h1_dim)
                    },
                )],
                Err(e) => vec![CheckRecord::failed(
                    format!("cohomology.type2.{name}.h1"),
                    anchor,
                    CheckKind::DimensionEquals,
                    f64::NAN,
                    e,
                )],
            }
        }));
        if g0.centre().dim() > 0 {
            jobs.push(Box::new(move || {
                let g = bbi_type(BbiKind::Type3, &g0, &type3_params(&g0));
                vec![
                    dimension(
                        format!("cohomology.type3.{name}.h1"),
                        "type 3 has vanishing H^1",
                        0,
                        || {
                            Ok(cohomology(&LieModule::standard(
                                g.as_ref().map_err(Clone::clone)?,
                            )?)?
                            .h1_dim)
                        },
                    ),
                    dimension(
                        format!("cohomology.type3.{name}.quotient-h1"),
                        "H^1 on V/L-perp vanishes for type 3",
                        0,
                        || quotient_h1(g.as_ref().map_err(Clone::clone)?),
                    ),
                ]
            }));
        }
    }
    jobs
}

pub const BUILTIN_NULL_PLANE: [(&str, &str); 3] = [
    (
        "null-plane-basic.toml",
        include_str!("../../../configs/null-plane-basic.toml"),
    ),
    (
        "null-plane-linear.toml",
        include_str!("../../../configs/null-plane-linear.toml"),
    ),
    (
        "null-plane-warped-slice.toml",
        include_str!("../../../configs/null-plane-warped-slice.toml"),
    ),
];

/// Null-plane checks of one configuration document, prefixed by `id`.
pub fn null_plane_checks(id: &str, text: &str, grid: usize, seed: u64) -> Vec<CheckRecord> {
    let eta = match null_plane_data_from_toml(text).and_then(|d| solve_eta(&d)) {
        Ok(eta) => eta,
        Err(e) => {
            return vec![CheckRecord::failed(
                format!("{id}.build"),
                "null-plane data",
                CheckKind::ResidualBelow,
                SYSTEM_TOL,
                e,
            )]
        }
    };
    match verify_null_plane(&eta, grid, seed) {
        Ok(r) => {
            let f = &r.fundamental;
            let fundamental = [
                ("frame", f.gvz),
                ("nabla-v", f.nab_v),
                ("nabla-z", f.nab_z),
                ("d-v-flat", f.d_v_flat),
                ("d-z-flat", f.d_z_flat),
                ("bracket", f.bracket),
                ("lie-v", f.lie_v),
                ("lie-z", f.lie_z),
                ("beta-alpha", f.beta_alpha),
                ("geodesic", f.geodesic),
            ];
            let mut out = vec![
                CheckRecord::below(
                    format!("{id}.system"),
                    "first-order system for eta",
                    r.system.max(),
                    SYSTEM_TOL,
                ),
                CheckRecord::below(
                    format!("{id}.alpha-beta"),
                    "covariant derivatives of V and Z",
                    r.alpha_beta,
                    IDENTITY_TOL,
                ),
                CheckRecord::below(
                    format!("{id}.normalization"),
                    "identities of the closed normalisation",
                    r.normalization,
                    IDENTITY_TOL,
                ),
                CheckRecord::below(
                    format!("{id}.cone-parallel"),
                    "parallel null plane on the cone",
                    r.cone.parallel,
                    IDENTITY_TOL,
                ),
                CheckRecord::below(
                    format!("{id}.cone-null"),
                    "totally null plane on the cone",
                    r.cone.null,
                    IDENTITY_TOL,
                ),
            ];
            out.extend(fundamental.iter().map(|(name, v)| {
                CheckRecord::below(
                    format!("{id}.fundamental.{name}"),
                    "consequences of the fundamental equations",
                    *v,
                    IDENTITY_TOL,
                )
            }));
            out
        }
        Err(e) => vec![CheckRecord::failed(
            format!("{id}.build"),
            "null-plane metric",
            CheckKind::ResidualBelow,
            SYSTEM_TOL,
            e,
        )],
    }
}

/// Corrupted-β and corrupted-η detectors on the basic configuration.
pub fn null_plane_controls(grid: usize, seed: u64) -> Vec<CheckRecord> {
    let text = BUILTIN_NULL_PLANE[0].1;
    let beta = control(
        "null-plane.controls.corrupted-beta".into(),
        "negative control: beta(Z) shifted by 0.1",
        || {
            let eta = solve_eta(&null_plane_data_from_toml(text)?)?;
            let chart = build_metric(&eta, grid, seed)?;
            let frame = PlaneFrame::coordinate(eta.data().m0_dim);
            let mut worst = 0.0f64;
            for p in chart.sample_grid(grid, seed) {
                let ab = alpha_beta(&chart, &eta, &p)?;
                let mut b = ab.beta.clone();
                b[eta.data().m0_dim + 1] += 0.1;
                worst =
                    worst.max(fundamental_residuals(&chart, &frame, &ab.alpha, &b, &p)?.d_z_flat);
            }
            Ok(worst)
        },
    );
    let eta_t = control(
        "null-plane.controls.corrupted-eta".into(),
        "negative control: eta_t drifts by 0.1 t",
        || {
            let eta = solve_eta(&null_plane_data_from_toml(text)?)?.with_t_drift(0.1);
            let chart = build_metric(&eta, grid, seed)?;
            Ok(cone_null_plane_check(&chart, eta.data().m0_dim, grid, seed)?.parallel)
        },
    );
    vec![beta, eta_t]
}

fn null_plane(settings: &Settings) -> Result<Vec<Job>> {
    let (grid, seed) = (settings.grid, settings.seed);
    let docs: Vec<(String, String)> = if settings.null_plane.is_empty() {
        BUILTIN_NULL_PLANE
            .iter()
            .map(|(n, t)| (n.to_string(), t.to_string()))
            .collect()
    } else {
        settings
            .null_plane
            .iter()
            .map(|p: &PathBuf| {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                let name = p
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Ok((name, text))
            })
            .collect::<Result<_>>()?
    };
    let mut jobs: Vec<Job> = docs
        .into_iter()
        .map(|(name, text)| -> Job {
            let stem = name
                .trim_end_matches(".toml")
                .trim_start_matches("null-plane-")
                .to_string();
            Box::new(move || null_plane_checks(&format!("null-plane.{stem}"), &text, grid, seed))
        })
        .collect();
    jobs.push(Box::new(move || null_plane_controls(grid, seed)));
    Ok(jobs)
}
