//! Cones, double warped extensions and exponential extensions of metric
//! charts, with residual checks of their closed-form curvature identities.

use crate::charts::{
    curvature_jet, field_derivative, field_value, homothety_residual, ComponentFn, MetricChart,
    ScalarField, VectorField,
};
use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace};
use crate::linalg::{self, DEFAULT_TOL};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Smallest admissible radial coordinate of cones and doubled charts.
pub const RADIAL_MIN: f64 = 0.1;
const RADIAL_SAMPLE: (f64, f64) = (0.5, 2.0);

fn fresh_name(existing: &[String], wanted: &str) -> String {
    let mut name = wanted.to_string();
    while existing.contains(&name) {
        name.push('\'');
    }
    name
}

/// `−dr² + r²g` on `(r, base coords)`.
pub fn cone(base: &MetricChart) -> MetricChart {
    let n = base.dim();
    let m = n + 1;
    let inner = base.components().clone();
    let components: ComponentFn = Arc::new(move |x: &[Jet]| {
        let g = inner(&x[1..]);
        let r2 = &x[0] * &x[0];
        let mut out: Vec<Jet> = (0..m * m).map(|_| x[0].lift(0.0)).collect();
        out[0] = x[0].lift(-1.0);
        for i in 0..n {
            for j in 0..n {
                out[(i + 1) * m + j + 1] = &r2 * &g[i * n + j];
            }
        }
        out
    });
    let mut coords = vec![fresh_name(base.coords(), "r")];
    coords.extend(base.coords().iter().cloned());
    let (t, s) = base.signature();
    MetricChart::new(
        format!("cone({})", base.label()),
        coords,
        (t + 1, s),
        base.domain().prepend(RADIAL_MIN, f64::INFINITY),
        base.sample_box().prepend(RADIAL_SAMPLE.0, RADIAL_SAMPLE.1),
        components,
    )
}

/// `2dudv + u²g` on `(u, v, base coords)`.
pub fn double_warped(base: &MetricChart) -> MetricChart {
    let n = base.dim();
    let m = n + 2;
    let inner = base.components().clone();
    let components: ComponentFn = Arc::new(move |x: &[Jet]| {
        let g = inner(&x[2..]);
        let u2 = &x[0] * &x[0];
        let mut out: Vec<Jet> = (0..m * m).map(|_| x[0].lift(0.0)).collect();
        out[1] = x[0].lift(1.0);
        out[m] = x[0].lift(1.0);
        for i in 0..n {
            for j in 0..n {
                out[(i + 2) * m + j + 2] = &u2 * &g[i * n + j];
            }
        }
        out
    });
    let u = fresh_name(base.coords(), "u");
    let v = fresh_name(base.coords(), "v");
    let mut coords = vec![u, v];
    coords.extend(base.coords().iter().cloned());
    let (t, s) = base.signature();
    let domain = base
        .domain()
        .prepend(f64::NEG_INFINITY, f64::INFINITY)
        .prepend(RADIAL_MIN, f64::INFINITY);
    let sample = base
        .sample_box()
        .prepend(-1.0, 1.0)
        .prepend(RADIAL_SAMPLE.0, RADIAL_SAMPLE.1);
    MetricChart::new(
        format!("doubled({})", base.label()),
        coords,
        (t + 1, s + 1),
        domain,
        sample,
        components,
    )
}

/// `ds² + e^{2s}g` on `(s, base coords)`.
pub fn exponential_extension(base: &MetricChart) -> MetricChart {
    let n = base.dim();
    let m = n + 1;
    let inner = base.components().clone();
    let components: ComponentFn = Arc::new(move |x: &[Jet]| {
        let g = inner(&x[1..]);
        let w = x[0].scale(2.0).exp();
        let mut out: Vec<Jet> = (0..m * m).map(|_| x[0].lift(0.0)).collect();
        out[0] = x[0].lift(1.0);
        for i in 0..n {
            for j in 0..n {
                out[(i + 1) * m + j + 1] = &w * &g[i * n + j];
            }
        }
        out
    });
    let mut coords = vec![fresh_name(base.coords(), "s")];
    coords.extend(base.coords().iter().cloned());
    let (t, s) = base.signature();
    MetricChart::new(
        format!("exp({})", base.label()),
        coords,
        (t, s + 1),
        base.domain().prepend(f64::NEG_INFINITY, f64::INFINITY),
        base.sample_box().prepend(-1.0, 1.0),
        components,
    )
}

/// `r∂_r` on a cone chart.
pub fn cone_euler_field() -> VectorField {
    Arc::new(|x: &[Jet]| {
        let mut out: Vec<Jet> = x.iter().map(|c| c.lift(0.0)).collect();
        out[0] = x[0].clone();
        out
    })
}

/// `u∂_u + v∂_v` on a doubled chart.
pub fn doubled_euler_field() -> VectorField {
    Arc::new(|x: &[Jet]| {
        let mut out: Vec<Jet> = x.iter().map(|c| c.lift(0.0)).collect();
        out[0] = x[0].clone();
        out[1] = x[1].clone();
        out
    })
}

/// Max-norm of the pullback of the doubled metric under
/// `(r, s, p) ↦ (u_scale·re^s, −½re^{−s}, p)` minus the cone over the
/// exponential extension, at a point `(r, s, p)`.
pub fn psi_residual(base: &MetricChart, point: &[f64], u_scale: f64) -> Result<f64> {
    let target_chart = cone(&exponential_extension(base));
    let target = target_chart.metric_at(point)?;
    let m = target_chart.dim();
    let x = Jet::seed(point, 1);
    let (r, s) = (&x[0], &x[1]);
    let mut image = Vec::with_capacity(m);
    image.push((r * &s.exp()).scale(u_scale));
    image.push((r * &(-s).exp()).scale(-0.5));
    image.extend(x[2..].iter().cloned());
    let g = (double_warped(base).components())(&image);
    let jac = DMatrix::from_fn(m, m, |a, i| image[a].gradient()[i]);
    let gm = DMatrix::from_fn(m, m, |a, b| g[a * m + b].value());
    let pulled = jac.transpose() * gm * jac;
    Ok(linalg::max_abs(&(pulled - target)))
}

/// Residuals of the cone's connection, curvature and Ricci identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeIdentityResiduals {
    pub lc: f64,
    pub curv: f64,
    pub ric: f64,
}

impl ConeIdentityResiduals {
    pub fn max(&self) -> f64 {
        self.lc.max(self.curv).max(self.ric)
    }
}

/// Compares the cone at `(r = 1, p)` with the base at `p`.
pub fn cone_identity_residuals(base: &MetricChart, p: &[f64]) -> Result<ConeIdentityResiduals> {
    let n = base.dim();
    let cone_chart = cone(base);
    let mut q = vec![1.0];
    q.extend_from_slice(p);
    let bj = curvature_jet(base, p, 0)?;
    let cj = curvature_jet(&cone_chart, &q, 0)?;
    let g = &bj.metric_at_point;
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };

    let mut lc = homothety_residual(&cone_chart, &cone_euler_field(), &q, 1.0)?;
    for i in 0..n {
        for j in 0..n {
            lc = lc.max((cj.gamma(0, i + 1, j + 1) - g[(i, j)]).abs());
            for l in 0..n {
                lc = lc.max((cj.gamma(l + 1, i + 1, j + 1) - bj.gamma(l, i, j)).abs());
            }
        }
    }

    let mut curv = 0.0f64;
    let m = n + 1;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let expected = if i == 0 || j == 0 || k == 0 || l == 0 {
                        0.0
                    } else {
                        let (i, j, k, l) = (i - 1, j - 1, k - 1, l - 1);
                        bj.r(i, j, k, l) + g[(j, k)] * delta(i, l) - g[(i, k)] * delta(j, l)
                    };
                    curv = curv.max((cj.r(i, j, k, l) - expected).abs());
                }
            }
        }
    }

    let ric_cone = cj.ricci();
    let ric_base = bj.ricci();
    let mut ric = 0.0f64;
    for a in 0..m {
        for b in 0..m {
            let expected = if a == 0 || b == 0 {
                0.0
            } else {
                ric_base[(a - 1, b - 1)] + (n as f64 - 1.0) * g[(a - 1, b - 1)]
            };
            ric = ric.max((ric_cone[(a, b)] - expected).abs());
        }
    }
    Ok(ConeIdentityResiduals { lc, curv, ric })
}

/// `c(p, q) = (−1)^q (p+2)(p+3)⋯(p+q+1)`.
pub fn derivative_coefficient(p: usize, q: usize) -> f64 {
    let mut c = 1.0;
    for j in 0..q {
        c *= -((p + 2 + j) as f64);
    }
    c
}

/// Residuals of the closed form for `∇̃^q_{∂u} ∇̃^p R̃` on a doubled chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubledDerivativeResiduals {
    /// closed form for base-tangent arguments
    pub closed_form: f64,
    /// swapping a `∂_u` slot with a neighbouring slot
    pub commutation: f64,
    /// components with a `∂_v` argument
    pub null_contraction: f64,
}

impl DoubledDerivativeResiduals {
    pub fn max(&self) -> f64 {
        self.closed_form
            .max(self.commutation)
            .max(self.null_contraction)
    }
}

fn for_each_tuple(len: usize, range: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; len];
    loop {
        f(&idx);
        let mut pos = len;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < range {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Checks the mixed derivatives of the doubled curvature at a doubled-chart
/// point `(u, v, p)` for all `p ≤ pmax`, `q ≤ qmax`.
pub fn doubled_derivative_residuals(
    base: &MetricChart,
    point: &[f64],
    pmax: usize,
    qmax: usize,
) -> Result<DoubledDerivativeResiduals> {
    let n = base.dim();
    let dim = n + 2;
    let doubled = double_warped(base);
    doubled.check_point(point)?;
    let u = point[0];
    let cj = curvature_jet(&doubled, point, pmax + qmax)?;
    let bj = curvature_jet(base, &point[2..], pmax)?;
    let g = &bj.metric_at_point;

    let mut closed_form = 0.0f64;
    for p in 0..=pmax {
        for q in 0..=qmax {
            let c = derivative_coefficient(p, q);
            let mut full = vec![0usize; q + p + 4];
            for_each_tuple(p + 3, n, |base_idx| {
                for (s, b) in base_idx.iter().enumerate() {
                    full[q + s] = b + 2;
                }
                for l in 0..dim {
                    full[q + p + 3] = l;
                    let expected = match l {
                        0 => 0.0,
                        1 => {
                            let mut acc = 0.0;
                            for removed in 0..p {
                                let mut idx: Vec<usize> = base_idx[..p]
                                    .iter()
                                    .enumerate()
                                    .filter(|(s, _)| *s != removed)
                                    .map(|(_, b)| *b)
                                    .collect();
                                idx.extend_from_slice(&base_idx[p..]);
                                idx.push(0);
                                for mm in 0..n {
                                    *idx.last_mut().unwrap() = mm;
                                    acc += bj.component(p - 1, &idx) * g[(mm, base_idx[removed])];
                                }
                            }
                            -c * u.powi(1 - q as i32) * acc
                        }
                        _ => {
                            let mut idx = base_idx.to_vec();
                            idx.push(l - 2);
                            c / u.powi(q as i32) * bj.component(p, &idx)
                        }
                    };
                    closed_form = closed_form.max((cj.component(p + q, &full) - expected).abs());
                }
            });
        }
    }

    let mut commutation = 0.0f64;
    let mut null_contraction = 0.0f64;
    for k in 0..=(pmax + qmax) {
        for_each_tuple(k + 4, dim, |idx| {
            let value = cj.component(k, idx);
            if idx[..k + 3].contains(&1) {
                null_contraction = null_contraction.max(value.abs());
            }
            for s in 0..k.saturating_sub(1) {
                if idx[s] == 0 || idx[s + 1] == 0 {
                    let mut swapped = idx.to_vec();
                    swapped.swap(s, s + 1);
                    commutation = commutation.max((value - cj.component(k, &swapped)).abs());
                }
            }
        });
    }
    Ok(DoubledDerivativeResiduals {
        closed_form,
        commutation,
        null_contraction,
    })
}

/// Role of a lifted field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftKind {
    ParallelVector,
    NullPlane,
    Distribution,
}

/// A vector field on a base chart together with its lift to a constructed chart.
#[derive(Clone)]
pub struct LiftedField {
    pub base_field: VectorField,
    pub total_field: VectorField,
    pub kind: LiftKind,
}

/// Lifts a homothetic gradient field `ξ = grad F` with `∇ξ = a·Id` to
/// `F∂_v + (1/u)ξ − a∂_u` on the doubled chart, after checking both
/// hypotheses on the base sample grid.
pub fn lift_parallel_vector(
    base: &MetricChart,
    xi: VectorField,
    potential: ScalarField,
    a: f64,
    grid_points: usize,
    seed: u64,
) -> Result<LiftedField> {
    let n = base.dim();
    for p in base.sample_grid(grid_points, seed) {
        let h = homothety_residual(base, &xi, &p, a)?;
        if h > 1e-8 {
            return Err(Error::Precondition {
                point: p,
                message: format!("field is not homothetic with factor {a} (residual {h:e})"),
            });
        }
        let g = base.metric_at(&p)?;
        let flat = g * DVector::from_vec(field_value(&xi, &p));
        let df = DVector::from_vec(potential(&Jet::seed(&p, 1)).gradient());
        let d = linalg::max_abs_vec(&(df - flat));
        if d > 1e-8 {
            return Err(Error::Precondition {
                point: p,
                message: format!("dF differs from the dual of the field (residual {d:e})"),
            });
        }
    }
    let base_field = xi.clone();
    let total_field: VectorField = Arc::new(move |x: &[Jet]| {
        let inv_u = x[0].recip();
        let f = potential(&x[2..]);
        let base_part = xi(&x[2..]);
        let mut out = Vec::with_capacity(n + 2);
        out.push(x[0].lift(-a));
        out.push(f);
        out.extend(base_part.iter().map(|c| &inv_u * c));
        out
    });
    Ok(LiftedField {
        base_field,
        total_field,
        kind: LiftKind::ParallelVector,
    })
}

/// Max over the grid of `|∇ field|`.
pub fn parallel_residual(
    chart: &MetricChart,
    field: &VectorField,
    points: &[Vec<f64>],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in points {
        worst = worst.max(homothety_residual(chart, field, p, 0.0)?);
    }
    Ok(worst)
}

/// Largest component of `∇_{∂_a} X_i` outside `span{X_1, …}` at `p`,
/// measured with the coordinate Euclidean product.
pub fn parallel_plane_residual(
    chart: &MetricChart,
    fields: &[VectorField],
    p: &[f64],
) -> Result<f64> {
    let n = chart.dim();
    let values: Vec<DVector<f64>> = fields
        .iter()
        .map(|f| DVector::from_vec(field_value(f, p)))
        .collect();
    let span = linalg::columns_to_matrix(&values, n);
    let q = linalg::image(&span, DEFAULT_TOL);
    if q.ncols() < fields.len() {
        return Err(Error::Frame(format!("fields are dependent at {p:?}")));
    }
    let mut worst = 0.0f64;
    for f in fields {
        let d = field_derivative(chart, f, p)?;
        for col in d.column_iter() {
            let r = linalg::residual_outside(&q, &col.into_owned());
            worst = worst.max(linalg::max_abs_vec(&r));
        }
    }
    Ok(worst)
}

/// Least-squares fit of `∇χ = α ⊗ χ` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceFit {
    pub alpha: DVector<f64>,
    pub residual: f64,
    /// distance of `α` from the line through `χ^♭`, relative to `|α|`
    pub proportionality: f64,
}

pub fn recurrence_fit(
    chart: &MetricChart,
    field: &VectorField,
    p: &[f64],
) -> Result<RecurrenceFit> {
    let chi = DVector::from_vec(field_value(field, p));
    let norm2 = chi.norm_squared();
    if norm2 == 0.0 {
        return Err(Error::Frame(format!("field vanishes at {p:?}")));
    }
    let d = field_derivative(chart, field, p)?;
    let alpha = d.transpose() * &chi / norm2;
    let residual = linalg::max_abs(&(&d - &chi * alpha.transpose()));
    let flat = chart.metric_at(p)? * &chi;
    let proportionality = if alpha.norm() == 0.0 {
        0.0
    } else {
        let q = linalg::image(&linalg::columns_to_matrix(&[flat], chi.len()), DEFAULT_TOL);
        linalg::residual_outside(&q, &alpha).norm() / alpha.norm()
    };
    Ok(RecurrenceFit {
        alpha,
        residual,
        proportionality,
    })
}

/// Best recurrence residual over the family `field + h ∂_v` on a doubled
/// chart, with `h` a polynomial of total degree `≤ degree` in all coordinates.
///
/// Recurrence forms are fixed by the components other than `∂_v`; the `∂_v`
/// equations are then linear in the coefficients of `h` and solved jointly
/// over all points.
pub fn recurrent_family_residual(
    doubled: &MetricChart,
    field: &VectorField,
    points: &[Vec<f64>],
    degree: usize,
) -> Result<f64> {
    let n = doubled.dim();
    let monomials = JetSpace::get(n, degree);
    let count = monomials.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    let mut fixed = 0.0f64;
    for p in points {
        let zeta = field_value(field, p);
        let d = field_derivative(doubled, field, p)?;
        let others: Vec<usize> = (0..n).filter(|&l| l != 1).collect();
        let norm2: f64 = others.iter().map(|&l| zeta[l] * zeta[l]).sum();
        if norm2 == 0.0 {
            return Err(Error::Frame(format!(
                "field is proportional to ∂_v at {p:?}"
            )));
        }
        let mono_value = |e: &[u8], skip: Option<usize>| -> f64 {
            let mut v = 1.0;
            for (var, &pow) in e.iter().enumerate() {
                let pow = if Some(var) == skip {
                    if pow == 0 {
                        return 0.0;
                    }
                    v *= pow as f64;
                    pow - 1
                } else {
                    pow
                };
                v *= p[var].powi(pow as i32);
            }
            v
        };
        for a in 0..n {
            let alpha: f64 = others.iter().map(|&l| zeta[l] * d[(l, a)]).sum::<f64>() / norm2;
            for &l in &others {
                fixed = fixed.max((d[(l, a)] - alpha * zeta[l]).abs());
            }
            // (∇_a ζ)^v + ∂_a h − α_a (ζ^v + h) = 0
            let row: Vec<f64> = (0..count)
                .map(|c| {
                    let e = monomials.exponents(c);
                    mono_value(e, Some(a)) - alpha * mono_value(e, None)
                })
                .collect();
            rows.push(row);
            rhs.push(alpha * zeta[1] - d[(1, a)]);
        }
    }
    let a = DMatrix::from_fn(rows.len(), count, |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs);
    let coeffs = linalg::lstsq(&a, &b);
    let v_residual = linalg::max_abs_vec(&(&a * coeffs - b));
    Ok(fixed.max(v_residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{flat, hyperbolic, pp_wave_expr, sphere};
    use approx::assert_relative_eq;

    #[test]
    fn cone_over_hyperbolic_plane_is_flat() {
        let c = cone(&hyperbolic(2));
        assert_eq!(c.signature(), (1, 2));
        for p in c.sample_grid(6, 3) {
            let cj = curvature_jet(&c, &p, 0).unwrap();
            assert!(cj.curvature.iter().all(|x| x.abs() < 1e-9));
        }
        let cj = curvature_jet(&cone(&flat(0, 2)), &[1.0, 0.2, 0.1], 0).unwrap();
        assert!(cj.curvature.iter().map(|x| x.abs()).fold(0.0, f64::max) > 0.5);
    }

    #[test]
    fn sphere_cone_identities() {
        let r = cone_identity_residuals(&sphere(2), &[1.1, 0.4]).unwrap();
        assert!(r.max() < 1e-9, "{r:?}");
    }

    #[test]
    fn psi_is_an_isometry() {
        for base in [flat(0, 1), sphere(2)] {
            let chart = cone(&exponential_extension(&base));
            for p in chart.sample_grid(8, 2) {
                assert!(psi_residual(&base, &p, 1.0).unwrap() < 1e-12);
            }
            let p = chart.sample_grid(1, 2).remove(0);
            assert!(psi_residual(&base, &p, 1.01).unwrap() > 1e-3);
        }
    }

    #[test]
    fn exponential_extension_of_line_is_hyperbolic() {
        let e = exponential_extension(&flat(0, 1));
        assert_eq!(e.signature(), (0, 2));
        assert!(crate::charts::constant_curvature_residual(&e, &[0.3, 0.2], -1.0).unwrap() < 1e-12);
    }

    #[test]
    fn coefficients() {
        assert_eq!(derivative_coefficient(3, 0), 1.0);
        assert_eq!(derivative_coefficient(0, 1), -2.0);
        assert_eq!(derivative_coefficient(1, 2), 12.0);
    }

    #[test]
    fn doubled_sphere_derivatives() {
        let r = doubled_derivative_residuals(&sphere(2), &[1.0, 0.3, 1.0, 0.5], 1, 2).unwrap();
        assert!(r.max() < 1e-8, "{r:?}");
        let r = doubled_derivative_residuals(&flat(0, 2), &[1.3, 0.0, 0.1, 0.5], 1, 1).unwrap();
        assert_eq!(r.max(), 0.0);
    }

    #[test]
    fn doubled_pp_wave_derivatives() {
        let base = pp_wave_expr(1, "y^3*z + y*z^2").unwrap();
        let r = doubled_derivative_residuals(&base, &[0.7, 0.3, 0.2, -0.4, 0.6], 2, 1).unwrap();
        assert!(r.max() < 1e-8, "{r:?}");
    }

    #[test]
    fn doubled_chart_basics() {
        let d = double_warped(&sphere(2));
        assert_eq!(d.signature(), (1, 2 + 1));
        let p = [1.2, 0.3, 1.0, 0.4];
        assert!(
            homothety_residual(&d, &crate::charts::coordinate_field(1), &p, 0.0).unwrap() < 1e-12
        );
        assert!(homothety_residual(&d, &doubled_euler_field(), &p, 1.0).unwrap() < 1e-12);
    }

    #[test]
    fn lifts_of_homothetic_gradients_are_parallel() {
        let base = flat(0, 1);
        let xi: VectorField = Arc::new(|x: &[Jet]| vec![x[0].lift(1.0)]);
        let f: ScalarField = Arc::new(|x: &[Jet]| x[0].clone());
        let lift = lift_parallel_vector(&base, xi, f, 0.0, 8, 1).unwrap();
        let d = double_warped(&base);
        assert!(parallel_residual(&d, &lift.total_field, &d.sample_grid(8, 1)).unwrap() < 1e-10);

        let xi: VectorField = Arc::new(|x: &[Jet]| vec![x[0].clone()]);
        let f: ScalarField = Arc::new(|x: &[Jet]| (&x[0] * &x[0]).scale(0.5));
        let lift = lift_parallel_vector(&base, xi.clone(), f.clone(), 1.0, 8, 1).unwrap();
        assert!(parallel_residual(&d, &lift.total_field, &d.sample_grid(8, 1)).unwrap() < 1e-9);
        assert!(matches!(
            lift_parallel_vector(&base, xi, f, 0.0, 8, 1),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn recurrent_gradient_field_on_pp_wave() {
        let chart = pp_wave_expr(1, "y^2*z").unwrap();
        let chi: VectorField = Arc::new(|x: &[Jet]| {
            let mut out: Vec<Jet> = x.iter().map(|c| c.lift(0.0)).collect();
            out[0] = x[2].exp();
            out
        });
        let fit = recurrence_fit(&chart, &chi, &[0.1, 0.3, 0.4]).unwrap();
        assert!(fit.residual < 1e-12);
        assert!(fit.proportionality < 1e-12);
        assert_relative_eq!(fit.alpha[2], 1.0, epsilon = 1e-12);
    }
}
