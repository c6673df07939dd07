//! Holonomy algebras from curvature derivatives and from parallel transport
//! around small loops.

use crate::charts::{christoffel_at, curvature_jet, MetricChart, Profile};
use crate::cone_constructions::{derivative_coefficient, double_warped};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::lie_matrix::{
    decomposability_probe, invariant_null_line_search, lie_closure, stab_decompose,
    translational_ideal, MatrixAlgebra,
};
use crate::linalg::{self, DEFAULT_TOL};
use crate::pseudo_linear::{NullFrame, QuadraticSpace, SubspaceBasis};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

pub const DEFAULT_MAX_ORDER: usize = 3;
/// RK4 steps per unit of coordinate length.
pub const DEFAULT_STEPS_PER_UNIT: usize = 4096;
pub const LOOP_SIDES: [f64; 3] = [0.05, 0.1, 0.2];
/// Rank tolerance for loop-generated spans.
pub const LOOP_TOL: f64 = 1e-7;

/// A Lie algebra of endomorphisms of a tangent space.
#[derive(Debug, Clone)]
pub struct EndoSpan {
    pub point: Vec<f64>,
    pub metric_at_point: DMatrix<f64>,
    pub basis: Vec<DMatrix<f64>>,
    pub generation_order: usize,
    pub tol: f64,
    /// span dimension after including derivatives of order `0..=k`
    pub dim_by_order: Vec<usize>,
    /// dimension unchanged by the last order increment
    pub converged: bool,
}

impl EndoSpan {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn algebra(&self) -> MatrixAlgebra {
        MatrixAlgebra::from_basis(self.metric_at_point.nrows(), self.basis.clone(), self.tol)
            .unwrap_or_else(|_| MatrixAlgebra::zero(self.metric_at_point.nrows()))
    }

    /// Largest `|gA + Aᵀg|` over the basis.
    pub fn skew_residual(&self) -> f64 {
        let g = &self.metric_at_point;
        self.basis
            .iter()
            .map(|a| linalg::max_abs(&(g * a + a.transpose() * g)))
            .fold(0.0, f64::max)
    }
}

fn reduce(generators: &[DMatrix<f64>], n: usize, tol: f64) -> Vec<DMatrix<f64>> {
    if generators.is_empty() {
        return Vec::new();
    }
    let cols: Vec<DVector<f64>> = generators.iter().map(linalg::flatten).collect();
    let m = linalg::columns_to_matrix(&cols, n * n);
    if linalg::max_abs(&m) == 0.0 {
        return Vec::new();
    }
    let q = linalg::image(&m, tol);
    linalg::matrix_columns(&q)
        .iter()
        .map(|c| linalg::unflatten(c, n))
        .collect()
}

fn closure(generators: &[DMatrix<f64>], n: usize, tol: f64) -> Result<Vec<DMatrix<f64>>> {
    let reduced = reduce(generators, n, tol);
    if reduced.is_empty() {
        return Ok(Vec::new());
    }
    Ok(lie_closure(&reduced, tol)?.basis().to_vec())
}

/// Lie closure of `(∇^k R)(∂_{a_1}, …, ∂_{a_k}; ∂_i, ∂_j)` for `k ≤ max_order`.
pub fn ambrose_singer_span(
    chart: &MetricChart,
    p: &[f64],
    max_order: usize,
    tol: f64,
) -> Result<EndoSpan> {
    let n = chart.dim();
    let cj = curvature_jet(chart, p, max_order)?;
    let mut generators = Vec::new();
    let mut dim_by_order = Vec::with_capacity(max_order + 1);
    let mut basis = Vec::new();
    for k in 0..=max_order {
        let mut prefix = vec![0usize; k + 2];
        let total = n.pow(k as u32);
        for flat in 0..total {
            let mut rest = flat;
            for slot in (0..k).rev() {
                prefix[slot] = rest % n;
                rest /= n;
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    prefix[k] = i;
                    prefix[k + 1] = j;
                    generators.push(cj.endomorphism(k, &prefix));
                }
            }
        }
        generators = reduce(&generators, n, tol);
        basis = closure(&generators, n, tol)?;
        dim_by_order.push(basis.len());
    }
    let converged = max_order == 0 || dim_by_order[max_order] == dim_by_order[max_order - 1];
    Ok(EndoSpan {
        point: p.to_vec(),
        metric_at_point: cj.metric_at_point.clone(),
        basis,
        generation_order: max_order,
        tol,
        dim_by_order,
        converged,
    })
}

/// Comparison of two spans of matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpanComparison {
    pub dim_a: usize,
    pub dim_b: usize,
    /// sine of the largest principal angle; 1 when the dimensions differ
    pub principal_distance: f64,
    pub a_in_b: bool,
    pub b_in_a: bool,
}

fn orthonormal_flat(basis: &[DMatrix<f64>], n: usize) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = basis.iter().map(linalg::flatten).collect();
    let m = linalg::columns_to_matrix(&cols, n * n);
    if m.ncols() == 0 {
        return m;
    }
    linalg::image(&m, DEFAULT_TOL)
}

/// Principal-angle comparison of two matrix spans; containment is decided at `tol`.
pub fn span_compare(a: &[DMatrix<f64>], b: &[DMatrix<f64>], n: usize, tol: f64) -> SpanComparison {
    let qa = orthonormal_flat(a, n);
    let qb = orthonormal_flat(b, n);
    let (dim_a, dim_b) = (qa.ncols(), qb.ncols());
    let inside = |x: &DMatrix<f64>, y: &DMatrix<f64>| {
        x.column_iter()
            .all(|c| linalg::residual_outside(y, &c.into_owned()).norm() <= tol)
    };
    let a_in_b = inside(&qa, &qb);
    let b_in_a = inside(&qb, &qa);
    let principal_distance = if dim_a != dim_b {
        1.0
    } else if dim_a == 0 {
        0.0
    } else {
        let s = linalg::full_svd(&(qa.transpose() * &qb)).singular;
        let cos_min = s.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
        (1.0 - cos_min * cos_min).max(0.0).sqrt()
    };
    SpanComparison {
        dim_a,
        dim_b,
        principal_distance,
        a_in_b,
        b_in_a,
    }
}

/// A coordinate curve on `[0, 1]` returning position and velocity.
pub type Curve = Arc<dyn Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync>;

#[derive(Clone)]
pub enum Segment {
    Line { from: Vec<f64>, to: Vec<f64> },
    Curve { curve: Curve, length: f64 },
}

impl Segment {
    fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        match self {
            Segment::Line { from, to } => {
                let vel: Vec<f64> = to.iter().zip(from).map(|(b, a)| b - a).collect();
                let pos = from.iter().zip(&vel).map(|(a, d)| a + t * d).collect();
                (pos, vel)
            }
            Segment::Curve { curve, .. } => curve(t),
        }
    }

    fn length(&self) -> f64 {
        match self {
            Segment::Line { from, to } => from
                .iter()
                .zip(to)
                .map(|(a, b)| (b - a).powi(2))
                .sum::<f64>()
                .sqrt(),
            Segment::Curve { length, .. } => *length,
        }
    }
}

/// Piecewise smooth path.
#[derive(Clone)]
pub struct PathSpec {
    pub segments: Vec<Segment>,
    pub closed: bool,
}

impl PathSpec {
    pub fn new(segments: Vec<Segment>, closed: bool) -> Result<PathSpec> {
        if segments.is_empty() {
            return Err(Error::InvalidInput(
                "a path needs at least one segment".into(),
            ));
        }
        let gap = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        for w in segments.windows(2) {
            if gap(&w[0].eval(1.0).0, &w[1].eval(0.0).0) > 1e-12 {
                return Err(Error::InvalidInput(
                    "consecutive segments do not meet".into(),
                ));
            }
        }
        if closed {
            let start = segments[0].eval(0.0).0;
            let end = segments[segments.len() - 1].eval(1.0).0;
            if gap(&start, &end) > 1e-12 {
                return Err(Error::InvalidInput(
                    "closed path does not return to its start".into(),
                ));
            }
        }
        Ok(PathSpec { segments, closed })
    }

    /// Straight segments through `vertices`, closed back to the first one if asked.
    pub fn polygon(vertices: &[Vec<f64>], closed: bool) -> Result<PathSpec> {
        let mut segments: Vec<Segment> = vertices
            .windows(2)
            .map(|w| Segment::Line {
                from: w[0].clone(),
                to: w[1].clone(),
            })
            .collect();
        if closed && vertices.len() > 1 {
            segments.push(Segment::Line {
                from: vertices[vertices.len() - 1].clone(),
                to: vertices[0].clone(),
            });
        }
        PathSpec::new(segments, closed)
    }

    /// Coordinate parallelogram of side `h` through `p`, first along `∂_a`, then `∂_b`.
    pub fn parallelogram(p: &[f64], a: usize, b: usize, h: f64) -> PathSpec {
        let mut v1 = p.to_vec();
        v1[a] += h;
        let mut v2 = v1.clone();
        v2[b] += h;
        let mut v3 = p.to_vec();
        v3[b] += h;
        PathSpec::polygon(&[p.to_vec(), v1, v2, v3], true).expect("closed parallelogram")
    }
}

fn christoffel_contraction(chart: &MetricChart, pos: &[f64], vel: &[f64]) -> Result<DMatrix<f64>> {
    chart
        .check_point(pos)
        .map_err(|_| Error::Integration(format!("path leaves the chart domain at {pos:?}")))?;
    let n = chart.dim();
    let gamma = christoffel_at(chart, pos)?;
    Ok(DMatrix::from_fn(n, n, |l, m| {
        (0..n).map(|a| gamma[(l * n + a) * n + m] * vel[a]).sum()
    }))
}

/// Transport matrix `P` (columns are transported coordinate vectors) of
/// `Ẋ + Γ(γ̇)X = 0` by fixed-step RK4.
pub fn parallel_transport(
    chart: &MetricChart,
    path: &PathSpec,
    steps_per_unit: usize,
) -> Result<DMatrix<f64>> {
    if steps_per_unit == 0 {
        return Err(Error::Integration("step count must be positive".into()));
    }
    let n = chart.dim();
    let mut p = DMatrix::identity(n, n);
    for seg in &path.segments {
        let steps = ((seg.length() * steps_per_unit as f64).ceil() as usize).max(1);
        let dt = 1.0 / steps as f64;
        let rhs = |t: f64, x: &DMatrix<f64>| -> Result<DMatrix<f64>> {
            let (pos, vel) = seg.eval(t);
            Ok(-christoffel_contraction(chart, &pos, &vel)? * x)
        };
        for k in 0..steps {
            let t = k as f64 * dt;
            let k1 = rhs(t, &p)?;
            let k2 = rhs(t + 0.5 * dt, &(&p + &k1 * (0.5 * dt)))?;
            let k3 = rhs(t + 0.5 * dt, &(&p + &k2 * (0.5 * dt)))?;
            let k4 = rhs(t + dt, &(&p + &k3 * dt))?;
            p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        }
        if !p.iter().all(|x| x.is_finite()) {
            return Err(Error::Integration("transport diverged".into()));
        }
    }
    Ok(p)
}

/// `|PᵀgP − g|` for a transport matrix at the start point of a loop.
pub fn metric_preservation_residual(g: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    linalg::max_abs(&(p.transpose() * g * p - g))
}

fn sqrt_denman_beavers(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..60 {
        let y_inv = y.clone().try_inverse().ok_or_else(|| {
            Error::Numerical("square root iteration hit a singular matrix".into())
        })?;
        let z_inv = z.clone().try_inverse().ok_or_else(|| {
            Error::Numerical("square root iteration hit a singular matrix".into())
        })?;
        let y_next = (&y + z_inv) * 0.5;
        let z_next = (&z + y_inv) * 0.5;
        let change = linalg::max_abs(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if change < 1e-15 * linalg::max_abs(&y).max(1.0) {
            return Ok(y);
        }
    }
    Ok(y)
}

/// Principal logarithm of a matrix near the identity (inverse scaling and
/// squaring with a Taylor series).
pub fn matrix_log(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let id = DMatrix::identity(n, n);
    let mut m = a.clone();
    let mut squarings = 0;
    while linalg::max_abs(&(&m - &id)) > 0.05 {
        if squarings > 40 {
            return Err(Error::Numerical(
                "matrix is too far from the identity for a logarithm".into(),
            ));
        }
        m = sqrt_denman_beavers(&m)?;
        squarings += 1;
    }
    let x = &m - &id;
    let mut term = x.clone();
    let mut sum = DMatrix::zeros(n, n);
    for j in 1..200 {
        let contrib = &term / j as f64;
        if j % 2 == 1 {
            sum += &contrib;
        } else {
            sum -= &contrib;
        }
        if linalg::max_abs(&contrib) < 1e-18 {
            break;
        }
        term = &term * &x;
    }
    Ok(sum * 2f64.powi(squarings))
}

/// One transported loop and its normalised logarithm `log(P)/h²`.
#[derive(Debug, Clone)]
pub struct LoopSample {
    pub plane: (usize, usize),
    pub side: f64,
    pub transport: DMatrix<f64>,
    pub scaled_log: DMatrix<f64>,
    pub metric_residual: f64,
}

/// Transports around coordinate parallelograms in every coordinate plane through `p`.
pub fn loop_battery(
    chart: &MetricChart,
    p: &[f64],
    sides: &[f64],
    steps_per_unit: usize,
) -> Result<Vec<LoopSample>> {
    let n = chart.dim();
    let g = chart.metric_at(p)?;
    let jobs: Vec<((usize, usize), f64)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .flat_map(|plane| sides.iter().map(move |&h| (plane, h)))
        .collect();
    jobs.par_iter()
        .map(|&((a, b), h)| {
            let path = PathSpec::parallelogram(p, a, b, h);
            let transport = parallel_transport(chart, &path, steps_per_unit)?;
            let scaled_log = matrix_log(&transport)? / (h * h);
            let metric_residual = metric_preservation_residual(&g, &transport);
            Ok(LoopSample {
                plane: (a, b),
                side: h,
                transport,
                scaled_log,
                metric_residual,
            })
        })
        .collect()
}

/// Lie closure of the loop logarithms.
pub fn loop_span(
    chart: &MetricChart,
    p: &[f64],
    sides: &[f64],
    steps_per_unit: usize,
    tol: f64,
) -> Result<EndoSpan> {
    let n = chart.dim();
    let samples = loop_battery(chart, p, sides, steps_per_unit)?;
    let generators: Vec<DMatrix<f64>> = samples.iter().map(|s| s.scaled_log.clone()).collect();
    let basis = closure(&generators, n, tol)?;
    Ok(EndoSpan {
        point: p.to_vec(),
        metric_at_point: chart.metric_at(p)?,
        dim_by_order: vec![basis.len()],
        basis,
        generation_order: 0,
        tol,
        converged: true,
    })
}

/// Null frame of a doubled chart: `e₋ = ∂_v`, `e₊ = ∂_u`, `V₀` the base coordinate directions.
pub fn doubled_null_frame(metric: &DMatrix<f64>) -> Result<(QuadraticSpace, NullFrame)> {
    let n = metric.nrows();
    if n < 2 {
        return Err(Error::Frame(
            "a doubled chart has at least two coordinates".into(),
        ));
    }
    let mut off = metric[(0, 0)]
        .abs()
        .max(metric[(1, 1)].abs())
        .max((metric[(0, 1)] - 1.0).abs());
    for j in 2..n {
        off = off.max(metric[(0, j)].abs()).max(metric[(1, j)].abs());
    }
    if off > 1e-12 {
        return Err(Error::Frame("metric is not of the form 2dudv + u²g".into()));
    }
    let space = QuadraticSpace::new(metric.clone())?;
    let unit = |i: usize| {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    };
    let v0 = SubspaceBasis::new(n, (2..n).map(unit).collect(), DEFAULT_TOL)?;
    let frame = NullFrame::new(&space, unit(1), unit(0), v0)?;
    Ok((space, frame))
}

/// The two generators published for the doubled `e^z y²` plane wave at
/// `u = 1, v = x = y = z = 0`, converted from the basis
/// `(∂_v, ∂_x, ∂_y, ∂_z − f∂_x, ∂_u)` to the chart coordinates `(u, v, x, y, z)`.
pub fn plane_wave_exp_reference_generators() -> Vec<DMatrix<f64>> {
    let published = [
        [
            [0.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, -1.0, -1.0],
            [0.0; 5],
            [0.0; 5],
        ],
        [
            [0.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, -1.0],
            [0.0; 5],
            [0.0; 5],
            [0.0; 5],
        ],
    ];
    // published index -> chart coordinate; f vanishes at the point
    let to_chart = [1usize, 2, 3, 4, 0];
    published
        .iter()
        .map(|rows| {
            let mut m = DMatrix::zeros(5, 5);
            for (i, row) in rows.iter().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    m[(to_chart[i], to_chart[j])] = x;
                }
            }
            m
        })
        .collect()
}

/// Stabiliser-form decomposition of a span.
#[derive(Debug, Clone)]
pub struct StabilizerReport {
    pub in_stabiliser: bool,
    pub diagnosis: Option<String>,
    pub linear_part: Option<MatrixAlgebra>,
    pub translations: Option<SubspaceBasis>,
    pub decomposable_witness: Option<SubspaceBasis>,
    pub null_line: Option<SubspaceBasis>,
}

pub fn stabilizer_analysis(
    span: &EndoSpan,
    space: &QuadraticSpace,
    frame: &NullFrame,
) -> StabilizerReport {
    let alg = span.algebra();
    let probe = decomposability_probe(&alg, space)
        .ok()
        .and_then(|p| p.witness);
    let null_line = invariant_null_line_search(&alg, space);
    let mut report = StabilizerReport {
        in_stabiliser: false,
        diagnosis: None,
        linear_part: None,
        translations: None,
        decomposable_witness: probe,
        null_line,
    };
    let mut linear = Vec::new();
    for m in &span.basis {
        match stab_decompose(m, frame) {
            Ok(e) => linear.push(e.x),
            Err(err) => {
                report.diagnosis = Some(format!("span leaves the stabiliser of e₋: {err}"));
                return report;
            }
        }
    }
    report.in_stabiliser = true;
    let k = frame.dim() - 2;
    report.linear_part = match closure(&linear, k, span.tol) {
        Ok(b) if b.is_empty() => Some(MatrixAlgebra::zero(k)),
        Ok(b) => MatrixAlgebra::from_basis(k, b, span.tol).ok(),
        Err(_) => None,
    };
    match translational_ideal(&alg, frame) {
        Ok(t) => report.translations = Some(t),
        Err(err) => report.diagnosis = Some(err.to_string()),
    }
    report
}

/// Largest `|g(v, X)|` over translational parts `v` of the span, for a base vector `X` in `V₀` coordinates.
pub fn translation_orthogonality_residual(
    span: &EndoSpan,
    frame: &NullFrame,
    x: &DVector<f64>,
) -> Result<f64> {
    let gram = frame.v0_gram();
    let mut worst = 0.0f64;
    for m in &span.basis {
        let e = stab_decompose(m, frame)?;
        let scale = linalg::max_abs(m).max(1e-300);
        worst = worst.max((e.v.dot(&(&gram * x))).abs() / scale);
    }
    Ok(worst)
}

/// Residual of the closed-form projections of `∇̃^q_{∂u} ∇̃^r_{∂z} ∇̃^s_{∂k} R̃ (∂_i, ∂_z)`,
/// `r + s ≤ 1`, on a doubled pp-wave at a point where the profile and its
/// first derivatives vanish.
pub fn pp_projection_residual(
    m: usize,
    profile: &Profile,
    base_point: &[f64],
    u: f64,
    qmax: usize,
) -> Result<f64> {
    let n = m + 2;
    if base_point.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: base_point.len(),
        });
    }
    let seeds = Jet::seed(&base_point[1..], 3);
    let fj = profile(&seeds[..m], &seeds[m]);
    let d = |idx: &[usize]| {
        let mut e = vec![0u8; m + 1];
        for &i in idx {
            e[i] += 1;
        }
        fj.partial(&e)
    };
    let first: f64 = (0..=m).map(|i| d(&[i]).abs()).fold(0.0, f64::max);
    if fj.value().abs() > 1e-12 || first > 1e-12 {
        return Err(Error::Precondition {
            point: base_point.to_vec(),
            message: "profile and its gradient must vanish at the point".into(),
        });
    }
    let base = crate::charts::pp_wave(m, profile.clone(), "pp_wave");
    let doubled = double_warped(&base);
    let mut point = vec![u, 0.0];
    point.extend_from_slice(base_point);
    let cj = curvature_jet(&doubled, &point, qmax + 1)?;
    let (_, frame) = doubled_null_frame(&cj.metric_at_point)?;
    // doubled coordinates (u, v, x, y.., z); profile variables (y.., z)
    let (du, dz) = (0usize, m + 3);
    let mut worst = 0.0f64;
    for q in 0..=qmax {
        let mut cases: Vec<(usize, Option<usize>)> = vec![(0, None), (1, None)];
        cases.extend((0..m).map(|k| (0, Some(k))));
        for (r, k) in cases {
            let s = usize::from(k.is_some());
            let c = derivative_coefficient(r + s, q);
            for i in 0..m {
                let mut prefix = vec![du; q];
                prefix.extend(std::iter::repeat(dz).take(r));
                if let Some(k) = k {
                    prefix.push(3 + k);
                }
                prefix.push(3 + i);
                prefix.push(dz);
                let mat = cj.endomorphism(q + r + s, &prefix);
                let elem = stab_decompose(&mat, &frame)?;
                let mut extra: Vec<usize> = vec![m; r];
                if let Some(k) = k {
                    extra.push(k);
                }
                let mut linear = DMatrix::zeros(n, n);
                for j in 0..m {
                    let mut idx = extra.clone();
                    idx.push(i);
                    idx.push(j);
                    let fval = d(&idx);
                    linear[(0, 1 + j)] = fval;
                    linear[(1 + j, n - 1)] = -fval;
                }
                linear *= c / u.powi(q as i32);
                let mut w = DVector::zeros(n);
                if let Some(k) = k {
                    w[0] = d(&[k, i]);
                }
                if r == 1 {
                    for j in 0..m {
                        w[1 + j] = -d(&[i, j]);
                    }
                }
                let v_expected = w * (-c * u.powi(-1 - q as i32));
                worst = worst
                    .max(linalg::max_abs(&(&elem.x - linear)))
                    .max(linalg::max_abs_vec(&(&elem.v - v_expected)))
                    .max(elem.a.abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{cahen_wallach, flat, hyperbolic, plane_wave_exp, sphere};
    use crate::cone_constructions::cone;
    use std::f64::consts::PI;

    #[test]
    fn cone_spans() {
        let s =
            ambrose_singer_span(&cone(&sphere(2)), &[1.0, PI / 3.0, 0.0], 1, DEFAULT_TOL).unwrap();
        assert_eq!(s.dim(), 3);
        assert!(s.skew_residual() < 1e-8);
        let h =
            ambrose_singer_span(&cone(&hyperbolic(2)), &[1.0, 0.0, 1.0], 1, DEFAULT_TOL).unwrap();
        assert_eq!(h.dim(), 0);
    }

    #[test]
    fn flat_loops_are_trivial() {
        let chart = flat(1, 2);
        let path = PathSpec::parallelogram(&[0.0, 0.1, 0.2], 0, 2, 0.3);
        let p = parallel_transport(&chart, &path, 256).unwrap();
        assert!(linalg::max_abs(&(p - DMatrix::identity(3, 3))) < 1e-10);
    }

    #[test]
    fn sphere_loop_logs_approach_curvature() {
        let chart = sphere(2);
        let p = [PI / 3.0, 0.0];
        let cj = curvature_jet(&chart, &p, 0).unwrap();
        let r = cj.endomorphism(0, &[0, 1]);
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| {
                let path = PathSpec::parallelogram(&p, 0, 1, h);
                let t = parallel_transport(&chart, &path, DEFAULT_STEPS_PER_UNIT).unwrap();
                assert!(metric_preservation_residual(&cj.metric_at_point, &t) < 1e-7);
                linalg::max_abs(&(matrix_log(&t).unwrap() / (h * h) + &r))
            })
            .collect();
        assert!(errs[2] < 0.05, "{errs:?}");
        // first-order convergence
        assert!(
            errs[0] / errs[1] > 1.6 && errs[1] / errs[2] > 1.6,
            "{errs:?}"
        );
    }

    #[test]
    fn matrix_log_inverts_exp() {
        let x = DMatrix::from_row_slice(3, 3, &[0.0, 0.3, -0.1, -0.3, 0.0, 0.2, 0.1, -0.2, 0.0]);
        let e = x.clone().exp();
        assert!(linalg::max_abs(&(matrix_log(&e).unwrap() - x)) < 1e-12);
    }

    #[test]
    fn loop_and_curvature_spans_agree_on_sphere_cone() {
        let chart = cone(&sphere(2));
        let p = [1.0, PI / 3.0, 0.0];
        let a = ambrose_singer_span(&chart, &p, 1, DEFAULT_TOL).unwrap();
        let b = loop_span(&chart, &p, &LOOP_SIDES, DEFAULT_STEPS_PER_UNIT, LOOP_TOL).unwrap();
        let cmp = span_compare(&a.basis, &b.basis, 3, 1e-6);
        assert_eq!((cmp.dim_a, cmp.dim_b), (3, 3));
        assert!(cmp.principal_distance < 1e-5);
    }

    #[test]
    fn compare_nested_spans() {
        let so3 = crate::lie_matrix::so_algebra(3);
        let so2 = vec![so3.basis()[0].clone()];
        let cmp = span_compare(&so2, so3.basis(), 3, 1e-9);
        assert!(cmp.a_in_b && !cmp.b_in_a);
        assert_eq!(cmp.principal_distance, 1.0);
        assert_eq!(
            span_compare(so3.basis(), so3.basis(), 3, 1e-9).principal_distance,
            0.0
        );
    }

    #[test]
    fn doubled_cahen_wallach() {
        let base = cahen_wallach(&DMatrix::identity(2, 2)).unwrap();
        let chart = double_warped(&base);
        let p = [1.0, 0.0, 0.1, 0.2, -0.1, 0.3];
        let span = ambrose_singer_span(&chart, &p, 3, DEFAULT_TOL).unwrap();
        assert_eq!(span.dim(), 5);
        let (space, frame) = doubled_null_frame(&span.metric_at_point).unwrap();
        let rep = stabilizer_analysis(&span, &space, &frame);
        assert!(rep.in_stabiliser);
        assert_eq!(rep.linear_part.unwrap().dim(), 2);
        assert_eq!(rep.translations.unwrap().dim(), 3);
        // ∂_x is parallel on the base
        let x = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert!(translation_orthogonality_residual(&span, &frame, &x).unwrap() < 1e-8);
    }

    #[test]
    fn doubled_sphere_is_semidirect() {
        let chart = double_warped(&sphere(2));
        let p = [1.0, 0.0, 1.0, 0.3];
        let span = ambrose_singer_span(&chart, &p, 2, DEFAULT_TOL).unwrap();
        assert_eq!(span.dim(), 3);
        let base = ambrose_singer_span(&sphere(2), &p[2..], 2, DEFAULT_TOL).unwrap();
        let (space, frame) = doubled_null_frame(&span.metric_at_point).unwrap();
        let rep = stabilizer_analysis(&span, &space, &frame);
        let lin = rep.linear_part.unwrap();
        assert!(span_compare(lin.basis(), &base.basis, 2, 1e-8).principal_distance < 1e-6);
        assert_eq!(rep.translations.unwrap().dim(), 2);
    }

    #[test]
    fn doubled_loop_projects_to_base_loop() {
        let base = sphere(2);
        let chart = double_warped(&base);
        let bp = [1.0, 0.3];
        let h = 0.2;
        let base_t = parallel_transport(
            &base,
            &PathSpec::parallelogram(&bp, 0, 1, h),
            DEFAULT_STEPS_PER_UNIT,
        )
        .unwrap();
        let dp = [1.3, 0.2, 1.0, 0.3];
        let t = parallel_transport(
            &chart,
            &PathSpec::parallelogram(&dp, 2, 3, h),
            DEFAULT_STEPS_PER_UNIT,
        )
        .unwrap();
        let block = t.view((2, 2), (2, 2)).into_owned();
        assert!(linalg::max_abs(&(block - base_t)) < 1e-6);
    }

    #[test]
    fn pp_wave_projection_formulas() {
        let profile: Profile = Arc::new(|y: &[Jet], z: &Jet| {
            (z.exp() * &y[0] * &y[0]).scale(0.5)
                + &(&y[0] * &y[1]) * z
                + (&y[1] * &y[1]) * &(z * z + 1.0)
        });
        for u in [1.0, 1.7] {
            let r = pp_projection_residual(2, &profile, &[0.3, 0.0, 0.0, 0.4], u, 2).unwrap();
            assert!(r < 1e-8, "u = {u}: {r}");
        }
    }

    #[test]
    fn plane_wave_exp_span_contains_published_generators() {
        let chart = double_warped(&plane_wave_exp());
        let p = [1.0, 0.0, 0.0, 0.0, 0.0];
        let span = ambrose_singer_span(&chart, &p, 3, DEFAULT_TOL).unwrap();
        assert_eq!(span.dim_by_order, vec![1, 3, 3, 3]);
        assert!(span.converged);
        let reference = plane_wave_exp_reference_generators();
        for m in &reference {
            assert!(
                linalg::max_abs(
                    &(&span.metric_at_point * m + m.transpose() * &span.metric_at_point)
                ) < 1e-14
            );
        }
        let cmp = span_compare(&reference, &span.basis, 5, 1e-8);
        assert!(cmp.a_in_b && !cmp.b_in_a);
        let loops = loop_span(&chart, &p, &LOOP_SIDES, DEFAULT_STEPS_PER_UNIT, LOOP_TOL).unwrap();
        assert!(span_compare(&loops.basis, &span.basis, 5, 1e-6).principal_distance < 1e-5);
    }
}
