//! Metric charts evaluated on jets, and the curvature machinery built on them.
//!
//! Index conventions (see `docs/conventions.md`):
//! - `Γ^l_{ab}` is stored at `[l][a][b]`;
//! - `R(∂_i,∂_j)∂_k = Σ_l R[i][j][k][l] ∂_l` with
//!   `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]}Z`;
//! - `∇^k R` is stored at `[a_1..a_k][i][j][k][l]` where `a_1` is the
//!   outermost derivative.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{Jet, JetSpace};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Metric components `g_ij` (row-major) from coordinate jets.
pub type ComponentFn = Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>;
/// Vector field components from coordinate jets.
pub type VectorField = Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>;
/// Scalar function of coordinate jets.
pub type ScalarField = Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync>;

/// Default number of sample points per chart.
pub const DEFAULT_GRID_POINTS: usize = 32;
/// Default seed of the sample grid shift.
pub const DEFAULT_GRID_SEED: u64 = 7;
/// Default truncation order of curvature jets.
pub const DEFAULT_JET_ORDER: usize = 6;

/// Axis-aligned coordinate box; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CoordBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> CoordBox {
        assert_eq!(lower.len(), upper.len());
        CoordBox { lower, upper }
    }

    pub fn unbounded(dim: usize) -> CoordBox {
        CoordBox::new(vec![f64::NEG_INFINITY; dim], vec![f64::INFINITY; dim])
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.lower.len()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    /// Prepends one axis.
    pub fn prepend(&self, lower: f64, upper: f64) -> CoordBox {
        let mut lo = vec![lower];
        lo.extend(&self.lower);
        let mut hi = vec![upper];
        hi.extend(&self.upper);
        CoordBox::new(lo, hi)
    }
}

/// A single-chart semi-Riemannian metric.
#[derive(Clone)]
pub struct MetricChart {
    label: String,
    coords: Vec<String>,
    signature: (usize, usize),
    domain: CoordBox,
    sample_box: CoordBox,
    components: ComponentFn,
}

impl fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricChart")
            .field("label", &self.label)
            .field("coords", &self.coords)
            .field("signature", &self.signature)
            .field("domain", &self.domain)
            .finish()
    }
}

impl MetricChart {
    /// `sample_box` must be finite and inside `domain`.
    pub fn new(
        label: impl Into<String>,
        coords: Vec<String>,
        signature: (usize, usize),
        domain: CoordBox,
        sample_box: CoordBox,
        components: ComponentFn,
    ) -> MetricChart {
        assert_eq!(coords.len(), signature.0 + signature.1);
        assert_eq!(domain.lower.len(), coords.len());
        assert_eq!(sample_box.lower.len(), coords.len());
        MetricChart {
            label: label.into(),
            coords,
            signature,
            domain,
            sample_box,
            components,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn signature(&self) -> (usize, usize) {
        self.signature
    }

    pub fn domain(&self) -> &CoordBox {
        &self.domain
    }

    pub fn sample_box(&self) -> &CoordBox {
        &self.sample_box
    }

    pub fn components(&self) -> &ComponentFn {
        &self.components
    }

    pub fn with_label(mut self, label: impl Into<String>) -> MetricChart {
        self.label = label.into();
        self
    }

    pub fn with_sample_box(mut self, sample_box: CoordBox) -> MetricChart {
        self.sample_box = sample_box;
        self
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.len(),
            });
        }
        if !self.domain.contains(p) {
            return Err(Error::OutsideDomain { point: p.to_vec() });
        }
        Ok(())
    }

    /// Metric components as jets of the given order around `p`.
    pub fn metric_jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.check_point(p)?;
        let g = (self.components)(&Jet::seed(p, order));
        if g.len() != self.dim() * self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim() * self.dim(),
                found: g.len(),
            });
        }
        Ok(g)
    }

    pub fn metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.metric_jets(p, 0)?;
        let n = self.dim();
        Ok(DMatrix::from_fn(n, n, |i, j| g[i * n + j].value()))
    }

    /// Deterministic low-discrepancy sample of the sample box (Halton
    /// sequence with a seeded Cranley–Patterson shift).
    pub fn sample_grid(&self, points: usize, seed: u64) -> Vec<Vec<f64>> {
        sample_box_grid(&self.sample_box, points, seed)
    }

    /// Checks symmetry and signature at every grid point.
    pub fn validate(&self, points: usize, seed: u64) -> Result<()> {
        for p in self.sample_grid(points, seed) {
            let g = self.metric_at(&p)?;
            let asym = crate::linalg::max_abs(&(&g - g.transpose()));
            if asym > 1e-12 * crate::linalg::max_abs(&g).max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "metric not symmetric at {p:?}"
                )));
            }
            let sig = crate::pseudo_linear::signature_of(&g)
                .map_err(|_| Error::SingularMetric { point: p.clone() })?;
            if sig != self.signature {
                return Err(Error::InvalidInput(format!(
                    "signature {sig:?} at {p:?} differs from declared {:?}",
                    self.signature
                )));
            }
        }
        Ok(())
    }
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut f = inv;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    out
}

/// Shifted Halton points in a finite box.
pub fn sample_box_grid(b: &CoordBox, points: usize, seed: u64) -> Vec<Vec<f64>> {
    let dim = b.lower.len();
    assert!(
        dim <= PRIMES.len(),
        "sample grids support at most {} axes",
        PRIMES.len()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    (0..points)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let u = (radical_inverse(i as u64 + 1, PRIMES[d]) + shift[d]).fract();
                    b.lower[d] + u * (b.upper[d] - b.lower[d])
                })
                .collect()
        })
        .collect()
}

/// Coefficient arrays of a tensor field: `components × coefficients`.
#[derive(Clone)]
struct TensorJets {
    order: usize,
    stride: usize,
    data: Vec<f64>,
}

impl TensorJets {
    fn zeros(num_vars: usize, order: usize, count: usize) -> TensorJets {
        let stride = JetSpace::get(num_vars, order).len();
        TensorJets {
            order,
            stride,
            data: vec![0.0; stride * count],
        }
    }

    fn from_jets(jets: &[Jet], order: usize) -> TensorJets {
        let num_vars = jets[0].num_vars();
        let mut t = TensorJets::zeros(num_vars, order, jets.len());
        for (c, j) in jets.iter().enumerate() {
            let src = j.coeffs();
            t.data[c * t.stride..(c + 1) * t.stride].copy_from_slice(&src[..t.stride]);
        }
        t
    }

    fn comp(&self, c: usize) -> &[f64] {
        &self.data[c * self.stride..(c + 1) * self.stride]
    }

    fn values(&self) -> Vec<f64> {
        self.data.iter().step_by(self.stride).copied().collect()
    }
}

/// Metric, inverse metric and Christoffel symbols as jets around a point.
pub struct ConnectionJets {
    pub dim: usize,
    pub order: usize,
    pub metric: Vec<Jet>,
    pub inverse: Vec<Jet>,
    /// `[l][a][b]`, one order lower than the metric
    pub christoffel: Vec<Jet>,
}

/// Builds metric, inverse and Christoffel jets; the metric is expanded to `order ≥ 1`.
pub fn connection_jets(chart: &MetricChart, p: &[f64], order: usize) -> Result<ConnectionJets> {
    let n = chart.dim();
    let g = chart.metric_jets(p, order)?;
    let g0 = DMatrix::from_fn(n, n, |i, j| g[i * n + j].value());
    let g0_inv = g0
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::SingularMetric { point: p.to_vec() })?;
    let cond = g0.norm() * g0_inv.norm();
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::SingularMetric { point: p.to_vec() });
    }
    // g⁻¹ = Σ_j (−g₀⁻¹ h)^j g₀⁻¹ with h = g − g₀ nilpotent
    let zero = g[0].zero_like();
    let lift =
        |m: &DMatrix<f64>| -> Vec<Jet> { m.transpose().iter().map(|&x| zero.lift(x)).collect() };
    let k: Vec<Jet> = {
        let mut h = g.clone();
        for (idx, jet) in h.iter_mut().enumerate() {
            *jet = jet.clone() - g0[(idx / n, idx % n)];
        }
        matmul_const_left(&(-&g0_inv), &h, n)
    };
    let mut term = lift(&g0_inv);
    let mut inverse = term.clone();
    for _ in 0..order {
        term = matmul_jets(&k, &term, n);
        for (acc, t) in inverse.iter_mut().zip(&term) {
            *acc += t;
        }
    }
    let christoffel = if order == 0 {
        Vec::new()
    } else {
        let dg: Vec<Vec<Jet>> = (0..n)
            .map(|c| g.iter().map(|x| x.derivative(c)).collect())
            .collect();
        let mut lowered = Vec::with_capacity(n * n * n);
        for c in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let v = (&dg[a][c * n + b] + &dg[b][c * n + a] - &dg[c][a * n + b]).scale(0.5);
                    lowered.push(v);
                }
            }
        }
        let mut out = Vec::with_capacity(n * n * n);
        for l in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut acc = lowered[a * n + b].zero_like();
                    for c in 0..n {
                        acc += &(&inverse[l * n + c] * &lowered[(c * n + a) * n + b]);
                    }
                    out.push(acc);
                }
            }
        }
        out
    };
    Ok(ConnectionJets {
        dim: n,
        order,
        metric: g,
        inverse,
        christoffel,
    })
}

/// `Γ^l_{ab}` at `p` as `[l][a][b]`, from a first-order expansion of the metric.
pub fn christoffel_at(chart: &MetricChart, p: &[f64]) -> Result<Vec<f64>> {
    let n = chart.dim();
    let g = chart.metric_jets(p, 1)?;
    let g0 = DMatrix::from_fn(n, n, |i, j| g[i * n + j].value());
    let inv = g0
        .try_inverse()
        .ok_or_else(|| Error::SingularMetric { point: p.to_vec() })?;
    let dg: Vec<Vec<f64>> = g.iter().map(|x| x.gradient()).collect();
    let mut lowered = vec![0.0; n * n * n];
    for c in 0..n {
        for a in 0..n {
            for b in 0..n {
                lowered[(c * n + a) * n + b] =
                    0.5 * (dg[c * n + b][a] + dg[c * n + a][b] - dg[a * n + b][c]);
            }
        }
    }
    let mut out = vec![0.0; n * n * n];
    for l in 0..n {
        for c in 0..n {
            let w = inv[(l, c)];
            if w == 0.0 {
                continue;
            }
            for ab in 0..n * n {
                out[l * n * n + ab] += w * lowered[c * n * n + ab];
            }
        }
    }
    Ok(out)
}

fn matmul_jets(a: &[Jet], b: &[Jet], n: usize) -> Vec<Jet> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = a[i * n].zero_like();
            for k in 0..n {
                acc += &(&a[i * n + k] * &b[k * n + j]);
            }
            out.push(acc);
        }
    }
    out
}

fn matmul_const_left(a: &DMatrix<f64>, b: &[Jet], n: usize) -> Vec<Jet> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = b[0].zero_like();
            for k in 0..n {
                if a[(i, k)] != 0.0 {
                    acc += &b[k * n + j].scale(a[(i, k)]);
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Curvature and its covariant derivatives at a point.
#[derive(Debug, Clone)]
pub struct CurvatureJet {
    pub point: Vec<f64>,
    pub dim: usize,
    pub metric_at_point: DMatrix<f64>,
    /// `∂_c g_ab` at `[c][a][b]`
    pub metric_gradient: Vec<f64>,
    /// `Γ^l_{ab}` at `[l][a][b]`
    pub christoffel: Vec<f64>,
    /// `R(∂_i,∂_j)∂_k` component `l` at `[i][j][k][l]`
    pub curvature: Vec<f64>,
    /// `derivs[k-1]` holds `∇^k R` at `[a_1..a_k][i][j][k][l]`
    pub derivs: Vec<Vec<f64>>,
}

/// Covariant derivative of a tensor with `rank` covariant slots followed by
/// one contravariant slot; the new slot is prepended.
fn covariant_derivative(t: &TensorJets, rank: usize, gamma: &TensorJets, n: usize) -> TensorJets {
    let out_order = t.order - 1;
    let src_space = JetSpace::get(n, t.order);
    let out_space = JetSpace::get(n, out_order);
    let count = n.pow(rank as u32 + 1);
    let mut out = TensorJets::zeros(n, out_order, count * n);
    let stride = out.stride;
    let pow: Vec<usize> = (0..=rank + 1).map(|e| n.pow(e as u32)).collect();
    for a in 0..n {
        for idx in 0..count {
            let dst = (a * count + idx) * stride;
            let slot = &mut out.data[dst..dst + stride];
            src_space.derivative_add(t.comp(idx), a, 1.0, slot);
            let l = idx % n;
            let covs = idx / n;
            // + Γ^l_{a m} T^m
            for m in 0..n {
                out_space.mul_add(
                    gamma.comp((l * n + a) * n + m),
                    t.comp(covs * n + m),
                    1.0,
                    slot,
                );
            }
            // − Γ^m_{a c_s} T_{..m..}
            for s in 0..rank {
                let place = pow[rank - 1 - s];
                let c_s = (covs / place) % n;
                let base = covs - c_s * place;
                for m in 0..n {
                    out_space.mul_add(
                        gamma.comp((m * n + a) * n + c_s),
                        t.comp((base + m * place) * n + l),
                        -1.0,
                        slot,
                    );
                }
            }
        }
    }
    out
}

/// Curvature and `∇R, …, ∇^k R` at `p`, from exact jets of order `k + 2`.
pub fn curvature_jet(chart: &MetricChart, p: &[f64], k: usize) -> Result<CurvatureJet> {
    let n = chart.dim();
    let order = k + 2;
    if order > crate::jet::MAX_JET_ORDER {
        return Err(Error::Config(format!(
            "derivative order {k} needs jets beyond the supported order"
        )));
    }
    let conn = connection_jets(chart, p, order)?;
    let gamma = TensorJets::from_jets(&conn.christoffel, order - 1);
    let gspace = JetSpace::get(n, order - 1);
    let rorder = order - 2;
    let rspace = JetSpace::get(n, rorder);
    let mut curv = TensorJets::zeros(n, rorder, n.pow(4));
    let stride = curv.stride;
    for i in 0..n {
        for j in 0..n {
            for kk in 0..n {
                for l in 0..n {
                    let dst = (((i * n + j) * n + kk) * n + l) * stride;
                    let slot = &mut curv.data[dst..dst + stride];
                    gspace.derivative_add(gamma.comp((l * n + j) * n + kk), i, 1.0, slot);
                    gspace.derivative_add(gamma.comp((l * n + i) * n + kk), j, -1.0, slot);
                    for m in 0..n {
                        rspace.mul_add(
                            gamma.comp((l * n + i) * n + m),
                            gamma.comp((m * n + j) * n + kk),
                            1.0,
                            slot,
                        );
                        rspace.mul_add(
                            gamma.comp((l * n + j) * n + m),
                            gamma.comp((m * n + i) * n + kk),
                            -1.0,
                            slot,
                        );
                    }
                }
            }
        }
    }
    let mut derivs = Vec::with_capacity(k);
    let mut current = curv.clone();
    for step in 0..k {
        current = covariant_derivative(&current, 3 + step, &gamma, n);
        derivs.push(current.values());
    }
    let metric_at_point = DMatrix::from_fn(n, n, |i, j| conn.metric[i * n + j].value());
    let mut metric_gradient = Vec::with_capacity(n * n * n);
    for c in 0..n {
        for ab in 0..n * n {
            metric_gradient.push(conn.metric[ab].gradient()[c]);
        }
    }
    Ok(CurvatureJet {
        point: p.to_vec(),
        dim: n,
        metric_at_point,
        metric_gradient,
        christoffel: conn.christoffel.iter().map(|j| j.value()).collect(),
        curvature: curv.values(),
        derivs,
    })
}

impl CurvatureJet {
    pub fn gamma(&self, l: usize, a: usize, b: usize) -> f64 {
        let n = self.dim;
        self.christoffel[(l * n + a) * n + b]
    }

    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.dim;
        self.curvature[((i * n + j) * n + k) * n + l]
    }

    /// `g(R(∂_i,∂_j)∂_k, ∂_w)`.
    pub fn r_lowered(&self, i: usize, j: usize, k: usize, w: usize) -> f64 {
        (0..self.dim)
            .map(|l| self.r(i, j, k, l) * self.metric_at_point[(l, w)])
            .sum()
    }

    pub fn max_order(&self) -> usize {
        self.derivs.len()
    }

    /// Component of `∇^order R`; `indices` lists `a_1..a_order, i, j, k, l`.
    pub fn component(&self, order: usize, indices: &[usize]) -> f64 {
        assert_eq!(indices.len(), order + 4);
        let flat = indices.iter().fold(0, |acc, &x| acc * self.dim + x);
        if order == 0 {
            self.curvature[flat]
        } else {
            self.derivs[order - 1][flat]
        }
    }

    /// `(∇^order R)(a_1..a_order; ∂_i, ∂_j)` as a matrix `M[l][k]`; `prefix`
    /// lists `a_1..a_order, i, j`.
    pub fn endomorphism(&self, order: usize, prefix: &[usize]) -> DMatrix<f64> {
        let n = self.dim;
        let mut idx = prefix.to_vec();
        idx.push(0);
        idx.push(0);
        DMatrix::from_fn(n, n, |l, k| {
            idx[order + 2] = k;
            idx[order + 3] = l;
            self.component(order, &idx)
        })
    }

    /// Contraction over the first and last curvature slots.
    pub fn ricci(&self) -> DMatrix<f64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |j, k| (0..n).map(|i| self.r(i, j, k, i)).sum())
    }

    /// Largest violation of the algebraic curvature symmetries.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        worst = worst.max((self.r(i, j, k, l) + self.r(j, i, k, l)).abs());
                        worst = worst.max(
                            (self.r(i, j, k, l) + self.r(j, k, i, l) + self.r(k, i, j, l)).abs(),
                        );
                        worst = worst
                            .max((self.r_lowered(i, j, k, l) + self.r_lowered(i, j, l, k)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Second Bianchi identity `∇_a R(b,c) + ∇_b R(c,a) + ∇_c R(a,b) = 0`.
    pub fn second_bianchi_residual(&self) -> f64 {
        if self.derivs.is_empty() {
            return 0.0;
        }
        let n = self.dim;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let s = self.component(1, &[a, b, c, k, l])
                                + self.component(1, &[b, c, a, k, l])
                                + self.component(1, &[c, a, b, k, l]);
                            worst = worst.max(s.abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// `∇_c g_ab = ∂_c g_ab − Γ^m_{ca} g_mb − Γ^m_{cb} g_am` at the point.
    pub fn metricity_residual(&self) -> f64 {
        let n = self.dim;
        let g = &self.metric_at_point;
        let mut worst = 0.0f64;
        for c in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut v = self.metric_gradient[(c * n + a) * n + b];
                    for m in 0..n {
                        v -= self.gamma(m, c, a) * g[(m, b)] + self.gamma(m, c, b) * g[(a, m)];
                    }
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }
}

/// Ricci tensor at `p`.
pub fn ricci(chart: &MetricChart, p: &[f64]) -> Result<DMatrix<f64>> {
    Ok(curvature_jet(chart, p, 0)?.ricci())
}

/// Max-norm of `R(X,Y)Z − κ(g(Y,Z)X − g(X,Z)Y)` on the coordinate frame.
pub fn constant_curvature_residual(chart: &MetricChart, p: &[f64], kappa: f64) -> Result<f64> {
    let cj = curvature_jet(chart, p, 0)?;
    let n = cj.dim;
    let g = &cj.metric_at_point;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let di = if l == i { 1.0 } else { 0.0 };
                    let dj = if l == j { 1.0 } else { 0.0 };
                    let model = kappa * (g[(j, k)] * di - g[(i, k)] * dj);
                    worst = worst.max((cj.r(i, j, k, l) - model).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// `N[l][a] = (∇_a ξ)^l` at `p`.
pub fn field_derivative(
    chart: &MetricChart,
    field: &VectorField,
    p: &[f64],
) -> Result<DMatrix<f64>> {
    let n = chart.dim();
    let conn = connection_jets(chart, p, 1)?;
    let xi = field(&Jet::seed(p, 1));
    if xi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: xi.len(),
        });
    }
    Ok(DMatrix::from_fn(n, n, |l, a| {
        let mut v = xi[l].gradient()[a];
        for m in 0..n {
            v += conn.christoffel[(l * n + a) * n + m].value() * xi[m].value();
        }
        v
    }))
}

/// Max-norm of `∇ξ − a·Id` in the coordinate frame.
pub fn homothety_residual(
    chart: &MetricChart,
    field: &VectorField,
    p: &[f64],
    a: f64,
) -> Result<f64> {
    let d = field_derivative(chart, field, p)?;
    let n = chart.dim();
    Ok(crate::linalg::max_abs(&(d - DMatrix::identity(n, n) * a)))
}

/// Field evaluated at `p`.
pub fn field_value(field: &VectorField, p: &[f64]) -> Vec<f64> {
    field(&Jet::seed(p, 0)).iter().map(|j| j.value()).collect()
}

/// Constant coordinate field `∂_index`.
pub fn coordinate_field(index: usize) -> VectorField {
    Arc::new(move |x: &[Jet]| {
        (0..x.len())
            .map(|i| x[0].lift(if i == index { 1.0 } else { 0.0 }))
            .collect()
    })
}

fn names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

/// `ℝ^{t,s}` with `diag(−1,…,−1,+1,…,+1)`.
pub fn flat(t: usize, s: usize) -> MetricChart {
    let n = t + s;
    let components: ComponentFn = Arc::new(move |x: &[Jet]| {
        let mut g = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = match (i == j, i < t) {
                    (true, true) => -1.0,
                    (true, false) => 1.0,
                    _ => 0.0,
                };
                g.push(x[0].lift(v));
            }
        }
        g
    });
    MetricChart::new(
        format!("flat({t},{s})"),
        names("x", n),
        (t, s),
        CoordBox::unbounded(n),
        CoordBox::new(vec![-1.0; n], vec![1.0; n]),
        components,
    )
}

/// Round `Sⁿ` in hyperspherical coordinates `(θ_1, …, θ_{n−1}, φ)`.
pub fn sphere(n: usize) -> MetricChart {
    assert!(n >= 1);
    let components: ComponentFn = Arc::new(move |x: &[Jet]| {
        let mut g: Vec<Jet> = (0..n * n).map(|_| x[0].lift(0.0)).collect();
        let mut warp = x[0].lift(1.0);
        for i in 0..n {
            g[i * n + i] = warp.clone();
            if i + 1 < n {
                let s = x[i].sin();
                warp = &warp * &(&s * &s);
            }
        }
        g
    });
    let mut coords = names("theta", n - 1);
    coords.push("phi".into());
    let mut lo = vec![0.0; n];
    let mut hi = vec![PI; n];
    let mut slo = vec![0.3; n];
    let mut shi = vec![PI - 0.3; n];
    lo[n - 1] = f64::NEG_INFINITY;
    hi[n - 1] = f64::INFINITY;
    slo[n - 1] = -PI;
    shi[n - 1] = PI;
    MetricChart::new(
        format!("sphere({n})"),
        coords,
        (0, n),
        CoordBox::new(lo, hi),
        CoordBox::new(slo, shi),
        components,
    )
}

/// Hyperbolic space as the upper half-space `(Σdx² + dy²)/y²`, `y` last.
pub fn hyperbolic(n: usize) -> MetricChart {
    assert!(n >= 1);
    let components: ComponentFn = Arc::new(move |x: &[Jet]| {
        let w = x[n - 1].powi(-2);
        let mut g: Vec<Jet> = (0..n * n).map(|_| x[0].lift(0.0)).collect();
        for i in 0..n {
            g[i * n + i] = w.clone();
        }
        g
    });
    let mut coords = names("x", n - 1);
    coords.push("y".into());
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut slo = vec![-1.0; n];
    let mut shi = vec![1.0; n];
    lo[n - 1] = 0.0;
    slo[n - 1] = 0.5;
    shi[n - 1] = 2.0;
    MetricChart::new(
        format!("hyperbolic({n})"),
        coords,
        (0, n),
        CoordBox::new(lo, vec![f64::INFINITY; n]),
        CoordBox::new(slo, shi),
        components,
    )
}

/// Profile `f(y¹, …, y^m, z)` of a pp-wave.
pub type Profile = Arc<dyn Fn(&[Jet], &Jet) -> Jet + Send + Sync>;

/// `2dxdz + 2f dz² + Σ(dy^i)²` on coordinates `(x, y¹, …, y^m, z)`.
pub fn pp_wave(m: usize, profile: Profile, label: impl Into<String>) -> MetricChart {
    let n = m + 2;
    let components: ComponentFn = Arc::new(move |c: &[Jet]| {
        let mut g: Vec<Jet> = (0..n * n).map(|_| c[0].lift(0.0)).collect();
        let one = c[0].lift(1.0);
        g[n - 1] = one.clone();
        g[(n - 1) * n] = one.clone();
        for i in 1..=m {
            g[i * n + i] = one.clone();
        }
        g[n * n - 1] = profile(&c[1..=m], &c[n - 1]).scale(2.0);
        g
    });
    let mut coords = vec!["x".to_string()];
    coords.extend(names("y", m));
    coords.push("z".into());
    MetricChart::new(
        label,
        coords,
        (1, m + 1),
        CoordBox::unbounded(n),
        CoordBox::new(vec![-1.0; n], vec![1.0; n]),
        components,
    )
}

/// pp-wave whose profile is an expression in `y1..ym` (or `y` when `m = 1`) and `z`.
pub fn pp_wave_expr(m: usize, profile: &str) -> Result<MetricChart> {
    let mut vars: Vec<String> = names("y", m);
    if m == 1 {
        vars = vec!["y".into()];
    }
    vars.push("z".into());
    let refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
    let expr = Expr::parse(profile, &refs, &BTreeMap::new())?;
    let f: Profile = Arc::new(move |y: &[Jet], z: &Jet| {
        let mut args = y.to_vec();
        args.push(z.clone());
        expr.eval(&args)
    });
    Ok(pp_wave(m, f, format!("pp_wave({profile})")))
}

/// Cahen–Wallach space `2dxdz + Σ S_ij y^i y^j dz² + Σ(dy^i)²`.
pub fn cahen_wallach(s: &DMatrix<f64>) -> Result<MetricChart> {
    let m = s.nrows();
    if s.ncols() != m || m == 0 {
        return Err(Error::InvalidInput(
            "S must be a non-empty square matrix".into(),
        ));
    }
    if crate::linalg::max_abs(&(s - s.transpose())) > 1e-12 {
        return Err(Error::InvalidInput("S must be symmetric".into()));
    }
    if s.determinant().abs() < 1e-12 {
        return Err(Error::InvalidInput(
            "Cahen–Wallach spaces need det S ≠ 0".into(),
        ));
    }
    let s = s.clone();
    let label = format!(
        "cahen_wallach({})",
        s.transpose()
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",")
    );
    let profile: Profile = Arc::new(move |y: &[Jet], _z: &Jet| {
        let mut acc = y[0].lift(0.0);
        for i in 0..m {
            for j in 0..m {
                if s[(i, j)] != 0.0 {
                    acc += &(&y[i] * &y[j]).scale(0.5 * s[(i, j)]);
                }
            }
        }
        acc
    });
    Ok(pp_wave(m, profile, label))
}

/// `2dxdz + e^z y² dz² + dy²`.
pub fn plane_wave_exp() -> MetricChart {
    let profile: Profile = Arc::new(|y: &[Jet], z: &Jet| (z.exp() * &y[0] * &y[0]).scale(0.5));
    pp_wave(1, profile, "plane_wave_exp")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomChartDoc {
    label: Option<String>,
    coordinates: Vec<String>,
    signature: [usize; 2],
    #[serde(default)]
    parameters: BTreeMap<String, f64>,
    metric: Vec<Vec<String>>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
    sample_lower: Option<Vec<f64>>,
    sample_upper: Option<Vec<f64>>,
}

/// Chart from a TOML document (see `docs/expression-grammar.md`).
pub fn custom_chart_from_toml(text: &str) -> Result<MetricChart> {
    let doc: CustomChartDoc = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let n = doc.coordinates.len();
    if n == 0 || doc.signature[0] + doc.signature[1] != n {
        return Err(Error::Config(
            "signature must add up to the number of coordinates".into(),
        ));
    }
    if doc.metric.len() != n || doc.metric.iter().any(|row| row.len() != n) {
        return Err(Error::Config(format!(
            "metric must be a {n}×{n} array of expressions"
        )));
    }
    let refs: Vec<&str> = doc.coordinates.iter().map(|s| s.as_str()).collect();
    let mut exprs = Vec::with_capacity(n * n);
    for row in &doc.metric {
        for src in row {
            exprs.push(Expr::parse(src, &refs, &doc.parameters)?);
        }
    }
    let bounds = |v: &Option<Vec<f64>>, default: f64| -> Result<Vec<f64>> {
        match v {
            Some(b) if b.len() == n => Ok(b.clone()),
            Some(_) => Err(Error::Config(
                "bounds must match the number of coordinates".into(),
            )),
            None => Ok(vec![default; n]),
        }
    };
    let domain = CoordBox::new(
        bounds(&doc.lower, f64::NEG_INFINITY)?,
        bounds(&doc.upper, f64::INFINITY)?,
    );
    let sample_lower = match &doc.sample_lower {
        Some(_) => bounds(&doc.sample_lower, 0.0)?,
        None => domain
            .lower
            .iter()
            .map(|x| if x.is_finite() { *x } else { -1.0 })
            .collect(),
    };
    let sample_upper = match &doc.sample_upper {
        Some(_) => bounds(&doc.sample_upper, 0.0)?,
        None => domain
            .upper
            .iter()
            .map(|x| if x.is_finite() { *x } else { 1.0 })
            .collect(),
    };
    let components: ComponentFn =
        Arc::new(move |x: &[Jet]| exprs.iter().map(|e| e.eval(x)).collect());
    let chart = MetricChart::new(
        doc.label.unwrap_or_else(|| "custom".into()),
        doc.coordinates,
        (doc.signature[0], doc.signature[1]),
        domain,
        CoordBox::new(sample_lower, sample_upper),
        components,
    );
    chart.validate(DEFAULT_GRID_POINTS, DEFAULT_GRID_SEED)?;
    Ok(chart)
}
