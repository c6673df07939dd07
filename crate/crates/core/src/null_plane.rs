//! Metrics `ds² + e^{−2s}g₀(u) + 2du·η` whose cones carry a parallel totally
//! null 2-plane, built from the general solution of the first-order system
//! for `η`, together with residual checks of the fundamental equations.
//!
//! Coordinates are ordered `(x¹, …, x^m, t, s, u)`; `V = ∂_t`, `Z = ∂_s`.

use crate::charts::{
    field_derivative, field_value, ComponentFn, CoordBox, MetricChart, ScalarField, VectorField,
};
use crate::cone_constructions::{cone, parallel_plane_residual};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{Jet, JetSpace};
use crate::linalg;
use crate::pseudo_linear::signature_of;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

/// `(x, u) ↦ g₀` components (row-major, `m×m`).
pub type MetricFamily = Arc<dyn Fn(&[Jet], &Jet) -> Vec<Jet> + Send + Sync>;
/// A function of `u` alone.
pub type FunctionOfU = Arc<dyn Fn(&Jet) -> Jet + Send + Sync>;
/// `(x, s, u) ↦ f₂`.
pub type SliceFunction = Arc<dyn Fn(&[Jet], &Jet, &Jet) -> Jet + Send + Sync>;
/// `(x, u) ↦ (c_1, …, c_m)`.
pub type ConstantsFn = Arc<dyn Fn(&[Jet], &Jet) -> Vec<Jet> + Send + Sync>;

/// Smallest admissible `|f₁|` on the domain.
pub const DEFAULT_F_MIN: f64 = 1e-6;
/// Gauss–Legendre nodes per unit length of the `s` integration interval.
pub const NODES_PER_UNIT: usize = 32;
const F1_SCAN_POINTS: usize = 1025;
/// Tolerance on `g(V,V)`, `g(Z,Z) − 1`, `g(V,Z)`.
pub const FRAME_TOL: f64 = 1e-9;

/// Input data of the general solution.
#[derive(Clone)]
pub struct NullPlaneData {
    pub label: String,
    pub m0_dim: usize,
    pub g0: MetricFamily,
    pub f1: FunctionOfU,
    pub f2: SliceFunction,
    pub c: ConstantsFn,
    /// `η(∂_u)` on all coordinates; zero when absent
    pub eta_u: Option<ScalarField>,
    /// box over `(x, t, s, u)`
    pub domain: CoordBox,
    pub f_min: f64,
}

impl fmt::Debug for NullPlaneData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NullPlaneData")
            .field("label", &self.label)
            .field("m0_dim", &self.m0_dim)
            .field("domain", &self.domain)
            .field("f_min", &self.f_min)
            .finish()
    }
}

/// `x ∈ [−1,1]^m`, `t, s ∈ [−1,1]`, `u ∈ [0.1, 2]`.
pub fn default_domain(m0_dim: usize) -> CoordBox {
    let mut lower = vec![-1.0; m0_dim + 2];
    let mut upper = vec![1.0; m0_dim + 2];
    lower.push(0.1);
    upper.push(2.0);
    CoordBox::new(lower, upper)
}

/// `x1, …, xm, t, s, u`.
pub fn coordinate_names(m0_dim: usize) -> Vec<String> {
    let mut names: Vec<String> = (1..=m0_dim).map(|i| format!("x{i}")).collect();
    names.extend(["t", "s", "u"].map(String::from));
    names
}

impl NullPlaneData {
    /// Data with `c = 0`, `η_u = 0` and the default domain.
    pub fn new(
        m0_dim: usize,
        g0: MetricFamily,
        f1: FunctionOfU,
        f2: SliceFunction,
    ) -> NullPlaneData {
        NullPlaneData {
            label: "null-plane".into(),
            m0_dim,
            g0,
            f1,
            f2,
            c: Arc::new(move |_x: &[Jet], u: &Jet| vec![u.zero_like(); m0_dim]),
            eta_u: None,
            domain: default_domain(m0_dim),
            f_min: DEFAULT_F_MIN,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> NullPlaneData {
        self.label = label.into();
        self
    }

    pub fn with_constants(mut self, c: ConstantsFn) -> NullPlaneData {
        self.c = c;
        self
    }

    pub fn with_eta_u(mut self, eta_u: ScalarField) -> NullPlaneData {
        self.eta_u = Some(eta_u);
        self
    }

    pub fn with_domain(mut self, domain: CoordBox) -> NullPlaneData {
        self.domain = domain;
        self
    }

    pub fn dim(&self) -> usize {
        self.m0_dim + 3
    }

    /// Checks the domain shape and that `f₁` neither vanishes nor changes
    /// sign on a fine scan of the `u` range.
    pub fn check(&self) -> Result<()> {
        let n = self.dim();
        if self.domain.lower.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.domain.lower.len(),
            });
        }
        if self
            .domain
            .lower
            .iter()
            .chain(&self.domain.upper)
            .any(|x| !x.is_finite())
            || self
                .domain
                .lower
                .iter()
                .zip(&self.domain.upper)
                .any(|(lo, hi)| lo > hi)
        {
            return Err(Error::Config(
                "null-plane domain must be a finite, non-empty box".into(),
            ));
        }
        let (lo, hi) = (self.domain.lower[n - 1], self.domain.upper[n - 1]);
        let mut previous: Option<f64> = None;
        for k in 0..F1_SCAN_POINTS {
            let u = lo + (hi - lo) * k as f64 / (F1_SCAN_POINTS - 1) as f64;
            let value = (self.f1)(&Jet::constant(1, 0, u)).value();
            let sign_flip = previous.is_some_and(|p| p.signum() != value.signum());
            if !value.is_finite() || value.abs() < self.f_min || sign_flip {
                return Err(Error::Precondition {
                    point: vec![u],
                    message: format!("f1 must be nowhere vanishing on the domain (f1 = {value:e})"),
                });
            }
            previous = Some(value);
        }
        Ok(())
    }
}

/// Gauss–Legendre rule on `[0, 1]` via the Golub–Welsch eigenproblem.
fn gauss_rule(nodes: usize) -> Arc<Vec<(f64, f64)>> {
    type Cache = Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(nodes)
        .or_insert_with(|| {
            let jacobi = DMatrix::from_fn(nodes, nodes, |i, j| {
                if i.abs_diff(j) == 1 {
                    let k = i.max(j) as f64;
                    k / (4.0 * k * k - 1.0).sqrt()
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(jacobi);
            let mut rule: Vec<(f64, f64)> = (0..nodes)
                .map(|i| {
                    let w = eig.eigenvectors[(0, i)];
                    (0.5 * (eig.eigenvalues[i] + 1.0), w * w)
                })
                .collect();
            rule.sort_by(|a, b| a.0.total_cmp(&b.0));
            Arc::new(rule)
        })
        .clone()
}

/// Copies `jet` into a space with `extra` additional variables.
fn embed(jet: &Jet, big: &JetSpace, index: &[usize]) -> Jet {
    let mut coeffs = vec![0.0; big.len()];
    for (i, c) in jet.coeffs().iter().enumerate() {
        coeffs[index[i]] = *c;
    }
    Jet::from_coeffs(big.num_vars(), big.order(), coeffs)
}

/// `∂f₂/∂x^i` composed with the argument jets, for every `i`. Each `x^i` is
/// shifted by an auxiliary variable `ε_i`; the `ε_i`-linear part of the
/// result is the derivative.
fn x_gradient(f2: &SliceFunction, x: &[Jet], s: &Jet, u: &Jet) -> Vec<Jet> {
    let m = x.len();
    let (nv, order) = (s.num_vars(), s.order());
    let small = s.space().clone();
    let big = JetSpace::get(nv + m, order + 1);
    let index: Vec<usize> = (0..small.len())
        .map(|i| {
            let mut e = small.exponents(i).to_vec();
            e.resize(nv + m, 0);
            big.index_of(&e).expect("monomial of lower order")
        })
        .collect();
    let xs: Vec<Jet> = (0..m)
        .map(|i| embed(&x[i], &big, &index) + Jet::variable(nv + m, order + 1, nv + i, 0.0))
        .collect();
    let value = f2(&xs, &embed(s, &big, &index), &embed(u, &big, &index));
    (0..m)
        .map(|i| {
            let coeffs = (0..small.len())
                .map(|k| {
                    let mut e = small.exponents(k).to_vec();
                    e.resize(nv + m, 0);
                    e[nv + i] = 1;
                    value.coefficient(&e)
                })
                .collect();
            Jet::from_coeffs(nv, order, coeffs)
        })
        .collect()
}

/// The one-form `η` of the general solution.
#[derive(Clone, Debug)]
pub struct EtaField {
    data: NullPlaneData,
    t_drift: f64,
}

/// Builds `η_t = f₁`, `η_s = 2tf₁ + f₂`, `η(∂_i) = h_i`, `η_u` from the data.
pub fn solve_eta(data: &NullPlaneData) -> Result<EtaField> {
    data.check()?;
    Ok(EtaField {
        data: data.clone(),
        t_drift: 0.0,
    })
}

impl EtaField {
    pub fn data(&self) -> &NullPlaneData {
        &self.data
    }

    /// Replaces `η_t` by `η_t + drift·t`, breaking `∂_tη_t = 0`.
    pub fn with_t_drift(mut self, drift: f64) -> EtaField {
        self.t_drift = drift;
        self
    }

    /// `h_i = e^{−2s}(c_i + ∫₀^s e^{2σ}∂_i f₂(x,σ,u) dσ)`, with the integral
    /// taken by Gauss–Legendre quadrature on jets after `σ = τs`.
    pub fn h(&self, x: &[Jet], s: &Jet, u: &Jet) -> Vec<Jet> {
        let m = self.data.m0_dim;
        if m == 0 {
            return Vec::new();
        }
        let c = (self.data.c)(x, u);
        let units = (s.value().abs().ceil() as usize).max(1);
        let rule = gauss_rule(NODES_PER_UNIT * units);
        let mut integrals = vec![s.zero_like(); m];
        for &(tau, weight) in rule.iter() {
            let sigma = s.scale(tau);
            let growth = sigma.scale(2.0).exp();
            for (acc, d) in integrals
                .iter_mut()
                .zip(x_gradient(&self.data.f2, x, &sigma, u))
            {
                *acc += &(&growth * &d).scale(weight);
            }
        }
        let decay = s.scale(-2.0).exp();
        integrals
            .iter()
            .zip(&c)
            .map(|(integral, ci)| &decay * &(ci + &(s * integral)))
            .collect()
    }

    /// `η_a` in coordinate order `(x, t, s, u)`.
    pub fn one_form(&self, coords: &[Jet]) -> Vec<Jet> {
        let m = self.data.m0_dim;
        let (x, t, s, u) = (&coords[..m], &coords[m], &coords[m + 1], &coords[m + 2]);
        let f1 = (self.data.f1)(u);
        let eta_t = &f1 + &t.scale(self.t_drift);
        let eta_s = &(t * &f1).scale(2.0) + &(self.data.f2)(x, s, u);
        let eta_u = match &self.data.eta_u {
            Some(f) => f(coords),
            None => u.zero_like(),
        };
        let mut out = self.h(x, s, u);
        out.extend([eta_t, eta_s, eta_u]);
        out
    }

    /// Residuals of the first-order system at `p`.
    pub fn system_residuals(&self, p: &[f64]) -> SystemResiduals {
        let m = self.data.m0_dim;
        let (it, is) = (m, m + 1);
        let eta = self.one_form(&Jet::seed(p, 1));
        let d = |a: usize, b: usize| eta[a].gradient()[b];
        let mut r = SystemResiduals {
            dt_eta_t: d(it, it).abs(),
            ds_eta_t: d(it, is).abs(),
            dt_eta_s: (d(is, it) - 2.0 * eta[it].value()).abs(),
            ..SystemResiduals::default()
        };
        for i in 0..m {
            r.dx_eta_t = r.dx_eta_t.max(d(it, i).abs());
            r.dt_eta_x = r.dt_eta_x.max(d(i, it).abs());
            r.ds_eta_x = r
                .ds_eta_x
                .max((d(i, is) - d(is, i) + 2.0 * eta[i].value()).abs());
        }
        r
    }
}

/// Violations of `∂_tη_t = ∂_sη_t = ∂_iη_t = 0`, `∂_tη_s = 2η_t`,
/// `∂_tη_i = 0`, `∂_sη_i − ∂_iη_s = −2η_i`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SystemResiduals {
    pub dt_eta_t: f64,
    pub ds_eta_t: f64,
    pub dx_eta_t: f64,
    pub dt_eta_s: f64,
    pub dt_eta_x: f64,
    pub ds_eta_x: f64,
}

impl SystemResiduals {
    pub fn max(&self) -> f64 {
        [
            self.dt_eta_t,
            self.ds_eta_t,
            self.dx_eta_t,
            self.dt_eta_s,
            self.dt_eta_x,
            self.ds_eta_x,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn max_with(&self, other: &SystemResiduals) -> SystemResiduals {
        SystemResiduals {
            dt_eta_t: self.dt_eta_t.max(other.dt_eta_t),
            ds_eta_t: self.ds_eta_t.max(other.ds_eta_t),
            dx_eta_t: self.dx_eta_t.max(other.dx_eta_t),
            dt_eta_s: self.dt_eta_s.max(other.dt_eta_s),
            dt_eta_x: self.dt_eta_x.max(other.dt_eta_x),
            ds_eta_x: self.ds_eta_x.max(other.ds_eta_x),
        }
    }
}

fn metric_components(eta: &EtaField) -> ComponentFn {
    let eta = eta.clone();
    Arc::new(move |x: &[Jet]| {
        let m = eta.data.m0_dim;
        let n = m + 3;
        let (is, iu) = (m + 1, m + 2);
        let form = eta.one_form(x);
        let g0 = (eta.data.g0)(&x[..m], &x[iu]);
        let warp = x[is].scale(-2.0).exp();
        let mut g: Vec<Jet> = (0..n * n).map(|_| x[0].zero_like()).collect();
        for i in 0..m {
            for j in 0..m {
                g[i * n + j] = &warp * &g0[i * m + j];
            }
        }
        g[is * n + is] = g[is * n + is].lift(1.0);
        for a in 0..iu {
            g[a * n + iu] = &g[a * n + iu] + &form[a];
            g[iu * n + a] = &g[iu * n + a] + &form[a];
        }
        g[iu * n + iu] = form[iu].scale(2.0);
        g
    })
}

fn g0_signature(data: &NullPlaneData) -> Result<(usize, usize)> {
    let m = data.m0_dim;
    if m == 0 {
        return Ok((0, 0));
    }
    let centre: Vec<f64> = data
        .domain
        .lower
        .iter()
        .zip(&data.domain.upper)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let jets = Jet::seed(&centre, 0);
    let g0 = (data.g0)(&jets[..m], &jets[m + 2]);
    if g0.len() != m * m {
        return Err(Error::DimensionMismatch {
            expected: m * m,
            found: g0.len(),
        });
    }
    let mat = DMatrix::from_fn(m, m, |i, j| g0[i * m + j].value());
    signature_of(&mat).map_err(|_| Error::Construction(format!("g0 is degenerate at {centre:?}")))
}

/// The chart `ds² + e^{−2s}g₀(u) + 2du·η` on `(x, t, s, u)`, checked for
/// non-degeneracy and constant signature on the sample grid.
pub fn build_metric(eta: &EtaField, grid_points: usize, seed: u64) -> Result<MetricChart> {
    let data = &eta.data;
    let (t0, s0) = g0_signature(data)?;
    let chart = MetricChart::new(
        data.label.clone(),
        coordinate_names(data.m0_dim),
        (t0 + 1, s0 + 2),
        data.domain.clone(),
        data.domain.clone(),
        metric_components(eta),
    );
    chart
        .validate(grid_points, seed)
        .map_err(|e| Error::Construction(format!("metric check failed: {e}")))?;
    Ok(chart)
}

/// `α`, `β` at a point, with the largest violation of
/// `∇V = α⊗V + V^♭⊗Z` and `∇Z = −Id + β⊗V + Z^♭⊗Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaBeta {
    pub f_alpha: f64,
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub residual: f64,
}

/// Indices of `t`, `s`, `u` in a chart with `m0_dim` leading coordinates.
fn tsu(m0_dim: usize) -> (usize, usize, usize) {
    (m0_dim, m0_dim + 1, m0_dim + 2)
}

pub fn alpha_beta(chart: &MetricChart, eta: &EtaField, p: &[f64]) -> Result<AlphaBeta> {
    chart.check_point(p)?;
    let m = eta.data.m0_dim;
    let n = m + 3;
    let (it, is, iu) = tsu(m);
    let form = eta.one_form(&Jet::seed(p, 1));
    let val = |a: usize| form[a].value();
    let d = |a: usize, b: usize| form[a].gradient()[b];
    let eta_t = val(it);
    let f_alpha = d(iu, it) / (eta_t * eta_t) - 2.0 * val(is) / eta_t;
    let g = chart.metric_at(p)?;
    let v_flat: DVector<f64> = g.column(it).into_owned();
    let z_flat: DVector<f64> = g.column(is).into_owned();
    let alpha = &z_flat + &v_flat * f_alpha;
    let mut beta = DVector::zeros(n);
    beta[it] = 2.0;
    beta[is] = d(is, is) / eta_t;
    for i in 0..m {
        beta[i] = (d(is, i) + d(i, is) + 2.0 * val(i)) / (2.0 * eta_t);
    }
    beta[iu] = (d(iu, is) - val(is) * val(is) + 2.0 * val(iu)) / eta_t;
    let frame = PlaneFrame::coordinate(m);
    let fund = fundamental_residuals(chart, &frame, &alpha, &beta, p)?;
    Ok(AlphaBeta {
        f_alpha,
        alpha,
        beta,
        residual: fund.nab_v.max(fund.nab_z),
    })
}

/// A pair `(V, Z)` of vector fields spanning the plane on the base.
#[derive(Clone)]
pub struct PlaneFrame {
    pub v: VectorField,
    pub z: VectorField,
}

impl PlaneFrame {
    /// `V = ∂_t`, `Z = ∂_s`.
    pub fn coordinate(m0_dim: usize) -> PlaneFrame {
        let (it, is, _) = tsu(m0_dim);
        PlaneFrame {
            v: crate::charts::coordinate_field(it),
            z: crate::charts::coordinate_field(is),
        }
    }

    /// `(V, Z) ↦ (e^f V, Z + hV)`.
    pub fn changed(&self, f: ScalarField, h: ScalarField) -> PlaneFrame {
        let (v, z) = (self.v.clone(), self.z.clone());
        let (v2, f2) = (self.v.clone(), f);
        PlaneFrame {
            v: Arc::new(move |x: &[Jet]| {
                let ef = f2(x).exp();
                v2(x).iter().map(|c| &ef * c).collect()
            }),
            z: Arc::new(move |x: &[Jet]| {
                let hx = h(x);
                z(x).iter()
                    .zip(v(x))
                    .map(|(zc, vc)| zc + &(&hx * &vc))
                    .collect()
            }),
        }
    }
}

/// `α' = α + df − hV^♭` and `β' = e^{−f}(β + hα + dh − hZ^♭ − h²V^♭)` at `p`,
/// where `V`, `Z` belong to the frame before the change.
#[allow(clippy::too_many_arguments)]
pub fn transform_forms(
    chart: &MetricChart,
    frame: &PlaneFrame,
    f: &ScalarField,
    h: &ScalarField,
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
    p: &[f64],
) -> Result<(DVector<f64>, DVector<f64>)> {
    let g = chart.metric_at(p)?;
    let v_flat = &g * DVector::from_vec(field_value(&frame.v, p));
    let z_flat = &g * DVector::from_vec(field_value(&frame.z, p));
    let seeds = Jet::seed(p, 1);
    let (fj, hj) = (f(&seeds), h(&seeds));
    let df = DVector::from_vec(fj.gradient());
    let dh = DVector::from_vec(hj.gradient());
    let hv = hj.value();
    let alpha2 = alpha + df - &v_flat * hv;
    let beta2 = (beta + alpha * hv + dh - &z_flat * hv - &v_flat * (hv * hv)) * (-fj.value()).exp();
    Ok((alpha2, beta2))
}

/// Residuals of the fundamental equations and their consequences at a point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FundamentalResiduals {
    /// `g(V,V)`, `g(Z,Z) − 1`, `g(V,Z)`
    pub gvz: f64,
    pub nab_v: f64,
    pub nab_z: f64,
    /// `dV^♭ − (α − Z^♭)∧V^♭`
    pub d_v_flat: f64,
    /// `dZ^♭ − β∧V^♭`
    pub d_z_flat: f64,
    /// `[Z,V] − (α(Z) − β(V) + 1)V`
    pub bracket: f64,
    /// `L_V g − 2(α + Z^♭)·V^♭`, the shear-free identity with `λ = 0`
    pub lie_v: f64,
    /// `L_Z g + 2g − 2(Z^♭)² − 2β·V^♭`
    pub lie_z: f64,
    /// `β(V) − α(Z) − 1`
    pub beta_alpha: f64,
    /// component of `∇_V V` off the line of `V`
    pub geodesic: f64,
}

impl FundamentalResiduals {
    pub fn max(&self) -> f64 {
        [
            self.gvz,
            self.nab_v,
            self.nab_z,
            self.d_v_flat,
            self.d_z_flat,
            self.bracket,
            self.lie_v,
            self.lie_z,
            self.beta_alpha,
            self.geodesic,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn max_with(&self, o: &FundamentalResiduals) -> FundamentalResiduals {
        FundamentalResiduals {
            gvz: self.gvz.max(o.gvz),
            nab_v: self.nab_v.max(o.nab_v),
            nab_z: self.nab_z.max(o.nab_z),
            d_v_flat: self.d_v_flat.max(o.d_v_flat),
            d_z_flat: self.d_z_flat.max(o.d_z_flat),
            bracket: self.bracket.max(o.bracket),
            lie_v: self.lie_v.max(o.lie_v),
            lie_z: self.lie_z.max(o.lie_z),
            beta_alpha: self.beta_alpha.max(o.beta_alpha),
            geodesic: self.geodesic.max(o.geodesic),
        }
    }
}

fn wedge(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose() - b * a.transpose()
}

fn sym_product2(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose() + b * a.transpose()
}

/// Lie derivatives use `L_X g = 2(∇X^♭)^sym`; exterior derivatives use
/// `dθ(X,Y) = (∇_Xθ)Y − (∇_Yθ)X`.
pub fn fundamental_residuals(
    chart: &MetricChart,
    frame: &PlaneFrame,
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
    p: &[f64],
) -> Result<FundamentalResiduals> {
    let n = chart.dim();
    let g = chart.metric_at(p)?;
    let v = DVector::from_vec(field_value(&frame.v, p));
    let z = DVector::from_vec(field_value(&frame.z, p));
    let v_flat = &g * &v;
    let z_flat = &g * &z;
    let gvz = v
        .dot(&v_flat)
        .abs()
        .max((z.dot(&z_flat) - 1.0).abs())
        .max(v.dot(&z_flat).abs());
    if gvz > FRAME_TOL {
        return Err(Error::Frame(format!(
            "V, Z must satisfy g(V,V)=0, g(Z,Z)=1, g(V,Z)=0 (residual {gvz:e} at {p:?})"
        )));
    }
    let nv = field_derivative(chart, &frame.v, p)?;
    let nz = field_derivative(chart, &frame.z, p)?;
    // cov[a][b] = (∇_a X^♭)_b
    let cov_v = (&g * &nv).transpose();
    let cov_z = (&g * &nz).transpose();
    let nab_v = linalg::max_abs(&(&nv - &v * alpha.transpose() - &z * v_flat.transpose()));
    let nab_z = linalg::max_abs(
        &(&nz + DMatrix::identity(n, n) - &v * beta.transpose() - &z * z_flat.transpose()),
    );
    let d_v_flat =
        linalg::max_abs(&(&cov_v - cov_v.transpose() - wedge(&(alpha - &z_flat), &v_flat)));
    let d_z_flat = linalg::max_abs(&(&cov_z - cov_z.transpose() - wedge(beta, &v_flat)));
    let alpha_z = alpha.dot(&z);
    let beta_v = beta.dot(&v);
    let bracket = linalg::max_abs_vec(&(&nv * &z - &nz * &v - &v * (alpha_z - beta_v + 1.0)));
    let lie_v =
        linalg::max_abs(&(&cov_v + cov_v.transpose() - sym_product2(&(alpha + &z_flat), &v_flat)));
    let lie_z = linalg::max_abs(
        &(&cov_z + cov_z.transpose() + &g * 2.0
            - &z_flat * z_flat.transpose() * 2.0
            - sym_product2(beta, &v_flat)),
    );
    let accel = &nv * &v;
    let along = &v * (v.dot(&accel) / v.norm_squared());
    Ok(FundamentalResiduals {
        gvz,
        nab_v,
        nab_z,
        d_v_flat,
        d_z_flat,
        bracket,
        lie_v,
        lie_z,
        beta_alpha: (beta_v - alpha_z - 1.0).abs(),
        geodesic: linalg::max_abs_vec(&(accel - along)),
    })
}

/// Violation of the identities `α(Z) = 1`, `α(V) = 0`, `β(V) = 2`,
/// `[Z,V] = 0` and `dV^♭ = 0` that follow from the normalisation.
pub fn normalization_residual(
    chart: &MetricChart,
    frame: &PlaneFrame,
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
    p: &[f64],
) -> Result<f64> {
    let g = chart.metric_at(p)?;
    let v = DVector::from_vec(field_value(&frame.v, p));
    let z = DVector::from_vec(field_value(&frame.z, p));
    let nv = field_derivative(chart, &frame.v, p)?;
    let nz = field_derivative(chart, &frame.z, p)?;
    let cov_v = (&g * &nv).transpose();
    let bracket = linalg::max_abs_vec(&(&nv * &z - &nz * &v));
    Ok([
        (alpha.dot(&z) - 1.0).abs(),
        alpha.dot(&v).abs(),
        (beta.dot(&v) - 2.0).abs(),
        bracket,
        linalg::max_abs(&(&cov_v - cov_v.transpose())),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

/// Parallelness of `span{V, ξ + Z}` on the cone and nullity of the pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ConeNullPlaneCheck {
    pub parallel: f64,
    /// largest of `ĝ(V,V)`, `ĝ(ξ+Z, ξ+Z)`, `ĝ(V, ξ+Z)`
    pub null: f64,
}

impl ConeNullPlaneCheck {
    pub fn max(&self) -> f64 {
        self.parallel.max(self.null)
    }
}

/// Builds the cone over `chart` and checks the plane spanned by `V = ∂_t`
/// and `ξ + Z = r∂_r + ∂_s` on its sample grid.
pub fn cone_null_plane_check(
    chart: &MetricChart,
    m0_dim: usize,
    points: usize,
    seed: u64,
) -> Result<ConeNullPlaneCheck> {
    let (it, is, _) = tsu(m0_dim);
    let total = cone(chart);
    let v: VectorField = crate::charts::coordinate_field(it + 1);
    let zeta: VectorField = Arc::new(move |x: &[Jet]| {
        let mut out: Vec<Jet> = x.iter().map(|c| c.zero_like()).collect();
        out[0] = x[0].clone();
        out[is + 1] = x[0].lift(1.0);
        out
    });
    let grid = total.sample_grid(points, seed);
    let per_point: Vec<ConeNullPlaneCheck> = grid
        .par_iter()
        .map(|p| -> Result<ConeNullPlaneCheck> {
            let g = total.metric_at(p)?;
            let a = DVector::from_vec(field_value(&v, p));
            let b = DVector::from_vec(field_value(&zeta, p));
            let null = a
                .dot(&(&g * &a))
                .abs()
                .max(b.dot(&(&g * &b)).abs())
                .max(a.dot(&(&g * &b)).abs());
            let parallel = parallel_plane_residual(&total, &[v.clone(), zeta.clone()], p)?;
            Ok(ConeNullPlaneCheck { parallel, null })
        })
        .collect::<Result<_>>()?;
    Ok(per_point
        .iter()
        .fold(ConeNullPlaneCheck::default(), |acc, c| ConeNullPlaneCheck {
            parallel: acc.parallel.max(c.parallel),
            null: acc.null.max(c.null),
        }))
}

/// Grid maxima of every null-plane check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullPlaneReport {
    pub signature: (usize, usize),
    pub system: SystemResiduals,
    pub alpha_beta: f64,
    pub fundamental: FundamentalResiduals,
    pub normalization: f64,
    pub cone: ConeNullPlaneCheck,
}

/// Runs the system, fundamental-equation, normalisation and cone checks over
/// the sample grid of the built chart.
pub fn verify_null_plane(eta: &EtaField, points: usize, seed: u64) -> Result<NullPlaneReport> {
    let chart = build_metric(eta, points, seed)?;
    let m = eta.data.m0_dim;
    let frame = PlaneFrame::coordinate(m);
    let grid = chart.sample_grid(points, seed);
    let per_point: Vec<(SystemResiduals, f64, FundamentalResiduals, f64)> = grid
        .par_iter()
        .map(|p| -> Result<_> {
            let ab = alpha_beta(&chart, eta, p)?;
            let fund = fundamental_residuals(&chart, &frame, &ab.alpha, &ab.beta, p)?;
            let norm = normalization_residual(&chart, &frame, &ab.alpha, &ab.beta, p)?;
            Ok((eta.system_residuals(p), ab.residual, fund, norm))
        })
        .collect::<Result<_>>()?;
    let mut system = SystemResiduals::default();
    let mut fundamental = FundamentalResiduals::default();
    let (mut ab_worst, mut norm_worst) = (0.0f64, 0.0f64);
    for (s, ab, f, nr) in &per_point {
        system = system.max_with(s);
        fundamental = fundamental.max_with(f);
        ab_worst = ab_worst.max(*ab);
        norm_worst = norm_worst.max(*nr);
    }
    Ok(NullPlaneReport {
        signature: chart.signature(),
        system,
        alpha_beta: ab_worst,
        fundamental,
        normalization: norm_worst,
        cone: cone_null_plane_check(&chart, m, points, seed)?,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NullPlaneDoc {
    label: Option<String>,
    m0_dim: usize,
    #[serde(default)]
    parameters: BTreeMap<String, f64>,
    f1: String,
    f2: String,
    #[serde(default)]
    c: Option<Vec<String>>,
    #[serde(default)]
    g0: Vec<Vec<String>>,
    eta_u: Option<String>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
    f_min: Option<f64>,
}

fn parse_all(
    sources: &[String],
    vars: &[&str],
    params: &BTreeMap<String, f64>,
) -> Result<Vec<Expr>> {
    sources
        .iter()
        .map(|s| Expr::parse(s, vars, params))
        .collect()
}

/// Data from a TOML document with slots `f1`, `f2`, `c`, `g0`, `eta_u`
/// (see `docs/expression-grammar.md`).
pub fn null_plane_data_from_toml(text: &str) -> Result<NullPlaneData> {
    let doc: NullPlaneDoc = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let m = doc.m0_dim;
    let names = coordinate_names(m);
    let xs: Vec<&str> = names[..m].iter().map(|s| s.as_str()).collect();
    let with = |extra: [&'static str; 2]| -> Vec<&str> {
        xs.iter()
            .copied()
            .chain(extra.into_iter().filter(|e| !e.is_empty()))
            .collect()
    };
    let params = &doc.parameters;

    let f1 = Expr::parse(&doc.f1, &["u"], params)?;
    let f2 = Expr::parse(&doc.f2, &with(["s", "u"]), params)?;
    if doc.g0.len() != m || doc.g0.iter().any(|row| row.len() != m) {
        return Err(Error::Config(format!(
            "g0 must be a {m}×{m} array of expressions"
        )));
    }
    let g0 = parse_all(&doc.g0.concat(), &with(["u", ""]), params)?;
    let c = match &doc.c {
        Some(c) if c.len() == m => parse_all(c, &with(["u", ""]), params)?,
        Some(c) => {
            return Err(Error::Config(format!(
                "c must list {m} expressions, found {}",
                c.len()
            )))
        }
        None => Vec::new(),
    };
    let all: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let eta_u = doc
        .eta_u
        .as_deref()
        .map(|s| Expr::parse(s, &all, params))
        .transpose()?;

    let xu = |x: &[Jet], u: &Jet| -> Vec<Jet> { x.iter().cloned().chain([u.clone()]).collect() };
    let g0_fn: MetricFamily = Arc::new(move |x: &[Jet], u: &Jet| {
        let args = xu(x, u);
        g0.iter().map(|e| e.eval(&args)).collect()
    });
    let f1_fn: FunctionOfU = Arc::new(move |u: &Jet| f1.eval(std::slice::from_ref(u)));
    let f2_fn: SliceFunction = Arc::new(move |x: &[Jet], s: &Jet, u: &Jet| {
        let args: Vec<Jet> = x.iter().cloned().chain([s.clone(), u.clone()]).collect();
        f2.eval(&args)
    });
    let mut data = NullPlaneData::new(m, g0_fn, f1_fn, f2_fn);
    if !c.is_empty() {
        data = data.with_constants(Arc::new(move |x: &[Jet], u: &Jet| {
            let args = xu(x, u);
            c.iter().map(|e| e.eval(&args)).collect()
        }));
    }
    if let Some(e) = eta_u {
        data = data.with_eta_u(Arc::new(move |x: &[Jet]| e.eval(x)));
    }
    if let Some(label) = doc.label {
        data = data.with_label(label);
    }
    let defaults = default_domain(m);
    let bound = |v: Option<Vec<f64>>, d: Vec<f64>| -> Result<Vec<f64>> {
        match v {
            Some(b) if b.len() == m + 3 => Ok(b),
            Some(_) => Err(Error::Config(format!(
                "bounds must list {} values (x…, t, s, u)",
                m + 3
            ))),
            None => Ok(d),
        }
    };
    data = data.with_domain(CoordBox::new(
        bound(doc.lower, defaults.lower)?,
        bound(doc.upper, defaults.upper)?,
    ));
    if let Some(f_min) = doc.f_min {
        data.f_min = f_min;
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn euclidean_g0() -> MetricFamily {
        Arc::new(|x: &[Jet], u: &Jet| {
            let m = x.len();
            (0..m * m)
                .map(|k| u.lift(if k % (m + 1) == 0 { 1.0 } else { 0.0 }))
                .collect()
        })
    }

    fn simple(f2: SliceFunction) -> NullPlaneData {
        NullPlaneData::new(1, euclidean_g0(), Arc::new(|u: &Jet| u.lift(1.0)), f2)
    }

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let rule = gauss_rule(32);
        let sum: f64 = rule.iter().map(|(_, w)| w).sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-14);
        let cubic: f64 = rule.iter().map(|(x, w)| w * x.powi(31)).sum();
        assert_relative_eq!(cubic, 1.0 / 32.0, epsilon = 1e-14);
    }

    #[test]
    fn x_independent_f2_gives_decaying_h() {
        let data = simple(Arc::new(|_x: &[Jet], s: &Jet, u: &Jet| s * u));
        let data = data.with_constants(Arc::new(|_x: &[Jet], u: &Jet| vec![u.lift(0.3)]));
        let eta = solve_eta(&data).unwrap();
        let seeds = Jet::seed(&[0.2, 0.4, -0.7, 1.1], 0);
        let h = eta.h(&seeds[..1], &seeds[2], &seeds[3]);
        assert_relative_eq!(h[0].value(), 0.3 * (1.4f64).exp(), epsilon = 1e-13);
    }

    #[test]
    fn linear_f2_has_closed_form_h() {
        let eta = solve_eta(&simple(Arc::new(|x: &[Jet], _s: &Jet, _u: &Jet| {
            x[0].clone()
        })))
        .unwrap();
        for s in [-1.0, -0.3, 0.5, 1.0, 2.5] {
            let seeds = Jet::seed(&[0.1, 0.0, s, 1.0], 1);
            let h = eta.h(&seeds[..1], &seeds[2], &seeds[3]);
            assert_relative_eq!(
                h[0].value(),
                (1.0 - (-2.0 * s).exp()) / 2.0,
                epsilon = 1e-12
            );
            // ∂_s h + 2h = ∂_x f₂ = 1
            let ode = h[0].gradient()[2] + 2.0 * h[0].value() - 1.0;
            assert!(ode.abs() < 1e-10, "{ode}");
        }
    }

    #[test]
    fn resonant_f2_gives_secular_term() {
        let data = simple(Arc::new(|x: &[Jet], s: &Jet, _u: &Jet| {
            &x[0] * &s.scale(-2.0).exp()
        }));
        let data = data.with_constants(Arc::new(|_x: &[Jet], u: &Jet| vec![u.lift(0.25)]));
        let eta = solve_eta(&data).unwrap();
        let s: f64 = 0.8;
        let seeds = Jet::seed(&[0.5, 0.0, s, 1.0], 0);
        let h = eta.h(&seeds[..1], &seeds[2], &seeds[3]);
        assert_relative_eq!(h[0].value(), (s + 0.25) * (-2.0 * s).exp(), epsilon = 1e-13);
    }

    #[test]
    fn vanishing_f1_is_rejected() {
        let data = NullPlaneData::new(
            1,
            euclidean_g0(),
            Arc::new(|u: &Jet| u.clone() - 1.0),
            Arc::new(|x: &[Jet], _s: &Jet, _u: &Jet| x[0].zero_like()),
        );
        assert!(matches!(solve_eta(&data), Err(Error::Precondition { .. })));
    }

    #[test]
    fn basic_example_metric_and_forms() {
        let eta = solve_eta(&simple(Arc::new(|x: &[Jet], _s: &Jet, _u: &Jet| {
            x[0].zero_like()
        })))
        .unwrap();
        let chart = build_metric(&eta, 16, 3).unwrap();
        assert_eq!(chart.signature(), (1, 3));
        let (t, s) = (0.4, -0.3);
        let p = [0.2, t, s, 1.2];
        let g = chart.metric_at(&p).unwrap();
        assert_relative_eq!(g[(0, 0)], (-2.0 * s).exp(), epsilon = 1e-14);
        assert_relative_eq!(g[(1, 3)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(g[(2, 3)], 2.0 * t, epsilon = 1e-14);
        let ab = alpha_beta(&chart, &eta, &p).unwrap();
        assert_relative_eq!(ab.f_alpha, -4.0 * t, epsilon = 1e-13);
        assert_relative_eq!(ab.beta[2], 0.0, epsilon = 1e-13);
        assert_relative_eq!(ab.beta[3], -4.0 * t * t, epsilon = 1e-13);
        assert_relative_eq!(ab.beta[1], 2.0, epsilon = 1e-14);
        assert!(ab.residual < 1e-8, "{}", ab.residual);
    }

    #[test]
    fn empty_slice_is_accepted() {
        let data = NullPlaneData::new(
            0,
            Arc::new(|_x: &[Jet], _u: &Jet| Vec::new()),
            Arc::new(|u: &Jet| u.lift(1.0)),
            Arc::new(|_x: &[Jet], s: &Jet, _u: &Jet| s.zero_like()),
        );
        let eta = solve_eta(&data).unwrap();
        let chart = build_metric(&eta, 8, 1).unwrap();
        assert_eq!(chart.signature(), (1, 2));
    }

    #[test]
    fn full_report_on_u_dependent_slice() {
        let data = NullPlaneData::new(
            1,
            Arc::new(|_x: &[Jet], u: &Jet| vec![&(u * u) + 1.0]),
            Arc::new(|u: &Jet| &(u * u) + 0.5),
            Arc::new(|x: &[Jet], s: &Jet, u: &Jet| &(&x[0] * &x[0]) * &(s * u).sin()),
        )
        .with_eta_u(Arc::new(|x: &[Jet]| &x[1] * &x[2] + &(&x[0] * &x[3])));
        let eta = solve_eta(&data).unwrap();
        let report = verify_null_plane(&eta, 12, 5).unwrap();
        assert!(report.system.max() < 1e-9, "{:?}", report.system);
        assert!(report.alpha_beta < 1e-8);
        assert!(report.fundamental.max() < 1e-8, "{:?}", report.fundamental);
        assert!(report.normalization < 1e-8);
        assert!(report.cone.max() < 1e-8, "{:?}", report.cone);
    }

    #[test]
    fn drifting_eta_t_breaks_the_cone_plane() {
        let eta = solve_eta(&simple(Arc::new(|x: &[Jet], _s: &Jet, _u: &Jet| {
            x[0].zero_like()
        })))
        .unwrap()
        .with_t_drift(0.1);
        let chart = build_metric(&eta, 8, 1).unwrap();
        assert!(eta.system_residuals(&[0.0, 0.2, 0.1, 1.0]).dt_eta_t > 0.09);
        let check = cone_null_plane_check(&chart, 1, 8, 1).unwrap();
        assert!(check.parallel > 1e-2, "{check:?}");
    }

    #[test]
    fn frame_change_keeps_connection_equations() {
        let eta = solve_eta(&simple(Arc::new(|x: &[Jet], s: &Jet, _u: &Jet| &x[0] * s))).unwrap();
        let chart = build_metric(&eta, 8, 1).unwrap();
        let frame = PlaneFrame::coordinate(1);
        let f: ScalarField = Arc::new(|x: &[Jet]| (&x[0] * &x[3]).sin().scale(0.3));
        let h: ScalarField = Arc::new(|x: &[Jet]| &(&x[1] * &x[2]) + &x[0].scale(0.5));
        let changed = frame.changed(f.clone(), h.clone());
        for p in chart.sample_grid(6, 2) {
            let ab = alpha_beta(&chart, &eta, &p).unwrap();
            let (a2, b2) =
                transform_forms(&chart, &frame, &f, &h, &ab.alpha, &ab.beta, &p).unwrap();
            let res = fundamental_residuals(&chart, &changed, &a2, &b2, &p).unwrap();
            let rest = FundamentalResiduals {
                beta_alpha: 0.0,
                ..res
            };
            assert!(rest.max() < 1e-8, "{res:?}");
            // β'(V') − α'(Z') − 1 = V(h) − Z(f) − hV(f), here equal to s
            assert_relative_eq!(res.beta_alpha, p[2].abs(), epsilon = 1e-10);
        }
    }

    #[test]
    fn corrupted_beta_trips_dz_flat() {
        let eta = solve_eta(&simple(Arc::new(|x: &[Jet], _s: &Jet, _u: &Jet| {
            x[0].zero_like()
        })))
        .unwrap();
        let chart = build_metric(&eta, 8, 1).unwrap();
        let p = [0.1, 0.2, 0.3, 1.0];
        let ab = alpha_beta(&chart, &eta, &p).unwrap();
        let mut beta = ab.beta.clone();
        beta[2] += 0.1;
        let res = fundamental_residuals(&chart, &PlaneFrame::coordinate(1), &ab.alpha, &beta, &p)
            .unwrap();
        assert_relative_eq!(res.d_z_flat, 0.1, epsilon = 1e-10);
    }

    #[test]
    fn toml_round_config() {
        let text = r#"
            label = "linear"
            m0_dim = 1
            f1 = "1 + u"
            f2 = "x1"
            c = ["0"]
            g0 = [["1 + u^2"]]
        "#;
        let data = null_plane_data_from_toml(text).unwrap();
        let eta = solve_eta(&data).unwrap();
        let report = verify_null_plane(&eta, 8, 1).unwrap();
        assert!(report.fundamental.max() < 1e-8);
        assert!(report.cone.max() < 1e-8);
        let bad = text.replace("1 + u\"", "u - 1\"");
        let data = null_plane_data_from_toml(&bad).unwrap();
        assert!(solve_eta(&data).is_err());
    }
}
