//! Truncated multivariate Taylor series ("jets").
//!
//! A jet of order `N` in `n` variables stores the scaled coefficients
//! `c[α] = ∂^α f(p) / α!` for every multi-index with `|α| ≤ N`. Monomials are
//! laid out by total degree, so a jet of lower order is a prefix of a jet of
//! higher order in the same number of variables.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex, OnceLock};

/// Largest supported truncation order.
pub const MAX_JET_ORDER: usize = 12;

/// Monomial bookkeeping shared by all jets with the same `(num_vars, order)`.
pub struct JetSpace {
    num_vars: usize,
    order: usize,
    exponents: Vec<Vec<u8>>,
    // degree_start[d] = index of the first monomial of total degree d
    degree_start: Vec<usize>,
    // (lhs, rhs, out) triples, sorted by total degree of `out`
    products: Vec<(u32, u32, u32)>,
    // derivatives[var] = (source, target, factor)
    derivatives: Vec<Vec<(u32, u32, f64)>>,
}

impl JetSpace {
    fn build(num_vars: usize, order: usize) -> JetSpace {
        let mut exponents: Vec<Vec<u8>> = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for degree in 0..=order {
            degree_start.push(exponents.len());
            let mut current = vec![0u8; num_vars];
            push_monomials(&mut exponents, &mut current, 0, degree);
        }
        degree_start.push(exponents.len());

        let index: HashMap<Vec<u8>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let degree_of = |i: usize| -> usize { exponents[i].iter().map(|&e| e as usize).sum() };

        let mut products = Vec::new();
        for i in 0..exponents.len() {
            let di = degree_of(i);
            for j in 0..degree_start[order - di + 1] {
                let out: Vec<u8> = exponents[i]
                    .iter()
                    .zip(&exponents[j])
                    .map(|(a, b)| a + b)
                    .collect();
                products.push((i as u32, j as u32, index[&out] as u32));
            }
        }
        products.sort_by_key(|&(_, _, k)| k);

        let mut derivatives = Vec::with_capacity(num_vars);
        for var in 0..num_vars {
            let mut table = Vec::new();
            if order > 0 {
                for target in 0..degree_start[order] {
                    let mut src = exponents[target].clone();
                    src[var] += 1;
                    table.push((index[&src] as u32, target as u32, src[var] as f64));
                }
            }
            derivatives.push(table);
        }

        JetSpace {
            num_vars,
            order,
            exponents,
            degree_start,
            products,
            derivatives,
        }
    }

    /// Shared space for `(num_vars, order)`, built on first use.
    pub fn get(num_vars: usize, order: usize) -> Arc<JetSpace> {
        type Cache = Mutex<HashMap<(usize, usize), Arc<JetSpace>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        assert!(
            order <= MAX_JET_ORDER,
            "jet order {order} exceeds {MAX_JET_ORDER}"
        );
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((num_vars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(num_vars, order)))
            .clone()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self, i: usize) -> &[u8] {
        &self.exponents[i]
    }

    /// Number of coefficients with total degree at most `degree`.
    pub fn prefix_len(&self, degree: usize) -> usize {
        self.degree_start[degree.min(self.order) + 1]
    }

    pub fn index_of(&self, exponents: &[u8]) -> Option<usize> {
        let degree: usize = exponents.iter().map(|&e| e as usize).sum();
        if exponents.len() != self.num_vars || degree > self.order {
            return None;
        }
        (self.degree_start[degree]..self.degree_start[degree + 1])
            .find(|&i| self.exponents[i] == exponents)
    }
}

fn push_monomials(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, var: usize, remaining: usize) {
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    if current.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e as u8;
        push_monomials(out, current, var + 1, remaining - e);
    }
    current[var] = 0;
}

impl JetSpace {
    /// `out += scale · (a · b)` truncated to this space, where `a` and `b`
    /// hold at least `self.len()` coefficients in the shared graded layout.
    pub fn mul_add(&self, a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
        for &(i, j, k) in &self.products {
            out[k as usize] += scale * a[i as usize] * b[j as usize];
        }
    }

    /// `out += scale · ∂f/∂x_var`, with `f` given in this space and `out`
    /// in the space of one lower order.
    pub fn derivative_add(&self, f: &[f64], var: usize, scale: f64, out: &mut [f64]) {
        for &(src, dst, factor) in &self.derivatives[var] {
            out[dst as usize] += scale * factor * f[src as usize];
        }
    }
}

/// Truncated multivariate Taylor series.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("num_vars", &self.space.num_vars)
            .field("order", &self.space.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant(num_vars: usize, order: usize, value: f64) -> Jet {
        let space = JetSpace::get(num_vars, order);
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        Jet { space, coeffs }
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn variable(num_vars: usize, order: usize, var: usize, value: f64) -> Jet {
        assert!(var < num_vars);
        let mut jet = Jet::constant(num_vars, order, value);
        if order > 0 {
            let mut e = vec![0u8; num_vars];
            e[var] = 1;
            let i = jet.space.index_of(&e).expect("degree-one monomial");
            jet.coeffs[i] = 1.0;
        }
        jet
    }

    /// Seeds `x_i = point[i] + dx_i` for every coordinate.
    pub fn seed(point: &[f64], order: usize) -> Vec<Jet> {
        (0..point.len())
            .map(|i| Jet::variable(point.len(), order, i, point[i]))
            .collect()
    }

    pub fn from_coeffs(num_vars: usize, order: usize, coeffs: Vec<f64>) -> Jet {
        let space = JetSpace::get(num_vars, order);
        assert_eq!(coeffs.len(), space.len());
        Jet { space, coeffs }
    }

    /// A constant with the same shape as `self`.
    pub fn lift(&self, value: f64) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        coeffs[0] = value;
        Jet {
            space: self.space.clone(),
            coeffs,
        }
    }

    pub fn zero_like(&self) -> Jet {
        self.lift(0.0)
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn num_vars(&self) -> usize {
        self.space.num_vars
    }

    pub fn order(&self) -> usize {
        self.space.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Scaled coefficient `∂^α f / α!`.
    pub fn coefficient(&self, exponents: &[u8]) -> f64 {
        self.space
            .index_of(exponents)
            .map(|i| self.coeffs[i])
            .unwrap_or(0.0)
    }

    /// Partial derivative `∂^α f` at the expansion point.
    pub fn partial(&self, exponents: &[u8]) -> f64 {
        let factorial: f64 = exponents
            .iter()
            .map(|&e| (1..=e as u64).product::<u64>() as f64)
            .product();
        self.coefficient(exponents) * factorial
    }

    /// First partial derivatives at the expansion point.
    pub fn gradient(&self) -> Vec<f64> {
        (0..self.num_vars())
            .map(|var| {
                let mut e = vec![0u8; self.num_vars()];
                e[var] = 1;
                self.coefficient(&e)
            })
            .collect()
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let space = JetSpace::get(self.num_vars(), order);
        let coeffs = self.coeffs[..space.len()].to_vec();
        Jet { space, coeffs }
    }

    /// `∂f/∂x_var` as a jet of order one less.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(self.order() > 0, "cannot differentiate an order-0 jet");
        let space = JetSpace::get(self.num_vars(), self.order() - 1);
        let mut coeffs = vec![0.0; space.len()];
        for &(src, dst, factor) in &self.space.derivatives[var] {
            coeffs[dst as usize] = factor * self.coeffs[src as usize];
        }
        Jet { space, coeffs }
    }

    fn binary_shape(&self, other: &Jet) -> Arc<JetSpace> {
        assert_eq!(
            self.num_vars(),
            other.num_vars(),
            "jets over different variable counts"
        );
        if self.order() <= other.order() {
            self.space.clone()
        } else {
            other.space.clone()
        }
    }

    pub fn mul_jet(&self, other: &Jet) -> Jet {
        let space = self.binary_shape(other);
        let mut coeffs = vec![0.0; space.len()];
        for &(i, j, k) in &space.products {
            coeffs[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet { space, coeffs }
    }

    pub fn scale(&self, factor: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// `Σ_k series[k] · (self − self(p))^k`, i.e. composition with a
    /// univariate function whose scaled Taylor coefficients at `self(p)` are
    /// `series`.
    pub fn compose(&self, series: &[f64]) -> Jet {
        let mut nilpotent = self.clone();
        nilpotent.coeffs[0] = 0.0;
        let top = series.len().min(self.order() + 1);
        let mut acc = self.lift(series[top - 1]);
        for k in (0..top - 1).rev() {
            acc = acc.mul_jet(&nilpotent);
            acc.coeffs[0] += series[k];
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut fact = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                fact *= k as f64;
            }
            series.push(e / fact);
        }
        self.compose(&series)
    }

    pub fn ln(&self) -> Jet {
        let a = self.value();
        let mut series = vec![a.ln()];
        for k in 1..=self.order() {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            series.push(sign / (k as f64 * a.powi(k as i32)));
        }
        self.compose(&series)
    }

    pub fn sin(&self) -> Jet {
        self.compose(&trig_series(self.value(), self.order(), 0))
    }

    pub fn cos(&self) -> Jet {
        self.compose(&trig_series(self.value(), self.order(), 1))
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        let series: Vec<f64> = (0..=self.order())
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / a.powi(k as i32 + 1)
            })
            .collect();
        self.compose(&series)
    }

    /// Real power `self^p`; requires a positive value unless `p` is an integer.
    pub fn powf(&self, p: f64) -> Jet {
        if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
            return self.powi(p as i32);
        }
        let a = self.value();
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut binom = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                binom *= (p - (k as f64 - 1.0)) / k as f64;
            }
            series.push(binom * a.powf(p - k as f64));
        }
        self.compose(&series)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn powi(&self, n: i32) -> Jet {
        if n < 0 {
            return self.recip().powi(-n);
        }
        let mut result = self.lift(1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        result
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

// offset 0: sin, offset 1: cos
fn trig_series(a: f64, order: usize, offset: usize) -> Vec<f64> {
    let (s, c) = a.sin_cos();
    let cycle = [s, c, -s, -c];
    let mut fact = 1.0;
    (0..=order)
        .map(|k| {
            if k > 0 {
                fact *= k as f64;
            }
            cycle[(k + offset) % 4] / fact
        })
        .collect()
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let space = self.binary_shape(rhs);
        let coeffs = (0..space.len())
            .map(|i| self.coeffs[i] + rhs.coeffs[i])
            .collect();
        Jet { space, coeffs }
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let space = self.binary_shape(rhs);
        let coeffs = (0..space.len())
            .map(|i| self.coeffs[i] - rhs.coeffs[i])
            .collect();
        Jet { space, coeffs }
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Div<&Jet> for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.mul_jet(&rhs.recip())
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += rhs;
        out
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        if rhs.order() < self.order() {
            *self = self.truncate(rhs.order());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        if rhs.order() < self.order() {
            *self = self.truncate(rhs.order());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn monomial_counts_match_binomials() {
        // C(n + N, N)
        assert_eq!(JetSpace::get(3, 4).len(), 35);
        assert_eq!(JetSpace::get(6, 5).len(), 462);
        assert_eq!(JetSpace::get(0, 3).len(), 1);
    }

    #[test]
    fn lower_order_is_prefix() {
        let hi = JetSpace::get(3, 5);
        let lo = JetSpace::get(3, 2);
        for i in 0..lo.len() {
            assert_eq!(hi.exponents(i), lo.exponents(i));
        }
    }

    #[test]
    fn polynomial_products_are_exact() {
        let x = Jet::seed(&[0.5, -1.5], 4);
        // (x + y)^3 at (0.5, -1.5): value -1, d/dx = 3(x+y)^2 = 3, d2/dxdy = 6(x+y) = -6
        let s = &x[0] + &x[1];
        let cube = s.powi(3);
        assert_relative_eq!(cube.value(), -1.0, epsilon = 1e-15);
        assert_relative_eq!(cube.partial(&[1, 0]), 3.0, epsilon = 1e-14);
        assert_relative_eq!(cube.partial(&[1, 1]), -6.0, epsilon = 1e-14);
        assert_relative_eq!(cube.partial(&[2, 1]), 6.0, epsilon = 1e-14);
        assert_eq!(cube.partial(&[2, 2]), 0.0);
    }

    #[test]
    fn transcendental_derivatives_match_closed_forms() {
        let x = Jet::variable(1, 6, 0, 0.3);
        let e = x.exp();
        let s = x.sin();
        let c = x.cos();
        let l = x.ln();
        for k in 0..=6u8 {
            assert_relative_eq!(e.partial(&[k]), 0.3f64.exp(), max_relative = 1e-13);
            let expect_sin =
                [0.3f64.sin(), 0.3f64.cos(), -0.3f64.sin(), -0.3f64.cos()][k as usize % 4];
            assert_relative_eq!(s.partial(&[k]), expect_sin, epsilon = 1e-12);
            let expect_cos =
                [0.3f64.cos(), -0.3f64.sin(), -0.3f64.cos(), 0.3f64.sin()][k as usize % 4];
            assert_relative_eq!(c.partial(&[k]), expect_cos, epsilon = 1e-12);
        }
        // d^k ln x = (-1)^{k+1} (k-1)! / x^k
        assert_relative_eq!(l.partial(&[3]), 2.0 / 0.3f64.powi(3), max_relative = 1e-12);
    }

    #[test]
    fn derivative_lowers_order() {
        let x = Jet::seed(&[1.0, 2.0], 3);
        let f = &x[0] * &x[0] * &x[1];
        let fx = f.derivative(0);
        assert_eq!(fx.order(), 2);
        assert_relative_eq!(fx.value(), 4.0);
        assert_relative_eq!(fx.partial(&[0, 1]), 2.0);
    }

    #[test]
    fn division_and_powers_agree() {
        let x = Jet::seed(&[1.7, 0.4], 5);
        let a = &x[0] + &x[1].sin();
        let lhs = (&a / &a.sqrt()).powf(2.0);
        for (p, q) in lhs.coeffs().iter().zip(a.coeffs()) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
