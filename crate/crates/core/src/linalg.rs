//! SVD-based rank, kernel and image helpers shared by every module.

use nalgebra::{DMatrix, DVector};

/// Relative rank tolerance used when callers do not supply one.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Singular values (descending) with the matching left and right singular vectors.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// SVD with a full right basis (`v` is `cols × cols`), sorted descending.
pub fn full_svd(a: &DMatrix<f64>) -> SortedSvd {
    let (rows, cols) = a.shape();
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let singular: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u_sorted = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v_sorted = DMatrix::from_fn(v_t.ncols(), order.len(), |r, c| v_t[(order[c], r)]);
    SortedSvd {
        u: u_sorted.rows(0, rows.min(u.nrows())).into_owned(),
        singular,
        v: v_sorted,
    }
}

/// Number of singular values above `tol · reference`, where `reference`
/// defaults to the largest singular value.
pub fn rank_with_reference(singular: &[f64], tol: f64, reference: Option<f64>) -> usize {
    let scale = reference.unwrap_or_else(|| singular.first().copied().unwrap_or(0.0));
    if scale <= 0.0 {
        return 0;
    }
    singular.iter().filter(|&&s| s > tol * scale).count()
}

pub fn rank(a: &DMatrix<f64>, tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    rank_with_reference(&full_svd(a).singular, tol, None)
}

/// Orthonormal basis (columns) of the kernel of `a`.
pub fn kernel(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    kernel_with_reference(a, tol, None)
}

pub fn kernel_with_reference(a: &DMatrix<f64>, tol: f64, reference: Option<f64>) -> DMatrix<f64> {
    let cols = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let svd = full_svd(a);
    let r = rank_with_reference(&svd.singular, tol, reference);
    svd.v.columns(r, cols - r).into_owned()
}

/// Orthonormal basis (columns) of the column space of `a`.
pub fn image(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let t = a.transpose();
    let svd = full_svd(&t);
    let r = rank_with_reference(&svd.singular, tol, None);
    svd.v.columns(0, r).into_owned()
}

/// Least-squares solution of `a x = b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = full_svd(a);
    let r = rank_with_reference(&svd.singular, 1e-13, None);
    let mut x = DVector::zeros(a.ncols());
    for k in 0..r {
        let coeff = svd.u.column(k).dot(b) / svd.singular[k];
        x += svd.v.column(k) * coeff;
    }
    x
}

/// Columns as a matrix; `rows` fixes the height when the list is empty.
pub fn columns_to_matrix(vectors: &[DVector<f64>], rows: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

pub fn matrix_columns(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    (0..m.ncols()).map(|j| m.column(j).into_owned()).collect()
}

/// Row-major flattening of a square matrix.
pub fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    let (r, c) = m.shape();
    DVector::from_fn(r * c, |k, _| m[(k / c, k % c)])
}

pub fn unflatten(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| v[i * n + j])
}

pub fn bracket(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Euclidean distance from `v` to the column space of the orthonormal `q`.
pub fn residual_outside(q: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    if q.ncols() == 0 {
        return v.clone();
    }
    v - q * (q.transpose() * v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_wide_matrix_is_complete() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = kernel(&a, DEFAULT_TOL);
        assert_eq!(k.ncols(), 2);
        assert!(max_abs(&(&a * &k)) < 1e-14);
    }

    #[test]
    fn image_and_rank_agree() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert_eq!(rank(&a, DEFAULT_TOL), 2);
        assert_eq!(image(&a, DEFAULT_TOL).ncols(), 2);
        assert_eq!(kernel(&a, DEFAULT_TOL).ncols(), 1);
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = DVector::from_vec(vec![2.0, -1.0]);
        let b = &a * &x;
        assert!(max_abs_vec(&(lstsq(&a, &b) - x)) < 1e-13);
    }
}
