//! Principal component analysis.
//!
//! Components are the top right singular vectors of the centered data,
//! obtained from a cyclic Jacobi eigendecomposition of whichever Gram
//! matrix is smaller (`XᵀX`, d×d, or `XXᵀ`, m×m). Explained variances are
//! eigenvalues of the sample covariance (divisor m − 1).

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel<T: Scalar> {
    pub mean: Array1<T>,
    /// `k × d`, orthonormal rows.
    pub components: Array2<T>,
    /// Non-increasing.
    pub explained_variance: Array1<T>,
    pub total_variance: T,
}

impl<T: Scalar> PcaModel<T> {
    pub fn explained_variance_ratio(&self) -> Array1<T> {
        if self.total_variance > T::zero() {
            self.explained_variance.mapv(|v| v / self.total_variance)
        } else {
            Array1::zeros(self.explained_variance.len())
        }
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and eigenvectors as columns.
pub fn symmetric_eigen<T: Scalar>(a: &Array2<T>) -> (Vec<T>, Array2<T>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut a = a.clone();
    let mut v = Array2::<T>::eye(n);
    let two = T::lit(2.0);
    let scale = a.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let threshold = T::epsilon() * scale;

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + a[[p, q]] * a[[p, q]];
            }
        }
        if off.sqrt() <= threshold || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].partial_cmp(&a[[i, i]]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let vectors = v.select(Axis(1), &order);
    (values, vectors)
}

/// Orthonormal direction not spanned by `basis` rows, via Gram-Schmidt on
/// the coordinate axes.
fn complete_basis<T: Scalar>(basis: &[Array1<T>], d: usize) -> Array1<T> {
    for axis in 0..d {
        let mut v = Array1::<T>::zeros(d);
        v[axis] = T::one();
        for _ in 0..2 {
            for b in basis {
                let proj = v.dot(b);
                v.scaled_add(-proj, b);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > T::lit(1e-3) {
            return v / norm;
        }
    }
    unreachable!("fewer than d basis vectors always leave a free axis")
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn fix_sign<T: Scalar>(v: &mut Array1<T>) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < T::zero() {
        v.mapv_inplace(|x| -x);
    }
}

pub fn pca_fit<T: Scalar>(x: ArrayView2<T>, k: usize) -> Result<PcaModel<T>, AnalysisError> {
    let (m, d) = x.dim();
    if m < 2 {
        return Err(AnalysisError::InvalidArgument(format!(
            "PCA needs at least 2 samples, got {m}"
        )));
    }
    if k == 0 || k > (m - 1).min(d) {
        return Err(AnalysisError::InvalidArgument(format!(
            "k = {k} out of range 1..={}",
            (m - 1).min(d)
        )));
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let xc = &x - &mean;
    let denom = T::of_usize(m - 1);
    let total_variance = xc.iter().map(|v| *v * *v).sum::<T>() / denom;

    let mut comps: Vec<Array1<T>> = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    if d <= m {
        let cov = xc.t().dot(&xc) / denom;
        let (vals, vecs) = symmetric_eigen(&cov);
        for (i, &lambda) in vals.iter().take(k).enumerate() {
            comps.push(vecs.column(i).to_owned());
            variances.push(lambda.max(T::zero()));
        }
    } else {
        let gram = xc.dot(&xc.t()) / denom;
        let (vals, vecs) = symmetric_eigen(&gram);
        let tol = T::epsilon() * T::of_usize(m.max(d)) * vals[0].abs().max(T::min_positive_value());
        for (i, &value) in vals.iter().take(k).enumerate() {
            let lambda = value.max(T::zero());
            variances.push(lambda);
            if lambda > tol {
                // v = Xᵀu / ‖Xᵀu‖
                let v = xc.t().dot(&vecs.column(i));
                let norm = v.dot(&v).sqrt();
                comps.push(v / norm);
            } else {
                let v = complete_basis(&comps, d);
                comps.push(v);
            }
        }
    }
    let mut components = Array2::<T>::zeros((k, d));
    for (i, mut c) in comps.into_iter().enumerate() {
        fix_sign(&mut c);
        components.row_mut(i).assign(&c);
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance: Array1::from(variances),
        total_variance,
    })
}

/// `(X − mean) · componentsᵀ`, one row per sample.
pub fn pca_project<T: Scalar>(
    model: &PcaModel<T>,
    x: ArrayView2<T>,
) -> Result<Array2<T>, AnalysisError> {
    if x.ncols() != model.mean.len() {
        return Err(AnalysisError::Dimension(format!(
            "input has {} features, model has {}",
            x.ncols(),
            model.mean.len()
        )));
    }
    Ok((&x - &model.mean).dot(&model.components.t()))
}
