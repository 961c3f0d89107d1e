//! Principal component projection via a symmetric eigensolver on the
//! covariance matrix.

use log::warn;

use crate::error::{Error, Result};
use crate::ndmath::Matrix;

/// Fitted principal components.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `d x out_dim`, one unit-norm component per column.
    pub components: Matrix,
    /// Eigenvalues of the covariance, descending, one per component.
    pub explained_variance: Vec<f64>,
}

impl Pca {
    pub fn fit(x: &Matrix, out_dim: usize) -> Result<Self> {
        let (n, d) = x.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidArgument("PCA on an empty matrix".into()));
        }
        if out_dim > d {
            return Err(Error::InvalidArgument(format!("PCA output dimension {out_dim} exceeds input dimension {d}")));
        }
        if out_dim > n {
            warn!("PCA output dimension {out_dim} exceeds sample count {n}; trailing components are null");
        }
        let mean = x.column_means();
        let mut centered = x.clone();
        for i in 0..n {
            for (v, m) in centered.row_mut(i).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        let cov = centered.t_matmul(&centered)?.scale(1.0 / n as f64);
        let (values, vectors) = symmetric_eigen(&cov);

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

        let mut components = Matrix::zeros(d, out_dim);
        let mut explained = Vec::with_capacity(out_dim);
        for (c, &k) in order.iter().take(out_dim).enumerate() {
            let mut col: Vec<f64> = (0..d).map(|r| vectors[(r, k)]).collect();
            // sign convention: largest-magnitude coordinate positive
            let pivot = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            if col[pivot] < 0.0 {
                col.iter_mut().for_each(|v| *v = -*v);
            }
            for (r, v) in col.into_iter().enumerate() {
                components[(r, c)] = v;
            }
            explained.push(values[k].max(0.0));
        }
        let tiny = explained.first().copied().unwrap_or(0.0) * 1e-12;
        if explained.iter().any(|&v| v <= tiny) {
            warn!("PCA: requested {out_dim} components but data rank is lower; trailing components are numerically null");
        }
        Ok(Self { mean, components, explained_variance: explained })
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::shape("pca_transform", format!("{} columns, fitted on {}", x.cols(), self.mean.len())));
        }
        let mut centered = x.clone();
        for i in 0..x.rows() {
            for (v, m) in centered.row_mut(i).iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        centered.matmul(&self.components)
    }
}

/// Mean-centres `x` and projects it onto its top `out_dim` principal
/// components.
pub fn pca_fit_transform(x: &Matrix, out_dim: usize) -> Result<Matrix> {
    Pca::fit(x, out_dim)?.transform(x)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// unsorted eigenvalues and the matrix whose columns are eigenvectors.
pub(crate) fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale: f64 = m.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn variance(m: &Matrix) -> f64 {
        let means = m.column_means();
        let mut s = 0.0;
        for i in 0..m.rows() {
            for (v, mu) in m.row(i).iter().zip(&means) {
                s += (v - mu).powi(2);
            }
        }
        s / m.rows() as f64
    }

    #[test]
    fn rank_one_line_keeps_all_variance() {
        let rows: Vec<Vec<f64>> = (-5..=5).map(|t| vec![2.0 * t as f64, -1.0 * t as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = pca_fit_transform(&x, 1).unwrap();
        assert!((variance(&p) - variance(&x)).abs() <= 1e-9);
    }

    #[test]
    fn axis_aligned_full_dim_preserves_variance() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 3.0], vec![-1.0, -2.0, -3.0]])
            .unwrap();
        let p = pca_fit_transform(&x, 3).unwrap();
        assert!((variance(&p) - variance(&x)).abs() <= 1e-9);
    }

    #[test]
    fn sign_convention_and_ordering() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64).sin() * 3.0, -(i as f64).cos(), 0.1 * i as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let pca = Pca::fit(&x, 3).unwrap();
        for c in 0..3 {
            let col: Vec<f64> = (0..3).map(|r| pca.components[(r, c)]).collect();
            let max = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
            assert!(max > 0.0);
        }
        assert!(pca.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_out_dim_above_d() {
        assert!(Pca::fit(&Matrix::zeros(4, 2), 3).is_err());
    }
}
