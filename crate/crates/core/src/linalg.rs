//! Dense decompositions routed through faer. nalgebra's SVD loses accuracy on
//! clustered singular values, which symmetric configurations produce.

use faer::{MatRef, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn view(m: &DMatrix<f64>) -> MatRef<'_, f64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

fn to_dmatrix(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `m = U diag(s) Vᵀ` with singular values in nonincreasing order.
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    if m.is_empty() {
        let k = m.nrows().min(m.ncols());
        return Ok(ThinSvd {
            u: DMatrix::zeros(m.nrows(), k),
            s: DVector::zeros(k),
            v: DMatrix::zeros(m.ncols(), k),
        });
    }
    let svd = view(m)
        .thin_svd()
        .map_err(|e| Error::Solver(format!("svd did not converge: {e:?}")))?;
    let k = m.nrows().min(m.ncols());
    Ok(ThinSvd {
        u: to_dmatrix(svd.U()),
        s: DVector::from_fn(k, |i, _| svd.S()[i]),
        v: to_dmatrix(svd.V()),
    })
}

pub fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if m.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let s = view(m)
        .singular_values()
        .map_err(|e| Error::Solver(format!("svd did not converge: {e:?}")))?;
    Ok(DVector::from_vec(s))
}

/// Eigenvalues in nondecreasing order with matching eigenvector columns. Only
/// the lower triangle of `m` is read.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if m.is_empty() {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    let evd = view(m)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver(format!("eigendecomposition did not converge: {e:?}")))?;
    let n = m.nrows();
    Ok((DVector::from_fn(n, |i, _| evd.S()[i]), to_dmatrix(evd.U())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_reconstructs_repeated_spectrum() {
        let q = DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0)
            .qr()
            .q();
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0, 2.0, 1.0, 1.0, 0.0]));
        let m = &q * d * q.transpose();
        let svd = thin_svd(&m).unwrap();
        let rec = &svd.u * DMatrix::from_diagonal(&svd.s) * svd.v.transpose();
        assert!((rec - &m).norm() < 1e-13);
        assert!((svd.s[0] - 2.0).abs() < 1e-13 && svd.s[5].abs() < 1e-13);
        let (vals, vecs) = symmetric_eigen(&m).unwrap();
        assert!(vals[0].abs() < 1e-13 && (vals[5] - 2.0).abs() < 1e-13);
        assert!((&m * &vecs - &vecs * DMatrix::from_diagonal(&vals)).norm() < 1e-13);
        assert_eq!(singular_values(&m).unwrap().len(), 6);
    }
}
