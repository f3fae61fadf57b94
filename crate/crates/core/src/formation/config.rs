use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative singular-value threshold used when counting the affine rank of a
/// point set.
pub const AFFINE_RANK_TOL: f64 = 1e-9;

/// Node positions stored column-wise as a `D x N` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    coords: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

impl Configuration {
    pub fn new(coords: DMatrix<f64>) -> Result<Self> {
        let (dim, n) = coords.shape();
        if dim == 0 {
            return Err(Error::InvalidInput("configuration dimension must be >= 1".into()));
        }
        if n < dim + 1 {
            return Err(Error::InvalidInput(format!(
                "configuration needs at least D+1 = {} nodes, got {n}",
                dim + 1
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        Ok(Self {
            coords,
            labels: None,
        })
    }

    /// Builds a configuration from a list of points of equal length.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidInput("empty point list".into()))?;
        if let Some(bad) = points.iter().position(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "point {bad} has {} coordinates, expected {dim}",
                points[bad].len()
            )));
        }
        Self::new(DMatrix::from_fn(dim, points.len(), |r, c| points[c][r]))
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.coords.nrows()
    }

    pub fn len(&self) -> usize {
        self.coords.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.ncols() == 0
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn point(&self, i: usize) -> DVector<f64> {
        self.coords.column(i).into_owned()
    }

    /// `(D+1) x N` matrix: coordinates stacked over a row of ones.
    pub fn augmented(&self) -> DMatrix<f64> {
        augment_columns(&self.coords, &(0..self.len()).collect::<Vec<_>>())
    }

    /// Augmented matrix restricted to the listed nodes (any count, possibly
    /// rank deficient).
    pub fn augmented_subset(&self, nodes: &[usize]) -> DMatrix<f64> {
        augment_columns(&self.coords, nodes)
    }

    pub fn affine_rank(&self) -> usize {
        numeric_rank(&self.augmented(), AFFINE_RANK_TOL)
    }

    /// True when the augmented matrix has full row rank `D+1`.
    pub fn is_affinely_spanning(&self) -> bool {
        self.affine_rank() == self.dim() + 1
    }

    /// Fails with a degenerate-configuration error unless the augmented matrix
    /// has full row rank.
    pub fn require_design_valid(&self) -> Result<()> {
        let rank = self.affine_rank();
        if rank < self.dim() + 1 {
            return Err(Error::DegenerateConfiguration {
                rank,
                required: self.dim() + 1,
            });
        }
        Ok(())
    }

    /// Sub-configuration over the listed nodes, in list order.
    pub fn subset(&self, nodes: &[usize]) -> Result<Self> {
        if let Some(&bad) = nodes.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidInput(format!("node index {bad} out of range")));
        }
        let coords = DMatrix::from_fn(self.dim(), nodes.len(), |r, c| self.coords[(r, nodes[c])]);
        let mut sub = Self::new(coords)?;
        if let Some(labels) = &self.labels {
            sub.labels = Some(nodes.iter().map(|&i| labels[i].clone()).collect());
        }
        Ok(sub)
    }

    /// Reorders nodes so that new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.len())?;
        self.subset(perm)
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidInput(format!(
            "permutation has length {}, expected {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidInput("not a bijection on nodes".into()));
        }
        seen[p] = true;
    }
    Ok(())
}

fn augment_columns(coords: &DMatrix<f64>, nodes: &[usize]) -> DMatrix<f64> {
    let dim = coords.nrows();
    DMatrix::from_fn(dim + 1, nodes.len(), |r, c| {
        if r < dim {
            coords[(r, nodes[c])]
        } else {
            1.0
        }
    })
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numeric_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = match linalg::singular_values(m) {
        Ok(sv) => sv,
        Err(_) => m.singular_values(),
    };
    let max = sv.max();
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Orthonormal basis `Q` (`N x (N-D-1)`) of the kernel of the augmented
/// configuration, so that `aug * Q = 0` and `Q^T Q = I`.
pub fn kernel_basis(aug: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, n) = aug.shape();
    let rank = numeric_rank(aug, AFFINE_RANK_TOL);
    if rank < rows {
        return Err(Error::DegenerateConfiguration {
            rank,
            required: rows,
        });
    }
    if n <= rows {
        return Ok(DMatrix::zeros(n, 0));
    }
    // Row space of aug via its SVD, then the eigenvectors of the
    // complementary projector with unit eigenvalue.
    let svd = linalg::thin_svd(aug)?;
    let projector = DMatrix::identity(n, n) - &svd.v * svd.v.transpose();
    let (_, vectors) = linalg::symmetric_eigen(&projector)?;
    let k = n - rows;
    let mut q = DMatrix::zeros(n, k);
    for col in 0..k {
        q.set_column(col, &vectors.column(n - 1 - col));
    }
    // One Gram-Schmidt pass keeps the basis orthonormal to round-off.
    for c in 0..k {
        for prev in 0..c {
            let d = q.column(prev).dot(&q.column(c));
            let p = q.column(prev).into_owned();
            q.column_mut(c).axpy(-d, &p, 1.0);
        }
        let nrm = q.column(c).norm();
        q.column_mut(c).scale_mut(1.0 / nrm);
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square() -> Configuration {
        Configuration::from_points(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn augment_square_appends_ones() {
        let aug = square().augmented();
        assert_eq!(aug.shape(), (3, 4));
        assert_eq!(aug.row(2).iter().copied().collect::<Vec<_>>(), vec![1.0; 4]);
        assert_eq!(aug[(0, 1)], 1.0);
        assert_eq!(aug[(1, 2)], 1.0);
        assert!(numeric_rank(&aug, AFFINE_RANK_TOL) <= 3);
    }

    #[test]
    fn collinear_points_have_rank_two() {
        let c = Configuration::from_points(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]])
            .unwrap();
        assert_eq!(c.affine_rank(), 2);
        assert!(matches!(
            c.require_design_valid(),
            Err(Error::DegenerateConfiguration { rank: 2, .. })
        ));
        assert!(kernel_basis(&c.augmented()).is_err());
    }

    #[test]
    fn rejects_too_few_nodes_and_nan() {
        assert!(Configuration::new(DMatrix::zeros(2, 2)).is_err());
        let mut m = DMatrix::zeros(2, 3);
        m[(0, 0)] = f64::NAN;
        assert!(Configuration::new(m).is_err());
    }

    #[test]
    fn kernel_basis_of_generic_quad_is_one_unit_vector() {
        let c = Configuration::from_points(&[
            vec![0.1, 0.2],
            vec![1.3, -0.1],
            vec![0.7, 1.1],
            vec![-0.4, 0.9],
        ])
        .unwrap();
        let q = kernel_basis(&c.augmented()).unwrap();
        assert_eq!(q.shape(), (4, 1));
        assert!((q.column(0).norm() - 1.0).abs() < 1e-12);
        assert!((c.augmented() * &q).norm() < 1e-12);
    }

    #[test]
    fn kernel_basis_random_50() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coords = DMatrix::from_fn(2, 50, |_, _| rng.gen::<f64>());
        let c = Configuration::new(coords).unwrap();
        let aug = c.augmented();
        let q = kernel_basis(&aug).unwrap();
        assert_eq!(q.shape(), (50, 47));
        assert!((&aug * &q).norm() < 1e-10);
        let gram = q.transpose() * &q - DMatrix::identity(47, 47);
        assert!(gram.norm() < 1e-12);
    }

    #[test]
    fn permutation_validation() {
        let c = square();
        assert!(c.permuted(&[1, 0, 3, 2]).is_ok());
        assert!(c.permuted(&[0, 0, 1, 2]).is_err());
        assert!(c.permuted(&[0, 1]).is_err());
    }
}
