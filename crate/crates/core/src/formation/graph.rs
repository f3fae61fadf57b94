use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of edges of the complete graph on `n` nodes.
pub fn complete_edge_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of edge `(i, j)`, `i < j`, in the lexicographic complete-graph
/// ordering `(0,1), (0,2), ..., (0,n-1), (1,2), ...`.
pub fn edge_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

fn complete_edges(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Undirected simple graph on `n` nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Topology {
    /// Edges are normalized to `(min, max)`; duplicates and self loops are
    /// rejected.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        let mut normalized = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidInput(format!("self loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidInput(format!("edge ({a},{b}) out of range")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::InvalidInput(format!("duplicate edge {e:?}")));
            }
            normalized.push(e);
        }
        Ok(Self {
            n,
            edges: normalized,
        })
    }

    pub fn complete(n: usize) -> Self {
        Self {
            n,
            edges: complete_edges(n).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn average_degree(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            2.0 * self.edges.len() as f64 / self.n as f64
        }
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Signed `N x M` incidence matrix, `+1` at the smaller endpoint.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.n, self.edges.len());
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            b[(i, e)] = 1.0;
            b[(j, e)] = -1.0;
        }
        b
    }
}

/// Edge weights over the complete graph in canonical lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressVector {
    n: usize,
    weights: Vec<f64>,
}

impl StressVector {
    pub fn new(n: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != complete_edge_count(n) {
            return Err(Error::DimensionMismatch(format!(
                "stress vector of length {} for {n} nodes (expected {})",
                weights.len(),
                complete_edge_count(n)
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("non-finite stress".into()));
        }
        Ok(Self { n, weights })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            weights: vec![0.0; complete_edge_count(n)],
        }
    }

    /// Scatters weights given on a subset of edges into the complete ordering.
    pub fn from_edges(n: usize, edges: &[((usize, usize), f64)]) -> Result<Self> {
        let mut out = Self::zeros(n);
        for &((a, b), w) in edges {
            if a == b || a >= n || b >= n {
                return Err(Error::InvalidInput(format!("bad edge ({a},{b})")));
            }
            out.weights[edge_index(n, a.min(b), a.max(b))] = w;
        }
        Ok(out)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[edge_index(self.n, i.min(j), i.max(j))]
    }

    /// `((i, j), weight)` for every complete-graph edge.
    pub fn iter_edges(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        complete_edges(self.n).zip(self.weights.iter().copied())
    }

    /// Assembles `B diag(w) B^T` without materializing the incidence matrix.
    pub fn to_matrix(&self) -> StressMatrix {
        let mut m = DMatrix::zeros(self.n, self.n);
        for ((i, j), w) in self.iter_edges() {
            if w != 0.0 {
                m[(i, j)] -= w;
                m[(j, i)] -= w;
                m[(i, i)] += w;
                m[(j, j)] += w;
            }
        }
        StressMatrix(m)
    }
}

/// Symmetric `N x N` generalized Laplacian.
#[derive(Clone, Debug, PartialEq)]
pub struct StressMatrix(DMatrix<f64>);

impl StressMatrix {
    /// Accepts a matrix symmetric up to `1e-10` relative and stores its exact
    /// symmetric part.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch("stress matrix must be square".into()));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        if (&m - m.transpose()).amax() > 1e-10 * scale {
            return Err(Error::InvalidInput("stress matrix is not symmetric".into()));
        }
        Ok(Self((&m + m.transpose()) * 0.5))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn node_count(&self) -> usize {
        self.0.nrows()
    }

    /// Reads edge weights back off the off-diagonal (`w_ij = -Omega_ij`).
    pub fn to_stress_vector(&self) -> StressVector {
        let n = self.node_count();
        StressVector {
            n,
            weights: complete_edges(n).map(|(i, j)| -self.0[(i, j)]).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `Pi Omega Pi^T` where new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        super::config::check_permutation(perm, self.node_count())?;
        let n = self.node_count();
        Ok(Self(DMatrix::from_fn(n, n, |r, c| self.0[(perm[r], perm[c])])))
    }
}

/// Signed incidence of the complete graph: column for `(i, j)` has `+1` at row
/// `i` and `-1` at row `j`.
pub fn complete_incidence(n: usize) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "complete incidence needs at least 2 nodes, got {n}"
        )));
    }
    Ok(Topology::complete(n).incidence())
}

/// `Omega = B diag(w) B^T`, accumulated column by column over the nonzero
/// pattern of `B`.
pub fn assemble_stress(incidence: &DMatrix<f64>, weights: &[f64]) -> Result<StressMatrix> {
    if incidence.ncols() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} incidence columns",
            weights.len(),
            incidence.ncols()
        )));
    }
    let n = incidence.nrows();
    let mut m = DMatrix::zeros(n, n);
    let mut support = Vec::new();
    for (e, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        support.clear();
        support.extend(
            incidence
                .column(e)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(r, v)| (r, *v)),
        );
        for &(r, vr) in &support {
            for &(c, vc) in &support {
                m[(r, c)] += w * vr * vc;
            }
        }
    }
    Ok(StressMatrix(m))
}

/// Result of thresholding a complete-graph stress vector.
#[derive(Clone, Debug)]
pub struct TopologyExtraction {
    pub topology: Topology,
    pub pruned: StressVector,
    pub edge_count: usize,
    pub average_degree: f64,
    /// Set when no edge survived (including the all-zero input).
    pub empty: bool,
}

/// Keeps edges with `|w| > eps_rel * max|w|` and zeroes the rest.
pub fn extract_topology(stress: &StressVector, eps_rel: f64) -> Result<TopologyExtraction> {
    if !(eps_rel >= 0.0) {
        return Err(Error::InvalidInput("eps_rel must be >= 0".into()));
    }
    let n = stress.node_count();
    let max = stress.weights.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
    let threshold = eps_rel * max;
    let mut edges = Vec::new();
    let mut pruned = StressVector::zeros(n);
    for (k, ((i, j), w)) in stress.iter_edges().enumerate() {
        if max > 0.0 && w.abs() > threshold {
            edges.push((i, j));
            pruned.weights[k] = w;
        }
    }
    let topology = Topology { n, edges };
    Ok(TopologyExtraction {
        edge_count: topology.edge_count(),
        average_degree: topology.average_degree(),
        empty: topology.edge_count() == 0,
        topology,
        pruned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_index_is_lexicographic() {
        let n = 5;
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                assert_eq!(edge_index(n, i, j), k);
                k += 1;
            }
        }
        assert_eq!(k, complete_edge_count(n));
    }

    #[test]
    fn incidence_k3_columns() {
        let b = complete_incidence(3).unwrap();
        assert_eq!(b.shape(), (3, 3));
        let expected = DMatrix::from_row_slice(3, 3, &[1., 1., 0., -1., 0., 1., 0., -1., -1.]);
        assert_eq!(b, expected);
        for c in 0..3 {
            assert_eq!(b.column(c).sum(), 0.0);
        }
    }

    #[test]
    fn incidence_sixty_nodes() {
        let b = complete_incidence(60).unwrap();
        assert_eq!(b.shape(), (60, 1770));
        assert!(b.column_iter().all(|c| c.sum() == 0.0));
    }

    #[test]
    fn incidence_rejects_single_node() {
        assert!(matches!(complete_incidence(1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn unit_weights_give_laplacian() {
        let b = complete_incidence(3).unwrap();
        let omega = assemble_stress(&b, &[1.0; 3]).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[2., -1., -1., -1., 2., -1., -1., -1., 2.]);
        assert_eq!(omega.matrix(), &expected);
        let zero = assemble_stress(&b, &[0.0; 3]).unwrap();
        assert_eq!(zero.matrix(), &DMatrix::zeros(3, 3));
    }

    #[test]
    fn assemble_rejects_length_mismatch() {
        let b = complete_incidence(4).unwrap();
        assert!(matches!(
            assemble_stress(&b, &[1.0; 5]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn to_matrix_matches_incidence_route() {
        let n = 6;
        let w: Vec<f64> = (0..complete_edge_count(n)).map(|k| (k as f64 * 0.37).sin()).collect();
        let sv = StressVector::new(n, w.clone()).unwrap();
        let a = sv.to_matrix();
        let b = assemble_stress(&complete_incidence(n).unwrap(), &w).unwrap();
        assert!((a.matrix() - b.matrix()).amax() < 1e-14);
        assert_eq!(a.to_stress_vector(), sv);
    }

    #[test]
    fn topology_rejects_duplicates_and_loops() {
        assert!(Topology::new(3, vec![(0, 1), (1, 0)]).is_err());
        assert!(Topology::new(3, vec![(1, 1)]).is_err());
        assert!(Topology::new(3, vec![(0, 3)]).is_err());
        let t = Topology::new(4, vec![(2, 0), (1, 3)]).unwrap();
        assert_eq!(t.edges(), &[(0, 2), (1, 3)]);
        assert_eq!(t.average_degree(), 1.0);
    }

    #[test]
    fn extraction_thresholds_relative_to_max() {
        let sv = StressVector::new(3, vec![1.0, 1e-12, -0.5]).unwrap();
        let ex = extract_topology(&sv, 1e-6).unwrap();
        assert_eq!(ex.edge_count, 2);
        assert_eq!(ex.pruned.weights(), &[1.0, 0.0, -0.5]);
        assert!(!ex.empty);
        let ex = extract_topology(&StressVector::zeros(4), 1e-6).unwrap();
        assert!(ex.empty);
        assert_eq!(ex.edge_count, 0);
        assert!(extract_topology(&sv, -1.0).is_err());
    }
}
