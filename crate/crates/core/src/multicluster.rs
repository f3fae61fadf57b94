//! Overlapping cluster partitions, the ensemble stress `sum_c pad(Omega_c)`,
//! collective-motion and leader conditions, and the upper bound on the
//! ensemble convergence eigenvalue.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{design_stress, DesignParams, DesignResult};
use crate::error::{Error, Result};
use crate::formation::{
    numeric_rank, sorted_eigen, spectral_report, verify_stabilizable, Configuration, SpectralReport,
    StressMatrix, Tolerances, AFFINE_RANK_TOL,
};
use crate::usi::design_stress_usi;

/// Relative gap under which two eigenvalues count as one when testing the
/// `lambda_{D+2}` eigenspace for degeneracy.
pub const EIGEN_DEGENERACY_TOL: f64 = 1e-8;

/// Clusters given as lists of global node indices. Bridges are derived from
/// pairwise intersections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterPartition {
    n: usize,
    clusters: Vec<Vec<usize>>,
}

impl ClusterPartition {
    pub fn new(n: usize, clusters: Vec<Vec<usize>>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::InvalidInput("partition has no clusters".into()));
        }
        for (c, nodes) in clusters.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for &i in nodes {
                if i >= n {
                    return Err(Error::InvalidInput(format!(
                        "cluster {c} references node {i}, only {n} nodes"
                    )));
                }
                if !seen.insert(i) {
                    return Err(Error::InvalidInput(format!("cluster {c} lists node {i} twice")));
                }
            }
        }
        Ok(Self { n, clusters })
    }

    /// One cluster holding every node.
    pub fn single(n: usize) -> Self {
        Self {
            n,
            clusters: vec![(0..n).collect()],
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster(&self, c: usize) -> &[usize] {
        &self.clusters[c]
    }

    /// Clusters each node belongs to, in cluster order.
    pub fn memberships(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for (c, nodes) in self.clusters.iter().enumerate() {
            for &i in nodes {
                out[i].push(c);
            }
        }
        out
    }

    /// `C_i`, the number of clusters containing node `i`.
    pub fn membership_counts(&self) -> Vec<usize> {
        self.memberships().iter().map(Vec::len).collect()
    }

    /// Sorted `V_a ∩ V_b`.
    pub fn bridges(&self, a: usize, b: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self.clusters[a].iter().copied().collect();
        let mut out: Vec<usize> = self.clusters[b].iter().copied().filter(|i| set.contains(i)).collect();
        out.sort_unstable();
        out
    }

    /// Every pair `a < b` with a non-empty bridge set.
    pub fn bridge_pairs(&self) -> Vec<(usize, usize, Vec<usize>)> {
        let mut out = Vec::new();
        for a in 0..self.cluster_count() {
            for b in a + 1..self.cluster_count() {
                let shared = self.bridges(a, b);
                if !shared.is_empty() {
                    out.push((a, b, shared));
                }
            }
        }
        out
    }

    /// `V_{B_c}`: union of the bridge sets attached to cluster `c`.
    pub fn cluster_bridges(&self, c: usize) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for k in 0..self.cluster_count() {
            if k != c {
                set.extend(self.bridges(c, k));
            }
        }
        set.into_iter().collect()
    }

    /// Position of each global node inside cluster `c`, if present.
    pub fn local_index(&self, c: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n];
        for (k, &i) in self.clusters[c].iter().enumerate() {
            out[i] = Some(k);
        }
        out
    }

    /// Whether clusters are connected through non-empty bridge sets.
    pub fn overlap_connected(&self) -> bool {
        let pairs: Vec<(usize, usize)> = self.bridge_pairs().iter().map(|(a, b, _)| (*a, *b)).collect();
        connected(self.cluster_count(), &pairs)
    }
}

fn connected(count: usize, edges: &[(usize, usize)]) -> bool {
    if count <= 1 {
        return true;
    }
    let mut adj = vec![Vec::new(); count];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; count];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub cluster_sizes: Vec<usize>,
    /// `sum_c N_c - N`.
    pub overlap: usize,
    pub overlap_connected: bool,
    pub bridge_pairs: Vec<(usize, usize, Vec<usize>)>,
}

pub fn validate_partition(config: &Configuration, partition: &ClusterPartition) -> Result<PartitionReport> {
    let n = config.len();
    if partition.node_count() != n {
        return Err(Error::DimensionMismatch(format!(
            "partition over {} nodes, configuration has {n}",
            partition.node_count()
        )));
    }
    let counts = partition.membership_counts();
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidInput(format!("node {i} is not covered by any cluster")));
    }
    let need = config.dim() + 1;
    for (c, nodes) in partition.clusters().iter().enumerate() {
        if nodes.len() < need {
            return Err(Error::InvalidInput(format!(
                "cluster {c} has {} nodes, needs at least D+1 = {need}",
                nodes.len()
            )));
        }
    }
    let overlap_connected = partition.overlap_connected();
    if !overlap_connected {
        log::warn!("cluster overlap graph is disconnected; clusters evolve independently");
    }
    let sizes: Vec<usize> = partition.clusters().iter().map(Vec::len).collect();
    Ok(PartitionReport {
        overlap: sizes.iter().sum::<usize>() - n,
        cluster_sizes: sizes,
        overlap_connected,
        bridge_pairs: partition.bridge_pairs(),
    })
}

/// Zero-pads a cluster stress into the global `N x N` index space.
pub fn embed_stress(omega: &StressMatrix, nodes: &[usize], n: usize) -> Result<StressMatrix> {
    let m = omega.matrix();
    if m.nrows() != nodes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} stress for a cluster of {} nodes",
            m.nrows(),
            m.ncols(),
            nodes.len()
        )));
    }
    if let Some(&bad) = nodes.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidInput(format!("node index {bad} out of range for {n} nodes")));
    }
    let mut out = DMatrix::zeros(n, n);
    for (a, &i) in nodes.iter().enumerate() {
        for (b, &j) in nodes.iter().enumerate() {
            out[(i, j)] += m[(a, b)];
        }
    }
    StressMatrix::from_matrix(out)
}

/// Designs every cluster's stress on its sub-configuration, in parallel.
pub fn design_clusters(
    config: &Configuration,
    partition: &ClusterPartition,
    params: &DesignParams,
    usi: bool,
) -> Result<Vec<DesignResult>> {
    validate_partition(config, partition)?;
    partition
        .clusters()
        .par_iter()
        .enumerate()
        .map(|(c, nodes)| {
            let sub = config.subset(nodes)?;
            let result = if usi {
                design_stress_usi(&sub, params).map(|r| r.design)
            } else {
                design_stress(&sub, params)
            };
            result.map_err(|e| Error::Solver(format!("cluster {c}: {e}")))
        })
        .collect()
}

/// Designs cluster 0 only and reuses its stress for every other cluster.
/// Valid when all clusters are affine images of cluster 0 with matching node
/// order; each reuse is re-verified on its own sub-configuration.
pub fn design_clusters_shared(
    config: &Configuration,
    partition: &ClusterPartition,
    params: &DesignParams,
    usi: bool,
) -> Result<Vec<DesignResult>> {
    validate_partition(config, partition)?;
    let first = config.subset(partition.cluster(0))?;
    let base = if usi {
        design_stress_usi(&first, params)?.design
    } else {
        design_stress(&first, params)?
    };
    let mut out = Vec::with_capacity(partition.cluster_count());
    for (c, nodes) in partition.clusters().iter().enumerate() {
        if nodes.len() != first.len() {
            return Err(Error::InvalidInput(format!(
                "cluster {c} has {} nodes, cluster 0 has {}",
                nodes.len(),
                first.len()
            )));
        }
        let sub = config.subset(nodes)?;
        let verification = verify_stabilizable(&base.matrix, &sub, &Tolerances::default())?;
        if !verification.overall {
            return Err(Error::Verification(format!(
                "cluster {c} is not an affine copy of cluster 0 (residual {:.3e})",
                verification.equilibrium_residual
            )));
        }
        out.push(DesignResult {
            verification,
            ..base.clone()
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct EnsembleDesign {
    pub padded: Vec<StressMatrix>,
    pub matrix: StressMatrix,
    pub spectral: SpectralReport,
    /// `|Omega Pbar^T|_F / (|Omega|_F |Pbar|_F)`.
    pub equilibrium_residual: f64,
    /// Numeric rank equals `N - D - 1`.
    pub collective: bool,
}

impl EnsembleDesign {
    pub fn lambda_d2(&self) -> f64 {
        self.spectral.lambda_d2
    }
}

/// Sums the zero-padded cluster stresses. Clusters whose design failed
/// verification are rejected.
pub fn ensemble_stress(
    designs: &[DesignResult],
    partition: &ClusterPartition,
    config: &Configuration,
) -> Result<EnsembleDesign> {
    if designs.len() != partition.cluster_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} designs for {} clusters",
            designs.len(),
            partition.cluster_count()
        )));
    }
    if let Some(c) = designs.iter().position(|d| !d.verification.overall) {
        return Err(Error::Verification(format!("cluster {c} stress is not stabilizable")));
    }
    let padded = designs
        .iter()
        .zip(partition.clusters())
        .map(|(d, nodes)| embed_stress(&d.matrix, nodes, config.len()))
        .collect::<Result<Vec<_>>>()?;
    ensemble_from_padded(padded, config)
}

/// Ensemble from already padded stresses.
pub fn ensemble_from_padded(padded: Vec<StressMatrix>, config: &Configuration) -> Result<EnsembleDesign> {
    let n = config.len();
    let mut sum = DMatrix::zeros(n, n);
    for p in &padded {
        if p.node_count() != n {
            return Err(Error::DimensionMismatch("padded stress of wrong size".into()));
        }
        sum += p.matrix();
    }
    let matrix = StressMatrix::from_matrix(sum)?;
    let spectral = spectral_report(matrix.matrix(), config.dim())?;
    let aug = config.augmented();
    let denom = matrix.matrix().norm() * aug.norm();
    let equilibrium_residual = if denom > 0.0 {
        (matrix.matrix() * aug.transpose()).norm() / denom
    } else {
        0.0
    };
    let collective = spectral.rank == n - config.dim() - 1;
    Ok(EnsembleDesign {
        padded,
        matrix,
        spectral,
        equilibrium_residual,
        collective,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub clusters: (usize, usize),
    pub bridges: Vec<usize>,
    pub rank: usize,
    pub full_rank: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectiveReport {
    pub pairs: Vec<PairVerdict>,
    pub overlap_connected: bool,
    /// Full-rank bridges alone connect every cluster.
    pub overall: bool,
}

/// Bridge-rank test for every overlapping cluster pair.
pub fn collective_motion_check(config: &Configuration, partition: &ClusterPartition) -> CollectiveReport {
    let need = config.dim() + 1;
    let pairs: Vec<PairVerdict> = partition
        .bridge_pairs()
        .into_iter()
        .map(|(a, b, bridges)| {
            let rank = numeric_rank(&config.augmented_subset(&bridges), AFFINE_RANK_TOL);
            PairVerdict {
                clusters: (a, b),
                bridges,
                rank,
                full_rank: rank == need,
            }
        })
        .collect();
    let good: Vec<(usize, usize)> = pairs.iter().filter(|p| p.full_rank).map(|p| p.clusters).collect();
    CollectiveReport {
        overall: connected(partition.cluster_count(), &good),
        overlap_connected: partition.overlap_connected(),
        pairs,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderVerdict {
    pub cluster: usize,
    /// Leaders inside the cluster.
    pub leaders: Vec<usize>,
    /// `V_{B_c}`.
    pub bridges: Vec<usize>,
    pub rank: usize,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderReport {
    pub clusters: Vec<LeaderVerdict>,
    pub overall: bool,
}

/// Per cluster, `rank Pbar((V_l ∩ V_c) ∪ V_{B_c}) = D + 1`.
pub fn leader_condition_check(
    config: &Configuration,
    partition: &ClusterPartition,
    leaders: &[usize],
) -> Result<LeaderReport> {
    if let Some(&bad) = leaders.iter().find(|&&i| i >= config.len()) {
        return Err(Error::InvalidInput(format!("leader {bad} out of range")));
    }
    let need = config.dim() + 1;
    let leader_set: BTreeSet<usize> = leaders.iter().copied().collect();
    let clusters: Vec<LeaderVerdict> = (0..partition.cluster_count())
        .map(|c| {
            let own: Vec<usize> = partition
                .cluster(c)
                .iter()
                .copied()
                .filter(|i| leader_set.contains(i))
                .collect();
            let bridges = partition.cluster_bridges(c);
            let anchors: BTreeSet<usize> = own.iter().chain(&bridges).copied().collect();
            let anchors: Vec<usize> = anchors.into_iter().collect();
            let rank = if anchors.is_empty() {
                0
            } else {
                numeric_rank(&config.augmented_subset(&anchors), AFFINE_RANK_TOL)
            };
            LeaderVerdict {
                cluster: c,
                leaders: own,
                bridges,
                rank,
                ok: rank == need,
            }
        })
        .collect();
    Ok(LeaderReport {
        overall: clusters.iter().all(|v| v.ok),
        clusters,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub cluster: usize,
    pub lambda_d2: f64,
    pub rho: f64,
    /// The `lambda_{D+2}` eigenspace had multiplicity above one; the term is
    /// the minimum over its basis vectors.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaBound {
    pub terms: Vec<BoundTerm>,
    /// `min_c (lambda_{D+2}(Omega_c) + rho_c)`.
    pub bound: f64,
    pub measured: f64,
    pub holds: bool,
    /// Collective-motion conditions hold, so the bound is backed by theory.
    pub within_hypotheses: bool,
}

/// Slack added to the bound when reporting `holds`.
pub const BOUND_TOL: f64 = 1e-6;

/// `rho_c = beta * sum_{k != c} |v_c restricted to B_ck|^2`, with `v_c` the
/// cluster-local `lambda_{D+2}` eigenvector mapped through `V_c`.
pub fn ensemble_lambda_bound(
    designs: &[DesignResult],
    partition: &ClusterPartition,
    config: &Configuration,
    beta: f64,
) -> Result<LambdaBound> {
    let ensemble = ensemble_stress(designs, partition, config)?;
    let dim = config.dim();
    let mut terms = Vec::with_capacity(designs.len());
    for (c, design) in designs.iter().enumerate() {
        let (values, vectors) = sorted_eigen(design.matrix.matrix());
        let idx = dim + 1;
        let lam = values.get(idx).copied().unwrap_or(0.0);
        let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut basis = vec![idx];
        for k in idx + 1..values.len() {
            if (values[k] - lam).abs() <= EIGEN_DEGENERACY_TOL * scale {
                basis.push(k);
            }
        }
        let local = partition.local_index(c);
        let bridge_sets: Vec<Vec<usize>> = (0..partition.cluster_count())
            .filter(|&k| k != c)
            .map(|k| {
                partition
                    .bridges(c, k)
                    .iter()
                    .map(|&g| local[g].expect("bridge lies in the cluster"))
                    .collect()
            })
            .collect();
        let rho_of = |v: DVector<f64>| -> f64 {
            beta * bridge_sets
                .iter()
                .map(|set| set.iter().map(|&l| v[l] * v[l]).sum::<f64>())
                .sum::<f64>()
        };
        let rho = basis
            .iter()
            .map(|&k| rho_of(vectors.column(k).into_owned()))
            .fold(f64::INFINITY, f64::min);
        terms.push(BoundTerm {
            cluster: c,
            lambda_d2: lam,
            rho,
            degenerate: basis.len() > 1,
        });
    }
    let bound = terms.iter().map(|t| t.lambda_d2 + t.rho).fold(f64::INFINITY, f64::min);
    let measured = ensemble.lambda_d2();
    let within_hypotheses = collective_motion_check(config, partition).overall;
    if !within_hypotheses {
        log::warn!("bridge conditions fail; eigenvalue bound reported outside its hypotheses");
    }
    Ok(LambdaBound {
        terms,
        bound,
        measured,
        holds: measured <= bound + BOUND_TOL,
        within_hypotheses,
    })
}

/// Largest `|v_c^T n|` over clusters `c` and an orthonormal basis `n` of
/// `Null(Omega)`, with `v_c` the zero-padded `lambda_{D+2}` eigenvector of
/// each cluster.
pub fn padded_eigenvector_orthogonality(
    designs: &[DesignResult],
    partition: &ClusterPartition,
    ensemble: &EnsembleDesign,
    config: &Configuration,
) -> f64 {
    let n = config.len();
    let dim = config.dim();
    let (_, vectors) = sorted_eigen(ensemble.matrix.matrix());
    // Whole numerical null space: any x with Omega x = 0 restricts to an
    // affine image on every cluster, so flex modes are covered too.
    let nullity = (n - ensemble.spectral.rank).max(dim + 1).min(n);
    let null = vectors.columns(0, nullity).into_owned();
    let mut worst: f64 = 0.0;
    for (c, design) in designs.iter().enumerate() {
        let (_, local) = sorted_eigen(design.matrix.matrix());
        let v = local.column(dim + 1);
        let mut padded = DVector::zeros(n);
        for (k, &g) in partition.cluster(c).iter().enumerate() {
            padded[g] = v[k];
        }
        for col in null.column_iter() {
            worst = worst.max(col.dot(&padded).abs());
        }
    }
    worst
}

/// Two clusters split along the first coordinate, sharing the `bridges`
/// nodes nearest the median.
pub fn split_by_first_axis(config: &Configuration, bridges: usize) -> Result<ClusterPartition> {
    let n = config.len();
    if bridges > n {
        return Err(Error::InvalidInput(format!("{bridges} bridges for {n} nodes")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| config.coords()[(0, a)].total_cmp(&config.coords()[(0, b)]));
    let left_end = (n + bridges) / 2;
    let right_start = left_end - bridges;
    let mut left = order[..left_end].to_vec();
    let mut right = order[right_start..].to_vec();
    left.sort_unstable();
    right.sort_unstable();
    ClusterPartition::new(n, vec![left, right])
}

/// `clusters` windows of `size` consecutive nodes in first-coordinate order,
/// spread evenly so the first starts at the smallest and the last ends at the
/// largest coordinate.
pub fn chain_by_first_axis(config: &Configuration, clusters: usize, size: usize) -> Result<ClusterPartition> {
    let n = config.len();
    if clusters == 0 || size > n || clusters * size < n {
        return Err(Error::InvalidInput(format!(
            "{clusters} clusters of {size} cannot cover {n} nodes"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| config.coords()[(0, a)].total_cmp(&config.coords()[(0, b)]));
    let span = (n - size) as f64;
    let parts = (0..clusters)
        .map(|k| {
            let start = if clusters == 1 {
                0
            } else {
                (k as f64 * span / (clusters - 1) as f64).round() as usize
            };
            let mut nodes = order[start..start + size].to_vec();
            nodes.sort_unstable();
            nodes
        })
        .collect();
    ClusterPartition::new(n, parts)
}

/// Ensemble built straight from a configuration and partition.
pub fn design_ensemble(
    config: &Configuration,
    partition: &ClusterPartition,
    params: &DesignParams,
    usi: bool,
) -> Result<(Vec<DesignResult>, EnsembleDesign)> {
    let designs = design_clusters(config, partition, params, usi)?;
    let ensemble = ensemble_stress(&designs, partition, config)?;
    Ok((designs, ensemble))
}

/// Relative PSD slack for the ensemble: `lambda_1 >= -1e-8 lambda_N`.
pub const ENSEMBLE_PSD_TOL: f64 = 1e-8;

pub fn ensemble_psd(ensemble: &EnsembleDesign) -> bool {
    ensemble.spectral.lambda_min() >= -ENSEMBLE_PSD_TOL * ensemble.spectral.lambda_max.max(0.0)
}
