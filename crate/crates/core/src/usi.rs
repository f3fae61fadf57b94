//! Edge classes of symmetric configurations and the class-reduced design
//! program.
//!
//! Edges whose squared lengths agree are given one shared stress variable.
//! For a configuration invariant under rotations up to node relabeling,
//! symmetric-equivalent edges always have equal length, so this grouping is
//! never finer than the true symmetry classes.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{ConicSolver, InteriorPoint, LmiTerms};
use crate::design::{
    build_problem, design_stress_with, finalize, require_solution, solve_design, warn_below_critical,
    ConicProblem, DesignInputs, DesignParams, DesignResult, Polish, ProblemKind, ProgramParts,
};
use crate::error::{Error, Result};
use crate::formation::{complete_edge_count, edge_index, Configuration, StressMatrix};

/// Default relative gap separating two squared-length classes.
pub const DEFAULT_EDM_TOL: f64 = 1e-9;

/// Squared pairwise distances.
pub fn edm(config: &Configuration) -> DMatrix<f64> {
    let n = config.len();
    let p = config.coords();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (p.column(i) - p.column(j)).norm_squared()
        }
    })
}

/// Assignment of every complete-graph edge to one length class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressClassification {
    pub n: usize,
    /// Class of each edge in canonical order.
    pub class_of: Vec<usize>,
    /// Lexicographically first edge of each class.
    pub representatives: Vec<(usize, usize)>,
    /// Mean squared length of each class.
    pub squared_lengths: Vec<f64>,
    /// Edges per class, `c = Sᵀ1`.
    pub multiplicities: Vec<usize>,
}

impl StressClassification {
    pub fn class_count(&self) -> usize {
        self.representatives.len()
    }

    pub fn edge_count(&self) -> usize {
        self.class_of.len()
    }

    /// `M x S` 0/1 selection matrix.
    pub fn selection_matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.edge_count(), self.class_count());
        for (e, &c) in self.class_of.iter().enumerate() {
            s[(e, c)] = 1.0;
        }
        s
    }

    /// `w = S w_r`.
    pub fn expand(&self, reduced: &[f64]) -> Result<Vec<f64>> {
        if reduced.len() != self.class_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} class values for {} classes",
                reduced.len(),
                self.class_count()
            )));
        }
        Ok(self.class_of.iter().map(|&c| reduced[c]).collect())
    }

    /// Edges of each class in canonical order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count()];
        for (e, &c) in self.class_of.iter().enumerate() {
            out[c].push(e);
        }
        out
    }

    /// `S / M`.
    pub fn reduction_ratio(&self) -> f64 {
        self.class_count() as f64 / self.edge_count().max(1) as f64
    }
}

/// Groups edges by squared length: after sorting, a new class starts
/// wherever the gap to the previous value exceeds `tol_edm` times the larger
/// value. Classes are numbered by increasing length.
pub fn classify_edges(edm: &DMatrix<f64>, tol_edm: f64) -> Result<StressClassification> {
    if !(tol_edm > 0.0) {
        return Err(Error::InvalidInput("tol_edm must be positive".into()));
    }
    if !edm.is_square() {
        return Err(Error::DimensionMismatch("distance matrix must be square".into()));
    }
    let n = edm.nrows();
    let mut entries: Vec<(f64, usize, (usize, usize))> = Vec::with_capacity(complete_edge_count(n));
    for i in 0..n {
        for j in i + 1..n {
            entries.push((edm[(i, j)], edge_index(n, i, j), (i, j)));
        }
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut class_of = vec![0; entries.len()];
    let mut representatives = Vec::new();
    let mut sums = Vec::new();
    let mut multiplicities: Vec<usize> = Vec::new();
    let mut prev: Option<f64> = None;
    for &(len, e, edge) in &entries {
        let split = match prev {
            None => true,
            Some(p) => (len - p) > tol_edm * len.abs().max(p.abs()),
        };
        if split {
            representatives.push(edge);
            sums.push(0.0);
            multiplicities.push(0);
        }
        let c = representatives.len() - 1;
        class_of[e] = c;
        sums[c] += len;
        multiplicities[c] += 1;
        let rep = &mut representatives[c];
        if edge < *rep {
            *rep = edge;
        }
        prev = Some(len);
    }
    let squared_lengths = sums.iter().zip(&multiplicities).map(|(s, &m)| s / m as f64).collect();
    Ok(StressClassification {
        n,
        class_of,
        representatives,
        squared_lengths,
        multiplicities,
    })
}

/// Edge orbits of the `n`-gon under the cyclic rotation group, found by
/// applying every shift.
pub fn cyclic_edge_orbits(n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut seen = vec![false; complete_edge_count(n)];
    let mut orbits = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if seen[edge_index(n, i, j)] {
                continue;
            }
            let mut orbit = Vec::new();
            for t in 0..n {
                let (a, b) = ((i + t) % n, (j + t) % n);
                let e = (a.min(b), a.max(b));
                let k = edge_index(n, e.0, e.1);
                if !seen[k] {
                    seen[k] = true;
                    orbit.push(e);
                }
            }
            orbits.push(orbit);
        }
    }
    orbits
}

/// `|Omega - Pi Omega Piᵀ|_F / |Omega|_F`, with `(Pi Omega Piᵀ)_ij =
/// Omega_{perm[i], perm[j]}`; zero for a zero matrix.
pub fn check_permutation_invariance(omega: &StressMatrix, perm: &[usize]) -> Result<f64> {
    let moved = omega.permuted(perm)?;
    let norm = omega.matrix().norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok((omega.matrix() - moved.matrix()).norm() / norm)
}

/// Class-reduced version of the generic design program.
pub fn reduce_p3(
    classification: &StressClassification,
    inputs: &DesignInputs,
    params: &DesignParams,
) -> Result<ConicProblem> {
    if classification.n != inputs.n || classification.edge_count() != inputs.edge_count() {
        return Err(Error::DimensionMismatch(format!(
            "classification for {} nodes, program for {}",
            classification.n, inputs.n
        )));
    }
    let members = classification.members();
    let k = inputs.kernel.ncols();
    let n = inputs.n;
    let mut lmi_a = Vec::with_capacity(members.len());
    let mut lmi_b = Vec::with_capacity(members.len());
    let mut psi_r = Vec::with_capacity(members.len());
    for (s, edges) in members.iter().enumerate() {
        let mut a = DMatrix::zeros(k, k);
        let mut b = DMatrix::zeros(n, n);
        for &e in edges {
            let col = inputs.psi_matrix.column(e);
            a.ger(1.0, &col, &col, 1.0);
            let bc = inputs.incidence.column(e);
            b.ger(1.0, &bc, &bc, 1.0);
        }
        psi_r.push(edges.iter().map(|&e| inputs.psi[e]).sum::<f64>());
        lmi_a.push((s, a));
        lmi_b.push((s, b));
    }
    let selection = classification.selection_matrix();
    Ok(build_problem(
        ProgramParts {
            kind: ProblemKind::Reduced,
            linear: psi_r.iter().map(|p| -params.alpha * p).collect(),
            l1_weights: classification.multiplicities.iter().map(|&m| m as f64).collect(),
            lmi_a: LmiTerms::Dense(lmi_a),
            lmi_b: LmiTerms::Dense(lmi_b),
            lmi_a_dim: k,
            lmi_b_dim: n,
            equilibrium: &inputs.equilibrium * selection,
        },
        params,
    ))
}

/// A design obtained through edge classes.
#[derive(Clone, Debug)]
pub struct UsiDesignResult {
    pub design: DesignResult,
    pub classification: StressClassification,
    /// False when every edge formed its own class and the generic program
    /// was solved instead.
    pub reduced: bool,
    /// Stress value per class after pruning and polishing.
    pub class_weights: Vec<f64>,
}

impl UsiDesignResult {
    pub fn class_count(&self) -> usize {
        self.classification.class_count()
    }

    pub fn reduction_ratio(&self) -> f64 {
        self.classification.reduction_ratio()
    }
}

pub fn design_stress_usi(config: &Configuration, params: &DesignParams) -> Result<UsiDesignResult> {
    design_stress_usi_with(config, params, DEFAULT_EDM_TOL, &InteriorPoint::with_tolerance(params.tolerance))
}

pub fn design_stress_usi_with(
    config: &Configuration,
    params: &DesignParams,
    tol_edm: f64,
    solver: &dyn ConicSolver,
) -> Result<UsiDesignResult> {
    let started = Instant::now();
    params.validate().map_err(|e| e.at("assemble"))?;
    let classification = classify_edges(&edm(config), tol_edm).map_err(|e| e.at("classify"))?;
    if classification.class_count() == classification.edge_count() {
        log::info!("no repeated edge lengths; solving the generic program");
        let design = design_stress_with(config, params, solver)?;
        let class_weights = class_values(&classification, design.stress.weights());
        return Ok(UsiDesignResult {
            design,
            classification,
            reduced: false,
            class_weights,
        });
    }
    let inputs = DesignInputs::new(config)?;
    warn_below_critical(&inputs, params);
    let problem = reduce_p3(&classification, &inputs, params).map_err(|e| e.at("assemble"))?;
    let raw = solve_design(&problem, solver).map_err(|e| e.at("solve"))?;
    require_solution(&raw)?;
    let full = classification.expand(&raw.decision)?;
    let selection = classification.selection_matrix();
    let design = finalize(config, &inputs, params, &raw, full, Polish::Classes(&selection), started)?;
    let class_weights = class_values(&classification, design.stress.weights());
    Ok(UsiDesignResult {
        design,
        classification,
        reduced: true,
        class_weights,
    })
}

fn class_values(classification: &StressClassification, weights: &[f64]) -> Vec<f64> {
    classification
        .members()
        .iter()
        .map(|m| m.iter().map(|&e| weights[e]).sum::<f64>() / m.len() as f64)
        .collect()
}

/// Mean stress per class of an arbitrary complete-graph stress, with the
/// largest within-class spread.
pub fn class_spread(classification: &StressClassification, weights: &[f64]) -> (Vec<f64>, f64) {
    let means = class_values(classification, weights);
    let spread = classification
        .class_of
        .iter()
        .zip(weights)
        .map(|(&c, w)| (w - means[c]).abs())
        .fold(0.0, f64::max);
    (means, spread)
}

/// Expands reduced values into a dense vector (convenience for tests and
/// reporting).
pub fn expand_dense(classification: &StressClassification, reduced: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(classification.expand(reduced.as_slice())?))
}
