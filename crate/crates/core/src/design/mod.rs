//! Sparse, fast-converging stress design.
//!
//! The design program over the complete-graph stress vector `w` is
//!
//! ```text
//! minimize    |w|_1 - alpha psiᵀw
//! subject to  Psi diag(w) Psiᵀ - gamma I ⪰ 0
//!             beta I - B diag(w) Bᵀ ⪰ 0
//!             E w = 0
//! ```
//!
//! with `Psi = QᵀB`, `Q` an orthonormal basis of `ker Pbar`, and `E w` the
//! stacked equilibrium residual `B diag(w) Bᵀ Pbarᵀ`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{
    AffineRow, ConicProgram, ConicSolver, Equalities, InteriorPoint, LmiBlock, LmiTerms, SolveStatus,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::formation::{
    assemble_stress, complete_incidence, extract_topology, kernel_basis, spectral_efficiency,
    spectral_report, verify_stabilizable, Configuration, SpectralReport, StressMatrix, StressVector,
    Tolerances, Topology, VerificationReport,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignParams {
    /// Weight of the trace reward; larger values trade sparsity for speed.
    pub alpha: f64,
    /// Cap on the largest eigenvalue.
    pub beta: f64,
    /// Floor on the smallest nonzero eigenvalue.
    pub gamma: f64,
    /// Relative threshold below which edges are dropped.
    pub eps_rel: f64,
    /// Interior-point feasibility and gap tolerance.
    pub tolerance: f64,
    /// Also impose `Omega ⪰ 0` explicitly (debugging aid; implied otherwise).
    pub two_sided: bool,
}

impl Default for DesignParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 1.0,
            gamma: 0.1,
            eps_rel: 1e-6,
            tolerance: 1e-8,
            two_sided: false,
        }
    }
}

impl DesignParams {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    /// Checks signs and finiteness. `beta <= gamma` is accepted (the program
    /// is then infeasible and the solver reports so) but logged.
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.alpha) || !positive(self.beta) || !positive(self.gamma) {
            return Err(Error::InvalidInput("alpha, beta and gamma must be positive".into()));
        }
        if !(self.eps_rel >= 0.0) || !self.eps_rel.is_finite() || !positive(self.tolerance) {
            return Err(Error::InvalidInput("eps_rel must be >= 0 and tolerance > 0".into()));
        }
        if self.beta <= self.gamma {
            log::warn!("beta {} <= gamma {}: the design program is infeasible", self.beta, self.gamma);
        }
        Ok(())
    }
}

/// `E` with row `i*(D+1)+k` holding the `k`-th coordinate of node `i`'s
/// equilibrium residual, so `E w = vec((B diag(w) Bᵀ Pbarᵀ)ᵀ)`.
pub fn build_nullspace_operator(aug: &DMatrix<f64>, incidence: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (d1, n) = aug.shape();
    if incidence.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "augmented configuration has {n} columns, incidence {} rows",
            incidence.nrows()
        )));
    }
    let m = incidence.ncols();
    let mut e = DMatrix::zeros(n * d1, m);
    for col in 0..m {
        let diff = aug * incidence.column(col);
        for i in 0..n {
            let b = incidence[(i, col)];
            if b != 0.0 {
                for k in 0..d1 {
                    e[(i * d1 + k, col)] = b * diff[k];
                }
            }
        }
    }
    Ok(e)
}

/// `Psi = Qᵀ B`.
pub fn trace_operator(q: &DMatrix<f64>, incidence: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if q.nrows() != incidence.nrows() {
        return Err(Error::DimensionMismatch("kernel basis and incidence row counts differ".into()));
    }
    Ok(q.transpose() * incidence)
}

/// `psi_e = |Psi column e|^2`, so that `psiᵀw = tr(Qᵀ Omega Q)`.
pub fn trace_weights(q: &DMatrix<f64>, incidence: &DMatrix<f64>) -> Result<DVector<f64>> {
    let psi = trace_operator(q, incidence)?;
    Ok(DVector::from_iterator(
        psi.ncols(),
        psi.column_iter().map(|c| c.norm_squared()),
    ))
}

/// `alpha* = 1 / max psi`.
pub fn critical_alpha(psi: &DVector<f64>) -> Result<f64> {
    let max = psi.iter().fold(0.0_f64, |m, &v| m.max(v));
    if !(max > 0.0) {
        return Err(Error::DegenerateConfiguration { rank: 0, required: 1 });
    }
    Ok(1.0 / max)
}

/// Matrices shared by the generic and the symmetry-reduced programs.
#[derive(Clone, Debug)]
pub struct DesignInputs {
    pub dim: usize,
    pub n: usize,
    pub aug: DMatrix<f64>,
    pub kernel: DMatrix<f64>,
    pub incidence: DMatrix<f64>,
    /// `Psi = Qᵀ B`.
    pub psi_matrix: DMatrix<f64>,
    pub psi: DVector<f64>,
    pub equilibrium: DMatrix<f64>,
}

impl DesignInputs {
    pub fn new(config: &Configuration) -> Result<Self> {
        config.require_design_valid().map_err(|e| e.at("kernel"))?;
        let aug = config.augmented();
        let kernel = kernel_basis(&aug).map_err(|e| e.at("kernel"))?;
        let incidence = complete_incidence(config.len()).map_err(|e| e.at("kernel"))?;
        let equilibrium = build_nullspace_operator(&aug, &incidence).map_err(|e| e.at("nullspace"))?;
        let psi_matrix = trace_operator(&kernel, &incidence).map_err(|e| e.at("trace-weights"))?;
        let psi = DVector::from_iterator(
            psi_matrix.ncols(),
            psi_matrix.column_iter().map(|c| c.norm_squared()),
        );
        Ok(Self {
            dim: config.dim(),
            n: config.len(),
            aug,
            kernel,
            incidence,
            psi_matrix,
            psi,
            equilibrium,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.incidence.ncols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// One variable per complete-graph edge.
    Generic,
    /// One variable per edge class.
    Reduced,
}

/// A design program in conic form.
///
/// Variable layout: `x[0..k]` are the stress variables (edges or classes),
/// `x[k..2k]` the epigraph variables `t >= |w|`.
#[derive(Clone, Debug)]
pub struct ConicProblem {
    pub kind: ProblemKind,
    pub program: ConicProgram,
    /// `k`.
    pub decision_count: usize,
    /// Objective weights of the epigraph variables (all ones for the generic
    /// program, class multiplicities for the reduced one).
    pub l1_weights: Vec<f64>,
    pub lmi_a_dim: usize,
    pub lmi_b_dim: usize,
}

impl ConicProblem {
    pub fn variable_count(&self) -> usize {
        self.program.num_vars
    }

    /// Evaluates every constraint at a stress vector `w` (epigraph at `|w|`).
    pub fn violation(&self, w: &[f64]) -> crate::conic::Violation {
        let mut x = w.to_vec();
        x.extend(w.iter().map(|v| v.abs()));
        self.program.violation(&x)
    }
}

pub(crate) struct ProgramParts {
    pub kind: ProblemKind,
    /// Linear coefficient of each stress variable (`-alpha psi`).
    pub linear: Vec<f64>,
    pub l1_weights: Vec<f64>,
    pub lmi_a: LmiTerms,
    pub lmi_b: LmiTerms,
    pub lmi_a_dim: usize,
    pub lmi_b_dim: usize,
    pub equilibrium: DMatrix<f64>,
}

pub(crate) fn build_problem(parts: ProgramParts, params: &DesignParams) -> ConicProblem {
    let k = parts.linear.len();
    let mut objective = parts.linear.clone();
    objective.extend_from_slice(&parts.l1_weights);
    let mut linear = Vec::with_capacity(2 * k);
    for i in 0..k {
        linear.push(AffineRow {
            constant: 0.0,
            coeffs: vec![(k + i, 1.0), (i, -1.0)],
        });
        linear.push(AffineRow {
            constant: 0.0,
            coeffs: vec![(k + i, 1.0), (i, 1.0)],
        });
    }
    let rows = parts.equilibrium.nrows();
    let mut eq = DMatrix::zeros(rows, 2 * k);
    eq.view_mut((0, 0), (rows, k)).copy_from(&parts.equilibrium);
    let negated = |terms: &LmiTerms| match terms {
        LmiTerms::LowRank {
            factors,
            scales,
            vars,
        } => LmiTerms::LowRank {
            factors: factors.clone(),
            scales: scales.iter().map(|s| -s).collect(),
            vars: vars.clone(),
        },
        LmiTerms::Dense(m) => LmiTerms::Dense(m.iter().map(|(v, f)| (*v, -f)).collect()),
    };
    let mut lmis = vec![
        LmiBlock {
            constant: DMatrix::identity(parts.lmi_a_dim, parts.lmi_a_dim) * -params.gamma,
            terms: parts.lmi_a,
        },
        LmiBlock {
            constant: DMatrix::identity(parts.lmi_b_dim, parts.lmi_b_dim) * params.beta,
            terms: negated(&parts.lmi_b),
        },
    ];
    if params.two_sided {
        lmis.push(LmiBlock {
            constant: DMatrix::zeros(parts.lmi_b_dim, parts.lmi_b_dim),
            terms: parts.lmi_b,
        });
    }
    ConicProblem {
        kind: parts.kind,
        program: ConicProgram {
            num_vars: 2 * k,
            objective,
            equalities: Some(Equalities {
                matrix: eq,
                rhs: DVector::zeros(rows),
            }),
            linear,
            lmis,
        },
        decision_count: k,
        l1_weights: parts.l1_weights,
        lmi_a_dim: parts.lmi_a_dim,
        lmi_b_dim: parts.lmi_b_dim,
    }
}

pub(crate) fn generic_problem(inputs: &DesignInputs, params: &DesignParams) -> ConicProblem {
    let m = inputs.edge_count();
    let vars: Vec<usize> = (0..m).collect();
    build_problem(
        ProgramParts {
            kind: ProblemKind::Generic,
            linear: inputs.psi.iter().map(|p| -params.alpha * p).collect(),
            l1_weights: vec![1.0; m],
            lmi_a: LmiTerms::LowRank {
                factors: inputs.psi_matrix.clone(),
                scales: vec![1.0; m],
                vars: vars.clone(),
            },
            lmi_b: LmiTerms::LowRank {
                factors: inputs.incidence.clone(),
                scales: vec![1.0; m],
                vars,
            },
            lmi_a_dim: inputs.kernel.ncols(),
            lmi_b_dim: inputs.n,
            equilibrium: inputs.equilibrium.clone(),
        },
        params,
    )
}

/// Builds the generic design program for `config`.
pub fn assemble_p2(config: &Configuration, params: &DesignParams) -> Result<ConicProblem> {
    params.validate().map_err(|e| e.at("assemble"))?;
    let inputs = DesignInputs::new(config)?;
    Ok(generic_problem(&inputs, params))
}

/// Raw solver output for a design program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSolution {
    pub status: SolveStatus,
    /// Stress variables (edges or classes), epigraph part dropped.
    pub decision: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub wall_time_s: f64,
}

/// Runs `solver` on `problem`; infeasible or unbounded outcomes are reported
/// through `status`, not as errors.
pub fn solve_design(problem: &ConicProblem, solver: &dyn ConicSolver) -> Result<RawSolution> {
    let start = Instant::now();
    let sol = solver.solve(&problem.program)?;
    let wall = start.elapsed().as_secs_f64();
    Ok(RawSolution {
        status: sol.status,
        decision: sol.x[..problem.decision_count].to_vec(),
        objective: sol.primal_objective,
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        gap: sol.gap,
        wall_time_s: wall,
    })
}

pub(crate) fn require_solution(raw: &RawSolution) -> Result<()> {
    if raw.status.has_solution() {
        Ok(())
    } else {
        Err(Error::Solver(format!(
            "status {:?} after {} iterations (primal residual {:.2e}, dual residual {:.2e}, gap {:.2e})",
            raw.status, raw.iterations, raw.primal_residual, raw.dual_residual, raw.gap
        ))
        .at("solve"))
    }
}

/// Orthogonal projection of `v` onto `ker a`.
pub(crate) fn project_onto_kernel(a: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return v.clone();
    }
    let Ok(svd) = linalg::thin_svd(a) else {
        return v.clone();
    };
    let smax = svd.s.max();
    let mut out = v.clone();
    for (k, &s) in svd.s.iter().enumerate() {
        if s > 1e-10 * smax {
            let col = svd.v.column(k);
            let c = col.dot(v);
            out.axpy(-c, &col, 1.0);
        }
    }
    out
}

/// A verified stress design.
#[derive(Clone, Debug)]
pub struct DesignResult {
    /// Pruned and equilibrium-polished stress.
    pub stress: StressVector,
    pub matrix: StressMatrix,
    pub topology: Topology,
    pub spectral: SpectralReport,
    pub verification: VerificationReport,
    pub status: SolveStatus,
    /// `sum c|w| - alpha psiᵀw` at the returned stress.
    pub objective: f64,
    /// Objective reported by the solver before pruning.
    pub solver_objective: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub critical_alpha: f64,
    pub efficiency: Option<f64>,
    pub params: DesignParams,
}

impl DesignResult {
    pub fn edge_count(&self) -> usize {
        self.topology.edge_count()
    }

    pub fn lambda_d2(&self) -> f64 {
        self.spectral.lambda_d2
    }
}

/// Design objective `|w|_1 - alpha psiᵀw` of a complete-graph stress.
pub fn design_objective(psi: &DVector<f64>, weights: &[f64], alpha: f64) -> f64 {
    weights
        .iter()
        .zip(psi.iter())
        .map(|(w, p)| w.abs() - alpha * p * w)
        .sum()
}

/// How the kept stresses are moved back onto the equilibrium subspace
/// after pruning.
pub(crate) enum Polish<'a> {
    /// Project each kept edge independently.
    Edges,
    /// Project within the span of the given edge-class indicator columns.
    Classes(&'a DMatrix<f64>),
}

pub(crate) fn finalize(
    config: &Configuration,
    inputs: &DesignInputs,
    params: &DesignParams,
    raw: &RawSolution,
    full: Vec<f64>,
    polish: Polish<'_>,
    started: Instant,
) -> Result<DesignResult> {
    let n = inputs.n;
    let sv = StressVector::new(n, full).map_err(|e| e.at("extract"))?;
    let extraction = extract_topology(&sv, params.eps_rel).map_err(|e| e.at("extract"))?;
    if extraction.empty {
        return Err(Error::Verification("no edge survived extraction".into()).at("extract"));
    }
    let kept: Vec<usize> = extraction
        .pruned
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(k, _)| k)
        .collect();
    let mut weights = extraction.pruned.weights().to_vec();
    match polish {
        Polish::Edges => {
            let a = inputs.equilibrium.select_columns(&kept);
            let v = DVector::from_iterator(kept.len(), kept.iter().map(|&k| weights[k]));
            let p = project_onto_kernel(&a, &v);
            for (i, &k) in kept.iter().enumerate() {
                weights[k] = p[i];
            }
        }
        Polish::Classes(selection) => {
            let classes: Vec<usize> = (0..selection.ncols())
                .filter(|&c| kept.iter().any(|&k| selection[(k, c)] != 0.0))
                .collect();
            let sel = selection.select_columns(&classes);
            let a = &inputs.equilibrium * &sel;
            let counts = sel.row_sum().transpose();
            let reps: Vec<f64> = (0..classes.len())
                .map(|c| {
                    let members: f64 = (0..sel.nrows()).filter(|&k| sel[(k, c)] != 0.0).map(|k| weights[k]).sum();
                    members / counts[c].max(1.0)
                })
                .collect();
            let p = project_onto_kernel(&a, &DVector::from_vec(reps));
            let expanded = &sel * p;
            for &k in &kept {
                weights[k] = expanded[k];
            }
        }
    }
    let stress = StressVector::new(n, weights).map_err(|e| e.at("extract"))?;
    let matrix = assemble_stress(&inputs.incidence, stress.weights()).map_err(|e| e.at("verify"))?;
    let spectral = spectral_report(matrix.matrix(), inputs.dim).map_err(|e| e.at("verify"))?;
    let verification =
        verify_stabilizable(&matrix, config, &Tolerances::default()).map_err(|e| e.at("verify"))?;
    if !verification.overall {
        return Err(Error::Verification(format!(
            "psd {} (lambda_1 {:.3e}), rank {} of {}, equilibrium residual {:.3e}",
            verification.psd,
            verification.lambda_min,
            verification.rank,
            verification.expected_rank,
            verification.equilibrium_residual
        ))
        .at("verify"));
    }
    let topology = extraction.topology;
    let efficiency = spectral_efficiency(&spectral, topology.edge_count(), n).ok();
    Ok(DesignResult {
        objective: design_objective(&inputs.psi, stress.weights(), params.alpha),
        stress,
        matrix,
        topology,
        spectral,
        verification,
        status: raw.status,
        solver_objective: raw.objective,
        iterations: raw.iterations,
        wall_time_s: started.elapsed().as_secs_f64(),
        critical_alpha: critical_alpha(&inputs.psi).unwrap_or(f64::NAN),
        efficiency,
        params: *params,
    })
}

pub(crate) fn warn_below_critical(inputs: &DesignInputs, params: &DesignParams) {
    if let Ok(a) = critical_alpha(&inputs.psi) {
        if params.alpha < a {
            log::warn!(
                "alpha {} is below the critical value {a:.4}; sparsity is not guaranteed",
                params.alpha
            );
        }
    }
}

/// Full pipeline with the default interior-point backend.
pub fn design_stress(config: &Configuration, params: &DesignParams) -> Result<DesignResult> {
    design_stress_with(config, params, &InteriorPoint::with_tolerance(params.tolerance))
}

pub fn design_stress_with(
    config: &Configuration,
    params: &DesignParams,
    solver: &dyn ConicSolver,
) -> Result<DesignResult> {
    let started = Instant::now();
    params.validate().map_err(|e| e.at("assemble"))?;
    let inputs = DesignInputs::new(config)?;
    warn_below_critical(&inputs, params);
    let problem = generic_problem(&inputs, params);
    let raw = solve_design(&problem, solver).map_err(|e| e.at("solve"))?;
    require_solution(&raw)?;
    finalize(config, &inputs, params, &raw, raw.decision.clone(), Polish::Edges, started)
}

#[cfg(test)]
mod tests;
