//! Linear conic programs over the nonnegative orthant and PSD cones, and a
//! structured primal-dual interior-point solver for them.
//!
//! A program is
//!
//! ```text
//! minimize    cᵀx
//! subject to  A x = b
//!             a_k + Σ_i g_ki x_i ≥ 0            (affine rows)
//!             F_0 + Σ_i x_i F_i ⪰ 0             (matrix inequalities)
//! ```
//!
//! Matrix-inequality coefficients are either rank-one factors or dense
//! symmetric matrices; the solver exploits the former when forming its
//! normal equations.

mod cone;
mod ipm;
mod kkt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ipm::InteriorPoint;

/// `constant + Σ coeff·x[var] ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineRow {
    pub constant: f64,
    pub coeffs: Vec<(usize, f64)>,
}

impl AffineRow {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(i, a)| a * x[i]).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LmiTerms {
    /// `Σ_j x[vars[j]] · scales[j] · u_j u_jᵀ`, `u_j` the `j`-th column of `factors`.
    LowRank {
        factors: DMatrix<f64>,
        scales: Vec<f64>,
        vars: Vec<usize>,
    },
    /// `Σ x[var] · F` with symmetric `F`.
    Dense(Vec<(usize, DMatrix<f64>)>),
}

/// `constant + terms(x) ⪰ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LmiBlock {
    pub constant: DMatrix<f64>,
    pub terms: LmiTerms,
}

impl LmiBlock {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    /// The linear part `Σ x_i F_i`.
    pub fn linear_part(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.terms {
            LmiTerms::LowRank {
                factors,
                scales,
                vars,
            } => {
                let mut scaled = factors.clone();
                for (j, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= scales[j] * x[vars[j]];
                }
                &scaled * factors.transpose()
            }
            LmiTerms::Dense(mats) => {
                let n = self.dim();
                let mut out = DMatrix::zeros(n, n);
                for (var, f) in mats {
                    out += f * x[*var];
                }
                out
            }
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> DMatrix<f64> {
        &self.constant + self.linear_part(x)
    }

    /// Adds `<F_i, z>` into `out[i]`.
    pub(crate) fn adjoint_into(&self, z: &DMatrix<f64>, out: &mut [f64]) {
        match &self.terms {
            LmiTerms::LowRank {
                factors,
                scales,
                vars,
            } => {
                let zu = z * factors;
                for j in 0..factors.ncols() {
                    out[vars[j]] += scales[j] * factors.column(j).dot(&zu.column(j));
                }
            }
            LmiTerms::Dense(mats) => {
                for (var, f) in mats {
                    out[*var] += f.dot(z);
                }
            }
        }
    }

    fn vars(&self) -> Vec<usize> {
        match &self.terms {
            LmiTerms::LowRank { vars, .. } => vars.clone(),
            LmiTerms::Dense(mats) => mats.iter().map(|(v, _)| *v).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equalities {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub equalities: Option<Equalities>,
    pub linear: Vec<AffineRow>,
    pub lmis: Vec<LmiBlock>,
}

/// Constraint violations of a candidate point, all nonnegative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// `|Ax - b|_2`.
    pub equality: f64,
    /// Largest negative part over affine rows.
    pub linear: f64,
    /// Largest negative eigenvalue over matrix blocks.
    pub psd: f64,
}

impl ConicProgram {
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars;
        if n == 0 {
            return Err(Error::InvalidInput("program has no variables".into()));
        }
        if self.objective.len() != n || self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("objective must be a finite length-n vector".into()));
        }
        let mut used = vec![false; n];
        if let Some(eq) = &self.equalities {
            if eq.matrix.ncols() != n || eq.matrix.nrows() != eq.rhs.len() {
                return Err(Error::DimensionMismatch("equality block".into()));
            }
        }
        for row in &self.linear {
            for &(i, _) in &row.coeffs {
                if i >= n {
                    return Err(Error::InvalidInput(format!("affine row refers to variable {i}")));
                }
                used[i] = true;
            }
        }
        for block in &self.lmis {
            let d = block.dim();
            if !block.constant.is_square() || d == 0 {
                return Err(Error::DimensionMismatch("matrix block constant must be square".into()));
            }
            match &block.terms {
                LmiTerms::LowRank {
                    factors,
                    scales,
                    vars,
                } => {
                    if factors.nrows() != d || factors.ncols() != scales.len() || scales.len() != vars.len() {
                        return Err(Error::DimensionMismatch("low-rank block factors".into()));
                    }
                }
                LmiTerms::Dense(mats) => {
                    if mats.iter().any(|(_, f)| f.nrows() != d || f.ncols() != d) {
                        return Err(Error::DimensionMismatch("dense block coefficient".into()));
                    }
                }
            }
            for v in block.vars() {
                if v >= n {
                    return Err(Error::InvalidInput(format!("matrix block refers to variable {v}")));
                }
                used[v] = true;
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::InvalidInput(format!(
                "variable {i} appears in no cone constraint"
            )));
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn violation(&self, x: &[f64]) -> Violation {
        let equality = match &self.equalities {
            Some(eq) => (&eq.matrix * DVector::from_column_slice(x) - &eq.rhs).norm(),
            None => 0.0,
        };
        let linear = self
            .linear
            .iter()
            .map(|r| (-r.evaluate(x)).max(0.0))
            .fold(0.0, f64::max);
        let psd = self
            .lmis
            .iter()
            .map(|b| {
                let m = b.evaluate(x);
                let m = (&m + m.transpose()) * 0.5;
                (-m.symmetric_eigenvalues().min()).max(0.0)
            })
            .fold(0.0, f64::max);
        Violation {
            equality,
            linear,
            psd,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Stopped short of the requested tolerance but within a looser one.
    AlmostOptimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NumericalFailure,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::AlmostOptimal)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Multipliers of the original equality rows.
    pub equality_duals: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

/// A backend able to solve [`ConicProgram`]s.
pub trait ConicSolver: Send + Sync {
    fn solve(&self, program: &ConicProgram) -> Result<ConicSolution>;
}
