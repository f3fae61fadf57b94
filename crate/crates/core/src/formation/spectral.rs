use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::Configuration;
use super::graph::StressMatrix;
use crate::linalg;
use crate::error::{Error, Result};

/// Scale-relative thresholds for the stabilizability check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `lambda_1 >= -psd_rel * lambda_N`.
    pub psd_rel: f64,
    /// Eigenvalues above `rank_rel * lambda_N` count towards the rank.
    pub rank_rel: f64,
    /// `|Omega Pbar^T|_F <= eq_rel * |Omega|_F * |Pbar|_F`.
    pub eq_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            psd_rel: 1e-7,
            rank_rel: 1e-6,
            eq_rel: 1e-8,
        }
    }
}

/// Sorted spectrum of a stress matrix with the derived quantities used by the
/// design metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub dim: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `(D+2)`-th smallest eigenvalue (0 when `N < D+2`).
    pub lambda_d2: f64,
    pub lambda_max: f64,
    pub rank: usize,
    pub psd: bool,
    /// `lambda_max` over the smallest eigenvalue counted in the rank; infinite
    /// when the rank is zero.
    pub condition_number: f64,
}

impl SpectralReport {
    pub fn nullity(&self) -> usize {
        self.eigenvalues.len() - self.rank
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

/// Eigen-decomposition of the symmetrized matrix, eigenvalues ascending and
/// eigenvectors as matching columns.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    if let Ok((values, vectors)) = linalg::symmetric_eigen(&sym) {
        return (values.iter().copied().collect(), vectors);
    }
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

fn spectral_scale(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Spectral summary using the default rank/PSD tolerances.
pub fn spectral_report(omega: &DMatrix<f64>, dim: usize) -> Result<SpectralReport> {
    report_with(omega, dim, &Tolerances::default())
}

pub(crate) fn report_with(omega: &DMatrix<f64>, dim: usize, tol: &Tolerances) -> Result<SpectralReport> {
    if !omega.is_square() {
        return Err(Error::DimensionMismatch("stress matrix must be square".into()));
    }
    let scale_in = omega.amax();
    if (omega - omega.transpose()).amax() > 1e-10 * scale_in.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput("matrix is not symmetric".into()));
    }
    let (values, _) = sorted_eigen(omega);
    Ok(summarize(values, dim, tol))
}

pub(crate) fn summarize(values: Vec<f64>, dim: usize, tol: &Tolerances) -> SpectralReport {
    let scale = spectral_scale(&values);
    let rank_tol = tol.rank_rel * scale;
    let rank = values.iter().filter(|&&v| v > rank_tol).count();
    let lambda_max = values.last().copied().unwrap_or(0.0);
    let lambda_min = values.first().copied().unwrap_or(0.0);
    let lambda_d2 = values.get(dim + 1).copied().unwrap_or(0.0);
    let smallest_nonzero = values.iter().copied().find(|&v| v > rank_tol);
    let condition_number = match smallest_nonzero {
        Some(v) => lambda_max / v,
        None => f64::INFINITY,
    };
    SpectralReport {
        dim,
        psd: lambda_min >= -tol.psd_rel * lambda_max.max(0.0),
        eigenvalues: values,
        lambda_d2,
        lambda_max,
        rank,
        condition_number,
    }
}

/// Outcome of the stabilizability test: PSD, rank `N-D-1`, and `Omega Pbar^T = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub psd: bool,
    pub rank_ok: bool,
    pub equilibrium_ok: bool,
    pub overall: bool,
    pub rank: usize,
    pub expected_rank: usize,
    pub lambda_min: f64,
    pub lambda_d2: f64,
    pub lambda_max: f64,
    /// `|Omega Pbar^T|_F / (|Omega|_F |Pbar|_F)`.
    pub equilibrium_residual: f64,
    /// The configuration itself does not affinely span its space.
    pub degenerate_configuration: bool,
}

pub fn verify_stabilizable(
    omega: &StressMatrix,
    config: &Configuration,
    tol: &Tolerances,
) -> Result<VerificationReport> {
    let n = config.len();
    if omega.node_count() != n {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} stress for {n} nodes",
            omega.node_count(),
            omega.node_count()
        )));
    }
    let dim = config.dim();
    let report = report_with(omega.matrix(), dim, tol)?;
    let aug = config.augmented();
    let residual = (omega.matrix() * aug.transpose()).norm();
    let denom = omega.matrix().norm() * aug.norm();
    let relative = if denom > 0.0 { residual / denom } else { 0.0 };
    let expected_rank = n - dim - 1;
    let degenerate = !config.is_affinely_spanning();
    if degenerate {
        log::warn!("verifying a stress on an affinely degenerate configuration");
    }
    let psd = report.psd;
    let rank_ok = report.rank == expected_rank;
    let equilibrium_ok = relative <= tol.eq_rel;
    Ok(VerificationReport {
        psd,
        rank_ok,
        equilibrium_ok,
        overall: psd && rank_ok && equilibrium_ok,
        rank: report.rank,
        expected_rank,
        lambda_min: report.lambda_min(),
        lambda_d2: report.lambda_d2,
        lambda_max: report.lambda_max,
        equilibrium_residual: relative,
        degenerate_configuration: degenerate,
    })
}

/// `eta = lambda_{D+2} N^2 / (lambda_N M)`.
pub fn spectral_efficiency(report: &SpectralReport, edges: usize, n: usize) -> Result<f64> {
    if edges == 0 {
        return Err(Error::UndefinedMetric("spectral efficiency with zero edges".into()));
    }
    if report.lambda_max <= f64::EPSILON {
        return Err(Error::UndefinedMetric(
            "spectral efficiency with non-positive lambda_max".into(),
        ));
    }
    let n = n as f64;
    Ok(report.lambda_d2 * n * n / (report.lambda_max * edges as f64))
}
