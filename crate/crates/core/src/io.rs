//! File formats: configuration and partition JSON, stress CSV (edge list and
//! dense), design summaries, trajectory CSV and SVG snapshots.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::{DesignParams, DesignResult};
use crate::conic::SolveStatus;
use crate::error::{Error, Result};
use crate::formation::{Configuration, StressMatrix, StressVector, Topology, VerificationReport};
use crate::multicluster::ClusterPartition;
use crate::sim::Trajectory;
use crate::usi::UsiDesignResult;

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub dim: usize,
    pub coords: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl ConfigFile {
    pub fn from_config(config: &Configuration) -> Self {
        Self {
            dim: config.dim(),
            coords: config.coords().column_iter().map(|c| c.iter().copied().collect()).collect(),
            labels: config.labels().map(<[String]>::to_vec),
        }
    }

    pub fn into_config(self) -> Result<Configuration> {
        if let Some(bad) = self.coords.iter().position(|p| p.len() != self.dim) {
            return Err(Error::DimensionMismatch(format!(
                "point {bad} has {} coordinates, expected {}",
                self.coords[bad].len(),
                self.dim
            )));
        }
        let c = Configuration::from_points(&self.coords)?;
        match self.labels {
            Some(l) => c.with_labels(l),
            None => Ok(c),
        }
    }
}

pub fn config_to_json(config: &Configuration) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ConfigFile::from_config(config))?)
}

pub fn config_from_json(text: &str) -> Result<Configuration> {
    serde_json::from_str::<ConfigFile>(text)?.into_config()
}

/// Edge list `i,j,weight` of the nonzero weights.
pub fn stress_to_csv(stress: &StressVector) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["i", "j", "weight"]).map_err(csv_err)?;
    for ((i, j), v) in stress.iter_edges().filter(|(_, v)| *v != 0.0) {
        w.write_record([i.to_string(), j.to_string(), v.to_string()]).map_err(csv_err)?;
    }
    finish(w)
}

/// Reads an edge list for `n` nodes; unlisted edges are zero.
pub fn stress_from_csv(text: &str, n: usize) -> Result<StressVector> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut edges = Vec::new();
    for rec in r.deserialize::<(usize, usize, f64)>() {
        let (i, j, v) = rec.map_err(csv_err)?;
        edges.push(((i, j), v));
    }
    StressVector::from_edges(n, &edges)
}

/// Dense matrix rows, no header.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in m.row_iter() {
        w.write_record(row.iter().map(f64::to_string)).map_err(csv_err)?;
    }
    finish(w)
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let rows = r
        .deserialize::<Vec<f64>>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(csv_err)?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn stress_matrix_from_csv(text: &str) -> Result<StressMatrix> {
    StressMatrix::from_matrix(matrix_from_csv(text)?)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub clusters: Vec<Vec<usize>>,
    #[serde(default)]
    pub leaders: Vec<usize>,
}

impl PartitionFile {
    pub fn partition(&self, n: usize) -> Result<ClusterPartition> {
        if let Some(&bad) = self.leaders.iter().find(|&&l| l >= n) {
            return Err(Error::InvalidInput(format!("leader {bad} out of range for {n} nodes")));
        }
        ClusterPartition::new(n, self.clusters.clone())
    }
}

pub fn partition_from_json(text: &str) -> Result<PartitionFile> {
    Ok(serde_json::from_str(text)?)
}

pub fn partition_to_json(p: &PartitionFile) -> Result<String> {
    Ok(serde_json::to_string_pretty(p)?)
}

/// Edge-class summary added to reduced designs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsiSummary {
    #[serde(rename = "S")]
    pub s: usize,
    /// Edges `(i, j)` of each class.
    pub classes: Vec<Vec<(usize, usize)>>,
    pub reduction_ratio: f64,
    pub class_weights: Vec<f64>,
    /// False when the configuration had no repeated lengths and the full
    /// program was solved instead.
    pub reduced: bool,
}

/// Serializable view of a design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub n: usize,
    pub dim: usize,
    pub status: SolveStatus,
    pub params: DesignParams,
    pub objective: f64,
    pub edge_count: usize,
    pub average_degree: f64,
    pub lambda_d2: f64,
    pub lambda_max: f64,
    pub efficiency: Option<f64>,
    pub critical_alpha: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub verification: VerificationReport,
    /// Nonzero weights as `(i, j, w)`.
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub usi: Option<UsiSummary>,
}

impl DesignSummary {
    pub fn from_design(d: &DesignResult) -> Self {
        Self {
            n: d.stress.node_count(),
            dim: d.spectral.dim,
            status: d.status,
            params: d.params,
            objective: d.objective,
            edge_count: d.edge_count(),
            average_degree: d.topology.average_degree(),
            lambda_d2: d.spectral.lambda_d2,
            lambda_max: d.spectral.lambda_max,
            efficiency: d.efficiency,
            critical_alpha: d.critical_alpha,
            iterations: d.iterations,
            wall_time_s: d.wall_time_s,
            verification: d.verification.clone(),
            edges: d
                .stress
                .iter_edges()
                .filter(|(_, w)| *w != 0.0)
                .map(|((i, j), w)| (i, j, w))
                .collect(),
            usi: None,
        }
    }

    pub fn from_usi(u: &UsiDesignResult) -> Self {
        let edges: Vec<(usize, usize)> = Topology::complete(u.classification.n).edges().to_vec();
        Self {
            usi: Some(UsiSummary {
                s: u.class_count(),
                classes: u
                    .classification
                    .members()
                    .into_iter()
                    .map(|m| m.into_iter().map(|e| edges[e]).collect())
                    .collect(),
                reduction_ratio: u.reduction_ratio(),
                class_weights: u.class_weights.clone(),
                reduced: u.reduced,
            }),
            ..Self::from_design(&u.design)
        }
    }

    pub fn stress(&self) -> Result<StressVector> {
        let edges: Vec<_> = self.edges.iter().map(|&(i, j, w)| ((i, j), w)).collect();
        StressVector::from_edges(self.n, &edges)
    }
}

pub fn summary_to_json(s: &DesignSummary) -> Result<String> {
    Ok(serde_json::to_string_pretty(s)?)
}

pub fn summary_from_json(text: &str) -> Result<DesignSummary> {
    Ok(serde_json::from_str(text)?)
}

const AXES: [&str; 3] = ["x", "y", "z"];

/// Columns `t, z_1x, z_1y, ..., error` plus `target_error` for leader runs
/// and `c_1 .. c_N` cluster choices for switching runs.
pub fn trajectory_to_csv(traj: &Trajectory) -> Result<String> {
    if traj.dim > 3 {
        return Err(Error::InvalidInput("trajectory CSV supports up to 3 dimensions".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    for i in 1..=traj.nodes {
        header.extend(AXES[..traj.dim].iter().map(|a| format!("z_{i}{a}")));
    }
    header.push("error".into());
    let has_target = !traj.target_errors.is_empty();
    let has_choices = !traj.choices.is_empty();
    if has_target {
        header.push("target_error".into());
    }
    if has_choices {
        header.extend((1..=traj.nodes).map(|i| format!("c_{i}")));
    }
    w.write_record(&header).map_err(csv_err)?;
    for k in 0..traj.sample_count() {
        let mut row = vec![traj.times[k].to_string()];
        row.extend(traj.states[k].iter().map(f64::to_string));
        row.push(traj.errors[k].to_string());
        if has_target {
            row.push(traj.target_errors[k].to_string());
        }
        if has_choices {
            row.extend(traj.choices[k].iter().map(usize::to_string));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

/// Inverse of [`trajectory_to_csv`]. The energy-increase count is recomputed
/// from the error column.
pub fn trajectory_from_csv(text: &str) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    let zcols: Vec<&str> = header.iter().filter(|h| h.starts_with("z_")).collect();
    let dim = AXES.iter().take_while(|a| zcols.iter().any(|h| h == &format!("z_1{a}"))).count();
    if dim == 0 || !zcols.len().is_multiple_of(dim) {
        return Err(Error::Parse("trajectory header has no position columns".into()));
    }
    let nodes = zcols.len() / dim;
    let has_target = header.iter().any(|h| h == "target_error");
    let has_choices = header.iter().any(|h| h.starts_with("c_"));
    let expected = 2 + dim * nodes + usize::from(has_target) + if has_choices { nodes } else { 0 };
    if header.len() != expected || header.get(0) != Some("t") {
        return Err(Error::Parse(format!("unexpected trajectory header with {} columns", header.len())));
    }
    let mut traj = Trajectory {
        dim,
        nodes,
        times: Vec::new(),
        states: Vec::new(),
        errors: Vec::new(),
        target_errors: Vec::new(),
        choices: Vec::new(),
        energy_increases: 0,
    };
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let f: Vec<&str> = rec.iter().collect();
        traj.times.push(num(f[0])?);
        traj.states.push(f[1..1 + dim * nodes].iter().map(|s| num(s)).collect::<Result<_>>()?);
        let mut at = 1 + dim * nodes;
        traj.errors.push(num(f[at])?);
        at += 1;
        if has_target {
            traj.target_errors.push(num(f[at])?);
            at += 1;
        }
        if has_choices {
            traj.choices.push(
                f[at..]
                    .iter()
                    .map(|s| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
                    .collect::<Result<_>>()?,
            );
        }
    }
    if !has_target {
        traj.energy_increases = traj.errors.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-12) + 1e-300).count();
    }
    Ok(traj)
}

/// Side-by-side snapshots at the requested times (nearest earlier sample);
/// 3D states are projected onto `x, y`. Edges are drawn when given.
pub fn trajectory_svg(traj: &Trajectory, times: &[f64], edges: Option<&Topology>) -> String {
    const PANEL: f64 = 240.0;
    const PAD: f64 = 16.0;
    let samples: Vec<usize> = if times.is_empty() {
        vec![0, traj.sample_count().saturating_sub(1)]
    } else {
        times.iter().map(|&t| traj.index_at(t)).collect()
    };
    let width = PANEL * samples.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{}" viewBox="0 0 {width} {}">"#,
        PANEL + 20.0,
        PANEL + 20.0
    );
    for (p, &k) in samples.iter().enumerate() {
        let z = traj.state(k);
        let (xs, ys): (Vec<f64>, Vec<f64>) = z
            .column_iter()
            .map(|c| (c[0], if traj.dim > 1 { c[1] } else { 0.0 }))
            .unzip();
        let (x0, x1) = bounds(&xs);
        let (y0, y1) = bounds(&ys);
        let span = (x1 - x0).max(y1 - y0).max(1e-12);
        let s = (PANEL - 2.0 * PAD) / span;
        let ox = p as f64 * PANEL + PAD;
        let px = |i: usize| ox + (xs[i] - x0) * s;
        let py = |i: usize| PANEL - PAD - (ys[i] - y0) * s;
        let _ = writeln!(out, r#"<g id="t{}">"#, traj.times[k]);
        if let Some(top) = edges {
            for &(i, j) in top.edges() {
                let _ = writeln!(
                    out,
                    r##"<polyline points="{:.2},{:.2} {:.2},{:.2}" stroke="#888" stroke-width="0.6" fill="none"/>"##,
                    px(i),
                    py(i),
                    px(j),
                    py(j)
                );
            }
        }
        for i in 0..traj.nodes {
            let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f4e9c"/>"##, px(i), py(i));
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" font-family="sans-serif">t = {:.3}</text>"#,
            ox,
            PANEL + 12.0,
            traj.times[k]
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

fn bounds(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}
