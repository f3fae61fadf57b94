//! Benchmark suites: every (case, parameter set) is designed `repeats` times
//! and summarized into one row.

use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stresslab::design::{design_stress, DesignParams};
use stresslab::formation::{spectral_efficiency, Configuration};
use stresslab::generate::{generate_segmented, GeneratorSpec};
use stresslab::multicluster::{
    chain_by_first_axis, design_clusters, design_clusters_shared, ensemble_psd, ensemble_stress, split_by_first_axis,
    ClusterPartition,
};
use stresslab::usi::design_stress_usi;
use stresslab::{Error, Result};

/// How a case is split into clusters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PartitionSpec {
    /// Explicit node lists.
    Clusters { clusters: Vec<Vec<usize>> },
    /// Two clusters sharing `bridges` nodes around the median first coordinate.
    Split { bridges: usize },
    /// `clusters` windows of `size` nodes along the first coordinate.
    Chain { clusters: usize, size: usize },
    /// The generator's own segments; `shared` designs one segment and reuses
    /// it for the affine copies.
    Segments {
        #[serde(default)]
        shared: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchCase {
    pub name: String,
    pub generator: GeneratorSpec,
    #[serde(default = "default_params")]
    pub params: Vec<DesignParams>,
    #[serde(default)]
    pub partition: Option<PartitionSpec>,
    #[serde(default)]
    pub usi: bool,
    #[serde(default = "one")]
    pub repeats: usize,
    /// Generator seeds for random cases, one per repeat; `seed + r` of the
    /// generator otherwise.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

fn default_params() -> Vec<DesignParams> {
    vec![DesignParams::default()]
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSuite {
    pub cases: Vec<BenchCase>,
}

impl BenchmarkSuite {
    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for c in &self.cases {
            if !names.insert(&c.name) {
                return Err(Error::InvalidInput(format!("duplicate case name {:?}", c.name)));
            }
            if c.repeats == 0 {
                return Err(Error::InvalidInput(format!("case {:?}: repeats must be >= 1", c.name)));
            }
            if c.params.is_empty() {
                return Err(Error::InvalidInput(format!("case {:?}: empty parameter list", c.name)));
            }
            for p in &c.params {
                p.validate().map_err(|e| Error::InvalidInput(format!("case {:?}: {e}", c.name)))?;
            }
            if let Some(s) = &c.seeds {
                if s.len() != c.repeats {
                    return Err(Error::InvalidInput(format!(
                        "case {:?}: {} seeds for {} repeats",
                        c.name,
                        s.len(),
                        c.repeats
                    )));
                }
            }
        }
        Ok(())
    }
}

impl BenchCase {
    /// Generator seed of repeat `r`, if the generator is random.
    pub fn seed(&self, r: usize) -> Option<u64> {
        match &self.generator {
            GeneratorSpec::Random { seed, .. } => {
                Some(self.seeds.as_ref().map_or(seed + r as u64, |s| s[r]))
            }
            _ => None,
        }
    }

    fn generator_for(&self, r: usize) -> GeneratorSpec {
        match (&self.generator, self.seed(r)) {
            (GeneratorSpec::Random { n, dim, .. }, Some(seed)) => GeneratorSpec::Random { n: *n, dim: *dim, seed },
            (g, _) => g.clone(),
        }
    }
}

/// One design run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub case: String,
    pub param_index: usize,
    pub alpha: f64,
    pub repeat: usize,
    pub seed: Option<u64>,
    pub n: usize,
    pub verified: bool,
    pub runtime_s: Option<f64>,
    pub edges: Option<usize>,
    pub average_degree: Option<f64>,
    pub lambda_d2: Option<f64>,
    pub lambda_max: Option<f64>,
    pub efficiency: Option<f64>,
    pub error: Option<String>,
}

struct Measured {
    n: usize,
    runtime: f64,
    edges: usize,
    lambda_d2: f64,
    lambda_max: f64,
    efficiency: Option<f64>,
    verified: bool,
}

fn partition_for(spec: &PartitionSpec, config: &Configuration, segments: &[Vec<usize>]) -> Result<ClusterPartition> {
    match spec {
        PartitionSpec::Clusters { clusters } => ClusterPartition::new(config.len(), clusters.clone()),
        PartitionSpec::Split { bridges } => split_by_first_axis(config, *bridges),
        PartitionSpec::Chain { clusters, size } => chain_by_first_axis(config, *clusters, *size),
        PartitionSpec::Segments { .. } => ClusterPartition::new(config.len(), segments.to_vec()),
    }
}

fn measure(case: &BenchCase, params: &DesignParams, r: usize) -> Result<Measured> {
    let seg = generate_segmented(&case.generator_for(r))?;
    let config = &seg.config;
    let n = config.len();
    let Some(pspec) = &case.partition else {
        let started = Instant::now();
        let d = if case.usi {
            design_stress_usi(config, params)?.design
        } else {
            design_stress(config, params)?
        };
        return Ok(Measured {
            n,
            runtime: started.elapsed().as_secs_f64(),
            edges: d.edge_count(),
            lambda_d2: d.spectral.lambda_d2,
            lambda_max: d.spectral.lambda_max,
            efficiency: d.efficiency,
            verified: d.verification.overall,
        });
    };
    let partition = partition_for(pspec, config, &seg.segments)?;
    let started = Instant::now();
    let designs = match pspec {
        PartitionSpec::Segments { shared: true } => design_clusters_shared(config, &partition, params, case.usi)?,
        _ => design_clusters(config, &partition, params, case.usi)?,
    };
    let runtime = started.elapsed().as_secs_f64();
    let ensemble = ensemble_stress(&designs, &partition, config)?;
    let m = ensemble.matrix.matrix();
    let edges = (0..n).map(|i| (i + 1..n).filter(|&j| m[(i, j)] != 0.0).count()).sum();
    Ok(Measured {
        n,
        runtime,
        edges,
        lambda_d2: ensemble.spectral.lambda_d2,
        lambda_max: ensemble.spectral.lambda_max,
        efficiency: spectral_efficiency(&ensemble.spectral, edges, n).ok(),
        verified: ensemble.collective && ensemble_psd(&ensemble) && ensemble.spectral.lambda_d2 > 0.0,
    })
}

fn run_one(case: &BenchCase, pi: usize, r: usize) -> RunRecord {
    let params = &case.params[pi];
    let mut rec = RunRecord {
        case: case.name.clone(),
        param_index: pi,
        alpha: params.alpha,
        repeat: r,
        seed: case.seed(r),
        n: 0,
        verified: false,
        runtime_s: None,
        edges: None,
        average_degree: None,
        lambda_d2: None,
        lambda_max: None,
        efficiency: None,
        error: None,
    };
    match measure(case, params, r) {
        Ok(m) => {
            rec.n = m.n;
            rec.verified = m.verified;
            rec.runtime_s = Some(m.runtime);
            rec.edges = Some(m.edges);
            rec.average_degree = Some(2.0 * m.edges as f64 / m.n as f64);
            rec.lambda_d2 = Some(m.lambda_d2);
            rec.lambda_max = Some(m.lambda_max);
            rec.efficiency = m.efficiency;
        }
        Err(e) => {
            log::warn!("{} (params {pi}, repeat {r}): {e}", case.name);
            rec.error = Some(e.to_string());
        }
    }
    rec
}

/// Aggregate over the repeats of one (case, parameter set).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub case: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub usi: bool,
    pub multicluster: bool,
    pub n: usize,
    pub runs: usize,
    pub successes: usize,
    /// Fraction of runs whose design passed verification.
    pub pass_rate: f64,
    pub runtime_mean_s: Option<f64>,
    pub runtime_median_s: Option<f64>,
    pub edges_mean: Option<f64>,
    pub average_degree: Option<f64>,
    pub lambda_d2: Option<f64>,
    pub efficiency: Option<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub runs: Vec<RunRecord>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len() / 2;
    Some(if s.len() % 2 == 1 { s[k] } else { 0.5 * (s[k - 1] + s[k]) })
}

fn summarize(case: &BenchCase, pi: usize, runs: &[RunRecord]) -> BenchRow {
    let ok: Vec<&RunRecord> = runs.iter().filter(|r| r.error.is_none()).collect();
    let col = |f: &dyn Fn(&RunRecord) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
    let p = &case.params[pi];
    BenchRow {
        case: case.name.clone(),
        alpha: p.alpha,
        beta: p.beta,
        gamma: p.gamma,
        usi: case.usi,
        multicluster: case.partition.is_some(),
        n: ok.first().map_or(0, |r| r.n),
        runs: runs.len(),
        successes: ok.len(),
        pass_rate: runs.iter().filter(|r| r.verified).count() as f64 / runs.len() as f64,
        runtime_mean_s: mean(&col(&|r| r.runtime_s)),
        runtime_median_s: median(&col(&|r| r.runtime_s)),
        edges_mean: mean(&col(&|r| r.edges.map(|e| e as f64))),
        average_degree: mean(&col(&|r| r.average_degree)),
        lambda_d2: mean(&col(&|r| r.lambda_d2)),
        efficiency: mean(&col(&|r| r.efficiency)),
        seeds: runs.iter().filter_map(|r| r.seed).collect(),
    }
}

/// Runs every (case, params, repeat) in the current rayon pool. Failed runs
/// are recorded and the suite continues.
pub fn run_benchmark(suite: &BenchmarkSuite) -> Result<BenchReport> {
    suite.validate()?;
    let jobs: Vec<(usize, usize, usize)> = suite
        .cases
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| (0..c.params.len()).flat_map(move |pi| (0..c.repeats).map(move |r| (ci, pi, r))))
        .collect();
    let runs: Vec<RunRecord> = jobs.par_iter().map(|&(ci, pi, r)| run_one(&suite.cases[ci], pi, r)).collect();
    let mut rows = Vec::new();
    let mut at = 0;
    for c in &suite.cases {
        for pi in 0..c.params.len() {
            rows.push(summarize(c, pi, &runs[at..at + c.repeats]));
            at += c.repeats;
        }
    }
    Ok(BenchReport { rows, runs })
}

/// Flat CSV form of a row; seeds are `;`-separated.
#[derive(Serialize, Deserialize)]
struct CsvRow {
    case: String,
    alpha: f64,
    beta: f64,
    gamma: f64,
    usi: bool,
    multicluster: bool,
    n: usize,
    runs: usize,
    successes: usize,
    pass_rate: f64,
    runtime_mean_s: Option<f64>,
    runtime_median_s: Option<f64>,
    edges_mean: Option<f64>,
    average_degree: Option<f64>,
    lambda_d2: Option<f64>,
    efficiency: Option<f64>,
    seeds: String,
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

pub fn rows_to_csv(rows: &[BenchRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        let seeds = r.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";");
        w.serialize(CsvRow {
            case: r.case.clone(),
            alpha: r.alpha,
            beta: r.beta,
            gamma: r.gamma,
            usi: r.usi,
            multicluster: r.multicluster,
            n: r.n,
            runs: r.runs,
            successes: r.successes,
            pass_rate: r.pass_rate,
            runtime_mean_s: r.runtime_mean_s,
            runtime_median_s: r.runtime_median_s,
            edges_mean: r.edges_mean,
            average_degree: r.average_degree,
            lambda_d2: r.lambda_d2,
            efficiency: r.efficiency,
            seeds,
        })
        .map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
}

pub fn rows_from_csv(text: &str) -> Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(csv_err)?;
            let seeds = row
                .seeds
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<u64>().map_err(csv_err))
                .collect::<Result<Vec<_>>>()?;
            Ok(BenchRow {
                case: row.case,
                alpha: row.alpha,
                beta: row.beta,
                gamma: row.gamma,
                usi: row.usi,
                multicluster: row.multicluster,
                n: row.n,
                runs: row.runs,
                successes: row.successes,
                pass_rate: row.pass_rate,
                runtime_mean_s: row.runtime_mean_s,
                runtime_median_s: row.runtime_median_s,
                edges_mean: row.edges_mean,
                average_degree: row.average_degree,
                lambda_d2: row.lambda_d2,
                efficiency: row.efficiency,
                seeds,
            })
        })
        .collect()
}

pub fn runs_to_csv(runs: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in runs {
        w.serialize(r).map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
}

pub fn runs_from_csv(text: &str) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|x| x.map_err(csv_err)).collect()
}

/// Writes `bench.csv`, `runs.csv` and `bench.json` into `dir`.
pub fn write_report(report: &BenchReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("bench.csv"), rows_to_csv(&report.rows)?)?;
    std::fs::write(dir.join("runs.csv"), runs_to_csv(&report.runs)?)?;
    std::fs::write(dir.join("bench.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}
