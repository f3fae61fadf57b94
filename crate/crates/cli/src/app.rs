//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use stresslab::design::{design_stress, DesignParams, DesignResult};
use stresslab::formation::{Configuration, StressMatrix};
use stresslab::generate::{generate_segmented, GeneratorSpec, WShape};
use stresslab::io::{
    config_from_json, config_to_json, matrix_to_csv, partition_from_json, partition_to_json, stress_from_csv,
    stress_to_csv, summary_to_json, trajectory_svg, trajectory_to_csv, DesignSummary, PartitionFile,
};
use stresslab::multicluster::{
    chain_by_first_axis, collective_motion_check, design_clusters, design_clusters_shared, ensemble_lambda_bound,
    ensemble_psd, ensemble_stress, leader_condition_check, padded_eigenvector_orthogonality, split_by_first_axis,
    validate_partition, ClusterPartition, CollectiveReport, LambdaBound, LeaderReport, PartitionReport,
};
use stresslab::sim::{
    perturbed, random_state, simulate_leader_maneuver, simulate_multicluster, simulate_single, Controller, Integrator,
    Keyframe, SimConfig,
};
use stresslab::usi::{classify_edges, design_stress_usi, edm, DEFAULT_EDM_TOL};
use stresslab::{Error, Result};

use crate::bench::{run_benchmark, write_report, BenchmarkSuite};

#[derive(Parser, Debug)]
#[command(name = "stresslab", version, about = "Sparse stress-matrix design and affine formation simulation")]
pub struct Cli {
    /// Print failures as a JSON object on stderr.
    #[arg(long, global = true)]
    pub error_json: bool,
    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a benchmark configuration.
    Gen(GenArgs),
    /// Design a stabilizing sparse stress matrix.
    Design(DesignArgs),
    /// Classify edges by length for a symmetric configuration.
    Usi(UsiArgs),
    /// Analyze a cluster partition, optionally designing its ensemble.
    Partition(PartitionArgs),
    /// Simulate the formation dynamics.
    Simulate(SimulateArgs),
    /// Run a benchmark suite.
    Bench(BenchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Random,
    Polygon,
    Octahedron,
    Cuboctahedron,
    TruncatedIcosahedron,
    LetterW,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Bar,
    V,
    W,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, value_enum, required_unless_present = "spec")]
    pub kind: Option<Kind>,
    /// Node count for random and polygon kinds.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Letter-W shape.
    #[arg(long, value_enum, default_value = "w")]
    pub shape: Shape,
    /// Generator spec JSON instead of --kind.
    #[arg(long, conflicts_with = "kind")]
    pub spec: Option<PathBuf>,
    /// Also write the generator's segments as a partition JSON.
    #[arg(long)]
    pub segments: Option<PathBuf>,
    /// Configuration JSON; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Relative pruning threshold.
    #[arg(long, default_value_t = 1e-6)]
    pub eps_rel: f64,
    /// Solver tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Add the explicit PSD constraint.
    #[arg(long)]
    pub two_sided: bool,
}

impl ParamArgs {
    fn params(&self) -> DesignParams {
        DesignParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            eps_rel: self.eps_rel,
            tolerance: self.tol,
            two_sided: self.two_sided,
        }
    }
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    #[arg(short, long)]
    pub config: PathBuf,
    /// Solve the class-reduced program.
    #[arg(long)]
    pub usi: bool,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Result JSON; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Edge-list CSV of the stress.
    #[arg(long)]
    pub stress_csv: Option<PathBuf>,
    /// Dense CSV of the stress matrix.
    #[arg(long)]
    pub dense_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct UsiArgs {
    #[arg(short, long)]
    pub config: PathBuf,
    /// Relative tolerance for grouping squared edge lengths.
    #[arg(long, default_value_t = DEFAULT_EDM_TOL)]
    pub tol_edm: f64,
    /// Output JSON; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PartitionSource {
    /// Partition JSON with clusters and optional leaders.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Two clusters sharing this many nodes around the median x.
    #[arg(long, conflicts_with = "partition")]
    pub split: Option<usize>,
    /// This many clusters chained along x (needs --size).
    #[arg(long, conflicts_with_all = ["partition", "split"], requires = "size")]
    pub chain: Option<usize>,
    /// Nodes per cluster for --chain.
    #[arg(long)]
    pub size: Option<usize>,
    /// Comma-separated leader nodes, overriding the partition file.
    #[arg(long, value_delimiter = ',')]
    pub leaders: Option<Vec<usize>>,
}

impl PartitionSource {
    fn given(&self) -> bool {
        self.partition.is_some() || self.split.is_some() || self.chain.is_some()
    }

    fn load(&self, config: &Configuration) -> Result<(ClusterPartition, Vec<usize>)> {
        let (partition, file_leaders) = if let Some(p) = &self.partition {
            let file = partition_from_json(&read(p)?)?;
            (file.partition(config.len())?, file.leaders)
        } else if let Some(b) = self.split {
            (split_by_first_axis(config, b)?, Vec::new())
        } else if let (Some(c), Some(s)) = (self.chain, self.size) {
            (chain_by_first_axis(config, c, s)?, Vec::new())
        } else {
            (ClusterPartition::single(config.len()), Vec::new())
        };
        let leaders = self.leaders.clone().unwrap_or(file_leaders);
        if let Some(&bad) = leaders.iter().find(|&&l| l >= config.len()) {
            return Err(Error::InvalidInput(format!("leader {bad} out of range")));
        }
        Ok((partition, leaders))
    }
}

#[derive(Args, Debug)]
pub struct PartitionArgs {
    #[arg(short, long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub source: PartitionSource,
    /// Design every cluster and analyze the ensemble.
    #[arg(long)]
    pub design: bool,
    /// Design cluster 0 only and reuse it (clusters must be affine copies).
    #[arg(long)]
    pub shared: bool,
    /// Design cluster stresses with the class-reduced program.
    #[arg(long)]
    pub usi: bool,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Write the partition itself as JSON.
    #[arg(long)]
    pub write_partition: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Uniform in the unit box.
    Random,
    /// Reference plus Gaussian noise.
    Perturb,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(short, long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub source: PartitionSource,
    /// Edge-list CSV of a single stress; designed when omitted.
    #[arg(long, conflicts_with_all = ["partition", "split", "chain"])]
    pub stress: Option<PathBuf>,
    /// Design cluster 0 only and reuse it (clusters must be affine copies).
    #[arg(long)]
    pub shared: bool,
    /// Design cluster stresses with the class-reduced program.
    #[arg(long)]
    pub usi: bool,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Seed of the cluster draws and of the initial state.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Step size; 0.1/beta when omitted.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 100.0)]
    pub horizon: f64,
    #[arg(long, value_enum, default_value = "euler")]
    pub integrator: IntegratorArg,
    /// Steps between cluster re-draws.
    #[arg(long, default_value_t = 1)]
    pub switching_period: usize,
    /// Record every k-th step.
    #[arg(long, default_value_t = 1)]
    pub record_stride: usize,
    #[arg(long, value_enum, default_value = "random")]
    pub init: Init,
    /// Noise level for --init perturb.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// JSON list of leader keyframes.
    #[arg(long)]
    pub keyframes: Option<PathBuf>,
    /// Trajectory CSV; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Write snapshots as SVG.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Comma-separated snapshot times for --svg.
    #[arg(long, value_delimiter = ',')]
    pub svg_times: Vec<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntegratorArg {
    Euler,
    Rk4,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Suite JSON (see FORMATS.md).
    #[arg(long)]
    pub suite: PathBuf,
    /// Directory for bench.csv, runs.csv and bench.json.
    #[arg(short, long, default_value = "bench-out")]
    pub output: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            let mut out = std::io::stdout().lock();
            let written = out.write_all(text.as_bytes()).and_then(|_| {
                if text.ends_with('\n') {
                    Ok(())
                } else {
                    out.write_all(b"\n")
                }
            });
            match written {
                // A closed pipe (`| head`) is not a failure of the command.
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => Ok(other?),
            }
        }
    }
}

fn load_config(path: &Path) -> Result<Configuration> {
    config_from_json(&read(path)?)
}

fn gen(a: &GenArgs) -> Result<()> {
    let spec = match (&a.spec, a.kind) {
        (Some(p), _) => serde_json::from_str::<GeneratorSpec>(&read(p)?)?,
        (None, Some(kind)) => {
            let need_n = || a.n.ok_or_else(|| Error::InvalidInput("--n is required for this kind".into()));
            match kind {
                Kind::Random => GeneratorSpec::Random { n: need_n()?, dim: a.dim, seed: a.seed },
                Kind::Polygon => GeneratorSpec::Polygon { n: need_n()? },
                Kind::Octahedron => GeneratorSpec::Octahedron,
                Kind::Cuboctahedron => GeneratorSpec::Cuboctahedron,
                Kind::TruncatedIcosahedron => GeneratorSpec::TruncatedIcosahedron,
                Kind::LetterW => GeneratorSpec::LetterW {
                    shape: match a.shape {
                        Shape::Bar => WShape::Bar,
                        Shape::V => WShape::V,
                        Shape::W => WShape::W,
                    },
                },
            }
        }
        (None, None) => return Err(Error::InvalidInput("--kind or --spec required".into())),
    };
    let seg = generate_segmented(&spec)?;
    if let Some(p) = &a.segments {
        let file = PartitionFile { clusters: seg.segments.clone(), leaders: Vec::new() };
        std::fs::write(p, partition_to_json(&file)?)?;
    }
    emit(a.output.as_deref(), &config_to_json(&seg.config)?)
}

fn design(a: &DesignArgs) -> Result<()> {
    let config = load_config(&a.config)?;
    let params = a.params.params();
    let (summary, result) = if a.usi {
        let r = design_stress_usi(&config, &params)?;
        (DesignSummary::from_usi(&r), r.design)
    } else {
        let r = design_stress(&config, &params)?;
        (DesignSummary::from_design(&r), r)
    };
    if let Some(p) = &a.stress_csv {
        std::fs::write(p, stress_to_csv(&result.stress)?)?;
    }
    if let Some(p) = &a.dense_csv {
        std::fs::write(p, matrix_to_csv(result.matrix.matrix())?)?;
    }
    emit(a.output.as_deref(), &summary_to_json(&summary)?)
}

fn usi(a: &UsiArgs) -> Result<()> {
    let config = load_config(&a.config)?;
    let cls = classify_edges(&edm(&config), a.tol_edm)?;
    let edges = stresslab::formation::Topology::complete(config.len()).edges().to_vec();
    let classes: Vec<Vec<(usize, usize)>> =
        cls.members().into_iter().map(|m| m.into_iter().map(|e| edges[e]).collect()).collect();
    let out = json!({
        "S": cls.class_count(),
        "edges": cls.edge_count(),
        "reduction_ratio": cls.reduction_ratio(),
        "multiplicities": cls.multiplicities,
        "squared_lengths": cls.squared_lengths,
        "classes": classes,
    });
    emit(a.output.as_deref(), &serde_json::to_string_pretty(&out)?)
}

#[derive(Serialize)]
struct EnsembleReport {
    lambda_d2: f64,
    lambda_max: f64,
    collective: bool,
    psd: bool,
    equilibrium_residual: f64,
    orthogonality_residual: f64,
    bound: LambdaBound,
}

#[derive(Serialize)]
struct PartitionAnalysis {
    partition: PartitionReport,
    clusters: Vec<Vec<usize>>,
    collective: CollectiveReport,
    leaders: Option<LeaderReport>,
    ensemble: Option<EnsembleReport>,
}

fn cluster_designs(
    config: &Configuration,
    partition: &ClusterPartition,
    params: &DesignParams,
    usi: bool,
    shared: bool,
) -> Result<Vec<DesignResult>> {
    if shared {
        design_clusters_shared(config, partition, params, usi)
    } else {
        design_clusters(config, partition, params, usi)
    }
}

fn partition(a: &PartitionArgs) -> Result<()> {
    let config = load_config(&a.config)?;
    if !a.source.given() {
        return Err(Error::InvalidInput("one of --partition, --split or --chain is required".into()));
    }
    let (partition, leaders) = a.source.load(&config)?;
    if let Some(p) = &a.write_partition {
        let file = PartitionFile { clusters: partition.clusters().to_vec(), leaders: leaders.clone() };
        std::fs::write(p, partition_to_json(&file)?)?;
    }
    let report = validate_partition(&config, &partition)?;
    let collective = collective_motion_check(&config, &partition);
    let leader_report = if leaders.is_empty() {
        None
    } else {
        Some(leader_condition_check(&config, &partition, &leaders)?)
    };
    let ensemble = if a.design {
        let params = a.params.params();
        let designs = cluster_designs(&config, &partition, &params, a.usi, a.shared)?;
        let ens = ensemble_stress(&designs, &partition, &config)?;
        Some(EnsembleReport {
            lambda_d2: ens.spectral.lambda_d2,
            lambda_max: ens.spectral.lambda_max,
            collective: ens.collective,
            psd: ensemble_psd(&ens),
            equilibrium_residual: ens.equilibrium_residual,
            orthogonality_residual: padded_eigenvector_orthogonality(&designs, &partition, &ens, &config),
            bound: ensemble_lambda_bound(&designs, &partition, &config, params.beta)?,
        })
    } else {
        None
    };
    let out = PartitionAnalysis {
        partition: report,
        clusters: partition.clusters().to_vec(),
        collective,
        leaders: leader_report,
        ensemble,
    };
    emit(a.output.as_deref(), &serde_json::to_string_pretty(&out)?)
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let config = load_config(&a.config)?;
    let params = a.params.params();
    let keyframes: Vec<Keyframe> = match &a.keyframes {
        Some(p) => serde_json::from_str(&read(p)?)?,
        None => Vec::new(),
    };
    let (partition, leaders) = a.source.load(&config)?;
    let sim = SimConfig {
        step: a.step.unwrap_or(0.1 / params.beta),
        horizon: a.horizon,
        integrator: match a.integrator {
            IntegratorArg::Euler => Integrator::Euler,
            IntegratorArg::Rk4 => Integrator::Rk4,
        },
        seed: a.seed,
        switching_period: a.switching_period,
        leaders: if keyframes.is_empty() { Vec::new() } else { leaders },
        keyframes,
        record_stride: a.record_stride,
    };
    let z0 = match a.init {
        Init::Random => random_state(config.dim(), config.len(), a.seed),
        Init::Perturb => perturbed(config.coords(), a.noise, a.seed)?,
    };
    let single: StressMatrix;
    let stresses: Vec<StressMatrix>;
    let controller = if a.source.given() {
        stresses = cluster_designs(&config, &partition, &params, a.usi, a.shared)?
            .into_iter()
            .map(|d| d.matrix)
            .collect();
        Controller::Clusters { stresses: &stresses, partition: &partition }
    } else {
        single = match &a.stress {
            Some(p) => stress_from_csv(&read(p)?, config.len())?.to_matrix(),
            None if a.usi => design_stress_usi(&config, &params)?.design.matrix,
            None => design_stress(&config, &params)?.matrix,
        };
        Controller::Single(&single)
    };
    let traj = if !sim.keyframes.is_empty() {
        simulate_leader_maneuver(controller, &config, &z0, &sim)?
    } else {
        match controller {
            Controller::Single(omega) => simulate_single(omega, &config, &z0, &sim)?,
            Controller::Clusters { stresses, partition } => {
                simulate_multicluster(stresses, partition, &config, &z0, &sim)?
            }
        }
    };
    if let Some(p) = &a.svg {
        std::fs::write(p, trajectory_svg(&traj, &a.svg_times, None))?;
    }
    emit(a.output.as_deref(), &trajectory_to_csv(&traj)?)
}

fn bench(a: &BenchArgs) -> Result<()> {
    let suite: BenchmarkSuite = serde_json::from_str(&read(&a.suite)?)?;
    let report = run_benchmark(&suite)?;
    write_report(&report, &a.output)?;
    let failed: usize = report.rows.iter().map(|r| r.runs - r.successes).sum();
    eprintln!(
        "{} rows written to {} ({failed} failed runs)",
        report.rows.len(),
        a.output.display()
    );
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Design(a) => design(a),
        Command::Usi(a) => usi(a),
        Command::Partition(a) => partition(a),
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
    }
}

/// Exit codes: 0 success, 1 failure, 2 usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    if let Some(n) = std::env::var("STRESSLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::debug!("thread pool already initialized: {e}");
        }
    }
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            if cli.error_json {
                eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            } else {
                eprintln!("error: {e}");
            }
            1
        }
    }
}
