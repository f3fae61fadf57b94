//! Time-domain simulation of `dz/dt = -(Omega ⊗ I_D) z`, randomized
//! multicluster switching, leader pinning, and the affine-fit error metric.
//!
//! States are `D x N` matrices with one column per node; flattened they are
//! node-major (`z_1x, z_1y, z_2x, ...`).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formation::{numeric_rank, spectral_report, Configuration, StressMatrix, AFFINE_RANK_TOL};
use crate::multicluster::{leader_condition_check, validate_partition, ClusterPartition};

/// Largest `h * lambda_max` for which forward Euler is stable.
pub const EULER_LIMIT: f64 = 2.0;
/// Same for classical RK4 (real-axis stability interval).
pub const RK4_LIMIT: f64 = 2.78;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

impl Integrator {
    pub fn limit(self) -> f64 {
        match self {
            Integrator::Euler => EULER_LIMIT,
            Integrator::Rk4 => RK4_LIMIT,
        }
    }
}

/// Target of a keyframe: an affine image `A P + b 1ᵀ` of the reference
/// configuration, or explicit positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KeyTarget {
    Affine { a: Vec<Vec<f64>>, b: Vec<f64> },
    Positions { points: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub time: f64,
    #[serde(flatten)]
    pub target: KeyTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub step: f64,
    pub horizon: f64,
    pub integrator: Integrator,
    pub seed: u64,
    /// Steps between cluster re-draws.
    pub switching_period: usize,
    pub leaders: Vec<usize>,
    /// Sorted by time; equal times make a step change.
    pub keyframes: Vec<Keyframe>,
    /// Record every `k`-th step (the last step is always recorded).
    pub record_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step: 0.1,
            horizon: 10.0,
            integrator: Integrator::Euler,
            seed: 0,
            switching_period: 1,
            leaders: Vec::new(),
            keyframes: Vec::new(),
            record_stride: 1,
        }
    }
}

impl SimConfig {
    /// Step `0.1 / beta`, the default for designs bounded by `beta`.
    pub fn for_beta(beta: f64, horizon: f64) -> Self {
        Self {
            step: 0.1 / beta,
            horizon,
            ..Self::default()
        }
    }

    pub fn steps(&self) -> usize {
        ((self.horizon / self.step) + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidInput(format!("step size {} must be positive", self.step)));
        }
        if !(self.horizon >= self.step) {
            return Err(Error::InvalidInput(format!(
                "horizon {} shorter than one step {}",
                self.horizon, self.step
            )));
        }
        if self.switching_period == 0 || self.record_stride == 0 {
            return Err(Error::InvalidInput("switching period and record stride must be >= 1".into()));
        }
        if self.keyframes.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(Error::InvalidInput("keyframes must be sorted by time".into()));
        }
        if !self.keyframes.is_empty() && self.leaders.is_empty() {
            return Err(Error::InvalidInput("keyframes given without leaders".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dim: usize,
    pub nodes: usize,
    pub times: Vec<f64>,
    /// Flattened node-major positions per sample.
    pub states: Vec<Vec<f64>>,
    /// Affine-fit error per sample.
    pub errors: Vec<f64>,
    /// Distance to the keyframe target per sample; empty without keyframes.
    pub target_errors: Vec<f64>,
    /// Cluster chosen by each node per sample; empty for single-cluster runs.
    pub choices: Vec<Vec<usize>>,
    /// Steps where the affine-fit error grew.
    pub energy_increases: usize,
}

impl Trajectory {
    pub fn sample_count(&self) -> usize {
        self.times.len()
    }

    pub fn state(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.dim, self.nodes, &self.states[k])
    }

    pub fn final_state(&self) -> DMatrix<f64> {
        self.state(self.sample_count() - 1)
    }

    /// Index of the last sample with time at most `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.iter().rposition(|&s| s <= t + 1e-12).unwrap_or_default()
    }

    /// Fitted decay rate of the affine-fit error over the samples where
    /// `e / e(0)` lies in `[lo, hi]`.
    pub fn decay_rate(&self, hi: f64, lo: f64) -> Option<f64> {
        let e0 = *self.errors.first()?;
        if e0 <= 0.0 {
            return None;
        }
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&self.errors)
            .filter(|(_, &e)| e / e0 <= hi && e / e0 >= lo)
            .map(|(&t, &e)| (t, e.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let me = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - me)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        (sxx > 0.0).then(|| -sxy / sxx)
    }
}

/// Least-squares affine fit `z_i ≈ Θ p_i + t`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineFit {
    /// `sqrt(residual / N)`.
    pub error: f64,
    pub theta: DMatrix<f64>,
    pub t: DVector<f64>,
}

/// Precomputed `P̄ᵀ (P̄ P̄ᵀ)⁻¹` for repeated fits against one reference.
#[derive(Clone, Debug)]
pub struct AffineFitter {
    aug: DMatrix<f64>,
    pinv: DMatrix<f64>,
    dim: usize,
}

impl AffineFitter {
    pub fn new(reference: &Configuration) -> Result<Self> {
        reference.require_design_valid()?;
        let aug = reference.augmented();
        let gram = &aug * aug.transpose();
        let inv = gram
            .cholesky()
            .ok_or(Error::DegenerateConfiguration {
                rank: reference.affine_rank(),
                required: reference.dim() + 1,
            })?
            .inverse();
        Ok(Self {
            pinv: aug.transpose() * inv,
            aug,
            dim: reference.dim(),
        })
    }

    pub fn fit(&self, z: &DMatrix<f64>) -> Result<AffineFit> {
        if z.shape() != (self.dim, self.aug.ncols()) {
            return Err(Error::DimensionMismatch(format!(
                "state is {}x{}, reference is {}x{}",
                z.nrows(),
                z.ncols(),
                self.dim,
                self.aug.ncols()
            )));
        }
        let map = z * &self.pinv;
        let residual = z - &map * &self.aug;
        Ok(AffineFit {
            error: residual.norm() / (self.aug.ncols() as f64).sqrt(),
            theta: map.columns(0, self.dim).into_owned(),
            t: map.column(self.dim).into_owned(),
        })
    }

    pub fn error(&self, z: &DMatrix<f64>) -> f64 {
        let map = z * &self.pinv;
        (z - map * &self.aug).norm() / (self.aug.ncols() as f64).sqrt()
    }
}

pub fn affine_fit_error(z: &DMatrix<f64>, reference: &Configuration) -> Result<AffineFit> {
    AffineFitter::new(reference)?.fit(z)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterFits {
    pub fits: Vec<AffineFit>,
    /// `|[Θ_a t_a] - [Θ_b t_b]|_F` for every overlapping pair.
    pub deltas: Vec<((usize, usize), f64)>,
}

/// Separate affine fits per cluster and their pairwise differences.
pub fn cluster_fits(z: &DMatrix<f64>, reference: &Configuration, partition: &ClusterPartition) -> Result<ClusterFits> {
    let fits = partition
        .clusters()
        .iter()
        .map(|nodes| {
            let sub = reference.subset(nodes)?;
            let zs = DMatrix::from_fn(z.nrows(), nodes.len(), |r, c| z[(r, nodes[c])]);
            affine_fit_error(&zs, &sub)
        })
        .collect::<Result<Vec<_>>>()?;
    let deltas = partition
        .bridge_pairs()
        .into_iter()
        .map(|(a, b, _)| {
            let d = (&fits[a].theta - &fits[b].theta).norm_squared() + (&fits[a].t - &fits[b].t).norm_squared();
            ((a, b), d.sqrt())
        })
        .collect();
    Ok(ClusterFits { fits, deltas })
}

/// The stress feedback driving the followers.
#[derive(Clone, Copy, Debug)]
pub enum Controller<'a> {
    Single(&'a StressMatrix),
    /// Cluster-local stresses, indexed like the partition's node lists.
    Clusters {
        stresses: &'a [StressMatrix],
        partition: &'a ClusterPartition,
    },
}

type Row = Vec<(usize, f64)>;

/// Sparse rows of the feedback, one set of alternatives per node.
struct Law {
    /// `options[i][k]`: row used when node `i` picks its `k`-th cluster.
    options: Vec<Vec<Row>>,
    /// Global cluster index of each option.
    labels: Vec<Vec<usize>>,
    switching: bool,
    lambda_bound: f64,
}

fn sparse_rows(m: &DMatrix<f64>, nodes: &[usize], gain: &[f64]) -> Vec<Row> {
    (0..nodes.len())
        .map(|a| {
            (0..nodes.len())
                .filter(|&b| m[(a, b)] != 0.0)
                .map(|b| (nodes[b], gain[a] * m[(a, b)]))
                .collect()
        })
        .collect()
}

impl Law {
    fn new(controller: &Controller<'_>, n: usize) -> Result<Self> {
        match controller {
            Controller::Single(omega) => {
                if omega.node_count() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "{} node stress for {n} nodes",
                        omega.node_count()
                    )));
                }
                let nodes: Vec<usize> = (0..n).collect();
                let rows = sparse_rows(omega.matrix(), &nodes, &vec![1.0; n]);
                let lambda = spectral_report(omega.matrix(), 0)?.lambda_max.max(0.0);
                Ok(Self {
                    options: rows.into_iter().map(|r| vec![r]).collect(),
                    labels: vec![vec![0]; n],
                    switching: false,
                    lambda_bound: lambda,
                })
            }
            Controller::Clusters { stresses, partition } => {
                if partition.node_count() != n || stresses.len() != partition.cluster_count() {
                    return Err(Error::DimensionMismatch(
                        "cluster stresses do not match the partition".into(),
                    ));
                }
                let counts = partition.membership_counts();
                if let Some(i) = counts.iter().position(|&c| c == 0) {
                    return Err(Error::InvalidInput(format!("node {i} is not covered by any cluster")));
                }
                let mut options = vec![Vec::new(); n];
                let mut labels = vec![Vec::new(); n];
                let mut lambda: f64 = 0.0;
                for (c, (omega, nodes)) in stresses.iter().zip(partition.clusters()).enumerate() {
                    if omega.node_count() != nodes.len() {
                        return Err(Error::DimensionMismatch(format!(
                            "cluster {c}: {} node stress for {} nodes",
                            omega.node_count(),
                            nodes.len()
                        )));
                    }
                    // Gain 1/pi_i^c = C_i keeps the mean dynamics at sum_c Omega_c.
                    let gain: Vec<f64> = nodes.iter().map(|&i| counts[i] as f64).collect();
                    for (a, row) in sparse_rows(omega.matrix(), nodes, &gain).into_iter().enumerate() {
                        options[nodes[a]].push(row);
                        labels[nodes[a]].push(c);
                    }
                    lambda = lambda.max(spectral_report(omega.matrix(), 0)?.lambda_max);
                }
                let cmax = counts.iter().copied().max().unwrap_or(1) as f64;
                Ok(Self {
                    switching: partition.cluster_count() > 1,
                    options,
                    labels,
                    lambda_bound: lambda * cmax,
                })
            }
        }
    }
}

/// `out = -K z` for the selected rows; pinned nodes get zero velocity.
fn apply(law: &Law, pick: &[usize], pinned: &[bool], z: &DMatrix<f64>, out: &mut DMatrix<f64>) {
    let d = z.nrows();
    out.fill(0.0);
    for (i, opts) in law.options.iter().enumerate() {
        if pinned[i] {
            continue;
        }
        for &(j, w) in &opts[pick[i]] {
            for r in 0..d {
                out[(r, i)] -= w * z[(r, j)];
            }
        }
    }
}

fn keyframe_positions(target: &KeyTarget, reference: &Configuration) -> Result<DMatrix<f64>> {
    let d = reference.dim();
    match target {
        KeyTarget::Affine { a, b } => {
            if a.len() != d || a.iter().any(|r| r.len() != d) || b.len() != d {
                return Err(Error::DimensionMismatch(format!("keyframe map must be {d}x{d} plus {d}")));
            }
            let am = DMatrix::from_fn(d, d, |r, c| a[r][c]);
            let mut out = am * reference.coords();
            for mut col in out.column_iter_mut() {
                for r in 0..d {
                    col[r] += b[r];
                }
            }
            Ok(out)
        }
        KeyTarget::Positions { points } => {
            if points.len() != reference.len() || points.iter().any(|p| p.len() != d) {
                return Err(Error::DimensionMismatch(format!(
                    "keyframe needs {} points of dimension {d}",
                    reference.len()
                )));
            }
            Ok(DMatrix::from_fn(d, points.len(), |r, c| points[c][r]))
        }
    }
}

/// Piecewise-linear keyframe schedule.
struct Schedule {
    times: Vec<f64>,
    frames: Vec<DMatrix<f64>>,
}

impl Schedule {
    fn new(keyframes: &[Keyframe], reference: &Configuration) -> Result<Option<Self>> {
        if keyframes.is_empty() {
            return Ok(None);
        }
        let frames = keyframes
            .iter()
            .map(|k| keyframe_positions(&k.target, reference))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(Self {
            times: keyframes.iter().map(|k| k.time).collect(),
            frames,
        }))
    }

    fn at(&self, t: f64) -> DMatrix<f64> {
        let k = match self.times.iter().rposition(|&s| s <= t + 1e-12) {
            Some(k) => k,
            None => return self.frames[0].clone(),
        };
        if k + 1 >= self.times.len() {
            return self.frames[k].clone();
        }
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        &self.frames[k] * (1.0 - w) + &self.frames[k + 1] * w
    }
}

fn check_step(law: &Law, sim: &SimConfig) -> Result<()> {
    let limit = sim.integrator.limit();
    let product = sim.step * law.lambda_bound;
    if product >= limit {
        return Err(Error::UnstableStep {
            product,
            limit,
            suggested: 0.9 * limit / law.lambda_bound,
        });
    }
    Ok(())
}

fn run(controller: Controller<'_>, reference: &Configuration, z0: &DMatrix<f64>, sim: &SimConfig) -> Result<Trajectory> {
    sim.validate()?;
    let n = reference.len();
    let d = reference.dim();
    if z0.shape() != (d, n) {
        return Err(Error::DimensionMismatch(format!(
            "initial state is {}x{}, expected {d}x{n}",
            z0.nrows(),
            z0.ncols()
        )));
    }
    if let Some(&bad) = sim.leaders.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidInput(format!("leader {bad} out of range")));
    }
    let law = Law::new(&controller, n)?;
    check_step(&law, sim)?;
    let fitter = AffineFitter::new(reference)?;
    let schedule = Schedule::new(&sim.keyframes, reference)?;
    let mut pinned = vec![false; n];
    for &l in &sim.leaders {
        pinned[l] = true;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let mut pick = vec![0usize; n];
    let draw = |rng: &mut ChaCha8Rng, pick: &mut Vec<usize>| {
        for (i, opts) in law.options.iter().enumerate() {
            pick[i] = if opts.len() > 1 { rng.gen_range(0..opts.len()) } else { 0 };
        }
    };

    let mut z = z0.clone();
    let pin = |z: &mut DMatrix<f64>, t: f64| {
        if let Some(s) = &schedule {
            let target = s.at(t);
            for &l in &sim.leaders {
                z.set_column(l, &target.column(l));
            }
        }
    };
    pin(&mut z, 0.0);

    let steps = sim.steps();
    let h = sim.step;
    let mut traj = Trajectory {
        dim: d,
        nodes: n,
        times: Vec::new(),
        states: Vec::new(),
        errors: Vec::new(),
        target_errors: Vec::new(),
        choices: Vec::new(),
        energy_increases: 0,
    };
    let record = |traj: &mut Trajectory, z: &DMatrix<f64>, t: f64, pick: &[usize], err: f64| {
        traj.times.push(t);
        traj.states.push(z.as_slice().to_vec());
        traj.errors.push(err);
        if let Some(s) = &schedule {
            traj.target_errors.push((z - s.at(t)).norm() / (n as f64).sqrt());
        }
        if law.switching {
            traj.choices.push(pick.iter().enumerate().map(|(i, &k)| law.labels[i][k]).collect());
        }
    };

    if law.switching {
        draw(&mut rng, &mut pick);
    }
    let mut err = fitter.error(&z);
    record(&mut traj, &z, 0.0, &pick, err);

    let mut k1 = DMatrix::zeros(d, n);
    let mut k2 = DMatrix::zeros(d, n);
    let mut k3 = DMatrix::zeros(d, n);
    let mut k4 = DMatrix::zeros(d, n);
    for step in 1..=steps {
        if law.switching && step > 1 && (step - 1) % sim.switching_period == 0 {
            draw(&mut rng, &mut pick);
        }
        match sim.integrator {
            Integrator::Euler => {
                apply(&law, &pick, &pinned, &z, &mut k1);
                z += &k1 * h;
            }
            Integrator::Rk4 => {
                apply(&law, &pick, &pinned, &z, &mut k1);
                apply(&law, &pick, &pinned, &(&z + &k1 * (0.5 * h)), &mut k2);
                apply(&law, &pick, &pinned, &(&z + &k2 * (0.5 * h)), &mut k3);
                apply(&law, &pick, &pinned, &(&z + &k3 * h), &mut k4);
                z += (&k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (h / 6.0);
            }
        }
        let t = step as f64 * h;
        pin(&mut z, t);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver(format!("state diverged at t = {t}")));
        }
        let next = fitter.error(&z);
        if next > err * (1.0 + 1e-12) + 1e-300 && schedule.is_none() {
            traj.energy_increases += 1;
        }
        err = next;
        if step % sim.record_stride == 0 || step == steps {
            record(&mut traj, &z, t, &pick, err);
        }
    }
    if traj.energy_increases > 0 {
        if law.switching {
            log::info!("affine-fit energy grew on {} switching steps", traj.energy_increases);
        } else {
            log::warn!("affine-fit energy grew on {} steps of an LTI run", traj.energy_increases);
        }
    }
    Ok(traj)
}

/// Integrates `dz/dt = -(Omega ⊗ I_D) z` from `z0`.
pub fn simulate_single(
    omega: &StressMatrix,
    reference: &Configuration,
    z0: &DMatrix<f64>,
    sim: &SimConfig,
) -> Result<Trajectory> {
    run(Controller::Single(omega), reference, z0, sim)
}

/// Randomized switching: every switching instant each node draws one of its
/// clusters uniformly and applies that cluster's stress row with gain `C_i`.
pub fn simulate_multicluster(
    stresses: &[StressMatrix],
    partition: &ClusterPartition,
    reference: &Configuration,
    z0: &DMatrix<f64>,
    sim: &SimConfig,
) -> Result<Trajectory> {
    validate_partition(reference, partition)?;
    run(Controller::Clusters { stresses, partition }, reference, z0, sim)
}

/// Leaders follow the keyframe schedule exactly; followers run the
/// controller. Insufficient leaders only produce a warning.
pub fn simulate_leader_maneuver(
    controller: Controller<'_>,
    reference: &Configuration,
    z0: &DMatrix<f64>,
    sim: &SimConfig,
) -> Result<Trajectory> {
    if sim.leaders.is_empty() || sim.keyframes.is_empty() {
        return Err(Error::InvalidInput("leader maneuver needs leaders and keyframes".into()));
    }
    let ok = match controller {
        Controller::Single(_) => {
            numeric_rank(&reference.augmented_subset(&sim.leaders), AFFINE_RANK_TOL) == reference.dim() + 1
        }
        Controller::Clusters { partition, .. } => {
            validate_partition(reference, partition)?;
            leader_condition_check(reference, partition, &sim.leaders)?.overall
        }
    };
    if !ok {
        log::warn!("leader set does not pin every affine degree of freedom");
    }
    run(controller, reference, z0, sim)
}

/// Terminal over initial target error for each phase `[starts[k], starts[k+1])`,
/// the last phase ending at the final sample.
pub fn phase_ratios(traj: &Trajectory, starts: &[f64]) -> Vec<f64> {
    let end = *traj.times.last().unwrap_or(&0.0);
    starts
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let stop = starts.get(k + 1).copied().unwrap_or(end + traj_step(traj));
            let first = traj.times.iter().position(|&t| t >= s - 1e-12).unwrap_or(0);
            let last = traj.times.iter().rposition(|&t| t < stop - 1e-12).unwrap_or(first);
            traj.target_errors[last] / traj.target_errors[first]
        })
        .collect()
}

fn traj_step(traj: &Trajectory) -> f64 {
    if traj.times.len() > 1 {
        traj.times[1] - traj.times[0]
    } else {
        1.0
    }
}

/// Uniform random positions in the unit box.
pub fn random_state(dim: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = DMatrix::zeros(dim, n);
    for i in 0..n {
        for r in 0..dim {
            z[(r, i)] = rng.gen::<f64>();
        }
    }
    z
}

/// `base + N(0, sigma^2)` noise on every coordinate.
pub fn perturbed(base: &DMatrix<f64>, sigma: f64, seed: u64) -> Result<DMatrix<f64>> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(format!("noise level: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = base.clone();
    for i in 0..z.ncols() {
        for r in 0..z.nrows() {
            z[(r, i)] += normal.sample(&mut rng);
        }
    }
    Ok(z)
}

/// Planar configuration with the `moved` nodes reflected across the line
/// through nodes `hinge.0` and `hinge.1`.
pub fn fold_about_hinge(reference: &Configuration, moved: &[usize], hinge: (usize, usize)) -> Result<DMatrix<f64>> {
    if reference.dim() != 2 {
        return Err(Error::InvalidInput("folding is defined for planar configurations".into()));
    }
    let n = reference.len();
    if hinge.0 >= n || hinge.1 >= n || moved.iter().any(|&i| i >= n) {
        return Err(Error::InvalidInput("fold node index out of range".into()));
    }
    let a = reference.point(hinge.0);
    let dir = reference.point(hinge.1) - &a;
    let len = dir.norm();
    if len <= 0.0 {
        return Err(Error::InvalidInput("hinge nodes coincide".into()));
    }
    let u = dir / len;
    let reflect = &u * u.transpose() * 2.0 - DMatrix::identity(2, 2);
    let mut z = reference.coords().clone();
    for &i in moved {
        let p = reference.point(i) - &a;
        z.set_column(i, &(&reflect * p + &a));
    }
    Ok(z)
}
