//! Deterministic benchmark configurations.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formation::Configuration;

/// Affine map `p -> A p + b`, `A` given row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        Self::from_matrix(&DMatrix::identity(dim, dim), &DVector::zeros(dim))
    }

    pub fn from_matrix(a: &DMatrix<f64>, b: &DVector<f64>) -> Self {
        Self {
            a: a.row_iter().map(|r| r.iter().copied().collect()).collect(),
            b: b.iter().copied().collect(),
        }
    }

    pub fn matrix(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let d = self.b.len();
        if self.a.len() != d || self.a.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch("affine map must be D x D with a length-D offset".into()));
        }
        Ok((
            DMatrix::from_fn(d, d, |i, j| self.a[i][j]),
            DVector::from_column_slice(&self.b),
        ))
    }
}

/// Segment `s+1` node `next[k]` is merged into segment `s` node `prev[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeSpec {
    pub prev: Vec<usize>,
    pub next: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WShape {
    Bar,
    V,
    W,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    /// i.i.d. uniform coordinates in `[0,1)^D`, drawn node by node.
    Random { n: usize, dim: usize, seed: u64 },
    /// Regular polygon on the unit circle, node `k` at angle `2 pi k / n`.
    Polygon { n: usize },
    Octahedron,
    Cuboctahedron,
    TruncatedIcosahedron,
    /// Copies of `base` placed by `transforms`, consecutive copies sharing
    /// the nodes listed in `bridges` (one entry per consecutive pair).
    RepeatedSegment {
        base: Vec<Vec<f64>>,
        transforms: Vec<AffineMap>,
        bridges: Vec<BridgeSpec>,
    },
    /// Four 58-node bars joined by coplanar 4-node bridges.
    LetterW { shape: WShape },
}

/// Merged configuration plus the global node indices of every segment.
#[derive(Clone, Debug, PartialEq)]
pub struct Segmented {
    pub config: Configuration,
    pub segments: Vec<Vec<usize>>,
}

pub fn generate(spec: &GeneratorSpec) -> Result<Configuration> {
    match spec {
        GeneratorSpec::Random { n, dim, seed } => random(*n, *dim, *seed),
        GeneratorSpec::Polygon { n } => polygon(*n),
        GeneratorSpec::Octahedron => octahedron(),
        GeneratorSpec::Cuboctahedron => cuboctahedron(),
        GeneratorSpec::TruncatedIcosahedron => truncated_icosahedron(),
        GeneratorSpec::RepeatedSegment {
            base,
            transforms,
            bridges,
        } => Ok(repeated_segment(base, transforms, bridges)?.config),
        GeneratorSpec::LetterW { shape } => Ok(letter_w(*shape)?.config),
    }
}

/// Segment bookkeeping for the segmented kinds; a single segment covering
/// every node otherwise.
pub fn generate_segmented(spec: &GeneratorSpec) -> Result<Segmented> {
    match spec {
        GeneratorSpec::RepeatedSegment {
            base,
            transforms,
            bridges,
        } => repeated_segment(base, transforms, bridges),
        GeneratorSpec::LetterW { shape } => letter_w(*shape),
        other => {
            let config = generate(other)?;
            let all = (0..config.len()).collect();
            Ok(Segmented {
                config,
                segments: vec![all],
            })
        }
    }
}

pub fn random(n: usize, dim: usize, seed: u64) -> Result<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = DMatrix::zeros(dim, n);
    for j in 0..n {
        for i in 0..dim {
            coords[(i, j)] = rng.gen::<f64>();
        }
    }
    Configuration::new(coords)
}

pub fn polygon(n: usize) -> Result<Configuration> {
    if n < 3 {
        return Err(Error::InvalidInput("polygon needs at least 3 nodes".into()));
    }
    let coords = DMatrix::from_fn(2, n, |r, k| {
        let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        if r == 0 {
            t.cos()
        } else {
            t.sin()
        }
    });
    Configuration::new(coords)
}

fn unit_circumradius(points: Vec<[f64; 3]>) -> Result<Configuration> {
    let r = points
        .iter()
        .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
        .fold(0.0, f64::max);
    Configuration::from_points(&points.iter().map(|p| p.iter().map(|v| v / r).collect()).collect::<Vec<_>>())
}

/// `(±1,0,0), (0,±1,0), (0,0,±1)`.
pub fn octahedron() -> Result<Configuration> {
    let mut pts = Vec::new();
    for axis in 0..3 {
        for s in [1.0, -1.0] {
            let mut p = [0.0; 3];
            p[axis] = s;
            pts.push(p);
        }
    }
    unit_circumradius(pts)
}

/// All permutations of `(±1, ±1, 0)`.
pub fn cuboctahedron() -> Result<Configuration> {
    let mut pts = Vec::new();
    for zero in (0..3).rev() {
        for s1 in [1.0, -1.0] {
            for s2 in [1.0, -1.0] {
                let mut p = [0.0; 3];
                let others: Vec<usize> = (0..3).filter(|&a| a != zero).collect();
                p[others[0]] = s1;
                p[others[1]] = s2;
                pts.push(p);
            }
        }
    }
    unit_circumradius(pts)
}

/// Even permutations of `(0, ±1, ±3φ)`, `(±1, ±(2+φ), ±2φ)` and
/// `(±φ, ±2, ±(2φ+1))`.
pub fn truncated_icosahedron() -> Result<Configuration> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let bases = [[0.0, 1.0, 3.0 * phi], [1.0, 2.0 + phi, 2.0 * phi], [phi, 2.0, 2.0 * phi + 1.0]];
    let mut pts: Vec<[f64; 3]> = Vec::new();
    for base in bases {
        for shift in 0..3 {
            let cyc = [base[shift % 3], base[(shift + 1) % 3], base[(shift + 2) % 3]];
            for signs in 0..8u32 {
                let mut p = cyc;
                let mut skip = false;
                for (k, v) in p.iter_mut().enumerate() {
                    if signs & (1 << k) != 0 {
                        if *v == 0.0 {
                            skip = true;
                        }
                        *v = -*v;
                    }
                }
                if !skip {
                    pts.push(p);
                }
            }
        }
    }
    debug_assert_eq!(pts.len(), 60);
    unit_circumradius(pts)
}

pub fn apply_affine(config: &Configuration, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Configuration> {
    let d = config.dim();
    if a.shape() != (d, d) || b.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "affine map {}x{} + {} for dimension {d}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if a.clone().lu().determinant().abs() < 1e-12 {
        log::warn!("applying a singular affine map");
    }
    let mut coords = a * config.coords();
    for mut col in coords.column_iter_mut() {
        col += b;
    }
    let out = Configuration::new(coords)?;
    match config.labels() {
        Some(l) => out.with_labels(l.to_vec()),
        None => Ok(out),
    }
}

pub fn repeated_segment(
    base: &[Vec<f64>],
    transforms: &[AffineMap],
    bridges: &[BridgeSpec],
) -> Result<Segmented> {
    let base = Configuration::from_points(base)?;
    let nb = base.len();
    if transforms.is_empty() {
        return Err(Error::InvalidInput("at least one segment transform required".into()));
    }
    if bridges.len() + 1 != transforms.len() {
        return Err(Error::InvalidInput(format!(
            "{} segments need {} bridge specs, got {}",
            transforms.len(),
            transforms.len() - 1,
            bridges.len()
        )));
    }
    let mut placed = Vec::with_capacity(transforms.len());
    for t in transforms {
        let (a, b) = t.matrix()?;
        if a.clone().lu().determinant().abs() < 1e-12 {
            return Err(Error::InvalidInput("segment transform is not invertible".into()));
        }
        placed.push(apply_affine(&base, &a, &b)?);
    }
    let scale = base.coords().amax().max(1.0);
    let mut points: Vec<DVector<f64>> = Vec::new();
    let mut segments: Vec<Vec<usize>> = Vec::new();
    for (s, seg) in placed.iter().enumerate() {
        let mut map = vec![usize::MAX; nb];
        if s > 0 {
            let br = &bridges[s - 1];
            if br.prev.len() != br.next.len() {
                return Err(Error::InvalidInput("bridge lists differ in length".into()));
            }
            for (&p, &q) in br.prev.iter().zip(&br.next) {
                if p >= nb || q >= nb {
                    return Err(Error::InvalidInput("bridge node index out of range".into()));
                }
                let global = segments[s - 1][p];
                if (&points[global] - seg.point(q)).norm() > 1e-9 * scale {
                    return Err(Error::InvalidInput(format!(
                        "bridge node {q} of segment {s} does not coincide with node {p} of segment {}",
                        s - 1
                    )));
                }
                map[q] = global;
            }
        }
        for (local, slot) in map.iter_mut().enumerate() {
            if *slot == usize::MAX {
                *slot = points.len();
                points.push(seg.point(local));
            }
        }
        segments.push(map);
    }
    let dim = base.dim();
    let coords = DMatrix::from_fn(dim, points.len(), |r, c| points[c][r]);
    Ok(Segmented {
        config: Configuration::new(coords)?,
        segments,
    })
}

/// Number of stations along a letter segment.
const W_STATIONS: usize = 14;
/// Segment length along its axis.
const W_LENGTH: f64 = (W_STATIONS - 1) as f64;

/// The 58-node bar: 14 stations of a unit square cross-section along `x`
/// plus two nodes above and below the middle. Nodes `0..4` form the `x = 0`
/// end face and `52..56` the `x = 13` end face.
pub fn letter_segment() -> Vec<Vec<f64>> {
    let mut pts = Vec::with_capacity(58);
    for s in 0..W_STATIONS {
        for (y, z) in [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)] {
            pts.push(vec![s as f64, y, z]);
        }
    }
    pts.push(vec![W_LENGTH / 2.0, 0.0, 1.5]);
    pts.push(vec![W_LENGTH / 2.0, 0.0, -1.5]);
    pts
}

/// Axis direction of each of the four segments.
fn w_directions(shape: WShape) -> [[f64; 3]; 4] {
    let (s, h) = (0.6, 0.8);
    match shape {
        WShape::Bar => [[1.0, 0.0, 0.0]; 4],
        WShape::V => [[s, -h, 0.0], [s, -h, 0.0], [s, h, 0.0], [s, h, 0.0]],
        WShape::W => [[s, -h, 0.0], [s, h, 0.0], [s, -h, 0.0], [s, h, 0.0]],
    }
}

/// Segment transforms `A_c = [d_c, e_y, e_z]` chained end to end so that the
/// `x = 13` face of segment `c` coincides with the `x = 0` face of `c+1`.
pub fn letter_w_transforms(shape: WShape) -> Vec<AffineMap> {
    let mut offset = DVector::zeros(3);
    let mut out = Vec::new();
    for d in w_directions(shape) {
        let dv = DVector::from_column_slice(&d);
        let mut a = DMatrix::identity(3, 3);
        a.set_column(0, &dv);
        out.push(AffineMap::from_matrix(&a, &offset));
        offset += dv * W_LENGTH;
    }
    out
}

pub fn letter_w(shape: WShape) -> Result<Segmented> {
    let bridge = BridgeSpec {
        prev: vec![52, 53, 54, 55],
        next: vec![0, 1, 2, 3],
    };
    repeated_segment(&letter_segment(), &letter_w_transforms(shape), &vec![bridge; 3])
}
