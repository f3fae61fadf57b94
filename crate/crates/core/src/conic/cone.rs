//! Cone vectors, Nesterov-Todd scaling and the Jordan-product helpers used
//! by the interior-point iteration.

use faer::MatRef;
use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub(crate) struct Dims {
    pub lp: usize,
    pub psd: Vec<usize>,
}

impl Dims {
    pub fn degree(&self) -> usize {
        self.lp + self.psd.iter().sum::<usize>()
    }
}

/// An element of `R^l × S^{n_1} × … × S^{n_k}` (matrices stored full).
#[derive(Clone, Debug)]
pub(crate) struct ConeVec {
    pub lp: DVector<f64>,
    pub psd: Vec<DMatrix<f64>>,
}

impl ConeVec {
    pub fn zeros(dims: &Dims) -> Self {
        Self {
            lp: DVector::zeros(dims.lp),
            psd: dims.psd.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        }
    }

    pub fn identity(dims: &Dims) -> Self {
        Self {
            lp: DVector::from_element(dims.lp, 1.0),
            psd: dims.psd.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.lp.dot(&other.lp) + self.psd.iter().zip(&other.psd).map(|(a, b)| a.dot(b)).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        self.lp.axpy(alpha, &other.lp, 1.0);
        for (a, b) in self.psd.iter_mut().zip(&other.psd) {
            *a += b * alpha;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.lp *= alpha;
        for a in &mut self.psd {
            *a *= alpha;
        }
    }

    /// `-min eig` over all blocks (the shift needed to enter the cone).
    pub fn max_violation(&self) -> f64 {
        let mut worst = self.lp.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(-v));
        for a in &self.psd {
            let sym = (a + a.transpose()) * 0.5;
            worst = worst.max(-sym.symmetric_eigenvalues().min());
        }
        worst
    }

    /// Jordan product `(ab + ba)/2` blockwise.
    pub fn jordan(&self, other: &Self) -> Self {
        Self {
            lp: self.lp.component_mul(&other.lp),
            psd: self
                .psd
                .iter()
                .zip(&other.psd)
                .map(|(a, b)| (a * b + b * a) * 0.5)
                .collect(),
        }
    }
}

/// Scaled point `λ`, diagonal in every PSD block.
#[derive(Clone, Debug)]
pub(crate) struct Lambda {
    pub lp: DVector<f64>,
    pub psd: Vec<DVector<f64>>,
}

impl Lambda {
    pub fn norm_sq(&self) -> f64 {
        self.lp.norm_squared() + self.psd.iter().map(|l| l.norm_squared()).sum::<f64>()
    }

    #[cfg(test)]
    pub fn to_cone(&self) -> ConeVec {
        ConeVec {
            lp: self.lp.clone(),
            psd: self.psd.iter().map(DMatrix::from_diagonal).collect(),
        }
    }

    /// `λ ∘ λ`.
    pub fn square(&self) -> ConeVec {
        ConeVec {
            lp: self.lp.component_mul(&self.lp),
            psd: self
                .psd
                .iter()
                .map(|l| DMatrix::from_diagonal(&l.component_mul(l)))
                .collect(),
        }
    }

    /// Solves `λ ∘ q = u` for `q`.
    pub fn inv_product(&self, u: &ConeVec) -> ConeVec {
        ConeVec {
            lp: u.lp.component_div(&self.lp),
            psd: self
                .psd
                .iter()
                .zip(&u.psd)
                .map(|(l, m)| DMatrix::from_fn(l.len(), l.len(), |i, j| 2.0 * m[(i, j)] / (l[i] + l[j])))
                .collect(),
        }
    }

    /// Largest `α` with `λ + α d` in the cone (infinite if unbounded).
    pub fn max_step(&self, d: &ConeVec) -> f64 {
        let mut alpha = f64::INFINITY;
        for (l, v) in self.lp.iter().zip(d.lp.iter()) {
            if *v < 0.0 {
                alpha = alpha.min(-l / v);
            }
        }
        for (l, m) in self.psd.iter().zip(&d.psd) {
            let n = l.len();
            let inv_sqrt: Vec<f64> = l.iter().map(|v| 1.0 / v.sqrt()).collect();
            let scaled = DMatrix::from_fn(n, n, |i, j| {
                0.5 * (m[(i, j)] + m[(j, i)]) * inv_sqrt[i] * inv_sqrt[j]
            });
            let lo = scaled.symmetric_eigenvalues().min();
            if lo < 0.0 {
                alpha = alpha.min(-1.0 / lo);
            }
        }
        alpha
    }
}

/// Nesterov-Todd scaling `W` with `W z = W⁻ᵀ s = λ`.
///
/// LP part: `W = diag(d)`, `d = sqrt(s/z)`. PSD part: `W u = rᵀ u r` and
/// `rti = r⁻ᵀ` is carried alongside so no inverse is ever formed.
#[derive(Clone, Debug)]
pub(crate) struct Scaling {
    pub d: DVector<f64>,
    pub r: Vec<DMatrix<f64>>,
    pub rti: Vec<DMatrix<f64>>,
}

fn nt_block(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    let ls = ((s + s.transpose()) * 0.5).cholesky()?.unpack();
    let lz = ((z + z.transpose()) * 0.5).cholesky()?.unpack();
    // nalgebra's SVD loses accuracy on clustered singular values, which are
    // the norm near an optimum; faer's is reliable there.
    let m = lz.transpose() * &ls;
    let n = m.nrows();
    let svd = MatRef::from_column_major_slice(m.as_slice(), n, n).svd().ok()?;
    let u = DMatrix::from_fn(n, n, |i, j| svd.U()[(i, j)]);
    let v = DMatrix::from_fn(n, n, |i, j| svd.V()[(i, j)]);
    let lam = DVector::from_fn(n, |i, _| svd.S()[i]);
    if lam.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return None;
    }
    let isq = DMatrix::from_diagonal(&lam.map(|l| 1.0 / l.sqrt()));
    let r = ls * v * &isq;
    let rti = lz * u * isq;
    Some((r, rti, lam))
}

impl Scaling {
    pub fn identity(dims: &Dims) -> Self {
        Self {
            d: DVector::from_element(dims.lp, 1.0),
            r: dims.psd.iter().map(|&n| DMatrix::identity(n, n)).collect(),
            rti: dims.psd.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        }
    }

    /// Scaling point of an interior pair `(s, z)`.
    pub fn nesterov_todd(s: &ConeVec, z: &ConeVec) -> Option<(Self, Lambda)> {
        if s.lp.iter().chain(z.lp.iter()).any(|&v| !(v > 0.0)) {
            return None;
        }
        let d = s.lp.zip_map(&z.lp, |a, b| (a / b).sqrt());
        let lam_lp = s.lp.zip_map(&z.lp, |a, b| (a * b).sqrt());
        let mut r = Vec::with_capacity(s.psd.len());
        let mut rti = Vec::with_capacity(s.psd.len());
        let mut lam = Vec::with_capacity(s.psd.len());
        for (sb, zb) in s.psd.iter().zip(&z.psd) {
            let (rb, tb, lb) = nt_block(sb, zb)?;
            r.push(rb);
            rti.push(tb);
            lam.push(lb);
        }
        Some((Self { d, r, rti }, Lambda { lp: lam_lp, psd: lam }))
    }

    /// Moves the scaling to the point `(λ + α ds, λ + α dz)` given in scaled
    /// coordinates and returns the new `λ`.
    pub fn update(&mut self, lam: &Lambda, ds: &ConeVec, dz: &ConeVec, alpha: f64) -> Option<Lambda> {
        let mut new_lp = DVector::zeros(lam.lp.len());
        for i in 0..lam.lp.len() {
            let s = lam.lp[i] + alpha * ds.lp[i];
            let z = lam.lp[i] + alpha * dz.lp[i];
            if !(s > 0.0 && z > 0.0) {
                return None;
            }
            self.d[i] *= (s / z).sqrt();
            new_lp[i] = (s * z).sqrt();
        }
        let mut new_psd = Vec::with_capacity(lam.psd.len());
        for (k, l) in lam.psd.iter().enumerate() {
            let base = DMatrix::from_diagonal(l);
            let s = &base + &ds.psd[k] * alpha;
            let z = &base + &dz.psd[k] * alpha;
            let (rb, tb, lb) = nt_block(&s, &z)?;
            self.r[k] = &self.r[k] * rb;
            self.rti[k] = &self.rti[k] * tb;
            new_psd.push(lb);
        }
        Some(Lambda {
            lp: new_lp,
            psd: new_psd,
        })
    }

    /// `W u`.
    pub fn w(&self, u: &ConeVec) -> ConeVec {
        ConeVec {
            lp: self.d.component_mul(&u.lp),
            psd: self.r.iter().zip(&u.psd).map(|(r, m)| r.transpose() * m * r).collect(),
        }
    }

    /// `Wᵀ u`.
    pub fn wt(&self, u: &ConeVec) -> ConeVec {
        ConeVec {
            lp: self.d.component_mul(&u.lp),
            psd: self.r.iter().zip(&u.psd).map(|(r, m)| r * m * r.transpose()).collect(),
        }
    }

    /// `W⁻¹ u`.
    pub fn winv(&self, u: &ConeVec) -> ConeVec {
        ConeVec {
            lp: u.lp.component_div(&self.d),
            psd: self.rti.iter().zip(&u.psd).map(|(t, m)| t * m * t.transpose()).collect(),
        }
    }

    /// `WᵀW u`.
    pub fn wtw(&self, u: &ConeVec) -> ConeVec {
        ConeVec {
            lp: u.lp.zip_map(&self.d, |v, d| v * d * d),
            psd: self
                .r
                .iter()
                .zip(&u.psd)
                .map(|(r, m)| {
                    let y = r * r.transpose();
                    &y * m * &y
                })
                .collect(),
        }
    }

    /// `(WᵀW)⁻¹ u`.
    pub fn wtw_inv(&self, u: &ConeVec) -> ConeVec {
        ConeVec {
            lp: u.lp.zip_map(&self.d, |v, d| v / (d * d)),
            psd: self
                .rti
                .iter()
                .zip(&u.psd)
                .map(|(t, m)| {
                    let y = t * t.transpose();
                    &y * m * &y
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: f64) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) as f64 * seed).sin());
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn nt_point_maps_both_sides_to_lambda() {
        let dims = Dims { lp: 2, psd: vec![4] };
        let s = ConeVec {
            lp: DVector::from_vec(vec![1.0, 4.0]),
            psd: vec![spd(4, 0.3)],
        };
        let z = ConeVec {
            lp: DVector::from_vec(vec![9.0, 0.25]),
            psd: vec![spd(4, 1.7)],
        };
        let (w, lam) = Scaling::nesterov_todd(&s, &z).unwrap();
        let wz = w.w(&z);
        // W⁻ᵀ s = Wᵀ-inverse; check via s = Wᵀ λ instead.
        let ws = w.wt(&lam.to_cone());
        let lz = w.winv(&lam.to_cone());
        let l = lam.to_cone();
        let mut e1 = wz.clone();
        e1.axpy(-1.0, &l);
        let mut e2 = ws;
        e2.axpy(-1.0, &s);
        let mut e3 = lz;
        e3.axpy(-1.0, &z);
        assert!(e1.norm() < 1e-10 && e2.norm() < 1e-10 && e3.norm() < 1e-10);
        let _ = dims;
    }

    #[test]
    fn incremental_update_matches_direct_scaling() {
        let s = ConeVec {
            lp: DVector::from_vec(vec![2.0]),
            psd: vec![spd(3, 0.9)],
        };
        let z = ConeVec {
            lp: DVector::from_vec(vec![0.5]),
            psd: vec![spd(3, 2.3)],
        };
        let (mut w, lam) = Scaling::nesterov_todd(&s, &z).unwrap();
        let dims = Dims { lp: 1, psd: vec![3] };
        let mut ds = ConeVec::identity(&dims);
        ds.scale(0.1);
        let mut dz = ConeVec::zeros(&dims);
        dz.psd[0][(0, 1)] = 0.05;
        dz.psd[0][(1, 0)] = 0.05;
        let new_lam = w.update(&lam, &ds, &dz, 1.0).unwrap();
        // Recover unscaled iterates and compare with a direct computation.
        let mut s_new = lam.to_cone();
        s_new.axpy(1.0, &ds);
        let s_new = Scaling::nesterov_todd(&s, &z).unwrap().0.wt(&s_new);
        let mut z_new = lam.to_cone();
        z_new.axpy(1.0, &dz);
        let z_new = Scaling::nesterov_todd(&s, &z).unwrap().0.winv(&z_new);
        let (_, direct) = Scaling::nesterov_todd(&s_new, &z_new).unwrap();
        let mut a: Vec<f64> = new_lam.psd[0].iter().copied().collect();
        let mut b: Vec<f64> = direct.psd[0].iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!((new_lam.lp[0] - direct.lp[0]).abs() < 1e-12);
    }

    #[test]
    fn inverse_jordan_product() {
        let lam = Lambda {
            lp: DVector::from_vec(vec![2.0]),
            psd: vec![DVector::from_vec(vec![1.0, 3.0])],
        };
        let u = ConeVec {
            lp: DVector::from_vec(vec![4.0]),
            psd: vec![DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 5.0])],
        };
        let q = lam.inv_product(&u);
        let back = lam.to_cone().jordan(&q);
        let mut diff = back;
        diff.axpy(-1.0, &u);
        assert!(diff.norm() < 1e-14);
    }

    #[test]
    fn max_step_hits_boundary() {
        let lam = Lambda {
            lp: DVector::from_vec(vec![1.0]),
            psd: vec![DVector::from_vec(vec![1.0, 4.0])],
        };
        let d = ConeVec {
            lp: DVector::from_vec(vec![-0.5]),
            psd: vec![DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0]))],
        };
        assert!((lam.max_step(&d) - 2.0).abs() < 1e-12);
    }
}
