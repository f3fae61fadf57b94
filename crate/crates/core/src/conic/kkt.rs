//! Normal-equation factorization of the scaled KKT system
//!
//! ```text
//! [ 0  Aᵀ  Gᵀ    ] [ux]   [bx]
//! [ A  0   0     ] [uy] = [by]
//! [ G  0  -WᵀW   ] [uz]   [bz]
//! ```
//!
//! via `H = Gᵀ(WᵀW)⁻¹G`. Variables that only occur in affine rows, at most
//! one per row, give a diagonal block of `H` and are eliminated first.

use faer::linalg::solvers::{Llt, Solve};
use faer::{Accum, Mat, MatRef, Par, Side};
use nalgebra::{DMatrix, DVector};

use crate::linalg;

use super::cone::{ConeVec, Dims, Scaling};
use super::{ConicProgram, LmiTerms};

const REFINE_STEPS: usize = 3;

#[derive(Clone, Copy, Debug)]
enum Slot {
    Coupled(usize),
    Only(usize),
}

/// Program data arranged for repeated factorization.
pub(crate) struct Structure<'a> {
    pub prog: &'a ConicProgram,
    pub dims: Dims,
    slots: Vec<Slot>,
    n_coupled: usize,
    n_only: usize,
    /// Reduced equality rows restricted to coupled variables (`r × n_c`).
    a_c: Mat<f64>,
    /// Full reduced equality matrix over all variables.
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Maps reduced-row multipliers back to original rows.
    pub y_map: DMatrix<f64>,
    pub h: ConeVec,
}

/// Replaces `A x = b` by an orthonormal row basis of `A`. Returns `None` when
/// `b` is not in the range of `A`.
fn reduce_equalities(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Option<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let m = a.nrows();
    let n = a.ncols();
    if m == 0 {
        return Some((DMatrix::zeros(0, n), DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    let svd = linalg::thin_svd(a).ok()?;
    let vmat = &svd.v;
    let umat = &svd.u;
    let sig = &svd.s;
    let smax = sig.max();
    let keep: Vec<usize> = (0..sig.len()).filter(|&k| sig[k] > 1e-10 * smax).collect();
    let r = keep.len();
    let mut a_red = DMatrix::zeros(r, n);
    let mut b_red = DVector::zeros(r);
    let mut y_map = DMatrix::zeros(m, r);
    for (row, &k) in keep.iter().enumerate() {
        a_red.set_row(row, &vmat.column(k).transpose());
        let uk = umat.column(k);
        b_red[row] = uk.dot(b) / sig[k];
        y_map.set_column(row, &(uk / sig[k]));
    }
    let mut proj = DVector::zeros(m);
    for &k in &keep {
        let uk = umat.column(k);
        proj += uk * uk.dot(b);
    }
    let bn = b.norm();
    if (b - proj).norm() > 1e-9 * bn.max(1.0) {
        return None;
    }
    Some((a_red, b_red, y_map))
}

impl<'a> Structure<'a> {
    pub fn new(prog: &'a ConicProgram) -> Option<Self> {
        let n = prog.num_vars;
        let dims = Dims {
            lp: prog.linear.len(),
            psd: prog.lmis.iter().map(|b| b.dim()).collect(),
        };
        let (a, b, y_map) = match &prog.equalities {
            Some(eq) => reduce_equalities(&eq.matrix, &eq.rhs)?,
            None => (DMatrix::zeros(0, n), DVector::zeros(0), DMatrix::zeros(0, 0)),
        };

        let mut candidate = vec![true; n];
        let mut in_rows = vec![false; n];
        for block in &prog.lmis {
            for v in block.vars() {
                candidate[v] = false;
            }
        }
        for j in 0..n {
            if a.column(j).amax() > 0.0 {
                candidate[j] = false;
            }
        }
        for row in &prog.linear {
            for &(v, _) in &row.coeffs {
                in_rows[v] = true;
            }
        }
        for j in 0..n {
            candidate[j] &= in_rows[j];
        }
        for row in &prog.linear {
            let count = row.coeffs.iter().filter(|(v, _)| candidate[*v]).count();
            if count > 1 {
                for &(v, _) in &row.coeffs {
                    candidate[v] = false;
                }
            }
        }
        let mut slots = Vec::with_capacity(n);
        let (mut nc, mut no) = (0, 0);
        for &is_only in &candidate {
            if is_only {
                slots.push(Slot::Only(no));
                no += 1;
            } else {
                slots.push(Slot::Coupled(nc));
                nc += 1;
            }
        }
        let mut a_c = Mat::zeros(a.nrows(), nc);
        for j in 0..n {
            if let Slot::Coupled(c) = slots[j] {
                for i in 0..a.nrows() {
                    a_c[(i, c)] = a[(i, j)];
                }
            }
        }
        let h = ConeVec {
            lp: DVector::from_iterator(prog.linear.len(), prog.linear.iter().map(|r| r.constant)),
            psd: prog.lmis.iter().map(|b| b.constant.clone()).collect(),
        };
        Some(Self {
            prog,
            dims,
            slots,
            n_coupled: nc,
            n_only: no,
            a_c,
            a,
            b,
            y_map,
            h,
        })
    }

    pub fn eq_rows(&self) -> usize {
        self.a.nrows()
    }

    /// `G x` where `s = h - G x` is the slack.
    pub fn g(&self, x: &[f64]) -> ConeVec {
        let lp = DVector::from_iterator(
            self.prog.linear.len(),
            self.prog
                .linear
                .iter()
                .map(|r| -r.coeffs.iter().map(|&(i, a)| a * x[i]).sum::<f64>()),
        );
        let psd = self.prog.lmis.iter().map(|b| -b.linear_part(x)).collect();
        ConeVec { lp, psd }
    }

    /// `Gᵀ z`.
    pub fn gt(&self, z: &ConeVec) -> DVector<f64> {
        let mut out = vec![0.0; self.prog.num_vars];
        for (k, row) in self.prog.linear.iter().enumerate() {
            for &(i, a) in &row.coeffs {
                out[i] -= a * z.lp[k];
            }
        }
        let mut psd = vec![0.0; self.prog.num_vars];
        for (block, zb) in self.prog.lmis.iter().zip(&z.psd) {
            block.adjoint_into(zb, &mut psd);
        }
        DVector::from_iterator(out.len(), out.iter().zip(&psd).map(|(a, b)| a - b))
    }

    /// Factors the normal equations for the current scaling.
    pub fn factor(&self, w: &Scaling) -> Option<Factor> {
        let nc = self.n_coupled;
        let mut hcc = Mat::<f64>::zeros(nc, nc);
        let mut hoo = vec![0.0; self.n_only];
        let mut hco: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_only];

        for (k, row) in self.prog.linear.iter().enumerate() {
            let wk = 1.0 / (w.d[k] * w.d[k]);
            let only = row.coeffs.iter().find_map(|&(v, a)| match self.slots[v] {
                Slot::Only(o) => Some((o, a)),
                Slot::Coupled(_) => None,
            });
            for &(v1, a1) in &row.coeffs {
                if let Slot::Coupled(c1) = self.slots[v1] {
                    for &(v2, a2) in &row.coeffs {
                        if let Slot::Coupled(c2) = self.slots[v2] {
                            hcc[(c1, c2)] += wk * a1 * a2;
                        }
                    }
                    if let Some((o, ao)) = only {
                        hco[o].push((c1, wk * a1 * ao));
                    }
                }
            }
            if let Some((o, ao)) = only {
                hoo[o] += wk * ao * ao;
            }
        }

        for (block, rti) in self.prog.lmis.iter().zip(&w.rti) {
            let rt = MatRef::from_column_major_slice(rti.as_slice(), rti.nrows(), rti.ncols());
            match &block.terms {
                LmiTerms::LowRank {
                    factors,
                    scales,
                    vars,
                } => {
                    let u = MatRef::from_column_major_slice(factors.as_slice(), factors.nrows(), factors.ncols());
                    let kk = factors.ncols();
                    let mut t = Mat::<f64>::zeros(rti.ncols(), kk);
                    faer::linalg::matmul::matmul(t.as_mut(), Accum::Replace, rt.transpose(), u, 1.0, Par::Seq);
                    let mut c = Mat::<f64>::zeros(kk, kk);
                    faer::linalg::matmul::matmul(c.as_mut(), Accum::Replace, t.transpose(), t.as_ref(), 1.0, Par::Seq);
                    let idx: Vec<usize> = vars.iter().map(|&v| self.coupled(v)).collect();
                    let contiguous = idx.windows(2).all(|p| p[1] == p[0] + 1);
                    for j in 0..kk {
                        let sj = scales[j];
                        let cj = c.col_as_slice(j);
                        let hcol = hcc.col_as_slice_mut(idx[j]);
                        if contiguous {
                            let dst = &mut hcol[idx[0]..idx[0] + kk];
                            for ((h, &cij), &si) in dst.iter_mut().zip(cj).zip(scales) {
                                *h += si * sj * cij * cij;
                            }
                        } else {
                            for i in 0..kk {
                                hcol[idx[i]] += scales[i] * sj * cj[i] * cj[i];
                            }
                        }
                    }
                }
                LmiTerms::Dense(mats) => {
                    let nb = block.dim();
                    let kk = mats.len();
                    let mut vecs = Mat::<f64>::zeros(nb * nb, kk);
                    for (j, (_, f)) in mats.iter().enumerate() {
                        let tj = rti.transpose() * f * rti;
                        for (p, v) in tj.iter().enumerate() {
                            vecs[(p, j)] = *v;
                        }
                    }
                    let mut g = Mat::<f64>::zeros(kk, kk);
                    faer::linalg::matmul::matmul(g.as_mut(), Accum::Replace, vecs.transpose(), vecs.as_ref(), 1.0, Par::Seq);
                    let idx: Vec<usize> = mats.iter().map(|(v, _)| self.coupled(*v)).collect();
                    for j in 0..kk {
                        for i in 0..kk {
                            hcc[(idx[i], idx[j])] += g[(i, j)];
                        }
                    }
                }
            }
        }

        for o in 0..self.n_only {
            let inv = 1.0 / hoo[o];
            for &(c1, v1) in &hco[o] {
                for &(c2, v2) in &hco[o] {
                    hcc[(c1, c2)] -= v1 * v2 * inv;
                }
            }
        }

        let (llt, augmented) = match hcc.llt(Side::Lower) {
            Ok(l) => (l, false),
            Err(_) => {
                if self.a_c.nrows() == 0 {
                    return None;
                }
                let mut aug = hcc.clone();
                faer::linalg::matmul::matmul(
                    aug.as_mut(),
                    Accum::Add,
                    self.a_c.transpose(),
                    self.a_c.as_ref(),
                    1.0,
                    Par::Seq,
                );
                (aug.llt(Side::Lower).ok()?, true)
            }
        };

        let r = self.a_c.nrows();
        let (z, s_llt) = if r > 0 {
            let mut z = self.a_c.transpose().to_owned();
            faer::linalg::triangular_solve::solve_lower_triangular_in_place(llt.L(), z.as_mut(), Par::Seq);
            let mut s = Mat::<f64>::zeros(r, r);
            faer::linalg::matmul::matmul(s.as_mut(), Accum::Replace, z.transpose(), z.as_ref(), 1.0, Par::Seq);
            (z, Some(s.llt(Side::Lower).ok()?))
        } else {
            (Mat::zeros(nc, 0), None)
        };
        Some(Factor {
            llt,
            augmented,
            z,
            s_llt,
            hoo,
            hco,
        })
    }

    fn coupled(&self, v: usize) -> usize {
        match self.slots[v] {
            Slot::Coupled(c) => c,
            Slot::Only(_) => unreachable!("matrix-block variable classified as affine-only"),
        }
    }

    /// Solves the KKT system with a few steps of iterative refinement; `uz` is
    /// returned unscaled.
    pub fn solve(
        &self,
        f: &Factor,
        w: &Scaling,
        bx: &DVector<f64>,
        by: &DVector<f64>,
        bz: &ConeVec,
    ) -> (DVector<f64>, DVector<f64>, ConeVec) {
        let (mut ux, mut uy, mut uz) = self.solve_once(f, w, bx, by, bz);
        for _ in 0..REFINE_STEPS {
            let ex = bx - self.a.transpose() * &uy - self.gt(&uz);
            let ey = by - &self.a * &ux;
            let mut ez = bz.clone();
            ez.axpy(-1.0, &self.g(ux.as_slice()));
            ez.axpy(1.0, &w.wtw(&uz));
            let (dx, dy, dz) = self.solve_once(f, w, &ex, &ey, &ez);
            let small = dx.norm() <= 1e-12 * (1.0 + ux.norm());
            ux += dx;
            uy += dy;
            uz.axpy(1.0, &dz);
            if small {
                break;
            }
        }
        (ux, uy, uz)
    }

    fn solve_once(
        &self,
        f: &Factor,
        w: &Scaling,
        bx: &DVector<f64>,
        by: &DVector<f64>,
        bz: &ConeVec,
    ) -> (DVector<f64>, DVector<f64>, ConeVec) {
        let n = self.prog.num_vars;
        let t = w.wtw_inv(bz);
        let rhs = bx + self.gt(&t);

        let mut rc = Mat::<f64>::zeros(self.n_coupled, 1);
        let mut ro = vec![0.0; self.n_only];
        for j in 0..n {
            match self.slots[j] {
                Slot::Coupled(c) => rc[(c, 0)] = rhs[j],
                Slot::Only(o) => ro[o] = rhs[j],
            }
        }
        for o in 0..self.n_only {
            let scale = ro[o] / f.hoo[o];
            for &(c, v) in &f.hco[o] {
                rc[(c, 0)] -= v * scale;
            }
        }
        let r = self.a_c.nrows();
        if f.augmented {
            for i in 0..r {
                for c in 0..self.n_coupled {
                    rc[(c, 0)] += self.a_c[(i, c)] * by[i];
                }
            }
        }

        // w = L⁻¹ r
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(f.llt.L(), rc.as_mut(), Par::Seq);
        let mut uy = DVector::zeros(r);
        if let Some(s_llt) = &f.s_llt {
            let mut y = Mat::<f64>::zeros(r, 1);
            faer::linalg::matmul::matmul(y.as_mut(), Accum::Replace, f.z.transpose(), rc.as_ref(), 1.0, Par::Seq);
            for i in 0..r {
                y[(i, 0)] -= by[i];
            }
            s_llt.solve_in_place(y.as_mut());
            faer::linalg::matmul::matmul(rc.as_mut(), Accum::Add, f.z.as_ref(), y.as_ref(), -1.0, Par::Seq);
            for i in 0..r {
                uy[i] = y[(i, 0)];
            }
        }
        faer::linalg::triangular_solve::solve_upper_triangular_in_place(
            f.llt.L().transpose(),
            rc.as_mut(),
            Par::Seq,
        );

        let mut ux = DVector::zeros(n);
        for j in 0..n {
            if let Slot::Coupled(c) = self.slots[j] {
                ux[j] = rc[(c, 0)];
            }
        }
        for j in 0..n {
            if let Slot::Only(o) = self.slots[j] {
                let coupling: f64 = f.hco[o].iter().map(|&(c, v)| v * rc[(c, 0)]).sum();
                ux[j] = (ro[o] - coupling) / f.hoo[o];
            }
        }
        let mut gx = self.g(ux.as_slice());
        gx.axpy(-1.0, bz);
        let uz = w.wtw_inv(&gx);
        (ux, uy, uz)
    }
}

pub(crate) struct Factor {
    llt: Llt<f64>,
    augmented: bool,
    z: Mat<f64>,
    s_llt: Option<Llt<f64>>,
    hoo: Vec<f64>,
    hco: Vec<Vec<(usize, f64)>>,
}
