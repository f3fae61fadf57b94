use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::cone::{ConeVec, Lambda, Scaling};
use super::kkt::{Factor, Structure};
use super::{ConicProgram, ConicSolution, ConicSolver, SolveStatus};
use crate::error::{Error, Result};

/// Homogeneous self-dual primal-dual interior-point method with
/// Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteriorPoint {
    /// Relative feasibility and gap tolerance.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for InteriorPoint {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100,
            step_fraction: 0.99,
        }
    }
}

impl InteriorPoint {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }
}

#[derive(Clone)]
struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    /// Slack and dual kept explicitly; recomputing them from `w` and `lam`
    /// drifts once the scaling becomes ill-conditioned.
    s: ConeVec,
    z: ConeVec,
    tau: f64,
    kappa: f64,
    w: Scaling,
    lam: Lambda,
}

#[derive(Clone, Copy)]
struct Metrics {
    pres: f64,
    dres: f64,
    pcost: f64,
    dcost: f64,
    gap: f64,
    relgap: f64,
    pinf: f64,
    dinf: f64,
}

struct Residuals {
    rx: DVector<f64>,
    ry: DVector<f64>,
    rz: ConeVec,
    rt: f64,
}

struct Direction {
    x: DVector<f64>,
    y: DVector<f64>,
    /// Scaled `W⁻ᵀ Δs` and `W Δz`.
    s: ConeVec,
    z: ConeVec,
    tau: f64,
    kappa: f64,
}

impl ConicSolver for InteriorPoint {
    fn solve(&self, prog: &ConicProgram) -> Result<ConicSolution> {
        prog.validate()?;
        let st = match Structure::new(prog) {
            Some(s) => s,
            None => {
                return Ok(infeasible_equalities(prog));
            }
        };
        Solver { opts: *self, st: &st }.run()
    }
}

fn infeasible_equalities(prog: &ConicProgram) -> ConicSolution {
    ConicSolution {
        status: SolveStatus::PrimalInfeasible,
        x: vec![0.0; prog.num_vars],
        equality_duals: Vec::new(),
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        iterations: 0,
        primal_residual: f64::INFINITY,
        dual_residual: f64::NAN,
        gap: f64::NAN,
    }
}

struct Solver<'a> {
    opts: InteriorPoint,
    st: &'a Structure<'a>,
}

impl Solver<'_> {
    fn c(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.st.prog.objective)
    }

    fn initial(&self) -> Result<Iterate> {
        let st = self.st;
        let n = st.prog.num_vars;
        let eye = Scaling::identity(&st.dims);
        let f = st
            .factor(&eye)
            .ok_or_else(|| Error::Solver("singular normal equations at the starting point".into()))?;
        // x, s: least-squares fit of G x ≈ h subject to A x = b.
        let (x, _, uz) = st.solve(&f, &eye, &DVector::zeros(n), &st.b, &st.h);
        let mut s = uz;
        s.scale(-1.0);
        // y, z: least-norm z with Gᵀz + Aᵀy + c = 0.
        let (_, y, mut z) = st.solve(
            &f,
            &eye,
            &(-self.c()),
            &DVector::zeros(st.eq_rows()),
            &ConeVec::zeros(&st.dims),
        );
        let e = ConeVec::identity(&st.dims);
        for v in [&mut s, &mut z] {
            let shift = v.max_violation();
            if shift >= -1e-8 * v.norm().max(1.0) {
                v.axpy(1.0 + shift, &e);
            }
        }
        let (w, lam) = Scaling::nesterov_todd(&s, &z)
            .ok_or_else(|| Error::Solver("failed to scale the starting point".into()))?;
        Ok(Iterate {
            x,
            y,
            s,
            z,
            tau: 1.0,
            kappa: 1.0,
            w,
            lam,
        })
    }

    fn residuals(&self, it: &Iterate, s: &ConeVec, z: &ConeVec) -> Residuals {
        let st = self.st;
        let c = self.c();
        let rx = st.a.transpose() * &it.y + st.gt(z) + &c * it.tau;
        let ry = &st.b * it.tau - &st.a * &it.x;
        let mut rz = st.g(it.x.as_slice());
        rz.scale(-1.0);
        rz.axpy(it.tau, &st.h);
        rz.axpy(-1.0, s);
        let rt = -c.dot(&it.x) - st.b.dot(&it.y) - st.h.dot(z) - it.kappa;
        Residuals { rx, ry, rz, rt }
    }

    fn metrics(&self, it: &Iterate, s: &ConeVec, z: &ConeVec, r: &Residuals) -> Metrics {
        let st = self.st;
        let c = self.c();
        let resx0 = c.norm().max(1.0);
        let resy0 = st.b.norm().max(1.0);
        let resz0 = st.h.norm().max(1.0);
        let cx = c.dot(&it.x);
        let byhz = st.b.dot(&it.y) + st.h.dot(z);
        let pres = (r.ry.norm() / resy0).max(r.rz.norm() / resz0) / it.tau;
        let dres = r.rx.norm() / resx0 / it.tau;
        let pcost = cx / it.tau;
        let dcost = -byhz / it.tau;
        let gap = s.dot(z) / (it.tau * it.tau);
        let relgap = if pcost < 0.0 {
            gap / -pcost
        } else if dcost > 0.0 {
            gap / dcost
        } else {
            f64::INFINITY
        };
        let pinf = if byhz < 0.0 {
            (st.a.transpose() * &it.y + st.gt(z)).norm() / resx0 / -byhz
        } else {
            f64::INFINITY
        };
        let dinf = if cx < 0.0 {
            let ax = (&st.a * &it.x).norm() / resy0;
            let mut gs = st.g(it.x.as_slice());
            gs.axpy(1.0, s);
            ax.max(gs.norm() / resz0) / -cx
        } else {
            f64::INFINITY
        };
        Metrics {
            pres,
            dres,
            pcost,
            dcost,
            gap,
            relgap,
            pinf,
            dinf,
        }
    }

    /// Newton direction for complementarity targets `xi` (cone) and `xi_tau`,
    /// with linear residuals reduced by the factor `eta`.
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        it: &Iterate,
        f: &Factor,
        first: &(DVector<f64>, DVector<f64>, ConeVec),
        r: &Residuals,
        eta: f64,
        xi: &ConeVec,
        xi_tau: f64,
    ) -> Direction {
        let st = self.st;
        let c = self.c();
        let q = it.lam.inv_product(xi);
        let mut bz = it.w.wt(&q);
        bz.scale(-1.0);
        bz.axpy(eta, &r.rz);
        let (x2, y2, z2) = st.solve(f, &it.w, &(&r.rx * -eta), &(&r.ry * eta), &bz);
        let (x1, y1, z1) = first;
        let wz1 = it.w.w(z1).norm();
        let num = -eta * r.rt + c.dot(&x2) + st.b.dot(&y2) + st.h.dot(&z2) + xi_tau / it.tau;
        let den = it.kappa / it.tau + wz1 * wz1;
        let dtau = num / den;
        let dx = x2 + x1 * dtau;
        let dy = y2 + y1 * dtau;
        let mut dz = z2;
        dz.axpy(dtau, z1);
        let dz_scaled = it.w.w(&dz);
        let mut ds_scaled = q;
        ds_scaled.axpy(-1.0, &dz_scaled);
        let dkappa = (xi_tau - it.kappa * dtau) / it.tau;
        Direction {
            x: dx,
            y: dy,
            s: ds_scaled,
            z: dz_scaled,
            tau: dtau,
            kappa: dkappa,
        }
    }

    fn max_step(it: &Iterate, d: &Direction) -> f64 {
        let mut a = it.lam.max_step(&d.s).min(it.lam.max_step(&d.z));
        if d.tau < 0.0 {
            a = a.min(-it.tau / d.tau);
        }
        if d.kappa < 0.0 {
            a = a.min(-it.kappa / d.kappa);
        }
        a
    }

    fn finish(&self, it: &Iterate, status: SolveStatus, iterations: usize, m: &Metrics) -> ConicSolution {
        let x: Vec<f64> = (&it.x / it.tau).iter().copied().collect();
        let y = &it.y / it.tau;
        let equality_duals = if self.st.eq_rows() > 0 {
            (&self.st.y_map * y).iter().copied().collect()
        } else {
            vec![0.0; self.st.prog.equalities.as_ref().map_or(0, |e| e.rhs.len())]
        };
        ConicSolution {
            status,
            primal_objective: self.st.prog.objective_value(&x),
            x,
            equality_duals,
            dual_objective: m.dcost,
            iterations,
            primal_residual: m.pres,
            dual_residual: m.dres,
            gap: m.gap,
        }
    }

    fn run(&self) -> Result<ConicSolution> {
        let st = self.st;
        let tol = self.opts.tolerance;
        let degree = st.dims.degree() as f64;
        let mut it = self.initial()?;
        let mut best: Option<(f64, Iterate, Metrics, usize)> = None;

        for iter in 0..=self.opts.max_iterations {
            let (s, z) = (it.s.clone(), it.z.clone());
            let r = self.residuals(&it, &s, &z);
            let m = self.metrics(&it, &s, &z, &r);
            log::debug!(
                "ipm {iter:3} pcost {:+.6e} dcost {:+.6e} gap {:.1e} pres {:.1e} dres {:.1e} tau {:.1e} kappa {:.1e}",
                m.pcost,
                m.dcost,
                m.gap,
                m.pres,
                m.dres,
                it.tau,
                it.kappa
            );
            if m.pres <= tol && m.dres <= tol && (m.gap <= tol || m.relgap <= tol) {
                return Ok(self.finish(&it, SolveStatus::Optimal, iter, &m));
            }
            if m.pinf <= tol {
                return Ok(self.finish(&it, SolveStatus::PrimalInfeasible, iter, &m));
            }
            if m.dinf <= tol {
                return Ok(self.finish(&it, SolveStatus::DualInfeasible, iter, &m));
            }
            let score = m.pres.max(m.dres).max(m.gap.min(m.relgap));
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, it.clone(), m, iter));
            }
            if iter == self.opts.max_iterations {
                return Ok(self.give_up(best, SolveStatus::MaxIterations));
            }

            let Some(f) = st.factor(&it.w) else {
                return Ok(self.give_up(best, SolveStatus::NumericalFailure));
            };
            let (cvec, b, h) = (self.c(), st.b.clone(), st.h.clone());
            let first = st.solve(&f, &it.w, &(-cvec), &b, &h);
            let mu = (it.lam.norm_sq() + it.tau * it.kappa) / (degree + 1.0);

            let mut xi = it.lam.square();
            xi.scale(-1.0);
            let aff = self.direction(&it, &f, &first, &r, 1.0, &xi, -it.tau * it.kappa);
            let alpha_aff = Self::max_step(&it, &aff).min(1.0);
            let sigma = (1.0 - alpha_aff).powi(3);

            let mut xi = it.lam.square();
            xi.scale(-1.0);
            xi.axpy(sigma * mu, &ConeVec::identity(&st.dims));
            xi.axpy(-1.0, &aff.s.jordan(&aff.z));
            let xi_tau = -it.tau * it.kappa + sigma * mu - aff.tau * aff.kappa;
            let dir = self.direction(&it, &f, &first, &r, 1.0 - sigma, &xi, xi_tau);
            let alpha = (self.opts.step_fraction * Self::max_step(&it, &dir)).min(1.0);
            if !(alpha > 1e-10) {
                return Ok(self.give_up(best, SolveStatus::NumericalFailure));
            }

            let (ds, dz) = (it.w.wt(&dir.s), it.w.winv(&dir.z));
            it.s.axpy(alpha, &ds);
            it.z.axpy(alpha, &dz);
            let Some(lam) = it.w.update(&it.lam, &dir.s, &dir.z, alpha) else {
                return Ok(self.give_up(best, SolveStatus::NumericalFailure));
            };
            it.lam = lam;
            it.x.axpy(alpha, &dir.x, 1.0);
            it.y.axpy(alpha, &dir.y, 1.0);
            it.tau += alpha * dir.tau;
            it.kappa += alpha * dir.kappa;
        }
        Ok(self.give_up(best, SolveStatus::MaxIterations))
    }

    /// Reports the best iterate seen when the method cannot continue.
    fn give_up(&self, best: Option<(f64, Iterate, Metrics, usize)>, otherwise: SolveStatus) -> ConicSolution {
        let (_, it, m, iter) = best.expect("metrics are recorded before any step");
        self.finish(&it, self.fallback_status(&m, otherwise), iter, &m)
    }

    fn fallback_status(&self, m: &Metrics, otherwise: SolveStatus) -> SolveStatus {
        let loose = self.opts.tolerance * 1e3;
        if m.pres <= loose && m.dres <= loose && (m.gap <= loose || m.relgap <= loose) {
            SolveStatus::AlmostOptimal
        } else {
            otherwise
        }
    }
}
