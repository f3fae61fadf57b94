use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::conic::SolveStatus;
use crate::generate::{polygon, random};

fn triangle_centroid() -> (Configuration, Vec<f64>) {
    let s3 = 3f64.sqrt();
    let c = Configuration::from_points(&[
        vec![1.0, 0.0],
        vec![-0.5, s3 / 2.0],
        vec![-0.5, -s3 / 2.0],
        vec![0.0, 0.0],
    ])
    .unwrap();
    (c, vec![-1.0 / 3.0, -1.0 / 3.0, 1.0, -1.0 / 3.0, 1.0, 1.0])
}

#[test]
fn nullspace_operator_matches_matrix_route() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let c = random(9, 3, 5).unwrap();
    let b = complete_incidence(9).unwrap();
    let e = build_nullspace_operator(&c.augmented(), &b).unwrap();
    assert_eq!(e.shape(), (9 * 4, 36));
    for _ in 0..10 {
        let w: Vec<f64> = (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let omega = assemble_stress(&b, &w).unwrap();
        let direct = (omega.matrix() * c.augmented().transpose()).norm();
        let via_e = (&e * DVector::from_vec(w)).norm();
        assert!((direct - via_e).abs() < 1e-10);
    }
    assert_eq!((&e * DVector::zeros(36)).norm(), 0.0);
    let (tc, w) = triangle_centroid();
    let e = build_nullspace_operator(&tc.augmented(), &complete_incidence(4).unwrap()).unwrap();
    assert!((e * DVector::from_vec(w)).norm() < 1e-10);
}

#[test]
fn nullspace_operator_rejects_mismatch() {
    let c = random(5, 2, 1).unwrap();
    assert!(build_nullspace_operator(&c.augmented(), &complete_incidence(6).unwrap()).is_err());
}

#[test]
fn trace_weights_agree_with_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = random(5, 2, 9).unwrap();
    let q = kernel_basis(&c.augmented()).unwrap();
    let b = complete_incidence(5).unwrap();
    let psi = trace_weights(&q, &b).unwrap();
    assert!(psi.iter().all(|&p| p >= 0.0));
    let big_psi = trace_operator(&q, &b).unwrap();
    assert!((psi.sum() - big_psi.norm_squared()).abs() < 1e-12);
    for _ in 0..100 {
        let w: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let omega = assemble_stress(&b, &w).unwrap();
        let tr = (q.transpose() * omega.matrix() * &q).trace();
        assert!((psi.dot(&DVector::from_vec(w)) - tr).abs() < 1e-10);
    }
}

#[test]
fn critical_alpha_arithmetic() {
    let a = critical_alpha(&DVector::from_vec(vec![1.0, 2.0, 4.0])).unwrap();
    assert!((a - 0.25).abs() < 1e-15);
    assert!(critical_alpha(&DVector::zeros(3)).is_err());
    let scaled = apply_scale(&random(8, 2, 3).unwrap(), 7.5);
    let inputs = DesignInputs::new(&scaled).unwrap();
    let a = critical_alpha(&inputs.psi).unwrap();
    assert!(a.is_finite() && a > 0.0);
}

fn apply_scale(c: &Configuration, s: f64) -> Configuration {
    Configuration::new(c.coords() * s).unwrap()
}

#[test]
fn problem_dimensions() {
    let p = assemble_p2(&random(5, 2, 0).unwrap(), &DesignParams::default()).unwrap();
    assert_eq!(p.variable_count(), 20);
    assert_eq!(p.decision_count, 10);
    let p = assemble_p2(&random(50, 2, 0).unwrap(), &DesignParams::default()).unwrap();
    assert_eq!((p.lmi_a_dim, p.lmi_b_dim), (47, 50));
    assert_eq!(p.program.lmis.len(), 2);
    let two = DesignParams {
        two_sided: true,
        ..DesignParams::default()
    };
    assert_eq!(assemble_p2(&random(5, 2, 0).unwrap(), &two).unwrap().program.lmis.len(), 3);
}

#[test]
fn scaled_known_stress_is_feasible() {
    let (c, w) = triangle_centroid();
    let p = assemble_p2(&c, &DesignParams::default()).unwrap();
    // The single nonzero eigenvalue equals the trace, 4; scale it to 0.8.
    let w: Vec<f64> = w.iter().map(|v| v * 0.2).collect();
    let v = p.violation(&w);
    assert!(v.equality < 1e-12 && v.linear == 0.0 && v.psd < 1e-12, "{v:?}");
    let too_big: Vec<f64> = w.iter().map(|v| v * 2.0).collect();
    assert!(p.violation(&too_big).psd > 0.5);
}

#[test]
fn degenerate_configuration_is_rejected() {
    let c = Configuration::from_points(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
    let err = assemble_p2(&c, &DesignParams::default()).unwrap_err();
    assert_eq!(err.kind(), "degenerate-configuration");
}

#[test]
fn solve_random_five() {
    let p = assemble_p2(&random(5, 2, 4).unwrap(), &DesignParams::default()).unwrap();
    let raw = solve_design(&p, &InteriorPoint::default()).unwrap();
    assert_eq!(raw.status, SolveStatus::Optimal);
    let v = p.violation(&raw.decision);
    assert!(v.equality < 1e-7 && v.psd < 1e-7, "{v:?}");
}

#[test]
fn contradictory_spectrum_bounds_are_infeasible() {
    let params = DesignParams {
        beta: 0.05,
        gamma: 0.1,
        ..DesignParams::default()
    };
    let p = assemble_p2(&random(5, 2, 4).unwrap(), &params).unwrap();
    let raw = solve_design(&p, &InteriorPoint::default()).unwrap();
    assert_eq!(raw.status, SolveStatus::PrimalInfeasible);
    let err = design_stress(&random(5, 2, 4).unwrap(), &params).unwrap_err();
    assert_eq!(err.kind(), "solver-failure");
}

#[test]
fn random_eight_design_is_stabilizable() {
    let c = random(8, 2, 1).unwrap();
    let r = design_stress(&c, &DesignParams::default()).unwrap();
    assert!(r.verification.overall);
    assert!(r.spectral.lambda_d2 >= 0.1 - 1e-6);
    assert!(r.spectral.lambda_max <= 1.0 + 1e-6);
    assert!(r.edge_count() <= complete_edge_count_of(8));
    let d = DesignParams {
        two_sided: true,
        ..DesignParams::default()
    };
    let r2 = design_stress(&c, &d).unwrap();
    assert!((r2.objective - r.objective).abs() < 1e-5 * r.objective.abs().max(1.0));
}

fn complete_edge_count_of(n: usize) -> usize {
    n * (n - 1) / 2
}

#[test]
fn octagon_design_is_circulant() {
    let c = polygon(8).unwrap();
    let r = design_stress(&c, &DesignParams::default()).unwrap();
    let m = r.matrix.matrix();
    let mut worst: f64 = 0.0;
    for i in 0..8 {
        for j in 0..8 {
            worst = worst.max((m[(i, j)] - m[((i + 1) % 8, (j + 1) % 8)]).abs());
        }
    }
    assert!(worst < 1e-4, "circulant defect {worst}");
}

#[test]
fn projection_lands_in_kernel() {
    let a = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
    let p = project_onto_kernel(&a, &DVector::from_vec(vec![1.0, 0.0, 3.0]));
    assert!((&a * &p).norm() < 1e-14);
    assert!((p - DVector::from_vec(vec![0.5, -0.5, 3.0])).norm() < 1e-14);
}
