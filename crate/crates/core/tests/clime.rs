mod common;

use common::{clime_column_lp, random_spd, rng};
use diffnet::clime::*;
use diffnet::netfeat::{features_from_scan, partial_correlation, ClimeConfig};
use diffnet::simgen::{ar_covariance, generate_study, whiten, Group, StudyDesign, SubjectScan};
use nalgebra::{DMatrix, DVector};

#[test]
fn columns_match_reference_lp() {
    let mut r = rng(31);
    for p in [2, 4, 7, 9] {
        let sigma = random_spd(&mut r, p);
        let max = sigma.amax();
        for frac in [0.05, 0.2, 0.5] {
            let lambda = frac * max;
            let sol = clime_solve(&sigma, lambda).unwrap();
            for j in 0..p {
                let reference = clime_column_lp(&sigma, j, lambda);
                for i in 0..p {
                    assert!(
                        (sol.columns[(i, j)] - reference[i]).abs() < 1e-6,
                        "p={p} lambda={lambda} entry ({i},{j}): {} vs {}",
                        sol.columns[(i, j)],
                        reference[i]
                    );
                }
            }
            assert!(sol.feasibility_gap <= lambda + 1e-8);
        }
    }
}

#[test]
fn warm_started_path_equals_cold_solves() {
    let mut r = rng(32);
    let sigma = random_spd(&mut r, 8);
    let grid = log_spaced_desc(sigma.amax(), 0.01 * sigma.amax(), 12).unwrap();
    let mut solver = ClimeSolver::new(&sigma).unwrap();
    for &lambda in &grid {
        let warm = solver.solve(lambda).unwrap();
        let cold = clime_solve(&sigma, lambda).unwrap();
        assert!((&warm.columns - &cold.columns).amax() < 1e-9);
    }
}

#[test]
fn symmetric_output_and_zero_at_large_lambda() {
    let mut r = rng(33);
    let sigma = random_spd(&mut r, 6);
    let sol = clime_solve(&sigma, 0.1 * sigma.amax()).unwrap();
    assert_eq!(sol.omega, sol.omega.transpose());
    // lambda >= 1 admits omega_j = 0 for e_j
    let big = clime_solve(&sigma, 1.0).unwrap();
    assert_eq!(big.omega.amax(), 0.0);
}

#[test]
fn dens_rule_moves_density_towards_target() {
    let mut r = rng(34);
    let x = common::normal_matrix(&mut r, 10, 200);
    let s = sample_covariance(&x).unwrap();
    let grid = LambdaGrid::default().resolve(&s).unwrap();
    let (_, sparse) = select_lambda_dens(&s, 0.1, &grid).unwrap();
    let (_, dense) = select_lambda_dens(&s, 0.8, &grid).unwrap();
    assert!(sparse.density() < dense.density());
}

#[test]
fn features_recover_a_strong_partial_correlation() {
    // chain precision: neighbours are conditionally dependent, others not
    let p = 5;
    let omega = DMatrix::from_fn(p, p, |i, j| match i.abs_diff(j) {
        0 => 1.0,
        1 => 0.45,
        _ => 0.0,
    });
    let sigma = omega.clone().try_inverse().unwrap();
    let chol = sigma.cholesky().unwrap().l();
    let mut r = rng(35);
    let data = &chol * common::normal_matrix(&mut r, p, 2000);
    let scan = SubjectScan {
        data,
        group: Group::Case,
        dataset: 0,
        confounders: DVector::zeros(0),
    };
    let f = features_from_scan(&scan, &ClimeConfig::default()).unwrap();
    let truth = partial_correlation(&omega).unwrap();
    let mut weakest_edge = f64::INFINITY;
    let mut strongest_non_edge = 0.0f64;
    for (k, (i, j)) in f.index.pairs().enumerate() {
        if j == i + 1 {
            assert!(f.values[k] * truth[(i, j)] > 0.0, "sign of ({i},{j})");
            weakest_edge = weakest_edge.min(f.values[k].abs());
        } else {
            strongest_non_edge = strongest_non_edge.max(f.values[k].abs());
        }
    }
    assert!(weakest_edge > strongest_non_edge, "{weakest_edge} vs {strongest_non_edge}");
}

#[test]
fn sampler_matches_kronecker_covariance() {
    let mut r = rng(36);
    let sigma_s = random_spd(&mut r, 2);
    let sigma_t = ar_covariance(3, 0.5).unwrap();
    let mn = diffnet::simgen::MatrixNormal::zero_mean(&sigma_s, &sigma_t).unwrap();
    let n = 40_000;
    let mut acc = DMatrix::zeros(6, 6);
    for _ in 0..n {
        let x = mn.sample(&mut r);
        let v = DVector::from_column_slice(x.as_slice());
        acc += &v * v.transpose();
    }
    acc /= n as f64;
    let expected = sigma_t.kronecker(&sigma_s);
    assert!((acc - expected).amax() < 0.06);
}

#[test]
fn whitening_inverts_temporal_covariance() {
    let sigma_t = ar_covariance(6, 0.6).unwrap();
    let root = sigma_t.clone().cholesky().unwrap().l();
    let x = DMatrix::from_fn(3, 6, |i, j| (i * 6 + j) as f64 * 0.1 - 0.7);
    let colored = &x * root.transpose();
    let w = whiten(&colored, &sigma_t).unwrap();
    // whitened data has the same Gram matrix as the uncolored data
    let g1 = &w * w.transpose();
    let g2 = &x * x.transpose();
    assert!((g1 - g2).amax() < 1e-10);
}

#[test]
fn study_truth_is_symmetric_difference_support() {
    let design = StudyDesign {
        p: 20,
        q: 10,
        n_case: 4,
        n_control: 4,
        rho: vec![0.4, 0.2],
        n_datasets: 2,
        seed: 5,
        ..StudyDesign::default()
    };
    let study = generate_study(&design).unwrap();
    for pair in &study.pairs {
        let edges = pair.differential_edges();
        assert!(!edges.is_empty());
        for i in 0..design.p {
            for j in i + 1..design.p {
                let differs = pair.delta[(i, j)] != 0.0;
                assert_eq!(differs, edges.contains(&(i, j)));
            }
        }
        assert!(diffnet::linalg::min_eigenvalue(&pair.omega_x) > 0.0);
        assert!(diffnet::linalg::min_eigenvalue(&pair.omega_y) > 0.0);
    }
    assert_eq!(study.datasets.len(), 2);
    assert!(study.datasets.iter().all(|d| d.len() == 8));
    let again = generate_study(&design).unwrap();
    assert_eq!(again.datasets[1][3].data, study.datasets[1][3].data);
}
