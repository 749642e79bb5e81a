mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use succmax_core::{
    bvn_cdf, criterion_closed_form, mixture_params, phi, project_allocation, project_simplex,
    success_probability, Allocation, MixtureParams, SuccessRegion,
};

use common::{random_psi, random_stats};

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

fn dims() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=4, 2usize..=4, 1usize..=2, any::<u64>())
}

proptest! {
    #[test]
    fn mixture_is_linear_in_psi((m, k, d, seed) in dims(), alpha in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stats = random_stats(&mut rng, m, k, d);
        let (a, b) = (random_psi(&mut rng, m, k), random_psi(&mut rng, m, k));
        let mixed: Vec<f64> = a.as_slice().iter().zip(b.as_slice())
            .map(|(x, y)| alpha * x + (1.0 - alpha) * y)
            .collect();
        let mixed = Allocation::new(m, k, mixed).unwrap();
        let (pa, pb, pm) = (
            mixture_params(&stats, &a).unwrap(),
            mixture_params(&stats, &b).unwrap(),
            mixture_params(&stats, &mixed).unwrap(),
        );
        let lin = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(u, v)| alpha * u + (1.0 - alpha) * v).collect()
        };
        prop_assert!(close(&pm.mean, &lin(&pa.mean, &pb.mean), 1e-12));
        prop_assert!(close(&pm.cov, &lin(&pa.cov, &pb.cov), 1e-12));
    }

    #[test]
    fn permuting_policies_leaves_mixture_unchanged((m, k, d, seed) in dims(), shift in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stats = random_stats(&mut rng, m, k, d);
        let psi = random_psi(&mut rng, m, k);
        let perm: Vec<usize> = (0..k).map(|j| (j + shift) % k).collect();
        let permuted = stats.permute_policies(&perm).unwrap();
        let rows: Vec<Vec<f64>> = psi.rows().map(|r| perm.iter().map(|&p| r[p]).collect()).collect();
        let psi_p = Allocation::from_rows(&rows).unwrap();
        let (a, b) = (mixture_params(&stats, &psi).unwrap(), mixture_params(&permuted, &psi_p).unwrap());
        prop_assert!(close(&a.mean, &b.mean, 1e-12));
        prop_assert!(close(&a.cov, &b.cov, 1e-12));
    }

    #[test]
    fn hard_allocation_is_sum_of_selected_cells((m, k, d, seed) in dims()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stats = random_stats(&mut rng, m, k, d);
        let choices: Vec<usize> = (0..m).map(|g| (g * 7 + seed as usize) % k).collect();
        let p = mixture_params(&stats, &Allocation::one_hot(k, &choices).unwrap()).unwrap();
        let mut mean = vec![0.0; d];
        let mut cov = vec![0.0; d * d];
        for (g, &j) in choices.iter().enumerate() {
            for (acc, x) in mean.iter_mut().zip(stats.mean(g, j)) { *acc += x; }
            for (acc, x) in cov.iter_mut().zip(stats.cov(g, j)) { *acc += x; }
        }
        prop_assert!(close(&p.mean, &mean, 1e-14));
        prop_assert!(close(&p.cov, &cov, 1e-14));
    }

    #[test]
    fn criterion_is_a_probability((m, k, d, seed) in dims(), r in -20.0f64..20.0, rc in -20.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stats = random_stats(&mut rng, m, k, d);
        let psi = random_psi(&mut rng, m, k);
        let region = if d == 1 { SuccessRegion::value_above(r) } else { SuccessRegion::value_above_cost_below(r, rc) };
        let p = criterion_closed_form(&stats, &psi, &region).unwrap().p;
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn degenerate_branches_stay_in_bounds(mu in -5.0f64..5.0, r in -5.0f64..5.0, var in prop_oneof![Just(0.0), 0.0f64..2.0]) {
        let params = MixtureParams::new(vec![mu, -mu], vec![var, 0.0, 0.0, 0.0]).unwrap();
        let p = success_probability(&params, &SuccessRegion::value_above_cost_below(r, r)).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn raising_the_value_bar_never_helps((m, k, d, seed) in dims(), r1 in -10.0f64..10.0, dr in 0.0f64..5.0, rc in -10.0f64..10.0, dc in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stats = random_stats(&mut rng, m, k, d);
        let psi = random_psi(&mut rng, m, k);
        let c = |region: SuccessRegion<f64>| criterion_closed_form(&stats, &psi, &region).unwrap().p;
        if d == 1 {
            prop_assert!(c(SuccessRegion::value_above(r1)) >= c(SuccessRegion::value_above(r1 + dr)));
        } else {
            let base = c(SuccessRegion::value_above_cost_below(r1, rc));
            prop_assert!(base + 1e-15 >= c(SuccessRegion::value_above_cost_below(r1 + dr, rc)));
            prop_assert!(base + 1e-15 >= c(SuccessRegion::value_above_cost_below(r1, rc - dc)));
        }
    }

    #[test]
    fn bvn_factorizes_at_zero_correlation(h in -6.0f64..6.0, k in -6.0f64..6.0) {
        prop_assert!((bvn_cdf(h, k, 0.0) - phi(h) * phi(k)).abs() <= 5e-6);
    }

    #[test]
    fn bvn_is_symmetric_and_monotone(h in -4.0f64..4.0, k in -4.0f64..4.0, rho in -0.99f64..0.99, dh in 0.0f64..1.0) {
        prop_assert!((bvn_cdf(h, k, rho) - bvn_cdf(k, h, rho)).abs() < 1e-14);
        prop_assert!(bvn_cdf(h + dh, k, rho) + 1e-15 >= bvn_cdf(h, k, rho));
    }

    #[test]
    fn projection_is_feasible_and_idempotent(v in prop::collection::vec(-5.0f64..5.0, 1..=6)) {
        let p = project_simplex(&v);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let q = project_simplex(&p);
        prop_assert!(close(&p, &q, 1e-14));
    }

    #[test]
    fn projection_is_nonexpansive(pair in (1usize..=6).prop_flat_map(|n| (
        prop::collection::vec(-5.0f64..5.0, n),
        prop::collection::vec(-5.0f64..5.0, n),
    ))) {
        let (a, b) = pair;
        let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        prop_assert!(dist(&project_simplex(&a), &project_simplex(&b)) <= dist(&a, &b) + 1e-12);
    }

    #[test]
    fn allocation_projection_is_row_wise(rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..=5)) {
        let m = rows.len();
        let flat: Vec<f64> = rows.concat();
        let a = project_allocation(m, 3, &flat).unwrap();
        for (g, row) in rows.iter().enumerate() {
            prop_assert_eq!(a.row(g).to_vec(), project_simplex(row));
        }
        let reversed: Vec<f64> = rows.iter().rev().flatten().copied().collect();
        let b = project_allocation(m, 3, &reversed).unwrap();
        for g in 0..m {
            prop_assert_eq!(a.row(g), b.row(m - 1 - g));
        }
    }
}
