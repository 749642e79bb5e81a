mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use succmax_core::{
    criterion_closed_form, criterion_monte_carlo, grad_closed_form, grad_finite_diff, grad_lemma1, phi,
    sample_outcome, Allocation, MixtureParams, PolicyCellStats, SuccessRegion,
};

use common::random_instance;

#[test]
fn sample_moments_match_parameters() {
    let n = 1_000_000;
    let p = MixtureParams::new(vec![6.0], vec![19.0]).unwrap();
    let draws = sample_outcome(&p, n, 17).unwrap();
    let mean = draws.iter().map(|s| s.value()).sum::<f64>() / n as f64;
    assert!((mean - 6.0).abs() <= 3.0 * 19f64.sqrt() / 1000.0, "mean {mean}");

    let p2 = MixtureParams::new(vec![1.0, -2.0], vec![4.0, 1.2, 1.2, 1.0]).unwrap();
    let draws = sample_outcome(&p2, n, 18).unwrap();
    let nf = n as f64;
    let m0 = draws.iter().map(|s| s.value()).sum::<f64>() / nf;
    let m1 = draws.iter().map(|s| s.cost().unwrap()).sum::<f64>() / nf;
    let cov = |f: &dyn Fn(f64, f64) -> f64| draws.iter().map(|s| f(s.value() - m0, s.cost().unwrap() - m1)).sum::<f64>() / (nf - 1.0);
    let (s00, s01, s11) = (cov(&|a, _| a * a), cov(&|a, b| a * b), cov(&|_, b| b * b));
    assert!((m0 - 1.0).abs() <= 4.0 * 2.0 / 1000.0);
    assert!((m1 + 2.0).abs() <= 4.0 * 1.0 / 1000.0);
    // Var of a sample (co)variance is (σ_ij² + σ_ii σ_jj) / n.
    let se = |sij: f64, sii: f64, sjj: f64| ((sij * sij + sii * sjj) / nf).sqrt();
    assert!((s00 - 4.0).abs() <= 4.0 * se(4.0, 4.0, 4.0), "{s00}");
    assert!((s01 - 1.2).abs() <= 4.0 * se(1.2, 4.0, 1.0), "{s01}");
    assert!((s11 - 1.0).abs() <= 4.0 * se(1.0, 1.0, 1.0), "{s11}");
}

#[test]
fn monte_carlo_is_independent_of_thread_count() {
    let stats = common::table1(1.0);
    let psi = Allocation::uniform(3, 3);
    let region = SuccessRegion::value_above(3.5);
    let many = criterion_monte_carlo(&stats, &psi, &region, 300_000, 5).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let one = pool.install(|| criterion_monte_carlo(&stats, &psi, &region, 300_000, 5).unwrap());
    assert_eq!(many, one);
    let g_many = grad_lemma1(&stats, &psi, &region, 100_000, 6).unwrap();
    let g_one = pool.install(|| grad_lemma1(&stats, &psi, &region, 100_000, 6).unwrap());
    assert_eq!(g_many, g_one);
}

#[test]
fn toy_monte_carlo_matches_closed_form() {
    let stats = PolicyCellStats::univariate(&[vec![2.0, 1.9, 0.0]], &[vec![9.0, 1.0, 9.0]]).unwrap();
    let psi = Allocation::one_hot(3, &[1]).unwrap();
    let mc = criterion_monte_carlo(&stats, &psi, &SuccessRegion::value_above(0.0), 1_000_000, 1).unwrap();
    assert!((mc.p - phi(1.9f64)).abs() <= 4.0 * mc.mc_stderr.unwrap());
}

#[test]
fn closed_form_agrees_with_monte_carlo_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..100 {
        let inst = random_instance(&mut rng);
        let cf = criterion_closed_form(&inst.stats, &inst.psi, &inst.region).unwrap().p;
        let mc = criterion_monte_carlo(&inst.stats, &inst.psi, &inst.region, 1_000_000, i).unwrap();
        let se = mc.mc_stderr.unwrap();
        assert!((cf - mc.p).abs() <= 4.0 * se + 5e-6, "instance {i}: {cf} vs {} ± {se}", mc.p);
    }
}

#[test]
fn gradients_agree_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..10 {
        let inst = random_instance(&mut rng);
        let cf = grad_closed_form(&inst.stats, &inst.psi, &inst.region).unwrap();
        let fd = grad_finite_diff(&inst.stats, &inst.psi, &inst.region, 1e-5).unwrap();
        let mc = grad_lemma1(&inst.stats, &inst.psi, &inst.region, 1_000_000, 900 + i).unwrap();
        let se = mc.stderr.as_ref().unwrap();
        for c in 0..cf.grad.len() {
            assert!((cf.grad[c] - fd.grad[c]).abs() <= 1e-5, "instance {i} cell {c}");
            assert!(
                (cf.grad[c] - mc.grad[c]).abs() <= 4.0 * se[c] + 1e-4,
                "instance {i} cell {c}: {} vs {} ± {}",
                cf.grad[c],
                mc.grad[c],
                se[c]
            );
        }
    }
}

#[test]
fn tangent_directions_are_consistent() {
    // Moving mass between two policies of one bucket keeps ψ on the simplex;
    // the directional difference quotient must match <∇C, v>.
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        let (m, k) = (inst.psi.n_buckets(), inst.psi.n_policies());
        let cf = grad_closed_form(&inst.stats, &inst.psi, &inst.region).unwrap();
        let fd = grad_finite_diff(&inst.stats, &inst.psi, &inst.region, 1e-5).unwrap();
        for g in 0..m {
            let (from, to) = (0, k - 1);
            let h = 1e-5;
            if inst.psi.weight(g, from) < h || inst.psi.weight(g, to) < h {
                continue;
            }
            let shifted = |s: f64| {
                let mut w = inst.psi.as_slice().to_vec();
                w[g * k + from] -= s;
                w[g * k + to] += s;
                Allocation::new(m, k, w).unwrap()
            };
            let c = |a: &Allocation<f64>| criterion_closed_form(&inst.stats, a, &inst.region).unwrap().p;
            let directional = (c(&shifted(h)) - c(&shifted(-h))) / (2.0 * h);
            let along_cf = cf.get(g, to) - cf.get(g, from);
            let along_fd = fd.get(g, to) - fd.get(g, from);
            assert!((directional - along_cf).abs() <= 1e-6, "{directional} vs {along_cf}");
            assert!((along_fd - along_cf).abs() <= 2e-5);
        }
    }
}
