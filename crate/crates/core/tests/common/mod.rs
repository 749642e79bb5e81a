#![allow(dead_code)]

use rand::Rng;
use rand_distr::Exp1;
use succmax_core::{mixture_params, Allocation, PolicyCellStats, SuccessRegion};

pub fn random_stats<R: Rng>(rng: &mut R, m: usize, k: usize, d: usize) -> PolicyCellStats<f64> {
    let table = |rng: &mut R, lo: f64, hi: f64| -> Vec<Vec<f64>> {
        (0..m)
            .map(|_| (0..k).map(|_| rng.random_range(lo..hi)).collect())
            .collect()
    };
    if d == 1 {
        let mu = table(rng, -2.0, 3.0);
        let var = table(rng, 0.2, 4.0);
        PolicyCellStats::univariate(&mu, &var).unwrap()
    } else {
        let mv = table(rng, -2.0, 3.0);
        let vv = table(rng, 0.2, 4.0);
        let mc = table(rng, -1.0, 2.0);
        let vc = table(rng, 0.2, 4.0);
        let rho = table(rng, -0.8, 0.8);
        PolicyCellStats::bivariate(&mv, &vv, &mc, &vc, &rho).unwrap()
    }
}

pub fn random_psi<R: Rng>(rng: &mut R, m: usize, k: usize) -> Allocation<f64> {
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let e: Vec<f64> = (0..k).map(|_| rng.sample(Exp1)).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|x| x / s).collect()
        })
        .collect();
    Allocation::from_rows(&rows).unwrap()
}

/// Thresholds within a couple of standard deviations of the mixture mean, so
/// probabilities stay away from 0 and 1.
pub fn random_region<R: Rng>(rng: &mut R, stats: &PolicyCellStats<f64>, psi: &Allocation<f64>) -> SuccessRegion<f64> {
    let p = mixture_params(stats, psi).unwrap();
    if stats.dim() == 1 {
        SuccessRegion::value_above(p.mean[0] + rng.random_range(-1.5..1.5) * p.std_dev(0))
    } else {
        SuccessRegion::value_above_cost_below(
            p.mean[0] + rng.random_range(-1.5..1.0) * p.std_dev(0),
            p.mean[1] + rng.random_range(-1.0..1.5) * p.std_dev(1),
        )
    }
}

pub struct Instance {
    pub stats: PolicyCellStats<f64>,
    pub psi: Allocation<f64>,
    pub region: SuccessRegion<f64>,
}

pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let m = rng.random_range(1..=4);
    let k = rng.random_range(2..=4);
    let d = rng.random_range(1..=2);
    let stats = random_stats(rng, m, k, d);
    let psi = random_psi(rng, m, k);
    let region = random_region(rng, &stats, &psi);
    Instance { stats, psi, region }
}

pub fn table1(scale: f64) -> PolicyCellStats<f64> {
    let var = [[9.0, 1.0, 9.0], [9.0, 1.0, 9.0], [1.0, 1.0, 1.0]];
    PolicyCellStats::univariate(
        &[vec![2.0, 1.9, 0.0], vec![2.0, 1.0, 0.0], vec![2.0, 1.0, 0.0]],
        &var.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect::<Vec<_>>(),
    )
    .unwrap()
}
