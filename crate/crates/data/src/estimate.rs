//! Bootstrap estimation of per-cell outcome statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use succmax_core::sampling::mix_seed;
use succmax_core::{PolicyCellStats, ProblemShape};

use crate::bucketize::BucketizerSpec;
use crate::dataset::RctDataset;
use crate::error::{DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSpec {
    #[serde(default = "default_replicates")]
    pub n_bootstrap: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_replicates() -> usize {
    100
}

impl BootstrapSpec {
    pub fn new(n_bootstrap: usize, seed: u64) -> Self {
        Self { n_bootstrap, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bootstrap < 2 {
            return Err(DataError::Config(format!(
                "need at least 2 bootstrap replicates, got {}",
                self.n_bootstrap
            )));
        }
        Ok(())
    }
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        Self::new(default_replicates(), 0)
    }
}

/// What one cell's statistics describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimand {
    /// Total outcome had every user of the bucket received the policy:
    /// `(N_g / n_gk) * cell sum`, mean and covariance across replicates.
    #[default]
    BucketTotal,
    /// Each row is already one realization of the cell total (synthetic
    /// data): replicate means and within-replicate covariances, averaged.
    PerRealization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    RawTotal,
    /// Gains relative to the all-reference total `T0` per dimension:
    /// mean `(mu_gk - mu_g0) / T0`, covariance `/ (T0_i T0_j)`. Summed over
    /// buckets this is `T(psi) / T0 - 1`.
    ReferenceRelative,
}

pub fn estimate_stats(
    data: &RctDataset,
    bucketizer: &BucketizerSpec,
    spec: &BootstrapSpec,
    estimand: Estimand,
    normalization: Normalization,
) -> Result<PolicyCellStats<f64>> {
    spec.validate()?;
    let (m, k, d) = (bucketizer.n_buckets, data.n_policies(), data.outcome_dim());
    let col = data.feature_index(&bucketizer.feature)?;

    let mut cells: Vec<Vec<&[f64]>> = vec![Vec::new(); m * k];
    let mut bucket_size = vec![0usize; m];
    for r in data.rows() {
        let g = bucketizer.assign(r.features[col]);
        bucket_size[g] += 1;
        cells[g * k + r.policy].push(&r.outcome);
    }
    for (c, rows) in cells.iter().enumerate() {
        if rows.len() < 2 {
            return Err(DataError::SparseCell { g: c / k, k: c % k, n: rows.len() });
        }
    }

    let b_count = spec.n_bootstrap;
    // One job per (cell, replicate); results come back in job order.
    let replicates: Vec<(Vec<f64>, Vec<f64>)> = (0..m * k * b_count)
        .into_par_iter()
        .map(|job| {
            let (c, b) = (job / b_count, job % b_count);
            let rows = &cells[c];
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(mix_seed(spec.seed, c as u64), b as u64));
            let draws: Vec<&[f64]> = (0..rows.len()).map(|_| rows[rng.random_range(0..rows.len())]).collect();
            match estimand {
                Estimand::BucketTotal => {
                    let scale = bucket_size[c / k] as f64 / rows.len() as f64;
                    let sum = column_sums(&draws, d);
                    (sum.iter().map(|s| scale * s).collect(), Vec::new())
                }
                Estimand::PerRealization => {
                    let (mean, cov) = mean_cov(&draws, d);
                    (mean, cov)
                }
            }
        })
        .collect();

    let mut means = Vec::with_capacity(m * k * d);
    let mut covs = Vec::with_capacity(m * k * d * d);
    for reps in replicates.chunks(b_count) {
        let stats: Vec<&[f64]> = reps.iter().map(|(s, _)| s.as_slice()).collect();
        match estimand {
            Estimand::BucketTotal => {
                let (mean, cov) = mean_cov(&stats, d);
                means.extend(mean);
                covs.extend(cov);
            }
            Estimand::PerRealization => {
                means.extend(average(&stats, d));
                let within: Vec<&[f64]> = reps.iter().map(|(_, c)| c.as_slice()).collect();
                covs.extend(average(&within, d * d));
            }
        }
    }

    if normalization == Normalization::ReferenceRelative {
        reference_relative(&mut means, &mut covs, m, k, d)?;
    }
    Ok(PolicyCellStats::new(ProblemShape::new(m, k, d)?, means, covs)?)
}

fn column_sums(rows: &[&[f64]], d: usize) -> Vec<f64> {
    let mut s = vec![0.0; d];
    for r in rows {
        for (acc, x) in s.iter_mut().zip(*r) {
            *acc += x;
        }
    }
    s
}

fn average(rows: &[&[f64]], d: usize) -> Vec<f64> {
    let n = rows.len() as f64;
    column_sums(rows, d).into_iter().map(|s| s / n).collect()
}

/// Sample mean and unbiased covariance (row-major `d x d`), two-pass.
fn mean_cov(rows: &[&[f64]], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mean = average(rows, d);
    let mut cov = vec![0.0; d * d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    let denom = (rows.len() - 1) as f64;
    cov.iter_mut().for_each(|c| *c /= denom);
    (mean, cov)
}

fn reference_relative(means: &mut [f64], covs: &mut [f64], m: usize, k: usize, d: usize) -> Result<()> {
    let t0: Vec<f64> = (0..d).map(|i| (0..m).map(|g| means[(g * k) * d + i]).sum()).collect();
    if let Some(i) = t0.iter().position(|&t| t == 0.0) {
        return Err(DataError::Normalization(format!(
            "reference policy total is zero in outcome dimension {i}; use raw_total"
        )));
    }
    for g in 0..m {
        let base: Vec<f64> = means[g * k * d..(g * k + 1) * d].to_vec();
        for j in 0..k {
            let c = g * k + j;
            for i in 0..d {
                means[c * d + i] = (means[c * d + i] - base[i]) / t0[i];
                for l in 0..d {
                    covs[c * d * d + i * d + l] /= t0[i] * t0[l];
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_cov_by_hand() {
        let rows: Vec<&[f64]> = vec![&[1.0, 0.0], &[3.0, 2.0], &[5.0, 1.0]];
        let (mean, cov) = mean_cov(&rows, 2);
        assert_eq!(mean, vec![3.0, 1.0]);
        assert_eq!(cov, vec![4.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn relative_form_of_two_cells() {
        // One bucket, reference total 4, alternative 5 with variance 2.
        let mut means = vec![4.0, 5.0];
        let mut covs = vec![1.0, 2.0];
        reference_relative(&mut means, &mut covs, 1, 2, 1).unwrap();
        assert_eq!(means, vec![0.0, 0.25]);
        assert_eq!(covs, vec![1.0 / 16.0, 2.0 / 16.0]);
        assert!(reference_relative(&mut [0.0, 1.0], &mut [1.0, 1.0], 1, 2, 1).is_err());
    }
}
