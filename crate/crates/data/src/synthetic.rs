//! Published synthetic setups and i.i.d. row generation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use succmax_core::sampling::mix_seed;
use succmax_core::{sample_outcome, MixtureParams, PolicyCellStats};

use crate::dataset::{RctDataset, RctRow};
use crate::error::{DataError, Result};

/// Users per bucket in the Bernoulli alignment scenario.
pub const BERNOULLI_USERS: u64 = 500;
/// Success rates of the two policies in the Bernoulli alignment scenario.
pub const BERNOULLI_P: [f64; 2] = [0.6, 0.8];

/// Name of the single feature column of synthetic datasets; it holds the
/// bucket index.
pub const BUCKET_FEATURE: &str = "bucket";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    Table1Large,
    Table1Small,
    #[serde(rename = "table2_case_i")]
    Table2CaseI,
    #[serde(rename = "table2_case_ii")]
    Table2CaseIi,
    BernoulliAlignment,
    Custom(CustomStats),
}

/// `M x K` tables; cost tables and `rho` make the outcome two-dimensional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomStats {
    pub value_mean: Vec<Vec<f64>>,
    pub value_var: Vec<Vec<f64>>,
    #[serde(default)]
    pub cost_mean: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub cost_var: Option<Vec<Vec<f64>>>,
    /// Same correlation for every cell.
    #[serde(default)]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub preset: Preset,
    pub n_samples_per_cell: usize,
    #[serde(default)]
    pub seed: u64,
}

const TABLE1_MEAN: [[f64; 3]; 3] = [[2.0, 1.9, 0.0], [2.0, 1.0, 0.0], [2.0, 1.0, 0.0]];
const TABLE1_VAR: [[f64; 3]; 3] = [[9.0, 1.0, 9.0], [9.0, 1.0, 9.0], [1.0, 1.0, 1.0]];

fn table(rows: &[[f64; 3]], scale: f64) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect()
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Table1Large => "table1_large",
            Preset::Table1Small => "table1_small",
            Preset::Table2CaseI => "table2_case_i",
            Preset::Table2CaseIi => "table2_case_ii",
            Preset::BernoulliAlignment => "bernoulli_alignment",
            Preset::Custom(_) => "custom",
        }
    }

    /// Ground-truth cell statistics.
    pub fn stats(&self) -> Result<PolicyCellStats<f64>> {
        let stats = match self {
            Preset::Table1Large => PolicyCellStats::univariate(&table(&TABLE1_MEAN, 1.0), &table(&TABLE1_VAR, 1.0)),
            Preset::Table1Small => PolicyCellStats::univariate(&table(&TABLE1_MEAN, 1.0), &table(&TABLE1_VAR, 0.01)),
            Preset::Table2CaseI => PolicyCellStats::bivariate(
                &[vec![2.0, 1.0]],
                &[vec![9.0, 1.0]],
                &[vec![1.0, 1.5]],
                &[vec![4.0, 1.0]],
                &[vec![0.5, 0.5]],
            ),
            Preset::Table2CaseIi => PolicyCellStats::bivariate(
                &[vec![2.0, 1.0]],
                &[vec![9.0, 1.0]],
                &[vec![1.0, 0.5]],
                &[vec![1.0, 1.0]],
                &[vec![0.5, 0.5]],
            ),
            Preset::BernoulliAlignment => {
                let n = BERNOULLI_USERS as f64;
                PolicyCellStats::univariate(
                    &[BERNOULLI_P.iter().map(|p| n * p).collect()],
                    &[BERNOULLI_P.iter().map(|p| n * p * (1.0 - p)).collect()],
                )
            }
            Preset::Custom(c) => return c.stats(),
        };
        Ok(stats?)
    }
}

impl CustomStats {
    fn stats(&self) -> Result<PolicyCellStats<f64>> {
        match (&self.cost_mean, &self.cost_var) {
            (None, None) => {
                if self.rho.is_some() {
                    return Err(DataError::Config("rho needs cost tables".into()));
                }
                Ok(PolicyCellStats::univariate(&self.value_mean, &self.value_var)?)
            }
            (Some(cm), Some(cv)) => {
                let rho = self.rho.unwrap_or(0.0);
                if !(-1.0..=1.0).contains(&rho) {
                    return Err(DataError::Config(format!("rho {rho} outside [-1, 1]")));
                }
                let rho_table: Vec<Vec<f64>> = self.value_mean.iter().map(|r| vec![rho; r.len()]).collect();
                Ok(PolicyCellStats::bivariate(&self.value_mean, &self.value_var, cm, cv, &rho_table)?)
            }
            _ => Err(DataError::Config("cost_mean and cost_var go together".into())),
        }
    }
}

/// Ground truth plus `n_samples_per_cell` i.i.d. realizations of every cell
/// total, bucket-major then policy. Every row's only feature is its bucket
/// index, so a quantile bucketizer on [`BUCKET_FEATURE`] recovers the buckets.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<(PolicyCellStats<f64>, RctDataset)> {
    let stats = config.preset.stats()?;
    let shape = stats.shape();
    let (m, k, d) = (shape.n_buckets, shape.n_policies, shape.outcome_dim);
    let n = config.n_samples_per_cell;
    let mut rows = Vec::with_capacity(m * k * n);
    for g in 0..m {
        for j in 0..k {
            let seed = mix_seed(config.seed, (g * k + j) as u64);
            let draws: Vec<Vec<f64>> = match config.preset {
                Preset::BernoulliAlignment => {
                    let dist = Binomial::new(BERNOULLI_USERS, BERNOULLI_P[j])
                        .map_err(|e| DataError::Config(e.to_string()))?;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..n).map(|_| vec![dist.sample(&mut rng) as f64]).collect()
                }
                _ => {
                    let params = MixtureParams::new(stats.mean(g, j).to_vec(), stats.cov(g, j).to_vec())?;
                    sample_outcome(&params, n, seed)?
                        .iter()
                        .map(|s| s.as_slice().to_vec())
                        .collect()
                }
            };
            rows.extend(draws.into_iter().map(|outcome| RctRow {
                features: vec![g as f64],
                policy: j,
                outcome,
            }));
        }
    }
    let outcome_names = ["value", "cost"][..d].iter().map(|s| s.to_string()).collect();
    let data = RctDataset::new(vec![BUCKET_FEATURE.into()], outcome_names, k, rows)?;
    Ok((stats, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_presets() {
        let large = Preset::Table1Large.stats().unwrap();
        assert_eq!(large.mean(0, 1), &[1.9]);
        assert_eq!(large.cov(0, 2), &[9.0]);
        assert_eq!(large.cov(2, 0), &[1.0]);
        let small = Preset::Table1Small.stats().unwrap();
        assert_eq!(small.mean(1, 1), &[1.0]);
        assert_eq!(small.cov(0, 0), &[0.09]);
    }

    #[test]
    fn table2_off_diagonal() {
        let s = Preset::Table2CaseI.stats().unwrap();
        assert_eq!(s.cov(0, 0), &[9.0, 3.0, 3.0, 4.0]);
        assert_eq!(s.mean(0, 1), &[1.0, 1.5]);
        let s = Preset::Table2CaseIi.stats().unwrap();
        assert_eq!(s.cov(0, 0), &[9.0, 1.5, 1.5, 1.0]);
        assert_eq!(s.mean(0, 1), &[1.0, 0.5]);
    }

    #[test]
    fn bernoulli_moments() {
        let s = Preset::BernoulliAlignment.stats().unwrap();
        assert_eq!(s.mean(0, 0), &[300.0]);
        assert_eq!(s.mean(0, 1), &[400.0]);
        assert!((s.cov(0, 0)[0] - 120.0).abs() < 1e-9);
        assert!((s.cov(0, 1)[0] - 80.0).abs() < 1e-9);
    }

    #[test]
    fn preset_json_names() {
        for p in [Preset::Table1Large, Preset::Table2CaseI, Preset::Table2CaseIi, Preset::BernoulliAlignment] {
            let text = serde_json::to_string(&p).unwrap();
            assert_eq!(text, format!("{{\"kind\":\"{}\"}}", p.name()));
        }
    }

    #[test]
    fn custom_rho_is_checked() {
        let c = CustomStats {
            value_mean: vec![vec![1.0]],
            value_var: vec![vec![1.0]],
            cost_mean: Some(vec![vec![1.0]]),
            cost_var: Some(vec![vec![1.0]]),
            rho: Some(1.5),
        };
        assert!(matches!(Preset::Custom(c).stats(), Err(DataError::Config(_))));
    }
}
