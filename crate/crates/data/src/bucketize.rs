//! Quantile bucketization of one feature column.

use serde::{Deserialize, Serialize};

use crate::dataset::RctDataset;
use crate::error::{DataError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketizerSpec {
    pub feature: String,
    pub n_buckets: usize,
    /// `M - 1` strictly increasing cuts; a value equal to a cut goes to the
    /// lower bucket.
    pub cut_points: Vec<f64>,
}

/// Cut `j` is the empirical `j/M` quantile `sorted[ceil(j N / M) - 1]`.
pub fn fit_bucketizer(data: &RctDataset, feature: &str, n_buckets: usize) -> Result<BucketizerSpec> {
    if n_buckets == 0 {
        return Err(DataError::Config("need at least one bucket".into()));
    }
    let col = data.feature_index(feature)?;
    let mut values: Vec<f64> = data.rows().iter().map(|r| r.features[col]).collect();
    fit_cuts(&mut values, n_buckets).map(|cut_points| BucketizerSpec {
        feature: feature.to_string(),
        n_buckets,
        cut_points,
    })
}

fn fit_cuts(values: &mut [f64], m: usize) -> Result<Vec<f64>> {
    let n = values.len();
    if n < m {
        return Err(DataError::Bucketizer(format!("{n} rows cannot fill {m} buckets")));
    }
    values.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..m).map(|j| values[(j * n).div_ceil(m) - 1]).collect();
    let distinct = 1 + values.windows(2).filter(|w| w[0] != w[1]).count();
    // The top cut must leave something above it, otherwise the last bucket is empty.
    let top_ok = cuts.last().is_none_or(|&c| c < values[n - 1]);
    if !top_ok || cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DataError::Bucketizer(format!(
            "feature has {distinct} distinct values and too many ties for {m} quantile buckets; use a smaller M"
        )));
    }
    Ok(cuts)
}

impl BucketizerSpec {
    pub fn assign(&self, x: f64) -> usize {
        self.cut_points.partition_point(|&c| c < x)
    }
}

pub fn assign_bucket(spec: &BucketizerSpec, value: f64) -> usize {
    spec.assign(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cuts(v: &[f64], m: usize) -> Result<Vec<f64>> {
        fit_cuts(&mut v.to_vec(), m)
    }

    #[test]
    fn one_bucket_per_value() {
        let v: Vec<f64> = (1..=8).map(f64::from).collect();
        let c = cuts(&v, 8).unwrap();
        let spec = BucketizerSpec { feature: "x".into(), n_buckets: 8, cut_points: c };
        for (i, &x) in v.iter().enumerate() {
            assert_eq!(spec.assign(x), i);
        }
    }

    #[test]
    fn boundary_goes_left() {
        let spec = BucketizerSpec { feature: "x".into(), n_buckets: 2, cut_points: cuts(&[4.0, 2.0, 3.0, 1.0], 2).unwrap() };
        assert_eq!(spec.assign(2.0), 0);
        assert_eq!(spec.assign(2.5), 1);
        assert_eq!(spec.assign(3.0), 1);
        assert_eq!(spec.assign(-1e300), 0);
        assert_eq!(spec.assign(1e300), 1);
    }

    #[test]
    fn constant_feature_is_rejected() {
        let err = cuts(&[5.0; 10], 2).unwrap_err();
        assert!(err.to_string().contains("smaller M"), "{err}");
        assert!(cuts(&[1.0, 1.0, 1.0, 2.0], 2).is_ok());
        assert!(cuts(&[1.0, 2.0, 2.0, 2.0], 2).is_err());
        assert!(cuts(&[1.0], 2).is_err());
    }

    #[test]
    fn single_bucket_has_no_cuts() {
        assert!(cuts(&[3.0, 3.0], 1).unwrap().is_empty());
    }
}
