//! Row-level RCT data and CSV ingestion.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RctRow {
    pub features: Vec<f64>,
    pub policy: usize,
    /// `(value)` or `(value, cost)`.
    pub outcome: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RctDataset {
    feature_names: Vec<String>,
    outcome_names: Vec<String>,
    n_policies: usize,
    rows: Vec<RctRow>,
}

impl RctDataset {
    pub fn new(
        feature_names: Vec<String>,
        outcome_names: Vec<String>,
        n_policies: usize,
        rows: Vec<RctRow>,
    ) -> Result<Self> {
        let d = outcome_names.len();
        if !(1..=2).contains(&d) {
            return Err(DataError::Schema(format!("outcome dimension must be 1 or 2, got {d}")));
        }
        if n_policies == 0 {
            return Err(DataError::Schema("need at least one policy".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.features.len() != feature_names.len() || r.outcome.len() != d {
                return Err(DataError::Schema(format!("row {i} does not match the schema")));
            }
            if r.policy >= n_policies {
                return Err(DataError::Schema(format!(
                    "row {i}: policy {} outside [0, {n_policies})",
                    r.policy
                )));
            }
            if r.outcome.iter().any(|y| !y.is_finite()) {
                return Err(DataError::Schema(format!("row {i}: non-finite outcome")));
            }
        }
        Ok(Self {
            feature_names,
            outcome_names,
            n_policies,
            rows,
        })
    }

    pub fn rows(&self) -> &[RctRow] {
        &self.rows
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    pub fn n_policies(&self) -> usize {
        self.n_policies
    }

    pub fn outcome_dim(&self) -> usize {
        self.outcome_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn outcome_names(&self) -> &[String] {
        &self.outcome_names
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| DataError::Schema(format!("unknown feature column '{name}'")))
    }

    pub fn policy_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_policies];
        for r in &self.rows {
            counts[r.policy] += 1;
        }
        counts
    }

    fn with_rows(&self, rows: Vec<RctRow>) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            outcome_names: self.outcome_names.clone(),
            n_policies: self.n_policies,
            rows,
        }
    }
}

/// Which CSV columns feed the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColumnMapping {
    pub features: Vec<String>,
    pub treatment: String,
    /// Value column, then the optional cost column.
    pub outcomes: Vec<String>,
    /// Fixes `K`; otherwise it is one more than the largest treatment seen.
    pub n_policies: Option<usize>,
    pub delimiter: char,
}

impl Default for ColumnMapping {
    /// The Criteo uplift layout: `f0..f11`, `treatment`, value = `conversion`,
    /// cost = `visit`.
    fn default() -> Self {
        Self {
            features: (0..12).map(|i| format!("f{i}")).collect(),
            treatment: "treatment".into(),
            outcomes: vec!["conversion".into(), "visit".into()],
            n_policies: None,
            delimiter: ',',
        }
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<RctDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ingest_reader(file, mapping)
}

pub fn ingest_reader<R: std::io::Read>(reader: R, mapping: &ColumnMapping) -> Result<RctDataset> {
    if !mapping.delimiter.is_ascii() {
        return Err(DataError::Config(format!("delimiter {:?} is not ASCII", mapping.delimiter)));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter as u8)
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DataError::Schema(format!("missing column '{name}'")))
    };
    let feat_idx = mapping.features.iter().map(|f| column(f)).collect::<Result<Vec<_>>>()?;
    let treat_idx = column(&mapping.treatment)?;
    let out_idx = mapping.outcomes.iter().map(|f| column(f)).collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        let cell = |i: usize, name: &str| -> Result<f64> {
            let raw = record.get(i).unwrap_or("").trim();
            let err = |msg: String| DataError::Parse {
                line,
                column: name.to_string(),
                msg,
            };
            if raw.is_empty() {
                return Err(err("empty cell".into()));
            }
            let x: f64 = raw.parse().map_err(|_| err(format!("'{raw}' is not numeric")))?;
            if !x.is_finite() {
                return Err(err(format!("'{raw}' is not finite")));
            }
            Ok(x)
        };
        let features = feat_idx
            .iter()
            .zip(&mapping.features)
            .map(|(&i, n)| cell(i, n))
            .collect::<Result<Vec<_>>>()?;
        let t = cell(treat_idx, &mapping.treatment)?;
        if t < 0.0 || t.fract() != 0.0 {
            return Err(DataError::Parse {
                line,
                column: mapping.treatment.clone(),
                msg: format!("treatment {t} is not a policy index"),
            });
        }
        let outcome = out_idx
            .iter()
            .zip(&mapping.outcomes)
            .map(|(&i, n)| cell(i, n))
            .collect::<Result<Vec<_>>>()?;
        rows.push(RctRow {
            features,
            policy: t as usize,
            outcome,
        });
    }
    let seen = rows.iter().map(|r| r.policy + 1).max().unwrap_or(0);
    let k = match mapping.n_policies {
        Some(k) if k < seen => {
            return Err(DataError::Schema(format!(
                "treatment index {} outside the declared {k} policies",
                seen - 1
            )))
        }
        Some(k) => k,
        None => seen,
    };
    RctDataset::new(mapping.features.clone(), mapping.outcomes.clone(), k, rows)
}

/// Stratified by policy: each policy's rows are shuffled and split with
/// largest-remainder quotas, so per-policy train counts are within one of
/// `fraction * n_k` and the train total is `round(fraction * N)`. Both halves
/// keep the input row order.
pub fn split_train_test(data: &RctDataset, fraction: f64, seed: u64) -> Result<(RctDataset, RctDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::Config(format!("split fraction {fraction} outside (0, 1)")));
    }
    let counts = data.policy_counts();
    let quotas: Vec<f64> = counts.iter().map(|&n| fraction * n as f64).collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let total = (fraction * data.n_users() as f64).round() as usize;
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let missing = total.saturating_sub(take.iter().sum());
    for &k in order.iter().take(missing) {
        take[k] += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; data.n_users()];
    for (k, &n_take) in take.iter().enumerate() {
        let mut idx: Vec<usize> = (0..data.n_users()).filter(|&i| data.rows[i].policy == k).collect();
        idx.shuffle(&mut rng);
        for &i in &idx[..n_take] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = data.rows.iter().zip(&in_train).partition(|(_, &t)| t);
    let unzip = |v: Vec<(&RctRow, &bool)>| v.into_iter().map(|(r, _)| r.clone()).collect();
    Ok((data.with_rows(unzip(train)), data.with_rows(unzip(test))))
}
