//! Problem data: shapes, allocations, per-cell outcome statistics and the
//! Gaussian approximation of the total outcome under an allocation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling;
use crate::scalar::Scalar;

/// Relative tolerance for symmetry / PSD checks on covariances.
pub const PSD_TOL: f64 = 1e-9;
/// Row-sum tolerance for allocations.
pub const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemShape {
    /// Number of buckets `M`.
    #[serde(rename = "M")]
    pub n_buckets: usize,
    /// Number of candidate policies `K`; policy 0 is the reference.
    #[serde(rename = "K")]
    pub n_policies: usize,
    /// 1 for value-only outcomes, 2 for `(value, cost)`.
    #[serde(rename = "d")]
    pub outcome_dim: usize,
}

impl ProblemShape {
    pub fn new(n_buckets: usize, n_policies: usize, outcome_dim: usize) -> Result<Self> {
        let shape = Self {
            n_buckets,
            n_policies,
            outcome_dim,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_buckets == 0 {
            return Err(Error::invalid("need at least one bucket"));
        }
        if self.n_policies == 0 {
            return Err(Error::invalid("need at least one policy"));
        }
        if !(1..=2).contains(&self.outcome_dim) {
            return Err(Error::invalid(format!(
                "outcome dimension must be 1 or 2, got {}",
                self.outcome_dim
            )));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.n_buckets * self.n_policies
    }
}

/// Row-stochastic `M × K` matrix: `weight(g, k)` is the share of bucket `g`
/// served by policy `k`. Serializes as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<Vec<F>>",
    into = "Vec<Vec<F>>",
    bound(serialize = "F: Scalar + Serialize", deserialize = "F: Scalar + Deserialize<'de>")
)]
pub struct Allocation<F> {
    n_buckets: usize,
    n_policies: usize,
    weights: Vec<F>,
}

impl<F: Scalar> Allocation<F> {
    /// Row-major weights; every entry in `[0, 1]`, every row summing to one.
    pub fn new(n_buckets: usize, n_policies: usize, weights: Vec<F>) -> Result<Self> {
        if n_buckets == 0 || n_policies == 0 {
            return Err(Error::invalid("allocation needs M >= 1 and K >= 1"));
        }
        if weights.len() != n_buckets * n_policies {
            return Err(Error::dim(format!(
                "allocation has {} weights, expected {}x{}",
                weights.len(),
                n_buckets,
                n_policies
            )));
        }
        let tol = F::of(ROW_SUM_TOL);
        for (g, row) in weights.chunks(n_policies).enumerate() {
            if let Some(w) = row
                .iter()
                .find(|w| !w.is_finite() || **w < F::zero() || **w > F::one() + tol)
            {
                return Err(Error::invalid(format!(
                    "bucket {g} has weight {w} outside [0, 1]"
                )));
            }
            let s: F = row.iter().copied().sum();
            if (s - F::one()).abs() > tol {
                return Err(Error::invalid(format!("bucket {g} weights sum to {s}")));
            }
        }
        Ok(Self {
            n_buckets,
            n_policies,
            weights,
        })
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::dim("allocation rows have different lengths"));
        }
        Self::new(rows.len(), k, rows.concat())
    }

    pub fn uniform(n_buckets: usize, n_policies: usize) -> Self {
        let w = F::one() / F::of_usize(n_policies);
        Self {
            n_buckets,
            n_policies,
            weights: vec![w; n_buckets * n_policies],
        }
    }

    /// Hard allocation: bucket `g` goes entirely to policy `choices[g]`.
    pub fn one_hot(n_policies: usize, choices: &[usize]) -> Result<Self> {
        let mut weights = vec![F::zero(); choices.len() * n_policies];
        for (g, &k) in choices.iter().enumerate() {
            if k >= n_policies {
                return Err(Error::invalid(format!(
                    "bucket {g} assigned to policy {k}, only {n_policies} exist"
                )));
            }
            weights[g * n_policies + k] = F::one();
        }
        Self::new(choices.len(), n_policies, weights)
    }

    pub(crate) fn from_parts_unchecked(n_buckets: usize, n_policies: usize, weights: Vec<F>) -> Self {
        Self {
            n_buckets,
            n_policies,
            weights,
        }
    }

    pub fn n_buckets(&self) -> usize {
        self.n_buckets
    }

    pub fn n_policies(&self) -> usize {
        self.n_policies
    }

    pub fn weight(&self, g: usize, k: usize) -> F {
        self.weights[g * self.n_policies + k]
    }

    pub fn row(&self, g: usize) -> &[F] {
        &self.weights[g * self.n_policies..(g + 1) * self.n_policies]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> {
        self.weights.chunks(self.n_policies)
    }

    pub fn as_slice(&self) -> &[F] {
        &self.weights
    }

    /// Policy index per bucket when every row is one-hot.
    pub fn hard_choices(&self) -> Option<Vec<usize>> {
        self.rows()
            .map(|row| {
                let k = row.iter().position(|&w| w == F::one())?;
                row.iter()
                    .enumerate()
                    .all(|(j, &w)| j == k || w == F::zero())
                    .then_some(k)
            })
            .collect()
    }

    pub fn l1_distance(&self, other: &Self) -> F {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(&a, &b)| (a - b).abs())
            .sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<F>> {
        self.rows().map(<[F]>::to_vec).collect()
    }
}

impl<F: Scalar> TryFrom<Vec<Vec<F>>> for Allocation<F> {
    type Error = Error;

    fn try_from(rows: Vec<Vec<F>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl<F: Scalar> From<Allocation<F>> for Vec<Vec<F>> {
    fn from(a: Allocation<F>) -> Self {
        a.to_rows()
    }
}

/// Mean vector and covariance matrix of the total outcome of every
/// (bucket, policy) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCellStats<F> {
    shape: ProblemShape,
    means: Vec<F>,
    covs: Vec<F>,
}

impl<F: Scalar> PolicyCellStats<F> {
    /// `means` holds `M*K*d` entries and `covs` holds `M*K*d*d` entries
    /// (row-major per cell), cells ordered bucket-major. Covariances must be
    /// symmetric PSD up to a relative `1e-9`; marginal negative eigenvalues are
    /// clipped to zero.
    pub fn new(shape: ProblemShape, means: Vec<F>, mut covs: Vec<F>) -> Result<Self> {
        shape.validate()?;
        let d = shape.outcome_dim;
        let cells = shape.n_cells();
        if means.len() != cells * d || covs.len() != cells * d * d {
            return Err(Error::dim(format!(
                "expected {} means and {} covariance entries for shape {shape:?}, got {} and {}",
                cells * d,
                cells * d * d,
                means.len(),
                covs.len()
            )));
        }
        if let Some(i) = means.iter().position(|m| !m.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite mean for cell (g={}, k={})",
                i / d / shape.n_policies,
                (i / d) % shape.n_policies
            )));
        }
        for (c, cov) in covs.chunks_mut(d * d).enumerate() {
            linalg::validate_and_clip_psd(cov, d, F::of(PSD_TOL)).map_err(|e| {
                Error::invalid(format!(
                    "cell (g={}, k={}): {e}",
                    c / shape.n_policies,
                    c % shape.n_policies
                ))
            })?;
        }
        Ok(Self { shape, means, covs })
    }

    /// One-dimensional stats from `M × K` tables of means and variances.
    pub fn univariate(means: &[Vec<F>], variances: &[Vec<F>]) -> Result<Self> {
        let m = means.len();
        let k = means.first().map_or(0, Vec::len);
        if variances.len() != m
            || means.iter().chain(variances).any(|r| r.len() != k)
        {
            return Err(Error::dim("mean and variance tables must both be M x K"));
        }
        Self::new(ProblemShape::new(m, k, 1)?, means.concat(), variances.concat())
    }

    /// Two-dimensional `(value, cost)` stats from per-cell marginal tables and
    /// a per-cell correlation; the off-diagonal is `rho * sqrt(var_v * var_c)`.
    pub fn bivariate(
        mean_value: &[Vec<F>],
        var_value: &[Vec<F>],
        mean_cost: &[Vec<F>],
        var_cost: &[Vec<F>],
        rho: &[Vec<F>],
    ) -> Result<Self> {
        let m = mean_value.len();
        let k = mean_value.first().map_or(0, Vec::len);
        let tables = [mean_value, var_value, mean_cost, var_cost, rho];
        if tables.iter().any(|t| t.len() != m || t.iter().any(|r| r.len() != k)) {
            return Err(Error::dim("all bivariate tables must be M x K"));
        }
        let mut means = Vec::with_capacity(m * k * 2);
        let mut covs = Vec::with_capacity(m * k * 4);
        for g in 0..m {
            for j in 0..k {
                let (vv, vc) = (var_value[g][j], var_cost[g][j]);
                let r = rho[g][j];
                if r.abs() > F::one() {
                    return Err(Error::invalid(format!("correlation {r} outside [-1, 1]")));
                }
                let off = r * (vv * vc).sqrt();
                means.extend([mean_value[g][j], mean_cost[g][j]]);
                covs.extend([vv, off, off, vc]);
            }
        }
        Self::new(ProblemShape::new(m, k, 2)?, means, covs)
    }

    pub fn shape(&self) -> ProblemShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.outcome_dim
    }

    pub fn mean(&self, g: usize, k: usize) -> &[F] {
        let d = self.shape.outcome_dim;
        let c = g * self.shape.n_policies + k;
        &self.means[c * d..(c + 1) * d]
    }

    pub fn cov(&self, g: usize, k: usize) -> &[F] {
        let d = self.shape.outcome_dim;
        let c = g * self.shape.n_policies + k;
        &self.covs[c * d * d..(c + 1) * d * d]
    }

    pub(crate) fn cell_mean(&self, c: usize) -> &[F] {
        let d = self.shape.outcome_dim;
        &self.means[c * d..(c + 1) * d]
    }

    pub(crate) fn cell_cov(&self, c: usize) -> &[F] {
        let d = self.shape.outcome_dim;
        &self.covs[c * d * d..(c + 1) * d * d]
    }

    /// Same cells with policy columns reordered: new column `j` is old column
    /// `perm[j]`.
    pub fn permute_policies(&self, perm: &[usize]) -> Result<Self> {
        let (m, k) = (self.shape.n_buckets, self.shape.n_policies);
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("not a permutation of the policies"));
        }
        let mut means = Vec::with_capacity(self.means.len());
        let mut covs = Vec::with_capacity(self.covs.len());
        for g in 0..m {
            for &p in perm {
                means.extend_from_slice(self.mean(g, p));
                covs.extend_from_slice(self.cov(g, p));
            }
        }
        Ok(Self {
            shape: self.shape,
            means,
            covs,
        })
    }

    pub fn check_allocation(&self, psi: &Allocation<F>) -> Result<()> {
        if psi.n_buckets() != self.shape.n_buckets || psi.n_policies() != self.shape.n_policies {
            return Err(Error::dim(format!(
                "allocation is {}x{} but stats are {}x{}",
                psi.n_buckets(),
                psi.n_policies(),
                self.shape.n_buckets,
                self.shape.n_policies
            )));
        }
        Ok(())
    }

    pub fn to_document(&self) -> StatsDocument {
        let (m, k) = (self.shape.n_buckets, self.shape.n_policies);
        let d = self.shape.outcome_dim;
        let mut cells = Vec::with_capacity(m * k);
        for g in 0..m {
            for j in 0..k {
                let cov = self.cov(g, j);
                cells.push(CellDocument {
                    g,
                    k: j,
                    mean: self.mean(g, j).iter().map(|x| x.as_f64()).collect(),
                    cov: (0..d)
                        .map(|r| cov[r * d..(r + 1) * d].iter().map(|x| x.as_f64()).collect())
                        .collect(),
                });
            }
        }
        StatsDocument {
            shape: self.shape,
            cells,
        }
    }

    pub fn from_document(doc: &StatsDocument) -> Result<Self> {
        let shape = doc.shape;
        shape.validate()?;
        let d = shape.outcome_dim;
        let cells = shape.n_cells();
        let mut means = vec![F::nan(); cells * d];
        let mut covs = vec![F::nan(); cells * d * d];
        let mut seen = vec![false; cells];
        for cell in &doc.cells {
            if cell.g >= shape.n_buckets || cell.k >= shape.n_policies {
                return Err(Error::dim(format!(
                    "cell (g={}, k={}) outside shape {shape:?}",
                    cell.g, cell.k
                )));
            }
            let c = cell.g * shape.n_policies + cell.k;
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::invalid(format!(
                    "cell (g={}, k={}) listed twice",
                    cell.g, cell.k
                )));
            }
            if cell.mean.len() != d || cell.cov.len() != d || cell.cov.iter().any(|r| r.len() != d) {
                return Err(Error::dim(format!(
                    "cell (g={}, k={}) must have a {d}-vector mean and {d}x{d} covariance",
                    cell.g, cell.k
                )));
            }
            for (i, &x) in cell.mean.iter().enumerate() {
                means[c * d + i] = F::of(x);
            }
            for (i, &x) in cell.cov.iter().flatten().enumerate() {
                covs[c * d * d + i] = F::of(x);
            }
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!(
                "missing cell (g={}, k={})",
                c / shape.n_policies,
                c % shape.n_policies
            )));
        }
        Self::new(shape, means, covs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("stats document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StatsDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }
}

/// On-disk form of [`PolicyCellStats`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsDocument {
    pub shape: ProblemShape,
    pub cells: Vec<CellDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellDocument {
    pub g: usize,
    pub k: usize,
    pub mean: Vec<f64>,
    /// Full row-major matrix.
    pub cov: Vec<Vec<f64>>,
}

/// Gaussian approximation `N(mean, cov)` of the total outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams<F> {
    pub mean: Vec<F>,
    pub cov: Vec<F>,
}

impl<F: Scalar> MixtureParams<F> {
    pub fn new(mean: Vec<F>, mut cov: Vec<F>) -> Result<Self> {
        let d = mean.len();
        if !(1..=2).contains(&d) || cov.len() != d * d {
            return Err(Error::dim("mixture mean must have 1 or 2 entries and cov d*d"));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("mixture mean is not finite"));
        }
        linalg::validate_and_clip_psd(&mut cov, d, F::of(PSD_TOL))?;
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self, i: usize) -> F {
        self.cov[i * self.dim() + i]
    }

    pub fn std_dev(&self, i: usize) -> F {
        self.variance(i).max(F::zero()).sqrt()
    }
}

/// `μ(ψ) = Σ ψ(g,k) μ_{g,k}` and `Σ(ψ) = Σ ψ(g,k) Σ_{g,k}`.
pub fn mixture_params<F: Scalar>(
    stats: &PolicyCellStats<F>,
    psi: &Allocation<F>,
) -> Result<MixtureParams<F>> {
    stats.check_allocation(psi)?;
    Ok(mixture_from_weights(stats, psi.as_slice()))
}

/// Linear mixture for arbitrary (possibly off-simplex) weights.
pub(crate) fn mixture_from_weights<F: Scalar>(
    stats: &PolicyCellStats<F>,
    weights: &[F],
) -> MixtureParams<F> {
    let d = stats.dim();
    let mut mean = vec![F::zero(); d];
    let mut cov = vec![F::zero(); d * d];
    for (c, &w) in weights.iter().enumerate() {
        if w == F::zero() {
            continue;
        }
        for (acc, &x) in mean.iter_mut().zip(stats.cell_mean(c)) {
            *acc = *acc + w * x;
        }
        for (acc, &x) in cov.iter_mut().zip(stats.cell_cov(c)) {
            *acc = *acc + w * x;
        }
    }
    MixtureParams { mean, cov }
}

/// Sum of the selected cells for a hard allocation.
pub(crate) fn mixture_from_choices<F: Scalar>(
    stats: &PolicyCellStats<F>,
    choices: &[usize],
) -> MixtureParams<F> {
    let d = stats.dim();
    let mut mean = vec![F::zero(); d];
    let mut cov = vec![F::zero(); d * d];
    for (g, &k) in choices.iter().enumerate() {
        for (acc, &x) in mean.iter_mut().zip(stats.mean(g, k)) {
            *acc = *acc + x;
        }
        for (acc, &x) in cov.iter_mut().zip(stats.cov(g, k)) {
            *acc = *acc + x;
        }
    }
    MixtureParams { mean, cov }
}

/// One draw of the total outcome, `(value)` or `(value, cost)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeSample<F> {
    values: [F; 2],
    dim: usize,
}

impl<F: Scalar> OutcomeSample<F> {
    pub fn new(y: &[F]) -> Result<Self> {
        if !(1..=2).contains(&y.len()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("outcome sample must have 1 or 2 finite entries"));
        }
        let mut values = [F::zero(); 2];
        values[..y.len()].copy_from_slice(y);
        Ok(Self {
            values,
            dim: y.len(),
        })
    }

    pub fn as_slice(&self) -> &[F] {
        &self.values[..self.dim]
    }

    pub fn value(&self) -> F {
        self.values[0]
    }

    /// Cost coordinate; `None` for value-only outcomes.
    pub fn cost(&self) -> Option<F> {
        (self.dim == 2).then_some(self.values[1])
    }
}

/// Affine map `y = mean + L z` with `L Lᵀ = cov`, `z` standard normal.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GaussianSampler<F> {
    mean: [F; 2],
    factor: [F; 4],
    dim: usize,
}

impl<F: Scalar> GaussianSampler<F> {
    pub fn new(params: &MixtureParams<F>) -> Result<Self> {
        let d = params.dim();
        let factor = linalg::psd_factor(&params.cov, d, F::of(PSD_TOL))?;
        let mut mean = [F::zero(); 2];
        mean[..d].copy_from_slice(&params.mean);
        Ok(Self { mean, factor, dim: d })
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> OutcomeSample<F> {
        let z0 = F::of(rng.sample::<f64, _>(StandardNormal));
        let mut values = [self.mean[0] + self.factor[0] * z0, F::zero()];
        if self.dim == 2 {
            let z1 = F::of(rng.sample::<f64, _>(StandardNormal));
            values[1] = self.mean[1] + self.factor[2] * z0 + self.factor[3] * z1;
        }
        OutcomeSample {
            values,
            dim: self.dim,
        }
    }
}

/// `n` i.i.d. draws from `N(μ(ψ), Σ(ψ))`, deterministic per `seed`.
pub fn sample_outcome<F: Scalar>(
    params: &MixtureParams<F>,
    n: usize,
    seed: u64,
) -> Result<Vec<OutcomeSample<F>>> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let sampler = GaussianSampler::new(params)?;
    let shards = sampling::map_shards(n, seed, |rng, count| {
        (0..count).map(|_| sampler.draw(rng)).collect::<Vec<_>>()
    });
    Ok(shards.concat())
}
