//! Projected gradient ascent of the success criterion over the product of
//! per-bucket probability simplices.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::criterion::{success_probability, CriterionMethod, CriterionValue, SuccessRegion};
use crate::error::{Error, Result};
use crate::gradient::{grad_closed_form, grad_lemma1, GradientEstimate};
use crate::model::{mixture_from_weights, mixture_params, Allocation, PolicyCellStats};
use crate::sampling;
use crate::scalar::Scalar;

/// Gradient norm below which a step with a vanishing criterion counts as stalled.
pub const STALL_GRAD_NORM: f64 = 1e-12;
pub const STALL_CRITERION: f64 = 1e-9;

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex<F: Scalar>(row: &[F]) -> Vec<F> {
    if row.is_empty() {
        return Vec::new();
    }
    let mut u = row.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut css = F::zero();
    let mut theta = F::zero();
    for (j, &uj) in u.iter().enumerate() {
        css = css + uj;
        let t = (css - F::one()) / F::of_usize(j + 1);
        if uj - t > F::zero() {
            theta = t;
        }
    }
    row.iter().map(|&v| (v - theta).max(F::zero())).collect()
}

/// Row-wise projection of a raw `M × K` matrix (row-major).
pub fn project_allocation<F: Scalar>(n_buckets: usize, n_policies: usize, raw: &[F]) -> Result<Allocation<F>> {
    if n_buckets == 0 || n_policies == 0 || raw.len() != n_buckets * n_policies {
        return Err(Error::dim(format!(
            "expected {n_buckets}x{n_policies} entries, got {}",
            raw.len()
        )));
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("cannot project non-finite weights"));
    }
    Ok(project_rows(n_buckets, n_policies, raw))
}

fn project_rows<F: Scalar>(n_buckets: usize, n_policies: usize, raw: &[F]) -> Allocation<F> {
    let weights = raw.chunks(n_policies).flat_map(project_simplex).collect();
    Allocation::from_parts_unchecked(n_buckets, n_policies, weights)
}

fn random_rows<F: Scalar, R: Rng + ?Sized>(rng: &mut R, k: usize, out: &mut [F]) {
    // Normalized exponentials are uniform on the simplex.
    let mut e = vec![0.0f64; k];
    for row in out.chunks_mut(k) {
        for x in e.iter_mut() {
            *x = rng.sample(Exp1);
        }
        let total: f64 = e.iter().sum();
        for (w, x) in row.iter_mut().zip(&e) {
            *w = F::of(x / total);
        }
    }
}

/// Best of `n_random` allocations drawn row-wise uniformly on the simplex,
/// ranked by the closed-form criterion. Ties go to the earliest draw.
pub fn explore_init<F: Scalar>(
    stats: &PolicyCellStats<F>,
    region: &SuccessRegion<F>,
    n_random: usize,
    seed: u64,
) -> Result<Allocation<F>> {
    if n_random == 0 {
        return Err(Error::invalid("explore init needs at least one candidate"));
    }
    region.check_dim(stats.dim())?;
    let shape = stats.shape();
    let (m, k) = (shape.n_buckets, shape.n_policies);
    let shards = sampling::map_shards(n_random, seed, |rng, count| {
        let mut w = vec![F::zero(); m * k];
        let mut best: Option<(F, Vec<F>)> = None;
        for _ in 0..count {
            random_rows(rng, k, &mut w);
            let p = success_probability(&mixture_from_weights(stats, &w), region)?;
            if best.as_ref().is_none_or(|(b, _)| p > *b) {
                best = Some((p, w.clone()));
            }
        }
        Ok::<_, Error>(best)
    });
    let mut best: Option<(F, Vec<F>)> = None;
    for shard in shards {
        if let Some((p, w)) = shard? {
            if best.as_ref().is_none_or(|(b, _)| p > *b) {
                best = Some((p, w));
            }
        }
    }
    let (_, w) = best.expect("at least one candidate");
    Ok(project_rows(m, k, &w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "F: Scalar + Serialize", deserialize = "F: Scalar + Deserialize<'de>"))]
pub enum InitStrategy<F> {
    Uniform,
    WarmStart { allocation: Allocation<F> },
    Explore { n_random: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GradientBackend {
    #[default]
    ClosedForm,
    /// Score-function Monte Carlo with `n` draws per step; the seed of step
    /// `t` is derived from `seed` and `t`.
    Lemma1Mc { n: usize, seed: u64 },
}

fn default_trace_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "F: Scalar + Serialize", deserialize = "F: Scalar + Deserialize<'de>"))]
pub struct OptimizerConfig<F> {
    pub init: InitStrategy<F>,
    pub learning_rate: F,
    pub n_steps: usize,
    #[serde(default)]
    pub gradient_backend: GradientBackend,
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
}

impl<F: Scalar> OptimizerConfig<F> {
    pub fn new(init: InitStrategy<F>, learning_rate: F, n_steps: usize) -> Self {
        Self {
            init,
            learning_rate,
            n_steps,
            gradient_backend: GradientBackend::ClosedForm,
            trace_every: 1,
        }
    }

    /// A zero learning rate is accepted (the run then only evaluates the init).
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= F::zero()) || !self.learning_rate.is_finite() {
            return Err(Error::invalid(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps must be at least 1"));
        }
        if self.trace_every == 0 {
            return Err(Error::invalid("trace_every must be at least 1"));
        }
        if let InitStrategy::Explore { n_random: 0, .. } = self.init {
            return Err(Error::invalid("explore init needs n_random >= 1"));
        }
        if let GradientBackend::Lemma1Mc { n: 0, .. } = self.gradient_backend {
            return Err(Error::invalid("Monte-Carlo gradient needs n >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult<F> {
    pub psi_init: Allocation<F>,
    pub psi_final: Allocation<F>,
    pub criterion_final: CriterionValue<F>,
    /// `(step, criterion)` before step `t` for every `t` divisible by
    /// `trace_every`, plus the final iterate when `n_steps` is.
    pub trace: Vec<(usize, F)>,
    pub stalled: bool,
}

fn initial<F: Scalar>(
    stats: &PolicyCellStats<F>,
    region: &SuccessRegion<F>,
    init: &InitStrategy<F>,
) -> Result<Allocation<F>> {
    let shape = stats.shape();
    match init {
        InitStrategy::Uniform => Ok(Allocation::uniform(shape.n_buckets, shape.n_policies)),
        InitStrategy::WarmStart { allocation } => {
            stats.check_allocation(allocation)?;
            project_allocation(shape.n_buckets, shape.n_policies, allocation.as_slice())
        }
        InitStrategy::Explore { n_random, seed } => explore_init(stats, region, *n_random, *seed),
    }
}

/// Runs exactly `n_steps` iterations of `ψ ← Π(ψ + η ∇C(ψ))` and returns the
/// last iterate.
pub fn run<F: Scalar>(
    stats: &PolicyCellStats<F>,
    region: &SuccessRegion<F>,
    config: &OptimizerConfig<F>,
) -> Result<OptResult<F>> {
    config.validate()?;
    region.check_dim(stats.dim())?;
    let shape = stats.shape();
    let (m, k) = (shape.n_buckets, shape.n_policies);
    let psi_init = initial(stats, region, &config.init)?;
    let mut psi = psi_init.clone();
    let eta = config.learning_rate;
    let criterion = |psi: &Allocation<F>| -> Result<F> { success_probability(&mixture_params(stats, psi)?, region) };
    let gradient = |psi: &Allocation<F>, t: usize| -> Result<GradientEstimate<F>> {
        match config.gradient_backend {
            GradientBackend::ClosedForm => grad_closed_form(stats, psi, region),
            GradientBackend::Lemma1Mc { n, seed } => {
                grad_lemma1(stats, psi, region, n, sampling::mix_seed(seed, t as u64))
            }
        }
    };

    let mut trace = Vec::with_capacity(config.n_steps / config.trace_every + 2);
    let mut stalled = false;
    let mut raw = vec![F::zero(); m * k];
    for t in 0..config.n_steps {
        let c = criterion(&psi)?;
        if t % config.trace_every == 0 {
            trace.push((t, c));
        }
        let grad = gradient(&psi, t).map_err(|e| Error::Step {
            step: t,
            source: Box::new(e),
        })?;
        if grad.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Step {
                step: t,
                source: Box::new(Error::numeric("non-finite gradient")),
            });
        }
        if grad.l2_norm() < F::of(STALL_GRAD_NORM) && c < F::of(STALL_CRITERION) {
            stalled = true;
        }
        for ((r, &w), &g) in raw.iter_mut().zip(psi.as_slice()).zip(&grad.grad) {
            *r = w + eta * g;
        }
        psi = project_rows(m, k, &raw);
    }
    let p = criterion(&psi)?;
    if config.n_steps % config.trace_every == 0 {
        trace.push((config.n_steps, p));
    }
    Ok(OptResult {
        psi_init,
        psi_final: psi,
        criterion_final: CriterionValue {
            p,
            method: CriterionMethod::ClosedForm,
            mc_stderr: None,
        },
        trace,
        stalled,
    })
}
