//! Gradients of the success criterion with respect to the allocation.
//!
//! Three independent routes: the score-function (likelihood-ratio) Monte
//! Carlo estimator, the chain rule through the closed-form CDFs, and central
//! finite differences of the closed form. Internals run in `f64`.

use serde::{Deserialize, Serialize};

use crate::bvn::{bvn_cdf_partials, bvn_pdf};
use crate::criterion::{normal_pdf, success_probability, SuccessRegion};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{mixture_from_weights, mixture_params, Allocation, GaussianSampler, OutcomeSample, PolicyCellStats};
use crate::sampling;
use crate::scalar::Scalar;

/// Relative ridge added to a singular `Σ(ψ)` before inversion.
pub const RIDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    Lemma1Mc,
    ClosedForm,
    FiniteDiff,
}

/// `M × K` gradient, row-major like [`Allocation`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate<F> {
    pub n_buckets: usize,
    pub n_policies: usize,
    pub grad: Vec<F>,
    pub method: GradientMethod,
    pub n_samples: Option<usize>,
    /// Per-entry Monte-Carlo standard error.
    pub stderr: Option<Vec<F>>,
    /// Set when `Σ(ψ)` had to be regularized before inversion.
    pub ridge_applied: bool,
}

impl<F: Scalar> GradientEstimate<F> {
    fn exact(psi: &Allocation<F>, grad: Vec<f64>, method: GradientMethod) -> Self {
        Self {
            n_buckets: psi.n_buckets(),
            n_policies: psi.n_policies(),
            grad: grad.into_iter().map(F::of).collect(),
            method,
            n_samples: None,
            stderr: None,
            ridge_applied: false,
        }
    }

    pub fn get(&self, g: usize, k: usize) -> F {
        self.grad[g * self.n_policies + k]
    }

    pub fn max_abs(&self) -> F {
        self.grad.iter().fold(F::zero(), |m, x| m.max(x.abs()))
    }

    pub fn l2_norm(&self) -> F {
        self.grad.iter().map(|&x| x * x).sum::<F>().sqrt()
    }
}

/// Per-cell quantities of the Gaussian score, precomputed once per `ψ`:
/// `a = Σ⁻¹μ_c`, `B = Σ⁻¹Σ_cΣ⁻¹`, `tr = ⟨Σ, B⟩`.
struct Score {
    d: usize,
    mean: [f64; 2],
    a: Vec<[f64; 2]>,
    b: Vec<[f64; 4]>,
    tr: Vec<f64>,
    ridge: bool,
}

impl Score {
    fn new<F: Scalar>(stats: &PolicyCellStats<F>, mean: &[F], cov: &[F]) -> Result<Self> {
        let d = stats.dim();
        let mut sigma: Vec<f64> = cov.iter().map(|x| x.as_f64()).collect();
        let tr = linalg::trace(&sigma, d);
        if !(tr > 0.0) {
            return Err(Error::numeric("Σ(ψ) is zero; the score gradient is undefined"));
        }
        let ridge = linalg::sym_eigenvalues(&sigma, d)[1] <= RIDGE * tr;
        if ridge {
            for i in 0..d {
                sigma[i * d + i] += RIDGE * tr;
            }
        }
        let inv = linalg::inverse(&sigma, d)
            .ok_or_else(|| Error::numeric("Σ(ψ) is not invertible after ridge"))?;
        let n_cells = stats.shape().n_cells();
        let (mut a, mut b, mut trs) = (Vec::with_capacity(n_cells), Vec::new(), Vec::new());
        for c in 0..n_cells {
            let mu: Vec<f64> = stats.cell_mean(c).iter().map(|x| x.as_f64()).collect();
            let sc: Vec<f64> = stats.cell_cov(c).iter().map(|x| x.as_f64()).collect();
            let av = linalg::matvec(&inv, &mu, d);
            let bm = linalg::matmul(&linalg::matmul(&inv, &sc, d), &inv, d);
            trs.push(linalg::frobenius(&sigma, &bm));
            let mut a2 = [0.0; 2];
            a2[..d].copy_from_slice(&av);
            let mut b4 = [0.0; 4];
            b4[..d * d].copy_from_slice(&bm);
            a.push(a2);
            b.push(b4);
        }
        let mut m = [0.0; 2];
        for (dst, src) in m.iter_mut().zip(mean) {
            *dst = src.as_f64();
        }
        Ok(Self { d, mean: m, a, b, tr: trs, ridge })
    }

    /// Adds `term_c(y)` and its square for every cell into `acc`
    /// (layout: sums then sums of squares).
    #[inline]
    fn accumulate(&self, y: &[f64], acc: &mut [f64]) {
        let n = self.a.len();
        let e0 = y[0] - self.mean[0];
        if self.d == 1 {
            for c in 0..n {
                let t = e0 * self.a[c][0] - 0.5 * (self.tr[c] - e0 * e0 * self.b[c][0]);
                acc[c] += t;
                acc[n + c] += t * t;
            }
        } else {
            let e1 = y[1] - self.mean[1];
            for c in 0..n {
                let b = &self.b[c];
                let quad = e0 * e0 * b[0] + e0 * e1 * (b[1] + b[2]) + e1 * e1 * b[3];
                let t = e0 * self.a[c][0] + e1 * self.a[c][1] - 0.5 * (self.tr[c] - quad);
                acc[c] += t;
                acc[n + c] += t * t;
            }
        }
    }
}

fn finish_mc<F: Scalar>(psi: &Allocation<F>, acc: &[f64], n: usize, ridge: bool) -> GradientEstimate<F> {
    let cells = acc.len() / 2;
    let nf = n as f64;
    let mut grad = Vec::with_capacity(cells);
    let mut stderr = Vec::with_capacity(cells);
    for c in 0..cells {
        let mean = acc[c] / nf;
        grad.push(F::of(mean));
        let se = if n > 1 {
            let var = ((acc[cells + c] - nf * mean * mean) / (nf - 1.0)).max(0.0);
            (var / nf).sqrt()
        } else {
            f64::INFINITY
        };
        stderr.push(F::of(se));
    }
    GradientEstimate {
        n_buckets: psi.n_buckets(),
        n_policies: psi.n_policies(),
        grad,
        method: GradientMethod::Lemma1Mc,
        n_samples: Some(n),
        stderr: Some(stderr),
        ridge_applied: ridge,
    }
}

/// Score-function estimate `E[I_S(Y) · ∂ ln ℓ(ψ, Y) / ∂ψ(g,k)]` from `n`
/// draws of `Y ~ N(μ(ψ), Σ(ψ))`, where the per-draw score of cell `(g,k)` is
/// `eᵀΣ⁻¹μ_{g,k} − ½⟨Σ − eeᵀ, Σ⁻¹Σ_{g,k}Σ⁻¹⟩` with `e = Y − μ(ψ)`.
/// Deterministic per `seed`.
pub fn grad_lemma1<F: Scalar>(
    stats: &PolicyCellStats<F>,
    psi: &Allocation<F>,
    region: &SuccessRegion<F>,
    n: usize,
    seed: u64,
) -> Result<GradientEstimate<F>> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    region.check_dim(stats.dim())?;
    let params = mixture_params(stats, psi)?;
    let score = Score::new(stats, &params.mean, &params.cov)?;
    let sampler = GaussianSampler::new(&params)?;
    let width = 2 * stats.shape().n_cells();
    let shards = sampling::map_shards(n, seed, |rng, count| {
        let mut acc = vec![0.0; width];
        let mut y = [0.0; 2];
        for _ in 0..count {
            let draw = sampler.draw(rng);
            if region.contains(draw.as_slice()) {
                for (dst, src) in y.iter_mut().zip(draw.as_slice()) {
                    *dst = src.as_f64();
                }
                score.accumulate(&y, &mut acc);
            }
        }
        acc
    });
    let mut acc = vec![0.0; width];
    for shard in shards {
        for (a, s) in acc.iter_mut().zip(shard) {
            *a += s;
        }
    }
    Ok(finish_mc(psi, &acc, n, score.ridge))
}

/// The same estimator on caller-supplied draws.
pub fn grad_lemma1_on_draws<F: Scalar>(
    stats: &PolicyCellStats<F>,
    psi: &Allocation<F>,
    region: &SuccessRegion<F>,
    draws: &[OutcomeSample<F>],
) -> Result<GradientEstimate<F>> {
    if draws.is_empty() {
        return Err(Error::invalid("no draws"));
    }
    region.check_dim(stats.dim())?;
    let params = mixture_params(stats, psi)?;
    let score = Score::new(stats, &params.mean, &params.cov)?;
    let mut acc = vec![0.0; 2 * stats.shape().n_cells()];
    for draw in draws {
        if draw.as_slice().len() != stats.dim() {
            return Err(Error::dim("draw dimension differs from stats"));
        }
        if region.contains(draw.as_slice()) {
            let y: Vec<f64> = draw.as_slice().iter().map(|v| v.as_f64()).collect();
            score.accumulate(&y, &mut acc);
        }
    }
    Ok(finish_mc(psi, &acc, draws.len(), score.ridge))
}

/// Scalar form of the score estimator for one bucket and a value-only
/// outcome: `μ_k e/Σ − (Σ_k/2)(Σ − e²)/Σ²` averaged over the draws inside
/// the region. Kept separate from [`grad_lemma1_on_draws`] as a cross-check.
pub fn score_gradient_single_bucket_1d<F: Scalar>(
    stats: &PolicyCellStats<F>,
    psi: &Allocation<F>,
    region: &SuccessRegion<F>,
    draws: &[OutcomeSample<F>],
) -> Result<GradientEstimate<F>> {
    let shape = stats.shape();
    if shape.n_buckets != 1 || shape.outcome_dim != 1 {
        return Err(Error::dim("single-bucket form needs M = 1 and d = 1"));
    }
    if draws.is_empty() {
        return Err(Error::invalid("no draws"));
    }
    region.check_dim(stats.dim())?;
    let params = mixture_params(stats, psi)?;
    let mu = params.mean[0].as_f64();
    let var = params.cov[0].as_f64();
    if !(var > 0.0) {
        return Err(Error::numeric("Σ(ψ) is zero; the score gradient is undefined"));
    }
    let k = shape.n_policies;
    let mut acc = vec![0.0; 2 * k];
    for draw in draws {
        if !region.contains(draw.as_slice()) {
            continue;
        }
        let e = draw.value().as_f64() - mu;
        for j in 0..k {
            let mu_k = stats.mean(0, j)[0].as_f64();
            let var_k = stats.cov(0, j)[0].as_f64();
            let t = mu_k * e / var - var_k / 2.0 * (var - e * e) / (var * var);
            acc[j] += t;
            acc[k + j] += t * t;
        }
    }
    Ok(finish_mc(psi, &acc, draws.len(), false))
}

/// Exact gradient of [`crate::criterion::criterion_closed_form`] by the chain
/// rule through the standardized thresholds and the correlation, using
/// `∂μ(ψ)/∂ψ(g,k) = μ_{g,k}` and `∂Σ(ψ)/∂ψ(g,k) = Σ_{g,k}`.
///
/// Fails when a thresholded coordinate has zero variance.
pub fn grad_closed_form<F: Scalar>(
    stats: &PolicyCellStats<F>,
    psi: &Allocation<F>,
    region: &SuccessRegion<F>,
) -> Result<GradientEstimate<F>> {
    region.check_dim(stats.dim())?;
    let params = mixture_params(stats, psi)?;
    let cells = stats.shape().n_cells();
    let zeros = || GradientEstimate::exact(psi, vec![0.0; cells], GradientMethod::ClosedForm);
    let f = |x: F| x.as_f64();
    let degenerate = || Error::numeric("zero variance on a thresholded coordinate; use the Monte-Carlo gradient");
    let mut grad = vec![0.0; cells];

    match *region {
        SuccessRegion::ValueAbove { r } => {
            let r = f(r);
            if r.is_infinite() {
                return Ok(zeros());
            }
            let (mu, var) = (f(params.mean[0]), f(params.cov[0]));
            if !(var > 0.0) {
                return Err(degenerate());
            }
            let sd = var.sqrt();
            let a = (mu - r) / sd;
            let dens = normal_pdf(a);
            for (c, g) in grad.iter_mut().enumerate() {
                let da = f(stats.cell_mean(c)[0]) / sd - a * f(stats.cell_cov(c)[0]) / (2.0 * var);
                *g = dens * da;
            }
        }
        SuccessRegion::ValueAboveCostBelow { r_v, r_c } => {
            let (rv, rc) = (f(r_v), f(r_c));
            let value_free = rv == f64::NEG_INFINITY;
            let cost_free = rc == f64::INFINITY;
            if rv == f64::INFINITY || rc == f64::NEG_INFINITY || (value_free && cost_free) {
                return Ok(zeros());
            }
            let (vv, cc, vc) = (f(params.cov[0]), f(params.cov[3]), f(params.cov[1]));
            if (!value_free && !(vv > 0.0)) || (!cost_free && !(cc > 0.0)) {
                return Err(degenerate());
            }
            let (sv, sc) = (vv.sqrt(), cc.sqrt());
            let a = (f(params.mean[0]) - rv) / sv;
            let b = (rc - f(params.mean[1])) / sc;
            let da = |c: usize| {
                f(stats.cell_mean(c)[0]) / sv - a * f(stats.cell_cov(c)[0]) / (2.0 * vv)
            };
            let db = |c: usize| {
                -f(stats.cell_mean(c)[1]) / sc - b * f(stats.cell_cov(c)[3]) / (2.0 * cc)
            };
            if value_free {
                let dens = normal_pdf(b);
                for (c, g) in grad.iter_mut().enumerate() {
                    *g = dens * db(c);
                }
            } else if cost_free {
                let dens = normal_pdf(a);
                for (c, g) in grad.iter_mut().enumerate() {
                    *g = dens * da(c);
                }
            } else {
                let rho = vc / (sv * sc);
                let (dh, dk) = bvn_cdf_partials(a, b, -rho);
                let dens = bvn_pdf(a, b, -rho);
                for (c, g) in grad.iter_mut().enumerate() {
                    let cov = stats.cell_cov(c);
                    let drho = f(cov[1]) / (sv * sc)
                        - rho / 2.0 * (f(cov[0]) / vv + f(cov[3]) / cc);
                    *g = dh * da(c) + dk * db(c) - dens * drho;
                }
            }
        }
    }
    Ok(GradientEstimate::exact(psi, grad, GradientMethod::ClosedForm))
}

/// Central differences of the closed-form criterion on each raw weight.
/// The perturbed weights leave the simplex on purpose; the criterion formula
/// is smooth there.
pub fn grad_finite_diff<F: Scalar>(
    stats: &PolicyCellStats<F>,
    psi: &Allocation<F>,
    region: &SuccessRegion<F>,
    h: F,
) -> Result<GradientEstimate<F>> {
    if !(h >= F::of(1e-7) && h <= F::of(1e-3)) {
        return Err(Error::invalid(format!("finite-difference step {h} outside [1e-7, 1e-3]")));
    }
    region.check_dim(stats.dim())?;
    stats.check_allocation(psi)?;
    let base: Vec<F> = psi.as_slice().to_vec();
    let mut grad = Vec::with_capacity(base.len());
    let mut w = base.clone();
    for c in 0..base.len() {
        w[c] = base[c] + h;
        let up = success_probability(&mixture_from_weights(stats, &w), region)?;
        w[c] = base[c] - h;
        let down = success_probability(&mixture_from_weights(stats, &w), region)?;
        w[c] = base[c];
        grad.push(((up - down) / (h + h)).as_f64());
    }
    Ok(GradientEstimate::exact(psi, grad, GradientMethod::FiniteDiff))
}
