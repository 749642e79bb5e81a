//! The success criterion `C(ψ) = P(Y(ψ) ∈ S)` under the Gaussian
//! approximation, in closed form and by Monte Carlo.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::bvn::bvn_cdf;
use crate::error::{Error, Result};
use crate::model::{mixture_params, Allocation, GaussianSampler, MixtureParams, PolicyCellStats};
use crate::sampling;
use crate::scalar::Scalar;

/// Standard normal CDF, `0.5 · erfc(-z/√2)`.
pub fn phi<F: Scalar>(z: F) -> F {
    F::of(0.5 * libm::erfc(-z.as_f64() * FRAC_1_SQRT_2))
}

pub fn normal_pdf<F: Scalar>(z: F) -> F {
    let z = z.as_f64();
    F::of((-0.5 * z * z).exp() / (2.0 * PI).sqrt())
}

/// Axis-aligned success region.
///
/// One-dimensional outcomes succeed when `y > r`; `(value, cost)` outcomes
/// succeed when `value > r_v` and `cost ≤ r_c`. Thresholds may be `±∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SuccessRegion<F> {
    ValueAbove { r: F },
    ValueAboveCostBelow { r_v: F, r_c: F },
}

impl<F: Scalar> SuccessRegion<F> {
    pub fn value_above(r: F) -> Self {
        Self::ValueAbove { r }
    }

    pub fn value_above_cost_below(r_v: F, r_c: F) -> Self {
        Self::ValueAboveCostBelow { r_v, r_c }
    }

    /// The region containing every outcome of dimension `d`.
    pub fn whole_space(d: usize) -> Self {
        if d == 1 {
            Self::ValueAbove { r: F::neg_infinity() }
        } else {
            Self::ValueAboveCostBelow {
                r_v: F::neg_infinity(),
                r_c: F::infinity(),
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::ValueAbove { .. } => 1,
            Self::ValueAboveCostBelow { .. } => 2,
        }
    }

    pub fn thresholds(&self) -> Vec<F> {
        match *self {
            Self::ValueAbove { r } => vec![r],
            Self::ValueAboveCostBelow { r_v, r_c } => vec![r_v, r_c],
        }
    }

    #[inline]
    pub fn contains(&self, y: &[F]) -> bool {
        match *self {
            Self::ValueAbove { r } => y[0] > r,
            Self::ValueAboveCostBelow { r_v, r_c } => y[0] > r_v && y[1] <= r_c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thresholds().iter().any(|t| t.is_nan()) {
            return Err(Error::invalid("success threshold is NaN"));
        }
        Ok(())
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        self.validate()?;
        if self.dim() != d {
            return Err(Error::dim(format!(
                "success region is {}-dimensional but outcomes are {d}-dimensional",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// JSON number, or `"inf"` / `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Threshold(f64);

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            x if x == f64::INFINITY => s.serialize_str("inf"),
            x if x == f64::NEG_INFINITY => s.serialize_str("-inf"),
            x => s.serialize_f64(x),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(Threshold(x)),
            Repr::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(Threshold(f64::INFINITY)),
                "-inf" => Ok(Threshold(f64::NEG_INFINITY)),
                other => Err(de::Error::custom(format!(
                    "threshold must be a number, \"inf\" or \"-inf\", got {other:?}"
                ))),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionDocument {
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r: Option<Threshold>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_v: Option<Threshold>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_c: Option<Threshold>,
}

impl<F: Scalar> Serialize for SuccessRegion<F> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let doc = match *self {
            Self::ValueAbove { r } => RegionDocument {
                dim: 1,
                r: Some(Threshold(r.as_f64())),
                r_v: None,
                r_c: None,
            },
            Self::ValueAboveCostBelow { r_v, r_c } => RegionDocument {
                dim: 2,
                r: None,
                r_v: Some(Threshold(r_v.as_f64())),
                r_c: Some(Threshold(r_c.as_f64())),
            },
        };
        doc.serialize(s)
    }
}

impl<'de, F: Scalar> Deserialize<'de> for SuccessRegion<F> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = RegionDocument::deserialize(d)?;
        match (doc.dim, doc.r, doc.r_v, doc.r_c) {
            (1, Some(r), None, None) => Ok(Self::ValueAbove { r: F::of(r.0) }),
            (2, None, Some(v), Some(c)) => Ok(Self::ValueAboveCostBelow {
                r_v: F::of(v.0),
                r_c: F::of(c.0),
            }),
            (1, ..) => Err(de::Error::custom("dim 1 region needs exactly field \"r\"")),
            (2, ..) => Err(de::Error::custom(
                "dim 2 region needs exactly fields \"r_v\" and \"r_c\"",
            )),
            (other, ..) => Err(de::Error::custom(format!("region dim must be 1 or 2, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionMethod {
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionValue<F> {
    pub p: F,
    pub method: CriterionMethod,
    /// `√(p(1-p)/n)` for Monte-Carlo estimates.
    pub mc_stderr: Option<F>,
}

fn step<F: Scalar>(hit: bool) -> F {
    if hit {
        F::one()
    } else {
        F::zero()
    }
}

/// `P(Y > r)` (or `P(Y ≤ r)` when `upper` is false) for `Y ~ N(mu, sd²)`,
/// with `sd = 0` treated as a point mass.
fn marginal<F: Scalar>(mu: F, sd: F, r: F, upper: bool) -> F {
    if sd == F::zero() {
        return step(if upper { mu > r } else { mu <= r });
    }
    let z = if upper { (mu - r) / sd } else { (r - mu) / sd };
    phi(z)
}

/// Closed-form success probability of `N(params.mean, params.cov)`.
///
/// For `(value, cost)` this is `P(Yv > r_v, Yc ≤ r_c) = Φ(z_c) − Φ₂(z_v, z_c; ρ)`,
/// evaluated as the single orthant `Φ₂(−z_v, z_c; −ρ)` to avoid cancellation
/// when the probability is small.
pub fn success_probability<F: Scalar>(params: &MixtureParams<F>, region: &SuccessRegion<F>) -> Result<F> {
    region.check_dim(params.dim())?;
    let p = match *region {
        SuccessRegion::ValueAbove { r } => {
            if r == F::neg_infinity() {
                F::one()
            } else if r == F::infinity() {
                F::zero()
            } else {
                marginal(params.mean[0], params.std_dev(0), r, true)
            }
        }
        SuccessRegion::ValueAboveCostBelow { r_v, r_c } => {
            if r_v == F::infinity() || r_c == F::neg_infinity() {
                return Ok(F::zero());
            }
            let value_free = r_v == F::neg_infinity();
            let cost_free = r_c == F::infinity();
            let (sv, sc) = (params.std_dev(0), params.std_dev(1));
            let pv = if value_free {
                F::one()
            } else {
                marginal(params.mean[0], sv, r_v, true)
            };
            let pc = if cost_free {
                F::one()
            } else {
                marginal(params.mean[1], sc, r_c, false)
            };
            if value_free || cost_free || sv == F::zero() || sc == F::zero() {
                // At most one coordinate is random: the event factorizes.
                pv * pc
            } else {
                let rho = params.cov[1] / (sv * sc);
                let a = (params.mean[0] - r_v) / sv;
                let b = (r_c - params.mean[1]) / sc;
                bvn_cdf(a, b, -rho)
            }
        }
    };
    Ok(p.max(F::zero()).min(F::one()))
}

pub fn criterion_closed_form<F: Scalar>(
    stats: &PolicyCellStats<F>,
    psi: &Allocation<F>,
    region: &SuccessRegion<F>,
) -> Result<CriterionValue<F>> {
    let params = mixture_params(stats, psi)?;
    Ok(CriterionValue {
        p: success_probability(&params, region)?,
        method: CriterionMethod::ClosedForm,
        mc_stderr: None,
    })
}

/// Fraction of `n` Gaussian draws that land in `region`, with its binomial
/// standard error. Deterministic per `seed`.
pub fn criterion_monte_carlo<F: Scalar>(
    stats: &PolicyCellStats<F>,
    psi: &Allocation<F>,
    region: &SuccessRegion<F>,
    n: usize,
    seed: u64,
) -> Result<CriterionValue<F>> {
    let params = mixture_params(stats, psi)?;
    monte_carlo_probability(&params, region, n, seed)
}

pub(crate) fn monte_carlo_probability<F: Scalar>(
    params: &MixtureParams<F>,
    region: &SuccessRegion<F>,
    n: usize,
    seed: u64,
) -> Result<CriterionValue<F>> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    region.check_dim(params.dim())?;
    let sampler = GaussianSampler::new(params)?;
    let hits: usize = sampling::map_shards(n, seed, |rng, count| {
        (0..count)
            .filter(|_| region.contains(sampler.draw(rng).as_slice()))
            .count()
    })
    .into_iter()
    .sum();
    let p = hits as f64 / n as f64;
    Ok(CriterionValue {
        p: F::of(p),
        method: CriterionMethod::MonteCarlo,
        mc_stderr: Some(F::of((p * (1.0 - p) / n as f64).sqrt())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(z: f64) -> f64 {
        super::phi(z)
    }

    fn bvn_cdf(h: f64, k: f64, rho: f64) -> f64 {
        crate::bvn::bvn_cdf(h, k, rho)
    }

    fn success_probability(params: &MixtureParams<f64>, region: &SuccessRegion<f64>) -> Result<f64> {
        super::success_probability(params, region)
    }

    fn toy() -> PolicyCellStats<f64> {
        PolicyCellStats::univariate(&[vec![2.0, 1.9, 0.0]], &[vec![9.0, 1.0, 9.0]]).unwrap()
    }

    fn table1_large() -> PolicyCellStats<f64> {
        PolicyCellStats::univariate(
            &[vec![2.0, 1.9, 0.0], vec![2.0, 1.0, 0.0], vec![2.0, 1.0, 0.0]],
            &[vec![9.0, 1.0, 9.0], vec![9.0, 1.0, 9.0], vec![1.0, 1.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn phi_reference_values() {
        assert_eq!(phi(0.0), 0.5);
        // 40-digit reference.
        assert!((phi(1.0) - 0.8413447460685429f64).abs() < 1e-12);
        assert!((phi(-8.0) - 6.220960574271784e-16f64).abs() < 1e-27);
        for z in [0.1, 0.7, 1.3, 2.9, 5.5] {
            assert!((phi(-z) - (1.0 - phi(z))).abs() <= 1e-15);
        }
        assert_eq!(phi(f64::INFINITY), 1.0);
        assert_eq!(phi(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn table1_all_reference_closed_form() {
        let psi = Allocation::one_hot(3, &[0, 0, 0]).unwrap();
        let c = criterion_closed_form(&table1_large(), &psi, &SuccessRegion::value_above(0.0)).unwrap();
        assert!((c.p - phi(6.0 / 19f64.sqrt())).abs() < 1e-15);
        assert!((c.p - 0.9156656905560925).abs() < 1e-12);
        assert_eq!(c.method, CriterionMethod::ClosedForm);
    }

    #[test]
    fn toy_policy_one() {
        let psi = Allocation::one_hot(3, &[1]).unwrap();
        let c = criterion_closed_form(&toy(), &psi, &SuccessRegion::value_above(0.0)).unwrap();
        assert!((c.p - 0.9712834401839982).abs() < 1e-12);
    }

    #[test]
    fn whole_space_has_probability_one() {
        let psi = Allocation::uniform(3, 3);
        let c = criterion_closed_form(&table1_large(), &psi, &SuccessRegion::whole_space(1)).unwrap();
        assert_eq!(c.p, 1.0);
        let mc = criterion_monte_carlo(&table1_large(), &psi, &SuccessRegion::whole_space(1), 1000, 1).unwrap();
        assert_eq!((mc.p, mc.mc_stderr), (1.0, Some(0.0)));
    }

    #[test]
    fn two_dimensional_rewrites_agree() {
        let params = MixtureParams::new(vec![1.5, 1.2], vec![5.0, 1.2, 1.2, 2.5]).unwrap();
        let region = SuccessRegion::value_above_cost_below(0.4, 2.0);
        let p = success_probability(&params, &region).unwrap();
        let (sv, sc) = (5f64.sqrt(), 2.5f64.sqrt());
        let zv = (0.4 - 1.5) / sv;
        let zc = (2.0 - 1.2) / sc;
        let rho = 1.2 / (sv * sc);
        let cdf_difference = phi(zc) - bvn_cdf(zv, zc, rho);
        assert!((p - cdf_difference).abs() < 1e-14);
    }

    #[test]
    fn degenerate_variance_branches() {
        let point = MixtureParams::new(vec![1.0], vec![0.0]).unwrap();
        assert_eq!(success_probability(&point, &SuccessRegion::value_above(0.5)).unwrap(), 1.0);
        assert_eq!(success_probability(&point, &SuccessRegion::value_above(1.0)).unwrap(), 0.0);

        let flat_cost = MixtureParams::new(vec![1.0, 2.0], vec![4.0, 0.0, 0.0, 0.0]).unwrap();
        let inside = SuccessRegion::value_above_cost_below(0.0, 2.0);
        let outside = SuccessRegion::value_above_cost_below(0.0, 1.9);
        assert!((success_probability(&flat_cost, &inside).unwrap() - phi(0.5)).abs() < 1e-15);
        assert_eq!(success_probability(&flat_cost, &outside).unwrap(), 0.0);

        let flat_value = MixtureParams::new(vec![1.0, 2.0], vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let r = SuccessRegion::value_above_cost_below(0.0, 3.0);
        assert!((success_probability(&flat_value, &r).unwrap() - phi(1.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_variance_monte_carlo_is_exact() {
        let stats = PolicyCellStats::univariate(&[vec![1.0, 3.0]], &[vec![0.0, 0.0]]).unwrap();
        let psi = Allocation::one_hot(2, &[0]).unwrap();
        let mc = criterion_monte_carlo(&stats, &psi, &SuccessRegion::value_above(0.5), 100, 0).unwrap();
        assert_eq!(mc.p, 1.0);
    }

    #[test]
    fn region_dimension_must_match() {
        let psi = Allocation::uniform(1, 3);
        let err = criterion_closed_form(&toy(), &psi, &SuccessRegion::value_above_cost_below(0.0, 0.0));
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn region_json_format() {
        let r: SuccessRegion<f64> = serde_json::from_str(r#"{"dim":1,"r":0.0}"#).unwrap();
        assert_eq!(r, SuccessRegion::value_above(0.0));
        let r2: SuccessRegion<f64> = serde_json::from_str(r#"{"dim":2,"r_v":"-inf","r_c":"inf"}"#).unwrap();
        assert_eq!(r2, SuccessRegion::whole_space(2));
        assert_eq!(serde_json::to_string(&r2).unwrap(), r#"{"dim":2,"r_v":"-inf","r_c":"inf"}"#);
        assert_eq!(
            serde_json::to_string(&SuccessRegion::value_above_cost_below(0.0, 3.0)).unwrap(),
            r#"{"dim":2,"r_v":0.0,"r_c":3.0}"#
        );
        assert!(serde_json::from_str::<SuccessRegion<f64>>(r#"{"dim":1,"r_v":0}"#).is_err());
        assert!(serde_json::from_str::<SuccessRegion<f64>>(r#"{"dim":1,"r":"huge"}"#).is_err());
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let psi = Allocation::uniform(3, 3);
        let region = SuccessRegion::value_above(3.0);
        let a = criterion_monte_carlo(&table1_large(), &psi, &region, 50_000, 9).unwrap();
        let b = criterion_monte_carlo(&table1_large(), &psi, &region, 50_000, 9).unwrap();
        assert_eq!(a, b);
    }
}
