//! Comparison methods: exhaustive hard allocations, per-bucket greedy, and
//! the LP relaxation and exact 0/1 versions of the multiple-choice knapsack.

use rayon::prelude::*;

use crate::criterion::{success_probability, CriterionMethod, CriterionValue, SuccessRegion};
use crate::error::{Error, Result};
use crate::model::{mixture_from_choices, Allocation, PolicyCellStats};
use crate::scalar::Scalar;

/// Largest `K^M` bruteforce will enumerate.
pub const BRUTEFORCE_LIMIT: u64 = 10_000_000;
/// Largest `M·K` accepted by the branch-and-bound solver.
pub const MIXEDINT_LIMIT: usize = 10_000;

fn decode(mut index: u64, m: usize, k: usize, out: &mut [usize]) {
    // Bucket 0 is the most significant digit, so index order is lexicographic.
    for g in (0..m).rev() {
        out[g] = (index % k as u64) as usize;
        index /= k as u64;
    }
}

/// Best one-hot allocation under the closed-form criterion. Ties go to the
/// lexicographically smallest policy tuple.
pub fn bruteforce<F: Scalar>(
    stats: &PolicyCellStats<F>,
    region: &SuccessRegion<F>,
) -> Result<(Allocation<F>, CriterionValue<F>)> {
    region.check_dim(stats.dim())?;
    let shape = stats.shape();
    let (m, k) = (shape.n_buckets, shape.n_policies);
    let total = u32::try_from(m)
        .ok()
        .and_then(|m| (k as u64).checked_pow(m))
        .filter(|&t| t <= BRUTEFORCE_LIMIT)
        .ok_or_else(|| {
            Error::TooLarge(format!(
                "bruteforce needs K^M = {k}^{m} evaluations, limit is {BRUTEFORCE_LIMIT}"
            ))
        })?;

    let pick = |a: (F, u64), b: (F, u64)| {
        if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
            b
        } else {
            a
        }
    };
    let (p, index) = (0..total)
        .into_par_iter()
        .map_init(
            || vec![0usize; m],
            |choices, i| {
                decode(i, m, k, choices);
                let p = success_probability(&mixture_from_choices(stats, choices), region)
                    .unwrap_or_else(|_| F::neg_infinity());
                (p, i)
            },
        )
        .reduce(|| (F::neg_infinity(), u64::MAX), pick);
    let mut choices = vec![0; m];
    decode(index, m, k, &mut choices);
    let allocation = Allocation::one_hot(k, &choices)?;
    let value = CriterionValue {
        p,
        method: CriterionMethod::ClosedForm,
        mc_stderr: None,
    };
    Ok((allocation, value))
}

fn argmax_value<F: Scalar>(stats: &PolicyCellStats<F>) -> Vec<usize> {
    let shape = stats.shape();
    (0..shape.n_buckets)
        .map(|g| {
            (1..shape.n_policies).fold(0, |best, j| {
                if stats.mean(g, j)[0] > stats.mean(g, best)[0] {
                    j
                } else {
                    best
                }
            })
        })
        .collect()
}

/// Per bucket, the policy with the largest mean value (lowest index on ties).
/// Value-only stats; see [`greedy_value`] for `(value, cost)` stats.
pub fn greedy_1d<F: Scalar>(stats: &PolicyCellStats<F>) -> Result<Allocation<F>> {
    if stats.dim() != 1 {
        return Err(Error::dim(
            "greedy1d is defined for value-only outcomes; use greedy_value to ignore the cost",
        ));
    }
    Allocation::one_hot(stats.shape().n_policies, &argmax_value(stats))
}

/// Greedy on the value coordinate of any stats.
pub fn greedy_value<F: Scalar>(stats: &PolicyCellStats<F>) -> Allocation<F> {
    Allocation::one_hot(stats.shape().n_policies, &argmax_value(stats))
        .expect("argmax indices are in range")
}

/// Multiple-choice knapsack: choose (a distribution over) one item per bucket
/// to maximize total value with total cost at most `budget`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackProblem<F> {
    n_buckets: usize,
    n_policies: usize,
    values: Vec<F>,
    costs: Vec<F>,
    budget: F,
}

impl<F: Scalar> KnapsackProblem<F> {
    /// Row-major `M × K` values and costs. The budget may be `+∞`.
    pub fn new(n_buckets: usize, n_policies: usize, values: Vec<F>, costs: Vec<F>, budget: F) -> Result<Self> {
        if n_buckets == 0 || n_policies == 0 {
            return Err(Error::dim("knapsack needs M >= 1 and K >= 1"));
        }
        let n = n_buckets * n_policies;
        if values.len() != n || costs.len() != n {
            return Err(Error::dim(format!(
                "expected {n} values and costs, got {} and {}",
                values.len(),
                costs.len()
            )));
        }
        if values.iter().chain(&costs).any(|x| !x.is_finite()) {
            return Err(Error::invalid("knapsack values and costs must be finite"));
        }
        if budget.is_nan() {
            return Err(Error::invalid("knapsack budget is NaN"));
        }
        Ok(Self {
            n_buckets,
            n_policies,
            values,
            costs,
            budget,
        })
    }

    /// Values and costs are the cell means of `(value, cost)` stats; value-only
    /// stats get zero costs.
    pub fn from_stats(stats: &PolicyCellStats<F>, budget: F) -> Result<Self> {
        let shape = stats.shape();
        let (m, k) = (shape.n_buckets, shape.n_policies);
        let mut values = Vec::with_capacity(m * k);
        let mut costs = Vec::with_capacity(m * k);
        for g in 0..m {
            for j in 0..k {
                let mu = stats.mean(g, j);
                values.push(mu[0]);
                costs.push(if mu.len() == 2 { mu[1] } else { F::zero() });
            }
        }
        Self::new(m, k, values, costs, budget)
    }

    /// Budget taken from the region's cost threshold (unbounded for value-only
    /// regions).
    pub fn from_region(stats: &PolicyCellStats<F>, region: &SuccessRegion<F>) -> Result<Self> {
        region.check_dim(stats.dim())?;
        let budget = match *region {
            SuccessRegion::ValueAbove { .. } => F::infinity(),
            SuccessRegion::ValueAboveCostBelow { r_c, .. } => r_c,
        };
        Self::from_stats(stats, budget)
    }

    pub fn n_buckets(&self) -> usize {
        self.n_buckets
    }

    pub fn n_policies(&self) -> usize {
        self.n_policies
    }

    pub fn value(&self, g: usize, k: usize) -> F {
        self.values[g * self.n_policies + k]
    }

    pub fn cost(&self, g: usize, k: usize) -> F {
        self.costs[g * self.n_policies + k]
    }

    pub fn budget(&self) -> F {
        self.budget
    }

    /// `(Σ ψ·value, Σ ψ·cost)`.
    pub fn evaluate(&self, psi: &Allocation<F>) -> (F, F) {
        let w = psi.as_slice();
        let dot = |x: &[F]| w.iter().zip(x).map(|(&a, &b)| a * b).sum::<F>();
        (dot(&self.values), dot(&self.costs))
    }

    /// Absolute slack for budget comparisons.
    fn tolerance(&self) -> F {
        let scale = self
            .costs
            .iter()
            .fold(F::zero(), |acc, c| acc + c.abs())
            .max(self.budget.abs().min(F::max_value()))
            .max(F::one());
        F::of(1e-12) * scale
    }

    fn min_cost_item(&self, g: usize) -> usize {
        (1..self.n_policies).fold(0, |best, j| {
            let (c, cb) = (self.cost(g, j), self.cost(g, best));
            if c < cb || (c == cb && self.value(g, j) > self.value(g, best)) {
                j
            } else {
                best
            }
        })
    }

    /// Items on the upper convex hull of bucket `g` in `(cost, value)`,
    /// starting at the cheapest item, with strictly increasing cost and
    /// value and strictly decreasing slopes.
    fn hull(&self, g: usize) -> Vec<usize> {
        let mut items: Vec<usize> = (0..self.n_policies).collect();
        items.sort_by(|&a, &b| {
            self.cost(g, a)
                .partial_cmp(&self.cost(g, b))
                .unwrap()
                .then(self.value(g, b).partial_cmp(&self.value(g, a)).unwrap())
                .then(a.cmp(&b))
        });
        let mut undominated: Vec<usize> = Vec::new();
        for j in items {
            match undominated.last() {
                Some(&last) if self.value(g, j) <= self.value(g, last) => {}
                _ => undominated.push(j),
            }
        }
        let slope = |a: usize, b: usize| {
            (self.value(g, b) - self.value(g, a)) / (self.cost(g, b) - self.cost(g, a))
        };
        let mut hull: Vec<usize> = Vec::new();
        for j in undominated {
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                if slope(a, b) <= slope(b, j) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(j);
        }
        hull
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KnapsackSolution<F> {
    Feasible {
        allocation: Allocation<F>,
        objective: F,
        cost: F,
    },
    /// Even the cheapest selection exceeds the budget.
    Infeasible { min_cost: F },
}

impl<F: Scalar> KnapsackSolution<F> {
    pub fn allocation(&self) -> Option<&Allocation<F>> {
        match self {
            Self::Feasible { allocation, .. } => Some(allocation),
            Self::Infeasible { .. } => None,
        }
    }

    pub fn objective(&self) -> Option<F> {
        match self {
            Self::Feasible { objective, .. } => Some(*objective),
            Self::Infeasible { .. } => None,
        }
    }
}

/// A hull segment: moving bucket `group` from hull point `step` to `step + 1`.
#[derive(Debug, Clone, Copy)]
struct Segment<F> {
    group: usize,
    step: usize,
    dc: F,
    dv: F,
}

struct Hulls<F> {
    hulls: Vec<Vec<usize>>,
    /// All segments, best slope first.
    segments: Vec<Segment<F>>,
}

impl<F: Scalar> Hulls<F> {
    fn new(problem: &KnapsackProblem<F>) -> Self {
        let hulls: Vec<Vec<usize>> = (0..problem.n_buckets).map(|g| problem.hull(g)).collect();
        let mut segments = Vec::new();
        for (g, h) in hulls.iter().enumerate() {
            for (step, w) in h.windows(2).enumerate() {
                segments.push(Segment {
                    group: g,
                    step,
                    dc: problem.cost(g, w[1]) - problem.cost(g, w[0]),
                    dv: problem.value(g, w[1]) - problem.value(g, w[0]),
                });
            }
        }
        // Within a bucket slopes strictly decrease, so the stable sort keeps
        // each bucket's segments in order.
        segments.sort_by(|a, b| {
            (b.dv / b.dc)
                .partial_cmp(&(a.dv / a.dc))
                .unwrap()
                .then(a.group.cmp(&b.group))
                .then(a.step.cmp(&b.step))
        });
        Self { hulls, segments }
    }

    /// Greedy LP fill of buckets `>= from` with `slack` budget left after
    /// their cheapest items. A segment overshooting by at most `tol` is taken
    /// whole. Returns the value gained and, if a segment was split,
    /// `(group, fraction)`; `positions` receives the reached hull step.
    fn fill(
        &self,
        from: usize,
        mut slack: F,
        tol: F,
        positions: Option<&mut Vec<usize>>,
    ) -> (F, Option<(usize, F)>) {
        let mut gain = F::zero();
        let mut split = None;
        let mut pos = positions;
        for s in self.segments.iter().filter(|s| s.group >= from) {
            if s.dc <= slack + tol {
                slack = (slack - s.dc).max(F::zero());
                gain = gain + s.dv;
                if let Some(p) = pos.as_deref_mut() {
                    p[s.group] = s.step + 1;
                }
            } else {
                if slack > F::zero() {
                    let t = slack / s.dc;
                    gain = gain + t * s.dv;
                    split = Some((s.group, t));
                }
                break;
            }
        }
        (gain, split)
    }
}

/// Exact LP relaxation (soft allocations). The optimum has at most one
/// bucket mixing two policies.
pub fn linprog_mckp<F: Scalar>(problem: &KnapsackProblem<F>) -> Result<KnapsackSolution<F>> {
    let (m, k) = (problem.n_buckets, problem.n_policies);
    let base: Vec<usize> = (0..m).map(|g| problem.min_cost_item(g)).collect();
    let min_cost: F = base.iter().enumerate().map(|(g, &j)| problem.cost(g, j)).sum();
    let tol = problem.tolerance();
    if min_cost > problem.budget + tol {
        return Ok(KnapsackSolution::Infeasible { min_cost });
    }
    let hulls = Hulls::new(problem);
    let mut positions = vec![0usize; m];
    let slack = (problem.budget - min_cost).max(F::zero());
    let (_, split) = hulls.fill(0, slack, tol, Some(&mut positions));
    let mut weights = vec![F::zero(); m * k];
    for g in 0..m {
        let here = hulls.hulls[g][positions[g]];
        match split {
            Some((sg, t)) if sg == g => {
                let next = hulls.hulls[g][positions[g] + 1];
                weights[g * k + here] = F::one() - t;
                weights[g * k + next] = t;
            }
            _ => weights[g * k + here] = F::one(),
        }
    }
    let allocation = Allocation::new(m, k, weights)?;
    let (objective, cost) = problem.evaluate(&allocation);
    Ok(KnapsackSolution::Feasible {
        allocation,
        objective,
        cost,
    })
}

/// Exact 0/1 optimum (hard allocations) by depth-first branch and bound with
/// the LP relaxation of the remaining buckets as the bound. Buckets and
/// policies are visited in index order and only strict improvements replace
/// the incumbent, so ties go to the lexicographically smallest selection.
pub fn mixedint_mckp<F: Scalar>(problem: &KnapsackProblem<F>) -> Result<KnapsackSolution<F>> {
    let (m, k) = (problem.n_buckets, problem.n_policies);
    if m * k > MIXEDINT_LIMIT {
        return Err(Error::TooLarge(format!(
            "mixedint accepts M*K <= {MIXEDINT_LIMIT}, got {}",
            m * k
        )));
    }
    let base: Vec<usize> = (0..m).map(|g| problem.min_cost_item(g)).collect();
    let tol = problem.tolerance();
    let budget = problem.budget + tol;
    // Cheapest cost and its value for buckets g.., used by the bound.
    let mut min_cost_from = vec![F::zero(); m + 1];
    let mut base_value_from = vec![F::zero(); m + 1];
    for g in (0..m).rev() {
        min_cost_from[g] = min_cost_from[g + 1] + problem.cost(g, base[g]);
        base_value_from[g] = base_value_from[g + 1] + problem.value(g, base[g]);
    }
    if min_cost_from[0] > budget {
        return Ok(KnapsackSolution::Infeasible {
            min_cost: min_cost_from[0],
        });
    }
    let hulls = Hulls::new(problem);
    let scale = problem
        .values
        .iter()
        .fold(F::one(), |acc, v| acc.max(v.abs()))
        * F::of_usize(m);
    let eps = F::of(1e-12) * scale;
    let bound = |g: usize, remaining: F| {
        let slack = (remaining - min_cost_from[g]).max(F::zero());
        base_value_from[g] + hulls.fill(g, slack, tol, None).0
    };

    let mut best_value = F::neg_infinity();
    let mut best: Option<Vec<usize>> = None;
    let mut choice = vec![0usize; m];
    let mut next = vec![0usize; m];
    let mut cost_at = vec![F::zero(); m + 1];
    let mut value_at = vec![F::zero(); m + 1];
    let mut g = 0usize;
    loop {
        if g == m {
            if value_at[m] > best_value + eps || best.is_none() {
                best_value = value_at[m];
                best = Some(choice.clone());
            }
            g -= 1;
            continue;
        }
        let mut descended = false;
        while next[g] < k {
            let j = next[g];
            next[g] += 1;
            let c = cost_at[g] + problem.cost(g, j);
            if c + min_cost_from[g + 1] > budget {
                continue;
            }
            let v = value_at[g] + problem.value(g, j);
            if best.is_some() && v + bound(g + 1, budget - c) <= best_value + eps {
                continue;
            }
            choice[g] = j;
            cost_at[g + 1] = c;
            value_at[g + 1] = v;
            g += 1;
            if g < m {
                next[g] = 0;
            }
            descended = true;
            break;
        }
        if !descended {
            if g == 0 {
                break;
            }
            g -= 1;
        }
    }
    let choices = best.expect("the cheapest selection is feasible");
    let allocation = Allocation::one_hot(k, &choices)?;
    let (objective, cost) = problem.evaluate(&allocation);
    Ok(KnapsackSolution::Feasible {
        allocation,
        objective,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criterion::phi;

    fn table1_large() -> PolicyCellStats<f64> {
        PolicyCellStats::univariate(
            &[vec![2.0, 1.9, 0.0], vec![2.0, 1.0, 0.0], vec![2.0, 1.0, 0.0]],
            &[vec![9.0, 1.0, 9.0], vec![9.0, 1.0, 9.0], vec![1.0, 1.0, 1.0]],
        )
        .unwrap()
    }

    fn hand() -> KnapsackProblem<f64> {
        KnapsackProblem::new(1, 2, vec![2.0, 1.0], vec![1.0, 0.5], 0.75).unwrap()
    }

    #[test]
    fn bruteforce_table1_large_at_zero() {
        let (psi, c) = bruteforce(&table1_large(), &SuccessRegion::value_above(0.0)).unwrap();
        assert_eq!(psi.hard_choices(), Some(vec![1, 1, 0]));
        assert!((c.p - phi(4.9 / 3f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn bruteforce_whole_space_picks_reference() {
        let stats = PolicyCellStats::univariate(&[vec![1.0, 5.0, 2.0]], &[vec![1.0, 1.0, 1.0]]).unwrap();
        let (psi, c) = bruteforce(&stats, &SuccessRegion::whole_space(1)).unwrap();
        assert_eq!(psi.hard_choices(), Some(vec![0]));
        assert_eq!(c.p, 1.0);
    }

    #[test]
    fn bruteforce_table2_case_i() {
        let stats = PolicyCellStats::bivariate(
            &[vec![2.0, 1.0]],
            &[vec![9.0, 1.0]],
            &[vec![1.0, 1.5]],
            &[vec![4.0, 1.0]],
            &[vec![0.5, 0.5]],
        )
        .unwrap();
        let (psi, _) = bruteforce(&stats, &SuccessRegion::value_above_cost_below(0.0, 3.0)).unwrap();
        assert_eq!(psi.hard_choices(), Some(vec![1]));
    }

    #[test]
    fn bruteforce_refuses_huge_problems() {
        let stats = PolicyCellStats::univariate(&vec![vec![0.0; 4]; 12], &vec![vec![1.0; 4]; 12]).unwrap();
        assert!(matches!(
            bruteforce(&stats, &SuccessRegion::value_above(0.0)),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn greedy_on_table1_and_ties() {
        assert_eq!(greedy_1d(&table1_large()).unwrap().hard_choices(), Some(vec![0, 0, 0]));
        let flat = PolicyCellStats::univariate(&[vec![1.0, 1.0]], &[vec![1.0, 2.0]]).unwrap();
        assert_eq!(greedy_1d(&flat).unwrap().hard_choices(), Some(vec![0]));
        let single = PolicyCellStats::univariate(&[vec![1.0]], &[vec![1.0]]).unwrap();
        assert_eq!(greedy_1d(&single).unwrap().hard_choices(), Some(vec![0]));
    }

    #[test]
    fn hand_instance() {
        let lp = linprog_mckp(&hand()).unwrap();
        let psi = lp.allocation().unwrap();
        assert_eq!(psi.as_slice(), &[0.5, 0.5]);
        assert_eq!(lp.objective(), Some(1.5));
        let ip = mixedint_mckp(&hand()).unwrap();
        assert_eq!(ip.allocation().unwrap().hard_choices(), Some(vec![1]));
        assert_eq!(ip.objective(), Some(1.0));
    }

    #[test]
    fn hand_instance_against_grid() {
        let best = (0..=10_000)
            .map(|i| i as f64 / 10_000.0)
            .filter(|t| t * 1.0 + (1.0 - t) * 0.5 <= 0.75 + 1e-12)
            .map(|t| t * 2.0 + (1.0 - t))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((best - 1.5).abs() < 1e-12);
    }

    #[test]
    fn unconstrained_lp_is_greedy() {
        let p = KnapsackProblem::from_stats(&table1_large(), f64::INFINITY).unwrap();
        let lp = linprog_mckp(&p).unwrap();
        assert_eq!(lp.allocation().unwrap().hard_choices(), Some(vec![0, 0, 0]));
        let ip = mixedint_mckp(&p).unwrap();
        assert_eq!(ip.allocation(), greedy_1d(&table1_large()).ok().as_ref());
    }

    #[test]
    fn budget_exactly_at_greedy_cost() {
        let p = KnapsackProblem::<f64>::new(
            2,
            2,
            vec![3.0, 1.0, 2.0, 1.5],
            vec![0.7, 0.1, 0.9, 0.2],
            1.6,
        )
        .unwrap();
        let lp = linprog_mckp(&p).unwrap();
        assert_eq!(lp.allocation().unwrap().hard_choices(), Some(vec![0, 0]));
        assert!((lp.objective().unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_is_reported() {
        let p = KnapsackProblem::new(1, 2, vec![1.0, 2.0], vec![1.0, 2.0], 0.5).unwrap();
        assert_eq!(linprog_mckp(&p).unwrap(), KnapsackSolution::Infeasible { min_cost: 1.0 });
        assert_eq!(mixedint_mckp(&p).unwrap(), KnapsackSolution::Infeasible { min_cost: 1.0 });
    }

    #[test]
    fn hull_drops_dominated_and_concave_points() {
        // (cost, value): (0,0) (1,1) (2,3) (3,3.5) (2.5,2)
        let p = KnapsackProblem::new(
            1,
            5,
            vec![0.0, 1.0, 3.0, 3.5, 2.0],
            vec![0.0, 1.0, 2.0, 3.0, 2.5],
            10.0,
        )
        .unwrap();
        assert_eq!(p.hull(0), vec![0, 2, 3]);
    }
}
