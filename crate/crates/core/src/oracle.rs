//! Exponential-time reference computations used to verify the closed forms and
//! the greedy policies: explicit hypothesis enumeration, edge weights built from
//! explicit subregions, exact policy costs, and optimal policies by dynamic
//! programming over observation states.
//!
//! Nothing here is fast. Every entry point checks a size cap.

use crate::belief::BeliefState;
use crate::error::{Error, Result};
use crate::model::{Observation, ProblemInstance, TestId};
use crate::policy::Policy;
use crate::runner::{self, Termination};

pub const ENUMERATION_CAP: usize = 20;
pub const NAIVE_WEC_CAP: usize = 12;
pub const DP_TEST_CAP: usize = 10;
pub const DP_REGION_CAP: usize = 5;

/// All `2^n` outcome vectors with their prior probabilities. Row `h` is the
/// bitmask with bit `t` set iff test `t` evaluates to 1.
#[derive(Debug, Clone)]
pub struct HypothesisTable {
    num_tests: usize,
    probs: Vec<f64>,
}

impl HypothesisTable {
    pub fn num_tests(&self) -> usize {
        self.num_tests
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, h: usize) -> f64 {
        self.probs[h]
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().copied().enumerate()
    }

    /// Full version space `H(x_A)`: rows agreeing with every observed outcome.
    pub fn version_space<'a>(&'a self, obs: &'a Observation) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.rows()
            .filter(move |&(h, _)| obs.entries().iter().all(|&(t, x)| bit(h, t) == x))
    }

    /// Relevant version space `H_R(x_A)`: rows agreeing with the observed tests of `region`.
    pub fn relevant_version_space<'a>(
        &'a self,
        instance: &'a ProblemInstance,
        r: usize,
        obs: &'a Observation,
    ) -> impl Iterator<Item = (usize, f64)> + 'a {
        let region = instance.region(r);
        self.rows().filter(move |&(h, _)| {
            region
                .tests()
                .iter()
                .all(|&t| obs.get(t).is_none_or(|x| bit(h, t) == x))
        })
    }
}

#[inline]
fn bit(h: usize, t: TestId) -> bool {
    (h >> t.index()) & 1 == 1
}

fn in_region(instance: &ProblemInstance, r: usize, h: usize) -> bool {
    instance.region(r).tests().iter().all(|&t| bit(h, t))
}

/// Enumerates every hypothesis of `instance`.
pub fn enumerate(instance: &ProblemInstance) -> Result<HypothesisTable> {
    let n = instance.num_tests();
    if n > ENUMERATION_CAP {
        return Err(Error::TooManyTests {
            num_tests: n,
            cap: ENUMERATION_CAP,
        });
    }
    let mut probs = vec![1.0f64; 1usize << n];
    for (h, p) in probs.iter_mut().enumerate() {
        for (t, &theta) in instance.bias().iter().enumerate() {
            *p *= if (h >> t) & 1 == 1 { theta } else { 1.0 - theta };
        }
    }
    Ok(HypothesisTable { num_tests: n, probs })
}

/// `Σ P(h)` over `h ∈ R ∩ H_R(x_A)`.
pub fn validity_mass(table: &HypothesisTable, instance: &ProblemInstance, r: usize, obs: &Observation) -> f64 {
    table
        .relevant_version_space(instance, r, obs)
        .filter(|&(h, _)| in_region(instance, r, h))
        .map(|(_, p)| p)
        .sum()
}

/// `Σ P(h)` over `h ∈ ¬R ∩ H_R(x_A)`.
pub fn invalidity_mass(table: &HypothesisTable, instance: &ProblemInstance, r: usize, obs: &Observation) -> f64 {
    table
        .relevant_version_space(instance, r, obs)
        .filter(|&(h, _)| !in_region(instance, r, h))
        .map(|(_, p)| p)
        .sum()
}

/// Edge weight of region `r`'s one-versus-all problem, split by edge type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeWeights {
    /// Edges between the region subregion and each singleton subregion.
    pub cross: f64,
    /// Ordered pairs of distinct singleton subregions.
    pub pairs: f64,
    /// Self-edges on singleton subregions.
    pub self_edges: f64,
}

impl EdgeWeights {
    pub fn with_self_edges(&self) -> f64 {
        self.cross + self.pairs + self.self_edges
    }

    pub fn without_self_edges(&self) -> f64 {
        self.cross + self.pairs
    }
}

/// Builds the subregions explicitly (the region's hypotheses as one subregion,
/// every other hypothesis in `H_R(x_A)` as its own) and sums edge weights pair by pair.
pub fn naive_edge_weights(
    table: &HypothesisTable,
    instance: &ProblemInstance,
    r: usize,
    obs: &Observation,
) -> Result<EdgeWeights> {
    if instance.num_tests() > NAIVE_WEC_CAP {
        return Err(Error::TooManyTests {
            num_tests: instance.num_tests(),
            cap: NAIVE_WEC_CAP,
        });
    }
    let mut region_mass = 0.0;
    let mut singletons: Vec<f64> = Vec::new();
    for (h, p) in table.relevant_version_space(instance, r, obs) {
        if in_region(instance, r, h) {
            region_mass += p;
        } else {
            singletons.push(p);
        }
    }
    let mut cross = 0.0;
    let mut pairs = 0.0;
    let mut self_edges = 0.0;
    for (i, &pi) in singletons.iter().enumerate() {
        cross += region_mass * pi;
        for (j, &pj) in singletons.iter().enumerate() {
            if i == j {
                self_edges += pi * pj;
            } else {
                pairs += pi * pj;
            }
        }
    }
    Ok(EdgeWeights {
        cross,
        pairs,
        self_edges,
    })
}

/// Edge weight with self-edges, by explicit construction.
pub fn naive_wec(instance: &ProblemInstance, r: usize, obs: &Observation) -> Result<f64> {
    let table = enumerate(instance)?;
    Ok(naive_edge_weights(&table, instance, r, obs)?.with_self_edges())
}

/// Closed-form edge weight without self-edges, valid only for a uniform prior:
/// `P(S1) P(¬S1) + P(¬S1) (P(¬S1) - 1/|H|)`.
pub fn uniform_weight_shortcut(region_mass: f64, other_mass: f64, num_hypotheses: usize) -> f64 {
    region_mass * other_mass + other_mass * (other_mass - 1.0 / num_hypotheses as f64)
}

/// `f_EC` for region `r` from explicitly constructed weights.
pub fn naive_f_ec(table: &HypothesisTable, instance: &ProblemInstance, r: usize, obs: &Observation) -> Result<f64> {
    let init = naive_edge_weights(table, instance, r, &Observation::new(instance.num_tests()))?.with_self_edges();
    let pruned = naive_edge_weights(table, instance, r, obs)?.with_self_edges();
    Ok(1.0 - pruned / init)
}

/// Noisy-OR of [`naive_f_ec`] over all regions.
pub fn naive_f_drd(table: &HypothesisTable, instance: &ProblemInstance, obs: &Observation) -> Result<f64> {
    let mut prod = 1.0;
    for r in 0..instance.num_regions() {
        prod *= 1.0 - naive_f_ec(table, instance, r, obs)?;
    }
    Ok(1.0 - prod)
}

/// What an optimal policy must certify before stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimalMode {
    IdentifyOne,
    CheckAll,
}

const UNOBSERVED: u8 = 0;
const FAILED: u8 = 1;
const PASSED: u8 = 2;

struct Dp<'a> {
    instance: &'a ProblemInstance,
    mode: OptimalMode,
    pow3: Vec<usize>,
    memo: Vec<f64>,
}

impl Dp<'_> {
    fn status(&self, digits: &[u8]) -> (Vec<bool>, Vec<bool>) {
        // (killed, validated) per region
        let m = self.instance.num_regions();
        let mut killed = vec![false; m];
        let mut validated = vec![false; m];
        for r in 0..m {
            let tests = self.instance.region(r).tests();
            killed[r] = tests.iter().any(|t| digits[t.index()] == FAILED);
            validated[r] = tests.iter().all(|t| digits[t.index()] == PASSED);
        }
        (killed, validated)
    }

    fn solve(&mut self, key: usize, digits: &mut Vec<u8>) -> f64 {
        if !self.memo[key].is_nan() {
            return self.memo[key];
        }
        let (killed, validated) = self.status(digits);
        let terminal = match self.mode {
            OptimalMode::IdentifyOne => validated.iter().any(|&v| v) || killed.iter().all(|&k| k),
            OptimalMode::CheckAll => killed.iter().zip(&validated).all(|(&k, &v)| k || v),
        };
        if terminal {
            self.memo[key] = 0.0;
            return 0.0;
        }
        // Only tests of still-open regions can change the stopping condition.
        let n = self.instance.num_tests();
        let mut relevant = vec![false; n];
        for r in 0..self.instance.num_regions() {
            if !killed[r] && !validated[r] {
                for &t in self.instance.region(r).tests() {
                    if digits[t.index()] == UNOBSERVED {
                        relevant[t.index()] = true;
                    }
                }
            }
        }
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !relevant[t] {
                continue;
            }
            let theta = self.instance.bias()[t];
            digits[t] = PASSED;
            let pass = self.solve(key + PASSED as usize * self.pow3[t], digits);
            digits[t] = FAILED;
            let fail = self.solve(key + FAILED as usize * self.pow3[t], digits);
            digits[t] = UNOBSERVED;
            let v = self.instance.costs()[t] + theta * pass + (1.0 - theta) * fail;
            if v < best {
                best = v;
            }
        }
        self.memo[key] = best;
        best
    }
}

/// Minimum expected cost over all adaptive policies, by DP over the `3^n`
/// observation states (each test unobserved, failed, or passed).
pub fn optimal_policy_cost(instance: &ProblemInstance, mode: OptimalMode) -> Result<f64> {
    let n = instance.num_tests();
    if n > DP_TEST_CAP || instance.num_regions() > DP_REGION_CAP {
        return Err(Error::TooLarge(format!(
            "{n} tests / {} regions (caps {DP_TEST_CAP} / {DP_REGION_CAP})",
            instance.num_regions()
        )));
    }
    let mut pow3 = vec![1usize; n];
    for t in 1..n {
        pow3[t] = pow3[t - 1] * 3;
    }
    let size = 3usize.pow(n as u32);
    let mut dp = Dp {
        instance,
        mode,
        pow3,
        memo: vec![f64::NAN; size],
    };
    let mut digits = vec![UNOBSERVED; n];
    Ok(dp.solve(0, &mut digits))
}

/// Exact expected cost of a deterministic policy, by expanding its decision tree.
pub fn exact_policy_cost(instance: &ProblemInstance, policy: &mut Policy, termination: Termination) -> Result<f64> {
    if !policy.spec().is_deterministic() {
        return Err(Error::InvalidParams(
            "exact cost needs a deterministic policy".into(),
        ));
    }
    if instance.num_tests() > ENUMERATION_CAP {
        return Err(Error::TooManyTests {
            num_tests: instance.num_tests(),
            cap: ENUMERATION_CAP,
        });
    }
    fn expand(state: &BeliefState<'_>, policy: &mut Policy, termination: Termination) -> Result<f64> {
        if runner::verdict(state, termination).is_some() {
            return Ok(0.0);
        }
        let t = policy.select(state)?;
        if state.is_observed(t) {
            return Err(Error::PolicyReturnedObservedTest(t));
        }
        let inst = state.instance();
        let theta = inst.theta(t);
        let mut pass = state.clone();
        pass.observe(t, true)?;
        let mut fail = state.clone();
        fail.observe(t, false)?;
        Ok(inst.cost(t)
            + theta * expand(&pass, policy, termination)?
            + (1.0 - theta) * expand(&fail, policy, termination)?)
    }
    expand(&BeliefState::new(instance), policy, termination)
}

/// `min_h P(h) = ∏ min(θ, 1 - θ)`.
pub fn min_hypothesis_prob(instance: &ProblemInstance) -> f64 {
    instance.bias().iter().map(|&p| p.min(1.0 - p)).product()
}

/// Expected cost of evaluating disjoint regions one at a time in `order`,
/// each region's tests least-likely-to-pass first, stopping at the first
/// failure within a region and at the first fully valid region overall.
pub fn region_sequence_cost(instance: &ProblemInstance, order: &[usize]) -> f64 {
    let mut reach = 1.0; // probability that every earlier region failed
    let mut total = 0.0;
    for &r in order {
        let mut tests: Vec<TestId> = instance.region(r).tests().to_vec();
        tests.sort_by(|a, b| instance.theta(*a).total_cmp(&instance.theta(*b)).then(a.cmp(b)));
        let mut survive = 1.0;
        let mut cost = 0.0;
        for &t in &tests {
            cost += survive * instance.cost(t);
            survive *= instance.theta(t);
        }
        total += reach * cost;
        reach *= 1.0 - survive;
    }
    total
}

/// Region order by decreasing prior, ties to the lower index. For disjoint
/// regions the posterior given earlier region failures equals the prior.
pub fn greedy_region_order(instance: &ProblemInstance) -> Vec<usize> {
    let mut order: Vec<usize> = (0..instance.num_regions()).collect();
    order.sort_by(|&a, &b| {
        instance
            .region_prior(b)
            .total_cmp(&instance.region_prior(a))
            .then(a.cmp(&b))
    });
    order
}

/// Best region evaluation sequence by brute force over permutations.
pub fn optimal_region_sequence_cost(instance: &ProblemInstance) -> Result<f64> {
    let m = instance.num_regions();
    if m > 8 {
        return Err(Error::TooLarge(format!("{m} regions (cap 8)")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    let mut best = f64::INFINITY;
    permute(&mut order, 0, &mut |o| {
        best = best.min(region_sequence_cost(instance, o));
    });
    Ok(best)
}

fn permute<F: FnMut(&[usize])>(xs: &mut Vec<usize>, k: usize, f: &mut F) {
    if k == xs.len() {
        f(xs);
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        permute(xs, k + 1, f);
        xs.swap(k, i);
    }
}
