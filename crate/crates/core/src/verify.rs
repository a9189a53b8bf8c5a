//! Randomized property suites comparing the fast implementations against the
//! oracles. Shared by `drd verify` and the acceptance tests.
//!
//! Each sample draws from its own seed stream, so a suite's outcome does not
//! depend on thread count.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::belief::BeliefState;
use crate::error::{Error, Result};
use crate::model::{GroundTruth, Observation, ProblemInstance, TestId};
use crate::objective;
use crate::oracle::{self, OptimalMode};
use crate::policy::{self, Policy, PolicyKind, PolicySpec, Selector};
use crate::runner::Termination;
use crate::seed;

/// Absolute tolerance for value comparisons.
pub const TOLERANCE: f64 = 1e-9;

/// Per-region `f_EC` implementation under test.
pub type FecFn = fn(&BeliefState<'_>, usize) -> f64;

/// Deliberately broken `f_EC` used to show the equivalence suite catches bugs.
pub fn sign_flipped_f_ec(state: &BeliefState<'_>, r: usize) -> f64 {
    let init = objective::wec_initial(state.instance(), r);
    1.0 + objective::wec_pruned(state, r) / init
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Equivalence,
    Submodularity,
    Argmax,
    NearOptimality,
    AlphaBound,
    SetCover,
    RegionGreedy,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Equivalence,
        Suite::Submodularity,
        Suite::Argmax,
        Suite::NearOptimality,
        Suite::AlphaBound,
        Suite::SetCover,
        Suite::RegionGreedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Equivalence => "equivalence",
            Suite::Submodularity => "submodularity",
            Suite::Argmax => "argmax",
            Suite::NearOptimality => "near-optimality",
            Suite::AlphaBound => "alpha-bound",
            Suite::SetCover => "setcover",
            Suite::RegionGreedy => "region-greedy",
        }
    }

    pub fn default_samples(self) -> usize {
        match self {
            Suite::Equivalence => 1_000,
            Suite::Submodularity => 10_000,
            Suite::Argmax => 1_000,
            Suite::NearOptimality => 200,
            Suite::AlphaBound => 200,
            Suite::SetCover => 100,
            Suite::RegionGreedy => 200,
        }
    }

    pub fn run(self, samples: usize, seed: u64) -> SuiteReport {
        self.run_with(SuiteOptions::new(samples, seed))
    }

    pub fn run_with(self, opts: SuiteOptions) -> SuiteReport {
        match self {
            Suite::Equivalence => equivalence(opts, objective::f_ec),
            Suite::Submodularity => submodularity(opts),
            Suite::Argmax => argmax(opts),
            Suite::NearOptimality => near_optimality(opts),
            Suite::AlphaBound => alpha_bound(opts),
            Suite::SetCover => set_cover_bound(opts),
            Suite::RegionGreedy => region_greedy(opts),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown suite '{s}'")))
    }
}

/// Sample count, seed, and an optional cap on instance size below each
/// suite's own (oracle-imposed) maximum.
#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub samples: usize,
    pub seed: u64,
    pub max_tests: Option<usize>,
}

impl SuiteOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        SuiteOptions {
            samples,
            seed,
            max_tests: None,
        }
    }

    fn shape(&self, max_tests: usize, max_regions: usize) -> InstanceShape {
        let n = self.max_tests.map_or(max_tests, |cap| cap.clamp(1, max_tests));
        InstanceShape::new(n, max_regions)
    }
}

/// Outcome of one suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub samples: usize,
    pub checks: usize,
    pub violations: usize,
    /// Smallest `allowed - observed` seen; negative means a violation.
    pub worst_margin: f64,
    pub detail: String,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.checks > 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} samples, {} checks, {} violations, worst margin {:.3e} ({}) [{:.1}s]",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.samples,
            self.checks,
            self.violations,
            self.worst_margin,
            self.detail,
            self.seconds
        )
    }
}

#[derive(Debug, Clone, Copy)]
struct Tally {
    checks: usize,
    violations: usize,
    worst: f64,
    /// Largest observed/allowed ratio, for ratio-type suites.
    worst_ratio: f64,
    /// Checks whose bound was infinite and therefore trivially met.
    vacuous: usize,
}

impl Tally {
    const EMPTY: Tally = Tally {
        checks: 0,
        violations: 0,
        worst: f64::INFINITY,
        worst_ratio: 0.0,
        vacuous: 0,
    };

    /// Records `observed ≤ allowed`.
    fn le(&mut self, observed: f64, allowed: f64) {
        self.checks += 1;
        let margin = allowed - observed;
        if margin.is_nan() || margin < 0.0 {
            self.violations += 1;
        }
        if margin.is_nan() {
            self.worst = f64::NEG_INFINITY;
        } else {
            self.worst = self.worst.min(margin);
        }
    }

    /// Records an exact (pass/fail) check; does not affect the margin.
    fn holds(&mut self, ok: bool) {
        self.checks += 1;
        if !ok {
            self.violations += 1;
        }
    }

    /// Records `|a - b| ≤ TOLERANCE`.
    fn close(&mut self, a: f64, b: f64) {
        self.le((a - b).abs(), TOLERANCE);
    }

    fn ratio(&mut self, observed: f64, bound: f64) {
        self.le(observed, bound);
        if bound.is_finite() && bound > 0.0 {
            self.worst_ratio = self.worst_ratio.max(observed / bound);
        }
    }

    fn merge(self, o: Tally) -> Tally {
        Tally {
            checks: self.checks + o.checks,
            violations: self.violations + o.violations,
            worst: self.worst.min(o.worst),
            worst_ratio: self.worst_ratio.max(o.worst_ratio),
            vacuous: self.vacuous + o.vacuous,
        }
    }
}

fn collect<F>(suite: Suite, samples: usize, seed: u64, per_sample: F) -> (Tally, f64)
where
    F: Fn(&mut seed::StreamRng) -> Tally + Sync,
{
    let start = Instant::now();
    let tally = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::stream(seed, suite.name(), i as u64);
            per_sample(&mut rng)
        })
        .reduce(|| Tally::EMPTY, Tally::merge);
    (tally, start.elapsed().as_secs_f64())
}

fn report(suite: Suite, samples: usize, tally: Tally, seconds: f64, detail: String) -> SuiteReport {
    SuiteReport {
        suite: suite.name().to_string(),
        samples,
        checks: tally.checks,
        violations: tally.violations,
        worst_margin: tally.worst,
        detail,
        seconds,
    }
}

/// Shape of a random test instance.
#[derive(Debug, Clone, Copy)]
pub struct InstanceShape {
    pub max_tests: usize,
    pub max_regions: usize,
    pub max_region_len: usize,
    pub disjoint: bool,
    pub random_costs: bool,
}

impl InstanceShape {
    pub fn new(max_tests: usize, max_regions: usize) -> Self {
        InstanceShape {
            max_tests,
            max_regions,
            max_region_len: 6,
            disjoint: false,
            random_costs: false,
        }
    }
}

/// Random small instance. Biases uniform in `[0.05, 0.95]`; regions distinct.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, shape: InstanceShape) -> ProblemInstance {
    let n = rng.random_range(1..=shape.max_tests);
    let m = rng.random_range(1..=shape.max_regions);
    let bias: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
    let mut regions: Vec<Vec<usize>> = Vec::new();
    if shape.disjoint {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut rest = &order[..];
        for _ in 0..m {
            if rest.is_empty() {
                break;
            }
            let len = rng.random_range(1..=rest.len().min(shape.max_region_len));
            let mut region = rest[..len].to_vec();
            region.sort_unstable();
            regions.push(region);
            rest = &rest[len..];
        }
    } else {
        let mut attempts = 0;
        while regions.len() < m && attempts < 100 {
            attempts += 1;
            let len = rng.random_range(1..=n.min(shape.max_region_len));
            let mut pool: Vec<usize> = (0..n).collect();
            pool.shuffle(rng);
            let mut region = pool[..len].to_vec();
            region.sort_unstable();
            if !regions.contains(&region) {
                regions.push(region);
            }
        }
    }
    let cost: Vec<f64> = if shape.random_costs {
        (0..n).map(|_| rng.random_range(0.5..2.0)).collect()
    } else {
        vec![1.0; n]
    };
    ProblemInstance::with_costs(n, bias, cost, regions).expect("generated instance is valid")
}

/// Random truth and a random evaluation order of all tests.
pub fn random_history<R: Rng + ?Sized>(rng: &mut R, instance: &ProblemInstance) -> (GroundTruth, Vec<TestId>) {
    let truth = instance.sample_truth(rng);
    let mut order: Vec<TestId> = (0..instance.num_tests()).map(TestId).collect();
    order.shuffle(rng);
    (truth, order)
}

fn observe_prefix<'a>(
    instance: &'a ProblemInstance,
    truth: &GroundTruth,
    order: &[TestId],
    k: usize,
) -> BeliefState<'a> {
    let mut state = BeliefState::new(instance);
    for &t in &order[..k] {
        state.observe(t, truth.outcome(t)).expect("fresh test");
    }
    state
}

fn drd_from(state: &BeliefState<'_>, f: FecFn) -> f64 {
    let mut prod = 1.0;
    for r in 0..state.instance().num_regions() {
        prod *= 1.0 - f(state, r);
    }
    1.0 - prod
}

/// Closed-form masses, edge weights, `f_EC` and `f_DRD` against enumeration,
/// plus incremental state against recomputation from scratch.
pub fn equivalence(opts: SuiteOptions, f_ec: FecFn) -> SuiteReport {
    let SuiteOptions { samples, seed, .. } = opts;
    let suite = Suite::Equivalence;
    let shape = opts.shape(oracle::NAIVE_WEC_CAP, 4);
    let (tally, secs) = collect(suite, samples, seed, |rng| {
        let mut tally = Tally::EMPTY;
        let inst = random_instance(rng, shape);
        let table = oracle::enumerate(&inst).expect("within cap");
        let (truth, order) = random_history(rng, &inst);
        let k = rng.random_range(0..=inst.num_tests());
        let state = observe_prefix(&inst, &truth, &order, k);
        let obs = state.observation();
        let empty = Observation::new(inst.num_tests());

        let mut naive_residual = 1.0;
        for r in 0..inst.num_regions() {
            tally.close(
                state.region_validity_mass(r),
                oracle::validity_mass(&table, &inst, r, obs),
            );
            tally.close(
                state.region_invalidity_mass(r),
                oracle::invalidity_mass(&table, &inst, r, obs),
            );
            let w0 = oracle::naive_edge_weights(&table, &inst, r, &empty)
                .expect("within cap")
                .with_self_edges();
            let w = oracle::naive_edge_weights(&table, &inst, r, obs)
                .expect("within cap")
                .with_self_edges();
            tally.close(objective::wec_initial(&inst, r), w0);
            tally.close(objective::wec_pruned(&state, r), w);
            let naive_fec = 1.0 - w / w0;
            naive_residual *= 1.0 - naive_fec;
            tally.close(f_ec(&state, r), naive_fec);

            let fresh = state.recompute_region(r);
            let rb = state.region(r);
            tally.close(rb.free_product, fresh.free_product);
            tally.close(rb.likelihood_sq, fresh.likelihood_sq);
            tally.holds(rb.killed == fresh.killed);
        }
        tally.close(drd_from(&state, f_ec), 1.0 - naive_residual);
        let recount = state.recount_tally();
        let drift = (0..inst.num_tests())
            .filter(|&t| recount[t] != state.active_tally(TestId(t)))
            .count();
        tally.holds(drift == 0);
        tally
    });
    report(
        suite,
        samples,
        tally,
        secs,
        format!("tolerance {TOLERANCE:e}"),
    )
}

/// Adaptive submodularity and strong adaptive monotonicity, sampled over
/// nested observations `A ⊆ B` of a common history and a test outside `B`.
pub fn submodularity(opts: SuiteOptions) -> SuiteReport {
    let SuiteOptions { samples, seed, .. } = opts;
    let suite = Suite::Submodularity;
    let shape = opts.shape(12, 6);
    let (tally, secs) = collect(suite, samples, seed, |rng| {
        let mut tally = Tally::EMPTY;
        let inst = random_instance(rng, shape);
        let n = inst.num_tests();
        let (truth, order) = random_history(rng, &inst);
        let kb = rng.random_range(0..n);
        let ka = rng.random_range(0..=kb);
        let t = order[rng.random_range(kb..n)];
        let a = observe_prefix(&inst, &truth, &order, ka);
        let b = observe_prefix(&inst, &truth, &order, kb);

        // f_DRD: expected gain shrinks from A to B.
        let ga = objective::expected_fdrd_gain(&a, t).expect("unobserved");
        let gb = objective::expected_fdrd_gain(&b, t).expect("unobserved");
        tally.le(gb, ga + TOLERANCE);

        // Same for every single-region f_EC.
        for r in 0..inst.num_regions() {
            let ea = fec_expected_gain(&a, r, t);
            let eb = fec_expected_gain(&b, r, t);
            tally.le(eb, ea + TOLERANCE);
        }

        // Strong monotonicity: no outcome of t lowers the objective.
        let now = objective::f_drd(&b);
        for x in [false, true] {
            let mut child = b.clone();
            child.observe(t, x).expect("unobserved");
            tally.le(now, objective::f_drd(&child) + TOLERANCE);
            for r in 0..inst.num_regions() {
                tally.le(objective::f_ec(&b, r), objective::f_ec(&child, r) + TOLERANCE);
            }
        }
        tally
    });
    report(suite, samples, tally, secs, "gain(B) ≤ gain(A) and f(child) ≥ f".into())
}

fn fec_expected_gain(state: &BeliefState<'_>, r: usize, t: TestId) -> f64 {
    let theta = state.instance().theta(t);
    let now = objective::f_ec(state, r);
    let mut pass = state.clone();
    pass.observe(t, true).expect("unobserved");
    let mut fail = state.clone();
    fail.observe(t, false).expect("unobserved");
    theta * objective::f_ec(&pass, r) + (1.0 - theta) * objective::f_ec(&fail, r) - now
}

/// BISECT's pick equals the argmax of the recomputed expected `f_DRD` gain per
/// unit cost. Scores within a relative 1e-10 of the best count as tied, and
/// ties go to the lowest test id.
pub fn argmax(opts: SuiteOptions) -> SuiteReport {
    let SuiteOptions { samples, seed, .. } = opts;
    let suite = Suite::Argmax;
    let (tally, secs) = collect(suite, samples, seed, |rng| {
        let mut tally = Tally::EMPTY;
        let shape = InstanceShape {
            random_costs: rng.random_bool(0.5),
            ..opts.shape(12, 6)
        };
        let inst = random_instance(rng, shape);
        let (truth, order) = random_history(rng, &inst);
        let mut k = rng.random_range(0..inst.num_tests());
        // Back off to a non-terminal state.
        let state = loop {
            let s = observe_prefix(&inst, &truth, &order, k);
            if s.first_validated().is_none() && s.num_active() > 0 {
                break s;
            }
            if k == 0 {
                return tally;
            }
            k -= 1;
        };
        for selector in [Selector::Unconstrained, Selector::MaxProb] {
            let candidates = policy::candidate_set(&state, selector).expect("active region");
            let picked = policy::select_bisect(&state, &candidates).expect("non-empty");
            let scores: Vec<f64> = candidates
                .iter()
                .map(|&t| objective::expected_fdrd_gain(&state, t).expect("unobserved") / inst.cost(t))
                .collect();
            let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tie = 1e-10 * best.abs();
            let reference = candidates
                .iter()
                .zip(&scores)
                .find(|&(_, &s)| s >= best - tie)
                .map(|(&t, _)| t)
                .expect("non-empty");
            tally.holds(picked == reference);
        }
        tally
    });
    report(suite, samples, tally, secs, "selection identity".into())
}

/// Exact BISECT cost over the DP optimum, against `2m·ln(1/min_h P(h)) + 1`.
pub fn near_optimality(opts: SuiteOptions) -> SuiteReport {
    let SuiteOptions { samples, seed, .. } = opts;
    let suite = Suite::NearOptimality;
    let shape = opts.shape(8, 4);
    let (tally, secs) = collect(suite, samples, seed, |rng| {
        let mut tally = Tally::EMPTY;
        let inst = random_instance(rng, shape);
        let spec = PolicySpec::new(PolicyKind::Bisect, Selector::Unconstrained);
        let mut p = Policy::new(spec, &inst, 0).expect("bisect accepts any instance");
        let greedy = oracle::exact_policy_cost(&inst, &mut p, Termination::IdentifyOne).expect("within cap");
        let opt = oracle::optimal_policy_cost(&inst, OptimalMode::IdentifyOne).expect("within cap");
        let m = inst.num_regions() as f64;
        let bound = 2.0 * m * (1.0 / oracle::min_hypothesis_prob(&inst)).ln() + 1.0;
        tally.ratio(greedy / opt, bound * (1.0 + TOLERANCE));
        tally
    });
    let detail = format!("worst ratio/bound {:.4}", tally.worst_ratio);
    report(suite, samples, tally, secs, detail)
}

/// `1 / (1 - max((1-p)², p^{2/l}))` with `p` the smallest region posterior
/// and `l` the largest region size.
pub fn alpha_bound_value(state: &BeliefState<'_>) -> f64 {
    let inst = state.instance();
    let p_min = (0..inst.num_regions())
        .map(|r| state.region_posterior(r))
        .fold(f64::INFINITY, f64::min);
    let l = inst.max_region_len() as f64;
    let worst = (1.0 - p_min).powi(2).max(p_min.powf(2.0 / l));
    1.0 / (1.0 - worst)
}

/// At every step of MaxProb-BISECT: best unconstrained gain over the gain of
/// the chosen test, against [`alpha_bound_value`].
pub fn alpha_bound(opts: SuiteOptions) -> SuiteReport {
    let SuiteOptions { samples, seed, .. } = opts;
    let suite = Suite::AlphaBound;
    let shape = opts.shape(12, 5);
    let (tally, secs) = collect(suite, samples, seed, |rng| {
        let mut tally = Tally::EMPTY;
        let inst = random_instance(rng, shape);
        let truth = inst.sample_truth(rng);
        let mut state = BeliefState::new(&inst);
        while state.first_validated().is_none() && state.num_active() > 0 {
            let all = policy::candidate_set(&state, Selector::Unconstrained).expect("active");
            let constrained = policy::candidate_set(&state, Selector::MaxProb).expect("active");
            let chosen = policy::select_bisect(&state, &constrained).expect("non-empty");
            let best = all
                .iter()
                .map(|&t| objective::relative_gain(&state, t))
                .fold(0.0, f64::max);
            let got = objective::relative_gain(&state, chosen);
            let ratio = if got > 0.0 {
                best / got
            } else if best > 0.0 {
                f64::INFINITY
            } else {
                1.0
            };
            let bound = alpha_bound_value(&state);
            if bound.is_finite() {
                tally.ratio(ratio, bound * (1.0 + TOLERANCE));
            } else {
                tally.checks += 1;
                tally.vacuous += 1;
            }
            state.observe(chosen, truth.outcome(chosen)).expect("fresh");
        }
        tally
    });
    let detail = format!(
        "worst ratio/bound {:.4}; {} of {} steps had an infinite bound",
        tally.worst_ratio, tally.vacuous, tally.checks
    );
    report(suite, samples, tally, secs, detail)
}

/// SetCover's exact check-all cost against `(ln n + 1)` times the DP optimum.
pub fn set_cover_bound(opts: SuiteOptions) -> SuiteReport {
    let SuiteOptions { samples, seed, .. } = opts;
    let suite = Suite::SetCover;
    let shape = opts.shape(8, 5);
    let (tally, secs) = collect(suite, samples, seed, |rng| {
        let mut tally = Tally::EMPTY;
        let inst = random_instance(rng, shape);
        let spec = PolicySpec::new(PolicyKind::SetCover, Selector::Unconstrained);
        let mut p = Policy::new(spec, &inst, 0).expect("unit costs");
        let greedy = oracle::exact_policy_cost(&inst, &mut p, Termination::CheckAll).expect("within cap");
        let opt = oracle::optimal_policy_cost(&inst, OptimalMode::CheckAll).expect("within cap");
        let bound = (inst.num_tests() as f64).ln() + 1.0;
        tally.ratio(greedy / opt, bound * (1.0 + TOLERANCE));
        tally
    });
    let detail = format!("worst ratio/bound {:.4}", tally.worst_ratio);
    report(suite, samples, tally, secs, detail)
}

/// Whole-region evaluation in decreasing-prior order against the best
/// region order, on disjoint regions: ratio at most 4.
pub fn region_greedy(opts: SuiteOptions) -> SuiteReport {
    let SuiteOptions { samples, seed, .. } = opts;
    let suite = Suite::RegionGreedy;
    let shape = InstanceShape {
        disjoint: true,
        ..opts.shape(10, 5)
    };
    let (tally, secs) = collect(suite, samples, seed, |rng| {
        let mut tally = Tally::EMPTY;
        let inst = random_instance(rng, shape);
        let greedy = oracle::region_sequence_cost(&inst, &oracle::greedy_region_order(&inst));
        let opt = oracle::optimal_region_sequence_cost(&inst).expect("within cap");
        tally.ratio(greedy / opt, 4.0 * (1.0 + TOLERANCE));
        tally
    });
    let detail = format!("worst ratio/bound {:.4}", tally.worst_ratio);
    report(suite, samples, tally, secs, detail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_on_small_samples() {
        for suite in Suite::ALL {
            let r = suite.run(20, 3);
            assert!(r.passed(), "{r}");
        }
    }

    #[test]
    fn sign_flip_is_caught() {
        let r = equivalence(SuiteOptions::new(20, 3), sign_flipped_f_ec);
        assert!(!r.passed());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn random_instances_are_valid_and_disjoint_when_asked() {
        let mut rng = seed::stream(1, "t", 0);
        let shape = InstanceShape {
            disjoint: true,
            ..InstanceShape::new(10, 5)
        };
        for _ in 0..50 {
            let inst = random_instance(&mut rng, shape);
            let mut seen = vec![false; inst.num_tests()];
            for r in inst.regions() {
                for t in r.tests() {
                    assert!(!seen[t.index()]);
                    seen[t.index()] = true;
                }
            }
        }
    }
}
