//! Candidate-set selectors and test-selection rules.
//!
//! A policy is a `(rule, selector)` pair spelled `rule:selector`, e.g.
//! `bisect:unconstrained` or `mvoi:maxprob`. Every argmax breaks ties toward the
//! lowest test id after rounding scores to 12 significant digits.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefState;
use crate::error::{Error, Result};
use crate::model::{ProblemInstance, TestId};
use crate::objective;
use crate::seed::{self, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    /// Every unobserved test of every region that can still be valid.
    Unconstrained,
    /// Unobserved tests of the single most probable region.
    MaxProb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Bisect,
    Random,
    MaxTally,
    SetCover,
    Mvoi,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Mvoi,
        PolicyKind::Random,
        PolicyKind::MaxTally,
        PolicyKind::SetCover,
        PolicyKind::Bisect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Bisect => "bisect",
            PolicyKind::Random => "random",
            PolicyKind::MaxTally => "maxtally",
            PolicyKind::SetCover => "setcover",
            PolicyKind::Mvoi => "mvoi",
        }
    }
}

impl Selector {
    pub fn name(self) -> &'static str {
        match self {
            Selector::Unconstrained => "unconstrained",
            Selector::MaxProb => "maxprob",
        }
    }
}

/// A policy as named on the command line. Parsing does not check the
/// mvoi/maxprob pairing; [`Policy::new`] does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub selector: Selector,
}

impl PolicySpec {
    pub const fn new(kind: PolicyKind, selector: Selector) -> Self {
        PolicySpec { kind, selector }
    }

    /// Every valid combination: four rules under both selectors plus mvoi:maxprob.
    pub fn all() -> Vec<PolicySpec> {
        let mut out = Vec::new();
        for selector in [Selector::Unconstrained, Selector::MaxProb] {
            for kind in PolicyKind::ALL {
                if kind == PolicyKind::Mvoi && selector == Selector::Unconstrained {
                    continue;
                }
                out.push(PolicySpec::new(kind, selector));
            }
        }
        out
    }

    pub fn is_deterministic(&self) -> bool {
        self.kind != PolicyKind::Random
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.name(), self.selector.name())
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, selector) = s.split_once(':').ok_or_else(|| Error::UnknownPolicy(s.to_string()))?;
        let kind = match kind.trim().to_ascii_lowercase().as_str() {
            "bisect" => PolicyKind::Bisect,
            "random" => PolicyKind::Random,
            "maxtally" => PolicyKind::MaxTally,
            "setcover" => PolicyKind::SetCover,
            "mvoi" => PolicyKind::Mvoi,
            _ => return Err(Error::UnknownPolicy(s.to_string())),
        };
        let selector = match selector.trim().to_ascii_lowercase().as_str() {
            "unconstrained" => Selector::Unconstrained,
            "maxprob" => Selector::MaxProb,
            _ => return Err(Error::UnknownPolicy(s.to_string())),
        };
        Ok(PolicySpec { kind, selector })
    }
}

impl Serialize for PolicySpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PolicySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A runnable policy. Only `Random` carries state (its RNG stream).
#[derive(Debug, Clone)]
pub struct Policy {
    spec: PolicySpec,
    rng: Option<StreamRng>,
}

impl Policy {
    /// Checks that `spec` is usable on `instance`. `seed` feeds the Random stream.
    pub fn new(spec: PolicySpec, instance: &ProblemInstance, seed: u64) -> Result<Self> {
        if spec.kind == PolicyKind::Mvoi && spec.selector != Selector::MaxProb {
            return Err(Error::WrongSelector(spec.to_string()));
        }
        if spec.kind != PolicyKind::Bisect && !instance.is_unit_cost() {
            return Err(Error::NonUnitCost(spec.to_string()));
        }
        let rng = (spec.kind == PolicyKind::Random).then(|| seed::stream(seed, "random-policy", 0));
        Ok(Policy { spec, rng })
    }

    pub fn spec(&self) -> PolicySpec {
        self.spec
    }

    /// Picks the next test to evaluate in `state`.
    pub fn select(&mut self, state: &BeliefState<'_>) -> Result<TestId> {
        let candidates = candidate_set(state, self.spec.selector)?;
        match self.spec.kind {
            PolicyKind::Bisect => select_bisect(state, &candidates),
            PolicyKind::Random => {
                let rng = self.rng.as_mut().expect("random policy has a stream");
                select_random(&candidates, rng)
            }
            PolicyKind::MaxTally => select_max_tally(state, &candidates),
            PolicyKind::SetCover => select_set_cover(state, &candidates),
            PolicyKind::Mvoi => {
                if self.spec.selector != Selector::MaxProb {
                    return Err(Error::WrongSelector(self.spec.to_string()));
                }
                select_mvoi(state, &candidates)
            }
        }
    }
}

/// Index of the region with the highest posterior among those that are not
/// killed and still have unobserved tests; lowest index wins ties.
pub fn most_probable_region(state: &BeliefState<'_>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (r, rb) in state.region_beliefs().iter().enumerate() {
        if rb.killed || rb.num_unobserved == 0 {
            continue;
        }
        let p = state.region_posterior(r);
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((r, p));
        }
    }
    best.map(|(r, _)| r)
}

/// Candidate tests in ascending id order.
pub fn candidate_set(state: &BeliefState<'_>, selector: Selector) -> Result<Vec<TestId>> {
    if state.num_active() == 0 {
        return Err(Error::NoActiveRegion);
    }
    let inst = state.instance();
    match selector {
        Selector::Unconstrained => {
            let out: Vec<TestId> = (0..inst.num_tests())
                .map(TestId)
                .filter(|&t| state.active_tally(t) > 0 && !state.is_observed(t))
                .collect();
            Ok(out)
        }
        Selector::MaxProb => {
            let r = most_probable_region(state).ok_or(Error::NoActiveRegion)?;
            Ok(inst
                .region(r)
                .tests()
                .iter()
                .copied()
                .filter(|&t| !state.is_observed(t))
                .collect())
        }
    }
}

/// Rounds to 12 significant digits so last-bit noise cannot flip an argmax.
pub fn round_sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let e = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(11 - e);
    if !scale.is_finite() || scale == 0.0 {
        return x;
    }
    (x * scale).round() / scale
}

/// Argmax of `score` over `candidates` (ascending), ties to the earliest.
pub fn argmax_rounded<F: FnMut(TestId) -> f64>(candidates: &[TestId], mut score: F) -> Result<TestId> {
    let mut best: Option<(TestId, f64)> = None;
    for &t in candidates {
        let s = round_sig12(score(t));
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((t, s));
        }
    }
    best.map(|(t, _)| t).ok_or(Error::EmptyCandidates)
}

/// Greedy rule: maximize expected `f_DRD` gain per unit cost.
pub fn select_bisect(state: &BeliefState<'_>, candidates: &[TestId]) -> Result<TestId> {
    let inst = state.instance();
    argmax_rounded(candidates, |t| objective::relative_gain(state, t) / inst.cost(t))
}

pub fn select_random<R: Rng + ?Sized>(candidates: &[TestId], rng: &mut R) -> Result<TestId> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    Ok(candidates[rng.random_range(0..candidates.len())])
}

/// Test contained in the most still-possible regions.
pub fn select_max_tally(state: &BeliefState<'_>, candidates: &[TestId]) -> Result<TestId> {
    argmax_rounded(candidates, |t| state.active_tally(t) as f64)
}

/// Number of unobserved tests other than `t` that lose every active region
/// containing them if `t` fails.
pub fn set_cover_coverage(state: &BeliefState<'_>, t: TestId, scratch: &mut Vec<u32>) -> usize {
    let inst = state.instance();
    scratch.resize(inst.num_tests(), 0);
    let mut touched: Vec<TestId> = Vec::new();
    for &r in state.regions_of(t) {
        if state.region(r).killed {
            continue;
        }
        for &s in inst.region(r).tests() {
            if s == t || state.is_observed(s) {
                continue;
            }
            if scratch[s.index()] == 0 {
                touched.push(s);
            }
            scratch[s.index()] += 1;
        }
    }
    let mut covered = 0;
    for s in touched {
        if scratch[s.index()] == state.active_tally(s) {
            covered += 1;
        }
        scratch[s.index()] = 0;
    }
    covered
}

/// Expected number of additional tests eliminated by a failure of `t`.
pub fn select_set_cover(state: &BeliefState<'_>, candidates: &[TestId]) -> Result<TestId> {
    let inst = state.instance();
    let mut scratch = Vec::new();
    argmax_rounded(candidates, |t| {
        (1.0 - inst.theta(t)) * set_cover_coverage(state, t, &mut scratch) as f64
    })
}

/// Myopic value of information: `(1 - θ_t) · max_i P(R_i | x_A, x_t = 0)`.
pub fn select_mvoi(state: &BeliefState<'_>, candidates: &[TestId]) -> Result<TestId> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let inst = state.instance();
    let mut ranked: Vec<(usize, f64)> = (0..inst.num_regions())
        .filter(|&r| !state.region(r).killed)
        .map(|r| (r, state.region_posterior(r)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    argmax_rounded(candidates, |t| {
        let best = ranked
            .iter()
            .find(|&&(r, _)| !inst.region(r).contains(t))
            .map_or(0.0, |&(_, p)| p);
        (1.0 - inst.theta(t)) * best
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::init_belief;

    fn ids(v: &[usize]) -> Vec<TestId> {
        v.iter().map(|&i| TestId(i)).collect()
    }

    #[test]
    fn parse_and_display() {
        let p: PolicySpec = "bisect:maxprob".parse().unwrap();
        assert_eq!(p, PolicySpec::new(PolicyKind::Bisect, Selector::MaxProb));
        assert_eq!(p.to_string(), "bisect:maxprob");
        assert!("bisect".parse::<PolicySpec>().is_err());
        assert!("foo:maxprob".parse::<PolicySpec>().is_err());
        assert_eq!(PolicySpec::all().len(), 9);
    }

    #[test]
    fn candidate_sets() {
        let inst = ProblemInstance::new(3, vec![0.9, 0.9, 0.5], vec![vec![0, 1], vec![1, 2]]).unwrap();
        let s = init_belief(&inst);
        assert_eq!(candidate_set(&s, Selector::Unconstrained).unwrap(), ids(&[0, 1, 2]));
        // P(R0) = 0.81 > P(R1) = 0.45
        assert_eq!(candidate_set(&s, Selector::MaxProb).unwrap(), ids(&[0, 1]));
        let mut s = init_belief(&inst);
        s.observe(TestId(0), false).unwrap();
        assert_eq!(candidate_set(&s, Selector::MaxProb).unwrap(), ids(&[1, 2]));
        s.observe(TestId(2), false).unwrap();
        assert!(matches!(
            candidate_set(&s, Selector::Unconstrained),
            Err(Error::NoActiveRegion)
        ));
    }

    #[test]
    fn bisect_examples() {
        let inst = ProblemInstance::new(1, vec![0.5], vec![vec![0]]).unwrap();
        let s = init_belief(&inst);
        assert_eq!(select_bisect(&s, &ids(&[0])).unwrap(), TestId(0));
        assert!(matches!(select_bisect(&s, &[]), Err(Error::EmptyCandidates)));

        let inst = ProblemInstance::new(2, vec![0.9, 0.5], vec![vec![0], vec![1]]).unwrap();
        let s = init_belief(&inst);
        // gain(0) = 0.1*0.5 - [0.9*0*0.5*0.81 + 0.1*1*0.5*0.01] = 0.0495
        // gain(1) = 0.1*0.5 - [0.5*0.1*0*0.25 + 0.5*0.1*1*0.25] = 0.0375
        let g0 = objective::marginal_gain(&s, TestId(0)).unwrap();
        let g1 = objective::marginal_gain(&s, TestId(1)).unwrap();
        assert!((g0 - 0.0495).abs() < 1e-12 && (g1 - 0.0375).abs() < 1e-12);
        assert_eq!(select_bisect(&s, &ids(&[0, 1])).unwrap(), TestId(0));
    }

    #[test]
    fn random_examples() {
        let mut rng = seed::stream(3, "t", 0);
        assert_eq!(select_random(&ids(&[3]), &mut rng).unwrap(), TestId(3));
        let c = ids(&(0..10).collect::<Vec<_>>());
        let a = select_random(&c, &mut seed::stream(9, "t", 0)).unwrap();
        let b = select_random(&c, &mut seed::stream(9, "t", 0)).unwrap();
        assert_eq!(a, b);
        // 1e5 draws: binomial sd is 0.0016, so [0.49, 0.51] is > 6 sd wide.
        let two = ids(&[0, 1]);
        let zeros = (0..100_000)
            .filter(|_| select_random(&two, &mut rng).unwrap() == TestId(0))
            .count();
        let f = zeros as f64 / 1e5;
        assert!((0.49..=0.51).contains(&f), "{f}");
    }

    #[test]
    fn max_tally_examples() {
        let inst = ProblemInstance::new(3, vec![0.5; 3], vec![vec![0, 1], vec![0, 2]]).unwrap();
        let s = init_belief(&inst);
        assert_eq!(select_max_tally(&s, &ids(&[0, 1, 2])).unwrap(), TestId(0));

        let mut s = init_belief(&inst);
        s.observe(TestId(1), false).unwrap();
        assert_eq!(s.active_tally(TestId(0)), 1);
        assert_eq!(s.active_tally(TestId(2)), 1);

        let inst = ProblemInstance::new(3, vec![0.5; 3], vec![vec![0, 1], vec![0, 2], vec![2]]).unwrap();
        let s = init_belief(&inst);
        assert_eq!(select_max_tally(&s, &ids(&[0, 1, 2])).unwrap(), TestId(0));
    }

    #[test]
    fn set_cover_examples() {
        let inst = ProblemInstance::new(3, vec![0.5; 3], vec![vec![0, 1], vec![0, 2]]).unwrap();
        let s = init_belief(&inst);
        let mut scratch = Vec::new();
        assert_eq!(set_cover_coverage(&s, TestId(0), &mut scratch), 2);
        assert_eq!(set_cover_coverage(&s, TestId(1), &mut scratch), 0);
        assert_eq!(set_cover_coverage(&s, TestId(2), &mut scratch), 0);
        assert_eq!(select_set_cover(&s, &ids(&[0, 1, 2])).unwrap(), TestId(0));

        let inst = ProblemInstance::new(2, vec![0.5; 2], vec![vec![0, 1]]).unwrap();
        let s = init_belief(&inst);
        assert_eq!(select_set_cover(&s, &ids(&[0, 1])).unwrap(), TestId(0));
    }

    #[test]
    fn mvoi_examples() {
        let inst = ProblemInstance::new(3, vec![0.9, 0.9, 0.8], vec![vec![0, 1], vec![2]]).unwrap();
        let s = init_belief(&inst);
        let c = candidate_set(&s, Selector::MaxProb).unwrap();
        assert_eq!(c, ids(&[0, 1]));
        assert_eq!(select_mvoi(&s, &c).unwrap(), TestId(0));

        let spec = PolicySpec::new(PolicyKind::Mvoi, Selector::Unconstrained);
        assert!(matches!(Policy::new(spec, &inst, 0), Err(Error::WrongSelector(_))));
    }

    #[test]
    fn heuristics_need_unit_costs() {
        let inst = ProblemInstance::with_costs(1, vec![0.5], vec![2.0], vec![vec![0]]).unwrap();
        let spec = PolicySpec::new(PolicyKind::MaxTally, Selector::Unconstrained);
        assert!(matches!(Policy::new(spec, &inst, 0), Err(Error::NonUnitCost(_))));
        let spec = PolicySpec::new(PolicyKind::Bisect, Selector::Unconstrained);
        assert!(Policy::new(spec, &inst, 0).is_ok());
    }

    #[test]
    fn rounding() {
        assert_eq!(round_sig12(0.0), 0.0);
        assert_eq!(round_sig12(1.0 + 1e-15), 1.0);
        assert_eq!(round_sig12(0.123456789012345), 0.123456789012);
    }
}
