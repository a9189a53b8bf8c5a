//! Posterior bookkeeping under the independent Bernoulli prior.
//!
//! For each region `R` and observation `x_A` we memoize
//!
//! * `free_product = ∏_{j ∈ R \ A} θ_j`
//! * `killed`, true iff some observed test of `R` came back 0
//! * `likelihood = ∏_{k ∈ R ∩ A} θ_k^{x_k} (1 - θ_k)^{1 - x_k}` and its square
//!
//! which is everything the edge-cutting weights need. Observing a test touches
//! only the regions that contain it.

use crate::error::{Error, Result};
use crate::model::{Observation, ProblemInstance, TestId};

/// Incremental updates a region absorbs before its products are recomputed.
pub const REFRESH_INTERVAL: u32 = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct RegionBelief {
    pub free_product: f64,
    pub killed: bool,
    pub likelihood: f64,
    pub likelihood_sq: f64,
    pub num_unobserved: usize,
    updates_since_refresh: u32,
}

impl RegionBelief {
    /// All tests observed and none failed.
    #[inline]
    pub fn is_validated(&self) -> bool {
        !self.killed && self.num_unobserved == 0
    }
}

/// Observation plus memoized per-region state for one run.
#[derive(Debug, Clone)]
pub struct BeliefState<'a> {
    instance: &'a ProblemInstance,
    observation: Observation,
    regions: Vec<RegionBelief>,
    test_to_regions: Vec<Vec<usize>>,
    active_tally: Vec<u32>,
    num_killed: usize,
    validated: Vec<usize>,
}

impl<'a> BeliefState<'a> {
    pub fn new(instance: &'a ProblemInstance) -> Self {
        let mut test_to_regions = vec![Vec::new(); instance.num_tests()];
        for (r, region) in instance.regions().iter().enumerate() {
            for &t in region.tests() {
                test_to_regions[t.index()].push(r);
            }
        }
        let active_tally = test_to_regions.iter().map(|rs| rs.len() as u32).collect();
        let regions = (0..instance.num_regions())
            .map(|r| RegionBelief {
                free_product: instance.region_prior(r),
                killed: false,
                likelihood: 1.0,
                likelihood_sq: 1.0,
                num_unobserved: instance.region(r).len(),
                updates_since_refresh: 0,
            })
            .collect();
        BeliefState {
            instance,
            observation: Observation::new(instance.num_tests()),
            regions,
            test_to_regions,
            active_tally,
            num_killed: 0,
            validated: Vec::new(),
        }
    }

    /// Replays `observation` from the empty state.
    pub fn from_observation(instance: &'a ProblemInstance, observation: &Observation) -> Result<Self> {
        let mut state = Self::new(instance);
        for &(t, x) in observation.entries() {
            state.observe(t, x)?;
        }
        Ok(state)
    }

    pub fn instance(&self) -> &'a ProblemInstance {
        self.instance
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    pub fn region(&self, r: usize) -> &RegionBelief {
        &self.regions[r]
    }

    pub fn region_beliefs(&self) -> &[RegionBelief] {
        &self.regions
    }

    /// Indices of every region containing `t`, killed or not.
    #[inline]
    pub fn regions_of(&self, t: TestId) -> &[usize] {
        &self.test_to_regions[t.index()]
    }

    /// Number of non-killed regions containing `t`.
    #[inline]
    pub fn active_tally(&self, t: TestId) -> u32 {
        self.active_tally[t.index()]
    }

    #[inline]
    pub fn is_observed(&self, t: TestId) -> bool {
        self.observation.is_observed(t)
    }

    pub fn num_active(&self) -> usize {
        self.regions.len() - self.num_killed
    }

    /// Lowest-index region whose tests have all been observed valid.
    pub fn first_validated(&self) -> Option<usize> {
        self.validated.iter().copied().min()
    }

    pub fn num_validated(&self) -> usize {
        self.validated.len()
    }

    /// Records outcome `x` for test `t` and updates every region containing it.
    pub fn observe(&mut self, t: TestId, x: bool) -> Result<()> {
        if t.index() >= self.instance.num_tests() {
            return Err(Error::TestIdOutOfRange {
                region: usize::MAX,
                test: t.index(),
                num_tests: self.instance.num_tests(),
            });
        }
        self.observation.record(t, x)?;
        let theta = self.instance.theta(t);
        let p = if x { theta } else { 1.0 - theta };
        for i in 0..self.test_to_regions[t.index()].len() {
            let r = self.test_to_regions[t.index()][i];
            let newly_killed;
            {
                let rb = &mut self.regions[r];
                rb.num_unobserved -= 1;
                rb.likelihood *= p;
                rb.likelihood_sq *= p * p;
                newly_killed = !x && !rb.killed;
                if !x {
                    rb.killed = true;
                }
                if rb.num_unobserved == 0 {
                    rb.free_product = 1.0;
                } else {
                    rb.free_product /= theta;
                }
                rb.updates_since_refresh += 1;
            }
            if self.regions[r].updates_since_refresh >= REFRESH_INTERVAL {
                self.refresh_region(r);
            }
            if newly_killed {
                self.num_killed += 1;
                for &s in self.instance.region(r).tests() {
                    self.active_tally[s.index()] -= 1;
                }
            } else if self.regions[r].is_validated() {
                self.validated.push(r);
            }
        }
        Ok(())
    }

    /// Recomputes region `r`'s products from the observation.
    pub fn refresh_region(&mut self, r: usize) {
        let fresh = self.recompute_region(r);
        self.regions[r] = fresh;
    }

    /// Region state recomputed from scratch, without touching `self`.
    pub fn recompute_region(&self, r: usize) -> RegionBelief {
        let mut rb = RegionBelief {
            free_product: 1.0,
            killed: false,
            likelihood: 1.0,
            likelihood_sq: 1.0,
            num_unobserved: 0,
            updates_since_refresh: 0,
        };
        for &t in self.instance.region(r).tests() {
            let theta = self.instance.theta(t);
            match self.observation.get(t) {
                None => {
                    rb.free_product *= theta;
                    rb.num_unobserved += 1;
                }
                Some(x) => {
                    let p = if x { theta } else { 1.0 - theta };
                    rb.likelihood *= p;
                    rb.likelihood_sq *= p * p;
                    rb.killed |= !x;
                }
            }
        }
        rb
    }

    /// Recounts active tallies from the region states (debug cross-check).
    pub fn recount_tally(&self) -> Vec<u32> {
        let mut tally = vec![0u32; self.instance.num_tests()];
        for (r, rb) in self.regions.iter().enumerate() {
            if !rb.killed {
                for &t in self.instance.region(r).tests() {
                    tally[t.index()] += 1;
                }
            }
        }
        tally
    }

    /// `P(R ∩ H_R(x_A))`: mass of the relevant version space on which `R` is valid.
    pub fn region_validity_mass(&self, r: usize) -> f64 {
        let rb = &self.regions[r];
        if rb.killed {
            0.0
        } else {
            rb.free_product * rb.likelihood
        }
    }

    /// `P(¬R ∩ H_R(x_A))`.
    pub fn region_invalidity_mass(&self, r: usize) -> f64 {
        let rb = &self.regions[r];
        (1.0 - self.indicator_free(r)) * rb.likelihood
    }

    /// `P(R | x_A)`: probability that every unobserved test of `R` succeeds.
    pub fn region_posterior(&self, r: usize) -> f64 {
        let rb = &self.regions[r];
        if rb.killed {
            0.0
        } else if rb.num_unobserved == 0 {
            1.0
        } else {
            rb.free_product
        }
    }

    /// `∏ 1(x_i = 1) · ∏ θ_j` over the region's observed and unobserved tests.
    #[inline]
    pub(crate) fn indicator_free(&self, r: usize) -> f64 {
        let rb = &self.regions[r];
        if rb.killed {
            0.0
        } else if rb.num_unobserved == 0 {
            1.0
        } else {
            rb.free_product
        }
    }
}

/// Convenience wrapper matching the usual construction entry point.
pub fn init_belief(instance: &ProblemInstance) -> BeliefState<'_> {
    BeliefState::new(instance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_test_region() -> ProblemInstance {
        ProblemInstance::new(2, vec![0.5, 0.5], vec![vec![0, 1]]).unwrap()
    }

    #[test]
    fn init_matches_prior() {
        let inst = two_test_region();
        let s = init_belief(&inst);
        let rb = s.region(0);
        assert_eq!(rb.free_product, 0.25);
        assert!(!rb.killed);
        assert_eq!(rb.likelihood_sq, 1.0);

        let three = ProblemInstance::new(3, vec![0.5; 3], vec![vec![0], vec![1], vec![2]]).unwrap();
        assert_eq!(init_belief(&three).region_beliefs().len(), 3);

        let single = ProblemInstance::new(1, vec![0.9], vec![vec![0]]).unwrap();
        assert_eq!(init_belief(&single).region(0).free_product, 0.9);
    }

    #[test]
    fn observe_success_and_failure() {
        let inst = two_test_region();
        let mut s = init_belief(&inst);
        s.observe(TestId(0), true).unwrap();
        assert_eq!(s.region(0).free_product, 0.5);
        assert!(!s.region(0).killed);
        assert_eq!(s.region(0).likelihood_sq, 0.25);

        let mut s = init_belief(&inst);
        s.observe(TestId(0), false).unwrap();
        assert!(s.region(0).killed);
        assert_eq!(s.region(0).likelihood_sq, 0.25);
        assert!(matches!(
            s.observe(TestId(0), true),
            Err(Error::AlreadyObserved(TestId(0)))
        ));
    }

    #[test]
    fn masses_and_posterior() {
        let inst = two_test_region();
        let s = init_belief(&inst);
        assert_eq!(s.region_validity_mass(0), 0.25);
        assert_eq!(s.region_invalidity_mass(0), 0.75);

        let mut s1 = init_belief(&inst);
        s1.observe(TestId(0), true).unwrap();
        assert_eq!(s1.region_validity_mass(0), 0.25);
        assert_eq!(s1.region_invalidity_mass(0), 0.25);
        assert_eq!(s1.region_posterior(0), 0.5);
        s1.observe(TestId(1), true).unwrap();
        assert_eq!(s1.region_posterior(0), 1.0);
        assert_eq!(s1.first_validated(), Some(0));

        let mut s0 = init_belief(&inst);
        s0.observe(TestId(0), false).unwrap();
        assert_eq!(s0.region_validity_mass(0), 0.0);
        assert_eq!(s0.region_invalidity_mass(0), 0.5);

        let mut s2 = init_belief(&inst);
        s2.observe(TestId(1), false).unwrap();
        assert_eq!(s2.region_posterior(0), 0.0);
        assert_eq!(s2.num_active(), 0);
    }

    #[test]
    fn tally_tracks_kills() {
        let inst = ProblemInstance::new(3, vec![0.5; 3], vec![vec![0, 1], vec![0, 2]]).unwrap();
        let mut s = init_belief(&inst);
        assert_eq!(s.active_tally(TestId(0)), 2);
        s.observe(TestId(1), false).unwrap();
        assert_eq!(s.active_tally(TestId(0)), 1);
        assert_eq!(s.active_tally(TestId(1)), 0);
        assert_eq!(s.recount_tally(), vec![1, 0, 1]);
    }

    #[test]
    fn long_regions_stay_close_to_batch_values() {
        let n = 200;
        let bias: Vec<f64> = (0..n).map(|i| 0.1 + 0.8 * ((i * 37 % 101) as f64 / 100.0)).collect();
        let inst = ProblemInstance::new(n, bias, vec![(0..n).collect()]).unwrap();
        let mut s = init_belief(&inst);
        for t in 0..n - 1 {
            s.observe(TestId(t), true).unwrap();
            let fresh = s.recompute_region(0);
            let rel = (s.region(0).free_product - fresh.free_product).abs() / fresh.free_product;
            assert!(rel < 1e-12, "drift {rel} after {t}");
        }
    }
}
