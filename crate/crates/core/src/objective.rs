//! Edge-cutting weights with self-edges, the per-region `f_EC`, the noisy-OR
//! `f_DRD`, and the greedy marginal gain.
//!
//! With self-edges on every non-region hypothesis the initial weight of the
//! one-region-versus-all problem collapses to `1 - ∏_{i∈R} θ_i`, and the pruned
//! weight to `(1 - 1·∏θ_free) · L²` where `L` is the observed likelihood over
//! the region's tests.

use crate::belief::BeliefState;
use crate::error::{Error, Result};
use crate::model::{ProblemInstance, TestId};

/// Initial edge weight of region `r`'s subproblem.
pub fn wec_initial(instance: &ProblemInstance, r: usize) -> f64 {
    1.0 - instance.region_prior(r)
}

/// `1 - indicator · free_product`, the factor of the pruned weight that
/// depends on unobserved tests. Zero once the region is validated, one once killed.
#[inline]
pub fn pruned_factor(state: &BeliefState<'_>, r: usize) -> f64 {
    1.0 - state.indicator_free(r)
}

/// Pruned edge weight of region `r`'s subproblem under the current observation.
pub fn wec_pruned(state: &BeliefState<'_>, r: usize) -> f64 {
    pruned_factor(state, r) * state.region(r).likelihood_sq
}

/// Fraction of region `r`'s edge weight cut so far.
pub fn f_ec(state: &BeliefState<'_>, r: usize) -> f64 {
    let init = wec_initial(state.instance(), r);
    let pruned = wec_pruned(state, r);
    1.0 - pruned / init
}

/// Noisy-OR combination of all per-region objectives.
pub fn f_drd(state: &BeliefState<'_>) -> f64 {
    1.0 - residual(state)
}

/// `∏_r (1 - f_EC,r)`.
pub fn residual(state: &BeliefState<'_>) -> f64 {
    let inst = state.instance();
    let mut prod = 1.0;
    for r in 0..inst.num_regions() {
        prod *= 1.0 - f_ec(state, r);
    }
    prod
}

/// Greedy gain of `t` divided by the current product of pruned factors.
///
/// Dividing out `∏_r pruned_factor_r` (common to every test) keeps the value in
/// `[0, 1]` regardless of how many regions there are. Equivalently this is
/// `E[Δf_DRD(t)] / (1 - f_DRD)`. Killed regions contribute only their likelihood
/// exponent; active regions containing `t` also change their pruned factor.
pub fn relative_gain(state: &BeliefState<'_>, t: TestId) -> f64 {
    if state.first_validated().is_some() {
        return 0.0;
    }
    let theta = state.instance().theta(t);
    let miss = 1.0 - theta;
    let mut pass_term = theta;
    let mut fail_term = miss;
    for &r in state.regions_of(t) {
        let rb = state.region(r);
        if rb.killed {
            pass_term *= theta * theta;
            fail_term *= miss * miss;
        } else {
            // free includes θ_t since t is unobserved.
            let free = rb.free_product;
            let before = 1.0 - free;
            let after_pass = if rb.num_unobserved == 1 {
                0.0
            } else {
                1.0 - free / theta
            };
            pass_term *= theta * theta * after_pass / before;
            fail_term *= miss * miss / before;
        }
    }
    (1.0 - pass_term - fail_term).max(0.0)
}

/// Unnormalized expected gain of evaluating `t`:
/// `E_{x_t}[∏_r F_r − ∏_r F'_r · (θ_t^{x_t}(1−θ_t)^{1−x_t})^{2·#{r ∋ t}}]`
/// with `F_r` the pruned factor before and `F'_r` after observing `x_t`.
pub fn marginal_gain(state: &BeliefState<'_>, t: TestId) -> Result<f64> {
    if state.is_observed(t) {
        return Err(Error::AlreadyObserved(t));
    }
    let inst = state.instance();
    let mut log_prod = 0.0;
    for r in 0..inst.num_regions() {
        let f = pruned_factor(state, r);
        if f == 0.0 {
            return Ok(0.0);
        }
        log_prod += f.ln();
    }
    Ok(log_prod.exp() * relative_gain(state, t))
}

/// `E_{x_t}[f_DRD(x_A ∪ x_t)] − f_DRD(x_A)`, by recomputing the objective on
/// both child states. This is the slow reference for the greedy rule.
///
/// Computed as a drop in [`residual`] rather than a rise in [`f_drd`]: close to
/// termination `f_DRD` is within 1e-12 of one and the difference of two such
/// values is rounding noise, while the residuals keep full relative precision.
pub fn expected_fdrd_gain(state: &BeliefState<'_>, t: TestId) -> Result<f64> {
    if state.is_observed(t) {
        return Err(Error::AlreadyObserved(t));
    }
    let theta = state.instance().theta(t);
    let now = residual(state);
    let mut pass = state.clone();
    pass.observe(t, true)?;
    let mut fail = state.clone();
    fail.observe(t, false)?;
    Ok(now - theta * residual(&pass) - (1.0 - theta) * residual(&fail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::init_belief;

    #[test]
    fn initial_weights() {
        let inst = ProblemInstance::new(2, vec![0.5, 0.5], vec![vec![0, 1]]).unwrap();
        assert_eq!(wec_initial(&inst, 0), 0.75);
        let one = ProblemInstance::new(1, vec![0.9], vec![vec![0]]).unwrap();
        assert!((wec_initial(&one, 0) - 0.1).abs() < 1e-15);
        let s = init_belief(&inst);
        assert_eq!(wec_pruned(&s, 0), wec_initial(&inst, 0));
        assert_eq!(f_ec(&s, 0), 0.0);
        assert_eq!(f_drd(&s), 0.0);
    }

    #[test]
    fn pruned_weights_after_one_observation() {
        let inst = ProblemInstance::new(2, vec![0.5, 0.5], vec![vec![0, 1]]).unwrap();
        let mut s = init_belief(&inst);
        s.observe(TestId(0), true).unwrap();
        assert!((wec_pruned(&s, 0) - 0.125).abs() < 1e-15);
        assert!((f_ec(&s, 0) - 5.0 / 6.0).abs() < 1e-12);
        s.observe(TestId(1), true).unwrap();
        assert_eq!(f_ec(&s, 0), 1.0);
        assert_eq!(f_drd(&s), 1.0);

        let mut s = init_belief(&inst);
        s.observe(TestId(0), false).unwrap();
        assert!((wec_pruned(&s, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn noisy_or_two_singletons() {
        let inst = ProblemInstance::new(2, vec![0.5, 0.5], vec![vec![0], vec![1]]).unwrap();
        let mut s = init_belief(&inst);
        s.observe(TestId(0), false).unwrap();
        // f_ec(0) = 1 - 0.25/0.5 = 0.5, f_ec(1) = 0.
        assert!((f_drd(&s) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_region_gain() {
        let inst = ProblemInstance::new(1, vec![0.5], vec![vec![0]]).unwrap();
        let s = init_belief(&inst);
        let g = marginal_gain(&s, TestId(0)).unwrap();
        assert!((g - 0.375).abs() < 1e-15);
        let cross = expected_fdrd_gain(&s, TestId(0)).unwrap() * wec_initial(&inst, 0);
        assert!((g - cross).abs() < 1e-12);
    }

    #[test]
    fn test_outside_regions_has_zero_gain() {
        let inst = ProblemInstance::new(2, vec![0.5, 0.3], vec![vec![0]]).unwrap();
        let s = init_belief(&inst);
        assert_eq!(marginal_gain(&s, TestId(1)).unwrap(), 0.0);
    }

    #[test]
    fn gain_of_observed_test_errors() {
        let inst = ProblemInstance::new(2, vec![0.5, 0.5], vec![vec![0, 1]]).unwrap();
        let mut s = init_belief(&inst);
        s.observe(TestId(0), true).unwrap();
        assert!(matches!(
            marginal_gain(&s, TestId(0)),
            Err(Error::AlreadyObserved(TestId(0)))
        ));
    }
}
