//! The evaluation loop: select, observe the ground truth, repeat until some
//! region is proven valid or every region is invalidated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefState;
use crate::error::{Error, Result};
use crate::model::{GroundTruth, ProblemInstance, TestId};
use crate::objective;
use crate::policy::{Policy, PolicySpec};
use crate::seed;
use crate::stats;

/// Attempts allowed per batch when rejection-sampling truths with a valid region.
pub const REJECTION_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ValidRegion(usize),
    AllInvalid,
    /// Check-all mode: every region is either fully validated or invalidated.
    AllChecked,
}

/// When a run stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Termination {
    /// Some region validated, or all regions invalid.
    #[default]
    IdentifyOne,
    /// Every region validated or invalidated.
    CheckAll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub trace: Vec<(TestId, u8)>,
    pub total_cost: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fdrd_trajectory: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub termination: Termination,
    pub record_trajectory: bool,
}

/// Which ground truths `expected_cost` averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    All,
    #[default]
    AtLeastOneValid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Stop condition for the current state, if met.
pub fn verdict(state: &BeliefState<'_>, termination: Termination) -> Option<Verdict> {
    match termination {
        Termination::IdentifyOne => {
            if let Some(r) = state.first_validated() {
                Some(Verdict::ValidRegion(r))
            } else if state.num_active() == 0 {
                Some(Verdict::AllInvalid)
            } else {
                None
            }
        }
        Termination::CheckAll => {
            (state.num_active() == state.num_validated()).then_some(Verdict::AllChecked)
        }
    }
}

pub fn run_with(
    instance: &ProblemInstance,
    policy: &mut Policy,
    truth: &GroundTruth,
    opts: RunOptions,
) -> Result<RunResult> {
    if truth.len() != instance.num_tests() {
        return Err(Error::LengthMismatch {
            what: "ground truth",
            expected: instance.num_tests(),
            found: truth.len(),
        });
    }
    let mut state = BeliefState::new(instance);
    let mut trajectory = opts.record_trajectory.then(Vec::new);
    let mut total_cost = 0.0;
    let verdict = loop {
        if let Some(v) = verdict(&state, opts.termination) {
            break v;
        }
        let t = policy.select(&state)?;
        if state.is_observed(t) {
            return Err(Error::PolicyReturnedObservedTest(t));
        }
        state.observe(t, truth.outcome(t))?;
        total_cost += instance.cost(t);
        if let Some(traj) = trajectory.as_mut() {
            traj.push(objective::f_drd(&state));
        }
    };
    let trace = state
        .observation()
        .entries()
        .iter()
        .map(|&(t, x)| (t, x as u8))
        .collect();
    Ok(RunResult {
        trace,
        total_cost,
        verdict,
        fdrd_trajectory: trajectory,
    })
}

/// Runs `policy` until a region is proven valid or all regions are invalid.
pub fn run(instance: &ProblemInstance, policy: &mut Policy, truth: &GroundTruth) -> Result<RunResult> {
    run_with(instance, policy, truth, RunOptions::default())
}

/// Runs until every region is fully evaluated or invalidated.
pub fn run_check_all(instance: &ProblemInstance, policy: &mut Policy, truth: &GroundTruth) -> Result<RunResult> {
    run_with(
        instance,
        policy,
        truth,
        RunOptions {
            termination: Termination::CheckAll,
            record_trajectory: false,
        },
    )
}

/// Draws `count` ground truths, truth `i` from stream `(master, label, i)`.
/// Under `AtLeastOneValid`, each truth is redrawn until some region is valid;
/// the whole batch fails once total attempts exceed [`REJECTION_CAP`].
pub fn sample_truths(
    instance: &ProblemInstance,
    conditioning: Conditioning,
    count: usize,
    master: u64,
    label: &str,
) -> Result<Vec<GroundTruth>> {
    let mut out = Vec::with_capacity(count);
    let mut attempts: u64 = 0;
    for i in 0..count {
        let mut rng = seed::stream(master, label, i as u64);
        loop {
            attempts += 1;
            let truth = instance.sample_truth(&mut rng);
            if conditioning == Conditioning::All || truth.validates_some_region(instance) {
                out.push(truth);
                break;
            }
            if attempts >= REJECTION_CAP {
                let accepted = out.len() as u64;
                return Err(Error::RejectionCapExceeded {
                    attempts,
                    accepted,
                    rate: accepted as f64 / attempts as f64,
                });
            }
        }
    }
    Ok(out)
}

/// Monte Carlo estimate of a policy's expected cost.
pub fn expected_cost(
    instance: &ProblemInstance,
    spec: PolicySpec,
    conditioning: Conditioning,
    num_trials: usize,
    master_seed: u64,
) -> Result<CostEstimate> {
    if num_trials == 0 {
        return Err(Error::InvalidParams("num_trials must be at least 1".into()));
    }
    Policy::new(spec, instance, 0)?;
    let truths = sample_truths(instance, conditioning, num_trials, master_seed, "truth")?;
    let costs: Vec<f64> = truths
        .par_iter()
        .enumerate()
        .map(|(i, truth)| {
            let mut policy = Policy::new(spec, instance, seed::derive(master_seed, "policy", i as u64))?;
            run(instance, &mut policy, truth).map(|r| r.total_cost)
        })
        .collect::<Result<_>>()?;
    Ok(CostEstimate {
        mean: stats::mean(&costs),
        stderr: stats::stderr(&costs),
        trials: num_trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{PolicyKind, Selector};

    fn bisect() -> PolicySpec {
        PolicySpec::new(PolicyKind::Bisect, Selector::Unconstrained)
    }

    #[test]
    fn single_region_valid() {
        let inst = ProblemInstance::new(1, vec![0.5], vec![vec![0]]).unwrap();
        let mut p = Policy::new(bisect(), &inst, 0).unwrap();
        let r = run(&inst, &mut p, &GroundTruth(vec![true])).unwrap();
        assert_eq!(r.trace, vec![(TestId(0), 1)]);
        assert_eq!(r.verdict, Verdict::ValidRegion(0));
        assert_eq!(r.total_cost, 1.0);
    }

    #[test]
    fn all_invalid() {
        let inst = ProblemInstance::new(2, vec![0.5, 0.5], vec![vec![0], vec![1]]).unwrap();
        let mut p = Policy::new(bisect(), &inst, 0).unwrap();
        let r = run(&inst, &mut p, &GroundTruth(vec![false, false])).unwrap();
        assert_eq!(r.verdict, Verdict::AllInvalid);
        assert_eq!(r.total_cost, 2.0);
    }

    #[test]
    fn check_all_examples() {
        let inst = ProblemInstance::new(1, vec![0.5], vec![vec![0]]).unwrap();
        let mut p = Policy::new(bisect(), &inst, 0).unwrap();
        assert_eq!(run_check_all(&inst, &mut p, &GroundTruth(vec![true])).unwrap().total_cost, 1.0);

        let inst = ProblemInstance::new(2, vec![0.5, 0.5], vec![vec![0], vec![1]]).unwrap();
        let mut p = Policy::new(bisect(), &inst, 0).unwrap();
        assert_eq!(
            run_check_all(&inst, &mut p, &GroundTruth(vec![true, true])).unwrap().total_cost,
            2.0
        );

        let inst = ProblemInstance::new(3, vec![0.5; 3], vec![vec![0, 1], vec![0, 2]]).unwrap();
        let spec = PolicySpec::new(PolicyKind::SetCover, Selector::Unconstrained);
        let mut p = Policy::new(spec, &inst, 0).unwrap();
        let r = run_check_all(&inst, &mut p, &GroundTruth(vec![false, true, true])).unwrap();
        assert_eq!(r.total_cost, 1.0);
        assert_eq!(r.verdict, Verdict::AllChecked);
    }

    #[test]
    fn wrong_truth_length() {
        let inst = ProblemInstance::new(2, vec![0.5, 0.5], vec![vec![0]]).unwrap();
        let mut p = Policy::new(bisect(), &inst, 0).unwrap();
        assert!(matches!(
            run(&inst, &mut p, &GroundTruth(vec![true])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn expected_cost_of_single_test() {
        let inst = ProblemInstance::new(1, vec![0.5], vec![vec![0]]).unwrap();
        let est = expected_cost(&inst, bisect(), Conditioning::All, 200, 1).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn rejection_cap_reports_rate() {
        // Valid region has probability 1e-6^2; no truth will be accepted in time.
        let inst = ProblemInstance::new(2, vec![1e-6, 1e-6], vec![vec![0, 1]]).unwrap();
        let err = sample_truths(&inst, Conditioning::AtLeastOneValid, 10, 0, "truth").unwrap_err();
        assert!(matches!(err, Error::RejectionCapExceeded { accepted: 0, .. }));
    }

    #[test]
    fn trajectory_is_recorded() {
        let inst = ProblemInstance::new(3, vec![0.6, 0.7, 0.8], vec![vec![0, 1], vec![1, 2]]).unwrap();
        let mut p = Policy::new(bisect(), &inst, 0).unwrap();
        let r = run_with(
            &inst,
            &mut p,
            &GroundTruth(vec![true, true, true]),
            RunOptions {
                record_trajectory: true,
                ..Default::default()
            },
        )
        .unwrap();
        let traj = r.fdrd_trajectory.unwrap();
        assert_eq!(traj.len(), r.trace.len());
        assert_eq!(*traj.last().unwrap(), 1.0);
        assert!(traj.windows(2).all(|w| w[1] >= w[0]));
    }
}
