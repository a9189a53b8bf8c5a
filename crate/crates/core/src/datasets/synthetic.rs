//! Random region allocations over independent tests.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub num_tests: usize,
    pub num_regions: usize,
    pub bias_range: (f64, f64),
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            num_tests: 100,
            num_regions: 100,
            bias_range: (0.1, 0.9),
        }
    }
}

/// Region sizes are uniform over `[⌈0.05 n⌉, ⌊0.10 n⌋]`.
pub fn region_size_range(num_tests: usize) -> (usize, usize) {
    ((num_tests * 5).div_ceil(100), num_tests * 10 / 100)
}

/// Draws an instance: biases uniform in `bias_range`, each region a uniform
/// random subset of uniform random size. Duplicate regions are redrawn.
pub fn synthetic_instance<R: Rng + ?Sized>(params: &SyntheticParams, rng: &mut R) -> Result<ProblemInstance> {
    let n = params.num_tests;
    if n < 20 {
        return Err(Error::InvalidParams(format!("synthetic needs at least 20 tests, got {n}")));
    }
    if params.num_regions == 0 {
        return Err(Error::InvalidParams("num_regions must be at least 1".into()));
    }
    let (lo, hi) = params.bias_range;
    if !(0.0 < lo && lo <= hi && hi < 1.0) {
        return Err(Error::InvalidParams(format!("bias range ({lo}, {hi}) must lie in (0, 1)")));
    }
    let bias: Vec<f64> = (0..n)
        .map(|_| if lo < hi { rng.random_range(lo..hi) } else { lo })
        .collect();
    let (smin, smax) = region_size_range(n);
    let mut regions: Vec<Vec<usize>> = Vec::with_capacity(params.num_regions);
    let mut seen = std::collections::HashSet::new();
    let mut attempts = 0usize;
    let cap = 100 * params.num_regions;
    while regions.len() < params.num_regions {
        attempts += 1;
        if attempts > cap {
            return Err(Error::AttemptCapExceeded {
                found: regions.len(),
                wanted: params.num_regions,
                attempts,
            });
        }
        let size = rng.random_range(smin..=smax);
        let mut region = index::sample(rng, n, size).into_vec();
        region.sort_unstable();
        if seen.insert(region.clone()) {
            regions.push(region);
        }
    }
    ProblemInstance::new(n, bias, regions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn defaults_respect_size_and_bias_ranges() {
        let inst = synthetic_instance(&SyntheticParams::default(), &mut seed::stream(7, "s", 0)).unwrap();
        assert_eq!(inst.num_regions(), 100);
        assert!(inst.regions().iter().all(|r| (5..=10).contains(&r.len())));
        assert!(inst.bias().iter().all(|&p| (0.1..=0.9).contains(&p)));
    }

    #[test]
    fn rejects_small_instances() {
        let p = SyntheticParams {
            num_tests: 19,
            ..Default::default()
        };
        assert!(synthetic_instance(&p, &mut seed::stream(0, "s", 0)).is_err());
    }

    #[test]
    fn deterministic() {
        let p = SyntheticParams::default();
        let a = synthetic_instance(&p, &mut seed::stream(1, "s", 0)).unwrap();
        let b = synthetic_instance(&p, &mut seed::stream(1, "s", 0)).unwrap();
        assert_eq!(a, b);
    }
}
