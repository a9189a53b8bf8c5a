//! Two regions of very different size and nearly equal probability: a single
//! test `a`, and `T` tests `b_1..b_T` whose joint success is only `ε` more likely.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisparityParams {
    pub t: usize,
    pub theta_a: f64,
    pub epsilon: f64,
}

impl Default for DisparityParams {
    fn default() -> Self {
        DisparityParams {
            t: 10,
            theta_a: 0.9,
            epsilon: 0.01,
        }
    }
}

impl DisparityParams {
    /// Common bias of the long region's tests: `(θ_a + ε)^{1/T}`.
    pub fn theta_b(&self) -> f64 {
        (self.theta_a + self.epsilon).powf(1.0 / self.t as f64)
    }
}

/// Test 0 is `a` (region 0); tests `1..=T` are the `b_i` (region 1). Unit costs.
pub fn gen_disparity(params: &DisparityParams) -> Result<ProblemInstance> {
    let DisparityParams { t, theta_a, epsilon } = *params;
    if t == 0 {
        return Err(Error::InvalidParams("T must be at least 1".into()));
    }
    if !(theta_a > 0.0 && epsilon >= 0.0 && theta_a + epsilon < 1.0) {
        return Err(Error::InvalidParams(format!(
            "need 0 < θ_a and θ_a + ε < 1 (got θ_a = {theta_a}, ε = {epsilon})"
        )));
    }
    let mut bias = vec![theta_a];
    bias.extend(std::iter::repeat_n(params.theta_b(), t));
    ProblemInstance::new(t + 1, bias, vec![vec![0], (1..=t).collect()])
}
