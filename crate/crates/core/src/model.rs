//! Problem instances: tests with Bernoulli biases and costs, and regions over them.
//!
//! A region is valid iff every one of its tests evaluates to 1. Regions keep the
//! order in which they were given; every tie-break downstream picks the lowest
//! region index, so that order is part of an instance's meaning.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower and upper clamp applied to biases when clamping is requested.
pub const BIAS_CLAMP: f64 = 1e-6;

/// Dense index of a test, always in `0..num_tests`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestId(pub usize);

impl TestId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A set of tests, stored strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Region {
    tests: Vec<TestId>,
}

impl Region {
    pub fn tests(&self) -> &[TestId] {
        &self.tests
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    pub fn contains(&self, t: TestId) -> bool {
        self.tests.binary_search(&t).is_ok()
    }
}

/// Unvalidated instance data, exactly as it appears in an instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInstance {
    pub num_tests: usize,
    pub bias: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<Vec<f64>>,
    pub regions: Vec<Vec<usize>>,
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ValidationOptions {
    /// Clamp biases into `[1e-6, 1 - 1e-6]` instead of rejecting endpoints.
    pub clamp_bias: bool,
}

/// A validated decision-region-determination problem. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    num_tests: usize,
    bias: Vec<f64>,
    cost: Vec<f64>,
    regions: Vec<Region>,
    meta: serde_json::Map<String, serde_json::Value>,
}

impl ProblemInstance {
    /// Builds an instance with unit costs and no metadata.
    pub fn new(num_tests: usize, bias: Vec<f64>, regions: Vec<Vec<usize>>) -> Result<Self> {
        validate_instance(
            RawInstance {
                num_tests,
                bias,
                cost: None,
                regions,
                meta: Default::default(),
            },
            ValidationOptions::default(),
        )
    }

    pub fn with_costs(
        num_tests: usize,
        bias: Vec<f64>,
        cost: Vec<f64>,
        regions: Vec<Vec<usize>>,
    ) -> Result<Self> {
        validate_instance(
            RawInstance {
                num_tests,
                bias,
                cost: Some(cost),
                regions,
                meta: Default::default(),
            },
            ValidationOptions::default(),
        )
    }

    pub fn num_tests(&self) -> usize {
        self.num_tests
    }

    pub fn num_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    pub fn theta(&self, t: TestId) -> f64 {
        self.bias[t.0]
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }

    #[inline]
    pub fn cost(&self, t: TestId) -> f64 {
        self.cost[t.0]
    }

    pub fn is_unit_cost(&self) -> bool {
        self.cost.iter().all(|&c| c == 1.0)
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, r: usize) -> &Region {
        &self.regions[r]
    }

    /// Largest region size.
    pub fn max_region_len(&self) -> usize {
        self.regions.iter().map(Region::len).max().unwrap_or(0)
    }

    pub fn meta(&self) -> &serde_json::Map<String, serde_json::Value> {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut serde_json::Map<String, serde_json::Value> {
        &mut self.meta
    }

    /// Prior probability that region `r` is valid: the product of its biases.
    pub fn region_prior(&self, r: usize) -> f64 {
        self.regions[r]
            .tests
            .iter()
            .fold(1.0, |acc, &t| acc * self.bias[t.0])
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            num_tests: self.num_tests,
            bias: self.bias.clone(),
            cost: if self.is_unit_cost() {
                None
            } else {
                Some(self.cost.clone())
            },
            regions: self
                .regions
                .iter()
                .map(|r| r.tests.iter().map(|t| t.0).collect())
                .collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn from_json_reader<R: Read>(reader: R, opts: ValidationOptions) -> Result<Self> {
        let raw: RawInstance = serde_json::from_reader(reader)?;
        validate_instance(raw, opts)
    }

    pub fn read_json(path: &Path, opts: ValidationOptions) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_json_reader(std::io::BufReader::new(file), opts)
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, &self.to_raw())?;
        Ok(())
    }

    /// Samples a full outcome vector from the independent Bernoulli prior.
    pub fn sample_truth<R: Rng + ?Sized>(&self, rng: &mut R) -> GroundTruth {
        GroundTruth(self.bias.iter().map(|&p| rng.random::<f64>() < p).collect())
    }
}

/// Validates raw instance data.
///
/// Duplicate regions (identical test sets) are rejected rather than merged:
/// the noisy-OR combination would otherwise count the same factor twice.
pub fn validate_instance(raw: RawInstance, opts: ValidationOptions) -> Result<ProblemInstance> {
    let RawInstance {
        num_tests,
        mut bias,
        cost,
        regions,
        meta,
    } = raw;
    if num_tests == 0 {
        return Err(Error::NoTests);
    }
    if bias.len() != num_tests {
        return Err(Error::LengthMismatch {
            what: "bias",
            expected: num_tests,
            found: bias.len(),
        });
    }
    for (t, b) in bias.iter_mut().enumerate() {
        if opts.clamp_bias && b.is_finite() {
            *b = b.clamp(BIAS_CLAMP, 1.0 - BIAS_CLAMP);
        }
        if !(*b > 0.0 && *b < 1.0) {
            return Err(Error::BiasOutOfRange { test: t, value: *b });
        }
    }
    let cost = match cost {
        Some(c) => {
            if c.len() != num_tests {
                return Err(Error::LengthMismatch {
                    what: "cost",
                    expected: num_tests,
                    found: c.len(),
                });
            }
            if let Some((t, &v)) = c.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
                return Err(Error::NonPositiveCost { test: t, value: v });
            }
            c
        }
        None => vec![1.0; num_tests],
    };
    if regions.is_empty() {
        return Err(Error::NoRegions);
    }

    let mut seen: HashMap<Vec<usize>, usize> = HashMap::with_capacity(regions.len());
    let mut out = Vec::with_capacity(regions.len());
    for (r, mut tests) in regions.into_iter().enumerate() {
        if tests.is_empty() {
            return Err(Error::EmptyRegion { region: r });
        }
        tests.sort_unstable();
        for w in tests.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateTestInRegion {
                    region: r,
                    test: w[0],
                });
            }
        }
        if let Some(&t) = tests.iter().find(|&&t| t >= num_tests) {
            return Err(Error::TestIdOutOfRange {
                region: r,
                test: t,
                num_tests,
            });
        }
        if let Some(&first) = seen.get(&tests) {
            return Err(Error::DuplicateRegion { first, second: r });
        }
        seen.insert(tests.clone(), r);
        out.push(Region {
            tests: tests.into_iter().map(TestId).collect(),
        });
    }

    Ok(ProblemInstance {
        num_tests,
        bias,
        cost,
        regions: out,
        meta,
    })
}

/// Full outcome vector; `true` means the test evaluates to 1 (valid).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundTruth(pub Vec<bool>);

impl GroundTruth {
    pub fn from_bits(bits: &[u8]) -> Self {
        GroundTruth(bits.iter().map(|&b| b != 0).collect())
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.0.iter().map(|&b| b as u8).collect()
    }

    #[inline]
    pub fn outcome(&self, t: TestId) -> bool {
        self.0[t.0]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True iff at least one region of `instance` is valid under this truth.
    pub fn validates_some_region(&self, instance: &ProblemInstance) -> bool {
        instance
            .regions()
            .iter()
            .any(|r| r.tests().iter().all(|&t| self.outcome(t)))
    }
}

/// Observed outcomes in evaluation order, with O(1) lookup by test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    entries: Vec<(TestId, bool)>,
    outcomes: Vec<Option<bool>>,
}

impl Observation {
    pub fn new(num_tests: usize) -> Self {
        Observation {
            entries: Vec::new(),
            outcomes: vec![None; num_tests],
        }
    }

    pub fn record(&mut self, t: TestId, outcome: bool) -> Result<()> {
        match self.outcomes.get(t.0) {
            None => Err(Error::TestIdOutOfRange {
                region: usize::MAX,
                test: t.0,
                num_tests: self.outcomes.len(),
            }),
            Some(Some(_)) => Err(Error::AlreadyObserved(t)),
            Some(None) => {
                self.outcomes[t.0] = Some(outcome);
                self.entries.push((t, outcome));
                Ok(())
            }
        }
    }

    #[inline]
    pub fn get(&self, t: TestId) -> Option<bool> {
        self.outcomes[t.0]
    }

    #[inline]
    pub fn is_observed(&self, t: TestId) -> bool {
        self.outcomes[t.0].is_some()
    }

    pub fn entries(&self) -> &[(TestId, bool)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_tests(&self) -> usize {
        self.outcomes.len()
    }

    pub fn selected(&self) -> impl Iterator<Item = TestId> + '_ {
        self.entries.iter().map(|&(t, _)| t)
    }
}
