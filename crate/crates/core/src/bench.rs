//! Paired Monte Carlo benchmarks: every policy runs on every ground truth of a
//! bundle, costs are normalized against a baseline policy, and 95% intervals
//! come from a percentile bootstrap over problem indices.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{DatasetBundle, Provenance};
use crate::error::{Error, Result};
use crate::policy::{Policy, PolicyKind, PolicySpec, Selector};
use crate::runner;
use crate::seed;
use crate::stats;

/// How costs are compared with the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `(mean c_π − mean c_base) / mean c_base`: normalized expected cost.
    #[default]
    RatioOfMeans,
    /// Mean over problems of `(c_π − c_base) / c_base`.
    PerProblem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchParams {
    pub policies: Vec<PolicySpec>,
    pub baseline: PolicySpec,
    pub normalization: Normalization,
    pub resamples: usize,
    pub level: f64,
    /// Include wall-clock runtime per policy (makes reports non-reproducible).
    pub timings: bool,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            policies: PolicySpec::all(),
            baseline: PolicySpec::new(PolicyKind::Bisect, Selector::Unconstrained),
            normalization: Normalization::default(),
            resamples: 10_000,
            level: 0.95,
            timings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub policy: String,
    pub selector: String,
    pub mean_cost: f64,
    pub norm_mean: f64,
    pub norm_lo: f64,
    pub norm_hi: f64,
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_secs: Option<f64>,
}

impl PolicyStats {
    pub fn spec(&self) -> Result<PolicySpec> {
        format!("{}:{}", self.policy, self.selector).parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub dataset: String,
    pub seed: u64,
    pub baseline: PolicySpec,
    pub normalization: Normalization,
    pub resamples: usize,
    pub level: f64,
    pub policies: Vec<PolicyStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    /// Per-problem costs, `costs[policy][problem]`, in `policies` order.
    pub costs: Vec<Vec<f64>>,
}

impl BenchReport {
    pub fn get(&self, spec: PolicySpec) -> Option<&PolicyStats> {
        self.policies
            .iter()
            .find(|p| p.spec().is_ok_and(|s| s == spec))
    }
}

fn normalized(costs: &[f64], base: &[f64], idx: &[usize], how: Normalization) -> f64 {
    match how {
        Normalization::RatioOfMeans => {
            let c: Vec<f64> = idx.iter().map(|&i| costs[i]).collect();
            let b: Vec<f64> = idx.iter().map(|&i| base[i]).collect();
            let (mc, mb) = (stats::pairwise_sum(&c), stats::pairwise_sum(&b));
            (mc - mb) / mb
        }
        Normalization::PerProblem => {
            let r: Vec<f64> = idx.iter().map(|&i| (costs[i] - base[i]) / base[i]).collect();
            stats::mean(&r)
        }
    }
}

/// Runs every policy on every ground truth of `bundle`.
pub fn run_bench(bundle: &DatasetBundle, params: &BenchParams, master: u64) -> Result<BenchReport> {
    let inst = &bundle.instance;
    let truths = &bundle.ground_truths;
    if truths.is_empty() {
        return Err(Error::InvalidParams("bundle has no ground truths".into()));
    }
    if params.policies.is_empty() {
        return Err(Error::InvalidParams("no policies to benchmark".into()));
    }
    let base_idx = params
        .policies
        .iter()
        .position(|&p| p == params.baseline)
        .ok_or_else(|| Error::InvalidParams(format!("baseline {} is not among the policies", params.baseline)))?;
    if !(params.level > 0.0 && params.level < 1.0) {
        return Err(Error::InvalidParams("confidence level must lie in (0, 1)".into()));
    }
    for &spec in &params.policies {
        Policy::new(spec, inst, 0)?;
    }

    let n = truths.len();
    let cells: Vec<(f64, f64)> = (0..params.policies.len() * n)
        .into_par_iter()
        .map(|cell| {
            let (p, j) = (cell / n, cell % n);
            let spec = params.policies[p];
            let mut policy = Policy::new(spec, inst, seed::derive(master, &format!("policy/{spec}"), j as u64))?;
            let start = Instant::now();
            let res = runner::run(inst, &mut policy, &truths[j])?;
            Ok((res.total_cost, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;
    let costs: Vec<Vec<f64>> = cells.chunks(n).map(|c| c.iter().map(|x| x.0).collect()).collect();
    let runtimes: Vec<f64> = cells
        .chunks(n)
        .map(|c| c.iter().map(|x| x.1).sum())
        .collect();

    let base = &costs[base_idx];
    let all: Vec<usize> = (0..n).collect();
    let policies = params
        .policies
        .par_iter()
        .enumerate()
        .map(|(p, spec)| {
            let c = &costs[p];
            let norm_mean = normalized(c, base, &all, params.normalization);
            // The same resample stream for every policy keeps the comparison paired.
            let mut rng = seed::stream(master, "bootstrap", 0);
            let (lo, hi) = stats::bootstrap_ci(n, params.resamples, params.level, &mut rng, |idx| {
                normalized(c, base, idx, params.normalization)
            });
            PolicyStats {
                policy: spec.kind.name().to_string(),
                selector: spec.selector.name().to_string(),
                mean_cost: stats::mean(c),
                norm_mean,
                norm_lo: lo,
                norm_hi: hi,
                trials: n,
                runtime_secs: params.timings.then_some(runtimes[p]),
            }
        })
        .collect();

    Ok(BenchReport {
        dataset: bundle
            .provenance
            .as_ref()
            .map_or_else(|| "unnamed".to_string(), |p| p.generator.clone()),
        seed: master,
        baseline: params.baseline,
        normalization: params.normalization,
        resamples: params.resamples,
        level: params.level,
        policies,
        provenance: bundle.provenance.clone(),
        costs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// One row of the csv report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub dataset: String,
    pub policy: String,
    pub selector: String,
    pub mean_cost: f64,
    pub norm_lo: f64,
    pub norm_hi: f64,
    pub trials: usize,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "dataset,policy,selector,mean_cost,norm_lo,norm_hi,trials,seed";

pub fn emit_report(report: &BenchReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            for p in &report.policies {
                w.serialize(CsvRow {
                    dataset: report.dataset.clone(),
                    policy: p.policy.clone(),
                    selector: p.selector.clone(),
                    mean_cost: p.mean_cost,
                    norm_lo: p.norm_lo,
                    norm_hi: p.norm_hi,
                    trials: p.trials,
                    seed: report.seed,
                })
                .map_err(csv_error)?;
            }
            let body = String::from_utf8(w.into_inner().map_err(|e| csv_error(e.into_error().into()))?)
                .expect("csv writes UTF-8");
            Ok(format!("{CSV_HEADER}\n{body}"))
        }
        ReportFormat::Markdown => Ok(markdown(report)),
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Parses a csv report back into rows.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

/// Policy rows by selector columns, each cell the normalized-cost interval.
fn markdown(report: &BenchReport) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "Normalized cost on `{}` relative to {} ({:.0}% interval, {} resamples, {} problems, seed {})\n",
        report.dataset,
        report.baseline,
        report.level * 100.0,
        report.resamples,
        report.policies.first().map_or(0, |p| p.trials),
        report.seed
    )
    .unwrap();
    s.push_str("| Policy | Unconstrained | MaxProbReg |\n|---|---|---|\n");
    for kind in PolicyKind::ALL {
        let cell = |sel: Selector| {
            report
                .get(PolicySpec::new(kind, sel))
                .map_or_else(|| "—".to_string(), |p| format!("({:.2}, {:.2})", p.norm_lo, p.norm_hi))
        };
        let (u, m) = (cell(Selector::Unconstrained), cell(Selector::MaxProb));
        if u == "—" && m == "—" {
            continue;
        }
        writeln!(s, "| {} | {} | {} |", kind.name(), u, m).unwrap();
    }
    s
}

/// Long-format per-problem data: `dataset,policy,selector,problem,cost,normalized`.
pub fn plot_data(report: &BenchReport) -> String {
    let base_idx = report
        .policies
        .iter()
        .position(|p| p.spec().is_ok_and(|s| s == report.baseline));
    let mut s = String::from("dataset,policy,selector,problem,cost,normalized\n");
    for (p, stats) in report.policies.iter().enumerate() {
        for (j, &c) in report.costs[p].iter().enumerate() {
            let norm = base_idx.map_or(f64::NAN, |b| (c - report.costs[b][j]) / report.costs[b][j]);
            writeln!(s, "{},{},{},{},{},{}", report.dataset, stats.policy, stats.selector, j, c, norm).unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate, DatasetSpec};
    use crate::datasets::synthetic::SyntheticParams;
    use crate::runner::Conditioning;

    fn small_bundle() -> DatasetBundle {
        let spec = DatasetSpec::Synthetic(SyntheticParams {
            num_regions: 20,
            ..Default::default()
        });
        generate(&spec, 20, Conditioning::AtLeastOneValid, 11).unwrap()
    }

    fn params(policies: Vec<PolicySpec>) -> BenchParams {
        BenchParams {
            policies,
            resamples: 500,
            ..Default::default()
        }
    }

    #[test]
    fn baseline_against_itself_is_zero() {
        let b = small_bundle();
        let r = run_bench(&b, &params(vec![BenchParams::default().baseline]), 1).unwrap();
        let p = &r.policies[0];
        assert_eq!((p.norm_lo, p.norm_hi, p.norm_mean), (0.0, 0.0, 0.0));
    }

    #[test]
    fn identical_behaviour_straddles_zero() {
        // Two deterministic policies that coincide on single-test regions.
        let inst = crate::model::ProblemInstance::new(1, vec![0.5], vec![vec![0]]).unwrap();
        let truths = vec![crate::model::GroundTruth(vec![true]); 10];
        let b = DatasetBundle {
            instance: inst,
            ground_truths: truths,
            provenance: None,
        };
        let specs = vec![
            PolicySpec::new(PolicyKind::Bisect, Selector::Unconstrained),
            PolicySpec::new(PolicyKind::MaxTally, Selector::Unconstrained),
        ];
        let r = run_bench(&b, &params(specs), 1).unwrap();
        let p = &r.policies[1];
        assert!(p.norm_lo <= 0.0 && 0.0 <= p.norm_hi);
    }

    #[test]
    fn formats() {
        let b = small_bundle();
        let specs = vec![
            PolicySpec::new(PolicyKind::Bisect, Selector::Unconstrained),
            PolicySpec::new(PolicyKind::Random, Selector::Unconstrained),
        ];
        let r = run_bench(&b, &params(specs), 1).unwrap();
        let csv = emit_report(&r, ReportFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        let rows = parse_csv(&csv).unwrap();
        let json = emit_report(&r, ReportFormat::Json).unwrap();
        let back: BenchReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        for (row, p) in rows.iter().zip(&back.policies) {
            assert_eq!(crate::policy::round_sig12(row.norm_lo), crate::policy::round_sig12(p.norm_lo));
            assert_eq!(crate::policy::round_sig12(row.mean_cost), crate::policy::round_sig12(p.mean_cost));
        }
        let md = emit_report(&r, ReportFormat::Markdown).unwrap();
        assert!(md.contains("| bisect | (0.00, 0.00) | — |"));
        assert!(matches!("xml".parse::<ReportFormat>(), Err(Error::UnknownFormat(_))));
        assert_eq!(plot_data(&r).lines().count(), 1 + 2 * 20);
        assert!(r.policies.iter().all(|p| p.norm_lo <= p.norm_hi));
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = BenchReport {
            dataset: "x".into(),
            seed: 0,
            baseline: BenchParams::default().baseline,
            normalization: Normalization::RatioOfMeans,
            resamples: 0,
            level: 0.95,
            policies: vec![],
            provenance: None,
            costs: vec![],
        };
        assert_eq!(emit_report(&r, ReportFormat::Csv).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn missing_baseline_is_rejected() {
        let b = small_bundle();
        let p = params(vec![PolicySpec::new(PolicyKind::Random, Selector::Unconstrained)]);
        assert!(run_bench(&b, &p, 1).is_err());
    }
}
