//! Execute a validated [`Plan`].

use phivar::dyadic::{gen_path, DyadicPath};
use phivar::limits::{
    clt_distance, coupling_distance, coupling_sampled, moment_z, total_variation_expectation, CltReport,
    CouplingReport, Estimate, MomentMethod, TvMethod,
};
use phivar::scheme::{check_conditions, Verdict};
use phivar::variation::{convergence_study, Engine, StudyRow};
use phivar::Error;
use serde::{Deserialize, Serialize};

use crate::config::{Plan, RunConfig};

/// Non-finite values are carried as `None` so records survive JSON.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub condition: String,
    pub target: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub n: u32,
    /// Ratios for conditions (i) through (iv); `None` where not defined.
    pub ratios: [Option<f64>; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionsResult {
    pub q: f64,
    pub b: f64,
    pub verdicts: Vec<ConditionVerdict>,
    pub rows: Vec<ConditionRow>,
    /// Last observed `s_{n-1}²/s_n²` and its expected limit `2^{-2q}`.
    pub ratio_limit_estimate: Option<f64>,
    pub ratio_limit_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RunResult {
    Sweep { rows: Vec<StudyRow>, limit_source: Option<String> },
    Estimate { estimate: Estimate },
    Coupling { rows: Vec<CouplingReport> },
    Clt { rows: Vec<CltReport> },
    Path { labels: Vec<String>, paths: Vec<DyadicPath> },
    Conditions(ConditionsResult),
}

/// The JSON artifact: the normalized configuration and what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub config: RunConfig,
    pub result: RunResult,
}

pub const CONDITION_NAMES: [&str; 4] = ["(i)", "(ii)", "(iii)", "(iv)"];

pub fn execute(plan: &Plan, reproducible: bool) -> Result<RunResult, Error> {
    Ok(match plan {
        Plan::Variation(s) | Plan::Study(s) => {
            let study = convergence_study(&s.scheme, &s.signs, &s.gauge, &s.levels, s.t, s.engine, s.samples, s.seed)?;
            let mut rows = study.rows;
            if reproducible {
                rows.iter_mut().for_each(|r| r.report.wall_time = 0.0);
            }
            RunResult::Sweep { rows, limit_source: study.limit_source }
        }
        &Plan::Moment { q, r, engine, depth, samples, seed } => {
            let method = match engine {
                Engine::Mc => MomentMethod::MonteCarlo { samples, seed },
                _ => MomentMethod::ExactEnum { depth },
            };
            RunResult::Estimate { estimate: moment_z(q, r, method)? }
        }
        Plan::Coupling { scheme, q, levels, sampled } => {
            let rows = levels
                .iter()
                .map(|&n| match sampled {
                    Some((p, samples, seed)) => coupling_sampled(scheme, *q, n, *p, *samples, *seed),
                    None => coupling_distance(scheme, *q, n),
                })
                .collect::<Result<_, _>>()?;
            RunResult::Coupling { rows }
        }
        Plan::TotalVariation { scheme, engine, depth, samples, seed } => {
            let method = match engine {
                Engine::Mc => TvMethod::MonteCarlo { samples: *samples, seed: *seed },
                _ => TvMethod::ExactEnum { depth: *depth },
            };
            RunResult::Estimate { estimate: total_variation_expectation(scheme, method)? }
        }
        Plan::Clt { scheme, levels, samples, seed } => RunResult::Clt {
            rows: levels.iter().map(|&n| clt_distance(scheme, n, (*samples, *seed))).collect::<Result<_, _>>()?,
        },
        Plan::Path { paths, level, tolerance } => {
            let mut out = Vec::with_capacity(paths.len());
            for job in paths {
                out.push(gen_path(&job.scheme, &job.signs, *level, *tolerance)?);
            }
            RunResult::Path { labels: paths.iter().map(|j| j.label.clone()).collect(), paths: out }
        }
        Plan::Conditions { scheme, q, slow, b, nmin, nmax } => {
            let report = check_conditions(scheme, *q, slow, *b, *nmin..=*nmax)?;
            let series =
                [&report.beta_over_l, &report.s_over_ell, &report.beta_over_scaled_ell, &report.s_over_scaled_ell];
            let rows = (*nmin..=*nmax)
                .map(|n| ConditionRow {
                    n,
                    ratios: series.map(|s| s.ratios.iter().find(|p| p.0 == n).and_then(|p| finite(p.1))),
                })
                .collect();
            let verdicts = CONDITION_NAMES
                .iter()
                .zip(series)
                .map(|(name, s)| ConditionVerdict {
                    condition: name.to_string(),
                    target: finite(s.target),
                    verdict: s.verdict,
                })
                .collect();
            RunResult::Conditions(ConditionsResult {
                q: *q,
                b: *b,
                verdicts,
                rows,
                ratio_limit_estimate: finite(report.ratio_limit_estimate),
                ratio_limit_target: report.ratio_limit_target,
            })
        }
    })
}
