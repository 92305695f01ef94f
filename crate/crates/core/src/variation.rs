//! Partial Φ-variation sums along dyadic partitions,
//!
//! ```text
//! V_{n,t} = Σ_{k=0}^{K} Φ(|f((k+1)2^{-n}) - f(k2^{-n})|),   K = min(⌊t2^n⌋, 2^n - 1),
//! ```
//!
//! by exact enumeration, by the binomial collapse available when all
//! `β_m` agree, or by Monte Carlo over uniformly drawn cells.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{Increments, SignField};
use crate::error::{invalid, Error, Result};
use crate::limits::{self, MomentMethod};
use crate::numeric::Accumulator;
use crate::regvar::{PhiFunction, RegularlyVaryingFn};
use crate::scheme::CoefficientScheme;

/// Minimum Monte Carlo sample count.
pub const MIN_SAMPLES: u64 = 100;

/// Samples per Monte Carlo work unit; each unit draws from its own stream.
pub const MC_CHUNK: u64 = 1 << 16;

/// Slope threshold (log₂ per level) separating the power-variation trends.
pub const TREND_THRESHOLD: f64 = 0.05;

/// Largest `n` at which binomial weights are formed by the product recurrence.
const LINEAR_BINOMIAL_MAX: u32 = 1000;

/// The function applied to each absolute increment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Gauge {
    /// `x^p`.
    Power(f64),
    /// `Φ_q`, defined on `[0, 1)`.
    Phi(PhiFunction),
}

impl Gauge {
    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(invalid(format!("power must be finite and positive, got {p}")));
        }
        Ok(Gauge::Power(p))
    }

    pub fn phi(q: f64, g: RegularlyVaryingFn) -> Result<Self> {
        Ok(Gauge::Phi(PhiFunction::new(q, g)?))
    }

    /// The exponent governing the gauge near zero: `p`, or `1/(1-q)`.
    pub fn exponent(&self) -> f64 {
        match self {
            Gauge::Power(p) => *p,
            Gauge::Phi(phi) => phi.exponent(),
        }
    }

    /// `Φ(x)` for `x ≥ 0` (inside the domain for `Φ_q`).
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Gauge::Power(p) => power(x, *p),
            Gauge::Phi(phi) => phi.value(x),
        }
    }

    /// `ln Φ(x)` from `ln x`.
    pub fn ln_value(&self, ln_x: f64) -> f64 {
        match self {
            Gauge::Power(p) => p * ln_x,
            Gauge::Phi(phi) => phi.ln_value(ln_x),
        }
    }

    /// Reject increments that may leave the domain of `Φ_q`.
    fn check_domain(&self, bound: f64) -> Result<()> {
        match self {
            Gauge::Phi(_) if !(bound < 1.0) => Err(Error::GaugeDomain { bound }),
            _ => Ok(()),
        }
    }
}

#[inline]
fn power(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else if x == 0.0 {
        0.0
    } else {
        x.powf(p)
    }
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gauge::Power(p) => write!(f, "power:{p}"),
            Gauge::Phi(phi) => write!(f, "phi:q={},g={}", phi.q(), phi.g()),
        }
    }
}

impl FromStr for Gauge {
    type Err = Error;

    /// `power:P` or `phi:q=Q,g=EXPR`.
    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: &str| Error::Parse { input: s.to_string(), reason: reason.to_string() };
        let s = s.trim();
        if let Some(p) = s.strip_prefix("power:") {
            let p = p.trim().parse::<f64>().map_err(|_| err("power must be a number"))?;
            return Gauge::power(p);
        }
        if let Some(rest) = s.strip_prefix("phi:") {
            let (q, g) = rest.split_once(",g=").ok_or_else(|| err("expected phi:q=Q,g=EXPR"))?;
            let q = q
                .trim()
                .strip_prefix("q=")
                .ok_or_else(|| err("expected phi:q=Q,g=EXPR"))?
                .parse::<f64>()
                .map_err(|_| err("q must be a number"))?;
            return Gauge::phi(q, g.parse()?);
        }
        Err(err("expected power:P or phi:q=Q,g=EXPR"))
    }
}

impl From<Gauge> for String {
    fn from(g: Gauge) -> Self {
        g.to_string()
    }
}

impl TryFrom<String> for Gauge {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Which engine produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "kebab-case")]
pub enum Mode {
    Enumerate,
    Binomial,
    #[serde(rename = "mc")]
    MonteCarlo {
        samples: u64,
        seed: u64,
    },
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Enumerate => write!(f, "enumerate"),
            Mode::Binomial => write!(f, "binomial"),
            Mode::MonteCarlo { samples, seed } => write!(f, "mc(samples={samples},seed={seed})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub n: u32,
    pub t: f64,
    pub gauge: Gauge,
    pub mode: Mode,
    pub value: f64,
    /// Zero for the exact engines.
    pub stderr: f64,
    /// Seconds.
    pub wall_time: f64,
}

fn check_t(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(invalid(format!("t must lie in [0, 1], got {t}")))
    }
}

/// Index of the last cell included at time `t`.
fn last_cell(n: u32, t: f64) -> u64 {
    let cells = 1u64 << n;
    ((t * cells as f64).floor() as u64).min(cells - 1)
}

fn report(n: u32, t: f64, gauge: &Gauge, mode: Mode, value: f64, stderr: f64, start: Instant) -> VariationReport {
    VariationReport { n, t, gauge: gauge.clone(), mode, value, stderr, wall_time: start.elapsed().as_secs_f64() }
}

/// Exact `V_{n,t}` by visiting every increment, in parallel blocks on the
/// current rayon pool with a fixed reduction order.
pub fn variation_enumerate(
    scheme: &CoefficientScheme,
    signs: &SignField,
    gauge: &Gauge,
    n: u32,
    t: f64,
) -> Result<VariationReport> {
    let start = Instant::now();
    check_t(t)?;
    let inc = Increments::new(scheme, signs, n)?;
    gauge.check_domain(inc.max_abs_bound())?;
    if t == 0.0 {
        return Ok(report(n, t, gauge, Mode::Enumerate, 0.0, 0.0, start));
    }
    let range = 0..last_cell(n, t) + 1;
    let scale = inc.scale();
    let value = match gauge {
        // power gauges are summed on the scaled increments 2^n Δ and
        // rescaled once, which avoids underflow at large n
        Gauge::Power(p) => {
            let p = *p;
            let sum = fold_blocks(&inc, range, |s| power(s.abs(), p));
            sum * power(scale, p)
        }
        Gauge::Phi(phi) => fold_blocks(&inc, range, |s| phi.value(s.abs() * scale)),
    };
    Ok(report(n, t, gauge, Mode::Enumerate, value, 0.0, start))
}

fn fold_blocks(inc: &Increments<'_>, range: std::ops::Range<u64>, f: impl Fn(f64) -> f64 + Sync) -> f64 {
    let blocks = inc.par_blocks(range, |r, cursor| {
        let mut acc = Accumulator::new();
        acc.add(f(cursor.scaled()));
        for _ in r.start + 1..r.end {
            cursor.advance();
            acc.add(f(cursor.scaled()));
        }
        acc
    });
    let mut total = Accumulator::new();
    for b in &blocks {
        total.merge(b);
    }
    total.value()
}

/// Exact `V_{n,1}` when `β_0 = … = β_{n-1} = β`: the scaled increment is
/// `β(n - 2J)` with `J ~ Binomial(n, 1/2)`, so
/// `V_n = Σ_j C(n,j) Φ(|β||n - 2j| 2^{-n})`.
pub fn variation_binomial(
    scheme: &CoefficientScheme,
    signs: &SignField,
    gauge: &Gauge,
    n: u32,
) -> Result<VariationReport> {
    let start = Instant::now();
    if n == 0 {
        return Err(invalid("level n must be at least 1"));
    }
    if !signs.is_classic() {
        return Err(invalid("the binomial engine needs classic signs; use enumeration or Monte Carlo"));
    }
    let beta = scheme.equal_beta_prefix(n).ok_or(Error::UnequalPrefix { n: n - 1 })?.abs();
    let bound = beta * n as f64 * 2f64.powi(-(n as i32));
    gauge.check_domain(bound)?;
    let value = binomial_sum(gauge, beta, n);
    Ok(report(n, 1.0, gauge, Mode::Binomial, value, 0.0, start))
}

fn binomial_sum(gauge: &Gauge, beta: f64, n: u32) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    let mut acc = Accumulator::new();
    if n <= LINEAR_BINOMIAL_MAX {
        // C(n, j) by the exact-ish product recurrence; Φ arguments stay normal
        let scale = beta * 2f64.powi(-(n as i32));
        let mut c = 1.0_f64;
        for j in 0..=n / 2 {
            let d = (n - 2 * j) as f64;
            let mult = if 2 * j == n { 1.0 } else { 2.0 };
            acc.add(mult * c * gauge.value(d * scale));
            c = c * (nf - j as f64) / (j as f64 + 1.0);
        }
    } else {
        // log-space weights: ln C(n,j) + ln Φ(|β||n-2j| 2^{-n})
        let ln_beta = beta.ln();
        let ln_scale = ln_beta - nf * std::f64::consts::LN_2;
        let lg_n1 = libm::lgamma(nf + 1.0);
        for j in 0..=n / 2 {
            let d = (n - 2 * j) as f64;
            if d == 0.0 {
                continue;
            }
            let ln_c = lg_n1 - libm::lgamma(j as f64 + 1.0) - libm::lgamma(nf - j as f64 + 1.0);
            let term = (ln_c + gauge.ln_value(d.ln() + ln_scale)).exp();
            acc.add(2.0 * term);
        }
    }
    acc.value()
}

/// Monte Carlo estimate of `V_{n,t}`: `(K+1)` times the mean of
/// `Φ(|Δ_{n,k}|)` over `k` drawn uniformly from `{0, …, K}`.
#[allow(clippy::too_many_arguments)]
pub fn variation_mc(
    scheme: &CoefficientScheme,
    signs: &SignField,
    gauge: &Gauge,
    n: u32,
    t: f64,
    samples: u64,
    seed: u64,
) -> Result<VariationReport> {
    let start = Instant::now();
    check_t(t)?;
    if samples < MIN_SAMPLES {
        return Err(invalid(format!("Monte Carlo needs at least {MIN_SAMPLES} samples, got {samples}")));
    }
    let inc = Increments::new(scheme, signs, n)?;
    gauge.check_domain(inc.max_abs_bound())?;
    let mode = Mode::MonteCarlo { samples, seed };
    if t == 0.0 {
        return Ok(report(n, t, gauge, mode, 0.0, 0.0, start));
    }
    let last = last_cell(n, t);
    let scale = inc.scale();
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<(Accumulator, Accumulator)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            let (mut s1, mut s2) = (Accumulator::new(), Accumulator::new());
            for _ in 0..len {
                let k = rng.random_range(0..=last);
                let v = gauge.value(inc.scaled_unchecked(k).abs() * scale);
                s1.add(v);
                s2.add(v * v);
            }
            (s1, s2)
        })
        .collect();
    let (mut s1, mut s2) = (Accumulator::new(), Accumulator::new());
    for (a, b) in &parts {
        s1.merge(a);
        s2.merge(b);
    }
    let count = samples as f64;
    let mean = s1.value() / count;
    let var = ((s2.value() - count * mean * mean) / (count - 1.0)).max(0.0);
    let cells = (last + 1) as f64;
    Ok(report(n, t, gauge, mode, cells * mean, cells * (var / count).sqrt(), start))
}

/// Engine selector for [`convergence_study`] and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Enumerate,
    Binomial,
    Mc,
}

/// Run one engine.
#[allow(clippy::too_many_arguments)]
pub fn variation(
    scheme: &CoefficientScheme,
    signs: &SignField,
    gauge: &Gauge,
    n: u32,
    t: f64,
    engine: Engine,
    samples: u64,
    seed: u64,
) -> Result<VariationReport> {
    match engine {
        Engine::Enumerate => variation_enumerate(scheme, signs, gauge, n, t),
        Engine::Binomial => {
            if t != 1.0 {
                return Err(invalid("the binomial engine computes the full sum, t = 1"));
            }
            variation_binomial(scheme, signs, gauge, n)
        }
        Engine::Mc => variation_mc(scheme, signs, gauge, n, t, samples, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub report: VariationReport,
    pub limit: Option<f64>,
    /// `value - limit`.
    pub deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub scheme: CoefficientScheme,
    pub signs: SignField,
    pub rows: Vec<StudyRow>,
    /// How the limit was obtained, when one is attached.
    pub limit_source: Option<String>,
}

/// The limiting variation `lim_n V_{n,t}` for the gauge, when the scheme's
/// profile `s_n² ~ 2^{2qn} g(n)` determines it.
pub fn theoretical_limit(scheme: &CoefficientScheme, gauge: &Gauge, t: f64) -> Result<Option<(f64, String)>> {
    let Some(profile) = scheme.asymptotic_profile() else {
        return Ok(None);
    };
    let exponent = gauge.exponent();
    match gauge {
        Gauge::Phi(phi) => {
            if (phi.q() - profile.q).abs() > 1e-12 {
                return Ok(None);
            }
            // the gauge must be built from the scheme's own g, or both must be constants
            let factor = if phi.g() == &profile.g {
                1.0
            } else {
                match (phi.g().constant_value(), profile.g.constant_value()) {
                    (Some(cg), Some(cs)) => (cs / cg).powf(exponent / 2.0),
                    _ => return Ok(None),
                }
            };
            if profile.s_squared_limit.is_some() {
                return Ok(None);
            }
            if phi.q() == 0.0 {
                Ok(Some((factor * (2.0 / PI).sqrt() * t, "sqrt(2/pi) t".into())))
            } else {
                let m = abs_moment(phi.q(), exponent)?;
                Ok(Some((factor * m * t, format!("E|Z|^{exponent} t"))))
            }
        }
        Gauge::Power(p) => {
            if profile.s_squared_limit.is_some() {
                if *p > 1.0 {
                    return Ok(Some((0.0, "vanishing r-th variation".into())));
                }
                if *p == 1.0 && t == 1.0 {
                    return Ok(limits::total_variation_expectation(scheme, limits::TV_DEFAULT_METHOD)
                        .ok()
                        .map(|e| (e.value, "E|Z~|".into())));
                }
                return Ok(None);
            }
            let critical = 1.0 / (1.0 - profile.q);
            if *p > critical + 1e-12 {
                return Ok(Some((0.0, "vanishing r-th variation".into())));
            }
            if (*p - critical).abs() <= 1e-12 && profile.q > 0.0 {
                if let Some(c) = profile.g_limit.filter(|c| c.is_finite() && *c > 0.0) {
                    let m = abs_moment(profile.q, critical)?;
                    return Ok(Some((c.powf(p / 2.0) * m * t, format!("c^(p/2) E|Z|^{p} t"))));
                }
            }
            Ok(None)
        }
    }
}

/// `E|Z|^r` as a point value: exact for `r = 2`, otherwise the midpoint
/// of the depth-20 enumeration bracket.
fn abs_moment(q: f64, r: f64) -> Result<f64> {
    if r == 2.0 {
        return Ok(1.0);
    }
    let est = limits::moment_z(q, r, MomentMethod::ExactEnum { depth: 20 })?;
    Ok(0.5 * (est.error_low + est.error_high))
}

/// Evaluate the gauge along `levels` and compare with the limit.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    scheme: &CoefficientScheme,
    signs: &SignField,
    gauge: &Gauge,
    levels: &[u32],
    t: f64,
    engine: Engine,
    samples: u64,
    seed: u64,
) -> Result<Study> {
    let limit = theoretical_limit(scheme, gauge, t)?;
    let mut rows = Vec::with_capacity(levels.len());
    for &n in levels {
        let report = variation(scheme, signs, gauge, n, t, engine, samples, seed)?;
        let lim = limit.as_ref().map(|l| l.0);
        let deviation = lim.map(|l| report.value - l);
        rows.push(StudyRow { report, limit: lim, deviation });
    }
    Ok(Study { scheme: scheme.clone(), signs: signs.clone(), rows, limit_source: limit.map(|l| l.1) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Diverging,
    Vanishing,
    Stable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerClassification {
    pub r: f64,
    pub trend: Trend,
    /// Least-squares slope of `log₂ V_n^{(r)}` over the last half of the levels.
    pub slope: f64,
    pub values: Vec<(u32, f64)>,
    /// `V_n^{(r)} / (2^{n(1-r)} s_n^r)`, bounded above and below by Khintchine.
    pub khintchine: Vec<(u32, f64)>,
}

impl PowerClassification {
    /// `max / min` of the Khintchine ratios.
    pub fn khintchine_spread(&self) -> f64 {
        let ratios = self.khintchine.iter().map(|p| p.1);
        let max = ratios.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.fold(f64::INFINITY, f64::min);
        max / min
    }
}

/// Classify `r`-th power variation along `levels` by the trend of
/// `log₂ V_n^{(r)}`, using the binomial engine when the `β` are equal.
pub fn classify_power_variation(
    scheme: &CoefficientScheme,
    r: f64,
    levels: std::ops::RangeInclusive<u32>,
) -> Result<PowerClassification> {
    if !(r >= 1.0) {
        return Err(invalid(format!("r must be at least 1, got {r}")));
    }
    let (lo, hi) = (*levels.start(), *levels.end());
    if lo == 0 || hi < lo + 1 {
        return Err(invalid("level range needs at least two levels, starting at 1"));
    }
    let gauge = Gauge::power(r)?;
    let signs = SignField::Classic;
    let mut values = Vec::new();
    let mut khintchine = Vec::new();
    for n in levels {
        let v = if scheme.equal_beta_prefix(n).is_some() {
            variation_binomial(scheme, &signs, &gauge, n)?.value
        } else {
            variation_enumerate(scheme, &signs, &gauge, n, 1.0)?.value
        };
        values.push((n, v));
        let ln_norm = n as f64 * (1.0 - r) * std::f64::consts::LN_2 + 0.5 * r * scheme.ln_s_squared(n);
        khintchine.push((n, v / ln_norm.exp()));
    }
    let half = &values[values.len() / 2..];
    let slope = if half.iter().any(|p| p.1 == 0.0) {
        f64::NEG_INFINITY
    } else {
        let pts: Vec<(f64, f64)> = half.iter().map(|&(n, v)| (n as f64, v.log2())).collect();
        least_squares_slope(&pts)
    };
    let trend = if slope > TREND_THRESHOLD {
        Trend::Diverging
    } else if slope < -TREND_THRESHOLD {
        Trend::Vanishing
    } else {
        Trend::Stable
    };
    Ok(PowerClassification { r, trend, slope, values, khintchine })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
