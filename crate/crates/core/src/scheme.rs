//! Coefficient schemes `α_m` of the Takagi expansion `f(t) = Σ α_m φ(2^m t)`
//! and the derived quantities `β_m = 2^m α_m`, `s_n² = Σ_{m<n} β_m²`.

use std::f64::consts::{LN_10, LN_2};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numeric::Accumulator;
use crate::regvar::RegularlyVaryingFn;

/// Default truncation cap for infinite series.
pub const DEFAULT_MAX_LEVEL: u32 = 4096;

/// Default truncation of the Faber scheme (`6! = 720`).
pub const FABER_DEFAULT_LEVELS: u32 = 720;

fn faber_default() -> u32 {
    FABER_DEFAULT_LEVELS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SchemeKind {
    /// Finitely many coefficients; `α_m = 0` beyond the list.
    #[serde(rename = "explicit")]
    Explicit { alphas: Vec<f64> },
    /// Takagi-Landsberg `α_m = a^m`, `|a| < 1`.
    #[serde(rename = "geometric")]
    Geometric { a: f64 },
    /// The classical Takagi function, `α_m = 2^{-m}`.
    #[serde(rename = "takagi")]
    Takagi,
    /// `α_m = 10^{-k}` when `m = k!`, zero otherwise, truncated at `levels`.
    #[serde(rename = "faber")]
    Faber {
        #[serde(default = "faber_default")]
        levels: u32,
    },
    /// `α_m = 2^{-m(1-q)} √((2^{2q} - 1) g(m))`, `0 < q < 1`.
    #[serde(rename = "prescribed-q")]
    PrescribedQ { q: f64, g: RegularlyVaryingFn },
    /// `α_m = 2^{-m} √(g'(m))`.
    #[serde(rename = "prescribed-q0")]
    PrescribedQ0 { g: RegularlyVaryingFn },
}

fn default_max_level() -> u32 {
    DEFAULT_MAX_LEVEL
}

/// A coefficient sequence together with its truncation cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScheme", into = "RawScheme")]
pub struct CoefficientScheme {
    kind: SchemeKind,
    max_level: u32,
}

#[derive(Serialize, Deserialize)]
struct RawScheme {
    #[serde(flatten)]
    kind: SchemeKind,
    #[serde(default = "default_max_level")]
    max_level: u32,
}

impl TryFrom<RawScheme> for CoefficientScheme {
    type Error = crate::Error;
    fn try_from(raw: RawScheme) -> Result<Self> {
        CoefficientScheme::new(raw.kind)?.with_max_level(raw.max_level)
    }
}

impl From<CoefficientScheme> for RawScheme {
    fn from(s: CoefficientScheme) -> Self {
        RawScheme { kind: s.kind, max_level: s.max_level }
    }
}

/// Asymptotic profile `s_n² ~ 2^{2qn} g(n)` of a scheme, when known.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticProfile {
    pub q: f64,
    pub g: RegularlyVaryingFn,
    /// `lim g(n)` when it exists in `[0, ∞]`.
    pub g_limit: Option<f64>,
    /// `lim s_n²` when finite (bounded-variation regime).
    pub s_squared_limit: Option<f64>,
}

impl CoefficientScheme {
    pub fn new(kind: SchemeKind) -> Result<Self> {
        let max_level = match &kind {
            SchemeKind::Explicit { alphas } => {
                if alphas.is_empty() || alphas.iter().any(|a| !a.is_finite()) {
                    return Err(invalid("explicit coefficients must be a nonempty list of finite numbers"));
                }
                alphas.len() as u32
            }
            SchemeKind::Geometric { a } => {
                if !(a.abs() < 1.0) {
                    return Err(invalid(format!("geometric scheme needs |a| < 1, got {a}")));
                }
                DEFAULT_MAX_LEVEL
            }
            SchemeKind::Takagi => DEFAULT_MAX_LEVEL,
            SchemeKind::Faber { levels } => {
                if *levels == 0 {
                    return Err(invalid("faber truncation must be positive"));
                }
                *levels
            }
            SchemeKind::PrescribedQ { q, .. } => {
                if !(*q > 0.0 && *q < 1.0) {
                    return Err(invalid(format!("prescribed-q needs 0 < q < 1, got {q}")));
                }
                DEFAULT_MAX_LEVEL
            }
            SchemeKind::PrescribedQ0 { g } => {
                if !g.has_derivative() {
                    return Err(invalid("prescribed-q0 needs a differentiable g"));
                }
                DEFAULT_MAX_LEVEL
            }
        };
        Ok(Self { kind, max_level })
    }

    pub fn takagi() -> Self {
        Self::new(SchemeKind::Takagi).expect("valid")
    }

    pub fn geometric(a: f64) -> Result<Self> {
        Self::new(SchemeKind::Geometric { a })
    }

    pub fn explicit(alphas: Vec<f64>) -> Result<Self> {
        Self::new(SchemeKind::Explicit { alphas })
    }

    pub fn faber() -> Self {
        Self::new(SchemeKind::Faber { levels: FABER_DEFAULT_LEVELS }).expect("valid")
    }

    pub fn prescribed_q(q: f64, g: RegularlyVaryingFn) -> Result<Self> {
        Self::new(SchemeKind::PrescribedQ { q, g })
    }

    pub fn prescribed_q0(g: RegularlyVaryingFn) -> Result<Self> {
        Self::new(SchemeKind::PrescribedQ0 { g })
    }

    pub fn with_max_level(mut self, max_level: u32) -> Result<Self> {
        if max_level == 0 {
            return Err(invalid("max level must be positive"));
        }
        self.max_level = max_level;
        Ok(self)
    }

    pub fn kind(&self) -> &SchemeKind {
        &self.kind
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match &self.kind {
            SchemeKind::Explicit { alphas } => format!("explicit{alphas:?}"),
            SchemeKind::Geometric { a } => format!("geometric(a={a})"),
            SchemeKind::Takagi => "takagi".into(),
            SchemeKind::Faber { levels } => format!("faber(levels={levels})"),
            SchemeKind::PrescribedQ { q, g } => format!("prescribed-q(q={q},g={g})"),
            SchemeKind::PrescribedQ0 { g } => format!("prescribed-q0(g={g})"),
        }
    }

    /// `α_m`.
    pub fn alpha(&self, m: u32) -> f64 {
        match &self.kind {
            SchemeKind::Explicit { alphas } => alphas.get(m as usize).copied().unwrap_or(0.0),
            SchemeKind::Geometric { a } => a.powi(m as i32),
            SchemeKind::Takagi => 2f64.powi(-(m as i32)),
            SchemeKind::Faber { levels } => match factorial_root(m) {
                Some(k) if m <= *levels => 10f64.powi(-(k as i32)),
                _ => 0.0,
            },
            SchemeKind::PrescribedQ { q, g } => {
                let ln = -(m as f64) * (1.0 - q) * LN_2 + 0.5 * ((2f64.powf(2.0 * q) - 1.0) * g.value(m as f64)).ln();
                ln.exp()
            }
            SchemeKind::PrescribedQ0 { g } => 2f64.powi(-(m as i32)) * g_prime_sqrt(g, m),
        }
    }

    /// `β_m = 2^m α_m`, evaluated without forming `α_m` where that would underflow.
    pub fn beta(&self, m: u32) -> f64 {
        match &self.kind {
            SchemeKind::Explicit { alphas } => alphas.get(m as usize).map(|a| a * 2f64.powi(m as i32)).unwrap_or(0.0),
            SchemeKind::Geometric { a } => (2.0 * a).powi(m as i32),
            SchemeKind::Takagi => 1.0,
            SchemeKind::Faber { levels } => match factorial_root(m) {
                Some(k) if m <= *levels => ((m as f64) * LN_2 - (k as f64) * LN_10).exp(),
                _ => 0.0,
            },
            SchemeKind::PrescribedQ { q, g } => {
                2f64.powf(q * m as f64) * ((2f64.powf(2.0 * q) - 1.0) * g.value(m as f64)).sqrt()
            }
            SchemeKind::PrescribedQ0 { g } => g_prime_sqrt(g, m),
        }
    }

    /// `ln |β_m|` (`-∞` when `β_m = 0`); finite even where `β_m` overflows.
    pub fn ln_abs_beta(&self, m: u32) -> f64 {
        match &self.kind {
            SchemeKind::Faber { levels } => match factorial_root(m) {
                Some(k) if m <= *levels => (m as f64) * LN_2 - (k as f64) * LN_10,
                _ => f64::NEG_INFINITY,
            },
            SchemeKind::Geometric { a } => (m as f64) * (2.0 * a.abs()).ln(),
            SchemeKind::PrescribedQ { q, g } => {
                q * (m as f64) * LN_2 + 0.5 * ((2f64.powf(2.0 * q) - 1.0) * g.value(m as f64)).ln()
            }
            _ => self.beta(m).abs().ln(),
        }
    }

    /// `β_0, …, β_{n-1}`.
    pub fn betas(&self, n: u32) -> Vec<f64> {
        (0..n).map(|m| self.beta(m)).collect()
    }

    /// `s_n² = Σ_{m<n} β_m²`, in closed form where one exists.
    pub fn s_squared(&self, n: u32) -> f64 {
        match &self.kind {
            SchemeKind::Takagi => n as f64,
            SchemeKind::Geometric { a } => {
                // Σ r^m with r = 4a², r - 1 = (2a - 1)(2a + 1)
                let r_minus_1 = (2.0 * a.abs() - 1.0) * (2.0 * a.abs() + 1.0);
                if r_minus_1 == 0.0 {
                    n as f64
                } else {
                    (n as f64 * r_minus_1.ln_1p()).exp_m1() / r_minus_1
                }
            }
            SchemeKind::PrescribedQ { q, g } => match g.constant_value() {
                Some(c) => c * (2.0 * q * n as f64 * LN_2).exp_m1(),
                None => self.s_squared_direct(n),
            },
            _ => self.s_squared_direct(n),
        }
    }

    fn s_squared_direct(&self, n: u32) -> f64 {
        (0..n).map(|m| self.beta(m).powi(2)).collect::<Accumulator>().value()
    }

    /// Cumulative `s_1², …, s_n²` by direct summation.
    pub fn s_squared_series(&self, n: u32) -> Vec<f64> {
        let mut acc = Accumulator::new();
        (0..n)
            .map(|m| {
                acc.add(self.beta(m).powi(2));
                acc.value()
            })
            .collect()
    }

    /// `ln s_n²`, robust to overflow of the individual `β_m²`.
    pub fn ln_s_squared(&self, n: u32) -> f64 {
        let direct = self.s_squared(n);
        if direct.is_finite() && direct > 0.0 {
            return direct.ln();
        }
        let logs: Vec<f64> = (0..n).map(|m| 2.0 * self.ln_abs_beta(m)).collect();
        log_sum_exp(&logs)
    }

    /// Upper bound on `(1/2) Σ_{m>M} |α_m|`, the uniform error of truncating
    /// the series after level `M` (since `0 ≤ φ ≤ 1/2`).
    pub fn tail_bound(&self, level: u32) -> f64 {
        match &self.kind {
            SchemeKind::Explicit { alphas } => {
                0.5 * alphas.iter().skip(level as usize + 1).map(|a| a.abs()).sum::<f64>()
            }
            SchemeKind::Geometric { a } => 0.5 * a.abs().powi(level as i32 + 1) / (1.0 - a.abs()),
            SchemeKind::Takagi => 0.5 * 2f64.powi(-(level as i32)),
            SchemeKind::Faber { levels } => {
                let mut total = 0.0;
                let (mut k, mut fact) = (1u32, 1u64);
                while fact <= *levels as u64 {
                    if fact > level as u64 {
                        total += 10f64.powi(-(k as i32));
                    }
                    k += 1;
                    fact *= k as u64;
                }
                0.5 * total
            }
            SchemeKind::PrescribedQ { .. } | SchemeKind::PrescribedQ0 { .. } => {
                0.5 * numeric_tail(|m| self.alpha(m).abs(), level + 1)
            }
        }
    }

    /// Smallest `M ≤ max_level` with `tail_bound(M) ≤ tolerance`.
    pub fn truncation_level(&self, tolerance: f64) -> Result<u32> {
        if !(tolerance > 0.0) {
            return Err(invalid(format!("tolerance must be positive, got {tolerance}")));
        }
        if self.tail_bound(self.max_level) > tolerance {
            return Err(crate::Error::ToleranceUnreachable { tolerance, max_level: self.max_level });
        }
        // tail_bound is nonincreasing in M
        let (mut lo, mut hi) = (0u32, self.max_level);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.tail_bound(mid) <= tolerance {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Ok(lo)
    }

    /// `Σ_{m≥d} |β_m|` when finite and known.
    pub fn beta_abs_tail(&self, d: u32) -> Option<f64> {
        match &self.kind {
            SchemeKind::Explicit { .. } => Some((d..self.max_level).map(|m| self.beta(m).abs()).sum()),
            SchemeKind::Geometric { a } if 2.0 * a.abs() < 1.0 => {
                let r = 2.0 * a.abs();
                Some(r.powi(d as i32) / (1.0 - r))
            }
            _ => None,
        }
    }

    /// Common value of `β_0, …, β_{n-1}` when they all agree.
    pub fn equal_beta_prefix(&self, n: u32) -> Option<f64> {
        let b0 = self.beta(0);
        match &self.kind {
            SchemeKind::Takagi => return Some(1.0),
            SchemeKind::Geometric { a } if 2.0 * a.abs() == 1.0 && *a > 0.0 => return Some(1.0),
            _ => {}
        }
        let tol = 4.0 * f64::EPSILON * b0.abs();
        (0..n).all(|m| (self.beta(m) - b0).abs() <= tol).then_some(b0)
    }

    /// `s_n² ~ 2^{2qn} g(n)` profile of the built-in kinds.
    pub fn asymptotic_profile(&self) -> Option<AsymptoticProfile> {
        let constant = |c: f64| RegularlyVaryingFn::constant(c).ok();
        match &self.kind {
            SchemeKind::Takagi => Some(AsymptoticProfile {
                q: 0.0,
                g: RegularlyVaryingFn::power(1.0).ok()?,
                g_limit: Some(f64::INFINITY),
                s_squared_limit: None,
            }),
            SchemeKind::Geometric { a } => {
                let two_a = 2.0 * a.abs();
                if two_a > 1.0 {
                    let c = 1.0 / (two_a * two_a - 1.0);
                    Some(AsymptoticProfile {
                        q: two_a.log2(),
                        g: constant(c)?,
                        g_limit: Some(c),
                        s_squared_limit: None,
                    })
                } else if two_a == 1.0 {
                    Some(AsymptoticProfile {
                        q: 0.0,
                        g: RegularlyVaryingFn::power(1.0).ok()?,
                        g_limit: Some(f64::INFINITY),
                        s_squared_limit: None,
                    })
                } else {
                    let c = 1.0 / (1.0 - two_a * two_a);
                    Some(AsymptoticProfile { q: 0.0, g: constant(c)?, g_limit: Some(c), s_squared_limit: Some(c) })
                }
            }
            SchemeKind::Explicit { .. } => {
                let c = self.s_squared(self.max_level);
                Some(AsymptoticProfile { q: 0.0, g: constant(c)?, g_limit: Some(c), s_squared_limit: Some(c) })
            }
            SchemeKind::PrescribedQ { q, g } => {
                Some(AsymptoticProfile { q: *q, g: g.clone(), g_limit: g_limit(g), s_squared_limit: None })
            }
            SchemeKind::PrescribedQ0 { g } => {
                Some(AsymptoticProfile { q: 0.0, g: g.clone(), g_limit: g_limit(g), s_squared_limit: None })
            }
            SchemeKind::Faber { .. } => None,
        }
    }
}

fn g_limit(g: &RegularlyVaryingFn) -> Option<f64> {
    let rho = g.index();
    if rho > 0.0 {
        Some(f64::INFINITY)
    } else if rho < 0.0 {
        Some(0.0)
    } else {
        g.constant_value()
    }
}

fn g_prime_sqrt(g: &RegularlyVaryingFn, m: u32) -> f64 {
    g.derivative(m as f64).map(|d| d.max(0.0).sqrt()).unwrap_or(0.0)
}

/// `k` with `k! = m`, for `k ≥ 1`.
fn factorial_root(m: u32) -> Option<u32> {
    let (mut k, mut fact) = (1u32, 1u64);
    while fact < m as u64 {
        k += 1;
        fact *= k as u64;
    }
    (fact == m as u64).then_some(k)
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// `Σ_{m≥start} term(m)` for an eventually geometrically decaying sequence:
/// terms are summed until negligible, and the remainder is bounded by a
/// geometric series at the largest ratio seen over the final window.
fn numeric_tail(term: impl Fn(u32) -> f64, start: u32) -> f64 {
    const WINDOW: u32 = 32;
    let mut acc = Accumulator::new();
    let mut m = start;
    let mut prev = term(m);
    acc.add(prev);
    let mut ratios = std::collections::VecDeque::with_capacity(WINDOW as usize);
    loop {
        m += 1;
        let t = term(m);
        acc.add(t);
        if prev > 0.0 {
            ratios.push_back(t / prev);
            if ratios.len() > WINDOW as usize {
                ratios.pop_front();
            }
        }
        prev = t;
        let settled = ratios.len() == WINDOW as usize;
        if t == 0.0 && m - start > 4 * WINDOW {
            return acc.value();
        }
        if settled && t <= 1e-17 * acc.value() {
            let r = ratios.iter().copied().fold(0.0, f64::max);
            if r < 1.0 {
                return acc.value() + t * r / (1.0 - r);
            }
        }
        if m - start > 1_000_000 {
            return f64::INFINITY;
        }
    }
}

/// Output of [`critical_exponents`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponents {
    /// `min q_n` over the range, estimate of `q_*`.
    pub q_lower: f64,
    /// `max q_n` over the range, estimate of `q^*`.
    pub q_upper: f64,
    /// `q_n` at the last level of the range.
    pub q_last: f64,
    /// `1/(1 - q_last)`, absent when `q_last ≥ 1`.
    pub p_critical: Option<f64>,
    /// `(n, q_n)` for every level where `s_n > 0`.
    pub q_series: Vec<(u32, f64)>,
}

impl CriticalExponents {
    /// `liminf V_n^{(p)} = 0` is expected when `p(1 - q_*) > 1`.
    pub fn expects_vanishing_liminf(&self, p: f64) -> bool {
        p * (1.0 - self.q_lower) > 1.0
    }

    /// `limsup V_n^{(p)} = ∞` is expected when `p(1 - q^*) < 1`.
    pub fn expects_diverging_limsup(&self, p: f64) -> bool {
        p * (1.0 - self.q_upper) < 1.0
    }
}

/// Growth exponents `q_n = (1/n) log₂ s_n` over a range of levels.
pub fn critical_exponents(scheme: &CoefficientScheme, levels: RangeInclusive<u32>) -> Result<CriticalExponents> {
    let (lo, hi) = (*levels.start(), *levels.end());
    if lo == 0 || lo > hi {
        return Err(invalid(format!("level range {lo}..={hi} must be nonempty and start at 1 or above")));
    }
    let logs: Vec<f64> = (0..hi).map(|m| 2.0 * scheme.ln_abs_beta(m)).collect();
    let mut q_series = Vec::new();
    let mut running = f64::NEG_INFINITY;
    for n in 1..=hi {
        // ln s_n² updated incrementally in log space
        let l = logs[(n - 1) as usize];
        running = log_sum_exp(&[running, l]);
        if n >= lo && running.is_finite() {
            q_series.push((n, running / (2.0 * n as f64 * LN_2)));
        }
    }
    if q_series.is_empty() {
        return Err(invalid("s_n vanishes on the whole range"));
    }
    let q_lower = q_series.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let q_upper = q_series.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let q_last = q_series.last().expect("nonempty").1;
    Ok(CriticalExponents {
        q_lower,
        q_upper,
        q_last,
        p_critical: (q_last < 1.0).then(|| 1.0 / (1.0 - q_last)),
        q_series,
    })
}

/// Slowly varying input to [`check_conditions`].
#[derive(Debug, Clone, PartialEq)]
pub enum SlowlyVarying {
    /// `L`, from which `ℓ` is integrated.
    L(RegularlyVaryingFn),
    /// `ℓ` given directly; condition (i) is then unavailable.
    Ell(RegularlyVaryingFn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConvergesToTarget,
    Inconclusive,
}

/// Number of trailing ratios inspected by the convergence verdict.
pub const VERDICT_WINDOW: usize = 10;
/// Relative tolerance of the convergence verdict.
pub const VERDICT_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSeries {
    pub target: f64,
    pub ratios: Vec<(u32, f64)>,
    pub verdict: Verdict,
}

impl ConditionSeries {
    fn new(target: f64, ratios: Vec<(u32, f64)>) -> Self {
        let verdict = if target.is_finite()
            && ratios.len() >= VERDICT_WINDOW
            && ratios[ratios.len() - VERDICT_WINDOW..]
                .iter()
                .all(|&(_, r)| ((r - target) / target).abs() <= VERDICT_TOLERANCE)
        {
            Verdict::ConvergesToTarget
        } else {
            Verdict::Inconclusive
        };
        Self { target, ratios, verdict }
    }
}

/// Tabulated asymptotic conditions:
/// (i) `β_n²/L(b^n) → 1`, (ii) `s_n²/ℓ(b^n) → 1`,
/// (iii) `β_n²/(2^{2qn}ℓ(b^n)) → 1`, (iv) `s_n²/(2^{2qn}ℓ(b^n)) → (2^{2q}-1)^{-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub b: f64,
    pub q: f64,
    pub beta_over_l: ConditionSeries,
    pub s_over_ell: ConditionSeries,
    pub beta_over_scaled_ell: ConditionSeries,
    pub s_over_scaled_ell: ConditionSeries,
    /// Last observed `s_{n-1}²/s_n²`.
    pub ratio_limit_estimate: f64,
    /// `2^{-2q}`, the limit of `s_{n-1}²/s_n²` under any of the conditions.
    pub ratio_limit_target: f64,
}

impl ConditionReport {
    pub fn verdicts(&self) -> [Verdict; 4] {
        [
            self.beta_over_l.verdict,
            self.s_over_ell.verdict,
            self.beta_over_scaled_ell.verdict,
            self.s_over_scaled_ell.verdict,
        ]
    }
}

/// Tabulate the four conditions over `levels`.
pub fn check_conditions(
    scheme: &CoefficientScheme,
    q: f64,
    slow: &SlowlyVarying,
    b: f64,
    levels: RangeInclusive<u32>,
) -> Result<ConditionReport> {
    if !(b.is_finite() && b > 1.0) {
        return Err(invalid(format!("base b must exceed 1, got {b}")));
    }
    if !(q.is_finite() && q >= 0.0) {
        return Err(invalid(format!("q must be nonnegative, got {q}")));
    }
    let (lo, hi) = (*levels.start(), *levels.end());
    if lo == 0 || lo > hi {
        return Err(invalid(format!("level range {lo}..={hi} must be nonempty and start at 1 or above")));
    }
    let (l_fn, ell) = match slow {
        SlowlyVarying::L(l) => (Some(l), l.integrated(b)?),
        SlowlyVarying::Ell(e) => (None, e.clone()),
    };
    let ln_b = b.ln();
    let mut i_ratios = Vec::new();
    let mut ii_ratios = Vec::new();
    let mut iii_ratios = Vec::new();
    let mut iv_ratios = Vec::new();
    let mut ratio_limit_estimate = f64::NAN;
    let mut prev_ln_s = f64::NAN;
    for n in 1..=hi {
        let ln_s = scheme.ln_s_squared(n);
        let ln_beta2 = 2.0 * scheme.ln_abs_beta(n);
        if n >= 2 && ln_s.is_finite() && prev_ln_s.is_finite() {
            ratio_limit_estimate = (prev_ln_s - ln_s).exp();
        }
        prev_ln_s = ln_s;
        if n < lo {
            continue;
        }
        let x = (n as f64 * ln_b).exp();
        if !x.is_finite() {
            continue;
        }
        let ln_ell = ell.value(x).ln();
        let scale = 2.0 * q * n as f64 * LN_2;
        let push = |v: &mut Vec<(u32, f64)>, ln_ratio: f64| {
            let r = ln_ratio.exp();
            if r.is_finite() && r > 0.0 {
                v.push((n, r));
            }
        };
        if let Some(l) = l_fn {
            push(&mut i_ratios, ln_beta2 - l.value(x).ln());
        }
        push(&mut ii_ratios, ln_s - ln_ell);
        push(&mut iii_ratios, ln_beta2 - scale - ln_ell);
        push(&mut iv_ratios, ln_s - scale - ln_ell);
    }
    let iv_target = if q > 0.0 { 1.0 / (2f64.powf(2.0 * q) - 1.0) } else { f64::INFINITY };
    Ok(ConditionReport {
        b,
        q,
        beta_over_l: ConditionSeries::new(1.0, i_ratios),
        s_over_ell: ConditionSeries::new(1.0, ii_ratios),
        beta_over_scaled_ell: ConditionSeries::new(1.0, iii_ratios),
        s_over_scaled_ell: ConditionSeries::new(iv_target, iv_ratios),
        ratio_limit_estimate,
        ratio_limit_target: 2f64.powf(-2.0 * q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(s: &str) -> RegularlyVaryingFn {
        s.parse().unwrap()
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(CoefficientScheme::takagi().alpha(3), 0.125);
        let pq = CoefficientScheme::prescribed_q(0.5, g("const:1")).unwrap();
        assert!((pq.alpha(2) - 0.5).abs() < 1e-15);
        let ex = CoefficientScheme::explicit(vec![0.3]).unwrap();
        assert_eq!(ex.alpha(1), 0.0);
    }

    #[test]
    fn faber_coefficients_sit_on_factorials() {
        let f = CoefficientScheme::faber();
        assert_eq!(f.alpha(0), 0.0);
        assert_eq!(f.alpha(1), 0.1);
        assert_eq!(f.alpha(2), 0.01);
        assert_eq!(f.alpha(3), 0.0);
        assert!((f.alpha(6) - 1e-3).abs() < 1e-18);
        assert!((f.alpha(720) - 1e-6).abs() < 1e-21);
        assert_eq!(f.alpha(5040), 0.0);
        assert_eq!(f.max_level(), 720);
    }

    #[test]
    fn s_squared_examples() {
        assert_eq!(CoefficientScheme::takagi().s_squared(4), 4.0);
        let geo = CoefficientScheme::geometric(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert!((geo.s_squared(10) - 1023.0).abs() < 1e-9);
        let c = 0.75;
        let ex = CoefficientScheme::explicit(vec![c]).unwrap();
        assert_eq!(ex.s_squared(7), c * c);
    }

    #[test]
    fn beta_is_two_to_the_m_alpha() {
        for scheme in [
            CoefficientScheme::takagi(),
            CoefficientScheme::geometric(-0.6).unwrap(),
            CoefficientScheme::faber(),
            CoefficientScheme::prescribed_q(0.7, g("spow:2")).unwrap(),
            CoefficientScheme::prescribed_q0(g("pow:2")).unwrap(),
            CoefficientScheme::explicit(vec![1.0, -0.5, 0.25]).unwrap(),
        ] {
            for m in 0..40 {
                let lhs = scheme.beta(m);
                let rhs = 2f64.powi(m as i32) * scheme.alpha(m);
                assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(1e-300), "{} m={m}", scheme.label());
            }
        }
    }

    #[test]
    fn s_squared_increments_are_beta_squared() {
        for scheme in [
            CoefficientScheme::takagi(),
            CoefficientScheme::geometric(0.3).unwrap(),
            CoefficientScheme::geometric(0.9).unwrap(),
            CoefficientScheme::prescribed_q(0.5, g("const:2")).unwrap(),
            CoefficientScheme::prescribed_q(0.3, g("logpow:1")).unwrap(),
            CoefficientScheme::explicit(vec![1.0, 0.25, -0.1]).unwrap(),
        ] {
            for n in 2..80 {
                let d = scheme.s_squared(n) - scheme.s_squared(n - 1);
                let b2 = scheme.beta(n - 1).powi(2);
                assert!((d - b2).abs() <= 1e-12 * scheme.s_squared(n), "{} n={n}", scheme.label());
            }
        }
    }

    #[test]
    fn prescribed_constant_g_scales_exactly() {
        for c in [0.5, 1.0, 3.0] {
            let s = CoefficientScheme::prescribed_q(0.4, RegularlyVaryingFn::constant(c).unwrap()).unwrap();
            let n = 50;
            let ratio = s.s_squared(n) / (2f64.powf(2.0 * 0.4 * n as f64) * c);
            assert!((ratio - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tail_bound_examples() {
        assert_eq!(CoefficientScheme::takagi().tail_bound(10), 2f64.powi(-11));
        assert_eq!(CoefficientScheme::explicit(vec![0.4]).unwrap().tail_bound(0), 0.0);
        let geo = CoefficientScheme::geometric(0.5).unwrap();
        assert!((geo.tail_bound(20) - 0.5 * 2f64.powi(-20)).abs() < 1e-22);
    }

    #[test]
    fn numeric_tail_dominates_partial_sums() {
        let s = CoefficientScheme::prescribed_q(0.7, g("spow:2")).unwrap();
        for level in [0, 5, 50, 200] {
            let bound = s.tail_bound(level);
            let partial: f64 = (level + 1..level + 3000).map(|m| 0.5 * s.alpha(m).abs()).sum();
            assert!(bound >= partial * (1.0 - 1e-12), "level {level}: {bound} < {partial}");
            assert!(bound <= partial * (1.0 + 1e-9) + 1e-300);
        }
    }

    #[test]
    fn truncation_level_is_minimal() {
        let t = CoefficientScheme::takagi();
        let m = t.truncation_level(1e-12).unwrap();
        assert!(t.tail_bound(m) <= 1e-12);
        assert!(t.tail_bound(m - 1) > 1e-12);
        let capped = CoefficientScheme::takagi().with_max_level(10).unwrap();
        assert!(matches!(capped.truncation_level(1e-12), Err(crate::Error::ToleranceUnreachable { .. })));
    }

    #[test]
    fn equal_prefix_detection() {
        assert_eq!(CoefficientScheme::takagi().equal_beta_prefix(1000), Some(1.0));
        assert_eq!(CoefficientScheme::geometric(0.5).unwrap().equal_beta_prefix(64), Some(1.0));
        assert_eq!(CoefficientScheme::geometric(0.6).unwrap().equal_beta_prefix(3), None);
        assert_eq!(CoefficientScheme::explicit(vec![2.0]).unwrap().equal_beta_prefix(1), Some(2.0));
    }

    #[test]
    fn critical_exponents_takagi_and_geometric() {
        let t = critical_exponents(&CoefficientScheme::takagi(), 1..=1024).unwrap();
        assert!(t.q_last.abs() < 0.01);
        assert!((t.p_critical.unwrap() - 1.0).abs() < 0.01);
        let geo = CoefficientScheme::geometric(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let g = critical_exponents(&geo, 1..=100).unwrap();
        assert!((g.q_last - 0.5).abs() < 1e-3);
        assert!((g.p_critical.unwrap() - 2.0).abs() < 1e-2);
        assert!(g.expects_vanishing_liminf(3.0));
        assert!(g.expects_diverging_limsup(1.5));
    }

    #[test]
    fn critical_exponents_faber_oscillate() {
        let f = critical_exponents(&CoefficientScheme::faber(), 2..=720).unwrap();
        assert!(f.q_lower <= 0.0);
        // peaks right after each factorial level climb toward 1
        let peak = |n: u32| f.q_series.iter().find(|p| p.0 == n).unwrap().1;
        assert!(peak(7) < peak(25) && peak(25) < peak(121));
        assert!(peak(121) > 0.85);
        let full = critical_exponents(&CoefficientScheme::faber(), 2..=721).unwrap();
        assert!(full.q_upper > 0.97);
        for p in [1.0, 2.0, 5.0] {
            assert!(f.expects_vanishing_liminf(p));
        }
    }

    #[test]
    fn critical_exponents_reject_bad_range() {
        assert!(critical_exponents(&CoefficientScheme::takagi(), 0..=5).is_err());
    }

    #[test]
    fn conditions_takagi_q0() {
        let r =
            check_conditions(&CoefficientScheme::takagi(), 0.0, &SlowlyVarying::L(g("const:1")), 2.0, 1..=60).unwrap();
        assert_eq!(r.beta_over_l.verdict, Verdict::ConvergesToTarget);
        assert_eq!(r.s_over_ell.verdict, Verdict::ConvergesToTarget);
        for &(_, v) in &r.s_over_ell.ratios {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(r.s_over_scaled_ell.verdict, Verdict::Inconclusive);
        assert!((r.ratio_limit_estimate - 59.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    #[allow(clippy::approx_constant)] // a rounded to eight digits on purpose
    fn conditions_geometric_q_half() {
        let geo = CoefficientScheme::geometric(0.707_106_78).unwrap();
        let r = check_conditions(&geo, 0.5, &SlowlyVarying::Ell(g("const:1")), 2.0, 1..=60).unwrap();
        assert_eq!(r.s_over_scaled_ell.verdict, Verdict::ConvergesToTarget);
        assert_eq!(r.beta_over_scaled_ell.verdict, Verdict::ConvergesToTarget);
        assert_eq!(r.beta_over_l.verdict, Verdict::Inconclusive);
        assert!(r.beta_over_l.ratios.is_empty());
        assert!((r.ratio_limit_estimate - 0.5).abs() < 1e-6);
        assert_eq!(r.ratio_limit_target, 0.5);
    }

    #[test]
    fn conditions_reject_bad_base() {
        let t = CoefficientScheme::takagi();
        assert!(check_conditions(&t, 0.0, &SlowlyVarying::L(g("const:1")), 1.0, 1..=5).is_err());
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn scheme_json_shapes() {
        let s: CoefficientScheme = serde_json::from_str(r#"{"kind":"takagi"}"#).unwrap();
        assert_eq!(s, CoefficientScheme::takagi());
        let s: CoefficientScheme = serde_json::from_str(r#"{"kind":"geometric","a":0.70710678}"#).unwrap();
        assert_eq!(s.kind(), &SchemeKind::Geometric { a: 0.70710678 });
        let s: CoefficientScheme = serde_json::from_str(r#"{"kind":"prescribed-q","q":0.7,"g":"spow:2"}"#).unwrap();
        assert_eq!(s, CoefficientScheme::prescribed_q(0.7, g("spow:2")).unwrap());
        let s: CoefficientScheme = serde_json::from_str(r#"{"kind":"explicit","alphas":[1,0.25]}"#).unwrap();
        assert_eq!(s.beta(1), 0.5);
        assert!(serde_json::from_str::<CoefficientScheme>(r#"{"kind":"geometric","a":1.5}"#).is_err());
        let back = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<CoefficientScheme>(&back).unwrap(), s);
    }
}
