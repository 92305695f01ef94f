//! Limit objects: the scaled Bernoulli convolution
//! `Z = λ Σ_{m≥1} 2^{-qm} Y_m` with `λ = √(2^{2q} - 1)`, its absolute
//! moments, the coupled distance between `Z_n/s_n` and `Z`, the
//! Wasserstein-1 distance of `Z_n/s_n` to the standard normal when `q = 0`,
//! and the total variation `E|Z̃|`, `Z̃ = Σ β_m Y_{m+1}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{wasserstein1_to_normal, Accumulator};
use crate::scheme::CoefficientScheme;

/// Truncation error targeted by [`sample_z`].
pub const SAMPLE_TRUNCATION: f64 = 1e-9;

/// Largest depth accepted anywhere.
pub const MAX_DEPTH: u32 = 4096;

/// Largest depth for exhaustive sign enumeration.
pub const MAX_ENUM_DEPTH: u32 = 25;

/// Confidence multiplier on the Monte Carlo standard error.
pub const MC_SIGMAS: f64 = 4.0;

const CHUNK: u64 = 1 << 16;

/// `Z` truncated after `depth` terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionSpec {
    pub q: f64,
    pub depth: u32,
}

impl ConvolutionSpec {
    pub fn new(q: f64, depth: u32) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(invalid(format!("q must be positive, got {q}")));
        }
        if depth == 0 || depth > MAX_DEPTH {
            return Err(invalid(format!("depth must lie in 1..={MAX_DEPTH}, got {depth}")));
        }
        Ok(Self { q, depth })
    }

    /// Smallest depth whose truncation error is at most `tolerance`.
    pub fn for_tolerance(q: f64, tolerance: f64) -> Result<Self> {
        let probe = Self::new(q, 1)?;
        let ratio = (probe.lambda() / (2f64.powf(q) - 1.0) / tolerance).log2() / q;
        let mut depth = ratio.ceil().max(1.0) as u32;
        // guard against rounding in the closed form
        while Self::new(q, depth)?.truncation_error() > tolerance {
            depth += 1;
        }
        while depth > 1 && Self::new(q, depth - 1)?.truncation_error() <= tolerance {
            depth -= 1;
        }
        Self::new(q, depth)
    }

    /// `λ = √(2^{2q} - 1)`.
    pub fn lambda(&self) -> f64 {
        (2f64.powf(2.0 * self.q) - 1.0).sqrt()
    }

    /// `λ Σ_{m>D} 2^{-qm} = λ 2^{-qD}/(2^q - 1)`, a bound on `|Z - Z_D|`.
    pub fn truncation_error(&self) -> f64 {
        self.lambda() * 2f64.powf(-self.q * self.depth as f64) / (2f64.powf(self.q) - 1.0)
    }

    /// `λ 2^{-qm}` for `m = 1..=D`.
    pub fn weights(&self) -> Vec<f64> {
        let l = self.lambda();
        (1..=self.depth).map(|m| l * 2f64.powf(-self.q * m as f64)).collect()
    }
}

/// Seeded draws of a truncated `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZSamples {
    pub values: Vec<f64>,
    /// Depth actually used.
    pub depth: u32,
    pub truncation_error: f64,
}

/// Draw `samples` values of `Z_D`. The requested depth is raised to the
/// smallest depth with truncation error at most [`SAMPLE_TRUNCATION`].
pub fn sample_z(q: f64, depth: u32, samples: usize, seed: u64) -> Result<ZSamples> {
    let requested = ConvolutionSpec::new(q, depth)?;
    let needed = ConvolutionSpec::for_tolerance(q, SAMPLE_TRUNCATION)?;
    let spec = if requested.depth >= needed.depth { requested } else { needed };
    let weights = spec.weights();
    let values = signed_sums(&weights, samples as u64, seed);
    Ok(ZSamples { values, depth: spec.depth, truncation_error: spec.truncation_error() })
}

/// `Σ_m w_m Y_m` for i.i.d. signs, chunked over independent ChaCha streams.
fn signed_sums(weights: &[f64], samples: u64, seed: u64) -> Vec<f64> {
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len).map(|_| signed_sum(weights, &mut rng)).collect()
        })
        .collect();
    parts.concat()
}

#[inline]
fn signed_sum(weights: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let mut total = 0.0;
    // small terms first
    for block in weights.rchunks(64) {
        let bits = rng.next_u64();
        for (i, w) in block.iter().enumerate().rev() {
            total += if (bits >> i) & 1 == 0 { *w } else { -*w };
        }
    }
    total
}

/// A bracketed estimate, serialized as one JSON record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub quantity: String,
    pub method: String,
    pub value: f64,
    /// Lower end of the reported interval.
    pub error_low: f64,
    /// Upper end of the reported interval.
    pub error_high: f64,
    pub seed: Option<u64>,
    pub depth: u32,
    /// Monte Carlo standard error, when sampled.
    pub stderr: Option<f64>,
}

impl Estimate {
    pub fn width(&self) -> f64 {
        self.error_high - self.error_low
    }

    pub fn contains(&self, x: f64) -> bool {
        self.error_low <= x && x <= self.error_high
    }

    pub fn overlaps(&self, other: &Estimate) -> bool {
        self.error_low <= other.error_high && other.error_low <= self.error_high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MomentMethod {
    #[serde(rename = "mc")]
    MonteCarlo {
        samples: u64,
        seed: u64,
    },
    ExactEnum {
        depth: u32,
    },
}

/// Bracket of `E|X + T|^r` where `X = Σ_{m<d} w_m Y_m` is enumerated
/// exhaustively and `T` is symmetric, independent of `X`, with `|T| ≤ τ`.
///
/// For fixed `x`, `u ↦ |x+u|^r` is convex, so averaging over `±u`
/// gives `|x|^r ≤ E|x+T|^r ≤ (|x-τ|^r + |x+τ|^r)/2`.
pub fn bracket_abs_moment(weights: &[f64], tau: f64, r: f64) -> (f64, f64) {
    let d = weights.len();
    if d == 0 {
        return (0.0, tau.powf(r));
    }
    // Y_1 = +1 suffices by symmetry; split the rest in two halves
    let first = weights[0];
    let rest = &weights[1..];
    let h = rest.len() / 2;
    let left = subset_sums(&rest[..h], first);
    let right = subset_sums(&rest[h..], 0.0);
    let pw = |x: f64| {
        if r == 1.0 {
            x.abs()
        } else if r == 2.0 {
            x * x
        } else {
            x.abs().powf(r)
        }
    };
    let parts: Vec<(Accumulator, Accumulator)> = left
        .par_chunks(256)
        .map(|chunk| {
            let (mut lo, mut hi) = (Accumulator::new(), Accumulator::new());
            for &a in chunk {
                for &b in &right {
                    let z = a + b;
                    lo.add(pw(z));
                    hi.add(0.5 * (pw(z - tau) + pw(z + tau)));
                }
            }
            (lo, hi)
        })
        .collect();
    let (mut lo, mut hi) = (Accumulator::new(), Accumulator::new());
    for (a, b) in &parts {
        lo.merge(a);
        hi.merge(b);
    }
    let count = (left.len() * right.len()) as f64;
    (lo.value() / count, hi.value() / count)
}

/// All `offset + Σ ±w_i`, in binary-counter order.
fn subset_sums(weights: &[f64], offset: f64) -> Vec<f64> {
    let mut out = vec![offset];
    for &w in weights {
        let mut next = Vec::with_capacity(out.len() * 2);
        for &s in &out {
            next.push(s + w);
            next.push(s - w);
        }
        out = next;
    }
    out
}

fn mc_abs_moment(values: &[f64], r: f64) -> (f64, f64) {
    let (mut s1, mut s2) = (Accumulator::new(), Accumulator::new());
    for &z in values {
        let v = z.abs().powf(r);
        s1.add(v);
        s2.add(v * v);
    }
    let n = values.len() as f64;
    let mean = s1.value() / n;
    let var = ((s2.value() - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// `E|Z|^r` for `r ≥ 1`.
///
/// Exact enumeration returns the convexity bracket above for `Z_d` with the
/// remaining tail; Monte Carlo returns the mean `± 4·stderr`, widened by the
/// truncation effect `r M^{r-1} τ` with `M = λ/(2^q - 1)`.
pub fn moment_z(q: f64, r: f64, method: MomentMethod) -> Result<Estimate> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(invalid(format!("moment order must be at least 1, got {r}")));
    }
    let quantity = format!("E|Z|^{r} (q={q})");
    match method {
        MomentMethod::ExactEnum { depth } => {
            if depth > MAX_ENUM_DEPTH {
                return Err(Error::LevelCap { requested: depth, cap: MAX_ENUM_DEPTH });
            }
            let spec = ConvolutionSpec::new(q, depth)?;
            let (lo, hi) = bracket_abs_moment(&spec.weights(), spec.truncation_error(), r);
            Ok(Estimate {
                quantity,
                method: "exact-enum".into(),
                value: 0.5 * (lo + hi),
                error_low: lo,
                error_high: hi,
                seed: None,
                depth,
                stderr: None,
            })
        }
        MomentMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(invalid("Monte Carlo needs at least 2 samples"));
            }
            let draws = sample_z(q, 1, samples as usize, seed)?;
            let (mean, se) = mc_abs_moment(&draws.values, r);
            let spec = ConvolutionSpec::new(q, 1)?;
            let bound = spec.lambda() / (2f64.powf(q) - 1.0);
            let trunc = r * bound.powf(r - 1.0) * draws.truncation_error;
            Ok(Estimate {
                quantity,
                method: "mc".into(),
                value: mean,
                error_low: mean - MC_SIGMAS * se - trunc,
                error_high: mean + MC_SIGMAS * se + trunc,
                seed: Some(seed),
                depth: draws.depth,
                stderr: Some(se),
            })
        }
    }
}

/// Distance between `Z_n/s_n` and `Z` under the shared-sign coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub n: u32,
    pub q: f64,
    /// `‖Z_n/s_n - Z‖_2`, exact in coefficient space.
    pub exact_l2: f64,
    /// Optional sampled `‖·‖_p` cross-check as `(p, samples, estimate)`.
    pub sampled: Option<(f64, u64, f64)>,
}

/// Coupled `L²` distance
/// `Σ_{m=1}^n (β_{n-m}/s_n - λ2^{-qm})² + λ²Σ_{m>n} 2^{-2qm}`; the tail sum
/// equals `2^{-2qn}`.
pub fn coupling_distance(scheme: &CoefficientScheme, q: f64, n: u32) -> Result<CouplingReport> {
    let (a, l) = coupled_coefficients(scheme, q, n)?;
    let mut acc: Accumulator = a.iter().zip(&l).map(|(x, y)| (x - y) * (x - y)).collect();
    acc.add(2f64.powf(-2.0 * q * n as f64));
    Ok(CouplingReport { n, q, exact_l2: acc.value().sqrt(), sampled: None })
}

/// `(β_{n-m}/s_n, λ2^{-qm})` for `m = 1..=n`.
fn coupled_coefficients(scheme: &CoefficientScheme, q: f64, n: u32) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(invalid("level n must be at least 1"));
    }
    let spec = ConvolutionSpec::new(q, n.min(MAX_DEPTH))?;
    let betas = scheme.betas(n);
    if let Some((m, b)) = betas.iter().enumerate().find(|(_, b)| **b < 0.0) {
        return Err(Error::NegativeCoefficient { index: m as u32, value: *b });
    }
    let s = scheme.s_squared(n).sqrt();
    if !(s > 0.0) {
        return Err(invalid("s_n vanishes"));
    }
    let a = (1..=n).map(|m| betas[(n - m) as usize] / s).collect();
    Ok((a, spec.weights()))
}

/// Add a sampled `‖Z_n/s_n - Z‖_p` to a coupling report. The limit is
/// truncated where its remainder falls below [`SAMPLE_TRUNCATION`].
pub fn coupling_sampled(
    scheme: &CoefficientScheme,
    q: f64,
    n: u32,
    p: f64,
    samples: u64,
    seed: u64,
) -> Result<CouplingReport> {
    let mut report = coupling_distance(scheme, q, n)?;
    let (a, _) = coupled_coefficients(scheme, q, n)?;
    let depth = ConvolutionSpec::for_tolerance(q, SAMPLE_TRUNCATION)?.depth.max(n);
    let l = ConvolutionSpec::new(q, depth)?.weights();
    // shared signs: weight on Y_m is a_m - λ2^{-qm} for m ≤ n and -λ2^{-qm} beyond
    let diff: Vec<f64> = (0..depth as usize).map(|i| a.get(i).copied().unwrap_or(0.0) - l[i]).collect();
    let draws = signed_sums(&diff, samples, seed);
    let (mean, _) = mc_abs_moment(&draws, p);
    report.sampled = Some((p, samples, mean.powf(1.0 / p)));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n: u32,
    pub w1: f64,
    pub method: String,
}

/// Largest `n` for which a non-binomial law is enumerated exactly.
pub const CLT_ENUM_MAX: u32 = 20;

/// Wasserstein-1 distance between the law of `Z_n/s_n` and `N(0,1)`.
///
/// With equal `β` the law is `(n - 2J)/√n`, `J ~ Binomial(n, 1/2)`; for
/// `n ≤ 20` it is enumerated; otherwise the empirical law of
/// `fallback = (samples, seed)` draws is used.
pub fn clt_distance(scheme: &CoefficientScheme, n: u32, fallback: (u64, u64)) -> Result<CltReport> {
    if n == 0 {
        return Err(invalid("level n must be at least 1"));
    }
    let s = scheme.s_squared(n).sqrt();
    if !(s > 0.0) {
        return Err(invalid("s_n vanishes"));
    }
    if scheme.equal_beta_prefix(n).is_some() {
        let nf = n as f64;
        let sqrt_n = nf.sqrt();
        let lg = libm::lgamma(nf + 1.0);
        let mut atoms: Vec<(f64, f64)> = (0..=n)
            .map(|j| {
                let ln_w =
                    lg - libm::lgamma(j as f64 + 1.0) - libm::lgamma(nf - j as f64 + 1.0) - nf * std::f64::consts::LN_2;
                ((nf - 2.0 * j as f64) / sqrt_n, ln_w.exp())
            })
            .collect();
        return Ok(CltReport { n, w1: wasserstein1_to_normal(&mut atoms), method: "binomial".into() });
    }
    let weights: Vec<f64> = scheme.betas(n).iter().rev().map(|b| b / s).collect();
    if n <= CLT_ENUM_MAX {
        let sums = subset_sums(&weights, 0.0);
        let mass = 1.0 / sums.len() as f64;
        let mut atoms: Vec<(f64, f64)> = sums.into_iter().map(|z| (z, mass)).collect();
        return Ok(CltReport { n, w1: wasserstein1_to_normal(&mut atoms), method: "exact-enum".into() });
    }
    let (samples, seed) = fallback;
    if samples < 2 {
        return Err(invalid("Monte Carlo needs at least 2 samples"));
    }
    let mass = 1.0 / samples as f64;
    let mut atoms: Vec<(f64, f64)> = signed_sums(&weights, samples, seed).into_iter().map(|z| (z, mass)).collect();
    Ok(CltReport { n, w1: wasserstein1_to_normal(&mut atoms), method: format!("mc(samples={samples},seed={seed})") })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum TvMethod {
    ExactEnum {
        depth: u32,
    },
    #[serde(rename = "mc")]
    MonteCarlo {
        samples: u64,
        seed: u64,
    },
}

pub const TV_DEFAULT_METHOD: TvMethod = TvMethod::ExactEnum { depth: 20 };

/// Threshold on `β_M²` at the scheme's max level below which `s_n²` is
/// treated as convergent.
pub const TV_CONVERGENCE_THRESHOLD: f64 = 1e-15;

/// Total variation `E|Z̃|`, `Z̃ = Σ_m β_m Y_{m+1}`, for schemes with
/// `lim s_n² < ∞`.
pub fn total_variation_expectation(scheme: &CoefficientScheme, method: TvMethod) -> Result<Estimate> {
    let last = scheme.beta(scheme.max_level().saturating_sub(1));
    let known_tail = scheme.beta_abs_tail(0).is_some_and(|t| t.is_finite());
    if !known_tail {
        if last * last >= TV_CONVERGENCE_THRESHOLD {
            return Err(Error::InfiniteVariation);
        }
        return Err(invalid("no tail bound on Σ|β_m| is available for this scheme"));
    }
    let quantity = "E|Z~|".to_string();
    match method {
        TvMethod::ExactEnum { depth } => {
            if depth > MAX_ENUM_DEPTH {
                return Err(Error::LevelCap { requested: depth, cap: MAX_ENUM_DEPTH });
            }
            let d = depth.min(scheme.max_level());
            let tau = scheme.beta_abs_tail(d).expect("checked");
            let (lo, hi) = bracket_abs_moment(&scheme.betas(d), tau, 1.0);
            Ok(Estimate {
                quantity,
                method: "exact-enum".into(),
                value: 0.5 * (lo + hi),
                error_low: lo,
                error_high: hi,
                seed: None,
                depth: d,
                stderr: None,
            })
        }
        TvMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(invalid("Monte Carlo needs at least 2 samples"));
            }
            // depth where the remaining Σ|β| is negligible
            let mut d = 1;
            while d < scheme.max_level().min(MAX_DEPTH) && scheme.beta_abs_tail(d).expect("checked") > SAMPLE_TRUNCATION
            {
                d += 1;
            }
            let tau = scheme.beta_abs_tail(d).expect("checked");
            let draws = signed_sums(&scheme.betas(d), samples, seed);
            let (mean, se) = mc_abs_moment(&draws, 1.0);
            Ok(Estimate {
                quantity,
                method: "mc".into(),
                value: mean,
                error_low: mean - MC_SIGMAS * se - tau,
                error_high: mean + MC_SIGMAS * se + tau,
                seed: Some(seed),
                depth: d,
                stderr: Some(se),
            })
        }
    }
}
