//! Run configuration: the versioned JSON schema, the flag grammar, and
//! validation into a [`Plan`].

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use phivar::dyadic::SignField;
use phivar::regvar::RegularlyVaryingFn;
use phivar::scheme::{CoefficientScheme, SchemeKind};
use phivar::variation::{Engine, Gauge, MIN_SAMPLES};
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "phivar/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Variation,
    Study,
    Limits,
    Clt,
    Path,
    Conditions,
}

/// Quantity computed by the `limits` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    /// `E|Z|^r` for the limiting Bernoulli convolution.
    Moment,
    /// `‖Z_n/s_n - Z‖_2` along `--n`.
    Coupling,
    /// `E ∫|dX|` for a bounded-variation scheme.
    Tv,
}

/// Canned configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Three random-sign paths with `q = 0.7`, `g = spow:ρ`, `ρ ∈ {-2, 0, 2}`.
    Figure1,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
    /// Binary path export (`path` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary: Option<PathBuf>,
}

/// The on-disk configuration. Every field but `schema` and `command` has a
/// default, so a minimal file is `{"schema":"phivar/1","command":"clt",
/// "scheme":{"kind":"takagi"},"n":[64]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<CoefficientScheme>,
    #[serde(default = "classic")]
    pub signs: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<Gauge>,
    #[serde(default)]
    pub n: Vec<u32>,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "enumerate")]
    pub mode: Engine,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<RegularlyVaryingFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<RegularlyVaryingFn>,
    #[serde(default = "two")]
    pub b: f64,
    #[serde(default = "one_u32")]
    pub nmin: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmax: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub reproducible: bool,
    #[serde(default)]
    pub output: Outputs,
}

fn classic() -> String {
    "classic".into()
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn one_u32() -> u32 {
    1
}
fn enumerate() -> Engine {
    Engine::Enumerate
}
fn default_samples() -> u64 {
    100_000
}
fn default_tolerance() -> f64 {
    1e-12
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            schema: SCHEMA.into(),
            command,
            scheme: None,
            signs: classic(),
            gauge: None,
            n: Vec::new(),
            t: 1.0,
            mode: Engine::Enumerate,
            samples: default_samples(),
            seed: 0,
            tolerance: default_tolerance(),
            preset: None,
            quantity: None,
            q: None,
            r: None,
            depth: None,
            l: None,
            ell: None,
            b: 2.0,
            nmin: 1,
            nmax: None,
            threads: None,
            reproducible: false,
            output: Outputs::default(),
        }
    }
}

/// Flags shared by every subcommand. Each one overrides the matching field
/// of `--config`, when given.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON run configuration (schema "phivar/1").
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Coefficient scheme: takagi | geometric:a=A | faber[:levels=L]
    /// | explicit:alphas=A1;A2;... | prescribed-q:q=Q,g=EXPR | prescribed-q0:g=EXPR.
    #[arg(long)]
    pub scheme: Option<String>,

    /// Sign field: classic | random:seed=S | rule:alternate-level|alternate-cell|thue-morse.
    #[arg(long)]
    pub signs: Option<String>,

    /// Gauge: power:P | phi:q=Q,g=EXPR.
    #[arg(long)]
    pub gauge: Option<String>,

    /// Levels, as a comma list with optional inclusive ranges: 8,10..14,20.
    #[arg(long, visible_alias = "level")]
    pub n: Option<String>,

    /// Right end of the time window, in [0, 1].
    #[arg(long)]
    pub t: Option<f64>,

    /// Engine: enumerate | binomial | mc.
    #[arg(long, value_parser = parse_engine)]
    pub mode: Option<Engine>,

    /// Monte Carlo sample count.
    #[arg(long)]
    pub samples: Option<u64>,

    /// Seed for every random choice in the run.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Series truncation tolerance for path values.
    #[arg(long)]
    pub tolerance: Option<f64>,

    /// Canned configuration (`path` only).
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,

    /// Quantity for `limits`.
    #[arg(long, value_enum)]
    pub quantity: Option<Quantity>,

    /// Exponent q of the limit law or of the target growth 2^{2qn}.
    #[arg(long)]
    pub q: Option<f64>,

    /// Moment order (`limits --quantity moment`) or sampled norm order (coupling).
    #[arg(long)]
    pub r: Option<f64>,

    /// Convolution depth for exact enumeration.
    #[arg(long)]
    pub depth: Option<u32>,

    /// Slowly varying L, from which ℓ is integrated (`conditions`).
    #[arg(long)]
    pub l: Option<String>,

    /// Slowly varying ℓ given directly (`conditions`).
    #[arg(long)]
    pub ell: Option<String>,

    /// Base b of the sampling grid b^n (`conditions`).
    #[arg(long)]
    pub b: Option<f64>,

    /// First level tabulated by `conditions`.
    #[arg(long)]
    pub nmin: Option<u32>,

    /// Last level tabulated by `conditions`.
    #[arg(long)]
    pub nmax: Option<u32>,

    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "PHIVAR_THREADS")]
    pub threads: Option<usize>,

    /// Omit the timestamp header and wall times, so reruns are byte-identical.
    #[arg(long)]
    pub reproducible: bool,

    /// CSV output path; stdout when no output is requested.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,

    /// JSON record {config, result}.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,

    /// SVG line chart.
    #[arg(long, value_name = "FILE")]
    pub svg: Option<PathBuf>,

    /// Binary path export (`path` only).
    #[arg(long, value_name = "FILE")]
    pub binary: Option<PathBuf>,
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    match s {
        "enumerate" => Ok(Engine::Enumerate),
        "binomial" => Ok(Engine::Binomial),
        "mc" => Ok(Engine::Mc),
        _ => Err(format!("unknown engine `{s}` (enumerate, binomial, mc)")),
    }
}

/// Parse the flag form of a scheme.
pub fn parse_scheme(s: &str) -> Result<CoefficientScheme, String> {
    let (name, args) = s.split_once(':').unwrap_or((s, ""));
    let num = |key: &str, v: &str| v.trim().parse::<f64>().map_err(|_| format!("scheme `{s}`: {key} must be a number"));
    let field = |key: &str| -> Result<&str, String> {
        args.strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| format!("scheme `{s}`: expected {name}:{key}=..."))
    };
    let regvar = |v: &str| v.parse::<RegularlyVaryingFn>().map_err(|e| format!("scheme `{s}`: {e}"));
    let kind = match name {
        "takagi" if args.is_empty() => SchemeKind::Takagi,
        "geometric" => SchemeKind::Geometric { a: num("a", field("a")?)? },
        "faber" if args.is_empty() => SchemeKind::Faber { levels: phivar::scheme::FABER_DEFAULT_LEVELS },
        "faber" => SchemeKind::Faber {
            levels: field("levels")?.parse().map_err(|_| format!("scheme `{s}`: levels must be an integer"))?,
        },
        "explicit" => SchemeKind::Explicit {
            alphas: field("alphas")?.split(';').map(|a| num("alphas", a)).collect::<Result<_, _>>()?,
        },
        "prescribed-q" => {
            let (q, g) = field("q")?
                .split_once(",g=")
                .ok_or_else(|| format!("scheme `{s}`: expected prescribed-q:q=Q,g=EXPR"))?;
            SchemeKind::PrescribedQ { q: num("q", q)?, g: regvar(g)? }
        }
        "prescribed-q0" => SchemeKind::PrescribedQ0 { g: regvar(field("g")?)? },
        _ => return Err(format!("unknown scheme `{s}`")),
    };
    CoefficientScheme::new(kind).map_err(|e| format!("scheme `{s}`: {e}"))
}

/// Parse `8,10..14,20` into levels.
pub fn parse_levels(s: &str) -> Result<Vec<u32>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        let bad = || format!("levels `{s}`: `{part}` is not a level or an inclusive range A..B");
        if let Some((a, b)) = part.split_once("..") {
            let a: u32 = a.parse().map_err(|_| bad())?;
            let b: u32 = b.trim_start_matches('=').parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(out)
}

/// Read a configuration file.
pub fn load(path: &Path) -> Result<RunConfig, Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| vec![format!("cannot read {}: {e}", path.display())])?;
    serde_json::from_str(&text).map_err(|e| vec![format!("{}: {e}", path.display())])
}

/// Overlay the flags on the `--config` file (or on defaults for `command`).
/// Flags that fail to parse leave their field untouched and are returned as
/// violations next to the merged configuration.
pub fn merge(command: Command, flags: &Flags) -> Result<(RunConfig, Vec<String>), Vec<String>> {
    let mut errors = Vec::new();
    let mut cfg = match &flags.config {
        Some(path) => {
            let cfg = load(path)?;
            if cfg.command != command {
                errors.push(format!(
                    "config file is for `{}` but the `{}` command was given",
                    name(cfg.command),
                    name(command)
                ));
            }
            cfg
        }
        None => RunConfig::new(command),
    };
    let mut take = |res: Result<(), String>| {
        if let Err(e) = res {
            errors.push(e);
        }
    };
    if let Some(s) = &flags.scheme {
        take(parse_scheme(s).map(|v| cfg.scheme = Some(v)));
    }
    if let Some(s) = &flags.signs {
        cfg.signs = s.clone();
    }
    if let Some(s) = &flags.gauge {
        take(s.parse::<Gauge>().map(|g| cfg.gauge = Some(g)).map_err(|e| e.to_string()));
    }
    if let Some(s) = &flags.n {
        take(parse_levels(s).map(|v| cfg.n = v));
    }
    if let Some(s) = &flags.l {
        take(s.parse::<RegularlyVaryingFn>().map(|v| cfg.l = Some(v)).map_err(|e| format!("--l: {e}")));
    }
    if let Some(s) = &flags.ell {
        take(s.parse::<RegularlyVaryingFn>().map(|v| cfg.ell = Some(v)).map_err(|e| format!("--ell: {e}")));
    }
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = flags.$f { cfg.$f = v; })* };
    }
    set!(t, mode, samples, seed, tolerance, b, nmin);
    macro_rules! set_opt {
        ($($f:ident),*) => { $(if flags.$f.is_some() { cfg.$f = flags.$f; })* };
    }
    set_opt!(preset, quantity, q, r, depth, nmax, threads);
    cfg.reproducible |= flags.reproducible;
    for (dst, src) in [
        (&mut cfg.output.csv, &flags.csv),
        (&mut cfg.output.json, &flags.json),
        (&mut cfg.output.svg, &flags.svg),
        (&mut cfg.output.binary, &flags.binary),
    ] {
        if src.is_some() {
            dst.clone_from(src);
        }
    }
    Ok((cfg, errors))
}

pub fn name(c: Command) -> &'static str {
    match c {
        Command::Variation => "variation",
        Command::Study => "study",
        Command::Limits => "limits",
        Command::Clt => "clt",
        Command::Path => "path",
        Command::Conditions => "conditions",
    }
}

/// A validated run.
#[derive(Debug, Clone)]
pub enum Plan {
    Variation(Sweep),
    Study(Sweep),
    Moment { q: f64, r: f64, engine: Engine, depth: u32, samples: u64, seed: u64 },
    Coupling { scheme: CoefficientScheme, q: f64, levels: Vec<u32>, sampled: Option<(f64, u64, u64)> },
    TotalVariation { scheme: CoefficientScheme, engine: Engine, depth: u32, samples: u64, seed: u64 },
    Clt { scheme: CoefficientScheme, levels: Vec<u32>, samples: u64, seed: u64 },
    Path { paths: Vec<PathJob>, level: u32, tolerance: f64 },
    Conditions { scheme: CoefficientScheme, q: f64, slow: phivar::scheme::SlowlyVarying, b: f64, nmin: u32, nmax: u32 },
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub scheme: CoefficientScheme,
    pub signs: SignField,
    pub gauge: Gauge,
    pub levels: Vec<u32>,
    pub t: f64,
    pub engine: Engine,
    pub samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct PathJob {
    pub label: String,
    pub scheme: CoefficientScheme,
    pub signs: SignField,
}

const DEFAULT_DEPTH: u32 = 20;
const FIGURE1_RHOS: [f64; 3] = [-2.0, 0.0, 2.0];
const FIGURE1_LEVEL: u32 = 16;

/// Check the whole configuration, returning every violation at once.
pub fn validate(cfg: &RunConfig) -> Result<Plan, Vec<String>> {
    let mut v: Vec<String> = Vec::new();
    if cfg.schema != SCHEMA {
        v.push(format!("schema must be \"{SCHEMA}\", got \"{}\"", cfg.schema));
    }
    let signs = cfg.signs.parse::<SignField>().map_err(|e| v.push(format!("signs: {e}"))).ok();
    if cfg.threads == Some(0) {
        v.push("threads must be at least 1".into());
    }
    if !(0.0..=1.0).contains(&cfg.t) {
        v.push(format!("t must lie in [0, 1], got {}", cfg.t));
    }
    if cfg.mode == Engine::Mc && cfg.samples < MIN_SAMPLES {
        v.push(format!("samples must be at least {MIN_SAMPLES} for the mc engine, got {}", cfg.samples));
    }
    let needs_scheme = !(cfg.command == Command::Limits && cfg.quantity == Some(Quantity::Moment))
        && !(cfg.command == Command::Path && cfg.preset.is_some());
    if needs_scheme && cfg.scheme.is_none() {
        v.push(format!("`{}` needs a scheme", name(cfg.command)));
    }
    if cfg.command != Command::Path {
        if cfg.preset.is_some() {
            v.push("preset applies to `path` only".into());
        }
        if cfg.output.binary.is_some() {
            v.push("binary output applies to `path` only".into());
        }
    }
    let wants_gauge = matches!(cfg.command, Command::Variation | Command::Study);
    if wants_gauge && cfg.gauge.is_none() {
        v.push(format!("`{}` needs a gauge", name(cfg.command)));
    }
    let needs_levels = matches!(cfg.command, Command::Variation | Command::Study | Command::Clt)
        || (cfg.command == Command::Limits && cfg.quantity == Some(Quantity::Coupling))
        || (cfg.command == Command::Path && cfg.preset.is_none());
    if needs_levels && cfg.n.is_empty() {
        v.push(format!("`{}` needs at least one level n", name(cfg.command)));
    }
    if matches!(cfg.command, Command::Variation | Command::Path) && cfg.n.len() > 1 {
        v.push(format!("`{}` takes a single level, got {}", name(cfg.command), cfg.n.len()));
    }
    if cfg.n.contains(&0) && cfg.command != Command::Path {
        v.push("levels must be at least 1".into());
    }
    if wants_gauge && cfg.mode == Engine::Binomial && cfg.t != 1.0 {
        v.push("the binomial engine covers the full interval; t must be 1".into());
    }
    let depth = cfg.depth.unwrap_or(DEFAULT_DEPTH);
    if cfg.output.svg.is_some()
        && (cfg.command == Command::Conditions
            || (cfg.command == Command::Limits && cfg.quantity != Some(Quantity::Coupling)))
    {
        v.push("svg output is available for variation, study, clt, path and limits --quantity coupling".into());
    }

    let plan = match cfg.command {
        Command::Variation | Command::Study => {
            let sweep = |scheme: &CoefficientScheme, gauge: &Gauge, signs: &SignField| Sweep {
                scheme: scheme.clone(),
                signs: signs.clone(),
                gauge: gauge.clone(),
                levels: cfg.n.clone(),
                t: cfg.t,
                engine: cfg.mode,
                samples: cfg.samples,
                seed: cfg.seed,
            };
            match (&cfg.scheme, &cfg.gauge, &signs) {
                (Some(s), Some(g), Some(sg)) if cfg.command == Command::Variation => {
                    Some(Plan::Variation(sweep(s, g, sg)))
                }
                (Some(s), Some(g), Some(sg)) => Some(Plan::Study(sweep(s, g, sg))),
                _ => None,
            }
        }
        Command::Limits => {
            let q = cfg.q;
            match cfg.quantity {
                None => {
                    v.push("`limits` needs --quantity (moment, coupling, tv)".into());
                    None
                }
                Some(Quantity::Moment) => {
                    if q.is_none() {
                        v.push("`limits --quantity moment` needs q".into());
                    }
                    if cfg.mode == Engine::Binomial {
                        v.push("moments use the enumerate or mc engine".into());
                    }
                    q.map(|q| Plan::Moment {
                        q,
                        r: cfg.r.unwrap_or(2.0),
                        engine: cfg.mode,
                        depth,
                        samples: cfg.samples,
                        seed: cfg.seed,
                    })
                }
                Some(Quantity::Coupling) => {
                    if q.is_none() {
                        v.push("`limits --quantity coupling` needs q".into());
                    }
                    let sampled = (cfg.mode == Engine::Mc).then(|| (cfg.r.unwrap_or(2.0), cfg.samples, cfg.seed));
                    match (&cfg.scheme, q) {
                        (Some(s), Some(q)) => {
                            Some(Plan::Coupling { scheme: s.clone(), q, levels: cfg.n.clone(), sampled })
                        }
                        _ => None,
                    }
                }
                Some(Quantity::Tv) => {
                    if cfg.mode == Engine::Binomial {
                        v.push("total variation uses the enumerate or mc engine".into());
                    }
                    cfg.scheme.as_ref().map(|s| Plan::TotalVariation {
                        scheme: s.clone(),
                        engine: cfg.mode,
                        depth,
                        samples: cfg.samples,
                        seed: cfg.seed,
                    })
                }
            }
        }
        Command::Clt => cfg.scheme.as_ref().map(|s| Plan::Clt {
            scheme: s.clone(),
            levels: cfg.n.clone(),
            samples: cfg.samples,
            seed: cfg.seed,
        }),
        Command::Path => {
            if !(cfg.tolerance > 0.0) {
                v.push(format!("tolerance must be positive, got {}", cfg.tolerance));
            }
            match (cfg.preset, &cfg.scheme, &signs) {
                (Some(Preset::Figure1), _, _) => {
                    if cfg.output.binary.is_some() {
                        v.push("binary output holds a single path; the figure1 preset makes three".into());
                    }
                    let jobs: Result<Vec<_>, _> = FIGURE1_RHOS
                        .iter()
                        .enumerate()
                        .map(|(i, &rho)| {
                            let g = RegularlyVaryingFn::shifted_power(rho)?;
                            Ok::<_, phivar::Error>(PathJob {
                                label: format!("rho={rho}"),
                                scheme: CoefficientScheme::prescribed_q(0.7, g)?,
                                signs: SignField::random(cfg.seed.wrapping_add(i as u64)),
                            })
                        })
                        .collect();
                    let level = cfg.n.first().copied().unwrap_or(FIGURE1_LEVEL);
                    jobs.map_err(|e| v.push(e.to_string())).ok().map(|paths| Plan::Path {
                        paths,
                        level,
                        tolerance: cfg.tolerance,
                    })
                }
                (None, Some(s), Some(sg)) => cfg.n.first().map(|&level| Plan::Path {
                    paths: vec![PathJob { label: "value".into(), scheme: s.clone(), signs: sg.clone() }],
                    level,
                    tolerance: cfg.tolerance,
                }),
                _ => None,
            }
        }
        Command::Conditions => {
            let slow = match (&cfg.l, &cfg.ell) {
                (Some(l), None) => Some(phivar::scheme::SlowlyVarying::L(l.clone())),
                (None, Some(e)) => Some(phivar::scheme::SlowlyVarying::Ell(e.clone())),
                (Some(_), Some(_)) => {
                    v.push("give either l or ell, not both".into());
                    None
                }
                (None, None) => {
                    v.push("`conditions` needs l or ell".into());
                    None
                }
            };
            if cfg.q.is_none() {
                v.push("`conditions` needs q".into());
            }
            if !(cfg.b > 1.0) {
                v.push(format!("b must exceed 1, got {}", cfg.b));
            }
            let nmax = cfg.nmax.unwrap_or(60);
            if cfg.nmin == 0 || cfg.nmin > nmax {
                v.push(format!("need 1 <= nmin <= nmax, got {}..={nmax}", cfg.nmin));
            }
            match (&cfg.scheme, slow, cfg.q) {
                (Some(s), Some(slow), Some(q)) => {
                    Some(Plan::Conditions { scheme: s.clone(), q, slow, b: cfg.b, nmin: cfg.nmin, nmax })
                }
                _ => None,
            }
        }
    };
    match plan {
        Some(p) if v.is_empty() => Ok(p),
        _ => {
            if v.is_empty() {
                v.push("configuration is incomplete".into());
            }
            Err(v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_grammar() {
        assert_eq!(parse_scheme("takagi").unwrap(), CoefficientScheme::takagi());
        assert_eq!(parse_scheme("geometric:a=0.5").unwrap(), CoefficientScheme::geometric(0.5).unwrap());
        assert_eq!(
            parse_scheme("explicit:alphas=1;0.5").unwrap(),
            CoefficientScheme::explicit(vec![1.0, 0.5]).unwrap()
        );
        let pq = parse_scheme("prescribed-q:q=0.7,g=mul(spow:2,logpow:1)").unwrap();
        assert_eq!(pq, CoefficientScheme::prescribed_q(0.7, "mul(spow:2,logpow:1)".parse().unwrap()).unwrap());
        assert!(parse_scheme("faber:levels=120").is_ok());
        for bad in ["geometric", "geometric:a=2", "takagi:a=1", "prescribed-q:q=0.5", "nope"] {
            assert!(parse_scheme(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn level_lists() {
        assert_eq!(parse_levels("3,5..7,10").unwrap(), vec![3, 5, 6, 7, 10]);
        assert_eq!(parse_levels("4..=5").unwrap(), vec![4, 5]);
        assert!(parse_levels("7..5").is_err());
        assert!(parse_levels("x").is_err());
    }

    #[test]
    fn violations_are_aggregated() {
        let mut cfg = RunConfig::new(Command::Variation);
        cfg.schema = "phivar/0".into();
        cfg.t = 2.0;
        cfg.n = vec![3, 4];
        let errs = validate(&cfg).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("schema")));
        assert!(errs.len() >= 5, "{errs:?}");
    }
}
