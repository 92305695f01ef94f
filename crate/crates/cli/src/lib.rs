//! Library side of the `phivar` command: configuration, execution and
//! artifact emission.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use thiserror::Error;

use config::{Command, Flags};
use run::Record;

#[derive(Debug, Error)]
pub enum Failure {
    #[error("invalid configuration")]
    Config(Vec<String>),
    #[error(transparent)]
    Core(#[from] phivar::Error),
    #[error("{0}")]
    Io(String),
}

#[derive(Serialize)]
pub struct ErrorBody<'a> {
    pub kind: &'a str,
    pub exit_code: u8,
    pub messages: Vec<String>,
}

impl Failure {
    pub fn body(&self) -> ErrorBody<'_> {
        use phivar::Error as E;
        let (kind, exit_code) = match self {
            Failure::Config(_) => ("invalid-config", 2),
            Failure::Io(_) => ("io", 1),
            Failure::Core(E::LevelCap { .. } | E::ToleranceUnreachable { .. }) => ("cap-exceeded", 3),
            Failure::Core(E::GaugeDomain { .. }) => ("gauge-domain", 4),
            Failure::Core(_) => ("invalid-config", 2),
        };
        let messages = match self {
            Failure::Config(v) => v.clone(),
            other => vec![other.to_string()],
        };
        ErrorBody { kind, exit_code, messages }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

/// Print the failure as JSON on stderr and map it to its exit status.
pub fn report(f: &Failure) -> ExitCode {
    let body = f.body();
    let json = serde_json::json!({ "error": body });
    let _ = writeln!(std::io::stderr(), "{json}");
    ExitCode::from(body.exit_code)
}

/// Merge, validate, execute and write every requested artifact.
pub fn drive(command: Command, flags: &Flags) -> Result<(), Failure> {
    let (cfg, mut violations) = config::merge(command, flags).map_err(Failure::Config)?;
    let plan = match config::validate(&cfg) {
        Ok(plan) if violations.is_empty() => plan,
        Ok(_) => return Err(Failure::Config(violations)),
        Err(more) => {
            violations.extend(more);
            return Err(Failure::Config(violations));
        }
    };
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Io(format!("cannot start {threads} worker threads: {e}")))?;
    }
    let result = run::execute(&plan, cfg.reproducible)?;

    let stamp = (!cfg.reproducible).then(|| {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        format!("phivar {} generated at unix time {secs}", env!("CARGO_PKG_VERSION"))
    });
    let csv = output::csv(&result, stamp.as_deref()).map_err(|e| Failure::Io(e.to_string()))?;
    let out = &cfg.output;
    match &out.csv {
        Some(p) => write_file(p, &csv)?,
        None if out.json.is_none() && out.svg.is_none() && out.binary.is_none() => {
            std::io::stdout().write_all(&csv).map_err(|e| Failure::Io(e.to_string()))?
        }
        None => {}
    }
    if let Some(p) = &out.svg {
        let title = match &cfg.scheme {
            Some(s) => format!("{} ({})", config::name(command), s.label()),
            None => config::name(command).to_string(),
        };
        if let Some(svg) = output::chart(&result, &title) {
            write_file(p, svg.as_bytes())?;
        }
    }
    if let (Some(p), run::RunResult::Path { paths, .. }) = (&out.binary, &result) {
        let mut buf = Vec::new();
        paths[0].write_binary(&mut buf).map_err(|e| Failure::Io(e.to_string()))?;
        write_file(p, &buf)?;
    }
    if let Some(p) = &out.json {
        let record = Record { config: cfg.clone(), result };
        let text = serde_json::to_string_pretty(&record).map_err(|e| Failure::Io(e.to_string()))?;
        write_file(p, text.as_bytes())?;
    }
    Ok(())
}
