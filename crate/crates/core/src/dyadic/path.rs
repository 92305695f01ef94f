//! Sample paths `X(k 2^{-N})` on the level-`N` dyadic grid.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use super::{Increments, SignField};
use crate::error::{invalid, Error, Result};
use crate::numeric::Accumulator;
use crate::scheme::CoefficientScheme;

/// Largest grid level a path may be generated at (`2^26 + 1` values).
pub const MAX_PATH_LEVEL: u32 = 26;

const MAGIC: &[u8; 8] = b"PHIVPATH";

/// Values of the sign-modified series on a dyadic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicPath {
    pub level: u32,
    pub values: Vec<f64>,
    pub scheme: String,
    pub signs: String,
    pub seed: Option<u64>,
}

/// Generate `X` at every point of the level-`level` grid.
///
/// Grid points are dyadic, so every term with `m ≥ level` vanishes there
/// and the path is the running (compensated) sum of exact increments.
/// `tolerance` bounds the admissible drift of the final value from zero.
pub fn gen_path(scheme: &CoefficientScheme, signs: &SignField, level: u32, tolerance: f64) -> Result<DyadicPath> {
    if !(tolerance > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    if level > MAX_PATH_LEVEL {
        return Err(Error::LevelCap { requested: level, cap: MAX_PATH_LEVEL });
    }
    let cells = 1usize << level;
    let mut values = Vec::with_capacity(cells + 1);
    values.push(0.0);
    if level == 0 {
        values.push(0.0);
    } else {
        let inc = Increments::new(scheme, signs, level)?;
        let mut acc = Accumulator::new();
        inc.for_each_in::<()>(0..inc.cells(), |_, d| {
            acc.add(d);
            values.push(acc.value());
            Ok(())
        })
        .expect("infallible visitor");
        let drift = values[cells];
        let allowed = tolerance.max(1e-12 * (1.0 + inc.max_abs_bound() * inc.cells() as f64));
        if drift.abs() > allowed {
            return Err(invalid(format!("path endpoint drifted to {drift:e}")));
        }
        values[cells] = 0.0;
    }
    Ok(DyadicPath { level, values, scheme: scheme.label(), signs: signs.to_string(), seed: signs.seed() })
}

impl DyadicPath {
    /// Grid point `k 2^{-N}`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * 2f64.powi(-(self.level as i32))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,value")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.time(k), v)?;
        }
        Ok(())
    }

    /// 16-byte header (`PHIVPATH`, level as `u64` LE) followed by the
    /// values as `f64` LE.
    pub fn write_binary<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.level as u64).to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Read back the values written by [`write_binary`](Self::write_binary).
    /// Provenance fields are left empty.
    pub fn read_binary<R: Read>(mut input: R) -> io::Result<Self> {
        let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
        let mut header = [0u8; 16];
        input.read_exact(&mut header)?;
        if &header[..8] != MAGIC {
            return Err(bad("missing PHIVPATH magic"));
        }
        let level = u64::from_le_bytes(header[8..].try_into().expect("8 bytes"));
        if level > MAX_PATH_LEVEL as u64 {
            return Err(bad("level exceeds the path cap"));
        }
        let len = (1usize << level) + 1;
        let mut values = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            input.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        Ok(DyadicPath { level: level as u32, values, scheme: String::new(), signs: String::new(), seed: None })
    }
}
