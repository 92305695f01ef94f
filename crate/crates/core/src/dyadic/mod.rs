//! The tent map, series evaluation, and the exact dyadic increment engine.
//!
//! On the `k`-th level-`n` cell every term with `m ≥ n` vanishes at both
//! endpoints, and every term with `m < n` is linear with slope `±2^m`.
//! Hence
//!
//! ```text
//! f((k+1)2^{-n}) - f(k2^{-n}) = 2^{-n} Σ_{m<n} β_m σ_m ε_m(k)
//! ```
//!
//! where `ε_m(k) = +1` iff bit `n-m-1` of `k` is clear. Increments are
//! computed from this sum, never by subtracting nearby values of `f`.

mod path;
mod signs;

pub use path::{gen_path, DyadicPath, MAX_PATH_LEVEL};
pub use signs::{BuiltinRule, SignField};

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::scheme::CoefficientScheme;

/// Hard cap on enumeration levels.
pub const MAX_ENUMERATION_LEVEL: u32 = 40;

/// Number of increments handled per parallel work unit. Fixed, so the
/// reduction tree does not depend on the thread count.
pub const BLOCK_LEN: u64 = 1 << 16;

/// `φ(t)`: distance from `t` to the nearest integer.
#[inline]
pub fn tent(t: f64) -> f64 {
    (t - t.round()).abs()
}

/// Evaluate `Σ α_m σ_m(t) φ(2^m t)` truncated so that the omitted tail is
/// at most `tolerance`.
pub fn eval_f(scheme: &CoefficientScheme, signs: &SignField, t: f64, tolerance: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid(format!("t must lie in [0, 1], got {t}")));
    }
    let level = scheme.truncation_level(tolerance)?;
    Ok(eval_truncated(scheme, signs, t, level))
}

/// `Σ_{m ≤ level} α_m σ_m(t) φ(2^m t)`.
pub fn eval_truncated(scheme: &CoefficientScheme, signs: &SignField, t: f64, level: u32) -> f64 {
    let mut total = 0.0;
    for m in 0..=level {
        let x = t * 2f64.powi(m as i32);
        // every f64 in [0, 1] is dyadic: once 2^m t is an integer, φ vanishes
        // at this and all finer levels
        if x >= 9_007_199_254_740_992.0 || !x.is_finite() {
            break;
        }
        let phi = tent(x);
        if phi == 0.0 {
            continue;
        }
        let alpha = scheme.alpha(m);
        if alpha != 0.0 {
            total += alpha * signs.sign_at(m, t) * phi;
        }
    }
    total
}

/// Per-level data needed to form increments at a fixed level `n`.
#[derive(Debug, Clone)]
pub struct Increments<'a> {
    betas: Vec<f64>,
    signs: &'a SignField,
    n: u32,
    scale: f64,
}

impl<'a> Increments<'a> {
    pub fn new(scheme: &CoefficientScheme, signs: &'a SignField, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(invalid("level n must be at least 1"));
        }
        if n > MAX_ENUMERATION_LEVEL {
            return Err(Error::LevelCap { requested: n, cap: MAX_ENUMERATION_LEVEL });
        }
        Ok(Self { betas: scheme.betas(n), signs, n, scale: 2f64.powi(-(n as i32)) })
    }

    pub fn level(&self) -> u32 {
        self.n
    }

    /// Number of cells, `2^n`.
    pub fn cells(&self) -> u64 {
        1u64 << self.n
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `2^{-n}`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// A-priori bound `2^{-n} Σ |β_m|` on every increment.
    pub fn max_abs_bound(&self) -> f64 {
        self.scale * self.betas.iter().map(|b| b.abs()).sum::<f64>()
    }

    #[inline]
    fn term(&self, m: u32, k: u64) -> f64 {
        let beta = self.betas[m as usize];
        let bit = (k >> (self.n - m - 1)) & 1;
        let slope = if bit == 0 { beta } else { -beta };
        if self.signs.is_classic() {
            slope
        } else {
            slope * self.signs.sign(m, (k >> (self.n - m)) + 1)
        }
    }

    /// `Σ_{m<n} β_m σ_m ε_m(k)`, i.e. `2^n` times the increment.
    pub fn scaled(&self, k: u64) -> Result<f64> {
        if k >= self.cells() {
            return Err(invalid(format!("cell index {k} outside [0, {})", self.cells())));
        }
        Ok(self.scaled_unchecked(k))
    }

    #[inline]
    pub(crate) fn scaled_unchecked(&self, k: u64) -> f64 {
        let mut acc = 0.0;
        for m in 0..self.n {
            acc += self.term(m, k);
        }
        acc
    }

    /// `f((k+1)2^{-n}) - f(k2^{-n})`.
    pub fn at(&self, k: u64) -> Result<f64> {
        Ok(self.scaled(k)? * self.scale)
    }

    /// Streaming cursor positioned at cell `start`.
    pub fn cursor(&self, start: u64) -> Cursor<'_, 'a> {
        let mut partial = vec![0.0; self.n as usize];
        let mut acc = 0.0;
        for m in 0..self.n {
            acc += self.term(m, start);
            partial[m as usize] = acc;
        }
        Cursor { inc: self, k: start, partial }
    }

    /// Visit increments `(k, Δ_k)` for `k` in `range`, in order.
    pub fn for_each_in<E>(
        &self,
        range: Range<u64>,
        mut visitor: impl FnMut(u64, f64) -> std::result::Result<(), E>,
    ) -> std::result::Result<(), E> {
        if range.is_empty() {
            return Ok(());
        }
        let mut cursor = self.cursor(range.start);
        loop {
            visitor(cursor.k, cursor.increment())?;
            if cursor.k + 1 >= range.end {
                return Ok(());
            }
            cursor.advance();
        }
    }

    /// Split `range` into fixed blocks of [`BLOCK_LEN`] cells, fold each
    /// block in parallel on the current rayon pool, and return the block
    /// results in index order.
    pub fn par_blocks<T: Send>(
        &self,
        range: Range<u64>,
        fold: impl Fn(Range<u64>, &mut Cursor<'_, 'a>) -> T + Sync,
    ) -> Vec<T> {
        if range.is_empty() {
            return Vec::new();
        }
        let blocks = (range.end - range.start).div_ceil(BLOCK_LEN);
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let start = range.start + b * BLOCK_LEN;
                let end = (start + BLOCK_LEN).min(range.end);
                let mut cursor = self.cursor(start);
                fold(start..end, &mut cursor)
            })
            .collect()
    }
}

/// Incremental walk over consecutive cells.
///
/// `partial[m]` holds the sum of the level-`0..=m` terms, accumulated from
/// level 0 upward. Advancing `k → k+1` changes exactly the levels whose bit
/// belongs to the trailing run of ones plus the next zero, so only those
/// partial sums are refreshed. The sum order matches [`Increments::scaled`]
/// bit for bit.
pub struct Cursor<'i, 'a> {
    inc: &'i Increments<'a>,
    k: u64,
    partial: Vec<f64>,
}

impl Cursor<'_, '_> {
    #[inline]
    pub fn index(&self) -> u64 {
        self.k
    }

    /// `2^n Δ_k` at the current cell.
    #[inline]
    pub fn scaled(&self) -> f64 {
        self.partial[self.inc.n as usize - 1]
    }

    #[inline]
    pub fn increment(&self) -> f64 {
        self.scaled() * self.inc.scale
    }

    /// Move to the next cell. Must not be called on the last cell.
    #[inline]
    pub fn advance(&mut self) {
        let n = self.inc.n;
        let changed = self.k.trailing_ones() + 1;
        self.k += 1;
        let first = n.saturating_sub(changed);
        let mut acc = if first == 0 { 0.0 } else { self.partial[first as usize - 1] };
        for m in first..n {
            acc += self.inc.term(m, self.k);
            self.partial[m as usize] = acc;
        }
    }
}

/// Visit every level-`n` increment in index order; returns the compensated
/// sum of all increments, `f(1) - f(0) = 0` up to round-off.
pub fn enumerate_increments<E: From<Error>>(
    scheme: &CoefficientScheme,
    signs: &SignField,
    n: u32,
    mut visitor: impl FnMut(u64, f64) -> std::result::Result<(), E>,
) -> std::result::Result<f64, E> {
    let inc = Increments::new(scheme, signs, n)?;
    let mut total = crate::numeric::Accumulator::new();
    inc.for_each_in(0..inc.cells(), |k, d| {
        total.add(d);
        visitor(k, d)
    })?;
    Ok(total.value())
}

/// `f((k+1)2^{-n}) - f(k2^{-n})` for a single cell.
pub fn increment(scheme: &CoefficientScheme, signs: &SignField, n: u32, k: u64) -> Result<f64> {
    Increments::new(scheme, signs, n)?.at(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tent_examples() {
        assert_eq!(tent(0.0), 0.0);
        assert_eq!(tent(0.3), 0.3);
        assert_eq!(tent(0.75), 0.25);
        assert_eq!(tent(2.5), 0.5);
        assert_eq!(tent(-1.2), 0.19999999999999996);
    }

    #[test]
    fn takagi_values() {
        let t = CoefficientScheme::takagi();
        let c = SignField::Classic;
        assert!((eval_f(&t, &c, 0.25, 1e-12).unwrap() - 0.5).abs() < 1e-12);
        assert!((eval_f(&t, &c, 0.5, 1e-12).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(eval_f(&t, &c, 0.0, 1e-12).unwrap(), 0.0);
        assert!(eval_f(&t, &c, 1.5, 1e-12).is_err());
    }

    #[test]
    fn takagi_increments_level_two() {
        let t = CoefficientScheme::takagi();
        let c = SignField::Classic;
        let got: Vec<f64> = (0..4).map(|k| increment(&t, &c, 2, k).unwrap()).collect();
        assert_eq!(got, vec![0.5, 0.0, 0.0, -0.5]);
        assert!(increment(&t, &c, 2, 4).is_err());
        assert!(matches!(increment(&t, &c, 41, 0), Err(Error::LevelCap { .. })));
    }

    #[test]
    fn enumeration_matches_point_queries() {
        let t = CoefficientScheme::takagi();
        let c = SignField::Classic;
        let mut seen = Vec::new();
        let total = enumerate_increments::<Error>(&t, &c, 2, |_, d| {
            seen.push(d);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![0.5, 0.0, 0.0, -0.5]);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn cursor_is_bit_identical_to_direct_sums() {
        let s = CoefficientScheme::prescribed_q(0.7, "spow:2".parse().unwrap()).unwrap();
        for signs in [SignField::Classic, SignField::random(3), SignField::Rule(BuiltinRule::ThueMorse)] {
            let inc = Increments::new(&s, &signs, 11).unwrap();
            inc.for_each_in::<()>(0..inc.cells(), |k, d| {
                assert_eq!(d, inc.at(k).unwrap());
                Ok(())
            })
            .unwrap();
        }
    }

    #[test]
    fn visitor_abort_propagates() {
        let t = CoefficientScheme::takagi();
        let mut visited = 0;
        let res = enumerate_increments::<Error>(&t, &SignField::Classic, 8, |k, _| {
            visited += 1;
            if k == 9 {
                Err(invalid("stop"))
            } else {
                Ok(())
            }
        });
        assert!(res.is_err());
        assert_eq!(visited, 10);
    }

    #[test]
    fn bit_sign_law_matches_floor_parity() {
        for n in 1..=10u32 {
            for m in 0..n {
                for k in 0..(1u64 << n) {
                    let bit_clear = (k >> (n - m - 1)) & 1 == 0;
                    let floor_even = (k >> (n - m - 1)) % 2 == 0;
                    let via_float =
                        (((k as f64) * 2f64.powi(m as i32 + 1 - n as i32)).floor() as u64).is_multiple_of(2);
                    assert_eq!(bit_clear, floor_even);
                    assert_eq!(bit_clear, via_float);
                }
            }
        }
    }

    #[test]
    fn par_blocks_cover_range_in_order() {
        let t = CoefficientScheme::takagi();
        let c = SignField::Classic;
        let inc = Increments::new(&t, &c, 18).unwrap();
        let starts = inc.par_blocks(5..(1 << 18), |r, cur| {
            assert_eq!(cur.index(), r.start);
            r
        });
        assert_eq!(starts.first().unwrap().start, 5);
        assert_eq!(starts.last().unwrap().end, 1 << 18);
        for w in starts.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
    }
}
