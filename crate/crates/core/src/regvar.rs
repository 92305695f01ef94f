//! Regularly varying functions `g` and the gauge functions `Φ_q` built from them.
//!
//! The built-in family is closed under products:
//! `C`, `x^ρ`, `(1+x)^ρ`, `(ln(e+x))^κ`, a tabulated profile, and the
//! integrated slowly varying function `ℓ(x) = ∫_0^{log_b x} L(b^s) ds`.
//!
//! Textual grammar (used by configs and the CLI):
//!
//! ```text
//! expr := const:C | pow:RHO | spow:RHO | logpow:KAPPA
//!       | mul(expr, expr, ...)
//!       | clamp(A, expr)            power components evaluated at max(x, A)
//!       | int(B, expr)              ℓ built from L = expr with base B
//!       | tab(rho=R; x:y; x:y; ...) log-log interpolated table
//! ```

use std::f64::consts::{E, LN_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric;

/// Default anchor below which power components are frozen.
pub const DEFAULT_CLAMP: f64 = 1.0;

/// Relative tolerance of the quadrature behind non-constant `ℓ`.
pub const ELL_QUADRATURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
enum Form {
    Const(f64),
    Pow(f64),
    ShiftedPow(f64),
    LogPow(f64),
    Product(Vec<Form>),
    Table { xs: Vec<f64>, ys: Vec<f64>, index: f64 },
    Integrated { base: Box<RegularlyVaryingFn>, b: f64 },
}

/// A strictly positive function on `[0, ∞)`, regularly varying at infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RegularlyVaryingFn {
    form: Form,
    clamp: f64,
}

impl RegularlyVaryingFn {
    fn from_form(form: Form) -> Self {
        Self { form, clamp: DEFAULT_CLAMP }
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid(format!("constant must be finite and positive, got {c}")));
        }
        Ok(Self::from_form(Form::Const(c)))
    }

    pub fn power(rho: f64) -> Result<Self> {
        finite("rho", rho)?;
        Ok(Self::from_form(Form::Pow(rho)))
    }

    pub fn shifted_power(rho: f64) -> Result<Self> {
        finite("rho", rho)?;
        Ok(Self::from_form(Form::ShiftedPow(rho)))
    }

    pub fn log_power(kappa: f64) -> Result<Self> {
        finite("kappa", kappa)?;
        Ok(Self::from_form(Form::LogPow(kappa)))
    }

    /// Pointwise product. Clamp anchors of the factors are dropped; the
    /// product carries the default anchor.
    pub fn product(factors: Vec<RegularlyVaryingFn>) -> Result<Self> {
        if factors.is_empty() {
            return Err(invalid("product needs at least one factor"));
        }
        if factors.iter().any(|f| matches!(f.form, Form::Integrated { .. })) {
            return Err(invalid("integrated functions cannot appear inside a product"));
        }
        Ok(Self::from_form(Form::Product(factors.into_iter().map(|f| f.form).collect())))
    }

    /// A tabulated profile, interpolated linearly in log-log coordinates,
    /// frozen at the first value to the left and extended as `x^index` to
    /// the right of the last point.
    pub fn tabulated(points: &[(f64, f64)], index: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("a table needs at least two points"));
        }
        finite("index", index)?;
        let mut prev = 0.0;
        for &(x, y) in points {
            if !(x.is_finite() && y.is_finite() && x > prev && y > 0.0) {
                return Err(invalid("table abscissae must be positive and increasing, values positive"));
            }
            prev = x;
        }
        Ok(Self::from_form(Form::Table {
            xs: points.iter().map(|p| p.0).collect(),
            ys: points.iter().map(|p| p.1).collect(),
            index,
        }))
    }

    /// Replace the anchor `a` used for power components: `x^ρ` is evaluated
    /// at `max(x, a)`.
    pub fn with_clamp(mut self, a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(invalid(format!("clamp point must be positive, got {a}")));
        }
        self.clamp = a;
        Ok(self)
    }

    pub fn clamp_point(&self) -> f64 {
        self.clamp
    }

    /// Regular-variation index ρ.
    pub fn index(&self) -> f64 {
        form_index(&self.form)
    }

    pub fn has_derivative(&self) -> bool {
        form_has_derivative(&self.form)
    }

    /// `g(x)` with argument validation.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(invalid(format!("g evaluated at non-finite argument {x}")));
        }
        if x < 0.0 {
            return Err(invalid(format!("g evaluated at negative argument {x}")));
        }
        Ok(self.value(x))
    }

    /// `g(x)` without validation; callers guarantee `x >= 0` and finite.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        form_value(&self.form, self.clamp, x)
    }

    /// `g'(x)` when the form is differentiable.
    pub fn derivative(&self, x: f64) -> Option<f64> {
        form_derivative(&self.form, self.clamp, x)
    }

    /// The slowly varying `ℓ(x) = ∫_0^{log_b x} L(b^s) ds` built from
    /// `self` as `L`. Arguments below `b` are frozen at `ℓ(b)` so the result
    /// stays strictly positive.
    pub fn integrated(&self, b: f64) -> Result<RegularlyVaryingFn> {
        build_ell(self, b)
    }

    /// The value of `g` when it does not depend on its argument.
    pub fn constant_value(&self) -> Option<f64> {
        form_constant(&self.form)
    }
}

/// `ℓ` from `L` and base `b` (see [`RegularlyVaryingFn::integrated`]).
pub fn build_ell(l: &RegularlyVaryingFn, b: f64) -> Result<RegularlyVaryingFn> {
    if !(b.is_finite() && b > 1.0) {
        return Err(invalid(format!("base b must exceed 1, got {b}")));
    }
    if l.index() != 0.0 {
        return Err(invalid(format!("L must be slowly varying (index 0), got index {}", l.index())));
    }
    Ok(RegularlyVaryingFn::from_form(Form::Integrated { base: Box::new(l.clone()), b }))
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}

fn form_index(form: &Form) -> f64 {
    match form {
        Form::Const(_) | Form::LogPow(_) | Form::Integrated { .. } => 0.0,
        Form::Pow(r) | Form::ShiftedPow(r) => *r,
        Form::Product(fs) => fs.iter().map(form_index).sum(),
        Form::Table { index, .. } => *index,
    }
}

fn form_has_derivative(form: &Form) -> bool {
    match form {
        Form::Table { .. } => false,
        Form::Product(fs) => fs.iter().all(form_has_derivative),
        Form::Integrated { .. } => true,
        _ => true,
    }
}

/// Value of the form when it does not depend on `x`.
fn form_constant(form: &Form) -> Option<f64> {
    match form {
        Form::Const(c) => Some(*c),
        Form::Pow(r) | Form::ShiftedPow(r) | Form::LogPow(r) if *r == 0.0 => Some(1.0),
        Form::Product(fs) => fs.iter().map(form_constant).product(),
        _ => None,
    }
}

fn form_value(form: &Form, clamp: f64, x: f64) -> f64 {
    match form {
        Form::Const(c) => *c,
        Form::Pow(r) => {
            let x = x.max(clamp);
            if *r == 1.0 {
                x
            } else {
                x.powf(*r)
            }
        }
        Form::ShiftedPow(r) => (1.0 + x).powf(*r),
        Form::LogPow(k) => (E + x).ln().powf(*k),
        Form::Product(fs) => fs.iter().map(|f| form_value(f, clamp, x)).product(),
        Form::Table { xs, ys, index } => table_value(xs, ys, *index, x),
        Form::Integrated { base, b } => integrated_value(base, *b, x),
    }
}

fn form_derivative(form: &Form, clamp: f64, x: f64) -> Option<f64> {
    match form {
        Form::Const(_) => Some(0.0),
        Form::Pow(r) => Some(if x < clamp { 0.0 } else { r * x.powf(r - 1.0) }),
        Form::ShiftedPow(r) => Some(r * (1.0 + x).powf(r - 1.0)),
        Form::LogPow(k) => {
            let l = (E + x).ln();
            Some(k * l.powf(k - 1.0) / (E + x))
        }
        Form::Product(fs) => {
            // product rule
            let mut total = 0.0;
            for (i, f) in fs.iter().enumerate() {
                let mut term = form_derivative(f, clamp, x)?;
                for (j, h) in fs.iter().enumerate() {
                    if i != j {
                        term *= form_value(h, clamp, x);
                    }
                }
                total += term;
            }
            Some(total)
        }
        Form::Table { .. } => None,
        Form::Integrated { base, b } => {
            if x < *b {
                Some(0.0)
            } else {
                Some(base.value(x) / (x * b.ln()))
            }
        }
    }
}

fn table_value(xs: &[f64], ys: &[f64], index: f64, x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[last] {
        return ys[last] * (x / xs[last]).powf(index);
    }
    let hi = xs.partition_point(|&v| v < x);
    let lo = hi - 1;
    let w = (x.ln() - xs[lo].ln()) / (xs[hi].ln() - xs[lo].ln());
    (ys[lo].ln() * (1.0 - w) + ys[hi].ln() * w).exp()
}

fn integrated_value(base: &RegularlyVaryingFn, b: f64, x: f64) -> f64 {
    let upper = x.max(b).ln() / b.ln();
    if let Some(c) = base.constant_value() {
        return c * upper;
    }
    let integrand = |s: f64| base.value(b.powf(s));
    numeric::integrate(integrand, 0.0, upper, ELL_QUADRATURE_TOL).0
}

/// The gauge `Φ_q(x) = x^{1/(1-q)} · g(-log₂x / (1-q))^{-1/(2(1-q))}` on
/// `[0, 1)`, extended by `Φ_q(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiFunction {
    q: f64,
    g: RegularlyVaryingFn,
}

impl PhiFunction {
    pub fn new(q: f64, g: RegularlyVaryingFn) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(invalid(format!("q must lie in [0, 1), got {q}")));
        }
        Ok(Self { q, g })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn g(&self) -> &RegularlyVaryingFn {
        &self.g
    }

    /// The power `1/(1-q)` governing the gauge near zero.
    pub fn exponent(&self) -> f64 {
        1.0 / (1.0 - self.q)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&x) {
            return Err(invalid(format!("Φ_q is defined on [0, 1), got {x}")));
        }
        Ok(self.value(x))
    }

    /// Unchecked evaluation for `x` in `[0, 1)`.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let p = self.exponent();
        let y = -x.log2() * p;
        let gy = self.g.value(y);
        if self.q == 0.0 {
            x / gy.sqrt()
        } else {
            x.powf(p) * gy.powf(-0.5 * p)
        }
    }

    /// `ln Φ_q(x)` given `ln x`, usable when `x` itself underflows.
    pub fn ln_value(&self, ln_x: f64) -> f64 {
        if ln_x == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let p = self.exponent();
        let y = -ln_x / LN_2 * p;
        p * ln_x - 0.5 * p * self.g.value(y).ln()
    }
}

// ---------------------------------------------------------------------------
// expression grammar

impl fmt::Display for RegularlyVaryingFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.clamp != DEFAULT_CLAMP {
            write!(f, "clamp({},", self.clamp)?;
            write_form(&self.form, f)?;
            write!(f, ")")
        } else {
            write_form(&self.form, f)
        }
    }
}

fn write_form(form: &Form, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match form {
        Form::Const(c) => write!(f, "const:{c}"),
        Form::Pow(r) => write!(f, "pow:{r}"),
        Form::ShiftedPow(r) => write!(f, "spow:{r}"),
        Form::LogPow(k) => write!(f, "logpow:{k}"),
        Form::Product(fs) => {
            write!(f, "mul(")?;
            for (i, g) in fs.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write_form(g, f)?;
            }
            write!(f, ")")
        }
        Form::Table { xs, ys, index } => {
            write!(f, "tab(rho={index}")?;
            for (x, y) in xs.iter().zip(ys) {
                write!(f, ";{x}:{y}")?;
            }
            write!(f, ")")
        }
        Form::Integrated { base, b } => write!(f, "int({b},{base})"),
    }
}

impl From<RegularlyVaryingFn> for String {
    fn from(g: RegularlyVaryingFn) -> Self {
        g.to_string()
    }
}

impl TryFrom<String> for RegularlyVaryingFn {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for RegularlyVaryingFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_expr(s.trim()).map_err(|reason| match reason {
            Error::Parse { .. } => reason,
            other => Error::Parse { input: s.to_string(), reason: other.to_string() },
        })
    }
}

fn parse_err(input: &str, reason: impl Into<String>) -> Error {
    Error::Parse { input: input.to_string(), reason: reason.into() }
}

fn parse_number(input: &str, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| parse_err(input, format!("`{s}` is not a number")))
}

/// Split at top-level commas (outside parentheses).
pub(crate) fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                parts.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

fn parse_expr(s: &str) -> Result<RegularlyVaryingFn> {
    if let Some(args) = call_args(s, "mul") {
        let factors =
            split_top_level(args, ',').into_iter().map(|a| parse_expr(a.trim())).collect::<Result<Vec<_>>>()?;
        return RegularlyVaryingFn::product(factors);
    }
    if let Some(args) = call_args(s, "clamp") {
        let parts = split_top_level(args, ',');
        if parts.len() != 2 {
            return Err(parse_err(s, "clamp takes (A, expr)"));
        }
        let a = parse_number(s, parts[0])?;
        return parse_expr(parts[1].trim())?.with_clamp(a);
    }
    if let Some(args) = call_args(s, "int") {
        let parts = split_top_level(args, ',');
        if parts.len() != 2 {
            return Err(parse_err(s, "int takes (B, expr)"));
        }
        let b = parse_number(s, parts[0])?;
        return build_ell(&parse_expr(parts[1].trim())?, b);
    }
    if let Some(args) = call_args(s, "tab") {
        let mut parts = args.split(';');
        let head = parts.next().unwrap_or("").trim();
        let index = head
            .strip_prefix("rho=")
            .ok_or_else(|| parse_err(s, "tab must start with rho=INDEX"))
            .and_then(|v| parse_number(s, v))?;
        let points = parts
            .map(|p| {
                let (x, y) = p.split_once(':').ok_or_else(|| parse_err(s, "table points are x:y"))?;
                Ok((parse_number(s, x)?, parse_number(s, y)?))
            })
            .collect::<Result<Vec<_>>>()?;
        return RegularlyVaryingFn::tabulated(&points, index);
    }
    let (name, value) =
        s.split_once(':').ok_or_else(|| parse_err(s, "expected NAME:VALUE, mul(..), clamp(..), int(..) or tab(..)"))?;
    let v = parse_number(s, value)?;
    match name.trim() {
        "const" => RegularlyVaryingFn::constant(v),
        "pow" => RegularlyVaryingFn::power(v),
        "spow" => RegularlyVaryingFn::shifted_power(v),
        "logpow" => RegularlyVaryingFn::log_power(v),
        other => Err(parse_err(s, format!("unknown form `{other}`"))),
    }
}

fn call_args<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    s.strip_prefix(name)?.trim_start().strip_prefix('(')?.strip_suffix(')')
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(s: &str) -> RegularlyVaryingFn {
        s.parse().unwrap()
    }

    #[test]
    fn eval_g_examples() {
        assert_eq!(g("const:1").eval(5.0).unwrap(), 1.0);
        assert_eq!(g("pow:1").eval(4.0).unwrap(), 4.0);
        assert_eq!(g("spow:2").eval(3.0).unwrap(), 16.0);
    }

    #[test]
    fn eval_g_rejects_bad_arguments() {
        assert!(g("pow:1").eval(f64::NAN).is_err());
        assert!(g("pow:1").eval(f64::INFINITY).is_err());
        assert!(g("pow:1").eval(-1.0).is_err());
    }

    #[test]
    fn power_form_is_clamped_below_anchor() {
        assert_eq!(g("pow:2").eval(0.25).unwrap(), 1.0);
        assert_eq!(g("pow:-2").eval(0.0).unwrap(), 1.0);
        let moved = g("clamp(4,pow:1)");
        assert_eq!(moved.eval(1.0).unwrap(), 4.0);
        assert_eq!(moved.eval(9.0).unwrap(), 9.0);
    }

    #[test]
    fn constant_must_be_positive() {
        assert!("const:0".parse::<RegularlyVaryingFn>().is_err());
        assert!("const:-2".parse::<RegularlyVaryingFn>().is_err());
    }

    #[test]
    fn indices_add_over_products() {
        assert_eq!(g("mul(pow:2,spow:-0.5,logpow:3,const:2)").index(), 1.5);
        assert_eq!(g("int(2,logpow:1)").index(), 0.0);
    }

    #[test]
    fn expression_display_roundtrips() {
        for s in [
            "const:2.5",
            "pow:-2",
            "mul(spow:2,logpow:-1)",
            "clamp(3,pow:0.5)",
            "int(2,logpow:1)",
            "tab(rho=0.5;1:1;10:3;100:9.5)",
        ] {
            let parsed = g(s);
            assert_eq!(parsed.to_string(), s);
            assert_eq!(g(&parsed.to_string()), parsed);
        }
    }

    #[test]
    fn parse_errors_name_the_input() {
        let err = "wobble:3".parse::<RegularlyVaryingFn>().unwrap_err();
        assert!(err.to_string().contains("wobble"));
        assert!("pow:abc".parse::<RegularlyVaryingFn>().is_err());
        assert!("mul()".parse::<RegularlyVaryingFn>().is_err());
    }

    #[test]
    fn regular_variation_ratio_at_large_x() {
        for s in ["const:3", "pow:1", "pow:-2", "spow:2", "spow:-0.7", "mul(const:2,spow:0.5)"] {
            let f = g(s);
            for lambda in [2.0, 10.0] {
                let x = 2f64.powi(30);
                let ratio = f.eval(lambda * x).unwrap() / f.eval(x).unwrap();
                let target = lambda.powf(f.index());
                assert!((ratio / target - 1.0).abs() <= 0.01, "{s}: λ={lambda} ratio {ratio} vs {target}");
            }
        }
    }

    #[test]
    fn log_factors_vary_regularly_at_logarithmic_speed() {
        // (log(e+λx)/log(e+x))^κ ≈ (1 + ln λ / ln x)^κ: the error shrinks like
        // 1/ln x, so the 1% level is only reached near x = λ^{100|κ|}
        for (s, kappa) in [("logpow:2", 2.0_f64), ("mul(pow:1.5,logpow:-1)", -1.0)] {
            let f = g(s);
            for lambda in [2.0_f64, 10.0] {
                let mut last = f64::INFINITY;
                for e in [10, 20, 30] {
                    let x = 2f64.powi(e);
                    let ratio = f.eval(lambda * x).unwrap() / f.eval(x).unwrap() / lambda.powf(f.index());
                    let err = (ratio - 1.0).abs();
                    assert!(err < last, "{s}: not shrinking at 2^{e}");
                    let u = lambda.ln() / x.ln();
                    assert!(err <= 1.1 * ((1.0 + u).powf(kappa.abs()) - 1.0), "{s}: {err} at 2^{e}");
                    last = err;
                }
                let x = lambda.powf(100.0 * kappa.abs() + 10.0).min(1e300);
                let ratio = f.eval(lambda * x).unwrap() / f.eval(x).unwrap() / lambda.powf(f.index());
                assert!((ratio - 1.0).abs() <= 0.01, "{s}: λ={lambda} far-tail ratio {ratio}");
            }
        }
    }

    #[test]
    fn derivative_matches_forward_difference() {
        // the forward-difference bias is about h|g''|/(2|g'|) = 0.5e-6·|ρ-1| for powers,
        // so only forms with |ρ-1| < 2 can meet 1e-6 on the whole grid
        for s in ["const:2", "pow:1", "pow:2", "pow:0.5", "spow:2", "spow:-0.5", "logpow:2", "mul(pow:1,logpow:1)"] {
            let f = g(s);
            assert!(f.has_derivative());
            let mut x = 1.0_f64;
            while x <= 1e6 {
                let h = 1e-6 * x.max(1.0);
                let fd = (f.eval(x + h).unwrap() - f.eval(x).unwrap()) / h;
                let d = f.derivative(x).unwrap();
                let err = if d == 0.0 { fd.abs() } else { (fd / d - 1.0).abs() };
                assert!(err <= 1e-6, "{s} at {x}: fd {fd} vs {d}");
                x *= 3.7;
            }
        }
        assert!(!g("tab(rho=0;1:1;2:2)").has_derivative());
    }

    #[test]
    fn monotone_on_tail_when_index_nonzero() {
        for s in ["pow:1", "pow:-2", "spow:2", "spow:-1", "mul(pow:1,logpow:-1)"] {
            let f = g(s);
            let sign = f.index().signum();
            let grid: Vec<f64> = (0..200).map(|i| 10.0 * 1.1f64.powi(i)).collect();
            for w in grid.windows(2) {
                let d = f.eval(w[1]).unwrap() - f.eval(w[0]).unwrap();
                assert!(d * sign > 0.0, "{s} not monotone at {}", w[0]);
            }
        }
    }

    #[test]
    fn table_interpolates_in_log_log_space() {
        let t = g("tab(rho=1;1:1;100:100)");
        assert!((t.eval(10.0).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(t.eval(0.5).unwrap(), 1.0);
        assert!((t.eval(1000.0).unwrap() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn ell_from_constant_is_logarithm() {
        let ell = build_ell(&g("const:1"), 2.0).unwrap();
        assert!((ell.eval(32.0).unwrap() - 5.0).abs() < 1e-14);
        assert!((ell.eval(2.0).unwrap() - 1.0).abs() < 1e-14);
        // frozen at ℓ(b) below b
        assert!((ell.eval(0.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ell_rejects_bad_base_and_index() {
        assert!(build_ell(&g("const:1"), 1.0).is_err());
        assert!(build_ell(&g("const:1"), 0.5).is_err());
        assert!(build_ell(&g("pow:1"), 2.0).is_err());
    }

    #[test]
    fn ell_is_slowly_varying() {
        let ell = build_ell(&g("logpow:1"), 2.0).unwrap();
        // ℓ(2^n) grows like n²/2, so ℓ(2x)/ℓ(x) - 1 ≈ 2/log₂x
        let x = 2f64.powi(1000);
        let ratio = ell.eval(2.0 * x).unwrap() / ell.eval(x).unwrap();
        assert!((ratio - 1.0).abs() < 0.003, "{ratio}");
    }

    #[test]
    fn phi_examples() {
        let phi0 = PhiFunction::new(0.0, g("pow:1")).unwrap();
        assert_eq!(phi0.eval(0.5).unwrap(), 0.5);
        assert!((phi0.eval(0.25).unwrap() - 0.176_776_695_296_636_9).abs() < 1e-15);
        let half = PhiFunction::new(0.5, g("const:1")).unwrap();
        assert!((half.eval(0.5).unwrap() - 0.25).abs() < 1e-16);
        assert_eq!(phi0.eval(0.0).unwrap(), 0.0);
        assert_eq!(half.eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn phi_domain_is_half_open_unit_interval() {
        let phi = PhiFunction::new(0.3, g("spow:1")).unwrap();
        assert!(phi.eval(1.0).is_err());
        assert!(phi.eval(-0.1).is_err());
        assert!(phi.eval(1.0 - 1e-15).unwrap() > 0.0);
        assert!(PhiFunction::new(1.0, g("const:1")).is_err());
        assert!(PhiFunction::new(-0.1, g("const:1")).is_err());
    }

    #[test]
    fn phi_vanishes_at_zero_from_above() {
        let phi = PhiFunction::new(0.7, g("spow:2")).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..=60 {
            let v = phi.eval(2f64.powi(-k)).unwrap();
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
        assert!(prev < 1e-50);
    }

    #[test]
    fn phi_with_constant_g_has_closed_form() {
        for (q, c) in [(0.0, 2.0), (0.5, 3.0), (0.7, 0.25)] {
            let phi = PhiFunction::new(q, RegularlyVaryingFn::constant(c).unwrap()).unwrap();
            let p = 1.0 / (1.0 - q);
            for x in [1e-9_f64, 0.01, 0.3, 0.9] {
                let exact = x.powf(p) * c.powf(-0.5 * p);
                assert!((phi.eval(x).unwrap() / exact - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn phi_log_value_matches_direct() {
        let phi = PhiFunction::new(0.7, g("spow:-2")).unwrap();
        for x in [1e-30_f64, 1e-5, 0.2, 0.8] {
            assert!((phi.ln_value(x.ln()) - phi.eval(x).unwrap().ln()).abs() < 1e-12);
        }
        let phi0 = PhiFunction::new(0.0, g("pow:1")).unwrap();
        // x = 2^-2000 underflows but ln Φ is still available
        let ln_x = -2000.0 * LN_2;
        let expected = ln_x - 0.5 * 2000f64.ln();
        assert!((phi0.ln_value(ln_x) - expected).abs() < 1e-9);
    }

    #[test]
    fn serde_uses_expression_strings() {
        let f = g("mul(const:2,spow:2)");
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, "\"mul(const:2,spow:2)\"");
        assert_eq!(serde_json::from_str::<RegularlyVaryingFn>(&json).unwrap(), f);
    }
}
