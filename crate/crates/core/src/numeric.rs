//! Small numerical helpers shared by the engines: compensated summation,
//! adaptive quadrature and the standard normal distribution.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of a slice.
pub fn sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<Accumulator>().value()
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        // odd Kronrod indices coincide with the Gauss nodes
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `[a, b]` to the
/// requested relative tolerance. Returns `(integral, error_estimate)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let mut segments = vec![(a, b, gauss_kronrod(&f, a, b))];
    for _ in 0..10_000 {
        let total: f64 = segments.iter().map(|s| s.2 .0).sum();
        let err: f64 = segments.iter().map(|s| s.2 .1).sum();
        if err <= rel_tol * total.abs() || err < f64::MIN_POSITIVE {
            return (total, err);
        }
        let (worst, _) = segments.iter().enumerate().max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1)).expect("nonempty");
        let (lo, hi, _) = segments.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        segments.push((lo, mid, gauss_kronrod(&f, lo, mid)));
        segments.push((mid, hi, gauss_kronrod(&f, mid, hi)));
    }
    let total = segments.iter().map(|s| s.2 .0).sum();
    let err = segments.iter().map(|s| s.2 .1).sum();
    (total, err)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF via `erfc`, accurate to a few ulps in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Inverse of [`normal_cdf`] by safeguarded Newton iteration.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    let mut x = 0.0;
    for _ in 0..200 {
        let fx = normal_cdf(x) - p;
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = fx / normal_pdf(x);
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

/// `∫ Φ(x) dx = x Φ(x) + φ(x)` (antiderivative of the normal CDF).
fn cdf_antiderivative(x: f64) -> f64 {
    x * normal_cdf(x) + normal_pdf(x)
}

/// `∫_a^b |c - Φ(x)| dx` for a constant level `c` and finite `a <= b`.
fn abs_gap_integral(c: f64, a: f64, b: f64) -> f64 {
    let below = |lo: f64, hi: f64| c * (hi - lo) - (cdf_antiderivative(hi) - cdf_antiderivative(lo));
    let cross = normal_quantile(c);
    if cross <= a {
        -below(a, b)
    } else if cross >= b {
        below(a, b)
    } else {
        below(a, cross) - below(cross, b)
    }
}

/// Wasserstein-1 distance between a discrete law and the standard normal,
/// computed as `∫ |F(x) - Φ(x)| dx` exactly on each interval between atoms.
///
/// `atoms` holds `(location, mass)` pairs; masses must sum to one.
pub fn wasserstein1_to_normal(atoms: &mut [(f64, f64)]) -> f64 {
    atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
    if atoms.is_empty() {
        return f64::NAN;
    }
    let first = atoms[0].0;
    let last = atoms[atoms.len() - 1].0;
    let mut acc = Accumulator::new();
    // left tail: F = 0, ∫_{-∞}^{first} Φ
    acc.add(cdf_antiderivative(first));
    let mut level = 0.0;
    let mut i = 0;
    while i < atoms.len() {
        let x = atoms[i].0;
        while i < atoms.len() && atoms[i].0 == x {
            level += atoms[i].1;
            i += 1;
        }
        if i < atoms.len() {
            acc.add(abs_gap_integral(level.min(1.0), x, atoms[i].0));
        }
    }
    // right tail: F = 1, ∫_{last}^{∞} (1 - Φ) = φ(last) - last·Φ(-last)
    acc.add(normal_pdf(last) - last * normal_cdf(-last));
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let values = [1.0, 1e-16, 1e-16, -1.0];
        assert_eq!(sum(&values), 2e-16);
    }

    #[test]
    fn gauss_kronrod_integrates_polynomials_exactly() {
        let (v, _) = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, 1e-12);
        assert!((v - (64.0 / 6.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn adaptive_quadrature_handles_log_integrand() {
        let (v, _) = integrate(|x: f64| x.ln(), 1.0, 1e3, 1e-12);
        let exact = 1e3 * 1e3_f64.ln() - 1e3 + 1.0;
        assert!((v / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-5.0) - 2.866_515_718_791_939e-7).abs() < 1e-20);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [1e-12, 0.01, 0.3, 0.5, 0.77, 0.999_999] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) / p - 1.0).abs() < 1e-12, "p = {p}");
        }
    }

    #[test]
    fn w1_of_point_mass_at_zero_is_mean_abs_normal() {
        // W1(δ_0, N(0,1)) = E|N| = sqrt(2/π)
        let mut atoms = [(0.0, 1.0)];
        let w = wasserstein1_to_normal(&mut atoms);
        assert!((w - (2.0 / PI).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn w1_of_shifted_point_mass() {
        // W1(δ_a, N(0,1)) = E|N - a| = 2φ(a) + a(2Φ(a) - 1)
        let a = 0.7;
        let mut atoms = [(a, 1.0)];
        let w = wasserstein1_to_normal(&mut atoms);
        let exact = 2.0 * normal_pdf(a) + a * (2.0 * normal_cdf(a) - 1.0);
        assert!((w - exact).abs() < 1e-14);
    }
}
