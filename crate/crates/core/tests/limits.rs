use phivar::dyadic::SignField;
use phivar::limits::{
    clt_distance, coupling_distance, moment_z, sample_z, total_variation_expectation, MomentMethod, TvMethod,
};
use phivar::scheme::CoefficientScheme;
use phivar::variation::{variation_enumerate, Gauge};

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[test]
fn sampled_z_is_centered_with_unit_variance() {
    let s = sample_z(0.5, 40, 1_000_000, 42).unwrap();
    let (m, sd) = mean_sd(&s.values);
    assert!(m.abs() <= 4.0 * sd / 1e3, "{m}");
    let sq: Vec<f64> = s.values.iter().map(|z| z * z).collect();
    let (m2, sd2) = mean_sd(&sq);
    assert!((m2 - 1.0).abs() <= 4.0 * sd2 / 1e3, "{m2}");
}

#[test]
fn second_moment_is_one_for_every_q() {
    for q in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let e = moment_z(q, 2.0, MomentMethod::MonteCarlo { samples: 200_000, seed: 3 }).unwrap();
        assert!(e.contains(1.0), "q={q}: {e:?}");
        let x = moment_z(q, 2.0, MomentMethod::ExactEnum { depth: 16 }).unwrap();
        assert!(x.contains(1.0), "q={q}: {x:?}");
    }
}

#[test]
fn exact_moment_intervals_are_nested() {
    for r in [1.0, 2.0, 10.0 / 3.0] {
        let e: Vec<_> =
            [10, 15, 20].iter().map(|&d| moment_z(0.5, r, MomentMethod::ExactEnum { depth: d }).unwrap()).collect();
        for w in e.windows(2) {
            assert!(w[0].error_low <= w[1].error_low && w[1].error_high <= w[0].error_high, "r={r}");
            assert!(w[1].width() < w[0].width());
        }
    }
}

#[test]
fn coupling_shrinks_along_n() {
    for q in [0.3, 0.5, 0.7] {
        let s = CoefficientScheme::prescribed_q(q, "const:1".parse().unwrap()).unwrap();
        let d: Vec<f64> = (1..=30).map(|n| coupling_distance(&s, q, n).unwrap().exact_l2).collect();
        assert!(d.windows(2).all(|w| w[1] <= w[0]), "q={q}");
        // the untouched tail alone contributes 2^{-qn}
        let floor = 2f64.powf(-q * 30.0);
        assert!(d[29] >= floor && d[29] < 1.01 * floor, "q={q}: {}", d[29]);
        if floor < 1e-4 {
            assert!(d[29] < 1e-4);
        }
    }
}

#[test]
fn clt_rate_is_inverse_square_root() {
    let t = CoefficientScheme::takagi();
    for n in [256, 1024] {
        let ratio = clt_distance(&t, 4 * n, (0, 0)).unwrap().w1 / clt_distance(&t, n, (0, 0)).unwrap().w1;
        assert!((0.4..=0.6).contains(&ratio), "n={n}: {ratio}");
    }
}

#[test]
fn clt_for_unequal_coefficients_uses_exact_law_then_sampling() {
    let s = CoefficientScheme::prescribed_q0("logpow:2".parse().unwrap()).unwrap();
    let small = clt_distance(&s, 12, (0, 0)).unwrap();
    assert_eq!(small.method, "exact-enum");
    let big = clt_distance(&s, 64, (200_000, 5)).unwrap();
    assert!(big.method.starts_with("mc"));
    assert!(big.w1 < 0.1, "{}", big.w1);
}

#[test]
fn total_variation_of_a_bounded_geometric_scheme() {
    let s = CoefficientScheme::geometric(0.25).unwrap();
    let e = total_variation_expectation(&s, TvMethod::ExactEnum { depth: 20 }).unwrap();
    assert!(e.width() < 1e-4);
    let v = variation_enumerate(&s, &SignField::Classic, &Gauge::Power(1.0), 20, 1.0).unwrap().value;
    assert!((v - e.value).abs() < 1e-3, "{v} vs {}", e.value);
    let mc = total_variation_expectation(&s, TvMethod::MonteCarlo { samples: 200_000, seed: 1 }).unwrap();
    assert!(mc.overlaps(&e));
}
