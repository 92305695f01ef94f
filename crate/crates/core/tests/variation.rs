use std::f64::consts::{FRAC_1_SQRT_2, PI};

use phivar::dyadic::SignField;
use phivar::scheme::CoefficientScheme;
use phivar::variation::{
    classify_power_variation, convergence_study, variation_binomial, variation_enumerate, variation_mc, Engine, Gauge,
};
use proptest::prelude::*;

fn gauge(s: &str) -> Gauge {
    s.parse().unwrap()
}

fn prescribed_half() -> CoefficientScheme {
    CoefficientScheme::prescribed_q(0.5, "const:1".parse().unwrap()).unwrap()
}

#[test]
fn geometric_quadratic_variation_is_exact() {
    let geo = CoefficientScheme::geometric(FRAC_1_SQRT_2).unwrap();
    let v = variation_enumerate(&geo, &SignField::Classic, &Gauge::Power(2.0), 20, 1.0).unwrap();
    assert!((v.value - (1.0 - 2f64.powi(-20))).abs() < 1e-12);
}

#[test]
fn binomial_phi0_at_large_n() {
    let v = variation_binomial(&CoefficientScheme::takagi(), &SignField::Classic, &gauge("phi:q=0,g=pow:1"), 10_000)
        .unwrap();
    assert!((v.value - (2.0 / PI).sqrt()).abs() < 0.01);
    // stays finite well past the point where 2^{-n} underflows
    let far =
        variation_binomial(&CoefficientScheme::takagi(), &SignField::Classic, &gauge("phi:q=0,g=pow:1"), 1_000_000)
            .unwrap();
    assert!((far.value - (2.0 / PI).sqrt()).abs() < 1e-3, "{}", far.value);
}

#[test]
fn mc_is_unbiased_over_seeds() {
    let scheme = prescribed_half();
    let g = gauge("phi:q=0.5,g=const:1");
    let exact = variation_enumerate(&scheme, &SignField::Classic, &g, 16, 1.0).unwrap().value;
    let runs: Vec<_> =
        (0..20).map(|s| variation_mc(&scheme, &SignField::Classic, &g, 16, 1.0, 20_000, s).unwrap()).collect();
    let mean = runs.iter().map(|r| r.value).sum::<f64>() / 20.0;
    let pooled = (runs.iter().map(|r| r.stderr * r.stderr).sum::<f64>()).sqrt() / 20.0;
    assert!((mean - exact).abs() <= 3.0 * pooled, "{mean} vs {exact} (pooled {pooled})");
}

#[test]
fn mc_matches_enumeration_at_level_twenty() {
    let takagi = CoefficientScheme::takagi();
    let g = gauge("phi:q=0,g=pow:1");
    let e = variation_enumerate(&takagi, &SignField::Classic, &g, 20, 1.0).unwrap().value;
    let m = variation_mc(&takagi, &SignField::Classic, &g, 20, 1.0, 1_000_000, 99).unwrap();
    assert!((m.value - e).abs() <= 4.0 * m.stderr);
}

#[test]
fn partial_sums_are_monotone_and_additive_in_t() {
    let scheme = prescribed_half();
    let g = gauge("phi:q=0.5,g=spow:1");
    let n = 10;
    let full = variation_enumerate(&scheme, &SignField::Classic, &g, n, 1.0).unwrap().value;
    let mut prev = 0.0;
    for i in 0..=64 {
        let t = i as f64 / 64.0;
        let v = variation_enumerate(&scheme, &SignField::Classic, &g, n, t).unwrap().value;
        assert!(v >= prev);
        prev = v;
    }
    // V_{n,1} = V_{n,t} + Σ_{k > K} Φ(|Δ_k|)
    let t = 0.3;
    let part = variation_enumerate(&scheme, &SignField::Classic, &g, n, t).unwrap().value;
    let k_last = (t * 1024.0f64).floor() as u64;
    let rest: f64 = (k_last + 1..1024)
        .map(|k| g.value(phivar::dyadic::increment(&scheme, &SignField::Classic, n, k).unwrap().abs()))
        .sum();
    assert!((part + rest - full).abs() < 1e-12 * full);
}

#[test]
fn study_toward_root_two_over_pi() {
    let levels: Vec<u32> = (4..=14).map(|e| 1 << e).collect();
    let study = convergence_study(
        &CoefficientScheme::takagi(),
        &SignField::Classic,
        &gauge("phi:q=0,g=pow:1"),
        &levels,
        1.0,
        Engine::Binomial,
        0,
        0,
    )
    .unwrap();
    let devs: Vec<f64> = study.rows.iter().map(|r| r.deviation.unwrap().abs()).collect();
    assert!(devs[devs.len() - 5..].windows(2).all(|w| w[1] < w[0]), "{devs:?}");
    assert_eq!(study.rows[0].limit, Some((2.0 / PI).sqrt()));
}

#[test]
fn study_of_prescribed_quadratic_variation() {
    let levels: Vec<u32> = (4..=20).collect();
    let study = convergence_study(
        &prescribed_half(),
        &SignField::Classic,
        &Gauge::Power(2.0),
        &levels,
        1.0,
        Engine::Enumerate,
        0,
        0,
    )
    .unwrap();
    for row in &study.rows {
        assert!((row.report.value - (1.0 - 2f64.powi(-(row.report.n as i32)))).abs() < 1e-12);
        assert_eq!(row.limit, Some(1.0));
    }
}

#[test]
fn phi_half_variation_is_linear_in_t() {
    let g = gauge("phi:q=0.5,g=const:1");
    let study =
        convergence_study(&prescribed_half(), &SignField::Classic, &g, &[20], 0.5, Engine::Enumerate, 0, 0).unwrap();
    let row = &study.rows[0];
    assert_eq!(row.limit, Some(0.5));
    assert!(row.deviation.unwrap().abs() < 1e-5, "{:?}", row);
}

#[test]
fn khintchine_ratios_stay_in_a_band() {
    let schemes = [
        CoefficientScheme::takagi(),
        CoefficientScheme::geometric(0.3).unwrap(),
        CoefficientScheme::geometric(FRAC_1_SQRT_2).unwrap(),
        CoefficientScheme::explicit(vec![1.0, 0.25]).unwrap(),
        CoefficientScheme::faber(),
        CoefficientScheme::prescribed_q(0.7, "spow:2".parse().unwrap()).unwrap(),
        CoefficientScheme::prescribed_q0("pow:1".parse().unwrap()).unwrap(),
    ];
    for scheme in &schemes {
        for p in [1.0, 2.0, 10.0 / 3.0] {
            let c = classify_power_variation(scheme, p, 8..=24).unwrap();
            let spread = c.khintchine_spread();
            assert!(spread < 3.0, "{} p={p}: spread {spread}", scheme.label());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn binomial_equals_enumeration(n in 1u32..=14, p in 1.0f64..4.0) {
        let takagi = CoefficientScheme::takagi();
        for g in [Gauge::Power(p), gauge("phi:q=0,g=pow:1"), gauge("phi:q=0.4,g=spow:1")] {
            let e = variation_enumerate(&takagi, &SignField::Classic, &g, n, 1.0).unwrap().value;
            let b = variation_binomial(&takagi, &SignField::Classic, &g, n).unwrap().value;
            prop_assert!((e - b).abs() <= 1e-12 * e.abs().max(1e-300), "{} vs {}", e, b);
        }
    }

    #[test]
    fn variation_is_nonnegative(a in -0.9f64..0.9, n in 1u32..12, t in 0.0f64..=1.0, seed in any::<u64>()) {
        let scheme = CoefficientScheme::geometric(a).unwrap();
        let v = variation_enumerate(&scheme, &SignField::random(seed), &Gauge::Power(1.5), n, t).unwrap();
        prop_assert!(v.value >= 0.0);
        if t == 0.0 {
            prop_assert_eq!(v.value, 0.0);
        }
    }
}
