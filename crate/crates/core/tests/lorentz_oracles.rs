use nssl_core::lorentz::{
    dual_time_exponent, lorentz_rs_norm, lp_norm, tail_split_bound, weak_norm, DistributionCurve, TailRegime,
    TimeSeries,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cells(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.gen_range(-3.0..3.0);
            // heavy tail on a few cells
            let v = if rng.gen_bool(0.05) { v * 50.0 } else { v };
            (v, rng.gen_range(0.0..1.0))
        })
        .collect()
}

#[test]
fn chebyshev_on_random_lattices() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..2000 {
        let n = rng.gen_range(1..60);
        let cells = random_cells(&mut rng, n);
        let curve = DistributionCurve::from_weighted(cells.iter().copied()).unwrap();
        for p in [2.0, 3.0, 4.0, 6.0] {
            let w = curve.weak_norm(p).unwrap();
            let s = lp_norm(cells.iter().copied(), p).unwrap();
            assert!(w <= s * (1.0 + 1e-12), "p={p}: {w} > {s}");
        }
    }
}

#[test]
fn monotone_in_region() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let cells = random_cells(&mut rng, 40);
        let small = DistributionCurve::from_weighted(cells[..20].iter().copied()).unwrap();
        let large = DistributionCurve::from_weighted(cells.iter().copied()).unwrap();
        for p in [1.0, 3.0, 7.5, f64::INFINITY] {
            assert!(small.weak_norm(p).unwrap() <= large.weak_norm(p).unwrap() * (1.0 + 1e-12));
        }
    }
}

/// `(r ∫ σ^{s-1} m(σ)^{s/r} dσ)^{1/s}` by midpoint quadrature in σ.
fn lorentz_by_quadrature(curve: &DistributionCurve, r: f64, s: f64, n: usize) -> f64 {
    let top = curve.max_value();
    let d = top / n as f64;
    let sum: f64 = (0..n)
        .map(|i| {
            let sig = (i as f64 + 0.5) * d;
            sig.powf(s - 1.0) * curve.measure_above(sig).powf(s / r)
        })
        .sum();
    (r * sum * d).powf(1.0 / s)
}

#[test]
fn lorentz_closed_form_matches_quadrature_on_random_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let durations: Vec<f64> = (0..6).map(|_| rng.gen_range(0.05..0.5)).collect();
        let values: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..4.0)).collect();
        let ts = TimeSeries::from_steps(0.0, &durations, values).unwrap();
        let curve = ts.distribution().unwrap();
        for (r, s) in [(2.0, 1.0), (3.0, 2.0), (1.5, 4.0)] {
            let exact = lorentz_rs_norm(&ts, r, s).unwrap();
            let quad = lorentz_by_quadrature(&curve, r, s, 200_000);
            assert!((exact - quad).abs() < 1e-4 * exact, "{exact} vs {quad}");
        }
    }
}

fn regime_for(p: f64) -> TailRegime {
    TailRegime::for_exponent(p).unwrap()
}

#[test]
fn tail_split_bounds_hold_on_random_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let ps = [2.0, 2.4, 2.9, 3.0, 4.0, 6.0, 7.0, 12.0, f64::INFINITY];
    let mut violations = 0;
    for trial in 0..1000 {
        let p = ps[trial % ps.len()];
        let q = dual_time_exponent(p).unwrap();
        let r: f64 = rng.gen_range(0.1..2.0);
        let m: f64 = rng.gen_range(0.1..3.0);
        let n = rng.gen_range(1..40);
        let mut durations: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = durations.iter().sum();
        durations.iter_mut().for_each(|d| *d *= r * r / total);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0f64).powf(-0.7)).collect();
        let raw = TimeSeries::from_steps(-r * r, &durations, values).unwrap();
        let w = weak_norm(&raw, q).unwrap();
        let ts = raw.scaled(m / w);
        assert!((weak_norm(&ts, q).unwrap() - m).abs() < 1e-9 * m);
        let regime = regime_for(p);
        let integral = ts.integral_of_power(regime.integrand_exponent(p));
        let bound = tail_split_bound(p, r, m, regime).unwrap();
        if integral > bound * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn tail_split_closed_forms_for_constants() {
    // f ≡ M on [t0 - r², t0]: at p = 2 the weak L^∞ norm is M and ∫ f^6 = r² M^6,
    // which is the printed bound itself
    let (r, m) = (0.7f64, 1.3f64);
    assert!((tail_split_bound(2.0, r, m, TailRegime::Low).unwrap() - r * r * m.powi(6)).abs() < 1e-12);
    for p in [3.0, 4.5, 6.0] {
        let b = tail_split_bound(p, r, m, TailRegime::Mid).unwrap();
        assert!((b - 2.0 * r * m.powf(p / (p - 2.0))).abs() < 1e-12);
    }
    let ts = TimeSeries::from_steps(-r * r, &[r * r], vec![m]).unwrap();
    assert!((ts.integral_of_power(6.0) - tail_split_bound(2.0, r, m, TailRegime::Low).unwrap()).abs() < 1e-12);
    assert!(tail_split_bound(2.5, r, m, TailRegime::Mid).is_err());
}

proptest! {
    #[test]
    fn chebyshev_and_homogeneity(
        cells in prop::collection::vec((-100.0f64..100.0, 0.0f64..2.0), 1..50),
        lam in -5.0f64..5.0,
        p in prop_oneof![Just(2.0), Just(3.0), Just(4.0), Just(6.0), 1.0f64..20.0],
    ) {
        let curve = DistributionCurve::from_weighted(cells.iter().copied());
        prop_assume!(curve.is_ok());
        let curve = curve.unwrap();
        let w = curve.weak_norm(p).unwrap();
        prop_assert!(w <= lp_norm(cells.iter().copied(), p).unwrap() * (1.0 + 1e-12));
        let scaled = DistributionCurve::from_weighted(cells.iter().map(|&(v, m)| (lam * v, m))).unwrap();
        prop_assert!((scaled.weak_norm(p).unwrap() - lam.abs() * w).abs() <= 1e-12 * (1.0 + w * lam.abs()));
    }
}
