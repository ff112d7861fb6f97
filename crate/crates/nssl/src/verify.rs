//! The property-oracle suite behind `nssl verify`.

use std::f64::consts::PI;

use nssl_core::detector::{DEFAULT_C_CAL, DEFAULT_C_EMB};
use nssl_core::energy::{energy_residual, pressure_decay_bound};
use nssl_core::invariants::{invariants, rescale};
use nssl_core::lorentz::{dual_time_exponent, tail_split_bound, weak_norm, TailRegime, TimeSeries};
use nssl_core::morrey::{embedding_check, morrey_sup, DEFAULT_LEVEL_SET_FLOOR_CELLS};
use nssl_core::synth::{generate, GeneratorSpec, Profile, RadialShape};
use nssl_core::{CylinderSpec, Error, Grid, SampledField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::spectral::{exact_energy_identity, with_spectral_pressure};

pub const EMBEDDING_EXPONENTS: [f64; 5] = [2.0, 3.0, 4.0, 6.0, 10.0];
/// `(4π)^{1/2} / (4π/3)^{1/3}`, the `p = 2` embedding ratio of `c/|x|`.
pub const RADIAL_P2_RATIO: f64 = 2.199;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub c_emb: f64,
    pub c_cal: f64,
    pub random_fields: usize,
    /// Lattice size of the energy-residual run.
    pub energy_n: usize,
    /// Extra field added to the embedding and scaling suites.
    pub input: Option<SampledField>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 0, c_emb: DEFAULT_C_EMB, c_cal: DEFAULT_C_CAL, random_fields: 100, energy_n: 64, input: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub measured: Vec<(String, f64)>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
    pub c_emb_measured: f64,
    pub c_cal_measured: f64,
    pub passed: bool,
}

fn periodic_box(n: usize, nt: usize, time: (f64, f64)) -> Result<Grid, Error> {
    Grid::cube(n, -PI, PI, nt, time, true)
}

/// Random divergence-free corpus member `i`.
pub fn corpus_field(seed: u64, i: usize) -> Result<SampledField, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let profile = Profile::RandomDivfree {
        seed: rng.gen(),
        k_max: rng.gen_range(2..=4),
        slope: rng.gen_range(0.5..2.0),
        amplitude: rng.gen_range(0.2..3.0),
        decay: false,
    };
    generate(&GeneratorSpec { profile, grid: periodic_box(24, 2, (0.0, 1.0))? })
}

pub fn embedding_suite(opts: &VerifyOptions) -> Result<(SuiteResult, f64), Error> {
    let grid = Grid::cube(129, -1.1, 1.1, 2, (0.0, 1.0), false)?;
    let radial =
        generate(&GeneratorSpec { profile: Profile::InverseRadial { c: 1.0, shape: RadialShape::Radial }, grid })?;
    let r2 = embedding_check(&radial, 0.0, [0.0; 3], 1.0, 2.0, DEFAULT_LEVEL_SET_FLOOR_CELLS)?.ratio;
    let radial_ok = (r2 / RADIAL_P2_RATIO - 1.0).abs() < 0.03;
    let mut worst = r2;
    let mut measured = vec![("radial_p2_ratio".to_string(), r2)];
    // for p > 2 both sides are infinite on c/|x|; the lattice ratio there
    // only measures the discretisation, so it is reported but not bounded
    for &p in &EMBEDDING_EXPONENTS[1..] {
        let e = embedding_check(&radial, 0.0, [0.0; 3], 1.0, p, DEFAULT_LEVEL_SET_FLOOR_CELLS)?;
        measured.push((format!("radial_p{p}_ratio_unbounded"), e.ratio));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random_worst = 0.0f64;
    let mut fields: Vec<SampledField> = Vec::new();
    for i in 0..opts.random_fields {
        fields.push(corpus_field(opts.seed, i)?);
    }
    fields.extend(opts.input.clone());
    for f in &fields {
        let g = f.grid();
        let reach = (0..3).map(|a| 0.25 * g.extent(a)).fold(f64::INFINITY, f64::min);
        let x0 = [0, 1, 2].map(|a| {
            let mid = 0.5 * (g.lower[a] + g.upper[a]);
            mid + rng.gen_range(-0.5..0.5) * reach
        });
        for &p in &EMBEDDING_EXPONENTS {
            // smooth fields: exact step-function weak norm
            let e = embedding_check(f, g.time.0, x0, reach, p, 0.0)?;
            log::debug!("random field p={p}: ratio {}", e.ratio);
            random_worst = random_worst.max(e.ratio);
        }
    }
    measured.push(("random_max_ratio".into(), random_worst));
    worst = worst.max(random_worst);
    measured.push(("c_emb_measured".into(), worst));
    let passed = radial_ok && worst <= opts.c_emb;
    let detail = format!(
        "radial p=2 ratio {r2:.4} (expected {RADIAL_P2_RATIO} ± 3%), max ratio {worst:.4} over {} fields vs C_emb = {}",
        fields.len() + 1,
        opts.c_emb
    );
    Ok((SuiteResult { name: "embedding", passed, measured, detail }, worst))
}

fn regime_for(p: f64) -> TailRegime {
    TailRegime::for_exponent(p).expect("p >= 2")
}

pub fn tail_split_suite(opts: &VerifyOptions) -> Result<SuiteResult, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let ps = [2.0, 2.5, 3.0, 4.0, 6.0, 8.0, 20.0, f64::INFINITY];
    let trials = 1000;
    let mut violations = 0;
    let mut tightest = 0.0f64;
    for trial in 0..trials {
        let p = ps[trial % ps.len()];
        let q = dual_time_exponent(p)?;
        let r: f64 = rng.gen_range(0.1..2.0);
        let m: f64 = rng.gen_range(0.1..3.0);
        let n = rng.gen_range(1..40);
        let mut durations: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = durations.iter().sum();
        durations.iter_mut().for_each(|d| *d *= r * r / total);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-3..1.0f64).powf(-0.7)).collect();
        let raw = TimeSeries::from_steps(-r * r, &durations, values)?;
        let ts = raw.scaled(m / weak_norm(&raw, q)?);
        let regime = regime_for(p);
        let integral = ts.integral_of_power(regime.integrand_exponent(p));
        let bound = tail_split_bound(p, r, m, regime)?;
        tightest = tightest.max(integral / bound);
        if integral > bound * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    Ok(SuiteResult {
        name: "tail_split",
        passed: violations == 0,
        measured: vec![("violations".into(), violations as f64), ("max_integral_over_bound".into(), tightest)],
        detail: format!("{violations} violations in {trials} randomized step series"),
    })
}

pub fn energy_suite(opts: &VerifyOptions) -> Result<SuiteResult, Error> {
    let spec = GeneratorSpec {
        profile: Profile::BeltramiAbc { a: 1.0, b: 1.0, c: 1.0 },
        grid: periodic_box(opts.energy_n, 33, (0.0, 2.0))?,
    };
    let field = with_spectral_pressure(generate(&spec)?)?;
    let x0 = [0.3, 0.1, -0.2];
    let ok = energy_residual(&field, 2.0, x0, 0.5, 1.0)?;
    let control = field.modulated(|t| 1.0 / (2.02 - t).sqrt());
    let bad = energy_residual(&control, 2.0, x0, 0.5, 1.0)?;
    let identity = exact_energy_identity(&GeneratorSpec { grid: periodic_box(opts.energy_n, 33, (0.0, 2.0))?, ..spec }, 16)?;
    let passed = ok.relative() >= -1e-3 && bad.relative() < -1e-2 && (identity.ratio() - 1.0).abs() <= 1e-3;
    Ok(SuiteResult {
        name: "energy",
        passed,
        measured: vec![
            ("beltrami_relative_residual".into(), ok.relative()),
            ("control_relative_residual".into(), bad.relative()),
            ("energy_identity_ratio".into(), identity.ratio()),
        ],
        detail: format!(
            "Beltrami {:.3e} (>= -1e-3), control {:.3e} (< -1e-2), global identity ratio {:.6}",
            ok.relative(),
            bad.relative(),
            identity.ratio()
        ),
    })
}

/// Largest relative deviation of `A, B, C, D` and the Morrey supremum
/// between `field` and its rescalings.
pub fn scaling_deviation(field: &SampledField, t0: f64, x0: [f64; 3], r: f64) -> Result<f64, Error> {
    let base = invariants(field, &CylinderSpec::new(t0, x0, r)?)?;
    let m0 = morrey_sup(field, t0, x0, r, 3.0, false)?.supremum;
    let mut worst = 0.0f64;
    let rel = |a: f64, b: f64| if a == b { 0.0 } else { ((a - b) / b).abs() };
    for lam in [2.0f64, 4.0] {
        let g = rescale(field, lam)?;
        let (t, x, rr) = (t0 / (lam * lam), x0.map(|v| v / lam), r / lam);
        let rep = invariants(&g, &CylinderSpec::new(t, x, rr)?)?;
        worst = worst.max(rel(rep.a, base.a)).max(rel(rep.b, base.b)).max(rel(rep.c, base.c));
        if let (Some(d1), Some(d0)) = (rep.d, base.d) {
            worst = worst.max(rel(d1, d0));
        }
        let m1 = morrey_sup(&g, t, x, rr, 3.0, false)?.supremum;
        worst = worst.max(rel(m1, m0 * lam.powf(1.0 / 3.0)));
    }
    Ok(worst)
}

pub fn scaling_suite(opts: &VerifyOptions) -> Result<SuiteResult, Error> {
    let (a, b, c) = (1.0, 0.7, 0.4);
    let spec = GeneratorSpec { profile: Profile::BeltramiAbc { a, b, c }, grid: periodic_box(48, 17, (0.0, 1.0))? };
    let field = generate(&spec)?;
    let mut worst = scaling_deviation(&field, 1.0, [0.2, -0.3, 0.1], 1.0)?;
    let mut measured = vec![("beltrami_rescale_max_relative_deviation".to_string(), worst)];
    // u_λ evaluated analytically on a lattice unrelated to the original one
    let base = invariants(&field, &CylinderSpec::new(1.0, [0.0; 3], 1.2)?)?;
    let mut resampled = 0.0f64;
    for lam in [2.0f64, 4.0] {
        let grid = Grid::cube(40, -PI / lam, PI / lam, 9, (0.0, 1.0 / (lam * lam)), false)?;
        let scaled = SampledField::from_fn(grid, true, |t, x| {
            let (u, p) = nssl_core::synth::beltrami_abc(a, b, c, lam * lam * t, x.map(|v| v * lam));
            (u.map(|v| v * lam), p * lam * lam)
        })?;
        let rep = invariants(&scaled, &CylinderSpec::new(1.0 / (lam * lam), [0.0; 3], 1.2 / lam)?)?;
        for (x, y) in [(rep.a, base.a), (rep.b, base.b), (rep.c, base.c), (rep.d.unwrap_or(0.0), base.d.unwrap_or(0.0))] {
            resampled = resampled.max(((x - y) / y).abs());
        }
    }
    measured.push(("beltrami_resampled_max_relative_deviation".into(), resampled));
    worst = worst.max(resampled);
    if let Some(f) = &opts.input {
        let g = f.grid();
        let x0 = [0, 1, 2].map(|a| 0.5 * (g.lower[a] + g.upper[a]));
        let r = (0..3).map(|a| 0.25 * g.extent(a)).fold((g.time.1 - g.time.0).sqrt(), f64::min);
        let d = scaling_deviation(f, g.time.1, x0, r)?;
        measured.push(("input_max_relative_deviation".into(), d));
        worst = worst.max(d);
    }
    Ok(SuiteResult {
        name: "scaling",
        passed: worst < 0.05,
        measured,
        detail: format!("max relative deviation {worst:.3e} over λ ∈ {{2, 4}} (< 5%)"),
    })
}

/// Largest `C_cal` the pressure decay estimate needs on the corpus.
pub fn pressure_suite(opts: &VerifyOptions) -> Result<(SuiteResult, f64), Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(2));
    let mut needed = 0.0f64;
    let beltrami = generate(&GeneratorSpec {
        profile: Profile::BeltramiAbc { a: 1.0, b: 1.0, c: 1.0 },
        grid: periodic_box(32, 65, (0.0, 2.0))?,
    })?;
    // harmonic pressure with no velocity: the bound needs C_cal >= 1 exactly
    let still = generate(&GeneratorSpec {
        profile: Profile::Constant { velocity: [0.0; 3], pressure: -1.5 },
        grid: periodic_box(32, 65, (0.0, 2.0))?,
    })?;
    let mut fields = vec![(beltrami, 2.0), (still, 2.0)];
    for _ in 0..4 {
        let profile = Profile::RandomDivfree {
            seed: rng.gen(),
            k_max: 3,
            slope: rng.gen_range(0.5..2.0),
            amplitude: 1.0,
            decay: true,
        };
        let f = with_spectral_pressure(generate(&GeneratorSpec { profile, grid: periodic_box(24, 33, (0.0, 1.0))? })?)?;
        fields.push((f, 1.0));
    }
    for (f, t0) in &fields {
        for _ in 0..4 {
            let x0 = [0, 1, 2].map(|_| rng.gen_range(-1.5..1.5));
            for (r, rho) in [(0.25, 1.0), (0.5, 1.0), (0.2, 0.8)] {
                let pd = pressure_decay_bound(f, *t0, x0, r, rho, opts.c_cal)?;
                needed = needed.max(pd.required_constant(opts.c_cal));
            }
        }
    }
    Ok((
        SuiteResult {
            name: "pressure_decay",
            passed: needed <= opts.c_cal,
            measured: vec![("c_cal_measured".into(), needed)],
            detail: format!("largest required C_cal {needed:.4} vs configured {}", opts.c_cal),
        },
        needed,
    ))
}

pub fn run_verify(opts: &VerifyOptions) -> Result<VerifyReport, Error> {
    let (emb, c_emb) = embedding_suite(opts)?;
    log::info!("embedding: {}", emb.detail);
    let tail = tail_split_suite(opts)?;
    log::info!("tail_split: {}", tail.detail);
    let energy = energy_suite(opts)?;
    log::info!("energy: {}", energy.detail);
    let scaling = scaling_suite(opts)?;
    log::info!("scaling: {}", scaling.detail);
    let (pressure, c_cal) = pressure_suite(opts)?;
    log::info!("pressure_decay: {}", pressure.detail);
    let suites = vec![emb, tail, energy, scaling, pressure];
    let passed = suites.iter().all(|s| s.passed);
    Ok(VerifyReport { suites, c_emb_measured: c_emb, c_cal_measured: c_cal, passed })
}
