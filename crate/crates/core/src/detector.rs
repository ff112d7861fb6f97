//! Decision procedures: the cubic-term decay bound, the iteration across
//! scales, epsilon-regularity verdicts, Wolf's threshold test and the
//! concentration-rate evaluators.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::field::{BallStencil, CylinderSpec, SampledField};
use crate::invariants::{invariants, InvariantReport};
use crate::lorentz::{weak_norm, DistributionCurve, TailRegime, TimeSeries};
use crate::math::{self, pow};
use crate::morrey::{level_set_floor_measure, resolution_floor, MorreyLadder};

/// Embedding constant: largest Morrey/weak-Lorentz ratio on the synthetic
/// corpus (2.168, analytic radial value 2.199), rounded up.
pub const DEFAULT_C_EMB: f64 = 2.25;
/// Stand-in for the absolute constant of the decay estimates: largest
/// constant the pressure decay bound needs on the synthetic corpus (0.2506,
/// set by a harmonic pressure at `r = ρ/2`), rounded up.
pub const DEFAULT_C_CAL: f64 = 0.26;
pub const DEFAULT_DELTA: f64 = 1e-2;
pub const DEFAULT_EPS_STAR: f64 = 1e-3;
/// Fewest approach samples a concentration proxy is computed from.
pub const MIN_APPROACH_SAMPLES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub delta: f64,
    pub eps_star: f64,
    pub delta_star: f64,
    pub c_cal: f64,
    /// Threshold of the `||u||_{L³(Q_r)} <= r^{2/3} ε` test.
    pub wolf_eps: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            eps_star: DEFAULT_EPS_STAR,
            delta_star: DEFAULT_DELTA / DEFAULT_C_EMB,
            c_cal: DEFAULT_C_CAL,
            wolf_eps: math::cbrt(DEFAULT_EPS_STAR),
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta", self.delta),
            ("eps_star", self.eps_star),
            ("delta_star", self.delta_star),
            ("c_cal", self.c_cal),
            ("wolf_eps", self.wolf_eps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!(Parameter, "threshold {name} must be positive, got {v}");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    MorreyOscillation,
    MorreyPlain,
    Wolf,
    ConcentrationP3,
    ConcentrationGeneral,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::MorreyOscillation => "thm11_oscillation",
            Criterion::MorreyPlain => "thm11_plain",
            Criterion::Wolf => "wolf",
            Criterion::ConcentrationP3 => "concentration_p3",
            Criterion::ConcentrationGeneral => "concentration_general",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    RegularIndicated,
    Inconclusive,
    ConcentrationDetected,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::RegularIndicated => "regular_indicated",
            Verdict::Inconclusive => "inconclusive",
            Verdict::ConcentrationDetected => "concentration_detected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionVerdict {
    pub t0: f64,
    pub x0: [f64; 3],
    pub criterion: Criterion,
    pub measured: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub trace: Vec<(String, f64)>,
}

fn push(trace: &mut Vec<(String, f64)>, name: &str, v: f64) {
    trace.push((name.to_string(), v));
}

/// Mean-oscillation or plain Morrey bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Oscillation,
    Plain,
}

/// Right-hand side of the decay estimate for `C(u, r)` from the quantities
/// at scale `ρ` and the Lorentz-Morrey size `M`:
///
/// * `p ∈ [2, 3)`: `C_cal (r/ρ) C(ρ) + C_cal (ρ/r)² B^{(9-3p)/(6-p)} M^{3p/(6-p)}`
/// * `p ∈ [3, 6]`: `C_cal (r/ρ) C(ρ) + C_cal (ρ/r) A^{(p-3)/(p-2)} M^{p/(p-2)}`
/// * `p ∈ (6, ∞]`: `C_cal (r/ρ) C(ρ) + C_cal (ρ/r)^{3/2} A^{3/4} M^{3/2}`
pub fn c_decay_rhs(p: f64, r: f64, rho: f64, at_rho: &InvariantReport, m: f64, c_cal: f64) -> Result<f64> {
    if p.is_nan() || p < 2.0 {
        bail!(Parameter, "exponent must be >= 2, got {p}");
    }
    if !(r > 0.0 && r < rho) {
        bail!(Parameter, "need 0 < r < ρ, got r={r}, ρ={rho}");
    }
    if !(m >= 0.0 && c_cal > 0.0) {
        bail!(Parameter, "need M >= 0 and C_cal > 0");
    }
    let k = rho / r;
    let second = match TailRegime::for_exponent(p)? {
        TailRegime::Low => k * k * pow(at_rho.b, (9.0 - 3.0 * p) / (6.0 - p)) * pow(m, 3.0 * p / (6.0 - p)),
        TailRegime::Mid => k * pow(at_rho.a, (p - 3.0) / (p - 2.0)) * pow(m, p / (p - 2.0)),
        TailRegime::High => pow(k, 1.5) * pow(at_rho.a, 0.75) * pow(m, 1.5),
    };
    Ok(c_cal * (r / rho) * at_rho.c + c_cal * second)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub theta: f64,
    pub c_cal: f64,
    pub forcing: f64,
    /// `G_0, G_1, ..., G_{k_max}`
    pub g_sequence: Vec<f64>,
    /// `G_k <= θ^k G_0 + forcing/(1-θ)` held at every step.
    pub bound_holds: bool,
    /// First `k` with `G_k <= 2 forcing/(1-θ)`.
    pub first_within: Option<usize>,
}

pub fn iteration_theta(c_cal: f64) -> f64 {
    (0.5f64).min(1.0 / pow(c_cal, 7.0))
}

/// Runs `G_k = θ G_{k-1} + forcing` with `θ = min(1/2, C_cal^{-7})`.
pub fn iterate_decay(g0: f64, c_cal: f64, forcing: f64, k_max: usize) -> Result<IterationState> {
    if !(g0 >= 0.0 && g0.is_finite()) || !(forcing >= 0.0 && forcing.is_finite()) {
        bail!(Parameter, "G_0 and forcing must be finite and non-negative");
    }
    if !(c_cal >= 1.0 && c_cal.is_finite()) {
        bail!(Parameter, "C_cal must be >= 1, got {c_cal}");
    }
    let theta = iteration_theta(c_cal);
    let fixed = forcing / (1.0 - theta);
    let mut g_sequence = Vec::with_capacity(k_max + 1);
    g_sequence.push(g0);
    let mut bound_holds = true;
    let mut first_within = (g0 <= 2.0 * fixed).then_some(0);
    let mut theta_k = 1.0;
    for k in 1..=k_max {
        let g = theta * g_sequence[k - 1] + forcing;
        theta_k *= theta;
        // exact in real arithmetic; allow the rounding of the two evaluation orders
        let bound = theta_k * g0 + fixed;
        bound_holds &= g <= bound * (1.0 + 4.0 * (k + 1) as f64 * f64::EPSILON);
        if first_within.is_none() && g <= 2.0 * fixed {
            first_within = Some(k);
        }
        g_sequence.push(g);
    }
    Ok(IterationState { theta, c_cal, forcing, g_sequence, bound_holds, first_within })
}

/// Dual time exponent `q` with `1/q + 1/p = 1/2`; `p = 2` gives `q = ∞`.
fn time_exponent(p: f64) -> f64 {
    if p == 2.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        2.0
    } else {
        2.0 * p / (p - 2.0)
    }
}

/// `|| sup_{η<=r0} (η^{-1} ∫_{B_η} |u - c_η|^p)^{1/p} ||_{L^{q,∞}(t0 - r0², t0)}`.
pub fn lorentz_morrey_norm(
    field: &SampledField,
    t0: f64,
    x0: [f64; 3],
    r0: f64,
    p: f64,
    variant: Variant,
) -> Result<f64> {
    let grid = field.grid();
    let lo = t0 - r0 * r0;
    let tol = 1e-9 * grid.dt();
    if lo < grid.time.0 - tol || t0 > grid.time.1 + tol {
        bail!(Domain, "cylinder [{lo}, {t0}] leaves the time interval");
    }
    let range = grid.time_indices_within(lo, t0);
    if range.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, found: 0 });
    }
    let ladder = MorreyLadder::new(grid, x0, r0)?;
    let mut times = Vec::with_capacity(range.len());
    let mut values = Vec::with_capacity(range.len());
    for kt in range {
        times.push(grid.time_at(kt));
        values.push(ladder.evaluate(field, kt, p, variant == Variant::Oscillation)?.supremum);
    }
    weak_norm(&TimeSeries::with_span(times, values, (lo, t0))?, time_exponent(p))
}

/// `||u||_{L³(Q_r)} <= r^{2/3} ε`, i.e. `C(u, r)^{1/3} <= ε`.
pub fn wolf_test(field: &SampledField, cyl: &CylinderSpec, wolf_eps: f64) -> Result<DetectionVerdict> {
    let rep = invariants(field, cyl)?;
    let measured = math::cbrt(rep.c);
    let mut trace = Vec::new();
    push(&mut trace, "C", rep.c);
    push(&mut trace, "r", rep.r);
    Ok(DetectionVerdict {
        t0: cyl.t0,
        x0: cyl.center,
        criterion: Criterion::Wolf,
        measured,
        threshold: wolf_eps,
        verdict: if measured <= wolf_eps { Verdict::RegularIndicated } else { Verdict::Inconclusive },
        trace,
    })
}

/// Epsilon-regularity at `z0 = (t0, x0)` over the cylinder of radius `r0`.
///
/// The Lorentz-Morrey norm is compared with `δ`; if small, dyadic radii
/// below `r0` are searched for `C(u, r*) <= ε*`, and the verdict is regular
/// only if that scale also passes Wolf's test. Anything unresolved is
/// inconclusive.
pub fn epsilon_regularity(
    field: &SampledField,
    t0: f64,
    x0: [f64; 3],
    r0: f64,
    p: f64,
    variant: Variant,
    th: &Thresholds,
) -> Result<DetectionVerdict> {
    if p.is_nan() || p < 2.0 {
        bail!(Parameter, "exponent must be >= 2, got {p}");
    }
    th.validate()?;
    let criterion = match variant {
        Variant::Oscillation => Criterion::MorreyOscillation,
        Variant::Plain => Criterion::MorreyPlain,
    };
    let measured = lorentz_morrey_norm(field, t0, x0, r0, p, variant)?;
    let mut trace = Vec::new();
    push(&mut trace, "p", p);
    push(&mut trace, "q", time_exponent(p));
    push(&mut trace, "lorentz_morrey_norm", measured);
    push(&mut trace, "delta", th.delta);
    let mut out = DetectionVerdict {
        t0,
        x0,
        criterion,
        measured,
        threshold: th.delta,
        verdict: Verdict::Inconclusive,
        trace: Vec::new(),
    };
    if measured > th.delta {
        out.trace = trace;
        return Ok(out);
    }
    let floor = resolution_floor(field.grid());
    let mut r = r0;
    let mut found = None;
    while r >= floor * (1.0 - 1e-12) {
        let rep = match invariants(field, &CylinderSpec::new(t0, x0, r)?) {
            Ok(rep) => rep,
            Err(Error::InsufficientSamples { .. }) => break,
            Err(e) => return Err(e),
        };
        push(&mut trace, "C(u,r)", rep.c);
        if rep.c <= th.eps_star {
            found = Some(rep);
            break;
        }
        r *= 0.5;
    }
    match found {
        None => push(&mut trace, "floor_reached", r),
        Some(rep) => {
            let wolf = math::cbrt(rep.c);
            push(&mut trace, "r_star", rep.r);
            push(&mut trace, "wolf_lhs", wolf);
            push(&mut trace, "wolf_eps", th.wolf_eps);
            if wolf <= th.wolf_eps {
                out.verdict = Verdict::RegularIndicated;
            }
        }
    }
    out.trace = trace;
    Ok(out)
}

/// Approach samples `t_k < t0`, oldest first.
fn approach_samples(field: &SampledField, t0: f64) -> Result<Vec<usize>> {
    let grid = field.grid();
    let tol = 1e-9 * grid.dt();
    let ks: Vec<usize> = (0..grid.nt).filter(|&k| grid.time_at(k) < t0 - tol).collect();
    if ks.len() < MIN_APPROACH_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_APPROACH_SAMPLES, found: ks.len() });
    }
    Ok(ks)
}

/// Max over the final quarter of the series, the limsup proxy.
fn final_quarter_max(values: &[f64]) -> f64 {
    let n = values.len();
    let take = n.div_ceil(4).max(1);
    values[n - take..].iter().copied().fold(0.0, f64::max)
}

/// `q(t) = (t0 - t)^{1/μ} r^{2/ν - 3/p} ||u(t)||_{L^{p,∞}(B_r(x0))}` at every
/// approach sample, with `1/μ = 1/2 - 1/ν`. Returns `(t, q(t))` pairs.
pub fn concentration_series(
    field: &SampledField,
    t0: f64,
    x0: [f64; 3],
    r: f64,
    p: f64,
    nu: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(p > 3.0) {
        bail!(Parameter, "exponent must lie in (3, ∞], got {p}");
    }
    let nu_max = if p.is_infinite() { f64::INFINITY } else { 2.0 * p / 3.0 };
    if !(nu >= 2.0 && nu <= nu_max) {
        bail!(Parameter, "ν must lie in [2, 2p/3], got {nu}");
    }
    let inv_mu = 0.5 - 1.0 / nu;
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let weight = pow(r, 2.0 / nu - 3.0 * inv_p);
    let ks = approach_samples(field, t0)?;
    let st = BallStencil::new(field.grid(), &crate::field::BallSpec::new(x0, r)?)?;
    let mut out = Vec::with_capacity(ks.len());
    for kt in ks {
        let t = field.grid().time_at(kt);
        let speed = field.speed_slice(kt);
        let w = DistributionCurve::from_weighted(st.weighted(&speed))?.weak_norm(p)?;
        out.push((t, pow(t0 - t, inv_mu) * weight * w));
    }
    Ok(out)
}

pub fn concentration_rate(
    field: &SampledField,
    t0: f64,
    x0: [f64; 3],
    r: f64,
    p: f64,
    nu: f64,
    delta_star: f64,
) -> Result<DetectionVerdict> {
    let series = concentration_series(field, t0, x0, r, p, nu)?;
    let values: Vec<f64> = series.iter().map(|s| s.1).collect();
    let proxy = final_quarter_max(&values);
    let mut trace = Vec::new();
    push(&mut trace, "p", p);
    push(&mut trace, "nu", nu);
    push(&mut trace, "inv_mu", 0.5 - 1.0 / nu);
    push(&mut trace, "samples", values.len() as f64);
    push(&mut trace, "q_last", values[values.len() - 1]);
    Ok(concentration_verdict(t0, x0, Criterion::ConcentrationGeneral, proxy, delta_star, trace))
}

fn concentration_verdict(
    t0: f64,
    x0: [f64; 3],
    criterion: Criterion,
    proxy: f64,
    delta_star: f64,
    trace: Vec<(String, f64)>,
) -> DetectionVerdict {
    DetectionVerdict {
        t0,
        x0,
        criterion,
        measured: proxy,
        threshold: delta_star,
        verdict: if proxy > delta_star { Verdict::ConcentrationDetected } else { Verdict::RegularIndicated },
        trace,
    }
}

/// `∫_B |u - u_B|²` summed over components.
pub fn oscillation_energy(field: &SampledField, kt: usize, st: &BallStencil) -> f64 {
    let m = st.mean_velocity(field, kt);
    st.integrate_with(|i| {
        let u = field.velocity_at(kt, i);
        (0..3).map(|c| (u[c] - m[c]) * (u[c] - m[c])).sum()
    })
}

/// `||u(t) - u(t)_{x0,r}||_{L^{3,∞}(B_r)}` at every approach sample.
/// `level_floor_cells` sets the level-set floor of the weak norm (`0` for
/// the exact step-function supremum).
pub fn oscillation_series(
    field: &SampledField,
    t0: f64,
    x0: [f64; 3],
    r: f64,
    level_floor_cells: f64,
) -> Result<Vec<(f64, f64)>> {
    let floor = level_set_floor_measure(field.grid(), level_floor_cells);
    let ks = approach_samples(field, t0)?;
    let st = BallStencil::new(field.grid(), &crate::field::BallSpec::new(x0, r)?)?;
    let mut out = Vec::with_capacity(ks.len());
    for kt in ks {
        let m = st.mean_velocity(field, kt);
        let dev: Vec<(f64, f64)> = st
            .entries()
            .iter()
            .map(|&(i, w)| {
                let u = field.velocity_at(kt, i);
                (math::norm3([u[0] - m[0], u[1] - m[1], u[2] - m[2]]), w)
            })
            .collect();
        out.push((field.grid().time_at(kt), DistributionCurve::from_weighted(dev)?.weak_norm_resolved(3.0, floor)?));
    }
    Ok(out)
}

pub fn concentration_p3(
    field: &SampledField,
    t0: f64,
    x0: [f64; 3],
    r: f64,
    delta_star: f64,
    level_floor_cells: f64,
) -> Result<DetectionVerdict> {
    let series = oscillation_series(field, t0, x0, r, level_floor_cells)?;
    let values: Vec<f64> = series.iter().map(|s| s.1).collect();
    let proxy = final_quarter_max(&values);
    let last_k = field.grid().time_index_at_or_below(series[series.len() - 1].0)?;
    let chain = MorreyLadder::new(field.grid(), x0, r)?.evaluate(field, last_k, 2.0, true)?.supremum;
    let mut trace = Vec::new();
    push(&mut trace, "samples", values.len() as f64);
    push(&mut trace, "weak_osc_last", values[values.len() - 1]);
    push(&mut trace, "morrey_osc_last", chain);
    Ok(concentration_verdict(t0, x0, Criterion::ConcentrationP3, proxy, delta_star, trace))
}
