//! Scale-invariant quantities over parabolic cylinders and the parabolic
//! rescaling `u_λ(t, x) = λ u(λ² t, λ x)`, `P_λ = λ² P(λ² t, λ x)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{check_gradient_axes, gradient_sq_at, BallStencil, CylinderSpec, Grid, SampledField};
use crate::math::{self, pow};

/// `A`, `B`, `C`, `D` on one cylinder.
///
/// * `A = sup_s r^{-1} ∫_{B_r} |u(s)|^2`
/// * `B = r^{-1} ∬_{Q_r} |∇u|^2`
/// * `C = r^{-2} ∬_{Q_r} |u|^3`
/// * `D = r^{-2} ∬_{Q_r} |P|^{3/2}` (absent without pressure)
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub t0: f64,
    pub x0: [f64; 3],
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: Option<f64>,
    pub samples_used: usize,
    /// The cylinder's time range reached outside the field's interval and
    /// was truncated.
    pub clipped: bool,
}

impl InvariantReport {
    pub fn c_pow_7_6(&self) -> f64 {
        pow(self.c, 7.0 / 6.0)
    }

    pub fn d_pow_8_7(&self) -> f64 {
        self.d.map_or(0.0, |d| pow(d, 8.0 / 7.0))
    }

    /// `G = A + B + C^{7/6} + D^{8/7}`, the quantity iterated across scales.
    pub fn g(&self) -> f64 {
        self.a + self.b + self.c_pow_7_6() + self.d_pow_8_7()
    }
}

#[derive(Default, Clone, Copy)]
struct SliceIntegrals {
    u2: f64,
    grad2: f64,
    u3: f64,
    p32: f64,
}

fn slice_integrals(field: &SampledField, st: &BallStencil, kt: usize) -> SliceIntegrals {
    let pr = field.pressure_slice(kt);
    let mut acc = SliceIntegrals::default();
    for &(idx, w) in st.entries() {
        let u = field.velocity_at(kt, idx);
        let s2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
        acc.u2 += w * s2;
        acc.u3 += w * s2 * math::sqrt(s2);
        acc.grad2 += w * gradient_sq_at(field, kt, idx);
        if let Some(p) = pr {
            let a = math::abs(p[idx]);
            acc.p32 += w * a * math::sqrt(a);
        }
    }
    acc
}

/// `∫_lo^hi` of the piecewise-linear interpolant through `(times[k], vals[k])`.
pub(crate) fn integrate_linear(times: &[f64], vals: &[f64], lo: f64, hi: f64) -> f64 {
    let mut total = 0.0;
    for k in 0..times.len().saturating_sub(1) {
        let (ta, tb) = (times[k], times[k + 1]);
        let a = ta.max(lo);
        let b = tb.min(hi);
        if b <= a {
            continue;
        }
        let at = |t: f64| vals[k] + (vals[k + 1] - vals[k]) * (t - ta) / (tb - ta);
        total += 0.5 * (b - a) * (at(a) + at(b));
    }
    total
}

pub fn invariants(field: &SampledField, cyl: &CylinderSpec) -> Result<InvariantReport> {
    let grid = field.grid();
    check_gradient_axes(grid)?;
    let tol = 1e-9 * grid.dt();
    let (ta, tb) = grid.time;
    let lo = cyl.t_start().max(ta);
    let hi = cyl.t0.min(tb);
    let clipped = cyl.t_start() < ta - tol || cyl.t0 > tb + tol;
    let contained = grid.time_indices_within(lo, hi);
    match contained.len() {
        0 => return Err(Error::Domain(alloc::format!("no time samples in [{lo}, {hi}]"))),
        1 => return Err(Error::InsufficientSamples { needed: 2, found: 1 }),
        _ => {}
    }
    // Samples bracketing [lo, hi] so the interpolant covers the whole range.
    let first = if contained.start > 0 && grid.time_at(contained.start) > lo + tol {
        contained.start - 1
    } else {
        contained.start
    };
    let last = if contained.end < grid.nt && grid.time_at(contained.end - 1) < hi - tol {
        contained.end
    } else {
        contained.end - 1
    };

    let st = BallStencil::new(grid, &cyl.ball())?;
    let mut times = Vec::new();
    let mut slices = Vec::new();
    for kt in first..=last {
        times.push(grid.time_at(kt));
        slices.push(slice_integrals(field, &st, kt));
    }
    let r = cyl.radius;
    let a = (first..=last)
        .zip(&slices)
        .filter(|(kt, _)| contained.contains(kt))
        .map(|(_, s)| s.u2)
        .fold(0.0, f64::max)
        / r;
    let series = |f: fn(&SliceIntegrals) -> f64| -> f64 {
        let vals: Vec<f64> = slices.iter().map(f).collect();
        integrate_linear(&times, &vals, lo, hi)
    };
    let b = series(|s| s.grad2) / r;
    let c = series(|s| s.u3) / (r * r);
    let d = field.has_pressure().then(|| series(|s| s.p32) / (r * r));
    Ok(InvariantReport {
        t0: cyl.t0,
        x0: cyl.center,
        r,
        a,
        b,
        c,
        d,
        samples_used: contained.len(),
        clipped,
    })
}

/// Parabolic rescaling onto a grid with the same dimensions covering
/// `box / λ` and `time / λ²`. Space is interpolated trilinearly, time takes
/// the nearest sample.
pub fn rescale(field: &SampledField, lambda: f64) -> Result<SampledField> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(alloc::format!("λ must be positive, got {lambda}")));
    }
    let g = field.grid();
    let l2 = lambda * lambda;
    let target = Grid::new(
        g.dims,
        g.nt,
        g.lower.map(|v| v / lambda),
        g.upper.map(|v| v / lambda),
        (g.time.0 / l2, g.time.1 / l2),
        g.periodic,
    )?;
    let with_p = field.has_pressure();
    let dt = g.dt();
    SampledField::from_fn(target, with_p, |t, x| {
        let k = math::round((l2 * t - g.time.0) / dt).clamp(0.0, (g.nt - 1) as f64) as usize;
        let (u, p) = field.sample_trilinear(k, x.map(|v| v * lambda));
        (u.map(|v| v * lambda), p * l2)
    })
}
