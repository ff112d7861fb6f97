//! Morrey-type suprema `sup_η (η^{-1} ∫_{B_η} |u|^p)^{1/p}` over a dyadic
//! ladder of radii, their mean-oscillation variant, and the weak-Lorentz
//! embedding check.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::field::{BallSpec, BallStencil, Grid, SampledField};
use crate::lorentz::DistributionCurve;
use crate::math::{self, abs_pow, pow, PI};

/// Smallest admissible ball spans this many cells across (so `η >= h`).
pub const MIN_CELLS_ACROSS: f64 = 2.0;

/// Default level-set floor, in cells of radius, for weak norms of sampled
/// singular profiles. Level sets smaller than a ball of this radius are
/// dominated by lattice counting and left out of the supremum.
pub const DEFAULT_LEVEL_SET_FLOOR_CELLS: f64 = 8.0;

/// Smallest radius a ball may have on `grid`.
pub fn resolution_floor(grid: &Grid) -> f64 {
    0.5 * MIN_CELLS_ACROSS * grid.max_spacing()
}

/// Measure of a ball of `cells` grid cells radius.
pub fn level_set_floor_measure(grid: &Grid, cells: f64) -> f64 {
    let rad = cells * grid.max_spacing();
    4.0 / 3.0 * PI * rad * rad * rad
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorreyProfile {
    /// Decreasing radii `r, r/2, r/4, ...` down to the resolution floor.
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub supremum: f64,
}

/// Ball stencils for the dyadic radii below `r`, reusable across time samples.
#[derive(Debug, Clone)]
pub struct MorreyLadder {
    stencils: Vec<BallStencil>,
}

impl MorreyLadder {
    pub fn new(grid: &Grid, center: [f64; 3], r: f64) -> Result<Self> {
        let floor = resolution_floor(grid);
        if !(r > 0.0) || r < floor * (1.0 - 1e-12) {
            bail!(Resolution, "radius {r} below the resolution floor {floor}");
        }
        let mut stencils = Vec::new();
        let mut eta = r;
        while eta >= floor * (1.0 - 1e-12) {
            stencils.push(BallStencil::new(grid, &BallSpec::new(center, eta)?)?);
            eta *= 0.5;
        }
        Ok(Self { stencils })
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        self.stencils.iter().map(|s| s.ball.radius)
    }

    pub fn outer(&self) -> &BallStencil {
        &self.stencils[0]
    }

    /// Evaluates the bracket at every radius for time sample `kt`. With
    /// `oscillation` the ball mean `u_{x0,η}` is subtracted first.
    pub fn evaluate(&self, field: &SampledField, kt: usize, p: f64, oscillation: bool) -> Result<MorreyProfile> {
        if p.is_nan() || p < 1.0 {
            bail!(Parameter, "Morrey exponent must be >= 1, got {p}");
        }
        let mut radii = Vec::with_capacity(self.stencils.len());
        let mut values = Vec::with_capacity(self.stencils.len());
        for st in &self.stencils {
            let shift = if oscillation { st.mean_velocity(field, kt) } else { [0.0; 3] };
            let dev = |idx: usize| {
                let u = field.velocity_at(kt, idx);
                math::norm3([u[0] - shift[0], u[1] - shift[1], u[2] - shift[2]])
            };
            let eta = st.ball.radius;
            let v = if p.is_infinite() {
                st.entries().iter().map(|&(i, _)| dev(i)).fold(0.0, f64::max)
            } else {
                pow(st.integrate_with(|i| abs_pow(dev(i), p)) / eta, 1.0 / p)
            };
            radii.push(eta);
            values.push(v);
        }
        let supremum = values.iter().copied().fold(0.0, f64::max);
        Ok(MorreyProfile { radii, values, supremum })
    }
}

/// Morrey profile of `u(t)` around `x0` for radii `η <= r`.
pub fn morrey_sup(
    field: &SampledField,
    t: f64,
    x0: [f64; 3],
    r: f64,
    p: f64,
    oscillation: bool,
) -> Result<MorreyProfile> {
    let kt = field.grid().time_index_at_or_below(t)?;
    MorreyLadder::new(field.grid(), x0, r)?.evaluate(field, kt, p, oscillation)
}

/// Both sides of the Morrey/weak-Lorentz embedding at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingCheck {
    pub lhs: f64,
    pub rhs_weak_norm: f64,
    /// `lhs / rhs`; `0` when both vanish, `+∞` when only `rhs` does.
    pub ratio: f64,
    pub unbounded: bool,
}

/// Compares `sup_{η<=r} (η^{-1} ∫_{B_η} |u|^p)^{1/p}` with
/// `‖u‖_{L^{3p/2,∞}(B_r)}`. `level_floor_cells` sets the level-set floor of
/// the weak norm (`0` for the exact step-function supremum).
pub fn embedding_check(
    field: &SampledField,
    t: f64,
    x0: [f64; 3],
    r: f64,
    p: f64,
    level_floor_cells: f64,
) -> Result<EmbeddingCheck> {
    if !(p >= 2.0 && p.is_finite()) {
        bail!(Parameter, "embedding exponent must lie in [2, ∞), got {p}");
    }
    let kt = field.grid().time_index_at_or_below(t)?;
    let ladder = MorreyLadder::new(field.grid(), x0, r)?;
    let lhs = ladder.evaluate(field, kt, p, false)?.supremum;
    let speed = field.speed_slice(kt);
    let curve = DistributionCurve::from_weighted(ladder.outer().weighted(&speed))?;
    let floor = level_set_floor_measure(field.grid(), level_floor_cells);
    let rhs = curve.weak_norm_resolved(1.5 * p, floor)?;
    let (ratio, unbounded) = if rhs > 0.0 {
        (lhs / rhs, false)
    } else if lhs == 0.0 {
        (0.0, false)
    } else {
        (f64::INFINITY, true)
    };
    Ok(EmbeddingCheck { lhs, rhs_weak_norm: rhs, ratio, unbounded })
}
