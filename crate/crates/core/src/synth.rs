//! Synthetic fields with known structure: decaying ABC Beltrami flows,
//! the `c/|x|` profile, a Leray self-similar concentrating field, random
//! divergence-free Fourier sums and constants.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Result};
use crate::field::{Grid, SampledField};
use crate::math::{self, cos, exp, sin, PI};

/// Direction of the `c/|x|` profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialShape {
    /// `u = c x / |x|²`, radial and not divergence-free.
    Radial,
    /// `u = (c/|x|, 0, 0)`, for norm tests only.
    Scalar,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// `u = e^{-t}(A sin z + C cos y, B sin x + A cos z, C sin y + B cos x)`,
    /// `P = -|u|²/2` shifted to zero mean.
    BeltramiAbc { a: f64, b: f64, c: f64 },
    /// `|u| = c/|x|`, nodes closer than half a cell to `x = 0` take the value
    /// at radius `h/2`.
    InverseRadial { c: f64, shape: RadialShape },
    /// `u = L^{-1} U(x/L)`, `L = (2a(T - t))^{1/2}`, with
    /// `U = amplitude · curl(β(|y|) e_z)` and `β(s) = exp(-1/(1 - s²))` on `s < 1`.
    LeraySelfSimilar { blowup_time: f64, a: f64, amplitude: f64 },
    /// `Σ_k |k|^{-slope} (α_k cos(κ·x) - β_k sin(κ·x))` over integer modes
    /// `0 < |k| <= k_max` in a half space, `α_k, β_k ⊥ κ`, `κ = 2πk/L`.
    /// With `decay`, mode `k` carries `e^{-|κ|² t}`.
    RandomDivfree { seed: u64, k_max: usize, slope: f64, amplitude: f64, decay: bool },
    Constant { velocity: [f64; 3], pressure: f64 },
}

impl Profile {
    pub fn kind(&self) -> &'static str {
        match self {
            Profile::BeltramiAbc { .. } => "beltrami_abc",
            Profile::InverseRadial { .. } => "inverse_radial",
            Profile::LeraySelfSimilar { .. } => "leray_selfsimilar",
            Profile::RandomDivfree { .. } => "random_divfree",
            Profile::Constant { .. } => "constant",
        }
    }

    pub fn is_divergence_free(&self) -> bool {
        !matches!(self, Profile::InverseRadial { .. })
    }

    pub fn has_pressure(&self) -> bool {
        matches!(self, Profile::BeltramiAbc { .. } | Profile::Constant { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub profile: Profile,
    pub grid: Grid,
}

/// Beltrami velocity and mean-zero pressure at `(t, x)`.
pub fn beltrami_abc(a: f64, b: f64, c: f64, t: f64, x: [f64; 3]) -> ([f64; 3], f64) {
    let e = exp(-t);
    let u = [
        e * (a * sin(x[2]) + c * cos(x[1])),
        e * (b * sin(x[0]) + a * cos(x[2])),
        e * (c * sin(x[1]) + b * cos(x[0])),
    ];
    let u2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    (u, -0.5 * u2 + 0.5 * e * e * (a * a + b * b + c * c))
}

fn bump(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        exp(-1.0 / (1.0 - s * s))
    }
}

/// The compactly supported profile `U(y)`.
pub fn leray_profile(amplitude: f64, y: [f64; 3]) -> [f64; 3] {
    let s2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    if s2 >= 1.0 {
        return [0.0; 3];
    }
    let q = 1.0 - s2;
    // curl(β e_z) = (∂_y β, -∂_x β, 0), β'(s)/s = -2β/(1-s²)²
    let k = amplitude * bump(math::sqrt(s2)) * (-2.0 / (q * q));
    [k * y[1], -k * y[0], 0.0]
}

struct FourierMode {
    k: [i64; 3],
    cos_coef: [f64; 3],
    sin_coef: [f64; 3],
    k2: f64,
}

fn project(v: [f64; 3], kappa: [f64; 3]) -> [f64; 3] {
    let k2 = kappa[0] * kappa[0] + kappa[1] * kappa[1] + kappa[2] * kappa[2];
    let d = (v[0] * kappa[0] + v[1] * kappa[1] + v[2] * kappa[2]) / k2;
    [v[0] - d * kappa[0], v[1] - d * kappa[1], v[2] - d * kappa[2]]
}

fn random_modes(grid: &Grid, seed: u64, k_max: usize, slope: f64) -> Vec<FourierMode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let km = k_max as i64;
    let mut modes = Vec::new();
    for kx in 0..=km {
        for ky in -km..=km {
            for kz in -km..=km {
                let upper_half = kx > 0 || (kx == 0 && (ky > 0 || (ky == 0 && kz > 0)));
                let n2 = kx * kx + ky * ky + kz * kz;
                if !upper_half || n2 > km * km {
                    continue;
                }
                let k = [kx, ky, kz];
                let kappa: [f64; 3] = core::array::from_fn(|a| 2.0 * PI * k[a] as f64 / grid.extent(a));
                let amp = math::pow(n2 as f64, -0.5 * slope);
                let mut draw = || -> [f64; 3] { core::array::from_fn(|_| rng.gen_range(-1.0..1.0)) };
                let cos_coef = project(draw(), kappa).map(|v| amp * v);
                let sin_coef = project(draw(), kappa).map(|v| amp * v);
                let k2 = kappa[0] * kappa[0] + kappa[1] * kappa[1] + kappa[2] * kappa[2];
                modes.push(FourierMode { k, cos_coef, sin_coef, k2 });
            }
        }
    }
    modes
}

fn random_divfree(grid: &Grid, seed: u64, k_max: usize, slope: f64, amplitude: f64, decay: bool) -> Result<SampledField> {
    let modes = random_modes(grid, seed, k_max, slope);
    let km = k_max as i64;
    let width = 2 * k_max + 1;
    // e^{i κ_a x_a} per axis, node and integer wave number.
    let tables: [Vec<(f64, f64)>; 3] = core::array::from_fn(|a| {
        let mut t = Vec::with_capacity(grid.dims[a] * width);
        for i in 0..grid.dims[a] {
            let x = grid.coord(a, i);
            for k in -km..=km {
                let ph = 2.0 * PI * k as f64 / grid.extent(a) * x;
                t.push((cos(ph), sin(ph)));
            }
        }
        t
    });
    let slice = grid.nodes_per_slice();
    let mut velocity = alloc::vec![0.0; 3 * slice * grid.nt];
    for kt in 0..grid.nt {
        let t = grid.time_at(kt);
        let damp: Vec<f64> = modes.iter().map(|m| if decay { exp(-m.k2 * t) } else { 1.0 }).collect();
        let base = 3 * slice * kt;
        for k in 0..grid.dims[2] {
            for j in 0..grid.dims[1] {
                for i in 0..grid.dims[0] {
                    let idx = grid.index(i, j, k);
                    let mut u = [0.0; 3];
                    for (m, &d) in modes.iter().zip(&damp) {
                        let e = |a: usize, n: usize| tables[a][n * width + (m.k[a] + km) as usize];
                        let (cx, sx) = e(0, i);
                        let (cy, sy) = e(1, j);
                        let (cz, sz) = e(2, k);
                        let (cxy, sxy) = (cx * cy - sx * sy, sx * cy + cx * sy);
                        let (c, s) = (cxy * cz - sxy * sz, sxy * cz + cxy * sz);
                        for a in 0..3 {
                            u[a] += d * (m.cos_coef[a] * c - m.sin_coef[a] * s);
                        }
                    }
                    for a in 0..3 {
                        velocity[base + a * slice + idx] = amplitude * u[a];
                    }
                }
            }
        }
    }
    SampledField::new(grid.clone(), velocity, None)
}

pub fn generate(spec: &GeneratorSpec) -> Result<SampledField> {
    let grid = spec.grid.clone();
    match spec.profile {
        Profile::BeltramiAbc { a, b, c } => {
            if ![a, b, c].iter().all(|v| v.is_finite()) {
                bail!(Parameter, "Beltrami amplitudes must be finite");
            }
            SampledField::from_fn(grid, true, |t, x| beltrami_abc(a, b, c, t, x))
        }
        Profile::InverseRadial { c, shape } => {
            if !c.is_finite() {
                bail!(Parameter, "amplitude must be finite");
            }
            let floor = 0.5 * grid.max_spacing();
            SampledField::from_fn(grid, false, |_, x| {
                let rad = math::norm3(x);
                let reg = rad.max(floor);
                let u = match shape {
                    RadialShape::Scalar => [c / reg, 0.0, 0.0],
                    RadialShape::Radial if rad == 0.0 => [c / reg, 0.0, 0.0],
                    RadialShape::Radial => x.map(|v| c * v / (rad * reg)),
                };
                (u, 0.0)
            })
        }
        Profile::LeraySelfSimilar { blowup_time, a, amplitude } => {
            if !(a > 0.0 && a.is_finite() && amplitude.is_finite()) {
                bail!(Parameter, "Leray profile needs a > 0 and finite amplitude");
            }
            if !(blowup_time > grid.time.1) {
                bail!(Parameter, "blow-up time {blowup_time} must exceed the last sample time {}", grid.time.1);
            }
            SampledField::from_fn(grid, false, |t, x| {
                let l = math::sqrt(2.0 * a * (blowup_time - t));
                (leray_profile(amplitude, x.map(|v| v / l)).map(|v| v / l), 0.0)
            })
        }
        Profile::RandomDivfree { seed, k_max, slope, amplitude, decay } => {
            if k_max == 0 || !slope.is_finite() || !amplitude.is_finite() {
                bail!(Parameter, "random field needs k_max >= 1 and finite slope/amplitude");
            }
            random_divfree(&grid, seed, k_max, slope, amplitude, decay)
        }
        Profile::Constant { velocity, pressure } => SampledField::from_fn(grid, true, |_, _| (velocity, pressure)),
    }
}
