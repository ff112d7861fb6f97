//! Backward heat-kernel test function, the local energy residual and the
//! pressure decay bound.
//!
//! With `s = t - t0` and `y = x - x0` the test function is
//! `φ = χ(s, y) ψ(s, y)`, `ψ = (4π(r² - s))^{-3/2} exp(-|y|²/(4(r² - s)))`.
//! The cutoff `χ` is a product of a radial factor (1 for `|y| <= 9ρ/16`, 0
//! for `|y| >= 11ρ/16`) and a time factor (1 for `s >= -ρ²/4`, 0 for
//! `s <= -9ρ²/16`), both built from the `C^∞` step
//! `S(z) = e^{-1/z} / (e^{-1/z} + e^{-1/(1-z)})`.

use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::field::{check_gradient_axes, velocity_jacobian_at, CylinderSpec, SampledField};
use crate::invariants::invariants;
use crate::math::{self, exp, pow, PI};

/// `(S, S', S'')` at `z`.
fn smooth_step(z: f64) -> (f64, f64, f64) {
    if z <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if z >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    // f(z) = e^{-1/z}, f' = f/z², f'' = f (1/z⁴ - 2/z³)
    let f = |z: f64| exp(-1.0 / z);
    let d = |z: f64| f(z) / (z * z);
    let dd = |z: f64| f(z) * (1.0 / (z * z * z * z) - 2.0 / (z * z * z));
    let (f1, f2) = (f(z), f(1.0 - z));
    let (d1, d2) = (d(z), d(1.0 - z));
    let (e1, e2) = (dd(z), dd(1.0 - z));
    let g = f1 + f2;
    let gp = d1 - d2;
    let n = d1 * f2 + f1 * d2;
    let np = e1 * f2 - f1 * e2;
    (f1 / g, n / (g * g), np / (g * g) - 2.0 * n * gp / (g * g * g))
}

/// `φ`, `∂_t φ`, `∇φ` and `∂_t φ + Δφ` at one space-time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiSample {
    pub phi: f64,
    pub dt: f64,
    pub grad: [f64; 3],
    pub caloric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub r: f64,
    pub rho: f64,
    pub t0: f64,
    pub x0: [f64; 3],
}

pub fn heat_test_function(r: f64, rho: f64, t0: f64, x0: [f64; 3]) -> Result<TestFunction> {
    if !(rho > 0.0 && rho.is_finite()) {
        bail!(Parameter, "ρ must be positive, got {rho}");
    }
    if !(r > 0.0 && r <= 0.5 * rho) {
        bail!(Parameter, "need 0 < r <= ρ/2, got r={r}, ρ={rho}");
    }
    Ok(TestFunction { r, rho, t0, x0 })
}

impl TestFunction {
    pub fn cutoff_inner(&self) -> f64 {
        9.0 / 16.0 * self.rho
    }

    /// Radius beyond which `φ` vanishes.
    pub fn support_radius(&self) -> f64 {
        11.0 / 16.0 * self.rho
    }

    /// Earliest `s = t - t0` at which `φ` is nonzero.
    pub fn support_start(&self) -> f64 {
        -9.0 / 16.0 * self.rho * self.rho
    }

    pub fn psi(&self, s: f64, y: [f64; 3]) -> f64 {
        let tau = self.r * self.r - s;
        let y2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        pow(4.0 * PI * tau, -1.5) * exp(-y2 / (4.0 * tau))
    }

    /// Time factor of the cutoff and its `s`-derivative.
    fn time_cutoff(&self, s: f64) -> (f64, f64) {
        let lo = self.support_start();
        let width = -0.25 * self.rho * self.rho - lo;
        let (v, d, _) = smooth_step((s - lo) / width);
        (v, d / width)
    }

    /// Radial factor of the cutoff and its first two derivatives in `|y|`.
    fn radial_cutoff(&self, rad: f64) -> (f64, f64, f64) {
        let a = self.cutoff_inner();
        let w = self.support_radius() - a;
        let (v, d, dd) = smooth_step((rad - a) / w);
        (1.0 - v, -d / w, -dd / (w * w))
    }

    /// `φ` and its derivatives at `s = t - t0`, displacement `y = x - x0`.
    pub fn sample(&self, s: f64, y: [f64; 3]) -> PhiSample {
        let (ct, ct_s) = self.time_cutoff(s);
        let rad = math::norm3(y);
        let (cr, cr_r, cr_rr) = self.radial_cutoff(rad);
        if (ct == 0.0 && ct_s == 0.0) || (cr == 0.0 && cr_r == 0.0) {
            return PhiSample { phi: 0.0, dt: 0.0, grad: [0.0; 3], caloric: 0.0 };
        }
        let tau = self.r * self.r - s;
        let psi = self.psi(s, y);
        let grad_psi = y.map(|v| -v / (2.0 * tau) * psi);
        // ∇χ_r = χ_r' y/|y| and Δχ_r = χ_r'' + 2χ_r'/|y|; both vanish near y = 0.
        let (grad_cr, lap_cr) = if cr_r == 0.0 && cr_rr == 0.0 {
            ([0.0; 3], 0.0)
        } else {
            (y.map(|v| cr_r * v / rad), cr_rr + 2.0 * cr_r / rad)
        };
        let chi = ct * cr;
        let grad = core::array::from_fn(|i| ct * (cr * grad_psi[i] + grad_cr[i] * psi));
        let dot: f64 = (0..3).map(|i| grad_cr[i] * grad_psi[i]).sum();
        // ψ solves the backward heat equation, so only cutoff terms remain.
        let caloric = psi * (ct_s * cr + ct * lap_cr) + 2.0 * ct * dot;
        let y2 = rad * rad;
        let psi_s = -psi * (y2 / (4.0 * tau * tau) - 1.5 / tau);
        PhiSample { phi: chi * psi, dt: chi * psi_s + psi * ct_s * cr, grad, caloric }
    }

    /// Largest `|D_t φ + Δ_h φ|` over the lattice `x0 + h Z³`, `t0 - h N`
    /// inside `Q_{ρ/2}`, with second-order central differences and `dt = h`.
    /// The exact operator vanishes there, so this measures the
    /// discretisation error of the scheme applied to `φ`.
    pub fn discrete_caloric_defect(&self, h: f64) -> Result<f64> {
        let half = 0.5 * self.rho;
        if !(h > 0.0 && h < 0.5 * half) {
            bail!(Parameter, "lattice spacing {h} too coarse for ρ={}", self.rho);
        }
        if h >= self.r * self.r {
            bail!(Parameter, "lattice spacing {h} must stay below r² = {}", self.r * self.r);
        }
        let nx = math::floor(half / h + 1e-9) as i64;
        let nt = math::floor(half * half / h + 1e-9) as i64;
        let val = |s: f64, y: [f64; 3]| self.sample(s, y).phi;
        let mut worst = 0.0f64;
        for m in 0..=nt {
            let s = -(m as f64) * h;
            for k in -nx..=nx {
                for j in -nx..=nx {
                    for i in -nx..=nx {
                        let y = [i as f64 * h, j as f64 * h, k as f64 * h];
                        if math::norm3(y) > half * (1.0 + 1e-12) {
                            continue;
                        }
                        let c = val(s, y);
                        let dt = (val(s + h, y) - val(s - h, y)) / (2.0 * h);
                        let mut lap = 0.0;
                        for a in 0..3 {
                            let mut yp = y;
                            let mut ym = y;
                            yp[a] += h;
                            ym[a] -= h;
                            lap += val(s, yp) - 2.0 * c + val(s, ym);
                        }
                        worst = worst.max(math::abs(dt + lap / (h * h)));
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Both sides of the local energy inequality (viscosity 1) with the heat
/// test function, evaluated at the top of the cylinder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyResidual {
    /// `∫|u(t0)|² φ + 2 ∬ |∇u|² φ`
    pub lhs: f64,
    /// `∬ |u|² (∂_t φ + Δφ) + (|u|² + 2P) u·∇φ`
    pub rhs: f64,
    /// `rhs - lhs`; positive when the inequality holds with slack.
    pub residual: f64,
    /// `A(u, ρ) ρ³`
    pub energy_scale: f64,
}

impl EnergyResidual {
    /// `residual / energy_scale` (`0` when both vanish).
    pub fn relative(&self) -> f64 {
        if self.energy_scale > 0.0 {
            self.residual / self.energy_scale
        } else if self.residual == 0.0 {
            0.0
        } else {
            self.residual.signum() * f64::INFINITY
        }
    }
}

/// Composite Simpson over equally spaced samples, trapezoid for a leftover
/// bottom interval. `vals[0]` is the latest time.
fn integrate_backwards(vals: &[f64], dt: f64) -> f64 {
    let n = vals.len().saturating_sub(1);
    if n == 0 {
        return 0.0;
    }
    let pairs = n / 2;
    let mut total = 0.0;
    for q in 0..pairs {
        let k = 2 * q;
        total += dt / 3.0 * (vals[k] + 4.0 * vals[k + 1] + vals[k + 2]);
    }
    if n % 2 == 1 {
        total += 0.5 * dt * (vals[n - 1] + vals[n]);
    }
    total
}

pub fn energy_residual(field: &SampledField, t0: f64, x0: [f64; 3], r: f64, rho: f64) -> Result<EnergyResidual> {
    if !field.has_pressure() {
        return Err(Error::MissingPressure);
    }
    let phi = heat_test_function(r, rho, t0, x0)?;
    let grid = field.grid();
    check_gradient_axes(grid)?;
    let dt = grid.dt();
    let tol = 1e-9 * dt;
    if t0 - rho * rho < grid.time.0 - tol || t0 > grid.time.1 + tol {
        bail!(Domain, "cylinder of radius {rho} at t0={t0} leaves the time interval");
    }
    let k_top = grid.time_index_at_or_below(t0)?;
    if math::abs(grid.time_at(k_top) - t0) > tol {
        bail!(Parameter, "t0={t0} is not a sample time");
    }
    let reach = phi.support_radius();
    for a in 0..3 {
        let margin = reach + 2.0 * grid.spacing(a);
        let inside = if grid.periodic[a] {
            2.0 * margin < grid.extent(a)
        } else {
            x0[a] - margin >= grid.lower[a] && x0[a] + margin <= grid.upper[a]
        };
        if !inside {
            bail!(Domain, "test function support leaves the box on axis {a}");
        }
    }
    let cand: [Vec<usize>; 3] =
        core::array::from_fn(|a| grid.candidate_indices(a, x0[a], reach + 2.0 * grid.spacing(a)));
    let mut k_bottom = grid.time_index_at_or_below((t0 + phi.support_start()).max(grid.time.0))?;
    if (k_top - k_bottom) % 2 == 1 && k_bottom > 0 {
        k_bottom -= 1;
    }

    // Per time sample, latest first: (∫|u|²φ, ∫|∇u|²φ, rhs integrand).
    // Space derivatives of φ are the lattice differences matching the
    // velocity gradient, so by summation by parts they act on the resolved
    // field rather than on the narrow cutoff layer.
    let h = grid.spacings();
    let mut energy = Vec::new();
    let mut dissipation = Vec::new();
    let mut flux = Vec::new();
    for kt in (k_bottom..=k_top).rev() {
        let s = grid.time_at(kt) - t0;
        let pr = field.pressure_slice(kt).unwrap_or(&[]);
        let (mut e, mut d, mut f) = (0.0, 0.0, 0.0);
        for &k in &cand[2] {
            for &j in &cand[1] {
                for &i in &cand[0] {
                    let x = grid.node(i, j, k);
                    let y: [f64; 3] = core::array::from_fn(|a| grid.displacement(a, x[a], x0[a]));
                    if math::norm3(y) > reach + 2.0 * grid.max_spacing() {
                        continue;
                    }
                    let centre = phi.sample(s, y);
                    let mut grad = [0.0; 3];
                    let mut lap = 0.0;
                    for a in 0..3 {
                        let (mut yp, mut ym) = (y, y);
                        yp[a] += h[a];
                        ym[a] -= h[a];
                        let (fp, fm) = (phi.sample(s, yp).phi, phi.sample(s, ym).phi);
                        grad[a] = (fp - fm) / (2.0 * h[a]);
                        lap += (fp - 2.0 * centre.phi + fm) / (h[a] * h[a]);
                    }
                    if centre.phi == 0.0 && centre.dt == 0.0 && lap == 0.0 && grad == [0.0; 3] {
                        continue;
                    }
                    let w = grid.cell_volume(i, j, k);
                    let idx = grid.index(i, j, k);
                    let u = field.velocity_at(kt, idx);
                    let u2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
                    let u_dot = u[0] * grad[0] + u[1] * grad[1] + u[2] * grad[2];
                    e += w * u2 * centre.phi;
                    if centre.phi != 0.0 {
                        let g2: f64 = velocity_jacobian_at(field, kt, idx).iter().flatten().map(|v| v * v).sum();
                        d += w * g2 * centre.phi;
                    }
                    f += w * (u2 * (centre.dt + lap) + (u2 + 2.0 * pr[idx]) * u_dot);
                }
            }
        }
        energy.push(e);
        dissipation.push(d);
        flux.push(f);
    }
    let lhs = energy[0] + 2.0 * integrate_backwards(&dissipation, dt);
    let rhs = integrate_backwards(&flux, dt);
    let a_rho = invariants(field, &CylinderSpec::new(t0, x0, rho)?)?.a;
    Ok(EnergyResidual { lhs, rhs, residual: rhs - lhs, energy_scale: a_rho * rho * rho * rho })
}

/// `D(P, r)` against `C_cal (r/ρ) D(P, ρ) + C_cal (ρ/r)² C(u, ρ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureDecay {
    pub lhs: f64,
    pub rhs: f64,
}

impl PressureDecay {
    /// Smallest `C_cal` for which the bound holds, given the value used.
    pub fn required_constant(&self, c_cal: f64) -> f64 {
        if self.rhs > 0.0 {
            c_cal * self.lhs / self.rhs
        } else {
            0.0
        }
    }
}

pub fn pressure_decay_bound(
    field: &SampledField,
    t0: f64,
    x0: [f64; 3],
    r: f64,
    rho: f64,
    c_cal: f64,
) -> Result<PressureDecay> {
    if !field.has_pressure() {
        return Err(Error::MissingPressure);
    }
    if !(r > 0.0 && r <= 0.5 * rho) {
        bail!(Parameter, "need 0 < r <= ρ/2, got r={r}, ρ={rho}");
    }
    if !(c_cal > 0.0 && c_cal.is_finite()) {
        bail!(Parameter, "C_cal must be positive, got {c_cal}");
    }
    let small = invariants(field, &CylinderSpec::new(t0, x0, r)?)?;
    let large = invariants(field, &CylinderSpec::new(t0, x0, rho)?)?;
    let (d_small, d_large) = (small.d.unwrap_or(0.0), large.d.unwrap_or(0.0));
    let rhs = c_cal * (r / rho) * d_large + c_cal * (rho / r) * (rho / r) * large.c;
    Ok(PressureDecay { lhs: d_small, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;

    fn tf() -> TestFunction {
        heat_test_function(0.5, 1.0, 0.0, [0.0; 3]).unwrap()
    }

    #[test]
    fn smooth_step_derivatives_match_differences() {
        let h = 1e-5;
        for z in [0.1, 0.3, 0.5, 0.77, 0.95] {
            let (_, d, dd) = smooth_step(z);
            let fd = (smooth_step(z + h).0 - smooth_step(z - h).0) / (2.0 * h);
            let fdd = (smooth_step(z + h).1 - smooth_step(z - h).1) / (2.0 * h);
            assert!((d - fd).abs() < 1e-6 * (1.0 + d.abs()), "z={z}");
            assert!((dd - fdd).abs() < 1e-5 * (1.0 + dd.abs()), "z={z}");
        }
        assert_eq!(smooth_step(0.5).0, 0.5);
        assert_eq!(smooth_step(-0.1), (0.0, 0.0, 0.0));
        assert_eq!(smooth_step(1.0), (1.0, 0.0, 0.0));
    }

    #[test]
    fn centre_value_and_support() {
        let f = tf();
        let centre = f.sample(0.0, [0.0; 3]).phi;
        assert!((centre - pow(4.0 * PI * 0.25, -1.5)).abs() < 1e-15);
        assert_eq!(f.sample(-0.2, [0.69, 0.0, 0.0]).phi, 0.0);
        assert_eq!(f.sample(-0.57, [0.0; 3]).phi, 0.0);
        assert!(f.sample(-0.55, [0.0; 3]).phi > 0.0);
        assert!(heat_test_function(0.6, 1.0, 0.0, [0.0; 3]).is_err());
    }

    #[test]
    fn analytic_operator_vanishes_on_inner_cylinder() {
        let f = tf();
        for s in [0.0, -0.1, -0.25] {
            for y in [[0.0; 3], [0.3, -0.2, 0.1], [0.5, 0.0, 0.0]] {
                assert_eq!(f.sample(s, y).caloric, 0.0);
            }
        }
    }

    #[test]
    fn gradient_and_operator_match_finite_differences() {
        let f = tf();
        let h = 1e-4;
        for (s, y) in [(-0.3, [0.6, 0.1, -0.05]), (-0.45, [0.2, 0.3, 0.1]), (-0.1, [0.0, 0.62, 0.0])] {
            let at = |s: f64, y: [f64; 3]| f.sample(s, y).phi;
            let smp = f.sample(s, y);
            let mut lap = 0.0;
            for a in 0..3 {
                let (mut p, mut m) = (y, y);
                p[a] += h;
                m[a] -= h;
                let g = (at(s, p) - at(s, m)) / (2.0 * h);
                assert!((g - smp.grad[a]).abs() < 1e-5, "axis {a}");
                lap += (at(s, p) - 2.0 * at(s, y) + at(s, m)) / (h * h);
            }
            let dt = (at(s + h, y) - at(s - h, y)) / (2.0 * h);
            assert!((dt - smp.dt).abs() < 1e-5 * (1.0 + dt.abs()));
            assert!((dt + lap - smp.caloric).abs() < 1e-3 * (1.0 + smp.caloric.abs()), "{s} {y:?}");
        }
    }

    #[test]
    fn zero_field_residual_is_zero() {
        let g = Grid::cube(17, -1.0, 1.0, 33, (0.0, 1.0), false).unwrap();
        let f = SampledField::from_fn(g, true, |_, _| ([0.0; 3], 0.0)).unwrap();
        let res = energy_residual(&f, 1.0, [0.0; 3], 0.5, 1.0).unwrap();
        assert_eq!((res.lhs, res.rhs, res.residual, res.relative()), (0.0, 0.0, 0.0, 0.0));
        assert!(matches!(
            energy_residual(&f.clone().without_pressure(), 1.0, [0.0; 3], 0.5, 1.0),
            Err(Error::MissingPressure)
        ));
        let pd = pressure_decay_bound(&f, 1.0, [0.0; 3], 0.25, 0.5, 1.0).unwrap();
        assert_eq!((pd.lhs, pd.rhs), (0.0, 0.0));
    }

    #[test]
    fn simpson_from_the_top() {
        let vals: Vec<f64> = (0..6).map(|k| (k as f64 * 0.1).powi(2)).collect();
        // ∫_0^0.5 t² dt, four Simpson intervals exact, last interval trapezoid
        let got = integrate_backwards(&vals, 0.1);
        let exact_simpson = 0.4f64.powi(3) / 3.0;
        let trap = 0.05 * (0.16 + 0.25);
        assert!((got - exact_simpson - trap).abs() < 1e-15);
    }

    #[test]
    fn constant_pressure_decay_closed_form() {
        let g = Grid::cube(41, -1.25, 1.25, 9, (0.0, 2.0), false).unwrap();
        let p0: f64 = 2.0;
        let f = SampledField::from_fn(g, true, |_, _| ([0.0; 3], p0)).unwrap();
        let (r, rho) = (0.5, 1.0);
        let pd = pressure_decay_bound(&f, 2.0, [0.0; 3], r, rho, 1.0).unwrap();
        // D(P, s) = s^{-2} · s² · (4π/3)s³|p0|^{3/2}
        let d = |s: f64| 4.0 / 3.0 * PI * s * s * s * pow(p0, 1.5);
        assert!((pd.lhs / d(r) - 1.0).abs() < 0.02, "{pd:?}");
        assert!((pd.rhs / ((r / rho) * d(rho)) - 1.0).abs() < 0.02);
        // lhs/rhs = (r/ρ)² exactly in the continuum
        assert!((pd.required_constant(1.0) - 0.25).abs() < 0.01);
    }
}
