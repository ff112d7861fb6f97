//! Pseudo-spectral tools on fully periodic boxes.

use std::f64::consts::PI;
use std::sync::Arc;

use nssl_core::synth::{generate, GeneratorSpec, Profile};
use nssl_core::{Error, Grid, SampledField};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse 3D transforms for one lattice shape (x fastest).
pub struct Fft3 {
    dims: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
    /// Angular wavenumbers per axis, Nyquist set to zero.
    kappa: [Vec<f64>; 3],
}

impl Fft3 {
    pub fn new(grid: &Grid) -> Result<Self, Error> {
        if !grid.periodic.iter().all(|&p| p) {
            return Err(Error::NotPeriodic);
        }
        let mut planner = FftPlanner::new();
        let dims = grid.dims;
        let plan = |p: &mut FftPlanner<f64>, inverse: bool| {
            [0, 1, 2].map(|a| if inverse { p.plan_fft_inverse(dims[a]) } else { p.plan_fft_forward(dims[a]) })
        };
        let fwd = plan(&mut planner, false);
        let inv = plan(&mut planner, true);
        let kappa = [0, 1, 2].map(|a| {
            let n = dims[a];
            let base = 2.0 * PI / grid.extent(a);
            (0..n)
                .map(|i| {
                    if 2 * i == n {
                        0.0
                    } else if 2 * i < n {
                        base * i as f64
                    } else {
                        base * (i as f64 - n as f64)
                    }
                })
                .collect()
        });
        Ok(Self { dims, fwd, inv, kappa })
    }

    pub fn kappa(&self, axis: usize) -> &[f64] {
        &self.kappa[axis]
    }

    fn along(&self, data: &mut [Complex64], axis: usize, plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [nx, ny, nz] = self.dims;
        let plan = &plans[axis];
        match axis {
            0 => data.chunks_exact_mut(nx).for_each(|row| plan.process(row)),
            _ => {
                let (n, stride) = if axis == 1 { (ny, nx) } else { (nz, nx * ny) };
                let mut line = vec![Complex64::default(); n];
                let outer = nx * ny * nz / n;
                for o in 0..outer {
                    let base = if axis == 1 { (o / nx) * nx * ny + o % nx } else { o };
                    for (q, v) in line.iter_mut().enumerate() {
                        *v = data[base + q * stride];
                    }
                    plan.process(&mut line);
                    for (q, v) in line.iter().enumerate() {
                        data[base + q * stride] = *v;
                    }
                }
            }
        }
    }

    pub fn forward(&self, real: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = real.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for a in 0..3 {
            self.along(&mut data, a, &self.fwd);
        }
        data
    }

    /// Inverse transform, normalised, real part.
    pub fn inverse(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        for a in 0..3 {
            self.along(&mut data, a, &self.inv);
        }
        let scale = 1.0 / data.len() as f64;
        data.iter().map(|c| c.re * scale).collect()
    }

    /// Applies `f(κ)` to every mode.
    pub fn map_modes(&self, data: &mut [Complex64], mut f: impl FnMut([f64; 3], Complex64) -> Complex64) {
        let [nx, ny, _] = self.dims;
        for (idx, v) in data.iter_mut().enumerate() {
            let (i, j, k) = (idx % nx, (idx / nx) % ny, idx / (nx * ny));
            *v = f([self.kappa[0][i], self.kappa[1][j], self.kappa[2][k]], *v);
        }
    }

    /// `∂_a f` spectrally.
    pub fn derivative(&self, real: &[f64], axis: usize) -> Vec<f64> {
        let mut hat = self.forward(real);
        self.map_modes(&mut hat, |k, v| Complex64::new(0.0, k[axis]) * v);
        self.inverse(hat)
    }
}

/// Solves `-ΔP = ∂_i∂_j(u_i u_j)` on one periodic slice; `P` has zero mean.
pub fn solve_pressure_periodic(grid: &Grid, u: [&[f64]; 3]) -> Result<Vec<f64>, Error> {
    let fft = Fft3::new(grid)?;
    let m = grid.nodes_per_slice();
    if u.iter().any(|c| c.len() != m) {
        return Err(Error::InvalidField(format!("slice components must have {m} values")));
    }
    let mut hat = vec![Complex64::default(); m];
    for i in 0..3 {
        for j in i..3 {
            let prod: Vec<f64> = (0..m).map(|n| u[i][n] * u[j][n]).collect();
            let w = fft.forward(&prod);
            let sym = if i == j { 1.0 } else { 2.0 };
            let [nx, ny, _] = grid.dims;
            for (idx, h) in hat.iter_mut().enumerate() {
                let k = [fft.kappa[0][idx % nx], fft.kappa[1][(idx / nx) % ny], fft.kappa[2][idx / (nx * ny)]];
                *h -= sym * k[i] * k[j] * w[idx];
            }
        }
    }
    // |κ|² P̂ = -κ_i κ_j Ŵ_ij
    fft.map_modes(&mut hat, |k, v| {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            Complex64::default()
        } else {
            v / k2
        }
    });
    Ok(fft.inverse(hat))
}

/// Replaces the field's pressure by the spectral solution at every sample.
pub fn with_spectral_pressure(field: SampledField) -> Result<SampledField, Error> {
    let grid = field.grid().clone();
    let slices: Vec<Vec<f64>> = (0..grid.nt)
        .into_par_iter()
        .map(|kt| {
            solve_pressure_periodic(&grid, [field.component(kt, 0), field.component(kt, 1), field.component(kt, 2)])
        })
        .collect::<Result<_, _>>()?;
    field.with_pressure(slices.concat())
}

/// `∂_i u_i` at sample `kt`, spectrally.
pub fn spectral_divergence(field: &SampledField, kt: usize) -> Result<Vec<f64>, Error> {
    let fft = Fft3::new(field.grid())?;
    let m = field.grid().nodes_per_slice();
    let mut hat = vec![Complex64::default(); m];
    for a in 0..3 {
        let mut c = fft.forward(field.component(kt, a));
        fft.map_modes(&mut c, |k, v| Complex64::new(0.0, k[a]) * v);
        hat.iter_mut().zip(c).for_each(|(h, v)| *h += v);
    }
    Ok(fft.inverse(hat))
}

/// `∫|∇u|²` over the box at sample `kt`, spectrally.
pub fn spectral_dissipation(field: &SampledField, kt: usize) -> Result<f64, Error> {
    let fft = Fft3::new(field.grid())?;
    let cell = field.grid().spacings().iter().product::<f64>();
    let mut total = 0.0;
    for c in 0..3 {
        for a in 0..3 {
            total += fft.derivative(field.component(kt, c), a).iter().map(|v| v * v).sum::<f64>();
        }
    }
    Ok(total * cell)
}

/// `∫|u|²` over the box at sample `kt` (exact for trigonometric
/// polynomials resolved by the lattice).
pub fn box_energy(field: &SampledField, kt: usize) -> f64 {
    let cell = field.grid().spacings().iter().product::<f64>();
    (0..3).map(|c| field.component(kt, c).iter().map(|v| v * v).sum::<f64>()).sum::<f64>() * cell
}

/// Both sides of `d/dt ½∫|u|² = -∫|∇u|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyIdentity {
    pub t: f64,
    pub energy: f64,
    /// `d/dt ½∫|u|²` by finite differences of the sampled energies.
    pub lhs: f64,
    /// `-∫|∇u|²`
    pub rhs: f64,
}

impl EnergyIdentity {
    pub fn ratio(&self) -> f64 {
        if self.rhs == 0.0 && self.lhs == 0.0 {
            1.0
        } else {
            self.lhs / self.rhs
        }
    }
}

/// `l_j'(x)` for the Lagrange basis on the nodes `0..5`.
fn lagrange_slope(j: usize, x: f64) -> f64 {
    let xj = j as f64;
    (0..5)
        .filter(|&m| m != j)
        .map(|m| {
            let prod: f64 = (0..5)
                .filter(|&l| l != j && l != m)
                .map(|l| (x - l as f64) / (xj - l as f64))
                .product();
            prod / (xj - m as f64)
        })
        .sum()
}

/// Global energy balance of a generated Beltrami field at sample `kt`.
pub fn exact_energy_identity(spec: &GeneratorSpec, kt: usize) -> Result<EnergyIdentity, Error> {
    if !matches!(spec.profile, Profile::BeltramiAbc { .. }) {
        return Err(Error::Parameter(format!("energy identity needs a beltrami_abc field, got {}", spec.profile.kind())));
    }
    let grid = &spec.grid;
    if kt >= grid.nt {
        return Err(Error::Parameter(format!("sample {kt} out of range (nt = {})", grid.nt)));
    }
    if grid.nt < 5 {
        return Err(Error::InsufficientSamples { needed: 5, found: grid.nt });
    }
    let field = generate(spec)?;
    let e: Vec<f64> = (0..grid.nt).map(|k| 0.5 * box_energy(&field, k)).collect();
    // fourth-order derivative of the interpolant through five samples
    let start = kt.saturating_sub(2).min(grid.nt - 5);
    let x = (kt - start) as f64;
    let lhs = (0..5).map(|j| lagrange_slope(j, x) * e[start + j]).sum::<f64>() / grid.dt();
    Ok(EnergyIdentity { t: grid.time_at(kt), energy: e[kt], lhs, rhs: -spectral_dissipation(&field, kt)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic(n: usize, nt: usize) -> Grid {
        Grid::cube(n, -PI, PI, nt, (0.0, 1.0), true).unwrap()
    }

    #[test]
    fn derivative_of_a_mode() {
        let g = Grid::new([16, 8, 12], 2, [0.0; 3], [2.0 * PI, 1.0, 3.0], (0.0, 1.0), [true; 3]).unwrap();
        let fft = Fft3::new(&g).unwrap();
        let f = SampledField::from_fn(g.clone(), false, |_, x| {
            ([(3.0 * x[0]).sin() * (2.0 * PI * x[1]).cos(), (2.0 * PI * x[2] / 3.0).sin(), 0.0], 0.0)
        })
        .unwrap();
        let d = fft.derivative(f.component(0, 0), 1);
        let dz = fft.derivative(f.component(0, 1), 2);
        for idx in 0..g.nodes_per_slice() {
            let (i, j, k) = g.unindex(idx);
            let x = g.node(i, j, k);
            let exact = -(3.0 * x[0]).sin() * 2.0 * PI * (2.0 * PI * x[1]).sin();
            assert!((d[idx] - exact).abs() < 1e-11);
            let exact_z = 2.0 * PI / 3.0 * (2.0 * PI * x[2] / 3.0).cos();
            assert!((dz[idx] - exact_z).abs() < 1e-11);
        }
    }

    #[test]
    fn constant_velocity_has_zero_pressure() {
        let g = periodic(8, 2);
        let c = vec![1.5; 512];
        let p = solve_pressure_periodic(&g, [&c, &c, &c]).unwrap();
        assert!(p.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn shear_mode_has_zero_pressure() {
        // u = (sin y, 0, 0): u_i u_j depends on y only through u_1², ∂_1∂_1 of it is 0
        let g = periodic(16, 2);
        let f = SampledField::from_fn(g.clone(), false, |_, x| ([x[1].sin(), 0.0, 0.0], 0.0)).unwrap();
        let p = solve_pressure_periodic(&g, [f.component(0, 0), f.component(0, 1), f.component(0, 2)]).unwrap();
        assert!(p.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn beltrami_pressure_is_minus_half_speed_squared() {
        let g = periodic(64, 2);
        let spec = GeneratorSpec { profile: Profile::BeltramiAbc { a: 1.0, b: 0.8, c: 0.6 }, grid: g.clone() };
        let f = generate(&spec).unwrap();
        let p = solve_pressure_periodic(&g, [f.component(1, 0), f.component(1, 1), f.component(1, 2)]).unwrap();
        let exact = f.pressure_slice(1).unwrap();
        let num: f64 = p.iter().zip(exact).map(|(a, b)| (a - b) * (a - b)).sum();
        let den: f64 = exact.iter().map(|b| b * b).sum();
        assert!((num / den).sqrt() < 1e-6, "{}", (num / den).sqrt());
    }

    #[test]
    fn pressure_solves_the_discrete_poisson_problem() {
        let g = periodic(16, 2);
        let spec = GeneratorSpec {
            profile: Profile::RandomDivfree { seed: 7, k_max: 4, slope: 1.0, amplitude: 1.0, decay: false },
            grid: g.clone(),
        };
        let f = generate(&spec).unwrap();
        let u = [f.component(0, 0), f.component(0, 1), f.component(0, 2)];
        let p = solve_pressure_periodic(&g, u).unwrap();
        let fft = Fft3::new(&g).unwrap();
        let lap: Vec<f64> = {
            let mut hat = fft.forward(&p);
            fft.map_modes(&mut hat, |k, v| -(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * v);
            fft.inverse(hat)
        };
        let mut src = vec![0.0; g.nodes_per_slice()];
        for i in 0..3 {
            for j in 0..3 {
                let prod: Vec<f64> = (0..src.len()).map(|n| u[i][n] * u[j][n]).collect();
                let d = fft.derivative(&fft.derivative(&prod, j), i);
                src.iter_mut().zip(d).for_each(|(s, v)| *s += v);
            }
        }
        let mean = src.iter().sum::<f64>() / src.len() as f64;
        let scale = src.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in lap.iter().zip(&src) {
            assert!((-a - (b - mean)).abs() < 1e-10 * scale, "{a} vs {b}");
        }
        assert!(p.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn random_field_is_spectrally_solenoidal() {
        let spec = GeneratorSpec {
            profile: Profile::RandomDivfree { seed: 1, k_max: 5, slope: 0.5, amplitude: 1.0, decay: true },
            grid: periodic(24, 3),
        };
        let f = generate(&spec).unwrap();
        for kt in 0..3 {
            assert!(spectral_divergence(&f, kt).unwrap().iter().all(|v| v.abs() < 1e-11));
        }
    }

    #[test]
    fn energy_identity() {
        let grid = Grid::cube(64, -PI, PI, 33, (0.0, 2.0), true).unwrap();
        let spec = GeneratorSpec { profile: Profile::BeltramiAbc { a: 1.0, b: 1.0, c: 1.0 }, grid };
        let at0 = exact_energy_identity(&spec, 0).unwrap();
        let full = 3.0 * (2.0 * PI).powi(3);
        assert!((2.0 * at0.energy / full - 1.0).abs() < 1e-12);
        for kt in [0, 1, 16, 31, 32] {
            let e = exact_energy_identity(&spec, kt).unwrap();
            assert!((e.ratio() - 1.0).abs() < 1e-3, "kt={kt}: {e:?}");
        }
        let zero = GeneratorSpec { profile: Profile::BeltramiAbc { a: 0.0, b: 0.0, c: 0.0 }, grid: spec.grid.clone() };
        let z = exact_energy_identity(&zero, 3).unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
        let wrong = GeneratorSpec { profile: Profile::Constant { velocity: [1.0; 3], pressure: 0.0 }, grid: spec.grid };
        assert!(exact_energy_identity(&wrong, 0).is_err());
    }

    #[test]
    fn non_periodic_is_rejected() {
        let g = Grid::cube(8, 0.0, 1.0, 2, (0.0, 1.0), false).unwrap();
        let c = vec![0.0; 512];
        assert!(matches!(solve_pressure_periodic(&g, [&c, &c, &c]), Err(Error::NotPeriodic)));
    }
}
