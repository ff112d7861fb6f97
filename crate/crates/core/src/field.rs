//! Sampled space-time fields, query geometry and ball quadrature.
//!
//! Nodes are laid out x-fastest (`i + nx * (j + ny * k)`). On a periodic
//! axis the `n` nodes split `[lower, upper)` into `n` equal cells; on a
//! non-periodic axis they include both end points and the dual cells of the
//! two boundary nodes are clipped to the box.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::math::{self, abs_pow};

/// Sub-cell samples per axis used to estimate ball coverage of boundary cells.
pub const COVERAGE_SUBSAMPLES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dims: [usize; 3],
    pub nt: usize,
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    /// `(t_a, t_b)`, sampled uniformly with `nt` samples including both ends.
    pub time: (f64, f64),
    pub periodic: [bool; 3],
}

impl Grid {
    pub fn new(
        dims: [usize; 3],
        nt: usize,
        lower: [f64; 3],
        upper: [f64; 3],
        time: (f64, f64),
        periodic: [bool; 3],
    ) -> Result<Self> {
        if dims.iter().any(|&n| n < 2) || nt < 2 {
            bail!(InvalidGrid, "all dims must be >= 2, got {dims:?} x {nt}");
        }
        for a in 0..3 {
            if !(lower[a].is_finite() && upper[a].is_finite() && upper[a] > lower[a]) {
                bail!(InvalidGrid, "axis {a} has non-positive extent [{}, {}]", lower[a], upper[a]);
            }
        }
        if !(time.0.is_finite() && time.1.is_finite() && time.0 < time.1) {
            bail!(InvalidGrid, "time interval [{}, {}] is empty", time.0, time.1);
        }
        Ok(Self { dims, nt, lower, upper, time, periodic })
    }

    /// Same spatial lattice on the cube `[lo, hi]^3` with `n` nodes per axis.
    pub fn cube(n: usize, lo: f64, hi: f64, nt: usize, time: (f64, f64), periodic: bool) -> Result<Self> {
        Self::new([n; 3], nt, [lo; 3], [hi; 3], time, [periodic; 3])
    }

    pub fn nodes_per_slice(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let n = self.dims[axis];
        if self.periodic[axis] {
            self.extent(axis) / n as f64
        } else {
            self.extent(axis) / (n - 1) as f64
        }
    }

    pub fn spacings(&self) -> [f64; 3] {
        [self.spacing(0), self.spacing(1), self.spacing(2)]
    }

    pub fn max_spacing(&self) -> f64 {
        let h = self.spacings();
        h[0].max(h[1]).max(h[2])
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + i as f64 * self.spacing(axis)
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.coord(0, i), self.coord(1, j), self.coord(2, k)]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    /// Inverse of [`Grid::index`].
    #[inline]
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.dims[0];
        let rest = idx / self.dims[0];
        (i, rest % self.dims[1], rest / self.dims[1])
    }

    pub fn dt(&self) -> f64 {
        (self.time.1 - self.time.0) / (self.nt - 1) as f64
    }

    pub fn time_at(&self, k: usize) -> f64 {
        if k + 1 == self.nt {
            self.time.1
        } else {
            self.time.0 + k as f64 * self.dt()
        }
    }

    fn time_tolerance(&self) -> f64 {
        1e-9 * self.dt()
    }

    /// Nearest sample at or below `t`.
    pub fn time_index_at_or_below(&self, t: f64) -> Result<usize> {
        let tol = self.time_tolerance();
        if !(t >= self.time.0 - tol && t <= self.time.1 + tol) {
            bail!(Domain, "time {t} outside [{}, {}]", self.time.0, self.time.1);
        }
        let k = math::floor((t - self.time.0 + tol) / self.dt()) as usize;
        Ok(k.min(self.nt - 1))
    }

    /// Sample indices with `lo <= t_k <= hi` (up to rounding).
    pub fn time_indices_within(&self, lo: f64, hi: f64) -> core::ops::Range<usize> {
        let tol = self.time_tolerance();
        let dt = self.dt();
        let first = ((lo - self.time.0 - tol) / dt).ceil_clamped(self.nt);
        let last = math::floor((hi - self.time.0 + tol) / dt);
        let end = if last < 0.0 { 0 } else { (last as usize + 1).min(self.nt) };
        first..end.max(first)
    }

    /// Signed displacement `x - x0` along `axis`, using the minimum image on
    /// periodic axes.
    #[inline]
    pub fn displacement(&self, axis: usize, x: f64, x0: f64) -> f64 {
        let d = x - x0;
        if self.periodic[axis] {
            let l = self.extent(axis);
            d - l * math::round(d / l)
        } else {
            d
        }
    }

    /// Dual cell `[lo, hi]` of node `i` along `axis`, clipped to the box on
    /// non-periodic axes.
    pub fn cell_bounds(&self, axis: usize, i: usize) -> (f64, f64) {
        let h = self.spacing(axis);
        let x = self.coord(axis, i);
        let (mut lo, mut hi) = (x - 0.5 * h, x + 0.5 * h);
        if !self.periodic[axis] {
            lo = lo.max(self.lower[axis]);
            hi = hi.min(self.upper[axis]);
        }
        (lo, hi)
    }

    pub fn cell_width(&self, axis: usize, i: usize) -> f64 {
        let (lo, hi) = self.cell_bounds(axis, i);
        hi - lo
    }

    pub fn cell_volume(&self, i: usize, j: usize, k: usize) -> f64 {
        self.cell_width(0, i) * self.cell_width(1, j) * self.cell_width(2, k)
    }

    /// Node indices along `axis` whose cells may meet `[c - reach, c + reach]`.
    /// Periodic axes wrap; each index appears at most once.
    pub(crate) fn candidate_indices(&self, axis: usize, c: f64, reach: f64) -> Vec<usize> {
        let n = self.dims[axis];
        let h = self.spacing(axis);
        if self.periodic[axis] {
            let span = (reach / h) as isize + 2;
            if 2 * span + 1 >= n as isize {
                return (0..n).collect();
            }
            let centre = math::round((c - self.lower[axis]) / h) as isize;
            (-span..=span)
                .map(|o| (centre + o).rem_euclid(n as isize) as usize)
                .collect()
        } else {
            let lo = math::floor((c - reach - self.lower[axis]) / h) as isize - 1;
            let hi = math::floor((c + reach - self.lower[axis]) / h) as isize + 2;
            let lo = lo.max(0) as usize;
            let hi = (hi.max(-1) + 1).min(n as isize) as usize;
            (lo..hi.max(lo)).collect()
        }
    }
}

trait CeilClamped {
    fn ceil_clamped(self, n: usize) -> usize;
}

impl CeilClamped for f64 {
    fn ceil_clamped(self, n: usize) -> usize {
        if self <= 0.0 {
            0
        } else {
            (libm::ceil(self) as usize).min(n)
        }
    }
}

/// Velocity (three components) and optional pressure on a [`Grid`], stored
/// time-slowest then component then z, y, x.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: Grid,
    velocity: Vec<f64>,
    pressure: Option<Vec<f64>>,
}

impl SampledField {
    pub fn new(grid: Grid, velocity: Vec<f64>, pressure: Option<Vec<f64>>) -> Result<Self> {
        let n = grid.nodes_per_slice() * grid.nt;
        if velocity.len() != 3 * n {
            bail!(InvalidField, "velocity has {} values, expected {}", velocity.len(), 3 * n);
        }
        if let Some(p) = &pressure {
            if p.len() != n {
                bail!(InvalidField, "pressure has {} values, expected {n}", p.len());
            }
        }
        let all = velocity.iter().chain(pressure.iter().flatten());
        if let Some(pos) = all.clone().position(|v| !v.is_finite()) {
            bail!(InvalidField, "non-finite value at flat position {pos}");
        }
        Ok(Self { grid, velocity, pressure })
    }

    /// Evaluates `f(t, x) -> (u, p)` at every node. Pressure is stored only
    /// when `with_pressure` is set.
    pub fn from_fn<F>(grid: Grid, with_pressure: bool, mut f: F) -> Result<Self>
    where
        F: FnMut(f64, [f64; 3]) -> ([f64; 3], f64),
    {
        let m = grid.nodes_per_slice();
        let mut velocity = vec![0.0; 3 * m * grid.nt];
        let mut pressure = with_pressure.then(|| vec![0.0; m * grid.nt]);
        for kt in 0..grid.nt {
            let t = grid.time_at(kt);
            for idx in 0..m {
                let (i, j, k) = grid.unindex(idx);
                let (u, p) = f(t, grid.node(i, j, k));
                for c in 0..3 {
                    velocity[(3 * kt + c) * m + idx] = u[c];
                }
                if let Some(pr) = pressure.as_mut() {
                    pr[kt * m + idx] = p;
                }
            }
        }
        Self::new(grid, velocity, pressure)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn has_pressure(&self) -> bool {
        self.pressure.is_some()
    }

    /// Raw velocity payload in storage order.
    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn pressure(&self) -> Option<&[f64]> {
        self.pressure.as_deref()
    }

    pub fn component(&self, kt: usize, c: usize) -> &[f64] {
        let m = self.grid.nodes_per_slice();
        &self.velocity[(3 * kt + c) * m..(3 * kt + c + 1) * m]
    }

    pub fn pressure_slice(&self, kt: usize) -> Option<&[f64]> {
        let m = self.grid.nodes_per_slice();
        self.pressure.as_ref().map(|p| &p[kt * m..(kt + 1) * m])
    }

    #[inline]
    pub fn velocity_at(&self, kt: usize, idx: usize) -> [f64; 3] {
        let m = self.grid.nodes_per_slice();
        let base = 3 * kt * m + idx;
        [self.velocity[base], self.velocity[base + m], self.velocity[base + 2 * m]]
    }

    /// `|u|` at every node of time sample `kt`.
    pub fn speed_slice(&self, kt: usize) -> Vec<f64> {
        let (u, v, w) = (self.component(kt, 0), self.component(kt, 1), self.component(kt, 2));
        u.iter()
            .zip(v)
            .zip(w)
            .map(|((a, b), c)| math::sqrt(a * a + b * b + c * c))
            .collect()
    }

    /// Replaces (or adds) the pressure payload.
    pub fn with_pressure(self, pressure: Vec<f64>) -> Result<Self> {
        Self::new(self.grid, self.velocity, Some(pressure))
    }

    pub fn without_pressure(self) -> Self {
        Self { pressure: None, ..self }
    }

    /// Multiplies velocity by `su` and pressure by `sp`.
    pub fn scaled(&self, su: f64, sp: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            velocity: self.velocity.iter().map(|v| v * su).collect(),
            pressure: self.pressure.as_ref().map(|p| p.iter().map(|v| v * sp).collect()),
        }
    }

    /// Multiplies every velocity sample at time `t` by `g(t)` and every
    /// pressure sample by `g(t)^2`.
    pub fn modulated<G: Fn(f64) -> f64>(&self, g: G) -> Self {
        let m = self.grid.nodes_per_slice();
        let mut out = self.clone();
        for kt in 0..self.grid.nt {
            let s = g(self.grid.time_at(kt));
            out.velocity[3 * kt * m..3 * (kt + 1) * m].iter_mut().for_each(|v| *v *= s);
            if let Some(p) = out.pressure.as_mut() {
                p[kt * m..(kt + 1) * m].iter_mut().for_each(|v| *v *= s * s);
            }
        }
        out
    }

    /// Trilinear interpolation of velocity and pressure (zero when absent)
    /// at `x` on time sample `kt`. Points outside a non-periodic axis are
    /// clamped to the box.
    pub fn sample_trilinear(&self, kt: usize, x: [f64; 3]) -> ([f64; 3], f64) {
        let g = &self.grid;
        let mut corners = [[(0usize, 0.0f64); 2]; 3];
        for a in 0..3 {
            corners[a] = locate(g, a, x[a]);
        }
        let m = g.nodes_per_slice();
        let mut u = [0.0; 3];
        let mut p = 0.0;
        for (ci, wi) in corners[0] {
            for (cj, wj) in corners[1] {
                for (ck, wk) in corners[2] {
                    let w = wi * wj * wk;
                    if w == 0.0 {
                        continue;
                    }
                    let idx = g.index(ci, cj, ck);
                    let v = self.velocity_at(kt, idx);
                    for c in 0..3 {
                        u[c] += w * v[c];
                    }
                    if let Some(pr) = &self.pressure {
                        p += w * pr[kt * m + idx];
                    }
                }
            }
        }
        (u, p)
    }
}

fn locate(g: &Grid, axis: usize, x: f64) -> [(usize, f64); 2] {
    let n = g.dims[axis];
    let h = g.spacing(axis);
    let s = (x - g.lower[axis]) / h;
    if g.periodic[axis] {
        let f = math::floor(s);
        let w = s - f;
        let i0 = (f as i64).rem_euclid(n as i64) as usize;
        [(i0, 1.0 - w), ((i0 + 1) % n, w)]
    } else {
        let s = s.clamp(0.0, (n - 1) as f64);
        let i0 = (math::floor(s) as usize).min(n - 2);
        let w = s - i0 as f64;
        [(i0, 1.0 - w), (i0 + 1, w)]
    }
}

/// Spatial ball `B_r(x0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallSpec {
    pub center: [f64; 3],
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: [f64; 3], radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            bail!(Parameter, "ball radius must be positive, got {radius}");
        }
        if center.iter().any(|c| !c.is_finite()) {
            bail!(Parameter, "ball centre must be finite");
        }
        Ok(Self { center, radius })
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * math::PI * self.radius * self.radius * self.radius
    }
}

/// Parabolic cylinder `Q_r(z0) = B_r(x0) x (t0 - r^2, t0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderSpec {
    pub t0: f64,
    pub center: [f64; 3],
    pub radius: f64,
}

impl CylinderSpec {
    pub fn new(t0: f64, center: [f64; 3], radius: f64) -> Result<Self> {
        BallSpec::new(center, radius)?;
        if !t0.is_finite() {
            bail!(Parameter, "cylinder top time must be finite");
        }
        Ok(Self { t0, center, radius })
    }

    pub fn ball(&self) -> BallSpec {
        BallSpec { center: self.center, radius: self.radius }
    }

    pub fn t_start(&self) -> f64 {
        self.t0 - self.radius * self.radius
    }
}

/// Quadrature weights of a ball on a grid: node index and covered cell
/// volume. Cells cut by the sphere are covered fractionally, estimated with
/// [`COVERAGE_SUBSAMPLES`]^3 sub-cell samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BallStencil {
    pub ball: BallSpec,
    entries: Vec<(usize, f64)>,
    measure: f64,
}

impl BallStencil {
    pub fn new(grid: &Grid, ball: &BallSpec) -> Result<Self> {
        for a in 0..3 {
            if grid.periodic[a] && 2.0 * ball.radius > grid.extent(a) {
                bail!(Domain, "ball radius {} exceeds half the periodic extent on axis {a}", ball.radius);
            }
        }
        let r = ball.radius;
        let r2 = r * r;
        let h = grid.spacings();
        let cand: [Vec<usize>; 3] =
            core::array::from_fn(|a| grid.candidate_indices(a, ball.center[a], r + h[a]));
        // Per-axis relative cell intervals, cached.
        let rel: [Vec<(f64, f64)>; 3] = core::array::from_fn(|a| {
            cand[a]
                .iter()
                .map(|&i| {
                    let x = grid.coord(a, i);
                    let d = grid.displacement(a, x, ball.center[a]);
                    let (lo, hi) = grid.cell_bounds(a, i);
                    (d + (lo - x), d + (hi - x))
                })
                .collect()
        });
        let mut entries = Vec::new();
        let mut measure = 0.0;
        for (kk, &k) in cand[2].iter().enumerate() {
            let (zlo, zhi) = rel[2][kk];
            let (zn, zf) = near_far(zlo, zhi);
            if zn > r2 {
                continue;
            }
            for (jj, &j) in cand[1].iter().enumerate() {
                let (ylo, yhi) = rel[1][jj];
                let (yn, yf) = near_far(ylo, yhi);
                if zn + yn > r2 {
                    continue;
                }
                for (ii, &i) in cand[0].iter().enumerate() {
                    let (xlo, xhi) = rel[0][ii];
                    let (xn, xf) = near_far(xlo, xhi);
                    if xn + yn + zn >= r2 {
                        continue;
                    }
                    let vol = (xhi - xlo) * (yhi - ylo) * (zhi - zlo);
                    let frac = if xf + yf + zf <= r2 {
                        1.0
                    } else {
                        coverage([xlo, xhi], [ylo, yhi], [zlo, zhi], r2)
                    };
                    if frac > 0.0 && vol > 0.0 {
                        let w = frac * vol;
                        entries.push((grid.index(i, j, k), w));
                        measure += w;
                    }
                }
            }
        }
        if entries.is_empty() {
            bail!(Domain, "ball {:?} r={} does not meet the grid box", ball.center, ball.radius);
        }
        Ok(Self { ball: *ball, entries, measure })
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Covered measure (approximates `|B_r|` when the ball is inside the box).
    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// `∫_B |f|^p`, or the maximum of `|f|` over covered cells for `p = ∞`.
    pub fn integrate(&self, values: &[f64], p: f64) -> Result<f64> {
        check_exponent(p)?;
        if p.is_infinite() {
            return Ok(self.entries.iter().map(|&(i, _)| math::abs(values[i])).fold(0.0, f64::max));
        }
        Ok(self.entries.iter().map(|&(i, w)| w * abs_pow(values[i], p)).sum())
    }

    /// `∫_B g(idx) dx` for an arbitrary per-node integrand.
    pub fn integrate_with<F: FnMut(usize) -> f64>(&self, mut g: F) -> f64 {
        self.entries.iter().map(|&(i, w)| w * g(i)).sum()
    }

    /// Volume average of the velocity on time sample `kt`.
    pub fn mean_velocity(&self, field: &SampledField, kt: usize) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for c in 0..3 {
            let f = field.component(kt, c);
            acc[c] = self.entries.iter().map(|&(i, w)| w * f[i]).sum::<f64>() / self.measure;
        }
        acc
    }

    /// `(value, weight)` pairs for building distribution functions.
    pub fn weighted<'a>(&'a self, values: &'a [f64]) -> impl Iterator<Item = (f64, f64)> + 'a {
        self.entries.iter().map(move |&(i, w)| (values[i], w))
    }
}

/// Squared distances from the origin to the nearest and farthest point of
/// `[lo, hi]`.
#[inline]
fn near_far(lo: f64, hi: f64) -> (f64, f64) {
    let near = if lo > 0.0 {
        lo
    } else if hi < 0.0 {
        -hi
    } else {
        0.0
    };
    let far = lo.abs().max(hi.abs());
    (near * near, far * far)
}

fn coverage(x: [f64; 2], y: [f64; 2], z: [f64; 2], r2: f64) -> f64 {
    let s = COVERAGE_SUBSAMPLES;
    let at = |iv: [f64; 2], q: usize| iv[0] + (q as f64 + 0.5) / s as f64 * (iv[1] - iv[0]);
    let mut inside = 0usize;
    for c in 0..s {
        let pz = at(z, c);
        for b in 0..s {
            let py = at(y, b);
            for a in 0..s {
                let px = at(x, a);
                if px * px + py * py + pz * pz < r2 {
                    inside += 1;
                }
            }
        }
    }
    inside as f64 / (s * s * s) as f64
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        bail!(Parameter, "exponent must be >= 1, got {p}");
    }
    Ok(())
}

/// `∫_{B_r(x0)} |f|^p dx` for a scalar lattice on `grid` (or the maximum of
/// `|f|` over covered cells when `p = ∞`).
pub fn integrate_ball(grid: &Grid, values: &[f64], ball: &BallSpec, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if values.len() != grid.nodes_per_slice() {
        bail!(Parameter, "lattice has {} values, grid has {}", values.len(), grid.nodes_per_slice());
    }
    BallStencil::new(grid, ball)?.integrate(values, p)
}

/// `u_{x0,ρ}` at the sample at or below `t`.
pub fn local_mean(field: &SampledField, t: f64, ball: &BallSpec) -> Result<[f64; 3]> {
    let kt = field.grid().time_index_at_or_below(t)?;
    Ok(BallStencil::new(field.grid(), ball)?.mean_velocity(field, kt))
}

pub(crate) fn check_gradient_axes(grid: &Grid) -> Result<()> {
    for a in 0..3 {
        if !grid.periodic[a] && grid.dims[a] < 3 {
            return Err(Error::InvalidGrid(alloc::format!(
                "axis {a} has {} nodes; one-sided differences need 3",
                grid.dims[a]
            )));
        }
    }
    Ok(())
}

/// Second-order derivative of `f` along `axis` at node `(i, j, k)`.
#[inline]
fn diff(grid: &Grid, f: &[f64], axis: usize, ijk: [usize; 3]) -> f64 {
    let n = grid.dims[axis];
    let h = grid.spacing(axis);
    let at = |q: usize| {
        let mut c = ijk;
        c[axis] = q;
        f[grid.index(c[0], c[1], c[2])]
    };
    let q = ijk[axis];
    if grid.periodic[axis] {
        (at((q + 1) % n) - at((q + n - 1) % n)) / (2.0 * h)
    } else if q == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    } else if q == n - 1 {
        (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
    } else {
        (at(q + 1) - at(q - 1)) / (2.0 * h)
    }
}

/// `∂_j u_i` at node `idx` of time sample `kt`, row `i`, column `j`.
pub fn velocity_jacobian_at(field: &SampledField, kt: usize, idx: usize) -> [[f64; 3]; 3] {
    let g = field.grid();
    let (i, j, k) = g.unindex(idx);
    let mut jac = [[0.0; 3]; 3];
    for (c, row) in jac.iter_mut().enumerate() {
        let f = field.component(kt, c);
        for (a, d) in row.iter_mut().enumerate() {
            *d = diff(g, f, a, [i, j, k]);
        }
    }
    jac
}

/// `|∇u|^2 = Σ_{i,j} (∂_j u_i)^2` at node `idx` of sample `kt`.
#[inline]
pub fn gradient_sq_at(field: &SampledField, kt: usize, idx: usize) -> f64 {
    velocity_jacobian_at(field, kt, idx).iter().flatten().map(|d| d * d).sum()
}

/// `|∇u|^2` at every node of the sample at or below `t`.
pub fn gradient(field: &SampledField, t: f64) -> Result<Vec<f64>> {
    check_gradient_axes(field.grid())?;
    let kt = field.grid().time_index_at_or_below(t)?;
    Ok((0..field.grid().nodes_per_slice()).map(|idx| gradient_sq_at(field, kt, idx)).collect())
}
