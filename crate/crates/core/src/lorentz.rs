//! Distribution functions, weak-Lorentz and `L^{r,s}` norms of
//! piecewise-constant data, and the closed-form tail-split integral bounds.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{bail, Result};
use crate::math::{self, abs_pow, pow};

/// Exact distribution function `m(σ) = |{|f| > σ}|` of a piecewise-constant
/// function, stored as ascending breakpoints `(σ_k, m_k)`. Between
/// breakpoints `m` is constant: `m(σ) = m_k` for `σ_k <= σ < σ_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionCurve {
    breakpoints: Vec<(f64, f64)>,
    total_measure: f64,
}

impl DistributionCurve {
    /// Builds the curve from `(value, measure)` cells. Values enter through
    /// their absolute value; zero-measure cells are ignored.
    pub fn from_weighted<I>(input: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut cells: Vec<(f64, f64)> = Vec::new();
        for (v, w) in input {
            if !v.is_finite() || !w.is_finite() || w < 0.0 {
                bail!(Parameter, "distribution input must be finite with non-negative measure");
            }
            if w > 0.0 {
                cells.push((math::abs(v), w));
            }
        }
        if cells.is_empty() {
            bail!(Domain, "empty region");
        }
        cells.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
        let total_measure: f64 = cells.iter().map(|c| c.1).sum();

        // Walk values from the top; `above` is the measure strictly above the
        // current value.
        let mut desc: Vec<(f64, f64)> = Vec::new();
        let mut above = 0.0;
        let mut i = 0;
        while i < cells.len() {
            let v = cells[i].0;
            let mut w = 0.0;
            while i < cells.len() && cells[i].0 == v {
                w += cells[i].1;
                i += 1;
            }
            desc.push((v, above));
            above += w;
        }
        if desc.last().map(|b| b.0) != Some(0.0) {
            desc.push((0.0, above));
        }
        desc.reverse();
        Ok(Self { breakpoints: desc, total_measure })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn total_measure(&self) -> f64 {
        self.total_measure
    }

    /// `max |f|`.
    pub fn max_value(&self) -> f64 {
        self.breakpoints.last().map_or(0.0, |b| b.0)
    }

    /// `m(σ)` for `σ >= 0`.
    pub fn measure_above(&self, sigma: f64) -> f64 {
        let k = self.breakpoints.partition_point(|b| b.0 <= sigma);
        if k == 0 {
            self.total_measure
        } else {
            self.breakpoints[k - 1].1
        }
    }

    /// `sup_σ σ m(σ)^{1/p}`; `p = ∞` gives `max |f|`.
    pub fn weak_norm(&self, p: f64) -> Result<f64> {
        self.weak_norm_resolved(p, 0.0)
    }

    /// Weak norm restricted to level sets of measure at least `min_measure`.
    ///
    /// On each interval `[σ_k, σ_{k+1})` the product `σ m_k^{1/p}` increases
    /// towards `σ_{k+1}`, so the supremum is `max_k σ_{k+1} m_k^{1/p}` over
    /// the admitted `k`.
    pub fn weak_norm_resolved(&self, p: f64, min_measure: f64) -> Result<f64> {
        check_exponent(p)?;
        let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
        let best = self
            .breakpoints
            .windows(2)
            .filter(|w| w[0].1 > 0.0 && w[0].1 >= min_measure)
            .map(|w| w[1].0 * pow(w[0].1, inv_p))
            .fold(0.0, f64::max);
        Ok(best)
    }

    /// `(r ∫_0^∞ σ^{s-1} m(σ)^{s/r} dσ)^{1/s}`, integrated exactly over the
    /// steps of `m`.
    pub fn lorentz_norm(&self, r: f64, s: f64) -> Result<f64> {
        if !(r >= 1.0 && r.is_finite()) {
            bail!(Parameter, "Lorentz index r must be in [1, ∞), got {r}");
        }
        if !(s >= 1.0 && s.is_finite()) {
            bail!(Parameter, "Lorentz index s must be in [1, ∞), got {s}");
        }
        let integral: f64 = self
            .breakpoints
            .windows(2)
            .filter(|w| w[0].1 > 0.0)
            .map(|w| pow(w[0].1, s / r) * (pow(w[1].0, s) - pow(w[0].0, s)) / s)
            .sum();
        Ok(pow(r * integral, 1.0 / s))
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        bail!(Parameter, "exponent must be >= 1, got {p}");
    }
    Ok(())
}

/// Direct `(Σ w |v|^p)^{1/p}` (or `max |v|` for `p = ∞`) over weighted cells.
pub fn lp_norm<I>(cells: I, p: f64) -> Result<f64>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    check_exponent(p)?;
    if p.is_infinite() {
        return Ok(cells.into_iter().filter(|c| c.1 > 0.0).map(|c| math::abs(c.0)).fold(0.0, f64::max));
    }
    let s: f64 = cells.into_iter().map(|(v, w)| w * abs_pow(v, p)).sum();
    Ok(pow(s, 1.0 / p))
}

/// Non-negative samples of a function of time. Each sample stands for the
/// part of `span` closest to it, unless built from explicit steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
    span: (f64, f64),
}

impl TimeSeries {
    /// Samples over `[times[0], times[last]]`.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let span = match (times.first(), times.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => bail!(Domain, "empty time series"),
        };
        Self::with_span(times, values, span)
    }

    /// Samples representing the interval `span`, which must contain every
    /// sample time.
    pub fn with_span(times: Vec<f64>, values: Vec<f64>, span: (f64, f64)) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            bail!(Parameter, "time series needs equal, non-zero numbers of times and values");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            bail!(Parameter, "sample times must be strictly increasing");
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            bail!(Parameter, "time series values must be finite and non-negative");
        }
        if !(span.0 <= times[0] && times[times.len() - 1] <= span.1) {
            bail!(Parameter, "span [{}, {}] does not contain the samples", span.0, span.1);
        }
        let n = times.len();
        let weights = (0..n)
            .map(|i| {
                let lo = if i == 0 { span.0 } else { 0.5 * (times[i - 1] + times[i]) };
                let hi = if i + 1 == n { span.1 } else { 0.5 * (times[i] + times[i + 1]) };
                hi - lo
            })
            .collect();
        Ok(Self { times, values, weights, span })
    }

    /// Step function taking `values[i]` on consecutive intervals of length
    /// `durations[i]` starting at `start`.
    pub fn from_steps(start: f64, durations: &[f64], values: Vec<f64>) -> Result<Self> {
        if durations.len() != values.len() || durations.is_empty() {
            bail!(Parameter, "need one duration per value");
        }
        if durations.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            bail!(Parameter, "step durations must be positive");
        }
        let mut t = start;
        let mut times = Vec::with_capacity(durations.len());
        for d in durations {
            times.push(t + 0.5 * d);
            t += d;
        }
        let mut ts = Self::with_span(times, values, (start, t))?;
        ts.weights = durations.to_vec();
        Ok(ts)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn distribution(&self) -> Result<DistributionCurve> {
        DistributionCurve::from_weighted(self.cells())
    }

    /// `∫ f(t)^e dt` over the span.
    pub fn integral_of_power(&self, e: f64) -> f64 {
        self.cells().map(|(v, w)| w * pow(v, e)).sum()
    }

    /// New series with every value multiplied by `s >= 0`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }
}

/// Weak `L^{p,∞}` norm of a time series (exact for its step function).
pub fn weak_norm(series: &TimeSeries, p: f64) -> Result<f64> {
    series.distribution()?.weak_norm(p)
}

/// `L^{r,s}` norm of a time series.
pub fn lorentz_rs_norm(series: &TimeSeries, r: f64, s: f64) -> Result<f64> {
    series.distribution()?.lorentz_norm(r, s)
}

/// The three exponent regimes of the cubic-term estimate, split at `p = 3`
/// and `p = 6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailRegime {
    /// `2 <= p < 3`, integrand `f^{3p/(2p-3)}`.
    Low,
    /// `3 <= p <= 6`, integrand `f^{p/(p-2)}`.
    Mid,
    /// `6 < p <= ∞`, integrand `f^{3/2}`.
    High,
}

impl TailRegime {
    pub fn for_exponent(p: f64) -> Result<Self> {
        if p.is_nan() || p < 2.0 {
            bail!(Parameter, "spatial exponent must be >= 2, got {p}");
        }
        Ok(if p < 3.0 {
            Self::Low
        } else if p <= 6.0 {
            Self::Mid
        } else {
            Self::High
        })
    }

    pub fn contains(self, p: f64) -> bool {
        match self {
            Self::Low => (2.0..3.0).contains(&p),
            Self::Mid => (3.0..=6.0).contains(&p),
            Self::High => p > 6.0,
        }
    }

    /// Power of the time profile integrated in this regime.
    pub fn integrand_exponent(self, p: f64) -> f64 {
        match self {
            Self::Low => 3.0 * p / (2.0 * p - 3.0),
            Self::Mid => p / (p - 2.0),
            Self::High => 1.5,
        }
    }
}

/// Time exponent `q` paired with `p` through `1/q + 1/p = 1/2`
/// (`q = ∞` at `p = 2`, `q = 2` at `p = ∞`).
pub fn dual_time_exponent(p: f64) -> Result<f64> {
    if p.is_nan() || p < 2.0 {
        bail!(Parameter, "spatial exponent must be >= 2, got {p}");
    }
    Ok(if p == 2.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        2.0
    } else {
        2.0 * p / (p - 2.0)
    })
}

/// Closed-form upper bound on `∫_{t0-r^2}^{t0} f^e dt` for a profile `f`
/// with weak `L^{q,∞}` norm `M`, `e` the regime's integrand exponent.
pub fn tail_split_bound(p: f64, r: f64, m: f64, regime: TailRegime) -> Result<f64> {
    if !regime.contains(p) {
        bail!(Parameter, "p = {p} outside the {regime:?} regime");
    }
    if !(r > 0.0 && r.is_finite()) || !(m >= 0.0 && m.is_finite()) {
        bail!(Parameter, "need r > 0 and M >= 0");
    }
    Ok(match regime {
        TailRegime::Low => {
            (4.0 - 6.0 / p) * pow(r, p / (2.0 * p - 3.0)) * pow(m, 3.0 * p / (2.0 * p - 3.0))
        }
        TailRegime::Mid => 2.0 * r * pow(m, p / (p - 2.0)),
        TailRegime::High => {
            let (coef, r_exp) = if p.is_infinite() {
                (4.0, 0.5)
            } else {
                (1.0 + 3.0 * (p - 2.0) / (p + 6.0), 2.0 - (3.0 * p - 6.0) / (2.0 * p))
            };
            coef * pow(r, r_exp) * m * math::sqrt(m)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn half_indicator() {
        let cells = (0..10).map(|i| (if i < 5 { 1.0 } else { 0.0 }, 0.1));
        let d = DistributionCurve::from_weighted(cells).unwrap();
        assert_eq!(d.breakpoints(), &[(0.0, 0.5), (1.0, 0.0)]);
        assert!(close(d.measure_above(0.3), 0.5, 1e-12));
        assert_eq!(d.measure_above(1.0), 0.0);
        assert!(close(d.total_measure(), 1.0, 1e-12));
    }

    #[test]
    fn zero_function() {
        let d = DistributionCurve::from_weighted((0..4).map(|_| (0.0, 0.25))).unwrap();
        assert_eq!(d.breakpoints(), &[(0.0, 0.0)]);
        assert_eq!(d.weak_norm(3.0).unwrap(), 0.0);
        assert_eq!(d.lorentz_norm(2.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn empty_region_is_an_error() {
        assert!(DistributionCurve::from_weighted(core::iter::empty()).is_err());
        assert!(DistributionCurve::from_weighted([(1.0, 0.0)]).is_err());
    }

    #[test]
    fn weak_norm_of_constant() {
        let d = DistributionCurve::from_weighted([(2.0, 0.3), (-2.0, 0.5)]).unwrap();
        assert!(close(d.weak_norm(3.0).unwrap(), 2.0 * pow(0.8, 1.0 / 3.0), 1e-14));
        assert_eq!(d.weak_norm(f64::INFINITY).unwrap(), 2.0);
        assert!(d.weak_norm(0.5).is_err());
    }

    #[test]
    fn resolved_weak_norm_drops_small_level_sets() {
        // a tall spike on a tiny set over a unit plateau
        let d = DistributionCurve::from_weighted([(100.0, 1e-6), (1.0, 1.0)]).unwrap();
        let exact = d.weak_norm(3.0).unwrap();
        assert!(close(exact, 1.0, 1e-6));
        let d = DistributionCurve::from_weighted([(100.0, 1e-3), (1.0, 1.0)]).unwrap();
        assert!(close(d.weak_norm(3.0).unwrap(), 10.0, 1e-12));
        assert!(close(d.weak_norm_resolved(3.0, 0.01).unwrap(), pow(1.001, 1.0 / 3.0), 1e-12));
    }

    #[test]
    fn lorentz_of_constant() {
        for (r, s) in [(2.0, 2.0), (3.0, 1.0), (1.5, 4.0)] {
            let ts = TimeSeries::from_steps(0.0, &[0.7, 0.8], vec![1.5, 1.5]).unwrap();
            let v = lorentz_rs_norm(&ts, r, s).unwrap();
            let expect = pow(r / s, 1.0 / s) * 1.5 * pow(1.5, 1.0 / r);
            assert!(close(v, expect, 1e-13), "{r} {s}: {v} vs {expect}");
        }
        let zero = TimeSeries::from_steps(0.0, &[1.0], vec![0.0]).unwrap();
        assert_eq!(lorentz_rs_norm(&zero, 2.0, 3.0).unwrap(), 0.0);
        assert!(lorentz_rs_norm(&zero, 0.5, 1.0).is_err());
        assert!(lorentz_rs_norm(&zero, 2.0, f64::INFINITY).is_err());
    }

    /// Two-level step against a midpoint σ-quadrature with 10^6 nodes.
    #[test]
    fn lorentz_two_step_matches_sigma_quadrature() {
        let ts = TimeSeries::from_steps(0.0, &[0.25, 0.75], vec![2.0, 1.0]).unwrap();
        for (r, s) in [(3.0, 2.0), (2.0, 5.0), (1.0, 1.0)] {
            let n = 1_000_000;
            let h = 2.0 / n as f64;
            let m = |sig: f64| if sig < 1.0 { 1.0 } else if sig < 2.0 { 0.25 } else { 0.0 };
            let quad: f64 = (0..n)
                .map(|i| {
                    let sig = (i as f64 + 0.5) * h;
                    pow(sig, s - 1.0) * pow(m(sig), s / r) * h
                })
                .sum();
            let oracle = pow(r * quad, 1.0 / s);
            let v = lorentz_rs_norm(&ts, r, s).unwrap();
            assert!(close(v, oracle, 1e-6), "{r},{s}: {v} vs {oracle}");
        }
    }

    #[test]
    fn time_series_weights() {
        let ts = TimeSeries::with_span(vec![0.0, 1.0, 3.0], vec![1.0, 2.0, 3.0], (0.0, 4.0)).unwrap();
        assert_eq!(ts.weights(), &[0.5, 1.5, 2.0]);
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        assert!(TimeSeries::with_span(vec![0.0, 1.0], vec![1.0, 1.0], (0.5, 1.0)).is_err());
    }

    #[test]
    fn tail_bounds_closed_forms() {
        // 2rM^{p/(p-2)} at p = 3
        assert!(close(tail_split_bound(3.0, 0.5, 2.0, TailRegime::Mid).unwrap(), 8.0, 1e-14));
        // r^2 M^6 at p = 2
        assert!(close(tail_split_bound(2.0, 0.5, 1.0, TailRegime::Low).unwrap(), 0.25, 1e-14));
        assert!(close(tail_split_bound(2.0, 0.5, 1.3, TailRegime::Low).unwrap(), 0.25 * pow(1.3, 6.0), 1e-13));
        // coefficient 1 + 3(p-2)/(p+6) -> 4
        assert!(close(tail_split_bound(f64::INFINITY, 1.0, 1.0, TailRegime::High).unwrap(), 4.0, 1e-14));
        let big = tail_split_bound(1e12, 1.0, 1.0, TailRegime::High).unwrap();
        assert!(close(big, 4.0, 1e-10));
        assert!(tail_split_bound(3.0, 1.0, 1.0, TailRegime::Low).is_err());
        assert!(tail_split_bound(6.5, 1.0, 1.0, TailRegime::Mid).is_err());
        assert!(tail_split_bound(6.0, 1.0, 1.0, TailRegime::High).is_err());
    }

    #[test]
    fn dual_exponents() {
        assert_eq!(dual_time_exponent(2.0).unwrap(), f64::INFINITY);
        assert_eq!(dual_time_exponent(f64::INFINITY).unwrap(), 2.0);
        assert!(close(dual_time_exponent(3.0).unwrap(), 6.0, 1e-15));
        assert!(close(dual_time_exponent(6.0).unwrap(), 3.0, 1e-15));
        assert!(dual_time_exponent(1.5).is_err());
    }

    proptest! {
        #[test]
        fn weak_norm_below_lp(values in proptest::collection::vec(-50.0f64..50.0, 1..60),
                              p in 1.0f64..8.0) {
            let cells: Vec<(f64, f64)> = values.iter().enumerate().map(|(i, &v)| (v, 0.01 + (i % 7) as f64 * 0.03)).collect();
            let d = DistributionCurve::from_weighted(cells.iter().copied()).unwrap();
            let weak = d.weak_norm(p).unwrap();
            let strong = lp_norm(cells.iter().copied(), p).unwrap();
            prop_assert!(weak <= strong * (1.0 + 1e-12));
        }

        #[test]
        fn norms_are_homogeneous(values in proptest::collection::vec(0.0f64..10.0, 1..40),
                                 lambda in 0.01f64..100.0, p in 1.0f64..6.0, s in 1.0f64..4.0) {
            let durations: Vec<f64> = (0..values.len()).map(|i| 0.1 + (i % 3) as f64 * 0.2).collect();
            let ts = TimeSeries::from_steps(0.0, &durations, values.clone()).unwrap();
            let scaled = ts.scaled(lambda);
            let (a, b) = (weak_norm(&ts, p).unwrap(), weak_norm(&scaled, p).unwrap());
            prop_assert!((b - lambda * a).abs() <= 1e-10 * (lambda * a).max(1e-300));
            let (a, b) = (lorentz_rs_norm(&ts, p, s).unwrap(), lorentz_rs_norm(&scaled, p, s).unwrap());
            prop_assert!((b - lambda * a).abs() <= 1e-10 * (lambda * a).max(1e-300));
        }
    }
}
