//! Time integration of `Ẋ = B(X)∇H` with invariant-measure bookkeeping, and
//! time-average sampling of the physical marginals.

use std::io::{self, Write};

use log::warn;
use rayon::prelude::*;

use crate::bracket::{BracketStructure, Coord, Layout, ScalarField};
use crate::ensemble::{make_structure, EnsembleSpec, ExtendedHamiltonian};
use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, Real};

/// Sampled trajectory. `weight` is `w(t) = ∫κ dt` with `w(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord<T> {
    pub coord_names: Vec<String>,
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub energy: Vec<T>,
    pub weight: Vec<T>,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|H(t) − H(0)| / |H(0)|` over the record.
    pub fn relative_energy_drift(&self) -> T {
        let h0 = self.energy[0];
        let scale = if h0 == T::zero() { T::one() } else { h0.abs() };
        self.energy
            .iter()
            .fold(T::zero(), |m, &h| m.max((h - h0).abs() / scale))
    }

    /// CSV with header `t,<coords...>,H,w`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "t")?;
        for name in &self.coord_names {
            write!(out, ",{name}")?;
        }
        writeln!(out, ",H,w")?;
        for i in 0..self.len() {
            write!(out, "{}", self.times[i])?;
            for v in &self.states[i] {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{},{}", self.energy[i], self.weight[i])?;
        }
        Ok(())
    }
}

/// Column names for a layout, e.g. `R,eta,P,p_eta`.
pub fn coord_names(layout: Layout, dof: usize) -> Vec<String> {
    let indexed = |base: &str, k: usize| {
        if dof == 1 {
            base.to_string()
        } else {
            format!("{base}{k}")
        }
    };
    let thermo = |base: &str, k: usize| {
        if layout == Layout::Nhc2 {
            format!("{base}{}", k + 1)
        } else {
            base.to_string()
        }
    };
    layout
        .coords(dof)
        .into_iter()
        .map(|c| match c {
            Coord::R(k) => indexed("R", k),
            Coord::P(k) => indexed("P", k),
            Coord::Eta(k) => thermo("eta", k),
            Coord::PEta(k) => thermo("p_eta", k),
            Coord::V => "V".to_string(),
            Coord::PV => "p_V".to_string(),
        })
        .collect()
}

/// One explicit RK4 step of `(X, w)` with `ẇ = κ(X)`.
///
/// Integrating `w` through the same stages is Simpson's rule on `κ` with the
/// averaged midpoint stages, so `w` and the thermostat coordinates share one
/// quadrature.
pub fn rk4_step<T: Real>(
    s: &dyn BracketStructure<T>,
    h: &dyn ScalarField<T>,
    x: &[T],
    w: T,
    dt: T,
) -> (Vec<T>, T) {
    let rhs = |y: &[T]| -> (Vec<T>, T) {
        let g = h.gradient(y);
        let v = s.matrix(y).mul_vec(&g);
        let kappa = s.divergence(y).iter().zip(&g).map(|(&d, &gj)| d * gj).sum();
        (v, kappa)
    };
    let half = lit::<T>(0.5) * dt;
    let shift = |a: &[T], k: &[T], c: T| -> Vec<T> { a.iter().zip(k).map(|(&ai, &ki)| ai + c * ki).collect() };
    let (k1, q1) = rhs(x);
    let (k2, q2) = rhs(&shift(x, &k1, half));
    let (k3, q3) = rhs(&shift(x, &k2, half));
    let (k4, q4) = rhs(&shift(x, &k3, dt));
    let sixth = dt / lit::<T>(6.0);
    let two = lit::<T>(2.0);
    let next = (0..x.len())
        .map(|i| x[i] + sixth * (k1[i] + two * (k2[i] + k3[i]) + k4[i]))
        .collect();
    let w_next = w + sixth * (q1 + two * (q2 + q3) + q4);
    (next, w_next)
}

/// Integrates `steps` RK4 steps, recording every step.
pub fn integrate<T: Real>(
    s: &dyn BracketStructure<T>,
    h: &dyn ScalarField<T>,
    x0: &[T],
    dt: T,
    steps: usize,
) -> Result<TrajectoryRecord<T>> {
    integrate_strided(s, h, x0, dt, steps, 1, None)
}

/// Integrates `steps` RK4 steps and records the state every `stride` steps
/// (the initial state is always recorded, the final one when `steps % stride == 0`).
pub fn integrate_strided<T: Real>(
    s: &dyn BracketStructure<T>,
    h: &dyn ScalarField<T>,
    x0: &[T],
    dt: T,
    steps: usize,
    stride: usize,
    coord_names: Option<Vec<String>>,
) -> Result<TrajectoryRecord<T>> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(invalid("dt", format!("must be positive and finite, got {dt}")));
    }
    if stride == 0 {
        return Err(invalid("stride", "must be at least 1"));
    }
    if x0.len() != s.dim() {
        return Err(Error::Dimension {
            expected: s.dim(),
            found: x0.len(),
        });
    }
    let names = coord_names.unwrap_or_else(|| (0..x0.len()).map(|i| format!("x{i}")).collect());
    let mut rec = TrajectoryRecord {
        coord_names: names,
        times: vec![T::zero()],
        states: vec![x0.to_vec()],
        energy: vec![h.value(x0)],
        weight: vec![T::zero()],
    };
    let mut x = x0.to_vec();
    let mut w = T::zero();
    for step in 1..=steps {
        let (nx, nw) = rk4_step(s, h, &x, w, dt);
        if nx.iter().any(|v| !v.is_finite()) || !nw.is_finite() {
            return Err(Error::Integration {
                step,
                reason: "non-finite state".into(),
            });
        }
        x = nx;
        w = nw;
        if step % stride == 0 {
            rec.times.push(T::from_usize(step).unwrap() * dt);
            rec.energy.push(h.value(&x));
            rec.states.push(x.clone());
            rec.weight.push(w);
        }
    }
    Ok(rec)
}

/// Uniform-bin histogram; samples outside `[lo, hi)` only count toward `total`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Self {
            lo,
            hi,
            counts: vec![0; bins],
            total: 0,
        }
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn add(&mut self, x: f64) {
        self.total += 1;
        if x >= self.lo && x < self.hi {
            let i = ((x - self.lo) / self.bin_width()) as usize;
            let last = self.counts.len() - 1;
            self.counts[i.min(last)] += 1;
        }
    }

    pub fn merge(&mut self, other: &Histogram) {
        assert_eq!(self.counts.len(), other.counts.len());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.counts.len())
            .map(|i| self.lo + (i as f64 + 0.5) * w)
            .collect()
    }

    /// Normalized density per bin (zeros when empty).
    pub fn density(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; self.counts.len()];
        }
        let norm = self.total as f64 * self.bin_width();
        self.counts.iter().map(|&c| c as f64 / norm).collect()
    }

    /// Empirical CDF at the bin edges `lo, lo + w, …, hi`.
    pub fn edge_cdf(&self) -> Vec<(f64, f64)> {
        if self.total == 0 {
            return Vec::new();
        }
        let below = self.total - self.counts.iter().sum::<u64>();
        // samples outside the range are split evenly between the two tails
        let mut acc = below as f64 / 2.0;
        let w = self.bin_width();
        let n = self.total as f64;
        let mut out = vec![(self.lo, acc / n)];
        for (i, &c) in self.counts.iter().enumerate() {
            acc += c as f64;
            out.push((self.lo + (i + 1) as f64 * w, acc / n));
        }
        out
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + statrs::function::erf::erf(x / std::f64::consts::SQRT_2))
}

/// Kolmogorov–Smirnov distance between the histogram's edge CDF and a centered
/// Gaussian of standard deviation `sigma`.
pub fn ks_distance_gaussian(h: &Histogram, sigma: f64) -> f64 {
    h.edge_cdf()
        .into_iter()
        .map(|(x, f)| (f - normal_cdf(x / sigma)).abs())
        .fold(0.0, f64::max)
}

/// Least-squares fit of `ln ρ(x) = c − b·e(x)` over bins holding at least
/// `min_count` samples. Returns `(b, rms residual)`.
pub fn fit_log_density_slope(h: &Histogram, energy: impl Fn(f64) -> f64, min_count: u64) -> Option<(f64, f64)> {
    let dens = h.density();
    let pts: Vec<(f64, f64)> = h
        .centers()
        .into_iter()
        .zip(&h.counts)
        .zip(dens)
        .filter(|((_, &c), _)| c >= min_count)
        .map(|((x, _), d)| (energy(x), d.ln()))
        .collect();
    linear_fit(&pts).map(|(slope, _, rms)| (-slope, rms))
}

/// Ordinary least squares `y = a·x + b`; returns `(a, b, rms residual)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let rms = (pts.iter().map(|p| (p.1 - a * p.0 - b).powi(2)).sum::<f64>() / n).sqrt();
    Some((a, b, rms))
}

/// Histogram ranges and resolution for canonical sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingBins {
    pub bins: usize,
    pub r_range: (f64, f64),
    pub p_range: (f64, f64),
}

impl SamplingBins {
    /// Ranges of `±span` standard deviations of the canonical momentum
    /// distribution for the given ensemble.
    pub fn for_spec<T: Real>(spec: &EnsembleSpec<T>, span: f64, bins: usize) -> Self {
        let g_over_n = spec.g.as_f64() / spec.dof as f64;
        let sp = (spec.mass.as_f64() * spec.kt().as_f64() * g_over_n).sqrt();
        Self {
            bins,
            r_range: (-span * sp, span * sp),
            p_range: (-span * sp, span * sp),
        }
    }
}

/// Time-average marginals of the first physical coordinate and momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalSample {
    pub r_hist: Histogram,
    pub p_hist: Histogram,
    pub samples: u64,
    /// Time average of `P²/M` (equipartition: `k_B T·g/N`).
    pub mean_p2_over_m: f64,
    pub warnings: Vec<String>,
}

/// Runs thermostatted dynamics and accumulates `R`/`P` histograms after `burn_in` steps.
#[allow(clippy::too_many_arguments)]
pub fn sample_canonical<T: Real>(
    h: &ExtendedHamiltonian<T>,
    x0: &[T],
    dt: T,
    steps: usize,
    burn_in: usize,
    bins: SamplingBins,
) -> Result<CanonicalSample> {
    let spec = &h.spec;
    spec.validate()?;
    if !matches!(spec.kind, Layout::Nose | Layout::Nhc2) {
        return Err(invalid("kind", "canonical sampling needs a Nosé or chain thermostat"));
    }
    let mut warnings = Vec::new();
    if spec.kind == Layout::Nose && spec.dof == 1 && h.potential.is_harmonic() {
        let msg = "bare Nosé dynamics on a single harmonic mode is not ergodic".to_string();
        warn!("{msg}");
        warnings.push(msg);
    }
    if !(dt > T::zero()) {
        return Err(invalid("dt", "must be positive"));
    }
    let s = make_structure(spec);
    let ir = spec.index(Coord::R(0)).unwrap();
    let ip = spec.index(Coord::P(0)).unwrap();
    let mut r_hist = Histogram::new(bins.r_range.0, bins.r_range.1, bins.bins);
    let mut p_hist = Histogram::new(bins.p_range.0, bins.p_range.1, bins.bins);
    let mut sum_p2 = 0.0;
    let mut x = x0.to_vec();
    let mut w = T::zero();
    let mass = spec.mass.as_f64();
    for step in 1..=steps {
        let (nx, nw) = rk4_step(s.as_ref(), h, &x, w, dt);
        if nx.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                step,
                reason: "non-finite state".into(),
            });
        }
        x = nx;
        w = nw;
        if step > burn_in {
            let p = x[ip].as_f64();
            r_hist.add(x[ir].as_f64());
            p_hist.add(p);
            sum_p2 += p * p / mass;
        }
    }
    let samples = p_hist.total;
    Ok(CanonicalSample {
        r_hist,
        p_hist,
        samples,
        mean_p2_over_m: if samples > 0 { sum_p2 / samples as f64 } else { 0.0 },
        warnings,
    })
}

/// Independent trajectories in parallel; partial histograms are merged in
/// input order so the result does not depend on the thread count.
pub fn sample_canonical_many<T: Real>(
    h: &ExtendedHamiltonian<T>,
    starts: &[Vec<T>],
    dt: T,
    steps: usize,
    burn_in: usize,
    bins: SamplingBins,
) -> Result<CanonicalSample> {
    let parts: Vec<Result<CanonicalSample>> = starts
        .par_iter()
        .map(|x0| sample_canonical(h, x0, dt, steps, burn_in, bins))
        .collect();
    let mut merged: Option<CanonicalSample> = None;
    for part in parts {
        let part = part?;
        merged = Some(match merged {
            None => part,
            Some(mut m) => {
                let n0 = m.samples as f64;
                let n1 = part.samples as f64;
                m.r_hist.merge(&part.r_hist);
                m.p_hist.merge(&part.p_hist);
                m.samples += part.samples;
                m.mean_p2_over_m = if n0 + n1 > 0.0 {
                    (m.mean_p2_over_m * n0 + part.mean_p2_over_m * n1) / (n0 + n1)
                } else {
                    0.0
                };
                m.warnings.extend(part.warnings);
                m
            }
        });
    }
    merged.ok_or_else(|| Error::InsufficientSamples("no trajectories".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bracket::Symplectic;
    use crate::ensemble::{Anharmonic, NoseStructure};
    use std::sync::Arc;

    #[test]
    fn harmonic_energy_and_solution() {
        let h = ExtendedHamiltonian::new(
            EnsembleSpec::new(Layout::Nve, 1),
            Arc::new(Anharmonic::harmonic(1.0)),
        );
        let rec = integrate(&Symplectic { dof: 1 }, &h, &[1.0, 0.0], 1e-3, 10_000).unwrap();
        assert!(rec.relative_energy_drift() < 1e-9);
        let last = rec.states.last().unwrap();
        let t = 10.0f64;
        assert!((last[0] - t.cos()).abs() < 1e-10);
        assert!((last[1] + t.sin()).abs() < 1e-10);
        assert!(rec.weight.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn thermostat_at_rest_stays_at_rest_initially() {
        let h = ExtendedHamiltonian::new(
            EnsembleSpec::new(Layout::Nose, 1),
            Arc::new(Anharmonic::harmonic(1.0)),
        );
        // P²/M = g k_B T, p_η = 0: F_η = 0
        let s = NoseStructure { dof: 1 };
        let v = crate::bracket::eom_rhs(&s, &h, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(v[3], 0.0);
    }

    #[test]
    fn zero_steps_and_bad_dt() {
        let h = ExtendedHamiltonian::new(
            EnsembleSpec::new(Layout::Nve, 1),
            Arc::new(Anharmonic::harmonic(1.0)),
        );
        let rec = integrate(&Symplectic { dof: 1 }, &h, &[1.0, 0.0], 1e-3, 0).unwrap();
        assert_eq!(rec.len(), 1);
        assert_eq!(rec.weight[0], 0.0);
        assert!(integrate(&Symplectic { dof: 1 }, &h, &[1.0, 0.0], 0.0, 1).is_err());
        assert!(integrate(&Symplectic { dof: 1 }, &h, &[1.0, 0.0, 0.0], 0.1, 1).is_err());
    }

    #[test]
    fn nonfinite_state_reports_step() {
        let h = ExtendedHamiltonian::new(
            EnsembleSpec::new(Layout::Nve, 1),
            Arc::new(Anharmonic { k: 1.0, quartic: -1e6 }),
        );
        let err = integrate(&Symplectic { dof: 1 }, &h, &[10.0, 0.0], 0.5, 100).unwrap_err();
        assert!(matches!(err, Error::Integration { .. }), "{err}");
    }

    #[test]
    fn csv_header_and_rows() {
        let h = ExtendedHamiltonian::new(
            EnsembleSpec::new(Layout::Nose, 1),
            Arc::new(Anharmonic::harmonic(1.0)),
        );
        let names = coord_names(Layout::Nose, 1);
        let rec = integrate_strided(&NoseStructure { dof: 1 }, &h, &[0.5, 0.0, 0.3, 0.1], 0.01, 10, 5, Some(names))
            .unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,R,eta,P,p_eta,H,w");
        assert_eq!(lines.count(), 3);
        assert_eq!(coord_names(Layout::Nhc2, 1).join(","), "R,eta1,eta2,P,p_eta1,p_eta2");
        assert_eq!(coord_names(Layout::Npt, 1).join(","), "R,eta,V,P,p_eta,p_V");
    }

    #[test]
    fn empty_sampling_has_no_nan() {
        let h = ExtendedHamiltonian::new(
            EnsembleSpec::new(Layout::Nhc2, 1),
            Arc::new(Anharmonic::harmonic(1.0)),
        );
        let bins = SamplingBins::for_spec(&h.spec, 6.0, 100);
        let s = sample_canonical(&h, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.01, 0, 0, bins).unwrap();
        assert_eq!(s.samples, 0);
        assert_eq!(s.mean_p2_over_m, 0.0);
        assert!(s.p_hist.density().iter().all(|d| *d == 0.0));
        assert!(s.p_hist.edge_cdf().is_empty());
    }

    #[test]
    fn bare_nose_harmonic_warns() {
        let h = ExtendedHamiltonian::new(
            EnsembleSpec::new(Layout::Nose, 1),
            Arc::new(Anharmonic::harmonic(1.0)),
        );
        let bins = SamplingBins::for_spec(&h.spec, 6.0, 100);
        let s = sample_canonical(&h, &[1.0, 0.0, 0.0, 0.0], 0.01, 10, 0, bins).unwrap();
        assert_eq!(s.warnings.len(), 1);
        let nve = ExtendedHamiltonian::new(
            EnsembleSpec::new(Layout::Nve, 1),
            Arc::new(Anharmonic::harmonic(1.0)),
        );
        assert!(sample_canonical(&nve, &[1.0, 0.0], 0.01, 10, 0, bins).is_err());
    }

    #[test]
    fn histogram_ks_of_exact_gaussian_bins() {
        // fill bins with exact Gaussian probabilities
        let mut h = Histogram::new(-6.0, 6.0, 600);
        let n = 1_000_000u64;
        let w = h.bin_width();
        for i in 0..600 {
            let a = -6.0 + i as f64 * w;
            let p = normal_cdf(a + w) - normal_cdf(a);
            h.counts[i] = (p * n as f64).round() as u64;
        }
        h.total = h.counts.iter().sum();
        assert!(ks_distance_gaussian(&h, 1.0) < 1e-5);
        let (b, _) = fit_log_density_slope(&h, |p| 0.5 * p * p, 1000).unwrap();
        assert!((b - 1.0).abs() < 1e-2, "{b}");
    }
}
