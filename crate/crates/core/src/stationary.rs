//! Stationary density matrices of the thermostatted quantum-classical
//! Liouvillian, their order-ħ correction, and the checks built on them.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adiabatic::{AdiabaticFrame, QuantumModel};
use crate::bracket::{Coord, Layout};
use crate::dynamics::linear_fit;
use crate::ensemble::{Anharmonic, EnsembleSpec, ExtendedHamiltonian};
use crate::error::{invalid, Error, Result};
use crate::grid::{AxisKind, MatrixField, PhaseGrid};
use crate::qcle::{build_liouvillian, frames_on_grid, normalize, DensityField, LiouvillianOp, LiouvillianOptions};
use crate::scalar::{cplx, czero, lit, Real};

/// Energy gaps below this switch the order-ħ factor to its Taylor series.
pub const SERIES_SWITCH: f64 = 1e-4;
/// Gaps below this are degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Sign `s` of the weight `e^{s·w}` multiplying `f(H)` in the stationary density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightSign {
    /// `e^{−w}`: the density relative to the invariant measure is a function of `H`.
    Minus,
    Plus,
}

impl WeightSign {
    pub fn value<T: Real>(self) -> T {
        match self {
            WeightSign::Minus => -T::one(),
            WeightSign::Plus => T::one(),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            WeightSign::Minus => WeightSign::Plus,
            WeightSign::Plus => WeightSign::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rho0Form {
    /// `e^{s·w} δ_σ(𝒞 − H^α)` with a Gaussian of width `σ_E` (Nosé layout).
    NoseShell,
    /// `e^{s·w} exp(−βH^α)`.
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarySpec<T> {
    pub ensemble: EnsembleSpec<T>,
    /// Shell value `𝒞` of the generalized energy.
    pub shell: T,
    pub sigma_e: T,
    pub hbar: T,
    pub order: u8,
    pub weight_sign: WeightSign,
    pub form: Rho0Form,
}

impl<T: Real> StationarySpec<T> {
    pub fn new(ensemble: EnsembleSpec<T>, form: Rho0Form) -> Self {
        Self {
            ensemble,
            shell: T::zero(),
            sigma_e: lit(0.05),
            hbar: T::one(),
            order: 0,
            weight_sign: WeightSign::Minus,
            form,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        if !(self.sigma_e > T::zero()) || !self.sigma_e.is_finite() {
            return Err(invalid("sigma_E", "must be positive"));
        }
        if self.order > 1 {
            return Err(invalid("order", "only orders 0 and 1 are available"));
        }
        if !(self.hbar > T::zero()) {
            return Err(invalid("hbar", "must be positive"));
        }
        if !self.shell.is_finite() {
            return Err(invalid("C", "must be finite"));
        }
        if self.form == Rho0Form::NoseShell && self.ensemble.kind != Layout::Nose {
            return Err(invalid("form", "the shell form needs the Nosé layout"));
        }
        Ok(())
    }
}

fn zero_potential_hamiltonian<T: Real>(spec: &EnsembleSpec<T>) -> ExtendedHamiltonian<T> {
    ExtendedHamiltonian::new(spec.clone(), Arc::new(Anharmonic::harmonic(T::zero())))
}

/// `H^α(X) = P²/2M + E_α(R) + extension energy`.
pub fn adiabatic_energy<T: Real>(
    ham: &ExtendedHamiltonian<T>,
    frame: &AdiabaticFrame<T>,
    x: &[T],
    alpha: usize,
) -> T {
    let ip = ham.spec.index(Coord::P(0)).unwrap();
    x[ip] * x[ip] / (lit::<T>(2.0) * ham.spec.mass) + frame.energies[alpha] + ham.extension_energy(x)
}

/// Growth rates of `e^{s·w} exp(−βH)` along the coordinates on which both
/// exponents are linear (thermostat positions, and the volume at constant pressure).
pub fn density_rates<T: Real>(spec: &EnsembleSpec<T>, sign: WeightSign) -> Vec<(Coord, T)> {
    let s = sign.value::<T>();
    let gkt = spec.g * spec.kt();
    let mut rates: Vec<(Coord, T)> = spec
        .invariant_exponent_rates()
        .into_iter()
        .map(|(c, dw)| (c, s * dw - spec.beta() * gkt))
        .collect();
    if spec.kind == Layout::Npt {
        rates.push((Coord::V, -spec.beta() * spec.p_ext));
    }
    rates
}

/// `exp(−w(X))` at every node: weights of the invariant measure `dM = e^{−w}dX`.
pub fn measure_weights<T: Real>(spec: &EnsembleSpec<T>, grid: &PhaseGrid<T>) -> Vec<T> {
    (0..grid.n_nodes())
        .map(|k| (-spec.invariant_exponent(&grid.point_at(k))).exp())
        .collect()
}

fn frame_index<T: Real>(grid: &PhaseGrid<T>, node: usize) -> usize {
    let ir = grid.index_of(Coord::R(0)).unwrap();
    grid.node_index(node, ir).unwrap_or(0)
}

fn check_frames<T: Real>(grid: &PhaseGrid<T>, frames: &[AdiabaticFrame<T>]) -> Result<usize> {
    let ir = grid
        .index_of(Coord::R(0))
        .ok_or_else(|| invalid("grid", "no R axis"))?;
    if frames.len() != grid.values(ir).len() {
        return Err(Error::GridMismatch(format!(
            "{} frames for {} R nodes",
            frames.len(),
            grid.values(ir).len()
        )));
    }
    Ok(frames[0].n())
}

/// Zeroth-order stationary density, diagonal in the adiabatic basis and
/// normalized to `Tr' ∫dX ρ = 1` over the sampled axes.
pub fn stationary_rho0<T: Real>(
    spec: &StationarySpec<T>,
    frames: &[AdiabaticFrame<T>],
    grid: Arc<PhaseGrid<T>>,
) -> Result<DensityField<T>> {
    spec.validate()?;
    let ens = &spec.ensemble;
    if grid.layout() != ens.kind || grid.dof() != ens.dof {
        return Err(Error::GridMismatch("grid layout differs from ensemble".into()));
    }
    let n = check_frames(&grid, frames)?;
    let rates = density_rates(ens, spec.weight_sign);
    for ax in grid.axes() {
        if let AxisKind::Exponential { rate, .. } = ax.kind {
            if spec.form == Rho0Form::NoseShell {
                return Err(Error::Unsupported(format!(
                    "the shell form is not exponential along {:?}",
                    ax.coord
                )));
            }
            let want = rates
                .iter()
                .find(|(c, _)| *c == ax.coord)
                .map(|p| p.1)
                .ok_or_else(|| Error::Domain(format!("density is not exponential along {:?}", ax.coord)))?;
            if (rate - want).abs() > lit::<T>(1e-12) * (T::one() + want.abs()) {
                return Err(Error::Domain(format!(
                    "axis {:?} has rate {rate}, the density grows at {want}",
                    ax.coord
                )));
            }
        }
    }
    let ham = zero_potential_hamiltonian(ens);
    let s = spec.weight_sign.value::<T>();
    let beta = ens.beta();
    let two = lit::<T>(2.0);
    let sigma = spec.sigma_e;
    let log_norm = -(sigma * (two * T::PI()).sqrt()).ln();
    // log-values first, shifted by the maximum before exponentiation
    let logs: Vec<T> = (0..grid.n_nodes())
        .into_par_iter()
        .flat_map_iter(|k| {
            let x = grid.point_at(k);
            let fr = &frames[frame_index(&grid, k)];
            let w = ens.invariant_exponent(&x);
            (0..n)
                .map(|a| {
                    let h = adiabatic_energy(&ham, fr, &x, a);
                    match spec.form {
                        Rho0Form::Exponential => s * w - beta * h,
                        Rho0Form::NoseShell => {
                            let u = (spec.shell - h) / sigma;
                            s * w - u * u / two + log_norm
                        }
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let shift = logs.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    if !shift.is_finite() {
        return Err(Error::Domain("stationary density vanishes on the grid".into()));
    }
    let mut rho = DensityField::zeros(grid.clone(), n);
    for k in 0..grid.n_nodes() {
        for a in 0..n {
            rho.set(k, a, a, cplx((logs[k * n + a] - shift).exp(), T::zero()));
        }
    }
    if spec.form == Rho0Form::NoseShell {
        shell_coverage(&rho)?;
    }
    normalize(&mut rho)?;
    Ok(rho)
}

/// The regularized shell must not reach the ends of a sampled `η` axis.
fn shell_coverage<T: Real>(rho: &DensityField<T>) -> Result<()> {
    let grid = rho.grid();
    let ie = grid.index_of(Coord::Eta(0)).unwrap();
    let Some(h) = grid.spacing(ie) else { return Ok(()) };
    let _ = h;
    let last = grid.values(ie).len() - 1;
    let peak = rho.max_abs();
    let mut edge = T::zero();
    for k in 0..grid.n_nodes() {
        let i = grid.node_index(k, ie).unwrap();
        if i == 0 || i == last {
            for a in 0..rho.n() {
                edge = edge.max(rho.get(k, a, a).norm());
            }
        }
    }
    if edge > lit::<T>(1e-10) * peak {
        return Err(Error::Domain(format!(
            "energy shell reaches the eta boundary (edge/peak = {})",
            (edge / peak).as_f64()
        )));
    }
    Ok(())
}

/// `(1 − e^{−βx})/x − (β/2)(1 + e^{−βx})`, the bracket of the order-ħ term as a
/// function of `x = E_α − E_β`. Taylor series below [`SERIES_SWITCH`].
pub fn order1_factor<T: Real>(x: T, beta: T) -> T {
    if x.abs() < lit(SERIES_SWITCH) {
        order1_factor_series(x, beta, 12)
    } else {
        let e = (-beta * x).exp();
        (T::one() - e) / x - beta * lit::<T>(0.5) * (T::one() + e)
    }
}

/// `β Σ_{k≥2} (−1)^k [1/(k+1)! − 1/(2·k!)] (βx)^k`, truncated after `terms` terms.
pub fn order1_factor_series<T: Real>(x: T, beta: T, terms: usize) -> T {
    let y = beta * x;
    let mut fact = T::one(); // k!
    let mut pow = T::one(); // y^k
    let mut sum = T::zero();
    for k in 1..=terms + 1 {
        let kk = T::from_usize(k).unwrap();
        fact *= kk;
        pow *= -y;
        if k >= 2 {
            let c = T::one() / (fact * (kk + T::one())) - lit::<T>(0.5) / fact;
            sum += c * pow;
        }
    }
    beta * sum
}

/// Off-diagonal order-ħ density
/// `ρ^(1)αβ = −i (P/M) d_αβ ρ^(0)β [(1 − e^{−β(E_α−E_β)})/(E_β − E_α) + (β/2)(1 + e^{−β(E_α−E_β)})]`.
pub fn stationary_rho1<T: Real>(
    rho0: &DensityField<T>,
    frames: &[AdiabaticFrame<T>],
    spec: &EnsembleSpec<T>,
) -> Result<DensityField<T>> {
    let grid = rho0.grid().clone();
    let n = check_frames(&grid, frames)?;
    if n != rho0.n() {
        return Err(Error::GridMismatch("frame and density dimensions differ".into()));
    }
    let ip = grid.index_of(Coord::P(0)).unwrap();
    let beta = spec.beta();
    let tol = lit::<T>(DEGENERACY_TOL);
    for f in frames {
        for a in 0..n {
            for b in 0..a {
                let gap = (f.energies[a] - f.energies[b]).abs();
                if gap < tol {
                    return Err(Error::Degenerate {
                        r: f.r.as_f64(),
                        gap: gap.as_f64(),
                    });
                }
            }
        }
    }
    Ok(rho0.map_nodes(|k, r0| {
        let fr = &frames[frame_index(&grid, k)];
        let pm = grid.point_at(k)[ip] / spec.mass;
        let mut m = crate::linalg::CMat::zeros(n);
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let x = fr.energies[a] - fr.energies[b];
                let amp = pm * fr.coupling[(a, b)] * r0[(b, b)].re * order1_factor(x, beta);
                m[(a, b)] = cplx(T::zero(), amp);
            }
        }
        m
    }))
}

/// Order-ħ density from the recursion `i(E_α − E_α')ρ^(1) = −(jump ρ^(0))`,
/// using the operator's discretized jump term.
pub fn formal_rho1<T: Real>(rho0: &DensityField<T>, op: &LiouvillianOp<T>) -> Result<DensityField<T>> {
    let j = op.jump(rho0)?;
    let n = rho0.n();
    Ok(j.map_nodes(|k, jm| {
        let fr = op.frame_at(k);
        let mut m = crate::linalg::CMat::zeros(n);
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    m[(a, b)] = jm[(a, b)] * cplx(T::zero(), T::one() / (fr.energies[a] - fr.energies[b]));
                }
            }
        }
        m
    }))
}

/// Largest off-diagonal magnitude.
pub fn offdiagonal_content<T: Real>(rho: &DensityField<T>) -> T {
    let n = rho.n();
    let mut m = T::zero();
    for k in 0..rho.grid().n_nodes() {
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    m = m.max(rho.get(k, a, b).norm());
                }
            }
        }
    }
    m
}

/// `‖(iℒ + κ)ρ‖ / ‖ρ‖` in the grid L2 norm.
pub fn stationarity_residual<T: Real>(rho: &DensityField<T>, op: &LiouvillianOp<T>) -> Result<T> {
    let r = op.liouville(rho, true)?;
    Ok(r.norm() / rho.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignSelection<T> {
    pub sign: WeightSign,
    pub residual_minus: T,
    pub residual_plus: T,
}

/// Builds `ρ^(0)` with both weight signs and keeps the one with the smaller
/// stationarity residual. Exponential axes get the rates each sign requires.
pub fn select_weight_sign<T: Real>(
    spec: &StationarySpec<T>,
    model: &dyn QuantumModel<T>,
    grid: &PhaseGrid<T>,
    opts: LiouvillianOptions<T>,
) -> Result<SignSelection<T>> {
    let mut res = [T::zero(); 2];
    for (i, sign) in [WeightSign::Minus, WeightSign::Plus].into_iter().enumerate() {
        let mut sp = spec.clone();
        sp.weight_sign = sign;
        let g = Arc::new(grid.with_rates(&density_rates(&sp.ensemble, sign)));
        let frames = frames_on_grid(model, &g)?;
        let op = build_liouvillian(frames.clone(), &sp.ensemble, g.clone(), opts)?;
        let rho = stationary_rho0(&sp, &frames, g)?;
        res[i] = stationarity_residual(&rho, &op)?;
    }
    let sign = if res[0] <= res[1] {
        WeightSign::Minus
    } else {
        WeightSign::Plus
    };
    Ok(SignSelection {
        sign,
        residual_minus: res[0],
        residual_plus: res[1],
    })
}

/// `max_{α,f} |∫dM (jump ρ)^{αα} f(H^α)|` for `f = H^k`, `k ∈ powers`.
///
/// For Hermitian off-diagonal `ρ`, `(jump ρ)^{αα}` is `Σ_{β>β'} 2Re(…)`.
pub fn fredholm_check<T: Real>(rho_off: &DensityField<T>, op: &LiouvillianOp<T>, powers: &[i32]) -> Result<T> {
    let j = op.jump(rho_off)?;
    let grid = rho_off.grid();
    let spec = op.spec();
    let ham = zero_potential_hamiltonian(spec);
    let w = grid.quadrature_weights();
    let dm = measure_weights(spec, grid);
    let mut worst = T::zero();
    for a in 0..rho_off.n() {
        for &p in powers {
            let mut acc = czero::<T>();
            for k in 0..grid.n_nodes() {
                let x = grid.point_at(k);
                let h = adiabatic_energy(&ham, op.frame_at(k), &x, a);
                acc += j.get(k, a, a) * (w[k] * dm[k] * h.powi(p));
            }
            worst = worst.max(acc.norm());
        }
    }
    Ok(worst)
}

/// Reduced density on the `(R, P)` grid for each adiabatic state.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal<T> {
    pub r: Vec<T>,
    pub p: Vec<T>,
    pub n: usize,
    /// `density[(α·len(r) + i)·len(p) + j]`.
    pub density: Vec<T>,
    /// Fraction of the integrand on the first and last `η` nodes.
    pub leak: T,
}

impl<T: Real> Marginal<T> {
    pub fn at(&self, alpha: usize, i: usize, j: usize) -> T {
        self.density[(alpha * self.r.len() + i) * self.p.len() + j]
    }
}

/// Integrates the Nosé variables `(η, p_η)` out of a diagonal density.
pub fn marginalize_nose<T: Real>(rho0: &DensityField<T>) -> Result<Marginal<T>> {
    let grid = rho0.grid();
    if grid.layout() != Layout::Nose {
        return Err(invalid("layout", "marginalization integrates the Nosé variables"));
    }
    let ir = grid.index_of(Coord::R(0)).unwrap();
    let ip = grid.index_of(Coord::P(0)).unwrap();
    let ie = grid.index_of(Coord::Eta(0)).unwrap();
    let ipe = grid.index_of(Coord::PEta(0)).unwrap();
    if grid.spacing(ir).is_none() || grid.spacing(ip).is_none() {
        return Err(Error::Unsupported("R and P must be sampled".into()));
    }
    let r = grid.values(ir);
    let p = grid.values(ip);
    let we = grid.axis_weights(ie);
    let wpe = grid.axis_weights(ipe);
    let n = rho0.n();
    let last_eta = we.len() - 1;
    let sampled_eta = grid.spacing(ie).is_some();
    let mut density = vec![T::zero(); n * r.len() * p.len()];
    let mut total = T::zero();
    let mut edge = T::zero();
    for k in 0..grid.n_nodes() {
        let i = grid.node_index(k, ir).unwrap();
        let j = grid.node_index(k, ip).unwrap();
        let e = grid.node_index(k, ie).unwrap_or(0);
        let q = grid.node_index(k, ipe).unwrap_or(0);
        let wk = we[e] * wpe[q];
        for a in 0..n {
            let v = rho0.get(k, a, a).re * wk;
            density[(a * r.len() + i) * p.len() + j] += v;
            total += v.abs();
            if sampled_eta && (e == 0 || e == last_eta) {
                edge += v.abs();
            }
        }
    }
    let leak = if total > T::zero() { edge / total } else { T::zero() };
    if leak > lit(1e-8) {
        log::warn!("eta truncation leaks {} of the integrand", leak.as_f64());
    }
    Ok(Marginal { r, p, n, density, leak })
}

/// Fits `ln ρ_α(R,P) = c + slope·H^α_T(R,P)` jointly over states and nodes.
/// Returns `(slope, max |residual|)`.
pub fn fit_marginal<T: Real>(m: &Marginal<T>, frames: &[AdiabaticFrame<T>], spec: &EnsembleSpec<T>) -> Result<(f64, f64)> {
    if frames.len() != m.r.len() {
        return Err(Error::GridMismatch("one frame per R node expected".into()));
    }
    let mut pts = Vec::new();
    for a in 0..m.n {
        for (i, fr) in frames.iter().enumerate() {
            for (j, &p) in m.p.iter().enumerate() {
                let d = m.at(a, i, j);
                if d > T::zero() && d.is_finite() {
                    let ht = p * p / (lit::<T>(2.0) * spec.mass) + fr.energies[a];
                    pts.push((ht.as_f64(), d.as_f64().ln()));
                }
            }
        }
    }
    let (slope, icpt, _) = linear_fit(&pts).ok_or_else(|| Error::InsufficientSamples("marginal fit needs two points".into()))?;
    let worst = pts
        .iter()
        .map(|(x, y)| (y - slope * x - icpt).abs())
        .fold(0.0, f64::max);
    Ok((slope, worst))
}

/// Smooth-observable convergence in `σ_E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaPoint {
    #[serde(rename = "sigma_E")]
    pub sigma_e: f64,
    /// `⟨P²/M⟩` under the normalized shell density.
    pub mean_kinetic: f64,
    pub marginal_slope: f64,
}

/// Summary of the stationary checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub order0_residual: f64,
    pub order1_residual: f64,
    pub marginal_slope: f64,
    pub marginal_fit_residual: f64,
    pub fredholm_max: f64,
    #[serde(rename = "sigma_E_series")]
    pub sigma_e_series: Vec<SigmaPoint>,
}

/// Adds `ħ·ρ^(1)` to `ρ^(0)`.
pub fn combine<T: Real>(rho0: &DensityField<T>, rho1: &DensityField<T>, hbar: T) -> Result<DensityField<T>> {
    let mut out = rho0.clone();
    out.axpy(Complex::new(hbar, T::zero()), rho1)?;
    Ok(out)
}

/// Real density with off-diagonal profile `g(X)`, zero diagonal.
pub fn offdiagonal_test_density<T: Real>(grid: Arc<PhaseGrid<T>>, n: usize, g: impl Fn(&[T]) -> T + Sync) -> MatrixField<T> {
    MatrixField::from_fn(grid, n, |x| {
        let v = g(x);
        let mut m = crate::linalg::CMat::zeros(n);
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    m[(a, b)] = cplx(v, T::zero());
                }
            }
        }
        m
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adiabatic::LinearVibronic;
    use crate::qcle::Side;

    #[test]
    fn series_matches_closed_form_and_limit() {
        let beta = 1.3f64;
        for x in [1e-3f64, -2e-3, 5e-3] {
            let e: f64 = (-beta * x).exp();
            let closed = (1.0 - e) / x - beta * 0.5 * (1.0 + e);
            assert!((closed - order1_factor_series(x, beta, 12)).abs() < 1e-12);
        }
        for x in [1e-5f64, -3e-5, 9.9e-5, 0.0] {
            let y = beta * x;
            let oracle = beta * (-y * y / 12.0 + y.powi(3) / 24.0 - y.powi(4) / 80.0);
            assert!((order1_factor(x, beta) - oracle).abs() < 1e-18);
        }
    }

    #[test]
    fn rates_cancel_at_g_equal_n() {
        let spec = EnsembleSpec::<f64>::new(Layout::Nhc2, 1);
        for (_, r) in density_rates(&spec, WeightSign::Minus) {
            assert_eq!(r, 0.0);
        }
        let r = density_rates(&spec, WeightSign::Plus);
        assert_eq!(r[0].1, -2.0);
    }

    fn nhc_grid(n: usize, l: f64) -> Arc<PhaseGrid<f64>> {
        Arc::new(
            PhaseGrid::builder(Layout::Nhc2, 1)
                .nodes(Coord::R(0), -l, l, n)
                .exponential(Coord::Eta(0), 0.0, 0.0)
                .exponential(Coord::Eta(1), 0.0, 0.0)
                .nodes(Coord::P(0), -l, l, n)
                .nodes(Coord::PEta(0), -l, l, n)
                .nodes(Coord::PEta(1), -l, l, n)
                .build()
                .unwrap(),
        )
    }

    #[test]
    fn exponential_form_depends_on_energy_only() {
        let g = nhc_grid(9, 4.0);
        let model = LinearVibronic { a: 0.0, delta: 0.5, k: 1.0 };
        let frames = frames_on_grid(&model, &g).unwrap();
        let spec = StationarySpec::new(EnsembleSpec::new(Layout::Nhc2, 1), Rho0Form::Exponential);
        let rho = stationary_rho0(&spec, &frames, g.clone()).unwrap();
        assert!((rho.trace_integral().re - 1.0).abs() < 1e-12);
        assert_eq!(offdiagonal_content(&rho), 0.0);
        // mirror in P and in p_eta1 keeps H
        let k = 1234;
        let m = g.mirror(g.mirror(k, Coord::P(0)), Coord::PEta(0));
        assert!((rho.get(k, 0, 0).re - rho.get(m, 0, 0).re).abs() < 1e-15);
        // mismatched rate is refused
        let bad = Arc::new(g.with_rates(&[(Coord::Eta(0), 1.0)]));
        assert!(matches!(stationary_rho0(&spec, &frames, bad), Err(Error::Domain(_))));
    }

    #[test]
    fn rho1_vanishes_at_zero_momentum_and_without_coupling() {
        let g = nhc_grid(9, 4.0);
        let spec = StationarySpec::new(EnsembleSpec::new(Layout::Nhc2, 1), Rho0Form::Exponential);
        let model = LinearVibronic { a: 0.7, delta: 0.5, k: 1.0 };
        let frames = frames_on_grid(&model, &g).unwrap();
        let rho0 = stationary_rho0(&spec, &frames, g.clone()).unwrap();
        let rho1 = stationary_rho1(&rho0, &frames, &spec.ensemble).unwrap();
        let ip = g.index_of(Coord::P(0)).unwrap();
        for k in 0..g.n_nodes() {
            if g.point_at(k)[ip] == 0.0 {
                assert_eq!(rho1.get(k, 0, 1).norm(), 0.0);
            }
        }
        assert!(rho1.max_abs() > 0.0);
        assert!(combine(&rho0, &rho1, 0.3).unwrap().hermiticity_defect() < 1e-15);
        let flat = LinearVibronic { a: 0.0, delta: 0.5, k: 1.0 };
        let frames = frames_on_grid(&flat, &g).unwrap();
        assert_eq!(stationary_rho1(&rho0, &frames, &spec.ensemble).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn rho1_factor_is_invariant_in_nose_variables() {
        let g = nhc_grid(9, 4.0);
        let spec = StationarySpec::new(EnsembleSpec::new(Layout::Nhc2, 1), Rho0Form::Exponential);
        let model = LinearVibronic { a: 0.7, delta: 0.5, k: 1.0 };
        let frames = frames_on_grid(&model, &g).unwrap();
        let rho0 = stationary_rho0(&spec, &frames, g.clone()).unwrap();
        let rho1 = stationary_rho1(&rho0, &frames, &spec.ensemble).unwrap();
        let ipe = g.index_of(Coord::PEta(0)).unwrap();
        let ipe2 = g.index_of(Coord::PEta(1)).unwrap();
        // ratio at nodes differing only in thermostat momenta
        let base = 4 * 729 + 6 * 81; // R index 4, P index 6
        let reference = rho1.get(base, 0, 1).im / rho0.get(base, 1, 1).re;
        for k in base..base + 81 {
            let x = g.point_at(k);
            let _ = (x[ipe], x[ipe2]);
            let ratio = rho1.get(k, 0, 1).im / rho0.get(k, 1, 1).re;
            assert!((ratio - reference).abs() < 1e-10 * reference.abs().max(1.0));
        }
    }

    #[test]
    fn degenerate_frames_refused() {
        let g = nhc_grid(9, 4.0);
        let spec = EnsembleSpec::<f64>::new(Layout::Nhc2, 1);
        let rho0 = MatrixField::zeros(g.clone(), 2);
        let model = LinearVibronic { a: 0.7, delta: 0.5, k: 1.0 };
        let mut frames = frames_on_grid(&model, &g).unwrap();
        frames[3].energies[1] = frames[3].energies[0];
        assert!(matches!(stationary_rho1(&rho0, &frames, &spec), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn omitting_kappa_raises_residual() {
        let g = nhc_grid(16, 6.0);
        let spec = StationarySpec::new(EnsembleSpec::new(Layout::Nhc2, 1), Rho0Form::Exponential);
        let model = LinearVibronic { a: 0.0, delta: 0.5, k: 1.0 };
        let frames = frames_on_grid(&model, &g).unwrap();
        let opts = LiouvillianOptions::new(Side::Density, 1.0).spectral();
        let op = build_liouvillian(frames.clone(), &spec.ensemble, g.clone(), opts).unwrap();
        let rho = stationary_rho0(&spec, &frames, g.clone()).unwrap();
        let with = stationarity_residual(&rho, &op).unwrap();
        let mut no_k = opts;
        no_k.include_kappa = false;
        let without = stationarity_residual(&rho, &op.with_options(no_k).unwrap()).unwrap();
        assert!(without > 10.0 * with, "{with} {without}");
    }
}
