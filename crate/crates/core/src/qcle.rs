//! Grid discretization and propagation of the quantum-classical (Nosé-)Liouville
//! equation in the adiabatic basis, for one classical degree of freedom.

use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adiabatic::{adiabatize_scan, AdiabaticFrame, QuantumModel};
use crate::bracket::Coord;
use crate::ensemble::{make_structure, Anharmonic, EnsembleSpec, ExtendedHamiltonian};
use crate::error::{invalid, Error, Result};
use crate::grid::{AxisKind, MatrixField, PhaseGrid, Scheme};
use crate::linalg::CMat;
use crate::scalar::{cplx, czero, lit, Real};

/// Density matrix `ρ^{αα'}(X)` in the adiabatic basis.
pub type DensityField<T> = MatrixField<T>;

/// Which equation the operator drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// `∂χ/∂t = iℒχ`.
    Observable,
    /// `∂ρ/∂t = −(iℒ + κ)ρ`.
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiouvillianOptions<T> {
    pub side: Side,
    pub hbar: T,
    /// Scheme for the classical-like flow terms.
    pub scheme: Scheme,
    /// Scheme for `∂/∂P` inside the jump operator.
    pub jump_scheme: Scheme,
    pub include_jump: bool,
    pub include_kappa: bool,
    /// Infinitely heavy nuclei: drops every term but `iω`.
    pub frozen_nuclei: bool,
    /// Thermostat momenta feel no force (`ṗ_η = 0`).
    #[serde(default)]
    pub decouple_thermostat: bool,
}

impl<T: Real> LiouvillianOptions<T> {
    pub fn new(side: Side, hbar: T) -> Self {
        Self {
            side,
            hbar,
            scheme: Scheme::Upwind3,
            jump_scheme: Scheme::Central4,
            include_jump: true,
            include_kappa: true,
            frozen_nuclei: false,
            decouple_thermostat: false,
        }
    }

    pub fn spectral(mut self) -> Self {
        self.scheme = Scheme::Spectral;
        self.jump_scheme = Scheme::Spectral;
        self
    }
}

/// Adiabatic frames at each node of the grid's `R` axis (one frame when `R` is
/// not sampled), with sign continuity along the axis.
pub fn frames_on_grid<T: Real>(model: &dyn QuantumModel<T>, grid: &PhaseGrid<T>) -> Result<Vec<AdiabaticFrame<T>>> {
    let ir = grid
        .index_of(Coord::R(0))
        .ok_or_else(|| invalid("grid", "no R axis"))?;
    adiabatize_scan(model, &grid.values(ir))
}

/// Sparse quantum-classical Liouvillian on a grid.
#[derive(Debug, Clone)]
pub struct LiouvillianOp<T: Real> {
    grid: Arc<PhaseGrid<T>>,
    n: usize,
    spec: EnsembleSpec<T>,
    opts: LiouvillianOptions<T>,
    frames: Vec<AdiabaticFrame<T>>,
    /// Frame index of each node.
    node_frame: Vec<usize>,
    /// `P` at each node.
    momentum: Vec<T>,
    /// Layout positions of the axes carrying flow terms.
    flow_axes: Vec<usize>,
    /// Flow velocity at zero force and its force sensitivity, per flow axis and node.
    v0: Vec<Vec<T>>,
    vs: Vec<Vec<T>>,
    kappa0: Vec<T>,
    kappa_s: Vec<T>,
    /// Upwind direction per flow axis and element.
    upwind: Vec<Vec<bool>>,
}

/// Builds the Liouvillian from per-`R`-node frames.
pub fn build_liouvillian<T: Real>(
    frames: Vec<AdiabaticFrame<T>>,
    spec: &EnsembleSpec<T>,
    grid: Arc<PhaseGrid<T>>,
    opts: LiouvillianOptions<T>,
) -> Result<LiouvillianOp<T>> {
    spec.validate()?;
    if spec.dof != 1 || grid.dof() != 1 {
        return Err(Error::Unsupported("the quantum-classical propagator handles one classical degree of freedom".into()));
    }
    if grid.layout() != spec.kind {
        return Err(Error::GridMismatch(format!(
            "grid layout {:?} differs from ensemble {:?}",
            grid.layout(),
            spec.kind
        )));
    }
    if !(opts.hbar > T::zero()) {
        return Err(invalid("hbar", "must be positive"));
    }
    let ir = grid.index_of(Coord::R(0)).unwrap();
    let ip = grid.index_of(Coord::P(0)).unwrap();
    let expected_frames = grid.values(ir).len();
    if frames.len() != expected_frames {
        return Err(Error::GridMismatch(format!(
            "{} adiabatic frames for {} R nodes",
            frames.len(),
            expected_frames
        )));
    }
    let n = frames[0].n();
    if frames.iter().any(|f| f.n() != n) {
        return Err(Error::GridMismatch("frames of different dimension".into()));
    }
    let nodes = grid.n_nodes();
    let node_frame: Vec<usize> = (0..nodes).map(|k| grid.node_index(k, ir).unwrap_or(0)).collect();
    let points = grid.points();
    let momentum: Vec<T> = points.iter().map(|x| x[ip]).collect();

    let structure = make_structure(spec);
    let ham = ExtendedHamiltonian::new(spec.clone(), Arc::new(Anharmonic::harmonic(T::zero())));
    let dim = grid.dim();
    let thermostat_momenta: Vec<usize> = if opts.decouple_thermostat {
        [Coord::PEta(0), Coord::PEta(1)].iter().filter_map(|&c| spec.index(c)).collect()
    } else {
        Vec::new()
    };
    let per_node: Vec<(Vec<T>, Vec<T>, T, T)> = points
        .par_iter()
        .map(|x| {
            let b = structure.matrix(x);
            let g0 = ham.gradient_with_force(x, &[T::zero()]);
            let g1 = ham.gradient_with_force(x, &[T::one()]);
            let mut v0 = b.mul_vec(&g0);
            let mut v1 = b.mul_vec(&g1);
            for &i in &thermostat_momenta {
                v0[i] = T::zero();
                v1[i] = T::zero();
            }
            let vs: Vec<T> = v1.iter().zip(&v0).map(|(a, b)| *a - *b).collect();
            let div = structure.divergence(x);
            let k0: T = div.iter().zip(&g0).map(|(a, b)| *a * *b).sum();
            let k1: T = div.iter().zip(&g1).map(|(a, b)| *a * *b).sum();
            (v0, vs, k0, k1 - k0)
        })
        .collect();

    let mut flow_axes = Vec::new();
    let mut v0 = Vec::new();
    let mut vs = Vec::new();
    if !opts.frozen_nuclei {
        for axis in 0..dim {
            let a0: Vec<T> = per_node.iter().map(|p| p.0[axis]).collect();
            let a1: Vec<T> = per_node.iter().map(|p| p.1[axis]).collect();
            if a0.iter().chain(&a1).all(|v| *v == T::zero()) {
                continue;
            }
            if let AxisKind::Fixed { .. } = grid.axes()[axis].kind {
                return Err(Error::Unsupported(format!(
                    "flow along {:?} needs a sampled or exponential axis",
                    grid.axes()[axis].coord
                )));
            }
            flow_axes.push(axis);
            v0.push(a0);
            vs.push(a1);
        }
    }
    let kappa0 = per_node.iter().map(|p| p.2).collect();
    let kappa_s = per_node.iter().map(|p| p.3).collect();

    let mut op = LiouvillianOp {
        grid,
        n,
        spec: spec.clone(),
        opts,
        frames,
        node_frame,
        momentum,
        flow_axes,
        v0,
        vs,
        kappa0,
        kappa_s,
        upwind: Vec::new(),
    };
    op.upwind = (0..op.flow_axes.len())
        .map(|slot| {
            (0..nodes * n * n)
                .map(|e| {
                    let v = op.velocity(slot, e);
                    match op.opts.side {
                        Side::Density => v > T::zero(),
                        Side::Observable => v < T::zero(),
                    }
                })
                .collect()
        })
        .collect();
    op.warn_resolution();
    Ok(op)
}

impl<T: Real> LiouvillianOp<T> {
    pub fn grid(&self) -> &Arc<PhaseGrid<T>> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &EnsembleSpec<T> {
        &self.spec
    }

    pub fn options(&self) -> &LiouvillianOptions<T> {
        &self.opts
    }

    pub fn frames(&self) -> &[AdiabaticFrame<T>] {
        &self.frames
    }

    pub fn frame_at(&self, node: usize) -> &AdiabaticFrame<T> {
        &self.frames[self.node_frame[node]]
    }

    /// Same operator with different options (frames and coefficients reused).
    pub fn with_options(&self, opts: LiouvillianOptions<T>) -> Result<Self> {
        build_liouvillian(self.frames.clone(), &self.spec, self.grid.clone(), opts)
    }

    fn mean_force(&self, node: usize, a: usize, b: usize) -> T {
        let f = self.frame_at(node);
        (f.force[a] + f.force[b]) * lit(0.5)
    }

    /// Flow velocity on the `slot`-th flow axis for element `e = (node, α, α')`.
    fn velocity(&self, slot: usize, e: usize) -> T {
        let nn = self.n * self.n;
        let node = e / nn;
        let a = (e % nn) / self.n;
        let b = e % self.n;
        self.v0[slot][node] + self.mean_force(node, a, b) * self.vs[slot][node]
    }

    fn kappa(&self, node: usize, a: usize, b: usize) -> T {
        self.kappa0[node] + self.mean_force(node, a, b) * self.kappa_s[node]
    }

    /// `max |ω_{αα'}|` over the grid.
    pub fn max_omega(&self) -> T {
        let mut m = T::zero();
        for f in &self.frames {
            let lo = f.energies[0];
            let hi = f.energies[f.n() - 1];
            m = m.max((hi - lo).abs() / self.opts.hbar);
        }
        m
    }

    /// Largest stable step from the advective CFL limit `dt ≤ 0.5·Δx/|v|` and
    /// the phase limit `dt·max|ω| ≤ 0.1`.
    pub fn max_stable_dt(&self) -> T {
        let mut limit = T::infinity();
        for (slot, &axis) in self.flow_axes.iter().enumerate() {
            let Some(h) = self.grid.spacing(axis) else { continue };
            let nn = self.n * self.n;
            let vmax = (0..self.grid.n_nodes() * nn)
                .map(|e| self.velocity(slot, e).abs())
                .fold(T::zero(), |m, v| m.max(v));
            if vmax > T::zero() {
                limit = limit.min(lit::<T>(0.5) * h / vmax);
            }
        }
        let w = self.max_omega();
        if w > T::zero() {
            limit = limit.min(lit::<T>(0.1) / w);
        }
        limit
    }

    fn warn_resolution(&self) {
        let dt = self.max_stable_dt();
        let w = self.max_omega();
        if dt.is_finite() && w * dt * lit(5.0) > T::PI() {
            log::warn!("coherences rotate by more than pi per grid transit; resolution may be insufficient");
        }
    }

    /// `iℒf`, plus `κf` when `with_kappa`.
    pub fn liouville(&self, f: &MatrixField<T>, with_kappa: bool) -> Result<MatrixField<T>> {
        if !Arc::ptr_eq(f.grid(), &self.grid) && **f.grid() != *self.grid {
            return Err(Error::GridMismatch("field and operator grids differ".into()));
        }
        if f.n() != self.n {
            return Err(Error::GridMismatch(format!("field dimension {} vs {}", f.n(), self.n)));
        }
        let n = self.n;
        let nn = n * n;
        let hbar = self.opts.hbar;
        let data = f.as_slice();
        let mut out: Vec<Complex<T>> = data
            .par_iter()
            .enumerate()
            .map(|(e, z)| {
                let node = e / nn;
                let a = (e % nn) / n;
                let b = e % n;
                let fr = self.frame_at(node);
                let omega = (fr.energies[a] - fr.energies[b]) / hbar;
                let mut r = z * cplx(T::zero(), omega);
                if with_kappa && self.opts.include_kappa && !self.opts.frozen_nuclei {
                    r += z * self.kappa(node, a, b);
                }
                r
            })
            .collect();
        for (slot, &axis) in self.flow_axes.iter().enumerate() {
            let d = f.derivative(axis, self.opts.scheme, Some(&self.upwind[slot]))?;
            out.par_iter_mut()
                .zip(d.as_slice().par_iter())
                .enumerate()
                .for_each(|(e, (o, dz))| *o += dz * self.velocity(slot, e));
        }
        if self.opts.include_jump && !self.opts.frozen_nuclei && n > 1 {
            let j = self.jump(f)?;
            out.par_iter_mut().zip(j.as_slice().par_iter()).for_each(|(o, z)| *o += z);
        }
        Ok(f.with_data(out))
    }

    /// Jump part of `iℒ`:
    /// `Σ_β d_αβ (P/M + ΔE_αβ/2 ∂_P) f^{βα'} + Σ_β' d_α'β' (P/M + ΔE_α'β'/2 ∂_P) f^{αβ'}`.
    pub fn jump(&self, f: &MatrixField<T>) -> Result<MatrixField<T>> {
        let n = self.n;
        let nn = n * n;
        let ip = self.grid.index_of(Coord::P(0)).unwrap();
        let dp = f.derivative(ip, self.opts.jump_scheme, None)?;
        let dp = dp.as_slice();
        let data = f.as_slice();
        let inv_m = T::one() / self.spec.mass;
        let half = lit::<T>(0.5);
        let out: Vec<Complex<T>> = (0..data.len())
            .into_par_iter()
            .map(|e| {
                let node = e / nn;
                let a = (e % nn) / n;
                let b = e % n;
                let fr = self.frame_at(node);
                let pm = self.momentum[node] * inv_m;
                let base = node * nn;
                let mut acc = czero::<T>();
                for beta in 0..n {
                    let d = fr.coupling[(a, beta)];
                    if d != T::zero() {
                        let k = base + beta * n + b;
                        acc += (data[k] * pm + dp[k] * ((fr.energies[a] - fr.energies[beta]) * half)) * d;
                    }
                    let d = fr.coupling[(b, beta)];
                    if d != T::zero() {
                        let k = base + a * n + beta;
                        acc += (data[k] * pm + dp[k] * ((fr.energies[b] - fr.energies[beta]) * half)) * d;
                    }
                }
                acc
            })
            .collect();
        Ok(f.with_data(out))
    }

    /// Time derivative of the field for the operator's side.
    pub fn apply(&self, f: &MatrixField<T>) -> Result<MatrixField<T>> {
        match self.opts.side {
            Side::Observable => self.liouville(f, false),
            Side::Density => {
                let l = self.liouville(f, true)?;
                Ok(l.scale(cplx(-T::one(), T::zero())))
            }
        }
    }

    /// Diagonal field `H^α(X) = P²/2M + E_α(R) + extension energy`.
    pub fn energy_field(&self) -> MatrixField<T> {
        let ham = ExtendedHamiltonian::new(self.spec.clone(), Arc::new(Anharmonic::harmonic(T::zero())));
        let ip = self.grid.index_of(Coord::P(0)).unwrap();
        let two = lit::<T>(2.0);
        MatrixField::zeros(self.grid.clone(), self.n).map_nodes(|k, _| {
            let x = self.grid.point_at(k);
            let fr = self.frame_at(k);
            let base = x[ip] * x[ip] / (two * self.spec.mass) + ham.extension_energy(&x);
            let mut m = CMat::zeros(self.n);
            for a in 0..self.n {
                m[(a, a)] = cplx(base + fr.energies[a], T::zero());
            }
            m
        })
    }
}

/// Diagnostics recorded during propagation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics<T> {
    pub t: T,
    pub trace: T,
    pub herm_drift: T,
    pub energy: T,
}

#[derive(Debug, Clone)]
pub struct Propagation<T: Real> {
    pub field: MatrixField<T>,
    pub diagnostics: Vec<Diagnostics<T>>,
}

impl<T: Real> Propagation<T> {
    /// CSV with header `t,trace,herm_drift,energy`.
    pub fn write_diagnostics<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,trace,herm_drift,energy")?;
        for d in &self.diagnostics {
            writeln!(out, "{},{},{},{}", d.t, d.trace, d.herm_drift, d.energy)?;
        }
        Ok(())
    }
}

fn diagnose<T: Real>(f: &MatrixField<T>, energy: &MatrixField<T>, h0: T, t: T) -> Result<Diagnostics<T>> {
    Ok(Diagnostics {
        t,
        trace: f.trace_integral().re,
        herm_drift: (f.hermiticity_defect() - h0).max(T::zero()),
        energy: expectation(f, energy)?.0,
    })
}

/// RK4 propagation for `steps` steps of size `dt`, recording diagnostics every
/// `diag_stride` steps (and at both ends).
pub fn propagate<T: Real>(
    op: &LiouvillianOp<T>,
    f: &MatrixField<T>,
    dt: T,
    steps: usize,
    diag_stride: usize,
) -> Result<Propagation<T>> {
    let energy = op.energy_field();
    let h0 = f.hermiticity_defect();
    let mut diagnostics = vec![diagnose(f, &energy, h0, T::zero())?];
    if steps == 0 {
        return Ok(Propagation {
            field: f.clone(),
            diagnostics,
        });
    }
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(invalid("dt", "must be positive"));
    }
    let limit = op.max_stable_dt();
    if dt > limit {
        return Err(Error::Stability {
            dt: dt.as_f64(),
            suggested: limit.as_f64(),
        });
    }
    let stride = diag_stride.max(1);
    let half = cplx(dt * lit(0.5), T::zero());
    let full = cplx(dt, T::zero());
    let sixth = cplx(dt / lit(6.0), T::zero());
    let third = cplx(dt / lit(3.0), T::zero());
    let mut cur = f.clone();
    for step in 1..=steps {
        let k1 = op.apply(&cur)?;
        let mut y = cur.clone();
        y.axpy(half, &k1)?;
        let k2 = op.apply(&y)?;
        let mut y = cur.clone();
        y.axpy(half, &k2)?;
        let k3 = op.apply(&y)?;
        let mut y = cur.clone();
        y.axpy(full, &k3)?;
        let k4 = op.apply(&y)?;
        cur.axpy(sixth, &k1)?;
        cur.axpy(third, &k2)?;
        cur.axpy(third, &k3)?;
        cur.axpy(sixth, &k4)?;
        if cur.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Integration {
                step,
                reason: "non-finite density".into(),
            });
        }
        if step % stride == 0 || step == steps {
            let t = dt * T::from_usize(step).unwrap();
            diagnostics.push(diagnose(&cur, &energy, h0, t)?);
        }
    }
    Ok(Propagation {
        field: cur,
        diagnostics,
    })
}

/// `Tr' ∫dX ρ χ` by trapezoidal quadrature: `(real part, imaginary residual)`.
pub fn expectation<T: Real>(rho: &MatrixField<T>, obs: &MatrixField<T>) -> Result<(T, T)> {
    rho.check_compatible(obs)?;
    let w = rho.grid().quadrature_weights();
    let n = rho.n();
    let mut acc = czero::<T>();
    for (k, wk) in w.iter().enumerate() {
        let mut s = czero::<T>();
        for a in 0..n {
            for b in 0..n {
                s += rho.get(k, a, b) * obs.get(k, b, a);
            }
        }
        acc += s * *wk;
    }
    Ok((acc.re, acc.im))
}

/// `Σ_α ∫dX ρ^{αα}(X) o_α(X)` for a per-state scalar observable.
pub fn expectation_diagonal<T: Real>(rho: &MatrixField<T>, obs: impl Fn(&[T], usize) -> T + Sync) -> T {
    let grid = rho.grid();
    let w = grid.quadrature_weights();
    let mut acc = T::zero();
    for (k, wk) in w.iter().enumerate() {
        let x = grid.point_at(k);
        let mut s = T::zero();
        for a in 0..rho.n() {
            s += rho.get(k, a, a).re * obs(&x, a);
        }
        acc += s * *wk;
    }
    acc
}

/// Population `∫dX ρ^{αα}` of each adiabatic state.
pub fn populations<T: Real>(rho: &MatrixField<T>) -> Vec<T> {
    (0..rho.n())
        .map(|s| expectation_diagonal(rho, |_, a| if a == s { T::one() } else { T::zero() }))
        .collect()
}

/// Rescales so that `Tr' ∫dX ρ = 1`.
pub fn normalize<T: Real>(rho: &mut MatrixField<T>) -> Result<T> {
    let z = rho.trace_integral().re;
    if !(z.abs() > T::zero()) || !z.is_finite() {
        return Err(Error::Domain(format!("cannot normalize, trace integral {z}")));
    }
    let inv = cplx(T::one() / z, T::zero());
    rho.as_mut_slice().par_iter_mut().for_each(|v| *v = *v * inv);
    Ok(z)
}

/// `c c†·g(X)`: a pure quantum state `c` times a classical profile.
pub fn product_density<T: Real>(
    grid: Arc<PhaseGrid<T>>,
    state: &[Complex<T>],
    profile: impl Fn(&[T]) -> T + Sync,
) -> MatrixField<T> {
    let n = state.len();
    let mut proj = CMat::zeros(n);
    for a in 0..n {
        for b in 0..n {
            proj[(a, b)] = state[a] * state[b].conj();
        }
    }
    MatrixField::from_fn(grid, n, |x| proj.scale_real(profile(x)))
}

/// Writes a `(R, P)` slice: `R,P,rho_11,rho_22,re_rho_12,im_rho_12`.
/// Other sampled axes are taken at the node nearest to the given value (0 by default).
pub fn write_snapshot<T: Real, W: Write>(rho: &MatrixField<T>, slice: &[(Coord, T)], mut out: W) -> io::Result<()> {
    let grid = rho.grid();
    let ir = grid.index_of(Coord::R(0)).unwrap();
    let ip = grid.index_of(Coord::P(0)).unwrap();
    let mut target: Vec<Option<usize>> = vec![None; grid.dim()];
    for &axis in grid.sampled() {
        if axis == ir || axis == ip {
            continue;
        }
        let want = slice
            .iter()
            .find(|(c, _)| grid.index_of(*c) == Some(axis))
            .map(|p| p.1)
            .unwrap_or(T::zero());
        let vals = grid.values(axis);
        let best = (0..vals.len())
            .min_by(|&i, &j| (vals[i] - want).abs().partial_cmp(&(vals[j] - want).abs()).unwrap())
            .unwrap();
        target[axis] = Some(best);
    }
    writeln!(out, "R,P,rho_11,rho_22,re_rho_12,im_rho_12")?;
    let n = rho.n();
    for k in 0..grid.n_nodes() {
        let keep = target
            .iter()
            .enumerate()
            .all(|(axis, t)| t.map_or(true, |t| grid.node_index(k, axis) == Some(t)));
        if !keep {
            continue;
        }
        let x = grid.point_at(k);
        let r11 = rho.get(k, 0, 0).re;
        let (r22, r12) = if n > 1 {
            (rho.get(k, 1, 1).re, rho.get(k, 0, 1))
        } else {
            (T::zero(), czero())
        };
        writeln!(out, "{},{},{},{},{},{}", x[ir], x[ip], r11, r22, r12.re, r12.im)?;
    }
    Ok(())
}
