//! Extended-system ensembles: Nosé, Nosé–Hoover chain (two links) and
//! constant-pressure dynamics, each as a bracket structure plus a generalized
//! energy.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bracket::{BracketStructure, Coord, Layout, ScalarField, Symplectic};
use crate::error::{invalid, Result};
use crate::linalg::Dense;
use crate::scalar::{lit, Real};

/// Ensemble parameters. Reduced units with `k_B = 1` unless `kb` says otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec<T> {
    pub kind: Layout,
    /// Number of physical degrees of freedom `N` (physical momenta).
    pub dof: usize,
    pub temperature: T,
    /// Nosé constant `g`; `N` by default.
    pub g: T,
    /// Mass `M` of the physical coordinates.
    pub mass: T,
    /// Thermostat inertia `m_η` (first link of the chain).
    pub m_eta: T,
    /// Second-link inertia `m_{η2}` (chain only).
    pub m_eta2: T,
    /// Barostat inertia `m_V`.
    pub m_v: T,
    /// External pressure (constant-pressure only).
    pub p_ext: T,
    pub kb: T,
}

impl<T: Real> EnsembleSpec<T> {
    pub fn new(kind: Layout, dof: usize) -> Self {
        Self {
            kind,
            dof,
            temperature: T::one(),
            g: T::from_usize(dof).unwrap(),
            mass: T::one(),
            m_eta: T::one(),
            m_eta2: T::one(),
            m_v: T::one(),
            p_ext: T::one(),
            kb: T::one(),
        }
    }

    pub fn with_temperature(mut self, t: T) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_g(mut self, g: T) -> Self {
        self.g = g;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dof == 0 {
            return Err(invalid("dof", "at least one physical degree of freedom"));
        }
        let positive: [(&'static str, T); 7] = [
            ("temperature", self.temperature),
            ("g", self.g),
            ("mass", self.mass),
            ("m_eta", self.m_eta),
            ("m_eta2", self.m_eta2),
            ("m_v", self.m_v),
            ("kb", self.kb),
        ];
        for (name, v) in positive {
            if v.is_nan() || v <= T::zero() {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !self.p_ext.is_finite() {
            return Err(invalid("p_ext", "must be finite"));
        }
        Ok(())
    }

    pub fn kt(&self) -> T {
        self.kb * self.temperature
    }

    pub fn beta(&self) -> T {
        T::one() / self.kt()
    }

    pub fn dim(&self) -> usize {
        self.kind.dim(self.dof)
    }

    pub fn index(&self, c: Coord) -> Option<usize> {
        self.kind.index(c, self.dof)
    }

    /// Closed-form compressibility of the ensemble's structure.
    pub fn compressibility_closed_form(&self, x: &[T]) -> T {
        let n = T::from_usize(self.dof).unwrap();
        let at = |c| x[self.index(c).unwrap()];
        match self.kind {
            Layout::Nve => T::zero(),
            Layout::Nose => -n * at(Coord::PEta(0)) / self.m_eta,
            Layout::Nhc2 => -(n * at(Coord::PEta(0)) / self.m_eta + at(Coord::PEta(1)) / self.m_eta2),
            Layout::Npt => -(n + T::one()) * at(Coord::PEta(0)) / self.m_eta,
        }
    }

    /// Exponent `w` of the invariant measure, `dw/dt = κ`, as a function of the
    /// thermostat coordinates (`w(0) = 0` at `η = 0`).
    pub fn invariant_exponent(&self, x: &[T]) -> T {
        let n = T::from_usize(self.dof).unwrap();
        let at = |c| x[self.index(c).unwrap()];
        match self.kind {
            Layout::Nve => T::zero(),
            Layout::Nose => -n * at(Coord::Eta(0)),
            Layout::Nhc2 => -(n * at(Coord::Eta(0)) + at(Coord::Eta(1))),
            Layout::Npt => -(n + T::one()) * at(Coord::Eta(0)),
        }
    }

    /// `∂w/∂η_k` for each thermostat coordinate present in the layout.
    pub fn invariant_exponent_rates(&self) -> Vec<(Coord, T)> {
        let n = T::from_usize(self.dof).unwrap();
        match self.kind {
            Layout::Nve => vec![],
            Layout::Nose => vec![(Coord::Eta(0), -n)],
            Layout::Nhc2 => vec![(Coord::Eta(0), -n), (Coord::Eta(1), -T::one())],
            Layout::Npt => vec![(Coord::Eta(0), -(n + T::one()))],
        }
    }
}

/// Nosé structure `B^N` on `(R, η, P, p_η)`.
#[derive(Debug, Clone, Copy)]
pub struct NoseStructure {
    pub dof: usize,
}

impl<T: Real> BracketStructure<T> for NoseStructure {
    fn dim(&self) -> usize {
        2 * self.dof + 2
    }

    fn matrix(&self, x: &[T]) -> Dense<T> {
        let n = self.dof;
        let (eta, p0, peta) = (n, n + 1, 2 * n + 1);
        let mut b = Dense::zeros(2 * n + 2);
        for k in 0..n {
            b[(k, p0 + k)] = T::one();
            b[(p0 + k, k)] = -T::one();
            b[(p0 + k, peta)] = -x[p0 + k];
            b[(peta, p0 + k)] = x[p0 + k];
        }
        b[(eta, peta)] = T::one();
        b[(peta, eta)] = -T::one();
        b
    }

    fn divergence(&self, _x: &[T]) -> Vec<T> {
        let mut d = vec![T::zero(); 2 * self.dof + 2];
        d[2 * self.dof + 1] = -T::from_usize(self.dof).unwrap();
        d
    }
}

/// Two-link chain structure `B^NHC` on `(R, η₁, η₂, P, p_{η1}, p_{η2})`.
#[derive(Debug, Clone, Copy)]
pub struct Nhc2Structure {
    pub dof: usize,
}

impl<T: Real> BracketStructure<T> for Nhc2Structure {
    fn dim(&self) -> usize {
        2 * self.dof + 4
    }

    fn matrix(&self, x: &[T]) -> Dense<T> {
        let n = self.dof;
        let half = n + 2;
        let (e1, e2, p0, pe1, pe2) = (n, n + 1, half, half + n, half + n + 1);
        let mut b = Dense::zeros(2 * half);
        for k in 0..n {
            b[(k, p0 + k)] = T::one();
            b[(p0 + k, k)] = -T::one();
            b[(p0 + k, pe1)] = -x[p0 + k];
            b[(pe1, p0 + k)] = x[p0 + k];
        }
        b[(e1, pe1)] = T::one();
        b[(pe1, e1)] = -T::one();
        b[(e2, pe2)] = T::one();
        b[(pe2, e2)] = -T::one();
        b[(pe1, pe2)] = -x[pe1];
        b[(pe2, pe1)] = x[pe1];
        b
    }

    fn divergence(&self, _x: &[T]) -> Vec<T> {
        let n = self.dof;
        let mut d = vec![T::zero(); 2 * n + 4];
        d[2 * n + 2] = -T::from_usize(n).unwrap();
        d[2 * n + 3] = -T::one();
        d
    }
}

/// Constant-pressure structure `B^NPT` on `(R, η, V, P, p_η, p_V)`.
#[derive(Debug, Clone, Copy)]
pub struct NptStructure {
    pub dof: usize,
}

impl<T: Real> BracketStructure<T> for NptStructure {
    fn dim(&self) -> usize {
        2 * self.dof + 4
    }

    fn matrix(&self, x: &[T]) -> Dense<T> {
        let n = self.dof;
        let half = n + 2;
        let (eta, vol, p0, peta, pv) = (n, n + 1, half, half + n, half + n + 1);
        let three_v = lit::<T>(3.0) * x[vol];
        let mut b = Dense::zeros(2 * half);
        for k in 0..n {
            b[(k, p0 + k)] = T::one();
            b[(p0 + k, k)] = -T::one();
            b[(k, pv)] = x[k] / three_v;
            b[(pv, k)] = -x[k] / three_v;
            b[(p0 + k, peta)] = -x[p0 + k];
            b[(peta, p0 + k)] = x[p0 + k];
            b[(p0 + k, pv)] = -x[p0 + k] / three_v;
            b[(pv, p0 + k)] = x[p0 + k] / three_v;
        }
        b[(eta, peta)] = T::one();
        b[(peta, eta)] = -T::one();
        b[(vol, pv)] = T::one();
        b[(pv, vol)] = -T::one();
        b[(peta, pv)] = x[pv];
        b[(pv, peta)] = -x[pv];
        b
    }

    fn divergence(&self, _x: &[T]) -> Vec<T> {
        let n = self.dof;
        let mut d = vec![T::zero(); 2 * n + 4];
        d[2 * n + 2] = -T::from_usize(n + 1).unwrap();
        d
    }
}

/// Bracket structure matching the ensemble layout.
pub fn make_structure<T: Real>(spec: &EnsembleSpec<T>) -> Box<dyn BracketStructure<T>> {
    let dof = spec.dof;
    match spec.kind {
        Layout::Nve => Box::new(Symplectic { dof }),
        Layout::Nose => Box::new(NoseStructure { dof }),
        Layout::Nhc2 => Box::new(Nhc2Structure { dof }),
        Layout::Npt => Box::new(NptStructure { dof }),
    }
}

/// Classical potential `Φ(R)` acting on the physical coordinates.
pub trait Potential<T: Real>: Send + Sync {
    fn value(&self, r: &[T]) -> T;
    fn gradient(&self, r: &[T]) -> Vec<T>;

    /// True for a purely harmonic potential, where bare Nosé dynamics is not ergodic.
    fn is_harmonic(&self) -> bool {
        false
    }
}

/// `Φ = Σ_k (k/2) R_k² + (λ/4) R_k⁴`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anharmonic<T> {
    pub k: T,
    pub quartic: T,
}

impl<T: Real> Anharmonic<T> {
    pub fn harmonic(k: T) -> Self {
        Self {
            k,
            quartic: T::zero(),
        }
    }
}

impl<T: Real> Potential<T> for Anharmonic<T> {
    fn value(&self, r: &[T]) -> T {
        r.iter()
            .map(|&x| {
                let x2 = x * x;
                lit::<T>(0.5) * self.k * x2 + lit::<T>(0.25) * self.quartic * x2 * x2
            })
            .sum()
    }

    fn gradient(&self, r: &[T]) -> Vec<T> {
        r.iter()
            .map(|&x| self.k * x + self.quartic * x * x * x)
            .collect()
    }

    fn is_harmonic(&self) -> bool {
        self.quartic == T::zero()
    }
}

/// Generalized energy of an extended system:
/// `Σ P²/2M + Φ(R)` plus thermostat kinetic terms, `g k_B T η` terms, and for
/// constant pressure `p_V²/2m_V + P_ext V`.
#[derive(Clone)]
pub struct ExtendedHamiltonian<T: Real> {
    pub spec: EnsembleSpec<T>,
    pub potential: Arc<dyn Potential<T>>,
}

impl<T: Real> ExtendedHamiltonian<T> {
    pub fn new(spec: EnsembleSpec<T>, potential: Arc<dyn Potential<T>>) -> Self {
        Self { spec, potential }
    }

    fn r(&self, x: &[T]) -> Vec<T> {
        x[..self.spec.dof].to_vec()
    }

    fn p<'a>(&self, x: &'a [T]) -> &'a [T] {
        let p0 = self.spec.index(Coord::P(0)).unwrap();
        &x[p0..p0 + self.spec.dof]
    }

    /// Physical part `H_T = Σ P²/2M + Φ(R)`.
    pub fn physical_energy(&self, x: &[T]) -> T {
        let kin: T = self.p(x).iter().map(|&p| p * p).sum::<T>() / (lit::<T>(2.0) * self.spec.mass);
        kin + self.potential.value(&self.r(x))
    }

    /// Thermostat/barostat part of the energy (everything except `H_T`).
    pub fn extension_energy(&self, x: &[T]) -> T {
        let s = &self.spec;
        let half = lit::<T>(0.5);
        let gkt = s.g * s.kt();
        let at = |c| x[s.index(c).unwrap()];
        match s.kind {
            Layout::Nve => T::zero(),
            Layout::Nose => half * at(Coord::PEta(0)).powi(2) / s.m_eta + gkt * at(Coord::Eta(0)),
            Layout::Nhc2 => {
                half * at(Coord::PEta(0)).powi(2) / s.m_eta
                    + half * at(Coord::PEta(1)).powi(2) / s.m_eta2
                    + gkt * (at(Coord::Eta(0)) + at(Coord::Eta(1)))
            }
            Layout::Npt => {
                half * at(Coord::PEta(0)).powi(2) / s.m_eta
                    + gkt * at(Coord::Eta(0))
                    + half * at(Coord::PV).powi(2) / s.m_v
                    + s.p_ext * at(Coord::V)
            }
        }
    }

    /// Gradient with `∂Φ/∂R` replaced by `−force`. Used for mean-force flows.
    pub fn gradient_with_force(&self, x: &[T], force: &[T]) -> Vec<T> {
        let s = &self.spec;
        let mut g = vec![T::zero(); s.dim()];
        for k in 0..s.dof {
            g[k] = -force[k];
        }
        let p0 = s.index(Coord::P(0)).unwrap();
        for k in 0..s.dof {
            g[p0 + k] = x[p0 + k] / s.mass;
        }
        let gkt = s.g * s.kt();
        let mut set = |c, v| {
            let i = s.index(c).unwrap();
            g[i] = v;
        };
        let at = |c| x[s.index(c).unwrap()];
        match s.kind {
            Layout::Nve => {}
            Layout::Nose => {
                set(Coord::Eta(0), gkt);
                set(Coord::PEta(0), at(Coord::PEta(0)) / s.m_eta);
            }
            Layout::Nhc2 => {
                set(Coord::Eta(0), gkt);
                set(Coord::Eta(1), gkt);
                set(Coord::PEta(0), at(Coord::PEta(0)) / s.m_eta);
                set(Coord::PEta(1), at(Coord::PEta(1)) / s.m_eta2);
            }
            Layout::Npt => {
                set(Coord::Eta(0), gkt);
                set(Coord::V, s.p_ext);
                set(Coord::PEta(0), at(Coord::PEta(0)) / s.m_eta);
                set(Coord::PV, at(Coord::PV) / s.m_v);
            }
        }
        g
    }
}

impl<T: Real> ScalarField<T> for ExtendedHamiltonian<T> {
    fn value(&self, x: &[T]) -> T {
        self.physical_energy(x) + self.extension_energy(x)
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let force: Vec<T> = self
            .potential
            .gradient(&self.r(x))
            .into_iter()
            .map(|g| -g)
            .collect();
        self.gradient_with_force(x, &force)
    }
}
