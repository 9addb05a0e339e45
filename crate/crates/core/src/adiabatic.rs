//! Quantum subsystem models `ĥ(R)` and their adiabatic representation.

use serde::{Deserialize, Serialize};

use crate::ensemble::Potential;
use crate::error::{invalid, Error, Result};
use crate::linalg::{symmetric_eigen, Dense};
use crate::scalar::{lit, Real};

/// Eigenvalue gaps below this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Quantum Hamiltonian `ĥ(R) = K̂ + Φ̂(R)` parametrized by one classical coordinate.
///
/// Matrices are real symmetric; the adiabatic basis is therefore real.
pub trait QuantumModel<T: Real>: Send + Sync {
    fn n(&self) -> usize;
    fn h(&self, r: T) -> Dense<T>;
    fn dh(&self, r: T) -> Dense<T>;
    fn description(&self) -> String;
}

/// Two-level linear vibronic model `ĥ = ½kR² + aRσz + Δσx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearVibronic<T> {
    pub a: T,
    pub delta: T,
    /// Harmonic confinement of the classical mode, shared by both surfaces.
    pub k: T,
}

impl<T: Real> QuantumModel<T> for LinearVibronic<T> {
    fn n(&self) -> usize {
        2
    }

    fn h(&self, r: T) -> Dense<T> {
        let base = lit::<T>(0.5) * self.k * r * r;
        Dense::from_rows(&[
            &[base + self.a * r, self.delta],
            &[self.delta, base - self.a * r],
        ])
    }

    fn dh(&self, r: T) -> Dense<T> {
        let base = self.k * r;
        Dense::from_rows(&[&[base + self.a, T::zero()], &[T::zero(), base - self.a]])
    }

    fn description(&self) -> String {
        format!("linear-vibronic a={} delta={} k={}", self.a, self.delta, self.k)
    }
}

/// Biased two-level system coupled to one mode:
/// `ĥ = ½kR² + (cR + ε)σz + Δσx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinBoson<T> {
    pub coupling: T,
    pub bias: T,
    pub delta: T,
    pub k: T,
}

impl<T: Real> QuantumModel<T> for SpinBoson<T> {
    fn n(&self) -> usize {
        2
    }

    fn h(&self, r: T) -> Dense<T> {
        let base = lit::<T>(0.5) * self.k * r * r;
        let z = self.coupling * r + self.bias;
        Dense::from_rows(&[&[base + z, self.delta], &[self.delta, base - z]])
    }

    fn dh(&self, r: T) -> Dense<T> {
        let base = self.k * r;
        Dense::from_rows(&[
            &[base + self.coupling, T::zero()],
            &[T::zero(), base - self.coupling],
        ])
    }

    fn description(&self) -> String {
        format!(
            "spin-boson c={} bias={} delta={} k={}",
            self.coupling, self.bias, self.delta, self.k
        )
    }
}

/// `n`-level ladder: diagonal `½kR² + aR(j − (n−1)/2) + j·spacing` with
/// nearest-neighbour tunnelling `Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ladder<T> {
    pub n: usize,
    pub a: T,
    pub delta: T,
    pub spacing: T,
    pub k: T,
}

impl<T: Real> QuantumModel<T> for Ladder<T> {
    fn n(&self) -> usize {
        self.n
    }

    fn h(&self, r: T) -> Dense<T> {
        let mut m = Dense::zeros(self.n);
        let mid = lit::<T>((self.n as f64 - 1.0) / 2.0);
        for j in 0..self.n {
            let jj = T::from_usize(j).unwrap();
            m[(j, j)] = lit::<T>(0.5) * self.k * r * r + self.a * r * (jj - mid) + jj * self.spacing;
            if j + 1 < self.n {
                m[(j, j + 1)] = self.delta;
                m[(j + 1, j)] = self.delta;
            }
        }
        m
    }

    fn dh(&self, r: T) -> Dense<T> {
        let mut m = Dense::zeros(self.n);
        let mid = lit::<T>((self.n as f64 - 1.0) / 2.0);
        for j in 0..self.n {
            m[(j, j)] = self.k * r + self.a * (T::from_usize(j).unwrap() - mid);
        }
        m
    }

    fn description(&self) -> String {
        format!(
            "ladder n={} a={} delta={} spacing={} k={}",
            self.n, self.a, self.delta, self.spacing, self.k
        )
    }
}

/// Adiabatic data at one classical configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticFrame<T> {
    pub r: T,
    /// `E_α(R)`, ascending.
    pub energies: Vec<T>,
    /// Eigenvectors `|α; R⟩` as columns.
    pub vectors: Dense<T>,
    /// `d_αβ = ⟨α|∂_R|β⟩`.
    pub coupling: Dense<T>,
    /// Hellmann–Feynman forces `F^α = −⟨α|∂ĥ/∂R|α⟩`.
    pub force: Vec<T>,
    /// `F^αβ = −⟨α|∂ĥ/∂R|β⟩`.
    pub force_full: Dense<T>,
}

impl<T: Real> AdiabaticFrame<T> {
    pub fn n(&self) -> usize {
        self.energies.len()
    }

    /// `ω_αβ = (E_α − E_β)/ħ`.
    pub fn omega(&self, alpha: usize, beta: usize, hbar: T) -> T {
        (self.energies[alpha] - self.energies[beta]) / hbar
    }

    /// Same energies and forces with all nonadiabatic couplings removed.
    pub fn decoupled(&self) -> Self {
        let mut f = self.clone();
        f.coupling = Dense::zeros(self.n());
        for a in 0..self.n() {
            for b in 0..self.n() {
                if a != b {
                    f.force_full[(a, b)] = T::zero();
                }
            }
        }
        f
    }
}

fn column_overlap<T: Real>(u: &Dense<T>, v: &Dense<T>, col: usize) -> T {
    (0..u.dim()).map(|k| u[(k, col)] * v[(k, col)]).sum()
}

/// Diagonalizes `ĥ(R)` and builds couplings and forces.
///
/// The gauge makes each eigenvector's largest-magnitude component positive, or,
/// when `neighbor` is given, aligns each eigenvector with the neighbor's.
pub fn adiabatize<T: Real>(
    model: &dyn QuantumModel<T>,
    r: T,
    neighbor: Option<&AdiabaticFrame<T>>,
) -> Result<AdiabaticFrame<T>> {
    let h = model.h(r);
    let n = h.dim();
    let (energies, mut vectors) = symmetric_eigen(&h);
    let tol = lit::<T>(DEGENERACY_TOL);
    for w in energies.windows(2) {
        if (w[1] - w[0]).abs() < tol {
            return Err(Error::Degenerate {
                r: r.as_f64(),
                gap: (w[1] - w[0]).abs().as_f64(),
            });
        }
    }
    for col in 0..n {
        let flip = match neighbor {
            Some(nb) => column_overlap(&vectors, &nb.vectors, col) < T::zero(),
            None => {
                let mut best = 0;
                for k in 1..n {
                    if vectors[(k, col)].abs() > vectors[(best, col)].abs() + lit(1e-12) {
                        best = k;
                    }
                }
                vectors[(best, col)] < T::zero()
            }
        };
        if flip {
            for k in 0..n {
                vectors[(k, col)] = -vectors[(k, col)];
            }
        }
    }
    // ⟨α|∂ĥ|β⟩
    let dh = model.dh(r);
    let mut dh_ad = Dense::zeros(n);
    for a in 0..n {
        for b in 0..n {
            let mut s = T::zero();
            for i in 0..n {
                for j in 0..n {
                    s += vectors[(i, a)] * dh[(i, j)] * vectors[(j, b)];
                }
            }
            dh_ad[(a, b)] = s;
        }
    }
    let mut coupling = Dense::zeros(n);
    let mut force_full = Dense::zeros(n);
    for a in 0..n {
        for b in 0..n {
            force_full[(a, b)] = -dh_ad[(a, b)];
            if a != b {
                coupling[(a, b)] = dh_ad[(a, b)] / (energies[b] - energies[a]);
            }
        }
    }
    let force = (0..n).map(|a| -dh_ad[(a, a)]).collect();
    Ok(AdiabaticFrame {
        r,
        energies,
        vectors,
        coupling,
        force,
        force_full,
    })
}

/// Frames along an increasing sequence of `R` with sign continuity between
/// consecutive points. The first frame uses the largest-component gauge.
pub fn adiabatize_scan<T: Real>(model: &dyn QuantumModel<T>, rs: &[T]) -> Result<Vec<AdiabaticFrame<T>>> {
    let mut out: Vec<AdiabaticFrame<T>> = Vec::with_capacity(rs.len());
    for &r in rs {
        let f = adiabatize(model, r, out.last())?;
        out.push(f);
    }
    Ok(out)
}

/// `F^αβ − F^α δ_αβ − (E_α − E_β) d_αβ` for every pair.
pub fn offdiagonal_force_identity<T: Real>(frame: &AdiabaticFrame<T>) -> Dense<T> {
    let n = frame.n();
    let mut res = Dense::zeros(n);
    for a in 0..n {
        for b in 0..n {
            let diag = if a == b { frame.force[a] } else { T::zero() };
            res[(a, b)] = frame.force_full[(a, b)]
                - diag
                - (frame.energies[a] - frame.energies[b]) * frame.coupling[(a, b)];
        }
    }
    res
}

/// Adiabatic surface `E_α(R)` as a classical potential for one mode.
pub struct AdiabaticSurface<T: Real> {
    pub model: Box<dyn QuantumModel<T>>,
    pub state: usize,
}

impl<T: Real> AdiabaticSurface<T> {
    pub fn new(model: Box<dyn QuantumModel<T>>, state: usize) -> Result<Self> {
        if state >= model.n() {
            return Err(invalid("state", format!("model has {} states", model.n())));
        }
        Ok(Self { model, state })
    }

    fn frame(&self, r: &[T]) -> AdiabaticFrame<T> {
        // surfaces are only used away from degeneracies; fall back to the raw spectrum
        match adiabatize(self.model.as_ref(), r[0], None) {
            Ok(f) => f,
            Err(_) => {
                let (e, v) = symmetric_eigen(&self.model.h(r[0]));
                let n = e.len();
                AdiabaticFrame {
                    r: r[0],
                    energies: e,
                    vectors: v,
                    coupling: Dense::zeros(n),
                    force: vec![T::zero(); n],
                    force_full: Dense::zeros(n),
                }
            }
        }
    }
}

impl<T: Real> Potential<T> for AdiabaticSurface<T> {
    fn value(&self, r: &[T]) -> T {
        symmetric_eigen(&self.model.h(r[0])).0[self.state]
    }

    fn gradient(&self, r: &[T]) -> Vec<T> {
        vec![-self.frame(r).force[self.state]]
    }
}
