//! Generalized antisymmetric-matrix brackets on classical phase space.
//!
//! A bracket structure is a field `B(X)` of antisymmetric matrices. It defines
//! `{a, b} = ∂a · B · ∂b`, the flow `Ẋ = B ∇H`, and the phase-space
//! compressibility `κ = Σ_ij ∂_i B_ij ∂_j H`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Dense;
use crate::scalar::{lit, Real};

/// Relative step of the central-difference fallback, `h_i = STEP·(1 + |x_i|)`.
pub const FD_REL_STEP: f64 = 1e-5;

/// Coordinate layout of an extended phase point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Nve,
    Nose,
    Nhc2,
    Npt,
}

/// Named coordinate of an extended phase point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coord {
    R(usize),
    P(usize),
    /// Thermostat coordinate `η_k` (`k = 0` for the Nosé/NPT thermostat).
    Eta(usize),
    /// Thermostat momentum `p_{η_k}`.
    PEta(usize),
    V,
    PV,
}

impl Layout {
    /// Extra (non-physical) coordinates, in order. Their momenta follow the
    /// physical momenta in the same order.
    fn extras(self) -> &'static [Coord] {
        match self {
            Layout::Nve => &[],
            Layout::Nose => &[Coord::Eta(0)],
            Layout::Nhc2 => &[Coord::Eta(0), Coord::Eta(1)],
            Layout::Npt => &[Coord::Eta(0), Coord::V],
        }
    }

    pub fn dim(self, dof: usize) -> usize {
        2 * (dof + self.extras().len())
    }

    /// Position of `c` in the coordinate vector for `dof` physical degrees of freedom.
    pub fn index(self, c: Coord, dof: usize) -> Option<usize> {
        let half = self.dim(dof) / 2;
        let extra = |target: Coord| self.extras().iter().position(|&e| e == target);
        match c {
            Coord::R(k) if k < dof => Some(k),
            Coord::P(k) if k < dof => Some(half + k),
            Coord::Eta(_) | Coord::V => extra(c).map(|j| dof + j),
            Coord::PEta(k) => extra(Coord::Eta(k)).map(|j| half + dof + j),
            Coord::PV => extra(Coord::V).map(|j| half + dof + j),
            _ => None,
        }
    }

    /// Coordinate tag at each position of the vector.
    pub fn coords(self, dof: usize) -> Vec<Coord> {
        let mut out: Vec<Coord> = (0..dof).map(Coord::R).collect();
        out.extend_from_slice(self.extras());
        out.extend((0..dof).map(Coord::P));
        out.extend(self.extras().iter().map(|e| match *e {
            Coord::Eta(k) => Coord::PEta(k),
            Coord::V => Coord::PV,
            _ => unreachable!(),
        }));
        out
    }
}

/// Extended classical state `X` with an ensemble-specific layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint<T> {
    layout: Layout,
    dof: usize,
    coords: Vec<T>,
}

impl<T: Real> PhasePoint<T> {
    pub fn new(layout: Layout, dof: usize, coords: Vec<T>) -> Result<Self> {
        let expected = layout.dim(dof);
        if coords.len() != expected {
            return Err(Error::Dimension {
                expected,
                found: coords.len(),
            });
        }
        if let Some(i) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidPoint(format!("coordinate {i} is not finite")));
        }
        if let Some(iv) = layout.index(Coord::V, dof) {
            if coords[iv] <= T::zero() {
                return Err(Error::InvalidPoint("volume must be positive".into()));
            }
        }
        Ok(Self {
            layout,
            dof,
            coords,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    pub fn get(&self, c: Coord) -> Option<T> {
        self.layout.index(c, self.dof).map(|i| self.coords[i])
    }
}

impl<T> AsRef<[T]> for PhasePoint<T> {
    fn as_ref(&self) -> &[T] {
        &self.coords
    }
}

/// A real function on phase space with a gradient.
pub trait ScalarField<T: Real>: Sync {
    fn value(&self, x: &[T]) -> T;

    /// Gradient; central differences unless overridden.
    fn gradient(&self, x: &[T]) -> Vec<T> {
        central_gradient(|y| self.value(y), x, lit(FD_REL_STEP))
    }
}

/// The `i`-th phase-space coordinate as a function.
#[derive(Debug, Clone, Copy)]
pub struct CoordinateField(pub usize);

impl<T: Real> ScalarField<T> for CoordinateField {
    fn value(&self, x: &[T]) -> T {
        x[self.0]
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); x.len()];
        g[self.0] = T::one();
        g
    }
}

/// Closure-backed field; gradient by central differences.
pub struct FnField<F>(pub F);

impl<T: Real, F: Fn(&[T]) -> T + Sync> ScalarField<T> for FnField<F> {
    fn value(&self, x: &[T]) -> T {
        (self.0)(x)
    }
}

/// Closure-backed field with an analytic gradient.
pub struct AnalyticField<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<T, F, G> ScalarField<T> for AnalyticField<F, G>
where
    T: Real,
    F: Fn(&[T]) -> T + Sync,
    G: Fn(&[T]) -> Vec<T> + Sync,
{
    fn value(&self, x: &[T]) -> T {
        (self.value)(x)
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        (self.gradient)(x)
    }
}

/// Central-difference gradient with step `rel·(1 + |x_i|)`.
pub fn central_gradient<T: Real>(f: impl Fn(&[T]) -> T, x: &[T], rel: T) -> Vec<T> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel * (T::one() + x[i].abs());
            y[i] = x[i] + h;
            let fp = f(&y);
            y[i] = x[i] - h;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (h + h)
        })
        .collect()
}

/// An antisymmetric matrix field `B(X)`.
pub trait BracketStructure<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn matrix(&self, x: &[T]) -> Dense<T>;

    /// Column divergences `Σ_i ∂B_ij/∂X_i`; central differences unless overridden.
    fn divergence(&self, x: &[T]) -> Vec<T> {
        numeric_divergence(self, x, lit(FD_REL_STEP))
    }
}

/// Central-difference column divergence of `B`.
pub fn numeric_divergence<T: Real, S: BracketStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    rel: T,
) -> Vec<T> {
    let n = s.dim();
    let mut div = vec![T::zero(); n];
    let mut y = x.to_vec();
    for i in 0..n {
        let h = rel * (T::one() + x[i].abs());
        y[i] = x[i] + h;
        let bp = s.matrix(&y);
        y[i] = x[i] - h;
        let bm = s.matrix(&y);
        y[i] = x[i];
        for (j, d) in div.iter_mut().enumerate() {
            *d += (bp[(i, j)] - bm[(i, j)]) / (h + h);
        }
    }
    div
}

/// Canonical structure `[[0, 1], [−1, 0]]` on `(R, P)` with `dof` blocks.
#[derive(Debug, Clone, Copy)]
pub struct Symplectic {
    pub dof: usize,
}

impl<T: Real> BracketStructure<T> for Symplectic {
    fn dim(&self) -> usize {
        2 * self.dof
    }

    fn matrix(&self, _x: &[T]) -> Dense<T> {
        let n = self.dof;
        let mut b = Dense::zeros(2 * n);
        for k in 0..n {
            b[(k, n + k)] = T::one();
            b[(n + k, k)] = -T::one();
        }
        b
    }

    fn divergence(&self, _x: &[T]) -> Vec<T> {
        vec![T::zero(); 2 * self.dof]
    }
}

fn check_dim<T>(expected: usize, x: &[T]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Dimension {
            expected,
            found: x.len(),
        });
    }
    Ok(())
}

/// `{a, b} = Σ_ij ∂_i a B_ij ∂_j b` at `x`.
pub fn poisson_bracket<T: Real>(
    a: &dyn ScalarField<T>,
    b: &dyn ScalarField<T>,
    s: &dyn BracketStructure<T>,
    x: &[T],
) -> Result<T> {
    check_dim(s.dim(), x)?;
    let ga = a.gradient(x);
    let gb = b.gradient(x);
    check_dim(s.dim(), &ga)?;
    check_dim(s.dim(), &gb)?;
    Ok(s.matrix(x).bilinear(&ga, &gb))
}

/// `Ẋ = B(X) ∇H(X)`.
pub fn eom_rhs<T: Real>(
    s: &dyn BracketStructure<T>,
    h: &dyn ScalarField<T>,
    x: &[T],
) -> Result<Vec<T>> {
    check_dim(s.dim(), x)?;
    let g = h.gradient(x);
    check_dim(s.dim(), &g)?;
    Ok(s.matrix(x).mul_vec(&g))
}

/// `κ = Σ_ij ∂_i B_ij ∂_j H`.
pub fn compressibility<T: Real>(
    s: &dyn BracketStructure<T>,
    h: &dyn ScalarField<T>,
    x: &[T],
) -> Result<T> {
    check_dim(s.dim(), x)?;
    let g = h.gradient(x);
    check_dim(s.dim(), &g)?;
    Ok(s.divergence(x).iter().zip(&g).map(|(&d, &gj)| d * gj).sum())
}

/// Rate `dw/dt` of the invariant-measure exponent `w = ∫ κ dt`.
pub fn invariant_weight_rate<T: Real>(
    s: &dyn BracketStructure<T>,
    h: &dyn ScalarField<T>,
    x: &[T],
) -> Result<T> {
    compressibility(s, h, x)
}

/// `{a, b}` as a field in its own right, differentiated numerically.
struct BracketField<'a, T: Real> {
    a: &'a dyn ScalarField<T>,
    b: &'a dyn ScalarField<T>,
    s: &'a dyn BracketStructure<T>,
    rel: T,
}

impl<T: Real> ScalarField<T> for BracketField<'_, T> {
    fn value(&self, x: &[T]) -> T {
        self.s
            .matrix(x)
            .bilinear(&self.a.gradient(x), &self.b.gradient(x))
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        central_gradient(|y| self.value(y), x, self.rel)
    }
}

/// `{a,{b,c}} + {c,{a,b}} + {b,{c,a}}` with nested brackets differentiated by
/// central differences of relative step `rel`.
pub fn jacobi_residual_classical_with_step<T: Real>(
    s: &dyn BracketStructure<T>,
    a: &dyn ScalarField<T>,
    b: &dyn ScalarField<T>,
    c: &dyn ScalarField<T>,
    x: &[T],
    rel: T,
) -> Result<T> {
    check_dim(s.dim(), x)?;
    let nested = |u: &dyn ScalarField<T>, v: &dyn ScalarField<T>, w: &dyn ScalarField<T>| {
        let inner = BracketField { a: v, b: w, s, rel };
        poisson_bracket(u, &inner, s, x)
    };
    Ok(nested(a, b, c)? + nested(c, a, b)? + nested(b, c, a)?)
}

/// Jacobi residual with the default nested step `1e-4`.
pub fn jacobi_residual_classical<T: Real>(
    s: &dyn BracketStructure<T>,
    a: &dyn ScalarField<T>,
    b: &dyn ScalarField<T>,
    c: &dyn ScalarField<T>,
    x: &[T],
) -> Result<T> {
    jacobi_residual_classical_with_step(s, a, b, c, x, lit(1e-4))
}
