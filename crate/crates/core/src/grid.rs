//! Uniform extended phase-space grids, matrix-valued fields on them, and
//! derivative stencils.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bracket::{Coord, Layout};
use crate::error::{invalid, Error, Result};
use crate::linalg::CMat;
use crate::scalar::{cplx, czero, lit, Real};

/// Minimum number of nodes on a sampled axis.
pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Values outside the domain are zero.
    ZeroInflow,
    Periodic,
}

/// How one coordinate of the layout is represented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisKind<T> {
    /// `n` uniform nodes spanning `[min, max]`.
    Nodes {
        min: T,
        max: T,
        n: usize,
        boundary: Boundary,
    },
    /// Not sampled. Fields are taken proportional to `exp(rate·x)` along this
    /// coordinate, so `∂f/∂x = rate·f`; coefficients are evaluated at `at`.
    /// Exact whenever no coefficient of the operator depends on the coordinate.
    Exponential { at: T, rate: T },
    /// Not sampled and carrying no derivative information.
    Fixed { at: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis<T> {
    pub coord: Coord,
    pub kind: AxisKind<T>,
}

/// Phase-space grid with one axis per layout coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid<T> {
    layout: Layout,
    dof: usize,
    axes: Vec<Axis<T>>,
    /// Layout positions of the sampled axes, slowest first.
    sampled: Vec<usize>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    n_nodes: usize,
}

/// Incremental construction of a [`PhaseGrid`].
#[derive(Debug, Clone)]
pub struct GridBuilder<T> {
    layout: Layout,
    dof: usize,
    kinds: Vec<Option<AxisKind<T>>>,
}

impl<T: Real> GridBuilder<T> {
    fn set(mut self, c: Coord, k: AxisKind<T>) -> Self {
        let i = self
            .layout
            .index(c, self.dof)
            .unwrap_or_else(|| panic!("{c:?} is not part of the {:?} layout", self.layout));
        self.kinds[i] = Some(k);
        self
    }

    pub fn nodes(self, c: Coord, min: T, max: T, n: usize) -> Self {
        self.set(
            c,
            AxisKind::Nodes {
                min,
                max,
                n,
                boundary: Boundary::ZeroInflow,
            },
        )
    }

    pub fn periodic(self, c: Coord, min: T, max: T, n: usize) -> Self {
        self.set(
            c,
            AxisKind::Nodes {
                min,
                max,
                n,
                boundary: Boundary::Periodic,
            },
        )
    }

    pub fn exponential(self, c: Coord, at: T, rate: T) -> Self {
        self.set(c, AxisKind::Exponential { at, rate })
    }

    pub fn fixed(self, c: Coord, at: T) -> Self {
        self.set(c, AxisKind::Fixed { at })
    }

    pub fn build(self) -> Result<PhaseGrid<T>> {
        let coords = self.layout.coords(self.dof);
        let mut axes = Vec::with_capacity(coords.len());
        for (c, k) in coords.into_iter().zip(self.kinds) {
            match k {
                Some(kind) => axes.push(Axis { coord: c, kind }),
                None => return Err(invalid("grid", format!("coordinate {c:?} has no axis"))),
            }
        }
        PhaseGrid::new(self.layout, self.dof, axes)
    }
}

impl<T: Real> PhaseGrid<T> {
    pub fn builder(layout: Layout, dof: usize) -> GridBuilder<T> {
        GridBuilder {
            layout,
            dof,
            kinds: vec![None; layout.dim(dof)],
        }
    }

    pub fn new(layout: Layout, dof: usize, axes: Vec<Axis<T>>) -> Result<Self> {
        let coords = layout.coords(dof);
        if axes.len() != coords.len() {
            return Err(Error::Dimension {
                expected: coords.len(),
                found: axes.len(),
            });
        }
        let mut sampled = Vec::new();
        let mut shape = Vec::new();
        for (i, (ax, c)) in axes.iter().zip(&coords).enumerate() {
            if ax.coord != *c {
                return Err(invalid("grid", format!("axis {i} is {:?}, layout expects {c:?}", ax.coord)));
            }
            match ax.kind {
                AxisKind::Nodes { min, max, n, .. } => {
                    if n < MIN_NODES {
                        return Err(invalid("grid", format!("{c:?} needs at least {MIN_NODES} nodes, got {n}")));
                    }
                    if !(max > min) || !min.is_finite() || !max.is_finite() {
                        return Err(invalid("grid", format!("{c:?} range [{min}, {max}] is empty")));
                    }
                    sampled.push(i);
                    shape.push(n);
                }
                AxisKind::Exponential { at, rate } => {
                    if !at.is_finite() || !rate.is_finite() {
                        return Err(invalid("grid", format!("{c:?} exponential axis must be finite")));
                    }
                }
                AxisKind::Fixed { at } => {
                    if !at.is_finite() {
                        return Err(invalid("grid", format!("{c:?} fixed value must be finite")));
                    }
                }
            }
        }
        let mut strides = vec![1; shape.len()];
        for k in (0..shape.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        let n_nodes = shape.iter().product();
        Ok(Self {
            layout,
            dof,
            axes,
            sampled,
            shape,
            strides,
            n_nodes,
        })
    }

    /// Grid consisting of the single phase point `x`.
    pub fn point(layout: Layout, dof: usize, x: &[T]) -> Result<Self> {
        let coords = layout.coords(dof);
        if x.len() != coords.len() {
            return Err(Error::Dimension {
                expected: coords.len(),
                found: x.len(),
            });
        }
        let axes = coords
            .into_iter()
            .zip(x)
            .map(|(coord, &at)| Axis {
                coord,
                kind: AxisKind::Fixed { at },
            })
            .collect();
        Self::new(layout, dof, axes)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis<T>] {
        &self.axes
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Layout positions of the sampled axes, slowest-varying first.
    pub fn sampled(&self) -> &[usize] {
        &self.sampled
    }

    pub fn index_of(&self, c: Coord) -> Option<usize> {
        self.layout.index(c, self.dof)
    }

    fn sampled_slot(&self, axis: usize) -> Option<usize> {
        self.sampled.iter().position(|&a| a == axis)
    }

    /// Node spacing of a sampled axis.
    pub fn spacing(&self, axis: usize) -> Option<T> {
        match self.axes[axis].kind {
            AxisKind::Nodes { min, max, n, .. } => Some((max - min) / T::from_usize(n - 1).unwrap()),
            _ => None,
        }
    }

    /// Node coordinates of a sampled axis.
    pub fn values(&self, axis: usize) -> Vec<T> {
        match self.axes[axis].kind {
            AxisKind::Nodes { min, n, .. } => {
                let h = self.spacing(axis).unwrap();
                (0..n).map(|i| min + h * T::from_usize(i).unwrap()).collect()
            }
            AxisKind::Exponential { at, .. } | AxisKind::Fixed { at } => vec![at],
        }
    }

    /// Position of `node` along the `slot`-th sampled axis.
    fn position(&self, node: usize, slot: usize) -> usize {
        (node / self.strides[slot]) % self.shape[slot]
    }

    /// Node position along layout coordinate `axis`, if that axis is sampled.
    pub fn node_index(&self, node: usize, axis: usize) -> Option<usize> {
        self.sampled_slot(axis).map(|slot| self.position(node, slot))
    }

    /// Full phase-space point of a node.
    pub fn point_at(&self, node: usize) -> Vec<T> {
        let mut x = Vec::with_capacity(self.axes.len());
        for (i, ax) in self.axes.iter().enumerate() {
            let v = match ax.kind {
                AxisKind::Nodes { min, .. } => {
                    let slot = self.sampled_slot(i).unwrap();
                    min + self.spacing(i).unwrap() * T::from_usize(self.position(node, slot)).unwrap()
                }
                AxisKind::Exponential { at, .. } | AxisKind::Fixed { at } => at,
            };
            x.push(v);
        }
        x
    }

    pub fn points(&self) -> Vec<Vec<T>> {
        (0..self.n_nodes).into_par_iter().map(|k| self.point_at(k)).collect()
    }

    /// Trapezoidal weights (plain spacing on periodic axes).
    pub fn quadrature_weights(&self) -> Vec<T> {
        let per_axis: Vec<Vec<T>> = self.sampled.iter().map(|&a| self.axis_weights(a)).collect();
        (0..self.n_nodes)
            .map(|node| {
                per_axis
                    .iter()
                    .enumerate()
                    .fold(T::one(), |acc, (slot, w)| acc * w[self.position(node, slot)])
            })
            .collect()
    }

    /// Copy with the rates of exponential axes replaced for the listed coordinates.
    pub fn with_rates(&self, rates: &[(Coord, T)]) -> Self {
        let mut g = self.clone();
        for ax in g.axes.iter_mut() {
            if let AxisKind::Exponential { at, .. } = ax.kind {
                if let Some(&(_, rate)) = rates.iter().find(|(c, _)| *c == ax.coord) {
                    ax.kind = AxisKind::Exponential { at, rate };
                }
            }
        }
        g
    }

    /// One-dimensional quadrature weights of a sampled axis (`[1]` otherwise).
    pub fn axis_weights(&self, axis: usize) -> Vec<T> {
        match self.axes[axis].kind {
            AxisKind::Nodes { n, boundary, .. } => {
                let h = self.spacing(axis).unwrap();
                let mut w = vec![h; n];
                if boundary == Boundary::ZeroInflow {
                    w[0] = h * lit(0.5);
                    w[n - 1] = h * lit(0.5);
                }
                w
            }
            _ => vec![T::one()],
        }
    }

    /// Whether the nodes of coordinate `c` are symmetric about zero.
    pub fn is_symmetric(&self, c: Coord) -> bool {
        let Some(i) = self.index_of(c) else { return false };
        match self.axes[i].kind {
            AxisKind::Nodes { min, max, .. } => (min + max).abs() <= lit::<T>(1e-12) * (max - min),
            AxisKind::Exponential { at, .. } | AxisKind::Fixed { at } => at == T::zero(),
        }
    }

    /// Node index obtained by reflecting coordinate `c` about zero.
    /// Only meaningful when [`is_symmetric`](Self::is_symmetric) holds.
    pub fn mirror(&self, node: usize, c: Coord) -> usize {
        let i = self.index_of(c).unwrap();
        match self.sampled_slot(i) {
            Some(slot) => {
                let p = self.position(node, slot);
                let q = self.shape[slot] - 1 - p;
                node + q * self.strides[slot] - p * self.strides[slot]
            }
            None => node,
        }
    }
}

/// Spatial derivative scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Third-order upwind-biased; needs a transport direction per element.
    Upwind3,
    /// Fourth-order central with one-sided closures at non-periodic ends.
    Central4,
    /// Fourier differentiation, treating each axis as periodic.
    Spectral,
}

/// Complex `n × n` matrix at every node, stored `[node][α][α']`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField<T: Real> {
    grid: Arc<PhaseGrid<T>>,
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> MatrixField<T> {
    pub fn zeros(grid: Arc<PhaseGrid<T>>, n: usize) -> Self {
        let len = grid.n_nodes() * n * n;
        Self {
            grid,
            n,
            data: vec![czero(); len],
        }
    }

    pub fn from_data(grid: Arc<PhaseGrid<T>>, n: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != grid.n_nodes() * n * n {
            return Err(Error::Dimension {
                expected: grid.n_nodes() * n * n,
                found: data.len(),
            });
        }
        Ok(Self { grid, n, data })
    }

    /// Evaluates `f(X)` at every node.
    pub fn from_fn(grid: Arc<PhaseGrid<T>>, n: usize, f: impl Fn(&[T]) -> CMat<T> + Sync) -> Self {
        let nodes: Vec<CMat<T>> = (0..grid.n_nodes())
            .into_par_iter()
            .map(|k| f(&grid.point_at(k)))
            .collect();
        let mut data = Vec::with_capacity(grid.n_nodes() * n * n);
        for m in &nodes {
            assert_eq!(m.dim(), n, "matrix dimension differs from field dimension");
            data.extend_from_slice(m.as_slice());
        }
        Self { grid, n, data }
    }

    /// `f(X)·1`.
    pub fn scalar(grid: Arc<PhaseGrid<T>>, n: usize, f: impl Fn(&[T]) -> T + Sync) -> Self {
        Self::from_fn(grid, n, |x| CMat::identity(n).scale_real(f(x)))
    }

    pub fn constant(grid: Arc<PhaseGrid<T>>, m: &CMat<T>) -> Self {
        let n = m.dim();
        let mut data = Vec::with_capacity(grid.n_nodes() * n * n);
        for _ in 0..grid.n_nodes() {
            data.extend_from_slice(m.as_slice());
        }
        Self { grid, n, data }
    }

    pub fn grid(&self) -> &Arc<PhaseGrid<T>> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn node(&self, k: usize) -> &[Complex<T>] {
        let m = self.n * self.n;
        &self.data[k * m..(k + 1) * m]
    }

    pub fn at(&self, k: usize) -> CMat<T> {
        CMat::from_vec(self.n, self.node(k).to_vec())
    }

    pub fn get(&self, k: usize, a: usize, b: usize) -> Complex<T> {
        self.data[(k * self.n + a) * self.n + b]
    }

    pub fn set(&mut self, k: usize, a: usize, b: usize, v: Complex<T>) {
        self.data[(k * self.n + a) * self.n + b] = v;
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch(format!(
                "quantum dimensions {} and {}",
                self.n, other.n
            )));
        }
        if !Arc::ptr_eq(&self.grid, &other.grid) && *self.grid != *other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn with_data(&self, data: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            grid: self.grid.clone(),
            n: self.n,
            data,
        }
    }

    /// Node-wise map over matrices.
    pub fn map_nodes(&self, f: impl Fn(usize, &CMat<T>) -> CMat<T> + Sync) -> Self {
        let n = self.n;
        let nodes: Vec<CMat<T>> = (0..self.grid.n_nodes())
            .into_par_iter()
            .map(|k| f(k, &self.at(k)))
            .collect();
        let mut data = Vec::with_capacity(self.data.len());
        for m in &nodes {
            assert_eq!(m.dim(), n);
            data.extend_from_slice(m.as_slice());
        }
        self.with_data(data)
    }

    /// Node-wise binary map; fields must be compatible.
    pub fn zip_nodes(&self, other: &Self, f: impl Fn(usize, &CMat<T>, &CMat<T>) -> CMat<T> + Sync) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.map_nodes(|k, a| f(k, a, &other.at(k))))
    }

    /// Node-wise matrix product `self·other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.zip_nodes(other, |_, a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.with_data(self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.with_data(self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect()))
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        self.with_data(self.data.iter().map(|a| a * c).collect())
    }

    /// `self += c·other`.
    pub fn axpy(&mut self, c: Complex<T>, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        self.data
            .par_iter_mut()
            .zip(other.data.par_iter())
            .for_each(|(a, b)| *a += b * c);
        Ok(())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// Largest `|A − A†|` entry over all nodes.
    pub fn hermiticity_defect(&self) -> T {
        let n = self.n;
        (0..self.grid.n_nodes())
            .map(|k| {
                let mut d = T::zero();
                for a in 0..n {
                    for b in a..n {
                        d = d.max((self.get(k, a, b) - self.get(k, b, a).conj()).norm());
                    }
                }
                d
            })
            .fold(T::zero(), |m, d| m.max(d))
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Quadrature inner product `Σ_X w(X) Σ_{αα'} conj(self)·other`.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        self.check_compatible(other)?;
        let w = self.grid.quadrature_weights();
        let m = self.n * self.n;
        let mut acc = czero::<T>();
        for (k, wk) in w.iter().enumerate() {
            let mut s = czero::<T>();
            for j in 0..m {
                s += self.data[k * m + j].conj() * other.data[k * m + j];
            }
            acc += s * *wk;
        }
        Ok(acc)
    }

    /// Quadrature L2 norm.
    pub fn norm(&self) -> T {
        self.inner(self).map(|z| z.re.sqrt()).unwrap_or_else(|_| T::zero())
    }

    /// `Tr' ∫ dX A` by trapezoidal quadrature.
    pub fn trace_integral(&self) -> Complex<T> {
        let w = self.grid.quadrature_weights();
        let mut acc = czero::<T>();
        for (k, wk) in w.iter().enumerate() {
            let mut s = czero::<T>();
            for a in 0..self.n {
                s += self.get(k, a, a);
            }
            acc += s * *wk;
        }
        acc
    }

    /// Derivative along layout coordinate `axis`.
    ///
    /// `upwind` gives, per element, whether the transport velocity is positive
    /// (information arriving from lower node indices). Required for
    /// [`Scheme::Upwind3`] and ignored otherwise.
    pub fn derivative(&self, axis: usize, scheme: Scheme, upwind: Option<&[bool]>) -> Result<Self> {
        let data = derivative(&self.grid, &self.data, self.n * self.n, axis, scheme, upwind)?;
        Ok(self.with_data(data))
    }
}

/// Derivative of interleaved node data with `ncomp` components per node along
/// layout coordinate `axis`.
pub fn derivative<T: Real>(
    grid: &PhaseGrid<T>,
    data: &[Complex<T>],
    ncomp: usize,
    axis: usize,
    scheme: Scheme,
    upwind: Option<&[bool]>,
) -> Result<Vec<Complex<T>>> {
    if data.len() != grid.n_nodes() * ncomp {
        return Err(Error::Dimension {
            expected: grid.n_nodes() * ncomp,
            found: data.len(),
        });
    }
    match grid.axes()[axis].kind {
        AxisKind::Exponential { rate, .. } => return Ok(data.iter().map(|z| z * rate).collect()),
        AxisKind::Fixed { .. } => {
            return Err(Error::Unsupported(format!(
                "no derivative data along {:?}",
                grid.axes()[axis].coord
            )))
        }
        AxisKind::Nodes { .. } => {}
    }
    let slot = grid.sampled_slot(axis).unwrap();
    match scheme {
        Scheme::Spectral => Ok(spectral(grid, data, ncomp, axis, slot)),
        Scheme::Central4 => Ok(stencil(grid, data, ncomp, axis, slot, |_| Stencil::Central4)),
        Scheme::Upwind3 => {
            let dir = upwind.ok_or_else(|| Error::Unsupported("upwind scheme without transport direction".into()))?;
            if dir.len() != data.len() {
                return Err(Error::Dimension {
                    expected: data.len(),
                    found: dir.len(),
                });
            }
            Ok(stencil(grid, data, ncomp, axis, slot, |e| {
                if dir[e] {
                    Stencil::UpwindPositive
                } else {
                    Stencil::UpwindNegative
                }
            }))
        }
    }
}

#[derive(Clone, Copy)]
enum Stencil {
    Central4,
    UpwindPositive,
    UpwindNegative,
}

fn stencil<T: Real>(
    grid: &PhaseGrid<T>,
    data: &[Complex<T>],
    ncomp: usize,
    axis: usize,
    slot: usize,
    choose: impl Fn(usize) -> Stencil + Sync,
) -> Vec<Complex<T>> {
    let (n, periodic) = match grid.axes()[axis].kind {
        AxisKind::Nodes { n, boundary, .. } => (n as isize, boundary == Boundary::Periodic),
        _ => unreachable!(),
    };
    let h = grid.spacing(axis).unwrap();
    let stride = grid.strides[slot] as isize;
    let inv6 = T::one() / (lit::<T>(6.0) * h);
    let inv12 = T::one() / (lit::<T>(12.0) * h);
    let mut out = vec![czero(); data.len()];
    out.par_iter_mut().enumerate().for_each(|(e, o)| {
        let node = (e / ncomp) as isize;
        let i = (node / stride) % n;
        let base = e as isize - i * stride * ncomp as isize;
        let f = |j: isize| -> Complex<T> {
            let j = if periodic { j.rem_euclid(n) } else { j };
            if j < 0 || j >= n {
                czero()
            } else {
                data[(base + j * stride * ncomp as isize) as usize]
            }
        };
        let c = |v: f64| lit::<T>(v);
        *o = match choose(e) {
            Stencil::UpwindPositive => {
                (f(i - 2) - f(i - 1) * c(6.0) + f(i) * c(3.0) + f(i + 1) * c(2.0)) * inv6
            }
            Stencil::UpwindNegative => {
                (-f(i - 1) * c(2.0) - f(i) * c(3.0) + f(i + 1) * c(6.0) - f(i + 2)) * inv6
            }
            Stencil::Central4 if periodic || (i >= 2 && i + 2 < n) => {
                (f(i - 2) - f(i - 1) * c(8.0) + f(i + 1) * c(8.0) - f(i + 2)) * inv12
            }
            Stencil::Central4 => {
                // one-sided fourth-order closures
                if i == 0 {
                    (-f(0) * c(25.0) + f(1) * c(48.0) - f(2) * c(36.0) + f(3) * c(16.0) - f(4) * c(3.0)) * inv12
                } else if i == 1 {
                    (-f(0) * c(3.0) - f(1) * c(10.0) + f(2) * c(18.0) - f(3) * c(6.0) + f(4)) * inv12
                } else if i == n - 1 {
                    (f(n - 1) * c(25.0) - f(n - 2) * c(48.0) + f(n - 3) * c(36.0) - f(n - 4) * c(16.0)
                        + f(n - 5) * c(3.0))
                        * inv12
                } else {
                    (f(n - 1) * c(3.0) + f(n - 2) * c(10.0) - f(n - 3) * c(18.0) + f(n - 4) * c(6.0) - f(n - 5))
                        * inv12
                }
            }
        };
    });
    out
}

fn spectral<T: Real>(
    grid: &PhaseGrid<T>,
    data: &[Complex<T>],
    ncomp: usize,
    axis: usize,
    slot: usize,
) -> Vec<Complex<T>> {
    let n = grid.shape[slot];
    let stride = grid.strides[slot];
    let h = grid.spacing(axis).unwrap();
    let period = h * T::from_usize(n).unwrap();
    let two_pi = lit::<T>(2.0) * T::PI();
    let wavenumbers: Vec<T> = (0..n)
        .map(|j| {
            if 2 * j == n {
                T::zero()
            } else if 2 * j < n {
                two_pi * T::from_usize(j).unwrap() / period
            } else {
                -two_pi * T::from_usize(n - j).unwrap() / period
            }
        })
        .collect();
    let norm = T::one() / T::from_usize(n).unwrap();
    let outer = grid.n_nodes() / (n * stride);
    let lines = outer * stride * ncomp;
    let start = |line: usize| {
        let comp = line % ncomp;
        let rest = line / ncomp;
        let inner = rest % stride;
        let o = rest / stride;
        (o * n * stride + inner) * ncomp + comp
    };
    let results: Vec<Vec<Complex<T>>> = (0..lines)
        .into_par_iter()
        .map(|line| {
            let s = start(line);
            let mut buf: Vec<Complex<T>> = (0..n).map(|j| data[s + j * stride * ncomp]).collect();
            T::fft_in_place(&mut buf, false);
            for (z, &k) in buf.iter_mut().zip(&wavenumbers) {
                *z = *z * cplx(T::zero(), k * norm);
            }
            T::fft_in_place(&mut buf, true);
            buf
        })
        .collect();
    let mut out = vec![czero(); data.len()];
    for (line, vals) in results.into_iter().enumerate() {
        let s = start(line);
        for (j, v) in vals.into_iter().enumerate() {
            out[s + j * stride * ncomp] = v;
        }
    }
    out
}
