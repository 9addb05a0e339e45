//! Operator algebra: commutators in matrix form, generalized commutators,
//! the Λ operator and the quantum-classical bracket on phase-space grids.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bracket::BracketStructure;
use crate::error::{invalid, Error, Result};
use crate::grid::{AxisKind, MatrixField, Scheme};
use crate::linalg::{CMat, Dense};
use crate::scalar::{cplx, lit, Real};

/// Operator-valued function of phase space sampled on a grid.
pub type OperatorField<T> = MatrixField<T>;

fn same_dim<T: Real>(a: &CMat<T>, b: &CMat<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// `[a b]·B·[a b]ᵀ` with the 2×2 symplectic `B`, i.e. `ab − ba`.
pub fn commutator_matrix_form<T: Real>(a: &CMat<T>, b: &CMat<T>) -> Result<CMat<T>> {
    same_dim(a, b)?;
    let row = [a, b];
    let sym = [[0.0, 1.0], [-1.0, 0.0]];
    let mut out = CMat::zeros(a.dim());
    for i in 0..2 {
        for j in 0..2 {
            if sym[i][j] != 0.0 {
                out = &out + &(row[i] * row[j]).scale_real(lit(sym[i][j]));
            }
        }
    }
    Ok(out)
}

/// `(i/ħ)[h, χ]`.
pub fn heisenberg_rhs<T: Real>(h: &CMat<T>, chi: &CMat<T>, hbar: T) -> Result<CMat<T>> {
    same_dim(h, chi)?;
    Ok(h.commutator(chi).scale(cplx(T::zero(), T::one() / hbar)))
}

/// `aζb − bζa` for a constant `ζ`.
pub fn generalized_commutator<T: Real>(a: &CMat<T>, b: &CMat<T>, zeta: &CMat<T>) -> Result<CMat<T>> {
    same_dim(a, b)?;
    same_dim(a, zeta)?;
    Ok(&(&(a * zeta) * b) - &(&(b * zeta) * a))
}

/// `[a,[b,c]] + [c,[a,b]] + [b,[c,a]]`.
pub fn commutator_jacobi<T: Real>(a: &CMat<T>, b: &CMat<T>, c: &CMat<T>) -> Result<CMat<T>> {
    same_dim(a, b)?;
    same_dim(a, c)?;
    let t1 = a.commutator(&b.commutator(c));
    let t2 = c.commutator(&a.commutator(b));
    let t3 = b.commutator(&c.commutator(a));
    Ok(&(&t1 + &t2) + &t3)
}

/// `[ab, c] − a[b, c] − [a, c]b`.
pub fn leibniz_defect<T: Real>(a: &CMat<T>, b: &CMat<T>, c: &CMat<T>) -> Result<CMat<T>> {
    same_dim(a, b)?;
    same_dim(a, c)?;
    let lhs = (a * b).commutator(c);
    let rhs = &(a * &b.commutator(c)) + &(&a.commutator(c) * b);
    Ok(&lhs - &rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BracketKind {
    PureQuantum,
    QuantumClassical,
}

/// Antisymmetric 2×2 block super-operator `D` defining a bracket.
///
/// For `QuantumClassical` the off-diagonal block is `1 + ħΛ/2i`; for
/// `PureQuantum` it is `ζ` (identity when absent).
#[derive(Clone)]
pub struct DMatrixSpec<T: Real> {
    pub kind: BracketKind,
    pub zeta: Option<CMat<T>>,
    pub hbar: T,
    pub structure: Arc<dyn BracketStructure<T>>,
    pub scheme: Scheme,
}

impl<T: Real> DMatrixSpec<T> {
    pub fn quantum_classical(structure: Arc<dyn BracketStructure<T>>, hbar: T) -> Self {
        Self {
            kind: BracketKind::QuantumClassical,
            zeta: None,
            hbar,
            structure,
            scheme: Scheme::Central4,
        }
    }

    pub fn pure_quantum(structure: Arc<dyn BracketStructure<T>>, hbar: T, zeta: Option<CMat<T>>) -> Self {
        Self {
            kind: BracketKind::PureQuantum,
            zeta,
            hbar,
            structure,
            scheme: Scheme::Central4,
        }
    }

    pub fn with_hbar(&self, hbar: T) -> Self {
        let mut s = self.clone();
        s.hbar = hbar;
        s
    }

    fn check(&self) -> Result<()> {
        if !(self.hbar > T::zero()) || !self.hbar.is_finite() {
            return Err(invalid("hbar", format!("must be positive and finite, got {}", self.hbar)));
        }
        Ok(())
    }

    /// Upper off-diagonal block applied to the pair: `a·D₁₂·b`.
    pub fn block(&self, a: &OperatorField<T>, b: &OperatorField<T>) -> Result<OperatorField<T>> {
        self.check()?;
        match self.kind {
            BracketKind::PureQuantum => match &self.zeta {
                Some(z) => a.zip_nodes(b, |_, x, y| &(x * z) * y),
                None => a.matmul(b),
            },
            BracketKind::QuantumClassical => {
                let prod = a.matmul(b)?;
                // aΛb = −{a,b}; ħ/(2i) = −iħ/2
                let pb = lambda_apply(a, b, self.structure.as_ref(), self.scheme)?;
                let mut out = prod;
                out.axpy(cplx(T::zero(), self.hbar * lit(0.5)), &pb)?;
                Ok(out)
            }
        }
    }
}

/// Operator-valued Poisson bracket `Σ_ij (∂a/∂X_i) B_ij (∂b/∂X_j)` with `a`'s
/// derivative on the left. `aΛb` is its negative.
pub fn lambda_apply<T: Real>(
    a: &OperatorField<T>,
    b: &OperatorField<T>,
    s: &dyn BracketStructure<T>,
    scheme: Scheme,
) -> Result<OperatorField<T>> {
    a.check_compatible(b)?;
    let grid = a.grid().clone();
    if s.dim() != grid.dim() {
        return Err(Error::Dimension {
            expected: s.dim(),
            found: grid.dim(),
        });
    }
    let points = grid.points();
    let mats: Vec<Dense<T>> = points.par_iter().map(|x| s.matrix(x)).collect();
    let dim = grid.dim();
    let mut coupled = vec![false; dim];
    for m in &mats {
        for i in 0..dim {
            for j in 0..dim {
                if m[(i, j)] != T::zero() {
                    coupled[i] = true;
                    coupled[j] = true;
                }
            }
        }
    }
    let mut da = Vec::with_capacity(dim);
    let mut db = Vec::with_capacity(dim);
    for i in 0..dim {
        if !coupled[i] {
            da.push(None);
            db.push(None);
            continue;
        }
        if let AxisKind::Fixed { .. } = grid.axes()[i].kind {
            return Err(Error::Unsupported(format!(
                "field has no derivative data along {:?}",
                grid.axes()[i].coord
            )));
        }
        da.push(Some(a.derivative(i, scheme, None)?));
        db.push(Some(b.derivative(i, scheme, None)?));
    }
    Ok(a.map_nodes(|k, _| {
        let m = &mats[k];
        let mut acc = CMat::zeros(a.n());
        for i in 0..dim {
            let Some(ai) = &da[i] else { continue };
            let ai = ai.at(k);
            for j in 0..dim {
                let bij = m[(i, j)];
                if bij == T::zero() {
                    continue;
                }
                let bj = db[j].as_ref().unwrap().at(k);
                acc = &acc + &(&ai * &bj).scale_real(bij);
            }
        }
        acc
    }))
}

/// `aΛb = −{a, b}`.
pub fn lambda_op<T: Real>(
    a: &OperatorField<T>,
    b: &OperatorField<T>,
    s: &dyn BracketStructure<T>,
    scheme: Scheme,
) -> Result<OperatorField<T>> {
    Ok(lambda_apply(a, b, s, scheme)?.scale(cplx(-T::one(), T::zero())))
}

/// Bracket defined by `spec`: `(i/ħ)[a b]·D·[a b]ᵀ`.
///
/// For the quantum-classical kind this is
/// `(i/ħ)[h,χ] − ½{h,χ} + ½{χ,h}`.
pub fn bracket<T: Real>(h: &OperatorField<T>, chi: &OperatorField<T>, spec: &DMatrixSpec<T>) -> Result<OperatorField<T>> {
    let forward = spec.block(h, chi)?;
    let backward = spec.block(chi, h)?;
    Ok(forward.sub(&backward)?.scale(cplx(T::zero(), T::one() / spec.hbar)))
}

/// Quantum-classical bracket `(h, χ)` assembled through `D`.
pub fn qc_bracket<T: Real>(h: &OperatorField<T>, chi: &OperatorField<T>, spec: &DMatrixSpec<T>) -> Result<OperatorField<T>> {
    if spec.kind != BracketKind::QuantumClassical {
        return Err(invalid("kind", "quantum-classical bracket needs a quantum-classical D"));
    }
    bracket(h, chi, spec)
}

/// Three-term evaluation `(i/ħ)[h,χ] − ½{h,χ} + ½{χ,h}`.
pub fn qc_bracket_direct<T: Real>(
    h: &OperatorField<T>,
    chi: &OperatorField<T>,
    spec: &DMatrixSpec<T>,
) -> Result<OperatorField<T>> {
    spec.check()?;
    let s = spec.structure.as_ref();
    let comm = h.zip_nodes(chi, |_, a, b| a.commutator(b))?;
    let hc = lambda_apply(h, chi, s, spec.scheme)?;
    let ch = lambda_apply(chi, h, s, spec.scheme)?;
    let mut out = comm.scale(cplx(T::zero(), T::one() / spec.hbar));
    let half = lit::<T>(0.5);
    out.axpy(cplx(-half, T::zero()), &hc)?;
    out.axpy(cplx(half, T::zero()), &ch)?;
    Ok(out)
}

/// `(a,(b,c)) + (c,(a,b)) + (b,(c,a))` with nested brackets differentiated on the grid.
pub fn qc_jacobi_residual<T: Real>(
    a: &OperatorField<T>,
    b: &OperatorField<T>,
    c: &OperatorField<T>,
    spec: &DMatrixSpec<T>,
) -> Result<OperatorField<T>> {
    let t1 = qc_bracket(a, &qc_bracket(b, c, spec)?, spec)?;
    let t2 = qc_bracket(c, &qc_bracket(a, b, spec)?, spec)?;
    let t3 = qc_bracket(b, &qc_bracket(c, a, spec)?, spec)?;
    t1.add(&t2)?.add(&t3)
}

/// The closed twelve-term expression `¼{aΛ(bΛc) − aΛ(cΛb) − …}` built from Λ alone.
pub fn qc_jacobi_twelve_term<T: Real>(
    a: &OperatorField<T>,
    b: &OperatorField<T>,
    c: &OperatorField<T>,
    spec: &DMatrixSpec<T>,
) -> Result<OperatorField<T>> {
    let s = spec.structure.as_ref();
    let sc = spec.scheme;
    let l = |x: &OperatorField<T>, y: &OperatorField<T>| lambda_op(x, y, s, sc);
    let bc = l(b, c)?;
    let cb = l(c, b)?;
    let ab = l(a, b)?;
    let ba = l(b, a)?;
    let ac = l(a, c)?;
    let ca = l(c, a)?;
    let terms: [(f64, OperatorField<T>); 12] = [
        (1.0, l(a, &bc)?),
        (-1.0, l(a, &cb)?),
        (-1.0, l(&bc, a)?),
        (1.0, l(&cb, a)?),
        (1.0, l(c, &ab)?),
        (-1.0, l(b, &ac)?),
        (-1.0, l(&ab, c)?),
        (1.0, l(&ac, b)?),
        (1.0, l(b, &ca)?),
        (-1.0, l(c, &ba)?),
        (-1.0, l(&ca, b)?),
        (1.0, l(&ba, c)?),
    ];
    let mut out = OperatorField::zeros(a.grid().clone(), a.n());
    for (sign, t) in &terms {
        out.axpy(cplx(lit::<T>(0.25 * sign), T::zero()), t)?;
    }
    Ok(out)
}

/// Jacobi residual split by powers of `ħ`.
#[derive(Debug, Clone)]
pub struct JacobiReport<T: Real> {
    /// Full nested residual at `spec.hbar`.
    pub full: OperatorField<T>,
    /// `ħ`-independent part, extracted from two evaluations of the full residual.
    pub lambda_part: OperatorField<T>,
    /// The twelve-term Λ expression, evaluated independently.
    pub twelve_term: OperatorField<T>,
    /// `max |lambda_part − twelve_term|`.
    pub mismatch: T,
}

/// Evaluates the residual at `ħ` and `ħ/2`. Since `J = B/ħ + C` (the pure
/// commutator part cancels), `C = (ħ₁J₁ − ħ₂J₂)/(ħ₁ − ħ₂)` is compared with the
/// twelve-term expression.
pub fn qc_jacobi_report<T: Real>(
    a: &OperatorField<T>,
    b: &OperatorField<T>,
    c: &OperatorField<T>,
    spec: &DMatrixSpec<T>,
) -> Result<JacobiReport<T>> {
    let h1 = spec.hbar;
    let h2 = spec.hbar * lit(0.5);
    let full = qc_jacobi_residual(a, b, c, spec)?;
    let half = qc_jacobi_residual(a, b, c, &spec.with_hbar(h2))?;
    let inv = T::one() / (h1 - h2);
    let mut lambda_part = full.scale(cplx(h1 * inv, T::zero()));
    lambda_part.axpy(cplx(-h2 * inv, T::zero()), &half)?;
    let twelve_term = qc_jacobi_twelve_term(a, b, c, spec)?;
    let mismatch = lambda_part.sub(&twelve_term)?.max_abs();
    Ok(JacobiReport {
        full,
        lambda_part,
        twelve_term,
        mismatch,
    })
}

/// `aζ(X)b − bζ(X)a` with a phase-space dependent `ζ`. Experimental.
pub fn generalized_commutator_field<T: Real>(
    a: &OperatorField<T>,
    b: &OperatorField<T>,
    zeta: &OperatorField<T>,
) -> Result<OperatorField<T>> {
    log::warn!("phase-space dependent zeta in the generalized commutator is experimental");
    a.check_compatible(b)?;
    a.check_compatible(zeta)?;
    Ok(a.map_nodes(|k, x| {
        let y = b.at(k);
        let z = zeta.at(k);
        &(&(x * &z) * &y) - &(&(&y * &z) * x)
    }))
}

/// Multiplies every node by `i`; handy for Hermiticity checks of brackets.
pub fn times_i<T: Real>(f: &OperatorField<T>) -> OperatorField<T> {
    f.scale(Complex::new(T::zero(), T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bracket::{Coord, Layout, Symplectic};
    use crate::grid::PhaseGrid;
    use crate::linalg::pauli;

    fn grid(n: usize) -> Arc<PhaseGrid<f64>> {
        Arc::new(
            PhaseGrid::builder(Layout::Nve, 1)
                .nodes(Coord::R(0), -1.0, 1.2, n)
                .nodes(Coord::P(0), -0.9, 1.1, n)
                .build()
                .unwrap(),
        )
    }

    fn qc(hbar: f64) -> DMatrixSpec<f64> {
        DMatrixSpec::quantum_classical(Arc::new(Symplectic { dof: 1 }), hbar)
    }

    fn i() -> Complex<f64> {
        cplx(0.0, 1.0)
    }

    #[test]
    fn pauli_commutators() {
        let (sx, sy, sz) = pauli::<f64>();
        let c = commutator_matrix_form(&sx, &sy).unwrap();
        assert!((&c - &sz.scale(cplx(0.0, 2.0))).max_abs() < 1e-15);
        assert_eq!(commutator_matrix_form(&sx, &sx).unwrap().max_abs(), 0.0);
        assert!(commutator_matrix_form(&sx, &CMat::identity(3)).is_err());
    }

    #[test]
    fn heisenberg_examples() {
        let (sx, sy, sz) = pauli::<f64>();
        assert_eq!(heisenberg_rhs(&sz, &sz, 1.0).unwrap().max_abs(), 0.0);
        let r = heisenberg_rhs(&sz, &sx, 1.0).unwrap();
        assert!((&r + &sy.scale_real(2.0)).max_abs() < 1e-15);
        let h = CMat::from_pairs(2, &[(0.3, 0.0), (0.1, -0.4), (0.1, 0.4), (-1.0, 0.0)]);
        assert_eq!(heisenberg_rhs(&h, &CMat::identity(2), 0.7).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn generalized_commutator_identity_zeta() {
        let (sx, sy, _) = pauli::<f64>();
        let g = generalized_commutator(&sx, &sy, &CMat::identity(2)).unwrap();
        assert!((&g - &sx.commutator(&sy)).max_abs() < 1e-15);
    }

    #[test]
    fn lambda_examples() {
        let g = grid(9);
        let s = Symplectic { dof: 1 };
        let r = OperatorField::scalar(g.clone(), 2, |x| x[0]);
        let p = OperatorField::scalar(g.clone(), 2, |x| x[1]);
        let pb = lambda_apply(&r, &p, &s, Scheme::Central4).unwrap();
        assert!((&pb.at(17) - &CMat::identity(2)).max_abs() < 1e-12);
        assert!(lambda_apply(&r, &r, &s, Scheme::Central4).unwrap().max_abs() < 1e-12);

        let (sx, sy, _) = pauli::<f64>();
        let a = OperatorField::from_fn(g.clone(), 2, |x| sx.scale_real(x[0]));
        let b = OperatorField::from_fn(g.clone(), 2, |x| sy.scale_real(x[1]));
        let pb = lambda_apply(&a, &b, &s, Scheme::Central4).unwrap();
        let expect = &sx * &sy;
        for k in 0..g.n_nodes() {
            assert!((&pb.at(k) - &expect).max_abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_needs_derivative_data() {
        let g = Arc::new(PhaseGrid::point(Layout::Nve, 1, &[0.1, 0.2]).unwrap());
        let a = OperatorField::scalar(g.clone(), 2, |x| x[0]);
        let r = lambda_apply(&a, &a, &Symplectic { dof: 1 }, Scheme::Central4);
        assert!(matches!(r, Err(Error::Unsupported(_))));
        // constant fields on a point still have a commutator bracket
        let pq = DMatrixSpec::pure_quantum(Arc::new(Symplectic { dof: 1 }), 1.0, None);
        let (sx, sy, sz) = pauli::<f64>();
        let out = bracket(&OperatorField::constant(g.clone(), &sx), &OperatorField::constant(g, &sy), &pq).unwrap();
        assert!((&out.at(0) + &sz.scale_real(2.0)).max_abs() < 1e-15);
    }

    #[test]
    fn qc_bracket_routes_agree() {
        let g = grid(12);
        let (sx, _, sz) = pauli::<f64>();
        let h = OperatorField::from_fn(g.clone(), 2, |x| {
            &CMat::identity(2).scale_real(0.5 * x[1] * x[1]) + &sz.scale_real(x[0])
        });
        let chi = OperatorField::from_fn(g.clone(), 2, |x| sx.scale_real(x[1]));
        let spec = qc(0.7);
        let d = qc_bracket(&h, &chi, &spec).unwrap();
        let direct = qc_bracket_direct(&h, &chi, &spec).unwrap();
        assert!(d.sub(&direct).unwrap().max_abs() < 1e-12);
        // symbolic: (i/ħ)P[R σz, σx] − ½(−R? ) ... evaluated term by term
        for k in 0..g.n_nodes() {
            let x = g.point_at(k);
            let (r, p) = (x[0], x[1]);
            let comm = sz.commutator(&sx).scale(i() * (r * p / 0.7));
            // {h,χ} = ∂_R h ∂_P χ − ∂_P h ∂_R χ = σz σx
            // {χ,h} = ∂_R χ ∂_P h − ∂_P χ ∂_R h = −σx σz
            let pb1 = &sz * &sx;
            let pb2 = (&sx * &sz).scale_real(-1.0);
            let expect = &(&comm - &pb1.scale_real(0.5)) + &pb2.scale_real(0.5);
            assert!((&d.at(k) - &expect).max_abs() < 1e-11);
        }
    }

    #[test]
    fn qc_bracket_reductions() {
        let g = grid(10);
        let (sx, sy, _) = pauli::<f64>();
        let spec = qc(0.3);
        let a = OperatorField::constant(g.clone(), &sx);
        let b = OperatorField::constant(g.clone(), &sy);
        let out = qc_bracket(&a, &b, &spec).unwrap();
        let expect = sx.commutator(&sy).scale(cplx(0.0, 1.0 / 0.3));
        assert!((&out.at(5) - &expect).max_abs() < 1e-13);

        let f = OperatorField::scalar(g.clone(), 2, |x| x[0] * x[0] * x[1]);
        let h = OperatorField::scalar(g.clone(), 2, |x| 0.5 * x[1] * x[1] + x[0].powi(3));
        let out = qc_bracket(&h, &f, &spec).unwrap();
        for k in 0..g.n_nodes() {
            let x = g.point_at(k);
            // {h,f} classical = ∂_R h ∂_P f − ∂_P h ∂_R f, (h,f) = −{h,f} for scalars
            let pb = 3.0 * x[0] * x[0] * x[0] * x[0] - x[1] * 2.0 * x[0] * x[1];
            assert!((out.get(k, 0, 0).re + pb).abs() < 1e-10, "{} {}", out.get(k, 0, 0).re, pb);
            assert!(out.get(k, 0, 1).norm() < 1e-12);
        }
    }

    #[test]
    fn energy_conservation_and_hermiticity() {
        let g = grid(10);
        let (sx, sy, sz) = pauli::<f64>();
        let spec = qc(0.5);
        let h = OperatorField::from_fn(g.clone(), 2, |x| {
            &(&CMat::identity(2).scale_real(0.5 * x[1] * x[1]) + &sz.scale_real(x[0])) + &sx.scale_real(0.3)
        });
        assert!(qc_bracket(&h, &h, &spec).unwrap().max_abs() < 1e-12);
        let chi = OperatorField::from_fn(g.clone(), 2, |x| &sy.scale_real(x[0] * x[1]) + &sz.scale_real(x[1]));
        let out = qc_bracket(&h, &chi, &spec).unwrap();
        assert!(out.is_hermitian(1e-11));
        assert!(!times_i(&out).is_hermitian(1e-3));
    }

    #[test]
    fn jacobi_dichotomy() {
        let g = grid(14);
        let (sx, sy, sz) = pauli::<f64>();
        let spec = qc(0.6);
        let c1 = OperatorField::constant(g.clone(), &sx);
        let c2 = OperatorField::constant(g.clone(), &sy);
        let c3 = OperatorField::constant(g.clone(), &sz);
        assert!(qc_jacobi_residual(&c1, &c2, &c3, &spec).unwrap().max_abs() < 1e-12);

        let s1 = OperatorField::scalar(g.clone(), 2, |x| x[0] * x[0]);
        let s2 = OperatorField::scalar(g.clone(), 2, |x| x[1] * x[1]);
        let s3 = OperatorField::scalar(g.clone(), 2, |x| x[0] * x[1]);
        assert!(qc_jacobi_residual(&s1, &s2, &s3, &spec).unwrap().max_abs() < 1e-9);

        // Rσx, Pσy, σz: the mixed and Λ-Λ contributions cancel identically
        let a = OperatorField::from_fn(g.clone(), 2, |x| sx.scale_real(x[0]));
        let b = OperatorField::from_fn(g.clone(), 2, |x| sy.scale_real(x[1]));
        assert!(qc_jacobi_residual(&a, &b, &c3, &spec).unwrap().max_abs() < 1e-12);

        let b = OperatorField::from_fn(g.clone(), 2, |x| sz.scale_real(x[1]));
        let c = OperatorField::from_fn(g.clone(), 2, |x| sx.scale_real(x[0] * x[1]));
        let j = qc_jacobi_residual(&a, &b, &c, &spec).unwrap();
        // six of the twelve Λ-Λ terms give +σz, two give −σz, four vanish
        for k in 0..g.n_nodes() {
            assert!((&j.at(k) - &sz).max_abs() < 1e-10);
        }
    }

    #[test]
    fn twelve_term_matches_hbar_independent_part() {
        let g = grid(14);
        let (sx, sy, sz) = pauli::<f64>();
        let spec = qc(0.8);
        let a = OperatorField::from_fn(g.clone(), 2, |x| (&sx + &sz).scale_real(x[0] * x[0]));
        let b = OperatorField::from_fn(g.clone(), 2, |x| (&sz + &sy).scale_real(x[1]));
        let c = OperatorField::from_fn(g.clone(), 2, |x| sx.scale_real(x[0] * x[1] * x[1]));
        let rep = qc_jacobi_report(&a, &b, &c, &spec).unwrap();
        assert!(rep.twelve_term.max_abs() > 1e-2);
        assert!(rep.mismatch < 1e-9 * (1.0 + rep.twelve_term.max_abs()), "{}", rep.mismatch);
    }
}
