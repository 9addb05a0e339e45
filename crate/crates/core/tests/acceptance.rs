//! Acceptance checks. Each test prints one `PASS`/`FAIL` line and then asserts.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nhbrack::adiabatic::{AdiabaticSurface, Ladder, LinearVibronic};
use nhbrack::algebra::*;
use nhbrack::bracket::{compressibility, numeric_divergence, Coord, Layout, ScalarField, Symplectic};
use nhbrack::dynamics::*;
use nhbrack::ensemble::*;
use nhbrack::grid::{MatrixField, PhaseGrid};
use nhbrack::linalg::{pauli, CMat};
use nhbrack::qcle::*;
use nhbrack::stationary::*;

fn report(name: &str, pass: bool, detail: String, started: Instant) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("{tag} {name}: {detail} [{:.1} s]", started.elapsed().as_secs_f64());
    assert!(pass, "{name}: {detail}");
}

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMat<f64> {
    let data = (0..n * n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    CMat::from_vec(n, data)
}

fn naive_commutator(a: &CMat<f64>, b: &CMat<f64>) -> CMat<f64> {
    let n = a.dim();
    let mut out = CMat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut s = c(0.0, 0.0);
            for k in 0..n {
                s += a[(i, k)] * b[(k, j)] - b[(i, k)] * a[(k, j)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

fn algebra_axioms() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut form, mut lie) = (0.0f64, 0.0f64);
    for trial in 0..1000 {
        let n = 1 + trial % 5;
        let a = random_matrix(&mut rng, n);
        let b = random_matrix(&mut rng, n);
        let d = random_matrix(&mut rng, n);
        let (x, y) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let ab = commutator_matrix_form(&a, &b).unwrap();
        form = form.max((&ab - &naive_commutator(&a, &b)).max_abs());
        let ba = commutator_matrix_form(&b, &a).unwrap();
        lie = lie.max((&ab + &ba).max_abs());
        // bilinearity in the first slot
        let lin = &a.scale_real(x) + &d.scale_real(y);
        let lhs = commutator_matrix_form(&lin, &b).unwrap();
        let rhs = &ab.scale_real(x) + &commutator_matrix_form(&d, &b).unwrap().scale_real(y);
        lie = lie.max((&lhs - &rhs).max_abs());
        lie = lie.max(leibniz_defect(&a, &b, &d).unwrap().max_abs());
        lie = lie.max(commutator_jacobi(&a, &b, &d).unwrap().max_abs());
    }
    report(
        "algebra axioms",
        form <= 1e-14 && lie <= 1e-13 && t0.elapsed().as_secs_f64() < 10.0,
        format!("matrix form {form:.2e} (tol 1e-14), Lie/Jacobi {lie:.2e} (tol 1e-13)"),
        t0,
    );
}

fn jacobi_dichotomy() {
    let t0 = Instant::now();
    let g = Arc::new(
        PhaseGrid::builder(Layout::Nve, 1)
            .nodes(Coord::R(0), -1.0, 1.2, 16)
            .nodes(Coord::P(0), -0.9, 1.1, 16)
            .build()
            .unwrap(),
    );
    let spec = DMatrixSpec::quantum_classical(Arc::new(Symplectic { dof: 1 }), 0.6);
    let (sx, sy, sz) = pauli::<f64>();
    let k1 = OperatorField::constant(g.clone(), &sx);
    let k2 = OperatorField::constant(g.clone(), &sy);
    let k3 = OperatorField::constant(g.clone(), &sz);
    let constant = qc_jacobi_residual(&k1, &k2, &k3, &spec).unwrap().max_abs();
    let s1 = OperatorField::scalar(g.clone(), 2, |x| x[0] * x[0] + x[1]);
    let s2 = OperatorField::scalar(g.clone(), 2, |x| x[1] * x[1]);
    let s3 = OperatorField::scalar(g.clone(), 2, |x| x[0] * x[1]);
    let scalar = qc_jacobi_residual(&s1, &s2, &s3, &spec).unwrap().max_abs();
    let a = OperatorField::from_fn(g.clone(), 2, |x| sx.scale_real(x[0]));
    let b = OperatorField::from_fn(g.clone(), 2, |x| sz.scale_real(x[1]));
    let d = OperatorField::from_fn(g.clone(), 2, |x| sx.scale_real(x[0] * x[1]));
    let generic = qc_jacobi_residual(&a, &b, &d, &spec).unwrap().max_abs();
    let floor = constant.max(scalar).max(1e-14);
    report(
        "quantum-classical Jacobi dichotomy",
        constant <= 1e-8 && scalar <= 1e-8 && generic >= 10.0 * floor && t0.elapsed().as_secs_f64() < 30.0,
        format!("constant {constant:.2e}, scalar {scalar:.2e} (tol 1e-8), generic {generic:.3} = {:.1e} x floor", generic / floor),
        t0,
    );
}

fn reference_potential() -> Arc<dyn Potential<f64>> {
    let model = LinearVibronic { a: 0.5, delta: 0.5, k: 1.0 };
    Arc::new(AdiabaticSurface::new(Box::new(model), 0).unwrap())
}

fn generalized_energy_conservation() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (kind, x0) in [
        (Layout::Nose, vec![1.0, 0.4, 0.5, -0.3]),
        (Layout::Nhc2, vec![1.0, 0.4, -0.2, 0.5, -0.3, 0.6]),
        (Layout::Npt, vec![1.0, 0.4, 5.0, 0.5, -0.3, 0.2]),
    ] {
        let mut spec = EnsembleSpec::new(kind, 1);
        // a heavy barostat keeps V clear of the 1/3V coupling singularity
        spec.p_ext = 0.1;
        spec.m_v = 1000.0;
        let h = ExtendedHamiltonian::new(spec.clone(), reference_potential());
        let s = make_structure(&spec);
        let started = Instant::now();
        let rec = integrate_strided(s.as_ref(), &h, &x0, 1e-3, 100_000, 100, None).unwrap();
        let drift = rec.relative_energy_drift();
        worst = worst.max(drift);
        parts.push(format!("{kind:?} {drift:.2e} ({:.1} s)", started.elapsed().as_secs_f64()));
        assert!(started.elapsed().as_secs_f64() < 60.0);
    }
    report(
        "generalized energy conservation",
        worst <= 1e-8,
        format!("{} (tol 1e-8, 1e5 RK4 steps at dt 1e-3)", parts.join(", ")),
        t0,
    );
}

fn compressibility_closed_forms() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut analytic, mut fd) = (0.0f64, 0.0f64);
    for kind in [Layout::Nose, Layout::Nhc2, Layout::Npt] {
        for dof in [1usize, 3] {
            let mut spec = EnsembleSpec::new(kind, dof);
            spec.m_eta = 1.7;
            spec.m_eta2 = 0.6;
            let h = ExtendedHamiltonian::new(spec.clone(), Arc::new(Anharmonic { k: 1.0, quartic: 0.3 }));
            let s = make_structure(&spec);
            for _ in 0..100 {
                let mut x: Vec<f64> = (0..spec.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
                if let Some(iv) = spec.index(Coord::V) {
                    x[iv] = rng.gen_range(0.5..3.0);
                }
                let closed = spec.compressibility_closed_form(&x);
                let k = compressibility(s.as_ref(), &h, &x).unwrap();
                let g = h.gradient(&x);
                let k_fd: f64 = numeric_divergence(s.as_ref(), &x, 1e-5).iter().zip(&g).map(|(d, gj)| d * gj).sum();
                analytic = analytic.max((k - closed).abs());
                fd = fd.max((k_fd - closed).abs());
            }
        }
    }
    report(
        "compressibility closed forms",
        analytic <= 1e-10 && fd <= 1e-6 && t0.elapsed().as_secs_f64() < 5.0,
        format!("divergence vs closed form {analytic:.2e} (tol 1e-10), finite differences {fd:.2e} (tol 1e-6)"),
        t0,
    );
}

fn canonical_sampling() {
    let t0 = Instant::now();
    let mut slopes = Vec::new();
    let mut ks = Vec::new();
    for g in [1.0f64, 2.0] {
        let spec = EnsembleSpec::new(Layout::Nhc2, 1).with_g(g);
        let h = ExtendedHamiltonian::new(spec.clone(), Arc::new(Anharmonic::harmonic(1.0)));
        let bins = SamplingBins::for_spec(&spec, 5.0, 80);
        let starts: Vec<Vec<f64>> = (0..8).map(|i| vec![1.0 + 0.1 * i as f64, 0.0, 0.0, 0.0, 0.5, 0.0]).collect();
        let total = 10_000_000;
        let s = sample_canonical_many(&h, &starts, 0.02, total / starts.len(), 10_000, bins).unwrap();
        let sigma = (spec.mass * spec.kt() * g).sqrt();
        ks.push(ks_distance_gaussian(&s.p_hist, sigma));
        let (b, _) = fit_log_density_slope(&s.p_hist, |p| p * p / (2.0 * spec.mass), 200).unwrap();
        slopes.push(b);
    }
    let beta = 1.0;
    let rel = (slopes[1] - beta / 2.0).abs() / (beta / 2.0);
    report(
        "canonical sampling with g = N",
        ks[0] < 0.02 && rel <= 0.05 && t0.elapsed().as_secs_f64() < 300.0,
        format!(
            "KS {:.2e} (tol 0.02); g = 2N slope {:.4} vs beta/2 = 0.5, rel {:.2e} (tol 0.05)",
            ks[0], slopes[1], rel
        ),
        t0,
    );
}

fn propagator_sanity() {
    let t0 = Instant::now();
    // rigid rotation on a single harmonic surface, M = k = 1
    let g = Arc::new(
        PhaseGrid::builder(Layout::Nve, 1)
            .nodes(Coord::R(0), -5.0, 5.0, 64)
            .nodes(Coord::P(0), -5.0, 5.0, 64)
            .build()
            .unwrap(),
    );
    let surface = Ladder { n: 1, a: 0.0, delta: 0.0, spacing: 0.0, k: 1.0 };
    let spec = EnsembleSpec::new(Layout::Nve, 1);
    let op = build_liouvillian(frames_on_grid(&surface, &g).unwrap(), &spec, g.clone(), LiouvillianOptions::new(Side::Density, 1.0)).unwrap();
    let sigma = 0.8;
    let mut rho0 = MatrixField::scalar(g.clone(), 1, |x: &[f64]| (-((x[0] - 1.0).powi(2) + x[1] * x[1]) / (2.0 * sigma * sigma)).exp());
    normalize(&mut rho0).unwrap();
    let period = 2.0 * PI;
    let steps = (period / (0.9 * op.max_stable_dt())).ceil() as usize;
    let out = propagate(&op, &rho0, period / steps as f64, steps, 1000).unwrap();
    let l2 = out.field.sub(&rho0).unwrap().norm() / rho0.norm();
    let trace = out.diagnostics.iter().map(|d| (d.trace - 1.0).abs()).fold(0.0, f64::max);
    let herm_rot = out.diagnostics.iter().map(|d| d.herm_drift).fold(0.0, f64::max);

    // frozen nuclei: pure phase rotation of the coherence
    let g2 = Arc::new(
        PhaseGrid::builder(Layout::Nve, 1)
            .nodes(Coord::R(0), -2.0, 2.0, 12)
            .nodes(Coord::P(0), -2.0, 2.0, 12)
            .build()
            .unwrap(),
    );
    let m = LinearVibronic { a: 1.0, delta: 0.5, k: 1.0 };
    let mut opts = LiouvillianOptions::new(Side::Density, 1.0);
    opts.frozen_nuclei = true;
    let op2 = build_liouvillian(frames_on_grid(&m, &g2).unwrap(), &spec, g2.clone(), opts).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let rho = product_density(g2.clone(), &[c(s, 0.0), c(s, 0.0)], |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
    let dt = 0.01 / op2.max_omega();
    let nsteps = 2000;
    let out2 = propagate(&op2, &rho, dt, nsteps, 1000).unwrap();
    let t = dt * nsteps as f64;
    let mut phase_err = 0.0f64;
    for k in 0..g2.n_nodes() {
        let fr = op2.frame_at(k);
        let w = fr.energies[0] - fr.energies[1];
        let expect = rho.get(k, 0, 1) * c(0.0, -w * t).exp();
        phase_err = phase_err.max((out2.field.get(k, 0, 1) - expect).norm());
        phase_err = phase_err.max((out2.field.get(k, 0, 1).norm() - rho.get(k, 0, 1).norm()).abs());
    }
    let herm_frozen = out2.diagnostics.iter().map(|d| d.herm_drift).fold(0.0, f64::max);
    // growth per 1e3 steps
    let herm = herm_rot.max(herm_frozen) * 1000.0 / steps.min(nsteps) as f64;
    report(
        "propagator sanity",
        l2 <= 0.02 && phase_err <= 1e-8 && trace <= 1e-4 && herm <= 1e-8 && t0.elapsed().as_secs_f64() < 120.0,
        format!(
            "rotation L2 {l2:.3e} (tol 0.02, {steps} steps), frozen phase {phase_err:.2e} (tol 1e-8), trace {trace:.2e} (tol 1e-4), Hermiticity {herm:.2e} per 1e3 steps (tol 1e-8)"
        ),
        t0,
    );
}

fn nhc_grid(n: usize, l: f64, nt: usize, lt: f64) -> Arc<PhaseGrid<f64>> {
    Arc::new(
        PhaseGrid::builder(Layout::Nhc2, 1)
            .nodes(Coord::R(0), -l, l, n)
            .exponential(Coord::Eta(0), 0.0, 0.0)
            .exponential(Coord::Eta(1), 0.0, 0.0)
            .nodes(Coord::P(0), -l, l, n)
            .nodes(Coord::PEta(0), -lt, lt, nt)
            .nodes(Coord::PEta(1), -lt, lt, nt)
            .build()
            .unwrap(),
    )
}

fn stationarity() {
    let t0 = Instant::now();
    let g = nhc_grid(24, 7.0, 24, 7.0);
    let spec = StationarySpec::new(EnsembleSpec::new(Layout::Nhc2, 1), Rho0Form::Exponential);
    let flat = LinearVibronic { a: 0.0, delta: 0.5, k: 1.0 };
    let frames = frames_on_grid(&flat, &g).unwrap();
    let op = build_liouvillian(frames.clone(), &spec.ensemble, g.clone(), LiouvillianOptions::new(Side::Density, 1.0).spectral()).unwrap();
    let rho = stationary_rho0(&spec, &frames, g.clone()).unwrap();
    let floor = stationarity_residual(&rho, &op).unwrap();

    let coupled = LinearVibronic { a: 0.5, delta: 0.5, k: 1.0 };
    let frames = frames_on_grid(&coupled, &g).unwrap();
    let rho0 = stationary_rho0(&spec, &frames, g.clone()).unwrap();
    let rho1 = stationary_rho1(&rho0, &frames, &spec.ensemble).unwrap();
    let mut ratios = Vec::new();
    for hbar in [0.4, 0.2, 0.1] {
        let op = build_liouvillian(frames.clone(), &spec.ensemble, g.clone(), LiouvillianOptions::new(Side::Density, hbar).spectral()).unwrap();
        let r0 = stationarity_residual(&rho0, &op).unwrap();
        let r1 = stationarity_residual(&combine(&rho0, &rho1, hbar).unwrap(), &op).unwrap();
        ratios.push(r0 / r1);
    }
    let monotone = ratios[0] < ratios[1] && ratios[1] < ratios[2];
    report(
        "stationary density and order-hbar correction",
        floor <= 1e-4 && ratios[1] >= 1.4 && monotone && t0.elapsed().as_secs_f64() < 300.0,
        format!(
            "uncoupled residual {floor:.2e} (tol 1e-4); improvement at hbar 0.4/0.2/0.1: {:.2}/{:.2}/{:.2} (need >= 1.4 at 0.2, increasing)",
            ratios[0], ratios[1], ratios[2]
        ),
        t0,
    );
}

fn fredholm_parity() {
    let t0 = Instant::now();
    let g = nhc_grid(16, 6.0, 12, 5.0);
    let spec = StationarySpec::new(EnsembleSpec::new(Layout::Nhc2, 1), Rho0Form::Exponential);
    let m = LinearVibronic { a: 0.5, delta: 0.5, k: 1.0 };
    let frames = frames_on_grid(&m, &g).unwrap();
    let op = build_liouvillian(frames.clone(), &spec.ensemble, g.clone(), LiouvillianOptions::new(Side::Density, 1.0)).unwrap();
    assert!(g.is_symmetric(Coord::P(0)));
    let powers = [0, 1, 2];
    let rho0 = stationary_rho0(&spec, &frames, g.clone()).unwrap();
    let rho1 = stationary_rho1(&rho0, &frames, &spec.ensemble).unwrap();
    let order1 = fredholm_check(&rho1, &op, &powers).unwrap();
    let gauss = |x: &[f64]| (-(x[0] * x[0] + x[3] * x[3] + x[4] * x[4] + x[5] * x[5]) / 2.0).exp();
    let even = offdiagonal_test_density(g.clone(), 2, |x| gauss(x) * (1.0 + x[3] * x[3]));
    let even_v = fredholm_check(&even, &op, &powers).unwrap();
    let odd = offdiagonal_test_density(g.clone(), 2, |x| gauss(x) * x[3]);
    let control = fredholm_check(&odd, &op, &powers).unwrap();
    report(
        "Fredholm orthogonality and parity control",
        order1 <= 1e-8 && even_v <= 1e-8 && control > 1e-3 && t0.elapsed().as_secs_f64() < 30.0,
        format!("order-hbar density {order1:.2e}, P-even density {even_v:.2e} (tol 1e-8), P-odd control {control:.3e} (nonzero)"),
        t0,
    );
}

fn nose_marginalization() {
    let t0 = Instant::now();
    let m = LinearVibronic { a: 0.5, delta: 0.5, k: 1.0 };
    let mut parts = Vec::new();
    let mut pass = true;
    for g_over_n in [1.0f64, 2.0] {
        let ens = EnsembleSpec::new(Layout::Nose, 1).with_g(g_over_n);
        let mut spec = StationarySpec::new(ens.clone(), Rho0Form::NoseShell);
        spec.sigma_e = 0.2;
        let gkt = g_over_n * ens.kt();
        let sig_eta = spec.sigma_e / gkt;
        // the shell sits at eta* = (C - H_T - p_eta^2/2m)/gkT
        let lo = (spec.shell - 10.0) / gkt - 8.0 * sig_eta;
        let hi = (spec.shell + 1.0) / gkt + 8.0 * sig_eta;
        let ne = ((hi - lo) / (sig_eta / 1.5)).ceil() as usize + 1;
        let g = Arc::new(
            PhaseGrid::builder(Layout::Nose, 1)
                .nodes(Coord::R(0), -2.0, 2.0, 8)
                .nodes(Coord::Eta(0), lo, hi, ne)
                .nodes(Coord::P(0), -2.0, 2.0, 8)
                .nodes(Coord::PEta(0), -2.0, 2.0, 8)
                .build()
                .unwrap(),
        );
        let frames = frames_on_grid(&m, &g).unwrap();
        let rho = stationary_rho0(&spec, &frames, g.clone()).unwrap();
        let marg = marginalize_nose(&rho).unwrap();
        let (slope, res) = fit_marginal(&marg, &frames, &ens).unwrap();
        let want = -ens.beta() * (ens.dof as f64 / ens.g);
        pass &= (slope - want).abs() <= 1e-6 && res <= 1e-6;
        parts.push(format!("g/N = {g_over_n}: slope {slope:.9} vs {want}, residual {res:.2e}"));
    }
    report(
        "Nose marginalization",
        pass && t0.elapsed().as_secs_f64() < 30.0,
        format!("{} (tol 1e-6)", parts.join("; ")),
        t0,
    );
}

fn recursion_consistency() {
    let t0 = Instant::now();
    let g = Arc::new(
        PhaseGrid::builder(Layout::Nhc2, 1)
            .nodes(Coord::R(0), -3.0, 3.0, 8)
            .exponential(Coord::Eta(0), 0.0, 0.0)
            .exponential(Coord::Eta(1), 0.0, 0.0)
            .nodes(Coord::P(0), -8.0, 8.0, 64)
            .nodes(Coord::PEta(0), -2.0, 2.0, 8)
            .nodes(Coord::PEta(1), -2.0, 2.0, 8)
            .build()
            .unwrap(),
    );
    let spec = StationarySpec::new(EnsembleSpec::new(Layout::Nhc2, 1), Rho0Form::Exponential);
    let m = LinearVibronic { a: 0.5, delta: 0.5, k: 1.0 };
    let frames = frames_on_grid(&m, &g).unwrap();
    let op = build_liouvillian(frames.clone(), &spec.ensemble, g.clone(), LiouvillianOptions::new(Side::Density, 1.0).spectral()).unwrap();
    let rho0 = stationary_rho0(&spec, &frames, g.clone()).unwrap();
    let closed = stationary_rho1(&rho0, &frames, &spec.ensemble).unwrap();
    let formal = formal_rho1(&rho0, &op).unwrap();
    let diff = closed.sub(&formal).unwrap().max_abs();
    let rel = diff / closed.max_abs();
    report(
        "order-hbar recursion consistency",
        diff <= 1e-8 && rel <= 1e-8 && t0.elapsed().as_secs_f64() < 60.0,
        format!("node-wise max difference {diff:.2e}, relative to max |rho1| {rel:.2e} (tol 1e-8)"),
        t0,
    );
}

type Criterion = (&'static str, fn());

const CRITERIA: [Criterion; 10] = [
    ("algebra_axioms", algebra_axioms),
    ("jacobi_dichotomy", jacobi_dichotomy),
    ("generalized_energy_conservation", generalized_energy_conservation),
    ("compressibility_closed_forms", compressibility_closed_forms),
    ("canonical_sampling", canonical_sampling),
    ("propagator_sanity", propagator_sanity),
    ("stationarity", stationarity),
    ("fredholm_parity", fredholm_parity),
    ("nose_marginalization", nose_marginalization),
    ("recursion_consistency", recursion_consistency),
];

// Custom harness so the PASS/FAIL lines are never captured. Positional
// arguments filter by substring; libtest flags are ignored.
fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<Criterion> = CRITERIA
        .into_iter()
        .filter(|(name, _)| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str())))
        .collect();
    // one at a time: the runtime budgets assume the machine is not shared
    let failed: Vec<&str> = selected
        .iter()
        .filter_map(|&(name, f)| std::panic::catch_unwind(f).is_err().then_some(name))
        .collect();
    println!("acceptance: {} of {} criteria passed", selected.len() - failed.len(), selected.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
