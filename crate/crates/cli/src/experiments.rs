//! The six experiments. Each returns its checks; artifacts go to the output directory.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use nhbrack::adiabatic::{AdiabaticFrame, AdiabaticSurface, Ladder, LinearVibronic, QuantumModel, SpinBoson};
use nhbrack::algebra::{
    commutator_jacobi, commutator_matrix_form, leibniz_defect, qc_jacobi_report, qc_jacobi_residual,
    DMatrixSpec, OperatorField,
};
use nhbrack::bracket::{
    compressibility, eom_rhs, jacobi_residual_classical, numeric_divergence, Coord, CoordinateField, Layout,
    ScalarField, Symplectic,
};
use nhbrack::dynamics::{
    coord_names, fit_log_density_slope, integrate_strided, ks_distance_gaussian, sample_canonical_many,
    SamplingBins,
};
use nhbrack::ensemble::{make_structure, Anharmonic, EnsembleSpec, ExtendedHamiltonian, Potential};
use nhbrack::grid::{MatrixField, PhaseGrid};
use nhbrack::linalg::{pauli, CMat};
use nhbrack::qcle::{
    build_liouvillian, frames_on_grid, normalize, product_density, propagate, write_snapshot, LiouvillianOptions,
    Side,
};
use nhbrack::stationary::{
    combine, density_rates, fit_marginal, fredholm_check, marginalize_nose, offdiagonal_test_density,
    select_weight_sign, stationarity_residual, stationary_rho0, stationary_rho1, Rho0Form, SigmaPoint,
    StationaryReport, StationarySpec, WeightSign,
};

use crate::config::{AxisConfig, ModelConfig, RunConfig};
use crate::report::{Artifacts, Check, Failure, RunResult};

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn quantum_model(m: &ModelConfig) -> RunResult<Box<dyn QuantumModel<f64>>> {
    Ok(match *m {
        ModelConfig::Harmonic { k, quartic } => {
            if quartic != 0.0 {
                return Err(config_err("at `model.quartic`: grid experiments need a harmonic or quantum model"));
            }
            Box::new(Ladder { n: 1, a: 0.0, delta: 0.0, spacing: 0.0, k })
        }
        ModelConfig::LinearVibronic { a, delta, k } => Box::new(LinearVibronic { a, delta, k }),
        ModelConfig::SpinBoson { coupling, bias, delta, k } => Box::new(SpinBoson { coupling, bias, delta, k }),
        ModelConfig::Ladder { n, a, delta, spacing, k } => {
            if n == 0 {
                return Err(config_err("at `model.n`: must be at least 1"));
            }
            Box::new(Ladder { n, a, delta, spacing, k })
        }
    })
}

fn classical_potential(cfg: &RunConfig) -> RunResult<Arc<dyn Potential<f64>>> {
    match cfg.model {
        ModelConfig::Harmonic { k, quartic } => Ok(Arc::new(Anharmonic { k, quartic })),
        _ => {
            if cfg.ensemble.dof != 1 {
                return Err(config_err("at `ensemble.dof`: adiabatic surfaces have one classical coordinate"));
            }
            let surface = AdiabaticSurface::new(quantum_model(&cfg.model)?, cfg.classical.surface)
                .map_err(|e| config_err(format!("at `classical.surface`: {e}")))?;
            Ok(Arc::new(surface))
        }
    }
}

fn spec_checked(spec: EnsembleSpec<f64>) -> RunResult<EnsembleSpec<f64>> {
    spec.validate().map_err(|e| config_err(format!("at `ensemble`: {e}")))?;
    Ok(spec)
}

/// Seeded starting point: physical coordinates near 1, momenta and thermostat
/// variables small, volume well away from zero.
fn seeded_start(spec: &EnsembleSpec<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    spec.kind
        .coords(spec.dof)
        .into_iter()
        .map(|c| match c {
            Coord::R(_) => rng.gen_range(0.5..1.5),
            Coord::P(_) => rng.gen_range(-0.5..0.5),
            Coord::Eta(_) => 0.0,
            Coord::PEta(_) => rng.gen_range(-0.5..0.5),
            Coord::V => 5.0 + rng.gen_range(0.0..1.0),
            Coord::PV => rng.gen_range(-0.1..0.1),
        })
        .collect()
}

#[derive(Serialize)]
struct ClassicalSummary {
    ensemble: Layout,
    steps: usize,
    dt: f64,
    initial: Vec<f64>,
    final_state: Vec<f64>,
    relative_energy_drift: f64,
}

pub fn classical_run(cfg: &RunConfig, out: &Artifacts) -> RunResult<Vec<Check>> {
    let spec = spec_checked(cfg.ensemble.spec())?;
    let h = ExtendedHamiltonian::new(spec.clone(), classical_potential(cfg)?);
    let s = make_structure(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0 = match &cfg.classical.initial {
        Some(x) if x.len() != spec.dim() => {
            return Err(config_err(format!(
                "at `classical.initial`: expected {} coordinates ({}), got {}",
                spec.dim(),
                coord_names(spec.kind, spec.dof).join(","),
                x.len()
            )))
        }
        Some(x) => x.clone(),
        None => seeded_start(&spec, &mut rng),
    };
    let c = &cfg.classical;
    let rec = integrate_strided(s.as_ref(), &h, &x0, c.dt, c.steps, c.stride, Some(coord_names(spec.kind, spec.dof)))?;
    out.write_with("trajectory.csv", |w| rec.write_csv(w))?;
    out.csv("energy.csv", &["t", "H"], rec.times.iter().zip(&rec.energy).map(|(t, e)| vec![*t, *e]))?;
    let drift = rec.relative_energy_drift();
    let mut checks = vec![Check::new(
        "generalized energy conservation",
        drift <= c.energy_tol,
        format!("relative drift {drift:.3e} (tol {:.1e})", c.energy_tol),
    )];
    if spec.kind == Layout::Nose {
        let ie = spec.index(Coord::Eta(0)).unwrap();
        let n = spec.dof as f64;
        let lock = rec
            .states
            .iter()
            .zip(&rec.weight)
            .map(|(x, w)| (w + n * (x[ie] - x0[ie])).abs() / (1.0 + w.abs()))
            .fold(0.0, f64::max);
        checks.push(Check::new(
            "weight follows thermostat coordinate",
            lock <= 1e-6,
            format!("max |w + N(eta - eta0)| / (1 + |w|) = {lock:.2e} (tol 1e-6)"),
        ));
    }
    out.json(
        "summary.json",
        &ClassicalSummary {
            ensemble: spec.kind,
            steps: c.steps,
            dt: c.dt,
            initial: x0,
            final_state: rec.states.last().cloned().unwrap_or_default(),
            relative_energy_drift: drift,
        },
    )?;
    Ok(checks)
}

#[derive(Serialize)]
struct SamplingSummary {
    samples: u64,
    ks_distance: f64,
    fitted_beta: f64,
    expected_beta: f64,
    mean_p2_over_m: f64,
    warnings: Vec<String>,
}

pub fn sample_canonical(cfg: &RunConfig, out: &Artifacts) -> RunResult<Vec<Check>> {
    let spec = spec_checked(cfg.ensemble.spec())?;
    if !matches!(spec.kind, Layout::Nose | Layout::Nhc2) {
        return Err(config_err("at `ensemble.kind`: sampling needs `nose` or `nhc2`"));
    }
    let h = ExtendedHamiltonian::new(spec.clone(), classical_potential(cfg)?);
    let sc = &cfg.sampling;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<Vec<f64>> = (0..sc.trajectories).map(|_| seeded_start(&spec, &mut rng)).collect();
    let bins = SamplingBins::for_spec(&spec, sc.span, sc.bins);
    let sample = sample_canonical_many(&h, &starts, sc.dt, sc.steps, sc.burn_in, bins)?;
    for w in &sample.warnings {
        eprintln!("warning: {w}");
    }
    if sample.samples == 0 {
        return Err(Failure::Numerical(format!(
            "insufficient samples: {} steps with {} burn-in steps record nothing",
            sc.steps, sc.burn_in
        )));
    }
    let m = spec.mass;
    let kt = spec.kt();
    let n_over_g = spec.dof as f64 / spec.g;
    let canonical = |p: f64| (-p * p / (2.0 * m * kt)).exp() / (2.0 * PI * m * kt).sqrt();
    let dens = sample.p_hist.density();
    out.csv(
        "p_marginal.csv",
        &["p", "density", "canonical_reference"],
        sample.p_hist.centers().into_iter().zip(dens).map(|(p, d)| vec![p, d, canonical(p)]),
    )?;
    let sigma = (m * kt / n_over_g).sqrt();
    let ks = ks_distance_gaussian(&sample.p_hist, sigma);
    let expected = n_over_g / kt;
    let fitted = fit_log_density_slope(&sample.p_hist, |p| p * p / (2.0 * m), sc.min_count)
        .map(|f| f.0)
        .ok_or_else(|| Failure::Numerical("insufficient samples: too few populated bins for the slope fit".into()))?;
    let rel = (fitted - expected).abs() / expected;
    out.json(
        "summary.json",
        &SamplingSummary {
            samples: sample.samples,
            ks_distance: ks,
            fitted_beta: fitted,
            expected_beta: expected,
            mean_p2_over_m: sample.mean_p2_over_m,
            warnings: sample.warnings.clone(),
        },
    )?;
    Ok(vec![
        Check::new(
            "momentum marginal",
            ks < sc.ks_tol,
            format!("KS distance {ks:.3e} against exp[-beta(N/g)P^2/2M] (tol {})", sc.ks_tol),
        ),
        Check::new(
            "inverse-temperature slope",
            rel <= sc.slope_tol,
            format!("fitted {fitted:.4} vs beta N/g = {expected:.4}, rel {rel:.2e} (tol {})", sc.slope_tol),
        ),
    ])
}

fn axis(b: nhbrack::grid::GridBuilder<f64>, c: Coord, a: &AxisConfig) -> nhbrack::grid::GridBuilder<f64> {
    b.nodes(c, a.min, a.max, a.n)
}

fn qcle_grid(cfg: &RunConfig, spec: &EnsembleSpec<f64>) -> RunResult<Arc<PhaseGrid<f64>>> {
    let g = &cfg.qcle.grid;
    let rates = density_rates(spec, WeightSign::Minus);
    let rate = |c: Coord| rates.iter().find(|r| r.0 == c).map(|r| r.1).unwrap_or(0.0);
    let mut b = PhaseGrid::builder(spec.kind, 1);
    b = axis(b, Coord::R(0), &g.r);
    b = axis(b, Coord::P(0), &g.p);
    for c in spec.kind.coords(1) {
        b = match c {
            Coord::Eta(_) => b.exponential(c, 0.0, rate(c)),
            Coord::PEta(_) => axis(b, c, &g.p_eta),
            Coord::V => axis(b, c, g.volume.as_ref().ok_or_else(|| config_err("at `qcle.grid.volume`: required at constant pressure"))?),
            Coord::PV => axis(b, c, g.p_volume.as_ref().ok_or_else(|| config_err("at `qcle.grid.p_volume`: required at constant pressure"))?),
            _ => b,
        };
    }
    Ok(Arc::new(b.build().map_err(|e| config_err(format!("at `qcle.grid`: {e}")))?))
}

#[derive(Serialize)]
struct QcleSummary {
    steps: usize,
    dt: f64,
    nodes: usize,
    populations: Vec<f64>,
    trace_drift: f64,
    hermiticity_growth_per_1000_steps: f64,
}

pub fn qcle_run(cfg: &RunConfig, out: &Artifacts) -> RunResult<Vec<Check>> {
    let q = &cfg.qcle;
    let spec = spec_checked(cfg.ensemble.spec_as(q.kind))?;
    if spec.dof != 1 {
        return Err(config_err("at `ensemble.dof`: the grid propagator handles one classical coordinate"));
    }
    let model = quantum_model(&cfg.model)?;
    let grid = qcle_grid(cfg, &spec)?;
    let frames = frames_on_grid(model.as_ref(), &grid)?;
    let mut opts = LiouvillianOptions::new(Side::Density, q.hbar);
    opts.scheme = q.scheme;
    opts.jump_scheme = q.jump_scheme;
    opts.frozen_nuclei = q.frozen_nuclei;
    let op = build_liouvillian(frames, &spec, grid.clone(), opts)?;

    let n = model.n();
    if q.amplitudes.len() != n {
        return Err(config_err(format!("at `qcle.amplitudes`: model has {n} states")));
    }
    let norm = q.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(config_err("at `qcle.amplitudes`: all zero"));
    }
    let state: Vec<Complex<f64>> = q.amplitudes.iter().map(|a| Complex::new(a / norm, 0.0)).collect();
    let kt = spec.kt();
    let idx = |c: Coord| spec.index(c);
    let (ir, ip) = (idx(Coord::R(0)).unwrap(), idx(Coord::P(0)).unwrap());
    let v_mid = q.grid.volume.map(|v| (0.5 * (v.min + v.max), (v.max - v.min) / 8.0));
    let profile = |x: &[f64]| {
        let mut e = ((x[ir] - q.r0).powi(2) + (x[ip] - q.p0).powi(2)) / (2.0 * q.sigma * q.sigma);
        for (c, m) in [(Coord::PEta(0), spec.m_eta), (Coord::PEta(1), spec.m_eta2), (Coord::PV, spec.m_v)] {
            if let Some(i) = idx(c) {
                e += x[i] * x[i] / (2.0 * m * kt);
            }
        }
        if let (Some(i), Some((mid, w))) = (idx(Coord::V), v_mid) {
            e += (x[i] - mid).powi(2) / (2.0 * w * w);
        }
        (-e).exp()
    };
    let mut rho = product_density(grid.clone(), &state, profile);
    normalize(&mut rho)?;

    let dt_guess = q.dt.unwrap_or(0.9 * op.max_stable_dt());
    let steps = if q.time == 0.0 { 0 } else { (q.time / dt_guess).ceil() as usize };
    let dt = if steps == 0 { dt_guess } else { q.time / steps as f64 };
    let run = propagate(&op, &rho, dt, steps, q.diag_stride)?;
    out.write_with("diagnostics.csv", |w| run.write_diagnostics(w))?;
    out.write_with("snapshot.csv", |w| write_snapshot(&run.field, &[], w))?;
    let t0 = run.diagnostics[0].trace;
    let trace = run.diagnostics.iter().map(|d| (d.trace - t0).abs()).fold(0.0, f64::max);
    let herm = run.diagnostics.iter().map(|d| d.herm_drift).fold(0.0, f64::max) * 1000.0 / steps.max(1000) as f64;
    out.json(
        "summary.json",
        &QcleSummary {
            steps,
            dt,
            nodes: grid.n_nodes(),
            populations: nhbrack::qcle::populations(&run.field),
            trace_drift: trace,
            hermiticity_growth_per_1000_steps: herm,
        },
    )?;
    Ok(vec![
        Check::new("trace conservation", trace <= q.trace_tol, format!("max |Tr rho(t) - Tr rho(0)| = {trace:.3e} (tol {:.1e})", q.trace_tol)),
        Check::new("Hermiticity preservation", herm <= q.herm_tol, format!("{herm:.3e} per 1e3 steps (tol {:.1e})", q.herm_tol)),
    ])
}

#[derive(Serialize)]
struct StationarySummary {
    weight_sign: WeightSign,
    residual_minus: f64,
    residual_plus: f64,
    parity_control: f64,
    expected_marginal_slope: f64,
}

fn energy_bounds(frames: &[AdiabaticFrame<f64>], pmax: f64, mass: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for f in frames {
        for &e in &f.energies {
            lo = lo.min(e);
            hi = hi.max(e + pmax * pmax / (2.0 * mass));
        }
    }
    (lo, hi)
}

pub fn stationary_check(cfg: &RunConfig, out: &Artifacts) -> RunResult<Vec<Check>> {
    let sc = &cfg.stationary;
    if cfg.ensemble.dof != 1 {
        return Err(config_err("at `ensemble.dof`: the stationary analysis has one classical coordinate"));
    }
    let model = quantum_model(&cfg.model)?;
    let nhc = spec_checked(cfg.ensemble.spec_as(Layout::Nhc2))?;
    let nose = spec_checked(cfg.ensemble.spec_as(Layout::Nose))?;
    let (l, n, lt, nt) = (sc.extent, sc.nodes, sc.thermostat_extent, sc.thermostat_nodes);
    let base = PhaseGrid::builder(Layout::Nhc2, 1)
        .nodes(Coord::R(0), -l, l, n)
        .exponential(Coord::Eta(0), 0.0, 0.0)
        .exponential(Coord::Eta(1), 0.0, 0.0)
        .nodes(Coord::P(0), -l, l, n)
        .nodes(Coord::PEta(0), -lt, lt, nt)
        .nodes(Coord::PEta(1), -lt, lt, nt)
        .build()
        .map_err(|e| config_err(format!("at `stationary`: {e}")))?;
    let opts = LiouvillianOptions::new(Side::Density, sc.hbar).spectral();
    let mut spec = StationarySpec::new(nhc.clone(), Rho0Form::Exponential);
    spec.hbar = sc.hbar;
    let selection = select_weight_sign(&spec, model.as_ref(), &base, opts)?;
    spec.weight_sign = selection.sign;
    let grid = Arc::new(base.with_rates(&density_rates(&nhc, selection.sign)));
    let frames = frames_on_grid(model.as_ref(), &grid)?;
    let op = build_liouvillian(frames.clone(), &nhc, grid.clone(), opts)?;
    let rho0 = stationary_rho0(&spec, &frames, grid.clone())?;
    let rho1 = stationary_rho1(&rho0, &frames, &nhc)?;
    let order0 = stationarity_residual(&rho0, &op)?;
    let order1 = stationarity_residual(&combine(&rho0, &rho1, sc.hbar)?, &op)?;
    let coupled = frames.iter().any(|f| f.coupling.max_abs() > 1e-12);
    let fredholm = fredholm_check(&rho1, &op, &[0, 1, 2])?;
    let ip = grid.index_of(Coord::P(0)).unwrap();
    let odd = offdiagonal_test_density(grid.clone(), model.n(), |x| x[ip] * (-(x[0] * x[0] + x[ip] * x[ip]) / 2.0).exp());
    let control = if model.n() > 1 { fredholm_check(&odd, &op, &[0, 1, 2])? } else { 0.0 };

    // delta form on the Nosé layout, integrated over (eta, p_eta)
    let mut series = Vec::new();
    let mut marginal = (0.0, 0.0);
    let want = -nose.beta() * nose.dof as f64 / nose.g;
    let gkt = nose.g * nose.kt();
    let (lrp, lpe) = (4.0, 2.0);
    let probe = PhaseGrid::builder(Layout::Nve, 1)
        .nodes(Coord::R(0), -lrp, lrp, 12)
        .nodes(Coord::P(0), -lrp, lrp, 12)
        .build()?;
    let (e_lo, e_hi) = energy_bounds(&frames_on_grid(model.as_ref(), &probe)?, lrp, nose.mass);
    let mut sigmas = sc.sigma_e.clone();
    sigmas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for &sigma in &sigmas {
        let mut dspec = StationarySpec::new(nose.clone(), Rho0Form::NoseShell);
        dspec.shell = sc.shell;
        dspec.sigma_e = sigma;
        dspec.weight_sign = selection.sign;
        let sig_eta = sigma / gkt;
        let lo = (sc.shell - e_hi - lpe * lpe / (2.0 * nose.m_eta)) / gkt - 8.0 * sig_eta;
        let hi = (sc.shell - e_lo) / gkt + 8.0 * sig_eta;
        let ne = ((hi - lo) / (sig_eta / 1.5)).ceil() as usize + 1;
        if ne > 20_000 {
            return Err(config_err(format!("at `stationary.sigma_e`: width {sigma} needs {ne} eta nodes")));
        }
        let g = Arc::new(
            PhaseGrid::builder(Layout::Nose, 1)
                .nodes(Coord::R(0), -lrp, lrp, 12)
                .nodes(Coord::Eta(0), lo, hi, ne)
                .nodes(Coord::P(0), -lrp, lrp, 12)
                .nodes(Coord::PEta(0), -lpe, lpe, 8)
                .build()?,
        );
        let fr = frames_on_grid(model.as_ref(), &g)?;
        let rho = stationary_rho0(&dspec, &fr, g.clone())?;
        let m = marginalize_nose(&rho)?;
        let (slope, res) = fit_marginal(&m, &fr, &nose)?;
        let wr = g.axis_weights(g.index_of(Coord::R(0)).unwrap());
        let wp = g.axis_weights(g.index_of(Coord::P(0)).unwrap());
        let (mut z, mut k) = (0.0, 0.0);
        for a in 0..m.n {
            for (i, wi) in wr.iter().enumerate() {
                for (j, (wj, p)) in wp.iter().zip(&m.p).enumerate() {
                    let d = m.at(a, i, j) * wi * wj;
                    z += d;
                    k += d * p * p / nose.mass;
                }
            }
        }
        marginal = (slope, res);
        series.push(SigmaPoint {
            sigma_e: sigma,
            mean_kinetic: k / z,
            marginal_slope: slope,
        });
    }
    let report = StationaryReport {
        order0_residual: order0,
        order1_residual: order1,
        marginal_slope: marginal.0,
        marginal_fit_residual: marginal.1,
        fredholm_max: fredholm,
        sigma_e_series: series,
    };
    out.json("stationary_report.json", &report)?;
    out.json(
        "summary.json",
        &StationarySummary {
            weight_sign: selection.sign,
            residual_minus: selection.residual_minus,
            residual_plus: selection.residual_plus,
            parity_control: control,
            expected_marginal_slope: want,
        },
    )?;
    let mut checks = Vec::new();
    checks.push(if coupled {
        Check::new(
            "order-hbar correction lowers the residual",
            order1 < order0,
            format!("{order0:.3e} -> {order1:.3e} at hbar {}", sc.hbar),
        )
    } else {
        Check::new(
            "stationary residual",
            order0 <= sc.residual_tol,
            format!("{order0:.3e} (tol {:.1e})", sc.residual_tol),
        )
    });
    checks.push(Check::new(
        "Fredholm orthogonality",
        fredholm <= sc.fredholm_tol && (model.n() == 1 || control > 1e3 * sc.fredholm_tol),
        format!("order-hbar density {fredholm:.2e} (tol {:.1e}), P-odd control {control:.3e}", sc.fredholm_tol),
    ));
    checks.push(Check::new(
        "marginal slope",
        (marginal.0 - want).abs() <= sc.marginal_tol && marginal.1 <= sc.marginal_tol,
        format!("{:.9} vs {want}, fit residual {:.2e} (tol {:.1e})", marginal.0, marginal.1, sc.marginal_tol),
    ));
    Ok(checks)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMat<f64> {
    CMat::from_vec(n, (0..n * n).map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
}

#[derive(Serialize)]
struct JacobiSummary {
    commutator_jacobi_max: f64,
    commutator_form_max: f64,
    leibniz_max: f64,
    qc_constant: f64,
    qc_scalar: f64,
    qc_generic: f64,
    twelve_term_mismatch: f64,
}

pub fn jacobi_check(cfg: &RunConfig, out: &Artifacts) -> RunResult<Vec<Check>> {
    let jc = &cfg.jacobi;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut jac, mut form, mut leib) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..jc.trials {
        let n = 1 + t % jc.max_dim;
        let (a, b, c) = (random_matrix(&mut rng, n), random_matrix(&mut rng, n), random_matrix(&mut rng, n));
        jac = jac.max(commutator_jacobi(&a, &b, &c)?.max_abs());
        form = form.max((&commutator_matrix_form(&a, &b)? - &(&(&a * &b) - &(&b * &a))).max_abs());
        leib = leib.max(leibniz_defect(&a, &b, &c)?.max_abs());
    }
    let g = Arc::new(
        PhaseGrid::builder(Layout::Nve, 1)
            .nodes(Coord::R(0), -1.0, 1.2, jc.nodes)
            .nodes(Coord::P(0), -0.9, 1.1, jc.nodes)
            .build()
            .map_err(|e| config_err(format!("at `jacobi.nodes`: {e}")))?,
    );
    let spec = DMatrixSpec::quantum_classical(Arc::new(Symplectic { dof: 1 }), jc.hbar);
    let (sx, sy, sz) = pauli::<f64>();
    let k = |m: &CMat<f64>| OperatorField::constant(g.clone(), m);
    let constant = qc_jacobi_residual(&k(&sx), &k(&sy), &k(&sz), &spec)?.max_abs();
    let s1 = OperatorField::scalar(g.clone(), 2, |x| x[0] * x[0] + x[1]);
    let s2 = OperatorField::scalar(g.clone(), 2, |x| x[1] * x[1]);
    let s3 = OperatorField::scalar(g.clone(), 2, |x| x[0] * x[1]);
    let scalar = qc_jacobi_residual(&s1, &s2, &s3, &spec)?.max_abs();
    let a = MatrixField::from_fn(g.clone(), 2, |x| sx.scale_real(x[0]));
    let b = MatrixField::from_fn(g.clone(), 2, |x| sz.scale_real(x[1]));
    let c = MatrixField::from_fn(g.clone(), 2, |x| sx.scale_real(x[0] * x[1]));
    let generic = qc_jacobi_residual(&a, &b, &c, &spec)?.max_abs();
    let rep = qc_jacobi_report(&a, &b, &c, &spec)?;
    let floor = constant.max(scalar).max(1e-14);
    out.json(
        "jacobi.json",
        &JacobiSummary {
            commutator_jacobi_max: jac,
            commutator_form_max: form,
            leibniz_max: leib,
            qc_constant: constant,
            qc_scalar: scalar,
            qc_generic: generic,
            twelve_term_mismatch: rep.mismatch,
        },
    )?;
    Ok(vec![
        Check::new(
            "commutator algebra",
            jac <= 1e-13 && form <= 1e-14 && leib <= 1e-13,
            format!("Jacobi {jac:.2e}, matrix form {form:.2e}, Leibniz {leib:.2e} over {} triples", jc.trials),
        ),
        Check::new(
            "quantum-classical Jacobi vanishes for constant and scalar fields",
            constant <= jc.tol && scalar <= jc.tol,
            format!("constant {constant:.2e}, scalar {scalar:.2e} (tol {:.1e})", jc.tol),
        ),
        Check::new(
            "quantum-classical Jacobi fails for a generic triple",
            generic >= 10.0 * floor,
            format!("{generic:.3e}, {:.1e} x noise floor", generic / floor),
        ),
        Check::new(
            "twelve-term expression",
            rep.mismatch <= jc.tol * (1.0 + rep.twelve_term.max_abs()),
            format!("mismatch {:.2e}", rep.mismatch),
        ),
    ])
}

#[derive(Serialize)]
struct BracketRow {
    ensemble: Layout,
    antisymmetry: f64,
    energy_rate: f64,
    compressibility: f64,
    divergence_fd: f64,
    jacobi: f64,
}

pub fn bracket_verify(cfg: &RunConfig, out: &Artifacts) -> RunResult<Vec<Check>> {
    let bc = &cfg.bracket;
    if bc.dof == 0 {
        return Err(config_err("at `bracket.dof`: must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    for kind in [Layout::Nve, Layout::Nose, Layout::Nhc2, Layout::Npt] {
        let spec = spec_checked(cfg.ensemble.spec_as(kind).clone_with_dof(bc.dof))?;
        let h = ExtendedHamiltonian::new(spec.clone(), Arc::new(Anharmonic { k: 1.0, quartic: 0.25 }));
        let s = make_structure(&spec);
        let mut row = BracketRow { ensemble: kind, antisymmetry: 0.0, energy_rate: 0.0, compressibility: 0.0, divergence_fd: 0.0, jacobi: 0.0 };
        for _ in 0..bc.points {
            let mut x: Vec<f64> = (0..spec.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            if let Some(iv) = spec.index(Coord::V) {
                x[iv] = rng.gen_range(0.5..3.0);
            }
            row.antisymmetry = row.antisymmetry.max(s.matrix(&x).antisymmetry_defect());
            let g = h.gradient(&x);
            let rate: f64 = g.iter().zip(eom_rhs(s.as_ref(), &h, &x)?).map(|(a, b)| a * b).sum();
            row.energy_rate = row.energy_rate.max(rate.abs());
            if kind != Layout::Nve {
                let k = compressibility(s.as_ref(), &h, &x)?;
                row.compressibility = row.compressibility.max((k - spec.compressibility_closed_form(&x)).abs());
            }
            let fd = numeric_divergence(s.as_ref(), &x, 1e-5);
            for (a, b) in s.divergence(&x).iter().zip(fd) {
                row.divergence_fd = row.divergence_fd.max((a - b).abs());
            }
            // R, P and the last coordinate: {R,{P,p}} picks up the thermostat coupling
            let last = CoordinateField(spec.dim() - 1);
            let ip = CoordinateField(spec.index(Coord::P(0)).unwrap());
            let j = jacobi_residual_classical(s.as_ref(), &CoordinateField(0), &ip, &last, &x)?;
            row.jacobi = row.jacobi.max(j.abs());
        }
        rows.push(row);
    }
    out.json("bracket.json", &rows)?;
    let mut checks = Vec::new();
    for r in &rows {
        let name = format!("{:?}", r.ensemble).to_lowercase();
        checks.push(Check::new(
            &format!("{name} structure"),
            r.antisymmetry <= 1e-12 && r.energy_rate <= bc.tol && r.compressibility <= bc.tol && r.divergence_fd <= bc.fd_tol,
            format!(
                "antisymmetry {:.1e}, dH/dt {:.1e}, kappa vs closed form {:.1e} (tol {:.0e}), divergence vs FD {:.1e} (tol {:.0e})",
                r.antisymmetry, r.energy_rate, r.compressibility, bc.tol, r.divergence_fd, bc.fd_tol
            ),
        ));
    }
    let sym = rows[0].jacobi;
    let nose = rows[1].jacobi;
    checks.push(Check::new(
        "Jacobi identity holds only for the canonical bracket",
        sym <= bc.fd_tol && nose >= 10.0 * bc.fd_tol,
        format!("canonical {sym:.1e}, Nose {nose:.3e}"),
    ));
    Ok(checks)
}

trait WithDof {
    fn clone_with_dof(self, dof: usize) -> Self;
}

impl WithDof for EnsembleSpec<f64> {
    fn clone_with_dof(mut self, dof: usize) -> Self {
        self.g = self.g / self.dof as f64 * dof as f64;
        self.dof = dof;
        self
    }
}
