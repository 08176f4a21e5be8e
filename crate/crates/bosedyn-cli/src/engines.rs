//! Scenario orchestration: builds the system from a config, runs the
//! requested engines, and writes one CSV per engine plus a JSON manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use bosedyn_core::dissipator::{propagate_dissipative_mean_field, QuadratureSpec};
use bosedyn_core::exact::{propagate_von_neumann, TimeGrid};
use bosedyn_core::fock::{sector_with_cap, SectorBasis, SectorVector};
use bosedyn_core::hierarchy::{
    bbgky_rhs, gpe_energy, mean_field_energy, mean_field_potential, propagate_gpe,
    propagate_mean_field, MeanFieldState,
};
use bosedyn_core::linalg::{self, CMatrix, C64};
use bosedyn_core::subsystem::{partial_trace, DensityMatrix};
use bosedyn_core::{Error as CoreError, Hamiltonian};

use crate::config::{Engine, ScenarioConfig};
use crate::observables::{column_names, row_values, EngineFrame};
use crate::output;

/// Failure taxonomy mapped onto exit codes: config errors (2), dimension
/// cap violations (3), numerical failures (4).
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Cap(String),
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Cap(_) => 3,
            RunError::Numerical(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Cap(_) => "cap",
            RunError::Numerical(_) => "numerical",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            RunError::Config(m) | RunError::Cap(m) | RunError::Numerical(m) => m,
        }
    }
}

impl From<crate::config::ConfigError> for RunError {
    fn from(e: crate::config::ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

fn numerical(e: CoreError) -> RunError {
    match e {
        CoreError::DimensionOverflow { .. } => RunError::Cap(e.to_string()),
        other => RunError::Numerical(other.to_string()),
    }
}

pub struct RunSummary {
    pub outputs: BTreeMap<String, String>,
    pub manifest_path: std::path::PathBuf,
}

struct Prepared {
    h: Hamiltonian,
    basis_n: Arc<SectorBasis>,
    grid: TimeGrid,
    engines: Vec<Engine>,
    dft: CMatrix,
}

fn prepare(config: &ScenarioConfig) -> Result<Prepared, RunError> {
    if config.d < 1 {
        return Err(RunError::Config("d must be at least 1".into()));
    }
    if config.engines.is_empty() {
        return Err(RunError::Config("no engines requested".into()));
    }
    if !config.observables.any_enabled() {
        return Err(RunError::Config("no observables enabled".into()));
    }
    if config.m < 1 || config.m > config.n {
        return Err(RunError::Config(format!(
            "m = {} outside 1..=n (n = {})",
            config.m, config.n
        )));
    }
    if config.hbar <= 0.0 || !config.hbar.is_finite() {
        return Err(RunError::Config("hbar must be positive".into()));
    }
    let cap = config.effective_dim_cap();
    let basis_n = sector_with_cap(config.d, config.n, cap).map_err(numerical)?;
    let h = config.build_hamiltonian()?;
    let grid = TimeGrid::from_zero(
        config.grid.t1 / config.hbar,
        config.grid.dt_out / config.hbar,
    )
    .map_err(numerical)?;
    let mut engines: Vec<Engine> = config
        .engines
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    engines.sort();
    for e in &engines {
        match e {
            Engine::BbgkyCheck | Engine::Dissipative if config.n < 2 => {
                return Err(RunError::Config(format!(
                    "{} engine requires n >= 2",
                    e.name()
                )));
            }
            Engine::Gpe => {
                config.build_lattice()?;
            }
            _ => {}
        }
    }
    if config.needs_product_initial() {
        config.initial_amplitudes()?;
    }
    Ok(Prepared {
        h,
        basis_n,
        grid,
        engines,
        dft: linalg::dft_matrix(config.d),
    })
}

/// Dry-run validation: dimension/cap checks, Hermiticity, normalization,
/// engine requirements. Writes nothing.
pub fn validate_scenario(config: &ScenarioConfig) -> Result<Vec<String>, RunError> {
    let prepared = prepare(config)?;
    crate::config::initial_sector_amplitudes(config, &prepared.basis_n)?;
    let mut report = vec![
        format!(
            "OK sector d={} n={}: dimension {} (cap {})",
            config.d,
            config.n,
            prepared.basis_n.dim(),
            config.effective_dim_cap()
        ),
        format!(
            "reduced sectors: {}",
            (1..=config.m)
                .map(|m| format!(
                    "m={} dim={}",
                    m,
                    bosedyn_core::fock::sector_dim(config.d, m)
                ))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        format!(
            "engines: {}",
            prepared
                .engines
                .iter()
                .map(|e| e.name())
                .collect::<Vec<_>>()
                .join(", ")
        ),
        format!("output grid: {} points", prepared.grid.times().len()),
    ];
    if config.needs_product_initial() {
        report.push("initial state: normalized single-particle amplitudes".into());
    }
    Ok(report)
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<RunSummary, RunError> {
    let prepared = prepare(config)?;
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| RunError::Config(format!("cannot create output dir: {e}")))?;
    let mut outputs = BTreeMap::new();
    let mut diagnostics = BTreeMap::new();
    let mut exact_rho1: Option<Vec<CMatrix>> = None;
    let needs_exact_reference = config.observables.trace_distance_exact
        && prepared
            .engines
            .iter()
            .any(|e| matches!(e, Engine::MeanField | Engine::Gpe | Engine::Dissipative));
    if needs_exact_reference {
        exact_rho1 = Some(exact_rho1_trajectory(config, &prepared)?);
    }
    for engine in prepared.engines.clone() {
        let out = match engine {
            Engine::Exact => run_exact(config, &prepared)?,
            Engine::BbgkyCheck => run_bbgky_check(config, &prepared)?,
            Engine::MeanField | Engine::Gpe => {
                run_mean_field_like(config, &prepared, engine, exact_rho1.as_deref())?
            }
            Engine::Dissipative => run_dissipative(config, &prepared, exact_rho1.as_deref())?,
        };
        let csv_name = format!("{}.csv", engine.name());
        output::write_csv(&config.output_dir.join(&csv_name), &out.columns, &out.rows)?;
        outputs.insert(engine.name().to_string(), csv_name);
        if config.snapshots && !out.snapshots.is_empty() {
            let snap_name = format!("{}_snapshots.json", engine.name());
            output::write_json(
                &config.output_dir.join(&snap_name),
                &serde_json::Value::Array(out.snapshots),
            )?;
            outputs.insert(format!("{}_snapshots", engine.name()), snap_name);
        }
        for (suffix, cols, rows) in &out.extra_csvs {
            let name = format!("{}_{suffix}.csv", engine.name());
            output::write_csv(&config.output_dir.join(&name), cols, rows)?;
            outputs.insert(format!("{}_{suffix}", engine.name()), name);
        }
        diagnostics.insert(engine.name().to_string(), out.diag);
    }
    let manifest_path = config.output_dir.join("manifest.json");
    let manifest = build_manifest(config, &prepared, &outputs, &diagnostics);
    output::write_json(&manifest_path, &manifest)?;
    Ok(RunSummary {
        outputs,
        manifest_path,
    })
}

struct EngineOutput {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    snapshots: Vec<serde_json::Value>,
    diag: serde_json::Value,
    /// Additional CSV artifacts, e.g. the per-site wavefunction dump of
    /// the mean-field engines: (file suffix, columns, rows).
    extra_csvs: Vec<(String, Vec<String>, Vec<Vec<f64>>)>,
}

fn exact_rho1_trajectory(
    config: &ScenarioConfig,
    prepared: &Prepared,
) -> Result<Vec<CMatrix>, RunError> {
    let psi0 = crate::config::initial_sector_amplitudes(config, &prepared.basis_n)?;
    let v = SectorVector::new(prepared.basis_n.clone(), psi0).map_err(numerical)?;
    let rho0 = DensityMatrix::pure(&v).map_err(numerical)?;
    let traj = propagate_von_neumann(&prepared.h, &rho0, &prepared.grid).map_err(numerical)?;
    traj.states
        .iter()
        .map(|s| {
            partial_trace(s, 1)
                .map(|r| r.matrix().clone())
                .map_err(numerical)
        })
        .collect()
}

fn run_exact(config: &ScenarioConfig, prepared: &Prepared) -> Result<EngineOutput, RunError> {
    let psi0 = crate::config::initial_sector_amplitudes(config, &prepared.basis_n)?;
    let v = SectorVector::new(prepared.basis_n.clone(), psi0).map_err(numerical)?;
    let rho0 = DensityMatrix::pure(&v).map_err(numerical)?;
    let traj = propagate_von_neumann(&prepared.h, &rho0, &prepared.grid).map_err(numerical)?;
    let hm = prepared
        .h
        .sector_matrix(&prepared.basis_n)
        .map_err(numerical)?;
    let mut frames = Vec::with_capacity(traj.times.len());
    let mut snapshots = Vec::new();
    let mut trace_dev_max: f64 = 0.0;
    let mut purity_drift: f64 = 0.0;
    let mut energy_drift: f64 = 0.0;
    let p0 = {
        let rm = partial_trace(&rho0, config.m).map_err(numerical)?;
        rm.purity()
    };
    let e0 = linalg::trace(&(rho0.matrix() * hm.matrix())).re;
    for (&t, state) in traj.times.iter().zip(&traj.states) {
        let rho1 = partial_trace(state, 1).map_err(numerical)?;
        let rho_m = partial_trace(state, config.m).map_err(numerical)?;
        let energy = linalg::trace(&(state.matrix() * hm.matrix())).re;
        trace_dev_max = trace_dev_max.max((state.trace() - C64::new(1.0, 0.0)).norm());
        purity_drift = purity_drift.max((rho_m.purity() - p0).abs());
        energy_drift = energy_drift.max((energy - e0).abs());
        if config.snapshots {
            snapshots.push(output::matrix_snapshot(
                config.d,
                config.n,
                t * config.hbar,
                state.matrix(),
            ));
        }
        frames.push(EngineFrame {
            time: t * config.hbar,
            rho1: rho1.matrix().clone(),
            purity: rho_m.purity(),
            energy,
            trace_distance_exact: None,
        });
    }
    let columns = column_names(&config.observables, config.d, false);
    let rows = frames
        .iter()
        .map(|f| row_values(&config.observables, f, config.n, &prepared.dft, false))
        .collect();
    let diag = serde_json::json!({
        "trace_deviation_max": trace_dev_max,
        "purity_drift_max": purity_drift,
        "energy_drift_max": energy_drift,
        "reduced_purity_subsystem": config.m,
    });
    Ok(EngineOutput {
        columns,
        rows,
        snapshots,
        diag,
        extra_csvs: Vec::new(),
    })
}

fn run_bbgky_check(config: &ScenarioConfig, prepared: &Prepared) -> Result<EngineOutput, RunError> {
    let psi0 = crate::config::initial_sector_amplitudes(config, &prepared.basis_n)?;
    let v = SectorVector::new(prepared.basis_n.clone(), psi0).map_err(numerical)?;
    let rho0 = DensityMatrix::pure(&v).map_err(numerical)?;
    let (w, vecs) = linalg::hermitian_eigen(
        prepared
            .h
            .sector_matrix(&prepared.basis_n)
            .map_err(numerical)?
            .matrix(),
    );
    let rho_eig = vecs.adjoint() * rho0.matrix() * &vecs;
    let basis = prepared.basis_n.clone();
    let state_at = |t: f64| -> DensityMatrix {
        let dim = w.len();
        let mut m = rho_eig.clone();
        for r in 0..dim {
            for c in 0..dim {
                let phase = (-linalg::I * (w[r] - w[c]) * t).exp();
                m[(r, c)] *= phase;
            }
        }
        DensityMatrix::new_unchecked(basis.clone(), &vecs * m * vecs.adjoint())
    };
    let delta = 1e-4;
    let m_max = 2.min(config.n - 1);
    let mut columns = vec!["time".to_string()];
    for m in 1..=m_max {
        columns.push(format!("rel_residual_m{m}"));
    }
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &t in &prepared.grid.times() {
        let plus = state_at(t + delta);
        let minus = state_at(t - delta);
        let center = state_at(t);
        let mut row = vec![t * config.hbar];
        for m in 1..=m_max {
            let fd = (partial_trace(&plus, m).map_err(numerical)?.matrix()
                - partial_trace(&minus, m).map_err(numerical)?.matrix())
                / C64::new(2.0 * delta, 0.0);
            let rho_m = partial_trace(&center, m).map_err(numerical)?;
            let rho_m1 = partial_trace(&center, m + 1).map_err(numerical)?;
            let rhs = bbgky_rhs(m, &rho_m, &rho_m1, &prepared.h, config.n).map_err(numerical)?
                / linalg::I;
            let rel = linalg::frobenius(&(fd - &rhs)) / linalg::frobenius(&rhs).max(1e-300);
            worst = worst.max(rel);
            row.push(rel);
        }
        rows.push(row);
    }
    let diag = serde_json::json!({
        "finite_difference_step": delta,
        "max_relative_residual": worst,
        "subsystems_checked": (1..=m_max).collect::<Vec<_>>(),
    });
    Ok(EngineOutput {
        columns,
        rows,
        snapshots: Vec::new(),
        diag,
        extra_csvs: Vec::new(),
    })
}

fn run_mean_field_like(
    config: &ScenarioConfig,
    prepared: &Prepared,
    engine: Engine,
    exact_rho1: Option<&[CMatrix]>,
) -> Result<EngineOutput, RunError> {
    let c = config.initial_amplitudes()?;
    let phi0 = MeanFieldState::new(c).map_err(numerical)?;
    let traj = match engine {
        Engine::MeanField => {
            propagate_mean_field(&phi0, &prepared.h, config.n, &prepared.grid).map_err(numerical)?
        }
        Engine::Gpe => {
            let lattice = config.build_lattice()?;
            propagate_gpe(&lattice, &phi0, config.n, &prepared.grid).map_err(numerical)?
        }
        _ => unreachable!("mean-field runner called with {engine:?}"),
    };
    let lattice = if engine == Engine::Gpe {
        Some(config.build_lattice()?)
    } else {
        None
    };
    let mut frames = Vec::with_capacity(traj.len());
    let mut snapshots = Vec::new();
    let mut norm_drift: f64 = 0.0;
    let mut energy_drift: f64 = 0.0;
    let e0 = match &lattice {
        Some(l) => gpe_energy(l, &traj[0].1, config.n),
        None => mean_field_energy(&prepared.h, &traj[0].1, config.n),
    };
    for (idx, (t, state)) in traj.iter().enumerate() {
        let rho1 = state.density();
        let energy = match &lattice {
            Some(l) => gpe_energy(l, state, config.n),
            None => mean_field_energy(&prepared.h, state, config.n),
        };
        norm_drift = norm_drift.max((state.norm() - 1.0).abs());
        energy_drift = energy_drift.max((energy - e0).abs());
        let distance = exact_rho1
            .and_then(|r| r.get(idx))
            .map(|exact| linalg::trace_distance(exact, &rho1));
        if config.snapshots {
            snapshots.push(output::matrix_snapshot(config.d, 1, t * config.hbar, &rho1));
        }
        frames.push(EngineFrame {
            time: t * config.hbar,
            purity: linalg::purity(&rho1),
            energy,
            trace_distance_exact: distance,
            rho1,
        });
    }
    let with_distance = exact_rho1.is_some();
    let columns = column_names(&config.observables, config.d, with_distance);
    let rows = frames
        .iter()
        .map(|f| {
            row_values(
                &config.observables,
                f,
                config.n,
                &prepared.dft,
                with_distance,
            )
        })
        .collect();
    let diag = serde_json::json!({
        "norm_drift_max": norm_drift,
        "energy_drift_max": energy_drift,
    });
    // per-site wavefunction dump in long format
    let mut extra_csvs = Vec::new();
    if config.snapshots {
        let cols = ["time", "site", "re_phi", "im_phi", "abs2"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut wf_rows = Vec::with_capacity(traj.len() * config.d);
        for (t, state) in &traj {
            for (site, amp) in state.amplitudes().iter().enumerate() {
                wf_rows.push(vec![
                    t * config.hbar,
                    site as f64,
                    amp.re,
                    amp.im,
                    amp.norm_sqr(),
                ]);
            }
        }
        extra_csvs.push(("wavefunction".to_string(), cols, wf_rows));
    }
    Ok(EngineOutput {
        columns,
        rows,
        snapshots,
        diag,
        extra_csvs,
    })
}

fn run_dissipative(
    config: &ScenarioConfig,
    prepared: &Prepared,
    exact_rho1: Option<&[CMatrix]>,
) -> Result<EngineOutput, RunError> {
    let c = config.initial_amplitudes()?;
    let basis1 = sector_with_cap(config.d, 1, config.effective_dim_cap()).map_err(numerical)?;
    let rho0 = DensityMatrix::new(basis1, &c * c.adjoint()).map_err(numerical)?;
    let spec: QuadratureSpec = config.quadrature.to_spec();
    let traj =
        propagate_dissipative_mean_field(&rho0, &prepared.h, config.n, &prepared.grid, &spec)
            .map_err(numerical)?;
    let mut frames = Vec::with_capacity(traj.times.len());
    let mut snapshots = Vec::new();
    for (idx, &t) in traj.times.iter().enumerate() {
        let rho1 = traj.states[idx].clone();
        let energy = {
            let herm = (&rho1 + rho1.adjoint()) * C64::new(0.5, 0.0);
            let c_pot = mean_field_potential(&herm, prepared.h.two_body()).map_err(numerical)?;
            let nn = config.n as f64;
            nn * linalg::trace(&(&herm * prepared.h.one_body().coeffs())).re
                + 0.5 * nn * (nn - 1.0) * linalg::trace(&(&herm * c_pot.coeffs())).re
        };
        let distance = exact_rho1.and_then(|r| r.get(idx)).map(|exact| {
            let herm = (&rho1 + rho1.adjoint()) * C64::new(0.5, 0.0);
            linalg::trace_distance(exact, &herm)
        });
        if config.snapshots {
            snapshots.push(output::matrix_snapshot(config.d, 1, t * config.hbar, &rho1));
        }
        frames.push(EngineFrame {
            time: t * config.hbar,
            purity: traj.diagnostics[idx].purity,
            energy,
            trace_distance_exact: distance,
            rho1,
        });
    }
    let with_distance = exact_rho1.is_some();
    let mut columns = column_names(&config.observables, config.d, with_distance);
    columns.extend(
        [
            "trace_re",
            "trace_im",
            "rho_min_eig",
            "gamma_min_eig",
            "quad_error",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(frames.len());
    for (f, diag) in frames.iter().zip(&traj.diagnostics) {
        let mut row = row_values(
            &config.observables,
            f,
            config.n,
            &prepared.dft,
            with_distance,
        );
        row.extend([
            diag.trace.re,
            diag.trace.im,
            diag.rho_min_eigenvalue,
            diag.gamma_min_eigenvalue,
            diag.quad_error,
        ]);
        rows.push(row);
    }
    let max_trace_drift = traj
        .diagnostics
        .iter()
        .map(|d| (d.trace - C64::new(1.0, 0.0)).norm())
        .fold(0.0, f64::max);
    let min_purity = traj
        .diagnostics
        .iter()
        .map(|d| d.purity)
        .fold(f64::INFINITY, f64::min);
    let min_rho_eig = traj
        .diagnostics
        .iter()
        .map(|d| d.rho_min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    let min_gamma_eig = traj
        .diagnostics
        .iter()
        .map(|d| d.gamma_min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    let diag = serde_json::json!({
        "max_trace_drift": max_trace_drift,
        "min_purity": min_purity,
        "min_rho_eigenvalue": min_rho_eig,
        "min_gamma_eigenvalue": min_gamma_eig,
    });
    Ok(EngineOutput {
        columns,
        rows,
        snapshots,
        diag,
        extra_csvs: Vec::new(),
    })
}

fn build_manifest(
    config: &ScenarioConfig,
    prepared: &Prepared,
    outputs: &BTreeMap<String, String>,
    diagnostics: &BTreeMap<String, serde_json::Value>,
) -> serde_json::Value {
    let mut engines = serde_json::Map::new();
    for e in &prepared.engines {
        engines.insert(
            e.name().to_string(),
            serde_json::json!({
                "equation": e.equation(),
                "csv": outputs.get(e.name()),
            }),
        );
    }
    let basis = if config.dump_basis {
        Some(
            prepared
                .basis_n
                .states()
                .iter()
                .map(|f| f.occupations().to_vec())
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(config).expect("config serializes"),
        "sector": {
            "d": config.d,
            "n": config.n,
            "dimension": prepared.basis_n.dim(),
            "dim_cap": config.effective_dim_cap(),
        },
        "hbar": config.hbar,
        "seed": config.seed,
        "engines": serde_json::Value::Object(engines),
        "tolerances": {
            "hermiticity": bosedyn_core::tol::HERMITICITY,
            "unit_trace": bosedyn_core::tol::UNIT_TRACE,
            "psd_min_eigenvalue": bosedyn_core::tol::PSD_MIN_EIGENVALUE,
            "quadrature": bosedyn_core::tol::QUADRATURE,
            "step_refinement": bosedyn_core::tol::STEP_REFINEMENT,
        },
        "diagnostics": diagnostics,
        "basis": basis,
    })
}
