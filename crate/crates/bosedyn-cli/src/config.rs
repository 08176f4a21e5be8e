//! Scenario configuration: a single JSON document describing the system,
//! the initial state, the engines to run, and output options. Matrices
//! and amplitudes are nested arrays of [re, im] pairs, row-major.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bosedyn_core::fock::sector_dim;
use bosedyn_core::hierarchy::{Boundary, LatticeConfig};
use bosedyn_core::linalg::{CMatrix, CVector, C64};
use bosedyn_core::second_quant::{OneBodyOperator, TwoBodyOperator};
use bosedyn_core::tol;
use bosedyn_core::Hamiltonian;

pub type ComplexPair = [f64; 2];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub d: usize,
    pub n: usize,
    /// Subsystem size for reduced-state observables of the exact engine.
    #[serde(default = "default_m")]
    pub m: usize,
    pub h1: OneBodySpec,
    pub h2: TwoBodySpec,
    pub initial_state: InitialStateSpec,
    pub grid: GridSpec,
    pub engines: Vec<Engine>,
    #[serde(default)]
    pub observables: ObservableSet,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Sector dimension cap; the BOSEDYN_DIM_CAP environment variable
    /// overrides it.
    #[serde(default = "default_dim_cap")]
    pub dim_cap: usize,
    /// Physical value of ħ in the config's energy·time units; internal
    /// propagation uses ħ = 1 and times are rescaled on ingestion.
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    /// Lattice spacing used by the GPE engine (sites come from `d`).
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    /// Write per-engine JSON state snapshots next to the CSVs.
    #[serde(default)]
    pub snapshots: bool,
    /// Include the occupation-vector basis listing in the manifest.
    #[serde(default)]
    pub dump_basis: bool,
}

fn default_m() -> usize {
    1
}

fn default_dim_cap() -> usize {
    tol::DEFAULT_DIM_CAP
}

fn default_hbar() -> f64 {
    1.0
}

fn default_spacing() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OneBodySpec {
    /// Chain with hopping -j, linear tilt (energy per site), and open or
    /// periodic ends.
    TightBinding {
        j: f64,
        #[serde(default)]
        tilt: f64,
        boundary: BoundarySpec,
    },
    /// Chain with hopping -j in a quadratic on-site potential
    /// k·(x - (d-1)/2)².
    Harmonic { j: f64, k: f64 },
    /// Explicit d×d matrix from a JSON file of [re, im] pairs.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    Open,
    Periodic,
}

impl From<BoundarySpec> for Boundary {
    fn from(b: BoundarySpec) -> Boundary {
        match b {
            BoundarySpec::Open => Boundary::Open,
            BoundarySpec::Periodic => Boundary::Periodic,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TwoBodySpec {
    Contact {
        g: f64,
    },
    /// Explicit d²×d² tensor (row (i·d+j), column (k·d+l)) from JSON.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateSpec {
    /// Condensate amplitudes c_i over the d modes.
    Product { amplitudes: Vec<ComplexPair> },
    /// A single occupation-number basis state.
    Fock { occupations: Vec<usize> },
    /// Explicit amplitudes: length d means a single-particle vector,
    /// length C(N+d-1, d-1) a sector vector.
    Explicit { amplitudes: Vec<ComplexPair> },
    /// Explicit amplitudes loaded from a JSON file (same convention).
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t1: f64,
    pub dt_out: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Exact,
    BbgkyCheck,
    MeanField,
    Gpe,
    Dissipative,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Exact => "exact",
            Engine::BbgkyCheck => "bbgky_check",
            Engine::MeanField => "mean_field",
            Engine::Gpe => "gpe",
            Engine::Dissipative => "dissipative",
        }
    }

    pub fn equation(&self) -> &'static str {
        match self {
            Engine::Exact => {
                "von Neumann equation in the fixed-N sector, propagated by dense eigendecomposition"
            }
            Engine::BbgkyCheck => {
                "BBGKY hierarchy consistency: finite-difference derivative of reduced states against the hierarchy right-hand side"
            }
            Engine::MeanField => {
                "nonlinear mean-field Schrödinger equation with the (N-1)-weighted effective potential"
            }
            Engine::Gpe => "discrete Gross-Pitaevskii equation on the 3-point lattice stencil",
            Engine::Dissipative => {
                "time-local dissipative nonlinear mean-field master equation (Lamb shift + Lindblad form)"
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservableSet {
    pub occupations: bool,
    pub momentum: bool,
    pub purity: bool,
    pub energy: bool,
    pub trace_distance_exact: bool,
    pub natural_occupations: bool,
}

impl Default for ObservableSet {
    fn default() -> Self {
        ObservableSet {
            occupations: true,
            momentum: true,
            purity: true,
            energy: true,
            trace_distance_exact: false,
            natural_occupations: false,
        }
    }
}

impl ObservableSet {
    pub fn any_enabled(&self) -> bool {
        self.occupations
            || self.momentum
            || self.purity
            || self.energy
            || self.trace_distance_exact
            || self.natural_occupations
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub rule: QuadratureRuleSpec,
    pub substeps: usize,
    pub tol: f64,
    pub max_doublings: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRuleSpec {
    Trapezoid,
    Gauss,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let spec = bosedyn_core::dissipator::QuadratureSpec::default();
        QuadratureConfig {
            rule: QuadratureRuleSpec::Trapezoid,
            substeps: spec.substeps,
            tol: spec.tol,
            max_doublings: spec.max_doublings,
        }
    }
}

impl QuadratureConfig {
    pub fn to_spec(self) -> bosedyn_core::dissipator::QuadratureSpec {
        bosedyn_core::dissipator::QuadratureSpec {
            rule: match self.rule {
                QuadratureRuleSpec::Trapezoid => {
                    bosedyn_core::dissipator::QuadratureRule::Trapezoid
                }
                QuadratureRuleSpec::Gauss => {
                    bosedyn_core::dissipator::QuadratureRule::GaussLegendre
                }
            },
            substeps: self.substeps,
            tol: self.tol,
            max_doublings: self.max_doublings,
        }
    }
}

/// Configuration or input-data failure; maps to exit code 2 (or 3 for
/// cap violations at the caller's discretion).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| err(format!("config parse error: {e}")))
}

pub fn complex_of(pair: ComplexPair) -> C64 {
    C64::new(pair[0], pair[1])
}

fn load_pairs_matrix(path: &Path, rows: usize, cols: usize) -> Result<CMatrix, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
    let data: Vec<Vec<ComplexPair>> =
        serde_json::from_str(&text).map_err(|e| err(format!("{}: {e}", path.display())))?;
    if data.len() != rows || data.iter().any(|r| r.len() != cols) {
        return Err(err(format!(
            "{}: expected a {rows}×{cols} matrix of [re, im] pairs",
            path.display()
        )));
    }
    Ok(CMatrix::from_fn(rows, cols, |r, c| complex_of(data[r][c])))
}

impl ScenarioConfig {
    /// The dimension cap after applying the environment override.
    pub fn effective_dim_cap(&self) -> usize {
        std::env::var("BOSEDYN_DIM_CAP")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(self.dim_cap)
    }

    pub fn sector_dimension(&self) -> u128 {
        sector_dim(self.d, self.n)
    }

    pub fn build_one_body(&self) -> Result<OneBodyOperator, ConfigError> {
        let d = self.d;
        match &self.h1 {
            OneBodySpec::TightBinding { j, tilt, boundary } => {
                let mut h = CMatrix::zeros(d, d);
                for x in 0..d {
                    h[(x, x)] = C64::new(tilt * x as f64, 0.0);
                }
                for x in 0..d.saturating_sub(1) {
                    h[(x, x + 1)] += C64::new(-j, 0.0);
                    h[(x + 1, x)] += C64::new(-j, 0.0);
                }
                if *boundary == BoundarySpec::Periodic && d > 2 {
                    h[(0, d - 1)] += C64::new(-j, 0.0);
                    h[(d - 1, 0)] += C64::new(-j, 0.0);
                }
                Ok(OneBodyOperator::new(h))
            }
            OneBodySpec::Harmonic { j, k } => {
                let c = (d as f64 - 1.0) / 2.0;
                let mut h = CMatrix::zeros(d, d);
                for x in 0..d {
                    h[(x, x)] = C64::new(k * (x as f64 - c).powi(2), 0.0);
                }
                for x in 0..d.saturating_sub(1) {
                    h[(x, x + 1)] = C64::new(-j, 0.0);
                    h[(x + 1, x)] = C64::new(-j, 0.0);
                }
                Ok(OneBodyOperator::new(h))
            }
            OneBodySpec::File { path } => {
                let m = load_pairs_matrix(path, d, d)?;
                Ok(OneBodyOperator::new(m))
            }
        }
    }

    pub fn build_two_body(&self) -> Result<TwoBodyOperator, ConfigError> {
        let d = self.d;
        match &self.h2 {
            TwoBodySpec::Contact { g } => Ok(TwoBodyOperator::contact(d, *g)),
            TwoBodySpec::File { path } => {
                let m = load_pairs_matrix(path, d * d, d * d)?;
                Ok(TwoBodyOperator::new(d, m))
            }
        }
    }

    pub fn build_hamiltonian(&self) -> Result<Hamiltonian, ConfigError> {
        let h1 = self.build_one_body()?;
        let dev = h1.hermiticity_deviation();
        if dev >= tol::HERMITICITY {
            return Err(err(format!("h1 not Hermitian (max dev = {dev:.3e})")));
        }
        let h2 = self.build_two_body()?;
        let dev = h2.hermiticity_deviation();
        if dev >= tol::HERMITICITY {
            return Err(err(format!("h2 not Hermitian (max dev = {dev:.3e})")));
        }
        Hamiltonian::new(h1, h2).map_err(|e| err(e.to_string()))
    }

    /// The lattice behind a tight-binding + contact scenario; required by
    /// the GPE engine. The stencil hopping fixes the mass through
    /// J = 1/(2 m a²).
    pub fn build_lattice(&self) -> Result<LatticeConfig, ConfigError> {
        let (j, tilt, boundary) = match &self.h1 {
            OneBodySpec::TightBinding { j, tilt, boundary } => (*j, *tilt, *boundary),
            _ => return Err(err("gpe engine requires a tight_binding h1")),
        };
        let g = match &self.h2 {
            TwoBodySpec::Contact { g } => *g,
            _ => return Err(err("gpe engine requires a contact h2")),
        };
        if j <= 0.0 {
            return Err(err("gpe engine requires a positive hopping j"));
        }
        let a = self.spacing;
        Ok(LatticeConfig {
            sites: self.d,
            spacing: a,
            boundary: boundary.into(),
            tilt,
            onsite_g: g,
            mass: 1.0 / (2.0 * j * a * a),
        })
    }

    /// Initial condensate amplitudes, for the engines that propagate a
    /// single-particle state.
    pub fn initial_amplitudes(&self) -> Result<CVector, ConfigError> {
        let amps = match &self.initial_state {
            InitialStateSpec::Product { amplitudes } => amplitudes.clone(),
            InitialStateSpec::Explicit { amplitudes } if amplitudes.len() == self.d => {
                amplitudes.clone()
            }
            InitialStateSpec::File { path } => {
                let v = load_amplitudes(path)?;
                if v.len() == self.d {
                    v
                } else {
                    return Err(err(format!(
                        "{}: mean-field engines need {} single-particle amplitudes",
                        path.display(),
                        self.d
                    )));
                }
            }
            InitialStateSpec::Fock { .. } => return Err(err(
                "mean-field engines require a product (condensate) initial state, not a Fock state",
            )),
            InitialStateSpec::Explicit { amplitudes } => {
                return Err(err(format!(
                    "explicit initial state has {} amplitudes; mean-field engines need {}",
                    amplitudes.len(),
                    self.d
                )))
            }
        };
        let mut v = CVector::from_iterator(amps.len(), amps.iter().map(|&p| complex_of(p)));
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(err(format!(
                "initial amplitudes not normalized (|c| = {norm:.9})"
            )));
        }
        v /= C64::new(norm, 0.0);
        Ok(v)
    }

    /// Whether any requested engine needs a single-particle initial state.
    pub fn needs_product_initial(&self) -> bool {
        self.engines
            .iter()
            .any(|e| matches!(e, Engine::MeanField | Engine::Gpe | Engine::Dissipative))
    }
}

fn load_amplitudes(path: &Path) -> Result<Vec<ComplexPair>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| err(format!("{}: {e}", path.display())))
}

/// Initial amplitudes over the full sector basis, for the exact engines.
pub fn initial_sector_amplitudes(
    config: &ScenarioConfig,
    basis: &std::sync::Arc<bosedyn_core::SectorBasis>,
) -> Result<CVector, ConfigError> {
    use bosedyn_core::fock::FockState;
    use bosedyn_core::subsystem::{product_state_vector, ProductStateAmplitudes};
    match &config.initial_state {
        InitialStateSpec::Product { .. } => {
            let c = config.initial_amplitudes()?;
            let amps = ProductStateAmplitudes::new(c).map_err(|e| err(e.to_string()))?;
            product_state_vector(&amps, basis)
                .map(|v| v.amplitudes().clone())
                .map_err(|e| err(e.to_string()))
        }
        InitialStateSpec::Fock { occupations } => {
            if occupations.len() != config.d {
                return Err(err(format!(
                    "fock occupations have {} modes, expected {}",
                    occupations.len(),
                    config.d
                )));
            }
            let total: usize = occupations.iter().sum();
            if total != config.n {
                return Err(err(format!(
                    "fock occupations sum to {total}, expected n = {}",
                    config.n
                )));
            }
            let state = FockState::new(occupations.clone());
            let idx = basis
                .index_of(&state)
                .ok_or_else(|| err("fock state not in sector".to_string()))?;
            let mut v = CVector::zeros(basis.dim());
            v[idx] = C64::new(1.0, 0.0);
            Ok(v)
        }
        InitialStateSpec::Explicit { amplitudes } => {
            sector_vector_from_pairs(amplitudes, config, basis)
        }
        InitialStateSpec::File { path } => {
            let pairs = load_amplitudes(path)?;
            sector_vector_from_pairs(&pairs, config, basis)
        }
    }
}

fn sector_vector_from_pairs(
    pairs: &[ComplexPair],
    config: &ScenarioConfig,
    basis: &std::sync::Arc<bosedyn_core::SectorBasis>,
) -> Result<CVector, ConfigError> {
    if pairs.len() == config.d && config.d != basis.dim() {
        // single-particle amplitudes: expand the condensate
        let c = CVector::from_iterator(config.d, pairs.iter().map(|&p| complex_of(p)));
        let amps = bosedyn_core::subsystem::ProductStateAmplitudes::new(c)
            .map_err(|e| err(e.to_string()))?;
        return bosedyn_core::subsystem::product_state_vector(&amps, basis)
            .map(|v| v.amplitudes().clone())
            .map_err(|e| err(e.to_string()));
    }
    if pairs.len() != basis.dim() {
        return Err(err(format!(
            "explicit amplitudes have length {}, expected {} (sector) or {} (single-particle)",
            pairs.len(),
            basis.dim(),
            config.d
        )));
    }
    let mut v = CVector::from_iterator(pairs.len(), pairs.iter().map(|&p| complex_of(p)));
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(err(format!(
            "sector amplitudes not normalized (|ψ| = {norm:.9})"
        )));
    }
    v /= C64::new(norm, 0.0);
    Ok(v)
}
