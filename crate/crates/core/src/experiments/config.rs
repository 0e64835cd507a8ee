use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dense::{clock, shift, DEFAULT_AMPLITUDE_BUDGET};
use crate::error::{Result, SptError};
use crate::group::{CellOperator, FiniteAbelianGroup, OnSiteRepresentation};
use crate::model::{build_cluster_qubit_with, build_cluster_qudit_with, build_trivial, Backend, Boundary, ChainState, ModelOptions, SptModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKindConfig {
    ClusterQubit,
    ClusterQudit,
    Trivial,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    #[default]
    Stabilizer,
    Dense,
    Both,
}

impl BackendChoice {
    pub fn backends(self) -> Vec<Backend> {
        match self {
            BackendChoice::Stabilizer => vec![Backend::Stabilizer],
            BackendChoice::Dense => vec![Backend::Dense],
            BackendChoice::Both => vec![Backend::Stabilizer, Backend::Dense],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Index,
    StringOrder,
    MeasureSweep,
    Decay,
    Localize,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Index,
        ExperimentKind::StringOrder,
        ExperimentKind::MeasureSweep,
        ExperimentKind::Decay,
        ExperimentKind::Localize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Index => "index",
            ExperimentKind::StringOrder => "string-order",
            ExperimentKind::MeasureSweep => "measure-sweep",
            ExperimentKind::Decay => "decay",
            ExperimentKind::Localize => "localize",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKindConfig,
    pub n_cells: usize,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub boundary: Boundary,
    /// Largest dense state, in amplitudes.
    #[serde(default)]
    pub amplitude_budget: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    /// Block radius; defaults to the entangler radius.
    #[serde(default)]
    pub block_radius: Option<usize>,
    /// Region sizes `n` swept by `measure-sweep`; each measures `2n + 1`
    /// blocks centred in the chain.
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Explicit centres, used instead of `sizes` when `auto_lattice` is off.
    #[serde(default)]
    pub centers: Vec<usize>,
    #[serde(default = "default_true")]
    pub auto_lattice: bool,
    #[serde(default = "default_samples")]
    pub samples: u64,
    /// Force enumeration on or off; by default it is used when the outcome
    /// space has at most 2^16 entries.
    #[serde(default)]
    pub enumerate: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// First endpoint cell; defaults to the first bulk cut.
    #[serde(default)]
    pub start: Option<usize>,
    /// Separations in cells; defaults to every separation that fits.
    #[serde(default)]
    pub separations: Vec<usize>,
    /// Group element `[g, h]`; defaults to `[1, 0]`.
    #[serde(default)]
    pub element: Option<[u32; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizeConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_sites")]
    pub sites: usize,
    #[serde(default = "default_keep")]
    pub keep: usize,
    /// Strength of the non-local part of the near-local trials.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Cells of the chain used for the entangler locality profile; by
    /// default the shortest valid chain, skipped if it has more than 2^12
    /// amplitudes.
    #[serde(default)]
    pub profile_cells: Option<usize>,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            block_radius: None,
            sizes: Vec::new(),
            centers: Vec::new(),
            auto_lattice: true,
            samples: default_samples(),
            enumerate: None,
        }
    }
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            sites: default_sites(),
            keep: default_keep(),
            epsilon: default_epsilon(),
            profile_cells: None,
        }
    }
}

/// A cell generator: a named operator or a row-major list of `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorSpec {
    Named(String),
    Matrix(Vec<[f64; 2]>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepresentationConfig {
    pub name: String,
    #[serde(default = "default_d")]
    pub d: usize,
    pub moduli: Vec<u32>,
    pub generators: Vec<GeneratorSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub backend: BackendChoice,
    #[serde(default)]
    pub measurement: MeasurementConfig,
    #[serde(default)]
    pub experiments: Vec<ExperimentKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker threads; 0 lets the pool pick.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub string_order: SweepConfig,
    #[serde(default)]
    pub decay: SweepConfig,
    #[serde(default)]
    pub localize: LocalizeConfig,
    #[serde(default)]
    pub representations: Vec<RepresentationConfig>,
}

fn default_true() -> bool {
    true
}
fn default_samples() -> u64 {
    20
}
fn default_trials() -> usize {
    200
}
fn default_sites() -> usize {
    3
}
fn default_keep() -> usize {
    2
}
fn default_epsilon() -> f64 {
    0.05
}
fn default_d() -> usize {
    2
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

const MAX_PROFILE_DIM: usize = 1 << 12;

fn config_err(path: &str, message: impl Into<String>) -> SptError {
    SptError::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

/// A parsed config together with the hash of its source text.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
}

impl LoadedConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::with_backend(text, None)
    }

    /// Parses `text`, replaces the backend when `backend` is set, then
    /// validates.
    pub fn with_backend(text: &str, backend: Option<BackendChoice>) -> Result<Self> {
        let mut config = ExperimentConfig::parse_unvalidated(text)?;
        if let Some(b) = backend {
            config.backend = b;
        }
        config.validate()?;
        Ok(Self {
            config,
            hash: config_hash(text),
        })
    }

    pub fn from_path(path: &Path, backend: Option<BackendChoice>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("<file>", format!("{}: {e}", path.display())))?;
        Self::with_backend(&text, backend)
    }
}

/// Hex SHA-256 of the raw config text.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config = Self::parse_unvalidated(text)?;
        config.validate()?;
        Ok(config)
    }

    fn parse_unvalidated(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let span = e
                .span()
                .map(|s| locate_key(text, s.start))
                .unwrap_or_else(|| "<root>".into());
            config_err(&span, e.message().to_string())
        })
    }

    pub fn local_dim(&self) -> usize {
        match self.model.kind {
            ModelKindConfig::ClusterQubit => 2,
            _ => self.model.d.unwrap_or(2),
        }
    }

    pub fn radius(&self) -> usize {
        match self.model.kind {
            ModelKindConfig::Trivial => 0,
            _ => 1,
        }
    }

    pub fn block_radius(&self) -> usize {
        self.measurement.block_radius.unwrap_or(self.radius())
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.kind == ModelKindConfig::ClusterQubit && m.d.is_some_and(|d| d != 2) {
            return Err(config_err("model.d", "cluster_qubit requires d = 2"));
        }
        let d = self.local_dim();
        if d < 2 {
            return Err(config_err("model.d", format!("local dimension {d} < 2")));
        }
        let min_cells = 2 * self.radius() + 2;
        if m.n_cells < min_cells {
            return Err(config_err(
                "model.n_cells",
                format!("{} cells, need at least {min_cells}", m.n_cells),
            ));
        }
        if d != 2 && self.backend != BackendChoice::Dense {
            return Err(config_err(
                "backend",
                format!("d = {d} is only supported by the dense backend"),
            ));
        }
        if m.amplitude_budget == Some(0) {
            return Err(config_err("model.amplitude_budget", "must be positive"));
        }
        if self.backend != BackendChoice::Stabilizer {
            let budget = m.amplitude_budget.unwrap_or(DEFAULT_AMPLITUDE_BUDGET);
            let needed = (0..2 * m.n_cells).try_fold(1usize, |acc, _| acc.checked_mul(d));
            if needed.is_none_or(|n| n > budget) {
                return Err(config_err(
                    "model.n_cells",
                    format!("{} cells of dimension {d} exceed the dense budget of {budget} amplitudes", m.n_cells),
                ));
            }
        }
        let meas = &self.measurement;
        let width = 2 * self.block_radius() + 1;
        for (k, &n) in meas.sizes.iter().enumerate() {
            if (2 * n + 1) * width > m.n_cells {
                return Err(config_err(
                    &format!("measurement.sizes[{k}]"),
                    format!("{} blocks of width {width} exceed {} cells", 2 * n + 1, m.n_cells),
                ));
            }
        }
        if !meas.auto_lattice && meas.centers.is_empty() && self.experiments.contains(&ExperimentKind::MeasureSweep) {
            return Err(config_err(
                "measurement.centers",
                "explicit centres are required when auto_lattice is false",
            ));
        }
        for (k, &c) in meas.centers.iter().enumerate() {
            if c >= m.n_cells {
                return Err(config_err(
                    &format!("measurement.centers[{k}]"),
                    format!("cell {c} outside a chain of {} cells", m.n_cells),
                ));
            }
        }
        if meas.samples == 0 {
            return Err(config_err("measurement.samples", "must be positive"));
        }
        for (name, sweep) in [("string_order", &self.string_order), ("decay", &self.decay)] {
            if let Some(s) = sweep.start {
                if s >= m.n_cells {
                    return Err(config_err(&format!("{name}.start"), format!("cell {s} outside the chain")));
                }
            }
            if let Some([g, h]) = sweep.element {
                if g as usize >= d || h as usize >= d {
                    return Err(config_err(&format!("{name}.element"), format!("residues must be < {d}")));
                }
            }
        }
        let loc = &self.localize;
        if loc.keep == 0 || loc.keep >= loc.sites {
            return Err(config_err("localize.keep", "must satisfy 0 < keep < sites"));
        }
        if loc.sites > 8 {
            return Err(config_err("localize.sites", "at most 8 qubits"));
        }
        if !(loc.epsilon.is_finite() && loc.epsilon >= 0.0) {
            return Err(config_err("localize.epsilon", "must be finite and non-negative"));
        }
        if let Some(cells) = loc.profile_cells {
            if cells < 2 * self.radius() + 2 || self.profile_dim(cells).is_none_or(|n| n > MAX_PROFILE_DIM) {
                return Err(config_err(
                    "localize.profile_cells",
                    format!("need at least {} cells and at most 2^12 amplitudes", 2 * self.radius() + 2),
                ));
            }
        }
        for (k, rep) in self.representations.iter().enumerate() {
            rep.build()
                .map_err(|e| config_err(&format!("representations[{k}]"), e.to_string()))?;
        }
        Ok(())
    }

    fn profile_dim(&self, cells: usize) -> Option<usize> {
        (0..2 * cells).try_fold(1usize, |acc, _| acc.checked_mul(self.local_dim()))
    }

    /// Chain length for the locality profile, or `None` to skip it.
    pub fn profile_cells(&self) -> Option<usize> {
        if let Some(c) = self.localize.profile_cells {
            return Some(c);
        }
        let cells = 2 * self.radius() + 2;
        self.profile_dim(cells).filter(|&n| n <= MAX_PROFILE_DIM).map(|_| cells)
    }

    pub fn model_options(&self, backend: Backend) -> ModelOptions {
        let mut opts = ModelOptions {
            backend,
            boundary: self.model.boundary,
            ..ModelOptions::default()
        };
        if let Some(b) = self.model.amplitude_budget {
            opts.amplitude_budget = b;
        }
        opts
    }

    pub fn build_model(&self, backend: Backend) -> Result<(SptModel, ChainState)> {
        self.build_model_cells(backend, self.model.n_cells)
    }

    pub fn build_model_cells(&self, backend: Backend, n_cells: usize) -> Result<(SptModel, ChainState)> {
        let opts = self.model_options(backend);
        let d = self.local_dim();
        match self.model.kind {
            ModelKindConfig::ClusterQubit => build_cluster_qubit_with(n_cells, opts),
            ModelKindConfig::ClusterQudit => build_cluster_qudit_with(n_cells, d, opts),
            ModelKindConfig::Trivial => build_trivial(n_cells, d, opts),
        }
    }

    /// Experiments to run, in canonical order; an empty list means all.
    pub fn experiment_list(&self) -> Vec<ExperimentKind> {
        if self.experiments.is_empty() {
            return ExperimentKind::ALL.to_vec();
        }
        ExperimentKind::ALL
            .into_iter()
            .filter(|k| self.experiments.contains(k))
            .collect()
    }
}

impl RepresentationConfig {
    pub fn build(&self) -> Result<OnSiteRepresentation> {
        let group = FiniteAbelianGroup::new(self.moduli.clone())?;
        if self.generators.len() != group.rank() {
            return Err(SptError::InvalidRepresentation(format!(
                "{} generators for a group of rank {}",
                self.generators.len(),
                group.rank()
            )));
        }
        let gens = self
            .generators
            .iter()
            .map(|g| self.generator(g).map(CellOperator::Dense))
            .collect::<Result<Vec<_>>>()?;
        OnSiteRepresentation::from_generators(group, gens)
    }

    fn generator(&self, spec: &GeneratorSpec) -> Result<DMatrix<C64>> {
        let d = self.d;
        let id = DMatrix::<C64>::identity(d, d);
        match spec {
            GeneratorSpec::Named(name) => {
                let (x, z) = (shift(d), clock(d));
                let m = match name.as_str() {
                    "I" => id.kronecker(&id),
                    "X" => x.kronecker(&x),
                    "Z" => z.kronecker(&z),
                    "X_even" => id.kronecker(&x),
                    "X_odd" => x.kronecker(&id),
                    "Z_even" => id.kronecker(&z),
                    "Z_odd" => z.kronecker(&id),
                    other => {
                        return Err(SptError::InvalidRepresentation(format!(
                            "unknown generator name `{other}`"
                        )))
                    }
                };
                Ok(m)
            }
            GeneratorSpec::Matrix(entries) => {
                let dim = d * d;
                if entries.len() != dim * dim {
                    return Err(SptError::DimensionMismatch {
                        expected: dim * dim,
                        got: entries.len(),
                    });
                }
                Ok(DMatrix::from_row_iterator(
                    dim,
                    dim,
                    entries.iter().map(|[re, im]| C64::new(*re, *im)),
                ))
            }
        }
    }
}

/// Dotted key path of the table entry enclosing byte `offset`.
fn locate_key(text: &str, offset: usize) -> String {
    let mut table = String::new();
    let mut key = None;
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            table = trimmed.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key = None;
        } else if let Some((k, _)) = trimmed.split_once('=') {
            key = Some(k.trim().to_string());
        }
        pos += line.len();
        if pos > offset {
            break;
        }
    }
    match (table.is_empty(), key) {
        (true, Some(k)) => k,
        (false, Some(k)) => format!("{table}.{k}"),
        (false, None) => table,
        (true, None) => "<root>".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
seed = 7
experiments = ["index", "decay"]

[model]
kind = "cluster_qubit"
n_cells = 40
"#;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::parse(BASIC).unwrap();
        assert_eq!(c.model.n_cells, 40);
        assert_eq!(c.backend, BackendChoice::Stabilizer);
        assert_eq!(c.experiment_list(), vec![ExperimentKind::Index, ExperimentKind::Decay]);
        assert_eq!(c.measurement.samples, 20);
    }

    #[test]
    fn unknown_key_reports_path() {
        let text = "[model]\nkind = \"cluster_qubit\"\nn_cells = 40\ncolour = 3\n";
        match ExperimentConfig::parse(text).unwrap_err() {
            SptError::Config { path, message } => {
                assert_eq!(path, "model.colour", "{message}");
                assert!(message.contains("colour"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let text = "backend = \"stabilizer\"\n[model]\nkind = \"cluster_qudit\"\nd = 3\nn_cells = 4\n";
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert!(matches!(err, SptError::Config { ref path, .. } if path == "backend"), "{err}");

        let text = "[model]\nkind = \"cluster_qubit\"\nn_cells = 20\n[measurement]\nsizes = [1, 9]\n";
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert!(matches!(err, SptError::Config { ref path, .. } if path == "measurement.sizes[1]"), "{err}");
    }

    #[test]
    fn hash_tracks_text() {
        let a = LoadedConfig::parse(BASIC).unwrap();
        let b = LoadedConfig::parse(&format!("{BASIC}\n")).unwrap();
        assert_eq!(a.hash.len(), 64);
        assert_ne!(a.hash, b.hash);
        assert_eq!(a.hash, LoadedConfig::parse(BASIC).unwrap().hash);
    }

    #[test]
    fn representation_entries() {
        let text = r#"
[model]
kind = "cluster_qubit"
n_cells = 40

[[representations]]
name = "z2xz2"
moduli = [2, 2]
generators = ["X_even", "X_odd"]

[[representations]]
name = "explicit"
moduli = [2]
generators = [[[0,0],[1,0],[0,0],[0,0], [1,0],[0,0],[0,0],[0,0], [0,0],[0,0],[0,0],[1,0], [0,0],[0,0],[1,0],[0,0]]]
"#;
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.representations.len(), 2);
        for r in &c.representations {
            assert!(r.build().unwrap().is_linear());
        }
        let bad = text.replace("\"X_odd\"", "\"Y\"");
        let err = ExperimentConfig::parse(&bad).unwrap_err();
        assert!(matches!(err, SptError::Config { ref path, .. } if path == "representations[0]"), "{err}");
    }
}
