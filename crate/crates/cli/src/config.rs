//! Run configuration: one TOML file with a section per subcommand, then
//! `--set section.key=value` and `--seed` overrides applied on top.
//!
//! Every section is optional and every field has a default, so an empty
//! file (or no file) is a valid configuration.

use std::path::{Path, PathBuf};

use cent_core::dataio::{ClassParams, MarkovSpec, SyntheticSpec};
use cent_core::eval::Permutation;
use cent_core::forest::{ForestConfig, SplitCriterion};
use cent_core::infotheory::{CentMode, RangeMode, DEFAULT_BINS, DPI_SLACK};
use cent_core::net::{ReferenceVariant, SnapshotPoint, TrainConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// Problems with the configuration or the input paths it names. These exit
/// with status 2, like library contract violations.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("bad override `{0}`: expected section.key=value")]
    Override(String),
    #[error("{field} is required")]
    MissingField { field: String },
    #[error("{field}: {} does not exist", path.display())]
    MissingInput { field: String, path: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: SynthSection,
    pub train: TrainSection,
    pub extract: ExtractSection,
    pub evaluate: EvaluateSection,
    pub permute: PermuteSection,
    pub theory: TheorySection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Smooth vs textured images.
    TwoClass,
    /// Two classes from one generator.
    Null,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub preset: Preset,
    pub extent: usize,
    pub dims: usize,
    pub samples_per_class: usize,
    pub seed: u64,
    /// Replaces the preset's class generators when non-empty.
    pub classes: Vec<ClassParams>,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            preset: Preset::TwoClass,
            extent: 32,
            dims: 2,
            samples_per_class: 50,
            seed: 0,
            classes: Vec::new(),
        }
    }
}

impl SynthSection {
    pub fn spec(&self) -> SyntheticSpec {
        let mut spec = match self.preset {
            Preset::TwoClass => {
                SyntheticSpec::two_class(self.extent, self.samples_per_class, self.seed)
            }
            Preset::Null => SyntheticSpec::null(self.extent, self.samples_per_class, self.seed),
        };
        spec.dims = self.dims;
        if !self.classes.is_empty() {
            spec.classes = self.classes.clone();
        }
        spec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    /// Two 3x3 conv blocks on square single-channel images.
    #[serde(rename = "desk-2d")]
    Desk2d,
    /// Two 2x2x2 conv blocks on 64^3 volumes.
    #[serde(rename = "reference-3d")]
    Reference3d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub manifest: Option<PathBuf>,
    pub architecture: Architecture,
    /// Only read for `reference-3d`.
    pub variant: ReferenceVariant,
    /// Seeds both weight initialization and batch shuffling.
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub shuffle: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            manifest: None,
            architecture: Architecture::Desk2d,
            variant: ReferenceVariant::PoolReduces,
            seed: t.seed,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            shuffle: t.shuffle,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            shuffle: self.shuffle,
        }
    }
}

/// Where activations come from: a checkpoint run over a manifest, or an
/// exported activation dump.
#[derive(Debug, Clone, Copy)]
pub struct SourcePaths<'a> {
    pub section: &'static str,
    pub checkpoint: Option<&'a Path>,
    pub manifest: Option<&'a Path>,
    pub dump: Option<&'a Path>,
    pub point: SnapshotPoint,
}

impl SourcePaths<'_> {
    pub fn is_set(&self) -> bool {
        self.checkpoint.is_some() || self.manifest.is_some() || self.dump.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractSection {
    pub checkpoint: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub dump: Option<PathBuf>,
    pub mode: CentMode,
    pub bins: usize,
    pub range: RangeMode,
    pub point: SnapshotPoint,
    /// Also write the collected activations to `<out>/dump`.
    pub export_dump: bool,
}

impl Default for ExtractSection {
    fn default() -> Self {
        ExtractSection {
            checkpoint: None,
            manifest: None,
            dump: None,
            mode: CentMode::PerLayer,
            bins: DEFAULT_BINS,
            range: RangeMode::PerSampleMinMax,
            point: SnapshotPoint::PostRelu,
            export_dump: false,
        }
    }
}

impl ExtractSection {
    pub fn source(&self) -> SourcePaths<'_> {
        SourcePaths {
            section: "extract",
            checkpoint: self.checkpoint.as_deref(),
            manifest: self.manifest.as_deref(),
            dump: self.dump.as_deref(),
            point: self.point,
        }
    }
}

/// Forest hyperparameters; the seed lives in the enclosing section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub tree_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mtry: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub criterion: SplitCriterion,
}

impl Default for ForestSection {
    fn default() -> Self {
        let f = ForestConfig::default();
        ForestSection {
            tree_count: f.tree_count,
            mtry: f.mtry,
            max_depth: f.max_depth,
            min_leaf: f.min_leaf,
            bootstrap: f.bootstrap,
            criterion: f.criterion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub features: Option<PathBuf>,
    pub k: usize,
    pub stratified: bool,
    /// Seeds both the fold plan and the forest.
    pub seed: u64,
    pub forest: ForestSection,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            features: None,
            k: 5,
            stratified: true,
            seed: 0,
            forest: ForestSection::default(),
        }
    }
}

impl EvaluateSection {
    pub fn forest_config(&self) -> ForestConfig {
        let f = &self.forest;
        ForestConfig {
            tree_count: f.tree_count,
            mtry: f.mtry,
            max_depth: f.max_depth,
            min_leaf: f.min_leaf,
            seed: self.seed,
            bootstrap: f.bootstrap,
            criterion: f.criterion,
        }
    }
}

/// Permutation control; features, folds and forest come from `[evaluate]`
/// so that the identity permutation reproduces `evaluate` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PermuteSection {
    pub permutation: Permutation,
}

impl Default for PermuteSection {
    fn default() -> Self {
        PermuteSection {
            permutation: Permutation::Seeded(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySection {
    pub checkpoint: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub dump: Option<PathBuf>,
    pub point: SnapshotPoint,
    pub bins: usize,
    pub partition_layer: usize,
    /// `None` uses every filter of `partition_layer`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition_filter: Option<usize>,
    pub informative: Vec<usize>,
    pub uninformative: Vec<usize>,
    pub dpi_slack: f64,
    pub markov: MarkovSpec,
}

impl Default for TheorySection {
    fn default() -> Self {
        TheorySection {
            checkpoint: None,
            manifest: None,
            dump: None,
            point: SnapshotPoint::PostRelu,
            bins: DEFAULT_BINS,
            partition_layer: 0,
            partition_filter: None,
            informative: vec![0],
            uninformative: vec![1],
            dpi_slack: DPI_SLACK,
            markov: MarkovSpec::default(),
        }
    }
}

impl TheorySection {
    pub fn source(&self) -> SourcePaths<'_> {
        SourcePaths {
            section: "theory",
            checkpoint: self.checkpoint.as_deref(),
            manifest: self.manifest.as_deref(),
            dump: self.dump.as_deref(),
            point: self.point,
        }
    }
}

/// Reads `path` (if any) into a raw table so overrides can be layered on
/// before the typed parse.
pub fn load_table(path: Option<&Path>) -> Result<Table, ConfigError> {
    let Some(path) = path else {
        return Ok(Table::new());
    };
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    text.parse::<Table>()
        .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))
}

/// Applies `section.key=value`. The value is read as a TOML literal when it
/// parses as one and as a bare string otherwise.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), ConfigError> {
    let bad = || ConfigError::Override(assignment.to_string());
    let (key, raw) = assignment.split_once('=').ok_or_else(bad)?;
    let path: Vec<&str> = key.trim().split('.').map(str::trim).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(bad());
    }
    set_path(table, &path, parse_value(raw.trim()))
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn set_path(table: &mut Table, path: &[&str], value: Value) -> Result<(), ConfigError> {
    let (last, parents) = path.split_last().expect("non-empty key path");
    let mut t = table;
    for (i, p) in parents.iter().enumerate() {
        t = t
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                ConfigError::Invalid(format!("`{}` is not a table", parents[..=i].join(".")))
            })?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

pub fn parse(table: Table) -> Result<RunConfig, ConfigError> {
    Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string().trim_end().to_string()))
}

pub fn to_toml(config: &RunConfig) -> String {
    toml::to_string(config).expect("run config serializes to TOML")
}
