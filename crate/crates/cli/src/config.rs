//! Experiment configuration: a TOML file with one table per concern.
//!
//! Every table rejects unknown keys so that typos fail loudly instead of
//! silently falling back to a default.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use netgame::commutative::{BrdSettings, UpdateOrder};
use netgame::data::{binarize_labels, load_csv, partition, synth_dataset, synth_generate, Dataset, PartitionMode, PartitionSpec, SynthModel, Threshold};
use netgame::omd::{BregmanGeometry, NoiseModel, OmdSettings, StepSchedule};
use netgame::{ActionBox, GameConfig, LogisticLoss, LossSpec, SolverSettings};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

/// Anything that prevents a run from starting; maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<netgame::Error> for ConfigError {
    fn from(e: netgame::Error) -> Self {
        ConfigError(e.to_string())
    }
}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// A scalar applied to every node, or one value per node.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PerNode {
    All(f64),
    Each(Vec<f64>),
}

impl PerNode {
    fn expand(&self, n: usize, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            PerNode::All(v) => Ok(vec![*v; n]),
            PerNode::Each(v) if v.len() == n => Ok(v.clone()),
            PerNode::Each(v) => Err(bad(format!("game.{key} lists {} values for {n} nodes", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Quadratic,
    Logistic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub n_nodes: usize,
    #[serde(default = "one")]
    pub alpha: PerNode,
    pub budget: PerNode,
    #[serde(default)]
    pub symmetric: bool,
    #[serde(default = "quadratic")]
    pub loss: LossKind,
    /// `[lo, hi]` bounds on every learning coordinate.
    pub action_box: Option<[f64; 2]>,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> PerNode {
    PerNode::All(1.0)
}

fn quadratic() -> LossKind {
    LossKind::Quadratic
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synth,
    Csv,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    Unbiased,
    Biased,
}

/// `"median"` or a numeric cut-off.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BinarizeAt {
    Value(f64),
    Named(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub source: Source,
    #[serde(default = "unbiased")]
    pub partition: PartitionKind,
    /// Explicit rows per node; defaults to an equal split.
    pub sizes: Option<Vec<usize>>,
    /// Append a constant feature.
    #[serde(default)]
    pub intercept: bool,
    /// Seed for sampling and shuffling; defaults to `game.seed`.
    pub seed: Option<u64>,

    // synthetic source
    pub rows_per_node: Option<usize>,
    pub weights: Option<Vec<f64>>,
    #[serde(default = "half")]
    pub noise_sigma: f64,
    /// Non-zero shifts node `i`'s first weight by `i * shift` and samples
    /// each node separately instead of partitioning a pooled set.
    #[serde(default)]
    pub shift: f64,

    // csv source
    pub path: Option<PathBuf>,
    pub features: Option<Vec<String>>,
    pub label: Option<String>,
    #[serde(default = "yes")]
    pub normalize: bool,
    pub binarize: Option<BinarizeAt>,
}

fn unbiased() -> PartitionKind {
    PartitionKind::Unbiased
}

fn half() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrdSection {
    pub order: Option<String>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmmSection {
    pub rho: Option<f64>,
    pub primal_tol: Option<f64>,
    pub dual_tol: Option<f64>,
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterSection {
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub feasibility_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmdSection {
    /// `"euclidean"` or `"pnorm"`.
    pub geometry: Option<String>,
    pub p: Option<f64>,
    pub gamma0: Option<f64>,
    pub exponent: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub rounds: Option<usize>,
    pub tail_fraction: Option<f64>,
    pub record_every: Option<usize>,
    pub step_tol: Option<f64>,
    /// Profile CSV (as written by any run) to measure distance against.
    pub reference: Option<PathBuf>,
    /// Profile CSV to start from; defaults to the origin with uniform links.
    pub start: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum LinkState {
    Connected,
    Isolated,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamEventSpec {
    pub step: usize,
    pub link: LinkState,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamingSection {
    pub focal: usize,
    #[serde(default = "connected")]
    pub initial: LinkState,
    #[serde(default)]
    pub events: Vec<StreamEventSpec>,
}

fn connected() -> LinkState {
    LinkState::Connected
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WelfareSection {
    pub seeds: usize,
    /// First seed of the sweep; defaults to `game.seed`.
    pub first_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSection,
    pub data: DataSection,
    #[serde(default)]
    pub brd: BrdSection,
    #[serde(default)]
    pub admm: AdmmSection,
    #[serde(default)]
    pub outer: OuterSection,
    #[serde(default)]
    pub omd: OmdSection,
    pub streaming: Option<StreamingSection>,
    pub welfare: Option<WelfareSection>,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let mut config: ExperimentConfig = toml::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if config.game.n_nodes < 2 {
            return Err(bad(format!("game.n_nodes must be at least 2, got {}", config.game.n_nodes)));
        }
        Ok(config)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self, cli_out: Option<&Path>) -> PathBuf {
        match (cli_out, &self.output.dir) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(p)) => self.resolve(p),
            (None, None) => self.base_dir.join("out"),
        }
    }

    fn data_seed(&self) -> u64 {
        self.data.seed.unwrap_or(self.game.seed)
    }

    /// Per-node data sets.
    pub fn datasets(&self) -> Result<Vec<Dataset>, ConfigError> {
        let n = self.game.n_nodes;
        let d = &self.data;
        let seed = self.data_seed();
        let mode = match d.partition {
            PartitionKind::Unbiased => PartitionMode::Unbiased,
            PartitionKind::Biased => PartitionMode::Biased,
        };
        let spec = PartitionSpec { sizes: d.sizes.clone(), ..PartitionSpec::equal(n, mode, seed) };
        let mut nodes = match d.source {
            Source::Synth => {
                if d.path.is_some() || d.features.is_some() || d.label.is_some() {
                    return Err(bad("data.path, data.features and data.label only apply to source = \"csv\""));
                }
                let rows = d.rows_per_node.ok_or_else(|| bad("synthetic data needs data.rows_per_node"))?;
                let w = DVector::from_vec(d.weights.clone().ok_or_else(|| bad("synthetic data needs data.weights"))?);
                if rows == 0 || w.is_empty() {
                    return Err(bad("data.rows_per_node and data.weights must be nonempty"));
                }
                if d.shift != 0.0 {
                    if d.sizes.is_some() {
                        return Err(bad("data.sizes cannot be combined with a per-node shift"));
                    }
                    synth_generate(n, rows, &SynthModel::PerNodeShift { base: w, delta: d.shift }, d.noise_sigma, seed)?
                } else {
                    let total = d.sizes.as_ref().map_or(n * rows, |s| s.iter().sum());
                    let pooled = synth_dataset(total, &w, d.noise_sigma, &mut ChaCha8Rng::seed_from_u64(seed), format!("synthetic seed {seed}"))?;
                    partition(&pooled, &spec)?
                }
            }
            Source::Csv => {
                if d.rows_per_node.is_some() || d.weights.is_some() {
                    return Err(bad("data.rows_per_node and data.weights only apply to source = \"synth\""));
                }
                let path = self.resolve(d.path.as_deref().ok_or_else(|| bad("csv data needs data.path"))?);
                let features = d.features.as_ref().ok_or_else(|| bad("csv data needs data.features"))?;
                let label = d.label.as_deref().ok_or_else(|| bad("csv data needs data.label"))?;
                let columns: Vec<&str> = features.iter().map(String::as_str).collect();
                let (pooled, _) = load_csv(&path, &columns, label, d.normalize)?;
                partition(&pooled, &spec)?
            }
        };
        if let Some(at) = &d.binarize {
            let threshold = match at {
                BinarizeAt::Value(v) => Threshold::Value(*v),
                BinarizeAt::Named(s) if s == "median" => Threshold::Median,
                BinarizeAt::Named(s) => return Err(bad(format!("data.binarize must be \"median\" or a number, got {s:?}"))),
            };
            nodes = nodes.iter().map(|ds| binarize_labels(ds, threshold)).collect();
        }
        if d.intercept {
            nodes = nodes.iter().map(Dataset::with_intercept).collect();
        }
        Ok(nodes)
    }

    pub fn solver_settings(&self) -> Result<SolverSettings, ConfigError> {
        let mut s = SolverSettings::default();
        if let Some(order) = &self.brd.order {
            s.brd.order = match order.as_str() {
                "sequential" => UpdateOrder::Sequential,
                "simultaneous" => UpdateOrder::Simultaneous,
                other => return Err(bad(format!("brd.order must be \"sequential\" or \"simultaneous\", got {other:?}"))),
            };
        }
        let BrdSettings { tol, max_iters, .. } = &mut s.brd;
        set(tol, self.brd.tol);
        set(max_iters, self.brd.max_iters);
        set(&mut s.admm.rho, self.admm.rho);
        set(&mut s.admm.primal_tol, self.admm.primal_tol);
        set(&mut s.admm.dual_tol, self.admm.dual_tol);
        set(&mut s.admm.max_iters, self.admm.max_iters);
        set(&mut s.outer_tol, self.outer.tol);
        set(&mut s.outer_max_iters, self.outer.max_iters);
        set(&mut s.feasibility_tol, self.outer.feasibility_tol);
        s.brd.validate()?;
        s.admm.validate()?;
        if !(s.outer_tol > 0.0 && s.feasibility_tol > 0.0) || s.outer_max_iters == 0 {
            return Err(bad("outer tolerances and iteration cap must be positive"));
        }
        Ok(s)
    }

    /// The game built from the data sets.
    pub fn game_config(&self, datasets: &[Dataset]) -> Result<GameConfig, ConfigError> {
        let n = self.game.n_nodes;
        let losses = datasets
            .iter()
            .map(|ds| -> Result<LossSpec, ConfigError> {
                Ok(match self.game.loss {
                    LossKind::Quadratic => ds.to_quadratic_loss()?.into(),
                    LossKind::Logistic => {
                        if ds.labels.iter().any(|&y| y != 1.0 && y != -1.0) {
                            return Err(bad("logistic loss needs labels in {-1, +1}; set data.binarize"));
                        }
                        LossSpec::Logistic(LogisticLoss::new(ds.features.clone(), ds.labels.clone())?)
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut config = GameConfig::new(losses, self.game.alpha.expand(n, "alpha")?, self.game.budget.expand(n, "budget")?, self.game.symmetric)?;
        if let Some([lo, hi]) = self.game.action_box {
            config.action_box = ActionBox::new(lo, hi)?;
        }
        config.seed = self.game.seed;
        config.solver = self.solver_settings()?;
        netgame::model::validate_config(&config)?;
        Ok(config)
    }

    pub fn omd_settings(&self) -> Result<OmdSettings, ConfigError> {
        let o = &self.omd;
        let mut s = OmdSettings::default();
        s.geometry = match (o.geometry.as_deref(), o.p) {
            (None | Some("euclidean"), None) => BregmanGeometry::Euclidean,
            (Some("pnorm"), Some(p)) => BregmanGeometry::pnorm(p)?,
            (Some("pnorm"), None) => return Err(bad("omd.geometry = \"pnorm\" needs omd.p")),
            (None | Some("euclidean"), Some(_)) => return Err(bad("omd.p only applies to geometry = \"pnorm\"")),
            (Some(other), _) => return Err(bad(format!("omd.geometry must be \"euclidean\" or \"pnorm\", got {other:?}"))),
        };
        s.schedule = StepSchedule::new(o.gamma0.unwrap_or(s.schedule.gamma0), o.exponent.unwrap_or(s.schedule.exponent))?;
        if let Some(sigma) = o.noise_sigma {
            s.noise = if sigma == 0.0 { NoiseModel::None } else { NoiseModel::gaussian(sigma)? };
        }
        set(&mut s.rounds, o.rounds);
        set(&mut s.tail_fraction, o.tail_fraction);
        set(&mut s.record_every, o.record_every);
        set(&mut s.step_tol, o.step_tol);
        s.validate()?;
        Ok(s)
    }

    /// Applies a `--seed` override to the game and, unless pinned, the data.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(seed) = seed {
            self.game.seed = seed;
        }
        self
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
