use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("a game needs at least 2 players, got {0}")]
    TooFewPlayers(usize),

    #[error("budget {budget} of player {player} is outside (0, {max}]")]
    BudgetInfeasible { player: usize, budget: f64, max: f64 },

    #[error("degenerate action box [{lo}, {hi}]")]
    DegenerateBox { lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("player index {index} out of range for {n_players} players")]
    IndexOutOfRange { index: usize, n_players: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible input: {0}")]
    InfeasibleInput(String),

    #[error("network is not symmetric (max |m_ij - m_ji| = {0:e})")]
    NotSymmetric(f64),

    #[error("loss is not twice differentiable")]
    NonSmoothLoss,

    #[error("linear system is singular")]
    SingularSystem,

    #[error("{solver} did not converge within {iterations} iterations")]
    NoConvergence { solver: &'static str, iterations: usize },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("bound violated: {0}")]
    TheoremViolation(String),

    #[error("empty data set")]
    EmptyData,

    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("column {0:?} missing from header")]
    MissingColumn(String),

    #[error("no valid rows in {0}")]
    NoValidRows(String),

    #[error("{rows} rows cannot fill {nodes} nodes")]
    TooFewRows { rows: usize, nodes: usize },

    #[error("io error: {0}")]
    Io(String),
}
