//! Domain types shared by every solver: the game configuration, the two
//! halves of a strategy profile, and the feasibility predicates for them.
//!
//! A profile is the pair `(u, m)`. `u` holds one learning action per player,
//! each inside the common coordinate box `[lo, hi]^d`. `m` is a dense `N x N`
//! link-weight matrix with zero diagonal whose row `i` is player `i`'s
//! outgoing weights: every entry in `[0, 1]`, row sum equal to the budget.

use nalgebra::{DMatrix, DVector};

use crate::commutative::{AdmmSettings, BrdSettings};
use crate::error::{Error, Result};
use crate::losses::LossSpec;

/// Default tolerance for budget and box checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionBox {
    pub lo: f64,
    pub hi: f64,
}

impl Default for ActionBox {
    fn default() -> Self {
        Self { lo: -10.0, hi: 10.0 }
    }
}

impl ActionBox {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::DegenerateBox { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        v.map(|x| self.clamp(x))
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        v.iter().all(|&x| x >= self.lo - tol && x <= self.hi + tol)
    }
}

/// Outer-loop and feasibility settings for the commutative solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub brd: BrdSettings,
    pub admm: AdmmSettings,
    /// Stop the alternating outer loop once a full round moves the potential by less than this.
    pub outer_tol: f64,
    pub outer_max_iters: usize,
    pub feasibility_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            brd: BrdSettings::default(),
            admm: AdmmSettings::default(),
            outer_tol: 1e-6,
            outer_max_iters: 100,
            feasibility_tol: FEASIBILITY_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GameConfig {
    pub dim: usize,
    /// Per-player weight on the local learning loss.
    pub alpha: Vec<f64>,
    /// Per-player link budget.
    pub budget: Vec<f64>,
    pub action_box: ActionBox,
    /// Undirected-network mode: `m[i][j] == m[j][i]`.
    pub symmetric: bool,
    pub losses: Vec<LossSpec>,
    pub seed: u64,
    pub solver: SolverSettings,
}

impl GameConfig {
    /// Config with default box and solver settings; budgets and weights are per player.
    pub fn new(losses: Vec<LossSpec>, alpha: Vec<f64>, budget: Vec<f64>, symmetric: bool) -> Result<Self> {
        let dim = losses.first().map(LossSpec::dim).unwrap_or(1);
        let config = Self {
            dim,
            alpha,
            budget,
            action_box: ActionBox::default(),
            symmetric,
            losses,
            seed: 0,
            solver: SolverSettings::default(),
        };
        validate_config(&config)?;
        Ok(config)
    }

    #[inline]
    pub fn n_players(&self) -> usize {
        self.alpha.len()
    }

    pub fn check_player(&self, i: usize) -> Result<()> {
        if i >= self.n_players() {
            return Err(Error::IndexOutOfRange { index: i, n_players: self.n_players() });
        }
        Ok(())
    }
}

pub fn validate_config(config: &GameConfig) -> Result<()> {
    let n = config.alpha.len();
    if n < 2 {
        return Err(Error::TooFewPlayers(n));
    }
    if config.budget.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: config.budget.len() });
    }
    if config.losses.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: config.losses.len() });
    }
    if config.dim == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    ActionBox::new(config.action_box.lo, config.action_box.hi)?;
    let max = (n - 1) as f64;
    for (player, &budget) in config.budget.iter().enumerate() {
        if !(budget > 0.0 && budget <= max) {
            return Err(Error::BudgetInfeasible { player, budget, max });
        }
    }
    if let Some(a) = config.alpha.iter().find(|a| !(**a >= 0.0) || !a.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha entries must be finite and nonnegative, got {a}")));
    }
    for loss in &config.losses {
        if loss.dim() != config.dim {
            return Err(Error::DimensionMismatch { expected: config.dim, found: loss.dim() });
        }
    }
    let s = &config.solver;
    if !(s.outer_tol > 0.0) || s.outer_max_iters == 0 || !(s.feasibility_tol > 0.0) {
        return Err(Error::InvalidConfig("outer tolerance, iteration cap and feasibility tolerance must be positive".into()));
    }
    s.brd.validate()?;
    s.admm.validate()?;
    Ok(())
}

/// Squared Euclidean distance between two learning actions.
pub fn disagreement(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Membership test for the budget set `{m in [0,1]^(N-1) : sum m = beta}`.
pub fn row_feasible(m_row: &[f64], beta: f64, tol: f64) -> bool {
    let in_box = m_row.iter().all(|&w| w >= -tol && w <= 1.0 + tol);
    in_box && (m_row.iter().sum::<f64>() - beta).abs() <= tol
}

/// Indices `j != i` in ascending order; the layout of every `(N-1)`-length row.
pub fn others(i: usize, n: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |&j| j != i)
}

/// Position of player `j` inside player `i`'s `(N-1)`-length row.
#[inline]
pub fn compact_index(i: usize, j: usize) -> usize {
    debug_assert_ne!(i, j);
    if j < i { j } else { j - 1 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningProfile {
    rows: Vec<DVector<f64>>,
}

impl LearningProfile {
    pub fn new(rows: Vec<DVector<f64>>, action_box: &ActionBox, tol: f64) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
            }
            if !action_box.contains(r, tol) {
                return Err(Error::InfeasibleInput(format!("learning action of player {i} leaves the action box")));
            }
        }
        Ok(Self { rows })
    }

    /// Skips the box check; used for intermediate iterates and unconstrained solves.
    pub fn from_rows(rows: Vec<DVector<f64>>) -> Self {
        Self { rows }
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self { rows: vec![DVector::zeros(dim); n] }
    }

    #[inline]
    pub fn n_players(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.rows.first().map(|r| r.len()).unwrap_or(0)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &DVector<f64> {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[DVector<f64>] {
        &self.rows
    }

    pub fn set_row(&mut self, i: usize, u: DVector<f64>) {
        self.rows[i] = u;
    }

    /// Squared distance between players `i` and `j`.
    pub fn disagreement(&self, i: usize, j: usize) -> f64 {
        (&self.rows[i] - &self.rows[j]).norm_squared()
    }

    /// Largest coordinate change between two profiles.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }

    pub fn flatten(&self) -> DVector<f64> {
        let d = self.dim();
        DVector::from_fn(self.n_players() * d, |k, _| self.rows[k / d][k % d])
    }

    pub fn unflatten(flat: &DVector<f64>, n: usize, dim: usize) -> Self {
        Self { rows: (0..n).map(|i| flat.rows(i * dim, dim).into_owned()).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    m: DMatrix<f64>,
}

impl NetworkWeights {
    /// Validates zero diagonal, the `[0,1]` box, row budgets and (optionally) symmetry.
    pub fn new(m: DMatrix<f64>, budgets: &[f64], symmetric: bool, tol: f64) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n || budgets.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: budgets.len().min(m.ncols()) });
        }
        let net = Self { m };
        for i in 0..n {
            if net.m[(i, i)] != 0.0 {
                return Err(Error::InfeasibleInput(format!("nonzero self-link weight for player {i}")));
            }
            if !row_feasible(&net.row(i), budgets[i], tol) {
                return Err(Error::InfeasibleInput(format!("row {i} violates its budget {}", budgets[i])));
            }
        }
        if symmetric {
            let asym = net.asymmetry();
            if asym > tol {
                return Err(Error::NotSymmetric(asym));
            }
        }
        Ok(net)
    }

    /// Wraps a matrix without any check. The diagonal is still forced to zero.
    pub fn from_matrix(mut m: DMatrix<f64>) -> Self {
        m.fill_diagonal(0.0);
        Self { m }
    }

    /// Every player spreads its budget evenly over the others.
    pub fn uniform(budgets: &[f64]) -> Self {
        let n = budgets.len();
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { budgets[i] / (n - 1) as f64 });
        Self { m }
    }

    /// Rebuilds the dense matrix from compact `(N-1)`-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            for (k, j) in others(i, n).enumerate() {
                m[(i, j)] = row[k];
            }
        }
        Self { m }
    }

    #[inline]
    pub fn n_players(&self) -> usize {
        self.m.nrows()
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Player `i`'s outgoing weights without the self entry.
    pub fn row(&self, i: usize) -> Vec<f64> {
        others(i, self.n_players()).map(|j| self.m[(i, j)]).collect()
    }

    pub fn set_row(&mut self, i: usize, row: &[f64]) {
        for (k, j) in others(i, self.n_players()).enumerate() {
            self.m[(i, j)] = row[k];
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.m.row(i).sum()
    }

    pub fn asymmetry(&self) -> f64 {
        let n = self.n_players();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    /// Number of off-diagonal entries at most `tol`.
    pub fn zero_count(&self, tol: f64) -> usize {
        let n = self.n_players();
        (0..n).flat_map(|i| others(i, n).map(move |j| (i, j))).filter(|&(i, j)| self.m[(i, j)].abs() <= tol).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    pub learning: LearningProfile,
    pub network: NetworkWeights,
}

impl StrategyProfile {
    pub fn new(learning: LearningProfile, network: NetworkWeights) -> Result<Self> {
        if learning.n_players() != network.n_players() {
            return Err(Error::DimensionMismatch { expected: learning.n_players(), found: network.n_players() });
        }
        Ok(Self { learning, network })
    }

    #[inline]
    pub fn n_players(&self) -> usize {
        self.learning.n_players()
    }

    /// Checks box, budget and (in symmetric mode) symmetry constraints jointly.
    pub fn check_feasible(&self, config: &GameConfig, tol: f64) -> Result<()> {
        if self.n_players() != config.n_players() {
            return Err(Error::DimensionMismatch { expected: config.n_players(), found: self.n_players() });
        }
        LearningProfile::new(self.learning.rows.clone(), &config.action_box, tol)?;
        NetworkWeights::new(self.network.m.clone(), &config.budget, config.symmetric, tol)?;
        Ok(())
    }
}
