//! Player costs, the potential, welfare, and payoff gradients.
//!
//! Player `i` pays
//!
//! ```text
//! J_i(u, m) = alpha_i l_i(u_i) + sum_{j != i} m_ij |u_i - u_j|^2
//! ```
//!
//! and, on undirected networks, every cost gradient is a fixed rescaling of
//! the gradient of
//!
//! ```text
//! Phi(u, m) = sum_i alpha_i l_i(u_i) + 1/2 sum_i sum_{j != i} m_ij |u_i - u_j|^2
//! ```
//!
//! (weight 1 on the learning block, 2 on the link block). All equilibrium
//! work uses the reduced loss form; constants only shift reported values.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{others, GameConfig, LearningProfile, NetworkWeights, StrategyProfile};

/// Gradient of one player's objective with respect to its own strategy block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGradient {
    pub learning: DVector<f64>,
    /// One entry per other player, ascending index.
    pub network: Vec<f64>,
}

impl BlockGradient {
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let a = (&self.learning - &other.learning).amax();
        let b = self.network.iter().zip(&other.network).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        a.max(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialReport {
    pub phi: f64,
    pub per_player_cost: Vec<f64>,
    pub welfare: f64,
    pub exact: bool,
}

fn check_shape(s: &StrategyProfile, config: &GameConfig) -> Result<()> {
    let n = config.n_players();
    if s.n_players() != n || s.network.n_players() != n {
        return Err(Error::DimensionMismatch { expected: n, found: s.n_players() });
    }
    if s.learning.dim() != config.dim {
        return Err(Error::DimensionMismatch { expected: config.dim, found: s.learning.dim() });
    }
    Ok(())
}

fn weighted_loss(config: &GameConfig, i: usize, u: &DVector<f64>, exact: bool) -> Result<f64> {
    let a = config.alpha[i];
    if a == 0.0 {
        return Ok(0.0);
    }
    Ok(a * config.losses[i].value(u, exact)?)
}

fn player_cost_with(s: &StrategyProfile, i: usize, config: &GameConfig, exact: bool) -> Result<f64> {
    let n = config.n_players();
    let mut cost = weighted_loss(config, i, s.learning.row(i), exact)?;
    for j in others(i, n) {
        cost += s.network.weight(i, j) * s.learning.disagreement(i, j);
    }
    Ok(cost)
}

pub fn player_cost(s: &StrategyProfile, i: usize, config: &GameConfig) -> Result<f64> {
    config.check_player(i)?;
    check_shape(s, config)?;
    player_cost_with(s, i, config, false)
}

fn potential_with(s: &StrategyProfile, config: &GameConfig, exact: bool) -> Result<f64> {
    let n = config.n_players();
    let mut phi = 0.0;
    for i in 0..n {
        phi += weighted_loss(config, i, s.learning.row(i), exact)?;
    }
    for i in 0..n {
        for j in others(i, n) {
            phi += 0.5 * s.network.weight(i, j) * s.learning.disagreement(i, j);
        }
    }
    Ok(phi)
}

pub fn potential(s: &StrategyProfile, config: &GameConfig) -> Result<f64> {
    check_shape(s, config)?;
    potential_with(s, config, false)
}

/// `-sum_i alpha_i l_i(u_i)` with the reduced loss form.
pub fn social_welfare(u: &LearningProfile, config: &GameConfig) -> Result<f64> {
    social_welfare_with(u, config, false)
}

pub fn social_welfare_with(u: &LearningProfile, config: &GameConfig, exact: bool) -> Result<f64> {
    if u.n_players() != config.n_players() {
        return Err(Error::DimensionMismatch { expected: config.n_players(), found: u.n_players() });
    }
    let mut total = 0.0;
    for i in 0..config.n_players() {
        total += weighted_loss(config, i, u.row(i), exact)?;
    }
    Ok(-total)
}

pub fn report(s: &StrategyProfile, config: &GameConfig, exact: bool) -> Result<PotentialReport> {
    check_shape(s, config)?;
    let per_player_cost = (0..config.n_players()).map(|i| player_cost_with(s, i, config, exact)).collect::<Result<Vec<_>>>()?;
    Ok(PotentialReport {
        phi: potential_with(s, config, exact)?,
        per_player_cost,
        welfare: social_welfare_with(&s.learning, config, exact)?,
        exact,
    })
}

/// `v_i = (grad_{u_i} J_i, grad_{m_i} J_i)` for every player.
pub fn payoff_gradient(s: &StrategyProfile, config: &GameConfig) -> Result<Vec<BlockGradient>> {
    check_shape(s, config)?;
    (0..config.n_players()).map(|i| player_gradient(&s.learning, &s.network, i, config)).collect()
}

pub(crate) fn player_gradient(u: &LearningProfile, m: &NetworkWeights, i: usize, config: &GameConfig) -> Result<BlockGradient> {
    let n = config.n_players();
    let ui = u.row(i);
    let mut learning = if config.alpha[i] == 0.0 {
        DVector::zeros(config.dim)
    } else {
        config.losses[i].gradient(ui)? * config.alpha[i]
    };
    let mut network = Vec::with_capacity(n - 1);
    for j in others(i, n) {
        let diff = ui - u.row(j);
        learning += &diff * (2.0 * m.weight(i, j));
        network.push(diff.norm_squared());
    }
    Ok(BlockGradient { learning, network })
}

/// Gradient of the potential with every `m_ij` treated as an independent variable.
pub fn potential_gradient(s: &StrategyProfile, config: &GameConfig) -> Result<Vec<BlockGradient>> {
    check_shape(s, config)?;
    let n = config.n_players();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let ui = s.learning.row(i);
        let mut learning = if config.alpha[i] == 0.0 {
            DVector::zeros(config.dim)
        } else {
            config.losses[i].gradient(ui)? * config.alpha[i]
        };
        let mut network = Vec::with_capacity(n - 1);
        for j in others(i, n) {
            let diff = ui - s.learning.row(j);
            // u_i appears in both the (i, j) and (j, i) disagreement terms.
            learning += &diff * (s.network.weight(i, j) + s.network.weight(j, i));
            network.push(0.5 * diff.norm_squared());
        }
        out.push(BlockGradient { learning, network });
    }
    Ok(out)
}

/// Max-norm of `grad_{s_i} J_i - W_i grad_{s_i} Phi` with `W_i = diag(1_d, 2 * 1_{N-1})`.
pub fn potential_identity_residual(s: &StrategyProfile, i: usize, config: &GameConfig) -> Result<f64> {
    config.check_player(i)?;
    check_shape(s, config)?;
    let asym = s.network.asymmetry();
    if asym > config.solver.feasibility_tol {
        return Err(Error::NotSymmetric(asym));
    }
    let cost = player_gradient(&s.learning, &s.network, i, config)?;
    let pot = &potential_gradient(s, config)?[i];
    let weighted = BlockGradient {
        learning: pot.learning.clone(),
        network: pot.network.iter().map(|g| 2.0 * g).collect(),
    };
    Ok(cost.max_abs_diff(&weighted))
}

/// Stacks `(u_i, m_i)` for every player into one vector.
pub fn flatten_profile(s: &StrategyProfile) -> DVector<f64> {
    let n = s.n_players();
    let d = s.learning.dim();
    let mut out = Vec::with_capacity(n * (d + n - 1));
    for i in 0..n {
        out.extend(s.learning.row(i).iter());
        out.extend(s.network.row(i));
    }
    DVector::from_vec(out)
}

pub fn unflatten_profile(flat: &DVector<f64>, n: usize, d: usize) -> StrategyProfile {
    let block = d + n - 1;
    let mut rows = Vec::with_capacity(n);
    let mut net_rows = Vec::with_capacity(n);
    for i in 0..n {
        let base = i * block;
        rows.push(flat.rows(base, d).into_owned());
        net_rows.push(flat.rows(base + d, n - 1).iter().copied().collect::<Vec<_>>());
    }
    StrategyProfile { learning: LearningProfile::from_rows(rows), network: NetworkWeights::from_rows(&net_rows) }
}

fn flatten_gradient(v: &[BlockGradient]) -> DVector<f64> {
    let mut out = Vec::new();
    for b in v {
        out.extend(b.learning.iter());
        out.extend(&b.network);
    }
    DVector::from_vec(out)
}

/// `<v(s') - v(s), s' - s>` over all players' blocks.
pub fn monotonicity_probe(s: &StrategyProfile, s_prime: &StrategyProfile, config: &GameConfig) -> Result<f64> {
    let v = flatten_gradient(&payoff_gradient(s, config)?);
    let v_prime = flatten_gradient(&payoff_gradient(s_prime, config)?);
    Ok((v_prime - v).dot(&(flatten_profile(s_prime) - flatten_profile(s))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianProbe {
    pub min_eigenvalue: f64,
    pub is_pd: bool,
}

/// Step for the central differences in the Hessian probe.
pub const HESSIAN_STEP: f64 = 1e-5;
/// Eigenvalues below this count as zero; finite differences leave noise of this order.
pub const PD_THRESHOLD: f64 = 1e-7;

/// Symmetric part of the Jacobian of `field` at `x`, by central differences.
pub fn symmetric_jacobian<F>(field: F, x: &DVector<f64>, step: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut up = x.clone();
        let mut dn = x.clone();
        up[k] += step;
        dn[k] -= step;
        let col = (field(&up) - field(&dn)) / (2.0 * step);
        jac.set_column(k, &col);
    }
    (&jac + jac.transpose()) * 0.5
}

pub fn min_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    sym.clone().symmetric_eigenvalues().min()
}

/// Smallest eigenvalue of the game Hessian `H^G`, whose `(i, j)` block is
/// `1/2 d^2 J_i / ds_j ds_i + 1/2 (d^2 J_j / ds_i ds_j)^T`, assembled from
/// central differences of the payoff gradient.
pub fn game_hessian_pd_probe(s: &StrategyProfile, config: &GameConfig) -> Result<HessianProbe> {
    check_shape(s, config)?;
    let n = config.n_players();
    let d = config.dim;
    let x = flatten_profile(s);
    let field = |flat: &DVector<f64>| {
        let p = unflatten_profile(flat, n, d);
        let v = (0..n)
            .map(|i| player_gradient(&p.learning, &p.network, i, config))
            .collect::<Result<Vec<_>>>()
            .expect("shape checked above");
        flatten_gradient(&v)
    };
    let h = symmetric_jacobian(field, &x, HESSIAN_STEP);
    let min_eig = min_eigenvalue(&h);
    Ok(HessianProbe { min_eigenvalue: min_eig, is_pd: min_eig > PD_THRESHOLD })
}
