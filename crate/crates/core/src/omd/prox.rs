use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::projected_gradient;
use crate::model::GameConfig;

use super::geometry::BregmanGeometry;
use super::projection::project_budget_box;

const PNORM_TOL: f64 = 1e-9;
const PNORM_MAX_ITERS: usize = 10_000;

/// One player's strategy `(u_i, m_i)` with the compact link row, or a
/// direction in that space.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyBlock {
    pub learning: DVector<f64>,
    pub network: Vec<f64>,
}

impl StrategyBlock {
    pub fn flatten(&self) -> DVector<f64> {
        DVector::from_iterator(self.learning.len() + self.network.len(), self.learning.iter().copied().chain(self.network.iter().copied()))
    }

    pub fn unflatten(flat: &DVector<f64>, dim: usize) -> Self {
        Self { learning: flat.rows(0, dim).into_owned(), network: flat.iter().skip(dim).copied().collect() }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { learning: &self.learning * factor, network: self.network.iter().map(|v| v * factor).collect() }
    }
}

/// Euclidean projection onto player `i`'s feasible set (box times budget set).
fn project_block(flat: &DVector<f64>, i: usize, config: &GameConfig) -> Result<DVector<f64>> {
    let d = config.dim;
    let learning = config.action_box.project(&flat.rows(0, d).into_owned());
    let row: Vec<f64> = flat.iter().skip(d).copied().collect();
    let network = project_budget_box(&row, config.budget[i], config.solver.feasibility_tol)
        .map_err(|_| Error::BudgetInfeasible { player: i, budget: config.budget[i], max: (config.n_players() - 1) as f64 })?;
    Ok(StrategyBlock { learning, network }.flatten())
}

/// `P_s(v) = argmin_{s' in S_i} <v, s - s'> + D(s', s)` for player `i`.
///
/// In the Euclidean geometry this is the projection of `s + v`. The p-norm
/// geometry solves the strictly convex subproblem by projected gradient.
pub fn prox_map(s: &StrategyBlock, v: &StrategyBlock, i: usize, geom: &BregmanGeometry, config: &GameConfig) -> Result<StrategyBlock> {
    config.check_player(i)?;
    let d = config.dim;
    let x = s.flatten();
    let dir = v.flatten();
    if dir.len() != x.len() || s.learning.len() != d || s.network.len() != config.n_players() - 1 {
        return Err(Error::DimensionMismatch { expected: d + config.n_players() - 1, found: dir.len() });
    }
    let euclidean = project_block(&(&x + &dir), i, config)?;
    match geom {
        BregmanGeometry::Euclidean => Ok(StrategyBlock::unflatten(&euclidean, d)),
        BregmanGeometry::PNorm(_) => {
            if dir.iter().all(|&g| g == 0.0) {
                return Ok(s.clone());
            }
            // Minimize h(y) - <grad h(x) + v, y> over the feasible set.
            let anchor = geom.grad_h(&x) + &dir;
            let objective = |y: &DVector<f64>| geom.h(y) - anchor.dot(y);
            let gradient = |y: &DVector<f64>| geom.grad_h(y) - &anchor;
            let project = |y: &DVector<f64>| project_block(y, i, config).unwrap_or_else(|_| y.clone());
            let (y, _) = projected_gradient(objective, gradient, project, euclidean, PNORM_TOL, PNORM_MAX_ITERS)?;
            Ok(StrategyBlock::unflatten(&y, d))
        }
    }
}
