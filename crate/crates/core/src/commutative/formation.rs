use crate::error::{Error, Result};
use crate::model::{others, LearningProfile};

/// Player `i`'s cheapest budget-feasible link row for the current learning
/// actions: fill the lowest-disagreement links to weight 1 until the budget
/// runs out, with the remainder on the marginal link. Ties go to the lower
/// player index. The row has at most one fractional entry.
pub fn formation_greedy(i: usize, u: &LearningProfile, beta: f64) -> Result<Vec<f64>> {
    let n = u.n_players();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n_players: n });
    }
    let max = (n - 1) as f64;
    if !(beta > 0.0 && beta <= max) {
        return Err(Error::BudgetInfeasible { player: i, budget: beta, max });
    }
    let costs: Vec<f64> = others(i, n).map(|j| u.disagreement(i, j)).collect();
    Ok(greedy_fill(&costs, beta))
}

pub(crate) fn greedy_fill(costs: &[f64], beta: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    // Stable sort keeps ascending index among equal costs.
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
    let mut row = vec![0.0; costs.len()];
    let mut left = beta;
    for k in order {
        if left <= 0.0 {
            break;
        }
        let w = left.min(1.0);
        row[k] = w;
        left -= w;
    }
    row
}
