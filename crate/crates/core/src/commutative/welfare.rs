use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::{potential, social_welfare};
use crate::linalg::{box_qp, projected_gradient};
use crate::model::{GameConfig, LearningProfile, NetworkWeights, StrategyProfile};

use super::algorithm::minimize_potential_learning;

/// Slack allowed on the welfare inequalities before they count as violated.
pub const WELFARE_SLACK: f64 = 1e-9;

/// Classical distributed learning: one shared action minimizing the weighted
/// sum of local losses over the box. Returns the action and the optimal value.
pub fn consensus_baseline(config: &GameConfig) -> Result<(DVector<f64>, f64)> {
    let d = config.dim;
    let bx = config.action_box;
    let n = config.n_players();
    let u = if config.losses.iter().all(|l| l.as_quadratic().is_some()) {
        let mut h = DMatrix::zeros(d, d);
        let mut g = DVector::zeros(d);
        for i in 0..n {
            let q = config.losses[i].as_quadratic().expect("checked above");
            let scale = config.alpha[i] / q.count() as f64;
            h += q.xx() * (2.0 * scale);
            g += q.lin() * scale;
        }
        if h.clone().cholesky().is_none() {
            return Err(Error::SingularSystem);
        }
        box_qp(&h, &g, bx.lo, bx.hi, None)?
    } else {
        let total = |x: &DVector<f64>| {
            (0..n).map(|i| if config.alpha[i] == 0.0 { 0.0 } else { config.alpha[i] * config.losses[i].value(x, false).unwrap_or(f64::INFINITY) }).sum::<f64>()
        };
        let grad = |x: &DVector<f64>| {
            let mut g = DVector::zeros(d);
            for i in 0..n {
                if config.alpha[i] != 0.0 {
                    g += config.losses[i].gradient(x).expect("dimension checked by config") * config.alpha[i];
                }
            }
            g
        };
        projected_gradient(total, grad, |x| bx.project(x), DVector::zeros(d), 1e-12, 200_000)?.0
    };
    let mut value = 0.0;
    for i in 0..n {
        if config.alpha[i] != 0.0 {
            value += config.alpha[i] * config.losses[i].value(&u, false)?;
        }
    }
    Ok((u, value))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelfareGap {
    /// Minimum of the potential over learning actions on the given network.
    pub p1_star: f64,
    /// Optimal value of the consensus problem.
    pub p2_star: f64,
    /// Welfare at the network-game solution.
    pub welfare_1: f64,
    /// Welfare at the consensus solution.
    pub welfare_2: f64,
    pub learning: LearningProfile,
    pub consensus: DVector<f64>,
}

/// Compares the soft-consensus optimum on a fixed undirected network with
/// the hard-consensus baseline. `P1* <= P2*` and `W1 >= W2` are guaranteed for
/// nonnegative symmetric weights; a violation is reported as an error.
pub fn welfare_gap(config: &GameConfig, network: &NetworkWeights) -> Result<WelfareGap> {
    // ADMM-formed networks are only symmetric to its primal tolerance.
    let asym = network.asymmetry();
    if asym > config.solver.feasibility_tol.max(config.solver.admm.primal_tol) {
        return Err(Error::NotSymmetric(asym));
    }
    if network.matrix().iter().any(|&w| w < 0.0) {
        return Err(Error::InfeasibleInput("link weights must be nonnegative".into()));
    }
    let learning = minimize_potential_learning(network, config, None)?;
    let s = StrategyProfile { learning, network: network.clone() };
    let p1_star = potential(&s, config)?;
    let welfare_1 = social_welfare(&s.learning, config)?;
    let (consensus, p2_star) = consensus_baseline(config)?;
    let welfare_2 = -p2_star;
    if p1_star > p2_star + WELFARE_SLACK {
        return Err(Error::TheoremViolation(format!("P1* = {p1_star} exceeds P2* = {p2_star}")));
    }
    if welfare_1 < welfare_2 - WELFARE_SLACK {
        return Err(Error::TheoremViolation(format!("W1 = {welfare_1} below W2 = {welfare_2}")));
    }
    Ok(WelfareGap { p1_star, p2_star, welfare_1, welfare_2, learning: s.learning, consensus })
}
