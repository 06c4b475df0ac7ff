//! Decentralized ADMM for undirected network formation.
//!
//! Each player keeps a local copy `m_ij` of every incident link; the copies
//! must agree with the shared value `z_ij` of the link. With zero initial
//! duals the averaged dual stays zero, so `z_ij` collapses to the average
//! `(m_ij + m_ji) / 2` and every update only needs the neighbours' copies:
//!
//! ```text
//! m_i  <- P_{M_i}( mbar_i - (lambda_i + c_i / 2) / rho )
//! lambda_ij <- lambda_ij + rho (m_ij - mbar_ij)
//! ```
//!
//! where `P_{M_i}` is the projection onto player `i`'s budget set; it is the
//! exact minimizer of the separable quadratic subproblem over that set.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{others, GameConfig, LearningProfile, NetworkWeights};
use crate::omd::project_budget_box;
use crate::trace::{Layer, RunTrace, TraceRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmSettings {
    pub rho: f64,
    /// Bound on `max |m_ij - m_ji|` at termination.
    pub primal_tol: f64,
    /// Bound on the sweep-to-sweep change of the averaged links.
    pub dual_tol: f64,
    pub max_iters: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self { rho: 1.0, primal_tol: 1e-6, dual_tol: 1e-6, max_iters: 5000 }
    }
}

impl AdmmSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.primal_tol > 0.0 && self.dual_tol > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidConfig("ADMM penalty, tolerances and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

/// `1/2 sum_i sum_{j != i} m_ij |u_i - u_j|^2`, the network part of the potential.
pub fn formation_objective(u: &LearningProfile, m: &NetworkWeights) -> f64 {
    let n = u.n_players();
    (0..n).flat_map(|i| others(i, n).map(move |j| (i, j))).map(|(i, j)| 0.5 * m.weight(i, j) * u.disagreement(i, j)).sum()
}

fn average(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Minimizes the network part of the potential over symmetric budget-feasible
/// networks by decentralized ADMM. Starts from `warm_start` when given,
/// otherwise from evenly spread rows.
pub fn admm_symmetric(
    u: &LearningProfile,
    config: &GameConfig,
    settings: &AdmmSettings,
    warm_start: Option<&NetworkWeights>,
) -> Result<(NetworkWeights, RunTrace)> {
    settings.validate()?;
    if !config.symmetric {
        return Err(Error::InvalidConfig("ADMM network formation requires the undirected-network mode".into()));
    }
    let n = config.n_players();
    if u.n_players() != n {
        return Err(Error::DimensionMismatch { expected: n, found: u.n_players() });
    }
    let cost = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { u.disagreement(i, j) });
    let mut m = match warm_start {
        Some(w) => w.matrix().clone(),
        None => NetworkWeights::uniform(&config.budget).matrix().clone(),
    };
    let mut lambda = DMatrix::<f64>::zeros(n, n);
    let mut mbar = average(&m);
    let rho = settings.rho;
    let proj_tol = config.solver.feasibility_tol;
    let mut trace = RunTrace::new();

    for sweep in 1..=settings.max_iters {
        let mut target = vec![0.0; n - 1];
        for i in 0..n {
            for (k, j) in others(i, n).enumerate() {
                target[k] = mbar[(i, j)] - (lambda[(i, j)] + 0.5 * cost[(i, j)]) / rho;
            }
            let row = project_budget_box(&target, config.budget[i], proj_tol)
                .map_err(|_| Error::BudgetInfeasible { player: i, budget: config.budget[i], max: (n - 1) as f64 })?;
            for (k, j) in others(i, n).enumerate() {
                m[(i, j)] = row[k];
            }
        }
        let next_bar = average(&m);
        lambda += (&m - &next_bar) * rho;
        let primal = (&m - m.transpose()).amax();
        let dual = (&next_bar - &mbar).amax();
        mbar = next_bar;

        let net = NetworkWeights::from_matrix(m.clone());
        let mut rec = TraceRecord::new(Layer::Admm, sweep);
        rec.potential = Some(formation_objective(u, &net));
        rec.primal_residual = Some(primal);
        rec.dual_residual = Some(dual);
        rec.max_delta = dual;
        trace.push(rec);
        if primal < settings.primal_tol && dual < settings.dual_tol {
            trace.converged = true;
            break;
        }
    }
    Ok((NetworkWeights::from_matrix(m), trace))
}
