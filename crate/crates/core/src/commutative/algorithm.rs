use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::potential;
use crate::linalg::{box_qp, projected_gradient};
use crate::model::{others, GameConfig, LearningProfile, NetworkWeights, StrategyProfile};
use crate::trace::{Layer, RunTrace};

use super::admm::{admm_symmetric, formation_objective};
use super::brd::{brd_run, record};
use super::formation::formation_greedy;

/// Learning actions at the origin (clamped into the box) and evenly spread
/// links. In undirected mode with unequal budgets the even spread is not
/// symmetric, so a feasible symmetric network is obtained by ADMM instead.
pub fn initial_profile(config: &GameConfig) -> Result<StrategyProfile> {
    let n = config.n_players();
    let origin = config.action_box.project(&DVector::zeros(config.dim));
    let learning = LearningProfile::from_rows(vec![origin; n]);
    let mut network = NetworkWeights::uniform(&config.budget);
    if config.symmetric && !network.is_symmetric(0.0) {
        let (net, trace) = admm_symmetric(&learning, config, &config.solver.admm, None)?;
        if !trace.converged {
            return Err(Error::InfeasibleInput("budgets admit no symmetric network".into()));
        }
        network = net;
    }
    Ok(StrategyProfile { learning, network })
}

/// Runs the alternating best-response / network-formation loop from the default start.
pub fn run_algorithm1(config: &GameConfig) -> Result<(StrategyProfile, RunTrace)> {
    run_algorithm1_from(initial_profile(config)?, config)
}

/// Alternates best-response dynamics under a fixed network with network
/// formation under fixed learning actions until a full round moves the
/// potential by less than the outer tolerance.
///
/// Directed mode forms each row greedily. Undirected mode uses ADMM warm
/// started from the current network and keeps the current network whenever
/// ADMM does not improve on it.
pub fn run_algorithm1_from(s0: StrategyProfile, config: &GameConfig) -> Result<(StrategyProfile, RunTrace)> {
    let settings = &config.solver;
    let mut s = s0;
    let mut trace = RunTrace::new();
    trace.push(record(Layer::Initial, 0, &s, config, 0.0)?);
    let mut phi_prev = potential(&s, config)?;
    let mut inner_ok = true;
    let mut outer_ok = false;
    for round in 1..=settings.outer_max_iters {
        let (learning, brd_trace) = brd_run(&s, config, &settings.brd)?;
        let brd_delta = s.learning.max_abs_diff(&learning);
        inner_ok = brd_trace.converged;
        s.learning = learning;
        trace.push(record(Layer::BestResponse, round, &s, config, brd_delta)?);

        let next = form_network(&s, config)?;
        let net_delta = (next.0.matrix() - s.network.matrix()).amax();
        inner_ok &= next.1;
        s.network = next.0;
        trace.push(record(Layer::Formation, round, &s, config, net_delta)?);

        let phi = potential(&s, config)?;
        if (phi_prev - phi).abs() < settings.outer_tol {
            outer_ok = true;
            break;
        }
        phi_prev = phi;
    }
    trace.converged = outer_ok && inner_ok;
    Ok((s, trace))
}

/// One formation layer; the flag reports whether the inner solver converged.
fn form_network(s: &StrategyProfile, config: &GameConfig) -> Result<(NetworkWeights, bool)> {
    if config.symmetric {
        symmetric_formation(&s.learning, &s.network, config)
    } else {
        let n = config.n_players();
        let rows = (0..n).map(|i| formation_greedy(i, &s.learning, config.budget[i])).collect::<Result<Vec<_>>>()?;
        Ok((NetworkWeights::from_rows(&rows), true))
    }
}

fn symmetric_formation(u: &LearningProfile, current: &NetworkWeights, config: &GameConfig) -> Result<(NetworkWeights, bool)> {
    let (candidate, trace) = admm_symmetric(u, config, &config.solver.admm, Some(current))?;
    let symmetric_enough = candidate.asymmetry() <= config.solver.admm.primal_tol;
    if symmetric_enough && formation_objective(u, &candidate) <= formation_objective(u, current) {
        Ok((candidate, trace.converged))
    } else {
        Ok((current.clone(), trace.converged))
    }
}

/// Exact minimizer of the potential over learning actions for a fixed network.
///
/// Quadratic losses give a box-constrained quadratic program over all players
/// at once; other losses fall back to projected gradient descent.
pub fn minimize_potential_learning(m: &NetworkWeights, config: &GameConfig, start: Option<&LearningProfile>) -> Result<LearningProfile> {
    let n = config.n_players();
    let d = config.dim;
    if m.n_players() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.n_players() });
    }
    let link = |i: usize, j: usize| 0.5 * (m.weight(i, j) + m.weight(j, i));
    let bx = config.action_box;
    let all_quadratic = config.losses.iter().all(|l| l.as_quadratic().is_some());
    if all_quadratic {
        let mut h = DMatrix::zeros(n * d, n * d);
        let mut g = DVector::zeros(n * d);
        for i in 0..n {
            let q = config.losses[i].as_quadratic().expect("checked above");
            let scale = config.alpha[i] / q.count() as f64;
            let mut block = q.xx() * (2.0 * scale);
            let degree: f64 = others(i, n).map(|j| link(i, j)).sum();
            for k in 0..d {
                block[(k, k)] += 2.0 * degree;
            }
            h.view_mut((i * d, i * d), (d, d)).copy_from(&block);
            g.rows_mut(i * d, d).copy_from(&(q.lin() * scale));
            for j in others(i, n) {
                let w = link(i, j);
                for k in 0..d {
                    h[(i * d + k, j * d + k)] = -2.0 * w;
                }
            }
        }
        let x0 = start.map(LearningProfile::flatten);
        let x = box_qp(&h, &g, bx.lo, bx.hi, x0.as_ref())?;
        return Ok(LearningProfile::unflatten(&x, n, d));
    }
    let phi = |x: &DVector<f64>| {
        let u = LearningProfile::unflatten(x, n, d);
        let mut total = 0.0;
        for i in 0..n {
            if config.alpha[i] != 0.0 {
                total += config.alpha[i] * config.losses[i].value(u.row(i), false).unwrap_or(f64::INFINITY);
            }
            for j in i + 1..n {
                total += link(i, j) * u.disagreement(i, j);
            }
        }
        total
    };
    let grad = |x: &DVector<f64>| {
        let u = LearningProfile::unflatten(x, n, d);
        let mut out = DVector::zeros(n * d);
        for i in 0..n {
            let mut gi = if config.alpha[i] == 0.0 {
                DVector::zeros(d)
            } else {
                config.losses[i].gradient(u.row(i)).expect("dimension checked by config") * config.alpha[i]
            };
            for j in others(i, n) {
                gi += (u.row(i) - u.row(j)) * (2.0 * link(i, j));
            }
            out.rows_mut(i * d, d).copy_from(&gi);
        }
        out
    };
    let x0 = start.map(LearningProfile::flatten).unwrap_or_else(|| DVector::zeros(n * d));
    let (x, _) = projected_gradient(phi, grad, |x| bx.project(x), x0, 1e-12, 200_000)?;
    Ok(LearningProfile::unflatten(&x, n, d))
}

/// Alternating minimization of the potential: an exact convex solve over the
/// learning actions, then the symmetric network LP by ADMM.
pub fn joint_minimize(config: &GameConfig) -> Result<(StrategyProfile, RunTrace)> {
    if !config.symmetric {
        return Err(Error::InvalidConfig("joint potential minimization requires the undirected-network mode".into()));
    }
    let settings = &config.solver;
    let mut s = initial_profile(config)?;
    let mut trace = RunTrace::new();
    trace.push(record(Layer::Initial, 0, &s, config, 0.0)?);
    let mut phi_prev = potential(&s, config)?;
    for round in 1..=settings.outer_max_iters {
        let learning = minimize_potential_learning(&s.network, config, Some(&s.learning))?;
        let delta = s.learning.max_abs_diff(&learning);
        s.learning = learning;
        trace.push(record(Layer::JointLearning, round, &s, config, delta)?);

        let (network, inner_ok) = symmetric_formation(&s.learning, &s.network, config)?;
        let delta = (network.matrix() - s.network.matrix()).amax();
        s.network = network;
        trace.push(record(Layer::JointNetwork, round, &s, config, delta)?);

        let phi = potential(&s, config)?;
        if (phi_prev - phi).abs() < settings.outer_tol {
            trace.converged = inner_ok;
            return Ok((s, trace));
        }
        phi_prev = phi;
    }
    Err(Error::NoConvergence { solver: "joint potential minimization", iterations: settings.outer_max_iters })
}
