use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{box_qp, projected_gradient, solve_spd};
use crate::losses::{LossSpec, QuadraticLoss};
use crate::model::{others, GameConfig, LearningProfile};

const NUMERIC_TOL: f64 = 1e-12;
const NUMERIC_MAX_ITERS: usize = 100_000;

/// Player `i`'s cost-minimizing learning action over its box, given the
/// others' actions `u` (row `i` is ignored) and its own compact link row.
pub fn best_response(i: usize, u: &LearningProfile, m_row: &[f64], config: &GameConfig) -> Result<DVector<f64>> {
    check_inputs(i, u, m_row, config)?;
    let bx = config.action_box;
    match &config.losses[i] {
        LossSpec::Quadratic(q) => {
            let (a, rhs) = normal_equations(i, q, u, m_row, config);
            let candidate = solve_shifted(q, config.alpha[i], m_row.iter().sum(), &a, &rhs)?;
            if bx.contains(&candidate, 0.0) {
                return Ok(candidate);
            }
            box_qp(&(a * 2.0), &(rhs * -2.0), bx.lo, bx.hi, Some(&candidate))
        }
        loss => {
            let alpha = config.alpha[i];
            let n = config.n_players();
            let neighbors: Vec<(f64, &DVector<f64>)> = others(i, n).zip(m_row).map(|(j, &w)| (w, u.row(j))).collect();
            let cost = |x: &DVector<f64>| {
                let local = if alpha == 0.0 { 0.0 } else { alpha * loss.value(x, false).unwrap_or(f64::INFINITY) };
                local + neighbors.iter().map(|(w, uj)| w * (x - *uj).norm_squared()).sum::<f64>()
            };
            let grad = |x: &DVector<f64>| {
                let mut g = if alpha == 0.0 { DVector::zeros(x.len()) } else { loss.gradient(x).expect("dimension checked") * alpha };
                for (w, uj) in &neighbors {
                    g += (x - *uj) * (2.0 * w);
                }
                g
            };
            let (x, _) = projected_gradient(cost, grad, |x| bx.project(x), u.row(i).clone(), NUMERIC_TOL, NUMERIC_MAX_ITERS)?;
            Ok(x)
        }
    }
}

/// Stationary point of player `i`'s cost with no box constraint (quadratic losses only).
pub fn best_response_unconstrained(i: usize, u: &LearningProfile, m_row: &[f64], config: &GameConfig) -> Result<DVector<f64>> {
    check_inputs(i, u, m_row, config)?;
    let q = config.losses[i].as_quadratic().ok_or(Error::NonSmoothLoss)?;
    let (a, rhs) = normal_equations(i, q, u, m_row, config);
    solve_shifted(q, config.alpha[i], m_row.iter().sum(), &a, &rhs)
}

fn check_inputs(i: usize, u: &LearningProfile, m_row: &[f64], config: &GameConfig) -> Result<()> {
    config.check_player(i)?;
    let n = config.n_players();
    if m_row.len() != n - 1 {
        return Err(Error::DimensionMismatch { expected: n - 1, found: m_row.len() });
    }
    if u.n_players() != n {
        return Err(Error::DimensionMismatch { expected: n, found: u.n_players() });
    }
    if u.dim() != config.dim {
        return Err(Error::DimensionMismatch { expected: config.dim, found: u.dim() });
    }
    Ok(())
}

/// `A = (alpha/K) X + (1^T m) I` and `rhs = sum_j m_j u_j - (alpha / 2K) Y`,
/// so the stationary point solves `A u = rhs`.
fn normal_equations(i: usize, q: &QuadraticLoss, u: &LearningProfile, m_row: &[f64], config: &GameConfig) -> (DMatrix<f64>, DVector<f64>) {
    let d = config.dim;
    let scale = config.alpha[i] / q.count() as f64;
    let beta: f64 = m_row.iter().sum();
    let a = q.xx() * scale + DMatrix::identity(d, d) * beta;
    let mut rhs = q.lin() * (-0.5 * scale);
    for (j, &w) in others(i, config.n_players()).zip(m_row) {
        rhs += u.row(j) * w;
    }
    (a, rhs)
}

/// Solves `((alpha/K) X + beta I) u = rhs`. When the sample count does not
/// exceed the dimension the Woodbury identity reduces the work to a `K x K` solve.
fn solve_shifted(q: &QuadraticLoss, alpha: f64, beta: f64, a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = alpha / q.count() as f64;
    match q.design() {
        Some(design) if beta > 0.0 && scale > 0.0 && q.dim() >= q.count() => Ok(woodbury_solve(design, scale, beta, rhs)),
        _ => solve_spd(a, rhs),
    }
}

/// `(beta I + s D^T D)^{-1} b = b / beta - D^T (I / s + D D^T / beta)^{-1} D b / beta^2`.
pub(crate) fn woodbury_solve(design: &DMatrix<f64>, scale: f64, beta: f64, b: &DVector<f64>) -> DVector<f64> {
    let k = design.nrows();
    let small = DMatrix::identity(k, k) / scale + design * design.transpose() / beta;
    let db = design * b;
    let inner = small.cholesky().expect("identity / s + D D^T / beta is positive definite").solve(&db);
    b / beta - design.tr_mul(&inner) / (beta * beta)
}
