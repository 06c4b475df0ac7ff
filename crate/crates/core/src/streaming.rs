//! Per-node recursive learning on a data stream.
//!
//! With neighbour actions and links held fixed, player `i`'s first-order
//! condition after `k` points is `2 Lambda_k u + Gamma_k = 0` with
//!
//! ```text
//! Lambda_k = alpha X_k / k + (1^T m) I,    X_k = sum x x^T
//! Gamma_k  = alpha Y_k / k - 2 sum_j m_j u_j,    Y_k = -2 sum x y
//! ```
//!
//! The state carries `(Lambda, Gamma)` and a cached inverse refreshed by a
//! Newton-Schulz correction for the `k/(k+1)` rescaling plus a
//! Sherman-Morrison rank-one update, so each step touches only the new point.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::GameConfig;

/// Re-factorize when `|Lambda Lambda_inv - I|_inf` exceeds this.
const DRIFT_LIMIT: f64 = 1e-5;
const NEWTON_SCHULZ_STEPS: usize = 3;
const REFINEMENT_STEPS: usize = 2;
/// Relative singular-value cutoff for the minimum-norm solve of an isolated node.
const PINV_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StreamState {
    k: usize,
    alpha: f64,
    /// `1^T m` for the current link row.
    link_mass: f64,
    /// `sum_j m_j u_j` over the stored neighbour actions.
    pull: DVector<f64>,
    xx: DMatrix<f64>,
    lin: DVector<f64>,
    lambda: DMatrix<f64>,
    gamma: DVector<f64>,
    lambda_inv: DMatrix<f64>,
    /// True while `Lambda` is singular and `lambda_inv` is a pseudo-inverse.
    singular: bool,
    u: DVector<f64>,
    refactorizations: usize,
}

impl StreamState {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    pub fn lambda_inv(&self) -> &DMatrix<f64> {
        &self.lambda_inv
    }

    /// How often the cached inverse was rebuilt from scratch.
    pub fn refactorizations(&self) -> usize {
        self.refactorizations
    }

    /// `|2 Lambda u + Gamma|_inf`.
    pub fn stationarity_residual(&self) -> f64 {
        (&self.lambda * &self.u * 2.0 + &self.gamma).amax()
    }

    pub fn inverse_drift(&self) -> f64 {
        let d = self.lambda.nrows();
        (&self.lambda * &self.lambda_inv - DMatrix::identity(d, d)).amax()
    }

    fn dim(&self) -> usize {
        self.u.len()
    }

    fn rebuild(&mut self) {
        let d = self.dim();
        let k = self.k as f64;
        self.lambda = &self.xx * (self.alpha / k) + DMatrix::identity(d, d) * self.link_mass;
        self.gamma = &self.lin * (self.alpha / k) - &self.pull * 2.0;
    }

    fn refactor(&mut self) -> Result<()> {
        self.refactorizations += 1;
        if let Some(chol) = self.lambda.clone().cholesky() {
            self.lambda_inv = chol.inverse();
            self.singular = false;
            return Ok(());
        }
        // An isolated node with too few points: minimum-norm stationary point.
        let svd = self.lambda.clone().svd(true, true);
        let cutoff = PINV_CUTOFF * svd.singular_values.max().max(f64::MIN_POSITIVE);
        self.lambda_inv = svd.pseudo_inverse(cutoff).map_err(|e| Error::NumericalBreakdown(e.to_string()))?;
        self.singular = true;
        Ok(())
    }

    fn solve(&mut self) -> Result<()> {
        let mut u = &self.lambda_inv * &self.gamma * -0.5;
        if !self.singular {
            for _ in 0..REFINEMENT_STEPS {
                let r = &self.lambda * &u * 2.0 + &self.gamma;
                u -= &self.lambda_inv * r * 0.5;
            }
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalBreakdown("non-finite streaming iterate".into()));
        }
        self.u = u;
        Ok(())
    }

    /// Replaces the link row and the stored neighbour actions (for example on
    /// a synchronization or a connect/disconnect event) and re-solves.
    pub fn set_neighbors(&mut self, m_row: &[f64], neighbor_u: &[DVector<f64>]) -> Result<()> {
        let (mass, pull) = link_terms(m_row, neighbor_u, self.dim())?;
        self.link_mass = mass;
        self.pull = pull;
        self.rebuild();
        self.refactor()?;
        self.solve()
    }
}

fn link_terms(m_row: &[f64], neighbor_u: &[DVector<f64>], d: usize) -> Result<(f64, DVector<f64>)> {
    if m_row.len() != neighbor_u.len() {
        return Err(Error::DimensionMismatch { expected: m_row.len(), found: neighbor_u.len() });
    }
    let mut pull = DVector::zeros(d);
    for (w, uj) in m_row.iter().zip(neighbor_u) {
        if uj.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: uj.len() });
        }
        if !(*w >= 0.0 && *w <= 1.0) {
            return Err(Error::InfeasibleInput(format!("link weight {w} outside [0, 1]")));
        }
        pull += uj * *w;
    }
    Ok((m_row.iter().sum(), pull))
}

/// State after the first point `(x, y)` for player `i`; `neighbor_u` is aligned with `m_row`.
pub fn stream_init(i: usize, x: &[f64], y: f64, m_row: &[f64], neighbor_u: &[DVector<f64>], config: &GameConfig) -> Result<StreamState> {
    config.check_player(i)?;
    let d = config.dim;
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: x.len() });
    }
    if m_row.len() != config.n_players() - 1 {
        return Err(Error::DimensionMismatch { expected: config.n_players() - 1, found: m_row.len() });
    }
    let (link_mass, pull) = link_terms(m_row, neighbor_u, d)?;
    let xv = DVector::from_column_slice(x);
    let mut state = StreamState {
        k: 1,
        alpha: config.alpha[i],
        link_mass,
        pull,
        xx: &xv * xv.transpose(),
        lin: &xv * (-2.0 * y),
        lambda: DMatrix::zeros(d, d),
        gamma: DVector::zeros(d),
        lambda_inv: DMatrix::zeros(d, d),
        singular: false,
        u: DVector::zeros(d),
        refactorizations: 0,
    };
    state.rebuild();
    state.refactor()?;
    state.solve()?;
    Ok(state)
}

/// Folds one local point into the state. Only the state and the point are read.
pub fn stream_update(state: &mut StreamState, x: &[f64], y: f64) -> Result<()> {
    let d = state.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: x.len() });
    }
    let xv = DVector::from_column_slice(x);
    let k = state.k as f64;
    state.xx += &xv * xv.transpose();
    state.lin += &xv * (-2.0 * y);
    state.k += 1;
    state.rebuild();

    if state.singular {
        state.refactor()?;
        return state.solve();
    }

    // Lambda_{k+1} = c Lambda_k + (1 - c) beta I + alpha x x^T / (k + 1), c = k / (k + 1).
    let c = k / (k + 1.0);
    let shifted = &state.lambda - &xv * xv.transpose() * (state.alpha / (k + 1.0));
    let eye = DMatrix::identity(d, d);
    let mut inv = &state.lambda_inv / c;
    for _ in 0..NEWTON_SCHULZ_STEPS {
        inv = &inv * (&eye * 2.0 - &shifted * &inv);
    }
    if state.alpha != 0.0 {
        let scale = state.alpha / (k + 1.0);
        let ix = &inv * &xv;
        let denom = 1.0 + scale * xv.dot(&ix);
        inv -= &ix * ix.transpose() * (scale / denom);
    }
    state.lambda_inv = inv;
    if !(state.inverse_drift() <= DRIFT_LIMIT) {
        state.refactor()?;
        if !(state.inverse_drift() <= DRIFT_LIMIT) && !state.singular {
            return Err(Error::NumericalBreakdown(format!("inverse drift {} after re-factorization", state.inverse_drift())));
        }
    }
    state.solve()
}

/// Runs the stream from its first point; returns the final action and the
/// action after every point (the trace has one entry per point).
pub fn stream_run(
    i: usize,
    points: &[(Vec<f64>, f64)],
    m_row: &[f64],
    neighbor_u: &[DVector<f64>],
    config: &GameConfig,
) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
    let ((x0, y0), rest) = points.split_first().ok_or(Error::EmptyData)?;
    let mut state = stream_init(i, x0, *y0, m_row, neighbor_u, config)?;
    let mut trace = vec![state.u.clone()];
    for (x, y) in rest {
        stream_update(&mut state, x, *y)?;
        trace.push(state.u.clone());
    }
    Ok((state.u, trace))
}

/// Replaces the link row and neighbour actions just before point `step`
/// (0-based) is folded in. An all-zero row isolates the node.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkEvent {
    pub step: usize,
    pub m_row: Vec<f64>,
    pub neighbor_u: Vec<DVector<f64>>,
}

/// [`stream_run`] with scheduled link changes. Events at step 0 apply before
/// the first point; events past the end of the stream are ignored.
pub fn stream_run_with_events(
    i: usize,
    points: &[(Vec<f64>, f64)],
    m_row: &[f64],
    neighbor_u: &[DVector<f64>],
    events: &[LinkEvent],
    config: &GameConfig,
) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
    let mut events: Vec<&LinkEvent> = events.iter().collect();
    events.sort_by_key(|e| e.step);
    let (mut row, mut nb) = (m_row, neighbor_u);
    let mut pending = events.into_iter().peekable();
    while let Some(e) = pending.next_if(|e| e.step == 0) {
        row = &e.m_row;
        nb = &e.neighbor_u;
    }
    let ((x0, y0), rest) = points.split_first().ok_or(Error::EmptyData)?;
    let mut state = stream_init(i, x0, *y0, row, nb, config)?;
    let mut trace = vec![state.u.clone()];
    for (offset, (x, y)) in rest.iter().enumerate() {
        let step = offset + 1;
        let mut changed = None;
        while let Some(e) = pending.next_if(|e| e.step <= step) {
            changed = Some(e);
        }
        if let Some(e) = changed {
            state.set_neighbors(&e.m_row, &e.neighbor_u)?;
        }
        stream_update(&mut state, x, *y)?;
        trace.push(state.u.clone());
    }
    Ok((state.u, trace))
}
