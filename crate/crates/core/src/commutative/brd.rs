use crate::error::{Error, Result};
use crate::game::report;
use crate::model::{GameConfig, LearningProfile, StrategyProfile};
use crate::trace::{Layer, RunTrace, TraceRecord};

use super::best_response::best_response;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOrder {
    /// One player at a time in ascending index, each seeing the latest actions.
    Sequential,
    /// Every player responds to the previous round's actions.
    Simultaneous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrdSettings {
    pub order: UpdateOrder,
    /// Stop once no coordinate moves by more than this in a round.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for BrdSettings {
    fn default() -> Self {
        Self { order: UpdateOrder::Sequential, tol: 1e-10, max_iters: 10_000 }
    }
}

impl BrdSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidConfig("best-response tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

pub(crate) fn record(layer: Layer, round: usize, s: &StrategyProfile, config: &GameConfig, max_delta: f64) -> Result<TraceRecord> {
    let rep = report(s, config, false)?;
    let mut r = TraceRecord::new(layer, round);
    r.potential = Some(rep.phi);
    r.costs = rep.per_player_cost;
    r.welfare = Some(rep.welfare);
    r.max_delta = max_delta;
    Ok(r)
}

/// Best-response dynamics over the fixed network of `s0`.
///
/// The returned trace starts with the initial profile and holds one record
/// per round; `converged` is false when the round cap was hit.
pub fn brd_run(s0: &StrategyProfile, config: &GameConfig, settings: &BrdSettings) -> Result<(LearningProfile, RunTrace)> {
    settings.validate()?;
    let n = config.n_players();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| s0.network.row(i)).collect();
    let mut s = s0.clone();
    let mut trace = RunTrace::new();
    trace.push(record(Layer::Initial, 0, &s, config, 0.0)?);
    for round in 1..=settings.max_iters {
        let previous = s.learning.clone();
        match settings.order {
            UpdateOrder::Sequential => {
                for (i, row) in rows.iter().enumerate() {
                    let next = best_response(i, &s.learning, row, config)?;
                    s.learning.set_row(i, next);
                }
            }
            UpdateOrder::Simultaneous => {
                let next = (0..n).map(|i| best_response(i, &previous, &rows[i], config)).collect::<Result<Vec<_>>>()?;
                s.learning = LearningProfile::from_rows(next);
            }
        }
        let delta = s.learning.max_abs_diff(&previous);
        trace.push(record(Layer::BestResponse, round, &s, config, delta)?);
        if delta < settings.tol {
            trace.converged = true;
            break;
        }
    }
    Ok((s.learning, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{LossSpec, QuadraticLoss};
    use crate::model::{ActionBox, NetworkWeights, SolverSettings};
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_point(x: f64, y: f64) -> LossSpec {
        QuadraticLoss::from_data([(&[x][..], y)]).unwrap().into()
    }

    fn two_player() -> (GameConfig, StrategyProfile) {
        let config = GameConfig {
            dim: 1,
            alpha: vec![1.0, 1.0],
            budget: vec![1.0, 1.0],
            action_box: ActionBox::default(),
            symmetric: true,
            losses: vec![one_point(1.0, 1.0), one_point(1.0, -1.0)],
            seed: 0,
            solver: SolverSettings::default(),
        };
        let net = NetworkWeights::uniform(&config.budget);
        (config, StrategyProfile { learning: LearningProfile::zeros(2, 1), network: net })
    }

    #[test]
    fn two_player_limit_solves_stationarity() {
        let (config, s0) = two_player();
        // Phi = (u0 - 1)^2 + (u1 + 1)^2 + (u0 - u1)^2 up to constants.
        let h = DMatrix::from_row_slice(2, 2, &[4.0, -2.0, -2.0, 4.0]);
        let rhs = DVector::from_vec(vec![2.0, -2.0]);
        let oracle = h.lu().solve(&rhs).unwrap();
        for order in [UpdateOrder::Sequential, UpdateOrder::Simultaneous] {
            let settings = BrdSettings { order, ..BrdSettings::default() };
            let (u, trace) = brd_run(&s0, &config, &settings).unwrap();
            assert!(trace.converged);
            assert_abs_diff_eq!(u.row(0)[0], oracle[0], epsilon = 1e-9);
            assert_abs_diff_eq!(u.row(1)[0], oracle[1], epsilon = 1e-9);
        }
    }

    #[test]
    fn fixed_point_start_converges_in_one_round() {
        let loss = one_point(2.0, 1.0);
        let config = GameConfig {
            dim: 1,
            alpha: vec![1.0; 3],
            budget: vec![1.0; 3],
            action_box: ActionBox::default(),
            symmetric: false,
            losses: vec![loss; 3],
            seed: 0,
            solver: SolverSettings::default(),
        };
        let start = LearningProfile::from_rows(vec![DVector::from_element(1, 0.5); 3]);
        let s0 = StrategyProfile { learning: start.clone(), network: NetworkWeights::uniform(&config.budget) };
        let (u, trace) = brd_run(&s0, &config, &BrdSettings::default()).unwrap();
        assert_eq!(trace.len(), 2);
        assert!(trace.converged);
        assert_eq!(u, start);
    }

    #[test]
    fn sequential_potential_trace_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let n = rng.random_range(2..6);
            let d = rng.random_range(1..4);
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i + 1..n {
                    let w = rng.random_range(0.0..1.0);
                    m[(i, j)] = w;
                    m[(j, i)] = w;
                }
            }
            let budget: Vec<f64> = (0..n).map(|i| f64::max(m.row(i).sum(), 1e-3)).collect();
            let losses = (0..n)
                .map(|_| {
                    let design = DMatrix::from_fn(4, d, |_, _| rng.random_range(-1.0..1.0));
                    let y = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
                    QuadraticLoss::from_design(design, &y).unwrap().into()
                })
                .collect();
            let config = GameConfig {
                dim: d,
                alpha: vec![1.0; n],
                budget,
                action_box: ActionBox::default(),
                symmetric: true,
                losses,
                seed: 0,
                solver: SolverSettings::default(),
            };
            let s0 = StrategyProfile { learning: LearningProfile::zeros(n, d), network: NetworkWeights::from_matrix(m) };
            let (_, trace) = brd_run(&s0, &config, &BrdSettings::default()).unwrap();
            let phi = trace.potentials();
            for w in phi.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{} > {}", w[1], w[0]);
            }
        }
    }

    #[test]
    fn round_cap_flags_non_convergence() {
        let (config, s0) = two_player();
        let settings = BrdSettings { max_iters: 2, tol: 1e-15, ..BrdSettings::default() };
        let (_, trace) = brd_run(&s0, &config, &settings).unwrap();
        assert!(!trace.converged);
        assert_eq!(trace.len(), 3);
    }
}
