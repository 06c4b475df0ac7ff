use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::game::{flatten_profile, player_gradient, potential, unflatten_profile};
use crate::model::{others, GameConfig, LearningProfile, NetworkWeights, StrategyProfile};
use crate::trace::{Layer, RunTrace, TraceRecord};

use super::geometry::BregmanGeometry;
use super::noise::{noisy_feedback, round_rng, NoiseModel};
use super::prox::{prox_map, StrategyBlock};

/// `gamma_n = gamma0 * n^(-q)` for rounds `n = 1, 2, ...`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub gamma0: f64,
    pub exponent: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self { gamma0: 0.5, exponent: 0.6 }
    }
}

impl StepSchedule {
    pub fn new(gamma0: f64, exponent: f64) -> Result<Self> {
        let s = Self { gamma0, exponent };
        s.validate()?;
        Ok(s)
    }

    /// Square-summable but not summable exactly when `1/2 < q <= 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0) || !self.gamma0.is_finite() {
            return Err(Error::InvalidConfig(format!("gamma0 must be positive, got {}", self.gamma0)));
        }
        if !(self.exponent > 0.5 && self.exponent <= 1.0) {
            return Err(Error::InvalidConfig(format!("step exponent must lie in (0.5, 1], got {}", self.exponent)));
        }
        Ok(())
    }

    pub fn step(&self, n: usize) -> f64 {
        self.gamma0 * (n.max(1) as f64).powf(-self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmdSettings {
    pub geometry: BregmanGeometry,
    pub schedule: StepSchedule,
    pub noise: NoiseModel,
    pub rounds: usize,
    /// Fraction of the final rounds averaged into `OmdOutcome::tail_average`.
    pub tail_fraction: f64,
    /// Trace every `record_every`-th round (the last round is always kept).
    pub record_every: usize,
    /// Declared converged when the last step is shorter than this.
    pub step_tol: f64,
}

impl Default for OmdSettings {
    fn default() -> Self {
        Self {
            geometry: BregmanGeometry::Euclidean,
            schedule: StepSchedule::default(),
            noise: NoiseModel::None,
            rounds: 10_000,
            tail_fraction: 0.2,
            record_every: 1,
            step_tol: 1e-6,
        }
    }
}

impl OmdSettings {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if let BregmanGeometry::PNorm(p) = self.geometry {
            BregmanGeometry::pnorm(p)?;
        }
        if let NoiseModel::Gaussian(sigma) = self.noise {
            NoiseModel::gaussian(sigma)?;
        }
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("OMD needs at least one round".into()));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!("tail fraction must lie in (0, 1], got {}", self.tail_fraction)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmdOutcome {
    pub profile: StrategyProfile,
    /// Mean iterate over the tail rounds; feasible because the sets are convex.
    pub tail_average: StrategyProfile,
    pub trace: RunTrace,
}

/// Gradient of player `i` with neighbour actions as the player observes them.
fn observed_gradient(s: &StrategyProfile, i: usize, config: &GameConfig, noise: &NoiseModel, round: usize) -> Result<StrategyBlock> {
    let n = config.n_players();
    let grad = match noise {
        NoiseModel::Gaussian(sigma) if *sigma > 0.0 => {
            let observed: Vec<DVector<f64>> = others(i, n).map(|j| s.learning.row(j).clone()).collect();
            let mut rng = round_rng(config.seed, i, round);
            let mut noisy = noisy_feedback(&observed, noise, &mut rng).into_iter();
            let rows = (0..n).map(|j| if j == i { s.learning.row(i).clone() } else { noisy.next().expect("one copy per neighbour") }).collect();
            player_gradient(&LearningProfile::from_rows(rows), &s.network, i, config)?
        }
        _ => player_gradient(&s.learning, &s.network, i, config)?,
    };
    Ok(StrategyBlock { learning: grad.learning, network: grad.network })
}

/// Multi-agent online mirror descent: every round, all players simultaneously
/// apply `s_i <- P_{s_i}(-gamma_n v_i)` with their own (possibly noisy) payoff
/// gradient. Runs the full round budget; `trace.converged` only reports that
/// the final step was short.
pub fn omd_run(s0: &StrategyProfile, config: &GameConfig, settings: &OmdSettings, reference: Option<&StrategyProfile>) -> Result<OmdOutcome> {
    settings.validate()?;
    s0.check_feasible(config, config.solver.feasibility_tol)?;
    let n = config.n_players();
    let d = config.dim;
    let reference = reference.map(flatten_profile);
    if let Some(r) = &reference {
        if r.len() != n * (d + n - 1) {
            return Err(Error::DimensionMismatch { expected: n * (d + n - 1), found: r.len() });
        }
    }

    let tail_len = ((settings.rounds as f64 * settings.tail_fraction).ceil() as usize).clamp(1, settings.rounds);
    let tail_start = settings.rounds - tail_len + 1;
    let mut tail_sum = DVector::zeros(n * (d + n - 1));

    let mut s = s0.clone();
    let mut trace = RunTrace::new();
    let mut initial = TraceRecord::new(Layer::Initial, 0);
    decorate(&mut initial, &s, config, reference.as_ref())?;
    trace.push(initial);

    let mut last_step = f64::INFINITY;
    for round in 1..=settings.rounds {
        let gamma = settings.schedule.step(round);
        let mut rows = Vec::with_capacity(n);
        let mut links = Vec::with_capacity(n);
        for i in 0..n {
            let v = observed_gradient(&s, i, config, &settings.noise, round)?;
            let block = StrategyBlock { learning: s.learning.row(i).clone(), network: s.network.row(i) };
            let next = prox_map(&block, &v.scaled(-gamma), i, &settings.geometry, config)?;
            rows.push(next.learning);
            links.push(next.network);
        }
        let next = StrategyProfile { learning: LearningProfile::from_rows(rows), network: NetworkWeights::from_rows(&links) };
        let flat = flatten_profile(&next);
        last_step = (&flat - flatten_profile(&s)).norm();
        if round >= tail_start {
            tail_sum += &flat;
        }
        s = next;

        if round % settings.record_every == 0 || round == settings.rounds {
            let mut rec = TraceRecord::new(Layer::Omd, round);
            rec.max_delta = last_step;
            decorate(&mut rec, &s, config, reference.as_ref())?;
            trace.push(rec);
        }
    }
    trace.converged = last_step < settings.step_tol;
    let tail_average = unflatten_profile(&(tail_sum / tail_len as f64), n, d);
    Ok(OmdOutcome { profile: s, tail_average, trace })
}

fn decorate(rec: &mut TraceRecord, s: &StrategyProfile, config: &GameConfig, reference: Option<&DVector<f64>>) -> Result<()> {
    if config.symmetric {
        rec.potential = Some(potential(s, config)?);
    }
    if let Some(r) = reference {
        rec.distance_to_reference = Some((flatten_profile(s) - r).norm());
    }
    Ok(())
}
