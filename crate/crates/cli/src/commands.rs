use std::path::Path;

use nalgebra::DVector;
use netgame::commutative::{initial_profile, run_algorithm1, welfare_gap};
use netgame::model::row_feasible;
use netgame::omd::{omd_run, NoiseModel};
use netgame::streaming::{stream_run_with_events, LinkEvent};
use netgame::{Error, GameConfig, LossSpec, StrategyProfile};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{ConfigError, ExperimentConfig, LinkState};
use crate::output::{read_profile, OutputDir};

/// Stable process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Config = 1,
    NoConvergence = 2,
    Violation = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure { exit: Exit::Config, message: e.0 }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { exit: Exit::Config, message: format!("writing outputs: {e}") }
    }
}

/// Solver errors raised after the configuration was accepted.
fn solver_failure(e: Error) -> Failure {
    let exit = match e {
        Error::NoConvergence { .. } | Error::NumericalBreakdown(_) | Error::SingularSystem => Exit::NoConvergence,
        Error::TheoremViolation(_) | Error::NotSymmetric(_) => Exit::Violation,
        _ => Exit::Config,
    };
    Failure { exit, message: e.to_string() }
}

/// Checks every emitted network row against its budget box (and symmetry in
/// undirected mode); returns the number of offending rows.
fn network_violations(s: &StrategyProfile, config: &GameConfig) -> usize {
    let tol = config.solver.feasibility_tol.max(1e-6);
    let bad_rows = (0..config.n_players()).filter(|&i| !row_feasible(&s.network.row(i), config.budget[i], tol)).count();
    bad_rows + usize::from(config.symmetric && s.network.asymmetry() > tol)
}

fn status(converged: bool, violations: usize) -> Exit {
    if violations > 0 {
        Exit::Violation
    } else if converged {
        Exit::Ok
    } else {
        Exit::NoConvergence
    }
}

fn describe(out: &mut OutputDir, command: &str, config: &GameConfig) {
    out.summary("command", command);
    out.summary("n_nodes", config.n_players());
    out.summary("dim", config.dim);
    out.summary("symmetric", config.symmetric);
    out.summary("seed", config.seed);
}

fn network_summary(out: &mut OutputDir, s: &StrategyProfile) {
    let n = s.n_players();
    let fractional = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).filter(|&(i, j)| {
        let w = s.network.weight(i, j);
        w > 1e-9 && w < 1.0 - 1e-9
    });
    out.summary("zero_links", s.network.zero_count(1e-9));
    out.summary("fractional_links", fractional.count());
    out.summary("max_asymmetry", s.network.asymmetry());
}

struct Prepared {
    game: GameConfig,
    out_dir: std::path::PathBuf,
}

fn prepare(config: &ExperimentConfig, out: Option<&Path>) -> Result<Prepared, Failure> {
    let datasets = config.datasets()?;
    let game = config.game_config(&datasets)?;
    Ok(Prepared { game, out_dir: config.output_dir(out) })
}

pub fn run_commutative(config: &ExperimentConfig, out: Option<&Path>) -> Result<Exit, Failure> {
    let Prepared { game, out_dir } = prepare(config, out)?;
    let (s, trace) = run_algorithm1(&game).map_err(solver_failure)?;

    let mut out = OutputDir::create(&out_dir)?;
    out.write_network(&s.network)?;
    out.write_profile(&s)?;
    out.write_trace(&trace)?;
    describe(&mut out, "run-commutative", &game);
    let violations = network_violations(&s, &game);
    out.summary("converged", trace.converged);
    out.summary("trace_records", trace.len());
    let last = trace.last().expect("trace starts with the initial record");
    out.summary("potential", last.potential.unwrap_or(f64::NAN));
    out.summary("welfare", last.welfare.unwrap_or(f64::NAN));
    if game.symmetric {
        match welfare_gap(&game, &s.network) {
            Ok(g) => {
                out.summary("p1_star", g.p1_star);
                out.summary("p2_star", g.p2_star);
                out.summary("welfare_1", g.welfare_1);
                out.summary("welfare_2", g.welfare_2);
            }
            Err(e) => out.event("welfare_unavailable", json!({ "reason": e.to_string() })),
        }
    }
    network_summary(&mut out, &s);
    out.summary("network_violations", violations);
    out.event("finished", json!({ "converged": trace.converged, "records": trace.len() }));
    out.finish()?;
    Ok(status(trace.converged, violations))
}

pub fn run_concurrent(config: &ExperimentConfig, out: Option<&Path>) -> Result<Exit, Failure> {
    let Prepared { game, out_dir } = prepare(config, out)?;
    let settings = config.omd_settings()?;
    let (n, d) = (game.n_players(), game.dim);
    let reference = config.omd.reference.as_deref().map(|p| read_profile(&config.resolve(p), n, d)).transpose()?;
    let start = match config.omd.start.as_deref() {
        Some(p) => read_profile(&config.resolve(p), n, d)?,
        None => initial_profile(&game).map_err(solver_failure)?,
    };
    if let Err(e) = start.check_feasible(&game, game.solver.feasibility_tol) {
        return Err(ConfigError(format!("start profile: {e}")).into());
    }
    let outcome = omd_run(&start, &game, &settings, reference.as_ref()).map_err(solver_failure)?;

    let mut out = OutputDir::create(&out_dir)?;
    out.write_network(&outcome.profile.network)?;
    out.write_profile(&outcome.profile)?;
    out.write_trace(&outcome.trace)?;
    std::fs::write(out.path("tail_profile.csv"), crate::output::profile_csv(&outcome.tail_average))?;
    describe(&mut out, "run-concurrent", &game);
    let noisy = matches!(settings.noise, NoiseModel::Gaussian(s) if s > 0.0);
    let last = outcome.trace.last().expect("trace starts with the initial record");
    out.summary("rounds", settings.rounds);
    out.summary("noisy", noisy);
    out.summary("converged", outcome.trace.converged);
    out.summary("final_step", last.max_delta);
    if let Some(r) = &reference {
        let dist = last.distance_to_reference.unwrap_or(f64::NAN);
        let tail = (netgame::game::flatten_profile(&outcome.tail_average) - netgame::game::flatten_profile(r)).norm();
        out.summary("distance_to_reference", dist);
        out.summary("tail_distance_to_reference", tail);
        out.summary("reference_tol", REFERENCE_TOL);
        out.summary("within_reference_tol", dist <= REFERENCE_TOL);
    }
    let violations = network_violations(&outcome.profile, &game) + network_violations(&outcome.tail_average, &game);
    network_summary(&mut out, &outcome.profile);
    out.summary("network_violations", violations);
    out.event("finished", json!({ "converged": outcome.trace.converged, "rounds": settings.rounds }));
    out.finish()?;
    // Under persistent noise the step never shrinks, so only noise-free runs
    // are held to the step tolerance.
    Ok(status(outcome.trace.converged || noisy, violations))
}

const REFERENCE_TOL: f64 = 1e-6;

pub fn run_streaming(config: &ExperimentConfig, out: Option<&Path>) -> Result<Exit, Failure> {
    let study = config.streaming.as_ref().ok_or_else(|| ConfigError("run-streaming needs a [streaming] table".into()))?;
    let datasets = config.datasets()?;
    let game = config.game_config(&datasets)?;
    let n = game.n_players();
    let focal = study.focal;
    if focal >= n {
        return Err(ConfigError(format!("streaming.focal = {focal} is out of range for {n} nodes")).into());
    }
    let LossSpec::Quadratic(focal_loss) = &game.losses[focal] else {
        return Err(ConfigError("run-streaming needs the quadratic loss".into()).into());
    };
    let points = datasets[focal].points();
    if let Some(e) = study.events.iter().find(|e| e.step >= points.len()) {
        return Err(ConfigError(format!("streaming event at step {} is past the {} points of node {focal}", e.step, points.len())).into());
    }
    let out_dir = config.output_dir(out);

    // Neighbours sit at the batch equilibrium; a connected focal node uses its equilibrium links.
    let (s, trace) = run_algorithm1(&game).map_err(solver_failure)?;
    let neighbor_u: Vec<DVector<f64>> = (0..n).filter(|&j| j != focal).map(|j| s.learning.row(j).clone()).collect();
    let row_for = |state: LinkState| match state {
        LinkState::Connected => s.network.row(focal),
        LinkState::Isolated => vec![0.0; n - 1],
    };
    let events: Vec<LinkEvent> = study.events.iter().map(|e| LinkEvent { step: e.step, m_row: row_for(e.link), neighbor_u: neighbor_u.clone() }).collect();
    let (_, scheduled) = stream_run_with_events(focal, &points, &row_for(study.initial), &neighbor_u, &events, &game).map_err(solver_failure)?;
    let (_, isolated) = stream_run_with_events(focal, &points, &row_for(LinkState::Isolated), &neighbor_u, &[], &game).map_err(solver_failure)?;

    let mut sorted = study.events.clone();
    sorted.sort_by_key(|e| e.step);
    let link_at = |step: usize| sorted.iter().rev().find(|e| e.step <= step).map_or(study.initial, |e| e.link);
    let loss = |u: &DVector<f64>| focal_loss.value(u, true).map_err(solver_failure);
    let mut rows = Vec::with_capacity(points.len());
    let (mut conn_sched, mut conn_iso, mut conn_steps) = (0.0, 0.0, 0usize);
    for (step, (a, b)) in scheduled.iter().zip(&isolated).enumerate() {
        let (la, lb) = (loss(a)?, loss(b)?);
        let link = link_at(step);
        if link == LinkState::Connected {
            conn_sched += la;
            conn_iso += lb;
            conn_steps += 1;
        }
        let tag = if link == LinkState::Connected { "connected" } else { "isolated" };
        rows.push(vec![step.to_string(), tag.to_string(), la.to_string(), lb.to_string()]);
    }

    let mut out = OutputDir::create(&out_dir)?;
    out.write_network(&s.network)?;
    out.write_profile(&s)?;
    out.write_trace(&trace)?;
    out.write_table("stream.csv", &["step", "link", "loss_scheduled", "loss_isolated"], &rows)?;
    describe(&mut out, "run-streaming", &game);
    out.summary("focal", focal);
    out.summary("points", points.len());
    out.summary("batch_converged", trace.converged);
    out.summary("connected_steps", conn_steps);
    if conn_steps > 0 {
        let (a, b) = (conn_sched / conn_steps as f64, conn_iso / conn_steps as f64);
        out.summary("mean_loss_connected", a);
        out.summary("mean_loss_isolated_same_steps", b);
        out.summary("connection_helps", a <= b);
    }
    out.summary("final_loss_scheduled", rows.last().map_or(String::new(), |r| r[2].clone()));
    out.summary("final_loss_isolated", rows.last().map_or(String::new(), |r| r[3].clone()));
    out.event("link", json!({ "step": 0, "state": format!("{:?}", study.initial).to_lowercase() }));
    for e in &sorted {
        out.event("link", json!({ "step": e.step, "state": format!("{:?}", e.link).to_lowercase() }));
    }
    let violations = network_violations(&s, &game);
    out.summary("network_violations", violations);
    out.finish()?;
    Ok(status(trace.converged, violations))
}

struct SweepRow {
    seed: u64,
    converged: bool,
    values: Option<[f64; 4]>,
    violation: Option<String>,
}

/// Upper bound on the sweep's worker threads, from `NETGAME_THREADS`.
pub fn thread_cap() -> Result<Option<usize>, ConfigError> {
    match std::env::var("NETGAME_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(ConfigError(format!("NETGAME_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

pub fn compare_welfare(config: &ExperimentConfig, out: Option<&Path>) -> Result<Exit, Failure> {
    let sweep = config.welfare.as_ref().ok_or_else(|| ConfigError("compare-welfare needs a [welfare] table".into()))?;
    if !config.game.symmetric {
        return Err(ConfigError("compare-welfare needs game.symmetric = true".into()).into());
    }
    if sweep.seeds == 0 {
        return Err(ConfigError("welfare.seeds must be positive".into()).into());
    }
    let first = sweep.first_seed.unwrap_or(config.game.seed);
    let seeds: Vec<u64> = (0..sweep.seeds as u64).map(|k| first + k).collect();
    let instance = |seed: u64| -> Result<ExperimentConfig, ConfigError> {
        let mut c = config.clone();
        c.game.seed = seed;
        c.data.seed = Some(seed);
        Ok(c)
    };
    // Validate every instance up front so a bad config never leaves partial output.
    let games = seeds
        .iter()
        .map(|&seed| {
            let c = instance(seed)?;
            let ds = c.datasets()?;
            c.game_config(&ds)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let out_dir = config.output_dir(out);

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(k) = thread_cap()? {
            b = b.num_threads(k);
        }
        b.build().map_err(|e| ConfigError(format!("thread pool: {e}")))?
    };
    let results: Vec<Result<SweepRow, Failure>> = pool.install(|| {
        games
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(game, &seed)| {
                let (s, trace) = run_algorithm1(game).map_err(solver_failure)?;
                Ok(match welfare_gap(game, &s.network) {
                    Ok(g) => SweepRow { seed, converged: trace.converged, values: Some([g.p1_star, g.p2_star, g.welfare_1, g.welfare_2]), violation: None },
                    Err(e @ Error::TheoremViolation(_)) => SweepRow { seed, converged: trace.converged, values: None, violation: Some(e.to_string()) },
                    Err(e) => return Err(solver_failure(e)),
                })
            })
            .collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut out = OutputDir::create(&out_dir)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.seed.to_string()];
            match r.values {
                Some(v) => cells.extend(v.iter().map(f64::to_string)),
                None => cells.extend(std::iter::repeat_n(String::new(), 4)),
            }
            cells.push(r.converged.to_string());
            cells.push(r.violation.is_none().to_string());
            cells
        })
        .collect();
    out.write_table("welfare.csv", &["seed", "p1_star", "p2_star", "welfare_1", "welfare_2", "converged", "bounds_hold"], &table)?;
    let game = &games[0];
    describe(&mut out, "compare-welfare", game);
    let violations = rows.iter().filter(|r| r.violation.is_some()).count();
    let unconverged = rows.iter().filter(|r| !r.converged).count();
    let gaps: Vec<[f64; 4]> = rows.iter().filter_map(|r| r.values).collect();
    out.summary("seeds", rows.len());
    out.summary("first_seed", first);
    out.summary("violations", violations);
    out.summary("unconverged", unconverged);
    if !gaps.is_empty() {
        out.summary("max_p1_minus_p2", gaps.iter().map(|v| v[0] - v[1]).fold(f64::NEG_INFINITY, f64::max));
        out.summary("min_w1_minus_w2", gaps.iter().map(|v| v[2] - v[3]).fold(f64::INFINITY, f64::min));
    }
    for r in rows.iter().filter(|r| r.violation.is_some()) {
        out.event("violation", json!({ "seed": r.seed, "detail": r.violation }));
    }
    out.finish()?;
    Ok(status(unconverged == 0, violations))
}
