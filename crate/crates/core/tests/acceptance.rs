//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Runs as a plain binary (`harness = false`) so the lines always reach the
//! test log, captured or not.

mod common;

use std::time::{Duration, Instant};

use nalgebra::DVector;
use netgame::commutative::{
    admm_symmetric, best_response_unconstrained, brd_run, formation_greedy, formation_objective, minimize_potential_learning,
    run_algorithm1, run_algorithm1_from, welfare_gap, AdmmSettings, BrdSettings, UpdateOrder,
};
use netgame::data::{partition, synth_dataset, synth_generate, PartitionMode, PartitionSpec, SynthModel};
use netgame::game::{flatten_profile, payoff_gradient, potential, potential_identity_residual, unflatten_profile};
use netgame::model::row_feasible;
use netgame::omd::{omd_run, project_budget_box, NoiseModel, OmdSettings};
use netgame::streaming::{stream_init, stream_run_with_events, stream_update, LinkEvent};
use netgame::{GameConfig, LearningProfile, LossSpec, QuadraticLoss, StrategyProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn nonincreasing(values: &[f64]) -> Option<(usize, f64)> {
    values
        .windows(2)
        .enumerate()
        .map(|(k, w)| (k, w[1] - w[0]))
        .find(|&(k, rise)| rise > 1e-12 * (1.0 + values[k].abs()))
}

/// Central differences of the potential over the flattened profile, with every
/// link weight treated as its own variable.
fn potential_gradient_fd(s: &StrategyProfile, config: &GameConfig) -> DVector<f64> {
    let (n, d) = (s.n_players(), s.learning.dim());
    let x = flatten_profile(s);
    let h = 1e-5;
    DVector::from_fn(x.len(), |k, _| {
        let (mut up, mut dn) = (x.clone(), x.clone());
        up[k] += h;
        dn[k] -= h;
        let phi = |v: &DVector<f64>| potential(&unflatten_profile(v, n, d), config).unwrap();
        (phi(&up) - phi(&dn)) / (2.0 * h)
    })
}

fn potential_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst, mut worst_fd) = (0.0_f64, 0.0_f64);
    for _ in 0..200 {
        let n = rng.random_range(2..=5);
        let d = rng.random_range(1..=4);
        let (config, net) = random_symmetric_game(&mut rng, n, d);
        let s = random_profile(&mut rng, n, d, net);
        let fd = potential_gradient_fd(&s, &config);
        let cost_grads = payoff_gradient(&s, &config).unwrap();
        let block = d + n - 1;
        for (i, g) in cost_grads.iter().enumerate() {
            worst = worst.max(potential_identity_residual(&s, i, &config).unwrap());
            // The same identity against the numerical potential gradient.
            let learning = (0..d).map(|c| (g.learning[c] - fd[i * block + c]).abs());
            let network = g.network.iter().enumerate().map(|(k, v)| (v - 2.0 * fd[i * block + d + k]).abs());
            worst_fd = learning.chain(network).fold(worst_fd, f64::max);
        }
    }
    Outcome::new(
        worst <= 1e-8 && worst_fd <= 1e-6,
        format!("max residual {worst:.2e} over 200 profiles (bound 1e-8); against finite differences of the potential {worst_fd:.2e}"),
    )
}

fn brd_convergence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let settings = BrdSettings { order: UpdateOrder::Sequential, tol: 1e-8, max_iters: 1000 };
    let (mut failures, mut worst_gap, mut max_rounds) = (Vec::new(), 0.0_f64, 0);
    for case in 0..50 {
        let n = rng.random_range(2..=5);
        let d = rng.random_range(1..=3);
        let (config, net) = random_symmetric_game(&mut rng, n, d);
        let s0 = random_profile(&mut rng, n, d, net);
        let (limit, trace) = brd_run(&s0, &config, &settings).unwrap();
        let oracle = minimize_potential_learning(&s0.network, &config, None).unwrap();
        let gap = limit.max_abs_diff(&oracle);
        worst_gap = worst_gap.max(gap);
        max_rounds = max_rounds.max(trace.len() - 1);
        if !trace.converged || nonincreasing(&trace.potentials()).is_some() || gap > 1e-6 {
            failures.push(case);
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!("50 games, max rounds {max_rounds}, max distance to potential minimizer {worst_gap:.2e}; failing cases {failures:?}"),
    )
}

fn algorithm1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut failures, mut worst_rerun) = (Vec::new(), 0.0_f64);
    for case in 0..20 {
        let n = rng.random_range(3..=6);
        let d = rng.random_range(1..=3);
        let config = random_budget_game(&mut rng, n, d);
        let (s, trace) = run_algorithm1(&config).unwrap();
        let monotone = nonincreasing(&trace.potentials()).is_none();
        // One more round of each layer from the terminal profile.
        let mut once = config.clone();
        once.solver.outer_max_iters = 1;
        let (_, rerun) = run_algorithm1_from(s, &once).unwrap();
        let phis = rerun.potentials();
        let change = (phis[1] - phis[0]).abs().max((phis[2] - phis[1]).abs());
        worst_rerun = worst_rerun.max(change);
        if !monotone || change >= 1e-6 {
            failures.push(case);
        }
    }
    Outcome::new(failures.is_empty(), format!("20 instances, max potential change on re-run {worst_rerun:.2e} (bound 1e-6); failing cases {failures:?}"))
}

fn formation_lp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut checked, mut worst, mut bad_fractional) = (0, 0.0_f64, 0);
    for _ in 0..300 {
        let n = rng.random_range(2..=5);
        let d = rng.random_range(1..=3);
        let rows = (0..n).map(|_| DVector::from_fn(d, |_, _| f64::from(rng.random_range(-3..=3)))).collect();
        // Integer coordinates make cost ties common.
        let u = LearningProfile::from_rows(rows);
        for i in 0..n {
            let beta = if rng.random_bool(0.3) { f64::from(rng.random_range(1..n as i32)) } else { rng.random_range(0.05..(n - 1) as f64) };
            let row = formation_greedy(i, &u, beta).unwrap();
            let costs: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| u.disagreement(i, j)).collect();
            let objective: f64 = row.iter().zip(&costs).map(|(m, c)| m * c).sum();
            let oracle = row_lp_oracle(&costs, beta);
            worst = worst.max((objective - oracle).abs() / (1.0 + oracle.abs()));
            if row.iter().filter(|&&m| m > 0.0 && m < 1.0).count() > 1 || !row_feasible(&row, beta, 1e-12) {
                bad_fractional += 1;
            }
            checked += 1;
        }
    }
    Outcome::new(
        worst <= 1e-12 && bad_fractional == 0,
        format!("{checked} rows, max relative gap to vertex oracle {worst:.1e}, rows with >1 fractional weight {bad_fractional}"),
    )
}

fn admm() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut worst_gap, mut worst_sym, mut worst_budget, mut failures) = (0.0_f64, 0.0_f64, 0.0_f64, Vec::new());
    for case in 0..20 {
        let n = rng.random_range(2..=6);
        let config = random_budget_game(&mut rng, n, 2);
        let u = LearningProfile::from_rows((0..n).map(|_| DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0))).collect());
        let (net, _) = admm_symmetric(&u, &config, &AdmmSettings::default(), None).unwrap();
        let cost = nalgebra::DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { u.disagreement(i, j) });
        let oracle = symmetric_lp_oracle(&cost, &config.budget).expect("equal budgets admit a symmetric network");
        let gap = (formation_objective(&u, &net) - oracle).abs();
        let sym = net.asymmetry();
        let budget = (0..n).map(|i| (net.row_sum(i) - config.budget[i]).abs()).fold(0.0, f64::max);
        worst_gap = worst_gap.max(gap);
        worst_sym = worst_sym.max(sym);
        worst_budget = worst_budget.max(budget);
        if gap > 1e-4 || sym >= 1e-6 || budget >= 1e-6 {
            failures.push(case);
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!("20 instances, max objective gap {worst_gap:.2e}, asymmetry {worst_sym:.2e}, budget residual {worst_budget:.2e}; failing cases {failures:?}"),
    )
}

fn welfare_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut violations, mut min_margin) = (0, f64::INFINITY);
    for _ in 0..100 {
        let n = rng.random_range(2..=6);
        let d = rng.random_range(1..=3);
        let (config, net) = random_symmetric_game(&mut rng, n, d);
        match welfare_gap(&config, &net) {
            Ok(gap) => min_margin = min_margin.min(gap.p2_star - gap.p1_star),
            Err(_) => violations += 1,
        }
    }
    Outcome::new(violations == 0, format!("100 instances, {violations} violations, smallest P2* - P1* = {min_margin:.2e}"))
}

fn omd() -> Outcome {
    let (config, ne) = two_player_game();
    let s0 = StrategyProfile { learning: LearningProfile::zeros(2, 1), network: ne.network.clone() };
    let deterministic = omd_run(&s0, &config, &OmdSettings { rounds: 10_000, ..OmdSettings::default() }, Some(&ne)).unwrap();
    let hit = deterministic.trace.records().iter().find(|r| r.distance_to_reference.unwrap() < 1e-3).map(|r| r.round);
    let final_error = deterministic.trace.last().unwrap().distance_to_reference.unwrap();
    let noisy_settings = OmdSettings { rounds: 100_000, noise: NoiseModel::gaussian(0.1).unwrap(), tail_fraction: 0.2, record_every: 1000, ..OmdSettings::default() };
    let noisy = omd_run(&s0, &GameConfig { seed: 7, ..config.clone() }, &noisy_settings, Some(&ne)).unwrap();
    let tail_error = (flatten(&noisy.tail_average) - flatten(&ne)).norm();
    Outcome::new(
        hit.is_some() && final_error < 1e-3 && tail_error < 5e-2,
        format!("deterministic run first within 1e-3 of the equilibrium at round {hit:?}, final distance {final_error:.2e}; noisy tail average off by {tail_error:.2e} (bound 5e-2)"),
    )
}

fn streaming() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let d = 3;
    let (mut worst_batch, mut worst_stationarity) = (0.0_f64, 0.0_f64);
    for _ in 0..20 {
        let n = 4;
        let m_row: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.0..1.0)).collect();
        let neighbors: Vec<DVector<f64>> = (0..n - 1).map(|_| DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0))).collect();
        let points: Vec<(Vec<f64>, f64)> = (0..50).map(|_| ((0..d).map(|_| rng.random_range(-1.0..1.0)).collect(), rng.random_range(-3.0..3.0))).collect();
        let filler = random_quadratic(&mut rng, 4, d);
        let alpha = rng.random_range(0.2..3.0);
        let mut config = game(vec![filler; n], vec![alpha; n], vec![1.0; n], false);
        let mut rows = vec![DVector::zeros(d)];
        rows.extend(neighbors.iter().cloned());
        let u = LearningProfile::from_rows(rows);

        let mut state = stream_init(0, &points[0].0, points[0].1, &m_row, &neighbors, &config).unwrap();
        for k in 1..=points.len() {
            if k > 1 {
                stream_update(&mut state, &points[k - 1].0, points[k - 1].1).unwrap();
            }
            let prefix: LossSpec = QuadraticLoss::from_data(points[..k].iter().map(|(x, y)| (x.as_slice(), *y))).unwrap().into();
            config.losses[0] = prefix;
            let batch = best_response_unconstrained(0, &u, &m_row, &config).unwrap();
            worst_batch = worst_batch.max((state.u() - batch).amax());
            worst_stationarity = worst_stationarity.max(state.stationarity_residual());
        }
    }
    Outcome::new(
        worst_batch <= 1e-8 && worst_stationarity < 1e-8,
        format!("20 streams of 50 points, max prefix gap to batch {worst_batch:.2e}, max stationarity residual {worst_stationarity:.2e}"),
    )
}

fn projection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst = 0.0_f64;
    for _ in 0..500 {
        let k = rng.random_range(1..=5);
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..2.0)).collect();
        let beta = rng.random_range(0.01..=k as f64);
        let got = project_budget_box(&v, beta, 1e-12).unwrap();
        let want = projection_oracle(&v, beta);
        worst = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    Outcome::new(worst <= 1e-8, format!("500 instances, max deviation from active-set oracle {worst:.2e}"))
}

fn case_study_sparse() -> Outcome {
    let n = 6;
    let base = DVector::from_vec(vec![0.5, -0.5]);
    let nodes = synth_generate(n, 20, &SynthModel::PerNodeShift { base, delta: 0.8 }, 0.1, 12).unwrap();
    let losses = nodes.iter().map(|ds| ds.to_quadratic_loss().unwrap().into()).collect();
    let config = game(losses, vec![1.0; n], vec![1.0; n], true);
    let (s, trace) = run_algorithm1(&config).unwrap();
    let feasible = s.check_feasible(&config, 1e-6).is_ok();
    let zeros = s.network.zero_count(1e-6) - n;
    let share = zeros as f64 / (n * (n - 1)) as f64;
    Outcome::new(
        feasible && share >= 0.5,
        format!("N=6 undirected run: feasible {feasible}, converged {}, zero links {zeros}/{} ({:.0}%)", trace.converged, n * (n - 1), 100.0 * share),
    )
}

/// Pooled data with a label-dependent spread, partitioned by label so nearby
/// node indices hold similar data; an intercept feature carries the label level.
fn biased_nodes(n: usize, per_node: usize, seed: u64) -> Vec<netgame::data::Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = DVector::from_vec(vec![1.0, -0.5, 0.25]);
    let pooled = synth_dataset(n * per_node, &w, 0.5, &mut rng, "biased fixture").unwrap().with_intercept();
    partition(&pooled, &PartitionSpec::equal(n, PartitionMode::Biased, seed)).unwrap()
}

fn case_study_locality() -> Outcome {
    let n = 50;
    let nodes = biased_nodes(n, 20, 50);
    let losses = nodes.iter().map(|ds| ds.to_quadratic_loss().unwrap().into()).collect();
    let config = game(losses, vec![1.0; n], vec![5.0; n], false);
    let (s, _) = run_algorithm1(&config).unwrap();
    let local = (0..n)
        .filter(|&i| {
            let mut by_distance: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            by_distance.sort_by_key(|&j| (i.abs_diff(j), j));
            let near: f64 = by_distance[..10].iter().map(|&j| s.network.weight(i, j)).sum();
            near > 0.5 * s.network.row_sum(i)
        })
        .count();
    let feasible = (0..n).all(|i| row_feasible(&s.network.row(i), 5.0, 1e-6));
    Outcome::new(
        feasible && local as f64 >= 0.9 * n as f64,
        format!("N=50 biased directed run: {local}/50 nodes put most link weight on their 10 nearest indices; feasible {feasible}"),
    )
}

fn case_study_streaming() -> Outcome {
    let n = 6;
    let nodes = biased_nodes(n, 40, 60);
    let focal = 2;
    let losses: Vec<LossSpec> = nodes.iter().map(|ds| ds.to_quadratic_loss().unwrap().into()).collect();
    let config = game(losses.clone(), vec![1.0; n], vec![1.0; n], false);
    // Neighbours sit at their batch equilibrium; the focal node links to its closest neighbours.
    let (s, _) = run_algorithm1(&config).unwrap();
    let neighbor_u: Vec<DVector<f64>> = (0..n).filter(|&j| j != focal).map(|j| s.learning.row(j).clone()).collect();
    let connected_row = s.network.row(focal);
    let isolated_row = vec![0.0; n - 1];
    let points = nodes[focal].points();
    let (connect, disconnect) = (0, 12);
    let events = [LinkEvent { step: disconnect, m_row: isolated_row.clone(), neighbor_u: neighbor_u.clone() }];
    let (_, with_link) = stream_run_with_events(focal, &points, &connected_row, &neighbor_u, &events, &config).unwrap();
    let (_, alone) = stream_run_with_events(focal, &points, &isolated_row, &neighbor_u, &[], &config).unwrap();
    let loss = |u: &DVector<f64>| losses[focal].value(u, true).unwrap();
    let mean = |trace: &[DVector<f64>]| trace[connect..disconnect].iter().map(loss).sum::<f64>() / (disconnect - connect) as f64;
    let (connected_mean, isolated_mean) = (mean(&with_link), mean(&alone));
    let tail_gap = (with_link.last().unwrap() - alone.last().unwrap()).amax();
    Outcome::new(
        connected_mean < isolated_mean,
        format!("focal node mean local loss while connected {connected_mean:.4} vs isolated {isolated_mean:.4}; after disconnect the runs differ by {tail_gap:.1e}"),
    )
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("1 potential identity", Duration::from_secs(10), potential_identity),
        ("2 best-response dynamics", Duration::from_secs(60), brd_convergence),
        ("3 alternating layers", Duration::from_secs(120), algorithm1),
        ("4 formation LP", Duration::from_secs(60), formation_lp),
        ("5 decentralized ADMM", Duration::from_secs(60), admm),
        ("6 welfare bounds", Duration::from_secs(60), welfare_bounds),
        ("7 mirror descent", Duration::from_secs(30), omd),
        ("8 streaming equivalence", Duration::from_secs(60), streaming),
        ("9 budget projection", Duration::from_secs(60), projection),
        ("10a sparse network (N=6)", Duration::from_secs(300), case_study_sparse),
        ("10b biased locality (N=50)", Duration::from_secs(300), case_study_locality),
        ("10c connect/disconnect stream", Duration::from_secs(300), case_study_streaming),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let passed = outcome.passed && elapsed <= budget;
        if !passed {
            failed += 1;
        }
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {} ({:.2} s, limit {} s)", outcome.detail, elapsed.as_secs_f64(), budget.as_secs());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
