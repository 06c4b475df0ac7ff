//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, LU};
use netgame::{ActionBox, GameConfig, LearningProfile, LossSpec, NetworkWeights, QuadraticLoss, SolverSettings, StrategyProfile};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_quadratic(rng: &mut ChaCha8Rng, k: usize, d: usize) -> LossSpec {
    let design = DMatrix::from_fn(k, d, |_, _| rng.random_range(-1.0..1.0));
    let w = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
    let labels = &design * &w + DVector::from_fn(k, |_, _| rng.random_range(-0.5..0.5));
    QuadraticLoss::from_design(design, &labels).unwrap().into()
}

/// Symmetric random network with entries in `[0, 1]`; budgets are its row sums.
pub fn random_symmetric_network(rng: &mut ChaCha8Rng, n: usize) -> NetworkWeights {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let w = rng.random_range(0.05..1.0);
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
    }
    NetworkWeights::from_matrix(m)
}

pub fn game(losses: Vec<LossSpec>, alpha: Vec<f64>, budget: Vec<f64>, symmetric: bool) -> GameConfig {
    GameConfig {
        dim: losses[0].dim(),
        alpha,
        budget,
        action_box: ActionBox::default(),
        symmetric,
        losses,
        seed: 0,
        solver: SolverSettings::default(),
    }
}

/// Random undirected game together with a feasible network for it.
pub fn random_symmetric_game(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (GameConfig, NetworkWeights) {
    let net = random_symmetric_network(rng, n);
    let budget = (0..n).map(|i| net.row_sum(i)).collect();
    let losses = (0..n)
        .map(|_| {
            let k = rng.random_range(d..d + 6);
            random_quadratic(rng, k, d)
        })
        .collect();
    let alpha = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    (game(losses, alpha, budget, true), net)
}

/// Random undirected game with a common budget, so symmetric networks exist.
pub fn random_budget_game(rng: &mut ChaCha8Rng, n: usize, d: usize) -> GameConfig {
    let beta = rng.random_range(0.3..(n - 1) as f64);
    let losses = (0..n)
        .map(|_| {
            let k = rng.random_range(d..d + 6);
            random_quadratic(rng, k, d)
        })
        .collect();
    let alpha = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    game(losses, alpha, vec![beta; n], true)
}

pub fn random_profile(rng: &mut ChaCha8Rng, n: usize, d: usize, net: NetworkWeights) -> StrategyProfile {
    let rows = (0..n).map(|_| DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0))).collect();
    StrategyProfile { learning: LearningProfile::from_rows(rows), network: net }
}

/// Best objective over the vertices of `{m in [0,1]^k : sum m = beta}`.
pub fn row_lp_oracle(costs: &[f64], beta: f64) -> f64 {
    let k = costs.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << k) {
        let ones = mask.count_ones() as f64;
        let base: f64 = (0..k).filter(|b| mask & (1 << b) != 0).map(|b| costs[b]).sum();
        let rest = beta - ones;
        if rest.abs() <= 1e-12 {
            best = best.min(base);
        }
        if rest > 0.0 && rest < 1.0 {
            for f in (0..k).filter(|b| mask & (1 << b) == 0) {
                best = best.min(base + rest * costs[f]);
            }
        }
    }
    best
}

/// Minimum of `sum_{i<j} c_ij z_ij` over symmetric budget-feasible link
/// weights, by enumerating basic solutions: pick a basis of edges, fix every
/// other edge at 0 or 1, and solve the node-budget equations for the basis.
pub fn symmetric_lp_oracle(cost: &DMatrix<f64>, budget: &[f64]) -> Option<f64> {
    let n = budget.len();
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let e = edges.len();
    // Node-edge incidence has rank n except for n = 2, where one row is redundant.
    let rank = if n == 2 { 1 } else { n };
    let column = |k: usize| DVector::from_fn(rank, |r, _| if edges[k].0 == r || edges[k].1 == r { 1.0 } else { 0.0 });
    let b = DVector::from_fn(rank, |r, _| budget[r]);
    let mut best: Option<f64> = None;
    let mut basis: Vec<usize> = (0..rank).collect();
    loop {
        let b_mat = DMatrix::from_fn(rank, rank, |r, c| column(basis[c])[r]);
        let lu = LU::new(b_mat);
        if lu.is_invertible() {
            let nonbasic: Vec<usize> = (0..e).filter(|k| !basis.contains(k)).collect();
            let base = lu.solve(&b).unwrap();
            let shifts: Vec<DVector<f64>> = nonbasic.iter().map(|&k| lu.solve(&column(k)).unwrap()).collect();
            for pattern in 0u64..(1 << nonbasic.len()) {
                let mut zb = base.clone();
                let mut z = vec![0.0; e];
                for (t, &k) in nonbasic.iter().enumerate() {
                    if pattern & (1 << t) != 0 {
                        z[k] = 1.0;
                        zb -= &shifts[t];
                    }
                }
                if zb.iter().any(|&x| !(-1e-9..=1.0 + 1e-9).contains(&x)) {
                    continue;
                }
                for (c, &k) in basis.iter().enumerate() {
                    z[k] = zb[c];
                }
                let feasible = (0..n).all(|node| {
                    let s: f64 = (0..e).filter(|&k| edges[k].0 == node || edges[k].1 == node).map(|k| z[k]).sum();
                    (s - budget[node]).abs() < 1e-9
                });
                if feasible {
                    let obj: f64 = (0..e).map(|k| cost[(edges[k].0, edges[k].1)] * z[k]).sum();
                    best = Some(best.map_or(obj, |v: f64| v.min(obj)));
                }
            }
        }
        let mut pos = rank;
        loop {
            if pos == 0 {
                return best;
            }
            pos -= 1;
            if basis[pos] < e - rank + pos {
                basis[pos] += 1;
                for q in pos + 1..rank {
                    basis[q] = basis[q - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Euclidean projection onto `{m in [0,1]^k : sum m = beta}` by enumerating
/// which coordinates sit at 0, at 1, or strictly inside.
pub fn projection_oracle(v: &[f64], beta: f64) -> Vec<f64> {
    let k = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(k as u32) {
        let mut state = vec![0usize; k];
        let mut c = code;
        for s in state.iter_mut() {
            *s = c % 3;
            c /= 3;
        }
        let ones = state.iter().filter(|&&s| s == 1).count() as f64;
        let free: Vec<usize> = (0..k).filter(|&j| state[j] == 2).collect();
        let mut m: Vec<f64> = state.iter().map(|&s| if s == 1 { 1.0 } else { 0.0 }).collect();
        if free.is_empty() {
            if (ones - beta).abs() > 1e-12 {
                continue;
            }
        } else {
            let tau = (free.iter().map(|&j| v[j]).sum::<f64>() + ones - beta) / free.len() as f64;
            for &j in &free {
                m[j] = v[j] - tau;
            }
        }
        if m.iter().any(|&x| !(-1e-12..=1.0 + 1e-12).contains(&x)) {
            continue;
        }
        let dist: f64 = m.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
            best = Some((dist, m));
        }
    }
    best.expect("feasible set is nonempty").1
}

/// Two players, one scalar each: losses `(u - 1)^2` and `(u + 1)^2`, a
/// single forced link. The equilibrium `(1/3, -1/3)` solves
/// `2(u_1 - 1) + 2(u_1 - u_2) = 0`, `2(u_2 + 1) + 2(u_2 - u_1) = 0`.
pub fn two_player_game() -> (GameConfig, StrategyProfile) {
    let point = |y: f64| -> LossSpec { QuadraticLoss::from_data([(&[1.0][..], y)]).unwrap().into() };
    let config = game(vec![point(1.0), point(-1.0)], vec![1.0, 1.0], vec![1.0, 1.0], false);
    let a = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
    let u = a.lu().solve(&DVector::from_vec(vec![1.0, -1.0])).unwrap();
    let ne = StrategyProfile {
        learning: LearningProfile::from_rows(vec![DVector::from_element(1, u[0]), DVector::from_element(1, u[1])]),
        network: NetworkWeights::from_matrix(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])),
    };
    (config, ne)
}

pub fn flatten(s: &StrategyProfile) -> DVector<f64> {
    netgame::game::flatten_profile(s)
}
