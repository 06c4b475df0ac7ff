use crate::error::{Error, Result};

const BISECTION_STEPS: usize = 200;

/// Euclidean projection of `v` onto `{m in [0,1]^k : sum m = beta}`.
///
/// The solution has the form `m_j = clamp(v_j - tau, 0, 1)`; `tau` is found
/// by bisection and then recomputed exactly from the resulting free set.
pub fn project_budget_box(v: &[f64], beta: f64, tol: f64) -> Result<Vec<f64>> {
    let k = v.len();
    if !(beta > 0.0 && beta <= k as f64) {
        return Err(Error::BudgetInfeasible { player: 0, budget: beta, max: k as f64 });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("projection tolerance must be positive".into()));
    }
    let filled = |tau: f64| v.iter().map(|&x| (x - tau).clamp(0.0, 1.0)).sum::<f64>();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    // filled(lo) = k >= beta and filled(hi) = 0 < beta.
    let (mut lo, mut hi) = (min - 1.0, max);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if filled(mid) >= beta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let project_at = |t: f64| -> Vec<f64> { v.iter().map(|&x| (x - t).clamp(0.0, 1.0)).collect() };
    let mut out = project_at(tau);
    // Recompute the shift exactly from the free set found by bisection.
    let free: Vec<f64> = v.iter().copied().filter(|&x| x - tau > 0.0 && x - tau < 1.0).collect();
    if !free.is_empty() {
        let saturated = v.iter().filter(|&&x| x - tau >= 1.0).count() as f64;
        let exact = (free.iter().sum::<f64>() + saturated - beta) / free.len() as f64;
        let refined = project_at(exact);
        let residual = |m: &[f64]| (m.iter().sum::<f64>() - beta).abs();
        if residual(&refined) <= residual(&out) {
            out = refined;
        }
    }
    let total: f64 = out.iter().sum();
    if (total - beta).abs() > tol {
        return Err(Error::NumericalBreakdown(format!("projection budget residual {:e}", (total - beta).abs())));
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Enumerates every split of coordinates into {0, 1, free}; for the free set the
    /// projection is `v_F - tau` with `tau` fixed by the budget. Keeps the closest feasible point.
    pub(crate) fn active_set_oracle(v: &[f64], beta: f64) -> Vec<f64> {
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
            if m.iter().any(|&x| x < -1e-12 || x > 1.0 + 1e-12) {
                continue;
            }
            let dist: f64 = m.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().map_or(true, |(bd, _)| dist < *bd) {
                best = Some((dist, m));
            }
        }
        best.expect("feasible set is nonempty").1
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_budget_box(&[0.9, 0.9], 1.0, 1e-12).unwrap(), vec![0.5, 0.5]);
        assert_eq!(project_budget_box(&[2.0, 0.0], 1.0, 1e-12).unwrap(), vec![1.0, 0.0]);
        let out = project_budget_box(&[0.2, 0.2, 0.2], 1.8, 1e-12).unwrap();
        for x in out {
            assert_abs_diff_eq!(x, 0.6, epsilon = 1e-15);
        }
    }

    #[test]
    fn projection_rejects_infeasible_budget() {
        assert!(matches!(project_budget_box(&[0.1, 0.2], 2.5, 1e-9), Err(Error::BudgetInfeasible { .. })));
        assert!(matches!(project_budget_box(&[0.1, 0.2], 0.0, 1e-9), Err(Error::BudgetInfeasible { .. })));
    }

    proptest! {
        #[test]
        fn projection_matches_oracle(v in prop::collection::vec(-3.0f64..3.0, 1..6), frac in 0.01f64..1.0) {
            let beta = frac * v.len() as f64;
            let out = project_budget_box(&v, beta, 1e-10).unwrap();
            let oracle = active_set_oracle(&v, beta);
            for (a, b) in out.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }

        #[test]
        fn projection_is_idempotent(v in prop::collection::vec(-3.0f64..3.0, 1..8), frac in 0.01f64..1.0) {
            let beta = frac * v.len() as f64;
            let once = project_budget_box(&v, beta, 1e-10).unwrap();
            let twice = project_budget_box(&once, beta, 1e-10).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
