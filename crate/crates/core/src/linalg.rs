//! Small dense solvers used by the equilibrium routines.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = a.clone().cholesky().ok_or(Error::SingularSystem)?;
    Ok(chol.solve(b))
}

pub fn inverse_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a.clone().cholesky().ok_or(Error::SingularSystem)?;
    Ok(chol.inverse())
}

/// Minimizes `0.5 x^T H x + g^T x` over the box `[lo, hi]^n` for symmetric PSD `H`.
///
/// Tries the unconstrained stationary point first, then alternates coordinate
/// descent with an exact solve on the free coordinates until the KKT
/// conditions hold.
pub fn box_qp(h: &DMatrix<f64>, g: &DVector<f64>, lo: f64, hi: f64, start: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    let n = g.len();
    if let Some(chol) = h.clone().cholesky() {
        let x = -chol.solve(g);
        if x.iter().all(|&v| v >= lo && v <= hi) {
            return Ok(x);
        }
    }
    let mut x = start.map(|s| s.map(|v| v.clamp(lo, hi))).unwrap_or_else(|| DVector::zeros(n));
    let scale = h.amax().max(g.amax()).max(1.0);
    for _round in 0..200 {
        coordinate_sweeps(h, g, lo, hi, &mut x, 50);
        let grad = h * &x + g;
        let free: Vec<usize> = (0..n)
            .filter(|&k| {
                let at_lo = x[k] <= lo && grad[k] >= 0.0;
                let at_hi = x[k] >= hi && grad[k] <= 0.0;
                !(at_lo || at_hi)
            })
            .collect();
        if !free.is_empty() {
            let hf = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
            // The free block sees the fixed coordinates as a constant shift.
            let rhs = DVector::from_fn(free.len(), |a, _| {
                let k = free[a];
                let mut r = g[k];
                for j in 0..n {
                    if !free.contains(&j) {
                        r += h[(k, j)] * x[j];
                    }
                }
                -r
            });
            if let Some(chol) = hf.cholesky() {
                let xf = chol.solve(&rhs);
                if xf.iter().all(|&v| v >= lo && v <= hi) {
                    for (a, &k) in free.iter().enumerate() {
                        x[k] = xf[a];
                    }
                }
            }
        }
        if kkt_violation(h, g, lo, hi, &x) <= 1e-13 * scale {
            return Ok(x);
        }
    }
    if kkt_violation(h, g, lo, hi, &x) <= 1e-9 * scale {
        return Ok(x);
    }
    Err(Error::NoConvergence { solver: "box QP", iterations: 200 })
}

fn coordinate_sweeps(h: &DMatrix<f64>, g: &DVector<f64>, lo: f64, hi: f64, x: &mut DVector<f64>, sweeps: usize) {
    let n = g.len();
    let mut grad = h * &*x + g;
    for _ in 0..sweeps {
        let mut moved = 0.0f64;
        for k in 0..n {
            let hkk = h[(k, k)];
            let target = if hkk > 0.0 {
                (x[k] - grad[k] / hkk).clamp(lo, hi)
            } else if grad[k] > 0.0 {
                lo
            } else if grad[k] < 0.0 {
                hi
            } else {
                x[k]
            };
            let step = target - x[k];
            if step != 0.0 {
                x[k] = target;
                for r in 0..n {
                    grad[r] += h[(r, k)] * step;
                }
                moved = moved.max(step.abs());
            }
        }
        if moved <= 1e-15 * (1.0 + x.amax()) {
            break;
        }
    }
}

/// Largest violation of the box-QP optimality conditions at `x`.
pub fn kkt_violation(h: &DMatrix<f64>, g: &DVector<f64>, lo: f64, hi: f64, x: &DVector<f64>) -> f64 {
    let grad = h * x + g;
    (0..g.len())
        .map(|k| {
            // Projected-gradient residual.
            let moved = (x[k] - grad[k]).clamp(lo, hi);
            (moved - x[k]).abs()
        })
        .fold(0.0, f64::max)
}

/// Accelerated projected gradient with adaptive restart.
///
/// The step is backtracked on the curvature along the move,
/// `(grad(c) - grad(y)) . d <= |d|^2 / t`, which stays reliable when
/// objective differences drown in rounding. Stops once the unit-step
/// gradient-mapping residual `|x - P(x - grad(x))|_inf` drops below `tol`.
/// Returns the final point and the number of iterations. `f` is only used
/// to restart momentum when the objective rises.
pub fn projected_gradient<F, G, P>(f: F, grad: G, project: P, x0: DVector<f64>, tol: f64, max_iters: usize) -> Result<(DVector<f64>, usize)>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
    P: Fn(&DVector<f64>) -> DVector<f64>,
{
    let residual = |x: &DVector<f64>, g: &DVector<f64>| (x - project(&(x - g))).amax();
    let mut x = project(&x0);
    let mut gx = grad(&x);
    if residual(&x, &gx) < tol {
        return Ok((x, 0));
    }
    let mut fx = f(&x);
    let mut y = x.clone();
    let mut gy = gx.clone();
    let mut theta = 1.0_f64;
    let mut t = 1.0_f64;
    for iter in 1..=max_iters {
        let (next, g_next) = loop {
            let c = project(&(&y - &gy * t));
            let d = &c - &y;
            let dd = d.norm_squared();
            let gc = grad(&c);
            if dd == 0.0 {
                break (c, gc);
            }
            let curvature = (&gc - &gy).dot(&d);
            let noise = 1e-14 * d.norm() * (1.0 + gy.norm());
            if curvature <= dd / t + noise {
                break (c, gc);
            }
            t *= 0.5;
            if t < 1e-300 {
                return Err(Error::NumericalBreakdown("projected gradient step underflow".into()));
            }
        };
        let f_next = f(&next);
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        if f_next > fx || (&y - &next).dot(&(&next - &x)) > 0.0 {
            // Momentum points uphill: restart from the plain step.
            theta = 1.0;
            y = next.clone();
            gy = g_next.clone();
        } else {
            y = &next + (&next - &x) * ((theta - 1.0) / theta_next);
            theta = theta_next;
            gy = grad(&y);
        }
        x = next;
        gx = g_next;
        fx = f_next;
        if residual(&x, &gx) < tol {
            return Ok((x, iter));
        }
        t *= 1.1;
    }
    Err(Error::NoConvergence { solver: "projected gradient", iterations: max_iters })
}
