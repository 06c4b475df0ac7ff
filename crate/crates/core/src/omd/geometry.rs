use nalgebra::DVector;

use crate::error::{Error, Result};

/// Distance-generating function `h` behind the prox-mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BregmanGeometry {
    /// `h(s) = 1/2 |s|_2^2`; the prox-mapping is a Euclidean projection.
    Euclidean,
    /// `h(s) = 1/2 |s|_p^2` with `1 < p <= 2`, suited to sparse iterates.
    PNorm(f64),
}

impl BregmanGeometry {
    pub fn pnorm(p: f64) -> Result<Self> {
        if !(p > 1.0 && p <= 2.0) {
            return Err(Error::InvalidConfig(format!("p-norm geometry needs 1 < p <= 2, got {p}")));
        }
        Ok(BregmanGeometry::PNorm(p))
    }

    /// Strong-convexity modulus of `h` with respect to its own norm.
    pub fn modulus(&self) -> f64 {
        match *self {
            BregmanGeometry::Euclidean => 1.0,
            BregmanGeometry::PNorm(p) => p - 1.0,
        }
    }

    pub fn h(&self, s: &DVector<f64>) -> f64 {
        match *self {
            BregmanGeometry::Euclidean => 0.5 * s.norm_squared(),
            BregmanGeometry::PNorm(p) => 0.5 * p_norm(s, p).powi(2),
        }
    }

    pub fn grad_h(&self, s: &DVector<f64>) -> DVector<f64> {
        match *self {
            BregmanGeometry::Euclidean => s.clone(),
            BregmanGeometry::PNorm(p) => {
                let norm = p_norm(s, p);
                if norm == 0.0 {
                    return DVector::zeros(s.len());
                }
                let scale = norm.powf(2.0 - p);
                s.map(|x| scale * x.signum() * x.abs().powf(p - 1.0))
            }
        }
    }
}

fn p_norm(s: &DVector<f64>, p: f64) -> f64 {
    s.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `D(s, x) = h(s) - h(x) - <grad h(x), s - x>`.
pub fn bregman_divergence(geom: &BregmanGeometry, s: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
    if s.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: s.len() });
    }
    if let BregmanGeometry::Euclidean = geom {
        return Ok(0.5 * (s - x).norm_squared());
    }
    Ok(geom.h(s) - geom.h(x) - geom.grad_h(x).dot(&(s - x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn euclidean_examples() {
        let g = BregmanGeometry::Euclidean;
        let d = bregman_divergence(&g, &DVector::from_vec(vec![1.0, 0.0]), &DVector::zeros(2)).unwrap();
        assert_eq!(d, 0.5);
        assert_eq!(g.modulus(), 1.0);
    }

    #[test]
    fn divergence_vanishes_on_the_diagonal() {
        let x = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        for g in [BregmanGeometry::Euclidean, BregmanGeometry::pnorm(1.5).unwrap(), BregmanGeometry::pnorm(1.1).unwrap()] {
            assert_abs_diff_eq!(bregman_divergence(&g, &x, &x).unwrap(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn pnorm_divergence_is_strongly_convex() {
        // h = 1/2 |.|_p^2 is (p-1)-strongly convex w.r.t. |.|_p, and |.|_p >= |.|_2 for p <= 2.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for p in [1.5, 1.2, 2.0] {
            let g = BregmanGeometry::pnorm(p).unwrap();
            for _ in 0..500 {
                let s = DVector::from_fn(4, |_, _| rng.random_range(-3.0..3.0));
                let x = DVector::from_fn(4, |_, _| rng.random_range(-3.0..3.0));
                let d = bregman_divergence(&g, &s, &x).unwrap();
                assert!(d >= 0.5 * g.modulus() * (&s - &x).norm_squared() - 1e-12);
            }
        }
    }

    #[test]
    fn pnorm_gradient_matches_differences() {
        let g = BregmanGeometry::pnorm(1.6).unwrap();
        let x = DVector::from_vec(vec![0.7, -0.4, 1.3]);
        let grad = g.grad_h(&x);
        for k in 0..3 {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[k] += 1e-6;
            dn[k] -= 1e-6;
            assert_abs_diff_eq!(grad[k], (g.h(&up) - g.h(&dn)) / 2e-6, epsilon = 1e-8);
        }
    }

    #[test]
    fn rejects_bad_exponent() {
        assert!(BregmanGeometry::pnorm(1.0).is_err());
        assert!(BregmanGeometry::pnorm(2.5).is_err());
    }
}
