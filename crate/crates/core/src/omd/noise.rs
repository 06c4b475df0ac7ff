use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Corruption applied to neighbour actions as they travel over links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    None,
    /// I.i.d. `N(0, sigma^2)` per coordinate.
    Gaussian(f64),
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("noise sigma must be nonnegative, got {sigma}")));
        }
        Ok(NoiseModel::Gaussian(sigma))
    }
}

/// Generator for player `player` in round `round`, independent of evaluation order.
pub fn round_rng(seed: u64, player: usize, round: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((round as u64) << 24) | player as u64);
    rng
}

/// Noisy copies of the observed actions; the identity for `NoiseModel::None` or `sigma = 0`.
pub fn noisy_feedback<R: Rng + ?Sized>(observed: &[DVector<f64>], noise: &NoiseModel, rng: &mut R) -> Vec<DVector<f64>> {
    match *noise {
        NoiseModel::Gaussian(sigma) if sigma > 0.0 => {
            let normal = Normal::new(0.0, sigma).expect("sigma validated at construction");
            observed.iter().map(|u| u.map(|x| x + normal.sample(rng))).collect()
        }
        _ => observed.to_vec(),
    }
}
