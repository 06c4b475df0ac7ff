//! Local learning costs.
//!
//! The quadratic loss keeps the sufficient statistics of a least-squares
//! problem. With `X = sum x x^T`, `Y = -2 sum x y` and `y_sq = sum y^2`,
//!
//! ```text
//! (1/K) sum (y - x^T u)^2 = (1/K) (u^T X u + Y^T u + y_sq)
//! ```
//!
//! so the "reduced" value (without `y_sq`) differs from the mean squared
//! error by a constant only. The player weight `alpha` is applied by the game,
//! not here.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLoss {
    xx: DMatrix<f64>,
    lin: DVector<f64>,
    count: usize,
    y_sq: f64,
    /// Row-stacked samples, kept when built from data so low-rank solves can use them.
    design: Option<DMatrix<f64>>,
}

impl QuadraticLoss {
    pub fn new(xx: DMatrix<f64>, lin: DVector<f64>, count: usize, y_sq: f64) -> Result<Self> {
        let d = xx.nrows();
        if xx.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: xx.ncols() });
        }
        if lin.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: lin.len() });
        }
        if count == 0 {
            return Err(Error::EmptyData);
        }
        if (&xx - xx.transpose()).amax() > SYMMETRY_TOL {
            return Err(Error::InvalidConfig("quadratic term is not symmetric".into()));
        }
        let min_eig = xx.clone().symmetric_eigenvalues().min();
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidConfig(format!("quadratic term is not positive semidefinite (eigenvalue {min_eig:e})")));
        }
        Ok(Self { xx, lin, count, y_sq, design: None })
    }

    pub fn from_data<'a, I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut rows: Vec<&[f64]> = Vec::new();
        let mut labels = Vec::new();
        for (x, y) in points {
            if let Some(first) = rows.first() {
                if first.len() != x.len() {
                    return Err(Error::DimensionMismatch { expected: first.len(), found: x.len() });
                }
            }
            rows.push(x);
            labels.push(y);
        }
        let Some(first) = rows.first() else {
            return Err(Error::EmptyData);
        };
        let d = first.len();
        let design = DMatrix::from_fn(rows.len(), d, |k, c| rows[k][c]);
        let labels = DVector::from_vec(labels);
        Self::from_design(design, &labels)
    }

    /// Builds the statistics from a `K x d` design matrix and `K` labels.
    pub fn from_design(design: DMatrix<f64>, labels: &DVector<f64>) -> Result<Self> {
        if design.nrows() == 0 {
            return Err(Error::EmptyData);
        }
        if labels.len() != design.nrows() {
            return Err(Error::DimensionMismatch { expected: design.nrows(), found: labels.len() });
        }
        let xx = design.tr_mul(&design);
        let lin = design.tr_mul(labels) * -2.0;
        Ok(Self { xx, lin, count: design.nrows(), y_sq: labels.norm_squared(), design: Some(design) })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lin.len()
    }

    /// `sum x x^T`.
    pub fn xx(&self) -> &DMatrix<f64> {
        &self.xx
    }

    /// `-2 sum x y`.
    pub fn lin(&self) -> &DVector<f64> {
        &self.lin
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn y_sq(&self) -> f64 {
        self.y_sq
    }

    pub fn design(&self) -> Option<&DMatrix<f64>> {
        self.design.as_ref()
    }

    pub fn value(&self, u: &DVector<f64>, exact: bool) -> Result<f64> {
        self.check_dim(u)?;
        let k = self.count as f64;
        let reduced = (u.dot(&(&self.xx * u)) + self.lin.dot(u)) / k;
        Ok(if exact { reduced + self.y_sq / k } else { reduced })
    }

    pub fn gradient(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(u)?;
        Ok((&self.xx * u * 2.0 + &self.lin) / self.count as f64)
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        &self.xx * (2.0 / self.count as f64)
    }

    fn check_dim(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: u.len() });
        }
        Ok(())
    }
}

/// Mean logistic loss `(1/K) sum log(1 + exp(-y x^T u))` with labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticLoss {
    design: DMatrix<f64>,
    labels: DVector<f64>,
}

impl LogisticLoss {
    pub fn new(design: DMatrix<f64>, labels: DVector<f64>) -> Result<Self> {
        if design.nrows() == 0 {
            return Err(Error::EmptyData);
        }
        if labels.len() != design.nrows() {
            return Err(Error::DimensionMismatch { expected: design.nrows(), found: labels.len() });
        }
        Ok(Self { design, labels })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn margins(&self, u: &DVector<f64>) -> DVector<f64> {
        (&self.design * u).component_mul(&self.labels)
    }

    pub fn value(&self, u: &DVector<f64>) -> f64 {
        let k = self.labels.len() as f64;
        self.margins(u).iter().map(|&z| softplus(-z)).sum::<f64>() / k
    }

    pub fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        let k = self.labels.len() as f64;
        let weights = self.margins(u).zip_map(&self.labels, |z, y| -y * sigmoid(-z));
        self.design.tr_mul(&weights) / k
    }

    pub fn hessian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let k = self.labels.len() as f64;
        let curvature = self.margins(u).map(|z| {
            let s = sigmoid(z);
            s * (1.0 - s)
        });
        let scaled = DMatrix::from_fn(self.design.nrows(), self.dim(), |r, c| self.design[(r, c)] * curvature[r]);
        self.design.tr_mul(&scaled) / k
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() }
}

/// A player's local loss.
#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec {
    Quadratic(QuadraticLoss),
    Logistic(LogisticLoss),
}

impl LossSpec {
    pub fn dim(&self) -> usize {
        match self {
            LossSpec::Quadratic(q) => q.dim(),
            LossSpec::Logistic(l) => l.dim(),
        }
    }

    /// `exact` only matters for the quadratic loss, where it restores the `y_sq / K` offset.
    pub fn value(&self, u: &DVector<f64>, exact: bool) -> Result<f64> {
        match self {
            LossSpec::Quadratic(q) => q.value(u, exact),
            LossSpec::Logistic(l) => {
                self.check_dim(u)?;
                Ok(l.value(u))
            }
        }
    }

    pub fn gradient(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            LossSpec::Quadratic(q) => q.gradient(u),
            LossSpec::Logistic(l) => {
                self.check_dim(u)?;
                Ok(l.gradient(u))
            }
        }
    }

    pub fn hessian(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(u)?;
        Ok(match self {
            LossSpec::Quadratic(q) => q.hessian(),
            LossSpec::Logistic(l) => l.hessian(u),
        })
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticLoss> {
        match self {
            LossSpec::Quadratic(q) => Some(q),
            LossSpec::Logistic(_) => None,
        }
    }

    fn check_dim(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: u.len() });
        }
        Ok(())
    }
}

impl From<QuadraticLoss> for LossSpec {
    fn from(q: QuadraticLoss) -> Self {
        LossSpec::Quadratic(q)
    }
}

impl From<LogisticLoss> for LossSpec {
    fn from(l: LogisticLoss) -> Self {
        LossSpec::Logistic(l)
    }
}
