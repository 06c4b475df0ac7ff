//! Per-iteration run records.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Initial,
    BestResponse,
    Formation,
    Admm,
    JointLearning,
    JointNetwork,
    Omd,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Initial => "initial",
            Layer::BestResponse => "best_response",
            Layer::Formation => "formation",
            Layer::Admm => "admm",
            Layer::JointLearning => "joint_learning",
            Layer::JointNetwork => "joint_network",
            Layer::Omd => "omd",
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Global, strictly increasing record index (assigned on push).
    pub iteration: usize,
    pub layer: Layer,
    /// Outer round for layered solvers, inner step otherwise.
    pub round: usize,
    pub potential: Option<f64>,
    pub costs: Vec<f64>,
    pub welfare: Option<f64>,
    pub max_delta: f64,
    pub primal_residual: Option<f64>,
    pub dual_residual: Option<f64>,
    pub distance_to_reference: Option<f64>,
}

impl TraceRecord {
    pub fn new(layer: Layer, round: usize) -> Self {
        Self {
            iteration: 0,
            layer,
            round,
            potential: None,
            costs: Vec::new(),
            welfare: None,
            max_delta: 0.0,
            primal_residual: None,
            dual_residual: None,
            distance_to_reference: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    records: Vec<TraceRecord>,
    pub converged: bool,
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, mut record: TraceRecord) {
        record.iteration = self.records.len();
        self.records.push(record);
    }

    /// Appends another trace, renumbering its records.
    pub fn extend(&mut self, other: RunTrace) {
        for r in other.records {
            self.push(r);
        }
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn potentials(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.potential).collect()
    }
}
