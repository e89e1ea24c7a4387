//! Per-iteration diagnostics recorded by the solver drivers.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DVector;

/// One row of a convergence trace. Absent cells are `None`, never NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    pub k: usize,
    pub norm_v: f64,
    pub cos_theta: Option<f64>,
    pub dist_z: Option<f64>,
    pub dist_x: Option<f64>,
    pub objective: Option<f64>,
    pub extrapolated: bool,
    /// Cumulative wall time in milliseconds.
    pub ms: f64,
}

impl IterRecord {
    /// Equality ignoring wall time.
    pub fn same_numbers(&self, other: &IterRecord) -> bool {
        fn same(a: Option<f64>, b: Option<f64>) -> bool {
            match (a, b) {
                (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
                (None, None) => true,
                _ => false,
            }
        }
        self.k == other.k
            && self.norm_v.to_bits() == other.norm_v.to_bits()
            && same(self.cos_theta, other.cos_theta)
            && same(self.dist_z, other.dist_z)
            && same(self.dist_x, other.dist_x)
            && same(self.objective, other.objective)
            && self.extrapolated == other.extrapolated
    }
}

/// A reference solution that distances are measured against.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub z: DVector<f64>,
    pub x: DVector<f64>,
}

/// Receives one record per outer iteration.
pub trait TraceSink {
    fn record(&mut self, record: IterRecord);

    fn reference(&self) -> Option<&Reference> {
        None
    }
}

/// Discards everything.
#[derive(Debug, Default)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _record: IterRecord) {}
}

#[derive(Clone, Debug, Default)]
pub struct Trace {
    /// Run metadata, kept sorted so that serialization is deterministic.
    pub meta: BTreeMap<String, String>,
    pub records: Vec<IterRecord>,
    pub reference: Option<Arc<Reference>>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_reference(reference: Arc<Reference>) -> Self {
        Self {
            reference: Some(reference),
            ..Self::default()
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    /// First `k` with `dist_x <= tol`.
    pub fn iterations_to_dist_x(&self, tol: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.dist_x.is_some_and(|d| d <= tol))
            .map(|r| r.k)
    }

    /// First `k` with `dist_z <= tol`.
    pub fn iterations_to_dist_z(&self, tol: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.dist_z.is_some_and(|d| d <= tol))
            .map(|r| r.k)
    }

    pub fn cos_thetas(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.cos_theta).collect()
    }

    /// Same records and metadata, wall time ignored.
    pub fn same_numbers(&self, other: &Trace) -> bool {
        self.meta == other.meta
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| a.same_numbers(b))
    }
}

impl TraceSink for Trace {
    fn record(&mut self, record: IterRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.k < record.k));
        self.records.push(record);
    }

    fn reference(&self) -> Option<&Reference> {
        self.reference.as_deref()
    }
}
