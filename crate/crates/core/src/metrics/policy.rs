use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::trec_io::{Grade, TaskKind};

/// How grades turn into binary relevance and graded gain for one task.
///
/// Unjudged documents always count as grade 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevancePolicy {
    pub task: TaskKind,
    /// Minimum grade counted as relevant by binary measures (RR, AP, P@k) and by the relevance model.
    pub binary_threshold: u8,
    /// Gain per grade 0..=3 for NDCG and NCG.
    pub gains: [f64; 4],
    /// Depth for NCG when the caller does not pick one.
    pub ncg_depth: usize,
}

impl RelevancePolicy {
    /// Document task: every grade above irrelevant is relevant.
    pub fn document() -> Self {
        Self {
            task: TaskKind::Document,
            binary_threshold: 1,
            gains: [0.0, 1.0, 2.0, 3.0],
            ncg_depth: 100,
        }
    }

    /// Passage task: only grades 2 and 3 are relevant, while "related" (1)
    /// still earns gain 1 in graded measures.
    pub fn passage() -> Self {
        Self {
            task: TaskKind::Passage,
            binary_threshold: 2,
            gains: [0.0, 1.0, 2.0, 3.0],
            ncg_depth: 1000,
        }
    }

    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::Document => Self::document(),
            TaskKind::Passage => Self::passage(),
        }
    }

    /// Gain `2^grade - 1` instead of the linear default.
    pub fn with_exponential_gain(mut self) -> Self {
        self.gains = [0.0, 1.0, 3.0, 7.0];
        self
    }

    /// Policy used against sparse labels, where any listed positive counts.
    pub fn sparse(task: TaskKind) -> Self {
        Self {
            binary_threshold: 1,
            ..Self::for_task(task)
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(1..=2).contains(&self.binary_threshold) {
            return Err(format!("binary threshold {} must be 1 or 2", self.binary_threshold));
        }
        if self.gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err("gains must be finite and non-negative".into());
        }
        if self.gains.windows(2).any(|w| w[1] < w[0]) {
            return Err("gains must be non-decreasing in grade".into());
        }
        if self.gains[0] != 0.0 {
            return Err("grade 0 must have zero gain".into());
        }
        if self.ncg_depth == 0 {
            return Err("NCG depth must be at least 1".into());
        }
        Ok(())
    }

    pub fn is_relevant(&self, grade: Option<Grade>) -> bool {
        grade.is_some_and(|g| g.value() >= self.binary_threshold)
    }

    pub fn gain<F: Scalar>(&self, grade: Option<Grade>) -> F {
        F::lit(grade.map_or(0.0, |g| self.gains[g.value() as usize]))
    }
}
