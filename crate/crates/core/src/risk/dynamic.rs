use std::sync::Arc;

use crate::error::{Error, Result};
use crate::prob_space::{Filtration, FiniteProbSpace, RandomVar, SubAlgebra};
use crate::scalar::Scalar;

use super::ConditionalRisk;

/// A conditional risk measure for each stage of a filtration.
#[derive(Clone)]
pub struct DynamicRiskMeasure<T: Scalar> {
    filtration: Filtration,
    measures: Vec<Arc<dyn ConditionalRisk<T>>>,
}

impl<T: Scalar> std::fmt::Debug for DynamicRiskMeasure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tags: Vec<String> = self.measures.iter().map(|m| m.tag().to_string()).collect();
        f.debug_struct("DynamicRiskMeasure")
            .field("filtration", &self.filtration)
            .field("measures", &tags)
            .finish()
    }
}

impl<T: Scalar> DynamicRiskMeasure<T> {
    /// Fails with [`Error::NotRefinement`] if a stage does not refine its predecessor.
    pub fn new(stages: Vec<(SubAlgebra, Arc<dyn ConditionalRisk<T>>)>) -> Result<Self> {
        let (algebras, measures): (Vec<_>, Vec<_>) = stages.into_iter().unzip();
        Ok(Self {
            filtration: Filtration::new(algebras)?,
            measures,
        })
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    pub fn measures(&self) -> &[Arc<dyn ConditionalRisk<T>>] {
        &self.measures
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    /// `(ρ_t(x))_t`, each measurable for its stage.
    pub fn evaluate(
        &self,
        space: &FiniteProbSpace<T>,
        x: &RandomVar<T>,
    ) -> Result<Vec<RandomVar<T>>> {
        if let Some(index) = x.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                op: "dynamic_evaluate",
                index,
            });
        }
        self.filtration
            .stages()
            .iter()
            .zip(&self.measures)
            .map(|(f, rho)| rho.evaluate(space, x, f))
            .collect()
    }
}
