#![allow(dead_code)]

use orlicz_risk::{FiniteProbSpace, RandomVar, SubAlgebra};
use proptest::prelude::*;

/// A random space with at most 12 outcomes, a partition into at most 4 atoms, and a
/// variable with entries in `[-3, 3]`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub space: FiniteProbSpace<f64>,
    pub f: SubAlgebra,
    pub x: RandomVar<f64>,
}

pub fn space_and_partition() -> impl Strategy<Value = (FiniteProbSpace<f64>, SubAlgebra)> {
    (1usize..=12)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.05f64..1.0, n),
                prop::collection::vec(0usize..4, n),
            )
        })
        .prop_map(|(raw, labels)| {
            let total: f64 = raw.iter().sum();
            let mut probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
            let drift = 1.0 - probs.iter().sum::<f64>();
            probs[0] += drift;
            (
                FiniteProbSpace::new(probs).unwrap(),
                SubAlgebra::from_labels(&labels),
            )
        })
}

pub fn instance() -> impl Strategy<Value = Instance> {
    space_and_partition().prop_flat_map(|(space, f)| {
        let n = space.n_outcomes();
        prop::collection::vec(-3.0f64..3.0, n).prop_map(move |x| Instance {
            space: space.clone(),
            f: f.clone(),
            x: RandomVar::new(x).unwrap(),
        })
    })
}

/// A feasible dual variable: `y <= 0` with `E[y|F] = -1`, built from positive
/// entries in `[lo, hi]`.
pub fn feasible_y(space: &FiniteProbSpace<f64>, f: &SubAlgebra, raw: &[f64]) -> RandomVar<f64> {
    let q = RandomVar::new(raw.to_vec()).unwrap();
    let m = space.cond_expectation(&q, f).unwrap();
    q.zip_map(&m, |a, b| -a / b)
}

pub fn per_atom_max(v: &RandomVar<f64>, f: &SubAlgebra) -> Vec<f64> {
    f.atom_values(v)
}
