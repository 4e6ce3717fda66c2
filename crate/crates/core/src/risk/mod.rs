//! Conditional convex risk measures, their penalty functions and dual
//! representations, structural checks, and dynamic sequences.
//!
//! A dual variable `y` is feasible on an atom when `y <= 0` and `E[y|A] = -1`. It is
//! usually handled through the density `q = -y`, which lies in the weighted simplex
//! `{q >= 0, Σ w q = 1}` of the atom's conditional weights `w`.

mod checks;
mod dual;
mod dynamic;

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::prob_space::{FiniteProbSpace, RandomVar, SubAlgebra};
use crate::scalar::Scalar;

pub use checks::{
    axiom_check, extension_check, lebesgue_along, lebesgue_check, locality_check,
    penalty_bound_check, scalarization_check, uniform_order_continuity_check, AxiomReport,
    ExtensionReport, LebesgueReport, LocalityReport, LocalityWitness, PenaltyBoundAtom,
    PenaltyBoundReport, ScalarizationReport, Scalarized, UniformOrderReport,
};
pub use dual::{
    attainment_check, fenchel_conjugate, robust_representation, AttainmentReport, DualCertificate,
    DualOptions,
};
pub use dynamic::DynamicRiskMeasure;

/// Constraint tolerance for `y <= 0`.
pub const SIGN_TOL: f64 = 1e-12;
/// Constraint tolerance for `E[y|A] = -1`.
pub const MEAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum RiskTag<T> {
    Entropic { gamma: T },
    WorstCase,
    Linear,
    Custom(String),
}

impl<T: fmt::Display> fmt::Display for RiskTag<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskTag::Entropic { gamma } => write!(f, "entropic({gamma})"),
            RiskTag::WorstCase => f.write_str("worst_case"),
            RiskTag::Linear => f.write_str("linear"),
            RiskTag::Custom(label) => write!(f, "custom({label})"),
        }
    }
}

/// How the per-atom dual problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualHint {
    /// Projected gradient ascent over the weighted simplex.
    Gradient,
    /// The penalty vanishes on the simplex, so a vertex is optimal; the lowest
    /// index wins ties.
    Vertex,
    /// The only density with finite penalty is `q = 1`.
    Uniform,
}

/// A conditional convex risk measure on a finite space.
///
/// Implementations must be monotone (decreasing), cash invariant for measurable
/// shifts and convex for measurable weights; [`axiom_check`] tests this on samples.
pub trait ConditionalRisk<T: Scalar>: Send + Sync {
    fn tag(&self) -> RiskTag<T>;

    /// `ρ(x)`, measurable for `f`.
    fn evaluate(
        &self,
        space: &FiniteProbSpace<T>,
        x: &RandomVar<T>,
        f: &SubAlgebra,
    ) -> Result<RandomVar<T>>;

    /// Closed-form penalty `ρ*(-q)` on one atom for a density `q` in the weighted
    /// simplex of `w`.
    fn penalty_atom(&self, _q: &[T], _w: &[T]) -> Option<T> {
        None
    }

    /// Gradient of [`Self::penalty_atom`] in the `w`-weighted metric.
    fn penalty_gradient_atom(&self, _q: &[T], _w: &[T]) -> Option<Vec<T>> {
        None
    }

    fn dual_hint(&self) -> DualHint {
        DualHint::Gradient
    }

    /// Whether numeric conjugation is permitted. Black boxes must be certified first.
    fn trusted(&self) -> bool {
        true
    }
}

fn check_var<T: Scalar>(
    space: &FiniteProbSpace<T>,
    x: &RandomVar<T>,
    f: &SubAlgebra,
    op: &'static str,
) -> Result<()> {
    for found in [x.len(), f.n_outcomes()] {
        if found != space.n_outcomes() {
            return Err(Error::DimensionMismatch {
                expected: space.n_outcomes(),
                found,
            });
        }
    }
    match x.values().iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { op, index }),
        None => Ok(()),
    }
}

/// `ρ(x) = γ⁻¹ log E[exp(-γx) | F]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entropic<T> {
    gamma: T,
}

impl<T: Scalar> Entropic<T> {
    pub fn new(gamma: T) -> Result<Self> {
        if !(gamma > T::zero() && gamma.is_finite()) {
            return Err(Error::Parameter(format!(
                "entropic gamma must be positive and finite, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// Gibbs density `e^{-γx} / E[e^{-γx}|A]`, the dual optimum.
    pub fn gibbs_density(
        &self,
        space: &FiniteProbSpace<T>,
        x: &RandomVar<T>,
        f: &SubAlgebra,
    ) -> Result<RandomVar<T>> {
        check_var(space, x, f, "gibbs_density")?;
        let mut q = vec![T::zero(); x.len()];
        for atom in f.atoms() {
            let m = atom
                .iter()
                .fold(T::neg_infinity(), |m, &i| m.max(-self.gamma * x[i]));
            let mass: T = atom.iter().map(|&i| space.prob(i)).sum();
            let s: T = atom
                .iter()
                .map(|&i| space.prob(i) * (-self.gamma * x[i] - m).exp())
                .sum();
            for &i in atom {
                q[i] = (-self.gamma * x[i] - m).exp() * mass / s;
            }
        }
        RandomVar::new(q)
    }
}

impl<T: Scalar> ConditionalRisk<T> for Entropic<T> {
    fn tag(&self) -> RiskTag<T> {
        RiskTag::Entropic { gamma: self.gamma }
    }

    fn evaluate(
        &self,
        space: &FiniteProbSpace<T>,
        x: &RandomVar<T>,
        f: &SubAlgebra,
    ) -> Result<RandomVar<T>> {
        check_var(space, x, f, "entropic")?;
        let per_atom: Vec<T> = f
            .atoms()
            .iter()
            .map(|atom| {
                let m = atom
                    .iter()
                    .fold(T::neg_infinity(), |m, &i| m.max(-self.gamma * x[i]));
                // Mass and shifted sum run in the same order so a constant x gives
                // an exact ratio of one.
                let mass: T = atom.iter().map(|&i| space.prob(i)).sum();
                let s: T = atom
                    .iter()
                    .map(|&i| space.prob(i) * (-self.gamma * x[i] - m).exp())
                    .sum();
                (m + (s / mass).ln()) / self.gamma + T::zero()
            })
            .collect();
        Ok(f.broadcast(&per_atom))
    }

    fn penalty_atom(&self, q: &[T], w: &[T]) -> Option<T> {
        let ent: T = q
            .iter()
            .zip(w)
            .map(|(&qi, &wi)| {
                if qi > T::zero() {
                    wi * qi * qi.ln()
                } else {
                    T::zero()
                }
            })
            .sum();
        Some(ent / self.gamma)
    }

    fn penalty_gradient_atom(&self, q: &[T], _w: &[T]) -> Option<Vec<T>> {
        let floor = T::min_positive_value();
        Some(
            q.iter()
                .map(|&qi| (qi.max(floor).ln() + T::one()) / self.gamma)
                .collect(),
        )
    }
}

/// `ρ(x) = ess sup(-x | F)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WorstCase;

impl<T: Scalar> ConditionalRisk<T> for WorstCase {
    fn tag(&self) -> RiskTag<T> {
        RiskTag::WorstCase
    }

    fn evaluate(
        &self,
        space: &FiniteProbSpace<T>,
        x: &RandomVar<T>,
        f: &SubAlgebra,
    ) -> Result<RandomVar<T>> {
        check_var(space, x, f, "worst_case")?;
        Ok(space.ess_sup_cond(&-x, f)?.map(|v| v + T::zero()))
    }

    fn penalty_atom(&self, _q: &[T], _w: &[T]) -> Option<T> {
        Some(T::zero())
    }

    fn penalty_gradient_atom(&self, q: &[T], _w: &[T]) -> Option<Vec<T>> {
        Some(vec![T::zero(); q.len()])
    }

    fn dual_hint(&self) -> DualHint {
        DualHint::Vertex
    }
}

/// `ρ(x) = E[-x | F]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinearRisk;

impl<T: Scalar> ConditionalRisk<T> for LinearRisk {
    fn tag(&self) -> RiskTag<T> {
        RiskTag::Linear
    }

    fn evaluate(
        &self,
        space: &FiniteProbSpace<T>,
        x: &RandomVar<T>,
        f: &SubAlgebra,
    ) -> Result<RandomVar<T>> {
        check_var(space, x, f, "linear")?;
        Ok(space.cond_expectation(x, f)?.map(|v| -v + T::zero()))
    }

    fn penalty_atom(&self, q: &[T], _w: &[T]) -> Option<T> {
        let tol = T::tol(MEAN_TOL);
        Some(if q.iter().all(|&qi| (qi - T::one()).abs() <= tol) {
            T::zero()
        } else {
            T::infinity()
        })
    }

    fn penalty_gradient_atom(&self, q: &[T], _w: &[T]) -> Option<Vec<T>> {
        Some(vec![T::zero(); q.len()])
    }

    fn dual_hint(&self) -> DualHint {
        DualHint::Uniform
    }
}

type RiskFn<T> =
    dyn Fn(&FiniteProbSpace<T>, &RandomVar<T>, &SubAlgebra) -> Result<RandomVar<T>> + Send + Sync;

/// A black-box risk measure. Its conjugate is computed numerically, which is refused
/// until [`CustomRisk::certify`] has passed.
#[derive(Clone)]
pub struct CustomRisk<T> {
    label: String,
    eval: Arc<RiskFn<T>>,
    certified: bool,
}

impl<T> fmt::Debug for CustomRisk<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomRisk")
            .field("label", &self.label)
            .field("certified", &self.certified)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> CustomRisk<T> {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(&FiniteProbSpace<T>, &RandomVar<T>, &SubAlgebra) -> Result<RandomVar<T>>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(eval),
            certified: false,
        }
    }

    pub fn is_certified(&self) -> bool {
        self.certified
    }

    /// Runs [`locality_check`] and [`axiom_check`] on `trials` random samples for the
    /// algebra `f` and marks the measure as certified when both pass.
    pub fn certify<R: Rng + ?Sized>(
        mut self,
        space: &FiniteProbSpace<T>,
        f: &SubAlgebra,
        trials: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let local = locality_check(|x| (self.eval)(space, x, f), space, f, trials, rng)?;
        if !local.passed {
            return Err(Error::Contract(format!(
                "{} is not local: {:?}",
                self.label, local.witness
            )));
        }
        let axioms = axiom_check(&self, space, f, trials, rng)?;
        if !axioms.passed {
            return Err(Error::Contract(format!(
                "{} fails the risk axioms: monotonicity {}, cash invariance {}, convexity {}",
                self.label, axioms.monotonicity, axioms.cash_invariance, axioms.convexity
            )));
        }
        self.certified = true;
        Ok(self)
    }
}

impl<T: Scalar> ConditionalRisk<T> for CustomRisk<T> {
    fn tag(&self) -> RiskTag<T> {
        RiskTag::Custom(self.label.clone())
    }

    fn evaluate(
        &self,
        space: &FiniteProbSpace<T>,
        x: &RandomVar<T>,
        f: &SubAlgebra,
    ) -> Result<RandomVar<T>> {
        check_var(space, x, f, "custom")?;
        let out = (self.eval)(space, x, f)?;
        if !f.is_measurable(&out) {
            return Err(Error::Contract(format!(
                "{} returned a value that is not F-measurable",
                self.label
            )));
        }
        Ok(out)
    }

    fn trusted(&self) -> bool {
        self.certified
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(v: &[f64]) -> RandomVar<f64> {
        RandomVar::new(v.to_vec()).unwrap()
    }

    #[test]
    fn entropic_examples() {
        let space = FiniteProbSpace::uniform(2).unwrap();
        let f = SubAlgebra::trivial(2);
        let rho = Entropic::new(1.0).unwrap();
        let v = rho.evaluate(&space, &rv(&[0.0, 4f64.ln()]), &f).unwrap();
        assert!((v[0] - 0.625f64.ln()).abs() < 1e-12);
        assert_eq!(rho.evaluate(&space, &rv(&[2.5, 2.5]), &f).unwrap()[0], -2.5);
        assert_eq!(rho.evaluate(&space, &rv(&[0.0, 0.0]), &f).unwrap()[0], 0.0);
        assert_eq!(rho.penalty_atom(&[1.0, 1.0], &[0.5, 0.5]), Some(0.0));
        assert!(Entropic::new(0.0).is_err());
        assert!(Entropic::new(f64::NAN).is_err());
    }

    #[test]
    fn entropic_survives_large_inputs() {
        let space = FiniteProbSpace::uniform(3).unwrap();
        let f = SubAlgebra::trivial(3);
        let rho = Entropic::new(5.0).unwrap();
        let v = rho
            .evaluate(&space, &rv(&[-400.0, 0.0, 300.0]), &f)
            .unwrap()[0];
        assert!((v - (400.0 - 3f64.ln() / 5.0)).abs() < 1e-9, "{v}");
    }

    #[test]
    fn worst_case_and_linear_examples() {
        let space = FiniteProbSpace::uniform(2).unwrap();
        let f = SubAlgebra::trivial(2);
        assert_eq!(
            ConditionalRisk::<f64>::evaluate(&WorstCase, &space, &rv(&[1.0, 3.0]), &f).unwrap()[0],
            -1.0
        );
        let zero = rv(&[0.0, 0.0]);
        let w = ConditionalRisk::<f64>::evaluate(&WorstCase, &space, &zero, &f).unwrap()[0];
        assert!(w == 0.0 && w.is_sign_positive());
        let l = ConditionalRisk::<f64>::evaluate(&LinearRisk, &space, &zero, &f).unwrap()[0];
        assert!(l == 0.0 && l.is_sign_positive());
        assert_eq!(
            ConditionalRisk::<f64>::evaluate(&LinearRisk, &space, &rv(&[1.0, 3.0]), &f).unwrap()[0],
            -2.0
        );
    }

    #[test]
    fn evaluate_rejects_bad_input() {
        let space = FiniteProbSpace::uniform(2).unwrap();
        let f = SubAlgebra::trivial(2);
        let rho = Entropic::new(1.0).unwrap();
        assert!(matches!(
            rho.evaluate(&space, &rv(&[1.0, f64::INFINITY]), &f),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(matches!(
            rho.evaluate(&space, &rv(&[1.0]), &f),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gibbs_density_is_normalized_per_atom() {
        let space = FiniteProbSpace::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let f = SubAlgebra::new(4, vec![vec![0, 2], vec![1, 3]]).unwrap();
        let rho = Entropic::new(2.0).unwrap();
        let q = rho
            .gibbs_density(&space, &rv(&[0.3, -1.0, 2.0, 0.5]), &f)
            .unwrap();
        let m = space.cond_expectation(&q, &f).unwrap();
        assert!(m.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }
}
