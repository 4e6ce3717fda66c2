mod common;

use common::{feasible_y, instance, space_and_partition};
use orlicz_risk::risk::{
    attainment_check, fenchel_conjugate, locality_check, penalty_bound_check,
    robust_representation, scalarization_check,
};
use orlicz_risk::{
    pairing, ConditionalRisk, DualOptions, Entropic, LinearRisk, RandomVar, WorstCase,
};
use proptest::prelude::*;
use rand::SeedableRng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weak_duality(inst in instance(), raw in prop::collection::vec(0.05f64..2.0, 12), gamma in 0.2f64..3.0) {
        let y = feasible_y(&inst.space, &inst.f, &raw[..inst.x.len()]);
        let measures: [&dyn ConditionalRisk<f64>; 2] = [&Entropic::new(gamma).unwrap(), &WorstCase];
        for rho in measures {
            let r = rho.evaluate(&inst.space, &inst.x, &inst.f).unwrap();
            let pen = fenchel_conjugate(rho, &inst.space, &y, &inst.f).unwrap();
            let pair = pairing(&inst.space, &inst.x, &y, &inst.f).unwrap();
            for i in 0..y.len() {
                prop_assert!(pair[i] - pen[i] <= r[i] + 1e-8);
            }
        }
    }

    #[test]
    fn strong_duality_and_gibbs(inst in instance(), gamma in 0.2f64..3.0) {
        let rho = Entropic::new(gamma).unwrap();
        let cert = robust_representation(&rho, &inst.space, &inst.x, &inst.f, &DualOptions::default()).unwrap();
        prop_assert!(cert.max_gap() <= 1e-6, "gap {}", cert.max_gap());
        prop_assert!(cert.gap.values().iter().all(|&g| g >= -1e-8));
        let gibbs = rho.gibbs_density(&inst.space, &inst.x, &inst.f).unwrap();
        for i in 0..gibbs.len() {
            prop_assert!((-cert.y[i] - gibbs[i]).abs() <= 1e-6, "{} vs {}", -cert.y[i], gibbs[i]);
        }
        let mean = inst.space.cond_expectation(&cert.y, &inst.f).unwrap();
        prop_assert!(mean.values().iter().all(|m| (m + 1.0).abs() <= 1e-10));
        prop_assert!(cert.y.values().iter().all(|&v| v <= 0.0));
    }

    #[test]
    fn worst_case_vertex_certificate(inst in instance()) {
        let cert = robust_representation(&WorstCase, &inst.space, &inst.x, &inst.f, &DualOptions::default()).unwrap();
        prop_assert!(cert.max_gap() <= 1e-12);
        for atom in inst.f.atoms() {
            let support: Vec<usize> = atom.iter().copied().filter(|&i| cert.y[i] != 0.0).collect();
            prop_assert_eq!(support.len(), 1);
            let min = atom.iter().map(|&i| inst.x[i]).fold(f64::INFINITY, f64::min);
            let first = atom.iter().copied().find(|&i| inst.x[i] == min).unwrap();
            prop_assert_eq!(support[0], first);
        }
    }

    #[test]
    fn conjugate_is_infinite_off_domain(inst in instance(), raw in prop::collection::vec(0.05f64..2.0, 12), bump in 0.01f64..1.0) {
        let mut y = feasible_y(&inst.space, &inst.f, &raw[..inst.x.len()]).into_values();
        y[0] += bump;
        let y = RandomVar::new(y).unwrap();
        let k = inst.f.atom_of(0);
        let pen = fenchel_conjugate(&Entropic::new(1.0).unwrap(), &inst.space, &y, &inst.f).unwrap();
        prop_assert!(pen[inst.f.atom(k)[0]].is_infinite());
    }

    #[test]
    fn penalty_bound(inst in instance(), raw in prop::collection::vec(0.05f64..2.0, 12), beta in 0.0f64..2.0) {
        let y = feasible_y(&inst.space, &inst.f, &raw[..inst.x.len()]);
        let rho = Entropic::new(1.0).unwrap();
        let rep = penalty_bound_check(&rho, &inst.space, &inst.x, &y, beta, &inst.f).unwrap();
        prop_assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn scalarization_identity((space, f) in space_and_partition(), raw in prop::collection::vec(0.2f64..2.0, 12)) {
        let y = feasible_y(&space, &f, &raw[..space.n_outcomes()]);
        let rep = scalarization_check(&Entropic::new(1.0).unwrap(), &space, &f, &y).unwrap();
        prop_assert!(rep.agree, "{rep:?}");
    }
}

#[test]
fn shipped_measures_local_and_attained() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let space = orlicz_risk::FiniteProbSpace::new(vec![0.05, 0.1, 0.2, 0.15, 0.3, 0.2]).unwrap();
    let f = orlicz_risk::SubAlgebra::new(6, vec![vec![0, 5], vec![1, 2, 4], vec![3]]).unwrap();
    let measures: [&dyn ConditionalRisk<f64>; 3] =
        [&Entropic::new(0.7).unwrap(), &WorstCase, &LinearRisk];
    for rho in measures {
        let rep =
            locality_check(|x| rho.evaluate(&space, x, &f), &space, &f, 25, &mut rng).unwrap();
        assert!(rep.passed, "{}", rho.tag());
        let x = RandomVar::new(vec![0.3, -1.2, 2.0, 0.0, 0.7, -0.1]).unwrap();
        let att = attainment_check(rho, &space, &x, &f, &DualOptions::default()).unwrap();
        assert!(att.attained, "{}: {:?}", rho.tag(), att.residual);
    }
}
