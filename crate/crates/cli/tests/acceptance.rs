//! Acceptance suite. Runs as a plain binary (`harness = false`) so that every
//! criterion prints exactly one PASS or FAIL line; exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use orlicz_risk::risk::{
    attainment_check, extension_check, lebesgue_check, locality_check, penalty_bound_check,
    robust_representation, scalarization_check,
};
use orlicz_risk::solvers::{bisect_monotone, golden_min, simplex_max, FnObjective, SimplexOptions};
use orlicz_risk::{
    amemiya_norm, luxemburg_norm, pairing, pairing_operator_norm, recover_density, ConditionalRisk,
    CustomRisk, DualOptions, Entropic, FiniteProbSpace, NormOptions, RandomVar, SubAlgebra,
    WorstCase, YoungFn,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type Objective<'a> = (&'a dyn Fn(&[f64]) -> f64, &'a dyn Fn(&[f64]) -> Vec<f64>);

struct Inst {
    space: FiniteProbSpace<f64>,
    f: SubAlgebra,
    x: RandomVar<f64>,
}

/// At most 12 outcomes, at most 4 atoms, entries of `x` in `[-3, 3]`.
fn instance(rng: &mut ChaCha8Rng) -> Inst {
    let n = rng.gen_range(1..=12);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
    probs[0] += 1.0 - probs.iter().sum::<f64>();
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
    Inst {
        space: FiniteProbSpace::new(probs).unwrap(),
        f: SubAlgebra::from_labels(&labels),
        x: rvar(rng, n, 3.0),
    }
}

fn rvar(rng: &mut ChaCha8Rng, n: usize, r: f64) -> RandomVar<f64> {
    RandomVar::new((0..n).map(|_| rng.gen_range(-r..r)).collect()).unwrap()
}

fn feasible_y(
    rng: &mut ChaCha8Rng,
    space: &FiniteProbSpace<f64>,
    f: &SubAlgebra,
) -> RandomVar<f64> {
    let n = space.n_outcomes();
    let q = RandomVar::new((0..n).map(|_| rng.gen_range(0.05..2.0)).collect()).unwrap();
    let m = space.cond_expectation(&q, f).unwrap();
    q.zip_map(&m, |a, b| -a / b)
}

fn families() -> Vec<(String, YoungFn<f64>)> {
    let mut out: Vec<(String, YoungFn<f64>)> = [1.0, 1.5, 2.0, 3.0]
        .iter()
        .map(|&p| (format!("power {p}"), YoungFn::power(p).unwrap()))
        .collect();
    out.push(("linf".into(), YoungFn::linf()));
    out.push(("exp".into(), YoungFn::exp()));
    out
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn norm_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let fams = families();
    let opts = NormOptions::default();
    let (mut atoms, mut worst, mut tight) = (0usize, 0.0f64, 0.0f64);
    for t in 0..500 {
        let inst = instance(&mut rng);
        let (name, phi) = &fams[t % fams.len()];
        let lux = luxemburg_norm(&inst.space, &inst.x, &inst.f, phi, &opts).map_err(err)?;
        let ame = amemiya_norm(&inst.space, &inst.x, &inst.f, phi, &opts).map_err(err)?;
        let (l, a) = (
            inst.f.atom_values(&lux.per_atom),
            inst.f.atom_values(&ame.per_atom),
        );
        for k in 0..l.len() {
            atoms += 1;
            let excess = (l[k] - 1e-8 - a[k]).max(a[k] - 2.0 * l[k] - 1e-8);
            worst = worst.max(excess + 1e-8);
            ensure(excess <= 0.0, || {
                format!(
                    "instance {t} ({name}) atom {k}: luxemburg {} amemiya {}",
                    l[k], a[k]
                )
            })?;
            if name == "power 2" && l[k] > 0.0 {
                let dev = (a[k] / l[k] - 2.0).abs();
                tight = tight.max(dev);
                ensure(dev <= 1e-6, || {
                    format!("instance {t}: p=2 ratio {}", a[k] / l[k])
                })?;
            }
        }
    }
    Ok(format!(
        "500 instances, {atoms} atoms, max bound excess {worst:.1e}, p=2 ratio off by at most {tight:.1e}"
    ))
}

fn p_norm_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let opts = NormOptions::default();
    let mut worst = 0.0f64;
    for t in 0..300 {
        let inst = instance(&mut rng);
        let p = [1.0, 1.5, 2.0, 3.0, 4.5][t % 5];
        let phi = YoungFn::power(p).unwrap();
        let lux = luxemburg_norm(&inst.space, &inst.x, &inst.f, &phi, &opts).map_err(err)?;
        for (k, atom) in inst.f.atoms().iter().enumerate() {
            let pa: f64 = atom.iter().map(|&i| inst.space.prob(i)).sum();
            let m: f64 = atom
                .iter()
                .map(|&i| inst.space.prob(i) * inst.x[i].abs().powf(p))
                .sum::<f64>()
                / pa;
            let oracle = m.powf(1.0 / p);
            let got = lux.per_atom[atom[0]];
            let rel = (got - oracle).abs() / oracle.max(f64::MIN_POSITIVE);
            worst = worst.max(if oracle == 0.0 { got } else { rel });
            ensure(worst <= 1e-8, || {
                format!("instance {t} p={p} atom {k}: {got} vs {oracle}")
            })?;
        }
        let linf =
            luxemburg_norm(&inst.space, &inst.x, &inst.f, &YoungFn::linf(), &opts).map_err(err)?;
        let sup = inst
            .space
            .ess_sup_cond(&inst.x.abs(), &inst.f)
            .map_err(err)?;
        ensure(linf.per_atom == sup, || {
            format!(
                "instance {t}: linf {:?} vs ess sup {:?}",
                linf.per_atom, sup
            )
        })?;
    }
    Ok(format!(
        "300 instances, max relative error {worst:.1e}, linf equal to ess sup bit for bit"
    ))
}

/// `q ∝ e^{-γx}` on each atom, written out independently of the library.
fn gibbs_oracle(
    space: &FiniteProbSpace<f64>,
    f: &SubAlgebra,
    x: &RandomVar<f64>,
    gamma: f64,
) -> Vec<f64> {
    let mut q = vec![0.0; x.len()];
    for atom in f.atoms() {
        let shift = atom
            .iter()
            .map(|&i| -gamma * x[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let pa: f64 = atom.iter().map(|&i| space.prob(i)).sum();
        let z: f64 = atom
            .iter()
            .map(|&i| space.prob(i) / pa * (-gamma * x[i] - shift).exp())
            .sum();
        for &i in atom {
            q[i] = (-gamma * x[i] - shift).exp() / z;
        }
    }
    q
}

fn robust_representation_gap() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let opts = DualOptions::default();
    let (mut gap, mut gibbs) = (0.0f64, 0.0f64);
    for t in 0..200 {
        let inst = instance(&mut rng);
        let gamma = rng.gen_range(0.2..3.0);
        let ent = Entropic::new(gamma).map_err(err)?;
        let measures: [&dyn ConditionalRisk<f64>; 2] = [&ent, &WorstCase];
        for rho in measures {
            let cert =
                robust_representation(rho, &inst.space, &inst.x, &inst.f, &opts).map_err(err)?;
            let g = cert.max_gap();
            gap = gap.max(g);
            ensure(g <= 1e-6, || {
                format!(
                    "instance {t} {}: gap {g}, converged {:?}",
                    rho.tag(),
                    cert.converged
                )
            })?;
            let mean = inst.space.cond_expectation(&cert.y, &inst.f).map_err(err)?;
            ensure(
                cert.y.values().iter().all(|&v| v <= 1e-12)
                    && mean.values().iter().all(|&m| (m + 1.0).abs() <= 1e-10),
                || format!("instance {t} {}: certificate infeasible", rho.tag()),
            )?;
        }
        let cert =
            robust_representation(&ent, &inst.space, &inst.x, &inst.f, &opts).map_err(err)?;
        let q = gibbs_oracle(&inst.space, &inst.f, &inst.x, gamma);
        for (i, &qi) in q.iter().enumerate() {
            let dev = (cert.y[i] + qi).abs();
            gibbs = gibbs.max(dev);
            ensure(dev <= 1e-6, || {
                format!(
                    "instance {t} outcome {i}: y {} vs Gibbs {}, converged {:?}",
                    cert.y[i], -qi, cert.converged
                )
            })?;
        }
    }
    Ok(format!(
        "200 instances x 2 measures, max gap {gap:.1e}, max Gibbs deviation {gibbs:.1e}"
    ))
}

fn attainment_and_lebesgue() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let opts = DualOptions::default();
    let (mut resid, mut tail) = (0.0f64, 0.0f64);
    for t in 0..100 {
        let inst = instance(&mut rng);
        let ent = Entropic::new(rng.gen_range(0.2..3.0)).map_err(err)?;
        let measures: [&dyn ConditionalRisk<f64>; 2] = [&ent, &WorstCase];
        for rho in measures {
            let att = attainment_check(rho, &inst.space, &inst.x, &inst.f, &opts).map_err(err)?;
            resid = resid.max(att.residual.max_abs());
            ensure(att.attained && att.residual.max_abs() <= 1e-6, || {
                format!("instance {t} {}: residual {:?}", rho.tag(), att.residual)
            })?;
            if t % 5 == 0 {
                let leb = lebesgue_check(rho, &inst.space, &inst.f, 4, &mut rng).map_err(err)?;
                ensure(leb.tail_index == 10_000, || {
                    format!("tail index {}", leb.tail_index)
                })?;
                tail = tail.max(leb.tail_deviation);
                ensure(leb.tail_deviation <= 1e-6, || {
                    format!(
                        "instance {t} {}: Lebesgue deviations {:?}",
                        rho.tag(),
                        leb.deviations
                    )
                })?;
            }
        }
    }
    Ok(format!(
        "100 instances x 2 measures, max residual {resid:.1e}, max deviation at n = 1e4 {tail:.1e}"
    ))
}

fn scalarization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut worst = 0.0f64;
    for t in 0..100 {
        let inst = instance(&mut rng);
        let y = feasible_y(&mut rng, &inst.space, &inst.f);
        let ent = Entropic::new(rng.gen_range(0.3..2.0)).map_err(err)?;
        let rho: &dyn ConditionalRisk<f64> = if t % 4 == 3 { &WorstCase } else { &ent };
        let rep = scalarization_check(rho, &inst.space, &inst.f, &y).map_err(err)?;
        let dev = (rep.numeric - rep.expected).abs();
        worst = worst.max(dev);
        ensure(rep.agree && dev <= 1e-6, || {
            format!(
                "instance {t} {}: numeric {} vs expected {}",
                rho.tag(),
                rep.numeric,
                rep.expected
            )
        })?;
    }
    Ok(format!("100 feasible y, max disagreement {worst:.1e}"))
}

fn locality_and_extension() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let (mut probes, mut worst) = (0usize, 0.0f64);
    let mut t = 0;
    while probes < 200 {
        let inst = instance(&mut rng);
        let ent = Entropic::new(rng.gen_range(0.3..2.0)).map_err(err)?;
        let rho: &dyn ConditionalRisk<f64> = if t % 2 == 0 { &ent } else { &WorstCase };
        let loc = locality_check(
            |x| rho.evaluate(&inst.space, x, &inst.f),
            &inst.space,
            &inst.f,
            2,
            &mut rng,
        )
        .map_err(err)?;
        let labels: Vec<usize> = (0..inst.x.len()).map(|i| inst.f.atom_of(i) % 2).collect();
        let gluing = SubAlgebra::from_labels(&labels);
        let ext = extension_check(rho, &inst.space, &inst.f, &gluing, 2, &mut rng).map_err(err)?;
        probes += loc.probes + ext.probes;
        worst = worst.max(loc.max_deviation).max(ext.max_deviation);
        ensure(
            loc.max_deviation <= 1e-9 && ext.max_deviation <= 1e-9,
            || {
                format!(
                    "instance {t} {}: locality {} extension {}",
                    rho.tag(),
                    loc.max_deviation,
                    ext.max_deviation
                )
            },
        )?;
        t += 1;
    }
    // Planted counterexample: the unconditional mean leaks information across atoms.
    let space = FiniteProbSpace::new(vec![0.1, 0.2, 0.3, 0.4]).map_err(err)?;
    let f = SubAlgebra::new(4, vec![vec![0, 1], vec![2, 3]]).map_err(err)?;
    let leak = |s: &FiniteProbSpace<f64>, x: &RandomVar<f64>, _: &SubAlgebra| {
        Ok(RandomVar::constant(x.len(), -s.expectation(x)?))
    };
    let planted = locality_check(|x| leak(&space, x, &f), &space, &f, 5, &mut rng).map_err(err)?;
    ensure(!planted.passed && planted.witness.is_some(), || {
        "planted non-local map not detected".into()
    })?;
    let certified = CustomRisk::new("leaky mean", leak).certify(&space, &f, 5, &mut rng);
    ensure(certified.is_err(), || {
        "planted non-local map was certified".into()
    })?;
    Ok(format!(
        "{probes} probes over {t} instances, max deviation {worst:.1e}, planted counterexample caught (deviation {:.2})",
        planted.witness.unwrap().deviation
    ))
}

fn penalty_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let (mut kept, mut skipped, mut mixed, mut worst) = (0usize, 0usize, 0usize, f64::NEG_INFINITY);
    for t in 0..200 {
        let inst = instance(&mut rng);
        let y = feasible_y(&mut rng, &inst.space, &inst.f);
        let beta = rng.gen_range(0.0..3.0);
        let ent = Entropic::new(rng.gen_range(0.3..2.0)).map_err(err)?;
        let rho: &dyn ConditionalRisk<f64> = if t % 3 == 2 { &WorstCase } else { &ent };
        let rep = penalty_bound_check(rho, &inst.space, &inst.x, &y, beta, &inst.f).map_err(err)?;
        let held = rep.atoms.iter().filter(|a| a.hypothesis).count();
        if held > 0 && held < rep.atoms.len() {
            mixed += 1;
        }
        for (k, a) in rep.atoms.iter().enumerate() {
            if !a.hypothesis {
                skipped += 1;
                continue;
            }
            kept += 1;
            worst = worst.max(a.penalty - a.bound);
            ensure(a.penalty <= a.bound + 1e-8, || {
                format!(
                    "instance {t} atom {k}: penalty {} bound {}",
                    a.penalty, a.bound
                )
            })?;
        }
        ensure(rep.passed, || format!("instance {t}: report failed"))?;
    }
    ensure(kept > 0, || "no atom satisfied the hypothesis".into())?;
    Ok(format!(
        "200 instances, {kept} atoms checked, {skipped} excluded by hypothesis ({mixed} instances mixed), max slack {worst:.2}"
    ))
}

fn holder_and_l1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let fams = families();
    let opts = NormOptions::default();
    let (mut holder, mut embed) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for t in 0..200 {
        let inst = instance(&mut rng);
        let (name, phi) = &fams[t % fams.len()];
        let y = rvar(&mut rng, inst.x.len(), 3.0);
        let nx = luxemburg_norm(&inst.space, &inst.x, &inst.f, phi, &opts)
            .map_err(err)?
            .per_atom;
        let op = pairing_operator_norm(&inst.space, &y, &inst.f, phi, &opts).map_err(err)?;
        let one = RandomVar::constant(inst.x.len(), 1.0);
        let op1 = pairing_operator_norm(&inst.space, &one, &inst.f, phi, &opts).map_err(err)?;
        let pair = pairing(&inst.space, &inst.x, &y, &inst.f).map_err(err)?;
        let mean_abs = inst
            .space
            .cond_expectation(&inst.x.abs(), &inst.f)
            .map_err(err)?;
        for i in 0..inst.x.len() {
            let h = pair[i].abs() - op[i] * nx[i];
            let e = mean_abs[i] - op1[i] * nx[i];
            holder = holder.max(h);
            embed = embed.max(e);
            ensure(h <= 1e-8 && e <= 1e-8, || {
                format!("instance {t} ({name}) outcome {i}: holder excess {h}, L1 excess {e}")
            })?;
        }
    }
    Ok(format!(
        "200 pairs, max Hölder excess {holder:.1e}, max L1 excess {embed:.1e}"
    ))
}

fn density_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut worst = 0.0f64;
    for t in 0..100 {
        let inst = instance(&mut rng);
        let y = rvar(&mut rng, inst.x.len(), 3.0);
        let mut probe_rng = ChaCha8Rng::seed_from_u64(t as u64);
        let got = recover_density(
            &inst.space,
            |v| pairing(&inst.space, v, &y, &inst.f),
            &inst.f,
            5,
            &mut probe_rng,
        )
        .map_err(err)?;
        let dev = got
            .values()
            .iter()
            .zip(y.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(dev);
        ensure(dev <= 1e-9, || {
            format!("instance {t}: recovered {:?} vs {:?}", got, y)
        })?;
    }
    Ok(format!("100 densities, max error {worst:.1e}"))
}

/// Max of `g` over `{q >= 0 : Σ w q = 1}` on the barycentric grid `w q ∈ h·ℕⁿ`.
fn grid_max(w: &[f64], steps: usize, g: &dyn Fn(&[f64]) -> f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        i: usize,
        left: usize,
        c: &mut Vec<usize>,
        steps: usize,
        w: &[f64],
        g: &dyn Fn(&[f64]) -> f64,
        q: &mut Vec<f64>,
        best: &mut f64,
    ) {
        let n = c.len();
        if i == n - 1 {
            c[i] = left;
            for j in 0..n {
                q[j] = c[j] as f64 / steps as f64 / w[j];
            }
            *best = best.max(g(q));
            return;
        }
        for k in 0..=left {
            c[i] = k;
            rec(i + 1, left - k, c, steps, w, g, q, best);
        }
    }
    let mut best = f64::NEG_INFINITY;
    rec(
        0,
        steps,
        &mut vec![0; w.len()],
        steps,
        w,
        g,
        &mut vec![0.0; w.len()],
        &mut best,
    );
    best
}

fn solver_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let (mut atoms, mut worst) = (0usize, 0.0f64);
    let mut t = 0;
    while atoms < 60 {
        let inst = instance(&mut rng);
        t += 1;
        for (k, atom) in inst.f.atoms().iter().enumerate() {
            if atom.len() > 4 {
                continue;
            }
            let pa: f64 = atom.iter().map(|&i| inst.space.prob(i)).sum();
            let w: Vec<f64> = atom.iter().map(|&i| inst.space.prob(i) / pa).collect();
            let x: Vec<f64> = atom.iter().map(|&i| inst.x[i]).collect();
            let gamma = rng.gen_range(0.3..2.0);
            // Entropic dual on the atom, and the linear worst-case dual.
            let ent = |q: &[f64]| -> f64 {
                q.iter()
                    .zip(&x)
                    .zip(&w)
                    .map(|((&qi, &xi), &wi)| {
                        -wi * xi * qi
                            - if qi > 0.0 {
                                wi * qi * qi.ln() / gamma
                            } else {
                                0.0
                            }
                    })
                    .sum()
            };
            let ent_grad = |q: &[f64]| -> Vec<f64> {
                q.iter()
                    .zip(&x)
                    .map(|(&qi, &xi)| -xi - (qi.max(f64::MIN_POSITIVE).ln() + 1.0) / gamma)
                    .collect()
            };
            let lin = |q: &[f64]| -> f64 {
                q.iter()
                    .zip(&x)
                    .zip(&w)
                    .map(|((&qi, &xi), &wi)| -wi * xi * qi)
                    .sum()
            };
            let lin_grad = |_: &[f64]| -> Vec<f64> { x.iter().map(|&xi| -xi).collect() };
            let steps = if atom.len() <= 3 { 1000 } else { 250 };
            let cases: [Objective; 2] = [(&ent, &ent_grad), (&lin, &lin_grad)];
            for (g, grad) in cases {
                let obj = FnObjective {
                    value: g,
                    gradient: grad,
                };
                let rep = match simplex_max(&obj, &w, None, &SimplexOptions::default()) {
                    Ok(r) => r,
                    Err(nc) => nc.best,
                };
                let grid = grid_max(&w, steps, g);
                let dev = (rep.value - grid).abs();
                worst = worst.max(dev);
                ensure(dev <= 1e-3, || {
                    format!("instance {t} atom {k}: solver {} grid {grid}", rep.value)
                })?;
            }
            atoms += 1;
        }
    }
    // Closed forms: Luxemburg and Amemiya norms under power p.
    let mut closed = 0.0f64;
    for _ in 0..50 {
        let p: f64 = rng.gen_range(1.1..4.0);
        let a: f64 = rng.gen_range(0.1..5.0);
        let b: f64 = rng.gen_range(0.1..5.0);
        let w = rng.gen_range(0.1..0.9);
        let m = w * a.powf(p) + (1.0 - w) * b.powf(p);
        let modular = |l: f64| w * (a / l).powf(p) + (1.0 - w) * (b / l).powf(p);
        let lux = bisect_monotone(modular, 1.0, 1e-3, 1.0, 1e-13)
            .map_err(err)?
            .arg();
        let d1 = (lux - m.powf(1.0 / p)).abs() / m.powf(1.0 / p);
        let amemiya = |l: f64| (1.0 + m * l.powf(p)) / l;
        let rep = golden_min(amemiya, 1e-3, 1.0, 1e-12, Some(Default::default()));
        let exact = p / (p - 1.0).powf((p - 1.0) / p) * m.powf(1.0 / p);
        let d2 = (rep.value - exact).abs() / exact;
        closed = closed.max(d1).max(d2);
        ensure(d1 <= 1e-8 && d2 <= 1e-8, || {
            format!("p={p}: bisect {d1:e}, golden {d2:e}")
        })?;
    }
    Ok(format!(
        "{atoms} atoms of size <= 4 x 2 objectives, max grid gap {worst:.1e}; closed forms within {closed:.1e}"
    ))
}

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_orlicz-risk");
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut names: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().unwrap().to_string_lossy();
            name.ends_with(".json") && !name.ends_with(".report.json")
        })
        .collect();
    names.sort();
    ensure(!names.is_empty(), || "no bundled scenarios".into())?;
    let base = std::env::temp_dir().join(format!("orlicz-risk-acceptance-{}", std::process::id()));
    for path in &names {
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = base.join(format!("run{run}"));
            let status = Command::new(bin)
                .arg("verify")
                .arg(path)
                .arg("--out-dir")
                .arg(&out)
                .output()
                .map_err(err)?;
            ensure(status.status.code() == Some(0), || {
                format!(
                    "{stem}: exit {:?}\n{}",
                    status.status.code(),
                    String::from_utf8_lossy(&status.stdout)
                )
            })?;
            let report = std::fs::read(out.join(format!("{stem}.report.json"))).map_err(err)?;
            let csv = std::fs::read(out.join(format!("{stem}.atoms.csv"))).map_err(err)?;
            outputs.push((report, csv));
        }
        ensure(outputs[0] == outputs[1], || {
            format!("{stem}: outputs differ between runs")
        })?;
    }
    let _ = std::fs::remove_dir_all(&base);
    Ok(format!(
        "{} bundled scenarios, identical reports and exit code 0",
        names.len()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("norm equivalence", norm_equivalence),
        ("p-norm and linf oracles", p_norm_oracle),
        ("robust representation", robust_representation_gap),
        ("attainment and Lebesgue property", attainment_and_lebesgue),
        ("scalarization", scalarization),
        ("locality and extension", locality_and_extension),
        ("penalty bound", penalty_bound),
        ("Hölder bound and L1 embedding", holder_and_l1),
        ("density recovery", density_recovery),
        ("solver oracles", solver_oracles),
        ("CLI determinism", cli_determinism),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(summary) => println!("PASS  {:>2}. {name}: {summary} [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2}. {name}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
