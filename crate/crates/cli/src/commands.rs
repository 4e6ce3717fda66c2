//! The five commands. Each produces a JSON report, per-atom CSV rows and a list of
//! tolerance checks.

use std::fmt;
use std::sync::Arc;

use orlicz_risk::risk::{
    axiom_check, extension_check, lebesgue_check, locality_check, penalty_bound_check,
    robust_representation, scalarization_check, Scalarized,
};
use orlicz_risk::{
    amemiya_norm, luxemburg_norm, pairing, pairing_operator_norm, ConditionalRisk, DualOptions,
    Entropic, FiniteProbSpace, NormOptions, RandomVar, SubAlgebra, YoungFn,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::report::{num, AtomRow, Check};
use crate::scenario::{RiskChoice, Scenario, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Luxemburg and Amemiya norms per position and algebra.
    Norm,
    /// Risk values per position and algebra.
    Risk,
    /// Dual certificates per position and algebra.
    Dual,
    /// Everything above plus the property suite.
    Verify,
    /// Stage-wise evaluation along the filtration.
    Dynamic,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Norm => "norm",
            Command::Risk => "risk",
            Command::Dual => "dual",
            Command::Verify => "verify",
            Command::Dynamic => "dynamic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub tol_gap: f64,
    pub tol_norm: f64,
    pub seed: u64,
    pub atoms_parallel: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol_gap: 1e-6,
            tol_norm: 1e-8,
            seed: 0,
            atoms_parallel: false,
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Scenario(ScenarioError),
    Compute(orlicz_risk::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Scenario(e) => write!(f, "invalid scenario: {e}"),
            RunError::Compute(e) => write!(f, "computation failed: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<orlicz_risk::Error> for RunError {
    fn from(e: orlicz_risk::Error) -> Self {
        RunError::Compute(e)
    }
}

type Res<T> = Result<T, RunError>;

pub struct RunOutput {
    pub report: Value,
    pub rows: Vec<AtomRow>,
    pub checks: Vec<Check>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

const LOCAL_TOL: f64 = 1e-9;
const CONSTRAINT_TOL: f64 = 1e-10;
const WEAK_DUALITY_TOL: f64 = 1e-8;
const BOUND_TOL: f64 = 1e-8;
const LEBESGUE_TOL: f64 = 1e-6;
const RANDOM_PROBES: usize = 50;
/// Tight enough that reported norms are stable in all 12 printed digits.
const NORM_REL_TOL: f64 = 1e-13;

struct Ctx<'a> {
    sc: &'a Scenario,
    settings: &'a Settings,
    phi: YoungFn<f64>,
    rho: Arc<dyn ConditionalRisk<f64>>,
    rows: Vec<AtomRow>,
    checks: Vec<Check>,
}

impl Ctx<'_> {
    fn space(&self) -> &FiniteProbSpace<f64> {
        &self.sc.space
    }

    fn norm_opts(&self) -> NormOptions<f64> {
        NormOptions {
            rel_tol: NORM_REL_TOL,
            parallel: self.settings.atoms_parallel,
        }
    }

    fn dual_opts(&self) -> DualOptions<f64> {
        DualOptions {
            parallel: self.settings.atoms_parallel,
            ..DualOptions::default()
        }
    }

    /// A generator per named check, so adding a check never shifts another's samples.
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.settings.seed);
        rng.set_stream(stream);
        rng
    }

    fn random_vars(&self, rng: &mut ChaCha8Rng, count: usize) -> Vec<RandomVar<f64>> {
        let n = self.space().n_outcomes();
        (0..count)
            .map(|_| RandomVar::new((0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap())
            .collect()
    }

    fn random_feasible(&self, rng: &mut ChaCha8Rng, f: &SubAlgebra) -> RandomVar<f64> {
        let n = self.space().n_outcomes();
        let q = RandomVar::new((0..n).map(|_| rng.gen_range(0.2..2.0)).collect()).unwrap();
        let m = self.space().cond_expectation(&q, f).unwrap();
        q.zip_map(&m, |a, b| -a / b)
    }

    fn atoms_json(&self, f: &SubAlgebra, mut fill: impl FnMut(usize) -> Value) -> Value {
        Value::Array(
            (0..f.n_atoms())
                .map(|k| {
                    let labels: Vec<&str> = f
                        .atom(k)
                        .iter()
                        .map(|&i| self.sc.labels[i].as_str())
                        .collect();
                    let mut v = json!({ "outcomes": labels });
                    if let (Value::Object(dst), Value::Object(src)) = (&mut v, fill(k)) {
                        dst.extend(src);
                    }
                    v
                })
                .collect(),
        )
    }

    fn norm_section(&mut self) -> Res<Value> {
        let mut worst_equiv: f64 = 0.0;
        let mut probes = 0;
        let mut out = Vec::new();
        for (pname, x) in &self.sc.positions {
            let mut algs = Vec::new();
            for (aname, f) in &self.sc.algebras {
                let lux = luxemburg_norm(self.space(), x, f, &self.phi, &self.norm_opts())?;
                let ame = amemiya_norm(self.space(), x, f, &self.phi, &self.norm_opts())?;
                let l = f.atom_values(&lux.per_atom);
                let a = f.atom_values(&ame.per_atom);
                for k in 0..f.n_atoms() {
                    let label = self.sc.atom_label(f, k);
                    self.rows.push(AtomRow::new(
                        "norm",
                        pname,
                        aname,
                        k,
                        &label,
                        "luxemburg",
                        l[k],
                    ));
                    self.rows.push(AtomRow::new(
                        "norm", pname, aname, k, &label, "amemiya", a[k],
                    ));
                    let dev = (l[k] - a[k]).max(a[k] - 2.0 * l[k]) / l[k].max(1.0);
                    worst_equiv = worst_equiv.max(dev);
                    probes += 1;
                }
                let atoms = self.atoms_json(f, |k| {
                    json!({
                        "luxemburg": num(l[k]),
                        "amemiya": num(a[k]),
                        "luxemburg_attained": lux.attained[k],
                        "amemiya_attained": ame.attained[k],
                    })
                });
                algs.push(json!({ "algebra": aname, "atoms": atoms }));
            }
            out.push(json!({ "position": pname, "algebras": algs }));
        }
        self.checks.push(
            Check::new(
                "norm_equivalence",
                worst_equiv,
                self.settings.tol_norm,
                probes,
            )
            .with_detail("‖x‖ <= Amemiya <= 2‖x‖ per atom, scaled by max(1, ‖x‖)"),
        );
        Ok(json!({ "young": self.phi.family_tag(), "positions": out }))
    }

    fn risk_section(&mut self) -> Res<Value> {
        let mut bad = 0usize;
        let mut probes = 0;
        let mut out = Vec::new();
        for (pname, x) in &self.sc.positions {
            let mut algs = Vec::new();
            for (aname, f) in &self.sc.algebras {
                let r = self.rho.evaluate(self.space(), x, f)?;
                if !f.is_measurable(&r) || !r.is_finite() {
                    bad += 1;
                }
                probes += 1;
                let vals = f.atom_values(&r);
                for (k, &v) in vals.iter().enumerate() {
                    let label = self.sc.atom_label(f, k);
                    self.rows
                        .push(AtomRow::new("risk", pname, aname, k, &label, "risk", v));
                }
                let scalar = Scalarized::new(self.rho.as_ref(), f).evaluate(self.space(), x)?;
                let atoms = self.atoms_json(f, |k| json!({ "risk": num(vals[k]) }));
                algs.push(json!({ "algebra": aname, "scalarized": num(scalar), "atoms": atoms }));
            }
            out.push(json!({ "position": pname, "algebras": algs }));
        }
        self.checks.push(
            Check::new("risk_measurable_finite", bad as f64, 0.0, probes)
                .with_detail("count of risk values that are not finite and F-measurable"),
        );
        Ok(json!({ "measure": self.rho.tag().to_string(), "positions": out }))
    }

    fn dual_section(&mut self) -> Res<Value> {
        let (mut gap, mut weak, mut constraint, mut unconverged) = (0.0f64, 0.0f64, 0.0f64, 0usize);
        let mut gibbs_dev: Option<f64> = None;
        let mut probes = 0;
        let mut out = Vec::new();
        for (pname, x) in &self.sc.positions {
            let mut algs = Vec::new();
            for (aname, f) in &self.sc.algebras {
                let cert = robust_representation(
                    self.rho.as_ref(),
                    self.space(),
                    x,
                    f,
                    &self.dual_opts(),
                )?;
                let mean = self.space().cond_expectation(&cert.y, f)?;
                let pos_part = cert.y.values().iter().fold(0.0f64, |m, &v| m.max(v));
                let mean_dev = mean
                    .values()
                    .iter()
                    .fold(0.0f64, |m, &v| m.max((v + 1.0).abs()));
                constraint = constraint.max(pos_part).max(mean_dev);
                if let RiskChoice::Entropic { gamma } = self.sc.risk {
                    let g = Entropic::new(gamma)?.gibbs_density(self.space(), x, f)?;
                    let dev = g
                        .values()
                        .iter()
                        .zip(cert.y.values())
                        .fold(0.0f64, |m, (&q, &y)| m.max((q + y).abs()));
                    gibbs_dev = Some(gibbs_dev.unwrap_or(0.0).max(dev));
                }
                let (r, p, gp) = (
                    f.atom_values(&cert.risk),
                    f.atom_values(&cert.penalty),
                    f.atom_values(&cert.gap),
                );
                for k in 0..f.n_atoms() {
                    gap = gap.max(gp[k].abs());
                    weak = weak.max(-gp[k]);
                    probes += 1;
                    if !cert.converged[k] {
                        unconverged += 1;
                    }
                    let label = self.sc.atom_label(f, k);
                    self.rows
                        .push(AtomRow::new("dual", pname, aname, k, &label, "risk", r[k]));
                    self.rows.push(AtomRow::new(
                        "dual", pname, aname, k, &label, "penalty", p[k],
                    ));
                    self.rows
                        .push(AtomRow::new("dual", pname, aname, k, &label, "gap", gp[k]));
                }
                let labels = &self.sc.labels;
                let atoms = self.atoms_json(f, |k| {
                    let y: serde_json::Map<String, Value> = f
                        .atom(k)
                        .iter()
                        .map(|&i| (labels[i].clone(), num(cert.y[i])))
                        .collect();
                    json!({
                        "risk": num(r[k]),
                        "penalty": num(p[k]),
                        "gap": num(gp[k]),
                        "converged": cert.converged[k],
                        "iterations": cert.iterations[k],
                        "y": y,
                    })
                });
                algs.push(json!({ "algebra": aname, "atoms": atoms }));
            }
            out.push(json!({ "position": pname, "algebras": algs }));
        }
        let tol_gap = self.settings.tol_gap;
        self.checks
            .push(Check::new("duality_gap", gap, tol_gap, probes));
        self.checks
            .push(Check::new("weak_duality", weak, WEAK_DUALITY_TOL, probes));
        self.checks.push(
            Check::new("dual_constraints", constraint, CONSTRAINT_TOL, probes)
                .with_detail("max of positive part of y and |E[y|F] + 1|"),
        );
        self.checks.push(Check::new(
            "dual_converged",
            unconverged as f64,
            0.0,
            probes,
        ));
        if let Some(dev) = gibbs_dev {
            self.checks.push(
                Check::new("gibbs_density", dev, tol_gap, probes)
                    .with_detail("certificate against e^{-γx}/E[e^{-γx}|F] per outcome"),
            );
        }
        Ok(json!({ "measure": self.rho.tag().to_string(), "positions": out }))
    }

    fn position_vars(&self) -> Vec<RandomVar<f64>> {
        self.sc.positions.iter().map(|(_, x)| x.clone()).collect()
    }

    fn verify_norms(&mut self) -> Res<()> {
        let mut rng = self.rng(1);
        let mut vars = self.position_vars();
        vars.extend(self.random_vars(&mut rng, RANDOM_PROBES));
        let (mut axioms, mut holder, mut embed) = (0.0f64, 0.0f64, 0.0f64);
        let mut probes = 0;
        let opts = self.norm_opts();
        let space = self.space();
        let one = RandomVar::constant(space.n_outcomes(), 1.0);
        for (_, f) in &self.sc.algebras {
            let norm = |v: &RandomVar<f64>| {
                luxemburg_norm(space, v, f, &self.phi, &opts).map(|n| n.per_atom)
            };
            let unit_op = pairing_operator_norm(space, &one, f, &self.phi, &opts)?;
            for (j, x) in vars.iter().enumerate() {
                let z = &vars[(j + 1) % vars.len()];
                let c = rng.gen_range(-3.0..3.0);
                let (nx, nz) = (norm(x)?, norm(z)?);
                let nsum = norm(&(x + z))?;
                let nscaled = norm(&x.scale(c))?;
                let op_z = pairing_operator_norm(space, z, f, &self.phi, &opts)?;
                let pair = pairing(space, x, z, f)?;
                let mean_abs = space.cond_expectation(&x.abs(), f)?;
                for i in 0..x.len() {
                    let tri = (nsum[i] - nx[i] - nz[i]) / (1.0 + nx[i] + nz[i]);
                    let hom = (nscaled[i] - c.abs() * nx[i]).abs() / (1.0 + nscaled[i]);
                    axioms = axioms.max(tri).max(hom).max(-nx[i]);
                    let bound = op_z[i] * nx[i];
                    holder = holder.max((pair[i].abs() - bound) / bound.max(1.0));
                    let ebound = unit_op[i] * nx[i];
                    embed = embed.max((mean_abs[i] - ebound) / ebound.max(1.0));
                }
                probes += 1;
            }
        }
        let tol = self.settings.tol_norm;
        self.checks.push(
            Check::new("norm_axioms", axioms, tol, probes)
                .with_detail("triangle inequality, absolute homogeneity and nonnegativity"),
        );
        self.checks.push(
            Check::new("holder_bound", holder, tol, probes).with_detail("|E[xy|F]| <= ‖μ_y‖ ‖x|F‖"),
        );
        self.checks.push(
            Check::new("l1_embedding", embed, tol, probes).with_detail("E[|x| | F] <= ‖μ_1‖ ‖x|F‖"),
        );
        Ok(())
    }

    fn verify_risk(&mut self) -> Res<()> {
        let space = self.space();
        let rho = self.rho.as_ref();
        let (mut scal, mut local, mut ext, mut ax, mut bound, mut leb) =
            (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let (mut scal_n, mut local_n, mut ext_n, mut bound_n) = (0, 0, 0, 0);
        let mut witness = None;
        for (a, (aname, f)) in self.sc.algebras.iter().enumerate() {
            let stream = 100 * (a as u64 + 1);
            let mut rng = self.rng(stream);
            for _ in 0..20 {
                let y = self.random_feasible(&mut rng, f);
                let rep = scalarization_check(rho, space, f, &y)?;
                let dev = if rep.numeric.is_infinite() || rep.expected.is_infinite() {
                    if rep.numeric == rep.expected {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (rep.numeric - rep.expected).abs()
                };
                scal = scal.max(dev);
                scal_n += 1;
            }
            let mut rng = self.rng(stream + 1);
            let rep = locality_check(|x| rho.evaluate(space, x, f), space, f, 25, &mut rng)?;
            local = local.max(rep.max_deviation);
            local_n += rep.probes;
            if let (None, Some(w)) = (&witness, rep.witness) {
                witness = Some(format!("algebra {aname}, atom mask {:#b}", w.mask));
            }
            let groups: Vec<usize> = (0..f.n_atoms()).map(|k| k % 2).collect();
            let mut labels = vec![0usize; space.n_outcomes()];
            for (k, atom) in f.atoms().iter().enumerate() {
                for &i in atom {
                    labels[i] = groups[k];
                }
            }
            let partition = SubAlgebra::from_labels(&labels);
            let mut rng = self.rng(stream + 2);
            let rep = extension_check(rho, space, f, &partition, 25, &mut rng)?;
            ext = ext.max(rep.max_deviation);
            ext_n += rep.probes;
            let mut rng = self.rng(stream + 3);
            let rep = axiom_check(rho, space, f, 25, &mut rng)?;
            ax = ax
                .max(rep.monotonicity)
                .max(rep.cash_invariance)
                .max(rep.convexity);
            let mut rng = self.rng(stream + 4);
            for (_, x) in &self.sc.positions {
                let cert = robust_representation(rho, space, x, f, &self.dual_opts())?;
                let beta = cert.risk.max_abs() + 1e-6;
                let mut cases = vec![(cert.y, beta)];
                for _ in 0..10 {
                    cases.push((self.random_feasible(&mut rng, f), rng.gen_range(0.0..3.0)));
                }
                for (y, beta) in cases {
                    let rep = penalty_bound_check(rho, space, x, &y, beta, f)?;
                    for atom in rep.atoms.iter().filter(|a| a.hypothesis) {
                        bound = bound.max(atom.penalty - atom.bound);
                        bound_n += 1;
                    }
                }
            }
            let mut rng = self.rng(stream + 5);
            let rep = lebesgue_check(rho, space, f, 20, &mut rng)?;
            leb = leb.max(rep.tail_deviation);
        }
        let n_alg = self.sc.algebras.len();
        self.checks.push(
            Check::new("scalarization", scal, self.settings.tol_gap, scal_n)
                .with_detail("numeric sup over x against E[ρ*(y)] on random feasible y"),
        );
        let mut c = Check::new("locality", local, LOCAL_TOL, local_n);
        if let Some(w) = witness {
            c = c.with_detail(w);
        }
        self.checks.push(c);
        self.checks
            .push(Check::new("extension", ext, LOCAL_TOL, ext_n));
        self.checks.push(
            Check::new("risk_axioms", ax, LOCAL_TOL, 25 * n_alg).with_detail(
                "monotonicity, cash invariance and convexity with F-measurable weights",
            ),
        );
        self.checks.push(
            Check::new("penalty_bound", bound.max(0.0), BOUND_TOL, bound_n)
                .with_detail("ρ*(y) <= 2β + 2ρ(-2|x|) on atoms where E[xy|F] - ρ*(y) >= -β"),
        );
        self.checks.push(
            Check::new("lebesgue", leb, LEBESGUE_TOL, 20 * n_alg)
                .with_detail("max |ρ(x_n) - ρ(x)| at n = 10^4"),
        );
        Ok(())
    }

    fn dynamic_section(&mut self) -> Res<Value> {
        let Some(stages) = self.sc.filtration.clone() else {
            return Err(RunError::Scenario(ScenarioError {
                path: "filtration".into(),
                message: "the dynamic command needs a filtration".into(),
            }));
        };
        let dynamic = orlicz_risk::DynamicRiskMeasure::new(
            stages
                .iter()
                .map(|&i| (self.sc.algebras[i].1.clone(), self.rho.clone()))
                .collect(),
        )?;
        let mut bad = 0usize;
        let mut out = Vec::new();
        for (pname, x) in &self.sc.positions {
            let values = dynamic.evaluate(self.space(), x)?;
            let mut st = Vec::new();
            for (t, (&i, v)) in stages.iter().zip(&values).enumerate() {
                let (aname, f) = &self.sc.algebras[i];
                if !f.is_measurable(v) {
                    bad += 1;
                }
                let vals = f.atom_values(v);
                for (k, &val) in vals.iter().enumerate() {
                    let label = self.sc.atom_label(f, k);
                    self.rows.push(AtomRow::new(
                        "dynamic",
                        pname,
                        aname,
                        k,
                        &label,
                        &format!("stage_{t}"),
                        val,
                    ));
                }
                let scalar = self.space().expectation(v)?;
                let atoms = self.atoms_json(f, |k| json!({ "risk": num(vals[k]) }));
                st.push(json!({ "stage": t, "algebra": aname, "scalarized": num(scalar), "atoms": atoms }));
            }
            out.push(json!({ "position": pname, "stages": st }));
        }
        let mut ax = 0.0f64;
        for (t, &i) in stages.iter().enumerate() {
            let mut rng = self.rng(10_000 + t as u64);
            let rep = axiom_check(
                self.rho.as_ref(),
                self.space(),
                &self.sc.algebras[i].1,
                25,
                &mut rng,
            )?;
            ax = ax
                .max(rep.monotonicity)
                .max(rep.cash_invariance)
                .max(rep.convexity);
        }
        let n = stages.len() * self.sc.positions.len();
        self.checks
            .push(Check::new("stage_measurable", bad as f64, 0.0, n));
        self.checks.push(
            Check::new("stage_axioms", ax, LOCAL_TOL, 25 * stages.len())
                .with_detail("each stage checked independently; time consistency is not asserted"),
        );
        Ok(json!({
            "measure": self.rho.tag().to_string(),
            "stages": stages.iter().map(|&i| self.sc.algebras[i].0.clone()).collect::<Vec<_>>(),
            "positions": out,
        }))
    }
}

/// Runs `command` on a validated scenario.
pub fn run(
    command: Command,
    scenario: &Scenario,
    scenario_name: &str,
    settings: &Settings,
) -> Res<RunOutput> {
    let mut ctx = Ctx {
        sc: scenario,
        settings,
        phi: scenario.young.build(),
        rho: scenario.risk.build(),
        rows: Vec::new(),
        checks: Vec::new(),
    };
    let mut results = serde_json::Map::new();
    match command {
        Command::Norm => {
            results.insert("norm".into(), ctx.norm_section()?);
        }
        Command::Risk => {
            results.insert("risk".into(), ctx.risk_section()?);
        }
        Command::Dual => {
            results.insert("dual".into(), ctx.dual_section()?);
        }
        Command::Dynamic => {
            results.insert("dynamic".into(), ctx.dynamic_section()?);
        }
        Command::Verify => {
            results.insert("norm".into(), ctx.norm_section()?);
            results.insert("risk".into(), ctx.risk_section()?);
            results.insert("dual".into(), ctx.dual_section()?);
            ctx.verify_norms()?;
            ctx.verify_risk()?;
        }
    }
    let passed = ctx.checks.iter().all(Check::passed);
    let report = json!({
        "tool": "orlicz-risk",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
        "scenario": scenario_name,
        "settings": {
            "tol_gap": num(settings.tol_gap),
            "tol_norm": num(settings.tol_norm),
            "seed": settings.seed,
            "atoms_parallel": settings.atoms_parallel,
        },
        "inputs": scenario.to_value(),
        "results": Value::Object(results),
        "checks": ctx.checks.iter().map(Check::to_json).collect::<Vec<_>>(),
        "passed": passed,
    });
    Ok(RunOutput {
        report,
        rows: ctx.rows,
        checks: ctx.checks,
    })
}
