//! Scenario files: parsing, validation with path diagnostics, and construction of the
//! library objects. The format is described in `SCENARIO_FORMAT.md` and
//! `scenario.schema.json` at the crate root.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use orlicz_risk::{
    ConditionalRisk, Entropic, Filtration, FiniteProbSpace, LinearRisk, RandomVar, SubAlgebra,
    WorstCase, YoungFn,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// A validation or parse failure located by a JSON path such as `algebras[1].atoms[0][2]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub path: String,
    pub message: String,
}

impl ScenarioError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSpec {
    pub label: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    pub name: String,
    pub atoms: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionSpec {
    pub name: String,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YoungSpec {
    pub family: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSpec {
    pub measure: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

/// The file as written, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub outcomes: Vec<OutcomeSpec>,
    pub algebras: Vec<AlgebraSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filtration: Option<Vec<String>>,
    pub positions: Vec<PositionSpec>,
    pub young: YoungSpec,
    pub risk: RiskSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RiskChoice {
    Entropic { gamma: f64 },
    WorstCase,
    Linear,
}

impl RiskChoice {
    pub fn build(&self) -> Arc<dyn ConditionalRisk<f64>> {
        match *self {
            RiskChoice::Entropic { gamma } => {
                Arc::new(Entropic::new(gamma).expect("gamma validated on load"))
            }
            RiskChoice::WorstCase => Arc::new(WorstCase),
            RiskChoice::Linear => Arc::new(LinearRisk),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum YoungChoice {
    Power {
        p: f64,
    },
    Linf,
    Exp,
    Piecewise {
        breaks: Vec<f64>,
        slopes: Vec<f64>,
        cap: Option<f64>,
    },
}

impl YoungChoice {
    pub fn build(&self) -> YoungFn<f64> {
        match self {
            YoungChoice::Power { p } => YoungFn::power(*p).expect("validated on load"),
            YoungChoice::Linf => YoungFn::linf(),
            YoungChoice::Exp => YoungFn::exp(),
            YoungChoice::Piecewise {
                breaks,
                slopes,
                cap,
            } => {
                YoungFn::piecewise(breaks.clone(), slopes.clone(), *cap).expect("validated on load")
            }
        }
    }
}

/// A validated scenario. Vectors follow the order of `outcomes` in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub description: Option<String>,
    pub labels: Vec<String>,
    pub space: FiniteProbSpace<f64>,
    pub algebras: Vec<(String, SubAlgebra)>,
    /// Indices into `algebras`.
    pub filtration: Option<Vec<usize>>,
    pub positions: Vec<(String, RandomVar<f64>)>,
    pub young: YoungChoice,
    pub risk: RiskChoice,
    /// The source document, kept for echoing into reports.
    pub file: ScenarioFile,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::new(path, e.into_inner().to_string())
        })?;
        Self::from_file(file)
    }

    pub fn from_value(value: Value) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::new(path, e.into_inner().to_string())
        })?;
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        let (labels, space) = validate_outcomes(&file.outcomes)?;
        let index: HashMap<&str, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let algebras = validate_algebras(&file.algebras, &index)?;
        let filtration = match &file.filtration {
            None => None,
            Some(names) => Some(validate_filtration(names, &algebras)?),
        };
        let positions = validate_positions(&file.positions, &labels, &index)?;
        let young = validate_young(&file.young)?;
        let risk = validate_risk(&file.risk)?;
        Ok(Self {
            description: file.description.clone(),
            labels,
            space,
            algebras,
            filtration,
            positions,
            young,
            risk,
            file,
        })
    }

    /// The scenario as JSON, suitable for re-parsing.
    pub fn to_value(&self) -> Value {
        serde_json::to_value(&self.file).expect("scenario serializes")
    }

    /// Outcome labels of atom `k` of `f`, joined by `|`.
    pub fn atom_label(&self, f: &SubAlgebra, k: usize) -> String {
        f.atom(k)
            .iter()
            .map(|&i| self.labels[i].as_str())
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn filtration_algebras(&self) -> Option<Filtration> {
        self.filtration.as_ref().map(|idx| {
            Filtration::new(idx.iter().map(|&i| self.algebras[i].1.clone()).collect())
                .expect("refinement validated on load")
        })
    }
}

const PROB_SUM_TOL: f64 = 1e-12;

fn validate_outcomes(
    outcomes: &[OutcomeSpec],
) -> Result<(Vec<String>, FiniteProbSpace<f64>), ScenarioError> {
    if outcomes.is_empty() {
        return Err(ScenarioError::new(
            "outcomes",
            "at least one outcome is required",
        ));
    }
    let mut seen = HashSet::new();
    for (i, o) in outcomes.iter().enumerate() {
        if o.label.is_empty() {
            return Err(ScenarioError::new(
                format!("outcomes[{i}].label"),
                "label is empty",
            ));
        }
        if !seen.insert(o.label.as_str()) {
            return Err(ScenarioError::new(
                format!("outcomes[{i}].label"),
                format!("duplicate outcome label \"{}\"", o.label),
            ));
        }
        if !(o.prob.is_finite() && o.prob > 0.0) {
            return Err(ScenarioError::new(
                format!("outcomes[{i}].prob"),
                format!("probability must be positive and finite, got {}", o.prob),
            ));
        }
    }
    let total: f64 = outcomes.iter().map(|o| o.prob).sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(ScenarioError::new(
            "outcomes",
            format!("probabilities sum to {total}, expected 1 within {PROB_SUM_TOL:e}"),
        ));
    }
    let space = FiniteProbSpace::new(outcomes.iter().map(|o| o.prob).collect())
        .map_err(|e| ScenarioError::new("outcomes", e.to_string()))?;
    Ok((outcomes.iter().map(|o| o.label.clone()).collect(), space))
}

fn validate_algebras(
    specs: &[AlgebraSpec],
    index: &HashMap<&str, usize>,
) -> Result<Vec<(String, SubAlgebra)>, ScenarioError> {
    if specs.is_empty() {
        return Err(ScenarioError::new(
            "algebras",
            "at least one algebra is required",
        ));
    }
    let n = index.len();
    let mut names = HashSet::new();
    let mut out = Vec::with_capacity(specs.len());
    for (a, spec) in specs.iter().enumerate() {
        if !names.insert(spec.name.as_str()) {
            return Err(ScenarioError::new(
                format!("algebras[{a}].name"),
                format!("duplicate algebra name \"{}\"", spec.name),
            ));
        }
        let mut owner: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut atoms = Vec::with_capacity(spec.atoms.len());
        for (k, atom) in spec.atoms.iter().enumerate() {
            if atom.is_empty() {
                return Err(ScenarioError::new(
                    format!("algebras[{a}].atoms[{k}]"),
                    "atom is empty",
                ));
            }
            let mut idx = Vec::with_capacity(atom.len());
            for (j, label) in atom.iter().enumerate() {
                let path = format!("algebras[{a}].atoms[{k}][{j}]");
                let &i = index.get(label.as_str()).ok_or_else(|| {
                    ScenarioError::new(&path, format!("unknown outcome label \"{label}\""))
                })?;
                if let Some((k0, j0)) = owner[i] {
                    return Err(ScenarioError::new(
                        path,
                        format!(
                            "outcome \"{label}\" already listed at algebras[{a}].atoms[{k0}][{j0}]"
                        ),
                    ));
                }
                owner[i] = Some((k, j));
                idx.push(i);
            }
            atoms.push(idx);
        }
        if let Some(i) = owner.iter().position(|o| o.is_none()) {
            let missing = index
                .iter()
                .find(|(_, &v)| v == i)
                .map(|(l, _)| *l)
                .unwrap_or("?");
            return Err(ScenarioError::new(
                format!("algebras[{a}].atoms"),
                format!("outcome \"{missing}\" is not covered by any atom"),
            ));
        }
        let f = SubAlgebra::new(n, atoms)
            .map_err(|e| ScenarioError::new(format!("algebras[{a}]"), e.to_string()))?;
        out.push((spec.name.clone(), f));
    }
    Ok(out)
}

fn validate_filtration(
    names: &[String],
    algebras: &[(String, SubAlgebra)],
) -> Result<Vec<usize>, ScenarioError> {
    if names.is_empty() {
        return Err(ScenarioError::new(
            "filtration",
            "filtration needs at least one stage",
        ));
    }
    let mut idx: Vec<usize> = Vec::with_capacity(names.len());
    for (t, name) in names.iter().enumerate() {
        let i = algebras
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| {
                ScenarioError::new(
                    format!("filtration[{t}]"),
                    format!("unknown algebra \"{name}\""),
                )
            })?;
        if t > 0 && !algebras[idx[t - 1]].1.is_coarser_than(&algebras[i].1) {
            return Err(ScenarioError::new(
                format!("filtration[{t}]"),
                format!("algebra \"{name}\" does not refine \"{}\"", names[t - 1]),
            ));
        }
        idx.push(i);
    }
    Ok(idx)
}

fn validate_positions(
    specs: &[PositionSpec],
    labels: &[String],
    index: &HashMap<&str, usize>,
) -> Result<Vec<(String, RandomVar<f64>)>, ScenarioError> {
    if specs.is_empty() {
        return Err(ScenarioError::new(
            "positions",
            "at least one position is required",
        ));
    }
    let mut names = HashSet::new();
    let mut out = Vec::with_capacity(specs.len());
    for (p, spec) in specs.iter().enumerate() {
        if !names.insert(spec.name.as_str()) {
            return Err(ScenarioError::new(
                format!("positions[{p}].name"),
                format!("duplicate position name \"{}\"", spec.name),
            ));
        }
        let mut values = vec![0.0; labels.len()];
        for (label, &v) in &spec.values {
            let path = format!("positions[{p}].values.{label}");
            let &i = index
                .get(label.as_str())
                .ok_or_else(|| ScenarioError::new(&path, "unknown outcome label"))?;
            if !v.is_finite() {
                return Err(ScenarioError::new(path, "value must be finite"));
            }
            values[i] = v;
        }
        if let Some(missing) = labels.iter().find(|l| !spec.values.contains_key(*l)) {
            return Err(ScenarioError::new(
                format!("positions[{p}].values"),
                format!("missing outcome \"{missing}\""),
            ));
        }
        out.push((spec.name.clone(), RandomVar::new(values).expect("finite")));
    }
    Ok(out)
}

fn number(params: &Map<String, Value>, key: &str, path: &str) -> Result<f64, ScenarioError> {
    params
        .get(key)
        .ok_or_else(|| ScenarioError::new(path, format!("missing parameter \"{key}\"")))?
        .as_f64()
        .ok_or_else(|| ScenarioError::new(format!("{path}.{key}"), "expected a number"))
}

fn numbers(params: &Map<String, Value>, key: &str, path: &str) -> Result<Vec<f64>, ScenarioError> {
    let arr = params
        .get(key)
        .ok_or_else(|| ScenarioError::new(path, format!("missing parameter \"{key}\"")))?
        .as_array()
        .ok_or_else(|| {
            ScenarioError::new(format!("{path}.{key}"), "expected an array of numbers")
        })?;
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_f64().ok_or_else(|| {
                ScenarioError::new(format!("{path}.{key}[{i}]"), "expected a number")
            })
        })
        .collect()
}

fn only_keys(
    params: &Map<String, Value>,
    allowed: &[&str],
    path: &str,
    what: &str,
) -> Result<(), ScenarioError> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(ScenarioError::new(
            format!("{path}.{k}"),
            format!("unknown parameter for {what}"),
        )),
        None => Ok(()),
    }
}

fn validate_young(spec: &YoungSpec) -> Result<YoungChoice, ScenarioError> {
    let path = "young.params";
    let choice = match spec.family.as_str() {
        "power" => {
            only_keys(&spec.params, &["p"], path, "family power")?;
            let p = number(&spec.params, "p", path)?;
            YoungFn::power(p)
                .map_err(|e| ScenarioError::new(format!("{path}.p"), e.to_string()))?;
            YoungChoice::Power { p }
        }
        "linf" => {
            only_keys(&spec.params, &[], path, "family linf")?;
            YoungChoice::Linf
        }
        "exp" => {
            only_keys(&spec.params, &[], path, "family exp")?;
            YoungChoice::Exp
        }
        "piecewise" => {
            only_keys(
                &spec.params,
                &["breaks", "slopes", "cap"],
                path,
                "family piecewise",
            )?;
            let breaks = numbers(&spec.params, "breaks", path)?;
            let slopes = numbers(&spec.params, "slopes", path)?;
            let cap = match spec.params.get("cap") {
                None | Some(Value::Null) => None,
                Some(_) => Some(number(&spec.params, "cap", path)?),
            };
            YoungFn::piecewise(breaks.clone(), slopes.clone(), cap)
                .map_err(|e| ScenarioError::new(path, e.to_string()))?;
            YoungChoice::Piecewise {
                breaks,
                slopes,
                cap,
            }
        }
        other => {
            return Err(ScenarioError::new(
                "young.family",
                format!("unknown family \"{other}\", expected power, linf, exp or piecewise"),
            ))
        }
    };
    Ok(choice)
}

fn validate_risk(spec: &RiskSpec) -> Result<RiskChoice, ScenarioError> {
    let path = "risk.params";
    match spec.measure.as_str() {
        "entropic" => {
            only_keys(&spec.params, &["gamma"], path, "measure entropic")?;
            let gamma = number(&spec.params, "gamma", path)?;
            Entropic::new(gamma)
                .map_err(|e| ScenarioError::new(format!("{path}.gamma"), e.to_string()))?;
            Ok(RiskChoice::Entropic { gamma })
        }
        "worst_case" => {
            only_keys(&spec.params, &[], path, "measure worst_case")?;
            Ok(RiskChoice::WorstCase)
        }
        "linear" => {
            only_keys(&spec.params, &[], path, "measure linear")?;
            Ok(RiskChoice::Linear)
        }
        other => Err(ScenarioError::new(
            "risk.measure",
            format!("unknown measure \"{other}\", expected entropic, worst_case or linear"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "outcomes": [{"label": "a", "prob": 0.5}, {"label": "b", "prob": 0.5}],
        "algebras": [{"name": "F", "atoms": [["a", "b"]]}],
        "positions": [{"name": "x", "values": {"a": 3, "b": 4}}],
        "young": {"family": "power", "params": {"p": 2}},
        "risk": {"measure": "entropic", "params": {"gamma": 1}}
    }"#;

    fn with(edit: impl FnOnce(&mut Value)) -> Result<Scenario, ScenarioError> {
        let mut v: Value = serde_json::from_str(BASE).unwrap();
        edit(&mut v);
        Scenario::from_value(v)
    }

    #[test]
    fn parses_base() {
        let s = Scenario::from_json(BASE).unwrap();
        assert_eq!(s.positions[0].1.values(), &[3.0, 4.0]);
        assert_eq!(s.young, YoungChoice::Power { p: 2.0 });
        assert_eq!(s.risk, RiskChoice::Entropic { gamma: 1.0 });
        assert_eq!(Scenario::from_value(s.to_value()).unwrap(), s);
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let err = with(|v| v["outcomes"][1]["prob"] = 0.4.into()).unwrap_err();
        assert_eq!(err.path, "outcomes");
        assert!(err.message.contains("sum to 0.9"), "{err}");
    }

    #[test]
    fn diagnostics_carry_paths() {
        let err = with(|v| v["algebras"][0]["atoms"][0][1] = "z".into()).unwrap_err();
        assert_eq!(err.path, "algebras[0].atoms[0][1]");
        let err = with(|v| v["algebras"][0]["atoms"] = serde_json::json!([["a"]])).unwrap_err();
        assert!(err.message.contains("\"b\" is not covered"), "{err}");
        let err = with(|v| v["positions"][0]["values"]["c"] = 1.into()).unwrap_err();
        assert_eq!(err.path, "positions[0].values.c");
        let err = with(|v| {
            v["positions"][0]["values"]
                .as_object_mut()
                .unwrap()
                .remove("b");
        })
        .unwrap_err();
        assert!(err.message.contains("missing outcome \"b\""));
        let err = with(|v| v["young"]["params"] = serde_json::json!({"p": 0.5})).unwrap_err();
        assert_eq!(err.path, "young.params.p");
        let err = with(|v| v["risk"]["measure"] = "var".into()).unwrap_err();
        assert_eq!(err.path, "risk.measure");
        let err = with(|v| v["outcomes"][0]["prob"] = "half".into()).unwrap_err();
        assert_eq!(err.path, "outcomes[0].prob");
        let err = with(|v| v["extra"] = 1.into()).unwrap_err();
        assert!(err.message.contains("unknown field"), "{err}");
    }

    #[test]
    fn filtration_must_refine() {
        let err = with(|v| {
            v["algebras"] = serde_json::json!([
                {"name": "F0", "atoms": [["a", "b"]]},
                {"name": "F1", "atoms": [["a"], ["b"]]}
            ]);
            v["filtration"] = serde_json::json!(["F1", "F0"]);
        })
        .unwrap_err();
        assert_eq!(err.path, "filtration[1]");
        let ok = with(|v| {
            v["algebras"] = serde_json::json!([
                {"name": "F0", "atoms": [["a", "b"]]},
                {"name": "F1", "atoms": [["b"], ["a"]]}
            ]);
            v["filtration"] = serde_json::json!(["F0", "F1"]);
        })
        .unwrap();
        assert_eq!(ok.filtration, Some(vec![0, 1]));
    }
}
