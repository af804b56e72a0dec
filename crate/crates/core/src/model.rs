//! The assembled hybrid model: prefix, gate and black box.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blackbox::{BuiltinModel, BuiltinParams, PredictionSet};
use crate::data::BinaryDataset;
use crate::error::{Error, Result};
use crate::objective::{Mode, ObjectiveValue};
use crate::rules::{assign, Antecedent, Literal, Rule};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum BlackBox {
    /// Predictions come from an external file aligned with the data.
    File { path: PathBuf },
    Builtin(BuiltinModel),
    /// No black box (e.g. a rule list with a default rule).
    None,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub objective: f64,
    pub objective_error: f64,
    pub objective_sparsity: f64,
    pub objective_transparency: f64,
    pub train_transparency: f64,
    pub status: String,
    #[serde(default)]
    pub policy: String,
    #[serde(default)]
    pub min_support: f64,
    #[serde(default)]
    pub train_rows: usize,
}

impl ModelMetadata {
    pub fn from_objective(v: &ObjectiveValue, train_transparency: f64, status: &str) -> Self {
        ModelMetadata {
            objective: v.total(),
            objective_error: v.error(),
            objective_sparsity: v.sparsity(),
            objective_transparency: v.transparency(),
            train_transparency,
            status: status.to_string(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridModel {
    pub mode: Mode,
    pub feature_names: Vec<String>,
    pub rules: Vec<Rule>,
    pub lambda: f64,
    pub beta: f64,
    pub min_coverage: f64,
    pub alpha: Option<f64>,
    pub blackbox: BlackBox,
    pub metadata: ModelMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Interpretable,
    Blackbox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub label: bool,
    pub route: Route,
    pub rule: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: f64,
    pub transparency: f64,
    /// `None` when no example is routed to that part.
    pub interpretable_accuracy: Option<f64>,
    pub blackbox_accuracy: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RuleFile {
    literals: Vec<(String, bool)>,
    consequent: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum BlackBoxFile {
    File { path: PathBuf },
    Builtin { params: BuiltinParams },
    None,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u32,
    mode: Mode,
    feature_names: Vec<String>,
    rules: Vec<RuleFile>,
    lambda: f64,
    beta: f64,
    min_coverage: f64,
    alpha: Option<f64>,
    blackbox: BlackBoxFile,
    metadata: ModelMetadata,
}

impl HybridModel {
    pub fn predict(&self, x: &[bool], bb: Option<bool>) -> Result<Prediction> {
        self.predict_at(x, bb, 0)
    }

    fn predict_at(&self, x: &[bool], bb: Option<bool>, row: usize) -> Result<Prediction> {
        if x.len() != self.feature_names.len() {
            return Err(Error::LengthMismatch {
                expected: self.feature_names.len(),
                found: x.len(),
            });
        }
        let a = assign(&self.rules, x);
        if let (Some(label), true) = (a.label, a.captured) {
            return Ok(Prediction {
                label,
                route: Route::Interpretable,
                rule: a.rule,
            });
        }
        let label = match (bb, &self.blackbox) {
            (Some(b), _) => b,
            (None, BlackBox::Builtin(m)) => m.predict_row(x),
            _ => return Err(Error::MissingBlackBox(row)),
        };
        Ok(Prediction {
            label,
            route: Route::Blackbox,
            rule: None,
        })
    }

    fn check_names(&self, data: &BinaryDataset) -> Result<()> {
        if data.names() != self.feature_names.as_slice() {
            return Err(Error::Data(format!(
                "dataset features do not match the model's {} features",
                self.feature_names.len()
            )));
        }
        Ok(())
    }

    /// Predicts every row; `preds` supplies black-box labels aligned with `data`.
    pub fn predict_dataset(&self, data: &BinaryDataset, preds: Option<&PredictionSet>) -> Result<Vec<Prediction>> {
        self.check_names(data)?;
        if let Some(p) = preds {
            if p.len() != data.n_rows() {
                return Err(Error::LengthMismatch {
                    expected: data.n_rows(),
                    found: p.len(),
                });
            }
        }
        (0..data.n_rows())
            .map(|i| self.predict_at(&data.row(i), preds.map(|p| p.get(i)), i))
            .collect()
    }

    pub fn evaluate(&self, data: &BinaryDataset, preds: Option<&PredictionSet>) -> Result<Metrics> {
        let out = self.predict_dataset(data, preds)?;
        Ok(metrics(&out, data))
    }

    pub fn to_json(&self) -> Result<String> {
        let names = &self.feature_names;
        let file = ModelFile {
            schema_version: SCHEMA_VERSION,
            mode: self.mode,
            feature_names: names.clone(),
            rules: self
                .rules
                .iter()
                .map(|r| RuleFile {
                    literals: r
                        .antecedent
                        .literals()
                        .iter()
                        .map(|l| (names[l.feature].clone(), !l.negated))
                        .collect(),
                    consequent: r.consequent,
                })
                .collect(),
            lambda: self.lambda,
            beta: self.beta,
            min_coverage: self.min_coverage,
            alpha: self.alpha,
            blackbox: match &self.blackbox {
                BlackBox::File { path } => BlackBoxFile::File { path: path.clone() },
                BlackBox::Builtin(m) => BlackBoxFile::Builtin {
                    params: m.to_params(names),
                },
                BlackBox::None => BlackBoxFile::None,
            },
            metadata: self.metadata.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let found = raw.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: SCHEMA_VERSION,
                found,
            });
        }
        let file: ModelFile = serde_json::from_value(raw)?;
        let names = file.feature_names;
        let index = |name: &str| {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Data(format!("rule references unknown feature {name:?}")))
        };
        let rules = file
            .rules
            .iter()
            .map(|r| {
                let antecedent = if r.literals.is_empty() {
                    Antecedent::always_true()
                } else {
                    Antecedent::new(
                        r.literals
                            .iter()
                            .map(|(n, positive)| {
                                Ok(Literal {
                                    feature: index(n)?,
                                    negated: !positive,
                                })
                            })
                            .collect::<Result<_>>()?,
                    )?
                };
                Ok(Rule {
                    antecedent,
                    consequent: r.consequent,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let blackbox = match file.blackbox {
            BlackBoxFile::File { path } => BlackBox::File { path },
            BlackBoxFile::Builtin { params } => BlackBox::Builtin(BuiltinModel::from_params(&params, &names)?),
            BlackBoxFile::None => BlackBox::None,
        };
        Ok(HybridModel {
            mode: file.mode,
            feature_names: names,
            rules,
            lambda: file.lambda,
            beta: file.beta,
            min_coverage: file.min_coverage,
            alpha: file.alpha,
            blackbox,
            metadata: file.metadata,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        HybridModel::from_json(&text)
    }
}

pub fn metrics(preds: &[Prediction], data: &BinaryDataset) -> Metrics {
    let n = data.n_rows();
    let (mut ok, mut cap, mut cap_ok, mut bb_ok) = (0, 0, 0, 0);
    for (i, p) in preds.iter().enumerate() {
        let hit = p.label == data.label(i);
        ok += hit as usize;
        if p.route == Route::Interpretable {
            cap += 1;
            cap_ok += hit as usize;
        } else {
            bb_ok += hit as usize;
        }
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    Metrics {
        n,
        accuracy: ok as f64 / n as f64,
        transparency: cap as f64 / n as f64,
        interpretable_accuracy: ratio(cap_ok, cap),
        blackbox_accuracy: ratio(bb_ok, n - cap),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitmask::BitMask;
    use crate::blackbox::PredictionSource;

    fn data() -> BinaryDataset {
        BinaryDataset::from_rows(
            &[vec![true, false], vec![true, true], vec![false, true], vec![false, false]],
            &[true, true, false, false],
            None,
        )
        .unwrap()
    }

    fn model(rules: Vec<Rule>) -> HybridModel {
        HybridModel {
            mode: Mode::Post,
            feature_names: vec!["f1".into(), "f2".into()],
            rules,
            lambda: 0.01,
            beta: 0.001,
            min_coverage: 0.5,
            alpha: None,
            blackbox: BlackBox::File { path: "bb.txt".into() },
            metadata: ModelMetadata::default(),
        }
    }

    fn preds(bits: &[bool]) -> PredictionSet {
        PredictionSet {
            labels: BitMask::from_bools(bits),
            source: PredictionSource::Builtin,
        }
    }

    fn rule(lit: Literal, c: bool) -> Rule {
        Rule {
            antecedent: Antecedent::single(lit),
            consequent: c,
        }
    }

    #[test]
    fn routing() {
        let m = model(vec![rule(Literal::pos(1), false), rule(Literal::pos(0), true)]);
        let p = m.predict(&[true, false], None).unwrap();
        assert_eq!((p.label, p.route, p.rule), (true, Route::Interpretable, Some(1)));
        let p = m.predict(&[false, false], Some(true)).unwrap();
        assert_eq!((p.label, p.route), (true, Route::Blackbox));
        assert!(matches!(m.predict(&[false, false], None), Err(Error::MissingBlackBox(_))));
    }

    #[test]
    fn evaluate_examples() {
        let d = data();
        let m = model(vec![rule(Literal::pos(0), true), rule(Literal::neg(0), false)]);
        let r = m.evaluate(&d, Some(&preds(&[false; 4]))).unwrap();
        assert_eq!((r.accuracy, r.transparency), (1.0, 1.0));

        let m = model(vec![]);
        let r = m.evaluate(&d, Some(&preds(&[true, true, false, true]))).unwrap();
        assert_eq!((r.accuracy, r.transparency), (0.75, 0.0));
        assert_eq!(r.interpretable_accuracy, None);

        // 2/4 captured with one error, black box wrong on one of the other two
        let m = model(vec![Rule {
            antecedent: Antecedent::single(Literal::pos(1)),
            consequent: true,
        }]);
        let r = m.evaluate(&d, Some(&preds(&[false, false, false, false]))).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.transparency, 0.5);
        assert_eq!(r.interpretable_accuracy, Some(0.5));
        assert_eq!(r.blackbox_accuracy, Some(0.5));
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let m = model(vec![
            Rule {
                antecedent: Antecedent::new(vec![Literal::pos(0), Literal::neg(1)]).unwrap(),
                consequent: true,
            },
            rule(Literal::neg(0), false),
        ]);
        let text = m.to_json().unwrap();
        assert_eq!(HybridModel::from_json(&text).unwrap(), m);
        let bumped = text.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(
            HybridModel::from_json(&bumped),
            Err(Error::SchemaVersion { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn mismatched_features_rejected() {
        let d = BinaryDataset::from_rows(&[vec![true]], &[true], None).unwrap();
        assert!(model(vec![]).evaluate(&d, None).is_err());
    }
}
