//! The black-box side: prediction files, specialization weights and a small
//! built-in weighted learner.

use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitmask::BitMask;
use crate::data::BinaryDataset;
use crate::error::{Error, Result};
use crate::rules::{capture_unchecked, Antecedent, Literal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictionSource {
    File { path: PathBuf },
    Builtin,
}

/// Black-box labels aligned with the rows of one split.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub labels: BitMask,
    pub source: PredictionSource,
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.labels.get(i)
    }

    pub fn accuracy(&self, data: &BinaryDataset) -> f64 {
        let wrong = self.labels.count_and_not(data.labels()) + data.labels().count_and_not(&self.labels);
        1.0 - wrong as f64 / data.n_rows() as f64
    }
}

fn parse_label(value: &str, line: usize) -> Result<bool> {
    match value.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        v => Err(Error::NonBinaryPrediction {
            line,
            value: v.to_string(),
        }),
    }
}

/// Parses a prediction file: one `0`/`1` per line, or a CSV whose header has
/// a `prediction` column.
pub fn parse_predictions(text: &str, expected_len: usize) -> Result<BitMask> {
    let first = text.lines().next().unwrap_or("").trim();
    let labels: Vec<bool> = if first.split(',').any(|h| h.trim() == "prediction") {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let col = rdr
            .headers()?
            .iter()
            .position(|h| h.trim() == "prediction")
            .ok_or_else(|| Error::MissingColumn("prediction".into()))?;
        let mut out = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            out.push(parse_label(rec.get(col).unwrap_or(""), i + 2)?);
        }
        out
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| parse_label(l, i + 1))
            .collect::<Result<_>>()?
    };
    if labels.len() != expected_len {
        return Err(Error::LengthMismatch {
            expected: expected_len,
            found: labels.len(),
        });
    }
    Ok(BitMask::from_bools(&labels))
}

pub fn load_predictions(path: impl AsRef<Path>, expected_len: usize) -> Result<PredictionSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(PredictionSet {
        labels: parse_predictions(&text, expected_len)?,
        source: PredictionSource::File { path: path.to_path_buf() },
    })
}

/// Writes one `0`/`1` per line.
pub fn save_predictions(path: impl AsRef<Path>, labels: &BitMask) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::with_capacity(labels.len() * 2);
    for b in labels.to_bools() {
        s.push(if b { '1' } else { '0' });
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Per-example training weights for the black box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub alpha: f64,
}

/// `w_i ∝ exp(α·[i uncaptured])`, normalized to sum to one.
pub fn specialization_weights(captured: &BitMask, alpha: f64) -> Result<WeightVector> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let m = captured.len();
    if m == 0 {
        return Err(Error::Data("cannot weight an empty dataset".into()));
    }
    let n_cap = captured.count() as f64;
    let n_unc = m as f64 - n_cap;
    // scaled by exp(-α) so large α cannot overflow
    let shrink = (-alpha).exp();
    let w_unc = 1.0 / (n_cap * shrink + n_unc);
    let w_cap = shrink * w_unc;
    let weights = (0..m).map(|i| if captured.get(i) { w_cap } else { w_unc }).collect();
    Ok(WeightVector { weights, alpha })
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn uniform(m: usize) -> Self {
        WeightVector {
            weights: vec![1.0 / m as f64; m],
            alpha: 0.0,
        }
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Total weight on examples outside `captured`.
    pub fn mass_outside(&self, captured: &BitMask) -> f64 {
        self.weights.iter().enumerate().filter(|(i, _)| !captured.get(*i)).map(|(_, w)| w).sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "weight"])?;
        for (i, x) in self.weights.iter().enumerate() {
            w.write_record([i.to_string(), format!("{x:e}")])?;
        }
        w.flush().map_err(|e| Error::io("<weights>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            epochs: 30,
            learning_rate: 0.1,
            l2: 1e-4,
            batch_size: 64,
            seed: 0,
        }
    }
}

/// Weighted logistic regression over rule indicator terms.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinModel {
    pub terms: Vec<Antecedent>,
    pub coef: Vec<f64>,
    pub intercept: f64,
    /// Set when training data had a single weighted class.
    pub constant: Option<bool>,
    pub config: LearnerConfig,
}

/// Serialized form, with literals referenced by feature name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltinParams {
    pub terms: Vec<Vec<(String, bool)>>,
    pub coef: Vec<f64>,
    pub intercept: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<bool>,
    pub config: LearnerConfig,
}

/// Default term set: every binary feature plus the given antecedents.
pub fn default_terms<'a>(data: &BinaryDataset, extra: impl IntoIterator<Item = &'a Antecedent>) -> Vec<Antecedent> {
    let mut terms: Vec<Antecedent> = (0..data.n_features()).map(|f| Antecedent::single(Literal::pos(f))).collect();
    for a in extra {
        if !terms.contains(a) {
            terms.push(a.clone());
        }
    }
    terms
}

fn active_terms(terms: &[Antecedent], data: &BinaryDataset) -> Vec<Vec<u32>> {
    let mut rows = vec![Vec::new(); data.n_rows()];
    for (t, a) in terms.iter().enumerate() {
        for i in capture_unchecked(a, data).iter_ones() {
            rows[i].push(t as u32);
        }
    }
    rows
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn train_builtin(
    data: &BinaryDataset,
    weights: &WeightVector,
    terms: Vec<Antecedent>,
    cfg: &LearnerConfig,
) -> Result<BuiltinModel> {
    let m = data.n_rows();
    if weights.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: weights.len(),
        });
    }
    if weights.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::Config("weights must be finite and non-negative".into()));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 || cfg.learning_rate.is_nan() || cfg.learning_rate <= 0.0 || cfg.l2 < 0.0 {
        return Err(Error::Config(format!("invalid learner configuration {cfg:?}")));
    }
    for t in &terms {
        t.validate(data.n_features())?;
    }
    let pos_mass: f64 = (0..m).filter(|&i| data.label(i)).map(|i| weights.weights[i]).sum();
    let total = weights.sum();
    if total <= 0.0 || pos_mass <= 0.0 || pos_mass >= total {
        let label = pos_mass > 0.0;
        warn!("weighted training data has a single class; using constant predictor {}", label as u8);
        return Ok(BuiltinModel {
            coef: vec![0.0; terms.len()],
            terms,
            intercept: 0.0,
            constant: Some(label),
            config: cfg.clone(),
        });
    }

    let rows = active_terms(&terms, data);
    let scale = m as f64 / total;
    let mut coef = vec![0.0; terms.len()];
    let mut intercept = (pos_mass / (total - pos_mass)).ln();
    // AdaGrad accumulators
    let mut g2 = vec![1e-8; terms.len()];
    let mut g2_b = 1e-8;
    let mut grad = vec![0.0; terms.len()];
    let mut touched: Vec<u32> = Vec::new();
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grad_b = 0.0;
            for &i in batch {
                let z = intercept + rows[i].iter().map(|&t| coef[t as usize]).sum::<f64>();
                let y = if data.label(i) { 1.0 } else { 0.0 };
                let r = weights.weights[i] * scale * (sigmoid(z) - y) / batch.len() as f64;
                grad_b += r;
                for &t in &rows[i] {
                    if grad[t as usize] == 0.0 {
                        touched.push(t);
                    }
                    grad[t as usize] += r;
                }
            }
            for &t in &touched {
                let t = t as usize;
                let g = grad[t] + cfg.l2 * coef[t];
                g2[t] += g * g;
                coef[t] -= cfg.learning_rate * g / g2[t].sqrt();
                grad[t] = 0.0;
            }
            touched.clear();
            g2_b += grad_b * grad_b;
            intercept -= cfg.learning_rate * grad_b / g2_b.sqrt();
        }
    }
    Ok(BuiltinModel {
        terms,
        coef,
        intercept,
        constant: None,
        config: cfg.clone(),
    })
}

impl BuiltinModel {
    pub fn score_row(&self, x: &[bool]) -> f64 {
        self.intercept
            + self
                .terms
                .iter()
                .zip(&self.coef)
                .filter(|(a, _)| a.matches(x))
                .map(|(_, c)| c)
                .sum::<f64>()
    }

    pub fn predict_row(&self, x: &[bool]) -> bool {
        match self.constant {
            Some(c) => c,
            None => sigmoid(self.score_row(x)) >= 0.5,
        }
    }

    pub fn predict(&self, data: &BinaryDataset) -> Result<PredictionSet> {
        for t in &self.terms {
            t.validate(data.n_features())?;
        }
        let labels = match self.constant {
            Some(c) => {
                if c {
                    BitMask::ones(data.n_rows())
                } else {
                    BitMask::zeros(data.n_rows())
                }
            }
            None => {
                let mut z = vec![self.intercept; data.n_rows()];
                for (a, c) in self.terms.iter().zip(&self.coef) {
                    for i in capture_unchecked(a, data).iter_ones() {
                        z[i] += c;
                    }
                }
                BitMask::from_bools(&z.iter().map(|&s| sigmoid(s) >= 0.5).collect::<Vec<_>>())
            }
        };
        Ok(PredictionSet {
            labels,
            source: PredictionSource::Builtin,
        })
    }

    /// Weighted mean log-loss over the examples in `subset`.
    pub fn weighted_loss(&self, data: &BinaryDataset, weights: &[f64], subset: &BitMask) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in subset.iter_ones() {
            let p = match self.constant {
                Some(c) => if c { 1.0 - 1e-12 } else { 1e-12 },
                None => sigmoid(self.score_row(&data.row(i))).clamp(1e-12, 1.0 - 1e-12),
            };
            let l = if data.label(i) { -p.ln() } else { -(1.0 - p).ln() };
            num += weights[i] * l;
            den += weights[i];
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    pub fn to_params(&self, names: &[String]) -> BuiltinParams {
        BuiltinParams {
            terms: self
                .terms
                .iter()
                .map(|a| a.literals().iter().map(|l| (names[l.feature].clone(), !l.negated)).collect())
                .collect(),
            coef: self.coef.clone(),
            intercept: self.intercept,
            constant: self.constant,
            config: self.config.clone(),
        }
    }

    pub fn from_params(p: &BuiltinParams, names: &[String]) -> Result<Self> {
        if p.terms.len() != p.coef.len() {
            return Err(Error::LengthMismatch {
                expected: p.terms.len(),
                found: p.coef.len(),
            });
        }
        let terms = p
            .terms
            .iter()
            .map(|lits| {
                let lits = lits
                    .iter()
                    .map(|(name, positive)| {
                        names
                            .iter()
                            .position(|n| n == name)
                            .map(|f| Literal {
                                feature: f,
                                negated: !positive,
                            })
                            .ok_or_else(|| Error::Data(format!("unknown feature {name:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Antecedent::new(lits)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BuiltinModel {
            terms,
            coef: p.coef.clone(),
            intercept: p.intercept,
            constant: p.constant,
            config: p.config.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn parse_line_and_csv_formats() {
        assert_eq!(parse_predictions("1\n0\n0\n1\n", 4).unwrap().to_bools(), vec![true, false, false, true]);
        assert!(matches!(
            parse_predictions("1\n0\n1\n", 4),
            Err(Error::LengthMismatch { expected: 4, found: 3 })
        ));
        let err = parse_predictions("1\n0.7\n", 2).unwrap_err();
        assert!(err.to_string().contains("non-binary prediction"));
        let csv = "id,prediction\n7,1\n8,0\n";
        assert_eq!(parse_predictions(csv, 2).unwrap().to_bools(), vec![true, false]);
    }

    #[test]
    fn load_and_save_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("preds.txt");
        let mask = BitMask::from_bools(&[true, false, false, true]);
        save_predictions(&p, &mask).unwrap();
        let set = load_predictions(&p, 4).unwrap();
        assert_eq!(set.labels, mask);
        assert!(matches!(set.source, PredictionSource::File { .. }));
        assert!(load_predictions(dir.path().join("nope"), 4).is_err());
    }

    #[test]
    fn weight_examples() {
        let mask = BitMask::from_bools(&[true, true, false, false]);
        let w = specialization_weights(&mask, 0.0).unwrap();
        assert!(w.weights.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let w = specialization_weights(&mask, 1.0).unwrap();
        assert!((w.weights[0] - 1.0 / (2.0 + 2.0 * E)).abs() < 1e-12);
        assert!((w.weights[2] - E / (2.0 + 2.0 * E)).abs() < 1e-12);
        assert!((w.weights[0] - 0.134470).abs() < 1e-6);
        assert!((w.weights[2] / w.weights[0] - 2.72).abs() < 0.01);
        let w = specialization_weights(&mask, 2.0).unwrap();
        assert!((w.weights[2] / w.weights[0] - 7.39).abs() < 0.01);
        assert!(specialization_weights(&mask, -1.0).is_err());
        // huge alpha stays finite
        let w = specialization_weights(&mask, 800.0).unwrap();
        assert!((w.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_csv_has_header_and_rows() {
        let w = specialization_weights(&BitMask::from_bools(&[true, false]), 1.0).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,weight");
        assert_eq!(lines.len(), 3);
        let total: f64 = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    fn separable() -> BinaryDataset {
        let rows: Vec<Vec<bool>> = (0..40).map(|i| vec![i % 2 == 0, i % 3 == 0, i % 5 == 0]).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r[0] && !r[2]).collect();
        BinaryDataset::from_rows(&rows, &labels, None).unwrap()
    }

    #[test]
    fn builtin_fits_separable_data() {
        let d = separable();
        let terms = default_terms(&d, &[Antecedent::new(vec![Literal::pos(0), Literal::neg(2)]).unwrap()]);
        let cfg = LearnerConfig {
            epochs: 200,
            ..Default::default()
        };
        let model = train_builtin(&d, &WeightVector::uniform(40), terms, &cfg).unwrap();
        assert_eq!(model.predict(&d).unwrap().accuracy(&d), 1.0);
        for i in 0..40 {
            assert_eq!(model.predict_row(&d.row(i)), d.label(i));
        }
    }

    #[test]
    fn builtin_is_deterministic_and_round_trips() {
        let d = separable();
        let cfg = LearnerConfig::default();
        let a = train_builtin(&d, &WeightVector::uniform(40), default_terms(&d, []), &cfg).unwrap();
        let b = train_builtin(&d, &WeightVector::uniform(40), default_terms(&d, []), &cfg).unwrap();
        assert_eq!(a, b);
        let params = a.to_params(d.names());
        let json = serde_json::to_string(&params).unwrap();
        let back = BuiltinModel::from_params(&serde_json::from_str(&json).unwrap(), d.names()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn single_class_gives_constant_predictor() {
        let rows: Vec<Vec<bool>> = (0..6).map(|i| vec![i % 2 == 0]).collect();
        let d = BinaryDataset::from_rows(&rows, &[true; 6], None).unwrap();
        let m = train_builtin(&d, &WeightVector::uniform(6), default_terms(&d, []), &LearnerConfig::default()).unwrap();
        assert_eq!(m.constant, Some(true));
        assert_eq!(m.predict(&d).unwrap().labels.count(), 6);
    }
}
