//! Trained models and their on-disk format.
//!
//! A model file is one header line followed by a JSON document:
//!
//! ```text
//! droidops-model <format version> <sha256 of the JSON body, hex>
//! {"kind":"random_forest","params":{...},"feature_names":[...],"trees":[...],...}
//! ```
//!
//! Trees are stored as flat node arrays with child indices. Floats are
//! written with round-trip precision, so a loaded model predicts exactly as
//! the saved one did.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tree::{leaf_fraction, Tree, TreeNode};
use super::{ClassifierConfig, ClassifierError, ClassifierKind, Trainer};
use crate::label::Label;
use crate::selection::FeatureRanking;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "droidops-model";

/// The ranking a model's features were projected through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionProvenance {
    pub ranking: FeatureRanking,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Probability-like malware score in `[0, 1]`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ClassifierKind,
    pub params: ClassifierConfig,
    pub feature_names: Vec<String>,
    #[serde(default)]
    pub selection: Option<SelectionProvenance>,
    pub seed: u64,
    /// Free-form description of the run that produced the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_config: Option<String>,
    pub trees: Vec<Tree>,
}

impl TrainedModel {
    pub(crate) fn new(
        params: ClassifierConfig,
        trees: Vec<Tree>,
        feature_names: Vec<String>,
        seed: u64,
    ) -> Self {
        Self {
            kind: params.kind(),
            params,
            feature_names,
            selection: None,
            seed,
            run_config: None,
            trees,
        }
    }

    pub fn with_selection(mut self, ranking: FeatureRanking) -> Self {
        self.selection = Some(SelectionProvenance { ranking });
        self
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.trees.iter().map(Tree::leaf_count).sum()
    }

    /// Single trees score by leaf class fraction (or naive-Bayes posterior);
    /// forests by the fraction of trees voting malware.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ClassifierError> {
        if x.len() != self.n_features() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFinite);
        }
        let score = match self.kind {
            ClassifierKind::RandomForest => {
                let votes = self
                    .trees
                    .iter()
                    .filter(|t| Label::from_score(tree_score(t, x)) == Label::Malware)
                    .count();
                votes as f64 / self.trees.len() as f64
            }
            _ => tree_score(&self.trees[0], x),
        };
        Ok(Prediction {
            label: Label::from_score(score),
            score,
        })
    }

    fn check(&self) -> Result<(), String> {
        if self.kind != self.params.kind() {
            return Err(format!("kind {} disagrees with parameters", self.kind));
        }
        if self.trees.is_empty()
            || (self.kind != ClassifierKind::RandomForest && self.trees.len() != 1)
        {
            return Err(format!(
                "{} trees for a {} model",
                self.trees.len(),
                self.kind
            ));
        }
        for tree in &self.trees {
            tree.validate(self.n_features())?;
        }
        Ok(())
    }
}

fn tree_score(tree: &Tree, x: &[f64]) -> f64 {
    match tree.leaf(x) {
        TreeNode::Leaf {
            naive_bayes: Some(nb),
            ..
        } => nb.posterior(x)[1],
        TreeNode::Leaf { counts, .. } => leaf_fraction(counts),
        TreeNode::Internal { .. } => unreachable!("leaf() returns leaves"),
    }
}

/// Serializes `model` in the versioned, checksummed format.
pub fn encode_model(model: &TrainedModel) -> Vec<u8> {
    let body = serde_json::to_vec(model).expect("models serialize");
    let digest = hex::encode(Sha256::digest(&body));
    let mut out = format!("{MAGIC} {MODEL_FORMAT_VERSION} {digest}\n").into_bytes();
    out.extend_from_slice(&body);
    out.push(b'\n');
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<TrainedModel, ClassifierError> {
    let corrupt = |m: &str| ClassifierError::CorruptModel(m.to_string());
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| corrupt("missing header"))?;
    let header =
        std::str::from_utf8(&bytes[..newline]).map_err(|_| corrupt("header is not UTF-8"))?;
    let mut parts = header.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(corrupt("not a model file"));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| corrupt("bad version field"))?;
    if version > MODEL_FORMAT_VERSION {
        return Err(ClassifierError::VersionMismatch {
            found: version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let digest = parts.next().ok_or_else(|| corrupt("missing checksum"))?;

    let mut body = &bytes[newline + 1..];
    if let Some(stripped) = body.strip_suffix(b"\n") {
        body = stripped;
    }
    if hex::encode(Sha256::digest(body)) != digest {
        return Err(corrupt("checksum mismatch"));
    }
    let model: TrainedModel = serde_json::from_slice(body).map_err(|e| corrupt(&e.to_string()))?;
    model.check().map_err(|e| corrupt(&e))?;
    Ok(model)
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), ClassifierError> {
    let io = |source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io)?;
    file.write_all(&encode_model(model)).map_err(io)?;
    file.sync_all().map_err(io)
}

pub fn load_model(path: &Path) -> Result<TrainedModel, ClassifierError> {
    let bytes = fs::read(path).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{Dataset, DecisionTreeParams, NbtParams, RandomForestParams};

    fn leaf(benign: f64, malware: f64) -> Tree {
        Tree {
            nodes: vec![TreeNode::Leaf {
                counts: [benign, malware],
                naive_bayes: None,
            }],
        }
    }

    fn toy() -> Dataset {
        let v: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![i as f64, (i * 7 % 11) as f64])
            .collect();
        let l = (0..40)
            .map(|i| {
                if i < 18 {
                    Label::Benign
                } else {
                    Label::Malware
                }
            })
            .collect();
        Dataset::unnamed(v, l).unwrap()
    }

    #[test]
    fn leaf_fraction_score() {
        let m = TrainedModel::new(
            ClassifierConfig::DecisionTree(DecisionTreeParams::default()),
            vec![leaf(3.0, 1.0)],
            vec!["f0".into()],
            0,
        );
        let p = m.predict(&[0.0]).unwrap();
        assert_eq!((p.label, p.score), (Label::Benign, 0.25));
        assert!(matches!(
            m.predict(&[0.0, 1.0]),
            Err(ClassifierError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn forest_vote_fraction_and_tie() {
        let trees = |m: usize, b: usize| {
            let mut t = vec![leaf(0.0, 1.0); m];
            t.extend(vec![leaf(1.0, 0.0); b]);
            t
        };
        let rf = |t| {
            TrainedModel::new(
                ClassifierConfig::RandomForest(RandomForestParams::default()),
                t,
                vec!["f0".into()],
                0,
            )
        };
        let p = rf(trees(3, 2)).predict(&[0.0]).unwrap();
        assert_eq!((p.label, p.score), (Label::Malware, 0.6));
        let p = rf(trees(2, 2)).predict(&[0.0]).unwrap();
        assert_eq!((p.label, p.score), (Label::Malware, 0.5));
    }

    #[test]
    fn round_trip_every_kind() {
        let d = toy();
        for cfg in [
            ClassifierConfig::DecisionTree(DecisionTreeParams::default()),
            ClassifierConfig::RandomForest(RandomForestParams {
                n_trees: 7,
                seed: 3,
                ..Default::default()
            }),
            ClassifierConfig::NaiveBayesTree(NbtParams {
                min_leaf_for_nb: 10,
                ..Default::default()
            }),
        ] {
            let m = cfg.train(&d).unwrap();
            let bytes = encode_model(&m);
            let back = decode_model(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(encode_model(&back), bytes);
        }
    }

    #[test]
    fn truncated_and_future_files() {
        let m = DecisionTreeParams::default().train(&toy()).unwrap();
        let bytes = encode_model(&m);
        for cut in [0, 10, bytes.len() / 2, bytes.len() - 3] {
            assert!(
                matches!(
                    decode_model(&bytes[..cut]),
                    Err(ClassifierError::CorruptModel(_))
                ),
                "cut {cut}"
            );
        }
        let future = String::from_utf8(bytes).unwrap().replacen(" 1 ", " 99 ", 1);
        assert!(matches!(
            decode_model(future.as_bytes()),
            Err(ClassifierError::VersionMismatch { found: 99, .. })
        ));
    }
}
