use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::TrainedModel;
use super::tree::{self, FeatureSampler, GrowParams};
use super::{ClassifierConfig, ClassifierError, ClassifierKind, Dataset, Trainer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomForestParams {
    pub n_trees: usize,
    /// Features sampled per node; `None` means `floor(log2 m) + 1`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
    pub bootstrap: bool,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            mtry: None,
            min_leaf: 1,
            max_depth: None,
            seed: 0,
            bootstrap: true,
        }
    }
}

/// `floor(log2 m) + 1`.
pub fn default_mtry(m: usize) -> usize {
    m.max(1).ilog2() as usize + 1
}

impl RandomForestParams {
    fn effective_mtry(&self, m: usize) -> Result<usize, ClassifierError> {
        let mtry = self.mtry.unwrap_or_else(|| default_mtry(m).min(m));
        if mtry < 1 || mtry > m {
            return Err(ClassifierError::InvalidParam(format!(
                "mtry must be in 1..={m}, got {mtry}"
            )));
        }
        Ok(mtry)
    }
}

impl Trainer for RandomForestParams {
    fn kind(&self) -> ClassifierKind {
        ClassifierKind::RandomForest
    }

    /// Each tree gets its own ChaCha stream of the master seed, so the result
    /// does not depend on how rayon schedules the trees.
    fn train(&self, data: &Dataset) -> Result<TrainedModel, ClassifierError> {
        data.check_trainable()?;
        if self.n_trees == 0 {
            return Err(ClassifierError::InvalidParam(
                "n_trees must be at least 1".into(),
            ));
        }
        if self.min_leaf == 0 {
            return Err(ClassifierError::InvalidParam(
                "min_leaf must be at least 1".into(),
            ));
        }
        let mtry = self.effective_mtry(data.n_features())?;
        let grow = GrowParams {
            min_leaf: self.min_leaf,
            min_split: 2 * self.min_leaf,
            max_depth: self.max_depth,
        };
        let n = data.len();
        let trees = (0..self.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(t as u64);
                let rows: Vec<usize> = if self.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                tree::grow(
                    data,
                    rows,
                    &grow,
                    &mut FeatureSampler::Random {
                        mtry,
                        rng: &mut rng,
                    },
                    None,
                )
            })
            .collect();
        Ok(TrainedModel::new(
            ClassifierConfig::RandomForest(self.clone()),
            trees,
            data.feature_names().to_vec(),
            self.seed,
        ))
    }
}
