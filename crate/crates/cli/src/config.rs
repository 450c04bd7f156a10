//! Config file loading and the effective run configuration.
//!
//! Every setting resolves as command-line flag, then config file, then
//! built-in default. The resolved [`RunConfig`] is written into each output.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use droidops::classifiers::{
    ClassifierConfig, ClassifierKind, DecisionTreeParams, NbtParams, RandomForestParams,
};
use droidops::evaluation::Grid;
use droidops::NormalizationMode;
use serde::{Deserialize, Serialize};

pub const DEFAULT_N_FEATURES: usize = 20;
pub const DEFAULT_K: usize = 10;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

/// Contents of a `--config` TOML file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub mode: Option<NormalizationMode>,
    pub paper_faithful: Option<bool>,
    pub jobs: Option<usize>,
    pub n_features: Option<usize>,
    pub classifier: Option<String>,
    pub classifiers: Option<Vec<String>>,
    pub k: Option<usize>,
    pub test_fraction: Option<f64>,
    pub timing: Option<bool>,
    pub grid: Option<Grid>,
    pub dt: Option<DecisionTreeParams>,
    pub rf: Option<RandomForestParams>,
    pub nbt: Option<NbtParams>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Hyperparameter overrides given on the command line.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct HyperArgs {
    /// Minimum instances per leaf
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Maximum tree depth (unlimited by default)
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Number of trees (random forest)
    #[arg(long)]
    pub trees: Option<usize>,
    /// Features tried per node (random forest)
    #[arg(long)]
    pub mtry: Option<usize>,
    /// Train every tree on the full data (random forest)
    #[arg(long)]
    pub no_bootstrap: bool,
    /// Nodes smaller than this become naive-Bayes leaves (naive-Bayes tree)
    #[arg(long)]
    pub min_leaf_for_nb: Option<usize>,
}

/// Global settings after merging flags and the config file.
#[derive(Debug)]
pub struct Settings {
    pub file: ConfigFile,
    pub seed: u64,
    pub mode: NormalizationMode,
    pub paper_faithful: bool,
}

impl Settings {
    pub fn resolve(
        config: Option<&PathBuf>,
        seed: Option<u64>,
        mode: Option<NormalizationMode>,
        paper_faithful: bool,
    ) -> Result<Self> {
        let file = match config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        Ok(Self {
            seed: seed.or(file.seed).unwrap_or(0),
            mode: mode.or(file.mode).unwrap_or_default(),
            paper_faithful: paper_faithful || file.paper_faithful.unwrap_or(false),
            file,
        })
    }

    pub fn n_features(&self, flag: Option<usize>) -> usize {
        flag.or(self.file.n_features).unwrap_or(DEFAULT_N_FEATURES)
    }

    pub fn kind(&self, flag: Option<&str>) -> Result<ClassifierKind> {
        let name = flag.or(self.file.classifier.as_deref()).unwrap_or("dt");
        Ok(name.parse()?)
    }

    pub fn kinds(&self, flag: Option<&str>) -> Result<Vec<ClassifierKind>> {
        let names: Vec<String> = match (flag, &self.file.classifiers) {
            (Some(list), _) => list.split(',').map(|s| s.trim().to_string()).collect(),
            (None, Some(list)) => list.clone(),
            (None, None) => ClassifierKind::ALL.iter().map(|k| k.to_string()).collect(),
        };
        let mut kinds = Vec::new();
        for name in names.iter().filter(|n| !n.is_empty()) {
            let kind: ClassifierKind = name.parse()?;
            if kinds.contains(&kind) {
                bail!("classifier {kind} listed twice");
            }
            kinds.push(kind);
        }
        if kinds.is_empty() {
            bail!("no classifiers given");
        }
        Ok(kinds)
    }

    /// Hyperparameters for `kind`: config-file section, then flag overrides.
    /// The random forest always takes the run seed.
    pub fn classifier(&self, kind: ClassifierKind, hyper: &HyperArgs) -> ClassifierConfig {
        match kind {
            ClassifierKind::DecisionTree => {
                let mut p = self.file.dt.clone().unwrap_or_default();
                p.min_leaf = hyper.min_leaf.unwrap_or(p.min_leaf);
                p.max_depth = hyper.max_depth.or(p.max_depth);
                ClassifierConfig::DecisionTree(p)
            }
            ClassifierKind::RandomForest => {
                let mut p = self.file.rf.clone().unwrap_or_default();
                p.min_leaf = hyper.min_leaf.unwrap_or(p.min_leaf);
                p.max_depth = hyper.max_depth.or(p.max_depth);
                p.n_trees = hyper.trees.unwrap_or(p.n_trees);
                p.mtry = hyper.mtry.or(p.mtry);
                p.bootstrap = p.bootstrap && !hyper.no_bootstrap;
                p.seed = self.seed;
                ClassifierConfig::RandomForest(p)
            }
            ClassifierKind::NaiveBayesTree => {
                let mut p = self.file.nbt.clone().unwrap_or_default();
                p.min_leaf = hyper.min_leaf.unwrap_or(p.min_leaf);
                p.max_depth = hyper.max_depth.or(p.max_depth);
                p.min_leaf_for_nb = hyper.min_leaf_for_nb.unwrap_or(p.min_leaf_for_nb);
                ClassifierConfig::NaiveBayesTree(p)
            }
        }
    }
}

/// The effective configuration of one run, as recorded in its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub mode: NormalizationMode,
    pub paper_faithful: bool,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_features: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stratified: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierConfig>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub classifiers: Vec<ClassifierConfig>,
}

impl RunConfig {
    pub fn new(command: &str, settings: &Settings) -> Self {
        Self {
            command: command.to_string(),
            seed: settings.seed,
            mode: settings.mode,
            paper_faithful: settings.paper_faithful,
            inputs: Vec::new(),
            outputs: Vec::new(),
            n_features: None,
            k: None,
            test_fraction: None,
            stratified: None,
            timing: None,
            grid: None,
            classifier: None,
            classifiers: Vec::new(),
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn to_toml(&self) -> String {
        let body = toml::to_string(self).expect("run config serializes");
        format!(
            "# droidops {} run configuration\n{body}",
            env!("CARGO_PKG_VERSION")
        )
    }

    /// The TOML rendering with every line turned into a `#` comment.
    pub fn as_comment(&self) -> String {
        self.to_toml()
            .lines()
            .map(|l| {
                if l.starts_with('#') {
                    format!("{l}\n")
                } else {
                    format!("# {l}\n")
                }
            })
            .collect()
    }
}
