//! Run configuration: one JSON document, every field optional.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::AttackConfig;
use crate::criteria::{default_fractions, Criterion, ReferenceSpec};
use crate::explain::{SubsetSampling, DEFAULT_RIDGE};
use crate::model::TrainConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "grad")]
    Grad,
    #[serde(rename = "ig")]
    Ig,
    #[serde(rename = "eg")]
    Eg,
    #[serde(rename = "loo")]
    Loo,
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "greedy")]
    Greedy,
    #[serde(rename = "greedy-as")]
    GreedyAs,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Grad,
        Method::Ig,
        Method::Eg,
        Method::Loo,
        Method::Random,
        Method::Greedy,
        Method::GreedyAs,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Grad => "grad",
            Method::Ig => "ig",
            Method::Eg => "eg",
            Method::Loo => "loo",
            Method::Random => "random",
            Method::Greedy => "greedy",
            Method::GreedyAs => "greedy-as",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let known: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
            Error::Config(format!("unknown method {s:?} (expected one of {})", known.join(", ")))
        })
    }

    pub fn is_set_explainer(&self) -> bool {
        matches!(self, Method::Greedy | Method::GreedyAs)
    }
}

/// IG/LOO baseline: a scalar for every feature or a file with one value per
/// feature (comma or whitespace separated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaselineSpec {
    Scalar(f64),
    File(PathBuf),
}

impl BaselineSpec {
    pub fn parse(s: &str) -> BaselineSpec {
        match s.parse::<f64>() {
            Ok(v) => BaselineSpec::Scalar(v),
            Err(_) => BaselineSpec::File(PathBuf::from(s)),
        }
    }

    pub fn resolve(&self, d: usize) -> Result<Vec<f64>> {
        match self {
            BaselineSpec::Scalar(v) => Ok(vec![*v; d]),
            BaselineSpec::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let values = text
                    .lines()
                    .filter(|l| !l.trim_start().starts_with('#'))
                    .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| Error::Parse {
                                path: path.clone(),
                                line: 0,
                                msg: format!("baseline value {t:?} is not a finite number"),
                            })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if values.len() != d {
                    return Err(Error::dim(
                        format!("baseline values in {}", path.display()),
                        d,
                        values.len(),
                    ));
                }
                Ok(values)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainerConfig {
    pub baseline: BaselineSpec,
    pub ig_steps: usize,
    pub eg_samples: usize,
    /// Number of training examples used as the expected-gradients background.
    pub eg_background: usize,
    pub target_fraction: f64,
    pub step_fraction: f64,
    pub num_subset_samples: usize,
    pub subset_inclusion_prob: f64,
    pub sampling: SubsetSampling,
    pub ridge: f64,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        Self {
            baseline: BaselineSpec::Scalar(0.0),
            ig_steps: 50,
            eg_samples: 100,
            eg_background: 32,
            target_fraction: 0.45,
            step_fraction: 0.05,
            num_subset_samples: 5000,
            subset_inclusion_prob: 0.5,
            sampling: SubsetSampling::Bernoulli,
            ridge: DEFAULT_RIDGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Hidden layer widths; input and output widths come from the data.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2_penalty: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden: vec![32],
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            l2_penalty: t.l2_penalty,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            l2_penalty: self.l2_penalty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_path: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub criteria: Vec<Criterion>,
    pub fractions: Vec<f64>,
    pub seed: u64,
    /// Cap on the number of correctly classified test examples evaluated.
    pub num_examples: usize,
    /// Tail share of the dataset held out for testing and evaluation.
    pub test_fraction: f64,
    pub attack: AttackConfig,
    pub explainer: ExplainerConfig,
    pub reference: ReferenceSpec,
    pub train: TrainSection,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_path: None,
            model_path: None,
            methods: Method::ALL.to_vec(),
            criteria: Criterion::ALL.to_vec(),
            fractions: default_fractions(),
            seed: 0,
            num_examples: 20,
            test_fraction: 0.25,
            attack: AttackConfig::default(),
            explainer: ExplainerConfig::default(),
            reference: ReferenceSpec::UniformRandom {
                lo: 0.0,
                hi: 1.0,
                seed: 0,
            },
            train: TrainSection::default(),
            output_dir: PathBuf::from("runs"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", origin.display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_examples == 0 {
            return Err(Error::Config("num_examples must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must be in (0, 1)".into()));
        }
        if self.methods.is_empty() || self.criteria.is_empty() {
            return Err(Error::Config("methods and criteria must not be empty".into()));
        }
        if self.fractions.len() < 2 {
            return Err(Error::Config("at least two fractions are needed for an AUC".into()));
        }
        if self.explainer.ig_steps == 0 || self.explainer.eg_samples == 0 || self.explainer.eg_background == 0 {
            return Err(Error::Config(
                "ig_steps, eg_samples and eg_background must be positive".into(),
            ));
        }
        if self.train.hidden.contains(&0) {
            return Err(Error::Config("train.hidden widths must be positive".into()));
        }
        self.attack.validate()
    }

    pub(crate) fn dataset(&self) -> Result<&Path> {
        self.dataset_path
            .as_deref()
            .ok_or_else(|| Error::Config("dataset_path is required".into()))
    }

    pub(crate) fn model(&self) -> Result<&Path> {
        self.model_path
            .as_deref()
            .ok_or_else(|| Error::Config("model_path is required".into()))
    }
}
