//! Orchestration behind the `robex` command line tool.
//!
//! Every command takes a resolved [`RunConfig`]. `evaluate` writes into
//! `<output_dir>/<hash>/`, where the hash covers the config (minus the output
//! directory) and the bytes of the dataset and model files, so re-running an
//! identical experiment rewrites identical files in the same place.

mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use config::{BaselineSpec, ExplainerConfig, Method, RunConfig, TrainSection};

use crate::attack::{AttackConfig, AttackGoal};
use crate::criteria::{insertion_deletion_curve, robustness_curve, CriteriaConfig, Criterion, EvalCurve};
use crate::data::{self, holdout_split, load_dataset, save_dataset, Example};
use crate::explain::{
    eg_attr, grad_attr, greedy_as_select, greedy_select, ig_attr, loo_attr, random_attr, Attribution, GreedyConfig,
    Objective,
};
use crate::model::{accuracy, train_sgd, Model};
use crate::{Error, Result};

/// Process exit code for an error: 2 config, 3 data/model IO, 4 numeric.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Io { .. } | Error::Parse { .. } | Error::Dimension { .. } => 3,
        Error::Numeric(_) => 4,
    }
}

/// Independent 64-bit seed for item `index` under `seed`.
pub fn derive_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Blobs,
    Digits8x8,
}

impl DataKind {
    pub fn parse(s: &str) -> Result<DataKind> {
        match s {
            "blobs" => Ok(DataKind::Blobs),
            "digits8x8" => Ok(DataKind::Digits8x8),
            _ => Err(Error::Config(format!(
                "unknown dataset kind {s:?} (expected blobs or digits8x8)"
            ))),
        }
    }
}

pub fn cmd_gen_data(kind: DataKind, n: usize, seed: u64, out: &Path) -> Result<()> {
    if n < 10 {
        return Err(Error::Config(format!("gen-data needs n >= 10, got {n}")));
    }
    let examples = match kind {
        DataKind::Blobs => data::blobs(n, seed),
        DataKind::Digits8x8 => {
            if n > 1797 {
                return Err(Error::Config(format!("digits8x8 has 1797 examples, asked for {n}")));
            }
            data::digits8x8(n, seed)
        }
    };
    create_parent(out)?;
    save_dataset(&examples, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub final_loss: f64,
}

impl std::fmt::Display for TrainSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "train_accuracy={:.4} test_accuracy={:.4} n_train={} n_test={} final_loss={:.6}",
            self.train_accuracy, self.test_accuracy, self.n_train, self.n_test, self.final_loss
        )
    }
}

/// Trains on the head of the dataset and scores the held-out tail.
pub fn train_model(examples: &[Example], config: &RunConfig) -> Result<(Model, TrainSummary)> {
    let (train, test) = holdout_split(examples, config.test_fraction);
    if train.is_empty() || test.is_empty() {
        return Err(Error::Config("dataset too small for the train/test split".into()));
    }
    let d = examples[0].x.len();
    let classes = examples.iter().map(|e| e.label).max().unwrap_or(0) + 1;
    let mut arch = vec![d];
    arch.extend(&config.train.hidden);
    arch.push(classes.max(2));
    let (model, report) = train_sgd(train, &arch, &config.train.train_config(config.seed))?;
    let summary = TrainSummary {
        train_accuracy: report.train_accuracy,
        test_accuracy: accuracy(&model, test)?,
        n_train: train.len(),
        n_test: test.len(),
        final_loss: report.final_loss,
    };
    Ok((model, summary))
}

pub fn cmd_train(config: &RunConfig) -> Result<TrainSummary> {
    config.validate()?;
    let examples = load_dataset(config.dataset()?)?;
    let (model, summary) = train_model(&examples, config)?;
    let out = config.model()?;
    create_parent(out)?;
    model.save(out)?;
    Ok(summary)
}

/// Objective used by the set explainers when evaluated under `criterion`.
pub fn objective_for(criterion: Criterion) -> Objective {
    match criterion {
        Criterion::RobustnessS => Objective::MinRobustnessS,
        _ => Objective::MaxRobustnessSbar,
    }
}

/// Everything needed to explain one example.
pub struct Explainer<'a> {
    pub model: &'a Model,
    pub config: &'a RunConfig,
    pub baseline: Vec<f64>,
    pub background: Vec<Vec<f64>>,
}

impl<'a> Explainer<'a> {
    /// `background` supplies the expected-gradients baselines.
    pub fn new(model: &'a Model, config: &'a RunConfig, background: &[Example]) -> Result<Self> {
        let d = model.input_dim();
        let background = background
            .iter()
            .take(config.explainer.eg_background)
            .map(|e| e.x.clone())
            .collect::<Vec<_>>();
        Ok(Self {
            model,
            config,
            baseline: config.explainer.baseline.resolve(d)?,
            background,
        })
    }

    fn greedy_config(&self, objective: Objective, goal: AttackGoal, seed: u64) -> GreedyConfig {
        let e = &self.config.explainer;
        GreedyConfig {
            target_fraction: e.target_fraction,
            step_fraction: e.step_fraction,
            num_subset_samples: e.num_subset_samples,
            subset_inclusion_prob: e.subset_inclusion_prob,
            sampling: e.sampling,
            ridge: e.ridge,
            seed,
            ..GreedyConfig::new(objective, goal)
        }
    }

    /// Attribution of `method` for the example at `index`. Set explainers use
    /// `goal` (default: untargeted away from the prediction) and `objective`.
    pub fn explain(
        &self,
        method: Method,
        x: &[f64],
        index: usize,
        objective: Objective,
        goal: Option<AttackGoal>,
    ) -> Result<Attribution> {
        let seed = derive_seed(self.config.seed, index);
        let e = &self.config.explainer;
        let attack: &AttackConfig = &self.config.attack;
        match method {
            Method::Grad => grad_attr(self.model, x),
            Method::Ig => ig_attr(self.model, x, &self.baseline, e.ig_steps),
            Method::Eg => eg_attr(self.model, x, &self.background, e.eg_samples, seed),
            Method::Loo => loo_attr(self.model, x, &self.baseline),
            Method::Random => random_attr(x.len(), seed),
            Method::Greedy | Method::GreedyAs => {
                let goal = match goal {
                    Some(g) => g,
                    None => AttackGoal::Untargeted {
                        original: self.model.predict(x)?,
                    },
                };
                let cfg = self.greedy_config(objective, goal, seed);
                let sel = if method == Method::Greedy {
                    greedy_select(self.model, x, &cfg, attack)?
                } else {
                    greedy_as_select(self.model, x, &cfg, attack)?
                };
                Ok(sel.attribution)
            }
        }
    }

    /// Attributions for `examples`, whose positions in the evaluated list are
    /// their indices.
    pub fn explain_all(&self, method: Method, examples: &[Example], objective: Objective) -> Result<Vec<Attribution>> {
        examples
            .par_iter()
            .enumerate()
            .map(|(i, ex)| self.explain(method, &ex.x, i, objective, None))
            .collect()
    }
}

/// Curves of every configured method × criterion, in config order.
pub fn evaluate_curves(
    model: &Model,
    examples: &[Example],
    background: &[Example],
    config: &RunConfig,
    mut on_stage: impl FnMut(&str, f64),
) -> Result<Vec<(Method, EvalCurve)>> {
    let explainer = Explainer::new(model, config, background)?;
    let criteria_cfg = CriteriaConfig {
        fractions: config.fractions.clone(),
        target: None,
        attack: config.attack,
    };
    let mut cache: BTreeMap<(Method, Option<Objective>), Vec<Attribution>> = BTreeMap::new();
    let mut out = Vec::new();
    for &method in &config.methods {
        for &criterion in &config.criteria {
            let objective = objective_for(criterion);
            let key = (method, method.is_set_explainer().then_some(objective));
            if let std::collections::btree_map::Entry::Vacant(slot) = cache.entry(key) {
                let t = Instant::now();
                let attrs = explainer.explain_all(method, examples, objective)?;
                let label = match key.1 {
                    Some(o) => format!("explain/{}/{}", method.name(), o.name()),
                    None => format!("explain/{}", method.name()),
                };
                on_stage(&label, t.elapsed().as_secs_f64());
                slot.insert(attrs);
            }
            let attrs = &cache[&key];
            let t = Instant::now();
            let curve = match criterion {
                Criterion::RobustnessSbar | Criterion::RobustnessS => {
                    robustness_curve(model, examples, attrs, criterion, &criteria_cfg)?
                }
                Criterion::Insertion | Criterion::Deletion => {
                    insertion_deletion_curve(model, examples, attrs, criterion, &config.reference, &config.fractions)?
                }
            };
            on_stage(
                &format!("criterion/{}/{}", method.name(), criterion.name()),
                t.elapsed().as_secs_f64(),
            );
            out.push((method, curve));
        }
    }
    Ok(out)
}

pub fn curves_csv(curves: &[(Method, EvalCurve)]) -> String {
    let mut s = String::from("method,criterion,fraction,mean_value,n_examples,n_capped\n");
    for (method, c) in curves {
        for (&(f, v), capped) in c.points.iter().zip(&c.n_capped) {
            writeln!(
                s,
                "{},{},{f},{v},{},{capped}",
                method.name(),
                c.criterion.name(),
                c.n_examples
            )
            .unwrap();
        }
    }
    s
}

pub fn report_json(curves: &[(Method, EvalCurve)], config_echo: &Value) -> Value {
    let mut methods = serde_json::Map::new();
    for (method, c) in curves {
        let entry = methods
            .entry(method.name())
            .or_insert_with(|| Value::Object(Default::default()));
        entry[format!("{}_auc", c.criterion.name())] = json!(c.auc);
    }
    json!({ "methods": methods, "config": config_echo })
}

#[derive(Debug, Clone, Serialize)]
struct Stage {
    name: String,
    seconds: f64,
}

#[derive(Debug, Clone)]
pub struct EvaluateOutput {
    pub dir: PathBuf,
    pub curves: Vec<(Method, EvalCurve)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Config echo plus input file digests; this is what the run directory hashes.
fn config_identity(config: &RunConfig, dataset_bytes: &[u8], model_bytes: &[u8]) -> Value {
    let mut echo = serde_json::to_value(config).expect("config serializes");
    echo.as_object_mut().expect("config is an object").remove("output_dir");
    json!({
        "config": echo,
        "dataset_sha256": sha256_hex(dataset_bytes),
        "model_sha256": sha256_hex(model_bytes),
    })
}

pub fn cmd_evaluate(config: &RunConfig) -> Result<EvaluateOutput> {
    config.validate()?;
    let started = Instant::now();
    let mut stages = Vec::new();

    let t = Instant::now();
    let dataset_path = config.dataset()?;
    let model_path = config.model()?;
    let dataset_bytes = fs::read(dataset_path).map_err(|e| Error::io(dataset_path, e))?;
    let model_bytes = fs::read(model_path).map_err(|e| Error::io(model_path, e))?;
    let examples = data::parse_dataset(&String::from_utf8_lossy(&dataset_bytes), dataset_path)?;
    let model = Model::from_json(&String::from_utf8_lossy(&model_bytes), model_path)?;
    if examples.is_empty() {
        return Err(Error::Parse {
            path: dataset_path.to_path_buf(),
            line: 0,
            msg: "dataset has no rows".into(),
        });
    }
    if examples[0].x.len() != model.input_dim() {
        return Err(Error::dim(
            "dataset features vs model input",
            model.input_dim(),
            examples[0].x.len(),
        ));
    }
    let (train, test) = holdout_split(&examples, config.test_fraction);
    let mut misclassified = 0;
    let mut selected = Vec::new();
    for ex in test {
        if selected.len() == config.num_examples {
            break;
        }
        if model.predict(&ex.x)? == ex.label {
            selected.push(ex.clone());
        } else {
            misclassified += 1;
        }
    }
    if selected.is_empty() {
        return Err(Error::Config("no correctly classified test example to evaluate".into()));
    }
    stages.push(Stage {
        name: "load".into(),
        seconds: t.elapsed().as_secs_f64(),
    });

    let curves = evaluate_curves(&model, &selected, train, config, |name, seconds| {
        stages.push(Stage {
            name: name.to_string(),
            seconds,
        })
    })?;

    let identity = config_identity(config, &dataset_bytes, &model_bytes);
    let hash = sha256_hex(serde_json::to_string(&identity).expect("json").as_bytes());
    let dir = config.output_dir.join(&hash[..16]);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    write_atomic(&dir.join("curves.csv"), curves_csv(&curves).as_bytes())?;
    let report = report_json(&curves, &identity["config"]);
    write_atomic(&dir.join("report.json"), pretty(&report).as_bytes())?;

    let diagnostics: Vec<Value> = curves
        .iter()
        .map(|(m, c)| {
            json!({
                "method": m.name(),
                "criterion": c.criterion.name(),
                "n_examples": c.n_examples,
                "n_skipped": c.n_skipped,
                "n_capped": c.n_capped.iter().sum::<usize>(),
            })
        })
        .collect();
    let manifest = json!({
        "tool": "robex",
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": hash,
        "config": identity,
        "stages": stages,
        "total_seconds": started.elapsed().as_secs_f64(),
        "diagnostics": {
            "test_examples_scanned": selected.len() + misclassified,
            "misclassified_skipped": misclassified,
            "evaluated_examples": selected.len(),
            "curves": diagnostics,
        },
    });
    write_atomic(&dir.join("manifest.json"), pretty(&manifest).as_bytes())?;
    Ok(EvaluateOutput { dir, curves })
}

/// Attribution CSV for dataset row `example_index`. With `target`, set
/// explainers explain "why the prediction rather than `target`".
pub fn cmd_explain(config: &RunConfig, method: Method, example_index: usize, target: Option<usize>) -> Result<String> {
    config.validate()?;
    let examples = load_dataset(config.dataset()?)?;
    let model = Model::load(config.model()?)?;
    let ex = examples.get(example_index).ok_or_else(|| {
        Error::invalid(format!(
            "example index {example_index} out of range (dataset has {} rows)",
            examples.len()
        ))
    })?;
    let goal = match target {
        None => None,
        Some(t) => {
            if !method.is_set_explainer() {
                return Err(Error::Config(format!(
                    "targeted mode needs greedy or greedy-as, not {}",
                    method.name()
                )));
            }
            if t >= model.num_classes() {
                return Err(Error::invalid(format!("target class {t} out of range")));
            }
            let pred = model.predict(&ex.x)?;
            if t == pred {
                return Err(Error::invalid(format!("target class {t} equals the predicted class")));
            }
            Some(AttackGoal::Targeted { target: t })
        }
    };
    let (train, _) = holdout_split(&examples, config.test_fraction);
    let explainer = Explainer::new(&model, config, train)?;
    let attr = explainer.explain(method, &ex.x, example_index, Objective::MaxRobustnessSbar, goal)?;
    Ok(attribution_csv(example_index, &attr))
}

pub fn attribution_csv(example_id: usize, attr: &Attribution) -> String {
    let mut rank = vec![0; attr.len()];
    for (pos, &i) in attr.ranking().iter().enumerate() {
        rank[i] = pos + 1;
    }
    let mut s = String::from("example_id,feature_index,score,rank\n");
    for (i, score) in attr.scores().iter().enumerate() {
        writeln!(s, "{example_id},{i},{score},{}", rank[i]).unwrap();
    }
    s
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
