//! Labelled examples, the CSV dataset format and the two bundled generators.
//!
//! Dataset files hold one example per row: an integer label followed by the
//! feature values. Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

const DIGITS_CSV: &str = include_str!("../data/digits8x8.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub label: usize,
}

pub fn parse_dataset(text: &str, origin: &Path) -> Result<Vec<Example>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut fields = record.iter();
        let label_field = fields.next().unwrap_or("");
        let label: usize = label_field
            .parse()
            .map_err(|_| parse_err(format!("label {label_field:?} is not a class index")))?;
        let x = fields
            .enumerate()
            .map(|(col, f)| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(format!("feature {col}: {f:?} is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if x.is_empty() {
            return Err(parse_err("row has no features".into()));
        }
        match width {
            None => width = Some(x.len()),
            Some(w) if w != x.len() => return Err(parse_err(format!("expected {w} features, found {}", x.len()))),
            _ => {}
        }
        out.push(Example { x, label });
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path)
}

pub fn dataset_to_csv(examples: &[Example]) -> String {
    let mut out = String::new();
    for ex in examples {
        write!(out, "{}", ex.label).unwrap();
        for v in &ex.x {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(examples: &[Example], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset_to_csv(examples)).map_err(|e| Error::io(path, e))
}

/// Two Gaussian clusters in `[0,1]^2`, centred at (0.25, 0.25) and
/// (0.75, 0.75), alternating labels.
pub fn blobs(n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f64, 0.08).expect("valid sigma");
    (0..n)
        .map(|i| {
            let label = i % 2;
            let centre = if label == 0 { 0.25 } else { 0.75 };
            let x = (0..2)
                .map(|_| (centre + noise.sample(&mut rng)).clamp(0.0, 1.0))
                .collect();
            Example { x, label }
        })
        .collect()
}

/// All 1797 bundled 8x8 digits, intensities scaled from 0..16 to `[0,1]`.
pub fn digits8x8_all() -> Vec<Example> {
    parse_dataset(DIGITS_CSV, Path::new("digits8x8.csv"))
        .expect("bundled digits parse")
        .into_iter()
        .map(|mut ex| {
            ex.x.iter_mut().for_each(|v| *v /= 16.0);
            ex
        })
        .collect()
}

/// `n` digits drawn without replacement in a seeded order.
pub fn digits8x8(n: usize, seed: u64) -> Vec<Example> {
    let mut all = digits8x8_all();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    all.shuffle(&mut rng);
    all.truncate(n);
    all
}

/// Deterministic split: the last `round(test_fraction · n)` rows are held out.
pub fn holdout_split(examples: &[Example], test_fraction: f64) -> (&[Example], &[Example]) {
    let n_test = ((examples.len() as f64) * test_fraction.clamp(0.0, 1.0)).round() as usize;
    examples.split_at(examples.len() - n_test.min(examples.len()))
}
