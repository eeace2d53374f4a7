use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robex::criteria::Criterion;
use robex::harness::{
    cmd_evaluate, cmd_explain, cmd_gen_data, cmd_train, exit_code, BaselineSpec, DataKind, Method, RunConfig,
};
use robex::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "robex",
    version,
    about = "Evaluate and extract explanations by subset-restricted robustness"
)]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file (gen-data, train, explain) or directory (evaluate).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(flatten)]
    knobs: Knobs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Knobs {
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    step_size: Option<f64>,
    #[arg(long, global = true)]
    binsearch_iters: Option<usize>,
    #[arg(long, global = true)]
    eps_cap: Option<f64>,
    /// Box for perturbed inputs, e.g. `--clip 0,1`.
    #[arg(long, global = true, value_parser = parse_clip)]
    clip: Option<(f64, f64)>,
    /// Scalar or path of a file with one value per feature.
    #[arg(long, global = true)]
    baseline: Option<String>,
    #[arg(long, global = true)]
    ig_steps: Option<usize>,
    /// Greedy-AS subset samples per step.
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    step_fraction: Option<f64>,
    #[arg(long, global = true)]
    target_fraction: Option<f64>,
    #[arg(long, global = true)]
    inclusion_prob: Option<f64>,
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic or bundled dataset as CSV.
    GenData {
        /// blobs or digits8x8
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
    },
    /// Train a classifier and print its accuracy.
    Train,
    /// Compute evaluation curves and AUCs for explanation methods.
    Evaluate {
        /// Comma-separated method names.
        #[arg(long, value_delimiter = ',')]
        method: Vec<String>,
        /// Comma-separated criterion names.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<String>,
        #[arg(long)]
        num_examples: Option<usize>,
    },
    /// Print or write the attribution of one dataset row.
    Explain {
        #[arg(long)]
        method: String,
        /// Row index in the dataset file.
        #[arg(long)]
        example: usize,
        /// Explain the prediction against this class.
        #[arg(long)]
        target: Option<usize>,
    },
}

fn parse_clip(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut c = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let k = &cli.knobs;
    if let Some(v) = cli.seed {
        c.seed = v;
    }
    if let Some(v) = &k.dataset {
        c.dataset_path = Some(v.clone());
    }
    if let Some(v) = &k.model {
        c.model_path = Some(v.clone());
    }
    if let Some(v) = k.steps {
        c.attack.num_steps = v;
    }
    if let Some(v) = k.step_size {
        c.attack.step_size = v;
    }
    if let Some(v) = k.binsearch_iters {
        c.attack.binsearch_iters = v;
    }
    if let Some(v) = k.eps_cap {
        c.attack.eps_cap = Some(v);
    }
    if let Some(b) = k.clip {
        c.attack.clip_box = Some(b);
    }
    if let Some(v) = &k.baseline {
        c.explainer.baseline = BaselineSpec::parse(v);
    }
    if let Some(v) = k.ig_steps {
        c.explainer.ig_steps = v;
    }
    if let Some(v) = k.samples {
        c.explainer.num_subset_samples = v;
        c.explainer.eg_samples = v;
    }
    if let Some(v) = k.step_fraction {
        c.explainer.step_fraction = v;
    }
    if let Some(v) = k.target_fraction {
        c.explainer.target_fraction = v;
    }
    if let Some(v) = k.inclusion_prob {
        c.explainer.subset_inclusion_prob = v;
    }
    match &cli.command {
        Command::Train => {
            if let Some(out) = &cli.out {
                c.model_path = Some(out.clone());
            }
        }
        Command::Evaluate {
            method,
            criteria,
            num_examples,
        } => {
            if let Some(out) = &cli.out {
                c.output_dir = out.clone();
            }
            if !method.is_empty() {
                c.methods = method.iter().map(|m| Method::parse(m)).collect::<Result<_>>()?;
            }
            if !criteria.is_empty() {
                c.criteria = criteria
                    .iter()
                    .map(|s| Criterion::parse(s).ok_or_else(|| Error::Config(format!("unknown criterion {s:?}"))))
                    .collect::<Result<_>>()?;
            }
            if let Some(n) = num_examples {
                c.num_examples = *n;
            }
        }
        _ => {}
    }
    Ok(c)
}

fn run(cli: &Cli) -> Result<()> {
    let config = resolve_config(cli)?;
    match &cli.command {
        Command::GenData { kind, n } => {
            let out = cli
                .out
                .as_ref()
                .ok_or_else(|| Error::Config("gen-data needs --out".into()))?;
            cmd_gen_data(DataKind::parse(kind)?, *n, config.seed, out)
        }
        Command::Train => {
            println!("{}", cmd_train(&config)?);
            Ok(())
        }
        Command::Evaluate { .. } => {
            let out = cmd_evaluate(&config)?;
            for (method, curve) in &out.curves {
                println!("{:<10} {:<16} auc={}", method.name(), curve.criterion.name(), curve.auc);
            }
            println!("wrote {}", out.dir.display());
            Ok(())
        }
        Command::Explain {
            method,
            example,
            target,
        } => {
            let csv = cmd_explain(&config, Method::parse(method)?, *example, *target)?;
            match &cli.out {
                Some(path) => fs::write(path, csv).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                }),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(4);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
