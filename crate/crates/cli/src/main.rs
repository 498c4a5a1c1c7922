use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use advice_learn_cli::config::Family;
use advice_learn_cli::output::{content_hash, write_files, Format};
use advice_learn_cli::sweep::run_sweep;
use advice_learn_cli::{CliError, SweepSpec};
use advice_learn_core::instances::{balanced_instance, balanced_subset_size, gv_code, unbalanced_instance};
use advice_learn_core::metrics::l1_distance;
use advice_learn_core::tester::calibrate_tester;
use advice_learn_core::verify::Suite;
use advice_learn_core::Seed;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "advice-learn", version, about = "Learn product distributions with mean-vector advice")]
struct Cli {
    /// Worker threads for trial-level parallelism.
    #[arg(long, global = true, env = "ADVICE_LEARN_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Jsonl => Format::Jsonl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Unbalanced,
    Balanced,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep from a TOML config and write one row per trial.
    Learn {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's trials per grid cell.
        #[arg(long)]
        trials: Option<usize>,
        /// Output path without extension.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Write only this format (default: both).
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Sweep the tester constant c and report single-shot accept rates.
    CalibrateTester {
        #[arg(long, default_value_t = 256)]
        d: usize,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        #[arg(long, default_value_t = 400)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Run named acceptance suites (or `all`).
    Verify {
        #[arg(required = true)]
        suites: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Emit lower-bound instances built on a random subset code.
    GenInstances {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        epsilon: f64,
        /// Required for the balanced family.
        #[arg(long)]
        lambda: Option<f64>,
        /// Subset size for the unbalanced family (default d/2).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 8)]
        count: usize,
        /// Minimum pairwise symmetric difference (default k/4).
        #[arg(long)]
        min_symdiff: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Include the full p and q vectors.
        #[arg(long)]
        with_vectors: bool,
        /// Output file (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn learn(
    config: PathBuf,
    seed: Option<u64>,
    trials: Option<usize>,
    out: PathBuf,
    format: Option<FormatArg>,
) -> Result<(), CliError> {
    let mut sweep = SweepSpec::load(&config)?;
    if let Some(s) = seed {
        sweep.seed = s;
    }
    if let Some(t) = trials {
        sweep.trials = t;
    }
    sweep.validate()?;
    let rows = run_sweep(&sweep)?;
    let formats = match format {
        Some(f) => vec![f.into()],
        None => vec![Format::Csv, Format::Jsonl],
    };
    let files = write_files(&rows, &out, &formats)?;
    let summary = json!({
        "rows": rows.len(),
        "hash": content_hash(&rows)?,
        "files": files,
    });
    println!("{summary}");
    Ok(())
}

fn calibrate(d: usize, epsilon: f64, trials: usize, seed: u64, format: FormatArg) -> Result<(), CliError> {
    let cal = calibrate_tester(d, epsilon, trials, Seed(seed))?;
    let mut out = std::io::stdout().lock();
    match format {
        FormatArg::Jsonl => {
            serde_json::to_writer(&mut out, &cal).map_err(|e| CliError::Format(e.to_string()))?;
            writeln!(out)?;
        }
        FormatArg::Csv => {
            writeln!(out, "c,accept_at_0,accept_at_eps,accept_at_2eps,accept_at_3eps,worst_error")?;
            for row in &cal.rows {
                let r = row.accept_rates;
                writeln!(out, "{},{},{},{},{},{}", row.c, r[0], r[1], r[2], r[3], row.worst_error())?;
            }
            match cal.recommended {
                Some(c) => writeln!(out, "# recommended c = {c}")?,
                None => writeln!(out, "# recommended c = none (no grid value keeps both errors <= 1/4)")?,
            }
        }
    }
    Ok(())
}

/// Exit 0 when every check passes, 2 otherwise.
fn verify(names: Vec<String>, seed: u64) -> Result<bool, CliError> {
    let suites: Vec<Suite> = if names.iter().any(|n| n == "all") {
        Suite::ALL.to_vec()
    } else {
        names
            .iter()
            .map(|n| n.parse::<Suite>().map_err(CliError::Config))
            .collect::<Result<_, _>>()?
    };
    let mut all_passed = true;
    for suite in suites {
        let report = suite.run(Seed(seed))?;
        for check in &report.checks {
            eprintln!("{check}");
        }
        all_passed &= report.passed;
        println!("{}", serde_json::to_string(&report).map_err(|e| CliError::Format(e.to_string()))?);
    }
    Ok(all_passed)
}

#[allow(clippy::too_many_arguments)]
fn gen_instances(
    family: FamilyArg,
    d: usize,
    epsilon: f64,
    lambda: Option<f64>,
    k: Option<usize>,
    count: usize,
    min_symdiff: Option<usize>,
    seed: u64,
    with_vectors: bool,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let family = match family {
        FamilyArg::Unbalanced => Family::Unbalanced,
        FamilyArg::Balanced => Family::Balanced,
    };
    let size = match family {
        Family::Unbalanced => k.unwrap_or(d / 2),
        Family::Balanced => {
            let lambda = lambda.ok_or_else(|| CliError::Config("--lambda: required for the balanced family".into()))?;
            balanced_subset_size(epsilon, lambda) as usize
        }
    };
    let code = gv_code(d, size, min_symdiff.unwrap_or(size / 4), count, Seed(seed), 10_000)?;
    let mut sink: Box<dyn Write> = match &out {
        Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    for (index, s) in code.sets.iter().enumerate() {
        let (p, q) = match family {
            Family::Unbalanced => unbalanced_instance(d, epsilon, s)?,
            Family::Balanced => {
                let (p, q, _) = balanced_instance(d, epsilon, lambda.unwrap_or_default(), s)?;
                (p, q)
            }
        };
        let mut line = json!({
            "family": family,
            "index": index,
            "d": d,
            "epsilon": epsilon,
            "lambda": lambda,
            "k": size,
            "min_symdiff": code.min_symdiff,
            "subset": s,
            "l1": l1_distance(&p, &q)?,
        });
        if with_vectors {
            line["p"] = json!(p.as_slice());
            line["q"] = json!(q.as_slice());
        }
        writeln!(sink, "{line}")?;
    }
    sink.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --workers: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Learn { config, seed, trials, out, format } => learn(config, seed, trials, out, format).map(|_| true),
        Command::CalibrateTester { d, epsilon, trials, seed, format } => {
            calibrate(d, epsilon, trials, seed, format).map(|_| true)
        }
        Command::Verify { suites, seed } => verify(suites, seed),
        Command::GenInstances {
            family,
            d,
            epsilon,
            lambda,
            k,
            count,
            min_symdiff,
            seed,
            with_vectors,
            out,
        } => gen_instances(family, d, epsilon, lambda, k, count, min_symdiff, seed, with_vectors, out).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
