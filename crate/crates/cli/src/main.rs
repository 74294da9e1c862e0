use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use langmap::bench::{compare, emit, repl, report_text, run_trial, Pipeline};
use langmap::dcg::{train, Head, TrainConfig};
use langmap::language::load_corpus;
use langmap::perception::Mode;
use langmap::simworld::{load_scenario, Scenario};
use langmap::{assets, data_dir};

#[derive(Parser)]
#[command(name = "langmap", version, about = "Language-guided exploration trials")]
struct Cli {
    /// Run-config overrides: inline JSON or a path to a JSON file.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Directory holding perception/annotation/behavior models. Without it
    /// the heads are trained on the shipped corpus at startup.
    #[arg(long, global = true)]
    models: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one grounding head and write its model file.
    Train {
        #[arg(long)]
        head: Head,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one trial and print its metrics as JSON.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "AP")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run both modes over a seed set and write metrics, report and plots.
    Compare {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
        seeds: Vec<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Interactive session on a scenario; scripted commands are not issued.
    Repl {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "AP")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Regenerate the templated training corpus.
    GenCorpus {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A path, or the name of a shipped scenario.
fn scenario(arg: &str) -> Result<Scenario> {
    let p = Path::new(arg);
    let path = if p.exists() {
        p.to_path_buf()
    } else {
        data_dir().join("scenarios").join(format!("{arg}.json"))
    };
    load_scenario(&path).context("loading scenario")
}

fn overrides(arg: Option<&str>) -> Result<serde_json::Value> {
    let Some(arg) = arg else {
        return Ok(serde_json::Value::Null);
    };
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading config {arg}"))?
    };
    serde_json::from_str(&text).context("parsing config overrides")
}

fn pipeline(models: Option<&Path>) -> Result<Pipeline> {
    Ok(match models {
        Some(dir) => Pipeline::with_models(dir)?,
        None => Pipeline::shipped()?,
    })
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let cfg = overrides(cli.config.as_deref())?;
    match cli.command {
        Command::Train { head, corpus, out } => {
            let vocab = assets::vocabulary()?;
            let corpus = match corpus {
                Some(p) => load_corpus(&p, &vocab)?,
                None => assets::corpus(&vocab)?,
            };
            let (model, report) = train(&corpus, head, &vocab, &TrainConfig::default())?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            model.save(&out)?;
            println!(
                "{head}: {} examples, objective {:.4}, train accuracy {:.3} -> {}",
                report.examples,
                report.objective,
                report.train_accuracy,
                out.display()
            );
        }
        Command::Run { scenario: s, mode, seed } => {
            let sc = scenario(&s)?;
            let p = pipeline(cli.models.as_deref())?;
            let t = run_trial(&p, &sc, &cfg, mode, seed)?;
            println!("{}", serde_json::to_string_pretty(&t.metrics)?);
            if let Some(e) = t.error {
                eprintln!("{e}");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Compare { scenario: s, seeds, out } => {
            let sc = scenario(&s)?;
            let p = pipeline(cli.models.as_deref())?;
            let report = compare(&p, &sc, &cfg, &seeds)?;
            emit(&report, &out)?;
            print!("{}", report_text(&report));
            if !report.passed() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Repl { scenario: s, mode, seed } => {
            let mut sc = scenario(&s)?;
            sc.script.events.clear();
            let p = pipeline(cli.models.as_deref())?;
            let mut exec = p.executive(&sc, &cfg, mode, seed)?;
            let stdin = io::stdin();
            repl(&mut exec, stdin.lock(), BufWriter::new(io::stdout()))?;
        }
        Command::GenCorpus { out } => {
            let vocab = assets::vocabulary()?;
            let grammar = assets::grammar(&vocab)?;
            let corpus = assets::generated_corpus(&vocab, &grammar)?;
            let out = out.unwrap_or_else(|| assets::path("corpus.txt"));
            if corpus.is_empty() {
                bail!("generator produced no entries");
            }
            std::fs::write(&out, corpus.to_text()).with_context(|| format!("writing {}", out.display()))?;
            println!("{} entries -> {}", corpus.len(), out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
