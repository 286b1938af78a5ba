use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use offerner_cli::pipeline::{self, Which};
use offerner_cli::{CliError, CliResult, PipelineConfig};

#[derive(Parser)]
#[command(name = "offerner", version, about = "Offer entity extraction pipeline")]
struct Cli {
    /// Pipeline config file.
    #[arg(long, global = true, default_value = "data/repro.conf")]
    config: PathBuf,
    /// Overrides the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory (eval: report path prefix).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Crf,
    Blstm,
    Greedy,
    Hybrid,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Bloat templates into datasets D1..D5.
    Generate,
    /// Train models on the generated datasets.
    Train {
        #[arg(value_enum)]
        which: Model,
        /// Train a CRF on training source i only.
        #[arg(long)]
        individual: Option<usize>,
    },
    /// Tag one offer per line from a file or stdin; prints dataset TSV.
    Tag {
        #[arg(long)]
        model: PathBuf,
        input: Option<PathBuf>,
    },
    /// Evaluate a model on a TSV dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// generate, train all, and evaluate every model on the test set.
    Repro,
}

fn config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut c = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        c.seed = seed;
    }
    if let Some(out) = &cli.out {
        c = c.with_output_dir(out.clone());
    }
    Ok(c)
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Generate => {
            let generated = pipeline::generate(&config(cli)?)?;
            print!("{}", pipeline::generation_table(&generated));
        }
        Command::Train { which, individual } => {
            let which = match which {
                Model::Crf => Which::Crf,
                Model::Blstm => Which::Blstm,
                Model::Greedy => Which::Greedy,
                Model::Hybrid => Which::Hybrid,
                Model::All => Which::All,
            };
            for path in pipeline::train(&config(cli)?, which, *individual)? {
                println!("{}", path.display());
            }
        }
        Command::Tag { model, input } => {
            let model = pipeline::load_model(model)?;
            let text = match input {
                Some(path) => std::fs::read_to_string(path)?,
                None => {
                    let mut s = String::new();
                    std::io::stdin().read_to_string(&mut s)?;
                    s
                }
            };
            print!("{}", pipeline::tag_text(&model, &text));
        }
        Command::Eval { model, dataset } => {
            let report = pipeline::eval(model, dataset)?;
            let prefix = cli.out.clone().unwrap_or_else(|| {
                let stem = dataset.file_stem().unwrap_or_default().to_string_lossy();
                let mut p = model.clone().into_os_string();
                p.push(format!(".{stem}.report"));
                PathBuf::from(p)
            });
            pipeline::write_report(&report, &prefix)?;
            print!("{}", report.to_table());
        }
        Command::Repro => {
            let summary = pipeline::repro(&config(cli)?)?;
            print!("{}", summary.to_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("offerner: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    e.exit_code() as u8
}
