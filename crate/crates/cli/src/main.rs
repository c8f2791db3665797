use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linkpred::error::ErrorClass;
use linkpred::pipeline::{run_stage, run_stages, PipelineConfig, Stage, RESULTS_FILE};
use linkpred::synthetic::{power_law_cluster, SyntheticConfig};
use linkpred::{Error, Result};

/// Link prediction experiments on attributed social networks.
#[derive(Debug, Parser)]
#[command(name = "linkpred", version)]
struct Cli {
    /// Pipeline config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Comma-separated stages for `run`, e.g. `split,embed,build`.
    #[arg(long, global = true, value_delimiter = ',')]
    stages: Option<Vec<String>>,

    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the whole pipeline, or the stages given by --stages.
    Run,
    /// Graph statistics and degree histograms.
    Stats,
    /// Hold out positives, sample negatives, and split train/test/unseen.
    Split,
    /// node2vec embeddings of the pruned graphs.
    Embed,
    /// Standardised feature matrices.
    Build,
    /// Feature elimination, importances and correlations.
    Select,
    /// Train every configured model on every dataset.
    Train,
    /// Score models and write the results table.
    Eval,
    /// Write a synthetic network in the input file format.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Directory for `<label>.edges` and `<label>.attributes.csv`.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value = "synthetic")]
    label: String,
    #[arg(long, default_value_t = 3000)]
    nodes: usize,
    #[arg(long, default_value_t = 8)]
    edges_per_node: usize,
    #[arg(long, default_value_t = 0.9)]
    triad_probability: f64,
    #[arg(long, default_value_t = 0.6)]
    homophily: f64,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(out) = &cli.output {
        cfg.output = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn generate(args: &GenerateArgs, seed: u64) -> Result<()> {
    let cfg = SyntheticConfig {
        nodes: args.nodes,
        edges_per_node: args.edges_per_node,
        triad_probability: args.triad_probability,
        homophily: args.homophily,
        seed,
        ..SyntheticConfig::default()
    };
    let g = power_law_cluster(&cfg, &args.label)?;
    let edges = args.out_dir.join(format!("{}.edges", args.label));
    let attrs = args.out_dir.join(format!("{}.attributes.csv", args.label));
    g.write_edge_file(&edges)?;
    g.write_attribute_file(&attrs)?;
    println!("{}\n{}", edges.display(), attrs.display());
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let single = |stage: Stage| -> Result<()> {
        let cfg = load_config(cli)?;
        cfg.validate()?;
        run_stage(&cfg, stage)
    };
    match &cli.command {
        Command::Generate(args) => generate(args, cli.seed.unwrap_or(0)),
        Command::Run => {
            let cfg = load_config(cli)?;
            let stages = match &cli.stages {
                Some(list) => list.iter().map(|s| s.trim().parse()).collect::<Result<Vec<Stage>>>()?,
                None => Stage::ALL.to_vec(),
            };
            run_stages(&cfg, &stages)?;
            if stages.contains(&Stage::Eval) {
                println!("{}", cfg.output.join(RESULTS_FILE).display());
            }
            Ok(())
        }
        Command::Stats => single(Stage::Stats),
        Command::Split => single(Stage::Split),
        Command::Embed => single(Stage::Embed),
        Command::Build => single(Stage::Build),
        Command::Select => single(Stage::Select),
        Command::Train => single(Stage::Train),
        Command::Eval => single(Stage::Eval),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { 1 } else { 0 });
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numeric => 3,
            })
        }
    }
}
