//! The `gridstory` command line: build datasets, re-verify them, and run
//! model evaluations.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use gridstory::dataset::{self, BuildConfig, Variant};
use gridstory::eval::{
    self, ChatClient, EvalOptions, LiveClient, MockOracle, MockUniform, PromptMode, Replay,
};

#[derive(Parser)]
#[command(
    name = "gridstory",
    version,
    about = "Build, verify and evaluate spatial-reasoning story datasets"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a dataset from a config file (or the built-in defaults).
    Generate {
        /// TOML build config; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-verify every instance of a dataset directory.
    Verify {
        /// Dataset directory containing manifest.json.
        dir: PathBuf,
    },
    /// Evaluate a chat model (or a mock stand-in) on a dataset.
    Eval {
        /// Dataset directory to evaluate on.
        #[arg(long)]
        dataset: PathBuf,
        /// Prompt mode: zero-shot, five-shot, familiarization,
        /// asp-translation or five-shot-ordered.
        #[arg(long, default_value = "five-shot")]
        mode: String,
        /// Client: live, mock-oracle, mock-uniform or replay.
        #[arg(long, default_value = "mock-oracle")]
        client: String,
        /// Model name sent to the endpoint and written into reports.
        #[arg(long, default_value = "mock")]
        model: String,
        /// Chat API base URL (required for --client live).
        #[arg(long)]
        endpoint: Option<String>,
        /// Environment variable holding the API key for live runs.
        #[arg(long, default_value = "OPENAI_API_KEY")]
        api_key_env: String,
        /// Independent sessions per instance.
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Concurrent requests in flight.
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        /// Retries per request before recording a failure (live client).
        #[arg(long, default_value_t = 3)]
        retries: u32,
        /// Completion token budget per request.
        #[arg(long, default_value_t = 512)]
        max_tokens: u32,
        /// Sampling temperature; omitted = endpoint default.
        #[arg(long)]
        temperature: Option<f64>,
        /// Restrict to one variant (clean-ordered, clean-shuffled,
        /// noisy-ordered, noisy-shuffled); default evaluates all present.
        #[arg(long)]
        variant: Option<String>,
        /// Evaluate only the first N instances per shard.
        #[arg(long)]
        limit: Option<usize>,
        /// Seed for the mock-uniform client.
        #[arg(long, default_value_t = 0)]
        client_seed: u64,
        /// Transcript file of a previous run (required for --client replay).
        #[arg(long)]
        transcripts: Option<PathBuf>,
        /// Exclude failed requests from the accuracy denominator instead of
        /// counting them as incorrect.
        #[arg(long)]
        drop_errors: bool,
        /// Report directory for results.csv, plot_data.csv and
        /// transcripts.jsonl.
        #[arg(long, default_value = "eval-out")]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Generate { config, seed, out } => generate(config, seed, out),
        Cmd::Verify { dir } => verify(dir),
        Cmd::Eval {
            dataset,
            mode,
            client,
            model,
            endpoint,
            api_key_env,
            repeats,
            concurrency,
            retries,
            max_tokens,
            temperature,
            variant,
            limit,
            client_seed,
            transcripts,
            drop_errors,
            out,
        } => {
            let mode = PromptMode::parse(&mode)
                .ok_or_else(|| anyhow!("unknown prompt mode `{mode}`"))?;
            let opts = EvalOptions {
                mode,
                model,
                repeats,
                concurrency,
                max_tokens,
                temperature,
            };
            run_eval_cmd(EvalCmd {
                dataset,
                client,
                endpoint,
                api_key_env,
                retries,
                variant,
                limit,
                client_seed,
                transcripts,
                drop_errors,
                out,
                opts,
            })
        }
    }
}

fn generate(config: Option<PathBuf>, seed: Option<u64>, out: PathBuf) -> Result<()> {
    let mut cfg = match config {
        Some(path) => BuildConfig::from_file(&path)?,
        None => BuildConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let manifest = dataset::build_dataset(&cfg, &out)?;
    println!(
        "built {} instances in {} shards → {} (seed {:#018x}, pack {})",
        manifest.total,
        manifest.files.len(),
        out.display(),
        cfg.seed,
        manifest.pack_name,
    );
    Ok(())
}

fn verify(dir: PathBuf) -> Result<()> {
    let report = dataset::verify_dataset(&dir)
        .with_context(|| format!("verification failed for {}", dir.display()))?;
    println!(
        "verified {} instances across {} shards: all round trips hold",
        report.instances, report.shards
    );
    Ok(())
}

struct EvalCmd {
    dataset: PathBuf,
    client: String,
    endpoint: Option<String>,
    api_key_env: String,
    retries: u32,
    variant: Option<String>,
    limit: Option<usize>,
    client_seed: u64,
    transcripts: Option<PathBuf>,
    drop_errors: bool,
    out: PathBuf,
    opts: EvalOptions,
}

fn run_eval_cmd(cmd: EvalCmd) -> Result<()> {
    let ds = dataset::load_dataset(&cmd.dataset)?;

    let variant = cmd
        .variant
        .as_deref()
        .map(|s| Variant::from_slug(s).ok_or_else(|| anyhow!("unknown variant `{s}`")))
        .transpose()?;
    let mut instances: Vec<_> = ds
        .instances
        .iter()
        .filter(|inst| match variant {
            Some(v) => dataset::parse_instance_id(&inst.id).map(|(_, iv, _)| iv) == Some(v),
            None => true,
        })
        .cloned()
        .collect();
    if let Some(limit) = cmd.limit {
        // Per-shard cap, not a global one: keeps every (k, variant) cell
        // represented so the score table stays comparable across k.
        instances.retain(|inst| {
            dataset::parse_instance_id(&inst.id).is_some_and(|(_, _, idx)| idx < limit)
        });
    }
    if instances.is_empty() {
        bail!("nothing to evaluate after filtering");
    }

    let asset = eval::prompt_asset(cmd.opts.mode, &ds.pack.language)?;
    let client: Box<dyn ChatClient> = match cmd.client.as_str() {
        "mock-oracle" => Box::new(MockOracle::new(&instances, &ds.pack, cmd.opts.mode)?),
        "mock-uniform" => Box::new(MockUniform::new(cmd.client_seed, &ds.pack)),
        "replay" => {
            let path = cmd
                .transcripts
                .ok_or_else(|| anyhow!("--client replay needs --transcripts <file>"))?;
            Box::new(Replay::from_file(&path)?)
        }
        "live" => {
            let endpoint = cmd
                .endpoint
                .ok_or_else(|| anyhow!("--client live needs --endpoint <url>"))?;
            let key = std::env::var(&cmd.api_key_env).ok();
            Box::new(LiveClient::new(&endpoint, key, cmd.retries)?)
        }
        other => bail!("unknown client `{other}`"),
    };

    eprintln!(
        "evaluating {} instances × {} repeats ({}, {} client)",
        instances.len(),
        cmd.opts.repeats,
        cmd.opts.mode.as_str(),
        client.name(),
    );
    let records = eval::run_eval(&instances, &ds.pack, &asset, client.as_ref(), &cmd.opts)?;
    let table = eval::score_records(&cmd.opts.model, &records, cmd.drop_errors);
    eval::write_report(&table, &records, &cmd.out)?;

    println!("model: {}", table.model);
    println!("{:>5}  {:>8}  {:>8}  {:>8}  {:>7}", "k", "mean", "std", "other", "records");
    for row in &table.scores {
        println!(
            "{:>5}  {:>8.4}  {:>8.4}  {:>8.4}  {:>7}",
            row.k, row.mean, row.std, row.other_rate, row.records
        );
    }
    println!("reports → {}", cmd.out.display());
    Ok(())
}
