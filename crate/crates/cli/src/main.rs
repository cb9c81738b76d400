use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use cogstyle_cli::commands::{
    cmd_effects, cmd_eval, cmd_llm_baseline, cmd_score, cmd_synth, EffectsArgs, EvalArgs, LlmArgs,
    ScoreArgs, SynthArgs,
};
use cogstyle_cli::llm_client::{ChatConfig, HttpChatClient};
use cogstyle_cli::manifest::RunManifest;
use cogstyle_cli::{exit_code, server};
use cogstyle_core::eval::PromptMode;
use cogstyle_core::protocol::{ProtocolAssets, ProtocolEngine};

#[derive(Parser)]
#[command(name = "cogstyle", version, about = "Decision-experiment sessions, scoring and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the session API.
    Serve {
        /// Protocol asset file (JSON); the built-in assets when omitted.
        #[arg(long)]
        assets: Option<PathBuf>,
        /// Directory holding the session log and manifest.
        #[arg(long, default_value = "cogstyle-data")]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Seed for location-condition draws; drawn once and recorded when omitted.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score exported records into an outcomes CSV.
    Score {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Linear factor applied to the reported CIS column.
        #[arg(long, default_value_t = 1.0)]
        cis_scale: f64,
    },
    /// Cross-validated AUC of one or more feature sets.
    Eval {
        #[arg(long, required = true)]
        features: Vec<PathBuf>,
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Project each training fold onto this many principal components.
        #[arg(long)]
        reduce: Option<usize>,
        /// Also evaluate the join of all feature files.
        #[arg(long)]
        combine: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Cohen's d of every feature against every class.
    Effects {
        #[arg(long, required = true)]
        features: Vec<PathBuf>,
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate synthetic records, features and outcomes.
    Synth {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML or JSON spec with `priors`, `n_features` and `shifts`.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score essays with a chat model and evaluate the mapped probabilities.
    LlmBaseline {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value = "zero_shot")]
        mode: String,
        /// TOML file with `endpoint`, `model` and optional `api_key`.
        #[arg(long)]
        llm_config: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        max_in_flight: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve {
            assets,
            store,
            bind,
            seed,
        } => serve(assets, store, bind, seed),
        Command::Score {
            records,
            out_dir,
            cis_scale,
        } => {
            let s = cmd_score(&ScoreArgs {
                records,
                out_dir,
                cis_scale,
            })?;
            log::info!("scored {} record(s), {} incomplete", s.scored, s.incomplete);
            Ok(())
        }
        Command::Eval {
            features,
            outcomes,
            k,
            seed,
            lambda,
            reduce,
            combine,
            out_dir,
        } => {
            let reports = cmd_eval(&EvalArgs {
                features,
                outcomes,
                k,
                seed,
                lambda,
                reduce,
                combine,
                out_dir,
            })?;
            for r in reports {
                println!("{}\t{:.4}\t{}", r.feature_set_name, r.mean_auc, r.k_features);
            }
            Ok(())
        }
        Command::Effects {
            features,
            outcomes,
            out_dir,
        } => {
            cmd_effects(&EffectsArgs {
                features,
                outcomes,
                out_dir,
            })?;
            Ok(())
        }
        Command::Synth {
            n,
            seed,
            spec,
            out_dir,
        } => cmd_synth(&SynthArgs {
            n,
            seed,
            spec,
            out_dir,
        }),
        Command::LlmBaseline {
            records,
            mode,
            llm_config,
            max_in_flight,
            out_dir,
        } => {
            let mode = PromptMode::parse(&mode)?;
            let config = ChatConfig::resolve(llm_config.as_deref())?;
            let (endpoint, model) = (config.endpoint.clone(), config.model.clone());
            let client = HttpChatClient::new(config)?;
            let report = cmd_llm_baseline(
                &LlmArgs {
                    records,
                    mode,
                    max_in_flight,
                    out_dir,
                },
                &client,
                &endpoint,
                &model,
            )?;
            println!("{}\t{:.4}", report.feature_set_name, report.mean_auc);
            Ok(())
        }
    }
}

fn serve(assets: Option<PathBuf>, store: PathBuf, bind: String, seed: Option<u64>) -> Result<()> {
    let protocol = match &assets {
        Some(p) => ProtocolAssets::load(p)?,
        None => ProtocolAssets::builtin(),
    };
    std::fs::create_dir_all(&store).with_context(|| format!("creating {}", store.display()))?;
    let seed = seed.unwrap_or_else(rand::random);
    let engine = Arc::new(ProtocolEngine::open(protocol, store.join("sessions.ndjson"), Some(seed))?);
    log::info!("restored {} session(s)", engine.session_count());

    let mut manifest = RunManifest::new("serve", Some(seed));
    manifest.param("bind", &bind);
    if let Some(p) = &assets {
        manifest.input(p)?;
    }
    manifest.write(&store)?;

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind)
            .await
            .with_context(|| format!("binding {bind}"))?;
        log::info!("listening on {}", listener.local_addr()?);
        server::serve(listener, engine, server::shutdown_signal()).await
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
