use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use revkit::service::{engine_handler, router, AppState, WorkerPool};
use revkit_core::config::EngineConfig;
use revkit_core::pipeline::{Engine, LocalReview};

#[derive(Parser)]
#[command(name = "revkit", version, about = "Contextual multi-agent pull request review")]
struct Cli {
    /// Engine configuration file.
    #[arg(long, global = true, env = "REVKIT_CONFIG", default_value = "revkit.toml")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the webhook service.
    Serve,
    /// Review the changes from BASE to HEAD in a local repository. Nothing
    /// is posted.
    Review {
        repo: PathBuf,
        #[arg(long)]
        base: String,
        #[arg(long)]
        head: String,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        description: Option<String>,
    },
    /// Review-time analytics.
    Analytics {
        #[command(subcommand)]
        command: AnalyticsCommand,
    },
    /// Configuration helpers.
    Config {
        #[command(subcommand)]
        command: ConfigCommand,
    },
}

#[derive(Subcommand)]
enum AnalyticsCommand {
    /// Per-set and per-size statistics from a CSV of PR records.
    Report {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Load and validate the configuration.
    Check,
    /// Print every option with its default value.
    Reference,
}

fn load(path: &Path) -> Result<EngineConfig, ExitCode> {
    EngineConfig::load(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(2)
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serve => {
            let cfg = match load(&cli.config) {
                Ok(c) => c,
                Err(code) => return Ok(code),
            };
            serve(cfg)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Review {
            repo,
            base,
            head,
            json,
            title,
            description,
        } => {
            let cfg = match load(&cli.config) {
                Ok(c) => c,
                Err(code) => return Ok(code),
            };
            let opts = LocalReview {
                title,
                description,
                ..LocalReview::default()
            };
            let out = revkit::review_local(cfg, &repo, &base, &head, &opts)?;
            if json {
                print!("{}", out.render_json()?);
            } else {
                print!("{}", out.render_text());
            }
            Ok(ExitCode::from(out.exit_code() as u8))
        }
        Command::Analytics {
            command: AnalyticsCommand::Report { file, json },
        } => {
            let report = revkit::analytics_report(&file)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render_text());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Config { command } => match command {
            ConfigCommand::Check => match load(&cli.config) {
                Ok(_) => {
                    println!("{}: ok", cli.config.display());
                    Ok(ExitCode::SUCCESS)
                }
                Err(code) => Ok(code),
            },
            ConfigCommand::Reference => {
                print!("{}", EngineConfig::reference_toml());
                Ok(ExitCode::SUCCESS)
            }
        },
    }
}

fn serve(cfg: EngineConfig) -> Result<()> {
    let bind = cfg.service.bind.clone();
    let secret = cfg.integrations.webhook_secret.clone();
    let (workers, capacity) = (cfg.service.workers, cfg.service.queue_capacity);
    let engine = Arc::new(Engine::from_config(cfg).context("building engine")?);
    let pool = Arc::new(WorkerPool::start(workers, capacity, engine_handler(engine)));
    let app = router(AppState {
        pool,
        webhook_secret: secret,
    });
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind)
            .await
            .with_context(|| format!("binding {bind}"))?;
        tracing::info!(%bind, "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
