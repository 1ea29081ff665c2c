//! The `protbeam` command line.

mod filter;
mod generate;
mod metrics;
mod rank;
mod score;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use protbeam_core::guidance::Aggregation;
use protbeam_core::metrics::PkaSet;
use protbeam_core::{MaskedLogitProvider, PositionMask};
use serde::Serialize;

use crate::error::{AppError, AppResult};
use crate::exec::thread_pool;
use crate::io::{parse_mask, parse_pka_table, read_text};
use crate::manifest::RunManifest;
use crate::providers::{load_provider, LoadedProvider};
use crate::remote::RemoteConfig;

pub use filter::FilterArgs;
pub use generate::{GenerateArgs, SamplerKind};
pub use metrics::MetricsArgs;
pub use rank::RankArgs;
pub use score::ScoreArgs;

#[derive(Parser, Debug)]
#[command(name = "protbeam", version, about = "Masked-LM guided protein sequence optimization", args_override_self = true)]
pub struct Cli {
    /// Worker threads (defaults to the available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file whose keys mirror the command-line flags. Flags given on
    /// the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate variants of each seed.
    Generate(GenerateArgs),
    /// Score candidates or whole single-substitution neighborhoods.
    Score(ScoreArgs),
    /// Re-rank the top of a candidate table by one or more objectives.
    Rank(RankArgs),
    /// Drop candidates failing pI, liability, or objective thresholds.
    Filter(FilterArgs),
    /// Developability and diversity metrics per candidate.
    Metrics(MetricsArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Score(_) => "score",
            Command::Rank(_) => "rank",
            Command::Filter(_) => "filter",
            Command::Metrics(_) => "metrics",
        }
    }
}

const SUBCOMMANDS: [&str; 5] = ["generate", "score", "rank", "filter", "metrics"];

#[derive(Args, Debug, Clone, Serialize)]
pub struct ProviderArgs {
    /// pssm:FILE, coupled:FILE, remote:URL, pssm-random:L:SEED or
    /// coupled-random:L:SEED.
    #[arg(long)]
    pub provider: String,
    /// Cache identical forward passes for the duration of the run.
    #[arg(long)]
    pub memoize: bool,
    /// Requests per batch call to a remote provider.
    #[arg(long, default_value_t = 64)]
    pub max_batch: usize,
    /// Remote request timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
    /// Concurrent connections kept to a remote provider.
    #[arg(long, default_value_t = 8)]
    pub pool: usize,
}

impl ProviderArgs {
    fn load(&self) -> AppResult<LoadedProvider> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(AppError::config("--timeout must be positive"));
        }
        let remote = RemoteConfig {
            timeout: Duration::from_secs_f64(self.timeout),
            max_batch: self.max_batch,
            pool_size: self.pool,
        };
        load_provider(&self.provider, &remote, self.memoize)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationArg {
    Sts,
    Nds,
}

impl From<AggregationArg> for Aggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::Sts => Aggregation::Sts,
            AggregationArg::Nds => Aggregation::Nds,
        }
    }
}

/// Shared state handed to each subcommand.
pub(crate) struct Context {
    pub argv: Vec<String>,
    pub threads: usize,
    pub started: Instant,
}

impl Context {
    fn manifest<A: Serialize>(&self, command: &str, args: &A) -> RunManifest {
        let config = serde_json::to_value(args).unwrap_or(serde_json::Value::Null);
        let mut m = RunManifest::new(command, self.argv.clone(), config);
        m.threads = self.threads;
        m
    }

    /// Writes `bytes` to `path` and records its digest.
    fn emit(&self, manifest: &mut RunManifest, path: &Path, bytes: &[u8]) -> AppResult<()> {
        std::fs::write(path, bytes).map_err(|e| AppError::config(format!("{}: {e}", path.display())))?;
        manifest.record_output(path, bytes);
        Ok(())
    }

    /// Stamps provider details and wall time, then writes the manifest.
    fn finish(&self, mut manifest: RunManifest, prefix: &Path, provider: Option<&LoadedProvider>) -> AppResult<RunManifest> {
        if let Some(p) = provider {
            manifest.provider = Some(p.identity.clone());
            manifest.ledger = Some(p.provider.ledger().snapshot());
        }
        manifest.wall_time_seconds = self.started.elapsed().as_secs_f64();
        let path = with_suffix(prefix, "manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| AppError::config(format!("{}: {e}", path.display())))?;
        Ok(manifest)
    }
}

/// `PREFIX.suffix`.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

pub(crate) fn load_mask(path: Option<&Path>, lengths: impl Iterator<Item = usize>) -> AppResult<PositionMask> {
    match path {
        Some(p) => parse_mask(&read_text(p)?),
        None => {
            let mut lengths = lengths.peekable();
            let first = lengths.next().ok_or_else(|| AppError::config("no sequences"))?;
            if lengths.any(|l| l != first) {
                return Err(AppError::config("seeds differ in length; pass --mask"));
            }
            Ok(PositionMask::full(first))
        }
    }
}

pub(crate) fn load_pka(path: Option<&Path>) -> AppResult<PkaSet> {
    match path {
        Some(p) => parse_pka_table(&read_text(p)?),
        None => Ok(PkaSet::default()),
    }
}

fn flag_args(key: &str, value: &serde_json::Value, out: &mut Vec<String>) -> AppResult<()> {
    let flag = format!("--{}", key.replace('_', "-"));
    match value {
        serde_json::Value::Null | serde_json::Value::Bool(false) => {}
        serde_json::Value::Bool(true) => out.push(flag),
        serde_json::Value::Number(n) => out.extend([flag, n.to_string()]),
        serde_json::Value::String(s) => out.extend([flag, s.clone()]),
        serde_json::Value::Array(items) => {
            for item in items {
                flag_args(key, item, out)?;
            }
        }
        serde_json::Value::Object(_) => {
            return Err(AppError::config(format!("config key {key:?} cannot be an object")));
        }
    }
    Ok(())
}

/// Splices the keys of a `--config` JSON file in as flags right after the
/// subcommand, so anything given explicitly later on the line wins.
pub fn expand_config(argv: Vec<String>) -> AppResult<Vec<String>> {
    let mut config_path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            config_path = argv.get(i + 1).cloned();
        } else if let Some(v) = a.strip_prefix("--config=") {
            config_path = Some(v.to_string());
        }
    }
    let Some(path) = config_path else {
        return Ok(argv);
    };
    let text = read_text(Path::new(&path))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| AppError::config(format!("{path}: {e}")))?;
    let serde_json::Value::Object(map) = value else {
        return Err(AppError::config(format!("{path}: expected a JSON object")));
    };
    let mut argv = argv;
    let mut sub = argv.iter().position(|a| SUBCOMMANDS.contains(&a.as_str()));
    if sub.is_none() {
        if let Some(serde_json::Value::String(cmd)) = map.get("command") {
            argv.insert(1.min(argv.len()), cmd.clone());
            sub = Some(1.min(argv.len() - 1));
        }
    }
    let Some(sub) = sub else {
        return Ok(argv);
    };
    let mut extra = Vec::new();
    for (key, value) in &map {
        if key == "command" || key == "format_version" || key == "config" {
            continue;
        }
        flag_args(key, value, &mut extra)?;
    }
    argv.splice(sub + 1..sub + 1, extra);
    Ok(argv)
}

/// Parses and runs one command line (`argv[0]` is the program name).
pub fn run(argv: Vec<String>) -> AppResult<()> {
    let argv = expand_config(argv)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(AppError::config(e.to_string().trim_end().to_string())),
    };
    if cli.threads == Some(0) {
        return Err(AppError::config("--threads must be at least 1"));
    }
    let pool = thread_pool(cli.threads).map_err(|e| AppError::config(e.to_string()))?;
    let ctx = Context {
        argv,
        threads: pool.current_num_threads(),
        started: Instant::now(),
    };
    let name = cli.command.name();
    pool.install(|| match &cli.command {
        Command::Generate(a) => generate::run(&ctx, name, a),
        Command::Score(a) => score::run(&ctx, name, a),
        Command::Rank(a) => rank::run(&ctx, name, a),
        Command::Filter(a) => filter::run(&ctx, name, a),
        Command::Metrics(a) => metrics::run(&ctx, name, a),
    })
}
