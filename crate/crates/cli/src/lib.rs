//! `hvcm`: command line client of the HVCM service.
//!
//! Without `--server` the command starts an in-process service on a loopback
//! port and talks to it over HTTP like any other client.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hvcm_client::Client;
use hvcm_core::api;
use hvcm_core::config::RunConfig;
use hvcm_core::inference::PriorMode;
use hvcm_core::io::{self, FileBody, Format, Header};
use hvcm_core::{HvcmParams, InteractionLog};

#[derive(Debug, Parser)]
#[command(name = "hvcm", version, about = "Hierarchical vertex components model for interaction networks")]
pub struct Cli {
    /// Service root URL. Starts an embedded service when omitted.
    #[arg(long, global = true, env = "HVCM_SERVER")]
    pub server: Option<String>,

    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Conjugate,
    Enron,
    HollywoodFitted,
}

impl From<Preset> for PriorMode {
    fn from(p: Preset) -> Self {
        match p {
            Preset::Conjugate => PriorMode::Conjugate,
            Preset::Enron => PriorMode::Enron,
            Preset::HollywoodFitted => PriorMode::HollywoodFitted,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => Format::Jsonl,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// Interaction log to read.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Output file (simulate) or directory (everything else).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Log format; guessed from the file extension when omitted.
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, global = true, default_value_t = 500)]
    pub burn_in: usize,
    #[arg(long, global = true, default_value_t = 100)]
    pub replicates: usize,
    /// Monte Carlo samples per candidate when resampling attributions.
    #[arg(long = "z-mc", global = true, default_value_t = 25)]
    pub z_mc: usize,
    /// Resample attributions every this many iterations.
    #[arg(long, global = true, default_value_t = 1)]
    pub z_every: usize,
    #[arg(long, global = true, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, global = true, value_enum, default_value = "conjugate")]
    pub preset: Preset,
    /// Degrees whose receiver counts are checked.
    #[arg(long, global = true, value_delimiter = ',', default_value = "1,10,100")]
    pub thresholds: Vec<u64>,
    /// Growth-curve checkpoints for `stats`.
    #[arg(long, global = true, default_value_t = 20)]
    pub checkpoints: usize,
    /// Senders and receivers share one population.
    #[arg(long, global = true)]
    pub shared: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a log from model parameters.
    Simulate {
        /// Number of interactions.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// JSON file with model parameters; defaults are used when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Run the Gibbs sampler and write the trace.
    Fit,
    /// Posterior predictive check from a fitted trace.
    Ppc {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Network statistics tables.
    Stats,
    /// Subject-overlap scores between sender pairs.
    Overlap {
        #[arg(long)]
        trace: PathBuf,
    },
}

impl Common {
    fn run_config(&self, n: usize, params: HvcmParams) -> RunConfig {
        RunConfig {
            seed: self.seed,
            n,
            params,
            preset: self.preset.into(),
            iterations: self.iterations,
            burn_in: self.burn_in,
            z_mc_samples: self.z_mc,
            z_every: self.z_every,
            replicates: self.replicates,
            level: self.level,
            thresholds: self.thresholds.clone(),
            checkpoints: self.checkpoints,
        }
    }

    fn format_for(&self, path: Option<&Path>) -> Format {
        self.format
            .map(Format::from)
            .or_else(|| path.and_then(Format::from_path))
            .unwrap_or(Format::Jsonl)
    }

    fn read_log(&self) -> anyhow::Result<InteractionLog> {
        let path = self.input.as_deref().context("--input is required")?;
        let ing = io::ingest_path(path, self.format_for(Some(path)), self.shared)
            .with_context(|| format!("reading {}", path.display()))?;
        for s in &ing.skipped {
            if s.reason != "comment" && s.reason != "header" {
                eprintln!("{}:{}: skipped ({})", path.display(), s.line, s.reason);
            }
        }
        Ok(ing.log)
    }

    fn output_dir(&self) -> anyhow::Result<&Path> {
        self.output.as_deref().context("--output directory is required")
    }
}

fn read_trace(path: &Path) -> anyhow::Result<hvcm_core::inference::GibbsTrace> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    api::parse_trace(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_files(dir: &Path, header: &Header, files: &[FileBody]) -> anyhow::Result<()> {
    for f in files {
        let path = dir.join(&f.name);
        io::write_atomic(&path, &io::with_header(header, &f.contents))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Runs one subcommand to completion.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(run_async(cli))
}

async fn run_async(cli: Cli) -> anyhow::Result<()> {
    let c = &cli.common;
    // Fail on configuration before any work or network traffic.
    let params = match &cli.command {
        Command::Simulate { params: Some(p), .. } => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        _ => HvcmParams::default(),
    };
    let n = match &cli.command {
        Command::Simulate { n, .. } => *n,
        _ => RunConfig::default().n,
    };
    let config = c.run_config(n, params);
    config.validate()?;

    let client = match &cli.server {
        Some(url) => Client::new(url.clone()),
        None => {
            let addr = hvcm_server::spawn(SocketAddr::from(([127, 0, 0, 1], 0))).await?;
            Client::new(format!("http://{addr}"))
        }
    };

    match &cli.command {
        Command::Simulate { .. } => {
            let resp = client
                .simulate(&api::SimulateRequest { config })
                .await?;
            let format = c.format_for(c.output.as_deref());
            let text = io::with_header(&resp.header, &io::emit(&resp.log, format));
            match &c.output {
                Some(path) => io::write_atomic(path, &text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Fit => {
            let log = c.read_log()?;
            let dir = c.output_dir()?;
            let resp = client.fit(&api::FitRequest { config, log }).await?;
            write_files(dir, &resp.header, &resp.files)?;
        }
        Command::Ppc { trace } => {
            let log = c.read_log()?;
            let trace = read_trace(trace)?;
            let dir = c.output_dir()?;
            let resp = client
                .ppc(&api::PpcRequest { config, log, trace })
                .await?;
            write_files(dir, &resp.header, &resp.files)?;
        }
        Command::Stats => {
            let log = c.read_log()?;
            let dir = c.output_dir()?;
            let resp = client.stats(&api::StatsRequest { config, log }).await?;
            write_files(dir, &resp.header, &resp.files)?;
        }
        Command::Overlap { trace } => {
            let log = c.read_log()?;
            let trace = read_trace(trace)?;
            let dir = c.output_dir()?;
            let resp = client
                .overlap(&api::OverlapRequest { config, log, trace })
                .await?;
            write_files(dir, &resp.header, &resp.files)?;
        }
    }
    Ok(())
}

/// Parses and runs `argv` (without the program name), for tests.
pub fn run_args<I, S>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("hvcm")).chain(args.into_iter().map(Into::into));
    match Cli::try_parse_from(argv) {
        Ok(cli) => run(cli),
        Err(e) => bail!("{e}"),
    }
}
