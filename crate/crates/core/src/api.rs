//! JSON request and response types for the five operations, and the
//! functions that serve them. The HTTP service and the command line both go
//! through here, so a request produces the same bodies wherever it runs.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::inference::{fit, GibbsTrace};
use crate::interaction::InteractionLog;
use crate::io::{self, FileBody, Header};
use crate::netstats::{compute_stats, geometric_checkpoints, growth_curve, subject_overlap_matrix, NetStats, OverlapEntry};
use crate::ppc::{coverage_report, generate_replicates, PpcReport};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateRequest {
    pub config: RunConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateResponse {
    pub header: Header,
    pub log: InteractionLog,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitRequest {
    pub config: RunConfig,
    pub log: InteractionLog,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResponse {
    pub header: Header,
    pub trace: GibbsTrace,
    pub files: Vec<FileBody>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PpcRequest {
    pub config: RunConfig,
    pub log: InteractionLog,
    pub trace: GibbsTrace,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PpcResponse {
    pub header: Header,
    pub report: PpcReport,
    pub files: Vec<FileBody>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StatsRequest {
    pub config: RunConfig,
    pub log: InteractionLog,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StatsResponse {
    pub header: Header,
    pub stats: NetStats,
    pub files: Vec<FileBody>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OverlapRequest {
    pub config: RunConfig,
    pub log: InteractionLog,
    pub trace: GibbsTrace,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OverlapResponse {
    pub header: Header,
    pub entries: Vec<OverlapEntry>,
    pub files: Vec<FileBody>,
}

/// Error payload returned by the service.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

impl ErrorBody {
    /// Whether the error is the caller's fault (bad input) rather than ours.
    pub fn is_client_error(&self) -> bool {
        self.kind != "io"
    }
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        let kind = match e {
            Error::InvalidParams(_) => "invalid_params",
            Error::IndexOutOfRange { .. } | Error::InvalidPosition(_) | Error::LengthMismatch(_) => "invalid_input",
            Error::InconsistentState(_) | Error::NotSeated { .. } => "inconsistent_state",
            Error::TooLarge(_) => "too_large",
            Error::InsufficientData(_) => "insufficient_data",
            Error::NoQualifyingInteractions(..) => "no_qualifying_interactions",
            Error::Parse { .. } => "parse",
            Error::EmptyInput => "empty_input",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        };
        ErrorBody {
            kind: kind.into(),
            message: e.to_string(),
        }
    }
}

fn header(config: &RunConfig) -> Result<Header> {
    Ok(Header::new(Some(config.seed()?), config.hash()))
}

fn checked_log(log: &InteractionLog) -> Result<()> {
    log.validate()?;
    if log.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

pub fn simulate(req: &SimulateRequest) -> Result<SimulateResponse> {
    req.config.validate()?;
    let mut rng = crate::seeded_rng(req.config.seed()?);
    let log = crate::generative::simulate(req.config.n, &req.config.params, &mut rng)?;
    Ok(SimulateResponse {
        header: header(&req.config)?,
        log,
    })
}

/// The trace as JSON, for feeding back into `ppc` and `overlap`.
pub fn trace_json(trace: &GibbsTrace) -> String {
    let mut s = serde_json::to_string(trace).expect("trace serializes");
    s.push('\n');
    s
}

/// Parses a trace file, tolerating a leading header.
pub fn parse_trace(text: &str) -> Result<GibbsTrace> {
    Ok(serde_json::from_str(io::strip_header(text))?)
}

pub fn fit_log(req: &FitRequest) -> Result<FitResponse> {
    req.config.validate()?;
    checked_log(&req.log)?;
    let trace = fit(&req.log, &req.config.priors(), &req.config.fit_config()?)?;
    let mut files = vec![FileBody {
        name: "trace.json".into(),
        contents: trace_json(&trace),
    }];
    files.extend(io::trace_tables(&trace, &req.log));
    Ok(FitResponse {
        header: header(&req.config)?,
        trace,
        files,
    })
}

fn check_trace(trace: &GibbsTrace, log: &InteractionLog) -> Result<()> {
    if trace.records.is_empty() || trace.local.len() != trace.records.len() {
        return Err(Error::Config("trace has no usable iterations".into()));
    }
    if trace.multi_sender.iter().any(|&n| n >= log.len()) {
        return Err(Error::LengthMismatch(
            "trace refers to interactions beyond the log".into(),
        ));
    }
    Ok(())
}

pub fn ppc(req: &PpcRequest) -> Result<PpcResponse> {
    req.config.validate()?;
    checked_log(&req.log)?;
    check_trace(&req.trace, &req.log)?;
    let reps = generate_replicates(&req.trace, &req.log, req.config.replicates, req.config.seed()?)?;
    let report = coverage_report(&reps, &req.log, &req.config.ppc_config())?;
    let files = io::ppc_tables(&report, &req.log);
    Ok(PpcResponse {
        header: header(&req.config)?,
        report,
        files,
    })
}

pub fn stats(req: &StatsRequest) -> Result<StatsResponse> {
    req.config.validate()?;
    checked_log(&req.log)?;
    let stats = compute_stats(&req.log);
    let checkpoints = geometric_checkpoints(1, req.log.len(), req.config.checkpoints);
    let growth = growth_curve(&req.log, &checkpoints, None);
    let files = io::stats_tables(&req.log, &stats, &growth);
    Ok(StatsResponse {
        header: header(&req.config)?,
        stats,
        files,
    })
}

pub fn overlap(req: &OverlapRequest) -> Result<OverlapResponse> {
    req.config.validate()?;
    checked_log(&req.log)?;
    check_trace(&req.trace, &req.log)?;
    let entries = subject_overlap_matrix(&req.trace, &req.log)?;
    let files = vec![io::overlap_table(&entries, &req.log)];
    Ok(OverlapResponse {
        header: header(&req.config)?,
        entries,
        files,
    })
}
