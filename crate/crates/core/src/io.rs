//! Log ingestion and emission, output headers and tabular renderings.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inference::GibbsTrace;
use crate::interaction::InteractionLog;
use crate::netstats::{GrowthPoint, NetStats, OverlapEntry};
use crate::ppc::PpcReport;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Jsonl => "jsonl",
            Format::Csv => "csv",
        }
    }
}

/// A line ignored during ingestion, with the reason.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ingested {
    pub log: InteractionLog,
    pub skipped: Vec<SkippedLine>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    senders: Vec<String>,
    receivers: Vec<String>,
}

#[derive(Serialize)]
struct JsonRecordOut<'a> {
    senders: Vec<&'a str>,
    receivers: Vec<&'a str>,
}

fn skip_reason(line: &str) -> Option<&'static str> {
    let t = line.trim();
    if t.is_empty() {
        Some("blank line")
    } else if t.starts_with('#') {
        Some("comment")
    } else {
        None
    }
}

/// Parses a log from text. Blank and `#` lines are skipped and itemized;
/// anything else that fails to parse is an error.
pub fn ingest_str(text: &str, format: Format, shared: bool) -> Result<Ingested> {
    match format {
        Format::Jsonl => ingest_jsonl(text, shared),
        Format::Csv => ingest_csv(text, shared),
    }
}

pub fn ingest_path(path: &Path, format: Format, shared: bool) -> Result<Ingested> {
    ingest_str(&std::fs::read_to_string(path)?, format, shared)
}

fn ingest_jsonl(text: &str, shared: bool) -> Result<Ingested> {
    let mut log = InteractionLog::new(shared);
    let mut skipped = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(reason) = skip_reason(line) {
            skipped.push(SkippedLine {
                line: line_no,
                reason: reason.into(),
            });
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            column: e.column(),
            reason: e.to_string(),
        })?;
        log.push_named(&rec.senders, &rec.receivers)
            .map_err(|e| Error::Parse {
                line: line_no,
                column: 1,
                reason: e.to_string(),
            })?;
    }
    if log.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(Ingested { log, skipped })
}

fn ingest_csv(text: &str, shared: bool) -> Result<Ingested> {
    let mut skipped = Vec::new();
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, (Vec<String>, Vec<String>)> = Default::default();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(reason) = skip_reason(line) {
            skipped.push(SkippedLine {
                line: line_no,
                reason: reason.into(),
            });
            continue;
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(line.as_bytes());
        let rec = rdr
            .records()
            .next()
            .expect("non-blank line")
            .map_err(|e| Error::Parse {
                line: line_no,
                column: 1,
                reason: e.to_string(),
            })?;
        if rec.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                column: 1,
                reason: format!("expected 3 fields (interaction_id,role,name), found {}", rec.len()),
            });
        }
        if !header_seen && order.is_empty() && &rec[0] == "interaction_id" {
            header_seen = true;
            skipped.push(SkippedLine {
                line: line_no,
                reason: "header".into(),
            });
            continue;
        }
        let id = rec[0].to_string();
        let g = groups.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            Default::default()
        });
        match &rec[1] {
            "sender" => g.0.push(rec[2].to_string()),
            "receiver" => g.1.push(rec[2].to_string()),
            other => {
                let column = rec[0].len() + 2;
                return Err(Error::Parse {
                    line: line_no,
                    column,
                    reason: format!("role must be sender or receiver, found {other:?}"),
                });
            }
        }
    }
    let mut log = InteractionLog::new(shared);
    for id in &order {
        let (s, r) = &groups[id];
        log.push_named(s, r).map_err(|e| Error::Parse {
            line: 0,
            column: 0,
            reason: format!("interaction {id:?}: {e}"),
        })?;
    }
    if log.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(Ingested { log, skipped })
}

/// Renders a log body (no header).
pub fn emit(log: &InteractionLog, format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Jsonl => {
            for rec in log.records() {
                let line = JsonRecordOut {
                    senders: rec.senders().iter().map(|&s| log.sender_name(s)).collect(),
                    receivers: rec.receivers().iter().map(|&r| log.receiver_name(r)).collect(),
                };
                out.push_str(&serde_json::to_string(&line).expect("strings serialize"));
                out.push('\n');
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["interaction_id", "role", "name"]).expect("in-memory write");
            for (i, rec) in log.records().iter().enumerate() {
                let id = (i + 1).to_string();
                for &s in rec.senders() {
                    w.write_record([id.as_str(), "sender", log.sender_name(s)])
                        .expect("in-memory write");
                }
                for &r in rec.receivers() {
                    w.write_record([id.as_str(), "receiver", log.receiver_name(r)])
                        .expect("in-memory write");
                }
            }
            out = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
        }
    }
    out
}

/// Provenance header written before every output body.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub seed: Option<u64>,
    pub config_hash: String,
    pub notes: Vec<String>,
}

impl Header {
    pub fn new(seed: Option<u64>, config_hash: String) -> Self {
        Header {
            seed,
            config_hash,
            notes: Vec::new(),
        }
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn render(&self) -> String {
        let mut s = format!("# hvcm {VERSION}\n");
        match self.seed {
            Some(seed) => writeln!(s, "# seed: {seed}").unwrap(),
            None => s.push_str("# seed: none\n"),
        }
        writeln!(s, "# config: {}", self.config_hash).unwrap();
        for n in &self.notes {
            writeln!(s, "# {n}").unwrap();
        }
        s
    }
}

/// Header followed by the body.
pub fn with_header(header: &Header, body: &str) -> String {
    let mut s = header.render();
    s.push_str(body);
    s
}

/// Drops leading `#` lines.
pub fn strip_header(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        rest = rest.split_once('\n').map_or("", |x| x.1);
    }
    rest
}

/// First 16 hex digits of the SHA-256 of the value's JSON form.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    let digest = Sha256::digest(&json);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Writes `contents` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// A named output body.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileBody {
    pub name: String,
    pub contents: String,
}

impl FileBody {
    fn new(name: &str, contents: String) -> Self {
        FileBody {
            name: name.into(),
            contents,
        }
    }
}

struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Table { w }
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        self.w
            .write_record(fields.into_iter().collect::<Vec<_>>())
            .expect("in-memory write");
    }

    fn finish(self) -> String {
        String::from_utf8(self.w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

macro_rules! fields {
    ($($x:expr),* $(,)?) => { [$($x.to_string()),*] };
}

/// Global and local statistics tables.
pub fn stats_tables(log: &InteractionLog, stats: &NetStats, growth: &[GrowthPoint]) -> Vec<FileBody> {
    let g = &stats.global;
    let mut summary = Table::new(&["statistic", "value"]);
    summary.row(fields!["v", g.v]);
    summary.row(fields!["e", g.e]);
    summary.row(fields!["slots", g.slots]);
    summary.row(fields!["m_bullet", g.m_bullet()]);
    let mut degree = Table::new(&["k", "N_k", "d_k"]);
    for (k, p) in g.degree_distribution() {
        degree.row(fields![k, g.degree_hist[&k], p]);
    }
    let mut arity = Table::new(&["k", "M_k"]);
    for (k, m) in &g.arity_hist {
        arity.row(fields![k, m]);
    }
    let mut sharing = Table::new(&["senders", "receivers"]);
    for (c, n) in crate::netstats::node_sharing_histogram(log) {
        sharing.row(fields![c, n]);
    }
    let mut grow = Table::new(&["n", "v", "slots"]);
    for p in growth {
        grow.row(fields![p.n, p.v, p.slots]);
    }
    let mut local = Table::new(&["sender", "v", "e", "slots", "m_bullet"]);
    let mut local_degree = Table::new(&["sender", "k", "N_k", "d_k"]);
    for (s, c) in &stats.local {
        let name = log.sender_name(*s);
        local.row(fields![name, c.v, c.e, c.slots, c.m_bullet()]);
        for (k, p) in c.degree_distribution() {
            local_degree.row(fields![name, k, c.degree_hist[&k], p]);
        }
    }
    vec![
        FileBody::new("stats_summary.csv", summary.finish()),
        FileBody::new("degree_distribution.csv", degree.finish()),
        FileBody::new("arity_histogram.csv", arity.finish()),
        FileBody::new("node_sharing.csv", sharing.finish()),
        FileBody::new("growth.csv", grow.finish()),
        FileBody::new("local_summary.csv", local.finish()),
        FileBody::new("local_degree_distribution.csv", local_degree.finish()),
    ]
}

/// Trace tables: one row per iteration for global scalars, long format for
/// local parameters and attributions.
pub fn trace_tables(trace: &GibbsTrace, log: &InteractionLog) -> Vec<FileBody> {
    let mut global = Table::new(&[
        "iteration",
        "theta",
        "alpha",
        "sender_theta",
        "sender_alpha",
        "log_likelihood",
        "num_labels",
        "num_tables",
    ]);
    for r in &trace.records {
        global.row(fields![
            r.iteration,
            r.theta,
            r.alpha,
            r.sender_theta,
            r.sender_alpha,
            r.log_likelihood,
            r.num_labels,
            r.num_tables
        ]);
    }
    let mut local = Table::new(&["iteration", "sender_id", "theta_s", "alpha_s"]);
    for (it, row) in trace.local.iter().enumerate() {
        for (s, lp) in row.iter().enumerate() {
            local.row(fields![it, log.sender_name(crate::SenderId(s as u32)), lp.theta, lp.alpha]);
        }
    }
    let mut z = Table::new(&["interaction", "sender", "posterior_mean"]);
    for (k, &n) in trace.multi_sender.iter().enumerate() {
        if let Some(row) = trace.z_posterior_mean.get(k) {
            for (s, p) in row {
                z.row(fields![n + 1, log.sender_name(*s), p]);
            }
        }
    }
    vec![
        FileBody::new("trace_global.csv", global.finish()),
        FileBody::new("trace_local.csv", local.finish()),
        FileBody::new("z_posterior.csv", z.finish()),
    ]
}

/// Posterior predictive tables and a plain-text summary.
pub fn ppc_tables(report: &PpcReport, log: &InteractionLog) -> Vec<FileBody> {
    let mut global = Table::new(&["statistic", "actual", "lo", "hi", "covered"]);
    for r in report.global.iter().chain(&report.node_sharing) {
        global.row(fields![r.statistic, r.actual, r.lo, r.hi, r.covered]);
    }
    let mut dist = Table::new(&["metric", "lo", "hi"]);
    for d in &report.degree_distance {
        let m = match d.metric {
            crate::netstats::Metric::L1 => "l1",
            crate::netstats::Metric::Tv => "tv",
        };
        dist.row(fields![m, d.lo, d.hi]);
    }
    let mut local = Table::new(&["sender", "statistic", "actual", "lo", "hi", "covered"]);
    for (s, rows) in &report.local {
        for r in rows {
            local.row(fields![log.sender_name(*s), r.statistic, r.actual, r.lo, r.hi, r.covered]);
        }
    }
    let mut values = Table::new(&["replicate", "statistic", "value"]);
    for r in report.global.iter().chain(&report.node_sharing) {
        for (i, v) in r.values.iter().enumerate() {
            values.row(fields![i, r.statistic, v]);
        }
    }
    let mut summary = format!(
        "Posterior predictive check: {} replicates, {}% intervals\n\n",
        report.replicates,
        report.level * 100.0
    );
    writeln!(summary, "{:<20} {:>12} {:>24} {:>8}", "statistic", "actual", "interval", "covered").unwrap();
    for r in &report.global {
        writeln!(
            summary,
            "{:<20} {:>12} {:>24} {:>8}",
            r.statistic,
            r.actual,
            format!("({}, {})", r.lo, r.hi),
            if r.covered { "yes" } else { "no" }
        )
        .unwrap();
    }
    summary.push_str("\nLocal coverage rates\n");
    for c in &report.local_coverage {
        writeln!(summary, "{:<20} {}/{}", c.statistic, c.covered, c.eligible).unwrap();
    }
    summary.push_str("\nSender sequences and receiver counts are held fixed in every replicate.\n");
    vec![
        FileBody::new("ppc_global.csv", global.finish()),
        FileBody::new("ppc_degree_distance.csv", dist.finish()),
        FileBody::new("ppc_local.csv", local.finish()),
        FileBody::new("ppc_replicates.csv", values.finish()),
        FileBody::new("ppc_summary.txt", summary),
    ]
}

/// Subject-overlap matrix in long format.
pub fn overlap_table(entries: &[OverlapEntry], log: &InteractionLog) -> FileBody {
    let mut t = Table::new(&["sender_1", "sender_2", "score", "interactions"]);
    for e in entries {
        t.row(fields![log.sender_name(e.s1), log.sender_name(e.s2), e.score, e.interactions]);
    }
    FileBody::new("overlap.csv", t.finish())
}
