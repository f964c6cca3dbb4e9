//! Command-line front end: codebook dumps, closed-form reports and simulation sweeps.
//!
//! Exit codes: 0 success, 1 fixture mismatch, 2 usage or configuration error, 3 IO or runtime
//! error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::BoundConfig;
use crate::channel::ChannelModel;
use crate::codebook::{self, parse_gamma, CodebookSpec, Method};
use crate::detection::Detector;
use crate::error::Error;
use crate::fixtures;
use crate::sim::{run_sweep, PointRecord, SweepPlan, SweepResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Column order of the simulation CSV.
pub const CSV_HEADER: [&str; 12] = [
    "snr_db",
    "detector",
    "trials",
    "errors",
    "cer",
    "ci_lo",
    "ci_hi",
    "fallbacks",
    "bound_raw",
    "bound_clamped",
    "mi",
    "mi_se",
];

#[derive(Debug, Parser)]
#[command(name = "vlcmimo", version, about = "Dimmable permutation-matrix codes for MIMO VLC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dump a codebook or check the built-in n_t = 4 fixtures.
    Codebook(CodebookArgs),
    /// Report rate, run length, minimum distance, dimming weights and the flicker bound.
    Analyze(AnalyzeArgs),
    /// Run CER, union-bound and mutual-information sweeps.
    Simulate(Box<SimulateOptions>),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DumpFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct CodebookArgs {
    #[arg(long = "nt")]
    n_t: Option<usize>,
    /// Dimming factor as `p/q` or decimal.
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long, default_value = "fill")]
    method: Method,
    #[arg(long, value_enum, default_value = "text")]
    format: DumpFormat,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check the built-in n_t = 4 fixtures against the encoder.
    #[arg(long = "verify-appendix-b")]
    verify: bool,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long = "nt")]
    n_t: Option<usize>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long, default_value = "fill")]
    method: Method,
    /// Bit period in seconds.
    #[arg(long)]
    tb: Option<f64>,
    /// Maximum flickering time period in seconds.
    #[arg(long, default_value_t = 5e-3)]
    mftp: f64,
    #[arg(long, value_enum, default_value = "text")]
    format: DumpFormat,
}

/// Simulation settings. Every field may come from `--config FILE` (JSON); flags win.
#[derive(Debug, Args, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
struct SimulateOptions {
    #[arg(long = "nt")]
    #[serde(rename = "nt")]
    n_t: Option<usize>,
    #[arg(long = "nr")]
    #[serde(rename = "nr")]
    n_r: Option<usize>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    method: Option<Method>,
    /// Comma-separated subset of ml, zf, mmse.
    #[arg(long)]
    detectors: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    snr_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    snr_stop: Option<f64>,
    #[arg(long)]
    snr_step: Option<f64>,
    /// Trial cap per SNR point.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    min_errors: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    preset: Option<String>,
    /// Add the union-bound columns.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    bound: Option<bool>,
    /// Add the mutual-information columns.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    mi: Option<bool>,
    /// LED semi-angle in degrees.
    #[arg(long)]
    semi_angle: Option<f64>,
    /// on | off
    #[arg(long)]
    fov_cutoff: Option<String>,
    #[arg(long)]
    channel_hold: Option<u64>,
    #[arg(long)]
    channel_samples: Option<usize>,
    #[arg(long)]
    mi_samples: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<TableFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with any of these settings.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

macro_rules! overlay {
    ($top:expr, $base:expr, $($field:ident),*) => {
        SimulateOptions { $($field: $top.$field.or($base.$field),)* config: None }
    };
}

impl SimulateOptions {
    fn overlay(self, base: SimulateOptions) -> SimulateOptions {
        overlay!(
            self,
            base,
            n_t,
            n_r,
            gamma,
            method,
            detectors,
            snr_start,
            snr_stop,
            snr_step,
            trials,
            min_errors,
            seed,
            preset,
            bound,
            mi,
            semi_angle,
            fov_cutoff,
            channel_hold,
            channel_samples,
            mi_samples,
            format,
            out
        )
    }
}

/// Failure of a subcommand, mapped to an exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::InvalidMessage { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Codebook(a) => cmd_codebook(a, stdout),
        Command::Analyze(a) => cmd_analyze(a, stdout),
        Command::Simulate(a) => cmd_simulate(*a, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_RUNTIME
        }
    }
}

fn spec_from(n_t: usize, gamma: Option<&str>, method: Method) -> Result<CodebookSpec, Failure> {
    let ones = match gamma {
        Some(g) => parse_gamma(g, n_t)?,
        None if method == Method::Complement => n_t.saturating_sub(1),
        None => 1,
    };
    Ok(CodebookSpec::new(n_t, ones, method)?)
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Failure::Runtime(e.to_string())),
    }
}

fn cmd_codebook(args: CodebookArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    if args.verify {
        let bad = fixtures::mismatches();
        let mut report = String::new();
        for (ones, m) in &bad {
            report.push_str(&format!("mismatch: gamma={ones}/4 message={m}\n"));
        }
        report.push_str(&format!("{} of 48 fixture matrices reproduced\n", 48 - bad.len()));
        emit(None, &report, stdout)?;
        return Ok(if bad.is_empty() { EXIT_OK } else { EXIT_MISMATCH });
    }
    let n_t = args.n_t.ok_or_else(|| Failure::Usage("--nt is required".into()))?;
    let spec = spec_from(n_t, args.gamma.as_deref(), args.method)?;
    let text = match args.format {
        DumpFormat::Text => spec.dump_text()?,
        DumpFormat::Json => spec.dump_json()? + "\n",
    };
    emit(args.out.as_deref(), &text, stdout)?;
    Ok(EXIT_OK)
}

/// Largest `k` for which `analyze` computes the exhaustive minimum distance.
const DMIN_LIMIT_K: u32 = 16;

fn cmd_analyze(args: AnalyzeArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let mut report = serde_json::Map::new();
    if args.n_t.is_none() && args.tb.is_none() {
        return Err(Failure::Usage("give --nt and/or --tb".into()));
    }
    if let Some(n_t) = args.n_t {
        let spec = spec_from(n_t, args.gamma.as_deref(), args.method)?;
        let dmin = if spec.k() <= DMIN_LIMIT_K {
            Some(spec.min_hamming_distance()?.hamming)
        } else {
            None
        };
        let weights = codebook::dimming_weight_table(n_t)?;
        report.insert("n_t".into(), json!(n_t));
        report.insert("gamma".into(), json!(format!("{}/{}", spec.ones(), n_t)));
        report.insert("method".into(), json!(spec.method()));
        report.insert("k".into(), json!(spec.k()));
        report.insert("rate".into(), json!(codebook::code_rate(n_t)?));
        report.insert("rl".into(), json!(spec.max_run_length()));
        report.insert("dmin".into(), json!(dmin));
        report.insert("dimming".into(), json!(weights));
    }
    if let Some(tb) = args.tb {
        report.insert("nt_max".into(), json!(codebook::max_nt_for_flicker(tb, args.mftp)?));
    }
    let text = if matches!(args.format, DumpFormat::Json) {
        serde_json::to_string_pretty(&report).expect("json values serialize") + "\n"
    } else {
        let width = report.keys().map(String::len).max().unwrap_or(0);
        report.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
    };
    emit(None, &text, stdout)?;
    Ok(EXIT_OK)
}

fn snr_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, Failure> {
    if step.is_nan() || step <= 0.0 || stop < start {
        return Err(Failure::Usage("need snr-step > 0 and snr-stop >= snr-start".into()));
    }
    let points = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..points).map(|i| start + i as f64 * step).collect())
}

fn parse_detectors(list: &str) -> Result<Vec<Detector>, Failure> {
    let mut out: Vec<Detector> = Vec::new();
    for item in list.split(',').filter(|s| !s.trim().is_empty()) {
        let d: Detector = item.parse()?;
        if !out.contains(&d) {
            out.push(d);
        }
    }
    Ok(out)
}

/// Resolved simulation settings, echoed into the manifest.
#[derive(Debug, Serialize)]
struct Resolved {
    options: SimulateOptions,
    plan: SweepPlan,
    bound: bool,
    mi: bool,
}

fn resolve(flags: SimulateOptions) -> Result<Resolved, Failure> {
    let file = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            serde_json::from_str::<SimulateOptions>(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => SimulateOptions::default(),
    };
    let o = flags.overlay(file);
    let n_t = o.n_t.ok_or_else(|| Failure::Usage("--nt is required".into()))?;
    let n_r = o.n_r.unwrap_or(n_t);
    let method = o.method.unwrap_or(Method::Fill);
    let spec = spec_from(n_t, o.gamma.as_deref(), method)?;
    match o.preset.as_deref().unwrap_or("paper-default") {
        "paper-default" => {}
        other => return Err(Failure::Usage(format!("unknown preset '{other}'"))),
    }
    let mut model = ChannelModel::reference(n_t, n_r);
    if let Some(deg) = o.semi_angle {
        model.optics.phi_half = deg.to_radians();
    }
    model.fov_cutoff = match o.fov_cutoff.as_deref().unwrap_or("on") {
        "on" => true,
        "off" => false,
        other => return Err(Failure::Usage(format!("--fov-cutoff takes on|off, got '{other}'"))),
    };
    let model = ChannelModel::new(model.geometry, model.optics, model.fov_cutoff)?;
    let grid = snr_grid(
        o.snr_start.unwrap_or(0.0),
        o.snr_stop.unwrap_or(40.0),
        o.snr_step.unwrap_or(5.0),
    )?;
    let mut plan = SweepPlan::new(spec, model, grid);
    plan.detectors = parse_detectors(o.detectors.as_deref().unwrap_or("ml"))?;
    if let Some(t) = o.trials {
        plan.trials_per_point = t;
    }
    if let Some(e) = o.min_errors {
        plan.min_errors = e;
    }
    plan.seed = o.seed.unwrap_or(0);
    plan.channel_hold = o.channel_hold.unwrap_or(1);
    let defaults = BoundConfig::default();
    plan.bound.channel_samples = o.channel_samples.unwrap_or(defaults.channel_samples);
    plan.bound.mi_samples = o.mi_samples.unwrap_or(defaults.mi_samples);
    plan.validate()?;
    let (bound, mi) = (o.bound.unwrap_or(false), o.mi.unwrap_or(false));
    if plan.detectors.is_empty() && !bound && !mi {
        return Err(Failure::Usage("nothing to simulate: no detectors, --bound or --mi".into()));
    }
    if o.out.is_none() {
        return Err(Failure::Usage("--out is required".into()));
    }
    Ok(Resolved { options: o, plan, bound, mi })
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_row(r: &PointRecord) -> [String; 12] {
    [
        r.snr_db.to_string(),
        fmt_opt(r.detector),
        fmt_opt(r.trials),
        fmt_opt(r.errors),
        fmt_opt(r.cer),
        fmt_opt(r.ci_lo),
        fmt_opt(r.ci_hi),
        fmt_opt(r.fallbacks),
        fmt_opt(r.bound_raw),
        fmt_opt(r.bound_clamped),
        fmt_opt(r.mi),
        fmt_opt(r.mi_se),
    ]
}

/// RFC-4180 CSV with the fixed header.
pub fn write_csv<W: Write>(records: &[PointRecord], writer: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(csv_row(r))?;
    }
    w.flush()?;
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn cmd_simulate(flags: SimulateOptions, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let resolved = resolve(flags)?;
    let out = resolved.options.out.clone().expect("checked in resolve");
    let format = resolved.options.format.unwrap_or_else(|| {
        if out.extension().is_some_and(|e| e == "json") {
            TableFormat::Json
        } else {
            TableFormat::Csv
        }
    });
    let result: SweepResult = run_sweep(&resolved.plan, resolved.bound, resolved.mi)?;
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest_file = manifest_path(&out);
    let manifest = json!({
        "command": "simulate",
        "config": resolved,
        "seed": resolved.plan.seed,
        "timestamp": timestamp,
        "version": result.version,
        "outputs": [out.display().to_string(), manifest_file.display().to_string()],
    });
    match format {
        TableFormat::Csv => {
            let file = fs::File::create(&out).map_err(|e| io_failure(&out, e))?;
            write_csv(&result.records, std::io::BufWriter::new(file))
                .map_err(|e| io_failure(&out, e))?;
        }
        TableFormat::Json => {
            let rows: Vec<serde_json::Value> = result
                .records
                .iter()
                .map(|r| {
                    let mut row = serde_json::to_value(r).expect("records serialize");
                    if let Some(obj) = row.as_object_mut() {
                        obj.insert("detector".into(), json!(r.detector.map(|d| d.as_str())));
                    }
                    row
                })
                .collect();
            let doc = json!({ "manifest": manifest_file.display().to_string(), "rows": rows });
            let text = serde_json::to_string_pretty(&doc).expect("json values serialize") + "\n";
            fs::write(&out, text).map_err(|e| io_failure(&out, e))?;
        }
    }
    let text = serde_json::to_string_pretty(&manifest).expect("json values serialize") + "\n";
    fs::write(&manifest_file, text).map_err(|e| io_failure(&manifest_file, e))?;
    let _ = writeln!(stdout, "wrote {} rows to {}", result.records.len(), out.display());
    Ok(EXIT_OK)
}
