//! CSV and JSON writers and the run manifest.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use tweezer_core::{CountHistogram, ExperimentConfig, SweepRow, ThresholdScan};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Formats `v` like C's `%.17g`.
pub fn g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0" } else { "0.0" }.to_string();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if !(-5..17).contains(&exp) {
        out.push_str(&digits[..1]);
        out.push('.');
        out.push_str(if digits.len() > 1 { &digits[1..] } else { "0" });
        let _ = write!(out, "e{exp}");
    } else if exp < 0 {
        out.push_str("0.");
        out.push_str(&"0".repeat((-exp - 1) as usize));
        out.push_str(digits);
    } else {
        let int_len = exp as usize + 1;
        if digits.len() <= int_len {
            out.push_str(digits);
            out.push_str(&"0".repeat(int_len - digits.len()));
            out.push_str(".0");
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    out
}

/// Pretty JSON with every double written to 17 significant digits.
struct PreciseFormatter(PrettyFormatter<'static>);

impl Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            w.write_all(g17(value).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// Output directory; every write is recorded for the manifest.
pub struct OutDir {
    root: PathBuf,
    pub written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Plots never fail the command.
    pub fn write_plot(&mut self, name: &str, svg: &str) {
        if let Err(e) = self.write(name, svg) {
            eprintln!("warning: plot skipped: {e}");
        }
    }
}

/// Reproducibility record embedded in every JSON result. Deliberately free
/// of timestamps and paths so reruns produce identical files.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
}

impl Manifest {
    pub fn new(command: &'static str, config: Option<&ExperimentConfig>) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: config.map(|c| c.seed),
            trials: config.map(|c| c.trials),
            config: config.copied(),
        }
    }
}

/// manifest.json: the embedded manifest plus invocation details.
#[derive(Debug, Serialize)]
pub struct FullManifest<'a> {
    #[serde(flatten)]
    pub manifest: &'a Manifest,
    pub command_line: Vec<String>,
    pub started: String,
    pub finished: String,
    pub outputs: &'a [String],
}

pub const HISTOGRAM_HEADER: &str = "n,count_dark,count_bright";
pub const SCAN_HEADER: &str = "n_c,epsilon_B,epsilon_D,epsilon,is_optimal";
pub const SWEEP_HEADER: &str =
    "depth_mK,duration_ms,saturation,mean_bright,mean_dark,threshold,fidelity,probe_loss";

fn histogram_rows(dark: &CountHistogram, bright: &CountHistogram) -> Vec<(u32, u64, u64)> {
    let max = dark.max_count().max(bright.max_count()).unwrap_or(0);
    (0..=max)
        .map(|n| (n, dark.frequency(n), bright.frequency(n)))
        .collect()
}

#[derive(Serialize)]
struct HistogramJson {
    n: Vec<u32>,
    count_dark: Vec<u64>,
    count_bright: Vec<u64>,
}

pub fn histogram(dark: &CountHistogram, bright: &CountHistogram, format: Format) -> String {
    let rows = histogram_rows(dark, bright);
    match format {
        Format::Csv => {
            let mut s = format!("{HISTOGRAM_HEADER}\n");
            for (n, d, b) in rows {
                let _ = writeln!(s, "{n},{d},{b}");
            }
            s
        }
        Format::Json => to_json(&HistogramJson {
            n: rows.iter().map(|r| r.0).collect(),
            count_dark: rows.iter().map(|r| r.1).collect(),
            count_bright: rows.iter().map(|r| r.2).collect(),
        }),
    }
}

/// Parses a histogram CSV as written by [`histogram`].
pub fn read_histogram_csv(src: &str) -> Result<(CountHistogram, CountHistogram), CliError> {
    use tweezer_core::PreparedState::{Bright, Dark};
    let mut lines = src.lines();
    match lines.next().map(str::trim) {
        Some(HISTOGRAM_HEADER) => {}
        other => {
            return Err(CliError::Input(format!(
                "line 1: expected header `{HISTOGRAM_HEADER}`, found `{}`",
                other.unwrap_or("")
            )))
        }
    }
    let mut dark = CountHistogram::new(Dark);
    let mut bright = CountHistogram::new(Bright);
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || CliError::Input(format!("line {}: malformed row `{line}`", i + 2));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad());
        }
        let n: u32 = fields[0].parse().map_err(|_| bad())?;
        let d: u64 = fields[1].parse().map_err(|_| bad())?;
        let b: u64 = fields[2].parse().map_err(|_| bad())?;
        dark.add(n, d);
        bright.add(n, b);
    }
    Ok((dark, bright))
}

#[derive(Serialize)]
struct ScanJson<'a> {
    points: Vec<ScanPoint>,
    optimal_threshold: u32,
    manifest: &'a Manifest,
}

#[derive(Serialize)]
struct ScanPoint {
    n_c: u32,
    epsilon_b: f64,
    epsilon_d: f64,
    epsilon: f64,
    is_optimal: bool,
}

pub fn scan(scan: &ThresholdScan, format: Format, manifest: &Manifest) -> String {
    let best = scan.optimal_threshold();
    match format {
        Format::Csv => {
            let mut s = format!("{SCAN_HEADER}\n");
            for p in &scan.points {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    p.threshold,
                    p.epsilon_bright,
                    p.epsilon_dark,
                    p.epsilon(),
                    p.threshold == best
                );
            }
            s
        }
        Format::Json => to_json(&ScanJson {
            points: scan
                .points
                .iter()
                .map(|p| ScanPoint {
                    n_c: p.threshold,
                    epsilon_b: p.epsilon_bright,
                    epsilon_d: p.epsilon_dark,
                    epsilon: p.epsilon(),
                    is_optimal: p.threshold == best,
                })
                .collect(),
            optimal_threshold: best,
            manifest,
        }),
    }
}

#[derive(Serialize)]
struct SweepJsonRow {
    depth_mk: f64,
    duration_ms: f64,
    saturation: f64,
    mean_bright: f64,
    mean_dark: f64,
    threshold: u32,
    fidelity: f64,
    probe_loss: f64,
}

#[derive(Serialize)]
struct SweepJson<'a> {
    rows: Vec<SweepJsonRow>,
    manifest: &'a Manifest,
}

pub fn sweep(rows: &[SweepRow], format: Format, manifest: &Manifest) -> String {
    let converted: Vec<SweepJsonRow> = rows
        .iter()
        .map(|r| SweepJsonRow {
            depth_mk: r.depth * 1e3,
            duration_ms: r.probe.duration * 1e3,
            saturation: r.probe.saturation,
            mean_bright: r.mean_bright,
            mean_dark: r.mean_dark,
            threshold: r.threshold,
            fidelity: r.fidelity,
            probe_loss: r.probe_loss,
        })
        .collect();
    match format {
        Format::Csv => {
            let mut s = format!("{SWEEP_HEADER}\n");
            for r in &converted {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    r.depth_mk,
                    r.duration_ms,
                    r.saturation,
                    r.mean_bright,
                    r.mean_dark,
                    r.threshold,
                    r.fidelity,
                    r.probe_loss
                );
            }
            s
        }
        Format::Json => to_json(&SweepJson {
            rows: converted,
            manifest,
        }),
    }
}
