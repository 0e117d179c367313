//! Command-line front end: configuration merging, output rendering, and the
//! built-in verification suite for the `lgsim` binary.
//!
//! Precedence for every setting is command-line flag, then key=value config
//! file, then built-in default. Scan modes stream CSV or JSON to stdout (or
//! `--out`), with a one-line summary on stderr; the bound-check and
//! invasiveness modes emit JSON documents.

use clap::{Parser, ValueEnum};
use lgsim::analysis::{
    invasiveness_report, lg_scan, Classification, GenericRealistEnsemble, Intervention,
    InvasivenessReport, ScanPoint, ScanSource,
};
use lgsim::beads::OnticEnsemble;
use lgsim::mc::{enumerate_oracle, estimate_correlator, SeededSampler};
use lgsim::quantum::{lg_quantity_quantum, QubitState, RabiFrequency, TimeGrid};
use serde_json::json;
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Number of random mixtures exercised by the generic bound check.
const GENERIC_RANDOM_CASES: u64 = 10_000;

/// Everything that can go wrong, sorted by exit code: configuration and I/O
/// problems exit with 2, numerical contract violations with 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flag value, bad config file entry, or an invalid combination.
    #[error("configuration: {0}")]
    Config(String),
    /// Filesystem trouble reading the config or writing the output.
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    /// A computation reported values outside its numerical contract.
    #[error("numerics: {0}")]
    Numerics(#[from] lgsim::Error),
    /// A built-in verification check found a discrepancy.
    #[error("self-check '{0}' failed: {1}")]
    CheckFailed(&'static str, String),
}

impl CliError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerics(_) | CliError::CheckFailed(..) => 3,
        }
    }
}

/// What the binary computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Exact quantum scan of L over schedules (t, 2t, 3t, 4t).
    Quantum,
    /// Exact bead-model scan (free evolution, or measured with --measure).
    HvAnalytic,
    /// Monte Carlo bead-model scan with standard errors.
    HvMc,
    /// Bound check over deterministic and random realist mixtures.
    GenericCheck,
    /// Ontic-vs-observable invasiveness reports for the bead interventions.
    Invasiveness,
}

impl Mode {
    /// Scan modes produce one output row per grid point.
    pub fn is_scan(self) -> bool {
        matches!(self, Mode::Quantum | Mode::HvAnalytic | Mode::HvMc)
    }

    fn parse_key(value: &str) -> Result<Self, CliError> {
        match value {
            "quantum" => Ok(Mode::Quantum),
            "hv-analytic" => Ok(Mode::HvAnalytic),
            "hv-mc" => Ok(Mode::HvMc),
            "generic-check" => Ok(Mode::GenericCheck),
            "invasiveness" => Ok(Mode::Invasiveness),
            other => Err(CliError::Config(format!(
                "key 'mode': unknown mode '{other}' (expected quantum, hv-analytic, \
                 hv-mc, generic-check, or invasiveness)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Mode::Quantum => "quantum",
            Mode::HvAnalytic => "hv-analytic",
            Mode::HvMc => "hv-mc",
            Mode::GenericCheck => "generic-check",
            Mode::Invasiveness => "invasiveness",
        };
        f.write_str(name)
    }
}

/// Primary output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    /// One comma-separated row per scan point.
    Csv,
    /// A single JSON document.
    Json,
}

impl OutputFormat {
    fn parse_key(value: &str) -> Result<Self, CliError> {
        match value {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(CliError::Config(format!(
                "key 'format': unknown format '{other}' (expected csv or json)"
            ))),
        }
    }
}

/// Command-line interface. Every value-carrying flag is optional so that a
/// config file can supply it; flags always win over the file.
#[derive(Debug, Parser)]
#[command(
    name = "lgsim",
    version,
    about = "Temporal-correlation scans and bound checks for a driven two-level system"
)]
pub struct Cli {
    /// Computation mode.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,

    /// Drive (Rabi) frequency.
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,

    /// Smallest schedule base time of the scan.
    #[arg(long = "t-min", allow_negative_numbers = true)]
    pub t_min: Option<f64>,

    /// Largest schedule base time of the scan.
    #[arg(long = "t-max", allow_negative_numbers = true)]
    pub t_max: Option<f64>,

    /// Number of scan grid points.
    #[arg(long)]
    pub points: Option<usize>,

    /// Beads per Monte Carlo estimate (and per invasiveness comparison).
    #[arg(long)]
    pub beads: Option<usize>,

    /// Seed for all Monte Carlo sampling.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Perform the readout at the first time of every correlator pair.
    #[arg(long)]
    pub measure: bool,

    /// Force free evolution (overrides a `measure = true` config entry).
    #[arg(long = "no-measure", conflicts_with = "measure")]
    pub no_measure: bool,

    /// Output encoding (scan modes default to csv; other modes emit json).
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,

    /// Write the primary output to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Render a text plot of L(t) to stderr (scan modes only).
    #[arg(long)]
    pub plot: bool,

    /// Run the built-in verification suite instead of the selected mode.
    #[arg(long = "self-check")]
    pub self_check: bool,

    /// Flat key=value configuration file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Raw string values read from a key=value config file.
#[derive(Debug, Default)]
struct FileConfig {
    mode: Option<String>,
    omega: Option<String>,
    t_min: Option<String>,
    t_max: Option<String>,
    points: Option<String>,
    beads: Option<String>,
    seed: Option<String>,
    measure: Option<String>,
    format: Option<String>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config file '{}': {e}", path.display()))
        })?;
        let mut config = FileConfig::default();
        for (line_number, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "config line {}: expected key=value, got '{line}'",
                    line_number + 1
                ))
            })?;
            let value = value.trim().to_owned();
            let slot = match key.trim() {
                "mode" => &mut config.mode,
                "omega" => &mut config.omega,
                "t-min" => &mut config.t_min,
                "t-max" => &mut config.t_max,
                "points" => &mut config.points,
                "beads" => &mut config.beads,
                "seed" => &mut config.seed,
                "measure" => &mut config.measure,
                "format" => &mut config.format,
                other => {
                    return Err(CliError::Config(format!(
                        "config line {}: unknown key '{other}'",
                        line_number + 1
                    )))
                }
            };
            *slot = Some(value);
        }
        Ok(config)
    }
}

fn parse_config_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| {
        CliError::Config(format!(
            "key '{key}': cannot parse '{value}' as {}",
            std::any::type_name::<T>()
        ))
    })
}

/// Fully merged and validated settings for one invocation.
#[derive(Debug, Clone)]
pub struct Config {
    /// Selected computation mode.
    pub mode: Mode,
    /// Drive frequency (validated positive and finite).
    pub omega: RabiFrequency,
    /// Scan grid lower edge.
    pub t_min: f64,
    /// Scan grid upper edge.
    pub t_max: f64,
    /// Scan grid size.
    pub points: usize,
    /// Ensemble size for sampling and invasiveness comparisons.
    pub beads: usize,
    /// Monte Carlo seed.
    pub seed: u64,
    /// Whether correlator pairs carry the readout at their first time.
    pub measure: bool,
    /// Effective output encoding for this mode.
    pub format: OutputFormat,
    /// Output file, if any.
    pub out: Option<PathBuf>,
    /// Whether to render the text plot.
    pub plot: bool,
}

impl Config {
    /// Merges flags over the config file over defaults, then validates.
    fn merge(cli: &Cli, file: Option<&FileConfig>) -> Result<Self, CliError> {
        let get = |field: fn(&FileConfig) -> &Option<String>| -> Option<&String> {
            file.and_then(|f| field(f).as_ref())
        };

        let mode = match (cli.mode, get(|f| &f.mode)) {
            (Some(mode), _) => mode,
            (None, Some(value)) => Mode::parse_key(value)?,
            (None, None) => Mode::Quantum,
        };
        let omega_raw = match (cli.omega, get(|f| &f.omega)) {
            (Some(v), _) => v,
            (None, Some(value)) => parse_config_value("omega", value)?,
            (None, None) => 1.0,
        };
        let t_min = match (cli.t_min, get(|f| &f.t_min)) {
            (Some(v), _) => v,
            (None, Some(value)) => parse_config_value("t-min", value)?,
            (None, None) => 0.01,
        };
        let t_max = match (cli.t_max, get(|f| &f.t_max)) {
            (Some(v), _) => v,
            (None, Some(value)) => parse_config_value("t-max", value)?,
            (None, None) => PI,
        };
        let points = match (cli.points, get(|f| &f.points)) {
            (Some(v), _) => v,
            (None, Some(value)) => parse_config_value("points", value)?,
            (None, None) => 200,
        };
        let beads = match (cli.beads, get(|f| &f.beads)) {
            (Some(v), _) => v,
            (None, Some(value)) => parse_config_value("beads", value)?,
            (None, None) => 100_000,
        };
        let seed = match (cli.seed, get(|f| &f.seed)) {
            (Some(v), _) => v,
            (None, Some(value)) => parse_config_value("seed", value)?,
            (None, None) => 42,
        };
        let measure = if cli.measure {
            true
        } else if cli.no_measure {
            false
        } else {
            match get(|f| &f.measure) {
                Some(value) => match value.as_str() {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(CliError::Config(format!(
                            "key 'measure': expected true or false, got '{other}'"
                        )))
                    }
                },
                None => false,
            }
        };
        let explicit_format = match (cli.format, get(|f| &f.format)) {
            (Some(v), _) => Some(v),
            (None, Some(value)) => Some(OutputFormat::parse_key(value)?),
            (None, None) => None,
        };

        let omega = RabiFrequency::new(omega_raw).map_err(|_| {
            CliError::Config(format!(
                "key 'omega': must be finite and > 0, got {omega_raw}"
            ))
        })?;
        if !t_min.is_finite() || t_min <= 0.0 {
            return Err(CliError::Config(format!(
                "key 't-min': must be finite and > 0, got {t_min}"
            )));
        }
        if !t_max.is_finite() || t_max <= t_min {
            return Err(CliError::Config(format!(
                "key 't-max': must be finite and > t-min ({t_min}), got {t_max}"
            )));
        }
        if points < 2 {
            return Err(CliError::Config(format!(
                "key 'points': a scan grid needs at least 2 points, got {points}"
            )));
        }
        if beads == 0 {
            return Err(CliError::Config(
                "key 'beads': must be at least 1".to_owned(),
            ));
        }
        if mode == Mode::HvMc && beads < 100 {
            return Err(CliError::Config(format!(
                "key 'beads': hv-mc needs at least 100 beads per estimate, got {beads}"
            )));
        }
        let format = match explicit_format {
            Some(OutputFormat::Csv) if !mode.is_scan() => {
                return Err(CliError::Config(format!(
                    "key 'format': csv applies to scan modes only; mode {mode} emits json"
                )))
            }
            Some(f) => f,
            None if mode.is_scan() => OutputFormat::Csv,
            None => OutputFormat::Json,
        };
        if cli.plot && !mode.is_scan() {
            return Err(CliError::Config(format!(
                "flag '--plot': plots are only available for scan modes, not {mode}"
            )));
        }

        Ok(Config {
            mode,
            omega,
            t_min,
            t_max,
            points,
            beads,
            seed,
            measure,
            format,
            out: cli.out.clone(),
            plot: cli.plot,
        })
    }
}

/// Formats a float with 17 significant digits so that parsing the text
/// recovers the identical bit pattern.
fn full_precision(x: f64) -> String {
    format!("{x:.16e}")
}

fn scan_source(config: &Config) -> ScanSource {
    match config.mode {
        Mode::Quantum => ScanSource::Quantum,
        Mode::HvAnalytic => ScanSource::HvAnalytic {
            with_measurement: config.measure,
        },
        Mode::HvMc => ScanSource::HvMc {
            with_measurement: config.measure,
            n_beads: config.beads,
            sampler: SeededSampler::new(config.seed),
        },
        Mode::GenericCheck | Mode::Invasiveness => {
            unreachable!("only scan modes build a scan source")
        }
    }
}

/// The CSV column layout for scan output.
pub const CSV_HEADER: &str = "mode,omega,t,e12,e23,e34,e14,se12,se23,se34,se14,l_value,violated";

fn render_scan_csv(config: &Config, points: &[ScanPoint], out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in points {
        let values = p.correlators.values();
        let errors = p.correlators.std_errors();
        let error_cell = |index: usize| -> String {
            errors.map_or_else(String::new, |e| full_precision(e[index]))
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            config.mode,
            full_precision(config.omega.value()),
            full_precision(p.t),
            full_precision(values[0]),
            full_precision(values[1]),
            full_precision(values[2]),
            full_precision(values[3]),
            error_cell(0),
            error_cell(1),
            error_cell(2),
            error_cell(3),
            full_precision(p.lg.l_value),
            p.lg.violated
        )?;
    }
    Ok(())
}

fn render_scan_json(config: &Config, points: &[ScanPoint], out: &mut dyn Write) -> io::Result<()> {
    let rows: Vec<_> = points
        .iter()
        .map(|p| {
            let values = p.correlators.values();
            let errors = p.correlators.std_errors();
            json!({
                "t": p.t,
                "e12": values[0],
                "e23": values[1],
                "e34": values[2],
                "e14": values[3],
                "se12": errors.map(|e| e[0]),
                "se23": errors.map(|e| e[1]),
                "se34": errors.map(|e| e[2]),
                "se14": errors.map(|e| e[3]),
                "l_value": p.lg.l_value,
                "violated": p.lg.violated,
            })
        })
        .collect();
    let summary = scan_summary(points);
    let document = json!({
        "mode": config.mode.to_string(),
        "omega": config.omega.value(),
        "measure": config.measure,
        "beads": (config.mode == Mode::HvMc).then_some(config.beads),
        "seed": (config.mode == Mode::HvMc).then_some(config.seed),
        "points": rows,
        "summary": {
            "max_abs_l": summary.max_abs_l,
            "t_at_max": summary.t_at_max,
            "violations": summary.violations,
        },
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&document)?)
}

struct ScanSummary {
    max_abs_l: f64,
    t_at_max: f64,
    violations: usize,
}

fn scan_summary(points: &[ScanPoint]) -> ScanSummary {
    let mut max_abs_l = f64::NEG_INFINITY;
    let mut t_at_max = f64::NAN;
    let mut violations = 0;
    for p in points {
        if p.lg.l_value.abs() > max_abs_l {
            max_abs_l = p.lg.l_value.abs();
            t_at_max = p.t;
        }
        violations += usize::from(p.lg.violated);
    }
    ScanSummary {
        max_abs_l,
        t_at_max,
        violations,
    }
}

/// Renders a fixed-size text plot of `L(t)` with the `+-2` bound lines.
fn render_plot(points: &[ScanPoint], out: &mut dyn Write) -> io::Result<()> {
    const ROWS: usize = 21;
    const COLS: usize = 64;
    let n = points.len();
    let cols = COLS.min(n);
    let sampled: Vec<(f64, f64)> = (0..cols)
        .map(|c| {
            let index = if cols == 1 { 0 } else { c * (n - 1) / (cols - 1) };
            (points[index].t, points[index].lg.l_value)
        })
        .collect();
    let mut lo = -2.2f64;
    let mut hi = 2.2f64;
    for &(_, l) in &sampled {
        lo = lo.min(l - 0.1);
        hi = hi.max(l + 0.1);
    }
    let row_of = |value: f64| -> usize {
        let frac = (hi - value) / (hi - lo);
        ((frac * (ROWS - 1) as f64).round() as isize).clamp(0, ROWS as isize - 1) as usize
    };
    let mut canvas = vec![vec![' '; cols]; ROWS];
    for row in [row_of(2.0), row_of(-2.0)] {
        for cell in &mut canvas[row] {
            *cell = '-';
        }
    }
    for (c, &(_, l)) in sampled.iter().enumerate() {
        canvas[row_of(l)][c] = '*';
    }
    writeln!(out, "L(t) over [{:.4}, {:.4}]  (--- marks |L| = 2)", sampled[0].0, sampled[cols - 1].0)?;
    for (r, row) in canvas.iter().enumerate() {
        let y = hi - (hi - lo) * r as f64 / (ROWS - 1) as f64;
        let line: String = row.iter().collect();
        writeln!(out, "{y:+7.3} |{line}")?;
    }
    Ok(())
}

fn run_scan(config: &Config, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let grid = TimeGrid::linspace(config.t_min, config.t_max, config.points)?;
    let points = lg_scan(config.omega, &grid, &scan_source(config))?;
    match config.format {
        OutputFormat::Csv => render_scan_csv(config, &points, out)?,
        OutputFormat::Json => render_scan_json(config, &points, out)?,
    }
    if config.plot {
        render_plot(&points, err)?;
    }
    let summary = scan_summary(&points);
    writeln!(
        err,
        "max |L| = {} at t = {}; {} of {} points violate |L| <= 2",
        full_precision(summary.max_abs_l),
        full_precision(summary.t_at_max),
        summary.violations,
        points.len()
    )?;
    Ok(())
}

/// Builds the `case`-th random mixture for the generic bound check.
fn random_realist_mixture(sampler: &SeededSampler, case: u64) -> GenericRealistEnsemble {
    let stream = sampler.substream(case);
    let member_count = 1 + (case % 8) as usize;
    let raw: Vec<f64> = (0..member_count)
        .map(|j| stream.label(j as u64))
        .collect();
    let total: f64 = raw.iter().sum();
    let members: Vec<(f64, [f64; 4])> = raw
        .iter()
        .enumerate()
        .map(|(m, &weight)| {
            let mut table = [0.0; 4];
            for (slot, entry) in table.iter_mut().enumerate() {
                let bit = stream.label(100 + (m * 4 + slot) as u64);
                *entry = if bit < 0.5 { 1.0 } else { -1.0 };
            }
            (weight / total, table)
        })
        .collect();
    GenericRealistEnsemble::new(members).expect("generated mixtures are valid by construction")
}

/// The sixteen deterministic assignments of `+-1` to four time slots.
fn deterministic_tables() -> impl Iterator<Item = [f64; 4]> {
    (0u8..16).map(|bits| {
        [
            if bits & 1 == 0 { 1.0 } else { -1.0 },
            if bits & 2 == 0 { 1.0 } else { -1.0 },
            if bits & 4 == 0 { 1.0 } else { -1.0 },
            if bits & 8 == 0 { 1.0 } else { -1.0 },
        ]
    })
}

fn run_generic_check(config: &Config, out: &mut dyn Write) -> Result<(), CliError> {
    let mut deterministic_max = f64::NEG_INFINITY;
    let mut deterministic_min = f64::INFINITY;
    let mut violations = 0usize;
    for table in deterministic_tables() {
        let result = GenericRealistEnsemble::deterministic(table)?.lg_result()?;
        deterministic_max = deterministic_max.max(result.l_value);
        deterministic_min = deterministic_min.min(result.l_value);
        violations += usize::from(result.violated);
    }
    let sampler = SeededSampler::new(config.seed);
    let mut random_max_abs = 0.0f64;
    for case in 0..GENERIC_RANDOM_CASES {
        let result = random_realist_mixture(&sampler, case).lg_result()?;
        random_max_abs = random_max_abs.max(result.l_value.abs());
        violations += usize::from(result.violated);
    }
    let document = json!({
        "mode": "generic-check",
        "seed": config.seed,
        "deterministic": {
            "tables": 16,
            "max_l": deterministic_max,
            "min_l": deterministic_min,
        },
        "random": {
            "count": GENERIC_RANDOM_CASES,
            "max_abs_l": random_max_abs,
        },
        "violations": violations,
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&document).map_err(io::Error::from)?)?;
    if violations > 0 {
        return Err(CliError::CheckFailed(
            "generic-bound",
            format!("{violations} realist mixtures exceeded |L| = 2"),
        ));
    }
    Ok(())
}

fn invasiveness_json(report: &InvasivenessReport) -> serde_json::Value {
    json!({
        "intervention": report.intervention.to_string(),
        "t0": report.t0,
        "n_beads": report.n_beads,
        "n_probes": report.n_probes,
        "ontic_distance": report.ontic_distance,
        "observable_distance": report.observable_distance,
        "classification": report.classification.to_string(),
    })
}

fn run_invasiveness(config: &Config, out: &mut dyn Write) -> Result<(), CliError> {
    let w = config.omega.value();
    let t0 = FRAC_PI_2 / w;
    let probes: Vec<f64> = (1..=6).map(|k| t0 + 0.7 * k as f64 / w).collect();
    let reports: Vec<serde_json::Value> = [
        Intervention::None,
        Intervention::MeasureQ,
        Intervention::PhantomPermutation,
    ]
    .into_iter()
    .map(|intervention| {
        invasiveness_report(intervention, config.omega, t0, &probes, config.beads)
            .map(|r| invasiveness_json(&r))
    })
    .collect::<Result<_, _>>()?;
    let document = json!({
        "mode": "invasiveness",
        "omega": w,
        "t0": t0,
        "n_beads": config.beads,
        "probes": probes,
        "reports": reports,
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&document).map_err(io::Error::from)?)?;
    Ok(())
}

type Check = (&'static str, fn(&Config) -> Result<(), String>);

fn check_quantum_peak(config: &Config) -> Result<(), String> {
    let t = PI / (4.0 * config.omega.value());
    let l = lg_quantity_quantum(config.omega, t);
    let expected = 2.0 * SQRT_2;
    if (l - expected).abs() < 1e-12 {
        Ok(())
    } else {
        Err(format!("peak L = {l}, expected {expected}"))
    }
}

fn check_quantum_scan_identity(config: &Config) -> Result<(), String> {
    let w = config.omega;
    let grid = TimeGrid::linspace(0.01 / w.value(), PI / w.value(), 100)
        .map_err(|e| e.to_string())?;
    let points = lg_scan(w, &grid, &ScanSource::Quantum).map_err(|e| e.to_string())?;
    for p in &points {
        let closed = lg_quantity_quantum(w, p.t);
        if (p.lg.l_value - closed).abs() >= 1e-12 {
            return Err(format!(
                "assembled L = {} vs closed form {closed} at t = {}",
                p.lg.l_value, p.t
            ));
        }
    }
    Ok(())
}

fn check_beads_match_quantum(config: &Config) -> Result<(), String> {
    let w = config.omega;
    let ensemble = OnticEnsemble::stratified(4, w).map_err(|e| e.to_string())?;
    let state = QubitState::state1();
    for i in 1..=7 {
        let t1 = 0.37 * i as f64 / w.value();
        for j in 0..=7 {
            let t2 = t1 + 0.53 * j as f64 / w.value();
            let hv = ensemble.correlator(t1, t2, true).map_err(|e| e.to_string())?;
            let qm = lgsim::quantum::correlator(&state, w, t1, t2).map_err(|e| e.to_string())?;
            if (hv - qm).abs() >= 1e-12 {
                return Err(format!(
                    "measured bead correlator {hv} vs quantum {qm} at ({t1}, {t2})"
                ));
            }
        }
    }
    Ok(())
}

fn check_free_beads_respect_bound(config: &Config) -> Result<(), String> {
    let w = config.omega;
    let grid = TimeGrid::linspace(0.01 / w.value(), PI / w.value(), 200)
        .map_err(|e| e.to_string())?;
    let points = lg_scan(
        w,
        &grid,
        &ScanSource::HvAnalytic {
            with_measurement: false,
        },
    )
    .map_err(|e| e.to_string())?;
    for p in &points {
        if p.lg.l_value.abs() > 2.0 + 1e-9 {
            return Err(format!(
                "free-evolution L = {} exceeded the bound at t = {}",
                p.lg.l_value, p.t
            ));
        }
    }
    Ok(())
}

fn check_mc_within_error_bars(config: &Config) -> Result<(), String> {
    let w = config.omega;
    let t1 = 0.7 / w.value();
    let t2 = 1.9 / w.value();
    let r = estimate_correlator(&SeededSampler::new(config.seed), 20_000, w, t1, t2, true)
        .map_err(|e| e.to_string())?;
    let exact = 1.2f64.cos();
    if (r.mean - exact).abs() <= 4.0 * r.std_error {
        Ok(())
    } else {
        Err(format!(
            "estimate {} +- {} vs exact {exact}",
            r.mean, r.std_error
        ))
    }
}

fn check_enumeration_tracks_closed_form(config: &Config) -> Result<(), String> {
    let w = config.omega;
    let n = 100_000;
    let t1 = 0.6 / w.value();
    let t2 = 2.1 / w.value();
    let free = enumerate_oracle(n, w, t1, t2, false).map_err(|e| e.to_string())?;
    let exact = 1.0 - (0.6f64.cos() - 2.1f64.cos()).abs();
    if (free - exact).abs() <= 10.0 / n as f64 {
        Ok(())
    } else {
        Err(format!("enumeration {free} vs closed form {exact}"))
    }
}

fn check_deterministic_tables(_: &Config) -> Result<(), String> {
    let mut max_l = f64::NEG_INFINITY;
    for table in deterministic_tables() {
        let result = GenericRealistEnsemble::deterministic(table)
            .and_then(|m| m.lg_result())
            .map_err(|e| e.to_string())?;
        if result.violated {
            return Err(format!("table {table:?} flagged as a violation"));
        }
        max_l = max_l.max(result.l_value);
    }
    if max_l == 2.0 {
        Ok(())
    } else {
        Err(format!("deterministic maximum {max_l}, expected exactly 2"))
    }
}

fn check_phantom_is_undetectable(config: &Config) -> Result<(), String> {
    let w = config.omega.value();
    let t0 = FRAC_PI_2 / w;
    let probes: Vec<f64> = (1..=4).map(|k| t0 + 0.7 * k as f64 / w).collect();
    let report = invasiveness_report(
        Intervention::PhantomPermutation,
        config.omega,
        t0,
        &probes,
        10_000,
    )
    .map_err(|e| e.to_string())?;
    if report.classification == Classification::InvasiveUndetectable
        && report.ontic_distance > 0.0
    {
        Ok(())
    } else {
        Err(format!(
            "classification {} with ontic distance {}",
            report.classification, report.ontic_distance
        ))
    }
}

/// The built-in verification suite: one line per check on `out`.
pub fn run_self_check(config: &Config, out: &mut dyn Write) -> Result<(), CliError> {
    let checks: [Check; 8] = [
        ("quantum-peak", check_quantum_peak),
        ("quantum-scan-identity", check_quantum_scan_identity),
        ("beads-match-quantum", check_beads_match_quantum),
        ("free-beads-respect-bound", check_free_beads_respect_bound),
        ("mc-within-error-bars", check_mc_within_error_bars),
        (
            "enumeration-tracks-closed-form",
            check_enumeration_tracks_closed_form,
        ),
        ("deterministic-tables", check_deterministic_tables),
        ("phantom-undetectable", check_phantom_is_undetectable),
    ];
    for (name, check) in checks {
        match check(config) {
            Ok(()) => writeln!(out, "self-check {name}: ok")?,
            Err(detail) => {
                writeln!(out, "self-check {name}: FAIL ({detail})")?;
                return Err(CliError::CheckFailed(name, detail));
            }
        }
    }
    Ok(())
}

/// Runs one invocation against explicit output streams.
pub fn run_with(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let file = cli
        .config
        .as_deref()
        .map(FileConfig::load)
        .transpose()?;
    let config = Config::merge(cli, file.as_ref())?;

    let mut file_writer;
    let destination: &mut dyn Write = match &config.out {
        Some(path) => {
            file_writer = io::BufWriter::new(fs::File::create(path)?);
            &mut file_writer
        }
        None => out,
    };

    let result = if cli.self_check {
        run_self_check(&config, destination)
    } else {
        match config.mode {
            Mode::Quantum | Mode::HvAnalytic | Mode::HvMc => {
                run_scan(&config, destination, err)
            }
            Mode::GenericCheck => run_generic_check(&config, destination),
            Mode::Invasiveness => run_invasiveness(&config, destination),
        }
    };
    destination.flush()?;
    result
}

/// Entry point used by `main`: runs the invocation against the process
/// streams and maps errors to exit codes.
pub fn execute(cli: &Cli) -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    match run_with(cli, &mut stdout.lock(), &mut stderr.lock()) {
        Ok(()) => 0,
        // A closed stdout (e.g. piping into `head`) is a normal way for a
        // consumer to stop reading, not a failure of ours.
        Err(CliError::Io(error)) if error.kind() == io::ErrorKind::BrokenPipe => 0,
        Err(error) => {
            eprintln!("error: {error}");
            error.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::parse_from(std::iter::once("lgsim").chain(args.iter().copied()))
    }

    fn merged(args: &[&str]) -> Result<Config, CliError> {
        Config::merge(&parse(args), None)
    }

    #[test]
    fn defaults_produce_a_quantum_csv_scan() {
        let config = merged(&[]).unwrap();
        assert_eq!(config.mode, Mode::Quantum);
        assert_eq!(config.omega.value(), 1.0);
        assert_eq!(config.t_min, 0.01);
        assert_eq!(config.t_max, PI);
        assert_eq!(config.points, 200);
        assert_eq!(config.beads, 100_000);
        assert_eq!(config.seed, 42);
        assert!(!config.measure);
        assert_eq!(config.format, OutputFormat::Csv);
    }

    #[test]
    fn flags_override_defaults() {
        let config = merged(&[
            "--mode",
            "hv-mc",
            "--omega",
            "2.5",
            "--beads",
            "500",
            "--seed",
            "7",
            "--measure",
            "--format",
            "json",
        ])
        .unwrap();
        assert_eq!(config.mode, Mode::HvMc);
        assert_eq!(config.omega.value(), 2.5);
        assert_eq!(config.beads, 500);
        assert_eq!(config.seed, 7);
        assert!(config.measure);
        assert_eq!(config.format, OutputFormat::Json);
    }

    #[test]
    fn validation_rejects_bad_settings_by_key() {
        for (args, needle) in [
            (&["--omega", "0"][..], "omega"),
            (&["--omega", "-1"][..], "omega"),
            (&["--t-min", "0"][..], "t-min"),
            (&["--t-max", "0.005"][..], "t-max"),
            (&["--points", "1"][..], "points"),
            (&["--mode", "hv-mc", "--beads", "99"][..], "beads"),
            (&["--beads", "0"][..], "beads"),
            (&["--mode", "generic-check", "--format", "csv"][..], "format"),
        ] {
            let error = merged(args).unwrap_err();
            let message = error.to_string();
            assert!(
                matches!(error, CliError::Config(_)) && message.contains(needle),
                "args {args:?} should fail mentioning '{needle}', got '{message}'"
            );
        }
    }

    #[test]
    fn measure_flags_override_config_file() {
        let file = FileConfig {
            measure: Some("true".to_owned()),
            ..FileConfig::default()
        };
        let config = Config::merge(&parse(&["--no-measure"]), Some(&file)).unwrap();
        assert!(!config.measure);
        let config = Config::merge(&parse(&[]), Some(&file)).unwrap();
        assert!(config.measure);
    }

    #[test]
    fn config_files_supply_missing_settings() {
        let file = FileConfig {
            mode: Some("hv-analytic".to_owned()),
            omega: Some("0.5".to_owned()),
            points: Some("17".to_owned()),
            ..FileConfig::default()
        };
        let config = Config::merge(&parse(&["--points", "23"]), Some(&file)).unwrap();
        assert_eq!(config.mode, Mode::HvAnalytic);
        assert_eq!(config.omega.value(), 0.5);
        assert_eq!(config.points, 23, "flags beat config values");
    }

    #[test]
    fn full_precision_round_trips_exactly() {
        for value in [
            0.0,
            1.0,
            -1.0,
            2.0 * SQRT_2,
            PI,
            0.1 + 0.2,
            f64::MIN_POSITIVE,
            1.0 / 3.0,
        ] {
            let text = full_precision(value);
            let parsed: f64 = text.parse().unwrap();
            assert_eq!(
                parsed.to_bits(),
                value.to_bits(),
                "{value} -> '{text}' -> {parsed} lost bits"
            );
        }
    }

    #[test]
    fn csv_header_matches_the_documented_layout() {
        assert_eq!(
            CSV_HEADER,
            "mode,omega,t,e12,e23,e34,e14,se12,se23,se34,se14,l_value,violated"
        );
    }

    #[test]
    fn scan_summary_finds_the_peak() {
        let config = merged(&["--t-min", "0.3", "--t-max", "1.5", "--points", "25"]).unwrap();
        let grid = TimeGrid::linspace(config.t_min, config.t_max, config.points).unwrap();
        let points = lg_scan(config.omega, &grid, &ScanSource::Quantum).unwrap();
        let summary = scan_summary(&points);
        // The grid contains pi/4 only approximately, but the maximum must be
        // close to the analytic peak and flagged as a violation.
        assert!(summary.max_abs_l > 2.8 && summary.max_abs_l <= 2.0 * SQRT_2 + 1e-12);
        assert!(summary.violations > 0);
    }

    #[test]
    fn self_check_passes_on_default_configuration() {
        let config = merged(&[]).unwrap();
        let mut buffer = Vec::new();
        run_self_check(&config, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(text.lines().count(), 8);
        assert!(text.lines().all(|line| line.ends_with(": ok")));
    }
}
