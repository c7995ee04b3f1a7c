//! Command-line front end.
//!
//! Every run is described by an [`ExperimentConfig`]: values come from flags,
//! then an optional TOML file given with `--config`, then defaults. Flags win.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use crate::adaptive::{delta_star_ada, AdaptiveConstants, AdaptiveTest};
use crate::detectors::{dispatch, DetectorKind, DetectorSpec, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::harness::{
    self, calibrate_adaptive, calibrate_cutoff, estimate_risk, mu_sweep, phase_grid,
    rate_comparison_study, svg_line_plot, ArtifactMeta, Procedure, Study, SupportPolicy,
};
use crate::lower_bound::{
    binom_bound_report, mc_second_moment_likelihood, mc_second_moment_overlap,
    second_moment_exact, SecondMomentMethod,
};
use crate::model::{sample_observation, Matrix, PlantedMean, ProblemShape};
use crate::rates::rate_breakdown;
use crate::rng::SeedSpec;

/// Environment variable holding the default root seed.
pub const SEED_ENV: &str = "SUBDETECT_SEED";
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Rate,
    Detect,
    Calibrate,
    Risk,
    Sweep,
    LowerBound,
    Study,
    Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffChoice {
    Theoretical,
    Calibrated,
}

/// Everything a run depends on. Unset fields take per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_multiple: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiples: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detector: Option<DetectorKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adaptive: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff_mode: Option<CutoffChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration_reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<SupportPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<SecondMomentMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study: Option<Study>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "big_int")]
    pub cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "big_int")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

macro_rules! merge_fields {
    ($a:ident, $b:ident; $($f:ident),*) => {
        ExperimentConfig { $($f: $a.$f.or($b.$f)),* }
    };
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("config serialization: {e}")))
    }

    /// Field-wise `self.or(fallback)`.
    pub fn or(self, fallback: ExperimentConfig) -> Self {
        let (a, b) = (self, fallback);
        merge_fields!(a, b; command, d1, d2, s1, s2, mu, mu_multiple, multiples, detector,
            adaptive, cutoff_mode, level, reps, calibration_reps, eta, support, method, study,
            pairs, cap, seed, threads, input, out, svg, format)
    }

    /// The part of the config that determines results: no thread count or
    /// output paths.
    pub fn canonical(&self) -> Self {
        Self {
            threads: None,
            out: None,
            svg: None,
            ..self.clone()
        }
    }

    pub fn meta(&self) -> Result<ArtifactMeta> {
        Ok(ArtifactMeta::new(self.canonical().to_toml()?.as_bytes(), self.root_seed()))
    }

    pub fn root_seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn shape(&self) -> Result<ProblemShape> {
        let need = |v: Option<usize>, name: &str| v.ok_or_else(|| Error::Config(format!("missing --{name}")));
        ProblemShape::new(need(self.d1, "d1")?, need(self.d2, "d2")?, need(self.s1, "s1")?, need(self.s2, "s2")?)
    }

    fn level(&self) -> f64 {
        self.level.unwrap_or(0.1)
    }

    fn reps(&self) -> usize {
        self.reps.unwrap_or(1000)
    }

    fn calibration_reps(&self) -> usize {
        self.calibration_reps.unwrap_or(1000)
    }

    fn cap(&self) -> u64 {
        self.cap.unwrap_or(DEFAULT_ENUMERATION_CAP)
    }

    fn seed_spec(&self) -> SeedSpec {
        SeedSpec::new(self.root_seed(), 0)
    }

    fn calibrated(&self) -> bool {
        self.cutoff_mode == Some(CutoffChoice::Calibrated)
    }

    fn mu(&self, shape: &ProblemShape) -> Result<f64> {
        match (self.mu, self.mu_multiple) {
            (Some(mu), _) => Ok(mu),
            (None, Some(m)) => Ok(m * rate_breakdown(shape)?.rate.sqrt()),
            (None, None) => Err(Error::Config("missing --mu or --mu-multiple".into())),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "subdetect", version, about = "Minimax detection of a planted submatrix")]
struct Cli {
    /// What to run; may also come from the config file.
    #[arg(value_enum)]
    command: Option<Command>,
    /// TOML file with default values for every flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d1: Option<usize>,
    #[arg(long)]
    d2: Option<usize>,
    #[arg(long)]
    s1: Option<usize>,
    #[arg(long)]
    s2: Option<usize>,
    /// Signal strength.
    #[arg(long, conflicts_with = "mu_multiple")]
    mu: Option<f64>,
    /// Signal strength as a multiple of sqrt(R).
    #[arg(long)]
    mu_multiple: Option<f64>,
    /// Comma-separated multiples of sqrt(R) for `sweep`.
    #[arg(long, value_delimiter = ',')]
    multiples: Option<Vec<f64>>,
    /// A constituent statistic; defaults to the one the rate selects.
    #[arg(long, value_parser = parse_detector)]
    detector: Option<DetectorKind>,
    /// Use the test that does not know the sparsity.
    #[arg(long)]
    adaptive: bool,
    #[arg(long, value_enum)]
    cutoff_mode: Option<CutoffChoice>,
    #[arg(long)]
    level: Option<f64>,
    /// Monte Carlo replicates.
    #[arg(long)]
    reps: Option<usize>,
    /// Null replicates used to calibrate cutoffs.
    #[arg(long)]
    calibration_reps: Option<usize>,
    /// Target risk for the sweep crossing summary.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_parser = parse_support)]
    support: Option<SupportPolicy>,
    /// exact-hypergeometric, binomial-domination-bound, monte-carlo-overlap or monte-carlo-likelihood.
    #[arg(long, value_parser = parse_method)]
    method: Option<SecondMomentMethod>,
    #[arg(long, value_parser = parse_study)]
    study: Option<Study>,
    /// Comma-separated `s1xs2` cells for `phase`.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    pairs: Option<Vec<(usize, usize)>>,
    /// Largest number of subsets a Bonferroni scan may visit.
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Matrix for `detect`, as CSV of reals without header.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional SVG plot for `sweep`.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

/// TOML integers are signed, so values above `i64::MAX` travel as strings.
mod big_int {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if i64::try_from(*x).is_ok() => s.serialize_some(x),
            Some(x) => s.serialize_some(&x.to_string()),
            None => s.serialize_none(),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Int(x)) => Ok(Some(x)),
            Some(Repr::Str(t)) => t.parse().map(Some).map_err(de::Error::custom),
        }
    }
}

fn parse_detector(s: &str) -> std::result::Result<DetectorKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_study(s: &str) -> std::result::Result<Study, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_kebab<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_support(s: &str) -> std::result::Result<SupportPolicy, String> {
    parse_kebab(s)
}

fn parse_method(s: &str) -> std::result::Result<SecondMomentMethod, String> {
    parse_kebab(s)
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once('x').ok_or_else(|| format!("expected s1xs2, got {s:?}"))?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

impl Cli {
    fn into_config(self) -> Result<ExperimentConfig> {
        let flags = ExperimentConfig {
            command: self.command,
            d1: self.d1,
            d2: self.d2,
            s1: self.s1,
            s2: self.s2,
            mu: self.mu,
            mu_multiple: self.mu_multiple,
            multiples: self.multiples,
            detector: self.detector,
            adaptive: self.adaptive.then_some(true),
            cutoff_mode: self.cutoff_mode,
            level: self.level,
            reps: self.reps,
            calibration_reps: self.calibration_reps,
            eta: self.eta,
            support: self.support,
            method: self.method,
            study: self.study,
            pairs: self.pairs,
            cap: self.cap,
            seed: self.seed,
            threads: self.threads,
            input: self.input,
            out: self.out,
            svg: self.svg,
            format: self.format,
        };
        let file = match &self.config {
            Some(p) => ExperimentConfig::from_toml(&std::fs::read_to_string(p)?)?,
            None => ExperimentConfig::default(),
        };
        let mut cfg = flags.or(file);
        if cfg.seed.is_none() {
            if let Ok(v) = std::env::var(SEED_ENV) {
                let seed = v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not a u64")))?;
                cfg.seed = Some(seed);
            }
        }
        Ok(cfg)
    }
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::EnumerationCap { .. } => 3,
        Error::Io(_) | Error::Overflow(_) => 1,
        _ => 2,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidShape(_) => "invalid-shape",
        Error::InvalidSupport(_) => "invalid-support",
        Error::InvalidArgument(_) => "invalid-argument",
        Error::DimensionMismatch { .. } => "dimension-mismatch",
        Error::NonFinite { .. } => "non-finite",
        Error::EnumerationCap { .. } => "enumeration-cap",
        Error::InsufficientReplicates(_) => "insufficient-replicates",
        Error::Overflow(_) => "overflow",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
    }
}

fn report_error(kind: &str, message: &str, code: i32) -> i32 {
    let v = serde_json::json!({ "error": kind, "message": message, "exit_code": code });
    eprintln!("{v}");
    code
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(std::io::stdout(), "{e}");
                return 0;
            }
            return report_error("config", e.to_string().trim(), 2);
        }
    };
    match cli.into_config().and_then(|cfg| execute(&cfg)) {
        Ok(()) => 0,
        Err(e) => report_error(error_kind(&e), &e.to_string(), exit_code(&e)),
    }
}

/// Run a fully resolved config.
pub fn execute(cfg: &ExperimentConfig) -> Result<()> {
    let command = cfg.command.ok_or_else(|| Error::Config("missing command".into()))?;
    let meta = cfg.meta()?;
    harness::with_threads(cfg.threads, || match command {
        Command::Rate => cmd_rate(cfg, &meta),
        Command::Detect => cmd_detect(cfg, &meta),
        Command::Calibrate => cmd_calibrate(cfg, &meta),
        Command::Risk => cmd_risk(cfg, &meta),
        Command::Sweep => cmd_sweep(cfg, &meta),
        Command::LowerBound => cmd_lower_bound(cfg, &meta),
        Command::Study => cmd_study(cfg, &meta),
        Command::Phase => cmd_phase(cfg, &meta),
    })?
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(cfg: &ExperimentConfig, meta: &ArtifactMeta, result: &T) -> Result<()> {
    let doc = serde_json::json!({
        "config_hash": meta.config_hash,
        "root_seed": meta.root_seed,
        "version": meta.version,
        "result": result,
    });
    let mut w = sink(cfg.out.as_deref())?;
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

fn json_only(cfg: &ExperimentConfig, what: &str) -> Result<()> {
    match cfg.format {
        Some(Format::Csv) => Err(Error::Config(format!("{what} output is JSON only"))),
        _ => Ok(()),
    }
}

fn csv_default(cfg: &ExperimentConfig) -> Format {
    cfg.format.unwrap_or(Format::Csv)
}

fn procedure(cfg: &ExperimentConfig, shape: &ProblemShape) -> Result<Procedure> {
    let (seed, cap) = (cfg.seed_spec(), cfg.cap());
    if cfg.adaptive == Some(true) {
        let test = AdaptiveTest::new(shape.d1, shape.d2, &AdaptiveConstants::default())?;
        return Ok(Procedure::Adaptive(if cfg.calibrated() {
            calibrate_adaptive(&test, cfg.level(), cfg.calibration_reps(), seed, cap)?.0
        } else {
            test
        }));
    }
    let kind = match cfg.detector {
        Some(k) => k,
        None => dispatch(&rate_breakdown(shape)?),
    };
    let spec = DetectorSpec::theoretical(kind, shape, &Default::default())?;
    Ok(Procedure::Fixed(if cfg.calibrated() {
        calibrate_cutoff(&spec, cfg.level(), cfg.calibration_reps(), seed, cap)?
    } else {
        spec
    }))
}

fn cmd_rate(cfg: &ExperimentConfig, meta: &ArtifactMeta) -> Result<()> {
    json_only(cfg, "rate")?;
    emit_json(cfg, meta, &rate_breakdown(&cfg.shape()?)?)
}

fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(e.to_string()))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Config(format!("row {i}: {f:?} is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

fn cmd_detect(cfg: &ExperimentConfig, meta: &ArtifactMeta) -> Result<()> {
    json_only(cfg, "detect")?;
    let (y, shape) = match &cfg.input {
        Some(path) => {
            let y = read_matrix(path)?;
            y.check_finite()?;
            let need = |v: Option<usize>, n: &str| v.ok_or_else(|| Error::Config(format!("missing --{n}")));
            let shape = ProblemShape::new(y.rows(), y.cols(), need(cfg.s1, "s1")?, need(cfg.s2, "s2")?)?;
            for (flag, given, actual) in [("d1", cfg.d1, y.rows()), ("d2", cfg.d2, y.cols())] {
                if given.is_some_and(|g| g != actual) {
                    return Err(Error::DimensionMismatch {
                        expected: format!("--{flag} {}", given.unwrap_or_default()),
                        got: actual.to_string(),
                    });
                }
            }
            (y, shape)
        }
        None => {
            let shape = cfg.shape()?;
            let mu = cfg.mu(&shape).unwrap_or(0.0);
            let planted = (mu != 0.0).then(|| PlantedMean::canonical(shape, mu)).transpose()?;
            (sample_observation(&shape, planted.as_ref(), cfg.seed_spec())?.values, shape)
        }
    };
    match procedure(cfg, &shape)? {
        Procedure::Fixed(spec) => emit_json(cfg, meta, &spec.evaluate(&y, cfg.cap())?),
        Procedure::Adaptive(test) => emit_json(cfg, meta, &delta_star_ada(&y, &test, cfg.cap())?),
    }
}

#[derive(Debug, Clone, Serialize)]
struct CalibrationRow {
    detector: String,
    tau: Option<f64>,
    theoretical_cutoff: f64,
    calibrated_cutoff: Option<f64>,
    level: f64,
    n_reps: usize,
    skipped: Option<String>,
}

fn cmd_calibrate(cfg: &ExperimentConfig, meta: &ArtifactMeta) -> Result<()> {
    let shape = cfg.shape()?;
    let (level, n, seed, cap) = (cfg.level(), cfg.calibration_reps(), cfg.seed_spec(), cfg.cap());
    let mut rows = Vec::new();
    if cfg.adaptive == Some(true) {
        let test = AdaptiveTest::new(shape.d1, shape.d2, &AdaptiveConstants::default())?;
        let (_, factor) = calibrate_adaptive(&test, level, n, seed, cap)?;
        rows.push(CalibrationRow {
            detector: "adaptive".into(),
            tau: None,
            theoretical_cutoff: 1.0,
            calibrated_cutoff: Some(factor),
            level,
            n_reps: n,
            skipped: None,
        });
    } else {
        let kinds = cfg.detector.map_or(DetectorKind::ALL.to_vec(), |k| vec![k]);
        for kind in kinds {
            let spec = DetectorSpec::theoretical(kind, &shape, &Default::default())?;
            let mut row = CalibrationRow {
                detector: kind.name().into(),
                tau: spec.tau.map(|t| t.tau),
                theoretical_cutoff: spec.cutoff,
                calibrated_cutoff: None,
                level,
                n_reps: n,
                skipped: None,
            };
            match calibrate_cutoff(&spec, level, n, seed, cap) {
                Ok(c) => row.calibrated_cutoff = Some(c.cutoff),
                Err(e @ Error::EnumerationCap { .. }) if cfg.detector.is_none() => row.skipped = Some(e.to_string()),
                Err(e) => return Err(e),
            }
            rows.push(row);
        }
    }
    match csv_default(cfg) {
        Format::Json => emit_json(cfg, meta, &rows),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink(cfg.out.as_deref())?);
            let io = |e: csv::Error| Error::Io(e.to_string());
            w.write_record([
                "schema", "config_hash", "root_seed", "version", "d1", "d2", "s1", "s2", "detector", "tau",
                "theoretical_cutoff", "calibrated_cutoff", "level", "n_reps", "skipped",
            ])
            .map_err(io)?;
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            for r in &rows {
                w.write_record([
                    harness::CSV_SCHEMA_VERSION.to_string(),
                    meta.config_hash.clone(),
                    meta.root_seed.to_string(),
                    meta.version.clone(),
                    shape.d1.to_string(),
                    shape.d2.to_string(),
                    shape.s1.to_string(),
                    shape.s2.to_string(),
                    r.detector.clone(),
                    opt(r.tau),
                    r.theoretical_cutoff.to_string(),
                    opt(r.calibrated_cutoff),
                    r.level.to_string(),
                    r.n_reps.to_string(),
                    r.skipped.clone().unwrap_or_default(),
                ])
                .map_err(io)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn cmd_risk(cfg: &ExperimentConfig, meta: &ArtifactMeta) -> Result<()> {
    let shape = cfg.shape()?;
    let mu = cfg.mu(&shape)?;
    let proc = procedure(cfg, &shape)?;
    let support = cfg.support.unwrap_or(SupportPolicy::Canonical);
    let est = estimate_risk(&proc, &shape, mu, cfg.reps(), cfg.seed_spec(), support, cfg.cap())?;
    match cfg.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(cfg, meta, &est),
        Format::Csv => {
            let rate = rate_breakdown(&shape)?.rate;
            let multiple = if rate > 0.0 { mu / rate.sqrt() } else { f64::NAN };
            let sweep = harness::SweepResult {
                shape,
                rate,
                multiples: vec![multiple],
                crossing: harness::Crossing::from_points(&[multiple], &[est.risk], cfg.eta.unwrap_or(0.2)),
                points: vec![est],
            };
            sweep.write_csv(sink(cfg.out.as_deref())?, meta)
        }
    }
}

fn cmd_sweep(cfg: &ExperimentConfig, meta: &ArtifactMeta) -> Result<()> {
    let shape = cfg.shape()?;
    let multiples = cfg.multiples.clone().unwrap_or_else(|| vec![0.0, 1.0, 2.0, 4.0, 8.0, 16.0]);
    let proc = procedure(cfg, &shape)?;
    let support = cfg.support.unwrap_or(SupportPolicy::Canonical);
    let eta = cfg.eta.unwrap_or(0.2);
    let result = mu_sweep(&proc, &shape, &multiples, cfg.reps(), cfg.seed_spec(), support, cfg.cap(), eta)?;
    if let Some(path) = &cfg.svg {
        let pts = result.multiples.iter().zip(&result.points).map(|(&m, p)| (m, p.risk)).collect();
        let svg = svg_line_plot(&format!("risk at {shape}"), "multiple of sqrt(R)", &[(proc.name(), pts)]);
        std::fs::write(path, svg)?;
    }
    match csv_default(cfg) {
        Format::Json => emit_json(cfg, meta, &result),
        Format::Csv => result.write_csv(sink(cfg.out.as_deref())?, meta),
    }
}

fn cmd_lower_bound(cfg: &ExperimentConfig, meta: &ArtifactMeta) -> Result<()> {
    json_only(cfg, "lower-bound")?;
    let shape = cfg.shape()?;
    let mu = cfg.mu(&shape)?;
    let report = match cfg.method.unwrap_or(SecondMomentMethod::ExactHypergeometric) {
        SecondMomentMethod::ExactHypergeometric => second_moment_exact(&shape, mu)?,
        SecondMomentMethod::BinomialDominationBound => binom_bound_report(&shape, mu)?,
        SecondMomentMethod::MonteCarloOverlap => mc_second_moment_overlap(&shape, mu, cfg.reps(), cfg.seed_spec())?,
        SecondMomentMethod::MonteCarloLikelihood => {
            mc_second_moment_likelihood(&shape, mu, cfg.reps(), cfg.seed_spec(), cfg.cap())?
        }
    };
    emit_json(cfg, meta, &report)
}

fn cmd_study(cfg: &ExperimentConfig, meta: &ArtifactMeta) -> Result<()> {
    let study = cfg.study.ok_or_else(|| Error::Config("missing --study".into()))?;
    let table = rate_comparison_study(&study.default_shapes(), study)?;
    match csv_default(cfg) {
        Format::Json => emit_json(cfg, meta, &table),
        Format::Csv => table.write_csv(sink(cfg.out.as_deref())?, meta),
    }
}

fn cmd_phase(cfg: &ExperimentConfig, meta: &ArtifactMeta) -> Result<()> {
    let need = |v: Option<usize>, n: &str| v.ok_or_else(|| Error::Config(format!("missing --{n}")));
    let (d1, d2) = (need(cfg.d1, "d1")?, need(cfg.d2, "d2")?);
    let pairs = cfg.pairs.clone().unwrap_or_else(|| {
        let sizes = [1, 2, 4, 8];
        sizes.iter().flat_map(|&a| sizes.iter().map(move |&b| (a, b))).collect()
    });
    let multiple = cfg.mu_multiple.unwrap_or(4.0);
    let cells = phase_grid(
        d1,
        d2,
        &pairs,
        multiple,
        cfg.level(),
        cfg.calibration_reps(),
        cfg.reps(),
        cfg.seed_spec(),
        cfg.cap(),
    )?;
    match csv_default(cfg) {
        Format::Json => emit_json(cfg, meta, &cells),
        Format::Csv => harness::write_phase_csv(&cells, sink(cfg.out.as_deref())?, meta),
    }
}
