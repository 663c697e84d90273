//! JSON run configuration, grid evaluation and CSV/JSON rendering.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::gaussian::CovMatrix;
use crate::oem::{check_stability, solve_lyapunov, CavityParams, Channel, LinearModel, SystemParams};
use crate::spectra::{output_cm, FilterBank, FilterSpec, IntegrationDiagnostics};
use crate::swap::{evaluate, SiteState, SwapResult};

const TWO_PI: f64 = std::f64::consts::TAU;

pub const CSV_HEADER: &str =
    "swept_value,EN_ww,EN_cc,mu_b,mu_wb,mu_bc,eta_ww_shortcut,eta_ww_measured,stable,certified";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub wavelength_m: f64,
    pub power_w: f64,
    /// Amplitude decay rate κ/2π (Hz).
    pub kappa_hz: f64,
    /// Δ/2π (Hz).
    pub detuning_hz: f64,
    /// Single-photon coupling g/2π (Hz).
    pub g_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub omega_m_hz: f64,
    pub q_m: f64,
    pub mass_kg: f64,
    pub temperature_k: f64,
    pub bell: CavityConfig,
    pub cert: CavityConfig,
    pub microwave: CavityConfig,
}

/// `tau` in units of `1/ω_m`, `center` in units of `ω_m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub tau: f64,
    pub center: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltersConfig {
    pub bell: FilterConfig,
    pub cert: FilterConfig,
    pub microwave: FilterConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// τω_m of every filter.
    Tau,
    /// Microwave drive power (W).
    PowerW,
    /// Bath temperature (K).
    Temperature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default = "default_scale")]
    pub scale: Scale,
}

fn default_scale() -> Scale {
    Scale::Linear
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: OutputFormat,
}

fn default_format() -> OutputFormat {
    OutputFormat::Csv
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub filters: FiltersConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    /// Dotted field path, or `line:column` for parse errors.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug)]
pub enum SweepError {
    Config(Vec<Diagnostic>),
    Io(String),
    AllUnstable { points: usize },
    Numerical(Error),
}

impl SweepError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SweepError::Config(_) => 2,
            SweepError::AllUnstable { .. } => 3,
            SweepError::Io(_) => 4,
            SweepError::Numerical(_) => 1,
        }
    }
}

impl fmt::Display for SweepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepError::Config(d) => {
                writeln!(f, "invalid configuration:")?;
                for x in d {
                    writeln!(f, "  {x}")?;
                }
                Ok(())
            }
            SweepError::Io(m) => write!(f, "I/O error: {m}"),
            SweepError::AllUnstable { points } => write!(f, "all {points} grid point(s) are dynamically unstable"),
            SweepError::Numerical(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SweepError {}

pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, SweepError> {
    serde_json::from_str(text).map_err(|e| {
        SweepError::Config(vec![Diagnostic {
            location: format!("{origin}:{}:{}", e.line(), e.column()),
            message: e.to_string(),
        }])
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, SweepError> {
    let text = std::fs::read_to_string(path).map_err(|e| SweepError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

impl CavityConfig {
    fn to_params(&self) -> CavityParams {
        CavityParams {
            wavelength: self.wavelength_m,
            power: self.power_w,
            kappa: TWO_PI * self.kappa_hz,
            detuning: TWO_PI * self.detuning_hz,
            g: TWO_PI * self.g_hz,
        }
    }

    fn from_params(p: &CavityParams) -> Self {
        Self {
            wavelength_m: p.wavelength,
            power_w: p.power,
            kappa_hz: p.kappa / TWO_PI,
            detuning_hz: p.detuning / TWO_PI,
            g_hz: p.g / TWO_PI,
        }
    }

    fn check(&self, path: &str, out: &mut Vec<Diagnostic>) {
        positive(out, &format!("{path}.wavelength_m"), self.wavelength_m);
        positive(out, &format!("{path}.kappa_hz"), self.kappa_hz);
        non_negative(out, &format!("{path}.power_w"), self.power_w);
        non_negative(out, &format!("{path}.g_hz"), self.g_hz);
        finite(out, &format!("{path}.detuning_hz"), self.detuning_hz);
    }
}

fn push(out: &mut Vec<Diagnostic>, location: &str, message: String) {
    out.push(Diagnostic { location: location.to_string(), message });
}

fn finite(out: &mut Vec<Diagnostic>, field: &str, v: f64) -> bool {
    if !v.is_finite() {
        push(out, field, format!("must be finite, got {v}"));
        return false;
    }
    true
}

fn positive(out: &mut Vec<Diagnostic>, field: &str, v: f64) {
    if finite(out, field, v) && v <= 0.0 {
        push(out, field, format!("must be positive, got {v}"));
    }
}

fn non_negative(out: &mut Vec<Diagnostic>, field: &str, v: f64) {
    if finite(out, field, v) && v < 0.0 {
        push(out, field, format!("must be non-negative, got {v}"));
    }
}

impl SystemConfig {
    pub fn to_params(&self) -> SystemParams {
        SystemParams {
            omega_m: TWO_PI * self.omega_m_hz,
            q_m: self.q_m,
            mass: self.mass_kg,
            temperature: self.temperature_k,
            bell: self.bell.to_params(),
            cert: self.cert.to_params(),
            microwave: self.microwave.to_params(),
        }
    }

    pub fn from_params(p: &SystemParams) -> Self {
        Self {
            omega_m_hz: p.omega_m / TWO_PI,
            q_m: p.q_m,
            mass_kg: p.mass,
            temperature_k: p.temperature,
            bell: CavityConfig::from_params(&p.bell),
            cert: CavityConfig::from_params(&p.cert),
            microwave: CavityConfig::from_params(&p.microwave),
        }
    }
}

impl RunConfig {
    /// Reference transducer, filters centred on their detunings, τω_m = 500.
    pub fn reference() -> Self {
        let p = SystemParams::reference();
        let f = |ch: Channel| FilterConfig { tau: 500.0, center: p.cavity(ch).detuning / p.omega_m };
        Self {
            system: SystemConfig::from_params(&p),
            filters: FiltersConfig { bell: f(Channel::Bell), cert: f(Channel::Cert), microwave: f(Channel::Microwave) },
            sweep: SweepConfig { variable: SweepVariable::Tau, start: 500.0, stop: 500.0, points: 1, scale: Scale::Linear },
            output: None,
        }
    }

    /// Field-level checks; does not touch the physics.
    pub fn check(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let s = &self.system;
        positive(&mut out, "system.omega_m_hz", s.omega_m_hz);
        positive(&mut out, "system.mass_kg", s.mass_kg);
        if finite(&mut out, "system.q_m", s.q_m) && s.q_m <= 1.0 {
            push(&mut out, "system.q_m", format!("must exceed 1, got {}", s.q_m));
        }
        non_negative(&mut out, "system.temperature_k", s.temperature_k);
        s.bell.check("system.bell", &mut out);
        s.cert.check("system.cert", &mut out);
        s.microwave.check("system.microwave", &mut out);
        for (name, f) in [("bell", &self.filters.bell), ("cert", &self.filters.cert), ("microwave", &self.filters.microwave)] {
            positive(&mut out, &format!("filters.{name}.tau"), f.tau);
            finite(&mut out, &format!("filters.{name}.center"), f.center);
        }
        let sw = &self.sweep;
        if sw.points == 0 {
            push(&mut out, "sweep.points", "must be at least 1".into());
        }
        let ends_ok = finite(&mut out, "sweep.start", sw.start) & finite(&mut out, "sweep.stop", sw.stop);
        if ends_ok {
            if sw.points > 1 && !(sw.start < sw.stop) {
                push(&mut out, "sweep.stop", format!("must exceed sweep.start ({}) when points > 1", sw.start));
            }
            if sw.points == 1 && sw.start != sw.stop {
                push(&mut out, "sweep.stop", "must equal sweep.start for a single-point run".into());
            }
            if sw.scale == Scale::Log && sw.start <= 0.0 {
                push(&mut out, "sweep.start", "must be positive on a log scale".into());
            }
            let field = "sweep.start";
            match sw.variable {
                SweepVariable::Tau if sw.start <= 0.0 => push(&mut out, field, "tau must be positive".into()),
                SweepVariable::PowerW | SweepVariable::Temperature if sw.start < 0.0 => {
                    push(&mut out, field, "must be non-negative".into())
                }
                _ => {}
            }
        }
        out
    }

    pub fn grid(&self) -> Vec<f64> {
        let sw = &self.sweep;
        let n = sw.points;
        if n == 1 {
            return vec![sw.start];
        }
        (0..n)
            .map(|k| {
                let t = k as f64 / (n - 1) as f64;
                if k == n - 1 {
                    return sw.stop;
                }
                match sw.scale {
                    Scale::Linear => sw.start + (sw.stop - sw.start) * t,
                    Scale::Log => (sw.start.ln() + (sw.stop.ln() - sw.start.ln()) * t).exp(),
                }
            })
            .collect()
    }

    /// Physical parameters and filters with the swept variable set to `value`.
    pub fn point(&self, value: f64) -> (SystemParams, FilterBank) {
        let mut p = self.system.to_params();
        let mut filters = self.filters;
        match self.sweep.variable {
            SweepVariable::Tau => {
                filters.bell.tau = value;
                filters.cert.tau = value;
                filters.microwave.tau = value;
            }
            SweepVariable::PowerW => p.microwave.power = value,
            SweepVariable::Temperature => p.temperature = value,
        }
        let wm = p.omega_m;
        let spec = |f: FilterConfig| FilterSpec { tau: f.tau / wm, center: f.center * wm };
        let bank = FilterBank { bell: spec(filters.bell), cert: spec(filters.cert), microwave: spec(filters.microwave) };
        (p, bank)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EndpointCheck {
    pub swept_value: f64,
    pub stable: bool,
    pub spectral_abscissa: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub points: usize,
    pub endpoints: Vec<EndpointCheck>,
}

/// Schema and field checks plus a stability pre-flight at the sweep endpoints.
pub fn validate(cfg: &RunConfig) -> Result<ValidationReport, SweepError> {
    let diags = cfg.check();
    if !diags.is_empty() {
        return Err(SweepError::Config(diags));
    }
    let grid = cfg.grid();
    let mut ends = vec![grid[0]];
    if grid.len() > 1 {
        ends.push(*grid.last().unwrap());
    }
    let mut endpoints = Vec::new();
    for v in ends {
        let (p, _) = cfg.point(v);
        let model = LinearModel::from_params(&p).map_err(config_error)?;
        let st = check_stability(&model).map_err(SweepError::Numerical)?;
        endpoints.push(EndpointCheck { swept_value: v, stable: st.stable, spectral_abscissa: st.spectral_abscissa });
    }
    Ok(ValidationReport { points: grid.len(), endpoints })
}

fn config_error(e: Error) -> SweepError {
    match e {
        Error::Validation(m) => SweepError::Config(vec![Diagnostic { location: "system".into(), message: m }]),
        other => SweepError::Numerical(other),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub swept_value: f64,
    #[serde(rename = "EN_ww")]
    pub en_ww: Option<f64>,
    #[serde(rename = "EN_cc")]
    pub en_cc: Option<f64>,
    pub mu_b: Option<f64>,
    pub mu_wb: Option<f64>,
    pub mu_bc: Option<f64>,
    pub eta_ww_shortcut: Option<f64>,
    pub eta_ww_measured: Option<f64>,
    pub stable: bool,
    pub certified: bool,
}

impl SweepRecord {
    fn unstable(swept_value: f64) -> Self {
        Self {
            swept_value,
            en_ww: None,
            en_cc: None,
            mu_b: None,
            mu_wb: None,
            mu_bc: None,
            eta_ww_shortcut: None,
            eta_ww_measured: None,
            stable: false,
            certified: false,
        }
    }

    fn from_result(swept_value: f64, r: &SwapResult) -> Self {
        Self {
            swept_value,
            en_ww: Some(r.en_ww),
            en_cc: Some(r.en_cc),
            mu_b: Some(r.mu_b),
            mu_wb: Some(r.mu_wb),
            mu_bc: Some(r.mu_bc),
            eta_ww_shortcut: Some(r.eta_ww_shortcut),
            eta_ww_measured: Some(r.eta_ww),
            stable: true,
            certified: r.certified,
        }
    }
}

/// Everything computed at one stable grid point.
#[derive(Clone, Debug, Serialize)]
pub struct PointDetail {
    pub swept_value: f64,
    pub spectral_abscissa: f64,
    pub intracavity: CovMatrix,
    pub site: CovMatrix,
    pub integration: IntegrationDiagnostics,
    pub swap: SwapResult,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointOutcome {
    pub record: SweepRecord,
    pub detail: Option<PointDetail>,
}

pub fn evaluate_point(cfg: &RunConfig, value: f64) -> Result<PointOutcome, Error> {
    let (p, filters) = cfg.point(value);
    let model = LinearModel::from_params(&p)?;
    let st = check_stability(&model)?;
    if !st.stable {
        return Ok(PointOutcome { record: SweepRecord::unstable(value), detail: None });
    }
    let intracavity = solve_lyapunov(&model)?;
    let out = output_cm(&model, &filters)?;
    let site = SiteState::from_output(&out)?;
    let swap = evaluate(&site)?;
    Ok(PointOutcome {
        record: SweepRecord::from_result(value, &swap),
        detail: Some(PointDetail {
            swept_value: value,
            spectral_abscissa: st.spectral_abscissa,
            intracavity,
            site: site.cm().clone(),
            integration: out.diagnostics,
            swap,
        }),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutput {
    pub variable: SweepVariable,
    pub points: Vec<PointOutcome>,
}

impl SweepOutput {
    pub fn records(&self) -> Vec<SweepRecord> {
        self.points.iter().map(|p| p.record.clone()).collect()
    }

    pub fn stable_count(&self) -> usize {
        self.points.iter().filter(|p| p.record.stable).count()
    }

    pub fn certified_count(&self) -> usize {
        self.points.iter().filter(|p| p.record.certified).count()
    }

    pub fn summary(&self) -> String {
        format!(
            "points={} stable={} certified={}",
            self.points.len(),
            self.stable_count(),
            self.certified_count()
        )
    }
}

/// Evaluates every grid point in parallel; results keep grid order.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepOutput, SweepError> {
    let diags = cfg.check();
    if !diags.is_empty() {
        return Err(SweepError::Config(diags));
    }
    cfg.system.to_params().validate().map_err(config_error)?;
    let points = cfg
        .grid()
        .into_par_iter()
        .map(|v| evaluate_point(cfg, v))
        .collect::<Result<Vec<_>, _>>()
        .map_err(SweepError::Numerical)?;
    Ok(SweepOutput { variable: cfg.sweep.variable, points })
}

fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn render_csv(records: &[SweepRecord]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
    for r in records {
        let row = [
            fmt_float(r.swept_value),
            fmt_opt(r.en_ww),
            fmt_opt(r.en_cc),
            fmt_opt(r.mu_b),
            fmt_opt(r.mu_wb),
            fmt_opt(r.mu_bc),
            fmt_opt(r.eta_ww_shortcut),
            fmt_opt(r.eta_ww_measured),
            r.stable.to_string(),
            r.certified.to_string(),
        ];
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRecord>, String> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| e.to_string())?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(format!("unexpected header {header:?}"));
    }
    rdr.deserialize().map(|r| r.map_err(|e| e.to_string())).collect()
}

pub fn render_json(out: &SweepOutput) -> String {
    let mut s = serde_json::to_string_pretty(out).expect("serializable output");
    s.push('\n');
    s
}

pub fn render(out: &SweepOutput, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => render_csv(&out.records()),
        OutputFormat::Json => render_json(out),
    }
}

pub fn write_output(path: &Path, contents: &str) -> Result<(), SweepError> {
    std::fs::write(path, contents).map_err(|e| SweepError::Io(format!("{}: {e}", path.display())))
}
