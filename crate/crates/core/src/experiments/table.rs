use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::liouvillian::Frame;
use crate::solvers::SteadyMethod;

use super::config::ExperimentConfig;

/// One output record. Sweep coordinates are always filled; metrics are
/// `None` on failed rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResultRow {
    pub n: usize,
    pub nbar: f64,
    pub gamma_over_kappa: f64,
    pub reservoir_count: usize,
    /// Engineered modes, pump first, `;`-separated in CSV.
    pub reservoir_modes: Vec<usize>,
    pub frame: Frame,
    pub method: Option<SteadyMethod>,
    pub percent: Option<f64>,
    /// Trial index; `-1` marks a trial-mean row.
    pub trial: Option<i64>,
    /// Root seed of a randomized row, `-1` otherwise.
    pub seed: i64,
    pub tau: Option<f64>,
    pub time: Option<f64>,
    pub fidelity: Option<f64>,
    pub purity: Option<f64>,
    pub concurrence: Option<f64>,
    pub residual: Option<f64>,
    pub mode_occupations: Option<Vec<f64>>,
    pub trace_drift: Option<f64>,
    pub wall_time_seconds: f64,
    pub failed: bool,
    pub error: String,
}

impl SweepResultRow {
    pub(crate) fn at(n: usize, nbar: f64, gamma_over_kappa: f64, modes: Vec<usize>, frame: Frame) -> Self {
        SweepResultRow {
            n,
            nbar,
            gamma_over_kappa,
            reservoir_count: modes.len(),
            reservoir_modes: modes,
            frame,
            method: None,
            percent: None,
            trial: None,
            seed: -1,
            tau: None,
            time: None,
            fidelity: None,
            purity: None,
            concurrence: None,
            residual: None,
            mode_occupations: None,
            trace_drift: None,
            wall_time_seconds: 0.0,
            failed: false,
            error: String::new(),
        }
    }

    /// Marks the row failed and drops any metric already filled in.
    pub(crate) fn fail(mut self, err: &Error) -> Self {
        self.fidelity = None;
        self.purity = None;
        self.concurrence = None;
        self.residual = None;
        self.mode_occupations = None;
        self.trace_drift = None;
        self.failed = true;
        self.error = err.to_string();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    N,
    Nbar,
    GammaOverKappa,
    ReservoirCount,
    ReservoirModes,
    Frame,
    Method,
    Percent,
    Trial,
    Seed,
    Tau,
    Time,
    Fidelity,
    Purity,
    Concurrence,
    Residual,
    ModeOccupations,
    TraceDrift,
    WallTimeSeconds,
    Failed,
    Error,
}

pub const STEADY_COLUMNS: &[Column] = &[
    Column::N,
    Column::Nbar,
    Column::GammaOverKappa,
    Column::ReservoirCount,
    Column::ReservoirModes,
    Column::Frame,
    Column::Method,
    Column::Seed,
    Column::Fidelity,
    Column::Purity,
    Column::Concurrence,
    Column::Residual,
    Column::ModeOccupations,
    Column::WallTimeSeconds,
    Column::Failed,
    Column::Error,
];

pub const TRAJECTORY_COLUMNS: &[Column] = &[
    Column::N,
    Column::Nbar,
    Column::GammaOverKappa,
    Column::ReservoirCount,
    Column::ReservoirModes,
    Column::Frame,
    Column::Percent,
    Column::Trial,
    Column::Seed,
    Column::Tau,
    Column::Time,
    Column::Fidelity,
    Column::Purity,
    Column::Concurrence,
    Column::TraceDrift,
    Column::WallTimeSeconds,
    Column::Failed,
    Column::Error,
];

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::N => "N",
            Column::Nbar => "nbar",
            Column::GammaOverKappa => "gamma_over_kappa",
            Column::ReservoirCount => "reservoir_count",
            Column::ReservoirModes => "reservoir_modes",
            Column::Frame => "frame",
            Column::Method => "method",
            Column::Percent => "percent",
            Column::Trial => "trial",
            Column::Seed => "seed",
            Column::Tau => "tau",
            Column::Time => "time",
            Column::Fidelity => "fidelity",
            Column::Purity => "purity",
            Column::Concurrence => "concurrence",
            Column::Residual => "residual",
            Column::ModeOccupations => "mode_occupations",
            Column::TraceDrift => "trace_drift",
            Column::WallTimeSeconds => "wall_time_seconds",
            Column::Failed => "failed",
            Column::Error => "error",
        }
    }

    fn cell(self, r: &SweepResultRow) -> String {
        let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        let join = |v: &[String]| v.join(";");
        match self {
            Column::N => r.n.to_string(),
            Column::Nbar => format_float(r.nbar),
            Column::GammaOverKappa => format_float(r.gamma_over_kappa),
            Column::ReservoirCount => r.reservoir_count.to_string(),
            Column::ReservoirModes => join(&r.reservoir_modes.iter().map(|m| m.to_string()).collect::<Vec<_>>()),
            Column::Frame => r.frame.to_string(),
            Column::Method => match r.method {
                Some(SteadyMethod::DirectNullSpace) => "direct".into(),
                Some(SteadyMethod::TimeMarching) => "time_marching".into(),
                None => String::new(),
            },
            Column::Percent => opt(r.percent),
            Column::Trial => r.trial.map(|t| t.to_string()).unwrap_or_default(),
            Column::Seed => r.seed.to_string(),
            Column::Tau => opt(r.tau),
            Column::Time => opt(r.time),
            Column::Fidelity => opt(r.fidelity),
            Column::Purity => opt(r.purity),
            Column::Concurrence => opt(r.concurrence),
            Column::Residual => opt(r.residual),
            Column::ModeOccupations => r
                .mode_occupations
                .as_ref()
                .map(|v| join(&v.iter().map(|x| format_float(*x)).collect::<Vec<_>>()))
                .unwrap_or_default(),
            Column::TraceDrift => opt(r.trace_drift),
            Column::WallTimeSeconds => format_float(r.wall_time_seconds),
            Column::Failed => r.failed.to_string(),
            Column::Error => r.error.clone(),
        }
    }
}

/// `%.12g`: 12 significant digits, trailing zeros dropped, exponent form
/// outside `[1e-5, 1e12)`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        let exp = if exp < 0 { format!("-{:02}", -exp) } else { format!("+{exp:02}") };
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (11 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rows of one experiment together with the configuration that produced them.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub columns: &'static [Column],
    pub rows: Vec<SweepResultRow>,
    /// Extra `#` lines written after the config echo.
    pub notes: Vec<String>,
}

impl ExperimentOutput {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.failed)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {}", self.config.to_json())?;
        for note in &self.notes {
            writeln!(out, "# {note}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(self.columns.iter().map(|c| c.name())).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(self.columns.iter().map(|c| c.cell(row))).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 output")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
