//! Parameter sweeps producing one [`StatsReport`] row per grid point.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonclassicality::{full_report, StatsReport};
use crate::nonlinearity::NonlinearityFunction;
use crate::states::{self, Case, IntelligentStateRequest, TruncationPolicy};

/// Column order of every scan table.
pub const COLUMNS: [&str; 14] = [
    "param_name",
    "param_value",
    "mean_n",
    "var_n",
    "mandel_q",
    "var_x",
    "var_p",
    "q1",
    "q2",
    "dX",
    "dP",
    "comm_abs",
    "intelligence_residual",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Real `z`.
    Z,
    Lambda,
    Eta,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Z => "z",
            SweepParam::Lambda => "lambda",
            SweepParam::Eta => "eta",
        }
    }
}

/// `param=start:stop:steps`, evenly spaced and inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn new(param: SweepParam, start: f64, stop: f64, steps: usize) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && start < stop) {
            return Err(Error::InvalidParam(format!("sweep needs start < stop, got {start}:{stop}")));
        }
        if steps < 2 {
            return Err(Error::InvalidParam(format!("sweep needs at least 2 steps, got {steps}")));
        }
        Ok(Self { param, start, stop, steps })
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * (i as f64 / last)
                }
            })
            .collect()
    }
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParam(format!("sweep `{s}` is not of the form param=start:stop:steps"));
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let param = match name.trim() {
            "z" => SweepParam::Z,
            "lambda" => SweepParam::Lambda,
            "eta" => SweepParam::Eta,
            other => return Err(Error::InvalidParam(format!("cannot sweep `{other}`; use z, lambda or eta"))),
        };
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        Sweep::new(param, start, stop, steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidParam(format!("unknown format `{other}`"))),
        }
    }
}

/// Everything a scan needs apart from where its output goes.
#[derive(Debug, Clone)]
pub struct ScanSpec {
    pub sweep: Sweep,
    /// Nonlinearity name as accepted by [`NonlinearityFunction::parse`].
    pub f_name: String,
    pub eta: Option<f64>,
    pub q: Option<f64>,
    pub lambda: f64,
    pub z: Complex64,
    pub case: Option<Case>,
    pub truncation: TruncationPolicy,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        Sweep::new(self.sweep.param, self.sweep.start, self.sweep.stop, self.sweep.steps)?;
        self.truncation.validate()?;
        if self.sweep.param == SweepParam::Eta && self.f_name.trim_start_matches("dual:") != "trapped-ion" {
            return Err(Error::InvalidParam(format!("an eta sweep needs trapped-ion, not `{}`", self.f_name)));
        }
        Ok(())
    }
}

/// One grid point: its parameter value and either a report or the error
/// that stopped it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub param_name: &'static str,
    pub param_value: f64,
    pub result: Result<StatsReport>,
}

impl ScanRow {
    pub fn status(&self) -> &'static str {
        match &self.result {
            Ok(_) => "ok",
            Err(e) => e.name(),
        }
    }
}

/// Evaluate every grid point. Points run in parallel; rows come back in
/// grid order.
pub fn run(spec: &ScanSpec) -> Result<Vec<ScanRow>> {
    spec.validate()?;
    // f does not depend on the swept value unless eta is swept
    let shared = match spec.sweep.param {
        SweepParam::Eta => None,
        _ => Some(NonlinearityFunction::parse(&spec.f_name, spec.eta, spec.q)?),
    };
    let rows = spec
        .sweep
        .values()
        .into_par_iter()
        .map(|value| ScanRow {
            param_name: spec.sweep.param.name(),
            param_value: value,
            result: evaluate(spec, shared.as_ref(), value),
        })
        .collect();
    Ok(rows)
}

fn evaluate(spec: &ScanSpec, shared: Option<&NonlinearityFunction>, value: f64) -> Result<StatsReport> {
    let (mut lambda, mut z) = (spec.lambda, spec.z);
    let f = match spec.sweep.param {
        SweepParam::Eta => NonlinearityFunction::parse(&spec.f_name, Some(value), spec.q)?,
        SweepParam::Z => {
            z = Complex64::new(value, 0.0);
            shared.cloned().expect("f is shared for z sweeps")
        }
        SweepParam::Lambda => {
            lambda = value;
            shared.cloned().expect("f is shared for lambda sweeps")
        }
    };
    let request = IntelligentStateRequest::with_case(f, lambda, z, spec.truncation, spec.case)?;
    let state = states::build(&request)?;
    full_report(&state, &request.f, lambda, z)
}

/// `d.ddddddddddddddddde±x`: 17 significant digits, lowercase exponent.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn numeric_fields(r: &StatsReport) -> [f64; 11] {
    [
        r.mean_n,
        r.var_n,
        r.mandel_q,
        r.var_x,
        r.var_p,
        r.q1,
        r.q2,
        r.dx,
        r.dp,
        r.comm_abs,
        r.intelligence_residual,
    ]
}

pub fn write_csv<W: Write>(rows: &[ScanRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS).map_err(csv_error)?;
    for row in rows {
        let mut record = Vec::with_capacity(COLUMNS.len());
        record.push(row.param_name.to_string());
        record.push(format_float(row.param_value));
        match &row.result {
            Ok(r) => record.extend(numeric_fields(r).iter().map(|x| format_float(*x))),
            Err(_) => record.extend(std::iter::repeat_n(String::new(), 11)),
        }
        record.push(row.status().to_string());
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[derive(Serialize)]
struct JsonRow<'a> {
    param_name: &'a str,
    param_value: f64,
    #[serde(flatten)]
    report: Option<StatsReport>,
    status: &'a str,
}

pub fn write_json<W: Write>(rows: &[ScanRow], mut out: W) -> Result<()> {
    let json: Vec<JsonRow> = rows
        .iter()
        .map(|row| JsonRow {
            param_name: row.param_name,
            param_value: row.param_value,
            report: row.result.as_ref().ok().copied(),
            status: row.status(),
        })
        .collect();
    serde_json::to_writer_pretty(&mut out, &json).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

pub fn write<W: Write>(rows: &[ScanRow], format: Format, out: W) -> Result<()> {
    match format {
        Format::Csv => write_csv(rows, out),
        Format::Json => write_json(rows, out),
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sweep: &str, f: &str, lambda: f64, z: f64) -> ScanSpec {
        ScanSpec {
            sweep: sweep.parse().unwrap(),
            f_name: f.into(),
            eta: Some(0.1),
            q: None,
            lambda,
            z: Complex64::new(z, 0.0),
            case: None,
            truncation: TruncationPolicy::default(),
        }
    }

    #[test]
    fn sweep_parsing() {
        let s: Sweep = "lambda=0.5:6:56".parse().unwrap();
        assert_eq!((s.param, s.start, s.stop, s.steps), (SweepParam::Lambda, 0.5, 6.0, 56));
        let v = s.values();
        assert_eq!(v.len(), 56);
        assert_eq!((v[0], v[55]), (0.5, 6.0));
        assert!((v[1] - 0.6).abs() < 1e-15);
        assert!("lambda=1:1:5".parse::<Sweep>().is_err());
        assert!("z=0:1:1".parse::<Sweep>().is_err());
        assert!("q=0:1:3".parse::<Sweep>().is_err());
        assert!("z=0:1".parse::<Sweep>().is_err());
    }

    #[test]
    fn lambda_sweep_through_minus_one_marks_only_that_row() {
        let rows = run(&spec("lambda=-2:0:3", "hydrogen", 0.0, 0.3)).unwrap();
        assert_eq!(rows[1].param_value, -1.0);
        assert_eq!(rows[1].status(), "CaseTwoNoSolution");
        assert_eq!(rows[0].status(), "TruncationNotConverged");
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(2).unwrap();
        assert_eq!(line, "lambda,-1.0000000000000000e0,,,,,,,,,,,,CaseTwoNoSolution");
    }

    #[test]
    fn trapped_ion_zero_z_lambda_sweep() {
        let rows = run(&spec("lambda=0.5:6:56", "trapped-ion", 0.0, 0.0)).unwrap();
        assert_eq!(rows.len(), 56);
        for row in &rows {
            if (row.param_value - 1.0).abs() < 1e-12 {
                assert_eq!(row.status(), "VacuumUndefined");
            } else {
                assert_eq!(row.status(), "ok", "lambda = {}", row.param_value);
            }
        }
        // the even-parity family bunches more as |ρ| grows
        let above: Vec<f64> = rows
            .iter()
            .filter(|r| r.param_value > 1.05)
            .map(|r| r.result.as_ref().unwrap().mandel_q)
            .collect();
        assert!(above.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn harmonious_squeezing_grows_with_z() {
        let rows = run(&spec("z=0.05:0.95:19", "harmonious", 1.0, 0.0)).unwrap();
        let q2: Vec<f64> = rows.iter().map(|r| r.result.as_ref().unwrap().q2).collect();
        assert!(q2.iter().all(|q| *q < 0.0));
        assert!(q2.windows(2).all(|w| w[1] < w[0]), "{q2:?}");
    }

    #[test]
    fn eta_sweep_requires_trapped_ion() {
        assert!(run(&spec("eta=0.1:0.3:3", "hydrogen", 1.0, 0.5)).is_err());
        let rows = run(&spec("eta=0.1:0.3:3", "trapped-ion", 1.0, 2.0)).unwrap();
        let status: Vec<&str> = rows.iter().map(|r| r.status()).collect();
        // at η = 0.3 only 15 levels are valid, too few for z = 2
        assert_eq!(status, ["ok", "ok", "TruncationNotConverged"]);
    }

    #[test]
    fn json_rows_keep_nulls_out() {
        let rows = run(&spec("lambda=-1:1:2", "identity", 0.0, 0.0)).unwrap();
        let mut buf = Vec::new();
        write_json(&rows, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v[0]["status"], "CaseTwoNoSolution");
        assert!(v[0].get("mean_n").is_none());
        assert_eq!(v[1]["status"], "VacuumUndefined");
    }

    #[test]
    fn float_format_is_fixed_width_mantissa() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.5e10), "-2.5000000000000000e10");
        assert_eq!(format_float(0.0), "0.0000000000000000e0");
    }
}
