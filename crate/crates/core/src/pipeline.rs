//! Config-driven runs behind the command line tool.
//!
//! A config is one JSON document:
//!
//! ```json
//! {
//!   "model": { "kind": "dephasing", "parameters": { "gamma": "cos(t)" },
//!              "grid": { "t0": 0, "t1": "2*pi", "steps": 2000 } },
//!   "tol_neg": 1e-10,
//!   "cond_max": 1e8,
//!   "report_times": [0, 3.14],
//!   "canon_time": 0.5
//! }
//! ```
//!
//! Everything is validated and computed before any output is rendered, so a
//! validation failure never leaves a partial file behind.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::OperatorBasis;
use crate::canonical::canonicalize_with;
use crate::dynamics::{InvertibilityReport, TimeGrid};
use crate::error::{Error, ErrorClass, Result};
use crate::expr::RateExpr;
use crate::measures::{canonical_series_with, Equivalents, MeasureReport, RateSeries};
use crate::models::{build_model, MatrixSpec, Model, ModelSpec};
use crate::policy::NumericPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSpec,
    #[serde(default)]
    pub policy: Option<NumericPolicy>,
    #[serde(default)]
    pub tol_neg: Option<f64>,
    #[serde(default)]
    pub cond_max: Option<f64>,
    /// Times whose channel vectors go into the JSON summary (nearest grid
    /// point). Defaults to the first and last grid points.
    #[serde(default)]
    pub report_times: Vec<f64>,
    /// Time used by `canon`; defaults to the grid start.
    #[serde(default)]
    pub canon_time: Option<RateExpr>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Canon,
    Series,
    Measures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub steps: Option<usize>,
    pub tol_neg: Option<f64>,
    pub cond_max: Option<f64>,
    /// Parallel width; 0 picks the number of cores.
    pub threads: usize,
}

/// A validated, built config ready to run.
pub struct Prepared {
    pub model: Model,
    pub grid: TimeGrid,
    pub policy: NumericPolicy,
    pub tol_neg: Option<f64>,
    pub report_times: Vec<f64>,
    pub canon_time: f64,
}

pub fn prepare(config: &Config, base_dir: &Path, opts: &RunOptions) -> Result<Prepared> {
    let mut policy = config.policy.unwrap_or_default();
    if let Some(c) = opts.cond_max.or(config.cond_max) {
        if !(c >= 1.0) {
            return Err(Error::Config(format!("cond_max must be ≥ 1, got {c}")));
        }
        policy.cond_max = c;
    }
    let tol_neg = opts.tol_neg.or(config.tol_neg);
    if let Some(t) = tol_neg {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Config(format!("tol_neg must be positive, got {t}")));
        }
    }

    let mut spec = config.model.clone();
    let overridden = opts.t0.is_some() || opts.t1.is_some() || opts.steps.is_some();
    if overridden {
        if spec.file.is_some() || spec.kind == crate::models::ModelKind::MapFamilyFile {
            return Err(Error::Config(
                "grid overrides do not apply to map files".into(),
            ));
        }
        let base = spec.grid.take();
        let pick = |o: Option<f64>, b: Option<&RateExpr>, name: &str| -> Result<RateExpr> {
            o.map(RateExpr::Num)
                .or_else(|| b.cloned())
                .ok_or_else(|| Error::Config(format!("missing grid {name}")))
        };
        spec.grid = Some(crate::models::GridSpec {
            t0: pick(opts.t0, base.as_ref().map(|g| &g.t0), "t0")?,
            t1: pick(opts.t1, base.as_ref().map(|g| &g.t1), "t1")?,
            steps: opts
                .steps
                .or(base.as_ref().map(|g| g.steps))
                .ok_or_else(|| Error::Config("missing grid steps".into()))?,
        });
    }

    let model = build_model(&spec, base_dir, &policy)?;
    let grid = match model.grid() {
        Some(g) => g.clone(),
        None => spec
            .grid
            .as_ref()
            .ok_or_else(|| Error::Config("missing `grid`".into()))?
            .build()?,
    };
    if grid.len() < 2 {
        return Err(Error::InvalidGrid("need at least two grid points".into()));
    }
    let canon_time = match &config.canon_time {
        Some(e) if !e.is_constant() => {
            return Err(Error::Config("canon_time must not depend on t".into()))
        }
        Some(e) => e.eval(0.0)?,
        None => grid.start(),
    };
    let report_times = if config.report_times.is_empty() {
        vec![grid.start(), grid.end()]
    } else {
        config.report_times.clone()
    };
    Ok(Prepared {
        model,
        grid,
        policy,
        tol_neg,
        report_times,
        canon_time,
    })
}

/// Runs `f` on a rayon pool of the requested width.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Loads, validates and runs a config, returning the rendered output.
pub fn execute(
    cmd: Command,
    format: Format,
    config_path: &Path,
    opts: &RunOptions,
) -> Result<String> {
    let config = Config::load(config_path)?;
    let base = config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    execute_config(cmd, format, &config, &base, opts)
}

pub fn execute_config(
    cmd: Command,
    format: Format,
    config: &Config,
    base_dir: &Path,
    opts: &RunOptions,
) -> Result<String> {
    if cmd == Command::Canon && format == Format::Csv {
        return Err(Error::Config("`canon` only writes JSON".into()));
    }
    with_threads(opts.threads, || {
        let p = prepare(config, base_dir, opts)?;
        match cmd {
            Command::Canon => render_canon(&p),
            Command::Series | Command::Measures => {
                let series = canonical_series_with(p.model.source(), &p.grid, &p.policy)?;
                let report = MeasureReport::new(&series, p.tol_neg);
                Ok(match (cmd, format) {
                    (_, Format::Csv) => render_csv(&series, &report),
                    (Command::Series, Format::Json) => render_series_json(&series),
                    _ => render_summary(&series, &report, &p.report_times),
                })
            }
        }
    })?
}

/// Shortest decimal that reads back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn render_csv(series: &RateSeries, report: &MeasureReport) -> String {
    let m = series.branch_count();
    let mut out = String::from("t");
    for k in 1..=m {
        write!(out, ",gamma_{k}").unwrap();
    }
    out.push_str(",f_sum,F_sum_running,nm_index,singular\n");
    for (i, &t) in series.times().iter().enumerate() {
        out.push_str(&fmt_f64(t));
        match series.rates(i) {
            Some(rates) => {
                for &r in rates {
                    write!(out, ",{}", fmt_f64(r)).unwrap();
                }
                write!(
                    out,
                    ",{},{},{},false",
                    fmt_f64(report.f_sum_series[i].expect("regular")),
                    fmt_f64(report.integrated.sum_running[i]),
                    report.nm_index_series[i].expect("regular"),
                )
                .unwrap();
            }
            None => {
                out.push_str(&",".repeat(m + 1));
                write!(out, ",{},,true", fmt_f64(report.integrated.sum_running[i])).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct SeriesJson<'a> {
    dim: usize,
    times: &'a [f64],
    /// `rates[i]` is `null` at flagged times.
    rates: Vec<Option<&'a [f64]>>,
    singular: Vec<bool>,
    flagged: Vec<&'a InvertibilityReport>,
}

pub fn render_series_json(series: &RateSeries) -> String {
    let j = SeriesJson {
        dim: series.dim(),
        times: series.times(),
        rates: (0..series.len()).map(|i| series.rates(i)).collect(),
        singular: series.singular_flags(),
        flagged: series.flagged().collect(),
    };
    to_json(&j)
}

#[derive(Serialize)]
struct ChannelSnapshot {
    rate: f64,
    /// Coordinates over `G_1 … G_{N−1}` as `[re, im]`.
    coords: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct Snapshot {
    requested: f64,
    time: f64,
    singular: bool,
    channels: Vec<ChannelSnapshot>,
}

#[derive(Serialize)]
struct Summary<'a> {
    dim: usize,
    t0: f64,
    t1: f64,
    points: usize,
    tol_neg: f64,
    #[serde(rename = "F")]
    f_values: &'a [f64],
    #[serde(rename = "F_sum")]
    f_sum: f64,
    max_nm_index: usize,
    excluded_intervals: &'a [(f64, f64)],
    flagged: Vec<&'a InvertibilityReport>,
    snapshots: Vec<Snapshot>,
    equivalents: Option<&'a Equivalents>,
}

pub fn render_summary(series: &RateSeries, report: &MeasureReport, times: &[f64]) -> String {
    let grid = series.times();
    let snapshots = times
        .iter()
        .map(|&req| {
            let i = nearest(grid, req);
            Snapshot {
                requested: req,
                time: grid[i],
                singular: series.is_singular(i),
                channels: series
                    .point(i)
                    .map(|p| {
                        p.rates
                            .iter()
                            .enumerate()
                            .map(|(k, &rate)| ChannelSnapshot {
                                rate,
                                coords: p.vectors.column(k).iter().map(|z| [z.re, z.im]).collect(),
                            })
                            .collect()
                    })
                    .unwrap_or_default(),
            }
        })
        .collect();
    let s = Summary {
        dim: series.dim(),
        t0: series.grid().start(),
        t1: series.grid().end(),
        points: series.len(),
        tol_neg: report.tol_neg,
        f_values: report.f_values(),
        f_sum: report.f_sum(),
        max_nm_index: report
            .nm_index_series
            .iter()
            .flatten()
            .copied()
            .max()
            .unwrap_or(0),
        excluded_intervals: &report.integrated.excluded,
        flagged: series.flagged().collect(),
        snapshots,
        equivalents: report.equivalents.as_ref(),
    };
    to_json(&s)
}

fn nearest(grid: &[f64], t: f64) -> usize {
    let i = grid.partition_point(|&x| x < t);
    match i {
        0 => 0,
        i if i == grid.len() => grid.len() - 1,
        i if (grid[i] - t) < (t - grid[i - 1]) => i,
        i => i - 1,
    }
}

#[derive(Serialize)]
struct CanonJson {
    time: f64,
    hamiltonian: MatrixSpec,
    channels: Vec<CanonChannel>,
}

#[derive(Serialize)]
struct CanonChannel {
    rate: f64,
    operator: MatrixSpec,
}

fn render_canon(p: &Prepared) -> Result<String> {
    let (i, t) = match p.model.grid() {
        Some(g) => {
            let i = nearest(g.points(), p.canon_time);
            (i, g.points()[i])
        }
        None => (0, p.canon_time),
    };
    let s = p.model.source().generator(i, t, &p.policy)?;
    let basis = OperatorBasis::new(p.model.dim())?;
    let cf = canonicalize_with(&s, &basis, &p.policy)?;
    let j = CanonJson {
        time: t,
        hamiltonian: MatrixSpec::from_matrix(&cf.hamiltonian),
        channels: cf
            .channels
            .iter()
            .map(|c| CanonChannel {
                rate: c.rate,
                operator: MatrixSpec::from_matrix(&c.operator),
            })
            .collect(),
    };
    Ok(to_json(&j))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct FailureReport<'a> {
    status: &'static str,
    error: String,
    flagged: Vec<&'a InvertibilityReport>,
}

/// JSON report for a failed run; carries the invertibility report when the
/// failure is a singular map.
pub fn failure_report(err: &Error) -> String {
    let flagged = match err {
        Error::Singular(r) => vec![r],
        _ => Vec::new(),
    };
    to_json(&FailureReport {
        status: match err.class() {
            ErrorClass::Validation => "validation_error",
            ErrorClass::Numerical => "numerical_failure",
        },
        error: err.to_string(),
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Config {
        Config::parse(text).unwrap()
    }

    const COS: &str = r#"{
        "model": { "kind": "dephasing", "parameters": { "gamma": "cos(t)" },
                   "grid": { "t0": 0, "t1": "2*pi", "steps": 400 } }
    }"#;

    fn run(cmd: Command, format: Format, c: &Config, opts: &RunOptions) -> Result<String> {
        execute_config(cmd, format, c, Path::new("."), opts)
    }

    #[test]
    fn csv_layout() {
        let out = run(
            Command::Series,
            Format::Csv,
            &cfg(COS),
            &RunOptions::default(),
        )
        .unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(
            lines[0],
            "t,gamma_1,gamma_2,gamma_3,f_sum,F_sum_running,nm_index,singular"
        );
        assert_eq!(lines.len(), 402);
        assert_eq!(lines[1], "0.0,1.0,0.0,0.0,0.0,0.0,0,false");
        assert!(!out.contains('\r'));
        let last: Vec<&str> = lines[401].split(',').collect();
        let f: f64 = last[5].parse().unwrap();
        assert!((f + 2.0).abs() < 1e-3);
    }

    #[test]
    fn overrides_replace_grid() {
        let opts = RunOptions {
            t1: Some(1.0),
            steps: Some(10),
            ..Default::default()
        };
        let out = run(Command::Series, Format::Csv, &cfg(COS), &opts).unwrap();
        assert_eq!(out.lines().count(), 12);
        assert!(out.lines().last().unwrap().starts_with("1.0,"));
    }

    #[test]
    fn summary_json() {
        let out = run(
            Command::Measures,
            Format::Json,
            &cfg(COS),
            &RunOptions::default(),
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["F_sum"].as_f64().unwrap() + 2.0).abs() < 1e-3);
        assert_eq!(v["F"].as_array().unwrap().len(), 3);
        assert_eq!(v["max_nm_index"], 1);
        assert_eq!(v["snapshots"].as_array().unwrap().len(), 2);
        assert!((v["equivalents"]["entanglement"].as_f64().unwrap() - 4.0).abs() < 1e-2);
    }

    #[test]
    fn canon_json() {
        let c = cfg(
            r#"{ "model": { "kind": "dephasing", "parameters": { "gamma": 1 },
                          "grid": { "t0": 0, "t1": 1, "steps": 2 } } }"#,
        );
        let out = run(Command::Canon, Format::Json, &c, &RunOptions::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let ch = v["channels"].as_array().unwrap();
        assert_eq!(ch.len(), 1);
        assert!((ch[0]["rate"].as_f64().unwrap() - 1.0).abs() < 1e-14);
        assert!(run(Command::Canon, Format::Csv, &c, &RunOptions::default()).is_err());
    }

    #[test]
    fn validation_errors() {
        let bad = [
            r#"{ "model": { "kind": "lindblad_terms", "dim": 3,
                 "channels": [{ "rate": 1, "operator": "sigma_z" }],
                 "grid": { "t0": 0, "t1": 1, "steps": 4 } } }"#,
            r#"{ "model": { "kind": "dephasing", "grid": { "t0": 0, "t1": 1, "steps": 4 } } }"#,
            r#"{ "model": { "kind": "dephasing", "parameters": { "gamma": "cos(" },
                 "grid": { "t0": 0, "t1": 1, "steps": 4 } } }"#,
            r#"{ "model": { "kind": "jc_amplitude_damping",
                 "parameters": { "lambda": 1, "gamma0": "t" },
                 "grid": { "t0": 0, "t1": 1, "steps": 4 } } }"#,
            r#"{ "model": { "kind": "lindblad_terms", "dim": 2,
                 "hamiltonian": [{ "matrix": "sigma_plus" }],
                 "grid": { "t0": 0, "t1": 1, "steps": 4 } } }"#,
            r#"{ "model": { "kind": "generator_terms", "dim": 2,
                 "terms": [{ "a": "sigma_x", "b": "identity" }],
                 "grid": { "t0": 0, "t1": 1, "steps": 4 } } }"#,
            r#"{ "model": { "kind": "dephasing", "parameters": { "gamma": 1 } } }"#,
            r#"{ "model": { "kind": "dephasing", "parameters": { "gamma": 1 },
                 "grid": { "t0": 0, "t1": 1, "steps": 4 } }, "cond_max": 0.5 }"#,
            r#"{ "model": { "kind": "memory_kernel_dephasing",
                 "parameters": { "k": 1, "lambda": 1 },
                 "grid": { "t0": 1, "t1": 2, "steps": 4 } } }"#,
        ];
        for text in bad {
            let err = match Config::parse(text) {
                Ok(c) => run(Command::Series, Format::Csv, &c, &RunOptions::default()).unwrap_err(),
                Err(e) => e,
            };
            assert_eq!(err.class(), ErrorClass::Validation, "{text}: {err}");
        }
        assert!(Config::parse(r#"{ "model": { "kind": "nope" } }"#).is_err());
        assert!(Config::parse(r#"{ "model": { "kind": "dephasing" }, "extra": 1 }"#).is_err());
    }

    #[test]
    fn numerical_errors() {
        let c = cfg(
            r#"{ "model": { "kind": "dephasing", "parameters": { "gamma": "1/(t-0.5)" },
                          "grid": { "t0": 0, "t1": 1, "steps": 4 } } }"#,
        );
        let err = run(Command::Series, Format::Csv, &c, &RunOptions::default()).unwrap_err();
        assert_eq!(err.class(), ErrorClass::Numerical);
        let report: serde_json::Value = serde_json::from_str(&failure_report(&err)).unwrap();
        assert_eq!(report["status"], "numerical_failure");
    }

    #[test]
    fn singular_canon_reports_flag() {
        let c = cfg(r#"{ "model": { "kind": "jc_amplitude_damping",
                          "parameters": { "lambda": 1, "gamma0": 10 },
                          "grid": { "t0": 0, "t1": 2, "steps": 200 } },
                          "canon_time": 0.5 }"#);
        let tz = crate::models::zoo::jc_zeros(1.0, 10.0, 1)[0];
        let opts = RunOptions {
            cond_max: Some(10.0),
            ..Default::default()
        };
        let mut c2 = c.clone();
        c2.canon_time = Some(RateExpr::Num(tz));
        let err = run(Command::Canon, Format::Json, &c2, &opts).unwrap_err();
        assert!(matches!(err, Error::Singular(_)));
        let v: serde_json::Value = serde_json::from_str(&failure_report(&err)).unwrap();
        assert_eq!(v["flagged"].as_array().unwrap().len(), 1);
        assert!(run(Command::Canon, Format::Json, &c, &RunOptions::default()).is_ok());
    }

    #[test]
    fn thread_width_does_not_change_output() {
        let c = cfg(r#"{ "model": { "kind": "paper_example",
                          "parameters": { "gamma": "sin(t)", "gamma_tilde": "-0.4*cos(3*t)" },
                          "grid": { "t0": 0, "t1": 5, "steps": 300 } } }"#);
        let one = run(
            Command::Series,
            Format::Csv,
            &c,
            &RunOptions {
                threads: 1,
                ..Default::default()
            },
        );
        let many = run(
            Command::Series,
            Format::Csv,
            &c,
            &RunOptions {
                threads: 4,
                ..Default::default()
            },
        );
        assert_eq!(one.unwrap(), many.unwrap());
    }

    #[test]
    fn nearest_index() {
        let g = [0.0, 1.0, 2.0];
        assert_eq!(nearest(&g, -1.0), 0);
        assert_eq!(nearest(&g, 0.4), 0);
        assert_eq!(nearest(&g, 0.6), 1);
        assert_eq!(nearest(&g, 5.0), 2);
    }

    #[test]
    fn shortest_round_trip_format() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e21, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.1), "0.1");
    }
}
