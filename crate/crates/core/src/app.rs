//! Command-line front end: flag and config-file parsing, dispatch, and record
//! serialization.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::carpet::{carpet_dimension, MoranSequence};
use crate::dimension::{
    box_dim_sequence, verify_matrix_counts, Method, SampleStatus, VerificationSuite,
    DEFAULT_CELL_BUDGET,
};
use crate::error::Error;
use crate::multifractal::{chord_witness, PressureCurve, DEFAULT_WORD_BUDGET};
use crate::render::{render_svg, RenderOptions, DEFAULT_CANVAS, DEFAULT_ELEMENT_CAP};
use crate::slicing::{greedy_expand, oracle_counts, parse_rational, Intercept, Slope};
use crate::transfer::{matrix_counts, TransferSet};

pub type Record = Map<String, Value>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_MISMATCH: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "moran-carpet", version, about = "Slices of Moran-type Sierpinski carpets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Print the transfer matrices for a slope
    Matrices,
    /// Greedy expansion of the intercept
    Expand,
    /// Slice cell counts per depth
    Count,
    /// Box-dimension estimates per depth
    Dim,
    /// Normalized and raw pressure on a q grid
    Pressure,
    /// Upper bound on the spectrum at each alpha
    Bound,
    /// Search the q grid for a point below the chord
    Witness,
    /// Compare matrix counts with geometric counts on random intercepts
    Verify,
    /// Write an SVG of the level-n cells and the slicing line
    Render,
}

/// Every flag is optional and overrides the same key in `--config`.
#[derive(Debug, Clone, Default, clap::Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// TOML file with any of the keys below
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Slope M/N (comma-separated list for verify)
    #[arg(long, global = true)]
    pub slope: Option<String>,
    /// Level sequence as prefix(period), e.g. 11(0)
    #[arg(long, global = true)]
    pub sigma: Option<String>,
    /// Intercept P/Q (comma-separated extra intercepts for verify)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a: Option<String>,
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// matrix, oracle or both
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Comma-separated q values
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub q: Option<String>,
    /// Comma-separated alpha values
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// q grid as START:STEP:END
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub qgrid: Option<String>,
    /// Trailing depths used for the tail min/max
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// json (JSON lines), csv or table
    #[arg(long, global = true)]
    pub format: Option<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub cell_budget: Option<u128>,
    #[arg(long, global = true)]
    pub word_budget: Option<u128>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Random intercepts per slope and sequence (verify)
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Canvas side in pixels (render)
    #[arg(long, global = true)]
    pub canvas: Option<u32>,
    #[arg(long, global = true)]
    pub element_cap: Option<usize>,
    /// Also build matrices from the closed form and compare (matrices)
    #[arg(long, global = true)]
    #[serde(default)]
    pub closed_form: bool,
}

impl Flags {
    fn overlay(self, file: Flags) -> Flags {
        Flags {
            config: self.config,
            slope: self.slope.or(file.slope),
            sigma: self.sigma.or(file.sigma),
            a: self.a.or(file.a),
            depth: self.depth.or(file.depth),
            method: self.method.or(file.method),
            q: self.q.or(file.q),
            alpha: self.alpha.or(file.alpha),
            qgrid: self.qgrid.or(file.qgrid),
            window: self.window.or(file.window),
            format: self.format.or(file.format),
            out: self.out.or(file.out),
            cell_budget: self.cell_budget.or(file.cell_budget),
            word_budget: self.word_budget.or(file.word_budget),
            seed: self.seed.or(file.seed),
            samples: self.samples.or(file.samples),
            canvas: self.canvas.or(file.canvas),
            element_cap: self.element_cap.or(file.element_cap),
            closed_form: self.closed_form || file.closed_form,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Table,
}

/// Failure with its process exit code.
#[derive(Debug)]
pub struct AppError {
    pub code: i32,
    pub message: String,
}

impl AppError {
    fn config(field: &str, e: impl std::fmt::Display) -> Self {
        AppError {
            code: EXIT_CONFIG,
            message: format!("invalid --{field}: {e}"),
        }
    }
}

impl From<Error> for AppError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::VerificationFailure { .. } => EXIT_MISMATCH,
            Error::BudgetExceeded { .. } | Error::ElementCapExceeded { .. } => EXIT_BUDGET,
            _ => EXIT_CONFIG,
        };
        AppError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }
}

type AppResult<T> = std::result::Result<T, AppError>;

/// Fully parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub slopes: Vec<Slope>,
    pub sigmas: Vec<MoranSequence>,
    pub intercepts: Vec<Ratio<BigInt>>,
    pub depth: Option<usize>,
    pub method: Method,
    pub q: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub window: Option<usize>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub cell_budget: u128,
    pub word_budget: u128,
    pub seed: u64,
    pub samples: usize,
    pub canvas: u32,
    pub element_cap: usize,
    pub closed_form: bool,
}

fn list<T>(field: &str, raw: &str, parse: impl Fn(&str) -> Result<T, Error>) -> AppResult<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).map_err(|e| AppError::config(field, e)))
        .collect()
}

fn floats(field: &str, raw: &str) -> AppResult<Vec<f64>> {
    list(field, raw, |s| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::parse("number", s, "expected a finite decimal"))
    })
}

/// `START:STEP:END`, inclusive of `END` up to rounding.
pub fn parse_qgrid(raw: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<f64> = raw
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::parse("q grid", raw, e.to_string()))?;
    let [start, step, end] = parts[..] else {
        return Err(Error::parse("q grid", raw, "expected START:STEP:END"));
    };
    if step.is_nan() || step <= 0.0 || !start.is_finite() || !end.is_finite() || end < start {
        return Err(Error::parse("q grid", raw, "need START <= END and STEP > 0"));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err(Error::parse("q grid", raw, "more than 100000 points"));
    }
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

impl RunConfig {
    pub fn from_flags(flags: Flags) -> AppResult<Self> {
        let flags = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| AppError::config("config", e))?;
                let file: Flags = toml::from_str(&text).map_err(|e| AppError::config("config", e))?;
                flags.overlay(file)
            }
            None => flags,
        };
        let slopes = list("slope", flags.slope.as_deref().unwrap_or("1/1"), str::parse)?;
        let sigmas = list("sigma", flags.sigma.as_deref().unwrap_or("(0)"), str::parse)?;
        let intercepts = match &flags.a {
            Some(raw) => list("a", raw, parse_rational::<BigInt>)?,
            None => Vec::new(),
        };
        if slopes.is_empty() {
            return Err(AppError::config("slope", "empty list"));
        }
        if sigmas.is_empty() {
            return Err(AppError::config("sigma", "empty list"));
        }
        let method = match &flags.method {
            Some(m) => m.parse().map_err(|e| AppError::config("method", e))?,
            None => Method::Matrix,
        };
        let q = match (&flags.q, &flags.qgrid) {
            (Some(_), Some(_)) => {
                return Err(AppError::config("qgrid", "give either --q or --qgrid, not both"))
            }
            (Some(raw), None) => Some(floats("q", raw)?),
            (None, Some(raw)) => Some(parse_qgrid(raw).map_err(|e| AppError::config("qgrid", e))?),
            (None, None) => None,
        };
        if q.as_ref().is_some_and(Vec::is_empty) {
            return Err(AppError::config("q", "empty list"));
        }
        let alpha = flags.alpha.as_deref().map(|raw| floats("alpha", raw)).transpose()?;
        if alpha.as_ref().is_some_and(Vec::is_empty) {
            return Err(AppError::config("alpha", "empty list"));
        }
        let format = match flags.format.as_deref().unwrap_or("json") {
            "json" => Format::Json,
            "csv" => Format::Csv,
            "table" => Format::Table,
            other => return Err(AppError::config("format", format!("{other:?} is not json, csv or table"))),
        };
        if flags.depth == Some(0) {
            return Err(AppError::config("depth", "must be at least 1"));
        }
        if flags.window == Some(0) {
            return Err(AppError::config("window", "must be at least 1"));
        }
        if flags.canvas == Some(0) {
            return Err(AppError::config("canvas", "must be at least 1"));
        }
        Ok(RunConfig {
            slopes,
            sigmas,
            intercepts,
            depth: flags.depth,
            method,
            q,
            alpha,
            window: flags.window,
            format,
            out: flags.out,
            cell_budget: flags.cell_budget.unwrap_or(DEFAULT_CELL_BUDGET),
            word_budget: flags.word_budget.unwrap_or(DEFAULT_WORD_BUDGET),
            seed: flags.seed.unwrap_or(0),
            samples: flags.samples.unwrap_or(25),
            canvas: flags.canvas.unwrap_or(DEFAULT_CANVAS),
            element_cap: flags.element_cap.unwrap_or(DEFAULT_ELEMENT_CAP),
            closed_form: flags.closed_form,
        })
    }

    fn single<'a, T>(&self, field: &str, items: &'a [T]) -> AppResult<&'a T> {
        match items {
            [one] => Ok(one),
            [] => Err(AppError::config(field, "required")),
            _ => Err(AppError::config(field, "a single value is required for this command")),
        }
    }

    pub fn slope(&self) -> AppResult<Slope> {
        self.single("slope", &self.slopes).copied()
    }

    pub fn sigma(&self) -> AppResult<&MoranSequence> {
        self.single("sigma", &self.sigmas)
    }

    pub fn intercept(&self, slope: &Slope) -> AppResult<Intercept<BigInt>> {
        let a = self.single("a", &self.intercepts)?;
        Intercept::new(a.clone(), slope).map_err(|e| AppError::config("a", e))
    }

    fn depth_or(&self, default: usize) -> usize {
        self.depth.unwrap_or(default)
    }
}

/// Exact integer as a JSON number.
pub fn big(n: &BigUint) -> Value {
    serde_json::from_str(&n.to_string()).expect("decimal integers are JSON numbers")
}

fn float(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn obj(v: Value) -> Record {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("records are built from object literals"),
    }
}

/// Records plus the exit code they imply.
pub struct Output {
    pub records: Vec<Record>,
    pub code: i32,
}

impl Output {
    fn ok(records: Vec<Record>) -> Self {
        Output {
            records,
            code: EXIT_OK,
        }
    }
}

fn cmd_matrices(cfg: &RunConfig) -> AppResult<Output> {
    let slope = cfg.slope()?;
    let semantic = TransferSet::semantic(&slope);
    let closed = cfg.closed_form.then(|| TransferSet::closed_form(&slope));
    let mut code = EXIT_OK;
    let records = semantic
        .iter()
        .map(|m| {
            let mut r = obj(json!({
                "slope": slope.to_string(),
                "tag": m.tag().bit(),
                "label": m.label(),
                "order": m.order(),
                "rows": m.to_nested(),
            }));
            if let Some(c) = &closed {
                let other = c.get(m.tag(), m.label());
                let equal = other == m;
                if !equal {
                    code = EXIT_MISMATCH;
                }
                r.insert("closed_form".into(), json!(other.to_nested()));
                r.insert("equal".into(), json!(equal));
            }
            r
        })
        .collect();
    Ok(Output { records, code })
}

fn cmd_expand(cfg: &RunConfig) -> AppResult<Output> {
    let slope = cfg.slope()?;
    let sigma = cfg.sigma()?;
    let a = cfg.intercept(&slope)?;
    let depth = cfg.depth_or(20);
    let e = greedy_expand(&a, sigma, &slope, depth);
    let value = e.value(sigma, &slope)?;
    Ok(Output::ok(vec![obj(json!({
        "slope": slope.to_string(),
        "sigma": sigma.to_string(),
        "a": a.to_string(),
        "depth": depth,
        "index": e.index,
        "digits": e.digits,
        "first_boundary": e.first_boundary,
        "remainder": e.remainder.to_string(),
        "truncated_value": value.to_string(),
    }))]))
}

fn cmd_count(cfg: &RunConfig) -> AppResult<Output> {
    let slope = cfg.slope()?;
    let sigma = cfg.sigma()?;
    let a = cfg.intercept(&slope)?;
    let depth = cfg.depth_or(10);
    let matrix = (cfg.method != Method::Oracle)
        .then(|| matrix_counts(&a, sigma, &TransferSet::semantic(&slope), depth));
    let oracle = (cfg.method != Method::Matrix)
        .then(|| oracle_counts(&a, sigma, &slope, depth, cfg.cell_budget));
    let first_boundary = match &matrix {
        Some(m) => m.first_boundary,
        None => greedy_expand(&a, sigma, &slope, depth).first_boundary,
    };
    let reached = oracle.as_ref().map_or(depth, |o| o.counts.len() - 1);
    let mut code = if oracle.as_ref().is_some_and(|o| o.capped) {
        EXIT_BUDGET
    } else {
        EXIT_OK
    };
    let mut records = Vec::new();
    for k in 1..=reached {
        let mut r = obj(json!({
            "slope": slope.to_string(),
            "sigma": sigma.to_string(),
            "a": a.to_string(),
            "method": cfg.method,
            "k": k,
        }));
        if let Some(m) = &matrix {
            r.insert("matrix".into(), big(&m.counts[k]));
        }
        if let Some(o) = &oracle {
            r.insert("oracle".into(), big(&o.counts[k]));
        }
        let flagged = first_boundary.is_some_and(|b| k >= b);
        r.insert("boundary".into(), json!(flagged));
        if let (Some(m), Some(o)) = (&matrix, &oracle) {
            if m.counts[k] != o.counts[k] && !flagged {
                code = EXIT_MISMATCH;
            }
        }
        records.push(r);
    }
    Ok(Output { records, code })
}

fn cmd_dim(cfg: &RunConfig) -> AppResult<Output> {
    let slope = cfg.slope()?;
    let sigma = cfg.sigma()?;
    let a = cfg.intercept(&slope)?;
    let depth = cfg.depth_or(12);
    let est = box_dim_sequence::<BigInt, f64>(&a, sigma, &slope, depth, cfg.method, cfg.cell_budget)?;
    let window = cfg.window.unwrap_or(est.estimates.len().min(5));
    let (lo, hi) = est.tail_bounds(window)?;
    let mut records: Vec<Record> = est
        .depths
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let mut r = obj(json!({
                "slope": slope.to_string(),
                "sigma": sigma.to_string(),
                "a": a.to_string(),
                "method": cfg.method,
                "k": k,
                "count": big(&est.counts[i]),
            }));
            if let Some(o) = est.oracle_counts.as_ref().and_then(|o| o.get(i)) {
                r.insert("oracle".into(), big(o));
            }
            r.insert("estimate".into(), float(est.estimates[i]));
            r.insert("boundary".into(), json!(est.first_boundary.is_some_and(|b| k >= b)));
            r
        })
        .collect();
    if let Some(last) = records.last_mut() {
        last.insert("window".into(), json!(window));
        last.insert("tail_min".into(), float(lo));
        last.insert("tail_max".into(), float(hi));
    }
    let code = if est.oracle_capped { EXIT_BUDGET } else { EXIT_OK };
    Ok(Output { records, code })
}

fn default_qgrid() -> Vec<f64> {
    parse_qgrid("-2:0.25:2").expect("constant grid parses")
}

fn cmd_pressure(cfg: &RunConfig) -> AppResult<Output> {
    let slope = cfg.slope()?;
    let sigma = cfg.sigma()?;
    let depth = cfg.depth_or(8);
    let qs = cfg.q.clone().unwrap_or_else(default_qgrid);
    let curve = PressureCurve::<f64>::compute(&qs, sigma, &slope, depth, cfg.word_budget)?;
    let records = curve
        .points
        .iter()
        .map(|p| {
            obj(json!({
                "slope": slope.to_string(),
                "sigma": sigma.to_string(),
                "k": depth,
                "q": float(p.q),
                "raw": float(p.raw),
                "normalized": float(p.normalized),
            }))
        })
        .collect();
    Ok(Output::ok(records))
}

fn cmd_bound(cfg: &RunConfig) -> AppResult<Output> {
    let slope = cfg.slope()?;
    let sigma = cfg.sigma()?;
    let depth = cfg.depth_or(8);
    let qs = cfg.q.clone().unwrap_or_else(default_qgrid);
    let alphas = cfg
        .alpha
        .clone()
        .unwrap_or_else(|| vec![carpet_dimension::<f64>(sigma) - 1.0]);
    let curve = PressureCurve::<f64>::compute(&qs, sigma, &slope, depth, cfg.word_budget)?;
    let records = alphas
        .iter()
        .map(|&alpha| {
            let (bound, q) = curve.upper_bound(alpha)?;
            Ok(obj(json!({
                "slope": slope.to_string(),
                "sigma": sigma.to_string(),
                "k": depth,
                "alpha": float(alpha),
                "bound": float(bound),
                "q": float(q),
            })))
        })
        .collect::<Result<_, Error>>()?;
    Ok(Output::ok(records))
}

fn cmd_witness(cfg: &RunConfig) -> AppResult<Output> {
    let slope = cfg.slope()?;
    let sigma = cfg.sigma()?;
    let depth = cfg.depth_or(8);
    let qs = cfg
        .q
        .clone()
        .unwrap_or_else(|| (1..10).map(|i| i as f64 / 10.0).collect());
    let search = chord_witness::<f64>(sigma, &slope, depth, &qs, cfg.word_budget)?;
    let best = search.witness();
    let records = search
        .points
        .iter()
        .map(|p| {
            obj(json!({
                "slope": slope.to_string(),
                "sigma": sigma.to_string(),
                "k": depth,
                "q": float(p.q),
                "normalized": float(p.normalized),
                "chord": float((search.dimension - 1.0) * p.q + 1.0),
                "margin": float(p.margin),
                "witness": best.is_some_and(|b| b.q == p.q),
            }))
        })
        .collect();
    Ok(Output::ok(records))
}

fn cmd_verify(cfg: &RunConfig) -> AppResult<Output> {
    let depth = cfg.depth_or(7);
    for slope in &cfg.slopes {
        for a in &cfg.intercepts {
            if !slope.contains(a) {
                return Err(AppError::config(
                    "a",
                    format!("{a} lies outside [{}, 1] for slope {slope}", slope.intercept_min::<BigInt>()),
                ));
            }
        }
    }
    let report = verify_matrix_counts(&VerificationSuite {
        slopes: cfg.slopes.clone(),
        sigmas: cfg.sigmas.clone(),
        intercepts: cfg.intercepts.clone(),
        samples: cfg.samples,
        seed: cfg.seed,
        depth_cap: depth,
    });
    let mut records = Vec::new();
    for s in &report.samples {
        let status = match s.status {
            SampleStatus::Pass => "pass",
            SampleStatus::Mismatch => "mismatch",
            SampleStatus::Skipped => "skipped",
        };
        for k in 1..=s.matrix.len() {
            records.push(obj(json!({
                "id": s.id,
                "slope": s.slope,
                "sigma": s.sigma,
                "a": s.a,
                "random": s.random,
                "k": k,
                "matrix": big(&s.matrix[k - 1]),
                "oracle": big(&s.oracle[k - 1]),
                "status": status,
                "first_boundary": s.first_boundary,
            })));
        }
    }
    let code = if report.count(SampleStatus::Mismatch) > 0 {
        EXIT_MISMATCH
    } else {
        EXIT_OK
    };
    Ok(Output { records, code })
}

/// Renders; the SVG goes to `--out` when given, otherwise it is returned for
/// standard output.
fn cmd_render(cfg: &RunConfig) -> AppResult<(Output, Option<String>)> {
    let sigma = cfg.sigma()?;
    let mut opts = RenderOptions::new(cfg.depth_or(2));
    opts.canvas = cfg.canvas;
    opts.element_cap = cfg.element_cap;
    if !cfg.intercepts.is_empty() {
        let slope = cfg.slope()?;
        opts = opts.with_line(slope, cfg.intercept(&slope)?);
    }
    let r = render_svg(sigma, &opts)?;
    let Some(path) = &cfg.out else {
        return Ok((Output::ok(Vec::new()), Some(r.svg)));
    };
    fs::write(path, &r.svg)?;
    let mut rec = obj(json!({
        "sigma": sigma.to_string(),
        "depth": opts.depth,
        "rects": r.rects,
        "hits": r.hits,
        "lines": r.lines,
        "path": path.display().to_string(),
    }));
    if let Some((slope, a)) = &opts.line {
        rec.insert("slope".into(), json!(slope.to_string()));
        rec.insert("a".into(), json!(a.to_string()));
    }
    Ok((Output::ok(vec![rec]), None))
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn columns(records: &[Record]) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    for r in records {
        for k in r.keys() {
            if !cols.contains(k) {
                cols.push(k.clone());
            }
        }
    }
    cols
}

/// Writes records as JSON lines, CSV with a header row, or an aligned table.
pub fn write_records(records: &[Record], format: Format, w: &mut dyn Write) -> std::io::Result<()> {
    match format {
        Format::Json => {
            for r in records {
                serde_json::to_writer(&mut *w, r)?;
                writeln!(w)?;
            }
        }
        Format::Csv => {
            let cols = columns(records);
            let mut out = csv::Writer::from_writer(w);
            out.write_record(&cols)?;
            for r in records {
                out.write_record(cols.iter().map(|c| r.get(c).map(cell_text).unwrap_or_default()))?;
            }
            out.flush()?;
        }
        Format::Table => {
            let cols = columns(records);
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| cols.iter().map(|c| r.get(c).map(cell_text).unwrap_or_default()).collect())
                .collect();
            let widths: Vec<usize> = cols
                .iter()
                .enumerate()
                .map(|(i, c)| rows.iter().map(|r| r[i].len()).chain([c.len()]).max().unwrap_or(0))
                .collect();
            let line = |cells: &[String]| {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, &wd)| format!("{c:<wd$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
                    .trim_end()
                    .to_string()
            };
            writeln!(w, "{}", line(&cols))?;
            for r in &rows {
                writeln!(w, "{}", line(r))?;
            }
        }
    }
    Ok(())
}

/// Runs one parsed invocation, writing results to `stdout` (or `--out`).
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> AppResult<i32> {
    let cfg = RunConfig::from_flags(cli.flags)?;
    let output = match cli.command {
        Command::Matrices => cmd_matrices(&cfg)?,
        Command::Expand => cmd_expand(&cfg)?,
        Command::Count => cmd_count(&cfg)?,
        Command::Dim => cmd_dim(&cfg)?,
        Command::Pressure => cmd_pressure(&cfg)?,
        Command::Bound => cmd_bound(&cfg)?,
        Command::Witness => cmd_witness(&cfg)?,
        Command::Verify => cmd_verify(&cfg)?,
        Command::Render => {
            let (output, svg) = cmd_render(&cfg)?;
            if let Some(svg) = svg {
                stdout.write_all(svg.as_bytes())?;
                return Ok(output.code);
            }
            write_records(&output.records, cfg.format, stdout)?;
            return Ok(output.code);
        }
    };
    match &cfg.out {
        Some(path) => {
            let mut file = fs::File::create(path)?;
            write_records(&output.records, cfg.format, &mut file)?;
        }
        None => write_records(&output.records, cfg.format, stdout)?,
    }
    Ok(output.code)
}

/// Parses arguments, runs, reports errors on `stderr`, and returns the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["moran-carpet"];
        argv.extend_from_slice(args);
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn lines(s: &str) -> Vec<Value> {
        s.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
    }

    #[test]
    fn matrices_for_unit_slope() {
        let (code, out, _) = call(&["matrices", "--slope", "1/1", "--closed-form"]);
        assert_eq!(code, 0);
        let recs = lines(&out);
        assert_eq!(recs.len(), 7);
        assert_eq!(recs.iter().filter(|r| r["tag"] == 0).count(), 3);
        assert_eq!(recs[0]["rows"], json!([[1, 0], [2, 2]]));
        assert!(recs.iter().all(|r| r["equal"] == true));
    }

    #[test]
    fn horizontal_matrices_and_reduced_slope_guard() {
        let (_, out, _) = call(&["matrices", "--slope", "0/1"]);
        let recs = lines(&out);
        let tag0: Vec<_> = recs.iter().filter(|r| r["tag"] == 0).map(|r| r["rows"].clone()).collect();
        assert_eq!(tag0, vec![json!([[3]]), json!([[2]]), json!([[3]])]);
        let (code, _, err) = call(&["matrices", "--slope", "2/4"]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("not in lowest terms"), "{err}");
    }

    #[test]
    fn count_both_stream() {
        let (code, out, _) = call(&["count", "--method", "both", "--a", "1/2", "--depth", "2"]);
        assert_eq!(code, 0);
        let recs = lines(&out);
        assert_eq!(recs.len(), 2);
        assert_eq!((recs[0]["k"].clone(), recs[0]["matrix"].clone(), recs[0]["oracle"].clone()), (json!(1), json!(3), json!(3)));
        assert_eq!((recs[1]["k"].clone(), recs[1]["matrix"].clone(), recs[1]["oracle"].clone()), (json!(2), json!(9), json!(9)));
        assert_eq!(recs[0]["slope"], "1/1");
        assert_eq!(recs[0]["sigma"], "(0)");
    }

    #[test]
    fn exact_counts_print_exactly() {
        let (_, out, _) = call(&["count", "--slope", "0/1", "--a", "1/2", "--depth", "90"]);
        let last = out.lines().last().unwrap();
        assert!(last.contains(&format!("\"matrix\":{}", BigUint::from(2u32).pow(90))), "{last}");
    }

    #[test]
    fn horizontal_dimension() {
        let (code, out, _) = call(&["dim", "--slope", "0/1", "--a", "1/2", "--depth", "20"]);
        assert_eq!(code, 0);
        let recs = lines(&out);
        let est = recs.last().unwrap()["estimate"].as_f64().unwrap();
        assert!((est - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn expand_left_endpoint() {
        let (code, out, _) = call(&["expand", "--slope", "2/3", "--a", "-2/3", "--depth", "6"]);
        assert_eq!(code, 0);
        let r = &lines(&out)[0];
        assert_eq!(r["index"], 1);
        assert_eq!(r["digits"], json!([0, 0, 0, 0, 0, 0]));
    }

    #[test]
    fn config_errors_are_field_specific() {
        let (code, _, err) = call(&["count", "--a", "5/2"]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("--a"), "{err}");
        let (code, _, err) = call(&["pressure", "--qgrid", "1:0:2"]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("--qgrid"), "{err}");
        let (code, _, err) = call(&["dim", "--a", "1/2", "--format", "xml"]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("--format"), "{err}");
    }

    #[test]
    fn budget_exit_code() {
        let (code, _, _) = call(&["pressure", "--depth", "20", "--q", "0.5"]);
        assert_eq!(code, EXIT_BUDGET);
        let (code, out, _) = call(&["count", "--method", "oracle", "--a", "1/3", "--depth", "12", "--cell-budget", "1000"]);
        assert_eq!(code, EXIT_BUDGET);
        assert!(!out.is_empty());
        let (code, _, _) = call(&["render", "--sigma", "(1)", "--depth", "5"]);
        assert_eq!(code, EXIT_BUDGET);
    }

    #[test]
    fn qgrid_expansion() {
        let g = parse_qgrid("-2:0.25:2").unwrap();
        assert_eq!(g.len(), 17);
        assert_eq!((g[0], g[8], g[16]), (-2.0, 0.0, 2.0));
        assert!(parse_qgrid("0:1").is_err());
    }

    #[test]
    fn csv_and_table() {
        let (_, out, _) = call(&["count", "--a", "1/2", "--depth", "2", "--format", "csv"]);
        let mut it = out.lines();
        assert_eq!(it.next(), Some("slope,sigma,a,method,k,matrix,boundary"));
        assert_eq!(it.next(), Some("1/1,(0),1/2,matrix,1,3,false"));
        let (_, out, _) = call(&["pressure", "--q", "0,1", "--depth", "3", "--format", "table"]);
        assert_eq!(out.lines().count(), 3);
        assert!(out.starts_with("slope"));
    }
}
