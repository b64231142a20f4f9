//! Command-line front end.
//!
//! Output is assembled in memory in a fixed order, so identical arguments
//! give byte-identical output. Exit codes are listed in [`exit`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{mean_drifts, stability, CoordinateDecayProfile, MeanDrifts, Stability};
use crate::directional::{
    DecayAnalysis, Direction, DirectionalDecayReport, Regime, TypeClassification,
};
use crate::error::{Error, Result};
use crate::geometry::{Point, DEFAULT_SAMPLES};
use crate::model::{QbdModel, Violation};
use crate::oracle::{fit_decay, solve_truncated, SlopeFit};
use crate::polling::{build_limited_service, LimitedServiceParams};

pub mod exit {
    pub const OK: i32 = 0;
    pub const GENERIC: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INVALID_MODEL: i32 = 3;
    pub const UNSTABLE: i32 = 4;
    pub const NON_CONVERGENCE: i32 = 5;
    pub const VERIFICATION_FAILED: i32 = 6;
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidModel(_) => exit::INVALID_MODEL,
        Error::Unstable(_) => exit::UNSTABLE,
        Error::NonConvergence { .. } => exit::NON_CONVERGENCE,
        _ => exit::GENERIC,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qbd-decay",
    version,
    about = "Directional tail decay rates of 2d-QBD processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stability verdict, coordinate profile and per-direction decay rates.
    Analyze(AnalyzeArgs),
    /// Sampled boundary of the level set `spr = 1` with its marked points.
    Curve(CurveArgs),
    /// Compare analytic decay rates with slopes of a truncated solve.
    Verify(VerifyArgs),
    /// Check the model's structural invariants.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    LimitedService,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// Model source: a JSON file or the built-in polling model.
#[derive(Clone, Debug, Args)]
pub struct Source {
    /// JSON model file.
    #[arg(long, conflicts_with = "builtin")]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,
    #[arg(long, default_value_t = 0.3)]
    pub l1: f64,
    #[arg(long, default_value_t = 0.3)]
    pub l2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub m1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub m2: f64,
    /// Service limit of queue 1.
    #[arg(long = "K", default_value_t = 1)]
    pub k: usize,
}

#[derive(Clone, Debug, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const DEFAULT_DIRS: [&str; 5] = ["1,0", "2,1", "1,1", "1,2", "0,1"];

#[derive(Clone, Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, num_args = 1.., default_values_t = DEFAULT_DIRS.map(|d| d.parse::<Direction>().unwrap()))]
    pub dirs: Vec<Direction>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub source: Source,
    /// Directions whose tangent points `R_c` are marked.
    #[arg(long, num_args = 1.., default_values_t = DEFAULT_DIRS.map(|d| d.parse::<Direction>().unwrap()))]
    pub dirs: Vec<Direction>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    /// With `--format csv`, also write the marked points here.
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, num_args = 1.., default_values_t = DEFAULT_DIRS.map(|d| d.parse::<Direction>().unwrap()))]
    pub dirs: Vec<Direction>,
    /// Truncation level.
    #[arg(long = "N", default_value_t = 60)]
    pub n: usize,
    /// Accepted relative gap between fitted and analytic rates.
    #[arg(long, default_value_t = 0.1)]
    pub band: f64,
    /// Fit window `k_lo,k_hi`; defaults to `[N/(4 max c), N/(2 max c)]`.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<(usize, usize)>,
    /// Write the truncated stationary distribution as CSV.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub output: Output,
}

fn parse_window(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected k_lo,k_hi")?;
    let lo = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

impl Source {
    fn describe(&self) -> String {
        match &self.model {
            Some(p) => format!("file {}", p.display()),
            None => format!(
                "limited-service l1={} l2={} m1={} m2={} K={}",
                self.l1, self.l2, self.m1, self.m2, self.k
            ),
        }
    }

    /// Loads the model without validating it.
    fn load(&self) -> Result<QbdModel<f64>> {
        match (&self.model, self.builtin) {
            (Some(p), _) => QbdModel::load(p).map_err(|e| match e {
                Error::Json(j) => Error::InvalidModel(format!("{}: {j}", p.display())),
                e => e,
            }),
            (None, Some(Builtin::LimitedService)) => {
                let p = LimitedServiceParams::new(self.l1, self.l2, self.m1, self.m2, self.k)?;
                build_limited_service(&p)
            }
            (None, None) => Err(Error::InvalidParameter(
                "one of --model or --builtin is required".into(),
            )),
        }
    }
}

/// Parses `args` (program name first), runs the command and writes the
/// result to `stdout` or `--out`. Diagnostics go to `stderr`.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    let (output, result) = match &cli.command {
        Command::Analyze(a) => (&a.output, analyze(a)),
        Command::Curve(a) => (&a.output, curve(a)),
        Command::Verify(a) => (&a.output, verify(a)),
        Command::Validate(a) => (&a.output, validate(a)),
    };
    let Outcome {
        text,
        code,
        message,
    } = match result {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(&e);
        }
    };
    if let Some(m) = message {
        let _ = writeln!(stderr, "{m}");
    }
    let written = match &output.out {
        Some(path) => std::fs::write(path, &text),
        None => stdout.write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return exit::GENERIC;
    }
    code
}

struct Outcome {
    text: String,
    code: i32,
    message: Option<String>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self {
            text,
            code: exit::OK,
            message: None,
        }
    }
}

/// `x` rounded to `digits` significant figures.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding may carry into a new leading digit
    let rounded: f64 = s.parse().unwrap_or(x);
    let m2 = rounded.abs().log10().floor() as i64;
    if m2 > magnitude && decimals > 0 {
        format!("{x:.*}", decimals - 1)
    } else {
        s
    }
}

fn sig3(x: f64) -> String {
    sig(x, 3)
}

fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|j| {
            rows.iter()
                .filter_map(|r| r.get(j))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(j, s)| format!("{s:<w$}", w = widths[j]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn csv_string<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn direction_label(c: Direction) -> String {
    let n2 = c.c1 * c.c1 + c.c2 * c.c2;
    let root = (n2 as f64).sqrt().round() as u32;
    let norm = if root * root == n2 {
        format!("{root}")
    } else {
        format!("sqrt{n2}")
    };
    if norm == "1" {
        format!("xi({c})")
    } else {
        format!("xi({c})/{norm}")
    }
}

fn verdict_of(drifts: &MeanDrifts<f64>) -> Stability {
    stability(drifts)
}

fn unstable_outcome(
    source: &Source,
    drifts: &MeanDrifts<f64>,
    verdict: Stability,
    format: Format,
) -> Result<Outcome> {
    #[derive(Serialize)]
    struct Unstable<'a> {
        source: String,
        stability: Stability,
        drifts: &'a MeanDrifts<f64>,
    }
    let text = match format {
        Format::Json => {
            serde_json::to_string_pretty(&Unstable {
                source: source.describe(),
                stability: verdict,
                drifts,
            })? + "\n"
        }
        _ => format!("model      {}\nstability  {verdict:?}\n", source.describe()),
    };
    Ok(Outcome {
        text,
        code: exit::UNSTABLE,
        message: Some(format!(
            "model is not positive recurrent (verdict: {verdict:?})"
        )),
    })
}

/// Loads, validates and gates on stability. `Err(outcome)` carries the
/// early exit for unstable models.
fn prepare(
    source: &Source,
    format: Format,
) -> Result<std::result::Result<DecayAnalysis<f64>, Outcome>> {
    let model = source.load()?;
    model.ensure_valid()?;
    let drifts = mean_drifts(&model)?;
    let verdict = verdict_of(&drifts);
    if verdict != Stability::PositiveRecurrent {
        return unstable_outcome(source, &drifts, verdict, format).map(Err);
    }
    Ok(Ok(DecayAnalysis::new(model)?))
}

/// Extreme values of the level set, without the outline samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaExtremes {
    pub theta1_min: f64,
    pub theta1_max: f64,
    pub theta2_min: f64,
    pub theta2_max: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub source: String,
    pub s0: usize,
    pub stability: Stability,
    pub gamma: GammaExtremes,
    pub profile: CoordinateDecayProfile<f64>,
    pub classification: TypeClassification<f64>,
    pub directions: Vec<DirectionalDecayReport<f64>>,
}

fn analyze(a: &AnalyzeArgs) -> Result<Outcome> {
    let analysis = match prepare(&a.source, a.output.format)? {
        Ok(x) => x,
        Err(o) => return Ok(o),
    };
    let directions = a
        .dirs
        .par_iter()
        .map(|&c| analysis.xi_c(c))
        .collect::<Result<Vec<_>>>()?;
    let g = &analysis.geometry.gamma;
    let report = AnalyzeReport {
        source: a.source.describe(),
        s0: analysis.model.s0(),
        stability: analysis.profile.stability,
        gamma: GammaExtremes {
            theta1_min: g.theta1_min,
            theta1_max: g.theta1_max,
            theta2_min: g.theta2_min,
            theta2_max: g.theta2_max,
        },
        profile: analysis.profile.clone(),
        classification: analysis.classification.clone(),
        directions,
    };
    let text = match a.output.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => analyze_csv(&report)?,
        Format::Text => analyze_text(&report),
    };
    Ok(Outcome::ok(text))
}

fn analyze_text(r: &AnalyzeReport) -> String {
    let p = &r.profile;
    let cl = &r.classification;
    let slope = |s: Option<f64>| s.map_or_else(|| "vertical".to_string(), sig3);
    let mut out = String::new();
    let _ = writeln!(out, "model      {} (s0 = {})", r.source, r.s0);
    let _ = writeln!(
        out,
        "stability  {:?} (a1 = {}, a2 = {})",
        r.stability,
        sig3(p.drifts.a1),
        sig3(p.drifts.a2)
    );
    let _ = writeln!(
        out,
        "type       {:?} (slope at Q1 {}, at Q2 {})",
        cl.type_class,
        slope(cl.slope_q1),
        slope(cl.slope_q2)
    );
    out.push('\n');
    let mut header = vec![
        "theta1_max".to_string(),
        "theta1*".into(),
        "theta2_max".into(),
        "theta2*".into(),
    ];
    let mut values = vec![
        sig3(r.gamma.theta1_max),
        sig3(p.theta1_star),
        sig3(r.gamma.theta2_max),
        sig3(p.theta2_star),
    ];
    for d in &r.directions {
        header.push(direction_label(d.c));
        values.push(sig3(d.xi_c_normalized));
    }
    out.push_str(&table(&[header, values]));
    out.push('\n');
    let mut rows = vec![[
        "c",
        "xi_c",
        "theta_c_max",
        "dagger_c1",
        "dagger_c2",
        "regime",
        "binding",
    ]
    .map(String::from)
    .to_vec()];
    for d in &r.directions {
        rows.push(vec![
            format!("({})", d.c),
            sig3(d.xi_c),
            sig3(d.theta_c_max),
            sig3(d.theta_dagger_c1),
            sig3(d.theta_dagger_c2),
            format!("{:?}", d.regime),
            format!("{:?}", d.binding_constraint),
        ]);
    }
    out.push_str(&table(&rows));
    out
}

fn analyze_csv(r: &AnalyzeReport) -> Result<String> {
    let header = [
        "c1",
        "c2",
        "xi_c",
        "xi_c_normalized",
        "theta_c_min",
        "theta_c_max",
        "theta_dagger_c1",
        "theta_dagger_c2",
        "type_class",
        "regime",
        "binding",
    ];
    csv_string(
        &header,
        r.directions.iter().map(|d| {
            (
                d.c.c1,
                d.c.c2,
                d.xi_c,
                d.xi_c_normalized,
                d.theta_c_min,
                d.theta_c_max,
                d.theta_dagger_c1,
                d.theta_dagger_c2,
                format!("{:?}", d.type_class),
                format!("{:?}", d.regime),
                format!("{:?}", d.binding_constraint),
            )
        }),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub name: String,
    pub theta1: f64,
    pub theta2: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveReport {
    pub samples: Vec<Point<f64>>,
    pub points: Vec<MarkedPoint>,
}

/// `P1`, `P2`, `Q1`, `Q2` and `R_c` for each direction.
pub fn marked_points(
    analysis: &DecayAnalysis<f64>,
    dirs: &[Direction],
) -> Result<Vec<MarkedPoint>> {
    let geo = &analysis.geometry;
    let g = &geo.gamma;
    let cl = &analysis.classification;
    let mark = |name: String, p: Point<f64>| MarkedPoint {
        name,
        theta1: p.0,
        theta2: p.1,
    };
    let mut out = vec![
        mark("P1".into(), g.right),
        mark("P2".into(), g.top),
        mark("Q1".into(), cl.q1),
        mark("Q2".into(), cl.q2),
    ];
    for &c in dirs {
        let ext = analysis.directional_extremes(c)?;
        out.push(mark(format!("R({c})"), ext.argmax));
    }
    Ok(out)
}

fn curve(a: &CurveArgs) -> Result<Outcome> {
    let model = a.source.load()?;
    model.ensure_valid()?;
    let drifts = mean_drifts(&model)?;
    let verdict = verdict_of(&drifts);
    if verdict != Stability::PositiveRecurrent {
        return unstable_outcome(&a.source, &drifts, verdict, a.output.format);
    }
    let analysis = DecayAnalysis::with_samples(model, a.samples)?;
    let report = CurveReport {
        samples: analysis.geometry.gamma.boundary_samples.clone(),
        points: marked_points(&analysis, &a.dirs)?,
    };
    let text = match a.output.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => {
            if let Some(path) = &a.points {
                let pts = csv_string(
                    &["point", "theta1", "theta2"],
                    report.points.iter().map(|p| (&p.name, p.theta1, p.theta2)),
                )?;
                std::fs::write(path, pts)?;
            }
            csv_string(&["theta1", "theta2"], report.samples.iter().copied())?
        }
        Format::Text => {
            let mut rows = vec![vec!["point".to_string(), "theta1".into(), "theta2".into()]];
            rows.extend(
                report
                    .points
                    .iter()
                    .map(|p| vec![p.name.clone(), sig3(p.theta1), sig3(p.theta2)]),
            );
            format!(
                "{} boundary samples\n\n{}",
                report.samples.len(),
                table(&rows)
            )
        }
    };
    Ok(Outcome::ok(text))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyRow {
    pub c: Direction,
    pub xi_c: Option<f64>,
    pub regime: Option<Regime>,
    pub fit: Option<SlopeFit>,
    /// `(fitted − xi_c) / xi_c`.
    pub relative_gap: Option<f64>,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub source: String,
    pub n: usize,
    pub band: f64,
    pub solver_residual: f64,
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Analytic rate against truncated-solve slope for each direction. Per
/// direction failures are recorded in the row.
pub fn verify_directions(
    analysis: &DecayAnalysis<f64>,
    dirs: &[Direction],
    n: usize,
    band: f64,
    window: Option<(usize, usize)>,
) -> Result<(VerifyReport, crate::oracle::TruncatedStationary)> {
    let ts = solve_truncated(&analysis.model, n)?;
    let rows = dirs
        .par_iter()
        .map(|&c| {
            let mut row = VerifyRow {
                c,
                xi_c: None,
                regime: None,
                fit: None,
                relative_gap: None,
                pass: false,
                error: None,
            };
            let outcome = analysis.xi_c(c).and_then(|rep| {
                row.xi_c = Some(rep.xi_c);
                row.regime = Some(rep.regime);
                let fit = fit_decay(&ts, c, None, window)?;
                let gap = (fit.decay_rate() - rep.xi_c) / rep.xi_c;
                row.relative_gap = Some(gap);
                row.pass = gap.abs() <= band;
                row.fit = Some(fit);
                Ok(())
            });
            if let Err(e) = outcome {
                row.error = Some(e.to_string());
            }
            row
        })
        .collect();
    let report = VerifyReport {
        source: String::new(),
        n,
        band,
        solver_residual: ts.solver_residual,
        rows,
    };
    Ok((report, ts))
}

fn verify(a: &VerifyArgs) -> Result<Outcome> {
    let analysis = match prepare(&a.source, a.output.format)? {
        Ok(x) => x,
        Err(o) => return Ok(o),
    };
    let (mut report, ts) = verify_directions(&analysis, &a.dirs, a.n, a.band, a.window)?;
    report.source = a.source.describe();
    if let Some(path) = &a.dump {
        ts.write_csv(std::fs::File::create(path)?)?;
    }
    let text = match a.output.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => verify_csv(&report)?,
        Format::Text => verify_text(&report),
    };
    let pass = report.all_pass();
    Ok(Outcome {
        text,
        code: if pass {
            exit::OK
        } else {
            exit::VERIFICATION_FAILED
        },
        message: (!pass).then(|| "verification failed".to_string()),
    })
}

fn verify_text(r: &VerifyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model     {}", r.source);
    let _ = writeln!(
        out,
        "N         {} (residual {:.1e})",
        r.n, r.solver_residual
    );
    let _ = writeln!(out, "band      {}%", sig3(r.band * 100.0));
    out.push('\n');
    let mut rows = vec![[
        "c",
        "window",
        "xi_c",
        "fitted",
        "gap",
        "std_err",
        "phase_spread",
        "p_eff",
        "result",
    ]
    .map(String::from)
    .to_vec()];
    for row in &r.rows {
        let mut cells = vec![format!("({})", row.c)];
        match (&row.fit, row.xi_c, row.relative_gap) {
            (Some(f), Some(xi), Some(gap)) => cells.extend([
                format!("{}..{}", f.k_lo, f.k_hi),
                sig3(xi),
                sig3(f.decay_rate()),
                format!("{}%", sig(gap * 100.0, 2)),
                sig(f.std_error, 2),
                sig(f.phase_spread(), 2),
                sig(f.p_eff, 2),
                if row.pass { "PASS" } else { "FAIL" }.into(),
            ]),
            _ => cells.push(format!(
                "FAIL: {}",
                row.error.as_deref().unwrap_or("unavailable")
            )),
        }
        rows.push(cells);
    }
    out.push_str(&table(&rows));
    out
}

fn verify_csv(r: &VerifyReport) -> Result<String> {
    let header = [
        "c1",
        "c2",
        "xi_c",
        "fitted",
        "relative_gap",
        "std_error",
        "phase_spread",
        "curvature",
        "p_eff",
        "k_lo",
        "k_hi",
        "pass",
    ];
    csv_string(
        &header,
        r.rows.iter().map(|row| {
            let f = row.fit.as_ref();
            (
                row.c.c1,
                row.c.c2,
                row.xi_c,
                f.map(SlopeFit::decay_rate),
                row.relative_gap,
                f.map(|f| f.std_error),
                f.map(SlopeFit::phase_spread),
                f.map(|f| f.curvature),
                f.map(|f| f.p_eff),
                f.map(|f| f.k_lo),
                f.map(|f| f.k_hi),
                row.pass,
            )
        }),
    )
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidateReport {
    pub source: String,
    pub valid: bool,
    pub violations: Vec<Violation>,
    pub stability: Option<Stability>,
}

fn validate(a: &ValidateArgs) -> Result<Outcome> {
    let model = a.source.load()?;
    let violations = model.validate();
    let valid = violations.is_empty();
    let stability = if valid {
        Some(verdict_of(&mean_drifts(&model)?))
    } else {
        None
    };
    let report = ValidateReport {
        source: a.source.describe(),
        valid,
        violations,
        stability,
    };
    let text = match a.output.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => csv_string(
            &["kind", "region", "step", "row", "magnitude"],
            report.violations.iter().map(|v| {
                (
                    format!("{:?}", v.kind),
                    v.region.json_key(),
                    v.step.map(|s| s.to_string()),
                    v.row,
                    v.magnitude,
                )
            }),
        )?,
        Format::Text => {
            let mut out = format!("model      {}\n", report.source);
            match report.stability {
                Some(s) => {
                    let _ = writeln!(out, "valid\nstability  {s:?}");
                }
                None => {
                    let _ = writeln!(out, "invalid ({} violations)", report.violations.len());
                    for v in &report.violations {
                        let _ = writeln!(out, "  {v}");
                    }
                }
            }
            out
        }
    };
    Ok(Outcome {
        text,
        code: if valid { exit::OK } else { exit::INVALID_MODEL },
        message: (!valid).then(|| "model is invalid".to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_figures() {
        assert_eq!(sig3(0.67724), "0.677");
        assert_eq!(sig3(1.2971), "1.30");
        assert_eq!(sig3(0.09079), "0.0908");
        assert_eq!(sig3(0.9996), "1.00");
        assert_eq!(sig3(-9.8681), "-9.87");
        assert_eq!(sig3(123.4), "123");
        assert_eq!(sig3(0.0), "0");
    }

    #[test]
    fn labels() {
        assert_eq!(direction_label(Direction::new(1, 0).unwrap()), "xi(1,0)");
        assert_eq!(
            direction_label(Direction::new(2, 1).unwrap()),
            "xi(2,1)/sqrt5"
        );
        assert_eq!(direction_label(Direction::new(3, 4).unwrap()), "xi(3,4)/5");
    }

    #[test]
    fn usage_errors() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(
            run(["qbd-decay", "analyze", "--dirs", "0,0"], &mut o, &mut e),
            exit::USAGE
        );
        assert_eq!(
            run(["qbd-decay", "frobnicate"], &mut o, &mut e),
            exit::USAGE
        );
        assert_eq!(run(["qbd-decay", "analyze"], &mut o, &mut e), exit::GENERIC);
    }
}
