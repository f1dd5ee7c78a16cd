//! Batch front end: `levels`, `resonance`, `sweep`, `diagnostics`, `verify`.

pub mod config;
pub mod output;
pub mod verify;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{attach_kappa_fit, lambda_gap, ratio_limit, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::level_solver::{solve_level, solve_resonance, LevelResult, SolverConfig};
use crate::operator_builder::{Branch, Frame, Variant};
use crate::scalars::{format_real, PrecisionContext};

pub use config::{FileConfig, FrameKind, OutputFormat, RunConfig};
pub use output::{ResultRow, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "relosc", version, about = "Metastable levels and resonances of the 1D Dirac and Klein-Gordon oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Self-consistent levels in one frame.
    Levels(RunArgs),
    /// Dilated-frame resonances.
    Resonance(RunArgs),
    /// Levels over several frames (default t, r, d).
    Sweep(RunArgs),
    /// Lambda saturation curves, kappa and delta ratios and their fits.
    Diagnostics(DiagnosticsArgs),
    /// Built-in pass/fail suites.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct RunArgs {
    /// Comma-separated values or `start:stop:step` ranges.
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<String>,
    /// Comma-separated indices or `lo-hi` ranges.
    #[arg(long)]
    levels: Option<String>,
    /// t, r or d (comma-separated for sweep).
    #[arg(long)]
    frame: Option<String>,
    #[arg(long)]
    y: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    digits: Option<u32>,
    #[arg(long)]
    blocks: Option<usize>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// dirac or kg; by default kg in the real frame and dirac elsewhere.
    #[arg(long)]
    variant: Option<String>,
    /// plus or minus.
    #[arg(long)]
    branch: Option<String>,
    /// TOML file with the same keys; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Leave `wall_time_s` empty so repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct DiagnosticsArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Block counts of the Lambda(n) curve; defaults to five steps up to `--blocks`.
    #[arg(long)]
    curve_blocks: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VerifyLevelArg {
    Quick,
    Full,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(value_enum)]
    level: VerifyLevelArg,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Levels(a) => resolve(&a, None).map(|c| cmd_levels(&c)),
        Command::Resonance(a) => resolve(&a, Some(vec![FrameKind::Dilated])).map(|c| cmd_levels(&c)),
        Command::Sweep(a) => build_config(&a).map(|mut c| {
            if a.frame.is_none() {
                c.frames = vec![FrameKind::Translated, FrameKind::Real, FrameKind::Dilated];
            }
            cmd_levels(&c)
        }),
        Command::Diagnostics(a) => resolve(&a.run, None).and_then(|c| {
            let curve = match &a.curve_blocks {
                Some(s) => config::parse_levels(s)?,
                None => default_curve(c.basis_blocks),
            };
            Ok(cmd_diagnostics(&c, &curve))
        }),
        Command::Verify(a) => {
            let format = match a.format.as_deref().map(OutputFormat::parse).transpose() {
                Ok(f) => f.unwrap_or(OutputFormat::Csv),
                Err(e) => return report_usage(&e),
            };
            let level = match a.level {
                VerifyLevelArg::Quick => verify::VerifyLevel::Quick,
                VerifyLevelArg::Full => verify::VerifyLevel::Full,
            };
            Ok(cmd_verify(level, format, a.out.as_deref()))
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => report_usage(&e),
    }
}

fn report_usage(e: &Error) -> i32 {
    eprintln!("usage error: {e}");
    EXIT_USAGE
}

fn resolve(a: &RunArgs, forced_frames: Option<Vec<FrameKind>>) -> Result<RunConfig> {
    let mut cfg = build_config(a)?;
    match forced_frames {
        Some(f) => cfg.frames = f,
        None if cfg.frames.len() != 1 => {
            return Err(Error::InvalidParameter(
                "this command takes a single frame; use sweep".into(),
            ))
        }
        None => {}
    }
    Ok(cfg)
}

/// Defaults, then the config file, then flags.
fn build_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &a.config {
        FileConfig::load(path)?.apply(&mut cfg)?;
    }
    if let Some(v) = &a.omega {
        cfg.omega_list = config::parse_omega_list(v)?;
    }
    if let Some(v) = &a.levels {
        cfg.levels = config::parse_levels(v)?;
    }
    if let Some(v) = &a.frame {
        cfg.frames = v
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(FrameKind::parse)
            .collect::<Result<_>>()?;
    }
    if let Some(v) = a.y {
        cfg.y = v;
    }
    if let Some(v) = a.theta {
        cfg.theta = v;
    }
    if let Some(v) = a.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = a.digits {
        cfg.digits = v;
    }
    if let Some(v) = a.blocks {
        cfg.basis_blocks = v;
    }
    if let Some(v) = &a.format {
        cfg.output_format = OutputFormat::parse(v)?;
    }
    if let Some(v) = &a.out {
        cfg.output_path = Some(v.clone());
    }
    if let Some(v) = &a.variant {
        cfg.variant = Some(config::parse_variant(v)?);
    }
    if let Some(v) = &a.branch {
        cfg.branch = config::parse_branch(v)?;
    }
    if a.no_timing {
        cfg.timing = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_curve(blocks: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (1..=5).map(|k| (blocks * k / 5).max(2)).collect();
    v.dedup();
    v
}

fn variant_tag(v: Variant) -> &'static str {
    match v {
        Variant::DiracTitchmarsh => "dirac",
        Variant::KleinGordon => "kg",
    }
}

fn branch_tag(b: Branch) -> &'static str {
    match b {
        Branch::Plus => "plus",
        Branch::Minus => "minus",
    }
}

fn solver_config(cfg: &RunConfig, frame: FrameKind, blocks: usize) -> Result<SolverConfig> {
    let ctx = PrecisionContext::new(cfg.digits)?;
    Ok(SolverConfig::new(ctx, blocks)
        .with_variant(cfg.variant_for(frame))
        .with_branch(cfg.branch)
        .with_sigma(cfg.sigma))
}

/// Solves one `(Omega, n, frame)` cell at the configured truncation.
pub fn solve_cell(cfg: &RunConfig, omega: &str, n: usize, frame: FrameKind) -> Result<LevelResult> {
    solve_cell_with_blocks(cfg, omega, n, frame, cfg.basis_blocks)
}

fn solve_cell_with_blocks(cfg: &RunConfig, omega: &str, n: usize, frame: FrameKind, blocks: usize) -> Result<LevelResult> {
    let sc = solver_config(cfg, frame, blocks)?;
    let ctx = &sc.ctx;
    let w = ctx.parse_real(omega)?;
    match frame {
        FrameKind::Translated => solve_level(&w, n, &Frame::Translated { y: ctx.real(cfg.y) }, &sc),
        FrameKind::Real => solve_level(&w, n, &Frame::Real, &sc),
        FrameKind::Dilated => solve_resonance(&w, n, &ctx.real(cfg.theta), &sc),
    }
}

fn result_row(cfg: &RunConfig, omega: &str, n: usize, frame: FrameKind, res: &Result<LevelResult>, secs: f64) -> ResultRow {
    let digits = cfg.digits as usize;
    let y_or_theta = match frame {
        FrameKind::Translated => cfg.y,
        FrameKind::Real => 0.0,
        FrameKind::Dilated => cfg.theta,
    };
    let mut row = ResultRow {
        schema_version: SCHEMA_VERSION,
        omega: omega.to_string(),
        n,
        frame: frame.tag().to_string(),
        variant: variant_tag(cfg.variant_for(frame)).to_string(),
        branch: branch_tag(cfg.branch).to_string(),
        basis_blocks: cfg.basis_blocks,
        digits: cfg.digits,
        sigma: cfg.sigma,
        y_or_theta,
        wall_time_s: if cfg.timing { format!("{secs:.3}") } else { String::new() },
        ..Default::default()
    };
    match res {
        Ok(r) => {
            row.energy = format_real(r.energy.real(), digits, false);
            row.im_energy = format_real(r.energy.imag(), digits, true);
            row.lambda = format_real(r.lambda.real(), digits, false);
            row.lambda_im = format_real(r.lambda.imag(), digits, true);
            row.residual = format_real(&r.residual, 6, true);
        }
        Err(e) => row.error = e.to_string(),
    }
    row
}

fn cells(cfg: &RunConfig) -> Vec<(String, usize, FrameKind)> {
    let mut out = Vec::new();
    for w in &cfg.omega_list {
        for &n in &cfg.levels {
            for &f in &cfg.frames {
                out.push((w.clone(), n, f));
            }
        }
    }
    out
}

/// Rows for every `(Omega, n, frame)` cell, solved in parallel and sorted.
pub fn levels_table(cfg: &RunConfig) -> Vec<ResultRow> {
    let mut rows: Vec<ResultRow> = cells(cfg)
        .par_iter()
        .map(|(w, n, f)| {
            let start = Instant::now();
            let res = solve_cell(cfg, w, *n, *f);
            result_row(cfg, w, *n, *f, &res, start.elapsed().as_secs_f64())
        })
        .collect();
    output::sort_rows(&mut rows);
    rows
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| Error::InvalidParameter(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn cmd_levels(cfg: &RunConfig) -> i32 {
    let rows = levels_table(cfg);
    let written = open_out(cfg.output_path.as_deref()).and_then(|w| output::write_rows(&rows, cfg.output_format, w));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_SOLVER;
    }
    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
    if failed > 0 {
        eprintln!("{failed} of {} rows failed", rows.len());
        return EXIT_SOLVER;
    }
    EXIT_OK
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DiagnosticsRow {
    pub schema_version: u32,
    pub omega: String,
    #[serde(rename = "Lambda")]
    pub lambda: String,
    pub minus_two_ln_im: String,
    #[serde(rename = "ratio_Lambda")]
    pub ratio_lambda: String,
    pub kappa: String,
    pub delta: String,
    pub kappa_fit_intercept: String,
    pub kappa_fit_slope: String,
    pub ratio_limit: String,
    pub digits: u32,
    pub basis_blocks: usize,
    pub error: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CurveRow {
    pub schema_version: u32,
    pub omega: String,
    pub n: usize,
    #[serde(rename = "Lambda")]
    pub lambda: String,
    pub error: String,
}

/// Records and `Lambda(n)` curve rows for every configured `Omega`.
pub fn diagnostics_tables(cfg: &RunConfig, curve_blocks: &[usize]) -> (Vec<DiagnosticsRow>, Vec<CurveRow>) {
    let digits = cfg.digits as usize;
    let mut jobs = Vec::new();
    for w in &cfg.omega_list {
        for n in 0..2 {
            jobs.push((w.clone(), n, FrameKind::Translated));
            jobs.push((w.clone(), n, FrameKind::Real));
        }
        jobs.push((w.clone(), 0, FrameKind::Dilated));
    }
    let mut dcfg = cfg.clone();
    dcfg.variant = None;
    let solved: Vec<((String, usize, FrameKind), Result<LevelResult>)> = jobs
        .into_par_iter()
        .map(|j| {
            let r = solve_cell(&dcfg, &j.0, j.1, j.2);
            (j, r)
        })
        .collect();

    let mut records: Vec<(String, Result<DiagnosticsRecord>)> = Vec::new();
    let mut resonances = Vec::new();
    for w in &cfg.omega_list {
        let pick = |frame: FrameKind| -> Result<Vec<LevelResult>> {
            solved
                .iter()
                .filter(|((jw, _, jf), _)| jw == w && *jf == frame)
                .map(|(_, r)| r.clone())
                .collect()
        };
        let rec = (|| {
            let t = pick(FrameKind::Translated)?;
            let r = pick(FrameKind::Real)?;
            let d = pick(FrameKind::Dilated)?;
            let omega = t[0].omega.clone();
            resonances.push((w.clone(), d[0].energy.clone()));
            DiagnosticsRecord::new(&omega, &t, &r, &d[0].energy)
        })();
        records.push((w.clone(), rec));
    }

    let mut ok: Vec<DiagnosticsRecord> = records.iter().filter_map(|(_, r)| r.as_ref().ok().cloned()).collect();
    let fit = attach_kappa_fit(&mut ok);
    if fit.is_none() {
        eprintln!("warning: fewer than two omega values; kappa fit and ratio limit skipped");
    }
    let limit = if ok.len() >= 2 { ratio_limit(&ok).ok() } else { None };

    let rows = records
        .iter()
        .map(|(w, rec)| {
            let mut row = DiagnosticsRow {
                schema_version: SCHEMA_VERSION,
                omega: w.clone(),
                digits: cfg.digits,
                basis_blocks: cfg.basis_blocks,
                ..Default::default()
            };
            match rec {
                Ok(r) => {
                    row.lambda = format_real(&r.lambda, digits, false);
                    row.minus_two_ln_im = format_real(&r.comparison, digits, false);
                    row.ratio_lambda = format_real(&r.ratio_lambda, digits, false);
                    row.kappa = format_real(&r.kappa, digits, false);
                    row.delta = format_real(&r.delta, digits, true);
                    if let Some(f) = &fit {
                        row.kappa_fit_intercept = format_real(&f.intercept, digits, false);
                        row.kappa_fit_slope = format_real(&f.slope, digits, false);
                    }
                    if let Some(l) = &limit {
                        row.ratio_limit = format_real(l, digits, false);
                    }
                }
                Err(e) => row.error = e.to_string(),
            }
            row
        })
        .collect();

    let curve_jobs: Vec<(String, usize)> = resonances
        .iter()
        .flat_map(|(w, _)| curve_blocks.iter().map(move |&b| (w.clone(), b)))
        .collect();
    let curve = curve_jobs
        .par_iter()
        .map(|(w, b)| {
            let e_d = &resonances.iter().find(|(rw, _)| rw == w).expect("resonance present").1;
            let mut row = CurveRow {
                schema_version: SCHEMA_VERSION,
                omega: w.clone(),
                n: *b,
                ..Default::default()
            };
            let res = solve_cell_with_blocks(&dcfg, w, 0, FrameKind::Translated, *b)
                .and_then(|t| lambda_gap(t.energy.real(), e_d));
            match res {
                Ok(g) => row.lambda = format_real(&g.lambda, digits.min(20), false),
                Err(e) => row.error = e.to_string(),
            }
            row
        })
        .collect();
    (rows, curve)
}

fn curve_path(path: &Path, format: OutputFormat) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    path.with_file_name(format!("{stem}_lambda_curve.{ext}"))
}

fn cmd_diagnostics(cfg: &RunConfig, curve_blocks: &[usize]) -> i32 {
    let (rows, curve) = diagnostics_tables(cfg, curve_blocks);
    let written = (|| -> Result<()> {
        match cfg.output_path.as_deref() {
            Some(p) => {
                output::write_table(&rows, cfg.output_format, open_out(Some(p))?)?;
                output::write_table(&curve, cfg.output_format, open_out(Some(&curve_path(p, cfg.output_format)))?)?;
            }
            None => {
                output::write_table(&rows, cfg.output_format, io::stdout().lock())?;
                println!();
                output::write_table(&curve, cfg.output_format, io::stdout().lock())?;
            }
        }
        Ok(())
    })();
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_SOLVER;
    }
    if rows.iter().any(|r| !r.error.is_empty()) || curve.iter().any(|r| !r.error.is_empty()) {
        return EXIT_SOLVER;
    }
    EXIT_OK
}

fn cmd_verify(level: verify::VerifyLevel, format: OutputFormat, out: Option<&Path>) -> i32 {
    let rows = match verify::run_verify(level) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SOLVER;
        }
    };
    if let Err(e) = open_out(out).and_then(|w| output::write_table(&rows, format, w)) {
        eprintln!("error: {e}");
        return EXIT_SOLVER;
    }
    if rows.iter().all(|r| r.passed()) {
        EXIT_OK
    } else {
        EXIT_SOLVER
    }
}
