//! Command-line front end: single points, sweeps, simulations and validation.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::cf_engine::FasConfig;
use crate::correlation::{mu_from_w, CorrelationModel};
use crate::error::{FasError, Result};
use crate::mc_sim::{simulate_ser, McEstimate, McStop};
use crate::modem::{ModulationScheme, SchemeKind};
use crate::sep_analytic::{sep_asymptotic, sep_exact, ExactMethod};
use crate::validation::{self, Suite};

/// Header of sweep and simulation output.
pub const SWEEP_HEADER: &str =
    "snr_db,mod,M,N,K,W,mu,sep_exact,sep_asym,sep_mc,mc_ci_low,mc_ci_high,trials,errors,seed";
/// Header of `sep` output.
pub const SEP_HEADER: &str = "snr_db,mod,M,N,K,W,mu,sep,method,diag";
/// Scheme set swept when `--mods` is not given.
pub const DEFAULT_MODS: &str = "ask:2,ask:4,psk:4,psk:8,qam:16,bfsk";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "fas-sep",
    version,
    about = "Symbol error probability of best-K fluid antenna receivers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Port correlation coefficient for an aperture of W wavelengths.
    Mu {
        #[arg(long = "W", allow_negative_numbers = true)]
        w: f64,
    },
    /// SEP at a single operating point.
    Sep(SepArgs),
    /// SEP over a range of SNR, K or W values, as CSV.
    Sweep(SweepArgs),
    /// Monte Carlo SER at a single operating point.
    Simulate(SimulateArgs),
    /// Run the validation suites.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
struct ConfigArgs {
    /// Number of ports.
    #[arg(long = "N", default_value_t = 10)]
    n: usize,
    /// Number of combined ports.
    #[arg(long = "K", default_value_t = 4)]
    k: usize,
    /// Aperture in wavelengths [default: 0.2].
    #[arg(long = "W", allow_negative_numbers = true)]
    w: Option<f64>,
    /// Port correlation coefficient; overrides --W.
    #[arg(long = "mu", allow_negative_numbers = true)]
    mu: Option<f64>,
}

#[derive(Debug, Clone, Args)]
struct SchemeArgs {
    /// ask, psk, qam or bfsk; the order may be attached as in qam:16.
    #[arg(long = "mod")]
    kind: String,
    /// Constellation size [default: 2, or 4 for qam].
    #[arg(long = "M")]
    m: Option<usize>,
}

impl SchemeArgs {
    fn resolve(&self) -> Result<ModulationScheme> {
        match self.m {
            Some(m) => scheme_from(self.kind.trim().to_ascii_lowercase().parse()?, Some(m)),
            None => parse_scheme(&self.kind),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SepMethodArg {
    Exact,
    Asym,
    Quad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExactArg {
    Exact,
    Quad,
}

#[derive(Debug, Args)]
struct SepArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Average SNR per port in dB.
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    snr_db: f64,
    #[arg(long, value_enum, default_value_t = SepMethodArg::Exact)]
    method: SepMethodArg,
}

#[derive(Debug, Args)]
struct McArgs {
    /// Trial cap (accepts 1e6 notation).
    #[arg(long, value_parser = parse_count)]
    trials: Option<u64>,
    /// Stop once this many errors are observed.
    #[arg(long = "target-errors", value_parser = parse_count, default_value = "200")]
    target_errors: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Trials per random stream.
    #[arg(long = "chunk-size", value_parser = parse_count, default_value = "10000")]
    chunk_size: u64,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma-separated list or inclusive range start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    values: String,
    /// Comma-separated schemes such as ask:4,qam:16,bfsk.
    #[arg(long, default_value = DEFAULT_MODS)]
    mods: String,
    #[command(flatten)]
    config: ConfigArgs,
    /// SNR in dB when the axis is not snr_db.
    #[arg(long = "snr-db", allow_negative_numbers = true, default_value_t = 10.0)]
    snr_db: f64,
    #[arg(long, value_enum, default_value_t = ExactArg::Exact)]
    method: ExactArg,
    /// Fill sep_asym.
    #[arg(long = "with-asym")]
    with_asym: bool,
    /// Fill the Monte Carlo columns.
    #[arg(long = "with-mc")]
    with_mc: bool,
    #[command(flatten)]
    mc: McArgs,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    snr_db: f64,
    #[command(flatten)]
    mc: McArgs,
    /// Also fill sep_exact.
    #[arg(long = "with-exact")]
    with_exact: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    suite: SuiteArg,
    /// Trial cap for the Monte Carlo suite.
    #[arg(long, value_parser = parse_count, default_value = "1e7")]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Oracle,
    SpecialCases,
    Mc,
    Asymptotic,
    ZeroSnr,
    Trends,
    Specfun,
    All,
}

/// Sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    #[value(name = "snr_db")]
    SnrDb,
    #[value(name = "K")]
    K,
    #[value(name = "W")]
    W,
}

fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => Err(format!("expected a non-negative integer, got `{s}`")),
    }
}

/// Parses `a,b,c` or the inclusive range `start:stop:step`.
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let bad = |r: String| FasError::invalid("values", r);
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| bad(format!("`{t}` is not a number")))
    };
    let v = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("range `{s}` must be start:stop:step")));
        }
        let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0) || b < a {
            return Err(bad(format!("range `{s}` needs step > 0 and stop >= start")));
        }
        let count = ((b - a) / h + 1e-9).floor() as usize;
        (0..=count).map(|i| a + h * i as f64).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<f64>>>()?
    };
    if v.is_empty() {
        return Err(bad("list is empty".into()));
    }
    Ok(v)
}

/// Parses `ask:4`, `4-ask`, `qam16` style scheme names; `bfsk` needs no order.
pub fn parse_scheme(s: &str) -> Result<ModulationScheme> {
    let t = s.trim().to_ascii_lowercase();
    let (kind, m) = if let Some((k, m)) = t.split_once(':') {
        (k.to_string(), Some(m.to_string()))
    } else if let Some((m, k)) = t.split_once('-') {
        (k.to_string(), Some(m.to_string()))
    } else {
        let split = t.find(|c: char| c.is_ascii_digit()).unwrap_or(t.len());
        let (k, m) = t.split_at(split);
        (
            k.to_string(),
            if m.is_empty() {
                None
            } else {
                Some(m.to_string())
            },
        )
    };
    let kind: SchemeKind = kind.parse()?;
    let m = match m {
        Some(m) => Some(
            m.parse::<usize>()
                .map_err(|_| FasError::invalid("M", format!("`{m}` is not an order")))?,
        ),
        None => None,
    };
    scheme_from(kind, m)
}

fn scheme_from(kind: SchemeKind, m: Option<usize>) -> Result<ModulationScheme> {
    let m = m.unwrap_or(if kind == SchemeKind::Qam { 4 } else { 2 });
    ModulationScheme::new(kind, m)
}

/// Ten significant digits in scientific notation.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.9e}")
}

fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..digits as i32).contains(&mag) {
        let decimals = (digits as i32 - 1 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.*e}", digits - 1)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// Resolved receiver parameters shared by every command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointConfig {
    pub n: usize,
    pub k: usize,
    /// `None` when the correlation was given directly.
    pub w: Option<f64>,
    pub mu: f64,
    pub snr_db: f64,
}

impl PointConfig {
    pub fn from_w(n: usize, k: usize, w: f64, snr_db: f64) -> Result<Self> {
        Ok(PointConfig {
            n,
            k,
            w: Some(w),
            mu: mu_from_w(w)?,
            snr_db,
        })
    }

    pub fn from_mu(n: usize, k: usize, mu: f64, snr_db: f64) -> Self {
        PointConfig {
            n,
            k,
            w: None,
            mu,
            snr_db,
        }
    }

    /// Linear average SNR per port.
    pub fn gamma_av(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn fas_config(&self) -> Result<FasConfig> {
        if !self.snr_db.is_finite() {
            return Err(FasError::invalid(
                "snr_db",
                format!("must be finite, got {}", self.snr_db),
            ));
        }
        let model = CorrelationModel::from_mu(self.mu, 1.0)?;
        FasConfig::with_gamma(self.n, self.k, model, self.gamma_av())
    }
}

/// One line of sweep or simulation output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: PointConfig,
    pub scheme: ModulationScheme,
    pub sep_exact: Option<f64>,
    pub sep_asym: Option<f64>,
    pub mc: Option<McEstimate>,
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let p = &self.point;
        let mc = self.mc.as_ref();
        [
            fmt_num(p.snr_db),
            self.scheme.kind().name().to_string(),
            self.scheme.order().to_string(),
            p.n.to_string(),
            p.k.to_string(),
            opt_num(p.w),
            fmt_num(p.mu),
            opt_num(self.sep_exact),
            opt_num(self.sep_asym),
            opt_num(mc.map(|e| e.ser)),
            opt_num(mc.map(|e| e.ci_low)),
            opt_num(mc.map(|e| e.ci_high)),
            mc.map(|e| e.trials.to_string()).unwrap_or_default(),
            mc.map(|e| e.errors.to_string()).unwrap_or_default(),
            mc.map(|e| e.seed.to_string()).unwrap_or_default(),
        ]
        .join(",")
    }
}

/// Monte Carlo settings of a sweep; cell `i` uses seed `seed + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub stop: McStop,
    pub seed: u64,
}

/// A parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub schemes: Vec<ModulationScheme>,
    pub n: usize,
    pub k: usize,
    pub w: Option<f64>,
    pub mu: Option<f64>,
    pub snr_db: f64,
    pub method: ExactMethod,
    pub with_asym: bool,
    pub mc: Option<McSettings>,
}

impl SweepSpec {
    /// SEP sweep over `axis` at the given base configuration; `mu` takes
    /// precedence over `w`.
    pub fn new(
        axis: Axis,
        values: Vec<f64>,
        schemes: Vec<ModulationScheme>,
        n: usize,
        k: usize,
        w: Option<f64>,
        mu: Option<f64>,
        snr_db: f64,
    ) -> Self {
        SweepSpec {
            axis,
            values,
            schemes,
            n,
            k,
            w,
            mu,
            snr_db,
            method: ExactMethod::Auto,
            with_asym: false,
            mc: None,
        }
    }

    fn points(&self) -> Result<Vec<PointConfig>> {
        if self.values.is_empty() {
            return Err(FasError::invalid("values", "list is empty"));
        }
        if self.schemes.is_empty() {
            return Err(FasError::invalid("mods", "list is empty"));
        }
        let base = |k: usize, w: Option<f64>, snr: f64| match (self.mu, w) {
            (Some(mu), _) => Ok(PointConfig::from_mu(self.n, k, mu, snr)),
            (None, w) => PointConfig::from_w(self.n, k, w.unwrap_or(0.2), snr),
        };
        self.values
            .iter()
            .map(|&v| match self.axis {
                Axis::SnrDb => base(self.k, self.w, v),
                Axis::K => {
                    if v.fract() != 0.0 || v < 1.0 || v > self.n as f64 {
                        return Err(FasError::invalid(
                            "values",
                            format!("K value {v} must be an integer in 1..={}", self.n),
                        ));
                    }
                    base(v as usize, self.w, self.snr_db)
                }
                Axis::W => {
                    if self.mu.is_some() {
                        return Err(FasError::invalid("mu", "cannot be fixed when sweeping W"));
                    }
                    if !(v > 0.0) {
                        return Err(FasError::invalid(
                            "values",
                            format!("W value {v} must be positive"),
                        ));
                    }
                    base(self.k, Some(v), self.snr_db)
                }
            })
            .collect()
    }

    /// Rows ordered by scheme (in the given order) and then axis value.
    pub fn rows(&self) -> Result<Vec<SweepRow>> {
        let points = self.points()?;
        for p in &points {
            p.fas_config()?;
        }
        let cells: Vec<(usize, ModulationScheme, PointConfig)> = self
            .schemes
            .iter()
            .flat_map(|&s| points.iter().map(move |&p| (s, p)))
            .enumerate()
            .map(|(i, (s, p))| (i, s, p))
            .collect();
        cells
            .par_iter()
            .map(|&(i, scheme, point)| {
                let cfg = point.fas_config()?;
                let sep_exact = Some(sep_exact(scheme, &cfg, self.method)?.value);
                let sep_asym = if self.with_asym {
                    Some(sep_asymptotic(scheme, &cfg)?.value)
                } else {
                    None
                };
                let mc = match self.mc {
                    Some(m) => Some(simulate_ser(
                        &cfg,
                        scheme,
                        m.stop,
                        m.seed.wrapping_add(i as u64),
                    )?),
                    None => None,
                };
                Ok(SweepRow {
                    point,
                    scheme,
                    sep_exact,
                    sep_asym,
                    mc,
                })
            })
            .collect()
    }

    /// Full CSV text including the header.
    pub fn csv(&self) -> Result<String> {
        let mut s = String::new();
        writeln!(s, "{SWEEP_HEADER}").unwrap();
        for r in self.rows()? {
            writeln!(s, "{}", r.to_csv()).unwrap();
        }
        Ok(s)
    }
}

fn point_from_args(c: &ConfigArgs, snr_db: f64, err: &mut dyn Write) -> Result<PointConfig> {
    match c.mu {
        Some(mu) => {
            if c.w.is_some() {
                let _ = writeln!(err, "warning: --mu overrides --W");
            }
            Ok(PointConfig::from_mu(c.n, c.k, mu, snr_db))
        }
        None => PointConfig::from_w(c.n, c.k, c.w.unwrap_or(0.2), snr_db),
    }
}

fn mc_stop(a: &McArgs, default_trials: u64) -> McStop {
    McStop {
        max_trials: a.trials.unwrap_or(default_trials),
        target_errors: a.target_errors,
        chunk_size: a.chunk_size,
    }
}

fn flag_name(name: &str) -> String {
    match name {
        "gamma_av" | "snr_db" => "--snr-db".into(),
        "mod" => "--mod".into(),
        "max_trials" => "--trials".into(),
        "chunk_size" => "--chunk-size".into(),
        n @ ("N" | "K" | "W" | "M" | "mu" | "values" | "mods" | "out") => format!("--{n}"),
        n => n.to_string(),
    }
}

fn report(e: &FasError, err: &mut dyn Write) -> i32 {
    match e {
        FasError::InvalidParameter { name, reason } => {
            let _ = writeln!(err, "error: {}: {reason}", flag_name(name));
        }
        e => {
            let _ = writeln!(err, "error: {e}");
        }
    }
    EXIT_FAILURE
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => report(&e, err),
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Mu { w } => {
            let mu = mu_from_w(w)?;
            writeln!(out, "{}", fmt_sig(mu, 6)).map_err(io_err)?;
        }
        Command::Sep(a) => {
            let scheme = a.scheme.resolve()?;
            let point = point_from_args(&a.config, a.snr_db, err)?;
            let cfg = point.fas_config()?;
            let r = match a.method {
                SepMethodArg::Exact => sep_exact(scheme, &cfg, ExactMethod::Auto)?,
                SepMethodArg::Quad => sep_exact(scheme, &cfg, ExactMethod::Quadrature)?,
                SepMethodArg::Asym => sep_asymptotic(scheme, &cfg)?,
            };
            let row = [
                fmt_num(point.snr_db),
                scheme.kind().name().to_string(),
                scheme.order().to_string(),
                point.n.to_string(),
                point.k.to_string(),
                opt_num(point.w),
                fmt_num(point.mu),
                fmt_num(r.value),
                r.method.name().to_string(),
                csv_field(&r.diagnostics.summary()),
            ]
            .join(",");
            writeln!(out, "{SEP_HEADER}\n{row}").map_err(io_err)?;
        }
        Command::Sweep(a) => {
            let schemes = a
                .mods
                .split(',')
                .map(parse_scheme)
                .collect::<Result<Vec<_>>>()?;
            if a.config.mu.is_some() && a.config.w.is_some() {
                let _ = writeln!(err, "warning: --mu overrides --W");
            }
            let spec = SweepSpec {
                method: match a.method {
                    ExactArg::Exact => ExactMethod::Auto,
                    ExactArg::Quad => ExactMethod::Quadrature,
                },
                with_asym: a.with_asym,
                mc: a.with_mc.then(|| McSettings {
                    stop: mc_stop(&a.mc, 1_000_000),
                    seed: a.mc.seed,
                }),
                ..SweepSpec::new(
                    a.axis,
                    parse_values(&a.values)?,
                    schemes,
                    a.config.n,
                    a.config.k,
                    a.config.w,
                    a.config.mu,
                    a.snr_db,
                )
            };
            let csv = spec.csv()?;
            match a.out {
                Some(path) => std::fs::write(&path, csv).map_err(|e| {
                    FasError::invalid("out", format!("cannot write {}: {e}", path.display()))
                })?,
                None => out.write_all(csv.as_bytes()).map_err(io_err)?,
            }
        }
        Command::Simulate(a) => {
            let scheme = a.scheme.resolve()?;
            let point = point_from_args(&a.config, a.snr_db, err)?;
            let cfg = point.fas_config()?;
            let est = simulate_ser(
                &cfg,
                scheme,
                mc_stop(&a.mc, McStop::default().max_trials),
                a.mc.seed,
            )?;
            let sep_exact = if a.with_exact {
                Some(sep_exact(scheme, &cfg, ExactMethod::Auto)?.value)
            } else {
                None
            };
            let row = SweepRow {
                point,
                scheme,
                sep_exact,
                sep_asym: None,
                mc: Some(est),
            };
            writeln!(out, "{SWEEP_HEADER}\n{}", row.to_csv()).map_err(io_err)?;
        }
        Command::Validate(a) => {
            let suites: Vec<Suite> = match a.suite {
                SuiteArg::Oracle => vec![Suite::Oracle],
                SuiteArg::SpecialCases => vec![Suite::SpecialCases],
                SuiteArg::Mc => vec![Suite::MonteCarlo],
                SuiteArg::Asymptotic => vec![Suite::Asymptotic],
                SuiteArg::ZeroSnr => vec![Suite::ZeroSnr],
                SuiteArg::Trends => vec![Suite::Trends],
                SuiteArg::Specfun => vec![Suite::Specfun],
                SuiteArg::All => Suite::ALL.to_vec(),
            };
            let opts = validation::Options {
                mc_trials: a.trials,
                seed: a.seed,
            };
            let mut passed = 0;
            let mut total = 0;
            for s in suites {
                for c in validation::run_suite(s, &opts) {
                    writeln!(out, "{c}").map_err(io_err)?;
                    total += 1;
                    passed += c.passed as usize;
                }
            }
            writeln!(out, "summary: {passed}/{total} checks passed").map_err(io_err)?;
            return Ok(if passed == total {
                EXIT_OK
            } else {
                EXIT_FAILURE
            });
        }
    }
    Ok(EXIT_OK)
}

fn io_err(e: std::io::Error) -> FasError {
    FasError::invalid("out", e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["fas-sep"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    fn sep_value(out: &str) -> f64 {
        let line = out.lines().nth(1).unwrap();
        line.split(',').nth(7).unwrap().parse().unwrap()
    }

    #[test]
    fn mu_command() {
        let (code, out, _) = call(&["mu", "--W", "0.2"]);
        assert_eq!(code, 0);
        let want = mu_from_w(0.2).unwrap();
        assert_eq!(out.trim(), format!("{want:.6}"));
        assert!(out.trim().starts_with("0.9678"));
        let (code, out, _) = call(&["mu", "--W", "1e9"]);
        assert_eq!(code, 0);
        let v: f64 = out.trim().parse().unwrap();
        assert!(v > 0.0 && v < 1e-3);
        let (code, _, err) = call(&["mu", "--W", "0"]);
        assert_eq!(code, 1);
        assert!(
            err.contains("--W") && err.contains("W must be positive"),
            "{err}"
        );
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&[]).0, 2);
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["sep", "--mod", "psk"]).0, 2);
        assert_eq!(call(&["mu", "--W", "abc"]).0, 2);
        assert_eq!(call(&["sweep", "--axis", "Q", "--values", "1"]).0, 2);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn sep_bfsk_single_branch() {
        let (code, out, _) = call(&[
            "sep", "--mod", "bfsk", "--N", "1", "--K", "1", "--mu", "0", "--snr-db", "10",
            "--method", "exact",
        ]);
        assert_eq!(code, 0, "{out}");
        assert_eq!(out.lines().next().unwrap(), SEP_HEADER);
        let g: f64 = 10.0;
        let want = 0.5 * (1.0 - (g / (2.0 + g)).sqrt());
        assert!((sep_value(&out) - want).abs() < 1e-9 * want);
        assert!((sep_value(&out) - 0.043563).abs() < 1e-5);
        let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(&row[1..5], &["bfsk", "2", "1", "1"]);
        assert_eq!(row[6], "0.000000000e0");
        assert_eq!(row[8], "closed_form");
    }

    #[test]
    fn attached_order_matches_flag() {
        let a = call(&[
            "sep", "--mod", "qam:16", "--N", "3", "--K", "2", "--snr-db", "10",
        ]);
        let b = call(&[
            "sep", "--mod", "qam", "--M", "16", "--N", "3", "--K", "2", "--snr-db", "10",
        ]);
        assert_eq!(a.0, 0, "{}", a.2);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn bpsk_equals_binary_ask() {
        let base = [
            "--M", "2", "--N", "4", "--K", "2", "--W", "0.5", "--snr-db", "7",
        ];
        let mut a = vec!["sep", "--mod", "psk"];
        a.extend_from_slice(&base);
        let mut b = vec!["sep", "--mod", "ask"];
        b.extend_from_slice(&base);
        let (x, y) = (sep_value(&call(&a).1), sep_value(&call(&b).1));
        assert!(((x - y) / y).abs() < 1e-12);
    }

    #[test]
    fn asymptote_close_at_high_snr() {
        let common = [
            "--mod", "psk", "--M", "4", "--N", "3", "--K", "2", "--snr-db", "50",
        ];
        let mut e = vec!["sep"];
        e.extend_from_slice(&common);
        let mut s = e.clone();
        s.extend_from_slice(&["--method", "asym"]);
        let (exact, asym) = (sep_value(&call(&e).1), sep_value(&call(&s).1));
        assert!((asym / exact - 1.0).abs() < 0.1, "{asym} vs {exact}");
        let (_, out, _) = call(&s);
        assert!(out.contains(",asymptotic,"));
    }

    #[test]
    fn validation_messages_name_flags() {
        let (code, _, err) = call(&["sep", "--mod", "qam", "--M", "8", "--snr-db", "5"]);
        assert_eq!(code, 1);
        assert!(err.contains("--M"), "{err}");
        let (code, _, err) = call(&[
            "sep", "--mod", "psk", "--N", "3", "--K", "5", "--snr-db", "5",
        ]);
        assert_eq!(code, 1);
        assert!(err.contains("--K"), "{err}");
        let (code, _, err) = call(&["sep", "--mod", "fsk", "--snr-db", "5"]);
        assert_eq!(code, 1);
        assert!(err.contains("--mod"), "{err}");
    }

    #[test]
    fn mu_overrides_w_with_warning() {
        let (code, out, err) = call(&[
            "sep", "--mod", "psk", "--N", "3", "--K", "2", "--W", "0.2", "--mu", "0.5", "--snr-db",
            "5",
        ]);
        assert_eq!(code, 0);
        assert!(err.contains("warning: --mu overrides --W"));
        let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[5], "");
        assert_eq!(row[6], fmt_num(0.5));
    }

    #[test]
    fn sweep_is_deterministic_and_ordered() {
        let dir = std::env::temp_dir().join(format!("fas-sep-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sweep.csv");
        let p = path.to_str().unwrap();
        let args = [
            "sweep",
            "--axis",
            "snr_db",
            "--values",
            "0:20:5",
            "--mods",
            "bfsk,psk:4",
            "--N",
            "4",
            "--K",
            "2",
            "--with-asym",
            "--with-mc",
            "--trials",
            "2000",
            "--out",
            p,
        ];
        assert_eq!(call(&args).0, 0);
        let first = std::fs::read(&path).unwrap();
        assert_eq!(call(&args).0, 0);
        assert_eq!(first, std::fs::read(&path).unwrap());
        let text = String::from_utf8(first).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        assert_eq!(lines.len(), 11);
        assert!(lines[1].starts_with(&format!("{},bfsk,2,4,2,", fmt_num(0.0))));
        assert!(lines[6].starts_with(&format!("{},psk,4,", fmt_num(0.0))));
        assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 15));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn sweep_rejects_bad_axis_values() {
        let (code, _, err) = call(&["sweep", "--axis", "K", "--values", "1,11", "--N", "10"]);
        assert_eq!(code, 1);
        assert!(err.contains("--values"), "{err}");
        let (code, _, _) = call(&[
            "sweep",
            "--axis",
            "snr_db",
            "--values",
            "0",
            "--out",
            "/nonexistent/dir/x.csv",
        ]);
        assert_eq!(code, 1);
    }

    #[test]
    fn simulate_row() {
        let (code, out, _) = call(&[
            "simulate",
            "--mod",
            "psk",
            "--M",
            "2",
            "--N",
            "2",
            "--K",
            "1",
            "--snr-db",
            "0",
            "--trials",
            "1e4",
            "--with-exact",
            "--seed",
            "9",
        ]);
        assert_eq!(code, 0);
        let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), 15);
        let trials: u64 = row[12].parse().unwrap();
        let errors: u64 = row[13].parse().unwrap();
        assert!(errors >= 200 && trials <= 10_000);
        assert_eq!(row[14], "9");
        assert!(!row[7].is_empty() && row[8].is_empty());
    }

    #[test]
    fn value_parsing() {
        assert_eq!(
            parse_values("0:20:5").unwrap(),
            vec![0.0, 5.0, 10.0, 15.0, 20.0]
        );
        assert_eq!(parse_values("1,2.5,-3").unwrap(), vec![1.0, 2.5, -3.0]);
        assert!(parse_values("1:0:1").is_err());
        assert!(parse_values("a").is_err());
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert!(parse_count("1.5").is_err());
        assert_eq!(
            parse_scheme("qam:16").unwrap(),
            ModulationScheme::new(SchemeKind::Qam, 16).unwrap()
        );
        assert_eq!(
            parse_scheme("8-PSK").unwrap(),
            ModulationScheme::new(SchemeKind::Psk, 8).unwrap()
        );
        assert_eq!(
            parse_scheme("ask4").unwrap(),
            ModulationScheme::new(SchemeKind::Ask, 4).unwrap()
        );
        assert_eq!(parse_scheme("bfsk").unwrap(), ModulationScheme::bfsk());
        assert_eq!(fmt_num(0.0435645), "4.356450000e-2");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
    }
}
