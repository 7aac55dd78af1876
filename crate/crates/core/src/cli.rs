//! Command-line surface. Every command writes its artifacts and a
//! `manifest-<command>.json` into the output directory.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::analytic_norms::{norm_report, DerivativeTable, Family, NormParams};
use crate::checkpoint::Checkpoint;
use crate::combinatorics::{full_suite, CertificateReport};
use crate::config::{load_config, parse_config, Driver, RunConfig};
use crate::estimates::{
    apriori_check, leibniz_defect_mode, max_ratio, pressure_estimate_suite, product_suite, NormSample,
};
use crate::grid_field::VectorGridField;
use crate::pressure::{manufactured_convergence, BoundaryForm};
use crate::report::Reporter;
use crate::solver::{picard_run, run, RunOutput, SeriesRow};
use crate::{Error, Result};

/// Radii swept by `verify-combinatorics`.
pub const CERTIFIED_RADII: [i64; 3] = [3, 4, 5];
pub const DEFAULT_RANGE: i64 = 200;
/// Chebyshev degrees of the manufactured pressure table.
pub const PRESSURE_DEGREES: [usize; 6] = [8, 12, 16, 20, 24, 32];

#[derive(Debug, Parser)]
#[command(
    name = "channel-euler",
    version,
    about = "Spectral Euler solver and estimate checks for a periodic channel with inflow and outflow"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Highest derivative order kept in the analytic norms.
    #[arg(long, global = true)]
    pub max_order: Option<usize>,
    /// Index range of the certificate sweeps.
    #[arg(long, global = true)]
    pub range: Option<i64>,
    /// Time driver for `solve`: `rk4` or `picard`.
    #[arg(long, global = true)]
    pub driver: Option<Driver>,
    /// Pressure wall condition: `full-trace` or `base-advection`.
    #[arg(long, global = true)]
    pub boundary_form: Option<BoundaryForm>,
    /// Seed of the random field suites and random initial data.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Integrate the shifted system to T0 with the configured driver.
    Solve,
    /// Picard iteration with its contraction trace.
    Picard,
    /// Exact certificates of the coefficient inequalities.
    VerifyCombinatorics,
    /// Manufactured convergence table and the pressure estimate suite.
    CheckPressure,
    /// Product estimate and its relatives on the random suite.
    CheckProduct,
    /// A priori inequality along a solver trajectory.
    CheckApriori,
    /// Plot data from an existing `series.csv`.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Picard => "picard",
            Command::VerifyCombinatorics => "verify-combinatorics",
            Command::CheckPressure => "check-pressure",
            Command::CheckProduct => "check-product",
            Command::CheckApriori => "check-apriori",
            Command::Report => "report",
        }
    }
}

/// Configuration after command-line overrides.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => parse_config("")?,
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(d) = cli.driver {
        cfg.driver = d;
    }
    if let Some(f) = cli.boundary_form {
        cfg.boundary_form = f;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.max_order {
        cfg.norms.n_max = n;
        cfg.checks.n_max = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Run one command; returns a one-line summary.
pub fn execute(cli: &Cli) -> Result<String> {
    let cfg = effective_config(cli)?;
    let command = match (cli.command, cfg.driver) {
        (Command::Solve, Driver::Picard) => Command::Picard,
        (c, _) => c,
    };
    let canonical = cfg.canonical();
    let mut rep = Reporter::new(&cfg.out, command.name(), &canonical, cfg.seed)?;
    rep.text(&format!("config-{}.toml", command.name()), &cfg.echo())?;
    let (summary, failure) = match command {
        Command::Solve => (solve(&cfg, &mut rep)?, None),
        Command::Picard => (picard(&cfg, &mut rep)?, None),
        Command::VerifyCombinatorics => verify_combinatorics(cli.range.unwrap_or(DEFAULT_RANGE), &mut rep)?,
        Command::CheckPressure => (check_pressure(&cfg, &mut rep)?, None),
        Command::CheckProduct => (check_product(&cfg, &mut rep)?, None),
        Command::CheckApriori => (check_apriori(&cfg, &mut rep)?, None),
        Command::Report => (report(&mut rep)?, None),
    };
    rep.finish(&summary)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

/// Parse arguments, run, print, and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(s) => {
            println!("{s}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Serialize)]
struct NormRow {
    time: f64,
    tau: f64,
    family: &'static str,
    value: f64,
    truncation_tail_bound: f64,
}

fn norm_rows(v: &VectorGridField, p: &NormParams, time: f64, tau: f64) -> Vec<NormRow> {
    let table = DerivativeTable::from_vector_grid_unchecked(v, p.n_max);
    norm_report(&table, &p.with_tau(tau))
        .into_iter()
        .map(|e| NormRow {
            time,
            tau,
            family: e.family.name(),
            value: e.value,
            truncation_tail_bound: e.tail,
        })
        .collect()
}

fn series_plots(rep: &mut Reporter, series: &[SeriesRow]) -> Result<()> {
    let cols: [(&str, fn(&SeriesRow) -> f64); 5] = [
        ("x_tilde", |r| r.x_tilde),
        ("y_bar", |r| r.y_bar),
        ("energy", |r| r.energy),
        ("div", |r| r.div),
        ("trace", |r| r.trace),
    ];
    for (name, f) in cols {
        let pts: Vec<(f64, f64)> = series.iter().map(|r| (r.t, f(r))).collect();
        rep.dat(&format!("{name}.dat"), ["t", name], &pts)?;
    }
    Ok(())
}

fn solve_run(cfg: &RunConfig) -> Result<RunOutput> {
    let spec = cfg.to_run_spec()?;
    if let Some(d) = &spec.checkpoint_dir {
        std::fs::create_dir_all(d)?;
    }
    run(&spec)
}

fn solve(cfg: &RunConfig, rep: &mut Reporter) -> Result<String> {
    let spec = cfg.to_run_spec()?;
    let out = solve_run(cfg)?;
    rep.csv("series.csv", &out.series)?;
    rep.csv("flux.csv", &out.balances)?;
    let fs = &out.final_state;
    let mut rows = norm_rows(&spec.v0, &spec.norms, 0.0, spec.schedule.tau0);
    rows.extend(norm_rows(&fs.v, &spec.norms, fs.t, fs.tau));
    rep.csv("norms.csv", &rows)?;
    series_plots(rep, &out.series)?;
    Checkpoint {
        t: fs.t,
        tau: fs.tau,
        v: fs.v.clone(),
    }
    .write(&rep.path("final.cevf"))?;
    rep.record("final.cevf")?;
    for c in &out.checkpoints {
        if let Ok(rel) = c.strip_prefix(&rep.dir) {
            rep.record(&rel.to_string_lossy())?;
        }
    }
    let worst_balance = out.balances.iter().map(|b| b.relative).fold(0.0, f64::max);
    let peak = out.series.iter().map(|r| r.x_tilde).fold(0.0, f64::max);
    Ok(format!(
        "solve: {} steps of dt = {:.3e} to t = {}, tau = {}; max ||v||_X~ = {peak:.6e}; worst energy balance {worst_balance:.2e}",
        out.steps, out.dt, fs.t, fs.tau
    ))
}

#[derive(Serialize)]
struct TraceRow {
    n: usize,
    a: f64,
    b: f64,
    composite: f64,
    ratio: Option<f64>,
}

#[derive(Serialize)]
struct BoundRow {
    n: usize,
    value: f64,
    a_bound: f64,
}

#[derive(Serialize)]
struct PicardSummary {
    m: f64,
    t0: f64,
    rho: f64,
    converged: bool,
    iterations: usize,
    a_bound: f64,
    bound_holds: bool,
    rk4_difference: f64,
}

fn picard(cfg: &RunConfig, rep: &mut Reporter) -> Result<String> {
    let spec = cfg.to_run_spec()?;
    let out = picard_run(
        &spec.v0,
        &spec.ubar,
        &spec.schedule,
        cfg.picard.iterations,
        &spec.norms,
        &spec.settings,
        &cfg.picard_settings(),
    )?;
    let comp = out.trace.composite();
    let ratios = out.trace.ratios();
    let rows: Vec<TraceRow> = (0..comp.len())
        .map(|i| TraceRow {
            n: i + 1,
            a: out.trace.a[i],
            b: out.trace.b[i],
            composite: comp[i],
            ratio: if i == 0 { None } else { Some(ratios[i - 1]) },
        })
        .collect();
    rep.csv("picard_trace.csv", &rows)?;
    let bounds: Vec<BoundRow> = out
        .bound
        .values
        .iter()
        .enumerate()
        .map(|(n, &value)| BoundRow {
            n,
            value,
            a_bound: out.bound.a_bound,
        })
        .collect();
    rep.csv("uniform_bound.csv", &bounds)?;
    let pts: Vec<(f64, f64)> = comp.iter().enumerate().map(|(i, &c)| ((i + 1) as f64, c)).collect();
    rep.dat("composite.dat", ["n", "composite"], &pts)?;
    let rk = run(&spec)?;
    let summary = PicardSummary {
        m: spec.schedule.m,
        t0: spec.schedule.t0,
        rho: out.trace.rho(),
        converged: out.converged,
        iterations: comp.len(),
        a_bound: out.bound.a_bound,
        bound_holds: out.bound.holds(),
        rk4_difference: out.at_t0().sub(&rk.final_state.v).l2_norm(),
    };
    rep.json("picard_summary.json", &summary)?;
    Ok(format!(
        "picard: {} iterations, rho = {:.4e}, converged = {}, uniform bound holds = {}, |picard - rk4| = {:.3e}",
        summary.iterations, summary.rho, summary.converged, summary.bound_holds, summary.rk4_difference
    ))
}

#[derive(Serialize)]
struct CertificateRow<'a> {
    name: &'a str,
    range: &'a str,
    instances: u64,
    violation_count: u64,
    sup: Option<&'a str>,
    sup_at: Option<&'a str>,
    verified: bool,
}

fn verify_combinatorics(range: i64, rep: &mut Reporter) -> Result<(String, Option<Error>)> {
    if range < 1 {
        return Err(Error::Config(format!("--range = {range} must be positive")));
    }
    let reports: Vec<CertificateReport> = full_suite(range, &CERTIFIED_RADII);
    rep.json("certificates.json", &reports)?;
    let rows: Vec<CertificateRow> = reports
        .iter()
        .map(|r| CertificateRow {
            name: &r.name,
            range: &r.range,
            instances: r.instances,
            violation_count: r.violation_count,
            sup: r.sup.as_deref(),
            sup_at: r.sup_at.as_deref(),
            verified: r.verified,
        })
        .collect();
    rep.csv("certificates.csv", &rows)?;
    let failed: Vec<&CertificateReport> = reports.iter().filter(|r| !r.verified).collect();
    let total: u64 = failed.iter().map(|r| r.violation_count).sum();
    let summary = format!(
        "verify-combinatorics: {} certificates over range {range}, {} with violations ({total} instances)",
        reports.len(),
        failed.len()
    );
    let err = (!failed.is_empty()).then(|| Error::Certificate {
        name: failed.iter().map(|r| r.name.as_str()).collect::<Vec<_>>().join(", "),
        count: total as usize,
    });
    Ok((summary, err))
}

#[derive(Serialize)]
struct CrossRow {
    k: usize,
    p: usize,
    mode_grid_difference: f64,
    mean: f64,
}

fn check_pressure(cfg: &RunConfig, rep: &mut Reporter) -> Result<String> {
    use crate::grid_field::GridField;
    use crate::pressure::{manufactured_problem, solve_neumann_grid, solve_neumann_mode, GridNeumannProblem};
    let table = manufactured_convergence(2, &PRESSURE_DEGREES)?;
    rep.csv("pressure_convergence.csv", &table)?;
    let pts: Vec<(f64, f64)> = table.iter().map(|r| (r.p as f64, r.error)).collect();
    rep.dat("pressure_convergence.dat", ["P", "error"], &pts)?;

    let (pb, _) = manufactured_problem();
    let mode = solve_neumann_mode(&pb)?.p;
    let mut cross = Vec::new();
    for (k, p) in [(2, 16), (4, 24), (8, 32)] {
        let grid = solve_neumann_grid(&GridNeumannProblem::from_mode(&pb, k, p))?;
        cross.push(CrossRow {
            k,
            p,
            mode_grid_difference: grid.p.sub(&GridField::from_mode(&mode, k, p).0).l2_norm(),
            mean: grid.residual.mean,
        });
    }
    rep.csv("pressure_cross.csv", &cross)?;

    let params = cfg.check_params()?;
    let ms = pressure_estimate_suite(&cfg.check_suite(false), &params)?;
    rep.csv("pressure_estimate.csv", &ms)?;
    let best = table.iter().filter(|r| r.p >= 16).map(|r| r.error).fold(0.0, f64::max);
    Ok(format!(
        "check-pressure: error {:.2e} at P = 8, at most {best:.2e} for P >= 16; pressure estimate max ratio {:.6e} over {} fields",
        table[0].error,
        max_ratio(&ms, "pressure"),
        ms.len()
    ))
}

#[derive(Serialize)]
struct LeibnizRow {
    pair: usize,
    alpha1: usize,
    alpha2: usize,
    relative_defect: f64,
}

fn check_product(cfg: &RunConfig, rep: &mut Reporter) -> Result<String> {
    let params = cfg.check_params()?;
    let suite = cfg.check_suite(true);
    let ms = product_suite(&suite, &params)?;
    rep.csv("product.csv", &ms)?;
    let mut leib = Vec::new();
    for i in 0..suite.len().min(4) {
        let (u, w) = (&suite[i], &suite[(i + 1) % suite.len()]);
        for n in 1..=4 {
            for a1 in 0..=n {
                let alpha = [a1, n - a1];
                leib.push(LeibnizRow {
                    pair: i,
                    alpha1: alpha[0],
                    alpha2: alpha[1],
                    relative_defect: leibniz_defect_mode(u, w, alpha)?,
                });
            }
        }
    }
    rep.csv("leibniz.csv", &leib)?;
    let worst = leib.iter().map(|r| r.relative_defect).fold(0.0, f64::max);
    let names = [
        "product",
        "tangential-normal",
        "tangential",
        "tangential-h1",
        "advection-x",
    ];
    let maxima: Vec<String> = names.iter().map(|n| format!("{n} {:.4e}", max_ratio(&ms, n))).collect();
    Ok(format!(
        "check-product: max ratios {}; worst Leibniz defect {worst:.2e}",
        maxima.join(", ")
    ))
}

fn check_apriori(cfg: &RunConfig, rep: &mut Reporter) -> Result<String> {
    let spec = cfg.to_run_spec()?;
    let out = solve_run(cfg)?;
    rep.csv("series.csv", &out.series)?;
    let samples: Vec<NormSample> = out
        .series
        .iter()
        .map(|r| NormSample {
            t: r.t,
            tau: r.tau,
            v: r.norms(),
        })
        .collect();
    let ubar_table = DerivativeTable::from_vector_grid_unchecked(&spec.ubar, spec.norms.n_max);
    let ms = apriori_check(&samples, &spec.schedule, &ubar_table, &spec.norms)?;
    rep.csv("apriori.csv", &ms)?;
    let pts: Vec<(f64, f64)> = samples[1..samples.len() - 1]
        .iter()
        .zip(&ms)
        .map(|(s, m)| (s.t, m.ratio))
        .collect();
    rep.dat("apriori_ratio.dat", ["t", "ratio"], &pts)?;
    let hi = ms.iter().map(|m| m.ratio).fold(0.0, f64::max);
    let vacuous = ms.iter().filter(|m| m.vacuous).count();
    Ok(format!(
        "check-apriori: {} interior samples, ratio bounded by {hi:.6e} ({vacuous} vacuous)",
        ms.len()
    ))
}

fn report(rep: &mut Reporter) -> Result<String> {
    let path = rep.path("series.csv");
    if !path.exists() {
        return Err(Error::Config(format!(
            "no series.csv in {}; run solve first",
            rep.dir.display()
        )));
    }
    let mut rd = csv::Reader::from_path(&path)?;
    let series: Vec<SeriesRow> = rd.deserialize().collect::<std::result::Result<_, _>>()?;
    if series.is_empty() {
        return Err(Error::Parse("series.csv has no rows".into()));
    }
    series_plots(rep, &series)?;
    for (file, fam) in [
        ("x", Family::X),
        ("y", Family::Y),
        ("y_tilde", Family::YTilde),
        ("hr", Family::Hr),
    ] {
        let pts: Vec<(f64, f64)> = series.iter().map(|r| (r.t, r.norms().get(fam))).collect();
        rep.dat(&format!("{file}.dat"), ["t", fam.name()], &pts)?;
    }
    let first = series.first().expect("nonempty");
    let last = series.last().expect("nonempty");
    Ok(format!(
        "report: {} rows from t = {} to {}; energy drift {:.3e}",
        series.len(),
        first.t,
        last.t,
        (last.energy - first.energy).abs()
    ))
}
