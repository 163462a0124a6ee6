//! Command-line front end.
//!
//! Exit codes: 0 success or PASS, 1 configuration error, 2 verification
//! FAIL, 3 numeric or I/O failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::bounds::{empirical_tv, empirical_tv_std_error, tv_bound, BoundsError, TVBoundReport};
use crate::config::{ConfigError, ModeChoice, RunConfig, SideChoice};
use crate::harness::{
    compare, k_monotone, manufacture_records, run_trials, sweep, with_pool, write_trials_csv,
    ExperimentReport, RadiusSchedule, SweepPoint, TrialOptions,
};
use crate::model::{
    sample_graph, trial_seed, write_edge_list, write_vertex_csv, Mode, ModelParams,
};
use crate::theory::{check_regime, predict, FocusingPrediction, TheoryError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "faulty-sector",
    version,
    about = "Maximum-degree focusing in random faulty sector graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the predicted focusing index and two-point law.
    Predict,
    /// Simulate trials and write per-trial CSV plus a histogram report.
    Simulate {
        /// Also dump the graph of this trial.
        #[arg(long)]
        dump_trial: Option<u64>,
    },
    /// Predict, simulate and compare; exits 2 when a verdict fails.
    Verify,
    /// Evaluate total-variation bounds for the configured degree sets.
    Bound {
        /// Also simulate Poisson-mode trials and report empirical distances.
        #[arg(long)]
        with_empirical: bool,
    },
    /// Run `verify` over a grid of vertex counts.
    Sweep,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    #[arg(long = "out", global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub slack: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true, value_parser = parse_side)]
    pub side: Option<SideChoice>,
    #[arg(long, global = true, value_parser = parse_mode)]
    pub mode: Option<ModeChoice>,
    /// Replace the simulation by records drawn from the predicted law.
    #[arg(long, global = true)]
    pub selftest: bool,
    #[arg(long, global = true)]
    pub n: Option<u64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long = "mu", global = true, allow_negative_numbers = true)]
    pub mu_target: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub v: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub q: Option<f64>,
    /// Degree set, `tail:t` or `set:a,b,...`; repeatable.
    #[arg(long = "set", global = true)]
    pub sets: Vec<String>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub n_grid: Vec<u64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub r_list: Vec<f64>,
    #[arg(long, global = true)]
    pub k_override: Option<u64>,
    #[arg(long, global = true)]
    pub outer_samples: Option<usize>,
    #[arg(long, global = true)]
    pub area_samples: Option<usize>,
}

fn parse_side(s: &str) -> Result<SideChoice, String> {
    match s {
        "out" => Ok(SideChoice::Out),
        "in" => Ok(SideChoice::In),
        "both" => Ok(SideChoice::Both),
        _ => Err(format!("expected out, in or both, got `{s}`")),
    }
}

fn parse_mode(s: &str) -> Result<ModeChoice, String> {
    match s {
        "binomial" => Ok(ModeChoice::Binomial),
        "poisson" => Ok(ModeChoice::Poisson),
        "both" => Ok(ModeChoice::Both),
        _ => Err(format!("expected binomial, poisson or both, got `{s}`")),
    }
}

impl Overrides {
    /// Load the config file (if any) and apply command-line values on top.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() { c.$field = v; }
            )*};
        }
        set!(
            seed,
            trials,
            parallelism,
            out_dir,
            slack,
            epsilon,
            side,
            mode,
            n,
            alpha,
            v,
            q
        );
        set!(outer_samples, area_samples);
        // a radius source on the command line replaces the file's one
        if let Some(r) = self.r {
            c.r = Some(r);
            c.mu_target = None;
        }
        if let Some(m) = self.mu_target {
            c.mu_target = Some(m);
            if self.r.is_none() {
                c.r = None;
            }
        }
        if self.k_override.is_some() {
            c.k_override = self.k_override;
        }
        if !self.sets.is_empty() {
            c.sets = self.sets.clone();
        }
        if !self.n_grid.is_empty() {
            c.n_grid = self.n_grid.clone();
        }
        if !self.r_list.is_empty() {
            c.r_list = self.r_list.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    Numeric(String),
    Io(std::io::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<TheoryError> for CliError {
    fn from(e: TheoryError) -> Self {
        // an unattainable prediction is a property of the configuration
        CliError::Config(ConfigError::new("params", e.to_string()))
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> i32 {
    let outcome = cli
        .overrides
        .resolve()
        .map_err(CliError::from)
        .and_then(|cfg| match &cli.command {
            Command::Predict => cmd_predict(&cfg),
            Command::Simulate { dump_trial } => cmd_simulate(&cfg, *dump_trial),
            Command::Verify => cmd_verify(&cfg, cli.overrides.selftest),
            Command::Bound { with_empirical } => cmd_bound(&cfg, *with_empirical),
            Command::Sweep => cmd_sweep(&cfg),
        });
    match outcome {
        Ok(code) => code,
        Err(CliError::Config(e)) => {
            eprintln!("configuration error: {e}");
            EXIT_CONFIG
        }
        Err(CliError::Numeric(e)) => {
            eprintln!("numeric failure: {e}");
            EXIT_NUMERIC
        }
        Err(CliError::Io(e)) => {
            eprintln!("i/o failure: {e}");
            EXIT_NUMERIC
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("reports serialize")
    );
}

/// Output directory for a mode: the root for a single mode, a per-mode
/// subdirectory otherwise.
fn mode_dir(cfg: &RunConfig, mode: Mode) -> PathBuf {
    match cfg.mode {
        ModeChoice::Both => cfg.out_dir.join(mode.to_string()),
        _ => cfg.out_dir.clone(),
    }
}

fn cmd_predict(cfg: &RunConfig) -> Result<i32, CliError> {
    let params = cfg.params(Mode::Poisson)?;
    let prediction = predict(&params)?;
    let regime = check_regime(&params, cfg.epsilon);
    let report = json!({
        "config": cfg,
        "r": params.r,
        "prediction": prediction,
        "regime": regime,
    });
    print_json(&report);
    write_json(&cfg.out_dir.join("predict.json"), &report)?;
    Ok(EXIT_OK)
}

fn trial_options(cfg: &RunConfig) -> Result<TrialOptions, CliError> {
    Ok(TrialOptions {
        sets: cfg.degree_sets()?,
        keep_histogram: false,
    })
}

fn write_trials(dir: &Path, records: &[crate::harness::TrialRecord]) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("trials.csv"))?);
    write_trials_csv(records, &mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, dump_trial: Option<u64>) -> Result<i32, CliError> {
    let opts = trial_options(cfg)?;
    for mode in cfg.mode.modes() {
        let params = cfg.params(mode)?;
        let records = run_trials(&params, cfg.trials, cfg.parallelism, &opts);
        let dir = mode_dir(cfg, mode);
        write_trials(&dir, &records)?;
        let mut hist_out = Vec::<u64>::new();
        let mut hist_in = Vec::<u64>::new();
        for r in &records {
            for (h, d) in [(&mut hist_out, r.max_out), (&mut hist_in, r.max_in)] {
                if h.len() <= d as usize {
                    h.resize(d as usize + 1, 0);
                }
                h[d as usize] += 1;
            }
        }
        let report = json!({
            "params": params,
            "trials": cfg.trials,
            "max_out_histogram": hist_out,
            "max_in_histogram": hist_in,
            "empty_trials": records.iter().filter(|r| r.empty).count(),
        });
        write_json(&dir.join("report.json"), &report)?;
        if let Some(t) = dump_trial {
            let g = sample_graph(&params, trial_seed(params.master_seed, t));
            write_edge_list(&g, BufWriter::new(File::create(dir.join("graph.edges"))?))?;
            write_vertex_csv(&g, BufWriter::new(File::create(dir.join("vertices.csv"))?))?;
        }
        eprintln!(
            "{mode}: {} trials written to {}",
            records.len(),
            dir.display()
        );
    }
    Ok(EXIT_OK)
}

fn prediction_for(cfg: &RunConfig, params: &ModelParams) -> Result<FocusingPrediction, CliError> {
    let p = predict(params)?;
    Ok(match cfg.k_override {
        Some(k) if k >= 1 => FocusingPrediction::at_k(params.n, params.v, p.mu, p.j_n, k),
        Some(_) => return Err(ConfigError::new("k_override", "must be at least 1").into()),
        None => p,
    })
}

fn verify_mode(cfg: &RunConfig, mode: Mode, selftest: bool) -> Result<ExperimentReport, CliError> {
    let start = Instant::now();
    let params = cfg.params(mode)?;
    let prediction = prediction_for(cfg, &params)?;
    let records = if selftest {
        manufacture_records(&prediction, cfg.trials, params.master_seed)
    } else {
        run_trials(
            &params,
            cfg.trials,
            cfg.parallelism,
            &TrialOptions::default(),
        )
    };
    if !selftest {
        write_trials(&mode_dir(cfg, mode), &records)?;
    }
    let mut report = compare(&params, &records, &prediction, cfg.slack);
    report.elapsed_ms = Some(start.elapsed().as_millis() as u64);
    Ok(report)
}

fn cmd_verify(cfg: &RunConfig, selftest: bool) -> Result<i32, CliError> {
    let mut reports = Vec::new();
    for mode in cfg.mode.modes() {
        let report = verify_mode(cfg, mode, selftest)?;
        for s in &report.sides {
            if cfg.side.sides().contains(&s.side) {
                eprintln!(
                    "{mode} {}: k={} P(k-1)={:.4} (pred {:.4}) P(two-point)={:.4} -> {}",
                    s.side,
                    report.prediction.k_n,
                    s.at_k_minus_1.value,
                    report.prediction.p_km1,
                    s.two_point.value,
                    if s.pass { "PASS" } else { "FAIL" }
                );
            }
        }
        reports.push(report);
    }
    let sides = cfg.side.sides();
    let pass = reports
        .iter()
        .flat_map(|r| &r.sides)
        .filter(|s| sides.contains(&s.side))
        .all(|s| s.pass);
    let doc = json!({ "config": cfg, "selftest": selftest, "pass": pass, "reports": reports });
    write_json(&cfg.out_dir.join("report.json"), &doc)?;
    Ok(if pass { EXIT_OK } else { EXIT_FAIL })
}

#[derive(Debug, Serialize)]
struct EmpiricalCheck {
    empirical_tv: f64,
    empirical_tv_error: f64,
    bound: f64,
    combined_error: f64,
    dominated: bool,
}

fn cmd_bound(cfg: &RunConfig, with_empirical: bool) -> Result<i32, CliError> {
    let params = cfg.params(Mode::Poisson)?;
    let sets = cfg.degree_sets()?;
    if sets.is_empty() {
        return Err(ConfigError::new("sets", "bound needs at least one degree set").into());
    }
    let bcfg = cfg.bounds_config();
    let mut reports: Vec<TVBoundReport> = Vec::new();
    with_pool(cfg.parallelism, || -> Result<(), CliError> {
        for set in &sets {
            for side in cfg.side.sides() {
                reports.push(tv_bound(&params, set, side, &bcfg)?);
            }
        }
        Ok(())
    })?;
    let mut checks = Vec::new();
    if with_empirical {
        let opts = TrialOptions {
            sets: sets.clone(),
            keep_histogram: false,
        };
        let records = run_trials(&params, cfg.trials, cfg.parallelism, &opts);
        for rep in &reports {
            let idx = sets
                .iter()
                .position(|s| *s == rep.set)
                .expect("set came from the list");
            let w: Vec<u64> = records.iter().map(|r| r.w(idx, rep.side)).collect();
            let tv = if rep.ew.value > 0.0 {
                empirical_tv(&w, rep.ew.value)
            } else {
                0.0
            };
            let tv_err = empirical_tv_std_error(&w);
            let combined = (tv_err * tv_err + rep.bound.std_error * rep.bound.std_error).sqrt();
            checks.push(EmpiricalCheck {
                empirical_tv: tv,
                empirical_tv_error: tv_err,
                bound: rep.bound.value,
                combined_error: combined,
                dominated: tv <= rep.bound.value + 3.0 * combined,
            });
        }
    }
    let doc = json!({ "config": cfg, "params": params, "bounds": reports, "empirical": checks });
    print_json(&doc);
    write_json(&cfg.out_dir.join("bound_report.json"), &doc)?;
    Ok(EXIT_OK)
}

fn cmd_sweep(cfg: &RunConfig) -> Result<i32, CliError> {
    if cfg.n_grid.is_empty() {
        return Err(ConfigError::new("n_grid", "sweep needs a nonempty grid").into());
    }
    let schedule = match (cfg.mu_target, cfg.r, cfg.r_list.is_empty()) {
        (Some(m), _, _) => RadiusSchedule::FixedMu(m),
        (None, _, false) => RadiusSchedule::Explicit(cfg.r_list.clone()),
        (None, Some(r), true) => RadiusSchedule::Explicit(vec![r; cfg.n_grid.len()]),
        (None, None, true) => return Err(ConfigError::new("r", "no radius schedule").into()),
    };
    fs::create_dir_all(&cfg.out_dir)?;
    let mut summary = BufWriter::new(File::create(cfg.out_dir.join("summary.csv"))?);
    writeln!(
        summary,
        "mode,n,r,mu,j,k,a,two_point_out,two_point_in,verdict"
    )?;
    let mut all: Vec<(Mode, Vec<SweepPoint>)> = Vec::new();
    for mode in cfg.mode.modes() {
        let base = ModelParams {
            n: cfg.n_grid[0],
            alpha: cfg.alpha,
            r: 0.25,
            v: cfg.v,
            q: cfg.q,
            mode,
            master_seed: cfg.seed,
        };
        let points = sweep(
            &base,
            &cfg.n_grid,
            &schedule,
            cfg.trials,
            cfg.parallelism,
            cfg.slack,
        );
        for p in &points {
            match &p.report {
                Ok(rep) => writeln!(
                    summary,
                    "{mode},{},{},{},{},{},{},{},{},{}",
                    p.n,
                    rep.params.r,
                    rep.prediction.mu,
                    rep.prediction.j_n,
                    rep.prediction.k_n,
                    rep.prediction.a,
                    rep.sides[0].two_point.value,
                    rep.sides[1].two_point.value,
                    if rep.pass { "PASS" } else { "FAIL" }
                )?,
                Err(e) => writeln!(
                    summary,
                    "{mode},{},{},,,,,,,ERROR: {}",
                    p.n,
                    p.r.map(|r| r.to_string()).unwrap_or_default(),
                    e.replace(',', ";")
                )?,
            }
        }
        all.push((mode, points));
    }
    summary.flush()?;
    let doc: Vec<_> = all
        .iter()
        .map(|(m, pts)| json!({ "mode": m, "k_monotone": k_monotone(pts), "points": pts }))
        .collect();
    write_json(
        &cfg.out_dir.join("report.json"),
        &json!({ "config": cfg, "sweeps": doc }),
    )?;
    let any_ok = all.iter().flat_map(|(_, p)| p).any(|p| p.report.is_ok());
    Ok(if any_ok { EXIT_OK } else { EXIT_NUMERIC })
}
