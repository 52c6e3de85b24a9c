//! Experiment specs, config files and CSV output.
//!
//! A config is a flat TOML file. Every key is optional except `m_b` and
//! `m_r`:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `task` | `optimize-gd`, `optimize-pdd`, `evaluate`, `crlb` or `sweep` | `evaluate` |
//! | `m_b`, `m_r`, `k_users` | dimensions | `k_users = 1` |
//! | `p_max_w` or `p_max_dbm` | pilot power budget | `20 dBm` |
//! | `d_b`, `d_u` | distances in meters, `d_u` scalar or one per user | `80`, `d_b` |
//! | `sigma_b_dbm` or `sigma_b_w` | BS noise power | `-90 dBm` |
//! | `sigma_u_dbm` or `sigma_u_w` | user noise power, scalar or per user | `-90 dBm` |
//! | `gains_db` | antenna gains in the pathloss | `5` |
//! | `correlation` | exponential correlation coefficient, `0` for i.i.d. | `0` |
//! | `seed` | RNG seed | caller's default |
//! | `estimator` | `lmmse` or `ls` | `lmmse` |
//! | `schemes` | subset of `["ris-tx", "cscd"]` | both |
//! | `pilot` | `dft`, `optimized-gd`, `optimized-pdd` or `file` | `dft` |
//! | `pilot_file` | pilot path, relative to the config file | |
//! | `trials` | Monte-Carlo trials, `0` for analytic | `0` |
//! | `axis`, `grid` | sweep axis (`p_max` in W, `m_r`, `distance` in m) and values | |
//! | `output` | CSV path, or directory for optimizer tasks | |
//! | `max_outer_iters` | outer iteration cap of either optimizer | solver default |
//! | `slots` | training length `T` of optimized pilots | `m_r` |
//!
//! CSV columns are `axis_value,scheme,estimator,nmse_db,mse,source,se,seed`,
//! with floats in shortest round-trip form.
//! `axis_value` is the grid value, or `p_max` in watts without a sweep.
//! `nmse_db` and `mse` average over users, and `se` (Monte Carlo only) is
//! the mean of the per-user standard errors, which bounds the standard
//! error of the averaged MSE from above.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::cascaded::{cscd_analytic_report, cscd_closed_form_nmse, simulate_cscd};
use crate::channel::{build_stats, db, dbm_to_watts, ChannelStats, Correlation, Scenario, DEFAULT_GAINS_DB};
use crate::crlb::{crlb_cscd_nmse, crlb_ris_tx_nmse, watershed_mr, CrlbMode, Scheme};
use crate::error::{Error, Result};
use crate::estimation::{
    analytic_report, closed_form_nmse, dft_pilot, lmmse_receivers, ls_receivers, objective_p1,
    simulate_training, Estimator, LinkParams, Method, PilotSequence,
};
use crate::gd::{run_gd, GdConfig};
use crate::pdd::{run_pdd, PddConfig};
use crate::pilotfile::{read_pilot, write_pilot};

pub const CSV_HEADER: &str = "axis_value,scheme,estimator,nmse_db,mse,source,se,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    OptimizeGd,
    OptimizePdd,
    Evaluate,
    Crlb,
    Sweep,
}

impl Task {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "optimize-gd" => Task::OptimizeGd,
            "optimize-pdd" => Task::OptimizePdd,
            "evaluate" => Task::Evaluate,
            "crlb" => Task::Crlb,
            "sweep" => Task::Sweep,
            _ => return Err(Error::Config(format!("unknown task '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    PMax,
    MR,
    Distance,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "p_max" => SweepAxis::PMax,
            "m_r" => SweepAxis::MR,
            "distance" => SweepAxis::Distance,
            _ => return Err(Error::Config(format!("unknown sweep axis '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotSource {
    Dft,
    OptimizedGd,
    OptimizedPdd,
    File,
}

impl PilotSource {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "dft" => PilotSource::Dft,
            "optimized-gd" => PilotSource::OptimizedGd,
            "optimized-pdd" => PilotSource::OptimizedPdd,
            "file" => PilotSource::File,
            _ => return Err(Error::Config(format!("unknown pilot source '{s}'"))),
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            PilotSource::Dft => "dft",
            PilotSource::OptimizedGd => "optimized-gd",
            PilotSource::OptimizedPdd => "optimized-pdd",
            PilotSource::File => "file",
        }
    }
}

pub fn parse_estimator(s: &str) -> Result<Estimator> {
    match s {
        "lmmse" => Ok(Estimator::Lmmse),
        "ls" => Ok(Estimator::Ls),
        _ => Err(Error::Config(format!("unknown estimator '{s}'"))),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub task: Task,
    pub axis: Option<SweepAxis>,
    pub grid: Vec<f64>,
    pub estimator: Estimator,
    pub schemes: Vec<Scheme>,
    pub pilot: PilotSource,
    pub pilot_file: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub trials: usize,
    pub gd: GdConfig,
    pub pdd: PddConfig,
}

impl ExperimentSpec {
    /// Spec for `scenario` with every other field at its default.
    pub fn new(scenario: Scenario, task: Task) -> Self {
        let seed = scenario.seed;
        Self {
            scenario,
            task,
            axis: None,
            grid: Vec::new(),
            estimator: Estimator::Lmmse,
            schemes: vec![Scheme::RisTx, Scheme::Cscd],
            pilot: PilotSource::Dft,
            pilot_file: None,
            output: None,
            trials: 0,
            gd: GdConfig { seed, ..GdConfig::default() },
            pdd: PddConfig { seed, ..PddConfig::default() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        self.scenario.validate()?;
        if self.schemes.is_empty() {
            return bad("schemes must not be empty");
        }
        if self.task == Task::Sweep && (self.axis.is_none() || self.grid.is_empty()) {
            return bad("sweep needs an axis and a non-empty grid");
        }
        if self.axis.is_some() && self.grid.is_empty() {
            return bad("grid must not be empty when an axis is given");
        }
        if !self.grid.is_empty() && self.axis.is_none() {
            return bad("grid given without an axis");
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("grid must be strictly increasing");
        }
        if let Some(axis) = self.axis {
            for &x in &self.grid {
                let ok = match axis {
                    SweepAxis::PMax => x > 0.0 && x.is_finite(),
                    SweepAxis::MR => x >= 1.0 && x.fract() == 0.0 && x <= 1e6,
                    SweepAxis::Distance => x >= 1.0 && x.is_finite(),
                };
                if !ok {
                    return Err(Error::Config(format!("invalid grid value {x} for this axis")));
                }
            }
            if axis == SweepAxis::MR && self.pilot == PilotSource::File {
                return bad("a pilot file has a fixed m_r and cannot be swept over m_r");
            }
        }
        if self.pilot == PilotSource::File {
            match &self.pilot_file {
                None => return bad("pilot = \"file\" needs pilot_file"),
                Some(p) if !p.is_file() => {
                    return Err(Error::Config(format!("pilot file {} does not exist", p.display())))
                }
                _ => {}
            }
        }
        if matches!(self.task, Task::OptimizeGd | Task::OptimizePdd) && self.output.is_none() {
            return bad("optimizer tasks need an output directory");
        }
        self.gd.validate()?;
        self.pdd.validate()?;
        Ok(())
    }

    /// Parses a config. Relative paths resolve against `base_dir`, and
    /// `default_seed` applies when the file sets no seed.
    pub fn from_toml_str(text: &str, base_dir: &Path, default_seed: u64) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.into_spec(base_dir, default_seed)
    }

    pub fn from_file(path: &Path, default_seed: u64) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base, default_seed)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.scenario.seed = seed;
        self.gd.seed = seed;
        self.pdd.seed = seed;
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn expand(self, k: usize, key: &str) -> Result<Vec<f64>> {
        match self {
            OneOrMany::One(x) => Ok(vec![x; k]),
            OneOrMany::Many(v) if v.len() == k => Ok(v),
            OneOrMany::Many(v) => Err(Error::Config(format!(
                "{key} has {} entries for {k} users",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    task: Option<String>,
    m_b: usize,
    m_r: usize,
    k_users: Option<usize>,
    p_max_w: Option<f64>,
    p_max_dbm: Option<f64>,
    d_b: Option<f64>,
    d_u: Option<OneOrMany>,
    sigma_b_dbm: Option<f64>,
    sigma_b_w: Option<f64>,
    sigma_u_dbm: Option<OneOrMany>,
    sigma_u_w: Option<OneOrMany>,
    gains_db: Option<f64>,
    correlation: Option<f64>,
    seed: Option<u64>,
    estimator: Option<String>,
    schemes: Option<Vec<String>>,
    pilot: Option<String>,
    pilot_file: Option<PathBuf>,
    trials: Option<usize>,
    axis: Option<String>,
    grid: Option<Vec<f64>>,
    output: Option<PathBuf>,
    max_outer_iters: Option<usize>,
    slots: Option<usize>,
}

fn exclusive<T>(a: Option<T>, b: Option<T>, keys: &str) -> Result<Option<(T, bool)>> {
    match (a, b) {
        (Some(_), Some(_)) => Err(Error::Config(format!("set only one of {keys}"))),
        (Some(x), None) => Ok(Some((x, true))),
        (None, Some(x)) => Ok(Some((x, false))),
        (None, None) => Ok(None),
    }
}

impl RawConfig {
    fn into_spec(self, base: &Path, default_seed: u64) -> Result<ExperimentSpec> {
        let k = self.k_users.unwrap_or(1);
        let p_max = match exclusive(self.p_max_dbm, self.p_max_w, "p_max_dbm and p_max_w")? {
            Some((x, true)) => dbm_to_watts(x),
            Some((x, false)) => x,
            None => dbm_to_watts(20.0),
        };
        let sigma_b_sq = match exclusive(self.sigma_b_dbm, self.sigma_b_w, "sigma_b_dbm and sigma_b_w")? {
            Some((x, true)) => dbm_to_watts(x),
            Some((x, false)) => x,
            None => dbm_to_watts(-90.0),
        };
        let sigma_u_sq = match exclusive(self.sigma_u_dbm, self.sigma_u_w, "sigma_u_dbm and sigma_u_w")? {
            Some((x, true)) => x.expand(k, "sigma_u_dbm")?.into_iter().map(dbm_to_watts).collect(),
            Some((x, false)) => x.expand(k, "sigma_u_w")?,
            None => vec![dbm_to_watts(-90.0); k],
        };
        let d_b = self.d_b.unwrap_or(80.0);
        let d_u = match self.d_u {
            Some(v) => v.expand(k, "d_u")?,
            None => vec![d_b; k],
        };
        let correlation = match self.correlation {
            None => Correlation::Uncorrelated,
            Some(c) if c == 0.0 => Correlation::Uncorrelated,
            Some(c) => Correlation::Exponential(c),
        };
        let seed = self.seed.unwrap_or(default_seed);
        let scenario = Scenario {
            m_b: self.m_b,
            m_r: self.m_r,
            k_users: k,
            p_max,
            d_b,
            d_u,
            sigma_b_sq,
            sigma_u_sq,
            gains_db: self.gains_db.unwrap_or(DEFAULT_GAINS_DB),
            correlation,
            seed,
        };
        let task = Task::parse(self.task.as_deref().unwrap_or("evaluate"))?;
        let mut spec = ExperimentSpec::new(scenario, task);
        if let Some(e) = self.estimator {
            spec.estimator = parse_estimator(&e)?;
        }
        if let Some(s) = self.schemes {
            spec.schemes = s.iter().map(|x| Scheme::parse(x).map_err(|e| Error::Config(e.to_string()))).collect::<Result<_>>()?;
        }
        if let Some(p) = self.pilot {
            spec.pilot = PilotSource::parse(&p)?;
        }
        spec.pilot_file = self.pilot_file.map(|p| base.join(p));
        spec.output = self.output.map(|p| base.join(p));
        spec.trials = self.trials.unwrap_or(0);
        spec.axis = self.axis.as_deref().map(SweepAxis::parse).transpose()?;
        spec.grid = self.grid.unwrap_or_default();
        if let Some(n) = self.max_outer_iters {
            spec.gd.max_outer_iters = n;
            spec.pdd.max_outer = n;
        }
        spec.gd.slots = self.slots;
        spec.pdd.slots = self.slots;
        spec.validate()?;
        Ok(spec)
    }
}

/// One CSV record.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub axis_value: f64,
    pub scheme: Scheme,
    /// `lmmse`, `ls` or `crlb`.
    pub estimator: String,
    pub nmse_db: f64,
    pub mse: f64,
    pub source: Method,
    pub se: Option<f64>,
    pub seed: u64,
}

impl CsvRow {
    pub fn to_line(&self) -> String {
        format!(
            "{:?},{},{},{:?},{:?},{},{},{}",
            self.axis_value,
            self.scheme.tag(),
            self.estimator,
            self.nmse_db,
            self.mse,
            self.source.tag(),
            self.se.map(|s| format!("{s:?}")).unwrap_or_default(),
            self.seed
        )
    }
}

pub fn rows_to_csv(rows: &[CsvRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    s
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<CsvRow>,
    pub files: Vec<PathBuf>,
    /// Short `key = value` lines for the terminal.
    pub summary: Vec<String>,
}

/// Runs a validated spec and writes its outputs.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    match spec.task {
        Task::OptimizeGd | Task::OptimizePdd => run_optimizer(spec),
        Task::Evaluate | Task::Sweep | Task::Crlb => {
            let rows = compute_rows(spec)?;
            let mut out = ExperimentOutput { rows, ..Default::default() };
            if spec.task == Task::Crlb {
                for k in 0..spec.scenario.k_users {
                    let lp = LinkParams::from_scenario(&spec.scenario, k)?;
                    out.summary.push(format!("m_r_threshold[{k}] = {:?}", watershed_mr(&lp)?));
                }
            }
            if let Some(path) = &spec.output {
                std::fs::write(path, rows_to_csv(&out.rows))?;
                out.files.push(path.clone());
            }
            Ok(out)
        }
    }
}

/// Scenario at one grid point.
pub fn scenario_at(base: &Scenario, axis: SweepAxis, x: f64) -> Scenario {
    let mut s = base.clone();
    match axis {
        SweepAxis::PMax => s.p_max = x,
        SweepAxis::MR => s.m_r = x as usize,
        SweepAxis::Distance => {
            s.d_b = x;
            s.d_u = vec![x; s.k_users];
        }
    }
    s
}

/// CSV rows of an evaluate, sweep or crlb spec, in grid order.
pub fn compute_rows(spec: &ExperimentSpec) -> Result<Vec<CsvRow>> {
    let points: Vec<(f64, Scenario)> = match spec.axis {
        Some(axis) => spec.grid.iter().map(|&x| (x, scenario_at(&spec.scenario, axis, x))).collect(),
        None => vec![(spec.scenario.p_max, spec.scenario.clone())],
    };
    let mut rows = Vec::new();
    for (i, (x, s)) in points.iter().enumerate() {
        let seed = spec.scenario.seed.wrapping_add(i as u64);
        for &scheme in &spec.schemes {
            let row = if spec.task == Task::Crlb {
                crlb_row(s, scheme, *x, seed)?
            } else {
                eval_row(spec, s, scheme, *x, seed)?
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

fn crlb_row(s: &Scenario, scheme: Scheme, x: f64, seed: u64) -> Result<CsvRow> {
    let mut nmse = 0.0;
    let mut mse = 0.0;
    for k in 0..s.k_users {
        let lp = LinkParams::from_scenario(s, k)?;
        let b = match scheme {
            Scheme::RisTx => crlb_ris_tx_nmse(&lp, CrlbMode::Averaged)?,
            Scheme::Cscd => crlb_cscd_nmse(&lp)?,
        };
        nmse += b;
        mse += b * lp.rho_g * lp.rho_h * lp.m_b * lp.m_r;
    }
    let kk = s.k_users as f64;
    Ok(CsvRow {
        axis_value: x,
        scheme,
        estimator: "crlb".into(),
        nmse_db: db(nmse / kk),
        mse: mse / kk,
        source: Method::Analytic,
        se: None,
        seed,
    })
}

/// Pilot used for the RIS-TX scheme at one scenario.
pub fn resolve_pilot(spec: &ExperimentSpec, s: &Scenario, stats: &ChannelStats) -> Result<PilotSequence> {
    match spec.pilot {
        PilotSource::Dft => Ok(dft_pilot(s.m_r, s.p_max)),
        PilotSource::OptimizedGd => Ok(run_gd(stats, s.p_max, &spec.gd)?.pilot),
        PilotSource::OptimizedPdd => Ok(run_pdd(stats, s.p_max, &spec.pdd)?.pilot),
        PilotSource::File => {
            let path = spec.pilot_file.as_ref().ok_or_else(|| Error::Config("missing pilot_file".into()))?;
            let f = read_pilot(path)?;
            if f.pilot.m_r() != s.m_r {
                return Err(Error::Dimension(format!(
                    "pilot file has m_r = {}, scenario has {}",
                    f.pilot.m_r(),
                    s.m_r
                )));
            }
            if !f.pilot.is_feasible(s.p_max) {
                return Err(Error::InvalidParameter(format!(
                    "pilot energy {} exceeds p_max {}",
                    f.pilot.energy(),
                    s.p_max
                )));
            }
            Ok(f.pilot)
        }
    }
}

fn eval_row(spec: &ExperimentSpec, s: &Scenario, scheme: Scheme, x: f64, seed: u64) -> Result<CsvRow> {
    let est = spec.estimator;
    let closed_form = spec.trials == 0 && s.correlation == Correlation::Uncorrelated;
    let (nmse, mse, se, source) = if closed_form && (scheme == Scheme::Cscd || spec.pilot == PilotSource::Dft) {
        // i.i.d. channels with DFT phases: exact closed forms at any size.
        let mut nmse = 0.0;
        let mut mse = 0.0;
        for k in 0..s.k_users {
            let lp = LinkParams::from_scenario(s, k)?;
            let v = match scheme {
                Scheme::RisTx => closed_form_nmse(est, &lp)?,
                Scheme::Cscd => cscd_closed_form_nmse(est, &lp)?,
            };
            nmse += v;
            mse += v * lp.rho_g * lp.rho_h * lp.m_b * lp.m_r;
        }
        let kk = s.k_users as f64;
        (nmse / kk, mse / kk, None, Method::Analytic)
    } else {
        let stats = build_stats(s)?;
        let report = match scheme {
            Scheme::RisTx => {
                let pilot = resolve_pilot(spec, s, &stats)?;
                let rx = match est {
                    Estimator::Lmmse => lmmse_receivers(&pilot, &stats)?,
                    Estimator::Ls => ls_receivers(&pilot, s.m_b, s.k_users)?,
                };
                if spec.trials == 0 {
                    analytic_report(&pilot, &stats, &rx)?
                } else {
                    simulate_training(&pilot, &stats, &rx, seed, spec.trials)?
                }
            }
            Scheme::Cscd => {
                if spec.trials == 0 {
                    cscd_analytic_report(&stats, s.p_max, est)?
                } else {
                    simulate_cscd(&stats, s.p_max, est, seed, spec.trials)?
                }
            }
        };
        let se = report.se.as_ref().map(|v| v.iter().sum::<f64>() / v.len() as f64);
        (report.mean_nmse(), report.mean_mse(), se, report.method)
    };
    Ok(CsvRow {
        axis_value: x,
        scheme,
        estimator: est.tag().into(),
        nmse_db: db(nmse),
        mse,
        source,
        se,
        seed,
    })
}

fn run_optimizer(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let dir = spec.output.as_ref().ok_or_else(|| Error::Config("missing output".into()))?;
    std::fs::create_dir_all(dir)?;
    let s = &spec.scenario;
    let stats = build_stats(s)?;
    let dft = dft_pilot(s.m_r, s.p_max);
    let dft_objective = objective_p1(&dft, &stats, &lmmse_receivers(&dft, &stats)?)?;
    let mut log = String::new();
    let (algo, pilot, objective, iterations, converged) = match spec.task {
        Task::OptimizeGd => {
            let r = run_gd(&stats, s.p_max, &spec.gd)?;
            log.push_str("iter,objective,theta_step,p_step,energy,unit_modulus_residual\n");
            for it in &r.trace {
                let _ = writeln!(
                    log,
                    "{},{},{},{},{},{}",
                    it.iter, it.objective, it.theta_step, it.p_step, it.energy, it.unit_modulus_residual
                );
            }
            let obj = r.objective();
            ("gd", r.pilot, obj, r.trace.len() - 1, r.converged)
        }
        _ => {
            let r = run_pdd(&stats, s.p_max, &spec.pdd)?;
            log.push_str("outer,inner_sweeps,augmented,objective,v1,v2,v3,v4,rho\n");
            for it in &r.trace {
                let v = it.violations;
                let _ = writeln!(
                    log,
                    "{},{},{},{},{},{},{},{},{}",
                    it.outer, it.inner_sweeps, it.augmented, it.objective, v[0], v[1], v[2], v[3], it.rho
                );
            }
            ("pdd", r.pilot, r.objective, r.trace.len(), r.converged)
        }
    };
    let lmmse_objective = objective_p1(&pilot, &stats, &lmmse_receivers(&pilot, &stats)?)?;
    let pilot_path = dir.join("pilot.txt");
    let log_path = dir.join("iterations.csv");
    let summary_path = dir.join("summary.txt");
    write_pilot(&pilot_path, &pilot, s.p_max)?;
    std::fs::write(&log_path, log)?;
    let summary = vec![
        format!("algo = {algo}"),
        format!("seed = {}", s.seed),
        format!("iterations = {iterations}"),
        format!("converged = {converged}"),
        format!("objective = {objective:?}"),
        format!("objective_lmmse_receivers = {lmmse_objective:?}"),
        format!("dft_objective = {dft_objective:?}"),
        format!("gain_db = {:?}", db(dft_objective / lmmse_objective)),
    ];
    std::fs::write(&summary_path, summary.join("\n") + "\n")?;
    Ok(ExperimentOutput {
        rows: Vec::new(),
        files: vec![pilot_path, log_path, summary_path],
        summary,
    })
}
