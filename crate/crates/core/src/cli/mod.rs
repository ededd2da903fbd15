//! Configuration, sweep driver and output files for the `hartree` binary.
//!
//! Config files are flat UTF-8 text with one `key = value` per line; `#`
//! starts a comment. Unknown keys are rejected.

pub mod io;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use crate::assembly::{ConvolutionPath, Convolver, ShiftRule};
use crate::eigensolver::PowerMethod;
use crate::error::{Error, Result};
use crate::grid::Lattice;
use crate::mss::{self, CouplingSpec, HartreeSystem, InitMode, MssOptions, MssSolution, MssState};
use crate::observables::SweepRecord;
use crate::potentials::{HarmonicPotential, InteractionPotential, KernelTable, YukawaPotential};

/// Interaction strengths that appear in the reference figures; other sweep
/// points are labeled as extensions in the metadata file.
pub const FIGURE_KAPPAS: [f64; 3] = [0.0, 0.5, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionKind {
    Yukawa,
    Power,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub side_length: f64,
    pub nodes: usize,
    /// `(a, b, c)` per component; `None` centers default to `D / 2`.
    pub trap_centers: [(Option<f64>, Option<f64>); 2],
    pub trap_strengths: [f64; 2],
    pub interaction: InteractionKind,
    pub screening: f64,
    pub regularization: f64,
    pub exponent: f64,
    pub theta: [f64; 2],
    pub kappas: Vec<f64>,
    pub mass: [f64; 2],
    pub tol_pm: f64,
    pub tol_mss: f64,
    pub max_pm_iter: usize,
    pub max_outer: usize,
    pub mixing: f64,
    pub shift: ShiftRule,
    pub init: InitMode,
    pub out_dir: PathBuf,
    pub convolution: ConvolutionPath,
    pub threads: usize,
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            side_length: 1.0,
            nodes: 129,
            trap_centers: [(None, None), (None, None)],
            trap_strengths: [1e5, 1e3],
            interaction: InteractionKind::Yukawa,
            screening: 1e2,
            regularization: 1e-1,
            exponent: 1.0,
            theta: [0.0, 0.0],
            kappas: vec![0.0, 0.5, 2.0, 10.0, 50.0],
            mass: [1.0, 1.0],
            tol_pm: 1e-10,
            tol_mss: 1e-8,
            max_pm_iter: 200_000,
            max_outer: 10_000,
            mixing: 1.0,
            shift: ShiftRule::MaxRowSum,
            init: InitMode::Uniform,
            out_dir: PathBuf::from("out"),
            convolution: ConvolutionPath::Direct,
            threads: 0,
            timing: true,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kappa: Option<String>,
    pub out: Option<String>,
    pub threads: Option<String>,
    pub conv: Option<String>,
    pub init: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        [
            ("kappa", &self.kappa),
            ("out", &self.out),
            ("threads", &self.threads),
            ("conv", &self.conv),
            ("init", &self.init),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

/// Line number used for values that came from command-line flags.
pub const FLAG_LINE: usize = 0;

fn config_err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_err(line, key, format!("cannot parse `{value}`")))
}

fn parse_kappas(line: usize, value: &str) -> Result<Vec<f64>> {
    let list: Vec<f64> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(line, "kappa", s))
        .collect::<Result<_>>()?;
    if list.is_empty() {
        return Err(config_err(line, "kappa", "kappa list is empty"));
    }
    if list.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
        return Err(config_err(
            line,
            "kappa",
            "interaction strengths must be nonnegative",
        ));
    }
    if list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config_err(
            line,
            "kappa",
            "kappa list must be strictly increasing",
        ));
    }
    Ok(list)
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(config_err(
            line,
            key,
            format!("expected on/off, got `{value}`"),
        )),
    }
}

pub fn parse_init(value: &str) -> Option<InitMode> {
    match value {
        "uniform" => Some(InitMode::Uniform),
        "gaussian" => Some(InitMode::Gaussian),
        _ => value
            .strip_prefix("from-file:")
            .filter(|p| !p.is_empty())
            .map(|p| InitMode::FromFile(PathBuf::from(p))),
    }
}

impl RunConfig {
    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        match key {
            "side_length" => self.side_length = parse_num(line, key, value)?,
            "nodes" => self.nodes = parse_num(line, key, value)?,
            "a1" => self.trap_centers[0].0 = Some(parse_num(line, key, value)?),
            "b1" => self.trap_centers[0].1 = Some(parse_num(line, key, value)?),
            "a2" => self.trap_centers[1].0 = Some(parse_num(line, key, value)?),
            "b2" => self.trap_centers[1].1 = Some(parse_num(line, key, value)?),
            "c1" => self.trap_strengths[0] = parse_num(line, key, value)?,
            "c2" => self.trap_strengths[1] = parse_num(line, key, value)?,
            "interaction" => {
                self.interaction = match value {
                    "yukawa" => InteractionKind::Yukawa,
                    "power" => InteractionKind::Power,
                    _ => return Err(config_err(line, key, "expected `yukawa` or `power`")),
                }
            }
            "screening" => self.screening = parse_num(line, key, value)?,
            "regularization" => self.regularization = parse_num(line, key, value)?,
            "exponent" => self.exponent = parse_num(line, key, value)?,
            "theta1" => self.theta[0] = parse_num(line, key, value)?,
            "theta2" => self.theta[1] = parse_num(line, key, value)?,
            "kappa" => self.kappas = parse_kappas(line, value)?,
            "n1" => self.mass[0] = parse_num(line, key, value)?,
            "n2" => self.mass[1] = parse_num(line, key, value)?,
            "tol_pm" => self.tol_pm = parse_num(line, key, value)?,
            "tol_mss" => self.tol_mss = parse_num(line, key, value)?,
            "max_pm_iter" => self.max_pm_iter = parse_num(line, key, value)?,
            "max_outer" => self.max_outer = parse_num(line, key, value)?,
            "mixing" => self.mixing = parse_num(line, key, value)?,
            "shift" => {
                self.shift = match value {
                    "row-sum" => ShiftRule::MaxRowSum,
                    "l1" => ShiftRule::EntrywiseL1,
                    _ => return Err(config_err(line, key, "expected `row-sum` or `l1`")),
                }
            }
            "init" => {
                self.init = parse_init(value).ok_or_else(|| {
                    config_err(line, key, "expected uniform, gaussian or from-file:<path>")
                })?
            }
            "out" => self.out_dir = PathBuf::from(value),
            "conv" => {
                self.convolution = match value {
                    "direct" => ConvolutionPath::Direct,
                    "fast" => ConvolutionPath::Fast,
                    _ => return Err(config_err(line, key, "expected `direct` or `fast`")),
                }
            }
            "threads" => self.threads = parse_num(line, key, value)?,
            "timing" => self.timing = parse_bool(line, key, value)?,
            _ => return Err(config_err(line, key, "unknown key")),
        }
        Ok(())
    }

    /// Parses config text and applies `overrides` on top.
    pub fn from_text(text: &str, overrides: &Overrides) -> Result<Self> {
        let mut cfg = Self::default();
        let mut lines: HashMap<&str, usize> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_err(lineno, content, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            if lines.contains_key(key) {
                return Err(config_err(lineno, key, "duplicate key"));
            }
            cfg.set(lineno, key, value)?;
            // validation errors are reported against the line that set the key
            let canonical = KEYS.iter().find(|k| **k == key).copied().unwrap_or("");
            lines.insert(canonical, lineno);
        }
        for (key, value) in overrides.pairs() {
            cfg.set(FLAG_LINE, key, value)?;
            lines.insert(key, FLAG_LINE);
        }
        cfg.validate(&|k| lines.get(k).copied().unwrap_or(FLAG_LINE))?;
        Ok(cfg)
    }

    fn validate(&self, line_of: &dyn Fn(&str) -> usize) -> Result<()> {
        let fail = |key: &str, msg: &str| Err(config_err(line_of(key), key, msg));
        if !(self.side_length.is_finite() && self.side_length > 0.0) {
            return fail("side_length", "side length must be positive");
        }
        if self.nodes < 4 {
            return fail("nodes", "need at least 4 nodes per side");
        }
        for (i, c) in self.trap_strengths.iter().enumerate() {
            if !(c.is_finite() && *c >= 0.0) {
                return fail(["c1", "c2"][i], "trap strength must be nonnegative");
            }
        }
        if !(self.screening.is_finite() && self.screening >= 0.0) {
            return fail("screening", "screening must be nonnegative");
        }
        if !(self.regularization.is_finite() && self.regularization > 0.0) {
            return fail("regularization", "regularization must be positive");
        }
        if !(self.exponent.is_finite() && self.exponent > 0.0) {
            return fail("exponent", "exponent must be positive");
        }
        for (i, t) in self.theta.iter().enumerate() {
            if !(t.is_finite() && *t >= 0.0) {
                return fail(["theta1", "theta2"][i], "self-coupling must be nonnegative");
            }
        }
        for (i, n) in self.mass.iter().enumerate() {
            if !(n.is_finite() && *n > 0.0) {
                return fail(["n1", "n2"][i], "mass must be positive");
            }
        }
        if !(self.tol_pm > 0.0) {
            return fail("tol_pm", "tolerance must be positive");
        }
        if !(self.tol_mss > 0.0) {
            return fail("tol_mss", "tolerance must be positive");
        }
        if self.max_pm_iter == 0 {
            return fail("max_pm_iter", "must be at least 1");
        }
        if self.max_outer == 0 {
            return fail("max_outer", "must be at least 1");
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return fail("mixing", "mixing must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.side_length, self.nodes)
    }

    pub fn traps(&self) -> Result<[HarmonicPotential; 2]> {
        let mid = self.side_length / 2.0;
        let trap = |i: usize| {
            let (a, b) = self.trap_centers[i];
            HarmonicPotential::new((a.unwrap_or(mid), b.unwrap_or(mid)), self.trap_strengths[i])
        };
        Ok([trap(0)?, trap(1)?])
    }

    pub fn interaction_potential(&self) -> Result<InteractionPotential> {
        match self.interaction {
            InteractionKind::Yukawa => {
                Ok(YukawaPotential::new(self.screening, self.regularization)?.into())
            }
            InteractionKind::Power => {
                InteractionPotential::regularized_power(self.exponent, self.regularization)
            }
        }
    }

    pub fn mss_options(&self) -> MssOptions {
        MssOptions {
            power_method: PowerMethod {
                tolerance: self.tol_pm,
                max_iter: self.max_pm_iter,
                shift_rule: self.shift,
            },
            tolerance: self.tol_mss,
            max_outer: self.max_outer,
            mixing: self.mixing,
        }
    }

    /// System at the first sweep point.
    pub fn system(&self) -> Result<HartreeSystem> {
        let lattice = self.lattice()?;
        let table = KernelTable::build(&self.interaction_potential()?, &lattice);
        let convolver = Arc::new(Convolver::new(table, self.convolution));
        let couplings = CouplingSpec::new(self.theta, self.kappas[0], self.mass)?;
        HartreeSystem::new(self.traps()?, convolver, couplings)
    }

    /// Key = value echo of the resolved configuration.
    pub fn to_text(&self) -> String {
        let traps = self.traps().ok();
        let center = |i: usize, k: usize| {
            traps
                .map(|t| if k == 0 { t[i].center.0 } else { t[i].center.1 })
                .unwrap_or(f64::NAN)
        };
        let kappas: Vec<String> = self.kappas.iter().map(|k| k.to_string()).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("side_length", self.side_length.to_string());
        kv("nodes", self.nodes.to_string());
        kv("a1", center(0, 0).to_string());
        kv("b1", center(0, 1).to_string());
        kv("c1", self.trap_strengths[0].to_string());
        kv("a2", center(1, 0).to_string());
        kv("b2", center(1, 1).to_string());
        kv("c2", self.trap_strengths[1].to_string());
        kv(
            "interaction",
            match self.interaction {
                InteractionKind::Yukawa => "yukawa",
                InteractionKind::Power => "power",
            }
            .into(),
        );
        kv("screening", self.screening.to_string());
        kv("regularization", self.regularization.to_string());
        kv("exponent", self.exponent.to_string());
        kv("theta1", self.theta[0].to_string());
        kv("theta2", self.theta[1].to_string());
        kv("kappa", kappas.join(","));
        kv("n1", self.mass[0].to_string());
        kv("n2", self.mass[1].to_string());
        kv("tol_pm", self.tol_pm.to_string());
        kv("tol_mss", self.tol_mss.to_string());
        kv("max_pm_iter", self.max_pm_iter.to_string());
        kv("max_outer", self.max_outer.to_string());
        kv("mixing", self.mixing.to_string());
        kv(
            "shift",
            match self.shift {
                ShiftRule::MaxRowSum => "row-sum",
                ShiftRule::EntrywiseL1 => "l1",
            }
            .into(),
        );
        kv("init", self.init.label());
        kv(
            "conv",
            match self.convolution {
                ConvolutionPath::Direct => "direct",
                ConvolutionPath::Fast => "fast",
            }
            .into(),
        );
        kv("threads", self.threads.to_string());
        kv("timing", if self.timing { "on" } else { "off" }.into());
        s
    }
}

const KEYS: &[&str] = &[
    "side_length",
    "nodes",
    "a1",
    "b1",
    "c1",
    "a2",
    "b2",
    "c2",
    "interaction",
    "screening",
    "regularization",
    "exponent",
    "theta1",
    "theta2",
    "kappa",
    "n1",
    "n2",
    "tol_pm",
    "tol_mss",
    "max_pm_iter",
    "max_outer",
    "mixing",
    "shift",
    "init",
    "out",
    "conv",
    "threads",
    "timing",
];

/// Reads a config file and applies flag overrides.
pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(0, "--config", format!("{}: {e}", path.display())))?;
    RunConfig::from_text(&text, overrides)
}

/// One converged sweep point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub record: SweepRecord,
    pub solution: MssSolution,
}

/// Outcome of a warm-started sweep. `failure` holds the first
/// interaction strength that did not converge; later points are skipped.
#[derive(Debug)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    pub residual_log: Vec<(f64, mss::OuterRecord)>,
    pub failure: Option<(f64, Error)>,
}

/// Solves every `kappa` in order, seeding each point with the previous
/// converged pair.
pub fn sweep(
    base: &HartreeSystem,
    kappas: &[f64],
    options: &MssOptions,
    initial: MssState,
) -> Result<SweepOutcome> {
    let mut points = Vec::with_capacity(kappas.len());
    let mut residual_log = Vec::new();
    let mut state = initial;
    for &kappa in kappas {
        let system = base.with_kappa(kappa)?;
        let started = Instant::now();
        let result = mss::mss_solve_with(state.restart(), &system, options, |step| {
            residual_log.push((kappa, step.record()));
        });
        match result {
            Ok(solution) => {
                let record = SweepRecord::from_solution(&system, &solution, started.elapsed())?;
                state = solution.state.clone();
                points.push(SweepPoint { record, solution });
            }
            Err(e) => {
                return Ok(SweepOutcome {
                    points,
                    residual_log,
                    failure: Some((kappa, e)),
                })
            }
        }
    }
    Ok(SweepOutcome {
        points,
        residual_log,
        failure: None,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes every output of a sweep into `dir`.
pub fn write_outputs(config: &RunConfig, outcome: &SweepOutcome, dir: &Path) -> Result<()> {
    let mut table = String::from(io::SWEEP_HEADER);
    table.push('\n');
    for p in &outcome.points {
        table.push_str(&io::sweep_row(&p.record, config.timing));
        table.push('\n');
    }
    if let Some((kappa, err)) = &outcome.failure {
        let reason = err.to_string().replace('\n', " ");
        let _ = writeln!(table, "# kappa={kappa} failed: {reason}");
    }
    write_file(&dir.join("sweep.csv"), &table)?;

    let mut log = String::from(io::RESIDUAL_HEADER);
    log.push('\n');
    let mut push_records = |kappa: f64, r: &mss::OuterRecord| {
        for alpha in 0..2 {
            let _ = writeln!(
                log,
                "{},{},{},{},{},{}",
                io::num(kappa),
                r.outer_iteration,
                alpha + 1,
                io::num(r.epsilon[alpha]),
                io::num(r.mu[alpha]),
                io::num(r.residuals[alpha]),
            );
        }
    };
    for (kappa, r) in &outcome.residual_log {
        push_records(*kappa, r);
    }
    write_file(&dir.join("residuals.csv"), &log)?;

    for p in &outcome.points {
        let kappa = p.record.kappa;
        for alpha in 0..2 {
            io::write_density(
                &p.solution.state.fields[alpha],
                &dir.join(io::density_file_name(kappa, alpha + 1)),
            )?;
        }
        io::write_state(
            &p.solution.state.fields,
            &dir.join(io::state_file_name(kappa)),
        )?;
    }

    let solved: Vec<f64> = outcome.points.iter().map(|p| p.record.kappa).collect();
    write_file(&dir.join("plot.gp"), &io::plot_script(&solved))?;

    let extra: Vec<String> = config
        .kappas
        .iter()
        .filter(|k| !FIGURE_KAPPAS.contains(k))
        .map(|k| k.to_string())
        .collect();
    let mut meta = config.to_text();
    let _ = writeln!(
        meta,
        "# start mode of the first sweep point; later points are warm-started"
    );
    let _ = writeln!(meta, "start_mode = {}", config.init.label());
    let _ = writeln!(
        meta,
        "# sweep points beyond the reference figures (0, 0.5, 10) are extensions"
    );
    let _ = writeln!(meta, "extension_kappas = {}", extra.join(","));
    write_file(&dir.join("metadata.txt"), &meta)?;
    Ok(())
}

/// Process exit status of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    ConfigError = 2,
    NonConvergence = 3,
    IoError = 4,
}

impl ExitStatus {
    pub fn of_error(err: &Error) -> Self {
        match err {
            Error::Io { .. } => Self::IoError,
            Error::PowerMethodNonConvergence { .. } | Error::MssNonConvergence { .. } => {
                Self::NonConvergence
            }
            _ => Self::ConfigError,
        }
    }
}

/// Runs a full sweep and writes its outputs to `config.out_dir`.
pub fn run_sweep(config: &RunConfig) -> Result<(ExitStatus, SweepOutcome)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(|| {
        let system = config.system()?;
        let initial = mss::initial_state(&system, &config.init)?;
        let options = config.mss_options();
        let dir = &config.out_dir;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let outcome = sweep(&system, &config.kappas, &options, initial)?;
        write_outputs(config, &outcome, dir)?;
        let status = match &outcome.failure {
            None => ExitStatus::Success,
            Some((_, e)) => ExitStatus::of_error(e),
        };
        Ok((status, outcome))
    })
}
