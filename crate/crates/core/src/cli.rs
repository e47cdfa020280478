//! `mechq` command line: theory tables, simulated experiments, fits, Wigner
//! fields and manifest replay. Every command writes a `manifest.json` that
//! records its arguments and resolved device configuration.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::device::{self, DeviceConfig, DeviceParams};
use crate::error::{Error, Result};
use crate::estimation::{self, FitResult};
use crate::io::{self, Manifest};
use crate::sequences::{
    uniform_grid, CardinalPoint, ExperimentResult, PhononProtocol, PhononReadout, PumpTone, Simulator, DEFAULT_PHONON_RABI,
    DEFAULT_RPN_POINTS, DEFAULT_RPN_WINDOW,
};

pub const EXPERIMENTS: [&str; 8] =
    ["theory", "spectroscopy", "ramsey_anharmonicity", "rpn", "mech_rabi", "phonon_t1", "phonon_t2", "cardinal_states"];

pub const FIT_METHODS: [&str; 7] = ["ramsey", "exponential", "damped_cosine", "decaying_cosine", "lorentzian", "rpn", "mle"];

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "MECHQ_THREADS";

#[derive(Debug, Parser)]
#[command(name = "mechq", version, about = "Mechanical-qubit simulation and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dressed-state theory over a detuning grid.
    Theory(TheoryArgs),
    /// Simulate a registered experiment.
    Run(RunArgs),
    /// Fit measurement files.
    Fit(FitArgs),
    /// Wigner function of a stored phonon state.
    Wigner(WignerArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Device file (JSON, Hz and seconds); built-in reference device if absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TheoryArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = -4e6, allow_negative_numbers = true)]
    pub delta_min_hz: f64,
    #[arg(long, default_value_t = -0.5e6, allow_negative_numbers = true)]
    pub delta_max_hz: f64,
    #[arg(long, default_value_t = 351)]
    pub points: usize,
}

/// Shot count per point, or the noiseless expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Shots {
    Exact,
    Count(u64),
}

impl FromStr for Shots {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "exact" {
            return Ok(Self::Exact);
        }
        match s.parse::<u64>() {
            Ok(0) | Err(_) => Err(format!("expected \"exact\" or a positive integer, got '{s}'")),
            Ok(n) => Ok(Self::Count(n)),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// One of the registered experiments.
    pub experiment: String,
    #[command(flatten)]
    pub common: Common,
    /// Qubit–phonon detuning; the device operating point if absent.
    #[arg(long, allow_negative_numbers = true)]
    pub delta_hz: Option<f64>,
    /// Phonon Rabi rate of direct drives; the probe amplitude, required, for spectroscopy.
    #[arg(long)]
    pub drive_hz: Option<f64>,
    #[arg(long)]
    pub t_max_us: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, default_value = "exact")]
    pub shots: Shots,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Artificial detuning of Ramsey-type protocols.
    #[arg(long, allow_negative_numbers = true)]
    pub omega_ad_hz: Option<f64>,
    /// Phonon readout for T1/T2: swap or mean_number.
    #[arg(long)]
    pub readout: Option<String>,
    /// Cardinal state prepared before an RPN record.
    #[arg(long, default_value = "one")]
    pub prep: String,
    /// Half-width of the spectroscopy probe sweep.
    #[arg(long, default_value_t = 60e3)]
    pub span_hz: f64,
    /// Pump Rabi rate on the 0→1 transition during spectroscopy; 0 disables it.
    #[arg(long, default_value_t = 0.0)]
    pub pump_hz: f64,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// One of the registered fit methods.
    pub method: String,
    /// Input files (record CSV, two-column CSV for lorentzian, Wigner CSV for mle).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_negative_numbers = true)]
    pub omega_ad_hz: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub n_max: usize,
}

#[derive(Debug, Clone, Args)]
pub struct WignerArgs {
    /// State JSON; a qubit factor, if present, is traced out.
    pub state: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 41)]
    pub grid_n: usize,
    #[arg(long, default_value_t = 2.5)]
    pub extent: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest file or the directory containing it.
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn usage(message: String, registered: &[&str]) -> Error {
    Error::Usage { message, registered: registered.iter().map(|s| s.to_string()).collect() }
}

fn load_params(config: &Option<PathBuf>) -> Result<DeviceParams> {
    match config {
        Some(p) => device::load_device(p),
        None => Ok(DeviceParams::default()),
    }
}

/// Caps the global pool at `MECHQ_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| Error::Config { context: THREADS_ENV.into(), message: format!("not a count: '{v}'") })?;
    if n == 0 {
        return Err(Error::Config { context: THREADS_ENV.into(), message: "must be at least 1".into() });
    }
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("global thread pool already initialized");
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(&args).map_err(|e| Error::Usage { message: e.to_string(), registered: Vec::new() })?;
    execute(cli.command, args[1..].to_vec())
}

/// Entry point of the `mechq` binary; returns the process exit code.
pub fn main_with_args(args: Vec<String>) -> i32 {
    match Cli::try_parse_from(&args) {
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            code
        }
        Ok(cli) => match configure_threads().and_then(|_| execute(cli.command, args[1..].to_vec())) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("mechq: {e}");
                match e {
                    Error::Usage { .. } => 2,
                    _ => 1,
                }
            }
        },
    }
}

fn execute(command: Command, argv: Vec<String>) -> Result<()> {
    let started = Instant::now();
    let (out, name, config, files) = match command {
        Command::Theory(a) => {
            let params = load_params(&a.common.config)?;
            let files = cmd_theory(&a, &params)?;
            (a.common.out, "theory", config_echo(&params), files)
        }
        Command::Run(a) => {
            let params = load_params(&a.common.config)?;
            let files = cmd_run(&a, &params)?;
            (a.common.out, "run", config_echo(&params), files)
        }
        Command::Fit(a) => {
            let params = load_params(&a.common.config)?;
            let files = cmd_fit(&a, &params)?;
            (a.common.out, "fit", config_echo(&params), files)
        }
        Command::Wigner(a) => {
            let files = cmd_wigner(&a)?;
            (a.out, "wigner", serde_json::Value::Null, files)
        }
        Command::Replay(a) => return cmd_replay(&a),
    };
    Manifest::new(name, argv, config).write(&out, &files, started.elapsed().as_secs_f64())?;
    Ok(())
}

fn config_echo(params: &DeviceParams) -> serde_json::Value {
    serde_json::to_value(DeviceConfig::from(params)).unwrap_or(serde_json::Value::Null)
}

fn theory_grid(a: &TheoryArgs) -> Vec<f64> {
    if a.points <= 1 {
        return vec![TAU * a.delta_min_hz];
    }
    (0..a.points).map(|k| TAU * (a.delta_min_hz + (a.delta_max_hz - a.delta_min_hz) * k as f64 / (a.points - 1) as f64)).collect()
}

/// Writes `theory.csv`.
pub fn cmd_theory(a: &TheoryArgs, params: &DeviceParams) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&a.common.out)?;
    let rows = device::theory_table(params, &theory_grid(a))?;
    let path = a.common.out.join("theory.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["delta_hz", "alpha_hz", "gamma2_purcell_per_s", "gamma2_total_per_s", "p_p1", "alpha_over_gamma2"])?;
    for r in rows {
        w.write_record([r.delta / TAU, r.alpha / TAU, r.gamma2_purcell, r.gamma2_total, r.p_p1, r.alpha_over_gamma2].map(|x| format!("{x:.12e}")))?;
    }
    w.flush()?;
    Ok(vec![path])
}

fn readout(a: &RunArgs, default: PhononReadout) -> Result<PhononReadout> {
    match a.readout.as_deref() {
        None => Ok(default),
        Some("swap") => Ok(PhononReadout::Swap),
        Some("mean_number") => Ok(PhononReadout::MeanNumber),
        Some(other) => Err(usage(format!("unknown readout '{other}'"), &["swap", "mean_number"])),
    }
}

/// Simulates one registered experiment into `--out`.
pub fn cmd_run(a: &RunArgs, params: &DeviceParams) -> Result<Vec<PathBuf>> {
    if !EXPERIMENTS.contains(&a.experiment.as_str()) {
        return Err(usage(format!("unknown experiment '{}'", a.experiment), &EXPERIMENTS));
    }
    let out = &a.common.out;
    std::fs::create_dir_all(out)?;
    if a.experiment == "theory" {
        let t = TheoryArgs { common: a.common.clone(), delta_min_hz: -4e6, delta_max_hz: -0.5e6, points: 351 };
        return cmd_theory(&t, params);
    }
    let sim = Simulator::new(*params);
    let delta = a.delta_hz.map_or(params.delta, |d| TAU * d);
    let drive = a.drive_hz.map_or(DEFAULT_PHONON_RABI, |d| TAU * d);
    let t_max = |default_us: f64| 1e-6 * a.t_max_us.unwrap_or(default_us);
    let points = |default: usize| a.points.unwrap_or(default);
    let omega_ad = |default_hz: f64| TAU * a.omega_ad_hz.unwrap_or(default_hz);
    let protocol = |r| PhononProtocol { drive_amplitude: drive, readout: r, ..PhononProtocol::default() };

    let mut extra = Vec::new();
    let mut result = match a.experiment.as_str() {
        "spectroscopy" => {
            let n = points(41);
            let probes: Vec<f64> = uniform_grid(2.0 * TAU * a.span_hz, n).iter().map(|x| x - TAU * a.span_hz).collect();
            let pump = (a.pump_hz > 0.0).then(|| PumpTone { amplitude: TAU * a.pump_hz, detuning: 0.0 });
            let amplitude = TAU * a.drive_hz.ok_or_else(|| usage("spectroscopy needs --drive-hz (probe Rabi rate)".into(), &[]))?;
            let r = sim.run_spectroscopy(delta, &probes, t_max(100.0), amplitude, pump)?;
            let path = out.join("spectrum.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["detuning_hz", "mean_phonon"])?;
            let means: Vec<f64> = serde_json::from_value(r.metadata["mean_phonon"].clone())?;
            for (p, m) in probes.iter().zip(means) {
                w.write_record([format!("{:.12e}", p / TAU), format!("{m:.12e}")])?;
            }
            w.flush()?;
            extra.push(path);
            r
        }
        "ramsey_anharmonicity" => {
            let ad = omega_ad(100e3);
            let rec = sim.run_ramsey_anharmonicity(delta, ad, t_max(50.0), points(101))?;
            let mut r = ExperimentResult::new("ramsey_anharmonicity");
            r.insert("delta_rad_s", delta);
            r.insert("omega_ad_rad_s", ad);
            r.insert("alpha_theory_rad_s", device::anharmonicity(delta, params.g)?);
            r.records.push(rec);
            r
        }
        "rpn" => {
            let point = CardinalPoint::from_name(&a.prep)
                .ok_or_else(|| usage(format!("unknown state '{}'", a.prep), &CardinalPoint::ALL.map(|p| p.name())))?;
            let rec = sim.run_rpn(&point.preparation(drive), 1e-6 * a.t_max_us.unwrap_or(DEFAULT_RPN_WINDOW * 1e6), points(DEFAULT_RPN_POINTS))?;
            let mut r = ExperimentResult::new("rpn");
            r.insert("prep", point.name());
            r.records.push(rec);
            r
        }
        "mech_rabi" => sim.run_mech_rabi(drive, 0.0, &uniform_grid(t_max(100.0), points(21)))?,
        "phonon_t1" => {
            let rec = sim.run_phonon_t1(&uniform_grid(t_max(400.0), points(101)), &protocol(readout(a, PhononReadout::MeanNumber)?))?;
            let mut r = ExperimentResult::new("phonon_t1");
            r.records.push(rec);
            r
        }
        "phonon_t2" => {
            let ad = omega_ad(20e3);
            let rec = sim.run_phonon_t2_ramsey(&uniform_grid(t_max(400.0), points(101)), ad, &protocol(readout(a, PhononReadout::Swap)?))?;
            let mut r = ExperimentResult::new("phonon_t2");
            r.insert("omega_ad_rad_s", ad);
            r.records.push(rec);
            r
        }
        "cardinal_states" => {
            let states: Vec<_> = CardinalPoint::ALL.par_iter().map(|&p| sim.prepare_cardinal_state(p).map(|s| (p, s))).collect::<Result<_>>()?;
            let mut r = ExperimentResult::new("cardinal_states");
            for (p, s) in &states {
                let path = out.join(format!("state_{}.json", p.name()));
                io::write_state(&path, s)?;
                extra.push(path);
                let target = p.target(params.dim_fock);
                r.insert(&format!("fidelity_{}", p.name()), estimation::fidelity(&target, s)?);
            }
            r
        }
        _ => unreachable!("registry checked above"),
    };
    if let Shots::Count(n) = a.shots {
        result = result.with_shot_noise(n, a.seed)?;
    }
    result.seed = a.seed;
    let mut files = io::write_experiment(out, &result)?;
    files.extend(extra);
    Ok(files)
}

fn gamma1_effective(params: &DeviceParams, delta: f64) -> f64 {
    let eps = if delta == 0.0 { 0.0 } else { params.g / delta };
    params.phonon_gamma1() + eps * eps * params.qubit_gamma1()
}

/// Fits each input file; writes `fit_<stem>.json` (or state/population files).
pub fn cmd_fit(a: &FitArgs, params: &DeviceParams) -> Result<Vec<PathBuf>> {
    if !FIT_METHODS.contains(&a.method.as_str()) {
        return Err(usage(format!("unknown fit method '{}'", a.method), &FIT_METHODS));
    }
    for input in &a.inputs {
        if !input.exists() {
            return Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("{} does not exist", input.display()))));
        }
    }
    let out = &a.common.out;
    std::fs::create_dir_all(out)?;
    let mut files = Vec::new();
    for input in &a.inputs {
        let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into());
        let path = match a.method.as_str() {
            "rpn" => {
                let rec = io::read_record(input)?;
                let d = estimation::rpn_fit(&rec, params, a.n_max)?;
                let path = out.join(format!("populations_{stem}.json"));
                io::write_json(&path, &d)?;
                path
            }
            "mle" => {
                let samples = io::read_wigner_csv(input)?;
                let state = estimation::mle_reconstruct(&samples, a.n_max)?;
                let path = out.join(format!("state_{stem}.json"));
                io::write_state(&path, &state)?;
                path
            }
            method => {
                let fit = fit_one(method, input, params, a)?;
                let path = out.join(format!("fit_{stem}.json"));
                io::write_fit(&path, &fit)?;
                path
            }
        };
        files.push(path);
    }
    Ok(files)
}

fn fit_one(method: &str, input: &Path, params: &DeviceParams, a: &FitArgs) -> Result<FitResult> {
    if method == "lorentzian" {
        return estimation::fit_lorentzian(&read_xy(input)?);
    }
    let rec = io::read_record(input)?;
    match method {
        "ramsey" => {
            let ad = TAU * a.omega_ad_hz.unwrap_or(100e3);
            estimation::fit_ramsey_anharmonicity(&rec, gamma1_effective(params, rec.delta), ad)
        }
        "exponential" => estimation::fit_exponential(&rec),
        "damped_cosine" => estimation::fit_damped_cosine(&rec),
        "decaying_cosine" => estimation::fit_decaying_cosine(&rec),
        other => Err(usage(format!("unknown fit method '{other}'"), &FIT_METHODS)),
    }
}

/// First two columns of a headed CSV.
fn read_xy(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .enumerate()
        .map(|(i, row)| {
            let row = row?;
            let num = |k: usize| row.get(k).and_then(|v| v.trim().parse::<f64>().ok());
            match (num(0), num(1)) {
                (Some(x), Some(y)) => Ok((x, y)),
                _ => Err(Error::Config { context: format!("{}:{}", path.display(), i + 2), message: "expected two numeric columns".into() }),
            }
        })
        .collect()
}

/// Writes `wigner.csv` for a stored state.
pub fn cmd_wigner(a: &WignerArgs) -> Result<Vec<PathBuf>> {
    let state = io::read_state(&a.state)?;
    let phonon = if state.dims().qubit == 1 { state } else { state.reduced_phonon() };
    std::fs::create_dir_all(&a.out)?;
    let grid = estimation::wigner_grid(a.grid_n, a.extent);
    let w = estimation::wigner(&phonon, &grid)?;
    let path = a.out.join("wigner.csv");
    io::write_wigner_csv(&path, &grid, &w)?;
    Ok(vec![path])
}

/// Re-executes the recorded arguments, optionally redirecting `--out`.
pub fn cmd_replay(a: &ReplayArgs) -> Result<()> {
    let manifest = io::read_manifest(&a.manifest)?;
    let mut args = manifest.args.clone();
    if let Some(out) = &a.out {
        let out = out.display().to_string();
        match args.iter().position(|x| x == "--out") {
            Some(i) if i + 1 < args.len() => args[i + 1] = out,
            _ => args.extend(["--out".to_string(), out]),
        }
    }
    let mut argv = vec!["mechq".to_string()];
    argv.extend(args);
    run(argv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shots_parsing() {
        assert_eq!("exact".parse::<Shots>().unwrap(), Shots::Exact);
        assert_eq!("2000".parse::<Shots>().unwrap(), Shots::Count(2000));
        assert!("0".parse::<Shots>().is_err());
        assert!("many".parse::<Shots>().is_err());
    }

    #[test]
    fn unknown_experiment_lists_registry() {
        let dir = tempfile::tempdir().unwrap();
        let err = run(["mechq", "run", "bogus", "--out", dir.path().to_str().unwrap()]).unwrap_err();
        match err {
            Error::Usage { registered, .. } => assert_eq!(registered.len(), EXPERIMENTS.len()),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_fit_method_lists_registry() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("x.csv");
        std::fs::write(&input, "t_s,p_excited\n").unwrap();
        let err = run(["mechq", "fit", "nope", input.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]).unwrap_err();
        assert!(matches!(err, Error::Usage { ref registered, .. } if registered.len() == FIT_METHODS.len()));
    }

    #[test]
    fn theory_grid_endpoints() {
        let a = TheoryArgs {
            common: Common { config: None, out: PathBuf::from(".") },
            delta_min_hz: -4e6,
            delta_max_hz: -0.5e6,
            points: 351,
        };
        let g = theory_grid(&a);
        assert_eq!(g.len(), 351);
        assert!((g[329] / TAU + 0.71e6).abs() < 1e-6);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(vec!["mechq".into(), "frobnicate".into()]), 2);
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.json");
        let args = ["mechq", "wigner", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()];
        assert_eq!(main_with_args(args.iter().map(|s| s.to_string()).collect()), 1);
    }
}
