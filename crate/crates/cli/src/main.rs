//! `trimirror` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use trimirror::bichromatic::{combined_performance, design, optimize_placement, DesignDrives};
use trimirror::config::{Grid, Resolved, RunConfig};
use trimirror::coupling::{coupling_sweep, Regime};
use trimirror::dynamics::{stability, ResponseRegime};
use trimirror::langevin::{
    equipartition_temperature, estimate_spectrum, estimate_variance, simulate, NoiseSpec, Record,
};
use trimirror::modespectrum::{reference_frequency, spectrum_sweep, CavityMode};
use trimirror::thermometry::{effective_temperature, thermal_summary, IntegralMethod};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] trimirror::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_input_error() => 3,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    TableOne,
    LinearCooling,
    SdeDemo,
}

#[derive(Debug, Parser)]
#[command(name = "trimirror", version, about = "Membrane-in-the-middle cavity optomechanics toolkit")]
struct Cli {
    /// JSON run configuration (SI units; `_rad_s` / `_hz` suffixed frequencies).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled configuration to use when no --config is given.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Output file; stdout if omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides the configured one).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Branch frequencies versus mirror position (CSV).
    Spectrum {
        /// Mode numbers, comma separated.
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<i64>>,
        /// Mirror position grid [m].
        #[arg(long = "q-min")]
        q_min: Option<f64>,
        #[arg(long = "q-max")]
        q_max: Option<f64>,
        #[arg(long = "q-points")]
        q_points: Option<usize>,
    },
    /// Linear and quadratic couplings versus rest position and transmissivity (CSV).
    Coupling {
        #[arg(long, value_delimiter = ',')]
        transmissivities: Option<Vec<f64>>,
        /// Rest position grid [m].
        #[arg(long = "q0-min")]
        q0_min: Option<f64>,
        #[arg(long = "q0-max")]
        q0_max: Option<f64>,
        #[arg(long = "q0-points")]
        q0_points: Option<usize>,
    },
    /// Effective frequency and damping over a probe-frequency grid (CSV, or JSON for a .json --out).
    Effective {
        #[arg(long, value_enum)]
        regime: Option<RegimeArg>,
        /// Probe angular-frequency grid [rad/s].
        #[arg(long = "omega-min")]
        omega_min: Option<f64>,
        #[arg(long = "omega-max")]
        omega_max: Option<f64>,
        #[arg(long = "omega-points")]
        omega_points: Option<usize>,
    },
    /// Effective temperature and occupation (JSON).
    Thermo {
        #[arg(long, value_enum)]
        regime: Option<RegimeArg>,
    },
    /// Stochastic simulation summary (JSON), optionally with a trajectory CSV.
    Sde {
        #[arg(long, value_enum)]
        regime: Option<RegimeArg>,
        #[arg(long = "n-traj")]
        n_traj: Option<usize>,
        /// Decimated position/momentum trace of the first trajectory.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Two-colour trap/cooling design and its performance (JSON).
    Design {
        /// Cooling-beam wavelength [m].
        #[arg(long = "lambda-d")]
        lambda_d: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RegimeArg {
    Linear,
    Quadratic,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Linear => Regime::Linear,
            RegimeArg::Quadratic => Regime::Quadratic,
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, cli.preset) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Some(Preset::LinearCooling)) => RunConfig::linear_cooling(),
        (None, Some(Preset::SdeDemo)) => RunConfig::sde_demo(),
        (None, Some(Preset::TableOne) | None) => RunConfig::table_one(),
    };
    if let Some(s) = cli.seed {
        cfg.sde.seed = s;
    }
    Ok(cfg)
}

/// Command-line grid pieces override the configured or default grid.
fn grid(base: Grid, min: Option<f64>, max: Option<f64>, points: Option<usize>) -> Result<Vec<f64>> {
    let g = Grid {
        min: min.unwrap_or(base.min),
        max: max.unwrap_or(base.max),
        points: points.unwrap_or(base.points),
    };
    Ok(g.values()?)
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(p: &Path, source: io::Error) -> CliError {
    CliError::Output { path: p.display().to_string(), source }
}

fn out_name(path: Option<&Path>) -> String {
    path.map_or("stdout".into(), |p| p.display().to_string())
}

fn write_csv(path: Option<&Path>, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(open_out(path)?);
    let wrap = |e: csv::Error| CliError::Output { path: out_name(path), source: e.into() };
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(&r).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::Output { path: out_name(path), source: e })
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let mut w = open_out(path)?;
    let text = serde_json::to_string_pretty(value).expect("report serialises");
    writeln!(w, "{text}")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Output { path: out_name(path), source: e })
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Command line, then the config's `effective.regime`, then the placement.
fn regime(cfg: &RunConfig, r: &Resolved, forced: Option<RegimeArg>) -> Result<Regime> {
    Ok(match (forced, cfg.effective.regime) {
        (Some(f), _) => f.into(),
        (None, Some(c)) => c,
        (None, None) => r.regime()?,
    })
}

fn cmd_spectrum(
    cfg: &RunConfig,
    out: Option<&Path>,
    modes: Option<Vec<i64>>,
    q: (Option<f64>, Option<f64>, Option<usize>),
) -> Result<()> {
    let r = cfg.resolve()?;
    let modes = match modes.or_else(|| cfg.spectrum.modes.clone()) {
        Some(m) => m,
        None => vec![r.mode.mode_number().ok_or_else(|| {
            CliError::Config("spectrum needs integer mode numbers (mode.number or --modes)".into())
        })?],
    };
    if modes.is_empty() {
        return Err(CliError::Config("empty mode list".into()));
    }
    let lam = CavityMode::number(&r.geometry, modes[0])?.wavelength();
    let base = cfg.spectrum.q.unwrap_or(Grid { min: -lam / 4.0, max: lam / 4.0, points: 201 });
    let q_grid = grid(base, q.0, q.1, q.2)?;
    let rows = spectrum_sweep(&r.geometry, &modes, &q_grid)?;
    let mut table = Vec::with_capacity(rows.len());
    for p in &rows {
        let wn = reference_frequency(&r.geometry, p.n)?;
        table.push(vec![
            p.n.to_string(),
            p.branch.to_string(),
            num(p.q),
            num(p.omega),
            num(p.omega - wn),
        ]);
    }
    write_csv(out, &["n", "branch", "q_m", "omega_rad_s", "offset_rad_s"], table)
}

fn cmd_coupling(
    cfg: &RunConfig,
    out: Option<&Path>,
    ts: Option<Vec<f64>>,
    q0: (Option<f64>, Option<f64>, Option<usize>),
) -> Result<()> {
    let r = cfg.resolve()?;
    let ts = ts
        .or_else(|| cfg.coupling.transmissivities.clone())
        .unwrap_or_else(|| vec![r.geometry.transmissivity()]);
    if ts.is_empty() {
        return Err(CliError::Config("empty transmissivity list".into()));
    }
    let lam = r.mode.wavelength();
    let base = cfg.coupling.q0.unwrap_or(Grid { min: -lam / 2.0, max: lam / 2.0, points: 401 });
    let sweep = coupling_sweep(&r.geometry, &r.mode, &ts, &grid(base, q0.0, q0.1, q0.2)?)?;
    let rows = sweep.linear.iter().map(|l| {
        let quad = sweep.quadratic.iter().find(|q| q.t == l.t).expect("one quadratic row per T");
        vec![
            num(l.t),
            num(l.q0),
            num(l.xi_l),
            num(quad.detuning),
            quad.xi_q.map_or_else(|| "inf".into(), num),
        ]
    });
    write_csv(
        out,
        &["transmissivity", "q0_m", "xi_l_rad_s_m", "delta_o_rad_s", "xi_q_rad_s_m2"],
        rows.collect::<Vec<_>>(),
    )
}

fn cmd_effective(
    cfg: &RunConfig,
    out: Option<&Path>,
    forced: Option<RegimeArg>,
    w: (Option<f64>, Option<f64>, Option<usize>),
) -> Result<()> {
    let r = cfg.resolve()?;
    let reg = regime(cfg, &r, forced)?;
    let resp = r.response(reg)?;
    let default = cfg.omega_grid(&r)?;
    let base = Grid { min: default[0], max: *default.last().unwrap(), points: default.len() };
    let omegas = grid(base, w.0, w.1, w.2)?;
    let label = match resp.regime() {
        ResponseRegime::QuadraticConstant => "quadratic-constant",
        ResponseRegime::LinearFrequencyDependent => "linear-frequency-dependent",
    };
    if out.is_some_and(|p| p.extension().is_some_and(|e| e == "json")) {
        let rows: Vec<_> = omegas
            .iter()
            .map(|&o| json!({"omega_rad_s": o, "omega_eff_sq_rad2_s2": resp.omega_eff_sq(o), "damping_kg_s": resp.damping_at(o)}))
            .collect();
        return write_json(out, &json!({"regime": reg, "response": label, "rows": rows}));
    }
    let rows = omegas.iter().map(|&o| {
        vec![num(o), num(resp.omega_eff_sq(o)), num(resp.omega_eff(o)), num(resp.damping_at(o)), label.to_string()]
    });
    write_csv(
        out,
        &["omega_rad_s", "omega_eff_sq_rad2_s2", "omega_eff_rad_s", "damping_kg_s", "regime"],
        rows.collect::<Vec<_>>(),
    )
}

fn cmd_thermo(cfg: &RunConfig, out: Option<&Path>, forced: Option<RegimeArg>) -> Result<()> {
    let r = cfg.resolve()?;
    let reg = regime(cfg, &r, forced)?;
    let resp = r.response(reg)?;
    let summary = thermal_summary(&r.mechanics, &resp)?;
    let numeric = effective_temperature(&r.mechanics, &resp, r.mechanics.thermal_noise_strength(), IntegralMethod::Numeric);
    let numeric = match numeric {
        Ok(t) => json!(t),
        Err(e) => json!({"error": e.to_string()}),
    };
    write_json(out, &json!({"regime": reg, "summary": summary, "numeric": numeric}))
}

fn cmd_sde(
    cfg: &RunConfig,
    out: Option<&Path>,
    forced: Option<RegimeArg>,
    n_traj: Option<usize>,
    trajectory: Option<&Path>,
) -> Result<()> {
    let r = cfg.resolve()?;
    let reg = regime(cfg, &r, forced)?;
    let sys = r.system(reg)?;
    let resp = r.response(reg)?;
    let mut sim = cfg.sde.simulation.clone();
    if let Some(n) = n_traj {
        sim.n_traj = n;
    }
    if trajectory.is_some() && sim.record != Record::All {
        sim.record = Record::Mechanical;
    }
    let noise = NoiseSpec::new(r.geometry.gamma(), &r.mechanics, cfg.sde.seed);
    let ens = simulate(&sys, &noise, &sim)?;
    let var = estimate_variance(&ens, cfg.sde.burn_in)?;
    let omega = resp.omega_eff(r.mechanics.omega_m);
    let (t, t_se) = equipartition_temperature(r.mechanics.mass, omega, &var);
    let spectrum = match estimate_spectrum(&ens, r.mechanics.mass, &cfg.sde.spectrum) {
        Ok(s) => json!({
            "omega_eff_rad_s": s.omega_eff, "omega_eff_se": s.omega_eff_se,
            "damping_kg_s": s.damping, "damping_se": s.damping_se,
            "resolution_rad_s": s.resolution, "segments": s.segments,
        }),
        Err(e) => json!({"error": e.to_string()}),
    };
    let report = json!({
        "regime": reg,
        "seed": cfg.sde.seed,
        "n_traj": ens.n_traj,
        "dt_s": ens.dt,
        "sample_dt_s": ens.sample_dt,
        "duration_s": ens.duration,
        "relaxation_time_s": ens.relaxation_time,
        "stability": stability(&sys.drift),
        "variance_m2": var,
        "temperature_k": {"value": t, "std_error": t_se, "omega_rad_s": omega},
        "predicted": {
            "omega_eff_rad_s": omega,
            "damping_kg_s": resp.damping_at(omega),
        },
        "spectrum": spectrum,
    });
    if let Some(p) = trajectory {
        let every = cfg.sde.dump_every.unwrap_or(1).max(1);
        let (iq, ip) = (sys.position_index(), sys.momentum_index());
        let q = ens.series(0, iq).expect("position recorded");
        let pm = ens.series(0, ip).expect("momentum recorded");
        let rows = (0..q.len())
            .step_by(every)
            .map(|i| vec![num(i as f64 * ens.sample_dt), num(q[i]), num(pm[i])])
            .collect::<Vec<_>>();
        write_csv(Some(p), &["t_s", "q_m", "p_kg_m_s"], rows)?;
    }
    write_json(out, &report)
}

fn cmd_design(cfg: &RunConfig, out: Option<&Path>, lambda_d: Option<f64>) -> Result<()> {
    let r = cfg.resolve()?;
    let gamma = r.geometry.gamma();
    let opts = cfg.design.as_ref();
    let lambda_d = lambda_d
        .or_else(|| opts.and_then(|o| o.lambda_d))
        .unwrap_or_else(|| r.mode.wavelength());
    let drives = match opts {
        Some(o) => {
            let (t, d) = (o.trap.resolve(gamma)?, o.damp.resolve(gamma)?);
            DesignDrives {
                trap_power: t.power,
                trap_detuning: t.detuning,
                damp_power: d.power,
                damp_detuning: d.detuning,
            }
        }
        None => DesignDrives::standard(gamma),
    };
    let d = design(&r.geometry, lambda_d, &drives)?;
    let perf = combined_performance(&d, &r.geometry, &r.mechanics)?;
    let points = opts.map_or(2001, |o| o.sweep_points);
    let optimum = optimize_placement(&r.geometry, &d, points)?;
    write_json(
        out,
        &json!({
            "design": d,
            "performance": perf,
            "omega_eff_over_omega_m": perf.omega_eff / r.mechanics.omega_m,
            "placement": optimum,
        }),
    )
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Spectrum { modes, q_min, q_max, q_points } => cmd_spectrum(&cfg, out, modes, (q_min, q_max, q_points)),
        Command::Coupling { transmissivities, q0_min, q0_max, q0_points } => {
            cmd_coupling(&cfg, out, transmissivities, (q0_min, q0_max, q0_points))
        }
        Command::Effective { regime, omega_min, omega_max, omega_points } => {
            cmd_effective(&cfg, out, regime, (omega_min, omega_max, omega_points))
        }
        Command::Thermo { regime } => cmd_thermo(&cfg, out, regime),
        Command::Sde { regime, n_traj, trajectory } => cmd_sde(&cfg, out, regime, n_traj, trajectory.as_deref()),
        Command::Design { lambda_d } => cmd_design(&cfg, out, lambda_d),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trimirror: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
