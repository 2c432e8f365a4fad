//! Command-line front end. Every subcommand writes one CSV table whose
//! `#` header carries the manifest digest and the resolved parameters.

mod output;
pub mod sweep;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::estimators::{default_alpha_grid, optimize_threshold, ThresholdScheme};
use crate::information::{approximate_capacity, optimal_input_distribution, FisherCurve, ReceiverModel, DEFAULT_GRID};
use crate::modem::analytical_sep;
use crate::params::SystemParams;
use crate::simulator::{analytical_campaign_sep, run_campaign, run_campaign_isi, CskLink, Modulation, RskLink};
use output::{num, Table};
use sweep::{parse_named_sweep, parse_sweep};

/// Capacity column value when the Fisher integral vanishes.
pub const NO_INFORMATION: &str = "no-information";

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "RSK_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "rsk",
    version,
    about = "RSK/CSK capacity, constellation design and SEP analysis"
)]
pub struct Cli {
    /// TOML file overriding the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for simulations.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV path; the manifest goes next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
struct ParamArgs {
    /// Receptor count (a sweep for `capacity`).
    #[arg(long)]
    nr: Option<String>,
    /// Similarity k1_off/k2_off (a sweep for `capacity`).
    #[arg(long)]
    gamma: Option<String>,
    /// Ligand diffusion coefficient, μm²/s.
    #[arg(long)]
    d: Option<f64>,
    /// Tx/Rx diffusion coefficient, μm²/s.
    #[arg(long)]
    dtxrx: Option<f64>,
    /// Initial Tx–Rx distance, μm.
    #[arg(long)]
    r0: Option<f64>,
    /// Signaling interval in s (a sweep for `isi`).
    #[arg(long)]
    ts: Option<String>,
    #[arg(long)]
    kon: Option<f64>,
    #[arg(long)]
    k2off: Option<f64>,
    /// Peak received CSK concentration at r0, in units of K_D1.
    #[arg(long = "max-power")]
    max_power: Option<f64>,
    #[arg(long)]
    messages: Option<u64>,
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long = "isi-window")]
    isi_window: Option<usize>,
    /// Fixed sampling delay in s instead of peak sampling.
    #[arg(long = "tau-s")]
    tau_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Analytical,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModChoice {
    Rsk,
    Csk,
    Both,
}

fn parse_model(s: &str) -> Result<ReceiverModel> {
    s.parse()
}

fn parse_modulation(s: &str) -> Result<Modulation> {
    s.parse()
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Asymptotic capacity over a sweep of gamma, receptor count or c_max.
    Capacity {
        #[arg(long, value_parser = parse_model)]
        model: ReceiverModel,
        /// Maximum concentration in units of K_D1 (sweepable).
        #[arg(long)]
        cmax: Option<String>,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Capacity-achieving input density on its grid.
    Oid {
        #[arg(long, value_parser = parse_model)]
        model: ReceiverModel,
        /// Maximum concentration in units of K_D1.
        #[arg(long)]
        cmax: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Designed four-level constellation with statistics and thresholds.
    Constellation {
        #[arg(long = "mod", value_parser = parse_modulation)]
        modulation: Modulation,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Symbol error probability, analytical or simulated, over a sweep.
    Sep {
        #[arg(long = "mod", value_parser = parse_modulation)]
        modulation: Modulation,
        #[arg(long, value_enum, default_value_t = Mode::Analytical)]
        mode: Mode,
        /// `name=values` with name one of gamma, nr, dtxrx, ts, r0, d, maxpower.
        #[arg(long)]
        sweep: Option<String>,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Simulated SEP with and without interference over a T_s sweep.
    Isi {
        #[arg(long = "mod", value_enum, default_value_t = ModChoice::Both)]
        modulation: ModChoice,
        #[command(flatten)]
        params: ParamArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Capacity { .. } => "capacity",
            Self::Oid { .. } => "oid",
            Self::Constellation { .. } => "constellation",
            Self::Sep { .. } => "sep",
            Self::Isi { .. } => "isi",
        }
    }

    fn params(&self) -> &ParamArgs {
        match self {
            Self::Capacity { params, .. }
            | Self::Oid { params, .. }
            | Self::Constellation { params, .. }
            | Self::Sep { params, .. }
            | Self::Isi { params, .. } => params,
        }
    }
}

/// Usage problems exit with 2, computation failures with 1.
enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Sweep(_) | Error::Config(_) => Self::Usage(e.to_string()),
            other => Self::Run(other),
        }
    }
}

fn single(name: &str, spec: &Option<String>) -> std::result::Result<Option<f64>, Failure> {
    match spec {
        None => Ok(None),
        Some(s) => {
            let v = parse_sweep(s)?;
            if v.len() != 1 {
                return Err(Failure::Usage(format!("--{name} takes a single value here")));
            }
            Ok(Some(v[0]))
        }
    }
}

fn receptor_count(x: f64) -> std::result::Result<u64, Failure> {
    if x >= 1.0 && x.fract() == 0.0 && x < 9.0e15 {
        Ok(x as u64)
    } else {
        Err(Failure::Usage(format!(
            "receptor count must be a positive integer, got {x}"
        )))
    }
}

/// Defaults, then the config file, then flags.
fn resolve(cli: &Cli, args: &ParamArgs, sweepable: &[&str]) -> std::result::Result<SystemParams, Failure> {
    let mut p = match &cli.config {
        Some(path) => SystemParams::from_file(path)?,
        None => SystemParams::default(),
    };
    if let Some(v) = args.k2off {
        let g = p.gamma();
        p.k2_off = v;
        p.set_gamma(g);
    }
    if let Some(v) = args.kon {
        p.k_on = v;
    }
    if !sweepable.contains(&"gamma") {
        if let Some(g) = single("gamma", &args.gamma)? {
            p.set_gamma(g);
        }
    }
    if !sweepable.contains(&"nr") {
        if let Some(n) = single("nr", &args.nr)? {
            p.n_r = receptor_count(n)?;
        }
    }
    if !sweepable.contains(&"ts") {
        if let Some(t) = single("ts", &args.ts)? {
            p.t_s = t;
        }
    }
    if let Some(v) = args.d {
        p.d = v;
    }
    if let Some(v) = args.dtxrx {
        p.d_txrx = v;
    }
    if let Some(v) = args.r0 {
        p.r0 = v;
    }
    if let Some(v) = args.max_power {
        p.max_power_kd1 = v;
    }
    if let Some(v) = args.messages {
        p.messages = v;
    }
    if let Some(v) = args.runs {
        p.runs = v;
    }
    if let Some(v) = args.isi_window {
        p.isi_window = v;
    }
    if args.tau_s.is_some() {
        p.tau_s = args.tau_s;
    }
    Ok(p)
}

fn apply(p: &mut SystemParams, name: &str, value: f64) -> std::result::Result<(), Failure> {
    match name {
        "gamma" => p.set_gamma(value),
        "nr" => p.n_r = receptor_count(value)?,
        "dtxrx" => p.d_txrx = value,
        "ts" => p.t_s = value,
        "r0" => p.r0 = value,
        "d" => p.d = value,
        "maxpower" => p.max_power_kd1 = value,
        "cmax" => p.max_power_kd1 = value,
        other => return Err(Failure::Usage(format!("cannot sweep '{other}'"))),
    }
    Ok(())
}

fn sweep_value(p: &SystemParams, name: &str) -> f64 {
    match name {
        "gamma" => p.gamma(),
        "nr" => p.n_r as f64,
        "dtxrx" => p.d_txrx,
        "ts" => p.t_s,
        "r0" => p.r0,
        "d" => p.d,
        _ => p.max_power_kd1,
    }
}

fn capacity_curve(model: ReceiverModel, p: &SystemParams, grid: usize) -> Result<FisherCurve> {
    let panel = p.panel()?;
    let receptors = p.receptors()?;
    match model {
        ReceiverModel::RskOptimal => FisherCurve::rsk_optimal(&panel, &receptors, grid),
        ReceiverModel::RskSuboptimal => {
            // identical ligands admit no informative threshold; any will do
            let scheme = if panel.gamma() == 1.0 {
                ThresholdScheme::new(1.0, &panel)?
            } else {
                optimize_threshold(&panel, &receptors, &default_alpha_grid())?
            };
            FisherCurve::rsk_suboptimal(&panel, &scheme, &receptors, grid)
        }
        ReceiverModel::Csk => FisherCurve::csk(&p.csk_ligand()?, &receptors, p.max_concentration()?, grid),
    }
}

/// Rows computed before a failure are kept and written.
type Produced = (Table, Option<Failure>);

fn cmd_capacity(
    base: &SystemParams,
    model: ReceiverModel,
    args: &ParamArgs,
    cmax: &Option<String>,
    grid: usize,
) -> std::result::Result<Produced, Failure> {
    let mut given = Vec::new();
    for (name, spec) in [("gamma", &args.gamma), ("nr", &args.nr), ("cmax", cmax)] {
        if let Some(s) = spec {
            given.push((name, parse_sweep(s)?));
        }
    }
    let multi: Vec<_> = given.iter().filter(|(_, v)| v.len() > 1).collect();
    if multi.len() > 1 {
        return Err(Failure::Usage("only one of --gamma, --nr, --cmax may be swept".into()));
    }
    let mut p = base.clone();
    for (name, v) in &given {
        apply(&mut p, name, v[0])?;
    }
    let (name, values) = match (multi.first(), given.first()) {
        (Some((n, v)), _) | (None, Some((n, v))) => (*n, v.clone()),
        (None, None) => ("gamma", vec![p.gamma()]),
    };
    let mut table = Table::new(&["model", "sweep_param", "value", "capacity_bits", "fisher_integral"]);
    for &x in &values {
        apply(&mut p, name, x)?;
        let curve = match capacity_curve(model, &p, grid) {
            Ok(c) => c,
            Err(e) => return Ok((table, Some(e.into()))),
        };
        let cap = approximate_capacity(&curve);
        table.push(vec![
            model.name().into(),
            name.into(),
            num(x),
            cap.bits_per_use.map(num).unwrap_or_else(|| NO_INFORMATION.into()),
            num(cap.fisher_integral),
        ]);
    }
    Ok((table, None))
}

fn cmd_oid(p: &SystemParams, model: ReceiverModel, grid: usize) -> Result<Table> {
    let curve = capacity_curve(model, p, grid)?;
    let dist = optimal_input_distribution(&curve)?;
    let mut table = Table::new(&["x", "density"]);
    for (x, d) in dist.grid.iter().zip(&dist.density) {
        table.push(vec![num(*x), num(*d)]);
    }
    Ok(table)
}

fn cmd_constellation(p: &SystemParams, modulation: Modulation) -> Result<Table> {
    let receptors = p.receptors()?;
    let (constellation, n_tx) = match modulation {
        Modulation::Rsk => (RskLink::design(&p.panel()?, &receptors)?.constellation, None),
        Modulation::Csk => {
            let link = CskLink::design(
                &p.csk_ligand()?,
                &receptors,
                p.max_concentration()?,
                p.r0,
                p.d,
                p.sampling(),
            )?;
            (link.constellation, Some(link.n_tx))
        }
    };
    let mut table = Table::new(&[
        "symbol",
        "level",
        "transmit_count",
        "mean",
        "variance",
        "lower_threshold",
    ]);
    table.comment(format!("analytical_sep: {}", num(analytical_sep(&constellation))));
    for m in 0..4 {
        let s = &constellation.stats[m];
        table.push(vec![
            m.to_string(),
            num(constellation.levels[m]),
            n_tx.map(|n| num(n[m])).unwrap_or_default(),
            num(s.mean),
            num(s.variance),
            if m == 0 {
                String::new()
            } else {
                num(constellation.thresholds[m - 1])
            },
        ]);
    }
    Ok(table)
}

fn cmd_sep(
    base: &SystemParams,
    modulation: Modulation,
    mode: Mode,
    sweep: &Option<String>,
    seed: Option<u64>,
) -> std::result::Result<Produced, Failure> {
    let seed = match (mode, seed) {
        (Mode::Simulate, None) => return Err(Failure::Usage("--mode simulate requires --seed".into())),
        (_, s) => s.unwrap_or(0),
    };
    let (name, values) = match sweep {
        Some(s) => parse_named_sweep(s)?,
        None => ("gamma".to_string(), vec![base.gamma()]),
    };
    let mut p = base.clone();
    apply(&mut p, &name, values[0])?;
    let mut table = Table::new(&["sweep_param", "value", "sep", "std_error"]);
    for &x in &values {
        apply(&mut p, &name, x)?;
        let row = p.campaign(modulation, seed, false).and_then(|c| match mode {
            Mode::Analytical => analytical_campaign_sep(&c).map(|s| (s, 0.0)),
            Mode::Simulate => {
                let r = run_campaign(&c)?;
                log::info!("{} {name}={x}: sep {} in {:.1?}", modulation.name(), r.sep, r.elapsed);
                Ok((r.sep, r.std_error))
            }
        });
        match row {
            Ok((sep, se)) => table.push(vec![name.clone(), num(sweep_value(&p, &name)), num(sep), num(se)]),
            Err(e) => return Ok((table, Some(e.into()))),
        }
    }
    Ok((table, None))
}

fn cmd_isi(
    base: &SystemParams,
    choice: ModChoice,
    ts: &Option<String>,
    seed: Option<u64>,
) -> std::result::Result<Produced, Failure> {
    let seed = seed.ok_or_else(|| Failure::Usage("isi requires --seed".into()))?;
    let values = match ts {
        Some(s) => parse_sweep(s)?,
        None => vec![10.0, 20.0, 40.0, 60.0, 80.0],
    };
    let mods: &[Modulation] = match choice {
        ModChoice::Rsk => &[Modulation::Rsk],
        ModChoice::Csk => &[Modulation::Csk],
        ModChoice::Both => &[Modulation::Rsk, Modulation::Csk],
    };
    let mut p = base.clone();
    let mut table = Table::new(&["ts", "modulation", "isi", "sep", "std_error"]);
    for &t in &values {
        p.t_s = t;
        for &m in mods {
            for isi in [false, true] {
                let report =
                    p.campaign(m, seed, isi)
                        .and_then(|c| if isi { run_campaign_isi(&c) } else { run_campaign(&c) });
                match report {
                    Ok(r) => table.push(vec![
                        num(t),
                        m.name().into(),
                        u8::from(isi).to_string(),
                        num(r.sep),
                        num(r.std_error),
                    ]),
                    Err(e) => return Ok((table, Some(e.into()))),
                }
            }
        }
    }
    Ok((table, None))
}

#[derive(Debug, Serialize)]
struct Options<'a> {
    subcommand: &'a str,
    flags: &'a ParamArgs,
    extra: serde_json::Value,
}

fn execute(cli: &Cli) -> std::result::Result<(), Failure> {
    let args = cli.command.params();
    let sweepable: &[&str] = match &cli.command {
        Command::Capacity { .. } => &["gamma", "nr"],
        Command::Isi { .. } => &["ts"],
        _ => &[],
    };
    let params = resolve(cli, args, sweepable)?;
    let extra = match &cli.command {
        Command::Capacity { model, cmax, grid, .. } => {
            serde_json::json!({ "model": model, "cmax": cmax, "grid": grid })
        }
        Command::Oid { model, cmax, grid, .. } => {
            serde_json::json!({ "model": model, "cmax": cmax, "grid": grid })
        }
        Command::Constellation { modulation, .. } => serde_json::json!({ "mod": modulation }),
        Command::Sep {
            modulation,
            mode,
            sweep,
            ..
        } => {
            serde_json::json!({ "mod": modulation, "mode": mode, "sweep": sweep })
        }
        Command::Isi { modulation, .. } => serde_json::json!({ "mod": modulation }),
    };
    let options = Options {
        subcommand: cli.command.name(),
        flags: args,
        extra,
    };
    let produced: Produced = match &cli.command {
        Command::Capacity { model, cmax, grid, .. } => cmd_capacity(&params, *model, args, cmax, *grid)?,
        Command::Oid { model, cmax, grid, .. } => {
            let mut p = params.clone();
            if let Some(c) = cmax {
                p.max_power_kd1 = *c;
            }
            (cmd_oid(&p, *model, *grid)?, None)
        }
        Command::Constellation { modulation, .. } => (cmd_constellation(&params, *modulation)?, None),
        Command::Sep {
            modulation,
            mode,
            sweep,
            ..
        } => cmd_sep(&params, *modulation, *mode, sweep, cli.seed)?,
        Command::Isi { modulation, .. } => cmd_isi(&params, *modulation, &args.ts, cli.seed)?,
    };
    let (table, failure) = produced;
    let target = output::Target::resolve(cli.out.clone(), cli.command.name());
    output::emit(&table, &params, &options, cli.seed, &target, cli.quiet)
        .map_err(|e| Failure::Run(Error::Config(e.to_string())))?;
    match failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

/// Parses the process arguments, runs the subcommand and returns the exit code.
pub fn run() -> i32 {
    run_with(std::env::args_os())
}

pub fn run_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = if cli.quiet { "error" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}
