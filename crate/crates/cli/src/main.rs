//! `ncma`: design, simulate and plan constellation-domain multiple access.
//!
//! Exit codes: 0 success, 1 domain refusal (collisions, non-injective
//! designs, I/O failures), 2 usage error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ncma::config::{ModelName, SimConfig};
use ncma::constellation::{read_catalog, write_catalog, Criterion, DesignReport, JointConstellation};
use ncma::hybrid::{make_plan, threshold_search, write_search_csv, Resource, SearchSettings};
use ncma::receiver::write_cloud_csv;
use ncma::satplan::{beam_capacity, build_plan, scenario_preset, write_plan_csv, RepeatPattern, Scenario};
use ncma::simkit::{cloud, run_point, sweep, write_results_csv, SweepAxis, SweepRow};
use ncma::Error;

/// Overrides the default seed when `--seed` is not given.
const SEED_ENV: &str = "NCMA_SEED";

#[derive(Parser, Debug)]
#[command(name = "ncma", version, about = "Constellation-domain multiple access toolkit")]
struct Cli {
    /// RNG seed; defaults to $NCMA_SEED, then the config file, then 1.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a multi-user design and report its figures of merit.
    Design(DesignArgs),
    /// Check a catalog or config document.
    Validate(ValidateArgs),
    /// Monte-Carlo SER/BER at one operating point.
    Simulate(SimulateArgs),
    /// Monte-Carlo SER/BER along one axis.
    Sweep(SweepArgs),
    /// Group users over an orthogonal resource, optionally searching the group size.
    Hybrid(HybridArgs),
    /// Multibeam color plan with constellation sets.
    Plan(PlanArgs),
    /// Print a scenario preset as a config document.
    Preset(PresetArgs),
    /// Dump detection-statistic samples for scatter plots.
    DumpCloud(CloudArgs),
}

#[derive(Args, Debug)]
struct DesignArgs {
    #[arg(long, default_value = "eep")]
    criterion: Criterion,
    #[arg(long, default_value_t = 2)]
    users: usize,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Per-user phase offsets in degrees.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    offsets: Option<Vec<f64>>,
    /// Superposition gains for the joint constellation.
    #[arg(long, value_delimiter = ',')]
    gains: Option<Vec<f64>>,
    /// Write the per-user catalog (TOML) here.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Write the joint constellation (CSV) here.
    #[arg(long)]
    joint: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    catalog: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct SimFlags {
    /// Flat TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    criterion: Option<Criterion>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Degrees.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    offsets: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    gains: Option<Vec<f64>>,
    #[arg(long)]
    model: Option<ModelName>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    antennas: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    snr: Option<f64>,
    #[arg(long)]
    frame_len: Option<usize>,
    #[arg(long)]
    frames_per_trial: Option<usize>,
    #[arg(long)]
    max_trials: Option<usize>,
    #[arg(long)]
    min_errors: Option<u64>,
    #[arg(long)]
    batch_trials: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    sim: SimFlags,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    sim: SimFlags,
    /// snr, antennas, rho, kappa or users.
    #[arg(long)]
    axis: SweepAxis,
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    values: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HybridArgs {
    #[arg(long, default_value_t = 4)]
    users: usize,
    /// Group size of the plan; ignored with --candidates.
    #[arg(long, default_value_t = 2)]
    group: usize,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value = "time")]
    resource: Resource,
    /// Group sizes to simulate; selects the best one under --target-ser.
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1e-2)]
    target_ser: f64,
    #[arg(long, default_value = "rayleigh")]
    model: ModelName,
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 128)]
    antennas: usize,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    snr: f64,
    #[arg(long, default_value_t = 100)]
    frame_len: usize,
    #[arg(long, default_value_t = 200)]
    max_trials: usize,
    #[arg(long, default_value_t = 100)]
    min_errors: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[arg(long, default_value_t = 2)]
    freq: usize,
    #[arg(long, default_value_t = 2)]
    pol: usize,
    /// Constellation sets per color.
    #[arg(long, default_value_t = 1)]
    constellations: usize,
    #[arg(long, default_value_t = 7)]
    beams: u32,
    #[arg(long, default_value = "frequency")]
    pattern: RepeatPattern,
    #[arg(long, default_value_t = 250e6)]
    bandwidth_hz: f64,
    /// Capacity of a beam with one constellation set.
    #[arg(long, default_value_t = 500e6)]
    base_capacity_bps: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PresetArgs {
    /// Scenario name; omit with --list.
    #[arg(required_unless_present = "list")]
    name: Option<String>,
    #[arg(long)]
    list: bool,
    /// Also print the preset's frequency plan CSV.
    #[arg(long)]
    plan: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CloudArgs {
    #[command(flatten)]
    sim: SimFlags,
    #[arg(long, default_value_t = 1)]
    frames: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Refusal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Format(_) | Error::UnknownPreset(_) | Error::DimensionMismatch(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Refusal(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Refusal(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match cli.threads {
        Some(0) => return usage("--threads must be >= 1"),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => return refusal(&e.to_string()),
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => usage(&msg),
        Err(Failure::Refusal(msg)) => refusal(&msg),
    }
}

fn usage(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn refusal(msg: &str) -> ExitCode {
    eprintln!("refused: {msg}");
    ExitCode::from(1)
}

fn dispatch(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Design(a) => cmd_design(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
        Command::Hybrid(a) => cmd_hybrid(cli, a),
        Command::Plan(a) => cmd_plan(cli, a),
        Command::Preset(a) => cmd_preset(a),
        Command::DumpCloud(a) => cmd_dump_cloud(cli, a),
    }
}

/// Flag, then env var, then config file, then the built-in default.
fn resolve_seed(cli: &Cli) -> Result<Option<u64>, Failure> {
    if cli.seed.is_some() {
        return Ok(cli.seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn resolve_config(cli: &Cli, f: &SimFlags) -> Result<SimConfig, Failure> {
    let mut c = match &f.config {
        Some(path) => SimConfig::from_toml(&read_text(path)?)?,
        None => SimConfig::default(),
    };
    if let Some(v) = f.criterion {
        c.criterion = v;
    }
    if let Some(v) = f.users {
        c.users = v;
    }
    if let Some(v) = f.order {
        c.order = v;
    }
    if let Some(v) = &f.gammas {
        c.gammas = Some(v.clone());
    }
    if let Some(v) = &f.offsets {
        c.offsets_deg = Some(v.clone());
    }
    if let Some(v) = &f.gains {
        c.gains = Some(v.clone());
    }
    if let Some(v) = f.model {
        c.model = v;
    }
    if let Some(v) = f.kappa {
        c.kappa = v;
    }
    if let Some(v) = f.rho {
        c.rho = v;
    }
    if let Some(v) = f.antennas {
        c.antennas = v;
    }
    if let Some(v) = f.snr {
        c.snr_db = v;
    }
    if let Some(v) = f.frame_len {
        c.frame_len = v;
    }
    if let Some(v) = f.frames_per_trial {
        c.frames_per_trial = v;
    }
    if let Some(v) = f.max_trials {
        c.max_trials = v;
    }
    if let Some(v) = f.min_errors {
        c.min_errors = v;
    }
    if let Some(v) = f.batch_trials {
        c.batch_trials = v;
    }
    if let Some(seed) = resolve_seed(cli)? {
        c.seed = seed;
    }
    Ok(c)
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| Failure::Refusal(format!("{}: {e}", path.display())))
}

fn cmd_design(a: &DesignArgs) -> CmdResult {
    let config = SimConfig {
        criterion: a.criterion,
        users: a.users,
        order: a.order,
        gammas: a.gammas.clone(),
        offsets_deg: a.offsets.clone(),
        gains: a.gains.clone(),
        ..SimConfig::default()
    };
    let gains = config.resolved_gains();
    if gains.len() != a.users {
        return Err(Failure::Usage(format!("{} gains for {} users", gains.len(), a.users)));
    }
    let base = config.design()?;
    let report = DesignReport::new(base.constellations, &gains, a.criterion)?;
    if !report.unique {
        let witness = report.joint.validate_unique(1e-9).err();
        println!("unique: false");
        return Err(match witness {
            Some(e) => e.into(),
            None => Failure::Refusal("joint constellation is not injective".into()),
        });
    }

    println!("criterion: {}", a.criterion);
    println!("users: {}  order: {}", a.users, a.order);
    let first = report.constellations[0].phase(0);
    for c in &report.constellations {
        let phases: Vec<String> = c.phases().iter().map(|p| format!("{:.6}", p.to_degrees())).collect();
        let rotation = (c.phase(0) - first).to_degrees().rem_euclid(360.0);
        println!(
            "user {}: rotation {:.6} deg  phases_deg [{}]",
            c.user_id(),
            rotation,
            phases.join(", ")
        );
    }
    println!("joint points: {}", report.joint.len());
    println!("min_distance: {:.12}", report.min_distance);
    println!("papr: {:.12} ({:.6} dB)", report.papr, report.papr_db());
    println!("unique: true");

    if let Some(path) = &a.catalog {
        write_file(path, &write_catalog(a.criterion, &report.constellations, Some(&gains)))?;
        println!("catalog: {}", path.display());
    }
    if let Some(path) = &a.joint {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "# {}", design_summary(a, &gains))?;
        report.joint.write_csv(&mut out)?;
        out.flush()?;
        println!("joint: {}", path.display());
    }
    Ok(())
}

fn design_summary(a: &DesignArgs, gains: &[f64]) -> String {
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let mut s = format!("criterion={} users={} order={}", a.criterion, a.users, a.order);
    if let Some(g) = &a.gammas {
        s += &format!(" gammas={}", join(g));
    }
    if let Some(o) = &a.offsets {
        s += &format!(" offsets_deg={}", join(o));
    }
    s + &format!(" gains={}", join(gains))
}

fn cmd_validate(a: &ValidateArgs) -> CmdResult {
    if let Some(path) = &a.catalog {
        let catalog = read_catalog(&read_text(path)?)?;
        let constellations = catalog.constellations::<f64>()?;
        let gains = catalog.gains.clone().unwrap_or_else(|| vec![1.0; constellations.len()]);
        let joint = JointConstellation::build(&constellations, &gains)?;
        let d = joint.checked_min_distance(1e-9)?;
        println!(
            "catalog ok: {} users, {} joint points, min_distance {:.12}",
            constellations.len(),
            joint.len(),
            d
        );
    }
    if let Some(path) = &a.config {
        let config = SimConfig::from_toml(&read_text(path)?)?;
        let point = config.sim_point()?;
        point.reference_joint()?;
        println!("config ok: {}", config.summary());
    }
    Ok(())
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> CmdResult {
    let config = resolve_config(cli, &a.sim)?;
    let point = config.sim_point()?;
    let result = run_point(&point)?;
    let rows = [SweepRow {
        value: config.snr_db,
        result,
    }];
    let mut out = open_out(&a.out)?;
    write_results_csv(&mut out, &format!("{} axis=snr_db", config.summary()), &rows)?;
    out.flush()?;
    Ok(())
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> CmdResult {
    let config = resolve_config(cli, &a.sim)?;
    let point = config.sim_point()?;
    let rows = sweep(&point, a.axis, &a.values)?;
    let values = a.values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
    let comment = format!("{} axis={} values={}", config.summary(), a.axis.name(), values);
    let mut out = open_out(&a.out)?;
    write_results_csv(&mut out, &comment, &rows)?;
    out.flush()?;
    Ok(())
}

fn cmd_hybrid(cli: &Cli, a: &HybridArgs) -> CmdResult {
    let seed = resolve_seed(cli)?.unwrap_or(SimConfig::default().seed);
    let config = SimConfig {
        users: a.users,
        order: a.order,
        model: a.model,
        kappa: a.kappa,
        rho: a.rho,
        antennas: a.antennas,
        snr_db: a.snr,
        frame_len: a.frame_len,
        max_trials: a.max_trials,
        min_errors: a.min_errors,
        seed,
        ..SimConfig::default()
    };
    let mut out = open_out(&a.out)?;
    match &a.candidates {
        Some(candidates) => {
            let settings = SearchSettings {
                frame_len: a.frame_len,
                max_trials: a.max_trials,
                min_errors: a.min_errors,
                ..SearchSettings::default()
            };
            let report = threshold_search(a.users, candidates, a.order, &config.channel(), a.target_ser, &settings)?;
            let list = candidates.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(",");
            let comment = format!(
                "{} resource={} candidates={} target_ser={} selected={} fallback={}",
                config.summary(),
                resource_name(a.resource),
                list,
                a.target_ser,
                report.selected,
                report.fallback
            );
            write_search_csv(&mut out, &comment, &report)?;
        }
        None => {
            let plan = make_plan(a.users, a.group, a.order, a.resource)?;
            writeln!(
                out,
                "# users={} group={} order={} resource={} sum_rate={} seed={}",
                a.users,
                a.group,
                a.order,
                resource_name(a.resource),
                plan.sum_rate(None),
                seed
            )?;
            writeln!(out, "group,members,fraction,design,min_distance")?;
            for (i, g) in plan.to_document().group.iter().enumerate() {
                let members = g.members.iter().map(|m| m.to_string()).collect::<Vec<_>>().join("-");
                writeln!(out, "{i},{members},{},{},{}", g.fraction, g.design, g.min_distance)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_plan(cli: &Cli, a: &PlanArgs) -> CmdResult {
    let seed = resolve_seed(cli)?.unwrap_or(SimConfig::default().seed);
    let ids: Vec<u32> = (0..a.beams).collect();
    let plan = build_plan(
        a.freq,
        a.pol,
        a.constellations,
        &ids,
        a.pattern,
        a.bandwidth_hz,
        a.base_capacity_bps,
    )?;
    let cap = beam_capacity(&plan);
    let comment = format!(
        "freq={} pol={} constellations={} beams={} pattern={} bandwidth_hz={} base_capacity_bps={} seed={}\n\
         colors={} capacity_multiplier={} total_capacity_bps={}",
        a.freq,
        a.pol,
        a.constellations,
        a.beams,
        a.pattern.as_str(),
        a.bandwidth_hz,
        a.base_capacity_bps,
        seed,
        plan.color_count(),
        plan.beam_capacity_bps() / a.base_capacity_bps,
        cap.total_bps
    );
    let mut out = open_out(&a.out)?;
    write_plan_csv(&mut out, &comment, &plan)?;
    out.flush()?;
    Ok(())
}

fn cmd_preset(a: &PresetArgs) -> CmdResult {
    let mut out = open_out(&a.out)?;
    if a.list {
        for s in Scenario::ALL {
            writeln!(out, "{}", s.name())?;
        }
        out.flush()?;
        return Ok(());
    }
    let name = a.name.as_deref().expect("clap requires a name without --list");
    let preset = scenario_preset(name)?;
    out.write_all(preset.to_document().as_bytes())?;
    if a.plan {
        let plan = preset.frequency_plan()?;
        writeln!(out)?;
        let comment = format!("scenario={} colors={}", preset.scenario.name(), plan.color_count());
        write_plan_csv(&mut out, &comment, &plan)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_dump_cloud(cli: &Cli, a: &CloudArgs) -> CmdResult {
    if a.frames == 0 {
        return Err(Failure::Usage("--frames must be >= 1".into()));
    }
    let config = resolve_config(cli, &a.sim)?;
    let point = config.sim_point()?;
    let stat = cloud(&point, a.frames)?;
    let mut out = open_out(&a.out)?;
    writeln!(out, "# {} frames={}", config.summary(), a.frames)?;
    write_cloud_csv(&stat, &mut out)?;
    out.flush()?;
    Ok(())
}

fn resource_name(r: Resource) -> &'static str {
    match r {
        Resource::Time => "time",
        Resource::Frequency => "frequency",
        Resource::Code => "code",
    }
}
