use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fractalcell::config::ExperimentConfig;
use fractalcell::experiment::{
    exit_code_for, parse_counting, parse_movement, run, Engine, ExperimentPlan, Format, Quantity, Sweep, Variable,
};
use fractalcell::scalar::db_to_linear;
use fractalcell::{Error, Result};

/// Coverage, association and handoff analysis for anisotropic small-cell networks.
#[derive(Debug, Parser)]
#[command(name = "fractalcell", version)]
struct Cli {
    /// coverage | rate-coverage | association | handoff-prob | handoff-rate | tessellate | validate
    quantity: String,

    /// JSON parameter file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Monte-Carlo drops per point (runs per point for handoff-rate).
    #[arg(long, default_value_t = 10_000)]
    drops: usize,
    /// analytic | mc | both
    #[arg(long, default_value = "both")]
    engine: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// csv | json
    #[arg(long, default_value = "csv")]
    format: String,

    /// x-axis as `variable=grid`, grid `lo:hi:step` or `a,b,c`.
    #[arg(long)]
    sweep: Option<String>,
    /// One curve per value, same syntax as --sweep.
    #[arg(long)]
    series: Option<String>,

    #[arg(long)]
    tau_db: Option<f64>,
    /// Rate threshold, bit/s.
    #[arg(long)]
    gamma: Option<f64>,
    /// Serving distance for association, m.
    #[arg(long)]
    r: Option<f64>,
    /// Displacement for handoff probability, m.
    #[arg(long)]
    vt: Option<f64>,
    /// away | perpendicular
    #[arg(long)]
    movement: Option<String>,
    /// every-trigger | changed-server
    #[arg(long)]
    counting: Option<String>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,

    #[arg(long)]
    ptx_dbm: Option<f64>,
    #[arg(long)]
    noise_dbm: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    sections: Option<usize>,
    #[arg(long)]
    main_tx_db: Option<f64>,
    #[arg(long)]
    main_rx_db: Option<f64>,
    #[arg(long)]
    side_tx_db: Option<f64>,
    #[arg(long)]
    side_rx_db: Option<f64>,
    #[arg(long)]
    beam_tx_deg: Option<f64>,
    #[arg(long)]
    beam_rx_deg: Option<f64>,
    /// Hz
    #[arg(long)]
    bandwidth: Option<f64>,
    /// m/s
    #[arg(long)]
    speed: Option<f64>,
    /// s
    #[arg(long)]
    detect_interval: Option<f64>,
    #[arg(long)]
    handoff_threshold_db: Option<f64>,
    /// s
    #[arg(long)]
    duration: Option<f64>,
    /// m
    #[arg(long)]
    arena_radius: Option<f64>,
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad number `{s}` in grid `{text}`")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if !(step > 0.0) || hi < lo {
                return Err(Error::Parse(format!("range `{text}` needs lo ≤ hi and step > 0")));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| lo + step * i as f64).collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(Error::Parse(format!("grid `{text}` must be lo:hi:step or a comma list"))),
    }
}

fn parse_sweep(text: &str) -> Result<Sweep> {
    let (var, grid) = text
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("sweep `{text}` must look like variable=grid")))?;
    Ok(Sweep::new(var.trim().parse::<Variable>()?, parse_grid(grid)?))
}

fn build_plan(cli: &Cli) -> Result<ExperimentPlan> {
    let quantity: Quantity = cli.quantity.parse()?;
    let mut plan = ExperimentPlan::new(quantity, &cli.out);
    plan.config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::standard(),
    };
    plan.seed = cli.seed;
    plan.drops = cli.drops;
    plan.engine = cli.engine.parse::<Engine>()?;
    plan.format = cli.format.parse::<Format>()?;
    plan.sweep = cli.sweep.as_deref().map(parse_sweep).transpose()?;
    plan.series = cli.series.as_deref().map(parse_sweep).transpose()?;
    if let Some(v) = cli.tau_db {
        plan.tau_db = v;
    }
    if let Some(v) = cli.gamma {
        plan.gamma = v;
    }
    if let Some(v) = cli.r {
        plan.r = v;
    }
    if let Some(v) = cli.vt {
        plan.vt = v;
    }
    if let Some(m) = &cli.movement {
        plan.movement = parse_movement(m)?;
    }
    if let Some(c) = &cli.counting {
        plan.counting = parse_counting(c)?;
    }
    if let Some(v) = cli.resolution {
        plan.resolution = v;
    }
    plan.workers = cli.workers;

    let c = &mut plan.config;
    let set = |slot: &mut f64, v: Option<f64>, f: fn(f64) -> f64| {
        if let Some(v) = v {
            *slot = f(v);
        }
    };
    let id = |v: f64| v;
    set(&mut c.model.tx_power, cli.ptx_dbm, db_to_linear);
    set(&mut c.model.noise_power, cli.noise_dbm, db_to_linear);
    set(&mut c.model.lambda, cli.lambda, id);
    set(&mut c.model.mu, cli.mu, id);
    set(&mut c.model.sigma, cli.sigma, id);
    if let Some(m) = cli.sections {
        c.model.sections = m;
    }
    set(&mut c.antenna.main_tx, cli.main_tx_db, db_to_linear);
    set(&mut c.antenna.main_rx, cli.main_rx_db, db_to_linear);
    set(&mut c.antenna.side_tx, cli.side_tx_db, db_to_linear);
    set(&mut c.antenna.side_rx, cli.side_rx_db, db_to_linear);
    set(&mut c.antenna.beam_tx, cli.beam_tx_deg, f64::to_radians);
    set(&mut c.antenna.beam_rx, cli.beam_rx_deg, f64::to_radians);
    set(&mut c.bandwidth, cli.bandwidth, id);
    set(&mut c.mobility.speed, cli.speed, id);
    set(&mut c.mobility.detect_interval, cli.detect_interval, id);
    set(&mut c.mobility.handoff_threshold, cli.handoff_threshold_db, db_to_linear);
    set(&mut c.mobility.sim_duration, cli.duration, id);
    set(&mut c.mobility.arena_radius, cli.arena_radius, id);
    Ok(plan)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = build_plan(&cli).and_then(|plan| run(&plan));
    match outcome {
        Ok(report) => {
            for c in &report.checks {
                println!("{}", c.line());
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            for m in &report.numeric_failures {
                eprintln!("numeric failure: {m}");
            }
            for m in &report.invariant_violations {
                eprintln!("invariant violated: {m}");
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
