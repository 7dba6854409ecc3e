use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use safegate::config::{load_config, Config};
use safegate::field::{build_field, inflate_field, load_field, save_field};
use safegate::filter::{safest_action_field, Plane, PlaneAxis};
use safegate::output::{write_action_map, write_run};
use safegate::report::report;
use safegate::sim::{run_experiment, ExperimentSpec, Mode};
use safegate::{Error, Result, Vec3};

#[derive(Parser)]
#[command(
    name = "safegate",
    version,
    about = "Barrier-certificate safety filter for drone-racing gates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Precompute the gate distance map and write it in binary form.
    BuildMap {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worst-case inflation half-widths, whole multiples of the resolution.
        #[arg(long, value_delimiter = ',', value_name = "EX,EY,EZ")]
        inflate: Option<Vec<f64>>,
    },
    /// Export the safest fixed-speed action on a plane slice of a map as CSV.
    Field {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        plane: PlaneAxis,
        #[arg(long, allow_negative_numbers = true)]
        offset: f64,
        #[arg(long)]
        speed: f64,
        #[arg(long, default_value_t = 72)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
        /// Safety and noise parameters; defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the track experiment grid and write metrics, distances and trajectories.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        #[arg(long)]
        tracks: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<Mode>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a run directory with boxplot statistics.
    Report { run_dir: PathBuf },
}

fn config_or_default(path: Option<&Path>) -> Result<Config> {
    path.map_or_else(|| Ok(Config::default()), load_config)
}

fn build_map(config: Option<&Path>, out: &Path, inflate: Option<&[f64]>) -> Result<()> {
    let cfg = config_or_default(config)?;
    let spec = cfg.grid_spec()?;
    let eps = match inflate {
        None => None,
        Some(&[x, y, z]) => Some(Vec3::new(x, y, z)),
        Some(other) => {
            return Err(Error::InvalidArgument(format!(
                "--inflate needs three values, got {}",
                other.len()
            )))
        }
    };
    let margin = cfg.safety.radius + eps.map_or(0.0, |e| e.max());
    let mut field = build_field(&cfg.geometry, &spec, margin)?;
    if let Some(eps) = eps {
        field = inflate_field(&field, &eps)?;
    }
    save_field(&field, out)?;
    let d = spec.dims();
    eprintln!(
        "wrote {} ({}x{}x{} nodes, inflated by {:?})",
        out.display(),
        d[0],
        d[1],
        d[2],
        field.inflated_by().as_slice()
    );
    Ok(())
}

fn export_field(
    map: &Path,
    plane: Plane,
    speed: f64,
    samples: usize,
    out: &Path,
    config: Option<&Path>,
) -> Result<()> {
    let cfg = config_or_default(config)?;
    let field = load_field(map)?;
    let actions = safest_action_field(&field, &cfg.safety, speed, plane, samples)?;
    write_action_map(out, &actions)?;
    eprintln!(
        "wrote {} ({} cells, {} unsafe)",
        out.display(),
        actions.cells.len(),
        actions.unsafe_count()
    );
    Ok(())
}

fn run(
    config: Option<&Path>,
    levels: Option<Vec<f64>>,
    tracks: Option<usize>,
    modes: Option<Vec<Mode>>,
    out: &Path,
) -> Result<()> {
    let mut cfg = config_or_default(config)?;
    if let Some(levels) = levels {
        cfg.experiment.levels = levels;
    }
    if let Some(tracks) = tracks {
        cfg.experiment.tracks = tracks;
    }
    if let Some(modes) = modes {
        cfg.experiment.modes = modes;
    }
    cfg.validate()?;

    let maps = cfg.build_maps()?;
    let spec = ExperimentSpec {
        levels: &cfg.experiment.levels,
        tracks_per_level: cfg.experiment.tracks,
        modes: &cfg.experiment.modes,
        num_gates: cfg.track.num_gates,
        spacing: cfg.track.spacing,
        laps: cfg.sim.laps,
        base_seed: cfg.sim.seed,
    };
    let result = run_experiment(&spec, &cfg.trial_params(), &maps)?;
    write_run(out, &cfg, &result)?;
    print!("{}", report(out)?);
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_)
        | Error::Config(_)
        | Error::Parse { .. }
        | Error::Validation { .. }
        | Error::UnknownKey(_)
        | Error::Setup(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::BuildMap {
            config,
            out,
            inflate,
        } => build_map(config.as_deref(), &out, inflate.as_deref()),
        Command::Field {
            map,
            plane,
            offset,
            speed,
            samples,
            out,
            config,
        } => export_field(
            &map,
            Plane {
                axis: plane,
                offset,
            },
            speed,
            samples,
            &out,
            config.as_deref(),
        ),
        Command::Run {
            config,
            levels,
            tracks,
            modes,
            out,
        } => run(config.as_deref(), levels, tracks, modes, &out),
        Command::Report { run_dir } => report(&run_dir).map(|text| print!("{text}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
