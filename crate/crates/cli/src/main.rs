use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use blindspot::config::ScenarioConfig;
use blindspot::io::{compare_reports, raster_to_ppm, read_raster_csv, CoverageReport};
use blindspot::pipeline::Scenario;
use blindspot::presets::{preset, PRESET_NAMES};
use blindspot::Error;
use clap::{Parser, Subcommand};

/// Estimate blind spots of vehicle sensor rigs against a randomly re-posed reference LiDAR.
#[derive(Parser)]
#[command(name = "blindspot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config file or a bundled preset.
    Run {
        /// Path to a JSON config, or one of: camera-trio, roof-vs-grille, lidar-resolution.
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        timesteps: Option<usize>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Detection threshold on the blind-spot radius, meters.
        #[arg(long)]
        r_thresh: Option<f64>,
    },
    /// Compare two report.json files region by region.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Print the comparison as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Re-render a raster CSV as a PPM image.
    Render {
        csv: PathBuf,
        /// Output path (default: the CSV path with a .ppm extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the config of a bundled preset.
    Preset { name: String },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Parse { .. } => 2,
        Error::Io { .. } => 3,
        _ => 1,
    }
}

fn load_scenario(arg: &str) -> Result<(ScenarioConfig, PathBuf), Error> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(cfg) = preset(arg) {
            return Ok((cfg, PathBuf::from(".")));
        }
        if !arg.ends_with(".json") {
            return Err(Error::config(
                "scenario",
                format!("'{arg}' is neither a file nor a preset ({})", PRESET_NAMES.join(", ")),
            ));
        }
    }
    ScenarioConfig::load(path)
}

fn run(
    scenario: &str,
    seed: Option<u64>,
    timesteps: Option<usize>,
    threads: Option<usize>,
    out_dir: &Path,
    r_thresh: Option<f64>,
) -> Result<(), Error> {
    let (mut cfg, base) = load_scenario(scenario)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = timesteps {
        cfg.timesteps = t;
        if let Some(p) = preset(&cfg.name).filter(|_| !Path::new(scenario).exists()) {
            // presets script traffic for exactly their run length
            cfg.scene = blindspot::presets::road_scene(t, p.dt);
        }
    }
    if let Some(r) = r_thresh {
        cfg.r_thresh = r;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::config("threads", e.to_string()))?;
    pool.install(|| {
        let scenario = Scenario::new(cfg, &base)?;
        let total = scenario.config().timesteps;
        let start = Instant::now();
        let result = scenario.run_with_progress(|done| {
            eprint!("\r{done}/{total} timesteps");
        })?;
        let secs = start.elapsed().as_secs_f64();
        eprintln!("\r{total} timesteps in {secs:.1} s ({:.2} timesteps/s)", total as f64 / secs);
        for (path, report) in scenario.emit(&result, out_dir)? {
            println!("{} ({})", report.rig, path.display());
            for s in &report.summaries {
                match (s.mean_detection_probability, s.mean_blind_spot_radius) {
                    (Some(p), Some(r)) => println!("  {:<32} p = {:6.2} %   r = {:6.2} m", s.roi, p * 100.0, r),
                    _ => println!("  {:<32} no data", s.roi),
                }
            }
        }
        Ok(())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, seed, timesteps, threads, out_dir, r_thresh } => {
            run(&scenario, seed, timesteps, threads, &out_dir, r_thresh)
        }
        Command::Compare { a, b, json } => (|| {
            let c = compare_reports(&CoverageReport::read(&a)?, &CoverageReport::read(&b)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&c).expect("comparison serializes"));
            } else {
                print!("{}", c.to_table());
            }
            Ok(())
        })(),
        Command::Render { csv, out } => (|| {
            let (raster, meta) = read_raster_csv(&csv)?;
            let out = out.unwrap_or_else(|| csv.with_extension("ppm"));
            std::fs::write(&out, raster_to_ppm(&raster, &meta)).map_err(|e| Error::io(&out, e))?;
            println!("{}", out.display());
            Ok(())
        })(),
        Command::Preset { name } => match preset(&name) {
            Some(cfg) => {
                println!("{}", cfg.to_json());
                Ok(())
            }
            None => Err(Error::config("preset", format!("unknown preset '{name}' ({})", PRESET_NAMES.join(", ")))),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
