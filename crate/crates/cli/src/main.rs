#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use capl::geom::Vec2;
use capl::meltpool::{read_metrics_csv, write_metrics_csv, OutlierConfig};
use capl::toolpath::write_toolpath;
use capl_cli::config::{threads_from_env, RunConfig};
use capl_cli::simulate::{write_csv, FrameVector};
use capl_cli::{compare, frames, gen_path, scaling, simulate, GenPathOptions};
use clap::{Parser, Subcommand};

/// Path-level thermal simulation of laser powder bed fusion scans.
#[derive(Parser)]
#[command(name = "capl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a toolpath and write melt pool metrics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--set solver.dense_mode=true`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract melt pool metrics from monitoring frames.
    AnalyzeFrames {
        /// Directory of `case<CC>_frame<NNNN>.pgm` files.
        dir: PathBuf,
        #[arg(long)]
        case: Option<String>,
        #[arg(long, default_value_t = capl::meltpool::DEFAULT_FRAME_THRESHOLD)]
        threshold: u8,
        /// m per pixel.
        #[arg(long, default_value_t = capl::meltpool::DEFAULT_FRAME_PIXEL_SIZE)]
        pixel_size: f64,
        #[arg(long, default_value_t = 2.5)]
        outlier_factor: f64,
        #[arg(long, default_value_t = 15)]
        outlier_window: usize,
        #[arg(long, default_value = "frames_metrics.csv")]
        out: PathBuf,
    },
    /// Relative error of simulated against measured metrics.
    Compare {
        #[arg(long)]
        sim: PathBuf,
        #[arg(long)]
        exp: PathBuf,
        /// `frame_vectors.csv` from `simulate`, for per-vector means.
        #[arg(long)]
        vectors: Option<PathBuf>,
        /// Summary table; per-frame rows go next to it as `<stem>_frames.csv`.
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
    },
    /// Generate a contour plus raster layer in the toolpath format.
    GenPath {
        #[arg(long, default_value_t = 2e-3)]
        side: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        origin_x: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        origin_y: f64,
        #[arg(long, default_value_t = 100e-6)]
        hatch: f64,
        #[arg(long, default_value_t = 45.0, allow_hyphen_values = true)]
        angle: f64,
        #[arg(long, default_value_t = 4)]
        contours: usize,
        #[arg(long, default_value_t = 0.8)]
        speed: f64,
        #[arg(long, default_value_t = 195.0)]
        power: f64,
        /// Fictitious domain margin, m.
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time one scan over growing fictitious domains.
    Scaling {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Target element counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000,8000")]
        sizes: Vec<usize>,
        /// All-pairs baseline instead of the active body.
        #[arg(long)]
        dense: bool,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value = "scaling.csv")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, overrides, out } => {
            let mut cfg = RunConfig::load(&config, &overrides)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let dir = simulate::execute(&cfg)?;
            println!("outputs in {}", dir.display());
        }
        Command::AnalyzeFrames {
            dir,
            case,
            threshold,
            pixel_size,
            outlier_factor,
            outlier_window,
            out,
        } => {
            if !(pixel_size > 0.0) {
                bail!("pixel size must be positive");
            }
            let opts = frames::FrameOptions {
                case,
                threshold,
                pixel_size,
                outliers: OutlierConfig {
                    factor: outlier_factor,
                    window: outlier_window,
                },
            };
            let analysis = frames::analyze(&dir, &opts)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_metrics_csv(BufWriter::new(file), &analysis.rows)?;
            let flagged = analysis.rows.iter().filter(|r| r.outlier_flag != 0).count();
            println!(
                "{} frames, {} flagged, {} warnings -> {}",
                analysis.rows.len(),
                flagged,
                analysis.warnings,
                out.display()
            );
        }
        Command::Compare { sim, exp, vectors, out } => {
            let read = |p: &PathBuf| -> Result<_> {
                let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
                read_metrics_csv(f).with_context(|| format!("reading {}", p.display()))
            };
            let (sim_rows, exp_rows) = (read(&sim)?, read(&exp)?);
            let vector_rows = match &vectors {
                Some(p) => {
                    let mut rdr = csv::Reader::from_path(p).with_context(|| format!("opening {}", p.display()))?;
                    Some(rdr.deserialize().collect::<Result<Vec<FrameVector>, _>>()?)
                }
                None => None,
            };
            let c = compare::compare(&sim_rows, &exp_rows, vector_rows.as_deref())?;
            write_csv(&out, &c.report)?;
            let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
            let frames_path = out.with_file_name(format!("{stem}_frames.csv"));
            write_csv(&frames_path, &c.frames)?;
            let case = &c.report[0];
            println!(
                "{} frames compared ({} excluded): mean length error {:.2}%, mean width error {:.2}%",
                case.frames,
                c.frames.len() - case.frames,
                100.0 * case.mean_rel_err_length,
                100.0 * case.mean_rel_err_width
            );
        }
        Command::GenPath {
            side,
            origin_x,
            origin_y,
            hatch,
            angle,
            contours,
            speed,
            power,
            margin,
            out,
        } => {
            let tp = gen_path(&GenPathOptions {
                origin: Vec2::new(origin_x, origin_y),
                side,
                hatch,
                angle_deg: angle,
                contours,
                speed,
                power,
                margin,
            })?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_toolpath(&tp, BufWriter::new(file)).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "{} vectors ({} fictitious) -> {}",
                tp.vectors.len(),
                tp.vectors.iter().filter(|v| v.fictitious).count(),
                out.display()
            );
        }
        Command::Scaling {
            config,
            overrides,
            sizes,
            dense,
            repeats,
            out,
        } => {
            let cfg = RunConfig::load(&config, &overrides)?;
            let toolpath = cfg.read_toolpath()?;
            let material = cfg.read_material()?;
            let points = scaling::sweep(&toolpath, &material, &cfg.mesh, &cfg.solver, &sizes, dense, repeats)?;
            write_csv(&out, &points)?;
            for p in &points {
                println!(
                    "{:>8} elements  build {:>8.3} s  run {:>8.3} s  total {:>8.3} s",
                    p.elements, p.build_s, p.run_s, p.total_s
                );
            }
            match scaling::total_slope(&points) {
                Some(s) => println!("log-log slope: {s:.3}"),
                None => println!("log-log slope: n/a"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = threads_from_env().and_then(|threads| capl::par::with_threads(threads, || run(cli)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
