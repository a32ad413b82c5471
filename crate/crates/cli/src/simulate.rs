//! `simulate`: toolpath in, melt pool metrics and step diagnostics out.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use capl::meltpool::{idw_raster, idw_sites, write_metrics_csv, write_raster_pgm16, MetricsRow};
use capl::model::Model;
use capl::solver::{write_steps_csv, Simulation, SnapshotView, ThermalHistory};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Which vector the laser was on at each frame, for per-vector statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameVector {
    pub frame: usize,
    pub vector_id: usize,
    pub distance_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VectorSummary {
    pub vector_id: usize,
    pub frames: usize,
    pub mean_length_m: f64,
    pub mean_width_m: f64,
}

#[derive(Debug)]
pub struct SimulationReport {
    pub rows: Vec<MetricsRow>,
    pub frame_vectors: Vec<FrameVector>,
    pub vectors: Vec<VectorSummary>,
    pub history: ThermalHistory,
    pub element_count: usize,
    pub build_seconds: f64,
}

pub fn per_vector_means(rows: &[MetricsRow], frame_vectors: &[FrameVector]) -> Vec<VectorSummary> {
    let mut acc: BTreeMap<usize, (usize, f64, f64)> = BTreeMap::new();
    for (row, fv) in rows.iter().zip(frame_vectors) {
        let e = acc.entry(fv.vector_id).or_default();
        e.0 += 1;
        e.1 += row.length_m;
        e.2 += row.width_m;
    }
    acc.into_iter()
        .map(|(vector_id, (n, l, w))| VectorSummary {
            vector_id,
            frames: n,
            mean_length_m: l / n as f64,
            mean_width_m: w / n as f64,
        })
        .collect()
}

/// Builds the model and runs it. Dumps the mesh into `mesh_dir` and writes
/// rasters into `raster_dir` as snapshots arrive, when given; everything
/// else is left to [`write_outputs`].
pub fn run(cfg: &RunConfig, mesh_dir: Option<&Path>, raster_dir: Option<&Path>) -> Result<SimulationReport> {
    let toolpath = cfg.read_toolpath()?;
    let material = cfg.read_material()?;
    let started = std::time::Instant::now();
    let model = Model::build(&toolpath, &cfg.mesh)?;
    let build_seconds = started.elapsed().as_secs_f64();
    info!("built {} elements in {build_seconds:.2} s", model.mesh.len());
    if let Some(dir) = mesh_dir {
        model.mesh.dump(&model.graph, dir)?;
    }

    let mut sim = Simulation::new(&model.mesh, &model.graph, &material, &cfg.solver)?;
    let mut rows = Vec::new();
    let mut frame_vectors = Vec::new();
    let pool = &cfg.solver.pool;
    let history = sim.run_with(&model.toolpath, &model.sub_paths, |view: SnapshotView<'_>| {
        let s = view.snapshot;
        if let Some(m) = &s.metrics {
            rows.push(m.to_row(s.index, false));
        } else {
            rows.push(MetricsRow {
                frame: s.index,
                time_s: s.time,
                laser_x_m: s.laser_position.x,
                laser_y_m: s.laser_position.y,
                length_m: 0.0,
                width_m: 0.0,
                orientation_rad: 0.0,
                outlier_flag: 0,
            });
        }
        frame_vectors.push(FrameVector {
            frame: s.index,
            vector_id: s.vector_id,
            distance_m: s.distance,
        });
        if let Some(dir) = raster_dir {
            let reach = pool.raster_side + 2.0 * pool.idw_radius.unwrap_or(f64::INFINITY);
            let sites = idw_sites(view.mesh, &view.state.temperatures, view.active, s.laser_position, reach);
            if !sites.is_empty() {
                let raster = idw_raster(
                    &sites,
                    s.laser_position,
                    pool.raster_side,
                    pool.raster_pixels,
                    pool.idw_power,
                    pool.idw_radius,
                )?;
                write_raster_pgm16(&dir.join(format!("raster_{:04}.pgm", s.index)), &raster)?;
            }
        }
        Ok(())
    })?;
    let vectors = per_vector_means(&rows, &frame_vectors);
    Ok(SimulationReport {
        rows,
        frame_vectors,
        vectors,
        element_count: model.mesh.len(),
        build_seconds,
        history,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `metrics.csv`, `frame_vectors.csv`, `vectors.csv` and `steps.csv`.
pub fn write_outputs(dir: &Path, report: &SimulationReport) -> Result<()> {
    write_metrics_csv(create(&dir.join("metrics.csv"))?, &report.rows)?;
    write_csv(&dir.join("frame_vectors.csv"), &report.frame_vectors)?;
    write_csv(&dir.join("vectors.csv"), &report.vectors)?;
    let steps = dir.join("steps.csv");
    let mut w = create(&steps)?;
    write_steps_csv(&mut w, &report.history.steps).with_context(|| format!("writing {}", steps.display()))?;
    w.flush()?;
    Ok(())
}

/// The whole `simulate` command. Returns the output directory.
pub fn execute(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let raster_dir = dir.join("rasters");
    if cfg.output.rasters {
        std::fs::create_dir_all(&raster_dir)?;
    }
    let report = run(
        cfg,
        cfg.output.mesh.then_some(dir.as_path()),
        cfg.output.rasters.then_some(raster_dir.as_path()),
    )?;
    write_outputs(&dir, &report)?;

    println!(
        "{} elements, {} steps, {} snapshots, build {:.2} s, solve {:.2} s (seed {})",
        report.element_count,
        report.history.steps.len(),
        report.rows.len(),
        report.build_seconds,
        report.history.wall_time,
        cfg.seed
    );
    println!("{:>6} {:>7} {:>12} {:>12}", "vector", "frames", "length_um", "width_um");
    for v in &report.vectors {
        println!(
            "{:>6} {:>7} {:>12.1} {:>12.1}",
            v.vector_id,
            v.frames,
            v.mean_length_m * 1e6,
            v.mean_width_m * 1e6
        );
    }
    Ok(dir)
}
