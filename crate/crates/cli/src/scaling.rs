//! `scaling`: one scan over growing cold fictitious domains, timed.

use std::time::Instant;

use anyhow::{bail, Result};
use capl::materials::Material;
use capl::mesh::NeighborSearch;
use capl::model::{MeshConfig, Model};
use capl::solver::{Simulation, SolverConfig};
use capl::toolpath::Toolpath;
use log::info;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub target: usize,
    pub elements: usize,
    pub rings: usize,
    pub build_s: f64,
    pub run_s: f64,
    pub total_s: f64,
    pub steps: usize,
    pub max_active: usize,
}

/// Smallest ring count whose element count is closest to `target`.
pub fn rings_for(toolpath: &Toolpath, mesh: &MeshConfig, target: usize) -> Result<(usize, usize)> {
    let count = |rings: usize| {
        let cfg = MeshConfig {
            fictitious_margin: rings as f64 * mesh.hatch,
            ..mesh.clone()
        };
        Model::element_count(toolpath, &cfg)
    };
    let base = count(0)?;
    if base >= target {
        return Ok((0, base));
    }
    let mut hi = 1usize;
    while count(hi)? < target {
        hi *= 2;
        if hi > 1 << 16 {
            bail!("cannot reach {target} elements by adding fictitious rings");
        }
    }
    // count(lo) < target <= count(hi)
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if count(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (cl, ch) = (count(lo)?, count(hi)?);
    Ok(if target - cl <= ch - target { (lo, cl) } else { (hi, ch) })
}

/// Times model construction and the solve at one domain size; the fastest
/// of `repeats` runs is kept.
pub fn measure(
    toolpath: &Toolpath,
    material: &Material,
    mesh: &MeshConfig,
    solver: &SolverConfig,
    target: usize,
    repeats: usize,
) -> Result<ScalingPoint> {
    let (rings, _) = rings_for(toolpath, mesh, target)?;
    let mesh = MeshConfig {
        fictitious_margin: rings as f64 * mesh.hatch,
        ..mesh.clone()
    };
    let mut best: Option<ScalingPoint> = None;
    for _ in 0..repeats.max(1) {
        let t0 = Instant::now();
        let model = Model::build(toolpath, &mesh)?;
        let build_s = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let mut sim = Simulation::new(&model.mesh, &model.graph, material, solver)?;
        let history = sim.run(&model.toolpath, &model.sub_paths)?;
        let run_s = t1.elapsed().as_secs_f64();
        let point = ScalingPoint {
            target,
            elements: model.mesh.len(),
            rings,
            build_s,
            run_s,
            total_s: build_s + run_s,
            steps: history.steps.len(),
            max_active: history.steps.iter().map(|s| s.active_count).max().unwrap_or(0),
        };
        if best.as_ref().is_none_or(|b| point.total_s < b.total_s) {
            best = Some(point);
        }
    }
    let p = best.expect("at least one repeat");
    info!(
        "{} elements: build {:.3} s, run {:.3} s, {} steps, max active {}",
        p.elements, p.build_s, p.run_s, p.steps, p.max_active
    );
    Ok(p)
}

/// Runs every size. `dense` switches to the all-pairs baseline: quadratic
/// neighbour search and every element updated every step.
pub fn sweep(
    toolpath: &Toolpath,
    material: &Material,
    mesh: &MeshConfig,
    solver: &SolverConfig,
    sizes: &[usize],
    dense: bool,
    repeats: usize,
) -> Result<Vec<ScalingPoint>> {
    let (mesh, solver) = if dense {
        (
            MeshConfig {
                search: NeighborSearch::BruteForce,
                ..mesh.clone()
            },
            SolverConfig {
                dense_mode: true,
                ..solver.clone()
            },
        )
    } else {
        (mesh.clone(), solver.clone())
    };
    sizes
        .iter()
        .map(|&n| measure(toolpath, material, &mesh, &solver, n, repeats))
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// distinct sizes.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if pts.len() < 2 || sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

pub fn total_slope(points: &[ScalingPoint]) -> Option<f64> {
    loglog_slope(&points.iter().map(|p| (p.elements as f64, p.total_s)).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use capl::toolpath::parse_toolpath;

    #[test]
    fn slope_of_power_laws() {
        let lin: Vec<_> = [1e3, 2e3, 4e3].iter().map(|&x| (x, 3.0 * x)).collect();
        assert!((loglog_slope(&lin).unwrap() - 1.0).abs() < 1e-12);
        let quad: Vec<_> = [1e3, 2e3, 4e3].iter().map(|&x| (x, x * x)).collect();
        assert!((loglog_slope(&quad).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&[(1e3, 1.0)]), None);
        assert_eq!(loglog_slope(&[(1e3, 1.0), (1e3, 2.0)]), None);
    }

    #[test]
    fn ring_search_brackets_the_target() {
        let tp = parse_toolpath("P p (0,195)\nV 0 0 0.2e-3 0 0.8 p\n".as_bytes()).unwrap();
        let mesh = MeshConfig::default();
        let (rings, count) = rings_for(&tp, &mesh, 4000).unwrap();
        let at = |r: usize| {
            Model::element_count(
                &tp,
                &MeshConfig {
                    fictitious_margin: r as f64 * mesh.hatch,
                    ..mesh.clone()
                },
            )
            .unwrap()
        };
        assert_eq!(count, at(rings));
        let gap = count.abs_diff(4000);
        assert!(gap <= at(rings + 1).abs_diff(4000));
        assert!(rings == 0 || gap <= at(rings - 1).abs_diff(4000));
    }
}
