//! Melt pool length and width, from simulated element temperatures and from
//! co-axial monitoring frames.

mod frames;
mod raster;

pub use frames::{
    frame_file_name, list_frames, parse_frame_name, read_gray, read_metrics_csv, write_gray, write_metrics_csv,
    write_raster_pgm16, FrameFile, MetricsRow,
};
pub use raster::{
    binarize, binarize_gray, ellipse_fit, idw_at, idw_raster, largest_component, BinaryMask, EllipseFit,
    TemperatureRaster,
};

use serde::Deserialize;

use crate::geom::Vec2;
use crate::mesh::{Element, Mesh};
use crate::Result;

/// Digital level threshold for monitoring frames.
pub const DEFAULT_FRAME_THRESHOLD: u8 = 80;
/// Frame resolution, m/px.
pub const DEFAULT_FRAME_PIXEL_SIZE: f64 = 7.13e-6;
/// Monitoring camera frame rate, Hz.
pub const FRAME_RATE_HZ: f64 = 20e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Simulated,
    Experimental,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeltPoolMetrics {
    pub snapshot_time: f64,
    /// NaN components when unknown (monitoring frames).
    pub laser_position: Vec2,
    pub length: f64,
    pub width: f64,
    pub orientation: f64,
    pub melted_count: usize,
    pub source: Source,
}

impl MeltPoolMetrics {
    pub fn empty(snapshot_time: f64, laser_position: Vec2, source: Source) -> Self {
        MeltPoolMetrics {
            snapshot_time,
            laser_position,
            length: 0.0,
            width: 0.0,
            orientation: 0.0,
            melted_count: 0,
            source,
        }
    }

    pub fn to_row(&self, frame: usize, outlier: bool) -> MetricsRow {
        MetricsRow {
            frame,
            time_s: self.snapshot_time,
            laser_x_m: self.laser_position.x,
            laser_y_m: self.laser_position.y,
            length_m: self.length,
            width_m: self.width,
            orientation_rad: self.orientation,
            outlier_flag: u8::from(outlier),
        }
    }
}

/// How the simulated pool length is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthMethod {
    /// Largest distance between corners of melted elements.
    #[default]
    MaxDistance,
    /// Major axis of the ellipse fitted to the reconstructed pool.
    MajorAxis,
}

/// Settings for extracting metrics from simulated states.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    pub length_method: LengthMethod,
    /// Side of the reconstruction window centered on the laser, m.
    pub raster_side: f64,
    pub raster_pixels: usize,
    pub idw_power: f64,
    /// Neighbourhood radius of the IDW blend, m. `None` blends every site
    /// into every pixel, which for powers below 2 lets the many distant
    /// cool sites swamp the pool.
    pub idw_radius: Option<f64>,
    /// Melt threshold, K. `None` uses the liquidus.
    pub threshold: Option<f64>,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            length_method: LengthMethod::MaxDistance,
            raster_side: 0.96e-3,
            raster_pixels: 120,
            idw_power: 1.3,
            idw_radius: Some(100e-6),
            threshold: None,
        }
    }
}

impl PoolConfig {
    pub fn pixel_size(&self) -> f64 {
        self.raster_side / self.raster_pixels as f64
    }
}

/// Candidates with `T >= threshold`.
pub fn melted_set(temperatures: &[f64], candidates: &[usize], threshold: f64) -> Vec<usize> {
    candidates.iter().copied().filter(|&i| temperatures[i] >= threshold).collect()
}

/// Largest distance between any two top-face corners of `elements`; zero
/// for an empty set.
pub fn pool_length<'a>(elements: impl IntoIterator<Item = &'a Element>) -> f64 {
    let points: Vec<Vec2> = elements.into_iter().flat_map(|e| e.rect().corners()).collect();
    let hull = convex_hull(points);
    let mut best = 0.0f64;
    for (k, a) in hull.iter().enumerate() {
        for b in &hull[k + 1..] {
            best = best.max(a.distance(*b));
        }
    }
    best
}

/// Andrew's monotone chain; the farthest pair of a point set lies on its hull.
fn convex_hull(mut pts: Vec<Vec2>) -> Vec<Vec2> {
    if pts.len() < 3 {
        return pts;
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                if (b - a).cross(p - a) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Pool width and orientation from an IDW reconstruction around the laser:
/// raster, threshold, keep the largest component, fit an ellipse.
/// Returns `(width m, orientation rad, fit)`; zeros when nothing melts.
pub fn pool_width(
    sites: &[(Vec2, f64)],
    laser: Vec2,
    threshold: f64,
    cfg: &PoolConfig,
) -> Result<(f64, f64, Option<EllipseFit>)> {
    if !sites.iter().any(|&(_, t)| t >= threshold) {
        return Ok((0.0, 0.0, None));
    }
    let raster = idw_raster(sites, laser, cfg.raster_side, cfg.raster_pixels, cfg.idw_power, cfg.idw_radius)?;
    let pool = largest_component(&binarize(&raster, threshold));
    Ok(match ellipse_fit(&pool) {
        Some(fit) => (fit.minor * raster.pixel_size, fit.orientation, Some(fit)),
        None => (0.0, 0.0, None),
    })
}

/// Top-layer members of `active` whose centroids fall inside the square of
/// side `side` centred on `center`, as IDW sites.
pub fn idw_sites(
    mesh: &Mesh,
    temperatures: &[f64],
    active: &[usize],
    center: Vec2,
    side: f64,
) -> Vec<(Vec2, f64)> {
    let half = 0.5 * side;
    active
        .iter()
        .filter(|&&i| mesh.is_exposed(i))
        .map(|&i| (mesh.elements[i].centroid.xy(), temperatures[i]))
        .filter(|(c, _)| (c.x - center.x).abs() <= half && (c.y - center.y).abs() <= half)
        .collect()
}

/// Metrics of one simulated state. Melted elements are searched among
/// `active` (all layers); the width reconstruction uses its top-layer
/// members.
pub fn simulated_metrics(
    mesh: &Mesh,
    temperatures: &[f64],
    active: &[usize],
    laser: Vec2,
    time: f64,
    liquidus: f64,
    cfg: &PoolConfig,
) -> Result<MeltPoolMetrics> {
    let threshold = cfg.threshold.unwrap_or(liquidus);
    let melted = melted_set(temperatures, active, threshold);
    if melted.is_empty() {
        return Ok(MeltPoolMetrics::empty(time, laser, Source::Simulated));
    }
    let reach = cfg.raster_side + 2.0 * cfg.idw_radius.unwrap_or(f64::INFINITY);
    let sites = idw_sites(mesh, temperatures, active, laser, reach);
    let (width, orientation, fit) = pool_width(&sites, laser, threshold, cfg)?;
    let length = match (cfg.length_method, fit) {
        (LengthMethod::MaxDistance, _) => pool_length(melted.iter().map(|&i| &mesh.elements[i])),
        (LengthMethod::MajorAxis, Some(f)) => f.major * cfg.pixel_size(),
        (LengthMethod::MajorAxis, None) => 0.0,
    };
    Ok(MeltPoolMetrics {
        snapshot_time: time,
        laser_position: laser,
        length,
        width,
        orientation,
        melted_count: melted.len(),
        source: Source::Simulated,
    })
}

/// Metrics of one monitoring frame: threshold, keep the largest component,
/// fit an ellipse, convert pixels to metres.
pub fn extract_frame_metrics(image: &image::GrayImage, threshold: u8, pixel_size: f64, time: f64) -> MeltPoolMetrics {
    let unknown = Vec2::new(f64::NAN, f64::NAN);
    let pool = largest_component(&binarize_gray(image, threshold));
    match ellipse_fit(&pool) {
        Some(fit) => MeltPoolMetrics {
            snapshot_time: time,
            laser_position: unknown,
            length: fit.major * pixel_size,
            width: fit.minor * pixel_size,
            orientation: fit.orientation,
            melted_count: fit.area,
            source: Source::Experimental,
        },
        None => MeltPoolMetrics::empty(time, unknown, Source::Experimental),
    }
}

/// Plume/outlier heuristic constants.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutlierConfig {
    /// A frame is flagged when its length exceeds `factor` times the
    /// rolling median.
    pub factor: f64,
    /// Centered window, frames.
    pub window: usize,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        OutlierConfig {
            factor: 2.5,
            window: 15,
        }
    }
}

/// Flags zero-length frames and frames longer than `factor` times the
/// centered rolling median of the non-zero lengths around them.
pub fn filter_outliers(lengths: &[f64], cfg: &OutlierConfig) -> Vec<bool> {
    let half = cfg.window / 2;
    (0..lengths.len())
        .map(|k| {
            let len = lengths[k];
            if !(len > 0.0) {
                return true;
            }
            let lo = k.saturating_sub(half);
            let hi = (k + half + 1).min(lengths.len());
            let mut window: Vec<f64> = lengths[lo..hi].iter().copied().filter(|&v| v > 0.0).collect();
            window.sort_by(f64::total_cmp);
            let m = window.len();
            let median = if m % 2 == 1 {
                window[m / 2]
            } else {
                0.5 * (window[m / 2 - 1] + window[m / 2])
            };
            len > cfg.factor * median
        })
        .collect()
}
