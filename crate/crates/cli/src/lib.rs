//! Subcommand implementations behind the `capl` binary. Each command is a
//! plain function so it can be driven from tests without spawning a process.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod compare;
pub mod config;
pub mod frames;
pub mod scaling;
pub mod simulate;

use anyhow::Result;
use capl::geom::Vec2;
use capl::toolpath::{append_fictitious_paths, generate_raster_layer, RasterSpec, SquareRegion, Toolpath};

/// Parameters of `gen-path`.
#[derive(Clone, Debug, PartialEq)]
pub struct GenPathOptions {
    pub origin: Vec2,
    pub side: f64,
    pub hatch: f64,
    pub angle_deg: f64,
    pub contours: usize,
    pub speed: f64,
    pub power: f64,
    /// Width of the fictitious ring band; 0 writes none.
    pub margin: f64,
}

impl Default for GenPathOptions {
    fn default() -> Self {
        GenPathOptions {
            origin: Vec2::ZERO,
            side: 2e-3,
            hatch: 100e-6,
            angle_deg: 45.0,
            contours: 4,
            speed: 0.8,
            power: 195.0,
            margin: 0.0,
        }
    }
}

/// Contour plus raster layer, with fictitious rings at hatch spacing when
/// `margin > 0`.
pub fn gen_path(opts: &GenPathOptions) -> Result<Toolpath> {
    let tp = generate_raster_layer(&RasterSpec {
        region: SquareRegion {
            origin: opts.origin,
            side: opts.side,
        },
        hatch: opts.hatch,
        raster_angle_deg: opts.angle_deg,
        contour_count: opts.contours,
        speed: opts.speed,
        power: opts.power,
    })?;
    Ok(if opts.margin > 0.0 {
        append_fictitious_paths(&tp, opts.margin, opts.hatch)
    } else {
        tp
    })
}
