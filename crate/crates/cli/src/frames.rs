//! `analyze-frames`: monitoring frames to a metrics table.

use std::path::Path;

use anyhow::Result;
use capl::meltpool::{
    extract_frame_metrics, filter_outliers, list_frames, read_gray, MetricsRow, OutlierConfig, FRAME_RATE_HZ,
};
use capl::par;
use log::warn;

#[derive(Clone, Debug)]
pub struct FrameOptions {
    pub case: Option<String>,
    /// Digital level at or above which a pixel belongs to the pool.
    pub threshold: u8,
    /// m per pixel.
    pub pixel_size: f64,
    pub outliers: OutlierConfig,
}

impl Default for FrameOptions {
    fn default() -> Self {
        FrameOptions {
            case: None,
            threshold: capl::meltpool::DEFAULT_FRAME_THRESHOLD,
            pixel_size: capl::meltpool::DEFAULT_FRAME_PIXEL_SIZE,
            outliers: OutlierConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FrameAnalysis {
    pub rows: Vec<MetricsRow>,
    /// Frames that could not be read.
    pub warnings: usize,
}

/// Extracts metrics from every frame in `dir`, in frame order. Frame `n`
/// is stamped `n / 20 kHz`.
pub fn analyze(dir: &Path, opts: &FrameOptions) -> Result<FrameAnalysis> {
    let frames = list_frames(dir, opts.case.as_deref())?;
    let results = par::map(&frames, |f| {
        read_gray(&f.path).map(|img| {
            extract_frame_metrics(&img, opts.threshold, opts.pixel_size, f.frame as f64 / FRAME_RATE_HZ)
        })
    });
    let mut warnings = 0;
    let mut kept = Vec::new();
    for (f, r) in frames.iter().zip(results) {
        match r {
            Ok(m) => kept.push((f.frame, m)),
            Err(e) => {
                warn!("skipping frame {}: {e}", f.path.display());
                warnings += 1;
            }
        }
    }
    let lengths: Vec<f64> = kept.iter().map(|(_, m)| m.length).collect();
    let flags = filter_outliers(&lengths, &opts.outliers);
    let rows = kept
        .iter()
        .zip(flags)
        .map(|((frame, m), flag)| m.to_row(*frame, flag))
        .collect();
    Ok(FrameAnalysis { rows, warnings })
}
