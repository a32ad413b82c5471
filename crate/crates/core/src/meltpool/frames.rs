//! Monitoring-frame files, raster dumps and the metrics CSV.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use image::codecs::pnm::{GraymapHeader, PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder};
use serde::{Deserialize, Serialize};

use super::TemperatureRaster;
use crate::{Error, Result};

/// A frame file named `case<CC>_frame<NNNN>.pgm`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameFile {
    pub case: String,
    pub frame: usize,
    pub path: PathBuf,
}

/// Splits a file name of the form `case<CC>_frame<NNNN>.pgm` into its case
/// and frame number.
pub fn parse_frame_name(name: &str) -> Option<(String, usize)> {
    let stem = name.strip_suffix(".pgm")?.strip_prefix("case")?;
    let (case, frame) = stem.split_once("_frame")?;
    if case.is_empty() || !case.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    if frame.is_empty() || !frame.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    Some((case.to_string(), frame.parse().ok()?))
}

pub fn frame_file_name(case: &str, frame: usize) -> String {
    format!("case{case}_frame{frame:04}.pgm")
}

/// Frame files in `dir` sorted by frame number. When the directory holds
/// several cases, `case` must pick one.
pub fn list_frames(dir: &Path, case: Option<&str>) -> Result<Vec<FrameFile>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut frames = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some((c, frame)) = name.to_str().and_then(parse_frame_name) else {
            continue;
        };
        if case.is_none_or(|want| want == c) {
            frames.push(FrameFile {
                case: c,
                frame,
                path: entry.path(),
            });
        }
    }
    let mut cases: Vec<&str> = frames.iter().map(|f| f.case.as_str()).collect();
    cases.sort_unstable();
    cases.dedup();
    if cases.len() > 1 {
        return Err(Error::Validation(format!(
            "{} holds frames of several cases ({}); choose one",
            dir.display(),
            cases.join(", ")
        )));
    }
    frames.sort_by_key(|f| f.frame);
    Ok(frames)
}

fn image_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Reads a grayscale PGM as 8-bit levels.
pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| image_error(path, e))?;
    Ok(img.into_luma8())
}

/// Writes an 8-bit binary PGM (P5).
pub fn write_gray(path: &Path, img: &GrayImage) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    PnmEncoder::new(std::io::BufWriter::new(file))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(img.as_raw(), img.width(), img.height(), ExtendedColorType::L8)
        .map_err(|e| image_error(path, e))
}

/// Writes a raster as a 16-bit PGM (maxval 65535) with rows flipped so +y is
/// up, plus `<path>.txt` recording the linear level-to-kelvin mapping.
pub fn write_raster_pgm16(path: &Path, raster: &TemperatureRaster) -> Result<()> {
    let (lo, hi) = raster.min_max().unwrap_or((0.0, 0.0));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut bytes = Vec::with_capacity(raster.values.len() * 2);
    for row in (0..raster.height).rev() {
        for col in 0..raster.width {
            let level = ((raster.get(col, row) - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16;
            // The encoder takes native-endian samples.
            bytes.extend_from_slice(&level.to_ne_bytes());
        }
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let header = GraymapHeader {
        encoding: SampleEncoding::Binary,
        height: raster.height as u32,
        width: raster.width as u32,
        maxwhite: 65535,
    };
    PnmEncoder::new(std::io::BufWriter::new(file))
        .with_header(header.into())
        .write_image(&bytes, raster.width as u32, raster.height as u32, ExtendedColorType::L16)
        .map_err(|e| image_error(path, e))?;

    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".txt");
    let sidecar = PathBuf::from(sidecar);
    let text = format!(
        "# T = t_min_K + level / 65535 * (t_max_K - t_min_K)\nt_min_K = {lo}\nt_max_K = {}\npixel_size_m = {}\norigin_x_m = {}\norigin_y_m = {}\n",
        lo + span,
        raster.pixel_size,
        raster.origin.x,
        raster.origin.y
    );
    std::fs::write(&sidecar, text).map_err(|e| Error::io(sidecar, e))
}

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub frame: usize,
    pub time_s: f64,
    pub laser_x_m: f64,
    pub laser_y_m: f64,
    pub length_m: f64,
    pub width_m: f64,
    pub orientation_rad: f64,
    pub outlier_flag: u8,
}

pub fn write_metrics_csv<W: Write>(w: W, rows: &[MetricsRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(r: R) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
    Ok(rows)
}
