//! Pixel grids: IDW temperature reconstruction, thresholding, connected
//! components and moment-based ellipse fitting.

use crate::geom::{Aabb, Vec2};
use crate::mesh::SpatialGrid;
use crate::{par, Error, Result};

/// Scalar field sampled at pixel centers. Pixel `(col, row)` is centered at
/// `origin + ((col + 0.5) * pixel_size, (row + 0.5) * pixel_size)`, so rows
/// run along +y.
#[derive(Clone, Debug, PartialEq)]
pub struct TemperatureRaster {
    pub origin: Vec2,
    pub pixel_size: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major, `height * width` values.
    pub values: Vec<f64>,
}

impl TemperatureRaster {
    pub fn pixel_center(&self, col: usize, row: usize) -> Vec2 {
        self.origin + Vec2::new((col as f64 + 0.5) * self.pixel_size, (row as f64 + 0.5) * self.pixel_size)
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        self.values.iter().filter(|v| !v.is_nan()).fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }
}

/// One bit per pixel, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: bool) {
        self.bits[row * self.width + col] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }
}

/// Inverse-distance weighted value at `x`: `sum w_i T_i / sum w_i` with
/// `w_i = d(x, x_i)^-p`. A query within 1e-12 of a site returns that site's
/// value. `sites` must be non-empty.
pub fn idw_at(sites: &[(Vec2, f64)], x: Vec2, p: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(s, t) in sites {
        let d2 = (s - x).norm_sq();
        if d2 < 1e-24 {
            return t;
        }
        let w = d2.powf(-0.5 * p);
        num += w * t;
        den += w;
    }
    num / den
}

/// IDW reconstruction on a `resolution x resolution` raster of side `side`
/// centered at `center`.
///
/// With `radius`, each pixel blends only the sites within that distance
/// (pixels with none are NaN, which no threshold accepts); otherwise every
/// site contributes to every pixel.
pub fn idw_raster(
    sites: &[(Vec2, f64)],
    center: Vec2,
    side: f64,
    resolution: usize,
    p: f64,
    radius: Option<f64>,
) -> Result<TemperatureRaster> {
    if sites.is_empty() {
        return Err(Error::Validation("IDW needs at least one site".into()));
    }
    if !(side > 0.0) || resolution == 0 {
        return Err(Error::Validation("raster side and resolution must be positive".into()));
    }
    if radius.is_some_and(|r| !(r > 0.0)) {
        return Err(Error::Validation("IDW neighbourhood radius must be positive".into()));
    }
    let pixel_size = side / resolution as f64;
    let origin = center - Vec2::new(0.5 * side, 0.5 * side);
    let grid = radius.map(|r| {
        let boxes: Vec<Aabb> = sites.iter().map(|&(s, _)| Aabb { min: s, max: s }).collect();
        (SpatialGrid::new(&boxes, r), r)
    });
    let rows = par::map_range(resolution, |row| {
        let mut found = Vec::new();
        let mut local = Vec::new();
        (0..resolution)
            .map(|col| {
                let x = origin + Vec2::new((col as f64 + 0.5) * pixel_size, (row as f64 + 0.5) * pixel_size);
                let Some((grid, r)) = &grid else {
                    return idw_at(sites, x, p);
                };
                found.clear();
                let reach = Vec2::new(*r, *r);
                grid.query_into(Aabb { min: x - reach, max: x + reach }, &mut found);
                // Sorted so the sum order, and hence the result, is reproducible.
                found.sort_unstable();
                local.clear();
                local.extend(found.iter().map(|&k| sites[k as usize]).filter(|(s, _)| s.distance(x) <= *r));
                if local.is_empty() {
                    f64::NAN
                } else {
                    idw_at(&local, x, p)
                }
            })
            .collect::<Vec<f64>>()
    });
    Ok(TemperatureRaster {
        origin,
        pixel_size,
        width: resolution,
        height: resolution,
        values: rows.concat(),
    })
}

/// `value >= threshold` per pixel.
pub fn binarize(raster: &TemperatureRaster, threshold: f64) -> BinaryMask {
    BinaryMask {
        width: raster.width,
        height: raster.height,
        bits: raster.values.iter().map(|&v| v >= threshold).collect(),
    }
}

/// `level >= threshold` per pixel of an 8-bit image.
pub fn binarize_gray(image: &image::GrayImage, threshold: u8) -> BinaryMask {
    BinaryMask {
        width: image.width() as usize,
        height: image.height() as usize,
        bits: image.as_raw().iter().map(|&v| v >= threshold).collect(),
    }
}

/// Keeps the 8-connected component with the most pixels. Among equally
/// large components the one whose first pixel in row-major order comes
/// first wins.
pub fn largest_component(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width, mask.height);
    let mut label = vec![0u32; w * h];
    let mut best: Option<(u32, usize)> = None;
    let mut stack = Vec::new();
    let mut next = 0u32;
    for start in 0..w * h {
        if !mask.bits[start] || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        stack.push(start);
        let mut size = 0usize;
        while let Some(p) = stack.pop() {
            size += 1;
            let (c, r) = ((p % w) as isize, (p / w) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nc, nr) = (c + dc, r + dr);
                    if nc < 0 || nr < 0 || nc >= w as isize || nr >= h as isize {
                        continue;
                    }
                    let q = nr as usize * w + nc as usize;
                    if mask.bits[q] && label[q] == 0 {
                        label[q] = next;
                        stack.push(q);
                    }
                }
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((next, size));
        }
    }
    let mut out = BinaryMask::new(w, h);
    if let Some((keep, _)) = best {
        for (o, &l) in out.bits.iter_mut().zip(&label) {
            *o = l == keep;
        }
    }
    out
}

/// Ellipse with the same normalized second central moments as a region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipseFit {
    /// Full axis lengths in pixels.
    pub major: f64,
    pub minor: f64,
    /// Angle of the major axis from the column axis towards the row axis,
    /// radians in `(-pi/2, pi/2]`.
    pub orientation: f64,
    /// (column, row) of the pixel centroid.
    pub centroid: (f64, f64),
    pub area: usize,
}

/// Fits an ellipse to the set pixels, treating each as a unit square
/// (hence the extra 1/12 in each axis variance). `None` for an empty mask.
pub fn ellipse_fit(mask: &BinaryMask) -> Option<EllipseFit> {
    let mut n = 0usize;
    let (mut sx, mut sy) = (0.0, 0.0);
    for r in 0..mask.height {
        for c in 0..mask.width {
            if mask.get(c, r) {
                n += 1;
                sx += c as f64;
                sy += r as f64;
            }
        }
    }
    if n == 0 {
        return None;
    }
    let nf = n as f64;
    let (mx, my) = (sx / nf, sy / nf);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for r in 0..mask.height {
        for c in 0..mask.width {
            if mask.get(c, r) {
                let (dx, dy) = (c as f64 - mx, r as f64 - my);
                sxx += dx * dx;
                syy += dy * dy;
                sxy += dx * dy;
            }
        }
    }
    let (sxx, syy, sxy) = (sxx / nf + 1.0 / 12.0, syy / nf + 1.0 / 12.0, sxy / nf);
    let mean = 0.5 * (sxx + syy);
    let root = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    let (l1, l2) = (mean + root, (mean - root).max(0.0));
    let mut orientation = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    if orientation <= -std::f64::consts::FRAC_PI_2 {
        orientation += std::f64::consts::PI;
    }
    Some(EllipseFit {
        major: 4.0 * l1.sqrt(),
        minor: 4.0 * l2.sqrt(),
        orientation,
        centroid: (mx, my),
        area: n,
    })
}
