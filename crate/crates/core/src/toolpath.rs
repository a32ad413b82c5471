//! Scan vectors, power profiles, raster generation, fictitious domain rings
//! and sub-path discretization.
//!
//! # Toolpath file format
//!
//! UTF-8 text, one record per line, `#` starts a comment:
//!
//! ```text
//! H <layer_height_m> <layer_index>               # optional header
//! P <id> (<dist_m>,<power_W>) (<dist_m>,<power_W>) ...
//! V <x0> <y0> <x1> <y1> <speed_m_s> <profile_id>
//! F <x0> <y0> <x1> <y1> <speed_m_s>             # fictitious, zero power
//! ```
//!
//! Vectors execute in file order. Profiles may be declared anywhere in the
//! file.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::geom::{Aabb, Vec2};
use crate::{Error, Result};

/// Layer height assumed when a toolpath file has no `H` record.
pub const DEFAULT_LAYER_HEIGHT: f64 = 40e-6;

/// Laser power as a piecewise-linear function of distance along a vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerProfile {
    breakpoints: Vec<(f64, f64)>,
}

impl PowerProfile {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::Validation("power profile has no breakpoints".into()));
        }
        for w in breakpoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Validation(format!(
                    "power profile distances must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(d, p)) = breakpoints.iter().find(|(d, p)| !d.is_finite() || !p.is_finite() || *p < 0.0) {
            return Err(Error::Validation(format!("invalid power breakpoint ({d}, {p})")));
        }
        Ok(PowerProfile { breakpoints })
    }

    pub fn constant(power: f64) -> Self {
        PowerProfile {
            breakpoints: vec![(0.0, power.max(0.0))],
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn is_zero(&self) -> bool {
        self.breakpoints.iter().all(|&(_, p)| p == 0.0)
    }

    pub fn max_power(&self) -> f64 {
        self.breakpoints.iter().map(|&(_, p)| p).fold(0.0, f64::max)
    }

    /// Power at `distance`, clamped to the end values outside the breakpoints.
    pub fn power_at(&self, distance: f64) -> f64 {
        let bp = &self.breakpoints;
        let (d_first, p_first) = bp[0];
        let (d_last, p_last) = bp[bp.len() - 1];
        if distance <= d_first {
            return p_first;
        }
        if distance >= d_last {
            return p_last;
        }
        let k = bp.partition_point(|&(d, _)| d <= distance);
        let (d0, p0) = bp[k - 1];
        let (d1, p1) = bp[k];
        p0 + (p1 - p0) * (distance - d0) / (d1 - d0)
    }

    /// Exact integral of power over `[a, b]` (W·m).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        // Knots: the interval ends plus every breakpoint strictly inside.
        let mut knots = Vec::with_capacity(self.breakpoints.len() + 2);
        knots.push(a);
        knots.extend(self.breakpoints.iter().map(|&(d, _)| d).filter(|&d| d > a && d < b));
        knots.push(b);
        knots
            .windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (self.power_at(w[0]) + self.power_at(w[1])))
            .sum()
    }

    /// Mean power over `[a, b]`; the point value when the span is empty.
    pub fn mean_power(&self, a: f64, b: f64) -> f64 {
        if b > a {
            self.integral(a, b) / (b - a)
        } else {
            self.power_at(a)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanVector {
    pub id: usize,
    pub start: Vec2,
    pub end: Vec2,
    /// m/s
    pub speed: f64,
    pub profile: PowerProfile,
    pub fictitious: bool,
}

impl ScanVector {
    pub fn new(id: usize, start: Vec2, end: Vec2, speed: f64, profile: PowerProfile) -> Result<Self> {
        let v = ScanVector {
            id,
            start,
            end,
            speed,
            profile,
            fictitious: false,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn fictitious(id: usize, start: Vec2, end: Vec2, speed: f64) -> Result<Self> {
        let mut v = Self::new(id, start, end, speed, PowerProfile::zero())?;
        v.fictitious = true;
        Ok(v)
    }

    fn validate(&self) -> Result<()> {
        if !(self.start.x.is_finite() && self.start.y.is_finite() && self.end.x.is_finite() && self.end.y.is_finite()) {
            return Err(Error::Validation(format!("vector {}: non-finite endpoint", self.id)));
        }
        if self.start == self.end || self.length() == 0.0 {
            return Err(Error::Validation(format!("vector {}: zero length", self.id)));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::Validation(format!("vector {}: speed must be positive", self.id)));
        }
        if self.fictitious && !self.profile.is_zero() {
            return Err(Error::Validation(format!("vector {}: fictitious vector carries power", self.id)));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }

    pub fn direction(&self) -> Vec2 {
        (self.end - self.start).normalized().unwrap_or(Vec2::new(1.0, 0.0))
    }

    pub fn point_at(&self, distance: f64) -> Vec2 {
        self.start + self.direction() * distance
    }

    pub fn duration(&self) -> f64 {
        self.length() / self.speed
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Toolpath {
    pub vectors: Vec<ScanVector>,
    pub layer_height: f64,
    pub layer_index: i32,
}

impl Default for Toolpath {
    fn default() -> Self {
        Toolpath {
            vectors: Vec::new(),
            layer_height: DEFAULT_LAYER_HEIGHT,
            layer_index: 0,
        }
    }
}

impl Toolpath {
    pub fn new(vectors: Vec<ScanVector>, layer_height: f64, layer_index: i32) -> Result<Self> {
        if !(layer_height > 0.0) {
            return Err(Error::Validation("layer height must be positive".into()));
        }
        Ok(Toolpath {
            vectors,
            layer_height,
            layer_index,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn real_vectors(&self) -> impl Iterator<Item = &ScanVector> {
        self.vectors.iter().filter(|v| !v.fictitious)
    }

    /// Bounding box of the non-fictitious vectors.
    pub fn real_bounds(&self) -> Option<Aabb> {
        let pts: Vec<Vec2> = self.real_vectors().flat_map(|v| [v.start, v.end]).collect();
        Aabb::from_points(&pts)
    }

    /// Total laser travel time over the non-fictitious vectors.
    pub fn scan_duration(&self) -> f64 {
        self.real_vectors().map(ScanVector::duration).sum()
    }

    fn renumber(&mut self) {
        for (i, v) in self.vectors.iter_mut().enumerate() {
            v.id = i;
        }
    }
}

/// A piece of a scan vector covered in one solver sub-path.
#[derive(Clone, Debug, PartialEq)]
pub struct SubPath {
    /// Index of the owning vector in [`Toolpath::vectors`].
    pub vector_id: usize,
    pub start: Vec2,
    pub end: Vec2,
    /// Distance of `start` from the vector start.
    pub distance_offset: f64,
    pub length: f64,
    pub duration: f64,
    pub mean_power: f64,
    pub fictitious: bool,
}

impl SubPath {
    pub fn direction(&self) -> Vec2 {
        (self.end - self.start).normalized().unwrap_or(Vec2::new(1.0, 0.0))
    }

    pub fn midpoint(&self) -> Vec2 {
        self.start.lerp(self.end, 0.5)
    }
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected {what}, found `{tok}`"),
    })
}

fn parse_breakpoints(text: &str, line: usize) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let open = rest.strip_prefix('(').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `(` in power profile, found `{rest}`"),
        })?;
        let close = open.find(')').ok_or_else(|| Error::Parse {
            line,
            message: "unterminated breakpoint".into(),
        })?;
        let (pair, tail) = open.split_at(close);
        let (d, p) = pair.split_once(',').ok_or_else(|| Error::Parse {
            line,
            message: format!("breakpoint `({pair})` must be `(distance,power)`"),
        })?;
        out.push((parse_f64(d.trim(), line, "distance")?, parse_f64(p.trim(), line, "power")?));
        rest = tail[1..].trim_start_matches(|c: char| c.is_whitespace() || c == ',');
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line,
            message: "power profile has no breakpoints".into(),
        });
    }
    Ok(out)
}

struct PendingVector {
    line: usize,
    coords: [f64; 4],
    speed: f64,
    profile: Option<String>,
}

/// Parses the line-oriented toolpath format described in the module docs.
pub fn parse_toolpath<R: BufRead>(reader: R) -> Result<Toolpath> {
    let mut profiles: HashMap<String, (usize, PowerProfile)> = HashMap::new();
    let mut pending = Vec::new();
    let mut layer_height = DEFAULT_LAYER_HEIGHT;
    let mut layer_index = 0;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (tag, rest) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
        match tag {
            "H" => {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                if toks.is_empty() || toks.len() > 2 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "expected `H <layer_height_m> [layer_index]`".into(),
                    });
                }
                layer_height = parse_f64(toks[0], lineno, "layer height")?;
                if !(layer_height > 0.0) {
                    return Err(Error::Validation(format!("line {lineno}: layer height must be positive")));
                }
                if let Some(t) = toks.get(1) {
                    layer_index = t.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("expected integer layer index, found `{t}`"),
                    })?;
                }
            }
            "P" => {
                let rest = rest.trim();
                let (id, bps) = rest.split_once(char::is_whitespace).ok_or_else(|| Error::Parse {
                    line: lineno,
                    message: "expected `P <id> (<dist>,<power>)...`".into(),
                })?;
                let id = id.trim_end_matches(':').to_string();
                let profile = PowerProfile::new(parse_breakpoints(bps, lineno)?)
                    .map_err(|e| Error::Validation(format!("line {lineno}: {e}")))?;
                if profiles.insert(id.clone(), (lineno, profile)).is_some() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("profile `{id}` defined twice"),
                    });
                }
            }
            "V" | "F" => {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                let want = if tag == "V" { 6 } else { 5 };
                if toks.len() != want {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("`{tag}` record needs {want} fields, found {}", toks.len()),
                    });
                }
                let mut coords = [0.0; 4];
                for (c, t) in coords.iter_mut().zip(&toks) {
                    *c = parse_f64(t, lineno, "coordinate")?;
                }
                pending.push(PendingVector {
                    line: lineno,
                    coords,
                    speed: parse_f64(toks[4], lineno, "speed")?,
                    profile: (tag == "V").then(|| toks[5].to_string()),
                });
            }
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("unknown record `{other}`"),
                })
            }
        }
    }

    let mut vectors = Vec::with_capacity(pending.len());
    for (id, p) in pending.into_iter().enumerate() {
        let [x0, y0, x1, y1] = p.coords;
        let (start, end) = (Vec2::new(x0, y0), Vec2::new(x1, y1));
        let v = match &p.profile {
            Some(name) => {
                let (_, profile) = profiles.get(name).ok_or_else(|| Error::Parse {
                    line: p.line,
                    message: format!("unknown power profile `{name}`"),
                })?;
                ScanVector::new(id, start, end, p.speed, profile.clone())
            }
            None => ScanVector::fictitious(id, start, end, p.speed),
        }
        .map_err(|e| Error::Validation(format!("line {}: {e}", p.line)))?;
        vectors.push(v);
    }
    Toolpath::new(vectors, layer_height, layer_index)
}

/// Serializes `tp` so that [`parse_toolpath`] reproduces it exactly.
pub fn write_toolpath<W: Write>(tp: &Toolpath, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# toolpath: {} vectors", tp.vectors.len())?;
    writeln!(w, "H {} {}", tp.layer_height, tp.layer_index)?;
    let mut ids: Vec<&PowerProfile> = Vec::new();
    let mut vector_profile = Vec::with_capacity(tp.vectors.len());
    for v in &tp.vectors {
        if v.fictitious {
            vector_profile.push(usize::MAX);
            continue;
        }
        let k = match ids.iter().position(|p| **p == v.profile) {
            Some(k) => k,
            None => {
                ids.push(&v.profile);
                ids.len() - 1
            }
        };
        vector_profile.push(k);
    }
    for (k, p) in ids.iter().enumerate() {
        write!(w, "P P{k}")?;
        for (d, pw) in p.breakpoints() {
            write!(w, " ({d},{pw})")?;
        }
        writeln!(w)?;
    }
    for (v, &k) in tp.vectors.iter().zip(&vector_profile) {
        let (s, e) = (v.start, v.end);
        if v.fictitious {
            writeln!(w, "F {} {} {} {} {}", s.x, s.y, e.x, e.y, v.speed)?;
        } else {
            writeln!(w, "V {} {} {} {} {} P{k}", s.x, s.y, e.x, e.y, v.speed)?;
        }
    }
    Ok(())
}

/// Axis-aligned square region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareRegion {
    pub origin: Vec2,
    pub side: f64,
}

/// Parameters of a contour-plus-raster layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RasterSpec {
    pub region: SquareRegion,
    pub hatch: f64,
    pub raster_angle_deg: f64,
    /// Number of boundary vectors; a multiple of 4 (one loop per 4 vectors).
    pub contour_count: usize,
    pub speed: f64,
    pub power: f64,
}

/// Contour loops around the region followed by boustrophedon raster infill.
///
/// Each loop of four vectors is inset by one hatch from the previous one; the
/// infill fills the square inset by `loops * hatch`.
pub fn generate_raster_layer(spec: &RasterSpec) -> Result<Toolpath> {
    let RasterSpec {
        region,
        hatch,
        raster_angle_deg,
        contour_count,
        speed,
        power,
    } = *spec;
    if !(hatch > 0.0) {
        return Err(Error::Validation("hatch spacing must be positive".into()));
    }
    if !(region.side > hatch) {
        return Err(Error::Validation(format!(
            "hatch {hatch} m leaves no infill in a {} m region",
            region.side
        )));
    }
    if contour_count % 4 != 0 {
        return Err(Error::Validation(format!(
            "contour count {contour_count} is not a multiple of 4"
        )));
    }
    let loops = contour_count / 4;
    let inner_side = region.side - 2.0 * loops as f64 * hatch;
    if !(inner_side > hatch) {
        return Err(Error::Validation(format!(
            "{loops} contour loop(s) at hatch {hatch} m leave no infill"
        )));
    }

    let profile = PowerProfile::constant(power);
    let mut vectors = Vec::new();
    let push = |a: Vec2, b: Vec2, vectors: &mut Vec<ScanVector>| -> Result<()> {
        vectors.push(ScanVector::new(vectors.len(), a, b, speed, profile.clone())?);
        Ok(())
    };

    for k in 0..loops {
        let inset = k as f64 * hatch;
        let lo = region.origin + Vec2::new(inset, inset);
        let s = region.side - 2.0 * inset;
        let corners = [lo, lo + Vec2::new(s, 0.0), lo + Vec2::new(s, s), lo + Vec2::new(0.0, s)];
        for i in 0..4 {
            push(corners[i], corners[(i + 1) % 4], &mut vectors)?;
        }
    }

    let inset = loops as f64 * hatch;
    let lo = region.origin + Vec2::new(inset, inset);
    let hi = lo + Vec2::new(inner_side, inner_side);
    let theta = raster_angle_deg.to_radians();
    let dir = Vec2::new(theta.cos(), theta.sin());
    let normal = dir.perp();
    let corners = [lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)];
    let offsets: Vec<f64> = corners.iter().map(|c| c.dot(normal)).collect();
    let c_min = offsets.iter().copied().fold(f64::INFINITY, f64::min);
    let c_max = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let extent = c_max - c_min;
    // Lines at c_min + k*hatch strictly inside the square.
    let tol = 1e-9 * extent.max(hatch);
    let mut k = 1usize;
    let mut forward = true;
    while k as f64 * hatch < extent - tol {
        let c = c_min + k as f64 * hatch;
        if let Some((a, b)) = clip_line_to_box(normal * c, dir, lo, hi) {
            if a.distance(b) > tol {
                let (s, e) = if forward { (a, b) } else { (b, a) };
                push(s, e, &mut vectors)?;
                forward = !forward;
            }
        }
        k += 1;
    }
    Toolpath::new(vectors, DEFAULT_LAYER_HEIGHT, 0)
}

/// Clips the infinite line `p + t*dir` to the box `[lo, hi]`. Returns the
/// endpoints ordered along `dir`.
fn clip_line_to_box(p: Vec2, dir: Vec2, lo: Vec2, hi: Vec2) -> Option<(Vec2, Vec2)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (p, d, lo, hi) in [(p.x, dir.x, lo.x, hi.x), (p.y, dir.y, lo.y, hi.y)] {
        if d.abs() < 1e-15 {
            if p < lo || p > hi {
                return None;
            }
        } else {
            let (a, b) = ((lo - p) / d, (hi - p) / d);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    (t1 > t0).then(|| (p + dir * t0, p + dir * t1))
}

/// Appends `floor(margin / path_spacing)` concentric rectangular rings of
/// zero-power vectors around the bounding box of the real vectors.
///
/// Ring `k` is the bounding box expanded by `k * path_spacing`. Real vectors
/// are left untouched; fictitious vectors get the speed of the first real
/// vector.
pub fn append_fictitious_paths(tp: &Toolpath, margin: f64, path_spacing: f64) -> Toolpath {
    let mut out = tp.clone();
    let Some(bounds) = tp.real_bounds() else {
        return out;
    };
    if !(margin > 0.0 && path_spacing > 0.0) {
        return out;
    }
    let rings = (margin / path_spacing + 1e-9).floor() as usize;
    let speed = tp.real_vectors().next().map_or(1.0, |v| v.speed);
    for k in 1..=rings {
        let b = bounds.inflate(k as f64 * path_spacing);
        let corners = [b.min, Vec2::new(b.max.x, b.min.y), b.max, Vec2::new(b.min.x, b.max.y)];
        for i in 0..4 {
            let id = out.vectors.len();
            // Corners are distinct because the ring is inflated by a positive amount.
            let v = ScanVector::fictitious(id, corners[i], corners[(i + 1) % 4], speed)
                .expect("ring sides have positive length");
            out.vectors.push(v);
        }
    }
    out.renumber();
    out
}

/// Number of equal pieces no longer than `target` covering `length`.
pub fn piece_count(length: f64, target: f64) -> usize {
    let ratio = length / target;
    // Absorb round-off so that e.g. 2 mm / 10 um gives 200, not 201.
    ((ratio - 1e-9 * ratio.max(1.0)).ceil() as usize).max(1)
}

/// Splits every vector into `ceil(length / target_len)` equal sub-paths.
pub fn discretize(tp: &Toolpath, target_len: f64) -> Result<Vec<SubPath>> {
    if !(target_len > 0.0) {
        return Err(Error::Validation("target element length must be positive".into()));
    }
    let mut out = Vec::new();
    for (vi, v) in tp.vectors.iter().enumerate() {
        let len = v.length();
        let n = piece_count(len, target_len);
        let piece = len / n as f64;
        let dir = v.direction();
        for k in 0..n {
            let a = k as f64 * piece;
            let b = if k + 1 == n { len } else { (k + 1) as f64 * piece };
            let mean_power = if v.fictitious { 0.0 } else { v.profile.mean_power(a, b) };
            out.push(SubPath {
                vector_id: vi,
                start: v.start + dir * a,
                end: if k + 1 == n { v.end } else { v.start + dir * b },
                distance_offset: a,
                length: b - a,
                duration: (b - a) / v.speed,
                mean_power,
                fictitious: v.fictitious,
            });
        }
    }
    Ok(out)
}
