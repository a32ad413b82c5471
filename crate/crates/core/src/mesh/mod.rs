//! Toolpath-aligned box elements and their contact graph.
//!
//! Every sub-path becomes one element on the scanned (top) layer. The solid
//! beneath is represented by `substrate_layers` fictitious copies of the top
//! layer stacked downwards. The top surface sits at `z = 0`; layer depth `k`
//! occupies `[-(k+1)H, -kH]`.

mod contact;
mod grid;
mod voronoi;

use std::io::Write;
use std::path::Path;

pub use contact::{build_contact_graph, contact_area, ContactConfig, ContactEdge, ContactGraph, ContactKind};
pub use grid::{candidate_pairs, NeighborSearch, SpatialGrid};
pub use voronoi::{init_widths_voronoi, GrowthReport, WidthGrowth};

use crate::geom::{rect_overlap_area, Point3, Rect, Vec2};
use crate::toolpath::SubPath;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub id: usize,
    /// Index of the generating sub-path.
    pub sub_path: usize,
    /// Index of the owning scan vector.
    pub vector: usize,
    pub centroid: Point3,
    /// Along the scan direction, m.
    pub length: f64,
    /// Across the scan direction, m.
    pub width: f64,
    pub height: f64,
    /// Unit scan direction.
    pub direction: Vec2,
    pub layer: i32,
    pub fictitious: bool,
}

impl Element {
    /// Top-face footprint.
    pub fn rect(&self) -> Rect {
        Rect {
            center: self.centroid.xy(),
            dir: self.direction,
            length: self.length,
            width: self.width,
        }
    }

    pub fn rect_with_width(&self, width: f64) -> Rect {
        Rect { width, ..self.rect() }
    }

    pub fn top_area(&self) -> f64 {
        self.length * self.width
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    /// Cross-section perpendicular to the scan direction.
    pub fn cross_section(&self) -> f64 {
        self.width * self.height
    }
}

/// Elements plus the layer bookkeeping the solver needs.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub elements: Vec<Element>,
    pub top_layer: i32,
    pub layer_count: usize,
    pub layer_height: f64,
}

impl Mesh {
    pub fn new(elements: Vec<Element>, layer_height: f64) -> Result<Self> {
        if elements.is_empty() {
            return Ok(Mesh {
                elements,
                top_layer: 0,
                layer_count: 0,
                layer_height,
            });
        }
        let top_layer = elements.iter().map(|e| e.layer).max().unwrap_or(0);
        let bottom = elements.iter().map(|e| e.layer).min().unwrap_or(0);
        if elements.iter().enumerate().any(|(i, e)| e.id != i) {
            return Err(Error::Validation("element ids must equal their positions".into()));
        }
        Ok(Mesh {
            elements,
            top_layer,
            layer_count: (top_layer - bottom + 1) as usize,
            layer_height,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// 0 for the top layer, increasing downwards.
    pub fn depth(&self, i: usize) -> usize {
        (self.top_layer - self.elements[i].layer) as usize
    }

    /// Whether the element's top face is a free surface.
    pub fn is_exposed(&self, i: usize) -> bool {
        self.elements[i].layer == self.top_layer
    }

    pub fn is_bottom(&self, i: usize) -> bool {
        self.depth(i) + 1 == self.layer_count
    }

    pub fn max_extent(&self) -> f64 {
        self.elements.iter().map(|e| e.length.max(e.width)).fold(0.0, f64::max)
    }

    /// Element CSV: `id,x,y,z,L,W,H,dir_x,dir_y,layer,fictitious`.
    pub fn write_elements_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "id,x,y,z,L,W,H,dir_x,dir_y,layer,fictitious")?;
        for e in &self.elements {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                e.id,
                e.centroid.x,
                e.centroid.y,
                e.centroid.z,
                e.length,
                e.width,
                e.height,
                e.direction.x,
                e.direction.y,
                e.layer,
                u8::from(e.fictitious)
            )?;
        }
        Ok(())
    }

    pub fn dump(&self, graph: &ContactGraph, dir: &Path) -> Result<()> {
        let open = |name: &str| {
            let p = dir.join(name);
            std::fs::File::create(&p)
                .map(std::io::BufWriter::new)
                .map_err(|e| Error::io(p, e))
        };
        self.write_elements_csv(open("elements.csv")?)
            .map_err(|e| Error::io(dir.join("elements.csv"), e))?;
        graph
            .write_edges_csv(open("edges.csv")?)
            .map_err(|e| Error::io(dir.join("edges.csv"), e))?;
        Ok(())
    }
}

/// One element per sub-path on `top_layer`, plus `substrate_layers`
/// fictitious copies stacked beneath. All widths start at `w0`.
///
/// Ids are laid out layer by layer from the top: element `k*n + i` is the
/// copy of sub-path `i` at depth `k`.
pub fn build_elements(
    sub_paths: &[SubPath],
    top_layer: i32,
    layer_height: f64,
    w0: f64,
    substrate_layers: usize,
) -> Result<Vec<Element>> {
    if !(layer_height > 0.0) {
        return Err(Error::Validation("layer height must be positive".into()));
    }
    if !(w0 > 0.0) {
        return Err(Error::Validation("initial width must be positive".into()));
    }
    let n = sub_paths.len();
    let mut out = Vec::with_capacity(n * (substrate_layers + 1));
    for depth in 0..=substrate_layers {
        let z = -(depth as f64 + 0.5) * layer_height;
        for (i, sp) in sub_paths.iter().enumerate() {
            let c = sp.midpoint();
            out.push(Element {
                id: depth * n + i,
                sub_path: i,
                vector: sp.vector_id,
                centroid: Point3::new(c.x, c.y, z),
                length: sp.length,
                width: w0,
                height: layer_height,
                direction: sp.direction(),
                layer: top_layer - depth as i32,
                fictitious: sp.fictitious || depth > 0,
            });
        }
    }
    Ok(out)
}

/// Area of intersection of the two top faces.
pub fn overlap_area(a: &Element, b: &Element) -> f64 {
    rect_overlap_area(&a.rect(), &b.rect())
}
