//! Contact graph: which elements exchange heat and through what geometry.

use std::io::Write;

use super::grid::{candidate_pairs, NeighborSearch};
use super::{Element, Mesh};
use crate::geom::{line_angle, rect_overlap_area, Aabb};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ContactKind {
    /// Consecutive sub-paths of one vector.
    InPath,
    /// Same layer, touching or overlapping top faces.
    Side,
    /// Vertically stacked, overlapping footprints.
    InterLayer,
    /// Bottom layer to the fixed-temperature build platform.
    Platform,
}

impl ContactKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ContactKind::InPath => "in-path",
            ContactKind::Side => "side",
            ContactKind::InterLayer => "inter-layer",
            ContactKind::Platform => "platform",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactEdge {
    pub i: usize,
    /// Element id, or [`ContactGraph::platform_node`] for platform edges.
    pub j: usize,
    /// m^2
    pub area: f64,
    /// Centroid distance, m.
    pub distance: f64,
    /// Angle between scan directions, radians in `[0, pi/2]`.
    pub angle: f64,
    pub kind: ContactKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactConfig {
    pub platform: bool,
    pub search: NeighborSearch,
    /// Below this crossing angle side contacts are treated as face-to-face.
    pub theta_parallel: f64,
    /// Gap (m) under which two faces count as touching.
    pub touch_tolerance: f64,
}

impl Default for ContactConfig {
    fn default() -> Self {
        ContactConfig {
            platform: true,
            search: NeighborSearch::Grid,
            theta_parallel: 10f64.to_radians(),
            touch_tolerance: 1e-9,
        }
    }
}

/// Undirected contact graph in CSR form. Element-element edges appear in
/// both endpoints' adjacency; platform edges only in the element's.
#[derive(Clone, Debug)]
pub struct ContactGraph {
    pub edges: Vec<ContactEdge>,
    element_count: usize,
    offsets: Vec<usize>,
    /// (neighbor node, edge index)
    adjacency: Vec<(usize, usize)>,
}

impl ContactGraph {
    pub fn from_edges(element_count: usize, edges: Vec<ContactEdge>) -> Self {
        let mut degree = vec![0usize; element_count + 1];
        for e in &edges {
            degree[e.i + 1] += 1;
            if e.kind != ContactKind::Platform {
                degree[e.j + 1] += 1;
            }
        }
        for k in 1..degree.len() {
            degree[k] += degree[k - 1];
        }
        let offsets = degree;
        let mut cursor = offsets.clone();
        let mut adjacency = vec![(0, 0); *offsets.last().unwrap_or(&0)];
        for (k, e) in edges.iter().enumerate() {
            adjacency[cursor[e.i]] = (e.j, k);
            cursor[e.i] += 1;
            if e.kind != ContactKind::Platform {
                adjacency[cursor[e.j]] = (e.i, k);
                cursor[e.j] += 1;
            }
        }
        ContactGraph {
            edges,
            element_count,
            offsets,
            adjacency,
        }
    }

    pub fn element_count(&self) -> usize {
        self.element_count
    }

    /// Virtual node id of the build platform.
    pub fn platform_node(&self) -> usize {
        self.element_count
    }

    /// `(neighbor node, edge index)` pairs of element `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn edge_between(&self, i: usize, j: usize) -> Option<&ContactEdge> {
        self.neighbors(i).iter().find(|(n, _)| *n == j).map(|&(_, k)| &self.edges[k])
    }

    pub fn count(&self, kind: ContactKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    /// Edge CSV: `i,j,kind,area,dist,theta`. Platform edges use `j = -1`.
    pub fn write_edges_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j,kind,area,dist,theta")?;
        for e in &self.edges {
            let j = if e.kind == ContactKind::Platform {
                -1
            } else {
                e.j as i64
            };
            writeln!(w, "{},{},{},{},{},{}", e.i, j, e.kind.as_str(), e.area, e.distance, e.angle)?;
        }
        Ok(())
    }
}

/// Contact area between two elements for a given contact kind.
///
/// * in-path: cross-section `W*H` of the downstream element;
/// * side, crossing (`theta >= theta_parallel`): `min(W_i H_i, W_j H_j) / sin theta`;
/// * side, near-parallel: shared edge length times `H`;
/// * inter-layer: overlap of the facing footprints;
/// * platform: footprint `L*W` of `ei` (`ej` is ignored).
pub fn contact_area(ei: &Element, ej: &Element, kind: ContactKind, theta_parallel: f64) -> Result<f64> {
    let area = match kind {
        ContactKind::InPath => {
            let downstream = if ej.sub_path > ei.sub_path { ej } else { ei };
            downstream.cross_section()
        }
        ContactKind::Side => {
            if !ei.rect().intersects(&ej.rect(), 1e-9) {
                return Err(Error::Geometry(format!("elements {} and {} do not touch", ei.id, ej.id)));
            }
            let theta = line_angle(ei.direction, ej.direction);
            if theta >= theta_parallel {
                ei.cross_section().min(ej.cross_section()) / theta.sin()
            } else {
                shared_length(ei, ej) * ei.height.min(ej.height)
            }
        }
        ContactKind::InterLayer => rect_overlap_area(&ei.rect(), &ej.rect()),
        ContactKind::Platform => ei.top_area(),
    };
    if area > 0.0 && area.is_finite() {
        Ok(area)
    } else {
        Err(Error::Geometry(format!(
            "elements {} and {} share no {} contact",
            ei.id,
            ej.id,
            kind.as_str()
        )))
    }
}

/// Overlap of the two elements' extents along `ei`'s scan axis.
fn shared_length(ei: &Element, ej: &Element) -> f64 {
    let axis = ei.direction;
    let ci = ei.centroid.xy().dot(axis);
    let cj = ej.centroid.xy().dot(axis);
    let half_j = 0.5 * (ej.length * ej.direction.dot(axis).abs() + ej.width * ej.direction.perp().dot(axis).abs());
    let lo = (ci - 0.5 * ei.length).max(cj - half_j);
    let hi = (ci + 0.5 * ei.length).min(cj + half_j);
    (hi - lo).max(0.0)
}

/// Builds in-path, side, inter-layer and (optionally) platform edges.
///
/// Pairs whose geometry yields no positive contact area (for example two
/// parallel elements meeting only at a corner) get no edge.
pub fn build_contact_graph(mesh: &Mesh, cfg: &ContactConfig) -> Result<ContactGraph> {
    let els = &mesh.elements;
    let n = els.len();
    let mut edges = Vec::new();

    let push = |i: usize, j: usize, kind: ContactKind, edges: &mut Vec<ContactEdge>| {
        let (ei, ej) = (&els[i], &els[j]);
        if let Ok(area) = contact_area(ei, ej, kind, cfg.theta_parallel) {
            let distance = ei.centroid.distance(ej.centroid);
            if distance > 0.0 {
                edges.push(ContactEdge {
                    i,
                    j,
                    area,
                    distance,
                    angle: line_angle(ei.direction, ej.direction),
                    kind,
                });
            }
        }
    };

    // In-path: consecutive sub-paths of the same vector on the same layer.
    // Elements of one layer are laid out in sub-path order.
    let mut in_path = std::collections::HashSet::new();
    for i in 1..n {
        let (a, b) = (&els[i - 1], &els[i]);
        if a.layer == b.layer && a.vector == b.vector && b.sub_path == a.sub_path + 1 {
            push(i - 1, i, ContactKind::InPath, &mut edges);
            in_path.insert((i - 1, i));
        }
    }

    let boxes: Vec<Aabb> = els.iter().map(|e| e.rect().aabb().inflate(cfg.touch_tolerance)).collect();
    for (i, j) in candidate_pairs(&boxes, cfg.search) {
        let (ei, ej) = (&els[i], &els[j]);
        if ei.layer == ej.layer {
            if !in_path.contains(&(i, j)) && ei.rect().intersects(&ej.rect(), cfg.touch_tolerance) {
                push(i, j, ContactKind::Side, &mut edges);
            }
        } else if (ei.layer - ej.layer).abs() == 1 {
            let area = rect_overlap_area(&ei.rect(), &ej.rect());
            // Ignore slivers from round-off.
            if area > 1e-9 * ei.top_area().min(ej.top_area()) {
                push(i, j, ContactKind::InterLayer, &mut edges);
            }
        }
    }

    if cfg.platform {
        for (i, e) in els.iter().enumerate() {
            if mesh.is_bottom(i) {
                edges.push(ContactEdge {
                    i,
                    j: n,
                    area: e.top_area(),
                    distance: 0.5 * e.height,
                    angle: 0.0,
                    kind: ContactKind::Platform,
                });
            }
        }
    }
    Ok(ContactGraph::from_edges(n, edges))
}
