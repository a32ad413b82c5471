//! Toolpath to simulation-ready mesh and contact graph.

use log::{debug, info};
use serde::Deserialize;

use crate::mesh::{
    build_contact_graph, build_elements, init_widths_voronoi, ContactConfig, ContactGraph, GrowthReport, Mesh,
    NeighborSearch, WidthGrowth,
};
use crate::toolpath::{append_fictitious_paths, discretize, SubPath, Toolpath};
use crate::{Error, Result};

/// Geometry settings for turning a toolpath into elements.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// Target sub-path (element) length, m.
    pub element_length: f64,
    /// Initial element width W0, m.
    pub w0: f64,
    /// Overlap area at which width growth stops, m^2.
    pub overlap_threshold: f64,
    pub growth_step: f64,
    /// Width cap; defaults to twice the hatch spacing.
    pub w_max: Option<f64>,
    /// Hatch spacing, m. Also the spacing of fictitious rings.
    pub hatch: f64,
    pub substrate_layers: usize,
    /// Width of the fictitious domain around the scanned region, m.
    pub fictitious_margin: f64,
    /// Connect the bottom layer to the build platform.
    pub platform: bool,
    /// Neighbour search for width growth and contact detection.
    pub search: NeighborSearch,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            element_length: 10e-6,
            w0: 10e-6,
            overlap_threshold: 3e-11,
            growth_step: 1e-6,
            w_max: None,
            hatch: 100e-6,
            substrate_layers: 4,
            fictitious_margin: 0.3e-3,
            platform: true,
            search: NeighborSearch::Grid,
        }
    }
}

impl MeshConfig {
    pub fn growth(&self) -> WidthGrowth {
        let mut g = WidthGrowth::for_hatch(self.hatch);
        g.w0 = self.w0;
        g.overlap_threshold = self.overlap_threshold;
        g.growth_step = self.growth_step;
        g.search = self.search;
        if let Some(w) = self.w_max {
            g.w_max = w;
        }
        g
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("element_length", self.element_length),
            ("w0", self.w0),
            ("overlap_threshold", self.overlap_threshold),
            ("growth_step", self.growth_step),
            ("hatch", self.hatch),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Validation(format!("mesh {name} must be positive")));
        }
        if self.w_max.is_some_and(|w| !(w >= self.w0)) {
            return Err(Error::Validation("w_max must be at least w0".into()));
        }
        if !(self.fictitious_margin >= 0.0) {
            return Err(Error::Validation("fictitious margin must be non-negative".into()));
        }
        Ok(())
    }
}

/// Everything the solver needs, derived from one toolpath.
#[derive(Clone, Debug)]
pub struct Model {
    /// Input toolpath with fictitious rings appended.
    pub toolpath: Toolpath,
    pub sub_paths: Vec<SubPath>,
    pub mesh: Mesh,
    pub graph: ContactGraph,
    pub growth: GrowthReport,
}

impl Model {
    pub fn build(toolpath: &Toolpath, cfg: &MeshConfig) -> Result<Self> {
        cfg.validate()?;
        if toolpath.real_vectors().next().is_none() {
            return Err(Error::Validation("toolpath has no laser vectors".into()));
        }
        let toolpath = with_domain(toolpath, cfg);
        let sub_paths = discretize(&toolpath, cfg.element_length)?;
        let mut elements = build_elements(
            &sub_paths,
            toolpath.layer_index,
            toolpath.layer_height,
            cfg.w0,
            cfg.substrate_layers,
        )?;
        let growth = init_widths_voronoi(&mut elements, &cfg.growth())?;
        debug!(
            "width growth: {} rounds, {} stopped by overlap, {} capped",
            growth.rounds, growth.stopped_by_overlap, growth.capped
        );
        let mesh = Mesh::new(elements, toolpath.layer_height)?;
        let contact = ContactConfig {
            platform: cfg.platform,
            search: cfg.search,
            ..Default::default()
        };
        let graph = build_contact_graph(&mesh, &contact)?;
        info!(
            "model: {} vectors, {} sub-paths, {} elements, {} contacts",
            toolpath.vectors.len(),
            sub_paths.len(),
            mesh.len(),
            graph.edges.len()
        );
        Ok(Model {
            toolpath,
            sub_paths,
            mesh,
            graph,
            growth,
        })
    }

    /// Element count [`Model::build`] would produce, without growing widths
    /// or building the graph.
    pub fn element_count(toolpath: &Toolpath, cfg: &MeshConfig) -> Result<usize> {
        cfg.validate()?;
        let toolpath = with_domain(toolpath, cfg);
        Ok(discretize(&toolpath, cfg.element_length)?.len() * (cfg.substrate_layers + 1))
    }
}

/// Appends the fictitious rings unless the toolpath already brings its own
/// fictitious domain.
fn with_domain(toolpath: &Toolpath, cfg: &MeshConfig) -> Toolpath {
    if toolpath.vectors.iter().any(|v| v.fictitious) {
        debug!("toolpath already has fictitious vectors; margin ignored");
        toolpath.clone()
    } else {
        append_fictitious_paths(toolpath, cfg.fictitious_margin, cfg.hatch)
    }
}
