//! Active-body bookkeeping: which elements a step updates.

use crate::geom::{Aabb, Vec2};
use crate::mesh::{ContactGraph, Mesh, SpatialGrid};

/// Elements whose centroid lies within `radius` (in plan) of `laser`, or
/// hotter than `hot_threshold`, plus every graph neighbor of those. Sorted.
///
/// Brute-force reference for [`ActiveBody`]; O(N).
pub fn active_body(
    mesh: &Mesh,
    graph: &ContactGraph,
    temperatures: &[f64],
    laser: Vec2,
    radius: f64,
    hot_threshold: f64,
) -> Vec<usize> {
    let n = mesh.len();
    let mut member = vec![false; n];
    for (i, e) in mesh.elements.iter().enumerate() {
        if e.centroid.xy().distance(laser) <= radius || temperatures[i] > hot_threshold {
            member[i] = true;
        }
    }
    let core: Vec<usize> = (0..n).filter(|&i| member[i]).collect();
    for i in core {
        for &(j, _) in graph.neighbors(i) {
            if j < n {
                member[j] = true;
            }
        }
    }
    (0..n).filter(|&i| member[i]).collect()
}

/// Incremental active-body tracker. Per-step cost is proportional to the
/// size of the body, not of the mesh.
#[derive(Clone, Debug)]
pub struct ActiveBody {
    grid: SpatialGrid,
    dense: bool,
    stamp: Vec<u32>,
    generation: u32,
    hot: Vec<bool>,
    hot_list: Vec<usize>,
    members: Vec<usize>,
    scratch: Vec<u32>,
}

impl ActiveBody {
    /// With `dense` every element is always active.
    pub fn new(mesh: &Mesh, temperatures: &[f64], hot_threshold: f64, radius: f64, dense: bool) -> Self {
        let n = mesh.len();
        let points: Vec<Aabb> = if dense {
            Vec::new()
        } else {
            mesh.elements
                .iter()
                .map(|e| Aabb {
                    min: e.centroid.xy(),
                    max: e.centroid.xy(),
                })
                .collect()
        };
        let cell = if radius.is_finite() && radius > 0.0 { radius } else { 0.0 };
        let hot: Vec<bool> = temperatures.iter().map(|&t| t > hot_threshold).collect();
        let hot_list = (0..n).filter(|&i| hot[i]).collect();
        ActiveBody {
            grid: SpatialGrid::new(&points, cell),
            dense,
            stamp: vec![0; n],
            generation: 0,
            hot,
            hot_list,
            members: if dense { (0..n).collect() } else { Vec::new() },
            scratch: Vec::new(),
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn hot_count(&self) -> usize {
        self.hot_list.len()
    }

    fn mark(&mut self, i: usize) -> bool {
        if self.stamp[i] == self.generation {
            false
        } else {
            self.stamp[i] = self.generation;
            true
        }
    }

    /// Recomputes the body around `laser`.
    pub fn update(&mut self, mesh: &Mesh, graph: &ContactGraph, laser: Vec2, radius: f64) -> &[usize] {
        if self.dense {
            return &self.members;
        }
        if radius.is_infinite() {
            self.members.clear();
            self.members.extend(0..mesh.len());
            return &self.members;
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        self.members.clear();
        self.scratch.clear();
        let query = Aabb {
            min: laser - Vec2::new(radius, radius),
            max: laser + Vec2::new(radius, radius),
        };
        let mut found = std::mem::take(&mut self.scratch);
        self.grid.query_into(query, &mut found);
        for &i in &found {
            let i = i as usize;
            if mesh.elements[i].centroid.xy().distance(laser) <= radius && self.mark(i) {
                self.members.push(i);
            }
        }
        self.scratch = found;
        for k in 0..self.hot_list.len() {
            let i = self.hot_list[k];
            if self.mark(i) {
                self.members.push(i);
            }
        }
        let core = self.members.len();
        let n = mesh.len();
        for k in 0..core {
            let i = self.members[k];
            for &(j, _) in graph.neighbors(i) {
                if j < n && self.mark(j) {
                    self.members.push(j);
                }
            }
        }
        self.members.sort_unstable();
        &self.members
    }

    /// Re-evaluates the hot flag of the current members after a step.
    pub fn refresh_hot(&mut self, temperatures: &[f64], hot_threshold: f64) {
        let mut removed = false;
        for &i in &self.members {
            let now = temperatures[i] > hot_threshold;
            if now != self.hot[i] {
                self.hot[i] = now;
                if now {
                    self.hot_list.push(i);
                } else {
                    removed = true;
                }
            }
        }
        if removed {
            let hot = &self.hot;
            self.hot_list.retain(|&i| hot[i]);
        }
    }
}
