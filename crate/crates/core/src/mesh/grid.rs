//! Uniform grid over axis-aligned boxes for neighbor queries.

use crate::geom::{Aabb, Vec2};

/// How candidate neighbor pairs are found.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborSearch {
    /// Uniform grid with cell size equal to the largest box extent.
    #[default]
    Grid,
    /// Every pair is tested. Quadratic; used as an oracle and dense baseline.
    BruteForce,
}

/// Uniform grid storing item ids in every cell their box touches (CSR layout).
#[derive(Clone, Debug)]
pub struct SpatialGrid {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    offsets: Vec<u32>,
    items: Vec<u32>,
}

impl SpatialGrid {
    /// Builds a grid over `boxes`. `cell_size <= 0` picks the largest box extent.
    pub fn new(boxes: &[Aabb], cell_size: f64) -> Self {
        let Some(bounds) = boxes.iter().copied().reduce(Aabb::union) else {
            return SpatialGrid {
                origin: Vec2::ZERO,
                cell: 1.0,
                nx: 1,
                ny: 1,
                offsets: vec![0, 0],
                items: Vec::new(),
            };
        };
        let mut cell = if cell_size > 0.0 {
            cell_size
        } else {
            boxes.iter().map(|b| b.width().max(b.height())).fold(0.0, f64::max)
        };
        let span = bounds.width().max(bounds.height());
        if !(cell > 0.0) {
            cell = if span > 0.0 { span } else { 1.0 };
        }
        // Keep the cell table proportional to the item count.
        let max_cells = (4 * boxes.len()).max(16) as f64;
        let est = ((bounds.width() / cell).ceil() + 1.0) * ((bounds.height() / cell).ceil() + 1.0);
        if est > max_cells {
            cell *= (est / max_cells).sqrt();
        }
        let nx = (bounds.width() / cell).floor() as usize + 1;
        let ny = (bounds.height() / cell).floor() as usize + 1;
        let mut grid = SpatialGrid {
            origin: bounds.min,
            cell,
            nx,
            ny,
            offsets: vec![0; nx * ny + 1],
            items: Vec::new(),
        };
        for b in boxes {
            let (x0, y0, x1, y1) = grid.cell_range(*b);
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    grid.offsets[cy * nx + cx + 1] += 1;
                }
            }
        }
        for k in 1..grid.offsets.len() {
            grid.offsets[k] += grid.offsets[k - 1];
        }
        let mut cursor = grid.offsets.clone();
        grid.items = vec![0; *grid.offsets.last().unwrap() as usize];
        for (id, b) in boxes.iter().enumerate() {
            let (x0, y0, x1, y1) = grid.cell_range(*b);
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    let c = cy * nx + cx;
                    grid.items[cursor[c] as usize] = id as u32;
                    cursor[c] += 1;
                }
            }
        }
        grid
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn clamp_cell(&self, v: f64, n: usize) -> usize {
        if v <= 0.0 {
            0
        } else {
            (v.floor() as usize).min(n - 1)
        }
    }

    fn cell_range(&self, b: Aabb) -> (usize, usize, usize, usize) {
        let f = |p: Vec2| ((p.x - self.origin.x) / self.cell, (p.y - self.origin.y) / self.cell);
        let (ax, ay) = f(b.min);
        let (bx, by) = f(b.max);
        (
            self.clamp_cell(ax, self.nx),
            self.clamp_cell(ay, self.ny),
            self.clamp_cell(bx, self.nx),
            self.clamp_cell(by, self.ny),
        )
    }

    /// Appends the ids of items whose cells meet `query` (with duplicates
    /// removed, sorted ascending).
    pub fn query_into(&self, query: Aabb, out: &mut Vec<u32>) {
        let start = out.len();
        let (x0, y0, x1, y1) = self.cell_range(query);
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                let c = cy * self.nx + cx;
                out.extend_from_slice(&self.items[self.offsets[c] as usize..self.offsets[c + 1] as usize]);
            }
        }
        out[start..].sort_unstable();
        let mut w = start;
        for r in start..out.len() {
            if w == start || out[r] != out[w - 1] {
                out[w] = out[r];
                w += 1;
            }
        }
        out.truncate(w);
    }
}

/// All pairs `(i, j)`, `i < j`, whose boxes intersect, sorted.
pub fn candidate_pairs(boxes: &[Aabb], search: NeighborSearch) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    match search {
        NeighborSearch::BruteForce => {
            for i in 0..boxes.len() {
                for j in i + 1..boxes.len() {
                    if boxes[i].intersects(boxes[j]) {
                        pairs.push((i, j));
                    }
                }
            }
        }
        NeighborSearch::Grid => {
            let grid = SpatialGrid::new(boxes, 0.0);
            let mut buf = Vec::new();
            for (i, b) in boxes.iter().enumerate() {
                buf.clear();
                grid.query_into(*b, &mut buf);
                pairs.extend(
                    buf.iter()
                        .map(|&j| j as usize)
                        .filter(|&j| j > i && b.intersects(boxes[j]))
                        .map(|j| (i, j)),
                );
            }
        }
    }
    pairs
}
