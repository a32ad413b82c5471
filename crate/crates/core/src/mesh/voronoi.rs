//! Simultaneous width growth of elements.
//!
//! All elements start at `w0` and widen together, symmetrically about their
//! path axis, by `growth_step` per round. An element whose summed top-face
//! overlap with the other elements of its layer exceeds the threshold after a
//! round takes back that round's increment and stops; an element reaching
//! `w_max` stops there. The resulting cells approximate the Voronoi diagram
//! whose sites are the path segments.

use super::grid::{candidate_pairs, NeighborSearch};
use super::Element;
use crate::geom::{rect_overlap_area, Aabb};
use crate::{par, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WidthGrowth {
    /// Initial width, m.
    pub w0: f64,
    /// Overlap area at which an element stops growing, m^2.
    pub overlap_threshold: f64,
    /// Width increment per round, m.
    pub growth_step: f64,
    /// Width cap for elements with open sides, m.
    pub w_max: f64,
    pub search: NeighborSearch,
}

impl Default for WidthGrowth {
    fn default() -> Self {
        WidthGrowth {
            w0: 10e-6,
            overlap_threshold: 3e-11,
            growth_step: 1e-6,
            w_max: 200e-6,
            search: NeighborSearch::Grid,
        }
    }
}

impl WidthGrowth {
    /// Defaults with the width cap at twice the hatch spacing.
    pub fn for_hatch(hatch: f64) -> Self {
        WidthGrowth {
            w_max: 2.0 * hatch,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GrowthReport {
    pub rounds: usize,
    /// Elements stopped by the overlap threshold.
    pub stopped_by_overlap: usize,
    /// Elements that reached `w_max`.
    pub capped: usize,
}

/// Grows element widths in place. Layers are processed independently.
pub fn init_widths_voronoi(elements: &mut [Element], cfg: &WidthGrowth) -> Result<GrowthReport> {
    if !(cfg.growth_step > 0.0) {
        return Err(Error::Validation("growth step must be positive".into()));
    }
    if !(cfg.w0 > 0.0 && cfg.overlap_threshold > 0.0) {
        return Err(Error::Validation("initial width and overlap threshold must be positive".into()));
    }
    if cfg.w_max < cfg.w0 {
        return Err(Error::Validation("width cap is below the initial width".into()));
    }
    let mut layers: Vec<i32> = elements.iter().map(|e| e.layer).collect();
    layers.sort_unstable();
    layers.dedup();

    let mut report = GrowthReport::default();
    for layer in layers {
        let ids: Vec<usize> = (0..elements.len()).filter(|&i| elements[i].layer == layer).collect();
        let mut group: Vec<Element> = ids.iter().map(|&i| elements[i].clone()).collect();
        let r = grow_layer(&mut group, cfg);
        report.rounds = report.rounds.max(r.rounds);
        report.stopped_by_overlap += r.stopped_by_overlap;
        report.capped += r.capped;
        for (k, &i) in ids.iter().enumerate() {
            elements[i].width = group[k].width;
        }
    }
    Ok(report)
}

fn grow_layer(els: &mut [Element], cfg: &WidthGrowth) -> GrowthReport {
    let n = els.len();
    for e in els.iter_mut() {
        e.width = cfg.w0;
    }
    // Anything an element can ever touch lies within its footprint at w_max.
    let boxes: Vec<Aabb> = els.iter().map(|e| e.rect_with_width(cfg.w_max).aabb()).collect();
    let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, j) in candidate_pairs(&boxes, cfg.search) {
        neighbors[i].push(j as u32);
        neighbors[j].push(i as u32);
    }

    let mut widths = vec![cfg.w0; n];
    let mut growing: Vec<usize> = (0..n).collect();
    let mut report = GrowthReport::default();
    let cap_tol = 1e-9 * cfg.growth_step;
    if cfg.w_max - cfg.w0 <= cap_tol {
        report.capped = n;
        return report;
    }

    while !growing.is_empty() {
        report.rounds += 1;
        let mut trial = widths.clone();
        for &i in &growing {
            trial[i] = (widths[i] + cfg.growth_step).min(cfg.w_max);
        }
        let totals = par::map(&growing, |&i| {
            let r = els[i].rect_with_width(trial[i]);
            neighbors[i]
                .iter()
                .map(|&j| rect_overlap_area(&r, &els[j as usize].rect_with_width(trial[j as usize])))
                .sum::<f64>()
        });
        let mut still = Vec::with_capacity(growing.len());
        for (&i, &total) in growing.iter().zip(&totals) {
            if total > cfg.overlap_threshold {
                report.stopped_by_overlap += 1;
            } else if trial[i] >= cfg.w_max - cap_tol {
                widths[i] = cfg.w_max;
                report.capped += 1;
            } else {
                widths[i] = trial[i];
                still.push(i);
            }
        }
        growing = still;
    }
    for (e, w) in els.iter_mut().zip(widths) {
        e.width = w;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_elements, overlap_area};
    use crate::toolpath::{discretize, parse_toolpath};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn parallel_vectors(count: usize, hatch: f64, len: f64) -> Vec<Element> {
        let mut src = String::from("P p (0,195)\n");
        for k in 0..count {
            let y = k as f64 * hatch;
            src.push_str(&format!("V 0 {y} {len} {y} 0.8 p\n"));
        }
        let tp = parse_toolpath(src.as_bytes()).unwrap();
        build_elements(&discretize(&tp, 10e-6).unwrap(), 0, 40e-6, 10e-6, 0).unwrap()
    }

    #[test]
    fn rejects_non_positive_step() {
        let mut els = parallel_vectors(1, 1e-4, 1e-4);
        let cfg = WidthGrowth {
            growth_step: 0.0,
            ..Default::default()
        };
        assert!(init_widths_voronoi(&mut els, &cfg).is_err());
    }

    #[test]
    fn isolated_vector_reaches_cap() {
        let mut els = parallel_vectors(1, 1e-4, 5e-4);
        let cfg = WidthGrowth::for_hatch(100e-6);
        let r = init_widths_voronoi(&mut els, &cfg).unwrap();
        assert!(els.iter().all(|e| e.width == 200e-6));
        assert_eq!(r.capped, els.len());
    }

    /// The Voronoi cell of the middle of three parallel lines at spacing h is
    /// a strip of width h.
    #[test]
    fn middle_of_three_parallel_vectors_converges_to_hatch() {
        let hatch = 100e-6;
        let mut els = parallel_vectors(3, hatch, 1e-3);
        let cfg = WidthGrowth::for_hatch(hatch);
        init_widths_voronoi(&mut els, &cfg).unwrap();
        let middle: Vec<&Element> = els.iter().filter(|e| e.vector == 1).collect();
        assert_eq!(middle.len(), 100);
        for e in &middle {
            assert!((e.width - hatch).abs() <= cfg.growth_step + 1e-12, "width {}", e.width);
        }
        for e in &els {
            assert!(e.width >= cfg.w0 && e.width <= cfg.w_max);
        }
        // Pairwise overlap stays below the threshold plus one step's growth.
        let step_increment = cfg.growth_step * 10e-6;
        for a in &els {
            for b in &els {
                if a.id < b.id {
                    assert!(overlap_area(a, b) <= cfg.overlap_threshold + step_increment);
                }
            }
        }
    }

    #[test]
    fn grid_and_brute_force_agree() {
        let mut a = parallel_vectors(3, 100e-6, 3e-4);
        let mut b = a.clone();
        let cfg = WidthGrowth::for_hatch(100e-6);
        init_widths_voronoi(&mut a, &cfg).unwrap();
        init_widths_voronoi(
            &mut b,
            &WidthGrowth {
                search: NeighborSearch::BruteForce,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn widths_do_not_depend_on_element_order(seed in 0u64..1000, count in 2usize..4) {
            let mut els = parallel_vectors(count, 80e-6 + (seed % 7) as f64 * 5e-6, 1.5e-4);
            // A crossing vector through the middle.
            let extra = parallel_vectors(1, 0.0, 2e-4);
            let base = els.len();
            for (k, mut e) in extra.into_iter().enumerate() {
                e.direction = crate::geom::Vec2::new(0.0, 1.0);
                e.centroid.x = 7e-5;
                e.centroid.y = -5e-5 + (k as f64 + 0.5) * 10e-6;
                e.id = base + k;
                e.vector = 99;
                els.push(e);
            }
            let cfg = WidthGrowth::for_hatch(100e-6);
            let mut forward = els.clone();
            init_widths_voronoi(&mut forward, &cfg).unwrap();

            // Deterministic shuffle.
            let mut perm: Vec<usize> = (0..els.len()).collect();
            let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            for i in (1..perm.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let mut shuffled: Vec<Element> = perm.iter().map(|&i| els[i].clone()).collect();
            init_widths_voronoi(&mut shuffled, &cfg).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                assert_relative_eq!(shuffled[k].width, forward[i].width, max_relative = 1e-12);
            }
        }
    }
}
