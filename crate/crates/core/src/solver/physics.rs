//! Per-element heat balance terms.
//!
//! All fluxes are in watts and signed as heat flowing *into* the element.

use crate::geom::{Rect, Vec2};
use crate::materials::Material;
use crate::mesh::{ContactEdge, Element};

/// W/(m^2 K^4)
pub const STEFAN_BOLTZMANN: f64 = 5.670374419e-8;

const GAUSS_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Beyond this many spot radii from the footprint the beam is ignored
/// (the intensity is below `exp(-72)` of the peak).
pub const LASER_CUTOFF_RADII: f64 = 6.0;

/// Composite 3-point Gauss-Legendre integral over `[a, b]` of the 1D
/// normalized Gaussian `sqrt(2/pi)/w * exp(-2 (x - mu)^2 / w^2)`, with
/// panels no wider than `w / 2`.
fn gaussian_1d(a: f64, b: f64, mu: f64, w: f64) -> f64 {
    let panels = ((b - a) / (0.5 * w)).ceil().max(1.0) as usize;
    let h = (b - a) / panels as f64;
    let norm = (2.0 / std::f64::consts::PI).sqrt() / w;
    let mut total = 0.0;
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * h;
        for (x, wt) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            let s = c + 0.5 * h * x - mu;
            total += wt * (-2.0 * s * s / (w * w)).exp();
        }
    }
    total * 0.5 * h * norm
}

/// Fraction of a Gaussian beam of `1/e^2` radius `w` centered at `laser`
/// that falls on `rect`.
///
/// The intensity `2/(pi w^2) exp(-2 r^2 / w^2)` factors along the rectangle's
/// own axes, so the tensor-product 3x3 Gauss rule over each panel reduces to
/// two 1D composite rules.
pub fn beam_fraction(rect: &Rect, laser: Vec2, w: f64) -> f64 {
    if rect.distance_to(laser) > LASER_CUTOFF_RADII * w {
        return 0.0;
    }
    let rel = laser - rect.center;
    let lu = rel.dot(rect.dir);
    let lv = rel.dot(rect.dir.perp());
    let (hl, hw) = (0.5 * rect.length, 0.5 * rect.width);
    gaussian_1d(-hl, hl, lu, w) * gaussian_1d(-hw, hw, lv, w)
}

/// Beer-Lambert split of absorbed energy over a stack of `layers` layers of
/// thickness `layer_height`: layer `k` (0 = top) receives a share
/// proportional to `(1 - exp(-H/delta)) exp(-k H/delta)`, normalized so
/// the shares sum to one.
pub fn layer_fractions(layers: usize, layer_height: f64, delta: f64) -> Vec<f64> {
    if layers == 0 {
        return Vec::new();
    }
    let decay = (-layer_height / delta).exp();
    let raw: Vec<f64> = (0..layers).map(|k| (1.0 - decay) * decay.powi(k as i32)).collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|f| f / total).collect()
    } else {
        // delta -> 0: everything in the top layer.
        let mut v = vec![0.0; layers];
        v[0] = 1.0;
        v
    }
}

/// Absorbed laser power deposited in `e`, W.
pub fn laser_input(e: &Element, laser: Vec2, power: f64, alpha: f64, spot_radius: f64, layer_fraction: f64) -> f64 {
    alpha * power * beam_fraction(&e.rect(), laser, spot_radius) * layer_fraction
}

/// Rescales `inputs` in place so they sum to `absorbed` (= alpha P) and
/// returns the scale factor.
///
/// Returns `None` if the inputs sum to zero while `absorbed > 0`: the laser
/// lights no element. With `absorbed == 0` all inputs are zeroed and the
/// scale is 1.
pub fn normalize_power(inputs: &mut [f64], absorbed: f64) -> Option<f64> {
    if absorbed <= 0.0 {
        inputs.iter_mut().for_each(|h| *h = 0.0);
        return Some(1.0);
    }
    let total: f64 = inputs.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let scale = absorbed / total;
    inputs.iter_mut().for_each(|h| *h *= scale);
    Some(scale)
}

/// `k A (T_j - T_i) / max(d0, d)`.
#[inline]
pub fn conductive_flux(k: f64, area: f64, distance: f64, d0: f64, t_i: f64, t_j: f64) -> f64 {
    k * area * (t_j - t_i) / distance.max(d0)
}

/// Heat into `t_i`'s side of `edge`, with conductivity taken at the mean of
/// the two temperatures.
#[inline]
pub fn conduction_flux(edge: &ContactEdge, t_i: f64, t_j: f64, material: &Material, d0: f64) -> f64 {
    let k = material.conductivity(0.5 * (t_i + t_j));
    conductive_flux(k, edge.area, edge.distance, d0, t_i, t_j)
}

/// `-h A_top (T - T_env)`, zero for a buried element.
#[inline]
pub fn convection_flux(top_area: f64, exposed: bool, t: f64, material: &Material) -> f64 {
    if exposed {
        -material.convection_h * top_area * (t - material.t_env)
    } else {
        0.0
    }
}

/// `-eps sigma A_top (T^4 - T_env^4)`, zero for a buried element.
#[inline]
pub fn radiation_flux(top_area: f64, exposed: bool, t: f64, emissivity: f64, t_env: f64) -> f64 {
    if exposed {
        -emissivity * STEFAN_BOLTZMANN * top_area * (t.powi(4) - t_env.powi(4))
    } else {
        0.0
    }
}

/// Largest forward-Euler step for which an element with heat capacity
/// `capacity` (J/K) and total linearized conductance `conductance` (W/K)
/// stays within the explicit stability limit, scaled by `safety`.
/// An isolated element is unconstrained (`f64::MAX`).
#[inline]
pub fn stability_dt(capacity: f64, conductance: f64, safety: f64) -> f64 {
    if conductance > 0.0 {
        safety * capacity / conductance
    } else {
        f64::MAX
    }
}

/// Biot numbers `h L / k` with the element length and width as the
/// characteristic lengths. Values above 0.1 are logged.
pub fn biot_number(e: &Element, h: f64, k: f64) -> (f64, f64) {
    let bi = (h * e.length / k, h * e.width / k);
    if bi.0.max(bi.1) > 0.1 {
        log::warn!(
            "element {}: Biot number {:.3e} exceeds 0.1; lumped temperatures are questionable",
            e.id,
            bi.0.max(bi.1)
        );
    }
    bi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;
    use crate::mesh::ContactKind;
    use approx::assert_relative_eq;

    fn element(l: f64, w: f64) -> Element {
        Element {
            id: 0,
            sub_path: 0,
            vector: 0,
            centroid: Point3::new(0.0, 0.0, -20e-6),
            length: l,
            width: w,
            height: 40e-6,
            direction: Vec2::new(1.0, 0.0),
            layer: 0,
            fictitious: false,
        }
    }

    fn edge(area: f64, distance: f64) -> ContactEdge {
        ContactEdge {
            i: 0,
            j: 1,
            area,
            distance,
            angle: 0.0,
            kind: ContactKind::InPath,
        }
    }

    #[test]
    fn full_capture_gives_absorbed_power() {
        let e = element(2e-3, 2e-3);
        let h = laser_input(&e, Vec2::ZERO, 195.0, 0.43, 42.5e-6, 1.0);
        assert_relative_eq!(h, 83.85, max_relative = 1e-6);
    }

    #[test]
    fn far_laser_contributes_nothing() {
        let e = element(10e-6, 100e-6);
        let w = 42.5e-6;
        let h = laser_input(&e, Vec2::new(5.0 * w, 0.0), 195.0, 0.43, w, 1.0);
        assert!(h < 1e-6 * 0.43 * 195.0);
    }

    #[test]
    fn quadrature_converges_on_half_plane() {
        // Half of the beam falls on a large rectangle whose edge passes
        // through the beam axis.
        let mut e = element(2e-3, 2e-3);
        e.centroid.x = 1e-3;
        let f = beam_fraction(&e.rect(), Vec2::ZERO, 42.5e-6);
        assert_relative_eq!(f, 0.5, max_relative = 1e-6);
        // A thin strip, against a fine 2D midpoint rule.
        let strip = element(10e-6, 100e-6);
        let laser = Vec2::new(13e-6, -7e-6);
        let w = 42.5e-6;
        let coarse = beam_fraction(&strip.rect(), laser, w);
        let (nu, nv) = (100, 1000);
        let (hu, hv) = (10e-6 / nu as f64, 100e-6 / nv as f64);
        let mut fine = 0.0;
        for a in 0..nu {
            for b in 0..nv {
                let x = -5e-6 + (a as f64 + 0.5) * hu - laser.x;
                let y = -50e-6 + (b as f64 + 0.5) * hv - laser.y;
                fine += 2.0 / (std::f64::consts::PI * w * w) * (-2.0 * (x * x + y * y) / (w * w)).exp() * hu * hv;
            }
        }
        assert_relative_eq!(coarse, fine, max_relative = 1e-5);
    }

    #[test]
    fn layer_fractions_sum_to_one() {
        let f = layer_fractions(5, 40e-6, 40e-6);
        assert_relative_eq!(f.iter().sum::<f64>(), 1.0, max_relative = 1e-14);
        assert!(f[0] > 0.63);
        assert!(f.windows(2).all(|p| p[0] > p[1]));
        let f = layer_fractions(3, 40e-6, 1e-12);
        assert_eq!(f, vec![1.0, 0.0, 0.0]);
        assert_eq!(layer_fractions(1, 40e-6, 40e-6), vec![1.0]);
    }

    #[test]
    fn normalization() {
        let target = 0.43 * 195.0;
        let mut h = vec![target * 0.5, target * 0.5];
        assert_eq!(normalize_power(&mut h, target), Some(1.0));
        let mut h = vec![0.4 * target, 0.7 * target];
        let s = normalize_power(&mut h, target).unwrap();
        assert_relative_eq!(s, 1.0 / 1.1, max_relative = 1e-14);
        assert_relative_eq!(h.iter().sum::<f64>(), target, max_relative = 1e-14);
        let mut h = vec![1.0, 2.0];
        assert_eq!(normalize_power(&mut h, 0.0), Some(1.0));
        assert_eq!(h, vec![0.0, 0.0]);
        assert_eq!(normalize_power(&mut [0.0, 0.0], target), None);
    }

    #[test]
    fn capped_conduction() {
        let d0 = 10e-6;
        assert_relative_eq!(conductive_flux(20.0, 1e-9, 5e-6, d0, 0.0, 100.0), 0.2, max_relative = 1e-12);
        assert_relative_eq!(conductive_flux(20.0, 1e-9, 50e-6, d0, 0.0, 100.0), 0.04, max_relative = 1e-12);
        assert_eq!(conductive_flux(20.0, 1e-9, 50e-6, d0, 500.0, 500.0), 0.0);
        let m = Material::in625();
        for d in [1e-7, 3e-6, 9.999e-6, 10e-6] {
            assert_eq!(
                conduction_flux(&edge(1e-9, d), 400.0, 900.0, &m, d0),
                conduction_flux(&edge(1e-9, d0), 400.0, 900.0, &m, d0)
            );
        }
        for (a, b) in [(300.0, 1700.0), (1563.0, 1600.0), (293.0, 293.5)] {
            let e = edge(3.3e-10, 7e-6);
            assert_eq!(conduction_flux(&e, a, b, &m, d0), -conduction_flux(&e, b, a, &m, d0));
        }
    }

    #[test]
    fn surface_losses() {
        let m = Material::in625();
        assert_eq!(convection_flux(1e-9, true, m.t_env, &m), 0.0);
        assert_relative_eq!(convection_flux(1e-9, true, m.t_env + 1000.0, &m), -1e-5, max_relative = 1e-12);
        assert_eq!(convection_flux(1e-9, false, 2000.0, &m), 0.0);
        assert_eq!(radiation_flux(1e-9, true, 293.0, 0.3, 293.0), 0.0);
        let q = radiation_flux(1e-9, true, 1623.0, 0.3, 293.0);
        let expected = -0.3 * 5.670374419e-8 * 1e-9 * (1623f64.powi(4) - 293f64.powi(4));
        assert_relative_eq!(q, expected, max_relative = 1e-14);
        assert_relative_eq!(q, -1.18e-4, max_relative = 0.01);
    }

    #[test]
    fn stability_scaling() {
        assert_eq!(stability_dt(1.0, 0.0, 0.5), f64::MAX);
        let a = stability_dt(2.5e-7, 0.01, 0.5);
        let b = stability_dt(2.5e-7, 0.02, 0.5);
        assert_relative_eq!(a, 2.0 * b, max_relative = 1e-14);
    }

    #[test]
    fn biot() {
        let e = element(10e-6, 100e-6);
        let (bl, bw) = biot_number(&e, 10.0, 20.0);
        assert_relative_eq!(bl, 5e-6, max_relative = 1e-12);
        assert_relative_eq!(bw / bl, 10.0, max_relative = 1e-12);
        let (bl, _) = biot_number(&e, 10.0, 1e300);
        assert!(bl < 1e-300);
    }
}
