//! Temperature-dependent material properties with latent heat folded into an
//! equivalent specific heat over the mushy zone.

use std::path::Path;

use serde::Deserialize;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Material {
    /// K
    pub solidus: f64,
    /// K
    pub liquidus: f64,
    /// J/kg
    pub latent_heat: f64,
    /// Solid specific heat `a + b*T`, J/(kg K).
    pub c_solid_a: f64,
    pub c_solid_b: f64,
    /// Mushy/liquid base specific heat, J/(kg K).
    pub c_mushy: f64,
    /// Solid conductivity `a + b*T`, W/(m K).
    pub k_solid_a: f64,
    pub k_solid_b: f64,
    /// Liquid conductivity, W/(m K).
    pub k_liquid: f64,
    /// kg/m^3
    pub density: f64,
    /// Convection coefficient, W/(m^2 K).
    pub convection_h: f64,
    /// Ambient temperature, K.
    pub t_env: f64,
    /// Build platform temperature, K.
    pub t_substrate: f64,
    /// Laser spot diameter (1/e^2), m.
    pub spot_diameter: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self::in625()
    }
}

impl Material {
    /// Inconel 625 with process conditions of the AMMT solid-surface scans.
    pub fn in625() -> Self {
        Material {
            solidus: 1563.0,
            liquidus: 1623.0,
            latent_heat: 290e3,
            c_solid_a: 339.0,
            c_solid_b: 0.24,
            c_mushy: 735.0,
            k_solid_a: 5.3,
            k_solid_b: 0.015,
            k_liquid: 30.05,
            density: 8440.0,
            convection_h: 10.0,
            t_env: 293.0,
            t_substrate: 293.0,
            spot_diameter: 85e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("solidus_K", self.solidus),
            ("liquidus_K", self.liquidus),
            ("latent_heat_J_per_kg", self.latent_heat),
            ("c_mushy", self.c_mushy),
            ("k_liquid", self.k_liquid),
            ("density_kg_per_m3", self.density),
            ("convection_W_per_m2K", self.convection_h),
            ("t_env_K", self.t_env),
            ("t_substrate_K", self.t_substrate),
            ("spot_diameter_m", self.spot_diameter),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Validation(format!("material {name} must be positive, got {v}")));
        }
        if self.solidus >= self.liquidus {
            return Err(Error::Validation("solidus must be below liquidus".into()));
        }
        if self.c_solid_at(self.t_env) <= 0.0 || self.k_solid_at(self.t_env) <= 0.0 {
            return Err(Error::Validation("solid properties must be positive at ambient".into()));
        }
        Ok(())
    }

    pub fn spot_radius(&self) -> f64 {
        0.5 * self.spot_diameter
    }

    fn c_solid_at(&self, t: f64) -> f64 {
        self.c_solid_a + self.c_solid_b * t
    }

    fn k_solid_at(&self, t: f64) -> f64 {
        self.k_solid_a + self.k_solid_b * t
    }

    /// Extra heat capacity spreading the latent heat across `[T_S, T_L]`.
    pub fn latent_capacity(&self) -> f64 {
        self.latent_heat / (self.liquidus - self.solidus)
    }

    /// Equivalent specific heat, J/(kg K).
    pub fn specific_heat_eq(&self, t: f64) -> f64 {
        if t <= self.solidus {
            self.c_solid_at(t)
        } else if t <= self.liquidus {
            self.c_mushy + self.latent_capacity()
        } else {
            self.c_mushy
        }
    }

    /// Thermal conductivity, W/(m K); linear blend across the mushy zone.
    pub fn conductivity(&self, t: f64) -> f64 {
        if t <= self.solidus {
            self.k_solid_at(t)
        } else if t <= self.liquidus {
            let k_s = self.k_solid_at(self.solidus);
            let f = (t - self.solidus) / (self.liquidus - self.solidus);
            k_s + f * (self.k_liquid - k_s)
        } else {
            self.k_liquid
        }
    }

    /// Specific enthalpy relative to 0 K, J/kg: the exact integral of
    /// [`Material::specific_heat_eq`].
    pub fn enthalpy(&self, t: f64) -> f64 {
        let solid = |t: f64| self.c_solid_a * t + 0.5 * self.c_solid_b * t * t;
        if t <= self.solidus {
            return solid(t);
        }
        let at_solidus = solid(self.solidus);
        let mushy_c = self.c_mushy + self.latent_capacity();
        if t <= self.liquidus {
            return at_solidus + mushy_c * (t - self.solidus);
        }
        at_solidus + mushy_c * (self.liquidus - self.solidus) + self.c_mushy * (t - self.liquidus)
    }

    /// Loads IN625 defaults and overrides them with the keys present in a
    /// `key = value` file.
    pub fn from_override_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_override_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_override_str(text: &str) -> Result<Self> {
        let o: MaterialOverrides = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut m = Material::in625();
        o.apply(&mut m);
        m.validate()?;
        Ok(m)
    }
}

/// Keys accepted in a material override file. Units are in the key names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct MaterialOverrides {
    pub solidus_K: Option<f64>,
    pub liquidus_K: Option<f64>,
    pub latent_heat_J_per_kg: Option<f64>,
    pub c_solid_a: Option<f64>,
    pub c_solid_b: Option<f64>,
    pub c_mushy: Option<f64>,
    pub k_solid_a: Option<f64>,
    pub k_solid_b: Option<f64>,
    pub k_liquid: Option<f64>,
    pub density_kg_per_m3: Option<f64>,
    pub convection_W_per_m2K: Option<f64>,
    pub t_env_K: Option<f64>,
    pub t_substrate_K: Option<f64>,
    pub spot_diameter_m: Option<f64>,
}

impl MaterialOverrides {
    fn apply(&self, m: &mut Material) {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut m.solidus, self.solidus_K);
        set(&mut m.liquidus, self.liquidus_K);
        set(&mut m.latent_heat, self.latent_heat_J_per_kg);
        set(&mut m.c_solid_a, self.c_solid_a);
        set(&mut m.c_solid_b, self.c_solid_b);
        set(&mut m.c_mushy, self.c_mushy);
        set(&mut m.k_solid_a, self.k_solid_a);
        set(&mut m.k_solid_b, self.k_solid_b);
        set(&mut m.k_liquid, self.k_liquid);
        set(&mut m.density, self.density_kg_per_m3);
        set(&mut m.convection_h, self.convection_W_per_m2K);
        set(&mut m.t_env, self.t_env_K);
        set(&mut m.t_substrate, self.t_substrate_K);
        set(&mut m.spot_diameter, self.spot_diameter_m);
    }
}
