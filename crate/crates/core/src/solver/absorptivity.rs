use serde::Deserialize;

use crate::{Error, Result};

/// Fraction of the laser power absorbed by the surface.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AbsorptivityModel {
    Constant { alpha: f64 },
    /// Piecewise-linear in the distance travelled along the current vector,
    /// restarting at every vector start; `tail` beyond the last breakpoint.
    Piecewise { breakpoints: Vec<(f64, f64)>, tail: f64 },
}

impl Default for AbsorptivityModel {
    fn default() -> Self {
        AbsorptivityModel::Constant { alpha: 0.43 }
    }
}

impl AbsorptivityModel {
    /// Start-of-vector surrogate: 0.41 rising to 0.73 at 0.2 mm, back to
    /// 0.41 at 0.8 mm, constant 0.41 afterwards.
    pub fn surrogate() -> Self {
        AbsorptivityModel::Piecewise {
            breakpoints: vec![(0.0, 0.41), (0.2e-3, 0.73), (0.8e-3, 0.41)],
            tail: 0.41,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |a: f64| a > 0.0 && a <= 1.0;
        match self {
            AbsorptivityModel::Constant { alpha } if !in_range(*alpha) => {
                Err(Error::Validation(format!("absorptivity {alpha} outside (0, 1]")))
            }
            AbsorptivityModel::Constant { .. } => Ok(()),
            AbsorptivityModel::Piecewise { breakpoints, tail } => {
                if breakpoints.is_empty() {
                    return Err(Error::Validation("absorptivity breakpoints are empty".into()));
                }
                if breakpoints[0].0 != 0.0 {
                    return Err(Error::Validation("absorptivity breakpoints must start at distance 0".into()));
                }
                if breakpoints.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::Validation("absorptivity breakpoint distances must increase".into()));
                }
                if let Some(a) = breakpoints.iter().map(|b| b.1).chain([*tail]).find(|a| !in_range(*a)) {
                    return Err(Error::Validation(format!("absorptivity {a} outside (0, 1]")));
                }
                Ok(())
            }
        }
    }

    /// Absorptivity at `distance` (m) from the start of the current vector.
    pub fn at(&self, distance: f64) -> f64 {
        match self {
            AbsorptivityModel::Constant { alpha } => *alpha,
            AbsorptivityModel::Piecewise { breakpoints, tail } => {
                let last = breakpoints[breakpoints.len() - 1];
                if distance >= last.0 {
                    return if breakpoints.len() == 1 { last.1 } else { *tail };
                }
                if distance <= 0.0 {
                    return breakpoints[0].1;
                }
                let k = breakpoints.partition_point(|b| b.0 <= distance);
                let (a, b) = (breakpoints[k - 1], breakpoints[k]);
                a.1 + (b.1 - a.1) * (distance - a.0) / (b.0 - a.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_and_surrogate() {
        assert_eq!(AbsorptivityModel::default().at(1.7e-3), 0.43);
        let s = AbsorptivityModel::surrogate();
        s.validate().unwrap();
        assert_eq!(s.at(0.9e-3), 0.41);
        assert_eq!(s.at(0.0), 0.41);
        assert_relative_eq!(s.at(0.1e-3), 0.57, max_relative = 1e-12);
        let peak = (0..=800).map(|k| s.at(k as f64 * 1e-6)).fold(0.0, f64::max);
        assert_relative_eq!(peak, 0.73, max_relative = 1e-12);
    }

    #[test]
    fn validation() {
        assert!(AbsorptivityModel::Constant { alpha: 0.0 }.validate().is_err());
        assert!(AbsorptivityModel::Constant { alpha: 1.2 }.validate().is_err());
        let bad = AbsorptivityModel::Piecewise {
            breakpoints: vec![(0.0, 0.4), (0.0, 0.5)],
            tail: 0.4,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn parses_from_toml() {
        let m: AbsorptivityModel =
            toml::from_str("model = \"piecewise\"\nbreakpoints = [[0.0, 0.41], [2e-4, 0.73], [8e-4, 0.41]]\ntail = 0.41\n")
                .unwrap();
        assert_eq!(m, AbsorptivityModel::surrogate());
        let c: AbsorptivityModel = toml::from_str("model = \"constant\"\nalpha = 0.5\n").unwrap();
        assert_eq!(c.at(0.0), 0.5);
    }
}
