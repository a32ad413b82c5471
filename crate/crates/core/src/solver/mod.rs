//! Explicit lumped-capacitance integration over the contact graph.
//!
//! Each element carries one temperature. A step evaluates, from the previous
//! state only, the absorbed laser power, conduction along every contact edge,
//! and convection and radiation from exposed top faces, then applies a
//! forward Euler update to the elements of the active body. Elements outside
//! the body keep their temperature.

mod absorptivity;
mod active;
pub mod physics;

use std::io::Write;
use std::time::Instant;

pub use absorptivity::AbsorptivityModel;
pub use active::{active_body, ActiveBody};

use serde::Deserialize;

use crate::geom::Vec2;
use crate::materials::Material;
use crate::meltpool::{simulated_metrics, MeltPoolMetrics, PoolConfig};
use crate::mesh::{ContactGraph, ContactKind, Mesh};
use crate::toolpath::{ScanVector, SubPath, Toolpath};
use crate::{par, Error, Result};
use physics::{beam_fraction, layer_fractions, normalize_power, STEFAN_BOLTZMANN};

/// How long a step is before stability refinement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DtPolicy {
    /// One step per sub-path traversal.
    #[default]
    PerSubpath,
    /// Steps no longer than the given duration, s.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Lower cap on the conduction distance, m.
    pub d0: f64,
    pub dt_policy: DtPolicy,
    /// Fraction of the explicit stability limit a step may use, in (0, 1).
    pub stability_safety: f64,
    /// Plan-view radius around the laser that is always active, m.
    pub active_radius: f64,
    /// Elements more than this above ambient stay active, K.
    pub active_temp_eps: f64,
    pub enable_convection: bool,
    pub enable_radiation: bool,
    pub emissivity: f64,
    /// Beer-Lambert penetration depth, m; defaults to the layer height.
    pub penetration_depth: Option<f64>,
    /// Scan time between snapshots, s.
    pub snapshot_interval: f64,
    /// Update every element every step.
    pub dense_mode: bool,
    /// Store the full temperature field with each snapshot.
    pub keep_temperatures: bool,
    /// Extract melt pool metrics at each snapshot.
    pub compute_metrics: bool,
    pub absorptivity: AbsorptivityModel,
    pub pool: PoolConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            d0: 10e-6,
            dt_policy: DtPolicy::PerSubpath,
            stability_safety: 0.5,
            active_radius: 0.5e-3,
            active_temp_eps: 1.0,
            enable_convection: true,
            enable_radiation: false,
            emissivity: 0.3,
            penetration_depth: None,
            snapshot_interval: 50e-6,
            dense_mode: false,
            keep_temperatures: false,
            compute_metrics: true,
            absorptivity: AbsorptivityModel::default(),
            pool: PoolConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Validation(m.into()));
        if !(self.d0 > 0.0) {
            return fail("d0 must be positive");
        }
        if !(self.stability_safety > 0.0 && self.stability_safety < 1.0) {
            return fail("stability_safety must lie in (0, 1)");
        }
        if let DtPolicy::Fixed(dt) = self.dt_policy {
            if !(dt > 0.0) {
                return fail("fixed time step must be positive");
            }
        }
        if !(self.active_radius >= 0.0) || !(self.active_temp_eps >= 0.0) {
            return fail("active-body radius and temperature margin must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.emissivity) {
            return fail("emissivity must lie in [0, 1]");
        }
        if self.penetration_depth.is_some_and(|d| !(d > 0.0)) {
            return fail("penetration depth must be positive");
        }
        if !(self.snapshot_interval > 0.0) {
            return fail("snapshot interval must be positive");
        }
        if !(self.pool.raster_side > 0.0 && self.pool.raster_pixels > 0 && self.pool.idw_power > 0.0) {
            return fail("melt pool raster settings must be positive");
        }
        self.absorptivity.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermalState {
    /// K, per element.
    pub temperatures: Vec<f64>,
    /// Whether each element has reached the liquidus so far.
    pub melted_ever: Vec<bool>,
    /// Scan time, s.
    pub time: f64,
    pub laser_position: Vec2,
    pub laser_on: bool,
}

/// Laser travel during one call to [`Simulation::advance`]: the stretch
/// `[d_start, d_end]` of `vector`.
#[derive(Clone, Copy, Debug)]
pub struct LaserSegment<'v> {
    pub vector: &'v ScanVector,
    pub d_start: f64,
    pub d_end: f64,
}

impl LaserSegment<'_> {
    fn distance_at(&self, f: f64) -> f64 {
        self.d_start + (self.d_end - self.d_start) * f
    }
}

/// Beam state used for one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaserSample {
    pub position: Vec2,
    pub power: f64,
    pub absorptivity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Scan time at the end of the step, s.
    pub time: f64,
    pub dt: f64,
    pub active_count: usize,
    /// Factor applied to the raw laser inputs.
    pub scale_factor: f64,
    /// Absorbed energy this step, J.
    pub energy_in: f64,
    /// Sum of the normalized inputs, W.
    pub absorbed_power: f64,
    /// alpha * P, W.
    pub target_power: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub index: usize,
    pub time: f64,
    pub laser_position: Vec2,
    pub vector_id: usize,
    /// Distance of the laser from the start of its vector, m.
    pub distance: f64,
    pub max_temperature: f64,
    pub active_count: usize,
    pub metrics: Option<MeltPoolMetrics>,
    pub temperatures: Option<Vec<f64>>,
}

/// What a snapshot observer sees.
pub struct SnapshotView<'s> {
    pub snapshot: &'s Snapshot,
    pub state: &'s ThermalState,
    pub active: &'s [usize],
    pub mesh: &'s Mesh,
}

#[derive(Clone, Debug)]
pub struct ThermalHistory {
    pub snapshots: Vec<Snapshot>,
    pub steps: Vec<StepRecord>,
    pub final_state: ThermalState,
    /// Wall-clock time of the integration loop, s.
    pub wall_time: f64,
}

enum Outcome {
    Accepted { limit: f64 },
    Unstable { limit: f64 },
}

/// Integrator bound to one mesh, graph, material and configuration.
pub struct Simulation<'a> {
    mesh: &'a Mesh,
    graph: &'a ContactGraph,
    material: &'a Material,
    config: &'a SolverConfig,
    /// rho * V, kg.
    mass: Vec<f64>,
    layer_share: Vec<f64>,
    body: ActiveBody,
    hot_threshold: f64,
    /// Sub-steps per `advance` that proved stable last time.
    pieces_hint: usize,
    records: Vec<StepRecord>,
}

impl<'a> Simulation<'a> {
    pub fn new(mesh: &'a Mesh, graph: &'a ContactGraph, material: &'a Material, config: &'a SolverConfig) -> Result<Self> {
        config.validate()?;
        material.validate()?;
        if graph.element_count() != mesh.len() {
            return Err(Error::Validation(format!(
                "contact graph has {} elements, mesh has {}",
                graph.element_count(),
                mesh.len()
            )));
        }
        let delta = config.penetration_depth.unwrap_or(mesh.layer_height);
        let shares = layer_fractions(mesh.layer_count, mesh.layer_height, delta);
        let layer_share = (0..mesh.len()).map(|i| shares[mesh.depth(i)]).collect();
        let mass = mesh.elements.iter().map(|e| material.density * e.volume()).collect();
        let hot_threshold = material.t_env + config.active_temp_eps;
        let initial = vec![material.t_env; mesh.len()];

        let k_ref = material.conductivity(material.t_env);
        let worst = mesh
            .elements
            .iter()
            .max_by(|a, b| a.length.max(a.width).total_cmp(&b.length.max(b.width)));
        if let Some(e) = worst {
            physics::biot_number(e, material.convection_h, k_ref);
        }

        Ok(Simulation {
            mesh,
            graph,
            material,
            config,
            mass,
            layer_share,
            body: ActiveBody::new(mesh, &initial, hot_threshold, config.active_radius, config.dense_mode),
            hot_threshold,
            pieces_hint: 1,
            records: Vec::new(),
        })
    }

    /// Every element at ambient temperature, laser off.
    pub fn initial_state(&self) -> ThermalState {
        ThermalState {
            temperatures: vec![self.material.t_env; self.mesh.len()],
            melted_ever: vec![false; self.mesh.len()],
            time: 0.0,
            laser_position: Vec2::ZERO,
            laser_on: false,
        }
    }

    /// Sets the starting temperatures, resetting the hot-element tracking.
    pub fn state_from_temperatures(&mut self, temperatures: Vec<f64>) -> Result<ThermalState> {
        if temperatures.len() != self.mesh.len() {
            return Err(Error::Validation("temperature count does not match the mesh".into()));
        }
        self.body = ActiveBody::new(
            self.mesh,
            &temperatures,
            self.hot_threshold,
            self.config.active_radius,
            self.config.dense_mode,
        );
        let melted_ever = temperatures.iter().map(|&t| t >= self.material.liquidus).collect();
        Ok(ThermalState {
            temperatures,
            melted_ever,
            ..self.initial_state()
        })
    }

    /// Elements updated by the most recent step.
    pub fn active_members(&self) -> &[usize] {
        self.body.members()
    }

    /// Step records accumulated so far (drained).
    pub fn take_records(&mut self) -> Vec<StepRecord> {
        std::mem::take(&mut self.records)
    }

    /// Stability limit for element `i`, s.
    pub fn stability_dt(&self, i: usize, state: &ThermalState) -> f64 {
        self.balance(i, &state.temperatures).2
    }

    /// Net heat flow into element `i` (excluding the laser), W, and its
    /// stability limit, s.
    fn balance(&self, i: usize, t: &[f64]) -> (f64, f64, f64) {
        let (m, cfg) = (self.material, self.config);
        let ti = t[i];
        let platform = self.graph.platform_node();
        let mut q = 0.0;
        let mut g = 0.0;
        for &(j, k) in self.graph.neighbors(i) {
            let e = &self.graph.edges[k];
            let tj = if j == platform { m.t_substrate } else { t[j] };
            let kk = m.conductivity(0.5 * (ti + tj));
            q += physics::conductive_flux(kk, e.area, e.distance, cfg.d0, ti, tj);
            g += kk * e.area / e.distance.max(cfg.d0);
        }
        if self.mesh.is_exposed(i) {
            let a = self.mesh.elements[i].top_area();
            if cfg.enable_convection {
                q += physics::convection_flux(a, true, ti, m);
                g += m.convection_h * a;
            }
            if cfg.enable_radiation {
                q += physics::radiation_flux(a, true, ti, cfg.emissivity, m.t_env);
                g += 4.0 * cfg.emissivity * STEFAN_BOLTZMANN * ti.powi(3) * a;
            }
        }
        let capacity = self.mass[i] * m.specific_heat_eq(ti);
        (q, capacity, physics::stability_dt(capacity, g, cfg.stability_safety))
    }

    /// Raw (unnormalized) laser input of element `i`, W.
    fn raw_input(&self, i: usize, laser: &LaserSample) -> f64 {
        let e = &self.mesh.elements[i];
        laser.absorptivity
            * laser.power
            * beam_fraction(&e.rect(), laser.position, self.material.spot_radius())
            * self.layer_share[i]
    }

    fn try_step(
        &mut self,
        state: &mut ThermalState,
        dt: f64,
        laser: Option<LaserSample>,
        end_position: Vec2,
        check: bool,
    ) -> Result<Outcome> {
        let position = laser.map_or(state.laser_position, |l| l.position);
        let members = self.body.update(self.mesh, self.graph, position, self.config.active_radius).to_vec();

        let target = laser.map_or(0.0, |l| l.absorptivity * l.power);
        let mut inputs = if target > 0.0 {
            let l = laser.unwrap_or(LaserSample {
                position,
                power: 0.0,
                absorptivity: 0.0,
            });
            par::map(&members, |&i| self.raw_input(i, &l))
        } else {
            Vec::new()
        };
        let scale = if target > 0.0 {
            normalize_power(&mut inputs, target).ok_or(Error::NoIllumination {
                x: position.x,
                y: position.y,
                time: state.time,
            })?
        } else {
            1.0
        };

        let t = &state.temperatures;
        let updates = par::map_range(members.len(), |k| {
            let i = members[k];
            let (mut q, capacity, limit) = self.balance(i, t);
            if let Some(h) = inputs.get(k) {
                q += h;
            }
            (t[i] + dt * q / capacity, limit)
        });
        let limit = updates.iter().map(|u| u.1).fold(f64::MAX, f64::min);
        if check && dt > limit * (1.0 + 1e-12) {
            return Ok(Outcome::Unstable { limit });
        }

        let step = self.records.len();
        for (k, &(new_t, _)) in updates.iter().enumerate() {
            let i = members[k];
            if !new_t.is_finite() {
                return Err(Error::Numerical {
                    element: i,
                    step,
                    time: state.time,
                    dt,
                    detail: format!("temperature {} -> {new_t}", state.temperatures[i]),
                });
            }
            state.temperatures[i] = new_t;
            if new_t >= self.material.liquidus {
                state.melted_ever[i] = true;
            }
        }
        self.body.refresh_hot(&state.temperatures, self.hot_threshold);
        state.time += dt;
        state.laser_position = end_position;
        state.laser_on = target > 0.0;

        let absorbed: f64 = inputs.iter().sum();
        self.records.push(StepRecord {
            step,
            time: state.time,
            dt,
            active_count: members.len(),
            scale_factor: scale,
            energy_in: absorbed * dt,
            absorbed_power: absorbed,
            target_power: target,
        });
        Ok(Outcome::Accepted { limit })
    }

    /// Advances `state` by `dt`, moving the laser along `segment` (or with
    /// the laser off). The interval is split into equal sub-steps, refined
    /// until each respects the stability limit of the active body.
    pub fn advance(&mut self, state: &mut ThermalState, dt: f64, segment: Option<LaserSegment<'_>>) -> Result<()> {
        self.advance_at_least(state, dt, segment, 1)
    }

    fn advance_at_least(&mut self, state: &mut ThermalState, dt: f64, segment: Option<LaserSegment<'_>>, min_pieces: usize) -> Result<()> {
        if !(dt > 0.0) {
            return Ok(());
        }
        let mut n = self.pieces_hint.max(min_pieces);
        let mut done = 0usize;
        let mut min_ratio = f64::INFINITY;
        let parked = state.laser_position;
        let sample = |f: f64| -> (Option<LaserSample>, Vec2) {
            match segment {
                Some(s) => {
                    let d = s.distance_at(f);
                    let sample = LaserSample {
                        position: s.vector.point_at(d),
                        power: if s.vector.fictitious { 0.0 } else { s.vector.profile.power_at(d) },
                        absorptivity: self.config.absorptivity.at(d),
                    };
                    (Some(sample), s.vector.point_at(s.distance_at(f)))
                }
                None => (None, parked),
            }
        };
        while done < n {
            let h = dt / n as f64;
            let (laser, _) = sample((done as f64 + 0.5) / n as f64);
            let (_, end) = sample((done + 1) as f64 / n as f64);
            match self.try_step(state, h, laser, end, true)? {
                Outcome::Accepted { limit } => {
                    done += 1;
                    min_ratio = min_ratio.min(limit / h);
                }
                Outcome::Unstable { limit } => {
                    let factor = (h / limit).log2().ceil().max(1.0);
                    if factor > 60.0 || h / 2f64.powf(factor) < 1e-15 {
                        return Err(Error::Numerical {
                            element: 0,
                            step: self.records.len(),
                            time: state.time,
                            dt: h,
                            detail: format!("stability limit {limit:.3e} s is unreachable"),
                        });
                    }
                    let m = 1usize << factor as u32;
                    n *= m;
                    done *= m;
                }
            }
        }
        self.pieces_hint = if min_ratio >= 2.0 && n > 1 { n / 2 } else { n };
        Ok(())
    }

    /// One forward Euler step of exactly `dt` with a stationary beam,
    /// skipping the stability check. Returns the stability limit of the
    /// active body at the start of the step.
    pub fn force_step(&mut self, state: &mut ThermalState, dt: f64, laser: Option<LaserSample>) -> Result<f64> {
        let end = laser.map_or(state.laser_position, |l| l.position);
        match self.try_step(state, dt, laser, end, false)? {
            Outcome::Accepted { limit } | Outcome::Unstable { limit } => Ok(limit),
        }
    }

    /// Runs every non-fictitious sub-path in scan order.
    pub fn run(&mut self, toolpath: &Toolpath, sub_paths: &[SubPath]) -> Result<ThermalHistory> {
        self.run_with(toolpath, sub_paths, |_| Ok(()))
    }

    /// Like [`Simulation::run`], calling `on_snapshot` at every snapshot.
    pub fn run_with(
        &mut self,
        toolpath: &Toolpath,
        sub_paths: &[SubPath],
        mut on_snapshot: impl FnMut(SnapshotView<'_>) -> Result<()>,
    ) -> Result<ThermalHistory> {
        let started = Instant::now();
        let mut state = self.initial_state();
        if let Some(first) = sub_paths.iter().find(|s| !s.fictitious) {
            state.laser_position = first.start;
        }
        let interval = self.config.snapshot_interval;
        let mut next_snapshot = interval;
        let mut snapshots = Vec::new();
        self.records.clear();

        for sp in sub_paths.iter().filter(|s| !s.fictitious) {
            let vector = toolpath.vectors.get(sp.vector_id).ok_or_else(|| {
                Error::Validation(format!("sub-path refers to missing vector {}", sp.vector_id))
            })?;
            let segment = LaserSegment {
                vector,
                d_start: sp.distance_offset,
                d_end: sp.distance_offset + sp.length,
            };
            let min_pieces = match self.config.dt_policy {
                DtPolicy::PerSubpath => 1,
                DtPolicy::Fixed(dt) => (sp.duration / dt).ceil().max(1.0) as usize,
            };
            self.advance_at_least(&mut state, sp.duration, Some(segment), min_pieces)?;

            while state.time >= next_snapshot - 1e-6 * interval {
                let snap = self.snapshot(snapshots.len(), &state, sp.vector_id, segment.d_end)?;
                on_snapshot(SnapshotView {
                    snapshot: &snap,
                    state: &state,
                    active: self.body.members(),
                    mesh: self.mesh,
                })?;
                snapshots.push(snap);
                next_snapshot += interval;
            }
        }
        state.laser_on = false;
        Ok(ThermalHistory {
            snapshots,
            steps: std::mem::take(&mut self.records),
            final_state: state,
            wall_time: started.elapsed().as_secs_f64(),
        })
    }

    fn snapshot(&self, index: usize, state: &ThermalState, vector_id: usize, distance: f64) -> Result<Snapshot> {
        let active = self.body.members();
        let max_temperature = active
            .iter()
            .map(|&i| state.temperatures[i])
            .fold(self.material.t_env, f64::max);
        let metrics = if self.config.compute_metrics {
            Some(simulated_metrics(
                self.mesh,
                &state.temperatures,
                active,
                state.laser_position,
                state.time,
                self.material.liquidus,
                &self.config.pool,
            )?)
        } else {
            None
        };
        Ok(Snapshot {
            index,
            time: state.time,
            laser_position: state.laser_position,
            vector_id,
            distance,
            max_temperature,
            active_count: active.len(),
            metrics,
            temperatures: self.config.keep_temperatures.then(|| state.temperatures.clone()),
        })
    }

    /// Total enthalpy `sum rho V h(T)`, J.
    pub fn total_enthalpy(&self, state: &ThermalState) -> f64 {
        self.mass
            .iter()
            .zip(&state.temperatures)
            .map(|(m, &t)| m * self.material.enthalpy(t))
            .sum()
    }

    /// Number of platform edges in the graph; zero means the body is
    /// thermally isolated from below.
    pub fn platform_contacts(&self) -> usize {
        self.graph.count(ContactKind::Platform)
    }
}

/// `steps.csv`: `step,time,dt,active_count,scale_factor,energy_in`.
pub fn write_steps_csv<W: Write>(mut w: W, steps: &[StepRecord]) -> std::io::Result<()> {
    writeln!(w, "step,time,dt,active_count,scale_factor,energy_in")?;
    for s in steps {
        writeln!(w, "{},{},{},{},{},{}", s.step, s.time, s.dt, s.active_count, s.scale_factor, s.energy_in)?;
    }
    Ok(())
}
