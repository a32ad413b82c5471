use capl::geom::Vec2;
use capl::materials::Material;
use capl::mesh::{build_contact_graph, build_elements, ContactConfig, ContactGraph, Mesh};
use capl::model::{MeshConfig, Model};
use capl::solver::{DtPolicy, LaserSample, Simulation, SolverConfig, ThermalState};
use capl::toolpath::{discretize, parse_toolpath, Toolpath};
use capl::Error;

/// Two 10 x 100 x 40 um elements joined by one in-path contact, nothing else.
fn two_elements() -> (Mesh, ContactGraph) {
    let tp = parse_toolpath("P p (0,195)\nV 0 0 20e-6 0 0.8 p\n".as_bytes()).unwrap();
    let subs = discretize(&tp, 10e-6).unwrap();
    let mut els = build_elements(&subs, 0, 40e-6, 100e-6, 0).unwrap();
    assert_eq!(els.len(), 2);
    for e in &mut els {
        e.width = 100e-6;
    }
    let mesh = Mesh::new(els, 40e-6).unwrap();
    let contact = ContactConfig {
        platform: false,
        ..Default::default()
    };
    let graph = build_contact_graph(&mesh, &contact).unwrap();
    assert_eq!(graph.edges.len(), 1);
    (mesh, graph)
}

fn adiabatic() -> SolverConfig {
    SolverConfig {
        enable_convection: false,
        enable_radiation: false,
        compute_metrics: false,
        ..Default::default()
    }
}

fn single_track(length_mm: f64, cfg: &MeshConfig) -> Model {
    let text = format!("P p (0,195)\nV 0 0 {} 0 0.8 p\n", length_mm * 1e-3);
    Model::build(&parse_toolpath(text.as_bytes()).unwrap(), cfg).unwrap()
}

fn small_mesh() -> MeshConfig {
    MeshConfig {
        substrate_layers: 1,
        fictitious_margin: 0.1e-3,
        ..Default::default()
    }
}

#[test]
fn step_beyond_stability_limit_oscillates() {
    let (mesh, graph) = two_elements();
    let mat = Material::in625();
    let cfg = adiabatic();
    for (factor, oscillates) in [(2.0, true), (1.0, false), (0.5, false)] {
        let mut sim = Simulation::new(&mesh, &graph, &mat, &cfg).unwrap();
        let mut state = sim.state_from_temperatures(vec![400.0, 300.0]).unwrap();
        let dt = factor * sim.stability_dt(0, &state).min(sim.stability_dt(1, &state));
        let mut signs = Vec::new();
        for _ in 0..6 {
            sim.force_step(&mut state, dt, None).unwrap();
            signs.push((state.temperatures[0] - state.temperatures[1]).signum());
        }
        let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
        if oscillates {
            assert_eq!(flips, 5, "factor {factor}: {:?}", state.temperatures);
        } else {
            assert_eq!(flips, 0, "factor {factor}: {:?}", state.temperatures);
        }
    }
}

#[test]
fn constant_properties_conserve_enthalpy_every_step() {
    let (mesh, graph) = two_elements();
    let mat = Material {
        c_solid_b: 0.0,
        ..Material::in625()
    };
    let cfg = adiabatic();
    let mut sim = Simulation::new(&mesh, &graph, &mat, &cfg).unwrap();
    let mut state = sim.state_from_temperatures(vec![1200.0, 400.0]).unwrap();
    let dt = 0.5 * sim.stability_dt(0, &state);
    for _ in 0..20 {
        let before = sim.total_enthalpy(&state);
        sim.force_step(&mut state, dt, None).unwrap();
        let after = sim.total_enthalpy(&state);
        assert!(((after - before) / before).abs() < 1e-9);
    }
}

fn enthalpy_drift_rate(dt: f64, span: f64) -> f64 {
    let (mesh, graph) = two_elements();
    let mat = Material::in625();
    let cfg = adiabatic();
    let mut sim = Simulation::new(&mesh, &graph, &mat, &cfg).unwrap();
    let mut state = sim.state_from_temperatures(vec![1200.0, 400.0]).unwrap();
    let before = sim.total_enthalpy(&state);
    let steps = (span / dt).round() as usize;
    for _ in 0..steps {
        sim.force_step(&mut state, dt, None).unwrap();
    }
    (sim.total_enthalpy(&state) - before) / span
}

#[test]
fn enthalpy_drift_is_first_order_in_dt() {
    let (mesh, graph) = two_elements();
    let mat = Material::in625();
    let cfg = adiabatic();
    let sim = Simulation::new(&mesh, &graph, &mat, &cfg).unwrap();
    let probe = ThermalState {
        temperatures: vec![1200.0, 400.0],
        ..sim.initial_state()
    };
    let dt0 = 0.5 * sim.stability_dt(0, &probe).min(sim.stability_dt(1, &probe));
    let span = 16.0 * dt0;
    // Start well below the stability limit so the leading-order error dominates.
    let rates: Vec<f64> = (2..6).map(|k| enthalpy_drift_rate(dt0 / 2f64.powi(k), span)).collect();
    assert!(rates.iter().all(|r| *r != 0.0));
    for w in rates.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 2.0).abs() < 0.2, "drift rates {rates:?}");
    }
}

#[test]
fn ambient_state_is_a_fixed_point() {
    let m = single_track(0.2, &small_mesh());
    let mat = Material::in625();
    let cfg = SolverConfig {
        enable_radiation: true,
        ..Default::default()
    };
    let mut sim = Simulation::new(&m.mesh, &m.graph, &mat, &cfg).unwrap();
    let mut state = sim.initial_state();
    let start = state.clone();
    for _ in 0..5 {
        sim.advance(&mut state, 1e-5, None).unwrap();
    }
    assert_eq!(state.temperatures, start.temperatures);
    assert!((state.time - 5e-5).abs() < 1e-15);
}

#[test]
fn power_is_normalized_every_laser_step() {
    let m = single_track(0.3, &small_mesh());
    let mat = Material::in625();
    let cfg = SolverConfig {
        compute_metrics: false,
        ..Default::default()
    };
    let mut sim = Simulation::new(&m.mesh, &m.graph, &mat, &cfg).unwrap();
    let history = sim.run(&m.toolpath, &m.sub_paths).unwrap();
    assert!(!history.steps.is_empty());
    for s in &history.steps {
        assert!((s.target_power - 0.43 * 195.0).abs() < 1e-9);
        assert!(((s.absorbed_power - s.target_power) / s.target_power).abs() < 1e-9, "{s:?}");
        assert!((s.energy_in - s.absorbed_power * s.dt).abs() <= 1e-15);
    }
    let total: f64 = history.steps.iter().map(|s| s.energy_in).sum();
    let expected = 0.43 * 195.0 * 0.3e-3 / 0.8;
    assert!(((total - expected) / expected).abs() < 1e-9);
}

#[test]
fn cooling_without_laser_is_monotone() {
    let m = single_track(0.2, &small_mesh());
    let mat = Material::in625();
    let cfg = SolverConfig {
        compute_metrics: false,
        ..Default::default()
    };
    let mut sim = Simulation::new(&m.mesh, &m.graph, &mat, &cfg).unwrap();
    let history = sim.run(&m.toolpath, &m.sub_paths).unwrap();
    let mut state = history.final_state;
    let mut peak = state.temperatures.iter().copied().fold(0.0, f64::max);
    assert!(peak > mat.liquidus);
    for _ in 0..40 {
        sim.advance(&mut state, 5e-6, None).unwrap();
        let now = state.temperatures.iter().copied().fold(0.0, f64::max);
        assert!(now <= peak + 1e-9, "{now} > {peak}");
        peak = now;
    }
    assert!(state.temperatures.iter().all(|&t| t >= mat.t_env - 1e-9));
}

#[test]
fn snapshots_follow_laser_on_time_and_melting_only_grows() {
    let m = single_track(0.4, &small_mesh());
    let mat = Material::in625();
    let cfg = SolverConfig {
        keep_temperatures: true,
        ..Default::default()
    };
    let mut sim = Simulation::new(&m.mesh, &m.graph, &mat, &cfg).unwrap();
    let mut melted_counts = Vec::new();
    let history = sim
        .run_with(&m.toolpath, &m.sub_paths, |view| {
            melted_counts.push(view.state.melted_ever.iter().filter(|&&b| b).count());
            Ok(())
        })
        .unwrap();
    // 0.4 mm at 0.8 m/s is 500 us of laser-on time.
    assert_eq!(history.snapshots.len(), 10);
    assert!(melted_counts.windows(2).all(|w| w[0] <= w[1]));
    assert!(*melted_counts.last().unwrap() > 0);
    let last = history.snapshots.last().unwrap();
    let metrics = last.metrics.as_ref().unwrap();
    assert!(metrics.length > 0.0 && metrics.width > 0.0);
    assert!(last.temperatures.as_ref().unwrap().len() == m.mesh.len());
    assert!((last.laser_position.x - 0.4e-3).abs() < 1e-12);
}

#[test]
fn empty_schedule_gives_empty_history() {
    let m = single_track(0.2, &small_mesh());
    let mat = Material::in625();
    let cfg = SolverConfig::default();
    let mut sim = Simulation::new(&m.mesh, &m.graph, &mat, &cfg).unwrap();
    let empty = Toolpath::new(Vec::new(), 40e-6, 0).unwrap();
    let history = sim.run(&empty, &[]).unwrap();
    assert!(history.snapshots.is_empty() && history.steps.is_empty());
}

#[test]
fn dense_and_active_solvers_agree() {
    let text = "P p (0,195)\nV 0 0 1e-3 0 0.8 p\nV 1e-3 0.1e-3 0 0.1e-3 0.8 p\n";
    let cfg = MeshConfig {
        fictitious_margin: 0.0,
        ..small_mesh()
    };
    let m = Model::build(&parse_toolpath(text.as_bytes()).unwrap(), &cfg).unwrap();
    assert!(m.mesh.len() <= 500, "{}", m.mesh.len());
    let mat = Material::in625();
    let run = |dense: bool| {
        let cfg = SolverConfig {
            dense_mode: dense,
            keep_temperatures: true,
            compute_metrics: false,
            ..Default::default()
        };
        let mut sim = Simulation::new(&m.mesh, &m.graph, &mat, &cfg).unwrap();
        sim.run(&m.toolpath, &m.sub_paths).unwrap()
    };
    let (active, dense) = (run(false), run(true));
    assert!(active.steps.iter().any(|s| s.active_count < m.mesh.len()));
    assert_eq!(active.snapshots.len(), dense.snapshots.len());
    for (a, d) in active.snapshots.iter().zip(&dense.snapshots) {
        let (ta, td) = (a.temperatures.as_ref().unwrap(), d.temperatures.as_ref().unwrap());
        let rise = td.iter().copied().fold(0.0, f64::max) - mat.t_env;
        let worst = ta.iter().zip(td).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst <= 0.005 * rise, "snapshot {}: {worst} K of {rise} K", a.index);
    }
}

#[test]
fn fixed_policy_caps_the_step() {
    let m = single_track(0.1, &small_mesh());
    let mat = Material::in625();
    let cfg = SolverConfig {
        dt_policy: DtPolicy::Fixed(1e-6),
        compute_metrics: false,
        ..Default::default()
    };
    let mut sim = Simulation::new(&m.mesh, &m.graph, &mat, &cfg).unwrap();
    let h = sim.run(&m.toolpath, &m.sub_paths).unwrap();
    assert!(h.steps.iter().all(|s| s.dt <= 1e-6 * (1.0 + 1e-12)));
}

#[test]
fn unlit_laser_is_reported() {
    let m = single_track(0.1, &small_mesh());
    let mat = Material::in625();
    let cfg = SolverConfig::default();
    let mut sim = Simulation::new(&m.mesh, &m.graph, &mat, &cfg).unwrap();
    let mut state = sim.initial_state();
    let far = LaserSample {
        position: Vec2::new(5e-3, 5e-3),
        power: 195.0,
        absorptivity: 0.43,
    };
    let err = sim.force_step(&mut state, 1e-7, Some(far)).unwrap_err();
    assert!(matches!(err, Error::NoIllumination { .. }), "{err}");
}

#[test]
fn invalid_configuration_is_rejected() {
    let (mesh, graph) = two_elements();
    let mat = Material::in625();
    for cfg in [
        SolverConfig {
            stability_safety: 1.0,
            ..Default::default()
        },
        SolverConfig {
            d0: 0.0,
            ..Default::default()
        },
        SolverConfig {
            dt_policy: DtPolicy::Fixed(-1.0),
            ..Default::default()
        },
    ] {
        assert!(Simulation::new(&mesh, &graph, &mat, &cfg).is_err());
    }
}
