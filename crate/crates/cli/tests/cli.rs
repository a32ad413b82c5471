use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use capl::meltpool::{frame_file_name, read_metrics_csv, write_gray, write_metrics_csv, MetricsRow};
use capl::toolpath::parse_toolpath;

fn capl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capl"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CAPL_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn metrics(path: &Path) -> Vec<MetricsRow> {
    read_metrics_csv(fs::File::open(path).unwrap()).unwrap()
}

fn row(frame: usize, length: f64) -> MetricsRow {
    MetricsRow {
        frame,
        time_s: frame as f64 / 20e3,
        laser_x_m: f64::NAN,
        laser_y_m: f64::NAN,
        length_m: length,
        width_m: 0.4 * length,
        orientation_rad: 0.0,
        outlier_flag: 0,
    }
}

#[test]
fn gen_path_round_trips_and_honors_options() {
    let dir = tempfile::tempdir().unwrap();
    let out = capl(&["gen-path", "--side", "1e-3", "--out", "a.txt"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("a.txt")).unwrap();
    let tp = parse_toolpath(text.as_bytes()).unwrap();
    assert!(tp.vectors.iter().all(|v| !v.fictitious));
    assert_eq!(tp, capl_cli::gen_path(&capl_cli::GenPathOptions { side: 1e-3, ..Default::default() }).unwrap());
    // Contour vectors come first and trace the square.
    let side: f64 = tp.vectors[..4].iter().map(|v| v.length()).sum();
    assert!((side - 4e-3).abs() < 1e-12);

    let out = capl(&["gen-path", "--side", "1e-3", "--margin", "0.2e-3", "--out", "b.txt"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let tp = parse_toolpath(fs::read_to_string(dir.path().join("b.txt")).unwrap().as_bytes()).unwrap();
    assert!(tp.vectors.iter().any(|v| v.fictitious));
}

#[test]
fn simulate_writes_outputs_and_dense_mode_matches() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("path.txt"), "P p (0,195)\nV 0 0 0.3e-3 0 0.8 p\n").unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "toolpath = \"path.txt\"\noutput_dir = \"active\"\n[mesh]\nsubstrate_layers = 2\nfictitious_margin = 0.1e-3\n",
    )
    .unwrap();
    let out = capl(&["simulate", "--config", "run.toml"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("length_um"));
    for f in ["metrics.csv", "steps.csv", "vectors.csv", "frame_vectors.csv"] {
        assert!(dir.path().join("active").join(f).is_file(), "{f}");
    }
    let steps = fs::read_to_string(dir.path().join("active/steps.csv")).unwrap();
    assert!(steps.starts_with("step,time,dt,active_count,scale_factor,energy_in"));

    let out = capl(
        &["simulate", "--config", "run.toml", "--set", "solver.dense_mode=true", "--out", "dense"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let (a, d) = (metrics(&dir.path().join("active/metrics.csv")), metrics(&dir.path().join("dense/metrics.csv")));
    assert_eq!(a.len(), d.len());
    assert!(!a.is_empty());
    for (x, y) in a.iter().zip(&d) {
        assert!((x.length_m - y.length_m).abs() <= 0.01 * y.length_m.max(1e-6), "{x:?} {y:?}");
        assert!((x.width_m - y.width_m).abs() <= 0.01 * y.width_m.max(1e-6), "{x:?} {y:?}");
    }
}

#[test]
fn simulate_reports_bad_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = capl(&["simulate", "--config", "missing.toml"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("missing.toml"));

    fs::write(dir.path().join("run.toml"), "toolpath = \"nowhere.txt\"\n").unwrap();
    let out = capl(&["simulate", "--config", "run.toml"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nowhere.txt"), "{}", stderr(&out));

    let out = capl(&["simulate", "--config", "run.toml", "--set", "solver.bogus=1"], dir.path());
    assert!(!out.status.success());

    let out = Command::new(env!("CARGO_BIN_EXE_capl"))
        .args(["gen-path", "--out", "x.txt"])
        .current_dir(dir.path())
        .env("CAPL_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("CAPL_THREADS"));
}

#[test]
fn analyze_frames_counts_rows_and_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    fs::create_dir(&frames).unwrap();
    for n in 0..3 {
        let img = image::GrayImage::from_fn(64, 64, |x, y| {
            let (dx, dy) = (x as f64 - 32.0, y as f64 - 32.0);
            image::Luma([if (dx / (10.0 + n as f64)).powi(2) + (dy / 6.0).powi(2) <= 1.0 { 200 } else { 10 }])
        });
        write_gray(&frames.join(frame_file_name("03", n)), &img).unwrap();
    }
    let out = capl(&["analyze-frames", "frames", "--out", "exp.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("3 frames, 0 flagged, 0 warnings"), "{}", stdout(&out));
    let rows = metrics(&dir.path().join("exp.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[0].length_m < w[1].length_m));
    assert!((rows[1].time_s - 1.0 / 20e3).abs() < 1e-15);

    fs::write(frames.join(frame_file_name("03", 3)), b"not an image").unwrap();
    let out = capl(&["analyze-frames", "frames", "--out", "exp2.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("1 warnings"), "{}", stdout(&out));
    let key = |rs: &[MetricsRow]| rs.iter().map(|r| (r.frame, r.length_m, r.width_m)).collect::<Vec<_>>();
    assert_eq!(key(&metrics(&dir.path().join("exp2.csv"))), key(&rows));
}

#[test]
fn compare_writes_report_and_rejects_misalignment() {
    let dir = tempfile::tempdir().unwrap();
    let exp: Vec<_> = (0..6).map(|f| row(f, 1e-4 * (1.0 + f as f64))).collect();
    let sim: Vec<_> = exp.iter().map(|r| MetricsRow { length_m: 1.1 * r.length_m, ..r.clone() }).collect();
    write_metrics_csv(fs::File::create(dir.path().join("exp.csv")).unwrap(), &exp).unwrap();
    write_metrics_csv(fs::File::create(dir.path().join("sim.csv")).unwrap(), &sim).unwrap();
    let out = capl(&["compare", "--sim", "sim.csv", "--exp", "exp.csv", "--out", "report.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("mean length error 10.00%"), "{}", stdout(&out));
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.starts_with("scope,key,frames,mean_rel_err_length"));
    assert_eq!(fs::read_to_string(dir.path().join("report_frames.csv")).unwrap().lines().count(), 7);

    write_metrics_csv(fs::File::create(dir.path().join("short.csv")).unwrap(), &sim[..4]).unwrap();
    let out = capl(&["compare", "--sim", "short.csv", "--exp", "exp.csv"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("only measured: [4, 5]"), "{}", stderr(&out));
}

#[test]
fn scaling_with_one_size_has_no_slope() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("path.txt"), "P p (0,195)\nV 0 0 0.1e-3 0 0.8 p\n").unwrap();
    fs::write(dir.path().join("run.toml"), "toolpath = \"path.txt\"\n[solver]\ncompute_metrics = false\n").unwrap();
    let out = capl(&["scaling", "--config", "run.toml", "--sizes", "300"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("slope: n/a"), "{}", stdout(&out));
    let csv = fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}
