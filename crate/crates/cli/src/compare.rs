//! `compare`: relative error of simulated against measured melt pool metrics.

use std::collections::{BTreeMap, BTreeSet};

use anyhow::{bail, Result};
use capl::meltpool::MetricsRow;
use serde::Serialize;

use crate::simulate::FrameVector;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameError {
    pub frame: usize,
    pub vector_id: Option<usize>,
    pub sim_length_m: f64,
    pub exp_length_m: f64,
    pub rel_err_length: f64,
    pub sim_width_m: f64,
    pub exp_width_m: f64,
    pub rel_err_width: f64,
    /// 1 when either side is flagged and the frame is left out of the means.
    pub excluded: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    /// `case` for the whole run, `vector` for one scan vector.
    pub scope: String,
    pub key: String,
    pub frames: usize,
    pub mean_rel_err_length: f64,
    pub mean_rel_err_width: f64,
    pub mean_sim_length_m: f64,
    pub mean_exp_length_m: f64,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub frames: Vec<FrameError>,
    pub report: Vec<ReportRow>,
}

fn relative(sim: f64, exp: f64) -> f64 {
    if exp > 0.0 {
        (sim - exp).abs() / exp
    } else {
        f64::NAN
    }
}

fn summarize(scope: &str, key: String, frames: &[&FrameError]) -> ReportRow {
    let mean = |f: &dyn Fn(&FrameError) -> f64| {
        let vals: Vec<f64> = frames.iter().map(|e| f(e)).filter(|v| v.is_finite()).collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    ReportRow {
        scope: scope.into(),
        key,
        frames: frames.len(),
        mean_rel_err_length: mean(&|e| e.rel_err_length),
        mean_rel_err_width: mean(&|e| e.rel_err_width),
        mean_sim_length_m: mean(&|e| e.sim_length_m),
        mean_exp_length_m: mean(&|e| e.exp_length_m),
    }
}

/// Pairs rows by frame number. Both tables must cover the same frames.
/// Flagged frames are reported but left out of the means; `vectors` adds
/// per-vector means.
pub fn compare(sim: &[MetricsRow], exp: &[MetricsRow], vectors: Option<&[FrameVector]>) -> Result<Comparison> {
    let sim_by: BTreeMap<usize, &MetricsRow> = sim.iter().map(|r| (r.frame, r)).collect();
    let exp_by: BTreeMap<usize, &MetricsRow> = exp.iter().map(|r| (r.frame, r)).collect();
    if sim_by.len() != sim.len() || exp_by.len() != exp.len() {
        bail!("duplicate frame numbers in the input tables");
    }
    let sim_keys: BTreeSet<usize> = sim_by.keys().copied().collect();
    let exp_keys: BTreeSet<usize> = exp_by.keys().copied().collect();
    if sim_keys != exp_keys {
        let only = |a: &BTreeSet<usize>, b: &BTreeSet<usize>| {
            let v: Vec<String> = a.difference(b).take(20).map(|f| f.to_string()).collect();
            let more = a.difference(b).count().saturating_sub(20);
            if more > 0 {
                format!("{} and {more} more", v.join(", "))
            } else {
                v.join(", ")
            }
        };
        bail!(
            "frame tables are misaligned ({} simulated, {} measured); only simulated: [{}]; only measured: [{}]",
            sim.len(),
            exp.len(),
            only(&sim_keys, &exp_keys),
            only(&exp_keys, &sim_keys)
        );
    }
    let vector_of: BTreeMap<usize, usize> = vectors
        .unwrap_or(&[])
        .iter()
        .map(|fv| (fv.frame, fv.vector_id))
        .collect();

    let frames: Vec<FrameError> = sim_keys
        .iter()
        .map(|f| {
            let (s, e) = (sim_by[f], exp_by[f]);
            FrameError {
                frame: *f,
                vector_id: vector_of.get(f).copied(),
                sim_length_m: s.length_m,
                exp_length_m: e.length_m,
                rel_err_length: relative(s.length_m, e.length_m),
                sim_width_m: s.width_m,
                exp_width_m: e.width_m,
                rel_err_width: relative(s.width_m, e.width_m),
                excluded: u8::from(e.outlier_flag != 0 || s.outlier_flag != 0 || !(e.length_m > 0.0)),
            }
        })
        .collect();

    let kept: Vec<&FrameError> = frames.iter().filter(|e| e.excluded == 0).collect();
    let mut report = vec![summarize("case", "all".into(), &kept)];
    let mut by_vector: BTreeMap<usize, Vec<&FrameError>> = BTreeMap::new();
    for e in &kept {
        if let Some(v) = e.vector_id {
            by_vector.entry(v).or_default().push(e);
        }
    }
    for (v, list) in by_vector {
        report.push(summarize("vector", v.to_string(), &list));
    }
    Ok(Comparison { frames, report })
}
