//! Machine-readable run summaries and their comparison.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::course::Course;
use crate::dynamics::{BikeParams, DynamicsVariant, RideModel};
use crate::error::{Error, Result};
use crate::rider::RiderValues;
use crate::solver::DpConfig;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub ds: f64,
    pub variant: DynamicsVariant,
    pub v0: f64,
    pub w0: f64,
    pub rider: RiderValues,
    pub bike: BikeParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<DpConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// `solve` or `simulate`.
    pub kind: String,
    pub finish_time_s: f64,
    pub avg_power_w: f64,
    pub mode_histogram: BTreeMap<String, usize>,
    pub w_min: f64,
    pub w_max: f64,
    pub w_end: f64,
    pub course_hash: String,
    pub course_length_m: f64,
    pub clamped_inputs: usize,
    pub depleted_steps: usize,
    pub config: ConfigEcho,
}

impl RunSummary {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: &str,
        trajectory: &Trajectory,
        course: &Course,
        model: &RideModel,
        ds: f64,
        v0: f64,
        w0: f64,
        solver: Option<DpConfig>,
    ) -> Self {
        let t = trajectory.totals();
        Self {
            kind: kind.to_string(),
            finish_time_s: t.finish_time,
            avg_power_w: t.avg_power,
            mode_histogram: t.mode_histogram.clone(),
            w_min: t.w_min,
            w_max: t.w_max,
            w_end: t.w_end,
            course_hash: course.content_hash(),
            course_length_m: course.length(),
            clamped_inputs: 0,
            depleted_steps: 0,
            config: ConfigEcho {
                ds,
                variant: model.variant,
                v0,
                w0,
                rider: model.rider.values(),
                bike: model.bike.bike().clone(),
                solver,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Candidate run measured against a baseline on the same course.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub baseline_time_s: f64,
    pub candidate_time_s: f64,
    /// candidate minus baseline, s.
    pub delta_time_s: f64,
    pub baseline_avg_power_w: f64,
    pub candidate_avg_power_w: f64,
    /// candidate minus baseline, W.
    pub delta_avg_power_w: f64,
    /// candidate time over baseline time.
    pub time_ratio: f64,
}

pub fn compare(baseline: &RunSummary, candidate: &RunSummary) -> Result<Comparison> {
    if baseline.course_hash != candidate.course_hash {
        return Err(Error::CourseMismatch {
            a: baseline.course_hash.clone(),
            b: candidate.course_hash.clone(),
        });
    }
    Ok(Comparison {
        baseline_time_s: baseline.finish_time_s,
        candidate_time_s: candidate.finish_time_s,
        delta_time_s: candidate.finish_time_s - baseline.finish_time_s,
        baseline_avg_power_w: baseline.avg_power_w,
        candidate_avg_power_w: candidate.avg_power_w,
        delta_avg_power_w: candidate.avg_power_w - baseline.avg_power_w,
        time_ratio: candidate.finish_time_s / baseline.finish_time_s,
    })
}

impl std::fmt::Display for Comparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "finish time: {:.1} s -> {:.1} s (delta {:+.1} s, ratio {:.1}%)",
            self.baseline_time_s,
            self.candidate_time_s,
            self.delta_time_s,
            100.0 * self.time_ratio
        )?;
        write!(
            f,
            "avg power:   {:.1} W -> {:.1} W (delta {:+.1} W)",
            self.baseline_avg_power_w, self.candidate_avg_power_w, self.delta_avg_power_w
        )
    }
}
