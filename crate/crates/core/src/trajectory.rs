//! Ride trajectories sampled at segment boundaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

/// Pacing mode, ordered by preference on ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Mode {
    Zero = 0,
    Cp = 1,
    Cruise = 2,
    Max = 3,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Zero, Mode::Cp, Mode::Cruise, Mode::Max];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Zero => "ZERO",
            Mode::Cp => "CP",
            Mode::Cruise => "CRUISE",
            Mode::Max => "MAX",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What produced the power held over a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Action {
    Mode(Mode),
    /// Uniform fraction `k / (levels - 1)` of the maximal power.
    Level { k: u8, levels: u8 },
    /// Taken from an externally supplied power plan.
    Plan,
}

impl Action {
    pub fn label(&self) -> String {
        match self {
            Action::Mode(m) => m.name().to_string(),
            Action::Level { k, .. } => format!("U{k}"),
            Action::Plan => "PLAN".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub s: f64,
    pub t: f64,
    pub v: f64,
    pub w: f64,
    /// Power held from this sample to the next; zero on the final sample.
    pub u: f64,
    pub action: Option<Action>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryTotals {
    pub finish_time: f64,
    /// Time-weighted mean power, W.
    pub avg_power: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub w_end: f64,
    /// Number of segments ridden under each action label.
    pub mode_histogram: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
    totals: TrajectoryTotals,
}

pub const TRAJECTORY_HEADER: &str = "s_m,t_s,v_mps,w_j,u_w,mode";

impl Trajectory {
    /// `samples` must be non-empty and in ride order.
    pub fn new(samples: Vec<TrajectorySample>) -> Self {
        assert!(!samples.is_empty(), "trajectory needs at least one sample");
        let last = samples[samples.len() - 1];
        let mut work = 0.0;
        let mut histogram = BTreeMap::new();
        for pair in samples.windows(2) {
            work += pair[0].u * (pair[1].t - pair[0].t);
            if let Some(a) = pair[0].action {
                *histogram.entry(a.label()).or_insert(0) += 1;
            }
        }
        let elapsed = last.t - samples[0].t;
        let totals = TrajectoryTotals {
            finish_time: elapsed,
            avg_power: if elapsed > 0.0 { work / elapsed } else { 0.0 },
            w_min: samples.iter().map(|s| s.w).fold(f64::INFINITY, f64::min),
            w_max: samples.iter().map(|s| s.w).fold(f64::NEG_INFINITY, f64::max),
            w_end: last.w,
            mode_histogram: histogram,
        };
        Self { samples, totals }
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn totals(&self) -> &TrajectoryTotals {
        &self.totals
    }

    pub fn finish_time(&self) -> f64 {
        self.totals.finish_time
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * self.samples.len());
        out.push_str(TRAJECTORY_HEADER);
        out.push('\n');
        for s in &self.samples {
            let label = s.action.map(|a| a.label()).unwrap_or_else(|| "END".into());
            let _ = writeln!(out, "{},{},{},{},{},{}", s.s, s.t, s.v, s.w, s.u, label);
        }
        out
    }

    /// Distance covered under `mode` while the reserve is at or below `w_cap`.
    pub fn distance_in_mode_below(&self, mode: Mode, w_cap: f64) -> (f64, f64) {
        let mut matching = 0.0;
        let mut total = 0.0;
        for pair in self.samples.windows(2) {
            if pair[0].w <= w_cap {
                let ds = pair[1].s - pair[0].s;
                total += ds;
                if pair[0].action == Some(Action::Mode(mode)) {
                    matching += ds;
                }
            }
        }
        (matching, total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(s: f64, t: f64, w: f64, u: f64, action: Option<Action>) -> TrajectorySample {
        TrajectorySample {
            s,
            t,
            v: 10.0,
            w,
            u,
            action,
        }
    }

    #[test]
    fn totals_are_time_weighted() {
        let tr = Trajectory::new(vec![
            sample(0.0, 0.0, 100.0, 300.0, Some(Action::Mode(Mode::Max))),
            sample(10.0, 1.0, 50.0, 100.0, Some(Action::Mode(Mode::Cp))),
            sample(20.0, 4.0, 50.0, 0.0, None),
        ]);
        let t = tr.totals();
        assert_eq!(t.finish_time, 4.0);
        assert_eq!(t.avg_power, (300.0 + 300.0) / 4.0);
        assert_eq!((t.w_min, t.w_max, t.w_end), (50.0, 100.0, 50.0));
        assert_eq!(t.mode_histogram["MAX"], 1);
        assert_eq!(t.mode_histogram["CP"], 1);
        let csv = tr.to_csv();
        assert!(csv.starts_with("s_m,t_s,v_mps,w_j,u_w,mode\n0,0,10,100,300,MAX\n"));
        assert!(csv.ends_with(",END\n"));
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(Mode::from_name(m.name()), Some(m));
        }
        assert_eq!(Action::Level { k: 7, levels: 50 }.label(), "U7");
    }
}
