//! Recovering rider parameters from laboratory power traces.
//!
//! All trace areas use the left-rectangle rule at the sample step: sample `k`
//! holds its power over `[t_k, t_k + dt)`.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kvfile::KvFile;
use crate::rider::RiderParams;

/// Length of the all-out effort, s.
pub const ALL_OUT_DURATION_S: f64 = 180.0;
/// Closing window averaged for CP, s.
pub const CP_WINDOW_S: f64 = 30.0;
/// Duration over which CP4 exhausts the full capacity, s.
pub const CP4_EXHAUSTION_S: f64 = 240.0;
/// Default bookkeeping tolerance as a fraction of AWC.
pub const DEFAULT_RECORD_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSample {
    pub t: f64,
    pub power: f64,
    pub cadence: Option<f64>,
}

/// Uniformly sampled power (and optionally cadence) signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerTrace {
    samples: Vec<TraceSample>,
    dt: f64,
}

impl PowerTrace {
    pub fn new(samples: Vec<TraceSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("trace", "need at least 2 samples"));
        }
        let dt = samples[1].t - samples[0].t;
        if !(dt > 0.0) {
            return Err(Error::invalid("trace", "time must be strictly increasing"));
        }
        let tol = 1e-6 * dt.max(1.0);
        for (k, w) in samples.windows(2).enumerate() {
            if ((w[1].t - w[0].t) - dt).abs() > tol {
                return Err(Error::invalid(
                    "trace",
                    format!("non-uniform time step at sample {}", k + 1),
                ));
            }
        }
        if let Some(s) = samples.iter().find(|s| !(s.power >= 0.0 && s.power.is_finite())) {
            return Err(Error::invalid("trace", format!("bad power {} at t={}", s.power, s.t)));
        }
        let with_cadence = samples.iter().filter(|s| s.cadence.is_some()).count();
        if with_cadence != 0 && with_cadence != samples.len() {
            return Err(Error::invalid("trace", "cadence present on only some samples"));
        }
        Ok(Self { samples, dt })
    }

    /// Builds a trace starting at `t = 0` from power values.
    pub fn from_power(dt: f64, power: &[f64]) -> Result<Self> {
        Self::new(
            power
                .iter()
                .enumerate()
                .map(|(k, &p)| TraceSample {
                    t: k as f64 * dt,
                    power: p,
                    cadence: None,
                })
                .collect(),
        )
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn sample_dt(&self) -> f64 {
        self.dt
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn has_cadence(&self) -> bool {
        self.samples[0].cadence.is_some()
    }

    /// Samples whose hold interval starts in `[from, to)` (absolute times).
    pub fn window(&self, from: f64, to: f64) -> &[TraceSample] {
        let eps = 1e-6 * self.dt;
        let lo = self.samples.partition_point(|s| s.t < from - eps);
        let hi = self.samples.partition_point(|s| s.t < to - eps);
        &self.samples[lo..hi.max(lo)]
    }

    /// The final `seconds` of the trace.
    pub fn tail(&self, seconds: f64) -> &[TraceSample] {
        let n = (seconds / self.dt).round() as usize;
        &self.samples[self.samples.len().saturating_sub(n)..]
    }

    pub fn mean_power(samples: &[TraceSample]) -> f64 {
        samples.iter().map(|s| s.power).sum::<f64>() / samples.len() as f64
    }

    /// Work done above `cp`, J; excursions below `cp` count as zero.
    pub fn work_above(&self, samples: &[TraceSample], cp: f64) -> f64 {
        samples.iter().map(|s| (s.power - cp).max(0.0)).sum::<f64>() * self.dt
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    /// `time_s,power_w[,cadence_rpm]` with a header row.
    pub fn parse_csv(text: &str, source_name: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(tc), Some(pc)) = (col("time_s"), col("power_w")) else {
            return Err(Error::Parse {
                source_name: source_name.into(),
                line: 1,
                reason: "header must contain time_s and power_w".into(),
            });
        };
        let cc = col("cadence_rpm");
        let mut samples = Vec::new();
        for (idx, rec) in reader.records().enumerate() {
            let rec = rec?;
            let num = |c: usize| -> Result<f64> {
                rec.get(c)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse {
                        source_name: source_name.into(),
                        line: idx + 2,
                        reason: format!("bad value in column {}", c + 1),
                    })
            };
            samples.push(TraceSample {
                t: num(tc)?,
                power: num(pc)?,
                cadence: cc.map(num).transpose()?,
            });
        }
        Self::new(samples)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.has_cadence() {
            "time_s,power_w,cadence_rpm\n"
        } else {
            "time_s,power_w\n"
        });
        for s in &self.samples {
            match s.cadence {
                Some(c) => out.push_str(&format!("{},{},{}\n", s.t, s.power, c)),
                None => out.push_str(&format!("{},{}\n", s.t, s.power)),
            }
        }
        out
    }
}

/// Segment boundaries of an interval test, absolute seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentBounds {
    pub warmup_end: f64,
    pub cp4_end: f64,
    pub recovery_end: f64,
    pub test_end: f64,
}

impl SegmentBounds {
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        Ok(Self {
            warmup_end: kv.f64("warmup_end_s")?,
            cp4_end: kv.f64("cp4_end_s")?,
            recovery_end: kv.f64("recovery_end_s")?,
            test_end: kv.f64("test_end_s")?,
        })
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new("segments");
        kv.set("warmup_end_s", self.warmup_end);
        kv.set("cp4_end_s", self.cp4_end);
        kv.set("recovery_end_s", self.recovery_end);
        kv.set("test_end_s", self.test_end);
        kv
    }
}

/// Interval test: warm-up, CP4 effort, sub-CP recovery, closing all-out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalTestRecord {
    pub trace: PowerTrace,
    /// Realized mean power over the recovery segment, W.
    pub recovery_power: f64,
    pub recovery_duration: f64,
    pub bounds: SegmentBounds,
}

impl IntervalTestRecord {
    pub fn new(trace: PowerTrace, bounds: SegmentBounds) -> Result<Self> {
        let b = bounds;
        let end = trace.start() + trace.duration() + 1e-6 * trace.sample_dt();
        let ordered = trace.start() <= b.warmup_end
            && b.warmup_end < b.cp4_end
            && b.cp4_end < b.recovery_end
            && b.recovery_end < b.test_end
            && b.test_end <= end;
        if !ordered {
            return Err(Error::invalid(
                "interval record",
                format!("segment bounds {b:?} not increasing within the trace"),
            ));
        }
        let recovery = trace.window(b.cp4_end, b.recovery_end);
        if recovery.is_empty() {
            return Err(Error::invalid("interval record", "empty recovery segment"));
        }
        Ok(Self {
            recovery_power: PowerTrace::mean_power(recovery),
            recovery_duration: b.recovery_end - b.cp4_end,
            trace,
            bounds,
        })
    }

    pub fn load(trace_csv: &Path, sidecar: &Path) -> Result<Self> {
        Self::new(
            PowerTrace::read_csv(trace_csv)?,
            SegmentBounds::from_kv(&KvFile::read(sidecar)?)?,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreeMinuteEstimate {
    pub cp: f64,
    pub awc: f64,
}

/// CP as the mean of the closing 30 s, AWC as the area above CP over the
/// final 180 s.
pub fn estimate_cp_awc_3mt(trace: &PowerTrace) -> Result<ThreeMinuteEstimate> {
    if trace.duration() + 1e-9 < ALL_OUT_DURATION_S {
        return Err(Error::invalid(
            "trace",
            format!("{} s is shorter than the 180 s all-out test", trace.duration()),
        ));
    }
    let cp = PowerTrace::mean_power(trace.tail(CP_WINDOW_S));
    let awc = trace.work_above(trace.tail(ALL_OUT_DURATION_S), cp);
    Ok(ThreeMinuteEstimate { cp, awc })
}

/// Constant power that exhausts AWC in 240 s.
pub fn cp4_power(rider: &RiderParams) -> f64 {
    rider.cp() + rider.awc() / CP4_EXHAUSTION_S
}

/// Energy recovered during the recovery segment, J, using the default
/// tolerance of 2% of AWC.
pub fn recovered_energy(rec: &IntervalTestRecord, cp: f64, awc: f64) -> Result<f64> {
    recovered_energy_with_tolerance(rec, cp, awc, DEFAULT_RECORD_TOLERANCE)
}

pub fn recovered_energy_with_tolerance(
    rec: &IntervalTestRecord,
    cp: f64,
    awc: f64,
    tolerance: f64,
) -> Result<f64> {
    let b = rec.bounds;
    let tr = &rec.trace;
    let spent = tr.work_above(tr.window(b.warmup_end, b.cp4_end), cp)
        + tr.work_above(tr.window(b.recovery_end, b.test_end), cp);
    let recovered = spent - awc;
    let slack = tolerance * awc;
    if recovered < -slack || recovered > awc + slack {
        return Err(Error::InconsistentRecord(format!(
            "recovered energy {recovered:.1} J outside [0, {awc:.1}] J"
        )));
    }
    Ok(recovered)
}

/// Effective recovery power implied by `w_rec` joules regained over `t_rec` s.
pub fn adjusted_power_from_recovery(w_rec: f64, t_rec: f64, cp: f64) -> Result<f64> {
    if !(t_rec > 0.0) {
        return Err(Error::invalid("recovery", format!("t_rec={t_rec} must be positive")));
    }
    Ok(cp - w_rec / t_rec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

impl LineFit {
    pub fn rms_residual(&self) -> f64 {
        (self.residuals.iter().map(|r| r * r).sum::<f64>() / self.residuals.len() as f64).sqrt()
    }
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if points.len() < 2 || !(sxx > 0.0) {
        return Err(Error::invalid("fit", "need at least 2 distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = points.iter().map(|p| p.1 - (slope * p.0 + intercept)).collect();
    Ok(LineFit {
        slope,
        intercept,
        residuals,
    })
}

/// Fits the adjusted recovery power line `p_adj = rec_a * u + rec_b`.
pub fn fit_recovery_model(points: &[(f64, f64)]) -> Result<LineFit> {
    fit_line(points)
}

/// One `(recovery power, adjusted power)` point per recovery power level.
///
/// Records whose recovery powers lie within `level_tolerance` W of each other
/// are one level; both coordinates are averaged over the level's durations.
pub fn recovery_points(
    records: &[IntervalTestRecord],
    cp: f64,
    awc: f64,
    level_tolerance: f64,
) -> Result<Vec<(f64, f64)>> {
    let mut raw = records
        .iter()
        .map(|r| {
            let w_rec = recovered_energy(r, cp, awc)?;
            Ok((r.recovery_power, adjusted_power_from_recovery(w_rec, r.recovery_duration, cp)?))
        })
        .collect::<Result<Vec<_>>>()?;
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut levels: Vec<Vec<(f64, f64)>> = Vec::new();
    for p in raw {
        match levels.last_mut() {
            Some(level) if p.0 - level[0].0 <= level_tolerance => level.push(p),
            _ => levels.push(vec![p]),
        }
    }
    Ok(levels
        .iter()
        .map(|l| {
            let n = l.len() as f64;
            (
                l.iter().map(|p| p.0).sum::<f64>() / n,
                l.iter().map(|p| p.1).sum::<f64>() / n,
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmaxFit {
    pub alpha: f64,
    pub alpha_omega: f64,
    pub omega_max_f: f64,
    /// Power residuals `P - (alpha w + cp)`, W.
    pub power_residuals: Vec<f64>,
    /// Cadence residuals `2 omega - (alpha_omega w + omega_max_f)`, rpm.
    pub cadence_residuals: Vec<f64>,
}

/// Post-hoc fit of the maximal power surface from an all-out trace, assuming
/// the rider sits at the peak of the power-cadence parabola throughout.
pub fn fit_pmax_params(trace: &PowerTrace, cp: f64, awc: f64) -> Result<PmaxFit> {
    fit_pmax_params_with_tolerance(trace, cp, awc, DEFAULT_RECORD_TOLERANCE)
}

pub fn fit_pmax_params_with_tolerance(
    trace: &PowerTrace,
    cp: f64,
    awc: f64,
    tolerance: f64,
) -> Result<PmaxFit> {
    if !trace.has_cadence() {
        return Err(Error::invalid("trace", "cadence column required"));
    }
    if trace.duration() + 1e-9 < ALL_OUT_DURATION_S {
        return Err(Error::invalid("trace", "shorter than the 180 s all-out test"));
    }
    let samples = trace.tail(ALL_OUT_DURATION_S);
    let dt = trace.sample_dt();
    let slack = tolerance * awc;

    // Remaining energy at the start of each sample. Below CP there is no
    // recovery model yet, so such samples neither spend nor recover.
    let mut energy = Vec::with_capacity(samples.len());
    let mut w = awc;
    for s in samples {
        if w < -slack {
            return Err(Error::InconsistentRecord(format!(
                "reconstructed energy {w:.1} J below zero at t={}",
                s.t
            )));
        }
        energy.push(w.max(0.0));
        w -= dt * (s.power - cp).max(0.0);
    }
    if w < -slack {
        return Err(Error::InconsistentRecord(format!(
            "trace spends {:.1} J more than AWC",
            -w
        )));
    }

    let sww: f64 = energy.iter().map(|w| w * w).sum();
    let alpha = if sww > 0.0 {
        energy
            .iter()
            .zip(samples)
            .map(|(w, s)| w * (s.power - cp))
            .sum::<f64>()
            / sww
    } else {
        0.0
    };
    let power_residuals = energy
        .iter()
        .zip(samples)
        .map(|(w, s)| s.power - (alpha * w + cp))
        .collect();

    let cadence_points: Vec<(f64, f64)> = energy
        .iter()
        .zip(samples)
        .map(|(w, s)| (*w, 2.0 * s.cadence.unwrap_or(0.0)))
        .collect();
    let (alpha_omega, omega_max_f, cadence_residuals) = match fit_line(&cadence_points) {
        Ok(fit) => (fit.slope, fit.intercept, fit.residuals),
        Err(_) => {
            // Energy never moved: the cadence slope is unidentifiable.
            let mean = cadence_points.iter().map(|p| p.1).sum::<f64>() / cadence_points.len() as f64;
            let res = cadence_points.iter().map(|p| p.1 - mean).collect();
            (0.0, mean, res)
        }
    };
    Ok(PmaxFit {
        alpha,
        alpha_omega,
        omega_max_f,
        power_residuals,
        cadence_residuals,
    })
}

/// Synthetic laboratory traces generated from known rider parameters.
pub mod synth {
    use super::*;

    /// All-out test at the peak of the power-cadence parabola, preceded by
    /// `lead_in_s` seconds at `lead_in_power` (below CP, so the reserve stays full).
    pub fn all_out_trace(
        rider: &RiderParams,
        dt: f64,
        lead_in_s: f64,
        lead_in_power: f64,
    ) -> Result<PowerTrace> {
        if !(dt > 0.0) || lead_in_power >= rider.cp() {
            return Err(Error::invalid("synthetic trace", "dt > 0 and lead-in below CP"));
        }
        let mut samples = Vec::new();
        let lead = (lead_in_s / dt).round() as usize;
        let half_top = rider.max_cadence(rider.awc()) / 2.0;
        for k in 0..lead {
            samples.push(TraceSample {
                t: k as f64 * dt,
                power: lead_in_power,
                cadence: Some(half_top),
            });
        }
        let mut w = rider.awc();
        let n = (ALL_OUT_DURATION_S / dt).round() as usize;
        for k in 0..n {
            let power = rider.peak_power(w);
            samples.push(TraceSample {
                t: (lead + k) as f64 * dt,
                power,
                cadence: Some(rider.max_cadence(w) / 2.0),
            });
            w -= dt * (power - rider.cp());
        }
        PowerTrace::new(samples)
    }

    /// Layout of a synthetic interval test; every segment is constant power
    /// except the closing effort, which spends the remaining reserve evenly
    /// over 150 s and then holds CP.
    #[derive(Debug, Clone, Copy)]
    pub struct IntervalPlan {
        pub dt: f64,
        pub warmup_s: f64,
        pub warmup_power: f64,
        pub effort_s: f64,
        pub effort_power: f64,
        pub recovery_s: f64,
        pub recovery_power: f64,
    }

    /// Returns the record and the reserve trajectory simulated alongside it.
    pub fn interval_test(
        rider: &RiderParams,
        plan: IntervalPlan,
    ) -> Result<(IntervalTestRecord, Vec<f64>)> {
        let dt = plan.dt;
        let count = |s: f64| (s / dt).round() as usize;
        let mut power = Vec::new();
        let mut energy = Vec::new();
        let mut w = rider.awc();
        let push = |p: f64, w: &mut f64, power: &mut Vec<f64>, energy: &mut Vec<f64>| {
            power.push(p);
            energy.push(*w);
            *w = (*w + dt * rider.energy_rate(p)).clamp(0.0, rider.awc());
        };
        for _ in 0..count(plan.warmup_s) {
            push(plan.warmup_power, &mut w, &mut power, &mut energy);
        }
        for _ in 0..count(plan.effort_s) {
            push(plan.effort_power, &mut w, &mut power, &mut energy);
        }
        for _ in 0..count(plan.recovery_s) {
            push(plan.recovery_power, &mut w, &mut power, &mut energy);
        }
        let burn = rider.cp() + w / (ALL_OUT_DURATION_S - CP_WINDOW_S);
        for _ in 0..count(ALL_OUT_DURATION_S - CP_WINDOW_S) {
            push(burn, &mut w, &mut power, &mut energy);
        }
        for _ in 0..count(CP_WINDOW_S) {
            push(rider.cp(), &mut w, &mut power, &mut energy);
        }
        energy.push(w);
        let trace = PowerTrace::from_power(dt, &power)?;
        let b0 = plan.warmup_s;
        let b1 = b0 + plan.effort_s;
        let b2 = b1 + plan.recovery_s;
        let bounds = SegmentBounds {
            warmup_end: b0,
            cp4_end: b1,
            recovery_end: b2,
            test_end: b2 + ALL_OUT_DURATION_S,
        };
        Ok((IntervalTestRecord::new(trace, bounds)?, energy))
    }
}
