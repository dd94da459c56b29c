//! Minimum-time dynamic programming over distance, velocity and energy.
//!
//! Stages are distance segments. At every stage the state space is a uniform
//! grid of velocity and remaining-energy nodes; each node stores the optimal
//! cost-to-go (seconds) and the input that achieves it. Successor states
//! falling between nodes are evaluated by bilinear weighting of the four
//! surrounding nodes.

mod forward;
mod sweep;
mod tables;

use serde::{Deserialize, Serialize};

use crate::course::Course;
use crate::dynamics::RideModel;
use crate::error::{Error, Result};
use crate::rider::RiderParams;
use crate::trajectory::{Action, Mode};

pub use forward::{forward_pass, forward_pass_lookahead};
pub use sweep::{backward_sweep, dense_oracle};
pub use tables::write_tables;

/// Largest input grid the dense oracle accepts.
pub const MAX_DENSE_LEVELS: usize = 251;
/// Policy code of a node with no feasible input.
pub const NO_ACTION: u8 = u8::MAX;
const LEVEL_BASE: u8 = 4;
/// Weights below this are treated as exact hits on a node.
const WEIGHT_EPS: f64 = 1e-12;

/// Which cost-to-go tables are kept after the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ValueRetention {
    /// Every stage.
    All,
    /// Only stage 0.
    Initial,
    /// Every stage when that stays under 512 MiB, otherwise stage 0 only.
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    pub ds: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub n_v: usize,
    pub n_w: usize,
    /// Seconds charged per expected change of input between stages.
    pub reg_weight: f64,
    pub dense_n_u: Option<usize>,
    pub retain_values: ValueRetention,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            ds: 10.0,
            v_min: 1.0,
            v_max: 20.0,
            n_v: 300,
            n_w: 600,
            reg_weight: 0.05,
            dense_n_u: None,
            retain_values: ValueRetention::Auto,
        }
    }
}

impl DpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("solver config", reason));
        if !(self.ds > 0.0 && self.ds.is_finite()) {
            return bad(format!("ds={} must be positive", self.ds));
        }
        if !(self.v_min > 0.0 && self.v_max > self.v_min && self.v_max.is_finite()) {
            return bad(format!(
                "need 0 < v_min < v_max, got [{}, {}]",
                self.v_min, self.v_max
            ));
        }
        if self.n_v < 2 || self.n_w < 2 {
            return bad(format!("grid {}x{} needs >= 2 nodes per axis", self.n_v, self.n_w));
        }
        if !(self.reg_weight >= 0.0 && self.reg_weight.is_finite()) {
            return bad(format!("reg_weight={} must be >= 0", self.reg_weight));
        }
        if let Some(n) = self.dense_n_u {
            if !(16..=MAX_DENSE_LEVELS).contains(&n) {
                return bad(format!("dense_n_u={n} outside [16, {MAX_DENSE_LEVELS}]"));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> usize {
        self.n_v * self.n_w
    }
}

/// Uniform node spacing on one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    /// Lower cell index and fractional position, clamped to the axis.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let pos = ((x - self.lo) / self.step()).clamp(0.0, (self.n - 1) as f64);
        let i = (pos.floor() as usize).min(self.n - 2);
        (i, pos - i as f64)
    }

    pub fn nearest(&self, x: f64) -> usize {
        let (i, f) = self.locate(x);
        if f > 0.5 {
            i + 1
        } else {
            i
        }
    }
}

/// Decoded policy entry.
pub fn decode_action(code: u8, levels: Option<usize>) -> Option<Action> {
    match code {
        0 => Some(Action::Mode(Mode::Zero)),
        1 => Some(Action::Mode(Mode::Cp)),
        2 => Some(Action::Mode(Mode::Cruise)),
        3 => Some(Action::Mode(Mode::Max)),
        NO_ACTION => None,
        k => levels.map(|n| Action::Level {
            k: k - LEVEL_BASE,
            levels: n as u8,
        }),
    }
}

/// Inputs available at one state, in policy-code order.
#[derive(Debug, Clone)]
pub(crate) struct Candidates {
    items: Vec<(u8, f64)>,
}

impl Candidates {
    pub(crate) fn with_capacity(n: usize) -> Self {
        Self {
            items: Vec::with_capacity(n),
        }
    }

    /// Refills with the admissible inputs at a state.
    ///
    /// `cruise` is the unclamped constant-speed power; `levels` adds the
    /// uniform input grid of the dense oracle.
    #[inline]
    pub(crate) fn fill(&mut self, cp: f64, cruise: f64, u_max: f64, levels: Option<usize>) {
        self.items.clear();
        self.push(0, 0.0);
        if cp <= u_max {
            self.push(1, cp);
        }
        if (0.0..=u_max).contains(&cruise) {
            self.push(2, cruise);
        }
        self.push(3, u_max);
        if let Some(n) = levels {
            for k in 0..n {
                let u = k as f64 / (n - 1) as f64 * u_max;
                self.push(LEVEL_BASE + k as u8, u);
            }
        }
    }

    #[inline]
    fn push(&mut self, code: u8, u: f64) {
        // Equal powers keep the lowest code. Levels are distinct from each
        // other unless u_max is zero, where every level collapses onto ZERO.
        if self.items.iter().take(4).any(|&(_, p)| p == u) {
            return;
        }
        self.items.push((code, u));
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = (u8, f64)> + '_ {
        self.items.iter().copied()
    }

    pub(crate) fn power_of(&self, code: u8) -> Option<f64> {
        self.items.iter().find(|c| c.0 == code).map(|c| c.1)
    }
}

/// The four-mode input set at `(v, w)` on grade `theta`, ordered by mode.
pub fn admissible_inputs(model: &RideModel, v: f64, w: f64, theta: f64) -> Result<Vec<(Mode, f64)>> {
    let u_max = model.u_max_velocity(v, w)?;
    let cruise = model.u_cruise(v, theta)?;
    let mut c = Candidates::with_capacity(4);
    c.fill(model.rider.cp(), cruise, u_max, None);
    Ok(c.iter()
        .map(|(code, u)| match decode_action(code, None) {
            Some(Action::Mode(m)) => (m, u),
            _ => unreachable!("mode set only"),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
enum Values {
    All(Vec<f64>),
    Initial(Vec<f64>),
}

/// Output of a backward sweep; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    config: DpConfig,
    model: RideModel,
    v_axis: Axis,
    w_axis: Axis,
    grades: Vec<f64>,
    course_hash: String,
    policy: Vec<u8>,
    values: Values,
}

impl DpSolution {
    pub fn config(&self) -> &DpConfig {
        &self.config
    }

    pub fn model(&self) -> &RideModel {
        &self.model
    }

    pub fn rider(&self) -> &RiderParams {
        &self.model.rider
    }

    pub fn v_axis(&self) -> Axis {
        self.v_axis
    }

    pub fn w_axis(&self) -> Axis {
        self.w_axis
    }

    pub fn stages(&self) -> usize {
        self.grades.len()
    }

    pub fn grades(&self) -> &[f64] {
        &self.grades
    }

    pub fn course_hash(&self) -> &str {
        &self.course_hash
    }

    pub fn dense_levels(&self) -> Option<usize> {
        self.config.dense_n_u
    }

    pub fn has_all_values(&self) -> bool {
        matches!(self.values, Values::All(_))
    }

    #[inline]
    fn index(&self, stage: usize, iv: usize, iw: usize) -> usize {
        (stage * self.config.n_v + iv) * self.config.n_w + iw
    }

    /// Stored policy code at a node of a stage below the final one.
    pub fn policy_code(&self, stage: usize, iv: usize, iw: usize) -> u8 {
        self.policy[self.index(stage, iv, iw)]
    }

    pub fn policy(&self, stage: usize, iv: usize, iw: usize) -> Option<Action> {
        decode_action(self.policy_code(stage, iv, iw), self.config.dense_n_u)
    }

    /// Cost-to-go in seconds; the final stage is zero everywhere. `None` when
    /// the stage's table was not retained.
    pub fn value(&self, stage: usize, iv: usize, iw: usize) -> Option<f64> {
        if stage == self.stages() {
            return Some(0.0);
        }
        match &self.values {
            Values::All(v) => Some(v[self.index(stage, iv, iw)]),
            Values::Initial(v) if stage == 0 => Some(v[self.index(0, iv, iw)]),
            Values::Initial(_) => None,
        }
    }

    /// Bilinear interpolation of a stage's cost-to-go.
    pub fn value_at(&self, stage: usize, v: f64, w: f64) -> Option<f64> {
        let (iv, fv) = self.v_axis.locate(v);
        let (iw, fw) = self.w_axis.locate(w);
        let mut total = 0.0;
        for (dv, wv) in [(0, 1.0 - fv), (1, fv)] {
            for (dw, ww) in [(0, 1.0 - fw), (1, fw)] {
                let weight = wv * ww;
                if weight > WEIGHT_EPS {
                    total += weight * self.value(stage, iv + dv, iw + dw)?;
                }
            }
        }
        Some(total)
    }

    /// Cost of applying policy `code` at node `(iv, iw)` of `stage` and then
    /// following the stored policy: stage time, interpolated cost-to-go and
    /// the switching penalty. Infinite for infeasible or inadmissible inputs.
    ///
    /// Requires the table of `stage + 1`.
    pub fn q_value(&self, stage: usize, iv: usize, iw: usize, code: u8) -> Option<f64> {
        let ctx = sweep::StageCtx::new(self, stage);
        let next_vals: Vec<f64> = if stage + 1 == self.stages() {
            Vec::new()
        } else {
            let n = self.config.nodes();
            let mut row = Vec::with_capacity(n);
            for i in 0..self.config.n_v {
                for j in 0..self.config.n_w {
                    row.push(self.value(stage + 1, i, j)?);
                }
            }
            row
        };
        let next_pol = (stage + 1 < self.stages()).then(|| {
            let n = self.config.nodes();
            &self.policy[(stage + 1) * n..(stage + 2) * n]
        });
        let v = self.v_axis.node(iv);
        let w = self.w_axis.node(iw);
        let mut cands = Candidates::with_capacity(4 + self.config.dense_n_u.unwrap_or(0));
        ctx.fill_node(&mut cands, iv, iw);
        let u = match cands.power_of(code) {
            Some(u) => u,
            None => return Some(f64::INFINITY),
        };
        Some(ctx.cost(v, w, code, u, &next_vals, next_pol))
    }
}

/// Resamples `course` onto the solver's distance step unless it already is.
pub(crate) fn stage_course(course: &Course, ds: f64) -> Result<Course> {
    match course.ds() {
        Some(d) if (d - ds).abs() <= 1e-9 * ds => Ok(course.clone()),
        _ => course.resample(ds),
    }
}
