use std::borrow::Cow;

use rayon::prelude::*;

use super::{
    stage_course, Axis, Candidates, DpConfig, DpSolution, ValueRetention, Values, NO_ACTION,
    WEIGHT_EPS,
};
use crate::course::Course;
use crate::dynamics::{transition, Resistance, RideModel};
use crate::error::{Error, Result};
use crate::rider::RiderParams;

const AUTO_VALUE_BUDGET: usize = 512 << 20;

/// Everything needed to evaluate inputs at one stage.
pub(super) struct StageCtx<'a> {
    rider: &'a RiderParams,
    mass: f64,
    res: Resistance,
    ds: f64,
    v_axis: Axis,
    w_axis: Axis,
    u_max: Cow<'a, [f64]>,
    levels: Option<usize>,
    reg: f64,
    n_w: usize,
}

impl<'a> StageCtx<'a> {
    /// Context for re-evaluating a finished solution.
    pub(super) fn new(sol: &'a DpSolution, stage: usize) -> StageCtx<'a> {
        let model = &sol.model;
        StageCtx {
            rider: &model.rider,
            mass: model.mass(),
            res: model.resistance(sol.grades[stage]),
            ds: sol.config.ds,
            v_axis: sol.v_axis,
            w_axis: sol.w_axis,
            u_max: Cow::Owned(u_max_table(model, sol.v_axis, sol.w_axis)),
            levels: sol.config.dense_n_u,
            reg: sol.config.reg_weight,
            n_w: sol.config.n_w,
        }
    }

    #[inline]
    fn u_max(&self, iv: usize, iw: usize) -> f64 {
        self.u_max[iv * self.n_w + iw]
    }

    /// Admissible inputs at grid node `(iv, iw)`.
    pub(super) fn fill_node(&self, cands: &mut Candidates, iv: usize, iw: usize) {
        let v = self.v_axis.node(iv);
        cands.fill(
            self.rider.cp(),
            self.res.cruise_power(v, self.mass),
            self.u_max(iv, iw),
            self.levels,
        );
    }

    /// Total cost of input `u` (policy `code`) from node state `(v, w)`.
    #[inline]
    pub(super) fn cost(
        &self,
        v: f64,
        w: f64,
        code: u8,
        u: f64,
        next_vals: &[f64],
        next_pol: Option<&[u8]>,
    ) -> f64 {
        let awc = self.rider.awc();
        let Some(tr) = transition(self.rider, self.mass, &self.res, v, w, u, self.ds) else {
            return f64::INFINITY;
        };
        if tr.v < self.v_axis.lo || tr.v > self.v_axis.hi || tr.w < -1e-9 * awc {
            return f64::INFINITY;
        }
        if next_vals.is_empty() {
            return tr.dt;
        }
        let w_next = tr.w.clamp(0.0, awc);
        let (iv, fv) = self.v_axis.locate(tr.v);
        let (iw, fw) = self.w_axis.locate(w_next);
        let mut expected = 0.0;
        let mut switches = 0.0;
        for (dv, wv) in [(0, 1.0 - fv), (1, fv)] {
            for (dw, ww) in [(0, 1.0 - fw), (1, fw)] {
                let weight = wv * ww;
                if weight <= WEIGHT_EPS {
                    continue;
                }
                let idx = (iv + dv) * self.n_w + iw + dw;
                expected += weight * next_vals[idx];
                if let Some(pol) = next_pol {
                    if pol[idx] != code {
                        switches += weight;
                    }
                }
            }
        }
        tr.dt + expected + self.reg * switches
    }
}

pub(crate) fn u_max_table(model: &RideModel, v_axis: Axis, w_axis: Axis) -> Vec<f64> {
    let mut table = Vec::with_capacity(v_axis.n * w_axis.n);
    for iv in 0..v_axis.n {
        let v = v_axis.node(iv);
        for iw in 0..w_axis.n {
            table.push(model.bike.max_power(v, w_axis.node(iw), &model.rider));
        }
    }
    table
}

/// Backward induction with the four-mode input set (plus the uniform input
/// grid when `cfg.dense_n_u` is set).
pub fn backward_sweep(course: &Course, model: &RideModel, cfg: &DpConfig) -> Result<DpSolution> {
    cfg.validate()?;
    let course = stage_course(course, cfg.ds)?;
    let n_stages = course.segments();
    let nodes = cfg.nodes();
    let v_axis = Axis::new(cfg.v_min, cfg.v_max, cfg.n_v);
    let w_axis = Axis::new(0.0, model.rider.awc(), cfg.n_w);
    let u_max = u_max_table(model, v_axis, w_axis);

    let keep_all = match cfg.retain_values {
        ValueRetention::All => true,
        ValueRetention::Initial => false,
        ValueRetention::Auto => n_stages * nodes * 8 <= AUTO_VALUE_BUDGET,
    };
    let mut all_values = if keep_all {
        vec![0.0; n_stages * nodes]
    } else {
        Vec::new()
    };
    let mut policy = vec![NO_ACTION; n_stages * nodes];
    let mut next = Vec::<f64>::new();
    let mut cur = vec![0.0; nodes];

    for stage in (0..n_stages).rev() {
        let ctx = StageCtx {
            rider: &model.rider,
            mass: model.mass(),
            res: model.resistance(course.grades()[stage]),
            ds: cfg.ds,
            v_axis,
            w_axis,
            u_max: Cow::Borrowed(&u_max),
            levels: cfg.dense_n_u,
            reg: cfg.reg_weight,
            n_w: cfg.n_w,
        };
        let (head, tail) = policy.split_at_mut((stage + 1) * nodes);
        let pol_cur = &mut head[stage * nodes..];
        let pol_next = (!tail.is_empty()).then(|| &tail[..nodes]);
        let next_vals = &next[..];

        cur.par_chunks_mut(cfg.n_w)
            .zip(pol_cur.par_chunks_mut(cfg.n_w))
            .enumerate()
            .for_each(|(iv, (vrow, prow))| {
                let v = v_axis.node(iv);
                let mut cands = Candidates::with_capacity(4 + cfg.dense_n_u.unwrap_or(0));
                for iw in 0..cfg.n_w {
                    let w = w_axis.node(iw);
                    ctx.fill_node(&mut cands, iv, iw);
                    let mut best = (f64::INFINITY, NO_ACTION);
                    for (code, u) in cands.iter() {
                        let c = ctx.cost(v, w, code, u, next_vals, pol_next);
                        if c < best.0 {
                            best = (c, code);
                        }
                    }
                    vrow[iw] = best.0;
                    prow[iw] = best.1;
                }
            });

        if cur.iter().all(|c| c.is_infinite()) {
            return Err(Error::InfeasibleProblem { stage });
        }
        if keep_all {
            all_values[stage * nodes..(stage + 1) * nodes].copy_from_slice(&cur);
        }
        std::mem::swap(&mut next, &mut cur);
        if cur.len() != nodes {
            cur = vec![0.0; nodes];
        }
    }

    // After the final swap the stage-0 table sits in `next`.
    let start = v_axis.nearest(cfg.v_min) * cfg.n_w + w_axis.nearest(model.rider.awc());
    if next[start].is_infinite() {
        return Err(Error::InfeasibleProblem { stage: 0 });
    }
    let values = if keep_all {
        Values::All(all_values)
    } else {
        Values::Initial(next)
    };
    Ok(DpSolution {
        config: cfg.clone(),
        model: model.clone(),
        v_axis,
        w_axis,
        grades: course.grades().to_vec(),
        course_hash: course.content_hash(),
        policy,
        values,
    })
}

/// Reference sweep over a uniform input grid on `[0, u_max]` with the exact
/// four-mode powers injected. Regularization is always off.
pub fn dense_oracle(course: &Course, model: &RideModel, cfg: &DpConfig) -> Result<DpSolution> {
    if cfg.dense_n_u.is_none() {
        return Err(Error::invalid("solver config", "dense oracle needs dense_n_u"));
    }
    let cfg = DpConfig {
        reg_weight: 0.0,
        ..cfg.clone()
    };
    backward_sweep(course, model, &cfg)
}
