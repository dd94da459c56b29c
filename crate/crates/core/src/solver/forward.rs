use super::{decode_action, stage_course, Candidates, DpSolution, LEVEL_BASE, NO_ACTION, WEIGHT_EPS};
use crate::course::Course;
use crate::dynamics::transition;
use crate::error::{Error, Result};
use crate::trajectory::{Trajectory, TrajectorySample};

/// Rides the course from `(v0, w0)` following the solution's policy.
///
/// State is tracked continuously. The input is chosen by majority vote of the
/// four grid neighbours (ties to the lowest code) and re-evaluated at the
/// actual state; when the voted input would leave the grid or overdraw the
/// reserve, the admissible input closest in power is used instead.
pub fn forward_pass(sol: &DpSolution, course: &Course, v0: f64, w0: f64) -> Result<Trajectory> {
    let cfg = &sol.config;
    check_start(sol, course, v0, w0)?;
    let model = &sol.model;
    let rider = &model.rider;
    let awc = rider.awc();

    let levels = cfg.dense_n_u;
    let mut cands = Candidates::with_capacity(4 + levels.unwrap_or(0));
    let mut order: Vec<u8> = Vec::with_capacity(8);
    let mut samples = Vec::with_capacity(sol.stages() + 1);
    let (mut v, mut w, mut t) = (v0, w0, 0.0);

    for stage in 0..sol.stages() {
        let res = model.resistance(sol.grades[stage]);
        let u_max = model.bike.max_power(v, w, rider);
        let cruise = res.cruise_power(v, model.mass());
        cands.fill(rider.cp(), cruise, u_max, levels);

        let votes = neighbour_votes(sol, stage, v, w);
        if votes.is_empty() {
            return Err(Error::PolicyLookup { stage, v, w });
        }
        let target = nominal_power(votes[0].0, rider.cp(), cruise, u_max, levels);
        order.clear();
        order.extend(votes.iter().map(|(code, _)| *code));
        let mut rest: Vec<(u8, f64)> = cands.iter().filter(|(c, _)| !order.contains(c)).collect();
        rest.sort_by(|a, b| {
            (a.1 - target)
                .abs()
                .total_cmp(&(b.1 - target).abs())
                .then(a.0.cmp(&b.0))
        });
        order.extend(rest.iter().map(|(c, _)| *c));

        let chosen = order.iter().find_map(|&code| {
            let u = cands.power_of(code)?;
            let tr = transition(rider, model.mass(), &res, v, w, u, cfg.ds)?;
            let ok = tr.v >= cfg.v_min && tr.v <= cfg.v_max && tr.w >= -1e-9 * awc;
            ok.then_some((code, u, tr))
        });
        let Some((code, u, tr)) = chosen else {
            return Err(Error::PolicyLookup { stage, v, w });
        };
        samples.push(TrajectorySample {
            s: stage as f64 * cfg.ds,
            t,
            v,
            w,
            u,
            action: decode_action(code, levels),
        });
        v = tr.v;
        w = tr.w.clamp(0.0, awc);
        t += tr.dt;
    }
    samples.push(TrajectorySample {
        s: sol.stages() as f64 * cfg.ds,
        t,
        v,
        w,
        u: 0.0,
        action: None,
    });
    Ok(Trajectory::new(samples))
}

fn check_start(sol: &DpSolution, course: &Course, v0: f64, w0: f64) -> Result<()> {
    let cfg = &sol.config;
    let course = stage_course(course, cfg.ds)?;
    let hash = course.content_hash();
    if hash != sol.course_hash {
        return Err(Error::CourseMismatch {
            a: sol.course_hash.clone(),
            b: hash,
        });
    }
    let awc = sol.model.rider.awc();
    if !(cfg.v_min..=cfg.v_max).contains(&v0) || !(0.0..=awc).contains(&w0) {
        return Err(Error::invalid(
            "initial state",
            format!("(v0={v0}, w0={w0}) outside the grid"),
        ));
    }
    Ok(())
}

/// Rides the course choosing, at every actual state, the input that
/// minimises stage time plus the interpolated cost-to-go.
///
/// Unlike [`forward_pass`] this does not read the stored policy, so it
/// realises large input sets (the dense oracle) without the vote collapsing
/// onto one level. Needs every stage's values
/// ([`ValueRetention::All`](super::ValueRetention::All)); the switching
/// penalty is not charged.
pub fn forward_pass_lookahead(
    sol: &DpSolution,
    course: &Course,
    v0: f64,
    w0: f64,
) -> Result<Trajectory> {
    if !sol.has_all_values() {
        return Err(Error::invalid(
            "solution",
            "lookahead extraction needs the values of every stage",
        ));
    }
    check_start(sol, course, v0, w0)?;
    let cfg = &sol.config;
    let model = &sol.model;
    let rider = &model.rider;
    let awc = rider.awc();
    let levels = cfg.dense_n_u;
    let mut cands = Candidates::with_capacity(4 + levels.unwrap_or(0));
    let mut samples = Vec::with_capacity(sol.stages() + 1);
    let (mut v, mut w, mut t) = (v0, w0, 0.0);

    for stage in 0..sol.stages() {
        let res = model.resistance(sol.grades[stage]);
        let u_max = model.bike.max_power(v, w, rider);
        cands.fill(rider.cp(), res.cruise_power(v, model.mass()), u_max, levels);
        let mut best: Option<(f64, u8, f64, crate::dynamics::Transition)> = None;
        for (code, u) in cands.iter() {
            let Some(tr) = transition(rider, model.mass(), &res, v, w, u, cfg.ds) else {
                continue;
            };
            if tr.v < cfg.v_min || tr.v > cfg.v_max || tr.w < -1e-9 * awc {
                continue;
            }
            let ahead = sol
                .value_at(stage + 1, tr.v, tr.w.clamp(0.0, awc))
                .expect("all stages retained");
            let cost = tr.dt + ahead;
            if cost.is_finite() && best.as_ref().map_or(true, |b| cost < b.0) {
                best = Some((cost, code, u, tr));
            }
        }
        let Some((_, code, u, tr)) = best else {
            return Err(Error::PolicyLookup { stage, v, w });
        };
        samples.push(TrajectorySample {
            s: stage as f64 * cfg.ds,
            t,
            v,
            w,
            u,
            action: decode_action(code, levels),
        });
        v = tr.v;
        w = tr.w.clamp(0.0, awc);
        t += tr.dt;
    }
    samples.push(TrajectorySample {
        s: sol.stages() as f64 * cfg.ds,
        t,
        v,
        w,
        u: 0.0,
        action: None,
    });
    Ok(Trajectory::new(samples))
}

/// Policy codes of the neighbouring nodes with their vote counts, most votes
/// first, ties to the lowest code.
fn neighbour_votes(sol: &DpSolution, stage: usize, v: f64, w: f64) -> Vec<(u8, usize)> {
    let (iv, fv) = sol.v_axis.locate(v);
    let (iw, fw) = sol.w_axis.locate(w);
    let mut votes: Vec<(u8, usize)> = Vec::with_capacity(4);
    for (dv, wv) in [(0, 1.0 - fv), (1, fv)] {
        for (dw, ww) in [(0, 1.0 - fw), (1, fw)] {
            if wv * ww <= WEIGHT_EPS {
                continue;
            }
            let code = sol.policy_code(stage, iv + dv, iw + dw);
            if code == NO_ACTION {
                continue;
            }
            match votes.iter_mut().find(|(c, _)| *c == code) {
                Some(entry) => entry.1 += 1,
                None => votes.push((code, 1)),
            }
        }
    }
    votes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    votes
}

/// Power a policy code asks for at a state, before admissibility.
fn nominal_power(code: u8, cp: f64, cruise: f64, u_max: f64, levels: Option<usize>) -> f64 {
    match code {
        0 => 0.0,
        1 => cp.min(u_max),
        2 => cruise.clamp(0.0, u_max),
        3 => u_max,
        k => {
            let n = levels.unwrap_or(2);
            (k - LEVEL_BASE) as f64 / (n - 1) as f64 * u_max
        }
    }
}
