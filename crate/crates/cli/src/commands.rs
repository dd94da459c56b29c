use std::time::Instant;

use anyhow::{bail, Context, Result};
use optipace_core::calibration::{
    estimate_cp_awc_3mt, fit_pmax_params, fit_recovery_model, recovery_points,
    IntervalTestRecord, PowerTrace,
};
use optipace_core::rider::RIDER_KEYS;
use optipace_core::simulate::two_half_time_plan;
use optipace_core::solver::write_tables;
use optipace_core::{
    backward_sweep, compare as compare_runs, dense_oracle, forward_pass, simulate as ride_plan,
    DpConfig, KvFile, PowerPlan, RiderParams, RunSummary, Trajectory,
};

use crate::manifest::{create_dir, write, RunManifest};
use crate::{CalibrateArgs, CompareArgs, SimulateArgs, SolveArgs};

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn rms(xs: &[f64]) -> f64 {
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len().max(1) as f64).sqrt()
}

pub fn calibrate(args: &CalibrateArgs) -> Result<()> {
    let traces = args
        .traces
        .iter()
        .map(|p| PowerTrace::read_csv(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let intervals = args
        .intervals
        .chunks(2)
        .map(|pair| {
            IntervalTestRecord::load(&pair[0], &pair[1])
                .with_context(|| format!("reading interval test {}", pair[0].display()))
        })
        .collect::<Result<Vec<_>>>()?;

    let estimates = traces
        .iter()
        .map(estimate_cp_awc_3mt)
        .collect::<optipace_core::Result<Vec<_>>>()?;
    let cp = mean(&estimates.iter().map(|e| e.cp).collect::<Vec<_>>());
    let awc = mean(&estimates.iter().map(|e| e.awc).collect::<Vec<_>>());
    println!("all-out tests: {}", traces.len());
    println!("cp  = {cp:.3} W");
    println!("awc = {awc:.1} J");

    let mut kv = KvFile::new("rider");
    kv.set("cp", cp);
    kv.set("awc", awc);

    if intervals.is_empty() {
        eprintln!("warning: no interval tests given; rec_a and rec_b left out");
    } else {
        let points = recovery_points(&intervals, cp, awc, args.level_tolerance)?;
        let fit = fit_recovery_model(&points)?;
        println!(
            "recovery: p_adj = {:.4} * u + {:.3} ({} levels, rms residual {:.3} W)",
            fit.slope,
            fit.intercept,
            points.len(),
            fit.rms_residual()
        );
        kv.set("rec_a", fit.slope);
        kv.set("rec_b", fit.intercept);
    }

    if traces.iter().all(|t| t.has_cadence()) {
        let fits = traces
            .iter()
            .map(|t| fit_pmax_params(t, cp, awc))
            .collect::<optipace_core::Result<Vec<_>>>()?;
        let alpha = mean(&fits.iter().map(|f| f.alpha).collect::<Vec<_>>());
        let alpha_omega = mean(&fits.iter().map(|f| f.alpha_omega).collect::<Vec<_>>());
        let omega_max_f = mean(&fits.iter().map(|f| f.omega_max_f).collect::<Vec<_>>());
        let p_res: Vec<f64> = fits.iter().flat_map(|f| f.power_residuals.clone()).collect();
        let c_res: Vec<f64> = fits.iter().flat_map(|f| f.cadence_residuals.clone()).collect();
        println!("alpha       = {alpha:.6} (rms power residual {:.3} W)", rms(&p_res));
        println!(
            "alpha_omega = {alpha_omega:.6}, omega_max_f = {omega_max_f:.4} (rms cadence residual {:.3} rpm)",
            rms(&c_res)
        );
        kv.set("alpha", alpha);
        kv.set("alpha_omega", alpha_omega);
        kv.set("omega_max_f", omega_max_f);
    } else {
        eprintln!("warning: traces lack cadence; power-cadence parameters left out");
    }

    match args.mass {
        Some(m) => kv.set("mass_rider", m),
        None => eprintln!("warning: no --mass given; mass_rider left out"),
    }

    // Write keys in canonical order.
    let mut ordered = KvFile::new("rider");
    for key in RIDER_KEYS {
        if let Some(v) = kv.get(key) {
            ordered.set(key, v);
        }
    }
    if RIDER_KEYS.iter().all(|k| ordered.contains(k)) {
        RiderParams::from_kv(&ordered).context("calibrated parameters are not a valid rider")?;
    }
    create_dir(&args.out)?;
    let path = args.out.join("rider.txt");
    write(&path, &ordered.to_string())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn report(summary: &RunSummary) {
    println!("finish time: {:.2} s", summary.finish_time_s);
    println!("avg power:   {:.2} W", summary.avg_power_w);
    println!(
        "reserve:     min {:.1} J, end {:.1} J",
        summary.w_min, summary.w_end
    );
    let modes: Vec<String> = summary
        .mode_histogram
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    println!("segments:    {}", modes.join(" "));
}

fn write_run(m: &RunManifest, trajectory: &Trajectory, summary: &RunSummary) -> Result<()> {
    write(&m.out.join("trajectory.csv"), &trajectory.to_csv())?;
    write(&m.out.join("summary.json"), &(summary.to_json() + "\n"))?;
    report(summary);
    Ok(())
}

pub fn solve(args: &SolveArgs) -> Result<()> {
    let m = RunManifest::load(&args.model)?;
    let cfg = DpConfig {
        ds: m.ds,
        v_min: args.vmin,
        v_max: args.vmax,
        n_v: args.nv,
        n_w: args.nw,
        reg_weight: args.reg,
        dense_n_u: args.dense_nu,
        retain_values: if args.dump_tables.is_some() {
            optipace_core::ValueRetention::All
        } else {
            optipace_core::ValueRetention::Initial
        },
    };
    cfg.validate()?;
    let started = Instant::now();
    let sol = if cfg.dense_n_u.is_some() {
        dense_oracle(&m.course, &m.model, &cfg)?
    } else {
        backward_sweep(&m.course, &m.model, &cfg)?
    };
    eprintln!(
        "swept {} stages on a {}x{} grid in {:.1} s",
        sol.stages(),
        cfg.n_v,
        cfg.n_w,
        started.elapsed().as_secs_f64()
    );
    if let Some(dir) = &args.dump_tables {
        write_tables(&sol, dir)?;
    }
    let v0 = m.v0.unwrap_or(cfg.v_min);
    let w0 = m.model.rider.awc();
    let trajectory = forward_pass(&sol, &m.course, v0, w0)?;
    let summary = RunSummary::new(
        "solve",
        &trajectory,
        &m.course,
        &m.model,
        m.ds,
        v0,
        w0,
        Some(cfg),
    );
    write_run(&m, &trajectory, &summary)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let m = RunManifest::load(&args.model)?;
    let v0 = m.v0.unwrap_or(DpConfig::default().v_min);
    let w0 = m.model.rider.awc();
    let outcome = match (&args.plan, &args.halves) {
        (Some(path), _) => {
            let plan = PowerPlan::read_csv(path)
                .with_context(|| format!("reading plan {}", path.display()))?;
            ride_plan(&m.model, &m.course, &plan, m.ds, v0, w0)?
        }
        (None, Some(halves)) => {
            let (plan, out) =
                two_half_time_plan(&m.model, &m.course, m.ds, v0, halves[0], halves[1])?;
            write(&m.out.join("plan.csv"), &plan.to_csv())?;
            out
        }
        (None, None) => bail!("either --plan or --halves is required"),
    };
    if outcome.clamped_inputs > 0 {
        eprintln!(
            "warning: {} segments asked for more than the maximal power and were clamped",
            outcome.clamped_inputs
        );
    }
    if outcome.depleted_steps > 0 {
        eprintln!(
            "warning: plan overdrew the anaerobic reserve on {} segments",
            outcome.depleted_steps
        );
    }
    let mut summary = RunSummary::new(
        "simulate",
        &outcome.trajectory,
        &m.course,
        &m.model,
        m.ds,
        v0,
        w0,
        None,
    );
    summary.clamped_inputs = outcome.clamped_inputs;
    summary.depleted_steps = outcome.depleted_steps;
    write_run(&m, &outcome.trajectory, &summary)
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let a = RunSummary::read(&args.baseline)?;
    let b = RunSummary::read(&args.candidate)?;
    let cmp = compare_runs(&a, &b)?;
    println!("{cmp}");
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        let json = serde_json::to_string_pretty(&cmp)?;
        write(&dir.join("comparison.json"), &(json + "\n"))?;
    }
    Ok(())
}
