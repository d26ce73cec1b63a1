use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use cavity_core::export::write_csv;
use cavity_core::raysim::{contraction_fit, fit_envelope, EnvelopeFit};
use cavity_core::{
    crosscheck_engines, iterate_ray, lissajous, run_collapse, stability_map, CollapseEngine, CollapseTrace,
    CrosscheckReport, GaussianBeam, RayState,
};

use crate::config::{EngineName, Format, Scenario};
use crate::error::CliError;
use crate::output::OutputSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Stability,
    Schedule,
    Ray,
    Lissajous,
    Collapse,
    Crosscheck,
}

pub fn run(cmd: Command, sc: &Scenario) -> Result<OutputSet, CliError> {
    let mut out = OutputSet::default();
    match cmd {
        Command::Stability => stability(sc, &mut out)?,
        Command::Schedule => schedule(sc, &mut out)?,
        Command::Ray => ray(sc, &mut out)?,
        Command::Lissajous => lissajous_cmd(sc, &mut out)?,
        Command::Collapse => collapse(sc, &mut out)?,
        Command::Crosscheck => crosscheck(sc, &mut out)?,
    }
    Ok(out)
}

fn sample_points(n_max: usize, step: f64) -> Vec<f64> {
    let count = (n_max as f64 / step + 1e-9).floor() as usize;
    (0..=count).map(|j| j as f64 * step).collect()
}

#[derive(Serialize)]
struct StabilityReport {
    l1_over_f: f64,
    l2_over_f: f64,
    stable: bool,
    theta: Option<f64>,
    cells: [usize; 2],
    stable_domains: usize,
    path_written: bool,
}

fn stability(sc: &Scenario, out: &mut OutputSet) -> Result<(), CliError> {
    let (l1, l2) = sc.axes()?;
    let map = stability_map(l1, l2);
    let info = sc.geometry.stability();
    // the overlay needs a valid schedule; a scan around an unstable point still runs
    let sched = sc.schedule().ok();
    if sc.wants(Format::Csv) {
        out.csv("stability.csv", |w| map.write_csv(w))?;
        if let Some(s) = &sched {
            let ns = sample_points(sc.config.run.n_max, sc.config.run.schedule_step);
            out.csv("stability_path.csv", |w| s.write_csv(w, &ns))?;
        }
    }
    if sc.wants(Format::Json) {
        out.json(
            "stability.json",
            &StabilityReport {
                l1_over_f: sc.geometry.l1_over_f(),
                l2_over_f: sc.geometry.l2_over_f(),
                stable: info.stable,
                theta: info.theta,
                cells: [l1.cells, l2.cells],
                stable_domains: map.stable_components(),
                path_written: sched.is_some() && sc.wants(Format::Csv),
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ScheduleReport {
    theta: f64,
    a: f64,
    b0_over_f: f64,
    c0_times_f: f64,
    rows: usize,
    final_l1_over_f: f64,
    final_l2_over_f: f64,
}

fn schedule(sc: &Scenario, out: &mut OutputSet) -> Result<(), CliError> {
    let s = sc.schedule()?;
    let ns = sample_points(sc.config.run.n_max, sc.config.run.schedule_step);
    let last = s.geometry_at(*ns.last().unwrap_or(&0.0))?;
    if sc.wants(Format::Csv) {
        out.csv("schedule.csv", |w| s.write_csv(w, &ns))?;
    }
    if sc.wants(Format::Json) {
        let m = s.initial_matrix();
        out.json(
            "schedule.json",
            &ScheduleReport {
                theta: s.theta(),
                a: m.a,
                b0_over_f: m.b,
                c0_times_f: m.c,
                rows: ns.len(),
                final_l1_over_f: last.l1_over_f(),
                final_l2_over_f: last.l2_over_f(),
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RayReport {
    decay_rate: f64,
    period: f64,
    expected_period: f64,
    fit: EnvelopeFit,
}

fn ray(sc: &Scenario, out: &mut OutputSet) -> Result<(), CliError> {
    let s = sc.schedule()?;
    let r = &sc.config.ray;
    let trace = iterate_ray(&s, RayState::new(r.x0, r.xp0), sc.config.run.n_max)?;
    let fit = fit_envelope(&trace.xs())?;
    if sc.wants(Format::Csv) {
        out.csv("ray.csv", |w| trace.write_csv(w))?;
    }
    if sc.wants(Format::Json) {
        out.json(
            "ray_fit.json",
            &RayReport { decay_rate: fit.decay_rate, period: fit.period, expected_period: 2.0 * PI / s.theta(), fit },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LissajousReport {
    decay_rate: f64,
    period: f64,
    strictly_decreasing: bool,
    periods: usize,
}

fn lissajous_cmd(sc: &Scenario, out: &mut OutputSet) -> Result<(), CliError> {
    let s = sc.schedule()?;
    let l = &sc.config.lissajous;
    let tr = lissajous(&s, RayState::new(l.x0, l.xp0), RayState::new(l.y0, l.yp0), sc.config.run.n_max)?;
    let period = fit_envelope(&tr.x.xs())?.period;
    let maxima = tr.per_period_max(period);
    let (slope, strict) = contraction_fit(&maxima)?;
    if sc.wants(Format::Csv) {
        out.csv("lissajous.csv", |w| tr.write_csv(w))?;
        out.csv("lissajous_maxima.csv", |w| write_csv(w, &["n", "radius"], maxima.iter().map(|&(n, r)| vec![n, r])))?;
    }
    if sc.wants(Format::Json) {
        out.json(
            "lissajous_fit.json",
            &LissajousReport { decay_rate: -slope, period, strictly_decreasing: strict, periods: maxima.len() },
        )?;
    }
    Ok(())
}

fn initial_beam(sc: &Scenario) -> Result<GaussianBeam, CliError> {
    let m = sc.geometry.round_trip_matrix();
    let mode = GaussianBeam::eigenmode(m.b, m.c, sc.wavelength())?;
    let w = mode.spot_size();
    Ok(mode.displaced(sc.config.beam.offset_over_w * w, sc.config.beam.tilt))
}

fn engines(sc: &Scenario, beam: &GaussianBeam) -> Vec<CollapseEngine> {
    let mut names = sc.config.run.engines.clone();
    names.dedup();
    names.into_iter().map(|e| sc.engine(e, beam.q, beam.spot_size())).collect()
}

#[derive(Serialize)]
struct EngineSummary {
    engine: &'static str,
    rows: usize,
    truncated: Option<String>,
    resolution_warning: Option<usize>,
    max_product_error: f64,
}

#[derive(Serialize)]
struct EngineComparison {
    a: &'static str,
    b: &'static str,
    rows_compared: usize,
    max_w1_difference: f64,
    max_w2_difference: f64,
}

#[derive(Serialize)]
struct CollapseReport {
    w0: f64,
    theta: f64,
    product_target: f64,
    engines: Vec<EngineSummary>,
    comparisons: Vec<EngineComparison>,
}

fn collapse(sc: &Scenario, out: &mut OutputSet) -> Result<(), CliError> {
    let s = sc.schedule()?;
    let beam = initial_beam(sc)?;
    let n_max = sc.config.run.n_max;
    let snapshot_every = if sc.wants(Format::Binary) { sc.config.outputs.snapshot_every } else { None };
    let traces = engines(sc, &beam)
        .par_iter()
        .map(|e| run_collapse(&s, &beam, n_max, e, snapshot_every))
        .collect::<Result<Vec<CollapseTrace>, _>>()?;

    let w0 = (sc.wavelength() / PI).sqrt();
    let product_target = ((1.0 - s.theta().cos()) / 2.0).sqrt();
    for t in &traces {
        if sc.wants(Format::Csv) {
            out.csv(&format!("collapse_{}.csv", t.engine), |w| {
                let rows = t
                    .rows
                    .iter()
                    .map(|r| vec![r.n as f64, r.w1 / w0, r.w2 / w0, r.w1 * r.w2 / (w0 * w0), r.norm, r.centroid / w0]);
                write_csv(w, &["n", "w1_over_w0", "w2_over_w0", "product", "norm", "centroid_over_w0"], rows)
            })?;
        }
        for (n, field) in &t.snapshots {
            let stem = format!("field_{}_{n:07}", t.engine);
            let mut bin = Vec::with_capacity(16 * field.len());
            field.write_binary(&mut bin)?;
            out.add(format!("{stem}.bin"), bin);
            out.json(&format!("{stem}.json"), &field.sidecar(*n as u64))?;
        }
    }
    if sc.wants(Format::Json) {
        let summaries = traces
            .iter()
            .map(|t| EngineSummary {
                engine: t.engine,
                rows: t.rows.len(),
                truncated: t.truncated.clone(),
                resolution_warning: t.resolution_warning,
                max_product_error: t
                    .rows
                    .iter()
                    .map(|r| (r.w1 * r.w2 / (w0 * w0) / product_target - 1.0).abs())
                    .fold(0.0, f64::max),
            })
            .collect();
        let mut comparisons = Vec::new();
        for i in 0..traces.len() {
            for j in i + 1..traces.len() {
                let (a, b) = (&traces[i], &traces[j]);
                let pairs = a.rows.iter().zip(&b.rows);
                comparisons.push(EngineComparison {
                    a: a.engine,
                    b: b.engine,
                    rows_compared: a.rows.len().min(b.rows.len()),
                    max_w1_difference: pairs.clone().map(|(x, y)| (x.w1 - y.w1).abs() / w0).fold(0.0, f64::max),
                    max_w2_difference: pairs.map(|(x, y)| (x.w2 - y.w2).abs() / w0).fold(0.0, f64::max),
                });
            }
        }
        out.json(
            "collapse.json",
            &CollapseReport { w0, theta: s.theta(), product_target, engines: summaries, comparisons },
        )?;
    }
    Ok(())
}

fn crosscheck(sc: &Scenario, out: &mut OutputSet) -> Result<(), CliError> {
    let s = sc.schedule()?;
    let beam = initial_beam(sc)?;
    let name =
        sc.config.run.engines.iter().copied().find(|e| *e != EngineName::GaussianQ).unwrap_or(EngineName::Fresnel);
    let engine = sc.engine(name, beam.q, beam.spot_size());
    let report: CrosscheckReport = crosscheck_engines(&s, &beam, sc.config.run.n_max, &engine)?;
    if sc.wants(Format::Csv) {
        let nan = f64::NAN;
        out.csv("crosscheck.csv", |w| {
            let rows = report.rows.iter().map(|r| {
                vec![
                    r.n as f64,
                    r.l2_distance.unwrap_or(nan),
                    r.centroid_wave,
                    r.centroid_analytic.unwrap_or(nan),
                    r.centroid_ray,
                    r.width_wave,
                    r.width_analytic.unwrap_or(nan),
                ]
            });
            write_csv(
                w,
                &[
                    "n",
                    "l2_distance",
                    "centroid_wave",
                    "centroid_analytic",
                    "centroid_ray",
                    "width_wave",
                    "width_analytic",
                ],
                rows,
            )
        })?;
    }
    if sc.wants(Format::Json) {
        out.json("crosscheck.json", &report)?;
    }
    Ok(())
}
