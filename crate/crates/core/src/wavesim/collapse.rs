//! Round-trip runs that follow the spot sizes while the mirrors move.

use std::io::Write;

use serde::Serialize;

use super::{
    gaussian_q_trace, ComplexField, FresnelOptions, FresnelPropagator, GaussianBeam, PlaneTag, SplitStepPropagator,
    SplittingOrder, Tracking,
};
use crate::error::{Error, Result};
use crate::export::write_csv;
use crate::raysim::{iterate_ray, RayState};
use crate::schedule::MirrorSchedule;

/// Grid for the field engines. Without `dx` the Fresnel engine uses the
/// self-reproducing spacing sqrt(lambda |B(0)| / n) and the split-step
/// engine a window of 16 initial spot sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub dx: Option<f64>,
}

impl GridSpec {
    pub fn new(n: usize) -> Self {
        GridSpec { n, dx: None }
    }

    /// Window of `factor` times the spot size `w`.
    pub fn with_window(n: usize, factor: f64, w: f64) -> Self {
        GridSpec { n, dx: Some(factor * w / n as f64) }
    }
}

/// Split-step grids are trusted while w1 >= this many samples.
pub const MIN_SAMPLES_PER_SPOT: f64 = 8.0;

const DEFAULT_SPLIT_STEP_WINDOW: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollapseEngine {
    Fresnel { grid: GridSpec, options: FresnelOptions },
    SplitStep { grid: GridSpec, substeps: usize, order: SplittingOrder },
    GaussianQ { tracking: Tracking },
}

impl CollapseEngine {
    pub fn name(&self) -> &'static str {
        match self {
            CollapseEngine::Fresnel { .. } => "fresnel",
            CollapseEngine::SplitStep { .. } => "split_step",
            CollapseEngine::GaussianQ { .. } => "gaussian_q",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseRow {
    pub n: usize,
    pub w1: f64,
    pub w2: f64,
    pub norm: f64,
    pub centroid: f64,
}

#[derive(Debug, Clone)]
pub struct CollapseTrace {
    pub engine: &'static str,
    pub rows: Vec<CollapseRow>,
    /// Why the run stopped before `n_max`, if it did.
    pub truncated: Option<String>,
    /// First round trip at which a fixed grid stopped resolving the spot.
    pub resolution_warning: Option<usize>,
    /// Left-mirror fields at the requested cadence.
    pub snapshots: Vec<(usize, ComplexField)>,
}

impl CollapseTrace {
    /// Columns `n,w1,w2,norm,centroid_x`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows = self.rows.iter().map(|r| vec![r.n as f64, r.w1, r.w2, r.norm, r.centroid]);
        write_csv(out, &["n", "w1", "w2", "norm", "centroid_x"], rows)
    }
}

/// Errors that end a field run early instead of failing it.
fn is_resolution_failure(e: &Error) -> bool {
    matches!(e, Error::Sampling { .. } | Error::NearFocalPlane { .. } | Error::Resolution(_))
}

pub fn run_collapse(
    sched: &MirrorSchedule,
    beam: &GaussianBeam,
    n_max: usize,
    engine: &CollapseEngine,
    snapshot_every: Option<usize>,
) -> Result<CollapseTrace> {
    match engine {
        CollapseEngine::GaussianQ { tracking } => run_q(sched, beam, n_max, *tracking),
        CollapseEngine::Fresnel { grid, options } => {
            let dx = grid.dx.unwrap_or_else(|| (beam.wavelength * sched.b0().abs() / grid.n as f64).sqrt());
            let field = beam.sample(grid.n, dx, PlaneTag::LeftMirror)?;
            let prop = FresnelPropagator::new(grid.n, *options);
            run_field(sched, field, n_max, engine.name(), snapshot_every, &prop, |f, n| {
                prop.propagate(f, &sched.round_trip_at(n as f64)?)
            })
            .map(|(trace, _)| trace)
        }
        CollapseEngine::SplitStep { grid, substeps, order } => {
            let dx = grid.dx.unwrap_or(DEFAULT_SPLIT_STEP_WINDOW * beam.spot_size() / grid.n as f64);
            let field = beam.sample(grid.n, dx, PlaneTag::LeftMirror)?;
            let step = SplitStepPropagator::new(grid.n, dx, *substeps, *order)?;
            let half = FresnelPropagator::new(grid.n, FresnelOptions::default());
            let theta = sched.theta();
            let (mut trace, worst) = run_field(sched, field, n_max, engine.name(), snapshot_every, &half, |f, n| {
                let m = sched.round_trip_at(n as f64)?;
                step.propagate(f, theta, m.b, m.c)
            })?;
            trace.resolution_warning = worst;
            Ok(trace)
        }
    }
}

fn run_q(sched: &MirrorSchedule, beam: &GaussianBeam, n_max: usize, tracking: Tracking) -> Result<CollapseTrace> {
    let tracking = match tracking {
        Tracking::Propagated { .. } => Tracking::Propagated { q0: beam.q },
        Tracking::Tem00 => Tracking::Tem00,
    };
    let q = gaussian_q_trace(sched, tracking, beam.wavelength, n_max)?;
    let rays = iterate_ray(sched, RayState::new(beam.center, beam.tilt), n_max)?;
    let rows = q
        .iter()
        .zip(&rays.states)
        .map(|(s, r)| CollapseRow { n: s.n, w1: s.w1, w2: s.w2, norm: 1.0, centroid: r.x })
        .collect();
    Ok(CollapseTrace { engine: "gaussian_q", rows, truncated: None, resolution_warning: None, snapshots: Vec::new() })
}

/// Shared loop of the two field engines. Returns the trace and, for fixed
/// grids, the first n at which w1 fell below MIN_SAMPLES_PER_SPOT samples.
fn run_field(
    sched: &MirrorSchedule,
    mut field: ComplexField,
    n_max: usize,
    engine: &'static str,
    snapshot_every: Option<usize>,
    half: &FresnelPropagator,
    mut trip: impl FnMut(&ComplexField, usize) -> Result<ComplexField>,
) -> Result<(CollapseTrace, Option<usize>)> {
    let mut rows = Vec::with_capacity(n_max + 1);
    let mut snapshots = Vec::new();
    let mut truncated = None;
    let mut first_unresolved = None;
    for n in 0..=n_max {
        let row = (|| -> Result<CollapseRow> {
            let right = half.propagate(&field, &sched.half_trip_at(n as f64)?)?;
            Ok(CollapseRow {
                n,
                w1: field.spot_size()?,
                w2: right.spot_size()?,
                norm: field.norm_sq(),
                centroid: field.centroid()?,
            })
        })();
        let row = match row {
            Ok(r) => r,
            Err(e) if is_resolution_failure(&e) => {
                truncated = Some(format!("stopped at n = {n}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        if first_unresolved.is_none() && row.w1 < MIN_SAMPLES_PER_SPOT * field.dx() {
            first_unresolved = Some(n);
        }
        rows.push(row);
        if let Some(every) = snapshot_every {
            if every > 0 && n % every == 0 {
                snapshots.push((n, field.clone()));
            }
        }
        if n == n_max {
            break;
        }
        match trip(&field, n) {
            Ok(next) => field = next,
            Err(e) if is_resolution_failure(&e) => {
                truncated = Some(format!("stopped after n = {n}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let trace = CollapseTrace { engine, rows, truncated, resolution_warning: None, snapshots };
    Ok((trace, first_unresolved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::friction::FrictionProfile;
    use crate::oscillator::{ClassicalSolution, OscillatorParams};
    use crate::paraxial::ResonatorGeometry;
    use crate::raysim::iterate_ray;
    use std::f64::consts::PI;

    const LAMBDA: f64 = 1e-4;

    fn sched(gamma: f64) -> MirrorSchedule {
        MirrorSchedule::new(ResonatorGeometry::normalized(1.7, 1.5).unwrap(), FrictionProfile::constant(gamma).unwrap())
            .unwrap()
    }

    fn eigenbeam(s: &MirrorSchedule) -> GaussianBeam {
        GaussianBeam::eigenmode(s.b0(), s.c0(), LAMBDA).unwrap()
    }

    #[test]
    fn fresnel_collapse_follows_law() {
        let gamma = 1e-2;
        let s = sched(gamma);
        let engine = CollapseEngine::Fresnel { grid: GridSpec::new(4096), options: FresnelOptions::default() };
        let tr = run_collapse(&s, &eigenbeam(&s), 500, &engine, None).unwrap();
        assert!(tr.truncated.is_none());
        assert_eq!(tr.rows.len(), 501);
        let sol = ClassicalSolution::new(&OscillatorParams::new(s.theta(), s.friction().clone()).unwrap()).unwrap();
        let theta = s.theta();
        let target = LAMBDA / PI * ((1.0 - theta.cos()) / 2.0).sqrt();
        let w0 = tr.rows[0].w1;
        for r in &tr.rows {
            let v = sol.eval(r.n as f64).unwrap();
            let law = (v.u2 * v.u2 + theta * theta * v.u1 * v.u1).sqrt();
            assert!((r.w1 / w0 / law - 1.0).abs() < 0.01, "n = {}", r.n);
            assert!((r.w1 * r.w2 / target - 1.0).abs() < 0.01);
            assert!((r.norm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn displaced_centroid_follows_ray() {
        let s = sched(1e-3);
        let beam0 = eigenbeam(&s);
        let x0 = 0.3 * beam0.spot_size();
        let beam = beam0.displaced(x0, 0.0);
        let rays = iterate_ray(&s, RayState::new(x0, 0.0), 1000).unwrap();
        for engine in [
            CollapseEngine::Fresnel { grid: GridSpec::new(2048), options: FresnelOptions::default() },
            CollapseEngine::GaussianQ { tracking: Tracking::Tem00 },
        ] {
            let tr = run_collapse(&s, &beam, 1000, &engine, None).unwrap();
            for (r, ray) in tr.rows.iter().zip(&rays.states) {
                assert!((r.centroid - ray.x).abs() < 0.01 * x0, "{} n = {}", engine.name(), r.n);
            }
        }
    }

    #[test]
    fn split_step_agrees_with_fresnel() {
        let s = sched(1e-2);
        let beam = eigenbeam(&s);
        let n = 2048;
        let fres = CollapseEngine::Fresnel { grid: GridSpec::new(n), options: FresnelOptions::default() };
        let split = CollapseEngine::SplitStep {
            grid: GridSpec::with_window(n, 16.0, beam.spot_size()),
            substeps: crate::wavesim::DEFAULT_SUBSTEPS,
            order: SplittingOrder::Fourth,
        };
        let a = run_collapse(&s, &beam, 50, &fres, None).unwrap();
        let b = run_collapse(&s, &beam, 50, &split, None).unwrap();
        assert!(b.resolution_warning.is_none());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert!((ra.w1 / rb.w1 - 1.0).abs() < 1e-3, "n = {}", ra.n);
            assert!((rb.norm - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn snapshots_and_zero_trips() {
        let s = sched(1e-3);
        let engine = CollapseEngine::Fresnel { grid: GridSpec::new(256), options: FresnelOptions::default() };
        let tr = run_collapse(&s, &eigenbeam(&s), 10, &engine, Some(5)).unwrap();
        assert_eq!(tr.snapshots.iter().map(|s| s.0).collect::<Vec<_>>(), vec![0, 5, 10]);
        let q = run_collapse(&s, &eigenbeam(&s), 0, &CollapseEngine::GaussianQ { tracking: Tracking::Tem00 }, None)
            .unwrap();
        assert_eq!(q.rows.len(), 1);
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }

    #[test]
    fn coarse_grid_truncates() {
        let s = sched(1e-3);
        let beam = eigenbeam(&s);
        let engine = CollapseEngine::Fresnel {
            grid: GridSpec::with_window(64, 2.0, beam.spot_size()),
            options: FresnelOptions::default(),
        };
        let tr = run_collapse(&s, &beam, 10, &engine, None).unwrap();
        assert!(tr.truncated.is_some());
    }
}
