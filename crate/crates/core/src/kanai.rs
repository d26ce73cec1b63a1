//! The damped quantum oscillator
//!
//!   i hbar psi_t = -(hbar^2 / 2m) e^{-g} psi_xx + (m omega^2 / 2) e^{g} x^2 psi
//!
//! solved exactly from a free-particle Gaussian and the classical
//! fundamental solutions, and its identification with the cavity through
//! hbar = 1/k, m = (1/theta) sqrt(-C(0)/B(0)), omega = theta, t = n.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::oscillator::{ClassicalSolution, OscillatorParams};
use crate::paraxial::{AbcdMatrix, ResonatorGeometry};
use crate::raysim::{iterate_ray, RayState};
use crate::schedule::MirrorSchedule;
use crate::wavesim::{run_collapse, CollapseEngine, ComplexField, GaussianBeam, PlaneTag};

/// |u2| at or below this is treated as a caustic.
pub const CAUSTIC_EPS: f64 = 1e-12;

/// Smallest sin(theta) for which the mapping is defined.
const MIN_SIN_THETA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantumParams {
    pub hbar: f64,
    pub mass: f64,
    pub omega: f64,
}

impl QuantumParams {
    /// (kinetic, potential) coefficients of i psi_t = kin psi_xx + pot x^2 psi at friction g.
    pub fn coefficients(&self, g: f64) -> (f64, f64) {
        (-self.hbar * (-g).exp() / (2.0 * self.mass), self.mass * self.omega.powi(2) * g.exp() / (2.0 * self.hbar))
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI * self.hbar
    }
}

/// Coefficients of the round-trip Schrodinger equation of a canonical cavity
/// with round-trip matrix `m`, phase `theta` and wavenumber `k`.
pub fn cavity_coefficients(m: &AbcdMatrix, theta: f64, k: f64) -> (f64, f64) {
    let s = theta.sin();
    (m.b * theta / (2.0 * k * s), k * theta * m.c / (2.0 * s))
}

pub fn map_parameters(geom0: &ResonatorGeometry, wavelength: f64) -> Result<QuantumParams> {
    ensure_finite("wavelength", wavelength)?;
    if wavelength <= 0.0 {
        return Err(Error::InvalidParameter(format!("wavelength must be positive, got {wavelength}")));
    }
    let info = geom0.stability();
    let theta = match info.theta {
        Some(t) if info.stable => t,
        _ => return Err(Error::InvalidGeometry(format!("unstable resonator (A = {}): no oscillator mapping", info.a))),
    };
    let sin_theta = theta.sin();
    if info.marginal || sin_theta < MIN_SIN_THETA {
        return Err(Error::MarginalStability { sin_theta });
    }
    let m = geom0.round_trip_matrix();
    if !(m.b < 0.0 && m.c > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "B = {}, C = {}: only the B < 0 stability domain maps to a positive mass",
            m.b, m.c
        )));
    }
    Ok(QuantumParams { hbar: wavelength / (2.0 * PI), mass: (-m.c / m.b).sqrt() / theta, omega: theta })
}

/// Gaussian phi(X, 0) ~ exp[-(X - X0)^2 / (4 alpha) + i P0 X / hbar].
/// A real `alpha` is the variance of |phi|^2; a complex one adds a chirp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianWavepacket {
    alpha: Complex64,
    pub center: f64,
    pub momentum: f64,
}

impl GaussianWavepacket {
    /// Unchirped packet with standard deviation `width`.
    pub fn new(width: f64, center: f64, momentum: f64) -> Result<Self> {
        ensure_finite("width", width)?;
        if width <= 0.0 {
            return Err(Error::InvalidParameter(format!("packet width must be positive, got {width}")));
        }
        Self::with_alpha(Complex64::new(width * width, 0.0), center, momentum)
    }

    pub fn with_alpha(alpha: Complex64, center: f64, momentum: f64) -> Result<Self> {
        ensure_finite("center", center)?;
        ensure_finite("momentum", momentum)?;
        if !(alpha.re > 0.0) || !alpha.im.is_finite() {
            return Err(Error::InvalidParameter(format!("packet needs Re(alpha) > 0, got {alpha}")));
        }
        Ok(GaussianWavepacket { alpha, center, momentum })
    }

    /// The packet carried by a cavity field: sigma = w / 2 for a flat
    /// wavefront, P0 = -x' from the tilt phase exp(-i k x' x).
    pub fn from_beam(beam: &GaussianBeam) -> Result<Self> {
        let alpha = Complex64::new(0.0, -beam.wavelength / (4.0 * PI)) * beam.q;
        Self::with_alpha(alpha, beam.center, -beam.tilt)
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn width(&self) -> f64 {
        self.alpha.norm() / self.alpha.re.sqrt()
    }

    /// (X(T), Delta X(T)) of the freely spreading packet.
    pub fn free_moments(&self, t: f64, hbar: f64, mass: f64) -> (f64, f64) {
        let a = self.alpha_at(t, hbar, mass);
        (self.center + self.momentum * t / mass, a.norm() / a.re.sqrt())
    }

    fn alpha_at(&self, t: f64, hbar: f64, mass: f64) -> Complex64 {
        self.alpha + Complex64::new(0.0, hbar * t / (2.0 * mass))
    }
}

/// Free-particle evolution i hbar phi_T = -(hbar^2 / 2m) phi_XX of the packet.
pub fn free_gaussian(packet: &GaussianWavepacket, x: f64, t: f64, hbar: f64, mass: f64) -> Complex64 {
    let alpha = packet.alpha_at(t, hbar, mass);
    let v = packet.momentum / mass;
    let s = x - packet.center - v * t;
    let norm = (2.0 * PI).powf(-0.25) * packet.alpha.re.powf(0.25);
    let exponent =
        -s * s / (4.0 * alpha) + Complex64::new(0.0, packet.momentum / hbar * (x - packet.center - 0.5 * v * t));
    norm / alpha.sqrt() * exponent.exp()
}

/// Uniform sample positions x_j = x0 + j dx.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGrid {
    pub count: usize,
    pub dx: f64,
    pub x0: f64,
}

impl SampleGrid {
    pub fn centered(count: usize, dx: f64) -> Self {
        SampleGrid { count, dx, x0: -(count as f64 / 2.0) * dx }
    }

    pub fn of(field: &ComplexField) -> Self {
        SampleGrid { count: field.len(), dx: field.dx(), x0: field.x0() }
    }
}

/// Everything the propagator needs at one n.
struct Frame {
    u1: f64,
    u2: f64,
    du2: f64,
    w: f64,
}

fn frame(sol: &ClassicalSolution, n: f64) -> Result<Frame> {
    let v = sol.eval(n)?;
    if v.u2.abs() <= CAUSTIC_EPS {
        return Err(Error::NearCaustic { n, u2: v.u2 });
    }
    Ok(Frame { u1: v.u1, u2: v.u2, du2: v.du2, w: (-sol.g(n)?).exp() })
}

/// psi(x, n) = u2^{-1/2} exp[i m u2' x^2 / (2 hbar W u2)] phi(x / u2, u1 / u2),
/// principal branch of the square root.
pub fn kanai_value(
    packet: &GaussianWavepacket,
    sol: &ClassicalSolution,
    params: &QuantumParams,
    x: f64,
    n: f64,
) -> Result<Complex64> {
    let fr = frame(sol, n)?;
    Ok(value_in_frame(packet, params, &fr, x))
}

fn value_in_frame(packet: &GaussianWavepacket, params: &QuantumParams, fr: &Frame, x: f64) -> Complex64 {
    let pre = Complex64::new(fr.u2, 0.0).sqrt().inv();
    let phase = params.mass * fr.du2 * x * x / (2.0 * params.hbar * fr.w * fr.u2);
    let phi = free_gaussian(packet, x / fr.u2, fr.u1 / fr.u2, params.hbar, params.mass);
    pre * Complex64::from_polar(1.0, phase) * phi
}

pub fn kanai_propagate(
    packet: &GaussianWavepacket,
    sol: &ClassicalSolution,
    params: &QuantumParams,
    grid: &SampleGrid,
    n: f64,
) -> Result<ComplexField> {
    let fr = frame(sol, n)?;
    let samples = (0..grid.count).map(|j| value_in_frame(packet, params, &fr, grid.x0 + j as f64 * grid.dx)).collect();
    ComplexField::new(samples, grid.dx, grid.x0, params.wavelength(), PlaneTag::LeftMirror)
}

/// (x(n), Delta x(n)) = (u2 X(u1/u2), |u2| Delta X(u1/u2)).
pub fn moments(
    packet: &GaussianWavepacket,
    sol: &ClassicalSolution,
    params: &QuantumParams,
    n: f64,
) -> Result<(f64, f64)> {
    let fr = frame(sol, n)?;
    let (x, dx) = packet.free_moments(fr.u1 / fr.u2, params.hbar, params.mass);
    Ok((fr.u2 * x, fr.u2.abs() * dx))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrosscheckRow {
    pub n: usize,
    /// Phase-aligned relative L2 distance; None at a caustic.
    pub l2_distance: Option<f64>,
    pub centroid_wave: f64,
    pub centroid_analytic: Option<f64>,
    pub centroid_ray: f64,
    pub width_wave: f64,
    pub width_analytic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckReport {
    pub engine: &'static str,
    pub params: QuantumParams,
    pub rows: Vec<CrosscheckRow>,
    pub max_l2_distance: f64,
    /// Largest centroid disagreement among the three engines, relative to max |ray centroid|.
    pub max_centroid_error: f64,
    /// Largest |width_wave / width_analytic - 1|.
    pub max_width_error: f64,
    pub truncated: Option<String>,
}

/// Sends the same Gaussian through the analytic propagator, a field engine
/// and the ray map, comparing them at every round trip. Every field is held
/// in memory, so keep n_max * grid size moderate.
pub fn crosscheck_engines(
    sched: &MirrorSchedule,
    beam: &GaussianBeam,
    n_max: usize,
    engine: &CollapseEngine,
) -> Result<CrosscheckReport> {
    if let CollapseEngine::GaussianQ { .. } = engine {
        return Err(Error::InvalidParameter("cross-check needs a field engine".into()));
    }
    let params = map_parameters(sched.initial_geometry(), beam.wavelength)?;
    let sol = ClassicalSolution::new(&OscillatorParams::new(params.omega, sched.friction().clone())?)?;
    let packet = GaussianWavepacket::from_beam(beam)?;
    let wave = run_collapse(sched, beam, n_max, engine, Some(1))?;
    let rays = iterate_ray(sched, RayState::new(beam.center, beam.tilt), n_max)?;

    let rows = wave
        .snapshots
        .par_iter()
        .map(|(n, field)| -> Result<CrosscheckRow> {
            let centroid_wave = field.centroid()?;
            let width_wave = 0.5 * field.spot_size()?;
            let centroid_ray = rays.states[*n].x;
            let grid = SampleGrid::of(field);
            let (l2, centroid_analytic, width_analytic) =
                match kanai_propagate(&packet, &sol, &params, &grid, *n as f64) {
                    Ok(analytic) => {
                        let (xm, dx) = moments(&packet, &sol, &params, *n as f64)?;
                        (Some(field.phase_aligned_distance(&analytic)?), Some(xm), Some(dx))
                    }
                    Err(Error::NearCaustic { .. }) => (None, None, None),
                    Err(e) => return Err(e),
                };
            Ok(CrosscheckRow {
                n: *n,
                l2_distance: l2,
                centroid_wave,
                centroid_analytic,
                centroid_ray,
                width_wave,
                width_analytic,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let scale = rays.states.iter().map(|r| r.x.abs()).fold(0.0, f64::max);
    let mut max_l2 = 0.0f64;
    let mut max_centroid = 0.0f64;
    let mut max_width = 0.0f64;
    for r in &rows {
        let mut spread = (r.centroid_wave - r.centroid_ray).abs();
        if let (Some(d), Some(c), Some(w)) = (r.l2_distance, r.centroid_analytic, r.width_analytic) {
            max_l2 = max_l2.max(d);
            spread = spread.max((c - r.centroid_ray).abs()).max((c - r.centroid_wave).abs());
            max_width = max_width.max((r.width_wave / w - 1.0).abs());
        }
        max_centroid = max_centroid.max(spread);
    }
    Ok(CrosscheckReport {
        engine: engine.name(),
        params,
        rows,
        max_l2_distance: max_l2,
        max_centroid_error: if scale > 0.0 { max_centroid / scale } else { max_centroid },
        max_width_error: max_width,
        truncated: wave.truncated,
    })
}
