//! Ray-optics limit: rays bounced through the slowly changing cavity.
//!
//! Trip k (taking the ray from sample k to k + 1) uses the round-trip
//! matrix at the mirror positions of round trip k.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::export::write_csv;
use crate::oscillator::ClassicalSolution;
use crate::paraxial::AbcdMatrix;
use crate::schedule::MirrorSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RayState {
    pub x: f64,
    pub xp: f64,
}

impl RayState {
    pub fn new(x: f64, xp: f64) -> Self {
        RayState { x, xp }
    }

    pub fn propagate(&self, m: &AbcdMatrix) -> RayState {
        let (x, xp) = m.apply(self.x, self.xp);
        RayState { x, xp }
    }
}

/// Ray states at the left mirror, one per round trip starting at n = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RayTrace {
    pub states: Vec<RayState>,
}

impl RayTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.x).collect()
    }

    /// Columns `n,x,xp`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows = self.states.iter().enumerate().map(|(n, s)| vec![n as f64, s.x, s.xp]);
        write_csv(out, &["n", "x", "xp"], rows)
    }
}

/// Round-trip matrices for trips 0..n_max.
pub fn trip_matrices(sched: &MirrorSchedule, n_max: usize) -> Result<Vec<AbcdMatrix>> {
    (0..n_max).map(|k| sched.round_trip_at(k as f64)).collect()
}

pub fn iterate_ray(sched: &MirrorSchedule, init: RayState, n_max: usize) -> Result<RayTrace> {
    let mats = trip_matrices(sched, n_max)?;
    Ok(iterate_with(&mats, init))
}

fn iterate_with(mats: &[AbcdMatrix], init: RayState) -> RayTrace {
    let mut states = Vec::with_capacity(mats.len() + 1);
    states.push(init);
    let mut s = init;
    for m in mats {
        s = s.propagate(m);
        states.push(s);
    }
    RayTrace { states }
}

/// x_{n+1} = cos(theta) (1 + e^-gamma) x_n - e^-gamma x_{n-1}, for n up to n_max.
pub fn iterate_ray_difference(theta: f64, gamma: f64, x0: f64, x1: f64, n_max: usize) -> Vec<f64> {
    let decay = (-gamma).exp();
    let k = theta.cos() * (1.0 + decay);
    let mut xs = Vec::with_capacity(n_max + 1);
    xs.push(x0);
    if n_max >= 1 {
        xs.push(x1);
    }
    for n in 1..n_max {
        xs.push(k * xs[n] - decay * xs[n - 1]);
    }
    xs
}

/// Roots of mu^2 - cos(theta)(1 + e^-gamma) mu + e^-gamma = 0, the one with
/// nonnegative imaginary part first.
pub fn characteristic_roots(theta: f64, gamma: f64) -> (Complex64, Complex64) {
    let decay = (-gamma).exp();
    let half_sum = 0.5 * theta.cos() * (1.0 + decay);
    let disc = Complex64::new(half_sum * half_sum - decay, 0.0).sqrt();
    let (r1, r2) = (half_sum + disc, half_sum - disc);
    if r1.im >= r2.im {
        (r1, r2)
    } else {
        (r2, r1)
    }
}

/// x_n from the root expansion alpha mu1^n + beta mu2^n fitted to (x0, x1);
/// falls back to (alpha + beta n) mu^n for a repeated root.
pub fn root_expansion(theta: f64, gamma: f64, x0: f64, x1: f64, n: usize) -> f64 {
    let (m1, m2) = characteristic_roots(theta, gamma);
    let gap = m1 - m2;
    if gap.norm() < 1e-12 * m1.norm().max(1e-300) {
        let mu = 0.5 * (m1 + m2);
        // x0 = alpha, x1 = (alpha + beta) mu
        let beta = Complex64::new(x1, 0.0) / mu - x0;
        return ((x0 + beta * n as f64) * mu.powu(n as u32)).re;
    }
    let alpha = (Complex64::new(x1, 0.0) - m2 * x0) / gap;
    let beta = (m1 * x0 - x1) / gap;
    (alpha * m1.powu(n as u32) + beta * m2.powu(n as u32)).re
}

/// Largest residual of the second-order recurrence linking x_{n-1}, x_n and
/// x_{n+1} for general friction, divided by max |x_n|.
pub fn difference_residual(mats: &[AbcdMatrix], xs: &[f64]) -> f64 {
    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for n in 1..xs.len().saturating_sub(1).min(mats.len()) {
        let (prev, cur) = (&mats[n - 1], &mats[n]);
        let ratio = cur.b / prev.b;
        let r = xs[n + 1] + ratio * xs[n - 1] - (cur.a + ratio * prev.d) * xs[n];
        worst = worst.max(r.abs());
    }
    worst / scale
}

/// Ray predicted by the continuum oscillator: x0 u2(n) + x0' (B0 theta / sin theta) u1(n).
pub fn continuum_ray(sched: &MirrorSchedule, sol: &ClassicalSolution, init: RayState, n: f64) -> Result<f64> {
    let theta = sched.theta();
    let v = sol.eval(n)?;
    Ok(init.x * v.u2 + init.xp * sched.b0() * theta / theta.sin() * v.u1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeFit {
    /// Decay rate of the envelope per round trip.
    pub decay_rate: f64,
    /// Oscillation period in round trips.
    pub period: f64,
    pub angular_frequency: f64,
    pub peaks_used: usize,
    pub crossings_used: usize,
}

/// Fits an exponential envelope and an oscillation period to a sampled trace.
///
/// The envelope is read at local maxima of |x_n| through the three-point
/// energy x_k^2 - x_{k-1} x_{k+1}, which is insensitive to where the sample
/// falls within the oscillation; its logarithm is fitted by least squares.
/// The period comes from a least-squares line through the linearly
/// interpolated zero crossings.
pub fn fit_envelope(xs: &[f64]) -> Result<EnvelopeFit> {
    let mut ns = Vec::new();
    let mut logs = Vec::new();
    for k in 1..xs.len().saturating_sub(1) {
        let a = xs[k].abs();
        if a >= xs[k - 1].abs() && a >= xs[k + 1].abs() && a > 0.0 {
            let energy = xs[k] * xs[k] - xs[k - 1] * xs[k + 1];
            if energy > 0.0 {
                ns.push(k as f64);
                logs.push(0.5 * energy.ln());
            }
        }
    }
    if ns.len() < 2 {
        return Err(Error::Fit(format!("only {} envelope peaks found", ns.len())));
    }
    let (slope, _) = least_squares(&ns, &logs);

    let mut crossings = Vec::new();
    for k in 0..xs.len().saturating_sub(1) {
        let (a, b) = (xs[k], xs[k + 1]);
        if (a > 0.0 && b <= 0.0) || (a < 0.0 && b >= 0.0) {
            crossings.push(k as f64 + a / (a - b));
        }
    }
    if crossings.len() < 2 {
        return Err(Error::Fit(format!("only {} zero crossings found", crossings.len())));
    }
    let idx: Vec<f64> = (0..crossings.len()).map(|i| i as f64).collect();
    let (half_period, _) = least_squares(&idx, &crossings);
    let period = 2.0 * half_period;
    Ok(EnvelopeFit {
        decay_rate: -slope,
        period,
        angular_frequency: 2.0 * PI / period,
        peaks_used: ns.len(),
        crossings_used: crossings.len(),
    })
}

/// Slope and intercept of the least-squares line through (x, y).
pub(crate) fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Two transverse coordinates driven by identical cavity matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LissajousTrace {
    pub x: RayTrace,
    pub y: RayTrace,
    /// Semi-major axis of the ellipse the spot would trace if the cavity
    /// froze at round trip n.
    pub orbit_radius: Vec<f64>,
}

pub fn lissajous(sched: &MirrorSchedule, x: RayState, y: RayState, n_max: usize) -> Result<LissajousTrace> {
    // one extra matrix gives the orbit at the final sample
    let mats = trip_matrices(sched, n_max + 1)?;
    let tx = iterate_with(&mats[..n_max], x);
    let ty = iterate_with(&mats[..n_max], y);
    let sin_theta = sched.theta().sin();
    let orbit_radius = tx
        .states
        .iter()
        .zip(&ty.states)
        .zip(&mats)
        .map(|((sx, sy), m)| {
            let s = m.b / sin_theta;
            let (p, v) = ([sx.x, sy.x], [s * sx.xp, s * sy.xp]);
            // largest eigenvalue of P P^T + V V^T
            let a = p[0] * p[0] + v[0] * v[0];
            let d = p[1] * p[1] + v[1] * v[1];
            let b = p[0] * p[1] + v[0] * v[1];
            let lam = 0.5 * (a + d) + (0.25 * (a - d) * (a - d) + b * b).sqrt();
            lam.sqrt()
        })
        .collect();
    Ok(LissajousTrace { x: tx, y: ty, orbit_radius })
}

impl LissajousTrace {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn spot_radius(&self, n: usize) -> f64 {
        self.x.states[n].x.hypot(self.y.states[n].x)
    }

    /// (n at the maximum, maximum orbit radius) for each complete period window.
    pub fn per_period_max(&self, period: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut j = 0usize;
        loop {
            let start = (j as f64 * period).ceil() as usize;
            let end = ((j + 1) as f64 * period).ceil() as usize;
            if end > self.orbit_radius.len() || start >= end {
                break;
            }
            let (k, r) = (start..end).map(|k| (k, self.orbit_radius[k])).fold((start, f64::NEG_INFINITY), |acc, v| {
                if v.1 > acc.1 {
                    v
                } else {
                    acc
                }
            });
            out.push((k as f64, r));
            j += 1;
        }
        out
    }

    /// Columns `n,x,xp,y,yp,radius,orbit_radius`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows = (0..self.len()).map(|n| {
            let (sx, sy) = (self.x.states[n], self.y.states[n]);
            vec![n as f64, sx.x, sx.xp, sy.x, sy.xp, self.spot_radius(n), self.orbit_radius[n]]
        });
        write_csv(out, &["n", "x", "xp", "y", "yp", "radius", "orbit_radius"], rows)
    }
}

/// Log-slope of the per-period orbit maxima, and whether they strictly decrease.
pub fn contraction_fit(maxima: &[(f64, f64)]) -> Result<(f64, bool)> {
    if maxima.len() < 2 {
        return Err(Error::Fit("need at least two periods".into()));
    }
    let ns: Vec<f64> = maxima.iter().map(|m| m.0).collect();
    let logs: Vec<f64> = maxima.iter().map(|m| m.1.ln()).collect();
    let strictly = maxima.windows(2).all(|w| w[1].1 < w[0].1);
    Ok((least_squares(&ns, &logs).0, strictly))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::friction::FrictionProfile;
    use crate::paraxial::ResonatorGeometry;
    use proptest::prelude::*;

    fn sched(gamma: f64) -> MirrorSchedule {
        MirrorSchedule::new(ResonatorGeometry::normalized(1.7, 1.5).unwrap(), FrictionProfile::constant(gamma).unwrap())
            .unwrap()
    }

    #[test]
    fn courant_snyder_invariant_without_friction() {
        let s = sched(0.0);
        let m = s.initial_matrix();
        let trace = iterate_ray(&s, RayState::new(1.0, 0.0), 100).unwrap();
        let inv = |r: &RayState| m.c * r.x * r.x - m.b * r.xp * r.xp - (m.a - m.d) * r.x * r.xp;
        let i0 = inv(&trace.states[0]);
        for st in &trace.states {
            assert!((inv(st) - i0).abs() < 1e-10);
        }
    }

    #[test]
    fn chebyshev_recurrence() {
        let theta = 1.1;
        let xs = iterate_ray_difference(theta, 0.0, 1.0, theta.cos(), 50);
        for (n, x) in xs.iter().enumerate() {
            assert!((x - (n as f64 * theta).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn difference_form_matches_matrix_iteration() {
        for gamma in [0.0, 1e-3, 1e-2] {
            let s = sched(gamma);
            let trace = iterate_ray(&s, RayState::new(1.0, 0.0), 5000).unwrap();
            let xs = trace.xs();
            let diff = iterate_ray_difference(s.theta(), gamma, xs[0], xs[1], 5000);
            let worst = xs.iter().zip(&diff).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(worst < 1e-9, "gamma = {gamma}: {worst}");
        }
    }

    #[test]
    fn general_recurrence_residual() {
        let table = FrictionProfile::tabulated(vec![0.0, 100.0, 200.0, 400.0], vec![0.0, 0.05, 0.3, 0.4]).unwrap();
        let s = MirrorSchedule::new(ResonatorGeometry::normalized(1.7, 1.5).unwrap(), table).unwrap();
        let mats = trip_matrices(&s, 399).unwrap();
        let xs = iterate_ray(&s, RayState::new(0.4, 0.2), 399).unwrap().xs();
        assert!(difference_residual(&mats, &xs) < 1e-12);
    }

    #[test]
    fn roots_without_friction_lie_on_unit_circle() {
        let (m1, m2) = characteristic_roots(1.875, 0.0);
        assert!((m1.norm() - 1.0).abs() < 1e-15 && (m2.norm() - 1.0).abs() < 1e-15);
        assert!((m1.arg() - 1.875).abs() < 1e-12);
    }

    #[test]
    fn roots_modulus_and_vieta() {
        let (theta, gamma) = (1.875, 1e-3);
        let (m1, m2) = characteristic_roots(theta, gamma);
        let decay = (-gamma).exp();
        assert!((m1.norm() - (-gamma / 2.0).exp()).abs() < 1e-15);
        assert!(((m1 * m2).re - decay).abs() < 1e-15);
        assert!(((m1 + m2).re - theta.cos() * (1.0 + decay)).abs() < 1e-15);
        // arg mu = arccos(cos theta cosh(gamma/2))
        assert!((m1.arg() - (theta.cos() * (gamma / 2.0).cosh()).acos()).abs() < 1e-12);
        assert!((m1.arg() - theta).abs() < gamma);
    }

    #[test]
    fn repeated_root_expansion() {
        // cos(theta)(1 + e^-g) = 2 e^-g/2 for a double root
        let gamma = 0.2f64;
        let theta = (2.0 * (-gamma / 2.0).exp() / (1.0 + (-gamma).exp())).acos();
        let xs = iterate_ray_difference(theta, gamma, 1.0, 0.3, 40);
        for (n, x) in xs.iter().enumerate() {
            assert!((root_expansion(theta, gamma, 1.0, 0.3, n) - x).abs() < 1e-9, "n = {n}");
        }
    }

    #[test]
    fn envelope_fit_on_reference_trace() {
        let s = sched(1e-3);
        let xs = iterate_ray(&s, RayState::new(1.0, 0.0), 5000).unwrap().xs();
        let fit = fit_envelope(&xs).unwrap();
        assert!((fit.decay_rate / 5e-4 - 1.0).abs() < 0.01);
        assert!((fit.period / (2.0 * PI / s.theta()) - 1.0).abs() < 0.01);
        let flat = iterate_ray(&sched(0.0), RayState::new(1.0, 0.0), 5000).unwrap().xs();
        assert!(fit_envelope(&flat).unwrap().decay_rate.abs() < 1e-6);
    }

    #[test]
    fn continuum_limit_tracks_rays() {
        let s = sched(1e-3);
        let params = crate::oscillator::OscillatorParams::new(s.theta(), s.friction().clone()).unwrap();
        let sol = ClassicalSolution::new(&params).unwrap();
        for init in [RayState::new(1.0, 0.0), RayState::new(0.0, 1.0)] {
            let trace = iterate_ray(&s, init, 2000).unwrap();
            let amp = trace.states.iter().fold(0.0f64, |m, r| m.max(r.x.abs()));
            for (n, st) in trace.states.iter().enumerate() {
                let c = continuum_ray(&s, &sol, init, n as f64).unwrap();
                assert!((c - st.x).abs() < 0.01 * amp, "n = {n}");
            }
        }
    }

    #[test]
    fn lissajous_cases() {
        let zero = lissajous(&sched(1e-3), RayState::default(), RayState::default(), 50).unwrap();
        assert!(zero.orbit_radius.iter().all(|&r| r == 0.0));
        assert!((0..zero.len()).all(|n| zero.spot_radius(n) == 0.0));

        let still = lissajous(&sched(0.0), RayState::new(1.0, 0.0), RayState::new(0.7, 0.5), 400).unwrap();
        let r0 = still.orbit_radius[0];
        assert!(still.orbit_radius.iter().all(|r| (r - r0).abs() < 1e-12));
        assert!((0..still.len()).all(|n| still.spot_radius(n) <= r0 + 1e-12));

        let s = sched(1e-3);
        let tr = lissajous(&s, RayState::new(1.0, 0.0), RayState::new(0.7, 0.5), 5000).unwrap();
        let maxima = tr.per_period_max(2.0 * PI / s.theta());
        let (slope, strict) = contraction_fit(&maxima).unwrap();
        assert!(strict);
        assert!((slope / -5e-4 - 1.0).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn vieta_holds(theta in 0.01f64..3.13, gamma in 0.0f64..0.5) {
            let (m1, m2) = characteristic_roots(theta, gamma);
            let p = m1 * m2;
            let s = m1 + m2;
            prop_assert!((p.re - (-gamma).exp()).abs() < 1e-14 && p.im.abs() < 1e-14);
            prop_assert!((s.re - theta.cos() * (1.0 + (-gamma).exp())).abs() < 1e-14);
        }

        #[test]
        fn root_expansion_reproduces_recurrence(theta in 0.1f64..3.0, gamma in 0.0f64..0.05,
                                                x0 in -1.0f64..1.0, x1 in -1.0f64..1.0) {
            let xs = iterate_ray_difference(theta, gamma, x0, x1, 200);
            for n in [0usize, 1, 7, 50, 200] {
                prop_assert!((root_expansion(theta, gamma, x0, x1, n) - xs[n]).abs() < 1e-9);
            }
        }
    }
}
