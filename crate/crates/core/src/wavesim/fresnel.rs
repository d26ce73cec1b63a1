//! One application of the generalized Fresnel integral
//!
//!   psi'(x) = sqrt(i / (lambda B)) * integral exp[-i pi (A xi^2 + D x^2 - 2 x xi) / (lambda B)] psi(xi) dxi
//!
//! evaluated as pre-chirp, DFT, post-chirp. The output grid is centered with
//! spacing lambda |B| / (N dx), so it rescales with B.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::ComplexField;
use crate::error::{Error, Result};
use crate::paraxial::AbcdMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FresnelOptions {
    /// Smallest |B| accepted, in the length unit of the field.
    pub eps_b: f64,
    pub check_sampling: bool,
    /// Samples below this fraction of the peak amplitude are ignored by the
    /// sampling check.
    pub support_threshold: f64,
    /// Largest phase advance per sample of the pre-chirped field.
    pub max_phase_step: f64,
    /// Largest amplitude allowed in the outer 1/32 of the window, relative to the peak.
    pub edge_threshold: f64,
}

impl Default for FresnelOptions {
    fn default() -> Self {
        FresnelOptions {
            eps_b: 1e-9,
            check_sampling: true,
            support_threshold: 1e-6,
            max_phase_step: PI / 2.0,
            edge_threshold: 1e-4,
        }
    }
}

/// Reusable transform workspace for fields of one length.
pub struct FresnelPropagator {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    options: FresnelOptions,
}

impl std::fmt::Debug for FresnelPropagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FresnelPropagator").field("n", &self.n).field("options", &self.options).finish()
    }
}

impl FresnelPropagator {
    pub fn new(n: usize, options: FresnelOptions) -> Self {
        let mut planner = FftPlanner::new();
        FresnelPropagator { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n), options }
    }

    pub fn options(&self) -> &FresnelOptions {
        &self.options
    }

    pub fn propagate(&self, field: &ComplexField, m: &AbcdMatrix) -> Result<ComplexField> {
        let n = field.len();
        if n != self.n {
            return Err(Error::InvalidParameter(format!("propagator planned for {} samples, field has {n}", self.n)));
        }
        if m.b.abs() <= self.options.eps_b {
            return Err(Error::NearFocalPlane { b: m.b, eps: self.options.eps_b });
        }
        let lambda = field.wavelength();
        let (dx, x0) = (field.dx(), field.x0());
        let lb = lambda * m.b;
        let s = m.b.signum();

        let mut buf: Vec<Complex64> = field
            .samples()
            .iter()
            .enumerate()
            .map(|(j, psi)| {
                let xi = x0 + j as f64 * dx;
                let chirp = Complex64::from_polar(1.0, -PI * m.a * xi * xi / lb);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                psi * chirp * sign
            })
            .collect();
        if self.options.check_sampling {
            self.check_sampling(field, &buf)?;
        }
        if s > 0.0 {
            self.inverse.process(&mut buf);
        } else {
            self.forward.process(&mut buf);
        }

        let dx_out = lambda * m.b.abs() / (n as f64 * dx);
        let x0_out = -(n as f64 / 2.0) * dx_out;
        let prefactor = Complex64::new(0.0, 1.0 / lb).sqrt() * dx;
        let half = n as f64 / 2.0;
        let samples = buf
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let x = x0_out + k as f64 * dx_out;
                let shift = 2.0 * PI * s * (k as f64 - half) * x0 / (n as f64 * dx);
                let post = Complex64::from_polar(1.0, -PI * m.d * x * x / lb + shift);
                prefactor * post * v
            })
            .collect();
        ComplexField::new(samples, dx_out, x0_out, lambda, field.plane())
    }

    fn check_sampling(&self, field: &ComplexField, chirped: &[Complex64]) -> Result<()> {
        let n = field.len();
        let amps: Vec<f64> = field.samples().iter().map(|z| z.norm()).collect();
        let peak = amps.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return Ok(());
        }
        let edge = (n / 32).max(1);
        let edge_amp = amps[..edge].iter().chain(&amps[n - edge..]).cloned().fold(0.0, f64::max);
        if edge_amp > self.options.edge_threshold * peak {
            return Err(Error::Sampling {
                reason: format!("field reaches the window edge ({:.3e} of peak amplitude)", edge_amp / peak),
                suggested_n: 2 * n,
            });
        }
        let floor = self.options.support_threshold * peak;
        let mut worst = 0.0f64;
        for j in 0..n - 1 {
            if amps[j] >= floor && amps[j + 1] >= floor {
                // undo the (-1)^j centering factor before measuring the phase step
                let step = (-chirped[j + 1] * chirped[j].conj()).arg().abs();
                worst = worst.max(step);
            }
        }
        if worst > self.options.max_phase_step {
            let factor = (worst / self.options.max_phase_step).ceil() as usize;
            return Err(Error::Sampling {
                reason: format!("chirp advances {worst:.3} rad per sample"),
                suggested_n: (n * factor.max(2)).next_power_of_two(),
            });
        }
        Ok(())
    }
}

pub fn fresnel_round_trip(field: &ComplexField, m: &AbcdMatrix, options: FresnelOptions) -> Result<ComplexField> {
    FresnelPropagator::new(field.len(), options).propagate(field, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paraxial::ResonatorGeometry;
    use crate::wavesim::{GaussianBeam, PlaneTag};

    const LAMBDA: f64 = 1e-4;
    const N: usize = 4096;

    #[test]
    fn free_propagation_matches_analytic_gaussian() {
        let l = 0.5;
        let w = 5.5e-3;
        let q0 = Complex64::new(0.0, PI * w * w / LAMBDA);
        let dx = (LAMBDA * l / N as f64).sqrt();
        let input = ComplexField::centered(N, dx, LAMBDA, PlaneTag::LeftMirror, |x| {
            (Complex64::new(0.0, -PI * x * x / LAMBDA) / q0).exp()
        })
        .unwrap();
        let out = fresnel_round_trip(&input, &AbcdMatrix::new(1.0, l, 0.0, 1.0), FresnelOptions::default()).unwrap();
        let q1 = q0 + l;
        let exact = ComplexField::centered(N, out.dx(), LAMBDA, PlaneTag::LeftMirror, |x| {
            (q0 / q1).sqrt() * (Complex64::new(0.0, -PI * x * x / LAMBDA) / q1).exp()
        })
        .unwrap();
        let diff: f64 =
            out.samples().iter().zip(exact.samples()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * out.dx();
        assert!((diff / exact.norm_sq()).sqrt() < 1e-8);
    }

    #[test]
    fn eigenmode_reproduces_itself() {
        let m = ResonatorGeometry::normalized(1.7, 1.5).unwrap().round_trip_matrix();
        let beam = GaussianBeam::eigenmode(m.b, m.c, LAMBDA).unwrap();
        let dx = (LAMBDA * m.b.abs() / N as f64).sqrt();
        let input = beam.sample(N, dx, PlaneTag::LeftMirror).unwrap();
        let out = fresnel_round_trip(&input, &m, FresnelOptions::default()).unwrap();
        assert!((out.dx() - dx).abs() < 1e-15 * dx);
        assert!((out.norm_sq() - input.norm_sq()).abs() < 1e-6);
        assert!(1.0 - out.overlap(&input).unwrap() < 1e-6);
        assert!((out.spot_size().unwrap() / input.spot_size().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn off_center_grid_origin() {
        // same input on a shifted grid gives the same output samples
        let m = AbcdMatrix::new(-0.3, -0.91, 1.0, -0.3);
        let beam = GaussianBeam::eigenmode(m.b, m.c, LAMBDA).unwrap().displaced(2e-3, 1e-3);
        let n = 1024;
        let dx = (LAMBDA * m.b.abs() / n as f64).sqrt();
        let centered = beam.sample(n, dx, PlaneTag::LeftMirror).unwrap();
        let shift = 3.0 * dx;
        let shifted = ComplexField::new(
            (0..n).map(|j| beam.value(centered.x0() + shift + j as f64 * dx)).collect(),
            dx,
            centered.x0() + shift,
            LAMBDA,
            PlaneTag::LeftMirror,
        )
        .unwrap()
        .normalized()
        .unwrap();
        let a = fresnel_round_trip(&centered, &m, FresnelOptions::default()).unwrap();
        let b = fresnel_round_trip(&shifted, &m, FresnelOptions::default()).unwrap();
        assert!(a.phase_aligned_distance(&b).unwrap() < 1e-10);
    }

    #[test]
    fn focal_plane_rejected() {
        let beam = GaussianBeam::new(Complex64::new(0.0, 1.0), LAMBDA).unwrap();
        let f = beam.sample(64, 0.1, PlaneTag::LeftMirror).unwrap();
        let err = fresnel_round_trip(&f, &AbcdMatrix::new(1.0, 1e-12, -1.0, 1.0), FresnelOptions::default());
        assert!(matches!(err, Err(Error::NearFocalPlane { .. })));
    }

    #[test]
    fn under_sampled_chirp_detected() {
        // tiny B makes the pre-chirp far too steep for the grid
        let beam = GaussianBeam::new(Complex64::new(0.0, 1.0), LAMBDA).unwrap();
        let w = beam.spot_size();
        let f = beam.sample(256, 8.0 * w / 256.0, PlaneTag::LeftMirror).unwrap();
        let err = fresnel_round_trip(&f, &AbcdMatrix::new(1.0, 1e-6, 0.0, 1.0), FresnelOptions::default()).unwrap_err();
        match err {
            Error::Sampling { suggested_n, .. } => assert!(suggested_n > 256),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn window_edge_detected() {
        let beam = GaussianBeam::new(Complex64::new(0.0, 1.0), LAMBDA).unwrap();
        let w = beam.spot_size();
        let f = beam.sample(256, 2.0 * w / 256.0, PlaneTag::LeftMirror).unwrap();
        let err = fresnel_round_trip(&f, &AbcdMatrix::new(1.0, 0.5, 0.0, 1.0), FresnelOptions::default());
        assert!(matches!(err, Err(Error::Sampling { .. })));
    }
}
