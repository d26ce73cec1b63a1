//! Wave-optics regime: transverse fields bounced through the cavity.
//!
//! Field convention: a Gaussian beam is exp(-i pi x^2 / (lambda q)) with
//! Im q > 0, and a ray angle x' appears as the phase exp(-i k x' x).

mod beam;
mod collapse;
mod fresnel;
mod splitstep;

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

pub use beam::{gaussian_q_trace, QSample, Tracking};
pub use collapse::{run_collapse, CollapseEngine, CollapseRow, CollapseTrace, GridSpec};
pub use fresnel::{fresnel_round_trip, FresnelOptions, FresnelPropagator};
pub use splitstep::{split_step_round_trip, SplitStepPropagator, SplittingOrder, DEFAULT_SUBSTEPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneTag {
    LeftMirror,
    RightMirror,
}

/// Complex amplitude samples psi_j at x_j = x0 + j dx.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    samples: Vec<Complex64>,
    dx: f64,
    x0: f64,
    wavelength: f64,
    plane: PlaneTag,
}

impl ComplexField {
    pub fn new(samples: Vec<Complex64>, dx: f64, x0: f64, wavelength: f64, plane: PlaneTag) -> Result<Self> {
        let n = samples.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("field length must be a power of two >= 2, got {n}")));
        }
        ensure_finite("dx", dx)?;
        ensure_finite("x0", x0)?;
        ensure_finite("wavelength", wavelength)?;
        if dx <= 0.0 || wavelength <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "dx and wavelength must be positive, got dx = {dx}, wavelength = {wavelength}"
            )));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("field contains non-finite samples".into()));
        }
        Ok(ComplexField { samples, dx, x0, wavelength, plane })
    }

    /// Grid centered on the axis, x_j = (j - n/2) dx, filled from `f`.
    pub fn centered(n: usize, dx: f64, wavelength: f64, plane: PlaneTag, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let x0 = -(n as f64 / 2.0) * dx;
        let samples = (0..n).map(|j| f(x0 + j as f64 * dx)).collect();
        Self::new(samples, dx, x0, wavelength, plane)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn plane(&self) -> PlaneTag {
        self.plane
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn with_plane(mut self, plane: PlaneTag) -> Self {
        self.plane = plane;
        self
    }

    pub fn norm_sq(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sq();
        if !(n > 0.0) {
            return Err(Error::Resolution("field has zero norm".into()));
        }
        let s = 1.0 / n.sqrt();
        for z in &mut self.samples {
            *z *= s;
        }
        Ok(self)
    }

    /// Intensity-weighted mean position.
    pub fn centroid(&self) -> Result<f64> {
        self.moments().map(|(m, _)| m)
    }

    /// w = 2 sqrt(<x^2> - <x>^2); the 1/e^2 radius for a fundamental Gaussian.
    pub fn spot_size(&self) -> Result<f64> {
        let (_, var) = self.moments()?;
        let w = 2.0 * var.sqrt();
        if !(w > 0.0) {
            return Err(Error::Resolution("intensity concentrated in a single sample".into()));
        }
        Ok(w)
    }

    fn moments(&self) -> Result<(f64, f64)> {
        let total: f64 = self.samples.iter().map(|z| z.norm_sqr()).sum();
        if !(total > 0.0) {
            return Err(Error::Resolution("field has zero norm".into()));
        }
        let mean = self.samples.iter().enumerate().map(|(j, z)| z.norm_sqr() * self.x(j)).sum::<f64>() / total;
        let var = self.samples.iter().enumerate().map(|(j, z)| z.norm_sqr() * (self.x(j) - mean).powi(2)).sum::<f64>()
            / total;
        Ok((mean, var.max(0.0)))
    }

    fn check_same_grid(&self, other: &ComplexField) -> Result<()> {
        let tol = 1e-9 * self.dx;
        if self.len() != other.len() || (self.dx - other.dx).abs() > tol || (self.x0 - other.x0).abs() > tol {
            return Err(Error::InvalidParameter("fields live on different grids".into()));
        }
        Ok(())
    }

    /// <self, other> = sum conj(self_j) other_j dx.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        self.check_same_grid(other)?;
        Ok(self.samples.iter().zip(&other.samples).map(|(a, b)| a.conj() * b).sum::<Complex64>() * self.dx)
    }

    /// |<self, other>| / ||other||^2.
    pub fn overlap(&self, other: &ComplexField) -> Result<f64> {
        Ok(self.inner(other)?.norm() / other.norm_sq())
    }

    /// min over phi of ||self - e^{i phi} reference|| / ||reference||.
    pub fn phase_aligned_distance(&self, reference: &ComplexField) -> Result<f64> {
        let ip = reference.inner(self)?;
        let phase = if ip.norm() > 0.0 { ip / ip.norm() } else { Complex64::new(1.0, 0.0) };
        let diff: f64 =
            self.samples.iter().zip(&reference.samples).map(|(a, b)| (a - phase * b).norm_sqr()).sum::<f64>() * self.dx;
        Ok((diff / reference.norm_sq()).sqrt())
    }

    /// Little-endian interleaved (re, im) f64 pairs.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = Vec::with_capacity(16 * self.len());
        for z in &self.samples {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn sidecar(&self, n: u64) -> SnapshotMeta {
        SnapshotMeta {
            n,
            dx: self.dx,
            x0: self.x0,
            wavelength: self.wavelength,
            plane_tag: self.plane,
            count: self.len(),
        }
    }

    pub fn read_snapshot<R: Read>(mut data: R, meta: &SnapshotMeta) -> Result<Self> {
        let mut bytes = Vec::new();
        data.read_to_end(&mut bytes)?;
        if bytes.len() != 16 * meta.count {
            return Err(Error::InvalidParameter(format!(
                "snapshot holds {} bytes, expected {}",
                bytes.len(),
                16 * meta.count
            )));
        }
        let samples = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        Self::new(samples, meta.dx, meta.x0, meta.wavelength, meta.plane_tag)
    }
}

/// JSON sidecar describing a binary field snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub n: u64,
    pub dx: f64,
    pub x0: f64,
    pub wavelength: f64,
    pub plane_tag: PlaneTag,
    pub count: usize,
}

/// Possibly displaced and tilted Gaussian beam at one plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBeam {
    pub q: Complex64,
    pub wavelength: f64,
    pub amplitude: f64,
    pub center: f64,
    pub tilt: f64,
}

impl GaussianBeam {
    pub fn new(q: Complex64, wavelength: f64) -> Result<Self> {
        ensure_finite("wavelength", wavelength)?;
        if wavelength <= 0.0 {
            return Err(Error::InvalidParameter(format!("wavelength must be positive, got {wavelength}")));
        }
        if !(q.im > 0.0) || !q.re.is_finite() || !q.im.is_finite() {
            return Err(Error::UnconfinedBeam { re: q.re, im: q.im });
        }
        Ok(GaussianBeam { q, wavelength, amplitude: 1.0, center: 0.0, tilt: 0.0 })
    }

    /// TEM00 mode of a stable canonical round trip: q = i sqrt(-B/C).
    pub fn eigenmode(b: f64, c: f64, wavelength: f64) -> Result<Self> {
        let ratio = -b / c;
        if !(ratio > 0.0) {
            return Err(Error::UnconfinedBeam { re: 0.0, im: ratio });
        }
        Self::new(Complex64::new(0.0, ratio.sqrt()), wavelength)
    }

    pub fn displaced(mut self, center: f64, tilt: f64) -> Self {
        self.center = center;
        self.tilt = tilt;
        self
    }

    pub fn spot_size(&self) -> f64 {
        spot_size_from_q(self.q, self.wavelength)
    }

    pub fn value(&self, x: f64) -> Complex64 {
        let k = 2.0 * PI / self.wavelength;
        let u = x - self.center;
        let phase =
            Complex64::new(0.0, -PI / self.wavelength) * u * u / self.q + Complex64::new(0.0, -k * self.tilt * x);
        self.amplitude * phase.exp()
    }

    /// Unit-norm samples on a centered grid.
    pub fn sample(&self, n: usize, dx: f64, plane: PlaneTag) -> Result<ComplexField> {
        ComplexField::centered(n, dx, self.wavelength, plane, |x| self.value(x))?.normalized()
    }
}

/// w^2 = -lambda / (pi Im(1/q)).
pub fn spot_size_from_q(q: Complex64, wavelength: f64) -> f64 {
    (-wavelength / (PI * q.inv().im)).sqrt()
}
