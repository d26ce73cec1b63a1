//! Complex beam-parameter tracking through the moving-mirror cavity.

use super::spot_size_from_q;
use crate::error::{Error, Result};
use crate::schedule::MirrorSchedule;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tracking {
    /// q pushed through each trip's round-trip matrix starting from `q0`.
    Propagated { q0: Complex64 },
    /// The instantaneous TEM00 mode q = i sqrt(-B(n)/C(n)) of each round
    /// trip, i.e. the mode a laser on this cavity follows adiabatically.
    Tem00,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSample {
    pub n: usize,
    pub q_left: Complex64,
    pub q_right: Complex64,
    pub w1: f64,
    pub w2: f64,
}

/// Beam parameter and spot size on the left mirror and, through the
/// half-trip matrix, on the right mirror for n = 0..=n_max.
pub fn gaussian_q_trace(
    sched: &MirrorSchedule,
    tracking: Tracking,
    wavelength: f64,
    n_max: usize,
) -> Result<Vec<QSample>> {
    if !(wavelength > 0.0) {
        return Err(Error::InvalidParameter(format!("wavelength must be positive, got {wavelength}")));
    }
    let mut out = Vec::with_capacity(n_max + 1);
    let mut q = match tracking {
        Tracking::Propagated { q0 } => q0,
        Tracking::Tem00 => Complex64::new(0.0, 0.0),
    };
    for n in 0..=n_max {
        let geom = sched.geometry_at(n as f64)?;
        let m = geom.round_trip_matrix();
        if let Tracking::Tem00 = tracking {
            let ratio = -m.b / m.c;
            if !(ratio > 0.0) {
                return Err(Error::UnconfinedBeam { re: 0.0, im: ratio });
            }
            q = Complex64::new(0.0, ratio.sqrt());
        }
        if !(q.im > 0.0) {
            return Err(Error::UnconfinedBeam { re: q.re, im: q.im });
        }
        let q_right = geom.half_trip_matrix().transform_q(q)?;
        out.push(QSample {
            n,
            q_left: q,
            q_right,
            w1: spot_size_from_q(q, wavelength),
            w2: spot_size_from_q(q_right, wavelength),
        });
        if n < n_max {
            if let Tracking::Propagated { .. } = tracking {
                q = m.transform_q(q)?;
            }
        }
    }
    Ok(out)
}
