//! Fixtures shared by the engine benchmarks.

use cavity_core::{ComplexField, FrictionProfile, GaussianBeam, MirrorSchedule, PlaneTag, ResonatorGeometry};

pub const WAVELENGTH: f64 = 1e-4;

pub fn reference_geometry() -> ResonatorGeometry {
    ResonatorGeometry::normalized(1.7, 1.5).expect("reference geometry is valid")
}

pub fn reference_schedule(gamma: f64) -> MirrorSchedule {
    MirrorSchedule::new(reference_geometry(), FrictionProfile::constant(gamma).expect("gamma >= 0"))
        .expect("reference geometry admits a schedule")
}

pub fn eigenmode_beam() -> GaussianBeam {
    let m = reference_geometry().round_trip_matrix();
    GaussianBeam::eigenmode(m.b, m.c, WAVELENGTH).expect("stable cavity has a mode")
}

/// Eigenmode on the self-reproducing Fresnel grid of `n` samples.
pub fn eigenmode_field(n: usize) -> ComplexField {
    let m = reference_geometry().round_trip_matrix();
    let dx = (WAVELENGTH * m.b.abs() / n as f64).sqrt();
    eigenmode_beam().sample(n, dx, PlaneTag::LeftMirror).expect("valid grid")
}

/// Eigenmode in a window of 16 spot sizes.
pub fn windowed_field(n: usize) -> ComplexField {
    let beam = eigenmode_beam();
    beam.sample(n, 16.0 * beam.spot_size() / n as f64, PlaneTag::LeftMirror).expect("valid grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert_eq!(eigenmode_field(256).len(), 256);
        assert!((windowed_field(256).norm_sq() - 1.0).abs() < 1e-12);
        assert!(reference_schedule(1e-3).theta() > 1.8);
    }
}
