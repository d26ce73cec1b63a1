//! Mirror trajectories that keep A = cos(theta) fixed while
//! B(n) = B(0) exp(-g(n)) and C(n) = C(0) exp(g(n)).

use std::cell::Cell;
use std::io::Write;

use crate::error::{Error, Result};
use crate::export::write_csv;
use crate::friction::FrictionProfile;
use crate::ode::{integrate_sampled, OdeTolerance, State};
use crate::paraxial::{AbcdMatrix, ResonatorGeometry};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone)]
pub struct MirrorSchedule {
    geom0: ResonatorGeometry,
    friction: FrictionProfile,
    m0: AbcdMatrix,
    theta: f64,
}

impl MirrorSchedule {
    /// Requires a strictly stable start with L2(0) > f, the branch on which
    /// L2 runs away from the lens and L1 approaches f from above.
    pub fn new(geom0: ResonatorGeometry, friction: FrictionProfile) -> Result<Self> {
        let f = geom0.focal_length();
        if geom0.l2() <= f {
            return Err(Error::InvalidSchedule(format!("L2(0)/f = {} must exceed 1", geom0.l2_over_f())));
        }
        let info = geom0.stability();
        if !info.strictly_stable() {
            return Err(Error::InvalidSchedule(format!(
                "initial geometry (L1/f, L2/f) = ({}, {}) is not strictly stable (A = {})",
                geom0.l1_over_f(),
                geom0.l2_over_f(),
                info.a
            )));
        }
        Ok(MirrorSchedule { geom0, friction, m0: geom0.round_trip_matrix(), theta: info.theta.expect("stable") })
    }

    pub fn initial_geometry(&self) -> &ResonatorGeometry {
        &self.geom0
    }

    pub fn friction(&self) -> &FrictionProfile {
        &self.friction
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn initial_matrix(&self) -> AbcdMatrix {
        self.m0
    }

    pub fn b0(&self) -> f64 {
        self.m0.b
    }

    pub fn c0(&self) -> f64 {
        self.m0.c
    }

    /// (L1(n), L2(n)) in the units of the initial geometry.
    pub fn positions_at(&self, n: f64) -> Result<(f64, f64)> {
        let f = self.geom0.focal_length();
        let (d1, d2) = self.focal_offsets_at(n)?;
        Ok((f + d1, f + d2))
    }

    /// (L1(n) - f, L2(n) - f). L1 follows from
    /// L1 = f (2 L2 - f (1 - cos theta)) / (2 L2 - 2 f), whose offset form is
    /// f^2 (1 + cos theta) / (2 (L2 - f)).
    pub fn focal_offsets_at(&self, n: f64) -> Result<(f64, f64)> {
        let g = self.friction.g(n)?;
        let f = self.geom0.focal_length();
        let d2 = self.geom0.focal_offsets().1 * g.exp();
        let d1 = f * f * (1.0 + self.m0.a) / (2.0 * d2);
        if !d2.is_finite() || d1 == 0.0 {
            return Err(Error::InvalidSchedule(format!("mirror positions overflow at n = {n}")));
        }
        Ok((d1, d2))
    }

    pub fn geometry_at(&self, n: f64) -> Result<ResonatorGeometry> {
        let (d1, d2) = self.focal_offsets_at(n)?;
        ResonatorGeometry::from_focal_offsets(d1, d2, self.geom0.focal_length())
    }

    /// Round-trip matrix composed from the mirror positions at `n`.
    pub fn round_trip_at(&self, n: f64) -> Result<AbcdMatrix> {
        self.geometry_at(n).map(|g| g.round_trip_matrix())
    }

    pub fn half_trip_at(&self, n: f64) -> Result<AbcdMatrix> {
        self.geometry_at(n).map(|g| g.half_trip_matrix())
    }

    /// (A(0), B(0) exp(-g), C(0) exp(g), A(0)), the target of the schedule.
    pub fn predicted_matrix(&self, n: f64) -> Result<AbcdMatrix> {
        let g = self.friction.g(n)?;
        let m = self.m0;
        Ok(AbcdMatrix::new(m.a, m.b * (-g).exp(), m.c * g.exp(), m.d))
    }

    /// |dL2/dt| in m/s with the round-trip time (L1 + L2)/c.
    /// The lens focal length in meters cancels out of the ratio.
    pub fn mirror_speed(&self, n: f64) -> Result<f64> {
        let (_, gdot) = self.friction.eval(n)?;
        let (l1, l2) = self.positions_at(n)?;
        let d2 = self.focal_offsets_at(n)?.1;
        Ok(gdot * SPEED_OF_LIGHT * d2 / (l1 + l2))
    }

    /// Columns `n,g,l1_over_f,l2_over_f,a,b_over_f,c_times_f`.
    pub fn write_csv<W: Write>(&self, out: W, ns: &[f64]) -> Result<()> {
        let f = self.geom0.focal_length();
        let rows = ns
            .iter()
            .map(|&n| {
                let geom = self.geometry_at(n)?;
                let m = geom.round_trip_matrix();
                Ok(vec![n, self.friction.g(n)?, geom.l1_over_f(), geom.l2_over_f(), m.a, m.b / f, m.c * f])
            })
            .collect::<Result<Vec<_>>>()?;
        write_csv(out, &["n", "g", "l1_over_f", "l2_over_f", "a", "b_over_f", "c_times_f"], rows)
    }
}

/// One sample of a numerically integrated mirror path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub n: f64,
    pub l1: f64,
    pub l2: f64,
}

/// Below this |dB/dL1| (relative to f) the (B, C) Jacobian counts as singular.
const JACOBIAN_FLOOR: f64 = 1e-12;

/// Integrates J(L1, L2) d(L1, L2)/dn = g'(n) (-B, C) from `geom0`, sampling
/// every `dn` up to `n_max`. Independent of the closed-form trajectories.
pub fn integrate_schedule_ode(
    geom0: &ResonatorGeometry,
    friction: &FrictionProfile,
    n_max: f64,
    dn: f64,
    tol: OdeTolerance,
) -> Result<Vec<PathSample>> {
    if !(dn > 0.0) || !(n_max >= 0.0) || !n_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need dn > 0 and finite n_max >= 0, got dn = {dn}, n_max = {n_max}"
        )));
    }
    if n_max > friction.upper_bound() {
        return Err(Error::Domain { what: "n_max", value: n_max, domain: format!("[0, {}]", friction.upper_bound()) });
    }
    let f = geom0.focal_length();
    let singular: Cell<Option<(f64, f64)>> = Cell::new(None);
    let rhs = |n: f64, y: &State<2>, dy: &mut State<2>| {
        let (_, gdot) = friction.eval_clamped(n);
        let geom = ResonatorGeometry::new(y[0], y[1], f);
        let Ok(geom) = geom else {
            singular.set(Some((y[0], y[1])));
            dy.fill(0.0);
            return;
        };
        let jac = geom.bc_jacobian();
        let (b, c) = (geom.closed_form_b(), geom.closed_form_c());
        if jac[0][0].abs() < JACOBIAN_FLOOR * f {
            singular.set(Some((y[0], y[1])));
            dy.fill(0.0);
            return;
        }
        let dl2 = c * gdot / jac[1][1];
        let dl1 = (-b * gdot - jac[0][1] * dl2) / jac[0][0];
        dy[0] = dl1;
        dy[1] = dl2;
    };
    let steps = (n_max / dn).floor();
    let end = steps * dn;
    let samples = integrate_sampled(rhs, 0.0, State::<2>::new(geom0.l1(), geom0.l2()), end, dn, tol)?;
    if let Some((l1, l2)) = singular.get() {
        return Err(Error::SingularJacobian { l1, l2 });
    }
    Ok(samples.into_iter().map(|(n, y)| PathSample { n, l1: y[0], l2: y[1] }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(gamma: f64) -> MirrorSchedule {
        MirrorSchedule::new(ResonatorGeometry::normalized(1.7, 1.5).unwrap(), FrictionProfile::constant(gamma).unwrap())
            .unwrap()
    }

    #[test]
    fn initial_positions_reproduced() {
        let (l1, l2) = reference(1e-3).positions_at(0.0).unwrap();
        assert!((l1 - 1.7).abs() < 1e-12);
        assert_eq!(l2, 1.5);
        // plain form of the L1 law with cos theta = -0.3
        let l1_plain = (2.0 * 1.5 - (1.0 + 0.3)) / (2.0 * 1.5 - 2.0);
        assert!((l1 - l1_plain).abs() < 1e-12);
    }

    #[test]
    fn asymptotics() {
        let s = reference(1.0);
        let (l1, l2) = s.positions_at(30.0).unwrap();
        assert!(l2 > 1e12);
        assert!(l1 > 1.0 && l1 - 1.0 < 1e-12);
        let (d1, _) = s.focal_offsets_at(200.0).unwrap();
        assert!(d1 > 0.0 && d1 < 1e-80);
        let m = s.round_trip_at(200.0).unwrap();
        assert!((m.a + 0.3).abs() < 1e-12);
    }

    #[test]
    fn matrix_laws_at_g_half() {
        let s = reference(1e-3);
        let n = 500.0;
        let m = s.round_trip_at(n).unwrap();
        let m0 = s.initial_matrix();
        let e = 0.5f64.exp();
        assert!((m.a - m0.a).abs() < 1e-10);
        assert!((m.b - m0.b / e).abs() < 1e-10 * m0.b.abs());
        assert!((m.c - m0.c * e).abs() < 1e-10 * m0.c.abs());
        assert!(m.max_abs_diff(&s.predicted_matrix(n).unwrap()) < 1e-10);
    }

    #[test]
    fn rejects_lower_domain() {
        let err = MirrorSchedule::new(
            ResonatorGeometry::normalized(0.5, 0.5).unwrap(),
            FrictionProfile::constant(1e-3).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidSchedule(_)));
        let err = MirrorSchedule::new(
            ResonatorGeometry::normalized(3.0, 3.0).unwrap(),
            FrictionProfile::constant(1e-3).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidSchedule(_)));
    }

    #[test]
    fn ode_matches_closed_form() {
        let s = reference(1e-2);
        let tol = OdeTolerance::new(1e-12, 1e-14).unwrap();
        let path = integrate_schedule_ode(s.initial_geometry(), s.friction(), 200.0, 1.0, tol).unwrap();
        assert_eq!(path.len(), 201);
        for p in &path {
            let (l1, l2) = s.positions_at(p.n).unwrap();
            assert!((p.l1 - l1).abs() < 1e-6 && (p.l2 - l2).abs() < 1e-6, "n = {}", p.n);
        }
    }

    #[test]
    fn stationary_without_friction() {
        let s = reference(0.0);
        let path =
            integrate_schedule_ode(s.initial_geometry(), s.friction(), 50.0, 5.0, OdeTolerance::default()).unwrap();
        assert!(path.iter().all(|p| p.l1 == 1.7 && p.l2 == 1.5));
    }

    #[test]
    fn singular_jacobian_detected() {
        // A = 0 at (1.5, 2.0): dB/dL1 = 2A vanishes
        let geom = ResonatorGeometry::normalized(1.5, 2.0).unwrap();
        let err = integrate_schedule_ode(
            &geom,
            &FrictionProfile::constant(1e-2).unwrap(),
            10.0,
            1.0,
            OdeTolerance::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::SingularJacobian { .. }));
    }

    #[test]
    fn path_stays_in_upper_domain() {
        let s = reference(1e-3);
        for k in 0..=200 {
            let n = k as f64 * 10.0;
            let g = s.geometry_at(n).unwrap();
            assert!(g.stability().strictly_stable());
            assert!(g.l1_over_f() > 1.0 && g.l2_over_f() > 1.0);
        }
    }

    #[test]
    fn mirror_speed_values() {
        let s = reference(1e-3);
        let v = s.mirror_speed(0.0).unwrap();
        assert!((v - 1e-3 * SPEED_OF_LIGHT * 0.5 / 3.2).abs() < 1e-9 * v);
        assert_eq!(reference(0.0).mirror_speed(100.0).unwrap(), 0.0);
        let late = reference(1e-8);
        let v = late.mirror_speed(2.0e9).unwrap();
        assert!((v / SPEED_OF_LIGHT / 1e-8 - 1.0).abs() < 0.1);
    }

    #[test]
    fn csv_rows() {
        let s = reference(1e-3);
        let mut buf = Vec::new();
        s.write_csv(&mut buf, &[0.0, 1000.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "n,g,l1_over_f,l2_over_f,a,b_over_f,c_times_f");
        assert!(lines[1].starts_with("0.0000000000000000e0,0.0000000000000000e0,1.7"));
    }
}
