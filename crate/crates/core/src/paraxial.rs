//! Paraxial ray-matrix algebra for the lens-in-a-plane-cavity resonator.
//!
//! A ray is the column vector (x, x'). Matrices compose right to left, so
//! `p2 * lens * p1` first propagates over `p1`. The round trip is referenced
//! at the left flat mirror.

use std::io::Write;
use std::ops::Mul;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{ensure_finite, Error, Result};
use crate::export::write_csv;

/// Tolerance on a = d when a matrix is required to be canonical.
pub const CANONICAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbcdMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl AbcdMatrix {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        AbcdMatrix { a, b, c, d }
    }

    pub const fn identity() -> Self {
        AbcdMatrix::new(1.0, 0.0, 0.0, 1.0)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn is_unimodular(&self, tol: f64) -> bool {
        (self.det() - 1.0).abs() <= tol
    }

    pub fn is_canonical(&self, tol: f64) -> bool {
        (self.a - self.d).abs() <= tol
    }

    /// The same elements traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        AbcdMatrix::new(self.d, self.b, self.c, self.a)
    }

    pub fn apply(&self, x: f64, xp: f64) -> (f64, f64) {
        (self.a * x + self.b * xp, self.c * x + self.d * xp)
    }

    /// Beam-parameter transformation q -> (A q + B) / (C q + D).
    pub fn transform_q(&self, q: Complex64) -> Result<Complex64> {
        let den = self.c * q + self.d;
        if den.norm() <= f64::EPSILON * (self.c.abs() * q.norm() + self.d.abs()) {
            return Err(Error::BeamSingularity);
        }
        Ok((self.a * q + self.b) / den)
    }

    pub fn max_abs_diff(&self, other: &AbcdMatrix) -> f64 {
        [self.a - other.a, self.b - other.b, self.c - other.c, self.d - other.d]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl Mul for AbcdMatrix {
    type Output = AbcdMatrix;

    fn mul(self, r: AbcdMatrix) -> AbcdMatrix {
        AbcdMatrix::new(
            self.a * r.a + self.b * r.c,
            self.a * r.b + self.b * r.d,
            self.c * r.a + self.d * r.c,
            self.c * r.b + self.d * r.d,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Propagation(f64),
    ThinLens(f64),
    FlatMirror,
}

pub fn elementary(element: Element) -> Result<AbcdMatrix> {
    match element {
        Element::Propagation(d) => {
            ensure_finite("propagation distance", d)?;
            if d < 0.0 {
                return Err(Error::InvalidElement(format!("negative propagation distance {d}")));
            }
            Ok(AbcdMatrix::new(1.0, d, 0.0, 1.0))
        }
        Element::ThinLens(f) => {
            ensure_finite("focal length", f)?;
            if f == 0.0 {
                return Err(Error::InvalidElement("thin lens with zero focal length".into()));
            }
            Ok(AbcdMatrix::new(1.0, 0.0, -1.0 / f, 1.0))
        }
        Element::FlatMirror => Ok(AbcdMatrix::identity()),
    }
}

/// Flat mirror, free space L1, lens f, free space L2, flat mirror.
///
/// Lengths share one unit. [`ResonatorGeometry::normalized`] uses f = 1,
/// the convention of the rest of the crate. Arm lengths are held as offsets
/// from the lens focal planes, d = L - f, which keeps every matrix element
/// accurate when one arm becomes huge and the other approaches f.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorGeometry {
    d1: f64,
    d2: f64,
    f: f64,
}

impl ResonatorGeometry {
    pub fn new(l1: f64, l2: f64, f: f64) -> Result<Self> {
        for (name, v) in [("L1", l1), ("L2", l2), ("f", f)] {
            ensure_finite(name, v)?;
        }
        Self::from_focal_offsets(l1 - f, l2 - f, f)
    }

    /// Geometry with L1 = f + d1 and L2 = f + d2.
    pub fn from_focal_offsets(d1: f64, d2: f64, f: f64) -> Result<Self> {
        for (name, v) in [("L1 - f", d1), ("L2 - f", d2), ("f", f)] {
            ensure_finite(name, v)?;
        }
        if f <= 0.0 {
            return Err(Error::InvalidGeometry(format!("focal length must be positive, got {f}")));
        }
        if d1 < -f || d2 < -f {
            return Err(Error::InvalidGeometry(format!("negative arm length: L1 = {}, L2 = {}", f + d1, f + d2)));
        }
        Ok(ResonatorGeometry { d1, d2, f })
    }

    pub fn normalized(l1_over_f: f64, l2_over_f: f64) -> Result<Self> {
        Self::new(l1_over_f, l2_over_f, 1.0)
    }

    pub fn l1(&self) -> f64 {
        self.f + self.d1
    }

    pub fn l2(&self) -> f64 {
        self.f + self.d2
    }

    /// (L1 - f, L2 - f).
    pub fn focal_offsets(&self) -> (f64, f64) {
        (self.d1, self.d2)
    }

    pub fn focal_length(&self) -> f64 {
        self.f
    }

    pub fn l1_over_f(&self) -> f64 {
        1.0 + self.d1 / self.f
    }

    pub fn l2_over_f(&self) -> f64 {
        1.0 + self.d2 / self.f
    }

    /// Same shape with lengths expressed in meters for a lens of `focal_length_m`.
    pub fn in_meters(&self, focal_length_m: f64) -> Result<Self> {
        let s = focal_length_m / self.f;
        Self::from_focal_offsets(self.d1 * s, self.d2 * s, focal_length_m)
    }

    /// Left mirror to right mirror, P(L2) Lens(f) P(L1), multiplied out.
    pub fn half_trip_matrix(&self) -> AbcdMatrix {
        let (d1, d2, f) = (self.d1, self.d2, self.f);
        AbcdMatrix::new(-d2 / f, f - d1 * d2 / f, -1.0 / f, -d1 / f)
    }

    /// Right mirror back to the left mirror.
    pub fn return_trip_matrix(&self) -> AbcdMatrix {
        self.half_trip_matrix().reversed()
    }

    pub fn round_trip_matrix(&self) -> AbcdMatrix {
        self.return_trip_matrix() * self.half_trip_matrix()
    }

    /// B = 2 (1 - L1/f)(L1 + L2 - L1 L2 / f).
    pub fn closed_form_b(&self) -> f64 {
        -2.0 * self.d1 / self.f * (self.f - self.d1 * self.d2 / self.f)
    }

    /// C = -(2/f)(1 - L2/f).
    pub fn closed_form_c(&self) -> f64 {
        2.0 * self.d2 / (self.f * self.f)
    }

    /// A = D = 2 (1 - L1/f)(1 - L2/f) - 1.
    pub fn closed_form_a(&self) -> f64 {
        2.0 * self.d1 * self.d2 / (self.f * self.f) - 1.0
    }

    /// Jacobian of (B, C) with respect to (L1, L2), row-major.
    pub fn bc_jacobian(&self) -> [[f64; 2]; 2] {
        let f = self.f;
        let db_dl1 = 2.0 * self.closed_form_a();
        let db_dl2 = 2.0 * (self.d1 / f).powi(2);
        [[db_dl1, db_dl2], [0.0, 2.0 / (f * f)]]
    }

    pub fn stability(&self) -> StabilityInfo {
        stability(&self.round_trip_matrix()).expect("round trip of a symmetric cavity is canonical")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityInfo {
    /// |a| <= 1.
    pub stable: bool,
    /// |a| == 1 up to rounding: stable but sin(theta) vanishes.
    pub marginal: bool,
    /// arccos(a) in [0, pi], present whenever `stable`.
    pub theta: Option<f64>,
    pub a: f64,
}

impl StabilityInfo {
    pub fn strictly_stable(&self) -> bool {
        self.stable && !self.marginal
    }
}

/// Width of the band |a| in [1 - MARGINAL_BAND, 1] reported as marginal.
const MARGINAL_BAND: f64 = 1e-12;

pub fn stability(m: &AbcdMatrix) -> Result<StabilityInfo> {
    if !m.is_canonical(CANONICAL_TOLERANCE) {
        return Err(Error::NonCanonical { a: m.a, d: m.d });
    }
    let a = m.a;
    let stable = a.abs() <= 1.0;
    Ok(StabilityInfo { stable, marginal: stable && a.abs() >= 1.0 - MARGINAL_BAND, theta: stable.then(|| a.acos()), a })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl AxisRange {
    /// A single cell may collapse to a point (lo == hi); wider grids need lo < hi.
    pub fn new(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        ensure_finite("range bound", lo)?;
        ensure_finite("range bound", hi)?;
        if cells == 0 {
            return Err(Error::InvalidParameter("grid resolution must be positive".into()));
        }
        if lo < 0.0 {
            return Err(Error::InvalidParameter(format!("lengths must be >= 0, got {lo}")));
        }
        if hi < lo || (hi == lo && cells > 1) {
            return Err(Error::InvalidParameter(format!("empty range [{lo}, {hi}] with {cells} cells")));
        }
        Ok(AxisRange { lo, hi, cells })
    }

    /// Cell centers.
    pub fn value(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * (self.hi - self.lo) / self.cells as f64
    }
}

/// Stability over a raster of (L1/f, L2/f).
#[derive(Debug, Clone)]
pub struct StabilityMap {
    pub l1: AxisRange,
    pub l2: AxisRange,
    /// Row-major over l2 (rows) then l1 (columns).
    pub cells: Vec<StabilityInfo>,
}

pub fn stability_map(l1: AxisRange, l2: AxisRange) -> StabilityMap {
    let cells = (0..l2.cells)
        .into_par_iter()
        .flat_map_iter(|j| {
            let y = l2.value(j);
            (0..l1.cells).map(move |i| {
                ResonatorGeometry::normalized(l1.value(i), y).expect("ranges validated non-negative").stability()
            })
        })
        .collect();
    StabilityMap { l1, l2, cells }
}

impl StabilityMap {
    pub fn at(&self, i: usize, j: usize) -> &StabilityInfo {
        &self.cells[j * self.l1.cells + i]
    }

    /// Connected regions of strictly stable cells under 4-neighbour adjacency.
    pub fn stable_components(&self) -> usize {
        let (nx, ny) = (self.l1.cells, self.l2.cells);
        let mut seen = vec![false; nx * ny];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..nx * ny {
            if seen[start] || !self.cells[start].strictly_stable() {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(idx) = stack.pop() {
                let (i, j) = (idx % nx, idx / nx);
                let mut visit = |ii: usize, jj: usize| {
                    let k = jj * nx + ii;
                    if !seen[k] && self.cells[k].strictly_stable() {
                        seen[k] = true;
                        stack.push(k);
                    }
                };
                if i > 0 {
                    visit(i - 1, j);
                }
                if i + 1 < nx {
                    visit(i + 1, j);
                }
                if j > 0 {
                    visit(i, j - 1);
                }
                if j + 1 < ny {
                    visit(i, j + 1);
                }
            }
        }
        count
    }

    /// Columns `l1_over_f,l2_over_f,stable,theta`; theta is `nan` where unstable.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows = (0..self.l2.cells).flat_map(|j| {
            (0..self.l1.cells).map(move |i| {
                let c = self.at(i, j);
                vec![self.l1.value(i), self.l2.value(j), if c.stable { 1.0 } else { 0.0 }, c.theta.unwrap_or(f64::NAN)]
            })
        });
        write_csv(out, &["l1_over_f", "l2_over_f", "stable", "theta"], rows)
    }
}
