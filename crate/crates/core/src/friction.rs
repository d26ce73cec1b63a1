//! Friction profiles g(n) over the round-trip number.
//!
//! The profile enters the dynamics only through g and its derivative.
//! Every profile satisfies g(0) = 0 so that the initial cavity matrix is
//! the unmodified one, and g is nondecreasing.

use std::io::Read;
use std::path::Path;

use crate::error::{ensure_finite, Error, Result};

/// Slack accepted on g(0) = 0 for tabulated data.
const G0_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum FrictionProfile {
    /// g(n) = gamma * n.
    Constant { gamma: f64 },
    /// Monotone cubic interpolation of sampled g values.
    Tabulated(FrictionTable),
}

impl FrictionProfile {
    pub fn constant(gamma: f64) -> Result<Self> {
        ensure_finite("gamma", gamma)?;
        if gamma < 0.0 {
            return Err(Error::InvalidParameter(format!("friction must be nondecreasing, got gamma = {gamma}")));
        }
        Ok(FrictionProfile::Constant { gamma })
    }

    pub fn tabulated(n: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        FrictionTable::new(n, g).map(FrictionProfile::Tabulated)
    }

    /// Returns `(g(n), dg/dn)`.
    pub fn eval(&self, n: f64) -> Result<(f64, f64)> {
        if !(n >= 0.0) || !n.is_finite() {
            return Err(Error::Domain { what: "n", value: n, domain: "[0, inf)".into() });
        }
        match self {
            FrictionProfile::Constant { gamma } => Ok((gamma * n, *gamma)),
            FrictionProfile::Tabulated(table) => table.eval(n),
        }
    }

    pub fn g(&self, n: f64) -> Result<f64> {
        self.eval(n).map(|(g, _)| g)
    }

    pub fn constant_gamma(&self) -> Option<f64> {
        match self {
            FrictionProfile::Constant { gamma } => Some(*gamma),
            FrictionProfile::Tabulated(_) => None,
        }
    }

    /// Largest round-trip number at which the profile is defined.
    pub fn upper_bound(&self) -> f64 {
        match self {
            FrictionProfile::Constant { .. } => f64::INFINITY,
            FrictionProfile::Tabulated(t) => t.domain().1,
        }
    }

    /// Evaluation that clamps into the tabulated domain. Used inside ODE
    /// right-hand sides, which may probe a hair past the last knot.
    pub(crate) fn eval_clamped(&self, n: f64) -> (f64, f64) {
        match self {
            FrictionProfile::Constant { gamma } => (gamma * n.max(0.0), *gamma),
            FrictionProfile::Tabulated(t) => {
                let (lo, hi) = t.domain();
                t.eval(n.clamp(lo, hi)).expect("clamped into domain")
            }
        }
    }
}

/// Piecewise-cubic Hermite interpolant with Fritsch-Carlson slopes, so
/// monotone data yield a monotone g and a continuous derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionTable {
    n: Vec<f64>,
    g: Vec<f64>,
    slopes: Vec<f64>,
}

impl FrictionTable {
    pub fn new(n: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if n.len() != g.len() {
            return Err(Error::InvalidTable(format!("{} abscissae but {} values", n.len(), g.len())));
        }
        if n.len() < 2 {
            return Err(Error::InvalidTable("need at least two rows".into()));
        }
        if n.iter().chain(&g).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTable("non-finite entry".into()));
        }
        if n[0] != 0.0 {
            return Err(Error::InvalidTable(format!("first n must be 0, got {}", n[0])));
        }
        if g[0].abs() > G0_TOLERANCE {
            return Err(Error::InvalidTable(format!("g(0) must be 0, got {}", g[0])));
        }
        if n.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTable("n must be strictly increasing".into()));
        }
        if g.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidTable("g must be nondecreasing".into()));
        }
        let slopes = pchip_slopes(&n, &g);
        Ok(FrictionTable { n, g, slopes })
    }

    /// Reads a two-column CSV with header `n,g`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "n" || &headers[1] != "g" {
            return Err(Error::InvalidTable(format!(
                "expected header \"n,g\", got {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut n = Vec::new();
        let mut g = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                record[i]
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidTable(format!("row {}: {:?}: {e}", line + 1, &record[i])))
            };
            n.push(parse(0)?);
            g.push(parse(1)?);
        }
        Self::new(n, g)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv(file)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.n[0], *self.n.last().unwrap())
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.n, &self.g)
    }

    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::Domain { what: "n", value: x, domain: format!("[{lo}, {hi}] (tabulated friction)") });
        }
        // interval k with n[k] <= x <= n[k+1]
        let k = self.n.partition_point(|&v| v <= x).saturating_sub(1).min(self.n.len() - 2);
        let h = self.n[k + 1] - self.n[k];
        let t = (x - self.n[k]) / h;
        let (y0, y1) = (self.g[k], self.g[k + 1]);
        let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1;
        let deriv = (6.0 * t2 - 6.0 * t) / h * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) / h * y1
            + (3.0 * t2 - 2.0 * t) * d1;
        Ok((value, deriv))
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let m = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..m - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if m == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; m];
    for k in 1..m - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d[0] = pchip_end_slope(h[0], h[1], delta[0], delta[1]);
    d[m - 1] = pchip_end_slope(h[m - 2], h[m - 3], delta[m - 2], delta[m - 3]);
    d
}

fn pchip_end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() || del0 == 0.0 {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}
