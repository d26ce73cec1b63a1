//! Thin adapter over the `ode_solvers` DOP853 integrator.

use ode_solvers::{Dop853, OutputType, SVector, System};

use crate::error::{Error, Result};

/// Relative/absolute tolerance pair handed to the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeTolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        OdeTolerance { rtol: 1e-10, atol: 1e-12 }
    }
}

impl OdeTolerance {
    pub fn new(rtol: f64, atol: f64) -> Result<Self> {
        if !(rtol > 0.0 && atol > 0.0) || !rtol.is_finite() || !atol.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ODE tolerances must be positive, got rtol = {rtol}, atol = {atol}"
            )));
        }
        Ok(OdeTolerance { rtol, atol })
    }
}

pub(crate) type State<const D: usize> = SVector<f64, D>;

struct FnSystem<F>(F);

impl<F, const D: usize> System<f64, State<D>> for FnSystem<F>
where
    F: Fn(f64, &State<D>, &mut State<D>),
{
    fn system(&self, x: f64, y: &State<D>, dy: &mut State<D>) {
        (self.0)(x, y, dy)
    }
}

/// Integrates one span with sparse output and returns the end state and
/// the last accepted step size (reused as the next initial guess).
fn integrate_span<F, const D: usize>(
    rhs: &F,
    x0: f64,
    y0: State<D>,
    x_end: f64,
    h0: f64,
    tol: OdeTolerance,
) -> Result<(State<D>, f64)>
where
    F: Fn(f64, &State<D>, &mut State<D>),
{
    let span = x_end - x0;
    let mut solver = Dop853::from_param(
        FnSystem(rhs),
        x0,
        x_end,
        span,
        y0,
        tol.rtol,
        tol.atol,
        0.9,
        0.0,
        0.333,
        6.0,
        span.abs(),
        h0.min(span.abs()),
        100_000,
        1000,
        OutputType::Sparse,
    );
    solver.integrate().map_err(|e| Error::Integration(e.to_string()))?;
    let xs = solver.x_out();
    let last = xs.len() - 1;
    if (xs[last] - x_end).abs() > 1e-9 * span.abs().max(1.0) {
        return Err(Error::Integration(format!("integration stopped at {} instead of {x_end}", xs[last])));
    }
    let h = (xs[last] - xs[last.saturating_sub(1)]).abs();
    Ok((solver.y_out()[last], h))
}

/// Integrates from `x0` to `x_end`, returning the state at `x0 + k * stride`
/// for every k up to and including `x_end` (which must be a multiple of the
/// stride away from `x0`, up to rounding).
pub(crate) fn integrate_sampled<F, const D: usize>(
    rhs: F,
    x0: f64,
    y0: State<D>,
    x_end: f64,
    stride: f64,
    tol: OdeTolerance,
) -> Result<Vec<(f64, State<D>)>>
where
    F: Fn(f64, &State<D>, &mut State<D>),
{
    let total = ((x_end - x0) / stride).round() as usize;
    let mut out = Vec::with_capacity(total + 1);
    out.push((x0, y0));
    let mut y = y0;
    let mut h = 0.0;
    for k in 1..=total {
        let xa = x0 + (k - 1) as f64 * stride;
        let xb = x0 + k as f64 * stride;
        let (yb, h_last) = integrate_span(&rhs, xa, y, xb, h, tol)?;
        y = yb;
        h = h_last;
        out.push((xb, y));
    }
    Ok(out)
}

/// Integrates a single span and returns the end state.
pub(crate) fn integrate_to<F, const D: usize>(
    rhs: F,
    x0: f64,
    y0: State<D>,
    x_end: f64,
    tol: OdeTolerance,
) -> Result<State<D>>
where
    F: Fn(f64, &State<D>, &mut State<D>),
{
    if x_end == x0 {
        return Ok(y0);
    }
    integrate_span(&rhs, x0, y0, x_end, 0.0, tol).map(|(y, _)| y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_sampled() {
        let tol = OdeTolerance::new(1e-12, 1e-14).unwrap();
        let out = integrate_sampled(
            |_, y: &State<1>, dy: &mut State<1>| dy[0] = -y[0],
            0.0,
            State::<1>::new(1.0),
            200.0,
            1.0,
            tol,
        )
        .unwrap();
        assert_eq!(out.len(), 201);
        for (x, y) in &out {
            assert!((y[0] - (-x).exp()).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn integrate_to_fractional_end() {
        let y = integrate_to(
            |_, y: &State<2>, dy: &mut State<2>| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            State::<2>::new(0.0, 1.0),
            0.75,
            OdeTolerance::default(),
        )
        .unwrap();
        assert!((y[0] - 0.75f64.sin()).abs() < 1e-10);
    }
}
