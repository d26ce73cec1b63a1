//! The classical damped oscillator x'' + g'(n) x' + omega^2 x = 0 and its
//! fundamental solutions.
//!
//! `u1` and `u2` are fixed by u1(0) = 0, u1'(0) = 1 and u2(0) = 1,
//! u2'(0) = 0. Their Wronskian u1' u2 - u2' u1 equals exp(-g(n)).
//! The round-trip number n is treated as a continuous variable here.

use crate::error::{ensure_finite, Error, Result};
use crate::friction::FrictionProfile;
use crate::ode::{integrate_sampled, integrate_to, OdeTolerance, State};

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorParams {
    omega: f64,
    friction: FrictionProfile,
}

impl OscillatorParams {
    pub fn new(omega: f64, friction: FrictionProfile) -> Result<Self> {
        ensure_finite("omega", omega)?;
        if omega <= 0.0 {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        Ok(OscillatorParams { omega, friction })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn friction(&self) -> &FrictionProfile {
        &self.friction
    }

    /// Omega = sqrt(omega^2 - gamma^2 / 4) for underdamped constant friction.
    pub fn damped_frequency(&self) -> Option<f64> {
        let gamma = self.friction.constant_gamma()?;
        (gamma < 2.0 * self.omega).then(|| (self.omega.powi(2) - gamma.powi(2) / 4.0).sqrt())
    }
}

/// `u1, u1', u2, u2'` at one value of n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalValues {
    pub u1: f64,
    pub du1: f64,
    pub u2: f64,
    pub du2: f64,
}

impl FundamentalValues {
    pub fn wronskian(&self) -> f64 {
        self.du1 * self.u2 - self.du2 * self.u1
    }
}

#[derive(Debug, Clone)]
enum Repr {
    ClosedForm {
        gamma: f64,
        big_omega: f64,
    },
    /// States at integer n; other points are reached by integrating from
    /// the nearest checkpoint below.
    Numerical {
        checkpoints: Vec<State<4>>,
        tol: OdeTolerance,
    },
}

#[derive(Debug, Clone)]
pub struct ClassicalSolution {
    params: OscillatorParams,
    repr: Repr,
    n_max: f64,
}

impl ClassicalSolution {
    /// Closed form for constant friction below critical damping, otherwise
    /// a numerical integration over the whole tabulated domain.
    pub fn new(params: &OscillatorParams) -> Result<Self> {
        match params.friction {
            FrictionProfile::Constant { .. } => Self::closed_form(params),
            FrictionProfile::Tabulated(ref t) => Self::numerical(params, t.domain().1.floor(), OdeTolerance::default()),
        }
    }

    pub fn closed_form(params: &OscillatorParams) -> Result<Self> {
        let gamma = params
            .friction
            .constant_gamma()
            .ok_or_else(|| Error::InvalidParameter("closed form requires constant friction".into()))?;
        let big_omega =
            params.damped_frequency().ok_or(Error::UnsupportedRegime { gamma, two_omega: 2.0 * params.omega })?;
        Ok(ClassicalSolution {
            params: params.clone(),
            repr: Repr::ClosedForm { gamma, big_omega },
            n_max: f64::INFINITY,
        })
    }

    /// Integrates the equation of motion for both initial-condition sets over
    /// [0, n_max]. Works for any friction profile and any damping regime.
    pub fn numerical(params: &OscillatorParams, n_max: f64, tol: OdeTolerance) -> Result<Self> {
        ensure_finite("n_max", n_max)?;
        if n_max < 0.0 || n_max > params.friction.upper_bound() {
            return Err(Error::Domain {
                what: "n_max",
                value: n_max,
                domain: format!("[0, {}]", params.friction.upper_bound()),
            });
        }
        let n_end = n_max.ceil().min(params.friction.upper_bound().floor());
        let rhs = rhs_for(params);
        let samples = integrate_sampled(rhs, 0.0, State::<4>::new(0.0, 1.0, 1.0, 0.0), n_end, 1.0, tol)?;
        Ok(ClassicalSolution {
            params: params.clone(),
            repr: Repr::Numerical { checkpoints: samples.into_iter().map(|(_, y)| y).collect(), tol },
            n_max,
        })
    }

    pub fn params(&self) -> &OscillatorParams {
        &self.params
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.repr, Repr::ClosedForm { .. })
    }

    pub fn n_max(&self) -> f64 {
        self.n_max
    }

    pub fn eval(&self, n: f64) -> Result<FundamentalValues> {
        if !(n >= 0.0 && n <= self.n_max) {
            return Err(Error::Domain { what: "n", value: n, domain: format!("[0, {}]", self.n_max) });
        }
        match &self.repr {
            Repr::ClosedForm { gamma, big_omega } => Ok(closed_form_values(self.params.omega, *gamma, *big_omega, n)),
            Repr::Numerical { checkpoints, tol } => {
                let k = (n.floor() as usize).min(checkpoints.len() - 1);
                let y0 = checkpoints[k];
                let y = if n == k as f64 { y0 } else { integrate_to(rhs_for(&self.params), k as f64, y0, n, *tol)? };
                Ok(FundamentalValues { u1: y[0], du1: y[1], u2: y[2], du2: y[3] })
            }
        }
    }

    /// u1' u2 - u2' u1 evaluated from the solution itself.
    pub fn wronskian(&self, n: f64) -> Result<f64> {
        self.eval(n).map(|v| v.wronskian())
    }

    pub fn g(&self, n: f64) -> Result<f64> {
        self.params.friction.g(n)
    }
}

fn closed_form_values(omega: f64, gamma: f64, big_omega: f64, n: f64) -> FundamentalValues {
    let env = (-gamma * n / 2.0).exp();
    let (s, c) = (big_omega * n).sin_cos();
    let ratio = gamma / (2.0 * big_omega);
    FundamentalValues {
        u1: env * s / big_omega,
        du1: env * (c - ratio * s),
        u2: env * (c + ratio * s),
        du2: -env * omega * omega / big_omega * s,
    }
}

fn rhs_for(params: &OscillatorParams) -> impl Fn(f64, &State<4>, &mut State<4>) + '_ {
    let w2 = params.omega * params.omega;
    move |n, y, dy| {
        let (_, gdot) = params.friction.eval_clamped(n);
        dy[0] = y[1];
        dy[1] = -gdot * y[1] - w2 * y[0];
        dy[2] = y[3];
        dy[3] = -gdot * y[3] - w2 * y[2];
    }
}
