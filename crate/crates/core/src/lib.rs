//! Simulation of the damped (Caldirola-Kanai) quantum oscillator as
//! transverse light dynamics in an optical resonator whose mirrors move
//! slowly from one round trip to the next.
//!
//! Lengths are measured in units of the lens focal length unless stated
//! otherwise, and the round-trip number `n` plays the role of time.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod export;
pub mod friction;
pub mod kanai;
pub mod ode;
pub mod oscillator;
pub mod paraxial;
pub mod raysim;
pub mod schedule;
pub mod wavesim;

pub use error::{Error, Result};
pub use friction::{FrictionProfile, FrictionTable};
pub use kanai::{
    crosscheck_engines, free_gaussian, kanai_propagate, map_parameters, moments, CrosscheckReport, GaussianWavepacket,
    QuantumParams, SampleGrid,
};
pub use ode::OdeTolerance;
pub use oscillator::{ClassicalSolution, FundamentalValues, OscillatorParams};
pub use paraxial::{
    elementary, stability, stability_map, AbcdMatrix, AxisRange, Element, ResonatorGeometry, StabilityInfo,
    StabilityMap,
};
pub use raysim::{characteristic_roots, iterate_ray, iterate_ray_difference, lissajous, RayState, RayTrace};
pub use schedule::{integrate_schedule_ode, MirrorSchedule, PathSample};
pub use wavesim::{
    fresnel_round_trip, gaussian_q_trace, run_collapse, split_step_round_trip, CollapseEngine, CollapseTrace,
    ComplexField, FresnelOptions, GaussianBeam, GridSpec, PlaneTag, SplittingOrder, Tracking,
};
