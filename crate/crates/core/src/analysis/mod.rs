//! Post-processing of solved fields.

mod beltrami;
mod critical;
mod lewy;
mod mapping;
mod pullback;
mod unimodal;

pub use beltrami::{
    beltrami_residual, complex_derivatives, hole_fluxes, quasiconformal_defect, stream_function,
    ComplexDerivativeField, QuasiconformalDefect, StreamFunction, HOLE_FLUX_TOLERANCE,
    NEAR_DEGENERATE,
};
pub use critical::{critical_point_candidates, CriticalCandidate};
pub use lewy::{
    default_probe_points, half_circle_directions, lewy_verify, lewy_verify_directions, LewyOptions,
    LewyReport, ProbeReport, DEFAULT_DIRECTIONS, DEFAULT_PROBE_COUNT, DEFAULT_PROBE_FRACTION,
};
pub use mapping::{
    injectivity_check, jacobian_field, InjectivityVerdict, Violation, MAX_LISTED_VIOLATIONS,
};
pub use pullback::{pullback_subdomain, ContourPoint, Pullback};
pub use unimodal::{unimodality_check, CyclicRange, UnimodalityVerdict, DEFAULT_TIE_TOLERANCE};
