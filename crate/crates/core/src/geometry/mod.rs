//! Compensator geometry identification from laser-tracker marker tracks.
//!
//! The crank marker `P1` circles `P2` with known joint angles, so its track is
//! fitted by an angle-annotated (Procrustes) circle fit. The satellite markers
//! on the spring housing circle `P0` with unknown angles; their tracks are
//! fitted jointly as concentric arcs. `a = p2 − p0` then gives `(a_x, a_y)`.

mod concentric;
mod dataset;
mod identify;
mod procrustes;

pub use concentric::{fit_concentric_arcs, ArcMode, ConcentricFit};
pub use dataset::{read_marker_csv, write_marker_csv, MarkerDataset, MIN_ANGLE_SPAN_DEG, MIN_POSES};
pub use identify::{
    confidence_intervals_geometry, identify_compensator_geometry, identify_point_estimate,
    CompensatorGeometryEstimate,
};
pub use procrustes::{fit_circle_algebraic, fit_circle_procrustes, AlgebraicCircle, CircleFit};
