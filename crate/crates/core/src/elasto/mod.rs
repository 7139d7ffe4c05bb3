//! Elastostatic identification from loaded-deflection experiments.
//!
//! Each record gives marker deflections `Δp = B(q, F)·k` that are linear in
//! the compliances. Joint 2 gets one compliance per distinct `q2` (bucket),
//! since the compensator makes it configuration dependent; the bucket
//! stiffnesses are then split into the bare joint stiffness and the spring
//! parameters `(K_c, s0)`.

mod intervals;
mod layout;
mod records;
mod regressor;
mod separate;

pub use intervals::{confidence_intervals_elasto, ElastoIntervals};
pub use layout::{Column, ParameterLayout, DEFAULT_BUCKET_TOLERANCE_DEG};
pub use records::{read_records_csv, write_records_csv, DeflectionRecord};
pub use regressor::{
    build_regressor, design_block, identify_compliances, identify_elastostatics, observation_matrix, ComplianceFit,
    ElastostaticEstimate, Regressor,
};
pub use separate::{separate_compensator, separation_row, CompensatorSeparation};
