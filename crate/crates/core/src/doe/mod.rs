//! Calibration experiment design.
//!
//! A plan is a list of `(q, F)` measurement entries, each tied to a `q2`
//! bucket. Its quality is the expected squared tool positioning error at a
//! test pose after compensation with the identified compliances,
//!
//! ```text
//! ρ0² = σ² · Σ_j trace(A0 (Σ_{i∈j} A_iᵀ A_i)⁻¹ A0ᵀ)
//! ```
//!
//! where bucket `j` owns the parameter vector `(k1, k2_j, k3..k6)`
//! (restricted to the layout's joints) and `A` are position rows of the
//! observation matrices.

mod accuracy;
mod optimize;
mod plan;

pub use accuracy::{
    bucket_information, parameter_covariance, parameter_covariance_sandwich, plan_design, test_pose_accuracy,
    TestPoseAccuracy,
};
pub use optimize::{optimize_plan, random_plan, OptimizedPlan, SearchOptions};
pub use plan::{
    check_plan, read_plan_csv, write_plan_csv, CalibrationPlan, LoadMode, NoiseModel, PlanConstraints, PlanEntry,
    TestPose,
};
