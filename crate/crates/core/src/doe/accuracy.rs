use nalgebra::{DMatrix, Matrix3x6};

use super::plan::{CalibrationPlan, NoiseModel, PlanEntry, TestPose};
use crate::elasto::{design_block, ParameterLayout};
use crate::error::{Error, Result};
use crate::linalg::ScaledNormal;
use crate::model::ManipulatorModel;
use crate::stiffness::COMPENSATED_JOINT;

const RCOND_UNIDENTIFIABLE: f64 = 1e-12;

/// Stacked design matrix `B` of the plan in the layout's columns.
pub fn plan_design(plan: &CalibrationPlan, model: &ManipulatorModel, layout: &ParameterLayout) -> Result<DMatrix<f64>> {
    let blocks = plan
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| design_block(model, layout, i + 1, &e.q, &e.wrench))
        .collect::<Result<Vec<_>>>()?;
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut b = DMatrix::zeros(rows, layout.len());
    let mut at = 0;
    for block in blocks {
        b.rows_mut(at, block.nrows()).copy_from(&block);
        at += block.nrows();
    }
    Ok(b)
}

fn inverse_or_null(info: &DMatrix<f64>, context: impl FnOnce() -> String) -> Result<DMatrix<f64>> {
    let scaled = ScaledNormal::new(info);
    if scaled.rcond() < RCOND_UNIDENTIFIABLE {
        return Err(Error::RankDeficient {
            context: context(),
            null_directions: scaled.null_directions(RCOND_UNIDENTIFIABLE.max(scaled.rcond() * 10.0)),
        });
    }
    Ok(scaled.inverse())
}

/// `σ² (BᵀB)⁻¹` for i.i.d. noise.
pub fn parameter_covariance(
    plan: &CalibrationPlan,
    model: &ManipulatorModel,
    layout: &ParameterLayout,
    noise: &NoiseModel,
) -> Result<DMatrix<f64>> {
    let b = plan_design(plan, model, layout)?;
    let info = b.transpose() * &b;
    Ok(inverse_or_null(&info, || "plan information matrix is singular (unidentifiable plan)".into())? * noise.variance())
}

/// `(BᵀB)⁻¹ Bᵀ Σ B (BᵀB)⁻¹` for a general noise covariance `Σ` over the
/// stacked equations.
pub fn parameter_covariance_sandwich(
    plan: &CalibrationPlan,
    model: &ManipulatorModel,
    layout: &ParameterLayout,
    noise_covariance: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let b = plan_design(plan, model, layout)?;
    if noise_covariance.nrows() != b.nrows() || noise_covariance.ncols() != b.nrows() {
        return Err(Error::invalid(
            "noise_covariance",
            format!("expected {0}×{0} for {0} equations", b.nrows()),
        ));
    }
    let info = b.transpose() * &b;
    let inv = inverse_or_null(&info, || "plan information matrix is singular (unidentifiable plan)".into())?;
    let gain = &inv * b.transpose();
    Ok(&gain * noise_covariance * gain.transpose())
}

/// Layout for one bucket: the shared joints plus that bucket's joint-2 column.
fn bucket_layout(layout: &ParameterLayout, bucket: usize) -> Result<ParameterLayout> {
    let included: Vec<usize> = (0..6).filter(|j| layout.included(*j)).map(|j| j + 1).collect();
    let buckets = if layout.included(COMPENSATED_JOINT) {
        vec![layout.buckets()[bucket]]
    } else {
        Vec::new()
    };
    ParameterLayout::new(&included, buckets, layout.tolerance())
}

/// Per-bucket information matrices `Σ_{i∈j} A_iᵀ A_i` and the test-pose rows
/// `A0` restricted to the same columns.
pub fn bucket_information(
    plan: &CalibrationPlan,
    model: &ManipulatorModel,
    layout: &ParameterLayout,
    test: &TestPose,
) -> Result<(Vec<DMatrix<f64>>, DMatrix<f64>)> {
    let n_buckets = layout.buckets().len().max(1);
    let locals = (0..n_buckets)
        .map(|b| bucket_layout(layout, b.min(layout.buckets().len().saturating_sub(1))))
        .collect::<Result<Vec<_>>>()?;
    let p = locals[0].len();
    let mut infos = vec![DMatrix::zeros(p, p); n_buckets];
    for (i, e) in plan.entries.iter().enumerate() {
        let b = entry_bucket(layout, e, i)?;
        let block = design_block(model, &locals[b], i + 1, &e.q, &e.wrench)?;
        infos[b] += block.transpose() * &block;
    }
    Ok((infos, restrict_a0(&test.a0, layout)))
}

pub(crate) fn entry_bucket(layout: &ParameterLayout, e: &PlanEntry, index: usize) -> Result<usize> {
    if layout.buckets().is_empty() {
        return Ok(0);
    }
    match layout.bucket_of(e.q[COMPENSATED_JOINT]) {
        Some(b) => Ok(b),
        None => Err(Error::Record {
            index: index + 1,
            message: format!(
                "q2 = {:.4} deg matches no bucket",
                e.q[COMPENSATED_JOINT].to_degrees()
            ),
        }),
    }
}

pub(crate) fn restrict_a0(a0: &Matrix3x6<f64>, layout: &ParameterLayout) -> DMatrix<f64> {
    let cols: Vec<usize> = (0..6).filter(|j| layout.included(*j)).collect();
    DMatrix::from_fn(3, cols.len(), |r, c| a0[(r, cols[c])])
}

/// Test-pose accuracy of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPoseAccuracy {
    /// `ρ0²`, mm².
    pub rho2: f64,
    /// `√ρ0²`, mm.
    pub rms: f64,
    /// `ρ0²/σ²`.
    pub score: f64,
    /// Contribution of each bucket, mm².
    pub per_bucket: Vec<f64>,
    /// At least three distinct `q2` buckets, so `(K0, K_c, s0)` can be separated.
    pub compensator_identifiable: bool,
}

pub(crate) fn bucket_term(info: &DMatrix<f64>, a0: &DMatrix<f64>, bucket: usize) -> Result<f64> {
    let inv = inverse_or_null(info, || format!("information matrix of bucket {bucket} is singular"))?;
    Ok((a0 * inv * a0.transpose()).trace())
}

pub fn test_pose_accuracy(
    plan: &CalibrationPlan,
    model: &ManipulatorModel,
    layout: &ParameterLayout,
    test: &TestPose,
    noise: &NoiseModel,
) -> Result<TestPoseAccuracy> {
    let (infos, a0) = bucket_information(plan, model, layout, test)?;
    let per_bucket = infos
        .iter()
        .enumerate()
        .map(|(b, info)| bucket_term(info, &a0, b).map(|t| t * noise.variance()))
        .collect::<Result<Vec<_>>>()?;
    let rho2: f64 = per_bucket.iter().sum();
    Ok(TestPoseAccuracy {
        rho2,
        rms: rho2.sqrt(),
        score: rho2 / noise.variance(),
        per_bucket,
        compensator_identifiable: layout.included(COMPENSATED_JOINT) && layout.buckets().len() >= 3,
    })
}
