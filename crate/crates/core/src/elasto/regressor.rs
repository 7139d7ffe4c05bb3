use nalgebra::{DMatrix, DVector, Matrix6};
use rayon::prelude::*;

use super::layout::{Column, ParameterLayout};
use super::records::DeflectionRecord;
use super::separate::{separate_compensator, CompensatorSeparation};
use crate::compensator::CompensatorGeometry;
use crate::error::{Error, Result};
use crate::linalg::ScaledNormal;
use crate::model::{Joints, ManipulatorModel, Wrench, DOF};
use crate::stiffness::{marker_observations, point_observation, COMPENSATED_JOINT};

/// Reciprocal condition (after column scaling) below which the information
/// matrix counts as singular.
const RCOND_UNIDENTIFIABLE: f64 = 1e-12;

/// Tool observation matrix: column `j` is `J_j J_jᵀ F`.
pub fn observation_matrix(model: &ManipulatorModel, q: &Joints, wrench: &Wrench) -> Matrix6<f64> {
    let frames = model.frames(q, &Joints::zeros());
    point_observation(&frames, &frames.tool.translation.vector, wrench)
}

/// Stacked identification equations `Δp = B k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub b: DMatrix<f64>,
    pub dp: DVector<f64>,
}

impl Regressor {
    pub fn equations(&self) -> usize {
        self.b.nrows()
    }
}

/// Position rows of every marker's observation matrix at `(q, F)`, routed
/// into the layout columns. `index` (1-based) names the entry in errors.
pub fn design_block(
    model: &ManipulatorModel,
    layout: &ParameterLayout,
    index: usize,
    q: &Joints,
    wrench: &Wrench,
) -> Result<DMatrix<f64>> {
    let mut targets = [None; DOF];
    for (j, slot) in targets.iter_mut().enumerate() {
        if !layout.included(j) {
            continue;
        }
        *slot = if j == COMPENSATED_JOINT {
            let q2 = q[COMPENSATED_JOINT];
            let bucket = layout.bucket_of(q2).ok_or_else(|| Error::Record {
                index,
                message: format!("q2 = {:.4} deg matches no bucket", q2.to_degrees()),
            })?;
            layout.bucket_column(bucket)
        } else {
            layout.joint_column(j)
        };
    }
    let obs = marker_observations(model, q, wrench);
    let mut block = DMatrix::zeros(3 * obs.len(), layout.len());
    for (m, a) in obs.iter().enumerate() {
        for (j, target) in targets.iter().enumerate() {
            if let Some(c) = target {
                for r in 0..3 {
                    block[(3 * m + r, *c)] = a[(r, j)];
                }
            }
        }
    }
    Ok(block)
}

fn record_block(
    model: &ManipulatorModel,
    layout: &ParameterLayout,
    index: usize,
    record: &DeflectionRecord,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    record.validate(index)?;
    if record.deflections.len() != model.markers.len() {
        return Err(Error::Record {
            index,
            message: format!(
                "{} marker deflections but the model declares {} markers",
                record.deflections.len(),
                model.markers.len()
            ),
        });
    }
    let block = design_block(model, layout, index, &record.q, &record.wrench)?;
    let dp = record.deflections.iter().flat_map(|d| d.iter().copied()).collect();
    Ok((block, dp))
}

/// Stacks the position rows of every marker of every record. Record indices
/// in errors are 1-based.
pub fn build_regressor(
    records: &[DeflectionRecord],
    layout: &ParameterLayout,
    model: &ManipulatorModel,
) -> Result<Regressor> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no deflection records".into()));
    }
    let blocks = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| record_block(model, layout, i + 1, r))
        .collect::<Result<Vec<_>>>()?;
    let rows: usize = blocks.iter().map(|(b, _)| b.nrows()).sum();
    let mut b = DMatrix::zeros(rows, layout.len());
    let mut dp = DVector::zeros(rows);
    let mut at = 0;
    for (block, d) in blocks {
        let n = block.nrows();
        b.rows_mut(at, n).copy_from(&block);
        dp.rows_mut(at, n).copy_from_slice(&d);
        at += n;
    }
    Ok(Regressor { b, dp })
}

/// Least-squares compliances with their covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceFit {
    pub layout: ParameterLayout,
    /// Compliances in layout column order, rad/(N·mm).
    pub k: DVector<f64>,
    /// `(BᵀB)⁻¹`.
    pub information_inverse: DMatrix<f64>,
    /// `σ̂² (BᵀB)⁻¹`.
    pub covariance: DMatrix<f64>,
    /// Residual variance per scalar equation, mm².
    pub sigma2: f64,
    /// Residual rms, mm.
    pub rms: f64,
    pub equations: usize,
    pub warnings: Vec<String>,
}

impl ComplianceFit {
    /// ±3σ from the covariance.
    pub fn half_widths(&self) -> DVector<f64> {
        self.covariance.diagonal().map(|v| 3.0 * v.max(0.0).sqrt())
    }

    /// Estimate of joint `j` (0-based) if it has a shared column.
    pub fn joint(&self, joint: usize) -> Option<f64> {
        self.layout.joint_column(joint).map(|c| self.k[c])
    }

    /// Joint-2 compliance per bucket.
    pub fn bucket_compliances(&self) -> Vec<f64> {
        (0..self.layout.buckets().len())
            .map(|b| self.k[self.layout.bucket_column(b).unwrap()])
            .collect()
    }
}

pub(crate) fn solve_normal(regressor: &Regressor, layout: &ParameterLayout) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let bt = regressor.b.transpose();
    let normal = &bt * &regressor.b;
    let scaled = ScaledNormal::new(&normal);
    if scaled.rcond() < RCOND_UNIDENTIFIABLE {
        let null = scaled.null_directions(RCOND_UNIDENTIFIABLE.max(scaled.rcond() * 10.0));
        let names: Vec<String> = null
            .iter()
            .map(|v| {
                v.iter()
                    .enumerate()
                    .filter(|(_, x)| x.abs() > 1e-3)
                    .map(|(i, x)| format!("{x:+.3}·{}", layout.label(i)))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        return Err(Error::RankDeficient {
            context: format!("information matrix is singular; unidentifiable combinations: [{}]", names.join("; ")),
            null_directions: null,
        });
    }
    let inverse = scaled.inverse();
    let k = &inverse * (&bt * &regressor.dp);
    Ok((k, inverse))
}

pub fn identify_compliances(
    records: &[DeflectionRecord],
    layout: &ParameterLayout,
    model: &ManipulatorModel,
) -> Result<ComplianceFit> {
    let regressor = build_regressor(records, layout, model)?;
    fit_regressor(&regressor, layout)
}

pub(crate) fn fit_regressor(regressor: &Regressor, layout: &ParameterLayout) -> Result<ComplianceFit> {
    let (k, information_inverse) = solve_normal(regressor, layout)?;
    let residual = &regressor.b * &k - &regressor.dp;
    let n = regressor.equations();
    let p = layout.len();
    let rss = residual.norm_squared();
    let sigma2 = if n > p { rss / (n - p) as f64 } else { 0.0 };
    let warnings = k
        .iter()
        .enumerate()
        .filter(|(_, v)| **v <= 0.0)
        .map(|(i, v)| format!("non-physical compliance {} = {v:.4e} (expected > 0)", layout.label(i)))
        .collect();
    Ok(ComplianceFit {
        layout: layout.clone(),
        covariance: &information_inverse * sigma2,
        information_inverse,
        k,
        sigma2,
        rms: (rss / n as f64).sqrt(),
        equations: n,
        warnings,
    })
}

/// Compliances plus, when the geometry is known and there are at least
/// three buckets, the separated compensator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ElastostaticEstimate {
    pub fit: ComplianceFit,
    pub separation: Option<CompensatorSeparation>,
    pub warnings: Vec<String>,
}

impl ElastostaticEstimate {
    /// Bare joint compliance `k_j` (0-based `joint`); for joint 2 this is
    /// `1/K0` from the separation.
    pub fn joint_compliance(&self, joint: usize) -> Option<f64> {
        if joint == COMPENSATED_JOINT {
            self.separation.as_ref().map(|s| 1.0 / s.k0)
        } else {
            self.fit.joint(joint)
        }
    }
}

pub fn identify_elastostatics(
    records: &[DeflectionRecord],
    layout: &ParameterLayout,
    model: &ManipulatorModel,
    geometry: Option<&CompensatorGeometry>,
) -> Result<ElastostaticEstimate> {
    let fit = identify_compliances(records, layout, model)?;
    estimate_from_fit(fit, geometry)
}

pub(crate) fn estimate_from_fit(fit: ComplianceFit, geometry: Option<&CompensatorGeometry>) -> Result<ElastostaticEstimate> {
    let mut warnings = fit.warnings.clone();
    let buckets = fit.layout.buckets().len();
    let separation = match geometry {
        Some(geom) if buckets >= 3 => {
            let stiffness: Vec<f64> = fit.bucket_compliances().iter().map(|k| 1.0 / k).collect();
            let sep = separate_compensator(&stiffness, geom, fit.layout.buckets())?;
            warnings.extend(sep.warnings.iter().cloned());
            Some(sep)
        }
        Some(_) if fit.layout.columns().iter().any(|c| matches!(c, Column::Bucket(_))) => {
            warnings.push(format!(
                "compensator parameters not identifiable: {buckets} distinct q2 value(s), at least 3 required"
            ));
            None
        }
        _ => None,
    };
    Ok(ElastostaticEstimate {
        fit,
        separation,
        warnings,
    })
}
