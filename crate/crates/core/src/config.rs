//! Model file parsing.
//!
//! The model file is TOML. Unknown keys are rejected. Angles in this file are
//! radians except `compensator.q2_offset_deg`.
//!
//! ```toml
//! gravity = [0.0, 0.0, -9.81]        # m/s², base frame
//! markers = [[0.0, 150.0, 0.0]]      # mm, tool frame
//!
//! [base]
//! translation_mm = [0.0, 0.0, 0.0]
//! rotation_rpy_rad = [0.0, 0.0, 0.0]
//!
//! [tool]
//! translation_mm = [250.0, 0.0, 0.0]
//!
//! [[joints]]                          # exactly six
//! axis = [0.0, 0.0, 1.0]
//! link_translation_mm = [350.0, 0.0, 675.0]
//! link_rotation_rpy_rad = [0.0, 0.0, 0.0]
//! compliance_rad_per_Nmm = 2.5e-10
//! mass_kg = 400.0
//! com_mm = [100.0, 0.0, 300.0]
//!
//! [compensator]                       # optional
//! L_mm = 184.72
//! ax_mm = 685.93
//! ay_mm = 120.30
//! Kc_N_per_mm = 53800.0
//! s0_mm = 458.0
//! q2_sign = -1.0                      # optional, default 1
//! q2_offset_deg = 99.96               # optional, default 0
//! ```

use nalgebra::Vector3;
use serde::Deserialize;

use crate::compensator::{CompensatorElastics, CompensatorGeometry, CompensatorParams};
use crate::error::{Error, Result};
use crate::model::{pose_from_xyz_rpy, JointSpec, ManipulatorModel, Pose};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(default = "default_gravity")]
    gravity: [f64; 3],
    #[serde(default)]
    markers: Vec<[f64; 3]>,
    #[serde(default)]
    base: TransformBlock,
    #[serde(default)]
    tool: TransformBlock,
    joints: Vec<JointBlock>,
    compensator: Option<CompensatorBlock>,
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformBlock {
    #[serde(default)]
    translation_mm: [f64; 3],
    #[serde(default)]
    rotation_rpy_rad: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct JointBlock {
    axis: [f64; 3],
    link_translation_mm: [f64; 3],
    #[serde(default)]
    link_rotation_rpy_rad: [f64; 3],
    compliance_rad_per_Nmm: f64,
    #[serde(default)]
    mass_kg: f64,
    #[serde(default)]
    com_mm: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct CompensatorBlock {
    L_mm: f64,
    ax_mm: f64,
    ay_mm: f64,
    Kc_N_per_mm: f64,
    s0_mm: f64,
    #[serde(default = "one")]
    q2_sign: f64,
    #[serde(default)]
    q2_offset_deg: f64,
}

fn one() -> f64 {
    1.0
}

/// Parsed model file: the manipulator plus its compensator, if declared.
#[derive(Debug, Clone)]
pub struct RobotConfig {
    pub model: ManipulatorModel,
    pub compensator: Option<CompensatorParams>,
}

/// Parses and validates a model file.
pub fn load_config(text: &str) -> Result<RobotConfig> {
    let file: ModelFile = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    if file.joints.len() != 6 {
        return Err(Error::invalid(
            "joints",
            format!("exactly 6 joints required (got {})", file.joints.len()),
        ));
    }
    let joints = file
        .joints
        .iter()
        .enumerate()
        .map(|(i, j)| {
            JointSpec::new(
                Vector3::from(j.axis),
                pose_from_xyz_rpy(j.link_translation_mm, j.link_rotation_rpy_rad),
                j.compliance_rad_per_Nmm,
                j.mass_kg,
                Vector3::from(j.com_mm),
            )
            .map_err(|e| prefix_field(e, &format!("joints[{i}].")))
        })
        .collect::<Result<Vec<_>>>()?;
    let model = ManipulatorModel::new(
        joints,
        transform(&file.base),
        transform(&file.tool),
        Vector3::from(file.gravity),
        file.markers.iter().map(|m| Vector3::from(*m)).collect(),
    )?;
    let compensator = file
        .compensator
        .map(|c| -> Result<CompensatorParams> {
            let geometry = CompensatorGeometry::with_angle_map(
                c.L_mm,
                c.ax_mm,
                c.ay_mm,
                c.q2_sign,
                c.q2_offset_deg.to_radians(),
            )
            .map_err(|e| prefix_field(e, "compensator."))?;
            let elastics = CompensatorElastics::new(c.Kc_N_per_mm, c.s0_mm)
                .map_err(|e| prefix_field(e, "compensator."))?;
            Ok(CompensatorParams { geometry, elastics })
        })
        .transpose()?;
    Ok(RobotConfig { model, compensator })
}

/// Parses a model file and returns only the manipulator.
pub fn load_model(text: &str) -> Result<ManipulatorModel> {
    load_config(text).map(|c| c.model)
}

fn transform(block: &TransformBlock) -> Pose {
    pose_from_xyz_rpy(block.translation_mm, block.rotation_rpy_rad)
}

fn prefix_field(err: Error, prefix: &str) -> Error {
    match err {
        Error::Invalid { field, message } => Error::Invalid {
            field: format!("{prefix}{field}"),
            message,
        },
        other => other,
    }
}

fn toml_error(text: &str, err: &toml::de::Error) -> Error {
    let (line, column) = err
        .span()
        .map(|span| line_col(text, span.start))
        .unwrap_or((0, 0));
    Error::Parse {
        line,
        column,
        message: err.message().to_string(),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}
