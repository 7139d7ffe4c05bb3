//! CLI-only input files: plan constraints and the identified geometry snippet.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use stiffcal::compensator::CompensatorGeometry;
use stiffcal::doe::{LoadMode, PlanConstraints, SearchOptions, TestPose};
use stiffcal::elasto::{ParameterLayout, DEFAULT_BUCKET_TOLERANCE_DEG};
use stiffcal::model::{Joints, ManipulatorModel, Wrench};

/// Compensator geometry as written by `geom-ident`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct GeometryFile {
    pub L_mm: f64,
    pub ax_mm: f64,
    pub ay_mm: f64,
    pub q2_sign: f64,
    pub q2_offset_deg: f64,
}

impl GeometryFile {
    pub fn geometry(&self) -> Result<CompensatorGeometry> {
        Ok(CompensatorGeometry::with_angle_map(
            self.L_mm,
            self.ax_mm,
            self.ay_mm,
            self.q2_sign,
            self.q2_offset_deg.to_radians(),
        )?)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct DoeFile {
    F_max_N: f64,
    #[serde(default = "three")]
    configs_per_bucket: usize,
    q2_buckets_deg: Vec<f64>,
    #[serde(default = "default_joints")]
    joints: Vec<usize>,
    #[serde(default = "default_sigma")]
    sigma_mm: f64,
    joint_limits_deg: [[f64; 2]; 6],
    #[serde(default)]
    q1_allowed_deg: Vec<[f64; 2]>,
    #[serde(default)]
    load: LoadBlock,
    test_pose: TestPoseBlock,
    #[serde(default)]
    search: SearchBlock,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, tag = "mode", rename_all = "lowercase")]
enum LoadBlock {
    #[default]
    Gravity,
    Cone {
        half_angle_deg: f64,
        azimuths: usize,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestPoseBlock {
    q_deg: [f64; 6],
    wrench: [f64; 6],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SearchBlock {
    starts: usize,
    levels: usize,
    grid: usize,
    max_sweeps: usize,
}

impl Default for SearchBlock {
    fn default() -> Self {
        let d = SearchOptions::default();
        Self {
            starts: d.starts,
            levels: d.levels,
            grid: d.grid,
            max_sweeps: d.max_sweeps,
        }
    }
}

fn three() -> usize {
    3
}

fn default_joints() -> Vec<usize> {
    vec![2, 3, 4, 5, 6]
}

fn default_sigma() -> f64 {
    0.05
}

/// Everything `doe` needs, resolved against the model.
pub struct DoeSetup {
    pub constraints: PlanConstraints,
    pub layout: ParameterLayout,
    pub test: TestPose,
    pub per_bucket: usize,
    pub sigma: f64,
    pub search: SearchOptions,
}

pub fn parse_doe(text: &str, model: &ManipulatorModel) -> Result<DoeSetup> {
    let f: DoeFile = toml::from_str(text).context("constraints file")?;
    let rad = |p: [f64; 2]| (p[0].to_radians(), p[1].to_radians());
    let load = match f.load {
        LoadBlock::Gravity => LoadMode::Gravity,
        LoadBlock::Cone {
            half_angle_deg,
            azimuths,
        } => LoadMode::Cone {
            half_angle: half_angle_deg.to_radians(),
            azimuths,
        },
    };
    let constraints = PlanConstraints {
        f_max: f.F_max_N,
        joint_limits: f.joint_limits_deg.map(rad),
        q1_allowed: f.q1_allowed_deg.into_iter().map(rad).collect(),
        load,
    };
    let buckets = if f.joints.contains(&2) {
        f.q2_buckets_deg.iter().map(|d| d.to_radians()).collect()
    } else {
        Vec::new()
    };
    let layout = ParameterLayout::new(&f.joints, buckets, DEFAULT_BUCKET_TOLERANCE_DEG.to_radians())?;
    if f.configs_per_bucket == 0 {
        bail!("configs_per_bucket must be >= 1");
    }
    let q = Joints::from_fn(|i, _| f.test_pose.q_deg[i].to_radians());
    let test = TestPose::new(model, q, Wrench::from_row_slice(&f.test_pose.wrench))?;
    Ok(DoeSetup {
        constraints,
        layout,
        test,
        per_bucket: f.configs_per_bucket,
        sigma: f.sigma_mm,
        search: SearchOptions {
            starts: f.search.starts,
            levels: f.search.levels,
            grid: f.search.grid,
            max_sweeps: f.search.max_sweeps,
        },
    })
}
