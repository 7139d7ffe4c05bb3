#![allow(dead_code)]

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stiffcal::config::{load_config, RobotConfig};
use stiffcal::model::{JointSpec, Joints, ManipulatorModel, Pose};

pub fn data_path(name: &str) -> String {
    format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn synthetic_robot() -> RobotConfig {
    load_config(&std::fs::read_to_string(data_path("kr270_synthetic.toml")).unwrap()).unwrap()
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.2 && n < 1.0 {
            return v / n;
        }
    }
}

pub fn random_pose(rng: &mut ChaCha8Rng, reach: f64) -> Pose {
    let t = Vector3::new(
        rng.random_range(-reach..reach),
        rng.random_range(-reach..reach),
        rng.random_range(-reach..reach),
    );
    let axis = nalgebra::Unit::new_normalize(random_unit(rng));
    Isometry3::from_parts(
        Translation3::from(t),
        UnitQuaternion::from_axis_angle(&axis, rng.random_range(-3.0..3.0)),
    )
}

pub fn random_model(rng: &mut ChaCha8Rng) -> ManipulatorModel {
    let joints = (0..6)
        .map(|_| {
            JointSpec::new(
                random_unit(rng),
                random_pose(rng, 600.0),
                rng.random_range(1e-10..5e-9),
                rng.random_range(0.0..300.0),
                Vector3::new(
                    rng.random_range(-300.0..300.0),
                    rng.random_range(-300.0..300.0),
                    rng.random_range(-300.0..300.0),
                ),
            )
            .unwrap()
        })
        .collect();
    ManipulatorModel::new(
        joints,
        random_pose(rng, 200.0),
        random_pose(rng, 300.0),
        Vector3::new(0.0, 0.0, -9.81),
        vec![Vector3::new(0.0, 100.0, 0.0), Vector3::new(50.0, -80.0, 20.0)],
    )
    .unwrap()
}

pub fn random_joints(rng: &mut ChaCha8Rng, range: f64) -> Joints {
    Joints::from_fn(|_, _| rng.random_range(-range..range))
}

pub fn deg(values: [f64; 6]) -> Joints {
    Joints::from_fn(|i, _| values[i].to_radians())
}

pub fn reference_plan() -> stiffcal::doe::CalibrationPlan {
    stiffcal::doe::read_plan_csv(std::fs::File::open(data_path("table3_plan.csv")).unwrap()).unwrap()
}

/// Default layout (joints 2..6) with the plan's q2 buckets.
pub fn plan_layout(plan: &stiffcal::doe::CalibrationPlan) -> stiffcal::elasto::ParameterLayout {
    let buckets = stiffcal::elasto::ParameterLayout::buckets_from_angles(plan.entries.iter().map(|e| e.q[1]), 1e-3);
    stiffcal::elasto::ParameterLayout::without_joint_one(buckets).unwrap()
}

/// True values of the layout columns for the synthetic robot.
pub fn true_columns(robot: &RobotConfig, layout: &stiffcal::elasto::ParameterLayout) -> nalgebra::DVector<f64> {
    use stiffcal::elasto::Column;
    let comp = robot.compensator.as_ref();
    nalgebra::DVector::from_iterator(
        layout.len(),
        layout.columns().iter().map(|c| match c {
            Column::Joint(j) => robot.model.compliances()[*j],
            Column::Bucket(b) => {
                let mut q = Joints::zeros();
                q[1] = layout.buckets()[*b];
                stiffcal::stiffness::effective_compliances(&robot.model, comp, &q)[1]
            }
        }),
    )
}

/// Joint limits, visibility windows and loads resembling the tracker campaign.
pub fn campaign_constraints(f_max: f64) -> stiffcal::doe::PlanConstraints {
    let r = |a: f64, b: f64| (a.to_radians(), b.to_radians());
    stiffcal::doe::PlanConstraints {
        f_max,
        joint_limits: [r(-185.0, 185.0), r(-145.0, 5.0), r(-120.0, 155.0), r(-350.0, 350.0), r(-125.0, 125.0), r(-350.0, 350.0)],
        q1_allowed: vec![r(-150.0, -30.0), r(50.0, 150.0)],
        load: stiffcal::doe::LoadMode::Gravity,
    }
}

/// Machining-like test pose: arm reaching forward, mixed cutting force.
pub fn machining_pose(model: &ManipulatorModel) -> stiffcal::doe::TestPose {
    let q = deg([0.0, -50.0, 30.0, 10.0, -60.0, 20.0]);
    let wrench = stiffcal::model::Wrench::new(800.0, 300.0, -1500.0, 0.0, 0.0, 0.0);
    stiffcal::doe::TestPose::new(model, q, wrench).unwrap()
}
