//! Serial 6R manipulator with virtual joint springs and lumped link weights.
//!
//! Each actuated joint `i` carries a rotational virtual spring in series, so
//! the chain rotates by `q_i + θ_i` about the joint axis. Frames are composed
//! as
//!
//! ```text
//! T_0 = base,   T_i = T_{i-1} · Rot(axis_i, q_i + θ_i) · link_i,   tool = T_6 · tool
//! ```
//!
//! Node `j` is `T_j`, the frame at the far end of link `j`. Jacobians
//! are twists in the base frame: linear velocity of the point (mm/rad) on top
//! of angular velocity (rad/rad). Wrenches are force (N) on top of moment
//! (N·mm), expressed in the base frame about the point they act on.
//!
//! Units are mm, N, N·mm and rad throughout.

use std::ops::AddAssign;

use nalgebra::{Isometry3, Matrix6, Translation3, Unit, UnitQuaternion, Vector3, Vector6};

use crate::error::{Error, Result};

pub type Pose = Isometry3<f64>;
pub type Joints = Vector6<f64>;
pub type Wrench = Vector6<f64>;
pub type Twist = Vector6<f64>;

pub const DOF: usize = 6;
const UNIT_AXIS_TOL: f64 = 1e-12;

/// One actuated joint followed by its rigid link.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    axis: Unit<Vector3<f64>>,
    /// Fixed transform from this joint's frame to the next joint's frame.
    pub link: Pose,
    /// Virtual spring compliance, rad/(N·mm).
    pub compliance: f64,
    /// Link mass, kg.
    pub mass: f64,
    /// Link center of mass in the joint frame (after the joint rotation), mm.
    pub com: Vector3<f64>,
}

impl JointSpec {
    pub fn new(
        axis: Vector3<f64>,
        link: Pose,
        compliance: f64,
        mass: f64,
        com: Vector3<f64>,
    ) -> Result<Self> {
        if (axis.norm() - 1.0).abs() >= UNIT_AXIS_TOL {
            return Err(Error::invalid(
                "axis",
                format!("must have unit norm (got {:.15})", axis.norm()),
            ));
        }
        if !(compliance >= 0.0) || !compliance.is_finite() {
            return Err(Error::invalid("compliance", "must be finite and >= 0"));
        }
        if !(mass >= 0.0) || !mass.is_finite() {
            return Err(Error::invalid("mass", "must be finite and >= 0"));
        }
        Ok(Self {
            axis: Unit::new_unchecked(axis),
            link,
            compliance,
            mass,
            com,
        })
    }

    pub fn axis(&self) -> &Unit<Vector3<f64>> {
        &self.axis
    }
}

/// Serial 6R chain with base, tool and optional marker points on the tool.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorModel {
    joints: Vec<JointSpec>,
    pub base: Pose,
    pub tool: Pose,
    /// Gravity acceleration in the base frame, m/s² (mass × gravity gives N).
    pub gravity: Vector3<f64>,
    /// Marker offsets expressed in the tool frame, mm.
    pub markers: Vec<Vector3<f64>>,
}

/// Where a Jacobian or Hessian is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeRef {
    /// Virtual-joint node `1..=6`.
    Node(usize),
    /// Tool frame origin (the end-effector reference point).
    Tool,
}

/// Frames of the chain at one `(q, θ)`.
#[derive(Debug, Clone)]
pub struct ChainFrames {
    /// Origin of joint `i` in the base frame.
    pub origins: [Vector3<f64>; DOF],
    /// Rotation axis of joint `i` in the base frame.
    pub axes: [Vector3<f64>; DOF],
    /// Node poses `T_1..T_6`.
    pub nodes: [Pose; DOF],
    pub tool: Pose,
}

/// Link weights redistributed to the chain nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeLoading {
    /// Share of link 1 carried directly by the base (joint-1 origin).
    pub base: Wrench,
    /// `G_1..G_6`.
    pub nodes: [Wrench; DOF],
}

impl NodeLoading {
    pub fn zero() -> Self {
        Self {
            base: Wrench::zeros(),
            nodes: [Wrench::zeros(); DOF],
        }
    }

    /// Aggregate matrix `G = [G_1 .. G_6]`.
    pub fn matrix(&self) -> Matrix6<f64> {
        Matrix6::from_columns(&self.nodes)
    }

    /// Sum of all force components, base share included.
    pub fn total_force(&self) -> Vector3<f64> {
        self.nodes
            .iter()
            .chain(std::iter::once(&self.base))
            .fold(Vector3::zeros(), |acc, w| acc + w.fixed_rows::<3>(0))
    }
}

impl ManipulatorModel {
    pub fn new(
        joints: Vec<JointSpec>,
        base: Pose,
        tool: Pose,
        gravity: Vector3<f64>,
        markers: Vec<Vector3<f64>>,
    ) -> Result<Self> {
        if joints.len() != DOF {
            return Err(Error::invalid(
                "joints",
                format!("exactly 6 joints required (got {})", joints.len()),
            ));
        }
        Ok(Self {
            joints,
            base,
            tool,
            gravity,
            markers,
        })
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn joint(&self, index: usize) -> &JointSpec {
        &self.joints[index]
    }

    /// Compliance vector `k_1..k_6`.
    pub fn compliances(&self) -> Joints {
        Joints::from_fn(|i, _| self.joints[i].compliance)
    }

    /// Copy of the model with replaced joint compliances.
    pub fn with_compliances(&self, k: &Joints) -> Result<Self> {
        let mut out = self.clone();
        for (i, joint) in out.joints.iter_mut().enumerate() {
            if !(k[i] >= 0.0) {
                return Err(Error::invalid(
                    format!("joints[{i}].compliance"),
                    "must be >= 0",
                ));
            }
            joint.compliance = k[i];
        }
        Ok(out)
    }

    /// Sum of link translation lengths plus the tool offset.
    pub fn reach_bound(&self) -> f64 {
        self.joints
            .iter()
            .map(|j| j.link.translation.vector.norm())
            .sum::<f64>()
            + self.tool.translation.vector.norm()
    }

    pub fn frames(&self, q: &Joints, theta: &Joints) -> ChainFrames {
        let mut origins = [Vector3::zeros(); DOF];
        let mut axes = [Vector3::zeros(); DOF];
        let mut nodes = [Pose::identity(); DOF];
        let mut current = self.base;
        for (i, joint) in self.joints.iter().enumerate() {
            origins[i] = current.translation.vector;
            axes[i] = current.rotation * joint.axis.into_inner();
            let rot = UnitQuaternion::from_axis_angle(&joint.axis, q[i] + theta[i]);
            current = current * Isometry3::from_parts(Translation3::identity(), rot) * joint.link;
            nodes[i] = current;
        }
        let tool = current * self.tool;
        ChainFrames {
            origins,
            axes,
            nodes,
            tool,
        }
    }

    /// Tool pose `g(q, θ)`.
    pub fn fk(&self, q: &Joints, theta: &Joints) -> Pose {
        self.frames(q, theta).tool
    }

    /// Pose of virtual-joint node `j` (1-based).
    pub fn fk_node(&self, q: &Joints, theta: &Joints, j: usize) -> Result<Pose> {
        check_node(j)?;
        Ok(self.frames(q, theta).nodes[j - 1])
    }

    /// Marker positions in the base frame.
    pub fn marker_positions(&self, q: &Joints, theta: &Joints) -> Vec<Vector3<f64>> {
        let tool = self.fk(q, theta);
        self.markers
            .iter()
            .map(|m| tool.transform_point(&(*m).into()).coords)
            .collect()
    }

    /// `J_θ^(j) = ∂g_j/∂θ` (6×6). Columns past the node are zero.
    pub fn jacobian_theta(&self, q: &Joints, theta: &Joints, at: NodeRef) -> Result<Matrix6<f64>> {
        let frames = self.frames(q, theta);
        let (point, last) = match at {
            NodeRef::Node(j) => {
                check_node(j)?;
                (frames.nodes[j - 1].translation.vector, j)
            }
            NodeRef::Tool => (frames.tool.translation.vector, DOF),
        };
        Ok(point_jacobian(&frames, &point, last))
    }

    /// Jacobian of a point rigidly attached to the tool.
    pub fn tool_point_jacobian(&self, frames: &ChainFrames, offset: &Vector3<f64>) -> Matrix6<f64> {
        let point = frames.tool.transform_point(&(*offset).into()).coords;
        point_jacobian(frames, &point, DOF)
    }

    /// Tangent `H_θθ = ∂(Σ_j J_jᵀ G_j + J_Fᵀ F)/∂θ` with wrenches held constant in
    /// the base frame. Row `a` is the torque of joint `a`, column `b` the
    /// spring angle `θ_b`. Symmetric whenever all wrenches are pure forces.
    pub fn hessian_theta(
        &self,
        q: &Joints,
        theta: &Joints,
        node_wrenches: &[Wrench; DOF],
        tool_wrench: &Wrench,
    ) -> Matrix6<f64> {
        let frames = self.frames(q, theta);
        let mut h = Matrix6::zeros();
        for (j, w) in node_wrenches.iter().enumerate() {
            accumulate_point_hessian(&frames, &frames.nodes[j].translation.vector, j + 1, w, &mut h);
        }
        accumulate_point_hessian(&frames, &frames.tool.translation.vector, DOF, tool_wrench, &mut h);
        h
    }

    /// Splits each link weight between its two end points by the lever rule
    /// along the link axis, then sums the shares landing on each node.
    pub fn gravity_loading(&self, _q: &Joints, _theta: &Joints) -> NodeLoading {
        let mut loading = NodeLoading::zero();
        for (i, joint) in self.joints.iter().enumerate() {
            if joint.mass == 0.0 {
                continue;
            }
            let weight = self.gravity * joint.mass;
            // both ends and the COM are rigid in the link frame, so the split
            // ratio does not depend on the configuration
            let end = joint.link.translation.vector;
            let len2 = end.norm_squared();
            let to_end = if len2 > 0.0 { joint.com.dot(&end) / len2 } else { 1.0 };
            let far = weight * to_end;
            let near = weight - far;
            loading.nodes[i].fixed_rows_mut::<3>(0).add_assign(&far);
            if i == 0 {
                loading.base.fixed_rows_mut::<3>(0).add_assign(&near);
            } else {
                loading.nodes[i - 1].fixed_rows_mut::<3>(0).add_assign(&near);
            }
        }
        loading
    }
}

fn check_node(j: usize) -> Result<()> {
    if (1..=DOF).contains(&j) {
        Ok(())
    } else {
        Err(Error::NodeIndex(j))
    }
}

/// Twist Jacobian of `point`, which moves with joints `1..=last`.
pub fn point_jacobian(frames: &ChainFrames, point: &Vector3<f64>, last: usize) -> Matrix6<f64> {
    let mut jac = Matrix6::zeros();
    for i in 0..last {
        let z = frames.axes[i];
        let lin = z.cross(&(point - frames.origins[i]));
        jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        jac.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
    }
    jac
}

fn accumulate_point_hessian(
    frames: &ChainFrames,
    point: &Vector3<f64>,
    last: usize,
    wrench: &Wrench,
    h: &mut Matrix6<f64>,
) {
    let force: Vector3<f64> = wrench.fixed_rows::<3>(0).into();
    let moment: Vector3<f64> = wrench.fixed_rows::<3>(3).into();
    let has_force = force.iter().any(|v| *v != 0.0);
    let has_moment = moment.iter().any(|v| *v != 0.0);
    if !has_force && !has_moment {
        return;
    }
    for a in 0..last {
        for b in 0..last {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let mut value = 0.0;
            if has_force {
                let z_lo = frames.axes[lo];
                let z_hi = frames.axes[hi];
                value += force.dot(&z_lo.cross(&z_hi.cross(&(point - frames.origins[hi]))));
            }
            if has_moment && b < a {
                value += moment.dot(&frames.axes[b].cross(&frames.axes[a]));
            }
            h[(a, b)] += value;
        }
    }
}

/// Pose error `target ⊖ actual` as a base-frame twist (position, rotation vector).
pub fn pose_error(target: &Pose, actual: &Pose) -> Twist {
    let dp = target.translation.vector - actual.translation.vector;
    let dr = (target.rotation * actual.rotation.inverse()).scaled_axis();
    Twist::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// Applies a small base-frame twist to a pose.
pub fn pose_add(pose: &Pose, delta: &Twist) -> Pose {
    let dp = Vector3::new(delta[0], delta[1], delta[2]);
    let dr = Vector3::new(delta[3], delta[4], delta[5]);
    Pose::from_parts(
        Translation3::from(pose.translation.vector + dp),
        UnitQuaternion::from_scaled_axis(dr) * pose.rotation,
    )
}

/// Rigid transform from a translation (mm) and roll-pitch-yaw angles (rad).
pub fn pose_from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Pose {
    Pose::from_parts(
        Translation3::new(xyz[0], xyz[1], xyz[2]),
        UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn planar_2r(l1: f64, l2: f64) -> ManipulatorModel {
        let y = Vector3::y();
        let mut joints = vec![
            JointSpec::new(y, pose_from_xyz_rpy([l1, 0.0, 0.0], [0.0; 3]), 1e-6, 0.0, Vector3::zeros()).unwrap(),
            JointSpec::new(y, pose_from_xyz_rpy([l2, 0.0, 0.0], [0.0; 3]), 1e-6, 0.0, Vector3::zeros()).unwrap(),
        ];
        for _ in 0..4 {
            joints.push(JointSpec::new(Vector3::z(), Pose::identity(), 1e-6, 0.0, Vector3::zeros()).unwrap());
        }
        ManipulatorModel::new(joints, Pose::identity(), Pose::identity(), Vector3::new(0.0, 0.0, -9.81), vec![]).unwrap()
    }

    #[test]
    fn five_joints_rejected() {
        let j = JointSpec::new(Vector3::z(), Pose::identity(), 0.0, 0.0, Vector3::zeros()).unwrap();
        let err = ManipulatorModel::new(vec![j; 5], Pose::identity(), Pose::identity(), Vector3::zeros(), vec![]).unwrap_err();
        assert!(err.to_string().contains("exactly 6 joints required"));
    }

    #[test]
    fn non_unit_axis_rejected() {
        let err = JointSpec::new(Vector3::new(0.0, 0.0, 1.001), Pose::identity(), 0.0, 0.0, Vector3::zeros()).unwrap_err();
        assert!(err.to_string().contains("axis"));
    }

    #[test]
    fn node_index_out_of_range() {
        let m = planar_2r(1.0, 1.0);
        assert!(matches!(m.fk_node(&Joints::zeros(), &Joints::zeros(), 0), Err(Error::NodeIndex(0))));
        assert!(matches!(m.fk_node(&Joints::zeros(), &Joints::zeros(), 7), Err(Error::NodeIndex(7))));
    }

    #[test]
    fn planar_2r_hessian_matches_hand_derivation() {
        let (l1, l2, w) = (700.0, 400.0, 250.0);
        let m = planar_2r(l1, l2);
        let q = Joints::new(0.3, -0.8, 0.0, 0.0, 0.0, 0.0);
        let f = Wrench::new(0.0, 0.0, -w, 0.0, 0.0, 0.0);
        let h = m.hessian_theta(&q, &Joints::zeros(), &[Wrench::zeros(); DOF], &f);
        // p_z = -(l1 sin φ1 + l2 sin φ12) for rotations about +y
        let (s1, s12) = (q[0].sin(), (q[0] + q[1]).sin());
        assert_relative_eq!(h[(0, 0)], -w * (l1 * s1 + l2 * s12), max_relative = 1e-12);
        assert_relative_eq!(h[(0, 1)], -w * l2 * s12, max_relative = 1e-12);
        assert_relative_eq!(h[(1, 0)], -w * l2 * s12, max_relative = 1e-12);
        assert_relative_eq!(h[(1, 1)], -w * l2 * s12, max_relative = 1e-12);
    }

    #[test]
    fn zero_length_chain_has_zero_position_rows() {
        let joints = (0..6)
            .map(|i| {
                let axis = if i % 2 == 0 { Vector3::z() } else { Vector3::x() };
                JointSpec::new(axis, Pose::identity(), 1e-6, 1.0, Vector3::zeros()).unwrap()
            })
            .collect();
        let m = ManipulatorModel::new(joints, Pose::identity(), Pose::identity(), Vector3::zeros(), vec![]).unwrap();
        let q = Joints::new(0.1, 0.2, 0.3, 0.4, 0.5, 0.6);
        let j = m.jacobian_theta(&q, &Joints::zeros(), NodeRef::Tool).unwrap();
        assert_eq!(j.fixed_rows::<3>(0).norm(), 0.0);
    }

    #[test]
    fn midpoint_com_splits_weight_in_half() {
        let mut m = planar_2r(1000.0, 0.0);
        m.joints[0].mass = 10.0;
        m.joints[0].com = Vector3::new(500.0, 0.0, 0.0);
        let g = m.gravity_loading(&Joints::zeros(), &Joints::zeros());
        assert_relative_eq!(g.base[2], -49.05, epsilon = 1e-12);
        assert_relative_eq!(g.nodes[0][2], -49.05, epsilon = 1e-12);
        assert!(g.nodes[0].fixed_rows::<3>(3).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn pose_error_inverts_pose_add() {
        let p = pose_from_xyz_rpy([1.0, 2.0, 3.0], [0.1, -0.2, 0.3]);
        let d = Twist::new(0.5, -0.1, 0.2, 0.01, 0.02, -0.03);
        let e = pose_error(&pose_add(&p, &d), &p);
        assert_relative_eq!(e, d, epsilon = 1e-12);
    }
}
