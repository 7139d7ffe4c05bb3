//! Loaded static equilibrium and Cartesian stiffness of the compensated arm.
//!
//! Equilibrium of the virtual springs:
//!
//! ```text
//! K_θ(q)·θ = Σ_j J_jᵀ G_j + J_Fᵀ F
//! ```
//!
//! is solved either for `θ` with a given tool wrench `F` (primal mode) or for
//! `(F, θ)` with a given tool pose `t` (dual mode). The Cartesian stiffness at
//! an equilibrium is `K_C = (J_F (K_θ − H_θθ)⁻¹ J_Fᵀ)⁻¹`.

use nalgebra::{Matrix6, Vector3};

use crate::compensator::{equivalent_joint_stiffness, CompensatorParams};
use crate::error::{Error, Result};
use crate::linalg::checked_inverse;
use crate::model::{
    point_jacobian, pose_add, pose_error, ChainFrames, Joints, ManipulatorModel, NodeLoading, Pose, Twist,
    Wrench, DOF,
};

/// Index of the compensated joint.
pub const COMPENSATED_JOINT: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumOptions {
    /// Include link weights as node loads.
    pub gravity: bool,
    pub max_iterations: usize,
    /// Stop when successive spring angles differ by less than this, rad.
    pub theta_tol: f64,
    /// Dual mode: stop when the tool pose error is below this, mm.
    pub pose_tol: f64,
    /// Primal mode: stop when the torque residual relative to `‖K_θ θ‖` is below this.
    pub force_tol: f64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            gravity: true,
            max_iterations: 100,
            theta_tol: 1e-12,
            pose_tol: 1e-9,
            force_tol: 1e-12,
        }
    }
}

impl EquilibriumOptions {
    pub fn without_gravity() -> Self {
        Self {
            gravity: false,
            ..Self::default()
        }
    }
}

/// What is prescribed at the tool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToolLoading {
    /// Tool pose given, wrench unknown.
    TargetPose(Pose),
    /// Wrench given, pose unknown.
    Wrench(Wrench),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumState {
    pub q: Joints,
    pub theta: Joints,
    pub wrench: Wrench,
    pub pose: Pose,
    pub converged: bool,
    pub iterations: usize,
    /// Final pose error (dual, mm) or relative torque residual (primal).
    pub residual: f64,
    pub gravity: bool,
}

impl EquilibriumState {
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Diverged {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianStiffness(pub Matrix6<f64>);

impl CartesianStiffness {
    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.0
    }

    /// `‖K − Kᵀ‖ / ‖K‖`.
    pub fn asymmetry(&self) -> f64 {
        (self.0 - self.0.transpose()).norm() / self.0.norm()
    }
}

/// Per-joint stiffnesses `1/k_j`, with joint 2 replaced by the compensated
/// equivalent stiffness at `q2`.
pub fn joint_stiffness_diagonal(
    model: &ManipulatorModel,
    compensator: Option<&CompensatorParams>,
    q: &Joints,
) -> Result<Joints> {
    let mut diag = Joints::zeros();
    for (i, joint) in model.joints().iter().enumerate() {
        if joint.compliance <= 0.0 {
            return Err(Error::ZeroCompliance { joint: i + 1 });
        }
        diag[i] = 1.0 / joint.compliance;
    }
    if let Some(comp) = compensator {
        let k0 = diag[COMPENSATED_JOINT];
        diag[COMPENSATED_JOINT] = equivalent_joint_stiffness(comp, k0, q[COMPENSATED_JOINT]).stiffness;
    }
    Ok(diag)
}

pub fn joint_stiffness_matrix(
    model: &ManipulatorModel,
    compensator: Option<&CompensatorParams>,
    q: &Joints,
) -> Result<Matrix6<f64>> {
    joint_stiffness_diagonal(model, compensator, q).map(|d| Matrix6::from_diagonal(&d))
}

/// Effective compliances `k_j(q)`. Unlike the stiffness form, zero
/// compliances are allowed here (rigid joints).
pub fn effective_compliances(
    model: &ManipulatorModel,
    compensator: Option<&CompensatorParams>,
    q: &Joints,
) -> Joints {
    let mut k = model.compliances();
    if let Some(comp) = compensator {
        let k2 = k[COMPENSATED_JOINT];
        if k2 > 0.0 {
            let kt = equivalent_joint_stiffness(comp, 1.0 / k2, q[COMPENSATED_JOINT]).stiffness;
            k[COMPENSATED_JOINT] = 1.0 / kt;
        }
    }
    k
}

struct Linearization {
    tool_jacobian: Matrix6<f64>,
    gravity_torque: Joints,
}

fn linearize(frames: &ChainFrames, loading: &NodeLoading) -> Linearization {
    let tool_jacobian = point_jacobian(frames, &frames.tool.translation.vector, DOF);
    let mut gravity_torque = Joints::zeros();
    for (j, w) in loading.nodes.iter().enumerate() {
        if w.iter().any(|v| *v != 0.0) {
            let jac = point_jacobian(frames, &frames.nodes[j].translation.vector, j + 1);
            gravity_torque += jac.transpose() * w;
        }
    }
    Linearization {
        tool_jacobian,
        gravity_torque,
    }
}

fn node_loading(model: &ManipulatorModel, q: &Joints, gravity: bool) -> NodeLoading {
    if gravity {
        model.gravity_loading(q, &Joints::zeros())
    } else {
        NodeLoading::zero()
    }
}

pub fn solve_equilibrium(
    model: &ManipulatorModel,
    compensator: Option<&CompensatorParams>,
    q: &Joints,
    loading: ToolLoading,
    options: &EquilibriumOptions,
) -> Result<EquilibriumState> {
    let stiffness = joint_stiffness_diagonal(model, compensator, q)?;
    if stiffness.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::SingularConfiguration(
            "joint stiffness matrix is not positive definite".into(),
        ));
    }
    let compliance = stiffness.map(|k| 1.0 / k);
    let nodes = node_loading(model, q, options.gravity);
    match loading {
        ToolLoading::TargetPose(target) => solve_dual(model, q, &target, &compliance, &nodes, options),
        ToolLoading::Wrench(wrench) => solve_primal(model, q, &wrench, &stiffness, &compliance, &nodes, options),
    }
}

/// `F_{i+1} = (J K⁻¹ Jᵀ)⁻¹ (t − g(θ_i) + J θ_i − J K⁻¹ J_Gᵀ G)`,
/// `θ_{i+1} = K⁻¹ (J_Gᵀ G + Jᵀ F_{i+1})`.
fn solve_dual(
    model: &ManipulatorModel,
    q: &Joints,
    target: &Pose,
    compliance: &Joints,
    nodes: &NodeLoading,
    options: &EquilibriumOptions,
) -> Result<EquilibriumState> {
    let kinv = Matrix6::from_diagonal(compliance);
    let mut theta = Joints::zeros();
    let mut wrench = Wrench::zeros();
    let mut pose = model.fk(q, &theta);
    let mut residual = pose_error(target, &pose).norm();
    for iteration in 1..=options.max_iterations {
        let frames = model.frames(q, &theta);
        let lin = linearize(&frames, nodes);
        let j = &lin.tool_jacobian;
        let compliance_map = j * kinv * j.transpose();
        let inverse = checked_inverse(&compliance_map).ok_or_else(|| {
            Error::SingularConfiguration("J K⁻¹ Jᵀ is singular at the tool".into())
        })?;
        let rhs = pose_error(target, &frames.tool) + j * theta - j * kinv * lin.gravity_torque;
        wrench = inverse * rhs;
        let next = kinv * (lin.gravity_torque + j.transpose() * wrench);
        let step = (next - theta).norm();
        theta = next;
        pose = model.fk(q, &theta);
        residual = pose_error(target, &pose).norm();
        if step < options.theta_tol || residual < options.pose_tol {
            return Ok(EquilibriumState {
                q: *q,
                theta,
                wrench,
                pose,
                converged: true,
                iterations: iteration,
                residual,
                gravity: options.gravity,
            });
        }
    }
    Ok(EquilibriumState {
        q: *q,
        theta,
        wrench,
        pose,
        converged: false,
        iterations: options.max_iterations,
        residual,
        gravity: options.gravity,
    })
}

/// Damped fixed point `θ ← θ + λ (K⁻¹ τ(θ) − θ)`; `λ` halves whenever the
/// torque residual would grow.
fn solve_primal(
    model: &ManipulatorModel,
    q: &Joints,
    wrench: &Wrench,
    stiffness: &Joints,
    compliance: &Joints,
    nodes: &NodeLoading,
    options: &EquilibriumOptions,
) -> Result<EquilibriumState> {
    let torque_at = |theta: &Joints| -> Joints {
        let frames = model.frames(q, theta);
        let lin = linearize(&frames, nodes);
        lin.gravity_torque + lin.tool_jacobian.transpose() * wrench
    };
    let relative_residual = |theta: &Joints, torque: &Joints| -> f64 {
        let spring = stiffness.component_mul(theta);
        let scale = spring.norm().max(torque.norm());
        if scale == 0.0 {
            0.0
        } else {
            (spring - torque).norm() / scale
        }
    };

    let mut theta = Joints::zeros();
    let mut torque = torque_at(&theta);
    let mut residual = relative_residual(&theta, &torque);
    let mut damping = 1.0;
    let mut iterations = 0;
    let mut converged = residual < options.force_tol;
    while !converged && iterations < options.max_iterations {
        iterations += 1;
        let direction = compliance.component_mul(&torque) - theta;
        let mut candidate = theta + direction * damping;
        let mut candidate_torque = torque_at(&candidate);
        let mut candidate_residual = relative_residual(&candidate, &candidate_torque);
        while candidate_residual > residual && damping > 1e-6 {
            damping *= 0.5;
            candidate = theta + direction * damping;
            candidate_torque = torque_at(&candidate);
            candidate_residual = relative_residual(&candidate, &candidate_torque);
        }
        let step = (candidate - theta).norm();
        theta = candidate;
        torque = candidate_torque;
        residual = candidate_residual;
        converged = step < options.theta_tol || residual < options.force_tol;
    }
    Ok(EquilibriumState {
        q: *q,
        theta,
        wrench: *wrench,
        pose: model.fk(q, &theta),
        converged,
        iterations,
        residual,
        gravity: options.gravity,
    })
}

/// Cartesian stiffness at a converged equilibrium.
pub fn cartesian_stiffness(
    model: &ManipulatorModel,
    compensator: Option<&CompensatorParams>,
    state: &EquilibriumState,
) -> Result<CartesianStiffness> {
    let k_theta = joint_stiffness_matrix(model, compensator, &state.q)?;
    let nodes = node_loading(model, &state.q, state.gravity);
    let h = model.hessian_theta(&state.q, &state.theta, &nodes.nodes, &state.wrench);
    let reduced = checked_inverse(&(k_theta - h)).ok_or(Error::Buckling)?;
    let frames = model.frames(&state.q, &state.theta);
    let j = point_jacobian(&frames, &frames.tool.translation.vector, DOF);
    let compliance = j * reduced * j.transpose();
    let stiffness = checked_inverse(&compliance).ok_or_else(|| {
        Error::SingularConfiguration("tool Jacobian is rank deficient (workspace boundary)".into())
    })?;
    Ok(CartesianStiffness(stiffness))
}

/// Observation matrix of a point rigidly attached to the tool: column `j` is
/// the twist of that point per unit compliance of joint `j` under the tool
/// wrench, `J_m,j · (J_F,jᵀ F)`.
pub fn point_observation(frames: &ChainFrames, point: &Vector3<f64>, wrench: &Wrench) -> Matrix6<f64> {
    let tool_jac = point_jacobian(frames, &frames.tool.translation.vector, DOF);
    let point_jac = point_jacobian(frames, point, DOF);
    let torques = tool_jac.transpose() * wrench;
    let mut out = point_jac;
    for j in 0..DOF {
        let mut col = out.column_mut(j);
        col *= torques[j];
    }
    out
}

/// Observation matrices of every marker at `(q, θ = 0)`.
pub fn marker_observations(model: &ManipulatorModel, q: &Joints, wrench: &Wrench) -> Vec<Matrix6<f64>> {
    let frames = model.frames(q, &Joints::zeros());
    model
        .markers
        .iter()
        .map(|m| {
            let p = frames.tool.transform_point(&(*m).into()).coords;
            point_observation(&frames, &p, wrench)
        })
        .collect()
}

/// Linear marker deflections `Δp = A^(p) k(q)` under the tool wrench.
pub fn predict_marker_deflections(
    model: &ManipulatorModel,
    compensator: Option<&CompensatorParams>,
    q: &Joints,
    wrench: &Wrench,
) -> Vec<Vector3<f64>> {
    let k = effective_compliances(model, compensator, q);
    marker_observations(model, q, wrench)
        .iter()
        .map(|a| (a * k).fixed_rows::<3>(0).into())
        .collect()
}

/// Damped Newton inverse kinematics on the rigid chain.
pub fn inverse_kinematics(model: &ManipulatorModel, target: &Pose, seed: &Joints) -> Result<Joints> {
    let zero = Joints::zeros();
    let mut q = *seed;
    for _ in 0..200 {
        let frames = model.frames(&q, &zero);
        let err = pose_error(target, &frames.tool);
        if err.fixed_rows::<3>(0).norm() < 1e-10 && err.fixed_rows::<3>(3).norm() < 1e-13 {
            return Ok(q);
        }
        let j = point_jacobian(&frames, &frames.tool.translation.vector, DOF);
        let jinv = checked_inverse(&j)
            .ok_or_else(|| Error::SingularConfiguration("inverse kinematics hit a singular Jacobian".into()))?;
        let mut step = jinv * err;
        let largest = step.amax();
        if largest > 0.2 {
            step *= 0.2 / largest;
        }
        q += step;
    }
    Err(Error::Diverged {
        iterations: 200,
        residual: pose_error(target, &model.fk(&q, &zero)).norm(),
    })
}

/// Result of a one-step mirror correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Compensation {
    /// Pose to command so that the loaded robot lands on the desired pose.
    pub corrected: Pose,
    /// Pose reached under load when commanding the desired pose directly.
    pub deformed: Pose,
    /// Joint angles reaching the desired pose rigidly.
    pub q_desired: Joints,
}

impl Compensation {
    pub fn raw_error(&self, desired: &Pose) -> Twist {
        pose_error(desired, &self.deformed)
    }
}

/// Pose reached under load when the controller commands `command`.
pub fn loaded_pose(
    model: &ManipulatorModel,
    compensator: Option<&CompensatorParams>,
    seed: &Joints,
    wrench: &Wrench,
    command: &Pose,
    options: &EquilibriumOptions,
) -> Result<(Joints, Pose)> {
    let q = inverse_kinematics(model, command, seed)?;
    let state = solve_equilibrium(model, compensator, &q, ToolLoading::Wrench(*wrench), options)?.into_converged()?;
    Ok((q, state.pose))
}

/// `corrected = desired ⊕ (desired ⊖ deformed)`.
pub fn compensate_target(
    model: &ManipulatorModel,
    compensator: Option<&CompensatorParams>,
    seed: &Joints,
    wrench: &Wrench,
    desired: &Pose,
    options: &EquilibriumOptions,
) -> Result<Compensation> {
    let (q_desired, deformed) = loaded_pose(model, compensator, seed, wrench, desired, options)?;
    let corrected = pose_add(desired, &pose_error(desired, &deformed));
    Ok(Compensation {
        corrected,
        deformed,
        q_desired,
    })
}
