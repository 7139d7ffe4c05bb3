//! Spring gravity compensator acting on joint 2.
//!
//! Three points span the mechanism: `P2` on the joint-2 axis, `P1` on the
//! crank (circling `P2` at radius `L`) and `P0` fixed to link 1 at distance
//! `a` from `P2`. The spring runs between `P0` and `P1`, its length `s`
//! depending on the joint angle:
//!
//! ```text
//! s² = a² + L² + 2aL·cos(α − q_c),   a = |(a_x, a_y)|,   α = atan2(a_y, a_x)
//! ```
//!
//! `q_c` is the compensator angle. It is mapped from the robot's joint-2
//! angle by `q_c = sign·q2 + offset`; the identity map (`+1`, `0`) is the
//! default.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensatorGeometry {
    l: f64,
    ax: f64,
    ay: f64,
    q2_sign: f64,
    q2_offset: f64,
}

impl CompensatorGeometry {
    pub fn new(l: f64, ax: f64, ay: f64) -> Result<Self> {
        Self::with_angle_map(l, ax, ay, 1.0, 0.0)
    }

    pub fn with_angle_map(l: f64, ax: f64, ay: f64, q2_sign: f64, q2_offset: f64) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::invalid("L_mm", "must be > 0"));
        }
        let a = ax.hypot(ay);
        if !(a > l) || !a.is_finite() {
            return Err(Error::invalid(
                "ax_mm/ay_mm",
                format!("anchor distance a = {a} must exceed L = {l}"),
            ));
        }
        if q2_sign != 1.0 && q2_sign != -1.0 {
            return Err(Error::invalid("q2_sign", "must be +1 or -1"));
        }
        if !q2_offset.is_finite() {
            return Err(Error::invalid("q2_offset", "must be finite"));
        }
        Ok(Self {
            l,
            ax,
            ay,
            q2_sign,
            q2_offset,
        })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn ax(&self) -> f64 {
        self.ax
    }

    pub fn ay(&self) -> f64 {
        self.ay
    }

    pub fn a(&self) -> f64 {
        self.ax.hypot(self.ay)
    }

    pub fn alpha(&self) -> f64 {
        self.ay.atan2(self.ax)
    }

    pub fn q2_sign(&self) -> f64 {
        self.q2_sign
    }

    pub fn q2_offset(&self) -> f64 {
        self.q2_offset
    }

    /// Compensator angle `q_c` for a joint-2 angle.
    pub fn compensator_angle(&self, q2: f64) -> f64 {
        self.q2_sign * q2 + self.q2_offset
    }

    /// `γ = α − q_c`.
    pub fn gamma(&self, q2: f64) -> f64 {
        self.alpha() - self.compensator_angle(q2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensatorElastics {
    /// Spring stiffness, N/mm.
    pub kc: f64,
    /// Unloaded spring length, mm.
    pub s0: f64,
}

impl CompensatorElastics {
    pub fn new(kc: f64, s0: f64) -> Result<Self> {
        if !(kc > 0.0) || !kc.is_finite() {
            return Err(Error::invalid("Kc_N_per_mm", "must be > 0"));
        }
        if !(s0 >= 0.0) || !s0.is_finite() {
            return Err(Error::invalid("s0_mm", "must be >= 0"));
        }
        Ok(Self { kc, s0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensatorParams {
    pub geometry: CompensatorGeometry,
    pub elastics: CompensatorElastics,
}

/// Equivalent joint-2 stiffness and the coefficient that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentStiffness {
    /// N·mm/rad.
    pub stiffness: f64,
    pub eta: f64,
}

impl EquivalentStiffness {
    /// False when the net stiffness is not positive.
    pub fn is_physical(&self) -> bool {
        self.stiffness > 0.0
    }
}

pub fn spring_length(geom: &CompensatorGeometry, q2: f64) -> f64 {
    let (a, l) = (geom.a(), geom.l());
    (a * a + l * l + 2.0 * a * l * geom.gamma(q2).cos()).sqrt()
}

/// Angle `φ` between the spring `P0P1` and the crank `P1P2`.
pub fn spring_angle(geom: &CompensatorGeometry, q2: f64) -> f64 {
    let ratio = geom.a() / spring_length(geom, q2) * geom.gamma(q2).sin();
    ratio.clamp(-1.0, 1.0).asin()
}

/// Torque the compensator applies to joint 2, N·mm, in the robot's joint-2
/// sign convention. This is the restoring torque `−dE/dq2` of the spring
/// energy `E = ½K_c(s − s0)²`; its magnitude is `K_c(1 − s0/s)·aL·sin(α − q_c)`.
pub fn compensator_torque(params: &CompensatorParams, q2: f64) -> f64 {
    let geom = &params.geometry;
    let s = spring_length(geom, q2);
    let magnitude = params.elastics.kc * (1.0 - params.elastics.s0 / s) * geom.a() * geom.l() * geom.gamma(q2).sin();
    -geom.q2_sign() * magnitude
}

/// Spring potential energy, N·mm.
pub fn spring_energy(params: &CompensatorParams, q2: f64) -> f64 {
    let stretch = spring_length(&params.geometry, q2) - params.elastics.s0;
    0.5 * params.elastics.kc * stretch * stretch
}

/// Stiffness coefficient `η(q2)`; the compensator adds `K_c·a·L·η` to joint 2.
pub fn eta(geom: &CompensatorGeometry, s0: f64, q2: f64) -> f64 {
    let s = spring_length(geom, q2);
    let g = geom.gamma(q2);
    let al = geom.a() * geom.l();
    s0 / s * (al / (s * s) * g.sin().powi(2) + g.cos()) - g.cos()
}

pub fn equivalent_joint_stiffness(params: &CompensatorParams, k0: f64, q2: f64) -> EquivalentStiffness {
    let geom = &params.geometry;
    let eta = eta(geom, params.elastics.s0, q2);
    EquivalentStiffness {
        stiffness: k0 + params.elastics.kc * geom.a() * geom.l() * eta,
        eta,
    }
}

/// One tabulated `η` sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSample {
    pub q2: f64,
    pub s0: f64,
    pub eta: f64,
}

/// `η(q2)` for every `s0` over the grid, grouped by `s0` in input order.
pub fn eta_curve(geom: &CompensatorGeometry, s0_list: &[f64], q2_grid: &[f64]) -> Result<Vec<EtaSample>> {
    if q2_grid.is_empty() || s0_list.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(s0_list
        .iter()
        .flat_map(|&s0| {
            q2_grid.iter().map(move |&q2| EtaSample {
                q2,
                s0,
                eta: eta(geom, s0, q2),
            })
        })
        .collect())
}

/// Evenly spaced grid including both ends.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Compensator angle map recovered from a geometric fit of the crank marker.
pub fn angle_map_from_phase(direction: f64, phase: f64) -> (f64, f64) {
    (direction, phase.rem_euclid(2.0 * PI))
}
