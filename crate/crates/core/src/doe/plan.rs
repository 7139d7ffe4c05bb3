use std::io::{Read, Write};

use nalgebra::{Matrix3x6, Vector3};

use crate::elasto::{observation_matrix, ParameterLayout};
use crate::error::{Error, Result};
use crate::linalg::checked_inverse;
use crate::model::{Joints, ManipulatorModel, NodeRef, Wrench, DOF};
use crate::stiffness::COMPENSATED_JOINT;

/// i.i.d. zero-mean measurement noise per coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    /// `sigma` in mm.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("sigma_mm", "must be > 0"));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Representative working configuration and load.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPose {
    pub q: Joints,
    pub wrench: Wrench,
    /// Position rows of the tool observation matrix.
    pub a0: Matrix3x6<f64>,
}

impl TestPose {
    pub fn new(model: &ManipulatorModel, q: Joints, wrench: Wrench) -> Result<Self> {
        let jac = model.jacobian_theta(&q, &Joints::zeros(), NodeRef::Tool)?;
        if checked_inverse(&jac).is_none() {
            return Err(Error::SingularConfiguration("test pose Jacobian is singular".into()));
        }
        let a0 = observation_matrix(model, &q, &wrench).fixed_rows::<3>(0).into_owned();
        Ok(Self { q, wrench, a0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub q: Joints,
    pub wrench: Wrench,
    /// 0-based bucket index into the layout.
    pub bucket: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationPlan {
    pub entries: Vec<PlanEntry>,
    /// `ρ0²/σ²`, mm²/mm²; NaN until evaluated.
    pub score: f64,
}

impl CalibrationPlan {
    pub fn new(entries: Vec<PlanEntry>) -> Self {
        Self {
            entries,
            score: f64::NAN,
        }
    }

    /// The plan with every entry repeated `times` times.
    pub fn replicated(&self, times: usize) -> Self {
        let entries = self
            .entries
            .iter()
            .flat_map(|e| std::iter::repeat_n(*e, times))
            .collect();
        Self::new(entries)
    }
}

/// How entry loads are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadMode {
    /// Force of magnitude `F_max` along gravity.
    Gravity,
    /// Force of magnitude `F_max` along gravity or along one of `azimuths`
    /// directions tilted by `half_angle` (rad) from it.
    Cone { half_angle: f64, azimuths: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanConstraints {
    /// Maximum applied force, N.
    pub f_max: f64,
    /// `(min, max)` per joint, rad.
    pub joint_limits: [(f64, f64); DOF],
    /// Allowed `q1` intervals, rad; empty means the whole joint range.
    pub q1_allowed: Vec<(f64, f64)>,
    pub load: LoadMode,
}

impl PlanConstraints {
    /// Intervals of `q1` that satisfy both the limits and the visibility set.
    pub fn q1_intervals(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = self.joint_limits[0];
        if self.q1_allowed.is_empty() {
            return vec![(lo, hi)];
        }
        self.q1_allowed
            .iter()
            .map(|&(a, b)| (a.max(lo), b.min(hi)))
            .filter(|(a, b)| a <= b)
            .collect()
    }

    /// Candidate load directions; index 0 is gravity.
    pub fn load_directions(&self, gravity: &Vector3<f64>) -> Vec<Vector3<f64>> {
        let g = if gravity.norm() > 0.0 { gravity.normalize() } else { -Vector3::z() };
        let mut out = vec![g];
        if let LoadMode::Cone { half_angle, azimuths } = self.load {
            let helper = if g.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            let u = g.cross(&helper).normalize();
            let v = g.cross(&u);
            for i in 0..azimuths {
                let phi = 2.0 * std::f64::consts::PI * i as f64 / azimuths as f64;
                out.push(g * half_angle.cos() + (u * phi.cos() + v * phi.sin()) * half_angle.sin());
            }
        }
        out
    }

    pub fn check_feasible(&self, layout: &ParameterLayout) -> Result<()> {
        if !(self.f_max > 0.0) {
            return Err(Error::Infeasible("F_max must be > 0".into()));
        }
        for (j, (lo, hi)) in self.joint_limits.iter().enumerate() {
            if !(lo <= hi) {
                return Err(Error::Infeasible(format!("joint {} limits are empty", j + 1)));
            }
        }
        if self.q1_intervals().is_empty() {
            return Err(Error::Infeasible("no q1 value is both within limits and allowed".into()));
        }
        let (lo, hi) = self.joint_limits[COMPENSATED_JOINT];
        for b in layout.buckets() {
            if *b < lo || *b > hi {
                return Err(Error::Infeasible(format!(
                    "q2 bucket {:.3} deg lies outside the joint-2 limits",
                    b.to_degrees()
                )));
            }
        }
        if let LoadMode::Cone { half_angle, .. } = self.load {
            if !(half_angle > 0.0 && half_angle < std::f64::consts::FRAC_PI_2) {
                return Err(Error::Infeasible("cone half-angle must lie in (0, 90) deg".into()));
            }
        }
        Ok(())
    }

    pub fn entry_ok(&self, e: &PlanEntry) -> bool {
        let within = e
            .q
            .iter()
            .zip(&self.joint_limits)
            .all(|(q, (lo, hi))| *q >= *lo && *q <= *hi);
        let q1_ok = self.q1_intervals().iter().any(|(a, b)| e.q[0] >= *a && e.q[0] <= *b);
        let force = e.wrench.fixed_rows::<3>(0).norm();
        within && q1_ok && force <= self.f_max * (1.0 + 1e-12)
    }
}

/// Every entry feasible, its bucket consistent with its `q2`, every bucket used.
pub fn check_plan(plan: &CalibrationPlan, layout: &ParameterLayout, constraints: &PlanConstraints) -> Result<()> {
    let mut used = vec![false; layout.buckets().len()];
    for (i, e) in plan.entries.iter().enumerate() {
        if !constraints.entry_ok(e) {
            return Err(Error::Record {
                index: i + 1,
                message: "entry violates joint limits, q1 visibility or F_max".into(),
            });
        }
        if !layout.buckets().is_empty() {
            if layout.bucket_of(e.q[COMPENSATED_JOINT]) != Some(e.bucket) {
                return Err(Error::Record {
                    index: i + 1,
                    message: format!("q2 does not match bucket {}", e.bucket),
                });
            }
            used[e.bucket] = true;
        }
    }
    if let Some(b) = used.iter().position(|u| !u) {
        return Err(Error::Infeasible(format!("bucket {b} has no plan entry")));
    }
    Ok(())
}

const HEADER: [&str; 13] = [
    "q1_deg", "q2_deg", "q3_deg", "q4_deg", "q5_deg", "q6_deg", "bucket", "Fx_N", "Fy_N", "Fz_N", "Mx_Nmm", "My_Nmm",
    "Mz_Nmm",
];

/// One plan entry per row: joint angles in degrees, bucket, wrench.
pub fn read_plan_csv<R: Read>(reader: R) -> Result<CalibrationPlan> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            context: "plan header".into(),
            source: e,
        })?
        .clone();
    let mut cols = [0usize; 13];
    for (slot, name) in cols.iter_mut().zip(HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(name, "missing column"))?;
    }
    let mut entries = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv {
            context: format!("plan row {}", row + 1),
            source: e,
        })?;
        let num = |c: usize| -> Result<f64> {
            let s = rec.get(cols[c]).unwrap_or("");
            s.parse::<f64>().map_err(|_| Error::Record {
                index: row + 1,
                message: format!("column '{}': cannot parse '{s}'", HEADER[c]),
            })
        };
        let q = Joints::from_vec((0..6).map(|i| num(i).map(f64::to_radians)).collect::<Result<Vec<_>>>()?);
        let bucket = num(6)?;
        if bucket < 0.0 || bucket.fract() != 0.0 {
            return Err(Error::Record {
                index: row + 1,
                message: format!("bucket must be a non-negative integer, got {bucket}"),
            });
        }
        let wrench = Wrench::from_vec((7..13).map(num).collect::<Result<Vec<_>>>()?);
        entries.push(PlanEntry {
            q,
            wrench,
            bucket: bucket as usize,
        });
    }
    Ok(CalibrationPlan::new(entries))
}

pub fn write_plan_csv<W: Write>(plan: &CalibrationPlan, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e| Error::Csv {
        context: "plan output".into(),
        source: e,
    };
    w.write_record(HEADER).map_err(csv_err)?;
    for e in &plan.entries {
        let mut row: Vec<String> = e.q.iter().map(|v| format!("{:.4}", v.to_degrees())).collect();
        row.push(e.bucket.to_string());
        row.extend(e.wrench.iter().map(|v| format!("{v:.3}")));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Csv {
        context: "plan output".into(),
        source: e.into(),
    })
}
