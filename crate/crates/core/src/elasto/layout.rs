use crate::error::{Error, Result};
use crate::model::DOF;
use crate::stiffness::COMPENSATED_JOINT;

/// Default `q2` bucket tolerance, degrees.
pub const DEFAULT_BUCKET_TOLERANCE_DEG: f64 = 0.1;

/// One entry of the compliance vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    /// Compliance of joint `j` (0-based), shared by all records.
    Joint(usize),
    /// Joint-2 compliance of bucket `b`.
    Bucket(usize),
}

/// Which compliances are estimated and how records map onto them.
///
/// Column order: `k1?, k2[1..m_q], k3..k6`, excluded joints dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterLayout {
    included: [bool; DOF],
    buckets: Vec<f64>,
    tolerance: f64,
    columns: Vec<Column>,
}

impl ParameterLayout {
    /// `included` holds 1-based joint numbers; bucket angles and tolerance in rad.
    pub fn new(included: &[usize], buckets: Vec<f64>, tolerance: f64) -> Result<Self> {
        let mut mask = [false; DOF];
        for &j in included {
            if !(1..=DOF).contains(&j) {
                return Err(Error::invalid("joints", format!("joint {j} out of range 1..6")));
            }
            mask[j - 1] = true;
        }
        if !mask.iter().any(|m| *m) {
            return Err(Error::invalid("joints", "no joint included"));
        }
        if !(tolerance > 0.0) {
            return Err(Error::invalid("tolerance", "must be > 0"));
        }
        let buckets = if mask[COMPENSATED_JOINT] { buckets } else { Vec::new() };
        if mask[COMPENSATED_JOINT] && buckets.is_empty() {
            return Err(Error::invalid("buckets", "joint 2 included but no q2 bucket given"));
        }
        for (i, a) in buckets.iter().enumerate() {
            for b in &buckets[i + 1..] {
                if (a - b).abs() <= tolerance {
                    return Err(Error::invalid(
                        "buckets",
                        format!(
                            "q2 buckets {:.4} and {:.4} deg are not distinct beyond the tolerance",
                            a.to_degrees(),
                            b.to_degrees()
                        ),
                    ));
                }
            }
        }
        let mut columns = Vec::new();
        for (j, &inc) in mask.iter().enumerate() {
            if !inc {
                continue;
            }
            if j == COMPENSATED_JOINT {
                columns.extend((0..buckets.len()).map(Column::Bucket));
            } else {
                columns.push(Column::Joint(j));
            }
        }
        Ok(Self {
            included: mask,
            buckets,
            tolerance,
            columns,
        })
    }

    /// Joints 2..6 with the default bucket tolerance.
    pub fn without_joint_one(buckets: Vec<f64>) -> Result<Self> {
        Self::new(&[2, 3, 4, 5, 6], buckets, DEFAULT_BUCKET_TOLERANCE_DEG.to_radians())
    }

    /// Buckets gathered from the distinct `q2` values (rad), clustered by `tolerance`.
    pub fn buckets_from_angles(q2: impl IntoIterator<Item = f64>, tolerance: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for q in q2 {
            if !out.iter().any(|b| (b - q).abs() <= tolerance) {
                out.push(q);
            }
        }
        out
    }

    pub fn included(&self, joint: usize) -> bool {
        self.included[joint]
    }

    pub fn buckets(&self) -> &[f64] {
        &self.buckets
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Bucket whose angle lies within the tolerance of `q2`.
    pub fn bucket_of(&self, q2: f64) -> Option<usize> {
        self.buckets.iter().position(|b| (b - q2).abs() <= self.tolerance)
    }

    /// Column index of joint `j` (0-based), if it is a shared column.
    pub fn joint_column(&self, joint: usize) -> Option<usize> {
        self.columns.iter().position(|c| *c == Column::Joint(joint))
    }

    /// Column index of bucket `b`.
    pub fn bucket_column(&self, bucket: usize) -> Option<usize> {
        self.columns.iter().position(|c| *c == Column::Bucket(bucket))
    }

    pub fn label(&self, column: usize) -> String {
        match self.columns[column] {
            Column::Joint(j) => format!("k{}", j + 1),
            Column::Bucket(b) => format!("k2[{}]", b + 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_column_order() {
        let l = ParameterLayout::without_joint_one(vec![0.0, -0.5, -1.0]).unwrap();
        assert_eq!(l.len(), 7);
        let labels: Vec<String> = (0..l.len()).map(|i| l.label(i)).collect();
        assert_eq!(labels, ["k2[1]", "k2[2]", "k2[3]", "k3", "k4", "k5", "k6"]);
        assert_eq!(l.bucket_of(-0.5 + 1e-4), Some(1));
        assert_eq!(l.bucket_of(-0.7), None);
    }

    #[test]
    fn close_buckets_rejected() {
        let tol = 0.1f64.to_radians();
        assert!(ParameterLayout::new(&[2, 3], vec![0.0, 0.05f64.to_radians()], tol).is_err());
    }

    #[test]
    fn excluding_joint_two_drops_buckets() {
        let l = ParameterLayout::new(&[1, 3], vec![0.0], 1e-3).unwrap();
        assert_eq!(l.columns(), &[Column::Joint(0), Column::Joint(2)]);
    }

    #[test]
    fn bucket_clustering() {
        let b = ParameterLayout::buckets_from_angles([0.0, 1e-5, -0.4, -0.4, 0.0], 1e-3);
        assert_eq!(b, vec![0.0, -0.4]);
    }
}
