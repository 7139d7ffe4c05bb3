use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcMode {
    /// Drop Z and solve the 2×2 normal equations directly.
    Planar2d,
    /// Keep Z; resolve the rotation-axis ambiguity by minimal radii.
    Spatial3d,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentricFit {
    /// Common center (Z = 0 in planar mode).
    pub center: Vector3<f64>,
    /// One radius per point set.
    pub radii: Vec<f64>,
    /// Rotation axis (spatial mode only).
    pub axis: Option<Vector3<f64>>,
    /// RMS of `|p − p0| − R_j` over all points.
    pub rms: f64,
}

struct Moments {
    scatter: Matrix3<f64>,
    rhs: Vector3<f64>,
    mean: Vector3<f64>,
}

/// `Σ p̂ p̂ᵀ` and `½ Σ ŝ p̂` over all sets, each centered on its own mean.
fn moments(sets: &[Vec<Vector3<f64>>]) -> Moments {
    let mut scatter = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    let mut total = Vector3::zeros();
    let mut count = 0usize;
    for set in sets {
        let m = set.len() as f64;
        let mean = set.iter().sum::<Vector3<f64>>() / m;
        let s_mean = set.iter().map(|p| p.norm_squared()).sum::<f64>() / m;
        for p in set {
            let ph = p - mean;
            let sh = p.norm_squared() - s_mean;
            scatter += ph * ph.transpose();
            rhs += ph * (0.5 * sh);
            total += p;
            count += 1;
        }
    }
    Moments {
        scatter,
        rhs,
        mean: total / count as f64,
    }
}

fn radii_and_rms(sets: &[Vec<Vector3<f64>>], center: &Vector3<f64>) -> (Vec<f64>, f64) {
    let radii: Vec<f64> = sets
        .iter()
        .map(|set| (set.iter().map(|p| (p - center).norm_squared()).sum::<f64>() / set.len() as f64).sqrt())
        .collect();
    let mut sq = 0.0;
    let mut n = 0usize;
    for (set, r) in sets.iter().zip(&radii) {
        for p in set {
            sq += ((p - center).norm() - r).powi(2);
            n += 1;
        }
    }
    (radii, (sq / n as f64).sqrt())
}

/// Fits several point sets with circles sharing one center.
pub fn fit_concentric_arcs(sets: &[Vec<Vector3<f64>>], mode: ArcMode) -> Result<ConcentricFit> {
    if sets.is_empty() || sets.iter().any(|s| s.len() < 3) {
        return Err(Error::InsufficientData(
            "concentric fit needs at least one set with >= 3 points per set".into(),
        ));
    }
    match mode {
        ArcMode::Planar2d => {
            let flat: Vec<Vec<Vector3<f64>>> = sets
                .iter()
                .map(|s| s.iter().map(|p| Vector3::new(p.x, p.y, 0.0)).collect())
                .collect();
            let mom = moments(&flat);
            let scatter: Matrix2<f64> = mom.scatter.fixed_view::<2, 2>(0, 0).into();
            let rhs: Vector2<f64> = mom.rhs.fixed_rows::<2>(0).into();
            let sv = scatter.singular_values();
            if !(sv.min() > 1e-12 * sv.max()) {
                return Err(Error::DegenerateGeometry(
                    "scatter matrix has rank < 2 (points collinear or coincident)".into(),
                ));
            }
            let c = scatter
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::DegenerateGeometry("singular scatter matrix".into()))?;
            let center = Vector3::new(c.x, c.y, 0.0);
            let (radii, rms) = radii_and_rms(&flat, &center);
            Ok(ConcentricFit {
                center,
                radii,
                axis: None,
                rms,
            })
        }
        ArcMode::Spatial3d => {
            let mom = moments(sets);
            let eig = mom.scatter.symmetric_eigen();
            let mut order = [0usize, 1, 2];
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
            if !(l2 > 1e-12 * l1) {
                return Err(Error::DegenerateGeometry(
                    "scatter matrix has rank < 2; rotation axis is ambiguous".into(),
                ));
            }
            let axis: Vector3<f64> = eig.eigenvectors.column(order[2]).into();
            // p_c restricted to the arc plane (pseudo-inverse of the scatter)
            let mut pc = Vector3::zeros();
            for &i in &order[..2] {
                let v: Vector3<f64> = eig.eigenvectors.column(i).into();
                pc += v * (v.dot(&mom.rhs) / eig.eigenvalues[i]);
            }
            let nn = axis * axis.transpose();
            let center = (Matrix3::identity() - nn) * pc + nn * mom.mean;
            let (radii, rms) = radii_and_rms(sets, &center);
            Ok(ConcentricFit {
                center,
                radii,
                axis: Some(axis),
                rms,
            })
        }
    }
}
