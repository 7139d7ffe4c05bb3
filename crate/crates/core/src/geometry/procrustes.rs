use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Circle `p_i ≈ μ R u_i + t` with `u_i = (cos q_i, sin q_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleFit {
    pub radius: f64,
    pub center: Vector2<f64>,
    /// Proper rotation (`det = +1`).
    pub rotation: Matrix2<f64>,
    /// `√(F/m)` with `F` the summed squared residual.
    pub rms: f64,
    /// Summed squared residual `F`.
    pub objective: f64,
}

impl CircleFit {
    /// Angle of `R`: a point at reference angle `q` sits at `phase + q`.
    pub fn phase(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    pub fn predict(&self, angle: f64) -> Vector2<f64> {
        self.rotation * Vector2::new(angle.cos(), angle.sin()) * self.radius + self.center
    }
}

/// Angle-annotated circle fit.
///
/// Centers points and unit-circle references, takes `R = V Uᵀ` from the SVD
/// of `Σ û_i p̂_iᵀ = U Σ Vᵀ`, then `μ = Σ p̂ᵀRû / Σ ûᵀû` and
/// `t = mean(p) − μ R mean(u)`.
///
/// When the optimal orthogonal `R` is a reflection the angles run the other
/// way round the circle; this is reported as [`Error::AngleDirectionMismatch`]
/// instead of returning a reflected fit.
pub fn fit_circle_procrustes(points: &[Vector2<f64>], angles: &[f64]) -> Result<CircleFit> {
    let m = points.len();
    if m < 3 || angles.len() != m {
        return Err(Error::InsufficientData(format!(
            "circle fit needs >= 3 points with one angle each (got {m} points, {} angles)",
            angles.len()
        )));
    }
    let refs: Vec<Vector2<f64>> = angles.iter().map(|q| Vector2::new(q.cos(), q.sin())).collect();
    let p_mean = points.iter().sum::<Vector2<f64>>() / m as f64;
    let u_mean = refs.iter().sum::<Vector2<f64>>() / m as f64;

    let mut cross = Matrix2::zeros();
    let mut uu = 0.0;
    for (p, u) in points.iter().zip(&refs) {
        let ph = p - p_mean;
        let uh = u - u_mean;
        cross += uh * ph.transpose();
        uu += uh.norm_squared();
    }
    if uu <= 1e-12 * m as f64 {
        return Err(Error::RankDeficient {
            context: "all reference angles coincide".into(),
            null_directions: vec![],
        });
    }

    let svd = cross.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let rotation = v_t.transpose() * u.transpose();
    if rotation.determinant() < 0.0 {
        return Err(Error::AngleDirectionMismatch);
    }

    let mut pru = 0.0;
    for (p, u) in points.iter().zip(&refs) {
        pru += (p - p_mean).dot(&(rotation * (u - u_mean)));
    }
    let radius = pru / uu;
    if !(radius > 0.0) {
        return Err(Error::AngleDirectionMismatch);
    }
    let center = p_mean - rotation * u_mean * radius;

    let objective: f64 = points
        .iter()
        .zip(&refs)
        .map(|(p, u)| (p - rotation * u * radius - center).norm_squared())
        .sum();
    Ok(CircleFit {
        radius,
        center,
        rotation,
        rms: (objective / m as f64).sqrt(),
        objective,
    })
}

/// Plain algebraic (Kåsa) circle fit, ignoring any angle information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraicCircle {
    pub center: Vector2<f64>,
    pub radius: f64,
}

/// Least squares on `x² + y² + D x + E y + F = 0`.
pub fn fit_circle_algebraic(points: &[Vector2<f64>]) -> Result<AlgebraicCircle> {
    if points.len() < 3 {
        return Err(Error::InsufficientData("algebraic circle fit needs >= 3 points".into()));
    }
    let mean = points.iter().sum::<Vector2<f64>>() / points.len() as f64;
    let mut normal = nalgebra::Matrix3::zeros();
    let mut rhs = nalgebra::Vector3::zeros();
    for p in points {
        let d = p - mean;
        let row = nalgebra::Vector3::new(d.x, d.y, 1.0);
        normal += row * row.transpose();
        rhs -= row * d.norm_squared();
    }
    let sol = normal
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DegenerateGeometry("collinear points".into()))?;
    let center_local = Vector2::new(-sol.x / 2.0, -sol.y / 2.0);
    let radius = (center_local.norm_squared() - sol.z).sqrt();
    Ok(AlgebraicCircle {
        center: center_local + mean,
        radius,
    })
}
