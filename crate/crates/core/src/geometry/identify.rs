use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::concentric::{fit_concentric_arcs, ArcMode, ConcentricFit};
use super::dataset::MarkerDataset;
use super::procrustes::{fit_circle_procrustes, CircleFit};
use crate::compensator::CompensatorGeometry;
use crate::error::{Error, Result};

/// Identified compensator geometry in the tracker frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatorGeometryEstimate {
    pub l: f64,
    pub ax: f64,
    pub ay: f64,
    /// ±3σ half-widths for `(L, a_x, a_y)`, mm.
    pub ci: [f64; 3],
    /// Crank-circle center (joint-2 axis), mm.
    pub p2: Vector2<f64>,
    /// Spring-pivot center, mm.
    pub p0: Vector2<f64>,
    /// `+1` when the crank marker turns with `q2`, `-1` when against.
    pub direction: f64,
    /// Tracker-frame angle of `P1 − P2` at `q2 = 0`, rad.
    pub phase: f64,
    pub crank_fit: CircleFit,
    pub arc_fit: ConcentricFit,
}

impl CompensatorGeometryEstimate {
    /// Geometry with the angle map implied by the crank fit.
    pub fn geometry(&self) -> Result<CompensatorGeometry> {
        CompensatorGeometry::with_angle_map(self.l, self.ax, self.ay, self.direction, self.phase)
    }

    pub fn values(&self) -> [f64; 3] {
        [self.l, self.ax, self.ay]
    }
}

fn xy(p: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(p.x, p.y)
}

fn fit_tracks(
    q2: &[f64],
    crank: &[Vector2<f64>],
    satellites: &[Vec<Vector3<f64>>],
) -> Result<CompensatorGeometryEstimate> {
    let (crank_fit, direction) = match fit_circle_procrustes(crank, q2) {
        Ok(fit) => (fit, 1.0),
        Err(Error::AngleDirectionMismatch) => {
            let flipped: Vec<f64> = q2.iter().map(|q| -q).collect();
            (fit_circle_procrustes(crank, &flipped)?, -1.0)
        }
        Err(e) => return Err(e),
    };
    let arc_fit = fit_concentric_arcs(satellites, ArcMode::Planar2d)?;
    let p2 = crank_fit.center;
    let p0 = xy(&arc_fit.center);
    let a = p2 - p0;
    Ok(CompensatorGeometryEstimate {
        l: crank_fit.radius,
        ax: a.x,
        ay: a.y,
        ci: [0.0; 3],
        p2,
        p0,
        direction,
        phase: crank_fit.phase(),
        crank_fit,
        arc_fit,
    })
}

/// Two-step identification without confidence intervals (Z ignored).
pub fn identify_point_estimate(data: &MarkerDataset) -> Result<CompensatorGeometryEstimate> {
    let crank: Vec<Vector2<f64>> = data.crank().iter().map(xy).collect();
    fit_tracks(&data.q2_rad(), &crank, data.satellites())
}

/// Point estimate plus ±3σ half-widths from `n_samples` resampled datasets.
pub fn identify_compensator_geometry(
    data: &MarkerDataset,
    n_samples: usize,
    seed: u64,
) -> Result<CompensatorGeometryEstimate> {
    let mut est = identify_point_estimate(data)?;
    est.ci = confidence_intervals_geometry(data, &est, n_samples, seed)?;
    Ok(est)
}

/// Parametric residual resampling.
///
/// Noise levels come from the two fits: `σ₁² = F/(2m − 4)` for the crank
/// circle and the radial residual variance (dof-corrected) for the arcs.
/// Each sample perturbs the fitted points, refits, and the sample standard
/// deviation of each parameter times 3 is returned. Sample `i` draws from a
/// generator seeded with `seed + i`, so results do not depend on threading.
pub fn confidence_intervals_geometry(
    data: &MarkerDataset,
    est: &CompensatorGeometryEstimate,
    n_samples: usize,
    seed: u64,
) -> Result<[f64; 3]> {
    if n_samples < 100 {
        return Err(Error::invalid("n_samples", "at least 100 resamples required"));
    }
    let m = data.len();
    let k = data.satellites().len();
    let sigma_crank = (est.crank_fit.objective / (2 * m - 4) as f64).sqrt();
    let dof = (k * m) as isize - 2 - k as isize;
    if dof <= 0 {
        return Err(Error::InsufficientData("too few satellite points for a noise estimate".into()));
    }
    let center = est.arc_fit.center.xy();
    let radial_sq: f64 = data
        .satellites()
        .iter()
        .zip(&est.arc_fit.radii)
        .flat_map(|(set, r)| set.iter().map(move |p| ((xy(p) - center).norm() - r).powi(2)))
        .sum();
    let sigma_arc = (radial_sq / dof as f64).sqrt();
    if sigma_crank < 1e-10 && sigma_arc < 1e-10 {
        return Ok([0.0; 3]);
    }

    let q2 = data.q2_rad();
    let crank_clean: Vec<Vector2<f64>> = q2.iter().map(|q| est.crank_fit.predict(est.direction * q)).collect();
    let sat_clean: Vec<Vec<Vector2<f64>>> = data
        .satellites()
        .iter()
        .zip(&est.arc_fit.radii)
        .map(|(set, r)| {
            set.iter()
                .map(|p| {
                    let d = xy(p) - center;
                    center + d * (r / d.norm())
                })
                .collect()
        })
        .collect();

    let draws: Vec<Option<[f64; 3]>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let n1 = Normal::new(0.0, sigma_crank).ok()?;
            let n2 = Normal::new(0.0, sigma_arc).ok()?;
            let crank: Vec<Vector2<f64>> = crank_clean
                .iter()
                .map(|p| p + Vector2::new(n1.sample(&mut rng), n1.sample(&mut rng)))
                .collect();
            let sats: Vec<Vec<Vector3<f64>>> = sat_clean
                .iter()
                .map(|set| {
                    set.iter()
                        .map(|p| Vector3::new(p.x + n2.sample(&mut rng), p.y + n2.sample(&mut rng), 0.0))
                        .collect()
                })
                .collect();
            fit_tracks(&q2, &crank, &sats).ok().map(|e| e.values())
        })
        .collect();
    let ok: Vec<[f64; 3]> = draws.into_iter().flatten().collect();
    if ok.len() * 10 < n_samples * 9 {
        return Err(Error::DegenerateGeometry(format!(
            "only {} of {n_samples} resampled fits succeeded",
            ok.len()
        )));
    }
    let n = ok.len() as f64;
    let mut out = [0.0; 3];
    for (p, slot) in out.iter_mut().enumerate() {
        let mean = ok.iter().map(|v| v[p]).sum::<f64>() / n;
        let var = ok.iter().map(|v| (v[p] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        *slot = 3.0 * var.sqrt();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::read_marker_csv;

    fn tracker_data() -> MarkerDataset {
        let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/table1.csv")).unwrap();
        read_marker_csv(text.as_bytes()).unwrap()
    }

    #[test]
    fn tracker_data_geometry() {
        let est = identify_point_estimate(&tracker_data()).unwrap();
        assert!((est.l - 184.72).abs() < 0.2, "L = {}", est.l);
        assert!((est.ax - 685.93).abs() < 2.0, "ax = {}", est.ax);
        assert!((est.ay - 120.30).abs() < 2.0, "ay = {}", est.ay);
        assert_eq!(est.direction, -1.0);
    }

    #[test]
    fn tracker_data_center_near_circumcenter() {
        let d = tracker_data();
        let p: Vec<Vector2<f64>> = [0, 3, 5].iter().map(|&i| xy(&d.crank()[i])).collect();
        // circumcenter of three points
        let (a, b, c) = (p[0], p[1], p[2]);
        let den = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
        let ux = (a.norm_squared() * (b.y - c.y) + b.norm_squared() * (c.y - a.y) + c.norm_squared() * (a.y - b.y)) / den;
        let uy = (a.norm_squared() * (c.x - b.x) + b.norm_squared() * (a.x - c.x) + c.norm_squared() * (b.x - a.x)) / den;
        let est = identify_point_estimate(&d).unwrap();
        assert!((est.p2 - Vector2::new(ux, uy)).norm() < 0.5, "{} vs ({ux}, {uy})", est.p2);
    }

    #[test]
    fn translation_equivariance() {
        let d = tracker_data();
        let v = Vector3::new(123.0, -45.0, 6.0);
        let a = identify_point_estimate(&d).unwrap();
        let b = identify_point_estimate(&d.translated(&v)).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!((b.p2 - a.p2 - v.xy()).norm() < 1e-8);
        assert!((b.p0 - a.p0 - v.xy()).norm() < 1e-8);
    }

    #[test]
    fn too_few_resamples_rejected() {
        let d = tracker_data();
        let est = identify_point_estimate(&d).unwrap();
        assert!(confidence_intervals_geometry(&d, &est, 50, 1).is_err());
    }

    #[test]
    fn resampling_is_deterministic() {
        let d = tracker_data();
        let a = identify_compensator_geometry(&d, 200, 11).unwrap();
        let b = identify_compensator_geometry(&d, 200, 11).unwrap();
        assert_eq!(a.ci, b.ci);
        assert!(a.ci.iter().all(|c| *c > 0.0));
    }
}
