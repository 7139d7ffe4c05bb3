//! Virtual robot cell: synthetic tracker datasets from known parameters.

use nalgebra::{Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::compensator::CompensatorParams;
use crate::doe::PlanEntry;
use crate::elasto::DeflectionRecord;
use crate::error::{Error, Result};
use crate::geometry::MarkerDataset;
use crate::model::{ManipulatorModel, Wrench};
use crate::stiffness::{predict_marker_deflections, solve_equilibrium, EquilibriumOptions, ToolLoading};

/// Ground-truth robot, compensator and measurement noise.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Manipulator with its true compliances and marker layout.
    pub model: ManipulatorModel,
    pub compensator: CompensatorParams,
    /// Per-coordinate measurement noise, mm.
    pub sigma: f64,
    pub seed: u64,
}

impl GroundTruth {
    pub fn new(model: ManipulatorModel, compensator: CompensatorParams, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("sigma_mm", "must be >= 0"));
        }
        Ok(Self {
            model,
            compensator,
            sigma,
            seed,
        })
    }

    fn noise(&self) -> Option<Normal<f64>> {
        (self.sigma > 0.0).then(|| Normal::new(0.0, self.sigma).expect("finite sigma"))
    }
}

/// Where the compensator sits in the tracker frame and where the satellite
/// markers are mounted.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryCell {
    /// Joint-2 axis point `P2`, tracker frame, mm.
    pub p2: Vector3<f64>,
    /// Satellite offsets in the spring-housing frame: origin `P0`, x toward
    /// `P1`, z along the joint axis. mm.
    pub satellites: Vec<Vector3<f64>>,
    /// Emit Z coordinates.
    pub with_z: bool,
}

impl GeometryCell {
    /// `P2` at the origin, two satellites like the tracker experiment.
    pub fn standard() -> Self {
        Self {
            p2: Vector3::zeros(),
            satellites: vec![Vector3::new(-200.0, 50.0, 0.0), Vector3::new(-150.0, -100.0, 0.0)],
            with_z: false,
        }
    }
}

/// Crank marker on the circle of radius `L` about `P2`; satellites rotating
/// rigidly about `P0 = P2 − a` with the spring direction `P1 − P0`.
///
/// The crank angle follows the compensator angle map, so a fit recovers the
/// same `(direction, phase)`. Noise is drawn sequentially from the truth seed.
pub fn simulate_geometry_dataset(truth: &GroundTruth, q2_deg: &[f64], cell: &GeometryCell) -> Result<MarkerDataset> {
    let geom = &truth.compensator.geometry;
    let p0 = cell.p2 - Vector3::new(geom.ax(), geom.ay(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(truth.seed);
    let noise = truth.noise();
    let mut jitter = |p: Vector3<f64>| -> Vector3<f64> {
        match &noise {
            Some(n) => {
                let z = if cell.with_z { n.sample(&mut rng) } else { 0.0 };
                p + Vector3::new(n.sample(&mut rng), n.sample(&mut rng), z)
            }
            None => p,
        }
    };
    let mut crank = Vec::with_capacity(q2_deg.len());
    let mut satellites = vec![Vec::with_capacity(q2_deg.len()); cell.satellites.len()];
    for q2 in q2_deg {
        let psi = geom.compensator_angle(q2.to_radians());
        let p1 = cell.p2 + Vector3::new(psi.cos(), psi.sin(), 0.0) * geom.l();
        let spring = p1 - p0;
        let beta = spring.y.atan2(spring.x);
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), beta);
        crank.push(jitter(p1));
        for (track, offset) in satellites.iter_mut().zip(&cell.satellites) {
            track.push(jitter(p0 + rot * offset));
        }
    }
    if !cell.with_z {
        crank.iter_mut().chain(satellites.iter_mut().flatten()).for_each(|p| p.z = 0.0);
    }
    MarkerDataset::new(q2_deg.to_vec(), crank, satellites, cell.with_z)
}

/// Loaded-deflection records from the nonlinear equilibrium.
///
/// For each entry, marker positions are computed at the gravity-loaded
/// equilibrium ("before") and with the entry wrench added ("after"); each
/// virtual measurement gets independent noise, so the difference has
/// variance `2σ²` per coordinate. Entry `e`, repeat `r` (1-based) draws from
/// a generator seeded with `seed + e·repeats + (r − 1)`. Records are ordered
/// entry-major.
pub fn simulate_deflection_records(
    truth: &GroundTruth,
    plan: &[PlanEntry],
    repeats: usize,
    options: &EquilibriumOptions,
) -> Result<Vec<DeflectionRecord>> {
    if repeats == 0 {
        return Err(Error::invalid("repeats", "must be >= 1"));
    }
    let model = &truth.model;
    let comp = Some(&truth.compensator);
    let solved: Vec<MarkerPair> = plan
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let solve = |w: Wrench| {
                solve_equilibrium(model, comp, &e.q, ToolLoading::Wrench(w), options)
                    .and_then(|s| s.into_converged())
                    .map_err(|err| Error::Record {
                        index: i + 1,
                        message: format!("equilibrium failed: {err}"),
                    })
            };
            let before = solve(Wrench::zeros())?;
            let after = solve(e.wrench)?;
            Ok((
                model.marker_positions(&e.q, &before.theta),
                model.marker_positions(&e.q, &after.theta),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(add_measurement_noise(truth, plan, &solved, repeats))
}


/// Records from the linear model `Δp = A(q, F) k(q)` at `θ = 0`, with the
/// same noise and seeding as [`simulate_deflection_records`]. This is the
/// model the identification inverts, so noiseless data are recovered to
/// round-off.
pub fn simulate_linear_records(truth: &GroundTruth, plan: &[PlanEntry], repeats: usize) -> Result<Vec<DeflectionRecord>> {
    if repeats == 0 {
        return Err(Error::invalid("repeats", "must be >= 1"));
    }
    let solved: Vec<(Vec<Vector3<f64>>, Vec<Vector3<f64>>)> = plan
        .iter()
        .map(|e| {
            let after = predict_marker_deflections(&truth.model, Some(&truth.compensator), &e.q, &e.wrench);
            (vec![Vector3::zeros(); after.len()], after)
        })
        .collect();
    Ok(add_measurement_noise(truth, plan, &solved, repeats))
}

type MarkerPair = (Vec<Vector3<f64>>, Vec<Vector3<f64>>);

fn add_measurement_noise(truth: &GroundTruth, plan: &[PlanEntry], solved: &[MarkerPair], repeats: usize) -> Vec<DeflectionRecord> {
    let noise = truth.noise();
    plan.par_iter()
        .zip(solved)
        .enumerate()
        .flat_map_iter(|(i, (e, (before, after)))| {
            (1..=repeats).map(move |r| {
                let mut rng = ChaCha8Rng::seed_from_u64(truth.seed.wrapping_add((i * repeats + r - 1) as u64));
                let mut draw = || match &noise {
                    Some(n) => Vector3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng)),
                    None => Vector3::zeros(),
                };
                let deflections = before
                    .iter()
                    .zip(after)
                    .map(|(b, a)| {
                        let b = b + draw();
                        let a = a + draw();
                        a - b
                    })
                    .collect();
                DeflectionRecord {
                    q: e.q,
                    wrench: e.wrench,
                    deflections,
                    repeat: r,
                }
            })
        })
        .collect()
}
