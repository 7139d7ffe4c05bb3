mod common;

use common::*;
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use stiffcal::compensator::{CompensatorElastics, CompensatorGeometry, CompensatorParams};
use stiffcal::geometry::*;
use stiffcal::sim::{simulate_geometry_dataset, GeometryCell, GroundTruth};

fn tracker_data() -> MarkerDataset {
    read_marker_csv(std::fs::File::open(data_path("table1.csv")).unwrap()).unwrap()
}

fn truth_with(geometry: CompensatorGeometry, sigma: f64, seed: u64) -> GroundTruth {
    let robot = synthetic_robot();
    let compensator = CompensatorParams {
        geometry,
        elastics: CompensatorElastics::new(5e4, 458.0).unwrap(),
    };
    GroundTruth::new(robot.model, compensator, sigma, seed).unwrap()
}

fn reference_truth(sigma: f64, seed: u64) -> GroundTruth {
    let robot = synthetic_robot();
    GroundTruth::new(robot.model, robot.compensator.unwrap(), sigma, seed).unwrap()
}

#[test]
fn noiseless_round_trip_from_random_truths() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let q2: Vec<f64> = (0..9).map(|i| -140.0 + 17.5 * i as f64).collect();
    for _ in 0..20 {
        let l = rng.random_range(80.0..300.0);
        let ax = rng.random_range(400.0..900.0);
        let ay = rng.random_range(-250.0..250.0);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let offset = rng.random_range(0.0..6.0);
        let geom = CompensatorGeometry::with_angle_map(l, ax, ay, sign, offset).unwrap();
        let mut cell = GeometryCell::standard();
        cell.p2 = nalgebra::Vector3::new(rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0), 0.0);
        let data = simulate_geometry_dataset(&truth_with(geom, 0.0, 1), &q2, &cell).unwrap();
        let est = identify_point_estimate(&data).unwrap();
        assert!((est.l - l).abs() < 1e-9, "{} vs {l}", est.l);
        assert!((est.ax - ax).abs() < 1e-9);
        assert!((est.ay - ay).abs() < 1e-9);
        assert_eq!(est.direction, sign);
        let back = est.geometry().unwrap();
        for q in &q2 {
            let q = q.to_radians();
            assert!((back.gamma(q) - geom.gamma(q)).sin().abs() < 1e-9);
        }
    }
}

#[test]
fn exact_data_have_zero_half_widths() {
    let q2 = tracker_data().q2_deg().to_vec();
    let data = simulate_geometry_dataset(&reference_truth(0.0, 1), &q2, &GeometryCell::standard()).unwrap();
    let est = identify_compensator_geometry(&data, 100, 1).unwrap();
    assert_eq!(est.ci, [0.0; 3]);
}

#[test]
fn simulated_tracker_data_has_a_similar_residual_scale() {
    let real = identify_point_estimate(&tracker_data()).unwrap();
    let q2 = tracker_data().q2_deg().to_vec();
    let data = simulate_geometry_dataset(&reference_truth(0.03, 5), &q2, &GeometryCell::standard()).unwrap();
    let sim = identify_point_estimate(&data).unwrap();
    let ratio = sim.crank_fit.rms / real.crank_fit.rms;
    assert!((0.3..3.0).contains(&ratio), "sim {} real {}", sim.crank_fit.rms, real.crank_fit.rms);
}

#[test]
fn doubling_the_poses_shrinks_intervals_by_root_two() {
    let coarse: Vec<f64> = (0..10).map(|i| -140.0 + 14.0 * i as f64).collect();
    let fine: Vec<f64> = (0..20).map(|i| -140.0 + 7.0 * i as f64).collect();
    let width = |q2: &[f64]| {
        // average over datasets so one noise draw does not dominate
        let mut sum = [0.0; 3];
        for seed in 0..10 {
            let data = simulate_geometry_dataset(&reference_truth(0.05, seed), q2, &GeometryCell::standard()).unwrap();
            let ci = identify_compensator_geometry(&data, 200, seed).unwrap().ci;
            for p in 0..3 {
                sum[p] += ci[p];
            }
        }
        sum
    };
    let (a, b) = (width(&coarse), width(&fine));
    for p in 0..3 {
        let ratio = b[p] / a[p];
        assert!((ratio - 0.5f64.sqrt()).abs() < 0.12, "parameter {p}: {ratio}");
    }
}

#[test]
fn procrustes_center_beats_algebraic_fit_on_short_arcs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let center = Vector2::new(12.0, -30.0);
    let (mut p_err, mut a_err) = (0.0, 0.0);
    for _ in 0..100 {
        let span = rng.random_range(30.0..85.0f64).to_radians();
        let start = rng.random_range(-3.0..3.0);
        let angles: Vec<f64> = (0..8).map(|i| start + span * i as f64 / 7.0).collect();
        let points: Vec<Vector2<f64>> = angles
            .iter()
            .map(|a| center + Vector2::new(a.cos(), a.sin()) * 184.72 + Vector2::new(noise.sample(&mut rng), noise.sample(&mut rng)))
            .collect();
        p_err += (fit_circle_procrustes(&points, &angles).unwrap().center - center).norm_squared();
        a_err += (fit_circle_algebraic(&points).unwrap().center - center).norm_squared();
    }
    assert!(p_err <= a_err, "procrustes {} algebraic {}", (p_err / 100.0).sqrt(), (a_err / 100.0).sqrt());
}

#[test]
fn tracker_data_interval_width_is_plausible() {
    let est = identify_compensator_geometry(&tracker_data(), 1000, 7).unwrap();
    assert!(est.ci[0] > 0.06 / 3.0 && est.ci[0] < 0.06 * 3.0, "{:?}", est.ci);
}
