mod common;

use common::*;
use stiffcal::doe::PlanEntry;
use stiffcal::elasto::write_records_csv;
use stiffcal::geometry::write_marker_csv;
use stiffcal::model::Wrench;
use stiffcal::sim::*;
use stiffcal::stiffness::EquilibriumOptions;

fn truth(sigma: f64, seed: u64) -> GroundTruth {
    let robot = synthetic_robot();
    GroundTruth::new(robot.model, robot.compensator.unwrap(), sigma, seed).unwrap()
}

fn records_bytes(t: &GroundTruth) -> Vec<u8> {
    let plan = reference_plan();
    let records = simulate_deflection_records(t, &plan.entries[..6], 3, &EquilibriumOptions::default()).unwrap();
    let mut out = Vec::new();
    write_records_csv(&records, &mut out).unwrap();
    out
}

#[test]
fn same_seed_gives_identical_files() {
    let q2: Vec<f64> = (0..8).map(|i| -140.0 + 20.0 * i as f64).collect();
    let geometry = |seed| {
        let data = simulate_geometry_dataset(&truth(0.05, seed), &q2, &GeometryCell::standard()).unwrap();
        let mut out = Vec::new();
        write_marker_csv(&data, &mut out).unwrap();
        out
    };
    assert_eq!(geometry(7), geometry(7));
    assert_ne!(geometry(7), geometry(8));
    assert_eq!(records_bytes(&truth(0.05, 7)), records_bytes(&truth(0.05, 7)));
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let t = truth(0.05, 11);
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| records_bytes(&t));
    let many = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| records_bytes(&t));
    assert_eq!(single, many);
}

#[test]
fn zero_wrench_gives_pure_noise_with_doubled_variance() {
    let sigma = 0.05;
    let e = &reference_plan().entries[0];
    let entry = PlanEntry {
        q: e.q,
        wrench: Wrench::zeros(),
        bucket: 0,
    };
    let records = simulate_deflection_records(&truth(sigma, 3), &[entry], 1200, &EquilibriumOptions::default()).unwrap();
    let values: Vec<f64> = records
        .iter()
        .flat_map(|r| r.deflections.iter().flat_map(|d| d.iter().copied()))
        .collect();
    assert!(values.len() >= 10_000);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 4.0 * (2.0 * sigma * sigma / n).sqrt(), "mean {mean}");
    assert!((var / (2.0 * sigma * sigma) - 1.0).abs() < 0.05, "var {var}");
}

#[test]
fn noiseless_zero_wrench_gives_zero_deflection() {
    let e = &reference_plan().entries[4];
    let entry = PlanEntry {
        q: e.q,
        wrench: Wrench::zeros(),
        bucket: 0,
    };
    let records = simulate_deflection_records(&truth(0.0, 3), &[entry], 2, &EquilibriumOptions::default()).unwrap();
    for r in &records {
        for d in &r.deflections {
            assert_eq!(d.norm(), 0.0);
        }
    }
}

#[test]
fn records_are_entry_major_with_repeat_index() {
    let plan = reference_plan();
    let records = simulate_linear_records(&truth(0.05, 1), &plan.entries, 3).unwrap();
    assert_eq!(records.len(), 45);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r.repeat, i % 3 + 1);
        assert_eq!(r.q, plan.entries[i / 3].q);
        assert_eq!(r.deflections.len(), 3);
    }
}

#[test]
fn linear_and_nonlinear_generators_agree_to_first_order() {
    let mut plan = reference_plan();
    for e in &mut plan.entries {
        e.wrench *= 0.01;
    }
    let t = truth(0.0, 1);
    let linear = simulate_linear_records(&t, &plan.entries, 1).unwrap();
    let full = simulate_deflection_records(&t, &plan.entries, 1, &EquilibriumOptions::without_gravity()).unwrap();
    for (a, b) in linear.iter().zip(&full) {
        for (x, y) in a.deflections.iter().zip(&b.deflections) {
            assert!((x - y).norm() < 1e-3 * x.norm(), "{x} vs {y}");
        }
    }
}

#[test]
fn zero_repeats_rejected() {
    let plan = reference_plan();
    assert!(simulate_linear_records(&truth(0.0, 1), &plan.entries, 0).is_err());
    assert!(GroundTruth::new(synthetic_robot().model, synthetic_robot().compensator.unwrap(), -1.0, 0).is_err());
}
