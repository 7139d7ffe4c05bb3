mod common;

use proptest::prelude::*;
use stiffcal::compensator::*;

fn params(l: f64, ax: f64, ay: f64, sign: f64, offset: f64, kc: f64, s0: f64) -> CompensatorParams {
    CompensatorParams {
        geometry: CompensatorGeometry::with_angle_map(l, ax, ay, sign, offset).unwrap(),
        elastics: CompensatorElastics::new(kc, s0).unwrap(),
    }
}

fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn draw() -> impl Strategy<Value = (CompensatorParams, f64)> {
    (
        50.0..300.0f64,
        400.0..900.0f64,
        -200.0..200.0f64,
        prop::bool::ANY,
        -3.0..3.0f64,
        1e3..1e5f64,
        200.0..900.0f64,
        -2.6..0.2f64,
    )
        .prop_map(|(l, ax, ay, flip, offset, kc, s0, q2)| {
            (params(l, ax, ay, if flip { -1.0 } else { 1.0 }, offset, kc, s0), q2)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn stiffness_increment_is_minus_torque_gradient((p, q2) in draw()) {
        let k0 = 3e9;
        let scale = p.elastics.kc * p.geometry.a() * p.geometry.l();
        let analytic = equivalent_joint_stiffness(&p, k0, q2).stiffness - k0;
        let numeric = -central(|q| compensator_torque(&p, q), q2, 1e-5);
        prop_assert!((analytic - numeric).abs() <= 1e-6 * analytic.abs().max(1e-3 * scale),
            "analytic {analytic} numeric {numeric}");
    }

    #[test]
    fn torque_is_minus_energy_gradient((p, q2) in draw()) {
        let numeric = -central(|q| spring_energy(&p, q), q2, 1e-5);
        let torque = compensator_torque(&p, q2);
        let scale = p.elastics.kc * p.geometry.a() * p.geometry.l();
        prop_assert!((torque - numeric).abs() <= 1e-6 * torque.abs().max(1e-3 * scale));
    }

    #[test]
    fn spring_length_stays_between_a_minus_l_and_a_plus_l((p, q2) in draw()) {
        let g = &p.geometry;
        let s = spring_length(g, q2);
        prop_assert!(s >= g.a() - g.l() - 1e-9 && s <= g.a() + g.l() + 1e-9);
    }
}

#[test]
fn synthetic_compensator_stiffens_joint_two_over_the_working_range() {
    let robot = common::synthetic_robot();
    let comp = robot.compensator.unwrap();
    let k0 = 1.0 / robot.model.compliances()[1];
    for q2 in linspace(-140f64.to_radians(), 0.0, 141) {
        let eq = equivalent_joint_stiffness(&comp, k0, q2);
        assert!(eq.eta > 0.0, "q2 {q2}: eta {}", eq.eta);
        assert!(1.0 / eq.stiffness < 1.0 / k0);
    }
}

#[test]
fn reference_geometry_spring_length_at_zero() {
    let g = CompensatorGeometry::new(184.72, 685.93, 120.30).unwrap();
    assert!((g.a() - 696.40).abs() < 0.01);
    assert!((g.alpha() - 0.1736).abs() < 1e-4);
    assert!((spring_length(&g, 0.0) - 878.9).abs() < 0.1);
}
