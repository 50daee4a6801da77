use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;

use nhp_core::certificates::{
    certificate_catalog, Battery, CertificateFamily, Form, Origin, StorageFunction,
};
use nhp_core::composition::{
    compose_series, composite_certificate, composition_report_with, composition_theorem_report,
    CompositeMode, ComponentCertificates, Stage,
};
use nhp_core::signals::{make_signal, InputSignal, SignalSpec};
use nhp_core::systems::{cubic_hp, linear_hp, simulate, sinh_hp, SolverConfig};

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn downstream_alone(input: &InputSignal, times: &[f64]) -> Vec<f64> {
    let g = sinh_hp(1.0).unwrap();
    let tr = simulate(&g, input, &[0.0], &SolverConfig::rk45(10.0)).unwrap().output_trace();
    times.iter().map(|&t| tr.interpolate(t)).collect()
}

#[test]
fn slow_upstream_passes_its_input_through() {
    // for t << 1/lambda the filter state barely moves, so y1 ~ u
    let u = InputSignal::sinusoid(1.0, 1.0).unwrap();
    let err = |lambda: f64| {
        let s = compose_series(&linear_hp(lambda).unwrap(), &sinh_hp(1.0).unwrap());
        let tr = s.simulate(&u, &[0.0, 0.0], &SolverConfig::rk45(10.0)).unwrap();
        sup_diff(tr.composite.outputs(), &downstream_alone(&u, tr.composite.times()))
    };
    let (a, b) = (err(1e-3), err(1e-4));
    assert!(a < 2e-2, "{a}");
    assert!(b < a / 5.0, "{a} -> {b}");
}

#[test]
fn fast_upstream_differentiates() {
    // time-scale separation: at lambda = 1e3, y1 ~ du/dt / lambda
    let lambda = 1e3;
    let u = InputSignal::sinusoid(1.0, 1.0).unwrap();
    let s = compose_series(&linear_hp(lambda).unwrap(), &sinh_hp(1.0).unwrap());
    let tr = s.simulate(&u, &[0.0, 0.0], &SolverConfig::rk45(10.0)).unwrap();
    let derived = make_signal(SignalSpec::Sinusoid {
        amplitude: 1.0 / lambda,
        omega: 1.0,
        phase: FRAC_PI_2,
    })
    .unwrap();
    // past the upstream transient, which lasts a few multiples of 1/lambda
    let start = tr.composite.times().partition_point(|&t| t < 10.0 / lambda);
    let times = &tr.composite.times()[start..];
    let err = sup_diff(&tr.composite.outputs()[start..], &downstream_alone(&derived, times));
    assert!(err < 1e-2 / lambda, "{err}");
}

#[test]
fn weakened_upstream_certificate_fails_stage_a() {
    let lin = linear_hp(1.0).unwrap();
    let mut h = ComponentCertificates::catalog(&lin).unwrap();
    h.anhp = CertificateFamily::LinearAnhp.build(&lin, 1.5, Origin::Fitted).unwrap();
    h.nhp = CertificateFamily::LinearNhp.build(&lin, 0.8, Origin::Fitted).unwrap();
    let g = ComponentCertificates::catalog(&lin).unwrap();
    let rep = composition_report_with(&h, &g, &Battery::standard()).unwrap();
    assert!(!rep.components_valid);
    assert_eq!(rep.first_failing_stage, Some(Stage::A));
    assert!(!rep.all_pass);
}

#[test]
fn mixed_exponents_fall_back_to_measured_gains() {
    let rep = composition_theorem_report(
        &linear_hp(1.0).unwrap(),
        &cubic_hp(1.0).unwrap(),
        &Battery::constant_tail(20.0),
    )
    .unwrap();
    assert_eq!(rep.mode, CompositeMode::Empirical);
    assert!(rep.incompatibility.is_some());
    assert!(rep.stages.c.iter().all(Option::is_none));
    assert!(rep.measured_gain_nhp.iter().all(|g| g.is_finite()));
}

#[test]
fn measured_gains_respect_the_product_bound() {
    let rep = composition_theorem_report(&linear_hp(2.0).unwrap(), &linear_hp(0.5).unwrap(), &Battery::standard())
        .unwrap();
    let bound = rep.gamma_prod_nhp.unwrap();
    assert!(rep.measured_gain_nhp.iter().all(|&g| g <= bound * (1.0 + 1e-6)), "{:?}", rep.measured_gain_nhp);
    let bound = rep.gamma_prod_anhp.unwrap();
    assert!(rep.measured_gain_anhp.iter().all(|&g| g <= bound * (1.0 + 1e-6)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composite_supply_dominates_the_component_sum(
        l1 in 0.5f64..2.0,
        l2 in 0.5f64..2.0,
        du in -5.0f64..5.0,
        dy1 in -4.0f64..4.0,
        y2 in -3.0f64..3.0,
        dy2 in -3.0f64..3.0,
    ) {
        let h = certificate_catalog(&linear_hp(l1).unwrap(), Form::Anhp).unwrap();
        for form in [Form::Nhp, Form::Anhp] {
            let g = certificate_catalog(&sinh_hp(l2).unwrap(), form).unwrap();
            let c = composite_certificate(&h, &g, 4.0).unwrap();
            let w = match &c.storage {
                StorageFunction::Series { upstream_weight, .. } => *upstream_weight,
                _ => unreachable!(),
            };
            // the intermediate terms of w s_H1 + s_G cancel to a nonnegative remainder
            let parts = w * h.supply.eval(du, 0.0, dy1) + g.supply.eval(dy1, y2, dy2);
            let whole = c.supply.eval(du, y2, dy2);
            prop_assert!(whole >= parts - 1e-9 * (1.0 + whole.abs()), "{whole} < {parts}");
        }
    }

    #[test]
    fn composite_storage_is_the_weighted_sum(x1 in -3.0f64..3.0, x2 in -3.0f64..3.0, u in -3.0f64..3.0) {
        let lin = linear_hp(1.0).unwrap();
        let h = certificate_catalog(&lin, Form::Anhp).unwrap();
        let g = certificate_catalog(&lin, Form::Nhp).unwrap();
        let c = composite_certificate(&h, &g, 3.0).unwrap();
        let y1 = lin.output(&[x1], u);
        let expected = 1.0 * h.storage.eval(&lin, &[x1], u) + g.storage.eval(&lin, &[x2], y1);
        let got = c.storage.eval(&c.system, &[x1, x2], u);
        prop_assert!((got - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
    }
}
