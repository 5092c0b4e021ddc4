use std::time::Instant;

use jjpump::model::NetworkModel;
use jjpump::oracle::compare_meanfield;
use jjpump::C;

fn two_mode(k: f64, ec: f64, gamma_up: [f64; 2]) -> NetworkModel<f64> {
    let mut m = NetworkModel::uncoupled(gamma_up.to_vec(), 1.0);
    m.tunneling[(0, 1)] = C::new(k, 0.0);
    m.tunneling[(1, 0)] = C::new(k, 0.0);
    m.capacitance[0][1] = ec;
    m.capacitance[1][0] = ec;
    m
}

#[test]
fn mean_field_is_exact_without_charging() {
    let start = Instant::now();
    let rep = compare_meanfield(&two_mode(0.5, 0.0, [1.0, 0.25]), 10.0, 28, 1e-10).unwrap();
    println!("cutoff 28: max_dev {:e}, leak {:e}, {:?}", rep.max_dev, rep.truncation_leak, start.elapsed());
    assert!(rep.max_dev < 1e-6);
    assert!(rep.max_trace_error < 1e-9);
}

#[test]
fn closure_error_shrinks_with_charging_energy() {
    let mut devs = Vec::new();
    for ec in [0.05, 0.02, 0.01] {
        let rep = compare_meanfield(&two_mode(0.5, ec, [1.0, 0.25]), 10.0, 24, 1e-9).unwrap();
        println!("Ec {ec}: max_dev {:e}, covariance {:e}", rep.max_dev, rep.covariance_max);
        assert!(rep.max_dev.is_finite() && rep.max_dev > 0.0);
        devs.push(rep.max_dev);
    }
    assert!(devs[0] > devs[1] && devs[1] > devs[2], "{devs:?}");
}
