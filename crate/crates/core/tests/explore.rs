use pucci_core::integrator::IntegrationControls;
use pucci_core::params::*;
use pucci_core::exponents::*;

#[test]
fn show_estimate() {
    let ps = ProblemParams::new(1.0, 2.0, 6.0, Operator::Minus).unwrap();
    let est = estimate(&ps, 1e-3, None, &IntegrationControls::default()).unwrap();
    println!("p* = [{:.6}, {:.6}]  p~ = [{:.6}, {:.6}] (cycles: {}, from_cycles: {})",
        est.p_star.lo, est.p_star.hi, est.p_tilde.lo, est.p_tilde.hi,
        est.cycles_detected, est.p_tilde_from_cycles);
    println!("bounds: lower={} upper+={:.4} upper-={}", est.bounds.lower, est.bounds.upper_plus_form, est.bounds.upper_minus_form);
    println!("consistency: {:?}", est.consistency);
}
