//! Demo computations, run natively.

use spikelab_demo::plots::{domain, emden_profile, kr_landscape, spike_profile};

#[test]
fn emden_header_and_samples() {
    let v = emden_profile(2.0, 11).unwrap();
    assert_eq!(v.len(), 5 + 22);
    assert!((v[0] - 8.5341147712).abs() < 1e-6);
    assert_eq!(v[5], 0.0);
    assert_eq!(v[6], v[0]);
    assert!(v[26].abs() < 1e-8);
}

#[test]
fn spike_reaches_boundary_level() {
    let v = spike_profile(2.0, 0.02, 51).unwrap();
    assert!(v[0] > 0.0 && v[1] > 0.0);
    assert!(v[v.len() - 1].abs() < 1e-10);
    assert!(v[5] > 1.0);
}

#[test]
fn landscape_masks_exterior_and_is_symmetric() {
    let v = kr_landscape(domain(false, 0.0, 0.0), 20, 20, &[]).unwrap();
    assert!(v[0].is_nan());
    let at = |i: usize, j: usize| v[j * 20 + i];
    assert!((at(5, 9) - at(14, 10)).abs() < 1e-12);
    let r = kr_landscape(domain(true, 2.0, 1.0), 16, 8, &[0.5, 0.5]).unwrap();
    assert!(r.iter().all(|x| x.is_finite()));
}

#[test]
fn bad_inputs_are_errors() {
    assert!(emden_profile(0.5, 10).is_err());
    assert!(spike_profile(2.0, 0.02, 1).is_err());
    assert!(kr_landscape(domain(true, 2.0, 1.0), 10, 10, &[0.5]).is_err());
    assert!(kr_landscape(domain(true, 2.0, 1.0), 10, 10, &[5.0, 5.0]).is_err());
}
