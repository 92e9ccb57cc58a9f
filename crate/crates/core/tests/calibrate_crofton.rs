//! Fixes `CROFTON_CALIBRATION`: random great circles at oversample 8 must
//! average 2π. Run with `--nocapture` to see the raw factor.

use std::f64::consts::PI;

use nodal_core::census::{nodal_length, CROFTON_CALIBRATION};
use nodal_core::field::{eval_grid, sample_trial, HarmonicCoeffs, SphereGridSpec};
use nodal_core::legendre::legendre_zeros;

#[test]
fn great_circles_measure_two_pi() {
    let spec = SphereGridSpec::for_degree(1, 8);
    let trials = 400;
    let mut worst = 0.0f64;
    let mut sum = 0.0;
    for i in 0..trials {
        let c = sample_trial(1, 0xc0ff, i);
        let g = eval_grid(&c, spec, false).unwrap();
        let len = nodal_length(&g);
        sum += len;
        worst = worst.max((len / (2.0 * PI) - 1.0).abs());
    }
    let mean = sum / trials as f64;
    let raw = mean / CROFTON_CALIBRATION / (2.0 * PI);
    println!("raw great-circle ratio {raw:.6}, worst relative error {worst:.4}");
    assert!((mean / (2.0 * PI) - 1.0).abs() < 0.005);
    assert!(worst < 0.02);
}

#[test]
fn zonal_latitude_circles() {
    for n in [5usize, 10, 50, 100] {
        let g = eval_grid(
            &HarmonicCoeffs::zonal(n),
            SphereGridSpec::for_degree(n, 8),
            false,
        )
        .unwrap();
        let exact: f64 = legendre_zeros(n)
            .unwrap()
            .iter()
            .map(|t| 2.0 * PI * t.sin())
            .sum();
        let len = nodal_length(&g);
        println!("n={n} zonal length {len:.5} exact {exact:.5}");
        assert!((len / exact - 1.0).abs() < 0.03);
    }
}
