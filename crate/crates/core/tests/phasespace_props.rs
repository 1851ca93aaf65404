//! Lift and projection maps on random and band-limited states.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use quasilocal::phasespace::{apply_px, apply_x, lift, project_p, project_r, Grid, MomentumFunction, WaveFunction};

fn random_state(grid: Grid, parts: &[(f64, f64)]) -> WaveFunction {
    let values = parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
    WaveFunction::new(grid, values).unwrap().normalized()
}

/// Independent transform by direct summation.
fn xi_direct(psi: &WaveFunction) -> Vec<Complex64> {
    let g = psi.grid;
    let c = g.dr / (2.0 * PI * g.hbar).sqrt();
    (0..g.points)
        .map(|k| {
            (0..g.points)
                .map(|j| psi.values[j] * Complex64::from_polar(c, -g.p(k) * g.r(j) / g.hbar))
                .sum()
        })
        .collect()
}

/// `-iħ ∂Ψ` by multiplying the directly computed spectrum by `p` and summing back.
fn spectral_derivative(psi: &WaveFunction) -> Vec<Complex64> {
    let g = psi.grid;
    let xi = xi_direct(psi);
    let c = g.dp() / (2.0 * PI * g.hbar).sqrt();
    (0..g.points)
        .map(|j| {
            (0..g.points)
                .map(|k| xi[k] * g.p(k) * Complex64::from_polar(c, g.p(k) * g.r(j) / g.hbar))
                .sum()
        })
        .collect()
}

fn band_limited(grid: Grid, sigma: f64, r0: f64, p0: f64) -> WaveFunction {
    WaveFunction::from_fn(grid, |r| {
        let x = r - r0;
        Complex64::from_polar((-x * x / (4.0 * sigma * sigma)).exp(), p0 * r / grid.hbar)
    })
    .unwrap()
    .normalized()
}

fn parts() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 256)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn round_trip_recovers_state(p in parts()) {
        let psi = random_state(Grid::default(), &p);
        let back = project_r(&lift(&psi).unwrap());
        prop_assert!(back.max_abs_diff(&psi) < 1e-10);
        prop_assert!((psi.fourier().norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn momentum_ray_is_the_spectrum(p in parts()) {
        let g = Grid::default();
        let psi = random_state(g, &p);
        let xi = MomentumFunction::new(g, xi_direct(&psi)).unwrap();
        prop_assert!(project_p(&lift(&psi).unwrap()).ray_distance(&xi) <= 1e-10);
    }

    #[test]
    fn position_operator_is_exact(p in parts()) {
        let g = Grid::default();
        let psi = random_state(g, &p);
        let x = project_r(&apply_x(&lift(&psi).unwrap()));
        for j in 0..g.points {
            prop_assert!((x.values[j] - psi.values[j] * g.r(j)).norm() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn momentum_operator_matches_spectral_derivative(
        sigma in 3.0..10.0f64, r0 in -30.0..30.0f64, p0 in -1.2..1.2f64,
    ) {
        let g = Grid::default();
        let psi = band_limited(g, sigma, r0, p0);
        prop_assert!(psi.band_tail_weight() < 1e-12);
        let got = project_r(&apply_px(&lift(&psi).unwrap()));
        for (a, b) in got.values.iter().zip(spectral_derivative(&psi)) {
            prop_assert!((a - b).norm() < 1e-9);
        }
        // Analytic derivative of the Gaussian packet.
        for j in 0..g.points {
            let x = g.r(j) - r0;
            let want = psi.values[j] * Complex64::new(p0, g.hbar * x / (2.0 * sigma * sigma));
            prop_assert!((got.values[j] - want).norm() < 1e-9, "j={}", j);
        }
    }

    #[test]
    fn momentum_ray_is_linear(a in 3.0..8.0f64, b in 3.0..8.0f64, shift in -40.0..40.0f64) {
        let g = Grid::default();
        let p1 = band_limited(g, a, shift, 0.3);
        let p2 = band_limited(g, b, -shift, -0.5);
        let sum = WaveFunction::new(g, p1.values.iter().zip(&p2.values).map(|(x, y)| x + y).collect())
            .unwrap()
            .normalized();
        let xi: Vec<Complex64> = xi_direct(&p1).iter().zip(xi_direct(&p2)).map(|(x, y)| x + y).collect();
        let xi = MomentumFunction::new(g, xi).unwrap();
        prop_assert!(project_p(&lift(&sum).unwrap()).ray_distance(&xi) <= 1e-10);
    }
}
