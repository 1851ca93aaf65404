//! Two-slit and four-hole patterns against analytic oracles.

use std::f64::consts::PI;

use quasilocal::amplitude::Composition;
use quasilocal::pathint::{
    dark_region_finder, four_hole_table, group_runs, screen_pattern, x_hole_distribution, Geometry2Slit,
    GeometryFourHole, OpenSlits,
};

/// Fraunhofer prediction `cos²(π d x / (λ L₂))` times the numerical
/// single-slit envelope, compared over the central five fringes.
fn fraunhofer_rms(g: &Geometry2Slit) -> f64 {
    let coh = screen_pattern(g, Composition::Coherent).unwrap();
    let left = screen_pattern(&Geometry2Slit { open: OpenSlits::LeftOnly, ..g.clone() }, Composition::Coherent).unwrap();
    let right = screen_pattern(&Geometry2Slit { open: OpenSlits::RightOnly, ..g.clone() }, Composition::Coherent).unwrap();
    let lambda = g.wavelength();
    let window = 2.5 * g.fringe_spacing();
    let idx: Vec<usize> = (0..g.bins).filter(|&i| coh.centers[i].abs() <= window).collect();
    let oracle: Vec<f64> = idx
        .iter()
        .map(|&i| {
            let x = coh.centers[i];
            let envelope = 0.5 * (left.probabilities[i] + right.probabilities[i]);
            (PI * g.separation * x / (lambda * g.screen_distance)).cos().powi(2) * envelope
        })
        .collect();
    let measured: Vec<f64> = idx.iter().map(|&i| coh.probabilities[i]).collect();
    let (so, sm): (f64, f64) = (oracle.iter().sum(), measured.iter().sum());
    let num: f64 = oracle.iter().zip(&measured).map(|(o, m)| (o / so - m / sm).powi(2)).sum();
    let den: f64 = oracle.iter().map(|o| (o / so).powi(2)).sum();
    (num / den).sqrt()
}

#[test]
fn coherent_pattern_matches_fraunhofer() {
    let rms = fraunhofer_rms(&Geometry2Slit::default());
    assert!(rms < 0.02, "relative RMS {rms}");
}

#[test]
fn dark_regions_sit_on_fraunhofer_zeros() {
    let g = Geometry2Slit::default();
    let coh = screen_pattern(&g, Composition::Coherent).unwrap();
    let wp = screen_pattern(&g, Composition::Incoherent).unwrap();
    let dark = dark_region_finder(&coh, &wp, 0.01).unwrap();
    let runs = group_runs(&dark);
    let spacing = g.fringe_spacing();
    let zeros: Vec<f64> = (-20..20)
        .map(|n| (n as f64 + 0.5) * spacing)
        .filter(|x| x.abs() <= g.screen_half_width)
        .collect();
    assert_eq!(runs.len(), zeros.len(), "runs {runs:?}");
    for run in &runs {
        let best = *run
            .iter()
            .min_by(|&&a, &&b| {
                (coh.probabilities[a] / wp.probabilities[a]).total_cmp(&(coh.probabilities[b] / wp.probabilities[b]))
            })
            .unwrap();
        let x = coh.centers[best];
        let nearest = zeros.iter().map(|z| (z - x).abs()).fold(f64::INFINITY, f64::min);
        assert!(nearest <= 0.5 * g.bin_width(), "bin at {x} is {nearest} from a zero");
    }
    // First dark fringe: coherent intensity is far below which-path there.
    let first = spacing / 2.0;
    let i = (0..g.bins).min_by(|&a, &b| (coh.centers[a] - first).abs().total_cmp(&(coh.centers[b] - first).abs())).unwrap();
    let l = g.amplitude_at(quasilocal::pathint::Slit::Left, first);
    let r = g.amplitude_at(quasilocal::pathint::Slit::Right, first);
    assert!((l + r).norm_sqr() < 1e-3 * (l.norm_sqr() + r.norm_sqr()));
    assert!(dark.contains(&i) || dark.contains(&(i + 1)) || dark.contains(&(i - 1)));
}

#[test]
fn which_path_pattern_has_no_minima() {
    let g = Geometry2Slit::default();
    let wp = screen_pattern(&g, Composition::Incoherent).unwrap();
    let envelope = screen_pattern(&Geometry2Slit { open: OpenSlits::RightOnly, ..g.clone() }, Composition::Coherent).unwrap();
    for (w, e) in wp.probabilities.iter().zip(&envelope.probabilities) {
        assert!(*w >= 0.1 * e, "{w} vs envelope {e}");
    }
    assert!(dark_region_finder(&wp, &wp, 0.01).unwrap().is_empty());
}

#[test]
fn four_hole_coherence_matters_and_marginals_agree() {
    let g = GeometryFourHole::default();
    let on = four_hole_table(&g, Composition::Coherent).unwrap();
    let off = four_hole_table(&g, Composition::Incoherent).unwrap();
    let gap = on.max_abs_diff(&off);
    println!("coherent {:?}\nincoherent {:?}\ngap {gap}", on.cells, off.cells);
    assert!(gap > 1e-8, "gap {gap}");
    for t in [&on, &off] {
        let cols = x_hole_distribution(&g, t.mode).unwrap();
        let m = t.x_marginal();
        assert!((m[0] - cols[0]).abs() < 1e-9 && (m[1] - cols[1]).abs() < 1e-9);
        assert!((t.cells[0][0] - t.cells[1][1]).abs() < 1e-12);
    }
}
