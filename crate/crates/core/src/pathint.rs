//! Free-particle path amplitudes for two-slit and four-hole screens.
//!
//! Paths are piecewise linear: source, a point in an aperture, a point on the
//! screen. Each segment is traversed at the particle speed along the beam
//! axis, so its duration is the longitudinal distance over `v`, and the path
//! contributes `exp(i S / ħ)` with the free action `S = Σ m |Δr|² / (2 Δt)`.
//! Apertures of finite size are integrated with the midpoint rule.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::{intensity, normalize, Composition};
use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Tolerance on the total of a [`ScreenPattern`].
pub const PATTERN_TOLERANCE: f64 = 1e-9;

/// `exp(i S / ħ)` for the free action along a piecewise-linear path.
pub fn path_amplitude(points: &[Point], durations: &[f64], mass: f64, hbar: f64) -> Result<Complex64> {
    if points.len() < 2 || durations.len() != points.len() - 1 {
        return Err(Error::MalformedPath);
    }
    let mut action = 0.0;
    for (seg, &dt) in points.windows(2).zip(durations) {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::NonPositiveDuration(dt));
        }
        let d2: f64 = (0..3).map(|k| (seg[1][k] - seg[0][k]).powi(2)).sum();
        action += mass * d2 / (2.0 * dt);
    }
    Ok(Complex64::from_polar(1.0, action / hbar))
}

/// Free action without the exponential; used by tests and diagnostics.
pub fn path_action(points: &[Point], durations: &[f64], mass: f64) -> Result<f64> {
    if points.len() < 2 || durations.len() != points.len() - 1 {
        return Err(Error::MalformedPath);
    }
    points.windows(2).zip(durations).try_fold(0.0, |acc, (seg, &dt)| {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::NonPositiveDuration(dt));
        }
        let d2: f64 = (0..3).map(|k| (seg[1][k] - seg[0][k]).powi(2)).sum();
        Ok(acc + mass * d2 / (2.0 * dt))
    })
}

/// Which slits are open.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpenSlits {
    #[default]
    Both,
    LeftOnly,
    RightOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Slit {
    /// Centered at `-d/2`.
    Left,
    /// Centered at `+d/2`.
    Right,
}

/// Point source on the axis, two slits, and a binned screen.
/// Internal units; the defaults use `ħ = m = 1` and `λ = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry2Slit {
    pub separation: f64,
    pub width: f64,
    pub source_distance: f64,
    pub screen_distance: f64,
    pub mass: f64,
    pub hbar: f64,
    pub speed: f64,
    pub screen_half_width: f64,
    pub bins: usize,
    pub slit_points: usize,
    #[serde(default)]
    pub open: OpenSlits,
}

impl Default for Geometry2Slit {
    fn default() -> Self {
        // λ = 1, fringe spacing λL₂/d = 100: eleven fringes across the screen.
        Self {
            separation: 20.0,
            width: 0.1,
            source_distance: 1000.0,
            screen_distance: 2000.0,
            mass: 1.0,
            hbar: 1.0,
            speed: 2.0 * std::f64::consts::PI,
            screen_half_width: 560.0,
            bins: 512,
            slit_points: 64,
            open: OpenSlits::Both,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidGeometry(format!("{name} must be positive, got {v}")))
    }
}

impl Geometry2Slit {
    pub fn validate(&self) -> Result<()> {
        positive("separation", self.separation)?;
        positive("width", self.width)?;
        positive("source_distance", self.source_distance)?;
        positive("screen_distance", self.screen_distance)?;
        positive("mass", self.mass)?;
        positive("hbar", self.hbar)?;
        positive("speed", self.speed)?;
        positive("screen_half_width", self.screen_half_width)?;
        if self.width >= self.separation {
            return Err(Error::InvalidGeometry(format!(
                "slit width {} must be smaller than separation {}",
                self.width, self.separation
            )));
        }
        if self.bins < 16 {
            return Err(Error::InvalidGeometry(format!("need at least 16 bins, got {}", self.bins)));
        }
        if self.slit_points == 0 {
            return Err(Error::InvalidGeometry("slit_points must be at least 1".into()));
        }
        Ok(())
    }

    /// de Broglie wavelength `2πħ / (m v)`.
    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.hbar / (self.mass * self.speed)
    }

    /// Paraxial fringe spacing `λ L₂ / d`.
    pub fn fringe_spacing(&self) -> f64 {
        self.wavelength() * self.screen_distance / self.separation
    }

    pub fn bin_width(&self) -> f64 {
        2.0 * self.screen_half_width / self.bins as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.bins)
            .map(|i| -self.screen_half_width + (i as f64 + 0.5) * w)
            .collect()
    }

    fn slit_center(&self, slit: Slit) -> f64 {
        match slit {
            Slit::Left => -0.5 * self.separation,
            Slit::Right => 0.5 * self.separation,
        }
    }

    fn open_slits(&self) -> Vec<Slit> {
        match self.open {
            OpenSlits::Both => vec![Slit::Left, Slit::Right],
            OpenSlits::LeftOnly => vec![Slit::Left],
            OpenSlits::RightOnly => vec![Slit::Right],
        }
    }

    /// Amplitude at screen position `x` from every path through `slit`.
    pub fn amplitude_at(&self, slit: Slit, x: f64) -> Complex64 {
        let k = self.slit_points;
        let h = self.width / k as f64;
        let c = self.slit_center(slit);
        let durations = [self.source_distance / self.speed, self.screen_distance / self.speed];
        let z_screen = self.source_distance + self.screen_distance;
        (0..k)
            .map(|i| {
                let xs = c - 0.5 * self.width + (i as f64 + 0.5) * h;
                let path = [[0.0, 0.0, 0.0], [xs, 0.0, self.source_distance], [x, 0.0, z_screen]];
                path_amplitude(&path, &durations, self.mass, self.hbar).expect("validated geometry") * h
            })
            .sum()
    }
}

/// Amplitude per screen bin from every path through `slit`.
pub fn slit_wave(g: &Geometry2Slit, slit: Slit) -> Result<Vec<Complex64>> {
    g.validate()?;
    Ok(g.bin_centers().par_iter().map(|&x| g.amplitude_at(slit, x)).collect())
}

/// Binned screen distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenPattern {
    pub centers: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub mode: Composition,
}

impl ScreenPattern {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_center", "probability"])?;
        for (c, p) in self.centers.iter().zip(&self.probabilities) {
            w.write_record([c.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn max(&self) -> f64 {
        self.probabilities.iter().copied().fold(0.0, f64::max)
    }
}

/// Coherent (`|Ψ_L + Ψ_R|²`) or which-path (`|Ψ_L|² + |Ψ_R|²`) pattern,
/// normalized over the bins.
pub fn screen_pattern(g: &Geometry2Slit, mode: Composition) -> Result<ScreenPattern> {
    g.validate()?;
    let waves: Vec<Vec<Complex64>> = g
        .open_slits()
        .into_iter()
        .map(|s| slit_wave(g, s))
        .collect::<Result<_>>()?;
    let mut probabilities: Vec<f64> = (0..g.bins)
        .map(|b| {
            let amps: Vec<Complex64> = waves.iter().map(|w| w[b]).collect();
            intensity(&amps, mode)
        })
        .collect();
    normalize(&mut probabilities);
    Ok(ScreenPattern { centers: g.bin_centers(), probabilities, mode })
}

/// Bins where the coherent pattern is below `eps` times the which-path
/// pattern while the which-path pattern exceeds a tenth of its maximum.
pub fn dark_region_finder(coherent: &ScreenPattern, which_path: &ScreenPattern, eps: f64) -> Result<Vec<usize>> {
    if coherent.centers != which_path.centers {
        return Err(Error::BinningMismatch);
    }
    let floor = 0.1 * which_path.max();
    Ok((0..coherent.centers.len())
        .filter(|&i| {
            let (c, w) = (coherent.probabilities[i], which_path.probabilities[i]);
            c < eps * w && w > floor
        })
        .collect())
}

/// Splits sorted bin indices into runs of adjacent bins.
pub fn group_runs(bins: &[usize]) -> Vec<Vec<usize>> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for &b in bins {
        match runs.last_mut() {
            Some(run) if run.last() == Some(&(b - 1)) => run.push(b),
            _ => runs.push(vec![b]),
        }
    }
    runs
}

/// Circular detector region `+A` on the screen; `-A` is its point reflection
/// through the beam axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
}

/// Screen with square holes at `(±x₀, ±y₀)` and two detector regions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryFourHole {
    pub hole_x: f64,
    pub hole_y: f64,
    pub hole_size: f64,
    pub hole_points: usize,
    pub source_distance: f64,
    pub screen_distance: f64,
    pub mass: f64,
    pub hbar: f64,
    pub speed: f64,
    pub region: Region,
    pub region_points: usize,
}

impl Default for GeometryFourHole {
    fn default() -> Self {
        Self {
            hole_x: 20.0,
            hole_y: 5.0,
            hole_size: 2.0,
            hole_points: 8,
            source_distance: 200.0,
            screen_distance: 200.0,
            mass: 1.0,
            hbar: 1.0,
            speed: 2.0 * std::f64::consts::PI,
            region: Region { center_x: 30.0, center_y: 8.0, radius: 15.0 },
            region_points: 48,
        }
    }
}

impl GeometryFourHole {
    pub fn validate(&self) -> Result<()> {
        positive("hole_x", self.hole_x)?;
        positive("hole_y", self.hole_y)?;
        positive("hole_size", self.hole_size)?;
        positive("source_distance", self.source_distance)?;
        positive("screen_distance", self.screen_distance)?;
        positive("mass", self.mass)?;
        positive("hbar", self.hbar)?;
        positive("speed", self.speed)?;
        positive("region radius", self.region.radius)?;
        if self.hole_size >= 2.0 * self.hole_x.min(self.hole_y) {
            return Err(Error::InvalidGeometry("holes overlap".into()));
        }
        if self.hole_points == 0 || self.region_points == 0 {
            return Err(Error::InvalidGeometry("quadrature point counts must be positive".into()));
        }
        let separation = 2.0 * self.region.center_x.hypot(self.region.center_y);
        if separation < 2.0 * self.region.radius {
            return Err(Error::InvalidGeometry(format!(
                "regions +A and -A overlap (center distance {separation}, radius {})",
                self.region.radius
            )));
        }
        if self.region_grid(1.0).is_empty() {
            return Err(Error::InvalidGeometry("region grid contains no points".into()));
        }
        Ok(())
    }

    /// Midpoint grid over the disk of region `sign · A`, with cell areas.
    pub fn region_grid(&self, sign: f64) -> Vec<([f64; 2], f64)> {
        let q = self.region_points;
        let r = self.region.radius;
        let h = 2.0 * r / q as f64;
        let mut pts = Vec::new();
        for i in 0..q {
            for j in 0..q {
                let dx = -r + (i as f64 + 0.5) * h;
                let dy = -r + (j as f64 + 0.5) * h;
                if dx * dx + dy * dy <= r * r {
                    pts.push((
                        [sign * (self.region.center_x + dx), sign * (self.region.center_y + dy)],
                        h * h,
                    ));
                }
            }
        }
        pts
    }

    /// Amplitude at screen point `(x, y)` of paths through hole `(s_x x₀, s_y y₀)`.
    pub fn hole_amplitude(&self, sx: f64, sy: f64, at: [f64; 2]) -> Complex64 {
        let k = self.hole_points;
        let h = self.hole_size / k as f64;
        let (cx, cy) = (sx * self.hole_x, sy * self.hole_y);
        let durations = [self.source_distance / self.speed, self.screen_distance / self.speed];
        let z_screen = self.source_distance + self.screen_distance;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..k {
            let hx = cx - 0.5 * self.hole_size + (i as f64 + 0.5) * h;
            for j in 0..k {
                let hy = cy - 0.5 * self.hole_size + (j as f64 + 0.5) * h;
                let path = [[0.0, 0.0, 0.0], [hx, hy, self.source_distance], [at[0], at[1], z_screen]];
                acc += path_amplitude(&path, &durations, self.mass, self.hbar).expect("validated geometry");
            }
        }
        acc * (h * h)
    }

    /// Weight of one screen point for x-hole `sx`, combining the two y-holes.
    fn point_weight(&self, sx: f64, at: [f64; 2], mode: Composition) -> f64 {
        let amps = [self.hole_amplitude(sx, 1.0, at), self.hole_amplitude(sx, -1.0, at)];
        intensity(&amps, mode)
    }
}

/// Joint table `P(s_x, s_A)` indexed `[s_x][s_A]` with `0 = +`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourHoleTable {
    pub cells: [[f64; 2]; 2],
    pub mode: Composition,
}

impl FourHoleTable {
    pub fn x_marginal(&self) -> [f64; 2] {
        [self.cells[0][0] + self.cells[0][1], self.cells[1][0] + self.cells[1][1]]
    }

    pub fn max_abs_diff(&self, other: &FourHoleTable) -> f64 {
        self.cells
            .iter()
            .flatten()
            .zip(other.cells.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

const SIGNS: [f64; 2] = [1.0, -1.0];

/// `P(±x₀, ±A)`: with `Coherent` the amplitudes through the unobserved
/// `±y₀` holes are summed before squaring, with `Incoherent` they are
/// squared first. Each screen point of a region contributes its weight
/// times its cell area; the four cells are normalized to one.
pub fn four_hole_table(g: &GeometryFourHole, mode: Composition) -> Result<FourHoleTable> {
    g.validate()?;
    let mut cells = [[0.0; 2]; 2];
    for (ia, &sa) in SIGNS.iter().enumerate() {
        let grid = g.region_grid(sa);
        for (ix, &sx) in SIGNS.iter().enumerate() {
            let parts: Vec<f64> = grid
                .par_iter()
                .map(|&(at, area)| area * g.point_weight(sx, at, mode))
                .collect();
            cells[ix][ia] = parts.iter().sum();
        }
    }
    let total: f64 = cells.iter().flatten().sum();
    cells.iter_mut().flatten().for_each(|c| *c /= total);
    Ok(FourHoleTable { cells, mode })
}

/// Distribution over the x-hole alone: each column's intensity integrated
/// over the union of both detector regions, normalized over `±x₀`.
pub fn x_hole_distribution(g: &GeometryFourHole, mode: Composition) -> Result<[f64; 2]> {
    g.validate()?;
    let screen: Vec<([f64; 2], f64)> = g.region_grid(1.0).into_iter().chain(g.region_grid(-1.0)).collect();
    let mut cols = [0.0; 2];
    for (ix, &sx) in SIGNS.iter().enumerate() {
        let parts: Vec<f64> = screen.par_iter().map(|&(at, area)| area * g.point_weight(sx, at, mode)).collect();
        cols[ix] = parts.iter().sum();
    }
    normalize(&mut cols);
    Ok(cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn trivial_path_amplitudes() {
        let still = [[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]];
        assert_eq!(path_amplitude(&still, &[0.5], 1.0, 1.0).unwrap(), Complex64::new(1.0, 0.0));
        // S = m Δx² / (2 Δt) = π for Δx² = 2π, m = Δt = ħ = 1.
        let p = [[0.0, 0.0, 0.0], [(2.0 * PI).sqrt(), 0.0, 0.0]];
        let a = path_amplitude(&p, &[1.0], 1.0, 1.0).unwrap();
        assert!((a - Complex64::new(-1.0, 0.0)).norm() < 1e-14);
        assert!((a.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn path_errors() {
        let p = [[0.0; 3], [1.0, 0.0, 0.0]];
        assert!(matches!(path_amplitude(&p, &[0.0], 1.0, 1.0), Err(Error::NonPositiveDuration(_))));
        assert!(matches!(path_amplitude(&p, &[1.0, 1.0], 1.0, 1.0), Err(Error::MalformedPath)));
        assert!(matches!(path_amplitude(&p[..1], &[], 1.0, 1.0), Err(Error::MalformedPath)));
    }

    #[test]
    fn straight_path_has_least_action() {
        let (a, b) = ([0.0, 0.0, 0.0], [4.0, -2.0, 10.0]);
        let straight = path_action(&[a, b], &[2.0], 1.3).unwrap();
        for kink in [[2.0, -1.0, 5.5], [3.0, 0.0, 5.0], [2.0, -1.0, 4.0]] {
            let bent = path_action(&[a, kink, b], &[1.0, 1.0], 1.3).unwrap();
            assert!(bent > straight, "{bent} <= {straight}");
        }
        // A kink on the straight line at the matching time costs nothing extra.
        let on_line = path_action(&[a, [2.0, -1.0, 5.0], b], &[1.0, 1.0], 1.3).unwrap();
        assert!((on_line - straight).abs() < 1e-12);
    }

    #[test]
    fn geometry_validation() {
        let mut g = Geometry2Slit::default();
        g.validate().unwrap();
        g.width = g.separation;
        assert!(g.validate().is_err());
        let g = Geometry2Slit { bins: 8, ..Default::default() };
        assert!(g.validate().is_err());
        let g = Geometry2Slit { mass: 0.0, ..Default::default() };
        assert!(g.validate().is_err());
    }

    #[test]
    fn symmetric_center_amplitudes() {
        let g = Geometry2Slit { width: 1e-6, slit_points: 1, ..Default::default() };
        let (l, r) = (g.amplitude_at(Slit::Left, 0.0), g.amplitude_at(Slit::Right, 0.0));
        assert!((l.norm() - r.norm()).abs() < 1e-15 * l.norm().max(1e-300) + 1e-20);
        let coh = intensity(&[l, r], Composition::Coherent);
        let wp = intensity(&[l, r], Composition::Incoherent);
        assert!((coh / wp - 2.0).abs() < 1e-9);
    }

    #[test]
    fn point_slit_phase_difference_is_linear() {
        let g = Geometry2Slit { width: 1e-6, slit_points: 1, ..Default::default() };
        let lambda = g.wavelength();
        for x in [0.5, 3.0, 10.0, 40.0] {
            let (l, r) = (g.amplitude_at(Slit::Left, x), g.amplitude_at(Slit::Right, x));
            let measured = (l / r).arg();
            let expected = 2.0 * PI * g.separation * x / (lambda * g.screen_distance);
            let wrapped = (expected + PI).rem_euclid(2.0 * PI) - PI;
            assert!((measured - wrapped).abs() <= 0.01 * wrapped.abs(), "x={x}: {measured} vs {wrapped}");
        }
    }

    #[test]
    fn quadrature_self_convergence() {
        let g64 = Geometry2Slit::default();
        let g128 = Geometry2Slit { slit_points: 128, ..Default::default() };
        for slit in [Slit::Left, Slit::Right] {
            let a = slit_wave(&g64, slit).unwrap();
            let b = slit_wave(&g128, slit).unwrap();
            let worst = a.iter().zip(&b).map(|(x, y)| (x - y).norm() / y.norm()).fold(0.0, f64::max);
            assert!(worst < 1e-6, "{worst}");
        }
    }

    #[test]
    fn patterns_normalize_and_center_ratio_is_two() {
        let g = Geometry2Slit { bins: 513, ..Default::default() };
        let coh = screen_pattern(&g, Composition::Coherent).unwrap();
        let wp = screen_pattern(&g, Composition::Incoherent).unwrap();
        for p in [&coh, &wp] {
            assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < PATTERN_TOLERANCE);
            assert!(p.probabilities.iter().all(|&v| v >= 0.0));
        }
        // Unnormalized ratio at x = 0 is 2; normalization constants are equal
        // up to the fringe average, so compare raw intensities instead.
        let l = g.amplitude_at(Slit::Left, 0.0);
        let r = g.amplitude_at(Slit::Right, 0.0);
        let ratio = intensity(&[l, r], Composition::Coherent) / intensity(&[l, r], Composition::Incoherent);
        assert!((ratio - 2.0).abs() < 1e-12);
        assert!(coh.max() > wp.max());
    }

    #[test]
    fn single_slit_has_no_dark_regions() {
        let g = Geometry2Slit { open: OpenSlits::LeftOnly, ..Default::default() };
        let coh = screen_pattern(&g, Composition::Coherent).unwrap();
        let wp = screen_pattern(&g, Composition::Incoherent).unwrap();
        assert!(dark_region_finder(&coh, &wp, 0.01).unwrap().is_empty());
    }

    #[test]
    fn zero_epsilon_finds_nothing() {
        let g = Geometry2Slit::default();
        let coh = screen_pattern(&g, Composition::Coherent).unwrap();
        let wp = screen_pattern(&g, Composition::Incoherent).unwrap();
        assert!(dark_region_finder(&coh, &wp, 0.0).unwrap().is_empty());
        let other = screen_pattern(&Geometry2Slit { bins: 256, ..Default::default() }, Composition::Incoherent).unwrap();
        assert!(matches!(dark_region_finder(&coh, &other, 0.1), Err(Error::BinningMismatch)));
    }

    #[test]
    fn runs_are_grouped() {
        assert_eq!(group_runs(&[1, 2, 3, 7, 9, 10]), vec![vec![1, 2, 3], vec![7], vec![9, 10]]);
        assert!(group_runs(&[]).is_empty());
    }

    #[test]
    fn four_hole_validation() {
        let mut g = GeometryFourHole::default();
        g.validate().unwrap();
        g.region = Region { center_x: 1.0, center_y: 0.0, radius: 5.0 };
        assert!(matches!(g.validate(), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn four_hole_reflection_symmetry() {
        let g = GeometryFourHole { region_points: 16, hole_points: 4, ..Default::default() };
        for mode in [Composition::Coherent, Composition::Incoherent] {
            let t = four_hole_table(&g, mode).unwrap();
            assert!((t.cells[0][0] - t.cells[1][1]).abs() < 1e-12);
            assert!((t.cells[0][1] - t.cells[1][0]).abs() < 1e-12);
            assert!((t.cells.iter().flatten().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
