//! Sequential Stern-Gerlach devices with optional beam blocking.
//!
//! A `Split` immediately followed by a `Recombine` along the same line is an
//! interferometer: with both beams open it is the identity, with one beam
//! blocked it projects onto the open beam. A `Split` that is not recombined
//! separates the beams for good (which-path known). The sequence ends with a
//! single `Analyze` device.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quatspin::{Direction, Sign};
use crate::rng::{par_trials_chunked, trial_rng};

/// Weights below this count as an extinguished beam.
pub const EXTINCTION: f64 = 1e-15;

type Spinor = [Complex64; 2];
type Matrix = [[Complex64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Split,
    Recombine,
    Analyze,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Block {
    #[default]
    None,
    Plus,
    Minus,
    Both,
}

impl Block {
    fn blocks(self, s: Sign) -> bool {
        matches!((self, s), (Block::Both, _) | (Block::Plus, Sign::Plus) | (Block::Minus, Sign::Minus))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgDevice {
    pub axis: Direction,
    pub role: Role,
    pub block: Block,
}

impl SgDevice {
    pub fn split(axis: Direction, block: Block) -> Self {
        Self { axis, role: Role::Split, block }
    }

    pub fn recombine(axis: Direction) -> Self {
        Self { axis, role: Role::Recombine, block: Block::None }
    }

    pub fn analyze(axis: Direction) -> Self {
        Self { axis, role: Role::Analyze, block: Block::None }
    }
}

/// Two-component spin state in the `z` basis plus the weight that has
/// survived the blocks so far.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamState {
    pub amplitudes: Spinor,
    pub survival: f64,
}

impl BeamState {
    /// Normalized eigenstate of `n·σ` with eigenvalue `sign`.
    pub fn along(n: &Direction, sign: Sign) -> Self {
        let p = projector(n, sign);
        let cols = [[p[0][0], p[1][0]], [p[0][1], p[1][1]]];
        let best = if norm_sqr(&cols[0]) >= norm_sqr(&cols[1]) { cols[0] } else { cols[1] };
        let k = 1.0 / norm_sqr(&best).sqrt();
        Self { amplitudes: [best[0] * k, best[1] * k], survival: 1.0 }
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    /// Probability of `sign` along `n`.
    pub fn probability(&self, n: &Direction, sign: Sign) -> f64 {
        norm_sqr(&apply(&projector(n, sign), &self.amplitudes)) / self.norm_sqr()
    }

    pub fn max_abs_diff(&self, other: &BeamState) -> f64 {
        (self.amplitudes[0] - other.amplitudes[0])
            .norm()
            .max((self.amplitudes[1] - other.amplitudes[1]).norm())
    }
}

fn norm_sqr(v: &Spinor) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr()
}

/// `(1 + s n·σ) / 2`.
fn projector(n: &Direction, s: Sign) -> Matrix {
    let [x, y, z] = n.components();
    let k = 0.5 * s.value();
    [
        [Complex64::new(0.5 + k * z, 0.0), Complex64::new(k * x, -k * y)],
        [Complex64::new(k * x, k * y), Complex64::new(0.5 - k * z, 0.0)],
    ]
}

fn apply(m: &Matrix, v: &Spinor) -> Spinor {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Stage {
    /// Split and recombine: beams stay coherent.
    Interferometer { axis: Direction, block: Block, device: usize },
    /// Split without recombination: the beam taken is known.
    Separator { axis: Direction, block: Block, device: usize },
    Analyze { axis: Direction },
}

fn compile(devices: &[SgDevice]) -> Result<Vec<Stage>> {
    let malformed = |m: String| Err(Error::MalformedSequence(m));
    let Some(last) = devices.last() else {
        return malformed("empty sequence".into());
    };
    if last.role != Role::Analyze {
        return malformed("final device must be an analyzer".into());
    }
    let mut stages = Vec::new();
    let mut i = 0;
    while i < devices.len() {
        let d = devices[i];
        match d.role {
            Role::Split => {
                let recombined = devices
                    .get(i + 1)
                    .is_some_and(|next| next.role == Role::Recombine);
                if recombined {
                    let r = devices[i + 1];
                    if (d.axis.dot(&r.axis).abs() - 1.0).abs() > 1e-12 {
                        return malformed(format!("recombiner {} does not match splitter {i} axis", i + 1));
                    }
                    if r.block != Block::None {
                        return malformed(format!("device {}: blocks only apply to splitters", i + 1));
                    }
                    stages.push(Stage::Interferometer { axis: d.axis, block: d.block, device: i });
                    i += 2;
                } else {
                    stages.push(Stage::Separator { axis: d.axis, block: d.block, device: i });
                    i += 1;
                }
            }
            Role::Recombine => return malformed(format!("device {i}: recombine without matching split")),
            Role::Analyze => {
                if i != devices.len() - 1 {
                    return malformed(format!("device {i}: analyzer before the end of the sequence"));
                }
                if d.block != Block::None {
                    return malformed(format!("device {i}: blocks only apply to splitters"));
                }
                stages.push(Stage::Analyze { axis: d.axis });
                i += 1;
            }
        }
    }
    Ok(stages)
}

/// What the final analyzer sees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Outcome {
    Distribution { p_plus: f64, p_minus: f64 },
    /// Every beam was blocked before the analyzer.
    Extinguished,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub outcome: Outcome,
    /// Probability of reaching the analyzer.
    pub survival: f64,
    /// Survival after each stage before the analyzer.
    pub survival_trace: Vec<f64>,
}

impl SequenceResult {
    pub fn distribution(&self) -> Option<[f64; 2]> {
        match self.outcome {
            Outcome::Distribution { p_plus, p_minus } => Some([p_plus, p_minus]),
            Outcome::Extinguished => None,
        }
    }
}

fn check_input(input: &BeamState) -> Result<()> {
    let n = input.norm_sqr();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::UnnormalizedBeam(n));
    }
    Ok(())
}

/// Exact outcome distribution and survival probability.
///
/// The beam is tracked as a mixture of pure branches; a separator turns one
/// branch into one per open beam.
pub fn run_sequence(devices: &[SgDevice], input: &BeamState) -> Result<SequenceResult> {
    check_input(input)?;
    let stages = compile(devices)?;
    let mut branches: Vec<(f64, Spinor)> = vec![(1.0, input.amplitudes)];
    let mut survival_trace = Vec::new();
    for stage in &stages {
        match *stage {
            Stage::Interferometer { axis, block, .. } => {
                let mut k = [[Complex64::new(0.0, 0.0); 2]; 2];
                for s in Sign::BOTH.into_iter().filter(|&s| !block.blocks(s)) {
                    let p = projector(&axis, s);
                    for (r, row) in k.iter_mut().enumerate() {
                        for (c, v) in row.iter_mut().enumerate() {
                            *v += p[r][c];
                        }
                    }
                }
                branches = branches
                    .into_iter()
                    .filter_map(|(w, psi)| keep(w, apply(&k, &psi)))
                    .collect();
            }
            Stage::Separator { axis, block, .. } => {
                branches = branches
                    .into_iter()
                    .flat_map(|(w, psi)| {
                        Sign::BOTH
                            .into_iter()
                            .filter(move |&s| !block.blocks(s))
                            .filter_map(move |s| keep(w, apply(&projector(&axis, s), &psi)))
                    })
                    .collect();
            }
            Stage::Analyze { axis } => {
                let survival: f64 = branches.iter().map(|(w, _)| w).sum();
                if survival <= EXTINCTION {
                    return Ok(SequenceResult { outcome: Outcome::Extinguished, survival: 0.0, survival_trace });
                }
                let p_plus = branches
                    .iter()
                    .map(|(w, psi)| w * norm_sqr(&apply(&projector(&axis, Sign::Plus), psi)))
                    .sum::<f64>()
                    / survival;
                return Ok(SequenceResult {
                    outcome: Outcome::Distribution { p_plus, p_minus: 1.0 - p_plus },
                    survival,
                    survival_trace,
                });
            }
        }
        survival_trace.push(branches.iter().map(|(w, _)| w).sum());
    }
    unreachable!("compile guarantees a final analyzer")
}

/// Reweights a projected branch, renormalizing its state.
fn keep(w: f64, phi: Spinor) -> Option<(f64, Spinor)> {
    let n = norm_sqr(&phi);
    if w * n <= EXTINCTION {
        return None;
    }
    let k = 1.0 / n.sqrt();
    Some((w * n, [phi[0] * k, phi[1] * k]))
}

/// One particle's history.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamEvent {
    pub trial: u64,
    /// Device whose block absorbed the particle.
    pub absorbed_at: Option<usize>,
    /// Final analyzer outcome, `+1` or `-1`.
    pub outcome: Option<i8>,
    /// Outcome that is impossible once every interferometer block is removed.
    pub paradox: bool,
}

impl BeamEvent {
    pub fn write_json_line<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

/// Tallies of a Monte Carlo run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamStats {
    pub trials: u64,
    pub absorbed: u64,
    pub plus: u64,
    pub minus: u64,
    pub paradox: u64,
}

impl BeamStats {
    pub fn record(&mut self, e: &BeamEvent) {
        self.trials += 1;
        match e.outcome {
            Some(1) => self.plus += 1,
            Some(_) => self.minus += 1,
            None => self.absorbed += 1,
        }
        self.paradox += u64::from(e.paradox);
    }

    pub fn reached(&self) -> u64 {
        self.plus + self.minus
    }

    pub fn survival(&self) -> f64 {
        self.reached() as f64 / self.trials as f64
    }

    /// `P(+)` among particles reaching the analyzer.
    pub fn p_plus(&self) -> Option<f64> {
        (self.reached() > 0).then(|| self.plus as f64 / self.reached() as f64)
    }
}

fn draw_branch<R: Rng>(rng: &mut R, axis: &Direction, psi: &Spinor) -> (Sign, Spinor) {
    let plus = apply(&projector(axis, Sign::Plus), psi);
    if rng.random::<f64>() < norm_sqr(&plus) / norm_sqr(psi) {
        (Sign::Plus, plus)
    } else {
        (Sign::Minus, apply(&projector(axis, Sign::Minus), psi))
    }
}

fn simulate_one(stages: &[Stage], input: &Spinor, impossible: [bool; 2], seed: u64, trial: u64) -> BeamEvent {
    let mut rng = trial_rng(seed, trial);
    let mut psi = *input;
    let absorbed = |device| BeamEvent { trial, absorbed_at: Some(device), outcome: None, paradox: false };
    for stage in stages {
        match *stage {
            Stage::Interferometer { block: Block::None, .. } => {}
            Stage::Interferometer { axis, block, device } | Stage::Separator { axis, block, device } => {
                if block == Block::Both {
                    return absorbed(device);
                }
                let (s, phi) = draw_branch(&mut rng, &axis, &psi);
                if block.blocks(s) {
                    return absorbed(device);
                }
                let k = 1.0 / norm_sqr(&phi).sqrt();
                psi = [phi[0] * k, phi[1] * k];
            }
            Stage::Analyze { axis } => {
                let (s, _) = draw_branch(&mut rng, &axis, &psi);
                let paradox = impossible[usize::from(s == Sign::Minus)];
                return BeamEvent { trial, absorbed_at: None, outcome: Some(s.as_i8()), paradox };
            }
        }
    }
    unreachable!("compile guarantees a final analyzer")
}

/// Per-trial simulation: every blocked beam absorbs the particle with the
/// Born probability of taking it. Events are passed to `on_chunk` in trial
/// order.
pub fn monte_carlo_sequence<F>(
    devices: &[SgDevice],
    input: &BeamState,
    trials: u64,
    seed: u64,
    workers: usize,
    mut on_chunk: F,
) -> Result<BeamStats>
where
    F: FnMut(&[BeamEvent]) -> Result<()>,
{
    check_input(input)?;
    let stages = compile(devices)?;
    // Reference: same devices with interferometer blocks lifted.
    let open: Vec<SgDevice> = devices
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let recombined = devices.get(i + 1).is_some_and(|n| n.role == Role::Recombine);
            if d.role == Role::Split && recombined {
                SgDevice { block: Block::None, ..*d }
            } else {
                *d
            }
        })
        .collect();
    let impossible = match run_sequence(&open, input)?.distribution() {
        Some([p, m]) => [p < 1e-12, m < 1e-12],
        None => [false, false],
    };
    let mut stats = BeamStats::default();
    par_trials_chunked(
        0,
        trials,
        workers,
        |t| simulate_one(&stages, &input.amplitudes, impossible, seed, t),
        |chunk| {
            chunk.iter().for_each(|e| stats.record(e));
            on_chunk(&chunk)
        },
    )?;
    Ok(stats)
}

/// The four-device sequence: `X` filter keeping `+`, `Y` split, `-Y`
/// recombine (optionally blocking one `Y` beam), `X` analyzer.
pub fn reconstruction_sequence(block: Block) -> Vec<SgDevice> {
    vec![
        SgDevice::split(Direction::x_axis(), Block::Minus),
        SgDevice::split(Direction::y_axis(), block),
        SgDevice::recombine(Direction::y_axis().flipped()),
        SgDevice::analyze(Direction::x_axis()),
    ]
}
