//! Singlet pairs: hidden-state ensembles, per-trial sampling, correlators
//! and the CHSH combination.
//!
//! Particle `a` carries the hidden pattern `(s_1, .., s_N)` and particle `b`
//! carries its negation, so Alice reads `α = s_a` and Bob reads `β = -s_b`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quasiprob::{solve_weights, QuasiProbTable};
use crate::quatspin::{born_pair_probability, Direction, DirectionSet, Sign, SignPattern};
use crate::rng::{par_trials_chunked, trial_rng};

/// Tolerance on the total of a classical distribution.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-12;

/// A nonnegative, normalized distribution over the sign patterns of a
/// direction set, indexed by [`SignPattern::index`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LhvDistribution {
    probabilities: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl LhvDistribution {
    pub fn new(n: usize, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() != 1 << n {
            return Err(Error::InvalidDistribution(format!(
                "expected {} entries for {n} directions, got {}",
                1usize << n,
                probabilities.len()
            )));
        }
        for (idx, &p) in probabilities.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "entry {} for pattern {} is negative or not finite",
                    p,
                    SignPattern::from_index(idx, n)
                )));
            }
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}, not 1")));
        }
        let cumulative = probabilities
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(Self { probabilities, cumulative })
    }

    /// All weight on one pattern.
    pub fn point_mass(p: &SignPattern) -> Self {
        let mut probs = vec![0.0; 1 << p.len()];
        probs[p.index()] = 1.0;
        Self::new(p.len(), probs).expect("point mass is a distribution")
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Pattern index drawn by inverse CDF from a uniform `u ∈ [0, 1)`.
    fn draw(&self, u: f64) -> usize {
        let found = self.cumulative.partition_point(|&c| c <= u);
        if found < self.probabilities.len() {
            return found;
        }
        // Rounding left u above the last cumulative value.
        self.probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// How outcomes are produced.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Mode {
    /// Exact Born correlations, no sampling.
    BornAnalytic,
    /// Per trial, sample only the measured pair from the Born law.
    BornPairwiseSampling,
    /// Draw a full hidden pattern from a positive distribution.
    ClassicalLhv(LhvDistribution),
    /// Exact correlations from the signed minimum-norm table.
    QuasiProbAnalytic,
}

/// Compact mode label written to trial logs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeTag {
    BornAnalytic,
    BornSampling,
    Lhv,
    QuasiprobAnalytic,
}

impl Mode {
    pub fn tag(&self) -> ModeTag {
        match self {
            Mode::BornAnalytic => ModeTag::BornAnalytic,
            Mode::BornPairwiseSampling => ModeTag::BornSampling,
            Mode::ClassicalLhv(_) => ModeTag::Lhv,
            Mode::QuasiProbAnalytic => ModeTag::QuasiprobAnalytic,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Mode::BornAnalytic => "born-analytic",
            Mode::BornPairwiseSampling => "born-sampling",
            Mode::ClassicalLhv(_) => "lhv",
            Mode::QuasiProbAnalytic => "quasiprob-analytic",
        }
    }

    fn is_born(&self) -> bool {
        matches!(self, Mode::BornAnalytic | Mode::BornPairwiseSampling)
    }
}

/// Pairs sharing a direction set and an outcome model.
#[derive(Clone, Debug)]
pub struct SingletEnsemble {
    directions: DirectionSet,
    mode: Mode,
    table: Option<QuasiProbTable>,
}

impl SingletEnsemble {
    pub fn new(directions: DirectionSet, mode: Mode) -> Result<Self> {
        let table = match &mode {
            Mode::ClassicalLhv(dist) if dist.len() != 1 << directions.len() => {
                return Err(Error::InvalidDistribution(format!(
                    "distribution has {} entries but {} directions need {}",
                    dist.len(),
                    directions.len(),
                    1usize << directions.len()
                )));
            }
            Mode::QuasiProbAnalytic => Some(solve_weights(&directions)?),
            _ => None,
        };
        Ok(Self { directions, mode, table })
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.directions
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    fn setting(&self, idx: usize) -> Result<&Direction> {
        self.directions.get(idx)
    }

    /// Exact joint distribution `P(α, β)` indexed `[α][β]` (`0 = +`).
    pub fn joint_distribution(&self, a_idx: usize, b_idx: usize) -> Result<[[f64; 2]; 2]> {
        let (na, nb) = (self.setting(a_idx)?, self.setting(b_idx)?);
        let mut joint = [[0.0; 2]; 2];
        match &self.mode {
            Mode::BornAnalytic | Mode::BornPairwiseSampling => {
                for (i, alpha) in Sign::BOTH.into_iter().enumerate() {
                    for (j, beta) in Sign::BOTH.into_iter().enumerate() {
                        joint[i][j] = pair_joint_probability(na, nb, alpha, beta);
                    }
                }
            }
            Mode::ClassicalLhv(dist) => {
                let n = self.directions.len();
                for (idx, &p) in dist.probabilities().iter().enumerate() {
                    let pat = SignPattern::from_index(idx, n);
                    let (alpha, beta) = (pat[a_idx], pat[b_idx].flip());
                    joint[usize::from(alpha == Sign::Minus)][usize::from(beta == Sign::Minus)] += p;
                }
            }
            Mode::QuasiProbAnalytic => {
                let table = self.table.as_ref().expect("table built with ensemble");
                let n = self.directions.len();
                for (idx, &w) in table.weights().iter().enumerate() {
                    let pat = SignPattern::from_index(idx, n);
                    let (alpha, beta) = (pat[a_idx], pat[b_idx].flip());
                    joint[usize::from(alpha == Sign::Minus)][usize::from(beta == Sign::Minus)] += w;
                }
            }
        }
        Ok(joint)
    }

    /// Bob's outcome distribution `[P(β=+), P(β=-)]` ignoring Alice's outcome.
    pub fn bob_marginal(&self, a_idx: usize, b_idx: usize) -> Result<[f64; 2]> {
        let j = self.joint_distribution(a_idx, b_idx)?;
        Ok([j[0][0] + j[1][0], j[0][1] + j[1][1]])
    }
}

/// Singlet joint probability `¼ (1 - αβ n_a·n_b)`: the Born pair law on
/// particle `a`'s pattern with Bob reporting the negated sign.
pub fn pair_joint_probability(na: &Direction, nb: &Direction, alpha: Sign, beta: Sign) -> f64 {
    born_pair_probability(alpha, beta.flip(), na, nb)
}

/// One measured pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub a_setting: usize,
    pub b_setting: usize,
    pub a_out: i8,
    pub b_out: i8,
    pub mode: ModeTag,
}

impl TrialRecord {
    pub fn write_json_line<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

/// Draws the outcomes of trial `trial` from its own random stream.
pub fn sample_trial(
    e: &SingletEnsemble,
    a_idx: usize,
    b_idx: usize,
    seed: u64,
    trial: u64,
) -> Result<TrialRecord> {
    let (na, nb) = (e.setting(a_idx)?, e.setting(b_idx)?);
    let mut rng = trial_rng(seed, trial);
    let (alpha, beta) = match &e.mode {
        Mode::BornPairwiseSampling => {
            let alpha = if rng.random::<f64>() < 0.5 { Sign::Plus } else { Sign::Minus };
            // P(β = α | α) = P(α, α) / P(α) with P(α) = ½.
            let same = 2.0 * pair_joint_probability(na, nb, alpha, alpha);
            let beta = if rng.random::<f64>() < same { alpha } else { alpha.flip() };
            (alpha, beta)
        }
        Mode::ClassicalLhv(dist) => {
            let pat = SignPattern::from_index(dist.draw(rng.random::<f64>()), e.directions.len());
            (pat[a_idx], pat[b_idx].flip())
        }
        m => return Err(Error::NotSampleable(m.name())),
    };
    Ok(TrialRecord {
        trial,
        a_setting: a_idx,
        b_setting: b_idx,
        a_out: alpha.as_i8(),
        b_out: beta.as_i8(),
        mode: e.mode.tag(),
    })
}

/// Integer tallies of a batch of trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: u64,
    /// `Σ α β`.
    pub product_sum: i64,
    pub a_plus: u64,
    pub b_plus: u64,
}

impl TrialStats {
    pub fn record(&mut self, r: &TrialRecord) {
        self.trials += 1;
        self.product_sum += i64::from(r.a_out) * i64::from(r.b_out);
        self.a_plus += u64::from(r.a_out == 1);
        self.b_plus += u64::from(r.b_out == 1);
    }

    pub fn merge(&mut self, o: &TrialStats) {
        self.trials += o.trials;
        self.product_sum += o.product_sum;
        self.a_plus += o.a_plus;
        self.b_plus += o.b_plus;
    }

    pub fn correlator(&self) -> Correlator {
        let n = self.trials as f64;
        let mean = self.product_sum as f64 / n;
        Correlator {
            value: mean,
            stderr: Some(((1.0 - mean * mean).max(0.0) / n).sqrt()),
            trials: Some(self.trials),
        }
    }

    /// Number of trials with `α = β`.
    pub fn same_sign(&self) -> u64 {
        // product_sum = same - (n - same)
        ((self.product_sum + self.trials as i64) / 2) as u64
    }

    pub fn bob_plus_fraction(&self) -> f64 {
        self.b_plus as f64 / self.trials as f64
    }
}

/// Runs `count` trials starting at trial id `first`, on `workers` threads.
/// Each chunk of records is handed to `on_chunk` in trial order.
#[allow(clippy::too_many_arguments)]
pub fn simulate<F>(
    e: &SingletEnsemble,
    a_idx: usize,
    b_idx: usize,
    seed: u64,
    first: u64,
    count: u64,
    workers: usize,
    mut on_chunk: F,
) -> Result<TrialStats>
where
    F: FnMut(&[TrialRecord]) -> Result<()>,
{
    if !matches!(e.mode, Mode::BornPairwiseSampling | Mode::ClassicalLhv(_)) {
        return Err(Error::NotSampleable(e.mode.name()));
    }
    e.setting(a_idx)?;
    e.setting(b_idx)?;
    let mut stats = TrialStats::default();
    par_trials_chunked(
        first,
        count,
        workers,
        |t| sample_trial(e, a_idx, b_idx, seed, t).expect("validated settings"),
        |chunk| {
            chunk.iter().for_each(|r| stats.record(r));
            on_chunk(&chunk)
        },
    )?;
    Ok(stats)
}

/// How a correlator is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Estimator {
    Analytic,
    MonteCarlo { seed: u64, trials: u64, workers: usize },
}

/// `E(a, b) = Σ αβ P(α, β)` with its Monte Carlo standard error if sampled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlator {
    pub value: f64,
    pub stderr: Option<f64>,
    pub trials: Option<u64>,
}

/// Correlator of settings `(a_idx, b_idx)`. Monte Carlo trials are numbered
/// from `first_trial`.
pub fn correlation(
    e: &SingletEnsemble,
    a_idx: usize,
    b_idx: usize,
    estimator: Estimator,
    first_trial: u64,
) -> Result<Correlator> {
    match estimator {
        Estimator::Analytic => {
            let value = if e.mode.is_born() {
                -e.setting(a_idx)?.dot(e.setting(b_idx)?)
            } else {
                let j = e.joint_distribution(a_idx, b_idx)?;
                j[0][0] + j[1][1] - j[0][1] - j[1][0]
            };
            Ok(Correlator { value, stderr: None, trials: None })
        }
        Estimator::MonteCarlo { seed, trials, workers } => {
            let stats = simulate(e, a_idx, b_idx, seed, first_trial, trials, workers, |_| Ok(()))?;
            Ok(stats.correlator())
        }
    }
}

/// Four-setting CHSH quantity
/// `S = E(a1,b1) - E(a1,b2) + E(a2,b1) + E(a2,b2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    /// `[E(a1,b1), E(a1,b2), E(a2,b1), E(a2,b2)]`.
    pub correlators: [Correlator; 4],
    pub s: f64,
    pub s_stderr: Option<f64>,
    pub trials_per_correlator: Option<u64>,
}

/// Setting pairs in correlator order for settings `[a1, a2, b1, b2]`.
pub fn chsh_pairs(settings: [usize; 4]) -> [(usize, usize); 4] {
    let [a1, a2, b1, b2] = settings;
    [(a1, b1), (a1, b2), (a2, b1), (a2, b2)]
}

/// Coefficient of each correlator in `S`.
pub const CHSH_SIGNS: [f64; 4] = [1.0, -1.0, 1.0, 1.0];

impl ChshResult {
    pub fn from_correlators(correlators: [Correlator; 4]) -> Self {
        let s = correlators.iter().zip(CHSH_SIGNS).map(|(c, k)| k * c.value).sum();
        let s_stderr = correlators
            .iter()
            .map(|c| c.stderr.map(|e| e * e))
            .sum::<Option<f64>>()
            .map(f64::sqrt);
        let trials_per_correlator = correlators[0].trials;
        Self { correlators, s, s_stderr, trials_per_correlator }
    }
}

/// CHSH over ensemble setting indices `[a1, a2, b1, b2]`. Correlator `k`
/// uses trial ids `k * trials .. (k + 1) * trials`.
pub fn chsh(e: &SingletEnsemble, settings: [usize; 4], estimator: Estimator) -> Result<ChshResult> {
    let per = match estimator {
        Estimator::Analytic => 0,
        Estimator::MonteCarlo { trials, .. } => trials,
    };
    let mut out = [Correlator { value: 0.0, stderr: None, trials: None }; 4];
    for (k, (a, b)) in chsh_pairs(settings).into_iter().enumerate() {
        out[k] = correlation(e, a, b, estimator, k as u64 * per)?;
    }
    Ok(ChshResult::from_correlators(out))
}

/// CHSH for four explicit directions; the ensemble's direction set is
/// `[a1, a2, b1, b2]`, so a classical distribution has 16 entries.
pub fn chsh_directions(
    mode: Mode,
    a1: Direction,
    a2: Direction,
    b1: Direction,
    b2: Direction,
    estimator: Estimator,
) -> Result<ChshResult> {
    let e = SingletEnsemble::new(DirectionSet::new(vec![a1, a2, b1, b2])?, mode)?;
    chsh(&e, [0, 1, 2, 3], estimator)
}

/// Bob's predictive distribution `[P(β=+|α), P(β=-|α)]` after Alice
/// observes `alpha` along setting `a_idx`: `½ (1 - αβ n_a·n_b)`.
///
/// Only an information update; Bob's unconditional distribution is unchanged.
pub fn conditional_update(
    e: &SingletEnsemble,
    a_idx: usize,
    alpha: Sign,
    b_idx: usize,
) -> Result<[f64; 2]> {
    if !e.mode.is_born() {
        return Err(Error::UnsupportedMode(e.mode.name()));
    }
    let (na, nb) = (e.setting(a_idx)?, e.setting(b_idx)?);
    let p_alpha: f64 = Sign::BOTH.iter().map(|&b| pair_joint_probability(na, nb, alpha, b)).sum();
    Ok([
        pair_joint_probability(na, nb, alpha, Sign::Plus) / p_alpha,
        pair_joint_probability(na, nb, alpha, Sign::Minus) / p_alpha,
    ])
}
