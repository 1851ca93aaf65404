//! Signed quasi-probability tables and Born tables over hidden sign patterns.
//!
//! A [`QuasiProbTable`] assigns a real weight to each of the `2^N` sign
//! patterns of `N` planar directions so that every pairwise marginal is the
//! quantum law `¼ (1 + s_i s_j cos(θ_j - θ_i))`. At Bell-violating angles
//! some weights are necessarily negative.
//!
//! Tables are dense and indexed by [`SignPattern::index`].

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::amplitude::{intensity, Composition};
use crate::error::{Error, Result};
use crate::quatspin::{marginal_amplitude, total_amplitude, DirectionSet, Quaternion, Sign, SignPattern};

/// Residual allowed on every marginal constraint.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-10;

/// Weights at or above `-NEGATIVITY_TOLERANCE` count as nonnegative.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-12;

/// Largest direction count accepted by [`solve_weights`].
pub const MAX_SOLVE_DIRECTIONS: usize = 12;

/// Largest direction count accepted by [`born_table`].
pub const MAX_BORN_DIRECTIONS: usize = 20;

/// Signed weights over all sign patterns.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuasiProbTable {
    directions: DirectionSet,
    weights: Vec<f64>,
}

/// Normalized `|Ψ(pattern)|²` over all sign patterns.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BornTable {
    directions: DirectionSet,
    probabilities: Vec<f64>,
}

/// Joint distribution of two sign variables, indexed `[s_i][s_j]` with
/// `0 = +` and `1 = -`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairMarginal(pub [[f64; 2]; 2]);

impl PairMarginal {
    pub fn get(&self, si: Sign, sj: Sign) -> f64 {
        self.0[slot(si)][slot(sj)]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().flatten().sum()
    }

    /// Correlator `Σ s_i s_j P(s_i, s_j)`.
    pub fn correlation(&self) -> f64 {
        self.0[0][0] + self.0[1][1] - self.0[0][1] - self.0[1][0]
    }
}

fn slot(s: Sign) -> usize {
    match s {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

/// The quantum pairwise law `¼ (1 + s_i s_j cos Δ)` written with `n_i·n_j`.
pub fn quantum_pair_law(si: Sign, sj: Sign, cos_delta: f64) -> f64 {
    0.25 * (1.0 + si.times(sj).value() * cos_delta)
}

/// Closed-form three-direction weight
/// `⅛ [1 + s1 s2 cos(θ2-θ1) + s1 s3 cos(θ3-θ1) + s2 s3 cos(θ3-θ2)]`.
pub fn closed_form_w3(p: &SignPattern, angles: &[f64]) -> Result<f64> {
    if p.len() != 3 || angles.len() != 3 {
        return Err(Error::UnsupportedSize {
            n: p.len().max(angles.len()),
            reason: "closed form exists for exactly three directions",
        });
    }
    let s = |j: usize| p[j].value();
    let c = |i: usize, j: usize| (angles[j] - angles[i]).cos();
    Ok(0.125 * (1.0 + s(0) * s(1) * c(0, 1) + s(0) * s(2) * c(0, 2) + s(1) * s(2) * c(1, 2)))
}

/// Closed-form table for three planar directions.
pub fn closed_form_table(d: &DirectionSet) -> Result<QuasiProbTable> {
    let angles = d.planar_angles()?;
    let weights = SignPattern::all(d.len())
        .map(|p| closed_form_w3(&p, &angles))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuasiProbTable { directions: d.clone(), weights })
}

/// Linear constraints: normalization followed by, for every pair `i < j`
/// and every `(s_i, s_j)`, the quantum pairwise law.
fn constraint_system(d: &DirectionSet) -> (DMatrix<f64>, DVector<f64>) {
    let n = d.len();
    let cols = 1usize << n;
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let rows = 1 + 4 * pairs.len();
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut b = DVector::<f64>::zeros(rows);
    a.row_mut(0).fill(1.0);
    b[0] = 1.0;
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let cos = d[i].dot(&d[j]);
        for (q, (si, sj)) in [(Sign::Plus, Sign::Plus), (Sign::Plus, Sign::Minus), (Sign::Minus, Sign::Plus), (Sign::Minus, Sign::Minus)]
            .into_iter()
            .enumerate()
        {
            let row = 1 + 4 * k + q;
            b[row] = quantum_pair_law(si, sj, cos);
            for col in 0..cols {
                let p = SignPattern::from_index(col, n);
                if p[i] == si && p[j] == sj {
                    a[(row, col)] = 1.0;
                }
            }
        }
    }
    (a, b)
}

/// Solves for a table reproducing every pairwise quantum marginal.
///
/// The system is underdetermined (the pairwise constraints fix only the
/// constant, single and pair Walsh components of the table), so the
/// minimum-Euclidean-norm solution is returned. For three directions this is
/// exactly [`closed_form_w3`].
pub fn solve_weights(d: &DirectionSet) -> Result<QuasiProbTable> {
    let n = d.len();
    if !(2..=MAX_SOLVE_DIRECTIONS).contains(&n) {
        return Err(Error::UnsupportedSize { n, reason: "solver supports 2 to 12 directions" });
    }
    d.planar_angles()?;
    let (a, b) = constraint_system(d);
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&b, 1e-10)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let residual = (&a * &x - &b).amax();
    if residual > CONSTRAINT_TOLERANCE {
        return Err(Error::Infeasible { residual, tolerance: CONSTRAINT_TOLERANCE });
    }
    Ok(QuasiProbTable { directions: d.clone(), weights: x.iter().copied().collect() })
}

impl QuasiProbTable {
    /// Builds a table from explicit weights (one per pattern, ascending index).
    pub fn from_weights(directions: DirectionSet, weights: Vec<f64>) -> Result<Self> {
        let expected = 1usize << directions.len();
        if weights.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "table needs {expected} weights, got {}",
                weights.len()
            )));
        }
        Ok(Self { directions, weights })
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, p: &SignPattern) -> f64 {
        self.weights[p.index()]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Sum of weights over every index other than `i` and `j`.
    pub fn marginal_pair(&self, i: usize, j: usize) -> Result<PairMarginal> {
        let n = self.directions.len();
        for index in [i, j] {
            if index >= n {
                return Err(Error::IndexOutOfRange { index, len: n });
            }
        }
        if i == j {
            return Err(Error::SameIndex(i));
        }
        let mut m = [[0.0; 2]; 2];
        for (idx, w) in self.weights.iter().enumerate() {
            let si = if idx >> i & 1 == 1 { 0 } else { 1 };
            let sj = if idx >> j & 1 == 1 { 0 } else { 1 };
            m[si][sj] += w;
        }
        Ok(PairMarginal(m))
    }

    /// Distribution `[P(+), P(-)]` of a single index.
    pub fn marginal_single(&self, i: usize) -> Result<[f64; 2]> {
        let n = self.directions.len();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        let mut m = [0.0; 2];
        for (idx, w) in self.weights.iter().enumerate() {
            m[if idx >> i & 1 == 1 { 0 } else { 1 }] += w;
        }
        Ok(m)
    }

    /// Largest deviation of any pairwise marginal from the quantum law.
    pub fn max_pair_violation(&self) -> f64 {
        let n = self.directions.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let m = self.marginal_pair(i, j).expect("valid indices");
                let cos = self.directions[i].dot(&self.directions[j]);
                for si in Sign::BOTH {
                    for sj in Sign::BOTH {
                        worst = worst.max((m.get(si, sj) - quantum_pair_law(si, sj, cos)).abs());
                    }
                }
            }
        }
        worst
    }

    /// CSV with columns `s1..sN,weight`, rows in ascending pattern index.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_pattern_csv(out, self.directions.len(), "weight", &self.weights)
    }
}

pub(crate) fn write_pattern_csv<W: Write>(out: W, n: usize, column: &str, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=n).map(|j| format!("s{j}")).collect();
    header.push(column.to_string());
    w.write_record(&header)?;
    for (idx, v) in values.iter().enumerate() {
        let p = SignPattern::from_index(idx, n);
        let mut row: Vec<String> = p.signs().iter().map(|s| format!("{:+}", s.as_i8())).collect();
        row.push(v.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Result of scanning a table for negative weights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NegativityReport {
    pub min_weight: f64,
    pub negative: Vec<SignPattern>,
}

/// Minimum weight and every pattern whose weight is below
/// `-NEGATIVITY_TOLERANCE`.
pub fn negativity_report(t: &QuasiProbTable) -> NegativityReport {
    let n = t.directions.len();
    let min_weight = t.weights.iter().copied().fold(f64::INFINITY, f64::min);
    let negative = t
        .weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w < -NEGATIVITY_TOLERANCE)
        .map(|(idx, _)| SignPattern::from_index(idx, n))
        .collect();
    NegativityReport { min_weight, negative }
}

/// Normalized `|Ψ(pattern)|²` for every pattern (quaternion backend).
pub fn born_table(d: &DirectionSet) -> Result<BornTable> {
    let n = d.len();
    if n > MAX_BORN_DIRECTIONS {
        return Err(Error::UnsupportedSize { n, reason: "Born table supports at most 20 directions" });
    }
    let mut probabilities = SignPattern::all(n)
        .map(|p| total_amplitude::<Quaternion>(&p, d).map(|q| q.norm_sqr()))
        .collect::<Result<Vec<_>>>()?;
    crate::amplitude::normalize(&mut probabilities);
    Ok(BornTable { directions: d.clone(), probabilities })
}

impl BornTable {
    pub fn directions(&self) -> &DirectionSet {
        &self.directions
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, p: &SignPattern) -> f64 {
        self.probabilities[p.index()]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_pattern_csv(out, self.directions.len(), "probability", &self.probabilities)
    }
}

/// Born pair distribution for indices `(i, j)` with every other index
/// unobserved, combined according to `mode` and normalized over the four
/// sign pairs. `Coherent` sums the amplitudes of the unobserved completions
/// before squaring, `Incoherent` squares first.
pub fn born_pair_marginal(d: &DirectionSet, i: usize, j: usize, mode: Composition) -> Result<PairMarginal> {
    let n = d.len();
    for index in [i, j] {
        if index >= n {
            return Err(Error::IndexOutOfRange { index, len: n });
        }
    }
    if i == j {
        return Err(Error::SameIndex(i));
    }
    let mut m = [[0.0; 2]; 2];
    for si in Sign::BOTH {
        for sj in Sign::BOTH {
            let value = match mode {
                Composition::Coherent => {
                    let amp: Quaternion = marginal_amplitude(&[(i, si), (j, sj)], d)?;
                    intensity(&[amp], Composition::Coherent)
                }
                Composition::Incoherent => {
                    let completions: Vec<Quaternion> = SignPattern::all(n)
                        .filter(|p| p[i] == si && p[j] == sj)
                        .map(|p| total_amplitude(&p, d))
                        .collect::<Result<_>>()?;
                    intensity(&completions, Composition::Incoherent)
                }
            };
            m[slot(si)][slot(sj)] = value;
        }
    }
    let total: f64 = m.iter().flatten().sum();
    if total > 0.0 {
        m.iter_mut().flatten().for_each(|v| *v /= total);
    }
    Ok(PairMarginal(m))
}

/// Planar complex amplitudes `Σ_j s_j e^{iθ_j}` of all patterns, used to
/// cross-check the quaternion backend.
pub fn planar_amplitudes(d: &DirectionSet) -> Result<Vec<Complex64>> {
    SignPattern::all(d.len()).map(|p| total_amplitude::<Complex64>(&p, d)).collect()
}
