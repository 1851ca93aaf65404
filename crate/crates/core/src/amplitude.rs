//! Amplitude arithmetic shared by the spin and the path-interference models.
//!
//! Both models reduce to the same question: given the amplitudes of
//! alternatives that end in the same observed outcome, is the outcome's
//! weight `|Σ a|²` (alternatives not distinguished) or `Σ |a|²`
//! (alternatives distinguished)? [`intensity`] is the single place where
//! that choice is made.

use std::ops::{Add, Neg};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::quatspin::Quaternion;

/// A probability amplitude: complex (planar spin, paths) or quaternion (spatial spin).
pub trait Amplitude: Copy + Add<Output = Self> + Neg<Output = Self> {
    fn zero() -> Self;
    fn norm_sqr(&self) -> f64;
}

impl Amplitude for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn norm_sqr(&self) -> f64 {
        Complex64::norm_sqr(self)
    }
}

impl Amplitude for Quaternion {
    fn zero() -> Self {
        Quaternion::ZERO
    }
    fn norm_sqr(&self) -> f64 {
        Quaternion::norm_sqr(*self)
    }
}

/// How amplitudes of unobserved alternatives combine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Composition {
    /// Sum then square: the alternative is not known.
    Coherent,
    /// Square then sum: the alternative is known (which-path).
    Incoherent,
}

/// Unnormalized weight of an outcome reached through `alternatives`.
pub fn intensity<A: Amplitude>(alternatives: &[A], mode: Composition) -> f64 {
    match mode {
        Composition::Coherent => alternatives
            .iter()
            .fold(A::zero(), |acc, &a| acc + a)
            .norm_sqr(),
        Composition::Incoherent => alternatives.iter().map(Amplitude::norm_sqr).sum(),
    }
}

/// Scales `weights` in place to sum to one and returns the original sum.
pub fn normalize(weights: &mut [f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|w| *w /= total);
    }
    total
}
