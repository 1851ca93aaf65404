//! Quaternion spin amplitudes over hidden sign patterns.
//!
//! A hidden spin state assigns a definite sign `s_j` to every direction
//! `n_j` of a [`DirectionSet`]. Its amplitude is the sum of elementary
//! amplitudes `s_j (n_x I + n_y J + n_z K)`. In the plane the same model can
//! be written with complex numbers `s_j e^{i θ_j}`; both backends implement
//! [`SpinAmplitude`] and agree on every squared modulus.

mod direction;
mod quaternion;

pub use direction::{Direction, DirectionSet, Sign, SignPattern, UNIT_TOLERANCE};
pub use quaternion::{quat_mul, Quaternion};

use num_complex::Complex64;

use crate::amplitude::{intensity, Amplitude, Composition};
use crate::error::{Error, Result};

/// Maximum number of free indices a marginal is allowed to enumerate.
pub const MAX_FREE_INDICES: usize = 24;

/// Amplitude backend for hidden spin states.
pub trait SpinAmplitude: Amplitude {
    const NAME: &'static str;

    /// Amplitude of spin `sign` along `n`.
    fn elementary(sign: Sign, n: &Direction) -> Result<Self>;

    fn scaled(self, k: f64) -> Self;
}

impl SpinAmplitude for Quaternion {
    const NAME: &'static str = "quaternion";

    fn elementary(sign: Sign, n: &Direction) -> Result<Self> {
        Ok(elementary_amplitude(sign, n))
    }

    fn scaled(self, k: f64) -> Self {
        self.scale(k)
    }
}

/// Planar backend: `s e^{iθ}`. Non-planar directions are rejected.
impl SpinAmplitude for Complex64 {
    const NAME: &'static str = "complex";

    fn elementary(sign: Sign, n: &Direction) -> Result<Self> {
        if !n.is_planar() {
            return Err(Error::NotPlanar { index: 0, nz: n.nz() });
        }
        Ok(Complex64::new(n.nx(), n.ny()) * sign.value())
    }

    fn scaled(self, k: f64) -> Self {
        self * k
    }
}

/// `s (n_x I + n_y J + n_z K)`.
pub fn elementary_amplitude(sign: Sign, n: &Direction) -> Quaternion {
    let [x, y, z] = n.components();
    Quaternion::pure(x, y, z).scale(sign.value())
}

fn check_len(p: &SignPattern, d: &DirectionSet) -> Result<()> {
    if p.len() != d.len() {
        return Err(Error::LengthMismatch { pattern: p.len(), directions: d.len() });
    }
    Ok(())
}

/// Amplitude of a complete hidden state: the sum of its elementary amplitudes.
pub fn total_amplitude<A: SpinAmplitude>(p: &SignPattern, d: &DirectionSet) -> Result<A> {
    check_len(p, d)?;
    p.signs()
        .iter()
        .zip(d.iter())
        .enumerate()
        .try_fold(A::zero(), |acc, (index, (&s, n))| {
            A::elementary(s, n)
                .map(|a| acc + a)
                .map_err(|e| match e {
                    Error::NotPlanar { nz, .. } => Error::NotPlanar { index, nz },
                    e => e,
                })
        })
}

fn check_assignment(fixed: &[(usize, Sign)], n: usize) -> Result<()> {
    if fixed.is_empty() {
        return Err(Error::EmptyAssignment);
    }
    let mut seen = vec![false; n];
    for &(i, _) in fixed {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidParameter(format!("index {i} fixed twice")));
        }
    }
    Ok(())
}

/// Amplitude of a partial assignment, summing `total_amplitude` over every
/// completion of the unfixed indices.
pub fn marginal_amplitude<A: SpinAmplitude>(
    fixed: &[(usize, Sign)],
    d: &DirectionSet,
) -> Result<A> {
    let n = d.len();
    check_assignment(fixed, n)?;
    let mut template = vec![None; n];
    for &(i, s) in fixed {
        template[i] = Some(s);
    }
    let free: Vec<usize> = (0..n).filter(|&i| template[i].is_none()).collect();
    if free.len() > MAX_FREE_INDICES {
        return Err(Error::TooManyFreeIndices { free: free.len(), limit: MAX_FREE_INDICES });
    }
    let mut acc = A::zero();
    for completion in 0..1usize << free.len() {
        let mut signs: Vec<Sign> = template.iter().map(|s| s.unwrap_or(Sign::Minus)).collect();
        for (bit, &i) in free.iter().enumerate() {
            if completion >> bit & 1 == 1 {
                signs[i] = Sign::Plus;
            }
        }
        acc = acc + total_amplitude::<A>(&SignPattern::new(signs), d)?;
    }
    Ok(acc)
}

/// Closed form of [`marginal_amplitude`]: `2^{free} Σ_{j fixed} s_j n_j`.
pub fn marginal_amplitude_closed_form<A: SpinAmplitude>(
    fixed: &[(usize, Sign)],
    d: &DirectionSet,
) -> Result<A> {
    check_assignment(fixed, d.len())?;
    let free = d.len() - fixed.len();
    let mut acc = A::zero();
    for &(i, s) in fixed {
        acc = acc + A::elementary(s, &d[i])?;
    }
    Ok(acc.scaled((free as f64).exp2()))
}

/// Born probability of outcomes `(s1, s2)` along `(n1, n2)`:
/// `|s1 n1 + s2 n2|²` normalized over the four sign pairs, i.e.
/// `¼ (1 + s1 s2 n1·n2)`.
pub fn born_pair_probability(s1: Sign, s2: Sign, n1: &Direction, n2: &Direction) -> f64 {
    let amp = [elementary_amplitude(s1, n1), elementary_amplitude(s2, n2)];
    // Σ over sign pairs of |s1 n1 + s2 n2|² = 8 for unit directions.
    intensity(&amp, Composition::Coherent) / 8.0
}

/// Squared moduli of the quaternion and complex amplitudes of the same planar
/// pattern; they must coincide.
pub fn planar_cross_check(p: &SignPattern, d: &DirectionSet) -> Result<(f64, f64)> {
    let q: Quaternion = total_amplitude(p, d)?;
    let c: Complex64 = total_amplitude(p, d)?;
    Ok((q.norm_sqr(), c.norm_sqr()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn pat(s: &str) -> SignPattern {
        SignPattern::parse(s).unwrap()
    }

    #[test]
    fn elementary_at_basis_vectors() {
        assert_eq!(elementary_amplitude(Sign::Plus, &Direction::x_axis()), Quaternion::I);
        assert_eq!(elementary_amplitude(Sign::Minus, &Direction::z_axis()), -Quaternion::K);
        let q = elementary_amplitude(Sign::Minus, &Direction::normalized(1.0, 2.0, 3.0).unwrap());
        assert_eq!(q.w, 0.0);
        assert!((q.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn planar_elementary_matches_complex_polar() {
        for k in 0..64 {
            let t1 = k as f64 * 0.1;
            let t2 = 2.0 - k as f64 * 0.07;
            let (n1, n2) = (Direction::planar(t1), Direction::planar(t2));
            let q = elementary_amplitude(Sign::Plus, &n1);
            assert!((q.x - t1.cos()).abs() < 1e-15 && (q.y - t1.sin()).abs() < 1e-15);
            for s in Sign::BOTH {
                let qs = q + elementary_amplitude(s, &n2);
                let c = Complex64::from_polar(1.0, t1) + Complex64::from_polar(s.value(), t2);
                assert!((qs.norm_sqr() - c.norm_sqr()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn complex_backend_rejects_spatial_directions() {
        let d = DirectionSet::new(vec![Direction::x_axis(), Direction::z_axis()]).unwrap();
        let err = total_amplitude::<Complex64>(&pat("++"), &d).unwrap_err();
        assert!(matches!(err, Error::NotPlanar { index: 1, .. }));
    }

    #[test]
    fn total_amplitude_examples() {
        let d = DirectionSet::planar(&[0.0, PI / 3.0, 2.0 * PI / 3.0]).unwrap();
        let q: Quaternion = total_amplitude(&pat("+-+"), &d).unwrap();
        assert!(q.norm_sqr() < 1e-24, "{q}");
        let c: Complex64 = total_amplitude(&pat("+-+"), &d).unwrap();
        assert!(c.norm_sqr() < 1e-24);

        let single = DirectionSet::new(vec![Direction::y_axis()]).unwrap();
        let q: Quaternion = total_amplitude(&pat("+"), &single).unwrap();
        assert_eq!(q, Quaternion::J);

        let n = Direction::normalized(0.2, -0.5, 0.9).unwrap();
        let anti = DirectionSet::new(vec![n, n.flipped()]).unwrap();
        let q: Quaternion = total_amplitude(&pat("++"), &anti).unwrap();
        assert!(q.is_zero());
    }

    #[test]
    fn total_amplitude_length_mismatch() {
        let d = DirectionSet::planar(&[0.0, 1.0]).unwrap();
        assert!(matches!(
            total_amplitude::<Quaternion>(&pat("+"), &d),
            Err(Error::LengthMismatch { pattern: 1, directions: 2 })
        ));
    }

    #[test]
    fn marginal_by_explicit_completions() {
        let d = DirectionSet::new(vec![
            Direction::normalized(1.0, 2.0, 2.0).unwrap(),
            Direction::normalized(-1.0, 0.5, 0.0).unwrap(),
            Direction::normalized(0.0, 1.0, -3.0).unwrap(),
        ])
        .unwrap();
        let fixed = [(0, Sign::Plus), (1, Sign::Minus)];
        let m: Quaternion = marginal_amplitude(&fixed, &d).unwrap();
        // Oracle: write out both completions of s3 by hand.
        let a: Quaternion = total_amplitude(&pat("+-+"), &d).unwrap();
        let b: Quaternion = total_amplitude(&pat("+--"), &d).unwrap();
        assert!(m.max_abs_diff(a + b) < 1e-14);
        let n1 = elementary_amplitude(Sign::Plus, &d[0]);
        let n2 = elementary_amplitude(Sign::Plus, &d[1]);
        assert!(m.max_abs_diff((n1 - n2).scale(2.0)) < 1e-14);
    }

    #[test]
    fn marginal_all_fixed_is_total() {
        let d = DirectionSet::planar(&[0.1, 0.9, 2.3]).unwrap();
        let p = pat("-+-");
        let fixed: Vec<_> = p.signs().iter().copied().enumerate().collect();
        let m: Quaternion = marginal_amplitude(&fixed, &d).unwrap();
        let t: Quaternion = total_amplitude(&p, &d).unwrap();
        assert_eq!(m, t);
    }

    #[test]
    fn marginal_single_fixed_of_five() {
        let d = DirectionSet::new(
            (0..5)
                .map(|k| Direction::normalized(1.0 + k as f64, -(k as f64), 0.5 * k as f64).unwrap())
                .collect(),
        )
        .unwrap();
        let m: Quaternion = marginal_amplitude(&[(0, Sign::Plus)], &d).unwrap();
        // Oracle: 16 completions enumerated independently.
        let mut acc = Quaternion::ZERO;
        for rest in 0..16usize {
            let idx = 1 | rest << 1;
            acc += total_amplitude::<Quaternion>(&SignPattern::from_index(idx, 5), &d).unwrap();
        }
        assert!(m.max_abs_diff(acc) < 1e-12);
        assert!(m.max_abs_diff(elementary_amplitude(Sign::Plus, &d[0]).scale(16.0)) < 1e-12);
    }

    #[test]
    fn marginal_errors() {
        let d = DirectionSet::planar(&[0.0, 1.0]).unwrap();
        assert!(matches!(marginal_amplitude::<Quaternion>(&[], &d), Err(Error::EmptyAssignment)));
        assert!(matches!(
            marginal_amplitude::<Quaternion>(&[(2, Sign::Plus)], &d),
            Err(Error::IndexOutOfRange { .. })
        ));
        let big = DirectionSet::planar(&vec![0.0; 26]).unwrap();
        assert!(matches!(
            marginal_amplitude::<Quaternion>(&[(0, Sign::Plus)], &big),
            Err(Error::TooManyFreeIndices { free: 25, .. })
        ));
    }

    #[test]
    fn born_pair_examples() {
        let n = Direction::normalized(0.3, 0.4, -0.2).unwrap();
        assert!((born_pair_probability(Sign::Plus, Sign::Plus, &n, &n) - 0.5).abs() < 1e-15);
        for s1 in Sign::BOTH {
            for s2 in Sign::BOTH {
                let p = born_pair_probability(s1, s2, &Direction::x_axis(), &Direction::z_axis());
                assert!((p - 0.25).abs() < 1e-15);
            }
        }
        let p = born_pair_probability(
            Sign::Plus,
            Sign::Minus,
            &Direction::planar(0.0),
            &Direction::planar(PI / 3.0),
        );
        assert!((p - 0.125).abs() < 1e-15);
    }

    fn unit_vec() -> impl Strategy<Value = Direction> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z)| Direction::normalized(x, y, z).unwrap())
    }

    proptest! {
        #[test]
        fn anticommutator_gives_dot_product(n1 in unit_vec(), n2 in unit_vec()) {
            let q1 = elementary_amplitude(Sign::Plus, &n1);
            let q2 = elementary_amplitude(Sign::Plus, &n2);
            let lhs = q1.conj() * q2 + q2.conj() * q1;
            let rhs = Quaternion::ONE.scale(2.0 * n1.dot(&n2));
            prop_assert!(lhs.max_abs_diff(rhs) <= 1e-12);
        }

        #[test]
        fn marginal_enumeration_matches_closed_form(
            dirs in proptest::collection::vec(unit_vec(), 1..=10),
            mask in any::<u16>(),
            signs in any::<u16>(),
        ) {
            let n = dirs.len();
            let d = DirectionSet::new(dirs).unwrap();
            let mut fixed: Vec<(usize, Sign)> = (0..n)
                .filter(|j| mask >> j & 1 == 1)
                .map(|j| (j, if signs >> j & 1 == 1 { Sign::Plus } else { Sign::Minus }))
                .collect();
            if fixed.is_empty() {
                fixed.push((0, Sign::Plus));
            }
            let enumerated: Quaternion = marginal_amplitude(&fixed, &d).unwrap();
            let closed: Quaternion = marginal_amplitude_closed_form(&fixed, &d).unwrap();
            let scale = (n as f64).exp2() * n as f64;
            prop_assert!(enumerated.max_abs_diff(closed) <= 1e-13 * scale);
        }

        #[test]
        fn born_pairs_sum_to_one(n1 in unit_vec(), n2 in unit_vec()) {
            let total: f64 = Sign::BOTH.iter()
                .flat_map(|&a| Sign::BOTH.iter().map(move |&b| (a, b)))
                .map(|(a, b)| born_pair_probability(a, b, &n1, &n2))
                .sum();
            prop_assert!((total - 1.0).abs() <= 1e-15);
            let p = born_pair_probability(Sign::Plus, Sign::Minus, &n1, &n2);
            prop_assert!((p - 0.25 * (1.0 - n1.dot(&n2))).abs() <= 1e-15);
        }

        #[test]
        fn planar_backends_agree(angles in proptest::collection::vec(-PI..PI, 1..12), bits in any::<u32>()) {
            let d = DirectionSet::planar(&angles).unwrap();
            let p = SignPattern::from_index(bits as usize & ((1 << angles.len()) - 1), angles.len());
            let (q, c) = planar_cross_check(&p, &d).unwrap();
            prop_assert!((q - c).abs() <= 1e-12);
        }

        #[test]
        fn total_amplitude_is_pure(dirs in proptest::collection::vec(unit_vec(), 1..8), bits in any::<u8>()) {
            let n = dirs.len();
            let d = DirectionSet::new(dirs).unwrap();
            let q: Quaternion = total_amplitude(&SignPattern::from_index(bits as usize % (1 << n), n), &d).unwrap();
            prop_assert_eq!(q.w, 0.0);
        }
    }
}
