use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of a direction's norm from one.
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// A measurement direction (unit vector).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    nx: f64,
    ny: f64,
    nz: f64,
    /// Set when the direction was built from a planar angle.
    theta: Option<f64>,
}

impl Direction {
    /// Validates that `(nx, ny, nz)` is a unit vector within [`UNIT_TOLERANCE`].
    pub fn new(nx: f64, ny: f64, nz: f64) -> Result<Self> {
        let norm = (nx * nx + ny * ny + nz * nz).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NonUnitDirection { nx, ny, nz, norm });
        }
        Ok(Self { nx, ny, nz, theta: None })
    }

    /// Scales an arbitrary nonzero vector to unit length.
    pub fn normalized(nx: f64, ny: f64, nz: f64) -> Result<Self> {
        let norm = (nx * nx + ny * ny + nz * nz).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroDirection);
        }
        Ok(Self { nx: nx / norm, ny: ny / norm, nz: nz / norm, theta: None })
    }

    /// Direction `(cos θ, sin θ, 0)` in the measurement plane.
    pub fn planar(theta: f64) -> Self {
        Self { nx: theta.cos(), ny: theta.sin(), nz: 0.0, theta: Some(theta) }
    }

    pub fn x_axis() -> Self {
        Self { nx: 1.0, ny: 0.0, nz: 0.0, theta: Some(0.0) }
    }

    pub fn y_axis() -> Self {
        Self { nx: 0.0, ny: 1.0, nz: 0.0, theta: Some(std::f64::consts::FRAC_PI_2) }
    }

    pub fn z_axis() -> Self {
        Self { nx: 0.0, ny: 0.0, nz: 1.0, theta: None }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn nx(&self) -> f64 {
        self.nx
    }

    pub fn ny(&self) -> f64 {
        self.ny
    }

    pub fn nz(&self) -> f64 {
        self.nz
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.nx * other.nx + self.ny * other.ny + self.nz * other.nz
    }

    pub fn is_planar(&self) -> bool {
        self.nz == 0.0
    }

    /// Planar angle: the constructing angle if known, otherwise `atan2(ny, nx)`.
    pub fn angle(&self) -> Option<f64> {
        if !self.is_planar() {
            return None;
        }
        Some(self.theta.unwrap_or_else(|| self.ny.atan2(self.nx)))
    }

    /// The antipodal direction `-n`.
    pub fn flipped(&self) -> Self {
        Self {
            nx: -self.nx,
            ny: -self.ny,
            nz: -self.nz,
            theta: self.theta.map(|t| t + std::f64::consts::PI),
        }
    }
}

/// A spin value along one direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    /// Product of two signs.
    pub fn times(self, other: Sign) -> Sign {
        if self == other {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

impl std::ops::Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        self.flip()
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Ordered, nonempty list of measurement directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionSet(Vec<Direction>);

impl DirectionSet {
    pub fn new(directions: Vec<Direction>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::EmptyDirectionSet);
        }
        Ok(Self(directions))
    }

    /// Planar directions at the given angles.
    pub fn planar(angles: &[f64]) -> Result<Self> {
        Self::new(angles.iter().copied().map(Direction::planar).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Direction> {
        self.0.iter()
    }

    pub fn get(&self, index: usize) -> Result<&Direction> {
        self.0
            .get(index)
            .ok_or(Error::IndexOutOfRange { index, len: self.0.len() })
    }

    /// Planar angles of every direction, or the first non-planar index.
    pub fn planar_angles(&self) -> Result<Vec<f64>> {
        self.0
            .iter()
            .enumerate()
            .map(|(index, d)| d.angle().ok_or(Error::NotPlanar { index, nz: d.nz }))
            .collect()
    }

    pub fn as_slice(&self) -> &[Direction] {
        &self.0
    }
}

impl Index<usize> for DirectionSet {
    type Output = Direction;
    fn index(&self, i: usize) -> &Direction {
        &self.0[i]
    }
}

/// Hidden spin state: one sign per direction.
///
/// Patterns are numbered by an integer whose bit `j` is set iff `s_j = +1`
/// (bit 0 corresponds to the first direction).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignPattern(Vec<Sign>);

impl SignPattern {
    pub fn new(signs: Vec<Sign>) -> Self {
        Self(signs)
    }

    /// Parses `"+-+"` style strings.
    pub fn parse(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                '+' => Some(Sign::Plus),
                '-' => Some(Sign::Minus),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }

    pub fn from_index(index: usize, len: usize) -> Self {
        Self(
            (0..len)
                .map(|j| if index >> j & 1 == 1 { Sign::Plus } else { Sign::Minus })
                .collect(),
        )
    }

    pub fn index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == Sign::Plus)
            .fold(0, |acc, (j, _)| acc | 1 << j)
    }

    /// All `2^len` patterns in ascending index order.
    pub fn all(len: usize) -> impl Iterator<Item = SignPattern> {
        (0..1usize << len).map(move |i| SignPattern::from_index(i, len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.0
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|s| s.flip()).collect())
    }
}

impl Index<usize> for SignPattern {
    type Output = Sign;
    fn index(&self, i: usize) -> &Sign {
        &self.0[i]
    }
}

impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_unit() {
        let err = Direction::new(1.0, 1.0, 0.0).unwrap_err();
        match err {
            Error::NonUnitDirection { norm, .. } => assert!((norm - 2f64.sqrt()).abs() < 1e-15),
            e => panic!("unexpected {e}"),
        }
        assert!(Direction::new(1.0 + 1e-13, 0.0, 0.0).is_ok());
        assert!(Direction::new(1.0 + 1e-11, 0.0, 0.0).is_err());
    }

    #[test]
    fn normalizing_constructor() {
        let d = Direction::normalized(3.0, 0.0, 4.0).unwrap();
        assert_eq!(d.components(), [0.6, 0.0, 0.8]);
        assert!(matches!(Direction::normalized(0.0, 0.0, 0.0), Err(Error::ZeroDirection)));
    }

    #[test]
    fn pattern_index_bits() {
        let p = SignPattern::parse("+-+").unwrap();
        assert_eq!(p.index(), 0b101);
        assert_eq!(SignPattern::from_index(0b101, 3), p);
        assert_eq!(SignPattern::from_index(0, 2), SignPattern::parse("--").unwrap());
        assert_eq!(p.to_string(), "(+,-,+)");
        for i in 0..16 {
            assert_eq!(SignPattern::from_index(i, 4).index(), i);
        }
    }

    #[test]
    fn empty_set_rejected() {
        assert!(matches!(DirectionSet::new(vec![]), Err(Error::EmptyDirectionSet)));
    }

    #[test]
    fn antipodes_are_kept_distinct() {
        let n = Direction::planar(0.3);
        let set = DirectionSet::new(vec![n, n.flipped()]).unwrap();
        assert_eq!(set.len(), 2);
        assert!((set[0].dot(&set[1]) + 1.0).abs() < 1e-15);
    }
}
