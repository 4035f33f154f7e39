//! Finite sets of forbidden distances.

use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::error::{AvoidError, Result};
use crate::rat::{rat, rat_string, to_f64, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    Integer,
    Real,
}

/// A finite set of forbidden distances, sorted strictly increasing, all
/// strictly positive. Values are exact rationals so that scaled copies
/// `(1/R)*D` and the certificates derived from them are reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceSet {
    values: Vec<Rat>,
    mode: DistanceMode,
}

impl DistanceSet {
    pub fn new(mut values: Vec<Rat>, mode: DistanceMode) -> Result<Self> {
        if values.is_empty() {
            return Err(AvoidError::EmptyDistanceSet);
        }
        values.sort();
        values.dedup();
        if values.iter().any(|v| !v.is_positive()) {
            return Err(AvoidError::BadDistanceValues);
        }
        if mode == DistanceMode::Integer && values.iter().any(|v| !v.denom().is_one()) {
            return Err(AvoidError::NotIntegerMode);
        }
        Ok(Self { values, mode })
    }

    pub fn from_integers(vals: &[i64]) -> Result<Self> {
        Self::new(
            vals.iter().map(|&v| rat(v as i128)).collect(),
            DistanceMode::Integer,
        )
    }

    pub fn from_rationals(vals: &[Rat]) -> Result<Self> {
        Self::new(vals.to_vec(), DistanceMode::Real)
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: non-empty
    }

    /// min D
    pub fn r_min(&self) -> Rat {
        self.values[0].clone()
    }

    /// diam D = max D (all values positive)
    pub fn diam(&self) -> Rat {
        self.values[self.values.len() - 1].clone()
    }

    pub fn integer_values(&self) -> Result<Vec<i64>> {
        if self.mode != DistanceMode::Integer {
            return Err(AvoidError::NotIntegerMode);
        }
        Ok(self.values.iter().map(|v| *v.numer() as i64).collect())
    }

    /// t * D with exact rational t > 0; result keeps integer mode when every
    /// scaled value stays integral.
    pub fn scale(&self, t: &Rat) -> Result<Self> {
        if !t.is_positive() {
            return Err(AvoidError::Precondition(
                "scale factor must be positive".into(),
            ));
        }
        let scaled: Vec<Rat> = self.values.iter().map(|v| v * t).collect();
        let mode = if scaled.iter().all(|v| v.denom().is_one()) {
            self.mode
        } else {
            DistanceMode::Real
        };
        Self::new(scaled, mode)
    }

    pub fn union(&self, other: &DistanceSet) -> Result<Self> {
        let mut vals = self.values.clone();
        vals.extend_from_slice(&other.values);
        let mode = if self.mode == DistanceMode::Integer && other.mode == DistanceMode::Integer {
            DistanceMode::Integer
        } else {
            DistanceMode::Real
        };
        Self::new(vals, mode)
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(to_f64).collect()
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.values.iter().map(rat_string).collect()
    }
}

impl std::fmt::Display for DistanceSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{{}}}", self.to_strings().join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::frac;

    #[test]
    fn invariants() {
        let d = DistanceSet::from_integers(&[3, 1, 2]).unwrap();
        assert_eq!(d.integer_values().unwrap(), vec![1, 2, 3]);
        assert_eq!(d.r_min(), rat(1));
        assert_eq!(d.diam(), rat(3));
        assert!(DistanceSet::from_integers(&[]).is_err());
        assert!(DistanceSet::from_integers(&[0, 1]).is_err());
        assert!(DistanceSet::from_integers(&[-2]).is_err());
        assert!(DistanceSet::new(vec![frac(1, 2)], DistanceMode::Integer).is_err());
    }

    #[test]
    fn scaling_keeps_exactness() {
        let d = DistanceSet::from_integers(&[1, 4]).unwrap();
        let s = d.scale(&frac(1, 4)).unwrap();
        assert_eq!(s.values(), &[frac(1, 4), rat(1)]);
        assert_eq!(s.mode(), DistanceMode::Real);
        let back = s.scale(&rat(4)).unwrap();
        assert_eq!(back.values(), &[rat(1), rat(4)]);
    }
}
