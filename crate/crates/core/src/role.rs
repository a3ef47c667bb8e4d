//! Life-cycle roles and distributions over them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Tolerance used when checking that shares lie on the probability simplex.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Membership role. The declaration order is the fixed row/column order of
/// every transition matrix and distribution vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Visitor,
    Novice,
    Active,
    Leader,
    Passive,
    Troll,
    /// Terminal state for members who left.
    Departed,
}

impl Role {
    pub const COUNT: usize = 7;

    pub const ALL: [Role; Role::COUNT] = [
        Role::Visitor,
        Role::Novice,
        Role::Active,
        Role::Leader,
        Role::Passive,
        Role::Troll,
        Role::Departed,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Role> {
        Role::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Visitor => "Visitor",
            Role::Novice => "Novice",
            Role::Active => "Active",
            Role::Leader => "Leader",
            Role::Passive => "Passive",
            Role::Troll => "Troll",
            Role::Departed => "Departed",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown role `{0}`")]
pub struct UnknownRole(pub String);

impl FromStr for Role {
    type Err = UnknownRole;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .iter()
            .copied()
            .find(|r| r.name() == s)
            .ok_or_else(|| UnknownRole(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistributionError {
    #[error("share for {role} is {value}, expected a finite non-negative number")]
    NegativeShare { role: Role, value: f64 },
    #[error("shares sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("cannot build a distribution from zero counts")]
    Empty,
}

/// Share of members per role. Entries are non-negative and sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionVector([f64; Role::COUNT]);

impl DistributionVector {
    /// Validates the simplex constraints within [`SIMPLEX_TOLERANCE`].
    pub fn new(shares: [f64; Role::COUNT]) -> Result<Self, DistributionError> {
        for role in Role::ALL {
            let v = shares[role.index()];
            if !v.is_finite() || v < 0.0 {
                return Err(DistributionError::NegativeShare { role, value: v });
            }
        }
        let sum: f64 = shares.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(DistributionError::NotNormalized(sum));
        }
        Ok(DistributionVector(shares))
    }

    /// Unchecked construction for values produced by stochastic arithmetic.
    pub(crate) fn from_raw(shares: [f64; Role::COUNT]) -> Self {
        DistributionVector(shares)
    }

    /// All mass on one role.
    pub fn point(role: Role) -> Self {
        let mut shares = [0.0; Role::COUNT];
        shares[role.index()] = 1.0;
        DistributionVector(shares)
    }

    pub fn from_counts(counts: &[usize; Role::COUNT]) -> Result<Self, DistributionError> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(DistributionError::Empty);
        }
        let mut shares = [0.0; Role::COUNT];
        for (s, &c) in shares.iter_mut().zip(counts) {
            *s = c as f64 / total as f64;
        }
        Ok(DistributionVector(shares))
    }

    pub fn share(&self, role: Role) -> f64 {
        self.0[role.index()]
    }

    pub fn as_array(&self) -> &[f64; Role::COUNT] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

// Serialized as an object role -> share, with every role present.
impl Serialize for DistributionVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(Role::COUNT))?;
        for role in Role::ALL {
            map.serialize_entry(role.name(), &self.0[role.index()])?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for DistributionVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use std::collections::BTreeMap;
        let raw = BTreeMap::<Role, f64>::deserialize(deserializer)?;
        // Missing roles carry no mass.
        let mut shares = [0.0; Role::COUNT];
        for (role, v) in raw {
            shares[role.index()] = v;
        }
        DistributionVector::new(shares).map_err(serde::de::Error::custom)
    }
}
