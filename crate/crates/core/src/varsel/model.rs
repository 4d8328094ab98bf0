use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A model: the set of included covariates, zero-based and strictly
/// increasing. `Display` prints one-based indices, e.g. `{1,4,7}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelGamma(Vec<usize>);

impl ModelGamma {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("repeated index in model".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= p {
                return Err(Error::InvalidParameter(format!("index {} exceeds p = {p}", last + 1)));
            }
        }
        Ok(Self(indices))
    }

    /// Models of a `p`-variable space from the bits of `code`.
    pub fn from_bits(code: usize, p: usize) -> Self {
        Self((0..p).filter(|j| code >> j & 1 == 1).collect())
    }

    pub fn to_bits(&self) -> usize {
        self.0.iter().map(|j| 1usize << j).sum()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// The model reached by `mv`. The move must be legal.
    pub fn apply(&self, mv: Move) -> Self {
        let mut out = self.0.clone();
        let insert = |v: &mut Vec<usize>, j: usize| {
            let at = v.binary_search(&j).unwrap_err();
            v.insert(at, j);
        };
        match mv {
            Move::Add(j) => insert(&mut out, j),
            Move::Delete(j) => out.retain(|k| *k != j),
            Move::Swap { out: o, into } => {
                out.retain(|k| *k != o);
                insert(&mut out, into);
            }
        }
        Self(out)
    }

    /// Whether `mv` leads to a neighbor of this model.
    pub fn is_legal(&self, mv: Move, p: usize) -> bool {
        match mv {
            Move::Add(j) => j < p && !self.contains(j),
            Move::Delete(j) => self.contains(j),
            Move::Swap { out, into } => self.contains(out) && into < p && !self.contains(into),
        }
    }

    /// The move taking `self` to `other`, if they are neighbors.
    pub fn move_to(&self, other: &ModelGamma) -> Option<Move> {
        let gone: Vec<usize> = self.0.iter().copied().filter(|j| !other.contains(*j)).collect();
        let new: Vec<usize> = other.0.iter().copied().filter(|j| !self.contains(*j)).collect();
        match (gone.as_slice(), new.as_slice()) {
            ([], [j]) => Some(Move::Add(*j)),
            ([j], []) => Some(Move::Delete(*j)),
            ([o], [i]) => Some(Move::Swap { out: *o, into: *i }),
            _ => None,
        }
    }

    /// The move undoing `mv`.
    pub fn reverse(mv: Move) -> Move {
        match mv {
            Move::Add(j) => Move::Delete(j),
            Move::Delete(j) => Move::Add(j),
            Move::Swap { out, into } => Move::Swap { out: into, into: out },
        }
    }
}

impl fmt::Display for ModelGamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        write!(f, "}}")
    }
}

/// A local move; indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    Add(usize),
    Delete(usize),
    Swap { out: usize, into: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveClass {
    Addition,
    Deletion,
    Swap,
}

impl Move {
    pub fn class(&self) -> MoveClass {
        match self {
            Move::Add(_) => MoveClass::Addition,
            Move::Delete(_) => MoveClass::Deletion,
            Move::Swap { .. } => MoveClass::Swap,
        }
    }
}

/// Class sizes `(additions, deletions, swaps)` of a model's neighborhood.
pub fn class_sizes(k: usize, p: usize) -> (usize, usize, usize) {
    (p - k, k, k * (p - k))
}

/// Streams the neighborhood: additions, then deletions, then swaps
/// (outer loop over the removed index).
pub fn neighborhood(gamma: &ModelGamma, p: usize) -> impl Iterator<Item = Move> + '_ {
    let outside = move || (0..p).filter(move |j| !gamma.contains(*j));
    let adds = outside().map(Move::Add);
    let dels = gamma.indices().iter().map(|j| Move::Delete(*j));
    let swaps = gamma.indices().iter().flat_map(move |o| outside().map(move |i| Move::Swap { out: *o, into: i }));
    adds.chain(dels).chain(swaps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_enumeration_p4() {
        let g = ModelGamma::new(vec![0, 2], 4).unwrap();
        let models: Vec<String> = neighborhood(&g, 4).map(|mv| g.apply(mv).to_string()).collect();
        assert_eq!(models, vec!["{1,2,3}", "{1,3,4}", "{3}", "{1}", "{2,3}", "{3,4}", "{1,2}", "{1,4}"]);
    }

    #[test]
    fn empty_model_has_only_additions() {
        let g = ModelGamma::empty();
        assert!(neighborhood(&g, 5).all(|mv| matches!(mv, Move::Add(_))));
        assert_eq!(neighborhood(&g, 5).count(), 5);
    }

    #[test]
    fn move_round_trip() {
        let g = ModelGamma::new(vec![1, 3], 6).unwrap();
        for mv in neighborhood(&g, 6) {
            let n = g.apply(mv);
            assert_eq!(g.move_to(&n), Some(mv));
            assert_eq!(n.apply(ModelGamma::reverse(mv)), g);
        }
    }

    #[test]
    fn bits_round_trip() {
        for code in 0..64 {
            assert_eq!(ModelGamma::from_bits(code, 6).to_bits(), code);
        }
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(ModelGamma::new(vec![1, 1], 3).is_err());
        assert!(ModelGamma::new(vec![3], 3).is_err());
    }
}
